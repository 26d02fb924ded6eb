//! The evaluator contract: design spaces, fidelities and simulation results.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    build_valid_reactor, CrossSectionParams, GeometryError, NominalCoil, PathParams, ReactorGeometry, Tessellation,
    DELTA_RHO_BOUNDS, DELTA_Z_BOUNDS, RADIUS_BOUNDS,
};

/// Default fidelity box, per coordinate.
pub const FIDELITY_BOUNDS: [(f64, f64); 2] = [(1.0, 4.0), (1.0, 4.0)];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluationError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("evaluator unavailable: {0}")]
    Transport(String),
    /// An error reported by an external evaluator, with its HTTP-style status.
    #[error("{kind}: {message}")]
    Remote { status: u16, kind: String, message: String },
}

impl EvaluationError {
    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::InvalidInput(_) => "invalid-input",
            Self::Geometry(_) => "invalid-geometry",
            Self::Solver(_) => "solver-failure",
            Self::Transport(_) => "transport",
            Self::Remote { status: 400, .. } => "invalid-input",
            Self::Remote { status: 422, .. } => "invalid-geometry",
            Self::Remote { .. } => "solver-failure",
        }
    }
}

/// Axial and radial simulation fidelity, continuous while modelling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityVector {
    pub axial: f64,
    pub radial: f64,
}

impl FidelityVector {
    pub fn new(axial: f64, radial: f64) -> Self {
        Self { axial, radial }
    }

    pub fn from_slice(z: &[f64]) -> Self {
        Self::new(z[0], z[1])
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.axial, self.radial]
    }

    /// Highest fidelity of a box.
    pub fn highest(bounds: &[(f64, f64); 2]) -> Self {
        Self::new(bounds[0].1, bounds[1].1)
    }

    /// Nearest integers, clipped to the box.
    pub fn rounded(self, bounds: &[(f64, f64); 2]) -> Self {
        Self::new(
            self.axial.round().clamp(bounds[0].0, bounds[0].1),
            self.radial.round().clamp(bounds[1].0, bounds[1].1),
        )
    }

    /// Coordinates mapped to `[0, 1]` within the box.
    pub fn normalized(self, bounds: &[(f64, f64); 2]) -> [f64; 2] {
        let n = |v: f64, (lo, hi): (f64, f64)| if hi > lo { (v - lo) / (hi - lo) } else { 1.0 };
        [n(self.axial, bounds[0]), n(self.radial, bounds[1])]
    }

    pub fn check(self, bounds: &[(f64, f64); 2]) -> Result<(), EvaluationError> {
        for (name, v, (lo, hi)) in [("axial", self.axial, bounds[0]), ("radial", self.radial, bounds[1])] {
            if !(v >= lo && v <= hi) {
                return Err(EvaluationError::InvalidInput(format!(
                    "fidelity {name} = {v} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Outlet tracer trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutletSeries {
    pub time: Vec<f64>,
    pub concentration: Vec<f64>,
}

impl OutletSeries {
    /// Trapezoidal `∫C dt`.
    pub fn integral(&self) -> f64 {
        crate::rtd::trapezoid(&self.time, &self.concentration)
    }
}

/// What an evaluator returns for one `(x, z, seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    /// Concentration is normalised so the injected tracer integrates to 1.
    pub outlet_series: OutletSeries,
    /// Simulated compute seconds.
    pub cost: f64,
    pub fidelity_used: FidelityVector,
    pub seed: u64,
}

impl SimulationResult {
    /// Contract checks every evaluator's output must satisfy.
    pub fn validate(&self) -> Result<(), EvaluationError> {
        let s = &self.outlet_series;
        let bad = |m: String| Err(EvaluationError::Solver(m));
        if s.time.len() != s.concentration.len() || s.time.len() < 2 {
            return bad("outlet series must hold at least two paired samples".into());
        }
        if s.time.windows(2).any(|w| !(w[1] > w[0])) || s.time.iter().any(|t| !t.is_finite()) {
            return bad("outlet times must be finite and strictly increasing".into());
        }
        if let Some(i) = s.concentration.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return bad(format!("outlet concentration {i} is negative or non-finite"));
        }
        if !(self.cost > 0.0) || !self.cost.is_finite() {
            return bad("cost must be positive".into());
        }
        Ok(())
    }
}

/// A design space and how a decision vector maps onto a reactor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Parameterisation {
    /// `x` holds the `n_l × n_c` inducing radii (row-major) on a fixed path.
    CrossSection {
        nominal: NominalCoil,
        #[serde(default)]
        path: Option<PathParams>,
    },
    /// `x` holds `[Δρ_0 … Δρ_{n_p−1}, Δz_0 … Δz_{n_p−1}]` with circular sections.
    CoilPath { nominal: NominalCoil },
    /// A plain box, for synthetic or external objectives.
    Box { labels: Vec<String>, bounds: Vec<(f64, f64)> },
}

impl Parameterisation {
    pub fn cross_section(nominal: NominalCoil) -> Self {
        Self::CrossSection { nominal, path: None }
    }

    pub fn coil_path(nominal: NominalCoil) -> Self {
        Self::CoilPath { nominal }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::CrossSection { .. } => "cross-section",
            Self::CoilPath { .. } => "coil-path",
            Self::Box { .. } => "box",
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds().len()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match self {
            Self::CrossSection { nominal, .. } => vec![RADIUS_BOUNDS; nominal.n_l * nominal.n_c],
            Self::CoilPath { nominal } => {
                let mut b = vec![DELTA_RHO_BOUNDS; nominal.n_p];
                b.extend(vec![DELTA_Z_BOUNDS; nominal.n_p]);
                b
            }
            Self::Box { bounds, .. } => bounds.clone(),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            Self::CrossSection { nominal, .. } => (0..nominal.n_l)
                .flat_map(|j| (0..nominal.n_c).map(move |i| format!("r[{j}][{i}]")))
                .collect(),
            Self::CoilPath { nominal } => (0..nominal.n_p)
                .map(|j| format!("delta_rho[{j}]"))
                .chain((0..nominal.n_p).map(|j| format!("delta_z[{j}]")))
                .collect(),
            Self::Box { labels, .. } => labels.clone(),
        }
    }

    pub fn nominal(&self) -> Option<&NominalCoil> {
        match self {
            Self::CrossSection { nominal, .. } | Self::CoilPath { nominal } => Some(nominal),
            Self::Box { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<(), EvaluationError> {
        match self {
            Self::CrossSection { nominal, path } => {
                nominal.validate()?;
                if let Some(p) = path {
                    p.validate(nominal.n_p)?;
                }
            }
            Self::CoilPath { nominal } => nominal.validate()?,
            Self::Box { labels, bounds } => {
                if labels.len() != bounds.len() || bounds.is_empty() {
                    return Err(EvaluationError::InvalidInput(
                        "box needs one label per bound and at least one dimension".into(),
                    ));
                }
                if bounds.iter().any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
                    return Err(EvaluationError::InvalidInput("box bounds must be finite with lo < hi".into()));
                }
            }
        }
        Ok(())
    }

    /// Dimension and bound checks on a decision vector.
    pub fn check(&self, x: &[f64]) -> Result<(), EvaluationError> {
        let bounds = self.bounds();
        if x.len() != bounds.len() {
            return Err(EvaluationError::InvalidInput(format!(
                "expected {} parameters, found {}",
                bounds.len(),
                x.len()
            )));
        }
        for (i, (&v, &(lo, hi))) in x.iter().zip(&bounds).enumerate() {
            if !(v >= lo && v <= hi) {
                return Err(EvaluationError::InvalidInput(format!(
                    "parameter {i} = {v} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Builds and validates the reactor for `x`.
    pub fn geometry(&self, x: &[f64], tess: &Tessellation) -> Result<ReactorGeometry, EvaluationError> {
        self.check(x)?;
        match self {
            Self::CrossSection { nominal, path } => {
                let radii = CrossSectionParams::from_flat(x, nominal.n_l, nominal.n_c)?;
                let path = path.clone().unwrap_or_else(|| PathParams::zero(nominal.n_p));
                Ok(build_valid_reactor(Some(&radii), &path, nominal, tess)?.0)
            }
            Self::CoilPath { nominal } => {
                let path = PathParams::from_flat(x, nominal.n_p)?;
                Ok(build_valid_reactor(None, &path, nominal, tess)?.0)
            }
            Self::Box { .. } => Err(EvaluationError::InvalidInput("a box space has no geometry".into())),
        }
    }
}

/// Anything that can simulate a design at a fidelity.
pub trait Evaluator {
    fn evaluate(
        &self,
        space: &Parameterisation,
        x: &[f64],
        z: &FidelityVector,
        seed: u64,
    ) -> Result<SimulationResult, EvaluationError>;

    fn fidelity_bounds(&self) -> [(f64, f64); 2] {
        FIDELITY_BOUNDS
    }

    /// Short identifier recorded in campaign files.
    fn name(&self) -> String;
}

impl<E: Evaluator + ?Sized> Evaluator for &E {
    fn evaluate(
        &self,
        space: &Parameterisation,
        x: &[f64],
        z: &FidelityVector,
        seed: u64,
    ) -> Result<SimulationResult, EvaluationError> {
        (**self).evaluate(space, x, z, seed)
    }

    fn fidelity_bounds(&self) -> [(f64, f64); 2] {
        (**self).fidelity_bounds()
    }

    fn name(&self) -> String {
        (**self).name()
    }
}
