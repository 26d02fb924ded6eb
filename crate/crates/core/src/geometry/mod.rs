//! Parametric coiled-tube reactors: cross-sections from polar GPs, a perturbed
//! helical centreline, rotation-minimising frames, lofted triangle surfaces,
//! validation and binary STL.

mod cross_section;
mod frames;
mod loft;
mod mesh;
mod path;
mod stl;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gp::GpError;

pub use cross_section::{interpolate_cross_section, CrossSectionCurve, MIN_RADIUS};
pub use frames::{transport_frames, Frame};
pub use loft::{add_ports, loft_surface, PortEnd, PortMarkers, StationProfile};
pub use mesh::{validate_geometry, ReactorSurface, ValidationReport};
pub use path::{build_path, Centerline, NaturalSpline};
pub use stl::{export_stl, parse_stl, write_binary_stl, StlTriangle, STL_HEADER};

/// Admissible cross-section radii (mm).
pub const RADIUS_BOUNDS: (f64, f64) = (2.0, 4.0);
/// Admissible radial centreline deviation (mm).
pub const DELTA_RHO_BOUNDS: (f64, f64) = (-3.5, 3.5);
/// Admissible vertical centreline deviation (mm).
pub const DELTA_Z_BOUNDS: (f64, f64) = (-1.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("{field}[{index}] = {value} outside [{lo}, {hi}]")]
    OutOfBounds {
        field: &'static str,
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("{field}: expected {expected} values, found {found}")]
    ShapeMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid setting: {0}")]
    InvalidSettings(String),
    #[error("degenerate cross-section: radius {radius:.4} mm at angle {angle:.4} rad")]
    DegenerateCrossSection { angle: f64, radius: f64 },
    #[error("degenerate tangent at centreline sample {index}")]
    DegenerateTangent { index: usize },
    #[error("self-intersection between arclength {s_start:.3} and {s_end:.3} mm")]
    SelfIntersection { s_start: f64, s_end: f64 },
    #[error("surface is not watertight ({boundary_edges} boundary edges)")]
    NotWatertight { boundary_edges: usize },
    #[error("{end} ring is not circular (radius spread {spread:e} mm)")]
    NonCircularEndRing { end: &'static str, spread: f64 },
    #[error("surface has no port markers")]
    MissingPorts,
    #[error("ports already capped")]
    PortsCapped,
    #[error("STL export: {0}")]
    Export(String),
    #[error("STL parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Gp(#[from] GpError),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// The baseline reactor every design perturbs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalCoil {
    /// Axial rise per turn (mm).
    pub pitch: f64,
    /// Helix radius (mm).
    pub coil_radius: f64,
    pub turns: u32,
    /// Radius of the constant end cross-sections and of every section in the
    /// path-only parameterisation (mm).
    pub tube_radius: f64,
    /// Inducing angles per cross-section.
    pub n_c: usize,
    /// Cross-sections along the coil.
    pub n_l: usize,
    /// Centreline deviation stations.
    pub n_p: usize,
}

impl Default for NominalCoil {
    fn default() -> Self {
        Self {
            pitch: 10.4,
            coil_radius: 12.5,
            turns: 2,
            tube_radius: 3.0,
            n_c: 6,
            n_l: 6,
            n_p: 6,
        }
    }
}

impl NominalCoil {
    /// Total swept angle.
    pub fn total_angle(&self) -> f64 {
        std::f64::consts::TAU * self.turns as f64
    }

    /// Conventional reactor length `2π·C·turns` (circumferential, pitch ignored).
    pub fn path_length(&self) -> f64 {
        self.total_angle() * self.coil_radius
    }

    /// Arc length of the unperturbed helix.
    pub fn helix_length(&self) -> f64 {
        let c = self.pitch / std::f64::consts::TAU;
        self.total_angle() * (self.coil_radius * self.coil_radius + c * c).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GeometryError::InvalidSettings(m.to_string()));
        if !(self.pitch > 0.0) {
            return bad("pitch must be positive");
        }
        if !(self.coil_radius + DELTA_RHO_BOUNDS.0 > RADIUS_BOUNDS.1) {
            return bad("coil radius too small for the radial deviation and tube bounds");
        }
        if self.turns == 0 {
            return bad("turns must be positive");
        }
        if !(self.tube_radius >= RADIUS_BOUNDS.0 && self.tube_radius <= RADIUS_BOUNDS.1) {
            return bad("tube radius outside the cross-section bounds");
        }
        if self.n_c < 3 || self.n_l < 1 || self.n_p < 2 {
            return bad("need n_c >= 3, n_l >= 1 and n_p >= 2");
        }
        Ok(())
    }
}

fn check_bounds(field: &'static str, values: &[f64], (lo, hi): (f64, f64)) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !(value >= lo && value <= hi) {
            return Err(GeometryError::OutOfBounds {
                field,
                index,
                value,
                lo,
                hi,
            });
        }
    }
    Ok(())
}

/// Inducing radii, `n_l` rows of `n_c` angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionParams {
    pub radii: Vec<Vec<f64>>,
}

impl CrossSectionParams {
    pub fn uniform(n_l: usize, n_c: usize, radius: f64) -> Self {
        Self {
            radii: vec![vec![radius; n_c]; n_l],
        }
    }

    /// Row-major unpacking of a flat decision vector.
    pub fn from_flat(values: &[f64], n_l: usize, n_c: usize) -> Result<Self> {
        if values.len() != n_l * n_c {
            return Err(GeometryError::ShapeMismatch {
                field: "radii",
                expected: n_l * n_c,
                found: values.len(),
            });
        }
        Ok(Self {
            radii: values.chunks(n_c).map(<[f64]>::to_vec).collect(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.radii.iter().flatten().copied().collect()
    }

    pub fn validate(&self, n_l: usize, n_c: usize) -> Result<()> {
        if self.radii.len() != n_l {
            return Err(GeometryError::ShapeMismatch {
                field: "radii",
                expected: n_l,
                found: self.radii.len(),
            });
        }
        for row in &self.radii {
            if row.len() != n_c {
                return Err(GeometryError::ShapeMismatch {
                    field: "radii row",
                    expected: n_c,
                    found: row.len(),
                });
            }
        }
        check_bounds("radii", &self.to_flat(), RADIUS_BOUNDS)
    }
}

/// Centreline deviations at `n_p` equally spaced angular stations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub delta_rho: Vec<f64>,
    pub delta_z: Vec<f64>,
}

impl PathParams {
    pub fn zero(n_p: usize) -> Self {
        Self {
            delta_rho: vec![0.0; n_p],
            delta_z: vec![0.0; n_p],
        }
    }

    /// `[Δρ_0 … Δρ_{n−1}, Δz_0 … Δz_{n−1}]`.
    pub fn from_flat(values: &[f64], n_p: usize) -> Result<Self> {
        if values.len() != 2 * n_p {
            return Err(GeometryError::ShapeMismatch {
                field: "path",
                expected: 2 * n_p,
                found: values.len(),
            });
        }
        Ok(Self {
            delta_rho: values[..n_p].to_vec(),
            delta_z: values[n_p..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.delta_rho.iter().chain(&self.delta_z).copied().collect()
    }

    pub fn n_p(&self) -> usize {
        self.delta_rho.len()
    }

    pub fn validate(&self, n_p: usize) -> Result<()> {
        for (field, v) in [("delta_rho", &self.delta_rho), ("delta_z", &self.delta_z)] {
            if v.len() != n_p {
                return Err(GeometryError::ShapeMismatch {
                    field,
                    expected: n_p,
                    found: v.len(),
                });
            }
        }
        check_bounds("delta_rho", &self.delta_rho, DELTA_RHO_BOUNDS)?;
        check_bounds("delta_z", &self.delta_z, DELTA_Z_BOUNDS)
    }
}

/// Surface resolution and port lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tessellation {
    pub rings_per_turn: usize,
    pub ring_vertices: usize,
    pub inlet_length: f64,
    pub outlet_length: f64,
}

impl Default for Tessellation {
    fn default() -> Self {
        Self {
            rings_per_turn: 64,
            ring_vertices: 48,
            inlet_length: 10.0,
            outlet_length: 10.0,
        }
    }
}

impl Tessellation {
    pub fn axial_sections(&self, nominal: &NominalCoil) -> usize {
        self.rings_per_turn * nominal.turns as usize + 1
    }
}

/// Everything derived from one design: centreline, frames, radius profile and
/// the closed surface with ports.
#[derive(Debug, Clone)]
pub struct ReactorGeometry {
    pub centerline: Centerline,
    pub frames: Vec<Frame>,
    pub profile: StationProfile,
    pub surface: ReactorSurface,
}

impl ReactorGeometry {
    /// Total centreline arclength (mm).
    pub fn length(&self) -> f64 {
        self.centerline.length()
    }
}

/// Builds the reactor for a path and optional cross-sections (constant `r_0`
/// sections when `radii` is `None`). The surface is not validated.
pub fn build_reactor(
    radii: Option<&CrossSectionParams>,
    path: &PathParams,
    nominal: &NominalCoil,
    tess: &Tessellation,
) -> Result<ReactorGeometry> {
    nominal.validate()?;
    if tess.rings_per_turn < 4 || tess.ring_vertices < 16 {
        return Err(GeometryError::InvalidSettings(
            "need at least 4 rings per turn and 16 vertices per ring".into(),
        ));
    }
    path.validate(nominal.n_p)?;
    let centerline = build_path(path, nominal, tess.axial_sections(nominal))?;
    let frames = transport_frames(&centerline)?;
    let curves = match radii {
        Some(r) => {
            r.validate(nominal.n_l, nominal.n_c)?;
            r.radii
                .iter()
                .map(|row| interpolate_cross_section(row, tess.ring_vertices))
                .collect::<Result<Vec<_>>>()?
        }
        None => vec![CrossSectionCurve::circle(nominal.tube_radius, tess.ring_vertices); nominal.n_l],
    };
    let profile = StationProfile::new(&curves, nominal.tube_radius, centerline.length())?;
    let open = loft_surface(&profile, &centerline, &frames)?;
    let surface = add_ports(&open, tess.inlet_length, tess.outlet_length)?;
    Ok(ReactorGeometry {
        centerline,
        frames,
        profile,
        surface,
    })
}

/// [`build_reactor`] followed by validation; invalid surfaces become errors.
pub fn build_valid_reactor(
    radii: Option<&CrossSectionParams>,
    path: &PathParams,
    nominal: &NominalCoil,
    tess: &Tessellation,
) -> Result<(ReactorGeometry, ValidationReport)> {
    let geometry = build_reactor(radii, path, nominal, tess)?;
    let report = validate_geometry(&geometry.surface);
    if !report.watertight || !report.winding_consistent {
        return Err(GeometryError::NotWatertight {
            boundary_edges: report.boundary_edges.len(),
        });
    }
    if let Some((s_start, s_end)) = report.intersecting_arclength {
        return Err(GeometryError::SelfIntersection { s_start, s_end });
    }
    Ok((geometry, report))
}
