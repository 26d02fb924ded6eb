use nalgebra::Vector3;

use super::{GeometryError, NominalCoil, PathParams, Result, DELTA_RHO_BOUNDS, DELTA_Z_BOUNDS};

/// Natural cubic spline on uniformly spaced knots.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(x0: f64, h: f64, y: &[f64]) -> Self {
        assert!(y.len() >= 2 && h > 0.0);
        let n = y.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for the interior second derivatives
            let k = n - 2;
            let mut c = vec![0.0; k];
            let mut d = vec![0.0; k];
            for i in 0..k {
                let rhs = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]) / (h * h);
                let (sub, diag) = if i == 0 { (0.0, 4.0) } else { (1.0, 4.0 - c[i - 1]) };
                c[i] = 1.0 / diag;
                d[i] = (rhs - sub * if i == 0 { 0.0 } else { d[i - 1] }) / diag;
            }
            for i in (0..k).rev() {
                m[i + 1] = d[i] - if i + 1 < k { c[i] * m[i + 2] } else { 0.0 };
            }
        }
        Self {
            x0,
            h,
            y: y.to_vec(),
            m,
        }
    }

    fn segment(&self, x: f64) -> usize {
        let i = ((x - self.x0) / self.h).floor();
        (i.max(0.0) as usize).min(self.y.len() - 2)
    }

    /// Value and first derivative.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let i = self.segment(x);
        let h = self.h;
        let xi = self.x0 + i as f64 * h;
        let (a, b) = (xi + h - x, x - xi);
        let (mi, mj) = (self.m[i], self.m[i + 1]);
        let ci = self.y[i] / h - mi * h / 6.0;
        let cj = self.y[i + 1] / h - mj * h / 6.0;
        let value = mi * a.powi(3) / (6.0 * h) + mj * b.powi(3) / (6.0 * h) + ci * a + cj * b;
        let slope = -mi * a * a / (2.0 * h) + mj * b * b / (2.0 * h) - ci + cj;
        (value, slope)
    }
}

/// Sampled centreline with unit tangents and cumulative chord arclength.
#[derive(Debug, Clone, PartialEq)]
pub struct Centerline {
    pub points: Vec<Vector3<f64>>,
    pub tangents: Vec<Vector3<f64>>,
    pub arclength: Vec<f64>,
}

impl Centerline {
    /// Tangents are normalised; consecutive points must be distinct.
    pub fn new(points: Vec<Vector3<f64>>, tangents: Vec<Vector3<f64>>) -> Result<Self> {
        if points.len() < 2 || points.len() != tangents.len() {
            return Err(GeometryError::InvalidSettings(
                "centreline needs at least two samples with one tangent each".into(),
            ));
        }
        let mut arclength = Vec::with_capacity(points.len());
        arclength.push(0.0);
        for i in 1..points.len() {
            let ds = (points[i] - points[i - 1]).norm();
            if !(ds > 1e-12) {
                return Err(GeometryError::DegenerateTangent { index: i });
            }
            arclength.push(arclength[i - 1] + ds);
        }
        let mut unit = Vec::with_capacity(tangents.len());
        for (index, t) in tangents.into_iter().enumerate() {
            let n = t.norm();
            if !(n > 1e-12) || !n.is_finite() {
                return Err(GeometryError::DegenerateTangent { index });
            }
            unit.push(t / n);
        }
        Ok(Self {
            points,
            tangents: unit,
            arclength,
        })
    }

    /// Tangents by finite differences (one-sided at the ends).
    pub fn from_points(points: Vec<Vector3<f64>>) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(GeometryError::InvalidSettings("centreline needs at least two samples".into()));
        }
        let tangents = (0..n)
            .map(|i| points[(i + 1).min(n - 1)] - points[i.saturating_sub(1)])
            .collect();
        Self::new(points, tangents)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.arclength[self.arclength.len() - 1]
    }

    /// Discrete curvature from the turning of neighbouring tangents.
    pub fn curvature(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
                let angle = self.tangents[a].dot(&self.tangents[b]).clamp(-1.0, 1.0).acos();
                angle / (self.arclength[b] - self.arclength[a])
            })
            .collect()
    }

    /// Linear interpolation of per-sample `values` at arclength `s`.
    pub fn interpolate(&self, values: &[f64], s: f64) -> f64 {
        let s = s.clamp(0.0, self.length());
        let i = self.arclength.partition_point(|&v| v <= s).clamp(1, self.len() - 1);
        let (s0, s1) = (self.arclength[i - 1], self.arclength[i]);
        let w = (s - s0) / (s1 - s0);
        values[i - 1] + w * (values[i] - values[i - 1])
    }
}

/// Helix `ρ = C + Δρ(φ)`, `z = pφ/2π + Δz(φ)` with the deviations splined
/// through `n_p` equally spaced stations in `φ ∈ [0, 2π·turns]` and clipped to
/// their bounds. `samples` points are taken uniformly in `φ`.
pub fn build_path(params: &PathParams, nominal: &NominalCoil, samples: usize) -> Result<Centerline> {
    params.validate(nominal.n_p)?;
    if samples < 2 {
        return Err(GeometryError::InvalidSettings("need at least two path samples".into()));
    }
    let total = nominal.total_angle();
    let h = total / (nominal.n_p - 1) as f64;
    let rho = NaturalSpline::new(0.0, h, &params.delta_rho);
    let dz = NaturalSpline::new(0.0, h, &params.delta_z);
    let rise = nominal.pitch / std::f64::consts::TAU;
    let clipped = |spline: &NaturalSpline, phi: f64, (lo, hi): (f64, f64)| {
        let (v, d) = spline.eval(phi);
        if v < lo {
            (lo, 0.0)
        } else if v > hi {
            (hi, 0.0)
        } else {
            (v, d)
        }
    };
    let mut points = Vec::with_capacity(samples);
    let mut tangents = Vec::with_capacity(samples);
    for i in 0..samples {
        let phi = total * i as f64 / (samples - 1) as f64;
        let (dr, dr_dphi) = clipped(&rho, phi, DELTA_RHO_BOUNDS);
        let (dzv, dz_dphi) = clipped(&dz, phi, DELTA_Z_BOUNDS);
        let r = nominal.coil_radius + dr;
        let (s, c) = phi.sin_cos();
        points.push(Vector3::new(r * c, r * s, rise * phi + dzv));
        tangents.push(Vector3::new(dr_dphi * c - r * s, dr_dphi * s + r * c, rise + dz_dphi));
    }
    Centerline::new(points, tangents)
}
