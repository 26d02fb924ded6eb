use std::f64::consts::TAU;

use nalgebra::Vector3;

use super::{Centerline, CrossSectionCurve, Frame, GeometryError, ReactorSurface, Result};

/// Cross-section radii at arclength stations: `r_0` circles at both ends and
/// the `n_l` interpolated sections equally spaced in between.
#[derive(Debug, Clone, PartialEq)]
pub struct StationProfile {
    pub stations: Vec<f64>,
    /// `radii[station][angle sample]`.
    pub radii: Vec<Vec<f64>>,
}

impl StationProfile {
    pub fn new(curves: &[CrossSectionCurve], end_radius: f64, length: f64) -> Result<Self> {
        let Some(first) = curves.first() else {
            return Err(GeometryError::InvalidSettings("need at least one cross-section".into()));
        };
        let m = first.resolution();
        if curves.iter().any(|c| c.resolution() != m) {
            return Err(GeometryError::InvalidSettings("cross-sections differ in resolution".into()));
        }
        let n_l = curves.len();
        let mut stations = vec![0.0];
        let mut radii = vec![vec![end_radius; m]];
        for (j, c) in curves.iter().enumerate() {
            stations.push(length * (j + 1) as f64 / (n_l + 1) as f64);
            radii.push(c.radii.clone());
        }
        stations.push(length);
        radii.push(vec![end_radius; m]);
        Ok(Self { stations, radii })
    }

    pub fn resolution(&self) -> usize {
        self.radii[0].len()
    }

    pub fn length(&self) -> f64 {
        self.stations[self.stations.len() - 1]
    }

    fn lagrange(&self, first: usize, s: f64, k: usize) -> f64 {
        let xs = &self.stations[first..first + 3];
        let mut total = 0.0;
        for a in 0..3 {
            let mut w = 1.0;
            for b in 0..3 {
                if a != b {
                    w *= (s - xs[b]) / (xs[a] - xs[b]);
                }
            }
            total += w * self.radii[first + a][k];
        }
        total
    }

    /// Radius at arclength `s` and angle sample `k`: quadratics through the
    /// three stations around each interval, blended linearly across it.
    pub fn radius(&self, s: f64, k: usize) -> f64 {
        let m = self.stations.len();
        let s = s.clamp(0.0, self.length());
        let i = self.stations.partition_point(|&v| v <= s).clamp(1, m - 1) - 1;
        let left = (i >= 1).then(|| self.lagrange(i - 1, s, k));
        let right = (i + 2 < m).then(|| self.lagrange(i, s, k));
        match (left, right) {
            (Some(l), Some(r)) => {
                let w = (s - self.stations[i]) / (self.stations[i + 1] - self.stations[i]);
                (1.0 - w) * l + w * r
            }
            (Some(v), None) | (None, Some(v)) => v,
            (None, None) => {
                let w = (s - self.stations[i]) / (self.stations[i + 1] - self.stations[i]);
                (1.0 - w) * self.radii[i][k] + w * self.radii[i + 1][k]
            }
        }
    }

    pub fn ring(&self, s: f64) -> Vec<f64> {
        (0..self.resolution()).map(|k| self.radius(s, k)).collect()
    }
}

/// One open or capped end of the tube.
#[derive(Debug, Clone, PartialEq)]
pub struct PortEnd {
    /// Vertex indices of the current end ring, in angular order.
    pub ring: Vec<u32>,
    pub center: [f64; 3],
    /// Unit direction pointing out of the reactor.
    pub outward: [f64; 3],
    pub arclength: f64,
    /// Cap triangles (empty while the end is open).
    pub faces: Vec<u32>,
    pub extension: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortMarkers {
    pub inlet: PortEnd,
    pub outlet: PortEnd,
}

fn stitch(triangles: &mut Vec<[u32; 3]>, a: &[u32], b: &[u32]) {
    let m = a.len();
    for k in 0..m {
        let k1 = (k + 1) % m;
        triangles.push([a[k], a[k1], b[k1]]);
        triangles.push([a[k], b[k1], b[k]]);
    }
}

fn arr(v: Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Sweeps the station profile along the framed centreline, one ring per
/// centreline sample. The result is an open tube whose end rings are recorded
/// as port markers.
pub fn loft_surface(profile: &StationProfile, centerline: &Centerline, frames: &[Frame]) -> Result<ReactorSurface> {
    let n = centerline.len();
    if frames.len() != n {
        return Err(GeometryError::InvalidSettings("one frame per centreline sample required".into()));
    }
    let m = profile.resolution();
    let mut vertices = Vec::with_capacity(n * m);
    for i in 0..n {
        let s = centerline.arclength[i] * profile.length() / centerline.length();
        let c = centerline.points[i];
        let f = &frames[i];
        for k in 0..m {
            let (sin, cos) = (TAU * k as f64 / m as f64).sin_cos();
            let r = profile.radius(s, k);
            vertices.push(arr(c + (f.normal * cos + f.binormal * sin) * r));
        }
    }
    let ring = |i: usize| -> Vec<u32> { (0..m).map(|k| (i * m + k) as u32).collect() };
    let mut triangles = Vec::with_capacity(2 * m * (n - 1));
    let mut face_span = Vec::with_capacity(2 * m * (n - 1));
    for i in 0..n - 1 {
        stitch(&mut triangles, &ring(i), &ring(i + 1));
        face_span.extend(std::iter::repeat_n([centerline.arclength[i], centerline.arclength[i + 1]], 2 * m));
    }
    let end = |i: usize, sign: f64| PortEnd {
        ring: ring(i),
        center: arr(centerline.points[i]),
        outward: arr(centerline.tangents[i] * sign),
        arclength: centerline.arclength[i],
        faces: Vec::new(),
        extension: 0.0,
    };
    Ok(ReactorSurface {
        vertices,
        triangles,
        ring_size: m,
        ring_centers: centerline.points.iter().map(|&p| arr(p)).collect(),
        tube_rings: n,
        face_span,
        ports: Some(PortMarkers {
            inlet: end(0, -1.0),
            outlet: end(n - 1, 1.0),
        }),
    })
}

fn extend_port(surface: &mut ReactorSurface, inlet: bool, length: f64) -> Result<()> {
    let ports = surface.ports.as_ref().ok_or(GeometryError::MissingPorts)?;
    let port = if inlet { &ports.inlet } else { &ports.outlet };
    let name = if inlet { "inlet" } else { "outlet" };
    let center = Vector3::from(port.center);
    let outward = Vector3::from(port.outward);
    let dists: Vec<f64> = port
        .ring
        .iter()
        .map(|&v| (Vector3::from(surface.vertices[v as usize]) - center).norm())
        .collect();
    let (lo, hi) = dists
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
    if hi - lo > 1e-9 * hi.max(1.0) {
        return Err(GeometryError::NonCircularEndRing { end: name, spread: hi - lo });
    }
    let s = port.arclength;
    let mut ring = port.ring.clone();
    let mut cap_center = center;
    let mut triangles = std::mem::take(&mut surface.triangles);
    let first_new = triangles.len();
    if length > 0.0 {
        let shift = outward * length;
        let base = surface.vertices.len() as u32;
        for &v in &ring {
            let p = Vector3::from(surface.vertices[v as usize]) + shift;
            surface.vertices.push(arr(p));
        }
        let new_ring: Vec<u32> = (0..ring.len() as u32).map(|k| base + k).collect();
        if inlet {
            stitch(&mut triangles, &new_ring, &ring);
        } else {
            stitch(&mut triangles, &ring, &new_ring);
        }
        ring = new_ring;
        cap_center += shift;
    }
    let c = surface.vertices.len() as u32;
    surface.vertices.push(arr(cap_center));
    let cap_start = triangles.len();
    let m = ring.len();
    for k in 0..m {
        let (a, b) = (ring[k], ring[(k + 1) % m]);
        triangles.push(if inlet { [c, b, a] } else { [c, a, b] });
    }
    surface
        .face_span
        .extend(std::iter::repeat_n([s, s], triangles.len() - first_new));
    surface.triangles = triangles;
    let ports = surface.ports.as_mut().ok_or(GeometryError::MissingPorts)?;
    let port = if inlet { &mut ports.inlet } else { &mut ports.outlet };
    port.ring = ring;
    port.center = arr(cap_center);
    port.faces = (cap_start as u32..surface.triangles.len() as u32).collect();
    port.extension = length;
    Ok(())
}

/// Extrudes the circular end rings along the end tangents and closes them
/// with fan-triangulated disks.
pub fn add_ports(surface: &ReactorSurface, inlet_length: f64, outlet_length: f64) -> Result<ReactorSurface> {
    for len in [inlet_length, outlet_length] {
        if !(len >= 0.0 && len.is_finite()) {
            return Err(GeometryError::InvalidSettings("port lengths must be finite and non-negative".into()));
        }
    }
    let ports = surface.ports.as_ref().ok_or(GeometryError::MissingPorts)?;
    if !ports.inlet.faces.is_empty() || !ports.outlet.faces.is_empty() {
        return Err(GeometryError::PortsCapped);
    }
    let mut out = surface.clone();
    extend_port(&mut out, true, inlet_length)?;
    extend_port(&mut out, false, outlet_length)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> StationProfile {
        let curves: Vec<CrossSectionCurve> = [2.5, 3.5, 2.2]
            .iter()
            .map(|&r| CrossSectionCurve::circle(r, 16))
            .collect();
        StationProfile::new(&curves, 3.0, 100.0).unwrap()
    }

    #[test]
    fn profile_passes_through_stations() {
        let p = profile();
        assert_eq!(p.stations, vec![0.0, 25.0, 50.0, 75.0, 100.0]);
        for (j, &s) in p.stations.iter().enumerate() {
            assert!((p.radius(s, 3) - p.radii[j][3]).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_is_continuous() {
        let p = profile();
        for &s in &p.stations[1..4] {
            let h = 1e-9;
            assert!((p.radius(s - h, 0) - p.radius(s + h, 0)).abs() < 1e-6);
        }
    }

    #[test]
    fn profile_reproduces_quadratics() {
        let q = |s: f64| 2.0 + 0.02 * s - 1.5e-4 * s * s;
        let curves: Vec<_> = [25.0, 50.0, 75.0].iter().map(|&s| CrossSectionCurve::circle(q(s), 16)).collect();
        let mut p = StationProfile::new(&curves, q(0.0), 100.0).unwrap();
        let last = p.radii.len() - 1;
        p.radii[last] = vec![q(100.0); 16];
        for s in [3.0, 31.0, 62.5, 99.0] {
            assert!((p.radius(s, 5) - q(s)).abs() < 1e-12);
        }
    }
}
