use nalgebra::Vector3;

use super::{Centerline, GeometryError, Result};

/// Orthonormal frame: `binormal = tangent × normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub tangent: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub binormal: Vector3<f64>,
}

fn initial_normal(t: &Vector3<f64>) -> Vector3<f64> {
    let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
    let axis = axes
        .iter()
        .min_by(|a, b| a.dot(t).abs().total_cmp(&b.dot(t).abs()))
        .copied()
        .unwrap_or_else(Vector3::x);
    (axis - t * axis.dot(t)).normalize()
}

/// Rotation-minimising frames by double reflection.
pub fn transport_frames(centerline: &Centerline) -> Result<Vec<Frame>> {
    let pts = &centerline.points;
    let tan = &centerline.tangents;
    let mut frames = Vec::with_capacity(pts.len());
    let t0 = tan[0];
    let r0 = initial_normal(&t0);
    frames.push(Frame {
        tangent: t0,
        normal: r0,
        binormal: t0.cross(&r0),
    });
    for i in 0..pts.len() - 1 {
        let prev = frames[i];
        let v1 = pts[i + 1] - pts[i];
        let c1 = v1.dot(&v1);
        if !(c1 > 1e-24) {
            return Err(GeometryError::DegenerateTangent { index: i + 1 });
        }
        let r_l = prev.normal - v1 * (2.0 / c1 * v1.dot(&prev.normal));
        let t_l = prev.tangent - v1 * (2.0 / c1 * v1.dot(&prev.tangent));
        let t1 = tan[i + 1];
        let v2 = t1 - t_l;
        let c2 = v2.dot(&v2);
        let r1 = if c2 > 1e-30 {
            r_l - v2 * (2.0 / c2 * v2.dot(&r_l))
        } else {
            r_l
        };
        let normal = (r1 - t1 * r1.dot(&t1)).normalize();
        frames.push(Frame {
            tangent: t1,
            normal,
            binormal: t1.cross(&normal),
        });
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_path, NominalCoil, PathParams};

    fn check_orthonormal(frames: &[Frame]) {
        for f in frames {
            for v in [f.tangent, f.normal, f.binormal] {
                assert!((v.norm() - 1.0).abs() < 1e-10);
            }
            assert!(f.tangent.dot(&f.normal).abs() < 1e-10);
            assert!(f.tangent.dot(&f.binormal).abs() < 1e-10);
            assert!(f.normal.dot(&f.binormal).abs() < 1e-10);
        }
    }

    #[test]
    fn straight_line_keeps_constant_frame() {
        let dir = Vector3::new(1.0, 2.0, -0.5).normalize();
        let pts = (0..20).map(|i| dir * i as f64).collect();
        let frames = transport_frames(&Centerline::from_points(pts).unwrap()).unwrap();
        for f in &frames {
            assert!((f.normal - frames[0].normal).norm() < 1e-12);
        }
        check_orthonormal(&frames);
    }

    #[test]
    fn planar_circle_normal_stays_in_plane_or_normal_to_it() {
        let pts: Vec<_> = (0..200)
            .map(|i| {
                let a = i as f64 * 0.03;
                Vector3::new(5.0 * a.cos(), 5.0 * a.sin(), 0.0)
            })
            .collect();
        let tangents = (0..200)
            .map(|i| {
                let a = i as f64 * 0.03;
                Vector3::new(-a.sin(), a.cos(), 0.0)
            })
            .collect();
        let frames = transport_frames(&Centerline::new(pts, tangents).unwrap()).unwrap();
        check_orthonormal(&frames);
        // a planar curve transports its out-of-plane direction unchanged
        let z0 = frames[0].normal.z.abs();
        for f in &frames {
            assert!((f.normal.z.abs() - z0).abs() < 1e-9);
        }
    }

    #[test]
    fn helix_frames_follow_analytic_transport() {
        let nominal = NominalCoil::default();
        let centre = build_path(&PathParams::zero(6), &nominal, 1000).unwrap();
        let frames = transport_frames(&centre).unwrap();
        check_orthonormal(&frames);
        let a = nominal.coil_radius;
        let c = nominal.pitch / std::f64::consts::TAU;
        let w = (a * a + c * c).sqrt();
        let angle_in_frenet = |phi: f64, u: &Vector3<f64>| {
            let n = Vector3::new(-phi.cos(), -phi.sin(), 0.0);
            let b = Vector3::new(c * phi.sin(), -c * phi.cos(), a) / w;
            u.dot(&b).atan2(u.dot(&n))
        };
        let total = nominal.total_angle();
        let alpha0 = angle_in_frenet(0.0, &frames[0].normal);
        let mut worst: f64 = 0.0;
        for (i, f) in frames.iter().enumerate() {
            let phi = total * i as f64 / 999.0;
            let expected = alpha0 - c * phi / w;
            let got = angle_in_frenet(phi, &f.normal);
            let diff = (got - expected + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU)
                - std::f64::consts::PI;
            worst = worst.max(diff.abs());
        }
        assert!(worst.to_degrees() < 0.5, "drift {}°", worst.to_degrees());
    }
}
