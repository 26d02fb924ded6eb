use std::f64::consts::{PI, TAU};
use std::io::Cursor;

use coilopt::geometry::*;
use coilopt::optim::rng_from_seed;
use nalgebra::Vector3;
use rand::Rng;

fn random_radii<R: Rng>(rng: &mut R, nominal: &NominalCoil) -> CrossSectionParams {
    let values: Vec<f64> = (0..nominal.n_l * nominal.n_c)
        .map(|_| rng.random_range(RADIUS_BOUNDS.0..=RADIUS_BOUNDS.1))
        .collect();
    CrossSectionParams::from_flat(&values, nominal.n_l, nominal.n_c).unwrap()
}

fn random_path<R: Rng>(rng: &mut R, n_p: usize) -> PathParams {
    PathParams {
        delta_rho: (0..n_p).map(|_| rng.random_range(DELTA_RHO_BOUNDS.0..=DELTA_RHO_BOUNDS.1)).collect(),
        delta_z: (0..n_p).map(|_| rng.random_range(DELTA_Z_BOUNDS.0..=DELTA_Z_BOUNDS.1)).collect(),
    }
}

fn open_tube(radius: f64) -> (ReactorSurface, Centerline) {
    let nominal = NominalCoil::default();
    let tess = Tessellation::default();
    let centre = build_path(&PathParams::zero(6), &nominal, tess.axial_sections(&nominal)).unwrap();
    let frames = transport_frames(&centre).unwrap();
    let curves = vec![CrossSectionCurve::circle(radius, 48); 6];
    let profile = StationProfile::new(&curves, radius, centre.length()).unwrap();
    (loft_surface(&profile, &centre, &frames).unwrap(), centre)
}

fn uv_sphere(r: f64, stacks: usize, slices: usize) -> ReactorSurface {
    let mut v = vec![[0.0, 0.0, r]];
    for i in 1..stacks {
        let th = PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let ph = TAU * j as f64 / slices as f64;
            v.push([r * th.sin() * ph.cos(), r * th.sin() * ph.sin(), r * th.cos()]);
        }
    }
    v.push([0.0, 0.0, -r]);
    let south = (v.len() - 1) as u32;
    let idx = |i: usize, j: usize| (1 + (i - 1) * slices + j % slices) as u32;
    let mut t = Vec::new();
    for j in 0..slices {
        t.push([0, idx(1, j), idx(1, j + 1)]);
        t.push([south, idx(stacks - 1, j + 1), idx(stacks - 1, j)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            t.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            t.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    ReactorSurface::from_triangles(v, t)
}

#[test]
fn constant_loft_is_a_tube_of_that_radius() {
    let (surface, centre) = open_tube(3.0);
    let m = surface.ring_size;
    for (i, p) in centre.points.iter().enumerate() {
        for k in 0..m {
            let v = Vector3::from(surface.vertices[i * m + k]);
            assert!(((v - p).norm() - 3.0).abs() < 1e-6);
        }
    }
}

#[test]
fn nominal_reactor_volume_matches_tube_formula() {
    let nominal = NominalCoil::default();
    let g = build_reactor(None, &PathParams::zero(6), &nominal, &Tessellation::default()).unwrap();
    let report = validate_geometry(&g.surface);
    assert!(report.is_valid());
    // ports extend the tube by 20 mm of straight cylinder
    let r0 = nominal.tube_radius;
    let ports = PI * r0 * r0 * 20.0;
    let target = PI * r0 * r0 * nominal.path_length();
    assert!(((report.volume - ports) - target).abs() / target < 0.01, "volume {}", report.volume);
    assert_eq!(g.surface.triangles.len(), 12288 + 192 + 96);
}

#[test]
fn ring_radius_at_station_matches_its_curve() {
    let nominal = NominalCoil::default();
    let mut rng = rng_from_seed(11);
    let params = random_radii(&mut rng, &nominal);
    let g = build_reactor(Some(&params), &PathParams::zero(6), &nominal, &Tessellation::default()).unwrap();
    for (j, row) in params.radii.iter().enumerate() {
        let curve = interpolate_cross_section(row, 48).unwrap();
        let s = g.profile.stations[j + 1];
        for (k, r) in curve.radii.iter().enumerate() {
            assert!((g.profile.radius(s, k) - r).abs() < 1e-9);
        }
    }
}

#[test]
fn random_designs_validate_clean() {
    let nominal = NominalCoil::default();
    let tess = Tessellation::default();
    let mut rng = rng_from_seed(5);
    for _ in 0..10 {
        let radii = random_radii(&mut rng, &nominal);
        build_valid_reactor(Some(&radii), &PathParams::zero(6), &nominal, &tess).unwrap();
        let path = random_path(&mut rng, nominal.n_p);
        build_valid_reactor(None, &path, &nominal, &tess).unwrap();
    }
}

#[test]
fn turns_keep_their_clearance() {
    let nominal = NominalCoil::default();
    let mut rng = rng_from_seed(17);
    for _ in 0..100 {
        let c = build_path(&random_path(&mut rng, 6), &nominal, 257).unwrap();
        let phi = |i: usize| nominal.total_angle() * i as f64 / 256.0;
        let mut clearance = f64::INFINITY;
        for i in 0..c.len() {
            for j in (i + 1)..c.len() {
                if phi(j) - phi(i) >= PI {
                    clearance = clearance.min((c.points[i] - c.points[j]).norm());
                }
            }
        }
        assert!(clearance > 2.0 * RADIUS_BOUNDS.1, "clearance {clearance}");
    }
}

#[test]
fn zero_length_ports_only_cap() {
    let (open, _) = open_tube(3.0);
    let closed = add_ports(&open, 0.0, 0.0).unwrap();
    assert!((closed.enclosed_volume() - open.enclosed_volume()).abs() < 1e-9);
    assert_eq!(closed.triangles.len(), open.triangles.len() + 96);
    assert!(validate_geometry(&closed).watertight);
    assert!(matches!(add_ports(&closed, 1.0, 1.0), Err(GeometryError::PortsCapped)));
}

#[test]
fn extension_adds_cylinder_area() {
    let (open, _) = open_tube(3.0);
    let a0 = add_ports(&open, 0.0, 0.0).unwrap();
    let a1 = add_ports(&open, 10.0, 0.0).unwrap();
    let gain = a1.surface_area() - a0.surface_area();
    let expected = TAU * 3.0 * 10.0;
    assert!((gain - expected).abs() / expected < 0.01);
    let report = validate_geometry(&a1);
    assert!(report.watertight && report.winding_consistent);
}

#[test]
fn non_circular_end_is_rejected() {
    let (mut open, _) = open_tube(3.0);
    open.vertices[0][2] += 0.1;
    assert!(matches!(
        add_ports(&open, 0.0, 0.0),
        Err(GeometryError::NonCircularEndRing { end: "inlet", .. })
    ));
}

#[test]
fn sphere_volume_and_watertightness() {
    let s = uv_sphere(2.0, 72, 72);
    assert!(s.triangles.len() >= 10_000);
    let r = validate_geometry(&s);
    assert!(r.is_valid());
    let exact = 4.0 / 3.0 * PI * 8.0;
    assert!((r.volume - exact).abs() / exact < 0.01);
    assert!(r.min_radius.is_none());
}

#[test]
fn deleted_triangle_leaves_three_boundary_edges() {
    let mut s = uv_sphere(1.0, 20, 20);
    s.triangles.remove(50);
    s.face_span.remove(50);
    let r = validate_geometry(&s);
    assert!(!r.watertight);
    assert_eq!(r.boundary_edges.len(), 3);
}

#[test]
fn flipped_triangle_breaks_winding() {
    let mut s = uv_sphere(1.0, 20, 20);
    s.triangles[7].swap(1, 2);
    let r = validate_geometry(&s);
    assert!(r.watertight && !r.winding_consistent);
}

#[test]
fn overlapping_tubes_intersect() {
    let (open, _) = open_tube(3.0);
    let a = add_ports(&open, 0.0, 0.0).unwrap();
    let mut b = a.clone();
    for v in &mut b.vertices {
        v[0] += 2.0;
    }
    let offset = a.vertices.len() as u32;
    let mut merged = a.clone();
    merged.vertices.extend(&b.vertices);
    merged.triangles.extend(b.triangles.iter().map(|t| t.map(|i| i + offset)));
    merged.face_span.extend(&b.face_span);
    let r = validate_geometry(&merged);
    assert!(r.watertight);
    assert!(!r.self_intersections.is_empty());
    assert!(r.intersecting_arclength.is_some());
}

#[test]
fn nominal_stl_is_manifold_for_an_independent_reader() {
    let g = build_reactor(None, &PathParams::zero(6), &NominalCoil::default(), &Tessellation::default()).unwrap();
    let bytes = export_stl(&g.surface).unwrap();
    assert_eq!(bytes.len(), 84 + 50 * g.surface.triangles.len());
    let mesh = stl_io::read_stl(&mut Cursor::new(&bytes)).unwrap();
    assert_eq!(mesh.faces.len(), g.surface.triangles.len());
    mesh.validate().unwrap();
    let parsed = parse_stl(&bytes).unwrap();
    for (facet, t) in parsed.iter().zip(&g.surface.triangles) {
        for (p, &v) in facet.vertices.iter().zip(t) {
            let want = g.surface.vertices[v as usize].map(|x| x as f32);
            assert_eq!(p.map(f32::to_bits), want.map(f32::to_bits));
        }
    }
}

#[test]
fn out_of_bounds_parameters_are_rejected() {
    let nominal = NominalCoil::default();
    let mut radii = CrossSectionParams::uniform(6, 6, 3.0);
    radii.radii[2][4] = 4.5;
    let err = build_reactor(Some(&radii), &PathParams::zero(6), &nominal, &Tessellation::default()).unwrap_err();
    assert!(matches!(err, GeometryError::OutOfBounds { field: "radii", index: 16, .. }));
    let mut path = PathParams::zero(6);
    path.delta_z[0] = -1.5;
    assert!(build_reactor(None, &path, &nominal, &Tessellation::default()).is_err());
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn in_bounds_cross_sections_pass_through_inducing_points(
            row in proptest::collection::vec(RADIUS_BOUNDS.0..=RADIUS_BOUNDS.1, 6)
        ) {
            let c = interpolate_cross_section(&row, 48).unwrap();
            for (i, r) in row.iter().enumerate() {
                prop_assert!((c.radii[8 * i] - r).abs() < 1e-6);
            }
        }

        #[test]
        fn frames_stay_orthonormal(
            rho in proptest::collection::vec(DELTA_RHO_BOUNDS.0..=DELTA_RHO_BOUNDS.1, 6),
            z in proptest::collection::vec(DELTA_Z_BOUNDS.0..=DELTA_Z_BOUNDS.1, 6),
        ) {
            let c = build_path(&PathParams { delta_rho: rho, delta_z: z }, &NominalCoil::default(), 129).unwrap();
            for f in transport_frames(&c).unwrap() {
                prop_assert!((f.normal.norm() - 1.0).abs() < 1e-10);
                prop_assert!((f.binormal.norm() - 1.0).abs() < 1e-10);
                prop_assert!(f.tangent.dot(&f.normal).abs() < 1e-10);
                prop_assert!(f.normal.dot(&f.binormal).abs() < 1e-10);
            }
        }

        #[test]
        fn path_designs_are_watertight(
            rho in proptest::collection::vec(DELTA_RHO_BOUNDS.0..=DELTA_RHO_BOUNDS.1, 6),
            z in proptest::collection::vec(DELTA_Z_BOUNDS.0..=DELTA_Z_BOUNDS.1, 6),
        ) {
            let path = PathParams { delta_rho: rho, delta_z: z };
            prop_assert!(build_valid_reactor(None, &path, &NominalCoil::default(), &Tessellation::default()).is_ok());
        }
    }
}
