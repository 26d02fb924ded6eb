use std::collections::HashMap;

use nalgebra::Vector3;

use super::PortMarkers;

/// Triangulated tube surface.
///
/// Tube vertices are ring-major (`ring_size` per ring, `tube_rings` rings);
/// port extrusions and cap centres follow.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactorSurface {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
    pub ring_size: usize,
    pub ring_centers: Vec<[f64; 3]>,
    pub tube_rings: usize,
    /// Centreline arclength interval each triangle belongs to.
    pub face_span: Vec<[f64; 2]>,
    pub ports: Option<PortMarkers>,
}

impl ReactorSurface {
    /// A bare mesh with no tube structure.
    pub fn from_triangles(vertices: Vec<[f64; 3]>, triangles: Vec<[u32; 3]>) -> Self {
        let face_span = vec![[0.0, 0.0]; triangles.len()];
        Self {
            vertices,
            triangles,
            ring_size: 0,
            ring_centers: Vec::new(),
            tube_rings: 0,
            face_span,
            ports: None,
        }
    }

    fn corner(&self, t: usize) -> [Vector3<f64>; 3] {
        self.triangles[t].map(|v| Vector3::from(self.vertices[v as usize]))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corner(t);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .sum()
    }

    /// Divergence-theorem volume. Open port rings are closed implicitly with
    /// fans about their centres.
    pub fn enclosed_volume(&self) -> f64 {
        let signed = |a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>| a.dot(&b.cross(&c)) / 6.0;
        let mut v: f64 = (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corner(t);
                signed(a, b, c)
            })
            .sum();
        if let Some(ports) = &self.ports {
            for (port, inlet) in [(&ports.inlet, true), (&ports.outlet, false)] {
                if !port.faces.is_empty() {
                    continue;
                }
                let c = Vector3::from(port.center);
                let m = port.ring.len();
                for k in 0..m {
                    let a = Vector3::from(self.vertices[port.ring[k] as usize]);
                    let b = Vector3::from(self.vertices[port.ring[(k + 1) % m] as usize]);
                    v += if inlet { signed(c, b, a) } else { signed(c, a, b) };
                }
            }
        }
        v
    }
}

/// Diagnostic summary of a surface.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub triangles: usize,
    /// Every edge is shared by exactly two triangles.
    pub watertight: bool,
    /// Every shared edge is traversed in opposite directions by its two triangles.
    pub winding_consistent: bool,
    pub boundary_edges: Vec<[u32; 2]>,
    pub non_manifold_edges: usize,
    /// Intersecting triangle pairs (at most [`MAX_REPORTED`]).
    pub self_intersections: Vec<(usize, usize)>,
    /// Arclength range covering every reported intersection.
    pub intersecting_arclength: Option<(f64, f64)>,
    pub min_radius: Option<f64>,
    pub max_radius: Option<f64>,
    pub volume: f64,
    pub area: f64,
}

const MAX_REPORTED: usize = 64;

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.watertight && self.winding_consistent && self.self_intersections.is_empty()
    }
}

fn segment_hits_triangle(p: Vector3<f64>, q: Vector3<f64>, tri: &[Vector3<f64>; 3]) -> bool {
    let dir = q - p;
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    let scale = e1.norm() * e2.norm() * dir.norm();
    if det.abs() <= 1e-12 * scale {
        return false;
    }
    let inv = 1.0 / det;
    let s = p - tri[0];
    let u = inv * s.dot(&h);
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let qv = s.cross(&e1);
    let v = inv * dir.dot(&qv);
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    let t = inv * e2.dot(&qv);
    (0.0..=1.0).contains(&t)
}

fn triangles_intersect(a: &[Vector3<f64>; 3], b: &[Vector3<f64>; 3]) -> bool {
    (0..3).any(|i| segment_hits_triangle(a[i], a[(i + 1) % 3], b))
        || (0..3).any(|i| segment_hits_triangle(b[i], b[(i + 1) % 3], a))
}

fn find_intersections(surface: &ReactorSurface) -> Vec<(usize, usize)> {
    let n = surface.triangles.len();
    if n == 0 {
        return Vec::new();
    }
    let tris: Vec<[Vector3<f64>; 3]> = (0..n).map(|t| surface.corner(t)).collect();
    let mut edge_sum = 0.0;
    for t in &tris {
        edge_sum += (t[1] - t[0]).norm() + (t[2] - t[1]).norm() + (t[0] - t[2]).norm();
    }
    let cell = (2.0 * edge_sum / (3 * n) as f64).max(1e-9);
    let key = |v: f64| (v / cell).floor() as i64;
    let boxes: Vec<([f64; 3], [f64; 3])> = tris
        .iter()
        .map(|t| {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for p in t {
                for d in 0..3 {
                    lo[d] = lo[d].min(p[d]);
                    hi[d] = hi[d].max(p[d]);
                }
            }
            (lo, hi)
        })
        .collect();
    let mut grid: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    for (t, (lo, hi)) in boxes.iter().enumerate() {
        for x in key(lo[0])..=key(hi[0]) {
            for y in key(lo[1])..=key(hi[1]) {
                for z in key(lo[2])..=key(hi[2]) {
                    grid.entry((x, y, z)).or_default().push(t as u32);
                }
            }
        }
    }
    let mut seen = vec![usize::MAX; n];
    let mut hits = Vec::new();
    for a in 0..n {
        let (lo, hi) = boxes[a];
        let ta = surface.triangles[a];
        for x in key(lo[0])..=key(hi[0]) {
            for y in key(lo[1])..=key(hi[1]) {
                for z in key(lo[2])..=key(hi[2]) {
                    let Some(bucket) = grid.get(&(x, y, z)) else {
                        continue;
                    };
                    for &b in bucket {
                        let b = b as usize;
                        if b <= a || seen[b] == a {
                            continue;
                        }
                        seen[b] = a;
                        let tb = surface.triangles[b];
                        if ta.iter().any(|v| tb.contains(v)) {
                            continue;
                        }
                        let (blo, bhi) = boxes[b];
                        if (0..3).any(|d| blo[d] > hi[d] || bhi[d] < lo[d]) {
                            continue;
                        }
                        if triangles_intersect(&tris[a], &tris[b]) {
                            hits.push((a, b));
                            if hits.len() >= MAX_REPORTED {
                                return hits;
                            }
                        }
                    }
                }
            }
        }
    }
    hits
}

/// Watertightness, winding, self-intersection, radius range and volume.
///
/// Triangles sharing a vertex are never tested against each other; coplanar
/// overlaps are not detected.
pub fn validate_geometry(surface: &ReactorSurface) -> ValidationReport {
    let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(3 * surface.triangles.len());
    for t in &surface.triangles {
        for i in 0..3 {
            *directed.entry((t[i], t[(i + 1) % 3])).or_default() += 1;
        }
    }
    let mut undirected: HashMap<(u32, u32), u32> = HashMap::with_capacity(directed.len());
    for (&(a, b), &c) in &directed {
        *undirected.entry((a.min(b), a.max(b))).or_default() += c;
    }
    let mut boundary_edges: Vec<[u32; 2]> = undirected
        .iter()
        .filter(|(_, &c)| c == 1)
        .map(|(&(a, b), _)| [a, b])
        .collect();
    boundary_edges.sort_unstable();
    let non_manifold_edges = undirected.values().filter(|&&c| c > 2).count();
    let watertight = !surface.triangles.is_empty() && boundary_edges.is_empty() && non_manifold_edges == 0;
    let winding_consistent = directed
        .iter()
        .all(|(&(a, b), &c)| c == 1 && directed.get(&(b, a)).is_none_or(|&r| r == 1));

    let self_intersections = find_intersections(surface);
    let intersecting_arclength = self_intersections
        .iter()
        .flat_map(|&(a, b)| [surface.face_span[a], surface.face_span[b]])
        .fold(None, |acc: Option<(f64, f64)>, [s0, s1]| match acc {
            None => Some((s0, s1)),
            Some((lo, hi)) => Some((lo.min(s0), hi.max(s1))),
        });

    let (mut min_radius, mut max_radius) = (None::<f64>, None::<f64>);
    for ring in 0..surface.tube_rings {
        let c = Vector3::from(surface.ring_centers[ring]);
        for k in 0..surface.ring_size {
            let r = (Vector3::from(surface.vertices[ring * surface.ring_size + k]) - c).norm();
            min_radius = Some(min_radius.map_or(r, |m| m.min(r)));
            max_radius = Some(max_radius.map_or(r, |m| m.max(r)));
        }
    }

    ValidationReport {
        triangles: surface.triangles.len(),
        watertight,
        winding_consistent,
        boundary_edges,
        non_manifold_edges,
        self_intersections,
        intersecting_arclength,
        min_radius,
        max_radius,
        volume: surface.enclosed_volume(),
        area: surface.surface_area(),
    }
}
