use nalgebra::Vector3;

use super::{GeometryError, ReactorSurface, Result};

/// Fixed, zero-padded header so identical meshes give identical bytes.
pub const STL_HEADER: &[u8] = b"coilopt binary STL";

/// A parsed facet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StlTriangle {
    pub normal: [f32; 3],
    pub vertices: [[f32; 3]; 3],
}

/// Binary little-endian STL with normals recomputed from the winding.
pub fn write_binary_stl(vertices: &[[f64; 3]], triangles: &[[u32; 3]]) -> Result<Vec<u8>> {
    let count = u32::try_from(triangles.len())
        .map_err(|_| GeometryError::Export(format!("{} triangles exceed the format limit", triangles.len())))?;
    let mut out = Vec::with_capacity(84 + 50 * triangles.len());
    let mut header = [0u8; 80];
    header[..STL_HEADER.len()].copy_from_slice(STL_HEADER);
    out.extend_from_slice(&header);
    out.extend_from_slice(&count.to_le_bytes());
    for t in triangles {
        let mut corners = [Vector3::zeros(); 3];
        for (c, &v) in corners.iter_mut().zip(t) {
            let p = vertices
                .get(v as usize)
                .ok_or_else(|| GeometryError::Export(format!("vertex index {v} out of range")))?;
            *c = Vector3::from(*p);
        }
        let n = (corners[1] - corners[0]).cross(&(corners[2] - corners[0]));
        let n = if n.norm() > 0.0 { n.normalize() } else { n };
        for x in n.iter().chain(corners.iter().flat_map(|c| c.iter())) {
            out.extend_from_slice(&(*x as f32).to_le_bytes());
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    Ok(out)
}

pub fn export_stl(surface: &ReactorSurface) -> Result<Vec<u8>> {
    write_binary_stl(&surface.vertices, &surface.triangles)
}

/// Reads binary STL facets.
pub fn parse_stl(bytes: &[u8]) -> Result<Vec<StlTriangle>> {
    if bytes.len() < 84 {
        return Err(GeometryError::Parse("shorter than the 84-byte preamble".into()));
    }
    let count = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
    let expected = 84 + 50 * count;
    if bytes.len() != expected {
        return Err(GeometryError::Parse(format!(
            "{count} facets need {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let f = |o: usize| f32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
    let v3 = |o: usize| [f(o), f(o + 4), f(o + 8)];
    Ok((0..count)
        .map(|i| {
            let o = 84 + 50 * i;
            StlTriangle {
                normal: v3(o),
                vertices: [v3(o + 12), v3(o + 24), v3(o + 36)],
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> (Vec<[f64; 3]>, Vec<[u32; 3]>) {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let t = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
        (v, t)
    }

    #[test]
    fn tetrahedron_size_and_round_trip() {
        let (v, t) = tetra();
        let bytes = write_binary_stl(&v, &t).unwrap();
        assert_eq!(bytes.len(), 284);
        assert_eq!(&bytes[..STL_HEADER.len()], STL_HEADER);
        assert!(bytes[STL_HEADER.len()..80].iter().all(|&b| b == 0));
        let facets = parse_stl(&bytes).unwrap();
        for (facet, tri) in facets.iter().zip(&t) {
            for (pv, &vi) in facet.vertices.iter().zip(tri) {
                let want = v[vi as usize].map(|x| x as f32);
                assert_eq!(pv.map(f32::to_bits), want.map(f32::to_bits));
            }
        }
        // the face opposite the origin points away from it
        let n = facets[3].normal;
        let s = 1.0 / 3f32.sqrt();
        assert!(n.iter().all(|&c| (c - s).abs() < 1e-6));
    }

    #[test]
    fn export_is_deterministic() {
        let (v, t) = tetra();
        assert_eq!(write_binary_stl(&v, &t).unwrap(), write_binary_stl(&v, &t).unwrap());
    }

    #[test]
    fn truncated_input_is_rejected() {
        let (v, t) = tetra();
        let bytes = write_binary_stl(&v, &t).unwrap();
        assert!(parse_stl(&bytes[..200]).is_err());
        assert!(write_binary_stl(&v, &[[0, 1, 9]]).is_err());
    }
}
