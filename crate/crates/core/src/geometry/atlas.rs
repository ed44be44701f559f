use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Which family of direction sets to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AtlasKind {
    /// `N` uniformly spaced directions on the unit circle (curves, n = 1).
    Circle,
    /// Subdivided icosahedron projected onto the unit sphere (surfaces, n = 2).
    Icosphere,
}

/// Combinatorics of the atlas.
#[derive(Debug, Clone, PartialEq)]
pub enum Connectivity {
    /// Vertex `i` is followed by `successors[i]`; forms a single cycle.
    Cycle(Vec<usize>),
    /// Outward-oriented triangles.
    Triangles(Vec<[usize; 3]>),
}

/// Linear functionals that recover the gradient and covariant Hessian of a
/// scalar field on the unit sphere at one vertex from the field values on a
/// three-ring stencil. Coordinates are geodesic normal coordinates in the frame
/// `(e1, e2)` of the tangent plane at the vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialStencil {
    pub neighbors: Vec<usize>,
    pub frame: [Vector3<f64>; 2],
    /// Rows: d/dx, d/dy, d2/dx2, d2/dxdy, d2/dy2; one coefficient per neighbor,
    /// applied to `f(neighbor) - f(center)`.
    pub rows: [Vec<f64>; 5],
}

impl RadialStencil {
    /// Returns `(gradient, [hxx, hxy, hyy])` of the field `values`.
    pub fn apply(&self, center: usize, values: &[f64]) -> ([f64; 2], [f64; 3]) {
        let f0 = values[center];
        let mut out = [0.0; 5];
        for (k, row) in self.rows.iter().enumerate() {
            out[k] = row
                .iter()
                .zip(&self.neighbors)
                .map(|(c, &j)| c * (values[j] - f0))
                .sum();
        }
        ([out[0], out[1]], [out[2], out[3], out[4]])
    }
}

/// A fixed set of unit directions with closed-manifold connectivity. Every
/// star-shaped surface in this crate is a radial field over one of these.
///
/// Curves store their directions with a zero `z` component.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionAtlas {
    kind: AtlasKind,
    resolution: usize,
    directions: Vec<Vector3<f64>>,
    connectivity: Connectivity,
    neighbors: Vec<Vec<usize>>,
    stencils: Vec<RadialStencil>,
}

/// Builds a direction atlas. For `Circle`, `resolution` is the point count;
/// for `Icosphere` it is the subdivision level (level `L` has `10·4^L + 2`
/// vertices; level 0 is the bare icosahedron).
pub fn build_atlas(kind: AtlasKind, resolution: usize) -> Result<DirectionAtlas> {
    match kind {
        AtlasKind::Circle => {
            if resolution == 0 {
                return invalid("circle atlas resolution must be positive");
            }
            if resolution < 3 {
                return invalid(format!(
                    "circle atlas needs at least 3 points to close a cycle, got {resolution}"
                ));
            }
            Ok(circle(resolution))
        }
        AtlasKind::Icosphere => {
            if resolution > 7 {
                return invalid(format!("icosphere level {resolution} is too large (max 7)"));
            }
            Ok(icosphere(resolution))
        }
    }
}

impl DirectionAtlas {
    pub fn kind(&self) -> AtlasKind {
        self.kind
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Intrinsic dimension `n` of the hypersurfaces built on this atlas.
    pub fn dim(&self) -> usize {
        match self.kind {
            AtlasKind::Circle => 1,
            AtlasKind::Icosphere => 2,
        }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Vector3<f64>] {
        &self.directions
    }

    pub fn connectivity(&self) -> &Connectivity {
        &self.connectivity
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        match &self.connectivity {
            Connectivity::Triangles(t) => t,
            Connectivity::Cycle(_) => &[],
        }
    }

    /// One-ring neighbours (cycle predecessor/successor for curves).
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn stencil(&self, i: usize) -> &RadialStencil {
        &self.stencils[i]
    }

    /// Number of distinct edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// `V - E + F`; 2 for a closed surface of genus 0, 0 for a cycle.
    pub fn euler_characteristic(&self) -> i64 {
        let v = self.len() as i64;
        let e = self.edge_count() as i64;
        let f = self.triangles().len() as i64;
        v - e + f
    }

    /// Checks unit norms and closed-manifold connectivity.
    pub fn validate(&self) -> Result<()> {
        for (i, d) in self.directions.iter().enumerate() {
            if (d.norm() - 1.0).abs() > 1e-12 {
                return invalid(format!("direction {i} is not unit length"));
            }
        }
        match &self.connectivity {
            Connectivity::Cycle(succ) => {
                let mut seen = vec![false; succ.len()];
                let mut i = 0;
                for _ in 0..succ.len() {
                    if seen[i] {
                        return invalid("cycle closes early");
                    }
                    seen[i] = true;
                    i = succ[i];
                }
                if i != 0 || seen.iter().any(|s| !s) {
                    return invalid("successor list is not a single cycle");
                }
            }
            Connectivity::Triangles(tris) => {
                let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
                for t in tris {
                    for k in 0..3 {
                        *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
                    }
                }
                for (&(a, b), &count) in &directed {
                    if count != 1 || directed.get(&(b, a)) != Some(&1) {
                        return invalid(format!("edge ({a}, {b}) is not shared by exactly two triangles"));
                    }
                }
                if self.euler_characteristic() != 2 {
                    return invalid(format!("Euler characteristic {} != 2", self.euler_characteristic()));
                }
            }
        }
        Ok(())
    }
}

fn circle(n: usize) -> DirectionAtlas {
    let directions: Vec<_> = (0..n)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / n as f64;
            Vector3::new(a.cos(), a.sin(), 0.0)
        })
        .collect();
    let successors: Vec<usize> = (0..n).map(|k| (k + 1) % n).collect();
    let neighbors = (0..n).map(|k| vec![(k + n - 1) % n, (k + 1) % n]).collect();
    DirectionAtlas {
        kind: AtlasKind::Circle,
        resolution: n,
        directions,
        connectivity: Connectivity::Cycle(successors),
        neighbors,
        stencils: Vec::new(),
    }
}

fn icosahedron() -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ];
    let verts = raw.iter().map(|&(x, y, z)| Vector3::new(x, y, z).normalize()).collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (verts, faces)
}

fn icosphere(level: usize) -> DirectionAtlas {
    let (mut verts, mut faces) = icosahedron();
    for _ in 0..level {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                verts.push((verts[a] + verts[b]).normalize());
                verts.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }

    let mut ring: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); verts.len()];
    for t in &faces {
        for k in 0..3 {
            ring[t[k]].insert(t[(k + 1) % 3]);
            ring[t[k]].insert(t[(k + 2) % 3]);
        }
    }
    let neighbors: Vec<Vec<usize>> = ring.into_iter().map(|s| s.into_iter().collect()).collect();
    let stencils = (0..verts.len())
        .map(|i| radial_stencil(i, &verts, &neighbors))
        .collect();

    DirectionAtlas {
        kind: AtlasKind::Icosphere,
        resolution: level,
        directions: verts,
        connectivity: Connectivity::Triangles(faces),
        neighbors,
        stencils,
    }
}

fn tangent_frame(n: &Vector3<f64>) -> [Vector3<f64>; 2] {
    let axis = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vector3::x()
    } else if n.y.abs() <= n.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1 = axis.cross(n).normalize();
    let e2 = n.cross(&e1);
    [e1, e2]
}

/// Geodesic normal coordinates of `q` around `p` on the unit sphere.
fn log_map(p: &Vector3<f64>, q: &Vector3<f64>, frame: &[Vector3<f64>; 2]) -> (f64, f64) {
    let tangential = q - p * p.dot(q);
    let s = tangential.norm();
    let angle = s.atan2(p.dot(q));
    if s == 0.0 {
        return (0.0, 0.0);
    }
    let d = tangential / s;
    (angle * d.dot(&frame[0]), angle * d.dot(&frame[1]))
}

fn radial_stencil(i: usize, verts: &[Vector3<f64>], ring1: &[Vec<usize>]) -> RadialStencil {
    // Grow rings until the stencil supports a quartic fit (or the mesh runs out).
    let mut set: BTreeSet<usize> = BTreeSet::from([i]);
    let mut frontier = vec![i];
    for _ in 0..3 {
        let mut next = Vec::new();
        for &j in &frontier {
            for &k in &ring1[j] {
                if set.insert(k) {
                    next.push(k);
                }
            }
        }
        frontier = next;
    }
    set.remove(&i);
    let neighbors: Vec<usize> = set.into_iter().collect();
    let frame = tangent_frame(&verts[i]);
    let coords: Vec<(f64, f64)> = neighbors
        .iter()
        .map(|&j| log_map(&verts[i], &verts[j], &frame))
        .collect();

    let degree = match neighbors.len() {
        m if m >= 28 => 4,
        m if m >= 14 => 3,
        _ => 2,
    };
    let cols = (degree + 1) * (degree + 2) / 2 - 1;
    let scale = coords.iter().map(|(x, y)| (x * x + y * y).sqrt()).fold(0.0, f64::max);
    let mut a = DMatrix::<f64>::zeros(neighbors.len(), cols);
    let mut weights = Vec::with_capacity(neighbors.len());
    for (r, &(x, y)) in coords.iter().enumerate() {
        // Columns are scaled by powers of the stencil radius for conditioning.
        let (u, v) = (x / scale, y / scale);
        let mut c = 0;
        for total in 1..=degree {
            for py in 0..=total {
                let px = total - py;
                let norm = (factorial(px) * factorial(py)) as f64;
                a[(r, c)] = u.powi(px as i32) * v.powi(py as i32) / norm;
                c += 1;
            }
        }
        weights.push((-2.0 * (u * u + v * v)).exp());
    }
    let w = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(weights));
    let at_w = a.transpose() * &w;
    let normal = &at_w * &a;
    let inv = normal.try_inverse().expect("stencil normal matrix is singular");
    let pinv = inv * at_w;
    // Column order per degree is x^d, x^{d-1}y, ..., y^d, with 1/(px! py!) so
    // the fitted coefficients are the partial derivatives themselves.
    let row = |k: usize, s: f64| -> Vec<f64> { pinv.row(k).iter().map(|c| c * s).collect() };
    let rows = [
        row(0, 1.0 / scale),
        row(1, 1.0 / scale),
        row(2, 1.0 / (scale * scale)),
        row(3, 1.0 / (scale * scale)),
        row(4, 1.0 / (scale * scale)),
    ];
    RadialStencil { neighbors, frame, rows }
}

fn factorial(k: usize) -> usize {
    (1..=k).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_four_points() {
        let a = build_atlas(AtlasKind::Circle, 4).unwrap();
        let expect = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (d, (x, y)) in a.directions().iter().zip(expect) {
            assert!((d.x - x).abs() < 1e-15 && (d.y - y).abs() < 1e-15);
        }
        assert_eq!(a.connectivity(), &Connectivity::Cycle(vec![1, 2, 3, 0]));
        a.validate().unwrap();
    }

    #[test]
    fn icosahedron_base() {
        let a = build_atlas(AtlasKind::Icosphere, 0).unwrap();
        assert_eq!(a.len(), 12);
        assert_eq!(a.triangles().len(), 20);
        a.validate().unwrap();
    }

    #[test]
    fn icosphere_counts() {
        for level in 1..=4 {
            let a = build_atlas(AtlasKind::Icosphere, level).unwrap();
            assert_eq!(a.len(), 10 * 4usize.pow(level as u32) + 2);
            assert_eq!(a.triangles().len(), 20 * 4usize.pow(level as u32));
            assert_eq!(a.euler_characteristic(), 2);
            a.validate().unwrap();
        }
    }

    #[test]
    fn zero_resolution_circle_rejected() {
        assert!(build_atlas(AtlasKind::Circle, 0).is_err());
    }

    #[test]
    fn stencil_reproduces_quadratics() {
        // f = x·y in ambient coordinates restricted to the sphere; check that
        // the fitted gradient matches the tangential projection of grad f.
        let a = build_atlas(AtlasKind::Icosphere, 4).unwrap();
        let vals: Vec<f64> = a.directions().iter().map(|d| d.z).collect();
        for i in (0..a.len()).step_by(97) {
            let st = a.stencil(i);
            let (g, h) = st.apply(i, &vals);
            let p = a.directions()[i];
            // grad of z on S^2 is e_z - (e_z·p)p; Hessian is -z·I.
            let ez = Vector3::z();
            let tang = ez - p * p.z;
            assert!((g[0] - tang.dot(&st.frame[0])).abs() < 1e-4);
            assert!((g[1] - tang.dot(&st.frame[1])).abs() < 1e-4);
            assert!((h[0] + p.z).abs() < 2e-3, "hxx {} vs {}", h[0], -p.z);
            assert!(h[1].abs() < 2e-3);
            assert!((h[2] + p.z).abs() < 2e-3);
        }
    }
}
