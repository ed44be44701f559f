use nalgebra::Vector3;

use super::sparse::CsrMatrix;
use crate::error::Result;
use crate::geometry::{triangle_areas, Connectivity, GeometryTensors, StarSurface};

/// Stiffness `K` (pairing `∫<∇u,∇w>`) and lumped mass `M = diag(w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    pub stiffness: CsrMatrix,
    pub mass: Vec<f64>,
}

impl DiscreteOperator {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// `∫ u w dμ`.
    pub fn inner(&self, u: &[f64], w: &[f64]) -> f64 {
        self.mass.iter().zip(u).zip(w).map(|((m, a), b)| m * a * b).sum()
    }

    /// `∫ u dμ`.
    pub fn integral(&self, u: &[f64]) -> f64 {
        self.mass.iter().zip(u).map(|(m, a)| m * a).sum()
    }

    /// `K u` in difference form `Σ_j K_ij (u_j − u_i)`, exact on constants.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let k = &self.stiffness;
        (0..k.dim())
            .map(|i| k.row(i).filter(|&(j, _)| j != i).map(|(j, v)| v * (u[j] - u[i])).sum())
            .collect()
    }

    /// Largest absolute stiffness row sum, relative to the largest diagonal.
    pub fn row_sum_defect(&self) -> f64 {
        let k = &self.stiffness;
        let diag = (0..k.dim()).map(|i| k.get(i, i).abs()).fold(0.0, f64::max);
        (0..k.dim())
            .map(|i| k.row(i).map(|(_, v)| v).sum::<f64>().abs())
            .fold(0.0, f64::max)
            / diag
    }
}

/// Linear elements: one gradient per element.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Elements {
    pub vertices: Vec<Vec<usize>>,
    pub measure: Vec<f64>,
    /// Gradient of each vertex hat function on the element, as ambient vectors.
    pub hat_gradients: Vec<Vec<Vector3<f64>>>,
}

impl Elements {
    pub fn build(surface: &StarSurface, tensors: &GeometryTensors) -> Result<Self> {
        let pos = surface.positions();
        match surface.atlas().connectivity() {
            Connectivity::Cycle(next) => {
                let n = next.len();
                let mut out = Elements::with_capacity(n);
                for (i, &j) in next.iter().enumerate() {
                    // Arclength between vertices, consistent with the lumped mass.
                    let len = 0.5 * (tensors.area_weights[i] + tensors.area_weights[j]);
                    let dir = (pos[j] - pos[i]).normalize();
                    out.vertices.push(vec![i, j]);
                    out.measure.push(len);
                    out.hat_gradients.push(vec![-dir / len, dir / len]);
                }
                Ok(out)
            }
            Connectivity::Triangles(tris) => {
                let areas = triangle_areas(&pos, tris)?;
                let mut out = Elements::with_capacity(tris.len());
                for (&[a, b, c], &area) in tris.iter().zip(&areas) {
                    let (pa, pb, pc) = (pos[a], pos[b], pos[c]);
                    let normal = (pb - pa).cross(&(pc - pa)) / (2.0 * area);
                    // ∇φ_k = N × (opposite edge) / (2A)
                    let grad = |p: Vector3<f64>, q: Vector3<f64>| normal.cross(&(q - p)) / (2.0 * area);
                    out.vertices.push(vec![a, b, c]);
                    out.measure.push(area);
                    out.hat_gradients.push(vec![grad(pb, pc), grad(pc, pa), grad(pa, pb)]);
                }
                Ok(out)
            }
        }
    }

    fn with_capacity(n: usize) -> Self {
        Elements {
            vertices: Vec::with_capacity(n),
            measure: Vec::with_capacity(n),
            hat_gradients: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    /// Difference form against the first vertex, so constants give exactly 0.
    pub fn gradient(&self, e: usize, u: &[f64]) -> Vector3<f64> {
        let verts = &self.vertices[e];
        let base = u[verts[0]];
        verts[1..]
            .iter()
            .zip(&self.hat_gradients[e][1..])
            .map(|(&v, g)| g * (u[v] - base))
            .sum()
    }
}

/// Cotangent stiffness with mixed-Voronoi lumped mass (`n = 2`), or linear
/// elements on arclength segments (`n = 1`).
pub fn assemble(surface: &StarSurface, tensors: &GeometryTensors) -> Result<DiscreteOperator> {
    let elems = Elements::build(surface, tensors)?;
    let mut triplets = Vec::with_capacity(elems.len() * 9);
    for e in 0..elems.len() {
        let verts = &elems.vertices[e];
        let grads = &elems.hat_gradients[e];
        let m = elems.measure[e];
        for a in 0..verts.len() {
            for b in (a + 1)..verts.len() {
                let kab = m * grads[a].dot(&grads[b]);
                triplets.push((verts[a], verts[b], kab));
                triplets.push((verts[b], verts[a], kab));
            }
        }
    }
    let off = CsrMatrix::from_triplets(surface.len(), triplets);
    let diag: Vec<f64> = (0..off.dim())
        .map(|i| -off.row(i).map(|(_, v)| v).sum::<f64>())
        .collect();
    Ok(DiscreteOperator {
        stiffness: off.add_diagonal(1.0, &diag),
        mass: tensors.area_weights.clone(),
    })
}
