//! Discrete first and second fundamental form data of a radial graph.
//!
//! With `φ = ln r` and `∇φ`, `∇²φ` the gradient and covariant Hessian of `φ`
//! on the unit sphere (orthonormal frame), a star-shaped hypersurface
//! `X = e^φ θ` has
//!
//! ```text
//! g   = r² (I + ∇φ ∇φᵀ)
//! h   = (r / v) (I + ∇φ ∇φᵀ − ∇²φ)
//! ν   = (θ − ∇φ) / v,        v = sqrt(1 + |∇φ|²) = 1 / <ν, θ>
//! ```
//!
//! Curves (`n = 1`) take `∇φ`, `∇²φ` from fourth-order central differences in
//! the uniform angle; surfaces (`n = 2`) take them from the quartic least-squares
//! stencils stored in the atlas. Area weights are exact arclength for curves
//! and mixed-Voronoi dual areas of the embedded triangle mesh for surfaces.

use nalgebra::{Matrix2, Matrix3, Matrix3x2, Vector2, Vector3};

use super::atlas::DirectionAtlas;
use super::surface::StarSurface;
use crate::error::{Error, Result};

/// Relative triangle-area floor below which a mesh is reported degenerate.
pub const DEGENERATE_AREA_RATIO: f64 = 1e-14;

/// Per-vertex geometry of a [`StarSurface`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryTensors {
    dim: usize,
    /// Outward unit normals.
    pub normals: Vec<Vector3<f64>>,
    /// `H = Σ κ`.
    pub mean_curvature: Vec<f64>,
    principal: Vec<f64>,
    /// `|A|² = Σ κ²`.
    pub norm_a2: Vec<f64>,
    /// Dual area (arclength for curves); sums to the total area.
    pub area_weights: Vec<f64>,
    /// `v = 1 / <ν, θ>`.
    pub graph_factor: Vec<f64>,
    /// Mean distance to one-ring neighbours (segment length for curves).
    pub spacing: Vec<f64>,
    /// Second fundamental form as an ambient bilinear form on tangent
    /// vectors: `h(w, w) = wᵀ B w`.
    pub shape_tensors: Vec<Matrix3<f64>>,
}

impl GeometryTensors {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.mean_curvature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_curvature.is_empty()
    }

    /// Principal curvatures at vertex `i`, ascending.
    pub fn principal(&self, i: usize) -> &[f64] {
        &self.principal[i * self.dim..(i + 1) * self.dim]
    }

    #[cfg(test)]
    pub(crate) fn set_principal(&mut self, i: usize, kappa: &[f64]) {
        let d = self.dim;
        self.principal[i * d..(i + 1) * d].copy_from_slice(kappa);
    }

    pub fn kappa_min(&self, i: usize) -> f64 {
        self.principal[i * self.dim]
    }

    pub fn h_min(&self) -> f64 {
        self.mean_curvature.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn h_max(&self) -> f64 {
        self.mean_curvature.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Area-weighted mean of `H`.
    pub fn h_mean(&self) -> f64 {
        let area: f64 = self.area_weights.iter().sum();
        self.mean_curvature
            .iter()
            .zip(&self.area_weights)
            .map(|(h, w)| h * w)
            .sum::<f64>()
            / area
    }
}

/// Computes normals, curvatures and area weights.
pub fn compute_tensors(surface: &StarSurface) -> Result<GeometryTensors> {
    match surface.dim() {
        1 => curve_tensors(surface),
        _ => surface_tensors(surface),
    }
}

/// `Σ w_i`.
pub fn total_area(_surface: &StarSurface, tensors: &GeometryTensors) -> f64 {
    tensors.area_weights.iter().sum()
}

/// `min_i min(r_i, 1/v_i)`; positive for a safely star-shaped surface.
pub fn star_margin(surface: &StarSurface, tensors: &GeometryTensors) -> f64 {
    surface
        .radii()
        .iter()
        .zip(&tensors.graph_factor)
        .map(|(&r, &v)| r.min(1.0 / v))
        .fold(f64::INFINITY, f64::min)
}

fn curve_tensors(surface: &StarSurface) -> Result<GeometryTensors> {
    let n = surface.len();
    let r = surface.radii();
    let dirs = surface.atlas().directions();
    let h = std::f64::consts::TAU / n as f64;
    let phi: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let at = |k: isize| phi[k.rem_euclid(n as isize) as usize];

    let mut out = GeometryTensors::empty(1, n);
    for i in 0..n {
        let k = i as isize;
        let (p2, p1, p0, m1, m2) = (at(k + 2), at(k + 1), at(k), at(k - 1), at(k - 2));
        let d1 = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
        let d2 = (-p2 + 16.0 * p1 - 30.0 * p0 + 16.0 * m1 - m2) / (12.0 * h * h);
        let v = (1.0 + d1 * d1).sqrt();
        let kappa = (1.0 + d1 * d1 - d2) / (r[i] * v * v * v);
        let theta = dirs[i];
        let perp = Vector3::new(-theta.y, theta.x, 0.0);
        let normal = (theta - perp * d1) / v;
        let tangent = (theta * d1 + perp) / v;

        out.normals.push(normal);
        out.mean_curvature.push(kappa);
        out.principal.push(kappa);
        out.norm_a2.push(kappa * kappa);
        out.area_weights.push(r[i] * v * h);
        out.graph_factor.push(v);
        out.shape_tensors.push(tangent * tangent.transpose() * kappa);
    }
    let mean = out.area_weights.iter().sum::<f64>() / n as f64;
    for (i, w) in out.area_weights.iter().enumerate() {
        if !(*w > DEGENERATE_AREA_RATIO * mean) {
            return Err(Error::DegenerateMesh {
                element: i,
                area: *w,
                threshold: DEGENERATE_AREA_RATIO * mean,
            });
        }
    }
    out.spacing = out.area_weights.clone();
    Ok(out)
}

fn surface_tensors(surface: &StarSurface) -> Result<GeometryTensors> {
    let atlas: &DirectionAtlas = surface.atlas();
    let n = surface.len();
    let r = surface.radii();
    let phi: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let dirs = atlas.directions();
    let pos = surface.positions();

    let mut out = GeometryTensors::empty(2, n);
    for i in 0..n {
        let st = atlas.stencil(i);
        let (grad, hess) = st.apply(i, &phi);
        let g = Vector2::new(grad[0], grad[1]);
        let hs = Matrix2::new(hess[0], hess[1], hess[1], hess[2]);
        let ggt = g * g.transpose();
        let v = (1.0 + g.norm_squared()).sqrt();
        let ri = r[i];

        let metric = (Matrix2::identity() + ggt) * (ri * ri);
        let second = (Matrix2::identity() + ggt - hs) * (ri / v);
        let metric_inv = metric
            .try_inverse()
            .ok_or_else(|| Error::DegenerateShape(format!("singular metric at vertex {i}")))?;
        let shape = metric_inv * second;
        let (k1, k2) = eig2(&shape);

        let e = st.frame;
        let theta = dirs[i];
        // Coordinate tangent vectors ∂_k X = r (φ_k θ + e_k).
        let tangents = Matrix3x2::from_columns(&[(theta * g.x + e[0]) * ri, (theta * g.y + e[1]) * ri]);
        let b = tangents * metric_inv * second * metric_inv * tangents.transpose();
        let b = (b + b.transpose()) * 0.5;
        let normal = (theta - e[0] * g.x - e[1] * g.y) / v;

        out.normals.push(normal);
        out.mean_curvature.push(k1 + k2);
        out.principal.push(k1);
        out.principal.push(k2);
        out.norm_a2.push(k1 * k1 + k2 * k2);
        out.graph_factor.push(v);
        out.shape_tensors.push(b);
        let ring = atlas.neighbors(i);
        let spacing = ring.iter().map(|&j| (pos[j] - pos[i]).norm()).sum::<f64>() / ring.len() as f64;
        out.spacing.push(spacing);
    }
    out.area_weights = mixed_voronoi_areas(&pos, atlas.triangles())?;
    Ok(out)
}

/// Real eigenvalues of a 2x2 matrix similar to a symmetric one, ascending.
fn eig2(m: &Matrix2<f64>) -> (f64, f64) {
    let tr = m.trace();
    let det = m.determinant();
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    (0.5 * tr - disc, 0.5 * tr + disc)
}

/// Triangle areas of an embedded mesh, rejecting degenerate elements.
pub(crate) fn triangle_areas(pos: &[Vector3<f64>], tris: &[[usize; 3]]) -> Result<Vec<f64>> {
    let areas: Vec<f64> = tris
        .iter()
        .map(|&[a, b, c]| 0.5 * (pos[b] - pos[a]).cross(&(pos[c] - pos[a])).norm())
        .collect();
    let mean = areas.iter().sum::<f64>() / areas.len() as f64;
    let threshold = DEGENERATE_AREA_RATIO * mean;
    if let Some((element, &area)) = areas.iter().enumerate().find(|(_, a)| !(**a >= threshold)) {
        return Err(Error::DegenerateMesh {
            element,
            area,
            threshold,
        });
    }
    Ok(areas)
}

/// Mixed Voronoi dual areas (Voronoi region for non-obtuse triangles,
/// half/quarter triangle splits for obtuse ones).
pub(crate) fn mixed_voronoi_areas(pos: &[Vector3<f64>], tris: &[[usize; 3]]) -> Result<Vec<f64>> {
    let areas = triangle_areas(pos, tris)?;
    let mut w = vec![0.0; pos.len()];
    for (&[a, b, c], &area) in tris.iter().zip(&areas) {
        let idx = [a, b, c];
        let cot = |k: usize| {
            let p = pos[idx[k]];
            let u = pos[idx[(k + 1) % 3]] - p;
            let v = pos[idx[(k + 2) % 3]] - p;
            u.dot(&v) / u.cross(&v).norm()
        };
        let cots = [cot(0), cot(1), cot(2)];
        let obtuse = (0..3).find(|&k| cots[k] < 0.0);
        match obtuse {
            None => {
                for k in 0..3 {
                    let p = pos[idx[k]];
                    let q = pos[idx[(k + 1) % 3]];
                    let s = pos[idx[(k + 2) % 3]];
                    // |pq|² cot(angle at s) + |ps|² cot(angle at q)
                    w[idx[k]] +=
                        ((q - p).norm_squared() * cots[(k + 2) % 3] + (s - p).norm_squared() * cots[(k + 1) % 3]) / 8.0;
                }
            }
            Some(o) => {
                for k in 0..3 {
                    w[idx[k]] += if k == o { area / 2.0 } else { area / 4.0 };
                }
            }
        }
    }
    Ok(w)
}

impl GeometryTensors {
    fn empty(dim: usize, n: usize) -> Self {
        GeometryTensors {
            dim,
            normals: Vec::with_capacity(n),
            mean_curvature: Vec::with_capacity(n),
            principal: Vec::with_capacity(n * dim),
            norm_a2: Vec::with_capacity(n),
            area_weights: Vec::with_capacity(n),
            graph_factor: Vec::with_capacity(n),
            spacing: Vec::with_capacity(n),
            shape_tensors: Vec::with_capacity(n),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::geometry::{build_atlas, embed, AtlasKind, RadialProfile};

    fn surface(kind: AtlasKind, res: usize, shape: &str) -> StarSurface {
        let a = Arc::new(build_atlas(kind, res).unwrap());
        embed(a, &shape.parse::<RadialProfile>().unwrap()).unwrap()
    }

    #[test]
    fn unit_sphere_level3_mean_curvature_band() {
        let s = surface(AtlasKind::Icosphere, 3, "sphere(1)");
        let t = compute_tensors(&s).unwrap();
        for &h in &t.mean_curvature {
            assert!((1.96..=2.04).contains(&h), "H = {h}");
        }
        for &v in &t.graph_factor {
            assert!((v - 1.0).abs() <= 1e-3);
        }
        for (i, nrm) in t.normals.iter().enumerate() {
            assert!((nrm - s.atlas().directions()[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn circle_curvature() {
        let s = surface(AtlasKind::Circle, 256, "sphere(2)");
        let t = compute_tensors(&s).unwrap();
        for &k in &t.mean_curvature {
            assert!((k - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn circle_circumference() {
        let s = surface(AtlasKind::Circle, 512, "sphere(1)");
        let t = compute_tensors(&s).unwrap();
        assert!((total_area(&s, &t) - 2.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn sphere_area_level4() {
        let s = surface(AtlasKind::Icosphere, 4, "sphere(1)");
        let t = compute_tensors(&s).unwrap();
        let a = total_area(&s, &t);
        assert!((a / (4.0 * PI) - 1.0).abs() < 5e-3, "area {a}");
    }

    #[test]
    fn mixed_voronoi_partitions_area() {
        let s = surface(AtlasKind::Icosphere, 3, "ellipsoid(2,1,1)");
        let pos = s.positions();
        let tri: f64 = triangle_areas(&pos, s.atlas().triangles()).unwrap().iter().sum();
        let t = compute_tensors(&s).unwrap();
        assert!((total_area(&s, &t) - tri).abs() < 1e-12 * tri);
        assert!(t.area_weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn ellipse_curvature_matches_closed_form() {
        // Ellipse x²/a² + y²/b² = 1 parametrized by angle: κ = ab / (a² sin²t + b² cos²t)^{3/2}
        // at the point (a cos t, b sin t).
        let (a, b) = (1.5, 1.0);
        let s = surface(AtlasKind::Circle, 512, "ellipsoid(1.5,1)");
        let t = compute_tensors(&s).unwrap();
        for i in (0..s.len()).step_by(37) {
            let x = s.position(i);
            let tt = (x.y / b).atan2(x.x / a);
            let exact = a * b / (a * a * tt.sin().powi(2) + b * b * tt.cos().powi(2)).powf(1.5);
            assert!(
                (t.mean_curvature[i] - exact).abs() < 1e-6,
                "{} vs {exact}",
                t.mean_curvature[i]
            );
        }
    }

    #[test]
    fn degenerate_triangle_is_named() {
        let pos = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(2.0, 0.0, 0.0),
        ];
        let tris = [[0, 1, 2], [0, 1, 3]];
        match triangle_areas(&pos, &tris) {
            Err(Error::DegenerateMesh { element, .. }) => assert_eq!(element, 1),
            other => panic!("expected degenerate mesh, got {other:?}"),
        }
    }

    #[test]
    fn star_margin_sphere() {
        let s = surface(AtlasKind::Icosphere, 2, "sphere(1)");
        let t = compute_tensors(&s).unwrap();
        assert!((star_margin(&s, &t) - 1.0).abs() < 1e-12);
        let e = surface(AtlasKind::Icosphere, 2, "ellipsoid(2,1,1)");
        let te = compute_tensors(&e).unwrap();
        assert!(star_margin(&e, &te) > 0.0);
    }
}
