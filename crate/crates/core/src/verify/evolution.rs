//! Finite-difference check of the first-variation formula
//!
//! ```text
//! dλ₁/dt = −2∫ f h(∇u, ∇u) dμ + ∫ f H |∇u|² dμ − λ₁ ∫ f H u² dμ
//! ```
//!
//! for a normal-speed flow with speed `f` and `∫u² dμ = 1`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::CheckReport;
use crate::error::{invalid, Result};
use crate::flow::{step, SpeedFunction};
use crate::geometry::{compute_tensors, GeometryTensors, StarSurface};
use crate::spectral::{assemble, eigen_residual, smallest_eigenpairs, EigenMethod, EigenPairs, Elements, CLUSTER_REL};

const WANTED: usize = 4;

/// Clusters narrower than this (relative) are treated as exactly degenerate.
const DEGENERATE_REL: f64 = 1e-6;

/// `B(u, w)` of the right-hand side, per element with vertex-averaged `f`,
/// `f H` and shape tensor, and lumped mass for the zeroth-order term.
fn rhs_form(elems: &Elements, tensors: &GeometryTensors, f: &[f64], lambda: f64, u: &[f64], w: &[f64]) -> f64 {
    let mut shape = 0.0;
    let mut grad = 0.0;
    for e in 0..elems.len() {
        let verts = &elems.vertices[e];
        let k = verts.len() as f64;
        let fe = verts.iter().map(|&v| f[v]).sum::<f64>() / k;
        let fhe = verts.iter().map(|&v| f[v] * tensors.mean_curvature[v]).sum::<f64>() / k;
        let b = verts
            .iter()
            .map(|&v| tensors.shape_tensors[v])
            .sum::<nalgebra::Matrix3<f64>>()
            / k;
        let gu = elems.gradient(e, u);
        let gw = elems.gradient(e, w);
        let m = elems.measure[e];
        shape += m * fe * gu.dot(&(b * gw));
        grad += m * fhe * gu.dot(&gw);
    }
    let zeroth: f64 = (0..u.len())
        .map(|i| tensors.area_weights[i] * f[i] * tensors.mean_curvature[i] * u[i] * w[i])
        .sum();
    -2.0 * shape + grad - lambda * zeroth
}

/// Right-hand side for a single eigenpair `(λ, u)`. Rejects `u` whose
/// eigen-residual exceeds `tol · λ`.
pub fn evolution_rhs(
    surface: &StarSurface,
    tensors: &GeometryTensors,
    speed: &SpeedFunction,
    lambda: f64,
    u: &[f64],
    tol: f64,
) -> Result<f64> {
    if u.len() != surface.len() {
        return invalid(format!("u has {} entries for {} vertices", u.len(), surface.len()));
    }
    let op = assemble(surface, tensors)?;
    let norm = op.inner(u, u);
    if !(norm > 0.0) {
        return invalid("u vanishes");
    }
    let res = eigen_residual(&op, lambda, u);
    if !(lambda > 0.0) || res > tol * lambda {
        return invalid(format!(
            "u is not an eigenfunction for λ = {lambda}: residual {res:e} exceeds {:e}",
            tol * lambda.abs()
        ));
    }
    let elems = Elements::build(surface, tensors)?;
    let f = speed.values(tensors);
    Ok(rhs_form(&elems, tensors, &f, lambda, u, u) / norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionDetail {
    pub lambda_start: f64,
    pub lambda_end: f64,
    pub dt: f64,
    /// One-sided difference quotient (or its Richardson extrapolation).
    pub lhs: f64,
    pub rhs: f64,
    /// Size of the eigenvalue cluster at the start.
    pub multiplicity: usize,
    pub cluster_width: f64,
    pub relative_error: f64,
}

struct Spectrum {
    pairs: EigenPairs,
    cluster: usize,
}

fn spectrum(surface: &StarSurface, tensors: &GeometryTensors, tol: f64) -> Result<Spectrum> {
    let op = assemble(surface, tensors)?;
    let pairs = smallest_eigenpairs(&op, WANTED, tol, EigenMethod::Auto)?;
    let l1 = pairs.values[0];
    let cluster = pairs.values.iter().take_while(|&&l| l - l1 <= CLUSTER_REL * l1).count();
    Ok(Spectrum { pairs, cluster })
}

/// `d λ₁ / dt` predicted at `surface`: the smallest eigenvalue of `B`
/// restricted to an exactly degenerate cluster, `B(u₁, u₁)` for a simple one.
/// `None` when the cluster is split but not resolved.
fn predicted(
    surface: &StarSurface,
    tensors: &GeometryTensors,
    speed: &SpeedFunction,
    spec: &Spectrum,
) -> Result<Option<f64>> {
    let vals = &spec.pairs.values;
    let width = vals[spec.cluster - 1] - vals[0];
    let k = if spec.cluster == 1 {
        1
    } else if width <= DEGENERATE_REL * vals[0] {
        spec.cluster
    } else {
        return Ok(None);
    };
    let elems = Elements::build(surface, tensors)?;
    let f = speed.values(tensors);
    let lambda = vals[..k].iter().sum::<f64>() / k as f64;
    let vecs = &spec.pairs.vectors;
    let m = DMatrix::from_fn(k, k, |a, b| rhs_form(&elems, tensors, &f, lambda, &vecs[a], &vecs[b]));
    let m = 0.5 * (&m + m.transpose());
    Ok(Some(
        m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min),
    ))
}

fn report(detail: &EvolutionDetail, tolerance: f64, name: &str) -> CheckReport {
    CheckReport::new(
        name,
        "dλ₁/dt = −2∫f h(∇u,∇u) dμ + ∫f H|∇u|² dμ − λ₁∫f H u² dμ (first variation along the flow)",
        -detail.relative_error,
        tolerance,
    )
    .with_note(format!(
        "LHS {:.6e}, RHS {:.6e}, Δt = {}, multiplicity {}, cluster width {:.2e}",
        detail.lhs, detail.rhs, detail.dt, detail.multiplicity, detail.cluster_width
    ))
}

fn inconclusive(name: &str, tolerance: f64, why: String) -> CheckReport {
    CheckReport::inconclusive(
        name,
        "dλ₁/dt = −2∫f h(∇u,∇u) dμ + ∫f H|∇u|² dμ − λ₁∫f H u² dμ (first variation along the flow)",
        tolerance,
        why,
    )
}

/// Compares `(λ₁(t+Δt) − λ₁(t)) / Δt` with the right-hand side at `t`.
pub fn evolution_residual(
    before: &StarSurface,
    after: &StarSurface,
    speed: &SpeedFunction,
    eigen_tol: f64,
    tolerance: f64,
) -> Result<(CheckReport, Option<EvolutionDetail>)> {
    let name = "evolution_identity";
    let dt = after.t() - before.t();
    if !(dt > 0.0) {
        return invalid(format!("surfaces are not in time order (Δt = {dt})"));
    }
    let tb = compute_tensors(before)?;
    let sb = spectrum(before, &tb, eigen_tol)?;
    let sa = spectrum(after, &compute_tensors(after)?, eigen_tol)?;
    if sa.cluster != sb.cluster {
        let why = format!(
            "cluster size changed from {} to {} across the step",
            sb.cluster, sa.cluster
        );
        return Ok((
            inconclusive(name, tolerance, why).with_range(before.t(), after.t()),
            None,
        ));
    }
    let Some(rhs) = predicted(before, &tb, speed, &sb)? else {
        let v = &sb.pairs.values;
        let why = format!(
            "λ₁ cluster of {} split by {:.2e} (relative) is not resolved",
            sb.cluster,
            (v[sb.cluster - 1] - v[0]) / v[0]
        );
        return Ok((
            inconclusive(name, tolerance, why).with_range(before.t(), after.t()),
            None,
        ));
    };
    let (l0, l1) = (sb.pairs.values[0], sa.pairs.values[0]);
    let lhs = (l1 - l0) / dt;
    let detail = EvolutionDetail {
        lambda_start: l0,
        lambda_end: l1,
        dt,
        lhs,
        rhs,
        multiplicity: sb.cluster,
        cluster_width: sb.pairs.values[sb.cluster - 1] - l0,
        relative_error: ((lhs - rhs) / rhs).abs(),
    };
    Ok((
        report(&detail, tolerance, name).with_range(before.t(), after.t()),
        Some(detail),
    ))
}

/// Single steps of `Δt` and `2Δt` from `surface` trace one smooth path in
/// radius space; `2 D(Δt) − D(2Δt)` removes the `O(Δt)` term of the
/// one-sided quotient.
pub fn evolution_residual_richardson(
    surface: &StarSurface,
    speed: &SpeedFunction,
    dt: f64,
    eigen_tol: f64,
    tolerance: f64,
) -> Result<(CheckReport, Option<EvolutionDetail>)> {
    let name = "evolution_identity_richardson";
    let t0 = compute_tensors(surface)?;
    let s1 = step(surface, &t0, speed, dt)?;
    let s2 = step(surface, &t0, speed, 2.0 * dt)?;
    let sb = spectrum(surface, &t0, eigen_tol)?;
    let sa1 = spectrum(&s1, &compute_tensors(&s1)?, eigen_tol)?;
    let sa2 = spectrum(&s2, &compute_tensors(&s2)?, eigen_tol)?;
    let range = (surface.t(), s2.t());
    if sa1.cluster != sb.cluster || sa2.cluster != sb.cluster {
        let why = format!(
            "cluster size changed from {} to {} / {} across the steps",
            sb.cluster, sa1.cluster, sa2.cluster
        );
        return Ok((inconclusive(name, tolerance, why).with_range(range.0, range.1), None));
    }
    let Some(rhs) = predicted(surface, &t0, speed, &sb)? else {
        let why = format!("λ₁ cluster of {} is split but not resolved", sb.cluster);
        return Ok((inconclusive(name, tolerance, why).with_range(range.0, range.1), None));
    };
    let (l0, l1, l2) = (sb.pairs.values[0], sa1.pairs.values[0], sa2.pairs.values[0]);
    let lhs = 2.0 * (l1 - l0) / dt - (l2 - l0) / (2.0 * dt);
    let detail = EvolutionDetail {
        lambda_start: l0,
        lambda_end: l2,
        dt,
        lhs,
        rhs,
        multiplicity: sb.cluster,
        cluster_width: sb.pairs.values[sb.cluster - 1] - l0,
        relative_error: ((lhs - rhs) / rhs).abs(),
    };
    Ok((
        report(&detail, tolerance, name).with_range(range.0, range.1),
        Some(detail),
    ))
}
