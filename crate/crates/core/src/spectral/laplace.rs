use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::operator::DiscreteOperator;
use super::sparse::EnvelopeCholesky;
use crate::error::{invalid, Error, Result};

/// Ritz values within this relative distance of `λ₁` count as one cluster.
pub const CLUSTER_REL: f64 = 0.05;
const BLOCK: usize = 10;
const WANTED: usize = 4;
const MAX_ITER: usize = 500;

/// Eigenvalue with its discrete eigenfunction and solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub p: f64,
    pub value: f64,
    #[serde(skip)]
    pub eigenfunction: Vec<f64>,
    /// `‖Ku − λMu‖_{M⁻¹} / ‖u‖_M` for `p = 2`; final gradient norm otherwise.
    pub residual: f64,
    pub iterations: usize,
    pub restarts: usize,
    /// `|∫|u|^p dμ − 1|`.
    pub normalization_violation: f64,
    /// `|∫|u|^{p−2} u dμ|`.
    pub orthogonality_violation: f64,
    /// Eigenvalues of the cluster starting at `value`, ascending.
    pub cluster: Vec<f64>,
    pub cluster_width: f64,
    /// Distance from `value` to the first eigenvalue outside the cluster.
    pub gap: Option<f64>,
    /// Relative spread of the restart values (p-Laplace only).
    pub restart_dispersion: Option<f64>,
}

/// Lowest nonzero eigenpairs, ascending, `M`-orthonormal.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Which algorithm [`smallest_eigenpairs`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    Auto,
    Dense,
    Subspace,
}

const DENSE_LIMIT: usize = 200;

/// First nonzero eigenvalue of `K u = λ M u`, constants deflated.
pub fn lambda1_laplace(op: &DiscreteOperator, tol: f64) -> Result<EigenResult> {
    let pairs = smallest_eigenpairs(op, WANTED, tol, EigenMethod::Auto)?;
    Ok(eigen_result(op, &pairs))
}

pub(crate) fn eigen_result(op: &DiscreteOperator, pairs: &EigenPairs) -> EigenResult {
    let l1 = pairs.values[0];
    let cluster: Vec<f64> = pairs
        .values
        .iter()
        .cloned()
        .take_while(|&l| l - l1 <= CLUSTER_REL * l1)
        .collect();
    let gap = pairs.values.get(cluster.len()).map(|l| l - l1);
    let u = pairs.vectors[0].clone();
    EigenResult {
        p: 2.0,
        value: l1,
        residual: pairs.residuals[0],
        iterations: pairs.iterations,
        restarts: 0,
        normalization_violation: (op.inner(&u, &u) - 1.0).abs(),
        orthogonality_violation: op.integral(&u).abs(),
        cluster_width: cluster.last().unwrap() - l1,
        cluster,
        gap,
        restart_dispersion: None,
        eigenfunction: u,
    }
}

/// `‖Ku − λMu‖_{M⁻¹} / ‖u‖_M`.
pub fn eigen_residual(op: &DiscreteOperator, lambda: f64, u: &[f64]) -> f64 {
    let ku = op.apply(u);
    let r: f64 = ku
        .iter()
        .zip(u)
        .zip(&op.mass)
        .map(|((k, x), m)| (k - lambda * m * x).powi(2) / m)
        .sum();
    r.sqrt() / op.inner(u, u).sqrt()
}

/// The `k` smallest nonzero eigenpairs. Convergence requires every returned
/// residual to be at most `tol · λ`.
pub fn smallest_eigenpairs(op: &DiscreteOperator, k: usize, tol: f64, method: EigenMethod) -> Result<EigenPairs> {
    let n = op.len();
    if !(tol > 0.0) {
        return invalid(format!("tolerance {tol} must be positive"));
    }
    if k == 0 || k + 1 > n {
        return invalid(format!(
            "cannot compute {k} nonzero eigenpairs of a {n}-vertex operator"
        ));
    }
    let dense = match method {
        EigenMethod::Auto => n <= DENSE_LIMIT || n < 2 * BLOCK.max(k + 2),
        EigenMethod::Dense => true,
        EigenMethod::Subspace => false,
    };
    let mut pairs = if dense {
        dense_pairs(op, k)?
    } else {
        subspace_pairs(op, k, tol)?
    };
    for (l, r) in pairs.values.iter().zip(&pairs.residuals) {
        if *r > tol * l {
            return Err(Error::SolverFailure {
                reason: format!("eigenpair λ = {l} did not converge"),
                residual: *r,
            });
        }
    }
    let scale = op.stiffness.get(0, 0).abs() / op.mass[0];
    if pairs.values[0] <= 1e-10 * scale {
        return Err(Error::DegenerateSpectrum(format!(
            "second zero eigenvalue (λ₁ = {}); mesh not connected?",
            pairs.values[0]
        )));
    }
    for v in &mut pairs.vectors {
        fix_sign(v);
    }
    Ok(pairs)
}

/// Largest-magnitude entry positive; ties go to the lowest index.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-9) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dense_pairs(op: &DiscreteOperator, k: usize) -> Result<EigenPairs> {
    let n = op.len();
    let s: Vec<f64> = op.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut a = op.stiffness.to_dense();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] *= s[i] * s[j];
        }
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    // Drop the vector closest to M^{1/2}·1.
    let c = DVector::from_iterator(n, op.mass.iter().map(|m| m.sqrt())).normalize();
    let kernel = *order
        .iter()
        .max_by(|&&i, &&j| {
            let oi = eig.eigenvectors.column(i).dot(&c).abs();
            let oj = eig.eigenvectors.column(j).dot(&c).abs();
            oi.total_cmp(&oj)
        })
        .unwrap();
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for &i in order.iter().filter(|&&i| i != kernel).take(k) {
        let col = eig.eigenvectors.column(i);
        let mut u: Vec<f64> = (0..n).map(|r| col[r] * s[r]).collect();
        deflate(op, &mut u);
        let norm = op.inner(&u, &u).sqrt();
        u.iter_mut().for_each(|x| *x /= norm);
        values.push(eig.eigenvalues[i].max(0.0));
        vectors.push(u);
    }
    let residuals = values
        .iter()
        .zip(&vectors)
        .map(|(&l, u)| eigen_residual(op, l, u))
        .collect();
    Ok(EigenPairs {
        values,
        vectors,
        residuals,
        iterations: 1,
    })
}

/// Removes the `M`-projection onto constants.
pub(crate) fn deflate(op: &DiscreteOperator, u: &mut [f64]) {
    let mean = op.integral(u) / op.area();
    u.iter_mut().for_each(|x| *x -= mean);
}

/// Shift-invert block subspace iteration with Rayleigh–Ritz on the
/// constant-free subspace.
fn subspace_pairs(op: &DiscreteOperator, k: usize, tol: f64) -> Result<EigenPairs> {
    let n = op.len();
    let block = BLOCK.max(k + 4).min(n - 1);
    // Positive shift below λ₁ makes K + sM definite; 1/area is well under λ₁
    // for round shapes in both dimensions.
    let shift = 1.0 / op.area();
    let chol = EnvelopeCholesky::factor(&op.stiffness.add_diagonal(shift, &op.mass))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x1a51_0ca1);
    let mut q: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect();

    let mut values = vec![0.0; block];
    let mut residuals = vec![f64::INFINITY; block];
    for iter in 1..=MAX_ITER {
        for v in q.iter_mut() {
            deflate(op, v);
            let mv: Vec<f64> = v.iter().zip(&op.mass).map(|(a, m)| a * m).collect();
            *v = chol.solve(&mv);
            deflate(op, v);
        }
        let (vals, vecs) = rayleigh_ritz(op, &q)?;
        q = vecs;
        values = vals;
        for j in 0..k {
            residuals[j] = eigen_residual(op, values[j], &q[j]);
        }
        if (0..k).all(|j| residuals[j] <= tol * values[j]) {
            residuals.truncate(k);
            values.truncate(k);
            q.truncate(k);
            return Ok(EigenPairs {
                values,
                vectors: q,
                residuals,
                iterations: iter,
            });
        }
    }
    Err(Error::SolverFailure {
        reason: format!("subspace iteration did not converge in {MAX_ITER} iterations"),
        residual: residuals[..k].iter().cloned().fold(0.0, f64::max),
    })
}

/// Ritz pairs of `(K, M)` on span(q), ascending, `M`-orthonormal.
pub(crate) fn rayleigh_ritz(op: &DiscreteOperator, q: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let b = q.len();
    let kq: Vec<Vec<f64>> = q.iter().map(|v| op.apply(v)).collect();
    let mut kr = DMatrix::zeros(b, b);
    let mut mr = DMatrix::zeros(b, b);
    for i in 0..b {
        for j in 0..=i {
            let kij: f64 = kq[i].iter().zip(&q[j]).map(|(a, c)| a * c).sum();
            let mij = op.inner(&q[i], &q[j]);
            kr[(i, j)] = kij;
            kr[(j, i)] = kij;
            mr[(i, j)] = mij;
            mr[(j, i)] = mij;
        }
    }
    // Orthonormalize through the eigen-decomposition of the Gram matrix so a
    // nearly dependent block does not break a Cholesky.
    let g = SymmetricEigen::new(mr);
    let gmax = g.eigenvalues.max();
    let keep: Vec<usize> = (0..b).filter(|&i| g.eigenvalues[i] > 1e-13 * gmax).collect();
    if keep.is_empty() {
        return Err(Error::SolverFailure {
            reason: "subspace collapsed".into(),
            residual: f64::NAN,
        });
    }
    let mut w = DMatrix::zeros(b, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let s = 1.0 / g.eigenvalues[i].sqrt();
        for r in 0..b {
            w[(r, c)] = g.eigenvectors[(r, i)] * s;
        }
    }
    let a = w.transpose() * kr * &w;
    let a = (&a + a.transpose()) * 0.5;
    let e = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..keep.len()).collect();
    order.sort_by(|&i, &j| e.eigenvalues[i].total_cmp(&e.eigenvalues[j]));
    let coeffs = w * e.eigenvectors;
    let n = q[0].len();
    let mut vals = Vec::with_capacity(order.len());
    let mut vecs = Vec::with_capacity(order.len());
    for &i in &order {
        let mut u = vec![0.0; n];
        for (r, v) in q.iter().enumerate() {
            let c = coeffs[(r, i)];
            u.iter_mut().zip(v).for_each(|(x, y)| *x += c * y);
        }
        vals.push(e.eigenvalues[i]);
        vecs.push(u);
    }
    Ok((vals, vecs))
}
