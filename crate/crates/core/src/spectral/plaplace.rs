//! First nonzero p-Laplace eigenvalue by minimizing the shift-reduced quotient
//!
//! ```text
//! Q(u) = ∫|∇u|^p dμ / min_c ∫|u − c|^p dμ
//! ```
//!
//! The minimizing `c` is the unique root of `∫|u − c|^{p−2}(u − c) dμ = 0`,
//! so `u − c` satisfies the constraint and `Q` equals the constrained
//! quotient there. `Q` is invariant under shifts and scalings of `u`, so every
//! iterate is re-projected (shifted, then normalized to `∫|u|^p = 1`) without
//! changing its value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::laplace::{fix_sign, lambda1_laplace, EigenResult};
use super::operator::{assemble, DiscreteOperator, Elements};
use super::sparse::EnvelopeCholesky;
use crate::error::{invalid, Error, Result};
use crate::geometry::{GeometryTensors, StarSurface};

const STAGNATION_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PLaplaceConfig {
    pub p: f64,
    pub max_iterations: usize,
    /// Stop when the preconditioned gradient norm falls below
    /// `gradient_tol · Q`.
    pub gradient_tol: f64,
    pub restarts: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Step shrink factor while backtracking.
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub seed: u64,
    /// Tolerance for the p = 2 warm-start eigensolve.
    pub eigen_tol: f64,
}

impl Default for PLaplaceConfig {
    fn default() -> Self {
        PLaplaceConfig {
            p: 2.0,
            max_iterations: 2000,
            gradient_tol: 1e-7,
            restarts: 3,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            seed: 0,
            eigen_tol: 1e-9,
        }
    }
}

impl PLaplaceConfig {
    pub fn with_p(p: f64) -> Self {
        PLaplaceConfig {
            p,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return invalid(format!("p = {} must exceed 1", self.p));
        }
        if self.restarts < 3 {
            return invalid(format!("restarts = {} must be at least 3", self.restarts));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) || !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return invalid("line search constants must lie in (0, 1)");
        }
        if !(self.gradient_tol > 0.0) || self.max_iterations == 0 {
            return invalid("gradient_tol and max_iterations must be positive");
        }
        Ok(())
    }
}

/// `∫|∇u|^p dμ / ∫|u|^p dμ` with per-element gradients and dual-area
/// quadrature.
pub fn rayleigh_p(surface: &StarSurface, tensors: &GeometryTensors, u: &[f64], p: f64) -> Result<f64> {
    if u.len() != surface.len() {
        return invalid(format!("u has {} entries for {} vertices", u.len(), surface.len()));
    }
    let elems = Elements::build(surface, tensors)?;
    let den: f64 = tensors
        .area_weights
        .iter()
        .zip(u)
        .map(|(w, x)| w * x.abs().powf(p))
        .sum();
    if !(den > 0.0) {
        return invalid("∫|u|^p dμ vanishes");
    }
    Ok(energy(&elems, u, p) / den)
}

fn energy(elems: &Elements, u: &[f64], p: f64) -> f64 {
    (0..elems.len())
        .map(|e| elems.measure[e] * elems.gradient(e, u).norm().powf(p))
        .sum()
}

/// Root `c` of `Σ w |u − c|^{p−2}(u − c) = 0`: Newton steps kept inside a
/// bisection bracket.
pub(crate) fn optimal_shift(w: &[f64], u: &[f64], p: f64) -> f64 {
    let mut lo = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = w.iter().sum();
    let mut c = w.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() / total;
    for _ in 0..200 {
        let (mut f, mut df) = (0.0, 0.0);
        for (wi, ui) in w.iter().zip(u) {
            let d = ui - c;
            let m = d.abs().powf(p - 2.0);
            if m.is_finite() {
                f += wi * m * d;
                df += (p - 1.0) * wi * m;
            }
        }
        if f > 0.0 {
            lo = c;
        } else {
            hi = c;
        }
        let newton = c + f / df;
        let next = if df > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == c || hi - lo <= f64::EPSILON * (lo.abs() + hi.abs()) {
            break;
        }
        c = next;
    }
    c
}

struct Problem<'a> {
    elems: &'a Elements,
    mass: &'a [f64],
    p: f64,
    precond: &'a EnvelopeCholesky,
}

impl Problem<'_> {
    /// Shift to the constraint, scale to `∫|u|^p = 1`.
    fn project(&self, u: &mut [f64]) -> bool {
        let c = optimal_shift(self.mass, u, self.p);
        u.iter_mut().for_each(|x| *x -= c);
        let d: f64 = self
            .mass
            .iter()
            .zip(u.iter())
            .map(|(w, x)| w * x.abs().powf(self.p))
            .sum();
        if !(d > 0.0 && d.is_finite()) {
            return false;
        }
        let s = d.powf(-1.0 / self.p);
        u.iter_mut().for_each(|x| *x *= s);
        true
    }

    fn value(&self, u: &[f64]) -> f64 {
        let c = optimal_shift(self.mass, u, self.p);
        let d: f64 = self
            .mass
            .iter()
            .zip(u)
            .map(|(w, x)| w * (x - c).abs().powf(self.p))
            .sum();
        energy(self.elems, u, self.p) / d
    }

    /// Value and gradient of `Q` at a projected `u` (so the denominator is 1
    /// and the optimal shift is 0).
    fn value_grad(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let p = self.p;
        let mut g = vec![0.0; u.len()];
        let mut e_sum = 0.0;
        for e in 0..self.elems.len() {
            let grad = self.elems.gradient(e, u);
            let norm = grad.norm();
            let m = self.elems.measure[e];
            e_sum += m * norm.powf(p);
            if norm > 0.0 {
                let coef = p * m * norm.powf(p - 2.0);
                for (v, h) in self.elems.vertices[e].iter().zip(&self.elems.hat_gradients[e]) {
                    g[*v] += coef * grad.dot(h);
                }
            }
        }
        for ((gi, w), x) in g.iter_mut().zip(self.mass).zip(u) {
            *gi -= e_sum * p * w * x.abs().powf(p - 1.0) * x.signum();
        }
        (e_sum, g)
    }
}

/// Preconditioned Polak–Ribière descent from one start. Returns
/// `(value, u, iterations, relative gradient norm)`.
fn descend(prob: &Problem<'_>, mut u: Vec<f64>, cfg: &PLaplaceConfig) -> Option<(f64, Vec<f64>, usize, f64)> {
    if !prob.project(&mut u) {
        return None;
    }
    let (mut q, mut g) = prob.value_grad(&u);
    let mut z = prob.precond.solve(&g);
    let mut gz: f64 = g.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut dir: Vec<f64> = z.iter().map(|x| -x).collect();
    let mut step = 1.0;
    let mut iters = 0;
    let mut stalls = 0;
    // For p < 2 the gradient is not Lipschitz where ∇u = 0 and rounding can
    // stop descent above the tolerance; quit once the value stagnates.
    let mut window = (q, 0);
    while iters < cfg.max_iterations {
        let gnorm = gz.max(0.0).sqrt() / q;
        if gnorm <= cfg.gradient_tol {
            break;
        }
        iters += 1;
        let mut slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            dir = z.iter().map(|x| -x).collect();
            slope = -gz;
        }
        let mut accepted = None;
        let mut t = step;
        for _ in 0..cfg.max_backtracks {
            let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let qt = prob.value(&trial);
            if qt.is_finite() && qt <= q + cfg.armijo * t * slope {
                // One parabolic refinement through q, slope and qt keeps CG
                // conjugacy close to an exact line search.
                let curv = qt - q - slope * t;
                let mut best = (trial, t, qt);
                if curv > 0.0 {
                    let ts = -slope * t * t / (2.0 * curv);
                    if ts > 0.05 * t && ts < 20.0 * t && (ts / t - 1.0).abs() > 1e-3 {
                        let alt: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + ts * d).collect();
                        let qs = prob.value(&alt);
                        if qs.is_finite() && qs < best.2 {
                            best = (alt, ts, qs);
                        }
                    }
                }
                accepted = Some((best.0, best.1));
                break;
            }
            t *= cfg.backtrack;
        }
        let Some((mut next, t)) = accepted else {
            // Line search stalled: restart along steepest descent once, then stop.
            stalls += 1;
            if stalls > 1 {
                break;
            }
            dir = z.iter().map(|x| -x).collect();
            step = 1.0;
            continue;
        };
        stalls = 0;
        step = (t * 2.0).min(1e6);
        if !prob.project(&mut next) {
            return None;
        }
        u = next;
        let (qn, gn) = prob.value_grad(&u);
        let zn = prob.precond.solve(&gn);
        let gzn: f64 = gn.iter().zip(&zn).map(|(a, b)| a * b).sum();
        let gzo: f64 = gn.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = ((gzn - gzo) / gz).max(0.0);
        dir = zn.iter().zip(&dir).map(|(a, d)| -a + beta * d).collect();
        q = qn;
        g = gn;
        z = zn;
        gz = gzn;
        if iters - window.1 >= STAGNATION_WINDOW {
            if window.0 - q <= 1e-10 * q {
                break;
            }
            window = (q, iters);
        }
    }
    let gnorm = gz.max(0.0).sqrt() / q;
    q.is_finite().then_some((q, u, iters, gnorm))
}

/// First nonzero p-Laplace eigenvalue (an upper bound on the discrete
/// minimum: the best of `cfg.restarts` descents).
pub fn lambda1_plaplace(surface: &StarSurface, tensors: &GeometryTensors, cfg: &PLaplaceConfig) -> Result<EigenResult> {
    lambda1_plaplace_warm(surface, tensors, cfg, None)
}

/// As [`lambda1_plaplace`], with an extra start (e.g. the previous sample's
/// eigenfunction).
pub fn lambda1_plaplace_warm(
    surface: &StarSurface,
    tensors: &GeometryTensors,
    cfg: &PLaplaceConfig,
    warm: Option<&[f64]>,
) -> Result<EigenResult> {
    cfg.validate()?;
    let op = assemble(surface, tensors)?;
    let elems = Elements::build(surface, tensors)?;
    let lap = lambda1_laplace(&op, cfg.eigen_tol)?;
    let precond = EnvelopeCholesky::factor(&op.stiffness.add_diagonal(lap.value, &op.mass))?;
    let prob = Problem {
        elems: &elems,
        mass: &op.mass,
        p: cfg.p,
        precond: &precond,
    };

    let mut starts: Vec<Vec<f64>> = vec![lap.eigenfunction.clone()];
    if let Some(w) = warm {
        if w.len() == op.len() {
            starts.push(w.to_vec());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    while starts.len() < cfg.restarts {
        starts.push(random_start(&op, &precond, &mut rng));
    }

    let mut best: Option<(f64, Vec<f64>, usize, f64)> = None;
    let mut values = Vec::new();
    let mut iterations = 0;
    for s in starts {
        if let Some(run) = descend(&prob, s, cfg) {
            iterations += run.2;
            values.push(run.0);
            if best.as_ref().is_none_or(|b| run.0 < b.0) {
                best = Some(run);
            }
        }
    }
    let Some((value, u, _, gnorm)) = best else {
        return Err(Error::SolverFailure {
            reason: "every restart failed".into(),
            residual: f64::NAN,
        });
    };
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let p = cfg.p;
    let norm: f64 = op.mass.iter().zip(&u).map(|(w, x)| w * x.abs().powf(p)).sum();
    let orth: f64 = op
        .mass
        .iter()
        .zip(&u)
        .map(|(w, x)| w * x.abs().powf(p - 1.0) * x.signum())
        .sum();
    let mut u = u;
    fix_sign(&mut u);
    Ok(EigenResult {
        p,
        value,
        residual: gnorm,
        iterations,
        restarts: values.len(),
        normalization_violation: (norm - 1.0).abs(),
        orthogonality_violation: orth.abs(),
        cluster: vec![value],
        cluster_width: 0.0,
        gap: None,
        restart_dispersion: Some((hi - value) / value),
        eigenfunction: u,
    })
}

/// White noise smoothed by two preconditioner solves.
fn random_start(op: &DiscreteOperator, precond: &EnvelopeCholesky, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut u: Vec<f64> = (0..op.len()).map(|_| rng.random::<f64>() - 0.5).collect();
    for _ in 0..2 {
        let mu: Vec<f64> = u.iter().zip(&op.mass).map(|(a, m)| a * m).collect();
        u = precond.solve(&mu);
    }
    u
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::{build_atlas, compute_tensors, embed, AtlasKind, RadialProfile};

    fn surf(kind: AtlasKind, res: usize, shape: &str) -> (StarSurface, GeometryTensors) {
        let a = Arc::new(build_atlas(kind, res).unwrap());
        let s = embed(a, &shape.parse::<RadialProfile>().unwrap()).unwrap();
        let t = compute_tensors(&s).unwrap();
        (s, t)
    }

    #[test]
    fn constant_quotient_is_zero() {
        let (s, t) = surf(AtlasKind::Icosphere, 1, "ellipsoid(1.2,1,1)");
        assert_eq!(rayleigh_p(&s, &t, &vec![2.0; s.len()], 3.0).unwrap(), 0.0);
        assert!(rayleigh_p(&s, &t, &vec![0.0; s.len()], 3.0).is_err());
    }

    #[test]
    fn quotient_at_eigenfunction() {
        let (s, t) = surf(AtlasKind::Icosphere, 2, "ellipsoid(1.5,1,1)");
        let lap = lambda1_laplace(&assemble(&s, &t).unwrap(), 1e-11).unwrap();
        let q = rayleigh_p(&s, &t, &lap.eigenfunction, 2.0).unwrap();
        assert!((q - lap.value).abs() < 1e-9 * lap.value);
    }

    #[test]
    fn shift_root() {
        let w = [1.0, 1.0, 2.0];
        let u = [0.0, 1.0, 3.0];
        let c = optimal_shift(&w, &u, 2.0);
        assert!((c - 7.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn p2_matches_laplace() {
        let (s, t) = surf(AtlasKind::Icosphere, 2, "sphere(1)");
        let lap = lambda1_laplace(&assemble(&s, &t).unwrap(), 1e-10).unwrap();
        let r = lambda1_plaplace(&s, &t, &PLaplaceConfig::with_p(2.0)).unwrap();
        assert!((r.value / lap.value - 1.0).abs() < 1e-6);
        assert!(r.normalization_violation < 1e-8);
        assert!(r.orthogonality_violation < 1e-6);
        assert_eq!(r.restarts, 3);
    }

    #[test]
    fn p_dilation() {
        let (s, t) = surf(AtlasKind::Circle, 128, "sphere(1)");
        let s2 = s.scaled(2.0).unwrap();
        let t2 = compute_tensors(&s2).unwrap();
        let cfg = PLaplaceConfig::with_p(3.0);
        let a = lambda1_plaplace(&s, &t, &cfg).unwrap().value;
        let b = lambda1_plaplace(&s2, &t2, &cfg).unwrap().value;
        assert!((b / a - 0.125).abs() < 0.02 * 0.125);
    }

    #[test]
    fn config_bounds() {
        assert!(PLaplaceConfig::with_p(1.0).validate().is_err());
        let cfg = PLaplaceConfig {
            restarts: 2,
            ..PLaplaceConfig::with_p(3.0)
        };
        assert!(cfg.validate().is_err());
    }
}
