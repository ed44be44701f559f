use serde::{Deserialize, Serialize};

use super::CheckReport;
use crate::error::{invalid, Result};

/// `ε(t) = 1/n − e^{−αt+β}` with `β = ln(1/n − α/2)`, so `ε(0) = α/2` and
/// `ε ↗ 1/n`. At `α = 2/n`, `β = −∞` and `ε ≡ 1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinchSchedule {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl PinchSchedule {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 {
            return invalid("dimension n must be positive");
        }
        let top = 2.0 / n as f64;
        if !(alpha > 0.0 && alpha <= top) {
            return invalid(format!("alpha = {alpha} must lie in (0, {top}]"));
        }
        let gap = 1.0 / n as f64 - 0.5 * alpha;
        let beta = if gap > 0.0 { gap.ln() } else { f64::NEG_INFINITY };
        Ok(PinchSchedule { n, alpha, beta })
    }

    fn decay(&self, t: f64) -> f64 {
        (-self.alpha * t + self.beta).exp()
    }

    pub fn epsilon(&self, t: f64) -> f64 {
        1.0 / self.n as f64 - self.decay(t)
    }

    pub fn epsilon_dot(&self, t: f64) -> f64 {
        self.alpha * self.decay(t)
    }

    /// `∫₀ᵗ (1/n − ε(s)) ds = (e^β / α)(1 − e^{−αt})`.
    pub fn deficit_integral(&self, t: f64) -> f64 {
        self.beta.exp() / self.alpha * (1.0 - (-self.alpha * t).exp())
    }
}

/// Checks on a time grid: `0 ≤ ε ≤ 1/n`; `ε` nondecreasing with `ε' ≥ 0`;
/// `0 ≤ 2ε² + ε' ≤ (2/n)ε`. Margin is the smallest slack of all of them.
pub fn epsilon_props(schedule: &PinchSchedule, t_grid: &[f64], tol: f64) -> Result<CheckReport> {
    if t_grid.is_empty() {
        return invalid("time grid is empty");
    }
    if let Some(t) = t_grid.iter().find(|t| !(**t >= 0.0)) {
        return invalid(format!("grid time {t} must be nonnegative"));
    }
    let inv_n = 1.0 / schedule.n as f64;
    let mut margin = f64::INFINITY;
    let mut worst = "";
    let mut take = |m: f64, what: &'static str| {
        if m < margin {
            margin = m;
            worst = what;
        }
    };
    let mut prev: Option<f64> = None;
    for &t in t_grid {
        let e = schedule.epsilon(t);
        let de = schedule.epsilon_dot(t);
        take(e, "ε ≥ 0");
        take(inv_n - e, "ε ≤ 1/n");
        take(de, "ε' ≥ 0");
        if let Some(p) = prev {
            take(e - p, "ε nondecreasing");
        }
        prev = Some(e);
        let lhs = 2.0 * e * e + de;
        take(lhs, "2ε² + ε' ≥ 0");
        take(2.0 * inv_n * e - lhs, "2ε² + ε' ≤ (2/n)ε");
    }
    let t0 = t_grid[0];
    let t1 = *t_grid.last().unwrap();
    Ok(CheckReport::new(
        "epsilon_schedule",
        "ε(t) = 1/n − e^{−αt+β} stays in [0, 1/n], increases, and satisfies 0 ≤ 2ε² + ε' ≤ (2/n)ε",
        margin,
        tol,
    )
    .with_range(t0, t1)
    .with_note(format!(
        "n = {}, α = {}, tightest: {worst}; 1/n − ε(t_last) = {:e}",
        schedule.n,
        schedule.alpha,
        inv_n - schedule.epsilon(t1)
    )))
}
