use crate::error::{invalid, Result};
use crate::geometry::StarSurface;

/// Radii multiplied by `e^{-t/n}`; the time label is kept.
pub fn rescale_snapshot(surface: &StarSurface, n: usize) -> Result<StarSurface> {
    if n == 0 {
        return invalid("dimension n must be positive");
    }
    surface.scaled((-surface.t() / n as f64).exp())
}

/// `e^{pt/n} λ`: the eigenvalue of the rescaled surface.
pub fn eigen_rescale(lambda: f64, t: f64, n: usize, p: f64) -> f64 {
    (p * t / n as f64).exp() * lambda
}

/// Population standard deviation of the radii over their mean. Invariant
/// under dilation, so rescaled and unrescaled snapshots agree.
pub fn sphericity(surface: &StarSurface) -> f64 {
    let r = surface.radii();
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}
