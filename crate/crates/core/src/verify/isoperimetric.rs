use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{alpha_max, CheckReport};
use crate::error::{invalid, Error, Result};
use crate::geometry::{compute_tensors, embed, total_area, RadialProfile, StarSurface};
use crate::spectral::{assemble, lambda1_laplace, lambda1_plaplace, PLaplaceConfig};

/// Radius of the round sphere with the given area: `(A / |Sⁿ|)^{1/n}`.
pub fn convergence_radius(area: f64, n: usize) -> Result<f64> {
    if !(area > 0.0 && area.is_finite()) {
        return invalid(format!("area {area} must be positive"));
    }
    let omega = match n {
        1 => 2.0 * PI,
        2 => 4.0 * PI,
        _ => return invalid(format!("dimension n = {n} must be 1 or 2")),
    };
    Ok((area / omega).powf(1.0 / n as f64))
}

/// `C(n, p, α) = exp[(p/α)(1/n − α/2)]`.
pub fn isoperimetric_constant(n: usize, p: f64, alpha: f64) -> f64 {
    (p / alpha * (1.0 / n as f64 - 0.5 * alpha)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoperimetricDetail {
    pub p: f64,
    pub alpha: f64,
    pub constant: f64,
    /// `(|M| / |Sⁿ|)^{1/n}` from the discrete area of `M`.
    pub radius: f64,
    /// Radius whose sphere mesh on the same atlas has exactly the discrete
    /// area of `M`.
    pub matched_radius: f64,
    pub lambda_surface: f64,
    pub lambda_sphere: f64,
    /// Smooth value on the round sphere of radius `radius` (`p = 2` only).
    pub lambda_sphere_exact: Option<f64>,
    pub equality_case: bool,
}

fn first_eigenvalue(surface: &StarSurface, p: f64, cfg: &PLaplaceConfig, eigen_tol: f64) -> Result<f64> {
    let t = compute_tensors(surface)?;
    if p == 2.0 {
        Ok(lambda1_laplace(&assemble(surface, &t)?, eigen_tol)?.value)
    } else {
        Ok(lambda1_plaplace(surface, &t, &PLaplaceConfig { p, ..cfg.clone() })?.value)
    }
}

/// `λ₁,ₚ(M) ≥ C⁻¹(n, p, α) λ₁,ₚ(Sⁿ(R))` with `|Sⁿ(R)| = |M|` and `α` the
/// largest admissible pinching constant of `M`. Both eigenvalues come from
/// the same atlas and solver settings; margin is
/// `(λ(M) − C⁻¹ λ(S)) / λ(S)`.
pub fn check_isoperimetric_bound(
    surface: &StarSurface,
    p: f64,
    cfg: &PLaplaceConfig,
    eigen_tol: f64,
    tol: f64,
) -> Result<(CheckReport, IsoperimetricDetail)> {
    let tensors = compute_tensors(surface)?;
    let alpha = alpha_max(&tensors)?;
    if alpha <= 0.0 {
        return Err(Error::HypothesisViolation(
            "no positive α with h ≥ (α/2) H g (surface not strictly convex)".into(),
        ));
    }
    let n = surface.dim();
    let area = total_area(surface, &tensors);
    let radius = convergence_radius(area, n)?;
    let trial = embed(surface.atlas().clone(), &RadialProfile::Sphere { radius })?;
    let trial_area = total_area(&trial, &compute_tensors(&trial)?);
    // Mesh area scales exactly as R^n on a fixed atlas.
    let matched_radius = radius * (area / trial_area).powf(1.0 / n as f64);
    let sphere = embed(
        surface.atlas().clone(),
        &RadialProfile::Sphere { radius: matched_radius },
    )?;

    let constant = isoperimetric_constant(n, p, alpha);
    let lambda_surface = first_eigenvalue(surface, p, cfg, eigen_tol)?;
    let lambda_sphere = first_eigenvalue(&sphere, p, cfg, eigen_tol)?;
    let margin = (lambda_surface - lambda_sphere / constant) / lambda_sphere;
    let top = 2.0 / n as f64;
    let equality_case = (top - alpha) <= 1e-3 * top;
    let detail = IsoperimetricDetail {
        p,
        alpha,
        constant,
        radius,
        matched_radius,
        lambda_surface,
        lambda_sphere,
        lambda_sphere_exact: (p == 2.0).then(|| n as f64 / (radius * radius)),
        equality_case,
    };
    let mut note = format!(
        "α = {alpha:.6}, C = {constant:.6}, λ(M) = {lambda_surface:.8}, λ(S(R)) = {lambda_sphere:.8}, R = {radius:.6}"
    );
    if equality_case {
        note.push_str("; α = 2/n: equality case, M should be a round sphere");
    }
    let report = CheckReport::new(
        "isoperimetric_bound",
        "λ₁,ₚ(M) ≥ C⁻¹(n,p,α) λ₁,ₚ(Sⁿ(R)) with |Sⁿ(R)| = |M| and C = exp[(p/α)(1/n − α/2)]",
        margin,
        tol,
    )
    .with_note(note);
    Ok((report, detail))
}
