use super::{CheckReport, PinchSchedule};
use crate::error::{Error, Result};
use crate::flow::FlowTrace;
use crate::geometry::{compute_tensors, GeometryTensors};

fn require_mean_convex(tensors: &GeometryTensors) -> Result<()> {
    match tensors.mean_curvature.iter().enumerate().find(|(_, h)| !(**h > 0.0)) {
        Some((i, h)) => Err(Error::HypothesisViolation(format!(
            "pinching needs H > 0; H[{i}] = {h}"
        ))),
        None => Ok(()),
    }
}

/// `min_i (κ_min,i − ε H_i)`; nonnegative iff `h ≥ ε H g` at every vertex.
pub fn pinching_margin(tensors: &GeometryTensors, eps: f64) -> Result<f64> {
    require_mean_convex(tensors)?;
    Ok((0..tensors.len())
        .map(|i| tensors.kappa_min(i) - eps * tensors.mean_curvature[i])
        .fold(f64::INFINITY, f64::min))
}

/// Largest `α` with `h ≥ (α/2) H g` everywhere, clamped to `[0, 2/n]`.
pub fn alpha_max(tensors: &GeometryTensors) -> Result<f64> {
    require_mean_convex(tensors)?;
    let ratio = (0..tensors.len())
        .map(|i| tensors.kappa_min(i) / tensors.mean_curvature[i])
        .fold(f64::INFINITY, f64::min);
    Ok((2.0 * ratio).clamp(0.0, 2.0 / tensors.dim() as f64))
}

/// `min_k pinching_margin(t_k, ε(t_k − t_0)) / mean H(t_k)`. Uses the margin
/// stored on the sample when an observer recorded one.
pub fn check_pinching_preserved(trace: &FlowTrace, schedule: &PinchSchedule, tol: f64) -> Result<CheckReport> {
    let Some(first) = trace.samples.first() else {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    };
    let t0 = first.t;
    let mut margin = f64::INFINITY;
    let mut at = t0;
    let mut initial = f64::NAN;
    for s in &trace.samples {
        let eps = schedule.epsilon(s.t - t0);
        let m = match (s.pinch_margin, s.eps_t) {
            (Some(m), Some(e)) if e == eps => m,
            _ => pinching_margin(&compute_tensors(&s.snapshot)?, eps)?,
        };
        let rel = m / s.h_mean;
        if s.t == t0 {
            initial = rel;
        }
        if rel < margin {
            margin = rel;
            at = s.t;
        }
    }
    let report = CheckReport::new(
        "pinching_preserved",
        "h ≥ ε(t) H g persists along the flow once it holds with ε(0) = α/2",
        margin,
        tol,
    )
    .over(trace);
    let note = format!(
        "α = {}, worst relative margin at t = {at}, initial relative margin {initial:e}",
        schedule.alpha
    );
    if initial < -tol {
        return Ok(report.fail_with(format!("{note}; hypothesis already violated at t = {t0}")));
    }
    Ok(report.with_note(note))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use nalgebra::Matrix3;
    use proptest::prelude::*;

    use super::*;
    use crate::flow::{run, DtPolicy, FlowConfig, SpeedFunction};
    use crate::geometry::{build_atlas, embed, AtlasKind, RadialProfile, StarSurface};

    fn surface(res: usize, shape: &str) -> StarSurface {
        let a = Arc::new(build_atlas(AtlasKind::Icosphere, res).unwrap());
        embed(a, &shape.parse::<RadialProfile>().unwrap()).unwrap()
    }

    #[test]
    fn sphere_margins() {
        let t = compute_tensors(&surface(3, "sphere(2)")).unwrap();
        let m0 = pinching_margin(&t, 0.5).unwrap();
        let m1 = pinching_margin(&t, 0.25).unwrap();
        assert!(m0.abs() < 1e-3, "{m0}");
        assert!((m1 - 0.25).abs() < 5e-3, "{m1}");
        assert!((alpha_max(&t).unwrap() - 1.0).abs() < 2e-3);
    }

    #[test]
    fn alpha_max_is_tight() {
        let t = compute_tensors(&surface(3, "ellipsoid(2,1,1)")).unwrap();
        let a = alpha_max(&t).unwrap();
        assert!(a > 0.0 && a < 1.0);
        assert!(pinching_margin(&t, a / 2.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn alpha_max_stable_under_refinement() {
        let a3 = alpha_max(&compute_tensors(&surface(3, "ellipsoid(2,1,1)")).unwrap()).unwrap();
        let a4 = alpha_max(&compute_tensors(&surface(4, "ellipsoid(2,1,1)")).unwrap()).unwrap();
        assert!((a3 / a4 - 1.0).abs() < 0.02, "{a3} {a4}");
        // Analytic minimum of κ_min / H on the (2,1,1) ellipsoid: equator,
        // κ = (b/a², 1/b) = (1/4, 1), so α = 2 · (1/4) / (5/4) = 0.4.
        assert!((a4 - 0.4).abs() < 0.01, "{a4}");
    }

    #[test]
    fn saddle_vertex_clamps_to_zero() {
        let mut ks = vec![(1.0, 1.0); 12];
        ks[5] = (-0.2, 1.5);
        assert_eq!(alpha_max(&synthetic(&ks)).unwrap(), 0.0);
    }

    #[test]
    fn rejects_nonpositive_h() {
        let mut t = compute_tensors(&surface(1, "sphere(1)")).unwrap();
        t.mean_curvature[3] = 0.0;
        assert!(matches!(pinching_margin(&t, 0.1), Err(Error::HypothesisViolation(_))));
        assert!(alpha_max(&t).is_err());
    }

    #[test]
    fn illegal_alpha_fails_at_start() {
        let s = surface(2, "ellipsoid(1.5,1,1)");
        let cfg = FlowConfig::new(DtPolicy::Fixed(0.01), 0.1, 0.05);
        let trace = run(&s, &SpeedFunction::Imcf, &cfg, &mut []).unwrap();
        let r = check_pinching_preserved(&trace, &PinchSchedule::new(2, 1.0).unwrap(), 0.02).unwrap();
        assert!(!r.pass);
        assert!(r.note.unwrap().contains("hypothesis"));
    }

    fn synthetic(kappas: &[(f64, f64)]) -> GeometryTensors {
        let mut t = compute_tensors(&surface(0, "sphere(1)")).unwrap();
        for (i, &(a, b)) in kappas.iter().enumerate() {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            t.set_principal(i, &[lo, hi]);
            t.mean_curvature[i] = lo + hi;
            t.shape_tensors[i] = Matrix3::zeros();
        }
        t
    }

    proptest! {
        #[test]
        fn margin_sign_matches_vertexwise_condition(
            ks in proptest::collection::vec((0.05f64..3.0, 0.05f64..3.0), 12),
            eps in 0.0f64..0.5,
        ) {
            let t = synthetic(&ks);
            let m = pinching_margin(&t, eps).unwrap();
            let all = (0..12).all(|i| t.kappa_min(i) >= eps * t.mean_curvature[i]);
            prop_assert_eq!(m >= 0.0, all);
        }
    }
}
