use super::{pinching_margin, PinchSchedule};
use crate::error::Result;
use crate::flow::{Observer, TraceSample};
use crate::geometry::GeometryTensors;
use crate::spectral::{assemble, lambda1_laplace, lambda1_plaplace_warm, EigenResult, PLaplaceConfig};

/// Solves `λ₁` and every requested `λ₁,ₚ` at each sample. Each p-solve is
/// warm-started from the previous sample's eigenfunction.
#[derive(Debug, Clone)]
pub struct SpectralObserver {
    pub ps: Vec<f64>,
    pub eigen_tol: f64,
    pub plaplace: PLaplaceConfig,
    /// Keep every eigen result (for export); off by default.
    pub keep_results: bool,
    pub results: Vec<(f64, EigenResult)>,
    warm: Vec<(f64, Vec<f64>)>,
}

impl SpectralObserver {
    pub fn new(ps: Vec<f64>, eigen_tol: f64, plaplace: PLaplaceConfig) -> Self {
        SpectralObserver {
            ps,
            eigen_tol,
            plaplace,
            keep_results: false,
            results: Vec::new(),
            warm: Vec::new(),
        }
    }
}

impl Observer for SpectralObserver {
    fn observe(&mut self, sample: &mut TraceSample, tensors: &GeometryTensors) -> Result<()> {
        let surface = &sample.snapshot;
        let lap = lambda1_laplace(&assemble(surface, tensors)?, self.eigen_tol)?;
        sample.lambda1 = Some(lap.value);
        if self.keep_results {
            self.results.push((sample.t, lap.clone()));
        }
        for &p in &self.ps {
            if p == 2.0 {
                continue;
            }
            let cfg = PLaplaceConfig {
                p,
                ..self.plaplace.clone()
            };
            let warm = self.warm.iter().find(|(q, _)| *q == p).map(|(_, u)| u.as_slice());
            let r = lambda1_plaplace_warm(surface, tensors, &cfg, warm)?;
            sample.lambda1_p.push((p, r.value));
            match self.warm.iter_mut().find(|(q, _)| *q == p) {
                Some(slot) => slot.1 = r.eigenfunction.clone(),
                None => self.warm.push((p, r.eigenfunction.clone())),
            }
            if self.keep_results {
                self.results.push((sample.t, r));
            }
        }
        Ok(())
    }
}

/// Records `pinching_margin(tensors, ε(t − t₀))` and `ε(t − t₀)`.
#[derive(Debug, Clone)]
pub struct PinchingObserver {
    pub schedule: PinchSchedule,
    pub t0: f64,
}

impl Observer for PinchingObserver {
    fn observe(&mut self, sample: &mut TraceSample, tensors: &GeometryTensors) -> Result<()> {
        let eps = self.schedule.epsilon(sample.t - self.t0);
        sample.eps_t = Some(eps);
        sample.pinch_margin = Some(pinching_margin(tensors, eps)?);
        Ok(())
    }
}
