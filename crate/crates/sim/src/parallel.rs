//! Deterministic parallel ensemble execution.

use ccd_core::{
    run_trajectory, CoreError, EnsembleAccumulator, EnsembleResult, EnsembleRunner,
    ObservableKind, TrajectoryRun,
};
use rayon::prelude::*;

/// Work-stealing ensemble runner. Trajectories are integrated in parallel
/// but folded into the accumulator in trajectory-index order, so the result
/// is bitwise identical to [`ccd_core::SerialRunner`] at any thread count.
pub struct RayonRunner {
    pool: Option<rayon::ThreadPool>,
}

impl RayonRunner {
    /// `threads = 0` shares the process-global pool (one worker per core).
    pub fn new(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = match threads {
            0 => None,
            n => Some(rayon::ThreadPoolBuilder::new().num_threads(n).build()?),
        };
        Ok(RayonRunner { pool })
    }
}

impl EnsembleRunner for RayonRunner {
    fn run_ensemble(
        &self,
        run: &TrajectoryRun,
        n: usize,
        retain: Option<ObservableKind>,
    ) -> Result<EnsembleResult, CoreError> {
        let work = || {
            (0..n as u64)
                .into_par_iter()
                .map(|i| run_trajectory(run, i))
                .collect::<Result<Vec<_>, CoreError>>()
        };
        let trajectories = match &self.pool {
            Some(pool) => pool.install(work),
            None => work(),
        }?;
        let mut acc = EnsembleAccumulator::new(retain);
        for t in &trajectories {
            acc.push(t)?;
        }
        Ok(acc.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ccd_core::{FrameLabel, LindbladConfig, MagneticNoise, SchemeConfig, SerialRunner};

    fn small_run() -> TrajectoryRun {
        let scheme = SchemeConfig::refined(&[40.0, 40.0 / 30.0]).with_amp_noise(2.4e-3, 1000.0);
        let mut run = TrajectoryRun::new(scheme, FrameLabel::Int2, 5.0);
        run.lindblad = LindbladConfig::from_t1(1500.0);
        run.magnetic = Some(MagneticNoise {
            sigma: ccd_core::ang(0.05),
            tau_us: 25.0,
        });
        run.master_seed = 99;
        run
    }

    #[test]
    fn parallel_fold_is_bitwise_equal_to_serial() {
        let run = small_run();
        let retain = Some(ObservableKind::PDown);
        let serial = SerialRunner.run_ensemble(&run, 12, retain).unwrap();
        for threads in [1, 4] {
            let par = RayonRunner::new(threads)
                .unwrap()
                .run_ensemble(&run, 12, retain)
                .unwrap();
            assert_eq!(par.n, serial.n);
            for (a, b) in par.t_us.iter().zip(&serial.t_us) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            for k in 0..par.mean.len() {
                for (a, b) in par.mean[k].iter().zip(&serial.mean[k]) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
                for (a, b) in par.se[k].iter().zip(&serial.se[k]) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
            for (ra, rb) in par.retained.iter().zip(&serial.retained) {
                for (a, b) in ra.iter().zip(rb) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }
}
