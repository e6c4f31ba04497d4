use rayon::prelude::*;

use crate::coupling::{run_trial_with, CoupledDynamics, CouplingConfig, TrialOutcome};
use crate::dynamics::StatePoint;
use crate::error::{Error, Result};
use crate::estimation::exit::ExitSpec;
use crate::estimation::fit::{fit_exponential_tail, FitPolicy, RateEstimate, TailKind};
use crate::estimation::survival::SurvivalCurve;
use crate::real::Real;
use crate::rng::{NoiseStream, REFERENCE_STREAM};

/// Fitting is refused for ensembles smaller than this.
pub const MIN_FIT_TRIALS: usize = 1_000;

pub const DEFAULT_BURN_IN: u64 = 10_000;
pub const DEFAULT_SPACING: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleOptions {
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; 0 uses rayon's default. Results never depend on it.
    pub workers: usize,
    pub policy: FitPolicy,
}

impl EnsembleOptions {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            workers: 0,
            policy: FitPolicy::default(),
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_policy(mut self, policy: FitPolicy) -> Self {
        self.policy = policy;
        self
    }
}

/// Spacing of the reference trajectory that supplies approximately
/// stationary partners for the ergodic estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceSampling {
    /// Steps between consecutive partners.
    pub spacing: u64,
    /// Steps discarded before the first partner.
    pub burn_in: u64,
}

impl Default for ReferenceSampling {
    fn default() -> Self {
        Self {
            spacing: DEFAULT_SPACING,
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate<T> {
    pub curve: SurvivalCurve,
    pub estimate: RateEstimate<T>,
}

fn with_pool<R: Send>(workers: usize, job: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(job))
}

fn check_trials(n: usize) -> Result<()> {
    if n < MIN_FIT_TRIALS {
        return Err(Error::FitWindow(format!(
            "{n} trials is below the minimum of {MIN_FIT_TRIALS} for fitting"
        )));
    }
    Ok(())
}

/// Runs `trials` coupled trials from `(x0, y_i)`; trial `i` uses stream `i`.
fn coupled_trials<T: Real, D: CoupledDynamics<T>>(
    dynamics: &D,
    x0: &[T],
    partner: impl Fn(usize) -> Vec<T> + Sync,
    config: &CouplingConfig<T>,
    opts: &EnsembleOptions,
) -> Result<Vec<TrialOutcome>> {
    config.validate()?;
    let seed = opts.seed;
    with_pool(opts.workers, || {
        (0..opts.trials)
            .into_par_iter()
            .map_init(
                || dynamics.new_scratch(),
                |scratch, i| {
                    let mut rng = NoiseStream::new(seed, i as u64);
                    let y0 = partner(i);
                    run_trial_with(dynamics, x0, &y0, config, scratch, &mut rng)
                }
            )
            .collect::<Result<Vec<_>>>()
    })?
}

/// Coupling times of `trials` independent pairs started at `(x0, y0)`.
pub fn contraction_curve<T: Real, D: CoupledDynamics<T>>(
    dynamics: &D,
    x0: &StatePoint<T>,
    y0: &StatePoint<T>,
    config: &CouplingConfig<T>,
    opts: &EnsembleOptions,
) -> Result<SurvivalCurve> {
    dynamics.check_point(x0)?;
    dynamics.check_point(y0)?;
    let y = y0.coords();
    let outcomes = coupled_trials(dynamics, x0.coords(), |_| y.to_vec(), config, opts)?;
    Ok(SurvivalCurve::from_outcomes(&outcomes))
}

/// Lower-bound estimate of the geometric contraction rate between `x0` and `y0`.
pub fn estimate_contraction_rate<T: Real, D: CoupledDynamics<T>>(
    dynamics: &D,
    x0: &StatePoint<T>,
    y0: &StatePoint<T>,
    config: &CouplingConfig<T>,
    opts: &EnsembleOptions,
) -> Result<TailEstimate<T>> {
    check_trials(opts.trials)?;
    let curve = contraction_curve(dynamics, x0, y0, config, opts)?;
    let estimate = fit_exponential_tail(&curve, &opts.policy)?;
    Ok(TailEstimate { curve, estimate })
}

/// Partners `y_1, ..., y_N` taken every `spacing` steps along one long
/// trajectory from `y_seed`, after `burn_in` discarded steps.
pub fn reference_partners<T: Real, D: CoupledDynamics<T>>(
    dynamics: &D,
    y_seed: &StatePoint<T>,
    sampling: ReferenceSampling,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<T>>> {
    dynamics.check_point(y_seed)?;
    if sampling.spacing == 0 {
        return Err(Error::InvalidInput("partner spacing H must be at least 1 step".into()));
    }
    let mut rng = NoiseStream::new(seed, REFERENCE_STREAM);
    let mut scratch = dynamics.new_scratch();
    let mut y = y_seed.coords().to_vec();
    for s in 0..sampling.burn_in {
        dynamics.advance(&mut y, &mut scratch, &mut rng).map_err(|e| e.at_step(s))?;
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..sampling.spacing {
            let s = rng.step_index();
            dynamics.advance(&mut y, &mut scratch, &mut rng).map_err(|e| e.at_step(s))?;
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Coupling times of `x0` against approximately stationary partners.
pub fn ergodic_curve<T: Real, D: CoupledDynamics<T>>(
    dynamics: &D,
    x0: &StatePoint<T>,
    y_seed: &StatePoint<T>,
    sampling: ReferenceSampling,
    config: &CouplingConfig<T>,
    opts: &EnsembleOptions,
) -> Result<SurvivalCurve> {
    dynamics.check_point(x0)?;
    let partners = reference_partners(dynamics, y_seed, sampling, opts.trials, opts.seed)?;
    let outcomes = coupled_trials(dynamics, x0.coords(), |i| partners[i].clone(), config, opts)?;
    Ok(SurvivalCurve::from_outcomes(&outcomes))
}

/// Lower-bound estimate of the rate of convergence to the invariant measure.
pub fn estimate_ergodic_rate<T: Real, D: CoupledDynamics<T>>(
    dynamics: &D,
    x0: &StatePoint<T>,
    y_seed: &StatePoint<T>,
    sampling: ReferenceSampling,
    config: &CouplingConfig<T>,
    opts: &EnsembleOptions,
) -> Result<TailEstimate<T>> {
    check_trials(opts.trials)?;
    let curve = ergodic_curve(dynamics, x0, y_seed, sampling, config, opts)?;
    let estimate = fit_exponential_tail(&curve, &opts.policy)?;
    Ok(TailEstimate { curve, estimate })
}

/// First exit times of independent pairs from the alternating set sequence.
pub fn exit_curve<T: Real, D: CoupledDynamics<T>>(
    dynamics: &D,
    spec: &ExitSpec,
    x0: &StatePoint<T>,
    y0: &StatePoint<T>,
    max_steps: u64,
    opts: &EnsembleOptions,
) -> Result<SurvivalCurve> {
    dynamics.check_point(x0)?;
    dynamics.check_point(y0)?;
    if dynamics.dim() != 1 {
        return Err(Error::InvalidInput("exit sets are defined for one-dimensional models".into()));
    }
    let (a0, b0) = spec.sets_at(0);
    let (xs, ys) = (x0.coords()[0].to_f64_lossy(), y0.coords()[0].to_f64_lossy());
    if !a0.contains(xs) {
        return Err(Error::InvalidInput(format!("x0 = {xs} is not in the first A set")));
    }
    if !b0.contains(ys) {
        return Err(Error::InvalidInput(format!("y0 = {ys} is not in the first B set")));
    }
    if max_steps == 0 {
        return Err(Error::InvalidInput("max_steps must be at least 1".into()));
    }
    let seed = opts.seed;
    let outcomes = with_pool(opts.workers, || {
        (0..opts.trials)
            .into_par_iter()
            .map_init(
                || dynamics.new_scratch(),
                |scratch, i| -> Result<TrialOutcome> {
                    let mut rng = NoiseStream::new(seed, i as u64);
                    let mut x = x0.coords().to_vec();
                    let mut y = y0.coords().to_vec();
                    for t in 1..=max_steps {
                        dynamics.advance(&mut x, scratch, &mut rng).map_err(|e| e.at_step(t - 1))?;
                        dynamics.advance(&mut y, scratch, &mut rng).map_err(|e| e.at_step(t - 1))?;
                        let (a, b) = spec.sets_at(t);
                        if !a.contains(x[0].to_f64_lossy()) || !b.contains(y[0].to_f64_lossy()) {
                            return Ok(TrialOutcome::Coupled(t));
                        }
                    }
                    Ok(TrialOutcome::Censored(max_steps))
                },
            )
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(SurvivalCurve::from_outcomes(&outcomes))
}

/// Upper-bound estimate of the contraction rate from first exit times.
pub fn estimate_exit_upper_bound<T: Real, D: CoupledDynamics<T>>(
    dynamics: &D,
    spec: &ExitSpec,
    x0: &StatePoint<T>,
    y0: &StatePoint<T>,
    max_steps: u64,
    opts: &EnsembleOptions,
) -> Result<TailEstimate<T>> {
    check_trials(opts.trials)?;
    let curve = exit_curve(dynamics, spec, x0, y0, max_steps, opts)?;
    let estimate = fit_exponential_tail::<T>(&curve, &opts.policy)?.with_kind(TailKind::ExitUpper);
    Ok(TailEstimate { curve, estimate })
}
