//! Coupled trajectory pairs: far-from-coupling strategies, the maximal
//! coupling attempt, and the trial loop that switches between them.

mod onestep;

pub use onestep::{couple_step_far, maximal_coupling_attempt, reflect, PairScratch};

use crate::dynamics::StatePoint;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::NoiseStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FarStrategy {
    Independent,
    Synchronous,
    Reflection,
}

impl FarStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            FarStrategy::Independent => "independent",
            FarStrategy::Synchronous => "synchronous",
            FarStrategy::Reflection => "reflection",
        }
    }
}

impl std::str::FromStr for FarStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(FarStrategy::Independent),
            "synchronous" => Ok(FarStrategy::Synchronous),
            "reflection" => Ok(FarStrategy::Reflection),
            other => Err(Error::InvalidInput(format!(
                "unknown strategy `{other}` (expected independent, synchronous or reflection)"
            ))),
        }
    }
}

/// How the maximal-coupling attempt turns the four proposal densities into
/// an acceptance probability.
///
/// Both rules draw independent proposals `X'`, `Y'` and, on acceptance, move
/// both chains to `X'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AcceptanceRule {
    /// `r = min(1, p_y(X')/p_x(X')) · min(1, p_x(Y')/p_y(Y'))`.
    ///
    /// Each factor is the probability that a proposal lies in the common
    /// part of the two kernels, so `Y` keeps the exact marginal `p_y`.
    #[default]
    ResidualOverlap,
    /// `r = [min/max of p_x, p_y at X'] · [min/max of p_x, p_y at Y']`.
    ///
    /// Couples less often than `ResidualOverlap` and biases the marginal of
    /// `Y` towards `p_x`; kept for comparison.
    MinMaxRatio,
}

impl AcceptanceRule {
    pub fn as_str(self) -> &'static str {
        match self {
            AcceptanceRule::ResidualOverlap => "overlap",
            AcceptanceRule::MinMaxRatio => "minmax",
        }
    }

    /// Acceptance probability from log densities of both kernels at both proposals.
    #[inline]
    pub fn ratio<T: Real>(self, lpx_at_x: T, lpy_at_x: T, lpx_at_y: T, lpy_at_y: T) -> T {
        let (dx, dy) = (lpy_at_x - lpx_at_x, lpx_at_y - lpy_at_y);
        let r = match self {
            _ if dx.is_nan() || dy.is_nan() => T::nan(),
            AcceptanceRule::ResidualOverlap => (dx.min(T::zero()) + dy.min(T::zero())).exp(),
            AcceptanceRule::MinMaxRatio => {
                (-(lpx_at_x - lpy_at_x).abs() - (lpx_at_y - lpy_at_y).abs()).exp()
            }
        };
        if r.is_nan() {
            log::debug!("acceptance ratio undefined (zero densities); treating as 0");
            T::zero()
        } else {
            r.max(T::zero()).min(T::one())
        }
    }
}

impl std::str::FromStr for AcceptanceRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overlap" => Ok(AcceptanceRule::ResidualOverlap),
            "minmax" => Ok(AcceptanceRule::MinMaxRatio),
            other => Err(Error::InvalidInput(format!(
                "unknown acceptance rule `{other}` (expected overlap or minmax)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingConfig<T> {
    pub far_strategy: FarStrategy,
    /// Probability of forcing an independent update at each far step.
    pub mixture_beta: T,
    /// Maximal coupling is attempted once the pair is within this distance.
    pub threshold_d: T,
    /// Trials still uncoupled after this many steps are censored.
    pub max_steps: u64,
    pub rule: AcceptanceRule,
}

pub const DEFAULT_BETA: f64 = 0.05;
pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

impl<T: Real> CouplingConfig<T> {
    pub fn new(far_strategy: FarStrategy, mixture_beta: T, threshold_d: T, max_steps: u64) -> Result<Self> {
        let cfg = Self {
            far_strategy,
            mixture_beta,
            threshold_d,
            max_steps,
            rule: AcceptanceRule::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_rule(mut self, rule: AcceptanceRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_d > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "threshold d must be positive, got {}",
                self.threshold_d
            )));
        }
        if !(self.mixture_beta >= T::zero() && self.mixture_beta < T::one()) {
            return Err(Error::InvalidInput(format!(
                "mixture probability must lie in [0, 1), got {}",
                self.mixture_beta
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidInput("max_steps must be at least 1".into()));
        }
        Ok(())
    }

    /// A pure strategy (β = 0) lacks the independent components that
    /// guarantee irreducibility of the coupled chain.
    pub fn irreducibility_certified(&self) -> bool {
        self.mixture_beta > T::zero()
    }
}

/// Two coupled trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    /// Once set, `x` and `y` are bitwise equal and stay equal.
    pub coupled: bool,
    pub steps_elapsed: u64,
}

impl<T: Real> CoupledPair<T> {
    pub fn new(x: &StatePoint<T>, y: &StatePoint<T>) -> Self {
        let coupled = x.coords() == y.coords();
        Self {
            x: x.coords().to_vec(),
            y: y.coords().to_vec(),
            coupled,
            steps_elapsed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrialOutcome {
    /// Coupling time in steps.
    Coupled(u64),
    /// Still uncoupled at the cutoff.
    Censored(u64),
}

impl TrialOutcome {
    pub fn coupling_time(self) -> Option<u64> {
        match self {
            TrialOutcome::Coupled(t) => Some(t),
            TrialOutcome::Censored(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttemptOutcome<T> {
    pub ratio: T,
    pub accepted: bool,
}

/// A Markov kernel that can be run as a coupled pair.
///
/// Implemented by one-step models with Gaussian densities and by the
/// two-step construction for degenerate noise.
pub trait CoupledDynamics<T: Real>: Send + Sync {
    type Scratch: Send;

    fn dim(&self) -> usize;

    /// Model time per step.
    fn step_size(&self) -> T;

    fn new_scratch(&self) -> Self::Scratch;

    fn check_point(&self, x: &StatePoint<T>) -> Result<()>;

    fn distance(&self, x: &[T], y: &[T]) -> T;

    /// Advances a single chain by one step.
    fn advance(&self, x: &mut [T], scratch: &mut Self::Scratch, rng: &mut NoiseStream) -> Result<()>;

    fn far_step(
        &self,
        pair: &mut CoupledPair<T>,
        strategy: FarStrategy,
        beta: T,
        scratch: &mut Self::Scratch,
        rng: &mut NoiseStream,
    ) -> Result<()>;

    fn maximal_attempt(
        &self,
        pair: &mut CoupledPair<T>,
        rule: AcceptanceRule,
        scratch: &mut Self::Scratch,
        rng: &mut NoiseStream,
    ) -> Result<AttemptOutcome<T>>;

    /// Steps an already coupled pair; both components receive the same noise.
    fn step_coupled(&self, pair: &mut CoupledPair<T>, scratch: &mut Self::Scratch, rng: &mut NoiseStream) -> Result<()> {
        self.advance(&mut pair.x, scratch, rng)?;
        pair.y.copy_from_slice(&pair.x);
        pair.steps_elapsed += 1;
        Ok(())
    }
}

/// Runs one coupled trial until the chains meet or the cutoff is reached.
pub fn run_coupled_trial<T: Real, D: CoupledDynamics<T>>(
    dynamics: &D,
    x0: &StatePoint<T>,
    y0: &StatePoint<T>,
    config: &CouplingConfig<T>,
    rng: &mut NoiseStream,
) -> Result<TrialOutcome> {
    dynamics.check_point(x0)?;
    dynamics.check_point(y0)?;
    let mut scratch = dynamics.new_scratch();
    run_trial_with(dynamics, x0.coords(), y0.coords(), config, &mut scratch, rng)
}

pub(crate) fn run_trial_with<T: Real, D: CoupledDynamics<T>>(
    dynamics: &D,
    x0: &[T],
    y0: &[T],
    config: &CouplingConfig<T>,
    scratch: &mut D::Scratch,
    rng: &mut NoiseStream,
) -> Result<TrialOutcome> {
    if x0 == y0 {
        return Ok(TrialOutcome::Coupled(0));
    }
    let mut pair = CoupledPair {
        x: x0.to_vec(),
        y: y0.to_vec(),
        coupled: false,
        steps_elapsed: 0,
    };
    while pair.steps_elapsed < config.max_steps {
        let step = pair.steps_elapsed;
        if dynamics.distance(&pair.x, &pair.y) > config.threshold_d {
            dynamics
                .far_step(&mut pair, config.far_strategy, config.mixture_beta, scratch, rng)
                .map_err(|e| e.at_step(step))?;
        } else {
            dynamics
                .maximal_attempt(&mut pair, config.rule, scratch, rng)
                .map_err(|e| e.at_step(step))?;
            if pair.coupled {
                return Ok(TrialOutcome::Coupled(pair.steps_elapsed));
            }
        }
    }
    Ok(TrialOutcome::Censored(pair.steps_elapsed))
}
