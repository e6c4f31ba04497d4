use crate::coupling::{AcceptanceRule, AttemptOutcome, CoupledDynamics, CoupledPair, CouplingConfig, FarStrategy};
use crate::dynamics::{Diffusion, Frame, StatePoint, StepModel};
use crate::error::{Error, Result};
use crate::linalg;
use crate::real::Real;
use crate::rng::NoiseStream;

/// Buffers for stepping a pair under a one-step kernel.
#[derive(Debug, Clone)]
pub struct PairScratch<T> {
    noise_x: Vec<T>,
    noise_y: Vec<T>,
    next_x: Vec<T>,
    next_y: Vec<T>,
    frame_x: Frame<T>,
    frame_y: Frame<T>,
    direction: Vec<T>,
}

impl<T: Real> PairScratch<T> {
    pub fn new(model: &StepModel<T>) -> Self {
        Self {
            noise_x: vec![T::zero(); model.noise_dim()],
            noise_y: vec![T::zero(); model.noise_dim()],
            next_x: vec![T::zero(); model.dim()],
            next_y: vec![T::zero(); model.dim()],
            frame_x: model.new_frame(),
            frame_y: model.new_frame(),
            direction: vec![T::zero(); model.dim()],
        }
    }
}

/// Reflects `noise` across the hyperplane orthogonal to the unit vector `e`:
/// `P N = N − 2 (eᵀN) e`.
#[inline]
pub fn reflect<T: Real>(e: &[T], noise: &[T], out: &mut [T]) {
    let two_proj = T::lit(2.0) * linalg::dot(e, noise);
    for ((o, &n), &ei) in out.iter_mut().zip(noise).zip(e) {
        *o = n - two_proj * ei;
    }
}

impl<T: Real> StepModel<T> {
    /// Unit reflection direction `σ⁻¹(x−y)/‖σ⁻¹(x−y)‖` in noise coordinates.
    fn reflection_direction(&self, x: &[T], y: &[T], out: &mut [T]) -> Result<()> {
        let g = self.geometry();
        match self.diffusion() {
            Diffusion::Isotropic(_) => {
                for ((o, &a), &b) in out.iter_mut().zip(x).zip(y) {
                    *o = g.displacement(a, b);
                }
            }
            Diffusion::Constant(c) => {
                let inv = c.inverse().ok_or_else(|| {
                    Error::Capability("reflection coupling needs an invertible diffusion matrix".into())
                })?;
                let disp: Vec<T> = x.iter().zip(y).map(|(&a, &b)| g.displacement(a, b)).collect();
                linalg::mat_vec(inv, self.dim(), self.dim(), &disp, out);
            }
            Diffusion::StateDependent(_) => {
                return Err(Error::Capability(
                    "reflection coupling needs a constant diffusion; \
                     state-dependent σ would require a Kendall-Cranston construction"
                        .into(),
                ))
            }
        }
        let n = linalg::norm(out);
        if !(n > T::zero()) {
            return Err(Error::DegenerateDirection);
        }
        for o in out.iter_mut() {
            *o = *o / n;
        }
        Ok(())
    }
}

impl<T: Real> CoupledDynamics<T> for StepModel<T> {
    type Scratch = PairScratch<T>;

    fn dim(&self) -> usize {
        StepModel::dim(self)
    }

    fn step_size(&self) -> T {
        StepModel::step_size(self)
    }

    fn new_scratch(&self) -> PairScratch<T> {
        PairScratch::new(self)
    }

    fn check_point(&self, x: &StatePoint<T>) -> Result<()> {
        self.check_state(x)
    }

    #[inline]
    fn distance(&self, x: &[T], y: &[T]) -> T {
        self.geometry().distance(x, y)
    }

    #[inline]
    fn advance(&self, x: &mut [T], s: &mut PairScratch<T>, rng: &mut NoiseStream) -> Result<()> {
        rng.fill_normals(&mut s.noise_x);
        self.step_into(x, &s.noise_x, &mut s.next_x, &mut s.frame_x)?;
        x.copy_from_slice(&s.next_x);
        Ok(())
    }

    fn far_step(
        &self,
        pair: &mut CoupledPair<T>,
        strategy: FarStrategy,
        beta: T,
        s: &mut PairScratch<T>,
        rng: &mut NoiseStream,
    ) -> Result<()> {
        let strategy = if rng.bernoulli(beta) {
            FarStrategy::Independent
        } else {
            strategy
        };
        rng.fill_normals(&mut s.noise_x);
        match strategy {
            FarStrategy::Independent => rng.fill_normals(&mut s.noise_y),
            FarStrategy::Synchronous => s.noise_y.copy_from_slice(&s.noise_x),
            FarStrategy::Reflection => {
                self.reflection_direction(&pair.x, &pair.y, &mut s.direction)?;
                reflect(&s.direction, &s.noise_x, &mut s.noise_y);
            }
        }
        self.step_into(&pair.x, &s.noise_x, &mut s.next_x, &mut s.frame_x)?;
        self.step_into(&pair.y, &s.noise_y, &mut s.next_y, &mut s.frame_y)?;
        pair.x.copy_from_slice(&s.next_x);
        pair.y.copy_from_slice(&s.next_y);
        pair.steps_elapsed += 1;
        Ok(())
    }

    fn maximal_attempt(
        &self,
        pair: &mut CoupledPair<T>,
        rule: AcceptanceRule,
        s: &mut PairScratch<T>,
        rng: &mut NoiseStream,
    ) -> Result<AttemptOutcome<T>> {
        self.supports_density()?;
        self.frame_into(&pair.x, &mut s.frame_x)?;
        self.frame_into(&pair.y, &mut s.frame_y)?;
        rng.fill_normals(&mut s.noise_x);
        rng.fill_normals(&mut s.noise_y);
        self.sample_frame(&s.frame_x, &s.noise_x, &mut s.next_x);
        self.sample_frame(&s.frame_y, &s.noise_y, &mut s.next_y);
        let lpx_x = self.log_density_frame(&mut s.frame_x, &s.next_x)?;
        let lpy_x = self.log_density_frame(&mut s.frame_y, &s.next_x)?;
        let lpx_y = self.log_density_frame(&mut s.frame_x, &s.next_y)?;
        let lpy_y = self.log_density_frame(&mut s.frame_y, &s.next_y)?;
        let ratio = rule.ratio(lpx_x, lpy_x, lpx_y, lpy_y);
        let u: T = rng.uniform();
        let accepted = u < ratio;
        pair.x.copy_from_slice(&s.next_x);
        if accepted {
            pair.y.copy_from_slice(&s.next_x);
            pair.coupled = true;
        } else {
            pair.y.copy_from_slice(&s.next_y);
        }
        pair.steps_elapsed += 1;
        Ok(AttemptOutcome { ratio, accepted })
    }
}

/// One far-from-coupling step of `pair` under `config`'s strategy and β-mixture.
pub fn couple_step_far<T: Real>(
    model: &StepModel<T>,
    pair: &CoupledPair<T>,
    config: &CouplingConfig<T>,
    rng: &mut NoiseStream,
) -> Result<CoupledPair<T>> {
    if pair.coupled {
        return Err(Error::InvalidInput("pair is already coupled".into()));
    }
    let mut next = pair.clone();
    let mut scratch = PairScratch::new(model);
    model.far_step(&mut next, config.far_strategy, config.mixture_beta, &mut scratch, rng)?;
    Ok(next)
}

/// One maximal-coupling attempt. Returns the updated pair and the acceptance ratio used.
pub fn maximal_coupling_attempt<T: Real>(
    model: &StepModel<T>,
    pair: &CoupledPair<T>,
    rule: AcceptanceRule,
    rng: &mut NoiseStream,
) -> Result<(CoupledPair<T>, AttemptOutcome<T>)> {
    if pair.coupled {
        return Err(Error::InvalidInput("pair is already coupled".into()));
    }
    let mut next = pair.clone();
    let mut scratch = PairScratch::new(model);
    let outcome = model.maximal_attempt(&mut next, rule, &mut scratch, rng)?;
    Ok((next, outcome))
}
