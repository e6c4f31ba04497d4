//! Two-step maximal coupling for the SIR model with a single shared noise source.
//!
//! One Euler-Maruyama step moves `(S, I)` along the direction `(S, I)` only,
//! so the one-step law has no density on the plane. After two steps the map
//! `(N1, N2) ↦ (R_S, R_I)` from the two normals to the noise part of the
//! state is a small quadratic perturbation of an invertible linear map, and
//! the two-step density follows from the change-of-variables formula.

use std::sync::Arc;

use crate::coupling::{AcceptanceRule, AttemptOutcome, CoupledDynamics, CoupledPair, FarStrategy, PairScratch};
use crate::dynamics::{Diffusion, Scheme, StateDiffusion, StatePoint, StepModel};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::NoiseStream;

pub const MAX_NEWTON_ITERATIONS: usize = 20;
pub const NEWTON_TOLERANCE: f64 = 1e-10;
pub const SINGULAR_DET: f64 = 1e-12;

/// Rates of the SIR model with population growth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirParams<T> {
    /// Birth rate.
    pub alpha: T,
    /// Contact rate.
    pub beta: T,
    /// Disease-free death rate.
    pub mu: T,
    /// Excess death rate of the infected.
    pub rho: T,
    /// Recovery rate.
    pub gamma: T,
    /// Noise intensity.
    pub sigma: T,
}

impl<T: Real> SirParams<T> {
    /// α=7, β=3, μ=1, ρ=1, γ=2, σ=1.
    pub fn reference() -> Self {
        Self {
            alpha: T::lit(7.0),
            beta: T::lit(3.0),
            mu: T::lit(1.0),
            rho: T::lit(1.0),
            gamma: T::lit(2.0),
            sigma: T::lit(1.0),
        }
    }

    /// Ergodicity threshold `αβ/μ − (μ + ρ + γ − σ²/2)`; positive values admit
    /// a non-degenerate invariant measure.
    pub fn lambda(&self) -> T {
        self.alpha * self.beta / self.mu - (self.mu + self.rho + self.gamma - self.sigma * self.sigma / T::lit(2.0))
    }

    /// The same threshold with the removal rate read as `μ + 2γ`.
    pub fn lambda_alternative(&self) -> T {
        self.alpha * self.beta / self.mu
            - (self.mu + self.gamma + self.gamma - self.sigma * self.sigma / T::lit(2.0))
    }

    fn removal(&self) -> T {
        self.mu + self.rho + self.gamma
    }

    fn validate(&self) -> Result<()> {
        let named = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("mu", self.mu),
            ("rho", self.rho),
            ("gamma", self.gamma),
            ("sigma", self.sigma),
        ];
        for (name, v) in named {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::Construction(format!("SIR parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    #[inline]
    fn drift(&self, s: T, i: T) -> (T, T) {
        (
            self.alpha - self.beta * s * i - self.mu * s,
            self.beta * s * i - self.removal() * i,
        )
    }
}

/// Two-step transform around a base state `(S_n, I_n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStepContext<T> {
    pub params: SirParams<T>,
    pub h: T,
    pub s0: T,
    pub i0: T,
    /// Drift-only intermediate state after the first step.
    pub s1: T,
    pub i1: T,
    lin: [T; 4],
    quad_sq: [T; 2],
    quad_cross: [T; 2],
}

/// Output of [`TwoStepContext::two_step_forward`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStepSample<T> {
    pub r_s: T,
    pub r_i: T,
    pub s2: T,
    pub i2: T,
}

/// Result of a Newton inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveNormals<T> {
    pub n1: T,
    pub n2: T,
    pub iterations: usize,
    pub residual: T,
}

impl<T: Real> TwoStepContext<T> {
    pub fn new(params: SirParams<T>, h: T, s0: T, i0: T) -> Result<Self> {
        params.validate()?;
        if !(h > T::zero() && h <= T::lit(0.01)) {
            return Err(Error::InvalidInput(format!("step size must lie in (0, 0.01], got {h}")));
        }
        if !(s0 > T::zero() && i0 > T::zero()) {
            return Err(Error::InvalidInput(format!("base state ({s0}, {i0}) must be positive")));
        }
        let (ds, di) = params.drift(s0, i0);
        let s1 = s0 + ds * h;
        let i1 = i0 + di * h;
        let sig = params.sigma;
        let b = params.beta;
        let sqh = h.sqrt();
        let h32 = h * sqh;
        let cross = b * sig * h32 * (s0 * i1 + i0 * s1);
        let lin = [
            -cross - params.mu * sig * s0 * h32 + sig * s0 * sqh,
            sig * s1 * sqh,
            cross - params.removal() * sig * i0 * h32 + sig * i0 * sqh,
            sig * i1 * sqh,
        ];
        // the N1² term enters R_I with the sign of the +βSI infection flux
        let q = b * sig * sig * s0 * i0 * h * h;
        Ok(Self {
            params,
            h,
            s0,
            i0,
            s1,
            i1,
            lin,
            quad_sq: [-q, q],
            quad_cross: [sig * sig * s0 * h, sig * sig * i0 * h],
        })
    }

    /// Linear coefficients `[∂R_S/∂N1, ∂R_S/∂N2, ∂R_I/∂N1, ∂R_I/∂N2]` at the origin.
    pub fn linear_part(&self) -> [T; 4] {
        self.lin
    }

    /// Coefficients of `N1²` in `(R_S, R_I)`.
    pub fn quadratic_square(&self) -> [T; 2] {
        self.quad_sq
    }

    /// Coefficients of `N1·N2` in `(R_S, R_I)`.
    pub fn quadratic_cross(&self) -> [T; 2] {
        self.quad_cross
    }

    /// Deterministic part of the two-step update.
    pub fn deterministic_part(&self) -> (T, T) {
        let (ds, di) = self.params.drift(self.s1, self.i1);
        (self.s1 + ds * self.h, self.i1 + di * self.h)
    }

    #[inline]
    pub fn transform(&self, n1: T, n2: T) -> (T, T) {
        let l = &self.lin;
        let sq = n1 * n1;
        let cr = n1 * n2;
        (
            l[0] * n1 + l[1] * n2 + self.quad_sq[0] * sq + self.quad_cross[0] * cr,
            l[2] * n1 + l[3] * n2 + self.quad_sq[1] * sq + self.quad_cross[1] * cr,
        )
    }

    /// Row-major Jacobian `∂(R_S, R_I)/∂(N1, N2)`.
    #[inline]
    pub fn jacobian(&self, n1: T, n2: T) -> [T; 4] {
        let two = T::lit(2.0);
        let l = &self.lin;
        [
            l[0] + two * self.quad_sq[0] * n1 + self.quad_cross[0] * n2,
            l[1] + self.quad_cross[0] * n1,
            l[2] + two * self.quad_sq[1] * n1 + self.quad_cross[1] * n2,
            l[3] + self.quad_cross[1] * n1,
        ]
    }

    pub fn two_step_forward(&self, n1: T, n2: T) -> TwoStepSample<T> {
        let (r_s, r_i) = self.transform(n1, n2);
        let (ds, di) = self.deterministic_part();
        TwoStepSample {
            r_s,
            r_i,
            s2: ds + r_s,
            i2: di + r_i,
        }
    }

    /// `ln(|det J|⁻¹ φ₂(N1, N2))`.
    pub fn log_two_step_density(&self, n1: T, n2: T) -> Result<T> {
        let j = self.jacobian(n1, n2);
        let det = j[0] * j[3] - j[1] * j[2];
        if !(det.abs() >= T::lit(SINGULAR_DET)) {
            return Err(Error::SingularJacobian { det: det.to_f64_lossy() });
        }
        let ln_2pi = (T::lit(2.0) * T::PI()).ln();
        Ok(-T::lit(0.5) * (n1 * n1 + n2 * n2) - ln_2pi - det.abs().ln())
    }

    /// Density of the noise part `(R_S, R_I)` produced by normals `(N1, N2)`.
    pub fn two_step_density(&self, _r_s: T, _r_i: T, n1: T, n2: T) -> Result<T> {
        Ok(self.log_two_step_density(n1, n2)?.exp())
    }

    /// Normals that the inverse of the linear part maps to the target.
    pub fn linear_guess(&self, r_s: T, r_i: T) -> Result<(T, T)> {
        let l = &self.lin;
        let det = l[0] * l[3] - l[1] * l[2];
        if !(det.abs() >= T::lit(SINGULAR_DET)) {
            return Err(Error::SingularJacobian { det: det.to_f64_lossy() });
        }
        Ok(((l[3] * r_s - l[1] * r_i) / det, (l[0] * r_i - l[2] * r_s) / det))
    }

    /// Solves `R(N1, N2) = (r_s, r_i)` by Newton's method.
    pub fn invert_effective_normals(&self, r_s: T, r_i: T, guess: (T, T)) -> Result<EffectiveNormals<T>> {
        if !(r_s.is_finite() && r_i.is_finite()) {
            return Err(Error::InvalidInput("non-finite inversion target".into()));
        }
        let scale = r_s.abs().max(r_i.abs()).max(T::one());
        let tol = T::lit(NEWTON_TOLERANCE).max(T::epsilon() * T::lit(64.0) * scale);
        let (mut n1, mut n2) = guess;
        let residual_at = |n1: T, n2: T| {
            let (a, b) = self.transform(n1, n2);
            ((a - r_s), (b - r_i))
        };
        let (mut f1, mut f2) = residual_at(n1, n2);
        let mut res = f1.abs().max(f2.abs());
        for it in 0..=MAX_NEWTON_ITERATIONS {
            // one extra update past the tolerance polishes N to machine precision
            let converged = res < tol;
            if it == MAX_NEWTON_ITERATIONS {
                break;
            }
            let j = self.jacobian(n1, n2);
            let det = j[0] * j[3] - j[1] * j[2];
            if !(det.abs() >= T::lit(SINGULAR_DET)) {
                return Err(Error::SingularJacobian { det: det.to_f64_lossy() });
            }
            let d1 = (j[3] * f1 - j[1] * f2) / det;
            let d2 = (j[0] * f2 - j[2] * f1) / det;
            n1 = n1 - d1;
            n2 = n2 - d2;
            let (g1, g2) = residual_at(n1, n2);
            let new_res = g1.abs().max(g2.abs());
            let step = d1.abs().max(d2.abs());
            f1 = g1;
            f2 = g2;
            if converged {
                res = res.min(new_res);
                return Ok(EffectiveNormals { n1, n2, iterations: it + 1, residual: res });
            }
            res = new_res;
            if res < tol && step <= T::epsilon() * T::lit(16.0) * (T::one() + n1.abs().max(n2.abs())) {
                return Ok(EffectiveNormals { n1, n2, iterations: it + 1, residual: res });
            }
        }
        if res < tol {
            return Ok(EffectiveNormals {
                n1,
                n2,
                iterations: MAX_NEWTON_ITERATIONS,
                residual: res,
            });
        }
        Err(Error::Inversion {
            iterations: MAX_NEWTON_ITERATIONS,
            residual: res.to_f64_lossy(),
        })
    }

    /// Log density of reaching the absolute two-step state `(s2, i2)` from this base.
    pub fn log_density_at(&self, s2: T, i2: T) -> Result<T> {
        let (ds, di) = self.deterministic_part();
        let (r_s, r_i) = (s2 - ds, i2 - di);
        let guess = self.linear_guess(r_s, r_i)?;
        let n = self.invert_effective_normals(r_s, r_i, guess)?;
        self.log_two_step_density(n.n1, n.n2)
    }
}

/// SIR model driven by one Brownian motion, discretized by Euler-Maruyama.
#[derive(Debug, Clone)]
pub struct SirModel<T> {
    params: SirParams<T>,
    h: T,
    step: StepModel<T>,
}

impl<T: Real> SirModel<T> {
    pub fn new(params: SirParams<T>, h: T) -> Result<Self> {
        params.validate()?;
        if !(h > T::zero() && h <= T::lit(0.01)) {
            return Err(Error::Construction(format!("SIR step size must lie in (0, 0.01], got {h}")));
        }
        if !(params.lambda() > T::zero()) {
            return Err(Error::Construction(format!(
                "λ = {} ≤ 0: the model has no non-degenerate invariant measure",
                params.lambda()
            )));
        }
        let p = params;
        let drift = Arc::new(move |x: &[T], out: &mut [T]| {
            let (ds, di) = p.drift(x[0], x[1]);
            out[0] = ds;
            out[1] = di;
        });
        let sigma = p.sigma;
        let diffusion = StateDiffusion::new(
            1,
            Arc::new(move |x: &[T], out: &mut [T]| {
                out[0] = sigma * x[0];
                out[1] = sigma * x[1];
            }),
        );
        let step = StepModel::sde("sir", 2, drift, Diffusion::StateDependent(diffusion), h, Scheme::EulerMaruyama)?;
        Ok(Self { params, h, step })
    }

    pub fn params(&self) -> &SirParams<T> {
        &self.params
    }

    pub fn step_model(&self) -> &StepModel<T> {
        &self.step
    }

    pub fn context(&self, state: &[T]) -> Result<TwoStepContext<T>> {
        TwoStepContext::new(self.params, self.h, state[0], state[1])
    }
}

/// Keeps `S` and `I` strictly positive by reflecting through zero.
#[inline]
fn positivity_guard<T: Real>(x: &mut [T]) {
    for v in x.iter_mut().take(2) {
        if *v <= T::zero() {
            log::debug!("SIR positivity guard fired at {v}");
            *v = if *v == T::zero() { T::min_positive_value() } else { v.abs() };
        }
    }
}

#[derive(Debug, Clone)]
pub struct SirScratch<T> {
    pair: PairScratch<T>,
    normals: [T; 4],
}

impl<T: Real> CoupledDynamics<T> for SirModel<T> {
    type Scratch = SirScratch<T>;

    fn dim(&self) -> usize {
        2
    }

    fn step_size(&self) -> T {
        self.h
    }

    fn new_scratch(&self) -> SirScratch<T> {
        SirScratch {
            pair: PairScratch::new(&self.step),
            normals: [T::zero(); 4],
        }
    }

    fn check_point(&self, x: &StatePoint<T>) -> Result<()> {
        self.step.check_state(x)?;
        if x.coords().iter().any(|&v| !(v > T::zero())) {
            return Err(Error::InvalidInput("SIR states must be positive".into()));
        }
        Ok(())
    }

    fn distance(&self, x: &[T], y: &[T]) -> T {
        self.step.distance(x, y)
    }

    fn advance(&self, x: &mut [T], s: &mut SirScratch<T>, rng: &mut NoiseStream) -> Result<()> {
        self.step.advance(x, &mut s.pair, rng)?;
        positivity_guard(x);
        Ok(())
    }

    fn far_step(
        &self,
        pair: &mut CoupledPair<T>,
        strategy: FarStrategy,
        beta: T,
        s: &mut SirScratch<T>,
        rng: &mut NoiseStream,
    ) -> Result<()> {
        self.step.far_step(pair, strategy, beta, &mut s.pair, rng)?;
        positivity_guard(&mut pair.x);
        positivity_guard(&mut pair.y);
        Ok(())
    }

    fn maximal_attempt(
        &self,
        pair: &mut CoupledPair<T>,
        rule: AcceptanceRule,
        s: &mut SirScratch<T>,
        rng: &mut NoiseStream,
    ) -> Result<AttemptOutcome<T>> {
        two_step_attempt(self, pair, rule, &mut s.normals, rng)
    }

    fn step_coupled(&self, pair: &mut CoupledPair<T>, s: &mut SirScratch<T>, rng: &mut NoiseStream) -> Result<()> {
        self.advance(&mut pair.x, s, rng)?;
        pair.y.copy_from_slice(&pair.x);
        pair.steps_elapsed += 1;
        Ok(())
    }
}

fn two_step_attempt<T: Real>(
    model: &SirModel<T>,
    pair: &mut CoupledPair<T>,
    rule: AcceptanceRule,
    normals: &mut [T; 4],
    rng: &mut NoiseStream,
) -> Result<AttemptOutcome<T>> {
    let cx = model.context(&pair.x)?;
    let cy = model.context(&pair.y)?;
    rng.fill_normals(&mut normals[..2]);
    rng.fill_normals(&mut normals[2..]);
    let px = cx.two_step_forward(normals[0], normals[1]);
    let py = cy.two_step_forward(normals[2], normals[3]);
    let mut xp = [px.s2, px.i2];
    let mut yp = [py.s2, py.i2];
    positivity_guard(&mut xp);
    positivity_guard(&mut yp);

    let same_kernel = pair.x == pair.y;
    let densities = (|| -> Result<(T, T, T, T)> {
        let lxx = cx.log_two_step_density(normals[0], normals[1])?;
        let lyy = cy.log_two_step_density(normals[2], normals[3])?;
        if same_kernel {
            return Ok((lxx, lxx, lyy, lyy));
        }
        Ok((lxx, cy.log_density_at(xp[0], xp[1])?, cx.log_density_at(yp[0], yp[1])?, lyy))
    })();
    let ratio = match densities {
        Ok((lxx, lyx, lxy, lyy)) => rule.ratio(lxx, lyx, lxy, lyy),
        Err(e) => {
            log::debug!("two-step attempt counted as rejection: {e}");
            T::zero()
        }
    };
    let u: T = rng.uniform();
    let accepted = u < ratio;
    pair.x.copy_from_slice(&xp);
    if accepted {
        pair.y.copy_from_slice(&xp);
        pair.coupled = true;
    } else {
        pair.y.copy_from_slice(&yp);
    }
    pair.steps_elapsed += 2;
    Ok(AttemptOutcome { ratio, accepted })
}

/// One two-step maximal-coupling attempt on a copy of `pair`.
pub fn two_step_maximal_attempt<T: Real>(
    model: &SirModel<T>,
    pair: &CoupledPair<T>,
    rule: AcceptanceRule,
    rng: &mut NoiseStream,
) -> Result<(CoupledPair<T>, AttemptOutcome<T>)> {
    if pair.coupled {
        return Err(Error::InvalidInput("pair is already coupled".into()));
    }
    let mut next = pair.clone();
    let mut normals = [T::zero(); 4];
    let outcome = two_step_attempt(model, &mut next, rule, &mut normals, rng)?;
    Ok((next, outcome))
}
