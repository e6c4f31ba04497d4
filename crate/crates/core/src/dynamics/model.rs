use std::fmt;
use std::sync::Arc;

use crate::dynamics::state::{Geometry, StatePoint};
use crate::error::{Error, Result};
use crate::linalg;
use crate::real::Real;
use crate::rng::{NoiseDraw, NoiseStream};

/// Deterministic part of a one-step kernel: the map `f` for discrete maps,
/// the vector field `g` for SDEs. Writes into the output slice.
pub type VectorField<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;

/// State-dependent diffusion `σ(x)`, written row-major as a `dim × noise_dim` matrix.
pub type MatrixField<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;

/// Derivative `σ'(x)` of a scalar diffusion, used by the 1D Milstein scheme.
pub type ScalarField<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    DiscreteMap,
    EulerMaruyama,
    Milstein1D,
}

#[derive(Clone)]
pub enum Diffusion<T> {
    /// `σ = s·Id`. For discrete maps `s` is the noise magnitude ε.
    Isotropic(T),
    /// Constant `dim × noise_dim` matrix.
    Constant(ConstantDiffusion<T>),
    StateDependent(StateDiffusion<T>),
}

#[derive(Clone, Debug)]
pub struct ConstantDiffusion<T> {
    rows: usize,
    cols: usize,
    matrix: Vec<T>,
    inverse: Option<Vec<T>>,
    log_abs_det: Option<T>,
}

impl<T: Real> ConstantDiffusion<T> {
    pub fn new(rows: usize, cols: usize, matrix: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 || matrix.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "diffusion matrix must have {rows}×{cols} entries, got {}",
                matrix.len()
            )));
        }
        let (inverse, log_abs_det) = if rows == cols {
            let mut inv = vec![T::zero(); rows * rows];
            match linalg::invert(&matrix, rows, &mut inv) {
                Some(ld) => (Some(inv), Some(ld)),
                None => (None, None),
            }
        } else {
            (None, None)
        };
        Ok(Self {
            rows,
            cols,
            matrix,
            inverse,
            log_abs_det,
        })
    }

    pub fn matrix(&self) -> &[T] {
        &self.matrix
    }

    /// `σ⁻¹` when the matrix is square and invertible.
    pub fn inverse(&self) -> Option<&[T]> {
        self.inverse.as_deref()
    }
}

#[derive(Clone)]
pub struct StateDiffusion<T> {
    pub(crate) noise_dim: usize,
    pub(crate) sigma: MatrixField<T>,
    pub(crate) derivative: Option<ScalarField<T>>,
}

impl<T> StateDiffusion<T> {
    pub fn new(noise_dim: usize, sigma: MatrixField<T>) -> Self {
        Self {
            noise_dim,
            sigma,
            derivative: None,
        }
    }

    /// Attaches the analytic `σ'` required by the Milstein scheme.
    pub fn with_derivative(mut self, derivative: ScalarField<T>) -> Self {
        self.derivative = Some(derivative);
        self
    }
}

/// One-step Markov kernel of a randomly perturbed map or a discretized SDE.
///
/// Immutable after construction and shareable across trial workers.
#[derive(Clone)]
pub struct StepModel<T> {
    name: String,
    dim: usize,
    noise_dim: usize,
    geometry: Geometry,
    scheme: Scheme,
    step_size: T,
    sqrt_h: T,
    drift: VectorField<T>,
    diffusion: Diffusion<T>,
}

impl<T: fmt::Debug> fmt::Debug for StepModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StepModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("geometry", &self.geometry)
            .field("scheme", &self.scheme)
            .field("step_size", &self.step_size)
            .finish_non_exhaustive()
    }
}

impl<T: Real> StepModel<T> {
    /// `X_{n+1} = f(X_n) + ε ζ_n`, wrapped on the torus.
    pub fn discrete_map(
        name: impl Into<String>,
        dim: usize,
        geometry: Geometry,
        map: VectorField<T>,
        epsilon: T,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if !(epsilon >= T::zero()) || !epsilon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "noise magnitude must be finite and non-negative, got {epsilon}"
            )));
        }
        Ok(Self {
            name: name.into(),
            dim,
            noise_dim: dim,
            geometry,
            scheme: Scheme::DiscreteMap,
            step_size: T::one(),
            sqrt_h: T::one(),
            drift: map,
            diffusion: Diffusion::Isotropic(epsilon),
        })
    }

    /// Euler-Maruyama or 1D Milstein discretization of `dX = g(X)dt + σ(X)dW`.
    pub fn sde(
        name: impl Into<String>,
        dim: usize,
        drift: VectorField<T>,
        diffusion: Diffusion<T>,
        step_size: T,
        scheme: Scheme,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if !(step_size > T::zero()) || !step_size.is_finite() {
            return Err(Error::InvalidInput(format!(
                "step size must be positive, got {step_size}"
            )));
        }
        let noise_dim = match &diffusion {
            Diffusion::Isotropic(s) => {
                if !(*s >= T::zero()) {
                    return Err(Error::InvalidInput(format!("negative noise scale {s}")));
                }
                dim
            }
            Diffusion::Constant(c) => {
                if c.rows != dim {
                    return Err(Error::InvalidInput(format!(
                        "diffusion has {} rows, state has dimension {dim}",
                        c.rows
                    )));
                }
                c.cols
            }
            Diffusion::StateDependent(s) => s.noise_dim,
        };
        match scheme {
            Scheme::DiscreteMap => {
                return Err(Error::InvalidInput(
                    "use StepModel::discrete_map for discrete maps".into(),
                ))
            }
            Scheme::Milstein1D => {
                if dim != 1 || noise_dim != 1 {
                    return Err(Error::InvalidInput(
                        "the Milstein scheme is only available in one dimension".into(),
                    ));
                }
                if let Diffusion::StateDependent(s) = &diffusion {
                    if s.derivative.is_none() {
                        return Err(Error::InvalidInput(
                            "Milstein requires an analytic diffusion derivative".into(),
                        ));
                    }
                }
            }
            Scheme::EulerMaruyama => {}
        }
        Ok(Self {
            name: name.into(),
            dim,
            noise_dim,
            geometry: Geometry::Euclidean,
            scheme,
            step_size,
            sqrt_h: step_size.sqrt(),
            drift,
            diffusion,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of independent normals consumed per step.
    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Model time per step; 1 for discrete maps.
    pub fn step_size(&self) -> T {
        self.step_size
    }

    pub fn diffusion(&self) -> &Diffusion<T> {
        &self.diffusion
    }

    /// Evaluates the deterministic part `f(x)` (maps) or `g(x)` (SDEs).
    pub fn eval_drift(&self, x: &[T], out: &mut [T]) {
        (self.drift)(x, out)
    }

    /// `σ⁻¹` for constant invertible diffusions, as needed by reflection coupling.
    /// Isotropic diffusions report `None` here; their inverse is a scalar.
    pub fn diffusion_inverse(&self) -> Option<&[T]> {
        match &self.diffusion {
            Diffusion::Constant(c) => c.inverse(),
            _ => None,
        }
    }

    pub fn distance(&self, x: &[T], y: &[T]) -> T {
        self.geometry.distance(x, y)
    }

    pub fn new_frame(&self) -> Frame<T> {
        Frame::new(self.dim, self.noise_dim)
    }

    /// Computes the conditional mean and noise factor of the next state given `x`.
    pub(crate) fn frame_into(&self, x: &[T], frame: &mut Frame<T>) -> Result<()> {
        (self.drift)(x, &mut frame.mean);
        match self.scheme {
            Scheme::DiscreteMap => {}
            Scheme::EulerMaruyama | Scheme::Milstein1D => {
                let h = self.step_size;
                for (m, &xi) in frame.mean.iter_mut().zip(x) {
                    *m = xi + *m * h;
                }
            }
        }
        if frame.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDomain {
                what: "drift",
                state: to_f64(x),
            });
        }
        for m in frame.mean.iter_mut() {
            *m = self.geometry.wrap(*m);
        }
        frame.milstein = T::zero();
        frame.inverse_valid = false;
        match &self.diffusion {
            Diffusion::Isotropic(s) => {
                frame.scale = FrameScale::Isotropic(*s * self.sqrt_h);
            }
            Diffusion::Constant(_) => {
                frame.scale = FrameScale::ConstantMatrix;
            }
            Diffusion::StateDependent(sd) => {
                (sd.sigma)(x, &mut frame.sigma);
                if frame.sigma.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NumericalDomain {
                        what: "diffusion",
                        state: to_f64(x),
                    });
                }
                for s in frame.sigma.iter_mut() {
                    *s = *s * self.sqrt_h;
                }
                if self.scheme == Scheme::Milstein1D {
                    let deriv = sd.derivative.as_ref().map(|d| d(x)).unwrap_or_else(T::zero);
                    // sigma already carries √h: ½σσ'h = ½(σ√h)σ'√h
                    frame.milstein = T::lit(0.5) * frame.sigma[0] * deriv * self.sqrt_h;
                    if !frame.milstein.is_finite() {
                        return Err(Error::NumericalDomain {
                            what: "diffusion derivative",
                            state: to_f64(x),
                        });
                    }
                }
                frame.scale = FrameScale::StateMatrix;
            }
        }
        Ok(())
    }

    /// Draws the next state from a prepared frame.
    #[inline]
    pub(crate) fn sample_frame(&self, frame: &Frame<T>, noise: &[T], out: &mut [T]) {
        match frame.scale {
            FrameScale::Isotropic(s) => {
                for ((o, &m), &n) in out.iter_mut().zip(&frame.mean).zip(noise) {
                    *o = m + s * n;
                }
            }
            FrameScale::ConstantMatrix => {
                let Diffusion::Constant(c) = &self.diffusion else {
                    unreachable!("frame scale mismatch")
                };
                linalg::mat_vec(&c.matrix, c.rows, c.cols, noise, out);
                for (o, &m) in out.iter_mut().zip(&frame.mean) {
                    *o = m + *o * self.sqrt_h;
                }
            }
            FrameScale::StateMatrix => {
                linalg::mat_vec(&frame.sigma, self.dim, self.noise_dim, noise, out);
                for (o, &m) in out.iter_mut().zip(&frame.mean) {
                    *o = m + *o;
                }
                if self.scheme == Scheme::Milstein1D {
                    out[0] = out[0] + frame.milstein * (noise[0] * noise[0] - T::one());
                }
            }
        }
        if self.geometry == Geometry::Torus {
            for o in out.iter_mut() {
                *o = crate::dynamics::state::wrap_unit(*o);
            }
        }
    }

    /// One step of the kernel into a caller-owned buffer.
    pub fn step_into(&self, x: &[T], noise: &[T], out: &mut [T], frame: &mut Frame<T>) -> Result<()> {
        self.frame_into(x, frame)?;
        self.sample_frame(frame, noise, out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDomain {
                what: "step",
                state: to_f64(x),
            });
        }
        Ok(())
    }

    /// Applies one step of the kernel with the given noise draw.
    pub fn step(&self, x: &StatePoint<T>, noise: &NoiseDraw<T>) -> Result<StatePoint<T>> {
        self.check_state(x)?;
        if noise.values.len() != self.noise_dim {
            return Err(Error::InvalidInput(format!(
                "noise has length {}, model expects {}",
                noise.values.len(),
                self.noise_dim
            )));
        }
        let mut out = vec![T::zero(); self.dim];
        let mut frame = self.new_frame();
        self.step_into(x.coords(), &noise.values, &mut out, &mut frame)?;
        Ok(StatePoint::from_raw(out, self.geometry))
    }

    /// Runs `n_steps` steps with consecutive draws from `stream`, keeping only the final state.
    pub fn simulate_trajectory(
        &self,
        x0: &StatePoint<T>,
        n_steps: u64,
        stream: &mut NoiseStream,
    ) -> Result<StatePoint<T>> {
        self.check_state(x0)?;
        let mut x = x0.coords().to_vec();
        let mut scratch = TrajectoryScratch::new(self);
        for i in 0..n_steps {
            scratch
                .advance(self, &mut x, stream)
                .map_err(|e| e.at_step(i))?;
        }
        Ok(StatePoint::from_raw(x, self.geometry))
    }

    pub fn check_state(&self, x: &StatePoint<T>) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::InvalidInput(format!(
                "state has dimension {}, model `{}` expects {}",
                x.dim(),
                self.name,
                self.dim
            )));
        }
        if x.geometry() != self.geometry {
            return Err(Error::InvalidInput(format!(
                "state geometry {:?} does not match model geometry {:?}",
                x.geometry(),
                self.geometry
            )));
        }
        Ok(())
    }

    /// Whether one-step transition densities exist and can be evaluated.
    pub fn supports_density(&self) -> Result<()> {
        if self.noise_dim != self.dim {
            return Err(Error::Capability(format!(
                "model `{}` has rank-deficient noise ({} sources for {} coordinates); \
                 one-step densities do not exist, use the two-step construction in `degenerate`",
                self.name, self.noise_dim, self.dim
            )));
        }
        if self.scheme == Scheme::Milstein1D {
            if let Diffusion::StateDependent(_) = self.diffusion {
                return Err(Error::Capability(
                    "Milstein steps with state-dependent diffusion are not Gaussian; \
                     no closed-form one-step density"
                        .into(),
                ));
            }
        }
        match &self.diffusion {
            Diffusion::Isotropic(s) if *s <= T::zero() => Err(Error::Capability(
                "zero noise: the one-step kernel has no density".into(),
            )),
            Diffusion::Constant(c) if c.inverse.is_none() => Err(Error::Capability(
                "singular constant diffusion: the one-step kernel has no density".into(),
            )),
            Diffusion::Constant(_) | Diffusion::StateDependent(_)
                if self.geometry == Geometry::Torus =>
            {
                Err(Error::Capability(
                    "wrapped densities are only implemented for isotropic noise".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    /// Log density of the next state at `y` under a prepared frame.
    pub(crate) fn log_density_frame(&self, frame: &mut Frame<T>, y: &[T]) -> Result<T> {
        let half = T::lit(0.5);
        let ln_2pi = (T::lit(2.0) * T::PI()).ln();
        match frame.scale {
            FrameScale::Isotropic(s) => {
                let mut acc = T::zero();
                match self.geometry {
                    Geometry::Euclidean => {
                        for (&yi, &m) in y.iter().zip(&frame.mean) {
                            let z = (yi - m) / s;
                            acc = acc - half * z * z;
                        }
                    }
                    Geometry::Torus => {
                        for (&yi, &m) in y.iter().zip(&frame.mean) {
                            acc = acc + wrapped_log_kernel(Geometry::Torus.displacement(yi, m), s);
                        }
                    }
                }
                let k = T::from_usize_lossy(self.dim);
                Ok(acc - k * (s.ln() + half * ln_2pi))
            }
            FrameScale::ConstantMatrix | FrameScale::StateMatrix => {
                let (inv, log_det): (&[T], T) = match (&self.diffusion, frame.scale) {
                    (Diffusion::Constant(c), FrameScale::ConstantMatrix) => {
                        let inv = c.inverse.as_deref().ok_or_else(|| {
                            Error::Capability("singular diffusion matrix".into())
                        })?;
                        let ld = c.log_abs_det.unwrap_or_else(T::zero)
                            + T::from_usize_lossy(self.dim) * self.sqrt_h.ln();
                        // scale the inverse by 1/√h below
                        frame.diff.copy_from_slice(y);
                        for (d, &m) in frame.diff.iter_mut().zip(&frame.mean) {
                            *d = (*d - m) / self.sqrt_h;
                        }
                        (inv, ld)
                    }
                    _ => {
                        if !frame.inverse_valid {
                            let ld = linalg::invert(&frame.sigma, self.dim, &mut frame.inverse)
                                .ok_or_else(|| Error::Capability("singular σ(x)".into()))?;
                            frame.log_det = ld;
                            frame.inverse_valid = true;
                        }
                        frame.diff.copy_from_slice(y);
                        for (d, &m) in frame.diff.iter_mut().zip(&frame.mean) {
                            *d = *d - m;
                        }
                        (&frame.inverse, frame.log_det)
                    }
                };
                linalg::mat_vec(inv, self.dim, self.dim, &frame.diff, &mut frame.whitened);
                let q = linalg::dot(&frame.whitened, &frame.whitened);
                let k = T::from_usize_lossy(self.dim);
                Ok(-half * q - half * k * ln_2pi - log_det)
            }
        }
    }

    /// Natural log of the exact one-step transition density from `x` to `y`.
    pub fn log_transition_density(&self, x: &StatePoint<T>, y: &StatePoint<T>) -> Result<T> {
        self.check_state(x)?;
        self.check_state(y)?;
        self.supports_density()?;
        let mut frame = self.new_frame();
        self.frame_into(x.coords(), &mut frame)?;
        self.log_density_frame(&mut frame, y.coords())
    }

    /// Exact one-step transition density of `X_{n+1}` at `y` given `X_n = x`.
    pub fn transition_density(&self, x: &StatePoint<T>, y: &StatePoint<T>) -> Result<T> {
        Ok(self.log_transition_density(x, y)?.exp())
    }
}

/// Number of wrap shifts per side for a wrapped normal of scale `s`.
pub fn wrap_terms<T: Real>(s: T) -> usize {
    (T::lit(8.0) * s).ceil().to_usize().unwrap_or(0) + 3
}

/// `ln Σ_j exp(-(Δ+j)²/(2s²))` over `j ∈ [-K, K]`, without normalization.
#[inline]
fn wrapped_log_kernel<T: Real>(delta: T, s: T) -> T {
    let two_s2 = T::lit(2.0) * s * s;
    let base = delta * delta / two_s2;
    let k = wrap_terms(s) as i64;
    let mut sum = T::one();
    for j in 1..=k {
        let jf = T::lit(j as f64);
        let a = delta + jf;
        let b = delta - jf;
        sum = sum + (base - a * a / two_s2).exp() + (base - b * b / two_s2).exp();
    }
    sum.ln() - base
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum FrameScale<T> {
    Isotropic(T),
    ConstantMatrix,
    StateMatrix,
}

/// Scratch holding the Gaussian structure of one step from a given state.
#[derive(Debug, Clone)]
pub struct Frame<T> {
    pub(crate) mean: Vec<T>,
    pub(crate) scale: FrameScale<T>,
    sigma: Vec<T>,
    inverse: Vec<T>,
    inverse_valid: bool,
    log_det: T,
    milstein: T,
    diff: Vec<T>,
    whitened: Vec<T>,
}

impl<T: Real> Frame<T> {
    fn new(dim: usize, noise_dim: usize) -> Self {
        Self {
            mean: vec![T::zero(); dim],
            scale: FrameScale::Isotropic(T::zero()),
            sigma: vec![T::zero(); dim * noise_dim],
            inverse: vec![T::zero(); dim * dim],
            inverse_valid: false,
            log_det: T::zero(),
            milstein: T::zero(),
            diff: vec![T::zero(); dim],
            whitened: vec![T::zero(); dim],
        }
    }
}

/// Per-trajectory buffers so that advancing a chain does not allocate.
#[derive(Debug, Clone)]
pub struct TrajectoryScratch<T> {
    noise: Vec<T>,
    next: Vec<T>,
    frame: Frame<T>,
}

impl<T: Real> TrajectoryScratch<T> {
    pub fn new(model: &StepModel<T>) -> Self {
        Self {
            noise: vec![T::zero(); model.noise_dim],
            next: vec![T::zero(); model.dim],
            frame: model.new_frame(),
        }
    }

    /// Advances `x` by one step with a fresh draw from `stream`.
    #[inline]
    pub fn advance(&mut self, model: &StepModel<T>, x: &mut [T], stream: &mut NoiseStream) -> Result<()> {
        stream.fill_normals(&mut self.noise);
        model.step_into(x, &self.noise, &mut self.next, &mut self.frame)?;
        x.copy_from_slice(&self.next);
        Ok(())
    }
}

pub(crate) fn to_f64<T: Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.to_f64_lossy()).collect()
}
