use crate::error::{Error, Result};
use crate::estimation::survival::SurvivalCurve;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TailKind {
    /// Coupling-time tail: a lower bound on the contraction rate.
    CouplingLower,
    /// First-exit-time tail: an upper bound on the contraction rate.
    ExitUpper,
}

/// Fit window selection for exponential tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPolicy {
    /// The window starts at the first grid point whose survival is at most this.
    pub head_survival: f64,
    /// The window ends at the last grid point with at least this many survivors.
    pub min_survivors: u64,
    pub min_points: usize,
}

impl Default for FitPolicy {
    fn default() -> Self {
        Self {
            head_survival: 0.5,
            min_survivors: 100,
            min_points: 10,
        }
    }
}

impl FitPolicy {
    pub fn with_min_survivors(mut self, min_survivors: u64) -> Self {
        self.min_survivors = min_survivors;
        self
    }
}

/// Fitted exponential tail `P[τ > t] ≈ exp(intercept − slope_r · t)`, `t` in steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate<T> {
    pub slope_r: T,
    pub intercept: T,
    pub t_lo: usize,
    pub t_hi: usize,
    pub r_squared: T,
    pub std_err: T,
    pub kind: TailKind,
}

impl<T: Real> RateEstimate<T> {
    /// Rescales slope and standard error from per-step to per unit of model time.
    pub fn per_unit_time(&self, h: T) -> Self {
        Self {
            slope_r: self.slope_r / h,
            std_err: self.std_err / h,
            ..*self
        }
    }

    pub fn with_kind(mut self, kind: TailKind) -> Self {
        self.kind = kind;
        self
    }
}

/// Ordinary least squares line `y = intercept + slope · x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
    pub slope_se: T,
    pub intercept_se: T,
    pub residuals: Vec<T>,
    /// Residual standard deviation with `n − 2` degrees of freedom.
    pub sigma: T,
}

pub fn fit_line<T: Real>(xs: &[T], ys: &[T]) -> Result<LineFit<T>> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::InvalidInput("x and y lengths differ".into()));
    }
    if n < 2 {
        return Err(Error::InvalidInput("a line needs at least two points".into()));
    }
    let nf = T::from_usize_lossy(n);
    let mx = xs.iter().fold(T::zero(), |a, &v| a + v) / nf;
    let my = ys.iter().fold(T::zero(), |a, &v| a + v) / nf;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
    }
    if !(sxx > T::zero()) {
        return Err(Error::InvalidInput("x values are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<T> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| y - (intercept + slope * x))
        .collect();
    let sse = residuals.iter().fold(T::zero(), |a, &r| a + r * r);
    let r_squared = if syy > T::zero() {
        T::one() - sse / syy
    } else {
        T::one()
    };
    let (sigma, slope_se, intercept_se) = if n > 2 {
        let s2 = sse / T::from_usize_lossy(n - 2);
        (
            s2.sqrt(),
            (s2 / sxx).sqrt(),
            (s2 * (T::one() / nf + mx * mx / sxx)).sqrt(),
        )
    } else {
        (T::zero(), T::zero(), T::zero())
    };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
        slope_se,
        intercept_se,
        residuals,
        sigma,
    })
}

/// Fits the exponential tail of a survival curve.
pub fn fit_exponential_tail<T: Real>(curve: &SurvivalCurve, policy: &FitPolicy) -> Result<RateEstimate<T>> {
    if curve.total() == 0 {
        return Err(Error::FitWindow("empty curve".into()));
    }
    if curve.survivors()[0] == 0 {
        return Err(Error::FitWindow(
            "degenerate curve: every trial coupled at t = 0".into(),
        ));
    }
    fit_survival_function(&curve.fractions::<T>(), T::lit(curve.total() as f64), policy)
}

/// Fits `ln S(t)` against `t` for a survival function sampled on `t = 0, 1, ...`.
///
/// `total` converts fractions back to survivor counts for the window's tail cutoff.
pub fn fit_survival_function<T: Real>(survival: &[T], total: T, policy: &FitPolicy) -> Result<RateEstimate<T>> {
    let min_surv = T::lit(policy.min_survivors.max(1) as f64);
    let head = T::lit(policy.head_survival);
    let t_lo = survival.iter().position(|&s| s <= head).ok_or_else(|| {
        Error::FitWindow(format!(
            "no decay: survival never drops to {} over {} grid points",
            policy.head_survival,
            survival.len()
        ))
    })?;
    // S is non-increasing, so counts ≥ min_survivors form a prefix
    let t_hi = match survival.iter().rposition(|&s| s * total >= min_surv) {
        Some(t) => t,
        None => {
            return Err(Error::FitWindow(format!(
                "fewer than {} survivors at every grid point",
                policy.min_survivors
            )))
        }
    };
    if t_hi < t_lo || t_hi - t_lo + 1 < policy.min_points {
        return Err(Error::FitWindow(format!(
            "window [{t_lo}, {t_hi}] has fewer than {} points with at least {} survivors beyond the median",
            policy.min_points, policy.min_survivors
        )));
    }
    let xs: Vec<T> = (t_lo..=t_hi).map(T::from_usize_lossy).collect();
    let ys: Vec<T> = survival[t_lo..=t_hi].iter().map(|s| s.ln()).collect();
    let line = fit_line(&xs, &ys)?;
    let slope_r = -line.slope;
    if !(slope_r > T::zero()) {
        return Err(Error::FitWindow(format!(
            "no decay: fitted slope {} is not negative",
            line.slope
        )));
    }
    Ok(RateEstimate {
        slope_r,
        intercept: line.intercept,
        t_lo,
        t_hi,
        r_squared: line.r_squared,
        std_err: line.slope_se,
        kind: TailKind::CouplingLower,
    })
}

/// Zero-step-size extrapolation of tail slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation<T> {
    pub intercept: T,
    pub std_err: T,
    pub slope: T,
    /// Indices of points whose residual exceeds three residual standard deviations.
    pub outliers: Vec<usize>,
}

/// Least-squares line through `(h, slope_r)` pairs, evaluated at `h = 0`.
pub fn extrapolate_slope_in_h<T: Real>(points: &[(T, T)]) -> Result<Extrapolation<T>> {
    let mut hs: Vec<T> = points.iter().map(|p| p.0).collect();
    hs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    hs.dedup();
    if hs.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "extrapolation needs at least 3 distinct step sizes, got {}",
            hs.len()
        )));
    }
    let xs: Vec<T> = points.iter().map(|p| p.0).collect();
    let ys: Vec<T> = points.iter().map(|p| p.1).collect();
    let line = fit_line(&xs, &ys)?;
    let cut = T::lit(3.0) * line.sigma;
    let outliers = line
        .residuals
        .iter()
        .enumerate()
        .filter(|(_, r)| r.abs() > cut && cut > T::zero())
        .map(|(i, _)| i)
        .collect();
    Ok(Extrapolation {
        intercept: line.intercept,
        std_err: line.intercept_se,
        slope: line.slope,
        outliers,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit<T> {
    /// Coefficients in ascending powers.
    pub coeffs: Vec<T>,
    /// Euclidean norm of the residual vector.
    pub residual_norm: T,
    pub r_squared: T,
}

impl<T: Real> PolyFit<T> {
    pub fn eval(&self, x: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
    }
}

/// Least-squares polynomial of the given degree, via modified Gram-Schmidt QR.
pub fn polyfit<T: Real>(xs: &[T], ys: &[T], degree: usize) -> Result<PolyFit<T>> {
    let n = xs.len();
    let p = degree + 1;
    if n != ys.len() {
        return Err(Error::InvalidInput("x and y lengths differ".into()));
    }
    if n < p {
        return Err(Error::InvalidInput(format!(
            "degree {degree} needs at least {p} points, got {n}"
        )));
    }
    // columns of the Vandermonde matrix
    let mut q: Vec<Vec<T>> = (0..p)
        .map(|j| xs.iter().map(|&x| x.powi(j as i32)).collect())
        .collect();
    let mut r = vec![T::zero(); p * p];
    for j in 0..p {
        for i in 0..j {
            let proj = q[i].iter().zip(&q[j]).fold(T::zero(), |a, (&u, &v)| a + u * v);
            r[i * p + j] = proj;
            let qi = q[i].clone();
            for (v, u) in q[j].iter_mut().zip(qi) {
                *v = *v - proj * u;
            }
        }
        let nrm = q[j].iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
        if !(nrm > T::epsilon()) {
            return Err(Error::InvalidInput("polynomial design matrix is rank deficient".into()));
        }
        r[j * p + j] = nrm;
        for v in q[j].iter_mut() {
            *v = *v / nrm;
        }
    }
    let qty: Vec<T> = q
        .iter()
        .map(|col| col.iter().zip(ys).fold(T::zero(), |a, (&u, &y)| a + u * y))
        .collect();
    let mut coeffs = vec![T::zero(); p];
    for i in (0..p).rev() {
        let mut acc = qty[i];
        for j in i + 1..p {
            acc = acc - r[i * p + j] * coeffs[j];
        }
        coeffs[i] = acc / r[i * p + i];
    }
    let fit = PolyFit {
        coeffs,
        residual_norm: T::zero(),
        r_squared: T::zero(),
    };
    let nf = T::from_usize_lossy(n);
    let my = ys.iter().fold(T::zero(), |a, &v| a + v) / nf;
    let (mut sse, mut sst) = (T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let e = y - fit.eval(x);
        sse = sse + e * e;
        sst = sst + (y - my) * (y - my);
    }
    Ok(PolyFit {
        residual_norm: sse.sqrt(),
        r_squared: if sst > T::zero() { T::one() - sse / sst } else { T::one() },
        ..fit
    })
}
