//! Constructors for the experimental systems and the presets that drive them.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::coupling::{CoupledDynamics, FarStrategy};
use crate::degenerate::{SirModel, SirParams};
use crate::dynamics::{Diffusion, Geometry, Scheme, StepModel, VectorField};
use crate::error::{Error, Result};
use crate::estimation::{ExitSpec, IntervalSet};
use crate::real::Real;
use crate::run::{Algorithm, RunConfig, Sweep};

/// Names accepted by [`ModelSpec::from_params`], in presentation order.
pub const MODEL_NAMES: [&str; 8] = [
    "expanding",
    "neutral",
    "quasiperiodic",
    "logistic",
    "langevin",
    "vanderpol",
    "sir",
    "fhn",
];

/// Period-2 orbit of the logistic map `3.2x(1−x)`.
pub const LOGISTIC_P: f64 = 0.7995;
pub const LOGISTIC_Q: f64 = 0.5130;

/// A fully parameterized model from the zoo. All parameters are stored in
/// `f64` so that a spec round-trips through the config text bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Expanding { a: f64, eps: f64 },
    Neutral { alpha: f64, eps: f64 },
    Quasiperiodic { eps: f64 },
    Logistic { eps: f64 },
    Langevin { eps: f64, h: f64 },
    VanDerPol { mu: f64, eps: f64, h: f64 },
    Sir { params: SirParams<f64>, h: f64 },
    Fhn { n: usize, du: f64, w: f64, mu: f64, sigma: f64, a: f64, h: f64 },
}

/// A constructed zoo model; SIR needs the two-step coupling machinery.
#[derive(Debug, Clone)]
pub enum ZooModel<T> {
    Step(StepModel<T>),
    Sir(SirModel<T>),
}

impl<T: Real> ZooModel<T> {
    pub fn as_step(&self) -> &StepModel<T> {
        match self {
            ZooModel::Step(m) => m,
            ZooModel::Sir(m) => m.step_model(),
        }
    }

    pub fn dim(&self) -> usize {
        self.as_step().dim()
    }

    pub fn step_size(&self) -> T {
        self.as_step().step_size()
    }
}

fn param_table(name: &str) -> Option<&'static [(&'static str, f64, &'static str)]> {
    Some(match name {
        "expanding" => &[("a", 0.1, "0 ≤ a < 1/(2π)"), ("eps", 0.12, "eps ≥ 0")],
        "neutral" => &[("alpha", 0.5, "0 < alpha < 1"), ("eps", 0.12, "eps ≥ 0")],
        "quasiperiodic" | "logistic" => &[("eps", 0.12, "eps ≥ 0")],
        "langevin" => &[("eps", 1.0, "eps ≥ 0"), ("h", 0.001, "0 < h ≤ 0.1")],
        "vanderpol" => &[("mu", 2.0, "mu > 0"), ("eps", 0.3, "eps ≥ 0"), ("h", 0.001, "0 < h ≤ 0.1")],
        "sir" => &[
            ("alpha", 7.0, "alpha > 0"),
            ("beta", 3.0, "beta > 0"),
            ("mu", 1.0, "mu > 0"),
            ("rho", 1.0, "rho > 0"),
            ("gamma", 2.0, "gamma > 0"),
            ("sigma", 1.0, "sigma > 0"),
            ("h", 0.001, "0 < h ≤ 0.01, and λ > 0"),
        ],
        "fhn" => &[
            ("n", 50.0, "integer n ≥ 2"),
            ("du", 0.0, "du ≥ 0"),
            ("w", 0.4, "w ≥ 0"),
            ("mu", 0.05, "mu > 0"),
            ("sigma", 0.6, "sigma ≥ 0"),
            ("a", 1.05, "finite"),
            ("h", 0.001, "0 < h ≤ 0.1"),
        ],
        _ => return None,
    })
}

fn ranges(name: &str) -> String {
    param_table(name)
        .map(|t| t.iter().map(|(_, _, r)| *r).collect::<Vec<_>>().join(", "))
        .unwrap_or_default()
}

impl ModelSpec {
    /// Builds a spec from a name and a partial parameter map; missing
    /// parameters take their defaults.
    pub fn from_params(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let table = param_table(name).ok_or_else(|| {
            Error::Construction(format!("unknown model `{name}`; valid names: {}", MODEL_NAMES.join(", ")))
        })?;
        for key in params.keys() {
            if !table.iter().any(|(k, _, _)| k == key) {
                let valid: Vec<_> = table.iter().map(|(k, _, _)| *k).collect();
                return Err(Error::Construction(format!(
                    "model `{name}` has no parameter `{key}`; valid parameters: {}",
                    valid.join(", ")
                )));
            }
        }
        let get = |key: &str| {
            params
                .get(key)
                .copied()
                .unwrap_or_else(|| table.iter().find(|(k, _, _)| *k == key).map(|e| e.1).unwrap_or(f64::NAN))
        };
        let spec = match name {
            "expanding" => ModelSpec::Expanding { a: get("a"), eps: get("eps") },
            "neutral" => ModelSpec::Neutral { alpha: get("alpha"), eps: get("eps") },
            "quasiperiodic" => ModelSpec::Quasiperiodic { eps: get("eps") },
            "logistic" => ModelSpec::Logistic { eps: get("eps") },
            "langevin" => ModelSpec::Langevin { eps: get("eps"), h: get("h") },
            "vanderpol" => ModelSpec::VanDerPol { mu: get("mu"), eps: get("eps"), h: get("h") },
            "sir" => ModelSpec::Sir {
                params: SirParams {
                    alpha: get("alpha"),
                    beta: get("beta"),
                    mu: get("mu"),
                    rho: get("rho"),
                    gamma: get("gamma"),
                    sigma: get("sigma"),
                },
                h: get("h"),
            },
            _ => {
                let n = get("n");
                if !(n.fract() == 0.0 && (2.0..=1.0e6).contains(&n)) {
                    return Err(Error::Construction(format!(
                        "fhn oscillator count must be an integer ≥ 2, got {n}; valid ranges: {}",
                        ranges("fhn")
                    )));
                }
                ModelSpec::Fhn {
                    n: n as usize,
                    du: get("du"),
                    w: get("w"),
                    mu: get("mu"),
                    sigma: get("sigma"),
                    a: get("a"),
                    h: get("h"),
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Expanding { .. } => "expanding",
            ModelSpec::Neutral { .. } => "neutral",
            ModelSpec::Quasiperiodic { .. } => "quasiperiodic",
            ModelSpec::Logistic { .. } => "logistic",
            ModelSpec::Langevin { .. } => "langevin",
            ModelSpec::VanDerPol { .. } => "vanderpol",
            ModelSpec::Sir { .. } => "sir",
            ModelSpec::Fhn { .. } => "fhn",
        }
    }

    /// Parameters in table order, including the step size of SDE models.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            ModelSpec::Expanding { a, eps } => vec![("a", a), ("eps", eps)],
            ModelSpec::Neutral { alpha, eps } => vec![("alpha", alpha), ("eps", eps)],
            ModelSpec::Quasiperiodic { eps } | ModelSpec::Logistic { eps } => vec![("eps", eps)],
            ModelSpec::Langevin { eps, h } => vec![("eps", eps), ("h", h)],
            ModelSpec::VanDerPol { mu, eps, h } => vec![("mu", mu), ("eps", eps), ("h", h)],
            ModelSpec::Sir { params: p, h } => vec![
                ("alpha", p.alpha),
                ("beta", p.beta),
                ("mu", p.mu),
                ("rho", p.rho),
                ("gamma", p.gamma),
                ("sigma", p.sigma),
                ("h", h),
            ],
            ModelSpec::Fhn { n, du, w, mu, sigma, a, h } => vec![
                ("n", n as f64),
                ("du", du),
                ("w", w),
                ("mu", mu),
                ("sigma", sigma),
                ("a", a),
                ("h", h),
            ],
        }
    }

    /// Returns a copy with one parameter replaced.
    pub fn with_param(&self, key: &str, value: f64) -> Result<Self> {
        let mut map: BTreeMap<String, f64> = self.params().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        if !map.contains_key(key) {
            return Err(Error::Construction(format!("model `{}` has no parameter `{key}`", self.name())));
        }
        map.insert(key.to_string(), value);
        Self::from_params(self.name(), &map)
    }

    pub fn is_sde(&self) -> bool {
        self.step_size().is_some()
    }

    pub fn step_size(&self) -> Option<f64> {
        match *self {
            ModelSpec::Langevin { h, .. }
            | ModelSpec::VanDerPol { h, .. }
            | ModelSpec::Sir { h, .. }
            | ModelSpec::Fhn { h, .. } => Some(h),
            _ => None,
        }
    }

    pub fn geometry(&self) -> Geometry {
        if self.is_sde() {
            Geometry::Euclidean
        } else {
            Geometry::Torus
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            ModelSpec::Langevin { .. } | ModelSpec::VanDerPol { .. } | ModelSpec::Sir { .. } => 2,
            ModelSpec::Fhn { n, .. } => 2 * n,
            _ => 1,
        }
    }

    /// Default maximal-coupling threshold: half the noise magnitude for maps,
    /// `√h` for SDEs and `h^{3/2}` for SIR, whose two-step kernel has that
    /// width across the noise direction.
    pub fn default_threshold(&self) -> f64 {
        match *self {
            ModelSpec::Sir { h, .. } => h.powf(1.5),
            ModelSpec::Expanding { eps, .. }
            | ModelSpec::Neutral { eps, .. }
            | ModelSpec::Quasiperiodic { eps }
            | ModelSpec::Logistic { eps } => eps / 2.0,
            _ => self.step_size().map(f64::sqrt).unwrap_or(f64::NAN),
        }
    }

    pub fn default_strategy(&self) -> FarStrategy {
        match self {
            ModelSpec::Sir { .. } => FarStrategy::Synchronous,
            _ => FarStrategy::Reflection,
        }
    }

    pub fn default_beta(&self) -> f64 {
        match self {
            ModelSpec::Sir { .. } => 0.0,
            _ => crate::coupling::DEFAULT_BETA,
        }
    }

    /// Default starting pair `(x0, y0)`.
    pub fn default_points(&self) -> (Vec<f64>, Vec<f64>) {
        match *self {
            ModelSpec::Logistic { .. } => (vec![LOGISTIC_P], vec![LOGISTIC_Q]),
            ModelSpec::Expanding { .. } | ModelSpec::Neutral { .. } | ModelSpec::Quasiperiodic { .. } => {
                (vec![0.1], vec![0.6])
            }
            ModelSpec::Langevin { .. } => (vec![1.0, 1.0], vec![-1.0, -1.0]),
            ModelSpec::VanDerPol { .. } => (vec![2.0, 0.0], vec![-2.0, 0.0]),
            ModelSpec::Sir { .. } => (vec![1.0, 1.0], vec![2.0, 0.5]),
            ModelSpec::Fhn { n, mu, a, .. } => {
                let u = -a;
                let v = (u - u * u * u / 3.0) / mu.sqrt();
                let x = (0..n).flat_map(|_| [u, v]).collect();
                let y = (0..n).flat_map(|i| [if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0]).collect();
                (x, y)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Construction(format!("{what}; valid ranges: {}", ranges(self.name()))));
        for (k, v) in self.params() {
            if !v.is_finite() {
                return bad(format!("parameter `{k}` of `{}` must be finite, got {v}", self.name()));
            }
        }
        let eps_ok = |eps: f64| eps >= 0.0;
        let h_ok = |h: f64| h > 0.0 && h <= 0.1;
        match *self {
            ModelSpec::Expanding { a, eps } => {
                if !(0.0..1.0 / (2.0 * std::f64::consts::PI)).contains(&a) {
                    return bad(format!("expanding map needs 0 ≤ a < 1/(2π), got a = {a}"));
                }
                if !eps_ok(eps) {
                    return bad(format!("negative noise magnitude {eps}"));
                }
            }
            ModelSpec::Neutral { alpha, eps } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return bad(format!("neutral map needs 0 < alpha < 1, got {alpha}"));
                }
                if !eps_ok(eps) {
                    return bad(format!("negative noise magnitude {eps}"));
                }
            }
            ModelSpec::Quasiperiodic { eps } | ModelSpec::Logistic { eps } => {
                if !eps_ok(eps) {
                    return bad(format!("negative noise magnitude {eps}"));
                }
            }
            ModelSpec::Langevin { eps, h } => {
                if !eps_ok(eps) || !h_ok(h) {
                    return bad(format!("langevin got eps = {eps}, h = {h}"));
                }
            }
            ModelSpec::VanDerPol { mu, eps, h } => {
                if !(mu > 0.0) || !eps_ok(eps) || !h_ok(h) {
                    return bad(format!("vanderpol got mu = {mu}, eps = {eps}, h = {h}"));
                }
            }
            ModelSpec::Sir { params, h } => {
                SirModel::new(params, h).map_err(|e| Error::Construction(format!("{e}; valid ranges: {}", ranges("sir"))))?;
            }
            ModelSpec::Fhn { n, du, w, mu, sigma, h, .. } => {
                if n < 2 || !(du >= 0.0) || !(w >= 0.0) || !(mu > 0.0) || !(sigma >= 0.0) || !h_ok(h) {
                    return bad(format!(
                        "fhn got n = {n}, du = {du}, w = {w}, mu = {mu}, sigma = {sigma}, h = {h}"
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn make_model<T: Real>(&self) -> Result<ZooModel<T>> {
        self.validate()?;
        let lit = T::lit;
        let model = match *self {
            ModelSpec::Expanding { a, eps } => {
                let a = lit(a);
                let two_pi = T::PI() + T::PI();
                map_model("expanding", eps, move |x| Geometry::Torus.wrap(x + x + a * (two_pi * x).sin()))?
            }
            ModelSpec::Neutral { alpha, eps } => {
                let (alpha, c) = (lit(alpha), lit(2f64.powf(alpha)));
                let half = lit(0.5);
                map_model("neutral", eps, move |x: T| {
                    if x < half {
                        x + c * x.powf(T::one() + alpha)
                    } else if x == half {
                        T::zero()
                    } else {
                        x + x - T::one()
                    }
                })?
            }
            ModelSpec::Quasiperiodic { eps } => {
                let shift = lit(std::f64::consts::SQRT_2);
                map_model("quasiperiodic", eps, move |x| Geometry::Torus.wrap(x + shift))?
            }
            ModelSpec::Logistic { eps } => {
                let r = lit(3.2);
                map_model("logistic", eps, move |x| Geometry::Torus.wrap(r * x * (T::one() - x)))?
            }
            ModelSpec::Langevin { eps, h } => ZooModel::Step(StepModel::sde(
                "langevin",
                2,
                Arc::new(|x: &[T], out: &mut [T]| {
                    out[0] = -x[0];
                    out[1] = -x[1];
                }),
                Diffusion::Isotropic(lit(eps)),
                lit(h),
                Scheme::EulerMaruyama,
            )?),
            ModelSpec::VanDerPol { mu, eps, h } => {
                let inv_mu = lit(1.0 / mu);
                let third = lit(1.0 / 3.0);
                ZooModel::Step(StepModel::sde(
                    "vanderpol",
                    2,
                    Arc::new(move |x: &[T], out: &mut [T]| {
                        out[0] = x[0] - third * x[0] * x[0] * x[0] - x[1];
                        out[1] = inv_mu * x[0];
                    }),
                    Diffusion::Isotropic(lit(eps)),
                    lit(h),
                    Scheme::EulerMaruyama,
                )?)
            }
            ModelSpec::Sir { params, h } => {
                let p = SirParams {
                    alpha: lit(params.alpha),
                    beta: lit(params.beta),
                    mu: lit(params.mu),
                    rho: lit(params.rho),
                    gamma: lit(params.gamma),
                    sigma: lit(params.sigma),
                };
                ZooModel::Sir(SirModel::new(p, lit(h))?)
            }
            ModelSpec::Fhn { n, du, w, mu, sigma, a, h } => ZooModel::Step(StepModel::sde(
                "fhn",
                2 * n,
                fhn_drift(n, lit(du), lit(w), lit(mu), lit(a)),
                Diffusion::Isotropic(lit(sigma / mu.sqrt())),
                lit(h),
                Scheme::EulerMaruyama,
            )?),
        };
        Ok(model)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name())?;
        for (i, (k, v)) in self.params().into_iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        write!(f, ")")
    }
}

fn map_model<T: Real>(name: &str, eps: f64, f: impl Fn(T) -> T + Send + Sync + 'static) -> Result<ZooModel<T>> {
    Ok(ZooModel::Step(StepModel::discrete_map(
        name,
        1,
        Geometry::Torus,
        Arc::new(move |x: &[T], out: &mut [T]| out[0] = f(x[0])),
        T::lit(eps),
    )?))
}

/// Ring of `n` FitzHugh-Nagumo units with nearest-neighbour and mean-field
/// coupling. Coordinates are interleaved as `[u_0, v_0, u_1, v_1, ...]`.
fn fhn_drift<T: Real>(n: usize, du: T, w: T, mu: T, a: T) -> VectorField<T> {
    let inv_mu = T::one() / mu;
    let inv_sqrt_mu = T::one() / mu.sqrt();
    let third = T::lit(1.0 / 3.0);
    let two = T::lit(2.0);
    let inv_n = T::one() / T::from_usize_lossy(n);
    Arc::new(move |x: &[T], out: &mut [T]| {
        let mean = (0..n).fold(T::zero(), |acc, i| acc + x[2 * i]) * inv_n;
        for i in 0..n {
            let u = x[2 * i];
            let v = x[2 * i + 1];
            let left = x[2 * ((i + n - 1) % n)];
            let right = x[2 * ((i + 1) % n)];
            out[2 * i] = inv_mu * (u - third * u * u * u) - inv_sqrt_mu * v
                + du * inv_mu * (right + left - two * u)
                + w * inv_mu * (mean - u);
            out[2 * i + 1] = inv_sqrt_mu * (u + a);
        }
    })
}

/// Builds a zoo model from a name and `(key, value)` pairs.
pub fn make_model<T: Real>(name: &str, params: &[(&str, f64)]) -> Result<ZooModel<T>> {
    let map = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    ModelSpec::from_params(name, &map)?.make_model()
}

/// Alternating basins of the logistic 2-cycle: `A = [0.110, 0.312] ∪ [0.688, 0.890]`
/// around the orbit and `B = [0.313, 0.687]` between its points.
pub fn logistic_exit_spec() -> ExitSpec {
    let a = IntervalSet::new(vec![(0.110, 0.312), (0.688, 0.890)]).expect("static intervals");
    let b = IntervalSet::new(vec![(0.313, 0.687)]).expect("static intervals");
    ExitSpec::new(vec![(a.clone(), b.clone()), (b, a)]).expect("A and B are disjoint")
}

/// Initial points for the logistic exit experiment.
pub fn logistic_exit_points() -> (f64, f64) {
    (LOGISTIC_P, LOGISTIC_Q)
}

/// A named experiment preset that round-trips through the config format.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDescriptor {
    pub id: &'static str,
    /// Which published figure the output is an analogue of.
    pub figure: &'static str,
    pub config: RunConfig,
}

impl ExperimentDescriptor {
    pub fn to_config_text(&self) -> String {
        self.config.to_text()
    }

    pub fn from_config_text(id: &'static str, figure: &'static str, text: &str) -> Result<Self> {
        Ok(Self {
            id,
            figure,
            config: RunConfig::parse(text)?,
        })
    }
}

fn preset(
    id: &'static str,
    figure: &'static str,
    spec: ModelSpec,
    algo: Algorithm,
    trials: usize,
    sweep: Option<(&str, &[f64])>,
) -> ExperimentDescriptor {
    let mut config = RunConfig::for_model(spec, algo, trials, 1);
    if let Some((key, values)) = sweep {
        config.sweep = Some(Sweep {
            key: key.to_string(),
            values: values.to_vec(),
        });
    }
    ExperimentDescriptor { id, figure, config }
}

/// Desk-scale presets mirroring the published experiments.
pub fn descriptors() -> Vec<ExperimentDescriptor> {
    let eps_grid: &[f64] = &[0.01, 0.02, 0.04, 0.06, 0.08, 0.10, 0.12];
    let mut fhn = preset(
        "fhn-ring",
        "fig7",
        ModelSpec::from_params("fhn", &BTreeMap::from([("n".to_string(), 10.0)])).expect("defaults are valid"),
        Algorithm::Ergodic,
        1_000,
        Some(("du", &[0.0, 0.1, 0.3, 0.5, 1.0])),
    );
    fhn.config.max_steps = 2_000_000;
    let mut logistic_exit = preset(
        "logistic-exit",
        "fig4",
        ModelSpec::Logistic { eps: 0.12 },
        Algorithm::Exit,
        100_000,
        None,
    );
    logistic_exit.config.max_steps = 1_000_000;
    vec![
        preset("expanding", "fig1", ModelSpec::Expanding { a: 0.1, eps: 0.12 }, Algorithm::Ergodic, 100_000, Some(("eps", eps_grid))),
        preset("neutral", "fig2", ModelSpec::Neutral { alpha: 0.5, eps: 0.12 }, Algorithm::Ergodic, 100_000, Some(("eps", eps_grid))),
        preset(
            "quasiperiodic",
            "fig3",
            ModelSpec::Quasiperiodic { eps: 0.12 },
            Algorithm::Ergodic,
            100_000,
            Some(("eps", eps_grid)),
        ),
        preset(
            "logistic",
            "fig4",
            ModelSpec::Logistic { eps: 0.12 },
            Algorithm::Ergodic,
            100_000,
            Some(("eps", &[0.06, 0.08, 0.10, 0.12])),
        ),
        logistic_exit,
        preset(
            "langevin",
            "fig5",
            ModelSpec::Langevin { eps: 1.0, h: 0.001 },
            Algorithm::Ergodic,
            100_000,
            Some(("h", &[0.001, 0.002, 0.003])),
        ),
        preset(
            "vanderpol",
            "fig6",
            ModelSpec::VanDerPol { mu: 2.0, eps: 0.3, h: 0.001 },
            Algorithm::Ergodic,
            10_000,
            Some(("mu", &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0])),
        ),
        preset(
            "sir",
            "figSIR",
            ModelSpec::Sir { params: SirParams::reference(), h: 0.001 },
            Algorithm::Ergodic,
            100_000,
            None,
        ),
        fhn,
    ]
}

/// Compile-time check that every zoo model can drive a coupled trial.
#[allow(dead_code)]
fn assert_coupled<T: Real>(m: &ZooModel<T>) {
    fn takes<T: Real, D: CoupledDynamics<T>>(_: &D) {}
    match m {
        ZooModel::Step(s) => takes(s),
        ZooModel::Sir(s) => takes(s),
    }
}
