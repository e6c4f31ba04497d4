use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use ergocouple::dynamics::{Diffusion, Geometry, Scheme, StatePoint, StepModel};
use ergocouple::modelzoo::{make_model, ModelSpec, LOGISTIC_P, LOGISTIC_Q};
use ergocouple::rng::{NoiseDraw, NoiseStream};
use ergocouple::{StatePoint64, StepModel64};
use proptest::prelude::*;

fn zoo(name: &str, params: &[(&str, f64)]) -> StepModel64 {
    make_model::<f64>(name, params).unwrap().as_step().clone()
}

fn zeros(dim: usize) -> NoiseDraw<f64> {
    NoiseDraw {
        values: vec![0.0; dim],
        stream: 0,
        step: 0,
    }
}

fn torus(x: f64) -> StatePoint64 {
    StatePoint::torus(vec![x]).unwrap()
}

fn wrapped_gaussian_bruteforce(delta: f64, eps: f64) -> f64 {
    (-50..=50)
        .map(|k| {
            let z = (delta + k as f64) / eps;
            (-0.5 * z * z).exp() / (eps * (2.0 * PI).sqrt())
        })
        .sum()
}

#[test]
fn logistic_step_without_noise_matches_the_map() {
    let m = zoo("logistic", &[("eps", 0.0)]);
    let y = m.step(&torus(0.5), &zeros(1)).unwrap();
    assert!((y.coords()[0] - 0.8).abs() < 1e-15);
}

#[test]
fn langevin_step_without_noise_is_an_euler_step() {
    let m = zoo("langevin", &[("eps", 0.0), ("h", 0.001)]);
    let x = StatePoint::euclidean(vec![1.0, 0.0]).unwrap();
    let y = m.step(&x, &zeros(2)).unwrap();
    assert!((y.coords()[0] - 0.999).abs() < 1e-15);
    assert_eq!(y.coords()[1], 0.0);
}

#[test]
fn circle_density_at_the_image_point() {
    let m = zoo("expanding", &[("a", 0.1), ("eps", 0.1)]);
    let x = torus(0.37);
    let fx = m.step(&x, &zeros(1)).unwrap();
    let p = m.transition_density(&x, &fx).unwrap();
    assert!((p - 3.98942).abs() < 1e-4, "p = {p}");
    assert!((p - wrapped_gaussian_bruteforce(0.0, 0.1)).abs() < 1e-12);
}

#[test]
fn circle_density_matches_bruteforce_wrap_sum() {
    let eps = 0.31;
    let m = zoo("quasiperiodic", &[("eps", eps)]);
    let x = torus(0.2);
    let fx = (0.2 + SQRT_2).fract();
    for i in 0..50 {
        let y = i as f64 / 50.0;
        let p = m.transition_density(&x, &torus(y)).unwrap();
        let oracle = wrapped_gaussian_bruteforce(y - fx, eps);
        assert!((p - oracle).abs() < 1e-12 * oracle.max(1.0), "y = {y}: {p} vs {oracle}");
    }
}

#[test]
fn wrapped_density_is_symmetric_about_the_image() {
    let m = zoo("logistic", &[("eps", 0.12)]);
    let x = torus(0.3);
    let fx: f64 = 3.2 * 0.3 * 0.7;
    let up = m.transition_density(&x, &torus((fx + 0.5).fract())).unwrap();
    let down = m.transition_density(&x, &torus((fx - 0.5 + 1.0).fract())).unwrap();
    assert!((up - down).abs() < 1e-12 * up.max(1e-300));
}

#[test]
fn euclidean_density_at_the_mean() {
    let m = StepModel::discrete_map(
        "identity-line",
        1,
        Geometry::Euclidean,
        Arc::new(|x: &[f64], out: &mut [f64]| out[0] = x[0]),
        1.0,
    )
    .unwrap();
    let x = StatePoint::euclidean(vec![0.25]).unwrap();
    let p = m.transition_density(&x, &x).unwrap();
    assert!((p - 0.39894).abs() < 1e-5);
}

#[test]
fn circle_densities_integrate_to_one() {
    let grid = 10_000;
    for (name, eps) in [("expanding", 0.1), ("logistic", 0.5), ("quasiperiodic", 0.02)] {
        let m = zoo(name, &[("eps", eps)]);
        let x = torus(0.123);
        let total: f64 = (0..grid)
            .map(|i| m.transition_density(&x, &torus((i as f64 + 0.5) / grid as f64)).unwrap())
            .sum::<f64>()
            / grid as f64;
        assert!((total - 1.0).abs() < 1e-6, "{name}: {total}");
    }
}

#[test]
fn euler_maruyama_density_integrates_to_one() {
    let h = 0.01;
    let m = StepModel::sde(
        "cubic",
        1,
        Arc::new(|x: &[f64], out: &mut [f64]| out[0] = x[0] - x[0].powi(3)),
        Diffusion::Isotropic(0.7),
        h,
        Scheme::EulerMaruyama,
    )
    .unwrap();
    let x0 = 0.4;
    let mean = x0 + h * (x0 - x0 * x0 * x0);
    let s = 0.7 * h.sqrt();
    let (lo, hi, grid) = (mean - 12.0 * s, mean + 12.0 * s, 10_000);
    let dx = (hi - lo) / grid as f64;
    let x = StatePoint::euclidean(vec![x0]).unwrap();
    let total: f64 = (0..grid)
        .map(|i| {
            let y = StatePoint::euclidean(vec![lo + (i as f64 + 0.5) * dx]).unwrap();
            m.transition_density(&x, &y).unwrap()
        })
        .sum::<f64>()
        * dx;
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}

#[test]
fn quasiperiodic_orbit_without_noise() {
    let m = zoo("quasiperiodic", &[("eps", 0.0)]);
    let mut rng = NoiseStream::new(3, 0);
    let y = m.simulate_trajectory(&torus(0.2), 1, &mut rng).unwrap();
    assert!((y.coords()[0] - 0.61421).abs() < 1e-5);
    let y = m.simulate_trajectory(&torus(0.2), 10, &mut rng).unwrap();
    let expect = (0.2 + 10.0 * SQRT_2).fract();
    assert!(Geometry::Torus.distance(y.coords(), &[expect]) < 1e-12);
}

#[test]
fn quasiperiodic_map_preserves_distances() {
    let m = zoo("quasiperiodic", &[("eps", 0.0)]);
    for i in 0..100 {
        let a = i as f64 / 100.0;
        let b = (a + 0.013 * (i % 7) as f64).fract();
        let fa = m.step(&torus(a), &zeros(1)).unwrap();
        let fb = m.step(&torus(b), &zeros(1)).unwrap();
        let d0 = Geometry::Torus.distance(&[a], &[b]);
        let d1 = fa.distance(&fb);
        assert!((d0 - d1).abs() < 1e-12);
    }
}

#[test]
fn zero_steps_is_the_identity() {
    let m = zoo("vanderpol", &[]);
    let x = StatePoint::euclidean(vec![0.3, -1.2]).unwrap();
    let mut rng = NoiseStream::new(1, 0);
    assert_eq!(m.simulate_trajectory(&x, 0, &mut rng).unwrap(), x);
    assert_eq!(rng.step_index(), 0);
}

#[test]
fn noiseless_logistic_settles_on_the_two_cycle() {
    let m = zoo("logistic", &[("eps", 0.0)]);
    let mut rng = NoiseStream::new(1, 0);
    let y = m.simulate_trajectory(&torus(0.3), 200, &mut rng).unwrap();
    let v = y.coords()[0];
    let gap = (v - LOGISTIC_P).abs().min((v - LOGISTIC_Q).abs());
    assert!(gap < 1e-3, "ended at {v}");
}

#[test]
fn same_stream_gives_identical_draws_and_trajectories() {
    let m = zoo("fhn", &[("n", 4.0)]);
    let (x, _) = ModelSpec::from_params("fhn", &[("n".to_string(), 4.0)].into_iter().collect())
        .unwrap()
        .default_points();
    let x = StatePoint::euclidean(x).unwrap();
    let a = m.simulate_trajectory(&x, 500, &mut NoiseStream::new(9, 4)).unwrap();
    let b = m.simulate_trajectory(&x, 500, &mut NoiseStream::new(9, 4)).unwrap();
    let c = m.simulate_trajectory(&x, 500, &mut NoiseStream::new(9, 5)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);

    let mut s1 = NoiseStream::new(42, 7);
    let mut s2 = NoiseStream::new(42, 7);
    for _ in 0..10 {
        let d1: NoiseDraw<f64> = s1.draw(3);
        let d2: NoiseDraw<f64> = s2.draw(3);
        assert_eq!(d1, d2);
    }
    assert_eq!(s1.step_index(), 10);
}

#[test]
fn euler_maruyama_second_moment_of_langevin() {
    let (eps, h, horizon) = (1.0, 0.002, 5.0);
    let m = zoo("langevin", &[("eps", eps), ("h", h)]);
    let steps = (horizon / h) as u64;
    let trials = 100_000;
    let origin = StatePoint::euclidean(vec![0.0, 0.0]).unwrap();
    let mut sum = [0.0; 2];
    let mut sum_sq = [0.0; 2];
    for i in 0..trials {
        let mut rng = NoiseStream::new(2024, i);
        let y = m.simulate_trajectory(&origin, steps, &mut rng).unwrap();
        for k in 0..2 {
            let v = y.coords()[k] * y.coords()[k];
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    let n = trials as f64;
    let target = eps * eps / 2.0;
    for k in 0..2 {
        let mean = sum[k] / n;
        let se = ((sum_sq[k] / n - mean * mean) / n).sqrt();
        assert!((mean - target).abs() < 3.0 * se, "coordinate {k}: {mean} vs {target} (se {se})");
    }
}

#[test]
fn noiseless_van_der_pol_returns_along_its_limit_cycle() {
    let m = zoo("vanderpol", &[("eps", 0.0), ("mu", 2.0), ("h", 0.001)]);
    let mut rng = NoiseStream::new(0, 0);
    let start = StatePoint::euclidean(vec![0.5, 0.5]).unwrap();
    let p = m.simulate_trajectory(&start, 50_000, &mut rng).unwrap();
    let mut x = p.clone();
    let mut left = false;
    let mut returned = false;
    for _ in 0..30_000 {
        x = m.simulate_trajectory(&x, 1, &mut rng).unwrap();
        let d = x.distance(&p);
        left |= d > 0.5;
        if left && d < 1e-2 {
            returned = true;
            break;
        }
    }
    assert!(returned);
}

#[test]
fn noiseless_fitzhugh_nagumo_rests_at_its_equilibrium() {
    let spec = ModelSpec::from_params("fhn", &[("n".to_string(), 5.0), ("sigma".to_string(), 0.0)].into_iter().collect()).unwrap();
    let m = spec.make_model::<f64>().unwrap().as_step().clone();
    let (rest, _) = spec.default_points();
    let mut drift = vec![0.0; rest.len()];
    m.eval_drift(&rest, &mut drift);
    assert!(drift.iter().all(|d| d.abs() < 1e-12));
    let mut kicked = rest.clone();
    kicked[0] += 0.01;
    kicked[5] -= 0.01;
    let x = StatePoint::euclidean(kicked).unwrap();
    let y = m.simulate_trajectory(&x, 20_000, &mut NoiseStream::new(0, 0)).unwrap();
    let err = y.coords().iter().zip(&rest).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-4, "distance from rest {err}");
}

#[test]
fn single_and_double_precision_agree_on_short_runs() {
    let m64 = zoo("vanderpol", &[]);
    let m32 = make_model::<f32>("vanderpol", &[]).unwrap().as_step().clone();
    let x64 = StatePoint::euclidean(vec![1.0, 0.5]).unwrap();
    let x32 = StatePoint::euclidean(vec![1.0f32, 0.5]).unwrap();
    let a = m64.simulate_trajectory(&x64, 100, &mut NoiseStream::new(5, 1)).unwrap();
    let b = m32.simulate_trajectory(&x32, 100, &mut NoiseStream::new(5, 1)).unwrap();
    for (p, q) in a.coords().iter().zip(b.coords()) {
        assert!((p - *q as f64).abs() < 1e-4);
    }
}

#[test]
fn wrong_noise_length_is_rejected() {
    let m = zoo("langevin", &[]);
    let x = StatePoint::euclidean(vec![0.0, 0.0]).unwrap();
    assert!(m.step(&x, &zeros(3)).is_err());
    assert!(m.step(&torus(0.1), &zeros(2)).is_err());
}

proptest! {
    #[test]
    fn circle_steps_stay_in_the_unit_interval(x in 0.0f64..1.0, z in -40.0f64..40.0, eps in 0.0f64..2.0) {
        for name in ["expanding", "neutral", "quasiperiodic", "logistic"] {
            let m = zoo(name, &[("eps", eps)]);
            let noise = NoiseDraw { values: vec![z], stream: 0, step: 0 };
            let y = m.step(&torus(x), &noise).unwrap().coords()[0];
            prop_assert!((0.0..1.0).contains(&y), "{} gave {}", name, y);
        }
    }

    #[test]
    fn torus_distance_is_a_symmetric_half_bounded_metric(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let d = Geometry::Torus.distance(&[a], &[b]);
        prop_assert!((0.0..=0.5).contains(&d));
        prop_assert_eq!(d, Geometry::Torus.distance(&[b], &[a]));
    }
}
