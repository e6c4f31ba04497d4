use ergocouple::coupling::{AcceptanceRule, CoupledDynamics, CoupledPair, FarStrategy};
use ergocouple::degenerate::{two_step_maximal_attempt, SirModel, SirParams, TwoStepContext};
use ergocouple::dynamics::StatePoint;
use ergocouple::rng::NoiseStream;
use ergocouple::{Error, SirModel64};
use proptest::prelude::*;

const H: f64 = 0.001;

fn reference() -> SirParams<f64> {
    SirParams::reference()
}

fn ctx(s: f64, i: f64) -> TwoStepContext<f64> {
    TwoStepContext::new(reference(), H, s, i).unwrap()
}

fn uniform_in(rng: &mut NoiseStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform::<f64>()
}

/// Noise transforms written out term by term from the two-step expansion.
fn transforms_by_hand(s: f64, i: f64, n1: f64, n2: f64) -> (f64, f64) {
    let SirParams { alpha, beta, mu, rho, gamma, sigma } = reference();
    let s1 = s + H * (alpha - beta * s * i - mu * s);
    let i1 = i + H * (beta * s * i - (mu + rho + gamma) * i);
    let h12 = H.sqrt();
    let h32 = H * h12;
    let r_s = -beta * sigma * h32 * (s * i1 + i * s1) * n1 - mu * sigma * s * h32 * n1 + sigma * s * h12 * n1
        + sigma * s1 * h12 * n2
        - beta * sigma * sigma * s * i * H * H * n1 * n1
        + sigma * sigma * s * H * n1 * n2;
    let r_i = beta * sigma * h32 * (s * i1 + i * s1) * n1 - (mu + rho + gamma) * sigma * i * h32 * n1
        + sigma * i * h12 * n1
        + sigma * i1 * h12 * n2
        + beta * sigma * sigma * s * i * H * H * n1 * n1
        + sigma * sigma * i * H * n1 * n2;
    (r_s, r_i)
}

#[test]
fn transforms_match_a_term_by_term_evaluation() {
    let c = ctx(1.0, 1.0);
    let (r_s, r_i) = c.transform(1.0, 0.0);
    let (e_s, e_i) = transforms_by_hand(1.0, 1.0, 1.0, 0.0);
    assert!((r_s - e_s).abs() < 1e-15, "{r_s} vs {e_s}");
    assert!((r_i - e_i).abs() < 1e-15, "{r_i} vs {e_i}");
    let mut rng = NoiseStream::new(31, 0);
    for _ in 0..1_000 {
        let (s, i) = (uniform_in(&mut rng, 0.1, 8.0), uniform_in(&mut rng, 0.1, 8.0));
        let (n1, n2) = (rng.normal::<f64>(), rng.normal::<f64>());
        let (a, b) = ctx(s, i).transform(n1, n2);
        let (ea, eb) = transforms_by_hand(s, i, n1, n2);
        assert!((a - ea).abs() < 1e-13 && (b - eb).abs() < 1e-13);
    }
}

#[test]
fn zero_noise_gives_the_deterministic_two_step_image() {
    let c = ctx(1.3, 0.7);
    let out = c.two_step_forward(0.0, 0.0);
    assert_eq!((out.r_s, out.r_i), (0.0, 0.0));
    assert_eq!((out.s2, out.i2), c.deterministic_part());
}

#[test]
fn quadratic_terms_are_small_next_to_linear_ones() {
    let c = ctx(1.0, 1.0);
    let l = c.linear_part();
    let (sq, cr) = (c.quadratic_square(), c.quadratic_cross());
    let mut worst: f64 = 0.0;
    for a in -12..=12 {
        for b in -12..=12 {
            if a == 0 && b == 0 {
                continue;
            }
            let (n1, n2) = (a as f64 / 4.0, b as f64 / 4.0);
            for row in 0..2 {
                let linear = (l[2 * row] * n1).abs() + (l[2 * row + 1] * n2).abs();
                let quadratic = (sq[row] * n1 * n1).abs() + (cr[row] * n1 * n2).abs();
                worst = worst.max(quadratic / linear);
            }
        }
    }
    assert!(worst < 0.05, "quadratic share {worst}");
}

#[test]
fn density_at_the_origin_uses_the_linear_coefficients() {
    let c = ctx(1.0, 1.0);
    let l = c.linear_part();
    assert_eq!(c.jacobian(0.0, 0.0), l);
    let det = (l[0] * l[3] - l[1] * l[2]).abs();
    let p = c.two_step_density(0.0, 0.0, 0.0, 0.0).unwrap();
    let expect = 1.0 / (det * 2.0 * std::f64::consts::PI);
    assert!((p / expect - 1.0).abs() < 1e-12);
}

#[test]
fn analytic_jacobian_matches_finite_differences() {
    let mut rng = NoiseStream::new(5, 0);
    let step = 1e-6;
    for _ in 0..1_000 {
        let c = ctx(uniform_in(&mut rng, 0.1, 8.0), uniform_in(&mut rng, 0.1, 8.0));
        let (n1, n2) = (uniform_in(&mut rng, -4.0, 4.0), uniform_in(&mut rng, -4.0, 4.0));
        let j = c.jacobian(n1, n2);
        let (a_p, b_p) = c.transform(n1 + step, n2);
        let (a_m, b_m) = c.transform(n1 - step, n2);
        let (c_p, d_p) = c.transform(n1, n2 + step);
        let (c_m, d_m) = c.transform(n1, n2 - step);
        let fd = [
            (a_p - a_m) / (2.0 * step),
            (c_p - c_m) / (2.0 * step),
            (b_p - b_m) / (2.0 * step),
            (d_p - d_m) / (2.0 * step),
        ];
        for row in 0..2 {
            let scale = j[2 * row].abs().max(j[2 * row + 1].abs());
            for col in 0..2 {
                let k = 2 * row + col;
                assert!((j[k] - fd[k]).abs() <= 1e-4 * scale, "entry {k}: {} vs {}", j[k], fd[k]);
            }
        }
    }
}

#[test]
fn newton_round_trips_at_reference_parameters() {
    let mut rng = NoiseStream::new(12, 0);
    let started = std::time::Instant::now();
    let (mut worst_res, mut worst_err, mut worst_it) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..10_000 {
        let c = ctx(uniform_in(&mut rng, 0.2, 6.0), uniform_in(&mut rng, 0.2, 6.0));
        let (n1, n2) = (rng.normal::<f64>(), rng.normal::<f64>());
        let (r_s, r_i) = c.transform(n1, n2);
        let guess = c.linear_guess(r_s, r_i).unwrap();
        let inv = c.invert_effective_normals(r_s, r_i, guess).unwrap();
        worst_res = worst_res.max(inv.residual);
        worst_err = worst_err.max((inv.n1 - n1).abs().max((inv.n2 - n2).abs()));
        worst_it = worst_it.max(inv.iterations);
    }
    assert!(worst_res < 1e-8, "residual {worst_res}");
    assert!(worst_err < 1e-8, "recovered normals off by {worst_err}");
    assert!(worst_it <= 6, "iterations {worst_it}");
    assert!(started.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn box_counts_agree_with_the_change_of_variables_density() {
    let c = ctx(1.0, 1.0);
    let l = c.linear_part();
    let det_l = l[0] * l[3] - l[1] * l[2];
    let whiten = |r_s: f64, r_i: f64| ((l[3] * r_s - l[1] * r_i) / det_l, (l[0] * r_i - l[2] * r_s) / det_l);
    let n = 1_000_000;
    let delta = 0.1;
    let centers = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (-1.0, -0.5), (0.8, 0.8), (1.5, -1.0)];
    let mut counts = vec![0u64; centers.len()];
    let mut rng = NoiseStream::new(77, 0);
    for _ in 0..n {
        let (r_s, r_i) = c.transform(rng.normal(), rng.normal());
        let (u, v) = whiten(r_s, r_i);
        for (k, &(cu, cv)) in centers.iter().enumerate() {
            if (u - cu).abs() < delta && (v - cv).abs() < delta {
                counts[k] += 1;
            }
        }
    }
    let (ds, di) = c.deterministic_part();
    for (k, &(cu, cv)) in centers.iter().enumerate() {
        let r_s = l[0] * cu + l[1] * cv;
        let r_i = l[2] * cu + l[3] * cv;
        let density = c.log_density_at(ds + r_s, di + r_i).unwrap().exp();
        let expected = density * det_l.abs() * 4.0 * delta * delta;
        let observed = counts[k] as f64 / n as f64;
        assert!((observed / expected - 1.0).abs() < 0.1, "center {k}: {observed} vs {expected}");
    }
}

#[test]
fn trajectories_stay_positive() {
    let m = SirModel::new(reference(), H).unwrap();
    let mut x = [1.0, 1.0];
    let mut scratch = m.new_scratch();
    let mut rng = NoiseStream::new(2, 0);
    for _ in 0..1_000_000 {
        m.advance(&mut x, &mut scratch, &mut rng).unwrap();
        assert!(x[0] > 0.0 && x[1] > 0.0);
    }
}

#[test]
fn two_step_attempts_advance_two_steps() {
    let m: SirModel64 = SirModel::new(reference(), H).unwrap();
    let x = StatePoint::euclidean(vec![1.0, 1.0]).unwrap();
    let y = StatePoint::euclidean(vec![1.0 + 1e-6, 1.0]).unwrap();
    let pair = CoupledPair::new(&x, &y);
    let mut coupled = 0;
    for i in 0..200 {
        let (next, out) = two_step_maximal_attempt(&m, &pair, AcceptanceRule::ResidualOverlap, &mut NoiseStream::new(1, i)).unwrap();
        assert_eq!(next.steps_elapsed, 2);
        assert!((0.0..=1.0).contains(&out.ratio));
        assert!(next.x.iter().chain(&next.y).all(|&v| v > 0.0));
        coupled += next.coupled as usize;
    }
    assert!(coupled > 0);
    let same = CoupledPair::new(&x, &x.clone());
    let mut not_yet = same.clone();
    not_yet.coupled = false;
    let (next, out) = two_step_maximal_attempt(&m, &not_yet, AcceptanceRule::MinMaxRatio, &mut NoiseStream::new(1, 0)).unwrap();
    assert_eq!(out.ratio, 1.0);
    assert!(next.coupled);
}

#[test]
fn reflection_is_not_available_for_state_dependent_noise() {
    let m = SirModel::new(reference(), H).unwrap();
    let x = StatePoint::euclidean(vec![1.0, 1.0]).unwrap();
    let y = StatePoint::euclidean(vec![2.0, 0.5]).unwrap();
    let mut pair = CoupledPair::new(&x, &y);
    let mut scratch = m.new_scratch();
    let mut rng = NoiseStream::new(0, 0);
    let err = m.far_step(&mut pair, FarStrategy::Reflection, 0.0, &mut scratch, &mut rng);
    assert!(matches!(err, Err(Error::Capability(_))));
    m.far_step(&mut pair, FarStrategy::Synchronous, 0.0, &mut scratch, &mut rng).unwrap();
}

#[test]
fn construction_rejects_bad_inputs() {
    assert!(SirModel::new(reference(), 0.02).is_err());
    assert!(SirModel::new(reference(), 0.0).is_err());
    let mut p = reference();
    p.sigma = -1.0;
    assert!(SirModel::new(p, H).is_err());
    let mut weak = reference();
    weak.alpha = 0.1;
    assert!(weak.lambda() <= 0.0);
    assert!(SirModel::new(weak, H).is_err());
    assert!(TwoStepContext::new(reference(), H, -1.0, 1.0).is_err());
    assert!((reference().lambda() - 17.5).abs() < 1e-12);
}

proptest! {
    #[test]
    fn inversion_recovers_small_perturbations(
        s in 0.2f64..6.0, i in 0.2f64..6.0, n1 in -3.0f64..3.0, n2 in -3.0f64..3.0,
    ) {
        let c = ctx(s, i);
        let (r_s, r_i) = c.transform(n1, n2);
        let inv = c.invert_effective_normals(r_s, r_i, c.linear_guess(r_s, r_i).unwrap()).unwrap();
        prop_assert!((inv.n1 - n1).abs() < 1e-8 && (inv.n2 - n2).abs() < 1e-8);
        let lp = c.log_two_step_density(n1, n2).unwrap();
        let (ds, di) = c.deterministic_part();
        prop_assert!((c.log_density_at(ds + r_s, di + r_i).unwrap() - lp).abs() < 1e-6);
    }
}
