#![allow(dead_code)]

/// Two-sample Kolmogorov-Smirnov statistic. Sorts both inputs.
pub fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample statistic at level `alpha`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// `E[g(Z)]` for a standard normal `Z` by midpoint quadrature on `[-12, 12]`.
pub fn normal_expectation(g: impl Fn(f64) -> f64) -> f64 {
    let grid = 200_000;
    let dz = 24.0 / grid as f64;
    (0..grid)
        .map(|i| {
            let z = -12.0 + (i as f64 + 0.5) * dz;
            g(z) * (-0.5 * z * z).exp()
        })
        .sum::<f64>()
        * dz
        / (2.0 * std::f64::consts::PI).sqrt()
}
