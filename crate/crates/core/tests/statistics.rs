//! Distributional checks of the random ingredients against their laws.

use kstar_core::channel::{build_correlation, draw_channel, sample_placement, stream};
use kstar_core::selection::select_rus;
use kstar_core::SystemConfig;

fn annulus_cdf(cfg: &SystemConfig, r: f64) -> f64 {
    (r * r - cfg.r_min * cfg.r_min) / (cfg.r_max * cfg.r_max - cfg.r_min * cfg.r_min)
}

fn ks_distance(cfg: &SystemConfig, n: usize, seed: u64) -> f64 {
    let cfg = SystemConfig { num_candidates: n, ..cfg.clone() };
    let mut radii = sample_placement(&cfg, &mut stream(seed, 0)).radii;
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = n as f64;
    radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let f = annulus_cdf(&cfg, r);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn placement_radii_pass_kolmogorov_smirnov() {
    let cfg = SystemConfig::default();
    // asymptotic critical value at the 1% level
    let n = 100_000;
    let d = ks_distance(&cfg, n, 11);
    assert!(d < 1.6276 / (n as f64).sqrt(), "KS distance {d}");
    assert!(ks_distance(&cfg, 1_000_000, 12) < 0.002);
}

#[test]
fn estimate_and_error_split_the_variance() {
    let rho = 0.3;
    let cfg = SystemConfig { est_error: rho, corr_coef: 0.5, ..Default::default() };
    let corr = build_correlation(cfg.num_antennas, cfg.corr_coef).unwrap();
    let distances = vec![100.0; 32];
    let mut rng = stream(21, 0);
    let (mut hat, mut tilde, mut total, mut fourth, mut cross) = (0.0, 0.0, 0.0, 0.0, num_complex::Complex64::new(0.0, 0.0));
    let mut count = 0usize;
    while count < 1_000_000 {
        let ch = draw_channel(&cfg, &corr, &distances, &mut rng);
        for ((a, b), h) in ch.h_hat.iter().zip(ch.h_tilde.iter()).zip(ch.h.iter()) {
            hat += a.norm_sqr();
            tilde += b.norm_sqr();
            total += h.norm_sqr();
            fourth += h.norm_sqr().powi(2);
            cross += a * b.conj();
        }
        count += ch.h.len();
    }
    let n = count as f64;
    let close = |x: f64, target: f64, tol: f64| ((x / n - target) / target).abs() < tol;
    assert!(close(hat, 1.0 - rho, 0.01), "E|h_hat|^2 = {}", hat / n);
    assert!(close(tilde, rho, 0.01), "E|h_tilde|^2 = {}", tilde / n);
    assert!(close(total, 1.0, 0.01), "E|h|^2 = {}", total / n);
    // CN(0, 1): E|h|^4 = 2
    assert!(close(fourth, 2.0, 0.02), "E|h|^4 = {}", fourth / n);
    assert!((cross / n).norm() < 5e-3, "estimate and error correlated: {}", cross / n);
}

#[test]
fn random_selection_passes_chi_square() {
    let (k, n, draws) = (8usize, 64usize, 1_000_000usize);
    let mut rng = stream(31, 0);
    let mut counts = vec![0u64; n];
    for _ in 0..draws {
        for i in select_rus(k, n, &mut rng) {
            counts[i] += 1;
        }
    }
    let expected = (draws * k) as f64 / n as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99th percentile of chi-square with 63 degrees of freedom
    assert!(chi2 < 92.010, "chi-square {chi2}");
}
