//! Offline K* search and the online selection rules.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{build_correlation, CMatrix, UserPlacement};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::parallel::Exec;
use crate::rate_approx::{approx_rate_with, SelectionRule};

#[derive(Debug, Clone, PartialEq)]
pub struct KStarResult {
    pub rule: SelectionRule,
    pub k_star: usize,
    /// `(K, approximate sum rate)` for every searched K, ascending.
    pub curve: Vec<(usize, f64)>,
}

impl KStarResult {
    pub fn rate_at_kstar(&self) -> f64 {
        self.curve[self.k_star - 1].1
    }
}

/// Largest admissible K for the analytic search.
pub fn search_limit(cfg: &SystemConfig, rule: SelectionRule) -> usize {
    let mut limit = (cfg.num_antennas - 1).min(cfg.coherence_symbols - 1);
    if rule == SelectionRule::Nearest {
        limit = limit.min(cfg.num_candidates);
    }
    limit
}

/// Index of the maximum, earliest on ties.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if *v <= values[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

pub fn solve_kstar_with(cfg: &SystemConfig, rule: SelectionRule, exec: Exec) -> Result<KStarResult> {
    cfg.validate()?;
    let limit = search_limit(cfg, rule);
    if limit == 0 {
        return Err(Error::InvalidConfig("no admissible K (need M >= 2 and T >= 2)".into()));
    }
    let corr = build_correlation(cfg.num_antennas, cfg.corr_coef)?;
    let rates = exec.map(limit, |i| approx_rate_with(cfg, &corr, i + 1, rule).map(|a| a.value));
    let curve: Vec<(usize, f64)> = rates
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map(|v| (i + 1, v)))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = curve.iter().map(|&(_, v)| v).collect();
    let k_star = argmax_first(&values).map(|i| i + 1).unwrap_or(1);
    Ok(KStarResult { rule, k_star, curve })
}

pub fn solve_kstar(cfg: &SystemConfig, rule: SelectionRule) -> Result<KStarResult> {
    solve_kstar_with(cfg, rule, Exec::default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionDecision {
    /// Selected candidate indices in selection order.
    pub indices: Vec<usize>,
    /// Fraction of the coherence slot left for data.
    pub pilot_prelog: f64,
}

impl SelectionDecision {
    pub fn k(&self) -> usize {
        self.indices.len()
    }
}

/// Uniform K-subset of `0..n` by a partial Fisher-Yates shuffle.
pub fn select_rus<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Vec<usize> {
    assert!(k <= n, "cannot select {k} of {n}");
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// The K candidates closest to the base station, ties by index.
pub fn select_lus(k: usize, placement: &UserPlacement) -> Vec<usize> {
    assert!(k <= placement.len(), "cannot select {k} of {}", placement.len());
    let mut order: Vec<usize> = (0..placement.len()).collect();
    order.sort_by(|&a, &b| placement.radii[a].total_cmp(&placement.radii[b]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct SusParams {
    pub alpha: f64,
}

/// Default semi-orthogonality grid 0.05, 0.10, ..., 1.00.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 20.0).collect()
}

fn row_dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(Complex64::norm_sqr).sum()
}

/// Greedy semi-orthogonal user selection over the rows of `g_all`.
///
/// Each step picks the pool member with the largest component orthogonal to
/// the already chosen directions, then keeps only candidates whose
/// normalized correlation with the new direction is below `alpha`.
pub fn select_sus(g_all: &CMatrix, alpha: f64, max_users: usize) -> Vec<usize> {
    let n = g_all.nrows();
    let rows: Vec<Vec<Complex64>> = g_all.row_iter().map(|r| r.iter().copied().collect()).collect();
    let norms: Vec<f64> = rows.iter().map(|r| norm_sqr(r).sqrt()).collect();
    let mut pool: Vec<usize> = (0..n).collect();
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut chosen = Vec::new();

    while !pool.is_empty() && chosen.len() < max_users {
        let mut best: Option<(usize, f64, Vec<Complex64>)> = None;
        for &cand in &pool {
            let mut v = rows[cand].clone();
            for q in &basis {
                let proj = row_dot(&v, q) / norm_sqr(q);
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= proj * y;
                }
            }
            let len = norm_sqr(&v);
            if best.as_ref().is_none_or(|b| len > b.1) {
                best = Some((cand, len, v));
            }
        }
        let (pick, len, q) = best.expect("pool is not empty");
        chosen.push(pick);
        if len == 0.0 {
            break;
        }
        let qn = len.sqrt();
        pool.retain(|&c| {
            c != pick && norms[c] > 0.0 && row_dot(&rows[c], &q).norm() / (norms[c] * qn) < alpha
        });
        basis.push(q);
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::stream;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn kstar_single_candidate() {
        let cfg = SystemConfig { num_antennas: 2, num_candidates: 4, ..Default::default() };
        for rule in [SelectionRule::Random, SelectionRule::Nearest] {
            let r = solve_kstar(&cfg, rule).unwrap();
            assert_eq!(r.k_star, 1);
            assert_eq!(r.curve.len(), 1);
        }
    }

    #[test]
    fn kstar_interior_at_reference_point() {
        let cfg = SystemConfig::default();
        for rule in [SelectionRule::Random, SelectionRule::Nearest] {
            let r = solve_kstar(&cfg, rule).unwrap();
            assert!(r.k_star > 1 && r.k_star < 32);
            assert_eq!(r.curve.len(), 31);
            assert!(r.curve.iter().all(|&(_, v)| v <= r.rate_at_kstar()));
        }
    }

    #[test]
    fn kstar_is_deterministic_across_exec_modes() {
        let cfg = SystemConfig { est_error: 0.1, corr_coef: 0.5, ..Default::default() };
        let a = solve_kstar_with(&cfg, SelectionRule::Nearest, Exec::Sequential).unwrap();
        let b = solve_kstar_with(&cfg, SelectionRule::Nearest, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn argmax_prefers_smallest() {
        assert_eq!(argmax_first(&[1.0, 3.0, 3.0, 2.0]), Some(1));
        assert_eq!(argmax_first(&[]), None);
    }

    #[test]
    fn rus_full_and_distinct() {
        let mut rng = stream(1, 1);
        let mut all = select_rus(10, 10, &mut rng);
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        for _ in 0..100 {
            let mut s = select_rus(8, 64, &mut rng);
            s.sort();
            s.dedup();
            assert_eq!(s.len(), 8);
            assert!(s.iter().all(|&i| i < 64));
        }
    }

    #[test]
    fn rus_single_pick_frequencies() {
        let mut rng = stream(7, 0);
        let draws = 1_000_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[select_rus(1, 4, &mut rng)[0]] += 1;
        }
        for c in counts {
            let f = c as f64 / draws as f64;
            assert!((f - 0.25).abs() < 0.002, "{f}");
        }
    }

    #[test]
    fn lus_picks_closest() {
        let p = UserPlacement { radii: vec![50.0, 40.0, 60.0], angles: vec![0.0; 3] };
        let mut s = select_lus(2, &p);
        s.sort();
        assert_eq!(s, vec![0, 1]);
        let mut all = select_lus(3, &p);
        all.sort();
        assert_eq!(all, vec![0, 1, 2]);
        let tie = UserPlacement { radii: vec![40.0, 40.0, 40.0], angles: vec![0.0; 3] };
        assert_eq!(select_lus(2, &tie), vec![0, 1]);
    }

    #[test]
    fn sus_trivial_cases() {
        let one = CMatrix::from_row_slice(1, 2, &[c(1.0), c(2.0)]);
        assert_eq!(select_sus(&one, 0.5, 2), vec![0]);

        let ortho = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(3.0)]);
        assert_eq!(select_sus(&ortho, 0.5, 2), vec![1, 0]);

        let parallel = CMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(2.0), c(2.0)]);
        assert_eq!(select_sus(&parallel, 0.5, 2), vec![1]);
    }

    #[test]
    fn sus_respects_cap() {
        let mut rng = stream(4, 0);
        let g = crate::channel::complex_gaussian(64, 8, &mut rng);
        for alpha in [0.2, 0.6, 1.0] {
            let s = select_sus(&g, alpha, 8);
            assert!(!s.is_empty() && s.len() <= 8);
            let mut d = s.clone();
            d.sort();
            d.dedup();
            assert_eq!(d.len(), s.len());
        }
        // alpha = 1 keeps every non-parallel candidate, so the cap binds
        assert_eq!(select_sus(&g, 1.0, 8).len(), 8);
    }
}
