//! Deterministic approximations of the ergodic sum rate as a function of the
//! number of active users K.
//!
//! Both rules average `log2(1 + 1/(T1 r^a + T2 r^-a + T3))` over the law of the
//! user's own distance while the other active users enter only through their
//! mean `E[d^a]`:
//!
//! * `T1 = A`
//! * `T2 = B * S_k`
//! * `T3 = A * S_k + B`
//!
//! where `S_k` sums the other users' moments. Random selection uses the
//! annulus law for every user; nearest selection uses the k-th order
//! statistic of the N candidates.

use crate::channel::{build_correlation, CorrelationModel};
use crate::config::SystemConfig;
use crate::distance::{moment_unordered, order_moments, DistanceLaw};
use crate::error::{Error, Result};
use crate::rmt::{deterministic_equivalents_with, DeterministicEquivalents};

/// Absolute tolerance of every rate integral, in bits/s/Hz.
pub const RATE_ABS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionRule {
    /// Uniformly random subset of the candidates.
    Random,
    /// The candidates closest to the base station.
    Nearest,
}

impl SelectionRule {
    pub fn name(self) -> &'static str {
        match self {
            SelectionRule::Random => "rus",
            SelectionRule::Nearest => "lus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproxMethod {
    Quadrature,
    /// Closed form for perfect CSI and uncorrelated antennas.
    SpecialCase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrTerms {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

impl SinrTerms {
    fn new(de: &DeterministicEquivalents, others: f64) -> Self {
        SinrTerms { t1: de.coeff_a, t2: de.coeff_b * others, t3: de.coeff_a * others + de.coeff_b }
    }

    pub fn rate_at(&self, r_pow: f64) -> f64 {
        (1.0 + 1.0 / (self.t1 * r_pow + self.t2 / r_pow + self.t3)).log2()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateApproximation {
    pub rule: SelectionRule,
    pub k: usize,
    /// Approximate ergodic sum rate, bits/s/Hz, pre-log applied.
    pub value: f64,
    /// One entry for random selection (shared by all users), K for nearest.
    pub terms: Vec<SinrTerms>,
    pub method: ApproxMethod,
}

fn check_k(cfg: &SystemConfig, k: usize, rule: SelectionRule) -> Result<()> {
    cfg.check_active(k)?;
    if rule == SelectionRule::Nearest && k > cfg.num_candidates {
        return Err(Error::InvalidArgument(format!(
            "cannot select K={k} of N={} candidates",
            cfg.num_candidates
        )));
    }
    Ok(())
}

fn user_rate(law: &DistanceLaw, terms: SinrTerms, alpha: f64) -> Result<f64> {
    law.expect(|r| terms.rate_at(r.powf(alpha)), RATE_ABS_TOL, 0.0)
}

pub fn approx_rate_rus_with(cfg: &SystemConfig, corr: &CorrelationModel, k: usize) -> Result<RateApproximation> {
    check_k(cfg, k, SelectionRule::Random)?;
    let de = deterministic_equivalents_with(cfg, corr, k)?;
    let alpha = cfg.pathloss_exp;
    let others = (k - 1) as f64 * moment_unordered(cfg.r_min, cfg.r_max, alpha);
    let terms = SinrTerms::new(&de, others);
    let per_user = user_rate(&DistanceLaw::unordered(cfg), terms, alpha)?;
    Ok(RateApproximation {
        rule: SelectionRule::Random,
        k,
        value: cfg.prelog(k) * k as f64 * per_user,
        terms: vec![terms],
        method: ApproxMethod::Quadrature,
    })
}

pub fn approx_rate_rus(cfg: &SystemConfig, k: usize) -> Result<RateApproximation> {
    let corr = build_correlation(cfg.num_antennas, cfg.corr_coef)?;
    approx_rate_rus_with(cfg, &corr, k)
}

/// Nearest-selection approximation with caller-supplied order moments
/// `moments[i] = E[d_(i+1)^alpha]`, at least K of them.
pub fn approx_rate_lus_from_moments(
    cfg: &SystemConfig,
    corr: &CorrelationModel,
    k: usize,
    moments: &[f64],
) -> Result<RateApproximation> {
    check_k(cfg, k, SelectionRule::Nearest)?;
    if moments.len() < k {
        return Err(Error::InvalidArgument(format!("need {k} order moments, got {}", moments.len())));
    }
    let de = deterministic_equivalents_with(cfg, corr, k)?;
    let alpha = cfg.pathloss_exp;
    let total: f64 = moments[..k].iter().sum();
    let mut terms = Vec::with_capacity(k);
    let mut sum = 0.0;
    for (i, m) in moments[..k].iter().enumerate() {
        let t = SinrTerms::new(&de, total - m);
        sum += user_rate(&DistanceLaw::order_statistic(cfg, i + 1)?, t, alpha)?;
        terms.push(t);
    }
    Ok(RateApproximation {
        rule: SelectionRule::Nearest,
        k,
        value: cfg.prelog(k) * sum,
        terms,
        method: ApproxMethod::Quadrature,
    })
}

pub fn approx_rate_lus_with(cfg: &SystemConfig, corr: &CorrelationModel, k: usize) -> Result<RateApproximation> {
    check_k(cfg, k, SelectionRule::Nearest)?;
    let moments = order_moments(cfg, k)?;
    approx_rate_lus_from_moments(cfg, corr, k, &moments)
}

pub fn approx_rate_lus(cfg: &SystemConfig, k: usize) -> Result<RateApproximation> {
    let corr = build_correlation(cfg.num_antennas, cfg.corr_coef)?;
    approx_rate_lus_with(cfg, &corr, k)
}

pub fn approx_rate_with(
    cfg: &SystemConfig,
    corr: &CorrelationModel,
    k: usize,
    rule: SelectionRule,
) -> Result<RateApproximation> {
    match rule {
        SelectionRule::Random => approx_rate_rus_with(cfg, corr, k),
        SelectionRule::Nearest => approx_rate_lus_with(cfg, corr, k),
    }
}

/// Closed-form approximation for `rho = 0`, `delta = 0`, where Jensen's
/// inequality is applied to every user's distance as well.
pub fn approx_rate_special(cfg: &SystemConfig, k: usize, rule: SelectionRule) -> Result<RateApproximation> {
    if cfg.est_error != 0.0 || cfg.corr_coef != 0.0 {
        return Err(Error::InvalidArgument(
            "the closed form needs est_error = 0 and corr_coef = 0".into(),
        ));
    }
    check_k(cfg, k, rule)?;
    let alpha = cfg.pathloss_exp;
    let moment_sum = match rule {
        SelectionRule::Random => k as f64 * moment_unordered(cfg.r_min, cfg.r_max, alpha),
        SelectionRule::Nearest => order_moments(cfg, k)?.iter().sum(),
    };
    let snr = cfg.tx_power_mw() * cfg.pathloss_ref * (cfg.num_antennas - k) as f64
        / (cfg.noise_power_mw() * moment_sum);
    Ok(RateApproximation {
        rule,
        k,
        value: cfg.prelog(k) * k as f64 * (1.0 + snr).log2(),
        terms: Vec::new(),
        method: ApproxMethod::SpecialCase,
    })
}
