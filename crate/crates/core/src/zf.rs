//! Zero-forcing precoding on the estimated channel and per-user link evaluation.

use num_complex::Complex64;

use crate::channel::{CMatrix, ChannelRealization};
use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Gram matrices with a larger condition number are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct PrecoderOutput {
    /// Power scaling `gamma^2 = P / tr((G_hat G_hat^H)^-1)`, in mW.
    pub gamma_sq: f64,
    /// `G_hat^H (G_hat G_hat^H)^-1`, M x K.
    pub w: CMatrix,
    pub gram_condition: f64,
    pub gram_inv_trace: f64,
}

/// Builds the ZF precoder from one factorization of the K x K Gram matrix.
pub fn zf_precode(ch: &ChannelRealization, p_mw: f64) -> Result<PrecoderOutput> {
    let k = ch.g_hat.nrows();
    let m = ch.g_hat.ncols();
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!(
            "zero forcing needs 1 <= K <= M, got K={k}, M={m}"
        )));
    }
    let gram = &ch.g_hat * ch.g_hat.adjoint();
    let eig = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_GRAM_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let chol = gram.cholesky().ok_or(Error::IllConditioned { condition })?;
    // (G_hat G_hat^H)^-1 G_hat, then W is its adjoint since the Gram is Hermitian.
    let solved = chol.solve(&ch.g_hat);
    let w = solved.adjoint();
    let inv = chol.inverse();
    let gram_inv_trace: f64 = (0..k).map(|i| inv[(i, i)].re).sum();
    Ok(PrecoderOutput {
        gamma_sq: p_mw / gram_inv_trace,
        w,
        gram_condition: condition,
        gram_inv_trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkResult {
    pub sinr: Vec<f64>,
    /// `log2(1 + SINR_k)` without the pilot pre-log.
    pub per_user_rate: Vec<f64>,
    /// `(1 - K/T) * sum_k log2(1 + SINR_k)`.
    pub sum_rate: f64,
}

impl LinkResult {
    pub fn spectral_sum(&self) -> f64 {
        self.per_user_rate.iter().sum()
    }
}

/// Per-user interference powers `||g_tilde_k W||^2` (the symbol covariance is
/// the identity, so the rank-one `s s^H` is replaced by its mean).
pub fn leakage(ch: &ChannelRealization, pre: &PrecoderOutput) -> Vec<f64> {
    let e: CMatrix = &ch.g_tilde * &pre.w;
    e.row_iter()
        .map(|row| row.iter().map(Complex64::norm_sqr).sum())
        .collect()
}

pub fn evaluate_link(ch: &ChannelRealization, pre: &PrecoderOutput, cfg: &SystemConfig) -> LinkResult {
    let k = ch.num_users();
    let noise = cfg.noise_power_mw();
    let g2 = pre.gamma_sq;
    let sinr: Vec<f64> = if cfg.est_error == 0.0 {
        vec![g2 / noise; k]
    } else {
        leakage(ch, pre).into_iter().map(|q| g2 / (noise + g2 * q)).collect()
    };
    let per_user_rate: Vec<f64> = sinr.iter().map(|s| (1.0 + s).log2()).collect();
    let sum_rate = cfg.prelog(k) * per_user_rate.iter().sum::<f64>();
    LinkResult { sinr, per_user_rate, sum_rate }
}
