//! Large-system deterministic equivalents for ZF with imperfect CSI and
//! transmit correlation.
//!
//! All functionals of `R` are evaluated on its eigenvalues, so one fixed-point
//! iteration costs O(M).

use crate::channel::{build_correlation, draw_channel, stream, CorrelationModel};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::parallel::Exec;
use crate::zf::{leakage, zf_precode};

/// Relative step size that ends the fixed-point phase.
const PHI_TOL: f64 = 1e-12;
const PHI_MAX_ITER: usize = 10_000;

fn check_load(m: usize, k: usize) -> Result<()> {
    if k == 0 || k >= m {
        return Err(Error::InvalidArgument(format!("need 1 <= K < M, got K={k}, M={m}")));
    }
    Ok(())
}

/// `phi - (1/M) sum_i lambda_i / (1 + (K/M) lambda_i / phi)`.
pub fn phi_residual(eigenvalues: &[f64], k: usize, phi: f64) -> f64 {
    let m = eigenvalues.len() as f64;
    let load = k as f64 / m;
    phi - eigenvalues.iter().map(|&l| l / (1.0 + load * l / phi)).sum::<f64>() / m
}

fn bisect_phi(eigenvalues: &[f64], k: usize) -> f64 {
    // the residual is negative near 0 and positive at 1 for K < M
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi_residual(eigenvalues, k, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Newton refinement of a root estimate of the residual. The residual is
/// convex in `phi`, so starting at or above the root the iterates decrease
/// monotonically onto it.
fn newton_polish(eigenvalues: &[f64], k: usize, mut phi: f64) -> f64 {
    let m = eigenvalues.len() as f64;
    let load = k as f64 / m;
    for _ in 0..50 {
        let slope = 1.0
            - eigenvalues.iter().map(|&l| load * l * l / (phi + load * l).powi(2)).sum::<f64>() / m;
        if !(slope > 0.0) {
            break;
        }
        let next = phi - phi_residual(eigenvalues, k, phi) / slope;
        if !(next > 0.0) {
            break;
        }
        let done = (next - phi).abs() <= 4.0 * f64::EPSILON * phi;
        phi = next;
        if done {
            break;
        }
    }
    phi
}

/// Solves `phi = (1/M) tr(R (I + (K/M) R / phi)^-1)` by fixed-point iteration
/// from `phi = 1`, finished with Newton steps. Near `K = M` the iteration
/// contracts slowly and a small step no longer means a small error, which
/// the Newton phase takes care of.
pub fn solve_phi(corr: &CorrelationModel, k: usize) -> Result<f64> {
    let m = corr.dim();
    check_load(m, k)?;
    if corr.is_identity() {
        return Ok(1.0 - k as f64 / m as f64);
    }
    let eig = corr.eigenvalues.as_slice();
    let load = k as f64 / m as f64;
    let mut phi = 1.0f64;
    let mut prev_step = f64::INFINITY;
    for _ in 0..PHI_MAX_ITER {
        let next = eig.iter().map(|&l| l / (1.0 + load * l / phi)).sum::<f64>() / m as f64;
        let step = (next - phi).abs();
        phi = next;
        if step < PHI_TOL * phi {
            return Ok(newton_polish(eig, k, phi));
        }
        if step > prev_step {
            // not contracting; fall back to bracketing
            return Ok(bisect_phi(eig, k));
        }
        prev_step = step;
    }
    Err(Error::NoConvergence { what: "phi fixed point", iterations: PHI_MAX_ITER })
}

/// `psi = (1/M) tr(R^2 (I + (K/M) R / phi)^-2)`.
pub fn compute_psi(corr: &CorrelationModel, k: usize, phi: f64) -> f64 {
    let m = corr.dim() as f64;
    if corr.is_identity() {
        return phi * phi;
    }
    let load = k as f64 / m;
    corr.eigenvalues
        .iter()
        .map(|&l| {
            let x = l / (1.0 + load * l / phi);
            x * x
        })
        .sum::<f64>()
        / m
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicEquivalents {
    pub k: usize,
    pub m: usize,
    pub phi: f64,
    pub psi: f64,
    /// `A = sigma^2 / ((1 - rho) P c phi M)`.
    pub coeff_a: f64,
    /// `B = rho/(1 - rho) * psi / (M phi^2 - K psi)`.
    pub coeff_b: f64,
    pub est_error: f64,
    pub pathloss_exp: f64,
}

impl DeterministicEquivalents {
    /// `A` with the `1/(1 - rho)` factor removed.
    pub fn noise_term(&self) -> f64 {
        self.coeff_a * (1.0 - self.est_error)
    }

    /// `B` with the `1/(1 - rho)` factor removed.
    pub fn error_term(&self) -> f64 {
        self.coeff_b * (1.0 - self.est_error)
    }

    /// `psi / ((M/K) phi^2 - psi)`.
    pub fn error_ratio(&self) -> f64 {
        self.psi / (self.m as f64 / self.k as f64 * self.phi * self.phi - self.psi)
    }
}

pub fn deterministic_equivalents_with(
    cfg: &SystemConfig,
    corr: &CorrelationModel,
    k: usize,
) -> Result<DeterministicEquivalents> {
    let m = corr.dim();
    check_load(m, k)?;
    let rho = cfg.est_error;
    if rho >= 1.0 {
        return Err(Error::InvalidArgument(
            "est_error = 1 leaves no channel knowledge; A(K, M) is undefined".into(),
        ));
    }
    let phi = solve_phi(corr, k)?;
    let psi = compute_psi(corr, k, phi);
    let (mf, kf) = (m as f64, k as f64);
    let denom = mf * phi * phi - kf * psi;
    if denom <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "M phi^2 - K psi = {denom} is not positive (K={k}, M={m})"
        )));
    }
    let coeff_a =
        cfg.noise_power_mw() / ((1.0 - rho) * cfg.tx_power_mw() * cfg.pathloss_ref * phi * mf);
    let coeff_b = rho / (1.0 - rho) * psi / denom;
    Ok(DeterministicEquivalents {
        k,
        m,
        phi,
        psi,
        coeff_a,
        coeff_b,
        est_error: rho,
        pathloss_exp: cfg.pathloss_exp,
    })
}

pub fn deterministic_equivalents(cfg: &SystemConfig, k: usize) -> Result<DeterministicEquivalents> {
    let corr = build_correlation(cfg.num_antennas, cfg.corr_coef)?;
    deterministic_equivalents_with(cfg, &corr, k)
}

/// Large-system SINR of user `k` (zero-based) among the active `distances`.
pub fn asymptotic_sinr(de: &DeterministicEquivalents, distances: &[f64], k: usize) -> f64 {
    let alpha = de.pathloss_exp;
    let total: f64 = distances.iter().map(|d| d.powf(alpha)).sum();
    1.0 / (total * (de.coeff_a + de.coeff_b * distances[k].powf(-alpha)))
}

/// Monte Carlo check of the two appendix limits for fixed user distances.
#[derive(Debug, Clone, PartialEq)]
pub struct AppendixReport {
    pub m: usize,
    pub k: usize,
    pub draws: usize,
    pub discarded: usize,
    pub gamma_sq_mean: f64,
    pub gamma_sq_limit: f64,
    /// Mean of the quadratic form averaged analytically over the error
    /// draw, `rho tr(W^H R W)`. Same expectation as the sampled form but
    /// without the estimation-error noise, so the finite-M bias is visible.
    pub quad_form_mean: f64,
    /// Mean of the quadratic form evaluated on the drawn error channel.
    pub quad_form_sampled_mean: f64,
    pub quad_form_limit: f64,
    pub rel_err_gamma_sq: f64,
    pub rel_err_quad_form: f64,
}

fn rel_err(est: f64, limit: f64) -> f64 {
    if limit == 0.0 {
        est.abs()
    } else {
        ((est - limit) / limit).abs()
    }
}

/// Averages `gamma^2` and the error quadratic form
/// `h_tilde_k R^{1/2} W W^H R^{1/2} h_tilde_k^H` over `draws` small-scale
/// fading realizations and compares them with their deterministic limits.
pub fn validate_appendix(
    cfg: &SystemConfig,
    distances: &[f64],
    draws: usize,
    exec: Exec,
) -> Result<AppendixReport> {
    let k = distances.len();
    let corr = build_correlation(cfg.num_antennas, cfg.corr_coef)?;
    let de = deterministic_equivalents_with(cfg, &corr, k)?;
    let p = cfg.tx_power_mw();

    let per_draw = exec.map(draws, |t| {
        let mut rng = stream(cfg.seed, t as u64);
        let ch = draw_channel(cfg, &corr, distances, &mut rng);
        let pre = match zf_precode(&ch, p) {
            Ok(pre) => pre,
            Err(Error::IllConditioned { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let (quad, sampled) = if cfg.est_error == 0.0 {
            (0.0, 0.0)
        } else {
            let conditional = cfg.est_error * corr.apply_sqrt(&pre.w.adjoint()).norm_squared();
            let sampled = leakage(&ch, &pre).iter().zip(&ch.lsf).map(|(q, b)| q / b).sum::<f64>() / k as f64;
            (conditional, sampled)
        };
        Ok(Some((pre.gamma_sq, quad, sampled)))
    });

    let mut used = 0usize;
    let (mut g_sum, mut q_sum, mut s_sum) = (0.0, 0.0, 0.0);
    for r in per_draw {
        if let Some((g, q, s)) = r? {
            used += 1;
            g_sum += g;
            q_sum += q;
            s_sum += s;
        }
    }
    if used == 0 {
        return Err(Error::IllConditioned { condition: f64::INFINITY });
    }
    let alpha = cfg.pathloss_exp;
    let total: f64 = distances.iter().map(|d| d.powf(alpha)).sum();
    let rho = cfg.est_error;
    let m = cfg.num_antennas as f64;
    let gamma_sq_limit = (1.0 - rho) * p * cfg.pathloss_ref * de.phi * m / total;
    let quad_form_limit =
        rho / (1.0 - rho) * de.error_ratio() * total / (cfg.pathloss_ref * k as f64);
    let gamma_sq_mean = g_sum / used as f64;
    let quad_form_mean = q_sum / used as f64;
    Ok(AppendixReport {
        m: cfg.num_antennas,
        k,
        draws,
        discarded: draws - used,
        gamma_sq_mean,
        gamma_sq_limit,
        quad_form_mean,
        quad_form_sampled_mean: s_sum / used as f64,
        quad_form_limit,
        rel_err_gamma_sq: rel_err(gamma_sq_mean, gamma_sq_limit),
        rel_err_quad_form: rel_err(quad_form_mean, quad_form_limit),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // independent dense-matrix route for the trace functionals
    fn dense_traces(corr: &CorrelationModel, k: usize, phi: f64) -> (f64, f64) {
        let m = corr.dim();
        let load = k as f64 / m as f64;
        let a = nalgebra::DMatrix::<f64>::identity(m, m) + &corr.matrix * (load / phi);
        let inv = a.try_inverse().unwrap();
        let t1 = (&corr.matrix * &inv).trace() / m as f64;
        let ri = &corr.matrix * &inv;
        let t2 = (&ri * &ri).trace() / m as f64;
        (t1, t2)
    }

    #[test]
    fn phi_closed_form_uncorrelated() {
        let corr = build_correlation(32, 0.0).unwrap();
        assert_eq!(solve_phi(&corr, 16).unwrap(), 0.5);
        assert_eq!(solve_phi(&corr, 1).unwrap(), 31.0 / 32.0);
        assert_eq!(compute_psi(&corr, 16, 0.5), 0.25);
        assert_eq!(compute_psi(&corr, 8, 0.75), 0.5625);
    }

    #[test]
    fn phi_matches_high_precision_reference() {
        // mpmath findroot on the eigen-domain residual, 40 digits
        let corr = build_correlation(32, 0.5).unwrap();
        let phi = solve_phi(&corr, 8).unwrap();
        assert_relative_eq!(phi, 0.641_507_488_253_584_2, max_relative = 1e-11);
        let psi = compute_psi(&corr, 8, phi);
        assert_relative_eq!(psi, 0.536_045_600_559_781_6, max_relative = 1e-11);

        let corr = build_correlation(32, 0.9).unwrap();
        let phi = solve_phi(&corr, 16).unwrap();
        assert_relative_eq!(phi, 0.082_104_597_985_276_24, max_relative = 1e-10);
        assert_relative_eq!(compute_psi(&corr, 16, phi), 0.008_456_319_875_916_72, max_relative = 1e-9);
    }

    #[test]
    fn eigen_domain_matches_dense_traces() {
        let corr = build_correlation(32, 0.5).unwrap();
        let phi = solve_phi(&corr, 8).unwrap();
        let (t1, t2) = dense_traces(&corr, 8, phi);
        assert_relative_eq!(phi, t1, max_relative = 1e-12);
        assert_relative_eq!(compute_psi(&corr, 8, phi), t2, max_relative = 1e-12);
    }

    #[test]
    fn phi_decreasing_in_load() {
        for delta in [0.0, 0.3, 0.9] {
            let corr = build_correlation(32, delta).unwrap();
            let phis: Vec<f64> = (1..32).map(|k| solve_phi(&corr, k).unwrap()).collect();
            assert!(phis.windows(2).all(|w| w[1] < w[0]), "delta={delta}");
        }
    }

    #[test]
    fn load_bounds_enforced() {
        let corr = build_correlation(8, 0.3).unwrap();
        assert!(solve_phi(&corr, 0).is_err());
        assert!(solve_phi(&corr, 8).is_err());
    }

    #[test]
    fn special_case_coefficients() {
        let cfg = SystemConfig::default();
        let de = deterministic_equivalents(&cfg, 8).unwrap();
        let expect = cfg.noise_power_mw() / (cfg.tx_power_mw() * cfg.pathloss_ref * 24.0);
        assert_relative_eq!(de.coeff_a, expect, max_relative = 1e-12);
        assert_eq!(de.coeff_b, 0.0);

        let corr_only = SystemConfig { corr_coef: 0.7, ..cfg.clone() };
        assert_eq!(deterministic_equivalents(&corr_only, 8).unwrap().coeff_b, 0.0);

        let noisy = SystemConfig { est_error: 0.1, ..cfg.clone() };
        let de = deterministic_equivalents(&noisy, 8).unwrap();
        assert_relative_eq!(de.coeff_b, 1.0 / 216.0, max_relative = 1e-12);

        let blind = SystemConfig { est_error: 1.0, ..cfg };
        assert!(deterministic_equivalents(&blind, 8).is_err());
    }

    #[test]
    fn error_coefficient_increasing_in_rho() {
        let mut prev = -1.0;
        for rho in [0.0, 0.05, 0.1, 0.3, 0.6, 0.9] {
            let cfg = SystemConfig { est_error: rho, corr_coef: 0.5, ..Default::default() };
            let de = deterministic_equivalents(&cfg, 10).unwrap();
            assert!(de.coeff_a > 0.0);
            assert!(de.coeff_b > prev);
            assert_eq!(de.coeff_b == 0.0, rho == 0.0);
            prev = de.coeff_b;
        }
    }

    #[test]
    fn asymptotic_sinr_special_case() {
        let cfg = SystemConfig::default();
        let de = deterministic_equivalents(&cfg, 4).unwrap();
        let d = [80.0; 4];
        let expect = cfg.tx_power_mw() * cfg.pathloss_ref * 28.0 * 80f64.powf(-3.76)
            / (4.0 * cfg.noise_power_mw());
        for k in 0..4 {
            assert_relative_eq!(asymptotic_sinr(&de, &d, k), expect, max_relative = 1e-12);
        }
        // without estimation error the queried user does not matter
        let mixed = [40.0, 90.0, 150.0, 240.0];
        let s0 = asymptotic_sinr(&de, &mixed, 0);
        assert_relative_eq!(asymptotic_sinr(&de, &mixed, 3), s0, max_relative = 1e-14);
    }

    #[test]
    fn asymptotic_sinr_decreasing_in_distances() {
        let base = [60.0, 100.0, 180.0];
        for rho in [0.0, 0.1] {
            let cfg = SystemConfig { est_error: rho, corr_coef: 0.5, ..Default::default() };
            let de = deterministic_equivalents(&cfg, 3).unwrap();
            for user in 0..3 {
                for moved in 0..3 {
                    // with estimation error the own-distance dependence is not monotone
                    if rho > 0.0 && moved == user {
                        continue;
                    }
                    let mut d = base;
                    d[moved] *= 1.1;
                    assert!(asymptotic_sinr(&de, &d, user) < asymptotic_sinr(&de, &base, user));
                }
            }
        }
    }

    #[test]
    fn far_user_can_gain_under_estimation_error() {
        let cfg = SystemConfig { est_error: 0.1, tx_power_dbm: 40.0, ..Default::default() };
        let de = deterministic_equivalents(&cfg, 3).unwrap();
        let near = asymptotic_sinr(&de, &[40.0, 40.0, 40.0], 0);
        let far = asymptotic_sinr(&de, &[80.0, 40.0, 40.0], 0);
        assert!(far > near);
    }

    #[test]
    fn appendix_quad_form_vanishes_without_error() {
        let cfg = SystemConfig::default();
        let d: Vec<f64> = (0..8).map(|i| 40.0 + 20.0 * i as f64).collect();
        let rep = validate_appendix(&cfg, &d, 50, Exec::Sequential).unwrap();
        assert_eq!(rep.quad_form_mean, 0.0);
        assert_eq!(rep.quad_form_limit, 0.0);
    }

    #[test]
    fn conditional_and_sampled_quad_forms_agree() {
        let cfg = SystemConfig { num_antennas: 16, est_error: 0.2, corr_coef: 0.5, ..Default::default() };
        let d: Vec<f64> = (0..4).map(|i| 50.0 + 40.0 * i as f64).collect();
        let rep = validate_appendix(&cfg, &d, 4000, Exec::Parallel).unwrap();
        assert_relative_eq!(rep.quad_form_sampled_mean, rep.quad_form_mean, max_relative = 0.02);
    }

    #[test]
    fn phi_accurate_near_full_load() {
        let corr = build_correlation(32, 0.9).unwrap();
        for k in [30, 31] {
            let phi = solve_phi(&corr, k).unwrap();
            let reference = bisect_phi(corr.eigenvalues.as_slice(), k);
            assert_relative_eq!(phi, reference, max_relative = 1e-13);
        }
    }
}
