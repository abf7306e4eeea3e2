//! User placement in the annular cell, transmit correlation, and channel draws.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::SystemConfig;
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Random stream for one independent unit of work (a trial, a window).
///
/// The stream is a pure function of `(seed, index)`, which is what makes
/// parallel runs reproducible.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Polar positions of the N candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPlacement {
    pub radii: Vec<f64>,
    pub angles: Vec<f64>,
}

impl UserPlacement {
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn distances_of(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&i| self.radii[i]).collect()
    }
}

/// Inverse CDF of the uniform-in-annulus radius.
pub fn radius_from_uniform(u: f64, r_min: f64, r_max: f64) -> f64 {
    (r_min * r_min + u * (r_max * r_max - r_min * r_min)).sqrt()
}

pub fn sample_placement<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> UserPlacement {
    let n = cfg.num_candidates;
    let mut radii = Vec::with_capacity(n);
    let mut angles = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        radii.push(radius_from_uniform(u, cfg.r_min, cfg.r_max));
        angles.push(2.0 * PI * rng.random::<f64>());
    }
    UserPlacement { radii, angles }
}

/// Exponential (Kac-Murdock-Szego) transmit correlation `R[i][j] = delta^|i-j|`
/// with its spectrum and symmetric square root.
#[derive(Debug, Clone)]
pub struct CorrelationModel {
    pub delta: f64,
    pub matrix: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub sqrt: DMatrix<f64>,
    sqrt_complex: CMatrix,
}

impl CorrelationModel {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_identity(&self) -> bool {
        self.delta == 0.0
    }

    /// Right-multiplies `x` by `R^{1/2}`.
    pub fn apply_sqrt(&self, x: &CMatrix) -> CMatrix {
        if self.is_identity() {
            x.clone()
        } else {
            x * &self.sqrt_complex
        }
    }
}

pub fn build_correlation(m: usize, delta: f64) -> Result<CorrelationModel> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!(
            "correlation coefficient {delta} outside [0, 1)"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("correlation dimension must be positive".into()));
    }
    let matrix = DMatrix::from_fn(m, m, |i, j| delta.powi(i.abs_diff(j) as i32));
    let (eigenvalues, sqrt) = if delta == 0.0 {
        (DVector::from_element(m, 1.0), DMatrix::identity(m, m))
    } else {
        let eig = matrix.clone().symmetric_eigen();
        let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let q = &eig.eigenvectors;
        let sqrt = q * DMatrix::from_diagonal(&root) * q.transpose();
        // symmetrize away rounding
        let sqrt = (&sqrt + sqrt.transpose()) * 0.5;
        (eig.eigenvalues, sqrt)
    };
    let sqrt_complex = sqrt.map(|v| Complex64::new(v, 0.0));
    Ok(CorrelationModel { delta, matrix, eigenvalues, sqrt, sqrt_complex })
}

/// One small-scale fading draw for a set of active users.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub distances: Vec<f64>,
    /// Large-scale fading `c * d_k^-alpha` per active user.
    pub lsf: Vec<f64>,
    pub h: CMatrix,
    pub h_hat: CMatrix,
    pub h_tilde: CMatrix,
    /// Composite true channel `D^{1/2} H R^{1/2}`.
    pub g: CMatrix,
    /// Composite estimated channel `D^{1/2} H_hat R^{1/2}`.
    pub g_hat: CMatrix,
    /// Composite estimation error `D^{1/2} H_tilde R^{1/2}`.
    pub g_tilde: CMatrix,
}

impl ChannelRealization {
    pub fn num_users(&self) -> usize {
        self.h.nrows()
    }

    /// Restricts the realization to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> ChannelRealization {
        ChannelRealization {
            distances: rows.iter().map(|&r| self.distances[r]).collect(),
            lsf: rows.iter().map(|&r| self.lsf[r]).collect(),
            h: self.h.select_rows(rows),
            h_hat: self.h_hat.select_rows(rows),
            h_tilde: self.h_tilde.select_rows(rows),
            g: self.g.select_rows(rows),
            g_hat: self.g_hat.select_rows(rows),
            g_tilde: self.g_tilde.select_rows(rows),
        }
    }
}

/// K x M matrix of i.i.d. CN(0, 1) entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    // column-major fill, deterministic order
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    })
}

fn scale_rows(x: &CMatrix, factors: &[f64]) -> CMatrix {
    let mut out = x.clone();
    for (mut row, &f) in out.row_iter_mut().zip(factors) {
        row *= Complex64::new(f, 0.0);
    }
    out
}

pub fn draw_channel<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    corr: &CorrelationModel,
    distances: &[f64],
    rng: &mut R,
) -> ChannelRealization {
    let k = distances.len();
    let m = corr.dim();
    let rho = cfg.est_error;
    let z1 = complex_gaussian(k, m, rng);
    let z2 = complex_gaussian(k, m, rng);
    let h_hat = z1 * Complex64::new((1.0 - rho).sqrt(), 0.0);
    let h_tilde = z2 * Complex64::new(rho.sqrt(), 0.0);
    let h = &h_hat + &h_tilde;

    let lsf: Vec<f64> = distances.iter().map(|&d| cfg.pathloss(d)).collect();
    let amp: Vec<f64> = lsf.iter().map(|b| b.sqrt()).collect();
    let g = corr.apply_sqrt(&scale_rows(&h, &amp));
    let g_hat = corr.apply_sqrt(&scale_rows(&h_hat, &amp));
    let g_tilde = corr.apply_sqrt(&scale_rows(&h_tilde, &amp));

    ChannelRealization { distances: distances.to_vec(), lsf, h, h_hat, h_tilde, g, g_hat, g_tilde }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn radius_endpoints() {
        assert_eq!(radius_from_uniform(0.0, 35.0, 250.0), 35.0);
        let near_one = radius_from_uniform(1.0 - 1e-16, 35.0, 250.0);
        assert_relative_eq!(near_one, 250.0, max_relative = 1e-12);
    }

    #[test]
    fn placement_within_annulus() {
        let cfg = SystemConfig::default();
        let mut rng = stream(1, 0);
        let p = sample_placement(&cfg, &mut rng);
        assert_eq!(p.len(), cfg.num_candidates);
        for (&r, &a) in p.radii.iter().zip(&p.angles) {
            assert!((cfg.r_min..=cfg.r_max).contains(&r));
            assert!((0.0..2.0 * PI).contains(&a));
        }
    }

    #[test]
    fn correlation_small_cases() {
        let c = build_correlation(2, 0.0).unwrap();
        assert_eq!(c.matrix, DMatrix::identity(2, 2));

        let c = build_correlation(2, 0.5).unwrap();
        assert_eq!(c.matrix, DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]));
        let mut ev: Vec<f64> = c.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert_relative_eq!(ev[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(ev[1], 1.5, epsilon = 1e-14);
    }

    #[test]
    fn correlation_trace_and_root() {
        for delta in [0.3, 0.5, 0.9] {
            let c = build_correlation(32, delta).unwrap();
            assert_relative_eq!(c.eigenvalues.sum(), 32.0, epsilon = 1e-9);
            assert!(c.eigenvalues.iter().all(|&l| l > 0.0));
            let sq = &c.sqrt * &c.sqrt;
            let err = (&sq - &c.matrix).abs().max();
            assert!(err < 1e-10 * c.matrix.abs().max(), "delta={delta} err={err}");
            assert_eq!(c.sqrt, c.sqrt.transpose());
        }
    }

    #[test]
    fn rejects_unit_correlation() {
        assert!(build_correlation(4, 1.0).is_err());
        assert!(build_correlation(4, -0.1).is_err());
    }

    #[test]
    fn estimation_split_extremes() {
        let corr = build_correlation(8, 0.5).unwrap();
        let d = [40.0, 100.0, 200.0];
        let perfect = SystemConfig { est_error: 0.0, ..Default::default() };
        let ch = draw_channel(&perfect, &corr, &d, &mut stream(3, 0));
        assert!(ch.h_tilde.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert_eq!(ch.h_hat, ch.h);

        let blind = SystemConfig { est_error: 1.0, ..Default::default() };
        let ch = draw_channel(&blind, &corr, &d, &mut stream(3, 0));
        assert!(ch.h_hat.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn composite_channel_identities() {
        let cfg = SystemConfig { est_error: 0.3, corr_coef: 0.5, ..Default::default() };
        let corr = build_correlation(16, 0.5).unwrap();
        let d = [36.0, 80.0, 150.0, 249.0];
        let ch = draw_channel(&cfg, &corr, &d, &mut stream(9, 4));
        assert_eq!(ch.h, &ch.h_hat + &ch.h_tilde);

        let dsqrt = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            4,
            ch.lsf.iter().map(|b| Complex64::new(b.sqrt(), 0.0)),
        ));
        let rs = corr.sqrt.map(|v| Complex64::new(v, 0.0));
        let g_ref = &dsqrt * &ch.h * &rs;
        let gh_ref = &dsqrt * &ch.h_hat * &rs;
        let scale = ch.g.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let err = (&ch.g - g_ref).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let err_hat = (&ch.g_hat - gh_ref).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12 * scale, "{err}");
        assert!(err_hat < 1e-12 * scale, "{err_hat}");
    }

    #[test]
    fn select_rows_keeps_order() {
        let cfg = SystemConfig::default();
        let corr = build_correlation(4, 0.0).unwrap();
        let ch = draw_channel(&cfg, &corr, &[40.0, 50.0, 60.0], &mut stream(0, 0));
        let sub = ch.select_rows(&[2, 0]);
        assert_eq!(sub.distances, vec![60.0, 40.0]);
        assert_eq!(sub.g_hat.row(0), ch.g_hat.row(2));
    }
}
