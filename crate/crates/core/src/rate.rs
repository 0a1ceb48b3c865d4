//! Noise model and achievable rate.

use serde::{Deserialize, Serialize};

use crate::beamforming::LinkDesign;
use crate::error::{Error, Result};
use crate::numerics::{hermitian_eigenvalues, numerical_rank, ComplexMatrix, DEFAULT_RANK_TOL};
use crate::ris::RisConfig;

/// Noise powers in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Thermal noise at each user antenna.
    pub user_noise: f64,
    /// Thermal noise injected by each active RIS element, before amplification.
    pub ris_noise: f64,
}

impl NoiseModel {
    pub fn from_dbm(user_dbm: f64, ris_dbm: f64) -> Self {
        Self {
            user_noise: dbm_to_watts(user_dbm),
            ris_noise: dbm_to_watts(ris_dbm),
        }
    }

    /// A passive surface injects no noise of its own.
    pub fn without_ris_noise(self) -> Self {
        Self { ris_noise: 0.0, ..self }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    /// bits/s/Hz.
    pub rate: f64,
    pub effective_rank: usize,
    /// Post-combining SINR of each stream.
    pub per_stream_snr_db: Vec<f64>,
    pub config_fingerprint: String,
}

/// `R = sigma_u^2 I + sigma_r^2 sum_j (G_RU^j Theta^j)(G_RU^j Theta^j)^H`.
pub fn noise_covariance(
    user_antennas: usize,
    ris_to_user: &[&ComplexMatrix],
    configs: &[RisConfig],
    model: &NoiseModel,
) -> Result<ComplexMatrix> {
    if ris_to_user.len() != configs.len() {
        return Err(Error::dim("RIS configurations", ris_to_user.len(), configs.len()));
    }
    if model.user_noise < 0.0 || model.ris_noise < 0.0 {
        return Err(Error::InvalidArgument("noise powers must be non-negative".into()));
    }
    let k = user_antennas;
    let mut r = ComplexMatrix::identity(k, k).scale(model.user_noise);
    if model.ris_noise > 0.0 {
        for (j, (g, cfg)) in ris_to_user.iter().zip(configs).enumerate() {
            if g.nrows() != k || g.ncols() != cfg.element_count() {
                return Err(Error::dim(
                    format!("RIS-to-user link {j}"),
                    format!("{k}x{}", cfg.element_count()),
                    format!("{}x{}", g.nrows(), g.ncols()),
                ));
            }
            let weights: Vec<f64> = cfg.coefficients().iter().map(|t| t.norm_sqr()).collect();
            let mut scaled = (*g).clone();
            for (n, w) in weights.iter().enumerate() {
                scaled.column_mut(n).scale_mut(w.sqrt());
            }
            r += (&scaled * scaled.adjoint()).scale(model.ris_noise);
        }
    }
    if model.user_noise == 0.0 && numerical_rank(&r, DEFAULT_RANK_TOL)? < k {
        return Err(Error::SingularCovariance);
    }
    Ok(r)
}

/// `L^{-1} H F diag(sqrt(p))` with `R = L L^H`.
fn whitened_streams(h_eff: &ComplexMatrix, design: &LinkDesign, noise_cov: &ComplexMatrix) -> Result<ComplexMatrix> {
    let k = h_eff.nrows();
    if noise_cov.shape() != (k, k) {
        return Err(Error::dim(
            "noise covariance",
            format!("{k}x{k}"),
            format!("{}x{}", noise_cov.nrows(), noise_cov.ncols()),
        ));
    }
    if design.precoder.nrows() != h_eff.ncols() {
        return Err(Error::dim("precoder rows", h_eff.ncols(), design.precoder.nrows()));
    }
    let l = noise_cov.clone().cholesky().ok_or(Error::SingularCovariance)?.unpack();
    l.solve_lower_triangular(&(h_eff * design.powered_precoder()))
        .ok_or(Error::SingularCovariance)
}

/// `log2 det(I + R^{-1} H F P F^H H^H)`, evaluated as `log2 det(I_S + B^H B)`
/// through a Cholesky factor.
pub fn achievable_rate(h_eff: &ComplexMatrix, design: &LinkDesign, noise_cov: &ComplexMatrix) -> Result<RateResult> {
    let b = whitened_streams(h_eff, design, noise_cov)?;
    let s = b.ncols();
    let gram = ComplexMatrix::identity(s, s) + b.adjoint() * &b;
    let rate = match gram.cholesky() {
        Some(c) => {
            let l = c.unpack();
            2.0 * (0..s).map(|i| l[(i, i)].re.ln()).sum::<f64>() / std::f64::consts::LN_2
        }
        None => return Err(Error::NoConvergence),
    };
    Ok(RateResult {
        rate: rate.max(0.0),
        effective_rank: numerical_rank(h_eff, DEFAULT_RANK_TOL)?,
        per_stream_snr_db: per_stream_sinr(h_eff, design, noise_cov)
            .into_iter()
            .map(|x| 10.0 * x.log10())
            .collect(),
        config_fingerprint: String::new(),
    })
}

/// Same quantity as [`achievable_rate`], summed over the eigenvalues of `B^H B`.
pub fn rate_eigen_sum(h_eff: &ComplexMatrix, design: &LinkDesign, noise_cov: &ComplexMatrix) -> Result<f64> {
    let b = whitened_streams(h_eff, design, noise_cov)?;
    if b.ncols() == 0 {
        return Ok(0.0);
    }
    Ok(hermitian_eigenvalues(&(b.adjoint() * &b))?
        .into_iter()
        .map(|l| (1.0 + l.max(0.0)).log2())
        .sum())
}

/// Linear post-combining SINR per stream.
pub fn per_stream_sinr(h_eff: &ComplexMatrix, design: &LinkDesign, noise_cov: &ComplexMatrix) -> Vec<f64> {
    let e = &design.combiner * h_eff * &design.precoder;
    let n = &design.combiner * noise_cov * design.combiner.adjoint();
    let p = &design.stream_powers;
    (0..design.stream_count)
        .map(|s| {
            let interference: f64 = (0..design.stream_count)
                .filter(|&t| t != s)
                .map(|t| p[t] * e[(s, t)].norm_sqr())
                .sum();
            p[s] * e[(s, s)].norm_sqr() / (n[(s, s)].re + interference)
        })
        .collect()
}
