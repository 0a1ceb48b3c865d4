//! RIS phase and amplification control.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{cascade_channel, Cascade};
use crate::error::{Error, Result};
use crate::numerics::{hermitian_asymmetry, max_abs, svd, ComplexMatrix};

/// Relative Hermitian-asymmetry tolerance for incident covariances.
const HERMITIAN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RisMode {
    /// Unit-modulus reflection, no injected noise.
    Passive,
    /// Amplifying elements that also amplify their own thermal noise.
    #[default]
    Active,
}

/// Reflection coefficients `Theta = amplification * diag(exp(i phases))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisConfig {
    /// Radians in `[0, 2 pi)`, one per element.
    pub phases: Vec<f64>,
    /// 1.0 for a passive surface.
    pub amplification: f64,
}

impl RisConfig {
    pub fn passive(phases: Vec<f64>) -> Self {
        Self {
            phases: phases.into_iter().map(wrap_phase).collect(),
            amplification: 1.0,
        }
    }

    pub fn with_amplification(mut self, amplification: f64) -> Self {
        self.amplification = amplification;
        self
    }

    /// All phases zero.
    pub fn aligned_zero(element_count: usize, amplification: f64) -> Self {
        Self {
            phases: vec![0.0; element_count],
            amplification,
        }
    }

    pub fn element_count(&self) -> usize {
        self.phases.len()
    }

    /// Diagonal of `Theta`.
    pub fn coefficients(&self) -> Vec<Complex64> {
        self.phases
            .iter()
            .map(|&p| Complex64::from_polar(self.amplification, p))
            .collect()
    }

    /// Rounds every phase to the nearest of `2^bits` uniform levels.
    pub fn quantized(&self, bits: u32) -> Self {
        let levels = (1u64 << bits) as f64;
        let step = TAU / levels;
        Self {
            phases: self
                .phases
                .iter()
                .map(|p| wrap_phase((p / step).round() * step))
                .collect(),
            amplification: self.amplification,
        }
    }
}

pub fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Phases that make every element path `g_ru[n] theta[n] g_br[n]` arrive
/// with phase `direct_phase`, so they add coherently with the direct path.
///
/// Both inputs hold `N` entries.
pub fn phase_align(g_br_col: &[Complex64], g_ru_row: &[Complex64], direct_phase: f64) -> Result<RisConfig> {
    if g_br_col.len() != g_ru_row.len() {
        return Err(Error::dim("phase alignment inputs", g_br_col.len(), g_ru_row.len()));
    }
    let phases = g_br_col
        .iter()
        .zip(g_ru_row.iter())
        .map(|(br, ru)| direct_phase - ru.arg() - br.arg())
        .collect();
    Ok(RisConfig::passive(phases))
}

/// `sum_n g_ru[n] theta[n] g_br[n]`.
pub fn cascade_gain(g_br_col: &[Complex64], g_ru_row: &[Complex64], config: &RisConfig) -> Complex64 {
    g_br_col
        .iter()
        .zip(g_ru_row.iter())
        .zip(config.coefficients())
        .map(|((br, ru), t)| ru * t * br)
        .sum()
}

/// Passive phase design for a matrix cascade.
///
/// Alternates between aligning the element phases to the current
/// transmit/receive directions and re-reading those directions as the
/// dominant singular pair of the resulting cascade. A cascade with a LoS hop
/// converges after the first pass.
pub fn align_cascade(cascade: &Cascade, iterations: usize) -> Result<RisConfig> {
    let br = svd(&cascade.g_br)?;
    let ru = svd(&cascade.g_ru)?;
    if br.max_singular_value() == 0.0 || ru.max_singular_value() == 0.0 {
        return Ok(RisConfig::aligned_zero(cascade.element_count(), 1.0));
    }
    let mut tx_dir = br.right_vectors.column(0).into_owned();
    let mut rx_dir = ru.left_vectors.column(0).into_owned();
    let mut config = RisConfig::aligned_zero(cascade.element_count(), 1.0);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..iterations.max(1) {
        let incident = &cascade.g_br * &tx_dir;
        let outgoing = rx_dir.adjoint() * &cascade.g_ru;
        let candidate = phase_align(incident.as_slice(), outgoing.as_slice(), 0.0)?;
        let eff = cascade_channel(cascade, &candidate);
        let dec = svd(&eff)?;
        let gain = dec.max_singular_value();
        if gain <= best * (1.0 + 1e-12) {
            break;
        }
        best = gain;
        config = candidate;
        tx_dir = dec.right_vectors.column(0).into_owned();
        rx_dir = dec.left_vectors.column(0).into_owned();
    }
    Ok(config)
}

/// Radiated power `trace(Theta (C_in + sigma_r^2 I) Theta^H)` of an active RIS.
pub fn active_power(config: &RisConfig, incident_covariance: &ComplexMatrix, ris_noise_power: f64) -> Result<f64> {
    let n = config.element_count();
    if incident_covariance.shape() != (n, n) {
        return Err(Error::dim(
            "incident covariance",
            format!("{n}x{n}"),
            format!("{}x{}", incident_covariance.nrows(), incident_covariance.ncols()),
        ));
    }
    check_hermitian(incident_covariance)?;
    Ok(config
        .coefficients()
        .iter()
        .enumerate()
        .map(|(i, t)| t.norm_sqr() * (incident_covariance[(i, i)].re + ris_noise_power))
        .sum())
}

/// Amplification that makes the radiated power meet `ris_power_budget`
/// exactly: `rho = sqrt(budget / (trace(C_in) + N sigma_r^2))`.
pub fn solve_amplification(
    phase_config: &RisConfig,
    incident_covariance: &ComplexMatrix,
    ris_noise_power: f64,
    ris_power_budget: f64,
) -> Result<f64> {
    let n = phase_config.element_count();
    if incident_covariance.shape() != (n, n) {
        return Err(Error::dim(
            "incident covariance",
            format!("{n}x{n}"),
            format!("{}x{}", incident_covariance.nrows(), incident_covariance.ncols()),
        ));
    }
    check_hermitian(incident_covariance)?;
    let trace: f64 = incident_covariance.diagonal().iter().map(|z| z.re).sum();
    amplification_for_budget(trace, n, ris_noise_power, ris_power_budget)
}

/// Same as [`solve_amplification`] from the incident trace alone.
pub fn amplification_for_budget(incident_trace: f64, element_count: usize, ris_noise_power: f64, budget: f64) -> Result<f64> {
    if !(budget > 0.0) {
        return Err(Error::InvalidArgument(format!("RIS power budget must be positive, got {budget}")));
    }
    let denom = incident_trace + element_count as f64 * ris_noise_power;
    if !(denom > 0.0) {
        return Err(Error::UndefinedAmplification);
    }
    Ok((budget / denom).sqrt())
}

fn check_hermitian(c: &ComplexMatrix) -> Result<()> {
    let scale = max_abs(c);
    let asym = hermitian_asymmetry(c);
    if asym > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NonHermitian { asymmetry: asym });
    }
    Ok(())
}
