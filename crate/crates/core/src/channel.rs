//! Channel synthesis from ULA steering vectors and log-distance link budgets.
//!
//! Dimension convention: the direct channel `H` is `K x M`, the BS-to-RIS link
//! `G_BR` is `N x M`, the RIS-to-user link `G_RU` is `K x N`, and the effective
//! channel is `H + sum_j G_RU^j Theta^j G_BR^j`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;
use crate::ris::RisConfig;
use crate::rng;

/// 3 GHz carrier.
pub const DEFAULT_WAVELENGTH: f64 = 0.1;
/// Path loss at the 1 m reference distance.
pub const DEFAULT_REFERENCE_LOSS_DB: f64 = 30.0;
pub const LOS_PATH_LOSS_EXPONENT: f64 = 2.0;
pub const NLOS_PATH_LOSS_EXPONENT: f64 = 2.8;

/// Uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub element_count: usize,
    /// Meters.
    pub element_spacing: f64,
    /// Meters.
    pub carrier_wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(element_count: usize, element_spacing: f64, carrier_wavelength: f64) -> Result<Self> {
        if element_count == 0 {
            return Err(Error::InvalidArgument("array needs at least one element".into()));
        }
        if !(element_spacing > 0.0) || !(carrier_wavelength > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "element spacing and wavelength must be positive (got {element_spacing}, {carrier_wavelength})"
            )));
        }
        Ok(Self {
            element_count,
            element_spacing,
            carrier_wavelength,
        })
    }

    /// Half-wavelength spacing at the given carrier.
    pub fn half_wavelength(element_count: usize, carrier_wavelength: f64) -> Self {
        Self {
            element_count,
            element_spacing: carrier_wavelength / 2.0,
            carrier_wavelength,
        }
    }

    /// Phase progression per element per unit of `cos(angle)`.
    pub fn spacing_in_wavelengths(&self) -> f64 {
        self.element_spacing / self.carrier_wavelength
    }
}

/// Log-distance path loss: `PL(d) = reference_loss_db + 10 alpha log10(d / 1 m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub distance: f64,
    pub path_loss_exponent: f64,
    pub reference_loss_db: f64,
}

impl LinkBudget {
    pub fn new(distance: f64, path_loss_exponent: f64, reference_loss_db: f64) -> Result<Self> {
        if !(distance > 0.0) || !distance.is_finite() {
            return Err(Error::InvalidArgument(format!("link distance must be positive, got {distance}")));
        }
        Ok(Self {
            distance,
            path_loss_exponent,
            reference_loss_db,
        })
    }

    pub fn los(distance: f64) -> Self {
        Self {
            distance,
            path_loss_exponent: LOS_PATH_LOSS_EXPONENT,
            reference_loss_db: DEFAULT_REFERENCE_LOSS_DB,
        }
    }

    pub fn nlos(distance: f64) -> Self {
        Self {
            distance,
            path_loss_exponent: NLOS_PATH_LOSS_EXPONENT,
            reference_loss_db: DEFAULT_REFERENCE_LOSS_DB,
        }
    }

    pub fn path_loss_db(&self) -> f64 {
        self.reference_loss_db + 10.0 * self.path_loss_exponent * self.distance.log10()
    }

    /// Amplitude-linear gain `10^(-PL/20)`.
    pub fn amplitude_gain(&self) -> f64 {
        10f64.powf(-self.path_loss_db() / 20.0)
    }
}

/// Small-scale model of one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkModel {
    Blocked,
    Los,
    Rayleigh,
}

impl fmt::Display for LinkModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkModel::Blocked => "blocked",
            LinkModel::Los => "los",
            LinkModel::Rayleigh => "rayleigh",
        })
    }
}

/// One BS -> RIS -> user path.
#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    /// `N_j x M`.
    pub g_br: ComplexMatrix,
    /// `K x N_j`.
    pub g_ru: ComplexMatrix,
}

impl Cascade {
    pub fn element_count(&self) -> usize {
        self.g_br.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkTag {
    pub link: String,
    pub model: LinkModel,
}

/// One channel realization with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `K x M`.
    pub direct: ComplexMatrix,
    pub cascades: Vec<Cascade>,
    pub seed: u64,
    pub model_tags: Vec<LinkTag>,
}

impl ChannelSet {
    pub fn new(direct: ComplexMatrix, cascades: Vec<Cascade>, seed: u64, model_tags: Vec<LinkTag>) -> Result<Self> {
        let (k, m) = direct.shape();
        for (j, c) in cascades.iter().enumerate() {
            let n = c.g_br.nrows();
            if c.g_br.ncols() != m {
                return Err(Error::dim(format!("cascade {j} G_BR"), format!("{n}x{m}"), shape(&c.g_br)));
            }
            if c.g_ru.shape() != (k, n) {
                return Err(Error::dim(format!("cascade {j} G_RU"), format!("{k}x{n}"), shape(&c.g_ru)));
            }
        }
        Ok(Self {
            direct,
            cascades,
            seed,
            model_tags,
        })
    }

    pub fn user_antennas(&self) -> usize {
        self.direct.nrows()
    }

    pub fn bs_antennas(&self) -> usize {
        self.direct.ncols()
    }
}

fn shape(a: &ComplexMatrix) -> String {
    format!("{}x{}", a.nrows(), a.ncols())
}

/// ULA response with entries `exp(i 2 pi (d / lambda) m cos(angle))`.
pub fn steering_vector(geometry: &ArrayGeometry, angle: f64) -> ComplexMatrix {
    debug_assert!((-1e-12..=PI + 1e-12).contains(&angle), "angle {angle} outside [0, pi]");
    let step = 2.0 * PI * geometry.spacing_in_wavelengths() * angle.cos();
    ComplexMatrix::from_fn(geometry.element_count, 1, |m, _| Complex64::from_polar(1.0, step * m as f64))
}

/// Rank-one far-field channel `g b(aoa) a(aod)^H`, `rx x tx`.
pub fn los_channel(tx: &ArrayGeometry, rx: &ArrayGeometry, aod: f64, aoa: f64, budget: &LinkBudget) -> ComplexMatrix {
    let a = steering_vector(tx, aod);
    let b = steering_vector(rx, aoa);
    (b * a.adjoint()).scale(budget.amplitude_gain())
}

/// iid circularly-symmetric Gaussian entries with variance `g^2`.
pub fn rayleigh_channel(rows: usize, cols: usize, budget: &LinkBudget, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng::complex_gaussian_from(&mut rng, rows, cols, budget.amplitude_gain())
}

pub fn blocked_channel(rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(rows, cols)
}

/// `G_RU diag(theta) G_BR` for one cascade.
pub fn cascade_channel(cascade: &Cascade, config: &RisConfig) -> ComplexMatrix {
    let mut scaled = cascade.g_ru.clone();
    for (n, coeff) in config.coefficients().into_iter().enumerate() {
        scaled.column_mut(n).scale_mut_complex(coeff);
    }
    scaled * &cascade.g_br
}

/// `H + sum_j G_RU^j Theta^j G_BR^j`.
pub fn composite_channel(set: &ChannelSet, ris_configs: &[RisConfig]) -> Result<ComplexMatrix> {
    if ris_configs.len() != set.cascades.len() {
        return Err(Error::dim("RIS configurations", set.cascades.len(), ris_configs.len()));
    }
    let mut total = set.direct.clone();
    for (j, (cascade, config)) in set.cascades.iter().zip(ris_configs).enumerate() {
        if config.element_count() != cascade.element_count() {
            return Err(Error::dim(
                format!("phase vector of cascade {j}"),
                cascade.element_count(),
                config.element_count(),
            ));
        }
        if config.amplification == 0.0 {
            continue;
        }
        total += cascade_channel(cascade, config);
    }
    Ok(total)
}

/// Column scaling by a complex factor, missing from nalgebra's view API.
trait ScaleComplex {
    fn scale_mut_complex(&mut self, factor: Complex64);
}

impl<S: nalgebra::RawStorageMut<Complex64, nalgebra::Dyn, nalgebra::U1>> ScaleComplex
    for nalgebra::Matrix<Complex64, nalgebra::Dyn, nalgebra::U1, S>
{
    fn scale_mut_complex(&mut self, factor: Complex64) {
        self.iter_mut().for_each(|z| *z *= factor);
    }
}
