use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beamforming::{CombinerKind, PowerPolicy, PrecoderKind};
use crate::channel::{
    LinkModel, DEFAULT_REFERENCE_LOSS_DB, DEFAULT_WAVELENGTH, LOS_PATH_LOSS_EXPONENT, NLOS_PATH_LOSS_EXPONENT,
};
use crate::error::{Error, Result};
use crate::ris::RisMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Distances {
    pub bs_ris: f64,
    pub ris_user: f64,
    pub bs_user: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModels {
    pub direct: LinkModel,
    pub bs_ris: LinkModel,
    pub ris_user: LinkModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseDbm {
    pub user_dbm: f64,
    pub ris_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossLaw {
    pub reference_loss_db: f64,
    pub los_exponent: f64,
    pub nlos_exponent: f64,
}

impl Default for PathLossLaw {
    fn default() -> Self {
        Self {
            reference_loss_db: DEFAULT_REFERENCE_LOSS_DB,
            los_exponent: LOS_PATH_LOSS_EXPONENT,
            nlos_exponent: NLOS_PATH_LOSS_EXPONENT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DesignChoice {
    pub precoder: PrecoderKind,
    pub combiner: CombinerKind,
    pub power: PowerPolicy,
}

impl DesignChoice {
    pub fn label(&self, mode: RisMode) -> String {
        format!(
            "{}+phase_align+{}+{}+{}",
            to_snake(&self.precoder),
            to_snake(&self.combiner),
            to_snake(&self.power),
            to_snake(&mode)
        )
    }
}

fn to_snake<T: Serialize>(v: &T) -> String {
    // unit enums serialize to their snake_case name
    toml::Value::try_from(v)
        .ok()
        .and_then(|x| x.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// How RIS sites are positioned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlacementKind {
    /// One RIS at the triangle point fixed by the three distances.
    #[default]
    Geometric,
    /// Sites on mutually orthogonal angle offsets from the direct path.
    Planned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Total RIS elements.
    N,
    /// RIS site count.
    J,
    RisNoiseDbm,
    UserNoiseDbm,
    PowerSumW,
}

impl SweepAxis {
    pub fn name(&self) -> String {
        to_snake(self)
    }

    fn integral(&self) -> bool {
        matches!(self, SweepAxis::N | SweepAxis::J)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn default_wavelength() -> f64 {
    DEFAULT_WAVELENGTH
}

fn default_shares() -> Vec<f64> {
    (0..20).map(|i| i as f64 * 0.05).collect()
}

fn default_iterations() -> usize {
    5
}

/// One experiment and the axis it is swept along.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    /// Scenario whose mean rate the summary divides by.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    /// BS antennas.
    pub m: usize,
    /// Total RIS elements, split evenly across sites.
    pub n: usize,
    /// User antennas.
    pub k: usize,
    /// RIS sites.
    pub j: usize,
    pub trials: usize,
    pub seed: u64,
    pub power_sum_w: f64,
    pub ris_mode: RisMode,
    #[serde(default)]
    pub placement: PlacementKind,
    #[serde(default = "default_wavelength")]
    pub wavelength_m: f64,
    /// Candidate fractions of `power_sum_w` given to the active RIS; the
    /// best one per trial is kept. Ignored for passive surfaces.
    #[serde(default = "default_shares")]
    pub ris_power_shares: Vec<f64>,
    /// Passes of the alternating phase design on matrix cascades.
    #[serde(default = "default_iterations")]
    pub alternating_iterations: usize,
    pub distances: Distances,
    pub channels: ChannelModels,
    pub noise: NoiseDbm,
    #[serde(default)]
    pub path_loss: PathLossLaw,
    #[serde(default)]
    pub design: DesignChoice,
    pub sweep: Sweep,
}

/// On-disk scenario file: one or more `[[scenario]]` tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(rename = "scenario")]
    pub scenarios: Vec<ScenarioConfig>,
    /// Free-form run metadata, ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<toml::Table>,
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Config("scenario file has no [[scenario]] tables".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &self.scenarios {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Config(format!("duplicate scenario id {:?}", s.id)));
            }
            s.validate()?;
        }
        for s in &self.scenarios {
            if let Some(b) = &s.baseline {
                let base = self
                    .scenarios
                    .iter()
                    .find(|x| &x.id == b)
                    .ok_or_else(|| Error::Config(format!("scenario {:?} names unknown baseline {b:?}", s.id)))?;
                if base.sweep.axis != s.sweep.axis || base.sweep.values != s.sweep.values {
                    return Err(Error::SweepMismatch {
                        left: format!("{} ({})", s.id, s.sweep.axis.name()),
                        right: format!("{} ({})", base.id, base.sweep.axis.name()),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ScenarioConfig> {
        self.scenarios.iter().find(|s| s.id == id)
    }

    /// Replaces every scenario's seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        for s in &mut self.scenarios {
            s.seed = seed;
        }
        self
    }
}

/// Parameters of one sweep point after the swept value is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointParams {
    pub n: usize,
    pub j: usize,
    pub user_dbm: f64,
    pub ris_dbm: f64,
    pub power_sum_w: f64,
}

impl ScenarioConfig {
    /// First 16 hex digits of SHA-256 over the canonical TOML form, which
    /// includes the seed.
    pub fn fingerprint(&self) -> String {
        let text = toml::to_string(self).unwrap_or_default();
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }

    pub fn point(&self, sweep_value: f64) -> PointParams {
        let mut p = PointParams {
            n: self.n,
            j: self.j,
            user_dbm: self.noise.user_dbm,
            ris_dbm: self.noise.ris_dbm,
            power_sum_w: self.power_sum_w,
        };
        match self.sweep.axis {
            SweepAxis::N => p.n = sweep_value as usize,
            SweepAxis::J => p.j = sweep_value as usize,
            SweepAxis::RisNoiseDbm => p.ris_dbm = sweep_value,
            SweepAxis::UserNoiseDbm => p.user_dbm = sweep_value,
            SweepAxis::PowerSumW => p.power_sum_w = sweep_value,
        }
        p
    }

    /// Rejects inconsistent settings before any channel is drawn.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("scenario {:?}: {msg}", self.id)));
        if self.id.is_empty() {
            return Err(Error::Config("scenario id must not be empty".into()));
        }
        if self.m == 0 || self.k == 0 {
            return bad("m and k must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if !(self.wavelength_m > 0.0) {
            return bad("wavelength_m must be positive".into());
        }
        let d = &self.distances;
        if !(d.bs_ris > 0.0 && d.ris_user > 0.0 && d.bs_user > 0.0) {
            return bad("distances must be positive".into());
        }
        if !self.noise.user_dbm.is_finite() || !self.noise.ris_dbm.is_finite() {
            return bad("noise powers must be finite".into());
        }
        if self.sweep.values.is_empty() {
            return bad("sweep has no values".into());
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return bad("sweep values must be finite".into());
        }
        if self.sweep.axis.integral() && self.sweep.values.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
            return bad(format!("{} sweep values must be non-negative integers", self.sweep.axis.name()));
        }
        if self.ris_mode == RisMode::Active {
            if self.ris_power_shares.is_empty() {
                return bad("ris_power_shares must not be empty".into());
            }
            if self.ris_power_shares.iter().any(|s| !(0.0..1.0).contains(s)) {
                return bad("ris_power_shares must lie in [0, 1)".into());
            }
        }
        if self.channels.direct == LinkModel::Rayleigh && self.design.precoder == PrecoderKind::NullSpace {
            return bad("null_space precoding needs a blocked or LoS direct path".into());
        }
        if self.design.precoder == PrecoderKind::NullSpace
            && self.channels.bs_ris == LinkModel::Rayleigh
            && self.channels.ris_user == LinkModel::Rayleigh
        {
            return bad("null_space precoding needs a LoS hop in every cascade; use eigenmode".into());
        }
        if self.design.precoder == PrecoderKind::Eigenmode && self.design.combiner != CombinerKind::MatchedFilter {
            return bad("eigenmode precoding pairs with the matched_filter combiner".into());
        }
        if self.placement == PlacementKind::Planned && self.channels.direct == LinkModel::Rayleigh {
            return bad("planned placement needs a blocked or LoS direct path".into());
        }
        if self.channels.bs_ris == LinkModel::Blocked || self.channels.ris_user == LinkModel::Blocked {
            return bad("RIS hops cannot be blocked; set j = 0 instead".into());
        }
        for v in &self.sweep.values {
            let p = self.point(*v);
            if !(p.power_sum_w > 0.0) {
                return bad("power_sum_w must be positive".into());
            }
            if p.j > self.k {
                return bad(format!("{} RIS sites exceed the {} user antennas", p.j, self.k));
            }
            if p.j > 0 && p.n < p.j {
                return bad(format!("{} elements cannot be split across {} sites", p.n, p.j));
            }
            if self.placement == PlacementKind::Geometric && p.j > 1 {
                return bad("geometric placement supports at most one RIS; use planned".into());
            }
        }
        if self.placement == PlacementKind::Geometric && self.j <= 1 {
            let (a, b, c) = (d.bs_ris, d.ris_user, d.bs_user);
            if c > a + b || a > b + c || b > a + c {
                return bad("distances violate the triangle inequality".into());
            }
        }
        Ok(())
    }
}
