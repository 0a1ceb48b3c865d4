//! Built-in scenario sets for the four reproduction figures.

use crate::beamforming::{CombinerKind, PowerPolicy, PrecoderKind};
use crate::channel::LinkModel;
use crate::error::{Error, Result};
use crate::ris::RisMode;

use super::config::{
    ChannelModels, DesignChoice, Distances, NoiseDbm, PathLossLaw, PlacementKind, ScenarioConfig, ScenarioFile, Sweep,
    SweepAxis,
};

pub const PRESET_NAMES: [&str; 4] = ["fig4", "fig5", "fig6a", "fig6b"];

pub const DEFAULT_SEED: u64 = 20240917;
pub const DEFAULT_POWER_SUM_W: f64 = 1.0;
pub const RAYLEIGH_TRIALS: usize = 200;

const DISTANCES: Distances = Distances {
    bs_ris: 82.0,
    ris_user: 28.0,
    bs_user: 100.0,
};

const NOISE: NoiseDbm = NoiseDbm {
    user_dbm: -70.0,
    ris_dbm: -90.0,
};

const SINGLE_RIS_N: [f64; 4] = [256.0, 512.0, 768.0, 1024.0];

fn base(id: String, m: usize, n: usize, j: usize, channels: ChannelModels, sweep: Sweep) -> ScenarioConfig {
    let random = j > 0 && (channels.bs_ris == LinkModel::Rayleigh || channels.ris_user == LinkModel::Rayleigh);
    ScenarioConfig {
        id,
        baseline: None,
        m,
        n,
        k: 4,
        j,
        trials: if random { RAYLEIGH_TRIALS } else { 1 },
        seed: DEFAULT_SEED,
        power_sum_w: DEFAULT_POWER_SUM_W,
        ris_mode: RisMode::Active,
        placement: PlacementKind::Geometric,
        wavelength_m: crate::channel::DEFAULT_WAVELENGTH,
        ris_power_shares: (0..20).map(|i| i as f64 * 0.05).collect(),
        alternating_iterations: 5,
        distances: DISTANCES,
        channels,
        noise: NOISE,
        path_loss: PathLossLaw::default(),
        design: DesignChoice::default(),
        sweep,
    }
}

fn models(direct: LinkModel, bs_ris: LinkModel, ris_user: LinkModel) -> ChannelModels {
    ChannelModels {
        direct,
        bs_ris,
        ris_user,
    }
}

fn n_sweep() -> Sweep {
    Sweep {
        axis: SweepAxis::N,
        values: SINGLE_RIS_N.to_vec(),
    }
}

fn noise_sweep(axis: SweepAxis) -> Sweep {
    Sweep {
        axis,
        values: (0..=12).map(|i| -120.0 + 5.0 * i as f64).collect(),
    }
}

/// Rank-one direct path, with and without one RIS, at M = 64 and 128.
fn fig4() -> Vec<ScenarioConfig> {
    use LinkModel::*;
    let mut out = Vec::new();
    for m in [64, 128] {
        let no_ris = format!("fig4_m{m}_no_ris");
        out.push(base(no_ris.clone(), m, 1024, 0, models(Los, Los, Los), n_sweep()));
        for (tag, ru) in [("all_los", Los), ("los_rayleigh", Rayleigh)] {
            let mut s = base(format!("fig4_m{m}_{tag}"), m, 1024, 1, models(Los, Los, ru), n_sweep());
            s.baseline = Some(no_ris.clone());
            out.push(s);
        }
    }
    out
}

/// Blocked direct path: no RIS, one all-LoS RIS, one Rayleigh RIS.
fn fig5() -> Vec<ScenarioConfig> {
    use LinkModel::*;
    let no_ris = "fig5_no_ris".to_string();
    let mut out = vec![base(no_ris.clone(), 64, 1024, 0, models(Blocked, Los, Los), n_sweep())];
    let mut los = base("fig5_all_los".into(), 64, 1024, 1, models(Blocked, Los, Los), n_sweep());
    los.baseline = Some(no_ris.clone());
    out.push(los);
    let mut ray = base("fig5_rayleigh".into(), 64, 1024, 1, models(Blocked, Rayleigh, Rayleigh), n_sweep());
    ray.baseline = Some(no_ris);
    ray.design = DesignChoice {
        precoder: PrecoderKind::Eigenmode,
        combiner: CombinerKind::MatchedFilter,
        power: PowerPolicy::WaterFilling,
    };
    out.push(ray);
    out
}

/// Distributed all-LoS RIS sites, J = 0..4, swept over one noise power.
fn fig6(prefix: &str, axis: SweepAxis) -> Vec<ScenarioConfig> {
    use LinkModel::*;
    let no_ris = format!("{prefix}_j0");
    (0..=4)
        .map(|j| {
            let mut s = base(format!("{prefix}_j{j}"), 128, 600, j, models(Los, Los, Los), noise_sweep(axis));
            s.placement = PlacementKind::Planned;
            if j > 0 {
                s.baseline = Some(no_ris.clone());
            }
            s
        })
        .collect()
}

pub fn preset(name: &str) -> Result<ScenarioFile> {
    let scenarios = match name {
        "fig4" => fig4(),
        "fig5" => fig5(),
        "fig6a" => fig6("fig6a", SweepAxis::RisNoiseDbm),
        "fig6b" => fig6("fig6b", SweepAxis::UserNoiseDbm),
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    let file = ScenarioFile {
        scenarios,
        provenance: None,
    };
    file.validate()?;
    Ok(file)
}

/// Modelling settings not fixed by the figure definitions, echoed with every run.
pub fn assumed_defaults() -> Vec<(&'static str, String)> {
    let law = PathLossLaw::default();
    vec![
        (
            "path_loss_law",
            format!(
                "PL(d) = {} dB + 10 alpha log10(d / 1 m), alpha_los = {}, alpha_nlos = {}",
                law.reference_loss_db, law.los_exponent, law.nlos_exponent
            ),
        ),
        ("power_sum_w", format!("{DEFAULT_POWER_SUM_W}")),
        ("wavelength_m", format!("{}", crate::channel::DEFAULT_WAVELENGTH)),
        ("element_spacing", "half wavelength".into()),
        ("ris_mode", "active, RIS share of power_sum chosen per trial from 0, 0.05, ..., 0.95".into()),
        ("fig4_rayleigh_hop", "ris_user (bs_ris stays LoS)".into()),
        ("fig5_bs_antennas", "64".into()),
    ]
}
