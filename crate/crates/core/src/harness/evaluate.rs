//! One Monte Carlo trial: draw channels, design the RIS and the link, and
//! report the achievable rate.
//!
//! For an active RIS the power-sum budget is shared between the BS and the
//! surfaces. Each candidate share is solved by a fixed point: the
//! amplification fixes the channel, the channel fixes the precoders and
//! stream powers, and those fix the power incident on each surface and hence
//! the amplification that exactly spends its budget. The best share wins.

use std::f64::consts::FRAC_PI_2;

use crate::beamforming::{allocate_stream_power, design_link, stream_gains, zero_forcing_combiner, CombinerKind, LinkDesign, PrecoderKind};
use crate::channel::{
    los_channel, rayleigh_channel, steering_vector, ArrayGeometry, Cascade, ChannelSet, LinkBudget, LinkModel, LinkTag,
};
use crate::error::{Error, Result};
use crate::numerics::{numerical_rank, ComplexMatrix, DEFAULT_RANK_TOL};
use crate::placement::{plan_sites, PlanRequest, RIS_DEPARTURE_ANGLE, RIS_INCIDENCE_ANGLE};
use crate::rate::{achievable_rate, dbm_to_watts, NoiseModel, RateResult};
use crate::ris::{align_cascade, amplification_for_budget, RisMode};
use crate::rng::{tag_hash, trial_seed};

use super::config::{PlacementKind, PointParams, ScenarioConfig};

const FIXED_POINT_ITERATIONS: usize = 30;
const FIXED_POINT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub result: RateResult,
    pub seed: u64,
    pub stream_count: usize,
    /// Fraction of the power sum given to the RIS sites (0 for passive).
    pub ris_share: f64,
    /// Per-site amplification actually used.
    pub amplification: Vec<f64>,
}

/// Channels of one trial plus, per cascade, a factor `B` with
/// `B^H B = G_BR^H G_BR` for cheap incident-power evaluation.
#[derive(Debug, Clone)]
pub struct Realization {
    pub set: ChannelSet,
    pub incident_factors: Vec<ComplexMatrix>,
}

struct Angles {
    direct_aod: f64,
    direct_aoa: f64,
    sites: Vec<SiteAngles>,
}

struct SiteAngles {
    aod: f64,
    aoa: f64,
    incidence: f64,
    departure: f64,
    elements: usize,
}

fn budget(cfg: &ScenarioConfig, model: LinkModel, distance: f64) -> Result<LinkBudget> {
    let exponent = match model {
        LinkModel::Rayleigh => cfg.path_loss.nlos_exponent,
        _ => cfg.path_loss.los_exponent,
    };
    LinkBudget::new(distance, exponent, cfg.path_loss.reference_loss_db)
}

fn angles(cfg: &ScenarioConfig, point: &PointParams) -> Result<Angles> {
    let d = &cfg.distances;
    match cfg.placement {
        PlacementKind::Geometric => {
            // BS at the origin, user on the x axis, both arrays along y;
            // the RIS array lies along x.
            let x = (d.bs_ris * d.bs_ris - d.ris_user * d.ris_user + d.bs_user * d.bs_user) / (2.0 * d.bs_user);
            let y = (d.bs_ris * d.bs_ris - x * x).max(0.0).sqrt();
            let sites = (0..point.j)
                .map(|_| SiteAngles {
                    aod: (y / d.bs_ris).clamp(-1.0, 1.0).acos(),
                    aoa: (y / d.ris_user).clamp(-1.0, 1.0).acos(),
                    incidence: (-x / d.bs_ris).clamp(-1.0, 1.0).acos(),
                    departure: ((d.bs_user - x) / d.ris_user).clamp(-1.0, 1.0).acos(),
                    elements: point.n,
                })
                .collect();
            Ok(Angles {
                direct_aod: FRAC_PI_2,
                direct_aoa: FRAC_PI_2,
                sites,
            })
        }
        PlacementKind::Planned => {
            let request = plan_request(cfg, point);
            let plan = plan_sites(&request, point.j)?;
            Ok(Angles {
                direct_aod: request.direct_aod,
                direct_aoa: request.direct_aoa,
                sites: plan
                    .sites
                    .iter()
                    .map(|s| SiteAngles {
                        aod: s.aod_from_bs,
                        aoa: s.aoa_at_user,
                        incidence: RIS_INCIDENCE_ANGLE,
                        departure: RIS_DEPARTURE_ANGLE,
                        elements: s.element_count,
                    })
                    .collect(),
            })
        }
    }
}

/// Placement request implied by a scenario at one sweep point.
pub fn plan_request(cfg: &ScenarioConfig, point: &PointParams) -> PlanRequest {
    PlanRequest {
        bs: ArrayGeometry::half_wavelength(cfg.m, cfg.wavelength_m),
        user: ArrayGeometry::half_wavelength(cfg.k, cfg.wavelength_m),
        direct_rank: usize::from(cfg.channels.direct == LinkModel::Los),
        direct_aod: FRAC_PI_2,
        direct_aoa: FRAC_PI_2,
        bs_ris_distance: cfg.distances.bs_ris,
        ris_user_distance: cfg.distances.ris_user,
        bs_user_distance: cfg.distances.bs_user,
        total_elements: point.n,
    }
}

/// Draws every link of one trial. Each random link has its own stream keyed
/// by `seed` and the link tag.
pub fn realize(cfg: &ScenarioConfig, point: &PointParams, seed: u64) -> Result<Realization> {
    let bs = ArrayGeometry::half_wavelength(cfg.m, cfg.wavelength_m);
    let user = ArrayGeometry::half_wavelength(cfg.k, cfg.wavelength_m);
    let geo = angles(cfg, point)?;
    let models = cfg.channels;

    let direct_budget = budget(cfg, models.direct, cfg.distances.bs_user)?;
    let direct = match models.direct {
        LinkModel::Blocked => ComplexMatrix::zeros(cfg.k, cfg.m),
        LinkModel::Los => los_channel(&bs, &user, geo.direct_aod, geo.direct_aoa, &direct_budget),
        LinkModel::Rayleigh => rayleigh_channel(cfg.k, cfg.m, &direct_budget, seed ^ tag_hash("h")),
    };
    let mut tags = vec![LinkTag {
        link: "h".into(),
        model: models.direct,
    }];

    let br_budget = budget(cfg, models.bs_ris, cfg.distances.bs_ris)?;
    let ru_budget = budget(cfg, models.ris_user, cfg.distances.ris_user)?;
    let mut cascades = Vec::with_capacity(geo.sites.len());
    let mut factors = Vec::with_capacity(geo.sites.len());
    for (j, site) in geo.sites.iter().enumerate() {
        let ris = ArrayGeometry::half_wavelength(site.elements, cfg.wavelength_m);
        let br_tag = format!("g_br/{j}");
        let ru_tag = format!("g_ru/{j}");
        let (g_br, factor) = match models.bs_ris {
            LinkModel::Rayleigh => {
                let g = rayleigh_channel(site.elements, cfg.m, &br_budget, seed ^ tag_hash(&br_tag));
                let f = gram_factor(&g);
                (g, f)
            }
            _ => {
                let g = los_channel(&bs, &ris, site.aod, site.incidence, &br_budget);
                let row = steering_vector(&bs, site.aod)
                    .adjoint()
                    .scale(br_budget.amplitude_gain() * (site.elements as f64).sqrt());
                (g, row)
            }
        };
        let g_ru = match models.ris_user {
            LinkModel::Rayleigh => rayleigh_channel(cfg.k, site.elements, &ru_budget, seed ^ tag_hash(&ru_tag)),
            _ => los_channel(&ris, &user, site.departure, site.aoa, &ru_budget),
        };
        tags.push(LinkTag {
            link: br_tag,
            model: models.bs_ris,
        });
        tags.push(LinkTag {
            link: ru_tag,
            model: models.ris_user,
        });
        cascades.push(Cascade { g_br, g_ru });
        factors.push(factor);
    }
    Ok(Realization {
        set: ChannelSet::new(direct, cascades, seed, tags)?,
        incident_factors: factors,
    })
}

/// Smallest convenient `B` with `B^H B = G^H G`.
fn gram_factor(g: &ComplexMatrix) -> ComplexMatrix {
    if g.nrows() <= g.ncols() {
        return g.clone();
    }
    let gram = g.adjoint() * g;
    match gram.cholesky() {
        Some(c) => c.unpack().adjoint(),
        None => g.clone(),
    }
}

/// Quantities reused across every amplification candidate of one trial.
struct Prepared<'a> {
    cfg: &'a ScenarioConfig,
    direct: &'a ComplexMatrix,
    /// `G_RU Theta G_BR` at unit amplification.
    unit_cascades: Vec<ComplexMatrix>,
    /// `G_RU G_RU^H` (unit-modulus phases cancel).
    ru_grams: Vec<ComplexMatrix>,
    incident_factors: &'a [ComplexMatrix],
    elements: Vec<usize>,
    noise: NoiseModel,
}

struct Evaluated {
    rate: RateResult,
    design: LinkDesign,
    amplification: Vec<f64>,
}

impl Prepared<'_> {
    fn channel(&self, rho: &[f64]) -> ComplexMatrix {
        let mut h = self.direct.clone();
        for (c, r) in self.unit_cascades.iter().zip(rho) {
            if *r != 0.0 {
                h += c.scale(*r);
            }
        }
        h
    }

    fn components(&self, rho: &[f64]) -> Vec<ComplexMatrix> {
        std::iter::once(self.direct.clone())
            .chain(self.unit_cascades.iter().zip(rho).map(|(c, r)| c.scale(*r)))
            .collect()
    }

    fn covariance(&self, rho: &[f64], noise: &NoiseModel) -> ComplexMatrix {
        let k = self.direct.nrows();
        let mut r = ComplexMatrix::identity(k, k).scale(noise.user_noise);
        if noise.ris_noise > 0.0 {
            for (g, a) in self.ru_grams.iter().zip(rho) {
                r += g.scale(noise.ris_noise * a * a);
            }
        }
        r
    }

    fn incident_trace(&self, j: usize, design: &LinkDesign) -> f64 {
        let b = &self.incident_factors[j] * design.powered_precoder();
        b.norm_squared()
    }

    fn design(&self, rho: &[f64], noise: &NoiseModel, p_tx: f64) -> Result<(ComplexMatrix, ComplexMatrix, LinkDesign)> {
        let h = self.channel(rho);
        let r = self.covariance(rho, noise);
        let d = self.cfg.design;
        let design = design_link(d.precoder, d.combiner, &h, &self.components(rho), &r)?;
        let gains = stream_gains(&design, &h, &r)?;
        let design = allocate_stream_power(&design, &gains, p_tx, d.power)?;
        Ok((h, r, design))
    }

    fn zero_rate(&self, rho: Vec<f64>) -> Result<Evaluated> {
        let (k, m) = self.direct.shape();
        Ok(Evaluated {
            rate: RateResult {
                rate: 0.0,
                effective_rank: 0,
                per_stream_snr_db: Vec::new(),
                config_fingerprint: String::new(),
            },
            design: LinkDesign {
                precoder: ComplexMatrix::zeros(m, 0),
                combiner: ComplexMatrix::zeros(0, k),
                stream_count: 0,
                stream_powers: Vec::new(),
            },
            amplification: rho,
        })
    }

    /// Fixed amplification, full `p_tx` at the BS.
    fn evaluate_fixed(&self, rho: Vec<f64>, noise: &NoiseModel, p_tx: f64) -> Result<Evaluated> {
        if numerical_rank(&self.channel(&rho), DEFAULT_RANK_TOL)? == 0 {
            return self.zero_rate(rho);
        }
        let (h, r, design) = self.design(&rho, noise, p_tx)?;
        Ok(Evaluated {
            rate: achievable_rate(&h, &design, &r)?,
            design,
            amplification: rho,
        })
    }

    /// Active RIS with `share` of the power sum split evenly across sites.
    fn evaluate_share(&self, share: f64, power_sum: f64) -> Result<Evaluated> {
        let sites = self.unit_cascades.len();
        if share == 0.0 || sites == 0 {
            return self.evaluate_fixed(vec![0.0; sites], &self.noise, power_sum);
        }
        let p_tx = (1.0 - share) * power_sum;
        let per_site = share * power_sum / sites as f64;
        let sigma_r = self.noise.ris_noise;
        let solve = |design: &LinkDesign| -> Result<Vec<f64>> {
            (0..sites)
                .map(|j| amplification_for_budget(self.incident_trace(j, design), self.elements[j], sigma_r, per_site))
                .collect()
        };

        let unit = vec![1.0; sites];
        let (_, _, start) = self.design(&unit, &self.noise, p_tx)?;
        let mut rho = solve(&start)?;
        let mut design = start;
        for _ in 0..FIXED_POINT_ITERATIONS {
            let (_, _, next) = self.design(&rho, &self.noise, p_tx)?;
            let updated = solve(&next)?;
            design = next;
            let change = rho
                .iter()
                .zip(&updated)
                .map(|(a, b)| (a - b).abs() / a.max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            rho = updated;
            if change < FIXED_POINT_TOL {
                break;
            }
        }
        // rho now spends each budget exactly for the final design
        let h = self.channel(&rho);
        let r = self.covariance(&rho, &self.noise);
        if self.cfg.design.combiner == CombinerKind::ZeroForcing && self.cfg.design.precoder != PrecoderKind::Eigenmode {
            design.combiner = zero_forcing_combiner(&h, &design.precoder)?;
        }
        Ok(Evaluated {
            rate: achievable_rate(&h, &design, &r)?,
            design,
            amplification: rho,
        })
    }
}

/// Runs one trial of `cfg` at sweep point `sweep_index`.
pub fn evaluate_trial(cfg: &ScenarioConfig, sweep_index: usize, trial_index: usize) -> Result<TrialOutcome> {
    let value = *cfg
        .sweep
        .values
        .get(sweep_index)
        .ok_or_else(|| Error::InvalidArgument(format!("sweep index {sweep_index} out of range")))?;
    let point = cfg.point(value);
    let seed = trial_seed(cfg.seed, sweep_index, trial_index);
    let real = realize(cfg, &point, seed)?;
    evaluate_realization(cfg, &point, &real, seed)
}

pub fn evaluate_realization(cfg: &ScenarioConfig, point: &PointParams, real: &Realization, seed: u64) -> Result<TrialOutcome> {
    let set = &real.set;
    let phases = set
        .cascades
        .iter()
        .map(|c| align_cascade(c, cfg.alternating_iterations))
        .collect::<Result<Vec<_>>>()?;
    let unit_cascades = set
        .cascades
        .iter()
        .zip(&phases)
        .map(|(c, p)| crate::channel::cascade_channel(c, p))
        .collect();
    let ru_grams = set.cascades.iter().map(|c| &c.g_ru * c.g_ru.adjoint()).collect();
    let noise = NoiseModel {
        user_noise: dbm_to_watts(point.user_dbm),
        ris_noise: dbm_to_watts(point.ris_dbm),
    };
    let prepared = Prepared {
        cfg,
        direct: &set.direct,
        unit_cascades,
        ru_grams,
        incident_factors: &real.incident_factors,
        elements: set.cascades.iter().map(|c| c.element_count()).collect(),
        noise,
    };

    let sites = set.cascades.len();
    let (best, share) = match cfg.ris_mode {
        RisMode::Passive => (
            prepared.evaluate_fixed(vec![1.0; sites], &noise.without_ris_noise(), point.power_sum_w)?,
            0.0,
        ),
        RisMode::Active => {
            let shares: &[f64] = if sites == 0 { &[0.0] } else { &cfg.ris_power_shares };
            let mut best: Option<(Evaluated, f64)> = None;
            for &s in shares {
                let e = prepared.evaluate_share(s, point.power_sum_w)?;
                // strict: ties keep the earlier share
                if best.as_ref().is_none_or(|(b, _)| e.rate.rate > b.rate.rate) {
                    best = Some((e, s));
                }
            }
            best.expect("share list is non-empty")
        }
    };
    let mut result = best.rate;
    result.config_fingerprint = cfg.fingerprint();
    Ok(TrialOutcome {
        result,
        seed,
        stream_count: best.design.stream_count,
        ris_share: share,
        amplification: best.amplification,
    })
}

/// Passive, phase-aligned composite channel of one trial; the structural
/// rank does not depend on amplification.
pub fn aligned_composite(cfg: &ScenarioConfig, sweep_index: usize, trial_index: usize) -> Result<ComplexMatrix> {
    let value = *cfg
        .sweep
        .values
        .get(sweep_index)
        .ok_or_else(|| Error::InvalidArgument(format!("sweep index {sweep_index} out of range")))?;
    let point = cfg.point(value);
    let real = realize(cfg, &point, trial_seed(cfg.seed, sweep_index, trial_index))?;
    let phases = real
        .set
        .cascades
        .iter()
        .map(|c| align_cascade(c, cfg.alternating_iterations))
        .collect::<Result<Vec<_>>>()?;
    crate::channel::composite_channel(&real.set, &phases)
}
