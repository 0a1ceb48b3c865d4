//! Geometric placement of distributed RIS sites.
//!
//! Two ULA steering vectors are orthogonal when their direction cosines
//! differ by a nonzero multiple of `lambda / (M d)` that is not itself a
//! multiple of `lambda / d`. Each site is put on such an offset from the direct
//! path on both the BS side and the user side, so every site adds one
//! independent stream.

use std::f64::consts::FRAC_PI_3;

use serde::{Deserialize, Serialize};

use crate::channel::{los_channel, ArrayGeometry, Cascade, ChannelSet, LinkBudget, LinkModel, LinkTag};
use crate::error::{Error, Result};
use crate::numerics::{svd, ComplexMatrix, DEFAULT_RANK_TOL};
use crate::ris::align_cascade;

/// Angle of arrival at a planned RIS, in its own array frame.
pub const RIS_INCIDENCE_ANGLE: f64 = FRAC_PI_3;
/// Angle of departure from a planned RIS toward the user.
pub const RIS_DEPARTURE_ANGLE: f64 = 2.0 * FRAC_PI_3;

const COS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisSite {
    /// Radians, in the BS array frame.
    pub aod_from_bs: f64,
    /// Radians, in the user array frame.
    pub aoa_at_user: f64,
    pub bs_ris_distance: f64,
    pub ris_user_distance: f64,
    pub element_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementPlan {
    pub sites: Vec<RisSite>,
    pub target_rank: usize,
    pub direct_rank: usize,
    /// Set when some site shares the direct path's user-side direction.
    pub alignment_with_direct: bool,
}

/// Inputs shared by every planning call.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRequest {
    pub bs: ArrayGeometry,
    pub user: ArrayGeometry,
    /// 0 for a blocked direct path, 1 for LoS.
    pub direct_rank: usize,
    pub direct_aod: f64,
    pub direct_aoa: f64,
    pub bs_ris_distance: f64,
    pub ris_user_distance: f64,
    pub bs_user_distance: f64,
    /// Split as evenly as possible across sites.
    pub total_elements: usize,
}

/// `arccos(cos(theta_i) + lambda l / (M d))`.
pub fn orthogonal_angle(theta_i: f64, geometry: &ArrayGeometry, l: i64) -> Result<f64> {
    let m = geometry.element_count;
    if l.rem_euclid(m as i64) == 0 {
        return Err(Error::DegenerateOffset { l, elements: m });
    }
    let arg = theta_i.cos() + l as f64 / (m as f64 * geometry.spacing_in_wavelengths());
    if arg.abs() > 1.0 + COS_SLACK {
        return Err(Error::InfeasibleAngle { argument: arg });
    }
    Ok(arg.clamp(-1.0, 1.0).acos())
}

/// `needed` mutually orthogonal directions starting at `base`.
///
/// Offsets are tried in the order 1, -1, 2, -2, ...; an offset is kept when
/// it is feasible and differs from every kept offset by a non-multiple of the
/// array size.
pub fn angle_chain(geometry: &ArrayGeometry, base: f64, needed: usize, side: &'static str) -> Result<Vec<f64>> {
    let m = geometry.element_count as i64;
    let mut offsets = vec![0i64];
    let mut angles = vec![base];
    if needed == 0 {
        return Ok(Vec::new());
    }
    // beyond this the direction cosine leaves [-1, 1] for any base
    let bound = (2.0 * geometry.element_count as f64 * geometry.spacing_in_wavelengths()).ceil() as i64 + 1;
    'search: for step in 1..=bound {
        for l in [step, -step] {
            if angles.len() >= needed {
                break 'search;
            }
            if offsets.iter().any(|p| (l - p).rem_euclid(m) == 0) {
                continue;
            }
            match orthogonal_angle(base, geometry, l) {
                Ok(angle) => {
                    offsets.push(l);
                    angles.push(angle);
                }
                Err(Error::InfeasibleAngle { .. }) | Err(Error::DegenerateOffset { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    if angles.len() < needed {
        return Err(Error::InfeasibleChain {
            side,
            elements: geometry.element_count,
            needed,
            found: angles.len(),
        });
    }
    Ok(angles)
}

/// `K - direct_rank` sites, enough to make the composite channel full rank.
pub fn plan_distributed(request: &PlanRequest) -> Result<PlacementPlan> {
    let k = request.user.element_count;
    plan_sites(request, k.saturating_sub(request.direct_rank))
}

/// `site_count <= K` sites.
///
/// The first `K - direct_rank` sites get distinct user-side directions. Any
/// further site cannot add rank and is aligned with the direct path instead,
/// strengthening its stream.
pub fn plan_sites(request: &PlanRequest, site_count: usize) -> Result<PlacementPlan> {
    let k = request.user.element_count;
    if request.direct_rank > 1 {
        return Err(Error::InvalidArgument(format!(
            "direct_rank must be 0 or 1, got {}",
            request.direct_rank
        )));
    }
    if site_count > k {
        return Err(Error::InvalidArgument(format!(
            "{site_count} RIS sites exceed the {k} user antennas"
        )));
    }
    if site_count > 0 && request.total_elements < site_count {
        return Err(Error::InvalidArgument(format!(
            "{} RIS elements cannot be split across {site_count} sites",
            request.total_elements
        )));
    }
    let d = request.direct_rank;
    let distinct_user = (site_count + d).min(k);
    let bs_angles = angle_chain(&request.bs, request.direct_aod, site_count + d, "BS")?;
    let user_angles = angle_chain(&request.user, request.direct_aoa, distinct_user, "user")?;

    let sizes = split_elements(request.total_elements, site_count);
    let mut alignment_with_direct = false;
    let sites = (0..site_count)
        .map(|i| {
            let slot = i + d;
            let aoa = if slot < distinct_user {
                user_angles[slot]
            } else {
                alignment_with_direct = true;
                request.direct_aoa
            };
            RisSite {
                aod_from_bs: bs_angles[slot],
                aoa_at_user: aoa,
                bs_ris_distance: request.bs_ris_distance,
                ris_user_distance: request.ris_user_distance,
                element_count: sizes[i],
            }
        })
        .collect();
    Ok(PlacementPlan {
        sites,
        target_rank: distinct_user,
        direct_rank: d,
        alignment_with_direct,
    })
}

/// Equal split with the remainder going to the lowest-index sites.
pub fn split_elements(total: usize, parts: usize) -> Vec<usize> {
    if parts == 0 {
        return Vec::new();
    }
    let base = total / parts;
    let extra = total % parts;
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

/// Largest principal-angle cosine between the column spaces of `h` and
/// `cascade_ru`; 1 means they share a receive direction. Zero inputs give 0.
pub fn alignment_check(h: &ComplexMatrix, cascade_ru: &ComplexMatrix) -> Result<f64> {
    if h.nrows() != cascade_ru.nrows() {
        return Err(Error::dim("alignment check rows", h.nrows(), cascade_ru.nrows()));
    }
    let a = svd(h)?;
    let b = svd(cascade_ru)?;
    let ra = a.rank(DEFAULT_RANK_TOL);
    let rb = b.rank(DEFAULT_RANK_TOL);
    if ra == 0 || rb == 0 {
        return Ok(0.0);
    }
    let qa = a.left_vectors.columns(0, ra);
    let qb = b.left_vectors.columns(0, rb);
    let cross = qa.adjoint() * qb;
    Ok(svd(&cross)?.max_singular_value().min(1.0))
}

/// All-LoS channel set realizing a plan, with the direct path at the
/// request's reference angles.
pub fn plan_channel_set(plan: &PlacementPlan, request: &PlanRequest) -> Result<ChannelSet> {
    let k = request.user.element_count;
    let m = request.bs.element_count;
    let wavelength = request.bs.carrier_wavelength;
    let direct = if plan.direct_rank == 1 {
        los_channel(
            &request.bs,
            &request.user,
            request.direct_aod,
            request.direct_aoa,
            &LinkBudget::los(request.bs_user_distance),
        )
    } else {
        ComplexMatrix::zeros(k, m)
    };
    let mut tags = vec![LinkTag {
        link: "h".into(),
        model: if plan.direct_rank == 1 { LinkModel::Los } else { LinkModel::Blocked },
    }];
    let cascades = plan
        .sites
        .iter()
        .enumerate()
        .map(|(j, site)| {
            let ris = ArrayGeometry::half_wavelength(site.element_count, wavelength);
            tags.push(LinkTag { link: format!("g_br/{j}"), model: LinkModel::Los });
            tags.push(LinkTag { link: format!("g_ru/{j}"), model: LinkModel::Los });
            Cascade {
                g_br: los_channel(
                    &request.bs,
                    &ris,
                    site.aod_from_bs,
                    RIS_INCIDENCE_ANGLE,
                    &LinkBudget::los(site.bs_ris_distance),
                ),
                g_ru: los_channel(
                    &ris,
                    &request.user,
                    RIS_DEPARTURE_ANGLE,
                    site.aoa_at_user,
                    &LinkBudget::los(site.ris_user_distance),
                ),
            }
        })
        .collect();
    ChannelSet::new(direct, cascades, 0, tags)
}

/// Rank and conditioning of a plan's passive, phase-aligned composite channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteReport {
    pub target_rank: usize,
    pub direct_rank: usize,
    pub alignment_with_direct: bool,
    pub achieved_rank: usize,
    /// `sigma_max / sigma_min` over the first `sites + direct_rank` singular values.
    pub condition_number: f64,
    #[serde(rename = "site")]
    pub sites: Vec<SiteEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteEntry {
    pub index: usize,
    pub aod_from_bs_deg: f64,
    pub aoa_at_user_deg: f64,
    pub bs_ris_distance_m: f64,
    pub ris_user_distance_m: f64,
    pub element_count: usize,
}

pub fn assess_plan(plan: &PlacementPlan, request: &PlanRequest) -> Result<SiteReport> {
    let set = plan_channel_set(plan, request)?;
    let configs = set
        .cascades
        .iter()
        .map(|c| align_cascade(c, 1))
        .collect::<Result<Vec<_>>>()?;
    let composite = crate::channel::composite_channel(&set, &configs)?;
    let dec = svd(&composite)?;
    let used = (plan.sites.len() + plan.direct_rank).min(dec.singular_values.len());
    let condition_number = if used == 0 {
        1.0
    } else {
        let top = dec.singular_values[0];
        let low = dec.singular_values[used - 1];
        if low > 0.0 {
            top / low
        } else {
            f64::INFINITY
        }
    };
    Ok(SiteReport {
        target_rank: plan.target_rank,
        direct_rank: plan.direct_rank,
        alignment_with_direct: plan.alignment_with_direct,
        achieved_rank: dec.rank(DEFAULT_RANK_TOL),
        condition_number,
        sites: plan
            .sites
            .iter()
            .enumerate()
            .map(|(index, s)| SiteEntry {
                index,
                aod_from_bs_deg: s.aod_from_bs.to_degrees(),
                aoa_at_user_deg: s.aoa_at_user.to_degrees(),
                bs_ris_distance_m: s.bs_ris_distance,
                ris_user_distance_m: s.ris_user_distance,
                element_count: s.element_count,
            })
            .collect(),
    })
}

impl SiteReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}
