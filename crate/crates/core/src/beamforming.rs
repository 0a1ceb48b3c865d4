//! Transmit precoders, receive combiners and per-stream power.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{pseudo_inverse, svd, water_filling, ComplexMatrix, DEFAULT_RANK_TOL};
use crate::placement::alignment_check;

/// Receive-direction overlap above which two components share a stream.
const SHARED_STREAM_ALIGNMENT: f64 = 1.0 - 1e-9;
/// A projected row shorter than this fraction of its original lies in the
/// span of the other rows.
const NULL_SPACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LinkDesign {
    /// `M x S`, unit-norm columns.
    pub precoder: ComplexMatrix,
    /// `S x K`.
    pub combiner: ComplexMatrix,
    pub stream_count: usize,
    /// Zero until [`allocate_stream_power`] runs.
    pub stream_powers: Vec<f64>,
}

impl LinkDesign {
    fn unpowered(precoder: ComplexMatrix, combiner: ComplexMatrix) -> Self {
        let s = precoder.ncols();
        Self {
            precoder,
            combiner,
            stream_count: s,
            stream_powers: vec![0.0; s],
        }
    }

    /// `F diag(sqrt(p))`.
    pub fn powered_precoder(&self) -> ComplexMatrix {
        let mut f = self.precoder.clone();
        for (j, p) in self.stream_powers.iter().enumerate() {
            f.column_mut(j).scale_mut(p.max(0.0).sqrt());
        }
        f
    }

    /// Transmit covariance `F diag(p) F^H`.
    pub fn transmit_covariance(&self) -> ComplexMatrix {
        let f = self.powered_precoder();
        &f * f.adjoint()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderKind {
    /// One stream per independent path, each precoder in the null space of
    /// the other paths' rows.
    #[default]
    NullSpace,
    /// Single stream on the dominant right singular vector.
    Mrt,
    /// SVD of the noise-whitened channel.
    Eigenmode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CombinerKind {
    #[default]
    ZeroForcing,
    MatchedFilter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PowerPolicy {
    #[default]
    WaterFilling,
    Equal,
}

/// Dominant right singular vector as precoder, conjugated dominant left
/// singular vector as combiner.
pub fn mrt(h_eff: &ComplexMatrix) -> Result<LinkDesign> {
    let dec = svd(h_eff)?;
    if dec.max_singular_value() == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let f = dec.right_vectors.columns(0, 1).into_owned();
    let w = dec.left_vectors.columns(0, 1).adjoint();
    Ok(LinkDesign::unpowered(f, w))
}

/// `W = (H F)^+`, so `W H F = I` when `H F` has full column rank.
pub fn zero_forcing_combiner(h_eff: &ComplexMatrix, precoder: &ComplexMatrix) -> Result<ComplexMatrix> {
    if h_eff.ncols() != precoder.nrows() {
        return Err(Error::dim("precoder rows", h_eff.ncols(), precoder.nrows()));
    }
    let streams = precoder.ncols();
    let e = h_eff * precoder;
    let dec = svd(&e)?;
    let achieved = dec.rank(DEFAULT_RANK_TOL);
    if achieved < streams {
        return Err(Error::RankDeficient {
            achieved,
            required: streams,
        });
    }
    pseudo_inverse(&e, DEFAULT_RANK_TOL)
}

/// One precoder per stream row, each orthogonal to every other row.
///
/// `direct_row`, when present, becomes stream 0. Rows are `1 x M`. The
/// returned combiner is `I_S`: the rows are already the per-stream outputs.
pub fn null_space_precoders(stream_rows: &[ComplexMatrix], direct_row: Option<&ComplexMatrix>) -> Result<LinkDesign> {
    let rows: Vec<&ComplexMatrix> = direct_row.into_iter().chain(stream_rows).collect();
    let s = rows.len();
    if s == 0 {
        return Err(Error::ZeroChannel);
    }
    let m = rows[0].ncols();
    for r in &rows {
        if r.nrows() != 1 || r.ncols() != m {
            return Err(Error::dim("stream row", format!("1x{m}"), format!("{}x{}", r.nrows(), r.ncols())));
        }
    }
    if s > m {
        return Err(Error::EmptyNullSpace { streams: s, antennas: m });
    }

    let mut f = ComplexMatrix::zeros(m, s);
    for i in 0..s {
        let target = rows[i].adjoint();
        let norm = target.norm();
        if norm == 0.0 {
            return Err(Error::ZeroChannel);
        }
        let projected = if s == 1 {
            target
        } else {
            let others = ComplexMatrix::from_fn(s - 1, m, |r, c| {
                let src = if r < i { r } else { r + 1 };
                rows[src][(0, c)]
            });
            let dec = svd(&others)?;
            let r = dec.rank(DEFAULT_RANK_TOL);
            let basis = dec.right_vectors.columns(0, r);
            &target - basis * (basis.adjoint() * &target)
        };
        let len = projected.norm();
        if len <= NULL_SPACE_TOL * norm {
            return Err(Error::EmptyNullSpace { streams: s, antennas: m });
        }
        f.set_column(i, &projected.column(0).unscale(len));
    }
    Ok(LinkDesign::unpowered(f, ComplexMatrix::identity(s, s)))
}

/// Groups rank-one components by receive direction and returns one row
/// `u^H G` per group, in first-appearance order. Zero components are skipped.
pub fn stream_rows(components: &[ComplexMatrix]) -> Result<Vec<ComplexMatrix>> {
    let mut groups: Vec<ComplexMatrix> = Vec::new();
    for c in components {
        if c.iter().all(|z| z.norm_sqr() == 0.0) {
            continue;
        }
        let mut merged = false;
        for g in groups.iter_mut() {
            if alignment_check(g, c)? >= SHARED_STREAM_ALIGNMENT {
                *g += c;
                merged = true;
                break;
            }
        }
        if !merged {
            groups.push(c.clone());
        }
    }
    groups
        .iter()
        .map(|g| {
            let dec = svd(g)?;
            Ok(dec.left_vectors.columns(0, 1).adjoint() * g)
        })
        .collect()
}

/// Eigenmode transmission over `R^{-1/2} H`: right singular vectors as
/// precoders, `U^H L^{-1}` as combiner, where `R = L L^H`.
pub fn eigenmode(h_eff: &ComplexMatrix, noise_cov: &ComplexMatrix, max_streams: usize) -> Result<LinkDesign> {
    let k = h_eff.nrows();
    if noise_cov.shape() != (k, k) {
        return Err(Error::dim("noise covariance", format!("{k}x{k}"), format!("{}x{}", noise_cov.nrows(), noise_cov.ncols())));
    }
    let l = noise_cov.clone().cholesky().ok_or(Error::SingularCovariance)?.unpack();
    let l_inv = l
        .solve_lower_triangular(&ComplexMatrix::identity(k, k))
        .ok_or(Error::SingularCovariance)?;
    let whitened = &l_inv * h_eff;
    let dec = svd(&whitened)?;
    let s = dec.rank(DEFAULT_RANK_TOL).min(max_streams);
    if s == 0 {
        return Err(Error::ZeroChannel);
    }
    let f = dec.right_vectors.columns(0, s).into_owned();
    let w = dec.left_vectors.columns(0, s).adjoint() * l_inv;
    Ok(LinkDesign::unpowered(f, w))
}

/// Precoder and combiner for the chosen kinds.
///
/// `components` are the direct channel followed by each cascade's
/// contribution; the null-space design reads its stream rows from them.
pub fn design_link(
    precoder: PrecoderKind,
    combiner: CombinerKind,
    h_eff: &ComplexMatrix,
    components: &[ComplexMatrix],
    noise_cov: &ComplexMatrix,
) -> Result<LinkDesign> {
    let mut design = match precoder {
        PrecoderKind::Mrt => mrt(h_eff)?,
        PrecoderKind::Eigenmode => eigenmode(h_eff, noise_cov, h_eff.nrows().min(h_eff.ncols()))?,
        PrecoderKind::NullSpace => null_space_precoders(&stream_rows(components)?, None)?,
    };
    match (precoder, combiner) {
        (PrecoderKind::Eigenmode, _) | (PrecoderKind::Mrt, CombinerKind::MatchedFilter) => {}
        (_, CombinerKind::ZeroForcing) => {
            design.combiner = zero_forcing_combiner(h_eff, &design.precoder)?;
        }
        (PrecoderKind::NullSpace, CombinerKind::MatchedFilter) => {
            let e = h_eff * &design.precoder;
            let mut w = e.adjoint();
            for (i, mut row) in w.row_iter_mut().enumerate() {
                let n = e.column(i).norm();
                if n > 0.0 {
                    row.unscale_mut(n);
                }
            }
            design.combiner = w;
        }
    }
    Ok(design)
}

/// Post-combining SNR per unit transmit power,
/// `|(W H F)_ss|^2 / (W R W^H)_ss`.
pub fn stream_gains(design: &LinkDesign, h_eff: &ComplexMatrix, noise_cov: &ComplexMatrix) -> Result<Vec<f64>> {
    if design.combiner.ncols() != h_eff.nrows() {
        return Err(Error::dim("combiner columns", h_eff.nrows(), design.combiner.ncols()));
    }
    let e = &design.combiner * h_eff * &design.precoder;
    let n = &design.combiner * noise_cov * design.combiner.adjoint();
    Ok((0..design.stream_count)
        .map(|s| {
            let noise = n[(s, s)].re;
            if noise > 0.0 {
                e[(s, s)].norm_sqr() / noise
            } else {
                0.0
            }
        })
        .collect())
}

/// Fills `stream_powers`, summing to `p_tx`.
pub fn allocate_stream_power(design: &LinkDesign, gains: &[f64], p_tx: f64, policy: PowerPolicy) -> Result<LinkDesign> {
    if gains.len() != design.stream_count {
        return Err(Error::dim("stream gains", design.stream_count, gains.len()));
    }
    if !(p_tx >= 0.0) {
        return Err(Error::InvalidArgument(format!("transmit power must be non-negative, got {p_tx}")));
    }
    let powers = match policy {
        PowerPolicy::WaterFilling => water_filling(gains, p_tx, 1.0)?.per_stream_power,
        PowerPolicy::Equal => vec![p_tx / design.stream_count as f64; design.stream_count],
    };
    Ok(LinkDesign {
        stream_powers: powers,
        ..design.clone()
    })
}
