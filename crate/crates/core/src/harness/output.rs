use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::{ScenarioConfig, ScenarioFile};
use super::evaluate::evaluate_trial;

/// One CSV row: a single trial at a single sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub scenario_id: String,
    pub sweep_value: f64,
    pub trial_index: usize,
    pub rate: f64,
    pub effective_rank: usize,
    pub seed: u64,
    pub design_labels: String,
}

pub const RECORD_HEADER: [&str; 7] = [
    "scenario_id",
    "sweep_value",
    "trial_index",
    "rate",
    "effective_rank",
    "seed",
    "design_labels",
];

pub const SUMMARY_HEADER: [&str; 4] = ["scenario_id", "sweep_value", "mean_rate", "ratio_vs_baseline"];

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario_id: String,
    pub sweep_value: f64,
    pub mean_rate: f64,
    /// `+inf` when the baseline mean is zero and this one is not.
    pub ratio_vs_baseline: f64,
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::Config("worker count must be positive".into()));
        }
        b = b.num_threads(w);
    }
    b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// All trials of one scenario, sorted by `(sweep_value, trial_index)` in
/// sweep order. Output does not depend on `workers`.
pub fn run_scenario(config: &ScenarioConfig, workers: Option<usize>) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    pool(workers)?.install(|| scenario_records(config))
}

fn scenario_records(config: &ScenarioConfig) -> Result<Vec<SweepRecord>> {
    let labels = config.design.label(config.ris_mode);
    let units: Vec<(usize, usize)> = (0..config.sweep.values.len())
        .flat_map(|s| (0..config.trials).map(move |t| (s, t)))
        .collect();
    units
        .par_iter()
        .map(|&(s, t)| {
            let out = evaluate_trial(config, s, t)?;
            Ok(SweepRecord {
                scenario_id: config.id.clone(),
                sweep_value: config.sweep.values[s],
                trial_index: t,
                rate: out.result.rate,
                effective_rank: out.result.effective_rank,
                seed: out.seed,
                design_labels: labels.clone(),
            })
        })
        .collect()
}

/// Every scenario of a file, in file order.
pub fn run_file(file: &ScenarioFile, workers: Option<usize>) -> Result<Vec<SweepRecord>> {
    file.validate()?;
    let pool = pool(workers)?;
    let mut out = Vec::new();
    for s in &file.scenarios {
        out.extend(pool.install(|| scenario_records(s))?);
    }
    Ok(out)
}

fn sweep_means(records: &[SweepRecord], id: &str) -> Vec<(f64, f64)> {
    let mut rows: Vec<&SweepRecord> = records.iter().filter(|r| r.scenario_id == id).collect();
    rows.sort_by_key(|r| r.trial_index);
    let mut order: Vec<f64> = Vec::new();
    let mut sums: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for r in rows {
        let key = r.sweep_value.to_bits();
        let e = sums.entry(key).or_insert_with(|| {
            order.push(r.sweep_value);
            (0.0, 0)
        });
        e.0 += r.rate;
        e.1 += 1;
    }
    order
        .into_iter()
        .map(|v| {
            let (s, n) = sums[&v.to_bits()];
            (v, s / n as f64)
        })
        .collect()
}

fn ratio(mean: f64, base: f64) -> f64 {
    if base == 0.0 {
        if mean == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        mean / base
    }
}

/// Mean rate per sweep value for every scenario in `records`, and its ratio
/// to `baseline`'s mean at the same value.
pub fn summarize(records: &[SweepRecord], baseline: &str) -> Result<Vec<SummaryRow>> {
    let base = sweep_means(records, baseline);
    if base.is_empty() {
        return Err(Error::Config(format!("baseline scenario {baseline:?} has no records")));
    }
    let mut out = Vec::new();
    for id in scenario_order(records) {
        out.extend(compare(records, &id, baseline, &base)?);
    }
    Ok(out)
}

fn compare(records: &[SweepRecord], id: &str, baseline: &str, base: &[(f64, f64)]) -> Result<Vec<SummaryRow>> {
    let means = sweep_means(records, id);
    let mut xs: Vec<u64> = means.iter().map(|(v, _)| v.to_bits()).collect();
    let mut bs: Vec<u64> = base.iter().map(|(v, _)| v.to_bits()).collect();
    xs.sort_unstable();
    bs.sort_unstable();
    if xs != bs {
        return Err(Error::SweepMismatch {
            left: id.to_string(),
            right: baseline.to_string(),
        });
    }
    Ok(means
        .into_iter()
        .map(|(v, m)| {
            let b = base.iter().find(|(x, _)| x.to_bits() == v.to_bits()).map(|(_, b)| *b).unwrap_or(0.0);
            SummaryRow {
                scenario_id: id.to_string(),
                sweep_value: v,
                mean_rate: m,
                ratio_vs_baseline: ratio(m, b),
            }
        })
        .collect())
}

fn scenario_order(records: &[SweepRecord]) -> Vec<String> {
    let mut ids: Vec<String> = Vec::new();
    for r in records {
        if !ids.contains(&r.scenario_id) {
            ids.push(r.scenario_id.clone());
        }
    }
    ids
}

/// Summary of a whole file; each scenario is compared against its own
/// `baseline`, or against itself when it has none.
pub fn summarize_file(file: &ScenarioFile, records: &[SweepRecord]) -> Result<Vec<SummaryRow>> {
    let mut out = Vec::new();
    for s in &file.scenarios {
        let baseline = s.baseline.as_deref().unwrap_or(&s.id);
        let base = sweep_means(records, baseline);
        out.extend(compare(records, &s.id, baseline, &base)?);
    }
    Ok(out)
}

/// `printf("%.12g")`: 12 significant digits, trailing zeros dropped.
pub fn format_g12(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn records_to_csv(records: &[SweepRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            r.scenario_id.clone(),
            format_g12(r.sweep_value),
            r.trial_index.to_string(),
            format_g12(r.rate),
            r.effective_rank.to_string(),
            r.seed.to_string(),
            r.design_labels.clone(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.scenario_id.clone(),
            format_g12(r.sweep_value),
            format_g12(r.mean_rate),
            format_g12(r.ratio_vs_baseline),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Sidecar echoing the exact scenarios with their fingerprints, plus the
/// assumed defaults. Feeding it back to `sweep` reproduces the data file.
pub fn metadata_toml(file: &ScenarioFile, defaults: &[(&str, String)]) -> Result<String> {
    let mut provenance = toml::Table::new();
    let mut prints = toml::Table::new();
    for s in &file.scenarios {
        prints.insert(s.id.clone(), toml::Value::String(s.fingerprint()));
    }
    provenance.insert("fingerprints".into(), toml::Value::Table(prints));
    let mut assumed = toml::Table::new();
    for (k, v) in defaults {
        assumed.insert((*k).to_string(), toml::Value::String(v.clone()));
    }
    provenance.insert("assumed_defaults".into(), toml::Value::Table(assumed));
    provenance.insert(
        "generator".into(),
        toml::Value::String(format!("risdof {}", env!("CARGO_PKG_VERSION"))),
    );
    let echoed = ScenarioFile {
        scenarios: file.scenarios.clone(),
        provenance: Some(provenance),
    };
    echoed.to_toml()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, v: f64, t: usize, rate: f64) -> SweepRecord {
        SweepRecord {
            scenario_id: id.into(),
            sweep_value: v,
            trial_index: t,
            rate,
            effective_rank: 1,
            seed: 0,
            design_labels: "x".into(),
        }
    }

    #[test]
    fn g12_formatting() {
        assert_eq!(format_g12(1024.0), "1024");
        assert_eq!(format_g12(-90.0), "-90");
        assert_eq!(format_g12(0.1), "0.1");
        assert_eq!(format_g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_g12(2.5e-7), "2.5e-07");
        assert_eq!(format_g12(1e15), "1e+15");
        assert_eq!(format_g12(123456789012.0), "123456789012");
        assert_eq!(format_g12(f64::INFINITY), "inf");
        assert_eq!(format_g12(0.0), "0");
        assert_eq!(format_g12(9.9999999999999e-5), "0.0001");
    }

    #[test]
    fn summary_against_self_is_one() {
        let rs = vec![rec("a", 1.0, 0, 2.0), rec("a", 1.0, 1, 4.0), rec("a", 2.0, 0, 5.0)];
        let rows = summarize(&rs, "a").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].mean_rate, 3.0);
        assert!(rows.iter().all(|r| r.ratio_vs_baseline == 1.0));
    }

    #[test]
    fn zero_baseline_gives_infinite_marker() {
        let rs = vec![rec("base", 1.0, 0, 0.0), rec("ris", 1.0, 0, 3.0)];
        let rows = summarize(&rs, "base").unwrap();
        assert_eq!(rows[1].ratio_vs_baseline, f64::INFINITY);
        let csv = String::from_utf8(summary_to_csv(&rows).unwrap()).unwrap();
        assert!(csv.contains("ris,1,3,inf"));
    }

    #[test]
    fn mismatched_axes_rejected() {
        let rs = vec![rec("base", 1.0, 0, 1.0), rec("ris", 2.0, 0, 3.0)];
        assert!(matches!(summarize(&rs, "base"), Err(Error::SweepMismatch { .. })));
    }

    #[test]
    fn csv_round_trip_and_header() {
        let rs = vec![rec("a", -90.0, 0, 1.25), rec("a", -85.0, 0, 0.5)];
        let bytes = records_to_csv(&rs).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("scenario_id,sweep_value,trial_index,rate,effective_rank,seed,design_labels\n"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, &bytes).unwrap();
        assert_eq!(read_records(&p).unwrap(), rs);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn g12_round_trips(x in prop::num::f64::NORMAL) {
                let back: f64 = format_g12(x).parse().unwrap();
                prop_assert!((back - x).abs() <= 1e-11 * x.abs());
            }
        }
    }
}
