//! One PASS/FAIL line per acceptance criterion. Exits nonzero when any fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};
use std::time::{Duration, Instant};

use risdof_core::beamforming::{
    allocate_stream_power, eigenmode, mrt, null_space_precoders, stream_gains, zero_forcing_combiner, LinkDesign,
    PowerPolicy,
};
use risdof_core::channel::{
    composite_channel, los_channel, rayleigh_channel, steering_vector, DEFAULT_WAVELENGTH,
};
use risdof_core::harness::{
    evaluate_trial, plan_request, preset, records_to_csv, run_file, summarize_file, summary_to_csv, ScenarioFile,
    SummaryRow,
};
use risdof_core::numerics::{max_abs, numerical_rank, water_filling};
use risdof_core::placement::{angle_chain, assess_plan, orthogonal_angle, plan_distributed, PlacementPlan};
use risdof_core::rate::{achievable_rate, rate_eigen_sum};
use risdof_core::ris::align_cascade;
use risdof_core::rng::complex_gaussian;
use risdof_core::{ArrayGeometry, Cascade, ChannelSet, ComplexMatrix, LinkBudget, DEFAULT_RANK_TOL};

struct Verdict {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict { ok, detail: detail.into() }
}

/// Appends the runtime and fails the verdict past `limit`.
fn timed(limit: Duration, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let v = f();
    let elapsed = start.elapsed();
    check(v.ok && elapsed < limit, format!("{}; {:.2} s", v.detail, elapsed.as_secs_f64()))
}

fn rank(a: &ComplexMatrix) -> usize {
    numerical_rank(a, DEFAULT_RANK_TOL).expect("svd")
}

fn ula(n: usize) -> ArrayGeometry {
    ArrayGeometry::half_wavelength(n, DEFAULT_WAVELENGTH)
}

fn aligned(set: &ChannelSet) -> ComplexMatrix {
    let configs: Vec<_> = set.cascades.iter().map(|c| align_cascade(c, 5).unwrap()).collect();
    composite_channel(set, &configs).unwrap()
}

fn set(direct: ComplexMatrix, cascades: Vec<Cascade>) -> ChannelSet {
    ChannelSet::new(direct, cascades, 0, Vec::new()).unwrap()
}

fn rank_taxonomy() -> Verdict {
    let (k, m, n) = (4, 64, 256);
    let (bs, user, ris) = (ula(m), ula(k), ula(n));
    let direct = los_channel(&bs, &user, FRAC_PI_2, FRAC_PI_2, &LinkBudget::los(100.0));
    let los_cascade = |aod: f64, aoa: f64| Cascade {
        g_br: los_channel(&bs, &ris, aod, FRAC_PI_3, &LinkBudget::los(82.0)),
        g_ru: los_channel(&ris, &user, 2.0 * FRAC_PI_3, aoa, &LinkBudget::los(28.0)),
    };

    let blocked = rank(&ComplexMatrix::zeros(k, m));
    let los = rank(&direct);
    let planned = los_cascade(
        orthogonal_angle(FRAC_PI_2, &bs, 1).unwrap(),
        orthogonal_angle(FRAC_PI_2, &user, 1).unwrap(),
    );
    let with_planned = rank(&aligned(&set(direct.clone(), vec![planned])));
    let with_generic = rank(&aligned(&set(direct.clone(), vec![los_cascade(1.0, 2.2)])));
    let cascade_only = rank(&aligned(&set(ComplexMatrix::zeros(k, m), vec![los_cascade(1.0, 2.2)])));

    let budget = LinkBudget::nlos(82.0);
    let full = (0..100u64)
        .filter(|&seed| {
            let c = Cascade {
                g_br: rayleigh_channel(n, m, &budget, seed),
                g_ru: rayleigh_channel(k, n, &LinkBudget::nlos(28.0), seed + 1000),
            };
            rank(&aligned(&set(ComplexMatrix::zeros(k, m), vec![c]))) == 4
        })
        .count();

    check(
        blocked == 0 && los == 1 && with_planned == 2 && with_generic == 2 && cascade_only == 1 && full == 100,
        format!(
            "blocked={blocked} los={los} los+cascade={with_planned}/{with_generic} cascade_only={cascade_only} \
             rayleigh_full_rank={full}/100"
        ),
    )
}

fn fig6_request() -> risdof_core::PlanRequest {
    let file = preset("fig6a").unwrap();
    let cfg = file.get("fig6a_j3").unwrap();
    plan_request(cfg, &cfg.point(-90.0))
}

fn distributed_rank_law() -> Verdict {
    let req = fig6_request();
    let plan = plan_distributed(&req).unwrap();
    let achieved = |p: &PlacementPlan| assess_plan(p, &req).unwrap().achieved_rank;
    let full = achieved(&plan);

    let deleted: Vec<usize> = (0..plan.sites.len())
        .map(|i| {
            let mut p = plan.clone();
            p.sites.remove(i);
            achieved(&p)
        })
        .collect();

    let mut collided = Vec::new();
    for (bs_side, user_side) in [(true, false), (false, true), (true, true)] {
        let mut p = plan.clone();
        if bs_side {
            p.sites[1].aod_from_bs = p.sites[0].aod_from_bs;
        }
        if user_side {
            p.sites[1].aoa_at_user = p.sites[0].aoa_at_user;
        }
        collided.push(achieved(&p));
    }

    check(
        plan.sites.len() == 3 && full == 4 && deleted.iter().all(|&r| r == 3) && collided.iter().all(|&r| r == 3),
        format!(
            "sites={} rank={full} after_delete={deleted:?} after_collision(bs,user,both)={collided:?}",
            plan.sites.len()
        ),
    )
}

fn steering_orthogonality() -> Verdict {
    let mut worst = Vec::new();
    let mut ok = true;
    for m in [16, 64, 128] {
        let g = ula(m);
        let angles = angle_chain(&g, FRAC_PI_2, 4, "BS").unwrap();
        let vecs: Vec<_> = angles.iter().map(|&a| steering_vector(&g, a)).collect();
        let mut w: f64 = 0.0;
        for i in 0..vecs.len() {
            for j in i + 1..vecs.len() {
                w = w.max((vecs[i].adjoint() * &vecs[j])[(0, 0)].norm());
            }
        }
        ok &= w < 1e-10 * m as f64;
        worst.push(format!("M={m}: {w:.1e}"));
    }
    check(ok, format!("max |a_i^H a_j| {}", worst.join(", ")))
}

struct PresetRun {
    csv: Vec<u8>,
    summary_csv: Vec<u8>,
    summary: Vec<SummaryRow>,
    elapsed: Duration,
}

fn run_preset(file: &ScenarioFile, workers: usize) -> PresetRun {
    let start = Instant::now();
    let records = run_file(file, Some(workers)).unwrap();
    let summary = summarize_file(file, &records).unwrap();
    PresetRun {
        csv: records_to_csv(&records).unwrap(),
        summary_csv: summary_to_csv(&summary).unwrap(),
        summary,
        elapsed: start.elapsed(),
    }
}

fn ratio_at(rows: &[SummaryRow], id: &str, value: f64) -> f64 {
    rows.iter()
        .find(|r| r.scenario_id == id && r.sweep_value == value)
        .unwrap_or_else(|| panic!("no summary row for {id} at {value}"))
        .ratio_vs_baseline
}

fn in_band(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn fig4_trend(run: &PresetRun) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [64, 128] {
        let los = ratio_at(&run.summary, &format!("fig4_m{m}_all_los"), 1024.0);
        let ray = ratio_at(&run.summary, &format!("fig4_m{m}_los_rayleigh"), 1024.0);
        let ordered = ray > los;
        ok &= ordered;
        if m == 64 {
            let los_ok = in_band(los, 1.2, 2.2);
            let ray_ok = in_band(ray, 1.7, 3.0);
            ok &= los_ok && ray_ok;
            parts.push(format!(
                "M=64 all_los={los:.3} in[1.2,2.2]={los_ok} los_rayleigh={ray:.3} in[1.7,3.0]={ray_ok} \
                 rayleigh>los={ordered}"
            ));
        } else {
            parts.push(format!("M=128 all_los={los:.3} los_rayleigh={ray:.3} rayleigh>los={ordered}"));
        }
    }
    let fast = run.elapsed < Duration::from_secs(300);
    check(ok && fast, format!("{}; {:.1} s", parts.join("; "), run.elapsed.as_secs_f64()))
}

fn fig6_trend(run: &PresetRun, file: &ScenarioFile) -> Verdict {
    let values = &file.scenarios[0].sweep.values;
    let ratios: Vec<f64> = (1..=4).map(|j| ratio_at(&run.summary, &format!("fig6a_j{j}"), -90.0)).collect();
    let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    let gain_ratio = (ratios[3] - 1.0) / (ratios[0] - 1.0);
    let gain_ok = in_band(gain_ratio, 2.5, 7.0);

    let mut nonincreasing = true;
    let mut at_top = Vec::new();
    for j in 1..=4 {
        let id = format!("fig6a_j{j}");
        let gains: Vec<f64> = values.iter().map(|&v| ratio_at(&run.summary, &id, v) - 1.0).collect();
        nonincreasing &= gains.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
        at_top.push(*gains.last().unwrap());
    }
    let vanishes = at_top.iter().all(|&g| g <= 0.1);
    let fast = run.elapsed < Duration::from_secs(600);

    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(",");
    check(
        increasing && gain_ok && nonincreasing && vanishes && fast,
        format!(
            "ratios@-90dBm=[{}] increasing={increasing} gain4/gain1={gain_ratio:.3} in[2.5,7]={gain_ok} \
             nonincreasing={nonincreasing} gains@-60dBm=[{}] <=0.1={vanishes}; {:.1} s",
            fmt(&ratios),
            fmt(&at_top),
            run.elapsed.as_secs_f64()
        ),
    )
}

fn fig5_structure() -> Verdict {
    let start = Instant::now();
    let file = preset("fig5").unwrap();
    let points = file.scenarios[0].sweep.values.len();

    let no_ris = file.get("fig5_no_ris").unwrap();
    let zero = (0..points).all(|i| evaluate_trial(no_ris, i, 0).unwrap().result.rate == 0.0);

    let los = file.get("fig5_all_los").unwrap();
    let los_streams: Vec<usize> = (0..points).map(|i| evaluate_trial(los, i, 0).unwrap().stream_count).collect();

    let ray = file.get("fig5_rayleigh").unwrap();
    let mut ray_ok = 0;
    let mut total = 0;
    let mut min_snr = f64::INFINITY;
    for i in 0..points {
        for t in 0..ray.trials {
            let out = evaluate_trial(ray, i, t).unwrap();
            let snr = out.result.per_stream_snr_db.iter().copied().fold(f64::INFINITY, f64::min);
            min_snr = min_snr.min(snr);
            total += 1;
            if out.stream_count == 4 && out.result.effective_rank == 4 && snr > 0.0 {
                ray_ok += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        zero && los_streams.iter().all(|&s| s == 1) && ray_ok == total && elapsed < Duration::from_secs(60),
        format!(
            "no_ris_zero={zero} all_los_streams={los_streams:?} rayleigh_4_streams={ray_ok}/{total} \
             min_snr={min_snr:.1} dB; {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn rate_bits(gains: &[f64], powers: &[f64]) -> f64 {
    gains.iter().zip(powers).map(|(g, p)| (1.0 + g * p).log2()).sum()
}

fn grid_best(gains: &[f64], total: f64) -> f64 {
    match gains.len() {
        2 => {
            let steps = 20_000;
            (0..=steps)
                .map(|i| {
                    let p = total * i as f64 / steps as f64;
                    rate_bits(gains, &[p, total - p])
                })
                .fold(f64::MIN, f64::max)
        }
        3 => {
            let steps = 600;
            let mut best = f64::MIN;
            for i in 0..=steps {
                for j in 0..=steps - i {
                    let a = total * i as f64 / steps as f64;
                    let b = total * j as f64 / steps as f64;
                    best = best.max(rate_bits(gains, &[a, b, total - a - b]));
                }
            }
            best
        }
        _ => unreachable!(),
    }
}

fn powered(d: LinkDesign, h: &ComplexMatrix, r: &ComplexMatrix, p: f64) -> LinkDesign {
    let g = stream_gains(&d, h, r).unwrap();
    allocate_stream_power(&d, &g, p, PowerPolicy::WaterFilling).unwrap()
}

fn numerics_oracles() -> Verdict {
    let start = Instant::now();

    let mut wf_gap: f64 = 0.0;
    let mut wf_below = false;
    for seed in 0..50u64 {
        let streams = 2 + (seed % 2) as usize;
        let z = complex_gaussian(streams, 1, 1.0, 5000 + seed);
        let gains: Vec<f64> = z.iter().map(|v| v.norm_sqr() + 0.05).collect();
        let total = 0.5 + (seed % 7) as f64;
        let wf = water_filling(&gains, total, 1.0).unwrap();
        let r = rate_bits(&gains, &wf.per_stream_power);
        let g = grid_best(&gains, total);
        wf_gap = wf_gap.max((r - g).abs());
        wf_below |= r < g - 1e-12;
    }

    let mut zf_residual: f64 = 0.0;
    for seed in 0..50u64 {
        let h = complex_gaussian(4, 64, 1.0, 6000 + seed);
        let streams = 1 + (seed % 4) as usize;
        let f = complex_gaussian(64, streams, 1.0, 6500 + seed);
        let w = zero_forcing_combiner(&h, &f).unwrap();
        let e = &w * &h * &f - ComplexMatrix::identity(streams, streams);
        zf_residual = zf_residual.max(max_abs(&e));
        let rows: Vec<ComplexMatrix> = (0..4).map(|i| h.rows(i, 1).into_owned()).collect();
        let ns = null_space_precoders(&rows[..streams], None).unwrap();
        let eff = ComplexMatrix::from_fn(streams, 64, |i, c| h[(i, c)]);
        let off = &eff * &ns.precoder;
        let diag = ComplexMatrix::from_fn(streams, streams, |i, j| if i == j { off[(i, j)] } else { 0.0.into() });
        zf_residual = zf_residual.max(max_abs(&(off - diag)) / max_abs(&h));
    }

    let mut det_gap: f64 = 0.0;
    for seed in 0..100u64 {
        let h = complex_gaussian(4, 16, 1.0, 7000 + seed);
        let x = complex_gaussian(4, 4, 0.3, 7500 + seed);
        let r = ComplexMatrix::identity(4, 4).scale(0.1) + &x * x.adjoint();
        let p = 1.0 + (seed % 10) as f64;
        let design = if seed % 2 == 0 {
            powered(eigenmode(&h, &r, 4).unwrap(), &h, &r, p)
        } else {
            let mut d = powered(mrt(&h).unwrap(), &h, &r, p);
            d.combiner = zero_forcing_combiner(&h, &d.precoder).unwrap();
            d
        };
        let a = achievable_rate(&h, &design, &r).unwrap().rate;
        let b = rate_eigen_sum(&h, &design, &r).unwrap();
        det_gap = det_gap.max((a - b).abs());
    }

    let elapsed = start.elapsed();
    check(
        wf_gap < 1e-3 && !wf_below && zf_residual < 1e-8 && det_gap < 1e-9 && elapsed < Duration::from_secs(30),
        format!(
            "water_filling_vs_grid={wf_gap:.1e} zf_residual={zf_residual:.1e} det_vs_eigen={det_gap:.1e}; {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn determinism(runs: &[(&str, &ScenarioFile, &PresetRun)]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, file, first) in runs {
        let again = run_preset(file, 1);
        let wide = run_preset(file, 8);
        let same = again.csv == first.csv && wide.csv == first.csv && wide.summary_csv == first.summary_csv;
        let fast = again.elapsed + wide.elapsed < first.elapsed * 4;
        ok &= same && fast;
        parts.push(format!(
            "{name}: identical={same} ({} bytes, 1 and 8 workers, {:.1} s)",
            first.csv.len(),
            (again.elapsed + wide.elapsed).as_secs_f64()
        ));
    }
    check(ok, parts.join("; "))
}

fn main() {
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    let mut report = |name: &'static str, v: Verdict| {
        println!("{} {name}: {}", if v.ok { "PASS" } else { "FAIL" }, v.detail);
        results.push((name, v));
    };

    report("rank_taxonomy", timed(Duration::from_secs(10), rank_taxonomy));
    report("distributed_rank_law", timed(Duration::from_secs(5), distributed_rank_law));
    report("steering_orthogonality", timed(Duration::from_secs(1), steering_orthogonality));

    let fig4 = preset("fig4").unwrap();
    let fig4_run = run_preset(&fig4, 1);
    report("fig4_trend", fig4_trend(&fig4_run));

    let fig6 = preset("fig6a").unwrap();
    let fig6_run = run_preset(&fig6, 1);
    report("fig6_trend", fig6_trend(&fig6_run, &fig6));

    report("fig5_structure", fig5_structure());
    report("numerics_oracles", numerics_oracles());
    report(
        "determinism",
        determinism(&[("fig6a", &fig6, &fig6_run), ("fig4", &fig4, &fig4_run)]),
    );

    let failed: Vec<&str> = results.iter().filter(|(_, v)| !v.ok).map(|(n, _)| *n).collect();
    println!("acceptance: {}/{} passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
