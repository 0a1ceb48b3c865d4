use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use risdof_core::harness::{
    self, aligned_composite, evaluate_trial, metadata_toml, assumed_defaults, records_to_csv, run_file,
    summarize_file, summary_to_csv, write_atomic, ScenarioConfig, ScenarioFile, PRESET_NAMES,
};
use risdof_core::numerics::svd;
use risdof_core::placement::{assess_plan, plan_sites};
use risdof_core::{ArrayGeometry, Error, ErrorKind, PlanRequest, Result, DEFAULT_RANK_TOL};

#[derive(Parser)]
#[command(name = "risdof", version, about = "Degrees of freedom and rates of RIS-assisted MIMO links")]
struct Cli {
    /// Replace the seed of every scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo trials. Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank and singular values of the phase-aligned composite channel.
    Rank(PointArgs),
    /// Achievable rate of a single trial.
    Rate(PointArgs),
    /// Run every scenario of a file and write per-trial CSV, summary and metadata.
    Sweep(SweepArgs),
    /// Place distributed RIS sites and report the resulting rank.
    Plan(PlanArgs),
    /// Run a built-in figure preset.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct PointArgs {
    /// Scenario TOML file or preset name.
    #[arg(long)]
    config: String,
    /// Scenario id; defaults to the first one in the file.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, default_value_t = 0)]
    sweep_index: usize,
    #[arg(long, default_value_t = 0)]
    trial: usize,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario TOML file or preset name.
    #[arg(long)]
    config: String,
    /// Per-trial CSV; defaults to `<out-dir>/<config stem>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "RISDOF_OUT_DIR", default_value = "results")]
    out_dir: PathBuf,
    /// Cap on Monte Carlo trials per point, for quick runs.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Direct {
    Los,
    Blocked,
}

#[derive(Args)]
struct PlanArgs {
    /// BS antennas.
    #[arg(long, default_value_t = 128)]
    m: usize,
    /// User antennas.
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Total RIS elements, split across sites.
    #[arg(long, default_value_t = 600)]
    n: usize,
    /// Number of sites; defaults to K minus the direct-path rank.
    #[arg(long)]
    sites: Option<usize>,
    #[arg(long, value_enum, default_value_t = Direct::Los)]
    direct: Direct,
    /// Element spacing of the BS and user arrays, in wavelengths.
    #[arg(long, default_value_t = 0.5)]
    spacing: f64,
    #[arg(long, default_value_t = risdof_core::channel::DEFAULT_WAVELENGTH)]
    wavelength: f64,
    #[arg(long, default_value_t = 82.0)]
    bs_ris: f64,
    #[arg(long, default_value_t = 28.0)]
    ris_user: f64,
    #[arg(long, default_value_t = 100.0)]
    bs_user: f64,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
    preset: String,
    #[arg(long, env = "RISDOF_OUT_DIR", default_value = "results")]
    out_dir: PathBuf,
    /// Cap on Monte Carlo trials per point, for quick runs.
    #[arg(long)]
    trials: Option<usize>,
}

fn load(source: &str, seed: Option<u64>) -> Result<ScenarioFile> {
    let path = Path::new(source);
    let file = if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ScenarioFile::from_toml(&text)?
    } else if PRESET_NAMES.contains(&source) {
        harness::preset(source)?
    } else {
        let e = std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or preset");
        return Err(Error::io(path, e));
    };
    Ok(match seed {
        Some(s) => file.with_seed(s),
        None => file,
    })
}

fn cap_trials(mut file: ScenarioFile, cap: Option<usize>) -> Result<ScenarioFile> {
    if let Some(t) = cap {
        if t == 0 {
            return Err(Error::Config("--trials must be positive".into()));
        }
        for s in &mut file.scenarios {
            s.trials = s.trials.min(t);
        }
    }
    Ok(file)
}

fn pick<'a>(file: &'a ScenarioFile, id: Option<&str>) -> Result<&'a ScenarioConfig> {
    match id {
        Some(id) => file
            .get(id)
            .ok_or_else(|| Error::Config(format!("no scenario {id:?} in config"))),
        None => file
            .scenarios
            .first()
            .ok_or_else(|| Error::Config("config has no scenarios".into())),
    }
}

fn sweep_value(cfg: &ScenarioConfig, index: usize) -> Result<f64> {
    cfg.sweep.values.get(index).copied().ok_or_else(|| {
        Error::Config(format!(
            "sweep index {index} out of range; scenario {:?} has {} points",
            cfg.id,
            cfg.sweep.values.len()
        ))
    })
}

fn list(values: impl IntoIterator<Item = f64>) -> String {
    let items: Vec<String> = values.into_iter().map(|v| format!("{v:.6e}")).collect();
    format!("[{}]", items.join(", "))
}

fn rank(cli: &Cli, args: &PointArgs) -> Result<()> {
    let file = load(&args.config, cli.seed)?;
    let cfg = pick(&file, args.scenario.as_deref())?;
    let value = sweep_value(cfg, args.sweep_index)?;
    let h = aligned_composite(cfg, args.sweep_index, args.trial)?;
    let dec = svd(&h)?;
    println!("scenario = {:?}", cfg.id);
    println!("sweep_value = {value}");
    println!("rank = {}", dec.rank(DEFAULT_RANK_TOL));
    println!("singular_values = {}", list(dec.singular_values.iter().copied()));
    Ok(())
}

fn rate(cli: &Cli, args: &PointArgs) -> Result<()> {
    let file = load(&args.config, cli.seed)?;
    let cfg = pick(&file, args.scenario.as_deref())?;
    let value = sweep_value(cfg, args.sweep_index)?;
    let out = evaluate_trial(cfg, args.sweep_index, args.trial)?;
    println!("scenario = {:?}", cfg.id);
    println!("sweep_value = {value}");
    println!("rate = {}", out.result.rate);
    println!("effective_rank = {}", out.result.effective_rank);
    println!("streams = {}", out.stream_count);
    println!("per_stream_snr_db = {}", list(out.result.per_stream_snr_db.iter().copied()));
    println!("ris_share = {}", out.ris_share);
    println!("amplification = {}", list(out.amplification.iter().copied()));
    println!("seed = {}", out.seed);
    println!("fingerprint = {:?}", out.result.config_fingerprint);
    Ok(())
}

fn sibling(csv: &Path, suffix: &str) -> PathBuf {
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    csv.with_file_name(format!("{stem}{suffix}"))
}

/// Writes the per-trial CSV, `<stem>_summary.csv` and `<stem>.meta.toml`.
fn write_outputs(file: &ScenarioFile, csv: &Path, workers: Option<usize>) -> Result<()> {
    let records = run_file(file, workers)?;
    let summary = summarize_file(file, &records)?;
    let meta = metadata_toml(file, &assumed_defaults())?;
    write_atomic(csv, &records_to_csv(&records)?)?;
    write_atomic(&sibling(csv, "_summary.csv"), &summary_to_csv(&summary)?)?;
    write_atomic(&sibling(csv, ".meta.toml"), meta.as_bytes())?;
    eprintln!("wrote {} records to {}", records.len(), csv.display());
    Ok(())
}

fn sweep(cli: &Cli, args: &SweepArgs) -> Result<()> {
    let file = cap_trials(load(&args.config, cli.seed)?, args.trials)?;
    let out = match &args.out {
        Some(p) => p.clone(),
        None => {
            let stem = Path::new(&args.config)
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("sweep");
            args.out_dir.join(format!("{stem}.csv"))
        }
    };
    write_outputs(&file, &out, cli.workers)
}

fn plan(args: &PlanArgs) -> Result<()> {
    let spacing = args.spacing * args.wavelength;
    let request = PlanRequest {
        bs: ArrayGeometry::new(args.m, spacing, args.wavelength)?,
        user: ArrayGeometry::new(args.k, spacing, args.wavelength)?,
        direct_rank: usize::from(args.direct == Direct::Los),
        direct_aod: std::f64::consts::FRAC_PI_2,
        direct_aoa: std::f64::consts::FRAC_PI_2,
        bs_ris_distance: args.bs_ris,
        ris_user_distance: args.ris_user,
        bs_user_distance: args.bs_user,
        total_elements: args.n,
    };
    let count = args
        .sites
        .unwrap_or_else(|| args.k.saturating_sub(request.direct_rank));
    let plan = plan_sites(&request, count)?;
    let report = assess_plan(&plan, &request)?.to_toml()?;
    if let Some(path) = &args.out {
        write_atomic(path, report.as_bytes())?;
    }
    print!("{report}");
    Ok(())
}

fn reproduce(cli: &Cli, args: &ReproduceArgs) -> Result<()> {
    let file = cap_trials(load(&args.preset, cli.seed)?, args.trials)?;
    eprintln!("assumed defaults:");
    for (k, v) in assumed_defaults() {
        eprintln!("  {k}: {v}");
    }
    let csv = args.out_dir.join(format!("{}.csv", args.preset));
    write_outputs(&file, &csv, cli.workers)
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Io => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Rank(a) => rank(&cli, a),
        Command::Rate(a) => rate(&cli, a),
        Command::Sweep(a) => sweep(&cli, a),
        Command::Plan(a) => plan(a),
        Command::Reproduce(a) => reproduce(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
