use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use torsilimit::study::{self, CheckLimit, PathSpec, Study, StudyConfig};
use torsilimit::Error;

#[derive(Parser)]
#[command(name = "torsilimit", version, about = "Shaft-fatigue limits for subsynchronous load fluctuations")]
struct Cli {
    #[command(flatten)]
    opts: StudyArgs,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct StudyArgs {
    /// Study configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Network case (JSON).
    #[arg(long, global = true)]
    case: Option<PathBuf>,
    /// Shaft file, or GEN=PATH (repeatable).
    #[arg(long, global = true)]
    shafts: Vec<String>,
    /// Material file, or GEN=PATH (repeatable).
    #[arg(long, global = true)]
    materials: Vec<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    cap_fraction: Option<f64>,
    /// Blade-vibration frequency-deviation limit, Hz.
    #[arg(long, global = true)]
    delta_f_max: Option<f64>,
    #[arg(long, global = true)]
    threshold_mw: Option<f64>,
    #[arg(long, global = true)]
    perturbation_mw: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Per-generator allowable power-fluctuation curves.
    Limits,
    /// Interaction factors between generators and data-center buses.
    Ifs,
    /// Site screening and the allocation LP.
    Plan,
    /// Time-domain validation of a fluctuation scenario.
    Validate { scenario: PathBuf },
    /// FFT compliance of a measured 10 s power series.
    Check {
        series: PathBuf,
        /// Sample rate, Hz; taken from the time column when omitted.
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long, conflicts_with = "bus", required_unless_present = "bus")]
        limit_mw: Option<f64>,
        /// Use this bus's allocation from plan.json as the limit.
        #[arg(long)]
        bus: Option<u32>,
        #[arg(long)]
        f_sync: Option<f64>,
    },
    /// Limits, interaction factors, plan and optional validation.
    RunAll {
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

fn path_spec(items: &[String]) -> Result<Option<PathSpec>, Error> {
    match items {
        [] => Ok(None),
        [single] if !single.contains('=') => Ok(Some(PathSpec::Single(single.into()))),
        _ => {
            let mut map = BTreeMap::new();
            for item in items {
                let (g, p) = item.split_once('=').ok_or_else(|| {
                    Error::Validation(format!("expected GEN=PATH when several files are given, got `{item}`"))
                })?;
                map.insert(g.to_string(), PathBuf::from(p));
            }
            Ok(Some(PathSpec::PerGenerator(map)))
        }
    }
}

fn load_study(a: &StudyArgs) -> Result<Study, Error> {
    let cwd = PathBuf::from(".");
    let (mut config, base) = match &a.config {
        Some(p) => (
            StudyConfig::from_file(p)?,
            p.parent().map(PathBuf::from).unwrap_or_else(|| cwd.clone()),
        ),
        None => (StudyConfig::default(), cwd.clone()),
    };
    let abs = |p: &PathBuf| if p.is_relative() { std::env::current_dir().map(|d| d.join(p)).unwrap_or(p.clone()) } else { p.clone() };
    let abs_spec = |s: PathSpec| match s {
        PathSpec::Single(p) => PathSpec::Single(abs(&p)),
        PathSpec::PerGenerator(m) => PathSpec::PerGenerator(m.into_iter().map(|(k, v)| (k, abs(&v))).collect()),
    };
    if let Some(c) = &a.case {
        config.case = Some(abs(c));
    }
    if let Some(s) = path_spec(&a.shafts)? {
        config.shafts = Some(abs_spec(s));
    }
    if let Some(s) = path_spec(&a.materials)? {
        config.materials = Some(abs_spec(s));
    }
    if let Some(o) = &a.out {
        config.out = abs(o);
    }
    if let Some(v) = a.beta {
        config.beta = v;
    }
    if let Some(v) = a.cap_fraction {
        config.cap_fraction = v;
    }
    if let Some(v) = a.delta_f_max {
        config.delta_f_max_hz = v;
    }
    if let Some(v) = a.threshold_mw {
        config.threshold_mw = Some(v);
    }
    if let Some(v) = a.perturbation_mw {
        config.perturbation_mw = Some(v);
    }
    Study::new(config, &base)
}

fn configure_threads() {
    let Ok(v) = std::env::var("TORSILIMIT_THREADS") else {
        return;
    };
    match v.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not set thread count: {e}");
            }
        }
        _ => log::warn!("ignoring TORSILIMIT_THREADS={v}"),
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    let study = load_study(&cli.opts)?;
    match cli.cmd {
        Cmd::Limits => {
            let (report, _) = study::run_limits(&study)?;
            for g in &report.generators {
                log::info!(
                    "{}: P_e^max = {:.4} MW (min at {:.3} Hz, {} notches)",
                    g.generator,
                    g.p_e_max_mw,
                    g.argmin_hz,
                    g.notches_hz.len()
                );
            }
            Ok(true)
        }
        Cmd::Ifs => {
            let ifs = study::run_ifs(&study)?;
            for (j, bus) in ifs.dc_buses.iter().enumerate() {
                if ifs.valid[j] {
                    log::info!("bus {bus}: column sum {:.6}", ifs.column_sum(j));
                }
            }
            Ok(ifs.all_valid())
        }
        Cmd::Plan => {
            let plan = study::run_plan(&study)?;
            log::info!(
                "{} sites, total {:.3} MW at alpha = {:.3} after {} iterations",
                plan.allocations.len(),
                plan.total_mw,
                plan.alpha_final,
                plan.iterations
            );
            Ok(plan.feasible)
        }
        Cmd::Validate { scenario } => {
            let v = study::run_validate(&study, &scenario)?;
            for g in &v.generators {
                log::info!(
                    "{}: {} (max |df| {:.4} Hz, max D {:.3e})",
                    g.generator,
                    if g.pass { "PASS" } else { "FAIL" },
                    g.peak_freq_dev_hz,
                    g.max_damage
                );
            }
            Ok(v.pass)
        }
        Cmd::Check {
            series,
            rate,
            limit_mw,
            bus,
            f_sync,
        } => {
            let limit = match (limit_mw, bus) {
                (Some(v), _) => CheckLimit::Mw(v),
                (None, Some(b)) => CheckLimit::Bus(b),
                (None, None) => unreachable!("clap enforces one of --limit-mw/--bus"),
            };
            let r = study::run_check(&study, &series, rate, limit, f_sync)?;
            log::info!(
                "{}: amplitude sum {:.4} MW vs limit {:.4} MW",
                if r.result.pass { "PASS" } else { "FAIL" },
                r.result.amplitude_sum_mw,
                r.result.limit_mw
            );
            Ok(r.result.pass)
        }
        Cmd::RunAll { scenario } => {
            let mut study = study;
            if let Some(s) = scenario {
                study.config.scenario = Some(s);
            }
            let r = study::run_all(&study)?;
            Ok(r.ifs.all_valid() && r.plan.feasible && r.verdict.map_or(true, |v| v.pass))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    configure_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
