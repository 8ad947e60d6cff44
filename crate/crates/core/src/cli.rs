//! The `toa-lift` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{
    basin_csv, basin_sweep, rows_csv, run_campaign, saddle_loop_check, trace_csv, trials_csv,
    worked_example, BasinGrid, BasinLabel, BenchmarkRow, DEFAULT_TRIALS,
};
use crate::geometry::{Position, Scenario};
use crate::objectives::{ObjectiveKind, ParameterVector};
use crate::optimizer::{solve, SolverSettings};
use crate::scenario::{
    planted_example, random_initial, random_scenario_with, seeded_rng, GeneratorConfig,
    PlantedExampleConfig, INITIAL_LAMBDA,
};
use crate::stationarity::{classify, default_grad_tol, find_local_minima, DEFAULT_CURV_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

/// Lifted kinds must stay below this mean error under `bench --check`.
pub const CHECK_MAX_LIFTED_MEAN: f64 = 0.01;

#[derive(Debug, Parser)]
#[command(
    name = "toa-lift",
    version,
    about = "Time-of-arrival lateration with a lifted objective"
)]
struct Cli {
    /// Seed for every random draw [default: 0, or the config file's seed].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

impl Cli {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one scenario from one start and print the result as JSON.
    Solve(SolveArgs),
    /// Run a Monte-Carlo campaign and write rows and trials CSVs.
    Bench(BenchArgs),
    /// Solve the planted 2-D example with F2 and FL2 and write both traces.
    Example2d(SettingsArg),
    /// Classify a point of an objective and print the report as JSON.
    Classify(ClassifyArgs),
    /// Sweep a grid of start positions and write the basin raster CSV.
    Basin(BasinArgs),
}

#[derive(Debug, Args)]
struct SettingsArg {
    /// Solver settings JSON; missing fields take their defaults.
    #[arg(long)]
    settings: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario JSON. Without it a scenario is drawn from `--dim`, `--stations` and the seed.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    stations: usize,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value = "FL2")]
    kind: ObjectiveKind,
    /// Start position as comma-separated coordinates; random if omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    start: Option<Vec<f64>>,
    #[arg(long, default_value_t = INITIAL_LAMBDA, allow_hyphen_values = true)]
    lambda: f64,
    /// Record the iterate trace and write it to `trace.csv`.
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    settings: SettingsArg,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Generator config JSON; `--seed` overrides its seed.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    stations: usize,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "F1,F2,FL1,FL2")]
    kinds: Vec<ObjectiveKind>,
    /// Exit with status 2 unless every lifted kind has zero failures
    /// and a mean error below 0.01.
    #[arg(long)]
    check: bool,
    #[command(flatten)]
    settings: SettingsArg,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    kind: ObjectiveKind,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    point: Vec<f64>,
    /// λ for lifted kinds.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    lambda: f64,
    #[arg(long)]
    grad_tol: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_CURV_TOL)]
    curv_tol: f64,
}

#[derive(Debug, Args)]
struct BasinArgs {
    /// Scenario JSON; the planted 2-D example if omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    kind: ObjectiveKind,
    #[arg(long, default_value_t = 3.0)]
    half_width: f64,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    /// Known local minimum `x,y`; repeatable. Searched for when omitted.
    #[arg(
        long = "local-min",
        value_delimiter = ',',
        allow_hyphen_values = true,
        num_args = 1
    )]
    local_min: Vec<f64>,
    #[command(flatten)]
    settings: SettingsArg,
}

/// Runs the command line and returns the process exit status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_CONFIG
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<i32> {
    match &cli.command {
        Command::Solve(args) => cmd_solve(cli, args),
        Command::Bench(args) => cmd_bench(cli, args),
        Command::Example2d(args) => cmd_example2d(cli, args),
        Command::Classify(args) => cmd_classify(cli, args),
        Command::Basin(args) => cmd_basin(cli, args),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_settings(arg: &SettingsArg) -> anyhow::Result<SolverSettings> {
    let settings: SolverSettings = match &arg.settings {
        Some(path) => read_json(path)?,
        None => SolverSettings::default(),
    };
    settings.validate()?;
    Ok(settings)
}

fn write_output(cli: &Cli, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let path = cli.out_dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output types serialize")
}

/// Loads `--scenario` or draws one; also returns the generator used so
/// follow-up draws stay on the same seeded stream.
fn load_scenario(
    cli: &Cli,
    args: &ScenarioArgs,
) -> anyhow::Result<(Scenario, GeneratorConfig, rand_chacha::ChaCha8Rng)> {
    let mut rng = seeded_rng(cli.seed());
    let scenario = match &args.scenario {
        Some(path) => read_json::<Scenario>(path)?,
        None => {
            let cfg = GeneratorConfig::new(args.dim, args.stations, cli.seed());
            random_scenario_with(&cfg, &mut rng)?
        }
    };
    let cfg = GeneratorConfig::new(scenario.dim(), scenario.n_stations(), cli.seed());
    Ok((scenario, cfg, rng))
}

fn cmd_solve(cli: &Cli, args: &SolveArgs) -> anyhow::Result<i32> {
    let mut settings = load_settings(&args.settings)?;
    settings.record_trace |= args.trace;
    let (scenario, cfg, mut rng) = load_scenario(cli, &args.scenario)?;
    let x0 = match &args.start {
        Some(coords) => {
            ParameterVector::for_kind(args.kind, Position::new(coords.clone())?, args.lambda)
        }
        None => {
            let mut x0 = random_initial(&cfg, args.kind, &mut rng);
            if args.kind.is_lifted() {
                x0.lambda = Some(args.lambda);
            }
            x0
        }
    };
    if x0.dim() != scenario.dim() {
        bail!(
            "start has {} coordinates, scenario has dimension {}",
            x0.dim(),
            scenario.dim()
        );
    }
    let result = solve(args.kind, &scenario, &x0, &settings)?;
    if args.trace {
        write_output(cli, "trace.csv", &trace_csv(&scenario, &result)?)?;
    }
    println!("{}", to_json(&result));
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CampaignMetadata<'a> {
    config: &'a GeneratorConfig,
    trials: usize,
    kinds: &'a [ObjectiveKind],
    settings: &'a SolverSettings,
    start_policy: &'static str,
    std_convention: &'static str,
}

/// Lifted rows that break the `--check` thresholds.
pub fn check_violations(rows: &[BenchmarkRow]) -> Vec<String> {
    rows.iter()
        .filter(|r| r.kind.is_lifted())
        .filter_map(|r| {
            if r.failure_count > 0 {
                Some(format!(
                    "{}: {} local-minimum failures",
                    r.kind, r.failure_count
                ))
            } else if r.mean_error.is_nan() || r.mean_error >= CHECK_MAX_LIFTED_MEAN {
                Some(format!("{}: mean error {:e}", r.kind, r.mean_error))
            } else {
                None
            }
        })
        .collect()
}

fn cmd_bench(cli: &Cli, args: &BenchArgs) -> anyhow::Result<i32> {
    let settings = load_settings(&args.settings)?;
    let mut config = match &args.config {
        Some(path) => read_json::<GeneratorConfig>(path)?,
        None => GeneratorConfig::new(args.dim, args.stations, cli.seed()),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let campaign = run_campaign(&config, &args.kinds, args.trials, &settings)?;
    write_output(cli, "trials.csv", &trials_csv(&campaign.trials))?;
    write_output(cli, "rows.csv", &rows_csv(&campaign.rows))?;
    let meta = CampaignMetadata {
        config: &config,
        trials: args.trials,
        kinds: &args.kinds,
        settings: &settings,
        start_policy:
            "one start position per trial shared by all kinds; lifted kinds start at lambda = 1",
        std_convention: "population",
    };
    write_output(cli, "campaign.json", &to_json(&meta))?;

    let loop_check = saddle_loop_check(&config, &campaign.trials)?;
    if cli.json {
        #[derive(Serialize)]
        struct Out<'a> {
            rows: &'a [BenchmarkRow],
            saddle_loop: &'a crate::bench::SaddleLoopSummary,
        }
        println!(
            "{}",
            to_json(&Out {
                rows: &campaign.rows,
                saddle_loop: &loop_check,
            })
        );
    } else {
        println!(
            "{:>3} {:>5} {:>12} {:>12} {:>9} {:>7}",
            "n", "kind", "mean", "std", "failures", "trials"
        );
        for r in &campaign.rows {
            println!(
                "{:>3} {:>5} {:>12.4e} {:>12.4e} {:>9} {:>7}",
                r.n_stations, r.kind, r.mean_error, r.std_error, r.failure_count, r.trial_count
            );
        }
        println!(
            "unlifted failures at verified minima: {}, lifted saddles there: {}",
            loop_check.verified_minima, loop_check.lifted_saddles
        );
    }
    if args.check {
        let violations = check_violations(&campaign.rows);
        if !violations.is_empty() {
            for v in &violations {
                eprintln!("check failed: {v}");
            }
            return Ok(EXIT_CHECK_FAILED);
        }
    }
    Ok(EXIT_OK)
}

fn cmd_example2d(cli: &Cli, args: &SettingsArg) -> anyhow::Result<i32> {
    let settings = load_settings(args)?;
    let ex = worked_example(&settings)?;
    write_output(
        cli,
        "example2d_F2_trace.csv",
        &trace_csv(&ex.scenario, &ex.unlifted)?,
    )?;
    write_output(
        cli,
        "example2d_FL2_trace.csv",
        &trace_csv(&ex.scenario, &ex.lifted)?,
    )?;
    if cli.json {
        #[derive(Serialize)]
        struct Out<'a> {
            unlifted: &'a crate::optimizer::OptimizationResult,
            lifted: &'a crate::optimizer::OptimizationResult,
        }
        let strip = |r: &crate::optimizer::OptimizationResult| {
            let mut r = r.clone();
            r.trace = None;
            r
        };
        let (u, l) = (strip(&ex.unlifted), strip(&ex.lifted));
        println!(
            "{}",
            to_json(&Out {
                unlifted: &u,
                lifted: &l
            })
        );
    } else {
        for res in [&ex.unlifted, &ex.lifted] {
            let p = res.final_point.position.coords();
            println!(
                "{:>3}: ({:+.6}, {:+.6}) lambda {} after {} iterations ({}), distance to G {:.3e}",
                res.kind,
                p[0],
                p[1],
                res.final_point
                    .lambda
                    .map_or("-".into(), |l| format!("{l:+.3e}")),
                res.iterations,
                res.termination,
                res.final_point
                    .position
                    .squared_distance_to(ex.scenario.ground_truth())
                    .sqrt(),
            );
        }
    }
    Ok(EXIT_OK)
}

fn cmd_classify(cli: &Cli, args: &ClassifyArgs) -> anyhow::Result<i32> {
    let (scenario, _, _) = load_scenario(cli, &args.scenario)?;
    let p = ParameterVector::for_kind(args.kind, Position::new(args.point.clone())?, args.lambda);
    let value = crate::objectives::evaluate(args.kind, &scenario, &p)?;
    let grad_tol = args.grad_tol.unwrap_or_else(|| default_grad_tol(value));
    let report = classify(args.kind, &scenario, &p, grad_tol, args.curv_tol)?;
    println!("{}", report.to_json());
    Ok(EXIT_OK)
}

fn cmd_basin(cli: &Cli, args: &BasinArgs) -> anyhow::Result<i32> {
    let settings = load_settings(&args.settings)?;
    let (scenario, planted) = match &args.scenario {
        Some(path) => (read_json::<Scenario>(path)?, false),
        None => (
            planted_example(&PlantedExampleConfig::worked_example())?,
            true,
        ),
    };
    if !args.local_min.len().is_multiple_of(2) {
        bail!("--local-min takes x,y pairs");
    }
    let mut minima: Vec<Position> = args
        .local_min
        .chunks(2)
        .map(|c| Position::new(c.to_vec()))
        .collect::<Result<_, _>>()?;
    if minima.is_empty() {
        if planted {
            minima.push(Position::origin(2)?);
        } else {
            let mut rng = seeded_rng(cli.seed());
            let found = find_local_minima(args.kind, &scenario, 200, 10.0, &settings, &mut rng)?;
            minima.extend(found.into_iter().map(|m| m.position));
        }
    }
    let grid = BasinGrid::square(args.half_width, args.step);
    let cells = basin_sweep(&scenario, args.kind, &grid, &minima, &settings)?;
    let path = write_output(cli, &format!("basin_{}.csv", args.kind), &basin_csv(&cells))?;
    let count = |label| cells.iter().filter(|c| c.label == label).count();
    if cli.json {
        println!(
            "{}",
            serde_json::json!({
                "raster": path,
                "global_min": count(BasinLabel::GlobalMin),
                "local_min": count(BasinLabel::LocalMin),
                "diverged": count(BasinLabel::Diverged),
            })
        );
    } else {
        println!(
            "{}: {} nodes, GlobalMin {}, LocalMin {}, Diverged {} -> {}",
            args.kind,
            cells.len(),
            count(BasinLabel::GlobalMin),
            count(BasinLabel::LocalMin),
            count(BasinLabel::Diverged),
            path.display()
        );
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(kind: ObjectiveKind, failures: usize, mean: f64) -> BenchmarkRow {
        BenchmarkRow {
            n_stations: 4,
            kind,
            mean_error: mean,
            std_error: 0.0,
            failure_count: failures,
            trial_count: 10,
        }
    }

    #[test]
    fn check_ignores_unlifted_rows() {
        let rows = [
            row(ObjectiveKind::F2, 3, 2.0),
            row(ObjectiveKind::FL2, 0, 1e-3),
        ];
        assert!(check_violations(&rows).is_empty());
        let rows = [
            row(ObjectiveKind::FL1, 1, 1e-3),
            row(ObjectiveKind::FL2, 0, 0.5),
        ];
        assert_eq!(check_violations(&rows).len(), 2);
        assert_eq!(
            check_violations(&[row(ObjectiveKind::FL2, 0, f64::NAN)]).len(),
            1
        );
    }

    #[test]
    fn usage_errors_are_config_errors() {
        assert_eq!(cli_main(["toa-lift", "frobnicate"]), EXIT_CONFIG);
        assert_eq!(
            cli_main(["toa-lift", "classify", "--kind", "F9", "--point", "0,0"]),
            EXIT_CONFIG
        );
        assert_eq!(cli_main(["toa-lift", "--help"]), EXIT_OK);
    }
}
