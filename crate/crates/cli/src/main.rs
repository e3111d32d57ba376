use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rfrw::bench::{consistency_trend, emit_tables, render_table, run_experiment, ExperimentSpec, Method, PolicyChoice, TableFormat};
use rfrw::dgp::{generate, DgpKind, DgpSpec};
use rfrw::embed::{one_step_forecasts, recursive_forecasts, LagSpec, TransformPipeline};
use rfrw::io::{read_series, training_data, write_forecasts, write_series, ModelFile, SeriesFile};
use rfrw::policy::paper_node_size;
use rfrw::{fit_forest, Error, ForestConfig, GrowthPolicy, MTry, WeightScheme};

#[derive(Parser)]
#[command(name = "rfrw", version, about = "Random-weight forests for time-series forecasting")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "RFRW_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a path of a benchmark process to CSV.
    Simulate(SimulateArgs),
    /// Fit a forest on a series CSV and save the model.
    Fit(FitArgs),
    /// One-step forecasts of the last H points of a series.
    Predict(PredictArgs),
    /// Run a Monte-Carlo benchmark and write result tables.
    Bench(BenchArgs),
    /// Check every tree of a model against its growth policy.
    Audit(AuditArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// m1, m2 or m3.
    #[arg(long)]
    dgp: DgpKind,
    #[arg(long)]
    len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = rfrw::dgp::DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Algk,
    Valid,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Lags of the response.
    #[arg(long)]
    lags: usize,
    /// Lags of an exogenous column, as `name:n`; repeatable.
    #[arg(long = "exog", value_parser = parse_exog)]
    exog: Vec<(String, usize)>,
    /// exp1, lognorm, sqrtgamma, ones, bootstrap or mbb:<block length>.
    #[arg(long, default_value = "exp1")]
    weights: WeightScheme,
    #[arg(long, value_enum, default_value = "algk")]
    policy: PolicyArg,
    /// Minimum node size, or `auto` for the T-dependent schedule.
    #[arg(long, default_value = "auto")]
    k: String,
    /// Minimum child fraction under `--policy valid`.
    #[arg(long, default_value_t = 0.2)]
    xi: f64,
    /// Must-split size under `--policy valid` (default 2k).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long = "B", default_value_t = 100)]
    num_trees: usize,
    /// third, all or a number.
    #[arg(long, default_value = "third")]
    mtry: MTry,
    /// none or logdiff+sdiff:<period>.
    #[arg(long, default_value = "none")]
    pipeline: TransformPipeline,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Leave the last H observations out of training.
    #[arg(long, default_value_t = 0)]
    holdout: usize,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    series: PathBuf,
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    /// Forecast H steps past the end of the series, feeding predictions back.
    #[arg(long)]
    recursive: bool,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    dgp: DgpKind,
    /// Comma-separated: rfrw1, rfrw2 (suffix -ln or -sg), tsrf, rf, ones.
    #[arg(long, value_delimiter = ',', default_value = "rfrw1,rfrw2,tsrf,rf")]
    methods: Vec<Method>,
    #[arg(long = "T", value_delimiter = ',', default_value = "500,1000,2000")]
    t_values: Vec<usize>,
    /// Lag scenarios; defaults to the process's under/correct/over set.
    #[arg(long, value_delimiter = ',')]
    scenarios: Vec<usize>,
    #[arg(long, default_value_t = 30)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    test_size: usize,
    #[arg(long = "B", default_value_t = 100)]
    num_trees: usize,
    /// Fixed minimum node size instead of the T-dependent schedule.
    #[arg(long)]
    k: Option<usize>,
    /// Grow (xi, k, 2k)-valid partitions with this xi.
    #[arg(long)]
    valid_xi: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    series: PathBuf,
}

/// Error paired with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const INVALID: u8 = 2;
const RUNTIME: u8 = 3;

impl Failure {
    fn invalid(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: INVALID, error: error.into() }
    }
}

/// Fit and inversion failures exit 3; everything about bad input exits 2.
fn classify(e: Error) -> Failure {
    let code = match e {
        Error::ZeroWeightLeaf
        | Error::EmptyChild
        | Error::DegenerateData
        | Error::DegenerateVariance
        | Error::IndexOutOfHistory(_) => RUNTIME,
        _ => INVALID,
    };
    Failure { code, error: e.into() }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn parse_exog(s: &str) -> Result<(String, usize), String> {
    let (name, n) = s.split_once(':').ok_or("expected name:lags")?;
    let n = n.parse().map_err(|_| format!("bad lag count `{n}`"))?;
    Ok((name.to_string(), n))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(INVALID);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Bench(a) => bench(a),
        Command::Audit(a) => audit(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn simulate(a: SimulateArgs) -> CliResult<u8> {
    let spec = DgpSpec { kind: a.dgp, burn_in: a.burn_in, seed: a.seed };
    let series = generate(&spec, a.len).map_err(classify)?;
    write_series(&a.out, &SeriesFile::from_series(&series)).map_err(classify)?;
    Ok(0)
}

fn fit(a: FitArgs) -> CliResult<u8> {
    let started = Instant::now();
    let file = read_series(&a.series).map_err(classify)?;
    let uses_log = a.pipeline.steps.contains(&rfrw::embed::Step::LogDiff);
    let series = file.to_series(uses_log).map_err(classify)?;
    if a.holdout >= series.len() {
        return Err(Failure::invalid(anyhow::anyhow!(
            "holdout {} leaves no training data ({} observations)",
            a.holdout,
            series.len()
        )));
    }
    let train_len = series.len() - a.holdout;
    let mut lag_spec = LagSpec::response(a.lags);
    for (name, n) in &a.exog {
        lag_spec = lag_spec.with_channel(name.clone(), *n);
    }
    let (pipeline, data) = training_data(&series.slice(0..train_len), &lag_spec, &a.pipeline).map_err(classify)?;
    let k = match a.k.as_str() {
        "auto" => paper_node_size(data.n_rows()).map_err(classify)?,
        n => n
            .parse()
            .map_err(|_| Failure::invalid(anyhow::anyhow!("bad --k `{n}`")))?,
    };
    let policy = match a.policy {
        PolicyArg::Algk => GrowthPolicy::AlgorithmicK { k },
        PolicyArg::Valid => GrowthPolicy::ValidPartition { xi: a.xi, k, m: a.m.unwrap_or(2 * k) },
    };
    let config = ForestConfig {
        num_trees: a.num_trees,
        m_try: a.mtry,
        policy,
        weight_scheme: a.weights,
        master_seed: a.seed,
    };
    let m_try = config.validate(data.n_features()).map_err(classify)?;
    let forest = fit_forest(&data, &config).map_err(|e| match e {
        Error::InvalidConfig(_) | Error::InvalidBlockLen { .. } => classify(e),
        e => Failure { code: RUNTIME, error: e.into() },
    })?;
    let model = ModelFile::new(&forest, lag_spec, pipeline, train_len, data.n_rows());
    model.save(&a.out).map_err(classify)?;
    println!(
        "fitted T={} p={} B={} k={} m_try={} weights={} policy={} in {:.2}s",
        data.n_rows(),
        data.n_features(),
        config.num_trees,
        k,
        m_try,
        config.weight_scheme,
        policy.tag(),
        started.elapsed().as_secs_f64()
    );
    Ok(0)
}

fn predict(a: PredictArgs) -> CliResult<u8> {
    let model = ModelFile::load(&a.model).map_err(classify)?;
    let forest = model.forest().map_err(classify)?;
    let file = read_series(&a.series).map_err(classify)?;
    let uses_log = model.pipeline.steps.contains(&rfrw::embed::Step::LogDiff);
    let series = file.to_series(uses_log).map_err(classify)?;
    for (name, _) in &model.lag_spec.exogenous_lags {
        if series.channel(name).is_none() {
            return Err(classify(Error::UnknownChannel(name.clone())));
        }
    }
    let pipeline = (!model.pipeline.is_identity()).then_some(&model.pipeline);
    let forecasts = if a.recursive {
        recursive_forecasts(&forest, &series, &model.lag_spec, pipeline, a.horizon)
    } else {
        one_step_forecasts(&forest, &series, &model.lag_spec, pipeline, a.horizon)
    }
    .map_err(|e| match e {
        Error::NonPositiveValue { .. } | Error::IndexOutOfHistory(_) => Failure { code: RUNTIME, error: e.into() },
        e => classify(e),
    })?;
    match a.out {
        Some(path) => {
            let f = fs::File::create(&path).map_err(Failure::invalid)?;
            write_forecasts(f, &forecasts).map_err(classify)?;
        }
        None => write_forecasts(io::stdout().lock(), &forecasts).map_err(classify)?,
    }
    Ok(0)
}

fn bench(a: BenchArgs) -> CliResult<u8> {
    let mut spec = ExperimentSpec::new(a.dgp, a.methods);
    spec.t_values = a.t_values;
    if !a.scenarios.is_empty() {
        spec.scenarios = a.scenarios;
    }
    spec.replications = a.reps;
    spec.base_seed = a.seed;
    spec.test_size = a.test_size;
    spec.num_trees = a.num_trees;
    spec.k_override = a.k;
    if let Some(xi) = a.valid_xi {
        spec.policy = PolicyChoice::ValidPartition { xi };
    }
    let report = run_experiment(&spec).map_err(classify)?;
    for format in [TableFormat::Csv, TableFormat::Markdown] {
        emit_tables(&report, format, &a.out).map_err(classify)?;
    }
    let json = report.to_json().map_err(classify)?;
    fs::write(a.out.join(format!("{}.json", report.dgp)), json + "\n").map_err(Failure::invalid)?;
    let mut out = io::stdout().lock();
    let _ = write!(out, "{}", render_table(&report, TableFormat::Markdown));
    if report.t_values.len() >= 2 {
        let _ = writeln!(out);
        for v in consistency_trend(&report) {
            let _ = writeln!(
                out,
                "trend {} lags={}: {}",
                v.method,
                v.lags,
                if v.non_increasing { "non-increasing" } else { "increasing" }
            );
        }
    }
    let _ = writeln!(out, "wall time {:.1}s", report.wall_time_secs);
    Ok(0)
}

fn audit(a: AuditArgs) -> CliResult<u8> {
    let model = ModelFile::load(&a.model).map_err(classify)?;
    let file = read_series(&a.series).map_err(classify)?;
    let uses_log = model.pipeline.steps.contains(&rfrw::embed::Step::LogDiff);
    let series = file.to_series(uses_log).map_err(classify)?;
    let reports = model.audit(&series).map_err(Failure::invalid)?;
    let mut out = io::stdout().lock();
    let mut dirty = 0;
    for (b, r) in reports.iter().enumerate() {
        if r.is_clean() {
            let _ = writeln!(out, "tree {b}: ok ({} leaves, depth {})", r.n_leaves, r.depth);
        } else {
            dirty += 1;
            let list: Vec<String> = r
                .offenders
                .iter()
                .map(|o| format!("node {} {:?}", o.node, o.violation))
                .collect();
            let _ = writeln!(out, "tree {b}: {} offender(s): {}", r.offenders.len(), list.join(", "));
        }
    }
    let _ = writeln!(out, "{} of {} trees clean", reports.len() - dirty, reports.len());
    Ok(if dirty > 0 { 1 } else { 0 })
}
