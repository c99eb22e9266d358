use std::path::{Path, PathBuf};

use atdm_core::adversary::{attack_sweep, counting_report, write_sweep_csv, SweepConfig, TauStart, WReading};
use atdm_core::estimator::{bcd_fit, FitOptions, FitResult};
use atdm_core::model::{
    build_design, default_start, evaluate_on, generate_synthetic, read_dataset_csv, split_dataset, write_dataset_csv,
    AtdmParameters, ClusterDataset, Metrics, SyntheticConfig,
};
use atdm_core::protocol::{run_protocol, EncryptionDistribution, ProtocolConfig};
use atdm_core::fmt17;
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::config::{read_text, Mode, RunConfig, RunOverrides};
use crate::output::{create, to_json, write_file, write_json};
use crate::CliError;

/// Where the data comes from: a CSV file, or a seeded synthetic cluster.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset CSV (`time, tau_out, h_rad, tau_in_1.., h_load_1..`).
    #[arg(long, conflicts_with_all = ["zones", "horizon", "noise"])]
    pub data: Option<PathBuf>,
    /// Zones of the synthetic cluster.
    #[arg(long)]
    pub zones: Option<usize>,
    /// Estimation periods of the synthetic cluster.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Aggregate equation noise of the synthetic cluster.
    #[arg(long)]
    pub noise: Option<f64>,
}

impl DataArgs {
    fn synthetic(&self, cfg: &RunConfig) -> SyntheticConfig {
        let mut s = SyntheticConfig::new(self.zones.unwrap_or(7), self.horizon.unwrap_or(1440), cfg.order, cfg.seed);
        s.t_occ = cfg.t_occ;
        if let Some(n) = self.noise {
            s.noise_sigma = n;
        }
        s
    }

    fn load(&self, cfg: &RunConfig) -> Result<ClusterDataset, CliError> {
        match &self.data {
            Some(path) => {
                let file = std::fs::File::open(path).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
                Ok(read_dataset_csv(file, cfg.order)?)
            }
            None => Ok(generate_synthetic(&self.synthetic(cfg))?.0),
        }
    }
}

fn training_part(ds: ClusterDataset, cfg: &RunConfig) -> Result<ClusterDataset, CliError> {
    if cfg.train_fraction >= 1.0 {
        return Ok(ds);
    }
    Ok(split_dataset(&ds, cfg.train_fraction)?.0)
}

fn fit_with(ds: &ClusterDataset, cfg: &RunConfig, mode: Mode) -> Result<(FitResult, Option<Vec<u8>>), CliError> {
    match mode {
        Mode::Plain => {
            let design = build_design(ds, cfg.t_occ)?;
            let opts = FitOptions { lambda: cfg.lambda, tol: cfg.tol, max_iter: cfg.max_iter, xi0: None };
            Ok((bcd_fit(&design, &opts)?, None))
        }
        Mode::Private => {
            let pc = ProtocolConfig {
                lambda: cfg.lambda,
                tol: cfg.tol,
                max_iter: cfg.max_iter,
                t_occ: cfg.t_occ,
                seed: cfg.seed,
                encryption: EncryptionDistribution { mean: cfg.w_mean, sd: cfg.w_sd },
                ..ProtocolConfig::default()
            };
            let run = run_protocol(ds, &pc)?;
            let mut log = Vec::new();
            run.transcript.write_jsonl(&mut log)?;
            Ok((run.fit, Some(log)))
        }
    }
}

fn write_prediction_csv(path: &Path, pred: &[f64], real: &[f64]) -> Result<(), CliError> {
    let mut out = String::from("period,predicted,real\n");
    for (t, (p, r)) in pred.iter().zip(real).enumerate() {
        out.push_str(&format!("{},{},{}\n", t + 1, fmt17(*p), fmt17(*r)));
    }
    write_file(path, out.as_bytes())
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunOverrides,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the aggregate parameters the data was generated from.
    #[arg(long = "truth-out")]
    pub truth_out: Option<PathBuf>,
}

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    if args.data.data.is_some() {
        return Err(CliError::Usage("generate builds a synthetic dataset; --data is not accepted".into()));
    }
    let cfg = args.run.resolve()?;
    let (ds, truth) = generate_synthetic(&args.data.synthetic(&cfg))?;
    write_dataset_csv(&ds, create(&args.out)?, default_start())?;
    if let Some(p) = &args.truth_out {
        write_json(p, &truth)?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunOverrides,
    /// Directory for fit.json, predicted.csv, metrics.json (and transcript.jsonl
    /// in private mode).
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct FitSummary<'a> {
    mode: Mode,
    iterations: usize,
    converged: bool,
    objective: f64,
    train_metrics: &'a Metrics,
}

pub fn fit(args: &FitArgs) -> Result<String, CliError> {
    let cfg = args.run.resolve()?;
    let train = training_part(args.data.load(&cfg)?, &cfg)?;
    let (result, transcript) = fit_with(&train, &cfg, cfg.mode)?;
    let (pred, real, metrics) = evaluate_on(&train, &result.params)?;
    ensure_dir(&args.out_dir)?;
    write_json(&args.out_dir.join("fit.json"), &result)?;
    write_json(&args.out_dir.join("metrics.json"), &metrics)?;
    write_prediction_csv(&args.out_dir.join("predicted.csv"), &pred, &real)?;
    if let Some(log) = transcript {
        write_file(&args.out_dir.join("transcript.jsonl"), &log)?;
    }
    to_json(&FitSummary {
        mode: cfg.mode,
        iterations: result.iterations,
        converged: result.converged,
        objective: result.objective,
        train_metrics: &metrics,
    })
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunOverrides,
    /// FitResult or parameter JSON written by `fit`.
    #[arg(long)]
    pub params: PathBuf,
    /// Predicted-vs-real CSV over the held-out periods.
    #[arg(long)]
    pub predicted: Option<PathBuf>,
}

fn load_params(path: &Path) -> Result<AtdmParameters, CliError> {
    let text = read_text(path)?;
    if let Ok(fit) = serde_json::from_str::<FitResult>(&text) {
        return Ok(fit.params);
    }
    Ok(serde_json::from_str::<AtdmParameters>(&text)?)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<String, CliError> {
    let cfg = args.run.resolve()?;
    if cfg.train_fraction >= 1.0 {
        return Err(CliError::Usage("train_fraction 1 leaves no held-out periods to evaluate".into()));
    }
    let params = load_params(&args.params)?;
    let ds = args.data.load(&cfg)?;
    let (_, test) = split_dataset(&ds, cfg.train_fraction)?;
    let (pred, real, metrics) = evaluate_on(&test, &params)?;
    if let Some(p) = &args.predicted {
        write_prediction_csv(p, &pred, &real)?;
    }
    to_json(&metrics)
}

#[derive(Debug, Args)]
pub struct CountingArgs {
    #[arg(long = "K")]
    pub k: usize,
    #[arg(long = "L")]
    pub l: usize,
    #[arg(long = "T")]
    pub t: usize,
    #[arg(long, default_value_t = 2)]
    pub order: usize,
}

fn verdict(flag: bool, yes: &str, no: &str) -> String {
    if flag { yes } else { no }.to_string()
}

pub fn counting(args: &CountingArgs) -> Result<String, CliError> {
    if args.k == 0 || args.l == 0 || args.t == 0 {
        return Err(CliError::Usage("K, L and T must be positive".into()));
    }
    let r = counting_report(args.k, args.l, args.t, args.order);
    let mut v = serde_json::to_value(r)?;
    let obj = v.as_object_mut().expect("report serializes to an object");
    obj.insert("type1_verdict".into(), verdict(r.type1_underdetermined, "under-determined", "determined").into());
    obj.insert("type2_verdict".into(), verdict(r.type2_underdetermined, "under-determined", "determined").into());
    obj.insert("type3_verdict".into(), verdict(r.type3_overdetermined, "over-determined", "not over-determined").into());
    to_json(&v)
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReadingArg {
    PerQuantity,
    Literal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TauStartArg {
    Aggregate,
    PerturbedTruth,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long = "K", default_value_t = 6)]
    pub k: usize,
    #[arg(long = "L", default_value_t = 3)]
    pub l: usize,
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Comma-separated horizons.
    #[arg(long = "t-list", value_delimiter = ',', default_value = "1,2,3,4,6,12,24,48")]
    pub t_list: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub scenarios: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Half-width of the uniform perturbation on the true encryption matrices.
    #[arg(long, default_value_t = 1.0)]
    pub perturbation: f64,
    #[arg(long, value_enum, default_value = "per-quantity")]
    pub reading: ReadingArg,
    #[arg(long = "tau-start", value_enum, default_value = "aggregate")]
    pub tau_start: TauStartArg,
    #[arg(long = "max-iter", default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long = "grad-tol", default_value_t = 1e-8)]
    pub grad_tol: f64,
    /// Per-scenario CSV.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn attack(args: &AttackArgs) -> Result<String, CliError> {
    if args.k == 0 || args.l == 0 || args.scenarios == 0 || args.t_list.is_empty() {
        return Err(CliError::Usage("K, L, scenarios and the T list must be non-empty".into()));
    }
    let mut cfg = SweepConfig {
        k: args.k,
        l: args.l,
        m: args.order,
        t_list: args.t_list.clone(),
        scenarios: args.scenarios,
        seed: args.seed,
        reading: match args.reading {
            ReadingArg::PerQuantity => WReading::PerQuantity,
            ReadingArg::Literal => WReading::Literal,
        },
        perturbation: args.perturbation,
        tau_start: match args.tau_start {
            TauStartArg::Aggregate => TauStart::Aggregate,
            TauStartArg::PerturbedTruth => TauStart::PerturbedTruth,
        },
        ..SweepConfig::default()
    };
    cfg.lm.max_iter = args.max_iter;
    cfg.lm.grad_tol = args.grad_tol;
    let report = attack_sweep(&cfg)?;
    write_sweep_csv(&report.rows, create(&args.out)?)?;
    to_json(&serde_json::json!({ "cases": report.cases, "time_trend": report.time_trend }))
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunOverrides,
    /// Per-parameter CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct ParameterRow {
    pub parameter: String,
    pub index: usize,
    pub plain: f64,
    pub private: f64,
    pub relative_error: f64,
}

/// `|private − plain| / |plain|`, with the denominator floored at 1e-12.
pub fn relative_error(private: f64, plain: f64) -> f64 {
    (private - plain).abs() / plain.abs().max(1e-12)
}

pub fn compare(args: &CompareArgs) -> Result<String, CliError> {
    let cfg = args.run.resolve()?;
    let train = training_part(args.data.load(&cfg)?, &cfg)?;
    let (plain, _) = fit_with(&train, &cfg, Mode::Plain)?;
    let (private, _) = fit_with(&train, &cfg, Mode::Private)?;
    let mut rows = Vec::new();
    for ((name, a), (_, b)) in plain.params.groups().iter().zip(private.params.groups().iter()) {
        for (index, (x, y)) in a.iter().zip(b.iter()).enumerate() {
            rows.push(ParameterRow {
                parameter: name.to_string(),
                index,
                plain: *x,
                private: *y,
                relative_error: relative_error(*y, *x),
            });
        }
    }
    let max = rows.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    if let Some(path) = &args.out {
        let mut out = String::from("parameter,index,plain,private,relative_error\n");
        for r in &rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.parameter,
                r.index,
                fmt17(r.plain),
                fmt17(r.private),
                fmt17(r.relative_error)
            ));
        }
        write_file(path, out.as_bytes())?;
    }
    to_json(&serde_json::json!({
        "max_relative_error": max,
        "plain_iterations": plain.iterations,
        "private_iterations": private.iterations,
        "parameters": rows,
    }))
}
