//! The `psyn` command-line front end.
//!
//! Exit codes: `0` success, `1` usage, configuration, input or parse error,
//! `2` conditioning failure, `3` solver or numeric error, `4` audit violation.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use log::info;
use rand::Rng;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::conditioning::{draw_until_conditioned, ConditioningVerdict, DEFAULT_MAX_ATTEMPTS};
use crate::cube::{CubePoint, Dataset};
use crate::error::{Error, Result};
use crate::eval::{self, AccuracySummary, CalibrationParams, MatchOutcome};
use crate::io::{self, BitTable, Format};
use crate::pipeline::{self, PipelineConfig, RunReport, DEFAULT_BIG_DELTA, DEFAULT_DELTA};
use crate::privacy::{self, AuditRecord, NeighborPair};
use crate::rng;

pub const SCHEMA_VERSION: u32 = 1;
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "psyn", version, about = "Private synthetic data on the Boolean cube by noise-free sampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate private synthetic records from a 0/1 table
    Generate(GenerateArgs),
    /// Recommend reduced-space and sample sizes
    Calibrate(CalibrateArgs),
    /// Compare the low-dimensional marginals of two tables
    Evaluate(EvaluateArgs),
    /// Measure the sensitivity of the selected weights on neighboring datasets
    Audit(AuditArgs),
    /// Look for weights on a reduced space that match the data's marginals exactly
    Match(MatchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Packed,
    Auto,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Packed => Format::Packed,
            FormatArg::Auto => Format::Auto,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Input table (CSV of 0/1 with optional header, or packed PSYN1)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    pub format: FormatArg,
}

#[derive(Args, Debug, Clone)]
pub struct SpaceArgs {
    /// Marginal degree d
    #[arg(long)]
    pub degree: usize,
    /// Reduced space size
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    pub max_attempts: usize,
}

#[derive(Args, Debug, Clone)]
pub struct BoundArgs {
    /// Lower weight band parameter
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Upper weight band parameter
    #[arg(long = "Delta", default_value_t = DEFAULT_BIG_DELTA)]
    pub big_delta: f64,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("count").required(true).args(["k", "epsilon"])))]
pub struct GenerateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub space: SpaceArgs,
    #[command(flatten)]
    pub bounds: BoundArgs,
    /// Number of synthetic records
    #[arg(long)]
    pub k: Option<usize>,
    /// Privacy budget; k becomes the largest count it allows
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    /// Synthetic output table
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub output_format: FormatArg,
    /// JSON run report
    #[arg(long)]
    pub report: PathBuf,
    /// Also report marginal accuracy of the output against the input
    #[arg(long)]
    pub accuracy: bool,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Dimension p
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub degree: usize,
    /// Failure probability budget
    #[arg(long)]
    pub gamma: f64,
    /// Target marginal accuracy, used for the sample count
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Lower regularity of the sampling density; enables the matching-regime size
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Bound on the L2 norm of the density ratio
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Accepted for uniformity; calibration is deterministic
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// True data
    #[arg(long)]
    pub truth: PathBuf,
    /// Synthetic data
    #[arg(long)]
    pub synthetic: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    pub format: FormatArg,
    #[arg(long)]
    pub degree: usize,
    /// Number of worst queries to list
    #[arg(long, default_value_t = 10)]
    pub worst: usize,
    #[arg(long, default_value_t = eval::DEFAULT_QUERY_CAP)]
    pub query_cap: usize,
    /// Accepted for uniformity; evaluation is deterministic
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// A neighboring table; without it, random neighbors of the input are drawn
    #[arg(long)]
    pub other: Option<PathBuf>,
    /// Number of random neighbors when --other is absent
    #[arg(long, default_value_t = 1)]
    pub pairs: usize,
    #[command(flatten)]
    pub space: SpaceArgs,
    #[command(flatten)]
    pub bounds: BoundArgs,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MatchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub space: SpaceArgs,
    #[arg(long)]
    pub seed: u64,
    /// Write the matching weights, one per line, when found
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InputEcho {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorEcho {
    pub class: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub command: &'static str,
    pub status: &'static str,
    pub config: Value,
    pub inputs: Vec<InputEcho>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<AccuracySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorEcho>,
    /// Wall-clock only; ignore when comparing runs.
    pub timings_ms: Value,
}

impl ReportDocument {
    fn new(command: &'static str, config: Value) -> Self {
        ReportDocument {
            schema_version: SCHEMA_VERSION,
            command,
            status: "ok",
            config,
            inputs: Vec::new(),
            run: None,
            result: None,
            accuracy: None,
            error: None,
            timings_ms: Value::Null,
        }
    }

    fn fail(&mut self, err: &Error) {
        self.status = match err {
            Error::Failure { .. } => "failure",
            _ => "error",
        };
        self.error = Some(ErrorEcho {
            class: err.class(),
            message: err.to_string(),
        });
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let start = Instant::now();
    let (mut doc, report_path, code) = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Match(a) => cmd_match(a),
    };
    if let Some(err) = &doc.error {
        eprintln!("psyn {}: {}", doc.command, err.message);
    }
    if doc.timings_ms.is_null() {
        doc.timings_ms = serde_json::json!({ "total_ms": start.elapsed().as_secs_f64() * 1e3 });
    }
    if let Some(path) = report_path {
        if let Err(e) = fs::write(&path, doc.to_json()) {
            eprintln!("psyn: cannot write report {}: {e}", path.display());
            return if code == EXIT_OK { EXIT_USAGE } else { code };
        }
    }
    code
}

fn finish(mut doc: ReportDocument, report: Option<PathBuf>, outcome: Result<i32>) -> (ReportDocument, Option<PathBuf>, i32) {
    match outcome {
        Ok(code) => (doc, report, code),
        Err(e) => {
            doc.fail(&e);
            (doc, report, e.exit_code())
        }
    }
}

fn load_table(path: &Path, format: Format) -> Result<(BitTable, Dataset, InputEcho)> {
    let bytes = fs::read(path).map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    let table = io::parse_table(&bytes, format)?;
    let data = table.to_dataset()?;
    let echo = InputEcho {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        rows: data.len(),
        dim: data.dim(),
    };
    Ok((table, data, echo))
}

fn load(path: &Path, format: Format) -> Result<(Dataset, InputEcho)> {
    load_table(path, format).map(|(_, data, echo)| (data, echo))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn print_verdict(v: &ConditioningVerdict) {
    println!(
        "{:<24}{} (sigma_min {:.6}, threshold {:.6}, attempts {})",
        "conditioning",
        if v.passed { "passed" } else { "failed" },
        v.sigma_min,
        v.threshold,
        v.attempts
    );
}

fn cmd_generate(a: GenerateArgs) -> (ReportDocument, Option<PathBuf>, i32) {
    let config = serde_json::json!({
        "input": a.input.input.display().to_string(),
        "degree": a.space.degree,
        "m": a.space.m,
        "delta": a.bounds.delta,
        "Delta": a.bounds.big_delta,
        "k": a.k,
        "epsilon": a.epsilon,
        "seed": a.seed,
        "max_attempts": a.space.max_attempts,
        "output": a.output.display().to_string(),
    });
    let mut doc = ReportDocument::new("generate", config);
    let report = Some(a.report.clone());
    let outcome = (|| {
        let (input, data, echo) = load_table(&a.input.input, a.input.format.into())?;
        doc.inputs.push(echo);
        let mut cfg = PipelineConfig::new(data.dim(), a.space.degree, a.space.m, a.seed)
            .with_bounds(a.bounds.delta, a.bounds.big_delta);
        cfg.max_attempts = a.space.max_attempts;
        if let Some(k) = a.k {
            cfg = cfg.with_k(k);
        }
        if let Some(eps) = a.epsilon {
            cfg = cfg.with_epsilon(eps);
        }
        doc.config = to_value(&cfg);
        let syn = pipeline::generate(&data, &cfg)?;
        let table = BitTable::from_dataset(&syn.synthetic, input.header().map(<[String]>::to_vec))?;
        io::emit(&table, &a.output, a.output_format.into())?;
        let r = &syn.report;
        print_verdict(&r.verdict);
        println!("{:<24}{}", "records in", r.n);
        println!("{:<24}{:e}", "lambda", r.lambda);
        println!("{:<24}{:e}", "constraint residual", r.constraint_residual);
        println!("{:<24}{}", "records out", r.k_used);
        println!("{:<24}{}", "epsilon guaranteed", r.epsilon_guaranteed);
        if a.accuracy && !syn.synthetic.is_empty() {
            let acc = eval::accuracy_report(&data, &syn.synthetic, cfg.d)?;
            println!("{:<24}{:.6}", "max marginal error", acc.max_error);
            doc.accuracy = Some(acc.summary(10));
        }
        let t = &r.timings;
        doc.timings_ms = serde_json::json!({
            "conditioning": t.conditioning_ms,
            "solve": t.solve_ms,
            "sampling": t.sampling_ms,
            "total": t.total_ms,
        });
        doc.run = Some(syn.report);
        Ok(EXIT_OK)
    })();
    finish(doc, report, outcome)
}

fn cmd_calibrate(a: CalibrateArgs) -> (ReportDocument, Option<PathBuf>, i32) {
    let config = serde_json::json!({
        "p": a.p,
        "degree": a.degree,
        "gamma": a.gamma,
        "delta": a.delta,
        "alpha": a.alpha,
        "kappa": a.kappa,
        "seed": a.seed,
    });
    let mut doc = ReportDocument::new("calibrate", config);
    let outcome = (|| {
        if a.degree > a.p {
            return Err(Error::config(format!("degree {} exceeds dimension {}", a.degree, a.p)));
        }
        let cal = CalibrationParams::new(a.gamma, a.alpha.unwrap_or(1.0), a.kappa, a.delta)?;
        let m = eval::recommend_m(a.p, a.degree, &cal)?;
        // the sample count needs a nondegenerate failure budget
        let k = if a.gamma < 1.0 {
            Some(eval::recommend_k(a.p, a.degree, a.gamma, a.delta)?)
        } else {
            None
        };
        let m_matching = match a.alpha {
            Some(_) => Some(eval::recommend_m_matching(a.p, a.degree, &cal)?),
            None => None,
        };
        let c = crate::cube::low_degree_count(a.p, a.degree);
        println!("{:<24}{}", "C(p,<=d)", c);
        println!("{:<24}{}", "m", m);
        match k {
            Some(k) => println!("{:<24}{}", "k", k),
            None => println!("{:<24}n/a (gamma = 1)", "k"),
        }
        if let Some(mm) = m_matching {
            println!("{:<24}{}", "m (matching regime)", mm);
        }
        doc.result = Some(serde_json::json!({
            "low_degree_count": c,
            "m": m,
            "k": k,
            "m_matching": m_matching,
        }));
        Ok(EXIT_OK)
    })();
    finish(doc, a.report, outcome)
}

fn cmd_evaluate(a: EvaluateArgs) -> (ReportDocument, Option<PathBuf>, i32) {
    let config = serde_json::json!({
        "truth": a.truth.display().to_string(),
        "synthetic": a.synthetic.display().to_string(),
        "degree": a.degree,
        "query_cap": a.query_cap,
        "seed": a.seed,
    });
    let mut doc = ReportDocument::new("evaluate", config);
    let outcome = (|| {
        let (x, ex) = load(&a.truth, a.format.into())?;
        let (y, ey) = load(&a.synthetic, a.format.into())?;
        doc.inputs = vec![ex, ey];
        let acc = eval::accuracy_report_capped(&x, &y, a.degree, a.query_cap)?;
        let summary = acc.summary(a.worst);
        println!("{:<24}{}", "queries", summary.queries);
        println!("{:<24}{:.6}", "max error", summary.max_error);
        println!("{:<24}{:.6}", "mean error", summary.mean_error);
        for q in &summary.worst {
            println!("  {:<32}truth {:.6}  synthetic {:.6}  error {:.6}", q.query.to_string(), q.truth, q.synthetic, q.error);
        }
        doc.accuracy = Some(summary);
        Ok(EXIT_OK)
    })();
    finish(doc, a.report, outcome)
}

/// Random add-one and replace-one neighbors of `base`, alternating.
fn random_neighbors(base: &Dataset, count: usize, seed: u64) -> Result<Vec<NeighborPair>> {
    let mut rng = rng::stream_rng(seed, rng::STREAM_AUDIT);
    (0..count)
        .map(|i| {
            let record = CubePoint::from_bits(&(0..base.dim()).map(|_| rng.random::<bool>()).collect::<Vec<_>>());
            if i % 2 == 0 {
                NeighborPair::add_one(base.clone(), record)
            } else {
                let at = rng.random_range(0..base.len());
                NeighborPair::replace_one(base.clone(), at, record)
            }
        })
        .collect()
}

fn cmd_audit(a: AuditArgs) -> (ReportDocument, Option<PathBuf>, i32) {
    let config = serde_json::json!({
        "input": a.input.input.display().to_string(),
        "other": a.other.as_ref().map(|p| p.display().to_string()),
        "pairs": a.pairs,
        "degree": a.space.degree,
        "m": a.space.m,
        "delta": a.bounds.delta,
        "Delta": a.bounds.big_delta,
        "k": a.k,
        "epsilon": a.epsilon,
        "seed": a.seed,
        "max_attempts": a.space.max_attempts,
    });
    let mut doc = ReportDocument::new("audit", config);
    let outcome = (|| {
        let (base, echo) = load(&a.input.input, a.input.format.into())?;
        doc.inputs.push(echo);
        let pairs = match &a.other {
            Some(path) => {
                let (other, echo) = load(path, a.input.format.into())?;
                doc.inputs.push(echo);
                vec![NeighborPair::classify(base.clone(), other)?]
            }
            None => random_neighbors(&base, a.pairs, a.seed)?,
        };
        let mut cfg = PipelineConfig::new(base.dim(), a.space.degree, a.space.m, a.seed)
            .with_bounds(a.bounds.delta, a.bounds.big_delta)
            .with_k(a.k.unwrap_or(0));
        cfg.max_attempts = a.space.max_attempts;
        if let Some(eps) = a.epsilon {
            cfg = cfg.with_epsilon(eps);
            if a.k.is_none() {
                cfg.k = pipeline::SampleCount::Auto;
            }
        }
        cfg.validate()?;
        let (space, verdict) = draw_until_conditioned(cfg.p, cfg.m, cfg.d, cfg.seed, cfg.max_attempts)?;
        print_verdict(&verdict);
        let records = pairs
            .iter()
            .map(|pair| privacy::audit_sensitivity(pair, &cfg, &space))
            .collect::<Result<Vec<AuditRecord>>>()?;
        let mut violations = 0;
        for (i, r) in records.iter().enumerate() {
            let bad = r.violation || r.ratio_violation || r.privacy_consistent() == Some(false);
            violations += usize::from(bad);
            println!(
                "pair {i:<4}{:<12}linf {:.3e}  budget {:.3e}  max ratio {:.9}  bound {:.6}  {}",
                format!("{:?}", r.relation),
                r.linf_distance,
                r.distance_budget,
                r.max_ratio,
                r.ratio_bound,
                if bad { "VIOLATION" } else { "ok" }
            );
        }
        info!("audited {} pair(s), {violations} violation(s)", records.len());
        doc.config = to_value(&cfg);
        doc.result = Some(serde_json::json!({
            "verdict": verdict,
            "violations": violations,
            "records": records,
        }));
        if violations > 0 {
            doc.status = "violation";
            Ok(EXIT_VIOLATION)
        } else {
            Ok(EXIT_OK)
        }
    })();
    finish(doc, a.report, outcome)
}

fn cmd_match(a: MatchArgs) -> (ReportDocument, Option<PathBuf>, i32) {
    let config = serde_json::json!({
        "input": a.input.input.display().to_string(),
        "degree": a.space.degree,
        "m": a.space.m,
        "seed": a.seed,
        "max_attempts": a.space.max_attempts,
    });
    let mut doc = ReportDocument::new("match", config);
    let outcome = (|| {
        let (data, echo) = load(&a.input.input, a.input.format.into())?;
        doc.inputs.push(echo);
        let (space, verdict) = draw_until_conditioned(data.dim(), a.space.m, a.space.degree, a.seed, a.space.max_attempts)?;
        print_verdict(&verdict);
        let outcome = eval::exact_match(&data, &space)?;
        println!("{:<24}{}", "outcome", outcome.label());
        let result = match &outcome {
            MatchOutcome::Matched(h) => {
                println!("{:<24}{:e}", "constraint residual", h.residual);
                if let Some(path) = &a.weights {
                    let text: String = h.weights.iter().map(|w| format!("{w:e}\n")).collect();
                    fs::write(path, text)?;
                }
                serde_json::json!({
                    "verdict": verdict,
                    "outcome": outcome.label(),
                    "residual": h.residual,
                    "mass_error": h.mass_error,
                    "min_weight": h.weights.iter().copied().fold(f64::INFINITY, f64::min),
                    "iterations": h.iterations,
                })
            }
            MatchOutcome::NoWitness { gap, reason } => {
                doc.status = "no_witness";
                println!("{:<24}{:e}", "gap", gap);
                serde_json::json!({
                    "verdict": verdict,
                    "outcome": outcome.label(),
                    "gap": gap,
                    "reason": reason,
                })
            }
        };
        doc.result = Some(result);
        Ok(EXIT_OK)
    })();
    finish(doc, a.report, outcome)
}
