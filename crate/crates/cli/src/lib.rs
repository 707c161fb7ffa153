//! The `polyhe` command line: sample, train, extract, evaluate under the
//! homomorphic simulator, and tabulate the resulting reports.

// `!(a > b)` is deliberate: NaN must fail range checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use polyhe::extract::{degree_bound, extract_polynomial_with_cap, plan_depth, ExtractError};
use polyhe::fmt17;
use polyhe::fourier::{eval_series_encrypted, eval_series_plain, fourier_sine_coeffs, FourierError};
use polyhe::funcspec::{sample, split_train_validation, FuncError, SampleSet, Source, TargetFunction};
use polyhe::henc::{forward_encrypted, Ciphertext, Context, ContextParams, HencError, SineParams};
use polyhe::netcore::{load_weights_csv, save_weights_csv, train, NetError, Network, NetworkConfig};
use polyhe::poly::{eval_horner, eval_paterson_stockmeyer, fit_least_squares, PolyError};
use polyhe::quant::{quantization_report, quantize_uniform, QuantError};
use polyhe::report::{comparison_table, error_stats, EvalReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
    #[error("multiplicative levels exhausted; raise --max-level or pass --auto-bootstrap")]
    LevelExhausted,
    #[error("{0}")]
    DegreeLimit(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io { .. } => 2,
            CliError::Diverged(_) => 3,
            CliError::LevelExhausted => 4,
            CliError::DegreeLimit(_) => 5,
        }
    }
}

impl From<HencError> for CliError {
    fn from(e: HencError) -> Self {
        match e {
            HencError::LevelExhausted => CliError::LevelExhausted,
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<FourierError> for CliError {
    fn from(e: FourierError) -> Self {
        match e {
            FourierError::Henc(h) => h.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Diverged { epoch } => CliError::Diverged(epoch),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<FuncError> for CliError {
    fn from(e: FuncError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<QuantError> for CliError {
    fn from(e: QuantError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<PolyError> for CliError {
    fn from(e: PolyError) -> Self {
        match e {
            PolyError::DegreeLimitExceeded { .. } => CliError::DegreeLimit(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<ExtractError> for CliError {
    fn from(e: ExtractError) -> Self {
        match e {
            ExtractError::DegreeLimitExceeded { .. } | ExtractError::Overflow => CliError::DegreeLimit(e.to_string()),
            ExtractError::Poly(p) => p.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "polyhe", version, about = "Polynomial approximation for leveled homomorphic evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the target, train a polynomial-activation network, save its weights.
    Train(TrainArgs),
    /// Evaluate saved weights on the encrypted evaluation grid.
    Eval(EvalArgs),
    /// Expand saved weights into the polynomial they compute.
    Extract(ExtractArgs),
    /// Fourier sine-series approximation, evaluated in the clear and encrypted.
    Fourier(FourierArgs),
    /// Least-squares polynomial evaluated encrypted by Horner or Paterson–Stockmeyer.
    Baseline(BaselineArgs),
    /// Merge report JSON files into one comparison table (CSV).
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TargetArgs {
    /// Builtin name (sigmoid, tanh, relu, abs, sign, sin, gauss) or an expression in x.
    #[arg(long)]
    pub function: String,
    /// Half-width R of the interval [-R, R].
    #[arg(long, default_value_t = 30.0)]
    pub radius: f64,
    /// Step of the evaluation grid.
    #[arg(long, default_value_t = 1e-2)]
    pub precision: f64,
}

impl TargetArgs {
    fn target(&self) -> Result<TargetFunction> {
        let source = Source::parse(&self.function).map_err(|e| CliError::Input(e.to_string()))?;
        Ok(TargetFunction::new(source, self.radius, self.precision)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct HeArgs {
    /// Slots per ciphertext; the grid is processed in chunks of this size.
    #[arg(long, default_value_t = 8192)]
    pub slots: usize,
    /// Level budget of a fresh ciphertext [default: 40; for `fourier`, the levels the series needs].
    #[arg(long)]
    pub max_level: Option<u32>,
    /// Standard deviation of the Gaussian noise added after each multiplication.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Bootstrap instead of failing when the level budget runs out.
    #[arg(long)]
    pub auto_bootstrap: bool,
}

impl HeArgs {
    fn context(&self, default_level: u32, seed: u64) -> Result<Context> {
        Ok(Context::new(ContextParams {
            slot_count: self.slots,
            max_level: self.max_level.unwrap_or(default_level),
            noise_sigma: self.noise_sigma,
            auto_bootstrap: self.auto_bootstrap,
            bootstrap_perturbation: 0.0,
            seed,
        })?)
    }

    fn echo(&self, ctx: &Context) -> serde_json::Value {
        json!({
            "slots": self.slots,
            "max_level": ctx.max_level(),
            "noise_sigma": self.noise_sigma,
            "auto_bootstrap": self.auto_bootstrap,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SineArgs {
    /// Inputs are divided by 2^t before the Taylor expansion.
    #[arg(long, default_value_t = 10)]
    pub sine_t: u32,
    /// Taylor terms of the exponential.
    #[arg(long, default_value_t = 7)]
    pub sine_k: u32,
}

impl SineArgs {
    fn params(&self) -> Result<SineParams> {
        Ok(SineParams::new(self.sine_t, self.sine_k)?)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Step of the training grid; grid points between training points form the validation set.
    #[arg(long, default_value_t = 1e-1)]
    pub train_step: f64,
    /// Hidden layers L.
    #[arg(long, default_value_t = 6)]
    pub layers: usize,
    /// Neurons per hidden layer n.
    #[arg(long, default_value_t = 16)]
    pub width: usize,
    /// Degree d of the polynomial activations.
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    #[arg(long, default_value_t = 400)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Weight-decay coefficient.
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 200)]
    pub patience: usize,
    #[arg(long, default_value_t = 2)]
    pub seed: u64,
    /// Also write a copy of the weights quantized to this many bits (2..=16).
    #[arg(long)]
    pub quantize_bits: Option<u32>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Weights CSV written by `train`.
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    pub he: HeArgs,
    /// Quantize the weights to this many bits (2..=16) before evaluating.
    #[arg(long)]
    pub quantize_bits: Option<u32>,
    /// Seeds the simulator noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Weights CSV written by `train`.
    #[arg(long)]
    pub weights: PathBuf,
    /// Largest degree that will be expanded.
    #[arg(long, default_value_t = polyhe::poly::DEFAULT_DEGREE_CAP)]
    pub cap: usize,
    /// Polynomial text file, one coefficient per line, constant term first.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FourierArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Harmonics N.
    #[arg(long, default_value_t = 32)]
    pub fourier_n: usize,
    /// Period half-length l [default: radius + 10].
    #[arg(long)]
    pub fourier_l: Option<f64>,
    /// Simpson subintervals per coefficient.
    #[arg(long, default_value_t = polyhe::fourier::DEFAULT_SUBINTERVALS)]
    pub subintervals: usize,
    #[command(flatten)]
    pub sine: SineArgs,
    #[command(flatten)]
    pub he: HeArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Horner,
    Ps,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Degree of the least-squares fit.
    #[arg(long, default_value_t = 7)]
    pub degree: usize,
    #[arg(long, value_enum, default_value_t = Scheme::Ps)]
    pub scheme: Scheme,
    #[command(flatten)]
    pub he: HeArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON files.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Output CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a).map(|_| ()),
        Command::Extract(a) => cmd_extract(&a),
        Command::Fourier(a) => cmd_fourier(&a).map(|_| ()),
        Command::Baseline(a) => cmd_baseline(&a).map(|_| ()),
        Command::Report(a) => cmd_report(&a),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    text.push('\n');
    write_file(path, &text)
}

fn load_net(path: &Path) -> Result<Network> {
    load_weights_csv(path).map_err(|e| match e {
        NetError::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Input(format!("{}: {other}", path.display())),
    })
}

/// Ratio of two grid steps, required to be a positive integer.
fn keep_every(train_step: f64, precision: f64) -> Result<usize> {
    let ratio = train_step / precision;
    let k = ratio.round();
    if !(k >= 1.0) || (ratio - k).abs() > 1e-9 * k {
        return Err(CliError::Input(format!(
            "--train-step {train_step} must be a positive integer multiple of --precision {precision}"
        )));
    }
    Ok(k as usize)
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let target = a.target.target()?;
    let keep = keep_every(a.train_step, a.target.precision)?;
    let grid = sample(&target)?;
    let (train_set, validation) = split_train_validation(&grid, keep);
    let cfg = NetworkConfig {
        learning_rate: a.lr,
        max_epochs: a.epochs,
        batch_size: a.batch,
        l2_lambda: a.l2,
        patience: a.patience,
        seed: a.seed,
        ..NetworkConfig::for_interval(a.layers, a.width, a.degree, a.target.radius)
    };
    cfg.validate()?;
    let (net, report) = train(&cfg, &train_set, &validation)?;
    out_dir(&a.out)?;
    let weights = a.out.join("weights.csv");
    save_weights_csv(&net, &weights).map_err(|e| CliError::Input(e.to_string()))?;
    if let Some(bits) = a.quantize_bits {
        let q = quantize_uniform(&net, bits)?;
        let path = a.out.join(format!("weights_q{bits}.csv"));
        save_weights_csv(&q, &path).map_err(|e| CliError::Input(e.to_string()))?;
    }
    let summary = json!({
        "function": a.target.function,
        "radius": a.target.radius,
        "precision": a.target.precision,
        "train_step": a.train_step,
        "train_points": train_set.len(),
        "validation_points": validation.len(),
        "config": cfg,
        "report": report,
    });
    write_json(&a.out.join("train_report.json"), &summary)?;
    println!(
        "trained L={} n={} d={}: validation MSE {:.3e} at epoch {} of {}",
        a.layers, a.width, a.degree, report.final_validation_mse, report.best_epoch, report.epochs_run
    );
    Ok(())
}

/// Runs `f` on the grid abscissae in slot-sized chunks under one context.
/// Returns the decrypted real parts in grid order and the deepest output.
fn eval_chunked(
    ctx: &mut Context,
    xs: &[f64],
    mut f: impl FnMut(&mut Context, &Ciphertext) -> Result<Ciphertext>,
) -> Result<(Vec<f64>, u32)> {
    let mut out = Vec::with_capacity(xs.len());
    let mut depth = 0;
    for chunk in xs.chunks(ctx.slot_count()) {
        let ct = ctx.encrypt_real(chunk)?;
        let res = f(ctx, &ct)?;
        depth = depth.max(res.depth());
        out.extend(ctx.decrypt_real(&res)?.into_iter().take(chunk.len()));
    }
    Ok((out, depth))
}

fn write_predictions(path: &Path, grid: &SampleSet, preds: &[f64]) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "x,y_true,y_pred,abs_err")?;
        for (&(x, y), &p) in grid.points.iter().zip(preds) {
            writeln!(w, "{},{},{},{}", fmt17(x), fmt17(y), fmt17(p), fmt17((p - y).abs()))?;
        }
        w.flush()
    };
    emit().map_err(io_err(path))
}

#[allow(clippy::too_many_arguments)]
fn finish_report(
    method: &str,
    radius: f64,
    ctx: &Context,
    preds: &[f64],
    grid: &SampleSet,
    depth: u32,
    config: serde_json::Value,
    start: Instant,
) -> EvalReport {
    let c = ctx.counters();
    EvalReport {
        levels_consumed: depth as u64,
        ct_mults: c.ct_mults,
        scalar_mults: c.scalar_mults,
        bootstraps: c.bootstraps,
        config,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        ..EvalReport::from_predictions(method, radius, preds, &grid.ys())
    }
}

pub fn cmd_eval(a: &EvalArgs) -> Result<EvalReport> {
    let start = Instant::now();
    let target = a.target.target()?;
    let mut net = load_net(&a.weights)?;
    let mut method = String::from("network");
    let grid = sample(&target)?;
    let mut quant = serde_json::Value::Null;
    if let Some(bits) = a.quantize_bits {
        let q = quantize_uniform(&net, bits)?;
        quant = serde_json::to_value(quantization_report(&net, &q, &grid)?).expect("report serializes");
        net = q;
        method = format!("network-q{bits}");
    }
    let mut ctx = a.he.context(40, a.seed)?;
    let (preds, depth) = eval_chunked(&mut ctx, &grid.xs(), |ctx, ct| Ok(forward_encrypted(ctx, &net, ct)?))?;
    out_dir(&a.out)?;
    write_predictions(&a.out.join("predictions.csv"), &grid, &preds)?;
    let plan = plan_depth(&net.config);
    let config = json!({
        "function": a.target.function,
        "precision": a.target.precision,
        "weights": a.weights,
        "layers": net.hidden_layers(),
        "width": net.width(),
        "degree": net.activation_degree(),
        "plan_depth": plan.depth,
        "points": grid.len(),
        "he": a.he.echo(&ctx),
        "quantize_bits": a.quantize_bits,
        "quantization": quant,
    });
    let report = finish_report(&method, a.target.radius, &ctx, &preds, &grid, depth, config, start);
    write_json(&a.out.join("report.json"), &report)?;
    println!(
        "{method} on [-{r}, {r}]: max abs error {:.4e}, MSE {:.4e}, levels {}, bootstraps {}",
        report.max_abs_error,
        report.mse,
        report.levels_consumed,
        report.bootstraps,
        r = a.target.radius
    );
    Ok(report)
}

pub fn cmd_extract(a: &ExtractArgs) -> Result<()> {
    let net = load_net(&a.weights)?;
    let bound = degree_bound(&net.config)?;
    let poly = extract_polynomial_with_cap(&net, a.cap)?;
    write_file(&a.out, &poly.to_text())?;
    let plan = plan_depth(&net.config);
    println!("degree {bound}");
    println!("depth {}", plan.depth);
    println!("ct_mults {}", plan.ct_mults);
    println!("scalar_mults {}", plan.scalar_mults);
    Ok(())
}

pub fn cmd_fourier(a: &FourierArgs) -> Result<EvalReport> {
    let start = Instant::now();
    let target = a.target.target()?;
    if a.fourier_n == 0 {
        return Err(CliError::Input("--fourier-n must be positive".into()));
    }
    let l = a.fourier_l.unwrap_or(a.target.radius + 10.0);
    let p = a.sine.params()?;
    // odd shift: F(x) = f(x) - f(0), so F(0) = 0
    let f0 = target.eval(0.0);
    let series = fourier_sine_coeffs(|x| target.eval(x) - f0, l, a.fourier_n, a.subintervals)?;
    let grid = sample(&target)?;
    let xs = grid.xs();
    let plain: Vec<f64> = xs.iter().map(|&x| f0 + eval_series_plain(&series, x)).collect();
    let mut ctx = a.he.context(series.encrypted_levels(p), a.seed)?;
    let (enc, depth) = eval_chunked(&mut ctx, &xs, |ctx, ct| {
        let s = eval_series_encrypted(ctx, &series, ct, p)?;
        Ok(ctx.cadd(&s, f0)?)
    })?;
    let (plain_max, plain_mse) = error_stats(&plain, &grid.ys());
    let (enc_vs_plain, _) = error_stats(&enc, &plain);
    out_dir(&a.out)?;
    write_file(&a.out.join("series.txt"), &series.to_text())?;
    write_predictions(&a.out.join("predictions.csv"), &grid, &enc)?;
    let config = json!({
        "function": a.target.function,
        "precision": a.target.precision,
        "l": l,
        "N": a.fourier_n,
        "subintervals": a.subintervals,
        "sine_t": p.t,
        "sine_k": p.k,
        "offset": f0,
        "plain_max_abs_error": plain_max,
        "plain_mse": plain_mse,
        "encrypted_vs_plain_max": enc_vs_plain,
        "he": a.he.echo(&ctx),
    });
    let report = finish_report("fourier", a.target.radius, &ctx, &enc, &grid, depth, config, start);
    write_json(&a.out.join("report.json"), &report)?;
    println!(
        "fourier N={} l={l}: plain max error {plain_max:.4e}, encrypted max error {:.4e}, encrypted vs plain {enc_vs_plain:.2e}, levels {}",
        a.fourier_n, report.max_abs_error, report.levels_consumed
    );
    Ok(report)
}

pub fn cmd_baseline(a: &BaselineArgs) -> Result<EvalReport> {
    let start = Instant::now();
    let target = a.target.target()?;
    let grid = sample(&target)?;
    let xs = grid.xs();
    let poly = fit_least_squares(&xs, &grid.ys(), a.degree)?;
    let mut ctx = a.he.context(40, a.seed)?;
    let scheme = a.scheme;
    let (preds, depth) = eval_chunked(&mut ctx, &xs, |ctx, ct| {
        Ok(match scheme {
            Scheme::Horner => ctx.eval_horner(&poly, ct)?,
            Scheme::Ps => ctx.eval_paterson_stockmeyer(&poly, ct)?,
        })
    })?;
    let planned = match scheme {
        Scheme::Horner => eval_horner(&poly, 0.0).1,
        Scheme::Ps => eval_paterson_stockmeyer(&poly, 0.0).1,
    };
    out_dir(&a.out)?;
    write_file(&a.out.join("polynomial.txt"), &poly.to_text())?;
    write_predictions(&a.out.join("predictions.csv"), &grid, &preds)?;
    let method = match scheme {
        Scheme::Horner => "lsq-horner",
        Scheme::Ps => "lsq-ps",
    };
    let config = json!({
        "function": a.target.function,
        "precision": a.target.precision,
        "degree": a.degree,
        "planned_ct_mults_per_chunk": planned.ct_mults,
        "he": a.he.echo(&ctx),
    });
    let report = finish_report(method, a.target.radius, &ctx, &preds, &grid, depth, config, start);
    write_json(&a.out.join("report.json"), &report)?;
    println!(
        "{method} degree {}: max abs error {:.4e}, levels {}",
        a.degree, report.max_abs_error, report.levels_consumed
    );
    Ok(report)
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let reports = a.reports.iter().map(|p| read_report(p)).collect::<Result<Vec<_>>>()?;
    let table = comparison_table(&reports);
    match &a.out {
        Some(path) => write_file(path, &table),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}
