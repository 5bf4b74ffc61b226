//! `gcp`: fit, generate, score and inspect GCP tensor decompositions.

mod config;
mod data;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gcp_core::io::{read_model, write_model, write_trace_csv};
use gcp_core::optimizer::{initial_guess, EpochEvent};
use gcp_core::mttkrp::gradient_full;
use gcp_core::sampling::{empirical_bias_variance, gradient_statistics, DEFAULT_OVERSAMPLE};
use gcp_core::{
    cosine_similarity_score, fit_gcp_adam_with, gen_binary_problem, gen_gamma_problem, BinaryProblemSpec,
    DataTensor, FitConfig, FitHooks, GcpError, GcpRng, KernelOptions, KruskalModel, LossFunction, LossKind,
    SamplerKind, SamplerName, Shape, RECOVERY_THRESHOLD,
};

use config::FitFile;
use data::Format;

#[derive(Parser, Debug)]
#[command(name = "gcp", version, about = "Generalized CP tensor decomposition with stochastic gradients")]
struct Cli {
    /// Worker threads for the gradient kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Reduce per-thread partial sums in a fixed order.
    #[arg(long, global = true)]
    deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a GCP model with Adam and epoch rollback.
    Fit(FitArgs),
    /// Generate a synthetic problem with a known truth.
    Generate(GenerateArgs),
    /// Compare a model against a truth by factor cosine similarity.
    Score(ScoreArgs),
    /// Compare the mean stochastic gradient with the exact gradient.
    Gradcheck(GradcheckArgs),
    /// Empirical bias and variance of each sampler's gradient.
    Variance(VarianceArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Data tensor (.tns sparse, .bin dense binary, anything else dense text).
    #[arg(long)]
    input: PathBuf,

    /// Override the format implied by the file extension.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,

    /// gaussian, poisson, bernoulli-odds, gamma, beta-half or huber[:delta].
    #[arg(long)]
    loss: Option<String>,

    #[arg(long)]
    rank: Option<usize>,

    /// uniform, stratified or semi-stratified.
    #[arg(long)]
    sampler: Option<String>,

    /// Total samples per gradient (default: sum of the extents).
    #[arg(long)]
    samples: Option<usize>,

    /// Nonzero samples for the stratified samplers (needs --zeros too).
    #[arg(long)]
    nonzeros: Option<usize>,

    /// Zero samples for the stratified samplers (needs --nonzeros too).
    #[arg(long)]
    zeros: Option<usize>,

    /// Rejection-sampling oversample rate.
    #[arg(long)]
    oversample: Option<f64>,

    #[arg(long)]
    learning_rate: Option<f64>,

    /// Iterations per epoch.
    #[arg(long)]
    epoch_iters: Option<usize>,

    /// Failed epochs tolerated before stopping.
    #[arg(long)]
    max_bad_epochs: Option<usize>,

    /// Learning-rate factor applied after a failed epoch.
    #[arg(long)]
    decay: Option<f64>,

    #[arg(long)]
    max_epochs: Option<usize>,

    /// Samples in the fixed loss estimator.
    #[arg(long)]
    estimator_samples: Option<usize>,

    #[arg(long)]
    seed: Option<u64>,

    /// JSON file with defaults for any of the flags above.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Where to write the fitted model.
    #[arg(long)]
    output: Option<PathBuf>,

    /// Where to write the per-epoch trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Problem {
    /// Dense gamma-distributed data.
    Gamma,
    /// Sparse binary data from an odds model.
    Binary,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    problem: Problem,

    /// Extents such as 20x15x10x5.
    #[arg(long, value_parser = parse_shape)]
    shape: Shape,

    #[arg(long)]
    rank: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Density of the sparse factor columns (binary only).
    #[arg(long, default_value_t = 0.15)]
    delta: f64,

    /// Probability of a one on the structure (binary only).
    #[arg(long, default_value_t = 0.9)]
    p_high: f64,

    /// Background probability of a one (binary only).
    #[arg(long, default_value_t = 0.0025)]
    p_low: f64,

    /// Data tensor output path.
    #[arg(long)]
    output: PathBuf,

    #[arg(long, value_enum)]
    format: Option<Format>,

    /// Truth model output path.
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,

    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[command(flatten)]
    input: InputArgs,

    #[arg(long)]
    loss: String,

    #[arg(long)]
    rank: usize,

    /// Model to evaluate at (default: a seeded random initial guess).
    #[arg(long)]
    model: Option<PathBuf>,

    /// Total samples per gradient (default: sum of the extents).
    #[arg(long)]
    samples: Option<usize>,

    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[command(flatten)]
    probe: ProbeArgs,

    #[arg(long, default_value = "uniform")]
    sampler: String,

    #[arg(long, default_value_t = 2000)]
    realizations: usize,
}

#[derive(Args, Debug)]
struct VarianceArgs {
    #[command(flatten)]
    probe: ProbeArgs,

    /// Comma-separated samplers (default: every sampler the data supports).
    #[arg(long, value_delimiter = ',')]
    samplers: Vec<String>,

    #[arg(long, default_value_t = 1000)]
    realizations: usize,
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    let dims = s
        .split(['x', ','])
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("invalid extent '{t}'")))
        .collect::<Result<Vec<_>, _>>()?;
    Shape::new(dims).map_err(|e| e.to_string())
}

/// Failure split by exit code: bad flags (2) or a failed run (1).
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(GcpError),
}

impl From<GcpError> for Failure {
    fn from(e: GcpError) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let kernel = KernelOptions {
        parallel: cli.threads != Some(1),
        deterministic: cli.deterministic,
    };
    let outcome = match cli.command {
        Command::Fit(a) => cmd_fit(a, kernel),
        Command::Generate(a) => cmd_generate(a),
        Command::Score(a) => cmd_score(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Variance(a) => cmd_variance(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn parse_loss(token: &str) -> Result<LossFunction, Failure> {
    token
        .parse::<LossKind>()
        .map(LossFunction::new)
        .map_err(|e| usage(e.to_string()))
}

fn parse_sampler(token: &str) -> Result<SamplerName, Failure> {
    token.parse().map_err(|e: GcpError| usage(e.to_string()))
}

fn check_sampler_input(name: SamplerName, x: &DataTensor) -> Outcome {
    if name != SamplerName::Uniform && x.as_sparse().is_none() {
        return Err(usage(format!(
            "the {} sampler needs sparse (.tns) input",
            name.with_budget(2, None, DEFAULT_OVERSAMPLE).name()
        )));
    }
    Ok(())
}

fn cmd_fit(a: FitArgs, kernel: KernelOptions) -> Outcome {
    let file = match &a.config {
        Some(p) => FitFile::load(p).map_err(usage)?,
        None => FitFile::default(),
    };
    let loss_token = a.loss.or(file.loss).ok_or_else(|| usage("--loss is required"))?;
    let loss = parse_loss(&loss_token)?;
    let rank = a.rank.or(file.rank).ok_or_else(|| usage("--rank is required"))?;
    let sampler_name = parse_sampler(a.sampler.as_deref().or(file.sampler.as_deref()).unwrap_or("uniform"))?;
    let split = match (a.nonzeros.or(file.nonzeros), a.zeros.or(file.zeros)) {
        (Some(p), Some(q)) => Some((p, q)),
        (None, None) => None,
        _ => return Err(usage("--nonzeros and --zeros must be given together")),
    };
    if split.is_some() && sampler_name == SamplerName::Uniform {
        return Err(usage("--nonzeros/--zeros only apply to the stratified samplers"));
    }
    let seed = a.seed.or(file.seed).unwrap_or(0);

    let x = data::load(&a.input.input, a.input.format)?;
    check_sampler_input(sampler_name, &x)?;

    let total = a.samples.or(file.samples).unwrap_or_else(|| x.shape().dim_sum());
    let oversample = a.oversample.or(file.oversample).unwrap_or(DEFAULT_OVERSAMPLE);
    let sampler = sampler_name.with_budget(total, split, oversample);

    let mut cfg = FitConfig::new(loss, rank, sampler);
    cfg.kernel = kernel;
    if let Some(v) = a.learning_rate.or(file.learning_rate) {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.epoch_iters.or(file.epoch_iters) {
        cfg.epoch_iters = v;
    }
    if let Some(v) = a.max_bad_epochs.or(file.max_bad_epochs) {
        cfg.max_bad_epochs = v;
    }
    if let Some(v) = a.decay.or(file.decay) {
        cfg.decay = v;
    }
    if let Some(v) = a.max_epochs.or(file.max_epochs) {
        cfg.max_epochs = v;
    }
    if let Some(v) = a.estimator_samples.or(file.estimator_samples) {
        cfg.estimator_count = v;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    eprintln!(
        "fitting {} tensor, loss {}, rank {}, sampler {} ({} samples)",
        x.shape(),
        loss.kind,
        rank,
        sampler,
        sampler.total_samples()
    );
    let mut progress = |ev: &EpochEvent<'_>| {
        let r = ev.record;
        eprintln!(
            "epoch {:>4}  loss {:.6e}  lr {:.3e}  {:>8.2}s  {}",
            r.epoch,
            r.loss_estimate,
            r.learning_rate,
            r.seconds,
            if r.accepted { "accepted" } else { "rejected" }
        );
    };
    let hooks = FitHooks {
        observer: Some(&mut progress),
        ..FitHooks::default()
    };
    let result = fit_gcp_adam_with(&x, &cfg, &GcpRng::seed_from_u64(seed), hooks)?;

    if let Some(p) = &a.output {
        write_model(&result.model, p)?;
    }
    if let Some(p) = &a.trace {
        write_trace_csv(&result.trace, p)?;
    }
    println!("final loss estimate: {:.16e}", result.loss_estimate);
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Outcome {
    let mut rng = GcpRng::seed_from_u64(a.seed).split("generate");
    let (x, truth) = match a.problem {
        Problem::Gamma => {
            let (x, truth) = gen_gamma_problem(&a.shape, a.rank, &mut rng)?;
            (DataTensor::Dense(x), truth)
        }
        Problem::Binary => {
            let spec = BinaryProblemSpec {
                shape: a.shape.clone(),
                rank: a.rank,
                delta: a.delta,
                p_high: a.p_high,
                p_low: a.p_low,
            };
            spec.validate().map_err(|e| usage(e.to_string()))?;
            let (x, truth) = gen_binary_problem(&spec, &mut rng)?;
            (DataTensor::Sparse(x), truth)
        }
    };
    data::save(&x, &a.output, a.format)?;
    write_model(&truth, &a.truth)?;
    match &x {
        DataTensor::Sparse(s) => eprintln!("wrote {} tensor with {} nonzeros", s.shape(), s.nnz()),
        DataTensor::Dense(d) => eprintln!("wrote dense {} tensor", d.shape()),
    }
    Ok(())
}

fn cmd_score(a: ScoreArgs) -> Outcome {
    let model = read_model(&a.model)?;
    let truth = read_model(&a.truth)?;
    let score = cosine_similarity_score(&model, &truth)?;
    println!("similarity: {score:.6}");
    println!("{}", if score >= RECOVERY_THRESHOLD { "recovered" } else { "not recovered" });
    Ok(())
}

/// Data, loss and evaluation model shared by gradcheck and variance.
struct Probe {
    x: DataTensor,
    loss: LossFunction,
    model: KruskalModel,
    samples: usize,
    rng: GcpRng,
}

fn load_probe(a: &ProbeArgs) -> Result<Probe, Failure> {
    let loss = parse_loss(&a.loss)?;
    if a.rank == 0 {
        return Err(usage("--rank must be at least 1"));
    }
    let x = data::load(&a.input.input, a.input.format)?;
    loss.check_all(x.stored_values())?;
    let rng = GcpRng::seed_from_u64(a.seed);
    let model = match &a.model {
        Some(p) => load_model_for(p, &x, a.rank)?,
        None => {
            let mut m = initial_guess(&x, a.rank, &mut rng.split("model"))?;
            if let Some(lb) = loss.lower_bound {
                m.clamp_below(lb);
            }
            m
        }
    };
    let samples = a.samples.unwrap_or_else(|| x.shape().dim_sum());
    Ok(Probe {
        x,
        loss,
        model,
        samples,
        rng,
    })
}

fn load_model_for(path: &Path, x: &DataTensor, rank: usize) -> Result<KruskalModel, Failure> {
    let m = read_model(path)?;
    if m.shape() != x.shape() || m.rank() != rank {
        return Err(Failure::Runtime(GcpError::ShapeMismatch(format!(
            "model is {} with rank {}, expected {} with rank {rank}",
            m.shape(),
            m.rank(),
            x.shape()
        ))));
    }
    Ok(m)
}

fn cmd_gradcheck(a: GradcheckArgs) -> Outcome {
    let name = parse_sampler(&a.sampler)?;
    if a.realizations < 2 {
        return Err(usage("--realizations must be at least 2"));
    }
    let p = load_probe(&a.probe)?;
    check_sampler_input(name, &p.x)?;
    let sampler = name.with_budget(p.samples, None, DEFAULT_OVERSAMPLE);
    sampler.validate().map_err(|e| usage(e.to_string()))?;

    let exact = gradient_full(&p.x, &p.model, &p.loss)?.to_vec();
    let stats = gradient_statistics(&sampler, &p.x, &p.model, &p.loss, a.realizations, &p.rng.split("gradcheck"))?;
    let diff: f64 = stats.mean.iter().zip(&exact).map(|(m, g)| (m - g) * (m - g)).sum::<f64>().sqrt();
    let norm: f64 = exact.iter().map(|g| g * g).sum::<f64>().sqrt();
    let rel = if norm > 0.0 { diff / norm } else { diff };
    println!("sampler: {sampler}, samples: {}, realizations: {}", p.samples, a.realizations);
    println!("relative error: {rel:.6e}");
    Ok(())
}

fn cmd_variance(a: VarianceArgs) -> Outcome {
    if a.realizations < 2 {
        return Err(usage("--realizations must be at least 2"));
    }
    let p = load_probe(&a.probe)?;
    let names: Vec<SamplerName> = if a.samplers.is_empty() {
        match p.x {
            DataTensor::Sparse(_) => vec![SamplerName::Uniform, SamplerName::Stratified, SamplerName::SemiStratified],
            DataTensor::Dense(_) => vec![SamplerName::Uniform],
        }
    } else {
        a.samplers.iter().map(|s| parse_sampler(s)).collect::<Result<_, _>>()?
    };
    for &n in &names {
        check_sampler_input(n, &p.x)?;
    }

    let base = p.rng.split("variance");
    let mut rows = Vec::new();
    for &n in &names {
        let sampler: SamplerKind = n.with_budget(p.samples, None, DEFAULT_OVERSAMPLE);
        sampler.validate().map_err(|e| usage(e.to_string()))?;
        let bv = empirical_bias_variance(&sampler, &p.x, &p.model, &p.loss, a.realizations, &base.split(sampler.name()))?;
        rows.push((sampler, bv));
    }
    let norm = rows.first().map_or(0.0, |r| r.1.exact_norm);
    println!("gradient norm: {norm:.2e}  samples: {}  realizations: {}", p.samples, a.realizations);
    println!("{:<16} {:>12} {:>12}", "sampler", "emp. bias", "emp. var.");
    for (s, bv) in rows {
        println!("{:<16} {:>12.2e} {:>12.2e}", s.name(), bv.bias, bv.variance);
    }
    Ok(())
}
