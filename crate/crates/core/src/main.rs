//! `tandem`: one binary over the whole pipeline. Plans the assembly,
//! labels recorded traces, trains and verifies the window classifier,
//! generates synthetic datasets, runs simulations and rebuilds reports
//! from event logs.
//!
//! Exit codes: 0 success, 2 usage, 3 input parse, 4 validation,
//! 5 runtime, 6 verification threshold. Reruns with identical flags
//! and inputs produce byte-identical outputs.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tandem_core::gaze::{self, GazePolicy};
use tandem_core::htn::{self, DomainError, TaskInstance, STOOL_DOMAIN_TEXT};
use tandem_core::imu::lstm::{
    self, gradient_check, LstmParams, Seq, WeightsIoError,
};
use tandem_core::imu::synth::SynthConfig;
use tandem_core::imu::train::{train, TrainConfig, TrainError};
use tandem_core::imu::{
    self, eval_metrics, frames_from_samples, window_stream, ImuClassifier, ImuSample, ImuWindow,
    Sensor, DEFAULT_THRESHOLD, FRAME_FEATURES, WINDOW_LEN,
};
use tandem_core::sim::{
    audit_log, channel_name, compare, load_scenario, run_scenario, EventLog, RunError,
    ScenarioError, ScenarioScript, STOOL_SCENARIO_TEXT,
};
use tandem_core::{IntentLabel, PerceiveChannel, TICK_S};

const EXIT_PARSE: i32 = 3;
const EXIT_VALIDATION: i32 = 4;
const EXIT_RUNTIME: i32 = 5;
const EXIT_THRESHOLD: i32 = 6;

pub const LOSS_CURVE_HEADER: &str = "tandem-loss-v1";
pub const AUDIT_HEADER: &str = "tandem-audit-v1";

const GRADCHECK_INIT_SCALE: f64 = 0.8;

#[derive(Parser)]
#[command(
    name = "tandem",
    version,
    about = "Collaborative-assembly toolkit: plan, classify, train, simulate, compare"
)]
struct Cli {
    /// Seed for every random draw this invocation makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decompose a scenario's root task and print the plan.
    Plan(PlanArgs),
    /// Label a recorded trace with working/idle decisions.
    Classify(ClassifyArgs),
    /// Train the IMU window classifier; writes weights and a loss curve.
    Train(TrainArgs),
    /// Check analytic LSTM gradients against central differences.
    Gradcheck(GradcheckArgs),
    /// Generate a labeled synthetic IMU dataset as trace files.
    Synth(SynthArgs),
    /// Score trained weights against a labeled dataset.
    Eval(EvalArgs),
    /// Run one scenario end to end; emits event log and metrics.
    Simulate(SimulateArgs),
    /// Run both channels over a seed list and tabulate the results.
    Compare(CompareArgs),
    /// Rebuild run metrics from an event log alone.
    Report(ReportArgs),
}

#[derive(clap::Args)]
struct PlanArgs {
    /// Scenario file (defaults to the built-in stool scenario).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Domain file (defaults to the built-in stool domain).
    #[arg(long)]
    domain: Option<PathBuf>,
    /// Write the plan here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ChannelArg {
    Gaze,
    Imu,
}

impl From<ChannelArg> for PerceiveChannel {
    fn from(c: ChannelArg) -> Self {
        match c {
            ChannelArg::Gaze => PerceiveChannel::Gaze,
            ChannelArg::Imu => PerceiveChannel::Imu,
        }
    }
}

#[derive(clap::Args)]
struct ClassifyArgs {
    /// Which sensing channel the trace comes from.
    #[arg(long, value_enum)]
    channel: ChannelArg,
    /// Input trace file.
    #[arg(long)]
    trace: PathBuf,
    /// Write the label file here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scenario supplying the gaze areas of interest.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Trained weights (required for the imu channel).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Gaze dwell before a label flips, seconds.
    #[arg(long)]
    dwell_s: Option<f64>,
    /// Frames between successive imu window decisions.
    #[arg(long)]
    stride: Option<usize>,
    /// Probability at or above which a window counts as working.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Working-class trace file (pair with --idle).
    #[arg(long, requires = "idle", conflicts_with = "synth")]
    working: Option<PathBuf>,
    /// Idle-class trace file (pair with --working).
    #[arg(long, requires = "working", conflicts_with = "synth")]
    idle: Option<PathBuf>,
    /// Synthesize this many windows per class instead of reading files.
    #[arg(long)]
    synth: Option<usize>,
    /// Where the weights file goes.
    #[arg(long)]
    out: PathBuf,
    /// Where the loss curve goes (default: weights path with .loss).
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Hidden state size.
    #[arg(long)]
    hidden: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Windows per gradient step.
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(clap::Args)]
struct GradcheckArgs {
    /// Check these weights instead of a random initialization.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Hidden state size for the random initialization.
    #[arg(long, default_value_t = 8)]
    hidden: usize,
    /// Sequence length of the probe input.
    #[arg(long, default_value_t = 30)]
    steps: usize,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-4)]
    limit: f64,
}

#[derive(clap::Args)]
struct SynthArgs {
    /// Windows per class.
    #[arg(long, default_value_t = 40)]
    per_class: usize,
    /// Directory receiving working.imu and idle.imu.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Trained weights to score.
    #[arg(long)]
    weights: PathBuf,
    /// Working-class trace file (pair with --idle).
    #[arg(long, requires = "idle", conflicts_with = "synth")]
    working: Option<PathBuf>,
    /// Idle-class trace file (pair with --working).
    #[arg(long, requires = "working", conflicts_with = "synth")]
    idle: Option<PathBuf>,
    /// Synthesize this many windows per class instead of reading files.
    #[arg(long)]
    synth: Option<usize>,
    /// Probability at or above which a window counts as working.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Fail (exit 6) when the F-score is undefined or below this.
    #[arg(long)]
    min_f: Option<f64>,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Scenario file (defaults to the built-in stool scenario).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Domain file (defaults to the built-in stool domain).
    #[arg(long)]
    domain: Option<PathBuf>,
    /// Override the scenario's sensing channel.
    #[arg(long, value_enum)]
    channel: Option<ChannelArg>,
    /// Trained weights (required when the effective channel is imu).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Directory receiving events.log, metrics.txt and metrics.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Gaze dwell before a label flips, seconds.
    #[arg(long)]
    dwell_s: Option<f64>,
    /// Consecutive satisfying outputs needed to release a wait.
    #[arg(long)]
    k: Option<u32>,
    /// Frames between successive imu window decisions.
    #[arg(long)]
    stride: Option<usize>,
    /// Probability at or above which a window counts as working.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(clap::Args)]
struct CompareArgs {
    /// Scenario file (defaults to the built-in stool scenario).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Domain file (defaults to the built-in stool domain).
    #[arg(long)]
    domain: Option<PathBuf>,
    /// Seeds to run, one gaze and one imu run each.
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    /// Trained weights for the imu runs.
    #[arg(long)]
    weights: PathBuf,
    /// Directory receiving compare.txt and compare.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Gaze dwell before a label flips, seconds.
    #[arg(long)]
    dwell_s: Option<f64>,
    /// Consecutive satisfying outputs needed to release a wait.
    #[arg(long)]
    k: Option<u32>,
    /// Frames between successive imu window decisions.
    #[arg(long)]
    stride: Option<usize>,
    /// Probability at or above which a window counts as working.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(clap::Args)]
struct ReportArgs {
    /// Event log produced by simulate.
    #[arg(long)]
    log: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------
// Failure classes, one per documented exit code.
// ---------------------------------------------------------------------

enum Failure {
    Parse(String),
    Validation(String),
    Runtime(String),
    Threshold(String),
}

impl Failure {
    fn parse(e: impl std::fmt::Display) -> Self {
        Failure::Parse(e.to_string())
    }

    fn validation(e: impl std::fmt::Display) -> Self {
        Failure::Validation(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }

    fn code(&self) -> i32 {
        match self {
            Failure::Parse(_) => EXIT_PARSE,
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Runtime(_) => EXIT_RUNTIME,
            Failure::Threshold(_) => EXIT_THRESHOLD,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Parse(m)
            | Failure::Validation(m)
            | Failure::Runtime(m)
            | Failure::Threshold(m) => m,
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Parse { .. } | ScenarioError::Version { .. } => Failure::parse(e),
            ScenarioError::Invalid { .. } => Failure::validation(e),
        }
    }
}

impl From<DomainError> for Failure {
    fn from(e: DomainError) -> Self {
        match e {
            DomainError::Parse { .. } => Failure::parse(e),
            DomainError::Validate { .. } => Failure::validation(e),
        }
    }
}

impl From<WeightsIoError> for Failure {
    fn from(e: WeightsIoError) -> Self {
        match e {
            WeightsIoError::Io(_) => Failure::runtime(e),
            _ => Failure::parse(e),
        }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteLoss { .. } => Failure::runtime(e),
            _ => Failure::validation(e),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Scenario(inner) => inner.into(),
            RunError::Exec(_) | RunError::Stream { .. } => Failure::runtime(e),
            RunError::Decompose(_)
            | RunError::MissingImuParams
            | RunError::ScriptPlanMismatch { .. }
            | RunError::Setup { .. } => Failure::validation(e),
        }
    }
}

fn from_trace(e: gaze::TraceError) -> Failure {
    match e {
        gaze::TraceError::Io(_) => Failure::runtime(e),
        _ => Failure::parse(e),
    }
}

fn from_imu_trace(e: imu::ImuTraceError) -> Failure {
    match e {
        imu::ImuTraceError::Io(_) => Failure::runtime(e),
        _ => Failure::parse(e),
    }
}

// ---------------------------------------------------------------------
// Shared plumbing.
// ---------------------------------------------------------------------

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("reading {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_domain_arg(path: &Option<PathBuf>) -> Result<htn::Domain, Failure> {
    let text = match path {
        Some(p) => read_text(p)?,
        None => STOOL_DOMAIN_TEXT.to_string(),
    };
    Ok(htn::load_domain(&text)?)
}

struct ScriptOverrides {
    channel: Option<PerceiveChannel>,
    seed: Option<u64>,
    dwell_s: Option<f64>,
    k: Option<u32>,
    stride: Option<usize>,
    threshold: Option<f64>,
}

fn load_script_arg(
    path: &Option<PathBuf>,
    ov: ScriptOverrides,
) -> Result<ScenarioScript, Failure> {
    let text = match path {
        Some(p) => read_text(p)?,
        None => STOOL_SCENARIO_TEXT.to_string(),
    };
    let mut script = load_scenario(&text)?;
    if let Some(c) = ov.channel {
        script.channel = c;
    }
    if let Some(s) = ov.seed {
        script.seed = s;
    }
    if let Some(d) = ov.dwell_s {
        script.classifier.dwell_s = d;
    }
    if let Some(k) = ov.k {
        script.classifier.release_k = k;
    }
    if let Some(s) = ov.stride {
        script.classifier.stride = s;
    }
    if let Some(t) = ov.threshold {
        script.classifier.threshold = t;
    }
    script.validate()?;
    Ok(script)
}

fn load_weights_file(path: &Path) -> Result<LstmParams, Failure> {
    let file = fs::File::open(path)
        .map_err(|e| Failure::Runtime(format!("opening {}: {e}", path.display())))?;
    Ok(lstm::load_weights(BufReader::new(file))?)
}

/// Lays labeled windows end to end on the tick grid so the trace reads
/// back as one gap-free frame stream; cutting it with stride 500
/// recovers exactly the original windows.
fn windows_to_samples(windows: &[ImuWindow]) -> Vec<ImuSample> {
    let mut samples = Vec::with_capacity(windows.len() * WINDOW_LEN * Sensor::ALL.len());
    let mut tick = 0u64;
    for w in windows {
        let data = w.flat();
        for f in 0..WINDOW_LEN {
            let t = tick as f64 * TICK_S;
            for (si, &sensor) in Sensor::ALL.iter().enumerate() {
                let base = f * FRAME_FEATURES + si * 9;
                let sample = ImuSample::new(
                    t,
                    sensor,
                    [data[base], data[base + 1], data[base + 2]],
                    [data[base + 3], data[base + 4], data[base + 5]],
                    [data[base + 6], data[base + 7], data[base + 8]],
                )
                .expect("window data is finite");
                samples.push(sample);
            }
            tick += 1;
        }
    }
    samples
}

fn windows_from_trace_file(path: &Path, label: IntentLabel) -> Result<Vec<ImuWindow>, Failure> {
    let file = fs::File::open(path)
        .map_err(|e| Failure::Runtime(format!("opening {}: {e}", path.display())))?;
    let samples = imu::read_imu_trace(BufReader::new(file)).map_err(from_imu_trace)?;
    let frames = frames_from_samples(&samples).map_err(Failure::validation)?;
    let mut windows = window_stream(&frames, WINDOW_LEN).map_err(Failure::validation)?;
    if windows.len() * WINDOW_LEN != frames.len() {
        return Err(Failure::Validation(format!(
            "{}: {} frames is not a whole number of {WINDOW_LEN}-frame windows",
            path.display(),
            frames.len()
        )));
    }
    for w in &mut windows {
        w.label = Some(label);
    }
    Ok(windows)
}

/// Loads a two-file labeled dataset, or synthesizes one when `synth`
/// windows per class were requested instead.
fn dataset_arg(
    working: &Option<PathBuf>,
    idle: &Option<PathBuf>,
    synth: Option<usize>,
    seed: u64,
) -> Result<Vec<ImuWindow>, Failure> {
    match (working, idle, synth) {
        (Some(w), Some(i), None) => {
            let mut windows = windows_from_trace_file(w, IntentLabel::Working)?;
            windows.extend(windows_from_trace_file(i, IntentLabel::Idle)?);
            Ok(windows)
        }
        (None, None, Some(n)) => {
            imu::synth::synth_dataset(seed, n, &SynthConfig::default()).map_err(Failure::validation)
        }
        _ => Err(Failure::Validation(
            "need either --working and --idle trace files or --synth N".into(),
        )),
    }
}

// ---------------------------------------------------------------------
// Subcommands.
// ---------------------------------------------------------------------

fn cmd_plan(args: &PlanArgs, seed: Option<u64>) -> Result<(), Failure> {
    let domain = load_domain_arg(&args.domain)?;
    let script = load_script_arg(
        &args.scenario,
        ScriptOverrides {
            channel: None,
            seed,
            dwell_s: None,
            k: None,
            stride: None,
            threshold: None,
        },
    )?;
    let state = script.initial_state()?;
    let env = script.decompose_env()?;
    let arg_refs: Vec<&str> = script.root_args.iter().map(String::as_str).collect();
    let root = TaskInstance::new(&script.root_task, &arg_refs);
    let plan = htn::decompose(&domain, &root, &state, &env).map_err(Failure::validation)?;
    emit(&args.out, &plan.dump())
}

fn cmd_classify(args: &ClassifyArgs, seed: Option<u64>) -> Result<(), Failure> {
    let script = load_script_arg(
        &args.scenario,
        ScriptOverrides {
            channel: None,
            seed,
            dwell_s: args.dwell_s,
            k: None,
            stride: args.stride,
            threshold: args.threshold,
        },
    )?;
    let labels: Vec<(f64, IntentLabel)> = match args.channel {
        ChannelArg::Gaze => {
            let file = fs::File::open(&args.trace)
                .map_err(|e| Failure::Runtime(format!("opening {}: {e}", args.trace.display())))?;
            let samples = gaze::read_trace(BufReader::new(file)).map_err(from_trace)?;
            let aois = script.build_aois()?;
            let policy = GazePolicy { dwell_s: script.classifier.dwell_s, ..GazePolicy::default() };
            gaze::classify_gaze(&samples, &aois, policy).map_err(Failure::validation)?
        }
        ChannelArg::Imu => {
            let weights = args.weights.as_ref().ok_or_else(|| {
                Failure::Validation("--channel imu needs --weights".into())
            })?;
            let params = load_weights_file(weights)?;
            let file = fs::File::open(&args.trace)
                .map_err(|e| Failure::Runtime(format!("opening {}: {e}", args.trace.display())))?;
            let samples = imu::read_imu_trace(BufReader::new(file)).map_err(from_imu_trace)?;
            let frames = frames_from_samples(&samples).map_err(Failure::validation)?;
            let mut clf =
                ImuClassifier::new(params, script.classifier.stride, script.classifier.threshold)
                    .map_err(Failure::validation)?;
            let mut out = Vec::new();
            for frame in &frames {
                if let Some(d) = clf.push_frame(frame).map_err(Failure::validation)? {
                    out.push((d.t, d.label));
                }
            }
            out
        }
    };
    let mut text = Vec::new();
    gaze::write_labels(&mut text, &labels).map_err(Failure::runtime)?;
    emit(&args.out, &String::from_utf8(text).expect("labels are ascii"))
}

fn cmd_train(args: &TrainArgs, seed: Option<u64>) -> Result<(), Failure> {
    let seed = seed.unwrap_or(0);
    let dataset = dataset_arg(&args.working, &args.idle, args.synth, seed)?;
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        lr: args.lr.unwrap_or(defaults.lr),
        epochs: args.epochs.unwrap_or(defaults.epochs),
        batch_size: args.batch_size.unwrap_or(defaults.batch_size),
        seed,
        hidden: args.hidden.unwrap_or(defaults.hidden),
        ..defaults
    };
    let outcome = train(&dataset, &cfg)?;

    let file = fs::File::create(&args.out)
        .map_err(|e| Failure::Runtime(format!("creating {}: {e}", args.out.display())))?;
    lstm::save_weights(file, &outcome.params)?;

    let curve_path =
        args.curve.clone().unwrap_or_else(|| args.out.with_extension("loss"));
    let mut curve = String::from(LOSS_CURVE_HEADER);
    curve.push('\n');
    for (epoch, loss) in outcome.curve.per_epoch.iter().enumerate() {
        curve.push_str(&format!("{epoch} {loss:.9}\n"));
    }
    for warning in &outcome.curve.warnings {
        curve.push_str(&format!("# warning: {warning}\n"));
    }
    write_text(&curve_path, &curve)?;

    println!(
        "trained hidden {} epochs {} windows {} final_loss {:.6}",
        cfg.hidden,
        cfg.epochs,
        dataset.len(),
        outcome.curve.per_epoch.last().copied().unwrap_or(f64::NAN)
    );
    println!("weights {}", args.out.display());
    println!("curve {}", curve_path.display());
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs, seed: Option<u64>) -> Result<(), Failure> {
    let seed = seed.unwrap_or(0);
    if args.steps == 0 {
        return Err(Failure::Validation("--steps must be positive".into()));
    }
    let params = match &args.weights {
        Some(path) => load_weights_file(path)?,
        None => {
            if args.hidden == 0 {
                return Err(Failure::Validation("--hidden must be positive".into()));
            }
            // Trainer-scale inits leave recurrent slots with ~1e-9
            // gradients where finite-difference noise dominates the
            // relative error; a fatter probe keeps every slot well
            // above the noise floor.
            LstmParams::init(FRAME_FEATURES, args.hidden, seed, GRADCHECK_INIT_SCALE)
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> =
        (0..args.steps * params.input).map(|_| rng.random_range(-1.5..1.5)).collect();
    let seq = Seq::new(&data, args.steps, params.input).map_err(Failure::validation)?;
    let mut max_err = 0.0f64;
    for label in [IntentLabel::Working, IntentLabel::Idle] {
        let err = gradient_check(&params, seq, label, args.eps).map_err(Failure::validation)?;
        max_err = max_err.max(err);
    }
    println!("max_rel_err {max_err:e}");
    println!("limit {:e}", args.limit);
    if max_err >= args.limit {
        return Err(Failure::Threshold(format!(
            "gradient check failed: max relative error {max_err:e} >= {:e}",
            args.limit
        )));
    }
    println!("pass");
    Ok(())
}

fn cmd_synth(args: &SynthArgs, seed: Option<u64>) -> Result<(), Failure> {
    let seed = seed.unwrap_or(0);
    let windows = imu::synth::synth_dataset(seed, args.per_class, &SynthConfig::default())
        .map_err(Failure::validation)?;
    fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::Runtime(format!("creating {}: {e}", args.out_dir.display())))?;
    for (label, name) in [(IntentLabel::Working, "working.imu"), (IntentLabel::Idle, "idle.imu")] {
        let class: Vec<ImuWindow> =
            windows.iter().filter(|w| w.label == Some(label)).cloned().collect();
        let samples = windows_to_samples(&class);
        let path = args.out_dir.join(name);
        let mut text = Vec::new();
        imu::write_imu_trace(&mut text, &samples).map_err(Failure::runtime)?;
        write_text(&path, &String::from_utf8(text).expect("trace is ascii"))?;
        println!("{} {} windows {}", name, class.len(), path.display());
    }
    Ok(())
}

fn render_eval(report: &imu::EvalReport) -> String {
    let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x}"));
    let mut out = String::new();
    out.push_str(&format!("true_pos {}\n", report.true_pos));
    out.push_str(&format!("false_pos {}\n", report.false_pos));
    out.push_str(&format!("true_neg {}\n", report.true_neg));
    out.push_str(&format!("false_neg {}\n", report.false_neg));
    out.push_str(&format!("precision {}\n", opt(report.precision)));
    out.push_str(&format!("recall {}\n", opt(report.recall)));
    out.push_str(&format!("f_score {}\n", opt(report.f_score)));
    if let Some(f) = report.f_score {
        out.push_str(&format!("f_rounded {f:.2}\n"));
    }
    out
}

fn cmd_eval(args: &EvalArgs, seed: Option<u64>) -> Result<(), Failure> {
    let seed = seed.unwrap_or(0);
    let params = load_weights_file(&args.weights)?;
    let dataset = dataset_arg(&args.working, &args.idle, args.synth, seed)?;
    let report =
        eval_metrics(&params, &dataset, args.threshold).map_err(Failure::validation)?;
    println!("threshold {}", args.threshold);
    println!("windows {}", dataset.len());
    print!("{}", render_eval(&report));
    if let Some(min_f) = args.min_f {
        match report.f_score {
            Some(f) if f >= min_f => {}
            _ => {
                return Err(Failure::Threshold(format!(
                    "f_score {} below required {min_f}",
                    report.f_score.map_or("undefined".to_string(), |f| f.to_string())
                )))
            }
        }
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, seed: Option<u64>) -> Result<(), Failure> {
    let domain = load_domain_arg(&args.domain)?;
    let script = load_script_arg(
        &args.scenario,
        ScriptOverrides {
            channel: args.channel.map(Into::into),
            seed,
            dwell_s: args.dwell_s,
            k: args.k,
            stride: args.stride,
            threshold: args.threshold,
        },
    )?;
    let params = match &args.weights {
        Some(path) => Some(load_weights_file(path)?),
        None => None,
    };
    let output = run_scenario(&domain, &script, params.as_ref())?;
    let rendered = output.report.render(&script.to_toml());
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::Runtime(format!("creating {}: {e}", dir.display())))?;
        write_text(&dir.join("events.log"), &output.log.to_text())?;
        write_text(&dir.join("metrics.txt"), &rendered)?;
        write_text(&dir.join("metrics.csv"), &output.report.to_csv())?;
    }
    print!("{rendered}");
    Ok(())
}

fn cmd_compare(args: &CompareArgs, seed: Option<u64>) -> Result<(), Failure> {
    let domain = load_domain_arg(&args.domain)?;
    let script = load_script_arg(
        &args.scenario,
        ScriptOverrides {
            channel: None,
            seed,
            dwell_s: args.dwell_s,
            k: args.k,
            stride: args.stride,
            threshold: args.threshold,
        },
    )?;
    let params = load_weights_file(&args.weights)?;
    let report = compare(&domain, &script, &args.seeds, &params)?;
    let mut rendered = report.render_table();
    rendered.push_str("config:\n");
    for line in script.to_toml().lines() {
        rendered.push_str("  ");
        rendered.push_str(line);
        rendered.push('\n');
    }
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::Runtime(format!("creating {}: {e}", dir.display())))?;
        write_text(&dir.join("compare.txt"), &rendered)?;
        write_text(&dir.join("compare.csv"), &report.to_csv())?;
    }
    print!("{rendered}");
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<(), Failure> {
    let text = read_text(&args.log)?;
    let log = EventLog::from_text(&text).map_err(Failure::parse)?;
    let audit = audit_log(&log).map_err(Failure::validation)?;
    let mut out = String::from(AUDIT_HEADER);
    out.push('\n');
    out.push_str(&format!("complete {}\n", audit.complete));
    out.push_str(&format!("total_idle_s {:.6}\n", audit.total_idle_s));
    out.push_str(&format!(
        "{:>4} {:>12} {:>14} {:>12}\n",
        "wait", "start_tick", "release_tick", "idle_s"
    ));
    for (i, &(idx, start)) in audit.wait_starts.iter().enumerate() {
        let release = audit
            .wait_releases
            .iter()
            .find(|&&(ri, _)| ri == idx)
            .map_or("-".to_string(), |&(_, t)| t.to_string());
        let idle = audit
            .per_wait_idle_s
            .get(i)
            .map_or("-".to_string(), |v| format!("{v:.6}"));
        out.push_str(&format!("{idx:>4} {start:>12} {release:>14} {idle:>12}\n"));
    }
    out.push_str(&format!("assembles {}\n", audit.assemble_starts.len()));
    for channel in [PerceiveChannel::Gaze, PerceiveChannel::Imu] {
        let name = channel_name(channel);
        let n = audit.flips.iter().filter(|(_, c, _)| c == name).count();
        if n > 0 {
            out.push_str(&format!("flips {name} {n}\n"));
        }
    }
    emit(&args.out, &out)
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Plan(args) => cmd_plan(args, cli.seed),
        Cmd::Classify(args) => cmd_classify(args, cli.seed),
        Cmd::Train(args) => cmd_train(args, cli.seed),
        Cmd::Gradcheck(args) => cmd_gradcheck(args, cli.seed),
        Cmd::Synth(args) => cmd_synth(args, cli.seed),
        Cmd::Eval(args) => cmd_eval(args, cli.seed),
        Cmd::Simulate(args) => cmd_simulate(args, cli.seed),
        Cmd::Compare(args) => cmd_compare(args, cli.seed),
        Cmd::Report(args) => cmd_report(args),
    };
    if let Err(failure) = result {
        eprintln!("error: {}", failure.message());
        std::process::exit(failure.code());
    }
}
