use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sasvi::bridge::{serve, ServedModels};
use sasvi::controller::{
    events_from_summary, numbered_files, read_mask_sequence, run_baseline_t1, run_framewise, run_gt_reprompt,
    run_sasvi, write_mask_sequence, DirSource, PromptMode, RunOutput, RunResult, SasviConfig,
};
use sasvi::dataset::{self, find_sidecar, load_labels, load_palette};
use sasvi::evaluate::{evaluate, ClassScope, EvalOptions, FlowInput};
use sasvi::flow::io::read_flow;
use sasvi::flow::HornSchunckParams;
use sasvi::mask::io::read_frame;
use sasvi::mask::SegMask;
use sasvi::metrics::{MatchStrategy, MetricReport};
use sasvi::models::{ModelContext, OverseerSpec, SegmenterSpec};
use sasvi::report::{compare_markdown, plot_svg};
use sasvi::scene::Scenario;

/// Overseer-driven re-prompting for temporally consistent video segmentation.
///
/// Every subcommand accepts `--config FILE`: a JSON object whose keys are
/// flag names (`"nt": 4`, `"emit_flow": true`). Flags given on the command
/// line override the file.
#[derive(Parser)]
#[command(name = "sasvi", version, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scenario into frames, masks, flow and timeline files.
    Simulate(SimulateArgs),
    /// Segment a frame sequence with one of the methods.
    Run(RunArgs),
    /// Score a predicted mask sequence.
    Eval(EvalArgs),
    /// Render metric reports as a markdown table with the best values in bold.
    Compare(CompareArgs),
    /// Render per-frame metric curves as SVG.
    Plot(PlotArgs),
    /// Serve models over the bridge protocol on stdio or TCP.
    #[command(hide = true)]
    Serve(ServeArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// JSON file standing in for flags.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    _config: ConfigArg,
    /// Scenario description (JSON).
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write ground-truth flow files.
    #[arg(long)]
    emit_flow: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Sasvi,
    T1,
    Gt,
    Framewise,
}

#[derive(Clone, Copy, ValueEnum)]
enum Initial {
    Overseer,
    Gt,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    _config: ConfigArg,
    /// Directory of numbered PPM frames, or a simulated sequence root.
    #[arg(long)]
    frames: PathBuf,
    #[arg(long, value_enum, default_value = "sasvi")]
    method: Method,
    /// `oracle`, `noisy:drop=P,flip=P,spurious=P,jitter=X,morph=K,seed=N` or `bridge:ENDPOINT`.
    #[arg(long, default_value = "oracle")]
    overseer: String,
    /// `tracker[:history=N,tolerance=N,share=X]` or `bridge:ENDPOINT`.
    #[arg(long, default_value = "tracker")]
    segmenter: String,
    /// Frames a class-set change must persist before re-prompting.
    #[arg(long, default_value_t = 4)]
    nt: usize,
    /// Anchor points per connected component.
    #[arg(long, default_value_t = 3)]
    na: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Only react to entering classes.
    #[arg(long)]
    enter_only: bool,
    /// Re-prompt with anchors alone, without the overseer mask.
    #[arg(long)]
    anchors_only: bool,
    /// Ground-truth masks for `--method gt` (default: `masks/` beside the frames).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Ground-truth prompt interval for `--method gt`.
    #[arg(long, default_value_t = 30)]
    stride: usize,
    /// Prompt source for `--method t1`.
    #[arg(long, value_enum, default_value = "overseer")]
    initial: Initial,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    palette: Option<PathBuf>,
    /// Bridge request timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scope {
    WithReference,
    Observed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Matching {
    Optimal,
    Greedy,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    _config: ConfigArg,
    /// Predicted masks (a directory of PGMs or a `run` output directory).
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth masks (a directory of PGMs or a simulated sequence root).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Frames, needed for `--flow hs` and to locate sidecar files.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// `hs` (estimated), `oracle` (from the scenario beside the frames) or a directory of `.flo` files.
    #[arg(long, default_value = "hs")]
    flow: String,
    /// Classes the temporal metrics average over.
    #[arg(long, value_enum, default_value = "with-reference")]
    scope: Scope,
    #[arg(long, value_enum, default_value = "optimal")]
    matching: Matching,
    /// Leave background out of the semantic Dice.
    #[arg(long)]
    no_background: bool,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    _config: ConfigArg,
    /// Metric CSV files written by `eval`.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Row names, in the order of the reports (default: the paths).
    #[arg(long = "name")]
    names: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    _config: ConfigArg,
    report: PathBuf,
    /// Metrics to draw (repeatable).
    #[arg(long = "metric", default_values = ["dice_of", "iou_of", "iou_t", "semantic_dice"])]
    metrics: Vec<String>,
    /// `trace.json` from `run`, for event markers.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    _config: ConfigArg,
    /// Overseer to serve (see `run --help`).
    #[arg(long)]
    overseer: Option<String>,
    /// Segmenter to serve.
    #[arg(long)]
    segmenter: Option<String>,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    palette: Option<PathBuf>,
    /// Accept one TCP connection on this address instead of using stdio.
    #[arg(long)]
    listen: Option<String>,
}

/// A sequence directory given either directly or as the parent of `sub`.
fn sequence_dir(dir: &Path, sub: &str, ext: &str) -> PathBuf {
    let nested = dir.join(sub);
    let direct_has_files = fs::read_dir(dir)
        .map(|rd| rd.flatten().any(|e| e.path().extension().is_some_and(|x| x == ext)))
        .unwrap_or(false);
    if !direct_has_files && nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let scenario = Scenario::load(&args.scenario)?;
    dataset::write_dataset(&scenario, &args.out, args.emit_flow)
        .with_context(|| format!("writing into `{}`", args.out.display()))?;
    println!(
        "wrote {} frames of {}x{} to {}",
        scenario.num_frames(),
        scenario.width(),
        scenario.height(),
        args.out.display()
    );
    Ok(())
}

fn write_run(out: &Path, result: &RunOutput) -> Result<()> {
    write_mask_sequence(out.join("masks"), &result.masks)?;
    fs::write(out.join("trace.csv"), result.trace.records_csv())?;
    fs::write(out.join("trace.json"), result.trace.summary_json())?;
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let frames_dir = sequence_dir(&args.frames, dataset::FRAMES_DIR, "ppm");
    let labels = load_labels(args.labels.as_deref(), &frames_dir)?;
    if !(args.timeout > 0.0 && args.timeout.is_finite()) {
        return Err(sasvi::Error::InvalidArgument("--timeout must be positive".into()).into());
    }
    let ctx = ModelContext {
        labels: labels.clone(),
        palette: load_palette(args.palette.as_deref(), &frames_dir)?,
        timeout: Duration::from_secs_f64(args.timeout),
    };
    let overseer_spec = OverseerSpec::parse(&args.overseer)?;
    let segmenter_spec = SegmenterSpec::parse(&args.segmenter)?;
    let config = SasviConfig {
        n_t: args.nt,
        n_a: args.na,
        seed: args.seed,
        handle_leave: !args.enter_only,
        prompt_mode: if args.anchors_only { PromptMode::AnchorsOnly } else { PromptMode::MaskAndAnchors },
    };
    config.validate()?;
    let mut source = DirSource::open(&frames_dir)?;
    let gt_dir = || -> Result<PathBuf> {
        match &args.gt {
            Some(d) => Ok(sequence_dir(d, dataset::MASKS_DIR, "pgm")),
            None => frames_dir
                .parent()
                .map(|p| p.join(dataset::MASKS_DIR))
                .filter(|p| p.is_dir())
                .ok_or_else(|| sasvi::Error::InvalidArgument("no ground-truth masks; pass --gt".into()).into()),
        }
    };

    let result: RunResult = match args.method {
        Method::Sasvi => {
            let overseer = overseer_spec.build(&ctx)?;
            let mut segmenter = segmenter_spec.build(&ctx)?;
            run_sasvi(&mut source, &overseer, &mut segmenter, &config)
        }
        Method::Framewise => {
            let overseer = overseer_spec.build(&ctx)?;
            run_framewise(&mut source, &overseer)
        }
        Method::T1 => {
            let first = frames_dir.join(sasvi::controller::frame_file_name(0, "ppm"));
            let initial = match args.initial {
                Initial::Overseer => overseer_spec.build(&ctx)?.detect(0, &read_frame(&first)?)?.semantic_mask,
                Initial::Gt => sasvi::mask::io::read_mask(
                    gt_dir()?.join(sasvi::controller::frame_file_name(0, "pgm")),
                    labels.clone(),
                )?,
            };
            let mut segmenter = segmenter_spec.build(&ctx)?;
            run_baseline_t1(&mut source, &initial, &mut segmenter)
        }
        Method::Gt => {
            let dir = gt_dir()?;
            let files = numbered_files(&dir, "pgm")?;
            let mut segmenter = segmenter_spec.build(&ctx)?;
            let mut provider = |t: usize| -> sasvi::Result<Option<SegMask>> {
                files.get(t).map(|p| sasvi::mask::io::read_mask(p, labels.clone())).transpose()
            };
            run_gt_reprompt(&mut source, &mut provider, &mut segmenter, args.stride)
        }
    };

    let (output, failure) = match result {
        Ok(o) => (o, None),
        Err(f) => (*f.partial, Some(f.error)),
    };
    write_run(&args.out, &output).with_context(|| format!("writing into `{}`", args.out.display()))?;
    let trace = &output.trace;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "method {}: {} frames, {} events", trace.method, output.masks.len(), trace.events.len())?;
    for e in &trace.events {
        writeln!(
            stdout,
            "  event at frame {} re-prompted from {} (+{:?} -{:?})",
            e.trigger, e.reprompt, e.added, e.removed
        )?;
    }
    for (component, fps) in trace.timing.frames_per_second() {
        writeln!(stdout, "  {component:<10} {fps:>12.1} frames/s")?;
    }
    writeln!(stdout, "  controller overhead {:.2}%", 100.0 * trace.timing.controller_fraction())?;
    match failure {
        Some(e) => Err(anyhow::Error::new(e).context(format!("run aborted after {} frames", output.masks.len()))),
        None => Ok(()),
    }
}

fn eval(args: EvalArgs) -> Result<()> {
    let pred_dir = sequence_dir(&args.pred, dataset::MASKS_DIR, "pgm");
    let gt_dir = args.gt.as_ref().map(|d| sequence_dir(d, dataset::MASKS_DIR, "pgm"));
    let frames_dir = args.frames.as_ref().map(|d| sequence_dir(d, dataset::FRAMES_DIR, "ppm"));
    let label_path = args.labels.clone().or_else(|| {
        [frames_dir.as_deref(), gt_dir.as_deref(), Some(pred_dir.as_path())]
            .into_iter()
            .flatten()
            .find_map(|d| find_sidecar(d, dataset::LABELS_FILE))
    });
    let labels = load_labels(label_path.as_deref(), &pred_dir)?;
    let pred = read_mask_sequence(&pred_dir, labels.clone())?;
    let gt = gt_dir.as_ref().map(|d| read_mask_sequence(d, labels.clone())).transpose()?;

    let need_frames = || {
        frames_dir.clone().ok_or_else(|| sasvi::Error::InvalidArgument(format!("--flow {} needs --frames", args.flow)))
    };
    let frames;
    let fields;
    let flow = match args.flow.as_str() {
        "hs" => {
            frames =
                numbered_files(&need_frames()?, "ppm")?.iter().map(read_frame).collect::<sasvi::Result<Vec<_>>>()?;
            FlowInput::Estimate { frames: &frames, params: HornSchunckParams::default() }
        }
        "oracle" => {
            let dir = need_frames()?;
            let fields_from_scenario = match find_sidecar(&dir, dataset::SCENARIO_FILE) {
                Some(path) => {
                    let scenario = Scenario::load(path)?;
                    (0..scenario.num_frames().saturating_sub(1))
                        .map(|t| scenario.ground_truth_flow(t))
                        .collect::<sasvi::Result<Vec<_>>>()?
                }
                None => bail!(sasvi::Error::InvalidArgument(format!(
                    "--flow oracle needs {} beside `{}`",
                    dataset::SCENARIO_FILE,
                    dir.display()
                ))),
            };
            fields = fields_from_scenario;
            FlowInput::Fields(&fields)
        }
        dir => {
            fields = numbered_files(Path::new(dir), "flo")?.iter().map(read_flow).collect::<sasvi::Result<Vec<_>>>()?;
            FlowInput::Fields(&fields)
        }
    };
    let options = EvalOptions {
        scope: match args.scope {
            Scope::WithReference => ClassScope::WithReference,
            Scope::Observed => ClassScope::Observed,
        },
        matching: match args.matching {
            Matching::Optimal => MatchStrategy::Optimal,
            Matching::Greedy => MatchStrategy::Greedy,
        },
        background_in_dice: !args.no_background,
    };
    let report = evaluate(&pred, gt.as_deref(), &flow, &options)?;
    fs::write(&args.out, report.to_csv()).with_context(|| format!("writing `{}`", args.out.display()))?;
    let means = report.means();
    for (name, v) in sasvi::metrics::METRIC_NAMES.iter().zip(means) {
        if let Some(v) = v {
            println!("{name:<14} {v:.4}");
        }
    }
    Ok(())
}

fn read_report(path: &Path) -> Result<MetricReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading `{}`", path.display()))?;
    MetricReport::from_csv(&text).with_context(|| format!("parsing `{}`", path.display()))
}

fn compare(args: CompareArgs) -> Result<()> {
    if !args.names.is_empty() && args.names.len() != args.reports.len() {
        bail!(sasvi::Error::InvalidArgument(format!("{} names for {} reports", args.names.len(), args.reports.len())));
    }
    let mut rows = Vec::new();
    for (i, path) in args.reports.iter().enumerate() {
        let name = args.names.get(i).cloned().unwrap_or_else(|| path.display().to_string());
        rows.push((name, read_report(path)?));
    }
    let table = compare_markdown(&rows)?;
    fs::write(&args.out, &table).with_context(|| format!("writing `{}`", args.out.display()))?;
    print!("{table}");
    Ok(())
}

fn plot(args: PlotArgs) -> Result<()> {
    let report = read_report(&args.report)?;
    let events = match &args.trace {
        Some(p) => events_from_summary(&fs::read_to_string(p).with_context(|| format!("reading `{}`", p.display()))?)?,
        None => Vec::new(),
    };
    let metrics: Vec<&str> = args.metrics.iter().map(String::as_str).collect();
    let svg = plot_svg(&report, &metrics, &events)?;
    fs::write(&args.out, svg).with_context(|| format!("writing `{}`", args.out.display()))?;
    Ok(())
}

fn serve_cmd(args: ServeArgs) -> Result<()> {
    let labels = std::sync::Arc::new(sasvi::mask::io::read_label_space(&args.labels)?);
    let palette = args
        .palette
        .as_ref()
        .map(|p| -> Result<_> { Ok(sasvi::scene::Palette::from_csv(&fs::read_to_string(p)?)?) })
        .transpose()?;
    let ctx = ModelContext { labels: labels.clone(), palette, timeout: sasvi::bridge::DEFAULT_TIMEOUT };
    let mut models = ServedModels {
        labels,
        overseer: args.overseer.as_deref().map(|s| OverseerSpec::parse(s)?.build(&ctx)).transpose()?,
        segmenter: args.segmenter.as_deref().map(|s| SegmenterSpec::parse(s)?.build(&ctx)).transpose()?,
    };
    if models.roles().is_empty() {
        bail!(sasvi::Error::InvalidArgument("nothing to serve; pass --overseer and/or --segmenter".into()));
    }
    match &args.listen {
        Some(addr) => {
            let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            let (stream, _) = listener.accept()?;
            stream.set_nodelay(true)?;
            serve(&mut models, stream.try_clone()?, stream)?;
        }
        None => serve(&mut models, std::io::stdin().lock(), std::io::stdout().lock())?,
    }
    Ok(())
}

const SUBCOMMANDS: [&str; 6] = ["simulate", "run", "eval", "compare", "plot", "serve"];

/// Splices `--config` file entries in front of the command-line flags.
fn expand_config(raw: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(pos) = raw.iter().position(|a| a == "--config" || a.to_string_lossy().starts_with("--config=")) else {
        return Ok(raw);
    };
    let (path, consumed) = match raw[pos].to_string_lossy().strip_prefix("--config=") {
        Some(p) => (PathBuf::from(p), 1),
        None => match raw.get(pos + 1) {
            Some(p) => (PathBuf::from(p), 2),
            None => bail!(sasvi::Error::InvalidArgument("--config needs a file".into())),
        },
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config `{}`", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| sasvi::Error::InvalidArgument(format!("config `{}`: {e}", path.display())))?;
    let serde_json::Value::Object(map) = value else {
        bail!(sasvi::Error::InvalidArgument("config file must hold a JSON object".into()));
    };
    let mut injected = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        let mut push = |v: &serde_json::Value| -> Result<()> {
            match v {
                serde_json::Value::Bool(true) => injected.push(OsString::from(&flag)),
                serde_json::Value::Bool(false) | serde_json::Value::Null => {}
                serde_json::Value::String(s) => injected.extend([OsString::from(&flag), OsString::from(s)]),
                serde_json::Value::Number(n) => injected.extend([OsString::from(&flag), OsString::from(n.to_string())]),
                _ => bail!(sasvi::Error::InvalidArgument(format!("config key `{key}` has an unsupported value"))),
            }
            Ok(())
        };
        match &v {
            serde_json::Value::Array(items) => items.iter().try_for_each(&mut push)?,
            other => push(other)?,
        }
    }
    let mut rest: Vec<OsString> = raw[..pos].iter().chain(&raw[pos + consumed..]).cloned().collect();
    // Config entries go right after the subcommand so explicit flags win.
    let at = rest.iter().position(|a| SUBCOMMANDS.iter().any(|s| a == s)).map_or(rest.len(), |i| i + 1);
    let tail = rest.split_off(at);
    rest.extend(injected);
    rest.extend(tail);
    let out = rest;
    Ok(out)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<sasvi::Error>() {
            return if e.is_input_error() { 1 } else { 2 };
        }
        if let Some(f) = cause.downcast_ref::<sasvi::controller::RunFailure>() {
            return if f.error.is_input_error() { 1 } else { 2 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code =
                if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                    0
                } else {
                    1
                };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
        Command::Plot(a) => plot(a),
        Command::Serve(a) => serve_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
