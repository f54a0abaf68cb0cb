//! Command-line surface: synthesize CSI captures, run the proximity
//! detector, score event streams, and sweep detector thresholds over a
//! corpus.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (malformed input,
//! invalid config or scenario).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use wiprox_core::config::PipelineConfig;
use wiprox_core::eval;
use wiprox_core::fsm::FsmConfig;
use wiprox_core::io::{
    self, read_events, read_ground_truth, write_events, write_ground_truth, CaptureHeader,
    CsiFileReader, PowerFileReader, StreamKind, StreamMeta,
};
use wiprox_core::pipeline::Detector;
use wiprox_core::synth::{self, GroundTruthEvent, ScenarioDoc};

#[derive(Parser)]
#[command(name = "wiprox", version, about = "WiFi-CSI proximity detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the detector over a CSI or power capture file.
    Detect(DetectArgs),
    /// Synthesize a CSI capture plus its ground-truth sidecar.
    Synth(SynthArgs),
    /// Score an event stream against ground truth.
    Eval(EvalArgs),
    /// Sweep detector thresholds over a corpus of capture/sidecar pairs.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct DetectArgs {
    /// Input capture file (`csi,v1,...` or `power,v1,...`).
    #[arg(long)]
    input: PathBuf,
    /// Pipeline configuration JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Events output (JSON lines); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the fused feature trace as CSV `t,fp,fs,v_hat,c,fg`.
    #[arg(long)]
    trace_features: Option<PathBuf>,
    /// Write per-window ACF dumps as CSV `window_end,lag,acf,acf_diff`.
    #[arg(long)]
    trace_acf: Option<PathBuf>,
    /// Write the state trace as CSV `t,state`.
    #[arg(long)]
    trace_states: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario document (JSON). Alternative to --preset.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Preset name: approach_dwell_leave, empty_room, approach_abort,
    /// short_path.
    #[arg(long)]
    preset: Option<String>,
    /// Start distance override for approach presets, meters.
    #[arg(long)]
    start_distance: Option<f64>,
    /// Dwell duration override for approach presets, seconds.
    #[arg(long)]
    dwell: Option<f64>,
    /// Capture duration override, seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Seed for every randomized part of the scenario.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output capture path; the sidecar lands at `<out>.gt.jsonl`.
    #[arg(long)]
    out: PathBuf,
    /// Proximate-area radius for ground truth, meters.
    #[arg(long, default_value_t = 1.5)]
    proximate_radius: f64,
}

#[derive(Args)]
struct EvalArgs {
    /// Detector events (JSON lines).
    #[arg(long)]
    events: PathBuf,
    /// Ground-truth sidecar (JSON lines).
    #[arg(long)]
    ground_truth: PathBuf,
    /// Stream duration override when neither file carries a meta line.
    #[arg(long)]
    duration: Option<f64>,
    /// Write the full report as JSON here (the table always prints).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Directory of capture files with `.gt.jsonl` sidecars.
    #[arg(long)]
    corpus: PathBuf,
    /// Pipeline configuration JSON shared by all grid points.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated theta_near grid.
    #[arg(long, value_delimiter = ',', default_value = "0.55,0.65,0.75")]
    grid_near: Vec<f64>,
    /// Comma-separated theta_far grid.
    #[arg(long, value_delimiter = ',', default_value = "0.35,0.45,0.55")]
    grid_far: Vec<f64>,
    /// Comma-separated theta_gait grid.
    #[arg(long, value_delimiter = ',', default_value = "0.02,0.05,0.10")]
    grid_gait: Vec<f64>,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failures carrying their process exit code.
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Detect(args) => cmd_detect(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<PipelineConfig, CliError> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            PipelineConfig::from_json(&text).map_err(data)
        }
    }
}

// ---------------------------------------------------------------------------
// detect

struct TraceSinks {
    features: Option<BufWriter<File>>,
    acf: Option<BufWriter<File>>,
    states: Option<BufWriter<File>>,
}

fn cmd_detect(args: DetectArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let file = File::open(&args.input)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.input.display())))?;
    let mut reader = BufReader::new(file);

    // sniff the stream kind from the header line
    let mut header_line = String::new();
    reader
        .read_line(&mut header_line)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.input.display())))?;
    let kind = if header_line.starts_with("power,") {
        StreamKind::Power
    } else {
        StreamKind::Csi
    };
    let file = File::open(&args.input).map_err(data)?;
    let reader = BufReader::new(file);

    let mut detector = Detector::new(cfg).map_err(data)?;
    let mut sinks = TraceSinks {
        features: open_sink(&args.trace_features)?,
        acf: open_sink(&args.trace_acf)?,
        states: open_sink(&args.trace_states)?,
    };
    if let Some(w) = sinks.features.as_mut() {
        writeln!(w, "t,fp,fs,v_hat,c,fg").map_err(data)?;
    }
    if let Some(w) = sinks.acf.as_mut() {
        detector.collect_acf(true);
        writeln!(w, "window_end,lag,acf,acf_diff").map_err(data)?;
    }
    if let Some(w) = sinks.states.as_mut() {
        writeln!(w, "t,state").map_err(data)?;
    }

    let mut events = Vec::new();
    match kind {
        StreamKind::Csi => {
            let frames = CsiFileReader::new(reader).map_err(data)?;
            for frame in frames {
                let frame = frame.map_err(data)?;
                let out = detector.push_csi(&frame).map_err(data)?;
                drain_output(out, &mut events, &mut sinks)?;
            }
        }
        StreamKind::Power => {
            let frames = PowerFileReader::new(reader).map_err(data)?;
            for frame in frames {
                let frame = frame.map_err(data)?;
                let out = detector.push_power(frame).map_err(data)?;
                drain_output(out, &mut events, &mut sinks)?;
            }
        }
    }
    let out = detector.finish().map_err(data)?;
    drain_output(out, &mut events, &mut sinks)?;

    if detector.degenerate_frames() > 0 {
        log::warn!("dropped {} degenerate frames", detector.degenerate_frames());
    }

    let meta = detector.last_timestamp().map(|duration| StreamMeta { duration });
    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).map_err(data)?);
            write_events(&mut w, meta, &events).map_err(data)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            write_events(&mut w, meta, &events).map_err(data)?;
        }
    }
    Ok(())
}

fn open_sink(path: &Option<PathBuf>) -> Result<Option<BufWriter<File>>, CliError> {
    match path {
        None => Ok(None),
        Some(p) => Ok(Some(BufWriter::new(File::create(p).map_err(data)?))),
    }
}

fn drain_output(
    out: wiprox_core::pipeline::PushOutput,
    events: &mut Vec<wiprox_core::DetectionEvent>,
    sinks: &mut TraceSinks,
) -> Result<(), CliError> {
    for (sample, state) in &out.features {
        if let Some(w) = sinks.features.as_mut() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                sample.t, sample.fp, sample.fs, sample.v_hat, sample.c, sample.fg
            )
            .map_err(data)?;
        }
        if let Some(w) = sinks.states.as_mut() {
            writeln!(w, "{},{state}", sample.t).map_err(data)?;
        }
    }
    if let Some(w) = sinks.acf.as_mut() {
        for acf in &out.acfs {
            for (i, lag) in acf.lags.iter().enumerate() {
                let diff = if i == 0 { 0.0 } else { acf.acf_diff[i - 1] };
                writeln!(w, "{},{lag},{},{diff}", acf.window_end, acf.acf[i]).map_err(data)?;
            }
        }
    }
    events.extend(out.events);
    Ok(())
}

// ---------------------------------------------------------------------------
// synth

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let doc = match (&args.scenario, &args.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<ScenarioDoc>(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        }
        (None, Some(name)) => {
            // a bad preset on the command line is a usage problem, not bad data
            name.parse::<synth::Preset>()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            ScenarioDoc {
                preset: Some(name.clone()),
                start_distance_m: args.start_distance,
                dwell_s: args.dwell,
                duration: args.duration,
                ..Default::default()
            }
        }
        (None, None) => {
            return Err(CliError::Usage("either --scenario or --preset is required".into()))
        }
        _ => unreachable!("clap conflicts_with"),
    };
    let (spec, seed) = doc.resolve(args.seed).map_err(data)?;
    let (stream, gt) = synth::generate_csi(
        &spec.scene,
        &spec.trajectory,
        spec.duration,
        seed,
        args.proximate_radius,
    )
    .map_err(data)?;

    let header = CaptureHeader {
        kind: StreamKind::Csi,
        num_subcarriers: spec.scene.num_subcarriers,
        sample_rate: spec.scene.sample_rate,
        center_freq: spec.scene.center_freq,
        bandwidth: spec.scene.bandwidth,
    };
    let mut w = BufWriter::new(File::create(&args.out).map_err(data)?);
    let frames = io::write_csi_file(&mut w, &header, stream).map_err(data)?;
    w.flush().map_err(data)?;

    let sidecar = sidecar_path(&args.out);
    let mut w = BufWriter::new(File::create(&sidecar).map_err(data)?);
    write_ground_truth(&mut w, Some(StreamMeta { duration: spec.duration }), &gt)
        .map_err(data)?;
    w.flush().map_err(data)?;

    log::info!(
        "wrote {frames} frames to {} and {} ground-truth events to {}",
        args.out.display(),
        gt.len(),
        sidecar.display()
    );
    Ok(())
}

fn sidecar_path(capture: &Path) -> PathBuf {
    let mut s = capture.as_os_str().to_owned();
    s.push(".gt.jsonl");
    PathBuf::from(s)
}

// ---------------------------------------------------------------------------
// eval

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let (events_meta, events) = read_events(BufReader::new(
        File::open(&args.events)
            .map_err(|e| CliError::Data(format!("{}: {e}", args.events.display())))?,
    ))
    .map_err(data)?;
    let (gt_meta, gt) = read_ground_truth(BufReader::new(
        File::open(&args.ground_truth)
            .map_err(|e| CliError::Data(format!("{}: {e}", args.ground_truth.display())))?,
    ))
    .map_err(data)?;

    let report = evaluate_stream(&events, &gt, args.duration, gt_meta, events_meta)?;
    print!("{report}");
    if let Some(path) = &args.out {
        let mut w = BufWriter::new(File::create(path).map_err(data)?);
        serde_json::to_writer_pretty(&mut w, &report).map_err(data)?;
        writeln!(w).map_err(data)?;
    }
    Ok(())
}

fn evaluate_stream(
    events: &[wiprox_core::DetectionEvent],
    gt: &[GroundTruthEvent],
    duration_flag: Option<f64>,
    gt_meta: Option<StreamMeta>,
    events_meta: Option<StreamMeta>,
) -> Result<eval::EvalReport, CliError> {
    let span_end = duration_flag
        .or(gt_meta.map(|m| m.duration))
        .or(events_meta.map(|m| m.duration))
        .or_else(|| {
            events
                .iter()
                .map(|e| e.t)
                .chain(gt.iter().map(|g| g.exit_t))
                .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))))
        })
        .ok_or_else(|| {
            CliError::Data(
                "cannot determine the stream span: no meta line, no events, no --duration".into(),
            )
        })?;
    let detections = eval::intervals_from_events(events).map_err(data)?;
    let empty = eval::empty_segments(gt, span_end);
    eval::evaluate(&detections, gt, &empty, span_end).map_err(data)
}

// ---------------------------------------------------------------------------
// sweep

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let base_cfg = load_config(&args.config)?;
    let pairs = corpus_pairs(&args.corpus)?;
    if pairs.is_empty() {
        return Err(CliError::Data(format!(
            "no capture/sidecar pairs under {}",
            args.corpus.display()
        )));
    }

    struct Row {
        near: f64,
        far: f64,
        gait: f64,
        result: Result<eval::EvalReport, String>,
    }

    let mut grid = Vec::new();
    for &near in &args.grid_near {
        for &far in &args.grid_far {
            for &gait in &args.grid_gait {
                grid.push((near, far, gait));
            }
        }
    }

    let rows: Vec<Row> = grid
        .par_iter()
        .map(|&(near, far, gait)| {
            let mut cfg = base_cfg.clone();
            cfg.fsm = FsmConfig { theta_near: near, theta_far: far, theta_gait: gait, ..cfg.fsm };
            let result = match cfg.validate() {
                Err(e) => Err(e.to_string().replace('\n', " ")),
                Ok(()) => run_corpus(&cfg, &pairs).map_err(|e| e.message().to_string()),
            };
            Row { near, far, gait, result }
        })
        .collect();

    // Pareto set over (IA up, FA down) among valid rows
    let valid: Vec<(usize, f64, f64)> = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            r.result.as_ref().ok().map(|rep| {
                (i, rep.ia.unwrap_or(0.0), rep.fa.unwrap_or(0.0))
            })
        })
        .collect();
    let pareto: Vec<bool> = rows
        .iter()
        .enumerate()
        .map(|(i, _)| {
            valid.iter().find(|(j, _, _)| *j == i).map_or(false, |&(_, ia, fa)| {
                !valid
                    .iter()
                    .any(|&(j, ia2, fa2)| j != i && ia2 >= ia && fa2 <= fa && (ia2 > ia || fa2 < fa))
            })
        })
        .collect();

    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(data)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(out, "theta_near,theta_far,theta_gait,ia,da,tau_mean,fa,pareto,note").map_err(data)?;
    for (row, is_pareto) in rows.iter().zip(&pareto) {
        match &row.result {
            Ok(rep) => {
                let fmt = |v: Option<f64>| v.map_or(String::from(""), |x| format!("{x:.4}"));
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},",
                    row.near,
                    row.far,
                    row.gait,
                    fmt(rep.ia),
                    fmt(rep.da),
                    fmt(rep.tau_mean),
                    fmt(rep.fa),
                    is_pareto,
                )
                .map_err(data)?;
            }
            Err(reason) => {
                writeln!(
                    out,
                    "{},{},{},,,,,false,rejected: {}",
                    row.near, row.far, row.gait, reason
                )
                .map_err(data)?;
            }
        }
    }
    Ok(())
}

fn corpus_pairs(dir: &Path) -> Result<Vec<(PathBuf, PathBuf)>, CliError> {
    let mut pairs = Vec::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry.map_err(data)?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.ends_with(".gt.jsonl") {
            continue;
        }
        if !path.is_file() {
            continue;
        }
        let sidecar = sidecar_path(&path);
        if sidecar.exists() {
            pairs.push((path, sidecar));
        }
    }
    pairs.sort();
    Ok(pairs)
}

fn run_corpus(
    cfg: &PipelineConfig,
    pairs: &[(PathBuf, PathBuf)],
) -> Result<eval::EvalReport, CliError> {
    struct StreamData {
        detections: Vec<eval::DetectionInterval>,
        gt: Vec<GroundTruthEvent>,
        empty: Vec<eval::EmptySegment>,
        span_end: f64,
    }
    let streams: Vec<Result<StreamData, CliError>> = pairs
        .par_iter()
        .map(|(capture, sidecar)| {
            let file = File::open(capture).map_err(data)?;
            let frames = CsiFileReader::new(BufReader::new(file)).map_err(data)?;
            let mut detector = Detector::new(cfg.clone()).map_err(data)?;
            let mut events = Vec::new();
            for frame in frames {
                let frame = frame.map_err(data)?;
                events.extend(detector.push_csi(&frame).map_err(data)?.events);
            }
            events.extend(detector.finish().map_err(data)?.events);
            let (meta, gt) =
                read_ground_truth(BufReader::new(File::open(sidecar).map_err(data)?))
                    .map_err(data)?;
            let span_end = meta
                .map(|m| m.duration)
                .or(detector.last_timestamp())
                .unwrap_or(0.0);
            let detections = eval::intervals_from_events(&events).map_err(data)?;
            let empty = eval::empty_segments(&gt, span_end);
            Ok(StreamData { detections, gt, empty, span_end })
        })
        .collect();
    let mut datas = Vec::with_capacity(streams.len());
    for s in streams {
        datas.push(s?);
    }
    let views: Vec<eval::StreamEval> = datas
        .iter()
        .map(|d| eval::StreamEval {
            detections: &d.detections,
            gt: &d.gt,
            empty: &d.empty,
            span_end: d.span_end,
        })
        .collect();
    eval::evaluate_corpus(&views).map_err(data)
}
