//! Command-line front end.
//!
//! `simulate` writes `tx.trace` and `rx.trace` into `--out`; `analyze`,
//! `capacity` and `recover` read them back (from `--in`, or from explicit
//! `--tx` / `--rx` paths) and write CSV and JSON reports.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::capacity::{capacity_report, CapacityReport};
use crate::error::Error;
use crate::format::{read_trace, write_trace};
use crate::interleave::Interleaver;
use crate::recovery::{recover_trace, Recovery, RecoveryParams, Unresolved};
use crate::sim::{apply_periodic_noise, generate_tx, hide_corrupted_seqs, simulate, PeriodicNoise, SimConfig};
use crate::stats::{
    bit_position_profile, corrupted_frames, frame_rows, mean_segment_duration, outcome_iid_tests, segment_frames,
    symmetry_report, RunsTest, Verdict,
};
use crate::trace::{ChannelParams, ReceiveStatus, Trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hybridchan", version, about = "Hybrid BSC/erasure channel simulator and trace analyzer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a transmit trace and pass it through a channel.
    Simulate(SimulateArgs),
    /// Per-frame runs tests, segmentation, symmetry and outcome tests.
    Analyze(AnalyzeArgs),
    /// Estimate channel parameters and capacities.
    Capacity(CapacityArgs),
    /// Recover sequence numbers of corrupted frames.
    Recover(RecoverArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub frames: usize,
    /// Erasure probability.
    #[arg(long, default_value_t = 0.1, conflicts_with = "periodic")]
    pub r: f64,
    /// Probability that a non-erased frame is error free.
    #[arg(long, default_value_t = 0.7, conflicts_with = "periodic")]
    pub s: f64,
    /// Bit crossover probability in corrupted frames.
    #[arg(long, default_value_t = 0.005, conflicts_with = "periodic")]
    pub p: f64,
    /// PHY rate in bits per second.
    #[arg(long, default_value_t = 54e6)]
    pub rate: f64,
    #[arg(long, default_value_t = 8000)]
    pub frame_len: usize,
    #[arg(long, default_value_t = 20_000)]
    pub interval_us: u64,
    #[arg(long, env = "HYBRIDCHAN_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Periodic within-frame noise instead of the i.i.d. channel.
    #[arg(long)]
    pub periodic: bool,
    #[arg(long, default_value_t = 288, requires = "periodic")]
    pub period: usize,
    #[arg(long, default_value_t = 32, requires = "periodic")]
    pub burst: usize,
    #[arg(long, default_value_t = 0.05, requires = "periodic")]
    pub p_burst: f64,
    /// Receiver clock skew in parts per million.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true, conflicts_with = "periodic")]
    pub skew_ppm: f64,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true, conflicts_with = "periodic")]
    pub offset_us: i64,
    /// Uniform receive timestamp jitter, +- this many microseconds.
    #[arg(long, default_value_t = 0, conflicts_with = "periodic")]
    pub jitter_us: u64,
    /// Constant RSSI reported on received frames.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "periodic")]
    pub rssi: Option<i32>,
    /// Also write `rx_scrubbed.trace` with corrupted-frame seqs removed.
    #[arg(long)]
    pub scrub: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceInput {
    /// Directory holding `tx.trace` and `rx.trace`.
    #[arg(long = "in", default_value = ".")]
    pub input: PathBuf,
    #[arg(long)]
    pub tx: Option<PathBuf>,
    #[arg(long)]
    pub rx: Option<PathBuf>,
}

impl TraceInput {
    fn paths(&self) -> (PathBuf, PathBuf) {
        (
            self.tx.clone().unwrap_or_else(|| self.input.join("tx.trace")),
            self.rx.clone().unwrap_or_else(|| self.input.join("rx.trace")),
        )
    }

    fn load(&self) -> Result<Trace, CliError> {
        let (tx, rx) = self.paths();
        let tx = load(&tx)?;
        let rx = load(&rx)?;
        Trace::merge(tx, rx).map_err(CliError::from)
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: TraceInput,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Analyze error vectors in channel order, without de-interleaving.
    #[arg(long)]
    pub no_interleave: bool,
    #[arg(long, default_value_t = Interleaver::DEFAULT_KEY)]
    pub interleave_key: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[command(flatten)]
    pub input: TraceInput,
    /// RSSI bin width in dBm.
    #[arg(long, default_value_t = 1)]
    pub rssi_bin: i32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    #[command(flatten)]
    pub input: TraceInput,
    /// Anchors used for each clock fit.
    #[arg(long, default_value_t = 50)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub candidates: usize,
    /// Largest accepted normalized Hamming distance.
    #[arg(long, default_value_t = 0.4)]
    pub threshold: f64,
    /// rx trace with the true sequence numbers, for an accuracy summary.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Parse(String),
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Invariant(_) => EXIT_INVARIANT,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Parse(m) | CliError::Invariant(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) => CliError::Usage(e.to_string()),
            Error::Parse { .. } | Error::LengthMismatch { .. } => CliError::Parse(e.to_string()),
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<Trace, CliError> {
    read_trace(path).map_err(|e| match e {
        Error::Io(io) => CliError::Parse(format!("{}: {io}", path.display())),
        other => {
            let code = CliError::from(other);
            let msg = format!("{}: {}", path.display(), code.message());
            match code {
                CliError::Usage(_) | CliError::Parse(_) => CliError::Parse(msg),
                CliError::Invariant(_) => CliError::Invariant(msg),
            }
        }
    })
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Invariant(format!("{}: {e}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn save_trace(trace: &Trace, path: &Path) -> Result<(), CliError> {
    write_trace(trace, path).map_err(|e| io_err(path, e))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn side_only(trace: &Trace, rx: bool) -> Trace {
    let mut t = Trace::new(trace.meta.clone());
    if rx {
        t.rx = trace.rx.clone();
    } else {
        t.tx = trace.tx.clone();
    }
    t
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let trace = if a.periodic {
        let params = ChannelParams::new(0.0, 0.0, a.p_burst, a.rate, a.frame_len, a.interval_us)?;
        let cfg = SimConfig::new(params, a.frames, a.seed);
        let noise = PeriodicNoise::new(a.period, a.burst, a.p_burst);
        let mut t = apply_periodic_noise(&generate_tx(&cfg)?, &noise, a.seed)?;
        t.meta.description = format!(
            "simulated periodic period={} burst={} p={} seed={}",
            a.period, a.burst, a.p_burst, a.seed
        );
        t
    } else {
        let params = ChannelParams::new(a.r, a.s, a.p, a.rate, a.frame_len, a.interval_us)?;
        let mut cfg = SimConfig::new(params, a.frames, a.seed).with_clock(a.skew_ppm, a.offset_us, a.jitter_us);
        if let Some(rssi) = a.rssi {
            cfg = cfg.with_rssi(rssi);
        }
        simulate(&cfg)?
    };
    ensure_dir(&a.out)?;
    save_trace(&side_only(&trace, false), &a.out.join("tx.trace"))?;
    save_trace(&side_only(&trace, true), &a.out.join("rx.trace"))?;
    if a.scrub {
        save_trace(&side_only(&hide_corrupted_seqs(&trace), true), &a.out.join("rx_scrubbed.trace"))?;
    }

    let _ = writeln!(out, "frames      {}", a.frames);
    if a.periodic {
        let _ = writeln!(out, "noise       periodic period={} burst={} p={}", a.period, a.burst, a.p_burst);
    } else {
        let _ = writeln!(out, "channel     r={} s={} p={}", a.r, a.s, a.p);
        let _ = writeln!(out, "clock       skew={}ppm offset={}us jitter=+-{}us", a.skew_ppm, a.offset_us, a.jitter_us);
    }
    let _ = writeln!(out, "frame       {} bits every {} us at {} b/s", a.frame_len, a.interval_us, a.rate);
    let _ = writeln!(out, "seed        {}", a.seed);
    let _ = writeln!(
        out,
        "received    ok={} crc={} phy={}",
        trace.count_status(ReceiveStatus::Ok),
        trace.count_status(ReceiveStatus::CrcError),
        trace.count_status(ReceiveStatus::PhyError)
    );
    let _ = writeln!(out, "wrote       {}", a.out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct AnalyzeSummary {
    rx_frames: usize,
    ok: usize,
    crc: usize,
    phy: usize,
    analyzed_frames: usize,
    frames_passed: usize,
    frames_failed: usize,
    frames_excluded: usize,
    pass_fraction: Option<f64>,
    deinterleaved: bool,
    alpha: f64,
    segments: usize,
    mean_segment_duration_s: Option<f64>,
    symmetry: Option<crate::stats::SymmetryReport<f64>>,
    outcomes: crate::stats::OutcomeReport<f64>,
}

pub fn cmd_analyze(a: &AnalyzeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let trace = a.input.load()?;
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::Usage("--alpha must lie in (0, 1)".into()));
    }
    let test = RunsTest::new(a.alpha);
    let il = Interleaver::new(a.interleave_key);
    let interleaver = (!a.no_interleave).then_some(&il);

    let frames = corrupted_frames(&trace, interleaver);
    let rows = frame_rows(&frames, &test);
    let segments = segment_frames(&frames, &test, trace.meta.interval_us);
    let profile: Vec<f64> = match bit_position_profile(&trace, interleaver) {
        Ok(p) => p,
        Err(Error::NoCorruptedFrames) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let symmetry = match symmetry_report::<f64>(&trace) {
        Ok(s) => Some(s),
        Err(Error::NoCorruptedFrames) => None,
        Err(e) => return Err(e.into()),
    };
    let outcomes = outcome_iid_tests(&trace, &segments, &test);

    ensure_dir(&a.out)?;
    let frame_table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.seq.to_string(),
                r.timestamp_us.to_string(),
                r.n_corrupted.to_string(),
                r.crossover.to_string(),
                r.n_runs.to_string(),
                opt(r.z),
                opt(r.p_value),
                r.verdict.to_string(),
            ]
        })
        .collect();
    write_csv(
        &a.out.join("frames.csv"),
        &["seq", "timestamp_us", "n_corrupted", "crossover", "n_runs", "z", "p_value", "verdict"],
        &frame_table,
    )?;

    let seg_table: Vec<Vec<String>> = segments
        .iter()
        .map(|s| {
            vec![
                s.start_frame.to_string(),
                s.end_frame.to_string(),
                s.n_frames.to_string(),
                s.n_corrupted.to_string(),
                s.duration_us.to_string(),
                s.pooled_p.to_string(),
                s.n_bits.to_string(),
                s.n_flips.to_string(),
                opt(s.test.z()),
                s.test.verdict.label().to_string(),
            ]
        })
        .collect();
    write_csv(
        &a.out.join("segments.csv"),
        &[
            "start_frame",
            "end_frame",
            "n_frames",
            "n_corrupted",
            "duration_us",
            "pooled_p",
            "n_bits",
            "n_flips",
            "z",
            "verdict",
        ],
        &seg_table,
    )?;

    let profile_table: Vec<Vec<String>> = profile
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), v.to_string()])
        .collect();
    write_csv(&a.out.join("profile.csv"), &["position", "error_rate"], &profile_table)?;

    let outcome_table: Vec<Vec<String>> = outcomes
        .classes
        .iter()
        .map(|c| {
            vec![
                c.outcome.token().to_string(),
                c.passing_frames.to_string(),
                c.tested_frames.to_string(),
                c.excluded_frames.to_string(),
                c.segments_passed.to_string(),
                c.segments_failed.to_string(),
                opt(c.fraction),
            ]
        })
        .collect();
    write_csv(
        &a.out.join("outcomes.csv"),
        &[
            "outcome",
            "passing_frames",
            "tested_frames",
            "excluded_frames",
            "segments_passed",
            "segments_failed",
            "fraction",
        ],
        &outcome_table,
    )?;

    let count = |v: &'static str| rows.iter().filter(|r| r.verdict == v).count();
    let passed = count(Verdict::Pass.label());
    let failed = count(Verdict::Fail.label());
    let summary = AnalyzeSummary {
        rx_frames: trace.rx.len(),
        ok: trace.count_status(ReceiveStatus::Ok),
        crc: trace.count_status(ReceiveStatus::CrcError),
        phy: trace.count_status(ReceiveStatus::PhyError),
        analyzed_frames: rows.len(),
        frames_passed: passed,
        frames_failed: failed,
        frames_excluded: rows.len() - passed - failed,
        pass_fraction: (passed + failed > 0).then(|| passed as f64 / (passed + failed) as f64),
        deinterleaved: !a.no_interleave,
        alpha: a.alpha,
        segments: segments.len(),
        mean_segment_duration_s: mean_segment_duration(&segments, trace.meta.interval_us),
        symmetry,
        outcomes,
    };
    write_json(&a.out.join("summary.json"), &summary)?;

    let _ = writeln!(out, "rx frames          {} (ok {}, crc {}, phy {})", summary.rx_frames, summary.ok, summary.crc, summary.phy);
    let _ = writeln!(
        out,
        "frame runs tests   {} pass, {} fail, {} excluded",
        summary.frames_passed, summary.frames_failed, summary.frames_excluded
    );
    let _ = writeln!(out, "segments           {}", summary.segments);
    if let Some(d) = summary.mean_segment_duration_s {
        let _ = writeln!(out, "mean duration      {d} s");
    }
    if let Some(s) = &summary.symmetry {
        let _ = writeln!(out, "mu1 / mu0          {} / {}", opt(s.mu1), opt(s.mu0));
        let _ = writeln!(out, "symmetric          {}", opt(s.symmetric));
    }
    for c in &summary.outcomes.classes {
        let _ = writeln!(out, "outcome {:<5}      {}", c.outcome.token(), opt(c.fraction));
    }
    Ok(())
}

pub fn cmd_capacity(a: &CapacityArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let trace = a.input.load()?;
    let report: CapacityReport<f64> = capacity_report(&trace, a.rssi_bin)?;
    let est = &report.estimate;
    let val = |e: Option<crate::capacity::Estimate<f64>>| opt(e.map(|e| e.value));
    let _ = writeln!(out, "frames       {} (ok {}, crc {}, phy {})", est.n_frames, est.n_ok, est.n_corrupted, est.n_phy);
    let _ = writeln!(out, "r_hat        {}", val(est.r_hat));
    let _ = writeln!(out, "s_hat        {}", val(est.s_hat));
    let _ = writeln!(out, "p_hat        {}", val(est.p_hat));
    let _ = writeln!(out, "C_hybrid     {} b/s ({} of R)", report.hybrid_bps, report.hybrid_normalized);
    let _ = writeln!(out, "C_erasure    {} b/s ({} of R)", report.erasure_bps, report.erasure_normalized);
    let _ = writeln!(out, "gain         {}", opt(report.gain));

    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        write_json(&dir.join("capacity.json"), &report)?;
        if let Some(bins) = &report.per_rssi_bins {
            let rows: Vec<Vec<String>> = bins
                .iter()
                .map(|b| {
                    vec![
                        b.rssi.to_string(),
                        b.n_frames.to_string(),
                        b.fer.to_string(),
                        b.s_hat.to_string(),
                        opt(b.p_hat),
                        b.hybrid_bps.to_string(),
                        b.erasure_bps.to_string(),
                        opt(b.gain),
                    ]
                })
                .collect();
            write_csv(
                &dir.join("capacity.csv"),
                &["rssi", "n", "fer", "s_hat", "p_hat", "C_hybrid", "C_erasure", "gain"],
                &rows,
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RecoverySummary {
    frames: usize,
    recovered: usize,
    unresolved: usize,
    correct: Option<usize>,
    wrong: Option<usize>,
    accuracy: Option<f64>,
}

pub fn cmd_recover(a: &RecoverArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let trace = a.input.load()?;
    let params = RecoveryParams {
        window_size: a.window,
        max_candidates: a.candidates,
        match_threshold: a.threshold,
    };
    if a.window < 2 || a.candidates == 0 || !(0.0..=1.0).contains(&a.threshold) {
        return Err(CliError::Usage(
            "need --window >= 2, --candidates >= 1 and --threshold in [0, 1]".into(),
        ));
    }
    if !trace.rx.iter().any(|f| f.status == ReceiveStatus::Ok && f.seq.is_some()) {
        let _ = writeln!(err, "warning: no error-free frames to anchor the clock; nothing can be recovered");
    }
    let (recovered, results) = recover_trace(&trace, params)?;
    let truth = a.truth.as_deref().map(load).transpose()?;
    if let Some(t) = &truth {
        if t.rx.len() != trace.rx.len() {
            return Err(CliError::Parse(format!(
                "truth trace has {} rx records, expected {}",
                t.rx.len(),
                trace.rx.len()
            )));
        }
    }

    ensure_dir(&a.out)?;
    save_trace(&side_only(&recovered, true), &a.out.join("recovered.trace"))?;
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            let (outcome, seq, dist) = match &r.result {
                Recovery::Recovered { seq, distance } => ("recovered", seq.to_string(), distance.to_string()),
                Recovery::Unresolved(Unresolved::NoAnchors) => ("no_anchors", String::new(), String::new()),
                Recovery::Unresolved(Unresolved::NoCandidates) => ("no_candidates", String::new(), String::new()),
                Recovery::Unresolved(Unresolved::AboveThreshold { best_distance }) => {
                    ("above_threshold", String::new(), best_distance.to_string())
                }
            };
            let true_seq = truth.as_ref().map(|t| opt(t.rx[r.rx_index].seq)).unwrap_or_default();
            vec![
                r.rx_index.to_string(),
                r.timestamp_us.to_string(),
                outcome.to_string(),
                seq,
                dist,
                true_seq,
            ]
        })
        .collect();
    write_csv(
        &a.out.join("recovery.csv"),
        &["rx_index", "timestamp_us", "outcome", "seq", "distance", "true_seq"],
        &rows,
    )?;

    let n_rec = results.iter().filter(|r| r.result.seq().is_some()).count();
    let correct = truth.as_ref().map(|t| {
        results
            .iter()
            .filter(|r| r.result.seq().is_some() && r.result.seq() == t.rx[r.rx_index].seq)
            .count()
    });
    let summary = RecoverySummary {
        frames: results.len(),
        recovered: n_rec,
        unresolved: results.len() - n_rec,
        correct,
        wrong: correct.map(|c| n_rec - c),
        accuracy: correct.filter(|_| !results.is_empty()).map(|c| c as f64 / results.len() as f64),
    };
    write_json(&a.out.join("recovery.json"), &summary)?;

    let _ = writeln!(out, "frames       {}", summary.frames);
    let _ = writeln!(out, "recovered    {}", summary.recovered);
    let _ = writeln!(out, "unresolved   {}", summary.unresolved);
    if let Some(acc) = summary.accuracy {
        let _ = writeln!(out, "accuracy     {acc}");
    }
    Ok(())
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Analyze(a) => cmd_analyze(a, out),
        Command::Capacity(a) => cmd_capacity(a, out),
        Command::Recover(a) => cmd_recover(a, out, err),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}
