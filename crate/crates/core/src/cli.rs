//! Command-line driver: one JSON record on stdout per command, data files
//! under the output directory.
//!
//! Exit codes: 0 success, 2 parameter out of range, 3 numerical failure,
//! 4 bad configuration or missing input.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::flow::{self, FlowConfig, FlowMode, FlowRow, FlowTrace, TerminalReason};
use crate::geometry::{AngularGrid, SupportFunction};
use crate::io;
use crate::modes;
use crate::shrinker::{self, ProfileKind, ShrinkerProfile};
use crate::spectral;

#[derive(Debug, Parser)]
#[command(name = "alpha-csf", version, about = "Support-function laboratory for the alpha-curve shortening flow")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a k-fold shrinker (or the circle) and its entropy.
    Shrinker(ShrinkerArgs),
    /// Spectrum of the linearized operator at a shrinker.
    Spectrum(SpectrumArgs),
    /// Run the flow and write a trace.
    Flow(FlowArgs),
    /// Mode analysis of a normalized flow trace near the circle.
    Modes(ModesArgs),
    /// Entropies of the circle and all admissible k-fold shrinkers.
    EntropyTable(EntropyTableArgs),
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShrinkerArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Integer k or "circle".
    #[arg(long)]
    pub k: Option<String>,
    /// Grid size (rounded up to a multiple of 2k; refined until the profile
    /// residual bound holds).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub gnuplot: Option<bool>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    /// "circle" or "k<int>".
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub jmax: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub gnuplot: Option<bool>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    /// unnorm | tau | area.
    #[arg(long)]
    pub mode: Option<String>,
    /// circle | file:<path> | perturb:<m>,<eps> | slow:<k>,<eps>.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub entropy: Option<bool>,
    #[arg(long)]
    pub outdir: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "sample-every")]
    pub sample_every: Option<usize>,
    #[arg(long = "sample-interval")]
    pub sample_interval: Option<f64>,
    #[arg(long = "snapshot-every")]
    pub snapshot_every: Option<usize>,
    #[arg(long = "stop-min-radius")]
    pub stop_min_radius: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long = "max-steps")]
    pub max_steps: Option<usize>,
    /// Rescale the initial body so its extinction time matches the
    /// normalization (default on for full-form tau runs).
    #[arg(long)]
    pub anchor: Option<bool>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub gnuplot: Option<bool>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModesArgs {
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub mmax: Option<usize>,
    /// Start of the window for the measured rho ratio (default 10/lambda_2k,
    /// or mid-trace for short traces).
    #[arg(long = "window-start")]
    pub window_start: Option<f64>,
    #[arg(long = "window-end")]
    pub window_end: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub gnuplot: Option<bool>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyTableArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub gnuplot: Option<bool>,
}

fn load_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::BadConfig(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::BadConfig(format!("{}: {e}", p.display())))
        }
    }
}

macro_rules! merge_fields {
    ($flags:expr, $file:expr, $($f:ident),*) => {{
        let mut flags = $flags;
        let file = $file;
        $( flags.$f = flags.$f.or(file.$f); )*
        flags
    }};
}

impl ShrinkerArgs {
    fn merged(self) -> Result<Self> {
        let file: Self = load_config(self.config.as_deref())?;
        Ok(merge_fields!(self, file, alpha, k, n, out, gnuplot))
    }
}

impl SpectrumArgs {
    fn merged(self) -> Result<Self> {
        let file: Self = load_config(self.config.as_deref())?;
        Ok(merge_fields!(self, file, alpha, profile, jmax, n, out, gnuplot))
    }
}

impl FlowArgs {
    fn merged(self) -> Result<Self> {
        let file: Self = load_config(self.config.as_deref())?;
        Ok(merge_fields!(
            self,
            file,
            alpha,
            mode,
            init,
            t_end,
            entropy,
            outdir,
            n,
            dt,
            sample_every,
            sample_interval,
            snapshot_every,
            stop_min_radius,
            rtol,
            max_steps,
            anchor,
            gnuplot
        ))
    }
}

impl ModesArgs {
    fn merged(self) -> Result<Self> {
        let file: Self = load_config(self.config.as_deref())?;
        Ok(merge_fields!(self, file, trace, k, mmax, window_start, window_end, gnuplot))
    }
}

impl EntropyTableArgs {
    fn merged(self) -> Result<Self> {
        let file: Self = load_config(self.config.as_deref())?;
        Ok(merge_fields!(self, file, alpha, out, gnuplot))
    }
}

fn required<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::BadConfig(format!("--{name} is required")))
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::OutOfRange(_) | Error::AlphaMismatch { .. } => 2,
        Error::BadConfig(_) | Error::Io(_) | Error::Parse(_) | Error::BadGrid(_) | Error::BadDomain(_) => 4,
        _ => 3,
    }
}

fn write_gnuplot(dir: &Path, script: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("plot.gp"), script)?;
    Ok(())
}

/// Assemble a profile, refining the grid (in multiples of `2k`) until the
/// residual bound holds.
pub fn profile_with_refinement(alpha: f64, kind: ProfileKind, n: Option<usize>) -> Result<ShrinkerProfile> {
    match kind {
        ProfileKind::Circle => shrinker::assemble_profile(alpha, kind, n.unwrap_or(512)),
        ProfileKind::KFold(k) => {
            let step = 2 * k;
            let mut n = n.unwrap_or(512).div_ceil(step) * step;
            loop {
                match shrinker::assemble_profile(alpha, kind, n) {
                    Err(Error::BadGrid(_)) if n < 4096 => n = (2 * n).div_ceil(step) * step,
                    other => return other,
                }
            }
        }
    }
}

pub fn cmd_shrinker(args: ShrinkerArgs) -> Result<Value> {
    let args = args.merged()?;
    let alpha = required(args.alpha, "alpha")?;
    let kind: ProfileKind = required(args.k, "k")?.parse().map_err(|e: Error| Error::BadConfig(e.to_string()))?;
    let profile = profile_with_refinement(alpha, kind, args.n)?;
    let record = io::ProfileRecord::from(&profile);
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        io::write_json(&dir.join("profile.json"), &record)?;
        if let ProfileKind::KFold(k) = kind {
            let seg = shrinker::segment_for_k(alpha, k)?;
            fs::write(dir.join("segment.csv"), io::segment_csv(&seg, 201))?;
        }
        if args.gnuplot == Some(true) {
            write_gnuplot(
                dir,
                "set datafile separator ','\nset xlabel 'theta'\nplot 'segment.csv' using 1:2 with lines title 'U', '' using 1:3 with lines title 'U_theta'\n",
            )?;
        }
    }
    Ok(json!({
        "alpha": alpha,
        "k": record.k,
        "r": profile.r,
        "theta": profile.theta_span,
        "entropy": profile.entropy,
        "n": profile.h.len(),
        "residual": profile.residual,
    }))
}

pub fn cmd_spectrum(args: SpectrumArgs) -> Result<Value> {
    let args = args.merged()?;
    let alpha = required(args.alpha, "alpha")?;
    let kind: ProfileKind = required(args.profile, "profile")?
        .parse()
        .map_err(|e: Error| Error::BadConfig(e.to_string()))?;
    let jmax = args.jmax.unwrap_or(40);
    let h = match kind {
        ProfileKind::Circle => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::OutOfRange(format!("alpha = {alpha} must lie in (0, 1)")));
            }
            SupportFunction::circle(&AngularGrid::new(args.n.unwrap_or(256))?, 1.0)
        }
        ProfileKind::KFold(_) => profile_with_refinement(alpha, kind, args.n)?.h,
    };
    let d = spectral::decompose(&h, alpha, Some(jmax))?;
    let record = io::SpectrumRecord::new(kind, &d);
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        io::write_json(&dir.join("spectrum.json"), &record)?;
        if args.gnuplot == Some(true) {
            write_gnuplot(dir, "# eigenvalues are listed in spectrum.json\n")?;
        }
    }
    Ok(serde_json::to_value(&record)?)
}

enum Init {
    Circle,
    File(PathBuf),
    Perturb(usize, f64),
    Slow(usize, f64),
}

fn parse_init(s: &str) -> Result<Init> {
    let bad = || Error::BadConfig(format!("cannot parse --init '{s}'"));
    let pair = |rest: &str| -> Result<(usize, f64)> {
        let (m, e) = rest.split_once(',').ok_or_else(bad)?;
        Ok((m.trim().parse().map_err(|_| bad())?, e.trim().parse().map_err(|_| bad())?))
    };
    if s == "circle" {
        Ok(Init::Circle)
    } else if let Some(p) = s.strip_prefix("file:") {
        Ok(Init::File(PathBuf::from(p)))
    } else if let Some(rest) = s.strip_prefix("perturb:") {
        let (m, e) = pair(rest)?;
        Ok(Init::Perturb(m, e))
    } else if let Some(rest) = s.strip_prefix("slow:") {
        let (k, e) = pair(rest)?;
        Ok(Init::Slow(k, e))
    } else {
        Err(bad())
    }
}

fn parse_mode(s: &str) -> Result<FlowMode> {
    match s {
        "unnorm" => Ok(FlowMode::Unnormalized),
        "tau" => Ok(FlowMode::NormalizedTau),
        "area" => Ok(FlowMode::NormalizedArea),
        other => other.parse().map_err(|e: Error| Error::BadConfig(e.to_string())),
    }
}

pub fn cmd_flow(args: FlowArgs) -> Result<Value> {
    let args = args.merged()?;
    let alpha = required(args.alpha, "alpha")?;
    let mode = parse_mode(&required(args.mode.clone(), "mode")?)?;
    let init_spec = args.init.clone().unwrap_or_else(|| "circle".into());
    let init = parse_init(&init_spec)?;
    let t_end = required(args.t_end, "t-end")?;
    let n = args.n.unwrap_or(256);
    let grid = AngularGrid::new(n).map_err(|e| Error::BadConfig(e.to_string()))?;

    let mut cfg = match init {
        Init::Slow(k, eps) => {
            if mode != FlowMode::NormalizedTau {
                return Err(Error::BadConfig("slow: initial data needs --mode tau".into()));
            }
            if (alpha - modes::critical_alpha(k)).abs() > 1e-14 {
                return Err(Error::AlphaMismatch { alpha, k });
            }
            let v0 = modes::slow_manifold_perturbation(&grid, k, eps, 0.0, false)?;
            let mut cfg = FlowConfig::perturbation(alpha, SupportFunction::circle(&grid, 1.0), v0, t_end);
            cfg.sample_interval = Some(0.01);
            cfg.snapshot_every = 1;
            cfg.stop_min_radius = 0.0;
            cfg.dt = 1e-3;
            cfg
        }
        other => {
            let u0 = match other {
                Init::Circle => SupportFunction::circle(&grid, 1.0),
                Init::File(p) => io::read_support(&p).map_err(|e| Error::BadConfig(format!("{}: {e}", p.display())))?,
                Init::Perturb(m, eps) => {
                    SupportFunction::from_fn(&grid, |t| 1.0 + eps * (m as f64 * t).cos()).map_err(|e| Error::BadConfig(e.to_string()))?
                }
                Init::Slow(..) => unreachable!(),
            };
            let anchor = args.anchor.unwrap_or(mode == FlowMode::NormalizedTau);
            let u0 = if anchor && mode == FlowMode::NormalizedTau {
                flow::anchor_to_extinction(&u0, alpha)?
            } else {
                u0
            };
            let mut cfg = FlowConfig::new(alpha, mode, u0, t_end);
            if mode != FlowMode::Unnormalized {
                cfg.sample_interval = Some(0.01);
            }
            cfg.snapshot_every = if mode == FlowMode::Unnormalized { 1000 } else { 1 };
            cfg
        }
    };
    if let Some(v) = args.dt {
        cfg.dt = v;
    }
    if let Some(v) = args.sample_every {
        cfg.sample_every = v;
    }
    if let Some(v) = args.sample_interval {
        cfg.sample_interval = Some(v);
    }
    if let Some(v) = args.snapshot_every {
        cfg.snapshot_every = v;
    }
    if let Some(v) = args.stop_min_radius {
        cfg.stop_min_radius = v;
    }
    if let Some(v) = args.rtol {
        cfg.rtol = v;
    }
    if let Some(v) = args.max_steps {
        cfg.max_steps = v;
    }
    cfg.log_entropy = args.entropy.unwrap_or(false);

    let trace = flow::run(&cfg)?;
    let last = trace.last().clone();
    let mut out = json!({
        "alpha": alpha,
        "mode": mode.to_string(),
        "init": init_spec,
        "terminal_reason": trace.terminal_reason.to_string(),
        "time": last.time,
        "area": last.area,
        "length": last.length,
        "iso_ratio": last.iso_ratio,
        "min_curv": last.min_curv,
        "max_curv": last.max_curv,
        "entropy": last.entropy,
        "rows": trace.rows.len(),
        "under_resolved": trace.under_resolved,
    });
    if cfg.log_entropy {
        out["max_entropy_increase"] = json!(flow::entropy_monotonicity_check(&trace));
    }
    if mode == FlowMode::Unnormalized && trace.terminal_reason == TerminalReason::MinRadius {
        if let Ok(fit) = flow::area_law_fit(&trace) {
            out["area_law"] = serde_json::to_value(fit)?;
        }
        out["type_verdict"] = serde_json::to_value(flow::type_diagnostic(&trace).verdict)?;
    }
    if let Some(dir) = &args.outdir {
        let snapshots = io::write_trace(dir, &trace)?;
        io::write_json(
            &dir.join("meta.json"),
            &json!({
                "alpha": alpha,
                "mode": mode.to_string(),
                "init": out["init"],
                "n": n,
                "t_end": t_end,
                "rtol": cfg.rtol,
                "terminal_reason": trace.terminal_reason.to_string(),
                "accepted_steps": trace.accepted_steps,
                "rejected_steps": trace.rejected_steps,
                "under_resolved": trace.under_resolved,
                "snapshots": snapshots,
                "version": env!("CARGO_PKG_VERSION"),
            }),
        )?;
        if args.gnuplot == Some(true) {
            write_gnuplot(
                dir,
                "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'time'\nplot 'trace.csv' using 1:2 with lines, '' using 1:4 with lines\n",
            )?;
        }
    }
    Ok(out)
}

/// Rebuild a snapshot-only trace from a flow output directory.
pub fn load_trace_dir(dir: &Path) -> Result<FlowTrace> {
    if !dir.is_dir() {
        return Err(Error::BadConfig(format!("trace directory {} not found", dir.display())));
    }
    let meta: Value = io::read_json(&dir.join("meta.json")).map_err(|e| Error::BadConfig(format!("meta.json: {e}")))?;
    let alpha = meta["alpha"]
        .as_f64()
        .ok_or_else(|| Error::BadConfig("meta.json lacks alpha".into()))?;
    let snaps = io::read_snapshots(dir).map_err(|e| Error::BadConfig(e.to_string()))?;
    let n = snaps
        .first()
        .map(|s| s.n)
        .ok_or_else(|| Error::BadConfig("no snapshots in trace directory".into()))?;
    let rows = snaps
        .into_iter()
        .map(|s| FlowRow {
            time: s.time,
            area: f64::NAN,
            length: f64::NAN,
            iso_ratio: f64::NAN,
            min_curv: f64::NAN,
            max_curv: f64::NAN,
            entropy: None,
            snapshot: Some(s.values),
            perturbation: s.perturbation,
        })
        .collect();
    Ok(FlowTrace {
        alpha,
        mode: FlowMode::NormalizedTau,
        grid_n: n,
        rows,
        terminal_reason: TerminalReason::ReachedEnd,
        under_resolved: false,
        accepted_steps: 0,
        rejected_steps: 0,
    })
}

pub fn cmd_modes(args: ModesArgs) -> Result<Value> {
    let args = args.merged()?;
    let dir = required(args.trace, "trace")?;
    let k = required(args.k, "k")?;
    let trace = load_trace_dir(&dir)?;
    let mt = modes::track_modes(&trace, k, args.mmax.unwrap_or(8))?;
    let c = modes::cstar(k)?;
    let lambda = modes::circle_lambda(mt.alpha, 2 * k);
    let end = mt.rows.last().map(|r| r.tau).unwrap_or(0.0);
    let first = mt.rows.first().map(|r| r.tau).unwrap_or(0.0);
    let window = (
        args.window_start.unwrap_or((10.0 / lambda).min(0.5 * (first + end))),
        args.window_end.unwrap_or(end),
    );
    let measured = modes::measure_cstar(&mt, window)?;
    let linear = modes::residual_linear_modes(&mt, Some(window))?;
    let neutral = modes::residual_neutral_modes(&mt, Some(window))?;
    fs::write(dir.join("modes.csv"), io::modes_csv(&mt))?;
    io::write_json(&dir.join("residuals.json"), &json!({ "linear": linear, "neutral": neutral }))?;
    if args.gnuplot == Some(true) {
        write_gnuplot(
            &dir,
            "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'tau'\nset logscale y\nplot 'modes.csv' using 1:(column('rho')) with lines\n",
        )?;
    }
    let summary = |r: &modes::ResidualReport| -> Value {
        r.entries
            .iter()
            .map(|e| (e.name.clone(), json!(e.max_abs)))
            .collect::<serde_json::Map<String, Value>>()
            .into()
    };
    Ok(json!({
        "k": k,
        "alpha": mt.alpha,
        "cstar": c,
        "measured": measured.value,
        "relative_error": (measured.value - c).abs() / c.abs(),
        "window": [measured.window.0, measured.window.1],
        "samples": measured.samples,
        "residuals_linear": summary(&linear),
        "residuals_neutral": summary(&neutral),
    }))
}

pub fn cmd_entropy_table(args: EntropyTableArgs) -> Result<Value> {
    let args = args.merged()?;
    let alpha = required(args.alpha, "alpha")?;
    let table = shrinker::entropy_ordering(alpha)?;
    let rows: Vec<Value> = table
        .iter()
        .map(|(kind, e)| {
            json!({
                "profile": kind.to_string(),
                "k": match kind { ProfileKind::Circle => 0, ProfileKind::KFold(k) => *k },
                "entropy": e,
            })
        })
        .collect();
    let out = json!({ "alpha": alpha, "rows": rows });
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let mut csv = String::from("profile,k,entropy\n");
        for (kind, e) in &table {
            let k = match kind {
                ProfileKind::Circle => 0,
                ProfileKind::KFold(k) => *k,
            };
            csv.push_str(&format!("{kind},{k},{}\n", io::fmt12(*e)));
        }
        fs::write(dir.join("entropy_table.csv"), csv)?;
        io::write_json(&dir.join("entropy_table.json"), &out)?;
        if args.gnuplot == Some(true) {
            write_gnuplot(dir, "set datafile separator ','\nplot 'entropy_table.csv' using 2:3 with points\n")?;
        }
    }
    Ok(out)
}

pub fn execute(cli: Cli) -> Result<Value> {
    match cli.command {
        Command::Shrinker(a) => cmd_shrinker(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Flow(a) => cmd_flow(a),
        Command::Modes(a) => cmd_modes(a),
        Command::EntropyTable(a) => cmd_entropy_table(a),
    }
}

/// Parse arguments, run, print; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(v) => {
            println!("{v}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
