//! File formats: JSON records and CSV tables for profiles, spectra, flow
//! traces, snapshots and mode traces.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowRow, FlowTrace};
use crate::geometry::{AngularGrid, SupportFunction};
use crate::modes::ModeTrace;
use crate::shrinker::{ProfileKind, ShrinkerProfile, ShrinkerSegment};
use crate::spectral::SpectralDecomposition;

/// 12 significant digits.
pub fn fmt12(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        v.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub alpha: f64,
    /// 0 for the circle.
    pub k: usize,
    pub r: f64,
    pub theta: f64,
    pub entropy: f64,
    pub h: Vec<f64>,
}

impl From<&ShrinkerProfile> for ProfileRecord {
    fn from(p: &ShrinkerProfile) -> Self {
        Self {
            alpha: p.alpha,
            k: match p.kind {
                ProfileKind::Circle => 0,
                ProfileKind::KFold(k) => k,
            },
            r: p.r,
            theta: p.theta_span,
            entropy: p.entropy,
            h: p.h.values().to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub alpha: f64,
    pub profile: String,
    pub eigenvalues: Vec<f64>,
    pub morse_index: usize,
    pub kernel_dim: usize,
}

impl SpectrumRecord {
    pub fn new(kind: ProfileKind, d: &SpectralDecomposition) -> Self {
        Self {
            alpha: d.alpha,
            profile: kind.to_string(),
            eigenvalues: d.eigenvalues.clone(),
            morse_index: d.morse_index,
            kernel_dim: d.kernel_dim,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub n: usize,
    #[serde(default)]
    pub time: f64,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Vec<f64>>,
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = to_json_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// `theta,u` at full round-trip precision.
pub fn support_to_csv(u: &SupportFunction) -> String {
    let mut s = String::from("theta,u\n");
    for (i, v) in u.values().iter().enumerate() {
        let _ = writeln!(s, "{:e},{:e}", u.grid().theta(i), v);
    }
    s
}

/// Parse `theta,u` (header optional) or a single column of values.
pub fn support_from_csv(text: &str) -> Result<SupportFunction> {
    let mut values = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if values.is_empty() && line_no == 0 => continue,
            Err(_) => return Err(Error::Parse(format!("line {}: '{line}'", line_no + 1))),
        }
    }
    let grid = AngularGrid::new(values.len())?;
    SupportFunction::new(grid, values)
}

/// Load a support function from a CSV table or a snapshot JSON file.
pub fn read_support(path: &Path) -> Result<SupportFunction> {
    if path.extension().is_some_and(|e| e == "json") {
        let snap: Snapshot = read_json(path)?;
        let grid = AngularGrid::new(snap.n)?;
        SupportFunction::new(grid, snap.values)
    } else {
        support_from_csv(&fs::read_to_string(path)?)
    }
}

/// Dense arc export `theta,U,U_theta`.
pub fn segment_csv(seg: &ShrinkerSegment, count: usize) -> String {
    let mut s = String::from("theta,U,U_theta\n");
    for (t, u, ut) in seg.samples(count) {
        let _ = writeln!(s, "{},{},{}", fmt12(t), fmt12(u), fmt12(ut));
    }
    s
}

pub const TRACE_HEADER: &str = "time,area,length,iso_ratio,min_curv,max_curv,entropy";

fn trace_line(r: &FlowRow) -> String {
    let e = r.entropy.map(fmt12).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{}",
        fmt12(r.time),
        fmt12(r.area),
        fmt12(r.length),
        fmt12(r.iso_ratio),
        fmt12(r.min_curv),
        fmt12(r.max_curv),
        e
    )
}

pub fn trace_csv(trace: &FlowTrace) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in &trace.rows {
        s.push_str(&trace_line(r));
        s.push('\n');
    }
    s
}

/// `trace.csv` plus `snapshots/NNNN.json` for every row holding one.
pub fn write_trace(dir: &Path, trace: &FlowTrace) -> Result<usize> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trace.csv"), trace_csv(trace))?;
    let snaps = dir.join("snapshots");
    let _ = fs::remove_dir_all(&snaps);
    let mut count = 0;
    for row in &trace.rows {
        if let Some(values) = &row.snapshot {
            if count == 0 {
                fs::create_dir_all(&snaps)?;
            }
            let snap = Snapshot {
                n: values.len(),
                time: row.time,
                values: values.clone(),
                perturbation: row.perturbation.clone(),
            };
            fs::write(snaps.join(format!("{count:04}.json")), serde_json::to_string(&snap)? + "\n")?;
            count += 1;
        }
    }
    Ok(count)
}

/// Snapshots in file-name order.
pub fn read_snapshots(dir: &Path) -> Result<Vec<Snapshot>> {
    let snaps = dir.join("snapshots");
    let mut paths: Vec<_> = fs::read_dir(&snaps)
        .map_err(|e| Error::Io(format!("{}: {e}", snaps.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_json(p)).collect()
}

pub fn modes_csv(trace: &ModeTrace) -> String {
    let mut s = String::from("tau,A0");
    for m in 1..=trace.m_max {
        let _ = write!(s, ",A{m},B{m}");
    }
    s.push_str(",rho,Q\n");
    for r in &trace.rows {
        s.push_str(&fmt12(r.tau));
        s.push(',');
        s.push_str(&fmt12(r.a[0]));
        for m in 1..=trace.m_max {
            let _ = write!(s, ",{},{}", fmt12(r.a[m]), fmt12(r.b[m]));
        }
        let _ = writeln!(s, ",{},{}", fmt12(r.rho), fmt12(r.q));
    }
    s
}
