//! File formats. CSV numbers use 15 significant digits in scientific form
//! and LF line endings; JSON uses serde_json's shortest round-trip floats.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wavefront::pde::Field;
use wavefront::threshold::ThresholdReport;
use wavefront::verify::CheckEntry;
use wavefront::{FrontClassification, FrontKind, Profile, ProfileSample, Tau};

use crate::{LabError, Result};

pub const PROFILE_HEADER: [&str; 6] = ["xi", "eta", "eta_prime", "beta", "beta_prime", "flux"];

pub fn num(v: f64) -> String {
    format!("{v:.14e}")
}

/// `prefix` with `ext` appended (not substituted, so `run.1` stays intact).
pub fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| LabError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

pub fn write_profile_csv(path: &Path, samples: &[ProfileSample]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(PROFILE_HEADER)?;
    for s in samples {
        w.write_record([s.xi, s.eta, s.eta_prime, s.beta, s.beta_prime, s.flux].map(num))?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

pub fn read_profile_csv(path: &Path) -> Result<Vec<ProfileSample>> {
    let file = File::open(path).map_err(|e| LabError::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != PROFILE_HEADER {
        return Err(LabError::Config(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut v = [0.0; 6];
        for (slot, field) in v.iter_mut().zip(rec.iter()) {
            *slot = field
                .trim()
                .parse()
                .map_err(|_| LabError::Config(format!("{}: bad number {field:?}", path.display())))?;
        }
        let [xi, eta, eta_prime, beta, beta_prime, flux] = v;
        out.push(ProfileSample {
            xi,
            eta,
            eta_prime,
            beta,
            beta_prime,
            flux,
        });
    }
    Ok(out)
}

/// Metadata written next to a profile CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSidecar {
    #[serde(rename = "D")]
    pub d: f64,
    pub c: f64,
    pub classification: FrontKind,
    pub limit_slope: f64,
    pub limit_flux: f64,
    /// `null` for an infinite τ.
    pub tau: Option<f64>,
    pub eta_tau: f64,
    pub eta_infinity: Option<f64>,
    pub speed_integral: Option<f64>,
    pub checks: Vec<CheckEntry>,
    /// `null` when verification could not run; see `verify_error`.
    pub checks_passed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verify_error: Option<String>,
}

impl ProfileSidecar {
    /// Rebuilds a profile from the sidecar and its samples.
    pub fn to_profile(&self, samples: Vec<ProfileSample>) -> Result<Profile> {
        if samples.is_empty() {
            return Err(LabError::Config("profile has no samples".into()));
        }
        Ok(Profile {
            d: self.d,
            c: self.c,
            samples,
            tau: self.tau.map_or(Tau::Infinite, Tau::Finite),
            classification: FrontClassification {
                kind: self.classification,
                limit_slope: self.limit_slope,
                limit_flux: self.limit_flux,
            },
            eta_infinity: self.eta_infinity,
        })
    }
}

/// JSON printed by `threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdJson {
    #[serde(rename = "D")]
    pub d: f64,
    pub c_lo: f64,
    pub c_hi: f64,
    pub sigma_star: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub width: f64,
    pub iterations: usize,
    /// `true` when c_lo is the analytic bound itself rather than a failed probe.
    pub lower_is_bound: bool,
    pub ordering_ok: bool,
}

/// Slack on each `≤` of the ordering, relative to the larger side.
pub const ORDERING_SLACK: f64 = 1e-9;

impl ThresholdJson {
    pub fn from_report(r: &ThresholdReport) -> Self {
        let lower_is_bound = matches!(r.bracket.witness_lo, wavefront::model::EndpointSource::AnalyticBound);
        let le = |a: f64, b: f64| a <= b + ORDERING_SLACK * (1.0 + b.abs());
        let lower_ok = if lower_is_bound {
            r.bracket.c_lo >= r.lower_bound
        } else {
            r.bracket.c_lo > r.lower_bound
        };
        let ordering_ok = lower_ok
            && le(r.bracket.c_lo, r.bracket.c_hi)
            && le(r.bracket.c_hi, r.sigma_star)
            && le(r.sigma_star, r.upper_bound);
        Self {
            d: r.d,
            c_lo: r.bracket.c_lo,
            c_hi: r.bracket.c_hi,
            sigma_star: r.sigma_star,
            lower_bound: r.lower_bound,
            upper_bound: r.upper_bound,
            width: r.bracket.width(),
            iterations: r.bracket.iterations,
            lower_is_bound,
            ordering_ok,
        }
    }
}

pub const SWEEP_HEADER: [&str; 7] = [
    "D",
    "c_lo",
    "c_hi",
    "sigma_star",
    "lower_bound",
    "upper_bound",
    "status",
];

pub struct SweepRow {
    pub d: f64,
    pub result: std::result::Result<ThresholdJson, String>,
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for row in rows {
        let rec: Vec<String> = match &row.result {
            Ok(t) => {
                let status = if t.ordering_ok { "ok" } else { "ordering_violated" };
                let mut v: Vec<String> = [t.d, t.c_lo, t.c_hi, t.sigma_star, t.lower_bound, t.upper_bound]
                    .map(num)
                    .to_vec();
                v.push(status.into());
                v
            }
            Err(msg) => {
                let mut v = vec![num(row.d)];
                v.extend(std::iter::repeat_n(String::new(), 5));
                v.push(format!("error: {msg}"));
                v
            }
        };
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| LabError::io("sweep output", e))
}

/// Snapshots as long-format rows `t,x,n,b`.
pub fn write_frames_csv(path: &Path, frames: &[Field]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "x", "n", "b"])?;
    for f in frames {
        for i in 0..f.len() {
            w.write_record([f.time, f.x(i), f.n[i], f.b[i]].map(num))?;
        }
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

pub fn write_front_csv(path: &Path, positions: &[(f64, f64)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "x"])?;
    for &(t, x) in positions {
        w.write_record([t, x].map(num))?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| LabError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| LabError::io(path, e))?;
    w.flush().map_err(|e| LabError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
