use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use wavefront::pde::{compare_with_profile as pde_gap, run_to_front_with, PdeOptions};
use wavefront::phase::{integrate_z_with, PhaseOptions};
use wavefront::profile::{extend_beyond_tau, integrate_profile_with, ProfileOptions};
use wavefront::semiwave::{compare_with_profile as semi_gap, default_eta0, iterate_t, IterateOptions};
use wavefront::threshold::{find_sigma_star, solve_w, threshold_report, GSpec, WOutcome};
use wavefront::verify::{speed_integral, verify_profile, CheckReport};
use wavefront::{FrontKind, Params, Profile, Tau, ToleranceSet};

use crate::cli::{AuxArgs, Cli, Command, Format, PdeArgs, RunConfig, SweepArgs, VerifyArgs};
use crate::output::{self, with_ext, ProfileSidecar, SweepRow, ThresholdJson};
use crate::plot::{line_plot, Series};
use crate::{exit, LabError, Result};

pub const DEFAULT_THRESHOLD_TOL: f64 = 1e-3;
/// Sharp fronts are continued past τ by this many decay lengths `1/c`.
const SHARP_EXTENSION: f64 = 25.0;

pub fn run(cli: Cli) -> i32 {
    let res = match cli.command {
        Command::Profile(cfg) => cmd_profile(&cfg),
        Command::Threshold(cfg) => cmd_threshold(&cfg),
        Command::Aux(a) => cmd_aux(&a),
        Command::Semiwave(cfg) => cmd_semiwave(&cfg),
        Command::Pde(a) => cmd_pde(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn require(v: Option<f64>, name: &str) -> Result<f64> {
    v.ok_or_else(|| LabError::Config(format!("missing --{name}")))
}

fn params(cfg: &RunConfig) -> Result<Params> {
    let d = require(cfg.d, "D")?;
    let c = require(cfg.c, "c")?;
    let mut tol = ToleranceSet::default();
    if let Some(t) = cfg.tol {
        tol.rtol = t;
    }
    Ok(Params::with_tol(d, c, tol)?)
}

fn prefix(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(name))
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| LabError::io("stdout", e))
}

/// Integrates a profile and continues sharp fronts past τ.
pub fn compute_profile(p: &Params, cfg: &RunConfig) -> Result<Profile> {
    let mut opts = ProfileOptions {
        xi_max: cfg.xi_max,
        ..ProfileOptions::default()
    };
    if let Some(e) = cfg.eta0 {
        opts.eta0 = e;
    }
    let prof = integrate_profile_with(p, &opts)?;
    match (prof.classification.kind, prof.tau) {
        (FrontKind::Sharp, Tau::Finite(t)) => Ok(extend_beyond_tau(&prof, p, t + SHARP_EXTENSION / p.c)?),
        _ => Ok(prof),
    }
}

/// Sidecar for a profile; verification problems are recorded, not raised.
pub fn sidecar(profile: &Profile, p: &Params) -> ProfileSidecar {
    let (checks, checks_passed, verify_error) = match verify_profile(profile, p) {
        Ok(r) => (r.entries, Some(r.overall), None),
        Err(e) => (Vec::new(), None, Some(e.to_string())),
    };
    let cl = profile.classification;
    ProfileSidecar {
        d: profile.d,
        c: profile.c,
        classification: cl.kind,
        limit_slope: cl.limit_slope,
        limit_flux: cl.limit_flux,
        tau: profile.tau.finite(),
        eta_tau: profile.eta_tau(),
        eta_infinity: profile.eta_infinity,
        speed_integral: speed_integral(profile).ok(),
        checks,
        checks_passed,
        verify_error,
    }
}

fn cmd_profile(cfg: &RunConfig) -> Result<i32> {
    let p = params(cfg)?;
    let profile = compute_profile(&p, cfg)?;
    let meta = sidecar(&profile, &p);
    let pre = prefix(cfg, "profile");
    match cfg.format {
        Format::Csv => output::write_profile_csv(&with_ext(&pre, "csv"), &profile.samples)?,
        Format::Json => output::write_json(&with_ext(&pre, "samples.json"), &profile.samples)?,
    }
    output::write_json(&with_ext(&pre, "json"), &meta)?;
    if cfg.plot {
        plot_profile(&pre, &profile, &p)?;
    }
    print_json(&meta)?;
    Ok(if profile.classification.kind.is_front() {
        exit::OK
    } else {
        exit::FAILED_CONNECTION
    })
}

fn plot_profile(pre: &Path, profile: &Profile, p: &Params) -> Result<()> {
    let pts = |f: fn(&wavefront::ProfileSample) -> f64| profile.samples.iter().map(|s| (s.xi, f(s))).collect();
    let title = format!("D = {}, c = {} ({})", p.d, p.c, profile.classification.kind.as_str());
    line_plot(
        &with_ext(pre, "profile.svg"),
        &title,
        "xi",
        "value",
        &[
            Series {
                label: "eta",
                points: pts(|s| s.eta),
                markers: false,
            },
            Series {
                label: "beta",
                points: pts(|s| s.beta),
                markers: false,
            },
        ],
    )?;
    let path = integrate_z_with(p, &PhaseOptions::default())?;
    line_plot(
        &with_ext(pre, "phase.svg"),
        &format!("z(beta), D = {}, c = {}", p.d, p.c),
        "beta",
        "z",
        &[Series {
            label: "z",
            points: path.samples.iter().map(|s| (s.beta, s.z)).collect(),
            markers: false,
        }],
    )
}

fn threshold_json(d: f64, tol: f64) -> Result<ThresholdJson> {
    Ok(ThresholdJson::from_report(&threshold_report(d, tol)?))
}

fn cmd_threshold(cfg: &RunConfig) -> Result<i32> {
    let d = require(cfg.d, "D")?;
    let t = threshold_json(d, cfg.tol.unwrap_or(DEFAULT_THRESHOLD_TOL))?;
    print_json(&t)?;
    if let Some(out) = &cfg.out {
        output::write_json(&with_ext(out, "json"), &t)?;
    }
    if !t.ordering_ok {
        eprintln!("error: ordering lower_bound < c_lo <= c_hi <= sigma_star <= upper_bound violated");
        return Ok(exit::BISECTION);
    }
    Ok(exit::OK)
}

#[derive(serde::Serialize)]
struct AuxJson {
    #[serde(rename = "D")]
    d: f64,
    sigma: f64,
    sigma_star: Option<f64>,
    exists: bool,
    slope_at_zero: Option<f64>,
    w_at_zero: f64,
    residual: Option<f64>,
}

fn cmd_aux(a: &AuxArgs) -> Result<i32> {
    let d = require(a.run.d, "D")?;
    let gspec = GSpec::new(d)?;
    let (sigma, sigma_star) = match a.sigma {
        Some(s) => (s, None),
        None => {
            let s = find_sigma_star(&gspec, a.run.tol.unwrap_or(DEFAULT_THRESHOLD_TOL))?.value;
            (s, Some(s))
        }
    };
    let outcome = solve_w(sigma, &gspec)?;
    let json = match &outcome {
        WOutcome::Solution(s) => AuxJson {
            d,
            sigma,
            sigma_star,
            exists: true,
            slope_at_zero: Some(s.slope_at_zero),
            w_at_zero: s.w_at_zero,
            residual: Some(s.residual()),
        },
        WOutcome::NoSolution { w_at_zero, .. } => AuxJson {
            d,
            sigma,
            sigma_star,
            exists: false,
            slope_at_zero: None,
            w_at_zero: *w_at_zero,
            residual: None,
        },
    };
    if let (Some(out), WOutcome::Solution(s)) = (&a.run.out, &outcome) {
        let pts: Vec<(f64, f64)> = s.samples.iter().map(|x| (x.beta, x.w)).collect();
        let path = with_ext(out, "csv");
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)?;
        w.write_record(["beta", "w"])?;
        for (b, v) in &pts {
            w.write_record([output::num(*b), output::num(*v)])?;
        }
        w.flush().map_err(|e| LabError::io(&path, e))?;
        if a.run.plot {
            line_plot(
                &with_ext(out, "svg"),
                &format!("w(beta), D = {d}, sigma = {sigma}"),
                "beta",
                "w",
                &[Series {
                    label: "w",
                    points: pts,
                    markers: false,
                }],
            )?;
        }
    }
    print_json(&json)?;
    Ok(exit::OK)
}

#[derive(serde::Serialize)]
struct SemiJson {
    #[serde(rename = "D")]
    d: f64,
    c: f64,
    eta0: f64,
    iterations: usize,
    final_change: f64,
    alpha: f64,
    forward_y0: f64,
    gap_eta: f64,
    gap_beta: f64,
}

fn cmd_semiwave(cfg: &RunConfig) -> Result<i32> {
    let p = params(cfg)?;
    let eta0 = match cfg.eta0 {
        Some(e) => e,
        None => default_eta0(p.c)?,
    };
    let sw = iterate_t(&p, eta0, &IterateOptions::default())?;
    let prof = compute_profile(
        &p,
        &RunConfig {
            eta0: None,
            ..cfg.clone()
        },
    )?;
    let (gap_eta, gap_beta) = semi_gap(&sw, &prof)?;
    let json = SemiJson {
        d: p.d,
        c: p.c,
        eta0,
        iterations: sw.iterations,
        final_change: sw.history.last().copied().unwrap_or(f64::NAN),
        alpha: sw.alpha,
        forward_y0: sw.forward_y0,
        gap_eta,
        gap_beta,
    };
    let pre = prefix(cfg, "semiwave");
    output::write_profile_csv(&with_ext(&pre, "csv"), &sw.samples)?;
    if cfg.plot {
        let xs = sw.xi_at_beta(0.5).unwrap_or(0.0);
        let xp = prof.xi_at_beta(0.5).unwrap_or(0.0);
        let lo = sw.samples.first().map_or(0.0, |s| s.xi);
        let ode: Vec<_> = prof
            .samples
            .iter()
            .filter(|s| s.xi - xp + xs >= lo && s.xi - xp + xs <= 0.0)
            .collect();
        line_plot(
            &with_ext(&pre, "svg"),
            &format!("semi-wavefront vs profile, D = {}, c = {}", p.d, p.c),
            "xi",
            "value",
            &[
                Series {
                    label: "beta (fixed point)",
                    points: sw.samples.iter().map(|s| (s.xi, s.beta)).collect(),
                    markers: false,
                },
                Series {
                    label: "beta (profile)",
                    points: ode.iter().map(|s| (s.xi - xp + xs, s.beta)).collect(),
                    markers: false,
                },
                Series {
                    label: "eta (fixed point)",
                    points: sw.samples.iter().map(|s| (s.xi, s.eta)).collect(),
                    markers: false,
                },
                Series {
                    label: "eta (profile)",
                    points: ode.iter().map(|s| (s.xi - xp + xs, s.eta)).collect(),
                    markers: false,
                },
            ],
        )?;
    }
    print_json(&json)?;
    Ok(exit::OK)
}

#[derive(serde::Serialize)]
struct PdeJson {
    #[serde(rename = "D")]
    d: f64,
    length: f64,
    t_max: f64,
    cells: usize,
    steps: usize,
    fitted_speed: f64,
    fit_residual: f64,
    mass_drift: f64,
    clip_events: usize,
    lower_bound: f64,
    upper_bound: f64,
    ode_classification: Option<FrontKind>,
    gap_beta: Option<f64>,
    gap_eta: Option<f64>,
}

fn cmd_pde(a: &PdeArgs) -> Result<i32> {
    let d = require(a.run.d, "D")?;
    // The PDE does not use c; any valid value satisfies the constructor.
    let p = Params::new(d, 1.0)?;
    let opts = PdeOptions {
        cells: a.cells,
        ..PdeOptions::default()
    };
    let run = run_to_front_with(&p, a.length, a.t_max, &opts)?;
    let speed = run.estimate.fitted_speed;
    let (mut kind, mut gap) = (None, None);
    if speed > 0.0 && speed.is_finite() {
        let pc = Params::new(d, speed)?;
        let mut prof = compute_profile(
            &pc,
            &RunConfig {
                eta0: None,
                ..a.run.clone()
            },
        )?;
        prof.normalize_half();
        kind = Some(prof.classification.kind);
        gap = pde_gap(run.last(), &prof, opts.level).ok();
    }
    let json = PdeJson {
        d,
        length: a.length,
        t_max: a.t_max,
        cells: a.cells,
        steps: run.steps,
        fitted_speed: speed,
        fit_residual: run.estimate.fit_residual,
        mass_drift: run.mass_drift(),
        clip_events: run.last().clip_events,
        lower_bound: wavefront::model::speed_lower_bound(d)?,
        upper_bound: wavefront::model::speed_upper_bound(d)?,
        ode_classification: kind,
        gap_beta: gap.map(|g| g.0),
        gap_eta: gap.map(|g| g.1),
    };
    let pre = prefix(&a.run, "pde");
    output::write_frames_csv(&with_ext(&pre, "frames.csv"), &run.history)?;
    output::write_front_csv(&with_ext(&pre, "front.csv"), &run.estimate.positions)?;
    output::write_json(&with_ext(&pre, "json"), &json)?;
    if a.run.plot {
        let series: Vec<Series> = run
            .history
            .iter()
            .step_by((run.history.len() / 4).max(1))
            .map(|f| Series {
                label: "b",
                points: (0..f.len()).step_by(4).map(|i| (f.x(i), f.b[i])).collect(),
                markers: false,
            })
            .collect();
        line_plot(&with_ext(&pre, "svg"), &format!("b(x, t), D = {d}"), "x", "b", &series)?;
    }
    print_json(&json)?;
    Ok(exit::OK)
}

fn print_report(r: &CheckReport) -> Result<i32> {
    print_json(r)?;
    Ok(if r.overall { exit::OK } else { exit::CHECKS_FAILED })
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    if let Some(input) = &a.input {
        let meta: ProfileSidecar = output::read_json(&with_ext(input, "json"))?;
        let samples = output::read_profile_csv(&with_ext(input, "csv"))?;
        let profile = meta.to_profile(samples)?;
        let p = Params::new(meta.d, meta.c)?;
        return print_report(&verify_profile(&profile, &p)?);
    }
    let p = params(&a.run)?;
    let profile = compute_profile(&p, &a.run)?;
    print_report(&verify_profile(&profile, &p)?)
}

/// Sorted, deduplicated D values, plus the duplicates that were dropped.
pub fn dedupe(ds: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut v = ds.to_vec();
    v.sort_by(f64::total_cmp);
    let mut dropped = Vec::new();
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for d in v {
        if out.last() == Some(&d) {
            dropped.push(d);
        } else {
            out.push(d);
        }
    }
    (out, dropped)
}

fn threads() -> Option<usize> {
    std::env::var("WAVEFRONT_LAB_THREADS")
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n: &usize| n > 0)
}

fn cmd_sweep(a: &SweepArgs) -> Result<i32> {
    if a.d.is_empty() {
        return Err(LabError::Config("sweep needs a non-empty --D list".into()));
    }
    let (ds, dropped) = dedupe(&a.d);
    if !dropped.is_empty() {
        eprintln!("warning: dropped repeated D values {dropped:?}");
    }
    let tol = a.tol.unwrap_or(DEFAULT_THRESHOLD_TOL);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    // `collect` keeps input order, so rows stay sorted by D.
    let rows: Vec<SweepRow> = pool.install(|| {
        ds.par_iter()
            .map(|&d| SweepRow {
                d,
                result: threshold_json(d, tol).map_err(|e| e.to_string()),
            })
            .collect()
    });
    match &a.out {
        Some(out) => {
            let path = with_ext(out, "csv");
            let f = std::fs::File::create(&path).map_err(|e| LabError::io(&path, e))?;
            output::write_sweep_csv(f, &rows)?;
        }
        None => output::write_sweep_csv(std::io::stdout().lock(), &rows)?,
    }
    if a.plot {
        let pre = a.out.clone().unwrap_or_else(|| PathBuf::from("sweep"));
        let ok: Vec<&ThresholdJson> = rows.iter().filter_map(|r| r.result.as_ref().ok()).collect();
        let pick = |f: fn(&ThresholdJson) -> f64| ok.iter().map(|t| (t.d, f(t))).collect();
        line_plot(
            &with_ext(&pre, "svg"),
            "threshold speed bracket",
            "D",
            "c",
            &[
                Series {
                    label: "c_lo",
                    points: pick(|t| t.c_lo),
                    markers: true,
                },
                Series {
                    label: "c_hi",
                    points: pick(|t| t.c_hi),
                    markers: true,
                },
                Series {
                    label: "lower bound",
                    points: pick(|t| t.lower_bound),
                    markers: false,
                },
                Series {
                    label: "sigma*",
                    points: pick(|t| t.sigma_star),
                    markers: false,
                },
            ],
        )?;
    }
    let any_ok = rows.iter().any(|r| r.result.is_ok());
    Ok(if any_ok { exit::OK } else { exit::ERROR })
}
