//! The auxiliary problem `ẇ = −σ − g(β)/w` on `(0, 2)` with `w(0) = w(2) = 0`,
//! its critical speed σ*, and the threshold speed c₀ by bisection over
//! phase-plane outcomes.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::model::{
    hermite, speed_lower_bound, speed_upper_bound, EndpointSource, FrontClassification, FrontKind, Params,
    SpeedBracket, ToleranceSet,
};
use crate::ode::{Solver, StepControl};
use crate::phase::{integrate_z_with, quadratic_at_zero, PathEnd, PhaseOptions, PhasePath};

/// The comparison nonlinearity: `K s²` on `[0,1]` and `K s(2−s)` on `(1,2]`
/// with `K = D e^D`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GSpec {
    pub d: f64,
}

impl GSpec {
    pub fn new(d: f64) -> Result<Self> {
        speed_upper_bound(d)?;
        Ok(Self { d })
    }

    /// `D e^D`.
    pub fn k(&self) -> f64 {
        self.d * self.d.exp()
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        g_eval(s, self.d)
    }
}

pub fn g_eval(s: f64, d: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&s) {
        return Err(WaveError::Domain(format!("g is defined on [0,2], got {s}")));
    }
    if !(d > 0.0) {
        return Err(WaveError::Domain(format!("D must be positive, got {d}")));
    }
    Ok(g_raw(s, d * d.exp()))
}

#[inline]
fn g_raw(s: f64, k: f64) -> f64 {
    if s <= 1.0 {
        k * s * s
    } else {
        k * s * (2.0 - s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxSample {
    pub beta: f64,
    pub w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxSolution {
    pub sigma: f64,
    pub d: f64,
    /// Ordered by decreasing β, from 2 down to the floor.
    pub samples: Vec<AuxSample>,
    /// Estimated `ẇ(0⁺)`.
    pub slope_at_zero: f64,
    /// Estimated `w(0⁺)`.
    pub w_at_zero: f64,
    /// Largest `|ẇ + σ + g/w|` found while solving.
    pub max_residual: f64,
}

impl AuxSolution {
    pub fn w_at(&self, beta: f64) -> Option<f64> {
        let first = self.samples.first()?;
        let last = self.samples.last()?;
        if beta > first.beta || beta < last.beta {
            return None;
        }
        let idx = self.samples.partition_point(|s| s.beta > beta);
        if idx == 0 {
            return Some(first.w);
        }
        let (a, b) = (&self.samples[idx - 1], &self.samples[idx]);
        let k = self.d * self.d.exp();
        let slope = |s: &AuxSample| {
            if s.w < 0.0 {
                -self.sigma - g_raw(s.beta, k) / s.w
            } else {
                -self.sigma
            }
        };
        Some(hermite(a.beta, a.w, slope(a), b.beta, b.w, slope(b), beta))
    }

    /// Largest `|ẇ + σ + g/w|`, with ẇ measured independently of the
    /// right-hand side: by differencing the dense output at the middle of every
    /// integration step, and analytically on the slaved tail.
    pub fn residual(&self) -> f64 {
        self.max_residual
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum WOutcome {
    Solution(AuxSolution),
    /// `w` arrives at β = 0 with a strictly negative value.
    NoSolution {
        sigma: f64,
        w_at_zero: f64,
        certified_at: Option<f64>,
    },
}

impl WOutcome {
    pub fn exists(&self) -> bool {
        matches!(self, WOutcome::Solution(_))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct WOptions {
    pub delta: f64,
    pub beta_floor: f64,
    pub early_exit: bool,
    pub tol: ToleranceSet<f64>,
}

impl Default for WOptions {
    fn default() -> Self {
        Self {
            delta: 1e-6,
            beta_floor: 1e-8,
            early_exit: false,
            tol: ToleranceSet::default(),
        }
    }
}

pub fn solve_w(sigma: f64, gspec: &GSpec) -> Result<WOutcome> {
    solve_w_with(sigma, gspec, &WOptions::default())
}

/// Shoots from β = 2 − δ with `w ≈ −a(2−β)`, where `a² + σa − 2K = 0` balances
/// `ẇ = a` against `−σ + 2K/a` at the degenerate end.
pub fn solve_w_with(sigma: f64, gspec: &GSpec, opts: &WOptions) -> Result<WOutcome> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(WaveError::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let k = gspec.k();
    let a = 0.5 * (-sigma + (sigma * sigma + 8.0 * k).sqrt());
    let beta0 = 2.0 - opts.delta;
    let w0 = -a * opts.delta;
    let mut f = |b: f64, y: &[f64; 1]| {
        if y[0] < 0.0 && b > 0.0 {
            Some([-sigma - g_raw(b, k) / y[0]])
        } else {
            None
        }
    };
    let ctrl = StepControl::new(opts.tol.rtol, f64::MIN_POSITIVE);
    let mut solver = Solver::new(&mut f, beta0, [w0], -opts.delta * 1e-3, ctrl)?;
    let mut samples = vec![AuxSample { beta: 2.0, w: 0.0 }, AuxSample { beta: beta0, w: w0 }];
    let mut last = beta0;
    let mut hist = [(beta0, w0); 3];
    let mut max_res: f64 = 0.0;
    let beta_cert = sigma * sigma / (8.0 * k);
    let beta_tail = 1e-6 * sigma * sigma / k;
    loop {
        // g has a corner at β = 1; no step straddles it.
        let bound = if solver.t > 1.0 { 1.0 } else { opts.beta_floor };
        let st = solver.step(&mut f, bound)?;
        let (b, w) = (st.t1, st.y1[0]);
        hist = [hist[1], hist[2], (b, w)];
        {
            let mid = 0.5 * (st.t0 + st.t1);
            let e = 0.25 * (st.t1 - st.t0);
            let cd = |e: f64| {
                let (tp, tm) = (mid + e, mid - e);
                (st.interp(tp)[0] - st.interp(tm)[0]) / (tp - tm)
            };
            let dw = (4.0 * cd(0.5 * e) - cd(e)) / 3.0;
            let wm = st.interp(mid)[0];
            if wm < 0.0 {
                let r = (dw + sigma + g_raw(mid, k) / wm).abs();
                max_res = max_res.max(r);
            }
        }
        if last - b >= 2e-3
            || (last / b).ln() >= 0.02
            || ((2.0 - b) / (2.0 - last)).ln() >= 0.02
            || b <= opts.beta_floor
        {
            samples.push(AuxSample { beta: b, w });
            last = b;
        }
        if b <= 1.0 && w <= -2.0 * sigma * b && opts.early_exit {
            return Ok(WOutcome::NoSolution {
                sigma,
                w_at_zero: w,
                certified_at: Some(b),
            });
        }
        let certified = b <= 1.0 && w >= -0.5 * sigma * b && b <= beta_cert;
        if certified && opts.early_exit {
            return Ok(WOutcome::Solution(AuxSolution {
                sigma,
                d: gspec.d,
                samples,
                slope_at_zero: 0.0,
                w_at_zero: 0.0,
                max_residual: max_res,
            }));
        }
        if certified && b <= beta_tail {
            // On the attracting branch w = −Kβ²/(σ + ẇ) with ẇ ≈ −2Kβ/σ.
            if samples.last().map(|s| s.beta > b).unwrap_or(true) {
                samples.push(AuxSample { beta: b, w });
            }
            let mut bb = b;
            let mut prev = (b, w / b);
            let mut cur = prev;
            while bb > opts.beta_floor {
                bb = (bb * 0.8).max(opts.beta_floor);
                let m = sigma - 2.0 * k * bb / sigma;
                let ws = -k * bb * bb / m;
                let dws = -2.0 * k * bb / m - k * bb * bb * (2.0 * k / sigma) / (m * m);
                max_res = max_res.max((dws + sigma + g_raw(bb, k) / ws).abs());
                samples.push(AuxSample { beta: bb, w: ws });
                prev = cur;
                cur = (bb, ws / bb);
            }
            let slope = cur.1 - cur.0 * (cur.1 - prev.1) / (cur.0 - prev.0);
            return Ok(WOutcome::Solution(AuxSolution {
                sigma,
                d: gspec.d,
                samples,
                slope_at_zero: slope,
                w_at_zero: 0.0,
                max_residual: max_res,
            }));
        }
        if b <= opts.beta_floor {
            let (w_zero, slope) = quadratic_at_zero(hist);
            if w_zero < -opts.tol.flux * sigma {
                return Ok(WOutcome::NoSolution {
                    sigma,
                    w_at_zero: w_zero,
                    certified_at: None,
                });
            }
            return Ok(WOutcome::Solution(AuxSolution {
                sigma,
                d: gspec.d,
                samples,
                slope_at_zero: slope,
                w_at_zero: w_zero,
                max_residual: max_res,
            }));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaStar {
    /// Smallest bisection point with a solution.
    pub value: f64,
    /// Largest bisection point without a solution.
    pub below: f64,
    pub iterations: usize,
    /// `ẇ(0⁺)` of the solution at `value`.
    pub slope_at_zero: f64,
}

/// Bisects on σ over `(0, 2√(D e^D)]` with solution existence as predicate.
/// The bracket is narrowed to `min(tol, 1e-12 σ)` so that the returned
/// solution still follows the `−σ` branch at the β floor.
pub fn find_sigma_star(gspec: &GSpec, tol: f64) -> Result<SigmaStar> {
    if !(tol > 0.0) {
        return Err(WaveError::Domain("tolerance must be positive".into()));
    }
    let ub = speed_upper_bound(gspec.d)?;
    let quick = WOptions {
        early_exit: true,
        ..WOptions::default()
    };
    let exists = |s: f64| -> Result<bool> { Ok(solve_w_with(s, gspec, &quick)?.exists()) };
    let mut hi = ub;
    if !exists(hi)? {
        return Err(WaveError::Bracket(format!(
            "no auxiliary solution at the upper bound sigma = {hi}"
        )));
    }
    let mut lo = 1e-6 * ub;
    if exists(lo)? {
        return Err(WaveError::Bracket(format!(
            "auxiliary solution already exists at sigma = {lo}"
        )));
    }
    let mut iterations = 0;
    while hi - lo > tol.min(1e-12 * hi) {
        let mid = if hi / lo > 2.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        if exists(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    let slope = match solve_w(hi, gspec)? {
        WOutcome::Solution(s) => s.slope_at_zero,
        WOutcome::NoSolution { .. } => {
            return Err(WaveError::Bracket(format!(
                "full solve at sigma = {hi} disagrees with the bisection predicate"
            )));
        }
    };
    if (slope + hi).abs() > 0.02 * hi {
        return Err(WaveError::Bracket(format!(
            "slope at zero {slope} at sigma* = {hi} is not close to -sigma*"
        )));
    }
    Ok(SigmaStar {
        value: hi,
        below: lo,
        iterations,
        slope_at_zero: slope,
    })
}

/// Everything the threshold search learns for one D.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub d: f64,
    pub bracket: SpeedBracket,
    pub sigma_star: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

fn front_class(path: &PhasePath) -> FrontClassification {
    let kind = match path.end {
        PathEnd::Z1 if path.slope_at_zero.abs() <= (path.slope_at_zero + path.c).abs() => FrontKind::Classical,
        PathEnd::Z1 => FrontKind::Sharp,
        PathEnd::Z2 | PathEnd::Z3 => FrontKind::FailedConnection,
    };
    FrontClassification {
        kind,
        limit_slope: path.slope_at_zero,
        limit_flux: path.limit_flux,
    }
}

/// Phase-plane predicate used by the bisection: a front leaves (1,0) and
/// reaches β = 0 with vanishing flux.
pub fn probe_speed(d: f64, c: f64, tol: &ToleranceSet<f64>) -> Result<FrontClassification> {
    let p = Params::with_tol(d, c, *tol)?;
    let opts = PhaseOptions {
        early_exit: true,
        ..PhaseOptions::default()
    };
    Ok(front_class(&integrate_z_with(&p, &opts)?))
}

pub fn find_c0(d: f64, tol: f64) -> Result<SpeedBracket> {
    Ok(threshold_report(d, tol)?.bracket)
}

/// Brackets c₀(D) to width `tol`.
///
/// The search starts from `max(tol/2, lower bound)` and σ*. Midpoints are
/// geometric while the bracket spans more than a factor of two; σ* itself is
/// only integrated when no probe below it produced a front. When even the
/// lowest probe yields a front, the bracket is `(lower bound, probe]` with the
/// analytic bound as lower witness.
pub fn threshold_report(d: f64, tol: f64) -> Result<ThresholdReport> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(WaveError::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let gspec = GSpec::new(d)?;
    let lower_bound = speed_lower_bound(d)?;
    let upper_bound = speed_upper_bound(d)?;
    let sigma_star = find_sigma_star(&gspec, tol)?.value;
    let ptol = ToleranceSet::default();
    let c_floor = (0.5 * tol).max(lower_bound);
    let mut iterations = 0;
    let floor_class = probe_speed(d, c_floor, &ptol)?;
    iterations += 1;
    if floor_class.kind.is_front() {
        if c_floor > lower_bound {
            return Ok(ThresholdReport {
                d,
                bracket: SpeedBracket {
                    c_lo: lower_bound,
                    c_hi: c_floor,
                    iterations,
                    witness_lo: EndpointSource::AnalyticBound,
                    witness_hi: EndpointSource::PhasePlane(floor_class),
                },
                sigma_star,
                lower_bound,
                upper_bound,
            });
        }
        return Err(WaveError::Bracket(format!(
            "a front exists at the analytic lower bound c = {c_floor}"
        )));
    }
    let (mut lo, mut hi) = (c_floor, sigma_star);
    let mut wlo = floor_class;
    let mut whi: Option<FrontClassification> = None;
    while hi - lo > tol {
        let mid = if hi / lo > 2.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        let class = probe_speed(d, mid, &ptol)?;
        iterations += 1;
        if class.kind.is_front() {
            hi = mid;
            whi = Some(class);
        } else {
            lo = mid;
            wlo = class;
        }
    }
    let witness_hi = match whi {
        Some(cl) => EndpointSource::PhasePlane(cl),
        None => {
            let cl = probe_speed(d, sigma_star, &ptol)?;
            iterations += 1;
            if !cl.kind.is_front() {
                return Err(WaveError::Bracket(format!(
                    "no front at sigma* = {sigma_star}; lower witness {wlo:?}, upper witness {cl:?}"
                )));
            }
            EndpointSource::SigmaStar
        }
    };
    Ok(ThresholdReport {
        d,
        bracket: SpeedBracket {
            c_lo: lo,
            c_hi: hi,
            iterations,
            witness_lo: EndpointSource::PhasePlane(wlo),
            witness_hi,
        },
        sigma_star,
        lower_bound,
        upper_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_values() {
        let e = std::f64::consts::E;
        assert!((g_eval(1.0, 1.0).unwrap() - e).abs() < 1e-15);
        assert_eq!(g_eval(2.0, 1.0).unwrap(), 0.0);
        let v = g_eval(1.5, 1.0).unwrap();
        assert!((v - 0.75 * e).abs() < 1e-15);
        assert!(v / 1.5 < e);
        assert!(g_eval(2.1, 1.0).is_err());
        assert!(g_eval(-0.1, 1.0).is_err());
    }

    #[test]
    fn g_is_continuous_at_one() {
        let k = 3.0;
        assert!((g_raw(1.0 - 1e-12, k) - g_raw(1.0 + 1e-12, k)).abs() < 1e-10);
    }

    #[test]
    fn solution_at_upper_bound() {
        let g = GSpec::new(1.0).unwrap();
        let ub = speed_upper_bound(1.0).unwrap();
        // Differencing the dense output costs about rtol·|w|/h, so the 1e-8
        // residual target needs a tighter solve than the default.
        let mut opts = WOptions::default();
        opts.tol.rtol = 1e-12;
        let out = solve_w_with(ub, &g, &opts).unwrap();
        let sol = match out {
            WOutcome::Solution(s) => s,
            other => panic!("expected a solution, got {other:?}"),
        };
        assert!(sol.samples.iter().all(|s| s.w <= 0.0));
        assert!(sol.residual() <= 1e-8, "residual {}", sol.residual());
        assert!(sol.slope_at_zero.abs() < 0.02 * ub);
    }

    #[test]
    fn no_solution_at_small_sigma() {
        let g = GSpec::new(1.0).unwrap();
        assert!(!solve_w(0.01, &g).unwrap().exists());
    }
}
