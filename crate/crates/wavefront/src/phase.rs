//! The front parameterized by β: `z(β) = D N β β'` with companions ξ, N = η
//! and V = η', integrated from β ≈ 1 down to β ≈ 0.
//!
//! Near β = 0 three endings are possible and are told apart by `z/β`:
//! classical (`z/β → 0`), sharp (`z/β → −c`) and a flux gap (`z(0) < 0`).
//! The z-equation repels `z` from 0 at interior β, so a failed shot shows up
//! as a negative limit of `z`, never as an early touch of 0.
//!
//! Two comparison lines decide the ending before β reaches the floor:
//! a path below `−2cβ` stays below it (flux gap), and a path above `−cβ/2`
//! with `β ≤ c²/(8D(1+β/2)²)` stays above it (classical).

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::model::{hermite, lower_ratio_l, sigma2, Params};
use crate::ode::{Solver, Step, StepControl};
use crate::threshold::AuxSolution;

/// Derivatives of `(ξ, N, V, z)` with respect to β.
pub fn phase_rhs(beta: f64, state: &[f64; 4], p: &Params<f64>) -> Result<[f64; 4]> {
    let [_, n, _, z] = *state;
    if !(z < 0.0) {
        return Err(WaveError::Singular(format!("z = {z} is not negative at beta = {beta}")));
    }
    if !(n > 0.0) {
        return Err(WaveError::Singular(format!("N = {n} is not positive at beta = {beta}")));
    }
    Ok(phase_rhs_raw(beta, state, p.d, p.c))
}

#[inline]
pub(crate) fn phase_rhs_raw(beta: f64, state: &[f64; 4], d: f64, c: f64) -> [f64; 4] {
    let [_, n, v, z] = *state;
    let dxi = d * n * beta / z;
    [
        dxi,
        v * dxi,
        (-c * v + n * beta) * dxi,
        -c - d * n * n * beta * beta / z,
    ]
}

/// z on the attracting classical branch near β = 0, to relative O(β²).
#[inline]
pub(crate) fn slaved_z(beta: f64, n: f64, v: f64, d: f64, c: f64) -> f64 {
    let zdot = -2.0 * d * n * n * beta / c + 2.0 * d * beta * v;
    -d * n * n * beta * beta / (c + zdot)
}

/// Largest β at which a path above `−cβ/2` is certain to stay above it.
#[inline]
pub(crate) fn classical_certificate_beta(beta: f64, d: f64, c: f64) -> f64 {
    let nb = 1.0 + 0.5 * beta;
    c * c / (8.0 * d * nb * nb)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathEnd {
    /// Reached β = 0 with vanishing flux.
    Z1,
    /// Reached β = 0 with a strictly negative flux limit.
    Z2,
    /// η exceeded `√(e^D)` before β vanished.
    Z3,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub beta: f64,
    pub xi: f64,
    pub n: f64,
    pub v: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePath {
    pub d: f64,
    pub c: f64,
    /// Ordered by decreasing β.
    pub samples: Vec<PhaseSample>,
    pub end: PathEnd,
    /// Estimated `ż(0⁺)` (the limit of `z/β`).
    pub slope_at_zero: f64,
    /// Estimated `z(0⁺)`.
    pub limit_flux: f64,
    /// True when the ending was decided by a comparison line rather than by
    /// extrapolation at the floor.
    pub certified: bool,
    /// Smallest β reached.
    pub end_beta: f64,
}

impl PhasePath {
    /// z at `beta` by Hermite interpolation in β (derivatives from the vector
    /// field). `None` outside the sampled range.
    pub fn z_at(&self, beta: f64) -> Option<f64> {
        self.interp(beta).map(|s| s.z)
    }

    pub fn interp(&self, beta: f64) -> Option<PhaseSample> {
        let first = self.samples.first()?;
        let last = self.samples.last()?;
        if beta > first.beta || beta < last.beta {
            return None;
        }
        let idx = self.samples.partition_point(|s| s.beta > beta);
        if idx == 0 {
            return Some(*first);
        }
        let (a, b) = (&self.samples[idx - 1], &self.samples[idx]);
        if b.beta == beta {
            return Some(*b);
        }
        let da = phase_rhs_raw(a.beta, &[a.xi, a.n, a.v, a.z], self.d, self.c);
        let db = phase_rhs_raw(b.beta, &[b.xi, b.n, b.v, b.z], self.d, self.c);
        let h = |i: usize, ya: f64, yb: f64| hermite(a.beta, ya, da[i], b.beta, yb, db[i], beta);
        Some(PhaseSample {
            beta,
            xi: h(0, a.xi, b.xi),
            n: h(1, a.n, b.n),
            v: h(2, a.v, b.v),
            z: h(3, a.z, b.z),
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PhaseOptions {
    /// Launch at β = 1 − delta.
    pub delta: f64,
    pub beta_floor: f64,
    /// Stop as soon as the classical ending is certified instead of tracing
    /// the path down to the floor.
    pub early_exit: bool,
    /// Sample thinning: maximum spacing in β and in log β.
    pub max_dbeta: f64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self {
            delta: 1e-6,
            beta_floor: 1e-8,
            early_exit: false,
            max_dbeta: 2e-3,
        }
    }
}

/// How a β-march ended.
#[derive(Clone, Copy, Debug)]
pub(crate) enum MarchEnd {
    /// Reached the floor; `z0`, `dz0`, `xi0`, `n0` are extrapolations to β = 0.
    Floor {
        beta: f64,
        y: [f64; 4],
        z0: f64,
        dz0: f64,
        xi0: f64,
        n0: f64,
    },
    /// On the attracting classical branch and small enough for the slaved tail.
    Tail { beta: f64, y: [f64; 4] },
    /// Classical ending certified (only with `early_exit`).
    Classical { beta: f64, y: [f64; 4] },
    /// η exceeded its bound.
    Overshoot { beta: f64, y: [f64; 4] },
}

pub(crate) struct MarchConfig {
    pub beta_floor: f64,
    pub tail_handoff: bool,
    pub early_exit: bool,
}

/// Integrates the β-system downward from `beta0`, calling `on_step` with each
/// accepted step.
pub(crate) fn march<S>(p: &Params<f64>, beta0: f64, y0: [f64; 4], cfg: &MarchConfig, mut on_step: S) -> Result<MarchEnd>
where
    S: FnMut(&Step<f64, 4>),
{
    let (d, c) = (p.d, p.c);
    let n_bound = p.eta_tau_bound() * (1.0 + 1e-9) + 1e-6;
    let mut f = |beta: f64, y: &[f64; 4]| {
        if y[3] < 0.0 && y[1] > 0.0 && beta > 0.0 {
            Some(phase_rhs_raw(beta, y, d, c))
        } else {
            None
        }
    };
    // Every component keeps one sign along the march, so pure relative error
    // control is meaningful and resolves z across many decades.
    if cfg.early_exit && y0[3] >= -0.5 * c * beta0 && beta0 <= classical_certificate_beta(beta0, d, c) {
        // Fast speeds are certified at launch, where the slaved branch is too
        // stiff to step through.
        return Ok(MarchEnd::Classical { beta: beta0, y: y0 });
    }
    let ctrl = StepControl::new(p.tol.rtol, f64::MIN_POSITIVE);
    let h0 = -(beta0 * 1e-6).max(1e-14).min(0.5 * (beta0 - cfg.beta_floor));
    let mut solver = Solver::new(&mut f, beta0, y0, h0, ctrl)?;
    let mut hist: [(f64, [f64; 4]); 3] = [(beta0, y0); 3];
    let mut count = 0usize;
    loop {
        let st = solver.step(&mut f, cfg.beta_floor)?;
        on_step(&st);
        hist = [hist[1], hist[2], (st.t1, st.y1)];
        count += 1;
        let (beta, y) = (st.t1, st.y1);
        if y[1] > n_bound {
            return Ok(MarchEnd::Overshoot { beta, y });
        }
        let z = y[3];
        let certified = z >= -0.5 * c * beta && beta <= classical_certificate_beta(beta, d, c);
        if certified && cfg.early_exit {
            return Ok(MarchEnd::Classical { beta, y });
        }
        if certified && cfg.tail_handoff {
            let n = y[1];
            let beta_tail = 1e-6 * c * c / (d * n * n);
            if beta <= beta_tail {
                let zs = slaved_z(beta, n, y[2], d, c);
                if (z - zs).abs() <= 1e-6 * zs.abs() || beta <= 1e-2 * beta_tail {
                    return Ok(MarchEnd::Tail { beta, y });
                }
            }
        }
        if beta <= cfg.beta_floor {
            let pts = if count >= 3 {
                hist
            } else {
                [(beta0, y0), hist[1], hist[2]]
            };
            let (z0, dz0) = quadratic_at_zero(pts.map(|(b, y)| (b, y[3])));
            let dy = phase_rhs_raw(beta, &y, d, c);
            return Ok(MarchEnd::Floor {
                beta,
                y,
                z0,
                dz0,
                xi0: y[0] - beta * dy[0],
                n0: y[1] - beta * dy[1],
            });
        }
    }
}

/// Value and slope at 0 of the quadratic through three points.
pub(crate) fn quadratic_at_zero(pts: [(f64, f64); 3]) -> (f64, f64) {
    let [(x0, y0), (x1, y1), (x2, y2)] = pts;
    if x0 == x1 || x1 == x2 || x0 == x2 {
        let s = if x2 != x1 { (y2 - y1) / (x2 - x1) } else { 0.0 };
        return (y2 - s * x2, s);
    }
    // Lagrange basis evaluated at 0 and differentiated at 0.
    let l0 = x1 * x2 / ((x0 - x1) * (x0 - x2));
    let l1 = x0 * x2 / ((x1 - x0) * (x1 - x2));
    let l2 = x0 * x1 / ((x2 - x0) * (x2 - x1));
    let d0 = -(x1 + x2) / ((x0 - x1) * (x0 - x2));
    let d1 = -(x0 + x2) / ((x1 - x0) * (x1 - x2));
    let d2 = -(x0 + x1) / ((x2 - x0) * (x2 - x1));
    (l0 * y0 + l1 * y1 + l2 * y2, d0 * y0 + d1 * y1 + d2 * y2)
}

struct Thinner {
    last_beta: f64,
    max_dbeta: f64,
}

impl Thinner {
    fn due(&self, beta: f64) -> bool {
        (self.last_beta - beta) >= self.max_dbeta
            || (self.last_beta / beta).ln() >= 10.0 * self.max_dbeta
            || ((1.0 - beta) / (1.0 - self.last_beta)).ln() >= 10.0 * self.max_dbeta
    }
}

/// Traces the path leaving `(β, z) = (1, 0)` with default options.
pub fn integrate_z(p: &Params<f64>) -> Result<PhasePath> {
    integrate_z_with(p, &PhaseOptions::default())
}

pub fn integrate_z_with(p: &Params<f64>, opts: &PhaseOptions) -> Result<PhasePath> {
    let (d, c) = (p.d, p.c);
    let s2 = sigma2(c)?;
    let l = lower_ratio_l(c)?;
    if !(opts.delta > 0.0 && opts.delta < 0.5) {
        return Err(WaveError::Domain("launch offset must lie in (0, 1/2)".into()));
    }
    let beta0 = 1.0 - opts.delta;
    let n0 = l * opts.delta;
    let y0 = [0.0, n0, s2 * n0, -d * s2 * n0 * n0 * beta0 / l];
    let mut samples = vec![PhaseSample {
        beta: beta0,
        xi: y0[0],
        n: y0[1],
        v: y0[2],
        z: y0[3],
    }];
    let mut thin = Thinner {
        last_beta: beta0,
        max_dbeta: opts.max_dbeta,
    };
    let cfg = MarchConfig {
        beta_floor: opts.beta_floor,
        tail_handoff: true,
        early_exit: opts.early_exit,
    };
    let end = march(p, beta0, y0, &cfg, |st| {
        if thin.due(st.t1) {
            samples.push(PhaseSample {
                beta: st.t1,
                xi: st.y1[0],
                n: st.y1[1],
                v: st.y1[2],
                z: st.y1[3],
            });
            thin.last_beta = st.t1;
        }
    })?;
    let push_last = |samples: &mut Vec<PhaseSample>, beta: f64, y: &[f64; 4]| {
        if samples.last().map(|s| s.beta > beta).unwrap_or(true) {
            samples.push(PhaseSample {
                beta,
                xi: y[0],
                n: y[1],
                v: y[2],
                z: y[3],
            });
        }
    };
    let path = match end {
        MarchEnd::Floor { beta, y, z0, dz0, .. } => {
            push_last(&mut samples, beta, &y);
            let flux_tol = p.tol.flux * c;
            let end = if z0 < -flux_tol { PathEnd::Z2 } else { PathEnd::Z1 };
            PhasePath {
                d,
                c,
                samples,
                end,
                slope_at_zero: dz0,
                limit_flux: z0,
                certified: false,
                end_beta: beta,
            }
        }
        MarchEnd::Classical { beta, y } => {
            push_last(&mut samples, beta, &y);
            PhasePath {
                d,
                c,
                samples,
                end: PathEnd::Z1,
                slope_at_zero: 0.0,
                limit_flux: 0.0,
                certified: true,
                end_beta: beta,
            }
        }
        MarchEnd::Overshoot { beta, y } => {
            push_last(&mut samples, beta, &y);
            PhasePath {
                d,
                c,
                samples,
                end: PathEnd::Z3,
                slope_at_zero: y[3] / beta,
                limit_flux: y[3],
                certified: true,
                end_beta: beta,
            }
        }
        MarchEnd::Tail { beta, y } => {
            push_last(&mut samples, beta, &y);
            let (end_beta, slope) = classical_tail(p, beta, y, opts, &mut samples)?;
            PhasePath {
                d,
                c,
                samples,
                end: PathEnd::Z1,
                slope_at_zero: slope,
                limit_flux: 0.0,
                certified: true,
                end_beta,
            }
        }
    };
    Ok(path)
}

/// Follows the classical branch in `s = ln β` with z slaved to `(N, V, β)`.
fn classical_tail(
    p: &Params<f64>,
    beta: f64,
    y: [f64; 4],
    opts: &PhaseOptions,
    samples: &mut Vec<PhaseSample>,
) -> Result<(f64, f64)> {
    let (d, c) = (p.d, p.c);
    let s_end = opts.beta_floor.ln();
    let s0 = beta.ln();
    if s0 <= s_end {
        return Ok((beta, y[3] / beta));
    }
    let mut f = |s: f64, u: &[f64; 3]| {
        let b = s.exp();
        let z = slaved_z(b, u[1], u[2], d, c);
        if !(z < 0.0) {
            return None;
        }
        let q = b * d * u[1] * b / z;
        Some([q, u[2] * q, (-c * u[2] + u[1] * b) * q])
    };
    let ctrl = StepControl::new(p.tol.rtol, p.tol.atol);
    let mut solver = Solver::new(&mut f, s0, [y[0], y[1], y[2]], -1e-3, ctrl)?;
    let mut last_s = s0;
    let mut prev = (beta, y[3] / beta);
    let mut cur = prev;
    while solver.t > s_end {
        let st = solver.step(&mut f, s_end)?;
        let b = st.t1.exp();
        let u = st.y1;
        let z = slaved_z(b, u[1], u[2], d, c);
        prev = cur;
        cur = (b, z / b);
        if last_s - st.t1 >= 0.05 || st.t1 <= s_end {
            samples.push(PhaseSample {
                beta: b,
                xi: u[0],
                n: u[1],
                v: u[2],
                z,
            });
            last_s = st.t1;
        }
    }
    // z/β ≈ −D N² β / c is close to linear in β; extrapolate to 0.
    let slope = if cur.0 != prev.0 {
        cur.1 - cur.0 * (cur.1 - prev.1) / (cur.0 - prev.0)
    } else {
        cur.1
    };
    Ok((cur.0, slope))
}

/// Minimum of `z_c − w_{σ*}` over shared β points in `(0, β₀]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub beta0: f64,
    pub eta0: f64,
    pub mu: f64,
    pub points: usize,
    pub min_gap: f64,
    pub argmin_beta: f64,
    /// Largest z over the same points (must stay negative).
    pub max_z: f64,
    pub holds: bool,
}

/// Compares a path against the auxiliary solution on `(0, β₀]`, where β₀ is
/// the value of β at which η reaches `μ/(c+σ₂)` and `μ = −max_{[1/2,1]} w`.
pub fn compare_with_w(path: &PhasePath, w: &AuxSolution) -> Result<ComparisonReport> {
    let mu = -w
        .samples
        .iter()
        .filter(|s| (0.5..=1.0).contains(&s.beta))
        .map(|s| s.w)
        .fold(f64::NEG_INFINITY, f64::max);
    if !mu.is_finite() {
        return Err(WaveError::Interpolation(
            "auxiliary solution has no samples on [1/2, 1]".into(),
        ));
    }
    let eta0 = mu / (path.c + sigma2(path.c)?);
    let beta0 = path
        .samples
        .windows(2)
        .find(|s| s[0].n <= eta0 && s[1].n > eta0)
        .map(|s| {
            let t = (eta0 - s[0].n) / (s[1].n - s[0].n);
            s[0].beta + t * (s[1].beta - s[0].beta)
        })
        .unwrap_or_else(|| path.samples.last().map(|s| s.beta).unwrap_or(0.0));
    let w_lo = w.samples.iter().map(|s| s.beta).fold(f64::INFINITY, f64::min);
    let mut pts: Vec<(f64, f64)> = path
        .samples
        .iter()
        .filter(|s| s.beta <= beta0 && s.beta >= w_lo && s.beta > 0.0)
        .filter_map(|s| w.w_at(s.beta).map(|wv| (s.beta, s.z - wv)))
        .collect();
    if pts.is_empty() {
        if let (Some(z), Some(wv)) = (path.z_at(beta0), w.w_at(beta0)) {
            pts.push((beta0, z - wv));
        } else {
            return Err(WaveError::Interpolation(
                "path and auxiliary grids do not overlap on (0, beta0]".into(),
            ));
        }
    }
    let (argmin_beta, min_gap) = pts
        .iter()
        .copied()
        .fold((f64::NAN, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc });
    let max_z = path
        .samples
        .iter()
        .filter(|s| s.beta <= beta0 && s.beta >= w_lo)
        .map(|s| s.z)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ComparisonReport {
        beta0,
        eta0,
        mu,
        points: pts.len(),
        min_gap,
        argmin_beta,
        max_z,
        holds: min_gap > 0.0 && max_z < 0.0,
    })
}
