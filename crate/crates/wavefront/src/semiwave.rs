//! Left semi-wavefront on `(−∞, 0]` built without shooting from `(0, 1)`.
//!
//! For a frozen candidate β the linear problem `η'' + cη' = βη`, `η(0) = η₀`,
//! `η(−∞) = 0` is solved on `[−X, 0]`; the first integral then defines a new
//! β = y through the scalar problem
//! `y' = (c(1 − y) − η' − cη) / (Dηy)`, `y(−∞) = 1`, whose admissible initial
//! value `y(0) = α` is found by backward shooting. Iterating the map β ↦ y
//! converges to the semi-wavefront.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::linalg::solve_tridiagonal;
use crate::model::{kappa, nu, sigma1, sigma2, Params, Profile, ProfileSample};
use crate::ode::{Solver, StepControl};

/// Default grid spacing in ξ.
pub const DEFAULT_SPACING: f64 = 0.01;

/// Candidate β on an increasing grid `ξ₀ = −X < … < ξ_n = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaCandidate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl BetaCandidate {
    /// Uniform grid on `[−x, 0]` with spacing at most `h`, β ≡ `value`.
    pub fn constant(x: f64, h: f64, value: f64) -> Result<Self> {
        if !(x > 0.0 && h > 0.0 && x.is_finite()) {
            return Err(WaveError::Domain(format!(
                "grid needs x > 0 and h > 0, got x = {x}, h = {h}"
            )));
        }
        let n = (x / h).ceil() as usize;
        let grid = (0..=n).map(|i| -x + x * i as f64 / n as f64).collect();
        Ok(Self {
            grid,
            values: vec![value; n + 1],
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    fn check(&self) -> Result<()> {
        if self.grid.len() < 2 || self.grid.len() != self.values.len() {
            return Err(WaveError::Domain("beta candidate needs at least two samples".into()));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(WaveError::Domain("beta grid must be strictly increasing".into()));
        }
        if self.grid.last().copied() != Some(0.0) {
            return Err(WaveError::Domain("beta grid must end at 0".into()));
        }
        Ok(())
    }
}

/// Solution of the η problem for a frozen β, with the per-cell β used by the
/// discretization so that η can be evaluated between nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaSolution {
    pub c: f64,
    pub grid: Vec<f64>,
    pub eta: Vec<f64>,
    pub eta_prime: Vec<f64>,
    cell_beta: Vec<f64>,
}

/// Exact solution of `η'' + cη' = bη` on one cell, in terms of its end values.
#[derive(Clone, Copy, Debug)]
struct Cell {
    p: f64,
    q: f64,
    eph: f64,
    eqh: f64,
    den: f64,
}

impl Cell {
    fn new(c: f64, b: f64, h: f64) -> Self {
        let r = (c * c + 4.0 * b).sqrt();
        // p is ν(b) written without cancellation.
        let p = 2.0 * b / (c + r);
        let q = -c - p;
        let eph = (p * h).exp();
        let eqh = (q * h).exp();
        let den = eqh * ((p - q) * h).exp_m1();
        Self { p, q, eph, eqh, den }
    }

    /// η'(left end) = `la·a + lb·b`.
    fn left(&self) -> (f64, f64) {
        (
            (self.q * self.eph - self.p * self.eqh) / self.den,
            (self.p - self.q) / self.den,
        )
    }

    /// η'(right end) = `ra·a + rb·b`.
    fn right(&self) -> (f64, f64) {
        (
            -(self.p - self.q) * self.eph * self.eqh / self.den,
            (self.p * self.eph - self.q * self.eqh) / self.den,
        )
    }

    /// (η, η') at offset `s` into the cell given end values `a`, `b`.
    fn eval(&self, a: f64, b: f64, s: f64) -> (f64, f64) {
        let ca = (b - a * self.eqh) / self.den;
        let cb = (a * self.eph - b) / self.den;
        let (ep, eq) = ((self.p * s).exp(), (self.q * s).exp());
        (ca * ep + cb * eq, self.p * ca * ep + self.q * cb * eq)
    }
}

impl EtaSolution {
    /// (η, η') at any ξ in `[−X, 0]`, exact within the discretization.
    pub fn eval(&self, xi: f64) -> (f64, f64) {
        let n = self.grid.len();
        let i = self.grid.partition_point(|&x| x <= xi).clamp(1, n - 1) - 1;
        let cell = Cell::new(self.c, self.cell_beta[i], self.grid[i + 1] - self.grid[i]);
        cell.eval(self.eta[i], self.eta[i + 1], xi - self.grid[i])
    }

    pub fn eta0(&self) -> f64 {
        *self.eta.last().expect("non-empty")
    }
}

/// Solves `η'' + cη' = βη` on the candidate's grid with `η(0) = η₀` and the
/// Robin condition `η' = ν(β(−X)) η` at the left end.
///
/// β is taken constant on each cell (the midpoint average) and each cell uses
/// the exact exponential solutions, so β ≡ const is reproduced to rounding.
pub fn solve_eta_bvp(beta: &BetaCandidate, c: f64, eta0: f64) -> Result<EtaSolution> {
    beta.check()?;
    let s2 = sigma2(c)?;
    if !(eta0 > 0.0 && eta0 < 1.0) {
        return Err(WaveError::Domain(format!("eta0 must lie in (0, 1), got {eta0}")));
    }
    let k = kappa(c, eta0).unwrap_or(0.0);
    let (m, big_m) = beta
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &b| {
            (lo.min(b), hi.max(b))
        });
    if !(m > 0.0) || big_m > 1.0 + 1e-12 || m < k - 1e-12 {
        return Err(WaveError::Domain(format!(
            "beta candidate leaves [{k}, 1]: min {m}, max {big_m}"
        )));
    }
    let n = beta.len();
    let cells: Vec<Cell> = (0..n - 1)
        .map(|i| {
            Cell::new(
                c,
                0.5 * (beta.values[i] + beta.values[i + 1]),
                beta.grid[i + 1] - beta.grid[i],
            )
        })
        .collect();
    let (mut a, mut b, mut cc, mut d) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let nu_left = nu(c, beta.values[0])?;
    let (la0, lb0) = cells[0].left();
    b[0] = la0 - nu_left;
    cc[0] = lb0;
    for i in 1..n - 1 {
        let (ra, rb) = cells[i - 1].right();
        let (la, lb) = cells[i].left();
        a[i] = ra;
        b[i] = rb - la;
        cc[i] = -lb;
    }
    b[n - 1] = 1.0;
    d[n - 1] = eta0;
    let eta = solve_tridiagonal(&a, &b, &cc, &d)?;
    let mut eta_prime = vec![0.0; n];
    for i in 0..n {
        let from_right = (i + 1 < n).then(|| {
            let (la, lb) = cells[i].left();
            la * eta[i] + lb * eta[i + 1]
        });
        let from_left = (i > 0).then(|| {
            let (ra, rb) = cells[i - 1].right();
            ra * eta[i - 1] + rb * eta[i]
        });
        eta_prime[i] = match (from_left, from_right) {
            (Some(l), Some(r)) => 0.5 * (l + r),
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (None, None) => unreachable!(),
        };
    }
    // Upper and lower functions η₀e^{ν(m)ξ} and η₀e^{ν(M)ξ}.
    let (nu_m, nu_big) = (nu(c, m)?, nu(c, big_m.min(1.0))?);
    for (&x, &e) in beta.grid.iter().zip(&eta) {
        let (lo, hi) = (eta0 * (nu_big * x).exp(), eta0 * (nu_m * x).exp());
        let slack = 1e-9 * hi + 1e-300;
        if !(e >= lo - slack && e <= hi + slack) {
            return Err(WaveError::Bracket(format!(
                "eta = {e} at xi = {x} outside [{lo}, {hi}]"
            )));
        }
    }
    let ratio = eta_prime[n - 1] / eta0;
    let (r_lo, r_hi) = (sigma1(c, m.min(1.0))?, s2);
    if ratio < r_lo - 1e-8 || ratio > r_hi + 1e-8 {
        return Err(WaveError::Bracket(format!(
            "eta'(0)/eta(0) = {ratio} outside [{r_lo}, {r_hi}]"
        )));
    }
    Ok(EtaSolution {
        c,
        grid: beta.grid.clone(),
        eta,
        eta_prime,
        cell_beta: cells_beta(beta),
    })
}

fn cells_beta(beta: &BetaCandidate) -> Vec<f64> {
    beta.values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Outcome of one backward shot from ξ = 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShotOutcome {
    /// y reached 1: the initial value was too high.
    High,
    /// y' became nonnegative: the initial value was too low.
    Low,
    /// Neither happened on `[−X, 0]`.
    Undecided,
}

/// `u = 1 − y` keeps the small gap to 1 at full precision.
#[inline]
fn y_rhs(u: f64, eta: f64, eta_p: f64, d: f64, c: f64) -> f64 {
    -(c * u - eta_p - c * eta) / (d * eta * (1.0 - u))
}

/// Integrates y backward from `y(0) = y0` and classifies the shot.
pub fn shoot_once(eta: &EtaSolution, p: &Params<f64>, y0: f64) -> Result<ShotOutcome> {
    let (d, c) = (p.d, p.c);
    let (e0, ep0) = eta.eval(0.0);
    if !(y0 > 0.0) || y0 >= 1.0 {
        return Ok(ShotOutcome::High);
    }
    if c * (1.0 - y0) - ep0 - c * e0 >= 0.0 {
        return Ok(ShotOutcome::Low);
    }
    let x_left = eta.grid[0];
    let mut f = |xi: f64, y: &[f64; 1]| {
        let u = y[0];
        if !(u > 0.0 && u < 1.0) {
            return None;
        }
        let (e, ep) = eta.eval(xi);
        Some([y_rhs(u, e, ep, d, c)])
    };
    let ctrl = StepControl::new(p.tol.rtol, f64::MIN_POSITIVE).with_max_steps(2_000_000);
    let mut solver = Solver::new(&mut f, 0.0, [1.0 - y0], -1e-3, ctrl)?;
    loop {
        let st = match solver.step(&mut f, x_left) {
            Ok(st) => st,
            // The domain guard only trips when the shot leaves (0, 1).
            Err(WaveError::SingularStall { state, .. }) => {
                return Ok(if state[0] <= 0.5 {
                    ShotOutcome::High
                } else {
                    ShotOutcome::Low
                });
            }
            Err(e) => return Err(e),
        };
        let u = st.y1[0];
        if u <= 1e-300 {
            return Ok(ShotOutcome::High);
        }
        let (e, ep) = eta.eval(st.t1);
        if c * u - ep - c * e >= 0.0 {
            return Ok(ShotOutcome::Low);
        }
        if st.t1 <= x_left {
            return Ok(ShotOutcome::Undecided);
        }
    }
}

/// Admissible initial value and the matching y on the η grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separatrix {
    /// Infimum of the initial values whose backward shot reaches y = 1.
    pub alpha: f64,
    /// y(0) from the forward integration out of the left equilibrium.
    pub forward_y0: f64,
    pub iterations: usize,
    pub y: Vec<f64>,
}

/// η at which the forward y integration starts from the slaved expansion.
const ETA_START: f64 = 1e-4;

/// Finds α by bisection over backward shots, and the trajectory itself by
/// integrating forward from the left end, where it is attracting.
pub fn shoot_y0(eta: &EtaSolution, p: &Params<f64>) -> Result<Separatrix> {
    let c = p.c;
    let k = kappa(c, eta.eta0())?;
    let (mut lo, mut hi) = (k, 1.0 - 1e-15);
    if shoot_once(eta, p, lo)? != ShotOutcome::Low {
        return Err(WaveError::Bracket(format!("kappa = {k} not rejected low")));
    }
    let mut iterations = 0;
    while hi - lo > 4.0 * f64::EPSILON && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        iterations += 1;
        match shoot_once(eta, p, mid)? {
            ShotOutcome::High => hi = mid,
            ShotOutcome::Low => lo = mid,
            ShotOutcome::Undecided => {
                lo = mid;
                hi = mid;
            }
        }
    }
    let alpha = 0.5 * (lo + hi);
    let y = forward_y(eta, p)?;
    let forward_y0 = *y.last().expect("non-empty");
    Ok(Separatrix {
        alpha,
        forward_y0,
        iterations,
        y,
    })
}

/// y on the η grid: the expansion `1 − y ≈ P − Dη²β/c²`, `P = (η' + cη)/c`,
/// while η < `ETA_START`, then explicit integration to ξ = 0.
fn forward_y(eta: &EtaSolution, p: &Params<f64>) -> Result<Vec<f64>> {
    let (d, c) = (p.d, p.c);
    let n = eta.grid.len();
    let slaved = |i: usize| {
        let (e, ep) = (eta.eta[i], eta.eta_prime[i]);
        let b = eta.cell_beta[i.min(n - 2)];
        let pp = (ep + c * e) / c;
        pp - d * e * e * b / (c * c)
    };
    let start = eta.eta.iter().position(|&e| e >= ETA_START).unwrap_or(0).min(n - 1);
    let mut y: Vec<f64> = (0..=start).map(|i| 1.0 - slaved(i)).collect();
    if start == n - 1 {
        return Ok(y);
    }
    let mut f = |xi: f64, s: &[f64; 1]| {
        let u = s[0];
        if !(u > 0.0 && u < 1.0) {
            return None;
        }
        let (e, ep) = eta.eval(xi);
        Some([y_rhs(u, e, ep, d, c)])
    };
    let ctrl = StepControl::new(p.tol.rtol, f64::MIN_POSITIVE);
    let h0 = 1e-3 * d * eta.eta[start] / c;
    let mut solver = Solver::new(&mut f, eta.grid[start], [slaved(start)], h0, ctrl)?;
    let mut next = start + 1;
    while next < n {
        let st = solver.step(&mut f, 0.0)?;
        while next < n && eta.grid[next] <= st.t1 {
            let u = if next == n - 1 {
                st.y1[0]
            } else {
                st.interp(eta.grid[next])[0]
            };
            y.push(1.0 - u);
            next += 1;
        }
    }
    Ok(y)
}

/// Iteration controls for [`iterate_t`].
#[derive(Clone, Copy, Debug)]
pub struct IterateOptions {
    /// Domain length in units of `1/σ₂`.
    pub width_scale: f64,
    pub spacing: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for IterateOptions {
    fn default() -> Self {
        Self {
            width_scale: 100.0,
            spacing: DEFAULT_SPACING,
            max_iter: 200,
            tol: 1e-7,
        }
    }
}

/// A left semi-wavefront sampled on `[−X, 0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiWavefront {
    pub d: f64,
    pub c: f64,
    pub eta0: f64,
    pub samples: Vec<ProfileSample>,
    pub iterations: usize,
    /// Sup-norm change of β at each iteration.
    pub history: Vec<f64>,
    pub alpha: f64,
    pub forward_y0: f64,
}

impl SemiWavefront {
    /// ξ at which β first drops to `level`, linear between samples.
    pub fn xi_at_beta(&self, level: f64) -> Option<f64> {
        let w = self
            .samples
            .windows(2)
            .find(|w| w[0].beta >= level && w[1].beta < level)?;
        let t = (w[0].beta - level) / (w[0].beta - w[1].beta);
        Some(w[0].xi + t * (w[1].xi - w[0].xi))
    }
}

/// Sup-norm gaps `(η, β)` between a semi-wavefront and a profile on the
/// semi-wavefront's grid, after aligning both at β = 1/2.
pub fn compare_with_profile(sw: &SemiWavefront, profile: &Profile) -> Result<(f64, f64)> {
    let missing = |what: &str| WaveError::Interpolation(format!("{what} never crosses beta = 1/2"));
    let xs = sw.xi_at_beta(0.5).ok_or_else(|| missing("semi-wavefront"))?;
    let xp = profile.xi_at_beta(0.5).ok_or_else(|| missing("profile"))?;
    let (mut ge, mut gb) = (0.0f64, 0.0f64);
    for s in &sw.samples {
        let (e, b) = profile.eta_beta_at(s.xi - xs + xp);
        ge = ge.max((e - s.eta).abs());
        gb = gb.max((b - s.beta).abs());
    }
    Ok((ge, gb))
}

/// Default η₀: close enough to the admissible limit `c/(c + σ₂)` that β(0)
/// falls below 1/2.
pub fn default_eta0(c: f64) -> Result<f64> {
    Ok(0.95 * c / (c + sigma2(c)?))
}

/// Fixed-point iteration of β ↦ y starting from β ≡ 1.
///
/// Plain iteration is used while the change shrinks; once it grows the
/// update is relaxed by 1/2.
pub fn iterate_t(p: &Params<f64>, eta0: f64, opts: &IterateOptions) -> Result<SemiWavefront> {
    let (d, c) = (p.d, p.c);
    let s2 = sigma2(c)?;
    let k = kappa(c, eta0)?;
    let mut beta = BetaCandidate::constant(opts.width_scale / s2, opts.spacing, 1.0)?;
    let mut history = Vec::new();
    let mut relax = 1.0;
    for it in 1..=opts.max_iter {
        let eta = solve_eta_bvp(&beta, c, eta0)?;
        let sep = shoot_y0(&eta, p)?;
        let change = sep
            .y
            .iter()
            .zip(&beta.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if history.last().map(|&h| change > h).unwrap_or(false) {
            relax = 0.5;
        }
        history.push(change);
        if change <= opts.tol {
            let samples = (0..eta.grid.len())
                .map(|i| {
                    let (e, ep, y) = (eta.eta[i], eta.eta_prime[i], sep.y[i]);
                    ProfileSample::from_flux(eta.grid[i], e, ep, y, c * (1.0 - y) - ep - c * e, d)
                })
                .collect();
            return Ok(SemiWavefront {
                d,
                c,
                eta0,
                samples,
                iterations: it,
                history,
                alpha: sep.alpha,
                forward_y0: sep.forward_y0,
            });
        }
        for (b, y) in beta.values.iter_mut().zip(&sep.y) {
            *b = (*b + relax * (y - *b)).clamp(k, 1.0);
        }
    }
    Err(WaveError::Convergence {
        iterations: opts.max_iter,
        history,
    })
}
