//! Explicit finite-volume solver for `n_t = n_xx − nb`,
//! `b_t = (D n b b_x)_x + nb` on an interval with zero-flux ends, and front
//! tracking to measure the speed it selects.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::model::{Params, Profile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    /// Left edge of the domain; cell `i` is centred at `x0 + (i + 1/2) h`.
    pub x0: f64,
    pub h: f64,
    pub n: Vec<f64>,
    pub b: Vec<f64>,
    pub time: f64,
    /// Cells clipped back to 0 after an update.
    pub clip_events: usize,
}

impl Field {
    pub fn new(x0: f64, h: f64, n: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if !(h > 0.0) || n.len() != b.len() || n.len() < 3 {
            return Err(WaveError::Domain(
                "field needs h > 0 and at least 3 matching cells".into(),
            ));
        }
        if n.iter().chain(&b).any(|v| !(*v >= 0.0)) {
            return Err(WaveError::Domain("field values must be nonnegative".into()));
        }
        Ok(Self {
            x0,
            h,
            n,
            b,
            time: 0.0,
            clip_events: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.h
    }

    pub fn length(&self) -> f64 {
        self.h * self.len() as f64
    }

    /// `∫(n + b) dx` by the midpoint rule.
    pub fn mass(&self) -> f64 {
        self.h * self.n.iter().zip(&self.b).map(|(a, b)| a + b).sum::<f64>()
    }

    /// Largest interface diffusivity factor `avg(n)·avg(b)`.
    fn max_interface_coefficient(&self) -> f64 {
        self.n
            .windows(2)
            .zip(self.b.windows(2))
            .map(|(n, b)| 0.25 * (n[0] + n[1]) * (b[0] + b[1]))
            .fold(0.0, f64::max)
    }

    /// Largest stable explicit step `h² / (2 max(1, D·max avg(n)avg(b)))`.
    pub fn stability_bound(&self, d: f64) -> f64 {
        self.h * self.h / (2.0 * (d * self.max_interface_coefficient()).max(1.0))
    }

    /// Rightmost crossing of `level` by b from above, linear between cells.
    pub fn front_position(&self, level: f64) -> Option<f64> {
        let i = (0..self.len() - 1)
            .rev()
            .find(|&i| self.b[i] >= level && self.b[i + 1] < level)?;
        let t = (self.b[i] - level) / (self.b[i] - self.b[i + 1]);
        Some(self.x(i) + t * self.h)
    }
}

/// One explicit Euler step in flux form.
pub fn step(field: &Field, dt: f64, p: &Params<f64>) -> Result<Field> {
    let bound = field.stability_bound(p.d);
    if !(dt > 0.0) || dt > bound {
        return Err(WaveError::Domain(format!(
            "time step {dt} exceeds the stability bound {bound}"
        )));
    }
    let mut out = field.clone();
    step_into(field, &mut out, dt, p.d);
    Ok(out)
}

fn step_into(src: &Field, dst: &mut Field, dt: f64, d: f64) {
    let m = src.len();
    let r = dt / (src.h * src.h);
    let (n, b) = (&src.n, &src.b);
    let mut clips = 0;
    // Interface fluxes; the outer interfaces carry nothing.
    let mut fn_left = 0.0;
    let mut fb_left = 0.0;
    for i in 0..m {
        let (fn_right, fb_right) = if i + 1 < m {
            let coef = d * 0.25 * (n[i] + n[i + 1]) * (b[i] + b[i + 1]);
            (n[i + 1] - n[i], coef * (b[i + 1] - b[i]))
        } else {
            (0.0, 0.0)
        };
        let react = dt * n[i] * b[i];
        let mut nn = n[i] + r * (fn_right - fn_left) - react;
        let mut bb = b[i] + r * (fb_right - fb_left) + react;
        if nn < 0.0 {
            nn = 0.0;
            clips += 1;
        }
        if bb < 0.0 {
            bb = 0.0;
            clips += 1;
        }
        dst.n[i] = nn;
        dst.b[i] = bb;
        fn_left = fn_right;
        fb_left = fb_right;
    }
    dst.time = src.time + dt;
    dst.clip_events = src.clip_events + clips;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    pub level: f64,
    /// `(t, x)` where b crosses `level`.
    pub positions: Vec<(f64, f64)>,
    pub fitted_speed: f64,
    /// Root-mean-square deviation of the positions from the fitted line.
    pub fit_residual: f64,
}

/// Least-squares line through the last half of `positions`.
pub fn fit_speed(positions: &[(f64, f64)]) -> Option<(f64, f64)> {
    let tail = &positions[positions.len() / 2..];
    if tail.len() < 2 {
        return None;
    }
    let k = tail.len() as f64;
    let (mt, mx) = tail.iter().fold((0.0, 0.0), |(a, b), (t, x)| (a + t / k, b + x / k));
    let (stt, stx) = tail.iter().fold((0.0, 0.0), |(a, b), (t, x)| {
        (a + (t - mt).powi(2), b + (t - mt) * (x - mx))
    });
    if !(stt > 0.0) {
        return None;
    }
    let slope = stx / stt;
    let rms = (tail
        .iter()
        .map(|(t, x)| (x - mx - slope * (t - mt)).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    Some((slope, rms))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeOptions {
    pub cells: usize,
    /// Fraction of the stability bound used per step.
    pub safety: f64,
    /// Time between recorded front positions.
    pub record_interval: f64,
    /// Number of stored snapshots, evenly spaced in time.
    pub snapshots: usize,
    pub level: f64,
    /// Initial step position as a fraction of the domain.
    pub start_fraction: f64,
    /// Initial step width in cells.
    pub width_cells: f64,
    /// The front may not come closer to the right end than this fraction.
    pub margin_fraction: f64,
}

impl Default for PdeOptions {
    fn default() -> Self {
        Self {
            cells: 4096,
            safety: 0.4,
            record_interval: 0.1,
            snapshots: 11,
            level: 0.5,
            start_fraction: 0.1,
            width_cells: 5.0,
            margin_fraction: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeRun {
    pub history: Vec<Field>,
    pub estimate: SpeedEstimate,
    pub steps: usize,
    pub initial_mass: f64,
    pub final_mass: f64,
}

impl PdeRun {
    pub fn last(&self) -> &Field {
        self.history.last().expect("non-empty history")
    }

    pub fn mass_drift(&self) -> f64 {
        (self.final_mass - self.initial_mass).abs() / self.initial_mass
    }
}

/// Smooth step `b = 1/(1 + e^{(x − x₀)/w})` with `n = 1 − b` on `[0, length]`.
pub fn initial_step(length: f64, opts: &PdeOptions) -> Result<Field> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(WaveError::Domain(format!(
            "domain length must be positive, got {length}"
        )));
    }
    let h = length / opts.cells as f64;
    let (xs, w) = (opts.start_fraction * length, opts.width_cells * h);
    let b: Vec<f64> = (0..opts.cells)
        .map(|i| 1.0 / (1.0 + (((i as f64 + 0.5) * h - xs) / w).exp()))
        .collect();
    let n = b.iter().map(|v| 1.0 - v).collect();
    Field::new(0.0, h, n, b)
}

pub fn run_to_front(p: &Params<f64>, length: f64, t_max: f64) -> Result<PdeRun> {
    run_to_front_with(p, length, t_max, &PdeOptions::default())
}

pub fn run_to_front_with(p: &Params<f64>, length: f64, t_max: f64, opts: &PdeOptions) -> Result<PdeRun> {
    let field = initial_step(length, opts)?;
    run_field(field, p, t_max, opts)
}

/// Evolves `field` to `t_max`, recording the level crossing and snapshots.
pub fn run_field(field: Field, p: &Params<f64>, t_max: f64, opts: &PdeOptions) -> Result<PdeRun> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(WaveError::Domain(format!("t_max must be positive, got {t_max}")));
    }
    let d = p.d;
    let limit = field.x0 + (1.0 - opts.margin_fraction) * field.length();
    let initial_mass = field.mass();
    let snap_every = t_max / (opts.snapshots.max(2) - 1) as f64;
    let mut history = vec![field.clone()];
    let mut positions = Vec::new();
    if let Some(x) = field.front_position(opts.level) {
        positions.push((field.time, x));
    }
    let mut next_record = field.time + opts.record_interval;
    let mut next_snap = field.time + snap_every;
    let mut cur = field.clone();
    let mut nxt = field;
    let mut steps = 0;
    while cur.time < t_max {
        let dt = (opts.safety * cur.stability_bound(d)).min(t_max - cur.time);
        step_into(&cur, &mut nxt, dt, d);
        std::mem::swap(&mut cur, &mut nxt);
        steps += 1;
        let done = cur.time >= t_max;
        if cur.time >= next_record || done {
            next_record += opts.record_interval;
            if let Some(x) = cur.front_position(opts.level) {
                if x > limit {
                    let partial = fit_speed(&positions).map(|(s, _)| s);
                    return Err(WaveError::Truncation {
                        time: cur.time,
                        partial_speed: partial,
                    });
                }
                positions.push((cur.time, x));
            }
        }
        if cur.time >= next_snap || done {
            next_snap += snap_every;
            history.push(cur.clone());
        }
    }
    let (fitted_speed, fit_residual) = fit_speed(&positions)
        .ok_or_else(|| WaveError::NoFront(format!("b never crosses {} in enough records", opts.level)))?;
    let final_mass = cur.mass();
    Ok(PdeRun {
        history,
        estimate: SpeedEstimate {
            level: opts.level,
            positions,
            fitted_speed,
            fit_residual,
        },
        steps,
        initial_mass,
        final_mass,
    })
}

/// Sup-norm gaps `(β, η)` between a field and a profile after aligning the
/// field's level crossing with the profile's. Cells are compared where the
/// profile has `0.01 ≤ β ≤ 0.99`, the body of the front.
pub fn compare_with_profile(field: &Field, profile: &Profile, level: f64) -> Result<(f64, f64)> {
    let xf = field
        .front_position(level)
        .ok_or_else(|| WaveError::NoFront(format!("b never crosses {level}")))?;
    let at = |l: f64| {
        profile
            .xi_at_beta(l)
            .ok_or_else(|| WaveError::Interpolation(format!("profile never crosses beta = {l}")))
    };
    let (xp, left, right) = (at(level)?, at(0.99)?, at(0.01)?);
    let (mut gb, mut ge) = (0.0f64, 0.0f64);
    for i in 0..field.len() {
        let xi = field.x(i) - xf + xp;
        if xi < left || xi > right {
            continue;
        }
        let (eta, beta) = profile.eta_beta_at(xi);
        gb = gb.max((field.b[i] - beta).abs());
        ge = ge.max((field.n[i] - eta).abs());
    }
    Ok((gb, ge))
}
