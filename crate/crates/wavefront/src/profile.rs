//! Shooting in ξ from the left equilibrium `(η, β) = (0, 1)`.
//!
//! The second equation is replaced by the first integral, so the state is
//! `(η, η', β)`. The run has up to three legs:
//!
//! 1. ξ-leg from the launch point until β drops to `beta_switch`;
//! 2. β-leg (the phase-plane system) down to `beta_floor`, which resolves
//!    the sharp and failed endings where β' is singular in ξ;
//! 3. for classical fronts, a slaved tail in ξ once the path sits on the
//!    attracting branch `β ≈ H/c` with `H = c − η' − cη` the remaining mass.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::model::{lower_ratio_l, sigma2, FrontClassification, FrontKind, Params, Profile, ProfileSample, Tau};
use crate::ode::{Solver, Step, StepControl};
use crate::phase::{march, MarchConfig, MarchEnd};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    pub eta: f64,
    pub v: f64,
    pub beta: f64,
}

/// `(η', v', β')` with β' from the first integral.
pub fn rhs(state: &WaveState, p: &Params<f64>) -> Result<(f64, f64, f64)> {
    let WaveState { eta, v, beta } = *state;
    if !(eta > 0.0) || !(beta > 0.0) {
        return Err(WaveError::Singular(format!(
            "rhs needs eta > 0 and beta > 0, got eta = {eta}, beta = {beta}"
        )));
    }
    let (d, c) = (p.d, p.c);
    Ok((
        v,
        -c * v + eta * beta,
        (c * (1.0 - beta) - v - c * eta) / (d * eta * beta),
    ))
}

/// The ξ-leg integrates `u = 1 − β` so that the flux `c u − η' − c η`, a
/// difference of quantities of size η near the launch, keeps full relative
/// precision.
#[inline]
fn rhs_raw(y: &[f64; 3], d: f64, c: f64) -> [f64; 3] {
    let [eta, v, u] = *y;
    [
        v,
        -c * v + eta * (1.0 - u),
        -(c * u - v - c * eta) / (d * eta * (1.0 - u)),
    ]
}

#[inline]
fn flux_u(y: &[f64; 3], c: f64) -> f64 {
    c * y[2] - y[1] - c * y[0]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaunchPoint {
    pub eta0: f64,
    pub v0: f64,
    pub beta0: f64,
    pub xi0: f64,
}

/// First-order asymptotics of the trajectory leaving `(0, 1)`:
/// `η' = σ₂ η` and `1 − β = η / L(c)`.
pub fn launch(p: &Params<f64>, eta0: f64) -> Result<LaunchPoint> {
    let s2 = sigma2(p.c)?;
    let l = lower_ratio_l(p.c)?;
    let limit = p.c / (p.c + s2);
    if !(eta0 > 0.0 && eta0 < limit) {
        return Err(WaveError::Domain(format!("eta0 must lie in (0, {limit}), got {eta0}")));
    }
    Ok(LaunchPoint {
        eta0,
        v0: s2 * eta0,
        beta0: 1.0 - eta0 / l,
        xi0: 0.0,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct ProfileOptions {
    pub eta0: f64,
    /// Horizon in ξ measured from the launch point; `None` means `200/σ₂`.
    pub xi_max: Option<f64>,
    pub beta_floor: f64,
    /// β at which the ξ-leg hands over to the β-leg.
    pub beta_switch: f64,
    /// Multiplies the number of stored samples.
    pub sample_density: f64,
    /// Shift so that β = 1/2 at ξ = 0.
    pub normalize: bool,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            eta0: 1e-6,
            xi_max: None,
            beta_floor: 1e-10,
            beta_switch: 1e-3,
            sample_density: 1.0,
            normalize: true,
        }
    }
}

pub fn integrate_profile(p: &Params<f64>, eta0: f64, xi_max: f64) -> Result<Profile> {
    integrate_profile_with(
        p,
        &ProfileOptions {
            eta0,
            xi_max: Some(xi_max),
            ..ProfileOptions::default()
        },
    )
}

struct Recorder {
    d: f64,
    samples: Vec<ProfileSample>,
    dxi: f64,
    dbeta: f64,
    dlog: f64,
}

impl Recorder {
    fn metric(&self, a: &ProfileSample, xi: f64, eta: f64, beta: f64) -> f64 {
        let m1 = (xi - a.xi) / self.dxi;
        let m2 = (a.beta - beta).abs() / self.dbeta;
        let m3 = (eta / a.eta).ln().abs() / self.dlog;
        let m4 = ((1.0 - beta).max(1e-300) / (1.0 - a.beta).max(1e-300)).ln().abs() / self.dlog;
        let m5 = if beta > 0.0 && a.beta > 0.0 {
            (a.beta / beta).ln().abs() / self.dlog
        } else {
            0.0
        };
        m1.max(m2).max(m3).max(m4).max(m5)
    }

    fn push(&mut self, s: ProfileSample) {
        if self.samples.last().map(|l| s.xi > l.xi).unwrap_or(true) {
            self.samples.push(s);
        }
    }

    /// Records the end of a ξ-leg step, inserting interpolated points when a
    /// single step spans more than one sampling unit.
    fn xi_step(&mut self, st: &Step<f64, 3>, c: f64) {
        let last = *self.samples.last().expect("seeded");
        let m = self.metric(&last, st.t1, st.y1[0], 1.0 - st.y1[2]);
        if m < 1.0 {
            return;
        }
        let pieces = m.min(1e4).floor() as usize;
        for k in 1..pieces {
            let t = last.xi + (st.t1 - last.xi) * k as f64 / pieces as f64;
            if t <= st.t0 {
                continue;
            }
            let y = st.interp(t);
            if y[0] > 0.0 && y[2] < 1.0 {
                self.push(xi_sample(t, &y, self.d, c));
            }
        }
        self.push(xi_sample(st.t1, &st.y1, self.d, c));
    }
}

fn xi_sample(xi: f64, y: &[f64; 3], d: f64, c: f64) -> ProfileSample {
    ProfileSample::from_flux(xi, y[0], y[1], 1.0 - y[2], flux_u(y, c), d)
}

/// β on the attracting classical branch as a function of η and the remaining
/// mass H, to relative O(H²).
#[inline]
fn slaved_beta(eta: f64, h: f64, d: f64, c: f64) -> f64 {
    let b = h / c;
    b + d * eta * eta * b * b / (c * c)
}

pub fn integrate_profile_with(p: &Params<f64>, opts: &ProfileOptions) -> Result<Profile> {
    let (d, c) = (p.d, p.c);
    let lp = launch(p, opts.eta0)?;
    let s2 = sigma2(c)?;
    let xi_max = opts.xi_max.unwrap_or(200.0 / s2);
    if !(xi_max > 0.0) {
        return Err(WaveError::Domain("xi_max must be positive".into()));
    }
    if !(opts.sample_density > 0.0) {
        return Err(WaveError::Domain("sample density must be positive".into()));
    }
    let eta_bound = p.eta_tau_bound() + 1e-6;
    let mut rec = Recorder {
        d,
        samples: Vec::new(),
        dxi: 0.02 / opts.sample_density,
        dbeta: 2e-3 / opts.sample_density,
        dlog: 0.02 / opts.sample_density,
    };
    let y0 = [lp.eta0, lp.v0, lp.eta0 / lower_ratio_l(c)?];
    rec.samples.push(xi_sample(lp.xi0, &y0, d, c));

    // Leg 1: ξ.
    let mut f = |_t: f64, y: &[f64; 3]| {
        if y[0] > 0.0 && y[2] < 1.0 {
            Some(rhs_raw(y, d, c))
        } else {
            None
        }
    };
    let ctrl = StepControl::new(p.tol.rtol, p.tol.atol.min(p.tol.rtol * opts.eta0)).with_two_sided(0b100);
    let mut solver = Solver::new(&mut f, lp.xi0, y0, 1e-3 / (c + 1.0), ctrl)?;
    let failed = |samples: Vec<ProfileSample>, slope: f64, flux: f64, tau: Tau| Profile {
        d,
        c,
        samples,
        tau,
        classification: FrontClassification {
            kind: FrontKind::FailedConnection,
            limit_slope: slope,
            limit_flux: flux,
        },
        eta_infinity: None,
    };
    let (xi_s, ys) = loop {
        if solver.t >= xi_max {
            // Horizon reached before β became small.
            let y = solver.y;
            let bp = -rhs_raw(&y, d, c)[2];
            let flux = flux_u(&y, c);
            if bp.abs() <= 1e-6 && y[2] > 0.5 {
                let prof = Profile {
                    d,
                    c,
                    samples: rec.samples,
                    tau: Tau::Infinite,
                    classification: FrontClassification {
                        kind: FrontKind::Classical,
                        limit_slope: bp,
                        limit_flux: flux,
                    },
                    eta_infinity: Some(y[0] + y[1] / c),
                };
                return finish(prof, opts);
            }
            return Err(WaveError::State(format!(
                "horizon xi_max = {xi_max} reached with beta = {} and beta' = {bp}",
                1.0 - y[2]
            )));
        }
        let st = solver.step(&mut f, xi_max)?;
        let y = st.y1;
        if y[0] > eta_bound {
            rec.xi_step(&st, c);
            let out = failed(rec.samples, -rhs_raw(&y, d, c)[2], flux_u(&y, c), Tau::Infinite);
            return finish(out, opts);
        }
        let flux = flux_u(&y, c);
        // Near the launch the flux is O(η²) and its sign is at the mercy of
        // rounding; judge monotonicity only once η has grown.
        if flux >= 0.0 && y[0] > 10.0 * lp.eta0 {
            rec.xi_step(&st, c);
            let out = failed(rec.samples, 0.0, flux, Tau::Infinite);
            return finish(out, opts);
        }
        if 1.0 - y[2] <= opts.beta_switch {
            let (t, yl) = st.locate(|_t, y| (1.0 - y[2]) - opts.beta_switch, p.tol.event);
            rec.xi_step(&st.truncated(t, yl), c);
            break (t, yl);
        }
        rec.xi_step(&st, c);
    };

    // Leg 2: β.
    let flux_s = flux_u(&ys, c);
    let beta_s = 1.0 - ys[2];
    if !(flux_s < 0.0) {
        return Err(WaveError::Singular(format!(
            "non-negative flux {flux_s} at the leg switch"
        )));
    }
    let yb = [xi_s, ys[0], ys[1], flux_s];
    let cfg = MarchConfig {
        beta_floor: opts.beta_floor,
        tail_handoff: true,
        early_exit: false,
    };
    let mut last_b = beta_s;
    let dbeta = rec.dbeta;
    let dlog = rec.dlog;
    let mut beta_samples: Vec<ProfileSample> = Vec::new();
    let end = march(p, beta_s, yb, &cfg, |st| {
        let b = st.t1;
        if last_b - b >= dbeta || (last_b / b).ln() >= dlog || b <= opts.beta_floor {
            let y = st.y1;
            beta_samples.push(ProfileSample::from_flux(y[0], y[1], y[2], b, y[3], d));
            last_b = b;
        }
    })?;
    for s in beta_samples {
        rec.push(s);
    }
    let flux_tol = p.tol.flux * c;
    let prof = match end {
        MarchEnd::Floor {
            beta,
            y,
            z0,
            dz0,
            xi0,
            n0,
        } => {
            rec.push(ProfileSample::from_flux(y[0], y[1], y[2], beta, y[3], d));
            let kind = if z0 < -flux_tol {
                FrontKind::FailedConnection
            } else if dz0.abs() <= (dz0 + c).abs() {
                FrontKind::Classical
            } else {
                FrontKind::Sharp
            };
            // β'(τ⁻) = lim z/(DNβ) = ż(0)/(D N(0)); infinite for a flux gap.
            let slope = if kind == FrontKind::FailedConnection {
                y[3] / (d * y[1] * beta)
            } else {
                dz0 / (d * n0)
            };
            Profile {
                d,
                c,
                samples: rec.samples,
                tau: Tau::Finite(xi0),
                classification: FrontClassification {
                    kind,
                    limit_slope: slope,
                    limit_flux: z0,
                },
                eta_infinity: None,
            }
        }
        MarchEnd::Overshoot { beta, y } => {
            rec.push(ProfileSample::from_flux(y[0], y[1], y[2], beta, y[3], d));
            failed(rec.samples, y[3] / (d * y[1] * beta), y[3], Tau::Infinite)
        }
        MarchEnd::Classical { .. } => unreachable!("early exit is disabled for profiles"),
        MarchEnd::Tail { beta, y } => {
            rec.push(ProfileSample::from_flux(y[0], y[1], y[2], beta, y[3], d));
            // Leg 3: slaved tail in ξ with state (η, H).
            let h0 = y[3] + c * beta;
            let (samples, limit_slope, limit_flux, eta_inf) = slaved_tail(p, y[0], y[1], h0, xi_max, rec)?;
            Profile {
                d,
                c,
                samples,
                tau: Tau::Infinite,
                classification: FrontClassification {
                    kind: FrontKind::Classical,
                    limit_slope,
                    limit_flux,
                },
                eta_infinity: Some(eta_inf),
            }
        }
    };
    finish(prof, opts)
}

fn slaved_tail(
    p: &Params<f64>,
    xi0: f64,
    eta0: f64,
    h0: f64,
    xi_max: f64,
    mut rec: Recorder,
) -> Result<(Vec<ProfileSample>, f64, f64, f64)> {
    let (d, c) = (p.d, p.c);
    // State (g, H) with g = 1 − η, so that the error is relative to the gap
    // and η never overshoots 1. On this branch η' = c g − H > 0.
    let mut f = |_t: f64, u: &[f64; 2]| {
        let eta = 1.0 - u[0];
        let b = slaved_beta(eta, u[1], d, c);
        Some([u[1] - c * u[0], -eta * b])
    };
    let sample = |xi: f64, u: &[f64; 2]| {
        let (eta, h) = (1.0 - u[0], u[1]);
        let v = c * u[0] - h;
        let b = slaved_beta(eta, h, d, c);
        let bp =
            -eta * b / c * (1.0 + 2.0 * d * eta * eta * h / (c * c * c)) + 2.0 * d * eta * v * h * h / (c * c * c * c);
        ProfileSample {
            xi,
            eta,
            eta_prime: v,
            beta: b,
            beta_prime: bp,
            flux: d * eta * b * bp,
        }
    };
    let end = xi_max.max(xi0 + 1.0);
    let ctrl = StepControl::new(p.tol.rtol, f64::MIN_POSITIVE);
    let g0 = 1.0 - eta0;
    if !(g0 > 0.0) {
        return Err(WaveError::State(format!(
            "eta = {eta0} at the tail handoff leaves no gap to 1"
        )));
    }
    let mut solver = Solver::new(&mut f, xi0, [g0, h0], 1e-3, ctrl)?;
    let mut last = (sample(xi0, &[g0, h0]), h0);
    while solver.t < end {
        let st = solver.step(&mut f, end)?;
        let s = sample(st.t1, &st.y1);
        let prev = *rec.samples.last().expect("seeded");
        if rec.metric(&prev, s.xi, s.eta, s.beta.max(1e-300)) >= 1.0 || st.t1 >= end {
            rec.push(s);
        }
        last = (s, st.y1[1]);
    }
    // η + η'/c = 1 − H/c.
    let eta_inf = 1.0 - last.1 / c;
    Ok((rec.samples, last.0.beta_prime, last.0.flux, eta_inf))
}

fn finish(mut prof: Profile, opts: &ProfileOptions) -> Result<Profile> {
    if opts.normalize {
        prof.normalize_half();
    }
    Ok(prof)
}

/// Continues a sharp front past τ with β ≡ 0 and
/// `η(ξ) = η(τ) + η'(τ)/c · (1 − e^{c(τ−ξ)})`.
pub fn extend_beyond_tau(profile: &Profile, p: &Params<f64>, xi_end: f64) -> Result<Profile> {
    if profile.classification.kind != FrontKind::Sharp {
        return Err(WaveError::State(format!(
            "extension past tau needs a sharp profile, got {}",
            profile.classification.kind.as_str()
        )));
    }
    let tau = profile
        .tau
        .finite()
        .ok_or_else(|| WaveError::State("sharp profile without finite tau".into()))?;
    let last = profile.last();
    // Values at τ from the last sample (the β-floor sits within 1e-10 of τ).
    let (eta_t, v_t) = (last.eta + last.eta_prime * (tau - last.xi), last.eta_prime);
    let c = p.c;
    let mut out = profile.clone();
    out.samples.retain(|s| s.xi < tau);
    let n = 400usize;
    let span = (xi_end - tau).max(0.0);
    for k in 0..=n {
        // Denser near τ where η varies fastest.
        let xi = tau + span * (k as f64 / n as f64).powi(2);
        if out.samples.last().map(|s| xi <= s.xi).unwrap_or(false) {
            continue;
        }
        let e = (c * (tau - xi)).exp();
        out.samples.push(ProfileSample {
            xi,
            eta: eta_t + v_t / c * (1.0 - e),
            eta_prime: v_t * e,
            beta: 0.0,
            beta_prime: 0.0,
            flux: 0.0,
        });
    }
    out.eta_infinity = Some(eta_t + v_t / c);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(d: f64, c: f64) -> Params<f64> {
        Params::new(d, c).unwrap()
    }

    #[test]
    fn rhs_example() {
        let (a, b, cc) = rhs(
            &WaveState {
                eta: 1.0,
                v: 0.0,
                beta: 0.5,
            },
            &p(1.0, 1.0),
        )
        .unwrap();
        assert_eq!(a, 0.0);
        assert!((b - 0.5).abs() < 1e-15);
        assert!((cc + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rhs_zero_flux_gives_zero_slope() {
        let (d, c, eta, beta) = (1.3, 2.0, 0.4, 0.6);
        let v = c * (1.0 - beta) - c * eta;
        let (_, _, db) = rhs(&WaveState { eta, v, beta }, &p(d, c)).unwrap();
        assert_eq!(db, 0.0);
    }

    #[test]
    fn rhs_near_launch_is_decreasing() {
        let (_, _, db) = rhs(
            &WaveState {
                eta: 0.5,
                v: 0.25,
                beta: 1.0 - 1e-9,
            },
            &p(1.0, 1.0),
        )
        .unwrap();
        assert!(db < 0.0);
    }

    #[test]
    fn rhs_rejects_singular_states() {
        assert!(rhs(
            &WaveState {
                eta: 0.5,
                v: 0.1,
                beta: 0.0
            },
            &p(1.0, 1.0)
        )
        .is_err());
        assert!(rhs(
            &WaveState {
                eta: 0.0,
                v: 0.1,
                beta: 0.5
            },
            &p(1.0, 1.0)
        )
        .is_err());
    }

    #[test]
    fn launch_values() {
        let lp = launch(&p(1.0, 1.5), 1e-6).unwrap();
        assert!((lp.v0 - 5e-7).abs() < 1e-20);
        assert!((lp.beta0 - (1.0 - 4.0 / 3.0 * 1e-6)).abs() < 1e-16);
        assert!(launch(&p(1.0, 1.5), 0.75).is_err());
    }

    #[test]
    fn launch_on_first_integral() {
        for &(d, c) in &[(1.0, 1.5), (2.0, 8.0), (0.5, 0.3)] {
            let pp = p(d, c);
            let lp = launch(&pp, 1e-6).unwrap();
            let (_, _, bp) = rhs(
                &WaveState {
                    eta: lp.eta0,
                    v: lp.v0,
                    beta: lp.beta0,
                },
                &pp,
            )
            .unwrap();
            let r = d * lp.eta0 * lp.beta0 * bp + c * (lp.beta0 - 1.0) + lp.v0 + c * lp.eta0;
            assert!(r.abs() <= 1e-12);
        }
    }

    #[test]
    fn extension_rejects_non_sharp() {
        let prof = Profile {
            d: 1.0,
            c: 1.0,
            samples: vec![ProfileSample {
                xi: 0.0,
                eta: 0.5,
                eta_prime: 0.1,
                beta: 0.5,
                beta_prime: -0.1,
                flux: -0.025,
            }],
            tau: Tau::Infinite,
            classification: FrontClassification {
                kind: FrontKind::Classical,
                limit_slope: 0.0,
                limit_flux: 0.0,
            },
            eta_infinity: None,
        };
        assert!(extend_beyond_tau(&prof, &p(1.0, 1.0), 5.0).is_err());
    }

    #[test]
    fn extension_closed_form() {
        let c = 2.0;
        let prof = Profile {
            d: 1.0,
            c,
            samples: vec![
                ProfileSample {
                    xi: -1.0,
                    eta: 0.8,
                    eta_prime: 0.2,
                    beta: 0.1,
                    beta_prime: -0.5,
                    flux: -0.04,
                },
                ProfileSample {
                    xi: 0.0,
                    eta: 0.9,
                    eta_prime: 0.1 * c,
                    beta: 1e-10,
                    beta_prime: -1.0,
                    flux: -0.9e-10,
                },
            ],
            tau: Tau::Finite(0.0),
            classification: FrontClassification {
                kind: FrontKind::Sharp,
                limit_slope: -c / 0.9,
                limit_flux: 0.0,
            },
            eta_infinity: None,
        };
        let out = extend_beyond_tau(&prof, &p(1.0, c), 20.0).unwrap();
        assert!((out.eta_infinity.unwrap() - 1.0).abs() < 1e-15);
        let at_tau = out.samples.iter().find(|s| s.xi == 0.0).unwrap();
        assert_eq!(at_tau.eta, 0.9);
        for w in out.samples.windows(2).filter(|w| w[0].xi >= 0.0) {
            assert!(w[1].eta >= w[0].eta);
            assert!(w[1].eta_prime <= w[0].eta_prime);
        }
    }
}
