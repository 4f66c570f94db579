//! One pass over a computed profile that evaluates every known invariant of a
//! wavefront and records measured value, bound and verdict for each.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::model::{lower_ratio_l, sigma2, speed_lower_bound, Params, Profile, Tau};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub check_id: String,
    pub description: String,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub entries: Vec<CheckEntry>,
    pub overall: bool,
}

impl CheckReport {
    fn from_entries(entries: Vec<CheckEntry>) -> Self {
        let overall = entries.iter().all(|e| e.passed);
        Self { entries, overall }
    }

    pub fn get(&self, id: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.check_id == id)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }
}

/// Check tolerances. Integral identities are relative to c.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyTolerances {
    pub integral: f64,
    pub rate: f64,
    pub pointwise: f64,
    /// Scaled by `1 + c`.
    pub first_integral: f64,
    pub eta_tau: f64,
    pub min_samples: usize,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        Self {
            integral: 1e-3,
            rate: 1e-2,
            pointwise: 1e-8,
            first_integral: 1e-9,
            eta_tau: 1e-6,
            min_samples: 100,
        }
    }
}

/// Integrals over the sampled profile with analytic tail completion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileIntegrals {
    /// `∫ηβ`.
    pub mass: f64,
    /// `∫ηβ²`.
    pub mass2: f64,
    /// `∫Dηββ'²`.
    pub dissipation: f64,
    /// `∫Dβ'η²β²`.
    pub cross: f64,
}

/// Samples up to τ; the β ≡ 0 extension beyond contributes nothing.
fn active(profile: &Profile) -> &[crate::model::ProfileSample] {
    let end = match profile.tau {
        Tau::Finite(t) => profile.samples.partition_point(|s| s.xi <= t + 1e-12 && s.beta > 0.0),
        Tau::Infinite => profile.samples.partition_point(|s| s.beta > 0.0),
    };
    &profile.samples[..end.max(1)]
}

/// Trapezoid sums with tails: on the left η decays like `e^{σ₂ξ}` with β ≈ 1,
/// on the right β decays exponentially at its last logarithmic rate.
pub fn profile_integrals(profile: &Profile) -> Result<ProfileIntegrals> {
    let d = profile.d;
    let s2 = sigma2(profile.c)?;
    let s = active(profile);
    let f = |p: &crate::model::ProfileSample| {
        [
            p.eta * p.beta,
            p.eta * p.beta * p.beta,
            d * p.eta * p.beta * p.beta_prime * p.beta_prime,
            d * p.beta_prime * p.eta * p.eta * p.beta * p.beta,
        ]
    };
    let mut acc = [0.0; 4];
    for w in s.windows(2) {
        let (a, b) = (f(&w[0]), f(&w[1]));
        let h = w[1].xi - w[0].xi;
        for k in 0..4 {
            acc[k] += 0.5 * h * (a[k] + b[k]);
        }
    }
    let first = &s[0];
    acc[0] += first.eta * first.beta / s2;
    acc[1] += first.eta * first.beta * first.beta / s2;
    let last = s.last().expect("non-empty");
    let classical_tail = matches!(profile.tau, Tau::Infinite) && last.beta > 0.0 && last.beta_prime < 0.0;
    if classical_tail {
        let r = -last.beta_prime / last.beta;
        acc[0] += last.eta * last.beta / r;
        acc[1] += last.eta * last.beta * last.beta / (2.0 * r);
    }
    Ok(ProfileIntegrals {
        mass: acc[0],
        mass2: acc[1],
        dissipation: acc[2],
        cross: acc[3],
    })
}

/// `∫ηβ dξ`, which equals c for a wavefront.
pub fn speed_integral(profile: &Profile) -> Result<f64> {
    Ok(profile_integrals(profile)?.mass)
}

pub fn verify_profile(profile: &Profile, p: &Params<f64>) -> Result<CheckReport> {
    verify_profile_with(profile, p, &VerifyTolerances::default())
}

pub fn verify_profile_with(profile: &Profile, p: &Params<f64>, tol: &VerifyTolerances) -> Result<CheckReport> {
    let (d, c) = (p.d, p.c);
    if profile.d != d || profile.c != c {
        return Err(WaveError::Domain(format!(
            "profile computed for (D, c) = ({}, {}), checked against ({d}, {c})",
            profile.d, profile.c
        )));
    }
    let samples = &profile.samples;
    let covers = samples.first().map(|s| s.beta >= 0.99).unwrap_or(false) && samples.iter().any(|s| s.beta <= 0.01);
    if samples.len() < tol.min_samples || !covers {
        return Err(WaveError::Coverage(format!(
            "need at least {} samples spanning beta in [0.01, 0.99], got {}",
            tol.min_samples,
            samples.len()
        )));
    }
    let s2 = sigma2(c)?;
    let l = lower_ratio_l(c)?;
    let mut entries = Vec::new();
    let mut push = |id: &str, description: &str, measured: f64, bound: f64| {
        // NaN compares false, so a NaN measurement fails.
        let passed = measured <= bound;
        entries.push(CheckEntry {
            check_id: id.into(),
            description: description.into(),
            measured,
            bound,
            passed,
        });
    };

    let ints = profile_integrals(profile)?;
    push(
        "speed_identity",
        "|c - int eta beta| / c",
        (c - ints.mass).abs() / c,
        tol.integral,
    );

    // Once η has settled at 1 it only moves at rounding level.
    let eta_drops = samples
        .windows(2)
        .filter(|w| !(w[1].eta >= w[0].eta - tol.pointwise))
        .count();
    push(
        "eta_increasing",
        "samples where eta drops by more than the pointwise slack",
        eta_drops as f64,
        0.0,
    );
    let floor = p.tol.event;
    let beta_rises = samples
        .windows(2)
        .filter(|w| w[1].beta > floor && !(w[1].beta < w[0].beta))
        .count();
    push(
        "beta_decreasing",
        "samples above the floor where beta fails to decrease",
        beta_rises as f64,
        0.0,
    );

    let eta_low = samples.iter().map(|s| -s.eta).fold(f64::NEG_INFINITY, f64::max);
    push("eta_positive", "max(-eta)", eta_low, tol.pointwise);
    let eta_high = active(profile)
        .iter()
        .map(|s| s.eta - 1.0)
        .fold(f64::NEG_INFINITY, f64::max);
    push("eta_below_one", "max(eta - 1) up to tau", eta_high, tol.pointwise);
    let slope_high = samples
        .iter()
        .map(|s| s.eta_prime - c)
        .fold(f64::NEG_INFINITY, f64::max);
    push("eta_prime_below_c", "max(eta' - c)", slope_high, tol.pointwise);
    let ratio_gap = active(profile)
        .iter()
        .map(|s| l * (1.0 - s.beta) - s.eta)
        .fold(f64::NEG_INFINITY, f64::max);
    push("lower_ratio", "max(L(c)(1 - beta) - eta)", ratio_gap, tol.pointwise);

    let head = samples[0].eta * 10.0;
    let decade: Vec<_> = samples.iter().take_while(|s| s.eta <= head).collect();
    let rate_err = decade
        .iter()
        .map(|s| (s.eta_prime / s.eta - s2).abs() / s2)
        .fold(0.0, f64::max);
    push(
        "left_rate_sigma2",
        "max |eta'/eta - sigma2| / sigma2 over the first decade",
        rate_err,
        tol.rate,
    );
    let inv_l = 1.0 / l;
    let gap_err = decade
        .iter()
        .map(|s| ((1.0 - s.beta) / s.eta - inv_l).abs() / inv_l)
        .fold(0.0, f64::max);
    push(
        "left_rate_l",
        "max |(1 - beta)/eta - 1/L| * L over the first decade",
        gap_err,
        tol.rate,
    );

    let bound = (0.5 * d).exp();
    push(
        "eta_tau",
        "eta(tau-) - sqrt(e^D)",
        profile.eta_tau() - bound,
        tol.eta_tau,
    );

    push(
        "energy_est1",
        "|int eta beta^2 - int D eta beta beta'^2 - c/2| / c",
        (ints.mass2 - ints.dissipation - 0.5 * c).abs() / c,
        tol.integral,
    );
    push(
        "energy_est2",
        "|c int D eta beta beta'^2 + int D beta' eta^2 beta^2| / c",
        (c * ints.dissipation + ints.cross).abs() / c,
        tol.integral,
    );
    push(
        "energy_est21",
        "int D eta beta beta'^2 - c/2",
        ints.dissipation - 0.5 * c,
        1e-6,
    );

    let fi = samples
        .iter()
        .filter(|s| s.beta > 0.0)
        .map(|s| (d * s.eta * s.beta * s.beta_prime + c * (s.beta - 1.0) + s.eta_prime + c * s.eta).abs())
        .fold(0.0, f64::max);
    push(
        "first_integral",
        "max |D eta beta beta' + c(beta - 1) + eta' + c eta|",
        fi,
        tol.first_integral * (1.0 + c),
    );

    let flux_tol = p.tol.flux * c;
    push(
        "flux_left",
        "|flux| at the first sample",
        samples[0].flux.abs(),
        flux_tol,
    );
    // Classical tails end at a sample whose flux is the limit estimate too.
    let mut right = profile.classification.limit_flux.abs();
    if matches!(profile.tau, Tau::Infinite) {
        right = right.max(active(profile).last().map(|s| s.flux.abs()).unwrap_or(0.0));
    }
    push("flux_right", "|flux| approaching tau", right, flux_tol);

    let lb = speed_lower_bound(d)?;
    push(
        "speed_above_lower_bound",
        "max(0, sqrt(D/15) - 1) - c",
        lb - c,
        -f64::MIN_POSITIVE,
    );

    Ok(CheckReport::from_entries(entries))
}
