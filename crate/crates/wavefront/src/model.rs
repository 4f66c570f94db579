//! Parameters, closed-form rates and bounds, and the record types shared by
//! the solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::scalar::{lit, Scalar};

/// Solver tolerances threaded through every integration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSet<T> {
    /// Relative tolerance of the adaptive integrator.
    pub rtol: T,
    /// Absolute tolerance of the adaptive integrator.
    pub atol: T,
    /// Localization tolerance for events such as the β = 0 crossing.
    pub event: T,
    /// Flux threshold (relative to c) separating sharp from failed endings.
    pub flux: T,
}

impl<T: Scalar> Default for ToleranceSet<T> {
    fn default() -> Self {
        Self {
            rtol: lit(1e-10),
            atol: lit(1e-12),
            event: lit(1e-10),
            flux: lit(1e-6),
        }
    }
}

impl<T: Scalar> ToleranceSet<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [self.rtol, self.atol, self.event, self.flux];
        if all.iter().all(|t| t.is_finite() && *t > T::zero()) {
            Ok(())
        } else {
            Err(WaveError::Domain("tolerances must be finite and positive".into()))
        }
    }
}

/// Diffusion coefficient `d`, wave speed `c` and tolerances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params<T> {
    pub d: T,
    pub c: T,
    pub tol: ToleranceSet<T>,
}

impl<T: Scalar> Params<T> {
    pub fn new(d: T, c: T) -> Result<Self> {
        Self::with_tol(d, c, ToleranceSet::default())
    }

    pub fn with_tol(d: T, c: T, tol: ToleranceSet<T>) -> Result<Self> {
        if !(d.is_finite() && d > T::zero()) {
            return Err(WaveError::Domain(format!("D must be positive, got {d}")));
        }
        if !(c.is_finite() && c > T::zero()) {
            return Err(WaveError::Domain(format!("c must be positive, got {c}")));
        }
        tol.validate()?;
        Ok(Self { d, c, tol })
    }

    pub fn sigma2(&self) -> T {
        sigma2(self.c).expect("validated speed")
    }

    pub fn lower_ratio(&self) -> T {
        lower_ratio_l(self.c).expect("validated speed")
    }

    /// `√(e^D)`, the bound on η at the end of a front.
    pub fn eta_tau_bound(&self) -> T {
        (self.d * lit(0.5)).exp()
    }
}

fn check_speed<T: Scalar>(c: T) -> Result<()> {
    if c.is_finite() && c > T::zero() {
        Ok(())
    } else {
        Err(WaveError::Domain(format!("speed must be positive, got {c}")))
    }
}

/// Left decay rate `2/(c+√(c²+4))`, the positive root of `ℓ² + cℓ − 1 = 0`.
pub fn sigma2<T: Scalar>(c: T) -> Result<T> {
    check_speed(c)?;
    Ok(lit::<T>(2.0) / (c + (c * c + lit(4.0)).sqrt()))
}

/// Rate `2M/(c+√(c²+4M))` of the exponential solving `η'' + cη' = Mη`.
pub fn nu<T: Scalar>(c: T, m: T) -> Result<T> {
    check_speed(c)?;
    if !(m.is_finite() && m > T::zero()) {
        return Err(WaveError::Domain(format!("rate parameter must be positive, got {m}")));
    }
    Ok(lit::<T>(2.0) * m / (c + (c * c + lit::<T>(4.0) * m).sqrt()))
}

/// `2β₀/(c+√(c²+4β₀))`; equals [`sigma2`] at `β₀ = 1`.
pub fn sigma1<T: Scalar>(c: T, beta0: T) -> Result<T> {
    if !(beta0 > T::zero() && beta0 <= T::one()) {
        return Err(WaveError::Domain(format!("beta0 must lie in (0,1], got {beta0}")));
    }
    nu(c, beta0)
}

/// `L(c) = (c²+c√(c²+4))/(2+c²+c√(c²+4))`.
pub fn lower_ratio_l<T: Scalar>(c: T) -> Result<T> {
    check_speed(c)?;
    let q = c * c + c * (c * c + lit(4.0)).sqrt();
    Ok(q / (lit::<T>(2.0) + q))
}

/// `max{0, √(D/15) − 1}`.
pub fn speed_lower_bound<T: Scalar>(d: T) -> Result<T> {
    if !(d.is_finite() && d > T::zero()) {
        return Err(WaveError::Domain(format!("D must be positive, got {d}")));
    }
    Ok(((d / lit(15.0)).sqrt() - T::one()).max(T::zero()))
}

/// `2√(D e^D)`.
pub fn speed_upper_bound<T: Scalar>(d: T) -> Result<T> {
    if !(d.is_finite() && d > T::zero()) {
        return Err(WaveError::Domain(format!("D must be positive, got {d}")));
    }
    // √(D e^D) = √D · e^{D/2} stays finite longer than the naive product.
    let v = lit::<T>(2.0) * d.sqrt() * (d * lit(0.5)).exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(WaveError::Range(format!("2√(D e^D) overflows for D = {d}")))
    }
}

/// `κ = 1 − η₀(c+σ₂)/c`, requiring `0 < η₀ < c/(c+σ₂)`.
pub fn kappa<T: Scalar>(c: T, eta0: T) -> Result<T> {
    let s2 = sigma2(c)?;
    let limit = c / (c + s2);
    if !(eta0 > T::zero() && eta0 < limit) {
        return Err(WaveError::Domain(format!(
            "eta0 must lie in (0, {limit}) for c = {c}, got {eta0}"
        )));
    }
    Ok(T::one() - eta0 * (c + s2) / c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontKind {
    Classical,
    Sharp,
    FailedConnection,
}

impl FrontKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FrontKind::Classical => "classical",
            FrontKind::Sharp => "sharp",
            FrontKind::FailedConnection => "failed_connection",
        }
    }

    pub fn is_front(self) -> bool {
        !matches!(self, FrontKind::FailedConnection)
    }
}

/// Outcome of a shot together with the measured limits at its end.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontClassification {
    pub kind: FrontKind,
    /// β' approaching τ (or at the truncation horizon for classical fronts).
    pub limit_slope: f64,
    /// `Dηββ'` approaching τ.
    pub limit_flux: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tau {
    Finite(f64),
    Infinite,
}

impl Tau {
    pub fn finite(self) -> Option<f64> {
        match self {
            Tau::Finite(t) => Some(t),
            Tau::Infinite => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub xi: f64,
    pub eta: f64,
    pub eta_prime: f64,
    pub beta: f64,
    pub beta_prime: f64,
    pub flux: f64,
}

impl ProfileSample {
    /// Builds a sample whose β' is derived from the flux, so that
    /// `flux = D η β β'` holds to rounding.
    pub fn from_flux(xi: f64, eta: f64, eta_prime: f64, beta: f64, flux: f64, d: f64) -> Self {
        let beta_prime = if beta > 0.0 { flux / (d * eta * beta) } else { 0.0 };
        Self {
            xi,
            eta,
            eta_prime,
            beta,
            beta_prime,
            flux,
        }
    }
}

/// A sampled trajectory `ξ ↦ (η, η', β, β', Dηββ')`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub d: f64,
    pub c: f64,
    pub samples: Vec<ProfileSample>,
    pub tau: Tau,
    pub classification: FrontClassification,
    /// Limit of η as ξ → +∞ implied by the last sample (`η + η'/c` once β
    /// has vanished), when the run reached the right end.
    pub eta_infinity: Option<f64>,
}

impl Profile {
    pub fn first(&self) -> &ProfileSample {
        &self.samples[0]
    }

    pub fn last(&self) -> &ProfileSample {
        self.samples.last().expect("non-empty profile")
    }

    /// η just before τ, or at the last sample of an infinite profile.
    pub fn eta_tau(&self) -> f64 {
        match self.tau {
            Tau::Finite(t) => {
                let mut best = self.samples[0].eta;
                for s in &self.samples {
                    if s.xi <= t + 1e-12 && s.beta > 0.0 {
                        best = s.eta;
                    }
                }
                best
            }
            Tau::Infinite => self.last().eta,
        }
    }

    /// Translates the profile by `dx` in ξ.
    pub fn shift(&mut self, dx: f64) {
        for s in &mut self.samples {
            s.xi += dx;
        }
        if let Tau::Finite(t) = self.tau {
            self.tau = Tau::Finite(t + dx);
        }
    }

    /// ξ at which β first drops to `level`, by Hermite interpolation between
    /// the bracketing samples.
    pub fn xi_at_beta(&self, level: f64) -> Option<f64> {
        let w = self
            .samples
            .windows(2)
            .find(|w| w[0].beta >= level && w[1].beta < level)?;
        let (a, b) = (&w[0], &w[1]);
        let h = b.xi - a.xi;
        let f = |x: f64| hermite(a.xi, a.beta, a.beta_prime, b.xi, b.beta, b.beta_prime, x) - level;
        // β is monotone on the segment; plain bisection is enough.
        let (mut lo, mut hi) = (a.xi, b.xi);
        if !(h > 0.0) {
            return Some(a.xi);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * (1.0 + lo.abs()) {
                break;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Shifts the profile so that β = 1/2 at ξ = 0. Returns the applied shift.
    pub fn normalize_half(&mut self) -> Option<f64> {
        let x = self.xi_at_beta(0.5)?;
        self.shift(-x);
        Some(-x)
    }

    /// Samples (η, β) at `xi` with cubic Hermite interpolation. Left of the
    /// first sample the launch asymptotics `η ∝ e^{σ₂ξ}`, `1 − β = η/L` are
    /// used; right of the last sample the last value is held.
    pub fn eta_beta_at(&self, xi: f64) -> (f64, f64) {
        let first = self.first();
        if xi <= first.xi {
            let s2 = sigma2(self.c).unwrap_or(1.0);
            let ratio = (s2 * (xi - first.xi)).exp();
            return (first.eta * ratio, 1.0 - (1.0 - first.beta) * ratio);
        }
        let last = self.last();
        if xi >= last.xi {
            return (last.eta, last.beta);
        }
        let idx = self.samples.partition_point(|s| s.xi <= xi);
        let (a, b) = (&self.samples[idx - 1], &self.samples[idx]);
        (
            hermite(a.xi, a.eta, a.eta_prime, b.xi, b.eta, b.eta_prime, xi),
            hermite(a.xi, a.beta, a.beta_prime, b.xi, b.beta, b.beta_prime, xi),
        )
    }
}

/// Cubic Hermite interpolation on `[x0, x1]`.
pub fn hermite(x0: f64, y0: f64, d0: f64, x1: f64, y1: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    if h == 0.0 {
        return y0;
    }
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Which computation produced a bracket endpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointSource {
    /// The analytic lower bound; no failing speed was observed above it.
    AnalyticBound,
    /// A phase-plane run at this speed.
    PhasePlane(FrontClassification),
    /// The auxiliary-problem speed σ*.
    SigmaStar,
}

/// An interval `(c_lo, c_hi]` containing the threshold speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedBracket {
    pub c_lo: f64,
    pub c_hi: f64,
    pub iterations: usize,
    pub witness_lo: EndpointSource,
    pub witness_hi: EndpointSource,
}

impl SpeedBracket {
    pub fn width(&self) -> f64 {
        self.c_hi - self.c_lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sigma2_exact_value() {
        assert!((sigma2(1.5_f64).unwrap() - 0.5).abs() < 1e-15);
        assert!((sigma2(1e-8_f64).unwrap() - 1.0).abs() < 1e-7);
        let s = sigma2(1.5_f64).unwrap();
        assert!((s * s + 1.5 * s - 1.0).abs() < 1e-14);
        assert!(sigma2(0.0_f64).is_err());
        assert!(sigma2(-1.0_f64).is_err());
    }

    #[test]
    fn sigma2_single_precision() {
        let s = sigma2(1.5_f32).unwrap();
        assert!((s - 0.5).abs() < 1e-6);
    }

    #[test]
    fn sigma1_values() {
        assert!((sigma1(1.5_f64, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let expected = 1.125 / (1.5 + 4.5_f64.sqrt());
        assert!((sigma1(1.5_f64, 0.5625).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.31066).abs() < 1e-5);
        assert!(sigma1(1.5_f64, 0.0).is_err());
        assert!(sigma1(1.5_f64, 1.1).is_err());
    }

    #[test]
    fn lower_ratio_values() {
        assert!((lower_ratio_l(1.5_f64).unwrap() - 0.75).abs() < 1e-15);
        let l = lower_ratio_l(1.5_f64).unwrap();
        let alt = 2.0 / (2.25 + 1.5 * 6.25_f64.sqrt()) + 1.0;
        assert!((1.0 / l - alt).abs() < 1e-14);
        assert!((1.0 / l - 4.0 / 3.0).abs() < 1e-14);
        assert!(lower_ratio_l(1e-9_f64).unwrap() < 1e-8);
        assert!(lower_ratio_l(0.0_f64).is_err());
    }

    #[test]
    fn speed_bounds() {
        assert_eq!(speed_lower_bound(15.0_f64).unwrap(), 0.0);
        assert!((speed_lower_bound(60.0_f64).unwrap() - 1.0).abs() < 1e-15);
        assert!((speed_lower_bound(540.0_f64).unwrap() - 5.0).abs() < 1e-14);
        let e = std::f64::consts::E;
        assert!((speed_upper_bound(1.0_f64).unwrap() - 2.0 * e.sqrt()).abs() < 1e-14);
        assert!((speed_upper_bound(1.0_f64).unwrap() - 3.297442).abs() < 1e-6);
        assert!((speed_upper_bound(2.0_f64).unwrap() - 2.0 * e * 2.0_f64.sqrt()).abs() < 1e-13);
        assert!(speed_upper_bound(2000.0_f64).is_err());
        assert!(speed_lower_bound(0.0_f64).is_err());
    }

    #[test]
    fn kappa_values() {
        assert!((kappa(1.5_f64, 0.3).unwrap() - 0.6).abs() < 1e-15);
        assert!((kappa(1.5_f64, 0.15).unwrap() - 0.8).abs() < 1e-15);
        let edge = 1.5 / 2.0;
        assert!(kappa(1.5_f64, edge * (1.0 - 1e-9)).unwrap() < 1e-8);
        assert!(kappa(1.5_f64, edge).is_err());
        assert!(kappa(1.5_f64, 0.0).is_err());
    }

    #[test]
    fn nu_constant_rate() {
        let expected = 0.5 / (1.5 + 3.25_f64.sqrt());
        assert!((nu(1.5_f64, 0.25).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.151388).abs() < 1e-6);
    }

    #[test]
    fn params_validation() {
        assert!(Params::new(1.0_f64, 4.0).is_ok());
        assert!(Params::new(0.0_f64, 4.0).is_err());
        assert!(Params::new(1.0_f64, -1.0).is_err());
        let tol = ToleranceSet::<f64> {
            flux: 0.0,
            ..ToleranceSet::default()
        };
        assert!(Params::with_tol(1.0, 1.0, tol).is_err());
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |x: f64| x * x * x - 2.0 * x + 1.0;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let v = hermite(0.5, f(0.5), df(0.5), 1.5, f(1.5), df(1.5), 0.9);
        assert!((v - f(0.9)).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn sigma2_is_positive_root(e in -3.0_f64..3.0) {
            let c = 10f64.powf(e);
            let s = sigma2(c).unwrap();
            prop_assert!((s * s + c * s - 1.0).abs() <= 1e-13);
            prop_assert!(s > 0.0 && s < 1.0);
        }

        #[test]
        fn lower_ratio_links_sigma2(e in -3.0_f64..3.0) {
            let c = 10f64.powf(e);
            let l = lower_ratio_l(c).unwrap();
            let lhs = 1.0 / l - 1.0;
            let rhs = sigma2(c).unwrap() / c;
            prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + rhs));
        }

        #[test]
        fn lower_ratio_increasing(e in -3.0_f64..2.9) {
            let c = 10f64.powf(e);
            prop_assert!(lower_ratio_l(c * 1.01).unwrap() > lower_ratio_l(c).unwrap());
        }

        #[test]
        fn bounds_are_ordered(d in 1e-3_f64..20.0) {
            prop_assert!(speed_lower_bound(d).unwrap() < speed_upper_bound(d).unwrap());
        }

        #[test]
        fn sigma1_below_sigma2(e in -3.0_f64..3.0, b in 1e-6_f64..0.999_999) {
            let c = 10f64.powf(e);
            prop_assert!(sigma1(c, b).unwrap() < sigma2(c).unwrap());
            prop_assert!(sigma1(c, b).unwrap() < sigma1(c, (b + 1e-6).min(1.0)).unwrap());
        }
    }
}
