//! Velocity laws and their derived quantities.
//!
//! A velocity law `v(rho)` induces the flux `f(rho) = rho * v(rho)` of the
//! conservation law and the Lagrangian characteristic speed
//! `phi(rho) = rho * v'(rho)`. Two closed families are supported:
//!
//! * power law: `v(rho) = v_max - rho^gamma`, `gamma > 0`;
//! * logarithmic: `v(rho) = v_max * ln(1/(rho+beta)) / ln(1/beta)`,
//!   `0 < beta < 1`.
//!
//! Both are strictly decreasing with non-increasing `phi`, so the flux is
//! strictly concave on the working range `[0, rho_bar]`. The divided ratio
//! `(phi(a)-phi(b)) / (v(a)-v(b))` is bounded by a per-family constant `K`
//! (`gamma` for the power law, `beta * exp(rho_bar)` for the logarithmic
//! family); [`VelocityModel::check_assumptions`] verifies those structural
//! properties numerically on a sampled grid.

use serde::Serialize;

use crate::error::{FtlError, Result};

/// Closed-form velocity family together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityKind {
    PowerLaw { v_max: f64, gamma: f64 },
    Logarithmic { v_max: f64, beta: f64 },
}

/// A velocity law plus the validity ceiling `rho_bar` it will be used under.
///
/// `rho_bar` is injected from the initial datum's sup-norm rather than being
/// an intrinsic model parameter; the discrete maximum principle guarantees
/// the dynamics never sample densities above it.
#[derive(Debug, Clone, Copy)]
pub struct VelocityModel {
    kind: VelocityKind,
    rho_bar: f64,
}

impl VelocityModel {
    pub fn new(kind: VelocityKind, rho_bar: f64) -> Result<Self> {
        if !(rho_bar >= 0.0) || !rho_bar.is_finite() {
            return Err(FtlError::InvalidConfig(format!(
                "rho_bar must be finite and non-negative, got {rho_bar}"
            )));
        }
        match kind {
            VelocityKind::PowerLaw { v_max, gamma } => {
                if !(v_max > 0.0) || !(gamma > 0.0) {
                    return Err(FtlError::InvalidConfig(format!(
                        "power law requires v_max > 0 and gamma > 0, got v_max={v_max}, gamma={gamma}"
                    )));
                }
            }
            VelocityKind::Logarithmic { v_max, beta } => {
                if !(v_max > 0.0) || !(beta > 0.0 && beta < 1.0) {
                    return Err(FtlError::InvalidConfig(format!(
                        "logarithmic law requires v_max > 0 and beta in (0,1), got v_max={v_max}, beta={beta}"
                    )));
                }
            }
        }
        Ok(Self { kind, rho_bar })
    }

    pub fn power_law(v_max: f64, gamma: f64, rho_bar: f64) -> Result<Self> {
        Self::new(VelocityKind::PowerLaw { v_max, gamma }, rho_bar)
    }

    pub fn logarithmic(v_max: f64, beta: f64, rho_bar: f64) -> Result<Self> {
        Self::new(VelocityKind::Logarithmic { v_max, beta }, rho_bar)
    }

    /// Same law with a different validity ceiling.
    pub fn with_rho_bar(self, rho_bar: f64) -> Result<Self> {
        Self::new(self.kind, rho_bar)
    }

    pub fn kind(&self) -> VelocityKind {
        self.kind
    }

    pub fn rho_bar(&self) -> f64 {
        self.rho_bar
    }

    /// `v(0)`, the free-flow speed.
    pub fn v_max(&self) -> f64 {
        match self.kind {
            VelocityKind::PowerLaw { v_max, .. } => v_max,
            VelocityKind::Logarithmic { v_max, .. } => v_max,
        }
    }

    pub fn is_power_law(&self) -> bool {
        matches!(self.kind, VelocityKind::PowerLaw { .. })
    }

    /// Exponent of the power law, if that is the active family.
    pub fn gamma(&self) -> Option<f64> {
        match self.kind {
            VelocityKind::PowerLaw { gamma, .. } => Some(gamma),
            VelocityKind::Logarithmic { .. } => None,
        }
    }

    fn check_rho(&self, rho: f64) -> Result<()> {
        if !rho.is_finite() || rho < 0.0 {
            return Err(FtlError::Domain(format!(
                "density must be finite and non-negative, got {rho}"
            )));
        }
        Ok(())
    }

    /// Velocity `v(rho)`.
    pub fn v(&self, rho: f64) -> Result<f64> {
        self.check_rho(rho)?;
        Ok(match self.kind {
            VelocityKind::PowerLaw { v_max, gamma } => {
                if rho == 0.0 {
                    v_max
                } else {
                    v_max - rho.powf(gamma)
                }
            }
            VelocityKind::Logarithmic { v_max, beta } => {
                if rho == 0.0 {
                    v_max
                } else {
                    v_max * (1.0 / (rho + beta)).ln() / (1.0 / beta).ln()
                }
            }
        })
    }

    /// First derivative `v'(rho)` in closed form.
    ///
    /// For the power law with `gamma < 1` this diverges to `-inf` at
    /// `rho = 0`; callers sampling the derivative must tolerate that.
    pub fn v_prime(&self, rho: f64) -> Result<f64> {
        self.check_rho(rho)?;
        Ok(match self.kind {
            VelocityKind::PowerLaw { gamma, .. } => -gamma * rho.powf(gamma - 1.0),
            VelocityKind::Logarithmic { v_max, beta } => {
                -v_max / (1.0 / beta).ln() / (rho + beta)
            }
        })
    }

    /// Second derivative `v''(rho)` in closed form.
    pub fn v_double_prime(&self, rho: f64) -> Result<f64> {
        self.check_rho(rho)?;
        Ok(match self.kind {
            VelocityKind::PowerLaw { gamma, .. } => {
                -gamma * (gamma - 1.0) * rho.powf(gamma - 2.0)
            }
            VelocityKind::Logarithmic { v_max, beta } => {
                let d = rho + beta;
                v_max / (1.0 / beta).ln() / (d * d)
            }
        })
    }

    /// Lagrangian characteristic speed `phi(rho) = rho * v'(rho)`.
    pub fn phi(&self, rho: f64) -> Result<f64> {
        self.check_rho(rho)?;
        Ok(match self.kind {
            VelocityKind::PowerLaw { gamma, .. } => {
                if rho == 0.0 {
                    0.0
                } else {
                    -gamma * rho.powf(gamma)
                }
            }
            VelocityKind::Logarithmic { v_max, beta } => {
                -v_max / (1.0 / beta).ln() * rho / (rho + beta)
            }
        })
    }

    /// Flux `f(rho) = rho * v(rho)`.
    pub fn flux(&self, rho: f64) -> Result<f64> {
        Ok(rho * self.v(rho)?)
    }

    /// Flux derivative `f'(rho) = v(rho) + phi(rho)`.
    ///
    /// For the power law this equals `v_max - (gamma+1) * rho^gamma` up to
    /// round-off.
    pub fn flux_prime(&self, rho: f64) -> Result<f64> {
        Ok(self.v(rho)? + self.phi(rho)?)
    }

    /// Family constant `K` bounding the divided ratio
    /// `(phi(a)-phi(b)) / (v(a)-v(b))` on `[0, rho_bar]`.
    pub fn declared_k(&self) -> f64 {
        match self.kind {
            VelocityKind::PowerLaw { gamma, .. } => gamma,
            VelocityKind::Logarithmic { beta, .. } => beta * self.rho_bar.exp(),
        }
    }

    /// Unique maximiser of the concave flux on `[0, +inf)`.
    ///
    /// Closed form for the power law; the logarithmic family uses a
    /// bisection on the strictly decreasing `f'`.
    pub fn flux_argmax(&self) -> f64 {
        match self.kind {
            VelocityKind::PowerLaw { v_max, gamma } => (v_max / (gamma + 1.0)).powf(1.0 / gamma),
            VelocityKind::Logarithmic { beta, .. } => {
                // Solve ln(1/(rho+beta)) = rho/(rho+beta); the bracket [0, 1]
                // always contains the root for beta in (0,1).
                let h = |rho: f64| (1.0 / (rho + beta)).ln() - rho / (rho + beta);
                let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if h(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Sample `[0, rho_bar]` on a uniform grid and verify the structural
    /// assumptions on `v` and `phi`. Violations are reported, never thrown.
    pub fn check_assumptions(&self, grid_size: usize) -> Result<AssumptionReport> {
        if grid_size < 2 {
            return Err(FtlError::InvalidInput(format!(
                "grid_size must be at least 2, got {grid_size}"
            )));
        }
        if !(self.rho_bar > 0.0) {
            return Err(FtlError::InvalidInput(
                "check_assumptions needs rho_bar > 0".into(),
            ));
        }

        let g = grid_size;
        let rho: Vec<f64> = (0..g)
            .map(|j| self.rho_bar * j as f64 / (g - 1) as f64)
            .collect();
        let v: Vec<f64> = rho.iter().map(|&r| self.v(r)).collect::<Result<_>>()?;
        let phi: Vec<f64> = rho.iter().map(|&r| self.phi(r)).collect::<Result<_>>()?;

        let mut v_prime_min = f64::INFINITY;
        let mut v_prime_max = f64::NEG_INFINITY;
        let mut nonfinite_v_prime = 0usize;
        for &r in &rho {
            let d = self.v_prime(r)?;
            if d.is_finite() {
                v_prime_min = v_prime_min.min(d);
                v_prime_max = v_prime_max.max(d);
            } else {
                nonfinite_v_prime += 1;
            }
        }

        let v_strictly_decreasing = v.windows(2).all(|w| w[0] > w[1]);
        let phi_non_increasing = phi.windows(2).all(|w| w[0] >= w[1]);

        let mut ratio_min = f64::INFINITY;
        let mut ratio_max = f64::NEG_INFINITY;
        for i in 0..g {
            for j in (i + 1)..g {
                let dv = v[i] - v[j];
                if dv == 0.0 {
                    continue;
                }
                let ratio = (phi[i] - phi[j]) / dv;
                ratio_min = ratio_min.min(ratio);
                ratio_max = ratio_max.max(ratio);
            }
        }

        // K-tilde of the sufficient criterion: max |rho v''(rho) / v'(rho)|,
        // with v'' estimated by a central difference of the closed-form v'.
        // rho = 0 is skipped; v' may be unbounded or vanish there.
        let mut k_tilde = 0.0_f64;
        for &r in rho.iter().skip(1) {
            let h = (1e-6 * self.rho_bar).min(0.5 * r);
            let d2 = (self.v_prime(r + h)? - self.v_prime(r - h)?) / (2.0 * h);
            let d1 = self.v_prime(r)?;
            if d1.is_finite() && d1 != 0.0 && d2.is_finite() {
                k_tilde = k_tilde.max((r * d2 / d1).abs());
            }
        }

        Ok(AssumptionReport {
            grid_size: g,
            rho_bar: self.rho_bar,
            v_prime_min,
            v_prime_max,
            nonfinite_v_prime,
            v_strictly_decreasing,
            phi_non_increasing,
            ratio_min,
            ratio_max,
            declared_k: self.declared_k(),
            k_tilde,
        })
    }
}

/// Sampled verification of the structural assumptions on a velocity law.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub grid_size: usize,
    pub rho_bar: f64,
    pub v_prime_min: f64,
    pub v_prime_max: f64,
    /// Grid points where `v'` was not finite (e.g. `rho = 0` for a power law
    /// with `gamma < 1`); excluded from the min/max above.
    pub nonfinite_v_prime: usize,
    pub v_strictly_decreasing: bool,
    pub phi_non_increasing: bool,
    /// Extremes of `(phi(a)-phi(b)) / (v(a)-v(b))` over all distinct sampled
    /// pairs; must land in `[0, declared_k]` up to tolerance.
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub declared_k: f64,
    /// Finite-difference estimate of `max |rho v''(rho) / v'(rho)|`.
    pub k_tilde: f64,
}

impl AssumptionReport {
    /// All structural checks within an absolute tolerance.
    pub fn passes(&self, tol: f64) -> bool {
        self.v_strictly_decreasing
            && self.phi_non_increasing
            && self.v_prime_max <= tol
            && self.ratio_min >= -tol
            && self.ratio_max <= self.declared_k + tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn power(v_max: f64, gamma: f64, rho_bar: f64) -> VelocityModel {
        VelocityModel::power_law(v_max, gamma, rho_bar).unwrap()
    }

    fn log(v_max: f64, beta: f64, rho_bar: f64) -> VelocityModel {
        VelocityModel::logarithmic(v_max, beta, rho_bar).unwrap()
    }

    #[test]
    fn v_closed_forms() {
        let m = power(1.0, 1.0, 1.0);
        assert_eq!(m.v(0.5).unwrap(), 0.5);
        assert_eq!(m.v(0.0).unwrap(), 1.0);

        let m = log(1.0, 0.5, 1.0);
        assert_eq!(m.v(0.0).unwrap(), 1.0);
        // ln(1/(0.5+0.5)) = 0 exactly.
        assert_eq!(m.v(0.5).unwrap(), 0.0);
        // Independent evaluation of the logarithmic form at a generic point.
        let rho = 0.3_f64;
        let direct = -(0.8_f64).ln() / 2.0_f64.ln();
        assert_relative_eq!(m.v(rho).unwrap(), direct, epsilon = 1e-14);
    }

    #[test]
    fn v_rejects_negative_density() {
        let m = power(1.0, 1.0, 1.0);
        assert!(matches!(m.v(-0.1), Err(FtlError::Domain(_))));
        assert!(matches!(m.phi(-1e-9), Err(FtlError::Domain(_))));
        assert!(matches!(m.flux_prime(f64::NAN), Err(FtlError::Domain(_))));
    }

    #[test]
    fn phi_closed_forms() {
        let m = power(1.0, 1.0, 1.0);
        assert_eq!(m.phi(0.5).unwrap(), -0.5);
        assert_eq!(m.phi(0.0).unwrap(), 0.0);

        // phi = -v_max [ln(1/beta)]^{-1} rho/(rho+beta); at beta = 0.25,
        // rho = 0.75 the denominator rho+beta is exactly 1.
        let m = log(1.0, 0.25, 1.0);
        let expected = -0.75 / 4.0_f64.ln();
        assert_relative_eq!(m.phi(0.75).unwrap(), expected, epsilon = 1e-15);
    }

    #[test]
    fn flux_prime_matches_power_law_closed_form() {
        let m = power(1.0, 1.0, 1.0);
        assert_abs_diff_eq!(m.flux_prime(0.25).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(m.flux_prime(0.0).unwrap(), 1.0);

        for gamma in [0.5, 1.0, 2.0, 3.5] {
            let m = power(1.3, gamma, 1.0);
            for k in 0..=20 {
                let rho = k as f64 / 20.0;
                let closed = 1.3 - (gamma + 1.0) * rho.powf(gamma);
                assert_abs_diff_eq!(m.flux_prime(rho).unwrap(), closed, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn flux_prime_matches_central_difference() {
        // f'(rho) against the centered difference of rho -> rho * v(rho).
        let h = 1e-6;
        for m in [power(1.0, 1.5, 1.0), log(1.0, 0.5, 1.0)] {
            for k in 1..=9 {
                let rho = k as f64 / 10.0;
                let fd = (m.flux(rho + h).unwrap() - m.flux(rho - h).unwrap()) / (2.0 * h);
                assert_abs_diff_eq!(m.flux_prime(rho).unwrap(), fd, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn flux_prime_strictly_decreasing() {
        for m in [power(1.0, 0.5, 1.0), power(1.0, 2.0, 1.0), log(1.0, 0.5, 1.0)] {
            let mut prev = f64::INFINITY;
            for k in 0..=256 {
                let rho = k as f64 / 256.0;
                let fp = m.flux_prime(rho).unwrap();
                assert!(fp < prev, "f' not strictly decreasing at rho={rho}");
                prev = fp;
            }
        }
    }

    #[test]
    fn power_law_ratio_is_gamma() {
        let report = power(1.0, 2.0, 1.0).check_assumptions(128).unwrap();
        assert_abs_diff_eq!(report.ratio_min, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.ratio_max, 2.0, epsilon = 1e-12);
        assert!(report.passes(1e-8));

        // Relative spread over a finer grid stays within 1e-10.
        let report = power(2.0, 0.7, 1.4).check_assumptions(512).unwrap();
        assert!((report.ratio_max - 0.7).abs() / 0.7 < 1e-10);
        assert!((report.ratio_min - 0.7).abs() / 0.7 < 1e-10);
    }

    #[test]
    fn k_tilde_matches_known_values() {
        // Power law: |gamma - 1|.
        let report = power(1.0, 1.0, 1.0).check_assumptions(256).unwrap();
        assert_abs_diff_eq!(report.k_tilde, 0.0, epsilon = 1e-6);
        let report = power(1.0, 2.0, 1.0).check_assumptions(256).unwrap();
        assert_abs_diff_eq!(report.k_tilde, 1.0, epsilon = 1e-4);

        // Logarithmic: rho_bar / (beta + rho_bar) = 2/3 at beta=0.5, rho_bar=1.
        let report = log(1.0, 0.5, 1.0).check_assumptions(256).unwrap();
        assert_abs_diff_eq!(report.k_tilde, 2.0 / 3.0, epsilon = 1e-4);
    }

    #[test]
    fn logarithmic_ratio_within_declared_k() {
        // beta e^{rho_bar} >= 1 on this configuration, so the declared bound
        // dominates the sampled ratio.
        let report = log(1.0, 0.5, 0.8).check_assumptions(512).unwrap();
        assert!(report.ratio_min >= -1e-12);
        assert!(report.ratio_max <= report.declared_k + 1e-12);
        assert!(report.passes(1e-8));
    }

    #[test]
    fn gamma_below_one_handles_derivative_blowup() {
        let report = power(1.0, 0.5, 1.0).check_assumptions(128).unwrap();
        assert_eq!(report.nonfinite_v_prime, 1); // rho = 0 only
        assert!(report.passes(1e-8));
    }

    #[test]
    fn flux_argmax_zeroes_flux_prime() {
        for m in [power(1.0, 0.5, 1.0), power(1.0, 2.0, 1.0), log(1.0, 0.5, 1.0)] {
            let star = m.flux_argmax();
            assert_abs_diff_eq!(m.flux_prime(star).unwrap(), 0.0, epsilon = 1e-12);
        }
        // Closed form for gamma = 1: v_max / (gamma + 1).
        assert_abs_diff_eq!(power(1.0, 1.0, 1.0).flux_argmax(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(VelocityModel::power_law(1.0, 0.0, 1.0).is_err());
        assert!(VelocityModel::power_law(0.0, 1.0, 1.0).is_err());
        assert!(VelocityModel::logarithmic(1.0, 1.0, 1.0).is_err());
        assert!(VelocityModel::logarithmic(1.0, 0.0, 1.0).is_err());
        assert!(VelocityModel::power_law(1.0, 1.0, f64::NAN).is_err());
    }
}
