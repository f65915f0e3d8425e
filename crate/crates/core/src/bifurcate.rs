//! Bifurcation points of the circular family `α(t) = (a0, 0, t)`.
//!
//! Odd solutions branch off at `T0 = π·sqrt(r0³/(nm+M))` and odd/even
//! solutions at `T0/2`. Both are nondegenerate unless the ratio
//! `s = sqrt((λn·m+M)/(nm+M))` is a positive integer (an even one for the
//! odd/even case). The module also evaluates the closed-form second
//! derivative of `Θ` along the odd branch and an independent numerical value
//! obtained from the integral curve of the tangent field.

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::IntegratorConfig;
use crate::model::SystemParams;
use crate::shoot::{residual_jet, SeedPoint, ShootError, Shooter, SymmetryKind};

/// `|s − round(s)|` below which `s` is treated as an integer.
pub const INTEGER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BifurcationError {
    #[error("coefficient {0} is singular: its denominator vanishes for these parameters")]
    SingularCoefficient(char),
    #[error(transparent)]
    Shoot(#[from] ShootError),
}

/// Outcome of the nondegeneracy test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nondegeneracy {
    pub nondegenerate: bool,
    /// `|2 sin(πs)|` (odd) or `|2 sin(πs/2)|` (odd/even).
    pub margin: f64,
    pub s: f64,
    /// The offending integer when the test fails.
    pub resonant_integer: Option<u64>,
}

/// Closed-form `ξ″(0)` and its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiSecondDerivative {
    #[serde(rename = "A")]
    pub coef_a: f64,
    #[serde(rename = "B")]
    pub coef_b: f64,
    pub r_at: f64,
    pub xi1: f64,
    pub xi2: f64,
}

/// Numerical derivatives of `ξ(τ) = Θ(β(τ))` at `τ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericalXi {
    pub tau: f64,
    pub xi1: f64,
    pub xi2: f64,
    /// `β(τ)` and `β(−τ)`.
    pub forward: [f64; 3],
    pub backward: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationReport {
    pub kind: SymmetryKind,
    pub point: SeedPoint,
    pub s: f64,
    pub margin: f64,
    pub nondegenerate: bool,
    /// Closed-form `ξ″(0)`; odd kind only, absent when a coefficient is singular.
    pub xi2: Option<f64>,
    pub theta0: f64,
    pub exact: ExactForms,
}

/// Symbolic renderings of the bifurcation coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactForms {
    pub a0: String,
    #[serde(rename = "T")]
    pub t: String,
}

/// `s = sqrt((λn·m+M)/(nm+M))`, the ratio of radial to axial frequency.
pub fn resonance_ratio(params: &SystemParams) -> f64 {
    (params.ring_attraction() / params.total_mass()).sqrt()
}

/// Integer `p` with `|s − p| < INTEGER_TOL`, restricted to even `p` for the
/// odd/even kind.
pub fn degenerate_integer(s: f64, kind: SymmetryKind) -> Option<u64> {
    let p = s.round();
    if p < 1.0 || (s - p).abs() >= INTEGER_TOL {
        return None;
    }
    let p = p as u64;
    match kind {
        SymmetryKind::Odd => Some(p),
        SymmetryKind::OddEven => p.is_even().then_some(p),
    }
}

/// Degeneracy margin `|R_at|` at the bifurcation point for a given ratio.
pub fn margin_for_ratio(s: f64, kind: SymmetryKind) -> f64 {
    match kind {
        SymmetryKind::Odd => (2.0 * (PI * s).sin()).abs(),
        SymmetryKind::OddEven => (2.0 * (PI * s / 2.0).sin()).abs(),
    }
}

/// `λn − (np² + (M/m)(p² − 1))`, zero exactly when the hypothesis fails at `p`.
pub fn lambda_condition_residual(lambda: f64, n: f64, m: f64, axial_mass: f64, p: u64) -> f64 {
    let p2 = (p * p) as f64;
    lambda - (n * p2 + axial_mass / m * (p2 - 1.0))
}

pub fn nondegeneracy(params: &SystemParams, kind: SymmetryKind) -> Nondegeneracy {
    let s = resonance_ratio(params);
    let resonant_integer = degenerate_integer(s, kind);
    Nondegeneracy {
        nondegenerate: resonant_integer.is_none(),
        margin: margin_for_ratio(s, kind),
        s,
        resonant_integer,
    }
}

/// Shooting time at the bifurcation point.
pub fn bifurcation_time(params: &SystemParams, kind: SymmetryKind) -> f64 {
    match kind {
        SymmetryKind::Odd => params.t0(),
        SymmetryKind::OddEven => params.t0() / 2.0,
    }
}

pub fn bifurcation_point(params: &SystemParams, kind: SymmetryKind) -> BifurcationReport {
    let a0 = params.a0();
    let t = bifurcation_time(params, kind);
    let theta0 = a0 * t / params.r0();
    let nd = nondegeneracy(params, kind);
    let xi2 = match kind {
        SymmetryKind::Odd => xi_second_derivative(params).ok().map(|x| x.xi2),
        SymmetryKind::OddEven => None,
    };
    BifurcationReport {
        kind,
        point: SeedPoint {
            a: a0,
            b: 0.0,
            t,
            kind,
            residual: 0.0,
            theta: theta0,
        },
        s: nd.s,
        margin: nd.margin,
        nondegenerate: nd.nondegenerate,
        xi2,
        theta0,
        exact: exact_forms(params, kind),
    }
}

/// `ξ″(0) = (A + B·R_at)·R_at²` with `A`, `B` as published.
pub fn xi_second_derivative(params: &SystemParams) -> Result<XiSecondDerivative, BifurcationError> {
    let n = params.n() as f64;
    let m = params.m();
    let big_m = params.axial_mass();
    let r0 = params.r0();
    let lambda = params.lambda();

    let lm = lambda * m + big_m;
    let q = (lm / r0.powi(3)).sqrt();
    let den_a = -lambda * m + 4.0 * m * n + 3.0 * big_m;
    let den_b = lambda * m - 3.0 * big_m - 4.0 * m * n;
    if den_a == 0.0 {
        return Err(BifurcationError::SingularCoefficient('A'));
    }
    if den_b == 0.0 {
        return Err(BifurcationError::SingularCoefficient('B'));
    }

    let coef_a = 3.0
        * r0.powf(2.5)
        * PI
        * (9.0 * lm * (lambda * m + 24.0 * big_m - 4.0 * m * n + 16.0 * big_m * q)
            - 8.0 * big_m * (big_m + m * n) * (9.0 + 8.0 * q))
        / (16.0 * m * m * n * n * den_a * lm.sqrt());
    let coef_b = 9.0 * big_m * r0.powf(2.5) * (big_m + m * n).powf(2.5) * (3.0 + 2.0 * q)
        / (m * m * n * n * lm * den_b * den_b);
    let r_at = 2.0 * (PI * resonance_ratio(params)).sin();
    Ok(XiSecondDerivative {
        coef_a,
        coef_b,
        r_at,
        xi1: 0.0,
        xi2: (coef_a + coef_b * r_at) * r_at * r_at,
    })
}

/// Derivatives of `Θ` along the integral curve `β′ = X(β)`, `β(0) = p0`, of
/// the unnormalised tangent field, by central differences at `±tau`.
///
/// `X` is tangent to both level sets, so the curve stays on the branch up to
/// the RK4 truncation error; `steps` RK4 steps are taken in each direction.
pub fn numerical_xi(
    params: &SystemParams,
    integrator: &IntegratorConfig,
    tau: f64,
    steps: usize,
) -> Result<NumericalXi, BifurcationError> {
    let shooter = Shooter::new(*params, *integrator);
    let kind = SymmetryKind::Odd;
    let p0 = Vector3::new(params.a0(), 0.0, params.t0());

    let field = |x: &Vector3<f64>| -> Result<Vector3<f64>, BifurcationError> {
        let e = shooter.evaluate(x.x, x.y, x.z, true)?;
        Ok(residual_jet(&e, kind).tangent_field())
    };
    let trace = |h: f64| -> Result<Vector3<f64>, BifurcationError> {
        let mut x = p0;
        for _ in 0..steps {
            let k1 = field(&x)?;
            let k2 = field(&(x + k1 * (h / 2.0)))?;
            let k3 = field(&(x + k2 * (h / 2.0)))?;
            let k4 = field(&(x + k3 * h))?;
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        Ok(x)
    };
    let theta = |x: &Vector3<f64>| -> Result<f64, BifurcationError> {
        Ok(shooter.evaluate(x.x, x.y, x.z, false)?.theta)
    };

    let h = tau / steps as f64;
    let fwd = trace(h)?;
    let bwd = trace(-h)?;
    let (xp, x0, xm) = (theta(&fwd)?, theta(&p0)?, theta(&bwd)?);
    Ok(NumericalXi {
        tau,
        xi1: (xp - xm) / (2.0 * tau),
        xi2: (xp - 2.0 * x0 + xm) / (tau * tau),
        forward: [fwd.x, fwd.y, fwd.z],
        backward: [bwd.x, bwd.y, bwd.z],
    })
}

fn exact_forms(params: &SystemParams, kind: SymmetryKind) -> ExactForms {
    let r0 = params.r0();
    let lam = match params.n() {
        2 => "1/4".to_string(),
        3 => "1/sqrt(3)".to_string(),
        4 => "(1+2*sqrt(2))/4".to_string(),
        n => format!("lambda_{n}"),
    };
    let a0 = format!(
        "sqrt(({}*{} + {})/{})",
        lam,
        number(params.m()),
        number(params.axial_mass()),
        number(r0)
    );

    let total = params.total_mass();
    let mut t = match (as_integer(r0), as_integer(total)) {
        (Some(r), Some(d)) => {
            let g = r.gcd(&d);
            let (num, den) = (r / g, d / g);
            if den == 1 {
                format!("{r}*sqrt({num})*pi")
            } else {
                format!("{r}*sqrt({num}/{den})*pi")
            }
        }
        _ => format!("{}*sqrt({}/{})*pi", number(r0), number(r0), number(total)),
    };
    if kind == SymmetryKind::OddEven {
        t.push_str("/2");
    }
    ExactForms { a0, t }
}

fn as_integer(x: f64) -> Option<u64> {
    (x.fract() == 0.0 && x > 0.0 && x < 1e15).then_some(x as u64)
}

fn number(x: f64) -> String {
    match as_integer(x) {
        Some(i) => i.to_string(),
        None => format!("{x}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small() -> SystemParams {
        SystemParams::new(3, 3.0, 7.0, 11.0).unwrap()
    }

    fn large() -> SystemParams {
        SystemParams::new(3, 92.0, 242.0, 11.0).unwrap()
    }

    #[test]
    fn odd_point_small_masses() {
        let r = bifurcation_point(&small(), SymmetryKind::Odd);
        assert_relative_eq!(
            r.point.a,
            ((3f64.sqrt() + 7.0) / 11.0).sqrt(),
            epsilon = 1e-15
        );
        assert_relative_eq!(r.point.t, 11.0 * 11f64.sqrt() * PI / 4.0, epsilon = 1e-12);
        assert_eq!(r.point.b, 0.0);
        assert!((r.point.a - 0.890967).abs() < 1e-6);
        assert!((r.point.t - 28.6536).abs() < 1e-4);
        assert_relative_eq!(
            r.theta0,
            PI * (7.0 + 3f64.sqrt()).sqrt() / 4.0,
            epsilon = 1e-12
        );
        assert!(r.nondegenerate);
        assert!(r.xi2.is_some());
    }

    #[test]
    fn odd_even_time_is_half() {
        let p = small();
        let odd = bifurcation_point(&p, SymmetryKind::Odd);
        let oe = bifurcation_point(&p, SymmetryKind::OddEven);
        assert_eq!(oe.point.t, odd.point.t / 2.0);
        assert!(oe.xi2.is_none());
        assert_eq!(oe.exact.t, format!("{}/2", odd.exact.t));
    }

    #[test]
    fn large_masses_exact_form() {
        let r = bifurcation_point(&large(), SymmetryKind::Odd);
        assert_eq!(r.exact.t, "11*sqrt(11/518)*pi");
        assert_eq!(r.exact.a0, "sqrt((1/sqrt(3)*92 + 242)/11)");
        assert_relative_eq!(
            r.point.t,
            11.0 * (11.0f64 / 518.0).sqrt() * PI,
            epsilon = 1e-13
        );
        assert!((r.point.a - 5.17965).abs() < 1e-5);
    }

    #[test]
    fn ratio_and_margin_small() {
        let nd = nondegeneracy(&small(), SymmetryKind::Odd);
        assert_relative_eq!(nd.s, ((3f64.sqrt() + 7.0) / 16.0).sqrt(), epsilon = 1e-15);
        assert!((nd.s - 0.73878).abs() < 1e-4);
        assert!((nd.margin - 1.462).abs() < 2e-3);
        assert!(nondegeneracy(&small(), SymmetryKind::OddEven).nondegenerate);
        assert!(nondegeneracy(&large(), SymmetryKind::Odd).nondegenerate);
    }

    #[test]
    fn integer_ratio_detection() {
        assert_eq!(degenerate_integer(2.0, SymmetryKind::Odd), Some(2));
        assert_eq!(degenerate_integer(2.0, SymmetryKind::OddEven), Some(2));
        assert_eq!(degenerate_integer(3.0 + 1e-11, SymmetryKind::Odd), Some(3));
        assert_eq!(degenerate_integer(3.0, SymmetryKind::OddEven), None);
        assert_eq!(degenerate_integer(2.0 + 1e-7, SymmetryKind::Odd), None);
        assert_eq!(degenerate_integer(0.0, SymmetryKind::Odd), None);
        assert!(margin_for_ratio(2.0, SymmetryKind::Odd) < 1e-14);
        assert!(margin_for_ratio(2.0, SymmetryKind::OddEven) < 1e-14);
        assert!(margin_for_ratio(1.0, SymmetryKind::OddEven) > 1.99);
    }

    #[test]
    fn lambda_form_agrees_with_ratio_form() {
        // Synthetic (λ, n, m, M) chosen so that s = p exactly.
        for p in 1..6u64 {
            let (n, m, big_m) = (3.0, 2.0, 5.0);
            let p2 = (p * p) as f64;
            let lambda = (p2 * (n * m + big_m) - big_m) / m;
            let s = ((lambda * m + big_m) / (n * m + big_m)).sqrt();
            assert_eq!(degenerate_integer(s, SymmetryKind::Odd), Some(p));
            assert!(lambda_condition_residual(lambda, n, m, big_m, p).abs() < 1e-12);
        }
    }

    #[test]
    fn physical_params_pass_first_integer() {
        for n in 2..12 {
            let p = SystemParams::new(n, 1.0, 0.0, 1.0).unwrap();
            let nd = nondegeneracy(&p, SymmetryKind::Odd);
            assert!(nd.s < 1.0);
            assert!(nd.nondegenerate);
        }
    }

    #[test]
    fn xi_is_deterministic_and_finite() {
        let x = xi_second_derivative(&small()).unwrap();
        assert_eq!(x, xi_second_derivative(&small()).unwrap());
        assert!(x.xi2.is_finite());
        assert_eq!(x.xi1, 0.0);
        assert_relative_eq!(x.r_at, 2.0 * (PI * resonance_ratio(&small())).sin());
    }

    #[test]
    fn numerical_xi_first_derivative_vanishes() {
        let nx = numerical_xi(&small(), &IntegratorConfig::default(), 1e-2, 4).unwrap();
        assert!(nx.xi1.abs() < 1e-6, "{}", nx.xi1);
        assert!(nx.xi2 > 0.0);
        // The curve leaves the circular family in b and b ↦ −b maps it to itself.
        assert!(nx.forward[1].abs() > 1e-3);
        assert_relative_eq!(nx.forward[1], -nx.backward[1], max_relative = 1e-9);
        assert_relative_eq!(nx.forward[0], nx.backward[0], max_relative = 1e-12);
    }
}
