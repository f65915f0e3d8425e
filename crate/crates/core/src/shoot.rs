//! Symmetric periodicity conditions and a Newton corrector for them.
//!
//! An *odd* solution has `F(a,b,T) = 0` and `R_t(a,b,T) = 0`; `f` is then odd
//! and `r` even about `t = 0`, and both are `2T`-periodic. An *odd/even*
//! solution has `F_t = R_t = 0` at `T` and is `4T`-periodic. Dividing the first
//! condition by `b` removes the trivial circular family `b = 0` from the zero
//! set and leaves a curve that crosses it at the bifurcation points.

use std::fmt;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3, Vector5};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::{eval_at, flow, Evaluation, IntegrateError, IntegratorConfig};
use crate::model::{ReducedState, ReducedSystem, SystemParams};

/// Largest Jacobian condition number the corrector accepts.
pub const MAX_CONDITION: f64 = 1e12;
/// Default corrector tolerance on the residual max-norm.
pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShootError {
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error("corrector did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("singular Jacobian (condition number {condition:e})")]
    SingularJacobian { condition: f64 },
    #[error("line search failed at iteration {iteration} (residual {residual:e})")]
    LineSearch { iteration: usize, residual: f64 },
    #[error("invalid point: {0}")]
    InvalidPoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryKind {
    Odd,
    OddEven,
}

impl SymmetryKind {
    /// Number of shooting intervals `T` in one period of `(f, r)`.
    pub fn period_multiple(self) -> f64 {
        match self {
            SymmetryKind::Odd => 2.0,
            SymmetryKind::OddEven => 4.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SymmetryKind::Odd => "odd",
            SymmetryKind::OddEven => "odd_even",
        }
    }
}

impl fmt::Display for SymmetryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SymmetryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "odd" => Ok(SymmetryKind::Odd),
            "odd_even" | "odd-even" | "oddeven" => Ok(SymmetryKind::OddEven),
            other => Err(format!(
                "unknown symmetry kind '{other}' (expected odd or odd-even)"
            )),
        }
    }
}

/// A candidate or accepted shooting point `(a, b, T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedPoint {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub kind: SymmetryKind,
    /// Max-norm of the desingularised residual at the point.
    pub residual: f64,
    /// `Θ(a, b, T)`.
    pub theta: f64,
}

impl SeedPoint {
    /// An unevaluated point; `residual` and `theta` are NaN until evaluated.
    pub fn new(a: f64, b: f64, t: f64, kind: SymmetryKind) -> Self {
        SeedPoint {
            a,
            b,
            t,
            kind,
            residual: f64::NAN,
            theta: f64::NAN,
        }
    }

    pub fn coords(&self) -> Vector3<f64> {
        Vector3::new(self.a, self.b, self.t)
    }

    fn validate(&self) -> Result<(), ShootError> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(ShootError::InvalidPoint(format!(
                "a must be positive, got {}",
                self.a
            )));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(ShootError::InvalidPoint(format!(
                "T must be positive, got {}",
                self.t
            )));
        }
        if !self.b.is_finite() {
            return Err(ShootError::InvalidPoint(format!(
                "b must be finite, got {}",
                self.b
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("seed point serializes")
    }
}

/// Desingularised residual and its gradient with respect to `(a, b, T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualJet {
    pub value: Vector2<f64>,
    /// Rows: gradient of the first (axial) and second (`R_t`) condition.
    pub gradient: [Vector3<f64>; 2],
}

impl ResidualJet {
    /// Unnormalised tangent field `X = ∇ρ̃₁ × ∇ρ₂` of the solution curve.
    pub fn tangent_field(&self) -> Vector3<f64> {
        self.gradient[0].cross(&self.gradient[1])
    }
}

/// The axial and radial conditions for `kind`, in desingularised form.
pub fn desingularized_value(eval: &Evaluation, kind: SymmetryKind) -> Vector2<f64> {
    match kind {
        SymmetryKind::Odd => Vector2::new(eval.u, eval.rt),
        SymmetryKind::OddEven => Vector2::new(eval.ut, eval.rt),
    }
}

/// Residual value and `(a, b, T)` gradient from an augmented evaluation. The
/// `T` column is the right-hand side at the end state.
pub fn residual_jet(eval: &Evaluation, kind: SymmetryKind) -> ResidualJet {
    let s = eval
        .sens
        .as_ref()
        .expect("residual jet needs an augmented evaluation");
    let axial = match kind {
        SymmetryKind::Odd => Vector3::new(s.u_a, s.u_b, eval.ut),
        SymmetryKind::OddEven => Vector3::new(s.ut_a, s.ut_b, eval.utt),
    };
    let radial = Vector3::new(s.rt_a, s.rt_b, eval.rtt);
    ResidualJet {
        value: desingularized_value(eval, kind),
        gradient: [axial, radial],
    }
}

/// Side condition for the Newton corrector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    /// Solve for `(a, T)` with `b` held at the given value.
    FixedB(f64),
    /// Solve for `(a, b, T)` on the plane `⟨x - origin, normal⟩ = 0`.
    Hyperplane {
        origin: Vector3<f64>,
        normal: Vector3<f64>,
    },
}

/// Result of a successful correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub point: SeedPoint,
    pub iterations: usize,
    pub evaluation: Evaluation,
}

/// Evaluates the symmetry conditions for one parameter set.
#[derive(Debug, Clone, Copy)]
pub struct Shooter {
    pub params: SystemParams,
    pub integrator: IntegratorConfig,
}

impl Shooter {
    pub fn new(params: SystemParams, integrator: IntegratorConfig) -> Self {
        Shooter { params, integrator }
    }

    pub fn evaluate(
        &self,
        a: f64,
        b: f64,
        t: f64,
        augmented: bool,
    ) -> Result<Evaluation, ShootError> {
        Ok(eval_at(a, b, t, &self.params, &self.integrator, augmented)?)
    }

    /// Raw conditions: `(F, R_t)` for odd points, `(F_t, R_t)` for odd/even.
    pub fn residual(&self, point: &SeedPoint) -> Result<Vector2<f64>, ShootError> {
        point.validate()?;
        let e = self.evaluate(point.a, point.b, point.t, false)?;
        Ok(match point.kind {
            SymmetryKind::Odd => Vector2::new(e.f, e.rt),
            SymmetryKind::OddEven => Vector2::new(e.ft, e.rt),
        })
    }

    /// Desingularised conditions: `(F/b, R_t)` or `(F_t/b, R_t)`, continuous
    /// across `b = 0` where they become `(F_b, R_t)` and `(F_bt, R_t)`.
    pub fn residual_desing(&self, point: &SeedPoint) -> Result<Vector2<f64>, ShootError> {
        point.validate()?;
        let e = self.evaluate(point.a, point.b, point.t, false)?;
        Ok(desingularized_value(&e, point.kind))
    }

    /// Fills in `residual` and `theta` for `point`.
    pub fn annotate(&self, point: &SeedPoint) -> Result<SeedPoint, ShootError> {
        point.validate()?;
        let e = self.evaluate(point.a, point.b, point.t, false)?;
        Ok(SeedPoint {
            residual: desingularized_value(&e, point.kind).amax(),
            theta: e.theta,
            ..*point
        })
    }

    /// Newton iteration with a halving line search on the residual max-norm.
    pub fn newton_correct(
        &self,
        guess: &SeedPoint,
        constraint: Constraint,
        tol: f64,
        max_iter: usize,
    ) -> Result<Correction, ShootError> {
        let kind = guess.kind;
        let mut x = guess.coords();
        if let Constraint::FixedB(b) = constraint {
            x.y = b;
        }
        SeedPoint::new(x.x, x.y, x.z, kind).validate()?;

        let defect = |x: &Vector3<f64>, e: &Evaluation| -> Vector3<f64> {
            let v = desingularized_value(e, kind);
            let extra = match constraint {
                Constraint::FixedB(_) => 0.0,
                Constraint::Hyperplane { origin, normal } => (x - origin).dot(&normal),
            };
            Vector3::new(v.x, v.y, extra)
        };

        let mut eval = self.evaluate(x.x, x.y, x.z, true)?;
        let mut res = defect(&x, &eval);
        let mut norm = res.amax();
        let mut iterations = 0;

        while norm > tol {
            if iterations >= max_iter {
                return Err(ShootError::MaxIterations {
                    iterations,
                    residual: norm,
                });
            }
            iterations += 1;
            let jet = residual_jet(&eval, kind);
            let step = newton_step(&jet, &res, &constraint)?;

            let mut accepted = None;
            let mut lambda = 1.0;
            for _ in 0..=MAX_HALVINGS {
                let trial = x + step * lambda;
                if trial.x > 0.0 && trial.z > 0.0 {
                    if let Ok(e) = self.evaluate(trial.x, trial.y, trial.z, true) {
                        let r = defect(&trial, &e);
                        if r.amax() < norm {
                            accepted = Some((trial, e, r));
                            break;
                        }
                    }
                }
                lambda *= 0.5;
            }
            let Some((trial, e, r)) = accepted else {
                return Err(ShootError::LineSearch {
                    iteration: iterations,
                    residual: norm,
                });
            };
            x = trial;
            eval = e;
            res = r;
            norm = res.amax();
        }

        Ok(Correction {
            point: SeedPoint {
                a: x.x,
                b: x.y,
                t: x.z,
                kind,
                residual: desingularized_value(&eval, kind).amax(),
                theta: eval.theta,
            },
            iterations,
            evaluation: eval,
        })
    }

    /// Largest deviation of `(f, ḟ, r, ṙ)` after one full period (`2T` or `4T`)
    /// from its initial value.
    pub fn periodicity_defect(&self, point: &SeedPoint) -> Result<f64, ShootError> {
        point.validate()?;
        let period = point.kind.period_multiple() * point.t;
        let end = self.flow_state(point, period)?;
        let start = ReducedState::initial(&self.params, point.b);
        Ok([
            end.f - start.f,
            end.fdot - start.fdot,
            end.r - start.r,
            end.rdot - start.rdot,
        ]
        .iter()
        .fold(0.0f64, |m, d| m.max(d.abs())))
    }

    /// Reduced state at time `t` along the orbit launched from `point`.
    pub fn flow_state(&self, point: &SeedPoint, t: f64) -> Result<ReducedState, ShootError> {
        let system = ReducedSystem::new(self.params, point.a);
        let y0: Vector5<f64> = ReducedState::initial(&self.params, point.b).to_vector();
        let mut cfg = self.integrator;
        if cfg.h_max.is_none() {
            cfg.h_max = Some(point.t.abs() / 16.0);
        }
        let res = flow(&system, 0.0, y0, t, &cfg, false)?;
        Ok(ReducedState::from_vector(t, &res.y_end))
    }
}

fn newton_step(
    jet: &ResidualJet,
    res: &Vector3<f64>,
    constraint: &Constraint,
) -> Result<Vector3<f64>, ShootError> {
    let [g1, g2] = jet.gradient;
    match constraint {
        Constraint::FixedB(_) => {
            let j = Matrix2::new(g1.x, g1.z, g2.x, g2.z);
            check_condition(j.singular_values().as_slice())?;
            let dx = j.lu().solve(&Vector2::new(-res.x, -res.y)).ok_or(
                ShootError::SingularJacobian {
                    condition: f64::INFINITY,
                },
            )?;
            Ok(Vector3::new(dx.x, 0.0, dx.y))
        }
        Constraint::Hyperplane { normal, .. } => {
            let j = Matrix3::from_rows(&[g1.transpose(), g2.transpose(), normal.transpose()]);
            check_condition(j.singular_values().as_slice())?;
            j.lu().solve(&(-res)).ok_or(ShootError::SingularJacobian {
                condition: f64::INFINITY,
            })
        }
    }
}

fn check_condition(singular_values: &[f64]) -> Result<(), ShootError> {
    let max = singular_values.iter().cloned().fold(0.0, f64::max);
    let min = singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if condition > MAX_CONDITION || !condition.is_finite() {
        return Err(ShootError::SingularJacobian { condition });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Shooter {
        Shooter::new(
            SystemParams::new(3, 3.0, 7.0, 11.0).unwrap(),
            IntegratorConfig::default(),
        )
    }

    #[test]
    fn kind_parsing_and_serde() {
        assert_eq!("odd".parse::<SymmetryKind>().unwrap(), SymmetryKind::Odd);
        assert_eq!(
            "odd-even".parse::<SymmetryKind>().unwrap(),
            SymmetryKind::OddEven
        );
        assert!("even".parse::<SymmetryKind>().is_err());
        assert_eq!(
            serde_json::to_string(&SymmetryKind::OddEven).unwrap(),
            "\"odd_even\""
        );
    }

    #[test]
    fn seed_point_json_fields() {
        let p = SeedPoint {
            a: 0.8892815,
            b: 0.05,
            t: 28.708,
            kind: SymmetryKind::Odd,
            residual: 1.25e-11,
            theta: 2.3232657,
        };
        let json = p.to_json();
        for key in [
            "\"a\"",
            "\"b\"",
            "\"T\"",
            "\"kind\"",
            "\"residual\"",
            "\"theta\"",
        ] {
            assert!(json.contains(key), "{key} missing from {json}");
        }
        let back: SeedPoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn circular_family_satisfies_raw_conditions() {
        let s = small();
        let a0 = s.params.a0();
        for t in [3.0, 17.5, 40.0] {
            let r = s
                .residual(&SeedPoint::new(a0, 0.0, t, SymmetryKind::Odd))
                .unwrap();
            assert_eq!(r.x, 0.0);
            assert!(r.y.abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_points_rejected() {
        let s = small();
        assert!(matches!(
            s.residual(&SeedPoint::new(-1.0, 0.0, 3.0, SymmetryKind::Odd)),
            Err(ShootError::InvalidPoint(_))
        ));
        assert!(matches!(
            s.residual(&SeedPoint::new(1.0, 0.0, 0.0, SymmetryKind::Odd)),
            Err(ShootError::InvalidPoint(_))
        ));
    }

    #[test]
    fn desingularised_residual_vanishes_at_bifurcation() {
        let s = small();
        let (a0, t0) = (s.params.a0(), s.params.t0());
        let odd = s
            .residual_desing(&SeedPoint::new(a0, 0.0, t0, SymmetryKind::Odd))
            .unwrap();
        assert!(odd.amax() < 1e-10, "{odd}");
        let oe = s
            .residual_desing(&SeedPoint::new(a0, 0.0, t0 / 2.0, SymmetryKind::OddEven))
            .unwrap();
        assert!(oe.amax() < 1e-10, "{oe}");
    }

    #[test]
    fn desingularised_residual_continuous_at_zero_b() {
        let s = small();
        let (a0, t0) = (s.params.a0(), s.params.t0());
        let at0 = s
            .residual_desing(&SeedPoint::new(a0, 0.0, t0, SymmetryKind::Odd))
            .unwrap();
        let near = s
            .residual_desing(&SeedPoint::new(a0, 1e-8, t0, SymmetryKind::Odd))
            .unwrap();
        assert!((near.x - at0.x).abs() < 1e-6);
    }

    #[test]
    fn desingularised_times_b_is_raw() {
        let s = small();
        for kind in [SymmetryKind::Odd, SymmetryKind::OddEven] {
            for b in [0.05, -0.3, 1.2] {
                let p = SeedPoint::new(0.87, b, 21.0, kind);
                let raw = s.residual(&p).unwrap();
                let des = s.residual_desing(&p).unwrap();
                assert_eq!(des.x * b, raw.x);
                assert_eq!(des.y, raw.y);
            }
        }
    }

    #[test]
    fn exact_point_needs_no_iterations() {
        let s = small();
        let p = SeedPoint::new(s.params.a0(), 0.0, s.params.t0(), SymmetryKind::Odd);
        let c = s
            .newton_correct(&p, Constraint::FixedB(0.0), DEFAULT_TOL, 10)
            .unwrap();
        assert_eq!(c.iterations, 0);
        assert_eq!((c.point.a, c.point.b, c.point.t), (p.a, p.b, p.t));
    }

    #[test]
    fn fixed_b_correction_near_bifurcation() {
        let s = small();
        let guess = SeedPoint::new(s.params.a0(), 0.05, s.params.t0(), SymmetryKind::Odd);
        let c = s
            .newton_correct(&guess, Constraint::FixedB(0.05), DEFAULT_TOL, 10)
            .unwrap();
        assert!((c.point.a - 0.8892815).abs() < 1e-3);
        assert!((c.point.t - 28.708).abs() < 1e-3);
        assert!(c.point.residual <= DEFAULT_TOL);
        assert!(s.periodicity_defect(&c.point).unwrap() < 1e-9);
    }

    #[test]
    fn symmetric_in_b() {
        let s = small();
        let g = SeedPoint::new(s.params.a0(), 0.1, s.params.t0(), SymmetryKind::Odd);
        let up = s
            .newton_correct(&g, Constraint::FixedB(0.1), DEFAULT_TOL, 10)
            .unwrap();
        let down = s
            .newton_correct(&g, Constraint::FixedB(-0.1), DEFAULT_TOL, 10)
            .unwrap();
        assert!((up.point.a - down.point.a).abs() < 1e-12);
        assert!((up.point.t - down.point.t).abs() < 1e-10);
    }

    #[test]
    fn max_iterations_reported() {
        let s = small();
        let guess = SeedPoint::new(
            s.params.a0() * 1.01,
            0.05,
            s.params.t0() * 1.01,
            SymmetryKind::Odd,
        );
        let err = s
            .newton_correct(&guess, Constraint::FixedB(0.05), 1e-14, 1)
            .unwrap_err();
        assert!(
            matches!(err, ShootError::MaxIterations { iterations: 1, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn condition_check() {
        assert!(check_condition(&[1.0, 1e-13]).is_err());
        assert!(check_condition(&[1.0, 0.0]).is_err());
        assert!(check_condition(&[3.0, 1.0]).is_ok());
    }
}
