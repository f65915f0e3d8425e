//! Pseudo-arclength continuation of the symmetric solution curve in
//! `(a, b, T)`-space.
//!
//! Each step predicts along the unit tangent `X/|X|`, `X = ∇ρ̃₁ × ∇ρ₂`, and
//! corrects with Newton on the plane through the prediction orthogonal to the
//! tangent. Crossings of `b = 0` are refined with a fixed-`b` solve.

use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bifurcate::bifurcation_point;
use crate::integrate::IntegratorConfig;
use crate::model::SystemParams;
use crate::shoot::{
    residual_jet, Constraint, SeedPoint, ShootError, Shooter, SymmetryKind, DEFAULT_TOL,
};

/// Accepted points must satisfy the conditions to this max-norm.
pub const POINT_TOL: f64 = 1e-9;
/// Endpoints with `a` below this fraction of `a0` are collision limits.
pub const COLLISION_A_FRACTION: f64 = 1e-3;
/// Tolerance on the start point's residual.
pub const START_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ContinuationError {
    #[error("start point does not lie on the solution curve: residual {residual:e} (first condition {first:e}, second {second:e})")]
    InvalidStart {
        residual: f64,
        first: f64,
        second: f64,
    },
    #[error("tangent undefined at ({a}, {b}, {t}): gradients are parallel")]
    SingularPoint { a: f64, b: f64, t: f64 },
    #[error("invalid step configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Shoot(#[from] ShootError),
    #[error("branch file: {0}")]
    Io(#[from] std::io::Error),
    #[error("branch file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Plus => 1.0,
            Direction::Minus => -1.0,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::Plus => Direction::Minus,
            Direction::Minus => Direction::Plus,
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "+" | "plus" | "up" => Ok(Direction::Plus),
            "-" | "minus" | "down" => Ok(Direction::Minus),
            other => Err(format!("unknown direction '{other}' (expected + or -)")),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Plus => "+",
            Direction::Minus => "-",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepConfig {
    /// Initial step; defaults to a tenth of `ds_max`.
    pub ds_init: Option<f64>,
    pub ds_min: f64,
    /// Defaults to `0.05·max(1, T0)`.
    pub ds_max: Option<f64>,
    pub growth: f64,
    pub successes_to_grow: usize,
    pub corrector_tol: f64,
    pub corrector_max_iter: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            ds_init: None,
            ds_min: 1e-8,
            ds_max: None,
            growth: 1.3,
            successes_to_grow: 4,
            corrector_tol: DEFAULT_TOL,
            corrector_max_iter: 12,
        }
    }
}

impl StepConfig {
    pub fn resolved_ds_max(&self, params: &SystemParams) -> f64 {
        self.ds_max.unwrap_or(0.05 * params.t0().max(1.0))
    }

    pub fn validate(&self) -> Result<(), ContinuationError> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.ds_min) {
            return Err(ContinuationError::Config(format!(
                "ds_min must be positive, got {}",
                self.ds_min
            )));
        }
        if let Some(d) = self.ds_max {
            if !positive(d) || d < self.ds_min {
                return Err(ContinuationError::Config(format!(
                    "ds_max must be at least ds_min, got {d}"
                )));
            }
        }
        if let Some(d) = self.ds_init {
            if !positive(d) {
                return Err(ContinuationError::Config(format!(
                    "ds_init must be positive, got {d}"
                )));
            }
        }
        if !(self.growth >= 1.0 && self.growth.is_finite()) {
            return Err(ContinuationError::Config(format!(
                "growth must be at least 1, got {}",
                self.growth
            )));
        }
        if !positive(self.corrector_tol) || self.corrector_tol > POINT_TOL {
            return Err(ContinuationError::Config(format!(
                "corrector_tol must lie in (0, {POINT_TOL:e}], got {}",
                self.corrector_tol
            )));
        }
        if self.corrector_max_iter == 0 {
            return Err(ContinuationError::Config(
                "corrector_max_iter must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopConfig {
    /// Total number of stored points, the start included.
    pub max_points: usize,
    /// Stop once `Θ` exceeds this value.
    pub theta_max: Option<f64>,
    /// Stop once `Θ` falls below this value.
    pub theta_min: Option<f64>,
    /// Upper bound on `T`; defaults to `100·T0`.
    pub t_max: Option<f64>,
    /// Terminate when the branch crosses `b = 0`.
    pub stop_at_b_zero: bool,
}

impl Default for StopConfig {
    fn default() -> Self {
        StopConfig {
            max_points: 20_000,
            theta_max: None,
            theta_min: None,
            t_max: None,
            stop_at_b_zero: true,
        }
    }
}

impl StopConfig {
    pub fn validate(&self) -> Result<(), ContinuationError> {
        if self.max_points < 1 {
            return Err(ContinuationError::Config(
                "max_points must be at least 1".into(),
            ));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0) {
                return Err(ContinuationError::Config(format!(
                    "t_max must be positive, got {t}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub point: SeedPoint,
    /// Unit tangent in `(a, b, T)`, oriented along the direction of travel.
    pub tangent: [f64; 3],
    pub theta: f64,
    /// Accumulated chord length from the start.
    pub arc: f64,
}

impl BranchPoint {
    pub fn coords(&self) -> Vector3<f64> {
        self.point.coords()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `a` or `r` tends to zero, or the flow became singular.
    Collision,
    /// The branch returned to the circular family `b = 0`.
    BZeroCrossing,
    /// `T` or `Θ` left the configured bounds.
    Bound,
    StepFailure,
    PointBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointLabel {
    Collision,
    TrivialLimit,
    Unbounded,
    Budget,
    StepFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrivialLimit {
    pub a: f64,
    #[serde(rename = "T")]
    pub t: f64,
    /// Bifurcation point of the same kind.
    pub predicted_a: f64,
    pub predicted_t: f64,
    /// `max(|a − a0|, |T − T*|)`.
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub label: EndpointLabel,
    pub point: SeedPoint,
    pub trivial_limit: Option<TrivialLimit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialKind {
    BZero,
    Resonance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialPoint {
    pub kind: SpecialKind,
    pub point: SeedPoint,
    /// Arc position of the refined point.
    pub arc: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub newton_iterations: usize,
    pub ds_smallest: f64,
    pub ds_largest: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub kind: SymmetryKind,
    pub params: SystemParams,
    pub direction: Direction,
    pub ds_max: f64,
    pub points: Vec<BranchPoint>,
    pub special: Vec<SpecialPoint>,
    pub stats: StepStats,
    pub termination: Termination,
}

/// Serialized alongside the CSV point table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSummary {
    pub kind: SymmetryKind,
    pub params: SystemParams,
    pub direction: Direction,
    pub ds_max: f64,
    pub count: usize,
    pub termination: Termination,
    pub endpoint: Endpoint,
    pub first: SeedPoint,
    pub last: SeedPoint,
    pub special: Vec<SpecialPoint>,
    pub stats: StepStats,
}

/// Unnormalised tangent field at `x`.
pub fn tangent_field(
    shooter: &Shooter,
    x: &Vector3<f64>,
    kind: SymmetryKind,
) -> Result<Vector3<f64>, ShootError> {
    let e = shooter.evaluate(x.x, x.y, x.z, true)?;
    Ok(residual_jet(&e, kind).tangent_field())
}

/// Unit tangent at `point`, oriented to have non-negative inner product with
/// `previous` when given.
pub fn tangent(
    shooter: &Shooter,
    point: &SeedPoint,
    previous: Option<&Vector3<f64>>,
) -> Result<Vector3<f64>, ContinuationError> {
    let x = tangent_field(shooter, &point.coords(), point.kind)?;
    let norm = x.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(ContinuationError::SingularPoint {
            a: point.a,
            b: point.b,
            t: point.t,
        });
    }
    let unit = x / norm;
    Ok(match previous {
        Some(p) if unit.dot(p) < 0.0 => -unit,
        _ => unit,
    })
}

/// Orients `t` so that its `b` component has the sign of `direction`, falling
/// back to the `T` component when `b` is negligible.
fn orient(t: Vector3<f64>, direction: Direction) -> Vector3<f64> {
    let key = if t.y.abs() > 1e-12 { t.y } else { t.z };
    if key * direction.sign() < 0.0 {
        -t
    } else {
        t
    }
}

/// Corrects `guess` at fixed `b` and returns a start point for continuation.
pub fn seed(shooter: &Shooter, guess: &SeedPoint, tol: f64) -> Result<SeedPoint, ShootError> {
    Ok(shooter
        .newton_correct(guess, Constraint::FixedB(guess.b), tol, 20)?
        .point)
}

fn is_singular(err: &ShootError) -> bool {
    matches!(err, ShootError::Integrate(e) if e.is_singular())
}

/// Traces the branch through `start` in `direction`.
pub fn continue_branch(
    shooter: &Shooter,
    start: &SeedPoint,
    direction: Direction,
    step: &StepConfig,
    stop: &StopConfig,
) -> Result<Branch, ContinuationError> {
    step.validate()?;
    stop.validate()?;
    let params = shooter.params;
    let kind = start.kind;
    let start = shooter.annotate(start)?;
    if !(start.residual <= START_TOL) {
        let r = shooter.residual_desing(&start)?;
        return Err(ContinuationError::InvalidStart {
            residual: start.residual,
            first: r.x,
            second: r.y,
        });
    }
    // Tighten the start onto the curve so every stored point meets POINT_TOL.
    let start = if start.residual > step.corrector_tol {
        shooter
            .newton_correct(
                &start,
                Constraint::FixedB(start.b),
                step.corrector_tol,
                step.corrector_max_iter,
            )?
            .point
    } else {
        start
    };

    let ds_max = step.resolved_ds_max(&params);
    let ds_min = step.ds_min.min(ds_max);
    let t_max = stop.t_max.unwrap_or(100.0 * params.t0());
    let a_floor = COLLISION_A_FRACTION * params.a0();

    let t0 = orient(tangent(shooter, &start, None)?, direction);
    let mut points = vec![BranchPoint {
        point: start,
        tangent: t0.into(),
        theta: start.theta,
        arc: 0.0,
    }];
    let mut special = Vec::new();
    let mut stats = StepStats {
        ds_smallest: f64::INFINITY,
        ..StepStats::default()
    };
    let mut ds = step.ds_init.unwrap_or(ds_max / 10.0).clamp(ds_min, ds_max);
    let mut streak = 0usize;

    let termination = loop {
        if points.len() >= stop.max_points {
            break Termination::PointBudget;
        }
        let last = *points.last().expect("branch is never empty");
        let x = last.coords();
        let tan = Vector3::from(last.tangent);
        if last.point.a < a_floor {
            break Termination::Collision;
        }
        if last.point.t > t_max {
            break Termination::Bound;
        }
        if stop.theta_max.is_some_and(|m| last.theta > m)
            || stop.theta_min.is_some_and(|m| last.theta < m)
        {
            break Termination::Bound;
        }

        let pred = x + tan * ds;
        let attempt = if pred.x <= 0.0 || pred.z <= 0.0 {
            None
        } else {
            let guess = SeedPoint::new(pred.x, pred.y, pred.z, kind);
            let constraint = Constraint::Hyperplane {
                origin: pred,
                normal: tan,
            };
            match shooter.newton_correct(
                &guess,
                constraint,
                step.corrector_tol,
                step.corrector_max_iter,
            ) {
                Ok(c) => Some(Ok(c)),
                Err(e) => Some(Err(e)),
            }
        };

        let mut singular = pred.x <= 0.0;
        let accepted = match attempt {
            Some(Ok(c)) => {
                stats.newton_iterations += c.iterations;
                let y = c.point.coords();
                let chord = (y - x).norm();
                match tangent(shooter, &c.point, Some(&tan)) {
                    Ok(t_new)
                        if chord <= 2.0 * ds
                            && t_new.dot(&tan) > 0.8
                            && c.point.residual <= POINT_TOL =>
                    {
                        Some((c.point, t_new, chord))
                    }
                    Ok(_) => None,
                    Err(ContinuationError::Shoot(e)) => {
                        singular |= is_singular(&e);
                        None
                    }
                    Err(_) => None,
                }
            }
            Some(Err(e)) => {
                singular |= is_singular(&e);
                None
            }
            None => None,
        };

        let Some((point, t_new, chord)) = accepted else {
            stats.rejected += 1;
            streak = 0;
            if ds <= ds_min {
                break if singular || last.point.a < 10.0 * a_floor {
                    Termination::Collision
                } else {
                    Termination::StepFailure
                };
            }
            ds = (ds / 2.0).max(ds_min);
            continue;
        };

        stats.accepted += 1;
        stats.ds_smallest = stats.ds_smallest.min(ds);
        stats.ds_largest = stats.ds_largest.max(ds);
        let next = BranchPoint {
            point,
            tangent: t_new.into(),
            theta: point.theta,
            arc: last.arc + chord,
        };

        if stop.stop_at_b_zero && last.point.b != 0.0 && point.b.signum() != last.point.b.signum() {
            if let Some(sp) = refine_b_zero(shooter, &last, &next, step) {
                special.push(sp);
                points.push(BranchPoint {
                    point: sp.point,
                    tangent: t_new.into(),
                    theta: sp.point.theta,
                    arc: sp.arc,
                });
            } else {
                points.push(next);
            }
            break Termination::BZeroCrossing;
        }
        points.push(next);

        streak += 1;
        if streak >= step.successes_to_grow {
            ds = (ds * step.growth).min(ds_max);
            streak = 0;
        }
    };

    if stats.accepted == 0 {
        stats.ds_smallest = 0.0;
    }
    Ok(Branch {
        kind,
        params,
        direction,
        ds_max,
        points,
        special,
        stats,
        termination,
    })
}

fn refine_b_zero(
    shooter: &Shooter,
    p: &BranchPoint,
    q: &BranchPoint,
    step: &StepConfig,
) -> Option<SpecialPoint> {
    let (x, y) = (p.coords(), q.coords());
    let w = p.point.b / (p.point.b - q.point.b);
    let guess = x + (y - x) * w;
    let c = shooter
        .newton_correct(
            &SeedPoint::new(guess.x, 0.0, guess.z, p.point.kind),
            Constraint::FixedB(0.0),
            step.corrector_tol,
            step.corrector_max_iter,
        )
        .ok()?;
    Some(SpecialPoint {
        kind: SpecialKind::BZero,
        point: c.point,
        arc: p.arc + (c.point.coords() - x).norm(),
    })
}

/// Endpoint label of a terminated branch.
pub fn classify_endpoint(branch: &Branch) -> Endpoint {
    let last = branch.points.last().expect("branch is never empty").point;
    let a_floor = COLLISION_A_FRACTION * branch.params.a0();
    let label = if last.a < a_floor {
        EndpointLabel::Collision
    } else {
        match branch.termination {
            Termination::Collision => EndpointLabel::Collision,
            Termination::BZeroCrossing => EndpointLabel::TrivialLimit,
            Termination::Bound => EndpointLabel::Unbounded,
            Termination::PointBudget => EndpointLabel::Budget,
            Termination::StepFailure => EndpointLabel::StepFailure,
        }
    };
    let trivial_limit = (label == EndpointLabel::TrivialLimit).then(|| {
        let bif = bifurcation_point(&branch.params, branch.kind).point;
        TrivialLimit {
            a: last.a,
            t: last.t,
            predicted_a: bif.a,
            predicted_t: bif.t,
            distance: (last.a - bif.a).abs().max((last.t - bif.t).abs()),
        }
    });
    Endpoint {
        label,
        point: last,
        trivial_limit,
    }
}

impl Branch {
    pub fn summary(&self) -> BranchSummary {
        BranchSummary {
            kind: self.kind,
            params: self.params,
            direction: self.direction,
            ds_max: self.ds_max,
            count: self.points.len(),
            termination: self.termination,
            endpoint: classify_endpoint(self),
            first: self.points[0].point,
            last: self.points[self.points.len() - 1].point,
            special: self.special.clone(),
            stats: self.stats,
        }
    }

    /// Point whose `b` is closest to `b`.
    pub fn nearest_b(&self, b: f64) -> &BranchPoint {
        self.points
            .iter()
            .min_by(|p, q| (p.point.b - b).abs().total_cmp(&(q.point.b - b).abs()))
            .expect("branch is never empty")
    }

    /// Minimum max-norm distance in `(a, b, T)` from the branch points to `x`.
    pub fn distance_to(&self, x: &Vector3<f64>) -> f64 {
        self.points
            .iter()
            .map(|p| (p.coords() - x).amax())
            .fold(f64::INFINITY, f64::min)
    }

    /// Point table with header `idx,a,b,T,theta,residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("idx,a,b,T,theta,residual\n");
        for (i, p) in self.points.iter().enumerate() {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                i, p.point.a, p.point.b, p.point.t, p.theta, p.point.residual
            ));
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`. Both files are
    /// rendered before either is written.
    pub fn write_files(
        &self,
        dir: &Path,
        stem: &str,
    ) -> Result<(std::path::PathBuf, std::path::PathBuf), ContinuationError> {
        let csv = self.to_csv();
        let json = self.summary_json();
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        write_atomic(&csv_path, csv.as_bytes())?;
        write_atomic(&json_path, json.as_bytes())?;
        Ok((csv_path, json_path))
    }

    /// Rebuilds a branch from its CSV table and JSON summary. Tangents are
    /// not stored and come back as zero; arc positions are recomputed from
    /// chords.
    pub fn from_files(csv: &Path, json: &Path) -> Result<Branch, ContinuationError> {
        let summary: BranchSummary = serde_json::from_str(&std::fs::read_to_string(json)?)
            .map_err(|e| ContinuationError::Format(e.to_string()))?;
        let text = std::fs::read_to_string(csv)?;
        Self::from_parts(&summary, &text)
    }

    pub fn from_parts(summary: &BranchSummary, csv: &str) -> Result<Branch, ContinuationError> {
        let mut lines = csv.lines();
        if lines.next().map(str::trim) != Some("idx,a,b,T,theta,residual") {
            return Err(ContinuationError::Format(
                "missing header idx,a,b,T,theta,residual".into(),
            ));
        }
        let mut points: Vec<BranchPoint> = Vec::new();
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(ContinuationError::Format(format!(
                    "line {}: expected 6 fields",
                    ln + 2
                )));
            }
            let num = |i: usize| -> Result<f64, ContinuationError> {
                fields[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| ContinuationError::Format(format!("line {}: {e}", ln + 2)))
            };
            let point = SeedPoint {
                a: num(1)?,
                b: num(2)?,
                t: num(3)?,
                kind: summary.kind,
                residual: num(5)?,
                theta: num(4)?,
            };
            let arc = match points.last() {
                Some(prev) => prev.arc + (point.coords() - prev.coords()).norm(),
                None => 0.0,
            };
            points.push(BranchPoint {
                point,
                tangent: [0.0; 3],
                theta: point.theta,
                arc,
            });
        }
        if points.is_empty() {
            return Err(ContinuationError::Format("branch has no points".into()));
        }
        Ok(Branch {
            kind: summary.kind,
            params: summary.params,
            direction: summary.direction,
            ds_max: summary.ds_max,
            points,
            special: summary.special.clone(),
            stats: summary.stats,
            termination: summary.termination,
        })
    }
}

/// Writes through a temporary sibling so a failed run leaves no partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

/// Default shooter for a parameter set.
pub fn shooter(params: SystemParams) -> Shooter {
    Shooter::new(params, IntegratorConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Shooter {
        shooter(SystemParams::new(3, 3.0, 7.0, 11.0).unwrap())
    }

    #[test]
    fn direction_parsing() {
        assert_eq!("+".parse::<Direction>().unwrap(), Direction::Plus);
        assert_eq!("-".parse::<Direction>().unwrap(), Direction::Minus);
        assert!("x".parse::<Direction>().is_err());
        assert_eq!(Direction::Plus.reversed(), Direction::Minus);
    }

    #[test]
    fn tangent_at_bifurcation_leaves_b_zero_line() {
        let s = small();
        let p0 = SeedPoint::new(s.params.a0(), 0.0, s.params.t0(), SymmetryKind::Odd);
        let x = tangent_field(&s, &p0.coords(), SymmetryKind::Odd).unwrap();
        let r_at =
            2.0 * (std::f64::consts::PI * crate::bifurcate::resonance_ratio(&s.params)).sin();
        assert!(x.x.abs() < 1e-10, "{x}");
        assert!((x.y.abs() - r_at.abs()).abs() < 1e-8, "{x} vs {r_at}");
        assert!(x.z.abs() < 1e-8);
    }

    #[test]
    fn field_on_circular_family_points_along_b() {
        let s = small();
        let p = SeedPoint::new(s.params.a0(), 0.0, s.params.t0() + 1.0, SymmetryKind::Odd);
        // Off the zero set; R_t has vanishing b and T derivatives on the circular
        // family, so only the b component of X survives.
        let e = s.evaluate(p.a, p.b, p.t, true).unwrap();
        let jet = residual_jet(&e, SymmetryKind::Odd);
        let grad_r = jet.gradient[1];
        assert!(grad_r.y.abs() < 1e-12 && grad_r.z.abs() < 1e-12);
        let x = tangent_field(&s, &p.coords(), SymmetryKind::Odd).unwrap();
        assert!(x.x.abs() < 1e-12 && x.z.abs() < 1e-12, "{x}");
        assert!((x.y - e.ut * grad_r.x).abs() < 1e-12);
        assert!(x.y.abs() > 1e-3);
    }

    #[test]
    fn tangent_sign_continuity() {
        let s = small();
        let p0 = SeedPoint::new(s.params.a0(), 0.0, s.params.t0(), SymmetryKind::Odd);
        let t = tangent(&s, &p0, None).unwrap();
        let flipped = tangent(&s, &p0, Some(&-t)).unwrap();
        assert_eq!(flipped, -t);
        assert_eq!(tangent(&s, &p0, Some(&t)).unwrap(), t);
        assert!((t.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn start_off_curve_rejected() {
        let s = small();
        let p = SeedPoint::new(s.params.a0(), 0.0, s.params.t0() + 1.0, SymmetryKind::Odd);
        let err = continue_branch(
            &s,
            &p,
            Direction::Plus,
            &StepConfig::default(),
            &StopConfig::default(),
        )
        .unwrap_err();
        assert!(
            matches!(err, ContinuationError::InvalidStart { .. }),
            "{err}"
        );
    }

    #[test]
    fn budget_termination() {
        let s = small();
        let p1 = seed(
            &s,
            &SeedPoint::new(s.params.a0(), 0.05, s.params.t0(), SymmetryKind::Odd),
            1e-10,
        )
        .unwrap();
        let stop = StopConfig {
            max_points: 10,
            ..StopConfig::default()
        };
        let br = continue_branch(&s, &p1, Direction::Plus, &StepConfig::default(), &stop).unwrap();
        assert_eq!(br.points.len(), 10);
        assert_eq!(br.termination, Termination::PointBudget);
        assert_eq!(classify_endpoint(&br).label, EndpointLabel::Budget);
        for w in br.points.windows(2) {
            assert!(w[1].point.b > w[0].point.b - 1e-12 || w[1].point.t > w[0].point.t);
            assert!((w[1].theta - w[0].theta).abs() <= 0.2);
            assert!((w[1].coords() - w[0].coords()).norm() <= 2.0 * br.ds_max);
        }
        assert!(br.points.iter().all(|p| p.point.residual <= POINT_TOL));
    }

    #[test]
    fn toward_b_zero_reaches_bifurcation() {
        let s = small();
        let p1 = seed(
            &s,
            &SeedPoint::new(s.params.a0(), 0.05, s.params.t0(), SymmetryKind::Odd),
            1e-10,
        )
        .unwrap();
        let br = continue_branch(
            &s,
            &p1,
            Direction::Minus,
            &StepConfig::default(),
            &StopConfig::default(),
        )
        .unwrap();
        assert_eq!(br.termination, Termination::BZeroCrossing);
        let end = classify_endpoint(&br);
        assert_eq!(end.label, EndpointLabel::TrivialLimit);
        let tl = end.trivial_limit.unwrap();
        assert!(tl.distance < 5e-3, "{tl:?}");
        assert_eq!(br.special.len(), 1);
        assert_eq!(br.special[0].point.b, 0.0);
    }

    #[test]
    fn collision_label_from_small_a() {
        let s = small();
        let p = SeedPoint {
            a: 1e-5,
            b: 0.5,
            t: 50.0,
            kind: SymmetryKind::Odd,
            residual: 0.0,
            theta: 0.0,
        };
        let br = Branch {
            kind: SymmetryKind::Odd,
            params: s.params,
            direction: Direction::Plus,
            ds_max: 1.0,
            points: vec![BranchPoint {
                point: p,
                tangent: [0.0; 3],
                theta: 0.0,
                arc: 0.0,
            }],
            special: vec![],
            stats: StepStats::default(),
            termination: Termination::StepFailure,
        };
        assert_eq!(classify_endpoint(&br).label, EndpointLabel::Collision);
    }

    #[test]
    fn csv_round_trip() {
        let s = small();
        let p1 = seed(
            &s,
            &SeedPoint::new(s.params.a0(), 0.05, s.params.t0(), SymmetryKind::Odd),
            1e-10,
        )
        .unwrap();
        let stop = StopConfig {
            max_points: 4,
            ..StopConfig::default()
        };
        let br = continue_branch(&s, &p1, Direction::Plus, &StepConfig::default(), &stop).unwrap();
        let back = Branch::from_parts(&br.summary(), &br.to_csv()).unwrap();
        assert_eq!(back.points.len(), br.points.len());
        for (p, q) in br.points.iter().zip(&back.points) {
            assert_eq!(p.point, q.point);
        }
        assert!(br.to_csv().starts_with("idx,a,b,T,theta,residual\n"));
    }

    #[test]
    fn invalid_configs() {
        let bad = StepConfig {
            ds_min: 0.0,
            ..StepConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = StepConfig {
            corrector_tol: 1e-6,
            ..StepConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(StopConfig {
            max_points: 0,
            ..StopConfig::default()
        }
        .validate()
        .is_err());
    }
}
