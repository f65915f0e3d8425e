//! Rotation-angle resonances, closure orders and full (n+1)-body orbits.
//!
//! Over one period of `(f, r)` the whole configuration turns about the `z`
//! axis by `2Θ` (odd) or `4Θ` (odd/even). When `Θ = n1·π/n2` the motion in
//! the inertial frame closes after finitely many periods.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::{Vector3, Vector5};
use num_integer::Integer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::continuation::{write_atomic, Branch};
use crate::integrate::{flow, IntegrateError};
use crate::model::{
    cartesian_lift, full_rhs, lifted_accelerations, reduced_energy, ReducedState, ReducedSystem,
};
use crate::shoot::{Constraint, SeedPoint, ShootError, Shooter, SymmetryKind};

/// Required accuracy of `Θ` at a refined resonance.
pub const THETA_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum OrbitError {
    #[error("invalid resonance target: {0}")]
    InvalidTarget(String),
    #[error("no point with Θ = {target} on the branch (Θ ranges over [{theta_min}, {theta_max}])")]
    NotFound {
        target: String,
        theta_min: f64,
        theta_max: f64,
    },
    #[error("resonance refinement did not converge: |Θ − target| = {defect:e}")]
    NoConvergence { defect: f64 },
    #[error("invalid reconstruction request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Shoot(#[from] ShootError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error("trajectory file: {0}")]
    Io(#[from] std::io::Error),
    #[error("trajectory file: {0}")]
    Format(String),
}

/// Target rotation angle `n1·π/n2` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResonanceTarget {
    pub n1: u64,
    pub n2: u64,
}

impl ResonanceTarget {
    pub fn new(n1: u64, n2: u64) -> Result<Self, OrbitError> {
        if n1 == 0 || n2 == 0 {
            return Err(OrbitError::InvalidTarget(format!(
                "n1 and n2 must be positive, got {n1}/{n2}"
            )));
        }
        if n1.gcd(&n2) != 1 {
            return Err(OrbitError::InvalidTarget(format!(
                "{n1} and {n2} are not coprime"
            )));
        }
        Ok(ResonanceTarget { n1, n2 })
    }

    pub fn angle(&self) -> f64 {
        self.n1 as f64 * std::f64::consts::PI / self.n2 as f64
    }

    /// File-name tag such as `3pi4`.
    pub fn tag(&self) -> String {
        format!("{}pi{}", self.n1, self.n2)
    }
}

impl fmt::Display for ResonanceTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.n2 {
            1 if self.n1 == 1 => write!(f, "π"),
            1 => write!(f, "{}π", self.n1),
            _ if self.n1 == 1 => write!(f, "π/{}", self.n2),
            _ => write!(f, "{}π/{}", self.n1, self.n2),
        }
    }
}

impl std::str::FromStr for ResonanceTarget {
    type Err = OrbitError;

    /// Accepts `n1/n2`, `n1pi/n2`, `n1pin2` or `n1`, meaning `n1·π/n2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let cleaned = s.trim().replace('π', "pi");
        let bad = || OrbitError::InvalidTarget(format!("cannot parse '{s}' as n1/n2"));
        let (a, b) = if let Some((a, b)) = cleaned.split_once('/') {
            (
                a.trim_end_matches("pi").trim().to_string(),
                b.trim().to_string(),
            )
        } else if let Some((a, b)) = cleaned.split_once("pi") {
            (
                a.trim().to_string(),
                if b.trim().is_empty() {
                    "1".into()
                } else {
                    b.trim().to_string()
                },
            )
        } else {
            (cleaned.trim().to_string(), "1".into())
        };
        let a = if a.is_empty() { "1".to_string() } else { a };
        let n1 = a.parse::<u64>().map_err(|_| bad())?;
        let n2 = b.parse::<u64>().map_err(|_| bad())?;
        ResonanceTarget::new(n1, n2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosureOrder {
    /// Periods until every body returns to its own starting state.
    pub k_strict: u64,
    /// Periods until the configuration recurs up to cyclic relabeling of the ring.
    pub k_relabel: u64,
}

/// Number of `(f, r)` periods after which a solution with `Θ = n1π/n2` closes.
pub fn closure_order(target: &ResonanceTarget, n: u32, kind: SymmetryKind) -> ClosureOrder {
    // The turn per period is 2Θ·q with q = 1 (odd) or 2 (odd/even); closure
    // needs k·q·n1/n2 to be an integer, relabeling k·q·n1·n/n2.
    let q = match kind {
        SymmetryKind::Odd => 1,
        SymmetryKind::OddEven => 2,
    };
    let n2 = target.n2;
    ClosureOrder {
        k_strict: n2 / (q * target.n1).gcd(&n2),
        k_relabel: n2 / (q * target.n1 * n as u64).gcd(&n2),
    }
}

/// Refines the first crossing of `Θ = target` along `branch`.
///
/// Inside the bracketing segment the curve is parameterised by `b` when `b`
/// changes appreciably across it, by position along the chord otherwise;
/// each trial point is corrected back onto the branch.
pub fn find_resonance(
    shooter: &Shooter,
    branch: &Branch,
    target: &ResonanceTarget,
    tol: f64,
) -> Result<SeedPoint, OrbitError> {
    let goal = target.angle();
    let pts = &branch.points;
    let (lo, hi) = pts
        .iter()
        .map(|p| p.theta)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), t| {
            (l.min(t), h.max(t))
        });
    let bracket = pts
        .windows(2)
        .position(|w| (w[0].theta - goal) * (w[1].theta - goal) <= 0.0);
    let Some(k) = bracket else {
        return Err(OrbitError::NotFound {
            target: target.to_string(),
            theta_min: lo,
            theta_max: hi,
        });
    };
    let (p, q) = (pts[k].point, pts[k + 1].point);
    if (p.theta - goal).abs() < tol {
        return Ok(p);
    }
    if (q.theta - goal).abs() < tol {
        return Ok(q);
    }

    let (x0, x1) = (p.coords(), q.coords());
    let chord = x1 - x0;
    let by_b = (q.b - p.b).abs() > 0.1 * chord.norm();
    let normal = chord / chord.norm();
    let kind = branch.kind;
    let tol_corr = 1e-11;

    let solve = |s: f64| -> Result<SeedPoint, OrbitError> {
        let g = x0 + chord * s;
        let guess = SeedPoint::new(g.x, g.y, g.z, kind);
        let constraint = if by_b {
            Constraint::FixedB(g.y)
        } else {
            Constraint::Hyperplane { origin: g, normal }
        };
        Ok(shooter
            .newton_correct(&guess, constraint, tol_corr, 20)?
            .point)
    };

    // Illinois variant of regula falsi on s ∈ [0, 1].
    let (mut s_lo, mut g_lo) = (0.0, p.theta - goal);
    let (mut s_hi, mut g_hi) = (1.0, q.theta - goal);
    let mut side = 0i8;
    let mut best: Option<SeedPoint> = None;
    for _ in 0..100 {
        let s = s_lo - g_lo * (s_hi - s_lo) / (g_hi - g_lo);
        let s = if s.is_finite() && s > s_lo && s < s_hi {
            s
        } else {
            0.5 * (s_lo + s_hi)
        };
        let pt = solve(s)?;
        let g = pt.theta - goal;
        if best.is_none_or(|b: SeedPoint| (b.theta - goal).abs() > g.abs()) {
            best = Some(pt);
        }
        if g.abs() < tol {
            return Ok(pt);
        }
        if g * g_lo > 0.0 {
            s_lo = s;
            g_lo = g;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        } else {
            s_hi = s;
            g_hi = g;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        }
        if s_hi - s_lo < 1e-15 {
            break;
        }
    }
    Err(OrbitError::NoConvergence {
        defect: best.map_or(f64::INFINITY, |b| (b.theta - goal).abs()),
    })
}

/// One sampled instant of the full problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub positions: Vec<[f64; 3]>,
    pub velocities: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `max |E(t) − E(0)| / |E(0)|`.
    pub energy_drift: f64,
    /// Largest component of the total linear momentum.
    pub momentum_max: f64,
    /// Largest distance of the centre of mass from the origin, divided by `r0`.
    pub com_max: f64,
    /// `max |L_z(t) − L_z(0)| / |L_z(0)|`.
    pub lz_drift: f64,
    /// `max_bodies |Δx| + |Δv|` between the last and first sample.
    pub closure_error: f64,
    /// Same, minimised over cyclic relabelings of the ring.
    pub closure_error_relabel: f64,
    /// Largest relative mismatch between lifted and Newtonian accelerations.
    pub force_residual: f64,
    /// Largest deviation of the reduced energy from its initial value, relative.
    pub reduced_energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: crate::model::SystemParams,
    pub source: SeedPoint,
    /// Number of `(f, r)` periods covered.
    pub periods: u64,
    pub masses: Vec<f64>,
    pub samples: Vec<Sample>,
    pub diagnostics: Diagnostics,
}

/// Integrates `periods` full periods of the orbit launched from `point` and
/// lifts `samples_per_period` samples per period (plus the final instant).
pub fn reconstruct(
    shooter: &Shooter,
    point: &SeedPoint,
    periods: u64,
    samples_per_period: usize,
) -> Result<Trajectory, OrbitError> {
    if periods == 0 || samples_per_period == 0 {
        return Err(OrbitError::InvalidRequest(
            "periods and samples_per_period must be positive".into(),
        ));
    }
    if !(point.a > 0.0 && point.t > 0.0) {
        return Err(OrbitError::InvalidRequest(format!(
            "invalid point a = {}, T = {}",
            point.a, point.t
        )));
    }
    let params = shooter.params;
    let system = ReducedSystem::new(params, point.a);
    let c = system.c;
    let span = point.kind.period_multiple() * point.t * periods as f64;
    let y0: Vector5<f64> = ReducedState::initial(&params, point.b).to_vector();
    let mut cfg = shooter.integrator;
    if cfg.h_max.is_none() {
        cfg.h_max = Some(point.t / 16.0);
    }
    cfg.max_steps = cfg.max_steps.max(200_000);
    let res = flow(&system, 0.0, y0, span, &cfg, true)?;
    let count = periods as usize * samples_per_period + 1;
    let raw = res
        .sample_uniform(0.0, count)
        .ok_or_else(|| OrbitError::InvalidRequest("dense output unavailable".into()))?;

    let mut samples = Vec::with_capacity(count);
    let mut masses = Vec::new();
    let (mut e0, mut lz0, mut er0) = (0.0, 0.0, 0.0);
    let mut d = Diagnostics {
        energy_drift: 0.0,
        momentum_max: 0.0,
        com_max: 0.0,
        lz_drift: 0.0,
        closure_error: 0.0,
        closure_error_relabel: 0.0,
        force_residual: 0.0,
        reduced_energy_drift: 0.0,
    };
    for (i, (t, y)) in raw.iter().enumerate() {
        let state = ReducedState::from_vector(*t, y);
        let cart = cartesian_lift(&state, &params, c);
        let energy = cart.energy();
        let lz = cart.angular_momentum().z;
        let er = reduced_energy(&state, &params, c).map_err(|e| IntegrateError::Singular {
            t_last: *t,
            t_fail: *t,
            reason: e.to_string(),
        })?;
        if i == 0 {
            e0 = energy;
            lz0 = lz;
            er0 = er;
            masses = cart.masses.clone();
        }
        d.energy_drift = d.energy_drift.max(rel(energy, e0));
        d.lz_drift = d.lz_drift.max(rel(lz, lz0));
        d.reduced_energy_drift = d.reduced_energy_drift.max(rel(er, er0));
        d.momentum_max = d.momentum_max.max(cart.linear_momentum().amax());
        d.com_max = d.com_max.max(cart.center_of_mass().norm() / params.r0());

        let newton = full_rhs(&cart).map_err(|e| IntegrateError::Singular {
            t_last: *t,
            t_fail: *t,
            reason: e.to_string(),
        })?;
        let lifted =
            lifted_accelerations(&state, &params, c).map_err(|e| IntegrateError::Singular {
                t_last: *t,
                t_fail: *t,
                reason: e.to_string(),
            })?;
        let scale = newton
            .accelerations
            .iter()
            .map(|a| a.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        for (an, al) in newton.accelerations.iter().zip(&lifted) {
            d.force_residual = d.force_residual.max((an - al).norm() / scale);
        }

        samples.push(Sample {
            t: *t,
            positions: cart.positions.iter().map(|p| [p.x, p.y, p.z]).collect(),
            velocities: cart.velocities.iter().map(|v| [v.x, v.y, v.z]).collect(),
        });
    }
    let (first, last) = (&samples[0], &samples[samples.len() - 1]);
    d.closure_error = closure(first, last, 0);
    let ring = params.n() as usize;
    d.closure_error_relabel = (0..ring)
        .map(|s| closure(first, last, s))
        .fold(f64::INFINITY, f64::min);

    Ok(Trajectory {
        params,
        source: *point,
        periods,
        masses,
        samples,
        diagnostics: d,
    })
}

fn rel(x: f64, x0: f64) -> f64 {
    if x0 == 0.0 {
        (x - x0).abs()
    } else {
        ((x - x0) / x0).abs()
    }
}

/// Closure error when ring body `k` at the end is compared with ring body
/// `k + shift` at the start.
fn closure(first: &Sample, last: &Sample, shift: usize) -> f64 {
    let ring = first.positions.len() - 1;
    let v = |a: &[f64; 3]| Vector3::new(a[0], a[1], a[2]);
    (0..first.positions.len())
        .map(|i| {
            let j = if i == 0 {
                0
            } else {
                1 + (i - 1 + shift) % ring
            };
            (v(&last.positions[i]) - v(&first.positions[j])).norm()
                + (v(&last.velocities[i]) - v(&first.velocities[j])).norm()
        })
        .fold(0.0, f64::max)
}

impl Trajectory {
    /// One row per sample and body: `t,body,x,y,z,vx,vy,vz`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,body,x,y,z,vx,vy,vz\n");
        for s in &self.samples {
            for (b, (p, v)) in s.positions.iter().zip(&s.velocities).enumerate() {
                out.push_str(&format!(
                    "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    s.t, b, p[0], p[1], p[2], v[0], v[1], v[2]
                ));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, OrbitError> {
        serde_json::from_str(text).map_err(|e| OrbitError::Format(e.to_string()))
    }

    /// Short content hash of the inputs that determine the trajectory.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.params).expect("params serialize"));
        h.update(serde_json::to_vec(&self.source).expect("point serializes"));
        h.update(self.periods.to_le_bytes());
        h.update((self.samples.len() as u64).to_le_bytes());
        hex::encode(&h.finalize()[..6])
    }

    /// `<kind>_<n1>pi<n2>_<hash>` for resonant orbits, `<kind>_orbit_<hash>` otherwise.
    pub fn file_stem(&self, target: Option<&ResonanceTarget>) -> String {
        let tag = target.map_or_else(|| "orbit".to_string(), |t| t.tag());
        format!("{}_{}_{}", self.source.kind, tag, self.hash())
    }

    /// Writes `<stem>.csv` and `<stem>.json`, rendering both first.
    pub fn export(
        &self,
        dir: &Path,
        target: Option<&ResonanceTarget>,
    ) -> Result<(PathBuf, PathBuf), OrbitError> {
        let stem = self.file_stem(target);
        let csv = self.to_csv();
        let json = self.to_json();
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        write_atomic(&csv_path, csv.as_bytes())?;
        write_atomic(&json_path, json.as_bytes())?;
        Ok((csv_path, json_path))
    }
}
