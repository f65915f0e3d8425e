//! Physical parameters and right-hand sides for the ring-plus-axial-body problem.
//!
//! `n` equal masses `m` sit on the vertices of a regular polygon of radius `r`
//! in a plane parallel to `xy`, while a body of mass `M` moves along the `z`
//! axis. The motion reduces to the two degrees of freedom `(f, r)` plus the
//! phase `θ`:
//!
//! ```text
//! f'' = -(M + m n) f / h^3
//! r'' = C^2 / r^3 - m λn / r^2 - M r / h^3
//! θ'  = C / r^2,              C = r0 a,  h = sqrt(r^2 + ((M + n m)/(m n))^2 f^2)
//! ```
//!
//! Units use `G = 1`.

use std::f64::consts::PI;

use nalgebra::{SVector, Vector3, Vector5};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// State length of the reduced system `(f, ḟ, r, ṙ, θ)`.
pub const REDUCED_DIM: usize = 5;
/// State length of the reduced system extended by its `(a, b)` sensitivities.
pub const AUGMENTED_DIM: usize = 15;

/// Fraction of `r0` below which the ring radius is treated as a collision.
pub const COLLISION_RADIUS_FRACTION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    Domain(String),
    #[error("singular configuration at t = {t}: {reason}")]
    Singularity { t: f64, reason: String },
    #[error("bodies {0} and {1} coincide")]
    Collision(usize, usize),
    #[error("config parse error: {0}")]
    Parse(String),
}

/// Returns `λn = ¼ Σ_{k=1}^{n-1} csc(kπ/n)`, the mutual attraction constant of
/// a regular `n`-gon of unit radius and unit masses.
pub fn lambda_n(n: u32) -> Result<f64, ModelError> {
    if n < 2 {
        return Err(ModelError::Domain(format!("n must be at least 2, got {n}")));
    }
    let nf = f64::from(n);
    let sum: f64 = (1..n).map(|k| 1.0 / (f64::from(k) * PI / nf).sin()).sum();
    Ok(0.25 * sum)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawParams {
    n: u32,
    m: f64,
    #[serde(rename = "M")]
    big_m: f64,
    r0: f64,
}

/// The physical problem: `n` ring bodies of mass `m`, an axial body of mass
/// `M`, initial ring radius `r0`, together with the constants derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct SystemParams {
    n: u32,
    m: f64,
    axial_mass: f64,
    r0: f64,
    lambda: f64,
}

impl TryFrom<RawParams> for SystemParams {
    type Error = ModelError;

    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        SystemParams::new(raw.n, raw.m, raw.big_m, raw.r0)
    }
}

impl From<SystemParams> for RawParams {
    fn from(p: SystemParams) -> Self {
        RawParams {
            n: p.n,
            m: p.m,
            big_m: p.axial_mass,
            r0: p.r0,
        }
    }
}

impl SystemParams {
    pub fn new(n: u32, m: f64, axial_mass: f64, r0: f64) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::Domain(format!("n must be at least 2, got {n}")));
        }
        if !(m.is_finite() && m > 0.0) {
            return Err(ModelError::Domain(format!(
                "ring mass m must be positive, got {m}"
            )));
        }
        if !(axial_mass.is_finite() && axial_mass >= 0.0) {
            return Err(ModelError::Domain(format!(
                "axial mass M must be non-negative, got {axial_mass}"
            )));
        }
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(ModelError::Domain(format!("r0 must be positive, got {r0}")));
        }
        Ok(SystemParams {
            n,
            m,
            axial_mass,
            r0,
            lambda: lambda_n(n)?,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// Mass `M` of the body on the axis.
    pub fn axial_mass(&self) -> f64 {
        self.axial_mass
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `n m`, total mass of the ring.
    pub fn ring_mass(&self) -> f64 {
        f64::from(self.n) * self.m
    }

    /// `M + n m`.
    pub fn total_mass(&self) -> f64 {
        self.axial_mass + self.ring_mass()
    }

    /// `λn m + M`, the effective central attraction felt by a ring body.
    pub fn ring_attraction(&self) -> f64 {
        self.lambda * self.m + self.axial_mass
    }

    /// `M / (m n)`: ring bodies sit at `z = -(M/(mn)) f`.
    pub fn axial_offset_factor(&self) -> f64 {
        self.axial_mass / self.ring_mass()
    }

    /// `(M + n m) / (m n)`: the axial separation is this factor times `f`.
    pub fn separation_factor(&self) -> f64 {
        self.total_mass() / self.ring_mass()
    }

    /// Angular parameter of the circular solution, `sqrt((λn m + M)/r0)`.
    pub fn a0(&self) -> f64 {
        (self.ring_attraction() / self.r0).sqrt()
    }

    /// First zero of the axial variational solution, `π sqrt(r0³/(n m + M))`.
    pub fn t0(&self) -> f64 {
        PI * (self.r0.powi(3) / self.total_mass()).sqrt()
    }

    /// Angular momentum constant `C = r0 a` (per unit ring mass).
    pub fn angular_momentum(&self, a: f64) -> f64 {
        self.r0 * a
    }

    /// `|h|` for the given axial coordinate and ring radius.
    pub fn separation(&self, f: f64, r: f64) -> f64 {
        let cf = self.separation_factor() * f;
        (r * r + cf * cf).sqrt()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&RawParams::from(*self)).expect("params serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self, ModelError> {
        let raw: RawParams = toml::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        raw.try_into()
    }
}

/// State of the reduced system at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub t: f64,
    pub f: f64,
    pub fdot: f64,
    pub r: f64,
    pub rdot: f64,
    pub theta: f64,
}

impl ReducedState {
    /// Initial condition `f = 0, ḟ = b, r = r0, ṙ = 0, θ = 0`.
    pub fn initial(params: &SystemParams, b: f64) -> Self {
        ReducedState {
            t: 0.0,
            f: 0.0,
            fdot: b,
            r: params.r0(),
            rdot: 0.0,
            theta: 0.0,
        }
    }

    pub fn from_vector(t: f64, y: &Vector5<f64>) -> Self {
        ReducedState {
            t,
            f: y[0],
            fdot: y[1],
            r: y[2],
            rdot: y[3],
            theta: y[4],
        }
    }

    pub fn to_vector(&self) -> Vector5<f64> {
        Vector5::new(self.f, self.fdot, self.r, self.rdot, self.theta)
    }
}

/// Reduced state plus first-order sensitivities with respect to `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedState {
    pub base: ReducedState,
    pub dfa: f64,
    pub dfdota: f64,
    pub dra: f64,
    pub drdota: f64,
    pub dtha: f64,
    pub dfb: f64,
    pub dfdotb: f64,
    pub drb: f64,
    pub drdotb: f64,
    pub dthb: f64,
}

impl AugmentedState {
    /// Initial condition: only `∂ḟ/∂b = 1` is non-zero among the sensitivities.
    pub fn initial(params: &SystemParams, b: f64) -> Self {
        AugmentedState {
            base: ReducedState::initial(params, b),
            dfa: 0.0,
            dfdota: 0.0,
            dra: 0.0,
            drdota: 0.0,
            dtha: 0.0,
            dfb: 0.0,
            dfdotb: 1.0,
            drb: 0.0,
            drdotb: 0.0,
            dthb: 0.0,
        }
    }

    /// Layout: base `(f, ḟ, r, ṙ, θ)`, then the `a` column, then the `b` column.
    pub fn to_vector(&self) -> SVector<f64, AUGMENTED_DIM> {
        let b = &self.base;
        SVector::<f64, AUGMENTED_DIM>::from_column_slice(&[
            b.f,
            b.fdot,
            b.r,
            b.rdot,
            b.theta,
            self.dfa,
            self.dfdota,
            self.dra,
            self.drdota,
            self.dtha,
            self.dfb,
            self.dfdotb,
            self.drb,
            self.drdotb,
            self.dthb,
        ])
    }

    pub fn from_vector(t: f64, y: &SVector<f64, AUGMENTED_DIM>) -> Self {
        AugmentedState {
            base: ReducedState {
                t,
                f: y[0],
                fdot: y[1],
                r: y[2],
                rdot: y[3],
                theta: y[4],
            },
            dfa: y[5],
            dfdota: y[6],
            dra: y[7],
            drdota: y[8],
            dtha: y[9],
            dfb: y[10],
            dfdotb: y[11],
            drb: y[12],
            drdotb: y[13],
            dthb: y[14],
        }
    }
}

fn check_radius(params: &SystemParams, t: f64, r: f64, h: f64) -> Result<(), ModelError> {
    if !(r > COLLISION_RADIUS_FRACTION * params.r0()) || !r.is_finite() {
        return Err(ModelError::Singularity {
            t,
            reason: format!("ring radius collapsed (r = {r:e})"),
        });
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(ModelError::Singularity {
            t,
            reason: format!("axial separation vanished (h = {h:e})"),
        });
    }
    Ok(())
}

/// Time derivative `(ḟ, f̈, ṙ, r̈, θ̇)` of the reduced state for angular momentum `c`.
pub fn reduced_rhs(
    state: &ReducedState,
    params: &SystemParams,
    c: f64,
) -> Result<Vector5<f64>, ModelError> {
    reduced_rhs_vec(state.t, &state.to_vector(), params, c)
}

fn reduced_rhs_vec(
    t: f64,
    y: &Vector5<f64>,
    params: &SystemParams,
    c: f64,
) -> Result<Vector5<f64>, ModelError> {
    let (f, fdot, r, rdot) = (y[0], y[1], y[2], y[3]);
    let h = params.separation(f, r);
    check_radius(params, t, r, h)?;
    let h3 = h * h * h;
    let r2 = r * r;
    let fddot = -params.total_mass() * f / h3;
    let rddot = c * c / (r2 * r) - params.m() * params.lambda() / r2 - params.axial_mass() * r / h3;
    Ok(Vector5::new(fdot, fddot, rdot, rddot, c / r2))
}

/// Derivatives of `h⁻³` with respect to `r` and `f`.
fn inv_h3_partials(params: &SystemParams, f: f64, r: f64, h: f64) -> (f64, f64, f64) {
    let cf = params.separation_factor();
    let h2 = h * h;
    let g = 1.0 / (h2 * h);
    let h5 = h2 * h2 * h;
    (g, -3.0 * r / h5, -3.0 * cf * cf * f / h5)
}

/// Time derivative of the augmented state for angular parameter `a`: the
/// reduced right-hand side plus its linearisation applied to both
/// sensitivity columns. The `a` column carries the explicit `∂/∂a` of the
/// `r0² a² / r³` and `θ̇` terms.
pub fn variational_rhs(
    state: &AugmentedState,
    params: &SystemParams,
    a: f64,
) -> Result<SVector<f64, AUGMENTED_DIM>, ModelError> {
    variational_rhs_vec(state.base.t, &state.to_vector(), params, a)
}

fn variational_rhs_vec(
    t: f64,
    y: &SVector<f64, AUGMENTED_DIM>,
    params: &SystemParams,
    a: f64,
) -> Result<SVector<f64, AUGMENTED_DIM>, ModelError> {
    let c = params.angular_momentum(a);
    let r0 = params.r0();
    let base = Vector5::new(y[0], y[1], y[2], y[3], y[4]);
    let head = reduced_rhs_vec(t, &base, params, c)?;

    let (f, r) = (y[0], y[2]);
    let h = params.separation(f, r);
    let (g, g_r, g_f) = inv_h3_partials(params, f, r, h);
    let k = params.total_mass();
    let big_m = params.axial_mass();
    let r2 = r * r;
    let r3 = r2 * r;
    let r4 = r2 * r2;

    // Jacobian entries of (f̈, r̈, θ̇) with respect to (f, r).
    let ff = -k * (g + f * g_f);
    let fr = -k * f * g_r;
    let rf = -big_m * r * g_f;
    let rr = -3.0 * c * c / r4 + 2.0 * params.m() * params.lambda() / r3 - big_m * (g + r * g_r);
    let thr = -2.0 * c / r3;

    let mut out = SVector::<f64, AUGMENTED_DIM>::zeros();
    out.fixed_rows_mut::<5>(0).copy_from(&head);
    for (col, explicit_rr, explicit_th) in [(5usize, 2.0 * r0 * c / r3, r0 / r2), (10, 0.0, 0.0)] {
        let (df, dfdot, dr, drdot) = (y[col], y[col + 1], y[col + 2], y[col + 3]);
        out[col] = dfdot;
        out[col + 1] = ff * df + fr * dr;
        out[col + 2] = drdot;
        out[col + 3] = rf * df + rr * dr + explicit_rr;
        out[col + 4] = thr * dr + explicit_th;
    }
    Ok(out)
}

/// Conserved energy of the full system expressed in reduced variables:
///
/// `E = M(mn+M)/(2mn) ḟ² + (nm/2)(ṙ² + C²/r²) - n m² λn / r - n m M / h`.
pub fn reduced_energy(
    state: &ReducedState,
    params: &SystemParams,
    c: f64,
) -> Result<f64, ModelError> {
    let h = params.separation(state.f, state.r);
    check_radius(params, state.t, state.r, h)?;
    let nm = params.ring_mass();
    let big_m = params.axial_mass();
    let kinetic_axial = big_m * params.total_mass() / (2.0 * nm) * state.fdot * state.fdot;
    let kinetic_ring = 0.5 * nm * (state.rdot * state.rdot + c * c / (state.r * state.r));
    let ring_ring = nm * params.m() * params.lambda() / state.r;
    let ring_axis = nm * big_m / h;
    Ok(kinetic_axial + kinetic_ring - ring_ring - ring_axis)
}

/// Positions, velocities and masses of point masses in 3-space. Body `0` is
/// the axial body; bodies `1..=n` form the ring.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianState {
    pub masses: Vec<f64>,
    pub positions: Vec<Vector3<f64>>,
    pub velocities: Vec<Vector3<f64>>,
}

/// Time derivative of a [`CartesianState`].
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianRate {
    pub velocities: Vec<Vector3<f64>>,
    pub accelerations: Vec<Vector3<f64>>,
}

impl CartesianState {
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn center_of_mass(&self) -> Vector3<f64> {
        let weighted = self
            .masses
            .iter()
            .zip(&self.positions)
            .fold(Vector3::zeros(), |acc, (m, p)| acc + p * *m);
        weighted / self.total_mass()
    }

    pub fn linear_momentum(&self) -> Vector3<f64> {
        self.masses
            .iter()
            .zip(&self.velocities)
            .fold(Vector3::zeros(), |acc, (m, v)| acc + v * *m)
    }

    pub fn angular_momentum(&self) -> Vector3<f64> {
        self.masses
            .iter()
            .zip(self.positions.iter().zip(&self.velocities))
            .fold(Vector3::zeros(), |acc, (m, (p, v))| acc + p.cross(v) * *m)
    }

    /// Kinetic plus Newtonian potential energy with `G = 1`.
    pub fn energy(&self) -> f64 {
        let kinetic: f64 = self
            .masses
            .iter()
            .zip(&self.velocities)
            .map(|(m, v)| 0.5 * m * v.norm_squared())
            .sum();
        let mut potential = 0.0;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                potential -= self.masses[i] * self.masses[j]
                    / (self.positions[i] - self.positions[j]).norm();
            }
        }
        kinetic + potential
    }
}

/// Rotation about the `z` axis by `angle`.
pub fn z_rotation(angle: f64) -> nalgebra::Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    nalgebra::Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Lifts a reduced state to the positions and velocities of all `n + 1` bodies.
pub fn cartesian_lift(state: &ReducedState, params: &SystemParams, c: f64) -> CartesianState {
    let n = params.n() as usize;
    let offset = params.axial_offset_factor();
    let thetadot = c / (state.r * state.r);
    let (s, co) = state.theta.sin_cos();
    let first_pos = Vector3::new(state.r * co, state.r * s, -offset * state.f);
    let first_vel = Vector3::new(
        state.rdot * co - state.r * thetadot * s,
        state.rdot * s + state.r * thetadot * co,
        -offset * state.fdot,
    );

    let mut masses = Vec::with_capacity(n + 1);
    let mut positions = Vec::with_capacity(n + 1);
    let mut velocities = Vec::with_capacity(n + 1);
    masses.push(params.axial_mass());
    positions.push(Vector3::new(0.0, 0.0, state.f));
    velocities.push(Vector3::new(0.0, 0.0, state.fdot));
    for k in 0..n {
        let rot = z_rotation(2.0 * PI * k as f64 / n as f64);
        masses.push(params.m());
        positions.push(rot * first_pos);
        velocities.push(rot * first_vel);
    }
    CartesianState {
        masses,
        positions,
        velocities,
    }
}

/// Cartesian accelerations implied by the reduced equations, body by body.
pub fn lifted_accelerations(
    state: &ReducedState,
    params: &SystemParams,
    c: f64,
) -> Result<Vec<Vector3<f64>>, ModelError> {
    let rate = reduced_rhs(state, params, c)?;
    let (fddot, rddot, thetadot) = (rate[1], rate[3], rate[4]);
    let n = params.n() as usize;
    let offset = params.axial_offset_factor();
    // The tangential term 2ṙθ̇ + rθ̈ vanishes identically since r²θ̇ is constant.
    let radial = rddot - state.r * thetadot * thetadot;
    let mut out = Vec::with_capacity(n + 1);
    out.push(Vector3::new(0.0, 0.0, fddot));
    for k in 0..n {
        let phi = state.theta + 2.0 * PI * k as f64 / n as f64;
        let (s, co) = phi.sin_cos();
        out.push(Vector3::new(radial * co, radial * s, -offset * fddot));
    }
    Ok(out)
}

/// Pairwise Newtonian gravitation with `G = 1`.
pub fn full_rhs(state: &CartesianState) -> Result<CartesianRate, ModelError> {
    let count = state.len();
    let mut acc = vec![Vector3::zeros(); count];
    for i in 0..count {
        for j in (i + 1)..count {
            let d = state.positions[j] - state.positions[i];
            let dist2 = d.norm_squared();
            if !(dist2 > 0.0) {
                return Err(ModelError::Collision(i, j));
            }
            let inv3 = 1.0 / (dist2 * dist2.sqrt());
            acc[i] += d * (state.masses[j] * inv3);
            acc[j] -= d * (state.masses[i] * inv3);
        }
    }
    Ok(CartesianRate {
        velocities: state.velocities.clone(),
        accelerations: acc,
    })
}

/// A right-hand side for the integrator.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &SVector<f64, N>) -> Result<SVector<f64, N>, ModelError>;
}

/// The reduced system `(f, ḟ, r, ṙ, θ)` for a fixed angular parameter.
#[derive(Debug, Clone, Copy)]
pub struct ReducedSystem {
    pub params: SystemParams,
    pub c: f64,
}

impl ReducedSystem {
    pub fn new(params: SystemParams, a: f64) -> Self {
        ReducedSystem {
            params,
            c: params.angular_momentum(a),
        }
    }
}

impl OdeSystem<REDUCED_DIM> for ReducedSystem {
    fn rhs(&self, t: f64, y: &Vector5<f64>) -> Result<Vector5<f64>, ModelError> {
        reduced_rhs_vec(t, y, &self.params, self.c)
    }
}

/// The reduced system together with its `(a, b)` sensitivity columns.
#[derive(Debug, Clone, Copy)]
pub struct VariationalSystem {
    pub params: SystemParams,
    pub a: f64,
}

impl OdeSystem<AUGMENTED_DIM> for VariationalSystem {
    fn rhs(
        &self,
        t: f64,
        y: &SVector<f64, AUGMENTED_DIM>,
    ) -> Result<SVector<f64, AUGMENTED_DIM>, ModelError> {
        variational_rhs_vec(t, y, &self.params, self.a)
    }
}

/// The reduced system written for `u = f / b`.
///
/// Since `f̈` is linear in `f` for a given `h`, `u` obeys
/// `ü = -(M + m n) u / h³` with `h² = r² + ((M+nm)/(mn))² b² u²`, `u(0) = 0`,
/// `u̇(0) = 1`. The launch speed `b` enters only through `b²`, so the system is
/// regular at `b = 0`, where `u` is the `b`-sensitivity of `f`. The state is
/// `(u, u̇, r, ṙ, θ)`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledSystem {
    pub params: SystemParams,
    pub a: f64,
    pub b: f64,
}

impl ScaledSystem {
    pub fn initial(params: &SystemParams) -> Vector5<f64> {
        Vector5::new(0.0, 1.0, params.r0(), 0.0, 0.0)
    }
}

fn scaled_rhs_vec(
    t: f64,
    y: &Vector5<f64>,
    params: &SystemParams,
    c: f64,
    b: f64,
) -> Result<(Vector5<f64>, f64), ModelError> {
    let (u, udot, r, rdot) = (y[0], y[1], y[2], y[3]);
    let h = params.separation(b * u, r);
    check_radius(params, t, r, h)?;
    let h3 = h * h * h;
    let r2 = r * r;
    let uddot = -params.total_mass() * u / h3;
    let rddot = c * c / (r2 * r) - params.m() * params.lambda() / r2 - params.axial_mass() * r / h3;
    Ok((Vector5::new(udot, uddot, rdot, rddot, c / r2), h))
}

impl OdeSystem<REDUCED_DIM> for ScaledSystem {
    fn rhs(&self, t: f64, y: &Vector5<f64>) -> Result<Vector5<f64>, ModelError> {
        let c = self.params.angular_momentum(self.a);
        scaled_rhs_vec(t, y, &self.params, c, self.b).map(|(d, _)| d)
    }
}

/// [`ScaledSystem`] with sensitivity columns for `a` (entries 5..10) and `b`
/// (entries 10..15). All sensitivities vanish at `t = 0`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledVariationalSystem {
    pub params: SystemParams,
    pub a: f64,
    pub b: f64,
}

impl ScaledVariationalSystem {
    pub fn initial(params: &SystemParams) -> SVector<f64, AUGMENTED_DIM> {
        let mut y = SVector::<f64, AUGMENTED_DIM>::zeros();
        y.fixed_rows_mut::<5>(0)
            .copy_from(&ScaledSystem::initial(params));
        y
    }
}

impl OdeSystem<AUGMENTED_DIM> for ScaledVariationalSystem {
    fn rhs(
        &self,
        t: f64,
        y: &SVector<f64, AUGMENTED_DIM>,
    ) -> Result<SVector<f64, AUGMENTED_DIM>, ModelError> {
        let p = &self.params;
        let c = p.angular_momentum(self.a);
        let b = self.b;
        let base = Vector5::new(y[0], y[1], y[2], y[3], y[4]);
        let (head, h) = scaled_rhs_vec(t, &base, p, c, b)?;

        let (u, r) = (y[0], y[2]);
        let cf = p.separation_factor();
        let h2 = h * h;
        let g = 1.0 / (h2 * h);
        let h5 = h2 * h2 * h;
        let g_r = -3.0 * r / h5;
        let g_u = -3.0 * cf * cf * b * b * u / h5;
        let g_b = -3.0 * cf * cf * b * u * u / h5;
        let k = p.total_mass();
        let big_m = p.axial_mass();
        let r2 = r * r;
        let r3 = r2 * r;
        let r4 = r2 * r2;

        let uu = -k * (g + u * g_u);
        let ur = -k * u * g_r;
        let ru = -big_m * r * g_u;
        let rr = -3.0 * c * c / r4 + 2.0 * p.m() * p.lambda() / r3 - big_m * (g + r * g_r);
        let thr = -2.0 * c / r3;
        let r0 = p.r0();

        let mut out = SVector::<f64, AUGMENTED_DIM>::zeros();
        out.fixed_rows_mut::<5>(0).copy_from(&head);
        // (column, explicit ∂ü, explicit ∂r̈, explicit ∂θ̇)
        let explicit = [
            (5usize, 0.0, 2.0 * r0 * c / r3, r0 / r2),
            (10, -k * u * g_b, -big_m * r * g_b, 0.0),
        ];
        for (col, e_u, e_r, e_th) in explicit {
            let (du, dudot, dr, drdot) = (y[col], y[col + 1], y[col + 2], y[col + 3]);
            out[col] = dudot;
            out[col + 1] = uu * du + ur * dr + e_u;
            out[col + 2] = drdot;
            out[col + 3] = ru * du + rr * dr + e_r;
            out[col + 4] = thr * dr + e_th;
        }
        Ok(out)
    }
}
