//! Adaptive explicit Runge–Kutta integration with dense output.
//!
//! The scheme is Dormand–Prince 8(5,3) (`DOP853`, Hairer, Nørsett & Wanner):
//! twelve stages per step, an error estimate blending the embedded fifth- and
//! third-order solutions, and a seventh-order continuous extension that costs
//! three extra stages per step. Step sizes follow a PI (Lund-stabilised)
//! controller. The tableau below is fixed so runs are reproducible bit for bit.

use nalgebra::SVector;
use thiserror::Error;

use nalgebra::Vector5;

use crate::model::{ModelError, OdeSystem, ScaledSystem, ScaledVariationalSystem, SystemParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("invalid integrator configuration: {0}")]
    Config(String),
    #[error("singularity between t = {t_last} and t = {t_fail}: {reason}")]
    Singular {
        t_last: f64,
        t_fail: f64,
        reason: String,
    },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget of {steps} exhausted at t = {t}")]
    StepBudget { t: f64, steps: usize },
}

impl IntegrateError {
    /// Whether the failure looks like an approach to a collision.
    pub fn is_singular(&self) -> bool {
        matches!(
            self,
            IntegrateError::Singular { .. } | IntegrateError::StepUnderflow { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    /// Maximum step; the full interval when `None`.
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            h_init: None,
            h_max: None,
            max_steps: 200_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerance(tol: f64) -> Self {
        IntegratorConfig {
            rel_tol: tol,
            abs_tol: tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        for (name, tol) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(tol > 0.0 && tol <= 1e-3) {
                return Err(IntegrateError::Config(format!(
                    "{name} must lie in (0, 1e-3], got {tol}"
                )));
            }
        }
        if self.max_steps < 1 {
            return Err(IntegrateError::Config(
                "max_steps must be at least 1".into(),
            ));
        }
        if let Some(h) = self.h_init {
            if !(h > 0.0 && h.is_finite()) {
                return Err(IntegrateError::Config(format!(
                    "h_init must be positive, got {h}"
                )));
            }
        }
        if let Some(h) = self.h_max {
            if !(h > 0.0) {
                return Err(IntegrateError::Config(format!(
                    "h_max must be positive, got {h}"
                )));
            }
        }
        Ok(())
    }
}

/// Continuous extension over one accepted step.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub t_start: f64,
    pub t_end: f64,
    h: f64,
    cont: [SVector<f64, N>; 8],
    y_end: SVector<f64, N>,
}

impl<const N: usize> DenseStep<N> {
    /// State at `t`, exact at both step endpoints.
    pub fn eval(&self, t: f64) -> SVector<f64, N> {
        if t == self.t_end {
            return self.y_end;
        }
        if t == self.t_start {
            return self.cont[0];
        }
        let s = (t - self.t_start) / self.h;
        let s1 = 1.0 - s;
        let c = &self.cont;
        let conpar = c[4] + (c[5] + (c[6] + c[7] * s) * s1) * s;
        c[0] + (c[1] + (c[2] + (c[3] + conpar * s1) * s) * s1) * s
    }
}

#[derive(Debug, Clone)]
pub struct FlowResult<const N: usize> {
    pub t_end: f64,
    pub y_end: SVector<f64, N>,
    pub steps: usize,
    pub rejected: usize,
    /// Per-step continuous extensions, present when requested.
    pub dense: Option<Vec<DenseStep<N>>>,
}

impl<const N: usize> FlowResult<N> {
    /// Dense-output state at `t`, or `None` when `t` lies outside the
    /// integrated interval or no dense output was recorded.
    pub fn eval(&self, t: f64) -> Option<SVector<f64, N>> {
        let steps = self.dense.as_ref()?;
        let first = steps.first()?;
        let forward = first.h > 0.0;
        let idx = if forward {
            steps.partition_point(|s| s.t_end < t)
        } else {
            steps.partition_point(|s| s.t_end > t)
        };
        let step = steps.get(idx)?;
        let inside = if forward {
            t >= step.t_start && t <= step.t_end
        } else {
            t <= step.t_start && t >= step.t_end
        };
        inside.then(|| step.eval(t))
    }

    /// `count` samples equally spaced over `[t_start, t_end]`, endpoints included.
    pub fn sample_uniform(
        &self,
        t_start: f64,
        count: usize,
    ) -> Option<Vec<(f64, SVector<f64, N>)>> {
        if count < 2 {
            return None;
        }
        let span = self.t_end - t_start;
        (0..count)
            .map(|i| {
                let t = if i + 1 == count {
                    self.t_end
                } else {
                    t_start + span * i as f64 / (count - 1) as f64
                };
                self.eval(t).map(|y| (t, y))
            })
            .collect()
    }
}

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;
const BETA: f64 = 0.04;
const EXPO1: f64 = 1.0 / 8.0 - BETA * 0.2;

/// Integrates `system` from `(t0, y0)` to `t_end`. The final state is taken at
/// `t_end` exactly.
pub fn flow<S, const N: usize>(
    system: &S,
    t0: f64,
    y0: SVector<f64, N>,
    t_end: f64,
    config: &IntegratorConfig,
    dense: bool,
) -> Result<FlowResult<N>, IntegrateError>
where
    S: OdeSystem<N>,
{
    config.validate()?;
    if !t_end.is_finite() || !t0.is_finite() {
        return Err(IntegrateError::Config(format!(
            "non-finite time interval [{t0}, {t_end}]"
        )));
    }
    let mut dense_steps = dense.then(Vec::new);
    if t_end == t0 {
        return Ok(FlowResult {
            t_end,
            y_end: y0,
            steps: 0,
            rejected: 0,
            dense: dense_steps,
        });
    }

    let posneg = (t_end - t0).signum();
    let span = (t_end - t0).abs();
    let h_max = config.h_max.unwrap_or(span).min(span);
    let singular = |t_last: f64, t_fail: f64, e: ModelError| IntegrateError::Singular {
        t_last,
        t_fail,
        reason: e.to_string(),
    };

    let mut t = t0;
    let mut y = y0;
    let mut k1 = system.rhs(t, &y).map_err(|e| singular(t, t, e))?;
    let mut h = match config.h_init {
        Some(h) => h.min(h_max),
        None => initial_step(system, t, &y, &k1, posneg, h_max, config)
            .map_err(|e| singular(t, t, e))?,
    } * posneg;

    let mut facold: f64 = 1e-4;
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut last_rejected = false;

    loop {
        if steps >= config.max_steps {
            return Err(IntegrateError::StepBudget { t, steps });
        }
        let h_floor = 1e-14 * t.abs().max(span);
        if h.abs() < h_floor {
            return Err(IntegrateError::StepUnderflow { t, h });
        }
        let mut last = false;
        if (t + 1.01 * h - t_end) * posneg > 0.0 {
            h = t_end - t;
            last = true;
        }
        steps += 1;

        let trial = match try_step(system, t, &y, &k1, h, config) {
            Ok(trial) => trial,
            Err(e) => {
                // A stage left the admissible region; retreat and retry.
                let shrunk = h * 0.25;
                if shrunk.abs() < h_floor {
                    return Err(singular(t, t + h, e));
                }
                h = shrunk;
                rejected += 1;
                last_rejected = true;
                continue;
            }
        };

        let err = trial.err;
        let fac11 = err.powf(EXPO1);
        let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
        let mut h_new = h / fac;

        if err <= 1.0 {
            facold = err.max(1e-4);
            let t_new = if last { t_end } else { t + h };
            let k_new = match system.rhs(t_new, &trial.y_new) {
                Ok(k) => k,
                Err(e) => {
                    let shrunk = h * 0.25;
                    if shrunk.abs() < h_floor {
                        return Err(singular(t, t_new, e));
                    }
                    h = shrunk;
                    rejected += 1;
                    last_rejected = true;
                    continue;
                }
            };
            if let Some(out) = dense_steps.as_mut() {
                let step = dense_coefficients(system, t, &y, &k1, &trial, &k_new, h, t_new)
                    .map_err(|e| singular(t, t_new, e))?;
                out.push(step);
            }
            t = t_new;
            y = trial.y_new;
            k1 = k_new;
            if last {
                return Ok(FlowResult {
                    t_end,
                    y_end: y,
                    steps,
                    rejected,
                    dense: dense_steps,
                });
            }
            if h_new.abs() > h_max {
                h_new = posneg * h_max;
            }
            if last_rejected {
                h_new = posneg * h_new.abs().min(h.abs());
            }
            last_rejected = false;
        } else {
            h_new = h / (1.0 / FAC_MIN).min(fac11 / SAFE);
            rejected += 1;
            last_rejected = true;
        }
        h = h_new;
    }
}

struct Trial<const N: usize> {
    y_new: SVector<f64, N>,
    err: f64,
    k: [SVector<f64, N>; 12],
}

fn try_step<S, const N: usize>(
    system: &S,
    t: f64,
    y: &SVector<f64, N>,
    k1: &SVector<f64, N>,
    h: f64,
    config: &IntegratorConfig,
) -> Result<Trial<N>, ModelError>
where
    S: OdeSystem<N>,
{
    use tableau::*;
    let f = |c: f64, incr: SVector<f64, N>| system.rhs(t + c * h, &(y + incr * h));
    let k2 = f(C2, k1 * A21)?;
    let k3 = f(C3, k1 * A31 + k2 * A32)?;
    let k4 = f(C4, k1 * A41 + k3 * A43)?;
    let k5 = f(C5, k1 * A51 + k3 * A53 + k4 * A54)?;
    let k6 = f(C6, k1 * A61 + k4 * A64 + k5 * A65)?;
    let k7 = f(C7, k1 * A71 + k4 * A74 + k5 * A75 + k6 * A76)?;
    let k8 = f(C8, k1 * A81 + k4 * A84 + k5 * A85 + k6 * A86 + k7 * A87)?;
    let k9 = f(
        C9,
        k1 * A91 + k4 * A94 + k5 * A95 + k6 * A96 + k7 * A97 + k8 * A98,
    )?;
    let k10 = f(
        C10,
        k1 * A101 + k4 * A104 + k5 * A105 + k6 * A106 + k7 * A107 + k8 * A108 + k9 * A109,
    )?;
    let k11 = f(
        C11,
        k1 * A111
            + k4 * A114
            + k5 * A115
            + k6 * A116
            + k7 * A117
            + k8 * A118
            + k9 * A119
            + k10 * A1110,
    )?;
    let k12 = system.rhs(
        t + h,
        &(y + (k1 * A121
            + k4 * A124
            + k5 * A125
            + k6 * A126
            + k7 * A127
            + k8 * A128
            + k9 * A129
            + k10 * A1210
            + k11 * A1211)
            * h),
    )?;
    let incr = k1 * B1 + k6 * B6 + k7 * B7 + k8 * B8 + k9 * B9 + k10 * B10 + k11 * B11 + k12 * B12;
    let y_new = y + incr * h;

    let mut err5 = 0.0;
    let mut err3 = 0.0;
    for i in 0..N {
        let sk = config.abs_tol + config.rel_tol * y[i].abs().max(y_new[i].abs());
        let e5 = incr[i] - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
        let e3 = ER1 * k1[i]
            + ER6 * k6[i]
            + ER7 * k7[i]
            + ER8 * k8[i]
            + ER9 * k9[i]
            + ER10 * k10[i]
            + ER11 * k11[i]
            + ER12 * k12[i];
        err5 += (e5 / sk).powi(2);
        err3 += (e3 / sk).powi(2);
    }
    let mut deno = err3 + 0.01 * err5;
    if deno <= 0.0 {
        deno = 1.0;
    }
    let err = h.abs() * err3 * (1.0 / (deno * N as f64)).sqrt();
    if !err.is_finite() || !y_new.iter().all(|v| v.is_finite()) {
        return Err(ModelError::Singularity {
            t: t + h,
            reason: "non-finite state".into(),
        });
    }
    Ok(Trial {
        y_new,
        err,
        k: [*k1, k2, k3, k4, k5, k6, k7, k8, k9, k10, k11, k12],
    })
}

#[allow(clippy::too_many_arguments)]
fn dense_coefficients<S, const N: usize>(
    system: &S,
    t: f64,
    y: &SVector<f64, N>,
    k1: &SVector<f64, N>,
    trial: &Trial<N>,
    k_new: &SVector<f64, N>,
    h: f64,
    t_new: f64,
) -> Result<DenseStep<N>, ModelError>
where
    S: OdeSystem<N>,
{
    use tableau::*;
    let k = &trial.k;
    let (k6, k7, k8, k9, k10, k11, k12) = (&k[5], &k[6], &k[7], &k[8], &k[9], &k[10], &k[11]);
    let ydiff = trial.y_new - y;
    let bspl = k1 * h - ydiff;
    let mut cont = [SVector::<f64, N>::zeros(); 8];
    cont[0] = *y;
    cont[1] = ydiff;
    cont[2] = bspl;
    cont[3] = ydiff - k_new * h - bspl;

    let k14 = system.rhs(
        t + C14 * h,
        &(y + (k1 * A141
            + k7 * A147
            + k8 * A148
            + k9 * A149
            + k10 * A1410
            + k11 * A1411
            + k12 * A1412
            + k_new * A1413)
            * h),
    )?;
    let k15 = system.rhs(
        t + C15 * h,
        &(y + (k1 * A151
            + k6 * A156
            + k7 * A157
            + k8 * A158
            + k11 * A1511
            + k12 * A1512
            + k_new * A1513
            + k14 * A1514)
            * h),
    )?;
    let k16 = system.rhs(
        t + C16 * h,
        &(y + (k1 * A161
            + k6 * A166
            + k7 * A167
            + k8 * A168
            + k9 * A169
            + k_new * A1613
            + k14 * A1614
            + k15 * A1615)
            * h),
    )?;

    for (row, d) in D.iter().enumerate() {
        let acc = k1 * d[0]
            + k6 * d[5]
            + k7 * d[6]
            + k8 * d[7]
            + k9 * d[8]
            + k10 * d[9]
            + k11 * d[10]
            + k12 * d[11]
            + k_new * d[12]
            + k14 * d[13]
            + k15 * d[14]
            + k16 * d[15];
        cont[4 + row] = acc * h;
    }
    Ok(DenseStep {
        t_start: t,
        t_end: t_new,
        h,
        cont,
        y_end: trial.y_new,
    })
}

fn initial_step<S, const N: usize>(
    system: &S,
    t: f64,
    y: &SVector<f64, N>,
    k1: &SVector<f64, N>,
    posneg: f64,
    h_max: f64,
    config: &IntegratorConfig,
) -> Result<f64, ModelError>
where
    S: OdeSystem<N>,
{
    let sk = y.map(|v| config.abs_tol + config.rel_tol * v.abs());
    let dnf: f64 = k1.component_div(&sk).norm_squared();
    let dny: f64 = y.component_div(&sk).norm_squared();
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(h_max);
    let k2 = system.rhs(t + posneg * h, &(y + k1 * (posneg * h)))?;
    let der2 = (k2 - k1).component_div(&sk).norm() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(1.0 / 8.0)
    };
    Ok((100.0 * h).min(h1).min(h_max))
}

/// Values of the solution with initial condition `f = 0, ḟ = b, r = r0,
/// ṙ = 0, θ = 0` at time `T`.
///
/// The axial motion is integrated as `u = f / b`, so `u` and `u̇` are the
/// desingularised `F̃` and `W` and remain meaningful at `b = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub a: f64,
    pub b: f64,
    pub t: f64,
    pub f: f64,
    pub ft: f64,
    pub r: f64,
    pub rt: f64,
    pub theta: f64,
    /// `F / b`, equal to `F_b` at `b = 0`.
    pub u: f64,
    /// `F_t / b`, equal to `F_bt` at `b = 0`.
    pub ut: f64,
    pub utt: f64,
    pub rtt: f64,
    pub theta_t: f64,
    pub sens: Option<Sensitivities>,
}

/// First-order `(a, b)` sensitivities of the scaled state `(u, u̇, r, ṙ, θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivities {
    pub u_a: f64,
    pub ut_a: f64,
    pub r_a: f64,
    pub rt_a: f64,
    pub theta_a: f64,
    pub u_b: f64,
    pub ut_b: f64,
    pub r_b: f64,
    pub rt_b: f64,
    pub theta_b: f64,
}

impl Evaluation {
    fn sens(&self) -> &Sensitivities {
        self.sens
            .as_ref()
            .expect("evaluation carries no sensitivities")
    }

    /// `∂F/∂a`. Panics unless evaluated with sensitivities.
    pub fn f_a(&self) -> f64 {
        self.b * self.sens().u_a
    }

    /// `∂F/∂b`.
    pub fn f_b(&self) -> f64 {
        self.u + self.b * self.sens().u_b
    }

    pub fn ft_a(&self) -> f64 {
        self.b * self.sens().ut_a
    }

    pub fn ft_b(&self) -> f64 {
        self.ut + self.b * self.sens().ut_b
    }
}

/// Flows the scaled system to `T` and reads off `(F, F_t, R, R_t, Θ)`, plus
/// sensitivities if `augmented`. Without an explicit `h_max` the step is
/// capped at `T / 16`.
pub fn eval_at(
    a: f64,
    b: f64,
    t: f64,
    params: &SystemParams,
    config: &IntegratorConfig,
    augmented: bool,
) -> Result<Evaluation, IntegrateError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(IntegrateError::Config(format!(
            "evaluation time must be positive, got {t}"
        )));
    }
    let mut cfg = *config;
    if cfg.h_max.is_none() {
        cfg.h_max = Some(t / 16.0);
    }
    let c = params.angular_momentum(a);
    let (y, sens) = if augmented {
        let system = ScaledVariationalSystem {
            params: *params,
            a,
            b,
        };
        let end = flow(
            &system,
            0.0,
            ScaledVariationalSystem::initial(params),
            t,
            &cfg,
            false,
        )?
        .y_end;
        let sens = Sensitivities {
            u_a: end[5],
            ut_a: end[6],
            r_a: end[7],
            rt_a: end[8],
            theta_a: end[9],
            u_b: end[10],
            ut_b: end[11],
            r_b: end[12],
            rt_b: end[13],
            theta_b: end[14],
        };
        (
            Vector5::new(end[0], end[1], end[2], end[3], end[4]),
            Some(sens),
        )
    } else {
        let system = ScaledSystem {
            params: *params,
            a,
            b,
        };
        (
            flow(&system, 0.0, ScaledSystem::initial(params), t, &cfg, false)?.y_end,
            None,
        )
    };
    let rate = ScaledSystem {
        params: *params,
        a,
        b,
    }
    .rhs(t, &y)
    .map_err(|e| IntegrateError::Singular {
        t_last: t,
        t_fail: t,
        reason: e.to_string(),
    })?;
    debug_assert_eq!(rate[4], c / (y[2] * y[2]));
    Ok(Evaluation {
        a,
        b,
        t,
        f: b * y[0],
        ft: b * y[1],
        r: y[2],
        rt: y[3],
        theta: y[4],
        u: y[0],
        ut: y[1],
        utt: rate[1],
        rtt: rate[3],
        theta_t: rate[4],
        sens,
    })
}

/// DOP853 coefficients (Hairer & Wanner, `dop853.f`).
#[allow(clippy::excessive_precision)]
mod tableau {
    pub const C2: f64 = 0.526001519587677318785587544488e-01;
    pub const C3: f64 = 0.789002279381515978178381316732e-01;
    pub const C4: f64 = 0.118350341907227396726757197510e+00;
    pub const C5: f64 = 0.281649658092772603273242802490e+00;
    pub const C6: f64 = 0.333333333333333333333333333333e+00;
    pub const C7: f64 = 0.25e+00;
    pub const C8: f64 = 0.307692307692307692307692307692e+00;
    pub const C9: f64 = 0.651282051282051282051282051282e+00;
    pub const C10: f64 = 0.6e+00;
    pub const C11: f64 = 0.857142857142857142857142857142e+00;
    pub const C14: f64 = 0.1e+00;
    pub const C15: f64 = 0.2e+00;
    pub const C16: f64 = 0.777777777777777777777777777778e+00;

    pub const B1: f64 = 5.42937341165687622380535766363e-2;
    pub const B6: f64 = 4.45031289275240888144113950566e0;
    pub const B7: f64 = 1.89151789931450038304281599044e0;
    pub const B8: f64 = -5.8012039600105847814672114227e0;
    pub const B9: f64 = 3.1116436695781989440891606237e-1;
    pub const B10: f64 = -1.52160949662516078556178806805e-1;
    pub const B11: f64 = 2.01365400804030348374776537501e-1;
    pub const B12: f64 = 4.47106157277725905176885569043e-2;

    pub const BHH1: f64 = 0.244094488188976377952755905512e+00;
    pub const BHH2: f64 = 0.733846688281611857341361741547e+00;
    pub const BHH3: f64 = 0.220588235294117647058823529412e-01;

    pub const ER1: f64 = 0.1312004499419488073250102996e-01;
    pub const ER6: f64 = -0.1225156446376204440720569753e+01;
    pub const ER7: f64 = -0.4957589496572501915214079952e+00;
    pub const ER8: f64 = 0.1664377182454986536961530415e+01;
    pub const ER9: f64 = -0.3503288487499736816886487290e+00;
    pub const ER10: f64 = 0.3341791187130174790297318841e+00;
    pub const ER11: f64 = 0.8192320648511571246570742613e-01;
    pub const ER12: f64 = -0.2235530786388629525884427845e-01;

    pub const A21: f64 = 5.26001519587677318785587544488e-2;
    pub const A31: f64 = 1.97250569845378994544595329183e-2;
    pub const A32: f64 = 5.91751709536136983633785987549e-2;
    pub const A41: f64 = 2.95875854768068491816892993775e-2;
    pub const A43: f64 = 8.87627564304205475450678981324e-2;
    pub const A51: f64 = 2.41365134159266685502369798665e-1;
    pub const A53: f64 = -8.84549479328286085344864962717e-1;
    pub const A54: f64 = 9.24834003261792003115737966543e-1;
    pub const A61: f64 = 3.7037037037037037037037037037e-2;
    pub const A64: f64 = 1.70828608729473871279604482173e-1;
    pub const A65: f64 = 1.25467687566822425016691814123e-1;
    pub const A71: f64 = 3.7109375e-2;
    pub const A74: f64 = 1.70252211019544039314978060272e-1;
    pub const A75: f64 = 6.02165389804559606850219397283e-2;
    pub const A76: f64 = -1.7578125e-2;
    pub const A81: f64 = 3.70920001185047927108779319836e-2;
    pub const A84: f64 = 1.70383925712239993810214054705e-1;
    pub const A85: f64 = 1.07262030446373284651809199168e-1;
    pub const A86: f64 = -1.53194377486244017527936158236e-2;
    pub const A87: f64 = 8.27378916381402288758473766002e-3;
    pub const A91: f64 = 6.24110958716075717114429577812e-1;
    pub const A94: f64 = -3.36089262944694129406857109825e0;
    pub const A95: f64 = -8.68219346841726006818189891453e-1;
    pub const A96: f64 = 2.75920996994467083049415600797e1;
    pub const A97: f64 = 2.01540675504778934086186788979e1;
    pub const A98: f64 = -4.34898841810699588477366255144e1;
    pub const A101: f64 = 4.77662536438264365890433908527e-1;
    pub const A104: f64 = -2.48811461997166764192642586468e0;
    pub const A105: f64 = -5.90290826836842996371446475743e-1;
    pub const A106: f64 = 2.12300514481811942347288949897e1;
    pub const A107: f64 = 1.52792336328824235832596922938e1;
    pub const A108: f64 = -3.32882109689848629194453265587e1;
    pub const A109: f64 = -2.03312017085086261358222928593e-2;
    pub const A111: f64 = -9.3714243008598732571704021658e-1;
    pub const A114: f64 = 5.18637242884406370830023853209e0;
    pub const A115: f64 = 1.09143734899672957818500254654e0;
    pub const A116: f64 = -8.14978701074692612513997267357e0;
    pub const A117: f64 = -1.85200656599969598641566180701e1;
    pub const A118: f64 = 2.27394870993505042818970056734e1;
    pub const A119: f64 = 2.49360555267965238987089396762e0;
    pub const A1110: f64 = -3.0467644718982195003823669022e0;
    pub const A121: f64 = 2.27331014751653820792359768449e0;
    pub const A124: f64 = -1.05344954667372501984066689879e1;
    pub const A125: f64 = -2.00087205822486249909675718444e0;
    pub const A126: f64 = -1.79589318631187989172765950534e1;
    pub const A127: f64 = 2.79488845294199600508499808837e1;
    pub const A128: f64 = -2.85899827713502369474065508674e0;
    pub const A129: f64 = -8.87285693353062954433549289258e0;
    pub const A1210: f64 = 1.23605671757943030647266201528e1;
    pub const A1211: f64 = 6.43392746015763530355970484046e-1;

    pub const A141: f64 = 5.61675022830479523392909219681e-2;
    pub const A147: f64 = 2.53500210216624811088794765333e-1;
    pub const A148: f64 = -2.46239037470802489917441475441e-1;
    pub const A149: f64 = -1.24191423263816360469010140626e-1;
    pub const A1410: f64 = 1.5329179827876569731206322685e-1;
    pub const A1411: f64 = 8.20105229563468988491666602057e-3;
    pub const A1412: f64 = 7.56789766054569976138603589584e-3;
    pub const A1413: f64 = -8.298e-3;
    pub const A151: f64 = 3.18346481635021405060768473261e-2;
    pub const A156: f64 = 2.83009096723667755288322961402e-2;
    pub const A157: f64 = 5.35419883074385676223797384372e-2;
    pub const A158: f64 = -5.49237485713909884646569340306e-2;
    pub const A1511: f64 = -1.08347328697249322858509316994e-4;
    pub const A1512: f64 = 3.82571090835658412954920192323e-4;
    pub const A1513: f64 = -3.40465008687404560802977114492e-4;
    pub const A1514: f64 = 1.41312443674632500278074618366e-1;
    pub const A161: f64 = -4.28896301583791923408573538692e-1;
    pub const A166: f64 = -4.69762141536116384314449447206e0;
    pub const A167: f64 = 7.68342119606259904184240953878e0;
    pub const A168: f64 = 4.06898981839711007970213554331e0;
    pub const A169: f64 = 3.56727187455281109270669543021e-1;
    pub const A1613: f64 = -1.39902416515901462129418009734e-3;
    pub const A1614: f64 = 2.9475147891527723389556272149e0;
    pub const A1615: f64 = -9.15095847217987001081870187138e0;

    /// Dense-output weights; column `j` multiplies stage `j + 1` (stage 13 is
    /// the derivative at the step end, 14–16 the extra stages).
    pub const D: [[f64; 16]; 4] = [
        [
            -0.84289382761090128651353491142e+01,
            0.0,
            0.0,
            0.0,
            0.0,
            0.56671495351937776962531783590e+00,
            -0.30689499459498916912797304727e+01,
            0.23846676565120698287728149680e+01,
            0.21170345824450282767155149946e+01,
            -0.87139158377797299206789907490e+00,
            0.22404374302607882758541771650e+01,
            0.63157877876946881815570249290e+00,
            -0.88990336451333310820698117400e-01,
            0.18148505520854727256656404962e+02,
            -0.91946323924783554000451984436e+01,
            -0.44360363875948939664310572000e+01,
        ],
        [
            0.10427508642579134603413151009e+02,
            0.0,
            0.0,
            0.0,
            0.0,
            0.24228349177525818288430175319e+03,
            0.16520045171727028198505394887e+03,
            -0.37454675472269020279518312152e+03,
            -0.22113666853125306036270938578e+02,
            0.77334326684722638389603898808e+01,
            -0.30674084731089398182061213626e+02,
            -0.93321305264302278729567221706e+01,
            0.15697238121770843886131091075e+02,
            -0.31139403219565177677282850411e+02,
            -0.93529243588444783865713862664e+01,
            0.35816841486394083752465898540e+02,
        ],
        [
            0.19985053242002433820987653617e+02,
            0.0,
            0.0,
            0.0,
            0.0,
            -0.38703730874935176555105901742e+03,
            -0.18917813819516756882830838328e+03,
            0.52780815920542364900561016686e+03,
            -0.11573902539959630126141871134e+02,
            0.68812326946963000169666922661e+01,
            -0.10006050966910838403183860980e+01,
            0.77771377980534432092869265740e+00,
            -0.27782057523535084065932004339e+01,
            -0.60196695231264120758267380846e+02,
            0.84320405506677161018159903784e+02,
            0.11992291136182789328035130030e+02,
        ],
        [
            -0.25693933462703749003312586129e+02,
            0.0,
            0.0,
            0.0,
            0.0,
            -0.15418974869023643374053993627e+03,
            -0.23152937917604549567536039109e+03,
            0.35763911791061412378285349910e+03,
            0.93405324183624310003907691704e+02,
            -0.37458323136451633156875139351e+02,
            0.10409964950896230045147246184e+03,
            0.29840293426660503123344363579e+02,
            -0.43533456590011143754432175058e+02,
            0.96324553959188282948394950600e+02,
            -0.39177261675615439165231486172e+02,
            -0.14972683625798562581422125276e+03,
        ],
    ];
}
