//! Discretization and time stepping of the graph flow, in physical and
//! rescaled variables, plus the trajectory loop with modulation refits.
//!
//! The rescaled radius `v(y, θ, τ)` evolves by the quasilinear equation
//! `∂_τ v = A_v v + a v − v⁻¹`, where `A_v` is built from the bounded
//! coefficients of [`crate::profile::FlowCoefficients`] at slopes
//! `p = ∂_y v`, `q = v⁻¹ ∂_θ v`, and `a = −λ ∂_t λ` is the rescaling rate.
//! `θ`-derivatives are Fourier collocation, `y`-derivatives centered
//! 4th-order stencils with short one-sided boundary closures.

use crate::decomp::{self, Decomposition};
use crate::error::{Error, Result};
use crate::field::{deriv_y, GraphField, ThetaDiff};
use crate::profile::{FlowCoefficients, FormalProfile, StepProfile};
use crate::surface::{Frame, RigidMotion};

/// Positivity floor for the rescaled radius: half the step function's inner
/// value. Any Runge-Kutta stage dipping below this rejects the step.
pub fn v_floor() -> f64 {
    0.5 * StepProfile::<f64>::default().inner_value
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub v: GraphField,
    pub lambda: f64,
    pub a: f64,
    pub t: f64,
    pub tau: f64,
}

impl FlowState {
    /// Initial state at `τ = 0` with `λ₀ = 1`, so `v₀ = u₀` and `y = x`.
    pub fn initial(v: GraphField, a: f64) -> Self {
        Self {
            v,
            lambda: 1.0,
            a,
            t: 0.0,
            tau: 0.0,
        }
    }
}

/// Predicted blowup time from the current scale: `T̂ = t + λ²/(2a)`.
pub fn estimate_t(state: &FlowState) -> Result<f64> {
    if state.a <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "estimate_T needs a > 0, got a = {}",
            state.a
        )));
    }
    Ok(state.t + state.lambda * state.lambda / (2.0 * state.a))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub y_max: f64,
    pub n_y: usize,
    pub n_theta: usize,
    /// Courant factor in `dt = cfl · min(Δy², min(v)² Δθ²)/2`.
    pub cfl: f64,
    /// Rescaled-time interval between decomposition refits.
    pub refit_interval: f64,
    /// Re-gauge into optimal coordinates every this many refits (0 = never).
    pub optimal_every: usize,
    /// Rescaled-time interval between trajectory samples.
    pub sample_interval: f64,
    /// Rescaled-time interval between field snapshots (0 = never).
    pub snapshot_interval: f64,
    /// Stop when `λ` falls to this value (`λ₀ = 1`).
    pub lambda_min: f64,
    /// Stop when the rescaled radius minimum falls to this value.
    pub v_min: f64,
    /// Stop at this rescaled time.
    pub tau_max: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            y_max: 16.0,
            n_y: 321,
            n_theta: 32,
            cfl: 0.45,
            refit_interval: 0.1,
            optimal_every: 10,
            sample_interval: 0.05,
            snapshot_interval: 1.0,
            lambda_min: 0.05,
            v_min: 0.75,
            tau_max: 12.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.y_max <= 0.0 {
            return Err(Error::InvalidConfig("y_max must be positive".into()));
        }
        if self.n_y < 9 || self.n_y % 2 == 0 {
            return Err(Error::InvalidConfig(
                "n_y must be odd and at least 9 (Simpson quadrature)".into(),
            ));
        }
        if self.n_theta < 4 || self.n_theta % 2 != 0 {
            return Err(Error::InvalidConfig("n_theta must be even and >= 4".into()));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidConfig("cfl must lie in (0, 1]".into()));
        }
        if self.refit_interval <= 0.0 || self.sample_interval <= 0.0 {
            return Err(Error::InvalidConfig(
                "refit and sample intervals must be positive".into(),
            ));
        }
        if self.tau_max < 0.0 || self.lambda_min < 0.0 || self.snapshot_interval < 0.0 {
            return Err(Error::InvalidConfig(
                "tau_max, lambda_min, snapshot_interval must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Parabolic step size `cfl · min(Δy², min(v)² Δθ²)/2`.
pub fn cfl_dt(v: &GraphField, cfl: f64) -> f64 {
    let dy = v.dy_step();
    let dth = v.dtheta_step();
    let vmin = v.min_value();
    cfl * (dy * dy).min(vmin * vmin * dth * dth) / 2.0
}

/// Derivative bundle used by the right sides.
struct Derivs {
    vy: GraphField,
    vyy: GraphField,
    vth: GraphField,
    vthth: GraphField,
    vyth: GraphField,
}

/// Spatial operators bound to a grid shape.
pub struct SpatialOps {
    theta: ThetaDiff,
    w1: [f64; 5],
    w2: [f64; 5],
}

impl SpatialOps {
    pub fn new(template: &GraphField) -> Self {
        let h = template.dy_step();
        let w1 = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0].map(|w| w / h);
        let mut w2 =
            [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0].map(|w| w / (h * h));
        // center weight pinned so constants differentiate to exactly zero
        w2[2] = 0.0;
        w2[2] = -w2.iter().sum::<f64>();
        Self {
            theta: ThetaDiff::new(template.n_theta()),
            w1,
            w2,
        }
    }

    pub fn theta(&self) -> &ThetaDiff {
        &self.theta
    }

    /// Derivatives with the pure one-sided boundary treatment.
    fn derivs_one_sided(&self, v: &GraphField) -> Result<Derivs> {
        let vy = deriv_y(v, 1)?;
        let vyy = deriv_y(v, 2)?;
        let vth = self.theta.apply(v, 1)?;
        let vthth = self.theta.apply(v, 2)?;
        let vyth = deriv_y(&vth, 1)?;
        Ok(Derivs {
            vy,
            vyy,
            vth,
            vthth,
            vyth,
        })
    }

    /// Derivatives with the far-field closure `∂_y(v − V_{a,b}) = 0`:
    /// the deviation from the fitted profile is reflected into two ghost
    /// rows per side so centered stencils apply on the whole grid.
    fn derivs_profile_bc(&self, v: &GraphField, profile: &FormalProfile) -> Result<Derivs> {
        let n_y = v.n_y();
        let n_th = v.n_theta();
        let h = v.dy_step();
        let ghost_v = |i: i64, j: usize| -> f64 {
            if i >= 0 && (i as usize) < n_y {
                v.at(i as usize, j)
            } else {
                let (mirror, yg) = if i < 0 {
                    ((-i) as usize, -v.y_max() + i as f64 * h)
                } else {
                    (2 * (n_y - 1) - i as usize, -v.y_max() + i as f64 * h)
                };
                profile.value(yg) + (v.at(mirror, j) - profile.value(v.y(mirror)))
            }
        };
        let vth = self.theta.apply(v, 1)?;
        let vthth = self.theta.apply(v, 2)?;
        // θ-derivatives of the deviation equal θ-derivatives of v, so their
        // ghost extension is a plain even reflection
        let ghost_even = |f: &GraphField, i: i64, j: usize| -> f64 {
            if i >= 0 && (i as usize) < n_y {
                f.at(i as usize, j)
            } else if i < 0 {
                f.at((-i) as usize, j)
            } else {
                f.at(2 * (n_y - 1) - i as usize, j)
            }
        };
        let mut vy = GraphField::zeros_like(v);
        let mut vyy = GraphField::zeros_like(v);
        let mut vyth = GraphField::zeros_like(v);
        for i in 0..n_y as i64 {
            for j in 0..n_th {
                let cv = v.at(i as usize, j);
                let cm = vth.at(i as usize, j);
                let mut d1 = 0.0;
                let mut d2 = 0.0;
                let mut dm = 0.0;
                for (k, off) in (-2i64..=2).enumerate() {
                    d1 += self.w1[k] * (ghost_v(i + off, j) - cv);
                    d2 += self.w2[k] * (ghost_v(i + off, j) - cv);
                    dm += self.w1[k] * (ghost_even(&vth, i + off, j) - cm);
                }
                *vy.at_mut(i as usize, j) = d1;
                *vyy.at_mut(i as usize, j) = d2;
                *vyth.at_mut(i as usize, j) = dm;
            }
        }
        Ok(Derivs {
            vy,
            vyy,
            vth,
            vthth,
            vyth,
        })
    }
}

/// Boundary treatment for the rescaled right side.
pub enum FarField<'a> {
    /// Pure one-sided stencils (used by operator tests and diagnostics).
    OneSided,
    /// Reflect the deviation from the fitted profile (solver default).
    ProfileNeumann(&'a FormalProfile),
}

fn assemble_rhs(
    v: &GraphField,
    d: &Derivs,
    a: f64,
    rescaled: bool,
) -> Result<GraphField> {
    let vmin = v.min_value();
    if vmin <= 0.0 {
        return Err(Error::NonPositiveRadius { min: vmin });
    }
    let mut out = GraphField::zeros_like(v);
    for i in 0..v.n_y() {
        let y = v.y(i);
        for j in 0..v.n_theta() {
            let vv = v.at(i, j);
            let p = d.vy.at(i, j);
            let q = d.vth.at(i, j) / vv;
            let c = FlowCoefficients::at(p, q);
            let mut rhs = c.f1 * d.vyy.at(i, j)
                + c.f2 * d.vthth.at(i, j) / (vv * vv)
                + c.f3 * d.vyth.at(i, j) / vv
                - c.f4 * d.vth.at(i, j) / (vv * vv)
                - 1.0 / vv;
            if rescaled {
                rhs += -a * y * p + a * vv;
            }
            *out.at_mut(i, j) = rhs;
        }
    }
    Ok(out)
}

/// Right side of the physical graph flow `∂_t u`.
pub fn rhs_physical(u: &GraphField, ops: &SpatialOps) -> Result<GraphField> {
    let d = ops.derivs_one_sided(u)?;
    assemble_rhs(u, &d, 0.0, false)
}

/// Right side of the rescaled flow `A_v v + a v − v⁻¹`.
pub fn rhs_rescaled(v: &GraphField, a: f64, far: &FarField, ops: &SpatialOps) -> Result<GraphField> {
    let d = match far {
        FarField::OneSided => ops.derivs_one_sided(v)?,
        FarField::ProfileNeumann(p) => ops.derivs_profile_bc(v, p)?,
    };
    assemble_rhs(v, &d, a, true)
}

fn axpy(v: &GraphField, k: &GraphField, dt: f64) -> GraphField {
    v.zip(k, |a, b| a + dt * b)
}

/// One explicit 4-stage Runge-Kutta step of `(v, λ, t)` in `τ` with frozen
/// rescaling rate. Any stage with `min v` at or below the floor rejects.
pub fn step_rescaled(
    state: &FlowState,
    far: &FarField,
    ops: &SpatialOps,
    dt: f64,
) -> Result<FlowState> {
    let floor = v_floor();
    let a = state.a;
    let guard = |v: &GraphField| -> Result<()> {
        let m = v.min_value();
        if m <= floor {
            return Err(Error::StepRejected {
                tau: state.tau,
                vmin: m,
                floor,
            });
        }
        Ok(())
    };
    guard(&state.v)?;

    let l = state.lambda;
    // stage 1
    let k1 = rhs_rescaled(&state.v, a, far, ops)?;
    let kl1 = -a * l;
    let kt1 = l * l;
    // stage 2
    let v2 = axpy(&state.v, &k1, dt / 2.0);
    guard(&v2)?;
    let l2 = l + dt / 2.0 * kl1;
    let k2 = rhs_rescaled(&v2, a, far, ops)?;
    let kl2 = -a * l2;
    let kt2 = l2 * l2;
    // stage 3
    let v3 = axpy(&state.v, &k2, dt / 2.0);
    guard(&v3)?;
    let l3 = l + dt / 2.0 * kl2;
    let k3 = rhs_rescaled(&v3, a, far, ops)?;
    let kl3 = -a * l3;
    let kt3 = l3 * l3;
    // stage 4
    let v4 = axpy(&state.v, &k3, dt);
    guard(&v4)?;
    let l4 = l + dt * kl3;
    let k4 = rhs_rescaled(&v4, a, far, ops)?;
    let kl4 = -a * l4;
    let kt4 = l4 * l4;

    let mut v_new = state.v.clone();
    for (idx, o) in v_new.values_mut().iter_mut().enumerate() {
        *o += dt / 6.0
            * (k1.values()[idx]
                + 2.0 * k2.values()[idx]
                + 2.0 * k3.values()[idx]
                + k4.values()[idx]);
    }
    guard(&v_new)?;
    Ok(FlowState {
        v: v_new,
        lambda: l + dt / 6.0 * (kl1 + 2.0 * kl2 + 2.0 * kl3 + kl4),
        a,
        t: state.t + dt / 6.0 * (kt1 + 2.0 * kt2 + 2.0 * kt3 + kt4),
        tau: state.tau + dt,
    })
}

/// One Runge-Kutta step in physical variables.
pub fn step_physical(u: &GraphField, ops: &SpatialOps, dt: f64) -> Result<GraphField> {
    let k1 = rhs_physical(u, ops)?;
    let u2 = axpy(u, &k1, dt / 2.0);
    let k2 = rhs_physical(&u2, ops)?;
    let u3 = axpy(u, &k2, dt / 2.0);
    let k3 = rhs_physical(&u3, ops)?;
    let u4 = axpy(u, &k3, dt);
    let k4 = rhs_physical(&u4, ops)?;
    let mut out = u.clone();
    for (idx, o) in out.values_mut().iter_mut().enumerate() {
        *o += dt / 6.0
            * (k1.values()[idx]
                + 2.0 * k2.values()[idx]
                + 2.0 * k3.values()[idx]
                + k4.values()[idx]);
    }
    let m = out.min_value();
    if m <= 0.0 {
        return Err(Error::NonPositiveRadius { min: m });
    }
    Ok(out)
}

// ---- trajectory loop ----

#[derive(Debug, Clone)]
pub struct TrajectoryRow {
    pub t: f64,
    pub tau: f64,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub beta: [f64; 5],
    pub vmin: f64,
    pub t_hat: f64,
}

#[derive(Debug, Clone)]
pub struct ModeRow {
    pub tau: f64,
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DecompEvent {
    pub tau: f64,
    pub t: f64,
    pub lambda: f64,
    pub decomp: Decomposition,
}

#[derive(Debug, Clone)]
pub struct OptimalEvent {
    pub tau: f64,
    pub t: f64,
    pub lambda_opt: f64,
    pub b_opt: f64,
    pub motion: RigidMotion,
    /// Interior-fit translate/tilt parameters just before re-gauging.
    pub pre_betas: [f64; 5],
    pub frame: Frame,
    pub decomp: Decomposition,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub tau: f64,
    pub t: f64,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub field: GraphField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    LambdaMin,
    VMin,
    TauMax,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub rows: Vec<TrajectoryRow>,
    pub modes: Vec<ModeRow>,
    pub decomps: Vec<DecompEvent>,
    pub optimals: Vec<OptimalEvent>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: FlowState,
    pub final_frame: Frame,
    pub stop: StopReason,
}

/// Advance the rescaled flow from `v₀` (with `λ₀ = 1`), refitting the
/// modulation parameters every `refit_interval` and optionally re-gauging
/// into optimal coordinates; emits the parameter time series, decomposition
/// events and snapshots.
pub fn run(
    v0: GraphField,
    frame0: Frame,
    cfg: &SolverConfig,
    a_guess: f64,
    b_guess: f64,
) -> Result<RunResult> {
    cfg.validate()?;
    let ops = SpatialOps::new(&v0);

    let fit0 = decomp::fit_interior(&v0, a_guess, b_guess).map_err(|e| e.at_tau(0.0))?;
    let mut state = FlowState::initial(v0, fit0.params.a);
    let mut frame = frame0;
    let mut profile = FormalProfile::new(fit0.params.a, fit0.params.b)?;
    let mut last_fit = fit0.clone();

    let mut rows = Vec::new();
    let mut modes = Vec::new();
    let mut decomps = vec![DecompEvent {
        tau: 0.0,
        t: 0.0,
        lambda: 1.0,
        decomp: fit0,
    }];
    let mut optimals = Vec::new();
    let mut snapshots = Vec::new();

    let record_row = |rows: &mut Vec<TrajectoryRow>,
                      modes: &mut Vec<ModeRow>,
                      state: &FlowState,
                      fit: &Decomposition| {
        rows.push(TrajectoryRow {
            t: state.t,
            tau: state.tau,
            lambda: state.lambda,
            a: state.a,
            b: fit.params.b,
            beta: fit.params.beta,
            vmin: state.v.min_value(),
            t_hat: state.t + state.lambda * state.lambda / (2.0 * state.a.max(1e-12)),
        });
        modes.push(ModeRow {
            tau: state.tau,
            energies: crate::diagnostics::theta_energy(&state.v),
        });
    };
    let record_snapshot = |snaps: &mut Vec<Snapshot>, state: &FlowState, fit: &Decomposition| {
        snaps.push(Snapshot {
            tau: state.tau,
            t: state.t,
            lambda: state.lambda,
            a: state.a,
            b: fit.params.b,
            field: state.v.clone(),
        });
    };

    record_row(&mut rows, &mut modes, &state, &last_fit);
    if cfg.snapshot_interval > 0.0 {
        record_snapshot(&mut snapshots, &state, &last_fit);
    }

    let eps = 1e-12;
    let mut next_refit = cfg.refit_interval;
    let mut next_sample = cfg.sample_interval;
    let mut next_snapshot = if cfg.snapshot_interval > 0.0 {
        cfg.snapshot_interval
    } else {
        f64::INFINITY
    };
    let mut refit_count: usize = 0;
    let stop = loop {
        if state.tau >= cfg.tau_max - eps {
            break StopReason::TauMax;
        }
        if state.lambda <= cfg.lambda_min {
            break StopReason::LambdaMin;
        }
        if state.v.min_value() <= cfg.v_min {
            break StopReason::VMin;
        }

        let mut dt = cfl_dt(&state.v, cfg.cfl);
        for target in [next_refit, next_sample, next_snapshot, cfg.tau_max] {
            if target > state.tau + eps {
                dt = dt.min(target - state.tau);
            }
        }
        let far = FarField::ProfileNeumann(&profile);
        state = step_rescaled(&state, &far, &ops, dt).map_err(|e| e.at_tau(state.tau))?;

        if state.tau >= next_refit - eps {
            refit_count += 1;
            // the raw fit measures the drift in the incoming gauge; the
            // scale is then re-gauged onto a = ½ − b/4, which resets the
            // unstable rescaling mode of the modulation system
            let (raw_fit, v_gauged, lambda_gauged, fit) =
                refit_and_regauge(&state.v, state.lambda, state.a, last_fit.params.b)
                    .map_err(|e| e.at_tau(state.tau))?;
            decomps.push(DecompEvent {
                tau: state.tau,
                t: state.t,
                lambda: state.lambda,
                decomp: raw_fit,
            });
            state.v = v_gauged;
            state.lambda = lambda_gauged;
            state.a = fit.params.a;
            profile = FormalProfile::new(fit.params.a, fit.params.b)?;
            last_fit = fit;
            next_refit += cfg.refit_interval;

            if cfg.optimal_every > 0 && refit_count % cfg.optimal_every == 0 {
                let pre_betas = last_fit.params.beta;
                let opt = decomp::optimal_refit(
                    &state.v,
                    state.lambda,
                    last_fit.params.a,
                    last_fit.params.b,
                )
                .map_err(|e| e.at_tau(state.tau))?;
                frame = frame.moved_by(&opt.motion);
                state.v = opt.v_new.clone();
                state.lambda = opt.lambda_opt;
                state.a = 0.5 - opt.b_opt / 4.0;
                profile = FormalProfile::new(state.a, opt.b_opt)?;
                optimals.push(OptimalEvent {
                    tau: state.tau,
                    t: state.t,
                    lambda_opt: opt.lambda_opt,
                    b_opt: opt.b_opt,
                    motion: opt.motion.clone(),
                    pre_betas,
                    frame: frame.clone(),
                    decomp: opt.decomp.clone(),
                });
                last_fit = opt.decomp;
            }
        }
        if state.tau >= next_sample - eps {
            record_row(&mut rows, &mut modes, &state, &last_fit);
            next_sample += cfg.sample_interval;
        }
        if state.tau >= next_snapshot - eps {
            record_snapshot(&mut snapshots, &state, &last_fit);
            next_snapshot += cfg.snapshot_interval;
        }
    };

    record_row(&mut rows, &mut modes, &state, &last_fit);
    if cfg.snapshot_interval > 0.0 {
        record_snapshot(&mut snapshots, &state, &last_fit);
    }
    Ok(RunResult {
        rows,
        modes,
        decomps,
        optimals,
        snapshots,
        final_state: state,
        final_frame: frame,
        stop,
    })
}

/// Pure scale re-gauge: `v ↦ v(s·)/s` on the fixed `y`-grid (so `λ ↦ sλ`),
/// extending beyond the grid edge with the fitted profile plus the frozen
/// edge deviation (consistent with the far-field closure).
fn rescale_in_scale(v: &GraphField, s: f64, profile: &FormalProfile) -> Result<GraphField> {
    let y_max = v.y_max();
    let mut out = GraphField::zeros_like(v);
    for i in 0..v.n_y() {
        let x = s * v.y(i);
        for j in 0..v.n_theta() {
            let val = if x.abs() <= y_max {
                v.interp(x, v.theta(j))?
            } else {
                let edge = y_max.copysign(x);
                profile.value(x) + (v.interp(edge, v.theta(j))? - profile.value(edge))
            };
            *out.at_mut(i, j) = val / s;
        }
    }
    Ok(out)
}

/// Refit the decomposition and re-gauge the scale onto the slaved relation
/// `a = ½ − b/4`, iterating until the relation holds. Returns the raw
/// (pre-gauge) fit for diagnostics along with the re-gauged state pieces.
fn refit_and_regauge(
    v: &GraphField,
    lambda: f64,
    a_prev: f64,
    b_prev: f64,
) -> Result<(Decomposition, GraphField, f64, Decomposition)> {
    let raw = decomp::fit_interior(v, a_prev, b_prev)?;
    let mut cur_v = v.clone();
    let mut cur_lambda = lambda;
    let mut fit = raw.clone();
    for _ in 0..4 {
        let gap = fit.params.a - (0.5 - fit.params.b / 4.0);
        if gap.abs() < 1e-10 {
            break;
        }
        let s = decomp::slaving_scale(fit.params.a, fit.params.b);
        let profile = fit.params.profile();
        cur_v = rescale_in_scale(&cur_v, s, &profile)?;
        cur_lambda *= s;
        fit = decomp::fit_interior(&cur_v, 1.0 - s * s * (1.0 - fit.params.a), s * s * fit.params.b)?;
    }
    Ok((raw, cur_v, cur_lambda, fit))
}

/// Physical-variable reference run: advance `u` until its minimum reaches
/// `target_min`; returns `(final u, final t, samples of (t, min u))`.
pub fn run_physical(
    u0: GraphField,
    target_min: f64,
    cfl: f64,
    t_cap: f64,
) -> Result<(GraphField, f64, Vec<(f64, f64)>)> {
    let ops = SpatialOps::new(&u0);
    let mut u = u0;
    let mut t = 0.0;
    let mut samples = vec![(0.0, u.min_value())];
    while u.min_value() > target_min {
        if t >= t_cap {
            break;
        }
        let dt = cfl_dt(&u, cfl).min(t_cap - t);
        u = step_physical(&u, &ops, dt)?;
        t += dt;
        samples.push((t, u.min_value()));
    }
    Ok((u, t, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_physical_cylinder() {
        let u = GraphField::constant(8.0, 41, 16, 2.5);
        let ops = SpatialOps::new(&u);
        let rhs = rhs_physical(&u, &ops).unwrap();
        for &v in rhs.values() {
            assert!((v + 1.0 / 2.5).abs() < 1e-12);
        }
        let bad = GraphField::constant(8.0, 41, 16, -1.0);
        assert!(rhs_physical(&bad, &ops).is_err());
    }

    #[test]
    fn rhs_physical_matches_tilted_family_oracle() {
        // shrinking tilted cylinder: R(t) = sqrt(R² − 2t) at fixed tilt;
        // ∂_t u at t = 0 from differentiating the closed form
        let r0 = 2.0;
        let eps = 0.05;
        let u = GraphField::from_fn(6.0, 161, 32, |x, th| {
            crate::surface::tilted_cylinder_graph(r0, eps, x, th).unwrap()
        });
        let ops = SpatialOps::new(&u);
        let rhs = rhs_physical(&u, &ops).unwrap();
        let dt = 1e-6;
        let mut worst = 0.0f64;
        for i in 0..u.n_y() {
            if u.y(i).abs() > 5.0 {
                continue; // keep clear of one-sided boundary rows
            }
            for j in 0..u.n_theta() {
                let x = u.y(i);
                let th = u.theta(j);
                let rp = (r0 * r0 - 2.0 * dt).sqrt();
                let rm = (r0 * r0 + 2.0 * dt).sqrt();
                let up = crate::surface::tilted_cylinder_graph(rp, eps, x, th).unwrap();
                let um = crate::surface::tilted_cylinder_graph(rm, eps, x, th).unwrap();
                let oracle = (up - um) / (2.0 * dt);
                worst = worst.max((rhs.at(i, j) - oracle).abs());
            }
        }
        assert!(worst < 2e-6, "tilted-family mismatch {worst}");
    }

    #[test]
    fn rhs_rescaled_cylinder_fixed_point_is_exact() {
        let v = GraphField::constant(16.0, 321, 32, 2.0_f64.sqrt());
        let ops = SpatialOps::new(&v);
        let rhs = rhs_rescaled(&v, 0.5, &FarField::OneSided, &ops).unwrap();
        assert!(rhs.max_abs() < 1e-13, "fixed point rhs {}", rhs.max_abs());
        // constant v = c gives a·c − 1/c everywhere
        let c = 1.7;
        let v = GraphField::constant(8.0, 41, 16, c);
        let ops = SpatialOps::new(&v);
        let a = 0.41;
        let rhs = rhs_rescaled(&v, a, &FarField::OneSided, &ops).unwrap();
        for &x in rhs.values() {
            assert!((x - (a * c - 1.0 / c)).abs() < 1e-12);
        }
    }

    #[test]
    fn rhs_rescaled_profile_defect_matches_quadrature() {
        // v = V_{1/2,s}: the rescaled right side reduces to the closed-form
        // defect (F₁ − 1)·∂²V of the adiabatic profile. With θ-independence
        // the full right side equals F₁(p,0)V'' − (y/2)V' + V/2 − 1/V where
        // the adiabatic identity kills −(y/2)V' + V/2 − 1/V up to V''-terms:
        // independent evaluation below uses only the closed forms.
        let s = 0.2;
        let prof = FormalProfile::new(0.5, s).unwrap();
        let v = GraphField::from_fn(12.0, 241, 8, |y, _| prof.value(y));
        let ops = SpatialOps::new(&v);
        let rhs = rhs_rescaled(&v, 0.5, &FarField::OneSided, &ops).unwrap();
        let mut worst = 0.0f64;
        for i in 0..v.n_y() {
            let y = v.y(i);
            if y.abs() > 11.0 {
                continue;
            }
            let p = prof.dy(y);
            let analytic = prof.dyy(y) / (1.0 + p * p)
                - 0.5 * y * p
                + 0.5 * prof.value(y)
                - 1.0 / prof.value(y);
            worst = worst.max((rhs.at(i, 0) - analytic).abs());
        }
        assert!(worst < 1e-7, "profile defect mismatch {worst}");
    }

    #[test]
    fn manufactured_solution_second_order_in_y() {
        // u(x,θ) with analytic derivatives; compare the discrete right side
        // against the exact one under grid refinement
        let uf = |x: f64, th: f64| 2.0 + 0.3 * (-x * x / 8.0).exp() * (1.0 + 0.5 * th.sin());
        let ux = |x: f64, th: f64| {
            0.3 * (-x / 4.0) * (-x * x / 8.0).exp() * (1.0 + 0.5 * th.sin())
        };
        let uxx = |x: f64, th: f64| {
            0.3 * (x * x / 16.0 - 0.25) * (-x * x / 8.0).exp() * (1.0 + 0.5 * th.sin())
        };
        let uth = |x: f64, th: f64| 0.3 * (-x * x / 8.0).exp() * 0.5 * th.cos();
        let uthth = |x: f64, th: f64| -0.3 * (-x * x / 8.0).exp() * 0.5 * th.sin();
        let uxth = |x: f64, th: f64| 0.3 * (-x / 4.0) * (-x * x / 8.0).exp() * 0.5 * th.cos();
        let exact_rhs = |x: f64, th: f64| {
            let u = uf(x, th);
            let p = ux(x, th);
            let q = uth(x, th) / u;
            let c = FlowCoefficients::at(p, q);
            c.f1 * uxx(x, th) + c.f2 * uthth(x, th) / (u * u) + c.f3 * uxth(x, th) / u
                - c.f4 * uth(x, th) / (u * u)
                - 1.0 / u
        };
        let mut errs = Vec::new();
        for &n in &[81usize, 161, 321] {
            let u = GraphField::from_fn(8.0, n, 16, uf);
            let ops = SpatialOps::new(&u);
            let rhs = rhs_physical(&u, &ops).unwrap();
            let mut e = 0.0f64;
            for i in 0..u.n_y() {
                for j in 0..u.n_theta() {
                    e = e.max((rhs.at(i, j) - exact_rhs(u.y(i), u.theta(j))).abs());
                }
            }
            errs.push(e);
        }
        // least-squares slope across Δy ∈ {0.2, 0.1, 0.05}
        let hs = [0.2f64, 0.1, 0.05];
        let slope = crate::diagnostics::log_log_slope(&hs, &errs);
        assert!(
            (1.8..=2.2).contains(&slope),
            "slope {slope:.3} errs {errs:?}"
        );
    }

    #[test]
    fn theta_resolution_is_spectral() {
        // smooth but non-bandlimited θ-dependence: doubling n_theta should
        // beat any power law
        let uf = |x: f64, th: f64| 2.0 + 0.2 * (-x * x / 10.0).exp() * (0.9 * th.cos()).exp();
        let mut errs = Vec::new();
        for &nth in &[8usize, 16, 32] {
            let u = GraphField::from_fn(8.0, 161, nth, uf);
            let ops = SpatialOps::new(&u);
            let rhs = rhs_physical(&u, &ops).unwrap();
            // compare against a fine-in-θ reference on shared nodes
            let fine = GraphField::from_fn(8.0, 161, 128, uf);
            let fops = SpatialOps::new(&fine);
            let ref_rhs = rhs_physical(&fine, &fops).unwrap();
            let mut e = 0.0f64;
            for i in 0..u.n_y() {
                for j in 0..nth {
                    let jj = j * 128 / nth;
                    e = e.max((rhs.at(i, j) - ref_rhs.at(i, jj)).abs());
                }
            }
            errs.push(e);
        }
        // spectral: each doubling gains more than 2^4
        assert!(
            errs[0] / errs[1] > 16.0 && errs[1] / errs[2] > 16.0,
            "theta errors {errs:?}"
        );
    }

    #[test]
    fn step_on_fixed_point_advances_clocks_exactly() {
        let v = GraphField::constant(12.0, 121, 16, 2.0_f64.sqrt());
        let ops = SpatialOps::new(&v);
        let mut st = FlowState::initial(v, 0.5);
        let dt = 0.01;
        for _ in 0..200 {
            st = step_rescaled(&st, &FarField::OneSided, &ops, dt).unwrap();
        }
        let tau = st.tau;
        assert!((tau - 2.0).abs() < 1e-12);
        assert!((st.v.max_abs() - 2.0_f64.sqrt()).abs() < 1e-13);
        let lam_exact = (-tau / 2.0).exp();
        assert!(
            (st.lambda / lam_exact - 1.0).abs() < 1e-10,
            "lambda {} vs {}",
            st.lambda,
            lam_exact
        );
        // clock consistency: dt/dτ = λ² accumulated ≈ ∫λ²dτ = (1 − e^{−τ})
        let t_exact = 1.0 - (-tau).exp();
        assert!((st.t - t_exact).abs() < 1e-8);
    }

    #[test]
    fn physical_cylinder_shrinks_on_closed_form() {
        let u0 = GraphField::constant(8.0, 41, 8, 2.0);
        let (u, t, samples) = run_physical(u0, 0.5, 0.45, 10.0).unwrap();
        assert!(u.min_value() <= 0.5 + 1e-9);
        let mut worst = 0.0f64;
        for (tt, m) in &samples {
            let exact = (4.0 - 2.0 * tt).sqrt();
            worst = worst.max((m - exact).abs() / exact);
        }
        assert!(worst < 1e-5, "cylinder law error {worst}");
        // stops within one CFL step of the exact crossing time
        assert!((t - (4.0 - 0.25) / 2.0).abs() < 0.05);
    }

    #[test]
    fn step_rejects_below_floor() {
        let v = GraphField::constant(8.0, 41, 8, 0.5);
        let ops = SpatialOps::new(&v);
        let st = FlowState::initial(v, 0.5);
        match step_rescaled(&st, &FarField::OneSided, &ops, 0.001) {
            Err(Error::StepRejected { .. }) => {}
            other => panic!("expected StepRejected, got {other:?}"),
        }
    }

    #[test]
    fn commuting_diagram_physical_vs_rescaled() {
        // one physical step then rescale vs rescale then one τ-step agree
        // to second order in the step size
        let prof = FormalProfile::new(0.5, 0.1).unwrap();
        let u0 = GraphField::from_fn(10.0, 201, 16, |x, th| {
            prof.value(x) + 0.01 * x.cos() * th.sin()
        });
        let ops = SpatialOps::new(&u0);
        let a = 0.48;
        let mut errs = Vec::new();
        let dtaus = [0.01, 0.005, 0.0025];
        for &dtau in &dtaus {
            // rescaled path from λ = 1 (v = u, y = x)
            let st = FlowState {
                v: u0.clone(),
                lambda: 1.0,
                a,
                t: 0.0,
                tau: 0.0,
            };
            let st1 = step_rescaled(&st, &FarField::OneSided, &ops, dtau).unwrap();
            // physical path over the elapsed physical time
            let u1 = step_physical(&u0, &ops, st1.t).unwrap();
            // compare u1 with λ₁ v₁(x/λ₁)
            let mut e = 0.0f64;
            for i in 0..u0.n_y() {
                let x = u0.y(i);
                let y = x / st1.lambda;
                if y.abs() > u0.y_max() {
                    continue;
                }
                for j in 0..u0.n_theta() {
                    let via_v = st1.lambda * st1.v.interp(y, u0.theta(j)).unwrap();
                    e = e.max((u1.at(i, j) - via_v).abs());
                }
            }
            errs.push(e);
        }
        let slope = crate::diagnostics::log_log_slope(&dtaus, &errs);
        assert!(
            slope > 1.6,
            "commuting diagram slope {slope:.2}, errs {errs:?}"
        );
    }

    #[test]
    fn clock_consistency_under_refinement() {
        // |a + λ Δλ/Δt| and |t − Σ λ²Δτ| shrink with the step size
        let prof = FormalProfile::new(0.475, 0.1).unwrap();
        let v = GraphField::from_fn(12.0, 121, 8, |y, _| prof.value(y));
        let ops = SpatialOps::new(&v);
        let mut errs = Vec::new();
        for &dt in &[0.02, 0.01] {
            let mut st = FlowState::initial(v.clone(), 0.475);
            let mut t_sum = 0.0;
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let lam0 = st.lambda;
                let t0 = st.t;
                let far = FarField::ProfileNeumann(&prof);
                let next = step_rescaled(&st, &far, &ops, dt).unwrap();
                worst = worst
                    .max((st.a + 0.5 * (lam0 + next.lambda) * (next.lambda - lam0) / (next.t - t0)).abs());
                t_sum += 0.5 * (lam0 * lam0 + next.lambda * next.lambda) * dt;
                st = next;
            }
            worst = worst.max((st.t - t_sum).abs() / st.t);
            errs.push(worst);
        }
        assert!(errs[0] < 1e-4 && errs[1] < errs[0], "clock errors {errs:?}");
    }

    #[test]
    fn estimate_t_examples() {
        // exact self-similar state: λ = sqrt(T − t), a = 1/2 gives T̂ = T
        let v = GraphField::constant(4.0, 21, 8, 2.0_f64.sqrt());
        let st = FlowState {
            v,
            lambda: (2.0f64 - 0.75).sqrt(),
            a: 0.5,
            t: 0.75,
            tau: 0.0,
        };
        assert!((estimate_t(&st).unwrap() - 2.0).abs() < 1e-12);
        let mut bad = st.clone();
        bad.a = -0.1;
        assert!(estimate_t(&bad).is_err());
    }
}
