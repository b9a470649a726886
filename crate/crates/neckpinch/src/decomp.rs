//! The 7-mode orthogonal decomposition of the rescaled neck, optimal
//! coordinate refitting, gauge-fixed remainder fields, and the residual of
//! the gauge-level evolution equation.
//!
//! A rescaled graph `v` near a standard neck splits as
//! `v = V_{a,b} + β₀ y + β₁ cos θ + β₂ sin θ + β₃ y cos θ + β₄ y sin θ + φ`
//! with `φ` orthogonal to the seven weakly-unstable directions
//! `{1, y, y² − a⁻¹, cos θ, sin θ, y cos θ, y sin θ}` in
//! `L²(dθ · e^{−a y²/2} dy)`. Optimal coordinates instead zero all seven
//! projections by moving the frame and rescaling, with `β ≡ 0` and
//! `a = ½ − b/4`.

use crate::error::{Error, Result};
use crate::field::{deriv_y, simpson_weights, GraphField, ThetaDiff, BOUNDARY_TRIM};
use crate::profile::FormalProfile;
use crate::surface::{resample_graph, RigidMotion};

use nalgebra::{SMatrix, SVector};

type Mat7 = SMatrix<f64, 7, 7>;
type Vec7 = SVector<f64, 7>;

/// Modulation parameters of the decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileParams {
    pub a: f64,
    pub b: f64,
    /// `(β₀, β₁, β₂, β₃, β₄)` multiplying `(y, cos θ, sin θ, y cos θ, y sin θ)`.
    pub beta: [f64; 5],
}

impl ProfileParams {
    pub fn new(a: f64, b: f64, beta: [f64; 5]) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) || b < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "profile params need 0 < a < 1 and b >= 0, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b, beta })
    }

    pub fn profile(&self) -> FormalProfile {
        FormalProfile::new(self.a, self.b).expect("validated params")
    }

    /// The translate/tilt field `β₀ y + β₁ cos θ + ... + β₄ y sin θ` at `(y, θ)`.
    pub fn beta_field(&self, y: f64, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.beta[0] * y
            + self.beta[1] * c
            + self.beta[2] * s
            + self.beta[3] * y * c
            + self.beta[4] * y * s
    }
}

/// Result of a decomposition fit.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub params: ProfileParams,
    /// Remainder field `φ = v − V_{a,b} − (β-terms)`.
    pub phi: GraphField,
    /// Normalized projections of `φ` onto the 7 modes (weighted family).
    pub ortho_residuals: [f64; 7],
    /// Gauge field `w = v e^{−a y²/4}`.
    pub w: GraphField,
    /// Gauge-fixed remainder `ξ = e^{−a y²/4} φ`.
    pub xi: GraphField,
    /// Normalized unweighted-L² projections of `e^{−a y²/4} ξ` onto
    /// `{1, y, y², cos θ, sin θ, y cos θ, y sin θ}`.
    pub xi_residuals: [f64; 7],
    /// Condition number of the final Newton system (logged).
    pub gram_condition: f64,
}

/// The 7 mode functions for a given rescaling rate, evaluated on a grid.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub a: f64,
    pub fields: Vec<GraphField>,
}

impl ModeBasis {
    pub fn new(template: &GraphField, a: f64) -> Self {
        let shapes: [Box<dyn Fn(f64, f64) -> f64>; 7] = [
            Box::new(|_, _| 1.0),
            Box::new(|y, _| y),
            Box::new(move |y, _| y * y - 1.0 / a),
            Box::new(|_, t| t.cos()),
            Box::new(|_, t| t.sin()),
            Box::new(|y, t| y * t.cos()),
            Box::new(|y, t| y * t.sin()),
        ];
        let fields = shapes
            .iter()
            .map(|f| {
                GraphField::from_fn(template.y_max(), template.n_y(), template.n_theta(), f)
            })
            .collect();
        Self { a, fields }
    }

    /// Gram matrix of the basis in the weighted inner product.
    pub fn gram(&self) -> [[f64; 7]; 7] {
        let mut g = [[0.0; 7]; 7];
        for i in 0..7 {
            for j in 0..7 {
                g[i][j] = weighted_inner(&self.fields[i], &self.fields[j], self.a);
            }
        }
        g
    }
}

/// Weighted inner product `∫∫ f g e^{−a y²/2} dθ dy`
/// (trapezoid in `θ`, Simpson in `y`).
pub fn weighted_inner(f: &GraphField, g: &GraphField, a: f64) -> f64 {
    debug_assert!(f.same_grid(g));
    let ws = simpson_weights(f.n_y(), f.dy_step());
    let dth = f.dtheta_step();
    let mut total = 0.0;
    for i in 0..f.n_y() {
        let y = f.y(i);
        let gauss = (-a * y * y / 2.0).exp();
        let mut row = 0.0;
        for j in 0..f.n_theta() {
            row += f.at(i, j) * g.at(i, j);
        }
        total += ws[i] * gauss * row * dth;
    }
    total
}

/// θ-moments of a field per `y`-row: `(Δθ Σ f, Δθ Σ f cos θ, Δθ Σ f sin θ)`.
fn theta_moments(f: &GraphField) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dth = f.dtheta_step();
    let n_y = f.n_y();
    let mut am = Vec::with_capacity(n_y);
    let mut cm = Vec::with_capacity(n_y);
    let mut sm = Vec::with_capacity(n_y);
    for i in 0..n_y {
        let mut a0 = 0.0;
        let mut c0 = 0.0;
        let mut s0 = 0.0;
        for j in 0..f.n_theta() {
            let (s, c) = f.theta(j).sin_cos();
            let v = f.at(i, j);
            a0 += v;
            c0 += v * c;
            s0 += v * s;
        }
        am.push(a0 * dth);
        cm.push(c0 * dth);
        sm.push(s0 * dth);
    }
    (am, cm, sm)
}

/// Discrete self-norms `⟨m_k, m_k⟩_a` of the 7 modes.
fn mode_norms(template: &GraphField, a: f64) -> [f64; 7] {
    let ws = simpson_weights(template.n_y(), template.dy_step());
    let tau = std::f64::consts::TAU;
    let pi = std::f64::consts::PI;
    let mut i0 = 0.0;
    let mut i2 = 0.0;
    let mut ih = 0.0; // ∫ (y² − 1/a)² weight
    for i in 0..template.n_y() {
        let y = template.y(i);
        let g = (-a * y * y / 2.0).exp();
        let h = y * y - 1.0 / a;
        i0 += ws[i] * g;
        i2 += ws[i] * g * y * y;
        ih += ws[i] * g * h * h;
    }
    [
        tau * i0,
        tau * i2,
        tau * ih,
        pi * i0,
        pi * i0,
        pi * i2,
        pi * i2,
    ]
}

/// Normalized projections of `φ(x) = v − V_{a,b} − (β-terms)` onto the 7
/// modes, computed from precomputed θ-moments of `v`.
struct ProjectionEngine {
    y: Vec<f64>,
    ws: Vec<f64>,
    va: Vec<f64>, // Δθ Σ_θ v
    vc: Vec<f64>, // Δθ Σ_θ v cos
    vs: Vec<f64>, // Δθ Σ_θ v sin
    template: GraphField,
}

impl ProjectionEngine {
    fn new(v: &GraphField) -> Self {
        let (va, vc, vs) = theta_moments(v);
        Self {
            y: (0..v.n_y()).map(|i| v.y(i)).collect(),
            ws: simpson_weights(v.n_y(), v.dy_step()),
            va,
            vc,
            vs,
            template: GraphField::zeros_like(v),
        }
    }

    /// Raw and normalized projections for the parameter vector
    /// `(a, b, β₀..β₄)`.
    fn residuals(&self, x: &Vec7) -> Result<Vec7> {
        let a = x[0];
        let b = x[1];
        let profile = FormalProfile::new(a, b)?;
        let tau = std::f64::consts::TAU;
        let pi = std::f64::consts::PI;
        let norms = mode_norms(&self.template, a);
        let mut proj = [0.0; 7];
        for (i, (&y, &w)) in self.y.iter().zip(self.ws.iter()).enumerate() {
            let g = (-a * y * y / 2.0).exp();
            let vv = profile.value(y);
            // θ-moments of φ at this row, from the moments of v minus the
            // analytic moments of the profile and β-terms
            let pa = self.va[i] - tau * (vv + x[2] * y);
            let pc = self.vc[i] - pi * (x[3] + x[5] * y);
            let ps = self.vs[i] - pi * (x[4] + x[6] * y);
            let wg = w * g;
            proj[0] += wg * pa;
            proj[1] += wg * y * pa;
            proj[2] += wg * (y * y - 1.0 / a) * pa;
            proj[3] += wg * pc;
            proj[4] += wg * ps;
            proj[5] += wg * y * pc;
            proj[6] += wg * y * ps;
        }
        let mut r = Vec7::zeros();
        for k in 0..7 {
            r[k] = proj[k] / norms[k];
        }
        Ok(r)
    }
}

fn clamp_params(x: &mut Vec7) {
    x[0] = x[0].clamp(0.02, 0.98);
    x[1] = x[1].max(0.0);
}

/// Newton iteration shared by the fits: forward-difference Jacobian, step
/// damping on residual increase, divergence guard on step size.
fn newton7(
    what: &'static str,
    x0: Vec7,
    tol: f64,
    mut residual: impl FnMut(&Vec7) -> Result<Vec7>,
    clamp: impl Fn(&mut Vec7),
) -> Result<(Vec7, f64)> {
    const MAX_ITERS: usize = 30;
    let debug = std::env::var("NECKPINCH_DEBUG_NEWTON").is_ok();
    let mut x = x0;
    clamp(&mut x);
    let mut r = residual(&x)?;
    let mut condition = 0.0;
    for iter in 0..MAX_ITERS {
        if debug {
            eprintln!(
                "[{what}] iter {iter}: |r| = {:.3e}, x = {:?}",
                r.amax(),
                x.as_slice()
            );
        }
        if r.amax() < tol {
            return Ok((x, condition));
        }
        let mut jac = Mat7::zeros();
        for k in 0..7 {
            let h = 1e-7 * (1.0 + x[k].abs());
            let mut xp = x;
            xp[k] += h;
            clamp(&mut xp);
            let hk = xp[k] - x[k];
            if hk == 0.0 {
                // clamped against a bound: probe inward instead
                xp[k] = x[k] - h;
                clamp(&mut xp);
            }
            let rp = residual(&xp)?;
            let dh = xp[k] - x[k];
            for row in 0..7 {
                jac[(row, k)] = (rp[row] - r[row]) / dh;
            }
        }
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        let delta = svd
            .solve(&(-r), 1e-14)
            .map_err(|_| Error::NoConvergence {
                what,
                iters: MAX_ITERS,
                residual: r.amax(),
            })?;
        if delta.amax() > 0.5 {
            return Err(Error::NoConvergence {
                what,
                iters: MAX_ITERS,
                residual: r.amax(),
            });
        }
        // damped update: halve on residual increase
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..6 {
            let mut xn = x + delta * scale;
            clamp(&mut xn);
            match residual(&xn) {
                Ok(rn) => {
                    if rn.amax() <= r.amax() || scale < 0.1 {
                        x = xn;
                        r = rn;
                        accepted = true;
                        break;
                    }
                }
                Err(_) if scale > 1e-2 => {}
                Err(e) => return Err(e),
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                what,
                iters: MAX_ITERS,
                residual: r.amax(),
            });
        }
    }
    if r.amax() < tol {
        return Ok((x, condition));
    }
    Err(Error::NoConvergence {
        what,
        iters: MAX_ITERS,
        residual: r.amax(),
    })
}

fn materialize(v: &GraphField, params: ProfileParams, condition: f64) -> Decomposition {
    let profile = params.profile();
    let phi = v.map(|y, th, val| val - profile.value(y) - params.beta_field(y, th));
    let a = params.a;
    let w = v.map(|y, _, val| val * (-a * y * y / 4.0).exp());
    let xi = phi.map(|y, _, val| val * (-a * y * y / 4.0).exp());

    // weighted-φ residual family (projections on {1, y, y²−1/a, ...})
    let norms = mode_norms(v, a);
    let (pa, pc, ps) = theta_moments(&phi);
    let ws = simpson_weights(v.n_y(), v.dy_step());
    let mut proj = [0.0; 7];
    let mut proj_y2 = 0.0; // against plain y² for the ξ family
    for i in 0..v.n_y() {
        let y = v.y(i);
        let g = (-a * y * y / 2.0).exp();
        let wg = ws[i] * g;
        proj[0] += wg * pa[i];
        proj[1] += wg * y * pa[i];
        proj[2] += wg * (y * y - 1.0 / a) * pa[i];
        proj[3] += wg * pc[i];
        proj[4] += wg * ps[i];
        proj[5] += wg * y * pc[i];
        proj[6] += wg * y * ps[i];
        proj_y2 += wg * y * y * pa[i];
    }
    let mut ortho = [0.0; 7];
    for k in 0..7 {
        ortho[k] = proj[k] / norms[k];
    }
    // unweighted-ξ family: ⟨e^{−ay²/4}ξ, m⟩ with m ∈ {1, y, y², cos, ...};
    // identical integrands except the plain y² mode
    let mut xi_res = ortho;
    let norm_y2: f64 = {
        let mut acc = 0.0;
        for i in 0..v.n_y() {
            let y = v.y(i);
            acc += ws[i] * (-a * y * y / 2.0).exp() * y.powi(4);
        }
        acc * std::f64::consts::TAU
    };
    xi_res[2] = proj_y2 / norm_y2;

    Decomposition {
        params,
        phi,
        ortho_residuals: ortho,
        w,
        xi,
        xi_residuals: xi_res,
        gram_condition: condition,
    }
}

/// Interior-mode fit: frame and scale held fixed, solve for
/// `(a, b, β₀..β₄)` zeroing the 7 weighted projections of `φ`.
pub fn fit_interior(v: &GraphField, a_guess: f64, b_guess: f64) -> Result<Decomposition> {
    let min = v.min_value();
    if min <= 0.0 {
        return Err(Error::NonPositiveRadius { min });
    }
    let engine = ProjectionEngine::new(v);
    let mut x0 = Vec7::zeros();
    x0[0] = a_guess;
    x0[1] = b_guess;
    let (x, condition) = newton7(
        "interior decomposition fit",
        x0,
        1e-12,
        |x| engine.residuals(x),
        clamp_params,
    )?;
    let params = ProfileParams::new(x[0], x[1], [x[2], x[3], x[4], x[5], x[6]])?;
    Ok(materialize(v, params, condition))
}

/// Fit mode selector mirroring the operation contract.
pub enum FitMode {
    /// Frame and scale fixed; solve the interior 7-parameter system.
    Interior,
    /// Solve for frame, scale and `b` with `a = ½ − b/4` and `β ≡ 0`.
    Optimal { lambda_guess: f64 },
}

/// Dispatching wrapper over [`fit_interior`] and [`optimal_refit`].
pub fn fit_parameters(v: &GraphField, a_prev: f64, mode: FitMode) -> Result<Decomposition> {
    match mode {
        FitMode::Interior => {
            let b_guess = (0.5 - a_prev).max(0.0) * 4.0;
            fit_interior(v, a_prev, b_guess)
        }
        FitMode::Optimal { lambda_guess } => {
            let b_guess = ((0.5 - a_prev) * 4.0).max(1e-3);
            Ok(optimal_refit(v, lambda_guess, a_prev, b_guess)?.decomp)
        }
    }
}

/// Result of an optimal-coordinate refit.
#[derive(Debug, Clone)]
pub struct OptimalFit {
    /// Motion from the old frame to the optimal frame (old-frame coords).
    pub motion: RigidMotion,
    pub lambda_opt: f64,
    pub b_opt: f64,
    /// The graph resampled into the optimal frame at scale `λ_opt`.
    pub v_new: GraphField,
    pub decomp: Decomposition,
}

/// Scale factor mapping a fitted `(a, b)` onto the slaved relation
/// `a₁ = ½ − b₁/4`: rescaling `v ↦ v(s·)/s`, `λ ↦ sλ` sends
/// `(a, b) ↦ (1 − s²(1−a), s²b)`, and `s² = 1/(2(1−a) − b/2)` lands on the
/// relation exactly.
pub fn slaving_scale(a: f64, b: f64) -> f64 {
    (1.0 / (2.0 * (1.0 - a) - b / 2.0)).sqrt()
}

/// Outer Newton over the 7 geometric parameters
/// `(λ, b, axial shift, 2 transverse shifts, 2 tilts)`, each residual
/// evaluation resampling the graph into the candidate frame, until the
/// projections of `φ_opt = v' − V_{½−b/4, b}` vanish. The interior-fitted
/// `(a, b)` seed the scale direction through [`slaving_scale`].
pub fn optimal_refit(
    v: &GraphField,
    lambda_guess: f64,
    a_guess: f64,
    b_guess: f64,
) -> Result<OptimalFit> {
    if lambda_guess <= 0.0 {
        return Err(Error::InvalidParameter("lambda_guess must be positive".into()));
    }
    let norms_template = GraphField::zeros_like(v);
    // unknowns: (λ/λ_guess, b, shifts/λ_guess ×3, tilts ×2)
    let assemble = |z: &Vec7| -> Result<(Vec7, GraphField, RigidMotion, f64, f64)> {
        let lambda_out = z[0] * lambda_guess;
        if lambda_out <= 0.0 {
            return Err(Error::InvalidParameter("negative scale".into()));
        }
        let b = z[1];
        let a1 = 0.5 - b / 4.0;
        let motion = RigidMotion::small(
            lambda_guess * z[2],
            lambda_guess * z[3],
            lambda_guess * z[4],
            z[5],
            z[6],
        );
        let vp = resample_graph(v, lambda_guess, &motion, lambda_out)?;
        let profile = FormalProfile::new(a1, b)?;
        let norms = mode_norms(&norms_template, a1);
        let ws = simpson_weights(vp.n_y(), vp.dy_step());
        let (pa, pc, ps) = theta_moments(&vp);
        let tau = std::f64::consts::TAU;
        let mut proj = [0.0; 7];
        for i in 0..vp.n_y() {
            let y = vp.y(i);
            let g = (-a1 * y * y / 2.0).exp();
            let wg = ws[i] * g;
            let row_a = pa[i] - tau * profile.value(y);
            proj[0] += wg * row_a;
            proj[1] += wg * y * row_a;
            proj[2] += wg * (y * y - 1.0 / a1) * row_a;
            proj[3] += wg * pc[i];
            proj[4] += wg * ps[i];
            proj[5] += wg * y * pc[i];
            proj[6] += wg * y * ps[i];
        }
        let mut r = Vec7::zeros();
        for k in 0..7 {
            r[k] = proj[k] / norms[k];
        }
        Ok((r, vp, motion, lambda_out, b))
    };

    let s = slaving_scale(a_guess, b_guess);
    let mut x0 = Vec7::zeros();
    x0[0] = s;
    x0[1] = (s * s * b_guess).max(1e-4);
    let clamp = |x: &mut Vec7| {
        x[0] = x[0].clamp(0.2, 5.0);
        x[1] = x[1].clamp(0.0, 1.5);
    };
    let (x, condition) = newton7(
        "optimal coordinate refit",
        x0,
        1e-11,
        |z| assemble(z).map(|t| t.0),
        clamp,
    )?;
    let (_, v_new, motion, lambda_opt, b_opt) = assemble(&x)?;
    let a1 = 0.5 - b_opt / 4.0;
    let params = ProfileParams::new(a1, b_opt, [0.0; 5])?;
    let decomp = materialize(&v_new, params, condition);
    Ok(OptimalFit {
        motion,
        lambda_opt,
        b_opt,
        v_new,
        decomp,
    })
}

/// Gauge fields `(w, ξ)` of a state: `w = v e^{−a y²/4}`,
/// `ξ = e^{−a y²/4} (v − V_{a,b} − β-terms)`.
pub fn gauge_fields(v: &GraphField, params: &ProfileParams) -> (GraphField, GraphField) {
    let a = params.a;
    let profile = params.profile();
    let w = v.map(|y, _, val| val * (-a * y * y / 4.0).exp());
    let xi = v.map(|y, th, val| {
        (val - profile.value(y) - params.beta_field(y, th)) * (-a * y * y / 4.0).exp()
    });
    (w, xi)
}

/// First angular Fourier coefficients `f_± = (1/2π)⟨f, e^{±iθ}⟩` per `y`-row,
/// returned as `(re, im)` profiles.
#[derive(Debug, Clone)]
pub struct PmProfiles {
    pub plus_re: Vec<f64>,
    pub plus_im: Vec<f64>,
    pub minus_re: Vec<f64>,
    pub minus_im: Vec<f64>,
}

impl PmProfiles {
    pub fn plus_abs(&self) -> Vec<f64> {
        self.plus_re
            .iter()
            .zip(&self.plus_im)
            .map(|(r, i)| (r * r + i * i).sqrt())
            .collect()
    }
}

pub fn fourier_pm(f: &GraphField) -> PmProfiles {
    // f_+ integrates against e^{+iθ}, which is the k = −1 coefficient of the
    // e^{−ikθ} transform
    let (pr, pi) = f.fourier_mode(-1);
    let (mr, mi) = f.fourier_mode(1);
    PmProfiles {
        plus_re: pr,
        plus_im: pi,
        minus_re: mr,
        minus_im: mi,
    }
}

// ---- the gauge-level evolution-equation residual ----

/// A state with its fitted decomposition, as consumed by the ξ-equation
/// residual check.
#[derive(Debug, Clone)]
pub struct DecomposedState {
    pub tau: f64,
    pub v: GraphField,
    pub params: ProfileParams,
}

/// The assembled right-side pieces of the ξ evolution equation.
#[derive(Debug, Clone)]
pub struct XiRhsTerms {
    pub minus_l_xi: GraphField,
    pub f1: GraphField,
    pub f2: GraphField,
    pub n1: GraphField,
    pub n2: GraphField,
    pub n3: GraphField,
}

impl XiRhsTerms {
    pub fn total(&self) -> GraphField {
        let mut out = self.minus_l_xi.clone();
        for term in [&self.f1, &self.f2, &self.n1, &self.n2, &self.n3] {
            for (o, t) in out.values_mut().iter_mut().zip(term.values()) {
                *o += t;
            }
        }
        out
    }
}

/// Assemble `−L(a,b)ξ + F₁ + F₂ + N₁ + N₂ + N₃` for a decomposed state,
/// given the parameter rates `(a_τ, b_τ, β_τ)`.
pub fn xi_rhs_terms(
    state: &DecomposedState,
    a_tau: f64,
    b_tau: f64,
    beta_tau: [f64; 5],
) -> Result<XiRhsTerms> {
    let v = &state.v;
    let params = &state.params;
    let a = params.a;
    let b = params.b;
    let profile = params.profile();
    let (_, xi) = gauge_fields(v, params);
    let theta = ThetaDiff::new(v.n_theta());

    let xi_yy = deriv_y(&xi, 2)?;
    let xi_thth = theta.apply(&xi, 2)?;
    let vy = deriv_y(v, 1)?;
    let vyy = deriv_y(v, 2)?;
    let vth = theta.apply(v, 1)?;
    let vthth = theta.apply(v, 2)?;
    let vyth = deriv_y(&vth, 1)?;

    let mut minus_l_xi = GraphField::zeros_like(v);
    let mut f1 = GraphField::zeros_like(v);
    let mut f2 = GraphField::zeros_like(v);
    let mut n1 = GraphField::zeros_like(v);
    let mut n2 = GraphField::zeros_like(v);
    let mut n3 = GraphField::zeros_like(v);

    for i in 0..v.n_y() {
        let y = v.y(i);
        let gauss = (-a * y * y / 4.0).exp();
        let vv_prof = profile.value(y);
        let vinv2 = (2.0 - 2.0 * a) / (2.0 + b * y * y); // V_{a,b}^{-2}
        for j in 0..v.n_theta() {
            let th = v.theta(j);
            let (sth, cth) = th.sin_cos();
            let xij = xi.at(i, j);

            // −L(a,b)ξ = ∂_y²ξ − ((a²+a_τ)/4) y² ξ + (3a/2)ξ + V⁻²ξ + ½∂_θ²ξ
            *minus_l_xi.at_mut(i, j) = xi_yy.at(i, j)
                - (a * a + a_tau) / 4.0 * y * y * xij
                + 1.5 * a * xij
                + vinv2 * xij
                + 0.5 * xi_thth.at(i, j);

            // F₁: profile defect under the linear part of the flow
            let dtau_v = profile.dr(y) * a_tau + profile.ds(y) * b_tau;
            *f1.at_mut(i, j) = gauss
                * (profile.dyy(y) - a * y * profile.dy(y) + a * vv_prof - 1.0 / vv_prof
                    - dtau_v);

            // F₂: the β-terms pushed through (∂_y² + V⁻²∂_θ² − ay∂_y + a + V⁻² − ∂_τ)
            let beta = params.beta;
            let b_field = params.beta_field(y, th);
            let b_y = beta[0] + beta[3] * cth + beta[4] * sth;
            let b_thth = -(beta[1] * cth + beta[2] * sth + beta[3] * y * cth + beta[4] * y * sth);
            let b_tau_field = beta_tau[0] * y
                + beta_tau[1] * cth
                + beta_tau[2] * sth
                + beta_tau[3] * y * cth
                + beta_tau[4] * y * sth;
            *f2.at_mut(i, j) = gauss
                * (vinv2 * b_thth - a * y * b_y + a * b_field + vinv2 * b_field - b_tau_field);

            // N₁: quadratic remainder of expanding −v⁻¹ about the profile
            let vv = v.at(i, j);
            let phi_tilde = vv - vv_prof;
            *n1.at_mut(i, j) = -gauss * vinv2 * phi_tilde * phi_tilde / vv;

            // N₂: quasilinear correction to the exact ∂_y²
            let p = vy.at(i, j);
            let q = vth.at(i, j) / vv;
            let d = 1.0 + p * p + q * q;
            *n2.at_mut(i, j) = -gauss * (p * p / d) * vyy.at(i, j);

            // N₃ = N₃,₁ + N₃,₂ (F₄ term enters with the flow's sign)
            let n31 = (vinv2 - 0.5) * xi_thth.at(i, j);
            let n32 = ((1.0 + p * p) / (vv * vv * d) - vinv2) * vthth.at(i, j) * gauss
                - gauss * (2.0 * p * q / d) * vyth.at(i, j) / vv
                - gauss * (q / d) * vth.at(i, j) / (vv * vv);
            *n3.at_mut(i, j) = n31 + n32;
        }
    }
    Ok(XiRhsTerms {
        minus_l_xi,
        f1,
        f2,
        n1,
        n2,
        n3,
    })
}

/// Residual norms of `∂_τ ξ − RHS` at one interior history sample.
#[derive(Debug, Clone)]
pub struct XiResidualReport {
    pub tau: f64,
    pub sup: f64,
    /// `‖⟨y⟩^{−3} e^{a y²/4} (∂_τξ − RHS)‖_∞`.
    pub weighted_sup: f64,
    pub l2_mu: f64,
}

/// Evolution-equation consistency check: for each interior sample of the
/// window, compare the centered `∂_τ ξ` against the assembled right side.
/// Needs at least three consecutive decomposed states.
pub fn xi_evolution_residual(window: &[DecomposedState]) -> Result<Vec<XiResidualReport>> {
    if window.len() < 3 {
        return Err(Error::InsufficientHistory {
            needed: 3,
            got: window.len(),
        });
    }
    let mu = crate::profile::WeightedMeasure::default();
    let mut reports = Vec::new();
    for m in 1..window.len() - 1 {
        let (prev, mid, next) = (&window[m - 1], &window[m], &window[m + 1]);
        let taus = [prev.tau, mid.tau, next.tau];
        let wts = crate::field::fornberg_weights(mid.tau, &taus, 1);

        let (_, xi_p) = gauge_fields(&prev.v, &prev.params);
        let (_, xi_m) = gauge_fields(&mid.v, &mid.params);
        let (_, xi_n) = gauge_fields(&next.v, &next.params);

        let dparam = |f: &dyn Fn(&ProfileParams) -> f64| -> f64 {
            wts[0] * f(&prev.params) + wts[1] * f(&mid.params) + wts[2] * f(&next.params)
        };
        let a_tau = dparam(&|p| p.a);
        let b_tau = dparam(&|p| p.b);
        let mut beta_tau = [0.0; 5];
        for (k, bt) in beta_tau.iter_mut().enumerate() {
            *bt = dparam(&|p| p.beta[k]);
        }

        let rhs = xi_rhs_terms(mid, a_tau, b_tau, beta_tau)?.total();
        let a = mid.params.a;
        let mut sup = 0.0f64;
        let mut wsup = 0.0f64;
        let mut l2 = 0.0;
        let trim = BOUNDARY_TRIM.min(mid.v.n_y() / 4);
        let ws = simpson_weights(mid.v.n_y() - 2 * trim, mid.v.dy_step());
        let dth = mid.v.dtheta_step();
        for i in trim..mid.v.n_y() - trim {
            let y = mid.v.y(i);
            let wy = (1.0 + y * y).powf(-1.5) * (a * y * y / 4.0).exp();
            for j in 0..mid.v.n_theta() {
                let d_tau_xi =
                    wts[0] * xi_p.at(i, j) + wts[1] * xi_m.at(i, j) + wts[2] * xi_n.at(i, j);
                let res = d_tau_xi - rhs.at(i, j);
                sup = sup.max(res.abs());
                wsup = wsup.max(wy * res.abs());
                l2 += ws[i - trim] * dth * mu.weight(y) * res * res;
            }
        }
        reports.push(XiResidualReport {
            tau: mid.tau,
            sup,
            weighted_sup: wsup,
            l2_mu: l2.sqrt(),
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn neck_field(a: f64, b: f64, beta: [f64; 5], n_y: usize, n_theta: usize) -> GraphField {
        let profile = FormalProfile::new(a, b).unwrap();
        GraphField::from_fn(16.0, n_y, n_theta, |y, th| {
            let (s, c) = th.sin_cos();
            profile.value(y)
                + beta[0] * y
                + beta[1] * c
                + beta[2] * s
                + beta[3] * y * c
                + beta[4] * y * s
        })
    }

    #[test]
    fn weighted_inner_gaussian_values() {
        let one = GraphField::constant(16.0, 321, 16, 1.0);
        // ⟨1,1⟩ at a = 1/2 equals 2π ∫ e^{−y²/4} dy = 4 π^{3/2}
        let got = weighted_inner(&one, &one, 0.5);
        let want = 4.0 * std::f64::consts::PI.powf(1.5);
        assert!((got - want).abs() < 1e-10, "got {got}, want {want}");
        // ⟨y² − a⁻¹, 1⟩ = 0 by the Gaussian second-moment identity
        let h2 = GraphField::from_fn(16.0, 321, 16, |y, _| y * y - 2.0);
        assert!(weighted_inner(&h2, &one, 0.5).abs() < 1e-10);
        // ⟨cos θ, sin θ⟩ = 0
        let c = GraphField::from_fn(16.0, 321, 16, |_, t| t.cos());
        let s = GraphField::from_fn(16.0, 321, 16, |_, t| t.sin());
        assert!(weighted_inner(&c, &s, 0.5).abs() < 1e-14);
    }

    #[test]
    fn mode_basis_pairwise_orthogonal() {
        let template = GraphField::constant(16.0, 321, 16, 0.0);
        let basis = ModeBasis::new(&template, 0.47);
        let g = basis.gram();
        for i in 0..7 {
            assert!(g[i][i] > 0.0);
            for j in 0..7 {
                if i != j {
                    let scale = (g[i][i] * g[j][j]).sqrt();
                    assert!(
                        g[i][j].abs() / scale < 1e-10,
                        "modes {i},{j} not orthogonal: {}",
                        g[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn fit_recovers_exact_profile() {
        let v = neck_field(0.5, 0.1, [0.0; 5], 321, 16);
        let d = fit_interior(&v, 0.45, 0.05).unwrap();
        assert!((d.params.a - 0.5).abs() < 1e-10);
        assert!((d.params.b - 0.1).abs() < 1e-10);
        for k in 0..5 {
            assert!(d.params.beta[k].abs() < 1e-10);
        }
        assert!(d.phi.max_abs() < 1e-9);
        for r in d.ortho_residuals {
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn fit_recovers_pure_beta3_mode() {
        let v = neck_field(0.5, 0.1, [0.0, 0.0, 0.0, 0.01, 0.0], 321, 16);
        let d = fit_interior(&v, 0.5, 0.1).unwrap();
        assert!((d.params.beta[3] - 0.01).abs() < 1e-10);
        assert!((d.params.a - 0.5).abs() < 1e-10);
        assert!((d.params.b - 0.1).abs() < 1e-10);
        assert!(d.phi.max_abs() < 1e-9);
    }

    #[test]
    fn fit_ignores_third_hermite_direction() {
        // a θ-independent bump orthogonalized against the y-modes by a
        // brute-force dense-quadrature oracle: the fit must leave all
        // parameters untouched and park the bump in φ
        let profile = FormalProfile::new(0.5, 0.1).unwrap();
        let raw = |y: f64| (y * y * y - 6.0 * y) * (-y * y / 8.0).exp();
        // dense-quadrature projections onto {1, y, y²−2} with weight e^{−y²/4}
        let nfine = 400_001;
        let h = 64.0 / (nfine - 1) as f64;
        let mut num = [0.0f64; 3];
        let mut den = [0.0f64; 3];
        for i in 0..nfine {
            let y = -32.0 + i as f64 * h;
            let w = (-y * y / 4.0).exp() * h;
            let modes = [1.0, y, y * y - 2.0];
            for k in 0..3 {
                num[k] += w * raw(y) * modes[k];
                den[k] += w * modes[k] * modes[k];
            }
        }
        let coef = [num[0] / den[0], num[1] / den[1], num[2] / den[2]];
        let v = GraphField::from_fn(16.0, 321, 16, |y, _| {
            let ortho = raw(y) - coef[0] - coef[1] * y - coef[2] * (y * y - 2.0);
            profile.value(y) + 0.003 * ortho
        });
        let d = fit_interior(&v, 0.5, 0.1).unwrap();
        assert!((d.params.a - 0.5).abs() < 1e-8, "a = {}", d.params.a);
        assert!((d.params.b - 0.1).abs() < 1e-8, "b = {}", d.params.b);
        for k in 0..5 {
            assert!(d.params.beta[k].abs() < 1e-8);
        }
        // φ captures the perturbation
        assert!(d.phi.max_abs() > 1e-3);
        for r in d.ortho_residuals {
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn fit_round_trip_random_draws() {
        let mut rng = SplitMix64::new(0xDECAF);
        for trial in 0..25 {
            let a = rng.uniform(0.42, 0.58);
            let b = rng.uniform(0.02, 0.3);
            let mut beta = [0.0; 5];
            for bk in beta.iter_mut() {
                *bk = rng.symmetric(0.02);
            }
            let v = neck_field(a, b, beta, 321, 16);
            let d = fit_interior(&v, 0.5, 0.1).unwrap();
            assert!(
                (d.params.a - a).abs() < 1e-8 && (d.params.b - b).abs() < 1e-8,
                "trial {trial}: a {} vs {a}, b {} vs {b}",
                d.params.a,
                d.params.b
            );
            for k in 0..5 {
                assert!((d.params.beta[k] - beta[k]).abs() < 1e-8, "trial {trial} beta{k}");
            }
            for r in d.ortho_residuals {
                assert!(r.abs() < 1e-10);
            }
            assert!(d.gram_condition < 1e4, "conditioning {}", d.gram_condition);
        }
    }

    #[test]
    fn gauge_fields_of_exact_profile() {
        let params = ProfileParams::new(0.5, 0.1, [0.0; 5]).unwrap();
        let v = neck_field(0.5, 0.1, [0.0; 5], 321, 16);
        let (w, xi) = gauge_fields(&v, &params);
        assert!(xi.max_abs() < 1e-14);
        // w_ab decays like a Gaussian at the grid edge
        assert!(w.at(0, 0).abs() < 1e-12);
        assert!(w.at(v.n_y() - 1, 3).abs() < 1e-12);
    }

    #[test]
    fn xi_orthogonality_after_fit() {
        let profile = FormalProfile::new(0.48, 0.12).unwrap();
        let v = GraphField::from_fn(16.0, 321, 16, |y, th| {
            profile.value(y)
                + 0.01 * y * th.cos()
                + 0.004 * (y * y - 3.0) * (-y * y / 6.0).exp() * th.sin()
        });
        let d = fit_interior(&v, 0.5, 0.1).unwrap();
        for (k, r) in d.xi_residuals.iter().enumerate() {
            assert!(r.abs() < 1e-10, "xi residual {k} = {r}");
        }
    }

    #[test]
    fn fourier_pm_examples() {
        let f = GraphField::from_fn(4.0, 21, 16, |_, t| t.cos());
        let pm = fourier_pm(&f);
        for i in 0..f.n_y() {
            assert!((pm.plus_re[i] - 0.5).abs() < 1e-12);
            assert!(pm.plus_im[i].abs() < 1e-12);
            assert!((pm.minus_re[i] - 0.5).abs() < 1e-12);
        }
        let g = GraphField::from_fn(4.0, 21, 16, |y, _| 1.0 + y * y);
        let pm = fourier_pm(&g);
        for i in 0..g.n_y() {
            assert!(pm.plus_re[i].abs() < 1e-13 && pm.plus_im[i].abs() < 1e-13);
        }
        // tilted-neck construction: |v_±| reproduces ε·|y|/2
        let eps = 0.02;
        let tilted = GraphField::from_fn(8.0, 41, 16, |y, th| {
            (2.0 + 0.1 * y * y).sqrt() + eps * y * th.cos()
        });
        let pm = fourier_pm(&tilted);
        let abs = pm.plus_abs();
        for i in 0..tilted.n_y() {
            assert!(
                (abs[i] - eps * tilted.y(i).abs() / 2.0).abs() < 1e-12,
                "row {i}"
            );
        }
    }

    #[test]
    fn optimal_refit_recovers_translation() {
        // a neck translated transversely by a small rigid motion: the refit
        // must find the inverse translation and a β-free decomposition
        let v = neck_field(0.5 - 0.1 / 4.0, 0.1, [0.0; 5], 321, 32);
        let delta = 0.01;
        let m = RigidMotion::small(0.0, delta, 0.0, 0.0, 0.0);
        let moved = resample_graph(&v, 1.0, &m, 1.0).unwrap();
        let fit = optimal_refit(&moved, 1.0, 0.5 - 0.1 / 4.0, 0.08).unwrap();
        // recovered motion undoes the imposed translation
        assert!(
            (fit.motion.translation[1] + delta).abs() < 1e-4,
            "recovered transverse shift {:?}",
            fit.motion.translation
        );
        assert!((fit.b_opt - 0.1).abs() < 1e-4, "b_opt {}", fit.b_opt);
        assert!((fit.lambda_opt - 1.0).abs() < 1e-4);
        for r in fit.decomp.ortho_residuals {
            assert!(r.abs() < 1e-10);
        }
    }

    #[test]
    fn optimal_refit_recovers_tilt() {
        let v = neck_field(0.5 - 0.1 / 4.0, 0.1, [0.0; 5], 321, 32);
        let eps = 0.02;
        let m = RigidMotion::small(0.0, 0.0, 0.0, 0.0, eps);
        let moved = resample_graph(&v, 1.0, &m, 1.0).unwrap();
        let fit = optimal_refit(&moved, 1.0, 0.5 - 0.1 / 4.0, 0.1).unwrap();
        assert!(
            (fit.motion.rotation_deviation() - 2.0_f64.sqrt() * eps).abs() < 1e-3,
            "rotation deviation {}",
            fit.motion.rotation_deviation()
        );
        // tilt angle recovered with the opposite sign
        let q = fit.motion.quaternion();
        let angle = 2.0 * q[0].acos().min((1.0 - q[0]).sqrt() * 2.0);
        assert!((angle - eps).abs() < 1e-4, "angle {angle}");
        for r in fit.decomp.ortho_residuals {
            assert!(r.abs() < 1e-10);
        }
    }

    #[test]
    fn optimal_refit_frame_covariance() {
        // applying an extra known small motion before the refit recovers
        // the composed motion (group equivariance at first order)
        let v = neck_field(0.5 - 0.1 / 4.0, 0.1, [0.0; 5], 321, 32);
        let m1 = RigidMotion::small(0.0, 0.008, 0.0, 0.0, 0.012);
        let m2 = RigidMotion::small(0.01, 0.0, -0.006, 0.009, 0.0);
        let moved = resample_graph(
            &resample_graph(&v, 1.0, &m1, 1.0).unwrap(),
            1.0,
            &m2,
            1.0,
        )
        .unwrap();
        let fit = optimal_refit(&moved, 1.0, 0.5 - 0.1 / 4.0, 0.1).unwrap();
        let expect = m1.compose(&m2).inverse();
        for k in 0..3 {
            assert!(
                (fit.motion.translation[k] - expect.translation[k]).abs() < 1e-4,
                "translation component {k}: {} vs {}",
                fit.motion.translation[k],
                expect.translation[k]
            );
        }
        let mut rot_dev = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                rot_dev = rot_dev.max((fit.motion.rotation[i][j] - expect.rotation[i][j]).abs());
            }
        }
        assert!(rot_dev < 1e-4, "rotation deviation {rot_dev}");
    }

    #[test]
    fn optimal_refit_identity_on_optimal_input() {
        let b = 0.1;
        let v = neck_field(0.5 - b / 4.0, b, [0.0; 5], 321, 32);
        let fit = optimal_refit(&v, 1.0, 0.5 - b / 4.0, 0.09).unwrap();
        assert!(fit.motion.size() < 1e-7, "motion size {}", fit.motion.size());
        assert!((fit.lambda_opt - 1.0).abs() < 1e-7);
        assert!((fit.b_opt - b).abs() < 1e-7);
    }

    #[test]
    fn xi_rhs_zero_perturbation_kills_nonlinear_terms() {
        // cylinder state with matching parameters: every N-term vanishes
        let params = ProfileParams::new(0.5, 0.0, [0.0; 5]).unwrap();
        let v = GraphField::constant(16.0, 161, 16, 2.0_f64.sqrt());
        let st = DecomposedState {
            tau: 0.0,
            v,
            params,
        };
        let terms = xi_rhs_terms(&st, 0.0, 0.0, [0.0; 5]).unwrap();
        assert!(terms.n1.max_abs() < 1e-13);
        assert!(terms.n2.max_abs() < 1e-13);
        assert!(terms.n3.max_abs() < 1e-12);
        assert!(terms.f2.max_abs() < 1e-13);
        // F₁ at (a, b) = (1/2, 0) vanishes identically too
        assert!(terms.f1.max_abs() < 1e-13);
    }

    #[test]
    fn xi_rhs_f1_matches_closed_form_display() {
        // frozen profile trajectory: the right side reduces to F₁(a,b),
        // whose display is evaluated here independently
        let a = 0.47;
        let b = 0.08;
        let params = ProfileParams::new(a, b, [0.0; 5]).unwrap();
        let profile = params.profile();
        let v = GraphField::from_fn(16.0, 321, 16, |y, _| profile.value(y));
        let st = DecomposedState {
            tau: 0.0,
            v: v.clone(),
            params,
        };
        let b_tau = -b * b; // a plausible clock rate; enters the display
        let a_tau = 0.25 * b * b;
        let terms = xi_rhs_terms(&st, a_tau, b_tau, [0.0; 5]).unwrap();
        let mut worst = 0.0f64;
        for i in 0..v.n_y() {
            let y = v.y(i);
            let root = ((2.0 - 2.0 * a) * (2.0 + b * y * y)).sqrt();
            let display = (-a * y * y / 4.0).exp()
                * (2.0 * b / ((2.0 - 2.0 * a).sqrt() * (2.0 + b * y * y).powf(1.5))
                    - a * b * y * y / root
                    + a * ((2.0 + b * y * y) / (2.0 - 2.0 * a)).sqrt()
                    - ((2.0 - 2.0 * a) / (2.0 + b * y * y)).sqrt()
                    - 0.5 * b_tau * y * y / root
                    - (2.0 + b * y * y).sqrt() / (2.0 - 2.0 * a).powf(1.5) * a_tau);
            worst = worst.max((terms.f1.at(i, 0) - display).abs());
        }
        assert!(worst < 1e-12, "F1 mismatch vs display {worst}");
        // and the non-F₁ remainder of the right side is higher order in b
        let lhs_free = terms.total();
        let mut rest = 0.0f64;
        for i in 0..v.n_y() {
            rest = rest.max((lhs_free.at(i, 0) - terms.f1.at(i, 0)).abs());
        }
        assert!(rest < 0.05 * terms.f1.max_abs(), "remainder {rest}");
    }

    #[test]
    fn xi_residual_requires_history() {
        let params = ProfileParams::new(0.5, 0.1, [0.0; 5]).unwrap();
        let v = neck_field(0.5, 0.1, [0.0; 5], 81, 8);
        let st = DecomposedState {
            tau: 0.0,
            v,
            params,
        };
        assert!(matches!(
            xi_evolution_residual(&[st.clone(), st]),
            Err(Error::InsufficientHistory { .. })
        ));
    }
}
