//! Monitored quantities of the a-priori estimate suites: Lyapunov functionals,
//! condition margins, modulation ODE residuals, majorants, and fits of the
//! universal asymptotic laws.
//!
//! The absolute constants implicit in the qualitative bounds are
//! configuration values (see [`crate::config::GoldenConstants`]) calibrated
//! once on the benchmark run and then frozen; a margin ≤ 1 means the
//! condition holds with the frozen constant. Sup norms and weighted
//! quadratures exclude a thin strip at the axial grid ends
//! ([`crate::field::BOUNDARY_TRIM`] rows) where the far-field closure
//! leaves numerical residue that high-order one-sided stencils amplify.

use crate::config::GoldenConstants;
use crate::decomp::fourier_pm;
use crate::error::{Error, Result};
use crate::field::{deriv_y, simpson_weights, GraphField, ThetaDiff, BOUNDARY_TRIM};
use crate::profile::{BetaClock, StepProfile, WeightedMeasure};

/// Lyapunov functionals `Ω_{m,n} = ‖v^{−n} ∂_y^m ∂_θ^n v‖²_μ` for
/// `2 ≤ m+n ≤ 5`.
#[derive(Debug, Clone)]
pub struct LyapunovTable {
    pub entries: Vec<(usize, usize, f64)>,
}

impl LyapunovTable {
    pub fn get(&self, m: usize, n: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|(mm, nn, _)| *mm == m && *nn == n)
            .map(|(_, _, v)| *v)
    }
}

pub fn lyapunov_table(v: &GraphField) -> Result<LyapunovTable> {
    let mu = WeightedMeasure::default();
    let theta = ThetaDiff::new(v.n_theta());
    // Simpson weights on the trimmed subrange (the trim keeps it odd)
    let trim = BOUNDARY_TRIM.min(v.n_y() / 4);
    let ws = simpson_weights(v.n_y() - 2 * trim, v.dy_step());
    let dth = v.dtheta_step();
    let smoothed = v.smoothed_y();
    let mut entries = Vec::new();
    for n in 0..=5usize {
        let base = theta.apply(v, n)?;
        let base_smooth = theta.apply(&smoothed, n)?;
        for m in 0..=5usize {
            let order = m + n;
            if !(2..=5).contains(&order) {
                continue;
            }
            let field = if m == 0 {
                base.clone()
            } else if order == 5 {
                deriv_y(&base_smooth, m)?
            } else {
                deriv_y(&base, m)?
            };
            let mut acc = 0.0;
            for i in trim..v.n_y() - trim {
                let w = ws[i - trim] * mu.weight(v.y(i)) * dth;
                for j in 0..v.n_theta() {
                    let integrand = v.at(i, j).powi(-(n as i32)) * field.at(i, j);
                    acc += w * integrand * integrand;
                }
            }
            entries.push((m, n, acc));
        }
    }
    Ok(LyapunovTable { entries })
}

/// Per-mode angular energy `E_k = 2π ∫ w(y) (|v̂_k|² + |v̂_{−k}|²) dy` for
/// `k ≥ 1` and `E₀ = 2π ∫ w |v̂₀|² dy`, up to the Nyquist index, with the
/// neck-localized Gaussian weight `w(y) = e^{−y²/4}`. (The asymptotic
/// rotational symmetry is a statement about the neck neighborhood; a
/// slowly-decaying weight would instead be dominated by far-field content
/// that frame re-expressions shuffle around.)
pub fn theta_energy(v: &GraphField) -> Vec<f64> {
    let ws = simpson_weights(v.n_y(), v.dy_step());
    let kmax = v.n_theta() / 2;
    let tau = std::f64::consts::TAU;
    let mut energies = Vec::with_capacity(kmax + 1);
    for k in 0..=kmax {
        let (re, im) = v.fourier_mode(k as i64);
        let mut acc = 0.0;
        for i in 0..v.n_y() {
            let y = v.y(i);
            let power = re[i] * re[i] + im[i] * im[i];
            // ±k combine except for k = 0 and the Nyquist mode
            let degeneracy = if k == 0 || 2 * k == v.n_theta() { 1.0 } else { 2.0 };
            acc += ws[i] * (-y * y / 4.0).exp() * degeneracy * power;
        }
        energies.push(tau * acc);
    }
    energies
}

/// One measured inequality: `margin ≤ 1` means the condition holds.
#[derive(Debug, Clone)]
pub struct ConditionMargin {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ConditionReport {
    pub margins: Vec<ConditionMargin>,
}

impl ConditionReport {
    pub fn push(&mut self, name: &str, measured: f64, bound: f64) {
        let margin = if bound > 0.0 {
            measured / bound
        } else if measured == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        self.margins.push(ConditionMargin {
            name: name.to_string(),
            measured,
            bound,
            margin,
        });
    }

    pub fn get(&self, name: &str) -> Option<&ConditionMargin> {
        self.margins.iter().find(|m| m.name == name)
    }

    pub fn worst(&self) -> f64 {
        self.margins.iter().fold(0.0, |w, m| w.max(m.margin))
    }

    pub fn all_hold(&self) -> bool {
        self.worst() <= 1.0
    }
}

/// Derivative bundle for the condition suite.
struct CondDerivs {
    vy: GraphField,
    vyy: GraphField,
    vyyy: GraphField,
    vth: GraphField,
    vthth: GraphField,
    vththth: GraphField,
    vyth: GraphField,
    vyyth: GraphField,
    vythth: GraphField,
}

fn cond_derivs(v: &GraphField) -> Result<CondDerivs> {
    let theta = ThetaDiff::new(v.n_theta());
    let vth = theta.apply(v, 1)?;
    let vthth = theta.apply(v, 2)?;
    Ok(CondDerivs {
        vy: deriv_y(v, 1)?,
        vyy: deriv_y(v, 2)?,
        vyyy: deriv_y(v, 3)?,
        vyth: deriv_y(&vth, 1)?,
        vyyth: deriv_y(&vth, 2)?,
        vythth: deriv_y(&vthth, 1)?,
        vth,
        vthth,
        vththth: theta.apply(v, 3)?,
    })
}

/// Margins for the global conditions, the inner-region extras, and the
/// derivative-estimate output suite, at one rescaled time.
pub fn condition_check(
    v: &GraphField,
    a: f64,
    tau: f64,
    clock: &BetaClock,
    consts: &GoldenConstants,
) -> Result<ConditionReport> {
    let d = cond_derivs(v)?;
    let beta = clock.beta(tau);
    let beta0 = clock.beta(0.0);
    let kappa0 = clock.kappa0();
    let mu_m = WeightedMeasure::default().m();
    let step = StepProfile::default();
    let eps0 = consts.get("eps0");
    let mut rep = ConditionReport::default();

    // θ-independent / θ-dependent split for [Cr]
    let n_th = v.n_theta() as f64;
    let v1: Vec<f64> = (0..v.n_y())
        .map(|i| (0..v.n_theta()).map(|j| v.at(i, j)).sum::<f64>() / n_th)
        .collect();

    let trim = BOUNDARY_TRIM.min(v.n_y() / 4);
    let sup_all = |f: &dyn Fn(usize, usize, f64) -> f64| -> f64 {
        let mut worst = 0.0f64;
        for i in trim..v.n_y() - trim {
            let y = v.y(i);
            for j in 0..v.n_theta() {
                worst = worst.max(f(i, j, y));
            }
        }
        worst
    };

    // [C0] uniform lower bound
    rep.push("C0.lower", 1.0 / kappa0, v.min_value());
    // [C1]
    rep.push(
        "C1.dy",
        sup_all(&|i, j, _| d.vy.at(i, j).abs() / (beta.powf(0.4) * v.at(i, j).sqrt())),
        consts.get("c1_dy"),
    );
    rep.push(
        "C1.dth_scaled",
        sup_all(&|i, j, _| d.vth.at(i, j).abs() / (beta.powf(1.5) * v.at(i, j).powi(2))),
        consts.get("c1_dth_scaled"),
    );
    rep.push(
        "C1.dth",
        sup_all(&|i, j, _| d.vth.at(i, j).abs() / v.at(i, j)),
        consts.get("c1_dth"),
    );
    // [C2]
    rep.push(
        "C2.dyy",
        sup_all(&|i, j, _| d.vyy.at(i, j).abs() / beta.powf(0.6)),
        consts.get("c2_dyy"),
    );
    rep.push(
        "C2.dydth_scaled",
        sup_all(&|i, j, _| d.vyth.at(i, j).abs() / (beta.powf(1.5) * v.at(i, j))),
        consts.get("c2_dydth_scaled"),
    );
    rep.push(
        "C2.dydth",
        sup_all(&|i, j, _| d.vyth.at(i, j).abs()),
        consts.get("c2_dydth"),
    );
    rep.push(
        "C2.dthth",
        sup_all(&|i, j, _| d.vthth.at(i, j).abs() / (beta.powf(1.5) * v.at(i, j).powi(2))),
        consts.get("c2_dthth"),
    );
    // [C3]
    rep.push(
        "C3.dyyy",
        sup_all(&|i, j, _| d.vyyy.at(i, j).abs() / beta),
        consts.get("c3_dyyy"),
    );
    rep.push(
        "C3.mixed",
        sup_all(&|i, j, _| {
            let vv = v.at(i, j);
            (d.vyyth.at(i, j).abs() / vv)
                .max(d.vythth.at(i, j).abs() / (vv * vv))
                .max(d.vththth.at(i, j).abs() / (vv * vv * vv))
                / beta.powf(1.5)
        }),
        consts.get("c3_mixed"),
    );
    rep.push(
        "C3.smallness",
        sup_all(&|i, j, _| {
            let vv = v.at(i, j);
            (beta.powf(-0.55) * (d.vyyy.at(i, j).abs() + d.vyyth.at(i, j).abs())
                + d.vythth.at(i, j).abs()
                + d.vththth.at(i, j).abs() / vv)
                / (beta0 + eps0).powf(1.0 / 40.0)
        }),
        consts.get("c3_smallness"),
    );
    // [Ca]
    rep.push("Ca.band", (a - 0.5).abs(), 1.0 / kappa0);
    // [Cg]
    rep.push(
        "Cg.gradient",
        sup_all(&|i, j, y| {
            d.vy.at(i, j).abs() / ((1.0 + y * y).sqrt() * mu_m.powf(0.25) * beta)
        }),
        1.0,
    );
    // [Cr]
    rep.push(
        "Cr.ratio",
        sup_all(&|i, j, _| (v.at(i, j) - v1[i]).abs() / v1[i]),
        consts.get("cr_delta"),
    );
    // inner-region conditions
    let inner = |y: f64| step.is_inner(y, beta);
    let mut inner_min = f64::INFINITY;
    let mut inner_max = 0.0f64;
    for i in trim..v.n_y() - trim {
        if inner(v.y(i)) {
            for j in 0..v.n_theta() {
                inner_min = inner_min.min(v.at(i, j));
                inner_max = inner_max.max(v.at(i, j));
            }
        }
    }
    rep.push("C0i.lower", step.inner_value, inner_min);
    rep.push("C0i.upper", inner_max, consts.get("c_star"));
    let sup_inner = |f: &dyn Fn(usize, usize, f64) -> f64| -> f64 {
        let mut worst = 0.0f64;
        for i in trim..v.n_y() - trim {
            let y = v.y(i);
            if !inner(y) {
                continue;
            }
            for j in 0..v.n_theta() {
                worst = worst.max(f(i, j, y));
            }
        }
        worst
    };
    rep.push(
        "C1i.dy",
        sup_inner(&|i, j, _| d.vy.at(i, j).abs() / (beta.sqrt() * v.at(i, j).sqrt())),
        consts.get("c1i_dy"),
    );
    rep.push(
        "C1i.dth",
        sup_inner(&|i, j, _| d.vth.at(i, j).abs() * kappa0.sqrt() / v.at(i, j)),
        consts.get("c1i_dth"),
    );
    // [C2i]: Fourier ± components in the inner region
    {
        let pm_v = fourier_pm(v);
        let pm_dy = fourier_pm(&d.vy);
        let va = pm_v.plus_abs();
        let da = pm_dy.plus_abs();
        let mut worst = 0.0f64;
        for i in trim..v.n_y() - trim {
            if inner(v.y(i)) {
                worst = worst.max(va[i] + da[i]);
            }
        }
        rep.push(
            "C2i.pm",
            worst,
            consts.get("c2i") * beta * beta,
        );
    }

    // derivative-estimate output suite
    rep.push(
        "out.lower_g",
        sup_all(&|i, j, y| step.value(y, beta) / v.at(i, j)),
        1.0,
    );
    rep.push(
        "out.linear_growth",
        sup_all(&|i, j, y| v.at(i, j) / (1.0 + y * y).sqrt()),
        consts.get("out_growth"),
    );
    rep.push(
        "out.dy_scaled",
        sup_all(&|i, j, _| d.vy.at(i, j).abs() / (v.at(i, j).sqrt() * beta.sqrt())),
        consts.get("out_dy_scaled"),
    );
    rep.push("out.dy_eps", sup_all(&|i, j, _| d.vy.at(i, j).abs()), eps0);
    rep.push(
        "out.dth_33_20",
        sup_all(&|i, j, _| {
            d.vth.at(i, j).abs() / (v.at(i, j).powi(2) * beta.powf(33.0 / 20.0))
        }),
        consts.get("out_dth"),
    );
    rep.push(
        "out.dth_kappa",
        sup_all(&|i, j, _| d.vth.at(i, j).abs() * kappa0.sqrt() / v.at(i, j)),
        consts.get("out_dth_kappa"),
    );
    rep.push(
        "out.second",
        sup_all(&|i, j, _| {
            let vv = v.at(i, j);
            (beta * d.vyy.at(i, j).abs()
                + d.vyth.at(i, j).abs() / vv
                + d.vthth.at(i, j).abs() / (vv * vv))
                / beta.powf(33.0 / 20.0)
        }),
        consts.get("out_second"),
    );
    rep.push(
        "out.second_small",
        sup_all(&|i, j, _| {
            let vv = v.at(i, j);
            (d.vyth.at(i, j).abs() + d.vthth.at(i, j).abs() / vv) / (beta0 + eps0).powf(0.05)
        }),
        consts.get("out_second_small"),
    );
    rep.push(
        "out.third",
        sup_all(&|i, j, _| {
            let vv = v.at(i, j);
            (beta.sqrt() * d.vyyy.at(i, j).abs()
                + d.vyyth.at(i, j).abs() / vv
                + d.vythth.at(i, j).abs() / (vv * vv)
                + d.vththth.at(i, j).abs() / (vv * vv * vv))
                / beta.powf(33.0 / 20.0)
        }),
        consts.get("out_third"),
    );
    Ok(rep)
}

/// One time-slice of the modulation parameter history.
#[derive(Debug, Clone, Copy)]
pub struct ParamSample {
    pub tau: f64,
    pub a: f64,
    pub b: f64,
    pub beta0: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct OdeResidualRow {
    pub tau: f64,
    pub beta: f64,
    /// `Γ₁ = b + 4a − 2 − a_τ/(1−a)`.
    pub gamma1: f64,
    /// `Γ₂ = b² + b_τ`.
    pub gamma2: f64,
    /// `∂_τ β₀ − Ω₁(a,b) β₀`.
    pub beta0_residual: f64,
}

/// `Ω₁(a,b) = ∫ y² V_{a,b}^{−2} e^{−a y²/2} dy / ∫ y² e^{−a y²/2} dy`.
pub fn omega1(a: f64, b: f64) -> f64 {
    let n = 801;
    let h = 40.0 / (n - 1) as f64;
    let ws = simpson_weights(n, h);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, w) in ws.iter().enumerate() {
        let y = -20.0 + i as f64 * h;
        let gauss = (-a * y * y / 2.0).exp() * y * y;
        let vinv2 = (2.0 - 2.0 * a) / (2.0 + b * y * y);
        num += w * gauss * vinv2;
        den += w * gauss;
    }
    num / den
}

/// Residual time series of the modulation parameter ODEs, from centered
/// differences over the refit history.
pub fn ode_residuals(history: &[ParamSample], clock: &BetaClock) -> Result<Vec<OdeResidualRow>> {
    if history.len() < 3 {
        return Err(Error::InsufficientHistory {
            needed: 3,
            got: history.len(),
        });
    }
    let mut rows = Vec::new();
    for m in 1..history.len() - 1 {
        let (p, c, n) = (&history[m - 1], &history[m], &history[m + 1]);
        let taus = [p.tau, c.tau, n.tau];
        let w = crate::field::fornberg_weights(c.tau, &taus, 1);
        let a_tau = w[0] * p.a + w[1] * c.a + w[2] * n.a;
        let b_tau = w[0] * p.b + w[1] * c.b + w[2] * n.b;
        let beta0_tau = w[0] * p.beta0 + w[1] * c.beta0 + w[2] * n.beta0;
        rows.push(OdeResidualRow {
            tau: c.tau,
            beta: clock.beta(c.tau),
            gamma1: c.b + 4.0 * c.a - 2.0 - a_tau / (1.0 - c.a),
            gamma2: b_tau + c.b * c.b,
            beta0_residual: beta0_tau - omega1(c.a, c.b) * c.beta0,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `log |values|` against `log β` (decay exponent).
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pairs: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && y.abs() > 0.0)
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .collect();
    let n = pairs.len() as f64;
    let sx: f64 = pairs.iter().map(|p| p.0).sum();
    let sy: f64 = pairs.iter().map(|p| p.1).sum();
    let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// One optimal-coordinate sample for the asymptotic-law fit.
#[derive(Debug, Clone, Copy)]
pub struct OptimalSample {
    pub t: f64,
    pub lambda_opt: f64,
    pub b_opt: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub t_hat: f64,
    /// Mean and max deviation from 1 of `λ_opt/√(T̂−t)` over the window.
    pub lambda_ratio_mean: f64,
    pub lambda_ratio_max_dev: f64,
    /// Mean and max deviation from 1 of `b_opt · log(1/(T̂−t))`.
    pub b_log_ratio_mean: f64,
    pub b_log_ratio_max_dev: f64,
    /// Slope and intercept of `ln λ_opt` against `ln(T̂−t)` (slope ≈ 1/2
    /// on the self-similar law).
    pub lambda_loglog_slope: f64,
    pub lambda_loglog_intercept: f64,
    pub samples_used: usize,
}

/// Fit the asymptotic pinch laws over the final decade of `T̂ − t`.
pub fn asymptotic_fit(history: &[OptimalSample], t_hat: f64) -> Result<FitResult> {
    if history.len() < 3 {
        return Err(Error::InsufficientHistory {
            needed: 3,
            got: history.len(),
        });
    }
    let gap_last = t_hat - history.last().unwrap().t;
    if gap_last <= 0.0 {
        return Err(Error::InvalidParameter(
            "estimated blowup time precedes the last sample".into(),
        ));
    }
    let window: Vec<&OptimalSample> = history
        .iter()
        .filter(|s| t_hat - s.t <= 10.0 * gap_last)
        .collect();
    if window.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            got: window.len(),
        });
    }
    let mut lsum = 0.0;
    let mut ldev = 0.0f64;
    let mut bsum = 0.0;
    let mut bdev = 0.0f64;
    let mut xs = Vec::with_capacity(window.len());
    let mut ys = Vec::with_capacity(window.len());
    for s in &window {
        let gap = t_hat - s.t;
        let lr = s.lambda_opt / gap.sqrt();
        let br = s.b_opt * (1.0 / gap).ln();
        lsum += lr;
        bsum += br;
        ldev = ldev.max((lr - 1.0).abs());
        bdev = bdev.max((br - 1.0).abs());
        xs.push(gap.ln());
        ys.push(s.lambda_opt.ln());
    }
    let n = window.len() as f64;
    let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(FitResult {
        t_hat,
        lambda_ratio_mean: lsum / n,
        lambda_ratio_max_dev: ldev,
        b_log_ratio_mean: bsum / n,
        b_log_ratio_max_dev: bdev,
        lambda_loglog_slope: slope,
        lambda_loglog_intercept: (sy - slope * sx) / n,
        samples_used: window.len(),
    })
}

/// Running majorants over a trajectory.
#[derive(Debug, Clone, Default)]
pub struct Majorants {
    pub m_3_0: f64,
    pub m_11_10_0: f64,
    pub m_2_1: f64,
    pub m_1_1: f64,
    pub m4: f64,
    pub a_major: f64,
    pub b_major: f64,
}

/// One decomposition sample feeding the majorants.
pub struct MajorantSample<'a> {
    pub tau: f64,
    pub a: f64,
    pub b: f64,
    pub phi: &'a GraphField,
}

pub fn majorants<'a>(
    samples: impl IntoIterator<Item = MajorantSample<'a>>,
    clock: &BetaClock,
) -> Result<Majorants> {
    let mut out = Majorants::default();
    let mut theta: Option<ThetaDiff> = None;
    for s in samples {
        let beta = clock.beta(s.tau);
        let pairs = [(3.0, 0usize), (11.0 / 10.0, 0), (2.0, 1), (1.0, 1)];
        let mut norms = [0.0; 4];
        for (k, (m, n)) in pairs.iter().enumerate() {
            let nrm = s.phi.weighted_sup_norm(*m, *n)?;
            norms[k] = beta.powf(-(m + *n as f64) / 2.0 - 0.1) * nrm;
        }
        out.m_3_0 = out.m_3_0.max(norms[0]);
        out.m_11_10_0 = out.m_11_10_0.max(norms[1]);
        out.m_2_1 = out.m_2_1.max(norms[2]);
        out.m_1_1 = out.m_1_1.max(norms[3]);
        // M₄ uses the θ-derivative of φ with weight ⟨y⟩⁻⁵
        let th = theta.get_or_insert_with(|| ThetaDiff::new(s.phi.n_theta()));
        let dth = th.apply(s.phi, 1)?;
        out.m4 = out
            .m4
            .max(beta.powf(-2.1) * dth.weighted_sup_norm(5.0, 0)?);
        out.a_major = out
            .a_major
            .max(beta.powi(-2) * (s.a - 0.5 + s.b / 4.0).abs());
        out.b_major = out.b_major.max(beta.powf(-1.5) * (s.b - beta).abs());
    }
    Ok(out)
}
