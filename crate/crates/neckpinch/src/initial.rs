//! Parametric initial surfaces around the formal neck, and the checkable
//! suite of initial-data assumptions.

use crate::config::GoldenConstants;
use crate::decomp::fourier_pm;
use crate::diagnostics::ConditionReport;
use crate::error::{Error, Result};
use crate::field::{deriv_y, simpson_weights, GraphField, ThetaDiff};
use crate::profile::{FormalProfile, StepProfile, WeightedMeasure};

/// A higher angular mode `amplitude · cos(kθ) · e^{−x²/(2 width²)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HigherMode {
    pub k: usize,
    pub amplitude: f64,
    pub width: f64,
}

/// Perturbation family around `V_{a₀,b₀}`:
///
/// `u₀ = V_{a₀,b₀}(x) + ε₀ x e^{−x²/4} + (ε₁ cos θ + ε₂ sin θ) e^{−x²/4}
///      + (ε₃ cos θ + ε₄ sin θ) x e^{−x²/4} + higher modes`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub a0: f64,
    pub b0: f64,
    /// `(ε₀, ε₁, ε₂, ε₃, ε₄)`: axial asymmetry, transverse shifts, tilts.
    pub eps: [f64; 5],
    pub higher: Vec<HigherMode>,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self {
            a0: 0.5,
            b0: 0.1,
            eps: [0.0; 5],
            higher: Vec::new(),
        }
    }
}

impl PerturbationSpec {
    pub fn profile(&self) -> Result<FormalProfile> {
        FormalProfile::new(self.a0, self.b0)
    }
}

/// Build the initial surface on the given grid.
pub fn build_initial(
    spec: &PerturbationSpec,
    y_max: f64,
    n_y: usize,
    n_theta: usize,
) -> Result<GraphField> {
    let profile = spec.profile()?;
    let u0 = GraphField::from_fn(y_max, n_y, n_theta, |x, th| {
        let env = (-x * x / 4.0).exp();
        let (s, c) = th.sin_cos();
        let mut val = profile.value(x)
            + spec.eps[0] * x * env
            + (spec.eps[1] * c + spec.eps[2] * s) * env
            + (spec.eps[3] * c + spec.eps[4] * s) * x * env;
        for hm in &spec.higher {
            val += hm.amplitude
                * (hm.k as f64 * th).cos()
                * (-x * x / (2.0 * hm.width * hm.width)).exp();
        }
        val
    });
    let min = u0.min_value();
    if min <= 0.0 {
        return Err(Error::NonPositiveRadius { min });
    }
    Ok(u0)
}

fn mu_norm(f: &GraphField) -> f64 {
    let mu = WeightedMeasure::default();
    let ws = simpson_weights(f.n_y(), f.dy_step());
    let dth = f.dtheta_step();
    let mut acc = 0.0;
    for i in 0..f.n_y() {
        let w = ws[i] * mu.weight(f.y(i)) * dth;
        for j in 0..f.n_theta() {
            acc += w * f.at(i, j) * f.at(i, j);
        }
    }
    acc.sqrt()
}

fn weighted_sup(values: &GraphField, m: f64) -> f64 {
    let mut sup = 0.0f64;
    for i in 0..values.n_y() {
        let w = (1.0 + values.y(i) * values.y(i)).powf(-m / 2.0);
        for j in 0..values.n_theta() {
            sup = sup.max(w * values.at(i, j).abs());
        }
    }
    sup
}

/// Margins for the initial-data assumptions. The `⟨x⟩`-weighted decay
/// bounds and the `±`-component bounds come straight from the displayed
/// inequalities; implicit constants live in the golden-constants table.
pub fn assumption_check(
    u0: &GraphField,
    spec: &PerturbationSpec,
    consts: &GoldenConstants,
) -> Result<ConditionReport> {
    let b0 = spec.b0;
    let c0 = consts.get("c0_small");
    let profile = spec.profile()?;
    let theta = ThetaDiff::new(u0.n_theta());
    let mut rep = ConditionReport::default();

    let dev = u0.map(|x, _, val| val - profile.value(x));
    let dev_x = deriv_y(&dev, 1)?;
    let dev_th = theta.apply(&dev, 1)?;
    let ux = deriv_y(u0, 1)?;
    let uxx = deriv_y(u0, 2)?;
    let uxxx = deriv_y(u0, 3)?;
    let uth = theta.apply(u0, 1)?;
    // mixed ∂_x^m ∂_θ^n with either order possibly zero
    let dmn = |m: usize, n: usize| -> Result<GraphField> {
        let base = theta.apply(u0, n)?;
        if m == 0 {
            Ok(base)
        } else {
            deriv_y(&base, m)
        }
    };

    // [A1] Lipschitz bound on the deviation from the profile
    let lip = dev_x.max_abs().max(dev_th.max_abs());
    rep.push("A1.lipschitz", lip, consts.get("a1_lip") * 2.0 * b0);
    // [A1] lower barrier u₀ ≥ c_* V
    {
        let c_star = consts.get("a1_c_star");
        let mut worst = 0.0f64;
        for i in 0..u0.n_y() {
            let vref = c_star * profile.value(u0.y(i));
            for j in 0..u0.n_theta() {
                worst = worst.max(vref / u0.at(i, j));
            }
        }
        rep.push("A1.lower_profile", worst, 1.0);
    }
    // [A1] ± components
    {
        let pm_u = fourier_pm(u0);
        let pm_ux = fourier_pm(&ux);
        let sup_u = pm_u.plus_abs().into_iter().fold(0.0f64, f64::max);
        let sup_ux = pm_ux.plus_abs().into_iter().fold(0.0f64, f64::max);
        rep.push("A1.pm", sup_u + sup_ux, consts.get("a1_pm") * b0 * b0);

        let w_u = {
            let va = pm_u.plus_abs();
            let mut sup = 0.0f64;
            for (i, v) in va.iter().enumerate() {
                let x = u0.y(i);
                sup = sup.max((1.0 + x * x).powf(-11.0 / 20.0) * v);
            }
            sup
        };
        let w_ux = {
            let va = pm_ux.plus_abs();
            let mut sup = 0.0f64;
            for (i, v) in va.iter().enumerate() {
                let x = u0.y(i);
                sup = sup.max((1.0 + x * x).powf(-11.0 / 20.0) * v);
            }
            sup
        };
        rep.push(
            "A1.pm_decay",
            w_u + w_ux,
            consts.get("a1_pm_decay") * b0.powf(53.0 / 20.0),
        );
    }
    rep.push(
        "A1.theta_decay",
        weighted_sup(&uth, 5.0),
        consts.get("a1_theta5") * b0.powf(21.0 / 10.0),
    );

    // [A2] u₀ > g(x, b₀)
    {
        let step = StepProfile::default();
        let mut worst = 0.0f64;
        for i in 0..u0.n_y() {
            let g = step.value(u0.y(i), b0);
            for j in 0..u0.n_theta() {
                worst = worst.max(g / u0.at(i, j));
            }
        }
        rep.push("A2.step_barrier", worst, 1.0);
    }

    // [A3] closeness to the profile in ‖·‖_{m,n}
    for (m, n) in [(3.0, 0usize), (11.0 / 10.0, 0), (2.0, 1), (1.0, 1)] {
        let nrm = dev.weighted_sup_norm(m, n)?;
        rep.push(
            &format!("A3.norm_{m}_{n}"),
            nrm,
            consts.get("a3") * b0.powf((m + n as f64) / 2.0 + 0.1),
        );
    }

    // [A4] rescaling rate near 1/2
    rep.push("A4.a0", (spec.a0 - 0.5).abs(), c0);

    // [A5] pointwise derivative bounds
    {
        // Σ_{n≠0, 2≤m+n≤3} u^{−n} |∂_x^m ∂_θ^n u|
        let mut mixed_sum = GraphField::zeros_like(u0);
        for (m, n) in [(1usize, 1usize), (0, 2), (2, 1), (1, 2), (0, 3)] {
            let f = dmn(m, n)?;
            for i in 0..u0.n_y() {
                for j in 0..u0.n_theta() {
                    *mixed_sum.at_mut(i, j) +=
                        (f.at(i, j) / u0.at(i, j).powi(n as i32)).abs();
                }
            }
        }
        rep.push(
            "A5.mixed",
            mixed_sum.max_abs(),
            consts.get("a5_mixed") * b0 * b0,
        );

        let mut grad3 = 0.0f64;
        for i in 0..u0.n_y() {
            for j in 0..u0.n_theta() {
                let t = b0 * ux.at(i, j).abs() / u0.at(i, j).sqrt()
                    + b0.sqrt() * uxx.at(i, j).abs()
                    + uxxx.at(i, j).abs();
                grad3 = grad3.max(t);
            }
        }
        rep.push("A5.grad3", grad3, consts.get("a5_grad") * b0.powf(1.5));

        let uthth = theta.apply(u0, 2)?;
        let uxthth = deriv_y(&uthth, 1)?;
        let uththth = theta.apply(u0, 3)?;
        let mut small = 0.0f64;
        for i in 0..u0.n_y() {
            for j in 0..u0.n_theta() {
                small = small.max(
                    uxthth.at(i, j).abs() + uththth.at(i, j).abs() / u0.at(i, j),
                );
            }
        }
        rep.push("A5.theta3", small, c0);
    }

    // [A6] Sobolev bounds
    {
        let ux4 = deriv_y(u0, 4)?;
        let ux5 = deriv_y(u0, 5)?;
        let mut total = b0.powf(0.8) * mu_norm(&ux4) + mu_norm(&ux5);
        for (m, n) in [(3usize, 1usize), (2, 2), (1, 3), (0, 4), (4, 1), (3, 2), (2, 3), (1, 4), (0, 5)]
        {
            let f = dmn(m, n)?;
            let scaled = f.zip(u0, |d, u| d / u.powi(n as i32));
            total += mu_norm(&scaled);
        }
        rep.push("A6.sobolev", total, consts.get("a6") * b0.powf(4.0));
    }

    // [A7] tameness at infinity: finiteness of high-order sup norms
    {
        let mut worst = 0.0f64;
        for m in 0..=6usize {
            for n in 0..=5usize {
                let order = m + n;
                if !(4..=6).contains(&order) {
                    continue;
                }
                let f = dmn(m, n)?;
                let scaled = f.zip(u0, |d, u| d / u.powi(n as i32));
                worst = worst.max(scaled.max_abs());
            }
        }
        let margin = if worst.is_finite() { 0.0 } else { f64::INFINITY };
        rep.push("A7.tame", margin, 1.0);
        let _ = worst;
    }
    Ok(rep)
}
