//! Report emission: trajectory and mode CSV files, decomposition records,
//! and the final structured diagnostics document.
//!
//! All floating-point values are written with Rust's shortest round-trip
//! decimal formatting so that reruns with the same seed produce byte-equal
//! files.

use crate::decomp::Decomposition;
use crate::diagnostics::{ConditionReport, FitResult, LyapunovTable, Majorants, OdeResidualRow};
use crate::error::Result;
use crate::solver::{OptimalEvent, RunResult, StopReason};
use crate::spectral::DecayReport;
use crate::surface::RigidMotion;
use std::fmt::Write as _;
use std::path::Path;

/// Exact trajectory CSV header.
pub const TRAJECTORY_HEADER: &str = "t,tau,lambda,a,b,beta0,beta1,beta2,beta3,beta4,vmin,T_hat";

pub fn trajectory_csv(run: &RunResult) -> String {
    let mut s = String::from(TRAJECTORY_HEADER);
    s.push('\n');
    let mut last_tau = f64::NEG_INFINITY;
    for r in &run.rows {
        if r.tau == last_tau {
            continue;
        }
        last_tau = r.tau;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.tau,
            r.lambda,
            r.a,
            r.b,
            r.beta[0],
            r.beta[1],
            r.beta[2],
            r.beta[3],
            r.beta[4],
            r.vmin,
            r.t_hat
        );
    }
    s
}

pub fn modes_csv(run: &RunResult) -> String {
    let kmax = run.modes.first().map(|m| m.energies.len()).unwrap_or(0);
    let mut s = String::from("tau");
    for k in 0..kmax {
        let _ = write!(s, ",E{k}");
    }
    s.push('\n');
    let mut last_tau = f64::NEG_INFINITY;
    for m in &run.modes {
        if m.tau == last_tau {
            continue;
        }
        last_tau = m.tau;
        let _ = write!(s, "{}", m.tau);
        for e in &m.energies {
            let _ = write!(s, ",{e}");
        }
        s.push('\n');
    }
    s
}

/// Structured-text record of one decomposition
/// (parameters, residual norms, frame quaternion + translation).
pub fn decomposition_record(
    tau: f64,
    t: f64,
    lambda: f64,
    d: &Decomposition,
    motion: Option<&RigidMotion>,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "decomposition tau = {tau}");
    let _ = writeln!(s, "  t = {t}");
    let _ = writeln!(s, "  lambda = {lambda}");
    let _ = writeln!(s, "  a = {}", d.params.a);
    let _ = writeln!(s, "  b = {}", d.params.b);
    for (k, b) in d.params.beta.iter().enumerate() {
        let _ = writeln!(s, "  beta{k} = {b}");
    }
    let _ = writeln!(
        s,
        "  ortho_residuals = {}",
        d.ortho_residuals
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    let _ = writeln!(
        s,
        "  xi_residuals = {}",
        d.xi_residuals
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    let _ = writeln!(s, "  gram_condition = {}", d.gram_condition);
    let m = motion.cloned().unwrap_or_else(RigidMotion::identity);
    let q = m.quaternion();
    let _ = writeln!(
        s,
        "  frame_quaternion = {} {} {} {}",
        q[0], q[1], q[2], q[3]
    );
    let _ = writeln!(
        s,
        "  frame_translation = {} {} {}",
        m.translation[0], m.translation[1], m.translation[2]
    );
    s
}

pub fn optimal_events_csv(events: &[OptimalEvent]) -> String {
    let mut s = String::from(
        "tau,t,lambda_opt,b_opt,motion_size,rotation_deviation,pre_beta0,pre_beta1,pre_beta2,pre_beta3,pre_beta4\n",
    );
    for e in events {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            e.tau,
            e.t,
            e.lambda_opt,
            e.b_opt,
            e.motion.size(),
            e.motion.rotation_deviation(),
            e.pre_betas[0],
            e.pre_betas[1],
            e.pre_betas[2],
            e.pre_betas[3],
            e.pre_betas[4]
        );
    }
    s
}

pub fn conditions_csv(rep: &ConditionReport) -> String {
    let mut s = String::from("name,measured,bound,margin\n");
    for m in &rep.margins {
        let _ = writeln!(s, "{},{},{},{}", m.name, m.measured, m.bound, m.margin);
    }
    s
}

pub fn decay_csv(report: &DecayReport) -> String {
    let mut s = String::from("trial,ell,alpha,fitted_rate,fit_residual\n");
    for t in &report.trials {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            t.trial, t.ell, t.alpha, t.fitted_rate, t.fit_residual
        );
    }
    s
}

fn json_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn json_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "\"NaN\"".into()
    } else if x > 0.0 {
        "\"inf\"".into()
    } else {
        "\"-inf\"".into()
    }
}

/// The final diagnostics document, serialized as JSON-style structured text.
#[derive(Debug, Clone)]
pub struct DiagnosticsReport {
    pub stop: StopReason,
    pub tau_end: f64,
    pub t_end: f64,
    pub lambda_end: f64,
    pub t_hat: f64,
    pub lyapunov: Option<LyapunovTable>,
    pub conditions: Option<ConditionReport>,
    pub ode_residuals: Vec<OdeResidualRow>,
    pub gamma2_slope: Option<f64>,
    pub majorants: Option<Majorants>,
    pub fit: Option<FitResult>,
    pub mode_energy_initial: f64,
    pub mode_energy_final: f64,
}

impl DiagnosticsReport {
    pub fn to_json(&self) -> String {
        let mut s = String::from("{\n");
        let stop = match self.stop {
            StopReason::LambdaMin => "lambda_min",
            StopReason::VMin => "v_min",
            StopReason::TauMax => "tau_max",
        };
        let _ = writeln!(s, "  \"run\": {{");
        let _ = writeln!(s, "    \"stop\": \"{stop}\",");
        let _ = writeln!(s, "    \"tau_end\": {},", json_num(self.tau_end));
        let _ = writeln!(s, "    \"t_end\": {},", json_num(self.t_end));
        let _ = writeln!(s, "    \"lambda_end\": {},", json_num(self.lambda_end));
        let _ = writeln!(s, "    \"T_hat\": {}", json_num(self.t_hat));
        let _ = writeln!(s, "  }},");
        if let Some(table) = &self.lyapunov {
            let _ = writeln!(s, "  \"lyapunov\": {{");
            let rows: Vec<String> = table
                .entries
                .iter()
                .map(|(m, n, v)| format!("    \"omega_{m}_{n}\": {}", json_num(*v)))
                .collect();
            let _ = writeln!(s, "{}", rows.join(",\n"));
            let _ = writeln!(s, "  }},");
        }
        if let Some(rep) = &self.conditions {
            let _ = writeln!(s, "  \"conditions\": [");
            let rows: Vec<String> = rep
                .margins
                .iter()
                .map(|m| {
                    format!(
                        "    {{\"name\": \"{}\", \"measured\": {}, \"bound\": {}, \"margin\": {}}}",
                        json_escape(&m.name),
                        json_num(m.measured),
                        json_num(m.bound),
                        json_num(m.margin)
                    )
                })
                .collect();
            let _ = writeln!(s, "{}", rows.join(",\n"));
            let _ = writeln!(s, "  ],");
            let _ = writeln!(s, "  \"worst_margin\": {},", json_num(rep.worst()));
        }
        if !self.ode_residuals.is_empty() {
            let gmax = self
                .ode_residuals
                .iter()
                .fold(0.0f64, |w, r| w.max(r.gamma1.abs() / (r.beta * r.beta)));
            let _ = writeln!(s, "  \"ode_residuals\": {{");
            let _ = writeln!(s, "    \"max_gamma1_over_beta2\": {},", json_num(gmax));
            if let Some(slope) = self.gamma2_slope {
                let _ = writeln!(s, "    \"gamma2_loglog_slope\": {},", json_num(slope));
            }
            let _ = writeln!(s, "    \"samples\": {}", self.ode_residuals.len());
            let _ = writeln!(s, "  }},");
        }
        if let Some(m) = &self.majorants {
            let _ = writeln!(s, "  \"majorants\": {{");
            let _ = writeln!(s, "    \"M_3_0\": {},", json_num(m.m_3_0));
            let _ = writeln!(s, "    \"M_11_10_0\": {},", json_num(m.m_11_10_0));
            let _ = writeln!(s, "    \"M_2_1\": {},", json_num(m.m_2_1));
            let _ = writeln!(s, "    \"M_1_1\": {},", json_num(m.m_1_1));
            let _ = writeln!(s, "    \"M_4\": {},", json_num(m.m4));
            let _ = writeln!(s, "    \"A\": {},", json_num(m.a_major));
            let _ = writeln!(s, "    \"B\": {}", json_num(m.b_major));
            let _ = writeln!(s, "  }},");
        }
        if let Some(f) = &self.fit {
            let _ = writeln!(s, "  \"asymptotic_fit\": {{");
            let _ = writeln!(s, "    \"T_hat\": {},", json_num(f.t_hat));
            let _ = writeln!(
                s,
                "    \"lambda_ratio_mean\": {},",
                json_num(f.lambda_ratio_mean)
            );
            let _ = writeln!(
                s,
                "    \"lambda_ratio_max_dev\": {},",
                json_num(f.lambda_ratio_max_dev)
            );
            let _ = writeln!(s, "    \"b_log_ratio_mean\": {},", json_num(f.b_log_ratio_mean));
            let _ = writeln!(
                s,
                "    \"b_log_ratio_max_dev\": {},",
                json_num(f.b_log_ratio_max_dev)
            );
            let _ = writeln!(
                s,
                "    \"lambda_loglog_slope\": {},",
                json_num(f.lambda_loglog_slope)
            );
            let _ = writeln!(s, "    \"samples_used\": {}", f.samples_used);
            let _ = writeln!(s, "  }},");
        }
        let _ = writeln!(s, "  \"theta_energy\": {{");
        let _ = writeln!(
            s,
            "    \"nonaxisymmetric_initial\": {},",
            json_num(self.mode_energy_initial)
        );
        let _ = writeln!(
            s,
            "    \"nonaxisymmetric_final\": {}",
            json_num(self.mode_energy_final)
        );
        let _ = writeln!(s, "  }}");
        s.push('}');
        s.push('\n');
        s
    }
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content)?;
    Ok(())
}
