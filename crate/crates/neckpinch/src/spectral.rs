//! Linearization spectra, gauge-level oscillator operators, spectral
//! projections, and the propagator with its decay experiments.
//!
//! At gauge level (after multiplying by `e^{−α y²/4}`) the linearization
//! around the cylinder becomes a quantum harmonic oscillator. Its
//! eigenfunctions are Hermite functions with Gaussian `e^{−α z²/4}`; the
//! semigroup `e^{−σ L₀(α)}` acts by damping Hermite coefficients, with a
//! Mehler-type integral kernel as an independent cross-check.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

use nalgebra::DMatrix;

/// Gauss-Hermite quadrature rule for `∫ e^{−x²} f(x) dx` (Golub-Welsch).
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..n - 1 {
            let e = ((i + 1) as f64 * 0.5).sqrt();
            m[(i, i + 1)] = e;
            m[(i + 1, i)] = e;
        }
        let eig = m.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let v0 = eig.eigenvectors[(0, k)];
                (x, v0 * v0 * std::f64::consts::PI.sqrt())
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Orthonormal gauge-level Hermite basis for a rate `α`:
/// `φ_n(z) = α^{1/4} (2π)^{−1/4} He_n(√α z) e^{−α z²/4} / √(n!)`,
/// orthonormal in `L²(dz)`.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    pub alpha: f64,
    pub n_max: usize,
    gh: GaussHermite,
}

/// Default Hermite truncation order.
pub const DEFAULT_N_HERMITE: usize = 64;

impl HermiteBasis {
    pub fn new(alpha: f64, n_max: usize) -> Result<Self> {
        if alpha <= 0.0 {
            return Err(Error::InvalidParameter("alpha must be positive".into()));
        }
        Ok(Self {
            alpha,
            n_max,
            gh: GaussHermite::new(n_max + 8),
        })
    }

    /// Values `φ_0(z), ..., φ_{n_max}(z)` by the stable normalized recurrence.
    pub fn phi_row(&self, z: f64) -> Vec<f64> {
        let x = self.alpha.sqrt() * z;
        let kappa = self.alpha.powf(0.25) * (2.0 * std::f64::consts::PI).powf(-0.25);
        let mut row = Vec::with_capacity(self.n_max + 1);
        let g = (-x * x / 4.0).exp();
        let mut hm1 = 0.0;
        let mut h = g; // ĥ_0
        row.push(kappa * h);
        for n in 0..self.n_max {
            let hp = (x * h - (n as f64).sqrt() * hm1) / ((n + 1) as f64).sqrt();
            row.push(kappa * hp);
            hm1 = h;
            h = hp;
        }
        row
    }

    /// Coefficients of `f(z) = envelope(z) e^{−α z²/4}` in the basis,
    /// by Gauss-Hermite quadrature (exact for polynomial envelopes).
    pub fn coeffs_from_envelope(&self, envelope: impl Fn(f64) -> f64) -> Vec<f64> {
        let scale = (2.0 / self.alpha).sqrt();
        let kappa = self.alpha.powf(0.25) * (2.0 * std::f64::consts::PI).powf(-0.25);
        let mut coeffs = vec![0.0; self.n_max + 1];
        for (&x, &w) in self.gh.nodes.iter().zip(&self.gh.weights) {
            let z = scale * x;
            let fz = envelope(z);
            // q_n = He_n(√2 x)/√(n!) by recurrence
            let sx = std::f64::consts::SQRT_2 * x;
            let mut qm1 = 0.0;
            let mut q = 1.0;
            for (n, c) in coeffs.iter_mut().enumerate() {
                *c += w * fz * q;
                let qp = (sx * q - (n as f64).sqrt() * qm1) / ((n + 1) as f64).sqrt();
                qm1 = q;
                q = qp;
            }
        }
        let pref = kappa * std::f64::consts::SQRT_2 / self.alpha.sqrt();
        for c in coeffs.iter_mut() {
            *c *= pref;
        }
        coeffs
    }

    /// Coefficients from samples on a uniform grid (trapezoid; for
    /// cross-checks with grid-based routes).
    pub fn coeffs_from_grid(&self, z: &[f64], f: &[f64]) -> Vec<f64> {
        let h = z[1] - z[0];
        let mut coeffs = vec![0.0; self.n_max + 1];
        for (&zi, &fi) in z.iter().zip(f) {
            for (n, p) in self.phi_row(zi).into_iter().enumerate() {
                coeffs[n] += p * fi * h;
            }
        }
        coeffs
    }

    pub fn eval_series(&self, coeffs: &[f64], z: f64) -> f64 {
        self.phi_row(z)
            .iter()
            .zip(coeffs)
            .map(|(p, c)| p * c)
            .sum()
    }
}

/// Gauge-level oscillator `L₀(α) = −∂_z² + (α²/4) z² − 3α/2` (with the
/// clock rate frozen), whose spectrum is `α(n − 1)` on the `n`-th Hermite
/// function.
#[derive(Debug, Clone)]
pub struct OscillatorSpec {
    pub alpha: f64,
    pub n_hermite: usize,
}

impl OscillatorSpec {
    pub fn new(alpha: f64, n_hermite: usize) -> Result<Self> {
        if !(0.25 < alpha && alpha < 0.75) {
            return Err(Error::InvalidParameter(format!(
                "oscillator rate must lie in (0.25, 0.75), got {alpha}"
            )));
        }
        Ok(Self { alpha, n_hermite })
    }

    pub fn eigenvalue(&self, n: usize) -> f64 {
        self.alpha * (n as f64 - 1.0)
    }

    pub fn basis(&self) -> Result<HermiteBasis> {
        HermiteBasis::new(self.alpha, self.n_hermite)
    }
}

/// One oscillator eigenpair: the eigenfunction is the `n`-th Hermite
/// function of the spec's basis (unit coefficient vector).
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub n: usize,
    pub eigenvalue: f64,
    pub coeffs: Vec<f64>,
}

/// Eigenpairs of `L₀(α)` for `n ≤ n_hermite`.
pub fn oscillator_eigens(spec: &OscillatorSpec) -> Vec<Eigenpair> {
    (0..=spec.n_hermite)
        .map(|n| {
            let mut coeffs = vec![0.0; spec.n_hermite + 1];
            coeffs[n] = 1.0;
            Eigenpair {
                n,
                eigenvalue: spec.eigenvalue(n),
                coeffs,
            }
        })
        .collect()
}

/// Rank tag of an orthogonal projection at gauge level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projector {
    /// Off `{φ₀}`.
    P1,
    /// Off `{φ₀, φ₁}`.
    P2,
    /// Off `{φ₀, φ₁, φ₂}`.
    P3,
    /// `P₃` on the θ-independent sector, `P₂` on `k = ±1`, identity above.
    P7,
}

impl Projector {
    pub fn removed_modes(&self) -> usize {
        match self {
            Projector::P1 => 1,
            Projector::P2 => 2,
            Projector::P3 => 3,
            Projector::P7 => 0, // sector-dependent; see GaugeField2D::project
        }
    }

    /// Apply to a 1-D Hermite coefficient series.
    pub fn apply_1d(&self, coeffs: &mut [f64]) {
        let m = match self {
            Projector::P7 => 3,
            other => other.removed_modes(),
        };
        for c in coeffs.iter_mut().take(m) {
            *c = 0.0;
        }
    }
}

/// Result of applying the semigroup with a tail check.
#[derive(Debug, Clone)]
pub struct SemigroupResult {
    pub coeffs: Vec<f64>,
    /// Set when the truncation tail exceeds `1e−10` of the total mass.
    pub truncation_warning: bool,
}

/// `e^{−σ L₀(α)}` by Hermite-coefficient damping: coefficient `n` is scaled
/// by `e^{−σ α (n−1)}`.
pub fn semigroup_apply(spec: &OscillatorSpec, sigma: f64, coeffs: &[f64]) -> SemigroupResult {
    let total: f64 = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    let tail: f64 = coeffs
        .iter()
        .rev()
        .take(4)
        .map(|c| c * c)
        .sum::<f64>()
        .sqrt();
    let mut out = coeffs.to_vec();
    for (n, c) in out.iter_mut().enumerate() {
        *c *= (-sigma * spec.eigenvalue(n)).exp();
    }
    SemigroupResult {
        coeffs: out,
        truncation_warning: total > 0.0 && tail > 1e-10 * total,
    }
}

/// Mehler-kernel route for `e^{−σ L₀(α)}`: on samples `f(z_i)`, computes
/// `e^{ασ} e^{−α z²/4} ∫ K_OU(z, y) e^{α y²/4} f(y) dy` with the
/// Ornstein-Uhlenbeck transition kernel
/// `K_OU(z,y) = sqrt(α / (2π(1−e^{−2ασ}))) exp(−α(y − e^{−ασ} z)² / (2(1−e^{−2ασ})))`,
/// normalized so that eigenfunctions are reproduced exactly.
pub fn mehler_apply(alpha: f64, sigma: f64, z: &[f64], f: &[f64]) -> Vec<f64> {
    let h = z[1] - z[0];
    let decay = (-alpha * sigma).exp();
    let var = (1.0 - decay * decay) / alpha;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
    let boost = (alpha * sigma).exp();
    z.iter()
        .map(|&zi| {
            let mut acc = 0.0;
            for (&yj, &fj) in z.iter().zip(f) {
                let d = yj - decay * zi;
                acc += norm * (-d * d / (2.0 * var)).exp() * (alpha * yj * yj / 4.0).exp() * fj * h;
            }
            boost * (-alpha * zi * zi / 4.0).exp() * acc
        })
        .collect()
}

/// A gauge-level field on the cylinder represented by Hermite coefficients
/// per angular component: `Σ_k [A_k(z) cos kθ + B_k(z) sin kθ]`.
#[derive(Debug, Clone)]
pub struct GaugeField2D {
    pub alpha: f64,
    /// `cos kθ` Hermite coefficients, `k = 0..=k_max`.
    pub a: Vec<Vec<f64>>,
    /// `sin kθ` Hermite coefficients (entry 0 unused).
    pub b: Vec<Vec<f64>>,
}

impl GaugeField2D {
    pub fn k_max(&self) -> usize {
        self.a.len() - 1
    }

    /// Apply `P₇`: project off the 3 lowest Hermite modes in the
    /// θ-independent sector and the 2 lowest in each `k = 1` component.
    pub fn project_p7(&mut self) {
        Projector::P3.apply_1d(&mut self.a[0]);
        if self.a.len() > 1 {
            Projector::P2.apply_1d(&mut self.a[1]);
            Projector::P2.apply_1d(&mut self.b[1]);
        }
    }

    /// Damp by `e^{−σ L(α)}` where the sector operator on angular mode `k`
    /// has eigenvalues `n α − 1 + k²/2`.
    pub fn semigroup(&mut self, sigma: f64) {
        for k in 0..self.a.len() {
            for (n, c) in self.a[k].iter_mut().enumerate() {
                *c *= (-sigma * (n as f64 * self.alpha - 1.0 + (k * k) as f64 / 2.0)).exp();
            }
            for (n, c) in self.b[k].iter_mut().enumerate() {
                *c *= (-sigma * (n as f64 * self.alpha - 1.0 + (k * k) as f64 / 2.0)).exp();
            }
        }
    }

    /// Weighted sup norm `sup_{z,θ} ⟨z⟩^{−ℓ} e^{α z²/4} |field|` over a grid.
    pub fn weighted_sup(&self, basis: &HermiteBasis, ell: f64, z_grid: &[f64], n_theta: usize) -> f64 {
        let mut sup = 0.0f64;
        for &z in z_grid {
            let row = basis.phi_row(z);
            let w = (1.0 + z * z).powf(-ell / 2.0) * (self.alpha * z * z / 4.0).exp();
            // accumulate angular profile values
            let mut comps = Vec::with_capacity(2 * self.a.len());
            for k in 0..self.a.len() {
                let av: f64 = row.iter().zip(&self.a[k]).map(|(p, c)| p * c).sum();
                let bv: f64 = row.iter().zip(&self.b[k]).map(|(p, c)| p * c).sum();
                comps.push((k, av, bv));
            }
            for jt in 0..n_theta {
                let th = std::f64::consts::TAU * jt as f64 / n_theta as f64;
                let mut val = 0.0;
                for &(k, av, bv) in &comps {
                    val += av * (k as f64 * th).cos() + bv * (k as f64 * th).sin();
                }
                sup = sup.max(w * val.abs());
            }
        }
        sup
    }
}

// ---- linearization spectrum ----

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumEntry {
    pub eigenvalue: f64,
    pub j: usize,
    pub k: usize,
    /// Count of `(j, k)` modes sharing this eigenvalue once angular
    /// degeneracy (`k > 0` doubling) is included.
    pub multiplicity: usize,
}

/// Analytic spectrum `{a(j−2) + a k²}` of the linearization `L = H − aΔ`,
/// with multiplicities from the angular doubling.
pub fn spectrum_l(a: f64, j_max: usize, k_max: usize) -> Vec<SpectrumEntry> {
    let mut entries = Vec::new();
    for j in 0..=j_max {
        for k in 0..=k_max {
            entries.push(SpectrumEntry {
                eigenvalue: a * (j as f64 - 2.0) + a * (k * k) as f64,
                j,
                k,
                multiplicity: if k == 0 { 1 } else { 2 },
            });
        }
    }
    entries.sort_by(|x, y| x.eigenvalue.total_cmp(&y.eigenvalue));
    entries
}

/// The lowest eigenvalues repeated by multiplicity, ascending.
pub fn spectrum_l_flat(a: f64, j_max: usize, k_max: usize, count: usize) -> Vec<f64> {
    let mut flat = Vec::new();
    for e in spectrum_l(a, j_max, k_max) {
        for _ in 0..e.multiplicity {
            flat.push(e.eigenvalue);
        }
    }
    flat.truncate(count);
    flat
}

/// Spectrum of the Hermite×Fourier truncation of `L`, by dense eigensolve
/// of the gauge-level matrices `⟨φ_i, L_k φ_j⟩` assembled with
/// Gauss-Hermite quadrature; `k > 0` blocks are counted twice.
pub fn discretized_spectrum(a: f64, n_hermite: usize, k_max: usize) -> Result<Vec<f64>> {
    let basis = HermiteBasis::new(a, n_hermite)?;
    let gh = GaussHermite::new(n_hermite + 12);
    let scale = (2.0 / a).sqrt();
    let n = n_hermite + 1;

    // tabulate φ_n and φ_n'' at the quadrature nodes via the ladder
    // φ'' = α[(√(n(n−1))/4) φ_{n−2} − ((2n+1)/4) φ_n + (√((n+1)(n+2))/4) φ_{n+2}]
    let mut eigs = Vec::new();
    for k in 0..=k_max {
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (&x, &w) in gh.nodes.iter().zip(&gh.weights) {
            let z = scale * x;
            // integrand carries e^{−x²} from the GH weight; φ_i φ_j e^{αz²/2}
            // is a polynomial there: φ_i(z) = poly_i(z) e^{−αz²/4} with
            // αz²/4 = x²/2, so compensate with e^{x²} via w only
            let row = basis.phi_row(z);
            let comp = (x * x).exp();
            let pot = a * a / 4.0 * z * z - 2.5 * a + a * (k * k) as f64;
            for i in 0..n {
                for j in 0..=i {
                    let jj = j as f64;
                    let mut lphi = pot * row[j];
                    // −φ_j''
                    lphi += a * (2.0 * jj + 1.0) / 4.0 * row[j];
                    if j >= 2 {
                        lphi -= a * (jj * (jj - 1.0)).sqrt() / 4.0 * row[j - 2];
                    }
                    if j + 2 < n {
                        lphi -= a * ((jj + 1.0) * (jj + 2.0)).sqrt() / 4.0 * row[j + 2];
                    }
                    m[(i, j)] += w * comp * scale * row[i] * lphi;
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                m[(j, i)] = m[(i, j)];
            }
        }
        let evs = m.symmetric_eigen().eigenvalues;
        for &e in evs.iter() {
            eigs.push(e);
            if k > 0 {
                eigs.push(e);
            }
        }
    }
    eigs.sort_by(|x, y| x.total_cmp(y));
    Ok(eigs)
}

// ---- decay experiments ----

#[derive(Debug, Clone)]
pub struct DecayTrial {
    pub trial: usize,
    pub ell: f64,
    pub alpha: f64,
    pub fitted_rate: f64,
    /// RMS deviation of the log-norm curve from the linear fit.
    pub fit_residual: f64,
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    pub trials: Vec<DecayTrial>,
    pub worst_rate: f64,
}

fn fit_linear(sigmas: &[f64], lognorms: &[f64]) -> (f64, f64) {
    let n = sigmas.len() as f64;
    let sx: f64 = sigmas.iter().sum();
    let sy: f64 = lognorms.iter().sum();
    let sxx: f64 = sigmas.iter().map(|x| x * x).sum();
    let sxy: f64 = sigmas.iter().zip(lognorms).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let rms = (sigmas
        .iter()
        .zip(lognorms)
        .map(|(x, y)| {
            let d = y - (intercept + slope * x);
            d * d
        })
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, rms)
}

/// Measured decay of the propagator on seeded random trials.
///
/// Trials are Gaussian-weighted polynomial envelopes (degree ≤ 5) over the
/// angular modes `k = 0, 1, 2`, projected by `P₇` before propagation. For
/// each trial the weighted sup norm is sampled over `σ ∈ [0.5, 4]`. The
/// weighted norm is not monotone under the semigroup (the decay bound
/// carries a constant), so the asymptotic rate is fitted by least squares
/// on the tail of the window, after the non-normal transient has passed;
/// the report carries the worst case over trials.
pub fn propagator_decay_experiment(
    spec: &OscillatorSpec,
    ell: f64,
    trials: usize,
    seed: u64,
) -> Result<DecayReport> {
    let basis = spec.basis()?;
    let mut rng = SplitMix64::new(seed);
    let z_grid: Vec<f64> = (0..241).map(|i| -12.0 + i as f64 * 0.1).collect();
    let sigmas: Vec<f64> = (0..8).map(|i| 0.5 + 0.5 * i as f64).collect();

    let mut results = Vec::with_capacity(trials);
    let mut worst = f64::INFINITY;
    for trial in 0..trials {
        let mut coeffs_of_poly = |_deg: usize| -> Vec<f64> {
            let mut c = [0.0; 6];
            for ck in c.iter_mut() {
                *ck = rng.symmetric(1.0);
            }
            basis.coeffs_from_envelope(|z| {
                c[0] + z * (c[1] + z * (c[2] + z * (c[3] + z * (c[4] + z * c[5]))))
            })
        };
        let mut field = GaugeField2D {
            alpha: spec.alpha,
            a: vec![coeffs_of_poly(5), coeffs_of_poly(5), coeffs_of_poly(5)],
            b: vec![vec![0.0; spec.n_hermite + 1], coeffs_of_poly(5), coeffs_of_poly(5)],
        };
        field.project_p7();
        let mut lognorms = Vec::with_capacity(sigmas.len());
        for &s in &sigmas {
            let mut damped = field.clone();
            damped.semigroup(s);
            let norm = damped.weighted_sup(&basis, ell, &z_grid, 16);
            lognorms.push(norm.max(1e-300).ln());
        }
        let tail = lognorms.len() - 3;
        let (slope, rms) = fit_linear(&sigmas[tail..], &lognorms[tail..]);
        let rate = -slope;
        worst = worst.min(rate);
        results.push(DecayTrial {
            trial,
            ell,
            alpha: spec.alpha,
            fitted_rate: rate,
            fit_residual: rms,
        });
    }
    Ok(DecayReport {
        trials: results,
        worst_rate: worst,
    })
}

/// The weak-weight variant of the decay experiment: θ-independent trials
/// under the Appendix-C oscillator with `P₂`, measured in the
/// `⟨z⟩^{−11/10}` weighted norm.
pub fn propagator_decay_experiment_weak(
    spec: &OscillatorSpec,
    trials: usize,
    seed: u64,
) -> Result<DecayReport> {
    let basis = spec.basis()?;
    let mut rng = SplitMix64::new(seed);
    let z_grid: Vec<f64> = (0..241).map(|i| -12.0 + i as f64 * 0.1).collect();
    let sigmas: Vec<f64> = (0..8).map(|i| 0.5 + 0.5 * i as f64).collect();
    let ell = 11.0 / 10.0;

    let mut results = Vec::with_capacity(trials);
    let mut worst = f64::INFINITY;
    for trial in 0..trials {
        let mut c = [0.0; 6];
        for ck in c.iter_mut() {
            *ck = rng.symmetric(1.0);
        }
        let mut coeffs = basis.coeffs_from_envelope(|z| {
            c[0] + z * (c[1] + z * (c[2] + z * (c[3] + z * (c[4] + z * c[5]))))
        });
        Projector::P2.apply_1d(&mut coeffs);
        let mut lognorms = Vec::with_capacity(sigmas.len());
        for &s in &sigmas {
            let damped = semigroup_apply(spec, s, &coeffs);
            let mut sup = 0.0f64;
            for &z in &z_grid {
                let v = basis.eval_series(&damped.coeffs, z);
                let w = (1.0 + z * z).powf(-ell / 2.0) * (spec.alpha * z * z / 4.0).exp();
                sup = sup.max(w * v.abs());
            }
            lognorms.push(sup.max(1e-300).ln());
        }
        let tail = lognorms.len() - 3;
        let (slope, rms) = fit_linear(&sigmas[tail..], &lognorms[tail..]);
        let rate = -slope;
        worst = worst.min(rate);
        results.push(DecayTrial {
            trial,
            ell,
            alpha: spec.alpha,
            fitted_rate: rate,
            fit_residual: rms,
        });
    }
    Ok(DecayReport {
        trials: results,
        worst_rate: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_hermite_moments() {
        let gh = GaussHermite::new(24);
        let spi = std::f64::consts::PI.sqrt();
        assert!((gh.integrate(|_| 1.0) - spi).abs() < 1e-13);
        assert!((gh.integrate(|x| x * x) - spi / 2.0).abs() < 1e-13);
        assert!((gh.integrate(|x| x.powi(4)) - 0.75 * spi).abs() < 1e-12);
        assert!(gh.integrate(|x| x.powi(3)).abs() < 1e-13);
    }

    #[test]
    fn hermite_basis_orthonormal() {
        let basis = HermiteBasis::new(0.5, 12).unwrap();
        // trapezoid on a wide grid resolves the Gaussians
        let z: Vec<f64> = (0..1601).map(|i| -16.0 + 0.02 * i as f64).collect();
        for m in 0..6 {
            for n in 0..6 {
                let dot: f64 = z
                    .iter()
                    .map(|&zi| {
                        let row = basis.phi_row(zi);
                        row[m] * row[n] * 0.02
                    })
                    .sum();
                let want = if m == n { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10, "⟨φ{m}, φ{n}⟩ = {dot}");
            }
        }
    }

    #[test]
    fn envelope_coefficients_match_grid_route() {
        let basis = HermiteBasis::new(0.5, 24).unwrap();
        let envelope = |z: f64| 1.0 + 0.5 * z - 0.3 * z * z + 0.1 * z * z * z;
        let c1 = basis.coeffs_from_envelope(envelope);
        let z: Vec<f64> = (0..1601).map(|i| -16.0 + 0.02 * i as f64).collect();
        let f: Vec<f64> = z
            .iter()
            .map(|&zi| envelope(zi) * (-0.5 * zi * zi / 4.0).exp())
            .collect();
        let c2 = basis.coeffs_from_grid(&z, &f);
        for n in 0..10 {
            assert!((c1[n] - c2[n]).abs() < 1e-9, "coeff {n}: {} vs {}", c1[n], c2[n]);
        }
        // degree-3 envelope has no content above n = 3
        for n in 4..=24 {
            assert!(c1[n].abs() < 1e-12);
        }
    }

    #[test]
    fn oscillator_eigenvalues() {
        let spec = OscillatorSpec::new(0.5, 16).unwrap();
        assert!((spec.eigenvalue(0) + 0.5).abs() < 1e-15);
        assert!(spec.eigenvalue(1).abs() < 1e-15);
        assert!((spec.eigenvalue(2) - 0.5).abs() < 1e-15);
        assert!(OscillatorSpec::new(0.2, 8).is_err());
    }

    #[test]
    fn semigroup_on_eigenfunctions() {
        let spec = OscillatorSpec::new(0.5, 16).unwrap();
        let mut ground = vec![0.0; 17];
        ground[0] = 1.0;
        let r = semigroup_apply(&spec, 2.0, &ground);
        assert!((r.coeffs[0] - (0.5f64 * 2.0).exp()).abs() < 1e-12);
        assert!(!r.truncation_warning);
        let mut neutral = vec![0.0; 17];
        neutral[1] = 1.0;
        let r = semigroup_apply(&spec, 3.0, &neutral);
        assert!((r.coeffs[1] - 1.0).abs() < 1e-15);
        // semigroup property
        let mut mixed = vec![0.0; 17];
        mixed[0] = 0.3;
        mixed[2] = 0.7;
        mixed[5] = -0.2;
        let once = semigroup_apply(&spec, 1.7, &mixed).coeffs;
        let twice = semigroup_apply(&spec, 0.9, &semigroup_apply(&spec, 0.8, &mixed).coeffs).coeffs;
        for n in 0..17 {
            assert!((once[n] - twice[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_warning_fires() {
        let spec = OscillatorSpec::new(0.5, 8).unwrap();
        let mut c = vec![0.0; 9];
        c[8] = 1.0;
        assert!(semigroup_apply(&spec, 1.0, &c).truncation_warning);
    }

    #[test]
    fn mehler_kernel_agrees_with_damping() {
        let alpha = 0.5;
        let spec = OscillatorSpec::new(alpha, 32).unwrap();
        let basis = spec.basis().unwrap();
        let z: Vec<f64> = (0..1201).map(|i| -12.0 + 0.02 * i as f64).collect();
        // a smooth Gaussian-dominated test function
        let coeffs = basis.coeffs_from_envelope(|t| 1.0 + t - 0.2 * t * t + 0.05 * t.powi(4));
        let f: Vec<f64> = z.iter().map(|&zi| basis.eval_series(&coeffs, zi)).collect();
        for &sigma in &[0.5, 1.0, 2.0] {
            let damped = semigroup_apply(&spec, sigma, &coeffs).coeffs;
            let via_kernel = mehler_apply(alpha, sigma, &z, &f);
            let mut worst = 0.0f64;
            for (i, &zi) in z.iter().enumerate() {
                if zi.abs() > 8.0 {
                    continue;
                }
                let series = basis.eval_series(&damped, zi);
                worst = worst.max((series - via_kernel[i]).abs());
            }
            assert!(worst < 1e-8, "kernel vs damping at σ={sigma}: {worst}");
        }
    }

    #[test]
    fn mehler_reproduces_eigenfunctions_exactly() {
        let alpha = 0.5;
        let basis = HermiteBasis::new(alpha, 4).unwrap();
        let z: Vec<f64> = (0..1601).map(|i| -16.0 + 0.02 * i as f64).collect();
        // ground mode decays as e^{+ασ} under e^{−σL₀}
        let f: Vec<f64> = z.iter().map(|&zi| basis.phi_row(zi)[0]).collect();
        let out = mehler_apply(alpha, 1.3, &z, &f);
        for (i, &zi) in z.iter().enumerate() {
            if zi.abs() > 6.0 {
                continue;
            }
            assert!(
                (out[i] - (alpha * 1.3f64).exp() * f[i]).abs() < 1e-9,
                "ground mode at z={zi}"
            );
        }
        // neutral mode is invariant
        let f1: Vec<f64> = z.iter().map(|&zi| basis.phi_row(zi)[1]).collect();
        let out = mehler_apply(alpha, 0.9, &z, &f1);
        for (i, &zi) in z.iter().enumerate() {
            if zi.abs() > 6.0 {
                continue;
            }
            assert!((out[i] - f1[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn projector_idempotent_and_symmetric() {
        let basis = HermiteBasis::new(0.5, 20).unwrap();
        let mut rng = SplitMix64::new(99);
        // idempotence on random series
        for _ in 0..10 {
            let mut c: Vec<f64> = (0..21).map(|_| rng.symmetric(1.0)).collect();
            let mut once = c.clone();
            Projector::P3.apply_1d(&mut once);
            let mut twice = once.clone();
            Projector::P3.apply_1d(&mut twice);
            for n in 0..21 {
                assert!((once[n] - twice[n]).abs() < 1e-15);
            }
            Projector::P1.apply_1d(&mut c);
            assert_eq!(c[0], 0.0);
        }
        // self-adjointness in unweighted L²: ⟨Pf, g⟩ = ⟨f, Pg⟩ via quadrature
        let z: Vec<f64> = (0..1201).map(|i| -12.0 + 0.02 * i as f64).collect();
        let cf = basis.coeffs_from_envelope(|t| 0.3 + t * t - 0.1 * t.powi(3));
        let cg = basis.coeffs_from_envelope(|t| 1.0 - 0.5 * t + 0.02 * t.powi(5));
        let mut pf = cf.clone();
        Projector::P2.apply_1d(&mut pf);
        let mut pg = cg.clone();
        Projector::P2.apply_1d(&mut pg);
        let dot = |a: &[f64], b: &[f64]| -> f64 {
            z.iter()
                .map(|&zi| basis.eval_series(a, zi) * basis.eval_series(b, zi) * 0.02)
                .sum()
        };
        assert!((dot(&pf, &cg) - dot(&cf, &pg)).abs() < 1e-10);
    }

    #[test]
    fn p3_annihilates_low_moments() {
        let basis = HermiteBasis::new(0.5, 24).unwrap();
        let mut rng = SplitMix64::new(1234);
        let z: Vec<f64> = (0..1601).map(|i| -16.0 + 0.02 * i as f64).collect();
        for _ in 0..5 {
            let mut c: Vec<f64> = basis.coeffs_from_envelope({
                let coefs: Vec<f64> = (0..6).map(|_| rng.symmetric(1.0)).collect();
                move |t| coefs.iter().rev().fold(0.0, |acc, &ck| acc * t + ck)
            });
            Projector::P3.apply_1d(&mut c);
            // f = e^{−αz²/4}(P₃ g): ∫f = ∫zf = ∫z²f = 0
            for m in 0..3 {
                let moment: f64 = z
                    .iter()
                    .map(|&zi| {
                        zi.powi(m) * (-0.5 * zi * zi / 4.0).exp() * basis.eval_series(&c, zi) * 0.02
                    })
                    .sum();
                assert!(moment.abs() < 1e-10, "moment {m} = {moment}");
            }
        }
    }

    #[test]
    fn p7_sector_rule_matches_componentwise_projections() {
        // applying P₇ equals P₃ on k=0 and P₂ on k=±1, exactly as the
        // sector decomposition displays; verified on random fields
        let mut rng = SplitMix64::new(7);
        let n = 12;
        let coeffs = |rng: &mut SplitMix64| -> Vec<f64> {
            (0..=n).map(|_| rng.symmetric(1.0)).collect()
        };
        let mut f = GaugeField2D {
            alpha: 0.5,
            a: vec![coeffs(&mut rng), coeffs(&mut rng), coeffs(&mut rng)],
            b: vec![vec![0.0; n + 1], coeffs(&mut rng), coeffs(&mut rng)],
        };
        let mut a0 = f.a[0].clone();
        let mut a1 = f.a[1].clone();
        let mut b1 = f.b[1].clone();
        let a2 = f.a[2].clone();
        f.project_p7();
        Projector::P3.apply_1d(&mut a0);
        Projector::P2.apply_1d(&mut a1);
        Projector::P2.apply_1d(&mut b1);
        assert_eq!(f.a[0], a0);
        assert_eq!(f.a[1], a1);
        assert_eq!(f.b[1], b1);
        assert_eq!(f.a[2], a2); // untouched above |k| ≥ 2
    }

    #[test]
    fn spectrum_table_at_half() {
        let flat = spectrum_l_flat(0.5, 6, 3, 7);
        let want = [-1.0, -0.5, -0.5, -0.5, 0.0, 0.0, 0.0];
        for (g, w) in flat.iter().zip(want) {
            assert!((g - w).abs() < 1e-14, "{flat:?}");
        }
        // formula spot check: j=0, k=1 → −1 + 1/2
        let e = spectrum_l(0.5, 2, 2);
        let jk01 = e.iter().find(|s| s.j == 0 && s.k == 1).unwrap();
        assert!((jk01.eigenvalue + 0.5).abs() < 1e-15);
    }

    #[test]
    fn discretized_spectrum_matches_analytic() {
        let eigs = discretized_spectrum(0.5, 24, 2).unwrap();
        let want = spectrum_l_flat(0.5, 30, 2, 7);
        for (g, w) in eigs.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-6, "discrete {eigs:?} vs analytic {want:?}");
        }
    }

    #[test]
    fn eigenfunction_inside_p7_decays_at_alpha() {
        // the n = 2 Appendix-C oscillator mode has eigenvalue exactly +α
        let spec = OscillatorSpec::new(0.5, 16).unwrap();
        let basis = spec.basis().unwrap();
        let mut c = vec![0.0; 17];
        c[2] = 1.0;
        let z_grid: Vec<f64> = (0..161).map(|i| -8.0 + 0.1 * i as f64).collect();
        let norm_at = |sigma: f64| -> f64 {
            let damped = semigroup_apply(&spec, sigma, &c).coeffs;
            z_grid
                .iter()
                .map(|&z| {
                    let w = (1.0 + z * z).powf(-1.0) * (0.5 * z * z / 4.0).exp();
                    (w * basis.eval_series(&damped, z)).abs()
                })
                .fold(0.0, f64::max)
        };
        let rate = -(norm_at(2.0) / norm_at(1.0)).ln();
        assert!((rate - 0.5).abs() < 1e-10, "measured rate {rate}");
    }

    #[test]
    fn decay_experiment_rates() {
        let spec = OscillatorSpec::new(0.5, DEFAULT_N_HERMITE).unwrap();
        let report = propagator_decay_experiment(&spec, 5.0, 8, 42).unwrap();
        assert!(
            report.worst_rate >= 0.9 * 0.5,
            "worst rate {}",
            report.worst_rate
        );
        let weak = propagator_decay_experiment_weak(&spec, 8, 43).unwrap();
        assert!(weak.worst_rate >= 0.9 * 0.05, "weak rate {}", weak.worst_rate);
    }

    #[test]
    fn projected_ground_mode_is_annihilated() {
        let spec = OscillatorSpec::new(0.5, 8).unwrap();
        let mut c = vec![0.0; 9];
        c[0] = 1.0;
        Projector::P2.apply_1d(&mut c);
        assert!(c.iter().all(|&x| x == 0.0));
        let out = semigroup_apply(&spec, 1.0, &c);
        assert!(out.coeffs.iter().all(|&x| x == 0.0));
    }
}
