//! Closed-form neck profiles, coefficient functions, weights and clocks.
//!
//! Everything here is a pure function of its arguments and is shared by the
//! solver, the decomposition and the diagnostics. The formulas are generic
//! over the scalar type; the rest of the crate instantiates them at `f64`.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Formal neck profile `V_{r,s}(y) = sqrt((2 + s y^2) / (2 - 2r))`.
///
/// The first slot is the rescaling-rate parameter (the `a` of the modulation
/// pair), the second the neck-shape parameter (`b`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormalProfile<S = f64> {
    r: S,
    s: S,
}

impl<S: Real> FormalProfile<S> {
    pub fn new(r: S, s: S) -> Result<Self> {
        if !(r >= S::zero() && r < S::one()) || !(s >= S::zero()) {
            return Err(Error::InvalidParameter(format!(
                "formal profile needs 0 <= r < 1 and s >= 0, got r={r:?}, s={s:?}"
            )));
        }
        Ok(Self { r, s })
    }

    pub fn r(&self) -> S {
        self.r
    }

    pub fn s(&self) -> S {
        self.s
    }

    /// Profile value `V_{r,s}(y)`; even in `y`, minimum `sqrt(2/(2-2r))` at `y=0`.
    pub fn value(&self, y: S) -> S {
        let two = S::of(2.0);
        ((two + self.s * y * y) / (two - two * self.r)).sqrt()
    }

    /// `∂_y V_{r,s}`.
    pub fn dy(&self, y: S) -> S {
        let two = S::of(2.0);
        self.s * y / (((two - two * self.r) * (two + self.s * y * y)).sqrt())
    }

    /// `∂_y² V_{r,s}`.
    pub fn dyy(&self, y: S) -> S {
        let two = S::of(2.0);
        let w = two + self.s * y * y;
        two * self.s / ((two - two * self.r).sqrt() * w * w.sqrt())
    }

    /// `∂_r V` (derivative in the first parameter slot).
    pub fn dr(&self, y: S) -> S {
        let two = S::of(2.0);
        let d = two - two * self.r;
        (two + self.s * y * y).sqrt() / (d * d.sqrt())
    }

    /// `∂_s V` (derivative in the second parameter slot).
    pub fn ds(&self, y: S) -> S {
        let two = S::of(2.0);
        y * y / (two * ((two - two * self.r) * (two + self.s * y * y)).sqrt())
    }
}

/// Defect of a profile under the adiabatic equation `½ y ∂_y V − ½ V + V⁻¹`.
///
/// Identically zero when `r = 1/2`; otherwise `(1 − 1/(2−2r)) / V_{r,s}(y)`.
pub fn adiabatic_defect<S: Real>(profile: &FormalProfile<S>, y: S) -> S {
    let half = S::of(0.5);
    let v = profile.value(y);
    half * y * profile.dy(y) - half * v + v.recip()
}

/// Adiabatic residual at the self-similar slot `r = 1/2`: evaluates
/// `½ y ∂_y V − ½ V + V⁻¹` at `V_{1/2,s}`, which vanishes identically.
pub fn adiabatic_residual<S: Real>(s: S, y: S) -> Result<S> {
    let profile = FormalProfile::new(S::of(0.5), s)?;
    Ok(adiabatic_defect(&profile, y))
}

/// Weighted measure `μ(y) = (M + y²)^{-3/5}` with `M ≫ 1`.
#[derive(Debug, Clone, Copy)]
pub struct WeightedMeasure<S = f64> {
    m: S,
}

/// Default measure constant `M`.
pub const DEFAULT_MEASURE_M: f64 = 100.0;

impl<S: Real> WeightedMeasure<S> {
    pub fn new(m: S) -> Result<Self> {
        if m <= S::one() {
            return Err(Error::InvalidParameter(format!(
                "measure constant must exceed 1, got {m:?}"
            )));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> S {
        self.m
    }

    /// `μ(y)`; even, positive, decreasing in `|y|`, bounded by `M^{-3/5}`.
    pub fn weight(&self, y: S) -> S {
        (self.m + y * y).powf(S::of(-0.6))
    }
}

impl Default for WeightedMeasure<f64> {
    fn default() -> Self {
        Self {
            m: DEFAULT_MEASURE_M,
        }
    }
}

/// Inner-region clock `β(τ) = (κ₀ + τ)⁻¹`, with `κ₀ = b₀⁻¹` by convention.
#[derive(Debug, Clone, Copy)]
pub struct BetaClock<S = f64> {
    kappa0: S,
}

impl<S: Real> BetaClock<S> {
    pub fn new(kappa0: S) -> Result<Self> {
        if kappa0 <= S::zero() {
            return Err(Error::InvalidParameter(format!(
                "kappa0 must be positive, got {kappa0:?}"
            )));
        }
        Ok(Self { kappa0 })
    }

    /// Clock seeded from the initial neck parameter: `κ₀ = b₀⁻¹`.
    pub fn from_b0(b0: S) -> Result<Self> {
        Self::new(b0.recip())
    }

    pub fn kappa0(&self) -> S {
        self.kappa0
    }

    pub fn beta(&self, tau: S) -> S {
        (self.kappa0 + tau).recip()
    }
}

/// Step profile `g(y,s)`: `19√2/20` on the inner region `{s y² < 20}`, `4` outside.
#[derive(Debug, Clone, Copy)]
pub struct StepProfile<S = f64> {
    pub threshold: S,
    pub inner_value: S,
    pub outer_value: S,
}

impl<S: Real> Default for StepProfile<S> {
    fn default() -> Self {
        Self {
            threshold: S::of(20.0),
            inner_value: S::of(19.0) * S::SQRT_2() / S::of(20.0),
            outer_value: S::of(4.0),
        }
    }
}

impl<S: Real> StepProfile<S> {
    pub fn value(&self, y: S, s: S) -> S {
        if s * y * y < self.threshold {
            self.inner_value
        } else {
            self.outer_value
        }
    }

    /// Whether `(y, s)` lies in the inner region `{s y² ≤ threshold}`.
    pub fn is_inner(&self, y: S, s: S) -> bool {
        s * y * y <= self.threshold
    }
}

/// `g(y, s)` with the default thresholds.
pub fn g_step<S: Real>(y: S, s: S) -> S {
    StepProfile::default().value(y, s)
}

/// Quasilinear coefficients of the graph flow at slopes `p = ∂_y v`,
/// `q = v⁻¹ ∂_θ v`:
///
/// `F₁ = (1+q²)/D`, `F₂ = (1+p²)/D`, `F₃ = −2pq/D`, `F₄ = q/D`, `D = 1+p²+q²`.
///
/// All four are bounded by 1 in magnitude for all real slopes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowCoefficients<S = f64> {
    pub f1: S,
    pub f2: S,
    pub f3: S,
    pub f4: S,
}

impl<S: Real> FlowCoefficients<S> {
    pub fn at(p: S, q: S) -> Self {
        let d = S::one() + p * p + q * q;
        Self {
            f1: (S::one() + q * q) / d,
            f2: (S::one() + p * p) / d,
            f3: -(S::of(2.0)) * p * q / d,
            f4: q / d,
        }
    }
}

/// Single coefficient `F_index(p, q)` for `index` in `1..=4`.
pub fn coefficient_f<S: Real>(index: usize, p: S, q: S) -> Result<S> {
    let c = FlowCoefficients::at(p, q);
    match index {
        1 => Ok(c.f1),
        2 => Ok(c.f2),
        3 => Ok(c.f3),
        4 => Ok(c.f4),
        _ => Err(Error::InvalidParameter(format!(
            "coefficient index must be 1..=4, got {index}"
        ))),
    }
}
