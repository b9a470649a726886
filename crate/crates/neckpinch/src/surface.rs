//! Cylindrical coordinate frames, rigid motions between frames, and
//! resampling of a graph into a moved frame.

use crate::error::{Error, Result};
use crate::field::GraphField;

/// Largest admissible Frobenius distance of a motion's rotation from the
/// identity. Frame changes between consecutive optimal coordinate systems
/// are of order `b²`, so this is a generous safety bound.
pub const MAX_ROTATION_DEVIATION: f64 = 0.2;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub fn mat_identity() -> Mat3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    let mut out = [0.0; 3];
    for (r, row) in m.iter().enumerate() {
        out[r] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
    }
    out
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
    }
    out
}

pub fn mat_det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Frobenius distance from the identity.
pub fn rotation_deviation(m: &Mat3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let d = m[i][j] - if i == j { 1.0 } else { 0.0 };
            s += d * d;
        }
    }
    s.sqrt()
}

fn vec_norm(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// A cylindrical coordinate system: origin plus right-handed orthonormal
/// axes, column `0` being the cylinder axis and columns `1`, `2` the
/// transverse directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub origin: Vec3,
    /// `axes[i]` is the direction of the `i`-th coordinate axis.
    pub axes: Mat3,
}

impl Frame {
    pub fn standard() -> Self {
        Self {
            origin: [0.0; 3],
            axes: mat_identity(),
        }
    }

    pub fn new(origin: Vec3, axes: Mat3) -> Result<Self> {
        let axes_t = mat_transpose(&axes);
        // rows of `axes` are the axis vectors, so A·Aᵀ must be the identity
        let gram = mat_mul(&axes, &axes_t);
        if rotation_deviation(&gram) > 1e-12 {
            return Err(Error::InvalidParameter(
                "frame axes are not orthonormal to 1e-12".into(),
            ));
        }
        if (mat_det(&axes) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(
                "frame axes must be right-handed (det +1)".into(),
            ));
        }
        Ok(Self { origin, axes })
    }

    /// World position of local cylindrical coordinates `(x, r, θ)`.
    pub fn embed(&self, x: f64, r: f64, theta: f64) -> Vec3 {
        let local = [x, r * theta.cos(), r * theta.sin()];
        let mut out = self.origin;
        for i in 0..3 {
            for (j, l) in local.iter().enumerate() {
                out[i] += self.axes[j][i] * l;
            }
        }
        out
    }

    /// Frame obtained by applying `motion` (expressed in this frame's
    /// coordinates).
    pub fn moved_by(&self, motion: &RigidMotion) -> Frame {
        let mut origin = self.origin;
        for i in 0..3 {
            for j in 0..3 {
                origin[i] += self.axes[j][i] * motion.translation[j];
            }
        }
        // new axis k in old-frame coordinates is column k of the rotation
        let mut axes = [[0.0; 3]; 3];
        for k in 0..3 {
            let col = [
                motion.rotation[0][k],
                motion.rotation[1][k],
                motion.rotation[2][k],
            ];
            for i in 0..3 {
                axes[k][i] =
                    self.axes[0][i] * col[0] + self.axes[1][i] * col[1] + self.axes[2][i] * col[2];
            }
        }
        Frame {
            origin,
            axes,
        }
    }
}

/// Rigid motion between two cylindrical frames, mapping new-frame
/// coordinates of a point to old-frame coordinates: `x_old = Φ + Ψ x_new`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidMotion {
    pub translation: Vec3,
    pub rotation: Mat3,
}

impl RigidMotion {
    pub fn identity() -> Self {
        Self {
            translation: [0.0; 3],
            rotation: mat_identity(),
        }
    }

    pub fn new(translation: Vec3, rotation: Mat3) -> Result<Self> {
        let gram = mat_mul(&rotation, &mat_transpose(&rotation));
        if rotation_deviation(&gram) > 1e-12 || (mat_det(&rotation) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(
                "motion rotation must be special orthogonal".into(),
            ));
        }
        Ok(Self {
            translation,
            rotation,
        })
    }

    /// Rotation tipping the cylinder axis toward the first transverse
    /// direction by `angle`.
    pub fn tilt_toward_x1(angle: f64) -> Mat3 {
        let (s, c) = angle.sin_cos();
        [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
    }

    /// Rotation tipping the cylinder axis toward the second transverse
    /// direction by `angle`.
    pub fn tilt_toward_x2(angle: f64) -> Mat3 {
        let (s, c) = angle.sin_cos();
        [[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]]
    }

    /// Small motion from shift and tilt parameters: translation
    /// `(axial, t1, t2)` composed with the two tilts.
    pub fn small(axial: f64, t1: f64, t2: f64, tilt1: f64, tilt2: f64) -> Self {
        Self {
            translation: [axial, t1, t2],
            rotation: mat_mul(&Self::tilt_toward_x1(tilt1), &Self::tilt_toward_x2(tilt2)),
        }
    }

    /// Group composition: applying `self` after `other` in the frame chain
    /// `2 → 1 → 0` (with `self: 1 → 0`, `other: 2 → 1`).
    pub fn compose(&self, other: &RigidMotion) -> RigidMotion {
        let rot = mat_mul(&self.rotation, &other.rotation);
        let mut tr = self.translation;
        let rt = mat_vec(&self.rotation, &other.translation);
        for i in 0..3 {
            tr[i] += rt[i];
        }
        RigidMotion {
            translation: tr,
            rotation: rot,
        }
    }

    pub fn inverse(&self) -> RigidMotion {
        let rt = mat_transpose(&self.rotation);
        let t = mat_vec(&rt, &self.translation);
        RigidMotion {
            translation: [-t[0], -t[1], -t[2]],
            rotation: rt,
        }
    }

    /// Old-frame coordinates of a point given in new-frame coordinates.
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        let r = mat_vec(&self.rotation, p);
        [
            r[0] + self.translation[0],
            r[1] + self.translation[1],
            r[2] + self.translation[2],
        ]
    }

    /// `‖Φ‖ + ‖Ψ − I‖_F`, the size used by the small-motion precondition.
    pub fn size(&self) -> f64 {
        vec_norm(&self.translation) + rotation_deviation(&self.rotation)
    }

    pub fn rotation_deviation(&self) -> f64 {
        rotation_deviation(&self.rotation)
    }

    /// Unit quaternion `(w, x, y, z)` of the rotation part.
    pub fn quaternion(&self) -> [f64; 4] {
        let m = &self.rotation;
        let tr = m[0][0] + m[1][1] + m[2][2];
        if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            [
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            ]
        } else if m[0][0] >= m[1][1] && m[0][0] >= m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            [
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            ]
        } else if m[1][1] >= m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            [
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            ]
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            [
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            ]
        }
    }
}

/// Exact graph of a radius-`radius` cylinder whose axis is rotated by `eps`
/// in the `(x₀, x₂)`-plane, evaluated at `(x, θ)`. Serves as the analytic
/// oracle for resampling tests.
pub fn tilted_cylinder_graph(radius: f64, eps: f64, x: f64, theta: f64) -> Result<f64> {
    let (st, _) = theta.sin_cos();
    let (se, ce) = eps.sin_cos();
    let a = 1.0 - st * st * se * se;
    let b = -2.0 * x * st * se * ce;
    let c = x * x * se * se - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(Error::NotAGraph { disc });
    }
    let r = (-b + disc.sqrt()) / (2.0 * a);
    if r <= 0.0 {
        return Err(Error::NotAGraph { disc });
    }
    Ok(r)
}

/// Resample a graph into a moved frame.
///
/// The input surface is `{x = λ_in y_i, r = λ_in v(y_i, θ_j)}` in the current
/// frame; `motion` maps new-frame coordinates to current-frame coordinates.
/// The output samples the same surface as a graph over the new frame's axis
/// on the same `y`-grid scaled by `λ_out`, returning radius values divided by
/// `λ_out`. Each output ray solves the "point lies on the old surface"
/// equation by bracketed, safeguarded Newton iteration.
pub fn resample_graph(
    v: &GraphField,
    lambda_in: f64,
    motion: &RigidMotion,
    lambda_out: f64,
) -> Result<GraphField> {
    if motion.rotation_deviation() > MAX_ROTATION_DEVIATION {
        return Err(Error::GraphConditionViolated(format!(
            "rotation deviates from identity by {:.3}, above bound {MAX_ROTATION_DEVIATION}",
            motion.rotation_deviation()
        )));
    }
    if lambda_in <= 0.0 || lambda_out <= 0.0 {
        return Err(Error::InvalidParameter("scales must be positive".into()));
    }
    let transverse =
        (motion.translation[1] * motion.translation[1] + motion.translation[2] * motion.translation[2]).sqrt();
    if transverse > 0.5 * lambda_in * v.min_value() {
        return Err(Error::GraphConditionViolated(format!(
            "transverse shift {transverse:.3e} exceeds half the minimum radius"
        )));
    }

    let mut out = GraphField::zeros_like(v);
    for i in 0..v.n_y() {
        let xp = lambda_out * v.y(i);
        for j in 0..v.n_theta() {
            let theta = v.theta(j);
            let (sth, cth) = theta.sin_cos();
            // residual along the new-frame ray, as a function of radius
            let eval = |r: f64| -> Result<f64> {
                let zeta = motion.apply(&[xp, r * cth, r * sth]);
                let rho = (zeta[1] * zeta[1] + zeta[2] * zeta[2]).sqrt();
                let phi = zeta[2].atan2(zeta[1]);
                let u = lambda_in * v.interp(zeta[0] / lambda_in, phi)?;
                Ok(rho - u)
            };
            let guess = lambda_in * v.at(i, j);
            let r = solve_ray(&eval, guess).map_err(|e| {
                Error::GraphConditionViolated(format!(
                    "ray (y={:.3}, θ={:.3}): {e}",
                    v.y(i),
                    theta
                ))
            })?;
            *out.at_mut(i, j) = r / lambda_out;
        }
    }
    Ok(out)
}

/// Bracketed safeguarded Newton for the per-ray radius equation.
fn solve_ray(eval: &dyn Fn(f64) -> Result<f64>, guess: f64) -> Result<f64> {
    const MAX_ITERS: usize = 50;
    if guess <= 0.0 {
        return Err(Error::GraphConditionViolated("nonpositive guess".into()));
    }
    let mut lo = guess;
    let mut flo = eval(lo)?;
    let mut hi = guess;
    let mut fhi = flo;
    // expand a bracket around the untilted radius
    let mut grow = 0.02 * guess;
    let mut found = false;
    for _ in 0..40 {
        if flo.signum() != fhi.signum() {
            found = true;
            break;
        }
        if flo > 0.0 {
            // radius too large somewhere: walk lo downward
            lo = (lo - grow).max(1e-12 * guess);
            flo = eval(lo)?;
        } else {
            hi += grow;
            fhi = eval(hi)?;
        }
        grow *= 1.6;
    }
    if !found && flo.signum() == fhi.signum() {
        if flo.abs() < 1e-13 * (1.0 + guess) {
            return Ok(lo);
        }
        return Err(Error::GraphConditionViolated(
            "failed to bracket a positive root".into(),
        ));
    }
    let mut a = lo;
    let mut fa = flo;
    let mut b = hi;
    let mut fb = fhi;
    let mut x = 0.5 * (a + b);
    for _ in 0..MAX_ITERS {
        let fx = eval(x)?;
        if fx.abs() < 1e-13 * (1.0 + guess) {
            return Ok(x);
        }
        if fa.signum() != fx.signum() {
            b = x;
            fb = fx;
        } else {
            a = x;
            fa = fx;
        }
        // secant proposal, bisection fallback
        let denom = fb - fa;
        let mut next = if denom.abs() > 0.0 {
            a - fa * (b - a) / denom
        } else {
            0.5 * (a + b)
        };
        if !(next > a.min(b) && next < a.max(b)) {
            next = 0.5 * (a + b);
        }
        if (b - a).abs() < 1e-14 * (1.0 + guess) {
            return Ok(0.5 * (a + b));
        }
        x = next;
    }
    Err(Error::NoConvergence {
        what: "ray root finding",
        iters: MAX_ITERS,
        residual: (b - a).abs(),
    })
}
