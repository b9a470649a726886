//! Sampled graph fields on the cylinder and their derivative machinery.
//!
//! A [`GraphField`] holds radius samples on a uniform `y × θ` grid:
//! `y` on `[-y_max, y_max]` with `n_y` nodes, `θ` on `[0, 2π)` with `n_theta`
//! nodes, values row-major with `y` as the slow index. The same container is
//! used for the physical radius `u` (with an external scale) and the rescaled
//! radius `v`.

use crate::error::{Error, Result};

/// Magic bytes of the binary snapshot format.
pub const FIELD_MAGIC: [u8; 4] = *b"NKPF";
/// Version of the binary snapshot format.
pub const FIELD_VERSION: u32 = 1;

/// How many cells beyond the axial grid the interpolant may extrapolate.
const EXTRAP_CELLS: f64 = 4.0;

/// Rows per side excluded from diagnostic norms and quadratures: the
/// far-field closure leaves a thin numerical boundary layer that one-sided
/// high-order stencils would otherwise amplify.
pub const BOUNDARY_TRIM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphField {
    y_max: f64,
    n_y: usize,
    n_theta: usize,
    values: Vec<f64>,
}

impl GraphField {
    pub fn new(y_max: f64, n_y: usize, n_theta: usize, values: Vec<f64>) -> Result<Self> {
        if y_max <= 0.0 || n_y < 5 || n_theta < 4 || n_theta % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "bad grid: y_max={y_max}, n_y={n_y}, n_theta={n_theta} (n_theta must be even)"
            )));
        }
        if values.len() != n_y * n_theta {
            return Err(Error::InvalidParameter(format!(
                "value buffer has {} entries, grid wants {}",
                values.len(),
                n_y * n_theta
            )));
        }
        Ok(Self {
            y_max,
            n_y,
            n_theta,
            values,
        })
    }

    pub fn from_fn(y_max: f64, n_y: usize, n_theta: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(n_y * n_theta);
        let dy = 2.0 * y_max / (n_y - 1) as f64;
        let dth = std::f64::consts::TAU / n_theta as f64;
        for i in 0..n_y {
            let y = -y_max + i as f64 * dy;
            for j in 0..n_theta {
                values.push(f(y, j as f64 * dth));
            }
        }
        Self {
            y_max,
            n_y,
            n_theta,
            values,
        }
    }

    pub fn constant(y_max: f64, n_y: usize, n_theta: usize, c: f64) -> Self {
        Self {
            y_max,
            n_y,
            n_theta,
            values: vec![c; n_y * n_theta],
        }
    }

    pub fn zeros_like(other: &GraphField) -> Self {
        Self::constant(other.y_max, other.n_y, other.n_theta, 0.0)
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn dy_step(&self) -> f64 {
        2.0 * self.y_max / (self.n_y - 1) as f64
    }

    pub fn dtheta_step(&self) -> f64 {
        std::f64::consts::TAU / self.n_theta as f64
    }

    pub fn y(&self, i: usize) -> f64 {
        -self.y_max + i as f64 * self.dy_step()
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta_step()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_theta + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.values[i * self.n_theta + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_theta..(i + 1) * self.n_theta]
    }

    pub fn same_grid(&self, other: &GraphField) -> bool {
        self.n_y == other.n_y && self.n_theta == other.n_theta && self.y_max == other.y_max
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64, f64, f64) -> f64) -> GraphField {
        let mut out = self.clone();
        for i in 0..self.n_y {
            let y = self.y(i);
            for j in 0..self.n_theta {
                let th = self.theta(j);
                *out.at_mut(i, j) = f(y, th, self.at(i, j));
            }
        }
        out
    }

    pub fn zip(&self, other: &GraphField, f: impl Fn(f64, f64) -> f64) -> GraphField {
        debug_assert!(self.same_grid(other));
        let mut out = self.clone();
        for (o, (&a, &b)) in out
            .values
            .iter_mut()
            .zip(self.values.iter().zip(other.values.iter()))
        {
            *o = f(a, b);
        }
        out
    }

    /// `k`-th angular Fourier coefficient per `y`-row:
    /// `(1/2π)⟨f, e^{-ikθ}⟩ = (1/N) Σ_j f_j e^{-ikθ_j}`, returned as (re, im).
    pub fn fourier_mode(&self, k: i64) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_theta as f64;
        let mut re = Vec::with_capacity(self.n_y);
        let mut im = Vec::with_capacity(self.n_y);
        for i in 0..self.n_y {
            let mut cr = 0.0;
            let mut ci = 0.0;
            for j in 0..self.n_theta {
                let ang = -(k as f64) * self.theta(j);
                let f = self.at(i, j);
                cr += f * ang.cos();
                ci += f * ang.sin();
            }
            re.push(cr / n);
            im.push(ci / n);
        }
        (re, im)
    }

    /// Sup norm `‖(1+y²)^{-m/2} ∂_y^n f‖_∞` over the grid.
    pub fn weighted_sup_norm(&self, m: f64, n: usize) -> Result<f64> {
        let dn = if n == 0 {
            self.clone()
        } else {
            deriv_y(self, n)?
        };
        let mut sup: f64 = 0.0;
        for i in 0..self.n_y {
            let w = (1.0 + self.y(i) * self.y(i)).powf(-m / 2.0);
            for j in 0..self.n_theta {
                sup = sup.max(w * dn.at(i, j).abs());
            }
        }
        Ok(sup)
    }

    /// One pass of a `[1,2,1]/4` binomial smoother in `y` (endpoints copied).
    pub fn smoothed_y(&self) -> GraphField {
        let mut out = self.clone();
        for i in 1..self.n_y - 1 {
            for j in 0..self.n_theta {
                *out.at_mut(i, j) =
                    0.25 * self.at(i - 1, j) + 0.5 * self.at(i, j) + 0.25 * self.at(i + 1, j);
            }
        }
        out
    }

    /// Bicubic interpolation (4-point Lagrange per direction), periodic in
    /// `θ`; the axial coordinate may extrapolate a few cells past the grid
    /// using the edge patch, beyond which the graph condition is reported
    /// violated. Exact at grid nodes.
    pub fn interp(&self, y: f64, theta: f64) -> Result<f64> {
        let dy = self.dy_step();
        let ty = (y + self.y_max) / dy;
        if !((-EXTRAP_CELLS..=(self.n_y - 1) as f64 + EXTRAP_CELLS).contains(&ty)) {
            return Err(Error::GraphConditionViolated(format!(
                "axial coordinate {y:.4} outside interpolation domain (y_max {})",
                self.y_max
            )));
        }
        // clamp the patch so extrapolation reuses the boundary cubic
        let iy = (ty.floor() as i64).clamp(1, self.n_y as i64 - 3) as usize;
        let sy = ty - iy as f64;

        let dth = self.dtheta_step();
        let tt = (theta / dth).rem_euclid(self.n_theta as f64);
        let jt = tt.floor() as usize % self.n_theta;
        let st = tt - tt.floor();

        let jm = |off: i64| -> usize {
            ((jt as i64 + off).rem_euclid(self.n_theta as i64)) as usize
        };
        let mut col = [0.0; 4];
        for (c, oy) in col.iter_mut().zip([-1i64, 0, 1, 2]) {
            let i = (iy as i64 + oy) as usize;
            let p = [
                self.at(i, jm(-1)),
                self.at(i, jm(0)),
                self.at(i, jm(1)),
                self.at(i, jm(2)),
            ];
            *c = lagrange4(&p, st);
        }
        Ok(lagrange4(&col, sy))
    }

    // ---- serialization ----

    pub fn write_binary<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&FIELD_MAGIC)?;
        w.write_all(&FIELD_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_y as u32).to_le_bytes())?;
        w.write_all(&(self.n_theta as u32).to_le_bytes())?;
        w.write_all(&self.y_max.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: std::io::Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != FIELD_MAGIC {
            return Err(Error::Format {
                what: "graph field",
                detail: format!("bad magic {magic:?}"),
            });
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FIELD_VERSION {
            return Err(Error::Format {
                what: "graph field",
                detail: format!("unsupported version {version}"),
            });
        }
        r.read_exact(&mut b4)?;
        let n_y = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let n_theta = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let y_max = f64::from_le_bytes(b8);
        let mut values = Vec::with_capacity(n_y * n_theta);
        for _ in 0..n_y * n_theta {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        GraphField::new(y_max, n_y, n_theta, values)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(&mut f)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_binary(&mut f)
    }

    /// CSV export: one row per `y` node, one column per `θ` node.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str("y");
        for j in 0..self.n_theta {
            s.push_str(&format!(",theta_{}", j));
        }
        s.push('\n');
        for i in 0..self.n_y {
            s.push_str(&format!("{}", self.y(i)));
            for j in 0..self.n_theta {
                s.push_str(&format!(",{}", self.at(i, j)));
            }
            s.push('\n');
        }
        s
    }
}

/// Cubic Lagrange through nodes at `t ∈ {−1, 0, 1, 2}`.
fn lagrange4(p: &[f64; 4], t: f64) -> f64 {
    let l0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let l1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let l2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let l3 = (t + 1.0) * t * (t - 1.0) / 6.0;
    p[0] * l0 + p[1] * l1 + p[2] * l2 + p[3] * l3
}

/// Fornberg finite-difference weights for the `m`-th derivative at `z`
/// given nodes `x` (B. Fornberg, Math. Comp. 51 (1988)).
pub fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<f64> {
    let n = x.len();
    assert!(m < n, "need more nodes than derivative order");
    let mut c = vec![0.0; n * (m + 1)];
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[idx(0, 0)] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[idx(i, k)] = c1 * (k as f64 * c[idx(i - 1, k - 1)] - c5 * c[idx(i - 1, k)]) / c2;
                }
                c[idx(i, 0)] = -c1 * c5 * c[idx(i - 1, 0)] / c2;
            }
            for k in (1..=mn).rev() {
                c[idx(j, k)] = (c4 * c[idx(j, k)] - k as f64 * c[idx(j, k - 1)]) / c3;
            }
            c[idx(j, 0)] = c4 * c[idx(j, 0)] / c3;
        }
        c1 = c2;
    }
    (0..n).map(|i| c[idx(i, m)]).collect()
}

/// Stencil widths used for the `n`-th axial derivative:
/// `(interior centered width, boundary one-sided width)`.
///
/// Interior stencils of width 5 are 4th-order for first and second
/// derivatives; the short boundary closures are 2nd-order, which sets the
/// solver's global convergence order. Diagnostics orders 3..=5 use dedicated
/// 7-point stencils, order 6 uses 9 points.
fn y_stencil_widths(order: usize) -> Result<(usize, usize)> {
    match order {
        1 => Ok((5, 3)),
        2 => Ok((5, 4)),
        3 | 4 | 5 => Ok((7, 7)),
        6 => Ok((9, 9)),
        _ => Err(Error::StencilOrder { order, max: 6 }),
    }
}

/// `n`-th axial derivative of a field (centered interior stencils, one-sided
/// at the boundary).
pub fn deriv_y(f: &GraphField, order: usize) -> Result<GraphField> {
    let (wi, wb) = y_stencil_widths(order)?;
    if f.n_y() < wi.max(wb) {
        return Err(Error::InvalidParameter(format!(
            "grid with {} axial nodes too small for order-{order} stencil",
            f.n_y()
        )));
    }
    let n_y = f.n_y();
    let n_theta = f.n_theta();
    let h = f.dy_step();
    let half = wi / 2;

    // precompute per-row stencils: boundary rows get shifted one-sided nodes
    let offsets_for = |i: usize| -> (usize, usize) {
        // returns (first node, width)
        if i < half {
            (0, wb)
        } else if i + half >= n_y {
            (n_y - wb, wb)
        } else {
            (i - half, wi)
        }
    };

    let mut out = GraphField::zeros_like(f);
    let mut cache: std::collections::HashMap<(usize, usize), Vec<f64>> =
        std::collections::HashMap::new();
    for i in 0..n_y {
        let (start, width) = offsets_for(i);
        let key = (i - start, width);
        let w = cache.entry(key).or_insert_with(|| {
            let nodes: Vec<f64> = (0..width).map(|k| (k as f64) * h).collect();
            let mut w = fornberg_weights((i - start) as f64 * h, &nodes, order);
            // derivative stencils annihilate constants; pin the weight at
            // the evaluation node so that holds exactly in floating point
            let eval = i - start;
            w[eval] = 0.0;
            w[eval] = -w.iter().sum::<f64>();
            w
        });
        for j in 0..n_theta {
            // accumulate on differences from the center value so constants
            // map to exactly zero
            let center = f.at(i, j);
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                acc += wk * (f.at(start + k, j) - center);
            }
            *out.at_mut(i, j) = acc;
        }
    }
    Ok(out)
}

/// Spectral differentiation matrices in `θ` for a fixed even grid size.
///
/// Matrix entries come from the discrete Fourier interpolant; odd-order
/// Nyquist contributions are dropped as usual.
#[derive(Debug, Clone)]
pub struct ThetaDiff {
    n: usize,
    mats: Vec<Vec<f64>>, // orders 1..=MAX_THETA_ORDER, each n×n row-major
}

const MAX_THETA_ORDER: usize = 5;

impl ThetaDiff {
    pub fn new(n_theta: usize) -> Self {
        let n = n_theta;
        let half = n / 2;
        let dth = std::f64::consts::TAU / n as f64;
        let mut mats = Vec::with_capacity(MAX_THETA_ORDER);
        for m in 1..=MAX_THETA_ORDER {
            let mut mat = vec![0.0; n * n];
            for j in 0..n {
                for l in 0..n {
                    let phi = (j as f64 - l as f64) * dth;
                    let mut acc = 0.0;
                    for k in 1..half {
                        let kf = k as f64;
                        let km = kf.powi(m as i32);
                        acc += 2.0
                            * match m % 4 {
                                0 => km * (kf * phi).cos(),
                                1 => -km * (kf * phi).sin(),
                                2 => -km * (kf * phi).cos(),
                                _ => km * (kf * phi).sin(),
                            };
                    }
                    if m % 2 == 0 {
                        let kf = half as f64;
                        let sign = if m % 4 == 0 { 1.0 } else { -1.0 };
                        acc += sign * kf.powi(m as i32) * (kf * phi).cos();
                    }
                    mat[j * n + l] = acc / n as f64;
                }
            }
            // pin the diagonal so constants differentiate to exactly zero
            for j in 0..n {
                mat[j * n + j] = 0.0;
                let row_sum: f64 = mat[j * n..(j + 1) * n].iter().sum();
                mat[j * n + j] = -row_sum;
            }
            mats.push(mat);
        }
        Self { n, mats }
    }

    pub fn n_theta(&self) -> usize {
        self.n
    }

    pub fn apply(&self, f: &GraphField, order: usize) -> Result<GraphField> {
        if order == 0 {
            return Ok(f.clone());
        }
        if order > MAX_THETA_ORDER {
            return Err(Error::StencilOrder {
                order,
                max: MAX_THETA_ORDER,
            });
        }
        debug_assert_eq!(f.n_theta(), self.n);
        let mat = &self.mats[order - 1];
        let n = self.n;
        let mut out = GraphField::zeros_like(f);
        for i in 0..f.n_y() {
            let row = f.row(i);
            for j in 0..n {
                // rows sum to zero; differencing against the diagonal value
                // sends constants to exactly zero
                let center = row[j];
                let mut acc = 0.0;
                let mrow = &mat[j * n..(j + 1) * n];
                for (l, &v) in row.iter().enumerate() {
                    acc += mrow[l] * (v - center);
                }
                *out.at_mut(i, j) = acc;
            }
        }
        Ok(out)
    }
}

/// `n`-th angular derivative with a freshly built spectral matrix
/// (convenience for tests and diagnostics; the solver caches a [`ThetaDiff`]).
pub fn deriv_theta(f: &GraphField, order: usize) -> Result<GraphField> {
    ThetaDiff::new(f.n_theta()).apply(f, order)
}

/// Composite Simpson weights on `n` uniformly spaced nodes (`n` odd).
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 3 && n % 2 == 1, "Simpson needs an odd node count");
    let mut w = vec![0.0; n];
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        } * h
            / 3.0;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_classic_stencils() {
        // centered 3-pt second derivative on unit spacing: [1, -2, 1]
        let w = fornberg_weights(1.0, &[0.0, 1.0, 2.0], 2);
        for (a, b) in w.iter().zip([1.0, -2.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        // centered 5-pt first derivative: [1/12, -2/3, 0, 2/3, -1/12]
        let w = fornberg_weights(2.0, &[0.0, 1.0, 2.0, 3.0, 4.0], 1);
        for (a, b) in w.iter().zip([1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn y_derivatives_exact_on_polynomials() {
        let f = GraphField::from_fn(4.0, 41, 8, |y, _| 1.0 + y + 0.5 * y * y + 0.25 * y * y * y);
        let d1 = deriv_y(&f, 1).unwrap();
        let d2 = deriv_y(&f, 2).unwrap();
        let d3 = deriv_y(&f, 3).unwrap();
        let h = f.dy_step();
        for i in 0..41 {
            let y = f.y(i);
            // short one-sided closures are 2nd order: exact only inside
            if (2..39).contains(&i) {
                assert!((d1.at(i, 0) - (1.0 + y + 0.75 * y * y)).abs() < 1e-9, "d1 row {i}");
            } else {
                // 3-pt closure error on a cubic is h²·y'''/3 = h²/2
                assert!(
                    (d1.at(i, 0) - (1.0 + y + 0.75 * y * y)).abs() < h * h,
                    "d1 boundary row {i}"
                );
            }
            assert!((d2.at(i, 0) - (1.0 + 1.5 * y)).abs() < 1e-8, "d2 row {i}");
            assert!((d3.at(i, 0) - 1.5).abs() < 1e-7, "d3 row {i}");
        }
        // constants have exactly vanishing derivatives up to roundoff
        let c = GraphField::constant(4.0, 41, 8, 7.25);
        for order in 1..=6 {
            assert_eq!(deriv_y(&c, order).unwrap().max_abs(), 0.0, "order {order}");
        }
        assert!(deriv_y(&c, 7).is_err());
    }

    #[test]
    fn theta_derivatives_spectral_exact_on_trig() {
        let f = GraphField::from_fn(1.0, 5, 16, |_, t| {
            1.0 + (3.0 * t).cos() + 0.5 * (5.0 * t).sin()
        });
        let td = ThetaDiff::new(16);
        let d1 = td.apply(&f, 1).unwrap();
        let d2 = td.apply(&f, 2).unwrap();
        let d3 = td.apply(&f, 3).unwrap();
        for j in 0..16 {
            let t = f.theta(j);
            assert!(
                (d1.at(2, j) - (-3.0 * (3.0 * t).sin() + 2.5 * (5.0 * t).cos())).abs() < 1e-10
            );
            assert!(
                (d2.at(2, j) - (-9.0 * (3.0 * t).cos() - 12.5 * (5.0 * t).sin())).abs() < 1e-9
            );
            assert!(
                (d3.at(2, j) - (27.0 * (3.0 * t).sin() - 62.5 * (5.0 * t).cos())).abs() < 1e-8
            );
        }
    }

    #[test]
    fn weighted_norm_examples() {
        let zero = GraphField::constant(3.0, 21, 8, 0.0);
        assert_eq!(zero.weighted_sup_norm(1.5, 0).unwrap(), 0.0);
        assert_eq!(zero.weighted_sup_norm(3.0, 2).unwrap(), 0.0);
        let f = GraphField::from_fn(3.0, 61, 8, |y, _| y * y);
        // sup (1+y^2)^{-1} y^2 -> attained at the edge
        let norm = f.weighted_sup_norm(2.0, 0).unwrap();
        assert!((norm - 9.0 / 10.0).abs() < 1e-12);
        assert!(f.weighted_sup_norm(0.0, 7).is_err());
    }

    #[test]
    fn interp_reproduces_smooth_fields() {
        let f = GraphField::from_fn(5.0, 101, 32, |y, t| (0.3 * y).sin() + 0.2 * (2.0 * t).cos());
        let exact = |y: f64, t: f64| (0.3 * y).sin() + 0.2 * (2.0 * t).cos();
        for &(y, t) in &[(0.13, 0.7), (-3.77, 5.9), (4.9, 0.05), (2.501, 3.1)] {
            let e = (f.interp(y, t).unwrap() - exact(y, t)).abs();
            assert!(e < 5e-4, "interp error {e} at ({y},{t})");
        }
        // interpolation is exact at nodes
        assert!((f.interp(f.y(17), f.theta(5)).unwrap() - f.at(17, 5)).abs() < 1e-13);
        // periodic wrap
        assert!(
            (f.interp(1.0, std::f64::consts::TAU + 0.3).unwrap() - f.interp(1.0, 0.3).unwrap())
                .abs()
                < 1e-12
        );
        // out of domain errors
        assert!(f.interp(9.0, 0.0).is_err());
    }

    #[test]
    fn interp_converges_cubically() {
        let exact = |y: f64, t: f64| (0.9 * y).cos() * (1.0 + 0.3 * (t).sin());
        let mut errs = Vec::new();
        for &(n, nth) in &[(41usize, 16usize), (81, 32), (161, 64)] {
            let f = GraphField::from_fn(4.0, n, nth, exact);
            let mut e = 0.0f64;
            for k in 0..200 {
                let y = -3.5 + 7.0 * (k as f64 / 199.0) + 0.001;
                let t = 0.1 + 0.029 * k as f64;
                e = e.max((f.interp(y, t).unwrap() - exact(y, t)).abs());
            }
            errs.push(e);
        }
        let slope1 = (errs[0] / errs[1]).log2();
        let slope2 = (errs[1] / errs[2]).log2();
        assert!(slope1 > 2.5 && slope2 > 2.5, "errs {errs:?}");
    }

    #[test]
    fn binary_roundtrip_and_bad_magic() {
        let f = GraphField::from_fn(2.5, 11, 8, |y, t| 1.0 + 0.1 * y + 0.01 * t);
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        let g = GraphField::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(f, g);
        buf[0] = b'X';
        assert!(GraphField::read_binary(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let n = 21;
        let h = 0.1;
        let w = simpson_weights(n, h);
        let integral: f64 = (0..n)
            .map(|i| {
                let x = i as f64 * h;
                w[i] * (x * x * x - 2.0 * x + 1.0)
            })
            .sum();
        let a = 2.0f64;
        let exact = a * a * a * a / 4.0 - a * a + a;
        assert!((integral - exact).abs() < 1e-12);
    }

    #[test]
    fn fourier_mode_extraction() {
        let f = GraphField::from_fn(1.0, 7, 16, |_, t| 2.0 + 3.0 * t.cos() + 0.5 * (2.0 * t).sin());
        let (re0, im0) = f.fourier_mode(0);
        assert!((re0[3] - 2.0).abs() < 1e-12 && im0[3].abs() < 1e-12);
        let (re1, im1) = f.fourier_mode(1);
        assert!((re1[3] - 1.5).abs() < 1e-12 && im1[3].abs() < 1e-12);
        let (re2, im2) = f.fourier_mode(2);
        assert!(re2[3].abs() < 1e-12 && (im2[3] + 0.25).abs() < 1e-12);
    }
}
