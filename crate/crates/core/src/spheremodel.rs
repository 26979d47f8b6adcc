//! Discrete cohomogeneity-one model of the round S^4.
//!
//! Rotationally symmetric functions are sampled at polar angles staggered on
//! a uniform grid, theta_j = (j + 1/2) h with h = pi / n_theta, so every node
//! is strictly interior and pole closure is a pure parity reflection: a smooth
//! rotationally symmetric function is even in theta at both poles, so ghost
//! values are mirror copies of interior values. All stencils are 4th-order
//! centered five-point formulas; the volume quadrature
//!
//! ```text
//! int_{S^4} f dV = 2 pi^2 int_0^pi f(theta) sin^3(theta) dtheta
//! ```
//!
//! is the weighted node sum 2 pi^2 h sum_j f_j sin^3(theta_j). Because the
//! integrand's odd-order derivatives vanish at the poles (the sin^3 factor
//! kills them), the Euler-Maclaurin boundary terms of the midpoint sum cancel
//! through third order and the rule is 4th-order accurate on this class; the
//! refinement tests below pin the measured order.

use serde::Serialize;

/// Volume of the unit round S^4.
pub const VOL_S4: f64 = 8.0 * std::f64::consts::PI * std::f64::consts::PI / 3.0;

/// Uniform staggered polar-angle grid on (0, pi) with quadrature data.
#[derive(Clone, Debug)]
pub struct RadialGrid {
    n: usize,
    h: f64,
    theta: Vec<f64>,
    sin_theta: Vec<f64>,
    cos_theta: Vec<f64>,
    cot_theta: Vec<f64>,
    /// Quadrature weight per node: 2 pi^2 h sin^3(theta_j).
    weights: Vec<f64>,
}

impl RadialGrid {
    pub fn new(n_theta: usize) -> Self {
        assert!(n_theta >= 8, "grid needs at least 8 nodes");
        let h = std::f64::consts::PI / n_theta as f64;
        let theta: Vec<f64> = (0..n_theta).map(|j| (j as f64 + 0.5) * h).collect();
        let sin_theta: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
        let cos_theta: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
        let cot_theta: Vec<f64> = theta.iter().map(|t| t.cos() / t.sin()).collect();
        let scale = 2.0 * std::f64::consts::PI * std::f64::consts::PI * h;
        let weights = sin_theta.iter().map(|s| scale * s.powi(3)).collect();
        Self {
            n: n_theta,
            h,
            theta,
            sin_theta,
            cos_theta,
            cot_theta,
            weights,
        }
    }

    pub fn n_theta(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    pub fn sin_theta(&self) -> &[f64] {
        &self.sin_theta
    }

    pub fn cot_theta(&self) -> &[f64] {
        &self.cot_theta
    }

    /// Even reflection of a node index across the poles.
    #[inline]
    pub fn reflect(&self, i: isize) -> usize {
        let n = self.n as isize;
        let r = if i < 0 {
            -1 - i
        } else if i >= n {
            2 * n - 1 - i
        } else {
            i
        };
        debug_assert!((0..n).contains(&r), "stencil reaches past one reflection");
        r as usize
    }

    /// Samples a function of (theta, xi = cos theta) on the grid.
    pub fn field_from_fn(&self, f: impl Fn(f64, f64) -> f64) -> RadialField {
        RadialField {
            values: self
                .theta
                .iter()
                .zip(self.cos_theta.iter())
                .map(|(&t, &x)| f(t, x))
                .collect(),
        }
    }

    pub fn zero_field(&self) -> RadialField {
        RadialField {
            values: vec![0.0; self.n],
        }
    }

    pub fn constant_field(&self, c: f64) -> RadialField {
        RadialField {
            values: vec![c; self.n],
        }
    }

    /// First or second theta-derivative by 4th-order centered differences
    /// with even reflection at the poles.
    pub fn differentiate(&self, f: &RadialField, order: usize) -> RadialField {
        assert!(f.len() == self.n, "field does not match grid");
        match order {
            1 => self.apply_stencil(f, &[1.0, -8.0, 0.0, 8.0, -1.0], 12.0 * self.h),
            2 => self.apply_stencil(
                f,
                &[-1.0, 16.0, -30.0, 16.0, -1.0],
                12.0 * self.h * self.h,
            ),
            _ => panic!("derivative order must be 1 or 2"),
        }
    }

    fn apply_stencil(&self, f: &RadialField, w: &[f64; 5], denom: f64) -> RadialField {
        let n = self.n as isize;
        let mut out = vec![0.0; self.n];
        for j in 0..n {
            let mut s = 0.0;
            for (o, &c) in (-2..=2).zip(w.iter()) {
                if c != 0.0 {
                    s += c * f.values[self.reflect(j + o)];
                }
            }
            out[j as usize] = s / denom;
        }
        RadialField { values: out }
    }

    /// |grad f|^2 = (d_theta f)^2, equal to (1 - xi^2)(d_xi f)^2 in the height
    /// coordinate; the theta form avoids dividing by sin theta at the poles.
    pub fn grad_sq(&self, f: &RadialField) -> RadialField {
        let df = self.differentiate(f, 1);
        RadialField {
            values: df.values.iter().map(|d| d * d).collect(),
        }
    }

    /// Hessian eigenvalues of a radial function: `rad` along grad(xi) and
    /// `tan` on the orthogonal 3-plane. In theta variables rad = f'' and
    /// tan = cot(theta) f'; the parity reflection makes the cot factor
    /// harmless at the poles (f' vanishes linearly there).
    pub fn hessian_eigen(&self, f: &RadialField) -> HessianEigen {
        let d1 = self.differentiate(f, 1);
        let rad = self.differentiate(f, 2);
        let tan = RadialField {
            values: d1
                .values
                .iter()
                .zip(self.cot_theta.iter())
                .map(|(d, c)| c * d)
                .collect(),
        };
        HessianEigen { rad, tan }
    }

    /// Laplace-Beltrami operator on radial functions: f'' + 3 cot(theta) f',
    /// i.e. the trace rad + 3 tan of the Hessian eigenvalues.
    pub fn laplacian(&self, f: &RadialField) -> RadialField {
        let h = self.hessian_eigen(f);
        RadialField {
            values: h
                .rad
                .values
                .iter()
                .zip(h.tan.values.iter())
                .map(|(r, t)| r + 3.0 * t)
                .collect(),
        }
    }

    /// int_{S^4} f dV against the round volume element.
    pub fn integrate_volume(&self, f: &RadialField) -> f64 {
        assert!(f.len() == self.n, "field does not match grid");
        f.values
            .iter()
            .zip(self.weights.iter())
            .map(|(v, w)| v * w)
            .sum()
    }

    /// int f g dV, the weighted pairing used all over the energy formulas.
    pub fn integrate_product(&self, f: &RadialField, g: &RadialField) -> f64 {
        f.values
            .iter()
            .zip(g.values.iter())
            .zip(self.weights.iter())
            .map(|((a, b), w)| a * b * w)
            .sum()
    }
}

/// Node values of a rotationally symmetric scalar on the polar grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialField {
    values: Vec<f64>,
}

impl RadialField {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.len(), other.len());
        Self {
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn shift(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn min_with_index(&self) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (i, &v) in self.values.iter().enumerate() {
            if v < best.0 {
                best = (v, i);
            }
        }
        best
    }

    /// CSV dump with columns `theta,value`.
    pub fn to_csv(&self, grid: &RadialGrid) -> String {
        let mut out = String::from("theta,value\n");
        for (t, v) in grid.theta().iter().zip(self.values.iter()) {
            out.push_str(&format!("{t:.16e},{v:.16e}\n"));
        }
        out
    }

    /// Parses the `to_csv` format.
    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || lineno == 0 && line.starts_with("theta") {
                continue;
            }
            let mut parts = line.split(',');
            let _theta = parts.next().ok_or_else(|| format!("line {lineno}: empty"))?;
            let v = parts
                .next()
                .ok_or_else(|| format!("line {lineno}: missing value column"))?
                .trim()
                .parse::<f64>()
                .map_err(|e| format!("line {lineno}: {e}"))?;
            values.push(v);
        }
        if values.is_empty() {
            return Err("no data rows".into());
        }
        Ok(Self { values })
    }

    pub fn to_json_array(&self) -> String {
        serde_json::to_string(&self.values).expect("vector of floats serializes")
    }
}

impl std::ops::Index<usize> for RadialField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Radial/tangential Hessian eigenvalue pair of a radial function.
#[derive(Clone, Debug)]
pub struct HessianEigen {
    pub rad: RadialField,
    pub tan: RadialField,
}
