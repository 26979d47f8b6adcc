//! Space-time fields: one radial field per node of a uniform time grid on
//! [0, 1]. Carrier for paths of conformal factors and geodesic solutions.

use crate::spheremodel::{RadialField, RadialGrid};

/// Values indexed by (time node, theta node), row-major in time.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacetimeField {
    n_theta: usize,
    n_time: usize,
    values: Vec<f64>,
}

impl SpacetimeField {
    pub fn zeros(n_theta: usize, n_time: usize) -> Self {
        assert!(n_time >= 3, "need at least 3 time nodes");
        Self {
            n_theta,
            n_time,
            values: vec![0.0; n_theta * n_time],
        }
    }

    /// Samples f(time, theta_index) on the product grid.
    pub fn from_fn(
        grid: &RadialGrid,
        n_time: usize,
        f: impl Fn(f64, usize) -> f64,
    ) -> Self {
        let mut out = Self::zeros(grid.n_theta(), n_time);
        for m in 0..n_time {
            let t = out.time(m);
            for j in 0..grid.n_theta() {
                out.values[m * grid.n_theta() + j] = f(t, j);
            }
        }
        out
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn dt(&self) -> f64 {
        1.0 / (self.n_time as f64 - 1.0)
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt()
    }

    #[inline]
    pub fn get(&self, m: usize, j: usize) -> f64 {
        self.values[m * self.n_theta + j]
    }

    #[inline]
    pub fn set(&mut self, m: usize, j: usize, v: f64) {
        self.values[m * self.n_theta + j] = v;
    }

    pub fn time_slice(&self, m: usize) -> RadialField {
        let start = m * self.n_theta;
        RadialField::from_values(self.values[start..start + self.n_theta].to_vec())
    }

    pub fn set_time_slice(&mut self, m: usize, f: &RadialField) {
        assert_eq!(f.len(), self.n_theta);
        let start = m * self.n_theta;
        self.values[start..start + self.n_theta].copy_from_slice(f.values());
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n_theta, other.n_theta);
        assert_eq!(self.n_time, other.n_time);
        Self {
            n_theta: self.n_theta,
            n_time: self.n_time,
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Time derivative: 2nd-order centered at interior nodes, 2nd-order
    /// one-sided at the endpoints.
    pub fn d_dt(&self) -> Self {
        let dt = self.dt();
        let mut out = Self::zeros(self.n_theta, self.n_time);
        let last = self.n_time - 1;
        for j in 0..self.n_theta {
            out.set(
                0,
                j,
                (-3.0 * self.get(0, j) + 4.0 * self.get(1, j) - self.get(2, j)) / (2.0 * dt),
            );
            out.set(
                last,
                j,
                (3.0 * self.get(last, j) - 4.0 * self.get(last - 1, j) + self.get(last - 2, j))
                    / (2.0 * dt),
            );
            for m in 1..last {
                out.set(m, j, (self.get(m + 1, j) - self.get(m - 1, j)) / (2.0 * dt));
            }
        }
        out
    }

    /// Second time derivative, centered at interior nodes and one-sided
    /// (2nd-order, for monitoring only) at the endpoints.
    pub fn d2_dt2(&self) -> Self {
        let dt2 = self.dt() * self.dt();
        let mut out = Self::zeros(self.n_theta, self.n_time);
        let last = self.n_time - 1;
        for j in 0..self.n_theta {
            for m in 1..last {
                out.set(
                    m,
                    j,
                    (self.get(m + 1, j) - 2.0 * self.get(m, j) + self.get(m - 1, j)) / dt2,
                );
            }
            out.set(
                0,
                j,
                (2.0 * self.get(0, j) - 5.0 * self.get(1, j) + 4.0 * self.get(2, j)
                    - self.get(3, j))
                    / dt2,
            );
            out.set(
                last,
                j,
                (2.0 * self.get(last, j) - 5.0 * self.get(last - 1, j)
                    + 4.0 * self.get(last - 2, j)
                    - self.get(last - 3, j))
                    / dt2,
            );
        }
        out
    }

    /// CSV dump with columns `theta,t,u`.
    pub fn to_csv(&self, grid: &RadialGrid) -> String {
        let mut out = String::from("theta,t,u\n");
        for m in 0..self.n_time {
            let t = self.time(m);
            for j in 0..self.n_theta {
                out.push_str(&format!(
                    "{:.16e},{t:.16e},{:.16e}\n",
                    grid.theta()[j],
                    self.get(m, j)
                ));
            }
        }
        out
    }
}
