//! The geodesic equation of the sigma_2-metric and its elliptic
//! regularization.
//!
//! A path u(theta, t) of conformal factors is a geodesic when
//!
//! ```text
//! u_tt - sigma_2(A_u)^{-1} <T_1(A_u), grad u_t (x) grad u_t> = 0.
//! ```
//!
//! The regularized problem perturbs the time coefficient and carries a
//! positive source:
//!
//! ```text
//! Phi_eps(u) = (1 + eps) u_tt sigma_2(A_u) - <T_1(A_u), grad u_t (x) grad u_t>,
//! Phi_eps(u) = s f,
//! ```
//!
//! with Dirichlet data at t = 0, 1. In the radial model the pairing collapses
//! to 3 lam_tan (d_theta u_t)^2. The same problem rewrites through the
//! space-time tensor E = (1+eps) u_tt A_u - grad u_t (x) grad u_t as
//! [(1+eps) u_tt]^{-1} sigma_2(E) = s f, which is the form whose linearization
//! is elliptic for admissible iterates (E in Gamma_2+, u_tt > 0).

mod solve;

pub use solve::{
    solve, solve_fixed_source, ContinuationRecord, ContinuationSchedule, GeodesicMonitors,
    GeodesicSolution,
};

use serde::Serialize;
use thiserror::Error;

use crate::band::BandError;
use crate::conformal::{self, ConformalError, ConformalState};
use crate::spacetime::SpacetimeField;
use crate::spheremodel::{RadialField, RadialGrid};

#[derive(Debug, Error)]
pub enum GeodesicError {
    #[error(transparent)]
    Conformal(#[from] ConformalError),
    #[error("path is not admissible: {detail}")]
    NotAdmissible { detail: String },
    #[error("u_tt = {value:.3e} <= 0 at time index {time_index}, node {node}")]
    UttNotPositive {
        time_index: usize,
        node: usize,
        value: f64,
    },
    #[error("no convexification constant in [0.5, {lambda_max}] makes the initial path admissible")]
    LambdaScanFailed { lambda_max: f64 },
    #[error(
        "Newton did not converge at s = {s:.3e} after {iterations} iterations \
         (residual history: {residual_history:?})"
    )]
    NewtonDiverged {
        s: f64,
        iterations: usize,
        residual_history: Vec<f64>,
    },
    #[error("continuation stalled: smallest converged s = {s_reached:.3e}, failed at s = {failed_s:.3e}: {source}")]
    ContinuationStalled {
        s_reached: f64,
        failed_s: f64,
        #[source]
        source: Box<GeodesicError>,
    },
    #[error("space-time field shapes differ: {expected:?} vs {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error(transparent)]
    Linear(#[from] BandError),
}

/// Boundary-value problem data for one epsilon-geodesic solve.
#[derive(Clone, Debug)]
pub struct GeodesicProblem {
    pub u0: RadialField,
    pub u1: RadialField,
    pub epsilon: f64,
    pub n_time: usize,
    /// Newton residual tolerance in sup norm.
    pub solver_tol: f64,
    /// Upper end of the half-integer scan for the convexification constant.
    pub lambda_max: f64,
}

impl GeodesicProblem {
    pub fn new(u0: RadialField, u1: RadialField, epsilon: f64, n_time: usize) -> Self {
        Self {
            u0,
            u1,
            epsilon,
            n_time,
            solver_tol: 1e-9,
            lambda_max: 64.0,
        }
    }
}

/// Slice-wise geometry of a path: Schouten data per time node plus the time
/// derivatives entering the geodesic operator. Time stencils are 2nd-order
/// centered at interior nodes; the one-sided boundary values only feed
/// monitors, never the equation.
pub struct PathGeometry {
    pub states: Vec<ConformalState>,
    pub u_t: SpacetimeField,
    pub u_tt: SpacetimeField,
    /// d_theta of the u_t slice, i.e. the radial component of grad u_t.
    pub w: SpacetimeField,
}

pub fn path_geometry(grid: &RadialGrid, u: &SpacetimeField) -> PathGeometry {
    assert_eq!(grid.n_theta(), u.n_theta());
    let u_t = u.d_dt();
    let u_tt = u.d2_dt2();
    let mut w = SpacetimeField::zeros(u.n_theta(), u.n_time());
    let mut states = Vec::with_capacity(u.n_time());
    for m in 0..u.n_time() {
        states.push(conformal::schouten(grid, &u.time_slice(m)));
        let dw = grid.differentiate(&u_t.time_slice(m), 1);
        w.set_time_slice(m, &dw);
    }
    PathGeometry {
        states,
        u_t,
        u_tt,
        w,
    }
}

/// Radial eigenvalues of E = (1+eps) u_tt A_u - grad u_t (x) grad u_t.
#[derive(Clone, Debug)]
pub struct ETensorEigen {
    pub e_rad: SpacetimeField,
    pub e_tan: SpacetimeField,
}

impl ETensorEigen {
    pub fn sigma1(&self, m: usize, j: usize) -> f64 {
        self.e_rad.get(m, j) + 3.0 * self.e_tan.get(m, j)
    }

    pub fn sigma2(&self, m: usize, j: usize) -> f64 {
        let et = self.e_tan.get(m, j);
        3.0 * et * (self.e_rad.get(m, j) + et)
    }
}

pub fn e_tensor(geom: &PathGeometry, epsilon: f64) -> ETensorEigen {
    let n_theta = geom.u_t.n_theta();
    let n_time = geom.u_t.n_time();
    let mut e_rad = SpacetimeField::zeros(n_theta, n_time);
    let mut e_tan = SpacetimeField::zeros(n_theta, n_time);
    for m in 0..n_time {
        let st = &geom.states[m];
        for j in 0..n_theta {
            let utt = geom.u_tt.get(m, j);
            let w = geom.w.get(m, j);
            e_rad.set(m, j, (1.0 + epsilon) * utt * st.lam_rad[j] - w * w);
            e_tan.set(m, j, (1.0 + epsilon) * utt * st.lam_tan[j]);
        }
    }
    ETensorEigen { e_rad, e_tan }
}

/// Admissibility of a candidate path at every interior space-time node:
/// E in Gamma_2+ and u_tt > 0.
pub fn path_admissible(geom: &PathGeometry, epsilon: f64) -> bool {
    let e = e_tensor(geom, epsilon);
    let last = geom.u_t.n_time() - 1;
    for m in 1..last {
        for j in 0..geom.u_t.n_theta() {
            if geom.u_tt.get(m, j) <= 0.0 || e.sigma1(m, j) <= 0.0 || e.sigma2(m, j) <= 0.0 {
                return false;
            }
        }
    }
    true
}

/// Phi_eps(u) at one node given its slice geometry.
#[inline]
fn phi_node(state: &ConformalState, utt: f64, w: f64, epsilon: f64, j: usize) -> f64 {
    (1.0 + epsilon) * utt * state.sigma2[j] - 3.0 * state.lam_tan[j] * w * w
}

/// Geodesic residual Phi_eps(u) - s f on interior time slices; boundary
/// slices are Dirichlet data and carry zero residual.
pub fn residual(
    grid: &RadialGrid,
    u: &SpacetimeField,
    epsilon: f64,
    f: Option<&SpacetimeField>,
    s: f64,
) -> SpacetimeField {
    let geom = path_geometry(grid, u);
    residual_from_geometry(&geom, u, epsilon, f, s)
}

pub(crate) fn residual_from_geometry(
    geom: &PathGeometry,
    u: &SpacetimeField,
    epsilon: f64,
    f: Option<&SpacetimeField>,
    s: f64,
) -> SpacetimeField {
    let mut out = SpacetimeField::zeros(u.n_theta(), u.n_time());
    let last = u.n_time() - 1;
    for m in 1..last {
        let st = &geom.states[m];
        for j in 0..u.n_theta() {
            let phi = phi_node(st, geom.u_tt.get(m, j), geom.w.get(m, j), epsilon, j);
            let source = s * f.map_or(0.0, |f| f.get(m, j));
            out.set(m, j, phi - source);
        }
    }
    out
}

/// Exact geodesic of the sigma_2-metric: the Mobius path sampled on the
/// space-time grid.
pub fn exact_sphere_path(grid: &RadialGrid, n_time: usize, lambda: f64) -> SpacetimeField {
    let mut out = SpacetimeField::zeros(grid.n_theta(), n_time);
    for m in 0..n_time {
        let t = out.time(m);
        out.set_time_slice(m, &conformal::mobius_factor(grid, lambda, t));
    }
    out
}

/// Residual of the Mobius path evaluated with exact (closed-form) time
/// derivatives, isolating the spatial discretization error. Used by the
/// refinement oracle; the all-numerical residual converges at the time-stencil
/// order instead.
pub fn exact_path_spatial_residual(grid: &RadialGrid, n_time: usize, lambda: f64) -> f64 {
    let mut sup = 0.0f64;
    for m in 1..(n_time - 1) {
        let t = m as f64 / (n_time as f64 - 1.0);
        let alpha = (lambda * t).exp();
        let u = conformal::mobius_factor(grid, lambda, t);
        let state = conformal::schouten(grid, &u);
        // u_t = -lambda + 2 lambda p, u_tt = 4 lambda^2 p (1 - p) with
        // p = alpha^2 (1 - xi) / [(1 + xi) + alpha^2 (1 - xi)].
        let u_t = grid.field_from_fn(|_, xi| {
            let p = alpha * alpha * (1.0 - xi) / ((1.0 + xi) + alpha * alpha * (1.0 - xi));
            lambda * (2.0 * p - 1.0)
        });
        let w = grid.differentiate(&u_t, 1);
        for j in 0..grid.n_theta() {
            let xi = grid.cos_theta()[j];
            let p = alpha * alpha * (1.0 - xi) / ((1.0 + xi) + alpha * alpha * (1.0 - xi));
            let utt = 4.0 * lambda * lambda * p * (1.0 - p);
            let phi = phi_node(&state, utt, w[j], 0.0, j);
            sup = sup.max(phi.abs());
        }
    }
    sup
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaFormReport {
    pub sup_abs: f64,
    pub mean_abs: f64,
    /// Sup of the defect divided by max(1, 1/u_tt); nodes with tiny u_tt
    /// inflate the raw defect through the reformulation's division.
    pub sup_scaled: f64,
}

/// Agreement of the direct form Phi_eps(u) with the reformulated
/// [(1+eps) u_tt]^{-1} sigma_2(E). The two are algebraically identical; the
/// report measures rounding noise only. Requires u_tt > 0 on interior nodes.
pub fn sigma_form_check(
    grid: &RadialGrid,
    u: &SpacetimeField,
    epsilon: f64,
) -> Result<SigmaFormReport, GeodesicError> {
    let geom = path_geometry(grid, u);
    let e = e_tensor(&geom, epsilon);
    let last = u.n_time() - 1;
    let mut sup_abs = 0.0f64;
    let mut sup_scaled = 0.0f64;
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for m in 1..last {
        let st = &geom.states[m];
        for j in 0..u.n_theta() {
            let utt = geom.u_tt.get(m, j);
            if utt <= 0.0 {
                return Err(GeodesicError::UttNotPositive {
                    time_index: m,
                    node: j,
                    value: utt,
                });
            }
            let direct = phi_node(st, utt, geom.w.get(m, j), epsilon, j);
            let reform = e.sigma2(m, j) / ((1.0 + epsilon) * utt);
            let diff = (reform - direct).abs();
            sup_abs = sup_abs.max(diff);
            sup_scaled = sup_scaled.max(diff / (1.0f64).max(1.0 / utt));
            sum += diff;
            count += 1;
        }
    }
    Ok(SigmaFormReport {
        sup_abs,
        mean_abs: sum / count as f64,
        sup_scaled,
    })
}

/// The linearized operator at u applied to v, in the form arising from the
/// sigma_2(E) reformulation:
///
/// ```text
/// L v = (1+eps) u_tt^{-1} Phi_eps(u) v_tt
///     + u_tt^{-1} < T_1(E), (1+eps) u_tt dA(v)
///                   - grad v_t (x) grad u_t - grad u_t (x) grad v_t
///                   + u_tt^{-1} v_tt grad u_t (x) grad u_t >,
/// ```
///
/// with dA(v) the Schouten variation grad^2 v + grad v (x) grad u +
/// grad u (x) grad v - <grad v, grad u> g. Equal to (1+eps) times the
/// Frechet derivative of Phi_eps at every u with u_tt > 0, not only at
/// solutions.
pub fn linearize_apply(
    grid: &RadialGrid,
    u: &SpacetimeField,
    v: &SpacetimeField,
    epsilon: f64,
) -> Result<SpacetimeField, GeodesicError> {
    let geom = path_geometry(grid, u);
    if !path_admissible(&geom, epsilon) {
        return Err(GeodesicError::NotAdmissible {
            detail: "linearization point must have E in Gamma_2+ and u_tt > 0".into(),
        });
    }
    let e = e_tensor(&geom, epsilon);
    let v_t = v.d_dt();
    let v_tt = v.d2_dt2();
    let last = u.n_time() - 1;
    let mut out = SpacetimeField::zeros(u.n_theta(), u.n_time());
    for m in 1..last {
        let st = &geom.states[m];
        let v_slice = v.time_slice(m);
        let dv = grid.differentiate(&v_slice, 1);
        let hess_v = grid.hessian_eigen(&v_slice);
        let dvt = grid.differentiate(&v_t.time_slice(m), 1);
        for j in 0..u.n_theta() {
            let utt = geom.u_tt.get(m, j);
            let w = geom.w.get(m, j);
            let phi = phi_node(st, utt, w, epsilon, j);
            let er = e.e_rad.get(m, j);
            let et = e.e_tan.get(m, j);
            // dA(v) eigenvalues.
            let da_rad = hess_v.rad[j] + st.u_theta[j] * dv[j];
            let da_tan = hess_v.tan[j] - st.u_theta[j] * dv[j];
            // <T_1(E), M> = 3 e_tan m_rad + 3 (e_rad + 2 e_tan) m_tan.
            let pair_da = 3.0 * et * da_rad + 3.0 * (er + 2.0 * et) * da_tan;
            let pair_vt = 3.0 * et * 2.0 * w * dvt[j];
            let pair_p = 3.0 * et * w * w;
            let value = (1.0 + epsilon) * phi / utt * v_tt.get(m, j)
                + ((1.0 + epsilon) * utt * pair_da - pair_vt
                    + v_tt.get(m, j) / utt * pair_p)
                    / utt;
            out.set(m, j, value);
        }
    }
    Ok(out)
}

/// Normalized path length int_0^1 <u_t, u_t>_u^{1/2} dt with the 1/sigma
/// inner product; trapezoid rule in t matching the time-stencil order.
pub fn length(grid: &RadialGrid, u: &SpacetimeField) -> Result<f64, GeodesicError> {
    let speeds = speed_profile(grid, u)?;
    let dt = u.dt();
    let mut total = 0.0;
    for m in 0..speeds.len() - 1 {
        total += 0.5 * (speeds[m] + speeds[m + 1]) * dt;
    }
    Ok(total)
}

/// Speed <u_t, u_t>_u^{1/2} at every time node.
pub fn speed_profile(grid: &RadialGrid, u: &SpacetimeField) -> Result<Vec<f64>, GeodesicError> {
    let u_t = u.d_dt();
    let mut speeds = Vec::with_capacity(u.n_time());
    for m in 0..u.n_time() {
        let state = conformal::schouten(grid, &u.time_slice(m));
        let ut = u_t.time_slice(m);
        let sq = conformal::inner_product(grid, &state, &ut, &ut)?;
        speeds.push(sq.max(0.0).sqrt());
    }
    Ok(speeds)
}

/// Lower bound for the length of any path joining u0 and u1, from the
/// endpoint sigma_2 masses of the over/undershoot regions. Stated with the
/// same 1/sigma normalization as `length`, hence divided by sigma.
pub fn length_lower_bound(grid: &RadialGrid, u0: &RadialField, u1: &RadialField) -> f64 {
    let s0 = conformal::schouten(grid, u0);
    let s1 = conformal::schouten(grid, u1);
    let sigma = conformal::total_sigma(grid, &s1);
    let mut up = 0.0;
    let mut down = 0.0;
    let n = grid.n_theta();
    let mut up_field = Vec::with_capacity(n);
    let mut down_field = Vec::with_capacity(n);
    for j in 0..n {
        let d = u1[j] - u0[j];
        // sigma_2(g_u^-1 A_u) dV_u = sigma_2(A_u) dV0 nodewise.
        up_field.push(if d > 0.0 { d * s1.sigma2[j] } else { 0.0 });
        down_field.push(if d < 0.0 { -d * s0.sigma2[j] } else { 0.0 });
    }
    up += grid.integrate_volume(&RadialField::from_values(up_field));
    down += grid.integrate_volume(&RadialField::from_values(down_field));
    up.max(down) / sigma
}

/// The two conserved pairings of the geodesic flow, in the normalized
/// convention:
///
/// ```text
/// I1(t) = (1/sigma) int u_t sigma_2(g_u^{-1} A_u) dV_u,
/// I2(t) = (1/sigma) int u_t^2 sigma_2(g_u^{-1} A_u) dV_u,
/// ```
///
/// evaluated at interior time nodes. Constant along exact geodesics; along
/// regularized solutions they drift at O(eps + s + h^2).
pub fn conserved_integrals(grid: &RadialGrid, u: &SpacetimeField) -> (Vec<f64>, Vec<f64>) {
    let u_t = u.d_dt();
    let last = u.n_time() - 1;
    let mut linear = Vec::with_capacity(last - 1);
    let mut quadratic = Vec::with_capacity(last - 1);
    for m in 1..last {
        let state = conformal::schouten(grid, &u.time_slice(m));
        let sigma = conformal::total_sigma(grid, &state);
        let ut = u_t.time_slice(m);
        let ut2 = ut.zip_with(&ut, |a, b| a * b);
        linear.push(grid.integrate_product(&ut, &state.sigma2) / sigma);
        quadratic.push(grid.integrate_product(&ut2, &state.sigma2) / sigma);
    }
    (linear, quadratic)
}

/// Energy samples F(u(t)) along the path and the discrete second difference
/// d2F/dt2 at interior nodes.
pub fn energy_along_path(grid: &RadialGrid, u: &SpacetimeField) -> (Vec<f64>, Vec<f64>) {
    let n_time = u.n_time();
    let dt = u.dt();
    let f: Vec<f64> = (0..n_time)
        .map(|m| conformal::f_energy(grid, &u.time_slice(m)))
        .collect();
    let mut d2 = Vec::with_capacity(n_time - 2);
    for m in 1..n_time - 1 {
        d2.push((f[m + 1] - 2.0 * f[m] + f[m - 1]) / (dt * dt));
    }
    (f, d2)
}

/// Pointwise comparison of two solutions with ordered sources f1 <= f2:
/// returns min over nodes of (u - u_tilde), expected nonnegative up to
/// solver tolerance.
pub fn compare_check(u: &SpacetimeField, u_tilde: &SpacetimeField) -> Result<f64, GeodesicError> {
    if u.n_theta() != u_tilde.n_theta() || u.n_time() != u_tilde.n_time() {
        return Err(GeodesicError::ShapeMismatch {
            expected: (u.n_theta(), u.n_time()),
            got: (u_tilde.n_theta(), u_tilde.n_time()),
        });
    }
    Ok(u.sub(u_tilde)
        .values()
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v)))
}

/// Sup-norm distance between two paths on the same grid.
pub fn c0_distance(a: &SpacetimeField, b: &SpacetimeField) -> f64 {
    a.sub(b).max_abs()
}
