//! Damped-Newton continuation for the regularized geodesic boundary-value
//! problem.
//!
//! The initial guess is the convexified segment w = t u1 + (1-t) u0
//! + Lambda t (t-1) with Lambda the smallest half-integer making w strictly
//! admissible; the source is frozen as f = Phi_eps(w), so w solves the s = 1
//! problem exactly. The continuation then walks s down a fixed schedule with
//! warm starts. Each Newton step factors the banded Jacobian (time tridiagonal
//! coupling, five-point spatial stencils) with partial pivoting; the line
//! search rejects any iterate whose E-tensor leaves Gamma_2+ or whose u_tt
//! loses positivity, which is what globalizes the method.

use serde::Serialize;

use super::{
    path_admissible, path_geometry, residual_from_geometry, GeodesicError, GeodesicProblem,
    PathGeometry,
};
use crate::band::BandMatrix;
use crate::conformal;
use crate::spacetime::SpacetimeField;
use crate::spheremodel::RadialGrid;

/// Decreasing source weights; the first entry must be 1 so the warm start is
/// an exact solution.
#[derive(Clone, Debug)]
pub struct ContinuationSchedule(Vec<f64>);

impl Default for ContinuationSchedule {
    fn default() -> Self {
        Self(vec![
            1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 5e-3, 2e-3, 1e-3,
        ])
    }
}

impl ContinuationSchedule {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(!values.is_empty() && values[0] == 1.0, "schedule starts at 1");
        Self(values)
    }

    /// Default schedule truncated (and extended if necessary) to end at s_min.
    pub fn to_s_min(s_min: f64) -> Self {
        assert!(s_min > 0.0 && s_min <= 1.0);
        let mut values: Vec<f64> = Self::default()
            .0
            .into_iter()
            .filter(|&s| s > s_min * (1.0 + 1e-12))
            .collect();
        while *values.last().expect("schedule nonempty") > 2.5 * s_min {
            values.push(values.last().unwrap() * 0.5);
        }
        values.push(s_min);
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuationRecord {
    pub s: f64,
    pub newton_iterations: usize,
    pub residual_norm: f64,
    /// Smallest pivot magnitude over the factored Jacobians at this stage;
    /// positive on admissible iterates (ellipticity indicator). None when the
    /// warm start already met the tolerance and nothing was factored.
    pub min_pivot: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeodesicMonitors {
    pub sup_u: f64,
    pub sup_grad_u: f64,
    pub sup_u_t: f64,
    pub eps_sup_u_tt: f64,
    pub eps_sup_lap_u: f64,
    pub conserved_linear: Vec<f64>,
    pub conserved_quadratic: Vec<f64>,
    pub conserved_linear_drift: f64,
    pub conserved_quadratic_drift: f64,
    pub d2f_dt2_min: f64,
    pub length: f64,
}

#[derive(Debug)]
pub struct GeodesicSolution {
    pub u: SpacetimeField,
    pub f: SpacetimeField,
    pub lambda: f64,
    pub epsilon: f64,
    pub s: f64,
    pub residual_norm: f64,
    pub admissible: bool,
    pub monitors: GeodesicMonitors,
    pub trace: Vec<ContinuationRecord>,
    /// Converged path at each continuation stage, for monotonicity studies.
    pub stage_paths: Vec<(f64, SpacetimeField)>,
}

/// Builds the convexified initial path and scans for the smallest admissible
/// half-integer Lambda.
fn convexified_start(
    grid: &RadialGrid,
    problem: &GeodesicProblem,
) -> Result<(SpacetimeField, f64), GeodesicError> {
    let n_theta = grid.n_theta();
    let n_time = problem.n_time;
    let mut lambda = 0.5;
    while lambda <= problem.lambda_max {
        let mut w = SpacetimeField::zeros(n_theta, n_time);
        for m in 0..n_time {
            let t = w.time(m);
            for j in 0..n_theta {
                let seg = (1.0 - t) * problem.u0[j] + t * problem.u1[j];
                w.set(m, j, seg + lambda * t * (t - 1.0));
            }
        }
        let geom = path_geometry(grid, &w);
        if path_admissible(&geom, problem.epsilon) {
            return Ok((w, lambda));
        }
        lambda += 0.5;
    }
    Err(GeodesicError::LambdaScanFailed {
        lambda_max: problem.lambda_max,
    })
}

/// Assembles the Jacobian of the interior residual map in band storage.
/// Unknowns are the interior time slices, row-major: idx = (m-1) n_theta + j.
fn assemble_jacobian(
    grid: &RadialGrid,
    geom: &PathGeometry,
    epsilon: f64,
    n_time: usize,
) -> BandMatrix {
    let n_theta = grid.n_theta();
    let n = (n_time - 2) * n_theta;
    let band = n_theta + 2;
    let mut jac = BandMatrix::zeros(n, band, band);
    let dt = 1.0 / (n_time as f64 - 1.0);
    let dt2 = dt * dt;
    let h = grid.spacing();
    // 4th-order stencil weights for d_theta and d_theta^2.
    const W1: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
    const W2: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
    let idx = |m: usize, j: usize| (m - 1) * n_theta + j;
    for m in 1..n_time - 1 {
        let st = &geom.states[m];
        for j in 0..n_theta {
            let row = idx(m, j);
            let utt = geom.u_tt.get(m, j);
            let w = geom.w.get(m, j);
            let lr = st.lam_rad[j];
            let lt = st.lam_tan[j];
            let ut_coeff = st.u_theta[j];
            // d Phi / d v_tt.
            let a_tt = (1.0 + epsilon) * st.sigma2[j];
            jac.add(row, idx(m, j), -2.0 * a_tt / dt2);
            if m > 1 {
                jac.add(row, idx(m - 1, j), a_tt / dt2);
            }
            if m < n_time - 2 {
                jac.add(row, idx(m + 1, j), a_tt / dt2);
            }
            // Spatial couplings within slice m, through
            //   d lam_rad(v) = rad(v) + u_theta v_theta,
            //   d lam_tan(v) = tan(v) - u_theta v_theta,
            //   d sigma_2 = 3 lt d lam_rad + 3 (lr + 2 lt) d lam_tan,
            // plus the -3 lam_tan w^2 term's lam_tan dependence.
            let c_rad = (1.0 + epsilon) * utt * 3.0 * lt;
            let c_tan = (1.0 + epsilon) * utt * 3.0 * (lr + 2.0 * lt) - 3.0 * w * w;
            let c_grad =
                ((1.0 + epsilon) * utt * (3.0 * lt - 3.0 * (lr + 2.0 * lt)) + 3.0 * w * w)
                    * ut_coeff;
            let cot = grid.cot_theta()[j];
            for (o, (w1, w2)) in (-2i64..=2).zip(W1.iter().zip(W2.iter())) {
                let col_j = grid.reflect(j as isize + o as isize);
                let coeff = c_rad * w2 / (12.0 * h * h)
                    + (c_tan * cot + c_grad) * w1 / (12.0 * h);
                if coeff != 0.0 {
                    jac.add(row, idx(m, col_j), coeff);
                }
            }
            // Mixed theta-time coupling from -6 lam_tan w d_theta v_t.
            let c_wt = -6.0 * lt * w / (2.0 * dt);
            if c_wt != 0.0 {
                for (o, w1) in (-2i64..=2).zip(W1.iter()) {
                    if *w1 == 0.0 {
                        continue;
                    }
                    let col_j = grid.reflect(j as isize + o as isize);
                    let coeff = c_wt * w1 / (12.0 * h);
                    if m < n_time - 2 {
                        jac.add(row, idx(m + 1, col_j), coeff);
                    }
                    if m > 1 {
                        jac.add(row, idx(m - 1, col_j), -coeff);
                    }
                }
            }
        }
    }
    jac
}

struct NewtonOutcome {
    iterations: usize,
    residual_norm: f64,
    min_pivot: Option<f64>,
}

fn newton_solve(
    grid: &RadialGrid,
    u: &mut SpacetimeField,
    epsilon: f64,
    f: &SpacetimeField,
    s: f64,
    tol: f64,
) -> Result<NewtonOutcome, GeodesicError> {
    const MAX_ITER: usize = 40;
    const MAX_BACKTRACK: usize = 30;
    let n_theta = u.n_theta();
    let n_time = u.n_time();
    let mut geom = path_geometry(grid, u);
    let mut res = residual_from_geometry(&geom, u, epsilon, Some(f), s);
    let mut res_norm = res.max_abs();
    let mut history = vec![res_norm];
    let mut min_pivot: Option<f64> = None;
    for iter in 0..MAX_ITER {
        if res_norm < tol {
            return Ok(NewtonOutcome {
                iterations: iter,
                residual_norm: res_norm,
                min_pivot,
            });
        }
        let jac = assemble_jacobian(grid, &geom, epsilon, n_time);
        let lu = jac.factor()?;
        min_pivot = Some(min_pivot.map_or(lu.min_pivot(), |p: f64| p.min(lu.min_pivot())));
        let mut rhs = vec![0.0; (n_time - 2) * n_theta];
        for m in 1..n_time - 1 {
            for j in 0..n_theta {
                rhs[(m - 1) * n_theta + j] = -res.get(m, j);
            }
        }
        let delta = lu.solve(&rhs)?;
        // Armijo backtracking with an admissibility gate.
        let mut tau = 1.0f64;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACK {
            let mut trial = u.clone();
            for m in 1..n_time - 1 {
                for j in 0..n_theta {
                    trial.set(m, j, u.get(m, j) + tau * delta[(m - 1) * n_theta + j]);
                }
            }
            let trial_geom = path_geometry(grid, &trial);
            if path_admissible(&trial_geom, epsilon) {
                let trial_res = residual_from_geometry(&trial_geom, &trial, epsilon, Some(f), s);
                let trial_norm = trial_res.max_abs();
                if trial_norm <= (1.0 - 1e-4 * tau) * res_norm {
                    *u = trial;
                    geom = trial_geom;
                    res = trial_res;
                    res_norm = trial_norm;
                    history.push(res_norm);
                    accepted = true;
                    break;
                }
            }
            tau *= 0.5;
        }
        if !accepted {
            return Err(GeodesicError::NewtonDiverged {
                s,
                iterations: iter,
                residual_history: history,
            });
        }
    }
    if res_norm < tol {
        Ok(NewtonOutcome {
            iterations: MAX_ITER,
            residual_norm: res_norm,
            min_pivot,
        })
    } else {
        Err(GeodesicError::NewtonDiverged {
            s,
            iterations: MAX_ITER,
            residual_history: history,
        })
    }
}

fn compute_monitors(grid: &RadialGrid, u: &SpacetimeField, epsilon: f64) -> GeodesicMonitors {
    let u_t = u.d_dt();
    let u_tt = u.d2_dt2();
    let mut sup_grad = 0.0f64;
    let mut sup_lap = 0.0f64;
    for m in 0..u.n_time() {
        let slice = u.time_slice(m);
        sup_grad = sup_grad.max(grid.differentiate(&slice, 1).max_abs());
        sup_lap = sup_lap.max(grid.laplacian(&slice).max_abs());
    }
    let (lin, quad) = super::conserved_integrals(grid, u);
    let spread = |v: &[f64]| -> f64 {
        if v.is_empty() {
            return 0.0;
        }
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let (_, d2f) = super::energy_along_path(grid, u);
    let d2f_min = d2f.iter().cloned().fold(f64::INFINITY, f64::min);
    let length = super::length(grid, u).unwrap_or(f64::NAN);
    GeodesicMonitors {
        sup_u: u.max_abs(),
        sup_grad_u: sup_grad,
        sup_u_t: u_t.max_abs(),
        eps_sup_u_tt: epsilon * u_tt.max_abs(),
        eps_sup_lap_u: epsilon * sup_lap,
        conserved_linear_drift: spread(&lin),
        conserved_quadratic_drift: spread(&quad),
        conserved_linear: lin,
        conserved_quadratic: quad,
        d2f_dt2_min: d2f_min,
        length,
    }
}

/// Runs the full continuation for one geodesic problem.
pub fn solve(
    grid: &RadialGrid,
    problem: &GeodesicProblem,
    schedule: &ContinuationSchedule,
) -> Result<GeodesicSolution, GeodesicError> {
    conformal::schouten(grid, &problem.u0).require_admissible()?;
    conformal::schouten(grid, &problem.u1).require_admissible()?;
    let (w, lambda) = convexified_start(grid, problem)?;
    // Freeze the source from the convexified path; boundary rows replicate
    // the nearest interior slice and never enter the equation.
    let geom_w = path_geometry(grid, &w);
    let phi_w = residual_from_geometry(&geom_w, &w, problem.epsilon, None, 0.0);
    let mut f = phi_w.clone();
    let last = w.n_time() - 1;
    for j in 0..w.n_theta() {
        f.set(0, j, phi_w.get(1, j));
        f.set(last, j, phi_w.get(last - 1, j));
    }
    let mut u = w;
    let mut trace = Vec::with_capacity(schedule.values().len());
    let mut stage_paths = Vec::with_capacity(schedule.values().len());
    let mut s_reached = f64::NAN;
    for &s in schedule.values() {
        match newton_solve(grid, &mut u, problem.epsilon, &f, s, problem.solver_tol) {
            Ok(outcome) => {
                trace.push(ContinuationRecord {
                    s,
                    newton_iterations: outcome.iterations,
                    residual_norm: outcome.residual_norm,
                    min_pivot: outcome.min_pivot,
                });
                stage_paths.push((s, u.clone()));
                s_reached = s;
            }
            Err(err) => {
                return Err(GeodesicError::ContinuationStalled {
                    s_reached,
                    failed_s: s,
                    source: Box::new(err),
                });
            }
        }
    }
    let geom = path_geometry(grid, &u);
    let admissible = path_admissible(&geom, problem.epsilon);
    let residual_norm =
        residual_from_geometry(&geom, &u, problem.epsilon, Some(&f), s_reached).max_abs();
    let monitors = compute_monitors(grid, &u, problem.epsilon);
    Ok(GeodesicSolution {
        u,
        f,
        lambda,
        epsilon: problem.epsilon,
        s: s_reached,
        residual_norm,
        admissible,
        monitors,
        trace,
        stage_paths,
    })
}

/// Solves the fixed-source problem Phi_eps(u) = f directly (no continuation),
/// warm-started from `start`. Used by the comparison-principle checks where
/// two ordered sources share endpoints.
pub fn solve_fixed_source(
    grid: &RadialGrid,
    start: &SpacetimeField,
    epsilon: f64,
    f: &SpacetimeField,
    tol: f64,
) -> Result<(SpacetimeField, f64), GeodesicError> {
    let mut u = start.clone();
    let outcome = newton_solve(grid, &mut u, epsilon, f, 1.0, tol)?;
    Ok((u, outcome.residual_norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{c0_distance, exact_sphere_path};

    #[test]
    fn schedule_truncation() {
        let s = ContinuationSchedule::to_s_min(1e-3);
        assert_eq!(s.values()[0], 1.0);
        assert_eq!(*s.values().last().unwrap(), 1e-3);
        let s = ContinuationSchedule::to_s_min(0.07);
        assert!(s.values().windows(2).all(|w| w[0] > w[1]));
        assert_eq!(*s.values().last().unwrap(), 0.07);
    }

    #[test]
    fn trivial_endpoints_give_vanishing_path() {
        // With u0 = u1 = 0 the s-problem has the exact spatially constant
        // solution u = s Lambda t (t - 1); as s drops the path collapses to
        // zero, the s = 0 geodesic between identical endpoints.
        let grid = RadialGrid::new(32);
        let problem = GeodesicProblem::new(grid.zero_field(), grid.zero_field(), 0.1, 17);
        let schedule = ContinuationSchedule::to_s_min(1e-3);
        let sol = solve(&grid, &problem, &schedule).unwrap();
        assert!(sol.admissible);
        assert!(sol.residual_norm < 1e-9);
        assert!((sol.lambda - 0.5).abs() < 1e-12);
        let mut worst = 0.0f64;
        for m in 0..17 {
            let t = sol.u.time(m);
            let exact = sol.s * sol.lambda * t * (t - 1.0);
            for j in 0..grid.n_theta() {
                worst = worst.max((sol.u.get(m, j) - exact).abs());
            }
        }
        assert!(worst < 1e-10, "distance to closed form {worst:.3e}");
        assert!(sol.u.max_abs() <= sol.s * sol.lambda / 4.0 + 1e-10);
    }

    #[test]
    fn solver_tracks_exact_geodesic() {
        let grid = RadialGrid::new(48);
        let n_time = 33;
        let u1 = crate::conformal::mobius_factor(&grid, 0.3, 1.0);
        let problem = GeodesicProblem::new(grid.zero_field(), u1, 1e-2, n_time);
        let schedule = ContinuationSchedule::to_s_min(1e-2);
        let sol = solve(&grid, &problem, &schedule).unwrap();
        assert!(sol.admissible);
        assert!(sol.residual_norm < 1e-9);
        let exact = exact_sphere_path(&grid, n_time, 0.3);
        let dist = c0_distance(&sol.u, &exact);
        assert!(dist < 5e-2, "C0 distance {dist:.3e}");
        // Newton never needed to leave the elliptic regime.
        assert!(sol
            .trace
            .iter()
            .all(|r| r.min_pivot.is_none_or(|p| p > 0.0)));
    }

    #[test]
    fn comparison_principle_ordered_sources() {
        // f2 = 2 f1 >= f1 with shared endpoints forces u1 >= u2 pointwise.
        let grid = RadialGrid::new(32);
        let n_time = 17;
        let u1_field = crate::conformal::mobius_factor(&grid, 0.2, 1.0);
        let problem = GeodesicProblem::new(grid.zero_field(), u1_field, 1e-2, n_time);
        let schedule = ContinuationSchedule::new(vec![1.0]);
        let sol1 = solve(&grid, &problem, &schedule).unwrap();
        let mut f2 = sol1.f.clone();
        for m in 0..n_time {
            for j in 0..grid.n_theta() {
                f2.set(m, j, 2.0 * f2.get(m, j));
            }
        }
        let (u2, res2) =
            solve_fixed_source(&grid, &sol1.u, problem.epsilon, &f2, problem.solver_tol)
                .unwrap();
        assert!(res2 < 1e-9);
        let min_gap = crate::geodesic::compare_check(&sol1.u, &u2).unwrap();
        assert!(min_gap >= -1e-6, "comparison violated: {min_gap:.3e}");
    }
}
