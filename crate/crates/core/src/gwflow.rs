//! Volume-normalized smoothing flow on admissible conformal factors,
//!
//! ```text
//! du/dt = log sigma_2(g_u^{-1} A_u) - c(t),
//! ```
//!
//! with c(t) the constant that freezes the conformal volume. The unnormalized
//! flow du/dt = log sigma_2(A_u) + 4u is integrated with an explicit
//! Heun (RK2) step under a parabolic CFL cap, and the volume is re-fixed by a
//! constant shift after every step; the shift commutes with the flow up to
//! the normalization constant, so the two formulations share trajectories and
//! fixed points. The energy decreases along the flow and every accepted step
//! enforces that monotonicity, backtracking dt on violation or loss of
//! admissibility.

use serde::Serialize;
use thiserror::Error;

use crate::conformal::{self, ConformalState};
use crate::spheremodel::{RadialField, RadialGrid};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error(transparent)]
    Conformal(#[from] conformal::ConformalError),
    #[error("time step underflow (dt = {dt:.3e} at t = {t:.6}): stiff or inadmissible data")]
    DtUnderflow { t: f64, dt: f64 },
}

/// CFL safety factor for the explicit step.
pub const DEFAULT_CFL: f64 = 0.4;
/// Accepted steps may not raise the energy by more than this.
pub const ENERGY_BACKTRACK_TOL: f64 = 1e-10;

/// One point on a flow trajectory.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub u: RadialField,
    pub t: f64,
    pub dt_last: f64,
    pub f_value: f64,
    pub monitors: FlowMonitors,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowMonitors {
    pub sup_u: f64,
    pub sup_grad_u: f64,
    /// t * sup |Delta u|: bounded along smooth flows (short-time smoothing).
    pub t_sup_lap_u: f64,
    /// t * sup |log sigma_2(A_u)|.
    pub t_sup_log_sigma2: f64,
    pub min_sigma2: f64,
}

fn monitors(grid: &RadialGrid, u: &RadialField, state: &ConformalState, t: f64) -> FlowMonitors {
    let lap = grid.laplacian(u);
    let log_s2 = state.sigma2.map(|v| v.max(f64::MIN_POSITIVE).ln());
    FlowMonitors {
        sup_u: u.max_abs(),
        sup_grad_u: grid.differentiate(u, 1).max_abs(),
        t_sup_lap_u: t * lap.max_abs(),
        t_sup_log_sigma2: t * log_s2.max_abs(),
        min_sigma2: state.sigma2.min(),
    }
}

impl FlowState {
    pub fn initial(grid: &RadialGrid, u: RadialField) -> Result<Self, FlowError> {
        let state = conformal::schouten(grid, &u);
        state.require_admissible()?;
        let f_value = conformal::f_energy(grid, &u);
        let m = monitors(grid, &u, &state, 0.0);
        Ok(Self {
            u,
            t: 0.0,
            dt_last: 0.0,
            f_value,
            monitors: m,
        })
    }
}

/// Right-hand side of the volume-normalized flow:
/// log sigma_2(g_u^{-1} A_u) minus its dV_u-average (which is exactly the
/// constant making the flow volume-preserving). Vanishes identically at any
/// metric of constant sigma_2.
pub fn flow_rhs(grid: &RadialGrid, u: &RadialField) -> Result<RadialField, FlowError> {
    let state = conformal::schouten(grid, u);
    state.require_admissible()?;
    let log_s2u = log_sigma2_u(u, &state);
    let vol = state.volume(grid);
    let mean = grid.integrate_product(&log_s2u, &state.vol_density) / vol;
    Ok(log_s2u.shift(-mean))
}

/// log sigma_2(g_u^{-1} A_u) = 4u + log sigma_2(A_u), nodewise.
fn log_sigma2_u(u: &RadialField, state: &ConformalState) -> RadialField {
    RadialField::from_values(
        u.values()
            .iter()
            .zip(state.sigma2.values().iter())
            .map(|(&uv, &s2)| 4.0 * uv + s2.ln())
            .collect(),
    )
}

/// Parabolic step cap dt <= cfl h^2 min sigma_2 / max(T_1 eigenvalue); the
/// effective diffusion coefficient of the linearized flow is sigma_2^{-1} T_1.
pub fn cfl_dt(grid: &RadialGrid, state: &ConformalState, cfl: f64) -> f64 {
    let mut max_t1 = 0.0f64;
    for j in 0..grid.n_theta() {
        let t1_rad = 3.0 * state.lam_tan[j];
        let t1_tan = state.lam_rad[j] + 2.0 * state.lam_tan[j];
        max_t1 = max_t1.max(t1_rad).max(t1_tan);
    }
    let h = grid.spacing();
    cfl * h * h * state.sigma2.min() / max_t1.max(f64::MIN_POSITIVE)
}

fn admissible(grid: &RadialGrid, u: &RadialField) -> Option<ConformalState> {
    let state = conformal::schouten(grid, u);
    if state.admissibility().admissible {
        Some(state)
    } else {
        None
    }
}

/// One accepted step of the flow: Heun on the unnormalized equation, then the
/// exact volume-fixing shift. Halves dt on loss of admissibility (including
/// at the predictor stage) or an energy increase beyond tolerance.
pub fn step(grid: &RadialGrid, state: &FlowState, dt: f64) -> Result<FlowState, FlowError> {
    let vol_target = conformal::schouten(grid, &state.u).volume(grid);
    let s0 = conformal::schouten(grid, &state.u);
    let k1 = log_sigma2_u(&state.u, &s0);
    let mut dt = dt;
    while dt >= 1e-12 {
        let predictor = state.u.zip_with(&k1, |u, k| u + dt * k);
        let Some(s_pred) = admissible(grid, &predictor) else {
            dt *= 0.5;
            continue;
        };
        let k2 = log_sigma2_u(&predictor, &s_pred);
        let mut trial = RadialField::from_values(
            state
                .u
                .values()
                .iter()
                .zip(k1.values().iter().zip(k2.values().iter()))
                .map(|(&u, (&a, &b))| u + 0.5 * dt * (a + b))
                .collect(),
        );
        // Exact volume re-fix by a constant shift.
        let vol_trial = conformal::schouten(grid, &trial).volume(grid);
        let shift = 0.25 * (vol_trial / vol_target).ln();
        trial = trial.shift(shift);
        if let Some(s_new) = admissible(grid, &trial) {
            let f_new = conformal::f_energy(grid, &trial);
            if f_new <= state.f_value + ENERGY_BACKTRACK_TOL {
                let t_new = state.t + dt;
                let m = monitors(grid, &trial, &s_new, t_new);
                return Ok(FlowState {
                    u: trial,
                    t: t_new,
                    dt_last: dt,
                    f_value: f_new,
                    monitors: m,
                });
            }
        }
        dt *= 0.5;
    }
    Err(FlowError::DtUnderflow { t: state.t, dt })
}

/// Decimated per-step record of a trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct FlowSample {
    pub t: f64,
    pub f: f64,
    pub min_sigma2: f64,
    /// sup |sigma_2(g_u^{-1} A_u) - sigma_bar| / sigma_bar.
    pub sup_rel_dev: f64,
    pub sup_lap_u: f64,
    pub t_sup_lap_u: f64,
    pub t_sup_log_sigma2: f64,
    pub dt: f64,
}

#[derive(Debug)]
pub struct FlowTrajectory {
    pub final_state: FlowState,
    pub samples: Vec<FlowSample>,
    pub snapshots: Vec<(f64, RadialField)>,
    pub steps: usize,
    pub converged: bool,
    /// Mollification passes applied to rough initial data before flowing.
    pub mollify_passes: usize,
}

/// Relative deviation of sigma_2(g_u^{-1} A_u) from its average.
pub fn sigma2_rel_deviation(grid: &RadialGrid, state: &ConformalState) -> f64 {
    let sigma = conformal::total_sigma(grid, state);
    let sigma_bar = sigma / state.volume(grid);
    let mut sup = 0.0f64;
    for j in 0..state.sigma2_u.len() {
        sup = sup.max((state.sigma2_u[j] - sigma_bar).abs());
    }
    sup / sigma_bar
}

/// One averaging pass u_j <- (u_{j-1} + 2 u_j + u_{j+1}) / 4 with pole
/// reflection; applied to rough data until the Schouten field re-enters the
/// cone.
fn mollify_once(grid: &RadialGrid, u: &RadialField) -> RadialField {
    let n = grid.n_theta() as isize;
    let mut out = Vec::with_capacity(n as usize);
    for j in 0..n {
        let left = u[grid.reflect(j - 1)];
        let right = u[grid.reflect(j + 1)];
        out.push(0.25 * (left + 2.0 * u[j as usize] + right));
    }
    RadialField::from_values(out)
}

/// Integrates the flow from u0 until t_final or until the sigma_2 field is
/// relatively constant to stop_tol. Rough initial data (min sigma_2 below
/// 1e-8) is pre-mollified; the pass count is reported in the trajectory.
pub fn run(
    grid: &RadialGrid,
    u0: &RadialField,
    t_final: f64,
    stop_tol: f64,
) -> Result<FlowTrajectory, FlowError> {
    let mut u = u0.clone();
    let mut mollify_passes = 0usize;
    while conformal::schouten(grid, &u).admissibility().min_sigma2 < 1e-8 {
        if mollify_passes >= 50 {
            // Give up and let the admissibility error carry the report.
            conformal::schouten(grid, &u).require_admissible()?;
            break;
        }
        u = mollify_once(grid, &u);
        mollify_passes += 1;
    }
    let mut state = FlowState::initial(grid, u)?;
    let mut samples = Vec::new();
    let mut snapshots = vec![(0.0, state.u.clone())];
    let mut steps = 0usize;
    let mut converged = false;
    let snapshot_stride = t_final / 16.0;
    let mut next_snapshot = snapshot_stride;
    let mut dt_hint = f64::INFINITY;
    loop {
        let cstate = conformal::schouten(grid, &state.u);
        let rel_dev = sigma2_rel_deviation(grid, &cstate);
        samples.push(FlowSample {
            t: state.t,
            f: state.f_value,
            min_sigma2: state.monitors.min_sigma2,
            sup_rel_dev: rel_dev,
            sup_lap_u: grid.laplacian(&state.u).max_abs(),
            t_sup_lap_u: state.monitors.t_sup_lap_u,
            t_sup_log_sigma2: state.monitors.t_sup_log_sigma2,
            dt: state.dt_last,
        });
        if rel_dev < stop_tol {
            converged = true;
            break;
        }
        if state.t >= t_final {
            break;
        }
        let cap = cfl_dt(grid, &cstate, DEFAULT_CFL);
        let dt = cap.min(dt_hint * 1.5).min(t_final - state.t).max(1e-12);
        state = step(grid, &state, dt)?;
        dt_hint = state.dt_last;
        steps += 1;
        if state.t >= next_snapshot {
            snapshots.push((state.t, state.u.clone()));
            next_snapshot += snapshot_stride;
        }
    }
    snapshots.push((state.t, state.u.clone()));
    // Decimate the per-step record to a bounded summary.
    let stride = (samples.len() / 1024).max(1);
    let samples: Vec<FlowSample> = samples
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i == 0)
        .map(|(_, s)| s.clone())
        .collect();
    Ok(FlowTrajectory {
        final_state: state,
        samples,
        snapshots,
        steps,
        converged,
        mollify_passes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::spheremodel::VOL_S4;

    #[test]
    fn round_metric_is_fixed_point() {
        let grid = RadialGrid::new(64);
        let rhs = flow_rhs(&grid, &grid.zero_field()).unwrap();
        assert!(rhs.max_abs() < 1e-9);
        // Constants are projected out by the normalization.
        let rhs = flow_rhs(&grid, &grid.constant_field(0.3)).unwrap();
        assert!(rhs.max_abs() < 1e-9);
    }

    #[test]
    fn mobius_factors_are_fixed_points() {
        let grid = RadialGrid::new(256);
        let u = conformal::mobius_factor(&grid, 0.4, 1.0);
        let rhs = flow_rhs(&grid, &u).unwrap();
        assert!(rhs.max_abs() < 1e-6, "rhs sup {:.3e}", rhs.max_abs());
    }

    #[test]
    fn rhs_rejects_inadmissible_data() {
        let grid = RadialGrid::new(64);
        let u = grid.field_from_fn(|t, _| 0.8 * (6.0 * t).cos());
        assert!(matches!(
            flow_rhs(&grid, &u),
            Err(FlowError::Conformal(_))
        ));
    }

    #[test]
    fn step_preserves_volume_and_decreases_energy() {
        let grid = RadialGrid::new(64);
        // Mean-zero second-harmonic perturbation.
        let u0 = grid.field_from_fn(|_, x| 0.05 * (x * x - 0.2));
        let state = FlowState::initial(&grid, u0).unwrap();
        let vol0 = conformal::schouten(&grid, &state.u).volume(&grid);
        let cstate = conformal::schouten(&grid, &state.u);
        let dt = cfl_dt(&grid, &cstate, DEFAULT_CFL);
        let next = step(&grid, &state, dt).unwrap();
        let vol1 = conformal::schouten(&grid, &next.u).volume(&grid);
        assert!((vol1 - vol0).abs() < 1e-10 * VOL_S4);
        assert!(
            next.f_value < state.f_value,
            "energy did not decrease: {} -> {}",
            state.f_value,
            next.f_value
        );
    }

    #[test]
    fn fixed_point_input_is_stationary() {
        let grid = RadialGrid::new(64);
        let state = FlowState::initial(&grid, grid.zero_field()).unwrap();
        let next = step(&grid, &state, 1e-4).unwrap();
        assert!(next.u.max_abs() < 1e-9);
    }

    #[test]
    fn flow_converges_from_random_admissible_data() {
        let grid = RadialGrid::new(64);
        let mut rng = SplitMix64::stream(71, "flow-random");
        let u0 = conformal::random_admissible(&grid, &mut rng, 0.2);
        let traj = run(&grid, &u0, 3.0, 1e-4).unwrap();
        assert!(traj.converged, "flow did not converge in time");
        // Energy is monotone along the recorded samples.
        for w in traj.samples.windows(2) {
            assert!(w[1].f <= w[0].f + ENERGY_BACKTRACK_TOL);
        }
        assert!(traj.final_state.f_value.abs() < 1e-5);
        let final_state = conformal::schouten(&grid, &traj.final_state.u);
        assert!(sigma2_rel_deviation(&grid, &final_state) < 1e-4);
        // Terminal fixed-point residual.
        let rhs = flow_rhs(&grid, &traj.final_state.u).unwrap();
        assert!(rhs.max_abs() < 1e-4);
    }

    #[test]
    fn immediate_convergence_from_round_data() {
        let grid = RadialGrid::new(64);
        let traj = run(&grid, &grid.zero_field(), 1.0, 1e-4).unwrap();
        assert_eq!(traj.steps, 0);
        assert!(traj.converged);
        assert_eq!(traj.final_state.f_value, 0.0);
    }

    #[test]
    fn rough_data_is_mollified_then_smoothed() {
        let grid = RadialGrid::new(96);
        // Piecewise-linear tent in theta: admissibility fails at the kinks.
        let u0 = grid.field_from_fn(|t, _| {
            let s = t / std::f64::consts::PI;
            0.06 * (1.0 - (2.0 * s - 1.0).abs())
        });
        assert!(!conformal::schouten(&grid, &u0).admissibility().admissible);
        let traj = run(&grid, &u0, 0.5, 1e-6).unwrap();
        assert!(traj.mollify_passes > 0);
        // Smoothing monitors stay bounded and the Laplacian relaxes.
        for s in &traj.samples {
            assert!(s.t_sup_lap_u.is_finite());
            assert!(s.t_sup_lap_u < 50.0);
        }
        let first_lap = traj.samples.first().unwrap().sup_lap_u;
        let last_lap = traj.samples.last().unwrap().sup_lap_u;
        assert!(last_lap < first_lap, "{last_lap} vs {first_lap}");
    }
}
