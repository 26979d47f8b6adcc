//! Batch verification sweeps for the matrix-algebra identities and
//! inequalities, with per-lemma worst-case violations. Identities are held to
//! 1e-10, strict inequalities to a 1e-12 rounding slack, and the closed-form
//! equality cases must reproduce exactly in floating point.

use serde::Serialize;

use crate::rng::SplitMix64;
use crate::symcone::{
    self, in_cone, newton, newton_multi, rank_one_drop, rank_one_newton_pairing, sg_quadratic,
    sigma, sigma_polarized, t1_cauchy_schwarz, ConeLevel, SymMat4, SymconeError,
};

pub const IDENTITY_TOL: f64 = 1e-10;
pub const INEQUALITY_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct LemmaReport {
    pub name: &'static str,
    pub samples: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl LemmaReport {
    fn new(name: &'static str, samples: usize, max_violation: f64, tolerance: f64) -> Self {
        Self {
            name,
            samples,
            max_violation,
            tolerance,
            pass: max_violation <= tolerance,
        }
    }
}

/// Runs every suite at the given sample count. A zero count yields an empty
/// report list. With `break_cone` set, a non-cone matrix is pushed through a
/// precondition-checked operation and the resulting error is returned, which
/// exercises the failure path end to end.
pub fn run_all(
    samples: usize,
    seed: u64,
    break_cone: bool,
) -> Result<Vec<LemmaReport>, SymconeError> {
    if break_cone {
        let bad = SymMat4::from_diag([1.0, -1.0, 1.0, 1.0]);
        t1_cauchy_schwarz(&bad, &SymMat4::identity())?;
        unreachable!("the injected matrix is outside the cone");
    }
    if samples == 0 {
        return Ok(Vec::new());
    }
    Ok(vec![
        sigma_conjugation_invariance(samples, seed),
        newton_recursion_vs_delta(samples, seed),
        sigma_polarized_diagonal(samples, seed),
        polarized_positivity(samples, seed),
        polarized_monotonicity(samples, seed),
        newton_transform_monotone(samples, seed),
        rank_one_drop_identity(samples, seed),
        rank_one_pairing_invariance(samples, seed),
        t1_cauchy_schwarz_inequality(samples, seed),
        sg_quadratic_nonpositive(samples, seed),
        equality_cases(),
    ])
}

fn sigma_conjugation_invariance(samples: usize, seed: u64) -> LemmaReport {
    let mut rng = SplitMix64::stream(seed, "conjugation");
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let a = symcone::random_sym(&mut rng);
        let q = symcone::random_rotation(&mut rng);
        let b = a.conjugate(&q);
        for k in 1..=4 {
            let lvl = ConeLevel::new(k).expect("k in 1..=4");
            let sa = sigma(&a, lvl);
            let sb = sigma(&b, lvl);
            worst = worst.max((sa - sb).abs() / (1.0 + sa.abs()));
        }
    }
    LemmaReport::new("sigma_conjugation_invariance", samples, worst, IDENTITY_TOL)
}

fn newton_recursion_vs_delta(samples: usize, seed: u64) -> LemmaReport {
    let mut rng = SplitMix64::stream(seed, "newton-vs-delta");
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let a = symcone::random_sym(&mut rng);
        for k in 1..=3usize {
            let direct = newton(&a, k);
            let multi = newton_multi(&vec![a; k]);
            for i in 0..4 {
                for j in 0..4 {
                    worst = worst.max((direct.get(i, j) - multi.get(i, j)).abs());
                }
            }
        }
    }
    LemmaReport::new("newton_recursion_vs_delta", samples, worst, IDENTITY_TOL)
}

fn sigma_polarized_diagonal(samples: usize, seed: u64) -> LemmaReport {
    let mut rng = SplitMix64::stream(seed, "polarized-diagonal");
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let a = symcone::random_sym(&mut rng);
        for k in 1..=4usize {
            let lvl = ConeLevel::new(k).expect("k in 1..=4");
            let sp = sigma_polarized(&vec![a; k]);
            let expect = symcone::sigma_polarized_diag_constant(lvl) * sigma(&a, lvl);
            worst = worst.max((sp - expect).abs() / (1.0 + expect.abs()));
        }
    }
    LemmaReport::new("sigma_polarized_diagonal", samples, worst, IDENTITY_TOL)
}

/// Positivity of the polarized forms on the cone: Sigma_k > 0 for k arguments
/// in Gamma_k+, and the (k-1)-argument generalized Newton transform positive
/// definite for arguments in Gamma_k+.
fn polarized_positivity(samples: usize, seed: u64) -> LemmaReport {
    let mut rng = SplitMix64::stream(seed, "polarized-positivity");
    let mut worst = 0.0f64;
    for _ in 0..samples {
        for k in 2..=4usize {
            let lvl = ConeLevel::new(k).expect("k in 2..=4");
            let args: Vec<SymMat4> = (0..k)
                .map(|_| symcone::random_in_cone(&mut rng, lvl))
                .collect();
            worst = worst.max(-sigma_polarized(&args));
            let t = newton_multi(&args[..k - 1]);
            worst = worst.max(-t.min_eigenvalue());
        }
    }
    LemmaReport::new(
        "polarized_positivity_on_cone",
        samples,
        worst.max(0.0),
        INEQUALITY_SLACK,
    )
}

fn polarized_monotonicity(samples: usize, seed: u64) -> LemmaReport {
    let mut rng = SplitMix64::stream(seed, "polarized-monotonicity");
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let b = symcone::random_sym(&mut rng);
        let p = symcone::random_sym(&mut rng);
        let a = b.add(&p.sym_product(&p)).add(&SymMat4::from_diag([1e-6; 4]));
        let a2 = symcone::random_in_cone(&mut rng, ConeLevel::K2);
        let gap = sigma_polarized(&[a, a2]) - sigma_polarized(&[b, a2]);
        worst = worst.max(-gap);
    }
    LemmaReport::new(
        "sigma_polarized_monotone",
        samples,
        worst.max(0.0),
        INEQUALITY_SLACK,
    )
}

fn newton_transform_monotone(samples: usize, seed: u64) -> LemmaReport {
    let mut rng = SplitMix64::stream(seed, "newton-monotone");
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let a = symcone::random_in_cone(&mut rng, ConeLevel::K2);
        let p = symcone::random_sym(&mut rng);
        let b = a.add(&p.sym_product(&p)).add(&SymMat4::from_diag([1e-8; 4]));
        let diff = newton(&b, 1).sub(&newton(&a, 1));
        worst = worst.max(-diff.min_eigenvalue());
    }
    LemmaReport::new(
        "newton_transform_monotone",
        samples,
        worst.max(0.0),
        IDENTITY_TOL,
    )
}

fn rank_one_drop_identity(samples: usize, seed: u64) -> LemmaReport {
    let mut rng = SplitMix64::stream(seed, "rank-one-drop");
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let a = symcone::random_sym(&mut rng);
        let x = symcone::random_vec(&mut rng);
        for k in 1..=4usize {
            let (lhs, rhs) = rank_one_drop(&a, x, ConeLevel::new(k).expect("k in 1..=4"));
            worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
        }
    }
    LemmaReport::new("rank_one_drop_identity", samples, worst, IDENTITY_TOL)
}

fn rank_one_pairing_invariance(samples: usize, seed: u64) -> LemmaReport {
    let mut rng = SplitMix64::stream(seed, "rank-one-pairing");
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let a = symcone::random_sym(&mut rng);
        let x = symcone::random_vec(&mut rng);
        for k in 1..=3usize {
            let (lhs, rhs) = rank_one_newton_pairing(&a, x, k);
            worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
        }
    }
    LemmaReport::new("rank_one_pairing_invariance", samples, worst, IDENTITY_TOL)
}

fn t1_cauchy_schwarz_inequality(samples: usize, seed: u64) -> LemmaReport {
    let mut rng = SplitMix64::stream(seed, "t1-cauchy-schwarz");
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let a = symcone::random_in_cone(&mut rng, ConeLevel::K2);
        let b = symcone::random_in_cone(&mut rng, ConeLevel::K2);
        let (lhs, rhs) =
            t1_cauchy_schwarz(&a, &b).expect("cone samples satisfy the precondition");
        worst = worst.max((rhs - lhs) / (1.0 + lhs.abs()));
    }
    LemmaReport::new(
        "t1_cauchy_schwarz",
        samples,
        worst.max(0.0),
        INEQUALITY_SLACK,
    )
}

fn sg_quadratic_nonpositive(samples: usize, seed: u64) -> LemmaReport {
    let mut rng = SplitMix64::stream(seed, "sg-quadratic");
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let a = symcone::random_in_cone(&mut rng, ConeLevel::K2);
        let x = symcone::random_vec(&mut rng);
        let y = symcone::random_vec(&mut rng);
        let v = sg_quadratic(&a, x, y).expect("cone sample satisfies the precondition");
        worst = worst.max(v);
    }
    LemmaReport::new(
        "sg_quadratic_nonpositive",
        samples,
        worst.max(0.0),
        INEQUALITY_SLACK,
    )
}

/// Closed-form equality cases, required to reproduce exactly: identical
/// identity multiples in the quadratic pairing inequality, and a degenerate
/// plane in the Newton-transform quadratic form.
fn equality_cases() -> LemmaReport {
    let half = SymMat4::identity().scale(0.5);
    let (lhs, rhs) = t1_cauchy_schwarz(&half, &half).expect("I/2 is in the cone");
    let mut worst = (lhs - 9.0).abs().max((rhs - 9.0).abs());
    let x = [0.3, -0.7, 0.2, 0.55];
    let v = sg_quadratic(&half, x, x).expect("I/2 is in the cone");
    worst = worst.max(v.abs());
    // in_cone boundary examples stay strict.
    if !in_cone(&SymMat4::from_diag([1.0, 1.0, 1.0, -0.1]), ConeLevel::K2) {
        worst = worst.max(1.0);
    }
    if in_cone(&SymMat4::from_diag([1.0, -1.0, 1.0, 1.0]), ConeLevel::K2) {
        worst = worst.max(1.0);
    }
    LemmaReport::new("equality_cases_exact", 4, worst, 0.0)
}
