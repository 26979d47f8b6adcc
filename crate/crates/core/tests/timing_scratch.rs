use sigma2_core::conformal;
use sigma2_core::pipeline::{self, PipelineConfig};
use sigma2_core::rng::SplitMix64;
use sigma2_core::spheremodel::RadialGrid;

#[test]
fn calibrate_pipeline_refinement() {
    for (n_theta, n_time) in [(16usize, 17usize), (32, 33), (64, 65), (128, 128)] {
        let start = std::time::Instant::now();
        let config = PipelineConfig {
            n_theta,
            n_time,
            n_flow_slices: 8,
            ..Default::default()
        };
        let grid = RadialGrid::new(n_theta);
        match pipeline::run(&grid, &config) {
            Ok(r) => println!(
                "n={n_theta}: raw_F {:.3e} smoothed_F {:.3e} dev {:.3e} dist {:.3e} andrews {:.3e} ({:?})",
                r.raw_f_max_abs, r.smoothed_f_max_abs, r.max_sigma2_rel_dev,
                r.c0_distance_to_exact, r.andrews_initial_tangent_gap, start.elapsed()
            ),
            Err(e) => println!("n={n_theta}: FAILED {e}"),
        }
    }
}

#[test]
fn calibrate_conformal_invariance_margin() {
    let grid = RadialGrid::new(256);
    let mut rng = SplitMix64::stream(20240803, "acceptance-sigma");
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let u = conformal::random_admissible(&grid, &mut rng, 0.3);
        let state = conformal::schouten(&grid, &u);
        let sigma = conformal::total_sigma(&grid, &state);
        worst = worst.max((sigma - conformal::SIGMA_TOTAL_ROUND).abs());
    }
    println!("conformal invariance worst defect over 100 draws: {worst:.3e}");
}
