//! Monte-Carlo reproduction of the verifier-incentive experiments on a
//! desk-scale economy: the constant strategy (audit a fixed number of
//! stages) and the greedy-adaptive strategy (audit until a flag target is
//! met). With the flag reward above its threshold, auditing everything the
//! protocol grants is optimal, and the best greedy target is the expected
//! flag take of the full grant.
//!
//! ```bash
//! cargo run -p pol --example verifier_incentives
//! ```

use pol::incentives::{vis_check, Competition, IncentiveParams};
use pol::prng::Seed;
use pol::simulation::{
    simulate_verifier_constant, simulate_verifier_greedy, SimOptions,
};

fn main() {
    let params = IncentiveParams {
        total_cost: 1_000.0,
        block_reward: 2_000.0,
        gamma: 0.0,
        kappa: 0.5,
        alpha: 50,
        stage_count: 1_000,
        lambda: 1.0,
        flag_fraction: 0.2,
        detect_reward: 100.0,
        flag_reward: 12.0,
        competition: Competition::ExponentialHazard { rate: 1.0 },
    };
    let vis = vis_check(
        params.alpha,
        params.stage_count,
        params.flag_fraction,
        params.flag_reward,
        params.total_cost,
    );
    println!(
        "economy: T={}, alpha={}, eta={}, R1={} (VIS holds: {})\n",
        params.stage_count, params.alpha, params.flag_fraction, params.flag_reward, vis.holds
    );

    let mut opts = SimOptions::new(20_000, Seed::from_label("verifier-incentives-example"));
    opts.threads = 2;

    let audit_grid: Vec<u32> = (0..=8).map(|i| i * 10).collect();
    let constant = simulate_verifier_constant(&params, &audit_grid, &opts).expect("simulation");
    println!("constant strategy (requests beyond the grant are clamped):");
    println!("  audits   mean utility   flag coverage");
    for (i, &audits) in audit_grid.iter().enumerate() {
        println!(
            "  {audits:>6} {:>14.2} {:>15.3}",
            constant.mean_utility[i], constant.detection_rate[i]
        );
    }
    println!("  optimal request: {}\n", constant.optimal_grid_value);

    let expected_take = (f64::from(params.alpha) * params.flag_fraction) as u32;
    let target_grid: Vec<u32> = (0..=expected_take).collect();
    let greedy = simulate_verifier_greedy(&params, &target_grid, &opts).expect("simulation");
    println!("greedy-adaptive strategy (stop at the flag target or the grant):");
    println!("  target   mean utility   audits (mean +- std)");
    for (i, &target) in target_grid.iter().enumerate() {
        println!(
            "  {target:>6} {:>14.2}   {:>6.1} +- {:.1}",
            greedy.base.mean_utility[i], greedy.audits_mean[i], greedy.audits_std[i]
        );
    }
    println!(
        "  optimal target: {} (expected flag take of the grant: {expected_take})",
        greedy.base.optimal_grid_value
    );
}
