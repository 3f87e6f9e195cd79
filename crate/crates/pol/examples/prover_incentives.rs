//! Monte-Carlo reproduction of the prover-incentive demonstration: the
//! expected utility of fabricating a given number of stages, compared to
//! full honesty, at different audit counts. Four audits leave the all-cheat
//! strategy profitable; ten already push every cheat below honesty.
//!
//! ```bash
//! cargo run -p pol --example prover_incentives
//! ```

use pol::incentives::{prover_utility, Competition, IncentiveParams, UtilityMode};
use pol::prng::Seed;
use pol::simulation::{simulate_prover_utility, SimOptions};

fn main() {
    let grid: Vec<u32> = vec![0, 1, 10, 100, 1_000, 2_000, 5_000, 10_000];
    let mut opts = SimOptions::new(20_000, Seed::from_label("prover-incentives-example"));
    opts.threads = 2;

    for audit_count in [4u32, 10] {
        let params = IncentiveParams {
            total_cost: 10_000.0,
            block_reward: 20_000.0,
            gamma: 0.0,
            kappa: 0.5,
            alpha: audit_count,
            stage_count: 10_000,
            lambda: 1.0,
            flag_fraction: 0.2,
            detect_reward: 100.0,
            flag_reward: 12.0,
            competition: Competition::ExponentialHazard { rate: 1.0 },
        };
        let honest = prover_utility(&params, 1.0, UtilityMode::Bound).expect("analysis");
        let report = simulate_prover_utility(&params, &grid, &opts).expect("simulation");

        println!("alpha = {audit_count}, honest utility = {honest:.2}");
        println!("  cheats   simulated      analytic   caught");
        for (i, &cheats) in grid.iter().enumerate() {
            let rho = f64::from(params.stage_count - cheats) / f64::from(params.stage_count);
            let analytic = prover_utility(&params, rho, UtilityMode::Exact).expect("analysis");
            let marker = if report.mean_utility[i] > honest { "  <-- beats honesty" } else { "" };
            println!(
                "  {cheats:>6} {:>11.2} {analytic:>13.2} {:>7.3}{marker}",
                report.mean_utility[i], report.detection_rate[i]
            );
        }
        println!();
    }
}
