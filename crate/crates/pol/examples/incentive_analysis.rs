//! Closed-form incentive analysis of the toy deployment: the reward
//! threshold for individual rationality, the audit counts that make
//! cheating unprofitable (with and without penalty), the flag-reward
//! threshold for verifier incentive security, and the lazy-verifier
//! threshold the flag game exists to escape.
//!
//! ```bash
//! cargo run -p pol --example incentive_analysis
//! ```

use pol::incentives::{
    dilemma_threshold, individual_rationality, min_audits_bis, min_audits_with_penalty,
    prover_utility, vis_check, Competition, DilemmaParams, DilemmaThreshold, IncentiveParams,
    UtilityMode,
};

fn main() {
    let params = IncentiveParams {
        total_cost: 10_000.0,
        block_reward: 20_000.0,
        gamma: 0.0,
        kappa: 0.5,
        alpha: 10,
        stage_count: 10_000,
        lambda: 1.0,
        flag_fraction: 0.2,
        detect_reward: 100.0,
        flag_reward: 12.0,
        competition: Competition::ExponentialHazard { rate: 1.0 },
    };

    let ir = individual_rationality(&params).expect("analysis");
    println!("honest utility u(1)       = {:.4}", ir.honest_utility);
    println!(
        "IR reward threshold       = {:.4} (holds: {})",
        ir.threshold_reward.expect("feasible audit"),
        ir.holds
    );

    let alpha_bis = min_audits_bis(&params).expect("analysis");
    println!("audits for no-penalty BIS = {alpha_bis}");
    let alpha_penalty = min_audits_with_penalty(&params, 1.0).expect("analysis");
    println!("audits at penalty 1.0     = {alpha_penalty}");

    let vis = vis_check(
        100,
        params.stage_count,
        params.flag_fraction,
        params.flag_reward,
        params.total_cost,
    );
    println!(
        "VIS at alpha=100          = {} (min flag reward {:.2})",
        vis.holds, vis.min_flag_reward
    );

    let dilemma = dilemma_threshold(
        &DilemmaParams {
            catch_reward: params.detect_reward,
            pass_reward: 0.0,
        },
        params.total_cost,
        params.stage_count,
    );
    match dilemma {
        DilemmaThreshold::AlwaysLazy => println!("lazy verification always dominates"),
        DilemmaThreshold::Epsilon(eps) => println!(
            "without flags, verification stops paying below a {:.2}% cheater rate",
            eps * 100.0
        ),
    }

    // the utility curve that motivates the audit threshold: more audits
    // push every partial-cheat utility below honest
    println!("\ncheat fraction vs utility (bound mode):");
    println!("  rho   alpha=4      alpha=10");
    for rho in [0.0, 0.5, 0.9, 0.99, 1.0] {
        let mut four = params.clone();
        four.alpha = 4;
        let u4 = prover_utility(&four, rho, UtilityMode::Bound).expect("utility");
        let u10 = prover_utility(&params, rho, UtilityMode::Bound).expect("utility");
        println!("  {rho:<5} {u4:>11.2} {u10:>11.2}");
    }
}
