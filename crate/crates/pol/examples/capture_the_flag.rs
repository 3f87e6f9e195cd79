//! End-to-end run of the full mechanism: generate a toy problem, produce a
//! flag-committed certificate, and verify it through the message-ordered
//! session.
//!
//! ```bash
//! cargo run -p pol --example capture_the_flag
//! ```

use pol::certificate::generate_full;
use pol::prng::Seed;
use pol::training::{Dataset, Hyper, InitRule, LossId, ModelId};
use pol::verification::{run_full_protocol, Message};
use pol::Problem;

fn main() {
    let data_seed = Seed::from_label("ctf-example/dataset");
    let problem = Problem {
        data: Dataset::synthetic_linear(&data_seed, 6, 64).expect("fixture dataset"),
        env: Hyper {
            learning_rate: 0.05,
            batch_size: 8,
            epochs: 20,
            epochs_per_stage: 2,
            model: ModelId::Linear,
            loss: LossId::SquaredError,
            init: InitRule::Zeros,
        },
        root_seed: Seed::from_label("ctf-example/root"),
    };
    let stage_count = problem.stage_count();
    let flag_fraction = 0.4;
    println!(
        "problem: {} points, {} stages of {} epochs, {:.0}% flags",
        problem.data.len(),
        stage_count,
        problem.env.epochs_per_stage,
        flag_fraction * 100.0
    );

    let prover_secret = Seed::from_label("ctf-example/prover");
    let (cert, plan, store) =
        generate_full(&problem, flag_fraction, &prover_secret).expect("honest generation");
    println!(
        "prover posted {} stage hashes and flag-plan commitment {}",
        cert.stage_count(),
        &cert.plan_commitment.to_hex()[..16]
    );

    let verifier_secret = Seed::from_label("ctf-example/verifier");
    let audit_count = 4;
    let (verdict, transcript) = run_full_protocol(
        &problem,
        &cert,
        &store,
        &plan,
        &verifier_secret,
        audit_count,
        flag_fraction,
    )
    .expect("protocol run");

    println!("\ntranscript:");
    for message in &transcript {
        match message {
            Message::CertPosted { t, .. } => println!("  prover   -> certificate for {t} stages"),
            Message::StagesRequested { t_ve } => println!("  verifier -> audit stages {t_ve:?}"),
            Message::WeightsRevealed { pairs } => {
                println!("  prover   -> {} checkpoint pairs", pairs.len())
            }
            Message::VerdictsPosted { verdicts } => {
                let codes: Vec<u8> = verdicts.iter().map(|v| v.code).collect();
                println!("  verifier -> stage verdicts {codes:?}");
            }
            Message::FlagPlanRevealed { .. } => println!("  prover   -> flag plan revealed"),
            Message::FinalVerdict { verdict } => println!(
                "  verifier -> {}",
                if verdict.is_success() { "success" } else { "fail" }
            ),
        }
    }

    println!(
        "\nverdict: flags found {:?}, cost {} stage re-trainings ({} single, {} double)",
        verdict.flags_found(),
        verdict.probes_single + 2 * verdict.probes_double,
        verdict.probes_single,
        verdict.probes_double,
    );
    assert!(verdict.is_success());
}
