//! The basic mechanism (trusted verifier): certificate generation, an
//! honest audit, and what happens when a revealed checkpoint is tampered
//! with after posting.
//!
//! ```bash
//! cargo run -p pol --example basic_protocol
//! ```

use pol::certificate::generate_basic;
use pol::prng::Seed;
use pol::training::{Dataset, Hyper, InitRule, LossId, ModelId, Weights};
use pol::verification::{run_basic_protocol, select_stages, verify_basic};
use pol::Problem;

fn main() {
    let problem = Problem {
        data: Dataset::synthetic_linear(&Seed::from_label("basic-example/data"), 4, 32)
            .expect("fixture dataset"),
        env: Hyper {
            learning_rate: 0.05,
            batch_size: 8,
            epochs: 16,
            epochs_per_stage: 2,
            model: ModelId::Linear,
            loss: LossId::SquaredError,
            init: InitRule::Zeros,
        },
        root_seed: Seed::from_label("basic-example/root"),
    };
    let (cert, store) = generate_basic(&problem).expect("honest generation");
    println!(
        "certificate: {} stage hashes, first = {}",
        cert.stage_count(),
        &cert.stage_hashes[0].to_hex()[..16]
    );

    let secret = Seed::from_label("basic-example/verifier");
    let verdict = run_basic_protocol(&problem, &cert, &store, &secret, 3).expect("protocol run");
    println!(
        "honest audit of stages {:?}: {}",
        verdict.audited,
        if verdict.is_success() { "success" } else { "fail" }
    );

    // tamper with one revealed checkpoint and watch the hash check trip
    let request = select_stages(problem.stage_count(), 3, &secret).expect("selection");
    let mut reveals: Vec<(Weights, Weights)> = request
        .stages()
        .iter()
        .map(|&t| store.reveal(t))
        .collect();
    let mut bytes = reveals[1].1.to_bytes();
    bytes[0] ^= 1;
    reveals[1].1 = Weights::from_bytes(&bytes).expect("still finite");
    let verdict = verify_basic(&problem, &cert, &request, &reveals).expect("audit runs");
    println!("tampered reveal: {:?}", verdict.outcome);
    assert!(!verdict.is_success());
}
