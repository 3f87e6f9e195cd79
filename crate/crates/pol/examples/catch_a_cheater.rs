//! The adversary harness in action: a prover fabricates one stage and
//! hides it either as a normal stage or as a claimed flag. Disguised as
//! normal, an audit of that stage always exposes it; disguised as a flag,
//! the verifier's coin decides which flag seed gets probed, so the cheat
//! survives about half of the audits that touch it.
//!
//! ```bash
//! cargo run -p pol --example catch_a_cheater
//! ```

use pol::certificate::{generate_cheating, CheatSpec, Disguise};
use pol::prng::Seed;
use pol::training::{Dataset, Hyper, InitRule, LossId, ModelId};
use pol::verification::{run_full_protocol, select_stages};
use pol::Problem;

fn main() {
    let problem = Problem {
        data: Dataset::synthetic_linear(&Seed::from_label("cheater-example/data"), 4, 32)
            .expect("fixture dataset"),
        env: Hyper {
            learning_rate: 0.05,
            batch_size: 8,
            epochs: 20,
            epochs_per_stage: 2,
            model: ModelId::Linear,
            loss: LossId::SquaredError,
            init: InitRule::Zeros,
        },
        root_seed: Seed::from_label("cheater-example/root"),
    };
    let stage_count = problem.stage_count();
    let flag_fraction = 0.4;
    let cheat_stage = 6;
    let audit_count = 4;

    for disguise in [Disguise::AsNormal, Disguise::AsFlag] {
        let cheat = CheatSpec::new([cheat_stage], disguise);
        let (cert, plan, store) = generate_cheating(
            &problem,
            flag_fraction,
            &Seed::from_label("cheater-example/prover"),
            &cheat,
        )
        .expect("adversary generation");

        let mut audited = 0usize;
        let mut caught = 0usize;
        let mut tag = 0u64;
        while audited < 2_000 {
            let secret = Seed::from_label("cheater-example/verifier").derive(tag);
            tag += 1;
            // condition on the fabricated stage actually being audited
            if !select_stages(stage_count, audit_count, &secret)
                .expect("selection")
                .stages()
                .contains(&cheat_stage)
            {
                continue;
            }
            audited += 1;
            let (verdict, _) = run_full_protocol(
                &problem,
                &cert,
                &store,
                &plan,
                &secret,
                audit_count,
                flag_fraction,
            )
            .expect("protocol run");
            if !verdict.is_success() {
                caught += 1;
            }
        }
        println!(
            "{disguise:?}: fabricated stage {cheat_stage} audited {audited} times, caught {caught} ({:.1}%)",
            100.0 * caught as f64 / audited as f64
        );
    }
}
