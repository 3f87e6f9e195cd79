//! A deterministic proof-of-learning protocol engine with a
//! capture-the-flag verification game and an incentive-analysis toolkit.
//!
//! A prover trains a toy SGD task in stages, each stage driven by a
//! designated seed, and posts a hash of the weights after every stage. A
//! verifier audits a random subset of stages by re-training them — the
//! computation is bit-exact, so any deviation shows up as a hash mismatch.
//! In the full mechanism the prover also commits to a secret set of *flag*
//! stages (safe deviations trained under alternate seeds); finding flags
//! pays the verifier, which is what makes lazy verification a losing
//! strategy. Alongside the protocol, the crate evaluates the closed-form
//! incentive conditions (individual rationality, incentive security with
//! and without penalty, verifier incentive security) and runs Monte-Carlo
//! strategy experiments over the protocol's combinatorial layer.
//!
//! Module map:
//!
//! - [`prng`] — seeds, counter-mode uniform streams, shuffles, batch draws
//! - [`training`] — the deterministic SGD engine and the toy linear task
//! - [`certificate`] — prover: certificates, flag plans, adversary harness
//! - [`verification`] — verifier: audits, probes, session state machine
//! - [`incentives`] — the closed-form economics and theorem thresholds
//! - [`simulation`] — Monte-Carlo strategy experiments, no SGD involved
//! - [`cli`] — the `pol` binary's argument handling and orchestration
//!
//! Each major capability has a runnable example under `examples/`; start
//! with `capture_the_flag` for the end-to-end protocol.

pub mod certificate;
pub mod cli;
pub mod incentives;
pub mod prng;
pub mod simulation;
pub mod training;
pub mod verification;

pub use certificate::{
    generate_basic, generate_full, BasicCertificate, CheckpointStore, Digest, FlagPlan,
    FullCertificate, Problem,
};
pub use prng::{Seed, StageKind};
pub use training::{Dataset, Hyper, Weights};
pub use verification::{run_basic_protocol, run_full_protocol, Verdict};
