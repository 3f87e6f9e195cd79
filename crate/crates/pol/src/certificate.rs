//! Prover side of the protocol: certificate generation and the flag-plan
//! commitment, plus an adversary harness that fabricates cheating
//! certificates for tests and simulations.
//!
//! A certificate is the list of per-stage weight hashes `c_1..c_T`. In the
//! full mechanism the prover also commits to a secret permutation that
//! designates a fixed, evenly split set of flag stages — safe deviations
//! trained under alternate seeds that the verifier is paid to discover.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest as Sha2Digest, Sha256};
use thiserror::Error;

use crate::prng::{derive_stage_seed, shuffle, PrngError, Seed, StageKind};
use crate::training::{train_epoch, train_stage, Dataset, Hyper, TrainingError, Weights};

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("flag count {0} is not a positive even integer")]
    FlagCountNotPositiveEven(f64),
    #[error("flag fraction {0} must be below 1/2")]
    FlagFractionTooLarge(f64),
    #[error("stage {0} out of range")]
    StageOutOfRange(usize),
    #[error("cheat set needs {needed} {kind} slots but only {available} are free")]
    NotEnoughSlots {
        needed: usize,
        available: usize,
        kind: &'static str,
    },
    #[error("checkpoint file corrupt: {0}")]
    BadCheckpointFile(&'static str),
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error(transparent)]
    Prng(#[from] PrngError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 32-byte SHA-256 digest, hex-encoded on the wire.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        Digest(hasher.finalize().into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(text: &str) -> Result<Self, hex::FromHexError> {
        let raw = hex::decode(text)?;
        let bytes: [u8; 32] = raw
            .try_into()
            .map_err(|_| hex::FromHexError::InvalidStringLength)?;
        Ok(Digest(bytes))
    }
}

impl std::fmt::Debug for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Digest::from_hex(&text).map_err(serde::de::Error::custom)
    }
}

/// The assigned task: dataset, training environment and the public root
/// seed all stage seeds derive from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Problem {
    pub data: Dataset,
    pub env: Hyper,
    #[serde(rename = "phi")]
    pub root_seed: Seed,
}

impl Problem {
    pub fn validate(&self) -> Result<(), CertificateError> {
        self.env.validate(self.data.len())?;
        Ok(())
    }

    pub fn stage_count(&self) -> usize {
        self.env.stage_count()
    }

    /// Seed for stage `t` under the given designation.
    pub fn stage_seed(&self, stage: usize, kind: StageKind) -> Result<Seed, CertificateError> {
        Ok(derive_stage_seed(&self.root_seed, stage as u64, kind)?)
    }
}

/// Certificate for the basic mechanism: one weight hash per stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicCertificate {
    pub stage_hashes: Vec<Digest>,
}

impl BasicCertificate {
    pub fn stage_count(&self) -> usize {
        self.stage_hashes.len()
    }
}

/// Certificate for the full mechanism: stage hashes plus the flag-plan
/// commitment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullCertificate {
    pub stage_hashes: Vec<Digest>,
    pub plan_commitment: Digest,
}

impl FullCertificate {
    pub fn stage_count(&self) -> usize {
        self.stage_hashes.len()
    }

    pub fn basic(&self) -> BasicCertificate {
        BasicCertificate {
            stage_hashes: self.stage_hashes.clone(),
        }
    }
}

/// On-disk certificate: JSON `{T, c, H}` — stage count, hashes in stage
/// order, and the flag-plan commitment (null for the basic mechanism).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateFile {
    #[serde(rename = "T")]
    pub t: usize,
    pub c: Vec<Digest>,
    #[serde(rename = "H")]
    pub h: Option<Digest>,
}

impl CertificateFile {
    pub fn from_basic(cert: &BasicCertificate) -> Self {
        CertificateFile {
            t: cert.stage_count(),
            c: cert.stage_hashes.clone(),
            h: None,
        }
    }

    pub fn from_full(cert: &FullCertificate) -> Self {
        CertificateFile {
            t: cert.stage_count(),
            c: cert.stage_hashes.clone(),
            h: Some(cert.plan_commitment),
        }
    }

    pub fn parse(json: &str) -> Result<Self, serde_json::Error> {
        let file: CertificateFile = serde_json::from_str(json)?;
        if file.c.len() != file.t {
            return Err(serde::de::Error::custom("stage count does not match hashes"));
        }
        Ok(file)
    }

    pub fn into_basic(self) -> BasicCertificate {
        BasicCertificate {
            stage_hashes: self.c,
        }
    }

    pub fn into_full(self) -> Option<FullCertificate> {
        Some(FullCertificate {
            stage_hashes: self.c,
            plan_commitment: self.h?,
        })
    }
}

/// The prover's secret flag plan: a permutation of `{1..T}` whose low values
/// mark flag stages. Revealed only after the verifier posts verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagPlan {
    pub sigma: Vec<usize>,
    pub prover_secret: Seed,
}

impl FlagPlan {
    /// Commitment to the permutation: SHA-256 over the entries serialized
    /// as consecutive LE64 values.
    pub fn commitment(&self) -> Digest {
        hash_permutation(&self.sigma)
    }

    pub fn stage_count(&self) -> usize {
        self.sigma.len()
    }
}

pub fn hash_permutation(sigma: &[usize]) -> Digest {
    let mut bytes = Vec::with_capacity(sigma.len() * 8);
    for &v in sigma {
        bytes.extend_from_slice(&(v as u64).to_le_bytes());
    }
    Digest::of_bytes(&bytes)
}

/// All saved checkpoints `W_0..W_T`. `W_0` follows the environment's
/// initialization rule; the rest are the stage outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointStore {
    weights: Vec<Weights>,
}

impl CheckpointStore {
    pub fn new(weights: Vec<Weights>) -> Self {
        CheckpointStore { weights }
    }

    /// Checkpoint after stage `t` (so index 0 is the initialization).
    pub fn checkpoint(&self, stage: usize) -> &Weights {
        &self.weights[stage]
    }

    pub fn stage_count(&self) -> usize {
        self.weights.len().saturating_sub(1)
    }

    /// The pair `(W_{t-1}, W_t)` a prover reveals when stage `t` is audited.
    pub fn reveal(&self, stage: usize) -> (Weights, Weights) {
        (
            self.weights[stage - 1].clone(),
            self.weights[stage].clone(),
        )
    }

    pub fn final_weights(&self) -> &Weights {
        self.weights.last().expect("store holds W_0..W_T")
    }

    /// Binary layout: LE64 record count, then the records in the canonical
    /// weight byte form. All records share one length, recovered from the
    /// file size.
    pub fn write_to(&self, mut out: impl Write) -> Result<(), CertificateError> {
        out.write_all(&(self.weights.len() as u64).to_le_bytes())?;
        for w in &self.weights {
            out.write_all(&w.to_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut input: impl Read) -> Result<Self, CertificateError> {
        let mut header = [0u8; 8];
        input.read_exact(&mut header)?;
        let count = u64::from_le_bytes(header) as usize;
        let mut body = Vec::new();
        input.read_to_end(&mut body)?;
        if count == 0 || !body.len().is_multiple_of(count) || !(body.len() / count).is_multiple_of(8) {
            return Err(CertificateError::BadCheckpointFile(
                "body length not divisible into records",
            ));
        }
        let record = body.len() / count;
        let weights = body
            .chunks_exact(record)
            .map(Weights::from_bytes)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CheckpointStore { weights })
    }
}

/// SHA-256 of the canonical little-endian byte serialization of a weight
/// vector.
pub fn hash_weights(weights: &Weights) -> Digest {
    Digest::of_bytes(&weights.to_bytes())
}

/// Certificate generation for the basic mechanism: every stage trained
/// under its primary seed, hashes posted in order.
pub fn generate_basic(
    problem: &Problem,
) -> Result<(BasicCertificate, CheckpointStore), CertificateError> {
    problem.validate()?;
    let plan = StagePlan::all_normal(problem.stage_count());
    let (hashes, store) = run_stages(problem, &plan)?;
    Ok((BasicCertificate { stage_hashes: hashes }, store))
}

/// Validated flag parameters: requires the flag count `eta * T` to be a
/// positive even integer (so the two flag designations split evenly) and
/// the fraction to stay below one half (so the primary seed remains the
/// majority designation a verifier probes first).
pub fn flag_count(flag_fraction: f64, stage_count: usize) -> Result<usize, CertificateError> {
    let raw = flag_fraction * stage_count as f64;
    let rounded = raw.round();
    if (raw - rounded).abs() > 1e-9 || rounded <= 0.0 || !(rounded as u64).is_multiple_of(2) {
        return Err(CertificateError::FlagCountNotPositiveEven(raw));
    }
    if flag_fraction >= 0.5 {
        return Err(CertificateError::FlagFractionTooLarge(flag_fraction));
    }
    Ok(rounded as usize)
}

/// Draw the secret flag plan and its commitment. The permutation comes from
/// the prover's own secret, so flag positions are unpredictable to the
/// verifier until revealed.
pub fn make_flag_plan(
    stage_count: usize,
    flag_fraction: f64,
    prover_secret: &Seed,
) -> Result<(FlagPlan, Digest), CertificateError> {
    flag_count(flag_fraction, stage_count)?;
    let sigma = shuffle(prover_secret, stage_count)?;
    let plan = FlagPlan {
        sigma,
        prover_secret: *prover_secret,
    };
    let commitment = plan.commitment();
    Ok((plan, commitment))
}

/// Designation of stage `t` under a flag plan: positions whose permutation
/// value falls at or below the flag count are flags, odd values as the
/// first kind and even as the second; everything else is normal.
pub fn stage_designation(
    plan: &FlagPlan,
    stage: usize,
    flag_fraction: f64,
    stage_count: usize,
) -> Result<StageKind, CertificateError> {
    if stage == 0 || stage > stage_count || stage > plan.sigma.len() {
        return Err(CertificateError::StageOutOfRange(stage));
    }
    let flags = flag_count(flag_fraction, stage_count)?;
    let value = plan.sigma[stage - 1];
    Ok(if value <= flags {
        if value % 2 == 1 {
            StageKind::FlagOne
        } else {
            StageKind::FlagTwo
        }
    } else {
        StageKind::Normal
    })
}

/// Certificate generation for the full mechanism: commit to the flag plan,
/// then train each stage under the seed its designation selects.
pub fn generate_full(
    problem: &Problem,
    flag_fraction: f64,
    prover_secret: &Seed,
) -> Result<(FullCertificate, FlagPlan, CheckpointStore), CertificateError> {
    problem.validate()?;
    let t = problem.stage_count();
    let (plan, commitment) = make_flag_plan(t, flag_fraction, prover_secret)?;
    let stage_plan = StagePlan::from_designations(problem, &plan, flag_fraction)?;
    let (hashes, store) = run_stages(problem, &stage_plan)?;
    Ok((
        FullCertificate {
            stage_hashes: hashes,
            plan_commitment: commitment,
        },
        plan,
        store,
    ))
}

/// How a dishonest stage's checkpoint is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FabricationRule {
    /// Train a single epoch under the claimed seed instead of the full
    /// stage — structurally plausible weights at a fraction of the cost.
    OneEpoch,
    /// Copy the previous checkpoint unchanged (zero training cost).
    SkipStage,
}

/// Where the cheater hides a dishonest stage in the flag plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disguise {
    /// Claim the stage is normal. A verifier probing the primary seed
    /// always exposes the mismatch, so a verified cheat is caught outright.
    AsNormal,
    /// Claim the stage is a flag. The verifier's coin picks one of the two
    /// flag seeds to probe, so a verified cheat survives with chance 1/2.
    AsFlag,
}

/// Adversary description: which stages to fake, how to fake them, and how
/// to disguise them in the committed plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheatSpec {
    pub cheat_set: BTreeSet<usize>,
    pub disguise: Disguise,
    pub fabrication: FabricationRule,
}

impl CheatSpec {
    pub fn new(cheat_set: impl IntoIterator<Item = usize>, disguise: Disguise) -> Self {
        CheatSpec {
            cheat_set: cheat_set.into_iter().collect(),
            disguise,
            fabrication: FabricationRule::OneEpoch,
        }
    }
}

/// Full-mechanism adversary harness. Produces a structurally correct
/// certificate whose `cheat_set` stages are fabricated instead of trained,
/// with the committed permutation rearranged so every cheating stage
/// carries the requested disguise.
pub fn generate_cheating(
    problem: &Problem,
    flag_fraction: f64,
    prover_secret: &Seed,
    cheat: &CheatSpec,
) -> Result<(FullCertificate, FlagPlan, CheckpointStore), CertificateError> {
    problem.validate()?;
    let t = problem.stage_count();
    for &stage in &cheat.cheat_set {
        if stage == 0 || stage > t {
            return Err(CertificateError::StageOutOfRange(stage));
        }
    }
    let (mut plan, _) = make_flag_plan(t, flag_fraction, prover_secret)?;
    let flags = flag_count(flag_fraction, t)?;
    rearrange_plan(&mut plan.sigma, flags, &cheat.cheat_set, cheat.disguise)?;
    let commitment = plan.commitment();

    let mut stage_plan = StagePlan::from_designations(problem, &plan, flag_fraction)?;
    for &stage in &cheat.cheat_set {
        stage_plan.actions[stage - 1] = StageAction::Fabricate(cheat.fabrication);
    }
    let (hashes, store) = run_stages(problem, &stage_plan)?;
    Ok((
        FullCertificate {
            stage_hashes: hashes,
            plan_commitment: commitment,
        },
        plan,
        store,
    ))
}

/// Basic-mechanism adversary: no flag plan, cheating stages fabricated.
pub fn generate_cheating_basic(
    problem: &Problem,
    cheat: &CheatSpec,
) -> Result<(BasicCertificate, CheckpointStore), CertificateError> {
    problem.validate()?;
    let t = problem.stage_count();
    for &stage in &cheat.cheat_set {
        if stage == 0 || stage > t {
            return Err(CertificateError::StageOutOfRange(stage));
        }
    }
    let mut stage_plan = StagePlan::all_normal(t);
    for &stage in &cheat.cheat_set {
        stage_plan.actions[stage - 1] = StageAction::Fabricate(cheat.fabrication);
    }
    let (hashes, store) = run_stages(problem, &stage_plan)?;
    Ok((BasicCertificate { stage_hashes: hashes }, store))
}

/// Swap permutation entries so every cheating stage lands in (or out of)
/// the flag range, taking swap partners from honest stages in ascending
/// order. Parity of the landed value decides which flag kind the cheat
/// claims.
fn rearrange_plan(
    sigma: &mut [usize],
    flags: usize,
    cheat_set: &BTreeSet<usize>,
    disguise: Disguise,
) -> Result<(), CertificateError> {
    let want_flag = matches!(disguise, Disguise::AsFlag);
    let misplaced: Vec<usize> = cheat_set
        .iter()
        .copied()
        .filter(|&stage| (sigma[stage - 1] <= flags) != want_flag)
        .collect();
    let mut donors: Vec<usize> = (1..=sigma.len())
        .filter(|stage| !cheat_set.contains(stage))
        .filter(|&stage| (sigma[stage - 1] <= flags) == want_flag)
        .collect();
    if donors.len() < misplaced.len() {
        return Err(CertificateError::NotEnoughSlots {
            needed: misplaced.len(),
            available: donors.len(),
            kind: if want_flag { "flag" } else { "normal" },
        });
    }
    donors.truncate(misplaced.len());
    for (stage, donor) in misplaced.into_iter().zip(donors) {
        sigma.swap(stage - 1, donor - 1);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
enum StageAction {
    Train(StageKind),
    Fabricate(FabricationRule),
}

#[derive(Debug, Clone)]
struct StagePlan {
    actions: Vec<StageAction>,
}

impl StagePlan {
    fn all_normal(stage_count: usize) -> Self {
        StagePlan {
            actions: vec![StageAction::Train(StageKind::Normal); stage_count],
        }
    }

    fn from_designations(
        problem: &Problem,
        plan: &FlagPlan,
        flag_fraction: f64,
    ) -> Result<Self, CertificateError> {
        let t = problem.stage_count();
        let actions = (1..=t)
            .map(|stage| {
                stage_designation(plan, stage, flag_fraction, t).map(StageAction::Train)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(StagePlan { actions })
    }
}

/// Sequential stage loop shared by the honest and cheating generators.
fn run_stages(
    problem: &Problem,
    plan: &StagePlan,
) -> Result<(Vec<Digest>, CheckpointStore), CertificateError> {
    let data = &problem.data;
    let hyper = &problem.env;
    let mut checkpoints = vec![hyper.initial_weights(data.dim())];
    let mut hashes = Vec::with_capacity(plan.actions.len());
    for (index, action) in plan.actions.iter().enumerate() {
        let stage = index + 1;
        let prev = checkpoints.last().expect("store starts with W_0");
        let next = match action {
            StageAction::Train(kind) => {
                let seed = problem.stage_seed(stage, *kind)?;
                train_stage(prev, &seed, hyper, data)?
            }
            StageAction::Fabricate(rule) => fabricate_stage(problem, prev, stage, *rule)?,
        };
        hashes.push(hash_weights(&next));
        checkpoints.push(next);
    }
    Ok((hashes, CheckpointStore::new(checkpoints)))
}

/// Dishonest stage output. The one-epoch rule degenerates to a skip when a
/// stage is a single epoch, since one honest epoch would just be the honest
/// stage.
fn fabricate_stage(
    problem: &Problem,
    prev: &Weights,
    stage: usize,
    rule: FabricationRule,
) -> Result<Weights, CertificateError> {
    match rule {
        FabricationRule::SkipStage => Ok(prev.clone()),
        FabricationRule::OneEpoch => {
            if problem.env.epochs_per_stage < 2 {
                return Ok(prev.clone());
            }
            let seed = problem.stage_seed(stage, StageKind::Normal)?;
            let batches = crate::prng::draw_batches(
                &seed,
                1,
                problem.data.len(),
                problem.env.batch_size,
            )?;
            Ok(train_epoch(
                prev,
                &batches,
                problem.env.learning_rate,
                &problem.data,
            )?)
        }
    }
}
