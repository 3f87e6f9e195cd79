//! Verifier side of the protocol: stage selection, re-execution checks for
//! the basic mechanism, the capture-the-flag checks for the full mechanism,
//! and the message-ordered session that binds them together.
//!
//! The full-mechanism exchange is strictly ordered: the certificate (with
//! the flag-plan commitment) is posted first, then the verifier requests
//! stages, the prover reveals checkpoint pairs, the verifier posts its
//! per-stage verdicts, and only then is the flag plan revealed and checked
//! against the commitment. The session state machine rejects any attempt to
//! consume the plan early, so the commitment cannot be weakened by a
//! reordered transport.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificate::{
    hash_permutation, hash_weights, BasicCertificate, CertificateError, CheckpointStore, Digest,
    FlagPlan, FullCertificate, Problem,
};
use crate::prng::{raw_u64, sample_without_replacement, PrngError, Seed, StageKind};
use crate::training::{train_stage, TrainingError, Weights};

/// Counter offset for per-stage verifier coins, disjoint from the counters
/// used by stage selection.
const COIN_COUNTER_BASE: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum VerificationError {
    #[error("audit count {requested} out of range 1..={stages}")]
    AuditCountOutOfRange { requested: usize, stages: usize },
    #[error("revealed pairs misaligned: expected {expected}, got {got}")]
    MisalignedReveals { expected: usize, got: usize },
    #[error("certificate covers {cert} stages but the problem has {problem}")]
    StageCountMismatch { cert: usize, problem: usize },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Prng(#[from] PrngError),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SessionError {
    #[error("message `{action}` not allowed in state `{state}`")]
    OrderViolation {
        state: &'static str,
        action: &'static str,
    },
}

/// The sorted set of stages the verifier audits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationRequest {
    stages: Vec<usize>,
}

impl VerificationRequest {
    pub fn new(stages: Vec<usize>, stage_count: usize) -> Result<Self, VerificationError> {
        if stages.is_empty()
            || stages.len() > stage_count
            || stages.windows(2).any(|w| w[0] >= w[1])
            || stages.iter().any(|&t| t == 0 || t > stage_count)
        {
            return Err(VerificationError::AuditCountOutOfRange {
                requested: stages.len(),
                stages: stage_count,
            });
        }
        Ok(VerificationRequest { stages })
    }

    pub fn stages(&self) -> &[usize] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

/// Uniform audit sample drawn from the verifier's own secret, independent
/// of the problem's root seed.
pub fn select_stages(
    stage_count: usize,
    audit_count: usize,
    verifier_secret: &Seed,
) -> Result<VerificationRequest, VerificationError> {
    let stages = sample_without_replacement(verifier_secret, stage_count, audit_count).map_err(
        |_| VerificationError::AuditCountOutOfRange {
            requested: audit_count,
            stages: stage_count,
        },
    )?;
    Ok(VerificationRequest { stages })
}

/// The verifier's coin for one stage, taken from the secret's stream at a
/// counter derived from the stage index so a full verification replays
/// bit-identically.
pub fn stage_coin(verifier_secret: &Seed, stage: usize) -> bool {
    raw_u64(verifier_secret, COIN_COUNTER_BASE + stage as u64) & 1 == 1
}

/// Per-stage verdict in the full mechanism: 0 normal, 1 or 2 for the flag
/// kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageVerdict {
    pub stage: usize,
    pub code: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "stage")]
pub enum FailReason {
    /// A revealed checkpoint does not match its posted hash.
    InvalidWeights(usize),
    /// Re-execution (or verdict/plan consistency) exposed the stage.
    ErrorInStage(usize),
    /// The revealed flag plan does not hash to the posted commitment.
    InvalidFlagCommitment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success { flags_found: Vec<usize> },
    Fail(FailReason),
}

/// Result of one verification run, with enough probe accounting to price
/// the verifier's work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    /// The audited stages.
    pub audited: Vec<usize>,
    /// Stages that needed a single re-training (primary seed matched).
    pub probes_single: usize,
    /// Stages that needed a second re-training under a flag seed.
    pub probes_double: usize,
}

impl Verdict {
    pub fn is_success(&self) -> bool {
        matches!(self.outcome, Outcome::Success { .. })
    }

    pub fn flags_found(&self) -> &[usize] {
        match &self.outcome {
            Outcome::Success { flags_found } => flags_found,
            Outcome::Fail(_) => &[],
        }
    }

    /// Number of flags discovered (`u` in the reward rule).
    pub fn flag_count(&self) -> usize {
        self.flags_found().len()
    }

    /// Number of confirmed dishonest stages. Success implies zero;
    /// a re-execution or consistency failure confirms one.
    pub fn dishonest_count(&self) -> usize {
        match &self.outcome {
            Outcome::Success { .. } | Outcome::Fail(FailReason::InvalidFlagCommitment) => 0,
            Outcome::Fail(FailReason::InvalidWeights(_))
            | Outcome::Fail(FailReason::ErrorInStage(_)) => 1,
        }
    }

    /// Re-training cost of this run given the honest total training cost.
    pub fn cost(&self, total_cost: f64, stage_count: usize) -> f64 {
        verification_cost(self.probes_single, self.probes_double, total_cost, stage_count)
    }
}

/// Re-training cost: `single` stages probed once plus `double` stages
/// probed twice, each probe costing `total_cost / stage_count`.
pub fn verification_cost(
    single: usize,
    double: usize,
    total_cost: f64,
    stage_count: usize,
) -> f64 {
    (single + 2 * double) as f64 * total_cost / stage_count as f64
}

/// Verifier reward rule: a fixed bounty if any dishonest stage was
/// confirmed, plus a per-flag reward.
pub fn verifier_reward(flags: usize, dishonest: usize, detect_reward: f64, flag_reward: f64) -> f64 {
    let bounty = if dishonest > 0 { detect_reward } else { 0.0 };
    bounty + flag_reward * flags as f64
}

/// On-disk verdict report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictFile {
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<usize>,
    pub t_ve: Vec<usize>,
    pub flags_found: Vec<usize>,
    pub u: usize,
    pub d: usize,
    pub cost: f64,
}

impl VerdictFile {
    pub fn from_verdict(verdict: &Verdict, total_cost: f64, stage_count: usize) -> Self {
        let (reason, stage) = match &verdict.outcome {
            Outcome::Success { .. } => (None, None),
            Outcome::Fail(FailReason::InvalidWeights(t)) => {
                (Some("invalid_weights".to_string()), Some(*t))
            }
            Outcome::Fail(FailReason::ErrorInStage(t)) => {
                (Some("error_in_stage".to_string()), Some(*t))
            }
            Outcome::Fail(FailReason::InvalidFlagCommitment) => {
                (Some("invalid_flag_commitment".to_string()), None)
            }
        };
        VerdictFile {
            outcome: if verdict.is_success() { "success" } else { "fail" }.to_string(),
            reason,
            stage,
            t_ve: verdict.audited.clone(),
            flags_found: verdict.flags_found().to_vec(),
            u: verdict.flag_count(),
            d: verdict.dishonest_count(),
            cost: verdict.cost(total_cost, stage_count),
        }
    }
}

/// One message of the full-mechanism exchange, in posting order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "message")]
pub enum Message {
    CertPosted {
        t: usize,
        c: Vec<Digest>,
        h: Option<Digest>,
    },
    StagesRequested {
        t_ve: Vec<usize>,
    },
    WeightsRevealed {
        pairs: Vec<(Weights, Weights)>,
    },
    VerdictsPosted {
        verdicts: Vec<StageVerdict>,
    },
    FlagPlanRevealed {
        sigma: Vec<usize>,
    },
    FinalVerdict {
        verdict: Verdict,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SessionState {
    Start,
    CertPosted,
    StagesRequested,
    WeightsRevealed,
    VerdictsPosted,
    FlagPlanRevealed,
    Final,
}

impl SessionState {
    fn name(self) -> &'static str {
        match self {
            SessionState::Start => "start",
            SessionState::CertPosted => "cert_posted",
            SessionState::StagesRequested => "stages_requested",
            SessionState::WeightsRevealed => "weights_revealed",
            SessionState::VerdictsPosted => "verdicts_posted",
            SessionState::FlagPlanRevealed => "flag_plan_revealed",
            SessionState::Final => "final",
        }
    }
}

/// Message-ordered protocol session. Transitions happen only in posting
/// order; the one shortcut allowed is finalizing early with a failure
/// verdict once the certificate is posted (a verifier aborting on a bad
/// reveal). The flag plan is accepted only after verdicts are posted.
#[derive(Debug)]
pub struct ProtocolSession {
    state: SessionState,
    transcript: Vec<Message>,
}

impl Default for ProtocolSession {
    fn default() -> Self {
        Self::new()
    }
}

impl ProtocolSession {
    pub fn new() -> Self {
        ProtocolSession {
            state: SessionState::Start,
            transcript: Vec::new(),
        }
    }

    pub fn transcript(&self) -> &[Message] {
        &self.transcript
    }

    pub fn is_final(&self) -> bool {
        self.state == SessionState::Final
    }

    fn step(
        &mut self,
        expected: SessionState,
        next: SessionState,
        message: Message,
    ) -> Result<(), SessionError> {
        if self.state != expected {
            return Err(SessionError::OrderViolation {
                state: self.state.name(),
                action: next.name(),
            });
        }
        self.state = next;
        self.transcript.push(message);
        Ok(())
    }

    pub fn post_certificate(&mut self, cert: &FullCertificate) -> Result<(), SessionError> {
        self.step(
            SessionState::Start,
            SessionState::CertPosted,
            Message::CertPosted {
                t: cert.stage_count(),
                c: cert.stage_hashes.clone(),
                h: Some(cert.plan_commitment),
            },
        )
    }

    pub fn request_stages(&mut self, request: &VerificationRequest) -> Result<(), SessionError> {
        self.step(
            SessionState::CertPosted,
            SessionState::StagesRequested,
            Message::StagesRequested {
                t_ve: request.stages().to_vec(),
            },
        )
    }

    pub fn reveal_weights(&mut self, pairs: &[(Weights, Weights)]) -> Result<(), SessionError> {
        self.step(
            SessionState::StagesRequested,
            SessionState::WeightsRevealed,
            Message::WeightsRevealed {
                pairs: pairs.to_vec(),
            },
        )
    }

    pub fn post_verdicts(&mut self, verdicts: &[StageVerdict]) -> Result<(), SessionError> {
        self.step(
            SessionState::WeightsRevealed,
            SessionState::VerdictsPosted,
            Message::VerdictsPosted {
                verdicts: verdicts.to_vec(),
            },
        )
    }

    pub fn reveal_flag_plan(&mut self, sigma: &[usize]) -> Result<(), SessionError> {
        self.step(
            SessionState::VerdictsPosted,
            SessionState::FlagPlanRevealed,
            Message::FlagPlanRevealed {
                sigma: sigma.to_vec(),
            },
        )
    }

    pub fn finalize(&mut self, verdict: Verdict) -> Result<(), SessionError> {
        let allowed = matches!(
            self.state,
            SessionState::CertPosted
                | SessionState::StagesRequested
                | SessionState::WeightsRevealed
                | SessionState::FlagPlanRevealed
        );
        if !allowed || (self.state != SessionState::FlagPlanRevealed && verdict.is_success()) {
            return Err(SessionError::OrderViolation {
                state: self.state.name(),
                action: "final",
            });
        }
        self.state = SessionState::Final;
        self.transcript.push(Message::FinalVerdict { verdict });
        Ok(())
    }
}

/// Hash checks shared by both mechanisms. For the first stage the left
/// checkpoint is not covered by the certificate, so the reveal is compared
/// against the environment's deterministic initialization instead.
fn check_revealed_pair(
    problem: &Problem,
    stage_hashes: &[Digest],
    stage: usize,
    prev: &Weights,
    cur: &Weights,
) -> Option<FailReason> {
    let left_ok = if stage == 1 {
        prev.bitwise_eq(&problem.env.initial_weights(problem.data.dim()))
    } else {
        hash_weights(prev) == stage_hashes[stage - 2]
    };
    if !left_ok || hash_weights(cur) != stage_hashes[stage - 1] {
        return Some(FailReason::InvalidWeights(stage));
    }
    None
}

/// Basic-mechanism verification: hash checks plus exact re-execution of
/// each audited stage under its primary seed. `reveals` must align with the
/// request, one `(W_{t-1}, W_t)` pair per audited stage in order.
pub fn verify_basic(
    problem: &Problem,
    cert: &BasicCertificate,
    request: &VerificationRequest,
    reveals: &[(Weights, Weights)],
) -> Result<Verdict, VerificationError> {
    problem.validate()?;
    if cert.stage_count() != problem.stage_count() {
        return Err(VerificationError::StageCountMismatch {
            cert: cert.stage_count(),
            problem: problem.stage_count(),
        });
    }
    if reveals.len() != request.len() {
        return Err(VerificationError::MisalignedReveals {
            expected: request.len(),
            got: reveals.len(),
        });
    }

    let mut probes = 0usize;
    for (&stage, (prev, cur)) in request.stages().iter().zip(reveals) {
        if let Some(reason) = check_revealed_pair(problem, &cert.stage_hashes, stage, prev, cur) {
            return Ok(fail(reason, request, probes, 0));
        }
        let seed = problem.stage_seed(stage, StageKind::Normal)?;
        let retrained = train_stage(prev, &seed, &problem.env, &problem.data)?;
        probes += 1;
        if !retrained.bitwise_eq(cur) {
            return Ok(fail(FailReason::ErrorInStage(stage), request, probes, 0));
        }
    }
    Ok(Verdict {
        outcome: Outcome::Success {
            flags_found: Vec::new(),
        },
        audited: request.stages().to_vec(),
        probes_single: probes,
        probes_double: 0,
    })
}

fn fail(reason: FailReason, request: &VerificationRequest, single: usize, double: usize) -> Verdict {
    Verdict {
        outcome: Outcome::Fail(reason),
        audited: request.stages().to_vec(),
        probes_single: single,
        probes_double: double,
    }
}

/// One full-mechanism stage probe. Re-trains under the primary seed first;
/// on a match the stage is normal. Otherwise the coin picks which flag seed
/// to re-train: a match identifies that flag, a mismatch is attributed to
/// the other flag kind (the prover is presumed to have inserted a flag;
/// whether the claim holds is settled later against the revealed plan).
pub fn probe_stage_full(
    problem: &Problem,
    prev: &Weights,
    cur: &Weights,
    stage: usize,
    coin: bool,
) -> Result<StageProbe, VerificationError> {
    let normal_seed = problem.stage_seed(stage, StageKind::Normal)?;
    let normal = train_stage(prev, &normal_seed, &problem.env, &problem.data)?;
    if normal.bitwise_eq(cur) {
        return Ok(StageProbe { code: 0, retrainings: 1 });
    }
    let (probe_kind, on_match, on_mismatch) = if coin {
        (StageKind::FlagOne, 1, 2)
    } else {
        (StageKind::FlagTwo, 2, 1)
    };
    let seed = problem.stage_seed(stage, probe_kind)?;
    let probed = train_stage(prev, &seed, &problem.env, &problem.data)?;
    let code = if probed.bitwise_eq(cur) { on_match } else { on_mismatch };
    Ok(StageProbe { code, retrainings: 2 })
}

/// Result of probing one stage: the verdict code and how many re-trainings
/// it took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageProbe {
    pub code: u8,
    pub retrainings: u8,
}

/// Full-mechanism verification, driven through the session so the message
/// order is enforced. The revealed pairs must align with the stages the
/// verifier's secret selects; the flag plan is consumed only after the
/// verdicts are posted.
#[allow(clippy::too_many_arguments)]
pub fn verify_full(
    session: &mut ProtocolSession,
    problem: &Problem,
    cert: &FullCertificate,
    reveals: &[(Weights, Weights)],
    plan: &FlagPlan,
    verifier_secret: &Seed,
    audit_count: usize,
    flag_fraction: f64,
) -> Result<Verdict, VerificationError> {
    problem.validate()?;
    let stage_count = problem.stage_count();
    if cert.stage_count() != stage_count {
        return Err(VerificationError::StageCountMismatch {
            cert: cert.stage_count(),
            problem: stage_count,
        });
    }
    let request = select_stages(stage_count, audit_count, verifier_secret)?;
    session.request_stages(&request)?;

    if reveals.len() != request.len() {
        return Err(VerificationError::MisalignedReveals {
            expected: request.len(),
            got: reveals.len(),
        });
    }
    session.reveal_weights(reveals)?;

    for (&stage, (prev, cur)) in request.stages().iter().zip(reveals) {
        if let Some(reason) = check_revealed_pair(problem, &cert.stage_hashes, stage, prev, cur) {
            let verdict = fail(reason, &request, 0, 0);
            session.finalize(verdict.clone())?;
            return Ok(verdict);
        }
    }

    let mut verdicts = Vec::with_capacity(request.len());
    let mut single = 0usize;
    let mut double = 0usize;
    for (&stage, (prev, cur)) in request.stages().iter().zip(reveals) {
        let coin = stage_coin(verifier_secret, stage);
        let probe = probe_stage_full(problem, prev, cur, stage, coin)?;
        if probe.retrainings == 1 {
            single += 1;
        } else {
            double += 1;
        }
        verdicts.push(StageVerdict {
            stage,
            code: probe.code,
        });
    }
    session.post_verdicts(&verdicts)?;
    session.reveal_flag_plan(&plan.sigma)?;

    if plan.sigma.len() != stage_count || hash_permutation(&plan.sigma) != cert.plan_commitment {
        let verdict = fail(FailReason::InvalidFlagCommitment, &request, single, double);
        session.finalize(verdict.clone())?;
        return Ok(verdict);
    }

    let flags = crate::certificate::flag_count(flag_fraction, stage_count)?;
    let mut flags_found = Vec::new();
    for verdict in &verdicts {
        let value = plan.sigma[verdict.stage - 1];
        let expected: u8 = if value <= flags {
            if value % 2 == 1 {
                1
            } else {
                2
            }
        } else {
            0
        };
        if verdict.code != expected {
            let out = fail(
                FailReason::ErrorInStage(verdict.stage),
                &request,
                single,
                double,
            );
            session.finalize(out.clone())?;
            return Ok(out);
        }
        if expected != 0 {
            flags_found.push(verdict.stage);
        }
    }

    let verdict = Verdict {
        outcome: Outcome::Success { flags_found },
        audited: request.stages().to_vec(),
        probes_single: single,
        probes_double: double,
    };
    session.finalize(verdict.clone())?;
    Ok(verdict)
}

/// Honest end-to-end run of the basic mechanism against a checkpoint store.
pub fn run_basic_protocol(
    problem: &Problem,
    cert: &BasicCertificate,
    store: &CheckpointStore,
    verifier_secret: &Seed,
    audit_count: usize,
) -> Result<Verdict, VerificationError> {
    let request = select_stages(problem.stage_count(), audit_count, verifier_secret)?;
    let reveals: Vec<_> = request.stages().iter().map(|&t| store.reveal(t)).collect();
    verify_basic(problem, cert, &request, &reveals)
}

/// Honest end-to-end run of the full mechanism. Returns the verdict and the
/// complete message transcript for audit replay.
pub fn run_full_protocol(
    problem: &Problem,
    cert: &FullCertificate,
    store: &CheckpointStore,
    plan: &FlagPlan,
    verifier_secret: &Seed,
    audit_count: usize,
    flag_fraction: f64,
) -> Result<(Verdict, Vec<Message>), VerificationError> {
    let mut session = ProtocolSession::new();
    session.post_certificate(cert)?;
    let request = select_stages(problem.stage_count(), audit_count, verifier_secret)?;
    let reveals: Vec<_> = request.stages().iter().map(|&t| store.reveal(t)).collect();
    let verdict = verify_full(
        &mut session,
        problem,
        cert,
        &reveals,
        plan,
        verifier_secret,
        audit_count,
        flag_fraction,
    )?;
    Ok((verdict, session.transcript().to_vec()))
}
