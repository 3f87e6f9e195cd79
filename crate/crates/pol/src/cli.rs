//! Command-line orchestration: generate problems, run the prover and
//! verifier end to end, evaluate the closed-form analyses, and run the
//! Monte-Carlo experiments, emitting machine-readable reports.
//!
//! Exit codes: 0 on success (including analyses), 2 when a verification
//! run returns a failure verdict (the verdict file carries the reason),
//! 1 on usage or configuration errors.
//!
//! Where a value can come from both a config file and a flag, the flag
//! wins.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::certificate::{
    generate_basic, generate_cheating, generate_cheating_basic, generate_full, CertificateFile,
    CheatSpec, CheckpointStore, Disguise, FabricationRule, FlagPlan, Problem,
};
use crate::incentives::{
    dilemma_threshold, individual_rationality, min_audits_bis, min_audits_with_penalty, vis_check,
    Competition, DilemmaParams, DilemmaThreshold, IncentiveParams,
};
use crate::prng::Seed;
use crate::simulation::{
    find_optimal, simulate_prover_utility, simulate_verifier_constant, simulate_verifier_greedy,
    AccessCap, SimOptions, SimReport,
};
use crate::training::{Dataset, Hyper, InitRule, LossId, ModelId};
use crate::verification::{run_basic_protocol, run_full_protocol, VerdictFile};

/// Schema identifiers for every file format this binary reads or writes.
pub const SCHEMA_VERSIONS: &[&str] = &[
    "problem-v1",
    "dataset-v1",
    "certificate-v1",
    "checkpoints-v1",
    "flagplan-v1",
    "verdict-v1",
    "transcript-v1",
    "analysis-v1",
    "sim-config-v1",
    "sim-csv-v1",
    "sim-summary-v1",
];

pub const USAGE: &str = "\
usage: pol <command> [flags]

commands:
  gen-problem   generate a synthetic training problem file
  prove         produce a certificate (and checkpoints) for a problem
  verify        audit a certificate against its problem
  analyze       evaluate the closed-form incentive thresholds
  simulate      run a Monte-Carlo strategy experiment
  --version     print version and file schema versions

run `pol <command> --help` for per-command flags.";

const GEN_PROBLEM_HELP: &str = "\
usage: pol gen-problem --out <path> [flags]
  --out PATH            problem file to write (required)
  --dim N               input dimension (default 8)
  --n N                 dataset size (default 128)
  --batch N             batch size, must divide n (default 16)
  --epochs N            total epochs (default 40)
  --stage-epochs N      epochs per stage, must divide epochs (default 2)
  --learning-rate F     SGD step size (default 0.05)
  --phi HEX64           root seed (default: fixed fixture seed)
  --data-seed HEX64     dataset fixture seed (default: fixed fixture seed)";

const PROVE_HELP: &str = "\
usage: pol prove --problem <path> --out-cert <path> --out-checkpoints <path> [flags]
  --mode basic|full     mechanism (default full)
  --eta-flag F          flag fraction, full mode (default 0.4)
  --prover-secret HEX64 flag-plan secret (default: fixed fixture seed)
  --out-plan PATH       write the secret flag plan, full mode
  --cheat-stages LIST   comma-separated stages to fabricate (adversary harness)
  --disguise as-normal|as-flag   where cheats hide in the plan (default as-normal)
  --fabrication one-epoch|skip   how cheats are fabricated (default one-epoch)";

const VERIFY_HELP: &str = "\
usage: pol verify --problem <path> --cert <path> --checkpoints <path> [flags]
  --mode basic|full     mechanism (default: full when the certificate commits a plan)
  --plan PATH           prover flag plan, full mode (required for full)
  --eta-flag F          flag fraction, full mode (default 0.4)
  --verifier-secret HEX64  audit secret (default: fixed fixture secret)
  --alpha N             stages to audit (default 5)
  --cost F              honest total training cost used for cost reporting
                        (default: stage count, pricing each stage at 1)
  --out-verdict PATH    write the verdict report
  --out-transcript PATH write the message transcript (full mode)";

const ANALYZE_HELP: &str = "\
usage: pol analyze [flags]
  --config PATH         JSON object with any of the keys below (flags win)
  --reward F --cost F --gamma F --kappa F --alpha N --t-stages N
  --lambda F --eta-flag F --r0 F --r1 F
  --competition const|exp:RATE|table:PATH
  --v-plus F --v-zero F lazy-verifier rewards (defaults: r0 and 0)
  --out PATH            also write the JSON report to a file
defaults reproduce the toy deployment: cost 1e4, reward 2e4, kappa 0.5,
alpha 10, t-stages 1e4, lambda 1, eta-flag 0.2, r0 100, r1 12, exp:1";

const SIMULATE_HELP: &str = "\
usage: pol simulate --config <path> [flags]
  --config PATH         experiment config (required), JSON:
                        {experiment: prover|verifier-constant|verifier-greedy,
                         params: {...}, grid: [..], trials: N,
                         master_seed: HEX64, access_cap?: protocol|uncapped,
                         dishonest_cost_fraction?: F, threads?: N}
  --trials N            override the config's trial count
  --master-seed HEX64   override the config's master seed
  --threads N           override the config's worker count
  --out-csv PATH        write the utility curve as CSV
  --out-json PATH       write the full report as JSON";

#[derive(Debug, Clone, PartialEq)]
pub enum RunConfig {
    GenProblem(GenProblemArgs),
    Prove(ProveArgs),
    Verify(VerifyArgs),
    Analyze(AnalyzeArgs),
    Simulate(SimulateArgs),
    Version,
    Help(Option<&'static str>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenProblemArgs {
    pub out: PathBuf,
    pub dim: usize,
    pub n: usize,
    pub batch: usize,
    pub epochs: usize,
    pub stage_epochs: usize,
    pub learning_rate: f64,
    pub phi: Seed,
    pub data_seed: Seed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Basic,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProveArgs {
    pub problem: PathBuf,
    pub out_cert: PathBuf,
    pub out_checkpoints: PathBuf,
    pub mode: Mode,
    pub flag_fraction: f64,
    pub prover_secret: Seed,
    pub out_plan: Option<PathBuf>,
    pub cheat_stages: Vec<usize>,
    pub disguise: Disguise,
    pub fabrication: FabricationRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyArgs {
    pub problem: PathBuf,
    pub cert: PathBuf,
    pub checkpoints: PathBuf,
    pub mode: Option<Mode>,
    pub plan: Option<PathBuf>,
    pub flag_fraction: f64,
    pub verifier_secret: Seed,
    pub audit_count: usize,
    pub total_cost: Option<f64>,
    pub out_verdict: Option<PathBuf>,
    pub out_transcript: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeArgs {
    pub params: IncentiveParams,
    pub dilemma: DilemmaParams,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    pub config: PathBuf,
    pub trials: Option<usize>,
    pub master_seed: Option<Seed>,
    pub threads: Option<usize>,
    pub out_csv: Option<PathBuf>,
    pub out_json: Option<PathBuf>,
}

/// On-disk experiment description for `simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfigFile {
    pub experiment: String,
    pub params: IncentiveParams,
    pub grid: Vec<u32>,
    pub trials: usize,
    pub master_seed: Seed,
    #[serde(default)]
    pub access_cap: AccessCap,
    #[serde(default)]
    pub dishonest_cost_fraction: f64,
    #[serde(default)]
    pub threads: Option<usize>,
}

// ---------------------------------------------------------------------------
// flag parsing
// ---------------------------------------------------------------------------

struct Flags {
    values: BTreeMap<String, String>,
}

impl Flags {
    fn parse(args: &[String]) -> Result<Flags, String> {
        let mut values = BTreeMap::new();
        let mut iter = args.iter().peekable();
        while let Some(arg) = iter.next() {
            let Some(stripped) = arg.strip_prefix("--") else {
                return Err(format!("unexpected argument `{arg}`"));
            };
            if let Some((key, value)) = stripped.split_once('=') {
                values.insert(key.to_string(), value.to_string());
                continue;
            }
            if stripped == "help" {
                values.insert("help".to_string(), String::new());
                continue;
            }
            let Some(value) = iter.next() else {
                return Err(format!("flag `--{stripped}` expects a value"));
            };
            values.insert(stripped.to_string(), value.clone());
        }
        Ok(Flags { values })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    fn has_help(&self) -> bool {
        self.values.contains_key("help")
    }

    fn take_path(&mut self, key: &str) -> Option<PathBuf> {
        self.take(key).map(PathBuf::from)
    }

    fn require_path(&mut self, key: &str) -> Result<PathBuf, String> {
        self.take_path(key)
            .ok_or_else(|| format!("missing required flag `--{key}`"))
    }

    fn take_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, String> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| format!("flag `--{key}` has invalid value `{raw}`")),
        }
    }

    fn take_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T, String> {
        Ok(self.take_parsed(key)?.unwrap_or(default))
    }

    fn take_seed(&mut self, key: &str, default: Seed) -> Result<Seed, String> {
        match self.take(key) {
            None => Ok(default),
            Some(raw) => {
                Seed::from_hex(&raw).map_err(|e| format!("flag `--{key}`: {e}"))
            }
        }
    }

    fn finish(self, help: &'static str) -> Result<(), String> {
        if let Some(key) = self.values.keys().next() {
            return Err(format!("unknown flag `--{key}`\n{help}"));
        }
        Ok(())
    }
}

fn parse_competition(raw: &str) -> Result<Competition, String> {
    if raw == "const" || raw == "constant" {
        return Ok(Competition::ConstantOne);
    }
    if let Some(rate) = raw.strip_prefix("exp:") {
        let rate: f64 = rate
            .parse()
            .map_err(|_| format!("bad exponential rate `{rate}`"))?;
        return Ok(Competition::ExponentialHazard { rate });
    }
    if let Some(path) = raw.strip_prefix("table:") {
        let text =
            fs::read_to_string(path).map_err(|e| format!("competition table {path}: {e}"))?;
        let points: Vec<(f64, f64)> =
            serde_json::from_str(&text).map_err(|e| format!("competition table {path}: {e}"))?;
        return Ok(Competition::Table { points });
    }
    Err(format!(
        "bad competition `{raw}` (expected const, exp:RATE or table:PATH)"
    ))
}

/// Parse a full command line (without the binary name) into a `RunConfig`.
pub fn parse_args(args: &[String]) -> Result<RunConfig, String> {
    let Some(command) = args.first() else {
        return Ok(RunConfig::Help(None));
    };
    let rest = &args[1..];
    match command.as_str() {
        "--version" | "version" => Ok(RunConfig::Version),
        "--help" | "help" => Ok(RunConfig::Help(None)),
        "gen-problem" => parse_gen_problem(rest),
        "prove" => parse_prove(rest),
        "verify" => parse_verify(rest),
        "analyze" => parse_analyze(rest),
        "simulate" => parse_simulate(rest),
        other => Err(format!("unknown command `{other}`\n{USAGE}")),
    }
}

fn parse_gen_problem(args: &[String]) -> Result<RunConfig, String> {
    let mut flags = Flags::parse(args)?;
    if flags.has_help() {
        return Ok(RunConfig::Help(Some(GEN_PROBLEM_HELP)));
    }
    let config = GenProblemArgs {
        out: flags.require_path("out")?,
        dim: flags.take_or("dim", 8)?,
        n: flags.take_or("n", 128)?,
        batch: flags.take_or("batch", 16)?,
        epochs: flags.take_or("epochs", 40)?,
        stage_epochs: flags.take_or("stage-epochs", 2)?,
        learning_rate: flags.take_or("learning-rate", 0.05)?,
        phi: flags.take_seed("phi", Seed::from_label("pol/default-problem-root"))?,
        data_seed: flags.take_seed("data-seed", Seed::from_label("pol/default-dataset"))?,
    };
    flags.finish(GEN_PROBLEM_HELP)?;
    Ok(RunConfig::GenProblem(config))
}

fn parse_mode(raw: Option<String>) -> Result<Option<Mode>, String> {
    match raw.as_deref() {
        None => Ok(None),
        Some("basic") => Ok(Some(Mode::Basic)),
        Some("full") => Ok(Some(Mode::Full)),
        Some(other) => Err(format!("bad mode `{other}` (expected basic or full)")),
    }
}

fn parse_prove(args: &[String]) -> Result<RunConfig, String> {
    let mut flags = Flags::parse(args)?;
    if flags.has_help() {
        return Ok(RunConfig::Help(Some(PROVE_HELP)));
    }
    let cheat_stages = match flags.take("cheat-stages") {
        None => Vec::new(),
        Some(raw) => raw
            .split(',')
            .filter(|part| !part.is_empty())
            .map(|part| {
                part.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("bad stage `{part}` in --cheat-stages"))
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    let disguise = match flags.take("disguise").as_deref() {
        None | Some("as-normal") => Disguise::AsNormal,
        Some("as-flag") => Disguise::AsFlag,
        Some(other) => return Err(format!("bad disguise `{other}`")),
    };
    let fabrication = match flags.take("fabrication").as_deref() {
        None | Some("one-epoch") => FabricationRule::OneEpoch,
        Some("skip") => FabricationRule::SkipStage,
        Some(other) => return Err(format!("bad fabrication `{other}`")),
    };
    let config = ProveArgs {
        problem: flags.require_path("problem")?,
        out_cert: flags.require_path("out-cert")?,
        out_checkpoints: flags.require_path("out-checkpoints")?,
        mode: parse_mode(flags.take("mode"))?.unwrap_or(Mode::Full),
        flag_fraction: flags.take_or("eta-flag", 0.4)?,
        prover_secret: flags.take_seed("prover-secret", Seed::from_label("pol/default-prover"))?,
        out_plan: flags.take_path("out-plan"),
        cheat_stages,
        disguise,
        fabrication,
    };
    flags.finish(PROVE_HELP)?;
    Ok(RunConfig::Prove(config))
}

fn parse_verify(args: &[String]) -> Result<RunConfig, String> {
    let mut flags = Flags::parse(args)?;
    if flags.has_help() {
        return Ok(RunConfig::Help(Some(VERIFY_HELP)));
    }
    let config = VerifyArgs {
        problem: flags.require_path("problem")?,
        cert: flags.require_path("cert")?,
        checkpoints: flags.require_path("checkpoints")?,
        mode: parse_mode(flags.take("mode"))?,
        plan: flags.take_path("plan"),
        flag_fraction: flags.take_or("eta-flag", 0.4)?,
        verifier_secret: flags
            .take_seed("verifier-secret", Seed::from_label("pol/default-verifier"))?,
        audit_count: flags.take_or("alpha", 5)?,
        total_cost: flags.take_parsed("cost")?,
        out_verdict: flags.take_path("out-verdict"),
        out_transcript: flags.take_path("out-transcript"),
    };
    flags.finish(VERIFY_HELP)?;
    Ok(RunConfig::Verify(config))
}

fn parse_analyze(args: &[String]) -> Result<RunConfig, String> {
    let mut flags = Flags::parse(args)?;
    if flags.has_help() {
        return Ok(RunConfig::Help(Some(ANALYZE_HELP)));
    }
    // defaults: the toy deployment used throughout the demonstrations
    let mut file: BTreeMap<String, serde_json::Value> = BTreeMap::new();
    if let Some(path) = flags.take("config") {
        let text = fs::read_to_string(&path).map_err(|e| format!("config {path}: {e}"))?;
        file = serde_json::from_str(&text).map_err(|e| format!("config {path}: {e}"))?;
    }
    let field = |flags: &mut Flags, key: &str, default: f64| -> Result<f64, String> {
        if let Some(raw) = flags.take(key) {
            return raw
                .parse()
                .map_err(|_| format!("flag `--{key}` has invalid value `{raw}`"));
        }
        let file_key = key.replace('-', "_");
        match file.get(&file_key) {
            Some(value) => value
                .as_f64()
                .ok_or_else(|| format!("config key `{file_key}` must be a number")),
            None => Ok(default),
        }
    };
    let total_cost = field(&mut flags, "cost", 10_000.0)?;
    let block_reward = field(&mut flags, "reward", 20_000.0)?;
    let gamma = field(&mut flags, "gamma", 0.0)?;
    let kappa = field(&mut flags, "kappa", 0.5)?;
    let alpha = field(&mut flags, "alpha", 10.0)? as u32;
    let stage_count = field(&mut flags, "t-stages", 10_000.0)? as u32;
    let lambda = field(&mut flags, "lambda", 1.0)?;
    let flag_fraction = field(&mut flags, "eta-flag", 0.2)?;
    let detect_reward = field(&mut flags, "r0", 100.0)?;
    let flag_reward = field(&mut flags, "r1", 12.0)?;
    let competition = match flags.take("competition") {
        Some(raw) => parse_competition(&raw)?,
        None => match file.get("competition") {
            Some(value) => serde_json::from_value(value.clone())
                .map_err(|e| format!("config key `competition`: {e}"))?,
            None => Competition::ExponentialHazard { rate: 1.0 },
        },
    };
    let v_plus = field(&mut flags, "v-plus", detect_reward)?;
    let v_zero = field(&mut flags, "v-zero", 0.0)?;
    let out = flags.take_path("out");
    flags.finish(ANALYZE_HELP)?;
    Ok(RunConfig::Analyze(AnalyzeArgs {
        params: IncentiveParams {
            total_cost,
            block_reward,
            gamma,
            kappa,
            alpha,
            stage_count,
            lambda,
            flag_fraction,
            detect_reward,
            flag_reward,
            competition,
        },
        dilemma: DilemmaParams {
            catch_reward: v_plus,
            pass_reward: v_zero,
        },
        out,
    }))
}

fn parse_simulate(args: &[String]) -> Result<RunConfig, String> {
    let mut flags = Flags::parse(args)?;
    if flags.has_help() {
        return Ok(RunConfig::Help(Some(SIMULATE_HELP)));
    }
    let config = SimulateArgs {
        config: flags.require_path("config")?,
        trials: flags.take_parsed("trials")?,
        master_seed: match flags.take("master-seed") {
            None => None,
            Some(raw) => Some(Seed::from_hex(&raw).map_err(|e| format!("--master-seed: {e}"))?),
        },
        threads: flags.take_parsed("threads")?,
        out_csv: flags.take_path("out-csv"),
        out_json: flags.take_path("out-json"),
    };
    flags.finish(SIMULATE_HELP)?;
    Ok(RunConfig::Simulate(config))
}

// ---------------------------------------------------------------------------
// execution
// ---------------------------------------------------------------------------

/// Execute a parsed command. Returns the process exit code.
pub fn run(config: RunConfig) -> Result<i32, String> {
    match config {
        RunConfig::Version => {
            println!("pol {}", env!("CARGO_PKG_VERSION"));
            for schema in SCHEMA_VERSIONS {
                println!("schema {schema}");
            }
            Ok(0)
        }
        RunConfig::Help(Some(text)) => {
            println!("{text}");
            Ok(0)
        }
        RunConfig::Help(None) => {
            println!("{USAGE}");
            Ok(0)
        }
        RunConfig::GenProblem(args) => run_gen_problem(&args),
        RunConfig::Prove(args) => run_prove(&args),
        RunConfig::Verify(args) => run_verify(&args),
        RunConfig::Analyze(args) => run_analyze(&args),
        RunConfig::Simulate(args) => run_simulate(&args),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| format!("serializing {}: {e}", path.display()))?;
    fs::write(path, text).map_err(|e| format!("writing {}: {e}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("parsing {}: {e}", path.display()))
}

fn run_gen_problem(args: &GenProblemArgs) -> Result<i32, String> {
    let data = Dataset::synthetic_linear(&args.data_seed, args.dim, args.n)
        .map_err(|e| format!("generating dataset: {e}"))?;
    let problem = Problem {
        data,
        env: Hyper {
            learning_rate: args.learning_rate,
            batch_size: args.batch,
            epochs: args.epochs,
            epochs_per_stage: args.stage_epochs,
            model: ModelId::Linear,
            loss: LossId::SquaredError,
            init: InitRule::Zeros,
        },
        root_seed: args.phi,
    };
    problem.validate().map_err(|e| format!("problem: {e}"))?;
    write_json(&args.out, &problem)?;
    println!(
        "problem written to {} ({} stages of {} epochs)",
        args.out.display(),
        problem.stage_count(),
        problem.env.epochs_per_stage
    );
    Ok(0)
}

fn write_checkpoints(path: &Path, store: &CheckpointStore) -> Result<(), String> {
    let mut bytes = Vec::new();
    store
        .write_to(&mut bytes)
        .map_err(|e| format!("serializing checkpoints: {e}"))?;
    fs::write(path, bytes).map_err(|e| format!("writing {}: {e}", path.display()))
}

fn run_prove(args: &ProveArgs) -> Result<i32, String> {
    let problem: Problem = read_json(&args.problem)?;
    let cheat = (!args.cheat_stages.is_empty()).then(|| CheatSpec {
        cheat_set: args.cheat_stages.iter().copied().collect(),
        disguise: args.disguise,
        fabrication: args.fabrication,
    });

    match args.mode {
        Mode::Basic => {
            let (cert, store) = match &cheat {
                None => generate_basic(&problem).map_err(|e| format!("prove: {e}"))?,
                Some(spec) => generate_cheating_basic(&problem, spec)
                    .map_err(|e| format!("prove: {e}"))?,
            };
            write_json(&args.out_cert, &CertificateFile::from_basic(&cert))?;
            write_checkpoints(&args.out_checkpoints, &store)?;
            println!("basic certificate: {} stages", cert.stage_count());
        }
        Mode::Full => {
            let (cert, plan, store) = match &cheat {
                None => generate_full(&problem, args.flag_fraction, &args.prover_secret)
                    .map_err(|e| format!("prove: {e}"))?,
                Some(spec) => generate_cheating(
                    &problem,
                    args.flag_fraction,
                    &args.prover_secret,
                    spec,
                )
                .map_err(|e| format!("prove: {e}"))?,
            };
            write_json(&args.out_cert, &CertificateFile::from_full(&cert))?;
            write_checkpoints(&args.out_checkpoints, &store)?;
            if let Some(path) = &args.out_plan {
                write_json(path, &plan)?;
            }
            println!(
                "full certificate: {} stages, plan committed",
                cert.stage_count()
            );
        }
    }
    Ok(0)
}

fn run_verify(args: &VerifyArgs) -> Result<i32, String> {
    let problem: Problem = read_json(&args.problem)?;
    let cert_file: CertificateFile = read_json(&args.cert)?;
    if cert_file.c.len() != cert_file.t {
        return Err("certificate: stage count does not match hashes".to_string());
    }
    let bytes = fs::read(&args.checkpoints)
        .map_err(|e| format!("reading {}: {e}", args.checkpoints.display()))?;
    let store = CheckpointStore::read_from(bytes.as_slice())
        .map_err(|e| format!("checkpoints: {e}"))?;

    let mode = args.mode.unwrap_or(if cert_file.h.is_some() {
        Mode::Full
    } else {
        Mode::Basic
    });
    let total_cost = args
        .total_cost
        .unwrap_or(problem.stage_count() as f64);

    let (verdict, transcript) = match mode {
        Mode::Basic => {
            let cert = cert_file.into_basic();
            let verdict =
                run_basic_protocol(&problem, &cert, &store, &args.verifier_secret, args.audit_count)
                    .map_err(|e| format!("verify: {e}"))?;
            (verdict, None)
        }
        Mode::Full => {
            let cert = cert_file
                .into_full()
                .ok_or("certificate has no flag-plan commitment; use --mode basic")?;
            let plan_path = args
                .plan
                .as_ref()
                .ok_or("full verification needs --plan")?;
            let plan: FlagPlan = read_json(plan_path)?;
            let (verdict, transcript) = run_full_protocol(
                &problem,
                &cert,
                &store,
                &plan,
                &args.verifier_secret,
                args.audit_count,
                args.flag_fraction,
            )
            .map_err(|e| format!("verify: {e}"))?;
            (verdict, Some(transcript))
        }
    };

    let report = VerdictFile::from_verdict(&verdict, total_cost, problem.stage_count());
    if let Some(path) = &args.out_verdict {
        write_json(path, &report)?;
    }
    if let (Some(path), Some(transcript)) = (&args.out_transcript, &transcript) {
        write_json(path, transcript)?;
    }
    match (&report.reason, &report.stage) {
        (None, _) => println!(
            "verdict: success ({} stages audited, {} flags found, cost {})",
            report.t_ve.len(),
            report.u,
            report.cost
        ),
        (Some(reason), Some(stage)) => println!("verdict: fail ({reason} at stage {stage})"),
        (Some(reason), None) => println!("verdict: fail ({reason})"),
    }
    Ok(if verdict.is_success() { 0 } else { 2 })
}

fn run_analyze(args: &AnalyzeArgs) -> Result<i32, String> {
    let params = &args.params;
    params.validate().map_err(|e| format!("analyze: {e}"))?;
    let ir = individual_rationality(params).map_err(|e| format!("analyze: {e}"))?;
    let bis_alpha = min_audits_bis(params).map_err(|e| format!("analyze: {e}"))?;
    let penalty = if params.gamma > 0.0 {
        Some(min_audits_with_penalty(params, params.gamma).map_err(|e| format!("analyze: {e}"))?)
    } else {
        None
    };
    let vis = vis_check(
        params.alpha,
        params.stage_count,
        params.flag_fraction,
        params.flag_reward,
        params.total_cost,
    );
    let dilemma = dilemma_threshold(&args.dilemma, params.total_cost, params.stage_count);

    let report = json!({
        "ir": {
            "holds": ir.holds,
            "honest_utility": ir.honest_utility,
            "threshold_R": ir.threshold_reward,
        },
        "bis": { "min_alpha": bis_alpha },
        "penalty": { "gamma": params.gamma, "min_alpha": penalty },
        "vis": { "holds": vis.holds, "min_R1": vis.min_flag_reward },
        "dilemma": {
            "epsilon_threshold": match dilemma {
                DilemmaThreshold::AlwaysLazy => serde_json::Value::from("always_lazy"),
                DilemmaThreshold::Epsilon(eps) => serde_json::Value::from(eps),
            },
        },
    });
    let text = serde_json::to_string_pretty(&report).expect("report is plain json");
    println!("{text}");
    if let Some(path) = &args.out {
        fs::write(path, text).map_err(|e| format!("writing {}: {e}", path.display()))?;
    }
    Ok(0)
}

/// Summary written next to the CSV: the report plus its optimal point.
#[derive(Debug, Serialize)]
struct SimSummary<'a> {
    experiment: &'a str,
    report: &'a SimReport,
    optimal_grid_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    audits_mean: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    audits_std: Option<&'a [f64]>,
}

fn run_simulate(args: &SimulateArgs) -> Result<i32, String> {
    let mut config: SimConfigFile = read_json(&args.config)?;
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(seed) = args.master_seed {
        config.master_seed = seed;
    }
    if let Some(threads) = args.threads {
        config.threads = Some(threads);
    }
    let opts = SimOptions {
        trials: config.trials,
        master_seed: config.master_seed,
        threads: config.threads.unwrap_or(1),
        access_cap: config.access_cap,
        dishonest_cost_fraction: config.dishonest_cost_fraction,
    };

    let (report, audits) = match config.experiment.as_str() {
        "prover" => (
            simulate_prover_utility(&config.params, &config.grid, &opts)
                .map_err(|e| format!("simulate: {e}"))?,
            None,
        ),
        "verifier-constant" => (
            simulate_verifier_constant(&config.params, &config.grid, &opts)
                .map_err(|e| format!("simulate: {e}"))?,
            None,
        ),
        "verifier-greedy" => {
            let greedy = simulate_verifier_greedy(&config.params, &config.grid, &opts)
                .map_err(|e| format!("simulate: {e}"))?;
            (greedy.base, Some((greedy.audits_mean, greedy.audits_std)))
        }
        other => {
            return Err(format!(
                "unknown experiment `{other}` (expected prover, verifier-constant or verifier-greedy)"
            ))
        }
    };

    let (optimal_index, optimal_value) =
        find_optimal(&report).map_err(|e| format!("simulate: {e}"))?;
    if let Some(path) = &args.out_csv {
        fs::write(path, report.to_csv())
            .map_err(|e| format!("writing {}: {e}", path.display()))?;
    }
    let summary = SimSummary {
        experiment: &config.experiment,
        report: &report,
        optimal_grid_value: optimal_value,
        audits_mean: audits.as_ref().map(|a| a.0.as_slice()),
        audits_std: audits.as_ref().map(|a| a.1.as_slice()),
    };
    if let Some(path) = &args.out_json {
        write_json(path, &summary)?;
    }
    println!(
        "experiment {}: {} grid points x {} trials, optimal at {} (mean utility {})",
        config.experiment,
        report.grid.len(),
        report.trials,
        optimal_value,
        report.mean_utility[optimal_index]
    );
    Ok(0)
}
