//! Monte-Carlo strategy harness over the protocol's combinatorial layer —
//! flag placement, audit sampling, probe coins, reward and cost accounting
//! — without running any SGD. Used to reproduce the prover-incentive and
//! verifier-incentive experiments and to cross-validate the closed forms.
//!
//! Reproducibility contract: a report is a pure function of its inputs and
//! the master seed. Each trial runs on the substream
//! `hash(master || LE64(trial))`, and grid points share trial substreams
//! (common random numbers), so clamped strategy points produce bit-equal
//! utility samples and aggregation in trial order makes the result
//! independent of the thread count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::incentives::{
    pass_prob_exact, sunk_cost, winning_prob, IncentiveError, IncentiveParams,
};
use crate::prng::{RandomStream, Seed};

#[derive(Debug, Error, PartialEq)]
pub enum SimulationError {
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid value {got} exceeds {max}")]
    GridValueOutOfRange { got: u64, max: u64 },
    #[error("trial count must be >= 1")]
    NoTrials,
    #[error("distribution invalid: {0}")]
    BadDistribution(&'static str),
    #[error(transparent)]
    Incentive(#[from] IncentiveError),
}

/// What a dishonest prover does with the stages she fakes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheatDisguise {
    AsNormal,
    AsFlag,
}

/// Prover strategies the harness evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProverPolicy {
    Honest,
    /// Picks `cheat_count` stages uniformly at random and fakes them. The
    /// per-audit catch probability is the `kappa` of the parameter set
    /// (1 for undisguised cheats in the basic mechanism, 1/2 for
    /// flag-disguised cheats in the full mechanism).
    SymmetricCheat {
        cheat_count: u32,
        disguise: CheatDisguise,
    },
}

/// Verifier strategies the harness evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VerifierPolicy {
    /// Audit all granted stages.
    Honest,
    /// Audit a fixed number of stages.
    Constant { audits: u32 },
    /// Audit until a target number of flags has been found or access runs
    /// out.
    GreedyAdaptive { flag_target: u32 },
}

/// Whether a strategy may exceed the protocol's access grant of `alpha`
/// stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessCap {
    /// Audits beyond `alpha` are clamped: the protocol reveals nothing
    /// past the granted stages.
    #[default]
    Protocol,
    /// Audits may range over all stages; models the protocol deviation of
    /// requesting more than granted.
    Uncapped,
}

/// Common simulation controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub trials: usize,
    pub master_seed: Seed,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default)]
    pub access_cap: AccessCap,
    /// Cost of fabricating one dishonest stage, as a fraction of the honest
    /// per-stage cost. Zero by default; set to `1/k` to account for the
    /// one-epoch fabrication rule in sensitivity runs.
    #[serde(default)]
    pub dishonest_cost_fraction: f64,
}

fn default_threads() -> usize {
    1
}

impl SimOptions {
    pub fn new(trials: usize, master_seed: Seed) -> Self {
        SimOptions {
            trials,
            master_seed,
            threads: 1,
            access_cap: AccessCap::Protocol,
            dishonest_cost_fraction: 0.0,
        }
    }
}

/// Empirical utility curve over one strategy grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub grid: Vec<f64>,
    pub mean_utility: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Per grid point: for prover runs the catch rate among submitted
    /// certificates; for verifier runs the fraction of the flag pool
    /// discovered.
    pub detection_rate: Vec<f64>,
    pub trials: usize,
    pub optimal_index: usize,
    pub optimal_grid_value: f64,
}

impl SimReport {
    fn assemble(grid: Vec<f64>, rows: Vec<(f64, f64, f64)>, trials: usize) -> Self {
        let mean_utility: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let std_error: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let detection_rate: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let optimal_index = argmax_first(&mean_utility);
        let optimal_grid_value = grid[optimal_index];
        SimReport {
            grid,
            mean_utility,
            std_error,
            detection_rate,
            trials,
            optimal_index,
            optimal_grid_value,
        }
    }

    /// CSV rows `(grid_value, mean_utility, std_error, detection_rate)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("grid_value,mean_utility,std_error,detection_rate\n");
        for i in 0..self.grid.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.grid[i], self.mean_utility[i], self.std_error[i], self.detection_rate[i]
            ));
        }
        out
    }
}

/// Grid point with the highest mean utility; ties break toward the smaller
/// (earlier) grid value.
pub fn find_optimal(report: &SimReport) -> Result<(usize, f64), SimulationError> {
    if report.grid.is_empty() {
        return Err(SimulationError::EmptyGrid);
    }
    let index = argmax_first(&report.mean_utility);
    Ok((index, report.grid[index]))
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn trial_stream(master: &Seed, trial: usize) -> RandomStream {
    RandomStream::new(master.derive(trial as u64))
}

/// Runs `trials` independent evaluations, optionally on a worker pool.
/// Results land in a trial-indexed buffer, so the aggregate is identical
/// for any thread count.
fn per_trial<V, F>(trials: usize, threads: usize, eval: F) -> Vec<V>
where
    V: Copy + Default + Send,
    F: Fn(usize) -> V + Sync,
{
    let mut values = vec![V::default(); trials];
    let workers = threads.max(1).min(trials.max(1));
    if workers <= 1 {
        for (i, slot) in values.iter_mut().enumerate() {
            *slot = eval(i);
        }
        return values;
    }
    let chunk = trials.div_ceil(workers);
    std::thread::scope(|scope| {
        for (ci, slice) in values.chunks_mut(chunk).enumerate() {
            let eval = &eval;
            scope.spawn(move || {
                for (offset, slot) in slice.iter_mut().enumerate() {
                    *slot = eval(ci * chunk + offset);
                }
            });
        }
    });
    values
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, Default)]
struct ProverTrial {
    utility: f64,
    submitted: bool,
    caught: bool,
}

/// Prover utility curve over cheat counts. Each trial plays the race
/// (winning with probability `P(rho)`), then the audit lottery: the audited
/// stages are drawn without replacement and each audited cheat is caught
/// independently with probability `kappa`. A losing prover books the
/// expected sunk cost of her partial work.
pub fn simulate_prover_utility(
    params: &IncentiveParams,
    cheat_grid: &[u32],
    opts: &SimOptions,
) -> Result<SimReport, SimulationError> {
    params.validate()?;
    if cheat_grid.is_empty() {
        return Err(SimulationError::EmptyGrid);
    }
    if opts.trials == 0 {
        return Err(SimulationError::NoTrials);
    }
    let t = params.stage_count;
    let mut rows = Vec::with_capacity(cheat_grid.len());
    for &cheats in cheat_grid {
        if cheats > t {
            return Err(SimulationError::GridValueOutOfRange {
                got: u64::from(cheats),
                max: u64::from(t),
            });
        }
        let rho = f64::from(t - cheats) / f64::from(t);
        let win_prob = winning_prob(&params.competition, rho)?;
        let loss_utility = if win_prob < 1.0 {
            -sunk_cost(&params.competition, rho, params.total_cost)?
        } else {
            0.0
        };
        let honest_cost = rho * params.total_cost;
        let fabrication_cost = f64::from(cheats) * (params.total_cost / f64::from(t))
            * opts.dishonest_cost_fraction;

        let run = |trial: usize| -> ProverTrial {
            let mut stream = trial_stream(&opts.master_seed, trial);
            if stream.uniform01() >= win_prob {
                return ProverTrial {
                    utility: loss_utility,
                    submitted: false,
                    caught: false,
                };
            }
            let mut caught = false;
            let mut cheats_left = u64::from(cheats);
            let mut pool = u64::from(t);
            for _ in 0..params.alpha {
                let hit = stream.uniform01() * (pool as f64) < cheats_left as f64;
                if hit {
                    cheats_left -= 1;
                    if stream.uniform01() < params.kappa {
                        caught = true;
                        break;
                    }
                }
                pool -= 1;
            }
            let utility = if caught {
                -(params.gamma * params.block_reward + honest_cost + fabrication_cost)
            } else {
                params.block_reward - honest_cost - fabrication_cost
            };
            ProverTrial {
                utility,
                submitted: true,
                caught,
            }
        };

        let trials = per_trial(opts.trials, opts.threads, run);
        let (mean, se) = mean_and_se(trials.iter().map(|v| v.utility), opts.trials);
        let submitted = trials.iter().filter(|v| v.submitted).count();
        let caught = trials.iter().filter(|v| v.caught).count();
        let rate = if submitted > 0 {
            caught as f64 / submitted as f64
        } else {
            0.0
        };
        rows.push((mean, se, rate));
    }
    Ok(SimReport::assemble(
        cheat_grid.iter().map(|&d| f64::from(d)).collect(),
        rows,
        opts.trials,
    ))
}

fn flag_pool(params: &IncentiveParams) -> Result<u64, SimulationError> {
    let raw = params.flag_fraction * f64::from(params.stage_count);
    let rounded = raw.round();
    if (raw - rounded).abs() > 1e-9 || rounded < 0.0 {
        return Err(SimulationError::BadDistribution(
            "flag fraction times stage count must be an integer",
        ));
    }
    Ok(rounded as u64)
}

/// Verifier utility for the constant strategy: audit a fixed number of
/// stages of an honest prover's certificate, collecting the per-flag reward
/// and paying one stage cost per audit plus one extra per discovered flag.
/// Under the protocol cap, requests beyond the granted `alpha` stages are
/// clamped to `alpha`.
pub fn simulate_verifier_constant(
    params: &IncentiveParams,
    audit_grid: &[u32],
    opts: &SimOptions,
) -> Result<SimReport, SimulationError> {
    params.validate()?;
    if audit_grid.is_empty() {
        return Err(SimulationError::EmptyGrid);
    }
    if opts.trials == 0 {
        return Err(SimulationError::NoTrials);
    }
    let t = u64::from(params.stage_count);
    let flags_total = flag_pool(params)?;
    let stage_cost = params.total_cost / f64::from(params.stage_count);
    let mut rows = Vec::with_capacity(audit_grid.len());
    for &requested in audit_grid {
        if u64::from(requested) > t {
            return Err(SimulationError::GridValueOutOfRange {
                got: u64::from(requested),
                max: t,
            });
        }
        let effective = match opts.access_cap {
            AccessCap::Protocol => requested.min(params.alpha),
            AccessCap::Uncapped => requested,
        };
        let run = |trial: usize| -> (f64, f64) {
            let mut stream = trial_stream(&opts.master_seed, trial);
            let mut found = 0u64;
            let mut flags_left = flags_total;
            let mut pool = t;
            for _ in 0..effective {
                if stream.uniform01() * (pool as f64) < flags_left as f64 {
                    found += 1;
                    flags_left -= 1;
                }
                pool -= 1;
            }
            let utility = params.flag_reward * found as f64
                - (u64::from(effective) + found) as f64 * stage_cost;
            (utility, found as f64)
        };
        let trials = per_trial(opts.trials, opts.threads, run);
        let (mean, se) = mean_and_se(trials.iter().map(|v| v.0), opts.trials);
        let mean_found: f64 = trials.iter().map(|v| v.1).sum::<f64>() / opts.trials as f64;
        let coverage = if flags_total > 0 {
            mean_found / flags_total as f64
        } else {
            0.0
        };
        rows.push((mean, se, coverage));
    }
    Ok(SimReport::assemble(
        audit_grid.iter().map(|&a| f64::from(a)).collect(),
        rows,
        opts.trials,
    ))
}

/// Report for the greedy-adaptive strategy: the utility curve plus the
/// distribution of how many stages each target ends up auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyReport {
    pub base: SimReport,
    pub audits_mean: Vec<f64>,
    pub audits_std: Vec<f64>,
}

/// Verifier utility for the greedy-adaptive strategy: audit unvisited
/// stages uniformly until the flag target is met or access runs out
/// (`alpha` stages under the protocol cap, the whole certificate without).
pub fn simulate_verifier_greedy(
    params: &IncentiveParams,
    target_grid: &[u32],
    opts: &SimOptions,
) -> Result<GreedyReport, SimulationError> {
    params.validate()?;
    if target_grid.is_empty() {
        return Err(SimulationError::EmptyGrid);
    }
    if opts.trials == 0 {
        return Err(SimulationError::NoTrials);
    }
    let t = u64::from(params.stage_count);
    let flags_total = flag_pool(params)?;
    let stage_cost = params.total_cost / f64::from(params.stage_count);
    let access = match opts.access_cap {
        AccessCap::Protocol => u64::from(params.alpha),
        AccessCap::Uncapped => t,
    };
    let mut rows = Vec::with_capacity(target_grid.len());
    let mut audits_mean = Vec::with_capacity(target_grid.len());
    let mut audits_std = Vec::with_capacity(target_grid.len());
    for &target in target_grid {
        if u64::from(target) > flags_total {
            return Err(SimulationError::GridValueOutOfRange {
                got: u64::from(target),
                max: flags_total,
            });
        }
        let run = |trial: usize| -> (f64, f64, f64) {
            let mut stream = trial_stream(&opts.master_seed, trial);
            let mut found = 0u64;
            let mut audited = 0u64;
            let mut flags_left = flags_total;
            while found < u64::from(target) && audited < access {
                if stream.uniform01() * ((t - audited) as f64) < flags_left as f64 {
                    found += 1;
                    flags_left -= 1;
                }
                audited += 1;
            }
            let utility =
                params.flag_reward * found as f64 - (audited + found) as f64 * stage_cost;
            (utility, found as f64, audited as f64)
        };
        let trials = per_trial(opts.trials, opts.threads, run);
        let (mean, se) = mean_and_se(trials.iter().map(|v| v.0), opts.trials);
        let mean_found: f64 = trials.iter().map(|v| v.1).sum::<f64>() / opts.trials as f64;
        let coverage = if flags_total > 0 {
            mean_found / flags_total as f64
        } else {
            0.0
        };
        rows.push((mean, se, coverage));
        let (a_mean, a_se) = mean_and_se(trials.iter().map(|v| v.2), opts.trials);
        audits_mean.push(a_mean);
        audits_std.push(a_se * (opts.trials as f64).sqrt());
    }
    Ok(GreedyReport {
        base: SimReport::assemble(
            target_grid.iter().map(|&m| f64::from(m)).collect(),
            rows,
            opts.trials,
        ),
        audits_mean,
        audits_std,
    })
}

/// Empirical vs analytic detection probability for a fixed cheat count,
/// with no competition in the way: draw the audited stages, catch each
/// audited cheat with probability `kappa`, compare the observed rate to
/// `1 - pass_prob_exact`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub empirical: f64,
    pub analytic: f64,
    pub abs_diff: f64,
}

pub fn detection_rate(
    cheat_count: u64,
    stage_count: u64,
    audit_count: u64,
    catch_prob: f64,
    trials: usize,
    master_seed: &Seed,
) -> Result<DetectionReport, SimulationError> {
    if trials == 0 {
        return Err(SimulationError::NoTrials);
    }
    let analytic = 1.0 - pass_prob_exact(cheat_count, stage_count, audit_count, catch_prob)?;
    let run = |trial: usize| -> u8 {
        let mut stream = trial_stream(master_seed, trial);
        let mut cheats_left = cheat_count;
        let mut pool = stage_count;
        for _ in 0..audit_count {
            if stream.uniform01() * (pool as f64) < cheats_left as f64 {
                cheats_left -= 1;
                if stream.uniform01() < catch_prob {
                    return 1;
                }
            }
            pool -= 1;
        }
        0
    };
    let outcomes = per_trial(trials, 1, run);
    let empirical = outcomes.iter().map(|&v| v as usize).sum::<usize>() as f64 / trials as f64;
    Ok(DetectionReport {
        empirical,
        analytic,
        abs_diff: (empirical - analytic).abs(),
    })
}

/// Mixed population of provers: a fraction may cheat, with a distribution
/// over how many stages they fake. The average type keeps most mass on
/// zero cheats, strictly between `1 - epsilon` and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationModel {
    pub epsilon: f64,
    /// `(cheat_count, probability)` pairs for the dishonest type.
    pub cheat_distribution: Vec<(u32, f64)>,
}

impl PopulationModel {
    pub fn validate(&self, stage_count: u32) -> Result<(), SimulationError> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(SimulationError::BadDistribution("epsilon outside [0,1]"));
        }
        if self.cheat_distribution.is_empty() {
            return Err(SimulationError::BadDistribution("no cheat distribution"));
        }
        let mut total = 0.0;
        let mut zero_mass = 0.0;
        for &(count, prob) in &self.cheat_distribution {
            if count > stage_count {
                return Err(SimulationError::BadDistribution("cheat count exceeds stages"));
            }
            if !(0.0..=1.0).contains(&prob) {
                return Err(SimulationError::BadDistribution("probability outside [0,1]"));
            }
            total += prob;
            if count == 0 {
                zero_mass += prob;
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(SimulationError::BadDistribution("probabilities must sum to 1"));
        }
        if self.epsilon > 0.0 && (zero_mass <= 0.0 || zero_mass >= 1.0) {
            return Err(SimulationError::BadDistribution(
                "dishonest type needs zero-cheat mass strictly inside (0,1)",
            ));
        }
        Ok(())
    }

    /// The population-average probability of each cheat count,
    /// `p_bar[d] = (1 - epsilon) [d = 0] + epsilon q[d]`.
    pub fn mean_type(&self, stage_count: u32) -> Vec<f64> {
        let mut p_bar = vec![0.0; stage_count as usize + 1];
        p_bar[0] = 1.0 - self.epsilon;
        for &(count, prob) in &self.cheat_distribution {
            p_bar[count as usize] += self.epsilon * prob;
        }
        p_bar
    }

    /// Draw one prover's cheat count.
    pub fn sample_cheat_count(&self, stream: &mut RandomStream) -> u32 {
        if stream.uniform01() >= self.epsilon {
            return 0;
        }
        let mut roll = stream.uniform01();
        for &(count, prob) in &self.cheat_distribution {
            if roll < prob {
                return count;
            }
            roll -= prob;
        }
        self.cheat_distribution.last().map(|v| v.0).unwrap_or(0)
    }

    /// Population-average probability that a certificate fails an honest
    /// audit of `audit_count` stages.
    pub fn expected_detection_rate(
        &self,
        stage_count: u32,
        audit_count: u32,
        catch_prob: f64,
    ) -> Result<f64, SimulationError> {
        self.validate(stage_count)?;
        let p_bar = self.mean_type(stage_count);
        let mut total = 0.0;
        for (count, prob) in p_bar.into_iter().enumerate() {
            if prob == 0.0 {
                continue;
            }
            let pass = pass_prob_exact(
                count as u64,
                u64::from(stage_count),
                u64::from(audit_count),
                catch_prob,
            )?;
            total += prob * (1.0 - pass);
        }
        Ok(total)
    }
}
