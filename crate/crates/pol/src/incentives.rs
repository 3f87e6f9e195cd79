//! Closed-form incentive analysis: the competition model, sunk cost of
//! losing a race, pass probabilities for partial cheating, prover utility,
//! and checkers for every threshold the mechanism's guarantees rest on
//! (individual rationality, incentive security with and without penalty,
//! verifier incentive security, and the lazy-verifier threshold).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IncentiveError {
    #[error("fraction {0} outside [0,1]")]
    FractionOutOfRange(f64),
    #[error("competition table invalid: {0}")]
    BadTable(&'static str),
    #[error("winning probability is 1 at this point; the sunk cost branch never applies")]
    NoLossBranch,
    #[error("{0} * stages is not an integer")]
    NonIntegralStageFraction(f64),
    #[error("count {got} out of range 0..={max}")]
    CountOutOfRange { got: u64, max: u64 },
    #[error("parameter {name} = {value} invalid: {why}")]
    BadParameter {
        name: &'static str,
        value: f64,
        why: &'static str,
    },
}

fn check_fraction(x: f64) -> Result<(), IncentiveError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(IncentiveError::FractionOutOfRange(x));
    }
    Ok(())
}

/// The race against other provers: the probability of winning the block
/// after honestly computing a given fraction of the task. Non-increasing
/// with `P(0) = 1` and values in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Competition {
    /// No competition: winning is certain.
    ConstantOne,
    /// `P(rho) = exp(-rate * rho)`; the hazard rate is the constant `rate`.
    ExponentialHazard { rate: f64 },
    /// Piecewise-linear interpolation through `(rho, P)` points covering
    /// `[0, 1]`.
    Table { points: Vec<(f64, f64)> },
}

impl Competition {
    pub fn validate(&self) -> Result<(), IncentiveError> {
        match self {
            Competition::ConstantOne => Ok(()),
            Competition::ExponentialHazard { rate } => {
                if !rate.is_finite() || *rate < 0.0 {
                    return Err(IncentiveError::BadParameter {
                        name: "rate",
                        value: *rate,
                        why: "must be finite and non-negative",
                    });
                }
                Ok(())
            }
            Competition::Table { points } => {
                if points.len() < 2 {
                    return Err(IncentiveError::BadTable("needs at least two points"));
                }
                if points[0] != (0.0, 1.0) {
                    return Err(IncentiveError::BadTable("must start at (0, 1)"));
                }
                if points.last().expect("non-empty").0 != 1.0 {
                    return Err(IncentiveError::BadTable("must end at rho = 1"));
                }
                for pair in points.windows(2) {
                    if pair[1].0 <= pair[0].0 {
                        return Err(IncentiveError::BadTable("rho values must increase"));
                    }
                    if pair[1].1 > pair[0].1 {
                        return Err(IncentiveError::BadTable("P must be non-increasing"));
                    }
                }
                if points.iter().any(|&(_, p)| p <= 0.0 || p > 1.0) {
                    return Err(IncentiveError::BadTable("P values must lie in (0, 1]"));
                }
                Ok(())
            }
        }
    }
}

/// `P(rho)`: probability of winning the race after honestly computing a
/// `rho` fraction of the task.
pub fn winning_prob(competition: &Competition, honest_fraction: f64) -> Result<f64, IncentiveError> {
    check_fraction(honest_fraction)?;
    competition.validate()?;
    Ok(match competition {
        Competition::ConstantOne => 1.0,
        Competition::ExponentialHazard { rate } => (-rate * honest_fraction).exp(),
        Competition::Table { points } => {
            let mut value = 1.0;
            for pair in points.windows(2) {
                let (x0, y0) = pair[0];
                let (x1, y1) = pair[1];
                if honest_fraction <= x1 {
                    value = y0 + (y1 - y0) * (honest_fraction - x0) / (x1 - x0);
                    break;
                }
            }
            value
        }
    })
}

/// Exact `integral of P over [0, rho]`, per family: linear for no
/// competition, closed form for the exponential, trapezoid over the linear
/// pieces for tables.
pub fn winning_prob_integral(
    competition: &Competition,
    honest_fraction: f64,
) -> Result<f64, IncentiveError> {
    check_fraction(honest_fraction)?;
    competition.validate()?;
    Ok(match competition {
        Competition::ConstantOne => honest_fraction,
        Competition::ExponentialHazard { rate } => {
            if *rate == 0.0 {
                honest_fraction
            } else {
                (1.0 - (-rate * honest_fraction).exp()) / rate
            }
        }
        Competition::Table { points } => {
            let mut total = 0.0;
            for pair in points.windows(2) {
                let (x0, y0) = pair[0];
                let (x1, y1) = pair[1];
                if honest_fraction <= x0 {
                    break;
                }
                let upper = honest_fraction.min(x1);
                let y_upper = y0 + (y1 - y0) * (upper - x0) / (x1 - x0);
                total += 0.5 * (y0 + y_upper) * (upper - x0);
            }
            total
        }
    })
}

/// Expected cost already paid when the race is lost: the conditional mean
/// of the work done before another prover finished, scaled by the total
/// cost. Undefined where `P(rho) = 1` — losing has probability zero there
/// and the caller takes the no-loss branch instead.
pub fn sunk_cost(
    competition: &Competition,
    honest_fraction: f64,
    total_cost: f64,
) -> Result<f64, IncentiveError> {
    let p = winning_prob(competition, honest_fraction)?;
    if p >= 1.0 {
        return Err(IncentiveError::NoLossBranch);
    }
    let integral = winning_prob_integral(competition, honest_fraction)?;
    Ok(total_cost * (integral - honest_fraction * p) / (1.0 - p))
}

/// `ln C(n, k)` via the telescoping product, exact enough for the audit
/// scales handled here (`k` stays small).
fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    let mut total = 0.0;
    for i in 1..=k {
        total += ((n - k + i) as f64 / i as f64).ln();
    }
    total
}

/// Conditional pass probability given `checks` effective audits:
/// `C(rho T, checks) / C(T, checks)` — the chance all effective audits land
/// on honest stages. Requires `rho * T` to be an integer.
pub fn pass_prob_given_checks(
    honest_fraction: f64,
    stage_count: u64,
    checks: u64,
) -> Result<f64, IncentiveError> {
    check_fraction(honest_fraction)?;
    if checks > stage_count {
        return Err(IncentiveError::CountOutOfRange {
            got: checks,
            max: stage_count,
        });
    }
    let honest = integral_stage_count(honest_fraction, stage_count)?;
    if checks > honest {
        return Ok(0.0);
    }
    let mut value = 1.0;
    for i in 0..checks {
        value *= (honest - i) as f64 / (stage_count - i) as f64;
    }
    Ok(value)
}

fn integral_stage_count(fraction: f64, stage_count: u64) -> Result<u64, IncentiveError> {
    let raw = fraction * stage_count as f64;
    let rounded = raw.round();
    if (raw - rounded).abs() > 1e-9 {
        return Err(IncentiveError::NonIntegralStageFraction(fraction));
    }
    Ok(rounded as u64)
}

/// Worst-case pass probability bound `(1 - kappa + kappa * rho) ^ alpha`:
/// each audit independently becomes effective with probability `kappa` and
/// an effective audit of a cheating stage always catches it.
pub fn pass_prob_bound(honest_fraction: f64, audit_count: u32, catch_prob: f64) -> f64 {
    (1.0 - catch_prob + catch_prob * honest_fraction).powi(audit_count as i32)
}

/// Exact pass probability for `cheat_count` dishonest stages under uniform
/// audit sampling and independent per-audit effectiveness: the expectation
/// of `(1 - kappa)^j` over the hypergeometric number `j` of audited cheats.
pub fn pass_prob_exact(
    cheat_count: u64,
    stage_count: u64,
    audit_count: u64,
    catch_prob: f64,
) -> Result<f64, IncentiveError> {
    if cheat_count > stage_count {
        return Err(IncentiveError::CountOutOfRange {
            got: cheat_count,
            max: stage_count,
        });
    }
    if audit_count == 0 || audit_count > stage_count {
        return Err(IncentiveError::CountOutOfRange {
            got: audit_count,
            max: stage_count,
        });
    }
    check_fraction(catch_prob)?;
    let ln_total = ln_choose(stage_count, audit_count);
    let j_min = audit_count.saturating_sub(stage_count - cheat_count);
    let j_max = audit_count.min(cheat_count);
    let survive = 1.0 - catch_prob;
    let mut total = 0.0;
    for j in j_min..=j_max {
        let ln_pmf = ln_choose(cheat_count, j) + ln_choose(stage_count - cheat_count, audit_count - j)
            - ln_total;
        let weight = if j == 0 { 1.0 } else { survive.powi(j as i32) };
        total += ln_pmf.exp() * weight;
    }
    Ok(total.min(1.0))
}

/// Which pass-probability law a utility evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityMode {
    /// The theorem bound `(1 - kappa + kappa rho)^alpha`; accepts any real
    /// `rho` and reproduces the worst case the guarantees are proved for.
    Bound,
    /// The exact hypergeometric law; `rho * T` must be an integer.
    Exact,
}

/// All economic parameters of one deployment in one place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncentiveParams {
    /// Honest total training cost `M`.
    #[serde(rename = "cost")]
    pub total_cost: f64,
    /// Block reward `R`.
    #[serde(rename = "reward")]
    pub block_reward: f64,
    /// Penalty ratio: a caught cheater forfeits `gamma * R`.
    pub gamma: f64,
    /// Per-audited-stage catch probability (1 basic, 1/2 full mechanism).
    pub kappa: f64,
    /// Number of audited stages.
    pub alpha: u32,
    /// Total number of stages `T`.
    #[serde(rename = "t_stages")]
    pub stage_count: u32,
    /// Upper bound on the competition's hazard rate.
    pub lambda: f64,
    /// Fraction of stages designated as flags in the full mechanism.
    #[serde(rename = "eta_flag")]
    pub flag_fraction: f64,
    /// Verifier bounty for confirming a dishonest stage.
    #[serde(rename = "r0")]
    pub detect_reward: f64,
    /// Verifier reward per discovered flag.
    #[serde(rename = "r1")]
    pub flag_reward: f64,
    pub competition: Competition,
}

impl IncentiveParams {
    /// Cost-to-reward ratio `beta = M / R`.
    pub fn cost_ratio(&self) -> f64 {
        self.total_cost / self.block_reward
    }

    pub fn validate(&self) -> Result<(), IncentiveError> {
        for (name, value, ok) in [
            ("cost", self.total_cost, self.total_cost > 0.0),
            ("reward", self.block_reward, self.block_reward > 0.0),
            ("gamma", self.gamma, self.gamma >= 0.0),
            (
                "kappa",
                self.kappa,
                self.kappa > 0.0 && self.kappa <= 1.0,
            ),
            ("lambda", self.lambda, self.lambda >= 0.0),
            (
                "alpha",
                f64::from(self.alpha),
                self.alpha >= 1 && self.alpha <= self.stage_count,
            ),
        ] {
            if !ok {
                return Err(IncentiveError::BadParameter {
                    name,
                    value,
                    why: "outside its admissible range",
                });
            }
        }
        self.competition.validate()
    }
}

/// Expected prover utility for honestly computing a `rho` fraction:
/// `P(rho) (Q - gamma (1 - Q)) R - integral_0^rho P * M`. The pass law `Q`
/// comes from the selected mode.
pub fn prover_utility(
    params: &IncentiveParams,
    honest_fraction: f64,
    mode: UtilityMode,
) -> Result<f64, IncentiveError> {
    params.validate()?;
    check_fraction(honest_fraction)?;
    let pass = match mode {
        UtilityMode::Bound => pass_prob_bound(honest_fraction, params.alpha, params.kappa),
        UtilityMode::Exact => {
            let honest = integral_stage_count(honest_fraction, u64::from(params.stage_count))?;
            let cheats = u64::from(params.stage_count) - honest;
            pass_prob_exact(
                cheats,
                u64::from(params.stage_count),
                u64::from(params.alpha),
                params.kappa,
            )?
        }
    };
    let win = winning_prob(&params.competition, honest_fraction)?;
    let paid = winning_prob_integral(&params.competition, honest_fraction)? * params.total_cost;
    Ok(win * (pass - params.gamma * (1.0 - pass)) * params.block_reward - paid)
}

/// Utility of a prover who fabricates exactly `cheat_count` stages, under
/// the exact pass law.
pub fn prover_utility_for_cheats(
    params: &IncentiveParams,
    cheat_count: u32,
) -> Result<f64, IncentiveError> {
    let t = params.stage_count;
    if cheat_count > t {
        return Err(IncentiveError::CountOutOfRange {
            got: u64::from(cheat_count),
            max: u64::from(t),
        });
    }
    let rho = f64::from(t - cheat_count) / f64::from(t);
    prover_utility(params, rho, UtilityMode::Exact)
}

/// Individual-rationality check: honest utility and the reward threshold
/// that also covers the all-cheat deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrReport {
    /// Whether honest training has strictly positive expected utility.
    pub holds: bool,
    /// Expected utility of full honest training.
    pub honest_utility: f64,
    /// Reward strictly above this makes the mechanism individually rational
    /// with margin against the zero-work strategy. Absent when the audit is
    /// too weak: winning honestly is no likelier than passing with no work.
    pub threshold_reward: Option<f64>,
}

/// `u(1) > 0` plus the reward threshold
/// `integral P * M / (P(1) - (1 - kappa)^alpha)`.
pub fn individual_rationality(params: &IncentiveParams) -> Result<IrReport, IncentiveError> {
    params.validate()?;
    let honest_utility = prover_utility(params, 1.0, UtilityMode::Bound)?;
    let win_full = winning_prob(&params.competition, 1.0)?;
    let paid_full = winning_prob_integral(&params.competition, 1.0)? * params.total_cost;
    let denom = win_full - (1.0 - params.kappa).powi(params.alpha as i32);
    let threshold_reward = (denom > 0.0).then(|| paid_full / denom);
    Ok(IrReport {
        holds: honest_utility > 0.0,
        honest_utility,
        threshold_reward,
    })
}

fn ceil_at_least(bound: f64, floor: u32) -> u32 {
    let rounded = bound.round();
    let value = if (bound - rounded).abs() < 1e-9 {
        rounded
    } else {
        bound.ceil()
    };
    (value as u32).max(floor)
}

fn strictly_above(bound: f64) -> u32 {
    let rounded = bound.round();
    if (bound - rounded).abs() < 1e-9 {
        rounded as u32 + 1
    } else {
        bound.ceil() as u32
    }
}

/// Smallest audit count making the mechanism incentive-secure with no
/// penalty: `alpha >= max(2 (lambda + beta) / (beta kappa),
/// 2 ln(T / beta) / kappa)`, and at least 2.
pub fn min_audits_bis(params: &IncentiveParams) -> Result<u32, IncentiveError> {
    params.validate()?;
    let beta = params.cost_ratio();
    if !(0.0..1.0).contains(&beta) || beta == 0.0 {
        return Err(IncentiveError::BadParameter {
            name: "beta",
            value: beta,
            why: "cost/reward ratio must lie in (0, 1)",
        });
    }
    if params.stage_count < 2 {
        return Err(IncentiveError::BadParameter {
            name: "t_stages",
            value: f64::from(params.stage_count),
            why: "needs at least two stages",
        });
    }
    let slope_bound = 2.0 * (params.lambda + beta) / (beta * params.kappa);
    let log_bound = 2.0 * (f64::from(params.stage_count) / beta).ln() / params.kappa;
    Ok(ceil_at_least(slope_bound.max(log_bound), 2))
}

/// Smallest audit count under a penalty ratio `gamma`: strictly above
/// `max(beta / (gamma kappa), lambda / kappa)`.
pub fn min_audits_with_penalty(
    params: &IncentiveParams,
    gamma: f64,
) -> Result<u32, IncentiveError> {
    params.validate()?;
    if gamma <= 0.0 {
        return Err(IncentiveError::BadParameter {
            name: "gamma",
            value: gamma,
            why: "penalty ratio must be positive",
        });
    }
    let beta = params.cost_ratio();
    let bound = (beta / (gamma * params.kappa)).max(params.lambda / params.kappa);
    Ok(strictly_above(bound))
}

/// Verifier-incentive-security check for the full mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisReport {
    pub holds: bool,
    /// Flag fraction admissible: `2 alpha / T <= eta < 1/2`.
    pub flag_fraction_ok: bool,
    /// Flag reward sufficient: `R1 >= (M / T) (2 / eta + 1)`.
    pub flag_reward_ok: bool,
    /// The minimal sufficient flag reward.
    pub min_flag_reward: f64,
    /// Slack of the flag fraction above its lower bound `2 alpha / T`.
    pub flag_fraction_slack: f64,
    /// Slack of the flag reward above the threshold.
    pub flag_reward_slack: f64,
}

pub fn vis_check(
    audit_count: u32,
    stage_count: u32,
    flag_fraction: f64,
    flag_reward: f64,
    total_cost: f64,
) -> VisReport {
    let eta_lower = 2.0 * f64::from(audit_count) / f64::from(stage_count);
    let flag_fraction_ok = flag_fraction >= eta_lower && flag_fraction < 0.5;
    let stage_cost = total_cost / f64::from(stage_count);
    let min_flag_reward = stage_cost * (2.0 / flag_fraction + 1.0);
    let flag_reward_ok = flag_reward >= min_flag_reward;
    VisReport {
        holds: flag_fraction_ok && flag_reward_ok,
        flag_fraction_ok,
        flag_reward_ok,
        min_flag_reward,
        flag_fraction_slack: flag_fraction - eta_lower,
        flag_reward_slack: flag_reward - min_flag_reward,
    }
}

/// Probability the next audited stage is an undiscovered flag, after `found`
/// flags in `audited` stages: `(eta T - found) / (T - audited)`.
pub fn flag_discovery_prob(
    flag_fraction: f64,
    stage_count: u64,
    found: u64,
    audited: u64,
) -> Result<f64, IncentiveError> {
    check_fraction(flag_fraction)?;
    let flags = integral_stage_count(flag_fraction, stage_count)?;
    if found > flags {
        return Err(IncentiveError::CountOutOfRange {
            got: found,
            max: flags,
        });
    }
    if audited >= stage_count {
        return Err(IncentiveError::CountOutOfRange {
            got: audited,
            max: stage_count - 1,
        });
    }
    Ok((flags - found) as f64 / (stage_count - audited) as f64)
}

/// Lower bound on the discovery probability while the audit budget stays
/// within half the flags: `eta / 2`.
pub fn flag_discovery_prob_lower_bound(flag_fraction: f64) -> f64 {
    flag_fraction / 2.0
}

/// Expected utility gain from auditing one more stage when the next flag is
/// found with probability `p`: `p (R1 - M/T) - M/T`.
pub fn verifier_marginal_gain(
    discovery_prob: f64,
    flag_reward: f64,
    total_cost: f64,
    stage_count: u32,
) -> f64 {
    let stage_cost = total_cost / f64::from(stage_count);
    discovery_prob * (flag_reward - stage_cost) - stage_cost
}

/// Rewards visible to a verifier deciding whether to actually verify:
/// the best reward for finding a cheat and the expected reward when the
/// certificate passes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DilemmaParams {
    pub catch_reward: f64,
    pub pass_reward: f64,
}

/// Where honest verification stops paying for itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "epsilon")]
pub enum DilemmaThreshold {
    /// Catching pays no better than passing: reporting success without
    /// verifying dominates at every dishonest-prover rate.
    AlwaysLazy,
    /// Below this dishonest-prover rate, skipping verification dominates.
    Epsilon(f64),
}

/// The basic mechanism's lazy-verifier threshold
/// `epsilon < M / (T (v_plus - v_zero))`.
pub fn dilemma_threshold(
    params: &DilemmaParams,
    total_cost: f64,
    stage_count: u32,
) -> DilemmaThreshold {
    if params.catch_reward <= params.pass_reward {
        return DilemmaThreshold::AlwaysLazy;
    }
    let stage_cost = total_cost / f64::from(stage_count);
    DilemmaThreshold::Epsilon(stage_cost / (params.catch_reward - params.pass_reward))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exp_one() -> Competition {
        Competition::ExponentialHazard { rate: 1.0 }
    }

    /// The toy deployment used in the utility demonstrations: exponential
    /// competition, cost 10^4, reward 2*10^4, no penalty, half catch rate.
    fn demo_params(audit_count: u32) -> IncentiveParams {
        IncentiveParams {
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
            competition: exp_one(),
        }
    }

    #[test]
    fn winning_prob_families() {
        assert_eq!(winning_prob(&Competition::ConstantOne, 0.37).unwrap(), 1.0);
        assert!((winning_prob(&exp_one(), 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-12);
        let table = Competition::Table {
            points: vec![(0.0, 1.0), (0.5, 0.8), (1.0, 0.4)],
        };
        assert_eq!(winning_prob(&table, 0.0).unwrap(), 1.0);
        assert!((winning_prob(&table, 0.25).unwrap() - 0.9).abs() < 1e-12);
        assert!((winning_prob(&table, 0.75).unwrap() - 0.6).abs() < 1e-12);
        assert!(winning_prob(&exp_one(), 1.5).is_err());
    }

    #[test]
    fn table_validation() {
        let increasing = Competition::Table {
            points: vec![(0.0, 1.0), (0.4, 0.5), (1.0, 0.9)],
        };
        assert!(matches!(
            winning_prob(&increasing, 0.5),
            Err(IncentiveError::BadTable(_))
        ));
        let no_origin = Competition::Table {
            points: vec![(0.0, 0.9), (1.0, 0.5)],
        };
        assert!(no_origin.validate().is_err());
    }

    #[test]
    fn integral_matches_trapezoid_oracle() {
        let families = [
            exp_one(),
            Competition::ExponentialHazard { rate: 0.3 },
            Competition::Table {
                points: vec![(0.0, 1.0), (0.3, 0.7), (1.0, 0.25)],
            },
        ];
        for comp in &families {
            for &rho in &[0.1, 0.37, 0.5, 0.99, 1.0] {
                let panels = 100_000;
                let h = rho / panels as f64;
                let mut acc = 0.0;
                for i in 0..panels {
                    let a = winning_prob(comp, i as f64 * h).unwrap();
                    let b = winning_prob(comp, (i + 1) as f64 * h).unwrap();
                    acc += 0.5 * (a + b) * h;
                }
                let exact = winning_prob_integral(comp, rho).unwrap();
                assert!((exact - acc).abs() < 1e-6, "{comp:?} rho {rho}");
            }
        }
    }

    #[test]
    fn sunk_cost_closed_form_and_limits() {
        // (1 - 2/e) / (1 - 1/e) for the exponential family at rho = 1
        let e_inv = (-1.0f64).exp();
        let expect = (1.0 - 2.0 * e_inv) / (1.0 - e_inv);
        assert!((sunk_cost(&exp_one(), 1.0, 1.0).unwrap() - expect).abs() < 1e-6);
        assert!((sunk_cost(&exp_one(), 1.0, 1.0).unwrap() - 0.418023).abs() < 1e-6);

        // vanishes as the computed fraction goes to zero
        assert!(sunk_cost(&exp_one(), 1e-8, 1.0).unwrap() < 1e-7);

        // undefined when losing cannot happen
        assert_eq!(
            sunk_cost(&Competition::ConstantOne, 0.5, 1.0),
            Err(IncentiveError::NoLossBranch)
        );
    }

    #[test]
    fn sunk_cost_bounded_by_work_done() {
        let total_cost = 3.0;
        for &rate in &[0.2, 1.0, 4.0] {
            let comp = Competition::ExponentialHazard { rate };
            for i in 1..=20 {
                let rho = i as f64 / 20.0;
                let mu = sunk_cost(&comp, rho, total_cost).unwrap();
                assert!(mu >= 0.0 && mu <= rho * total_cost, "rate {rate} rho {rho}");
            }
        }
    }

    #[test]
    fn conditional_pass_prob_examples() {
        assert_eq!(pass_prob_given_checks(1.0, 7, 3).unwrap(), 1.0);
        assert_eq!(pass_prob_given_checks(0.5, 4, 1).unwrap(), 0.5);
        assert_eq!(pass_prob_given_checks(0.5, 4, 3).unwrap(), 0.0);
        assert!(matches!(
            pass_prob_given_checks(0.37, 10, 2),
            Err(IncentiveError::NonIntegralStageFraction(_))
        ));
    }

    #[test]
    fn conditional_pass_prob_below_power_bound() {
        for t in [4u64, 10, 50, 200] {
            for honest in 0..=t {
                let rho = honest as f64 / t as f64;
                for s in 0..=t.min(12) {
                    let q = pass_prob_given_checks(rho, t, s).unwrap();
                    assert!(q <= rho.powi(s as i32) + 1e-12, "T {t} honest {honest} s {s}");
                }
            }
        }
    }

    #[test]
    fn pass_prob_bound_examples() {
        assert_eq!(pass_prob_bound(1.0, 7, 0.5), 1.0);
        assert_eq!(pass_prob_bound(0.0, 3, 1.0), 0.0);
        assert!((pass_prob_bound(0.0, 4, 0.5) - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn exact_pass_prob_against_enumeration() {
        assert_eq!(pass_prob_exact(0, 10, 3, 0.5).unwrap(), 1.0);

        // enumerate all C(10, 2) audit pairs with 5 cheats and kappa = 1
        let t = 10u64;
        let cheats = 5u64;
        let mut pass = 0usize;
        let mut total = 0usize;
        for a in 1..=t {
            for b in (a + 1)..=t {
                total += 1;
                if a > cheats && b > cheats {
                    pass += 1;
                }
            }
        }
        let expect = pass as f64 / total as f64;
        assert!((pass_prob_exact(5, 10, 2, 1.0).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 2.0 / 9.0).abs() < 1e-12);

        // kappa = 1 keeps only the zero-overlap term
        assert!(
            (pass_prob_exact(3, 12, 4, 1.0).unwrap()
                - pass_prob_given_checks(0.75, 12, 4).unwrap())
            .abs()
                < 1e-12
        );
    }

    #[test]
    fn exact_pass_prob_below_bound_on_grid() {
        for t in [10u64, 40, 100] {
            for cheats in 0..=t {
                for alpha in [1u64, 2, 5, 10] {
                    for kappa in [0.25, 0.5, 1.0] {
                        let exact = pass_prob_exact(cheats, t, alpha, kappa).unwrap();
                        let rho = (t - cheats) as f64 / t as f64;
                        let bound = pass_prob_bound(rho, alpha as u32, kappa);
                        assert!(
                            exact <= bound + 1e-12,
                            "T {t} d {cheats} alpha {alpha} kappa {kappa}: {exact} > {bound}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn utility_demo_values() {
        let params = demo_params(4);
        // full honest work with certain victory nets reward minus cost
        let mut no_comp = params.clone();
        no_comp.competition = Competition::ConstantOne;
        assert!(
            (prover_utility(&no_comp, 1.0, UtilityMode::Bound).unwrap() - 10_000.0).abs() < 1e-9
        );

        // honest utility under the exponential race
        let e_inv = (-1.0f64).exp();
        let expect_honest = 20_000.0 * e_inv - 10_000.0 * (1.0 - e_inv);
        let honest = prover_utility(&params, 1.0, UtilityMode::Bound).unwrap();
        assert!((honest - expect_honest).abs() < 1e-9);
        assert!((honest - 1036.3832351432745).abs() < 1e-6);

        // zero honest work at four audits: passes one time in sixteen
        let zero = prover_utility(&params, 0.0, UtilityMode::Bound).unwrap();
        assert!((zero - 1250.0).abs() < 1e-9);
        assert!(zero > honest, "four audits do not deter the full cheat");

        // both pass laws agree at full honesty
        assert_eq!(
            prover_utility(&params, 1.0, UtilityMode::Exact).unwrap(),
            honest
        );
    }

    #[test]
    fn ten_audits_deter_every_cheat_count_on_grid() {
        let params = demo_params(10);
        let honest = prover_utility(&params, 1.0, UtilityMode::Bound).unwrap();
        for cheats in [1u32, 2, 5, 10, 100, 1000, 5000, 9999, 10_000] {
            let u = prover_utility_for_cheats(&params, cheats).unwrap();
            assert!(u < honest, "{cheats} cheats: {u} >= {honest}");
            let rho = f64::from(params.stage_count - cheats) / f64::from(params.stage_count);
            let ub = prover_utility(&params, rho, UtilityMode::Bound).unwrap();
            assert!(ub < honest, "{cheats} cheats (bound): {ub} >= {honest}");
        }
    }

    #[test]
    fn ir_threshold_and_asymptote() {
        let report = individual_rationality(&demo_params(10)).unwrap();
        assert!(report.holds);
        let e_inv = (-1.0f64).exp();
        let expect = 10_000.0 * (1.0 - e_inv) / (e_inv - 0.5f64.powi(10));
        let threshold = report.threshold_reward.unwrap();
        assert!((threshold - expect).abs() < 1e-6);
        // sanity range around 1.72 * 10^4
        assert!((17_200.0..17_260.0).contains(&threshold));

        // the threshold decays to M (e - 1) as the audit count grows
        let wide = individual_rationality(&demo_params(10_000)).unwrap();
        let asymptote = 10_000.0 * (std::f64::consts::E - 1.0);
        assert!((wide.threshold_reward.unwrap() - asymptote).abs() < 0.1);
        assert!((asymptote - 17_182.818).abs() < 0.01);

        // degenerate audit: passing blind is likelier than winning honestly
        let mut weak = demo_params(1);
        weak.kappa = 0.01;
        let report = individual_rationality(&weak).unwrap();
        assert!(report.threshold_reward.is_none());
    }

    #[test]
    fn bis_audit_thresholds() {
        // beta = 0.5, lambda = 1, kappa = 0.5, T = 10^4
        assert_eq!(min_audits_bis(&demo_params(10)).unwrap(), 40);

        let mut small = demo_params(10);
        small.stage_count = 100;
        small.lambda = 0.0;
        small.kappa = 1.0;
        assert_eq!(min_audits_bis(&small).unwrap(), 11);

        // monotone non-decreasing in the stage count
        let mut prev = 0;
        for t in [100u32, 1000, 10_000, 100_000] {
            let mut p = demo_params(10);
            p.stage_count = t;
            let a = min_audits_bis(&p).unwrap();
            assert!(a >= prev);
            prev = a;
        }
    }

    #[test]
    fn penalty_audit_thresholds() {
        let base = demo_params(10);
        // max(0.5 / 0.5, 1 / 0.5) = 2, strict
        assert_eq!(min_audits_with_penalty(&base, 1.0).unwrap(), 3);
        // vanishing cost term leaves lambda / kappa = 2, still strict
        assert_eq!(min_audits_with_penalty(&base, 1e12).unwrap(), 3);

        let mut flat = base.clone();
        flat.lambda = 0.0;
        // 0.5 / (0.1 * 0.5) = 10, strict
        assert_eq!(min_audits_with_penalty(&flat, 0.1).unwrap(), 11);
        assert!(min_audits_with_penalty(&base, 0.0).is_err());
    }

    #[test]
    fn vis_threshold_cases() {
        let report = vis_check(100, 10_000, 0.2, 12.0, 10_000.0);
        assert!(report.holds);
        assert!((report.min_flag_reward - 11.0).abs() < 1e-12);

        assert!(!vis_check(100, 10_000, 0.2, 10.0, 10_000.0).holds);
        assert!(!vis_check(100, 10_000, 0.5, 100.0, 10_000.0).holds);
        // flag budget below twice the audit count
        assert!(!vis_check(100, 10_000, 0.01, 100.0, 10_000.0).holds);
    }

    #[test]
    fn flag_discovery_prob_values() {
        assert_eq!(flag_discovery_prob(0.2, 10_000, 0, 0).unwrap(), 0.2);
        assert_eq!(flag_discovery_prob(0.2, 10_000, 20, 100).unwrap(), 0.2);
        assert!(flag_discovery_prob(0.2, 10_000, 2001, 0).is_err());
        assert!(flag_discovery_prob(0.2, 100, 0, 100).is_err());
    }

    #[test]
    fn flag_discovery_prob_stays_above_half_fraction() {
        // found <= audited <= alpha <= eta T / 2 keeps the pool rich enough
        for &(eta, t) in &[(0.2, 1000u64), (0.3, 10_000), (0.4, 500)] {
            let alpha = ((eta * t as f64) / 2.0) as u64;
            for audited in 0..alpha {
                for found in 0..=audited {
                    let p = flag_discovery_prob(eta, t, found, audited).unwrap();
                    assert!(
                        p > flag_discovery_prob_lower_bound(eta),
                        "eta {eta} T {t} found {found} audited {audited}"
                    );
                }
            }
        }
    }

    #[test]
    fn marginal_gain_values() {
        assert!((verifier_marginal_gain(0.2, 12.0, 10_000.0, 10_000) - 1.2).abs() < 1e-12);
        // boundary: reward at its threshold, discovery at the lower bound
        assert!(verifier_marginal_gain(0.1, 11.0, 10_000.0, 10_000).abs() < 1e-12);
        assert_eq!(verifier_marginal_gain(0.0, 12.0, 10_000.0, 10_000), -1.0);
    }

    #[test]
    fn marginal_gain_positive_whenever_vis_holds() {
        for audit_count in [10u32, 50, 100] {
            for &eta in &[0.1, 0.2, 0.3, 0.49] {
                for &reward_scale in &[1.0001, 1.5, 3.0] {
                    let t = 10_000u32;
                    let total_cost = 10_000.0;
                    let min_reward = (total_cost / f64::from(t)) * (2.0 / eta + 1.0);
                    let reward = min_reward * reward_scale;
                    let report = vis_check(audit_count, t, eta, reward, total_cost);
                    if report.holds {
                        let p = flag_discovery_prob_lower_bound(eta);
                        assert!(
                            verifier_marginal_gain(p, reward, total_cost, t) > 0.0,
                            "alpha {audit_count} eta {eta} reward {reward}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn dilemma_threshold_cases() {
        let params = DilemmaParams {
            catch_reward: 10.0,
            pass_reward: 0.0,
        };
        assert_eq!(
            dilemma_threshold(&params, 10_000.0, 10_000),
            DilemmaThreshold::Epsilon(0.1)
        );
        let flat = DilemmaParams {
            catch_reward: 5.0,
            pass_reward: 5.0,
        };
        assert_eq!(
            dilemma_threshold(&flat, 10_000.0, 10_000),
            DilemmaThreshold::AlwaysLazy
        );
        // threshold shrinks as catching pays more
        let rich = DilemmaParams {
            catch_reward: 100.0,
            pass_reward: 0.0,
        };
        match (
            dilemma_threshold(&params, 1.0, 1),
            dilemma_threshold(&rich, 1.0, 1),
        ) {
            (DilemmaThreshold::Epsilon(a), DilemmaThreshold::Epsilon(b)) => assert!(b < a),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bis_holds_literally_at_desk_scale() {
        // derive the audit count and a reward just above the threshold,
        // then check strict dominance of honesty over every cheat count
        for t in [50u32, 100, 200] {
            for kappa in [0.5, 1.0] {
                let mut params = demo_params(10);
                params.stage_count = t;
                params.kappa = kappa;
                params.alpha = t.min(min_audits_bis(&params).unwrap());
                let ir = individual_rationality(&params).unwrap();
                params.block_reward = ir.threshold_reward.unwrap() * 1.01;
                // beta moved with the new reward; re-derive until stable
                params.alpha = t.min(min_audits_bis(&params).unwrap());

                let honest = prover_utility(&params, 1.0, UtilityMode::Exact).unwrap();
                for cheats in 1..=t {
                    let u = prover_utility_for_cheats(&params, cheats).unwrap();
                    assert!(
                        u < honest,
                        "T {t} kappa {kappa} cheats {cheats}: {u} >= {honest}"
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn sunk_cost_within_work_bounds(rate in 0.05f64..5.0, rho in 0.01f64..1.0, cost in 0.1f64..100.0) {
            let comp = Competition::ExponentialHazard { rate };
            let mu = sunk_cost(&comp, rho, cost).unwrap();
            prop_assert!(mu >= -1e-12);
            prop_assert!(mu <= rho * cost + 1e-12);
        }

        #[test]
        fn exact_never_exceeds_bound(t in 2u64..150, frac in 0.0f64..1.0, alpha in 1u64..20, kappa in 0.05f64..1.0) {
            let cheats = ((t as f64) * frac) as u64;
            let alpha = alpha.min(t);
            let exact = pass_prob_exact(cheats, t, alpha, kappa).unwrap();
            let rho = (t - cheats) as f64 / t as f64;
            prop_assert!(exact <= pass_prob_bound(rho, alpha as u32, kappa) + 1e-12);
        }
    }
}
