//! Monte Carlo event simulation of the full chain: local preparation, link
//! heralding over fiber, and nested swapping with retry on failure.
//!
//! A failed link attempt consumes both local pairs; a failed swap discards
//! both child links and regenerates both subtrees from scratch, in parallel.

mod chain;
mod oracle;
mod sampler;

pub use chain::{simulate_trial, simulate_trial_observed, trial_seed, ChainState, TrialResult};
pub use oracle::{exact_expected_time_small, min_overlap_integral};

use serde::Serialize;
use thiserror::Error;

use crate::exec::Execution;
use crate::params::{ProtocolParams, ValidationError};
use crate::rates::{self, RatesError};

/// Guard against trials that would not finish in reasonable time.
const MAX_EXPECTED_LINK_DRAWS: f64 = 1e8;

/// Failed subtrees are always regenerated concurrently.
pub const PARALLEL_RESTART: bool = true;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SimPolicy {
    /// Charge `L_{i-1}/c` of classical signalling to every level-`i` swap attempt.
    pub swap_comm_time: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    InvalidParams(#[from] ValidationError),
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error("expected work per trial is too large ({expected_link_draws:.3e} link draws)")]
    Intractable { expected_link_draws: f64 },
    #[error("at least one trial is required")]
    NoTrials,
    #[error("exact expectation is only available for n <= 1, got n = {0}")]
    UnsupportedDepth(u32),
}

impl SimError {
    /// True for inputs that can never produce a finished trial.
    pub fn is_guard(&self) -> bool {
        matches!(self, SimError::Rates(RatesError::ZeroProbability { .. }) | SimError::Intractable { .. })
    }
}

/// Validated per-run constants.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Setup {
    pub n: u32,
    pub p_l: f64,
    pub p0: f64,
    pub p_swap: f64,
    pub r_hz: f64,
    pub tau_s: f64,
    pub l0_km: f64,
    pub c_km_s: f64,
    pub swap_comm_time: bool,
}

impl Setup {
    pub fn new(params: &ProtocolParams, policy: &SimPolicy) -> Result<Self, SimError> {
        params.validate()?;
        let report = rates::t_total(params)?;
        let expected_link_draws = (2.0 / report.p_swap).powi(params.n as i32);
        if !(report.t_total.is_finite() && expected_link_draws <= MAX_EXPECTED_LINK_DRAWS) {
            return Err(SimError::Intractable { expected_link_draws });
        }
        Ok(Self {
            n: params.n,
            p_l: report.p_l,
            p0: report.p_0,
            p_swap: report.p_swap,
            r_hz: params.r_hz,
            tau_s: params.link_delay_s(),
            l0_km: params.l0_km(),
            c_km_s: params.c_km_s,
            swap_comm_time: policy.swap_comm_time,
        })
    }

    /// Signalling delay of a swap joining two level-`child` links.
    pub fn swap_delay_s(&self, child: u32) -> f64 {
        if self.swap_comm_time {
            self.l0_km * 2f64.powi(child as i32) / self.c_km_s
        } else {
            0.0
        }
    }
}

/// Aggregate over independent trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub trials: u64,
    pub seed: u64,
    pub mean: f64,
    /// Standard error of the mean; 0 when undefined.
    pub std_error: f64,
    pub std_error_defined: bool,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub local_prep_attempts: u128,
    pub link_attempts: u128,
    pub swap_attempts: Vec<u128>,
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn estimate(params: &ProtocolParams, policy: &SimPolicy, trials: u64, seed: u64) -> Result<Estimate, SimError> {
    estimate_with(params, policy, trials, seed, Execution::default())
}

/// Trial `i` runs on seed [`trial_seed`]`(seed, i)`; the output does not
/// depend on `exec`.
pub fn estimate_with(
    params: &ProtocolParams,
    policy: &SimPolicy,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<Estimate, SimError> {
    if trials == 0 {
        return Err(SimError::NoTrials);
    }
    let setup = Setup::new(params, policy)?;
    let results = exec.map(trials, |i| chain::run(&setup, trial_seed(seed, i), |_| {}));

    let n = trials as f64;
    let mean = results.iter().map(|r| r.total_time).sum::<f64>() / n;
    let (std_error, std_error_defined) = if trials > 1 {
        let var = results.iter().map(|r| (r.total_time - mean).powi(2)).sum::<f64>() / (n - 1.0);
        ((var / n).sqrt(), true)
    } else {
        (0.0, false)
    };
    let mut times: Vec<f64> = results.iter().map(|r| r.total_time).collect();
    times.sort_by(f64::total_cmp);
    let mut swap_attempts = vec![0u128; params.n as usize];
    for r in &results {
        for (acc, c) in swap_attempts.iter_mut().zip(&r.swap_attempts) {
            *acc += c;
        }
    }
    Ok(Estimate {
        trials,
        seed,
        mean,
        std_error,
        std_error_defined,
        p50: percentile(&times, 0.5),
        p90: percentile(&times, 0.9),
        p99: percentile(&times, 0.99),
        local_prep_attempts: results.iter().map(|r| r.local_prep_attempts).sum(),
        link_attempts: results.iter().map(|r| r.link_attempts).sum(),
        swap_attempts,
    })
}

/// Simulated mean against the closed-form total time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub mc_mean: f64,
    pub std_error: f64,
    pub analytic: f64,
    pub ratio: f64,
    pub ratio_std_error: f64,
}

pub fn compare_analytic(
    params: &ProtocolParams,
    policy: &SimPolicy,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<(Comparison, Estimate), SimError> {
    let est = estimate_with(params, policy, trials, seed, exec)?;
    let analytic = rates::t_total(params)?.t_total;
    let cmp = Comparison {
        mc_mean: est.mean,
        std_error: est.std_error,
        analytic,
        ratio: est.mean / analytic,
        ratio_std_error: est.std_error / analytic,
    };
    Ok((cmp, est))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_trial_estimate() {
        let p = ProtocolParams::paper_defaults().with_n(1);
        let e = estimate(&p, &SimPolicy::default(), 1, 3).unwrap();
        let t = simulate_trial(&p, &SimPolicy::default(), trial_seed(3, 0)).unwrap();
        assert_eq!(e.mean, t.total_time);
        assert_eq!(e.std_error, 0.0);
        assert!(!e.std_error_defined);
        assert_eq!(e.p50, t.total_time);
    }

    #[test]
    fn execution_mode_does_not_matter() {
        let p = ProtocolParams::paper_defaults().with_n(2);
        let a = estimate_with(&p, &SimPolicy::default(), 500, 11, Execution::Sequential).unwrap();
        let b = estimate_with(&p, &SimPolicy::default(), 500, 11, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }

    #[test]
    fn errors_and_guards() {
        let p = ProtocolParams::paper_defaults();
        assert_eq!(estimate(&p, &SimPolicy::default(), 0, 1).unwrap_err(), SimError::NoTrials);
        let dead = ProtocolParams { eta_d: 0.0, ..p };
        let err = estimate(&dead, &SimPolicy::default(), 10, 1).unwrap_err();
        assert!(err.is_guard(), "{err}");
        let deep = ProtocolParams { n: 40, ..p };
        assert!(estimate(&deep, &SimPolicy::default(), 10, 1).unwrap_err().is_guard());
        let bad = ProtocolParams { eta_p: 2.0, ..p };
        assert!(matches!(estimate(&bad, &SimPolicy::default(), 10, 1), Err(SimError::InvalidParams(_))));
    }

    #[test]
    fn link_attempts_match_heralding_probability() {
        let p = ProtocolParams { l_km: 80.0, n: 0, ..ProtocolParams::paper_defaults() };
        let e = estimate(&p, &SimPolicy::default(), 100_000, 5).unwrap();
        let per_link = e.link_attempts as f64 / 1e5;
        let expected = 1.0 / rates::p_link(&p).unwrap();
        assert!((per_link / expected - 1.0).abs() < 0.05, "{per_link} vs {expected}");
    }

    #[test]
    fn std_error_shrinks_with_trials() {
        let p = ProtocolParams::paper_defaults().with_n(2);
        let mut ratios = Vec::new();
        for seed in 0..8 {
            let a = estimate(&p, &SimPolicy::default(), 1000, seed).unwrap().std_error;
            let b = estimate(&p, &SimPolicy::default(), 2000, seed + 100).unwrap().std_error;
            ratios.push(b / a);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.1, "{mean}");
    }

    #[test]
    fn worse_detectors_never_help() {
        let p = ProtocolParams::paper_defaults().with_n(2);
        let worse = ProtocolParams { eta_d: 0.8, ..p };
        let a = estimate(&p, &SimPolicy::default(), 4000, 21).unwrap();
        let b = estimate(&worse, &SimPolicy::default(), 4000, 21).unwrap();
        assert!(b.mean > a.mean - 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt());
    }

    #[test]
    fn ideal_chain_is_slower_than_formula() {
        // Unit efficiencies still leave every heralding step at probability 1/2.
        let p = ProtocolParams { r_hz: 1e6, l_km: 800.0, ..ProtocolParams::ideal() }.with_n(2);
        let (c, _) = compare_analytic(&p, &SimPolicy::default(), 4000, 1, Execution::default()).unwrap();
        assert!(c.ratio >= 0.99, "{c:?}");
    }

    #[test]
    fn percentiles_ordered() {
        let p = ProtocolParams::paper_defaults().with_n(1);
        let e = estimate(&p, &SimPolicy::default(), 2000, 4).unwrap();
        assert!(e.p50 <= e.p90 && e.p90 <= e.p99);
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.0);
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 0.99), 4.0);
    }
}
