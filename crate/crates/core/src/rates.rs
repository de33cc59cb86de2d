//! Closed-form success probabilities, waiting times, total distribution time
//! and dark-count infidelity of the repeater chain.

use serde::Serialize;
use thiserror::Error;

use crate::params::ProtocolParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RatesError {
    #[error("attenuation length must be positive, got {0}")]
    NonPositiveAttenuation(f64),
    #[error("{stage} succeeds with probability zero; the chain never completes")]
    ZeroProbability { stage: &'static str },
    #[error("empty range [{min}, {max}]")]
    EmptyRange { min: u32, max: u32 },
    #[error("degenerate parameters: {0}")]
    Degenerate(&'static str),
}

/// Every derived analytic quantity for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    pub eta_t: f64,
    pub p_l: f64,
    pub p_0: f64,
    pub p_swap: f64,
    pub t_l: f64,
    pub t_0: f64,
    pub t_total: f64,
    pub delta_f: f64,
}

impl RateReport {
    pub const FIELDS: [&'static str; 8] = ["eta_t", "p_l", "p_0", "p_swap", "t_l", "t_0", "t_total", "delta_f"];

    pub fn values(&self) -> [f64; 8] {
        [self.eta_t, self.p_l, self.p_0, self.p_swap, self.t_l, self.t_0, self.t_total, self.delta_f]
    }
}

/// Photon transmission over half an elementary link, `exp(-l0 / (2 l_att))`.
pub fn fiber_transmission(l0_km: f64, l_att_km: f64) -> Result<f64, RatesError> {
    if l_att_km.is_nan() || l_att_km <= 0.0 {
        return Err(RatesError::NonPositiveAttenuation(l_att_km));
    }
    Ok((-l0_km / (2.0 * l_att_km)).exp())
}

/// Local entanglement success probability per source pulse.
pub fn p_local(p: &ProtocolParams) -> f64 {
    (p.eta_p * p.eta_s * p.eta_e1 * p.eta_d).powi(2) / 2.0
}

/// Mean local preparation time `1 / (r p_l)`.
pub fn t_local(p: &ProtocolParams) -> Result<f64, RatesError> {
    let pl = p_local(p);
    if pl <= 0.0 {
        return Err(RatesError::ZeroProbability { stage: "local entanglement" });
    }
    Ok(1.0 / (p.r_hz * pl))
}

/// Elementary link heralding probability at `L0 = L / 2^n`.
pub fn p_link(p: &ProtocolParams) -> Result<f64, RatesError> {
    let eta_t = fiber_transmission(p.l0_km(), p.l_att_km)?;
    Ok((p.eta_e2 * p.eta_d * eta_t).powi(2) / 2.0)
}

/// Swap success probability; identical at every level.
pub fn p_swap(p: &ProtocolParams) -> f64 {
    (p.eta_e2 * p.eta_d).powi(2) / 2.0
}

/// Full analytic report. `t_total = (L0/c + T_l) / (p_0 p_swap^n)`.
pub fn t_total(p: &ProtocolParams) -> Result<RateReport, RatesError> {
    let eta_t = fiber_transmission(p.l0_km(), p.l_att_km)?;
    let p_l = p_local(p);
    let t_l = t_local(p)?;
    let p_0 = p_link(p)?;
    if p_0 <= 0.0 {
        return Err(RatesError::ZeroProbability { stage: "elementary link" });
    }
    let p_s = p_swap(p);
    if p.n > 0 && p_s <= 0.0 {
        return Err(RatesError::ZeroProbability { stage: "entanglement swapping" });
    }
    let t_0 = p.link_delay_s() + t_l;
    let chain = p_0 * p_s.powi(p.n as i32);
    if chain <= 0.0 {
        return Err(RatesError::ZeroProbability { stage: "chain (underflow)" });
    }
    Ok(RateReport {
        eta_t,
        p_l,
        p_0,
        p_swap: p_s,
        t_l,
        t_0,
        t_total: t_0 / chain,
        delta_f: delta_f(p.n, p.p_d),
    })
}

/// Infidelity from dark counts during local preparation, `2^(n+1) p_d`.
pub fn delta_f(n: u32, p_d: f64) -> f64 {
    2f64.powi(n as i32 + 1) * p_d
}

/// Repetition rate at which local preparation time equals the link
/// communication time: `r* = c / (L0 p_l)`.
pub fn balance_rate(p: &ProtocolParams) -> Result<f64, RatesError> {
    let pl = p_local(p);
    if pl <= 0.0 {
        return Err(RatesError::ZeroProbability { stage: "local entanglement" });
    }
    let l0 = p.l0_km();
    if l0.is_nan() || l0 <= 0.0 {
        return Err(RatesError::Degenerate("elementary length must be positive"));
    }
    Ok(p.c_km_s / (l0 * pl))
}

/// Number of swap levels in `[n_min, n_max]` minimizing `t_total`, ties to
/// the smaller `n`.
pub fn optimal_n(p: &ProtocolParams, n_min: u32, n_max: u32) -> Result<(u32, RateReport), RatesError> {
    if n_min > n_max {
        return Err(RatesError::EmptyRange { min: n_min, max: n_max });
    }
    let mut best: Option<(u32, RateReport)> = None;
    for n in n_min..=n_max {
        let report = t_total(&p.with_n(n))?;
        if best.is_none_or(|(_, b)| report.t_total < b.t_total) {
            best = Some((n, report));
        }
    }
    Ok(best.expect("nonempty range"))
}
