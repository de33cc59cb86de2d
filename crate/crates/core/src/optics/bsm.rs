//! Four-detector polarization Bell analyzer.
//!
//! Photons enter on paths `a` and `b`. A central PBS transmits H and reflects
//! V, sending `a_H, b_V` into arm `c` and `a_V, b_H` into arm `d`. Each arm
//! ends in a PBS in the diagonal basis, transmitting |+> and reflecting |->,
//! followed by number-resolving detectors D1 = c+, D2 = c-, D3 = d+, D4 = d-.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::OpticsError;
use crate::fock::{ModeId, Polarization, WeightedEnsemble};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BsmNetwork {
    pub path_a: &'static str,
    pub path_b: &'static str,
}

impl Default for BsmNetwork {
    fn default() -> Self {
        Self { path_a: "a", path_b: "b" }
    }
}

impl BsmNetwork {
    /// `[a_H, a_V, b_H, b_V]`. After [`BsmNetwork::matrix`] is applied over
    /// these modes, position `k` holds detector `D(k+1)`.
    pub fn input_modes(&self) -> [ModeId; 4] {
        [
            ModeId::photon(self.path_a, Polarization::H),
            ModeId::photon(self.path_a, Polarization::V),
            ModeId::photon(self.path_b, Polarization::H),
            ModeId::photon(self.path_b, Polarization::V),
        ]
    }

    /// Central PBS: inputs `[a_H, a_V, b_H, b_V]` -> arms `[c_H, c_V, d_H, d_V]`.
    pub fn central_pbs() -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(4, 4);
        let one = Complex64::new(1.0, 0.0);
        m[(0, 0)] = one; // a_H -> c_H
        m[(3, 1)] = one; // a_V -> d_V
        m[(2, 2)] = one; // b_H -> d_H
        m[(1, 3)] = one; // b_V -> c_V
        m
    }

    /// Diagonal-basis PBS on both arms: `[c_H, c_V, d_H, d_V]` -> `[D1, D2, D3, D4]`.
    pub fn diagonal_pbs() -> DMatrix<Complex64> {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let mut m = DMatrix::zeros(4, 4);
        for arm in 0..2 {
            let (hcol, vcol, plus, minus) = (2 * arm, 2 * arm + 1, 2 * arm, 2 * arm + 1);
            m[(plus, hcol)] = h;
            m[(minus, hcol)] = h;
            m[(plus, vcol)] = h;
            m[(minus, vcol)] = -h;
        }
        m
    }

    /// Composed input -> detector mode map.
    pub fn matrix() -> DMatrix<Complex64> {
        Self::diagonal_pbs() * Self::central_pbs()
    }
}

/// Recorded photon counts at D1..D4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct DetectionPattern {
    pub counts: [u8; 4],
}

impl DetectionPattern {
    pub fn new(counts: [u8; 4]) -> Self {
        Self { counts }
    }

    /// Builds a pattern from `(detector number 1..=4, count)` pairs.
    pub fn from_clicks(clicks: &[(usize, u8)]) -> Self {
        let mut counts = [0; 4];
        for &(d, n) in clicks {
            assert!((1..=4).contains(&d), "detectors are numbered 1..=4");
            counts[d - 1] += n;
        }
        Self { counts }
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().map(|&n| u32::from(n)).sum()
    }
}

impl fmt::Display for DetectionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &n) in self.counts.iter().enumerate() {
            if n > 0 {
                if !first {
                    f.write_str("&")?;
                }
                first = false;
                if n == 1 {
                    write!(f, "D{}", i + 1)?;
                } else {
                    write!(f, "D{}x{}", i + 1, n)?;
                }
            }
        }
        if first {
            f.write_str("none")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BsmOutcome {
    /// D1&D3 or D2&D4.
    AcceptSame,
    /// D1&D4 or D2&D3.
    AcceptCross,
    Reject,
}

impl BsmOutcome {
    pub fn is_accept(self) -> bool {
        self != BsmOutcome::Reject
    }
}

/// Accepts exactly the four single-click coincidences pairing one detector
/// of arm c with one of arm d.
pub fn classify(pattern: &DetectionPattern) -> BsmOutcome {
    if pattern.total() != 2 || pattern.counts.iter().any(|&n| n > 1) {
        return BsmOutcome::Reject;
    }
    match pattern.counts {
        [1, 0, 1, 0] | [0, 1, 0, 1] => BsmOutcome::AcceptSame,
        [1, 0, 0, 1] | [0, 1, 1, 0] => BsmOutcome::AcceptCross,
        _ => BsmOutcome::Reject,
    }
}

/// One recorded pattern with its probability and the post-measurement state
/// of everything that was not detected.
#[derive(Debug, Clone)]
pub struct BsmBranch {
    pub pattern: DetectionPattern,
    pub probability: f64,
    pub memory: WeightedEnsemble,
}

/// Runs `photons` through the analyzer with detector efficiency `eta_d`.
/// Each detector independently adds one dark click with probability `p_d`.
/// Branches are returned sorted by pattern; identical recorded patterns are merged.
pub fn apply_bsm(
    photons: &WeightedEnsemble,
    network: &BsmNetwork,
    eta_d: f64,
    p_d: f64,
) -> Result<Vec<BsmBranch>, OpticsError> {
    if !(0.0..1.0).contains(&p_d) {
        return Err(OpticsError::InvalidDarkCount(p_d));
    }
    let modes = network.input_modes();
    let u = BsmNetwork::matrix();
    let mut state = photons.try_map(|b| b.apply_linear_map(&modes, &u))?;
    for m in modes {
        state = state.apply_loss(m, eta_d)?;
    }

    let mut frontier: Vec<([u8; 4], f64, WeightedEnsemble)> = vec![([0; 4], 1.0, state)];
    for (k, m) in modes.iter().enumerate() {
        let mut next = Vec::new();
        for (counts, p, ens) in frontier {
            for outcome in ens.measure_number(*m)? {
                let mut c = counts;
                c[k] = outcome.count;
                next.push((c, p * outcome.probability, outcome.conditional));
            }
        }
        frontier = next;
    }

    let mut merged: BTreeMap<[u8; 4], Vec<(f64, WeightedEnsemble)>> = BTreeMap::new();
    for (counts, p, ens) in frontier {
        if p_d == 0.0 {
            merged.entry(counts).or_default().push((p, ens));
            continue;
        }
        for mask in 0u8..16 {
            let mut recorded = counts;
            let mut q = p;
            for (d, slot) in recorded.iter_mut().enumerate() {
                if mask & (1 << d) != 0 {
                    *slot += 1;
                    q *= p_d;
                } else {
                    q *= 1.0 - p_d;
                }
            }
            if q > 0.0 {
                merged.entry(recorded).or_default().push((q, ens.clone()));
            }
        }
    }

    merged
        .into_iter()
        .map(|(counts, parts)| {
            let probability: f64 = parts.iter().map(|(p, _)| p).sum();
            let memory = if parts.len() == 1 {
                parts.into_iter().next().expect("one part").1
            } else {
                WeightedEnsemble::mix(parts.iter().map(|(p, e)| (*p, e)))?
            };
            Ok(BsmBranch { pattern: DetectionPattern::new(counts), probability, memory })
        })
        .collect()
}

/// Total probability of accepted coincidences.
pub fn accept_probability(branches: &[BsmBranch]) -> f64 {
    branches.iter().filter(|b| classify(&b.pattern).is_accept()).map(|b| b.probability).sum()
}
