use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use super::bsm::{apply_bsm, classify, BsmBranch, BsmNetwork, BsmOutcome, DetectionPattern};
use super::states::{
    ensemble_mode, input_photon_state, pme_state, retrieve_s_to_photon, retrieve_t_to_s, store_to_memory, PhaseSetting,
    Route,
};
use super::OpticsError;
use crate::fock::{Arm, Level, ModeId, PureState, WeightedEnsemble};
use crate::params::ProtocolParams;
use crate::rates;

const GRID: usize = 64;
const GOLDEN_TOL: f64 = 1e-12;

/// Local correction on one memory qubit: an optional Z flip followed by a
/// phase shift, both acting on the d-arm S mode of the chosen site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub mode: ModeId,
    pub z_flip: bool,
    /// Residual phase in `(-pi/2, pi/2]`.
    pub phase: f64,
}

impl Correction {
    pub fn total_angle(&self) -> f64 {
        if self.z_flip {
            self.phase + PI
        } else {
            self.phase
        }
    }

    pub fn apply(&self, memory: &WeightedEnsemble) -> Result<WeightedEnsemble, OpticsError> {
        let angle = self.total_angle();
        Ok(memory.try_map(|b| b.phase_shift(self.mode, angle))?)
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.z_flip { "Z" } else { "I" };
        // Avoid printing -0.0000.
        let phase = if self.phase.abs() < 5e-5 { 0.0 } else { self.phase };
        write!(f, "{op}+phase({}, {phase:.4})", self.mode)
    }
}

/// Wraps into `(-pi, pi]`.
fn wrap(angle: f64) -> f64 {
    let a = (angle + PI).rem_euclid(TAU) - PI;
    if a <= -PI {
        a + TAU
    } else {
        a
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > GOLDEN_TOL {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Best fidelity to `target` reachable by a Z flip and a free phase on the
/// d-arm S mode at `site`.
///
/// Per branch the overlap splits by the occupation `k` of that mode, so the
/// fidelity is `F(a) = sum_b w_b |sum_k e^{ika} c_bk|^2`. It is maximized on
/// a grid and refined by golden-section search. A Z flip is reported when the
/// optimal angle lies closer to pi than to 0.
pub fn corrected_fidelity(
    memory: &WeightedEnsemble,
    outcome: BsmOutcome,
    target: &PureState,
    site: &'static str,
) -> Result<(f64, Correction), OpticsError> {
    if !outcome.is_accept() {
        return Err(OpticsError::Rejected);
    }
    let mode = ensemble_mode(site, Arm::D, Level::S);
    let idx = memory.registry().index_of(mode)?;
    let target = target.reordered(memory.registry())?.normalized()?;

    let coeffs: Vec<(f64, Vec<Complex64>)> = memory
        .branches()
        .iter()
        .map(|(w, s)| {
            let mut c = vec![Complex64::new(0.0, 0.0); usize::from(s.cutoff()) + 1];
            for (occ, a) in s.terms() {
                let t = target.amplitude(occ);
                if t != Complex64::new(0.0, 0.0) {
                    c[usize::from(occ[idx])] += t.conj() * a;
                }
            }
            (*w, c)
        })
        .collect();
    let fid = |alpha: f64| -> f64 {
        coeffs
            .iter()
            .map(|(w, c)| {
                let overlap: Complex64 =
                    c.iter().enumerate().map(|(k, ck)| ck * Complex64::from_polar(1.0, k as f64 * alpha)).sum();
                w * overlap.norm_sqr()
            })
            .sum()
    };

    let step = TAU / GRID as f64;
    let best = (0..GRID)
        .map(|i| -PI + step * i as f64)
        .map(|a| (a, fid(a)))
        .fold((0.0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let (alpha, f_max) = golden_max(fid, best.0 - step, best.0 + step);
    let (alpha, f_max) = if f_max >= best.1 { (wrap(alpha), f_max) } else { (wrap(best.0), best.1) };

    let z_flip = alpha.abs() > FRAC_PI_2;
    let phase = if z_flip { wrap(alpha - PI) } else { alpha };
    Ok((f_max.clamp(0.0, 1.0), Correction { mode, z_flip, phase }))
}

/// One accepted detection pattern.
#[derive(Debug, Clone)]
pub struct PatternReport {
    pub pattern: DetectionPattern,
    pub outcome: BsmOutcome,
    pub probability: f64,
    pub fidelity: f64,
    pub correction: Correction,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    /// Total probability of an accepted coincidence.
    pub accept_prob: f64,
    pub patterns: Vec<PatternReport>,
    /// Smallest corrected fidelity over the accepted patterns; 0 when nothing is accepted.
    pub fidelity: f64,
    /// Post-selected memory state, mixed over the accepted patterns before correction.
    pub memory: Option<WeightedEnsemble>,
    pub branch_count: usize,
}

/// Flat record written by the command line tool.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub accept_prob: f64,
    pub fidelity: f64,
    pub correction: String,
    pub branch_count: usize,
}

impl PipelineReport {
    /// `pattern=correction` pairs separated by `; `.
    pub fn correction_map(&self) -> String {
        self.patterns.iter().map(|p| format!("{}={}", p.pattern, p.correction)).collect::<Vec<_>>().join("; ")
    }

    pub fn summary(&self) -> PipelineSummary {
        PipelineSummary {
            accept_prob: self.accept_prob,
            fidelity: self.fidelity,
            correction: self.correction_map(),
            branch_count: self.branch_count,
        }
    }
}

fn report(branches: Vec<BsmBranch>, target: &PureState, site: &'static str) -> Result<PipelineReport, OpticsError> {
    let mut patterns = Vec::new();
    let mut accepted = Vec::new();
    for b in branches {
        let outcome = classify(&b.pattern);
        if !outcome.is_accept() {
            continue;
        }
        let (fidelity, correction) = corrected_fidelity(&b.memory, outcome, target, site)?;
        patterns.push(PatternReport { pattern: b.pattern, outcome, probability: b.probability, fidelity, correction });
        accepted.push((b.probability, b.memory));
    }
    let accept_prob = patterns.iter().map(|p| p.probability).sum();
    let fidelity = patterns.iter().map(|p| p.fidelity).reduce(f64::min).unwrap_or(0.0);
    let memory = if accepted.is_empty() {
        None
    } else {
        Some(WeightedEnsemble::mix(accepted.iter().map(|(p, e)| (*p, e)))?)
    };
    let branch_count = memory.as_ref().map_or(0, WeightedEnsemble::branch_count);
    Ok(PipelineReport { accept_prob, patterns, fidelity, memory, branch_count })
}

fn run_local(params: &ProtocolParams, phi_l: PhaseSetting, phi_r: PhaseSetting, p_d: f64) -> Result<PipelineReport, OpticsError> {
    params.validate()?;
    let left = store_to_memory(&input_photon_state(phi_l), "L", params.eta_p, params.eta_s)?;
    let right = store_to_memory(&input_photon_state(phi_r), "R", params.eta_p, params.eta_s)?;
    let memory = left.tensor(&right)?;
    let photons = retrieve_t_to_s(&memory, &[Route::new("L", "a"), Route::new("R", "b")], params.eta_e1)?;
    let branches = apply_bsm(&photons, &BsmNetwork::default(), params.eta_d, p_d)?;
    report(branches, &pme_state("L", "R"), "L")
}

/// Two sources feed ensemble pairs L and R of one node; their anti-Stokes
/// photons meet at the analyzer. Dark counts are off.
pub fn local_entanglement_pipeline(
    params: &ProtocolParams,
    phi_l: PhaseSetting,
    phi_r: PhaseSetting,
) -> Result<PipelineReport, OpticsError> {
    run_local(params, phi_l, phi_r, 0.0)
}

/// As [`local_entanglement_pipeline`] with `params.p_d` dark counts at every detector.
pub fn local_entanglement_pipeline_with_dark_counts(
    params: &ProtocolParams,
    phi_l: PhaseSetting,
    phi_r: PhaseSetting,
) -> Result<PipelineReport, OpticsError> {
    run_local(params, phi_l, phi_r, params.p_d)
}

/// Nodes A and B each hold a PME pair; the inner qubits A_R and B_L are read
/// out, sent through half an elementary link of fiber each, and analyzed.
pub fn link_pipeline(params: &ProtocolParams) -> Result<PipelineReport, OpticsError> {
    params.validate()?;
    let eta_t = rates::fiber_transmission(params.l0_km(), params.l_att_km)
        .map_err(|e| OpticsError::MalformedInput(e.to_string()))?;
    let memory = WeightedEnsemble::pure(pme_state("A_L", "A_R")).tensor(&WeightedEnsemble::pure(pme_state("B_L", "B_R")))?;
    let mut photons = retrieve_s_to_photon(&memory, &[Route::new("A_R", "a"), Route::new("B_L", "b")], params.eta_e2)?;
    let network = BsmNetwork::default();
    for m in network.input_modes() {
        photons = photons.apply_loss(m, eta_t)?;
    }
    let branches = apply_bsm(&photons, &network, params.eta_d, 0.0)?;
    report(branches, &pme_state("A_L", "B_R"), "A_L")
}

/// Pairs A-B_L and B_R-C share node B; both B qubits are read out locally
/// and analyzed, leaving A and C entangled.
pub fn swap_pipeline(params: &ProtocolParams) -> Result<PipelineReport, OpticsError> {
    params.validate()?;
    let memory = WeightedEnsemble::pure(pme_state("A", "B_L")).tensor(&WeightedEnsemble::pure(pme_state("B_R", "C")))?;
    let photons = retrieve_s_to_photon(&memory, &[Route::new("B_L", "a"), Route::new("B_R", "b")], params.eta_e2)?;
    let branches = apply_bsm(&photons, &BsmNetwork::default(), params.eta_d, 0.0)?;
    report(branches, &pme_state("A", "C"), "A")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{Registry, DEFAULT_CUTOFF};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn grid() -> Vec<(PhaseSetting, PhaseSetting)> {
        let pts: Vec<f64> = (0..4).map(|k| k as f64 * TAU / 4.0 + 0.1).collect();
        pts.iter().flat_map(|&a| pts.iter().map(move |&b| (PhaseSetting(a), PhaseSetting(b)))).collect()
    }

    #[test]
    fn ideal_local_accepts_half() {
        let r = local_entanglement_pipeline(&ProtocolParams::ideal(), PhaseSetting(0.0), PhaseSetting(0.0)).unwrap();
        assert!((r.accept_prob - 0.5).abs() < 1e-15);
        assert_eq!(r.patterns.len(), 4);
        assert!((r.fidelity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn local_at_operating_point() {
        let r = local_entanglement_pipeline(&ProtocolParams::paper_defaults(), PhaseSetting(0.3), PhaseSetting(2.0))
            .unwrap();
        let oracle = (0.9f64 * 0.9 * 0.05 * 0.9).powi(2) / 2.0;
        assert!(rel(r.accept_prob, oracle) < 1e-9, "{}", r.accept_prob);
        assert!((r.fidelity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn local_fidelity_and_phase_independence_on_grid() {
        let params = ProtocolParams::paper_defaults();
        let reference =
            local_entanglement_pipeline(&params, PhaseSetting(0.0), PhaseSetting(0.0)).unwrap().accept_prob;
        for (a, b) in grid() {
            let ideal = local_entanglement_pipeline(&ProtocolParams::ideal(), a, b).unwrap();
            assert!((ideal.fidelity - 1.0).abs() < 1e-9, "{a:?} {b:?}");
            let r = local_entanglement_pipeline(&params, a, b).unwrap();
            assert!((r.accept_prob - reference).abs() < 1e-10);
            assert!((r.fidelity - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn corrections_follow_bell_class() {
        let r = local_entanglement_pipeline(&ProtocolParams::ideal(), PhaseSetting(0.0), PhaseSetting(0.0)).unwrap();
        for p in &r.patterns {
            assert_eq!(p.correction.z_flip, p.outcome == BsmOutcome::AcceptCross, "{}", p.pattern);
            assert!(p.correction.phase.abs() < 1e-6);
        }
    }

    #[test]
    fn applied_correction_reaches_reported_fidelity() {
        let target = pme_state("L", "R");
        let r = local_entanglement_pipeline(&ProtocolParams::ideal(), PhaseSetting(1.1), PhaseSetting(4.0)).unwrap();
        let raw = r.memory.as_ref().unwrap();
        assert!(raw.fidelity(&target).unwrap() < 0.99);
        for p in &r.patterns {
            let branches = apply_bsm(
                &retrieve_t_to_s(
                    &store_to_memory(&input_photon_state(PhaseSetting(1.1)), "L", 1.0, 1.0)
                        .unwrap()
                        .tensor(&store_to_memory(&input_photon_state(PhaseSetting(4.0)), "R", 1.0, 1.0).unwrap())
                        .unwrap(),
                    &[Route::new("L", "a"), Route::new("R", "b")],
                    1.0,
                )
                .unwrap(),
                &BsmNetwork::default(),
                1.0,
                0.0,
            )
            .unwrap();
            let mem = &branches.iter().find(|b| b.pattern == p.pattern).unwrap().memory;
            let corrected = p.correction.apply(mem).unwrap();
            assert!((corrected.fidelity(&target).unwrap() - p.fidelity).abs() < 1e-12);
        }
    }

    #[test]
    fn link_and_swap() {
        let ideal = ProtocolParams::ideal();
        let l = link_pipeline(&ProtocolParams { l_km: 1e-12, ..ideal }).unwrap();
        assert!((l.accept_prob - 0.5).abs() < 1e-10);
        assert!((l.fidelity - 1.0).abs() < 1e-9);
        let s = swap_pipeline(&ideal).unwrap();
        assert!((s.accept_prob - 0.5).abs() < 1e-15);
        assert!((s.fidelity - 1.0).abs() < 1e-9);

        let d = ProtocolParams::paper_defaults();
        let l = link_pipeline(&d).unwrap();
        let oracle = 0.81 * 0.81 * (-80.0f64 / 44.0).exp().powi(2) / 2.0;
        assert!(rel(l.accept_prob, oracle) < 1e-9, "{}", l.accept_prob);
        assert!((l.fidelity - 1.0).abs() < 1e-9);
        let s = swap_pipeline(&d).unwrap();
        assert!(rel(s.accept_prob, 0.81 * 0.81 / 2.0) < 1e-9);
        assert!((s.fidelity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn engine_matches_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut p = ProtocolParams::paper_defaults();
            p.eta_p = rng.gen_range(0.3..=1.0);
            p.eta_s = rng.gen_range(0.3..=1.0);
            p.eta_e1 = rng.gen_range(0.3..=1.0);
            p.eta_e2 = rng.gen_range(0.3..=1.0);
            p.eta_d = rng.gen_range(0.3..=1.0);
            p.l_km = rng.gen_range(10.0..200.0);
            p.n = rng.gen_range(0..3);
            let phi = PhaseSetting(rng.gen_range(0.0..TAU));
            let local = local_entanglement_pipeline(&p, phi, PhaseSetting(0.5)).unwrap();
            assert!(rel(local.accept_prob, rates::p_local(&p)) < 1e-9);
            let link = link_pipeline(&p).unwrap();
            assert!(rel(link.accept_prob, rates::p_link(&p).unwrap()) < 1e-9);
            let swap = swap_pipeline(&p).unwrap();
            assert!(rel(swap.accept_prob, rates::p_swap(&p)) < 1e-9);
        }
    }

    fn accept_after_conversion(memory: PureState) -> f64 {
        let out = retrieve_t_to_s(
            &WeightedEnsemble::pure(memory),
            &[Route::new("L", "a"), Route::new("R", "b")],
            1.0,
        )
        .unwrap();
        crate::optics::accept_probability(&apply_bsm(&out, &BsmNetwork::default(), 1.0, 0.0).unwrap())
    }

    #[test]
    fn unwanted_branches_never_herald() {
        let modes = [
            ensemble_mode("L", Arm::U, Level::T),
            ensemble_mode("L", Arm::D, Level::T),
            ensemble_mode("R", Arm::U, Level::T),
            ensemble_mode("R", Arm::D, Level::T),
        ];
        let reg = Registry::new(modes).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let basis = |occ: [u8; 4]| PureState::from_terms(reg.clone(), DEFAULT_CUTOFF, [(occ.to_vec(), one)]).unwrap();
        assert_eq!(accept_after_conversion(basis([0, 0, 0, 0])), 0.0);
        for k in 0..4 {
            let mut occ = [0; 4];
            occ[k] = 1;
            assert_eq!(accept_after_conversion(basis(occ)), 0.0);
        }
        assert!(accept_after_conversion(basis([1, 0, 0, 1])) < 1e-15);
        assert!(accept_after_conversion(basis([0, 1, 1, 0])) < 1e-15);
        // The wanted terms do herald.
        assert!(accept_after_conversion(basis([1, 0, 1, 0])) > 0.4);
    }

    #[test]
    fn orthogonal_target_and_rejected_outcome() {
        let r = swap_pipeline(&ProtocolParams::ideal()).unwrap();
        let mem = r.memory.unwrap();
        let reg = Registry::new([
            ensemble_mode("A", Arm::U, Level::S),
            ensemble_mode("A", Arm::D, Level::S),
            ensemble_mode("C", Arm::U, Level::S),
            ensemble_mode("C", Arm::D, Level::S),
        ])
        .unwrap();
        let orth = PureState::from_terms(reg, 2, [(vec![2, 0, 0, 0], Complex64::new(1.0, 0.0))]).unwrap();
        let (f, _) = corrected_fidelity(&mem, BsmOutcome::AcceptSame, &orth, "A").unwrap();
        assert!(f < 1e-15);
        assert_eq!(corrected_fidelity(&mem, BsmOutcome::Reject, &pme_state("A", "C"), "A").unwrap_err(), OpticsError::Rejected);
    }

    #[test]
    fn dark_counts_cost_fidelity_linearly() {
        let base = ProtocolParams::paper_defaults();
        let infidelity = |pd: f64| {
            let p = ProtocolParams { p_d: pd, ..base };
            1.0 - local_entanglement_pipeline_with_dark_counts(&p, PhaseSetting(0.0), PhaseSetting(0.0))
                .unwrap()
                .fidelity
        };
        let (a, b) = (infidelity(1e-6), infidelity(2e-6));
        assert!(a > 0.0);
        assert!((b / a - 2.0).abs() < 0.01, "{a} {b}");
        assert!(infidelity(0.0) < 1e-9);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = ProtocolParams { eta_d: 1.5, ..ProtocolParams::ideal() };
        assert!(matches!(swap_pipeline(&p), Err(OpticsError::InvalidParams(_))));
    }

    #[test]
    fn summary_lists_corrections() {
        let r = swap_pipeline(&ProtocolParams::ideal()).unwrap();
        let s = r.summary();
        assert_eq!(s.correction.matches('=').count(), 4);
        assert!(s.correction.contains("D1&D4=Z+phase(S_Ad, 0.0000)"), "{}", s.correction);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn ideal_local_is_phase_free(a in 0.0..TAU, b in 0.0..TAU) {
            let r = local_entanglement_pipeline(&ProtocolParams::ideal(), PhaseSetting(a), PhaseSetting(b)).unwrap();
            prop_assert!((r.accept_prob - 0.5).abs() < 1e-10);
            prop_assert!((r.fidelity - 1.0).abs() < 1e-9);
        }
    }
}
