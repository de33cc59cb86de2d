//! The optics invariant suite behind `bsm-verify`.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::fock::{dark_state_residual, unitarity_deviation, Arm, Level, PureState, Registry, WeightedEnsemble, DEFAULT_CUTOFF};
use crate::optics::{
    accept_probability, apply_bsm, ensemble_mode, link_pipeline, local_entanglement_pipeline, retrieve_t_to_s,
    swap_pipeline, BsmNetwork, OpticsError, PhaseSetting, Route,
};
use crate::params::ProtocolParams;
use crate::rates;

/// Result of one check: `worst` is the largest deviation seen.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub check: &'static str,
    pub passed: bool,
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn new(check: &'static str, worst: f64, tolerance: f64, detail: String) -> Self {
        Self { check, passed: worst <= tolerance, worst, tolerance, detail }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Grid points per phase axis.
    pub phases: usize,
    /// Replaces every per-check tolerance when set.
    pub tolerance: Option<f64>,
    /// Random parameter sets for the engine-vs-formula check.
    pub random_sets: usize,
    /// Random `(g, omega)` pairs per atom number for the dark-state check.
    pub dark_pairs: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { phases: 4, tolerance: None, random_sets: 20, dark_pairs: 100, seed: 7 }
    }
}

/// Phase grid points `2 pi j / k + 0.3`.
pub fn phase_grid(k: usize) -> Vec<PhaseSetting> {
    (0..k).map(|j| PhaseSetting(TAU * j as f64 / k as f64 + 0.3)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Worst value and its label.
#[derive(Default)]
struct Worst(f64, String);

impl Worst {
    fn see(&mut self, v: f64, label: impl FnOnce() -> String) {
        if self.1.is_empty() || v.is_nan() || v > self.0 {
            self.0 = v;
            self.1 = label();
        }
    }
}

pub fn run_suite(opts: &VerifyOptions) -> Result<Vec<Check>, OpticsError> {
    let tol = |default: f64| opts.tolerance.unwrap_or(default);
    let grid = phase_grid(opts.phases);
    let sets = [("defaults", ProtocolParams::paper_defaults()), ("ideal", ProtocolParams::ideal())];
    let mut checks = Vec::new();

    let dev = unitarity_deviation(&BsmNetwork::matrix());
    checks.push(Check::new("unitarity", dev, tol(1e-10), format!("max |U^dag U - I| = {dev:?}")));

    let mut spread = Worst::default();
    let mut infidelity = Worst::default();
    for (name, p) in &sets {
        let mut probs = Vec::new();
        for &a in &grid {
            for &b in &grid {
                let r = local_entanglement_pipeline(p, a, b)?;
                probs.push(r.accept_prob);
                infidelity.see(1.0 - r.fidelity, || format!("local {name} phi=({:?}, {:?}) F={:?}", a.0, b.0, r.fidelity));
            }
        }
        let (lo, hi) = probs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        spread.see(hi - lo, || format!("{name}: accept in [{lo:?}, {hi:?}]"));
        for (stage, r) in [("link", link_pipeline(p)?), ("swap", swap_pipeline(p)?)] {
            infidelity.see(1.0 - r.fidelity, || format!("{stage} {name} F={:?}", r.fidelity));
        }
    }
    checks.push(Check::new(
        "phase_independence",
        spread.0,
        tol(1e-10),
        format!("{}x{} grid; {}", opts.phases, opts.phases, spread.1),
    ));

    let (worst, detail) = filtering()?;
    checks.push(Check::new("filtering", worst, tol(1e-12), detail));

    let (worst, detail) = psi_rejection()?;
    checks.push(Check::new("psi_rejected", worst, tol(1e-12), detail));

    let (worst, detail) = engine_vs_formula(opts.random_sets, opts.seed)?;
    checks.push(Check::new("engine_vs_formula", worst, tol(1e-9), detail));

    let ideal = ProtocolParams::ideal();
    let mut half = Worst::default();
    for (stage, r) in [
        ("local", local_entanglement_pipeline(&ideal, PhaseSetting(0.0), PhaseSetting(0.0))?),
        ("link", link_pipeline(&ProtocolParams { l_att_km: f64::MAX, ..ideal })?),
        ("swap", swap_pipeline(&ideal)?),
    ] {
        half.see((r.accept_prob - 0.5).abs(), || format!("{stage} accept={:?}", r.accept_prob));
    }
    checks.push(Check::new("ideal_accept_half", half.0, tol(1e-10), half.1));

    checks.push(Check::new("corrected_fidelity", infidelity.0, tol(1e-9), infidelity.1));

    let (worst, detail) = dark_states(opts.dark_pairs, opts.seed)?;
    checks.push(Check::new("dark_state_residual", worst, tol(1e-12), detail));
    Ok(checks)
}

/// Accept probability of a two-site T-mode state after ideal conversion and detection.
fn herald_probability(occupation: [u8; 4]) -> Result<f64, OpticsError> {
    let reg = Registry::new([
        ensemble_mode("L", Arm::U, Level::T),
        ensemble_mode("L", Arm::D, Level::T),
        ensemble_mode("R", Arm::U, Level::T),
        ensemble_mode("R", Arm::D, Level::T),
    ])?;
    let state = PureState::from_terms(reg, DEFAULT_CUTOFF, [(occupation.to_vec(), Complex64::new(1.0, 0.0))])?;
    let photons = retrieve_t_to_s(&WeightedEnsemble::pure(state), &[Route::new("L", "a"), Route::new("R", "b")], 1.0)?;
    Ok(accept_probability(&apply_bsm(&photons, &BsmNetwork::default(), 1.0, 0.0)?))
}

/// Vacuum, single excitations and the cross-arm two-excitation terms never herald.
fn filtering() -> Result<(f64, String), OpticsError> {
    let mut cases: Vec<(String, [u8; 4])> = vec![("vacuum".into(), [0; 4])];
    for k in 0..4 {
        let mut occ = [0; 4];
        occ[k] = 1;
        cases.push((format!("single {occ:?}"), occ));
    }
    cases.push(("L_u R_d".into(), [1, 0, 0, 1]));
    cases.push(("L_d R_u".into(), [0, 1, 1, 0]));
    let mut worst = Worst::default();
    for (label, occ) in cases {
        let p = herald_probability(occ)?.abs();
        worst.see(p, || format!("{label}: accept={p:?}"));
    }
    Ok((worst.0, worst.1))
}

/// Photon pairs in the two Psi Bell states always bunch and never herald.
fn psi_rejection() -> Result<(f64, String), OpticsError> {
    let net = BsmNetwork::default();
    let reg = Registry::new(net.input_modes())?;
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let mut worst = Worst::default();
    for (label, sign) in [("Psi+", 1.0), ("Psi-", -1.0)] {
        let psi = PureState::from_terms(reg.clone(), DEFAULT_CUTOFF, [(vec![1, 0, 0, 1], h), (vec![0, 1, 1, 0], h * sign)])?;
        let p = accept_probability(&apply_bsm(&WeightedEnsemble::pure(psi), &net, 1.0, 0.0)?).abs();
        worst.see(p, || format!("{label}: accept={p:?}"));
    }
    Ok((worst.0, worst.1))
}

/// The default operating point plus `count` random parameter sets drawn from `seed`.
pub fn engine_parameter_sets(count: usize, seed: u64) -> Vec<ProtocolParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![ProtocolParams::paper_defaults()];
    for _ in 0..count {
        let mut p = ProtocolParams::paper_defaults();
        p.eta_p = rng.gen_range(0.3..=1.0);
        p.eta_s = rng.gen_range(0.3..=1.0);
        p.eta_e1 = rng.gen_range(0.01..=1.0);
        p.eta_e2 = rng.gen_range(0.3..=1.0);
        p.eta_d = rng.gen_range(0.3..=1.0);
        p.l_km = rng.gen_range(10.0..400.0);
        p.l_att_km = rng.gen_range(15.0..40.0);
        p.n = rng.gen_range(0..5);
        out.push(p);
    }
    out
}

fn engine_vs_formula(count: usize, seed: u64) -> Result<(f64, String), OpticsError> {
    let mut worst = Worst::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for (i, p) in engine_parameter_sets(count, seed).iter().enumerate() {
        let phi = (PhaseSetting(rng.gen_range(0.0..TAU)), PhaseSetting(rng.gen_range(0.0..TAU)));
        let local = local_entanglement_pipeline(p, phi.0, phi.1)?.accept_prob;
        let e = rel(local, rates::p_local(p));
        worst.see(e, || format!("set {i} p_l: engine {local:?} formula {:?}", rates::p_local(p)));
        let link = link_pipeline(p)?.accept_prob;
        let formula = rates::p_link(p).map_err(|e| OpticsError::MalformedInput(e.to_string()))?;
        let e = rel(link, formula);
        worst.see(e, || format!("set {i} p_0: engine {link:?} formula {formula:?}"));
        let swap = swap_pipeline(p)?.accept_prob;
        let e = rel(swap, rates::p_swap(p));
        worst.see(e, || format!("set {i} p_swap: engine {swap:?} formula {:?}", rates::p_swap(p)));
    }
    Ok((worst.0, format!("{} sets; worst {}", count + 1, worst.1)))
}

fn dark_states(pairs: usize, seed: u64) -> Result<(f64, String), OpticsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::default();
    for n_atoms in 1..=3 {
        for _ in 0..pairs {
            let g = rng.gen_range(0.01..10.0);
            let omega = rng.gen_range(0.01..10.0);
            let r = dark_state_residual(g, omega, n_atoms)?;
            worst.see(r, || format!("n_atoms={n_atoms} g={g:?} omega={omega:?} residual={r:?}"));
        }
    }
    Ok((worst.0, worst.1))
}
