use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;

use super::OpticsError;
use crate::fock::{Arm, Level, ModeId, Polarization, PureState, Registry, WeightedEnsemble, DEFAULT_CUTOFF};

pub const INPUT_U: ModeId = ModeId::photon("u_in", Polarization::H);
pub const INPUT_D: ModeId = ModeId::photon("d_in", Polarization::H);

/// Unknown relative phase between the two source arms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseSetting(pub f64);

impl PhaseSetting {
    /// The phase reduced to `[0, 2pi)`.
    pub fn radians(self) -> f64 {
        self.0.rem_euclid(TAU)
    }
}

/// Where a memory qubit's emitted photons go: ensemble site -> photonic path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Route {
    pub site: &'static str,
    pub path: &'static str,
}

impl Route {
    pub const fn new(site: &'static str, path: &'static str) -> Self {
        Self { site, path }
    }
}

pub fn ensemble_mode(site: &'static str, arm: Arm, level: Level) -> ModeId {
    ModeId::ensemble(site, arm, level)
}

fn arm_polarization(arm: Arm) -> Polarization {
    match arm {
        Arm::U => Polarization::H,
        Arm::D => Polarization::V,
    }
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// A single photon split over the two source arms,
/// `(|0>_u |1>_d + e^{i phi} |1>_u |0>_d) / sqrt2`.
pub fn input_photon_state(phi: PhaseSetting) -> PureState {
    let registry = Registry::new([INPUT_U, INPUT_D]).expect("distinct modes");
    PureState::from_terms(
        registry,
        DEFAULT_CUTOFF,
        [
            (vec![0, 1], Complex64::new(FRAC_1_SQRT_2, 0.0)),
            (vec![1, 0], Complex64::from_polar(FRAC_1_SQRT_2, phi.radians())),
        ],
    )
    .expect("within cutoff")
}

/// Maps the source photon onto the T modes of the ensembles at `site`. The
/// photon is absorbed with probability `eta_p * eta_s`; otherwise the
/// memory stays in its ground state.
pub fn store_to_memory(
    photon: &PureState,
    site: &'static str,
    eta_p: f64,
    eta_s: f64,
) -> Result<WeightedEnsemble, OpticsError> {
    let expected = Registry::new([INPUT_U, INPUT_D]).expect("distinct modes");
    if !photon.registry().same_modes(&expected) {
        return Err(OpticsError::MalformedInput(format!(
            "expected a state over [{expected}], got [{}]",
            photon.registry()
        )));
    }
    if photon.terms().any(|(occ, _)| occ.iter().map(|&n| u32::from(n)).sum::<u32>() != 1) {
        return Err(OpticsError::MalformedInput("input must hold exactly one photon".into()));
    }
    let t_u = ensemble_mode(site, Arm::U, Level::T);
    let t_d = ensemble_mode(site, Arm::D, Level::T);
    let stored = photon.relabel(INPUT_U, t_u)?.relabel(INPUT_D, t_d)?.normalized()?;
    let eta = eta_p * eta_s;
    let memory = WeightedEnsemble::pure(stored).apply_loss(t_u, eta)?.apply_loss(t_d, eta)?;
    Ok(memory)
}

/// Converts each T excitation at the routed sites into an S excitation plus
/// an anti-Stokes photon (H from the u ensemble, V from d) on the route's
/// path. The photon survives with probability `eta_e1`.
pub fn retrieve_t_to_s(memory: &WeightedEnsemble, routes: &[Route], eta_e1: f64) -> Result<WeightedEnsemble, OpticsError> {
    let mut out = memory.clone();
    for route in routes {
        for arm in [Arm::U, Arm::D] {
            let t = ensemble_mode(route.site, arm, Level::T);
            let s = ensemble_mode(route.site, arm, Level::S);
            let photon = ModeId::photon(route.path, arm_polarization(arm));
            out = out.try_map(|b| b.relabel(t, s)?.append_copy_of(s, photon))?;
            out = out.apply_loss(photon, eta_e1)?;
        }
    }
    Ok(out)
}

/// Reads the S excitations at the routed sites out as photons on the
/// route's path with efficiency `eta_e2`; the S modes leave the registry.
pub fn retrieve_s_to_photon(
    memory: &WeightedEnsemble,
    routes: &[Route],
    eta_e2: f64,
) -> Result<WeightedEnsemble, OpticsError> {
    let mut out = memory.clone();
    for route in routes {
        for arm in [Arm::U, Arm::D] {
            let s = ensemble_mode(route.site, arm, Level::S);
            let photon = ModeId::photon(route.path, arm_polarization(arm));
            out = out.try_map(|b| b.relabel(s, photon))?;
            out = out.apply_loss(photon, eta_e2)?;
        }
    }
    Ok(out)
}

/// `(S_u1 S_u2 + S_d1 S_d2)|vac> / sqrt2` over `[S_u1, S_d1, S_u2, S_d2]`.
pub fn pme_state(first: &'static str, second: &'static str) -> PureState {
    let registry = Registry::new([
        ensemble_mode(first, Arm::U, Level::S),
        ensemble_mode(first, Arm::D, Level::S),
        ensemble_mode(second, Arm::U, Level::S),
        ensemble_mode(second, Arm::D, Level::S),
    ])
    .expect("distinct sites");
    PureState::from_terms(
        registry,
        DEFAULT_CUTOFF,
        [(vec![1, 0, 1, 0], one() * FRAC_1_SQRT_2), (vec![0, 1, 0, 1], one() * FRAC_1_SQRT_2)],
    )
    .expect("within cutoff")
}

/// `(T_u + e^{i phi} T_d)|0_a 0_a> / sqrt2` at `site`: a perfectly stored photon.
pub fn stored_memory_state(site: &'static str, phi: PhaseSetting) -> PureState {
    let registry =
        Registry::new([ensemble_mode(site, Arm::U, Level::T), ensemble_mode(site, Arm::D, Level::T)]).expect("distinct");
    PureState::from_terms(
        registry,
        DEFAULT_CUTOFF,
        [
            (vec![1, 0], one() * FRAC_1_SQRT_2),
            (vec![0, 1], Complex64::from_polar(FRAC_1_SQRT_2, phi.radians())),
        ],
    )
    .expect("within cutoff")
}
