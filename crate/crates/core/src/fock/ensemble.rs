use num_complex::Complex64;

use super::{FockError, ModeId, PureState, Registry, WEIGHT_EPS};

const MERGE_EPS: f64 = 1e-12;

/// A mixed state written as a convex combination of pure branches over one registry.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnsemble {
    registry: Registry,
    branches: Vec<(f64, PureState)>,
}

/// One outcome of a number-resolved measurement.
#[derive(Debug, Clone)]
pub struct MeasurementOutcome {
    pub count: u8,
    pub probability: f64,
    /// Post-measurement state with the measured mode removed.
    pub conditional: WeightedEnsemble,
}

fn binomial(n: u8, k: u8) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

impl WeightedEnsemble {
    pub fn pure(state: PureState) -> Self {
        Self { registry: state.registry().clone(), branches: vec![(1.0, state)] }
    }

    /// Builds an ensemble from weighted states. Each state is normalized and
    /// the weights are rescaled to sum to one.
    pub fn from_branches(branches: impl IntoIterator<Item = (f64, PureState)>) -> Result<Self, FockError> {
        let mut out = Vec::new();
        let mut registry: Option<Registry> = None;
        for (w, s) in branches {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(FockError::InvalidWeight(w));
            }
            match &registry {
                None => registry = Some(s.registry().clone()),
                Some(r) if r != s.registry() => {
                    return Err(FockError::RegistryMismatch(r.clone(), s.registry().clone()))
                }
                _ => {}
            }
            if w > 0.0 {
                out.push((w, s.normalized()?));
            }
        }
        let registry = registry.ok_or(FockError::EmptyEnsemble)?;
        Self::finish(registry, out)
    }

    /// Convex mixture of ensembles sharing a registry.
    pub fn mix<'a>(parts: impl IntoIterator<Item = (f64, &'a WeightedEnsemble)>) -> Result<Self, FockError> {
        let mut registry: Option<Registry> = None;
        let mut branches = Vec::new();
        for (w, e) in parts {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(FockError::InvalidWeight(w));
            }
            match &registry {
                None => registry = Some(e.registry.clone()),
                Some(r) if *r != e.registry => return Err(FockError::RegistryMismatch(r.clone(), e.registry.clone())),
                _ => {}
            }
            branches.extend(e.branches.iter().map(|(bw, s)| (w * bw, s.clone())));
        }
        let registry = registry.ok_or(FockError::EmptyEnsemble)?;
        Self::finish(registry, branches)
    }

    fn finish(registry: Registry, mut branches: Vec<(f64, PureState)>) -> Result<Self, FockError> {
        let total: f64 = branches.iter().map(|(w, _)| w).sum();
        if total <= 0.0 {
            return Err(FockError::EmptyEnsemble);
        }
        branches.retain(|(w, _)| w / total >= WEIGHT_EPS);
        // Branches equal up to a global phase describe the same projector.
        let mut merged: Vec<(f64, PureState)> = Vec::with_capacity(branches.len());
        'outer: for (w, s) in branches {
            for (mw, ms) in merged.iter_mut() {
                if ms.term_count() == s.term_count() && ms.inner(&s)?.norm_sqr() >= 1.0 - MERGE_EPS {
                    *mw += w;
                    continue 'outer;
                }
            }
            merged.push((w, s));
        }
        let mut branches = merged;
        let total: f64 = branches.iter().map(|(w, _)| w).sum();
        for (w, _) in branches.iter_mut() {
            *w /= total;
        }
        Ok(Self { registry, branches })
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn branches(&self) -> &[(f64, PureState)] {
        &self.branches
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn weight_sum(&self) -> f64 {
        self.branches.iter().map(|(w, _)| w).sum()
    }

    /// Applies a fallible per-branch transformation that must preserve the norm
    /// (relabeling, unitaries). The weights are kept.
    pub fn try_map(&self, f: impl Fn(&PureState) -> Result<PureState, FockError>) -> Result<Self, FockError> {
        let branches: Vec<(f64, PureState)> =
            self.branches.iter().map(|(w, s)| Ok((*w, f(s)?))).collect::<Result<_, FockError>>()?;
        let registry = match branches.first() {
            Some((_, s)) => s.registry().clone(),
            None => return Err(FockError::EmptyEnsemble),
        };
        Ok(Self { registry, branches })
    }

    /// Tensor product with another ensemble over disjoint modes.
    pub fn tensor(&self, other: &WeightedEnsemble) -> Result<Self, FockError> {
        let mut branches = Vec::with_capacity(self.branches.len() * other.branches.len());
        for (wa, a) in &self.branches {
            for (wb, b) in &other.branches {
                branches.push((wa * wb, a.tensor(b)?));
            }
        }
        let registry = self.registry.with_appended(other.registry.modes())?;
        Self::finish(registry, branches)
    }

    /// Photon loss on `mode`: a beamsplitter of transmissivity `eta` into a
    /// fresh environment mode that is traced out immediately. Branch `k` of
    /// the output carries the terms where `k` quanta were lost.
    pub fn apply_loss(&self, mode: ModeId, eta: f64) -> Result<Self, FockError> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(FockError::InvalidProbability(eta));
        }
        let i = self.registry.index_of(mode)?;
        if eta == 1.0 {
            return Ok(self.clone());
        }
        let mut branches = Vec::new();
        for (w, state) in &self.branches {
            for lost in 0..=state.cutoff() {
                let terms: Vec<(Vec<u8>, Complex64)> = state
                    .terms()
                    .filter(|(occ, _)| occ[i] >= lost)
                    .map(|(occ, a)| {
                        let n = occ[i];
                        let kraus = binomial(n, lost)
                            * eta.powi(i32::from(n - lost))
                            * (1.0 - eta).powi(i32::from(lost));
                        let mut next = occ.clone();
                        next[i] = n - lost;
                        (next, a * kraus.sqrt())
                    })
                    .collect();
                let branch = PureState::from_terms(state.registry().clone(), state.cutoff(), terms)?;
                let p = branch.norm_sqr();
                if p > 0.0 {
                    branches.push((w * p, branch.normalized()?));
                }
            }
        }
        Self::finish(self.registry.clone(), branches)
    }

    /// Number-resolved measurement of `mode`. Returns every outcome with
    /// nonzero probability, in increasing count order.
    pub fn measure_number(&self, mode: ModeId) -> Result<Vec<MeasurementOutcome>, FockError> {
        let i = self.registry.index_of(mode)?;
        let cutoff = self.branches.iter().map(|(_, s)| s.cutoff()).max().unwrap_or(0);
        let reduced = self.registry.without(i);
        let mut outcomes = Vec::new();
        for count in 0..=cutoff {
            let mut branches = Vec::new();
            let mut probability = 0.0;
            for (w, s) in &self.branches {
                let projected = s.project_out(mode, count)?;
                let p = w * projected.norm_sqr();
                if p > 0.0 {
                    probability += p;
                    branches.push((p, projected.normalized()?));
                }
            }
            if probability > 0.0 {
                let conditional = Self::finish(reduced.clone(), branches)?;
                outcomes.push(MeasurementOutcome { count, probability, conditional });
            }
        }
        Ok(outcomes)
    }

    /// `sum_k w_k |<target|psi_k>|^2`. The target may list the same modes in a
    /// different order.
    pub fn fidelity(&self, target: &PureState) -> Result<f64, FockError> {
        let target = target.reordered(&self.registry)?.normalized()?;
        let mut f = 0.0;
        for (w, s) in &self.branches {
            f += w * target.inner(s)?.norm_sqr();
        }
        Ok(f)
    }

    /// Largest total excitation number over all branches.
    pub fn max_excitation(&self) -> u32 {
        self.branches.iter().map(|(_, s)| s.max_excitation()).max().unwrap_or(0)
    }
}
