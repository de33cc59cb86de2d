use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{FockError, ModeId, Registry, AMPLITUDE_EPS, DEFAULT_CUTOFF, UNITARITY_TOL};

pub type Occupation = Vec<u8>;

/// Sparse pure state: occupation vector (in registry order) -> amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    registry: Registry,
    cutoff: u8,
    amps: BTreeMap<Occupation, Complex64>,
}

fn factorial_sqrt(n: u8) -> f64 {
    (1..=n as u32).map(f64::from).product::<f64>().sqrt()
}

impl PureState {
    pub fn vacuum(registry: Registry) -> Result<Self, FockError> {
        Self::vacuum_with_cutoff(registry, DEFAULT_CUTOFF)
    }

    pub fn vacuum_with_cutoff(registry: Registry, cutoff: u8) -> Result<Self, FockError> {
        if registry.is_empty() {
            return Err(FockError::EmptyRegistry);
        }
        let mut amps = BTreeMap::new();
        amps.insert(vec![0; registry.len()], Complex64::new(1.0, 0.0));
        Ok(Self { registry, cutoff, amps })
    }

    /// The zero vector on `registry`; a starting point for superpositions.
    pub fn zero(registry: Registry, cutoff: u8) -> Self {
        Self { registry, cutoff, amps: BTreeMap::new() }
    }

    /// Builds a state from explicit terms. Not normalized.
    pub fn from_terms(
        registry: Registry,
        cutoff: u8,
        terms: impl IntoIterator<Item = (Occupation, Complex64)>,
    ) -> Result<Self, FockError> {
        let mut state = Self::zero(registry, cutoff);
        for (occ, amp) in terms {
            assert_eq!(occ.len(), state.registry.len(), "occupation length");
            if let Some(i) = occ.iter().position(|&n| n > cutoff) {
                return Err(FockError::CutoffExceeded { mode: state.registry.modes()[i], cutoff });
            }
            *state.amps.entry(occ).or_default() += amp;
        }
        state.prune();
        Ok(state)
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn cutoff(&self) -> u8 {
        self.cutoff
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.amps.iter()
    }

    pub fn term_count(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitude(&self, occupation: &[u8]) -> Complex64 {
        self.amps.get(occupation).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn normalized(mut self) -> Result<Self, FockError> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 {
            return Err(FockError::ZeroNorm);
        }
        for a in self.amps.values_mut() {
            *a /= norm;
        }
        self.prune();
        Ok(self)
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        for a in self.amps.values_mut() {
            *a *= factor;
        }
        self.prune();
        self
    }

    /// `self + factor * other`.
    pub fn add_scaled(mut self, other: &PureState, factor: Complex64) -> Result<Self, FockError> {
        self.check_registry(other)?;
        for (occ, a) in &other.amps {
            *self.amps.entry(occ.clone()).or_default() += factor * a;
        }
        self.prune();
        Ok(self)
    }

    /// Bosonic creation operator on `mode`, including the sqrt(n+1) factor.
    pub fn create(&self, mode: ModeId) -> Result<Self, FockError> {
        let i = self.registry.index_of(mode)?;
        let mut out = Self::zero(self.registry.clone(), self.cutoff);
        for (occ, a) in &self.amps {
            if occ[i] >= self.cutoff {
                return Err(FockError::CutoffExceeded { mode, cutoff: self.cutoff });
            }
            let mut next = occ.clone();
            next[i] += 1;
            out.amps.insert(next, a * f64::from(occ[i] + 1).sqrt());
        }
        Ok(out)
    }

    /// Bosonic annihilation operator on `mode`, including the sqrt(n) factor.
    pub fn annihilate(&self, mode: ModeId) -> Result<Self, FockError> {
        let i = self.registry.index_of(mode)?;
        let mut out = Self::zero(self.registry.clone(), self.cutoff);
        for (occ, a) in &self.amps {
            if occ[i] == 0 {
                continue;
            }
            let mut next = occ.clone();
            next[i] -= 1;
            out.amps.insert(next, a * f64::from(occ[i]).sqrt());
        }
        Ok(out)
    }

    /// Multiplies each term by `exp(i * angle * n)` where `n` is the occupation of `mode`.
    pub fn phase_shift(&self, mode: ModeId, angle: f64) -> Result<Self, FockError> {
        let i = self.registry.index_of(mode)?;
        let mut out = self.clone();
        for (occ, a) in out.amps.iter_mut() {
            *a *= Complex64::from_polar(1.0, angle * f64::from(occ[i]));
        }
        Ok(out)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64, FockError> {
        self.check_registry(other)?;
        let (small, large, conj_small) = if self.amps.len() <= other.amps.len() {
            (&self.amps, &other.amps, true)
        } else {
            (&other.amps, &self.amps, false)
        };
        let mut acc = Complex64::default();
        for (occ, a) in small {
            if let Some(b) = large.get(occ) {
                acc += if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        Ok(acc)
    }

    /// Applies the passive linear-optical map `a_i^dag -> sum_j U[j][i] a_j^dag`
    /// over `modes` (in the given order) to every basis term.
    pub fn apply_linear_map(&self, modes: &[ModeId], u: &DMatrix<Complex64>) -> Result<Self, FockError> {
        let m = modes.len();
        if u.nrows() != m || u.ncols() != m {
            return Err(FockError::DimensionMismatch { rows: u.nrows(), cols: u.ncols(), modes: m });
        }
        let deviation = unitarity_deviation(u);
        if deviation > UNITARITY_TOL {
            return Err(FockError::NonUnitary { deviation });
        }
        let mut idx = Vec::with_capacity(m);
        for &mode in modes {
            if !mode.is_optical() {
                return Err(FockError::NotOptical(mode));
            }
            let i = self.registry.index_of(mode)?;
            if idx.contains(&i) {
                return Err(FockError::DuplicateMode(mode));
            }
            idx.push(i);
        }

        let mut out = Self::zero(self.registry.clone(), self.cutoff);
        for (occ, amp) in &self.amps {
            // Expand prod_k (sum_j U[j][k] a_j^dag)^{n_k} as a polynomial in output creation operators.
            let mut poly: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
            poly.insert(vec![0; m], Complex64::new(1.0, 0.0));
            let mut input_norm = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                input_norm *= factorial_sqrt(occ[i]);
                for _ in 0..occ[i] {
                    let mut next: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
                    for (mono, c) in &poly {
                        for j in 0..m {
                            let ujk = u[(j, k)];
                            if ujk == Complex64::default() {
                                continue;
                            }
                            let mut mono2 = mono.clone();
                            mono2[j] += 1;
                            *next.entry(mono2).or_default() += c * ujk;
                        }
                    }
                    poly = next;
                }
            }
            for (mono, c) in poly {
                let out_norm: f64 = mono.iter().map(|&n| factorial_sqrt(n)).product();
                let mut next = occ.clone();
                for (j, &i) in idx.iter().enumerate() {
                    next[i] = mono[j];
                }
                *out.amps.entry(next).or_default() += amp * c * (out_norm / input_norm);
            }
        }
        out.prune();
        // Overflow is checked after interference so that cancelling terms are allowed.
        for occ in out.amps.keys() {
            if let Some(&i) = idx.iter().find(|&&i| occ[i] > self.cutoff) {
                return Err(FockError::CutoffExceeded { mode: self.registry.modes()[i], cutoff: self.cutoff });
            }
        }
        Ok(out)
    }

    /// Unnormalized projection onto `mode` holding exactly `count` quanta;
    /// the mode is removed from the registry of the result.
    pub fn project_out(&self, mode: ModeId, count: u8) -> Result<Self, FockError> {
        let i = self.registry.index_of(mode)?;
        let mut out = Self::zero(self.registry.without(i), self.cutoff);
        for (occ, a) in &self.amps {
            if occ[i] == count {
                let mut next = occ.clone();
                next.remove(i);
                out.amps.insert(next, *a);
            }
        }
        Ok(out)
    }

    /// Renames `from` to `to`, keeping occupations.
    pub fn relabel(&self, from: ModeId, to: ModeId) -> Result<Self, FockError> {
        let i = self.registry.index_of(from)?;
        Ok(Self { registry: self.registry.with_replaced(i, to)?, ..self.clone() })
    }

    /// Appends `new` to the registry with, in every term, the same occupation
    /// as `source`. Models processes that emit one photon per stored excitation.
    pub fn append_copy_of(&self, source: ModeId, new: ModeId) -> Result<Self, FockError> {
        let i = self.registry.index_of(source)?;
        let registry = self.registry.with_appended(&[new])?;
        let amps = self
            .amps
            .iter()
            .map(|(occ, a)| {
                let mut next = occ.clone();
                next.push(occ[i]);
                (next, *a)
            })
            .collect();
        Ok(Self { registry, cutoff: self.cutoff, amps })
    }

    /// Tensor product; registries must be disjoint.
    pub fn tensor(&self, other: &PureState) -> Result<Self, FockError> {
        let registry = self.registry.with_appended(other.registry.modes())?;
        let mut out = Self::zero(registry, self.cutoff.max(other.cutoff));
        for (oa, a) in &self.amps {
            for (ob, b) in &other.amps {
                let mut occ = oa.clone();
                occ.extend_from_slice(ob);
                out.amps.insert(occ, a * b);
            }
        }
        out.prune();
        Ok(out)
    }

    /// Same state expressed over `registry`, which must hold the same modes.
    pub fn reordered(&self, registry: &Registry) -> Result<Self, FockError> {
        if self.registry == *registry {
            return Ok(self.clone());
        }
        if !self.registry.same_modes(registry) {
            return Err(FockError::RegistryMismatch(self.registry.clone(), registry.clone()));
        }
        let perm: Vec<usize> = registry
            .modes()
            .iter()
            .map(|m| self.registry.index_of(*m))
            .collect::<Result<_, _>>()?;
        let amps = self
            .amps
            .iter()
            .map(|(occ, a)| (perm.iter().map(|&p| occ[p]).collect(), *a))
            .collect();
        Ok(Self { registry: registry.clone(), cutoff: self.cutoff, amps })
    }

    /// Total quanta per term, maximized over terms.
    pub fn max_excitation(&self) -> u32 {
        self.amps.keys().map(|o| o.iter().map(|&n| u32::from(n)).sum()).max().unwrap_or(0)
    }

    /// One line per basis term: `occupation TAB re TAB im`.
    pub fn debug_dump(&self) -> String {
        let mut s = String::new();
        for (occ, a) in &self.amps {
            let occ: Vec<String> = occ.iter().map(u8::to_string).collect();
            let _ = writeln!(s, "{}\t{:?}\t{:?}", occ.join(","), a.re, a.im);
        }
        s
    }

    fn check_registry(&self, other: &PureState) -> Result<(), FockError> {
        if self.registry != other.registry {
            return Err(FockError::RegistryMismatch(self.registry.clone(), other.registry.clone()));
        }
        Ok(())
    }

    pub(crate) fn prune(&mut self) {
        self.amps.retain(|_, a| a.norm() >= AMPLITUDE_EPS);
    }
}

/// Largest entry of `|U^dag U - I|`.
pub fn unitarity_deviation(u: &DMatrix<Complex64>) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let prod = u.adjoint() * u;
    let mut worst = 0.0f64;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - target).norm());
        }
    }
    worst
}
