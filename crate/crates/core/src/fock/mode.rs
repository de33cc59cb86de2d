use std::fmt;
use std::sync::Arc;

use super::FockError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    U,
    D,
}

/// Which metastable level a collective ensemble mode excites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    T,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarization {
    H,
    V,
}

/// A bosonic mode: a collective ensemble excitation, a photonic path mode, or
/// an environment mode that absorbs lost photons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModeId {
    Ensemble { site: &'static str, arm: Arm, level: Level },
    Photon { path: &'static str, pol: Polarization },
    Environment(u32),
}

impl ModeId {
    pub const fn ensemble(site: &'static str, arm: Arm, level: Level) -> Self {
        ModeId::Ensemble { site, arm, level }
    }

    pub const fn photon(path: &'static str, pol: Polarization) -> Self {
        ModeId::Photon { path, pol }
    }

    pub fn is_optical(&self) -> bool {
        !matches!(self, ModeId::Ensemble { .. })
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeId::Ensemble { site, arm, level } => {
                let arm = match arm {
                    Arm::U => 'u',
                    Arm::D => 'd',
                };
                write!(f, "{level:?}_{site}{arm}")
            }
            ModeId::Photon { path, pol } => write!(f, "{path}_{pol:?}"),
            ModeId::Environment(i) => write!(f, "env{i}"),
        }
    }
}

/// Ordered list of distinct modes. Cheap to clone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registry(Arc<[ModeId]>);

impl Registry {
    pub fn new(modes: impl IntoIterator<Item = ModeId>) -> Result<Self, FockError> {
        let modes: Vec<ModeId> = modes.into_iter().collect();
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                return Err(FockError::DuplicateMode(*m));
            }
        }
        Ok(Registry(modes.into()))
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, mode: ModeId) -> Result<usize, FockError> {
        self.0.iter().position(|&m| m == mode).ok_or(FockError::UnknownMode(mode))
    }

    pub fn contains(&self, mode: ModeId) -> bool {
        self.0.contains(&mode)
    }

    /// True when both registries hold the same modes, in any order.
    pub fn same_modes(&self, other: &Registry) -> bool {
        self.len() == other.len() && self.0.iter().all(|m| other.contains(*m))
    }

    pub(crate) fn without(&self, index: usize) -> Registry {
        let mut modes = self.0.to_vec();
        modes.remove(index);
        Registry(modes.into())
    }

    pub(crate) fn with_replaced(&self, index: usize, mode: ModeId) -> Result<Registry, FockError> {
        let mut modes = self.0.to_vec();
        modes[index] = mode;
        Registry::new(modes)
    }

    pub(crate) fn with_appended(&self, extra: &[ModeId]) -> Result<Registry, FockError> {
        Registry::new(self.0.iter().chain(extra).copied())
    }
}

impl fmt::Display for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}
