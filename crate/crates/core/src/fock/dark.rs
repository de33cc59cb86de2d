//! Dark-state check for the T -> S conversion Hamiltonian.
//!
//! Each atom has levels g, s, t, e2. The s <-> e2 transition couples to a
//! quantized mode with strength `g`; t <-> e2 is driven classically with Rabi
//! frequency `omega`. The full product space of `n_atoms` atoms and a photon
//! mode truncated at one quantum is built explicitly (hbar = 1).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::FockError;

const G: usize = 0;
const S: usize = 1;
const T: usize = 2;
const E2: usize = 3;
const LEVELS: usize = 4;

struct AtomSpace {
    atoms: usize,
}

impl AtomSpace {
    fn dim(&self) -> usize {
        2 * LEVELS.pow(self.atoms as u32)
    }

    fn index(&self, levels: &[usize], photons: usize) -> usize {
        let mut idx = 0;
        for &l in levels.iter().rev() {
            idx = idx * LEVELS + l;
        }
        photons + 2 * idx
    }

    fn decode(&self, index: usize) -> (Vec<usize>, usize) {
        let photons = index % 2;
        let mut rest = index / 2;
        let mut levels = Vec::with_capacity(self.atoms);
        for _ in 0..self.atoms {
            levels.push(rest % LEVELS);
            rest /= LEVELS;
        }
        (levels, photons)
    }

    fn hamiltonian(&self, g: f64, omega: f64) -> DMatrix<f64> {
        let dim = self.dim();
        let mut h = DMatrix::zeros(dim, dim);
        for src in 0..dim {
            let (levels, photons) = self.decode(src);
            for i in 0..self.atoms {
                // g a sigma_{e2 s}: atom i goes s -> e2 while a photon is absorbed.
                if levels[i] == S && photons == 1 {
                    let mut next = levels.clone();
                    next[i] = E2;
                    let dst = self.index(&next, 0);
                    h[(dst, src)] += g;
                    h[(src, dst)] += g;
                }
                // omega sigma_{e2 t}
                if levels[i] == T {
                    let mut next = levels.clone();
                    next[i] = E2;
                    let dst = self.index(&next, photons);
                    h[(dst, src)] += omega;
                    h[(src, dst)] += omega;
                }
            }
        }
        h
    }

    /// Symmetric single excitation in `level` with `photons` quanta in the field.
    fn collective(&self, level: usize, photons: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        let amp = 1.0 / (self.atoms as f64).sqrt();
        for i in 0..self.atoms {
            let mut levels = vec![G; self.atoms];
            levels[i] = level;
            v[self.index(&levels, photons)] = amp;
        }
        v
    }
}

fn check(g: f64, omega: f64, n_atoms: usize) -> Result<AtomSpace, FockError> {
    if !(1..=4).contains(&n_atoms) {
        return Err(FockError::InvalidAtomCount(n_atoms));
    }
    if g == 0.0 && omega == 0.0 {
        return Err(FockError::DegenerateCoupling);
    }
    Ok(AtomSpace { atoms: n_atoms })
}

/// `|| H |D> || / max(|g|, |omega|)` for `|D> = cos(th) S^dag|g>|1> - sin(th) T^dag|g>|0>`
/// with `tan(th) = g / omega`.
pub fn dark_state_residual(g: f64, omega: f64, n_atoms: usize) -> Result<f64, FockError> {
    let space = check(g, omega, n_atoms)?;
    let h = space.hamiltonian(g, omega);
    let theta = g.atan2(omega);
    let dark = space.collective(S, 1) * theta.cos() - space.collective(T, 0) * theta.sin();
    Ok((h * dark).norm() / g.abs().max(omega.abs()))
}

/// The Hamiltonian projected on the basis `{S^dag|g>|1>, E2^dag|g>|0>, T^dag|g>|0>}`.
pub fn sector_hamiltonian(g: f64, omega: f64, n_atoms: usize) -> Result<DMatrix<f64>, FockError> {
    let space = check(g, omega, n_atoms)?;
    let h = space.hamiltonian(g, omega);
    let basis = [space.collective(S, 1), space.collective(E2, 0), space.collective(T, 0)];
    Ok(DMatrix::from_fn(3, 3, |i, j| basis[i].dot(&(&h * &basis[j]))))
}

/// Eigenvalues of [`sector_hamiltonian`], ascending.
pub fn sector_spectrum(g: f64, omega: f64, n_atoms: usize) -> Result<Vec<f64>, FockError> {
    let h = sector_hamiltonian(g, omega, n_atoms)?;
    let mut eig: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}
