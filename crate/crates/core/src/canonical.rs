//! Collective/relative canonical transformation on the Wigner 3-space,
//! rest-frame constraint handling, and the internal Poincare generators.

use crate::dynamics::ModelSpec;
use crate::linalg::Vec3;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Canonical state of N particles on the Wigner 3-space at time `tau`:
/// positions `eta_i` and conjugate momenta `kappa_i` (Wigner spin-1
/// 3-vectors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerPhaseState {
    pub tau: f64,
    pub eta: Vec<Vec3>,
    pub kappa: Vec<Vec3>,
}

impl WignerPhaseState {
    pub fn new(tau: f64, eta: Vec<Vec3>, kappa: Vec<Vec3>) -> Result<Self> {
        if eta.len() != kappa.len() || eta.is_empty() {
            return Err(Error::InvalidParam(
                "state needs equal, non-zero numbers of positions and momenta".into(),
            ));
        }
        if !eta.iter().all(|v| v.is_finite()) || !kappa.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParam("non-finite state component".into()));
        }
        Ok(WignerPhaseState { tau, eta, kappa })
    }

    pub fn n_particles(&self) -> usize {
        self.eta.len()
    }
}

/// Relative canonical variables `(rho_a, pi_a)`, `a = 1..N-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeState {
    pub tau: f64,
    pub rho: Vec<Vec3>,
    pub pi: Vec<Vec3>,
}

/// The unfaithful internal Poincare generators on the Wigner 3-space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InternalGenerators {
    /// Invariant mass times c.
    pub mc: f64,
    /// Internal 3-momentum (vanishes on the rest-frame shell).
    pub p: Vec3,
    /// Rest spin.
    pub s: Vec3,
    /// Internal boost (vanishes once the internal centre of mass is fixed).
    pub k: Vec3,
}

/// Coefficients of the point canonical transformation between particle
/// variables and collective + relative ones, with the canonicity conditions
/// pinned by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationMatrix {
    pub n: usize,
    pub masses: Vec<f64>,
    /// `gamma[a][i]`, `(N-1) x N`.
    pub gamma: Vec<Vec<f64>>,
    /// `Gamma[a][i] = gamma[a][i] - sum_k (m_k/m) gamma[a][k]`.
    pub big_gamma: Vec<Vec<f64>>,
}

impl SeparationMatrix {
    /// Deterministic construction: Gram-Schmidt orthonormalization of the
    /// vectors `e_a = (delta_{a,i} - 1/N)_i`, which all lie in the
    /// zero-sum hyperplane. For N = 2 this reproduces
    /// `gamma_11 = -gamma_12 = 1/sqrt(2)`.
    pub fn new(masses: &[f64]) -> Result<Self> {
        let n = masses.len();
        if n < 2 {
            return Err(Error::InvalidParam("separation matrix needs N >= 2".into()));
        }
        if masses.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidParam("particle masses must be positive".into()));
        }
        let mut gamma: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
        for a in 0..n - 1 {
            let mut v: Vec<f64> = (0..n)
                .map(|i| if i == a { 1.0 - 1.0 / n as f64 } else { -1.0 / n as f64 })
                .collect();
            for prev in gamma.iter() {
                let dot: f64 = v.iter().zip(prev.iter()).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(prev.iter()) {
                    *x -= dot * y;
                }
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                return Err(Error::Numerics("degenerate separation basis".into()));
            }
            for x in v.iter_mut() {
                *x /= norm;
            }
            gamma.push(v);
        }
        Self::from_gamma(masses, gamma)
    }

    /// Builds `Gamma` from a caller-supplied `gamma` family member and
    /// verifies the canonicity conditions.
    pub fn from_gamma(masses: &[f64], gamma: Vec<Vec<f64>>) -> Result<Self> {
        let n = masses.len();
        let m_tot: f64 = masses.iter().sum();
        let mut big_gamma = vec![vec![0.0; n]; n - 1];
        for a in 0..n - 1 {
            let weighted: f64 = (0..n).map(|k| masses[k] / m_tot * gamma[a][k]).sum();
            for i in 0..n {
                big_gamma[a][i] = gamma[a][i] - weighted;
            }
        }
        let sep = SeparationMatrix { n, masses: masses.to_vec(), gamma, big_gamma };
        sep.check_canonicity(1e-12)?;
        Ok(sep)
    }

    /// Verifies the canonicity identities to tolerance `tol`.
    pub fn check_canonicity(&self, tol: f64) -> Result<()> {
        let n = self.n;
        let m_tot: f64 = self.masses.iter().sum();
        let mut worst: f64 = 0.0;
        for a in 0..n - 1 {
            let row_sum: f64 = self.gamma[a].iter().sum();
            worst = worst.max(row_sum.abs());
            for b in 0..n - 1 {
                let dot: f64 = (0..n).map(|i| self.gamma[a][i] * self.gamma[b][i]).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - expect).abs());
                let mixed: f64 = (0..n).map(|i| self.gamma[a][i] * self.big_gamma[b][i]).sum();
                worst = worst.max((mixed - expect).abs());
            }
            let mass_weighted: f64 =
                (0..n).map(|i| self.masses[i] / m_tot * self.big_gamma[a][i]).sum();
            worst = worst.max(mass_weighted.abs());
        }
        for i in 0..n {
            for j in 0..n {
                let completeness: f64 =
                    (0..n - 1).map(|a| self.gamma[a][i] * self.gamma[a][j]).sum();
                let expect = if i == j { 1.0 - 1.0 / n as f64 } else { -1.0 / n as f64 };
                worst = worst.max((completeness - expect).abs());
                // sum_a gamma_ai Gamma_aj = delta_ij - m_i/m
                let mixed: f64 =
                    (0..n - 1).map(|a| self.gamma[a][i] * self.big_gamma[a][j]).sum();
                let expect_mixed =
                    if i == j { 1.0 - self.masses[i] / m_tot } else { -self.masses[i] / m_tot };
                worst = worst.max((mixed - expect_mixed).abs());
            }
        }
        if worst > tol {
            return Err(Error::Numerics(format!(
                "canonicity conditions violated: worst residual {worst:.3e}"
            )));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }
}

/// Collective variables `(eta_+, kappa_+)` plus the relative state.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveSplit {
    pub eta_plus: Vec3,
    pub kappa_plus: Vec3,
    pub relative: RelativeState,
}

/// Particle variables -> collective + relative variables.
pub fn to_relative(state: &WignerPhaseState, sep: &SeparationMatrix) -> Result<CollectiveSplit> {
    let n = state.n_particles();
    if n != sep.n {
        return Err(Error::InvalidParam("state/separation size mismatch".into()));
    }
    let m_tot = sep.total_mass();
    let mut eta_plus = Vec3::ZERO;
    let mut kappa_plus = Vec3::ZERO;
    for i in 0..n {
        eta_plus += state.eta[i] * (sep.masses[i] / m_tot);
        kappa_plus += state.kappa[i];
    }
    let sqrt_n = (n as f64).sqrt();
    let mut rho = Vec::with_capacity(n - 1);
    let mut pi = Vec::with_capacity(n - 1);
    for a in 0..n - 1 {
        let mut r = Vec3::ZERO;
        let mut p = Vec3::ZERO;
        for i in 0..n {
            r += state.eta[i] * sep.gamma[a][i];
            p += state.kappa[i] * sep.big_gamma[a][i];
        }
        rho.push(r * sqrt_n);
        pi.push(p / sqrt_n);
    }
    Ok(CollectiveSplit {
        eta_plus,
        kappa_plus,
        relative: RelativeState { tau: state.tau, rho, pi },
    })
}

/// Collective + relative variables -> particle variables.
pub fn from_relative(
    eta_plus: Vec3,
    kappa_plus: Vec3,
    rel: &RelativeState,
    sep: &SeparationMatrix,
) -> Result<WignerPhaseState> {
    let n = sep.n;
    if rel.rho.len() != n - 1 || rel.pi.len() != n - 1 {
        return Err(Error::InvalidParam("relative state/separation size mismatch".into()));
    }
    let m_tot = sep.total_mass();
    let sqrt_n = (n as f64).sqrt();
    let mut eta = Vec::with_capacity(n);
    let mut kappa = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = eta_plus;
        let mut k = kappa_plus * (sep.masses[i] / m_tot);
        for a in 0..n - 1 {
            e += rel.rho[a] * (sep.big_gamma[a][i] / sqrt_n);
            k += rel.pi[a] * (sep.gamma[a][i] * sqrt_n);
        }
        eta.push(e);
        kappa.push(k);
    }
    WignerPhaseState::new(rel.tau, eta, kappa)
}

/// Internal Poincare generators of the state for the given model:
/// `Mc = sum E_i`, `P = sum kappa_i`, `S = sum eta_i x kappa_i`,
/// `K = -sum eta_i E_i`.
pub fn internal_generators(
    state: &WignerPhaseState,
    model: &ModelSpec,
) -> Result<InternalGenerators> {
    let mut mc = 0.0;
    let mut p = Vec3::ZERO;
    let mut s = Vec3::ZERO;
    let mut k = Vec3::ZERO;
    for i in 0..state.n_particles() {
        let e_i = model.particle_energy(i, state)?;
        mc += e_i;
        p += state.kappa[i];
        s += state.eta[i].cross(state.kappa[i]);
        k -= state.eta[i] * e_i;
    }
    Ok(InternalGenerators { mc, p, s, k })
}

/// Solves the internal-centre-of-mass gauge fixing `K = 0` for `eta_+`
/// given relative variables with `kappa_+ = 0`:
/// `eta_+ = -(1/sqrt(N)) sum_a (sum_i Gamma_ai E_i / Mc) rho_a`.
///
/// Valid whenever the boost has the form `K = -sum eta_i E_i` with particle
/// energies that do not depend on `eta_+` (true for the free model and for
/// difference-only potentials).
pub fn solve_internal_com(
    rel: &RelativeState,
    sep: &SeparationMatrix,
    model: &ModelSpec,
) -> Result<Vec3> {
    let trial = from_relative(Vec3::ZERO, Vec3::ZERO, rel, sep)?;
    let n = sep.n;
    let sqrt_n = (n as f64).sqrt();
    let mut mc = 0.0;
    let mut energies = Vec::with_capacity(n);
    for i in 0..n {
        let e_i = model.particle_energy(i, &trial)?;
        energies.push(e_i);
        mc += e_i;
    }
    let mut eta_plus = Vec3::ZERO;
    for a in 0..n - 1 {
        let coeff: f64 = (0..n).map(|i| sep.big_gamma[a][i] * energies[i]).sum();
        eta_plus -= rel.rho[a] * (coeff / (mc * sqrt_n));
    }
    Ok(eta_plus)
}

/// `(|P|, |K|/Mc)`: the rest-frame constraint residuals used as the drift
/// monitor during integration.
pub fn constraint_residuals(state: &WignerPhaseState, model: &ModelSpec) -> Result<(f64, f64)> {
    let gens = internal_generators(state, model)?;
    Ok((gens.p.norm(), gens.k.norm() / gens.mc))
}

/// Tolerance below which a state counts as rest-frame reduced.
pub const REST_FRAME_TOL: f64 = 1e-9;

/// True when both rest-frame constraint residuals are below
/// [`REST_FRAME_TOL`].
pub fn is_rest_frame_reduced(state: &WignerPhaseState, model: &ModelSpec) -> Result<bool> {
    let (p, k) = constraint_residuals(state, model)?;
    Ok(p < REST_FRAME_TOL && k < REST_FRAME_TOL)
}

/// Builds a rest-frame-reduced state from relative variables: `kappa_+ = 0`
/// and `eta_+` from the internal-centre-of-mass condition.
pub fn rest_frame_state(
    rel: &RelativeState,
    sep: &SeparationMatrix,
    model: &ModelSpec,
) -> Result<WignerPhaseState> {
    let eta_plus = solve_internal_com(rel, sep, model)?;
    from_relative(eta_plus, Vec3::ZERO, rel, sep)
}

/// Max violation of the symplectic relations among the composite-map outputs
/// `(eta_+, rho_a; kappa_+, pi_a)`: every canonical Poisson bracket is
/// evaluated from finite-difference gradients in the particle variables and
/// compared against the canonical pairing (`J Omega J^T = Omega`).
pub fn symplectic_defect(sep: &SeparationMatrix, state: &WignerPhaseState) -> Result<f64> {
    let n = sep.n;
    let dim = 3 * n;
    // output component alpha in 0..6n: first positions (eta_+, rho), then
    // momenta (kappa_+, pi)
    let output = |s: &WignerPhaseState, alpha: usize| -> Result<f64> {
        let split = to_relative(s, sep)?;
        let (block, rem) = (alpha / dim, alpha % dim);
        let (slot, comp) = (rem / 3, rem % 3);
        Ok(match (block, slot) {
            (0, 0) => split.eta_plus[comp],
            (0, a) => split.relative.rho[a - 1][comp],
            (1, 0) => split.kappa_plus[comp],
            (_, a) => split.relative.pi[a - 1][comp],
        })
    };
    // the map is linear, so central differences carry no truncation error;
    // a moderate step keeps the roundoff floor near 1e-13
    let step = 1e-3;
    // gradients of every output wrt (eta, kappa)
    let mut grad_eta = vec![vec![0.0; dim]; 2 * dim];
    let mut grad_kappa = vec![vec![0.0; dim]; 2 * dim];
    for alpha in 0..2 * dim {
        for i in 0..n {
            for r in 0..3 {
                let mut sp = state.clone();
                let mut sm = state.clone();
                sp.eta[i][r] += step;
                sm.eta[i][r] -= step;
                grad_eta[alpha][3 * i + r] =
                    (output(&sp, alpha)? - output(&sm, alpha)?) / (2.0 * step);
                let mut sp = state.clone();
                let mut sm = state.clone();
                sp.kappa[i][r] += step;
                sm.kappa[i][r] -= step;
                grad_kappa[alpha][3 * i + r] =
                    (output(&sp, alpha)? - output(&sm, alpha)?) / (2.0 * step);
            }
        }
    }
    let mut worst: f64 = 0.0;
    for alpha in 0..2 * dim {
        for beta in 0..2 * dim {
            let mut bracket = 0.0;
            for k in 0..dim {
                bracket += grad_eta[alpha][k] * grad_kappa[beta][k]
                    - grad_kappa[alpha][k] * grad_eta[beta][k];
            }
            // canonical pairing: {pos_alpha, mom_alpha'} = delta
            let expect = if alpha < dim && beta == alpha + dim {
                1.0
            } else if beta < dim && alpha == beta + dim {
                -1.0
            } else {
                0.0
            };
            worst = worst.max((bracket - expect).abs());
        }
    }
    Ok(worst)
}
