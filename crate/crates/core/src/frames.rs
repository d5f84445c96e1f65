//! Wigner-boost kinematics: the standard boost tetrad, relativistic
//! collective variables (Newton-Wigner / Fokker-Pryce / Moller centres),
//! embeddings of Wigner 3-spaces, world-line reconstruction and inversion,
//! fixed-`x^0` resampling, Wigner rotations and the external Poincare
//! generators.

use crate::canonical::WignerPhaseState;
use crate::linalg::{Mat3, Mat4, Vec3, Vec4};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Rapidity 3-vector `h = P/Mc`; the time component `h^0 = sqrt(1 + h^2)`
/// is always derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rapidity3(pub Vec3);

impl Rapidity3 {
    pub const ZERO: Rapidity3 = Rapidity3(Vec3::ZERO);

    pub fn new(h: Vec3) -> Result<Self> {
        if !h.is_finite() {
            return Err(Error::InvalidParam("rapidity must be finite".into()));
        }
        Ok(Rapidity3(h))
    }

    /// `h^0 = sqrt(1 + h^2) >= 1`.
    pub fn h0(&self) -> f64 {
        (1.0 + self.0.norm_sq()).sqrt()
    }

    /// Full 4-vector `h^mu = (sqrt(1+h^2); h)`, a unit time-like vector.
    pub fn four_vector(&self) -> Vec4 {
        Vec4::new(self.h0(), self.0)
    }
}

/// Columns `epsilon^mu_A(h)` of the standard Wigner boost; column `A = tau`
/// is `h^mu` and the spatial columns span the Wigner 3-space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostTetrad(pub Mat4);

impl BoostTetrad {
    /// Column `A` (0 = tau).
    pub fn column(&self, a: usize) -> Vec4 {
        self.0.column(a)
    }

    /// Spatial column `epsilon^mu_r`, `r` in `0..3`.
    pub fn spatial_column(&self, r: usize) -> Vec4 {
        self.0.column(r + 1)
    }

    /// Max violation of `eta_munu eps^mu_A eps^nu_B = eta_AB`.
    pub fn orthonormality_defect(&self) -> f64 {
        self.0.lorentz_defect()
    }
}

/// Standard Wigner boost columns:
/// `eps^mu_tau = (sqrt(1+h^2); h)`,
/// `eps^mu_r = (h_r; delta^i_r + h^i h_r / (1 + sqrt(1+h^2)))`.
pub fn build_boost_tetrad(h: &Rapidity3) -> BoostTetrad {
    let hv = h.0;
    let h0 = h.h0();
    let denom = 1.0 + h0;
    let mut m = Mat4::zero();
    m.set(0, 0, h0);
    for i in 0..3 {
        m.set(i + 1, 0, hv[i]);
        m.set(0, i + 1, hv[i]);
        for r in 0..3 {
            let delta = if i == r { 1.0 } else { 0.0 };
            m.set(i + 1, r + 1, delta + hv[i] * hv[r] / denom);
        }
    }
    BoostTetrad(m)
}

/// Frozen Jacobi data of the decoupled external centre of mass:
/// `z = Mc x_NW(0)` and `h = P/Mc`. Never evolved by any integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiData {
    pub z: Vec3,
    pub h: Rapidity3,
}

impl JacobiData {
    pub fn rest_frame() -> JacobiData {
        JacobiData { z: Vec3::ZERO, h: Rapidity3::ZERO }
    }
}

/// The pole-dipole structure carried by the external centre of mass:
/// Jacobi data plus the invariant mass and rest spin of the system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleDipole {
    pub jacobi: JacobiData,
    pub mc: f64,
    pub spin: Vec3,
}

impl PoleDipole {
    pub fn new(jacobi: JacobiData, mc: f64, spin: Vec3) -> Result<Self> {
        if !(mc > 0.0) || !mc.is_finite() {
            return Err(Error::InvalidParam(format!("invariant mass Mc must be > 0, got {mc}")));
        }
        Ok(PoleDipole { jacobi, mc, spin })
    }

    fn h(&self) -> Vec3 {
        self.jacobi.h.0
    }

    /// Spin-induced spatial offset `S x h / (Mc (1 + sqrt(1+h^2)))`.
    fn spin_offset(&self) -> Vec3 {
        let h0 = self.jacobi.h.h0();
        self.spin.cross(self.h()) / (self.mc * (1.0 + h0))
    }

    /// Fokker-Pryce world-line `Y^mu(tau)`, the origin of the Wigner
    /// 3-coordinates.
    pub fn fokker_pryce(&self, tau: f64) -> Vec4 {
        let h = self.h();
        let h0 = self.jacobi.h.h0();
        let hz = h.dot(self.jacobi.z) / self.mc;
        let spatial = self.jacobi.z / self.mc + (tau + hz) * h + self.spin_offset();
        Vec4::new(h0 * (tau + hz), spatial)
    }

    /// Newton-Wigner pseudo-world-line `x~^mu(tau)` (canonical,
    /// non-covariant).
    pub fn newton_wigner(&self, tau: f64) -> Vec4 {
        let y = self.fokker_pryce(tau);
        Vec4::new(y.time(), y.spatial() - self.spin_offset())
    }

    /// Moller centre-of-energy pseudo-world-line `R^mu(tau)`.
    pub fn moller_center(&self, tau: f64) -> Vec4 {
        let y = self.fokker_pryce(tau);
        let h0 = self.jacobi.h.h0();
        let off = self.spin.cross(self.h()) / (self.mc * h0);
        Vec4::new(y.time(), y.spatial() - off)
    }

    /// Invariant radius `|S|/Mc` of the world-tube of centre-of-mass
    /// non-covariance.
    pub fn moller_radius(&self) -> f64 {
        self.spin.norm() / self.mc
    }
}

/// The three collective centres evaluated at one `tau`, plus the Moller
/// radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centers {
    pub tilde_x: Vec4,
    pub y: Vec4,
    pub r: Vec4,
    pub moller_radius: f64,
}

/// Evaluates the Newton-Wigner, Fokker-Pryce and Moller centres at `tau`.
pub fn collective_centers(ext: &PoleDipole, tau: f64) -> Centers {
    Centers {
        tilde_x: ext.newton_wigner(tau),
        y: ext.fokker_pryce(tau),
        r: ext.moller_center(tau),
        moller_radius: ext.moller_radius(),
    }
}

/// Embedding of the Wigner 3-space:
/// `z_W^mu(tau, sigma) = Y^mu(tau) + eps^mu_r(h) sigma^r`.
pub fn embed(ext: &PoleDipole, tau: f64, sigma: Vec3) -> Vec4 {
    let tet = build_boost_tetrad(&ext.jacobi.h);
    let mut out = ext.fokker_pryce(tau);
    for r in 0..3 {
        out = out + tet.spatial_column(r) * sigma[r];
    }
    out
}

/// One simultaneous (in `tau`) sample of every particle's world-line point
/// and 4-momentum in the chosen inertial frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldlineSample {
    pub tau: f64,
    pub x: Vec<Vec4>,
    pub p: Vec<Vec4>,
}

/// Rebuilds inertial-frame world-line points and momenta from Wigner
/// 3-vectors: `x_i = Y(tau) + eps_r eta_i^r`, `p_i = E_i h + eps_r kappa_i^r`.
/// The per-particle energies come from the active model.
pub fn worldlines_from_wigner(
    ext: &PoleDipole,
    state: &WignerPhaseState,
    energies: &[f64],
) -> Result<WorldlineSample> {
    let n = state.n_particles();
    if energies.len() != n {
        return Err(Error::InvalidParam("energies/state size mismatch".into()));
    }
    let tet = build_boost_tetrad(&ext.jacobi.h);
    let h4 = ext.jacobi.h.four_vector();
    let y = ext.fokker_pryce(state.tau);
    let mut xs = Vec::with_capacity(n);
    let mut ps = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = y;
        let mut p = h4 * energies[i];
        for r in 0..3 {
            x = x + tet.spatial_column(r) * state.eta[i][r];
            p = p + tet.spatial_column(r) * state.kappa[i][r];
        }
        xs.push(x);
        ps.push(p);
    }
    Ok(WorldlineSample { tau: state.tau, x: xs, p: ps })
}

/// Per-particle output of the world-line inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerInverse {
    /// Rest time of each sampled point, `tau_i = h . x_i` (Minkowski).
    pub tau: Vec<f64>,
    pub eta: Vec<Vec3>,
    pub kappa: Vec<Vec3>,
    /// Energy component `E_i = h . p_i`; equals
    /// `sqrt(m^2 c^2 + kappa^2)` only for the free model.
    pub energy: Vec<f64>,
}

/// Inverts [`worldlines_from_wigner`]: recovers `(tau_i; eta_i)` and
/// `(E_i; kappa_i)` from inertial-frame points and momenta.
pub fn wigner_from_worldlines(ext: &PoleDipole, sample: &WorldlineSample) -> Result<WignerInverse> {
    let n = sample.x.len();
    if sample.p.len() != n {
        return Err(Error::InvalidParam("worldline sample size mismatch".into()));
    }
    let h = ext.jacobi.h.0;
    let h0 = ext.jacobi.h.h0();
    let denom = 1.0 + h0;
    let mut taus = Vec::with_capacity(n);
    let mut etas = Vec::with_capacity(n);
    let mut kappas = Vec::with_capacity(n);
    let mut energies = Vec::with_capacity(n);
    for i in 0..n {
        let x = sample.x[i];
        let p = sample.p[i];
        let tau_i = h0 * x.time() - h.dot(x.spatial());
        let y = ext.fokker_pryce(tau_i);
        // time component gives x^0 = Y^0(tau) + h . eta
        let h_dot_eta = x.time() - y.time();
        let eta = x.spatial() - y.spatial() - h * (h_dot_eta / denom);
        let energy = h0 * p.time() - h.dot(p.spatial());
        let kappa = p.spatial() - h * (p.time() - h.dot(p.spatial()) / denom);
        taus.push(tau_i);
        etas.push(eta);
        kappas.push(kappa);
        energies.push(energy);
    }
    Ok(WignerInverse { tau: taus, eta: etas, kappa: kappas, energy: energies })
}

/// Checked free-model inversion: additionally verifies the mass-shell
/// condition `p_i^2 = m_i^2 c^2` that the free-case momentum inversion
/// assumes. Interacting samples are rejected.
pub fn wigner_from_worldlines_free(
    ext: &PoleDipole,
    sample: &WorldlineSample,
    masses: &[f64],
    c: f64,
    tol: f64,
) -> Result<WignerInverse> {
    for (i, p) in sample.p.iter().enumerate() {
        let shell = p.mink_norm_sq() - (masses[i] * c).powi(2);
        if shell.abs() > tol * (masses[i] * c).powi(2).max(1.0) {
            return Err(Error::Unsupported(format!(
                "momentum inversion is closed-form only for the free model; \
                 particle {i} is off shell by {shell:.3e}"
            )));
        }
    }
    wigner_from_worldlines(ext, sample)
}

/// One particle of a fixed-`x^0` snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampledPoint {
    /// Rest time at which this particle crosses the `x^0 = const` surface.
    pub tau: f64,
    pub x: Vec4,
    pub p: Vec4,
}

fn cubic_interp(taus: &[f64], values: &[f64], k: usize, tau: f64) -> f64 {
    // local cubic Lagrange through up to 4 nodes around interval k
    let lo = k.saturating_sub(1);
    let hi = (k + 2).min(taus.len() - 1);
    let mut out = 0.0;
    for a in lo..=hi {
        let mut w = 1.0;
        for b in lo..=hi {
            if a != b {
                w *= (tau - taus[b]) / (taus[a] - taus[b]);
            }
        }
        out += w * values[a];
    }
    out
}

/// Resamples a `tau`-ordered track of world-line samples on the Euclidean
/// 3-space `x^0 = const`: each particle's crossing time `tau_i` solves
/// `x_i^0(tau_i) = x0` by bracketed bisection refined with secant steps on
/// the cubic-interpolated track (tolerance 1e-10 in `tau`).
pub fn resample_at_fixed_time(track: &[WorldlineSample], x0: f64) -> Result<Vec<ResampledPoint>> {
    if track.len() < 2 {
        return Err(Error::InvalidParam("resampling needs at least two samples".into()));
    }
    let taus: Vec<f64> = track.iter().map(|s| s.tau).collect();
    if !taus.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParam("track must be strictly increasing in tau".into()));
    }
    let n = track[0].x.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let x0_i: Vec<f64> = track.iter().map(|s| s.x[i].time()).collect();
        let mut seg = None;
        for k in 0..taus.len() - 1 {
            if (x0_i[k] - x0) * (x0_i[k + 1] - x0) <= 0.0 {
                seg = Some(k);
                break;
            }
        }
        let Some(k) = seg else {
            return Err(Error::Numerics(format!(
                "x^0 = {x0} not bracketed by the track for particle {i} \
                 (range {:.6}..{:.6})",
                x0_i.first().unwrap(),
                x0_i.last().unwrap()
            )));
        };
        let f = |t: f64| cubic_interp(&taus, &x0_i, k, t) - x0;
        let mut a = taus[k];
        let mut b = taus[k + 1];
        let mut fa = f(a);
        let mut fb = f(b);
        let mut t = 0.5 * (a + b);
        for _ in 0..200 {
            if (b - a).abs() < 1e-10 {
                break;
            }
            // secant proposal, bisection fallback when it leaves the bracket
            let mut cand = if fb != fa { b - fb * (b - a) / (fb - fa) } else { 0.5 * (a + b) };
            if !(cand > a && cand < b) {
                cand = 0.5 * (a + b);
            }
            let fc = f(cand);
            if fa * fc <= 0.0 {
                b = cand;
                fb = fc;
            } else {
                a = cand;
                fa = fc;
            }
            t = 0.5 * (a + b);
        }
        let mut xc = [0.0; 4];
        let mut pc = [0.0; 4];
        for mu in 0..4 {
            let xs: Vec<f64> = track.iter().map(|s| s.x[i].0[mu]).collect();
            let ps: Vec<f64> = track.iter().map(|s| s.p[i].0[mu]).collect();
            xc[mu] = cubic_interp(&taus, &xs, k, t);
            pc[mu] = cubic_interp(&taus, &ps, k, t);
        }
        out.push(ResampledPoint { tau: t, x: Vec4(xc), p: Vec4(pc) });
    }
    Ok(out)
}

/// Closed-form crossing times for free motion: with
/// `x_i^0(tau) = Y^0(0) + sqrt(1+h^2) tau + h . eta_i(tau)` and straight
/// lines `eta_i(tau) = eta_i(0) + (kappa_i/E_i) tau`, the crossing of the
/// surface `x^0 = x0` happens at
/// `tau_i = E_i (x0 - Y^0(0) - h . eta_i(0)) / p_i^0`.
pub fn free_crossing_times(
    ext: &PoleDipole,
    eta0: &[Vec3],
    kappa: &[Vec3],
    energies: &[f64],
    x0: f64,
) -> Vec<f64> {
    let h = ext.jacobi.h.0;
    let h0 = ext.jacobi.h.h0();
    let y0 = ext.fokker_pryce(0.0).time();
    eta0.iter()
        .zip(kappa.iter())
        .zip(energies.iter())
        .map(|((e0, k), &en)| {
            let p0 = h0 * en + h.dot(*k);
            en * (x0 - y0 - h.dot(*e0)) / p0
        })
        .collect()
}

/// Wigner rotation induced on the 3-vectors of the Wigner 3-space by a
/// Lorentz transformation `Lambda`: `R = L(h')^{-1} Lambda L(h)` with
/// `L` the standard boost and `h'` the transformed rapidity.
pub fn wigner_rotation(lambda: &Mat4, h: &Rapidity3) -> Result<Mat3> {
    if lambda.lorentz_defect() > 1e-10 {
        return Err(Error::InvalidParam("Lambda is not a Lorentz matrix".into()));
    }
    if (lambda.det() - 1.0).abs() > 1e-10 || lambda.get(0, 0) < 1.0 - 1e-10 {
        return Err(Error::InvalidParam("Lambda must be proper orthochronous".into()));
    }
    let boosted = lambda.mul_vec(&h.four_vector());
    let h_prime = Rapidity3::new(boosted.spatial())?;
    let l_in = build_boost_tetrad(h).0;
    let l_out = build_boost_tetrad(&h_prime).0.lorentz_inverse();
    let r4 = l_out * *lambda * l_in;
    let r = r4.spatial_block();
    // the product is block diagonal by construction; a visible defect here
    // signals a malformed input Lambda
    let mut block_defect: f64 = (r4.get(0, 0) - 1.0).abs();
    for i in 1..4 {
        block_defect = block_defect.max(r4.get(0, i).abs()).max(r4.get(i, 0).abs());
    }
    if block_defect > 1e-9 {
        return Err(Error::Numerics(format!("Wigner rotation block defect {block_defect:.3e}")));
    }
    Ok(r)
}

/// The transformed rapidity `h' = spatial(Lambda h^mu)`; companion of
/// [`wigner_rotation`] for composing transformations.
pub fn boosted_rapidity(lambda: &Mat4, h: &Rapidity3) -> Result<Rapidity3> {
    Rapidity3::new(lambda.mul_vec(&h.four_vector()).spatial())
}

/// External Poincare generators of the decoupled centre of mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalGenerators {
    /// `P^mu = Mc (sqrt(1+h^2); h)`.
    pub p: Vec4,
    /// Rotation block `J^ij = z^i h^j - z^j h^i + eps^ijk S^k`.
    pub j: Mat3,
    /// Boosts `K^i = -sqrt(1+h^2) z^i + (S x h)^i / (1 + sqrt(1+h^2))`.
    pub k: Vec3,
}

/// External generators of the pole-dipole structure.
pub fn external_generators(ext: &PoleDipole) -> ExternalGenerators {
    let h = ext.jacobi.h.0;
    let h0 = ext.jacobi.h.h0();
    let z = ext.jacobi.z;
    let s = ext.spin;
    let p = ext.jacobi.h.four_vector() * ext.mc;
    let mut j = Mat3::zero();
    for a in 0..3 {
        for b in 0..3 {
            let eps_s = match (a, b) {
                (0, 1) => s[2],
                (1, 0) => -s[2],
                (1, 2) => s[0],
                (2, 1) => -s[0],
                (2, 0) => s[1],
                (0, 2) => -s[1],
                _ => 0.0,
            };
            j.set(a, b, z[a] * h[b] - z[b] * h[a] + eps_s);
        }
    }
    let k = -h0 * z + s.cross(h) / (1.0 + h0);
    ExternalGenerators { p, j, k }
}
