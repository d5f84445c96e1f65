//! Hamiltonian models on the Wigner 3-space (free and the quadratically
//! coupled family), Hamilton equations with the invariant mass as
//! Hamiltonian, adaptive and implicit-midpoint integration with dense
//! output, Liouville-operator application, and the Galilei-limit scan.

use crate::canonical::{constraint_residuals, internal_generators, WignerPhaseState};
use crate::linalg::Vec3;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which interaction the invariant mass carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// `E_i = sqrt(m_i^2 c^2 + kappa_i^2)`.
    Free,
    /// Momentum-shift family generated by `F = (g/2) sum_a rho_a^2`:
    /// `E_i = sqrt(m_i^2 c^2 + (kappa_i + W_i)^2)` with
    /// `W_i = g N (eta_i - eta_bar)`.
    Quadratic { g: f64 },
}

/// A fully specified dynamical model: interaction kind, particle masses and
/// the speed of light.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub masses: Vec<f64>,
    pub c: f64,
}

/// Relative floor on the energy radicand, in units of `m_i^2 c^2`.
const RADICAND_FLOOR: f64 = 1e-12;

impl ModelSpec {
    pub fn new(kind: ModelKind, masses: Vec<f64>, c: f64) -> Result<Self> {
        if masses.is_empty() || masses.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidParam("masses must be positive and finite".into()));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParam("c must be positive".into()));
        }
        Ok(ModelSpec { kind, masses, c })
    }

    pub fn free(masses: Vec<f64>, c: f64) -> Result<Self> {
        Self::new(ModelKind::Free, masses, c)
    }

    pub fn quadratic(g: f64, masses: Vec<f64>, c: f64) -> Result<Self> {
        Self::new(ModelKind::Quadratic { g }, masses, c)
    }

    pub fn n_particles(&self) -> usize {
        self.masses.len()
    }

    pub fn coupling(&self) -> f64 {
        match self.kind {
            ModelKind::Free => 0.0,
            ModelKind::Quadratic { g } => g,
        }
    }

    /// Same model with a different speed of light (for limit scans).
    pub fn with_c(&self, c: f64) -> ModelSpec {
        ModelSpec { kind: self.kind, masses: self.masses.clone(), c }
    }

    /// Momentum shift `W_i = dF/deta_i = g N (eta_i - eta_bar)`; zero for the
    /// free model. The separation coefficients drop out through the
    /// completeness identity, so no gamma family choice enters.
    pub fn momentum_shift(&self, i: usize, state: &WignerPhaseState) -> Vec3 {
        match self.kind {
            ModelKind::Free => Vec3::ZERO,
            ModelKind::Quadratic { g } => {
                let n = state.n_particles() as f64;
                let mut bar = Vec3::ZERO;
                for e in &state.eta {
                    bar += *e;
                }
                bar = bar / n;
                g * n * (state.eta[i] - bar)
            }
        }
    }

    /// Interaction potential `V_i = 2 kappa_i . W_i + W_i^2` entering
    /// `E_i = sqrt(m_i^2 c^2 + kappa_i^2 + V_i)`; zero for the free model.
    pub fn potential(&self, i: usize, state: &WignerPhaseState) -> f64 {
        let w = self.momentum_shift(i, state);
        2.0 * state.kappa[i].dot(w) + w.norm_sq()
    }

    /// Particle energy `E_i = sqrt(m_i^2 c^2 + (kappa_i + W_i)^2)`, computed
    /// in the completed-square form so the radicand stays manifestly
    /// non-negative for this model family.
    pub fn particle_energy(&self, i: usize, state: &WignerPhaseState) -> Result<f64> {
        let mc = self.masses[i] * self.c;
        let shifted = state.kappa[i] + self.momentum_shift(i, state);
        let radicand = mc * mc + shifted.norm_sq();
        if radicand < RADICAND_FLOOR * mc * mc || !radicand.is_finite() {
            return Err(Error::Domain(format!(
                "energy radicand for particle {i} is {radicand:.3e} at tau = {}; \
                 the model requires p_i^2 > 0",
                state.tau
            )));
        }
        Ok(radicand.sqrt())
    }

    /// All particle energies.
    pub fn energies(&self, state: &WignerPhaseState) -> Result<Vec<f64>> {
        (0..state.n_particles()).map(|i| self.particle_energy(i, state)).collect()
    }
}

/// Invariant mass `Mc = sum_i E_i`, the Hamiltonian of the tau evolution.
pub fn hamiltonian(state: &WignerPhaseState, model: &ModelSpec) -> Result<f64> {
    let mut mc = 0.0;
    for i in 0..state.n_particles() {
        mc += model.particle_energy(i, state)?;
    }
    Ok(mc)
}

/// Analytic Hamilton equations:
/// `deta_i/dtau = (kappa_i + W_i)/E_i`,
/// `dkappa_i/dtau = -g (N u_i - sum_j u_j)` with `u_j = (kappa_j + W_j)/E_j`.
pub fn hamilton_rhs(
    state: &WignerPhaseState,
    model: &ModelSpec,
) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let n = state.n_particles();
    let mut d_eta = Vec::with_capacity(n);
    let mut u_sum = Vec3::ZERO;
    for i in 0..n {
        let e_i = model.particle_energy(i, state)?;
        let u = (state.kappa[i] + model.momentum_shift(i, state)) / e_i;
        u_sum += u;
        d_eta.push(u);
    }
    let d_kappa = match model.kind {
        ModelKind::Free => vec![Vec3::ZERO; n],
        ModelKind::Quadratic { g } => {
            (0..n).map(|i| -g * (n as f64 * d_eta[i] - u_sum)).collect()
        }
    };
    Ok((d_eta, d_kappa))
}

/// Step for 4th-order central differences, scaled by the coordinate size.
pub fn fd_step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

fn central_diff4(mut f: impl FnMut(f64) -> Result<f64>, x: f64) -> Result<f64> {
    let h = fd_step(x);
    Ok((-f(x + 2.0 * h)? + 8.0 * f(x + h)? - 8.0 * f(x - h)? + f(x - 2.0 * h)?) / (12.0 * h))
}

/// Finite-difference Hamilton equations (generic fallback / oracle):
/// gradients of `Mc` by 4th-order central differences.
pub fn hamilton_rhs_fd(
    state: &WignerPhaseState,
    model: &ModelSpec,
) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let n = state.n_particles();
    let mut d_eta = vec![Vec3::ZERO; n];
    let mut d_kappa = vec![Vec3::ZERO; n];
    for i in 0..n {
        for r in 0..3 {
            d_eta[i][r] = central_diff4(
                |v| {
                    let mut s = state.clone();
                    s.kappa[i][r] = v;
                    hamiltonian(&s, model)
                },
                state.kappa[i][r],
            )?;
            d_kappa[i][r] = -central_diff4(
                |v| {
                    let mut s = state.clone();
                    s.eta[i][r] = v;
                    hamiltonian(&s, model)
                },
                state.eta[i][r],
            )?;
        }
    }
    Ok((d_eta, d_kappa))
}

/// Total derivative of an observable along the Hamiltonian flow:
/// `L f = df/dtau + sum_i (df/deta_i . deta_i/dtau + df/dkappa_i . dkappa_i/dtau)`,
/// with the observable gradients from 4th-order central differences.
pub fn liouville_apply(
    observable: &dyn Fn(&WignerPhaseState) -> f64,
    state: &WignerPhaseState,
    model: &ModelSpec,
) -> Result<f64> {
    let (d_eta, d_kappa) = hamilton_rhs(state, model)?;
    let mut total = central_diff4(
        |v| {
            let mut s = state.clone();
            s.tau = v;
            Ok(observable(&s))
        },
        state.tau,
    )?;
    for i in 0..state.n_particles() {
        for r in 0..3 {
            let df_deta = central_diff4(
                |v| {
                    let mut s = state.clone();
                    s.eta[i][r] = v;
                    Ok(observable(&s))
                },
                state.eta[i][r],
            )?;
            let df_dkappa = central_diff4(
                |v| {
                    let mut s = state.clone();
                    s.kappa[i][r] = v;
                    Ok(observable(&s))
                },
                state.kappa[i][r],
            )?;
            total += df_deta * d_eta[i][r] + df_dkappa * d_kappa[i][r];
        }
    }
    Ok(total)
}

/// Per-step conservation and constraint diagnostics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub tau: f64,
    /// `|Mc(tau) - Mc(0)| / Mc(0)`.
    pub dmc_rel: f64,
    /// `|P|`.
    pub res_p: f64,
    /// `|K|/Mc`.
    pub res_k: f64,
}

/// A close-approach event from the collision hook `eta_i = eta_j`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub tau: f64,
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

/// Pairwise separation below which the collision hook fires.
pub const COLLISION_DISTANCE: f64 = 1e-6;

/// Integrated trajectory with dense-output nodes and diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub taus: Vec<f64>,
    pub states: Vec<WignerPhaseState>,
    /// Right-hand sides at the nodes, for cubic Hermite interpolation.
    pub derivs: Vec<(Vec<Vec3>, Vec<Vec3>)>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub events: Vec<CollisionEvent>,
}

impl Trajectory {
    pub fn final_state(&self) -> &WignerPhaseState {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// Dense output: cubic Hermite interpolation between the bracketing
    /// nodes (exact at nodes).
    pub fn state_at(&self, tau: f64) -> Result<WignerPhaseState> {
        let (lo, hi) = (self.taus[0], *self.taus.last().unwrap());
        let forward = hi >= lo;
        let inside = if forward { (lo..=hi).contains(&tau) } else { (hi..=lo).contains(&tau) };
        if !inside {
            return Err(Error::InvalidParam(format!(
                "tau = {tau} outside trajectory span {lo}..{hi}"
            )));
        }
        let mut k = match self
            .taus
            .binary_search_by(|t| if forward { t.partial_cmp(&tau) } else { tau.partial_cmp(t) }.unwrap())
        {
            Ok(exact) => return Ok(self.states[exact].clone()),
            Err(ins) => ins.saturating_sub(1),
        };
        k = k.min(self.taus.len() - 2);
        let (t0, t1) = (self.taus[k], self.taus[k + 1]);
        let h = t1 - t0;
        let s = (tau - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let n = self.states[k].n_particles();
        let mut eta = Vec::with_capacity(n);
        let mut kappa = Vec::with_capacity(n);
        for i in 0..n {
            let interp = |y0: Vec3, y1: Vec3, d0: Vec3, d1: Vec3| {
                y0 * h00 + d0 * (h * h10) + y1 * h01 + d1 * (h * h11)
            };
            eta.push(interp(
                self.states[k].eta[i],
                self.states[k + 1].eta[i],
                self.derivs[k].0[i],
                self.derivs[k + 1].0[i],
            ));
            kappa.push(interp(
                self.states[k].kappa[i],
                self.states[k + 1].kappa[i],
                self.derivs[k].1[i],
                self.derivs[k + 1].1[i],
            ));
        }
        WignerPhaseState::new(tau, eta, kappa)
    }
}

// Dormand-Prince 5(4) coefficients.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn pack(state: &WignerPhaseState) -> Vec<f64> {
    let n = state.n_particles();
    let mut y = Vec::with_capacity(6 * n);
    for v in state.eta.iter().chain(state.kappa.iter()) {
        y.extend_from_slice(&v.0);
    }
    y
}

fn unpack(tau: f64, y: &[f64], n: usize) -> WignerPhaseState {
    let v3 = |k: usize| Vec3([y[3 * k], y[3 * k + 1], y[3 * k + 2]]);
    WignerPhaseState {
        tau,
        eta: (0..n).map(v3).collect(),
        kappa: (n..2 * n).map(v3).collect(),
    }
}

fn rhs_flat(tau: f64, y: &[f64], n: usize, model: &ModelSpec) -> Result<Vec<f64>> {
    let state = unpack(tau, y, n);
    let (d_eta, d_kappa) = hamilton_rhs(&state, model)?;
    let mut out = Vec::with_capacity(6 * n);
    for v in d_eta.iter().chain(d_kappa.iter()) {
        out.extend_from_slice(&v.0);
    }
    Ok(out)
}

fn unpack_deriv(d: &[f64], n: usize) -> (Vec<Vec3>, Vec<Vec3>) {
    let v3 = |k: usize| Vec3([d[3 * k], d[3 * k + 1], d[3 * k + 2]]);
    ((0..n).map(v3).collect(), (n..2 * n).map(v3).collect())
}


fn hermite_vec3(y0: Vec3, y1: Vec3, d0: Vec3, d1: Vec3, h: f64, s: f64) -> Vec3 {
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    y0 * h00 + d0 * (h * h10) + y1 * h01 + d1 * (h * h11)
}

/// Scans one accepted step for pairwise close approaches using the cubic
/// Hermite dense output; appends an event per pair whose minimum separation
/// dips below [`COLLISION_DISTANCE`].
fn scan_step_events(
    t0: f64,
    t1: f64,
    s0: &WignerPhaseState,
    s1: &WignerPhaseState,
    d0: &(Vec<Vec3>, Vec<Vec3>),
    d1: &(Vec<Vec3>, Vec<Vec3>),
    events: &mut Vec<CollisionEvent>,
) {
    let n = s0.n_particles();
    let h = t1 - t0;
    for i in 0..n {
        for j in i + 1..n {
            let sep_at = |s: f64| -> f64 {
                let ei = hermite_vec3(s0.eta[i], s1.eta[i], d0.0[i], d1.0[i], h, s);
                let ej = hermite_vec3(s0.eta[j], s1.eta[j], d0.0[j], d1.0[j], h, s);
                (ei - ej).norm()
            };
            // coarse scan, then golden-section refinement around the best
            let grid = 8usize;
            let mut best_s = 0.0;
            let mut best_d = sep_at(0.0);
            for k in 1..=grid {
                let s = k as f64 / grid as f64;
                let d = sep_at(s);
                if d < best_d {
                    best_d = d;
                    best_s = s;
                }
            }
            let mut a = (best_s - 1.0 / grid as f64).max(0.0);
            let mut b = (best_s + 1.0 / grid as f64).min(1.0);
            let phi = 0.5 * (5.0f64.sqrt() - 1.0);
            let mut x1 = b - phi * (b - a);
            let mut x2 = a + phi * (b - a);
            let mut f1 = sep_at(x1);
            let mut f2 = sep_at(x2);
            for _ in 0..60 {
                if f1 < f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - phi * (b - a);
                    f1 = sep_at(x1);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + phi * (b - a);
                    f2 = sep_at(x2);
                }
            }
            let (s_min, d_min) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
            if d_min < COLLISION_DISTANCE {
                events.push(CollisionEvent { tau: t0 + s_min * h, i, j, distance: d_min });
            }
        }
    }
}


/// Integration method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Adaptive Dormand-Prince 5(4) with dense output (default).
    DormandPrince,
    /// Fixed-step implicit midpoint (symplectic) for long runs; the step
    /// count is derived from the tolerance.
    ImplicitMidpoint,
}

/// Integrates the Hamiltonian flow from `state0` over `tau_span` at mixed
/// absolute/relative tolerance `tol`.
pub fn integrate(
    state0: &WignerPhaseState,
    model: &ModelSpec,
    tau_span: f64,
    tol: f64,
    method: Integrator,
) -> Result<Trajectory> {
    match method {
        Integrator::DormandPrince => integrate_dp54(state0, model, tau_span, tol),
        Integrator::ImplicitMidpoint => {
            // heuristic step from the 2nd-order local error model
            let steps = ((tau_span.abs() / tol.powf(1.0 / 3.0)).ceil() as usize).clamp(100, 2_000_000);
            integrate_midpoint(state0, model, tau_span, steps)
        }
    }
}

fn integrate_dp54(
    state0: &WignerPhaseState,
    model: &ModelSpec,
    tau_span: f64,
    tol: f64,
) -> Result<Trajectory> {
    if model.masses.len() != state0.n_particles() {
        return Err(Error::InvalidParam("model/state particle count mismatch".into()));
    }
    if !(tau_span != 0.0) {
        return Err(Error::InvalidParam("tau_span must be non-zero".into()));
    }
    let n = state0.n_particles();
    let dir = tau_span.signum();
    let tau_end = state0.tau + tau_span;
    let mc0 = hamiltonian(state0, model)?;
    let (p0, k0) = constraint_residuals(state0, model)?;

    let mut tau = state0.tau;
    let mut y = pack(state0);
    let mut f = rhs_flat(tau, &y, n, model)?;
    let mut h = (tau_span.abs() * 1e-3).min(0.1).max(1e-8) * dir;

    let mut traj = Trajectory {
        taus: vec![tau],
        states: vec![state0.clone()],
        derivs: vec![unpack_deriv(&f, n)],
        diagnostics: vec![StepDiagnostics { tau, dmc_rel: 0.0, res_p: p0, res_k: k0 }],
        events: Vec::new(),
    };

    let mut k_stages = vec![vec![0.0; y.len()]; 7];
    let max_steps = 50_000_000usize;
    for _ in 0..max_steps {
        if (tau - tau_end) * dir >= 0.0 {
            return Ok(traj);
        }
        if (tau + h - tau_end) * dir > 0.0 {
            h = tau_end - tau;
        }
        if h.abs() < 1e-14 * tau.abs().max(1.0) {
            return Err(Error::Numerics(format!("step size underflow at tau = {tau}")));
        }
        // stage evaluations (FSAL: stage 0 = stored f)
        k_stages[0].copy_from_slice(&f);
        let mut failed = None;
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, yj) in ys.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (l, k_l) in k_stages.iter().enumerate().take(s) {
                    acc += DP_A[s][l] * k_l[j];
                }
                *yj += h * acc;
            }
            match rhs_flat(tau + DP_C[s] * h, &ys, n, model) {
                Ok(ks) => k_stages[s].copy_from_slice(&ks),
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failed {
            // radicand violation mid-step: retry with a smaller step, give
            // up once the step underflows
            h *= 0.25;
            if h.abs() < 1e-14 {
                return Err(e);
            }
            continue;
        }
        // 5th order solution (same coefficients as stage 7 of A), FSAL
        // the 5th-order weights are row 7 of A (stage-7 weight zero, FSAL)
        let mut y5 = y.clone();
        let mut err_norm: f64 = 0.0;
        for (j, y5j) in y5.iter_mut().enumerate() {
            let mut acc5 = 0.0;
            let mut acc4 = 0.0;
            for l in 0..6 {
                acc5 += DP_A[6][l] * k_stages[l][j];
            }
            for (l, k_l) in k_stages.iter().enumerate() {
                acc4 += DP_B4[l] * k_l[j];
            }
            let e = h * (acc5 - acc4);
            *y5j += h * acc5;
            let scale = tol + tol * y5j.abs();
            err_norm = err_norm.max((e / scale).abs());
        }
        if err_norm <= 1.0 {
            // accept; stage 7 is f at the new point (FSAL)
            tau += h;
            y = y5;
            f = k_stages[6].clone();
            let state = unpack(tau, &y, n);
            let mc = hamiltonian(&state, model)?;
            let (rp, rk) = constraint_residuals(&state, model)?;
            traj.diagnostics.push(StepDiagnostics {
                tau,
                dmc_rel: ((mc - mc0) / mc0).abs(),
                res_p: rp,
                res_k: rk,
            });
            let deriv = unpack_deriv(&f, n);
            scan_step_events(
                *traj.taus.last().unwrap(),
                tau,
                traj.states.last().unwrap(),
                &state,
                traj.derivs.last().unwrap(),
                &deriv,
                &mut traj.events,
            );
            traj.taus.push(tau);
            traj.derivs.push(deriv);
            traj.states.push(state);
        }
        let factor = if err_norm > 0.0 { 0.9 * err_norm.powf(-0.2) } else { 5.0 };
        h *= factor.clamp(0.2, 5.0);
    }
    Err(Error::Numerics("integration exceeded the step budget".into()))
}

/// Fixed-step implicit midpoint rule (symplectic for this non-separable
/// Hamiltonian); the implicit stage is solved by fixed-point iteration.
pub fn integrate_midpoint(
    state0: &WignerPhaseState,
    model: &ModelSpec,
    tau_span: f64,
    steps: usize,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidParam("midpoint integrator needs steps > 0".into()));
    }
    let n = state0.n_particles();
    let h = tau_span / steps as f64;
    let mc0 = hamiltonian(state0, model)?;
    let mut tau = state0.tau;
    let mut y = pack(state0);
    let f0 = rhs_flat(tau, &y, n, model)?;
    let (p0, k0) = constraint_residuals(state0, model)?;
    let mut traj = Trajectory {
        taus: vec![tau],
        states: vec![state0.clone()],
        derivs: vec![unpack_deriv(&f0, n)],
        diagnostics: vec![StepDiagnostics { tau, dmc_rel: 0.0, res_p: p0, res_k: k0 }],
        events: Vec::new(),
    };
    for _ in 0..steps {
        let mut y_mid = y.clone();
        // fixed-point iteration for y_mid = y + (h/2) f(tau + h/2, y_mid)
        for iter in 0..100 {
            let f_mid = rhs_flat(tau + 0.5 * h, &y_mid, n, model)?;
            let mut delta: f64 = 0.0;
            for j in 0..y.len() {
                let next = y[j] + 0.5 * h * f_mid[j];
                delta = delta.max((next - y_mid[j]).abs());
                y_mid[j] = next;
            }
            if delta < 1e-15 {
                break;
            }
            if iter == 99 {
                return Err(Error::Numerics(
                    "implicit midpoint iteration failed to converge".into(),
                ));
            }
        }
        for j in 0..y.len() {
            y[j] = 2.0 * y_mid[j] - y[j];
        }
        tau += h;
        let f_new = rhs_flat(tau, &y, n, model)?;
        let state = unpack(tau, &y, n);
        let mc = hamiltonian(&state, model)?;
        let (rp, rk) = constraint_residuals(&state, model)?;
        traj.diagnostics.push(StepDiagnostics {
            tau,
            dmc_rel: ((mc - mc0) / mc0).abs(),
            res_p: rp,
            res_k: rk,
        });
        traj.taus.push(tau);
        traj.derivs.push(unpack_deriv(&f_new, n));
        traj.states.push(state);
    }
    Ok(traj)
}

/// One row of the Galilei-limit scan.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GalileiRow {
    pub c: f64,
    /// `|Mc c - sum_i m_i c^2 - H_rel|` evaluated cancellation-free.
    pub deviation: f64,
}

/// Result of scanning the deviation from the Galilei limit over `c` values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GalileiScan {
    pub rows: Vec<GalileiRow>,
    /// Log-log slope of deviation vs c (expected -2).
    pub slope: f64,
}

/// Deviation `Mc c - sum m_i c^2 - H_rel` at fixed `(eta, kappa)`, computed
/// per particle through the exact rearrangement
/// `sqrt(1+x) - 1 - x/2 = -x^2 / (4 (sqrt(1+x) + 1 + x/2))`
/// to avoid the catastrophic cancellation at large `c`.
pub fn galilei_deviation(state: &WignerPhaseState, model: &ModelSpec) -> f64 {
    let mut total = 0.0;
    for i in 0..state.n_particles() {
        let m = model.masses[i];
        let c = model.c;
        let w = model.momentum_shift(i, state);
        let a = (state.kappa[i] + w).norm_sq(); // kappa^2 + V_i
        let x = a / (m * c).powi(2);
        total += -(m * c * c) * x * x / (4.0 * ((1.0 + x).sqrt() + 1.0 + 0.5 * x));
    }
    total.abs()
}

/// Scans `galilei_deviation` over the given `c` values (holding the state
/// fixed) and fits the log-log slope.
pub fn galilei_limit_scan(
    state: &WignerPhaseState,
    model: &ModelSpec,
    c_values: &[f64],
) -> Result<GalileiScan> {
    if c_values.len() < 2 {
        return Err(Error::InvalidParam("limit scan needs at least two c values".into()));
    }
    let mut rows = Vec::with_capacity(c_values.len());
    for &c in c_values {
        let m = model.with_c(c);
        rows.push(GalileiRow { c, deviation: galilei_deviation(state, &m) });
    }
    // least-squares slope of ln(deviation) vs ln(c)
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.deviation > 0.0)
        .map(|r| (r.c.ln(), r.deviation.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    } else {
        f64::NAN
    };
    Ok(GalileiScan { rows, slope })
}

/// Internal spin `S = sum eta x kappa` (c-independent by construction);
/// exposed for the limit-scan consistency check.
pub fn rest_spin(state: &WignerPhaseState) -> Vec3 {
    let mut s = Vec3::ZERO;
    for i in 0..state.n_particles() {
        s += state.eta[i].cross(state.kappa[i]);
    }
    s
}

/// Re-export used by trajectory consumers that need generators per state.
pub fn generators_along(
    traj: &Trajectory,
    model: &ModelSpec,
) -> Result<Vec<crate::canonical::InternalGenerators>> {
    traj.states.iter().map(|s| internal_generators(s, model)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{rest_frame_state, to_relative, RelativeState, SeparationMatrix};
    use crate::rng::{stream_rng, uniform_in_ball};

    fn random_state(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> WignerPhaseState {
        WignerPhaseState::new(
            0.0,
            (0..n).map(|_| uniform_in_ball(rng, 1.2)).collect(),
            (0..n).map(|_| uniform_in_ball(rng, 0.9)).collect(),
        )
        .unwrap()
    }

    fn reduced_state(
        rng: &mut rand_chacha::ChaCha8Rng,
        model: &ModelSpec,
        sep: &SeparationMatrix,
    ) -> WignerPhaseState {
        let n = sep.n;
        let rel = RelativeState {
            tau: 0.0,
            rho: (0..n - 1).map(|_| uniform_in_ball(rng, 1.0)).collect(),
            pi: (0..n - 1).map(|_| uniform_in_ball(rng, 0.7)).collect(),
        };
        rest_frame_state(&rel, sep, model).unwrap()
    }

    #[test]
    fn potential_trivial_cases() {
        let mut rng = stream_rng(40, "potential");
        let state = random_state(&mut rng, 3);
        let free = ModelSpec::free(vec![1.0; 3], 1.0).unwrap();
        for i in 0..3 {
            assert_eq!(free.potential(i, &state), 0.0);
        }
        // all positions equal -> W = 0 -> V = 0 for the quadratic model
        let v = Vec3::new(0.4, 0.1, -0.2);
        let state_eq = WignerPhaseState::new(0.0, vec![v, v, v], state.kappa.clone()).unwrap();
        let quad = ModelSpec::quadratic(0.7, vec![1.0; 3], 1.0).unwrap();
        for i in 0..3 {
            // the centroid subtraction leaves only roundoff
            assert!(quad.potential(i, &state_eq).abs() < 1e-14);
        }
    }

    #[test]
    fn potential_matches_generating_function_oracle() {
        // V_i = 2 kappa_i . dF/deta_i + (dF/deta_i)^2 with F = (g/2) sum rho^2
        // and dF/deta_i from finite differences of F.
        let g = 0.3;
        let masses = vec![1.0, 0.7, 1.8, 1.1];
        let model = ModelSpec::quadratic(g, masses.clone(), 1.0).unwrap();
        let sep = SeparationMatrix::new(&masses).unwrap();
        let mut rng = stream_rng(41, "fd-oracle");
        let state = random_state(&mut rng, 4);
        let f_of = |s: &WignerPhaseState| -> f64 {
            let split = to_relative(s, &sep).unwrap();
            0.5 * g * split.relative.rho.iter().map(|r| r.norm_sq()).sum::<f64>()
        };
        for i in 0..4 {
            let mut grad = Vec3::ZERO;
            for r in 0..3 {
                let h = fd_step(state.eta[i][r]);
                let mut sp = state.clone();
                let mut sm = state.clone();
                sp.eta[i][r] += h;
                sm.eta[i][r] -= h;
                grad[r] = (f_of(&sp) - f_of(&sm)) / (2.0 * h);
            }
            let oracle = 2.0 * state.kappa[i].dot(grad) + grad.norm_sq();
            let v = model.potential(i, &state);
            assert!((v - oracle).abs() < 1e-8, "V_{i} = {v} vs oracle {oracle}");
        }
    }

    #[test]
    fn hamiltonian_closed_forms() {
        // single particle at rest
        let m1 = ModelSpec::free(vec![1.4], 1.0).unwrap();
        let s1 = WignerPhaseState::new(0.0, vec![Vec3::ZERO], vec![Vec3::ZERO]).unwrap();
        assert_eq!(hamiltonian(&s1, &m1).unwrap(), 1.4);
        // N=2 back to back with |kappa| = mc: Mc = 2 sqrt(2) mc
        let m = 0.8;
        let m2 = ModelSpec::free(vec![m, m], 1.0).unwrap();
        let s2 = WignerPhaseState::new(
            0.0,
            vec![Vec3::ZERO, Vec3::ZERO],
            vec![Vec3::new(m, 0.0, 0.0), Vec3::new(-m, 0.0, 0.0)],
        )
        .unwrap();
        let mc = hamiltonian(&s2, &m2).unwrap();
        assert!((mc - 2.0 * 2.0f64.sqrt() * m).abs() < 1e-14);
    }

    #[test]
    fn hamiltonian_coupling_taylor_scaling() {
        // Mc(g) - Mc(0) - g dMc/dg|_0 shrinks quadratically in g
        let masses = vec![1.0, 1.3, 0.9];
        let mut rng = stream_rng(42, "taylor");
        let state = random_state(&mut rng, 3);
        let free = ModelSpec::free(masses.clone(), 1.0).unwrap();
        let mc0 = hamiltonian(&state, &free).unwrap();
        // dMc/dg at g=0: sum_i kappa_i . N(eta_i - eta_bar) / E_i^0
        let n = 3.0;
        let mut bar = Vec3::ZERO;
        for e in &state.eta {
            bar += *e;
        }
        bar = bar / n;
        let mut d0 = 0.0;
        for i in 0..3 {
            let e0 = free.particle_energy(i, &state).unwrap();
            d0 += state.kappa[i].dot(n * (state.eta[i] - bar)) / e0;
        }
        let rem = |g: f64| {
            let m = ModelSpec::quadratic(g, masses.clone(), 1.0).unwrap();
            (hamiltonian(&state, &m).unwrap() - mc0 - g * d0).abs()
        };
        let (r1, r2) = (rem(0.1), rem(0.05));
        assert!(r1 > 0.0 && r2 > 0.0);
        let ratio = r1 / r2;
        assert!((ratio - 4.0).abs() < 0.8, "quadratic remainder scaling, ratio {ratio}");
    }

    #[test]
    fn rhs_free_closed_form() {
        let mut rng = stream_rng(43, "rhs-free");
        let model = ModelSpec::free(vec![1.0, 2.0], 1.0).unwrap();
        let state = random_state(&mut rng, 2);
        let (d_eta, d_kappa) = hamilton_rhs(&state, &model).unwrap();
        for i in 0..2 {
            let e = model.particle_energy(i, &state).unwrap();
            assert!((d_eta[i] - state.kappa[i] / e).max_abs() < 1e-15);
            assert_eq!(d_kappa[i], Vec3::ZERO);
        }
    }

    #[test]
    fn rhs_matches_finite_differences() {
        let mut rng = stream_rng(44, "rhs-fd");
        let model = ModelSpec::quadratic(0.2, vec![1.0, 0.8, 1.5], 1.0).unwrap();
        let state = random_state(&mut rng, 3);
        let (de, dk) = hamilton_rhs(&state, &model).unwrap();
        let (de_fd, dk_fd) = hamilton_rhs_fd(&state, &model).unwrap();
        for i in 0..3 {
            for r in 0..3 {
                let scale = de[i][r].abs().max(1.0);
                assert!((de[i][r] - de_fd[i][r]).abs() / scale < 1e-6);
                let scale = dk[i][r].abs().max(1.0);
                assert!((dk[i][r] - dk_fd[i][r]).abs() / scale < 1e-6);
            }
        }
    }

    #[test]
    fn rhs_conserves_total_momentum_exactly() {
        let mut rng = stream_rng(45, "third-law");
        let model = ModelSpec::quadratic(0.4, vec![1.0, 1.2, 0.6, 0.9], 1.0).unwrap();
        let state = random_state(&mut rng, 4);
        let (_, dk) = hamilton_rhs(&state, &model).unwrap();
        let mut total = Vec3::ZERO;
        for d in &dk {
            total += *d;
        }
        assert!(total.max_abs() < 1e-14);
    }

    #[test]
    fn integrate_free_matches_straight_lines() {
        let mut rng = stream_rng(46, "free-lines");
        let model = ModelSpec::free(vec![1.0, 1.0], 1.0).unwrap();
        let sep = SeparationMatrix::new(&model.masses).unwrap();
        let state0 = reduced_state(&mut rng, &model, &sep);
        let traj = integrate(&state0, &model, 5.0, 1e-10, Integrator::DormandPrince).unwrap();
        let end = traj.final_state();
        for i in 0..2 {
            let e = model.particle_energy(i, &state0).unwrap();
            let expect = state0.eta[i] + state0.kappa[i] * (5.0 / e);
            assert!((end.eta[i] - expect).max_abs() < 1e-9);
            assert!((end.kappa[i] - state0.kappa[i]).max_abs() < 1e-12);
        }
        // dense output at an interior point
        let mid = traj.state_at(2.5).unwrap();
        let e = model.particle_energy(0, &state0).unwrap();
        let expect = state0.eta[0] + state0.kappa[0] * (2.5 / e);
        assert!((mid.eta[0] - expect).max_abs() < 1e-8);
    }

    #[test]
    fn integrate_conserves_quadratic_model() {
        let mut rng = stream_rng(47, "conserve");
        let model = ModelSpec::quadratic(0.1, vec![1.0; 3], 1.0).unwrap();
        let sep = SeparationMatrix::new(&model.masses).unwrap();
        let state0 = reduced_state(&mut rng, &model, &sep);
        let traj = integrate(&state0, &model, 20.0, 1e-10, Integrator::DormandPrince).unwrap();
        let worst = traj.diagnostics.iter().fold(0.0f64, |w, d| w.max(d.dmc_rel));
        assert!(worst < 1e-10, "energy drift {worst:.3e}");
        let s0 = rest_spin(&state0);
        let s1 = rest_spin(traj.final_state());
        assert!((s1 - s0).max_abs() < 1e-10);
        let worst_p = traj.diagnostics.iter().fold(0.0f64, |w, d| w.max(d.res_p));
        let worst_k = traj.diagnostics.iter().fold(0.0f64, |w, d| w.max(d.res_k));
        assert!(worst_p < 1e-9, "P residual {worst_p:.3e}");
        assert!(worst_k < 1e-8, "K residual {worst_k:.3e}");
    }

    #[test]
    fn integrate_reverses() {
        let mut rng = stream_rng(48, "reverse");
        let model = ModelSpec::quadratic(0.15, vec![1.0, 1.4], 1.0).unwrap();
        let sep = SeparationMatrix::new(&model.masses).unwrap();
        let state0 = reduced_state(&mut rng, &model, &sep);
        let tol = 1e-10;
        let fwd = integrate(&state0, &model, 8.0, tol, Integrator::DormandPrince).unwrap();
        let back = integrate(fwd.final_state(), &model, -8.0, tol, Integrator::DormandPrince)
            .unwrap();
        let end = back.final_state();
        for i in 0..2 {
            assert!((end.eta[i] - state0.eta[i]).max_abs() < 10.0 * tol.sqrt() * tol.sqrt().sqrt());
            assert!((end.eta[i] - state0.eta[i]).max_abs() < 1e-8);
            assert!((end.kappa[i] - state0.kappa[i]).max_abs() < 1e-8);
        }
    }

    #[test]
    fn implicit_midpoint_long_run_drift() {
        let mut rng = stream_rng(49, "midpoint");
        let model = ModelSpec::quadratic(0.1, vec![1.0, 1.0], 1.0).unwrap();
        let sep = SeparationMatrix::new(&model.masses).unwrap();
        let state0 = reduced_state(&mut rng, &model, &sep);
        let traj = integrate_midpoint(&state0, &model, 50.0, 20_000).unwrap();
        let worst = traj.diagnostics.iter().fold(0.0f64, |w, d| w.max(d.dmc_rel));
        assert!(worst < 1e-7, "midpoint energy drift {worst:.3e}");
    }

    #[test]
    fn collision_hook_fires_on_head_on_approach() {
        // two equal-mass particles aimed at each other along x pass through
        // eta_1 = eta_2 in the free model
        let model = ModelSpec::free(vec![1.0, 1.0], 1.0).unwrap();
        let state0 = WignerPhaseState::new(
            0.0,
            vec![Vec3::new(-0.5, 0.0, 0.0), Vec3::new(0.5, 0.0, 0.0)],
            vec![Vec3::new(0.7, 0.0, 0.0), Vec3::new(-0.7, 0.0, 0.0)],
        )
        .unwrap();
        let traj = integrate(&state0, &model, 3.0, 1e-10, Integrator::DormandPrince).unwrap();
        assert!(
            !traj.events.is_empty(),
            "head-on free motion must trigger the collision hook"
        );
        // offset in y: closest approach stays above the threshold
        let state_off = WignerPhaseState::new(
            0.0,
            vec![Vec3::new(-0.5, 0.01, 0.0), Vec3::new(0.5, -0.01, 0.0)],
            vec![Vec3::new(0.7, 0.0, 0.0), Vec3::new(-0.7, 0.0, 0.0)],
        )
        .unwrap();
        let traj = integrate(&state_off, &model, 3.0, 1e-10, Integrator::DormandPrince).unwrap();
        assert!(traj.events.is_empty());
    }

    #[test]
    fn liouville_annihilates_conserved_quantities() {
        let mut rng = stream_rng(50, "liouville");
        let model = ModelSpec::quadratic(0.2, vec![1.0, 0.9, 1.1], 1.0).unwrap();
        let state = random_state(&mut rng, 3);
        let m = model.clone();
        let mc = move |s: &WignerPhaseState| hamiltonian(s, &m).unwrap();
        let lmc = liouville_apply(&mc, &state, &model).unwrap();
        assert!(lmc.abs() < 1e-10, "L[Mc] = {lmc:.3e}");
        let px = |s: &WignerPhaseState| s.kappa.iter().map(|k| k[0]).sum::<f64>();
        let lpx = liouville_apply(&px, &state, &model).unwrap();
        assert!(lpx.abs() < 1e-10, "L[P_x] = {lpx:.3e}");
    }

    #[test]
    fn liouville_moves_position_with_velocity() {
        let mut rng = stream_rng(51, "liouville2");
        let model = ModelSpec::free(vec![1.0, 1.0], 1.0).unwrap();
        let state = random_state(&mut rng, 2);
        let obs = |s: &WignerPhaseState| s.eta[0][0];
        let val = liouville_apply(&obs, &state, &model).unwrap();
        let expect = state.kappa[0][0] / model.particle_energy(0, &state).unwrap();
        assert!((val - expect).abs() < 1e-9);
    }

    #[test]
    fn galilei_scan_slope_is_minus_two() {
        let mut rng = stream_rng(52, "limit");
        let state = random_state(&mut rng, 2);
        let model = ModelSpec::free(vec![1.0, 1.3], 1.0).unwrap();
        let scan =
            galilei_limit_scan(&state, &model, &[10.0, 100.0, 1000.0, 10000.0]).unwrap();
        assert!((scan.slope + 2.0).abs() < 0.05, "slope {}", scan.slope);
        // quadratic model scans the same way
        let quad = ModelSpec::quadratic(0.2, vec![1.0, 1.3], 1.0).unwrap();
        let scan = galilei_limit_scan(&state, &quad, &[10.0, 100.0, 1000.0, 10000.0]).unwrap();
        assert!((scan.slope + 2.0).abs() < 0.05, "quad slope {}", scan.slope);
    }

    #[test]
    fn galilei_deviation_zero_momentum() {
        let state = WignerPhaseState::new(
            0.0,
            vec![Vec3::new(0.3, 0.0, 0.0), Vec3::new(-0.3, 0.0, 0.0)],
            vec![Vec3::ZERO, Vec3::ZERO],
        )
        .unwrap();
        let model = ModelSpec::free(vec![1.0, 1.0], 1.0).unwrap();
        assert_eq!(galilei_deviation(&state, &model), 0.0);
        // spin is c-independent
        let s = rest_spin(&state);
        assert_eq!(s, Vec3::ZERO);
    }

    #[test]
    fn radicand_guard_reports_domain_error() {
        // masses are positive by construction, so force the guard through a
        // non-finite momentum
        let model = ModelSpec::free(vec![1.0], 1.0).unwrap();
        let mut state = WignerPhaseState::new(0.0, vec![Vec3::ZERO], vec![Vec3::ZERO]).unwrap();
        state.kappa[0] = Vec3::new(f64::NAN, 0.0, 0.0);
        assert!(matches!(model.particle_energy(0, &state), Err(Error::Domain(_))));
    }
}
