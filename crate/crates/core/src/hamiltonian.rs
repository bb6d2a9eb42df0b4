//! Effective two-flavor Hamiltonian in matter, its diagonalization, and the
//! dissipation-free amplitudes and probabilities.
//!
//! The flavor-independent trace term of the full Hamiltonian only contributes
//! a global phase and is never built.

use crate::state::{c, pauli, CMatrix2, C64};
use crate::params::OscillationParams;

/// Traceless flavor-basis Hamiltonian (eV), acting on `(psi_ee, psi_emu)`:
/// `(1/4E) [[A - dm2 cos2t, dm2 sin2t e^{-i phi}], [.., dm2 cos2t - A]]`.
pub fn flavor_hamiltonian(params: &OscillationParams) -> CMatrix2 {
    let k = 1.0 / (4.0 * params.energy_ev);
    let (s2, c2) = params.sin_cos_2theta();
    let dm2 = params.delta_m2;
    let diag = k * (params.a_cc() - dm2 * c2);
    let off = C64::from_polar(k * dm2 * s2, -params.phi_cp);
    CMatrix2::new(c(diag, 0.0), off, off.conj(), c(-diag, 0.0))
}

/// Traceless Hamiltonian in the frame where the flavor states are
/// `|nu_e> = (cos theta, e^{i phi} sin theta)`, `|nu_mu> = (sin theta, -e^{i phi} cos theta)`:
/// the vacuum term is diagonal, `-(omega/2) sigma_z`, and the matter potential
/// acts on the electron-flavor projector, `V0 (rho_e(0) - 1/2)`.
pub fn mass_frame_hamiltonian(params: &OscillationParams) -> CMatrix2 {
    from_field(mass_frame_field(params))
}

/// Field vector `h` with `H = h . sigma` for [`flavor_hamiltonian`].
pub fn flavor_field(params: &OscillationParams) -> [f64; 3] {
    let (s2, c2) = params.sin_cos_2theta();
    let (sp, cp) = params.phi_cp.sin_cos();
    let w = params.omega();
    [0.5 * w * s2 * cp, 0.5 * w * s2 * sp, 0.5 * (params.v0 - w * c2)]
}

/// Field vector `h` with `H = h . sigma` for [`mass_frame_hamiltonian`].
pub fn mass_frame_field(params: &OscillationParams) -> [f64; 3] {
    let (s2, c2) = params.sin_cos_2theta();
    let (sp, cp) = params.phi_cp.sin_cos();
    let v = 0.5 * params.v0;
    [v * s2 * cp, v * s2 * sp, v * c2 - 0.5 * params.omega()]
}

pub(crate) fn from_field(h: [f64; 3]) -> CMatrix2 {
    let s = pauli();
    s[0] * c(h[0], 0.0) + s[1] * c(h[1], 0.0) + s[2] * c(h[2], 0.0)
}

/// Pauli decomposition `h_k = tr(H sigma_k) / 2` of a Hermitian matrix.
pub fn field_of(h: &CMatrix2) -> [f64; 3] {
    let s = pauli();
    [0, 1, 2].map(|k| 0.5 * (h * s[k]).trace().re)
}

/// Mixing in matter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatterBasis {
    /// Effective mixing angle (rad), in (0, pi/2).
    pub theta_m: f64,
    /// Effective splitting (eV^2).
    pub dm2_m: f64,
    /// `[[cos, sin e^{-i phi}], [-sin e^{i phi}, cos]]`.
    pub mixing: CMatrix2,
}

/// Effective angle and splitting. The angle comes from
/// `atan2(dm2 sin2t, dm2 cos2t - A_cc)`, so `2 theta_m` stays in (0, pi) and
/// passes continuously through pi/2 at resonance.
pub fn matter_basis(params: &OscillationParams) -> MatterBasis {
    let (s2, c2) = params.sin_cos_2theta();
    let dm2 = params.delta_m2;
    let x = dm2 * c2 - params.a_cc();
    let y = dm2 * s2;
    let theta_m = 0.5 * y.atan2(x);
    let dm2_m = x.hypot(y);
    let (s, co) = theta_m.sin_cos();
    let e = C64::from_polar(1.0, -params.phi_cp);
    let mixing = CMatrix2::new(c(co, 0.0), e * s, -e.conj() * s, c(co, 0.0));
    MatterBasis { theta_m, dm2_m, mixing }
}

/// `(psi_ee(t), psi_emu(t))` for an electron neutrino at t = 0.
pub fn amplitudes(params: &OscillationParams, t: f64) -> (C64, C64) {
    let mb = matter_basis(params);
    let phase = mb.dm2_m * t / (4.0 * params.energy_ev);
    let (s, co) = mb.theta_m.sin_cos();
    let plus = C64::from_polar(1.0, phase);
    let minus = plus.conj();
    let psi_ee = plus * (co * co) + minus * (s * s);
    let psi_emu = C64::from_polar(0.5 * (2.0 * mb.theta_m).sin(), params.phi_cp) * (minus - plus);
    (psi_ee, psi_emu)
}

/// `(P_ee, P_emu)` with `P_emu = sin^2(2 theta_m) sin^2(dm2_m t / 4E)`; independent of phi.
pub fn closed_form_probabilities(params: &OscillationParams, t: f64) -> (f64, f64) {
    let mb = matter_basis(params);
    let p_emu = (2.0 * mb.theta_m).sin().powi(2) * (mb.dm2_m * t / (4.0 * params.energy_ev)).sin().powi(2);
    (1.0 - p_emu, p_emu)
}
