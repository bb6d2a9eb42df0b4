//! Physical inputs: oscillation parameters and the Lindblad decay matrix.
//!
//! Natural units throughout (hbar = 1): energies in eV, times in eV^-1.
//! One eV^-1 of time is about 6.58e-16 s.

use std::f64::consts::FRAC_PI_2;

use log::warn;
use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance of the positive-semidefinite diagnostic.
const PSD_TOL: f64 = 1e-12;

/// Real 3x3 matrix of Lindblad coefficients `c_ij` in eV, index order (x, y, z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayMatrix {
    c: [[f64; 3]; 3],
    is_psd: bool,
}

impl DecayMatrix {
    /// Accepts any real matrix with a non-negative diagonal. Negative
    /// off-diagonals, asymmetry and indefiniteness are warned about but kept.
    pub fn new(c: [[f64; 3]; 3]) -> Result<Self> {
        for (i, row) in c.iter().enumerate() {
            for &x in row {
                if !x.is_finite() {
                    return Err(Error::NonFinite("decay coefficient"));
                }
            }
            if row[i] < 0.0 {
                return Err(Error::NegativeDiagonalDecay { index: i + 1, value: row[i] });
            }
        }
        let is_psd = min_symmetric_eigenvalue(&c) >= -PSD_TOL * max_abs(&c);
        let m = Self { c, is_psd };
        if !is_psd {
            warn!("decay matrix is not positive semidefinite; evolution may leave the Bloch ball");
        }
        if !m.is_symmetric(1e-12) {
            warn!("decay matrix is not symmetric; only its symmetric part is physical");
        }
        if c.iter().flatten().any(|&x| x < 0.0) {
            warn!("decay matrix has negative off-diagonal coefficients");
        }
        Ok(m)
    }

    pub fn zero() -> Self {
        Self { c: [[0.0; 3]; 3], is_psd: true }
    }

    pub fn diagonal(diag: [f64; 3]) -> Result<Self> {
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            c[i][i] = diag[i];
        }
        Self::new(c)
    }

    /// Rank-one matrix `c_ij = sqrt(c_ii c_jj)` built from its diagonal.
    pub fn sqrt_rule(diag: [f64; 3]) -> Result<Self> {
        if let Some(i) = diag.iter().position(|&x| x < 0.0) {
            return Err(Error::NegativeDiagonalDecay { index: i + 1, value: diag[i] });
        }
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = if i == j { diag[i] } else { (diag[i] * diag[j]).sqrt() };
            }
        }
        Self::new(c)
    }

    /// Coefficient `c_ij` with zero-based indices.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[i][j]
    }

    pub fn as_array(&self) -> [[f64; 3]; 3] {
        self.c
    }

    pub fn trace(&self) -> f64 {
        self.c[0][0] + self.c[1][1] + self.c[2][2]
    }

    pub fn is_psd(&self) -> bool {
        self.is_psd
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let tol = rel_tol * max_abs(&self.c);
        (0..3).all(|i| (0..3).all(|j| (self.c[i][j] - self.c[j][i]).abs() <= tol))
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().flatten().all(|&x| x == 0.0)
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> [f64; 3] {
        let mut ev: Vec<f64> = SymmetricEigen::new(symmetric_part(&self.c)).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        [ev[0], ev[1], ev[2]]
    }
}

fn max_abs(c: &[[f64; 3]; 3]) -> f64 {
    c.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub(crate) fn symmetric_part(c: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| 0.5 * (c[i][j] + c[j][i]))
}

fn min_symmetric_eigenvalue(c: &[[f64; 3]; 3]) -> f64 {
    SymmetricEigen::new(symmetric_part(c)).eigenvalues.min()
}

/// A diagonal decay coefficient, either absolute or relative to the matter potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayValue {
    /// Multiple of V0.
    TimesV0(f64),
    /// Absolute value in eV.
    Absolute(f64),
}

impl DecayValue {
    fn resolve(self, v0: f64) -> f64 {
        match self {
            DecayValue::TimesV0(k) => k * v0,
            DecayValue::Absolute(x) => x,
        }
    }
}

/// How off-diagonal coefficients are filled from the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffDiagonalRule {
    /// `c_ij = sqrt(c_ii c_jj)` (rank one).
    Sqrt,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecaySpec {
    pub diagonal: [DecayValue; 3],
    pub off_diagonal: OffDiagonalRule,
}

impl DecaySpec {
    pub fn none() -> Self {
        Self { diagonal: [DecayValue::Absolute(0.0); 3], off_diagonal: OffDiagonalRule::Zero }
    }

    /// Diagonal given in multiples of V0, off-diagonals by the square-root rule.
    pub fn sqrt_times_v0(diag: [f64; 3]) -> Self {
        Self { diagonal: diag.map(DecayValue::TimesV0), off_diagonal: OffDiagonalRule::Sqrt }
    }

    pub fn resolve(&self, v0: f64) -> Result<DecayMatrix> {
        let diag = self.diagonal.map(|d| d.resolve(v0));
        match self.off_diagonal {
            OffDiagonalRule::Sqrt => DecayMatrix::sqrt_rule(diag),
            OffDiagonalRule::Zero => DecayMatrix::diagonal(diag),
        }
    }
}

/// Inputs of a two-flavor oscillation in constant, dissipative matter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationParams {
    /// Neutrino energy E (eV).
    pub energy_ev: f64,
    /// Mass-squared splitting (eV^2).
    pub delta_m2: f64,
    /// Vacuum mixing angle (rad), in (0, pi/2).
    pub theta_vac: f64,
    /// Intrinsic CP phase (rad), stored unreduced.
    pub phi_cp: f64,
    /// Matter potential V0 (eV).
    pub v0: f64,
    pub decay: DecayMatrix,
}

impl OscillationParams {
    pub fn new(energy_ev: f64, delta_m2: f64, theta_vac: f64, phi_cp: f64, v0: f64, decay: DecayMatrix) -> Result<Self> {
        for (x, name) in [(energy_ev, "energy"), (delta_m2, "mass splitting"), (theta_vac, "theta"), (phi_cp, "phi"), (v0, "V0")] {
            if !x.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        if energy_ev <= 0.0 {
            return Err(Error::NonPositiveEnergy(energy_ev));
        }
        if delta_m2 <= 0.0 {
            return Err(Error::NonPositiveSplitting(delta_m2));
        }
        if !(theta_vac > 0.0 && theta_vac < FRAC_PI_2) {
            return Err(Error::AngleOutOfRange { name: "theta", value: theta_vac });
        }
        if v0 < 0.0 {
            return Err(Error::NegativePotential(v0));
        }
        let p = Self { energy_ev, delta_m2, theta_vac, phi_cp, v0, decay };
        if !(p.omega().is_finite() && p.omega() > 0.0) {
            return Err(Error::NonFinite("vacuum oscillation frequency"));
        }
        Ok(p)
    }

    /// Vacuum oscillation frequency `delta_m2 / 2E` (eV).
    pub fn omega(&self) -> f64 {
        self.delta_m2 / (2.0 * self.energy_ev)
    }

    /// Ratio of the matter potential to the vacuum frequency.
    pub fn eta(&self) -> f64 {
        self.v0 / self.omega()
    }

    /// Charged-current term `A_cc = 2 E V0` (eV^2).
    pub fn a_cc(&self) -> f64 {
        2.0 * self.energy_ev * self.v0
    }

    /// `(sin 2 theta, cos 2 theta)`.
    pub fn sin_cos_2theta(&self) -> (f64, f64) {
        (2.0 * self.theta_vac).sin_cos()
    }

    pub fn with_phi(&self, phi_cp: f64) -> Self {
        Self { phi_cp, ..*self }
    }

    pub fn with_decay(&self, decay: DecayMatrix) -> Self {
        Self { decay, ..*self }
    }
}

/// Builds parameters with `V0 = eta * delta_m2 / 2E` and decay coefficients
/// resolved against that V0.
pub fn make_params(energy_ev: f64, delta_m2: f64, theta_vac: f64, phi_cp: f64, eta: f64, decay: &DecaySpec) -> Result<OscillationParams> {
    if !eta.is_finite() {
        return Err(Error::NonFinite("eta"));
    }
    if eta < 0.0 {
        return Err(Error::NegativePotential(eta));
    }
    if energy_ev <= 0.0 {
        return Err(Error::NonPositiveEnergy(energy_ev));
    }
    let v0 = eta * delta_m2 / (2.0 * energy_ev);
    let decay = decay.resolve(v0)?;
    OscillationParams::new(energy_ev, delta_m2, theta_vac, phi_cp, v0, decay)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn fig1_spec() -> DecaySpec {
        DecaySpec::sqrt_times_v0([0.095, 0.15, 0.15])
    }

    #[test]
    fn figure_one_scales() {
        let p = make_params(1e7, 8e-5, 0.188 * PI, 0.0, 1.0, &fig1_spec()).unwrap();
        assert!((p.omega() - 4e-12).abs() < 1e-24);
        assert!((p.v0 - 4e-12).abs() < 1e-24);
        assert!((p.decay.get(0, 0) - 3.8e-13).abs() < 1e-25);
        assert!((p.a_cc() - 8e-5).abs() < 1e-17);
    }

    #[test]
    fn vacuum_limit_zeroes_relative_decay() {
        let p = make_params(1e7, 8e-5, 0.188 * PI, 0.0, 0.0, &fig1_spec()).unwrap();
        assert_eq!(p.v0, 0.0);
        assert!(p.decay.is_zero());
    }

    #[test]
    fn eta_scales_potential() {
        let p = make_params(1e7, 8e-5, 0.3, 0.0, 2.0, &DecaySpec::none()).unwrap();
        assert!((p.v0 - 8e-12).abs() < 1e-24);
        assert!((p.eta() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn validation_errors() {
        let none = DecaySpec::none();
        assert!(matches!(make_params(0.0, 8e-5, 0.3, 0.0, 1.0, &none), Err(Error::NonPositiveEnergy(_))));
        assert!(matches!(make_params(1e7, 8e-5, 0.0, 0.0, 1.0, &none), Err(Error::AngleOutOfRange { .. })));
        assert!(matches!(make_params(1e7, 8e-5, FRAC_PI_2, 0.0, 1.0, &none), Err(Error::AngleOutOfRange { .. })));
        assert!(matches!(make_params(1e7, -1.0, 0.3, 0.0, 1.0, &none), Err(Error::NonPositiveSplitting(_))));
        let bad = DecaySpec { diagonal: [DecayValue::Absolute(-1e-13), DecayValue::Absolute(0.0), DecayValue::Absolute(0.0)], off_diagonal: OffDiagonalRule::Zero };
        assert!(matches!(make_params(1e7, 8e-5, 0.3, 0.0, 1.0, &bad), Err(Error::NegativeDiagonalDecay { index: 1, .. })));
    }

    #[test]
    fn sqrt_rule_is_rank_one_psd() {
        let c = DecayMatrix::sqrt_rule([0.095, 0.15, 0.15]).unwrap();
        assert!(c.is_psd());
        let ev = c.symmetric_eigenvalues();
        assert!(ev[0].abs() < 1e-12 && ev[1].abs() < 1e-12);
        assert!((ev[2] - c.trace()).abs() < 1e-12);
    }

    #[test]
    fn indefinite_matrix_is_accepted_with_flag() {
        let c = DecayMatrix::new([[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert!(!c.is_psd());
        let c = DecayMatrix::new([[1.0, -0.5, 0.0], [-0.5, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert!(c.is_psd());
    }
}
