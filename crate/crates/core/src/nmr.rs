//! Mapping between oscillation parameters and an NMR simulation program: a
//! static field `M0 = V0/2 sigma_z`, the two-level Hamiltonian with Rabi scale
//! `omega`, and fluctuating fields `M_i = d_i sigma_i` with `c_ij = d_i d_j`.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::hamiltonian::from_field;
use crate::params::{symmetric_part, DecayMatrix, OscillationParams};
use crate::state::{c, pauli, CMatrix2};

const RANK_ONE_TOL: f64 = 1e-10;

/// Quoted operating window for neutrino energies of 1 to 10 MeV.
pub const OMEGA_RANGE: (f64, f64) = (4.0e-12, 4.0e-11);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmrProgram {
    /// Rabi scale `dm2 / 2E` (eV).
    pub omega: f64,
    pub theta: f64,
    pub phi: f64,
    /// Static field coefficient `V0 / 2` (eV).
    pub m0: f64,
    /// Fluctuation amplitudes with `c_ij = d_i d_j` (sqrt eV).
    pub d: [f64; 3],
}

/// Whether each quantity falls inside the quoted operating window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RangeFlags {
    pub omega: bool,
    pub v0: bool,
    /// Diagonal decay rates against `0.1 V0` over the same window.
    pub decay: bool,
}

impl NmrProgram {
    pub fn v0(&self) -> f64 {
        2.0 * self.m0
    }

    /// `V0 / omega`.
    pub fn eta(&self) -> f64 {
        self.v0() / self.omega
    }

    pub fn decay_matrix(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.d[i] * self.d[j]))
    }

    /// `M0 + H_NMR`.
    pub fn hamiltonian(&self) -> CMatrix2 {
        let (s2, c2) = (2.0 * self.theta).sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        let half = 0.5 * self.omega;
        from_field([half * s2 * cp, half * s2 * sp, self.m0 - half * c2])
    }

    /// `-1/2 sum_ij [M_i, [M_j, rho]]`.
    pub fn dissipator(&self, rho: &CMatrix2) -> CMatrix2 {
        let s = pauli();
        let mut out = CMatrix2::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mi = s[i] * c(self.d[i], 0.0);
                let mj = s[j] * c(self.d[j], 0.0);
                let inner = mj * rho - rho * mj;
                out -= (mi * inner - inner * mi) * c(0.5, 0.0);
            }
        }
        out
    }

    pub fn range_flags(&self) -> RangeFlags {
        let eta = self.eta();
        let inside = |x: f64, lo: f64, hi: f64| x >= lo * (1.0 - 1e-12) && x <= hi * (1.0 + 1e-12);
        let (lo, hi) = OMEGA_RANGE;
        let decay = self.decay_matrix();
        RangeFlags {
            omega: inside(self.omega, lo, hi),
            v0: inside(self.v0(), eta * lo, eta * hi),
            decay: (0..3).all(|i| decay[i][i] == 0.0 || inside(decay[i][i], 0.1 * eta * lo, 0.1 * eta * hi)),
        }
    }
}

fn nearest_rank_one(c: &[[f64; 3]; 3]) -> ([f64; 3], f64) {
    let sym = symmetric_part(c);
    let eig = sym.symmetric_eigen();
    let k = eig.eigenvalues.imax();
    let lam = eig.eigenvalues[k].max(0.0);
    let v = eig.eigenvectors.column(k);
    let sign = v.iter().find(|x| x.abs() > 1e-15).map_or(1.0, |x| x.signum());
    let d = [0, 1, 2].map(|i| sign * lam.sqrt() * v[i]);
    (d, residual(c, &d))
}

fn residual(c: &[[f64; 3]; 3], d: &[f64; 3]) -> f64 {
    let m = Matrix3::from_fn(|i, j| c[i][j] - d[i] * d[j]);
    m.norm()
}

/// Factorizes the decay matrix as `c_ij = d_i d_j`.
///
/// All `d_i >= 0` when every off-diagonal entry is non-negative; otherwise the
/// relative signs come from the off-diagonals and the first non-zero
/// amplitude is taken positive.
pub fn to_nmr(params: &OscillationParams) -> Result<NmrProgram> {
    let c = params.decay.as_array();
    let scale = c.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
    let mut d = [0, 1, 2].map(|i| c[i][i].max(0.0).sqrt());
    let negative = (0..3).any(|i| (0..3).any(|j| i != j && c[i][j] < 0.0));
    if negative {
        if let Some(k) = (0..3).find(|&i| d[i] > 0.0) {
            for j in 0..3 {
                if j != k && c[k][j] < 0.0 {
                    d[j] = -d[j];
                }
            }
        }
    }
    let res = residual(&c, &d);
    if res > RANK_ONE_TOL * scale {
        let (nearest, nearest_res) = nearest_rank_one(&c);
        return Err(Error::NotRankOne { nearest, residual: nearest_res / scale });
    }
    Ok(NmrProgram {
        omega: params.omega(),
        theta: params.theta_vac,
        phi: params.phi_cp,
        m0: 0.5 * params.v0,
        d,
    })
}

/// Oscillation parameters realized by `prog` at neutrino energy `energy_ev`.
pub fn from_nmr(prog: &NmrProgram, energy_ev: f64) -> Result<OscillationParams> {
    let decay = DecayMatrix::new(prog.decay_matrix())?;
    OscillationParams::new(energy_ev, 2.0 * energy_ev * prog.omega, prog.theta, prog.phi, prog.v0(), decay)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{build_generator, dissipator, GeneratorMode};
    use crate::hamiltonian::flavor_hamiltonian;
    use crate::params::{make_params, DecaySpec};
    use crate::spectral::spectral_solve;
    use crate::state::{density_from_bloch, initial_bloch, BlochVector, Flavor};
    use std::f64::consts::PI;

    fn fig1() -> OscillationParams {
        make_params(1e7, 8e-5, 0.188 * PI, 0.7, 1.0, &DecaySpec::sqrt_times_v0([0.095, 0.15, 0.15])).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn figure_one_amplitudes() {
        let p = fig1();
        let prog = to_nmr(&p).unwrap();
        let expected = [0.095, 0.15, 0.15].map(|x: f64| (x * p.v0).sqrt());
        for i in 0..3 {
            assert!(rel(prog.d[i], expected[i]) < 1e-14);
        }
        assert!(rel(prog.omega, 4e-12) < 1e-14 && rel(prog.m0, 2e-12) < 1e-14);
        assert_eq!(prog.range_flags(), RangeFlags { omega: true, v0: true, decay: false });
    }

    #[test]
    fn zero_decay_and_single_amplitude() {
        let p = fig1().with_decay(DecayMatrix::zero());
        assert_eq!(to_nmr(&p).unwrap().d, [0.0; 3]);
        let prog = NmrProgram { d: [3e-7, 0.0, 0.0], ..to_nmr(&p).unwrap() };
        let q = from_nmr(&prog, 1e7).unwrap();
        let c = q.decay.as_array();
        assert!(rel(c[0][0], 9e-14) < 1e-14);
        assert!(c.iter().flatten().filter(|x| **x != 0.0).count() == 1);
    }

    #[test]
    fn rejects_full_rank_decay() {
        let p = fig1().with_decay(DecayMatrix::diagonal([1e-13, 2e-13, 3e-13]).unwrap());
        match to_nmr(&p) {
            Err(Error::NotRankOne { nearest, residual }) => {
                assert!(rel(nearest[2].abs(), 3e-13f64.sqrt()) < 1e-10);
                assert!(residual > 0.1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn recovers_relative_signs() {
        let d = [2e-7, -1e-7, 3e-7];
        let c = std::array::from_fn(|i| std::array::from_fn(|j| d[i] * d[j]));
        let p = fig1().with_decay(DecayMatrix::new(c).unwrap());
        let prog = to_nmr(&p).unwrap();
        for i in 0..3 {
            assert!(rel(prog.d[i], d[i]) < 1e-14);
        }
        let e = [-2e-7, 1e-7, 3e-7];
        let c = std::array::from_fn(|i| std::array::from_fn(|j| e[i] * e[j]));
        let q = fig1().with_decay(DecayMatrix::new(c).unwrap());
        let d = to_nmr(&q).unwrap().d;
        for i in 0..3 {
            assert!(rel(d[i], -e[i]) < 1e-14);
        }
    }

    #[test]
    fn round_trips() {
        let p = fig1();
        let prog = to_nmr(&p).unwrap();
        let q = from_nmr(&prog, p.energy_ev).unwrap();
        assert!(rel(q.delta_m2, p.delta_m2) < 1e-12 && rel(q.v0, p.v0) < 1e-12);
        assert_eq!((q.theta_vac, q.phi_cp), (p.theta_vac, p.phi_cp));
        let (a, b) = (p.decay.as_array(), q.decay.as_array());
        for i in 0..3 {
            for j in 0..3 {
                assert!(rel(a[i][j], b[i][j]) < 1e-12);
            }
        }
        let again = to_nmr(&q).unwrap();
        assert!(rel(again.omega, prog.omega) < 1e-12 && rel(again.m0, prog.m0) < 1e-12);
        for i in 0..3 {
            assert!(rel(again.d[i], prog.d[i]) < 1e-12);
        }
    }

    #[test]
    fn same_physics() {
        let p = fig1();
        let prog = to_nmr(&p).unwrap();
        let h = prog.hamiltonian() - flavor_hamiltonian(&p);
        assert!(h.iter().all(|z| z.norm() < 1e-15 * p.omega()));
        let rho = density_from_bloch(&BlochVector::new(0.3, -0.2, 0.5)).unwrap();
        let diff = prog.dissipator(rho.matrix()) - dissipator(&p, rho.matrix());
        assert!(diff.iter().all(|z| z.norm() < 1e-15 * p.omega()));
        let q = from_nmr(&prog, p.energy_ev).unwrap();
        let n0 = initial_bloch(Flavor::Electron, &p);
        let a = spectral_solve(&build_generator(&p, GeneratorMode::DerivedFromH), &n0).unwrap();
        let b = spectral_solve(&build_generator(&q, GeneratorMode::DerivedFromH), &n0).unwrap();
        for k in 0..=20 {
            let t = k as f64 * 1e11;
            assert!(a.evaluate(t).max_abs_diff(&b.evaluate(t)) < 1e-12);
        }
    }
}
