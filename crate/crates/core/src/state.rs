//! Density matrices, Bloch vectors and the flavor initial states.

use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::OscillationParams;

pub type C64 = Complex64;
pub type CMatrix2 = Matrix2<C64>;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
/// Positivity diagnostic threshold on the smallest eigenvalue.
pub const POSITIVITY_TOL: f64 = 1e-9;
/// Norms above this are rejected when building a density matrix.
pub const SPHERE_REJECT_TOL: f64 = 1e-6;

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Pauli matrices in (x, y, z) order.
pub fn pauli() -> [CMatrix2; 3] {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        CMatrix2::new(z, one, one, z),
        CMatrix2::new(z, -i, i, z),
        CMatrix2::new(one, z, z, -one),
    ]
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_residual(m: &CMatrix2) -> f64 {
    (m - m.adjoint()).iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Bloch components `(rho12 + rho21, i(rho12 - rho21), rho11 - rho22)` of a
/// Hermitian 2x2 matrix. The tolerance is relative to the matrix scale so
/// that derivatives in eV are handled like dimensionless states.
pub fn bloch_components(m: &CMatrix2) -> Result<[f64; 3]> {
    let scale = m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
    let residual = hermiticity_residual(m);
    if residual > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NonHermitianInput { residual });
    }
    let (r11, r12, r21, r22) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let u = r12 + r21;
    let v = c(0.0, 1.0) * (r12 - r21);
    let w = r11 - r22;
    Ok([u.re, v.re, w.re])
}

/// Neutrino flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    Electron,
    Muon,
}

/// Real Poincare-sphere vector `(u, v, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlochVector {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl BlochVector {
    pub const ZERO: Self = Self { u: 0.0, v: 0.0, w: 0.0 };

    pub fn new(u: f64, v: f64, w: f64) -> Self {
        Self { u, v, w }
    }

    pub fn norm(&self) -> f64 {
        (self.u * self.u + self.v * self.v + self.w * self.w).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.u * other.u + self.v * other.v + self.w * other.w
    }

    pub fn to_vector3(self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, self.w)
    }

    pub fn from_vector3(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.u, self.v, self.w]
    }

    /// Largest componentwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.u - other.u).abs().max((self.v - other.v).abs()).max((self.w - other.w).abs())
    }
}

impl std::ops::Neg for BlochVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.u, -self.v, -self.w)
    }
}

/// Hermitian, unit-trace 2x2 density matrix.
///
/// Positivity is a diagnostic (`min_eigenvalue`), not a construction error:
/// dissipative numerics may dip slightly below zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix2(CMatrix2);

impl DensityMatrix2 {
    pub fn new(m: CMatrix2) -> Result<Self> {
        let residual = hermiticity_residual(&m);
        if residual > HERMITIAN_TOL {
            return Err(Error::NonHermitianInput { residual });
        }
        let trace = m.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::NonUnitTrace { trace: trace.re });
        }
        Ok(Self(m))
    }

    pub(crate) fn new_unchecked(m: CMatrix2) -> Self {
        Self(m)
    }

    pub fn maximally_mixed() -> Self {
        Self(CMatrix2::identity() * c(0.5, 0.0))
    }

    pub fn matrix(&self) -> &CMatrix2 {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix2 {
        self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    pub fn hermiticity_residual(&self) -> f64 {
        hermiticity_residual(&self.0)
    }

    /// Smaller eigenvalue, `(tr - sqrt((r11-r22)^2 + 4|r12|^2)) / 2` on the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let a = self.0[(0, 0)].re;
        let d = self.0[(1, 1)].re;
        let b = 0.5 * (self.0[(0, 1)] + self.0[(1, 0)].conj());
        0.5 * (a + d - ((a - d).powi(2) + 4.0 * b.norm_sqr()).sqrt())
    }

    pub fn is_positive(&self) -> bool {
        self.min_eigenvalue() >= -POSITIVITY_TOL
    }
}

/// Pure flavor state at t = 0, written in the frame where
/// `|nu_e> = (cos theta, e^{i phi} sin theta)`.
pub fn initial_density(flavor: Flavor, params: &OscillationParams) -> DensityMatrix2 {
    let (s, co) = params.theta_vac.sin_cos();
    let half_s2 = 0.5 * (2.0 * params.theta_vac).sin();
    let e_minus = C64::from_polar(half_s2, -params.phi_cp);
    let m = match flavor {
        Flavor::Electron => CMatrix2::new(c(co * co, 0.0), e_minus, e_minus.conj(), c(s * s, 0.0)),
        Flavor::Muon => CMatrix2::new(c(s * s, 0.0), -e_minus, -e_minus.conj(), c(co * co, 0.0)),
    };
    DensityMatrix2(m)
}

/// Bloch vector of the initial flavor state.
pub fn initial_bloch(flavor: Flavor, params: &OscillationParams) -> BlochVector {
    let (s2, c2) = (2.0 * params.theta_vac).sin_cos();
    let (sp, cp) = params.phi_cp.sin_cos();
    let n = BlochVector::new(s2 * cp, s2 * sp, c2);
    match flavor {
        Flavor::Electron => n,
        Flavor::Muon => -n,
    }
}

pub fn bloch_from_density(rho: &DensityMatrix2) -> Result<BlochVector> {
    let [u, v, w] = bloch_components(&rho.0)?;
    Ok(BlochVector::new(u, v, w))
}

/// `rho = (1 + n.sigma) / 2`. Vectors slightly outside the ball (up to
/// `SPHERE_REJECT_TOL`) are accepted.
pub fn density_from_bloch(n: &BlochVector) -> Result<DensityMatrix2> {
    let norm = n.norm();
    if !norm.is_finite() || norm > 1.0 + SPHERE_REJECT_TOL {
        return Err(Error::VectorOutsideSphere { norm });
    }
    Ok(DensityMatrix2(density_matrix_unchecked(n)))
}

pub(crate) fn density_matrix_unchecked(n: &BlochVector) -> CMatrix2 {
    CMatrix2::new(
        c(0.5 * (1.0 + n.w), 0.0),
        c(0.5 * n.u, -0.5 * n.v),
        c(0.5 * n.u, 0.5 * n.v),
        c(0.5 * (1.0 - n.w), 0.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{make_params, DecaySpec};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn params(theta: f64, phi: f64) -> OscillationParams {
        make_params(1e7, 8e-5, theta, phi, 1.0, &DecaySpec::none()).unwrap()
    }

    #[test]
    fn maximal_mixing_initial_state() {
        let rho = initial_density(Flavor::Electron, &params(FRAC_PI_4, 0.0));
        for z in rho.matrix().iter() {
            assert!((z - c(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn cp_phase_enters_off_diagonal() {
        let rho = initial_density(Flavor::Electron, &params(0.188 * PI, FRAC_PI_2));
        let expected = c(0.0, -0.5 * (0.376 * PI).sin());
        assert!((rho.matrix()[(0, 1)] - expected).norm() < 1e-15);
    }

    #[test]
    fn initial_states_are_pure_and_antipodal() {
        for &(th, ph) in &[(0.1, 0.0), (0.188 * PI, 1.3), (1.4, 5.9)] {
            let p = params(th, ph);
            let e = initial_density(Flavor::Electron, &p);
            let mu = initial_density(Flavor::Muon, &p);
            for rho in [e, mu] {
                assert!((rho.trace() - c(1.0, 0.0)).norm() < 1e-12);
                assert!((rho.purity() - 1.0).abs() < 1e-12);
            }
            let ne = bloch_from_density(&e).unwrap();
            let nmu = bloch_from_density(&mu).unwrap();
            assert!(ne.max_abs_diff(&initial_bloch(Flavor::Electron, &p)) < 1e-15);
            assert!(nmu.max_abs_diff(&-ne) < 1e-15);
            let (s2, c2) = (2.0 * th).sin_cos();
            assert!(ne.max_abs_diff(&BlochVector::new(s2 * ph.cos(), s2 * ph.sin(), c2)) < 1e-15);
        }
    }

    #[test]
    fn simple_conversions() {
        let n = bloch_from_density(&DensityMatrix2::maximally_mixed()).unwrap();
        assert_eq!(n, BlochVector::ZERO);
        let up = density_from_bloch(&BlochVector::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(up.matrix()[(0, 0)], c(1.0, 0.0));
        assert_eq!(up.matrix()[(1, 1)], c(0.0, 0.0));
        assert_eq!(density_from_bloch(&BlochVector::ZERO).unwrap(), DensityMatrix2::maximally_mixed());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(density_from_bloch(&BlochVector::new(0.0, 0.0, 1.1)), Err(Error::VectorOutsideSphere { .. })));
        assert!(density_from_bloch(&BlochVector::new(0.0, 0.0, 1.0 + 1e-9)).is_ok());
        let m = CMatrix2::new(c(0.5, 0.0), c(0.1, 0.0), c(0.2, 0.0), c(0.5, 0.0));
        assert!(matches!(DensityMatrix2::new(m), Err(Error::NonHermitianInput { .. })));
        assert!(matches!(bloch_components(&m), Err(Error::NonHermitianInput { .. })));
        let m = CMatrix2::new(c(0.6, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0));
        assert!(matches!(DensityMatrix2::new(m), Err(Error::NonUnitTrace { .. })));
    }

    #[test]
    fn positivity_diagnostic() {
        let rho = density_from_bloch(&BlochVector::new(0.6, 0.0, 0.8)).unwrap();
        assert!(rho.min_eigenvalue().abs() < 1e-15);
        let outside = DensityMatrix2::new_unchecked(density_matrix_unchecked(&BlochVector::new(0.0, 0.0, 1.2)));
        assert!(!outside.is_positive());
    }

    proptest! {
        #[test]
        fn bloch_round_trip(x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64, s in 0.0..1.0f64) {
            let raw = BlochVector::new(x, y, z);
            let norm = raw.norm().max(1e-300);
            let k = s / norm.max(1.0);
            let n = BlochVector::new(x * k, y * k, z * k);
            let back = bloch_from_density(&density_from_bloch(&n).unwrap()).unwrap();
            prop_assert!(back.max_abs_diff(&n) < 1e-14);
        }
    }
}
