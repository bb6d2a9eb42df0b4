//! Spherical coordinates of the Bloch vector, instantaneous eigenstates of
//! the density matrix and the survival probability read off the sphere.

use std::f64::consts::TAU;

use nalgebra::Vector2;

use crate::params::OscillationParams;
use crate::state::{BlochVector, CMatrix2, C64};

const DEGENERATE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    pub r: f64,
    pub alpha: f64,
    /// Unwrapped azimuth; not reduced mod 2 pi.
    pub beta: f64,
    pub valid_beta: bool,
}

impl SpherePoint {
    /// Weight `(1 + r) / 2` of the `nu_e` branch.
    pub fn lambda_e(&self) -> f64 {
        0.5 * (1.0 + self.r)
    }

    pub fn lambda_mu(&self) -> f64 {
        0.5 * (1.0 - self.r)
    }

    pub fn to_bloch(&self) -> BlochVector {
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        BlochVector::new(self.r * sa * cb, self.r * sa * sb, self.r * ca)
    }
}

/// Converts `n` to `(r, alpha, beta)`, unwrapping `beta` against `prev`.
///
/// At the center or on the poles the azimuth is undefined; the previous
/// values are carried and `valid_beta` is cleared.
pub fn to_sphere(n: &BlochVector, prev: Option<&SpherePoint>) -> SpherePoint {
    let r = n.norm();
    let (prev_alpha, prev_beta) = prev.map_or((0.0, 0.0), |p| (p.alpha, p.beta));
    if r < DEGENERATE {
        return SpherePoint { r, alpha: prev_alpha, beta: prev_beta, valid_beta: false };
    }
    let alpha = (n.w / r).clamp(-1.0, 1.0).acos();
    let rho = n.u.hypot(n.v);
    if rho / r < DEGENERATE {
        return SpherePoint { r, alpha, beta: prev_beta, valid_beta: false };
    }
    let raw = n.v.atan2(n.u);
    let beta = match prev {
        Some(p) => raw + TAU * ((p.beta - raw) / TAU).round(),
        None => raw,
    };
    SpherePoint { r, alpha, beta, valid_beta: true }
}

/// Spectral decomposition `rho = lambda_e |nu_e><nu_e| + lambda_mu |nu_mu><nu_mu|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenDecomposition {
    pub lambda_e: f64,
    pub lambda_mu: f64,
    pub nu_e: Vector2<C64>,
    pub nu_mu: Vector2<C64>,
    /// Set at the center of the ball, where the basis is not unique and the
    /// carried angles fix it.
    pub degenerate: bool,
}

impl EigenDecomposition {
    pub fn density(&self) -> CMatrix2 {
        self.nu_e * self.nu_e.adjoint() * C64::new(self.lambda_e, 0.0)
            + self.nu_mu * self.nu_mu.adjoint() * C64::new(self.lambda_mu, 0.0)
    }
}

/// `nu_e = (cos a/2, e^{i b} sin a/2)`, `nu_mu = (sin a/2, -e^{i b} cos a/2)`.
pub fn eigenvectors(alpha: f64, beta: f64) -> (Vector2<C64>, Vector2<C64>) {
    let (s, c) = (0.5 * alpha).sin_cos();
    let phase = C64::from_polar(1.0, beta);
    (
        Vector2::new(C64::new(c, 0.0), phase * s),
        Vector2::new(C64::new(s, 0.0), -phase * c),
    )
}

pub fn eigen_decomposition(point: &SpherePoint) -> EigenDecomposition {
    let (nu_e, nu_mu) = eigenvectors(point.alpha, point.beta);
    EigenDecomposition {
        lambda_e: point.lambda_e(),
        lambda_mu: point.lambda_mu(),
        nu_e,
        nu_mu,
        degenerate: point.r < DEGENERATE,
    }
}

/// Survival probability of the initial `nu_e`: `tr(rho(t) rho_e(0))` in
/// spherical form.
pub fn transition_probability(n: &BlochVector, params: &OscillationParams) -> f64 {
    let p = to_sphere(n, None);
    let (s2, c2) = params.sin_cos_2theta();
    let val = 0.5 + 0.5 * p.r * (c2 * p.alpha.cos() + s2 * p.alpha.sin() * (p.beta - params.phi_cp).cos());
    val.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{build_generator, GeneratorMode};
    use crate::hamiltonian::closed_form_probabilities;
    use crate::params::{make_params, DecaySpec};
    use crate::spectral::spectral_solve;
    use crate::state::{density_from_bloch, initial_bloch, initial_density, Flavor};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn params(phi: f64) -> OscillationParams {
        make_params(1e7, 8e-5, 0.188 * PI, phi, 1.0, &DecaySpec::none()).unwrap()
    }

    #[test]
    fn initial_state_angles() {
        let p = params(0.9);
        let s = to_sphere(&initial_bloch(Flavor::Electron, &p), None);
        assert!((s.r - 1.0).abs() < 1e-15);
        assert!((s.alpha - 2.0 * p.theta_vac).abs() < 1e-14);
        assert!((s.beta - 0.9).abs() < 1e-14);
        assert!(s.valid_beta);
    }

    #[test]
    fn pole_carries_previous_azimuth() {
        let prev = SpherePoint { r: 0.7, alpha: 0.2, beta: 7.5, valid_beta: true };
        let s = to_sphere(&BlochVector::new(0.0, 0.0, 0.5), Some(&prev));
        assert_eq!((s.r, s.alpha, s.beta, s.valid_beta), (0.5, 0.0, 7.5, false));
        let s = to_sphere(&BlochVector::ZERO, Some(&prev));
        assert_eq!((s.alpha, s.beta, s.valid_beta), (0.2, 7.5, false));
    }

    #[test]
    fn spiral_unwraps_monotonically() {
        let mut prev: Option<SpherePoint> = None;
        for k in 0..2000 {
            let b = k as f64 * 0.01;
            let n = BlochVector::new(0.6 * b.cos(), 0.6 * b.sin(), 0.3);
            let s = to_sphere(&n, prev.as_ref());
            if let Some(p) = prev {
                assert!(s.beta > p.beta && s.beta - p.beta < 0.011);
            }
            assert!((s.beta - b).abs() < 1e-12);
            prev = Some(s);
        }
    }

    #[test]
    fn pure_initial_eigenvectors() {
        let p = params(1.3);
        let d = eigen_decomposition(&to_sphere(&initial_bloch(Flavor::Electron, &p), None));
        assert!((d.lambda_e - 1.0).abs() < 1e-15 && d.lambda_mu.abs() < 1e-15);
        let (s, c) = p.theta_vac.sin_cos();
        assert!((d.nu_e[0] - C64::new(c, 0.0)).norm() < 1e-14);
        assert!((d.nu_e[1] - C64::from_polar(s, 1.3)).norm() < 1e-14);
        let north = eigen_decomposition(&to_sphere(&BlochVector::new(0.0, 0.0, 1.0), None));
        assert!((north.nu_e[0] - C64::new(1.0, 0.0)).norm() < 1e-15 && north.nu_e[1].norm() < 1e-15);
    }

    #[test]
    fn simple_probabilities() {
        let p = params(0.4);
        assert!((transition_probability(&initial_bloch(Flavor::Electron, &p), &p) - 1.0).abs() < 1e-14);
        assert_eq!(transition_probability(&BlochVector::ZERO, &p), 0.5);
    }

    #[test]
    fn reduces_to_closed_form_without_decay() {
        for eta in [0.0, 0.5, 2.0] {
            let p = make_params(1e7, 8e-5, 0.188 * PI, 2.0, eta, &DecaySpec::none()).unwrap();
            let sol = spectral_solve(&build_generator(&p, GeneratorMode::DerivedFromH), &initial_bloch(Flavor::Electron, &p)).unwrap();
            for k in 0..200 {
                let t = k as f64 * 2e10;
                let (p_ee, _) = closed_form_probabilities(&p, t);
                assert!((transition_probability(&sol.evaluate(t), &p) - p_ee).abs() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn interior_points(u in -0.57f64..0.57, v in -0.57f64..0.57, w in -0.57f64..0.57, phi in 0.0..2.0 * PI) {
            let n = BlochVector::new(u, v, w);
            let s = to_sphere(&n, None);
            prop_assume!(s.valid_beta);
            prop_assert!(s.to_bloch().max_abs_diff(&n) < 1e-12);
            prop_assert_eq!(s.lambda_e() + s.lambda_mu(), 1.0);
            let d = eigen_decomposition(&s);
            let overlap = (d.nu_e.adjoint() * d.nu_mu)[0].norm();
            prop_assert!(overlap < 1e-12 && (d.nu_e.norm() - 1.0).abs() < 1e-12);
            let rho = density_from_bloch(&n).unwrap();
            prop_assert!((d.density() - rho.matrix()).iter().all(|z| z.norm() < 1e-12));
            let p = params(phi);
            let direct = (rho.matrix() * initial_density(Flavor::Electron, &p).matrix()).trace().re;
            prop_assert!((transition_probability(&n, &p) - direct).abs() < 1e-12);
        }
    }
}
