//! Mixed-state phases along a trajectory: total phase, the two dynamic
//! phases, their Pancharatnam sum, and the density-matrix product formula.

use std::f64::consts::PI;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::geometry::{eigenvectors, SpherePoint};
use crate::state::{density_matrix_unchecked, CMatrix2, C64};
use crate::trajectory::Trajectory;

/// Largest azimuth step tolerated by the trapezoidal integrals (rad).
pub const MAX_BETA_STEP: f64 = 0.1;
const ZERO_OVERLAP: f64 = 1e-12;
const VANISHING_TRACE: f64 = 1e-300;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseReport {
    pub gamma_t: f64,
    pub gamma_d1: f64,
    pub gamma_d2: f64,
    pub gamma_d: f64,
    pub gamma_p: f64,
    pub gamma_p_product: Option<f64>,
    pub product_n: Option<usize>,
}

impl PhaseReport {
    pub fn with_product(mut self, product: &ProductPhase) -> Self {
        self.gamma_p_product = Some(product.phase);
        self.product_n = Some(product.n);
        self
    }
}

fn check_len(traj: &Trajectory) -> Result<()> {
    if traj.len() < 2 {
        return Err(Error::TooFewNodes { needed: 2, got: traj.len() });
    }
    Ok(())
}

fn branch_overlap(a: &SpherePoint, b: &SpherePoint) -> C64 {
    let (ea, ma) = eigenvectors(a.alpha, a.beta);
    let (eb, mb) = eigenvectors(b.alpha, b.beta);
    let we = (a.lambda_e() * b.lambda_e()).max(0.0).sqrt();
    let wm = (a.lambda_mu() * b.lambda_mu()).max(0.0).sqrt();
    inner(&ea, &eb) * we + inner(&ma, &mb) * wm
}

fn inner(a: &Vector2<C64>, b: &Vector2<C64>) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

fn arg(z: C64) -> f64 {
    let a = z.im.atan2(z.re);
    if a == -PI {
        PI
    } else {
        a
    }
}

/// `arg sum_i sqrt(lambda_i(0) lambda_i(t)) <nu_i(0)|nu_i(t)>` between the
/// endpoints. With a pure initial state only the `nu_e` branch contributes.
pub fn total_phase(traj: &Trajectory) -> Result<f64> {
    check_len(traj)?;
    let pts = traj.points();
    let z = branch_overlap(&pts[0], &pts[pts.len() - 1]);
    if z.norm() < ZERO_OVERLAP {
        return Err(Error::ZeroOverlap { magnitude: z.norm() });
    }
    Ok(arg(z))
}

/// Trapezoidal `(gamma_d1, gamma_d2)` over the unwrapped azimuth.
pub fn dynamic_phases(traj: &Trajectory) -> Result<(f64, f64)> {
    check_len(traj)?;
    let weights = |p: &SpherePoint| {
        let (s, c) = (0.5 * p.alpha).sin_cos();
        ((1.0 + p.r) * s * s, (1.0 - p.r) * c * c)
    };
    let (mut d1, mut d2) = (0.0, 0.0);
    for (k, w) in traj.points().windows(2).enumerate() {
        if !(w[0].valid_beta && w[1].valid_beta) {
            continue;
        }
        let db = w[1].beta - w[0].beta;
        if db.abs() >= MAX_BETA_STEP {
            return Err(Error::SparseTrajectory { index: k, delta_beta: db });
        }
        let (a1, a2) = weights(&w[0]);
        let (b1, b2) = weights(&w[1]);
        d1 -= 0.25 * (a1 + b1) * db;
        d2 -= 0.25 * (a2 + b2) * db;
    }
    Ok((d1, d2))
}

pub fn pancharatnam(traj: &Trajectory) -> Result<PhaseReport> {
    let gamma_t = total_phase(traj)?;
    let (gamma_d1, gamma_d2) = dynamic_phases(traj)?;
    Ok(PhaseReport {
        gamma_t,
        gamma_d1,
        gamma_d2,
        gamma_d: gamma_d1 + gamma_d2,
        gamma_p: gamma_t + gamma_d1 + gamma_d2,
        gamma_p_product: None,
        product_n: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductPhase {
    pub phase: f64,
    /// Number of subdivisions; the chain holds `n + 1` matrices.
    pub n: usize,
    /// `log10 |tr|` of the unnormalized product.
    pub log10_abs_trace: f64,
}

/// `-arg tr(rho_0 rho_1 ... rho_N)` over the trajectory nodes. The running
/// product is rescaled by positive factors, which leaves the argument intact.
pub fn pancharatnam_product(traj: &Trajectory, closed_chain: bool) -> Result<ProductPhase> {
    if traj.len() < 3 {
        return Err(Error::TooFewNodes { needed: 3, got: traj.len() });
    }
    let rhos: Vec<CMatrix2> = traj.states().iter().map(density_matrix_unchecked).collect();
    let mut prod = rhos[0];
    let mut log10 = 0.0;
    let rescale = |m: CMatrix2, log10: &mut f64| {
        let s = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if s > 0.0 {
            *log10 += s.log10();
            m / C64::new(s, 0.0)
        } else {
            m
        }
    };
    for rho in &rhos[1..] {
        prod = rescale(prod * rho, &mut log10);
    }
    if closed_chain {
        prod = rescale(prod * rhos[0], &mut log10);
    }
    let tr = prod.trace();
    if tr.norm() < VANISHING_TRACE {
        return Err(Error::VanishingTrace { magnitude: tr.norm() });
    }
    Ok(ProductPhase { phase: -arg(tr), n: traj.len() - 1, log10_abs_trace: log10 + tr.norm().log10() })
}

/// Pancharatnam phase from explicit eigenframes multiplied by `e^{i chi}`:
/// endpoint overlap plus the discrete connection `arg <nu_k|nu_k+1>`
/// weighted by the mean branch populations.
pub fn frame_phase(traj: &Trajectory, chi: &[f64]) -> Result<f64> {
    check_len(traj)?;
    if chi.len() != traj.len() {
        return Err(Error::InvalidGrid(format!("{} gauge values for {} nodes", chi.len(), traj.len())));
    }
    let frames: Vec<(Vector2<C64>, Vector2<C64>)> = traj
        .points()
        .iter()
        .zip(chi)
        .map(|(p, &x)| {
            let (e, m) = eigenvectors(p.alpha, p.beta);
            let g = C64::from_polar(1.0, x);
            (e * g, m * g)
        })
        .collect();
    let pts = traj.points();
    let last = pts.len() - 1;
    let z = inner(&frames[0].0, &frames[last].0) * (pts[0].lambda_e() * pts[last].lambda_e()).max(0.0).sqrt()
        + inner(&frames[0].1, &frames[last].1) * (pts[0].lambda_mu() * pts[last].lambda_mu()).max(0.0).sqrt();
    if z.norm() < ZERO_OVERLAP {
        return Err(Error::ZeroOverlap { magnitude: z.norm() });
    }
    let mut dynamic = 0.0;
    for k in 0..last {
        let le = 0.5 * (pts[k].lambda_e() + pts[k + 1].lambda_e());
        let lm = 0.5 * (pts[k].lambda_mu() + pts[k + 1].lambda_mu());
        dynamic -= le * arg(inner(&frames[k].0, &frames[k + 1].0)) + lm * arg(inner(&frames[k].1, &frames[k + 1].1));
    }
    Ok(arg(z) + dynamic)
}

/// `|gamma_P(chi) - gamma_P(0)|` (mod 2 pi) along the frame route.
pub fn gauge_check(traj: &Trajectory, chi: &[f64]) -> Result<f64> {
    let reference = frame_phase(traj, &vec![0.0; traj.len()])?;
    let gauged = frame_phase(traj, chi)?;
    Ok(wrap_phase(gauged - reference).abs())
}
