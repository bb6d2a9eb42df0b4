//! Runge-Kutta integration of the Bloch equation and of the master equation.

use log::debug;
use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::generator::{build_generator, master_rhs_matrix, BlochGenerator, GeneratorMode};
use crate::params::OscillationParams;
use crate::state::{hermiticity_residual, BlochVector, CMatrix2, DensityMatrix2, C64};
use crate::trajectory::{validate_grid, Trajectory};

/// Hard cap on the RK4 step (eV^-1).
pub const MAX_STEP: f64 = 1e9;
/// Adaptive steps below this (eV^-1) abort the integration.
pub const MIN_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepControl {
    /// Classic RK4; the step is `min(max_step, 1 / (50 |M|_F))`.
    Fixed { max_step: f64 },
    /// Dormand-Prince 5(4) with a mixed error tolerance.
    Adaptive { rtol: f64, atol: f64 },
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl::Fixed { max_step: MAX_STEP }
    }
}

/// RK4 step bound for a generator of Frobenius norm `norm` (eV).
pub fn rk4_step(norm: f64, max_step: f64) -> f64 {
    if norm > 0.0 {
        max_step.min(1.0 / (50.0 * norm))
    } else {
        max_step
    }
}

trait OdeState: Copy {
    fn axpy(&self, k: f64, x: &Self) -> Self;
    fn max_abs(&self) -> f64;
}

impl OdeState for Vector3<f64> {
    fn axpy(&self, k: f64, x: &Self) -> Self {
        self + x * k
    }

    fn max_abs(&self) -> f64 {
        self.abs().max()
    }
}

impl OdeState for CMatrix2 {
    fn axpy(&self, k: f64, x: &Self) -> Self {
        self + x * C64::new(k, 0.0)
    }

    fn max_abs(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn rk4<S: OdeState>(f: &impl Fn(&S) -> S, y: &S, h: f64) -> S {
    let k1 = f(y);
    let k2 = f(&y.axpy(0.5 * h, &k1));
    let k3 = f(&y.axpy(0.5 * h, &k2));
    let k4 = f(&y.axpy(h, &k3));
    y.axpy(h / 6.0, &k1).axpy(h / 3.0, &k2).axpy(h / 3.0, &k3).axpy(h / 6.0, &k4)
}

const DP_A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus the embedded fourth-order ones
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One Dormand-Prince step: new state and error estimate.
fn dopri<S: OdeState>(f: &impl Fn(&S) -> S, y: &S, h: f64) -> (S, S) {
    let mut k: Vec<S> = Vec::with_capacity(7);
    k.push(f(y));
    for row in DP_A.iter() {
        let mut stage = *y;
        for (j, a) in row.iter().enumerate() {
            if *a != 0.0 {
                stage = stage.axpy(h * a, &k[j]);
            }
        }
        k.push(f(&stage));
    }
    // the last stage is evaluated at the fifth-order solution
    let mut y_new = *y;
    for (j, a) in DP_A[5].iter().enumerate() {
        if *a != 0.0 {
            y_new = y_new.axpy(h * a, &k[j]);
        }
    }
    let mut err = y.axpy(-1.0, y);
    for (j, e) in DP_E.iter().enumerate() {
        if *e != 0.0 {
            err = err.axpy(h * e, &k[j]);
        }
    }
    (y_new, err)
}

/// Integrates over one grid interval of length `dt` with equal substeps.
fn fixed_interval<S: OdeState>(f: &impl Fn(&S) -> S, y: S, dt: f64, h_max: f64, mut after: impl FnMut(S) -> S) -> S {
    if dt <= 0.0 {
        return y;
    }
    let steps = (dt / h_max).ceil().max(1.0) as usize;
    let h = dt / steps as f64;
    let mut y = y;
    for _ in 0..steps {
        y = after(rk4(f, &y, h));
    }
    y
}

fn adaptive_interval<S: OdeState>(
    f: &impl Fn(&S) -> S,
    y: S,
    t0: f64,
    dt: f64,
    h: &mut f64,
    rtol: f64,
    atol: f64,
    mut after: impl FnMut(S) -> S,
) -> Result<S> {
    let mut y = y;
    let mut t = 0.0;
    while t < dt {
        let step = h.min(dt - t);
        if step < MIN_STEP {
            return Err(Error::StepUnderflow { t: t0 + t, step });
        }
        let (y_new, err) = dopri(f, &y, step);
        let scale = atol + rtol * y.max_abs().max(y_new.max_abs());
        let ratio = err.max_abs() / scale;
        if !ratio.is_finite() {
            return Err(Error::StepUnderflow { t: t0 + t, step });
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        if ratio <= 1.0 {
            t = if step == dt - t { dt } else { t + step };
            y = after(y_new);
            // do not let a short landing step shrink the next one
            if step == *h || factor < 1.0 {
                *h = step * factor;
            }
        } else {
            *h = step * factor;
        }
    }
    Ok(y)
}

/// Integrates `dn/dt = M n` and records the state at every grid node.
pub fn integrate_bloch(gen: &BlochGenerator, n0: &BlochVector, grid: &[f64], control: StepControl) -> Result<Trajectory> {
    validate_grid(grid)?;
    let m = *gen.matrix();
    let f = |y: &Vector3<f64>| m * y;
    let mut y = n0.to_vector3();
    let mut states = Vec::with_capacity(grid.len());
    states.push(*n0);
    let mut h = rk4_step(gen.norm(), MAX_STEP);
    for w in grid.windows(2) {
        let dt = w[1] - w[0];
        y = match control {
            StepControl::Fixed { max_step } => fixed_interval(&f, y, dt, rk4_step(gen.norm(), max_step), |s| s),
            StepControl::Adaptive { rtol, atol } => adaptive_interval(&f, y, w[0], dt, &mut h, rtol, atol, |s| s)?,
        };
        states.push(BlochVector::from_vector3(&y));
    }
    Ok(Trajectory::from_states(grid.to_vec(), states))
}

/// Fixed-step RK4 with exactly `steps` steps to `t_end`.
pub fn rk4_endpoint(gen: &BlochGenerator, n0: &BlochVector, t_end: f64, steps: usize) -> BlochVector {
    let m = *gen.matrix();
    let f = |y: &Vector3<f64>| m * y;
    let h = t_end / steps as f64;
    let mut y = n0.to_vector3();
    for _ in 0..steps {
        y = rk4(&f, &y, h);
    }
    BlochVector::from_vector3(&y)
}

/// Density matrices at the grid nodes plus integration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix2>,
    /// Largest anti-Hermitian part removed by the per-step projection.
    pub max_hermiticity_drift: f64,
}

impl DensityTrajectory {
    pub fn max_trace_deviation(&self) -> f64 {
        self.states.iter().map(|r| (r.trace() - C64::new(1.0, 0.0)).norm()).fold(0.0, f64::max)
    }
}

/// Integrates the master equation directly on 2x2 matrices, projecting onto
/// Hermitian matrices after each step.
pub fn integrate_master(
    params: &OscillationParams,
    rho0: &DensityMatrix2,
    grid: &[f64],
    mode: GeneratorMode,
    control: StepControl,
) -> Result<DensityTrajectory> {
    validate_grid(grid)?;
    let norm = build_generator(params, mode).norm();
    let f = |y: &CMatrix2| master_rhs_matrix(params, y, mode);
    let mut drift = 0.0f64;
    let mut project = |y: CMatrix2| {
        drift = drift.max(hermiticity_residual(&y));
        (y + y.adjoint()) * C64::new(0.5, 0.0)
    };
    let mut y = *rho0.matrix();
    let mut states = Vec::with_capacity(grid.len());
    states.push(rho0.clone());
    let mut h = rk4_step(norm, MAX_STEP);
    for w in grid.windows(2) {
        let dt = w[1] - w[0];
        y = match control {
            StepControl::Fixed { max_step } => fixed_interval(&f, y, dt, rk4_step(norm, max_step), &mut project),
            StepControl::Adaptive { rtol, atol } => adaptive_interval(&f, y, w[0], dt, &mut h, rtol, atol, &mut project)?,
        };
        states.push(DensityMatrix2::new_unchecked(y));
    }
    if drift > 0.0 {
        debug!("master integration: max Hermiticity drift {drift:e}");
    }
    Ok(DensityTrajectory { times: grid.to_vec(), states, max_hermiticity_drift: drift })
}
