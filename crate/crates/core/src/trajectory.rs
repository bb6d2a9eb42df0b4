//! Sampled Bloch trajectories and the spectral propagator with its
//! integration fallback.

use log::{info, warn};

use crate::error::{Error, Result};
use crate::generator::BlochGenerator;
use crate::geometry::{to_sphere, SpherePoint};
use crate::ode::{integrate_bloch, StepControl};
use crate::spectral::{spectral_solve, SpectralSolution, SpectralSource};
use crate::state::BlochVector;

/// Time nodes (eV^-1) with the Bloch vector and its unwrapped sphere point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<BlochVector>,
    points: Vec<SpherePoint>,
}

impl Trajectory {
    pub fn from_states(times: Vec<f64>, states: Vec<BlochVector>) -> Self {
        assert_eq!(times.len(), states.len(), "times and states differ in length");
        let mut points: Vec<SpherePoint> = Vec::with_capacity(states.len());
        for n in &states {
            let p = to_sphere(n, points.last());
            points.push(p);
        }
        Self { times, states, points }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[BlochVector] {
        &self.states
    }

    pub fn points(&self) -> &[SpherePoint] {
        &self.points
    }

    /// Largest componentwise difference to another trajectory on the same grid.
    pub fn max_deviation(&self, other: &Trajectory) -> f64 {
        self.states.iter().zip(&other.states).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max)
    }
}

/// `nodes` evenly spaced times on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, nodes: usize) -> Result<Vec<f64>> {
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(Error::InvalidGrid(format!("t_max must be finite and non-negative, got {t_max}")));
    }
    match nodes {
        0 => Err(Error::InvalidGrid("at least one node is required".into())),
        1 => Ok(vec![0.0]),
        _ if t_max == 0.0 => Err(Error::InvalidGrid("several nodes need t_max > 0".into())),
        _ => Ok((0..nodes).map(|k| t_max * k as f64 / (nodes - 1) as f64).collect()),
    }
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty time grid".into()));
    }
    if grid[0] != 0.0 {
        return Err(Error::InvalidGrid(format!("grid must start at 0, starts at {}", grid[0])));
    }
    if let Some(k) = grid.windows(2).position(|w| !(w[1] >= w[0]) || !w[1].is_finite()) {
        return Err(Error::InvalidGrid(format!("grid is not ascending at node {}", k + 1)));
    }
    Ok(())
}

/// Which route produced a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Spectral(SpectralSource),
    /// Direct integration after the spectral route was refused.
    Rk4Fallback { reason: String },
}

impl Provenance {
    pub fn label(&self) -> String {
        match self {
            Provenance::Spectral(s) => format!("analytic/{}", s.name()),
            Provenance::Rk4Fallback { reason } => format!("rk4-fallback ({reason})"),
        }
    }
}

/// Spectral solution when the generator allows one, RK4 otherwise.
#[derive(Debug, Clone)]
pub struct Propagator {
    gen: BlochGenerator,
    n0: BlochVector,
    spectral: Option<SpectralSolution>,
    provenance: Provenance,
}

impl Propagator {
    pub fn new(gen: &BlochGenerator, n0: &BlochVector) -> Self {
        let (spectral, provenance) = match spectral_solve(gen, n0) {
            Ok(sol) if !sol.degenerate => (Some(sol), Provenance::Spectral(SpectralSource::NumericEigen)),
            Ok(_) => {
                info!("degenerate spectrum; integrating directly");
                (None, Provenance::Rk4Fallback { reason: "degenerate spectrum".into() })
            }
            Err(e) => {
                warn!("spectral route failed ({e}); integrating directly");
                (None, Provenance::Rk4Fallback { reason: e.to_string() })
            }
        };
        Self { gen: *gen, n0: *n0, spectral, provenance }
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn spectral(&self) -> Option<&SpectralSolution> {
        self.spectral.as_ref()
    }

    pub fn generator(&self) -> &BlochGenerator {
        &self.gen
    }

    pub fn trajectory(&self, grid: &[f64]) -> Result<Trajectory> {
        validate_grid(grid)?;
        match &self.spectral {
            Some(sol) => Ok(Trajectory::from_states(grid.to_vec(), grid.iter().map(|&t| sol.evaluate(t)).collect())),
            None => integrate_bloch(&self.gen, &self.n0, grid, StepControl::default()),
        }
    }
}

/// Convenience wrapper: trajectory on `grid` plus the route used.
pub fn propagate(gen: &BlochGenerator, n0: &BlochVector, grid: &[f64]) -> Result<(Trajectory, Provenance)> {
    let prop = Propagator::new(gen, n0);
    let traj = prop.trajectory(grid)?;
    Ok((traj, prop.provenance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::GeneratorMode;
    use nalgebra::Matrix3;

    #[test]
    fn grids() {
        assert_eq!(uniform_grid(0.0, 1).unwrap(), vec![0.0]);
        assert_eq!(uniform_grid(2.0, 3).unwrap(), vec![0.0, 1.0, 2.0]);
        assert!(uniform_grid(1.0, 0).is_err());
        assert!(uniform_grid(-1.0, 5).is_err());
        assert!(validate_grid(&[0.0, 2.0, 1.0]).is_err());
        assert!(validate_grid(&[1.0, 2.0]).is_err());
        assert!(validate_grid(&[0.0, 0.0, 1.0]).is_ok());
    }

    #[test]
    fn degenerate_generator_falls_back() {
        let gen = BlochGenerator::from_matrix(Matrix3::from_diagonal_element(-1e-12), GeneratorMode::DerivedFromH);
        let n0 = BlochVector::new(0.0, 0.6, 0.8);
        let (traj, prov) = propagate(&gen, &n0, &uniform_grid(1e12, 11).unwrap()).unwrap();
        assert!(matches!(prov, Provenance::Rk4Fallback { .. }));
        let last = traj.states()[10];
        assert!((last.norm() - (-1.0f64).exp()).abs() < 1e-9);
    }
}
