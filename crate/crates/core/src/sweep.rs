//! Commands producing datasets: trajectory dumps, phase reports, NMR
//! records and the five parameter sweeps over the CP phase.

use std::f64::consts::PI;

use log::warn;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::dataset::{format_float, Dataset};
use crate::error::{Error, Result};
use crate::generator::{build_generator, BlochGenerator, GeneratorMode};
use crate::geometry::transition_probability;
use crate::hamiltonian::closed_form_probabilities;
use crate::nmr::{from_nmr, to_nmr};
use crate::ode::{integrate_bloch, StepControl};
use crate::params::{make_params, DecaySpec, OscillationParams};
use crate::phases::{pancharatnam, pancharatnam_product, wrap_phase, PhaseReport, ProductPhase};
use crate::state::{initial_bloch, BlochVector, Flavor};
use crate::trajectory::{uniform_grid, Propagator, Provenance, Trajectory};

pub const PHI_POINTS: usize = 256;
/// Evolution times (eV^-1) of the time-resolved sweeps.
pub const SWEEP_TIMES: [f64; 4] = [0.5e12, 1.0e12, 1.5e12, 2.0e12];
pub const SWEEP_ETAS: [f64; 3] = [0.5, 1.0, 2.0];
/// Time of the potential sweeps (eV^-1).
pub const ETA_SWEEP_TIME: f64 = 1.9e12;
/// Time of the phase-decomposition sweep (eV^-1).
pub const DECOMPOSITION_TIME: f64 = 2.0e12;
/// Initial node count of the phase trajectories.
pub const PHASE_NODES: usize = 4001;
pub const MAX_REFINEMENTS: usize = 6;
/// Subdivision counts of the product-formula convergence table.
pub const PRODUCT_NS: [usize; 4] = [100, 1_000, 10_000, 100_000];

const ENERGY: f64 = 1e7;
const DM2: f64 = 8e-5;

pub fn sweep_theta() -> f64 {
    0.188 * PI
}

/// `phi_k = 2 pi k / 256`, `k = 0..255`.
pub fn phi_grid() -> Vec<f64> {
    (0..PHI_POINTS).map(|k| 2.0 * PI * k as f64 / PHI_POINTS as f64).collect()
}

/// Decay of the time-resolved sweeps: `c11 = 0.095 V0`, `c22 = c33 = 0.15 V0`, square-root rule.
pub fn time_sweep_params(phi: f64) -> Result<OscillationParams> {
    make_params(ENERGY, DM2, sweep_theta(), phi, 1.0, &DecaySpec::sqrt_times_v0([0.095, 0.15, 0.15]))
}

/// Decay of the potential sweeps: `c_ii = 0.1 V0`, square-root rule.
pub fn eta_sweep_params(phi: f64, eta: f64) -> Result<OscillationParams> {
    make_params(ENERGY, DM2, sweep_theta(), phi, eta, &DecaySpec::sqrt_times_v0([0.1, 0.1, 0.1]))
}

/// Phase report on `[0, t]`, doubling the node count while the azimuth
/// steps are too coarse. Returns the report, the trajectory used and its size.
pub fn phase_report(prop: &Propagator, t: f64, nodes: usize) -> Result<(PhaseReport, Trajectory)> {
    let mut nodes = nodes.max(2);
    let mut attempt = 0;
    loop {
        let grid = if t == 0.0 { vec![0.0; nodes] } else { uniform_grid(t, nodes)? };
        let traj = prop.trajectory(&grid)?;
        match pancharatnam(&traj) {
            Ok(rep) => return Ok((rep, traj)),
            Err(Error::SparseTrajectory { .. }) if attempt < MAX_REFINEMENTS => {
                attempt += 1;
                nodes = 2 * (nodes - 1) + 1;
            }
            Err(e) => return Err(e),
        }
    }
}

fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().expect("thread pool")
}

fn electron_propagator(p: &OscillationParams, mode: GeneratorMode) -> Propagator {
    Propagator::new(&build_generator(p, mode), &initial_bloch(Flavor::Electron, p))
}

fn time_label(t: f64) -> String {
    format!("{}e12", t / 1e12)
}

fn caption_meta(d: &mut Dataset, decay: &str, extra: &[(&str, String)]) {
    d.push_meta("energy_ev", format!("{ENERGY:?}"));
    d.push_meta("dm2_ev2", format!("{DM2:?}"));
    d.push_meta("theta_rad", format!("{:?}", sweep_theta()));
    d.push_meta("decay", decay);
    d.push_meta("phi_grid", format!("2*pi*k/{PHI_POINTS} for k=0..{}", PHI_POINTS - 1));
    for (k, v) in extra {
        d.push_meta(k, v);
    }
}

struct RowOutcome {
    row: Vec<f64>,
    failures: usize,
    fallbacks: usize,
}

fn radius_at(prop: &Propagator, t: f64) -> Result<f64> {
    let traj = prop.trajectory(&[0.0, t])?;
    Ok(traj.points()[1].r)
}

fn phase_columns(rep: Option<&PhaseReport>) -> [f64; 2] {
    match rep {
        Some(r) => [r.gamma_p, wrap_phase(r.gamma_p)],
        None => [f64::NAN; 2],
    }
}

/// Builds one of the five sweeps over the CP phase.
pub fn figure(n: u8, mode: GeneratorMode, workers: usize) -> Result<Dataset> {
    let phis = phi_grid();
    let (columns, decay, extra): (Vec<String>, &str, Vec<(&str, String)>) = match n {
        1 => (
            std::iter::once("phi".into()).chain(SWEEP_TIMES.iter().map(|t| format!("r_t{}", time_label(*t)))).collect(),
            "c11=0.095*V0, c22=c33=0.15*V0, c_ij=sqrt(c_ii*c_jj)",
            vec![("eta", "1".into()), ("times_ev_inv", SWEEP_TIMES.map(|t| format!("{t:e}")).join(";"))],
        ),
        2 => (
            std::iter::once("phi".into()).chain(SWEEP_ETAS.iter().map(|e| format!("r_eta{e}"))).collect(),
            "c11=c22=c33=0.1*V0, c_ij=sqrt(c_ii*c_jj)",
            vec![("time_ev_inv", format!("{ETA_SWEEP_TIME:e}")), ("etas", SWEEP_ETAS.map(|e| e.to_string()).join(";"))],
        ),
        3 => (
            std::iter::once("phi".into())
                .chain(SWEEP_TIMES.iter().flat_map(|t| [format!("gamma_p_t{}", time_label(*t)), format!("gamma_p_t{}_wrapped", time_label(*t))]))
                .collect(),
            "c11=0.095*V0, c22=c33=0.15*V0, c_ij=sqrt(c_ii*c_jj)",
            vec![("eta", "1".into()), ("times_ev_inv", SWEEP_TIMES.map(|t| format!("{t:e}")).join(";"))],
        ),
        4 => (
            [
                "phi", "gamma_t", "gamma_d1", "gamma_d2", "gamma_d", "gamma_p", "gamma_t_wrapped", "gamma_d1_wrapped",
                "gamma_d2_wrapped", "gamma_d_wrapped", "gamma_p_wrapped", "gamma_p_product", "product_n",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            "c11=0.095*V0, c22=c33=0.15*V0, c_ij=sqrt(c_ii*c_jj)",
            vec![("eta", "1".into()), ("time_ev_inv", format!("{DECOMPOSITION_TIME:e}"))],
        ),
        5 => (
            std::iter::once("phi".into())
                .chain(SWEEP_ETAS.iter().flat_map(|e| [format!("gamma_p_eta{e}"), format!("gamma_p_eta{e}_wrapped")]))
                .collect(),
            "c11=c22=c33=0.1*V0, c_ij=sqrt(c_ii*c_jj)",
            vec![("time_ev_inv", format!("{ETA_SWEEP_TIME:e}")), ("etas", SWEEP_ETAS.map(|e| e.to_string()).join(";"))],
        ),
        _ => return Err(Error::InvalidGrid(format!("figure number must be 1..5, got {n}"))),
    };

    let count = |prop: &Propagator| usize::from(matches!(prop.provenance(), Provenance::Rk4Fallback { .. }));
    let phase_or_nan = |prop: &Propagator, t: f64, failures: &mut usize| match phase_report(prop, t, PHASE_NODES) {
        Ok((rep, traj)) => Some((rep, traj)),
        Err(e) => {
            warn!("phase computation failed: {e}");
            *failures += 1;
            None
        }
    };

    let task = |phi: f64| -> Result<RowOutcome> {
        let mut row = vec![phi];
        let mut failures = 0;
        let mut fallbacks = 0;
        match n {
            1 => {
                let prop = electron_propagator(&time_sweep_params(phi)?, mode);
                fallbacks += count(&prop);
                for t in SWEEP_TIMES {
                    row.push(radius_at(&prop, t)?);
                }
            }
            2 => {
                for eta in SWEEP_ETAS {
                    let prop = electron_propagator(&eta_sweep_params(phi, eta)?, mode);
                    fallbacks += count(&prop);
                    row.push(radius_at(&prop, ETA_SWEEP_TIME)?);
                }
            }
            3 => {
                let prop = electron_propagator(&time_sweep_params(phi)?, mode);
                fallbacks += count(&prop);
                for t in SWEEP_TIMES {
                    let rep = phase_or_nan(&prop, t, &mut failures);
                    row.extend(phase_columns(rep.as_ref().map(|r| &r.0)));
                }
            }
            4 => {
                let prop = electron_propagator(&time_sweep_params(phi)?, mode);
                fallbacks += count(&prop);
                match phase_or_nan(&prop, DECOMPOSITION_TIME, &mut failures) {
                    Some((r, traj)) => {
                        let vals = [r.gamma_t, r.gamma_d1, r.gamma_d2, r.gamma_d, r.gamma_p];
                        row.extend(vals);
                        row.extend(vals.map(wrap_phase));
                        match pancharatnam_product(&traj, false) {
                            Ok(p) => row.extend([p.phase, p.n as f64]),
                            Err(_) => row.extend([f64::NAN, (traj.len() - 1) as f64]),
                        }
                    }
                    None => row.extend([f64::NAN; 12]),
                }
            }
            _ => {
                for eta in SWEEP_ETAS {
                    let prop = electron_propagator(&eta_sweep_params(phi, eta)?, mode);
                    fallbacks += count(&prop);
                    let rep = phase_or_nan(&prop, ETA_SWEEP_TIME, &mut failures);
                    row.extend(phase_columns(rep.as_ref().map(|r| &r.0)));
                }
            }
        }
        Ok(RowOutcome { row, failures, fallbacks })
    };

    let outcomes: Vec<Result<RowOutcome>> = pool(workers).install(|| phis.par_iter().map(|&phi| task(phi)).collect());
    let mut d = Dataset { columns, ..Dataset::default() };
    d.config = vec![("command".into(), "figure".into()), ("figure".into(), n.to_string()), ("mode".into(), mode.name().into())];
    caption_meta(&mut d, decay, &extra);
    d.push_meta("initial_state", "nu_e");
    let (mut failures, mut fallbacks) = (0, 0);
    for o in outcomes {
        let o = o?;
        failures += o.failures;
        fallbacks += o.fallbacks;
        d.push_row(o.row);
    }
    if matches!(n, 3..=5) {
        d.push_meta("phase_nodes", format!("{PHASE_NODES} (doubled up to {MAX_REFINEMENTS} times when the azimuth step reaches 0.1 rad)"));
        d.push_meta("phase_failures", failures);
    }
    if n == 4 {
        d.push_meta("product_chain", "open");
    }
    d.push_meta("rk4_fallbacks", fallbacks);
    Ok(d)
}

fn run_header(cfg: &RunConfig, command: &str, mode: GeneratorMode) -> Dataset {
    let mut d = Dataset::default();
    d.config.push(("command".into(), command.into()));
    d.config.extend(cfg.entries(mode));
    d
}

/// Trajectory of the initial `nu_e` state on `cfg.nodes` nodes over `[0, t_max]`.
pub fn evolve(cfg: &RunConfig) -> Result<Dataset> {
    let mode = cfg.mode_or(GeneratorMode::DerivedFromH);
    let p = cfg.params()?;
    let gen = build_generator(&p, mode);
    let n0 = initial_bloch(Flavor::Electron, &p);
    let grid = if cfg.t_max == 0.0 { vec![0.0] } else { uniform_grid(cfg.t_max, cfg.nodes)? };
    let prop = Propagator::new(&gen, &n0);
    let traj = prop.trajectory(&grid)?;
    let rk4 = integrate_bloch(&gen, &n0, &grid, StepControl::default())?;

    let mut d = run_header(cfg, "evolve", mode);
    d.columns = ["t", "u", "v", "w", "r", "alpha", "beta", "lambda_e", "lambda_mu", "P_survival_e", "P_ee_closed_form"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for ((t, n), s) in traj.times().iter().zip(traj.states()).zip(traj.points()) {
        let (p_ee, _) = closed_form_probabilities(&p, *t);
        d.push_row(vec![*t, n.u, n.v, n.w, s.r, s.alpha, s.beta, s.lambda_e(), s.lambda_mu(), transition_probability(n, &p), p_ee]);
    }
    d.push_meta("solver", prop.provenance().label());
    d.push_meta("cross_oracle", "fixed-step RK4");
    d.push_meta("cross_oracle_max_deviation", format_float(traj.max_deviation(&rk4)));
    d.push_meta("max_radius", format_float(traj.points().iter().map(|s| s.r).fold(0.0, f64::max)));
    d.push_meta("P_ee_closed_form", "dissipation-free reference");
    Ok(d)
}

/// Phase decomposition on `[0, t_max]` plus a product-formula convergence table.
pub fn phases(cfg: &RunConfig) -> Result<Dataset> {
    let mode = cfg.mode_or(GeneratorMode::DerivedFromH);
    let p = cfg.params()?;
    let prop = electron_propagator(&p, mode);
    let (rep, traj) = phase_report(&prop, cfg.t_max, cfg.nodes)?;

    let mut d = run_header(cfg, "phases", mode);
    d.columns = ["N", "gamma_p_product", "gamma_p_product_wrapped", "difference_wrapped", "log10_abs_trace"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut best: Option<ProductPhase> = None;
    for n in PRODUCT_NS {
        let grid = if cfg.t_max == 0.0 { vec![0.0; n + 1] } else { uniform_grid(cfg.t_max, n + 1)? };
        match pancharatnam_product(&prop.trajectory(&grid)?, cfg.closed_chain) {
            Ok(pp) => {
                d.push_row(vec![n as f64, pp.phase, wrap_phase(pp.phase), wrap_phase(pp.phase - rep.gamma_p), pp.log10_abs_trace]);
                best = Some(pp);
            }
            Err(e) => {
                warn!("product formula at N = {n}: {e}");
                d.push_row(vec![n as f64, f64::NAN, f64::NAN, f64::NAN, f64::NAN]);
            }
        }
    }
    let rep = match &best {
        Some(pp) => rep.with_product(pp),
        None => rep,
    };
    d.push_meta("solver", prop.provenance().label());
    d.push_meta("nodes_used", traj.len());
    for (k, v) in [("gamma_t", rep.gamma_t), ("gamma_d1", rep.gamma_d1), ("gamma_d2", rep.gamma_d2), ("gamma_d", rep.gamma_d), ("gamma_p", rep.gamma_p)] {
        d.push_meta(k, format_float(v));
        d.push_meta(&format!("{k}_wrapped"), format_float(wrap_phase(v)));
    }
    if let (Some(g), Some(n)) = (rep.gamma_p_product, rep.product_n) {
        d.push_meta("gamma_p_product", format_float(g));
        d.push_meta("product_n", n);
    }
    d.push_meta("product_chain", if cfg.closed_chain { "closed" } else { "open" });
    Ok(d)
}

/// NMR program for the configured parameters. A decay matrix that is not
/// rank one yields a record with its nearest rank-one factor and the error.
pub fn nmr(cfg: &RunConfig) -> Result<(Dataset, Option<Error>)> {
    let p = cfg.params()?;
    let mut d = run_header(cfg, "nmr", cfg.mode_or(GeneratorMode::DerivedFromH));
    d.columns = ["omega_ev", "theta_rad", "phi_rad", "m0_ev", "v0_ev", "d1", "d2", "d3"].iter().map(|s| s.to_string()).collect();
    d.push_meta("units", "omega, m0, V0 in eV; d_i in sqrt(eV) so that c_ij = d_i d_j is in eV");
    match to_nmr(&p) {
        Ok(prog) => {
            let back = from_nmr(&prog, p.energy_ev)?;
            let round_trip = (back.v0 - p.v0).abs().max((back.delta_m2 - p.delta_m2).abs() / p.delta_m2 * p.omega());
            d.push_row(vec![prog.omega, prog.theta, prog.phi, prog.m0, prog.v0(), prog.d[0], prog.d[1], prog.d[2]]);
            let flags = prog.range_flags();
            d.push_meta("realizable", true);
            d.push_meta("omega_in_quoted_range", flags.omega);
            d.push_meta("v0_in_quoted_range", flags.v0);
            d.push_meta("decay_in_quoted_range", flags.decay);
            d.push_meta("round_trip_deviation_ev", format_float(round_trip));
            Ok((d, None))
        }
        Err(e @ Error::NotRankOne { nearest, residual }) => {
            d.push_row(vec![p.omega(), p.theta_vac, p.phi_cp, 0.5 * p.v0, p.v0, nearest[0], nearest[1], nearest[2]]);
            d.push_meta("realizable", false);
            d.push_meta("d_columns", "nearest rank-one factor");
            d.push_meta("relative_residual", format_float(residual));
            Ok((d, Some(e)))
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, limit: f64) -> Check {
    Check { name, passed: value.is_finite() && value < limit, detail: format!("{value:.3e} (limit {limit:.0e})") }
}

/// Quick end-to-end consistency checks.
pub fn selftest() -> Result<Vec<Check>> {
    let p = time_sweep_params(0.0)?;
    let mut out = Vec::new();

    let g = build_generator(&p, GeneratorMode::PaperLiteral);
    out.push(check("generator trace identity", (g.trace() + 4.0 * p.decay.trace()).abs() / g.norm(), 1e-14));
    let derived = build_generator(&p, GeneratorMode::DerivedFromH);
    out.push(check("paper and derived generators agree", (g.matrix() - derived.matrix()).abs().max() / g.norm(), 1e-14));

    let closed = crate::spectral::eigenvalues_closed_form(&g)?;
    out.push(check("closed-form spectrum", crate::spectral::spectrum_mismatch(&closed, &crate::spectral::numeric_eigenvalues(&g)), 1e-9));

    let n0 = initial_bloch(Flavor::Electron, &p);
    let grid = uniform_grid(2e12, 201)?;
    let prop = Propagator::new(&g, &n0);
    let spectral = prop.trajectory(&grid)?;
    let rk4 = integrate_bloch(&g, &n0, &grid, StepControl::default())?;
    out.push(check("spectral vs RK4", spectral.max_deviation(&rk4), 1e-6));

    let q = make_params(ENERGY, DM2, sweep_theta(), 1.0, 1.0, &DecaySpec::none())?;
    let traj = electron_propagator(&q, GeneratorMode::DerivedFromH).trajectory(&uniform_grid(4e12, 401)?)?;
    let dev = traj
        .times()
        .iter()
        .zip(traj.states())
        .map(|(t, n)| (transition_probability(n, &q) - closed_form_probabilities(&q, *t).0).abs())
        .fold(0.0, f64::max);
    out.push(check("survival probability vs closed form", dev, 1e-9));

    let alpha = PI / 3.0;
    let nodes = 10_001;
    let states: Vec<BlochVector> = (0..nodes)
        .map(|k| {
            let b = 2.0 * PI * k as f64 / (nodes - 1) as f64;
            BlochVector::new(alpha.sin() * b.cos(), alpha.sin() * b.sin(), alpha.cos())
        })
        .collect();
    let loop_traj = Trajectory::from_states((0..nodes).map(|k| k as f64).collect(), states);
    let berry = pancharatnam(&loop_traj)?.gamma_p;
    out.push(check("closed-loop Berry phase", (berry + PI / 2.0).abs(), 1e-6));

    let prog = to_nmr(&p)?;
    let back = from_nmr(&prog, p.energy_ev)?;
    out.push(check("NMR round trip", (back.v0 - p.v0).abs() / p.v0 + (back.decay.get(0, 1) - p.decay.get(0, 1)).abs() / p.v0, 1e-12));
    Ok(out)
}

/// Generator used by the figure sweeps at one CP phase; exposed for tests.
pub fn sweep_generator(phi: f64, mode: GeneratorMode) -> Result<BlochGenerator> {
    Ok(build_generator(&time_sweep_params(phi)?, mode))
}
