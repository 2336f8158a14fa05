//! Crank–Nicolson time marching with one multigrid solve per step, and the
//! error and rate bookkeeping of convergence studies.

use std::time::Instant;

use crate::assembly::{fe_l2_error, interpolate, ForcingLoad, Mesh, ProblemSpec};
use crate::multigrid::{Hierarchy, MgConfig};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub u: Vec<f64>,
    pub iters: usize,
    pub residual: f64,
    pub converged: bool,
}

/// One step `t_prev → t_prev + τ`: solves
/// `A u = (1/h)[(τ^{−1}M − ½B) u_prev + (f(·, t_prev + τ/2), φ)]`.
pub fn cn_step(
    hier: &Hierarchy,
    load: &ForcingLoad,
    u_prev: &[f64],
    t_prev: f64,
    cfg: &MgConfig,
) -> Result<StepOutput> {
    let lvl = hier.finest();
    Error::check_len(lvl.n(), u_prev.len())?;
    let tau = lvl.tau();
    let inv_h = 1.0 / lvl.h();
    let known = lvl.apply_explicit(u_prev)?;
    let f = load.at(t_prev + 0.5 * tau)?;
    let rhs: Vec<f64> = known.iter().zip(&f).map(|(k, f)| inv_h * (k + f)).collect();
    let out = hier.solve(&rhs, cfg)?;
    Ok(StepOutput {
        residual: out.final_residual(),
        u: out.solution,
        iters: out.iters,
        converged: out.converged,
    })
}

#[derive(Debug, Clone)]
pub struct SolutionRecord {
    pub alpha: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub cells: usize,
    pub steps: usize,
    pub tau: f64,
    pub mesh: Mesh,
    /// Nodal values at `t = T` on the interior nodes.
    pub values: Vec<f64>,
    pub iterations: Vec<usize>,
    /// Wall time of the time loop, including right-hand sides.
    pub wall_seconds: f64,
    /// One-time hierarchy assembly.
    pub assembly_seconds: f64,
    pub l2_error: Option<f64>,
}

impl SolutionRecord {
    pub fn mean_iterations(&self) -> f64 {
        if self.iterations.is_empty() {
            return 0.0;
        }
        self.iterations.iter().sum::<usize>() as f64 / self.iterations.len() as f64
    }
}

/// `N` Crank–Nicolson steps on `M` cells with `τ = T/N`, starting from the
/// nodal interpolant of `u0`.
pub fn run_simulation(problem: &ProblemSpec, cells: usize, steps: usize, cfg: &MgConfig) -> Result<SolutionRecord> {
    run_simulation_observed(problem, cells, steps, cfg, |_, _| {})
}

/// Like [`run_simulation`], calling `observe(n, u^n)` after every step.
pub fn run_simulation_observed<F: FnMut(usize, &[f64])>(
    problem: &ProblemSpec,
    cells: usize,
    steps: usize,
    cfg: &MgConfig,
    mut observe: F,
) -> Result<SolutionRecord> {
    problem.validate()?;
    if steps < 1 {
        return Err(Error::invalid("N", "at least one time step is required"));
    }
    let mesh = problem.mesh(cells)?;
    let tau = problem.t_final / steps as f64;

    let start = Instant::now();
    let hier = Hierarchy::build(problem, &mesh, tau, cfg)?;
    let load = ForcingLoad::new(problem, &mesh)?;
    let assembly_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let mut u = interpolate(&mesh, |x| (problem.u0)(x));
    let mut iterations = Vec::with_capacity(steps);
    for n in 0..steps {
        let t_prev = n as f64 * tau;
        let out = cn_step(&hier, &load, &u, t_prev, cfg)?;
        if !out.converged {
            return Err(Error::Diverged { step: n + 1, residual: out.residual });
        }
        u = out.u;
        iterations.push(out.iters);
        observe(n + 1, &u);
    }
    let wall_seconds = start.elapsed().as_secs_f64();

    let l2_error = match &problem.exact {
        Some(exact) => Some(fe_l2_error(&mesh, &u, |x, t| exact(x, t), problem.t_final)?),
        None => None,
    };
    Ok(SolutionRecord {
        alpha: problem.alpha,
        lambda: problem.lambda,
        sigma: problem.sigma,
        cells,
        steps,
        tau,
        mesh,
        values: u,
        iterations,
        wall_seconds,
        assembly_seconds,
        l2_error,
    })
}

/// Runs `N = M` simulations for every `M`, on up to `threads` worker threads.
/// Results keep the order of `cells`.
pub fn run_many(problem: &ProblemSpec, cells: &[usize], cfg: &MgConfig, threads: usize) -> Result<Vec<SolutionRecord>> {
    crate::parallel_map(cells, threads, |&m| run_simulation(problem, m, m, cfg))
}

/// Observed order `log2(e_coarse / e_fine)`.
pub fn rate_from_errors(err_coarse: f64, err_fine: f64) -> Result<f64> {
    if !(err_coarse > 0.0 && err_fine > 0.0) {
        return Err(Error::invalid("errors", format!("need positive errors, got {err_coarse}, {err_fine}")));
    }
    Ok((err_coarse / err_fine).log2())
}

/// `‖u_M − u_{2M}‖` in the `h_M`-weighted discrete L² norm over the nodes of the coarser mesh.
pub fn nodal_difference(coarse: &SolutionRecord, fine: &SolutionRecord) -> Result<f64> {
    if fine.cells != 2 * coarse.cells {
        return Err(Error::invalid("fine", "the finer run must have twice the cells"));
    }
    let h = coarse.mesh.h();
    let sum: f64 = coarse
        .values
        .iter()
        .enumerate()
        .map(|(i, c)| (c - fine.values[2 * i + 1]).powi(2))
        .sum();
    Ok((h * sum).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceRow {
    pub cells: usize,
    /// `‖u_M − u_{2M}‖`.
    pub difference: f64,
    /// `log2(d_{M/2} / d_M)`, absent for the first row.
    pub rate: Option<f64>,
    pub mean_iter: f64,
    pub cpu_seconds: f64,
}

/// Successive-refinement study for problems without an exact solution.
/// Runs every `M` in `cells` plus twice the largest one, with `N = M`.
pub fn difference_table(problem: &ProblemSpec, cells: &[usize], cfg: &MgConfig, threads: usize) -> Result<Vec<DifferenceRow>> {
    check_doubling(cells)?;
    let mut all = cells.to_vec();
    all.push(2 * cells[cells.len() - 1]);
    let runs = run_many(problem, &all, cfg, threads)?;
    let mut rows: Vec<DifferenceRow> = Vec::with_capacity(cells.len());
    for i in 0..cells.len() {
        let d = nodal_difference(&runs[i], &runs[i + 1])?;
        if d == 0.0 {
            return Err(Error::Breakdown(format!("identical solutions at M = {}", cells[i])));
        }
        let rate = match rows.last() {
            Some(prev) => Some(rate_from_errors(prev.difference, d)?),
            None => None,
        };
        rows.push(DifferenceRow {
            cells: cells[i],
            difference: d,
            rate,
            mean_iter: runs[i].mean_iterations(),
            cpu_seconds: runs[i].wall_seconds,
        });
    }
    Ok(rows)
}

/// `log2(‖u_{M/2} − u_M‖ / ‖u_M − u_{2M}‖)` from three runs with `N = M`.
pub fn rate_three_mesh(problem: &ProblemSpec, cells: usize, cfg: &MgConfig) -> Result<f64> {
    if cells < 8 {
        return Err(Error::invalid("M", "M/2 must still be a valid mesh"));
    }
    let rows = difference_table(problem, &[cells / 2, cells], cfg, 1)?;
    Ok(rows[1].rate.expect("second row has a rate"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub cells: usize,
    pub steps: usize,
    pub error: f64,
    pub rate: Option<f64>,
    pub mean_iter: f64,
    pub cpu_seconds: f64,
    pub assembly_seconds: f64,
}

/// Error table against the exact solution with `N = M`.
pub fn convergence_table(problem: &ProblemSpec, cells: &[usize], cfg: &MgConfig, threads: usize) -> Result<Vec<ConvergenceRow>> {
    if problem.exact.is_none() {
        return Err(Error::invalid("exact", "the problem has no exact solution"));
    }
    check_doubling(cells)?;
    let runs = run_many(problem, cells, cfg, threads)?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(cells.len());
    for r in runs {
        let error = r.l2_error.expect("exact solution present");
        let rate = match rows.last() {
            Some(prev) => Some(rate_from_errors(prev.error, error)?),
            None => None,
        };
        rows.push(ConvergenceRow {
            cells: r.cells,
            steps: r.steps,
            error,
            rate,
            mean_iter: r.mean_iterations(),
            cpu_seconds: r.wall_seconds,
            assembly_seconds: r.assembly_seconds,
        });
    }
    Ok(rows)
}

fn check_doubling(cells: &[usize]) -> Result<()> {
    if cells.is_empty() {
        return Err(Error::Empty);
    }
    if cells.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::invalid("M", "mesh sizes must double from one row to the next"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{make_example1, make_example2, Forcing};
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn rates_from_errors() {
        assert!((rate_from_errors(4.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((rate_from_errors(2.0e-3, 1.0e-3).unwrap() - 1.0).abs() < 1e-15);
        assert!((rate_from_errors(4.7035e-3, 1.1469e-3).unwrap() - 2.0360).abs() < 1e-4);
        assert!(rate_from_errors(0.0, 1.0).is_err());
        assert!(rate_from_errors(1.0, -1.0).is_err());
    }

    #[test]
    fn zero_data_stays_zero() {
        let mut p = make_example2(1.5, 0.5).unwrap();
        p.u0 = std::sync::Arc::new(|_| 0.0);
        let r = run_simulation(&p, 32, 8, &MgConfig::default()).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0));
        assert_eq!(r.iterations, vec![0; 8]);
        assert!(r.l2_error.is_none());
    }

    #[test]
    fn step_matches_dense_solve() {
        let p = make_example1(1.5, 0.5, 32.0, 1.0).unwrap();
        let mesh = p.mesh(32).unwrap();
        let tau = 1.0 / 32.0;
        let cfg = MgConfig::default();
        let hier = Hierarchy::build(&p, &mesh, tau, &cfg).unwrap();
        let load = ForcingLoad::new(&p, &mesh).unwrap();
        let u0 = interpolate(&mesh, |x| (p.u0)(x));
        let out = cn_step(&hier, &load, &u0, 0.0, &cfg).unwrap();

        let lvl = hier.finest();
        let h = mesh.h();
        let m = lvl.mass().to_dense();
        let b = lvl.stiff().to_dense();
        let lhs: DMatrix<f64> = (&m / tau + &b * 0.5) / h;
        let rhs_mat: DMatrix<f64> = &m / tau - &b * 0.5;
        let f = DVector::from_vec(load.at(0.5 * tau).unwrap());
        let rhs = (rhs_mat * DVector::from_vec(u0.clone()) + f) / h;
        let want = lhs.lu().solve(&rhs).unwrap();
        let scale = want.amax();
        for (a, b) in out.u.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn unforced_mass_norm_decreases() {
        let p = make_example2(1.3, 0.5).unwrap();
        for (cells, steps) in [(64usize, 64usize), (64, 1)] {
            let mesh = p.mesh(cells).unwrap();
            let mass = crate::toeplitz::SymToeplitz::new(crate::assembly::mass_symbol(&mesh)).unwrap();
            let mut last = f64::INFINITY;
            run_simulation_observed(&p, cells, steps, &MgConfig::default(), |_, u| {
                let now = mass.quadratic_form(u).unwrap();
                assert!(now <= last);
                last = now;
            })
            .unwrap();
        }
    }

    #[test]
    fn manufactured_error_is_small_and_second_order() {
        let p = make_example1(1.8, 0.5, 32.0, 1.0).unwrap();
        let rows = convergence_table(&p, &[32, 64], &MgConfig::default(), 2).unwrap();
        let rate = rows[1].rate.unwrap();
        assert!((rate - 2.0).abs() < 0.25, "rate {rate}");
        assert!(rows[0].rate.is_none());
    }

    #[test]
    fn difference_table_shape() {
        let p = make_example2(1.5, 0.5).unwrap();
        let rows = difference_table(&p, &[16, 32], &MgConfig::default(), 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].rate.is_none() && rows[1].rate.unwrap() > 0.5);
        assert!(difference_table(&p, &[16, 64], &MgConfig::default(), 1).is_err());
        let mut q = p.clone();
        q.forcing = Forcing::Zero;
        assert!(convergence_table(&q, &[16], &MgConfig::default(), 1).is_err());
    }
}
