//! Geometric multigrid on nested uniform meshes.
//!
//! Levels are numbered from 1 (coarsest) to K (finest). Each level is
//! re-discretized directly; the smoother is damped Jacobi, which for a
//! Toeplitz system is a scalar Richardson iteration because the diagonal is
//! constant. The coarsest level is solved by a dense Cholesky factorization.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble_level, LevelOperator, Mesh, ProblemSpec};
use crate::{dot, norm2, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgConfig {
    pub m1: usize,
    pub m2: usize,
    pub eta_pre: f64,
    pub eta_post: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub coarse_max: usize,
}

impl Default for MgConfig {
    fn default() -> Self {
        Self {
            m1: 1,
            m2: 2,
            eta_pre: 0.5,
            eta_post: 0.5,
            tol: 1e-10,
            max_iter: 200,
            coarse_max: 7,
        }
    }
}

impl MgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m1 < 1 {
            return Err(Error::invalid("m1", "at least one pre-smoothing step is required"));
        }
        for (name, eta) in [("eta_pre", self.eta_pre), ("eta_post", self.eta_post)] {
            if !(eta > 0.0 && eta <= 0.5) {
                return Err(Error::invalid(name, format!("{eta} is not in (0, 1/2]")));
            }
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::invalid("tol", format!("{} is not in (0, 1)", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::invalid("max_iter", "must be at least 1"));
        }
        if self.coarse_max < 3 {
            return Err(Error::invalid("coarse_max", "the coarsest admissible mesh has 3 interior nodes"));
        }
        Ok(())
    }

    pub fn with_smoothing(self, m1: usize, m2: usize) -> Self {
        Self { m1, m2, ..self }
    }
}

/// Linear interpolation from level `k−1` to level `k`; boundary values are zero.
pub fn prolongate(coarse: &[f64]) -> Vec<f64> {
    let nc = coarse.len();
    let mut fine = vec![0.0; 2 * nc + 1];
    for (c, &v) in coarse.iter().enumerate() {
        fine[2 * c + 1] = v;
    }
    for c in 0..=nc {
        let left = if c > 0 { coarse[c - 1] } else { 0.0 };
        let right = if c < nc { coarse[c] } else { 0.0 };
        fine[2 * c] = 0.5 * (left + right);
    }
    fine
}

/// Full weighting `¼(1, 2, 1)`, the adjoint of [`prolongate`] in the mesh inner products.
pub fn restrict(fine: &[f64]) -> Result<Vec<f64>> {
    if fine.len() < 3 || fine.len().is_multiple_of(2) {
        return Err(Error::invalid("fine", format!("length {} is not 2n + 1 with n >= 1", fine.len())));
    }
    let nc = (fine.len() - 1) / 2;
    Ok((0..nc)
        .map(|c| 0.25 * (fine[2 * c] + 2.0 * fine[2 * c + 1] + fine[2 * c + 2]))
        .collect())
}

/// `steps` damped Jacobi sweeps `z ← z + (η/d)(g − A z)` in place.
pub fn jacobi_smooth(level: &LevelOperator, z: &mut [f64], g: &[f64], eta: f64, steps: usize) -> Result<()> {
    let n = level.n();
    Error::check_len(n, z.len())?;
    Error::check_len(n, g.len())?;
    let w = eta / level.diag();
    let mut az = vec![0.0; n];
    for _ in 0..steps {
        level.apply_into(z, &mut az)?;
        for i in 0..n {
            z[i] += w * (g[i] - az[i]);
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solution: Vec<f64>,
    pub iters: usize,
    /// Relative residuals `‖r_i‖/‖r_0‖`, starting with `1`.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

impl SolveResult {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    levels: Vec<LevelOperator>,
    coarse: Cholesky<f64, Dyn>,
}

impl Hierarchy {
    /// Assembles every level of the mesh sequence ending at `fine`.
    pub fn build(problem: &ProblemSpec, fine: &Mesh, tau: f64, config: &MgConfig) -> Result<Self> {
        config.validate()?;
        let mut meshes = vec![*fine];
        while meshes.last().unwrap().n_interior() > config.coarse_max {
            match meshes.last().unwrap().coarsen() {
                Some(m) => meshes.push(m),
                None => break,
            }
        }
        meshes.reverse();
        let levels = meshes
            .iter()
            .map(|m| assemble_level(problem, m, tau))
            .collect::<Result<Vec<_>>>()?;
        Self::from_levels(levels)
    }

    /// Wraps pre-assembled levels, coarsest first.
    pub fn from_levels(levels: Vec<LevelOperator>) -> Result<Self> {
        let first = levels.first().ok_or(Error::Empty)?;
        for pair in levels.windows(2) {
            let (c, f) = (&pair[0], &pair[1]);
            if f.n() != 2 * c.n() + 1 || c.tau() != f.tau() {
                return Err(Error::invalid("levels", "levels must be nested halvings with a shared tau"));
            }
        }
        let coarse = Cholesky::new(first.system().to_dense())
            .ok_or_else(|| Error::Breakdown("coarsest matrix is not positive definite".into()))?;
        Ok(Self { levels, coarse })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Level `k`, with `1` the coarsest.
    pub fn level(&self, k: usize) -> &LevelOperator {
        &self.levels[k - 1]
    }

    pub fn finest(&self) -> &LevelOperator {
        self.levels.last().unwrap()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.n()).collect()
    }

    pub fn tau(&self) -> f64 {
        self.finest().tau()
    }

    fn coarse_solve(&self, g: &[f64]) -> Vec<f64> {
        self.coarse.solve(&DVector::from_column_slice(g)).as_slice().to_vec()
    }

    fn cycle(&self, k: usize, z: &mut Vec<f64>, g: &[f64], cfg: &MgConfig) -> Result<()> {
        if k == 1 {
            *z = self.coarse_solve(g);
            return Ok(());
        }
        let lvl = self.level(k);
        jacobi_smooth(lvl, z, g, cfg.eta_pre, cfg.m1)?;
        let az = lvl.apply(z)?;
        let r: Vec<f64> = g.iter().zip(&az).map(|(g, a)| g - a).collect();
        let rc = restrict(&r)?;
        let mut ec = vec![0.0; rc.len()];
        self.cycle(k - 1, &mut ec, &rc, cfg)?;
        for (zi, e) in z.iter_mut().zip(prolongate(&ec)) {
            *zi += e;
        }
        jacobi_smooth(lvl, z, g, cfg.eta_post, cfg.m2)
    }

    /// One V-cycle `MG(k, z0, g)` on level `k`.
    pub fn v_cycle(&self, k: usize, z0: &[f64], g: &[f64], cfg: &MgConfig) -> Result<Vec<f64>> {
        if k < 1 || k > self.levels.len() {
            return Err(Error::invalid("k", format!("level {k} is outside 1..={}", self.levels.len())));
        }
        let n = self.level(k).n();
        Error::check_len(n, z0.len())?;
        Error::check_len(n, g.len())?;
        let mut z = z0.to_vec();
        self.cycle(k, &mut z, g, cfg)?;
        if let Some((index, &value)) = z.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(z)
    }

    /// Repeated V-cycles on the finest level from a zero initial guess.
    pub fn solve(&self, g: &[f64], cfg: &MgConfig) -> Result<SolveResult> {
        let lvl = self.finest();
        let n = lvl.n();
        Error::check_len(n, g.len())?;
        let g_norm = norm2(g);
        let mut z = vec![0.0; n];
        let mut history = vec![1.0];
        if g_norm == 0.0 {
            return Ok(SolveResult { solution: z, iters: 0, residual_history: history, converged: true });
        }
        let k = self.levels.len();
        let mut best = (f64::INFINITY, z.clone());
        for it in 1..=cfg.max_iter {
            self.cycle(k, &mut z, g, cfg)?;
            let az = lvl.apply(&z)?;
            let res = g.iter().zip(&az).map(|(g, a)| (g - a).powi(2)).sum::<f64>().sqrt() / g_norm;
            history.push(res);
            if !res.is_finite() {
                break;
            }
            if res < best.0 {
                best = (res, z.clone());
            }
            if res < cfg.tol {
                return Ok(SolveResult { solution: z, iters: it, residual_history: history, converged: true });
            }
        }
        let iters = history.len() - 1;
        Ok(SolveResult { solution: best.1, iters, residual_history: history, converged: false })
    }

    /// Energy norm `√(eᵀ(τ^{−1}M + ½B)e)` on the finest level.
    pub fn energy_norm(&self, e: &[f64]) -> Result<f64> {
        Ok(self.finest().bilinear(e, e)?.max(0.0).sqrt())
    }

    /// Asymptotic per-cycle error reduction in the energy norm, maximized over
    /// `trials` random initial errors: 20 homogeneous cycles, geometric mean
    /// of the last 5 ratios.
    pub fn contraction_factor(&self, cfg: &MgConfig, trials: usize, seed: u64) -> Result<f64> {
        if trials < 1 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        const CYCLES: usize = 20;
        const TAIL: usize = 5;
        let k = self.levels.len();
        let n = self.finest().n();
        let zero = vec![0.0; n];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let mut e: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut norm = self.energy_norm(&e)?;
            let mut log_tail = 0.0;
            for c in 0..CYCLES {
                e.iter_mut().for_each(|v| *v /= norm);
                e = self.v_cycle(k, &e, &zero, cfg)?;
                norm = self.energy_norm(&e)?;
                if norm == 0.0 {
                    break;
                }
                if c >= CYCLES - TAIL {
                    log_tail += norm.ln();
                }
            }
            let factor = if norm == 0.0 { 0.0 } else { (log_tail / TAIL as f64).exp() };
            worst = worst.max(factor);
        }
        Ok(worst)
    }
}

pub fn build_hierarchy(problem: &ProblemSpec, fine: &Mesh, tau: f64, config: &MgConfig) -> Result<Hierarchy> {
    Hierarchy::build(problem, fine, tau, config)
}

pub fn mg_solve(hier: &Hierarchy, g: &[f64], config: &MgConfig) -> Result<SolveResult> {
    hier.solve(g, config)
}

pub fn contraction_factor(hier: &Hierarchy, m1: usize, m2: usize, trials: usize) -> Result<f64> {
    hier.contraction_factor(&MgConfig::default().with_smoothing(m1, m2), trials, 0x5eed)
}

/// Dense matrix of [`prolongate`] from a coarse level with `nc` unknowns.
pub fn prolongation_matrix(nc: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(2 * nc + 1, nc);
    for c in 0..nc {
        p[(2 * c, c)] = 0.5;
        p[(2 * c + 1, c)] = 1.0;
        p[(2 * c + 2, c)] = 0.5;
    }
    p
}

/// Largest entry of `|½PᵀA_kP − A_{k−1}|` relative to the largest entry of `A_{k−1}`.
pub fn galerkin_defect(fine: &LevelOperator, coarse: &LevelOperator) -> Result<f64> {
    Error::check_len(2 * coarse.n() + 1, fine.n())?;
    let p = prolongation_matrix(coarse.n());
    let galerkin = 0.5 * p.transpose() * fine.system().to_dense() * &p;
    let direct = coarse.system().to_dense();
    let scale = direct.amax();
    Ok((galerkin - direct).amax() / scale)
}

/// `h_{k−1}⟨Rw, v⟩ − h_k⟨w, Pv⟩` for the transfer pair between two sizes.
pub fn transfer_adjointness_gap(w: &[f64], v: &[f64], h_fine: f64) -> Result<f64> {
    Error::check_len(2 * v.len() + 1, w.len())?;
    let lhs = 2.0 * h_fine * dot(&restrict(w)?, v);
    let rhs = h_fine * dot(w, &prolongate(v));
    Ok(lhs - rhs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub cells: usize,
    pub tau: f64,
    pub factor: f64,
    /// V-cycles to reach the configured tolerance from zero on a random right-hand side.
    pub iters: usize,
    pub converged: bool,
}

/// Contraction factor and iteration count for every `(M, τ)` pair.
pub fn contraction_sweep(
    problem: &ProblemSpec,
    cells: &[usize],
    taus: &[f64],
    cfg: &MgConfig,
    trials: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<SweepCell>> {
    let grid: Vec<(usize, f64)> = cells.iter().flat_map(|&m| taus.iter().map(move |&t| (m, t))).collect();
    crate::parallel_map(&grid, threads, |&(m, tau)| {
        let hier = Hierarchy::build(problem, &problem.mesh(m)?, tau, cfg)?;
        let factor = hier.contraction_factor(cfg, trials, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ m as u64);
        let g: Vec<f64> = (0..hier.finest().n()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = hier.solve(&g, cfg)?;
        Ok(SweepCell { cells: m, tau, factor, iters: out.iters, converged: out.converged })
    })
}
