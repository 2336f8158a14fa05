//! Mesh-dependent norms and numerical checks of the properties the solver
//! relies on: coercivity, Fourier symbols of the tempered derivatives,
//! spectral-radius scaling and the M-matrix structure of the stiffness.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::assembly::{assemble_level, mass_symbol, stiffness_symbol, LevelOperator, ProblemSpec};
use crate::fracquad::{SmoothFn, TemperedIntegral};
use crate::toeplitz::{power_iteration, StructureReport, SymToeplitz};
use crate::{check_alpha, dot, kappa, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub s: u32,
    pub value: f64,
    pub cells: usize,
}

/// `√((A^s v, v)_k)` for `s ∈ {0, 1, 2}` with `(u, v)_k = h uᵀv`.
pub fn mesh_norm(level: &LevelOperator, v: &[f64], s: u32) -> Result<f64> {
    Error::check_len(level.n(), v.len())?;
    let h = level.h();
    let sq = match s {
        0 => h * dot(v, v),
        1 => h * dot(v, &level.apply(v)?),
        2 => {
            let av = level.apply(v)?;
            h * dot(&av, &av)
        }
        _ => return Err(Error::invalid("s", format!("{s} is not in {{0, 1, 2}}"))),
    };
    Ok(sq.max(0.0).sqrt())
}

pub fn norm_report(level: &LevelOperator, v: &[f64], s: u32) -> Result<NormReport> {
    Ok(NormReport { s, value: mesh_norm(level, v, s)?, cells: level.mesh().cells() })
}

/// `√(a_τ(v, v))`, the norm of the multigrid contraction estimates.
pub fn energy_tau_norm(level: &LevelOperator, v: &[f64]) -> Result<f64> {
    mesh_norm(level, v, 1)
}

/// `C₀ = min{1, λ^α} · min{2κ_α [2^{−α} − cos(απ/3)], σ/(2λ)^α}`.
///
/// Returns `None` outside the formula's hypotheses `λ > 0`, `σ > 0`.
pub fn coercivity_constant(alpha: f64, lambda: f64, sigma: f64) -> Option<f64> {
    if check_alpha(alpha).is_err() || !(lambda > 0.0) || !(sigma > 0.0) {
        return None;
    }
    let t1 = 2.0 * kappa(alpha) * (2f64.powf(-alpha) - (alpha * std::f64::consts::PI / 3.0).cos());
    let t2 = sigma / (2.0 * lambda).powf(alpha);
    Some(lambda.powf(alpha).min(1.0) * t1.min(t2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityCheck {
    /// Smallest observed `vᵀBv / vᵀMv`.
    pub min_ratio: f64,
    /// Constant compared against, `0` when the closed form does not apply.
    pub c0: f64,
    pub margin: f64,
}

/// Minimizes `vᵀBv / vᵀMv` over `trials` random vectors and the lowest sine
/// modes, then subtracts `C₀`.
pub fn check_discrete_coercivity(problem: &ProblemSpec, cells: usize, trials: usize, seed: u64) -> Result<CoercivityCheck> {
    if trials < 1 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let mesh = problem.mesh(cells)?;
    let b = SymToeplitz::new(stiffness_symbol(problem, &mesh)?)?;
    let m = SymToeplitz::new(mass_symbol(&mesh))?;
    let c0 = coercivity_constant(problem.alpha, problem.lambda, problem.sigma).unwrap_or(0.0);
    let n = mesh.n_interior();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes: Vec<Vec<f64>> = (0..trials).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    for k in 1..=4.min(n) {
        let w = k as f64 * std::f64::consts::PI / (n + 1) as f64;
        probes.push((1..=n).map(|j| (w * j as f64).sin()).collect());
    }
    let mut min_ratio = f64::INFINITY;
    for v in &probes {
        min_ratio = min_ratio.min(b.quadratic_form(v)? / m.quadratic_form(v)?);
    }
    Ok(CoercivityCheck { min_ratio, c0, margin: min_ratio - c0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Relative L² mismatch between the DFT of sampled tempered derivatives
/// `D^{ν,λ}u` and `(λ ∓ iω)^ν û` on the lower half of the resolved band.
///
/// `u` must be negligible outside `(center − radius, center + radius)`. The
/// sampling window extends four support widths beyond the support on each
/// side and its far end plays the role of `∓∞`. The transform convention is
/// `û(ω) = ∫ e^{iωx} u(x) dx`.
pub fn verify_fourier_symbol(
    u: &SmoothFn,
    center: f64,
    radius: f64,
    nu: f64,
    lambda: f64,
    grid_size: usize,
    side: Side,
) -> Result<f64> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::invalid("nu", format!("{nu} is not in (0, 1]")));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("radius", "must be positive"));
    }
    if grid_size < 16 || !grid_size.is_power_of_two() {
        return Err(Error::invalid("grid_size", "must be a power of two >= 16"));
    }
    for edge in [center - radius, center + radius] {
        let (v, d) = (u.value(edge), u.first(edge));
        if v.abs() > 1e-10 || d.abs() > 1e-10 {
            return Err(Error::invalid("u", format!("does not vanish at the support edge {edge}")));
        }
    }
    let pad = 4.0 * 2.0 * radius;
    let (lo, hi) = (center - radius - pad, center + radius + pad);
    let len = hi - lo;
    let dx = len / grid_size as f64;
    let xs: Vec<f64> = (0..grid_size).map(|j| lo + j as f64 * dx).collect();

    let sign = match side {
        Side::Left => 1.0,
        Side::Right => -1.0,
    };
    // D^{ν,λ}u = ±I^{1−ν,λ}(u' ± λu); first-order case handled exactly.
    let g = |x: f64| u.first(x) + sign * lambda * u.value(x);
    let deriv: Vec<f64> = if nu == 1.0 {
        xs.iter().map(|&x| sign * g(x)).collect()
    } else {
        let panel = radius / 8.0;
        xs.iter()
            .map(|&x| {
                let reach = match side {
                    Side::Left => x - lo,
                    Side::Right => hi - x,
                };
                if reach <= 0.0 {
                    return Ok(0.0);
                }
                let panels = ((reach / panel).ceil() as usize).max(1);
                let int = TemperedIntegral::new(1.0 - nu, 16, panels)?;
                Ok(match side {
                    Side::Left => int.left(g, lambda, lo, x)?,
                    Side::Right => -int.right(g, lambda, hi, x)?,
                })
            })
            .collect::<Result<Vec<f64>>>()?
    };

    let transform = |vals: Vec<f64>| {
        let mut buf: Vec<Complex64> = vals.into_iter().map(|v| Complex64::new(v * dx, 0.0)).collect();
        FftPlanner::new().plan_fft_inverse(grid_size).process(&mut buf);
        buf
    };
    let uhat = transform(xs.iter().map(|&x| u.value(x)).collect());
    let dhat = transform(deriv);

    let mut num = 0.0;
    let mut den = 0.0;
    let band = grid_size / 4;
    for k in 0..grid_size {
        let signed = if k <= grid_size / 2 { k as i64 } else { k as i64 - grid_size as i64 };
        if signed.unsigned_abs() as usize > band {
            continue;
        }
        let omega = 2.0 * std::f64::consts::PI * signed as f64 / len;
        let symbol = Complex64::new(lambda, -sign * omega).powf(nu);
        let want = symbol * uhat[k];
        num += (dhat[k] - want).norm_sqr();
        den += want.norm_sqr();
    }
    Ok((num / den).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusRow {
    pub cells: usize,
    pub rho: f64,
    /// `ρ h^α / (1 + τ^{−1} h^α)`.
    pub bound_ratio: f64,
    /// `ρ(h) / ρ(2h)`, absent for the first row.
    pub growth: Option<f64>,
    pub converged: bool,
}

/// Spectral radius of the finest-level system for every `M`.
pub fn spectral_radius_sweep(problem: &ProblemSpec, cells: &[usize], tau: f64) -> Result<Vec<RadiusRow>> {
    let mut rows: Vec<RadiusRow> = Vec::with_capacity(cells.len());
    for &m in cells {
        let mesh = problem.mesh(m)?;
        let lvl = assemble_level(problem, &mesh, tau)?;
        let est = power_iteration(|v| lvl.apply(v), lvl.n(), 1e-10, 100_000)?;
        let ha = mesh.h().powf(problem.alpha);
        let growth = rows.last().map(|prev| est.value / prev.rho);
        rows.push(RadiusRow {
            cells: m,
            rho: est.value,
            bound_ratio: est.value * ha / (1.0 + ha / tau),
            growth,
            converged: est.converged,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureEntry {
    pub cells: usize,
    pub stiff: StructureReport,
    pub system: StructureReport,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureSweep {
    pub entries: Vec<StructureEntry>,
    /// Whether the M-matrix property is a hard requirement (only at `λ = 0`).
    pub hard: bool,
}

impl StructureSweep {
    pub fn status(&self) -> CheckStatus {
        let statuses = self.entries.iter().map(|e| e.status);
        if statuses.clone().any(|s| s == CheckStatus::Fail) {
            CheckStatus::Fail
        } else if statuses.clone().any(|s| s == CheckStatus::Warn) {
            CheckStatus::Warn
        } else {
            CheckStatus::Pass
        }
    }
}

/// M-matrix and diagonal-dominance check of the stiffness on every mesh.
/// Failures are fatal at `λ = 0` and warnings otherwise. The system matrix
/// contains the consistent mass matrix, whose off-diagonals are positive, so
/// its report is informational.
pub fn structure_sweep(problem: &ProblemSpec, cells: &[usize], tau: f64) -> Result<StructureSweep> {
    structure_sweep_with(problem, cells, tau, |_| {})
}

/// [`structure_sweep`] with a hook that may modify each stiffness symbol before it is checked.
pub fn structure_sweep_with<F: Fn(&mut Vec<f64>)>(
    problem: &ProblemSpec,
    cells: &[usize],
    tau: f64,
    perturb: F,
) -> Result<StructureSweep> {
    let hard = problem.lambda == 0.0;
    let mut entries = Vec::with_capacity(cells.len());
    for &m in cells {
        let mesh = problem.mesh(m)?;
        let mut stiff = stiffness_symbol(problem, &mesh)?;
        perturb(&mut stiff);
        let lvl = crate::assembly::level_from_symbols(mesh, tau, mass_symbol(&mesh), stiff)?;
        let s = lvl.stiff().structure_report();
        let status = match (s.is_m_matrix(), hard) {
            (true, _) => CheckStatus::Pass,
            (false, true) => CheckStatus::Fail,
            (false, false) => CheckStatus::Warn,
        };
        entries.push(StructureEntry { cells: m, stiff: s, system: lvl.system().structure_report(), status });
    }
    Ok(StructureSweep { entries, hard })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{make_example1, make_example2, Mesh};

    fn level(alpha: f64, lambda: f64, cells: usize, tau: f64) -> LevelOperator {
        let p = make_example2(alpha, lambda).unwrap();
        assemble_level(&p, &p.mesh(cells).unwrap(), tau).unwrap()
    }

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn mesh_norm_values() {
        let p = crate::assembly::ProblemSpec { b: 1.0, ..make_example2(1.5, 0.5).unwrap() };
        let mesh = Mesh::new(0.0, 1.0, 4).unwrap();
        let lvl = assemble_level(&p, &mesh, 0.1).unwrap();
        let v = vec![1.0; 3];
        assert!((mesh_norm(&lvl, &v, 0).unwrap() - (0.25f64 * 3.0).sqrt()).abs() < 1e-15);
        assert!(mesh_norm(&lvl, &v, 3).is_err());

        let lvl = level(1.5, 0.5, 32, 0.01);
        let v = random_vec(31, 1);
        let e = energy_tau_norm(&lvl, &v).unwrap().powi(2);
        let want = lvl.mass().quadratic_form(&v).unwrap() / 0.01 + 0.5 * lvl.stiff().quadratic_form(&v).unwrap();
        assert!((e - want).abs() < 1e-12 * want);
        assert_eq!(energy_tau_norm(&lvl, &vec![0.0; 31]).unwrap(), 0.0);
        let scaled: Vec<f64> = v.iter().map(|x| -3.0 * x).collect();
        assert!((energy_tau_norm(&lvl, &scaled).unwrap() - 3.0 * e.sqrt()).abs() < 1e-12 * e.sqrt());
    }

    #[test]
    fn norm_interpolation_and_cauchy_schwarz() {
        let lvl = level(1.3, 0.5, 64, 1e-2);
        for seed in 0..10 {
            let v = random_vec(63, seed);
            let w = random_vec(63, seed + 100);
            let n0 = mesh_norm(&lvl, &v, 0).unwrap();
            let n1 = mesh_norm(&lvl, &v, 1).unwrap();
            let n2 = mesh_norm(&lvl, &v, 2).unwrap();
            assert!(n1 * n1 <= n0 * n2 * (1.0 + 1e-12));
            let a = (lvl.h() * dot(&v, &lvl.apply(&w).unwrap())).abs();
            assert!(a <= n1 * mesh_norm(&lvl, &w, 1).unwrap() * (1.0 + 1e-12));
            assert!(a <= n2 * mesh_norm(&lvl, &w, 0).unwrap() * (1.0 + 1e-12));
            let sum: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
            assert!(mesh_norm(&lvl, &sum, 1).unwrap() <= n1 + mesh_norm(&lvl, &w, 1).unwrap());
        }
    }

    #[test]
    fn energy_norm_mass_limit() {
        let v = random_vec(31, 3);
        for tau in [1e-2, 1e-4, 1e-6] {
            let lvl = level(1.5, 0.5, 32, tau);
            let scaled = tau * energy_tau_norm(&lvl, &v).unwrap().powi(2);
            let mass = lvl.mass().quadratic_form(&v).unwrap();
            let gap = (scaled - mass).abs() / mass;
            assert!(gap < 400.0 * tau, "tau {tau}: {gap}");
        }
    }

    #[test]
    fn coercivity_constant_values() {
        let k = kappa(1.5);
        let c0 = coercivity_constant(1.5, 1.0, 3.0 * k).unwrap();
        assert!((c0 - 0.5).abs() < 1e-14);
        assert!(coercivity_constant(1.5, 0.0, 1.0).is_none());
        assert!(coercivity_constant(1.5, 1.0, 0.0).is_none());
        for alpha in [1.05, 1.3, 1.6, 1.95] {
            for lambda in [0.1, 0.5, 1.0, 3.0] {
                for sigma in [0.1, 1.0, 5.0] {
                    assert!(coercivity_constant(alpha, lambda, sigma).unwrap() > 0.0);
                }
            }
        }
    }

    #[test]
    fn discrete_coercivity() {
        let k = kappa(1.5);
        let mut p = make_example2(1.5, 1.0).unwrap();
        p.sigma = 3.0 * k;
        let c = check_discrete_coercivity(&p, 64, 100, 0).unwrap();
        assert!(c.margin >= 0.0 && c.c0 == 0.5);
        let q = make_example2(1.5, 0.0).unwrap();
        assert!(check_discrete_coercivity(&q, 64, 50, 0).unwrap().margin >= 0.0);
        p.sigma = 10.0;
        assert!(check_discrete_coercivity(&p, 64, 100, 0).unwrap().min_ratio > c.min_ratio);
    }

    fn gaussian(c: f64, s: f64) -> SmoothFn {
        let s2 = s * s;
        SmoothFn::new(
            move |x| (-(x - c).powi(2) / (2.0 * s2)).exp(),
            move |x| -(x - c) / s2 * (-(x - c).powi(2) / (2.0 * s2)).exp(),
            move |x| ((x - c).powi(2) / (s2 * s2) - 1.0 / s2) * (-(x - c).powi(2) / (2.0 * s2)).exp(),
        )
    }

    #[test]
    fn fourier_symbol_first_order() {
        let u = gaussian(0.0, 0.08);
        for side in [Side::Left, Side::Right] {
            let e = verify_fourier_symbol(&u, 0.0, 0.7, 1.0, 0.5, 1 << 12, side).unwrap();
            assert!(e < 1e-6, "{side:?}: {e}");
        }
        assert!(verify_fourier_symbol(&u, 0.0, 0.1, 1.0, 0.5, 1 << 12, Side::Left).is_err());
    }

    fn gaussian_curvature(s: f64) -> SmoothFn {
        let g = move |x: f64| (-(x / s).powi(2) / 2.0).exp();
        SmoothFn::new(
            move |x| {
                let z = x / s;
                (z * z - 1.0) * g(x) / (s * s)
            },
            move |x| {
                let z = x / s;
                -(z.powi(3) - 3.0 * z) * g(x) / s.powi(3)
            },
            move |x| {
                let z = x / s;
                (z.powi(4) - 6.0 * z * z + 3.0) * g(x) / s.powi(4)
            },
        )
    }

    #[test]
    fn fourier_symbol_untempered() {
        let u = gaussian_curvature(0.08);
        for side in [Side::Left, Side::Right] {
            let e = verify_fourier_symbol(&u, 0.0, 0.8, 0.75, 0.0, 1 << 11, side).unwrap();
            assert!(e < 1e-3, "{side:?}: {e}");
        }
    }

    #[test]
    fn fourier_symbol_tempered() {
        let u = gaussian(0.0, 0.08);
        for side in [Side::Left, Side::Right] {
            let e = verify_fourier_symbol(&u, 0.0, 0.7, 0.75, 1.0, 1 << 11, side).unwrap();
            assert!(e < 1e-3, "{side:?}: {e}");
        }
    }

    #[test]
    fn spectral_radius_scaling() {
        let p = make_example2(1.5, 0.5).unwrap();
        let rows = spectral_radius_sweep(&p, &[32, 64, 128], 1e6).unwrap();
        for r in &rows[1..] {
            let g = r.growth.unwrap();
            assert!((g / 2f64.powf(1.5) - 1.0).abs() < 0.05, "growth {g}");
        }
        let q = make_example2(1.5, 0.5).unwrap();
        let tiny = spectral_radius_sweep(&q, &[32], 1e-8).unwrap()[0];
        assert!(tiny.rho * 1e-8 <= 1.0 + 1e-6);
    }

    #[test]
    fn structure_checks() {
        for alpha in [1.1, 1.5, 1.9] {
            let p = make_example2(alpha, 0.0).unwrap();
            let s = structure_sweep(&p, &[16, 64], 0.01).unwrap();
            assert!(s.hard && s.status() == CheckStatus::Pass);
        }
        let p = make_example2(1.5, 0.5).unwrap();
        let s = structure_sweep(&p, &[16, 64], 0.01).unwrap();
        assert!(!s.hard && s.status() != CheckStatus::Fail);
        let mass = SymToeplitz::new(mass_symbol(&Mesh::new(0.0, 1.0, 16).unwrap())).unwrap().structure_report();
        assert!(mass.is_weakly_diag_dominant && !mass.is_m_matrix());
        let q = make_example2(1.5, 0.0).unwrap();
        let bad = structure_sweep_with(&q, &[16], 0.01, |s| s[1] = -s[1]).unwrap();
        assert_eq!(bad.status(), CheckStatus::Fail);
        let warn = structure_sweep_with(&p, &[16], 0.01, |s| s[1] = -s[1]).unwrap();
        assert_eq!(warn.status(), CheckStatus::Warn);
    }

    #[test]
    fn example1_coercivity_margin() {
        let p = make_example1(1.5, 0.5, 32.0, 1.0).unwrap();
        assert!(check_discrete_coercivity(&p, 64, 20, 1).unwrap().margin >= 0.0);
    }
}
