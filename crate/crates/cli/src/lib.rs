//! Argument handling, subcommands and table output for the `solver` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fracmg::assembly::{assemble_level, make_example1_with_order, make_example2, mass_symbol, ProblemSpec};
use fracmg::diagnostics::{
    check_discrete_coercivity, spectral_radius_sweep, structure_sweep_with, verify_fourier_symbol, CheckStatus, Side,
};
use fracmg::fracquad::{FractionalDerivative, SmoothFn, DEFAULT_DERIV_ORDER};
use fracmg::multigrid::{contraction_sweep, galerkin_defect, transfer_adjointness_gap, MgConfig};
use fracmg::timestep::{convergence_table, difference_table};
use fracmg::toeplitz::SymToeplitz;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "solver", version, about = "Multigrid solver for tempered fractional diffusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Manufactured-solution error table on (0, 32).
    Example1(Options),
    /// Successive-difference rates for the unforced problem on (0, 1).
    Example2(Options),
    /// V-cycle contraction factors over a grid of mesh sizes and time steps.
    Mgbench(Options),
    /// Numerical checks of the discretization's structural properties.
    Verify(Options),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Markdown,
}

#[derive(Args, Debug, Clone)]
pub struct Options {
    /// Fractional order in (1, 2); repeat for several.
    #[arg(long = "alpha")]
    pub alpha: Vec<f64>,
    /// Tempering parameter.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Reaction coefficient (fixed by the exact solution for example1).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Left endpoint.
    #[arg(long = "a")]
    pub a: Option<f64>,
    /// Right endpoint.
    #[arg(long = "b")]
    pub b: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    pub t_final: Option<f64>,
    /// Cell counts, comma separated, as integers or `2^k`.
    #[arg(long = "M", value_delimiter = ',', value_parser = parse_cells)]
    pub cells: Option<Vec<usize>>,
    /// Time steps for mgbench, comma separated.
    #[arg(long = "tau", value_delimiter = ',')]
    pub tau: Option<Vec<f64>>,
    /// Pre-smoothing steps.
    #[arg(long)]
    pub m1: Option<usize>,
    /// Post-smoothing steps.
    #[arg(long)]
    pub m2: Option<usize>,
    /// Pre-smoothing damping.
    #[arg(long)]
    pub eta_pre: Option<f64>,
    /// Post-smoothing damping.
    #[arg(long)]
    pub eta_post: Option<f64>,
    /// Relative residual tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// V-cycle cap per solve.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Largest number of unknowns solved directly.
    #[arg(long)]
    pub coarse_max: Option<usize>,
    /// Gauss–Jacobi–Lobatto order for pointwise fractional derivatives.
    #[arg(long, default_value_t = DEFAULT_DERIV_ORDER)]
    pub quad_order: usize,
    /// Seed for randomized checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for independent cases.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flip the sign of the first off-diagonal stiffness entry in the structure checks.
    #[arg(long, hide = true)]
    pub inject_sign_flip: bool,
}

fn parse_cells(s: &str) -> Result<usize, String> {
    let s = s.trim();
    let v = match s.strip_prefix("2^") {
        Some(k) => {
            let k: u32 = k.parse().map_err(|_| format!("bad exponent in {s:?}"))?;
            if k >= 40 {
                return Err(format!("{s} is too large"));
            }
            1usize << k
        }
        None => s.parse().map_err(|_| format!("{s:?} is not an integer"))?,
    };
    if v < 4 || !v.is_power_of_two() {
        return Err(format!("{v} is not a power of two >= 4"));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcmd {
    Example1,
    Example2,
    Mgbench,
    Verify,
}

/// Fully resolved parameters of one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub subcommand: Subcmd,
    pub alphas: Vec<f64>,
    pub lambda: f64,
    pub sigma: f64,
    pub a: f64,
    pub b: f64,
    pub t_final: f64,
    pub cells: Vec<usize>,
    pub taus: Vec<f64>,
    pub mg: MgConfig,
    pub quad_order: usize,
    pub seed: u64,
    pub threads: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub inject_sign_flip: bool,
}

impl RunConfig {
    pub fn resolve(cmd: Subcmd, o: Options) -> Result<Self, String> {
        let (alphas, a, b, cells): (Vec<f64>, f64, f64, Vec<usize>) = match cmd {
            Subcmd::Example1 => (vec![1.1, 1.8], 0.0, 32.0, vec![128, 256, 512, 1024]),
            Subcmd::Example2 => (vec![1.1, 1.5, 1.9], 0.0, 1.0, vec![128, 256, 512, 1024]),
            Subcmd::Mgbench => (vec![1.5], 0.0, 1.0, vec![64, 128, 256, 512, 1024]),
            Subcmd::Verify => (vec![1.1, 1.5, 1.9], 0.0, 1.0, vec![32, 64, 128, 256, 512, 1024]),
        };
        let alphas = if o.alpha.is_empty() { alphas } else { o.alpha.clone() };
        for &al in &alphas {
            if !(al > 1.0 && al < 2.0) {
                return Err(format!("--alpha {al} is not in (1, 2)"));
            }
        }
        let lambda = o.lambda.unwrap_or(0.5);
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(format!("--lambda {lambda} must be >= 0"));
        }
        if cmd == Subcmd::Example1 {
            if o.sigma.is_some() {
                return Err(String::from("--sigma is determined by the exact solution in example1"));
            }
            if o.a.is_some_and(|v| v != 0.0) {
                return Err(String::from("example1 requires --a 0"));
            }
        }
        let sigma = o.sigma.unwrap_or(0.0);
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(format!("--sigma {sigma} must be >= 0"));
        }
        let (a, b) = (o.a.unwrap_or(a), o.b.unwrap_or(b));
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(format!("need --a < --b, got {a} and {b}"));
        }
        let t_final = o.t_final.unwrap_or(1.0);
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(format!("--T {t_final} must be > 0"));
        }
        let mut cells = o.cells.clone().unwrap_or(cells);
        if cells.is_empty() {
            return Err(String::from("--M needs at least one value"));
        }
        if matches!(cmd, Subcmd::Example1 | Subcmd::Example2) {
            if cells.windows(2).any(|w| w[1] != 2 * w[0]) {
                return Err(String::from("--M must be successive doublings"));
            }
        } else {
            cells.sort_unstable();
            cells.dedup();
        }
        let taus = o.tau.clone().unwrap_or_else(|| vec![1.0, 1e-3, 1e-6]);
        if taus.is_empty() || taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(String::from("--tau values must be > 0"));
        }
        let d = MgConfig::default();
        let mg = MgConfig {
            m1: o.m1.unwrap_or(d.m1),
            m2: o.m2.unwrap_or(d.m2),
            eta_pre: o.eta_pre.unwrap_or(d.eta_pre),
            eta_post: o.eta_post.unwrap_or(d.eta_post),
            tol: o.tol.unwrap_or(d.tol),
            max_iter: o.max_iter.unwrap_or(d.max_iter),
            coarse_max: o.coarse_max.unwrap_or(d.coarse_max),
        };
        mg.validate().map_err(|e| e.to_string())?;
        if o.quad_order < 2 {
            return Err(String::from("--quad-order must be at least 2"));
        }
        if o.threads < 1 {
            return Err(String::from("--threads must be at least 1"));
        }
        Ok(Self {
            subcommand: cmd,
            alphas,
            lambda,
            sigma,
            a,
            b,
            t_final,
            cells,
            taus,
            mg,
            quad_order: o.quad_order,
            seed: o.seed,
            threads: o.threads,
            format: o.format,
            out: o.out,
            inject_sign_flip: o.inject_sign_flip,
        })
    }

    fn example2_problem(&self, alpha: f64, lambda: f64) -> fracmg::Result<ProblemSpec> {
        let p = ProblemSpec { sigma: self.sigma, a: self.a, b: self.b, t_final: self.t_final, ..make_example2(alpha, lambda)? };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn render(&self, format: Format) -> String {
        let mut s = String::new();
        match format {
            Format::Csv => {
                s.push_str(&self.header.join(","));
                s.push('\n');
                for r in &self.rows {
                    s.push_str(&r.join(","));
                    s.push('\n');
                }
            }
            Format::Markdown => {
                let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
                s.push_str(&line(&self.header));
                s.push_str(&format!("|{}\n", "---|".repeat(self.header.len())));
                for r in &self.rows {
                    s.push_str(&line(r));
                }
            }
        }
        s
    }
}

/// `1.2345e-03` style, five significant digits.
pub fn sci5(x: f64) -> String {
    let s = format!("{x:.4e}");
    match s.split_once('e') {
        Some((m, e)) => {
            let e: i32 = e.parse().unwrap_or(0);
            format!("{m}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
        }
        None => s,
    }
}

fn opt_rate(r: Option<f64>) -> String {
    r.map_or(String::new(), |v| format!("{v:.4}"))
}

pub struct Outcome {
    pub table: Table,
    /// Lines for stderr.
    pub notes: Vec<String>,
    pub exit: i32,
}

pub fn cmd_example1(cfg: &RunConfig) -> fracmg::Result<Outcome> {
    let mut t = Table::new(&["alpha", "N", "error", "rate", "iter", "cpu_s", "assembly_s"]);
    for &alpha in &cfg.alphas {
        let p = make_example1_with_order(alpha, cfg.lambda, cfg.b, cfg.t_final, cfg.quad_order)?;
        for row in convergence_table(&p, &cfg.cells, &cfg.mg, cfg.threads)? {
            t.rows.push(vec![
                format!("{alpha}"),
                row.steps.to_string(),
                sci5(row.error),
                opt_rate(row.rate),
                format!("{:.2}", row.mean_iter),
                format!("{:.3}", row.cpu_seconds),
                format!("{:.3}", row.assembly_seconds),
            ]);
        }
    }
    Ok(Outcome { table: t, notes: Vec::new(), exit: EXIT_OK })
}

pub fn cmd_example2(cfg: &RunConfig) -> fracmg::Result<Outcome> {
    let mut t = Table::new(&["alpha", "N", "error", "rate", "iter", "cpu_s"]);
    for &alpha in &cfg.alphas {
        let p = cfg.example2_problem(alpha, cfg.lambda)?;
        for row in difference_table(&p, &cfg.cells, &cfg.mg, cfg.threads)? {
            t.rows.push(vec![
                format!("{alpha}"),
                row.cells.to_string(),
                sci5(row.difference),
                opt_rate(row.rate),
                format!("{:.2}", row.mean_iter),
                format!("{:.3}", row.cpu_seconds),
            ]);
        }
    }
    Ok(Outcome { table: t, notes: Vec::new(), exit: EXIT_OK })
}

const FACTOR_MAX: f64 = 0.9;
const SPREAD_MAX: f64 = 0.15;
const ITER_MAX: usize = 30;
const CONTRACTION_TRIALS: usize = 3;

pub fn cmd_mgbench(cfg: &RunConfig) -> fracmg::Result<Outcome> {
    let mut t = Table::new(&["sweep", "alpha", "M", "tau", "m1", "m2", "factor", "iter"]);
    let mut notes = Vec::new();
    let mut ok = true;
    let mut check = |name: String, pass: bool, notes: &mut Vec<String>| {
        notes.push(format!("{} {name}", if pass { "PASS" } else { "FAIL" }));
        ok &= pass;
    };
    let base = cfg.mg;
    let doubled = base.with_smoothing(2 * base.m1, 2 * base.m2);
    for &alpha in &cfg.alphas {
        let p = cfg.example2_problem(alpha, cfg.lambda)?;
        let grid = contraction_sweep(&p, &cfg.cells, &cfg.taus, &base, CONTRACTION_TRIALS, cfg.seed, cfg.threads)?;
        let more = contraction_sweep(&p, &cfg.cells, &cfg.taus, &doubled, CONTRACTION_TRIALS, cfg.seed, cfg.threads)?;
        for (kind, mg, cells) in [("grid", base, &grid), ("doubled", doubled, &more)] {
            for c in cells {
                t.rows.push(vec![
                    kind.into(),
                    format!("{alpha}"),
                    c.cells.to_string(),
                    format!("{:e}", c.tau),
                    mg.m1.to_string(),
                    mg.m2.to_string(),
                    format!("{:.4}", c.factor),
                    c.iters.to_string(),
                ]);
            }
        }
        let (lo, hi) = grid.iter().fold((f64::INFINITY, 0.0f64), |(l, h), c| (l.min(c.factor), h.max(c.factor)));
        check(format!("alpha={alpha} max factor {hi:.4} < {FACTOR_MAX}"), hi < FACTOR_MAX, &mut notes);
        check(format!("alpha={alpha} factor spread {:.4} < {SPREAD_MAX}", hi - lo), hi - lo < SPREAD_MAX, &mut notes);
        check(
            format!("alpha={alpha} doubling the smoothing lowers every factor"),
            grid.iter().zip(&more).all(|(a, b)| b.factor < a.factor),
            &mut notes,
        );
        let max_iter = grid.iter().map(|c| c.iters).max().unwrap_or(0);
        check(
            format!("alpha={alpha} iterations {max_iter} <= {ITER_MAX}"),
            grid.iter().all(|c| c.converged && c.iters <= ITER_MAX),
            &mut notes,
        );

        let m = *cfg.cells.last().unwrap();
        let tau = cfg.taus[0];
        let mut factors = Vec::new();
        for steps in [1, 2, 4, 8] {
            let mg = base.with_smoothing(steps, steps);
            let c = contraction_sweep(&p, &[m], &[tau], &mg, CONTRACTION_TRIALS, cfg.seed, 1)?[0];
            t.rows.push(vec![
                "m-sweep".into(),
                format!("{alpha}"),
                m.to_string(),
                format!("{tau:e}"),
                steps.to_string(),
                steps.to_string(),
                format!("{:.4}", c.factor),
                c.iters.to_string(),
            ]);
            factors.push(c.factor);
        }
        check(
            format!("alpha={alpha} factors decrease over m = 1, 2, 4, 8"),
            factors.windows(2).all(|w| w[1] < w[0]),
            &mut notes,
        );
    }
    Ok(Outcome { table: t, notes, exit: if ok { EXIT_OK } else { EXIT_CHECK_FAILED } })
}

fn gaussian(s: f64) -> SmoothFn {
    let g = move |x: f64| (-(x / s).powi(2) / 2.0).exp();
    SmoothFn::new(g, move |x| -x / (s * s) * g(x), move |x| ((x * x) / s.powi(4) - 1.0 / (s * s)) * g(x))
}

/// Second derivative of a Gaussian; its zeroth and first moments vanish.
fn gaussian_curvature(s: f64) -> SmoothFn {
    let g = move |x: f64| (-(x / s).powi(2) / 2.0).exp();
    SmoothFn::new(
        move |x| ((x / s).powi(2) - 1.0) * g(x) / (s * s),
        move |x| -((x / s).powi(3) - 3.0 * x / s) * g(x) / s.powi(3),
        move |x| ((x / s).powi(4) - 6.0 * (x / s).powi(2) + 3.0) * g(x) / s.powi(4),
    )
}

struct Manifest {
    table: Table,
    failed: usize,
}

impl Manifest {
    fn push(&mut self, name: &str, status: CheckStatus, detail: String) {
        let s = match status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Warn => "WARN",
            CheckStatus::Fail => "FAIL",
        };
        if status == CheckStatus::Fail {
            self.failed += 1;
        }
        self.table.rows.push(vec![name.into(), s.into(), detail]);
    }

    fn hard(&mut self, name: &str, pass: bool, detail: String) {
        self.push(name, if pass { CheckStatus::Pass } else { CheckStatus::Fail }, detail);
    }
}

pub fn cmd_verify(cfg: &RunConfig) -> fracmg::Result<Outcome> {
    let mut m = Manifest { table: Table::new(&["check", "status", "detail"]), failed: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut fft: f64 = 0.0;
    for n in (2..=512).step_by(7).chain([512]) {
        let t = SymToeplitz::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dense = t.to_dense() * nalgebra::DVector::from_column_slice(&x);
        let fast = t.matvec(&x)?;
        let err = fast.iter().zip(dense.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / dense.norm();
        fft = fft.max(err);
    }
    m.hard("fft_matvec_vs_dense", fft <= 1e-12, format!("max rel {fft:.2e}"));

    let mut gap: f64 = 0.0;
    for k in 1..10 {
        let nc = (1usize << k) - 1;
        let v: Vec<f64> = (0..nc).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..2 * nc + 1).map(|_| rng.random_range(-1.0..1.0)).collect();
        gap = gap.max(transfer_adjointness_gap(&w, &v, 1.0 / (2 * nc + 2) as f64)?.abs());
    }
    m.hard("transfer_adjointness", gap <= 1e-14, format!("max gap {gap:.2e}"));

    let mut gal: f64 = 0.0;
    for &alpha in &cfg.alphas {
        let p = cfg.example2_problem(alpha, cfg.lambda)?;
        for cells in [16, 32, 64] {
            let fine = assemble_level(&p, &p.mesh(cells)?, 0.01)?;
            let coarse = assemble_level(&p, &p.mesh(cells / 2)?, 0.01)?;
            gal = gal.max(galerkin_defect(&fine, &coarse)?);
        }
    }
    m.hard("galerkin_consistency", gal <= 1e-6, format!("max rel {gal:.2e}"));

    let mut deriv: f64 = 0.0;
    for &alpha in &cfg.alphas {
        let d = FractionalDerivative::new(alpha, cfg.quad_order)?;
        for p in [2.0, 3.0, 4.0] {
            let coef = libm::tgamma(p + 1.0) / libm::tgamma(p + 1.0 - alpha);
            let left = SmoothFn::shifted_power(0.0, p);
            let right = SmoothFn::shifted_power(0.0, p).reflect(2.0);
            for x in [0.3f64, 0.9, 1.7] {
                let wl = coef * x.powf(p - alpha);
                let wr = coef * (2.0 - x).powf(p - alpha);
                deriv = deriv.max(((d.left(&left, 0.0, x)? - wl) / wl).abs());
                deriv = deriv.max(((d.right(&right, 2.0, x)? - wr) / wr).abs());
            }
        }
    }
    m.hard("fractional_derivative_of_powers", deriv <= 1e-8, format!("max rel {deriv:.2e}"));

    let mut fourier: f64 = 0.0;
    for side in [Side::Left, Side::Right] {
        fourier = fourier.max(verify_fourier_symbol(&gaussian_curvature(0.08), 0.0, 0.8, 0.75, 0.0, 1 << 11, side)?);
        fourier = fourier.max(verify_fourier_symbol(&gaussian(0.08), 0.0, 0.7, 0.75, cfg.lambda, 1 << 11, side)?);
        fourier = fourier.max(verify_fourier_symbol(&gaussian(0.08), 0.0, 0.7, 1.0, cfg.lambda, 1 << 12, side)?);
    }
    m.hard("fourier_symbol", fourier <= 1e-3, format!("max rel L2 {fourier:.2e}"));

    let mut margin = f64::INFINITY;
    for &alpha in &cfg.alphas {
        for lambda in [0.0, cfg.lambda] {
            let k = fracmg::kappa(alpha);
            for sigma in [0.0, 3.0 * k, cfg.sigma] {
                let p = ProblemSpec { sigma, ..cfg.example2_problem(alpha, lambda)? };
                margin = margin.min(check_discrete_coercivity(&p, 64, 16, cfg.seed)?.margin);
            }
        }
    }
    m.hard("discrete_coercivity", margin >= 0.0, format!("min margin {margin:.3e}"));

    let flip = |s: &mut Vec<f64>| {
        if cfg.inject_sign_flip && s.len() > 1 {
            s[1] = -s[1];
        }
    };
    let lambdas: Vec<f64> = if cfg.lambda > 0.0 { vec![0.0, cfg.lambda] } else { vec![0.0] };
    for lambda in lambdas {
        let mut status = CheckStatus::Pass;
        let mut bad = Vec::new();
        for &alpha in &cfg.alphas {
            let sweep = structure_sweep_with(&cfg.example2_problem(alpha, lambda)?, &cfg.cells, 0.01, flip)?;
            for e in &sweep.entries {
                if e.status != CheckStatus::Pass {
                    bad.push(format!("alpha={alpha} M={}", e.cells));
                }
            }
            status = match (status, sweep.status()) {
                (CheckStatus::Fail, _) | (_, CheckStatus::Fail) => CheckStatus::Fail,
                (CheckStatus::Warn, _) | (_, CheckStatus::Warn) => CheckStatus::Warn,
                _ => CheckStatus::Pass,
            };
        }
        let detail = if bad.is_empty() { "all levels".to_string() } else { format!("not an M-matrix at {}", bad.join(" ")) };
        m.push(&format!("m_matrix_lambda_{lambda}"), status, detail);
    }
    let mass = SymToeplitz::new(mass_symbol(&fracmg::assembly::Mesh::new(0.0, 1.0, 16)?))?.structure_report();
    m.hard(
        "checker_rejects_mass_matrix",
        mass.is_weakly_diag_dominant && !mass.is_m_matrix(),
        "mass matrix is dominant with positive off-diagonals".into(),
    );

    let mut growth: f64 = 0.0;
    let mut spread: f64 = 1.0;
    for &alpha in &cfg.alphas {
        let p = cfg.example2_problem(alpha, cfg.lambda)?;
        let rows = spectral_radius_sweep(&p, &cfg.cells, 1e6)?;
        for r in &rows[1..] {
            growth = growth.max((r.growth.unwrap_or(f64::NAN) / 2f64.powf(alpha) - 1.0).abs());
        }
        for rows in [rows, spectral_radius_sweep(&p, &cfg.cells, 1e-3)?] {
            let (lo, hi) = rows.iter().fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(r.bound_ratio), h.max(r.bound_ratio)));
            spread = spread.max(hi / lo);
        }
    }
    if cfg.cells.len() > 1 {
        m.hard("spectral_radius_growth", growth <= 0.05, format!("max |rho ratio / 2^alpha - 1| {growth:.3e}"));
    }
    m.hard("spectral_bound_ratio", spread < 2.0, format!("max spread {spread:.3}"));

    let exit = if m.failed == 0 { EXIT_OK } else { EXIT_CHECK_FAILED };
    let notes = if m.failed == 0 { vec!["all hard checks passed".into()] } else { vec![format!("{} hard checks failed", m.failed)] };
    Ok(Outcome { table: m.table, notes, exit })
}

fn write_output(cfg: &RunConfig, text: &str) -> std::io::Result<()> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

/// Parses `args` (including the program name), runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (sub, opts) = match cli.command {
        Command::Example1(o) => (Subcmd::Example1, o),
        Command::Example2(o) => (Subcmd::Example2, o),
        Command::Mgbench(o) => (Subcmd::Mgbench, o),
        Command::Verify(o) => (Subcmd::Verify, o),
    };
    let cfg = match RunConfig::resolve(sub, opts) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let result = match sub {
        Subcmd::Example1 => cmd_example1(&cfg),
        Subcmd::Example2 => cmd_example2(&cfg),
        Subcmd::Mgbench => cmd_mgbench(&cfg),
        Subcmd::Verify => cmd_verify(&cfg),
    };
    match result {
        Ok(out) => {
            if let Err(e) = write_output(&cfg, &out.table.render(cfg.format)) {
                eprintln!("error: cannot write output: {e}");
                return EXIT_CHECK_FAILED;
            }
            for n in &out.notes {
                eprintln!("{n}");
            }
            out.exit
        }
        Err(fracmg::Error::InvalidParameter { name, reason }) => {
            eprintln!("error: invalid {name}: {reason}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CHECK_FAILED
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci5_formatting() {
        assert_eq!(sci5(4.70348e-3), "4.7035e-03");
        assert_eq!(sci5(1.0), "1.0000e+00");
        assert_eq!(sci5(123456.0), "1.2346e+05");
    }

    #[test]
    fn cell_parsing() {
        assert_eq!(parse_cells("2^7"), Ok(128));
        assert_eq!(parse_cells("256"), Ok(256));
        assert!(parse_cells("100").is_err());
        assert!(parse_cells("2^x").is_err());
    }

    #[test]
    fn markdown_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.rows.push(vec!["1".into(), "2".into()]);
        assert_eq!(t.render(Format::Markdown), "| a | b |\n|---|---|\n| 1 | 2 |\n");
        assert_eq!(t.render(Format::Csv), "a,b\n1,2\n");
    }

    #[test]
    fn resolve_defaults_and_errors() {
        let parse = |args: &[&str]| {
            let cli = Cli::try_parse_from(args).unwrap();
            let (s, o) = match cli.command {
                Command::Example1(o) => (Subcmd::Example1, o),
                Command::Example2(o) => (Subcmd::Example2, o),
                Command::Mgbench(o) => (Subcmd::Mgbench, o),
                Command::Verify(o) => (Subcmd::Verify, o),
            };
            RunConfig::resolve(s, o)
        };
        let c = parse(&["solver", "example1"]).unwrap();
        assert_eq!(c.alphas, vec![1.1, 1.8]);
        assert_eq!(c.cells, vec![128, 256, 512, 1024]);
        assert_eq!((c.lambda, c.b, c.t_final), (0.5, 32.0, 1.0));
        assert_eq!((c.mg.m1, c.mg.m2), (1, 2));
        assert!(parse(&["solver", "example1", "--sigma", "1"]).is_err());
        assert!(parse(&["solver", "example2", "--alpha", "2.5"]).is_err());
        assert!(parse(&["solver", "example2", "--M", "128,512"]).is_err());
        assert!(parse(&["solver", "mgbench", "--coarse-max", "1"]).is_err());
        let c = parse(&["solver", "example2", "--alpha", "1.2", "--alpha", "1.3", "--M", "2^5,2^6"]).unwrap();
        assert_eq!(c.alphas, vec![1.2, 1.3]);
        assert_eq!(c.cells, vec![32, 64]);
    }
}
