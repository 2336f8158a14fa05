//! Linear finite elements on a uniform grid.
//!
//! Every matrix here is a symmetric Toeplitz matrix described by its first
//! column ("symbol"). The fractional stiffness symbol is assembled from the
//! exact double-integral form of the pairing of one-sided tempered derivatives
//!
//! ```text
//! (ₐD^{μ,λ}φ_j, ₓD^{μ,λ}φ_i) = −(1/Γ(2−α)) ∬_{ξ<x} e^{−λ(x−ξ)} (x−ξ)^{1−α} p_j(ξ) q_i(x) dξ dx
//! ```
//!
//! with `μ = α/2`, `p = φ' + λφ` and `q = φ' − λφ`, integrated cell pair by
//! cell pair. The [`reference`] module assembles the same matrix the long
//! way, from pointwise values of both one-sided derivatives.

use std::fmt;
use std::sync::Arc;

use libm::tgamma as gamma;

use crate::fracquad::{example1_forcing_with_order, gauss_jacobi, DEFAULT_DERIV_ORDER, Example1Forcing, QuadRule};
use crate::toeplitz::SymToeplitz;
use crate::{check_alpha, check_lambda, kappa, Error, Result};

/// Nodes per half-interval for the kernel integrals of the stiffness symbol.
pub const PAIR_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    a: f64,
    b: f64,
    cells: usize,
}

impl Mesh {
    pub fn new(a: f64, b: f64, cells: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::invalid("domain", format!("need a < b, got [{a}, {b}]")));
        }
        if cells < 4 || !cells.is_power_of_two() {
            return Err(Error::invalid("cells", format!("{cells} is not a power of two >= 4")));
        }
        Ok(Self { a, b, cells })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.cells as f64
    }

    /// Number of interior nodes, the size of every level matrix.
    pub fn n_interior(&self) -> usize {
        self.cells - 1
    }

    /// Interior node `i` (0-based), i.e. `a + (i+1) h`.
    pub fn node(&self, i: usize) -> f64 {
        self.a + (i + 1) as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_interior()).map(|i| self.node(i)).collect()
    }

    /// The mesh with twice the cell width, if it still has at least 4 cells.
    pub fn coarsen(&self) -> Option<Mesh> {
        (self.cells >= 8).then_some(Mesh { cells: self.cells / 2, ..*self })
    }

    pub fn refine(&self) -> Mesh {
        Mesh { cells: self.cells * 2, ..*self }
    }
}

pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Source term `f(x, t)`.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    /// `f(x, t) = temporal(t) · spatial(x)`; the spatial load is computed once per mesh.
    Separable { temporal: SpaceFn, spatial: SpaceFn },
    General(SpaceTimeFn),
}

impl Forcing {
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Separable { temporal, spatial } => temporal(t) * spatial(x),
            Forcing::General(f) => f(x, t),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Forcing::Zero => "Zero",
            Forcing::Separable { .. } => "Separable",
            Forcing::General(_) => "General",
        })
    }
}

/// The continuous problem
/// `u_t − κ_α [ₐ𝔻ₓ^{α,λ} + ₓ𝔻_b^{α,λ}] u + σu = f` on `(a, b) × (0, T]`
/// with homogeneous Dirichlet data and `u(·, 0) = u0`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub a: f64,
    pub b: f64,
    pub t_final: f64,
    pub forcing: Forcing,
    pub u0: SpaceFn,
    pub exact: Option<SpaceTimeFn>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("alpha", &self.alpha)
            .field("lambda", &self.lambda)
            .field("sigma", &self.sigma)
            .field("a", &self.a)
            .field("b", &self.b)
            .field("t_final", &self.t_final)
            .field("forcing", &self.forcing)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemSpec {
    /// Checks parameter ranges and, when an exact solution is given, that it
    /// matches the initial data.
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        check_lambda(self.lambda)?;
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::invalid("sigma", format!("{} must be >= 0", self.sigma)));
        }
        if !(self.a.is_finite() && self.b.is_finite() && self.a < self.b) {
            return Err(Error::invalid("domain", format!("need a < b, got [{}, {}]", self.a, self.b)));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::invalid("T", format!("{} must be > 0", self.t_final)));
        }
        if let Some(exact) = &self.exact {
            for k in 1..16 {
                let x = self.a + (self.b - self.a) * k as f64 / 16.0;
                let (e, u) = (exact(x, 0.0), (self.u0)(x));
                if (e - u).abs() > 1e-10 * u.abs().max(1e-300) {
                    return Err(Error::invalid("exact", format!("exact(x,0) != u0(x) at x = {x}")));
                }
            }
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        kappa(self.alpha)
    }

    pub fn mesh(&self, cells: usize) -> Result<Mesh> {
        Mesh::new(self.a, self.b, cells)
    }
}

/// Manufactured problem on `(0, b)` with exact solution `e^{−t} x² (1 − x/b)²`
/// and `σ = 3λ^α κ_α`.
pub fn make_example1(alpha: f64, lambda: f64, b_end: f64, t_final: f64) -> Result<ProblemSpec> {
    make_example1_with_order(alpha, lambda, b_end, t_final, DEFAULT_DERIV_ORDER)
}

/// [`make_example1`] with an explicit Gauss–Jacobi–Lobatto order for the forcing.
pub fn make_example1_with_order(alpha: f64, lambda: f64, b_end: f64, t_final: f64, order: usize) -> Result<ProblemSpec> {
    let forcing: Example1Forcing = example1_forcing_with_order(alpha, lambda, 0.0, b_end, order)?;
    let w = Example1Forcing::exact_profile(b_end);
    let (w0, w1) = (w.clone(), w);
    let spatial: SpaceFn = Arc::new(move |x| {
        if x > 0.0 && x < b_end {
            forcing.spatial(x).unwrap_or(f64::NAN)
        } else {
            0.0
        }
    });
    let p = ProblemSpec {
        alpha,
        lambda,
        sigma: 3.0 * lambda.powf(alpha) * kappa(alpha),
        a: 0.0,
        b: b_end,
        t_final,
        forcing: Forcing::Separable { temporal: Arc::new(|t: f64| (-t).exp()), spatial },
        u0: Arc::new(move |x| w0.value(x)),
        exact: Some(Arc::new(move |x, t| (-t).exp() * w1.value(x))),
    };
    p.validate()?;
    Ok(p)
}

/// Unforced problem on `(0, 1)` with `u0 = x(1 − x)`, `σ = 0`, `T = 1`.
pub fn make_example2(alpha: f64, lambda: f64) -> Result<ProblemSpec> {
    let p = ProblemSpec {
        alpha,
        lambda,
        sigma: 0.0,
        a: 0.0,
        b: 1.0,
        t_final: 1.0,
        forcing: Forcing::Zero,
        u0: Arc::new(|x| x * (1.0 - x)),
        exact: None,
    };
    p.validate()?;
    Ok(p)
}

/// First column of the consistent mass matrix, `[2h/3, h/6, 0, …]`.
pub fn mass_symbol(mesh: &Mesh) -> Vec<f64> {
    let h = mesh.h();
    let mut col = vec![0.0; mesh.n_interior()];
    col[0] = 2.0 * h / 3.0;
    if col.len() > 1 {
        col[1] = h / 6.0;
    }
    col
}

/// Local shape of `φ' ± λφ` on one cell, in the cell coordinate `v ∈ [0, 1]`.
#[derive(Clone, Copy)]
struct CellFactor {
    rising: bool,
    sign: f64,
}

impl CellFactor {
    fn eval(self, v: f64, h: f64, lambda: f64) -> f64 {
        if self.rising {
            1.0 / h + self.sign * lambda * v
        } else {
            -1.0 / h + self.sign * lambda * (1.0 - v)
        }
    }
}

struct PairRules {
    singular: QuadRule,
    legendre: QuadRule,
    inner: QuadRule,
}

impl PairRules {
    fn new(alpha: f64, nodes: usize) -> Result<Self> {
        Ok(Self {
            singular: gauss_jacobi(0.0, 1.0 - alpha, nodes)?,
            legendre: gauss_jacobi(0.0, 0.0, nodes)?,
            inner: gauss_jacobi(0.0, 0.0, 3)?,
        })
    }
}

/// `∬_{ξ<x} e^{−λ(x−ξ)} (x−ξ)^{1−α} p(ξ) q(x)` over the cell pair with
/// `ξ` in a cell `d` cells to the left of (or equal to) the cell of `x`.
fn cell_pair_integral(
    rules: &PairRules,
    alpha: f64,
    lambda: f64,
    h: f64,
    d: i64,
    p: CellFactor,
    q: CellFactor,
) -> f64 {
    // Overlap function C(w) = ∫ p(v) q(v + w) dv with w = u − v.
    let overlap = |w: f64| {
        let lo = (-w).max(0.0);
        let hi = (1.0 - w).min(1.0);
        if hi <= lo {
            return 0.0;
        }
        let (half, mid) = (0.5 * (hi - lo), 0.5 * (hi + lo));
        half * rules.inner.sum(|z| {
            let v = half * z + mid;
            p.eval(v, h, lambda) * q.eval(v + w, h, lambda)
        })
    };
    let df = d as f64;
    // The unit segment of w starting where the distance d + w vanishes.
    let singular_segment = || {
        let s = rules.singular.sum(|z| {
            let y = 0.5 * (1.0 + z);
            (-lambda * h * y).exp() * overlap(y - df)
        });
        0.5f64.powf(2.0 - alpha) * h.powf(1.0 - alpha) * s
    };
    let smooth_segment = |w0: f64| {
        0.5 * rules.legendre.sum(|z| {
            let w = w0 + 0.5 * (1.0 + z);
            let dist = h * (df + w);
            (-lambda * dist).exp() * dist.powf(1.0 - alpha) * overlap(w)
        })
    };
    match d {
        0 => singular_segment(),
        1 => singular_segment() + smooth_segment(0.0),
        _ => smooth_segment(-1.0) + smooth_segment(0.0),
    }
}

/// `t(k) = (ₐD^{α/2,λ}φ_0, ₓD^{α/2,λ}φ_k)` for a basis function `k` nodes to the right.
fn pairing_lag(rules: &PairRules, alpha: f64, lambda: f64, h: f64, k: i64) -> f64 {
    let mut total = 0.0;
    // Cells of φ_0 are -1 (rising) and 0 (falling); cells of φ_k are k-1 and k.
    for (cq, q_rising) in [(-1i64, true), (0, false)] {
        for (cp, p_rising) in [(k - 1, true), (k, false)] {
            let d = cp - cq;
            if d < 0 {
                continue;
            }
            let pf = CellFactor { rising: q_rising, sign: 1.0 };
            let qf = CellFactor { rising: p_rising, sign: -1.0 };
            total += cell_pair_integral(rules, alpha, lambda, h, d, pf, qf);
        }
    }
    -h * h * total / gamma(2.0 - alpha)
}

/// First column of the symmetrized fractional pairing matrix
/// `S_ij = ½[(ₐD^{α/2,λ}φ_j, ₓD^{α/2,λ}φ_i) + (ₓD^{α/2,λ}φ_j, ₐD^{α/2,λ}φ_i)]`.
pub fn frac_pair_symbol(mesh: &Mesh, alpha: f64, lambda: f64) -> Result<Vec<f64>> {
    frac_pair_symbol_with(mesh, alpha, lambda, PAIR_NODES)
}

pub fn frac_pair_symbol_with(mesh: &Mesh, alpha: f64, lambda: f64, nodes: usize) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_lambda(lambda)?;
    let rules = PairRules::new(alpha, nodes)?;
    let h = mesh.h();
    let n = mesh.n_interior();
    let col: Vec<f64> = (0..n as i64)
        .map(|m| {
            let forward = pairing_lag(&rules, alpha, lambda, h, m);
            let backward = if m <= 1 { pairing_lag(&rules, alpha, lambda, h, -m) } else { 0.0 };
            0.5 * (forward + backward)
        })
        .collect();
    if let Some((index, &value)) = col.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    Ok(col)
}

/// Symbol of the stiffness matrix of
/// `b(u,v) = −2κ_α S(u,v) + (2κ_α λ^α + σ)(u, v)`.
pub fn stiffness_symbol(problem: &ProblemSpec, mesh: &Mesh) -> Result<Vec<f64>> {
    stiffness_symbol_for(problem.alpha, problem.lambda, problem.sigma, mesh)
}

pub fn stiffness_symbol_for(alpha: f64, lambda: f64, sigma: f64, mesh: &Mesh) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid("sigma", format!("{sigma} must be >= 0")));
    }
    let s = frac_pair_symbol(mesh, alpha, lambda)?;
    let k = kappa(alpha);
    let shift = 2.0 * k * lambda.powf(alpha) + sigma;
    Ok(s.iter()
        .zip(mass_symbol(mesh))
        .map(|(s, m)| -2.0 * k * s + shift * m)
        .collect())
}

/// The level-`k` system `A_{k,τ}` under the mesh inner product `(u, v)_k = h uᵀv`.
#[derive(Debug, Clone)]
pub struct LevelOperator {
    mesh: Mesh,
    tau: f64,
    mass: SymToeplitz,
    stiff: SymToeplitz,
    system: SymToeplitz,
    explicit: SymToeplitz,
    diag: f64,
}

impl LevelOperator {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn n(&self) -> usize {
        self.mesh.n_interior()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn h(&self) -> f64 {
        self.mesh.h()
    }

    pub fn mass(&self) -> &SymToeplitz {
        &self.mass
    }

    pub fn stiff(&self) -> &SymToeplitz {
        &self.stiff
    }

    /// `(1/h)(τ^{−1}M + ½B)` as one Toeplitz operator.
    pub fn system(&self) -> &SymToeplitz {
        &self.system
    }

    /// Constant diagonal of the system matrix.
    pub fn diag(&self) -> f64 {
        self.diag
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.system.matvec(v)
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        self.system.matvec_into(v, out)
    }

    /// `(τ^{−1}M − ½B) v`, the known part of a Crank–Nicolson right-hand side.
    pub fn apply_explicit(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.explicit.matvec(v)
    }

    /// `(τ^{−1}M + ½B)`, the unscaled bilinear form `a_τ`.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let au = self.system.matvec(u)?;
        Ok(self.h() * crate::dot(&au, v))
    }
}

pub fn assemble_level(problem: &ProblemSpec, mesh: &Mesh, tau: f64) -> Result<LevelOperator> {
    let stiff = stiffness_symbol(problem, mesh)?;
    level_from_symbols(*mesh, tau, mass_symbol(mesh), stiff)
}

/// Builds a level operator from precomputed mass and stiffness symbols.
pub fn level_from_symbols(mesh: Mesh, tau: f64, mass: Vec<f64>, stiff: Vec<f64>) -> Result<LevelOperator> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid("tau", format!("{tau} must be > 0")));
    }
    let n = mesh.n_interior();
    Error::check_len(n, mass.len())?;
    Error::check_len(n, stiff.len())?;
    let h = mesh.h();
    let mass = SymToeplitz::new(mass)?;
    let stiff = SymToeplitz::new(stiff)?;
    let system = mass.combine(1.0 / (tau * h), &stiff, 0.5 / h)?;
    let explicit = mass.combine(1.0 / tau, &stiff, -0.5)?;
    let diag = system.diagonal();
    if !(diag > 0.0) {
        return Err(Error::Breakdown(format!("level diagonal {diag} is not positive")));
    }
    Ok(LevelOperator { mesh, tau, mass, stiff, system, explicit, diag })
}

/// Gauss–Legendre points and weights mapped to every cell of the mesh,
/// including the two boundary cells.
fn cell_points(mesh: &Mesh, per_cell: usize) -> Result<Vec<(usize, f64, f64, f64)>> {
    let rule = gauss_jacobi(0.0, 0.0, per_cell)?;
    let h = mesh.h();
    let mut pts = Vec::with_capacity(mesh.cells() * per_cell);
    for c in 0..mesh.cells() {
        let left = mesh.a() + c as f64 * h;
        for (z, w) in rule.nodes.iter().zip(&rule.weights) {
            let s = 0.5 * (1.0 + z);
            pts.push((c, s, left + h * s, 0.5 * h * w));
        }
    }
    Ok(pts)
}

/// `(g, φ_i)` for every interior node, by `per_cell`-point Gauss rules.
pub fn load_vector_with<G: Fn(f64) -> f64>(mesh: &Mesh, g: G, per_cell: usize) -> Result<Vec<f64>> {
    let n = mesh.n_interior();
    let mut out = vec![0.0; n];
    for (c, s, x, w) in cell_points(mesh, per_cell)? {
        let gx = g(x);
        if !gx.is_finite() {
            return Err(Error::NonFinite { index: c, value: gx });
        }
        // Cell c carries the falling part of node c-1 and the rising part of node c.
        if c >= 1 {
            out[c - 1] += w * gx * (1.0 - s);
        }
        if c < n {
            out[c] += w * gx * s;
        }
    }
    Ok(out)
}

pub fn load_vector<G: Fn(f64) -> f64>(mesh: &Mesh, g: G) -> Result<Vec<f64>> {
    load_vector_with(mesh, g, 3)
}

/// Load vectors of a problem's forcing on one mesh; separable forcings are
/// integrated once and rescaled in time.
#[derive(Clone)]
pub struct ForcingLoad {
    mesh: Mesh,
    forcing: Forcing,
    spatial: Option<Vec<f64>>,
}

impl ForcingLoad {
    pub fn new(problem: &ProblemSpec, mesh: &Mesh) -> Result<Self> {
        let spatial = match &problem.forcing {
            Forcing::Separable { spatial, .. } => Some(load_vector(mesh, |x| spatial(x))?),
            _ => None,
        };
        Ok(Self { mesh: *mesh, forcing: problem.forcing.clone(), spatial })
    }

    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        match (&self.forcing, &self.spatial) {
            (Forcing::Zero, _) => Ok(vec![0.0; self.mesh.n_interior()]),
            (Forcing::Separable { temporal, .. }, Some(l)) => {
                let s = temporal(t);
                Ok(l.iter().map(|v| s * v).collect())
            }
            (f, _) => load_vector(&self.mesh, |x| f.eval(x, t)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `u ↦ P = e^{σt} u`.
    ToP,
    /// `P ↦ u = e^{−σt} P`.
    ToU,
}

pub fn exp_transform(values: &[f64], sigma: f64, t: f64, direction: Direction) -> Vec<f64> {
    let s = match direction {
        Direction::ToP => (sigma * t).exp(),
        Direction::ToU => (-sigma * t).exp(),
    };
    values.iter().map(|v| s * v).collect()
}

/// `‖u_h − u(·, t)‖_{L²}` with `u_h` the piecewise-linear interpolant of
/// `nodal` (zero at both ends), by 4-point Gauss per cell.
pub fn fe_l2_error<U: Fn(f64, f64) -> f64>(mesh: &Mesh, nodal: &[f64], exact: U, t: f64) -> Result<f64> {
    let n = mesh.n_interior();
    Error::check_len(n, nodal.len())?;
    let mut sum = 0.0;
    for (c, s, x, w) in cell_points(mesh, 4)? {
        let left = if c >= 1 { nodal[c - 1] } else { 0.0 };
        let right = if c < n { nodal[c] } else { 0.0 };
        let uh = left * (1.0 - s) + right * s;
        let e = uh - exact(x, t);
        sum += w * e * e;
    }
    Ok(sum.sqrt())
}

/// Nodal interpolation of `u` on the interior nodes.
pub fn interpolate<U: Fn(f64) -> f64>(mesh: &Mesh, u: U) -> Vec<f64> {
    mesh.nodes().into_iter().map(u).collect()
}

/// Slow, independent assembly of the fractional pairing matrix from pointwise
/// values of both one-sided tempered derivatives of every basis function.
pub mod reference {
    use nalgebra::DMatrix;

    use super::*;

    const INNER_NODES: usize = 40;
    const OUTER_NODES: usize = 24;

    /// `φ' + sλφ` of basis function `j` as linear pieces `(lo, hi, c0, c1)`
    /// with value `c0 + c1 (ξ − x_j)` on `[lo, hi]`.
    fn pieces(mesh: &Mesh, j: usize, s: f64, lambda: f64) -> [(f64, f64, f64, f64); 2] {
        let (xj, h) = (mesh.node(j), mesh.h());
        [
            (xj - h, xj, 1.0 / h + s * lambda, s * lambda / h),
            (xj, xj + h, -1.0 / h + s * lambda, -s * lambda / h),
        ]
    }

    struct Pointwise {
        rule: QuadRule,
        mu: f64,
        lambda: f64,
        inv_gamma: f64,
    }

    impl Pointwise {
        /// `∫_0^S e^{−λs} s^{−μ} ℓ(x ∓ s) ds`.
        fn segment(&self, big_s: f64, x: f64, dir: f64, xj: f64, c0: f64, c1: f64) -> f64 {
            if big_s <= 0.0 {
                return 0.0;
            }
            let sum = self.rule.sum(|z| {
                let r = 0.5 * (1.0 + z);
                let s = big_s * r;
                (-self.lambda * s).exp() * (c0 + c1 * (x + dir * s - xj))
            });
            (0.5 * big_s).powf(1.0 - self.mu) * sum
        }

        /// `ₐD^{μ,λ}φ_j(x)`.
        fn left(&self, mesh: &Mesh, j: usize, x: f64) -> f64 {
            let xj = mesh.node(j);
            let mut total = 0.0;
            for (lo, hi, c0, c1) in pieces(mesh, j, 1.0, self.lambda) {
                if x > lo {
                    let s1 = (x - hi).max(0.0);
                    let s2 = x - lo;
                    total += self.segment(s2, x, -1.0, xj, c0, c1) - self.segment(s1, x, -1.0, xj, c0, c1);
                }
            }
            self.inv_gamma * total
        }

        /// `ₓD^{μ,λ}φ_i(x)`.
        fn right(&self, mesh: &Mesh, i: usize, x: f64) -> f64 {
            let xi = mesh.node(i);
            let mut total = 0.0;
            for (lo, hi, c0, c1) in pieces(mesh, i, -1.0, self.lambda) {
                if x < hi {
                    let s1 = (lo - x).max(0.0);
                    let s2 = hi - x;
                    total += self.segment(s2, x, 1.0, xi, c0, c1) - self.segment(s1, x, 1.0, xi, c0, c1);
                }
            }
            -self.inv_gamma * total
        }
    }

    /// Outer points graded toward every node: each half cell is mapped by
    /// `x = x_node ± (h/2) t⁴`.
    fn outer_points(mesh: &Mesh) -> Result<Vec<(f64, f64)>> {
        let rule = gauss_jacobi(0.0, 0.0, OUTER_NODES)?;
        let h = mesh.h();
        let mut pts = Vec::new();
        for c in 0..mesh.cells() {
            let left = mesh.a() + c as f64 * h;
            for (anchor, dir) in [(left, 1.0), (left + h, -1.0)] {
                for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                    let t = 0.5 * (1.0 + z);
                    let x = anchor + dir * 0.5 * h * t.powi(4);
                    pts.push((x, 0.5 * w * 0.5 * h * 4.0 * t.powi(3)));
                }
            }
        }
        Ok(pts)
    }

    fn pointwise(alpha: f64, lambda: f64) -> Result<Pointwise> {
        check_alpha(alpha)?;
        check_lambda(lambda)?;
        let mu = 0.5 * alpha;
        Ok(Pointwise {
            rule: gauss_jacobi(0.0, -mu, INNER_NODES)?,
            mu,
            lambda,
            inv_gamma: 1.0 / gamma(1.0 - mu),
        })
    }

    /// Dense matrix `S` with all `n²` entries integrated independently.
    pub fn dense_frac_pair_matrix(mesh: &Mesh, alpha: f64, lambda: f64) -> Result<DMatrix<f64>> {
        let pw = pointwise(alpha, lambda)?;
        let pts = outer_points(mesh)?;
        let n = mesh.n_interior();
        let gl: Vec<Vec<f64>> = (0..n).map(|j| pts.iter().map(|&(x, _)| pw.left(mesh, j, x)).collect()).collect();
        let gr: Vec<Vec<f64>> = (0..n).map(|j| pts.iter().map(|&(x, _)| pw.right(mesh, j, x)).collect()).collect();
        Ok(DMatrix::from_fn(n, n, |i, j| {
            0.5 * pts
                .iter()
                .enumerate()
                .map(|(p, &(_, w))| w * (gl[j][p] * gr[i][p] + gr[j][p] * gl[i][p]))
                .sum::<f64>()
        }))
    }

    /// Single entry `S_ij`.
    pub fn pair_entry(mesh: &Mesh, alpha: f64, lambda: f64, i: usize, j: usize) -> Result<f64> {
        let n = mesh.n_interior();
        if i >= n || j >= n {
            return Err(Error::invalid("index", format!("({i}, {j}) outside 0..{n}")));
        }
        let pw = pointwise(alpha, lambda)?;
        let pts = outer_points(mesh)?;
        Ok(0.5
            * pts
                .iter()
                .map(|&(x, w)| {
                    w * (pw.left(mesh, j, x) * pw.right(mesh, i, x) + pw.right(mesh, j, x) * pw.left(mesh, i, x))
                })
                .sum::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_mesh(cells: usize) -> Mesh {
        Mesh::new(0.0, 1.0, cells).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn mesh_validation_and_hierarchy() {
        assert!(Mesh::new(0.0, 1.0, 6).is_err());
        assert!(Mesh::new(0.0, 1.0, 2).is_err());
        assert!(Mesh::new(1.0, 1.0, 8).is_err());
        let m = Mesh::new(0.0, 2.0, 16).unwrap();
        assert_eq!(m.n_interior(), 15);
        assert!((m.h() - 0.125).abs() < 1e-16);
        assert!((m.node(0) - 0.125).abs() < 1e-16 && (m.node(14) - 1.875).abs() < 1e-15);
        assert_eq!(m.coarsen().unwrap().cells(), 8);
        assert!(Mesh::new(0.0, 1.0, 4).unwrap().coarsen().is_none());
    }

    #[test]
    fn mass_symbol_values() {
        let m = Mesh::new(0.0, 8.0, 8).unwrap();
        let s = mass_symbol(&m);
        assert_eq!(s.len(), 7);
        assert!((s[0] - 2.0 / 3.0).abs() < 1e-15 && (s[1] - 1.0 / 6.0).abs() < 1e-15);
        assert!(s[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn symbol_matches_dense_oracle() {
        let mesh = Mesh::new(0.0, 2.0, 16).unwrap();
        for (alpha, lambda) in [(1.5, 0.0), (1.1, 0.5), (1.8, 2.0)] {
            let dense = reference::dense_frac_pair_matrix(&mesh, alpha, lambda).unwrap();
            let sym = SymToeplitz::new(frac_pair_symbol(&mesh, alpha, lambda).unwrap()).unwrap().to_dense();
            let scale = sym[(0, 0)].abs();
            for i in 0..15 {
                for j in 0..15 {
                    let (d, s) = (dense[(i, j)], sym[(i, j)]);
                    assert!(
                        (d - s).abs() <= 1e-8 * s.abs().max(1e-3 * scale),
                        "alpha {alpha} lambda {lambda} ({i},{j}): {d} vs {s}"
                    );
                }
            }
        }
    }

    #[test]
    fn entries_are_translation_invariant() {
        let mesh = unit_mesh(16);
        let e1 = reference::pair_entry(&mesh, 1.4, 0.7, 2, 5).unwrap();
        let e2 = reference::pair_entry(&mesh, 1.4, 0.7, 7, 10).unwrap();
        assert!(rel(e1, e2) < 1e-8);
        assert!(reference::pair_entry(&mesh, 1.4, 0.7, 2, 15).is_err());
    }

    #[test]
    fn second_order_limit_is_laplacian() {
        let mesh = unit_mesh(32);
        let h = mesh.h();
        let s = frac_pair_symbol(&mesh, 1.999, 0.0).unwrap();
        let k = kappa(1.999);
        assert!(rel(-2.0 * k * s[0], 2.0 / h) < 0.02);
        assert!(rel(-2.0 * k * s[1], -1.0 / h) < 0.02);
        assert!((-2.0 * k * s[2]).abs() < 0.02 / h);
    }

    #[test]
    fn untempered_stiffness_is_m_matrix() {
        for alpha in [1.1, 1.5, 1.9] {
            let p = make_example2(alpha, 0.0).unwrap();
            let b = SymToeplitz::new(stiffness_symbol(&p, &unit_mesh(64)).unwrap()).unwrap();
            let r = b.structure_report();
            assert!(r.is_m_matrix(), "alpha {alpha}: {r:?}");
        }
    }

    #[test]
    fn level_identity_and_diagonal() {
        let p = make_example2(1.5, 0.5).unwrap();
        let mesh = unit_mesh(32);
        let tau = 1.0 / 32.0;
        let lvl = assemble_level(&p, &mesh, tau).unwrap();
        let b0 = lvl.stiff().first_col()[0];
        let h = mesh.h();
        assert!(rel(lvl.diag(), (2.0 * h / 3.0 / tau + 0.5 * b0) / h) < 1e-14);
        let mut e1 = vec![0.0; 31];
        e1[0] = 1.0;
        assert!(rel(lvl.apply(&e1).unwrap()[0], lvl.diag()) < 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let v: Vec<f64> = (0..31).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs = h * crate::dot(&lvl.apply(&v).unwrap(), &v);
            let rhs = lvl.mass().quadratic_form(&v).unwrap() / tau + 0.5 * lvl.stiff().quadratic_form(&v).unwrap();
            assert!(rel(lhs, rhs) < 1e-12);
        }
        assert!(assemble_level(&p, &mesh, 0.0).is_err());
    }

    #[test]
    fn load_vector_cases() {
        let mesh = unit_mesh(16);
        let h = mesh.h();
        let ones = load_vector(&mesh, |_| 1.0).unwrap();
        assert!(ones.iter().all(|v| (v - h).abs() < 1e-15));
        let k = 6;
        let xk = mesh.node(k);
        let hat = load_vector(&mesh, |x| (1.0 - (x - xk).abs() / h).max(0.0)).unwrap();
        let m = mass_symbol(&mesh);
        for (i, v) in hat.iter().enumerate() {
            assert!((v - m.get(i.abs_diff(k)).copied().unwrap_or(0.0)).abs() < 1e-15);
        }
        let pi = std::f64::consts::PI;
        let s = load_vector(&mesh, |x| (pi * x).sin()).unwrap();
        for (i, v) in s.iter().enumerate() {
            // ∫ sin(πx) φ_i = 2 sin(πx_i)(1 − cos(πh)) / (π² h)
            let want = 2.0 * (pi * mesh.node(i)).sin() * (1.0 - (pi * h).cos()) / (pi * pi * h);
            assert!(rel(*v, want) < 1e-9);
        }
        assert!(load_vector(&mesh, |_| f64::NAN).is_err());
    }

    #[test]
    fn l2_error_cases() {
        let mesh = unit_mesh(16);
        let zero = vec![0.0; 15];
        assert!((fe_l2_error(&mesh, &zero, |_, _| 1.0, 0.0).unwrap() - 1.0).abs() < 1e-14);
        let hat = interpolate(&mesh, |x| (1.0 - (x - 0.5).abs() * 16.0).max(0.0));
        let e = fe_l2_error(&mesh, &hat, |x, _| (1.0 - (x - 0.5).abs() * 16.0).max(0.0), 0.0).unwrap();
        assert!(e < 1e-15);
        let pinned = interpolate(&mesh, |x| x * (1.0 - x));
        let e = fe_l2_error(&mesh, &pinned, |x, _| x * (1.0 - x), 0.0).unwrap();
        // Interpolation error of x(1-x) is h² s(1-s) on every cell, L² norm h²/√30.
        assert!(rel(e, mesh.h().powi(2) / 30f64.sqrt()) < 1e-12);
        let pi = std::f64::consts::PI;
        let errs: Vec<f64> = [64, 128]
            .iter()
            .map(|&c| {
                let m = unit_mesh(c);
                fe_l2_error(&m, &interpolate(&m, |x| (pi * x).sin()), |x, _| (pi * x).sin(), 0.0).unwrap()
            })
            .collect();
        assert!((errs[0] / errs[1] - 4.0).abs() < 0.01);
    }

    #[test]
    fn example_problems() {
        let p = make_example1(1.1, 0.5, 32.0, 1.0).unwrap();
        assert!(rel(p.sigma, 3.0 * 0.5f64.powf(1.1) * kappa(1.1)) < 1e-15);
        let exact = p.exact.as_ref().unwrap();
        assert!(rel(exact(5.0, 0.0), (p.u0)(5.0)) < 1e-15);
        let p2 = make_example2(1.5, 0.5).unwrap();
        assert_eq!(p2.forcing.eval(0.3, 0.7), 0.0);
        assert_eq!((p2.u0)(0.5), 0.25);
        assert_eq!((p2.u0)(0.0), 0.0);
        assert_eq!((p2.u0)(1.0), 0.0);
        assert!(make_example2(2.0, 0.5).is_err());
        assert!(make_example1(1.5, -1.0, 32.0, 1.0).is_err());
    }

    #[test]
    fn exp_transform_round_trip() {
        let v = vec![1.0, -2.0, 3.5];
        assert_eq!(exp_transform(&v, 0.0, 3.0, Direction::ToP), v);
        assert_eq!(exp_transform(&v, 2.0, 0.0, Direction::ToU), v);
        let back = exp_transform(&exp_transform(&v, 1.7, 0.9, Direction::ToP), 1.7, 0.9, Direction::ToU);
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).abs() < 1e-15 * b.abs().max(1.0) * 2.0);
        }
    }

    #[test]
    fn stiffness_is_coercive_against_mass() {
        let p = make_example2(1.5, 1.0).unwrap();
        let mesh = unit_mesh(32);
        let b = SymToeplitz::new(stiffness_symbol(&p, &mesh).unwrap()).unwrap();
        let m = SymToeplitz::new(mass_symbol(&mesh)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let v: Vec<f64> = (0..31).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(b.quadratic_form(&v).unwrap() > 0.0);
            assert!(m.quadratic_form(&v).unwrap() > 0.0);
        }
    }
}
