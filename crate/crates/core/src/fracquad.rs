//! Gauss–Jacobi quadrature and pointwise fractional calculus.
//!
//! Rules integrate against the Jacobi weight `(1-x)^a (1+x)^b` on `[-1, 1]`.
//! Interior nodes come from the eigenvalues of the symmetric tridiagonal
//! Jacobi matrix, polished by Newton steps on the three-term recurrence;
//! weights use the closed-form Christoffel numbers. The Lobatto variant adds
//! both endpoints.
//!
//! Fractional derivatives of order `α ∈ (1, 2)` are evaluated in Caputo form,
//! i.e. with `u''` under the integral, which coincides with the
//! Riemann–Liouville derivative for functions that vanish together with their
//! first derivative at the base point.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use libm::tgamma as gamma;

use crate::{check_alpha, check_lambda, kappa, Error, Result};

/// Node order of the Lobatto rule used by the fractional derivatives.
pub const DEFAULT_DERIV_ORDER: usize = 100;
/// Node count of the interior Gauss–Jacobi rule used by fractional integrals.
pub const DEFAULT_INTEGRAL_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub a_exp: f64,
    pub b_exp: f64,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i f(x_i)`.
    pub fn sum<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Exact value of `∫_{-1}^{1} (1-x)^a (1+x)^b dx`.
    pub fn zeroth_moment(&self) -> f64 {
        jacobi_moment(self.a_exp, self.b_exp)
    }
}

/// `∫_{-1}^{1} (1-x)^a (1+x)^b dx = 2^{a+b+1} B(a+1, b+1)`.
pub fn jacobi_moment(a: f64, b: f64) -> f64 {
    2f64.powf(a + b + 1.0) * gamma(a + 1.0) * gamma(b + 1.0) / gamma(a + b + 2.0)
}

fn check_exponents(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && a > -1.0) {
        return Err(Error::invalid("a_exp", format!("{a} must be > -1")));
    }
    if !(b.is_finite() && b > -1.0) {
        return Err(Error::invalid("b_exp", format!("{b} must be > -1")));
    }
    Ok(())
}

/// `(P_n, P_{n-1})` of the Jacobi polynomials `P^{(a,b)}` at `x`.
fn jacobi_pair(n: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut prev = 1.0;
    let mut cur = 0.5 * ((a - b) + (a + b + 2.0) * x);
    for k in 1..n {
        let k = k as f64;
        let s = 2.0 * k + a + b;
        let c1 = 2.0 * (k + 1.0) * (k + a + b + 1.0) * s;
        let c2 = (s + 1.0) * ((s + 2.0) * s * x + a * a - b * b);
        let c3 = 2.0 * (k + a) * (k + b) * (s + 2.0);
        let next = (c2 * cur - c3 * prev) / c1;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// `(P_n(x), (1 - x²) P_n'(x))`.
fn jacobi_with_derivative(n: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    let (p, q) = jacobi_pair(n, a, b, x);
    let nf = n as f64;
    let s = 2.0 * nf + a + b;
    let dp = (nf * ((a - b) - s * x) * p + 2.0 * (nf + a) * (nf + b) * q) / s;
    (p, dp)
}

/// Interior Gauss–Jacobi rule with `count` nodes; exact for polynomials of
/// degree `≤ 2·count − 1` against the weight.
pub fn gauss_jacobi(a_exp: f64, b_exp: f64, count: usize) -> Result<QuadRule> {
    check_exponents(a_exp, b_exp)?;
    if count < 1 {
        return Err(Error::invalid("count", "at least one node is required"));
    }
    let (a, b) = (a_exp, b_exp);
    let n = count;

    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        diag[k] = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        if k + 1 < n {
            let j = kf + 1.0;
            let sj = 2.0 * j + a + b;
            let beta = if k == 0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b))
            } else {
                4.0 * j * (j + a) * (j + b) * (j + a + b) / (sj * sj * (sj + 1.0) * (sj - 1.0))
            };
            off[k] = beta.sqrt();
        }
    }
    let jac = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i == j {
            diag[i]
        } else if i + 1 == j {
            off[i]
        } else if j + 1 == i {
            off[j]
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    for x in nodes.iter_mut() {
        for _ in 0..8 {
            let (p, dp) = jacobi_with_derivative(n, a, b, *x);
            let denom = dp / (1.0 - *x * *x);
            if denom == 0.0 || !denom.is_finite() {
                break;
            }
            let step = p / denom;
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }

    // Christoffel numbers 1 / Σ_k p_k(x)² over the orthonormal polynomials;
    // every term is positive, so endpoint nodes keep full relative accuracy.
    let p0 = 1.0 / jacobi_moment(a, b).sqrt();
    let weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let (mut prev, mut cur) = (0.0, p0);
            let mut sum = cur * cur;
            for k in 0..n - 1 {
                let next = ((x - diag[k]) * cur - if k > 0 { off[k - 1] * prev } else { 0.0 }) / off[k];
                prev = cur;
                cur = next;
                sum += cur * cur;
            }
            1.0 / sum
        })
        .collect();

    if nodes.windows(2).any(|w| !(w[0] < w[1])) || weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Breakdown(format!("gauss_jacobi({a}, {b}, {count})")));
    }
    Ok(QuadRule { nodes, weights, a_exp, b_exp })
}

/// Gauss–Lobatto–Jacobi rule of order `order`: `order + 1` nodes including
/// both endpoints, exact for degree `≤ 2·order − 1` against the weight.
pub fn jacobi_gl(a_exp: f64, b_exp: f64, order: usize) -> Result<QuadRule> {
    check_exponents(a_exp, b_exp)?;
    if order < 1 {
        return Err(Error::invalid("order", "must be at least 1"));
    }
    let (a, b) = (a_exp, b_exp);
    let n = order;

    // Interior nodes are the zeros of P_{n-1}^{(a+1,b+1)}, and the interior
    // weights are the Gauss weights for (a+1, b+1) divided by 1 - x².
    let (inner_nodes, inner_weights) = if n >= 2 {
        let r = gauss_jacobi(a + 1.0, b + 1.0, n - 1)?;
        let w = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(x, w)| w / (1.0 - x * x))
            .collect();
        (r.nodes, w)
    } else {
        (Vec::new(), Vec::new())
    };

    // Endpoint weights from exactness on (1 ± x) ω(x)², with ω vanishing at
    // the interior nodes. The integrals are evaluated by Gauss rules whose
    // terms are all positive.
    let omega = |x: f64| jacobi_pair(n - 1, a + 1.0, b + 1.0, x).0;
    let right = gauss_jacobi(a, b + 1.0, n)?;
    let w_right = right.sum(|x| omega(x).powi(2)) / (2.0 * omega(1.0).powi(2));
    let left = gauss_jacobi(a + 1.0, b, n)?;
    let w_left = left.sum(|x| omega(x).powi(2)) / (2.0 * omega(-1.0).powi(2));

    let mut nodes = Vec::with_capacity(n + 1);
    let mut weights = Vec::with_capacity(n + 1);
    nodes.push(-1.0);
    weights.push(w_left);
    nodes.extend(inner_nodes);
    weights.extend(inner_weights);
    nodes.push(1.0);
    weights.push(w_right);
    Ok(QuadRule { nodes, weights, a_exp, b_exp })
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A `C²` function together with its first two derivatives.
#[derive(Clone)]
pub struct SmoothFn {
    value: RealFn,
    first: RealFn,
    second: RealFn,
}

impl std::fmt::Debug for SmoothFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SmoothFn")
    }
}

impl SmoothFn {
    pub fn new<V, D1, D2>(value: V, first: D1, second: D2) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D1: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            first: Arc::new(first),
            second: Arc::new(second),
        }
    }

    /// `Σ c_k x^k`.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        let c = Arc::new(coeffs);
        let (c0, c1, c2) = (c.clone(), c.clone(), c);
        let horner = |coeffs: &[f64], x: f64| coeffs.iter().rev().fold(0.0, |acc, &ck| acc * x + ck);
        Self::new(
            move |x| horner(&c0, x),
            move |x| {
                let d: Vec<f64> = c1.iter().enumerate().skip(1).map(|(k, ck)| k as f64 * ck).collect();
                horner(&d, x)
            },
            move |x| {
                let d: Vec<f64> = c2
                    .iter()
                    .enumerate()
                    .skip(2)
                    .map(|(k, ck)| (k * (k - 1)) as f64 * ck)
                    .collect();
                horner(&d, x)
            },
        )
    }

    /// `(x - a)^p` for `x ≥ a`, zero to the left.
    pub fn shifted_power(a: f64, p: f64) -> Self {
        let pos = move |x: f64| (x - a).max(0.0);
        Self::new(
            move |x| pos(x).powf(p),
            move |x| p * pos(x).powf(p - 1.0),
            move |x| p * (p - 1.0) * pos(x).powf(p - 2.0),
        )
    }

    /// `x ↦ u(c - x)`.
    pub fn reflect(&self, c: f64) -> Self {
        let (v, d1, d2) = (self.value.clone(), self.first.clone(), self.second.clone());
        Self::new(move |x| v(c - x), move |x| -d1(c - x), move |x| d2(c - x))
    }

    /// `x ↦ s·u(x)`.
    pub fn scale(&self, s: f64) -> Self {
        let (v, d1, d2) = (self.value.clone(), self.first.clone(), self.second.clone());
        Self::new(move |x| s * v(x), move |x| s * d1(x), move |x| s * d2(x))
    }

    /// `x ↦ u(x) + w(x)`.
    pub fn add(&self, other: &SmoothFn) -> Self {
        let (v, d1, d2) = (self.value.clone(), self.first.clone(), self.second.clone());
        let (w, e1, e2) = (other.value.clone(), other.first.clone(), other.second.clone());
        Self::new(move |x| v(x) + w(x), move |x| d1(x) + e1(x), move |x| d2(x) + e2(x))
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    pub fn first(&self, x: f64) -> f64 {
        (self.first)(x)
    }

    pub fn second(&self, x: f64) -> f64 {
        (self.second)(x)
    }

    pub fn value_fn(&self) -> RealFn {
        self.value.clone()
    }

    /// Largest relative mismatch between the stored derivatives and central
    /// differences of the lower-order ones.
    pub fn derivative_mismatch(&self, points: &[f64], step: f64) -> f64 {
        let rel = |got: f64, want: f64| (got - want).abs() / want.abs().max(got.abs()).max(1e-12);
        points
            .iter()
            .map(|&x| {
                let fd1 = (self.value(x + step) - self.value(x - step)) / (2.0 * step);
                let fd2 = (self.first(x + step) - self.first(x - step)) / (2.0 * step);
                rel(self.first(x), fd1).max(rel(self.second(x), fd2))
            })
            .fold(0.0, f64::max)
    }
}

/// Pointwise fractional derivatives of order `α ∈ (1, 2)` by mapped
/// Gauss–Lobatto–Jacobi sums.
///
/// The rules depend only on `α` and the order, so one instance serves any
/// number of evaluations.
#[derive(Debug, Clone)]
pub struct FractionalDerivative {
    alpha: f64,
    left_rule: QuadRule,
    right_rule: QuadRule,
    inv_gamma: f64,
}

impl FractionalDerivative {
    pub fn new(alpha: f64, order: usize) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            left_rule: jacobi_gl(1.0 - alpha, 0.0, order)?,
            right_rule: jacobi_gl(0.0, 1.0 - alpha, order)?,
            inv_gamma: 1.0 / gamma(2.0 - alpha),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `(1/Γ(2-α)) ((x-a)/2)^{2-α} Σ w_i g(ξ_i)` with `ξ_i` mapped from `[-1, 1]` to `[a, x]`.
    fn left_sum<G: Fn(f64) -> f64>(&self, a: f64, x: f64, g: G) -> Result<f64> {
        if !(x > a) {
            return Err(Error::OutOfDomain { x, range: format!("({a}, ∞)") });
        }
        let half = 0.5 * (x - a);
        let mid = 0.5 * (x + a);
        let s = self.left_rule.sum(|z| g(half * z + mid));
        Ok(self.inv_gamma * half.powf(2.0 - self.alpha) * s)
    }

    fn right_sum<G: Fn(f64) -> f64>(&self, b: f64, x: f64, g: G) -> Result<f64> {
        if !(x < b) {
            return Err(Error::OutOfDomain { x, range: format!("(-∞, {b})") });
        }
        let half = 0.5 * (b - x);
        let mid = 0.5 * (b + x);
        let s = self.right_rule.sum(|z| g(half * z + mid));
        Ok(self.inv_gamma * half.powf(2.0 - self.alpha) * s)
    }

    /// Left Riemann–Liouville derivative `ₐD_x^α u(x)`.
    pub fn left(&self, u: &SmoothFn, a: f64, x: f64) -> Result<f64> {
        self.left_sum(a, x, |xi| u.second(xi))
    }

    /// Right Riemann–Liouville derivative `ₓD_b^α u(x)`.
    pub fn right(&self, u: &SmoothFn, b: f64, x: f64) -> Result<f64> {
        self.right_sum(b, x, |xi| u.second(xi))
    }

    /// `e^{-λx} ₐD_x^α [e^{λx} u](x)`.
    pub fn tempered_left(&self, u: &SmoothFn, lambda: f64, a: f64, x: f64) -> Result<f64> {
        check_lambda(lambda)?;
        // e^{-λx} (e^{λξ}u)'' = e^{-λ(x-ξ)} (u'' + 2λu' + λ²u)
        self.left_sum(a, x, |xi| {
            (-lambda * (x - xi)).exp()
                * (u.second(xi) + 2.0 * lambda * u.first(xi) + lambda * lambda * u.value(xi))
        })
    }

    /// `e^{λx} ₓD_b^α [e^{-λx} u](x)`.
    pub fn tempered_right(&self, u: &SmoothFn, lambda: f64, b: f64, x: f64) -> Result<f64> {
        check_lambda(lambda)?;
        self.right_sum(b, x, |xi| {
            (-lambda * (xi - x)).exp()
                * (u.second(xi) - 2.0 * lambda * u.first(xi) + lambda * lambda * u.value(xi))
        })
    }

    /// Riesz tempered derivative `κ_α [ₐ𝔻ₓ^{α,λ} + ₓ𝔻_b^{α,λ}] u(x)`.
    ///
    /// The first-derivative corrections of the two one-sided operators cancel,
    /// leaving `κ_α [ₐDₓ^{α,λ}u + ₓD_b^{α,λ}u − 2λ^α u]`.
    pub fn riesz(&self, u: &SmoothFn, lambda: f64, a: f64, b: f64, x: f64) -> Result<f64> {
        if !(x > a && x < b) {
            return Err(Error::OutOfDomain { x, range: format!("({a}, {b})") });
        }
        let l = self.tempered_left(u, lambda, a, x)?;
        let r = self.tempered_right(u, lambda, b, x)?;
        Ok(kappa(self.alpha) * (l + r - 2.0 * lambda.powf(self.alpha) * u.value(x)))
    }
}

pub fn rl_left_deriv(u: &SmoothFn, alpha: f64, a: f64, x: f64) -> Result<f64> {
    FractionalDerivative::new(alpha, DEFAULT_DERIV_ORDER)?.left(u, a, x)
}

pub fn rl_right_deriv(u: &SmoothFn, alpha: f64, b: f64, x: f64) -> Result<f64> {
    FractionalDerivative::new(alpha, DEFAULT_DERIV_ORDER)?.right(u, b, x)
}

pub fn tempered_left_deriv(u: &SmoothFn, alpha: f64, lambda: f64, a: f64, x: f64) -> Result<f64> {
    FractionalDerivative::new(alpha, DEFAULT_DERIV_ORDER)?.tempered_left(u, lambda, a, x)
}

pub fn tempered_right_deriv(u: &SmoothFn, alpha: f64, lambda: f64, b: f64, x: f64) -> Result<f64> {
    FractionalDerivative::new(alpha, DEFAULT_DERIV_ORDER)?.tempered_right(u, lambda, b, x)
}

pub fn riesz_apply(u: &SmoothFn, alpha: f64, lambda: f64, a: f64, b: f64, x: f64) -> Result<f64> {
    FractionalDerivative::new(alpha, DEFAULT_DERIV_ORDER)?.riesz(u, lambda, a, b, x)
}

/// First-order tempered derivative `e^{-λx} d/dx (e^{λx} u) = u' + λu`.
pub fn tempered_first_derivative(u: &SmoothFn, lambda: f64, x: f64) -> f64 {
    u.first(x) + lambda * u.value(x)
}

/// Tempered Riemann–Liouville integrals of order `ν > 0`,
/// `(1/Γ(ν)) ∫ e^{-λ|x-ξ|} |x-ξ|^{ν-1} u(ξ) dξ`.
///
/// The integration range is split into `panels` equal pieces; the piece
/// touching `x` uses a Gauss–Jacobi rule with endpoint exponent `ν − 1`, the
/// rest plain Gauss–Legendre.
#[derive(Debug, Clone)]
pub struct TemperedIntegral {
    nu: f64,
    singular: QuadRule,
    smooth: QuadRule,
    panels: usize,
    inv_gamma: f64,
}

impl TemperedIntegral {
    pub fn new(nu: f64, nodes: usize, panels: usize) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::invalid("nu", format!("{nu} must be > 0")));
        }
        if panels < 1 {
            return Err(Error::invalid("panels", "must be at least 1"));
        }
        Ok(Self {
            nu,
            singular: gauss_jacobi(nu - 1.0, 0.0, nodes)?,
            smooth: gauss_jacobi(0.0, 0.0, nodes)?,
            panels,
            inv_gamma: 1.0 / gamma(nu),
        })
    }

    /// `∫_0^{len} e^{-λs} s^{ν-1} g(s) ds` split into panels.
    fn distance_integral<G: Fn(f64) -> f64>(&self, lambda: f64, len: f64, g: G) -> f64 {
        let width = len / self.panels as f64;
        let half = 0.5 * width;
        // Singular panel [0, width]: s = half (1 - z), weight (1 - z)^{ν-1}.
        let mut total = half.powf(self.nu)
            * self.singular.sum(|z| {
                let s = half * (1.0 - z);
                (-lambda * s).exp() * g(s)
            });
        for p in 1..self.panels {
            let lo = p as f64 * width;
            total += half
                * self.smooth.sum(|z| {
                    let s = lo + half * (1.0 + z);
                    (-lambda * s).exp() * s.powf(self.nu - 1.0) * g(s)
                });
        }
        total
    }

    /// Left integral `ₐD_x^{-ν,λ} u(x)`.
    pub fn left<U: Fn(f64) -> f64>(&self, u: U, lambda: f64, a: f64, x: f64) -> Result<f64> {
        check_lambda(lambda)?;
        if !(x >= a) {
            return Err(Error::OutOfDomain { x, range: format!("[{a}, ∞)") });
        }
        if x == a {
            return Ok(0.0);
        }
        Ok(self.inv_gamma * self.distance_integral(lambda, x - a, |s| u(x - s)))
    }

    /// Right integral `ₓD_b^{-ν,λ} u(x)`.
    pub fn right<U: Fn(f64) -> f64>(&self, u: U, lambda: f64, b: f64, x: f64) -> Result<f64> {
        check_lambda(lambda)?;
        if !(x <= b) {
            return Err(Error::OutOfDomain { x, range: format!("(-∞, {b}]") });
        }
        if x == b {
            return Ok(0.0);
        }
        Ok(self.inv_gamma * self.distance_integral(lambda, b - x, |s| u(x + s)))
    }
}

pub fn tempered_left_integral<U: Fn(f64) -> f64>(u: U, nu: f64, lambda: f64, a: f64, x: f64) -> Result<f64> {
    TemperedIntegral::new(nu, DEFAULT_INTEGRAL_NODES, 1)?.left(u, lambda, a, x)
}

pub fn tempered_right_integral<U: Fn(f64) -> f64>(u: U, nu: f64, lambda: f64, b: f64, x: f64) -> Result<f64> {
    TemperedIntegral::new(nu, DEFAULT_INTEGRAL_NODES, 1)?.right(u, lambda, b, x)
}

/// Forcing of the manufactured problem with exact solution
/// `u(x,t) = e^{-t} x² (1 - x/b)²` on `(0, b)` and `σ = 3λ^α κ_α`.
///
/// `f(x,t) = e^{-t} F(x)` with
/// `F = -w (1 - 5λ^α κ_α) - κ_α (ₐDₓ^{α,λ} w + ₓD_b^{α,λ} w)`.
#[derive(Debug, Clone)]
pub struct Example1Forcing {
    deriv: FractionalDerivative,
    lambda: f64,
    b: f64,
    w: SmoothFn,
}

impl Example1Forcing {
    pub fn exact_profile(b: f64) -> SmoothFn {
        SmoothFn::polynomial(vec![0.0, 0.0, 1.0, -2.0 / b, 1.0 / (b * b)])
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        Ok((-t).exp() * self.spatial(x)?)
    }

    /// `F(x) = f(x, 0)`.
    pub fn spatial(&self, x: f64) -> Result<f64> {
        let alpha = self.deriv.alpha();
        let k = kappa(alpha);
        let la = self.lambda.powf(alpha);
        let w = self.w.value(x);
        let dl = self.deriv.tempered_left(&self.w, self.lambda, 0.0, x)?;
        let dr = self.deriv.tempered_right(&self.w, self.lambda, self.b, x)?;
        Ok(-w * (1.0 - 5.0 * la * k) - k * (dl + dr))
    }
}

pub fn example1_forcing(alpha: f64, lambda: f64, a: f64, b: f64) -> Result<Example1Forcing> {
    example1_forcing_with_order(alpha, lambda, a, b, DEFAULT_DERIV_ORDER)
}

pub fn example1_forcing_with_order(
    alpha: f64,
    lambda: f64,
    a: f64,
    b: f64,
    order: usize,
) -> Result<Example1Forcing> {
    if a != 0.0 {
        return Err(Error::invalid("a", "the manufactured solution is defined for a = 0"));
    }
    if !(b > 0.0) {
        return Err(Error::invalid("b", "must be positive"));
    }
    check_lambda(lambda)?;
    Ok(Example1Forcing {
        deriv: FractionalDerivative::new(alpha, order)?,
        lambda,
        b,
        w: Example1Forcing::exact_profile(b),
    })
}
