//! Multigrid finite element solver for the time-dependent Riesz tempered
//! fractional diffusion equation
//!
//! ```text
//! u_t - κ_α [ ₐ𝔻ₓ^{α,λ} + ₓ𝔻_b^{α,λ} ] u + σ u = f   in (a, b) × (0, T]
//! ```
//!
//! discretized with linear finite elements on a uniform grid and
//! Crank–Nicolson in time. Every matrix in the discretization is a symmetric
//! Toeplitz matrix, applied in `O(n log n)` through a circulant embedding.
//!
//! Module map:
//!
//! * [`toeplitz`]: symmetric Toeplitz operators, dense oracles, power iteration.
//! * [`fracquad`]: Gauss–Jacobi quadrature and pointwise (tempered) fractional
//!   derivatives and integrals.
//! * [`assembly`]: meshes, mass/stiffness symbols, level operators, problems.
//! * [`multigrid`]: hierarchy, transfer operators, Jacobi smoother, V-cycle.
//! * [`timestep`]: Crank–Nicolson marching and convergence studies.
//! * [`diagnostics`]: mesh-dependent norms and numerical checks of the
//!   theoretical properties the solver relies on.

pub mod assembly;
pub mod diagnostics;
pub mod error;
pub mod fracquad;
pub mod multigrid;
pub mod timestep;
pub mod toeplitz;

pub use error::{Error, Result};

/// Normalization constant `κ_α = -1 / (2 cos(απ/2))`, positive for `α ∈ (1, 2)`.
pub fn kappa(alpha: f64) -> f64 {
    -1.0 / (2.0 * (alpha * std::f64::consts::FRAC_PI_2).cos())
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 1.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::invalid("alpha", format!("{alpha} is not in (1, 2)")))
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("lambda", format!("{lambda} must be finite and >= 0")))
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Applies `f` to every item on up to `threads` scoped workers, keeping input order.
pub(crate) fn parallel_map<T, R, F>(items: &[T], threads: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: std::sync::Mutex<Vec<Option<Result<R>>>> = std::sync::Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every job ran")).collect()
}
