//! Kernel algebra: delta, box, Gaussian and atomic kernels, and the variance
//! reduction power (VRP) of normalized kernels, including the VRP a kernel
//! achieves after a number of prior box-filter passes.

use std::fmt;

use crate::error::{Error, Result};

/// Tolerance on `Σ c == 1` for a normalized kernel.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Variance reduction power of a normalized kernel, `V[ξ] / V[ξ * h]`.
///
/// Always at least 1; bounded above by `K²` for a single `K×K` kernel.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Vrp(f64);

impl Vrp {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p >= 1.0 {
            Ok(Vrp(p))
        } else {
            Err(Error::domain(format!("VRP must be a finite value >= 1, got {p}")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<Vrp> for f64 {
    fn from(p: Vrp) -> f64 {
        p.0
    }
}

impl fmt::Display for Vrp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Symmetric, non-negative 1D kernel of odd length `2L+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratingKernel1D {
    coeffs: Vec<f64>,
}

impl GeneratingKernel1D {
    /// Wraps a coefficient vector, checking length, symmetry and sign.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(Error::validation(format!(
                "generating kernel length must be odd, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::validation("generating kernel has a negative or non-finite entry"));
        }
        let n = coeffs.len();
        if (0..n / 2).any(|i| coeffs[i] != coeffs[n - 1 - i]) {
            return Err(Error::validation("generating kernel is not symmetric"));
        }
        if coeffs[n / 2] <= 0.0 {
            return Err(Error::validation("generating kernel center must be positive"));
        }
        Ok(GeneratingKernel1D { coeffs })
    }

    pub fn half_width(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Sum of coefficients (all are non-negative, so this is the ℓ1 norm).
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// VRP of the normalized self outer product `U⊗U / ‖U‖₁²`:
    /// `‖U‖₁⁴ / (Σ u²)²`.
    pub fn outer_vrp(&self) -> Vrp {
        let ratio = self.l1_norm().powi(2) / self.sum_of_squares();
        Vrp(ratio * ratio)
    }
}

/// Normalized `K×K` kernel (`K = 2L+1`), stored row-major.
///
/// Construction guarantees `Σ c == 1` (within [`NORMALIZATION_TOLERANCE`])
/// and `c >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel2D {
    half_width: usize,
    coeffs: Vec<f64>,
}

impl Kernel2D {
    /// Validates a row-major coefficient block against the normalization
    /// conditions.
    pub fn from_coeffs(half_width: usize, coeffs: Vec<f64>) -> Result<Self> {
        let size = 2 * half_width + 1;
        if coeffs.len() != size * size {
            return Err(Error::validation(format!(
                "kernel with half-width {half_width} needs {} coefficients, got {}",
                size * size,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::validation("kernel has a negative or non-finite coefficient"));
        }
        let sum: f64 = coeffs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::validation(format!("kernel is not normalized: sum = {sum}")));
        }
        Ok(Kernel2D { half_width, coeffs })
    }

    /// Normalized self outer product of a generating kernel.
    pub fn outer(u: &GeneratingKernel1D) -> Self {
        let norm = u.l1_norm();
        let norm_sq = norm * norm;
        let c = u.coeffs();
        let coeffs = c
            .iter()
            .flat_map(|&row| c.iter().map(move |&col| row * col / norm_sq))
            .collect();
        Kernel2D {
            half_width: u.half_width(),
            coeffs,
        }
    }

    #[inline]
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    #[inline]
    pub fn size(&self) -> usize {
        2 * self.half_width + 1
    }

    #[inline]
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient at offset `(dy, dx)`, both in `[-L, L]`.
    #[inline]
    pub fn at(&self, dy: isize, dx: isize) -> f64 {
        let l = self.half_width as isize;
        let k = self.size();
        self.coeffs[(dy + l) as usize * k + (dx + l) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    pub fn trace(&self) -> f64 {
        let k = self.size();
        (0..k).map(|i| self.coeffs[i * k + i]).sum()
    }
}

fn check_unit_interval(a: f64) -> Result<()> {
    if (0.0..=1.0).contains(&a) {
        Ok(())
    } else {
        Err(Error::domain(format!("atomic parameter a must lie in [0, 1], got {a}")))
    }
}

fn check_half_width(half_width: usize) -> Result<()> {
    if half_width >= 1 {
        Ok(())
    } else {
        Err(Error::domain("kernel half-width L must be at least 1"))
    }
}

/// Generator `U_L(a)[l] = a^(l²)` for `l ∈ [-L, L]`, unnormalized.
///
/// `0⁰` is taken as 1 so that `a = 0` yields the delta generator.
pub fn generating_kernel(a: f64, half_width: usize) -> Result<GeneratingKernel1D> {
    check_unit_interval(a)?;
    check_half_width(half_width)?;
    Ok(generator_unchecked(a, half_width))
}

fn generator_unchecked(a: f64, half_width: usize) -> GeneratingKernel1D {
    let l = half_width as i64;
    let coeffs = (-l..=l).map(|i| a.powi((i * i) as i32)).collect();
    GeneratingKernel1D { coeffs }
}

/// Normalized atomic kernel `U_L(a) ⊗ U_L(a) / ‖U_L(a)‖₁²`.
pub fn atomic_kernel(a: f64, half_width: usize) -> Result<Kernel2D> {
    Ok(Kernel2D::outer(&generating_kernel(a, half_width)?))
}

pub fn delta_kernel(half_width: usize) -> Kernel2D {
    let size = 2 * half_width + 1;
    let mut coeffs = vec![0.0; size * size];
    coeffs[size * size / 2] = 1.0;
    Kernel2D { half_width, coeffs }
}

pub fn box_kernel(half_width: usize) -> Kernel2D {
    let size = 2 * half_width + 1;
    let n = size * size;
    Kernel2D {
        half_width,
        coeffs: vec![1.0 / n as f64; n],
    }
}

/// Truncated Gaussian on `[-L, L]²`, normalized to unit sum.
pub fn gaussian_kernel(sigma: f64, half_width: usize) -> Result<Kernel2D> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    let l = half_width as i64;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let raw: Vec<f64> = (-l..=l)
        .flat_map(|y| (-l..=l).map(move |x| (-((x * x + y * y) as f64) * inv).exp()))
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(Kernel2D {
        half_width,
        coeffs: raw.into_iter().map(|c| c / total).collect(),
    })
}

/// Gaussian width equivalent to atomic parameter `a`: `1 / √(−2 ln a)`.
pub fn sigma_from_a(a: f64) -> Result<f64> {
    if a > 0.0 && a < 1.0 {
        Ok(1.0 / (-2.0 * a.ln()).sqrt())
    } else {
        Err(Error::domain(format!(
            "sigma is only defined for 0 < a < 1, got {a}"
        )))
    }
}

/// Inverse of [`sigma_from_a`]: `exp(−1 / (2σ²))`.
pub fn a_from_sigma(sigma: f64) -> Result<f64> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok((-1.0 / (2.0 * sigma * sigma)).exp())
    } else {
        Err(Error::domain(format!("sigma must be positive, got {sigma}")))
    }
}

/// VRP of a normalized kernel, `(Σ c²)⁻¹`.
pub fn vrp(k: &Kernel2D) -> Vrp {
    let sum_sq: f64 = k.coeffs().iter().map(|c| c * c).sum();
    Vrp(1.0 / sum_sq)
}

/// VRP from the kernel trace, `1 / trace(k)²`.
///
/// Only valid for normalized self-outer-product kernels (`U⊗U / ‖U‖₁²`),
/// which includes every delta, box and atomic kernel. For those,
/// `trace = Σ u² / ‖U‖₁²`, which is the square root of `Σ c²`.
pub fn vrp_trace(k: &Kernel2D) -> Vrp {
    let t = k.trace();
    Vrp(1.0 / (t * t))
}

/// VRP of the atomic kernel computed from its generator alone:
/// `(Σ a^(l²))⁴ / (Σ a^(2l²))²`.
pub fn vrp_atomic(a: f64, half_width: usize) -> Result<Vrp> {
    Ok(generating_kernel(a, half_width)?.outer_vrp())
}

fn convolve_full(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// 1D box of width `2L+1` convolved with itself `n` times, normalized.
///
/// `n = 0` returns the delta of length `2L+1`; otherwise the length is
/// `2nL+1`.
pub fn repeated_box_1d(n: usize, half_width: usize) -> Result<GeneratingKernel1D> {
    check_half_width(half_width)?;
    if n == 0 {
        let mut coeffs = vec![0.0; 2 * half_width + 1];
        coeffs[half_width] = 1.0;
        return Ok(GeneratingKernel1D { coeffs });
    }
    let size = 2 * half_width + 1;
    let unit = vec![1.0 / size as f64; size];
    let mut coeffs = unit.clone();
    for _ in 1..n {
        coeffs = convolve_full(&coeffs, &unit);
    }
    Ok(GeneratingKernel1D { coeffs })
}

/// Iterated generator `b_n¹ * U_L(a)` (full linear convolution).
pub fn iterated_generating(a: f64, n: usize, half_width: usize) -> Result<GeneratingKernel1D> {
    let u = generating_kernel(a, half_width)?;
    if n == 0 {
        return Ok(u);
    }
    let b = repeated_box_1d(n, half_width)?;
    Ok(GeneratingKernel1D {
        coeffs: convolve_full(b.coeffs(), u.coeffs()),
    })
}

/// Total VRP of `A_L(a)` applied after `n` box passes of the same size:
/// `‖U⁽ⁿ⁾‖₁⁴ / (Σ (u⁽ⁿ⁾)²)²`.
pub fn vrp_iterated(a: f64, n: usize, half_width: usize) -> Result<Vrp> {
    Ok(iterated_generating(a, n, half_width)?.outer_vrp())
}

/// Largest VRP reachable after pass `n` (i.e. `n+1` box passes).
pub fn p_max_at_iteration(n: usize, half_width: usize) -> Result<Vrp> {
    vrp_iterated(1.0, n, half_width)
}

/// Smallest VRP of the bank used at pass `n`; 1 for the first pass,
/// otherwise the maximum of the previous pass.
pub fn p_min_at_iteration(n: usize, half_width: usize) -> Result<Vrp> {
    check_half_width(half_width)?;
    match n {
        0 => Ok(Vrp(1.0)),
        _ => p_max_at_iteration(n - 1, half_width),
    }
}

/// Largest incremental VRP available at pass `n`.
pub fn r_max_at_iteration(n: usize, half_width: usize) -> Result<f64> {
    let hi = p_max_at_iteration(n, half_width)?.get();
    let lo = p_min_at_iteration(n, half_width)?.get();
    Ok(hi / lo)
}
