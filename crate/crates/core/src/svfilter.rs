//! Space-variant filtering engines.
//!
//! Both engines read a [`VrrMap`] and pick one bank kernel per pixel. Pixels
//! near the border see the image extended by edge replication.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filterbank::{FilterBank, RecursiveBankSet};
use crate::kernels::{generating_kernel, p_min_at_iteration, r_max_at_iteration, repeated_box_1d, Kernel2D};
use crate::raster::{Raster, VrrMap};

pub const DEFAULT_Q_MIN: f64 = 1.01;
pub const DEFAULT_MAX_ITER: usize = 64;

/// `Σ_j c_j f_{i−j}` at pixel `(x, y)` with replicate boundary.
///
/// Kernels are normalized, so the sum is evaluated as
/// `f_i + Σ_j c_j (f_{i−j} − f_i)`. Neighbourhoods that are exactly flat
/// then come back unchanged instead of picking up rounding from `Σ c_j`.
#[inline]
pub fn convolve_at(f: &Raster, x: usize, y: usize, k: &Kernel2D) -> f64 {
    let l = k.half_width();
    let size = k.size();
    let c = k.coeffs();
    let w = f.width();
    let center = f.get(x, y);
    let interior = x >= l && y >= l && x + l < w && y + l < f.height();
    let mut acc = 0.0;
    if interior {
        let v = f.values();
        match size {
            3 => return center + convolve_interior::<3>(v, w, x, y, c, center),
            5 => return center + convolve_interior::<5>(v, w, x, y, c, center),
            7 => return center + convolve_interior::<7>(v, w, x, y, c, center),
            _ => {}
        }
        for (ky, row) in c.chunks_exact(size).enumerate() {
            // c[ky][kx] multiplies f[y + l - ky][x + l - kx].
            let start = (y + l - ky) * w + x - l;
            let src = &v[start..start + size];
            for (&ck, &s) in row.iter().zip(src.iter().rev()) {
                acc += ck * (s - center);
            }
        }
    } else {
        let (xi, yi, li) = (x as isize, y as isize, l as isize);
        for (ky, row) in c.chunks_exact(size).enumerate() {
            let sy = yi + li - ky as isize;
            for (kx, &ck) in row.iter().enumerate() {
                acc += ck * (f.get_clamped(xi + li - kx as isize, sy) - center);
            }
        }
    }
    center + acc
}

/// Interior part of [`convolve_at`] with the kernel size fixed at compile
/// time, so the loops unroll. Summation order matches the generic path.
#[inline(always)]
fn convolve_interior<const K: usize>(v: &[f64], w: usize, x: usize, y: usize, c: &[f64], center: f64) -> f64 {
    let l = K / 2;
    let c = &c[..K * K];
    let mut acc = 0.0;
    for ky in 0..K {
        let start = (y + l - ky) * w + x - l;
        let src = &v[start..start + K];
        let row = &c[ky * K..ky * K + K];
        for kx in 0..K {
            acc += row[kx] * (src[K - 1 - kx] - center);
        }
    }
    acc
}

/// Convolves the whole raster with one kernel.
pub fn convolve(f: &Raster, k: &Kernel2D) -> Raster {
    let w = f.width();
    let mut out = vec![0.0; f.len()];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, v) in row.iter_mut().enumerate() {
            *v = convolve_at(f, x, y, k);
        }
    });
    Raster::from_parts(w, f.height(), out)
}

/// Single-pass filter; requested VRPs above the bank maximum saturate.
pub fn apply_fixed(f: &Raster, q: &VrrMap, bank: &FilterBank) -> Result<Raster> {
    f.check_shape(q)?;
    if bank.iteration() != 0 {
        return Err(Error::validation(format!(
            "the fixed-size filter needs a pass-0 bank, got a bank for pass {}",
            bank.iteration()
        )));
    }
    let w = f.width();
    let p_max = bank.p_max();
    let qv = q.values();
    let mut out = vec![0.0; f.len()];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, v) in row.iter_mut().enumerate() {
            let p = qv[y * w + x].min(p_max);
            *v = convolve_at(f, x, y, bank.select_kernel(p));
        }
    });
    Ok(Raster::from_parts(w, f.height(), out))
}

/// Order in which the recursive filter visits pixels within a pass.
///
/// Every pass reads only the previous pass's buffer, so the result does not
/// depend on the order.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum PixelOrder {
    /// Rows processed in parallel.
    #[default]
    Rows,
    /// Sequential visit in the given order of linear pixel indices. Must be a
    /// permutation of `0..width*height`.
    Custom(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecursiveOptions {
    /// Pixels whose residual ratio is at or below this value are done.
    pub q_min: f64,
    pub max_iter: usize,
    pub order: PixelOrder,
}

impl Default for RecursiveOptions {
    fn default() -> Self {
        RecursiveOptions {
            q_min: DEFAULT_Q_MIN,
            max_iter: DEFAULT_MAX_ITER,
            order: PixelOrder::Rows,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FilterReport {
    pub iterations_used: usize,
    /// Pixels still above `q_min` at the start of each pass.
    pub pixels_active_per_iteration: Vec<usize>,
    /// Largest residual ratio when the filter stopped.
    pub residual_q_max: f64,
    /// True when the filter stopped at `max_iter` with pixels still active.
    pub max_iter_reached: bool,
}

/// Autocorrelation `R(d) = Σ_i b_i b_{i+d}`, `d = 0..=2L`, of the 1D
/// repeated box `b_n`.
fn box_autocorrelation(n: usize, half_width: usize) -> Result<Vec<f64>> {
    let b = repeated_box_1d(n, half_width)?;
    let b = b.coeffs();
    Ok((0..=2 * half_width)
        .map(|d| b.iter().zip(b.iter().skip(d)).map(|(x, y)| x * y).sum())
        .collect())
}

/// VRP of `A_L(a)` after `n` box passes, from the box autocorrelation.
///
/// With `b_n` normalized, `‖b_n * U‖₁ = ‖U‖₁` and
/// `Σ (b_n * U)² = Σ_{j,k} U_j U_k R(|j − k|)`, so each bin costs `O(L²)`
/// instead of a full convolution.
fn iterated_vrp_from_acf(a: f64, half_width: usize, acf: &[f64]) -> Result<f64> {
    let u = generating_kernel(a, half_width)?;
    let u = u.coeffs();
    let mut sq = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        for (k, &uk) in u.iter().enumerate() {
            sq += uj * uk * acf[j.abs_diff(k)];
        }
    }
    let ratio = u.iter().sum::<f64>().powi(2) / sq;
    Ok(ratio * ratio)
}

/// Everything a pass needs to map a requested incremental ratio to a kernel.
struct PassPlan<'a> {
    bank: &'a FilterBank,
    r_max: f64,
    /// Incremental ratio each bin actually delivers at this pass.
    achieved: Vec<f64>,
}

impl<'a> PassPlan<'a> {
    fn new(banks: &'a RecursiveBankSet, n: usize) -> Result<Self> {
        let l = banks.half_width();
        let bank = banks.bank_for(n);
        let p_min = p_min_at_iteration(n, l)?.get();
        let acf = box_autocorrelation(n, l)?;
        let achieved = bank
            .a_values()
            .iter()
            .map(|&a| Ok(iterated_vrp_from_acf(a, l, &acf)? / p_min))
            .collect::<Result<Vec<_>>>()?;
        Ok(PassPlan {
            bank,
            r_max: r_max_at_iteration(n, l)?,
            achieved,
        })
    }

    /// Bin for incremental ratio `r ∈ (1, r_max]`.
    ///
    /// Position within the bank is `(r − 1)/(r_max − 1)`. For the pass the
    /// bank was built for this is exactly the bin of VRP `r · p_min`; reused
    /// banks are addressed by the same relative position. Bin 0 (delta) is
    /// skipped so every active pixel makes progress.
    #[inline]
    fn bin(&self, r: f64) -> usize {
        let b = self.bank;
        let p = b.p_min() + (r - 1.0) / (self.r_max - 1.0) * (b.p_max() - b.p_min());
        b.select_index(p).max(1)
    }

    #[inline]
    fn pixel(&self, prev: &Raster, x: usize, y: usize, q: f64, q_min: f64) -> (f64, f64) {
        if q <= q_min {
            return (prev.get(x, y), q);
        }
        let r = q.min(self.r_max);
        let i = self.bin(r);
        let value = convolve_at(prev, x, y, &self.bank.kernels()[i]);
        (value, q / self.achieved[i])
    }
}

/// Iterated small-kernel filter.
///
/// Pass `n` caps each pixel's incremental ratio at `r_max⁽ⁿ⁾`, convolves the
/// previous pass's output with the matching kernel and divides the pixel's
/// residual ratio by the ratio the chosen bin actually delivers. Passes stop
/// once every residual is at or below `q_min`, or after `max_iter` passes.
pub fn apply_recursive(
    f: &Raster,
    q: &VrrMap,
    banks: &RecursiveBankSet,
    opts: &RecursiveOptions,
) -> Result<(Raster, FilterReport)> {
    f.check_shape(q)?;
    if !(opts.q_min > 1.0 && opts.q_min.is_finite()) {
        return Err(Error::domain(format!("q_min must be > 1, got {}", opts.q_min)));
    }
    if let PixelOrder::Custom(order) = &opts.order {
        let mut seen = vec![false; f.len()];
        let valid = order.len() == f.len()
            && order.iter().all(|&i| i < seen.len() && !std::mem::replace(&mut seen[i], true));
        if !valid {
            return Err(Error::validation("custom pixel order is not a permutation of the raster"));
        }
    }

    let (w, h) = (f.width(), f.height());
    let mut current = f.clone();
    let mut residual = q.values().to_vec();
    let mut report = FilterReport::default();
    let mut n = 0;
    loop {
        let active = residual.iter().filter(|&&v| v > opts.q_min).count();
        if active == 0 {
            break;
        }
        if n == opts.max_iter {
            report.max_iter_reached = true;
            break;
        }
        report.pixels_active_per_iteration.push(active);

        let plan = PassPlan::new(banks, n)?;
        let mut next = vec![0.0; f.len()];
        let mut next_q = vec![0.0; f.len()];
        match &opts.order {
            PixelOrder::Rows => {
                next.par_chunks_mut(w)
                    .zip(next_q.par_chunks_mut(w))
                    .enumerate()
                    .for_each(|(y, (row, qrow))| {
                        for x in 0..w {
                            (row[x], qrow[x]) = plan.pixel(&current, x, y, residual[y * w + x], opts.q_min);
                        }
                    });
            }
            PixelOrder::Custom(order) => {
                for &i in order {
                    (next[i], next_q[i]) = plan.pixel(&current, i % w, i / w, residual[i], opts.q_min);
                }
            }
        }
        current = Raster::from_parts(w, h, next);
        residual = next_q;
        n += 1;
    }
    report.iterations_used = n;
    report.residual_q_max = residual.iter().copied().fold(1.0, f64::max);
    Ok((current, report))
}

/// Rough pass count from the linear growth of the maximum VRP:
/// `⌊q / K²⌋`.
pub fn estimate_iterations(q: f64, half_width: usize) -> usize {
    let k = (2 * half_width + 1) as f64;
    (q.max(1.0) / (k * k)).floor() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn autocorrelation_vrp_matches_direct() {
        for l in 1..=3 {
            for n in [0, 1, 2, 5, 13] {
                let acf = box_autocorrelation(n, l).unwrap();
                for a in [0.0, 0.1, 0.5, 0.9, 1.0] {
                    let direct = crate::kernels::vrp_iterated(a, n, l).unwrap().get();
                    let fast = iterated_vrp_from_acf(a, l, &acf).unwrap();
                    assert!((fast / direct - 1.0).abs() < 1e-12, "L={l} n={n} a={a}");
                }
            }
        }
    }
    use crate::filterbank::{build_fixed_bank, build_recursive_banks};
    use crate::kernels::{atomic_kernel, box_kernel, delta_kernel};

    fn noise(w: usize, h: usize, seed: u64) -> Raster {
        // Small LCG; statistical quality is irrelevant here.
        let mut s = seed;
        Raster::from_fn(w, h, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .unwrap()
    }

    #[test]
    fn delta_is_bit_exact_identity() {
        let f = noise(7, 5, 1);
        for l in 1..=3 {
            for y in 0..5 {
                for x in 0..7 {
                    assert_eq!(convolve_at(&f, x, y, &delta_kernel(l)).to_bits(), f.get(x, y).to_bits());
                }
            }
        }
    }

    #[test]
    fn constant_image_is_preserved() {
        let f = Raster::filled(6, 6, 3.25).unwrap();
        let k = atomic_kernel(0.7, 2).unwrap();
        for (x, y) in [(0, 0), (3, 3), (5, 2)] {
            assert_eq!(convolve_at(&f, x, y, &k), 3.25);
        }
    }

    #[test]
    fn box_at_center_of_3x3() {
        let f = Raster::new(3, 3, (1..=9).map(f64::from).collect()).unwrap();
        assert!((convolve_at(&f, 1, 1, &box_kernel(1)) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn replicate_boundary_matches_padded_reference() {
        let f = noise(5, 4, 9);
        let k = atomic_kernel(0.4, 2).unwrap();
        for y in 0..4 {
            for x in 0..5 {
                let mut reference = 0.0;
                for dy in -2isize..=2 {
                    for dx in -2isize..=2 {
                        reference += k.at(dy, dx) * f.get_clamped(x as isize - dx, y as isize - dy);
                    }
                }
                assert!((convolve_at(&f, x, y, &k) - reference).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn convolution_is_a_true_convolution() {
        // Asymmetric kernel: weight only at offset (0, 1) shifts the image right.
        let mut c = vec![0.0; 9];
        c[5] = 1.0;
        let k = Kernel2D::from_coeffs(1, c).unwrap();
        let f = noise(6, 3, 4);
        assert_eq!(convolve_at(&f, 3, 1, &k), f.get(2, 1));
    }

    #[test]
    fn fixed_identity_at_q_one() {
        let f = noise(16, 12, 3);
        let q = VrrMap::uniform(16, 12, 1.0).unwrap();
        let bank = build_fixed_bank(2, 64).unwrap();
        assert_eq!(apply_fixed(&f, &q, &bank).unwrap(), f);
    }

    #[test]
    fn fixed_rejects_mismatch_and_iterated_bank() {
        let f = noise(4, 4, 3);
        let bank = build_fixed_bank(1, 16).unwrap();
        let q = VrrMap::uniform(4, 5, 1.0).unwrap();
        assert!(matches!(apply_fixed(&f, &q, &bank), Err(Error::DimensionMismatch { .. })));
        let set = build_recursive_banks(1, 16, true).unwrap();
        let q = VrrMap::uniform(4, 4, 2.0).unwrap();
        assert!(apply_fixed(&f, &q, &set.banks()[1]).is_err());
    }

    #[test]
    fn recursive_identity_at_q_one() {
        let f = noise(9, 9, 5);
        let q = VrrMap::uniform(9, 9, 1.0).unwrap();
        let banks = build_recursive_banks(1, 64, true).unwrap();
        let (out, rep) = apply_recursive(&f, &q, &banks, &RecursiveOptions::default()).unwrap();
        assert_eq!(out, f);
        assert_eq!(rep.iterations_used, 0);
        assert!(rep.pixels_active_per_iteration.is_empty());
    }

    #[test]
    fn recursive_iteration_counts_on_table_boundaries() {
        let f = noise(8, 8, 6);
        let banks = build_recursive_banks(1, 1024, true).unwrap();
        for (q, expected) in [(9.0, 1), (18.2, 2), (26.8, 3)] {
            let qm = VrrMap::uniform(8, 8, q).unwrap();
            let (_, rep) = apply_recursive(&f, &qm, &banks, &RecursiveOptions::default()).unwrap();
            assert_eq!(rep.iterations_used, expected, "q={q}");
            assert!(rep.residual_q_max <= DEFAULT_Q_MIN);
        }
    }

    #[test]
    fn recursive_reports_exhaustion() {
        let f = noise(8, 8, 6);
        let banks = build_recursive_banks(1, 256, true).unwrap();
        let q = VrrMap::uniform(8, 8, 100.0).unwrap();
        let opts = RecursiveOptions {
            max_iter: 3,
            ..Default::default()
        };
        let (_, rep) = apply_recursive(&f, &q, &banks, &opts).unwrap();
        assert!(rep.max_iter_reached);
        assert_eq!(rep.iterations_used, 3);
        assert!(rep.residual_q_max > DEFAULT_Q_MIN);
    }

    #[test]
    fn recursive_rejects_bad_options() {
        let f = noise(4, 4, 1);
        let q = VrrMap::uniform(4, 4, 4.0).unwrap();
        let banks = build_recursive_banks(1, 16, true).unwrap();
        let bad_qmin = RecursiveOptions {
            q_min: 1.0,
            ..Default::default()
        };
        assert!(apply_recursive(&f, &q, &banks, &bad_qmin).is_err());
        let bad_order = RecursiveOptions {
            order: PixelOrder::Custom(vec![0; 16]),
            ..Default::default()
        };
        assert!(apply_recursive(&f, &q, &banks, &bad_order).is_err());
    }

    #[test]
    fn estimate_iterations_examples() {
        assert_eq!(estimate_iterations(100.0, 1), 11);
        assert_eq!(estimate_iterations(8.0, 1), 0);
        assert_eq!(estimate_iterations(50.0, 2), 2);
    }
}
