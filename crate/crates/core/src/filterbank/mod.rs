//! Precomputed atomic-kernel banks indexed linearly by VRP.
//!
//! A bank for pass `n` spans `[p_min⁽ⁿ⁾, p_max⁽ⁿ⁾]` with `N` uniformly spaced
//! bins. Bin `i` stores the plain atomic kernel `A_L(a_i)` whose VRP after
//! `n` prior box passes equals the bin's VRP. Selection is a single rounding
//! of the requested VRP to the nearest bin.

mod closed_form;
mod file;
mod lookup;

pub use closed_form::{a_from_p_closed, CLOSED_FORM_PASSES};
pub use file::{dump_bank, load_bank, read_bank, save_bank, write_bank, BANK_FORMAT_VERSION, BANK_MAGIC};
pub use lookup::{build_lookup_table, invert_vrp, VrpLookupTable, DEFAULT_LOOKUP_SAMPLES};

use crate::error::{Error, Result};
use crate::kernels::{atomic_kernel, p_max_at_iteration, p_min_at_iteration, Kernel2D};

/// Default number of bins per bank.
pub const DEFAULT_BINS: usize = 1024;

/// Pass index from which the recursive filter reuses the last built bank.
pub const DEFAULT_REUSE_FROM: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    half_width: usize,
    iteration: usize,
    p_min: f64,
    p_max: f64,
    a_values: Vec<f64>,
    kernels: Vec<Kernel2D>,
}

impl FilterBank {
    /// Assembles a bank from per-bin atomic parameters.
    pub fn from_a_values(
        half_width: usize,
        iteration: usize,
        p_min: f64,
        p_max: f64,
        a_values: Vec<f64>,
    ) -> Result<Self> {
        let kernels = a_values
            .iter()
            .map(|&a| atomic_kernel(a, half_width))
            .collect::<Result<Vec<_>>>()?;
        FilterBank::from_parts(half_width, iteration, p_min, p_max, a_values, kernels)
    }

    pub(crate) fn from_parts(
        half_width: usize,
        iteration: usize,
        p_min: f64,
        p_max: f64,
        a_values: Vec<f64>,
        kernels: Vec<Kernel2D>,
    ) -> Result<Self> {
        if kernels.len() < 2 || kernels.len() != a_values.len() {
            return Err(Error::validation(format!(
                "bank needs at least 2 bins with one a-value each, got {} kernels and {} a-values",
                kernels.len(),
                a_values.len()
            )));
        }
        if !(p_min >= 1.0 && p_max > p_min && p_max.is_finite()) {
            return Err(Error::validation(format!("invalid bank range [{p_min}, {p_max}]")));
        }
        if kernels.iter().any(|k| k.half_width() != half_width) {
            return Err(Error::validation("bank kernels disagree with the bank half-width"));
        }
        Ok(FilterBank {
            half_width,
            iteration,
            p_min,
            p_max,
            a_values,
            kernels,
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn kernel_size(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Pass index the bank was built for.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn bin_count(&self) -> usize {
        self.kernels.len()
    }

    pub fn kernels(&self) -> &[Kernel2D] {
        &self.kernels
    }

    pub fn a_values(&self) -> &[f64] {
        &self.a_values
    }

    /// Width of one bin in VRP units.
    pub fn bin_width(&self) -> f64 {
        (self.p_max - self.p_min) / (self.bin_count() - 1) as f64
    }

    /// Nominal VRP of bin `i`.
    pub fn bin_p(&self, i: usize) -> f64 {
        bin_p(self.p_min, self.p_max, self.bin_count(), i)
    }

    /// Bin nearest to `p`; values outside the range clamp to the ends.
    #[inline]
    pub fn select_index(&self, p: f64) -> usize {
        let last = self.bin_count() - 1;
        let pos = (p - self.p_min) / (self.p_max - self.p_min) * last as f64;
        if pos.is_nan() || pos <= 0.0 {
            0
        } else {
            (pos.round() as usize).min(last)
        }
    }

    #[inline]
    pub fn select_kernel(&self, p: f64) -> &Kernel2D {
        &self.kernels[self.select_index(p)]
    }
}

fn bin_p(p_min: f64, p_max: f64, bins: usize, i: usize) -> f64 {
    if i + 1 >= bins {
        p_max
    } else {
        p_min + i as f64 * (p_max - p_min) / (bins - 1) as f64
    }
}

fn check_bins(bins: usize) -> Result<()> {
    if bins >= 2 {
        Ok(())
    } else {
        Err(Error::domain(format!("a bank needs at least 2 bins, got {bins}")))
    }
}

/// Bank for pass `n`, inverting the sampled VRP curve numerically.
pub fn build_bank(half_width: usize, iteration: usize, bins: usize, samples: usize) -> Result<FilterBank> {
    check_bins(bins)?;
    let table = build_lookup_table(half_width, iteration, samples)?;
    let p_min = p_min_at_iteration(iteration, half_width)?.get();
    let p_max = p_max_at_iteration(iteration, half_width)?.get();
    let a_values = (0..bins)
        .map(|i| invert_vrp(&table, bin_p(p_min, p_max, bins, i)))
        .collect::<Result<Vec<_>>>()?;
    FilterBank::from_a_values(half_width, iteration, p_min, p_max, a_values)
}

/// 3x3 bank for pass `n ∈ {0, 1, 2}` from the closed-form inverses.
pub fn build_closed_form_bank(iteration: usize, bins: usize) -> Result<FilterBank> {
    check_bins(bins)?;
    let p_min = p_min_at_iteration(iteration, 1)?.get();
    let p_max = p_max_at_iteration(iteration, 1)?.get();
    let a_values = (0..bins)
        .map(|i| a_from_p_closed(bin_p(p_min, p_max, bins, i), iteration))
        .collect::<Result<Vec<_>>>()?;
    FilterBank::from_a_values(1, iteration, p_min, p_max, a_values)
}

/// Single-pass bank spanning `[1, K²]`.
pub fn build_fixed_bank(half_width: usize, bins: usize) -> Result<FilterBank> {
    build_bank(half_width, 0, bins, DEFAULT_LOOKUP_SAMPLES)
}

/// Banks for passes `0..=n_reuse`; later passes reuse the last one.
#[derive(Clone, Debug, PartialEq)]
pub struct RecursiveBankSet {
    half_width: usize,
    banks: Vec<FilterBank>,
}

impl RecursiveBankSet {
    /// `banks[n]` must have been built for pass `n`.
    pub fn new(banks: Vec<FilterBank>) -> Result<Self> {
        let first = banks
            .first()
            .ok_or_else(|| Error::validation("a bank set needs at least one bank"))?;
        let half_width = first.half_width();
        let bins = first.bin_count();
        for (n, b) in banks.iter().enumerate() {
            if b.iteration() != n {
                return Err(Error::validation(format!(
                    "bank {n} was built for pass {}",
                    b.iteration()
                )));
            }
            if b.half_width() != half_width || b.bin_count() != bins {
                return Err(Error::validation("banks in a set must share half-width and bin count"));
            }
        }
        Ok(RecursiveBankSet { half_width, banks })
    }

    /// Wraps a single pass-0 bank, e.g. for the fixed-size filter.
    pub fn single(bank: FilterBank) -> Result<Self> {
        RecursiveBankSet::new(vec![bank])
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn bin_count(&self) -> usize {
        self.banks[0].bin_count()
    }

    /// Last pass with its own bank.
    pub fn n_reuse(&self) -> usize {
        self.banks.len() - 1
    }

    pub fn banks(&self) -> &[FilterBank] {
        &self.banks
    }

    /// Bank used at pass `n`.
    pub fn bank_for(&self, n: usize) -> &FilterBank {
        &self.banks[n.min(self.n_reuse())]
    }

    /// Errors unless the set was built for kernels of half-width `half_width`.
    pub fn expect_half_width(&self, half_width: usize) -> Result<()> {
        if self.half_width == half_width {
            Ok(())
        } else {
            Err(Error::Metadata(format!(
                "bank holds {k}x{k} kernels (L={}), but L={half_width} was requested",
                self.half_width,
                k = 2 * self.half_width + 1
            )))
        }
    }
}

/// Banks for the recursive filter with the default reuse point.
pub fn build_recursive_banks(half_width: usize, bins: usize, use_closed_form: bool) -> Result<RecursiveBankSet> {
    build_recursive_banks_with(half_width, bins, use_closed_form, DEFAULT_REUSE_FROM, DEFAULT_LOOKUP_SAMPLES)
}

pub fn build_recursive_banks_with(
    half_width: usize,
    bins: usize,
    use_closed_form: bool,
    n_reuse: usize,
    samples: usize,
) -> Result<RecursiveBankSet> {
    if use_closed_form {
        if half_width != 1 {
            return Err(Error::domain(format!(
                "closed-form banks exist only for 3x3 kernels (L=1), got L={half_width}"
            )));
        }
        if n_reuse >= CLOSED_FORM_PASSES {
            return Err(Error::domain(format!(
                "closed-form banks cover passes 0..=2, cannot reuse from pass {n_reuse}"
            )));
        }
    }
    let banks = (0..=n_reuse)
        .map(|n| {
            if use_closed_form {
                build_closed_form_bank(n, bins)
            } else {
                build_bank(half_width, n, bins, samples)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    RecursiveBankSet::new(banks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{box_kernel, delta_kernel, vrp, vrp_iterated};

    fn max_abs_diff(a: &Kernel2D, b: &Kernel2D) -> f64 {
        a.coeffs()
            .iter()
            .zip(b.coeffs())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn fixed_11x11_bank() {
        let bank = build_fixed_bank(5, 121).unwrap();
        assert_eq!(bank.bin_count(), 121);
        assert_eq!(bank.p_min(), 1.0);
        assert!((bank.p_max() - 121.0).abs() < 1e-9);
        assert_eq!(bank.kernel_size(), 11);
    }

    #[test]
    fn endpoints_are_delta_and_box() {
        for l in 1..=3 {
            let bank = build_fixed_bank(l, 64).unwrap();
            assert!(max_abs_diff(&bank.kernels()[0], &delta_kernel(l)) < 1e-9);
            assert!(max_abs_diff(bank.kernels().last().unwrap(), &box_kernel(l)) < 1e-9);
        }
    }

    #[test]
    fn middle_bin_of_small_bank() {
        let bank = build_fixed_bank(1, 9).unwrap();
        assert_eq!(bank.bin_p(4), 5.0);
        assert!((vrp(&bank.kernels()[4]).get() - 5.0).abs() <= bank.bin_width() / 2.0);
    }

    #[test]
    fn recursive_ranges_3x3() {
        let set = build_recursive_banks(1, 256, false).unwrap();
        assert_eq!(set.n_reuse(), 2);
        assert!((set.banks()[0].p_max() - 9.0).abs() < 1e-12);
        assert!((set.banks()[1].p_min() - 9.0).abs() < 1e-12);
        assert!((set.banks()[1].p_max() - 18.174515).abs() < 1e-5);
        assert!(std::ptr::eq(set.bank_for(2), set.bank_for(7)));
    }

    #[test]
    fn closed_form_matches_numeric() {
        let numeric = build_recursive_banks(1, 1024, false).unwrap();
        let closed = build_recursive_banks(1, 1024, true).unwrap();
        for (bn, bc) in numeric.banks().iter().zip(closed.banks()) {
            for (a, b) in bn.a_values().iter().zip(bc.a_values()) {
                assert!((a - b).abs() < 1e-6, "pass {}: {a} vs {b}", bn.iteration());
            }
        }
    }

    #[test]
    fn closed_form_requires_3x3() {
        assert!(matches!(build_recursive_banks(2, 64, true), Err(Error::Domain(_))));
    }

    #[test]
    fn selection() {
        let bank = build_fixed_bank(1, 1024).unwrap();
        assert_eq!(bank.select_kernel(1.0), &bank.kernels()[0]);
        assert_eq!(bank.select_index(9.0), 1023);
        assert_eq!(bank.select_index(100.0), 1023);
        assert_eq!(bank.select_index(0.0), 0);
        let k = bank.select_kernel(5.0);
        assert!((vrp(k).get() - 5.0).abs() <= bank.bin_width() / 2.0);
    }

    #[test]
    fn bin_fidelity_for_iterated_banks() {
        for l in 1..=3 {
            let set = build_recursive_banks(l, 128, false).unwrap();
            for bank in set.banks() {
                for i in 0..bank.bin_count() {
                    let p = vrp_iterated(bank.a_values()[i], bank.iteration(), l).unwrap().get();
                    assert!((p - bank.bin_p(i)).abs() <= bank.bin_width(), "L={l} i={i}");
                }
            }
        }
    }

    #[test]
    fn half_width_check() {
        let set = build_recursive_banks(1, 16, true).unwrap();
        assert!(set.expect_half_width(1).is_ok());
        assert!(matches!(set.expect_half_width(2), Err(Error::Metadata(_))));
    }

    #[test]
    fn bank_set_validation() {
        let b0 = build_bank(1, 0, 16, 100).unwrap();
        let b2 = build_bank(1, 2, 16, 100).unwrap();
        assert!(RecursiveBankSet::new(vec![b0.clone(), b2]).is_err());
        assert!(RecursiveBankSet::new(vec![]).is_err());
        let other = build_bank(2, 1, 16, 100).unwrap();
        assert!(RecursiveBankSet::new(vec![b0, other]).is_err());
    }
}
