//! Synthetic experiments: noise generation, variance measurement, a
//! Monte-Carlo VRP oracle, the Gaussian and Poisson variance-targeting
//! tests, and the maximum-VRP tables.

mod csv;
mod experiments;
mod noise;
mod tables;

use std::fmt;
use std::str::FromStr;

pub use self::csv::CsvTable;
pub use experiments::{run_test1, run_test2, CountSource, QSource, Test1Config, Test1Record, Test2Config, Test2Record};
pub use noise::{gen_gaussian_sample, gen_poisson_sample, SampleStream, POISSON_INVERSION_LIMIT, RNG_ID};
pub use tables::{emit_tables, TableRow};

use crate::error::{Error, Result};
use crate::filterbank::{build_fixed_bank, build_recursive_banks, FilterBank, RecursiveBankSet, DEFAULT_BINS};
use crate::kernels::Kernel2D;
use crate::raster::{Raster, VrrMap};
use crate::svfilter::{apply_fixed, apply_recursive, convolve_at, FilterReport, RecursiveOptions};

/// Minimum number of output samples for [`monte_carlo_vrp`].
pub const MIN_MONTE_CARLO_TRIALS: usize = 100_000;

/// Which engine and kernel size an experiment uses, written `fixed:K` or
/// `recursive:K` with odd `K >= 3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterSpec {
    Fixed { size: usize },
    Recursive { size: usize },
}

impl FilterSpec {
    pub fn size(self) -> usize {
        match self {
            FilterSpec::Fixed { size } | FilterSpec::Recursive { size } => size,
        }
    }

    pub fn half_width(self) -> usize {
        self.size() / 2
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterSpec::Fixed { size } => write!(f, "fixed:{size}"),
            FilterSpec::Recursive { size } => write!(f, "recursive:{size}"),
        }
    }
}

impl FromStr for FilterSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, size) = s
            .split_once(':')
            .ok_or_else(|| Error::validation(format!("filter spec {s:?} is not of the form kind:size")))?;
        let size: usize = size
            .parse()
            .map_err(|_| Error::validation(format!("bad kernel size in {s:?}")))?;
        if size < 3 || size.is_multiple_of(2) {
            return Err(Error::validation(format!("kernel size must be odd and >= 3, got {size}")));
        }
        match kind {
            "fixed" => Ok(FilterSpec::Fixed { size }),
            "recursive" => Ok(FilterSpec::Recursive { size }),
            _ => Err(Error::validation(format!("unknown filter kind {kind:?}"))),
        }
    }
}

/// A filter with its banks built, ready to apply to many samples.
#[derive(Clone, Debug)]
pub enum PreparedFilter {
    Fixed(FilterBank),
    Recursive(RecursiveBankSet, RecursiveOptions),
}

impl PreparedFilter {
    /// Builds banks for `spec`. 3x3 recursive banks use the closed forms.
    pub fn new(spec: FilterSpec, bins: usize, opts: RecursiveOptions) -> Result<Self> {
        let l = spec.half_width();
        Ok(match spec {
            FilterSpec::Fixed { .. } => PreparedFilter::Fixed(build_fixed_bank(l, bins)?),
            FilterSpec::Recursive { .. } => {
                PreparedFilter::Recursive(build_recursive_banks(l, bins, l == 1)?, opts)
            }
        })
    }

    pub fn with_defaults(spec: FilterSpec) -> Result<Self> {
        PreparedFilter::new(spec, DEFAULT_BINS, RecursiveOptions::default())
    }

    pub fn apply(&self, f: &Raster, q: &VrrMap) -> Result<(Raster, Option<FilterReport>)> {
        match self {
            PreparedFilter::Fixed(bank) => Ok((apply_fixed(f, q, bank)?, None)),
            PreparedFilter::Recursive(banks, opts) => {
                let (out, rep) = apply_recursive(f, q, banks, opts)?;
                Ok((out, Some(rep)))
            }
        }
    }
}

/// Unbiased sample variance over the centered `roi × roi` block.
pub fn measure_variance(f: &Raster, roi: usize) -> Result<f64> {
    if roi < 1 || roi > f.width() || roi > f.height() || roi * roi < 2 {
        return Err(Error::validation(format!(
            "ROI {roi} does not fit a {}x{} raster (or has fewer than 2 samples)",
            f.width(),
            f.height()
        )));
    }
    let x0 = (f.width() - roi) / 2;
    let y0 = (f.height() - roi) / 2;
    let block = || (y0..y0 + roi).flat_map(move |y| (x0..x0 + roi).map(move |x| f.get(x, y)));
    let n = (roi * roi) as f64;
    let mean = block().sum::<f64>() / n;
    Ok(block().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Empirical VRP: variance of an iid unit-variance field divided by the
/// variance of its convolution with `k`, from `trials` output samples.
pub fn monte_carlo_vrp(k: &Kernel2D, trials: usize, stream: &mut SampleStream) -> Result<f64> {
    if trials < MIN_MONTE_CARLO_TRIALS {
        return Err(Error::domain(format!(
            "Monte-Carlo VRP needs at least {MIN_MONTE_CARLO_TRIALS} trials, got {trials}"
        )));
    }
    let side = (trials as f64).sqrt().ceil() as usize;
    let l = k.half_width();
    let dim = side + 2 * l;
    let field = gen_gaussian_sample(dim, 0.0, 1.0, stream)?;
    let outputs: Vec<f64> = (l..l + side)
        .flat_map(|y| (l..l + side).map(move |x| (x, y)))
        .map(|(x, y)| convolve_at(&field, x, y, k))
        .collect();
    let var = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    };
    Ok(var(field.values()) / var(&outputs))
}

/// Natural log with values raised to `floor` first.
pub fn log_transform(f: &Raster, floor: f64) -> Raster {
    f.map(|v| v.max(floor).ln())
        .expect("log of a positive floor is finite")
}
