use rayon::prelude::*;

use super::csv::CsvTable;
use super::noise::{gen_gaussian_sample, gen_poisson_sample, SampleStream, RNG_ID};
use super::{log_transform, measure_variance, FilterSpec, PreparedFilter};
use crate::error::{Error, Result};
use crate::filterbank::DEFAULT_BINS;
use crate::raster::{Raster, VrrMap};
use crate::svfilter::{RecursiveOptions, DEFAULT_MAX_ITER, DEFAULT_Q_MIN};
use crate::vrrmaps::vrr_from_counts;

/// Where the Test 1 ratio map comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum QSource {
    /// `q = v_n / v_T` with `v_n` measured on the realization being filtered.
    #[default]
    Measured,
    /// `q = n / v_T` from the generating variance.
    Expected,
}

/// Where the Test 2 ratio map comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CountSource {
    /// Uniform map from the generating mean `λ_k`.
    #[default]
    Expected,
    /// Per-pixel map from the noisy counts, floored at `log_floor`.
    PerPixel,
}

/// Gaussian variance-equalization experiment: sample `n` has variance `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Test1Config {
    pub n_samples: usize,
    pub sample_dim: usize,
    pub roi_dim: usize,
    pub v_target: f64,
    pub repeats: usize,
    pub seed: u64,
    pub filter: FilterSpec,
    pub q_source: QSource,
    pub bins: usize,
    pub q_min: f64,
    pub max_iter: usize,
}

impl Default for Test1Config {
    fn default() -> Self {
        Test1Config {
            n_samples: 200,
            sample_dim: 128,
            roi_dim: 100,
            v_target: 1.0,
            repeats: 100,
            seed: 0,
            filter: FilterSpec::Recursive { size: 3 },
            q_source: QSource::Measured,
            bins: DEFAULT_BINS,
            q_min: DEFAULT_Q_MIN,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

fn check_common(n_samples: usize, dim: usize, roi: usize, repeats: usize) -> Result<()> {
    if n_samples == 0 || repeats == 0 {
        return Err(Error::validation("n_samples and repeats must be at least 1"));
    }
    if roi == 0 || roi > dim {
        return Err(Error::validation(format!("ROI {roi} must be in 1..={dim}")));
    }
    Ok(())
}

impl Test1Config {
    pub fn validate(&self) -> Result<()> {
        check_common(self.n_samples, self.sample_dim, self.roi_dim, self.repeats)?;
        if !(self.v_target > 0.0 && self.v_target.is_finite()) {
            return Err(Error::validation(format!("v_T must be positive, got {}", self.v_target)));
        }
        Ok(())
    }

    fn options(&self) -> RecursiveOptions {
        RecursiveOptions {
            q_min: self.q_min,
            max_iter: self.max_iter,
            ..RecursiveOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Test1Record {
    pub sample_index: usize,
    pub v_expected: f64,
    pub v_measured_mean: f64,
    pub v_filtered_mean: f64,
    pub v_target: f64,
    /// Mean recursive pass count; 1 for the fixed engine.
    pub iterations_mean: f64,
}

struct Outcome {
    measured: f64,
    filtered: f64,
    iterations: usize,
    mean_raw: f64,
    mean_filtered: f64,
}

fn filter_once(filter: &PreparedFilter, f: &Raster, q: &VrrMap) -> Result<(Raster, usize)> {
    let (out, report) = filter.apply(f, q)?;
    Ok((out, report.map_or(1, |r| r.iterations_used)))
}

/// Runs every `(sample, repeat)` pair in parallel and returns outcomes in
/// sample-major order.
fn run_grid<F>(n_samples: usize, repeats: usize, job: F) -> Result<Vec<Vec<Outcome>>>
where
    F: Fn(usize, usize) -> Result<Outcome> + Sync,
{
    let flat = (0..n_samples * repeats)
        .into_par_iter()
        .map(|i| job(i / repeats, i % repeats))
        .collect::<Result<Vec<_>>>()?;
    let mut it = flat.into_iter();
    Ok((0..n_samples).map(|_| it.by_ref().take(repeats).collect()).collect())
}

fn mean_of(v: &[Outcome], f: impl Fn(&Outcome) -> f64) -> f64 {
    v.iter().map(f).sum::<f64>() / v.len() as f64
}

pub fn run_test1(cfg: &Test1Config) -> Result<(Vec<Test1Record>, CsvTable)> {
    cfg.validate()?;
    let filter = PreparedFilter::new(cfg.filter, cfg.bins, cfg.options())?;
    let dim = cfg.sample_dim;

    let grid = run_grid(cfg.n_samples, cfg.repeats, |s, r| {
        let n = s + 1;
        let mut stream = SampleStream::new(cfg.seed, SampleStream::index(n, r));
        let f = gen_gaussian_sample(dim, 0.0, n as f64, &mut stream)?;
        let measured = measure_variance(&f, cfg.roi_dim)?;
        let v_in = match cfg.q_source {
            QSource::Measured => measured,
            QSource::Expected => n as f64,
        };
        let q = VrrMap::uniform(dim, dim, v_in / cfg.v_target)?;
        let (out, iterations) = filter_once(&filter, &f, &q)?;
        Ok(Outcome {
            measured,
            filtered: measure_variance(&out, cfg.roi_dim)?,
            iterations,
            mean_raw: 0.0,
            mean_filtered: 0.0,
        })
    })?;

    let records: Vec<Test1Record> = grid
        .iter()
        .enumerate()
        .map(|(s, o)| Test1Record {
            sample_index: s + 1,
            v_expected: (s + 1) as f64,
            v_measured_mean: mean_of(o, |x| x.measured),
            v_filtered_mean: mean_of(o, |x| x.filtered),
            v_target: cfg.v_target,
            iterations_mean: mean_of(o, |x| x.iterations as f64),
        })
        .collect();

    let mut csv = CsvTable::new([
        "sample_index",
        "v_expected",
        "v_measured_mean",
        "v_filtered_mean",
        "v_target",
        "iterations_mean",
    ]);
    csv.meta("test", "gaussian")
        .meta("seed", cfg.seed)
        .meta("filter", cfg.filter)
        .meta("n_samples", cfg.n_samples)
        .meta("sample_dim", cfg.sample_dim)
        .meta("roi_dim", cfg.roi_dim)
        .meta("v_target", cfg.v_target)
        .meta("repeats", cfg.repeats)
        .meta("q_source", format!("{:?}", cfg.q_source).to_lowercase())
        .meta("bins", cfg.bins)
        .meta("q_min", cfg.q_min)
        .meta("max_iter", cfg.max_iter)
        .meta("rng", RNG_ID)
        .meta("version", env!("CARGO_PKG_VERSION"));
    for r in &records {
        csv.push_row(vec![
            r.sample_index.to_string(),
            r.v_expected.to_string(),
            r.v_measured_mean.to_string(),
            r.v_filtered_mean.to_string(),
            r.v_target.to_string(),
            r.iterations_mean.to_string(),
        ]);
    }
    Ok((records, csv))
}

/// Poisson after-log variance experiment: sample `k` has mean `λ_k`,
/// spaced linearly over `[lambda_min, lambda_max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Test2Config {
    pub n_samples: usize,
    pub sample_dim: usize,
    pub roi_dim: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// After-log target variance; `None` means `1 / lambda_max`.
    pub u_target: Option<f64>,
    /// Realizations averaged per sample.
    pub repeats: usize,
    pub seed: u64,
    pub filter: FilterSpec,
    pub count_source: CountSource,
    /// Counts are raised to this value before taking logs.
    pub log_floor: f64,
    pub bins: usize,
    pub q_min: f64,
    pub max_iter: usize,
}

impl Default for Test2Config {
    fn default() -> Self {
        Test2Config {
            n_samples: 100,
            sample_dim: 128,
            roi_dim: 100,
            lambda_min: 10.0,
            lambda_max: 1000.0,
            u_target: None,
            repeats: 1,
            seed: 0,
            filter: FilterSpec::Recursive { size: 3 },
            count_source: CountSource::Expected,
            log_floor: 0.5,
            bins: DEFAULT_BINS,
            q_min: DEFAULT_Q_MIN,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl Test2Config {
    pub fn validate(&self) -> Result<()> {
        check_common(self.n_samples, self.sample_dim, self.roi_dim, self.repeats)?;
        if !(self.lambda_min > 0.0 && self.lambda_min <= self.lambda_max && self.lambda_max.is_finite()) {
            return Err(Error::validation(format!(
                "need 0 < lambda_min <= lambda_max, got {} and {}",
                self.lambda_min, self.lambda_max
            )));
        }
        if !(self.u_target() > 0.0 && self.u_target().is_finite()) {
            return Err(Error::validation(format!("u_T must be positive, got {}", self.u_target())));
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return Err(Error::validation(format!("log floor must be positive, got {}", self.log_floor)));
        }
        Ok(())
    }

    pub fn u_target(&self) -> f64 {
        self.u_target.unwrap_or(1.0 / self.lambda_max)
    }

    /// Mean count of sample `k` (0-based).
    pub fn lambda(&self, k: usize) -> f64 {
        if self.n_samples == 1 {
            return self.lambda_min;
        }
        self.lambda_min + (self.lambda_max - self.lambda_min) * k as f64 / (self.n_samples - 1) as f64
    }

    fn options(&self) -> RecursiveOptions {
        RecursiveOptions {
            q_min: self.q_min,
            max_iter: self.max_iter,
            ..RecursiveOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Test2Record {
    pub k: usize,
    pub lambda: f64,
    pub u_expected: f64,
    pub u_measured: f64,
    pub u_filtered: f64,
    pub u_target: f64,
    /// Full-image pre-log means before and after filtering.
    pub mean_raw: f64,
    pub mean_filtered: f64,
    pub iterations_mean: f64,
}

pub fn run_test2(cfg: &Test2Config) -> Result<(Vec<Test2Record>, CsvTable)> {
    cfg.validate()?;
    let filter = PreparedFilter::new(cfg.filter, cfg.bins, cfg.options())?;
    let dim = cfg.sample_dim;
    let u_t = cfg.u_target();

    let grid = run_grid(cfg.n_samples, cfg.repeats, |k, r| {
        let lambda = cfg.lambda(k);
        let mut stream = SampleStream::new(cfg.seed, SampleStream::index(k, r));
        let counts = gen_poisson_sample(dim, lambda, &mut stream)?;
        let q = match cfg.count_source {
            CountSource::Expected => vrr_from_counts(&Raster::filled(dim, dim, lambda)?, u_t, None)?,
            CountSource::PerPixel => vrr_from_counts(&counts, u_t, Some(cfg.log_floor))?,
        };
        let (out, iterations) = filter_once(&filter, &counts, &q)?;
        Ok(Outcome {
            measured: measure_variance(&log_transform(&counts, cfg.log_floor), cfg.roi_dim)?,
            filtered: measure_variance(&log_transform(&out, cfg.log_floor), cfg.roi_dim)?,
            iterations,
            mean_raw: counts.mean(),
            mean_filtered: out.mean(),
        })
    })?;

    let records: Vec<Test2Record> = grid
        .iter()
        .enumerate()
        .map(|(k, o)| Test2Record {
            k,
            lambda: cfg.lambda(k),
            u_expected: 1.0 / cfg.lambda(k),
            u_measured: mean_of(o, |x| x.measured),
            u_filtered: mean_of(o, |x| x.filtered),
            u_target: u_t,
            mean_raw: mean_of(o, |x| x.mean_raw),
            mean_filtered: mean_of(o, |x| x.mean_filtered),
            iterations_mean: mean_of(o, |x| x.iterations as f64),
        })
        .collect();

    let mut csv = CsvTable::new([
        "k",
        "lambda",
        "u_expected",
        "u_measured",
        "u_filtered",
        "u_target",
        "mean_raw",
        "mean_filtered",
        "iterations_mean",
    ]);
    csv.meta("test", "poisson")
        .meta("seed", cfg.seed)
        .meta("filter", cfg.filter)
        .meta("n_samples", cfg.n_samples)
        .meta("sample_dim", cfg.sample_dim)
        .meta("roi_dim", cfg.roi_dim)
        .meta("lambda_min", cfg.lambda_min)
        .meta("lambda_max", cfg.lambda_max)
        .meta("u_target", u_t)
        .meta("repeats", cfg.repeats)
        .meta("count_source", format!("{:?}", cfg.count_source).to_lowercase())
        .meta("log_floor", cfg.log_floor)
        .meta("bins", cfg.bins)
        .meta("q_min", cfg.q_min)
        .meta("max_iter", cfg.max_iter)
        .meta("rng", RNG_ID)
        .meta("version", env!("CARGO_PKG_VERSION"));
    for r in &records {
        csv.push_row(
            [
                r.lambda,
                r.u_expected,
                r.u_measured,
                r.u_filtered,
                r.u_target,
                r.mean_raw,
                r.mean_filtered,
                r.iterations_mean,
            ]
            .iter()
            .fold(vec![r.k.to_string()], |mut row, v| {
                row.push(v.to_string());
                row
            }),
        );
    }
    Ok((records, csv))
}
