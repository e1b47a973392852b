use anyhow::{bail, Context, Result};
use varfilt::filterbank::{
    build_fixed_bank, build_recursive_banks, dump_bank, load_bank, save_bank, RecursiveBankSet,
};
use varfilt::harness::{
    emit_tables, log_transform, run_test1, run_test2, CountSource, CsvTable, QSource, Test1Config, Test2Config,
};
use varfilt::rasterio::{read_fraw, ValueKind};
use varfilt::svfilter::{apply_fixed, apply_recursive, FilterReport, RecursiveOptions};
use varfilt::vrrmaps::{blend, vrr_from_counts, vrr_from_edges, vrr_from_variance};
use varfilt::{EdgeMode, EdgeVrrConfig, VrrMap};

use crate::args::*;
use crate::output::{read_raster_kind, write_raster, write_text, Meta, StoredAs};

fn output_kind(stored: StoredAs) -> ValueKind {
    match stored {
        StoredAs::Fraw(kind) => kind,
        StoredAs::Pgm => ValueKind::F64,
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Fixed => "fixed",
        Mode::Recursive => "recursive",
    }
}

pub fn bank_build(a: &BankBuildArgs) -> Result<()> {
    let set = match a.mode {
        Mode::Fixed => {
            if a.closed_form {
                bail!(varfilt::Error::Validation("--closed-form applies to recursive banks only".into()));
            }
            RecursiveBankSet::single(build_fixed_bank(a.half_width, a.bins)?)?
        }
        Mode::Recursive => build_recursive_banks(a.half_width, a.bins, a.closed_form)?,
    };
    save_bank(&set, &a.out)?;
    Meta::new("bank build")
        .set("L", a.half_width)
        .set("mode", mode_name(a.mode))
        .set("bins", a.bins)
        .set("closed_form", a.closed_form)
        .set("banks", set.banks().len())
        .set_path("out", &a.out)
        .write_for(&a.out)
}

pub fn bank_dump(a: &BankDumpArgs) -> Result<()> {
    let set = load_bank(&a.input)?;
    write_text(&dump_bank(&set), None)
}

pub fn tables(a: &TablesArgs) -> Result<()> {
    let (_, csv) = emit_tables(&a.half_widths, a.iters)?;
    write_csv(&csv, a.out.as_deref())?;
    if let Some(out) = &a.out {
        let ls: Vec<String> = a.half_widths.iter().map(ToString::to_string).collect();
        Meta::new("tables")
            .set("L", ls.join(","))
            .set("iters", a.iters)
            .set_path("out", out)
            .write_for(out)?;
    }
    Ok(())
}

fn write_csv(csv: &CsvTable, out: Option<&std::path::Path>) -> Result<()> {
    write_text(&csv.render(), out)
}

fn recursive_options(q_min: f64, max_iter: usize) -> RecursiveOptions {
    RecursiveOptions {
        q_min,
        max_iter,
        ..RecursiveOptions::default()
    }
}

fn report_csv(report: &FilterReport) -> CsvTable {
    let mut csv = CsvTable::new(["iteration", "active_pixels"]);
    csv.meta("iterations_used", report.iterations_used)
        .meta("residual_q_max", report.residual_q_max)
        .meta("max_iter_reached", report.max_iter_reached);
    for (i, n) in report.pixels_active_per_iteration.iter().enumerate() {
        csv.push_row(vec![(i + 1).to_string(), n.to_string()]);
    }
    csv
}

pub fn filter(a: &FilterArgs) -> Result<()> {
    let (f, stored) = read_raster_kind(&a.input)?;
    let q = VrrMap::from_raster(&read_fraw(&a.q)?)?;
    let banks = match &a.bank {
        Some(path) => {
            let set = load_bank(path)?;
            set.expect_half_width(a.half_width)?;
            Some(set)
        }
        None => None,
    };

    let (mut out, report) = match a.mode {
        Mode::Fixed => {
            let bank = match &banks {
                Some(set) => set.bank_for(0).clone(),
                None => build_fixed_bank(a.half_width, a.bins)?,
            };
            (apply_fixed(&f, &q, &bank)?, None)
        }
        Mode::Recursive => {
            let set = match banks {
                Some(set) => set,
                None => build_recursive_banks(a.half_width, a.bins, a.half_width == 1)?,
            };
            let (out, rep) = apply_recursive(&f, &q, &set, &recursive_options(a.q_min, a.max_iter))?;
            (out, Some(rep))
        }
    };
    if a.log_after {
        if a.log_floor.is_nan() || a.log_floor <= 0.0 {
            bail!(varfilt::Error::Validation(format!("--log-floor must be positive, got {}", a.log_floor)));
        }
        out = log_transform(&out, a.log_floor);
    }
    write_raster(&out, &a.out, output_kind(stored))?;

    if let (Some(path), Some(rep)) = (&a.report, &report) {
        write_csv(&report_csv(rep), Some(path))?;
    }
    let mut meta = Meta::new("filter");
    meta.set_path("in", &a.input)
        .set_path("q", &a.q)
        .set("mode", mode_name(a.mode))
        .set("L", a.half_width)
        .set("q_min", a.q_min)
        .set("max_iter", a.max_iter)
        .set("bins", a.bins)
        .set_opt("bank", &a.bank.as_ref().map(|p| p.display()))
        .set("log_after", a.log_after)
        .set("log_floor", a.log_floor)
        .set("clamped_q", q.clamped_count())
        .set_path("out", &a.out);
    if let Some(rep) = &report {
        meta.set("iterations_used", rep.iterations_used)
            .set("max_iter_reached", rep.max_iter_reached);
    }
    meta.write_for(&a.out)
}

pub fn vrr_variance(a: &VrrVarianceArgs) -> Result<()> {
    let (v, _) = read_raster_kind(&a.input)?;
    let q = vrr_from_variance(&v, a.target)?;
    write_raster(&q.to_raster(), &a.out, ValueKind::F64)?;
    Meta::new("vrr variance")
        .set_path("in", &a.input)
        .set("target", a.target)
        .set("clamped", q.clamped_count())
        .set_path("out", &a.out)
        .write_for(&a.out)
}

pub fn vrr_counts(a: &VrrCountsArgs) -> Result<()> {
    let (c, _) = read_raster_kind(&a.input)?;
    let q = vrr_from_counts(&c, a.target, a.floor)?;
    write_raster(&q.to_raster(), &a.out, ValueKind::F64)?;
    Meta::new("vrr counts")
        .set_path("in", &a.input)
        .set("target", a.target)
        .set_opt("floor", &a.floor)
        .set("clamped", q.clamped_count())
        .set_path("out", &a.out)
        .write_for(&a.out)
}

fn edge_config(e: &EdgeArgs, presmooth: bool) -> EdgeVrrConfig {
    let mode = match e.method {
        Method::Grad => EdgeMode::Gradient,
        Method::Pm => EdgeMode::PeronaMalik,
    };
    let mut cfg = EdgeVrrConfig::new(e.v0, mode);
    cfg.q_cap = e.q_cap;
    cfg.strength = e.strength.unwrap_or(e.q_cap);
    cfg.epsilon = e.epsilon;
    cfg.presmooth = presmooth;
    cfg
}

fn edge_meta(meta: &mut Meta, cfg: &EdgeVrrConfig) {
    let method = match cfg.mode {
        EdgeMode::Gradient => "grad",
        EdgeMode::PeronaMalik => "pm",
    };
    meta.set("v0", cfg.v0)
        .set("method", method)
        .set("strength", cfg.strength)
        .set("q_cap", cfg.q_cap)
        .set("epsilon", cfg.epsilon)
        .set("presmooth", cfg.presmooth);
}

pub fn vrr_edge(a: &VrrEdgeArgs) -> Result<()> {
    let (f, _) = read_raster_kind(&a.input)?;
    let cfg = edge_config(&a.edge, a.presmooth);
    let q = vrr_from_edges(&f, &cfg)?;
    write_raster(&q.to_raster(), &a.out, ValueKind::F64)?;
    let mut meta = Meta::new("vrr edge");
    meta.set_path("in", &a.input);
    edge_meta(&mut meta, &cfg);
    meta.set_path("out", &a.out).write_for(&a.out)
}

fn experiment_meta(csv: &CsvTable, command: &str, out: &std::path::Path) -> Result<()> {
    let mut meta = Meta::new(command);
    for (k, v) in csv.metadata() {
        meta.set(k, v);
    }
    meta.set_path("out", out).write_for(out)
}

pub fn test1(a: &Test1Args) -> Result<()> {
    let c = &a.common;
    let cfg = Test1Config {
        n_samples: a.n_samples,
        sample_dim: c.sample_dim,
        roi_dim: c.roi,
        v_target: a.v_target,
        repeats: a.repeats,
        seed: c.seed,
        filter: a.filter,
        q_source: match a.q_source {
            QSourceArg::Measured => QSource::Measured,
            QSourceArg::Expected => QSource::Expected,
        },
        bins: c.bins,
        q_min: c.q_min,
        max_iter: c.max_iter,
    };
    let (_, csv) = run_test1(&cfg)?;
    write_csv(&csv, c.out.as_deref())?;
    if let Some(out) = &c.out {
        experiment_meta(&csv, "test1", out)?;
    }
    Ok(())
}

pub fn test2(a: &Test2Args) -> Result<()> {
    let c = &a.common;
    let cfg = Test2Config {
        n_samples: a.n_samples,
        sample_dim: c.sample_dim,
        roi_dim: c.roi,
        lambda_min: a.lambda_min,
        lambda_max: a.lambda_max,
        u_target: a.u_target,
        repeats: a.repeats,
        seed: c.seed,
        filter: a.filter,
        count_source: match a.count_source {
            CountSourceArg::Expected => CountSource::Expected,
            CountSourceArg::PerPixel => CountSource::PerPixel,
        },
        log_floor: a.log_floor,
        bins: c.bins,
        q_min: c.q_min,
        max_iter: c.max_iter,
    };
    let (_, csv) = run_test2(&cfg)?;
    write_csv(&csv, c.out.as_deref())?;
    if let Some(out) = &c.out {
        experiment_meta(&csv, "test2", out)?;
    }
    Ok(())
}

pub fn denoise(a: &DenoiseArgs) -> Result<()> {
    let (f, stored) = read_raster_kind(&a.input)?;
    let cfg = edge_config(&a.edge, !a.no_presmooth);
    let q = vrr_from_edges(&f, &cfg)?;
    let banks = build_recursive_banks(a.half_width, a.bins, a.half_width == 1)?;
    let (filtered, report) = apply_recursive(&f, &q, &banks, &recursive_options(a.q_min, a.max_iter))?;
    let out = blend(&f, &filtered, a.blend)?;
    write_raster(&out, &a.out, output_kind(stored))?;
    if let Some(path) = &a.q_out {
        write_raster(&q.to_raster(), path, ValueKind::F64).with_context(|| "writing ratio map")?;
    }
    let mut meta = Meta::new("denoise");
    meta.set_path("in", &a.input);
    edge_meta(&mut meta, &cfg);
    meta.set("blend", a.blend)
        .set("L", a.half_width)
        .set("q_min", a.q_min)
        .set("max_iter", a.max_iter)
        .set("bins", a.bins)
        .set("iterations_used", report.iterations_used)
        .set("max_iter_reached", report.max_iter_reached)
        .set_path("out", &a.out)
        .write_for(&a.out)
}
