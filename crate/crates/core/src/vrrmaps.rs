//! Builders for variance reduction ratio maps, and output blending.

use crate::error::{Error, Result};
use crate::kernels::box_kernel;
use crate::raster::{Raster, VrrMap};
use crate::svfilter::convolve;

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_Q_CAP: f64 = 1000.0;

/// `q_i = max(1, v_i / v_T)`.
pub fn vrr_from_variance(v: &Raster, v_target: f64) -> Result<VrrMap> {
    if !(v_target > 0.0 && v_target.is_finite()) {
        return Err(Error::domain(format!("target variance must be positive, got {v_target}")));
    }
    VrrMap::new(
        v.width(),
        v.height(),
        v.values().iter().map(|&vi| (vi / v_target).max(1.0)).collect(),
    )
}

/// Pre-log counts to ratios: the after-log variance of a count `I` is
/// `1/I`, so `q_i = max(1, 1 / (I_i · u_T))`.
///
/// Counts at or below zero are an error unless `floor` is given, in which
/// case they are raised to `floor` first.
pub fn vrr_from_counts(counts: &Raster, u_target: f64, floor: Option<f64>) -> Result<VrrMap> {
    if !(u_target > 0.0 && u_target.is_finite()) {
        return Err(Error::domain(format!("target variance must be positive, got {u_target}")));
    }
    if let Some(fl) = floor {
        if fl.is_nan() || fl <= 0.0 {
            return Err(Error::domain(format!("count floor must be positive, got {fl}")));
        }
    }
    let q = counts
        .values()
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let c = match floor {
                Some(fl) => c.max(fl),
                None if c > 0.0 => c,
                None => {
                    return Err(Error::validation(format!(
                        "non-positive count {c} at ({}, {}); set a count floor to accept it",
                        i % counts.width(),
                        i / counts.width()
                    )))
                }
            };
            Ok((1.0 / (c * u_target)).max(1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    VrrMap::new(counts.width(), counts.height(), q)
}

/// Central-difference gradient magnitude `√(fx² + fy²)`, one-sided on the
/// border rows and columns.
pub fn gradient_magnitude(f: &Raster) -> Result<Raster> {
    let (w, h) = (f.width(), f.height());
    if w < 2 || h < 2 {
        return Err(Error::validation(format!(
            "gradient needs at least 2x2 samples, got {w}x{h}"
        )));
    }
    let diff = |lo: f64, hi: f64, span: usize| (hi - lo) / span as f64;
    Raster::from_fn(w, h, |x, y| {
        let (x0, x1) = (x.saturating_sub(1), (x + 1).min(w - 1));
        let (y0, y1) = (y.saturating_sub(1), (y + 1).min(h - 1));
        let gx = diff(f.get(x0, y), f.get(x1, y), x1 - x0);
        let gy = diff(f.get(x, y0), f.get(x, y1), y1 - y0);
        gx.hypot(gy)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EdgeMode {
    /// `q = v0 / ‖∇f‖`
    #[default]
    Gradient,
    /// `q = strength · v0 / (v0 + ‖∇f‖²)`
    PeronaMalik,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeVrrConfig {
    /// Input image variance, in image units squared.
    pub v0: f64,
    pub mode: EdgeMode,
    pub q_cap: f64,
    /// Overall multiplier for the Perona-Malik ratio, whose raw form never
    /// exceeds 1.
    pub strength: f64,
    /// Floor on the gradient magnitude in the gradient mode.
    pub epsilon: f64,
    /// Smooth with one 3x3 box before taking the gradient.
    pub presmooth: bool,
}

impl EdgeVrrConfig {
    pub fn new(v0: f64, mode: EdgeMode) -> Self {
        EdgeVrrConfig {
            v0,
            mode,
            q_cap: DEFAULT_Q_CAP,
            strength: DEFAULT_Q_CAP,
            epsilon: DEFAULT_EPSILON,
            presmooth: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} must be positive, got {v}")))
            }
        };
        positive("v0", self.v0)?;
        positive("strength", self.strength)?;
        positive("epsilon", self.epsilon)?;
        if !(self.q_cap >= 1.0 && self.q_cap.is_finite()) {
            return Err(Error::domain(format!("q_cap must be >= 1, got {}", self.q_cap)));
        }
        Ok(())
    }
}

fn edge_gradient(f: &Raster, cfg: &EdgeVrrConfig) -> Result<Raster> {
    if cfg.presmooth {
        gradient_magnitude(&convolve(f, &box_kernel(1)))
    } else {
        gradient_magnitude(f)
    }
}

fn check_mode(cfg: &EdgeVrrConfig, mode: EdgeMode) -> Result<()> {
    if cfg.mode == mode {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "edge config is in {:?} mode, {mode:?} was requested",
            cfg.mode
        )))
    }
}

/// `q_i = clamp(v0 / max(‖∇f‖_i, ε), 1, q_cap)`.
pub fn vrr_edge(f: &Raster, cfg: &EdgeVrrConfig) -> Result<VrrMap> {
    cfg.validate()?;
    check_mode(cfg, EdgeMode::Gradient)?;
    let g = edge_gradient(f, cfg)?;
    VrrMap::new(
        f.width(),
        f.height(),
        g.values()
            .iter()
            .map(|&gi| (cfg.v0 / gi.max(cfg.epsilon)).clamp(1.0, cfg.q_cap))
            .collect(),
    )
}

/// `q_i = clamp(strength · v0 / (v0 + ‖∇f‖_i²), 1, q_cap)`.
pub fn vrr_perona_malik(f: &Raster, cfg: &EdgeVrrConfig) -> Result<VrrMap> {
    cfg.validate()?;
    check_mode(cfg, EdgeMode::PeronaMalik)?;
    let g = edge_gradient(f, cfg)?;
    VrrMap::new(
        f.width(),
        f.height(),
        g.values()
            .iter()
            .map(|&gi| (cfg.strength * cfg.v0 / (cfg.v0 + gi * gi)).clamp(1.0, cfg.q_cap))
            .collect(),
    )
}

/// Dispatches on `cfg.mode`.
pub fn vrr_from_edges(f: &Raster, cfg: &EdgeVrrConfig) -> Result<VrrMap> {
    match cfg.mode {
        EdgeMode::Gradient => vrr_edge(f, cfg),
        EdgeMode::PeronaMalik => vrr_perona_malik(f, cfg),
    }
}

/// `alpha · original + (1 − alpha) · filtered`.
pub fn blend(original: &Raster, filtered: &Raster, alpha: f64) -> Result<Raster> {
    original.check_shape(filtered)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!("blend weight must lie in [0, 1], got {alpha}")));
    }
    if alpha == 1.0 {
        return Ok(original.clone());
    }
    if alpha == 0.0 {
        return Ok(filtered.clone());
    }
    Raster::new(
        original.width(),
        original.height(),
        original
            .values()
            .iter()
            .zip(filtered.values())
            .map(|(o, f)| alpha * o + (1.0 - alpha) * f)
            .collect(),
    )
}
