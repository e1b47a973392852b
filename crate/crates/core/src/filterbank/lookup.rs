use crate::error::{Error, Result};
use crate::kernels::vrp_iterated;

/// Default number of `a` samples in a lookup table.
pub const DEFAULT_LOOKUP_SAMPLES: usize = 1000;

/// Relative slack when checking a requested VRP against a table's range.
const RANGE_SLACK: f64 = 1e-12;

/// Sampled curve `P_n(a)`: VRP of `A_L(a)` after `n` box passes, on a
/// uniform grid of `a ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VrpLookupTable {
    a_samples: Vec<f64>,
    p_values: Vec<f64>,
    iteration: usize,
    half_width: usize,
}

impl VrpLookupTable {
    pub fn a_samples(&self) -> &[f64] {
        &self.a_samples
    }

    pub fn p_values(&self) -> &[f64] {
        &self.p_values
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn p_min(&self) -> f64 {
        self.p_values[0]
    }

    pub fn p_max(&self) -> f64 {
        *self.p_values.last().expect("table has at least two samples")
    }

    fn model(&self, a: f64) -> f64 {
        vrp_iterated(a, self.iteration, self.half_width)
            .expect("a stays within [0, 1] during inversion")
            .get()
    }

    /// Clamps `p` into the table range, rejecting values beyond it.
    fn clamp_p(&self, p: f64) -> Result<f64> {
        let (lo, hi) = (self.p_min(), self.p_max());
        if !(p.is_finite() && p >= lo * (1.0 - RANGE_SLACK) && p <= hi * (1.0 + RANGE_SLACK)) {
            return Err(Error::Range {
                what: "VRP",
                value: p,
                min: lo,
                max: hi,
            });
        }
        Ok(p.clamp(lo, hi))
    }

    /// Index `k >= 1` such that `P[k-1] < p <= P[k]`, or `None` when `p`
    /// sits on the lower endpoint. Ties resolve to the smaller `a`.
    fn bracket(&self, p: f64) -> Option<usize> {
        if p <= self.p_values[0] {
            return None;
        }
        let k = self.p_values.partition_point(|&v| v < p);
        Some(k.min(self.p_values.len() - 1))
    }

    /// Linear interpolation between the two samples bracketing `p`.
    pub fn interpolate(&self, p: f64) -> Result<f64> {
        let p = self.clamp_p(p)?;
        let Some(k) = self.bracket(p) else {
            return Ok(self.a_samples[0]);
        };
        let (p0, p1) = (self.p_values[k - 1], self.p_values[k]);
        let (a0, a1) = (self.a_samples[k - 1], self.a_samples[k]);
        if p >= p1 {
            return Ok(a1);
        }
        Ok(a0 + (p - p0) / (p1 - p0) * (a1 - a0))
    }
}

/// Samples `P_n(a)` at `samples` uniformly spaced points of `[0, 1]`.
pub fn build_lookup_table(half_width: usize, iteration: usize, samples: usize) -> Result<VrpLookupTable> {
    if samples < 2 {
        return Err(Error::domain(format!(
            "lookup table needs at least 2 samples, got {samples}"
        )));
    }
    let last = (samples - 1) as f64;
    let a_samples: Vec<f64> = (0..samples).map(|k| k as f64 / last).collect();
    let p_values = a_samples
        .iter()
        .map(|&a| vrp_iterated(a, iteration, half_width).map(|p| p.get()))
        .collect::<Result<Vec<_>>>()?;
    Ok(VrpLookupTable {
        a_samples,
        p_values,
        iteration,
        half_width,
    })
}

/// Finds `a` with `P_n(a) = p`.
///
/// The table supplies the bracketing samples and a linearly interpolated
/// first guess; the root is then polished on the exact VRP curve inside the
/// bracket (Illinois regula falsi), which matters near `a = 1` where the
/// curve is flat and interpolation alone is poor.
pub fn invert_vrp(table: &VrpLookupTable, p: f64) -> Result<f64> {
    let p = table.clamp_p(p)?;
    let Some(k) = table.bracket(p) else {
        return Ok(table.a_samples[0]);
    };
    if table.p_values[k] == p {
        return Ok(table.a_samples[k]);
    }
    let (mut lo, mut hi) = (table.a_samples[k - 1], table.a_samples[k]);
    let (mut f_lo, mut f_hi) = (table.p_values[k - 1] - p, table.p_values[k] - p);
    if f_hi < 0.0 {
        // Top sample lies below p only through rounding; p is the maximum.
        return Ok(hi);
    }
    let mut side = 0i8;
    let mut a = table.interpolate(p)?;
    for _ in 0..200 {
        let f = table.model(a) - p;
        if f == 0.0 {
            return Ok(a);
        }
        if f < 0.0 {
            lo = a;
            f_lo = f;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = a;
            f_hi = f;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
        if hi - lo <= f64::EPSILON * hi.max(f64::MIN_POSITIVE) {
            break;
        }
        let next = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        a = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
    }
    Ok(if (table.model(lo) - p).abs() <= (table.model(hi) - p).abs() { lo } else { hi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_3x3() {
        let t = build_lookup_table(1, 0, 1000).unwrap();
        assert_eq!(t.p_values()[0], 1.0);
        assert!((t.p_values()[999] - 9.0).abs() < 1e-12);
        let t1 = build_lookup_table(1, 1, 1000).unwrap();
        assert!((t1.p_max() - 18.174515).abs() < 1e-5);
    }

    #[test]
    fn strictly_increasing_5x5() {
        let t = build_lookup_table(2, 0, 1000).unwrap();
        assert!(t.p_values().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn inversion_examples() {
        let t = build_lookup_table(1, 0, 1000).unwrap();
        assert!((invert_vrp(&t, 4.0).unwrap() - 0.25).abs() < 1e-12);
        // Interpolation alone is accurate to the table resolution.
        assert!((t.interpolate(4.0).unwrap() - 0.25).abs() < 1e-3);
        assert_eq!(invert_vrp(&t, 1.0).unwrap(), 0.0);
        assert_eq!(invert_vrp(&t, 9.0).unwrap(), 1.0);
    }

    #[test]
    fn inversion_out_of_range() {
        let t = build_lookup_table(1, 0, 1000).unwrap();
        assert!(matches!(invert_vrp(&t, 0.5), Err(Error::Range { .. })));
        assert!(matches!(invert_vrp(&t, 9.5), Err(Error::Range { .. })));
        assert!(matches!(invert_vrp(&t, f64::NAN), Err(Error::Range { .. })));
    }

    #[test]
    fn inversion_is_accurate_near_flat_top() {
        for n in 0..4 {
            let t = build_lookup_table(1, n, 1000).unwrap();
            for frac in [0.9, 0.99, 0.999, 0.99999] {
                let p = t.p_min() + frac * (t.p_max() - t.p_min());
                let a = invert_vrp(&t, p).unwrap();
                let back = vrp_iterated(a, n, 1).unwrap().get();
                assert!(((back - p) / p).abs() < 1e-12, "n={n} frac={frac}: {back} vs {p}");
            }
        }
    }

    #[test]
    fn tiny_tables_are_rejected() {
        assert!(build_lookup_table(1, 0, 1).is_err());
        assert!(build_lookup_table(1, 0, 2).is_ok());
    }
}
