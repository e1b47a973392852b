//! Closed-form inverses of the 3x3 VRP curves for the first three passes.
//!
//! With `t = √p`, the pass-`n` curves for `L = 1` are
//!
//! ```text
//! n = 0:  t = (1 + 2a)² / (1 + 2a²)
//! n = 1:  t = 9 (1 + 2a)² / (3 + 8a + 8a²)
//! n = 2:  t = 81 (1 + 2a)² / (19 + 64a + 58a²)
//! ```
//!
//! and each reduces to a quadratic in `a`. The roots below are the ones that
//! run from `a = 0` at `p_min` to `a = 1` at `p_max`.

use crate::error::{Error, Result};
use crate::kernels::{p_max_at_iteration, p_min_at_iteration};

/// Passes for which a closed form exists.
pub const CLOSED_FORM_PASSES: usize = 3;

const RANGE_SLACK: f64 = 1e-12;

/// Atomic parameter `a` whose 3x3 kernel reaches total VRP `p` at pass `n`.
pub fn a_from_p_closed(p: f64, n: usize) -> Result<f64> {
    if n >= CLOSED_FORM_PASSES {
        return Err(Error::domain(format!(
            "closed-form inversion exists for passes 0..=2 only, got {n}"
        )));
    }
    let lo = p_min_at_iteration(n, 1)?.get();
    let hi = p_max_at_iteration(n, 1)?.get();
    if !(p.is_finite() && p >= lo * (1.0 - RANGE_SLACK) && p <= hi * (1.0 + RANGE_SLACK)) {
        return Err(Error::Range {
            what: "VRP",
            value: p,
            min: lo,
            max: hi,
        });
    }
    let t = p.clamp(lo, hi).sqrt();
    let a = match n {
        // Rationalized (-2 + √(2t(3-t))) / (2(2-t)); finite at t = 2.
        0 => (t - 1.0) / (2.0 + (2.0 * t * (3.0 - t)).max(0.0).sqrt()),
        1 => -0.5 + (t / (4.0 * (9.0 - 2.0 * t))).sqrt(),
        _ => {
            (32.0 * t - 162.0 + (6.0 * t * (81.0 - 13.0 * t)).max(0.0).sqrt())
                / (324.0 - 58.0 * t)
        }
    };
    Ok(a.clamp(0.0, 1.0))
}
