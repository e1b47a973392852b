use crate::error::{Error, Result};

/// Row-major grid of finite samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| Error::validation("raster dimensions overflow"))?;
        if values.len() != expected {
            return Err(Error::validation(format!(
                "raster {width}x{height} needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite sample at ({}, {})",
                i % width,
                i / width
            )));
        }
        Ok(Raster {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Raster::new(width, height, vec![value; width.saturating_mul(height)])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width.saturating_mul(height));
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Raster::new(width, height, values)
    }

    /// Skips validation; callers guarantee finite values and matching length.
    pub(crate) fn from_parts(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Raster {
            width,
            height,
            values,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Sample with coordinates clamped to the grid (replicate boundary).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.values[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Raster> {
        Raster::new(self.width, self.height, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn same_shape<T: Shape>(&self, other: &T) -> bool {
        self.width == other.width() && self.height == other.height()
    }

    pub(crate) fn check_shape<T: Shape>(&self, other: &T) -> Result<()> {
        check_shape(self.width, self.height, other)
    }
}

/// Anything with grid dimensions.
pub trait Shape {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
}

impl Shape for Raster {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
}

impl Shape for VrrMap {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
}

pub(crate) fn check_shape<T: Shape>(width: usize, height: usize, other: &T) -> Result<()> {
    if width == other.width() && height == other.height() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected_width: width,
            expected_height: height,
            width: other.width(),
            height: other.height(),
        })
    }
}

/// Per-pixel variance reduction ratio, `q_i = v_i / v_T`.
///
/// Ratios below 1 (which would ask for variance amplification) are clamped
/// to 1 on construction; the number of clamped pixels is kept.
#[derive(Clone, Debug, PartialEq)]
pub struct VrrMap {
    width: usize,
    height: usize,
    q: Vec<f64>,
    clamped: usize,
}

impl VrrMap {
    pub fn new(width: usize, height: usize, q: Vec<f64>) -> Result<Self> {
        let raster = Raster::new(width, height, q)?;
        let mut clamped = 0;
        let q = raster
            .into_values()
            .into_iter()
            .map(|v| {
                if v < 1.0 {
                    clamped += 1;
                    1.0
                } else {
                    v
                }
            })
            .collect();
        Ok(VrrMap {
            width,
            height,
            q,
            clamped,
        })
    }

    pub fn uniform(width: usize, height: usize, q: f64) -> Result<Self> {
        VrrMap::new(width, height, vec![q; width.saturating_mul(height)])
    }

    pub fn from_raster(r: &Raster) -> Result<Self> {
        VrrMap::new(r.width(), r.height(), r.values().to_vec())
    }

    pub fn to_raster(&self) -> Raster {
        Raster::from_parts(self.width, self.height, self.q.clone())
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.q
    }

    /// Number of input ratios below 1 that were raised to 1.
    pub fn clamped_count(&self) -> usize {
        self.clamped
    }

    pub fn max(&self) -> f64 {
        self.q.iter().copied().fold(1.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raster_validation() {
        assert!(Raster::new(0, 3, vec![]).is_err());
        assert!(Raster::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Raster::new(2, 1, vec![0.0, f64::NAN]).is_err());
        assert!(Raster::new(usize::MAX, 2, vec![]).is_err());
        let r = Raster::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(r.get(1, 0), 2.0);
        assert_eq!(r.get_clamped(-3, 5), 3.0);
        assert_eq!(r.get_clamped(7, -1), 2.0);
        assert_eq!(r.mean(), 2.5);
    }

    #[test]
    fn vrr_map_clamps_below_one() {
        let q = VrrMap::new(2, 2, vec![0.5, 1.0, 3.0, -2.0]).unwrap();
        assert_eq!(q.values(), &[1.0, 1.0, 3.0, 1.0]);
        assert_eq!(q.clamped_count(), 2);
        assert_eq!(q.max(), 3.0);
        assert!(VrrMap::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn shape_mismatch_reports_both_shapes() {
        let r = Raster::filled(3, 2, 0.0).unwrap();
        let q = VrrMap::uniform(2, 3, 1.0).unwrap();
        let err = r.check_shape(&q).unwrap_err();
        assert_eq!(err.to_string(), "dimension mismatch: expected 3x2, got 2x3");
    }
}
