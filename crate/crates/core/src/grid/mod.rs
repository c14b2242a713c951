//! Grid types shared by every other module.
//!
//! All grids are row-major: pixel `(row, col)` lives at index
//! `row * width + col`. Grids are immutable once handed to an operation, so
//! they can be shared freely across threads.

mod io;
mod ops;

use std::fmt;

pub use io::{
    read_pgm, read_pgm_file, read_psg, read_psg_file, write_pgm, write_pgm_file, write_psg,
    write_psg_file,
};
pub use ops::{normalize_intensity, resize_nearest, threshold, Resample};

use crate::error::{Error, Result};

/// Height and width of the image domain Ω.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridDomain {
    height: usize,
    width: usize,
}

impl GridDomain {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidDimensions { height, width });
        }
        Ok(Self { height, width })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of pixels, |Ω|.
    #[inline]
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.height && col < self.width);
        row * self.width + col
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index / self.width, index % self.width)
    }

    /// Index of a signed position, or `None` outside the grid.
    #[inline]
    pub fn checked_index(&self, row: isize, col: isize) -> Option<usize> {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            None
        } else {
            Some(row as usize * self.width + col as usize)
        }
    }

    pub(crate) fn ensure_same(&self, other: &GridDomain) -> Result<()> {
        if self != other {
            return Err(Error::DomainMismatch {
                left: *self,
                right: *other,
            });
        }
        Ok(())
    }
}

impl fmt::Display for GridDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// A field of finite real values over a [`GridDomain`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid {
    domain: GridDomain,
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::LengthMismatch {
                expected: domain.len(),
                actual: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index, value });
        }
        Ok(Self { domain, values })
    }

    /// Builds a grid from a `height x width` array of rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let domain = GridDomain::new(height, width)?;
        let mut values = Vec::with_capacity(domain.len());
        for row in rows {
            let row = row.as_ref();
            if row.len() != width {
                return Err(Error::LengthMismatch {
                    expected: width,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(domain, values)
    }

    pub fn filled(domain: GridDomain, value: f64) -> Self {
        assert!(value.is_finite(), "fill value must be finite");
        Self {
            domain,
            values: vec![value; domain.len()],
        }
    }

    pub fn zeros(domain: GridDomain) -> Self {
        Self::filled(domain, 0.0)
    }

    pub fn from_fn(domain: GridDomain, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(domain.len());
        for r in 0..domain.height() {
            for c in 0..domain.width() {
                values.push(f(r, c));
            }
        }
        Self::new(domain, values)
    }

    /// Skips the finiteness scan. Callers guarantee every value is finite.
    pub(crate) fn from_vec_unchecked(domain: GridDomain, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { domain, values }
    }

    #[inline]
    pub fn domain(&self) -> GridDomain {
        self.domain
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.domain.index(row, col)]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Applies `f` pixelwise; fails if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.domain, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Fails with the first pixel whose value lies outside `[0, 1]`.
    pub fn check_unit_range(&self) -> Result<()> {
        match self
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            Some((index, &value)) => Err(Error::OutOfUnitRange { index, value }),
            None => Ok(()),
        }
    }
}

/// A field over `{0, 1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    domain: GridDomain,
    values: Vec<u8>,
}

impl BinaryMask {
    pub fn new(domain: GridDomain, values: Vec<u8>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::LengthMismatch {
                expected: domain.len(),
                actual: values.len(),
            });
        }
        if let Some((index, &v)) = values.iter().enumerate().find(|(_, v)| **v > 1) {
            return Err(Error::NotBinary {
                index,
                value: f64::from(v),
            });
        }
        Ok(Self { domain, values })
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let domain = GridDomain::new(height, width)?;
        let mut values = Vec::with_capacity(domain.len());
        for row in rows {
            let row = row.as_ref();
            if row.len() != width {
                return Err(Error::LengthMismatch {
                    expected: width,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(domain, values)
    }

    pub fn from_fn(domain: GridDomain, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut values = Vec::with_capacity(domain.len());
        for r in 0..domain.height() {
            for c in 0..domain.width() {
                values.push(u8::from(f(r, c)));
            }
        }
        Self { domain, values }
    }

    pub fn empty(domain: GridDomain) -> Self {
        Self {
            domain,
            values: vec![0; domain.len()],
        }
    }

    pub fn full(domain: GridDomain) -> Self {
        Self {
            domain,
            values: vec![1; domain.len()],
        }
    }

    /// Interprets a scalar grid whose values are exactly 0 or 1.
    pub fn from_scalar(grid: &ScalarGrid) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.values().len());
        for (index, &v) in grid.values().iter().enumerate() {
            if v == 0.0 {
                values.push(0);
            } else if v == 1.0 {
                values.push(1);
            } else {
                return Err(Error::NotBinary { index, value: v });
            }
        }
        Ok(Self {
            domain: grid.domain(),
            values,
        })
    }

    #[inline]
    pub fn domain(&self) -> GridDomain {
        self.domain
    }

    #[inline]
    pub fn values(&self) -> &[u8] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.values[self.domain.index(row, col)] != 0
    }

    #[inline]
    pub fn is_set(&self, index: usize) -> bool {
        self.values[index] != 0
    }

    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        let i = self.domain.index(row, col);
        self.values[i] = u8::from(on);
    }

    /// Number of foreground pixels.
    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    /// True when there are no foreground pixels.
    pub fn is_empty(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    /// True when every pixel has the same label (no boundary exists).
    pub fn is_uniform(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }

    pub fn complement(&self) -> Self {
        Self {
            domain: self.domain,
            values: self.values.iter().map(|&v| 1 - v).collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.domain.ensure_same(&other.domain)?;
        Ok(Self {
            domain: self.domain,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a | b)
                .collect(),
        })
    }

    pub fn intersection_count(&self, other: &Self) -> Result<usize> {
        self.domain.ensure_same(&other.domain)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| **a != 0 && **b != 0)
            .count())
    }

    pub fn foreground_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0)
            .map(|(i, _)| i)
    }

    pub fn to_scalar(&self) -> ScalarGrid {
        ScalarGrid::from_vec_unchecked(
            self.domain,
            self.values.iter().map(|&v| f64::from(v)).collect(),
        )
    }
}

/// One layer per class over a shared domain.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiClassStack<L> {
    domain: GridDomain,
    layers: Vec<L>,
}

/// Anything that lives on a [`GridDomain`].
pub trait OnDomain {
    fn grid_domain(&self) -> GridDomain;
}

impl OnDomain for ScalarGrid {
    fn grid_domain(&self) -> GridDomain {
        self.domain
    }
}

impl OnDomain for BinaryMask {
    fn grid_domain(&self) -> GridDomain {
        self.domain
    }
}

impl<L: OnDomain> MultiClassStack<L> {
    pub fn new(layers: Vec<L>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::param("a class stack needs at least one layer"))?;
        let domain = first.grid_domain();
        for layer in &layers[1..] {
            domain.ensure_same(&layer.grid_domain())?;
        }
        Ok(Self { domain, layers })
    }

    pub fn domain(&self) -> GridDomain {
        self.domain
    }

    pub fn classes(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[L] {
        &self.layers
    }

    pub fn layer(&self, class: usize) -> &L {
        &self.layers[class]
    }

    pub fn into_layers(self) -> Vec<L> {
        self.layers
    }
}

impl MultiClassStack<ScalarGrid> {
    /// Checks that every pixel's class probabilities sum to one within `eps`.
    pub fn check_partition(&self, eps: f64) -> Result<()> {
        for i in 0..self.domain.len() {
            let total: f64 = self.layers.iter().map(|l| l.values()[i]).sum();
            if (total - 1.0).abs() > eps {
                return Err(Error::param(format!(
                    "class probabilities at pixel {i} sum to {total}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_rejects_zero_dims() {
        assert!(GridDomain::new(0, 3).is_err());
        assert!(GridDomain::new(3, 0).is_err());
        let d = GridDomain::new(3, 4).unwrap();
        assert_eq!(d.len(), 12);
        assert_eq!(d.coords(d.index(2, 1)), (2, 1));
    }

    #[test]
    fn scalar_grid_rejects_nan_and_bad_length() {
        let d = GridDomain::new(1, 2).unwrap();
        assert!(matches!(
            ScalarGrid::new(d, vec![0.0, f64::NAN]),
            Err(Error::NonFiniteValue { index: 1, .. })
        ));
        assert!(matches!(
            ScalarGrid::new(d, vec![0.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn mask_rejects_non_binary() {
        let d = GridDomain::new(1, 3).unwrap();
        assert!(matches!(
            BinaryMask::new(d, vec![0, 2, 1]),
            Err(Error::NotBinary { index: 1, .. })
        ));
    }

    #[test]
    fn stack_checks_domains_and_partition() {
        let a = ScalarGrid::from_rows(&[[0.25, 1.0]]).unwrap();
        let b = ScalarGrid::from_rows(&[[0.75, 0.0]]).unwrap();
        let stack = MultiClassStack::new(vec![a.clone(), b]).unwrap();
        stack.check_partition(1e-5).unwrap();
        let bad = MultiClassStack::new(vec![a.clone(), a]).unwrap();
        assert!(bad.check_partition(1e-5).is_err());
        let other = ScalarGrid::zeros(GridDomain::new(2, 2).unwrap());
        let c = ScalarGrid::zeros(GridDomain::new(1, 2).unwrap());
        assert!(MultiClassStack::new(vec![c, other]).is_err());
    }
}
