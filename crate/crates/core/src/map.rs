//! Dense single-channel maps: soft predictions in `[0, 1]` and binary edge
//! maps. Both are row-major.

use crate::error::{Error, Result};

/// Per-pixel real values in `[0, 1]`: a prediction, a soft label, or a
/// grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl SoftMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_shape(height, width, values.len())?;
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidMap(format!(
                "value {v} at index {i} is outside [0, 1]"
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidMap("ragged rows".into()));
        }
        Self::new(height, width, rows.concat())
    }

    /// Builds a map whose values are exactly the 0/1 entries of `map`.
    pub fn from_binary(map: &BinaryMap) -> Self {
        Self {
            height: map.height,
            width: map.width,
            values: map.values.iter().map(|&v| f64::from(v)).collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

/// Per-pixel `{0, 1}` map, typically ground-truth edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMap {
    height: usize,
    width: usize,
    values: Vec<u8>,
}

impl BinaryMap {
    pub fn new(height: usize, width: usize, values: Vec<u8>) -> Result<Self> {
        check_shape(height, width, values.len())?;
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| **v > 1) {
            return Err(Error::InvalidMap(format!(
                "value {v} at index {i} is not 0 or 1"
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0; height * width])
    }

    pub fn from_rows(rows: &[&[u8]]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidMap("ragged rows".into()));
        }
        Self::new(height, width, rows.concat())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.values[row * self.width + col] == 1
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    /// `(row, col)` of every set pixel in row-major order.
    pub fn positives(&self) -> Vec<(usize, usize)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(i, _)| (i / self.width, i % self.width))
            .collect()
    }
}

fn check_shape(height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidMap(format!(
            "dimensions must be positive, got {height}x{width}"
        )));
    }
    match height.checked_mul(width) {
        Some(n) if n == len => Ok(()),
        _ => Err(Error::InvalidMap(format!(
            "{height}x{width} map needs {} values, got {len}",
            height.saturating_mul(width)
        ))),
    }
}
