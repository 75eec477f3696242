//! Core domain types: dense row-major feature matrices tagged with a modality.

use crate::error::{Error, Result};

/// Which feature space a matrix lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Modality {
    Image,
    Text,
    Latent,
}

impl Modality {
    pub fn to_u32(self) -> u32 {
        match self {
            Modality::Image => 0,
            Modality::Text => 1,
            Modality::Latent => 2,
        }
    }

    pub fn from_u32(v: u32) -> Result<Self> {
        match v {
            0 => Ok(Modality::Image),
            1 => Ok(Modality::Text),
            2 => Ok(Modality::Latent),
            other => Err(Error::Format(format!("unknown modality code {other}"))),
        }
    }
}

/// An `n x d` matrix of 32-bit floats, stored row-major.
///
/// Invariants: `data.len() == n * d` and every value is finite. Both are
/// enforced at construction, so a `FeatureMatrix` in hand is always valid.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    modality: Modality,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(n: usize, d: usize, modality: Modality, data: Vec<f32>) -> Result<Self> {
        let expected = n
            .checked_mul(d)
            .ok_or_else(|| Error::Format(format!("matrix size {n} x {d} overflows")))?;
        if data.len() != expected {
            return Err(Error::DimMismatch(format!(
                "matrix {n} x {d} requires {expected} values, got {}",
                data.len()
            )));
        }
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: if d == 0 { 0 } else { i / d },
                    col: if d == 0 { 0 } else { i % d },
                });
            }
        }
        Ok(Self { n, d, modality, data })
    }

    pub fn zeros(n: usize, d: usize, modality: Modality) -> Self {
        Self { n, d, modality, data: vec![0.0; n * d] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.d.max(1)).take(self.n)
    }

    /// Size of the matrix payload as raw binary32, in bytes.
    pub fn raw_bytes(&self) -> u64 {
        self.n as u64 * self.d as u64 * 4
    }

    /// Copy of the given rows, in the given order.
    pub fn gather(&self, indices: &[usize], modality: Modality) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix { n: indices.len(), d: self.d, modality, data }
    }

    /// Contiguous row range `[start, end)` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> FeatureMatrix {
        FeatureMatrix {
            n: end - start,
            d: self.d,
            modality: self.modality,
            data: self.data[start * self.d..end * self.d].to_vec(),
        }
    }
}

/// Squared L2 distance accumulated in f64.
pub fn l2sq(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let diff = x as f64 - y as f64;
        acc += diff * diff;
    }
    acc
}

/// Inner product accumulated in f64.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        acc += x as f64 * y as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_wrong_length() {
        assert!(matches!(
            FeatureMatrix::new(2, 3, Modality::Image, vec![0.0; 5]),
            Err(Error::DimMismatch(_))
        ));
    }

    #[test]
    fn new_rejects_non_finite() {
        let mut data = vec![0.0f32; 6];
        data[4] = f32::NAN;
        match FeatureMatrix::new(2, 3, Modality::Image, data) {
            Err(Error::NonFinite { row, col }) => {
                assert_eq!((row, col), (1, 1));
            }
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn empty_matrix_is_valid() {
        let m = FeatureMatrix::new(0, 8, Modality::Text, vec![]).unwrap();
        assert_eq!(m.n(), 0);
        assert_eq!(m.raw_bytes(), 0);
    }

    #[test]
    fn row_access() {
        let m = FeatureMatrix::new(2, 3, Modality::Image, (0..6).map(|v| v as f32).collect())
            .unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0, 5.0]);
        assert_eq!(l2sq(m.row(0), m.row(1)), 27.0);
    }
}
