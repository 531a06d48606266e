//! Finite measures on an `m`-point space, represented as vectors in `[0,1]^m`.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Tolerance on the total mass of a probability vector.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// A finite measure on `{1, ..., m}`: entries in `[0, 1]` with support
/// bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureVector {
    entries: DVector<f64>,
    support: Vec<usize>,
}

impl MeasureVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        Self::from_dvector(DVector::from_vec(entries))
    }

    pub fn from_dvector(entries: DVector<f64>) -> Result<Self> {
        for (i, &v) in entries.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(Error::InvalidMeasure { index: i, value: v });
            }
        }
        let support = entries
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, _)| i)
            .collect();
        Ok(Self { entries, support })
    }

    /// Clamps entries that drift outside `[0, 1]` by at most `tol` back onto
    /// the boundary; larger violations are rejected. Used for solver output,
    /// where feasibility holds only up to rounding.
    pub(crate) fn from_dvector_clamped(mut entries: DVector<f64>, tol: f64) -> Result<Self> {
        for (i, v) in entries.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v < -tol {
                    return Err(Error::InvalidMeasure {
                        index: i,
                        value: *v,
                    });
                }
                *v = 0.0;
            } else if *v > 1.0 {
                if *v > 1.0 + tol {
                    return Err(Error::InvalidMeasure {
                        index: i,
                        value: *v,
                    });
                }
                *v = 1.0;
            }
        }
        Self::from_dvector(entries)
    }

    pub fn entries(&self) -> &DVector<f64> {
        &self.entries
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.entries[i]
    }

    /// True when every entry lies strictly inside `(0, 1)`.
    pub fn is_interior(&self) -> bool {
        self.entries.iter().all(|&v| v > 0.0 && v < 1.0)
    }

    /// True when `supp(self)` is contained in `supp(other)`.
    pub fn support_within(&self, other: &MeasureVector) -> bool {
        self.support.iter().all(|&i| other.entries[i] > 0.0)
    }
}

/// A probability vector: a measure whose entries sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector {
    inner: MeasureVector,
}

impl ProbabilityVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        Self::from_measure(MeasureVector::new(entries)?)
    }

    pub fn from_dvector(entries: DVector<f64>) -> Result<Self> {
        Self::from_measure(MeasureVector::from_dvector(entries)?)
    }

    pub fn from_measure(measure: MeasureVector) -> Result<Self> {
        let sum: f64 = measure.entries().iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::NotAProbability(sum));
        }
        Ok(Self { inner: measure })
    }

    pub fn uniform(m: usize) -> Self {
        let e = DVector::from_element(m, 1.0 / m as f64);
        Self::from_dvector(e).expect("uniform vector is a probability vector")
    }

    pub fn as_measure(&self) -> &MeasureVector {
        &self.inner
    }

    pub fn entries(&self) -> &DVector<f64> {
        self.inner.entries()
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.inner.get(i)
    }

    pub fn is_interior(&self) -> bool {
        self.inner.is_interior()
    }
}
