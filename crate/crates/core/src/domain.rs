//! Axis-aligned sampling boxes.

use serde::Serialize;

use crate::error::{Error, Result};

/// A box `[lo₁, hi₁] × … × [loₙ, hiₙ]` sampled on a uniform grid with
/// `counts[i]` points along axis `i` (endpoints included).
///
/// Grid points are numbered with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != counts.len() || lo.is_empty() {
            return Err(Error::Dimension(format!(
                "box bounds and grid counts must have one equal, nonzero length (lo {}, hi {}, counts {})",
                lo.len(),
                hi.len(),
                counts.len()
            )));
        }
        for i in 0..lo.len() {
            if !(lo[i] < hi[i]) || !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "axis {i}: need finite lo < hi, got [{}, {}]",
                    lo[i], hi[i]
                )));
            }
            if counts[i] < 2 {
                return Err(Error::InvalidArgument(format!(
                    "axis {i}: grid count must be at least 2, got {}",
                    counts[i]
                )));
            }
        }
        Ok(BoxDomain { lo, hi, counts })
    }

    /// Same count on every axis.
    pub fn uniform(lo: Vec<f64>, hi: Vec<f64>, count: usize) -> Result<Self> {
        let n = lo.len();
        Self::new(lo, hi, vec![count; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pitch(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| (self.hi[i] - self.lo[i]) / (self.counts[i] - 1) as f64)
            .collect()
    }

    pub fn max_pitch(&self) -> f64 {
        self.pitch().into_iter().fold(0.0, f64::max)
    }

    pub fn axis_value(&self, axis: usize, j: usize) -> f64 {
        let c = self.counts[axis];
        if j + 1 == c {
            self.hi[axis]
        } else {
            self.lo[axis] + (self.hi[axis] - self.lo[axis]) * j as f64 / (c - 1) as f64
        }
    }

    /// Grid point with flat index `index`.
    pub fn point(&self, mut index: usize) -> Vec<f64> {
        let n = self.dim();
        let mut x = vec![0.0; n];
        for axis in (0..n).rev() {
            let c = self.counts[axis];
            x[axis] = self.axis_value(axis, index % c);
            index /= c;
        }
        x
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_last_axis_fastest() {
        let b = BoxDomain::new(vec![0.0, 10.0], vec![1.0, 12.0], vec![2, 3]).unwrap();
        let pts: Vec<_> = b.points().collect();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![0.0, 10.0]);
        assert_eq!(pts[1], vec![0.0, 11.0]);
        assert_eq!(pts[2], vec![0.0, 12.0]);
        assert_eq!(pts[3], vec![1.0, 10.0]);
        assert_eq!(b.pitch(), vec![1.0, 1.0]);
    }

    #[test]
    fn endpoints_exact() {
        let b = BoxDomain::uniform(vec![-2.0], vec![2.0], 101).unwrap();
        assert_eq!(b.point(0), vec![-2.0]);
        assert_eq!(b.point(100), vec![2.0]);
        assert_eq!(b.point(50), vec![0.0]);
    }

    #[test]
    fn rejects_bad_boxes() {
        assert!(BoxDomain::new(vec![1.0], vec![0.0], vec![3]).is_err());
        assert!(BoxDomain::new(vec![0.0], vec![1.0], vec![1]).is_err());
        assert!(BoxDomain::new(vec![0.0], vec![1.0, 2.0], vec![3]).is_err());
    }
}
