//! Weighted histograms with Freedman–Diaconis binning.

use serde::Serialize;

use crate::error::{Error, Result};

/// Upper bound on automatically chosen bin counts.
pub const MAX_AUTO_BINS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// Probability density per bin; integrates to 1 over the edges.
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn from_samples(values: &[f64], edges: Vec<f64>) -> Result<Self> {
        let ones = vec![1.0; values.len()];
        Self::from_weighted(values, &ones, edges)
    }

    /// Values outside `[edges[0], edges[last]]` are dropped; the last bin is closed.
    pub fn from_weighted(values: &[f64], weights: &[f64], edges: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                found: weights.len(),
            });
        }
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("histogram edges must be strictly increasing".into()));
        }
        let bins = edges.len() - 1;
        let mut mass = vec![0.0; bins];
        for (&v, &w) in values.iter().zip(weights) {
            if let Some(b) = bin_of(&edges, v) {
                mass[b] += w;
            }
        }
        let total: f64 = mass.iter().sum();
        let density = mass
            .iter()
            .enumerate()
            .map(|(b, m)| if total > 0.0 { m / total / (edges[b + 1] - edges[b]) } else { 0.0 })
            .collect();
        Ok(Self { edges, density })
    }

    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn width(&self, b: usize) -> f64 {
        self.edges[b + 1] - self.edges[b]
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.bins()).map(|b| self.density[b] * self.width(b)).collect()
    }

    pub fn integral(&self) -> f64 {
        self.probabilities().iter().sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn mean(&self) -> f64 {
        self.centers().iter().zip(self.probabilities()).map(|(c, p)| c * p).sum()
    }

    /// `½ Σ |p_a − p_b|` over shared bins.
    pub fn total_variation(&self, other: &Histogram) -> Result<f64> {
        self.check_same_edges(other)?;
        Ok(0.5 * self.probabilities().iter().zip(other.probabilities()).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// `∫ |f − g|` against a reference density evaluated at bin centers.
    pub fn l1_to_density(&self, reference: impl Fn(f64) -> f64) -> f64 {
        (0..self.bins())
            .map(|b| (self.density[b] - reference(0.5 * (self.edges[b] + self.edges[b + 1]))).abs() * self.width(b))
            .sum()
    }

    fn check_same_edges(&self, other: &Histogram) -> Result<()> {
        if self.edges != other.edges {
            return Err(Error::InvalidArgument("histograms have different bin edges".into()));
        }
        Ok(())
    }
}

fn bin_of(edges: &[f64], v: f64) -> Option<usize> {
    let last = *edges.last()?;
    if !(v >= edges[0] && v <= last) {
        return None;
    }
    if v == last {
        return Some(edges.len() - 2);
    }
    Some(edges.partition_point(|&e| e <= v) - 1)
}

pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

/// Quantile `q ∈ [0, 1]` of weighted data, by linear search on the sorted cumulative weight.
pub fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> f64 {
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let target = q * total;
    let mut acc = 0.0;
    for &(v, w) in &pairs {
        acc += w;
        if acc >= target {
            return v;
        }
    }
    pairs.last().map(|p| p.0).unwrap_or(f64::NAN)
}

/// Freedman–Diaconis edges: width `2·IQR·n^{−1/3}`, spanning the data range.
/// `n` is the effective sample size `(Σw)²/Σw²`.
pub fn freedman_diaconis_edges(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() || values.len() != weights.len() {
        return Err(Error::InvalidArgument("need a nonempty, equally weighted-length sample".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        let pad = lo.abs().max(1.0) * 1e-9;
        return Ok(vec![lo - pad, hi + pad]);
    }
    let sum: f64 = weights.iter().sum();
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    let n_eff = (sum * sum / sum_sq).max(1.0);
    let iqr = weighted_quantile(values, weights, 0.75) - weighted_quantile(values, weights, 0.25);
    let bins = if iqr > 0.0 {
        let width = 2.0 * iqr / n_eff.cbrt();
        ((hi - lo) / width).ceil() as usize
    } else {
        n_eff.sqrt().ceil() as usize
    };
    Ok(uniform_edges(lo, hi, bins.clamp(1, MAX_AUTO_BINS)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn counts_and_density() {
        let h = Histogram::from_samples(&[0.1, 0.2, 0.6, 1.0, 5.0], uniform_edges(0.0, 1.0, 2)).unwrap();
        assert_eq!(h.probabilities(), vec![0.5, 0.5]);
        assert_abs_diff_eq!(h.integral(), 1.0);
        assert_eq!(h.density, vec![1.0, 1.0]);
    }

    #[test]
    fn weighted_quantiles() {
        let v = [1.0, 2.0, 3.0];
        assert_eq!(weighted_quantile(&v, &[1.0, 1.0, 1.0], 0.5), 2.0);
        assert_eq!(weighted_quantile(&v, &[0.0, 0.0, 1.0], 0.5), 3.0);
    }

    #[test]
    fn fd_edges_cover_data() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let w = vec![1.0; v.len()];
        let e = freedman_diaconis_edges(&v, &w).unwrap();
        assert!(e.len() > 5);
        let h = Histogram::from_samples(&v, e).unwrap();
        assert_abs_diff_eq!(h.integral(), 1.0, epsilon = 1e-12);
        let e = freedman_diaconis_edges(&[2.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!(e.len(), 2);
    }

    #[test]
    fn tv_of_disjoint() {
        let e = uniform_edges(0.0, 2.0, 2);
        let a = Histogram::from_samples(&[0.5], e.clone()).unwrap();
        let b = Histogram::from_samples(&[1.5], e.clone()).unwrap();
        assert_abs_diff_eq!(a.total_variation(&b).unwrap(), 1.0);
        let c = Histogram::from_samples(&[0.5], uniform_edges(0.0, 2.0, 3)).unwrap();
        assert!(a.total_variation(&c).is_err());
    }

    proptest! {
        #[test]
        fn normalized(values in proptest::collection::vec(-10.0f64..10.0, 1..200)) {
            let w = vec![1.0; values.len()];
            let e = freedman_diaconis_edges(&values, &w).unwrap();
            let h = Histogram::from_samples(&values, e).unwrap();
            prop_assert!((h.integral() - 1.0).abs() < 1e-9);
        }
    }
}
