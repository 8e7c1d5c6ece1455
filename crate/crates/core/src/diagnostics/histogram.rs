use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Probability density on uniform bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub density: Vec<f64>,
    pub bin_width: f64,
    /// Number of samples behind a counted histogram; 0 for exact densities.
    #[serde(default)]
    pub samples: usize,
}

impl Histogram {
    /// Bin `values` into `n_bins` bins on `[lo, hi)`. Densities are normalized by
    /// the total number of values, so out-of-range samples reduce the integral.
    pub fn from_samples(values: &[f64], lo: f64, hi: f64, n_bins: usize) -> Result<Histogram> {
        if n_bins == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!(
                "invalid histogram range [{lo}, {hi}) with {n_bins} bins"
            )));
        }
        let width = (hi - lo) / n_bins as f64;
        let mut counts = vec![0usize; n_bins];
        for &v in values {
            if v >= lo && v < hi {
                let i = (((v - lo) / width) as usize).min(n_bins - 1);
                counts[i] += 1;
            }
        }
        let norm = 1.0 / (values.len().max(1) as f64 * width);
        Ok(Histogram {
            centers: (0..n_bins).map(|i| lo + (i as f64 + 0.5) * width).collect(),
            density: counts.iter().map(|&c| c as f64 * norm).collect(),
            bin_width: width,
            samples: values.len(),
        })
    }

    /// Histogram of an exact density sampled at uniformly spaced points.
    pub fn from_density(centers: Vec<f64>, density: Vec<f64>, bin_width: f64) -> Histogram {
        Histogram {
            centers,
            density,
            bin_width,
            samples: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width
    }

    /// Sample count in bin `i` (only meaningful for counted histograms).
    pub fn count(&self, i: usize) -> f64 {
        self.density[i] * self.bin_width * self.samples as f64
    }

    pub fn mean(&self) -> f64 {
        let w: f64 = self.density.iter().sum();
        if w <= 0.0 {
            return 0.0;
        }
        self.centers.iter().zip(&self.density).map(|(x, d)| x * d).sum::<f64>() / w
    }

    pub fn scaled(&self, factor: f64) -> Histogram {
        Histogram {
            density: self.density.iter().map(|d| d * factor).collect(),
            ..self.clone()
        }
    }

    /// Merge groups of `factor` adjacent bins.
    pub fn rebin(&self, factor: usize) -> Histogram {
        let factor = factor.max(1);
        let n = self.len() / factor;
        let mut centers = Vec::with_capacity(n);
        let mut density = Vec::with_capacity(n);
        for chunk in 0..n {
            let r = chunk * factor..(chunk + 1) * factor;
            centers.push(self.centers[r.clone()].iter().sum::<f64>() / factor as f64);
            density.push(self.density[r].iter().sum::<f64>() / factor as f64);
        }
        Histogram {
            centers,
            density,
            bin_width: self.bin_width * factor as f64,
            samples: self.samples,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.len() != self.density.len() {
            return Err(Error::Config("histogram columns have unequal lengths".into()));
        }
        if !(self.bin_width > 0.0) {
            return Err(Error::Config("histogram bin width must be > 0".into()));
        }
        if self.density.iter().any(|&d| d < 0.0 || !d.is_finite()) {
            return Err(Error::Config("histogram densities must be finite and >= 0".into()));
        }
        if self.total() > 1.0 + 1e-9 {
            return Err(Error::Config(format!("histogram integrates to {} > 1", self.total())));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counted_histogram_integrates_to_in_range_fraction() {
        let values = [0.1, 0.2, 0.3, 5.0];
        let h = Histogram::from_samples(&values, 0.0, 1.0, 4).unwrap();
        assert!((h.total() - 0.75).abs() < 1e-12);
        assert!((h.count(0) - 2.0).abs() < 1e-12);
        assert!((h.count(1) - 1.0).abs() < 1e-12);
        h.validate().unwrap();
    }

    #[test]
    fn rejects_empty_range() {
        assert!(Histogram::from_samples(&[1.0], 1.0, 1.0, 3).is_err());
    }
}
