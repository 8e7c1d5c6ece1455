use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Stroboscopic observables, one row per recorded drive period.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    pub times: Vec<f64>,
    pub mean_z: Vec<f64>,
    pub mean_p: Vec<f64>,
    /// `Δz²`.
    pub var_z: Vec<f64>,
    /// `Δp²`.
    pub var_p: Vec<f64>,
    /// Remaining probability; identically 1 for classical ensembles.
    pub norm: Vec<f64>,
}

/// First and second moments of a position/momentum distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean_z: f64,
    pub mean_p: f64,
    pub var_z: f64,
    pub var_p: f64,
    pub norm: f64,
}

impl Moments {
    /// Two-pass moments of equally weighted samples, summed in slice order.
    pub fn from_samples(zs: impl Iterator<Item = (f64, f64)> + Clone) -> Moments {
        let mut n = 0usize;
        let (mut sz, mut sp) = (0.0, 0.0);
        for (z, p) in zs.clone() {
            n += 1;
            sz += z;
            sp += p;
        }
        let nf = n.max(1) as f64;
        let (mz, mp) = (sz / nf, sp / nf);
        let (mut vz, mut vp) = (0.0, 0.0);
        for (z, p) in zs {
            vz += (z - mz) * (z - mz);
            vp += (p - mp) * (p - mp);
        }
        Moments {
            mean_z: mz,
            mean_p: mp,
            var_z: vz / nf,
            var_p: vp / nf,
            norm: 1.0,
        }
    }
}

impl TimeSeriesRecord {
    pub fn with_capacity(n: usize) -> Self {
        TimeSeriesRecord {
            times: Vec::with_capacity(n),
            mean_z: Vec::with_capacity(n),
            mean_p: Vec::with_capacity(n),
            var_z: Vec::with_capacity(n),
            var_p: Vec::with_capacity(n),
            norm: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: f64, m: Moments) {
        self.times.push(t);
        self.mean_z.push(m.mean_z);
        self.mean_p.push(m.mean_p);
        self.var_z.push(m.var_z.max(0.0));
        self.var_p.push(m.var_p.max(0.0));
        self.norm.push(m.norm);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<Moments> {
        let i = self.len().checked_sub(1)?;
        Some(self.row(i))
    }

    pub fn row(&self, i: usize) -> Moments {
        Moments {
            mean_z: self.mean_z[i],
            mean_p: self.mean_p[i],
            var_z: self.var_z[i],
            var_p: self.var_p[i],
            norm: self.norm[i],
        }
    }

    /// `Δz = sqrt(var_z)` per sample.
    pub fn width_z(&self) -> Vec<f64> {
        self.var_z.iter().map(|v| v.sqrt()).collect()
    }

    /// Mean of `var_p` over the last `n` samples (or all, if fewer).
    pub fn trailing_mean_var_p(&self, n: usize) -> f64 {
        let k = n.min(self.len()).max(1);
        let tail = &self.var_p[self.len().saturating_sub(k)..];
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if [
            self.mean_z.len(),
            self.mean_p.len(),
            self.var_z.len(),
            self.var_p.len(),
            self.norm.len(),
        ]
        .iter()
        .any(|&l| l != n)
        {
            return Err(Error::Config("record columns have unequal lengths".into()));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("record times are not strictly increasing".into()));
        }
        if self.var_z.iter().chain(&self.var_p).any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Config("record variances must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Keep rows with `t >= t_min`.
    pub fn since(&self, t_min: f64) -> TimeSeriesRecord {
        let start = self.times.partition_point(|&t| t < t_min);
        TimeSeriesRecord {
            times: self.times[start..].to_vec(),
            mean_z: self.mean_z[start..].to_vec(),
            mean_p: self.mean_p[start..].to_vec(),
            var_z: self.var_z[start..].to_vec(),
            var_p: self.var_p[start..].to_vec(),
            norm: self.norm[start..].to_vec(),
        }
    }
}
