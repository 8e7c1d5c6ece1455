//! Least-squares fits of `ln ρ` against the coordinate: linear in `|x|` for an
//! exponential profile, linear in `(x - x̄)²` for a Gaussian, and piecewise
//! linear with one breakpoint for a sum of two exponentials.

use serde::{Deserialize, Serialize};

use super::Histogram;
use crate::{Error, Result};

/// Minimum sample count per bin for counted histograms.
pub const DEFAULT_MIN_COUNTS: f64 = 10.0;
/// Minimum density for exact (quantum) distributions.
pub const DEFAULT_MIN_DENSITY: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Residual sum of squares.
    pub sse: f64,
}

/// Ordinary least squares; `None` for fewer than three points or constant `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len().min(ys.len());
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs[..n].iter().zip(&ys[..n]) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = xs[..n]
        .iter()
        .zip(&ys[..n])
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>();
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
        sse,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitModel {
    Exponential,
    Gaussian,
    TwoExponential,
}

/// Which bins are trusted enough to take a logarithm of.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DensityFloor {
    /// Counted histograms: `>= 10` samples, exact densities: `> 1e-8`.
    Auto,
    MinCounts(f64),
    MinDensity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Coordinate interval; the whole histogram when `None`.
    pub range: Option<(f64, f64)>,
    pub floor: DensityFloor,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            range: None,
            floor: DensityFloor::Auto,
        }
    }
}

impl FitOptions {
    pub fn range(lo: f64, hi: f64) -> Self {
        FitOptions {
            range: Some((lo, hi)),
            ..Self::default()
        }
    }

    pub fn with_floor(self, floor: DensityFloor) -> Self {
        FitOptions { floor, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoExponentialParams {
    /// Slope of `ln ρ` below the breakpoint.
    pub left_slope: f64,
    pub left_intercept: f64,
    /// Slope of `ln ρ` above the breakpoint.
    pub right_slope: f64,
    pub right_intercept: f64,
    pub breakpoint: f64,
    /// Set when the data do not support two distinct exponentials.
    pub fallback: bool,
}

impl TwoExponentialParams {
    pub fn steep_slope(&self) -> f64 {
        if self.left_slope.abs() >= self.right_slope.abs() {
            self.left_slope
        } else {
            self.right_slope
        }
    }

    pub fn flat_slope(&self) -> f64 {
        if self.left_slope.abs() >= self.right_slope.abs() {
            self.right_slope
        } else {
            self.left_slope
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: FitModel,
    /// `d ln ρ / d|x|` (exponential), `d ln ρ / d(x - center)²` (Gaussian) or
    /// the steep slope (two exponentials).
    pub slope: f64,
    pub intercept: f64,
    /// Decay length `-1/slope` (exponential) or variance `-1/(2 slope)` (Gaussian).
    pub scale: f64,
    pub center: f64,
    pub r_squared: f64,
    pub fit_range: (f64, f64),
    pub n_bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_exponential: Option<TwoExponentialParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileVerdict {
    Exponential,
    Gaussian,
}

impl ProfileVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProfileVerdict::Exponential => "exponential",
            ProfileVerdict::Gaussian => "gaussian",
        }
    }

    /// Compare exponential and Gaussian fits over the same bins.
    pub fn decide(h: &Histogram, options: &FitOptions) -> Result<(ProfileVerdict, FitReport, FitReport)> {
        let e = fit_exponential_with(h, options)?;
        let g = fit_gaussian_with(h, options)?;
        let v = if e.r_squared > g.r_squared {
            ProfileVerdict::Exponential
        } else {
            ProfileVerdict::Gaussian
        };
        Ok((v, e, g))
    }
}

/// `(coordinate, ln density)` of the bins that pass the range and floor.
fn usable_bins(h: &Histogram, options: &FitOptions) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = options.range.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let keep = |i: usize| -> bool {
        let d = h.density[i];
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        match options.floor {
            DensityFloor::Auto if h.samples > 0 => h.count(i) >= DEFAULT_MIN_COUNTS,
            DensityFloor::Auto => d > DEFAULT_MIN_DENSITY,
            DensityFloor::MinCounts(c) => h.count(i) >= c,
            DensityFloor::MinDensity(f) => d > f,
        }
    };
    (0..h.len())
        .filter(|&i| h.centers[i] >= lo && h.centers[i] <= hi && keep(i))
        .map(|i| (h.centers[i], h.density[i].ln()))
        .unzip()
}

fn require_bins(xs: &[f64], needed: usize, what: &str) -> Result<()> {
    if xs.len() < needed {
        return Err(Error::Fit(format!(
            "{what} fit needs >= {needed} bins above the density floor, found {}",
            xs.len()
        )));
    }
    Ok(())
}

fn span(xs: &[f64]) -> (f64, f64) {
    (
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

/// `ρ ∝ exp(slope·|x|)` over the given range.
pub fn fit_exponential(h: &Histogram, fit_range: (f64, f64)) -> Result<FitReport> {
    fit_exponential_with(h, &FitOptions::range(fit_range.0, fit_range.1))
}

pub fn fit_exponential_with(h: &Histogram, options: &FitOptions) -> Result<FitReport> {
    let (xs, ys) = usable_bins(h, options);
    require_bins(&xs, 5, "exponential")?;
    let ax: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
    let line = linear_fit(&ax, &ys).ok_or_else(|| Error::Fit("degenerate exponential fit".into()))?;
    if !(line.slope < 0.0) {
        return Err(Error::Fit(format!("profile does not decay (slope {})", line.slope)));
    }
    Ok(FitReport {
        model: FitModel::Exponential,
        slope: line.slope,
        intercept: line.intercept,
        scale: -1.0 / line.slope,
        center: 0.0,
        r_squared: line.r_squared,
        fit_range: span(&xs),
        n_bins: xs.len(),
        two_exponential: None,
    })
}

/// `ρ ∝ exp(slope·(x - x̄)²)`, `x̄` the density-weighted mean of the fitted bins.
pub fn fit_gaussian(h: &Histogram, fit_range: (f64, f64)) -> Result<FitReport> {
    fit_gaussian_with(h, &FitOptions::range(fit_range.0, fit_range.1))
}

pub fn fit_gaussian_with(h: &Histogram, options: &FitOptions) -> Result<FitReport> {
    let (xs, ys) = usable_bins(h, options);
    require_bins(&xs, 5, "Gaussian")?;
    let wsum: f64 = ys.iter().map(|y| y.exp()).sum();
    let center = xs.iter().zip(&ys).map(|(x, y)| x * y.exp()).sum::<f64>() / wsum;
    let sq: Vec<f64> = xs.iter().map(|x| (x - center).powi(2)).collect();
    let line = linear_fit(&sq, &ys).ok_or_else(|| Error::Fit("degenerate Gaussian fit".into()))?;
    if !(line.slope < 0.0) {
        return Err(Error::Fit(format!("profile does not decay (slope {})", line.slope)));
    }
    Ok(FitReport {
        model: FitModel::Gaussian,
        slope: line.slope,
        intercept: line.intercept,
        scale: -0.5 / line.slope,
        center,
        r_squared: line.r_squared,
        fit_range: span(&xs),
        n_bins: xs.len(),
        two_exponential: None,
    })
}

/// Minimum bins on each side of the breakpoint.
const MIN_SEGMENT: usize = 3;
/// Slopes closer than this ratio count as one exponential.
const DISTINCT_SLOPE_RATIO: f64 = 1.5;

/// Two exponentials joined at the breakpoint minimizing the total squared
/// error of two independent line fits to `ln ρ`.
pub fn fit_two_exponential(h: &Histogram) -> Result<FitReport> {
    fit_two_exponential_with(h, &FitOptions::default())
}

pub fn fit_two_exponential_with(h: &Histogram, options: &FitOptions) -> Result<FitReport> {
    let (xs, ys) = usable_bins(h, options);
    require_bins(&xs, 12, "two-exponential")?;
    let n = xs.len();

    let mut best: Option<(usize, LineFit, LineFit)> = None;
    for split in MIN_SEGMENT..=n - MIN_SEGMENT {
        let (Some(l), Some(r)) = (
            linear_fit(&xs[..split], &ys[..split]),
            linear_fit(&xs[split..], &ys[split..]),
        ) else {
            continue;
        };
        if best.as_ref().is_none_or(|(_, bl, br)| l.sse + r.sse < bl.sse + br.sse) {
            best = Some((split, l, r));
        }
    }
    let (split, left, right) = best.ok_or_else(|| Error::Fit("no admissible breakpoint".into()))?;
    let at_edge = split == MIN_SEGMENT || split == n - MIN_SEGMENT;
    let (hi, lo) = if left.slope.abs() >= right.slope.abs() {
        (left.slope.abs(), right.slope.abs())
    } else {
        (right.slope.abs(), left.slope.abs())
    };
    let indistinct = hi < DISTINCT_SLOPE_RATIO * lo;
    let params = TwoExponentialParams {
        left_slope: left.slope,
        left_intercept: left.intercept,
        right_slope: right.slope,
        right_intercept: right.intercept,
        breakpoint: 0.5 * (xs[split - 1] + xs[split]),
        fallback: at_edge || indistinct,
    };

    let mean = ys.iter().sum::<f64>() / n as f64;
    let sst: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let r_squared = if sst > 0.0 {
        (1.0 - (left.sse + right.sse) / sst).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let steep = params.steep_slope();
    Ok(FitReport {
        model: FitModel::TwoExponential,
        slope: steep,
        intercept: if steep == left.slope {
            left.intercept
        } else {
            right.intercept
        },
        scale: -1.0 / steep,
        center: 0.0,
        r_squared,
        fit_range: span(&xs),
        n_bins: n,
        two_exponential: Some(params),
    })
}
