use serde::{Deserialize, Serialize};

use crate::DRIVE_PERIOD;

pub const DEFAULT_ENVELOPE_PERIODS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub t: f64,
    pub upper: f64,
    pub lower: f64,
}

/// Envelope over windows of `DEFAULT_ENVELOPE_PERIODS` drive periods.
pub fn envelope_periods(series: &[(f64, f64)]) -> Vec<EnvelopePoint> {
    envelope(series, DEFAULT_ENVELOPE_PERIODS * DRIVE_PERIOD)
}

/// Upper and lower envelopes: the extrema of each consecutive time window of
/// length `window`, placed at the time they occur and linearly interpolated
/// back onto the sample times (held constant beyond the first/last anchor).
pub fn envelope(series: &[(f64, f64)], window: f64) -> Vec<EnvelopePoint> {
    if series.is_empty() {
        return Vec::new();
    }
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    let mut start = 0;
    while start < series.len() {
        let t_end = series[start].0 + window;
        let mut end = start + 1;
        while end < series.len() && series[end].0 < t_end {
            end += 1;
        }
        let block = &series[start..end];
        let hi = block
            .iter()
            .copied()
            .fold((f64::NAN, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let lo = block
            .iter()
            .copied()
            .fold((f64::NAN, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        maxima.push(hi);
        minima.push(lo);
        start = end;
    }
    series
        .iter()
        .map(|&(t, _)| EnvelopePoint {
            t,
            upper: interpolate(&maxima, t),
            lower: interpolate(&minima, t),
        })
        .collect()
}

fn interpolate(anchors: &[(f64, f64)], t: f64) -> f64 {
    let i = anchors.partition_point(|a| a.0 <= t);
    if i == 0 {
        return anchors[0].1;
    }
    if i == anchors.len() {
        return anchors[i - 1].1;
    }
    let (t0, y0) = anchors[i - 1];
    let (t1, y1) = anchors[i];
    if t1 == t0 {
        return y0;
    }
    y0 + (y1 - y0) * (t - t0) / (t1 - t0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series() {
        let s: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 3.0)).collect();
        for e in envelope(&s, 10.0) {
            assert_eq!((e.upper, e.lower), (3.0, 3.0));
        }
    }

    #[test]
    fn sinusoid_amplitude() {
        let a = 2.5;
        let s: Vec<(f64, f64)> = (0..5000)
            .map(|i| {
                let t = i as f64 * 0.05;
                (t, a * (1.3 * t).sin())
            })
            .collect();
        for e in envelope(&s, 10.0) {
            assert!((e.upper - a).abs() < 0.01, "upper {}", e.upper);
            assert!((e.lower + a).abs() < 0.01, "lower {}", e.lower);
        }
    }

    #[test]
    fn envelope_on_sample_grid() {
        let s: Vec<(f64, f64)> = (0..400)
            .map(|i| (i as f64, (i as f64 * 0.7).sin() * (i as f64 * 0.01).cos()))
            .collect();
        let env = envelope(&s, 15.0);
        assert_eq!(env.len(), s.len());
        assert!(envelope(&[], 1.0).is_empty());
    }
}
