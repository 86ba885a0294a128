use serde::Serialize;
use thiserror::Error;

use super::trace::Trace;
use crate::vision::Eye;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("trace is empty")]
    EmptyTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    /// s; `None` when the error never stays inside the band.
    pub settling_time: Option<f64>,
    /// Mean ‖e‖∞ over the final 20 % of the run.
    pub steady_state_error: f64,
    /// RMS image-plane speed of the face, in half-widths per second.
    pub rms_retinal_slip: f64,
    pub peak_error: f64,
    /// Fraction of records without a valid detection.
    pub lost_fraction: f64,
}

/// Missing detections count as outside the band and are skipped by the
/// averages.
pub fn metrics(trace: &Trace, settle_band: f64) -> Result<Metrics, MetricsError> {
    if trace.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let recs = &trace.records;

    // settling: last tick at which any eye was outside the band
    let mut settling_time = Some(recs[0].t);
    for (i, r) in recs.iter().enumerate() {
        let inside = r.error_inf().is_some_and(|e| e < settle_band);
        if !inside {
            settling_time = recs[i + 1..].iter().map(|n| n.t).find(|&t| t > r.t);
        }
    }

    let t_end = recs[recs.len() - 1].t;
    let t_start = recs[0].t;
    let tail_from = t_end - 0.2 * (t_end - t_start);
    let tail: Vec<f64> = recs
        .iter()
        .filter(|r| r.t >= tail_from)
        .filter_map(|r| r.error_inf())
        .collect();
    let steady_state_error = if tail.is_empty() {
        f64::NAN
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    };

    let peak_error = recs
        .iter()
        .filter_map(|r| r.error_inf())
        .fold(0.0, f64::max);

    let lost = recs.iter().filter(|r| !r.valid).count();

    Ok(Metrics {
        settling_time,
        steady_state_error,
        rms_retinal_slip: rms_retinal_slip(trace),
        peak_error,
        lost_fraction: lost as f64 / recs.len() as f64,
    })
}

/// Per-tick image speed of the face, normalised by the half-width, RMS over
/// both eyes. Pairs with a missing detection are skipped.
pub fn rms_retinal_slip(trace: &Trace) -> f64 {
    let half_width = trace.camera.width as f64 / 2.0;
    let mut sum = 0.0;
    let mut n = 0usize;
    for eye in Eye::BOTH {
        let recs: Vec<_> = trace.eye(eye).collect();
        for w in recs.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(a.valid && b.valid) {
                continue;
            }
            let dt = b.t - a.t;
            let speed = (b.u - a.u).hypot(b.v - a.v) / dt / half_width;
            sum += speed * speed;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Largest ‖e‖∞ over records at or after `from` (s); lost detections are
/// reported as `None`.
pub fn peak_error_after(trace: &Trace, from: f64) -> Option<f64> {
    let mut peak = 0.0f64;
    for r in trace.records.iter().filter(|r| r.t >= from) {
        peak = peak.max(r.error_inf()?);
    }
    Some(peak)
}
