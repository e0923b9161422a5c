use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::{Error, Result};

/// Window length required by the check, s.
pub const WINDOW_S: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplianceReport {
    pub pass: bool,
    /// Sum of single-sided amplitudes over the subsynchronous bins, MW.
    pub amplitude_sum_mw: f64,
    pub limit_mw: f64,
    pub resolution_hz: f64,
    /// `(f_hz, amplitude_MW)` for bins strictly inside `(0, f_sync)`.
    #[serde(skip)]
    pub spectrum: Vec<(f64, f64)>,
}

impl ComplianceReport {
    pub fn write_spectrum_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Validation(format!("{other:?}")),
        })?;
        w.write_record(["f_hz", "amplitude_MW"])?;
        for (f, a) in &self.spectrum {
            w.write_record([format!("{f:.6}"), format!("{a:.9e}")])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Largest spectral line.
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.spectrum
            .iter()
            .copied()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Checks one 10 s window of site power against its allowed sum of
/// subsynchronous amplitudes.
///
/// The mean is removed, a rectangular-window DFT gives 0.1 Hz bins, and the
/// single-sided amplitudes `2|X_k|/n` of every bin in `(0, f_sync)` are
/// summed. The check passes when the sum does not exceed the limit (relative
/// slack 1e-9 for rounding).
pub fn compliance_check(
    series_mw: &[f64],
    sample_rate_hz: f64,
    f_sync_hz: f64,
    limit_mw: f64,
) -> Result<ComplianceReport> {
    if !(sample_rate_hz >= 2.0 * f_sync_hz) {
        return Err(Error::Domain(format!(
            "sample rate {sample_rate_hz} Hz is below twice the synchronous frequency {f_sync_hz} Hz"
        )));
    }
    let n = series_mw.len();
    let expected = WINDOW_S * sample_rate_hz;
    if (n as f64 - expected).abs() > 1e-6 * expected {
        return Err(Error::Domain(format!(
            "window holds {n} samples ({:.4} s); exactly {WINDOW_S} s is required",
            n as f64 / sample_rate_hz
        )));
    }
    if !(limit_mw >= 0.0) {
        return Err(Error::Domain(format!("limit must be nonnegative, got {limit_mw}")));
    }
    let mean = series_mw.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series_mw
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let resolution = 1.0 / WINDOW_S;
    let top = ((f_sync_hz / resolution).round() as usize).min(n / 2 + 1);
    let spectrum: Vec<(f64, f64)> = (1..top)
        .map(|k| (k as f64 * resolution, 2.0 * buf[k].norm() / n as f64))
        .collect();
    let sum: f64 = spectrum.iter().map(|(_, a)| a).sum();
    Ok(ComplianceReport {
        pass: sum <= limit_mw * (1.0 + 1e-9),
        amplitude_sum_mw: sum,
        limit_mw,
        resolution_hz: resolution,
        spectrum,
    })
}
