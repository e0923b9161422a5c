//! Multi-mass shaft on an infinite bus: linear state-space model, torsional
//! modes, frequency response and time-domain integration.

mod grid;
mod linear;
mod simulate;

use std::path::Path;

pub use grid::FrequencyGrid;
pub use linear::{
    build_linear_model, torsional_modes, FreqResponseSample, LinearShaftModel, OperatingPoint,
};
pub use simulate::{
    max_step, simulate_linear, simulate_nonlinear, SampledSignal, SimOptions, StressStats,
    Trajectory, INSTABILITY_SPEED,
};

use crate::{Error, Result};

/// Writes a frequency sweep as `omega_hz, gain_1..gain_N, freq_gain`.
/// Infinite gains are written as `inf`.
pub fn write_sweep_csv(path: &Path, samples: &[FreqResponseSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Validation(format!("{other:?}")),
    })?;
    let n = samples.first().map_or(0, |s| s.stress_gain.len());
    let mut header = vec!["omega_hz".to_string()];
    header.extend((1..=n).map(|r| format!("gain_{r}")));
    header.push("freq_gain".into());
    w.write_record(&header)?;
    for s in samples {
        let mut row = vec![format!("{:.9e}", s.freq_hz())];
        row.extend(s.stress_gain.iter().map(|g| format!("{g:.9e}")));
        row.push(format!("{:.9e}", s.freq_gain));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
