//! Per-generator allowable power fluctuation: the single-frequency limits
//! from shaft stress and blade vibration, and the multi-frequency bound
//! `P_e^max` that caps the sum of all subsynchronous amplitudes.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fatigue::GoodmanEnvelope;
use crate::model::{MaterialSpec, ShaftAssembly};
use crate::shaft::{FreqResponseSample, FrequencyGrid, LinearShaftModel, OperatingPoint};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitConfig {
    /// Absolute cap as a fraction of the machine rating.
    pub cap_fraction: f64,
    pub delta_f_max_hz: f64,
    pub grid: FrequencyGrid,
}

impl Default for LimitConfig {
    fn default() -> Self {
        LimitConfig {
            cap_fraction: 0.20,
            delta_f_max_hz: 1.5,
            grid: FrequencyGrid::default(),
        }
    }
}

impl LimitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cap_fraction > 0.0 && self.cap_fraction <= 1.0) {
            return Err(Error::Validation(format!(
                "cap_fraction must be in (0, 1], got {}",
                self.cap_fraction
            )));
        }
        if !(self.delta_f_max_hz > 0.0) {
            return Err(Error::Validation(format!(
                "delta_f_max must be positive, got {}",
                self.delta_f_max_hz
            )));
        }
        self.grid.validate()
    }
}

/// Allowable power amplitude versus frequency for one generator. All power
/// values in MW.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitProfile {
    pub generator: String,
    pub mva_rating: f64,
    /// Electrical rad/s.
    pub omegas: Vec<f64>,
    pub p_tor_max: Vec<f64>,
    pub p_vib_max: Vec<f64>,
    pub p_max_curve: Vec<f64>,
    pub p_e_max: f64,
    pub cap_fraction: f64,
    /// σ_ra0^max per section.
    pub allowables: Vec<f64>,
    /// σ_rm0 per section.
    pub mean_stress: Vec<f64>,
}

impl LimitProfile {
    pub fn freqs_hz(&self) -> Vec<f64> {
        self.omegas.iter().map(|w| w / (2.0 * PI)).collect()
    }

    pub fn cap_mw(&self) -> f64 {
        self.cap_fraction * self.mva_rating
    }

    /// Index of the grid point where the curve attains `p_e_max`.
    pub fn argmin(&self) -> usize {
        self.p_max_curve
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Indices of interior local minima of the curve that dip below the cap.
    pub fn notches(&self) -> Vec<usize> {
        let c = &self.p_max_curve;
        let cap = self.cap_mw();
        (1..c.len().saturating_sub(1))
            .filter(|&i| c[i] < cap && c[i] <= c[i - 1] && c[i] <= c[i + 1] && (c[i] < c[i - 1] || c[i] < c[i + 1]))
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Validation(format!("{other:?}")),
        })?;
        w.write_record(["f_hz", "P_tor_max_MW", "P_vib_max_MW", "P_max_MW"])?;
        for (i, f) in self.freqs_hz().iter().enumerate() {
            w.write_record([
                format!("{f:.9e}"),
                format!("{:.9e}", self.p_tor_max[i]),
                format!("{:.9e}", self.p_vib_max[i]),
                format!("{:.9e}", self.p_max_curve[i]),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Per-frequency, per-section limits `σ^max_r / G_ri` in p.u. power.
/// Infinite gain gives 0 and zero gain gives infinity.
pub fn torsional_limit_curve(
    samples: &[FreqResponseSample],
    allowables: &[f64],
) -> Result<Vec<Vec<f64>>> {
    samples
        .iter()
        .map(|s| {
            if s.stress_gain.len() != allowables.len() {
                return Err(Error::Domain(format!(
                    "{} allowables for {} sections",
                    allowables.len(),
                    s.stress_gain.len()
                )));
            }
            Ok(s.stress_gain
                .iter()
                .zip(allowables)
                .map(|(&g, &a)| quotient(a, g))
                .collect())
        })
        .collect()
}

/// Minimum over sections of [`torsional_limit_curve`]; infinity for a
/// shaft without sections.
pub fn torsional_limit_min(per_section: &[Vec<f64>]) -> Vec<f64> {
    per_section
        .iter()
        .map(|row| row.iter().cloned().fold(f64::INFINITY, f64::min))
        .collect()
}

/// `Δf^max / |G_f|` per frequency in p.u. power.
pub fn vibration_limit_curve(samples: &[FreqResponseSample], delta_f_max: f64) -> Result<Vec<f64>> {
    if !(delta_f_max > 0.0) {
        return Err(Error::Domain(format!(
            "delta_f_max must be positive, got {delta_f_max}"
        )));
    }
    Ok(samples
        .iter()
        .map(|s| quotient(delta_f_max, s.freq_gain))
        .collect())
}

/// Infimum of the curve.
pub fn multi_frequency_bound(curve: &[f64]) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::Domain("empty frequency grid".into()));
    }
    Ok(curve.iter().cloned().fold(f64::INFINITY, f64::min))
}

fn quotient(allowed: f64, gain: f64) -> f64 {
    if gain.is_infinite() {
        0.0
    } else if gain == 0.0 {
        f64::INFINITY
    } else {
        allowed / gain
    }
}

/// Allowable amplitude of each section at its operating mean stress.
pub fn section_allowables(model: &LinearShaftModel, material: &MaterialSpec) -> Result<Vec<f64>> {
    let env = GoodmanEnvelope::new(material.clone());
    model
        .mean_stress
        .iter()
        .map(|m| env.allowable_amplitude(m.abs()))
        .collect()
}

/// Grid for a model: coarse steps refined around its undamped modes.
pub fn model_grid(model: &LinearShaftModel, grid: &FrequencyGrid) -> Vec<f64> {
    grid.points_rad(model.shaft.sync_freq_hz, &model.undamped_modes())
}

/// Full limit profile of one generator.
pub fn compute_limit_profile(
    generator: &str,
    model: &LinearShaftModel,
    material: &MaterialSpec,
    config: &LimitConfig,
) -> Result<LimitProfile> {
    config.validate()?;
    let allowables = section_allowables(model, material)?;
    let omegas = model_grid(model, &config.grid);
    let samples = model.freq_response(&omegas);
    profile_from_samples(generator, model, &samples, allowables, config)
}

/// P_e^max before and after raising one damping coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingCheck {
    /// `D_self[k]` or `D_mutual[k]`.
    pub coefficient: String,
    pub base_mw: f64,
    pub raised_mw: f64,
}

impl DampingCheck {
    pub fn lowers_bound(&self) -> bool {
        self.raised_mw < self.base_mw * (1.0 - 1e-9)
    }
}

/// Raises each self and mutual damping coefficient in turn to
/// `max(D·(1 + step), step)` and recomputes P_e^max. More damping is
/// expected not to lower the bound; this is a diagnostic, not a guarantee.
pub fn damping_monotonicity(
    shaft: &ShaftAssembly,
    op: OperatingPoint,
    material: &MaterialSpec,
    config: &LimitConfig,
    step: f64,
) -> Result<Vec<DampingCheck>> {
    if !(step > 0.0) {
        return Err(Error::Validation(format!("damping step must be positive, got {step}")));
    }
    let bound = |s: &ShaftAssembly| -> Result<f64> {
        let model = LinearShaftModel::new(s, op)?;
        Ok(compute_limit_profile("", &model, material, config)?.p_e_max)
    };
    let raise = |d: f64| (d * (1.0 + step)).max(step);
    let base_mw = bound(shaft)?;
    let mut checks = Vec::new();
    for k in 0..shaft.n_masses() {
        let mut s = shaft.clone();
        s.masses[k].self_damping = raise(s.masses[k].self_damping);
        checks.push(DampingCheck {
            coefficient: format!("D_self[{k}]"),
            base_mw,
            raised_mw: bound(&s)?,
        });
    }
    for k in 0..shaft.n_sections() {
        let mut s = shaft.clone();
        s.sections[k].mutual_damping = raise(s.sections[k].mutual_damping);
        checks.push(DampingCheck {
            coefficient: format!("D_mutual[{k}]"),
            base_mw,
            raised_mw: bound(&s)?,
        });
    }
    Ok(checks)
}

/// Builds the profile from precomputed frequency-response samples.
pub fn profile_from_samples(
    generator: &str,
    model: &LinearShaftModel,
    samples: &[FreqResponseSample],
    allowables: Vec<f64>,
    config: &LimitConfig,
) -> Result<LimitProfile> {
    let mva = model.shaft.mva_rating;
    let cap = config.cap_fraction * mva;
    let tor = torsional_limit_min(&torsional_limit_curve(samples, &allowables)?);
    let vib = vibration_limit_curve(samples, config.delta_f_max_hz)?;
    let p_tor_max: Vec<f64> = tor.iter().map(|p| p * mva).collect();
    let p_vib_max: Vec<f64> = vib.iter().map(|p| p * mva).collect();
    let p_max_curve: Vec<f64> = p_tor_max
        .iter()
        .zip(&p_vib_max)
        .map(|(t, v)| t.min(*v).min(cap))
        .collect();
    let p_e_max = multi_frequency_bound(&p_max_curve)?;
    Ok(LimitProfile {
        generator: generator.to_string(),
        mva_rating: mva,
        omegas: samples.iter().map(|s| s.omega).collect(),
        p_tor_max,
        p_vib_max,
        p_max_curve,
        p_e_max,
        cap_fraction: config.cap_fraction,
        allowables,
        mean_stress: model.mean_stress.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(gains: Vec<f64>, fg: f64) -> FreqResponseSample {
        FreqResponseSample {
            omega: 10.0,
            stress_phase: vec![0.0; gains.len()],
            stress_gain: gains,
            freq_gain: fg,
        }
    }

    #[test]
    fn torsional_quotient_and_min() {
        let per = torsional_limit_curve(&[sample(vec![4.0], 1.0)], &[2.0]).unwrap();
        assert_eq!(per[0][0], 0.5);
        let per = torsional_limit_curve(&[sample(vec![2.5, 10.0], 1.0)], &[2.0, 3.0]).unwrap();
        assert_eq!(torsional_limit_min(&per), vec![0.3]);
    }

    #[test]
    fn infinite_gain_gives_zero_limit() {
        let s = sample(vec![f64::INFINITY], f64::INFINITY);
        assert_eq!(torsional_limit_curve(std::slice::from_ref(&s), &[2.0]).unwrap()[0][0], 0.0);
        assert_eq!(vibration_limit_curve(&[s], 1.5).unwrap()[0], 0.0);
    }

    #[test]
    fn vibration_quotient_scales_linearly() {
        let s = [sample(vec![], 0.75)];
        assert_eq!(vibration_limit_curve(&s, 1.5).unwrap()[0], 2.0);
        assert_eq!(vibration_limit_curve(&s, 0.75).unwrap()[0], 1.0);
        assert!(vibration_limit_curve(&s, 0.0).is_err());
        assert!(vibration_limit_curve(&[sample(vec![], 0.0)], 1.5).unwrap()[0].is_infinite());
    }

    #[test]
    fn bound_is_the_infimum() {
        assert_eq!(multi_frequency_bound(&[3.0, 3.0, 3.0]).unwrap(), 3.0);
        assert_eq!(multi_frequency_bound(&[3.0, 1.2, 3.0]).unwrap(), 1.2);
        assert!(multi_frequency_bound(&[]).is_err());
    }
}
