//! Time-domain validation: data-center fluctuation scenarios mapped through
//! interaction factors onto each generator's shaft model.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fatigue::{miner_damage, rainflow};
use crate::interaction::IFMatrix;
use crate::model::{read_json, MaterialSpec};
use crate::shaft::{max_step, simulate_nonlinear, LinearShaftModel, SampledSignal, SimOptions, Trajectory};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneSpec {
    pub freq_hz: f64,
    pub amplitude_mw: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteScenarioSpec {
    pub bus: u32,
    #[serde(default)]
    pub idle_mw: f64,
    /// Compute-stage level; equal to `idle_mw` when absent (no step).
    #[serde(default)]
    pub compute_mw: Option<f64>,
    #[serde(default)]
    pub step_time_s: f64,
    #[serde(default)]
    pub tones: Vec<ToneSpec>,
}

impl SiteScenarioSpec {
    fn compute_level(&self) -> f64 {
        self.compute_mw.unwrap_or(self.idle_mw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub label: String,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    /// Idle/compute transition rate limit, MW/s.
    pub ramp_limit_mw_per_s: f64,
    pub sites: Vec<SiteScenarioSpec>,
}

impl ScenarioSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// Copy with every tone amplitude multiplied by `factor`.
    pub fn scaled_tones(&self, factor: f64) -> Self {
        let mut s = self.clone();
        for site in &mut s.sites {
            for t in &mut site.tones {
                t.amplitude_mw *= factor;
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteSeries {
    pub bus: u32,
    /// MW, one value per sample.
    pub values: Vec<f64>,
}

/// Sampled data-center power at each site on a common time base.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub label: String,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub sites: Vec<SiteSeries>,
    /// Times at which an idle/compute ramp finishes.
    pub ramp_ends: Vec<f64>,
}

impl Scenario {
    pub fn n_samples(&self) -> usize {
        self.sites.first().map_or(0, |s| s.values.len())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }
}

/// Builds site power series: a rate-limited step between idle and compute
/// levels plus sinusoids. With a step present the tones fade in with the
/// ramp progress; without one they are on from the start.
pub fn synthesize_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    if !(spec.ramp_limit_mw_per_s > 0.0) {
        return Err(Error::Validation(format!(
            "ramp limit must be positive, got {}",
            spec.ramp_limit_mw_per_s
        )));
    }
    if !(spec.duration_s > 0.0 && spec.sample_rate_hz > 0.0) {
        return Err(Error::Validation("duration and sample rate must be positive".into()));
    }
    let nyquist = spec.sample_rate_hz / 2.0;
    for site in &spec.sites {
        for t in &site.tones {
            if !(t.freq_hz > 0.0 && t.freq_hz < nyquist) {
                return Err(Error::Validation(format!(
                    "tone at {} Hz for bus {} is outside (0, {nyquist}) Hz",
                    t.freq_hz, site.bus
                )));
            }
            if !(t.amplitude_mw >= 0.0) {
                return Err(Error::Validation("tone amplitudes must be nonnegative".into()));
            }
        }
    }
    let n = (spec.duration_s * spec.sample_rate_hz).round() as usize + 1;
    let dt = 1.0 / spec.sample_rate_hz;
    let mut ramp_ends = Vec::new();
    let sites = spec
        .sites
        .iter()
        .map(|site| {
            let delta = site.compute_level() - site.idle_mw;
            let ramp_time = delta.abs() / spec.ramp_limit_mw_per_s;
            if delta != 0.0 {
                ramp_ends.push(site.step_time_s + ramp_time);
            }
            let values = (0..n)
                .map(|k| {
                    let t = k as f64 * dt;
                    let progress = if delta == 0.0 {
                        1.0
                    } else if t <= site.step_time_s {
                        0.0
                    } else {
                        ((t - site.step_time_s) / ramp_time).min(1.0)
                    };
                    let base = site.idle_mw + if delta == 0.0 { 0.0 } else { progress * delta };
                    let tones: f64 = site
                        .tones
                        .iter()
                        .map(|tn| tn.amplitude_mw * (2.0 * PI * tn.freq_hz * t + tn.phase).sin())
                        .sum();
                    base + progress * tones
                })
                .collect();
            SiteSeries {
                bus: site.bus,
                values,
            }
        })
        .collect();
    Ok(Scenario {
        label: spec.label.clone(),
        duration_s: spec.duration_s,
        sample_rate_hz: spec.sample_rate_hz,
        sites,
        ramp_ends,
    })
}

/// A generator prepared for validation.
#[derive(Debug, Clone)]
pub struct MachineCase {
    pub generator: String,
    pub model: LinearShaftModel,
    pub material: MaterialSpec,
    /// σ_ra0^max per section.
    pub allowables: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub delta_f_max_hz: f64,
    /// Trailing window for the steady amplitude, s.
    pub steady_window_s: f64,
    /// Settling time excluded after each ramp, s.
    pub settle_s: f64,
    pub keep_trajectories: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            delta_f_max_hz: 1.5,
            steady_window_s: 10.0,
            settle_s: 5.0,
            keep_trajectories: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionVerdict {
    pub section: usize,
    pub mean_stress: f64,
    pub allowable: f64,
    /// Largest `|σ(t) − σ_rm0|` over the run.
    pub peak_deviation: f64,
    /// `peak_deviation / allowable`.
    pub normalized_peak: f64,
    /// Half peak-to-peak over the trailing window; `None` when the window
    /// is entirely inside a settling period.
    pub steady_amplitude: Option<f64>,
    /// Midrange of the trailing window minus σ_rm0.
    pub mean_drift: Option<f64>,
    pub damage: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneratorVerdict {
    pub generator: String,
    pub pass: bool,
    pub sections: Vec<SectionVerdict>,
    pub peak_freq_dev_hz: f64,
    pub delta_f_max_hz: f64,
    pub max_damage: f64,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioVerdict {
    pub label: String,
    pub pass: bool,
    pub generators: Vec<GeneratorVerdict>,
}

/// Per-unit electrical power forcing of each machine,
/// `u_i = Σ_j IF_ij·(P_j(t) − P_j(0)) / S_i`.
pub fn machine_forcing(
    scenario: &Scenario,
    ifs: &IFMatrix,
    generator: &str,
    mva: f64,
) -> Result<Vec<f64>> {
    let gi = ifs
        .generator_index(generator)
        .ok_or_else(|| Error::Validation(format!("generator `{generator}` has no interaction factors")))?;
    let mut u = vec![0.0; scenario.n_samples()];
    for site in &scenario.sites {
        let j = ifs
            .site_index(site.bus)
            .ok_or_else(|| Error::Validation(format!("bus {} has no interaction factors", site.bus)))?;
        if !ifs.valid[j] {
            return Err(Error::Validation(format!(
                "interaction factors for bus {} are invalid",
                site.bus
            )));
        }
        let w = ifs.get(gi, j) / mva;
        let p0 = site.values[0];
        for (uk, p) in u.iter_mut().zip(&site.values) {
            *uk += w * (p - p0);
        }
    }
    Ok(u)
}

/// Simulates every machine under the scenario and judges stress, frequency
/// deviation and fatigue damage.
pub fn validate_scenario(
    scenario: &Scenario,
    ifs: &IFMatrix,
    machines: &[MachineCase],
    opts: &ValidationOptions,
) -> Result<ScenarioVerdict> {
    if scenario.sites.iter().any(|s| s.values.len() != scenario.n_samples()) {
        return Err(Error::Validation("scenario series differ in length".into()));
    }
    let wrap = |e: Error| Error::Scenario {
        label: scenario.label.clone(),
        source: Box::new(e),
    };
    let generators = machines
        .par_iter()
        .map(|m| validate_machine(scenario, ifs, m, opts))
        .collect::<Result<Vec<_>>>()
        .map_err(wrap)?;
    Ok(ScenarioVerdict {
        label: scenario.label.clone(),
        pass: generators.iter().all(|g| g.pass),
        generators,
    })
}

fn validate_machine(
    scenario: &Scenario,
    ifs: &IFMatrix,
    machine: &MachineCase,
    opts: &ValidationOptions,
) -> Result<GeneratorVerdict> {
    let model = &machine.model;
    let u = machine_forcing(scenario, ifs, &machine.generator, model.shaft.mva_rating)?;
    let dt_s = scenario.dt();
    let substeps = (dt_s / max_step(model)).ceil().max(1.0) as usize;
    let signal = SampledSignal::new(dt_s, u)?;
    let t_end = (scenario.n_samples().saturating_sub(1)) as f64 * dt_s;
    let sim = SimOptions {
        dt: dt_s / substeps as f64,
        t_end,
        record_stride: substeps,
        initial: None,
    };
    let traj = simulate_nonlinear(model, &|t| signal.at(t), &sim)?;

    let window_start = scenario
        .ramp_ends
        .iter()
        .map(|t| t + opts.settle_s)
        .fold(t_end - opts.steady_window_s, f64::max);
    let in_window: Vec<usize> = (0..traj.len())
        .filter(|&k| traj.time[k] >= window_start - 1e-9)
        .collect();

    let mut sections = Vec::with_capacity(model.n_sections());
    for (r, series) in traj.stress.iter().enumerate() {
        let mean = model.mean_stress[r];
        let allowable = machine.allowables[r];
        let peak = series.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max);
        let normalized = if allowable > 0.0 {
            peak / allowable
        } else if peak > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let (steady, drift) = if in_window.len() >= 2 {
            let (lo, hi) = in_window.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, &k| {
                (acc.0.min(series[k]), acc.1.max(series[k]))
            });
            (Some((hi - lo) / 2.0), Some((hi + lo) / 2.0 - mean))
        } else {
            (None, None)
        };
        let damage = miner_damage(&rainflow(series)?, &machine.material)?;
        sections.push(SectionVerdict {
            section: r,
            mean_stress: mean,
            allowable,
            peak_deviation: peak,
            normalized_peak: normalized,
            steady_amplitude: steady,
            mean_drift: drift,
            damage,
        });
    }
    let peak_f = traj.freq_dev_hz.iter().map(|f| f.abs()).fold(0.0, f64::max);
    let max_damage = sections.iter().map(|s| s.damage).fold(0.0, f64::max);
    let pass = sections.iter().all(|s| s.normalized_peak <= 1.0)
        && peak_f <= opts.delta_f_max_hz
        && max_damage == 0.0;
    Ok(GeneratorVerdict {
        generator: machine.generator.clone(),
        pass,
        sections,
        peak_freq_dev_hz: peak_f,
        delta_f_max_hz: opts.delta_f_max_hz,
        max_damage,
        trajectory: opts.keep_trajectories.then_some(traj),
    })
}
