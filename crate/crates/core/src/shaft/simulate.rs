use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DVector;

use super::LinearShaftModel;
use crate::{Error, Result};

/// Speed deviation beyond which a run is declared unstable, p.u.
pub const INSTABILITY_SPEED: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Keep every `record_stride`-th step.
    pub record_stride: usize,
    /// Initial deviation from equilibrium, `(δ.., Δω̄..)`.
    pub initial: Option<Vec<f64>>,
}

impl SimOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        SimOptions {
            dt,
            t_end,
            record_stride: 1,
            initial: None,
        }
    }
}

/// Uniformly sampled signal starting at t = 0, linearly interpolated and
/// held constant past its end.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl SampledSignal {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || values.is_empty() {
            return Err(Error::Domain(
                "sampled signal needs dt > 0 and at least one sample".into(),
            ));
        }
        Ok(SampledSignal { dt, values })
    }

    pub fn at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.values[0];
        }
        let x = t / self.dt;
        let i = x.floor() as usize;
        if i + 1 >= self.values.len() {
            return *self.values.last().unwrap();
        }
        let w = x - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    pub fn duration(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }
}

/// Extremes, amplitude and mean of a stress series.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StressStats {
    pub max: f64,
    pub min: f64,
    pub amplitude: f64,
    pub mean: f64,
}

impl StressStats {
    pub fn from_series(series: &[f64]) -> Self {
        let max = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = series.iter().cloned().fold(f64::INFINITY, f64::min);
        StressStats {
            max,
            min,
            amplitude: (max - min) / 2.0,
            mean: (max + min) / 2.0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub time: Vec<f64>,
    /// Absolute rotor angles per mass, elect. rad.
    pub delta: Vec<Vec<f64>>,
    /// Per-unit speed deviation per mass.
    pub speed: Vec<Vec<f64>>,
    /// Section stress per section, including the mean.
    pub stress: Vec<Vec<f64>>,
    /// Generator frequency deviation, Hz.
    pub freq_dev_hz: Vec<f64>,
    pub mass_labels: Vec<String>,
}

impl Trajectory {
    fn with_capacity(n_mass: usize, n_sec: usize, cap: usize, labels: Vec<String>) -> Self {
        Trajectory {
            time: Vec::with_capacity(cap),
            delta: vec![Vec::with_capacity(cap); n_mass],
            speed: vec![Vec::with_capacity(cap); n_mass],
            stress: vec![Vec::with_capacity(cap); n_sec],
            freq_dev_hz: Vec::with_capacity(cap),
            mass_labels: labels,
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn stress_stats(&self, section: usize) -> StressStats {
        StressStats::from_series(&self.stress[section])
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Validation(format!("{other:?}")),
        })?;
        let mut header = vec!["t".to_string()];
        header.extend(self.mass_labels.iter().map(|l| format!("delta_{l}")));
        header.extend((0..self.stress.len()).map(|r| format!("sigma_{}", r + 1)));
        header.push("delta_f_hz".into());
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![self.time[k]];
            row.extend(self.delta.iter().map(|d| d[k]));
            row.extend(self.stress.iter().map(|s| s[k]));
            row.push(self.freq_dev_hz[k]);
            w.write_record(row.iter().map(|v| format!("{v:.9e}")))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Largest step that still resolves the fastest undamped mode with twenty
/// points per period.
pub fn max_step(model: &LinearShaftModel) -> f64 {
    match model.undamped_modes().last() {
        Some(&w) => 2.0 * PI / (20.0 * w),
        None => f64::INFINITY,
    }
}

fn check_options(model: &LinearShaftModel, opts: &SimOptions) -> Result<()> {
    if !(opts.dt > 0.0 && opts.t_end > 0.0) || opts.record_stride == 0 {
        return Err(Error::Domain(
            "simulation needs dt > 0, t_end > 0 and record_stride >= 1".into(),
        ));
    }
    let limit = max_step(model);
    if opts.dt > limit * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "dt = {} s does not resolve the highest torsional mode (need dt <= {limit:.3e} s)",
            opts.dt
        )));
    }
    if let Some(init) = &opts.initial {
        if init.len() != model.n_states() {
            return Err(Error::Domain(format!(
                "initial state has {} entries, model has {}",
                init.len(),
                model.n_states()
            )));
        }
    }
    Ok(())
}

/// Integrates the full nonlinear multi-mass equations with
/// `T_e = (E·V/X)·sin δ_gen + u(t)` by fixed-step RK4, starting from the
/// equilibrium of the model's operating point.
pub fn simulate_nonlinear(
    model: &LinearShaftModel,
    forcing: &dyn Fn(f64) -> f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    check_options(model, opts)?;
    let shaft = &model.shaft;
    let n = shaft.n_masses();
    let g = shaft.generator_index();
    let ws = shaft.sync_speed();
    let op = model.op;
    let pmax = op.e * op.v / op.x;
    let p0 = op.power();
    let tm: Vec<f64> = shaft
        .mech_torque_shares()
        .iter()
        .map(|s| s * p0)
        .collect();
    let two_h: Vec<f64> = shaft.masses.iter().map(|m| 2.0 * m.inertia_h).collect();
    let d_self: Vec<f64> = shaft.masses.iter().map(|m| m.self_damping).collect();
    let k: Vec<f64> = shaft.sections.iter().map(|s| s.stiffness).collect();
    let d_mut: Vec<f64> = shaft.sections.iter().map(|s| s.mutual_damping).collect();

    let rhs = |t: f64, x: &[f64], dx: &mut [f64]| {
        let (delta, w) = x.split_at(n);
        let u = forcing(t);
        for r in 0..n {
            dx[r] = ws * w[r];
            let mut torque = tm[r] - d_self[r] * w[r];
            if r == g {
                torque -= pmax * delta[g].sin() + u;
            }
            if r > 0 {
                torque -= k[r - 1] * (delta[r] - delta[r - 1]) + d_mut[r - 1] * (w[r] - w[r - 1]);
            }
            if r + 1 < n {
                torque -= k[r] * (delta[r] - delta[r + 1]) + d_mut[r] * (w[r] - w[r + 1]);
            }
            dx[n + r] = torque / two_h[r];
        }
    };

    let mut x = vec![0.0; 2 * n];
    x[..n].copy_from_slice(&model.equilibrium_angles);
    if let Some(init) = &opts.initial {
        x.iter_mut().zip(init).for_each(|(a, b)| *a += b);
    }
    let coeff: Vec<f64> = (0..shaft.n_sections())
        .map(|r| shaft.stress_coefficient(r) * k[r])
        .collect();
    let fs = ws / (2.0 * PI);
    let labels = shaft.masses.iter().map(|m| m.label.clone()).collect();
    let record = |traj: &mut Trajectory, t: f64, x: &[f64]| {
        traj.time.push(t);
        for r in 0..n {
            traj.delta[r].push(x[r]);
            traj.speed[r].push(x[n + r]);
        }
        for (s, c) in coeff.iter().enumerate() {
            traj.stress[s].push(c * (x[s] - x[s + 1]));
        }
        traj.freq_dev_hz.push(fs * x[n + g]);
    };
    integrate(
        &rhs,
        x,
        opts,
        n,
        shaft.n_sections(),
        labels,
        &shaft.masses.iter().map(|m| m.label.as_str()).collect::<Vec<_>>(),
        record,
    )
}

/// Same as [`simulate_nonlinear`] for the linearized model `ẋ = A·x + B·u`.
/// Angles and stresses are reported as absolute values around the
/// equilibrium.
pub fn simulate_linear(
    model: &LinearShaftModel,
    forcing: &dyn Fn(f64) -> f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    check_options(model, opts)?;
    let shaft = &model.shaft;
    let n = shaft.n_masses();
    let g = shaft.generator_index();
    let a = &model.a;
    let b = &model.b;
    let rhs = |t: f64, x: &[f64], dx: &mut [f64]| {
        let xv = DVector::from_column_slice(x);
        let d = a * xv + b * forcing(t);
        dx.copy_from_slice(d.as_slice());
    };
    let x = opts.initial.clone().unwrap_or_else(|| vec![0.0; 2 * n]);
    let eq = model.equilibrium_angles.clone();
    let mean = model.mean_stress.clone();
    let c = &model.c_stress;
    let fs = model.c_freq[n + g];
    let labels = shaft.masses.iter().map(|m| m.label.clone()).collect();
    let record = |traj: &mut Trajectory, t: f64, x: &[f64]| {
        traj.time.push(t);
        for r in 0..n {
            traj.delta[r].push(eq[r] + x[r]);
            traj.speed[r].push(x[n + r]);
        }
        for s in 0..c.nrows() {
            let dev: f64 = (0..2 * n).map(|j| c[(s, j)] * x[j]).sum();
            traj.stress[s].push(mean[s] + dev);
        }
        traj.freq_dev_hz.push(fs * x[n + g]);
    };
    integrate(
        &rhs,
        x,
        opts,
        n,
        shaft.n_sections(),
        labels,
        &shaft.masses.iter().map(|m| m.label.as_str()).collect::<Vec<_>>(),
        record,
    )
}

type Rhs<'a> = dyn Fn(f64, &[f64], &mut [f64]) + 'a;

#[allow(clippy::too_many_arguments)]
fn integrate(
    rhs: &Rhs,
    mut x: Vec<f64>,
    opts: &SimOptions,
    n_mass: usize,
    n_sec: usize,
    labels: Vec<String>,
    label_refs: &[&str],
    record: impl Fn(&mut Trajectory, f64, &[f64]),
) -> Result<Trajectory> {
    let dt = opts.dt;
    let steps = (opts.t_end / dt).round() as usize;
    let mut traj = Trajectory::with_capacity(n_mass, n_sec, steps / opts.record_stride + 1, labels);
    let m = x.len();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut tmp = vec![0.0; m];
    record(&mut traj, 0.0, &x);
    for step in 0..steps {
        let t = step as f64 * dt;
        rhs(t, &x, &mut k1);
        for i in 0..m {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        rhs(t + 0.5 * dt, &tmp, &mut k2);
        for i in 0..m {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        rhs(t + 0.5 * dt, &tmp, &mut k3);
        for i in 0..m {
            tmp[i] = x[i] + dt * k3[i];
        }
        rhs(t + dt, &tmp, &mut k4);
        for i in 0..m {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = (step + 1) as f64 * dt;
        for r in 0..n_mass {
            let w = x[n_mass + r];
            if !(w.abs() <= INSTABILITY_SPEED) {
                return Err(Error::Unstable {
                    time: t_next,
                    mass: label_refs[r].to_string(),
                    speed: w,
                });
            }
        }
        if (step + 1) % opts.record_stride == 0 {
            record(&mut traj, t_next, &x);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RotorMass, ShaftAssembly, ShaftSection};
    use crate::shaft::{build_linear_model, OperatingPoint};
    use approx::assert_relative_eq;

    fn one_mass(h: f64) -> ShaftAssembly {
        ShaftAssembly {
            name: "one".into(),
            masses: vec![RotorMass {
                label: "G".into(),
                inertia_h: h,
                self_damping: 0.0,
                applies_mech_torque: false,
                is_generator: true,
                mech_torque_share: None,
            }],
            sections: vec![],
            pole_count: 2,
            mva_rating: 100.0,
            sync_freq_hz: 60.0,
        }
    }

    fn three_mass() -> ShaftAssembly {
        let m = |l: &str, h: f64, gen: bool| RotorMass {
            label: l.into(),
            inertia_h: h,
            self_damping: 0.05,
            applies_mech_torque: !gen,
            is_generator: gen,
            mech_torque_share: None,
        };
        ShaftAssembly {
            name: "three".into(),
            masses: vec![m("T1", 0.3, false), m("T2", 0.8, false), m("G", 0.9, true)],
            sections: vec![
                ShaftSection::with_stiffness(25.0, 0.02),
                ShaftSection::with_stiffness(60.0, 0.02),
            ],
            pole_count: 2,
            mva_rating: 500.0,
            sync_freq_hz: 60.0,
        }
    }

    #[test]
    fn equilibrium_is_stationary() {
        let shaft = three_mass();
        let op = OperatingPoint::from_power(1.0, 1.0, 0.5, 0.8).unwrap();
        let model = crate::shaft::LinearShaftModel::new(&shaft, op).unwrap();
        let traj = simulate_nonlinear(&model, &|_| 0.0, &SimOptions::new(1e-3, 2.0)).unwrap();
        for (s, series) in traj.stress.iter().enumerate() {
            for v in series {
                assert_relative_eq!(*v, model.mean_stress[s], max_relative = 1e-9);
            }
        }
        assert!(traj.freq_dev_hz.iter().all(|f| f.abs() < 1e-12));
    }

    #[test]
    fn step_on_one_mass_oscillates_at_pendulum_frequency() {
        let h = 3.0;
        let shaft = one_mass(h);
        let model = build_linear_model(&shaft, 1.0, 1.0, 0.5, 0.0).unwrap();
        let ke = model.sync_coeff;
        let wn = (shaft.sync_speed() * ke / (2.0 * h)).sqrt();
        let step = 1e-3;
        let traj = simulate_nonlinear(&model, &|_| step, &SimOptions::new(1e-3, 10.0)).unwrap();
        // new equilibrium from sin δ = -step·X/(EV)
        let center = (-step * 0.5f64).asin();
        let d = &traj.delta[0];
        let crossings: Vec<f64> = (1..d.len())
            .filter(|&i| (d[i - 1] - center) < 0.0 && (d[i] - center) >= 0.0)
            .map(|i| traj.time[i])
            .collect();
        assert!(crossings.len() >= 3);
        let period = (crossings.last().unwrap() - crossings[0]) / (crossings.len() - 1) as f64;
        assert_relative_eq!(2.0 * PI / period, wn, max_relative = 5e-3);
    }

    #[test]
    fn sampled_signal_interpolates_and_holds() {
        let s = SampledSignal::new(0.5, vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(s.at(-1.0), 0.0);
        assert_relative_eq!(s.at(0.25), 0.5);
        assert_relative_eq!(s.at(0.75), 2.0);
        assert_eq!(s.at(10.0), 3.0);
    }

    #[test]
    fn coarse_step_is_rejected() {
        let shaft = three_mass();
        let model = build_linear_model(&shaft, 1.0, 1.0, 0.5, 0.3).unwrap();
        let dt = max_step(&model) * 1.5;
        assert!(matches!(
            simulate_nonlinear(&model, &|_| 0.0, &SimOptions::new(dt, 1.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn runaway_is_reported() {
        let shaft = one_mass(0.5);
        let model = build_linear_model(&shaft, 1.0, 1.0, 0.5, 0.2).unwrap();
        let err = simulate_nonlinear(&model, &|_| 5.0, &SimOptions::new(1e-3, 20.0)).unwrap_err();
        assert!(matches!(err, Error::Unstable { .. }), "{err}");
    }

    #[test]
    fn stress_stats_follow_extremes() {
        let s = StressStats::from_series(&[1.0, 4.0, -2.0, 3.0]);
        assert_eq!(s.max, 4.0);
        assert_eq!(s.min, -2.0);
        assert_eq!(s.amplitude, 3.0);
        assert_eq!(s.mean, 1.0);
    }
}
