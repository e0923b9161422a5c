use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::model::ShaftAssembly;
use crate::{Error, Result};

/// Single-machine infinite-bus operating point, p.u. on the machine base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    /// Infinite-bus voltage magnitude.
    pub e: f64,
    /// Terminal voltage magnitude.
    pub v: f64,
    /// Reactance between the two.
    pub x: f64,
    /// Generator rotor angle relative to the infinite bus, elect. rad.
    pub delta0: f64,
}

impl OperatingPoint {
    pub fn new(e: f64, v: f64, x: f64, delta0: f64) -> Result<Self> {
        let op = OperatingPoint { e, v, x, delta0 };
        op.check()?;
        Ok(op)
    }

    /// Solves `P₀ = E·V·sin δ₀ / X` for δ₀.
    pub fn from_power(e: f64, v: f64, x: f64, p0: f64) -> Result<Self> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("reactance must be positive, got {x}")));
        }
        let s = p0 * x / (e * v);
        if !(s.abs() < 1.0) {
            return Err(Error::Domain(format!(
                "no stable equilibrium: P0·X/(E·V) = {s:.4} (P0 = {p0}, E = {e}, V = {v}, X = {x})"
            )));
        }
        Self::new(e, v, x, s.asin())
    }

    fn check(&self) -> Result<()> {
        if !(self.x > 0.0) {
            return Err(Error::Domain(format!(
                "reactance must be positive, got {}",
                self.x
            )));
        }
        if !(self.e >= 0.0 && self.v >= 0.0) {
            return Err(Error::Domain("voltages must be nonnegative".into()));
        }
        if !(self.delta0.abs() < FRAC_PI_2) {
            return Err(Error::Domain(format!(
                "rotor angle {} rad is at or beyond pi/2; no stable equilibrium",
                self.delta0
            )));
        }
        Ok(())
    }

    /// Electrical power output, p.u.
    pub fn power(&self) -> f64 {
        self.e * self.v * self.delta0.sin() / self.x
    }

    /// Synchronizing torque coefficient `E·V·cos δ₀ / X`.
    pub fn sync_coeff(&self) -> f64 {
        self.e * self.v * self.delta0.cos() / self.x
    }
}

/// Linearized multi-mass shaft on an infinite bus.
///
/// States are `(δ₁..δₙ, Δω̄₁..Δω̄ₙ)`: angle deviations in electrical radians
/// and per-unit speed deviations, with `δ̇ = ω_s·Δω̄`. The input is an
/// exogenous electrical power (torque) change at the generator mass.
#[derive(Debug, Clone)]
pub struct LinearShaftModel {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// One row per section: stress deviation in material units.
    pub c_stress: DMatrix<f64>,
    /// Generator frequency deviation in Hz.
    pub c_freq: DVector<f64>,
    pub sync_coeff: f64,
    pub shaft: ShaftAssembly,
    pub op: OperatingPoint,
    /// Equilibrium torque carried by each section, p.u.
    pub section_torque: Vec<f64>,
    /// Equilibrium stress σ_rm0 of each section.
    pub mean_stress: Vec<f64>,
    /// Equilibrium absolute rotor angles, elect. rad.
    pub equilibrium_angles: Vec<f64>,
}

/// Frequency response of the linear model at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqResponseSample {
    /// Electrical rad/s.
    pub omega: f64,
    /// Stress amplitude per p.u. power amplitude, one per section.
    pub stress_gain: Vec<f64>,
    /// Phase of the stress response, rad.
    pub stress_phase: Vec<f64>,
    /// Frequency deviation amplitude per p.u. power amplitude, Hz.
    pub freq_gain: f64,
}

impl FreqResponseSample {
    /// True when `jω` hit an undamped pole and the gains are infinite.
    pub fn is_singular(&self) -> bool {
        self.freq_gain.is_infinite()
    }

    pub fn freq_hz(&self) -> f64 {
        self.omega / (2.0 * PI)
    }
}

/// Ratio of smallest to largest LU pivot below which `jωI - A` is treated
/// as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-13;

pub fn build_linear_model(
    shaft: &ShaftAssembly,
    e: f64,
    v: f64,
    x: f64,
    delta0: f64,
) -> Result<LinearShaftModel> {
    let op = OperatingPoint::new(e, v, x, delta0)?;
    LinearShaftModel::new(shaft, op)
}

impl LinearShaftModel {
    pub fn new(shaft: &ShaftAssembly, op: OperatingPoint) -> Result<Self> {
        op.check()?;
        check_dynamics(shaft)?;
        let n = shaft.n_masses();
        let g = shaft.generator_index();
        let ws = shaft.sync_speed();
        let ke = op.sync_coeff();

        let mut a = DMatrix::zeros(2 * n, 2 * n);
        for r in 0..n {
            a[(r, n + r)] = ws;
            let m2h = 2.0 * shaft.masses[r].inertia_h;
            a[(n + r, n + r)] -= shaft.masses[r].self_damping / m2h;
        }
        for (s, sec) in shaft.sections.iter().enumerate() {
            // section s joins masses s and s + 1
            for (me, other) in [(s, s + 1), (s + 1, s)] {
                let m2h = 2.0 * shaft.masses[me].inertia_h;
                a[(n + me, me)] -= sec.stiffness / m2h;
                a[(n + me, other)] += sec.stiffness / m2h;
                a[(n + me, n + me)] -= sec.mutual_damping / m2h;
                a[(n + me, n + other)] += sec.mutual_damping / m2h;
            }
        }
        let m2h_gen = 2.0 * shaft.masses[g].inertia_h;
        a[(n + g, g)] -= ke / m2h_gen;

        let mut b = DVector::zeros(2 * n);
        b[n + g] = -1.0 / m2h_gen;

        let mut c_stress = DMatrix::zeros(shaft.n_sections(), 2 * n);
        for (s, sec) in shaft.sections.iter().enumerate() {
            let gain = shaft.stress_coefficient(s) * sec.stiffness;
            c_stress[(s, s)] = gain;
            c_stress[(s, s + 1)] = -gain;
        }
        let mut c_freq = DVector::zeros(2 * n);
        c_freq[n + g] = ws / (2.0 * PI);

        // Equilibrium: each section carries the mechanical torque developed
        // upstream of it, less the electrical torque if the generator is
        // upstream.
        let p0 = op.power();
        let shares = shaft.mech_torque_shares();
        let mut section_torque = Vec::with_capacity(shaft.n_sections());
        let mut acc = 0.0;
        for (s, share) in shares.iter().take(shaft.n_sections()).enumerate() {
            acc += share * p0;
            if s == g {
                acc -= p0;
            }
            section_torque.push(acc);
        }
        let mean_stress = section_torque
            .iter()
            .enumerate()
            .map(|(s, t)| shaft.stress_coefficient(s) * t)
            .collect();
        let mut equilibrium_angles = vec![0.0; n];
        equilibrium_angles[g] = op.delta0;
        for s in (0..g).rev() {
            let k = shaft.sections[s].stiffness;
            let twist = if k > 0.0 { section_torque[s] / k } else { 0.0 };
            equilibrium_angles[s] = equilibrium_angles[s + 1] + twist;
        }
        for s in g..shaft.n_sections() {
            let k = shaft.sections[s].stiffness;
            let twist = if k > 0.0 { section_torque[s] / k } else { 0.0 };
            equilibrium_angles[s + 1] = equilibrium_angles[s] - twist;
        }

        Ok(LinearShaftModel {
            a,
            b,
            c_stress,
            c_freq,
            sync_coeff: ke,
            shaft: shaft.clone(),
            op,
            section_torque,
            mean_stress,
            equilibrium_angles,
        })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_sections(&self) -> usize {
        self.c_stress.nrows()
    }

    pub fn sync_speed(&self) -> f64 {
        self.shaft.sync_speed()
    }

    /// Undamped natural frequencies of this model (rad/s, ascending),
    /// including the synchronizing coefficient at the generator mass.
    /// Rigid-body (zero) modes are dropped.
    pub fn undamped_modes(&self) -> Vec<f64> {
        natural_frequencies(&self.shaft, self.sync_coeff)
    }

    /// Solves `(jωI - A)x = B` at each frequency. Frequencies are evaluated
    /// in parallel; output order follows `omegas`.
    pub fn freq_response(&self, omegas: &[f64]) -> Vec<FreqResponseSample> {
        omegas.par_iter().map(|&w| self.response_at(w)).collect()
    }

    pub fn response_at(&self, omega: f64) -> FreqResponseSample {
        let n = self.n_states();
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex64::new(-self.a[(i, j)], 0.0);
            }
            m[(i, i)] += Complex64::new(0.0, omega);
        }
        let rhs = self.b.map(|v| Complex64::new(v, 0.0));
        let lu = m.lu();
        let pivots: Vec<f64> = lu.u().diagonal().iter().map(|p| p.norm()).collect();
        let max_pivot = pivots.iter().cloned().fold(0.0, f64::max);
        let min_pivot = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
        let singular = !(min_pivot > SINGULAR_PIVOT_RATIO * max_pivot);
        let solution = if singular { None } else { lu.solve(&rhs) };
        let Some(x) = solution.filter(|x| x.iter().all(|v| v.is_finite())) else {
            return FreqResponseSample {
                omega,
                stress_gain: vec![f64::INFINITY; self.n_sections()],
                stress_phase: vec![0.0; self.n_sections()],
                freq_gain: f64::INFINITY,
            };
        };
        let mut stress_gain = Vec::with_capacity(self.n_sections());
        let mut stress_phase = Vec::with_capacity(self.n_sections());
        for r in 0..self.n_sections() {
            let y: Complex64 = (0..n).map(|j| x[j] * self.c_stress[(r, j)]).sum();
            stress_gain.push(y.norm());
            stress_phase.push(y.arg());
        }
        let f: Complex64 = (0..n).map(|j| x[j] * self.c_freq[j]).sum();
        FreqResponseSample {
            omega,
            stress_gain,
            stress_phase,
            freq_gain: f.norm(),
        }
    }
}

/// Free-free torsional natural frequencies of the mass-spring chain, rad/s,
/// ascending, without the rigid-body mode.
pub fn torsional_modes(shaft: &ShaftAssembly) -> Vec<f64> {
    natural_frequencies(shaft, 0.0)
}

fn natural_frequencies(shaft: &ShaftAssembly, sync_coeff: f64) -> Vec<f64> {
    let n = shaft.n_masses();
    let ws = shaft.sync_speed();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for (s, sec) in shaft.sections.iter().enumerate() {
        k[(s, s)] += sec.stiffness;
        k[(s + 1, s + 1)] += sec.stiffness;
        k[(s, s + 1)] -= sec.stiffness;
        k[(s + 1, s)] -= sec.stiffness;
    }
    k[(shaft.generator_index(), shaft.generator_index())] += sync_coeff;
    // (2H/ω_s)·δ̈ = -K·δ, symmetrized with M^(-1/2)
    let inv_sqrt_m: Vec<f64> = shaft
        .masses
        .iter()
        .map(|m| (ws / (2.0 * m.inertia_h)).sqrt())
        .collect();
    let sym = DMatrix::from_fn(n, n, |i, j| k[(i, j)] * inv_sqrt_m[i] * inv_sqrt_m[j]);
    let eig = SymmetricEigen::new(sym);
    let scale = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0f64, |a, b| a.max(b.abs()))
        .max(f64::MIN_POSITIVE);
    let mut modes: Vec<f64> = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l > 1e-10 * scale)
        .map(|l| l.sqrt())
        .collect();
    modes.sort_by(|a, b| a.total_cmp(b));
    modes
}

fn check_dynamics(shaft: &ShaftAssembly) -> Result<()> {
    if shaft.masses.is_empty() || shaft.sections.len() + 1 != shaft.masses.len() {
        return Err(Error::Validation(format!(
            "shaft `{}` needs N sections for N + 1 masses",
            shaft.name
        )));
    }
    if shaft.masses.iter().filter(|m| m.is_generator).count() != 1 {
        return Err(Error::Validation(format!(
            "shaft `{}` must have exactly one generator mass",
            shaft.name
        )));
    }
    if let Some(m) = shaft.masses.iter().find(|m| !(m.inertia_h > 0.0)) {
        return Err(Error::Domain(format!(
            "mass `{}` has nonpositive inertia {}",
            m.label, m.inertia_h
        )));
    }
    Ok(())
}
