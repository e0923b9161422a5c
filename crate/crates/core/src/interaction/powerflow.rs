use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::model::{BusKind, NetworkCase};
use crate::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 30;

/// Bus admittance matrix of the case: π-model branches with the tap on the
/// `from` side, bus shunts, and constant-impedance loads.
pub fn build_ybus(case: &NetworkCase) -> DMatrix<Complex64> {
    let n = case.n_buses();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for br in case.branches.iter().filter(|b| b.in_service) {
        let f = case.bus_index(br.from).unwrap();
        let t = case.bus_index(br.to).unwrap();
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let half_b = Complex64::new(0.0, br.b / 2.0);
        let tap = br.tap;
        y[(f, f)] += (ys + half_b) / (tap * tap);
        y[(t, t)] += ys + half_b;
        y[(f, t)] -= ys / tap;
        y[(t, f)] -= ys / tap;
    }
    for (i, b) in case.buses.iter().enumerate() {
        y[(i, i)] += Complex64::new(b.gs, b.bs) + case.load_shunts[i];
    }
    y
}

/// Load-flow problem in solver form. Several slack buses are allowed; each
/// holds its voltage phasor fixed.
#[derive(Debug, Clone)]
pub struct PowerFlowProblem {
    pub ybus: DMatrix<Complex64>,
    pub kinds: Vec<BusKind>,
    /// Specified net injection `P + jQ` (generation minus load), p.u.
    pub s_spec: Vec<Complex64>,
    /// Magnitude setpoints for slack and PV buses; initial guess for PQ.
    pub vm: Vec<f64>,
    /// Angle of slack buses; initial guess elsewhere. Radians.
    pub va: Vec<f64>,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFlowOptions {
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        PowerFlowOptions {
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    pub v: Vec<Complex64>,
    /// Net complex injection at each bus, p.u.
    pub injections: Vec<Complex64>,
    pub iterations: usize,
    pub max_mismatch: f64,
}

impl PowerFlowProblem {
    /// Base-case problem of a network case.
    pub fn from_case(case: &NetworkCase) -> Self {
        let n = case.n_buses();
        let loads = case.constant_power_loads();
        let mut s_spec: Vec<Complex64> = loads.iter().map(|l| -l).collect();
        let mut vm: Vec<f64> = case.buses.iter().map(|b| b.vm).collect();
        for g in &case.generators {
            let i = case.bus_index(g.bus).unwrap();
            s_spec[i] += Complex64::new(g.p, 0.0);
            vm[i] = g.v;
        }
        PowerFlowProblem {
            ybus: build_ybus(case),
            kinds: case.buses.iter().map(|b| b.kind).collect(),
            s_spec,
            vm,
            va: case.buses.iter().map(|b| b.va()).collect(),
            labels: case.buses.iter().map(|b| b.id.to_string()).collect(),
        }
        .check_len(n)
    }

    fn check_len(self, n: usize) -> Self {
        debug_assert!(self.kinds.len() == n && self.s_spec.len() == n);
        self
    }

    pub fn n_buses(&self) -> usize {
        self.kinds.len()
    }

    /// Newton-Raphson in polar coordinates. `init` overrides the starting
    /// phasors of non-slack buses (PV magnitudes stay at their setpoints).
    pub fn solve(
        &self,
        init: Option<&[Complex64]>,
        opts: &PowerFlowOptions,
    ) -> Result<PowerFlowSolution> {
        let n = self.n_buses();
        let mut vm = self.vm.clone();
        let mut va = self.va.clone();
        if let Some(v0) = init {
            for i in 0..n {
                match self.kinds[i] {
                    BusKind::Slack => {}
                    BusKind::Pv => va[i] = v0[i].arg(),
                    BusKind::Pq => {
                        vm[i] = v0[i].norm();
                        va[i] = v0[i].arg();
                    }
                }
            }
        }
        let pvpq: Vec<usize> = (0..n).filter(|&i| self.kinds[i] != BusKind::Slack).collect();
        let pq: Vec<usize> = (0..n).filter(|&i| self.kinds[i] == BusKind::Pq).collect();
        let (np, nq) = (pvpq.len(), pq.len());

        let mut iterations = 0;
        loop {
            let v: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(vm[i], va[i])).collect();
            let current = self.currents(&v);
            let s_calc: Vec<Complex64> = (0..n).map(|i| v[i] * current[i].conj()).collect();
            let mut f = DVector::zeros(np + nq);
            for (k, &i) in pvpq.iter().enumerate() {
                f[k] = s_calc[i].re - self.s_spec[i].re;
            }
            for (k, &i) in pq.iter().enumerate() {
                f[np + k] = s_calc[i].im - self.s_spec[i].im;
            }
            let (worst, mismatch) = f
                .iter()
                .enumerate()
                .fold((0usize, 0.0f64), |acc, (k, x)| {
                    if !(x.abs() <= acc.1) {
                        (k, x.abs())
                    } else {
                        acc
                    }
                });
            let worst_bus = if worst < np { pvpq.get(worst) } else { pq.get(worst - np) };
            let diverged = |iterations: usize, mismatch: f64| Error::Diverged {
                iterations,
                bus: worst_bus.map_or_else(|| "-".into(), |&i| self.labels[i].clone()),
                mismatch,
            };
            if mismatch.is_nan() {
                return Err(diverged(iterations, f64::INFINITY));
            }
            if mismatch <= opts.tolerance {
                return Ok(PowerFlowSolution {
                    injections: s_calc,
                    v,
                    iterations,
                    max_mismatch: mismatch,
                });
            }
            if iterations >= opts.max_iter {
                return Err(diverged(iterations, mismatch));
            }
            let jac = self.jacobian(&v, &current, &pvpq, &pq);
            let Some(dx) = jac.lu().solve(&(-f)) else {
                return Err(diverged(iterations, mismatch));
            };
            for (k, &i) in pvpq.iter().enumerate() {
                va[i] += dx[k];
            }
            for (k, &i) in pq.iter().enumerate() {
                vm[i] += dx[np + k];
            }
            iterations += 1;
        }
    }

    fn currents(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = v.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.ybus[(i, j)] * v[j]).sum())
            .collect()
    }

    fn jacobian(
        &self,
        v: &[Complex64],
        current: &[Complex64],
        pvpq: &[usize],
        pq: &[usize],
    ) -> DMatrix<f64> {
        let (np, nq) = (pvpq.len(), pq.len());
        let y = &self.ybus;
        let j = Complex64::new(0.0, 1.0);
        // ∂S_i/∂θ_k and ∂S_i/∂|V_k|
        let ds_dva = |i: usize, k: usize| -> Complex64 {
            let mut d = -j * v[i] * (y[(i, k)] * v[k]).conj();
            if i == k {
                d += j * v[i] * current[i].conj();
            }
            d
        };
        let ds_dvm = |i: usize, k: usize| -> Complex64 {
            let uk = v[k] / v[k].norm();
            let mut d = v[i] * (y[(i, k)] * uk).conj();
            if i == k {
                d += current[i].conj() * uk;
            }
            d
        };
        let mut jac = DMatrix::zeros(np + nq, np + nq);
        for (r, &i) in pvpq.iter().enumerate() {
            for (c, &k) in pvpq.iter().enumerate() {
                jac[(r, c)] = ds_dva(i, k).re;
            }
            for (c, &k) in pq.iter().enumerate() {
                jac[(r, np + c)] = ds_dvm(i, k).re;
            }
        }
        for (r, &i) in pq.iter().enumerate() {
            for (c, &k) in pvpq.iter().enumerate() {
                jac[(np + r, c)] = ds_dva(i, k).im;
            }
            for (c, &k) in pq.iter().enumerate() {
                jac[(np + r, np + c)] = ds_dvm(i, k).im;
            }
        }
        jac
    }
}

/// Solves the base-case load flow of a network case.
pub fn solve_power_flow(
    case: &NetworkCase,
    init: Option<&[Complex64]>,
) -> Result<PowerFlowSolution> {
    PowerFlowProblem::from_case(case).solve(init, &PowerFlowOptions::default())
}
