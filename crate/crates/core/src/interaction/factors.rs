use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::powerflow::{PowerFlowOptions, PowerFlowProblem, PowerFlowSolution};
use crate::model::{BusKind, GenKind, NetworkCase};
use crate::{Error, Result};

/// Internal EMF behind `Ra + jXd''` for each synchronous generator, in the
/// order of [`NetworkCase::synchronous_generators`].
pub fn internal_emf(case: &NetworkCase, solution: &PowerFlowSolution) -> Result<Vec<Complex64>> {
    let loads = case.constant_power_loads();
    case.synchronous_generators()
        .map(|g| {
            let i = case.bus_index(g.bus).unwrap();
            let v = solution.v[i];
            if !(v.norm() > 0.0) {
                return Err(Error::Domain(format!(
                    "generator `{}` has zero terminal voltage",
                    g.id
                )));
            }
            let s_gen = solution.injections[i] + loads[i];
            Ok(emf_behind(v, s_gen, g.ra, g.xd2))
        })
        .collect()
}

/// `E = V + (Ra + jX)·conj(S/V)`.
pub fn emf_behind(v: Complex64, s_gen: Complex64, ra: f64, x: f64) -> Complex64 {
    v + Complex64::new(ra, x) * (s_gen / v).conj()
}

/// Algebraic interaction factors, generators by data-center buses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IFMatrix {
    pub generators: Vec<String>,
    pub dc_buses: Vec<u32>,
    /// `values[i][j]`; NaN in invalid columns.
    pub values: Vec<Vec<f64>>,
    pub perturbation_mw: f64,
    pub valid: Vec<bool>,
    /// Failure message of each invalid column.
    pub errors: Vec<Option<String>>,
}

impl IFMatrix {
    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn n_sites(&self) -> usize {
        self.dc_buses.len()
    }

    pub fn get(&self, gen: usize, site: usize) -> f64 {
        self.values[gen][site]
    }

    pub fn column(&self, site: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[site]).collect()
    }

    pub fn column_sum(&self, site: usize) -> f64 {
        self.values.iter().map(|row| row[site]).sum()
    }

    pub fn all_valid(&self) -> bool {
        self.valid.iter().all(|v| *v)
    }

    pub fn generator_index(&self, id: &str) -> Option<usize> {
        self.generators.iter().position(|g| g == id)
    }

    pub fn site_index(&self, bus: u32) -> Option<usize> {
        self.dc_buses.iter().position(|b| *b == bus)
    }

    /// Nonnegative planning weights: negative factors are replaced by their
    /// magnitude and invalid columns by zero.
    pub fn weights(&self) -> Vec<Vec<f64>> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        if !self.valid[j] {
                            0.0
                        } else if v < 0.0 {
                            log::warn!(
                                "negative interaction factor {v:.3e} between `{}` and bus {}; using its magnitude",
                                self.generators[i],
                                self.dc_buses[j]
                            );
                            -v
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Validation(format!("{other:?}")),
        })?;
        let mut header = vec!["generator".to_string()];
        header.extend(self.dc_buses.iter().map(|b| format!("bus_{b}")));
        w.write_record(&header)?;
        for (g, row) in self.generators.iter().zip(&self.values) {
            let mut rec = vec![g.clone()];
            rec.extend(row.iter().map(|v| {
                if v.is_finite() {
                    format!("{v:.9e}")
                } else {
                    String::new()
                }
            }));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Load flow with every synchronous machine replaced by a slack internal
/// bus behind its subtransient impedance.
///
/// Bus indices `0..n` are the original buses; `n + i` is the internal bus of
/// the `i`-th synchronous generator.
#[derive(Debug, Clone)]
pub struct AugmentedNetwork {
    pub problem: PowerFlowProblem,
    pub generators: Vec<String>,
    pub internal_bus: Vec<usize>,
    pub base: PowerFlowSolution,
    /// Original bus index of each bus id, for perturbations.
    bus_ids: Vec<u32>,
}

impl AugmentedNetwork {
    pub fn new(case: &NetworkCase, base: &PowerFlowSolution) -> Result<Self> {
        let emf = internal_emf(case, base)?;
        let n = case.n_buses();
        let sgs: Vec<_> = case.synchronous_generators().collect();
        if sgs.is_empty() {
            return Err(Error::Validation(
                "interaction factors need at least one synchronous generator".into(),
            ));
        }
        let m = n + sgs.len();
        let base_problem = PowerFlowProblem::from_case(case);
        let mut ybus = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
        ybus.view_mut((0, 0), (n, n)).copy_from(&base_problem.ybus);
        let loads = case.constant_power_loads();
        let mut kinds = base_problem.kinds.clone();
        let mut s_spec = base_problem.s_spec.clone();
        let mut vm: Vec<f64> = base.v.iter().map(|v| v.norm()).collect();
        let mut va: Vec<f64> = base.v.iter().map(|v| v.arg()).collect();
        let mut labels = base_problem.labels.clone();
        for g in case.generators.iter().filter(|g| g.kind == GenKind::Ibr) {
            let i = case.bus_index(g.bus).unwrap();
            if kinds[i] == BusKind::Slack {
                // an IBR on the slack keeps its base-case output
                kinds[i] = BusKind::Pv;
                s_spec[i] = Complex64::new(base.injections[i].re, 0.0);
            }
        }
        let mut internal_bus = Vec::with_capacity(sgs.len());
        for (k, g) in sgs.iter().enumerate() {
            let z = Complex64::new(g.ra, g.xd2);
            if !(z.norm() > 0.0) {
                return Err(Error::Validation(format!(
                    "generator `{}` needs a nonzero subtransient impedance for interaction factors",
                    g.id
                )));
            }
            let y = z.inv();
            let t = case.bus_index(g.bus).unwrap();
            let e = n + k;
            ybus[(e, e)] += y;
            ybus[(t, t)] += y;
            ybus[(e, t)] -= y;
            ybus[(t, e)] -= y;
            kinds[t] = BusKind::Pq;
            s_spec[t] = -loads[t];
            kinds.push(BusKind::Slack);
            s_spec.push(Complex64::new(0.0, 0.0));
            vm.push(emf[k].norm());
            va.push(emf[k].arg());
            labels.push(format!("{}:internal", g.id));
            internal_bus.push(e);
        }
        let problem = PowerFlowProblem {
            ybus,
            kinds,
            s_spec,
            vm,
            va,
            labels,
        };
        let init: Vec<Complex64> = (0..m).map(|i| Complex64::from_polar(problem.vm[i], problem.va[i])).collect();
        let base = problem.solve(Some(&init), &PowerFlowOptions::default())?;
        Ok(AugmentedNetwork {
            problem,
            generators: sgs.iter().map(|g| g.id.clone()).collect(),
            internal_bus,
            base,
            bus_ids: case.buses.iter().map(|b| b.id).collect(),
        })
    }

    /// Electrical power delivered by each internal source, p.u.
    pub fn source_power(&self, sol: &PowerFlowSolution) -> Vec<f64> {
        self.internal_bus.iter().map(|&e| sol.injections[e].re).collect()
    }

    /// Solves with an extra unity power factor load `delta_pu` at `bus`.
    pub fn solve_perturbed(&self, bus: u32, delta_pu: f64) -> Result<PowerFlowSolution> {
        let i = self
            .bus_ids
            .iter()
            .position(|b| *b == bus)
            .ok_or_else(|| Error::Validation(format!("unknown bus {bus}")))?;
        let mut p = self.problem.clone();
        p.s_spec[i] -= Complex64::new(delta_pu, 0.0);
        p.solve(Some(&self.base.v), &PowerFlowOptions::default())
    }
}

/// Default perturbation: the larger of 1 MW and 0.1 % of total load.
pub fn default_perturbation_mw(case: &NetworkCase) -> f64 {
    (0.001 * case.total_load_mw()).max(1.0)
}

/// IF_ij = ΔP_e^(i) / ΔP_L^(j) for every synchronous generator `i` and
/// data-center bus `j`. Columns are solved in parallel. A column whose load
/// flow fails is marked invalid rather than failing the whole matrix.
pub fn compute_if_matrix(
    case: &NetworkCase,
    base: &PowerFlowSolution,
    dc_buses: &[u32],
    perturbation_mw: Option<f64>,
) -> Result<IFMatrix> {
    for b in dc_buses {
        if case.bus_index(*b).is_none() {
            return Err(Error::Validation(format!("data-center bus {b} is not in the case")));
        }
    }
    let dp_mw = perturbation_mw.unwrap_or_else(|| default_perturbation_mw(case));
    if !(dp_mw > 0.0) {
        return Err(Error::Validation(format!(
            "perturbation must be positive, got {dp_mw} MW"
        )));
    }
    let aug = AugmentedNetwork::new(case, base)?;
    let dp = dp_mw / case.system_mva;
    let p0 = aug.source_power(&aug.base);
    let columns: Vec<std::result::Result<Vec<f64>, String>> = dc_buses
        .par_iter()
        .map(|&bus| {
            aug.solve_perturbed(bus, dp)
                .map(|sol| {
                    aug.source_power(&sol)
                        .iter()
                        .zip(&p0)
                        .map(|(p, p0)| (p - p0) / dp)
                        .collect()
                })
                .map_err(|e| e.to_string())
        })
        .collect();
    let m = aug.generators.len();
    let mut values = vec![vec![f64::NAN; dc_buses.len()]; m];
    let mut valid = Vec::with_capacity(dc_buses.len());
    let mut errors = Vec::with_capacity(dc_buses.len());
    for (j, col) in columns.into_iter().enumerate() {
        match col {
            Ok(c) => {
                for i in 0..m {
                    values[i][j] = c[i];
                }
                valid.push(true);
                errors.push(None);
            }
            Err(msg) => {
                log::error!("interaction factors for bus {}: {msg}", dc_buses[j]);
                valid.push(false);
                errors.push(Some(msg));
            }
        }
    }
    Ok(IFMatrix {
        generators: aug.generators,
        dc_buses: dc_buses.to_vec(),
        values,
        perturbation_mw: dp_mw,
        valid,
        errors,
    })
}

/// Driving-point reactance `Z_bus(i,i)` at the generator's bus, p.u. on the
/// system base. Built from branch reactances and every synchronous
/// machine's `Xd''` to ground; resistances, charging, shunts and loads are
/// left out.
pub fn driving_point_reactance(case: &NetworkCase, generator: &str) -> Result<f64> {
    let target = case
        .generator(generator)
        .ok_or_else(|| Error::Validation(format!("unknown generator `{generator}`")))?;
    let n = case.n_buses();
    let mut y = DMatrix::<f64>::zeros(n, n);
    // purely reactive network: Y = -jB, work with B
    for br in case.branches.iter().filter(|b| b.in_service) {
        let (f, t) = (case.bus_index(br.from).unwrap(), case.bus_index(br.to).unwrap());
        let b = 1.0 / br.x;
        let tap = br.tap;
        y[(f, f)] += b / (tap * tap);
        y[(t, t)] += b;
        y[(f, t)] -= b / tap;
        y[(t, f)] -= b / tap;
    }
    for g in case.synchronous_generators() {
        if g.xd2 > 0.0 {
            let i = case.bus_index(g.bus).unwrap();
            y[(i, i)] += 1.0 / g.xd2;
        }
    }
    let i = case.bus_index(target.bus).unwrap();
    let inv = y
        .try_inverse()
        .ok_or_else(|| Error::Singular("short-circuit admittance matrix has no inverse".into()))?;
    let x = inv[(i, i)];
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Singular(format!(
            "driving-point reactance at bus {} is {x}",
            target.bus
        )));
    }
    Ok(x)
}
