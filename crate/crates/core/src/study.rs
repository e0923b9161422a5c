//! Study configuration and the file-based pipeline behind the CLI.
//!
//! Each stage writes its artifacts to the output directory and later stages
//! reload them when present, so partial re-runs only redo what changed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::interaction::{compute_if_matrix, driving_point_reactance, solve_power_flow, IFMatrix};
use crate::limits::{damping_monotonicity, model_grid, DampingCheck, profile_from_samples, section_allowables, LimitConfig, LimitProfile};
use crate::model::{
    parse_case, parse_material, parse_shaft, read_json, BusKind, MaterialSpec,
    NetworkCase, ShaftAssembly,
};
use crate::planner::{compliance_check, optimize_weighted_allocations, site_bounds, ComplianceReport, LPResult, SiteBound};
use crate::report::{ensure_dir, finite, write_json};
use crate::shaft::{torsional_modes, write_sweep_csv, FrequencyGrid, LinearShaftModel, OperatingPoint};
use crate::validator::{
    synthesize_scenario, validate_scenario, MachineCase, ScenarioSpec, ScenarioVerdict,
    ValidationOptions,
};
use crate::{Error, Result};

/// A single file for every generator, or one per generator id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PathSpec {
    Single(PathBuf),
    PerGenerator(BTreeMap<String, PathBuf>),
}

impl PathSpec {
    fn lookup(&self, generator: &str) -> Option<&Path> {
        match self {
            PathSpec::Single(p) => Some(p),
            PathSpec::PerGenerator(m) => m.get(generator).map(PathBuf::as_path),
        }
    }
}

/// Single-machine operating point used when no network case is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPointSpec {
    #[serde(default = "one")]
    pub e: f64,
    #[serde(default = "one")]
    pub v: f64,
    #[serde(default = "default_x")]
    pub x: f64,
    /// Electrical power, p.u. on the machine base.
    #[serde(default = "default_p")]
    pub p: f64,
}

impl Default for OperatingPointSpec {
    fn default() -> Self {
        OperatingPointSpec {
            e: 1.0,
            v: 1.0,
            x: default_x(),
            p: default_p(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_x() -> f64 {
    0.5
}
fn default_p() -> f64 {
    0.8
}
fn default_cap() -> f64 {
    0.2
}
fn default_df() -> f64 {
    1.5
}
fn default_beta() -> f64 {
    0.05
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default)]
    pub case: Option<PathBuf>,
    #[serde(default)]
    pub shafts: Option<PathSpec>,
    #[serde(default)]
    pub materials: Option<PathSpec>,
    #[serde(default = "default_cap")]
    pub cap_fraction: f64,
    #[serde(default = "default_df")]
    pub delta_f_max_hz: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub perturbation_mw: Option<f64>,
    #[serde(default)]
    pub grid: FrequencyGrid,
    #[serde(default)]
    pub threshold_mw: Option<f64>,
    /// Objective weight per data-center bus; 1 when absent.
    #[serde(default)]
    pub site_weights: BTreeMap<u32, f64>,
    /// Infinite-bus EMF behind the driving-point reactance, p.u.
    #[serde(default = "one")]
    pub infinite_bus_emf: f64,
    #[serde(default)]
    pub operating_point: OperatingPointSpec,
    /// Scenario run by `run-all`.
    #[serde(default)]
    pub scenario: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            case: None,
            shafts: None,
            materials: None,
            cap_fraction: default_cap(),
            delta_f_max_hz: default_df(),
            beta: default_beta(),
            perturbation_mw: None,
            grid: FrequencyGrid::default(),
            threshold_mw: None,
            site_weights: BTreeMap::new(),
            infinite_bus_emf: 1.0,
            operating_point: OperatingPointSpec::default(),
            scenario: None,
            out: default_out(),
        }
    }
}

impl StudyConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn limit_config(&self) -> LimitConfig {
        LimitConfig {
            cap_fraction: self.cap_fraction,
            delta_f_max_hz: self.delta_f_max_hz,
            grid: self.grid,
        }
    }

    pub fn plan_options(&self) -> PlanOptions {
        PlanOptions {
            beta: self.beta,
            threshold_mw: self.threshold_mw,
            site_weights: self.site_weights.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.limit_config().validate()?;
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Validation(format!("beta must be in (0, 1), got {}", self.beta)));
        }
        if let Some((bus, w)) = self.site_weights.iter().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Validation(format!("site weight of bus {bus} must be positive, got {w}")));
        }
        if let Some(p) = self.perturbation_mw {
            if !(p > 0.0) {
                return Err(Error::Validation(format!("perturbation_mw must be positive, got {p}")));
            }
        }
        if let Some(t) = self.threshold_mw {
            if !(t >= 0.0) {
                return Err(Error::Validation(format!("threshold_mw must be nonnegative, got {t}")));
            }
        }
        if !(self.infinite_bus_emf > 0.0) {
            return Err(Error::Validation("infinite_bus_emf must be positive".into()));
        }
        Ok(())
    }
}

/// Shaft, material and operating point of one generator.
#[derive(Debug, Clone)]
pub struct MachineSetup {
    pub generator: String,
    pub shaft: ShaftAssembly,
    pub material: MaterialSpec,
    pub op: OperatingPoint,
}

impl MachineSetup {
    pub fn model(&self) -> Result<LinearShaftModel> {
        LinearShaftModel::new(&self.shaft, self.op)
    }
}

/// A loaded study: configuration with resolved paths and the parsed case.
#[derive(Debug, Clone)]
pub struct Study {
    pub config: StudyConfig,
    pub case: Option<NetworkCase>,
}

impl Study {
    /// Resolves relative paths in `config` against `base_dir`, validates it
    /// and parses the case if one is named.
    pub fn new(mut config: StudyConfig, base_dir: &Path) -> Result<Self> {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        let resolve_spec = |s: &mut PathSpec| match s {
            PathSpec::Single(p) => resolve(p),
            PathSpec::PerGenerator(m) => m.values_mut().for_each(resolve),
        };
        if let Some(p) = config.case.as_mut() {
            resolve(p);
        }
        if let Some(s) = config.shafts.as_mut() {
            resolve_spec(s);
        }
        if let Some(s) = config.materials.as_mut() {
            resolve_spec(s);
        }
        if let Some(p) = config.scenario.as_mut() {
            resolve(p);
        }
        resolve(&mut config.out);
        config.validate()?;
        let case = config.case.as_deref().map(parse_case).transpose()?;
        Ok(Study { config, case })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let config = StudyConfig::from_file(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Study::new(config, dir)
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.out
    }

    fn out(&self, name: &str) -> Result<PathBuf> {
        ensure_dir(self.out_dir())?;
        Ok(self.out_dir().join(name))
    }

    fn require_case(&self) -> Result<&NetworkCase> {
        self.case
            .as_ref()
            .ok_or_else(|| Error::Validation("this step needs a network case (`case`)".into()))
    }

    fn material_for(&self, generator: &str, fallback: Option<PathBuf>) -> Result<MaterialSpec> {
        let path = self
            .config
            .materials
            .as_ref()
            .and_then(|m| m.lookup(generator).map(Path::to_path_buf))
            .or(fallback)
            .ok_or_else(|| Error::Validation(format!("no material file for generator `{generator}`")))?;
        parse_material(&path)
    }

    /// Machines with a shaft model. With a case, every synchronous
    /// generator that has a shaft file is included and its operating point
    /// comes from the base load flow; the others are skipped with a warning.
    pub fn machines(&self) -> Result<Vec<MachineSetup>> {
        let Some(case) = &self.case else {
            let path = match &self.config.shafts {
                Some(PathSpec::Single(p)) => p.clone(),
                Some(PathSpec::PerGenerator(m)) if m.len() == 1 => m.values().next().unwrap().clone(),
                _ => {
                    return Err(Error::Validation(
                        "without a case exactly one shaft file is required".into(),
                    ))
                }
            };
            let shaft = parse_shaft(&path)?;
            let generator = match &self.config.shafts {
                Some(PathSpec::PerGenerator(m)) => m.keys().next().unwrap().clone(),
                _ if !shaft.name.is_empty() => shaft.name.clone(),
                _ => "G1".to_string(),
            };
            let material = self.material_for(&generator, None)?;
            let o = self.config.operating_point;
            let op = OperatingPoint::from_power(o.e, o.v, o.x, o.p)?;
            return Ok(vec![MachineSetup {
                generator,
                shaft,
                material,
                op,
            }]);
        };
        let base = solve_power_flow(case, None)?;
        let mut out = Vec::new();
        for g in case.synchronous_generators() {
            let shaft_path = self
                .config
                .shafts
                .as_ref()
                .and_then(|s| s.lookup(&g.id).map(Path::to_path_buf))
                .or_else(|| g.shaft.as_deref().map(|s| case.resolve_path(s)));
            let Some(shaft_path) = shaft_path else {
                log::warn!("generator `{}` has no shaft data; skipped", g.id);
                continue;
            };
            let shaft = parse_shaft(&shaft_path)?;
            let material =
                self.material_for(&g.id, g.material.as_deref().map(|m| case.resolve_path(m)))?;
            let i = case.bus_index(g.bus).unwrap();
            let p_sys = generator_output(case, &base.injections, i, &g.id);
            let to_machine = case.system_mva / shaft.mva_rating;
            let x = driving_point_reactance(case, &g.id)? / to_machine;
            let op = OperatingPoint::from_power(
                self.config.infinite_bus_emf,
                base.v[i].norm(),
                x,
                p_sys * to_machine,
            )
            .map_err(|e| Error::Validation(format!("generator `{}`: {e}", g.id)))?;
            log::info!(
                "{}: P0 = {:.4} p.u., V = {:.4}, X = {:.4} p.u., delta0 = {:.4} rad",
                g.id,
                p_sys * to_machine,
                base.v[i].norm(),
                x,
                op.delta0
            );
            out.push(MachineSetup {
                generator: g.id.clone(),
                shaft,
                material,
                op,
            });
        }
        if out.is_empty() {
            return Err(Error::Validation("no generator has shaft data".into()));
        }
        Ok(out)
    }
}

/// Active output of a generator from the base load flow, system p.u.
/// A slack bus supplies whatever the other units there do not schedule.
fn generator_output(case: &NetworkCase, injections: &[Complex64], bus: usize, id: &str) -> f64 {
    let bus_id = case.buses[bus].id;
    let g = case.generator(id).unwrap();
    if case.buses[bus].kind != BusKind::Slack {
        return g.p;
    }
    let load = case.constant_power_loads()[bus].re;
    let others: f64 = case
        .generators
        .iter()
        .filter(|o| o.bus == bus_id && o.id != id)
        .map(|o| o.p)
        .sum();
    injections[bus].re + load - others
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSummary {
    pub generator: String,
    pub mva_rating: f64,
    pub p_e_max_mw: f64,
    pub cap_mw: f64,
    /// Frequency at which the curve attains its minimum.
    pub argmin_hz: f64,
    pub notches_hz: Vec<f64>,
    pub modes_hz: Vec<f64>,
    pub allowables: Vec<f64>,
    pub mean_stress: Vec<f64>,
    pub delta0_rad: f64,
    /// Damping coefficients whose increase lowered P_e^max.
    #[serde(default)]
    pub damping_violations: Vec<DampingCheck>,
}

impl LimitSummary {
    pub fn from_profile(p: &LimitProfile, modes_rad: &[f64], delta0: f64) -> Self {
        let f = p.freqs_hz();
        LimitSummary {
            generator: p.generator.clone(),
            mva_rating: p.mva_rating,
            p_e_max_mw: p.p_e_max,
            cap_mw: p.cap_mw(),
            argmin_hz: f.get(p.argmin()).copied().unwrap_or(f64::NAN),
            notches_hz: p.notches().iter().map(|&i| f[i]).collect(),
            modes_hz: modes_rad.iter().map(|w| w / (2.0 * std::f64::consts::PI)).collect(),
            allowables: p.allowables.clone(),
            mean_stress: p.mean_stress.clone(),
            delta0_rad: delta0,
            damping_violations: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitsReport {
    pub cap_fraction: f64,
    pub delta_f_max_hz: f64,
    pub generators: Vec<LimitSummary>,
}

impl LimitsReport {
    pub fn p_e_max(&self, generator: &str) -> Option<f64> {
        self.generators
            .iter()
            .find(|g| g.generator == generator)
            .map(|g| g.p_e_max_mw)
    }
}

/// Relative damping increase used by the monotonicity diagnostic.
const DAMPING_STEP: f64 = 0.1;

/// Limit profile of one machine with its sweep written alongside.
fn machine_profile(m: &MachineSetup, config: &LimitConfig, sweep: Option<&Path>) -> Result<LimitProfile> {
    let model = m.model()?;
    let allowables = section_allowables(&model, &m.material)
        .map_err(|e| Error::Validation(format!("generator `{}`: {e}", m.generator)))?;
    let omegas = model_grid(&model, &config.grid);
    let samples = model.freq_response(&omegas);
    if let Some(path) = sweep {
        write_sweep_csv(path, &samples)?;
    }
    profile_from_samples(&m.generator, &model, &samples, allowables, config)
}

/// Step 1: limit curves per generator. Writes `limits/<gen>.csv`,
/// `sweeps/<gen>.csv` and `limits.json`.
pub fn run_limits(study: &Study) -> Result<(LimitsReport, Vec<LimitProfile>)> {
    let config = study.config.limit_config();
    config.validate()?;
    let machines = study.machines()?;
    let limits_dir = study.out("limits")?;
    let sweeps_dir = study.out("sweeps")?;
    ensure_dir(&limits_dir)?;
    ensure_dir(&sweeps_dir)?;
    let profiles = machines
        .par_iter()
        .map(|m| {
            let sweep = sweeps_dir.join(format!("{}.csv", m.generator));
            let p = machine_profile(m, &config, Some(&sweep))?;
            p.write_csv(&limits_dir.join(format!("{}.csv", m.generator)))?;
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let generators = profiles
        .iter()
        .zip(&machines)
        .map(|(p, m)| {
            let modes = m.model().map(|md| md.undamped_modes()).unwrap_or_default();
            let mut s = LimitSummary::from_profile(p, &modes, m.op.delta0);
            s.damping_violations = damping_monotonicity(&m.shaft, m.op, &m.material, &config, DAMPING_STEP)?
                .into_iter()
                .filter(DampingCheck::lowers_bound)
                .collect();
            for v in &s.damping_violations {
                log::warn!(
                    "{}: raising {} lowers P_e^max from {:.4} to {:.4} MW",
                    m.generator,
                    v.coefficient,
                    v.base_mw,
                    v.raised_mw
                );
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let report = LimitsReport {
        cap_fraction: config.cap_fraction,
        delta_f_max_hz: config.delta_f_max_hz,
        generators,
    };
    write_json(&study.out("limits.json")?, &report)?;
    Ok((report, profiles))
}

pub fn load_or_run_limits(study: &Study) -> Result<LimitsReport> {
    let path = study.out_dir().join("limits.json");
    if path.exists() {
        log::info!("reusing {}", path.display());
        return read_json(&path);
    }
    Ok(run_limits(study)?.0)
}

#[derive(Deserialize)]
struct IFMatrixFile {
    generators: Vec<String>,
    dc_buses: Vec<u32>,
    values: Vec<Vec<Option<f64>>>,
    perturbation_mw: f64,
    valid: Vec<bool>,
    errors: Vec<Option<String>>,
}

impl From<IFMatrixFile> for IFMatrix {
    fn from(f: IFMatrixFile) -> Self {
        IFMatrix {
            generators: f.generators,
            dc_buses: f.dc_buses,
            values: f
                .values
                .into_iter()
                .map(|r| r.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
                .collect(),
            perturbation_mw: f.perturbation_mw,
            valid: f.valid,
            errors: f.errors,
        }
    }
}

/// Step 2: interaction factors for every data-center bus of the case.
/// Writes `if_matrix.csv` and `if_matrix.json`.
pub fn run_ifs(study: &Study) -> Result<IFMatrix> {
    let case = study.require_case()?;
    let buses: Vec<u32> = case.datacenters.iter().map(|d| d.bus).collect();
    if buses.is_empty() {
        return Err(Error::Validation("the case lists no data-center sites".into()));
    }
    let base = solve_power_flow(case, None)?;
    let ifs = compute_if_matrix(case, &base, &buses, study.config.perturbation_mw)?;
    ifs.write_csv(&study.out("if_matrix.csv")?)?;
    write_json(&study.out("if_matrix.json")?, &ifs)?;
    Ok(ifs)
}

pub fn load_or_run_ifs(study: &Study) -> Result<IFMatrix> {
    let path = study.out_dir().join("if_matrix.json");
    if path.exists() {
        log::info!("reusing {}", path.display());
        let f: IFMatrixFile = read_json(&path)?;
        return Ok(f.into());
    }
    run_ifs(study)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub bus: u32,
    pub p_dc_mw: f64,
    pub p_dc_max_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorUsage {
    pub generator: String,
    pub p_e_max_mw: f64,
    pub usage_mw: f64,
    pub binding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanReport {
    pub beta: f64,
    pub threshold_mw: Option<f64>,
    /// Objective weights that differ from 1, by bus.
    pub site_weights: BTreeMap<u32, f64>,
    /// Sites dropped because their interaction factors could not be
    /// computed.
    pub excluded_buses: Vec<u32>,
    pub site_bounds: Vec<PlanBound>,
    pub allocations: Vec<Allocation>,
    pub total_mw: f64,
    pub alpha_final: f64,
    pub iterations: usize,
    pub feasible: bool,
    pub non_unique: bool,
    pub generators: Vec<GeneratorUsage>,
}

/// JSON form of a [`SiteBound`] with an infinite grid bound written as null.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanBound {
    pub bus: u32,
    pub p_dc_max_mw: f64,
    pub binding: crate::planner::Binding,
    pub grid_bound_mw: Option<f64>,
    pub compute_cap_mw: f64,
}

impl From<&SiteBound> for PlanBound {
    fn from(b: &SiteBound) -> Self {
        PlanBound {
            bus: b.bus,
            p_dc_max_mw: b.p_dc_max,
            binding: b.binding.clone(),
            grid_bound_mw: finite(b.grid_bound),
            compute_cap_mw: b.compute_cap,
        }
    }
}

/// Settings of the siting step.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOptions {
    pub beta: f64,
    pub threshold_mw: Option<f64>,
    pub site_weights: BTreeMap<u32, f64>,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            beta: default_beta(),
            threshold_mw: None,
            site_weights: BTreeMap::new(),
        }
    }
}

/// Step 3 from already computed limits and interaction factors.
pub fn plan(
    case: &NetworkCase,
    limits: &LimitsReport,
    ifs: &IFMatrix,
    opts: &PlanOptions,
) -> Result<(PlanReport, LPResult)> {
    let (beta, threshold_mw) = (opts.beta, opts.threshold_mw);
    for bus in opts.site_weights.keys() {
        if !case.datacenters.iter().any(|s| s.bus == *bus) {
            log::warn!("site weight given for bus {bus}, which is not a data-center site");
        }
    }
    let mut excluded = Vec::new();
    let sites: Vec<_> = case
        .datacenters
        .iter()
        .filter(|s| match ifs.site_index(s.bus) {
            Some(j) if ifs.valid[j] => true,
            _ => {
                log::error!("bus {} has no valid interaction factors; excluded from the plan", s.bus);
                excluded.push(s.bus);
                false
            }
        })
        .cloned()
        .collect();
    let weights_all = ifs.weights();
    let mut generators = Vec::new();
    let mut p_e_max = Vec::new();
    let mut weights = Vec::new();
    for (i, g) in ifs.generators.iter().enumerate() {
        let Some(p) = limits.p_e_max(g) else {
            log::warn!("generator `{g}` has no limit; it does not constrain the plan");
            continue;
        };
        generators.push(g.clone());
        p_e_max.push(p);
        weights.push(
            sites
                .iter()
                .map(|s| weights_all[i][ifs.site_index(s.bus).unwrap()])
                .collect::<Vec<_>>(),
        );
    }
    let bounds = site_bounds(&p_e_max, &generators, &weights, &sites, threshold_mw)?;
    let lp_weights: Vec<Vec<f64>> = weights
        .iter()
        .map(|row| {
            bounds
                .iter()
                .map(|b| row[sites.iter().position(|s| s.bus == b.bus).unwrap()])
                .collect()
        })
        .collect();
    let maxes: Vec<f64> = bounds.iter().map(|b| b.p_dc_max).collect();
    let objective: Vec<f64> = bounds
        .iter()
        .map(|b| opts.site_weights.get(&b.bus).copied().unwrap_or(1.0))
        .collect();
    let lp = optimize_weighted_allocations(&p_e_max, &lp_weights, &maxes, beta, &objective)?;
    let report = PlanReport {
        beta,
        threshold_mw,
        site_weights: opts.site_weights.clone(),
        excluded_buses: excluded,
        site_bounds: bounds.iter().map(PlanBound::from).collect(),
        allocations: bounds
            .iter()
            .zip(&lp.allocations)
            .map(|(b, p)| Allocation {
                bus: b.bus,
                p_dc_mw: *p,
                p_dc_max_mw: b.p_dc_max,
            })
            .collect(),
        total_mw: lp.total(),
        alpha_final: lp.alpha_final,
        iterations: lp.iterations,
        feasible: lp.feasible,
        non_unique: lp.non_unique,
        generators: generators
            .iter()
            .enumerate()
            .map(|(i, g)| GeneratorUsage {
                generator: g.clone(),
                p_e_max_mw: p_e_max[i],
                usage_mw: lp.generator_usage[i],
                binding: lp.binding_generators[i],
            })
            .collect(),
    };
    Ok((report, lp))
}

/// Step 3: writes `plan.json`.
pub fn run_plan(study: &Study) -> Result<PlanReport> {
    let case = study.require_case()?;
    let limits = load_or_run_limits(study)?;
    let ifs = load_or_run_ifs(study)?;
    let (report, _) = plan(case, &limits, &ifs, &study.config.plan_options())?;
    write_json(&study.out("plan.json")?, &report)?;
    Ok(report)
}

/// Prepares every machine for time-domain validation.
pub fn machine_cases(study: &Study) -> Result<Vec<MachineCase>> {
    study
        .machines()?
        .into_iter()
        .map(|m| {
            let model = m.model()?;
            let allowables = section_allowables(&model, &m.material)?;
            Ok(MachineCase {
                generator: m.generator,
                model,
                material: m.material,
                allowables,
            })
        })
        .collect()
}

/// Runs a scenario file. Writes `verdict.json` and per-generator
/// trajectories under `trajectories/`.
pub fn run_validate(study: &Study, scenario_path: &Path) -> Result<ScenarioVerdict> {
    let spec = ScenarioSpec::from_file(scenario_path)?;
    let scenario = synthesize_scenario(&spec)?;
    let ifs = load_or_run_ifs(study)?;
    let machines = machine_cases(study)?;
    let opts = ValidationOptions {
        delta_f_max_hz: study.config.delta_f_max_hz,
        keep_trajectories: true,
        ..ValidationOptions::default()
    };
    let verdict = validate_scenario(&scenario, &ifs, &machines, &opts)?;
    let dir = study.out("trajectories")?;
    ensure_dir(&dir)?;
    for g in &verdict.generators {
        if let Some(t) = &g.trajectory {
            t.write_csv(&dir.join(format!("{}.csv", g.generator)))?;
        }
    }
    write_json(&study.out("verdict.json")?, &verdict)?;
    Ok(verdict)
}

/// Reads a measured power series: one column of MW values, or two columns
/// `time_s, MW`. A header row is optional. Returns the values and, for two
/// columns, the sample rate implied by the time stamps.
pub fn read_series(path: &Path) -> Result<(Vec<f64>, Option<f64>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Validation(format!("{other:?}")),
        })?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let Ok(nums) = parsed else {
            if line == 0 {
                continue;
            }
            return Err(Error::Parse {
                file: path.display().to_string(),
                field: format!("line {}", line + 1),
                message: "expected numbers".into(),
            });
        };
        match nums.as_slice() {
            [v] => values.push(*v),
            [t, v] => {
                times.push(*t);
                values.push(*v);
            }
            _ => {
                return Err(Error::Parse {
                    file: path.display().to_string(),
                    field: format!("line {}", line + 1),
                    message: "expected one or two columns".into(),
                })
            }
        }
    }
    let rate = if times.len() >= 2 {
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        Some(1.0 / dt)
    } else {
        None
    };
    Ok((values, rate))
}

/// Where the compliance limit comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CheckLimit {
    Mw(f64),
    /// The LP allocation of this bus in `plan.json`.
    Bus(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub bus: Option<u32>,
    pub sample_rate_hz: f64,
    #[serde(flatten)]
    pub result: ComplianceReport,
}

/// Remark-style FFT compliance of a measured series. Writes `check.json`
/// and `spectrum.csv`.
pub fn run_check(
    study: &Study,
    series_path: &Path,
    rate_hz: Option<f64>,
    limit: CheckLimit,
    f_sync_hz: Option<f64>,
) -> Result<CheckReport> {
    let (values, file_rate) = read_series(series_path)?;
    let rate = rate_hz.or(file_rate).ok_or_else(|| {
        Error::Validation("sample rate unknown: give --rate or a time column".into())
    })?;
    let (limit_mw, bus) = match limit {
        CheckLimit::Mw(v) => (v, None),
        CheckLimit::Bus(b) => {
            let path = study.out_dir().join("plan.json");
            let plan: serde_json::Value = read_json(&path)?;
            let p = plan["allocations"]
                .as_array()
                .and_then(|a| a.iter().find(|x| x["bus"].as_u64() == Some(b as u64)))
                .and_then(|x| x["p_dc_mw"].as_f64())
                .ok_or_else(|| Error::Validation(format!("bus {b} has no allocation in {}", path.display())))?;
            (p, Some(b))
        }
    };
    let f_sync = f_sync_hz
        .or(study.case.as_ref().map(|c| c.f_sync_hz))
        .unwrap_or(60.0);
    let result = compliance_check(&values, rate, f_sync, limit_mw)?;
    result.write_spectrum_csv(&study.out("spectrum.csv")?)?;
    let report = CheckReport {
        bus,
        sample_rate_hz: rate,
        result,
    };
    write_json(&study.out("check.json")?, &report)?;
    Ok(report)
}

/// Summary of `run-all`.
#[derive(Debug, Clone)]
pub struct RunAll {
    pub limits: LimitsReport,
    pub ifs: IFMatrix,
    pub plan: PlanReport,
    pub verdict: Option<ScenarioVerdict>,
}

/// Limits, interaction factors, plan and (if configured) validation.
pub fn run_all(study: &Study) -> Result<RunAll> {
    let (limits, _) = run_limits(study)?;
    let ifs = run_ifs(study)?;
    let case = study.require_case()?;
    let (plan_report, _) = plan(case, &limits, &ifs, &study.config.plan_options())?;
    write_json(&study.out("plan.json")?, &plan_report)?;
    let verdict = match &study.config.scenario {
        Some(p) => Some(run_validate(study, p)?),
        None => None,
    };
    Ok(RunAll {
        limits,
        ifs,
        plan: plan_report,
        verdict,
    })
}

/// Torsional mode frequencies of a shaft file, Hz (free-free shaft).
pub fn shaft_modes_hz(path: &Path) -> Result<Vec<f64>> {
    let shaft = parse_shaft(path)?;
    Ok(torsional_modes(&shaft)
        .iter()
        .map(|w| w / (2.0 * std::f64::consts::PI))
        .collect())
}
