use std::collections::{HashMap, HashSet, VecDeque};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{from_json_str, read_json};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    #[serde(alias = "PV")]
    Pv,
    #[serde(alias = "PQ")]
    Pq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    /// Voltage magnitude, p.u. (initial guess for PQ buses).
    pub vm: f64,
    /// Voltage angle as given in the file, degrees. See [`Bus::va`].
    pub va_deg: f64,
    /// Shunt conductance and susceptance at 1 p.u. voltage, p.u.
    pub gs: f64,
    pub bs: f64,
}

impl Bus {
    /// Voltage angle, rad.
    pub fn va(&self) -> f64 {
        self.va_deg.to_radians()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: u32,
    pub to: u32,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, p.u.
    pub b: f64,
    /// Off-nominal turns ratio on the `from` side.
    pub tap: f64,
    pub in_service: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GenKind {
    /// Synchronous generator.
    #[default]
    Sg,
    /// Inverter-based resource; held as a PV source in every load flow.
    Ibr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub id: String,
    pub bus: u32,
    /// Scheduled active power, p.u. on the system base (ignored at the slack).
    pub p: f64,
    /// Voltage setpoint, p.u.
    pub v: f64,
    pub ra: f64,
    /// d-axis subtransient reactance X_d'', p.u. on the system base.
    pub xd2: f64,
    pub kind: GenKind,
    pub shaft: Option<String>,
    pub material: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LoadModel {
    #[default]
    ConstantPower,
    ConstantImpedance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub bus: u32,
    pub p: f64,
    pub q: f64,
    pub model: LoadModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataCenterSite {
    pub bus: u32,
    pub rating_mw: f64,
    #[serde(default)]
    pub existing: bool,
}

impl DataCenterSite {
    /// Worst-case sum of subsynchronous amplitudes during compute without
    /// restrictions: a quarter of the site rating.
    pub fn compute_cap_mw(&self) -> f64 {
        0.25 * self.rating_mw
    }
}

/// A validated bus-branch network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    pub system_mva: f64,
    pub f_sync_hz: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
    pub datacenters: Vec<DataCenterSite>,
    /// Admittance of the constant-impedance loads at each bus (by index),
    /// evaluated at 1 p.u. voltage.
    pub load_shunts: Vec<Complex64>,
    index: HashMap<u32, usize>,
    base_dir: Option<PathBuf>,
}

impl NetworkCase {
    /// Builds and validates a case from its parts.
    pub fn new(
        system_mva: f64,
        f_sync_hz: f64,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        generators: Vec<Generator>,
        loads: Vec<Load>,
        datacenters: Vec<DataCenterSite>,
    ) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, b) in buses.iter().enumerate() {
            if index.insert(b.id, i).is_some() {
                return Err(Error::Validation(format!("duplicate bus id {}", b.id)));
            }
        }
        let mut load_shunts = vec![Complex64::new(0.0, 0.0); buses.len()];
        for l in loads
            .iter()
            .filter(|l| l.model == LoadModel::ConstantImpedance)
        {
            let i = *index.get(&l.bus).ok_or_else(|| {
                Error::Validation(format!("load refers to unknown bus {}", l.bus))
            })?;
            // S = |V|²·conj(y) at |V| = 1
            load_shunts[i] += Complex64::new(l.p, -l.q);
        }
        let case = NetworkCase {
            system_mva,
            f_sync_hz,
            buses,
            branches,
            generators,
            loads,
            datacenters,
            load_shunts,
            index,
            base_dir: None,
        };
        case.validate()?;
        Ok(case)
    }

    /// Directory that relative shaft and material references resolve
    /// against.
    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = Some(dir.into());
        self
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated case has a slack bus")
    }

    pub fn generator(&self, id: &str) -> Option<&Generator> {
        self.generators.iter().find(|g| g.id == id)
    }

    pub fn generator_at_bus(&self, bus: u32) -> Option<&Generator> {
        self.generators.iter().find(|g| g.bus == bus)
    }

    pub fn synchronous_generators(&self) -> impl Iterator<Item = &Generator> {
        self.generators.iter().filter(|g| g.kind == GenKind::Sg)
    }

    /// Constant-power load at each bus index, `P + jQ` in p.u.
    pub fn constant_power_loads(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.buses.len()];
        for l in self
            .loads
            .iter()
            .filter(|l| l.model == LoadModel::ConstantPower)
        {
            out[self.index[&l.bus]] += Complex64::new(l.p, l.q);
        }
        out
    }

    pub fn total_load_mw(&self) -> f64 {
        self.loads.iter().map(|l| l.p).sum::<f64>() * self.system_mva
    }

    /// Resolves a file reference from the case (shaft, material) against the
    /// directory of the case file.
    pub fn resolve_path(&self, reference: &str) -> PathBuf {
        let p = Path::new(reference);
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CaseFile = from_json_str(text, "<case>")?;
        file.into_case(None)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CaseFile::from(self))?)
    }

    fn validate(&self) -> Result<()> {
        if !(self.system_mva > 0.0) {
            return Err(Error::Validation("system_mva must be positive".into()));
        }
        if !(self.f_sync_hz > 0.0) {
            return Err(Error::Validation("f_sync_hz must be positive".into()));
        }
        let mut seen = HashSet::new();
        for b in &self.buses {
            if !seen.insert(b.id) {
                return Err(Error::Validation(format!("duplicate bus id {}", b.id)));
            }
            if !(b.vm > 0.0) {
                return Err(Error::Validation(format!(
                    "bus {}: vm must be positive",
                    b.id
                )));
            }
        }
        let slacks = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .count();
        if slacks != 1 {
            return Err(Error::Validation(format!(
                "exactly one slack bus is required, found {slacks}"
            )));
        }
        let exists = |id: u32, what: &str| -> Result<()> {
            if self.index.contains_key(&id) {
                Ok(())
            } else {
                Err(Error::Validation(format!("{what} refers to unknown bus {id}")))
            }
        };
        for (k, br) in self.branches.iter().enumerate() {
            exists(br.from, &format!("branch {k}"))?;
            exists(br.to, &format!("branch {k}"))?;
            if br.from == br.to {
                return Err(Error::Validation(format!("branch {k} is a self loop")));
            }
            if br.r == 0.0 && br.x == 0.0 {
                return Err(Error::Validation(format!("branch {k} has zero impedance")));
            }
            if !(br.tap > 0.0) {
                return Err(Error::Validation(format!("branch {k}: tap must be positive")));
            }
        }
        let mut gen_ids = HashSet::new();
        let mut gen_buses = HashSet::new();
        for g in &self.generators {
            exists(g.bus, &format!("generator `{}`", g.id))?;
            if !gen_ids.insert(g.id.as_str()) {
                return Err(Error::Validation(format!("duplicate generator id `{}`", g.id)));
            }
            if !gen_buses.insert(g.bus) {
                return Err(Error::Validation(format!(
                    "bus {} has more than one generator",
                    g.bus
                )));
            }
            if self.buses[self.index[&g.bus]].kind == BusKind::Pq {
                return Err(Error::Validation(format!(
                    "generator `{}` sits on PQ bus {}",
                    g.id, g.bus
                )));
            }
            if !(g.v > 0.0) || g.ra < 0.0 || g.xd2 < 0.0 {
                return Err(Error::Validation(format!(
                    "generator `{}`: need v > 0, ra >= 0, xd2 >= 0",
                    g.id
                )));
            }
        }
        for b in &self.buses {
            if b.kind != BusKind::Pq && !gen_buses.contains(&b.id) {
                return Err(Error::Validation(format!(
                    "{:?} bus {} has no generator",
                    b.kind, b.id
                )));
            }
        }
        for l in &self.loads {
            exists(l.bus, "load")?;
        }
        for d in &self.datacenters {
            exists(d.bus, "datacenter")?;
            if !(d.rating_mw > 0.0) {
                return Err(Error::Validation(format!(
                    "datacenter at bus {}: rating must be positive",
                    d.bus
                )));
            }
        }
        self.check_connected()
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for br in self.branches.iter().filter(|b| b.in_service) {
            let (f, t) = (self.index[&br.from], self.index[&br.to]);
            adj[f].push(t);
            adj[t].push(f);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Validation(format!(
                "network is not connected: bus {} is islanded",
                self.buses[i].id
            )));
        }
        Ok(())
    }
}

/// Reads and validates a case file. Constant-impedance loads become bus
/// shunt admittances `y = (P - jQ)/|V|²` at nominal voltage.
pub fn parse_case(path: &Path) -> Result<NetworkCase> {
    let file: CaseFile = read_json(path)?;
    let dir = path.parent().map(Path::to_path_buf);
    file.into_case(dir)
        .map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    system_mva: f64,
    #[serde(default = "default_f_sync")]
    f_sync_hz: f64,
    buses: Vec<BusFile>,
    #[serde(default)]
    branches: Vec<BranchFile>,
    #[serde(default)]
    generators: Vec<GeneratorFile>,
    #[serde(default)]
    loads: Vec<LoadFile>,
    #[serde(default)]
    datacenters: Vec<DataCenterSite>,
}

fn default_f_sync() -> f64 {
    60.0
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusFile {
    id: u32,
    #[serde(rename = "type")]
    kind: BusKind,
    #[serde(default = "one")]
    vm: f64,
    #[serde(default)]
    va_deg: f64,
    #[serde(default)]
    gs: f64,
    #[serde(default)]
    bs: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchFile {
    from: u32,
    to: u32,
    #[serde(default)]
    r: f64,
    x: f64,
    #[serde(default)]
    b: f64,
    #[serde(default = "one")]
    tap: f64,
    #[serde(default = "yes")]
    in_service: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorFile {
    id: String,
    bus: u32,
    #[serde(default)]
    p: f64,
    #[serde(default = "one")]
    v: f64,
    #[serde(default)]
    ra: f64,
    #[serde(default)]
    xd2: f64,
    #[serde(default)]
    kind: GenKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shaft: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    material: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadFile {
    bus: u32,
    p: f64,
    #[serde(default)]
    q: f64,
    #[serde(default)]
    model: LoadModel,
}

impl CaseFile {
    fn into_case(self, base_dir: Option<PathBuf>) -> Result<NetworkCase> {
        let buses = self
            .buses
            .into_iter()
            .map(|b| Bus {
                id: b.id,
                kind: b.kind,
                vm: b.vm,
                va_deg: b.va_deg,
                gs: b.gs,
                bs: b.bs,
            })
            .collect();
        let branches = self
            .branches
            .into_iter()
            .map(|b| Branch {
                from: b.from,
                to: b.to,
                r: b.r,
                x: b.x,
                b: b.b,
                tap: b.tap,
                in_service: b.in_service,
            })
            .collect();
        let generators = self
            .generators
            .into_iter()
            .map(|g| Generator {
                id: g.id,
                bus: g.bus,
                p: g.p,
                v: g.v,
                ra: g.ra,
                xd2: g.xd2,
                kind: g.kind,
                shaft: g.shaft,
                material: g.material,
            })
            .collect();
        let loads = self
            .loads
            .into_iter()
            .map(|l| Load {
                bus: l.bus,
                p: l.p,
                q: l.q,
                model: l.model,
            })
            .collect();
        let mut case = NetworkCase::new(
            self.system_mva,
            self.f_sync_hz,
            buses,
            branches,
            generators,
            loads,
            self.datacenters,
        )?;
        case.base_dir = base_dir;
        Ok(case)
    }
}

impl From<&NetworkCase> for CaseFile {
    fn from(c: &NetworkCase) -> Self {
        CaseFile {
            system_mva: c.system_mva,
            f_sync_hz: c.f_sync_hz,
            buses: c
                .buses
                .iter()
                .map(|b| BusFile {
                    id: b.id,
                    kind: b.kind,
                    vm: b.vm,
                    va_deg: b.va_deg,
                    gs: b.gs,
                    bs: b.bs,
                })
                .collect(),
            branches: c
                .branches
                .iter()
                .map(|b| BranchFile {
                    from: b.from,
                    to: b.to,
                    r: b.r,
                    x: b.x,
                    b: b.b,
                    tap: b.tap,
                    in_service: b.in_service,
                })
                .collect(),
            generators: c
                .generators
                .iter()
                .map(|g| GeneratorFile {
                    id: g.id.clone(),
                    bus: g.bus,
                    p: g.p,
                    v: g.v,
                    ra: g.ra,
                    xd2: g.xd2,
                    kind: g.kind,
                    shaft: g.shaft.clone(),
                    material: g.material.clone(),
                })
                .collect(),
            loads: c
                .loads
                .iter()
                .map(|l| LoadFile {
                    bus: l.bus,
                    p: l.p,
                    q: l.q,
                    model: l.model,
                })
                .collect(),
            datacenters: c.datacenters.clone(),
        }
    }
}
