use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{from_json_str, read_json};
use crate::{Error, Result};

/// Fatigue and strength data of the shaft material. All stresses share one
/// unit (MPa in the bundled data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    #[serde(default)]
    pub name: String,
    #[serde(rename = "Se")]
    pub endurance_limit: f64,
    #[serde(rename = "Sut")]
    pub ultimate_strength: f64,
    #[serde(rename = "Sy")]
    pub yield_strength: f64,
    /// `(cycles to failure, fully reversed amplitude)`, ascending in cycles.
    pub sn_points: Vec<(f64, f64)>,
}

impl MaterialSpec {
    pub fn validate(&self) -> Result<()> {
        let (se, sy, sut) = (
            self.endurance_limit,
            self.yield_strength,
            self.ultimate_strength,
        );
        if !(0.0 < se && se <= sy && sy <= sut) {
            return Err(Error::Validation(format!(
                "material `{}`: need 0 < Se <= Sy <= Sut, got Se = {se}, Sy = {sy}, Sut = {sut}",
                self.name
            )));
        }
        if self.sn_points.len() < 2 {
            return Err(Error::Validation(format!(
                "material `{}`: at least two sn_points are required",
                self.name
            )));
        }
        for (i, &(n, s)) in self.sn_points.iter().enumerate() {
            if !(n >= 1.0 && s > 0.0) {
                return Err(Error::Validation(format!(
                    "material `{}`: sn_points[{i}] = ({n}, {s}) must have N >= 1 and S > 0",
                    self.name
                )));
            }
        }
        for (i, w) in self.sn_points.windows(2).enumerate() {
            let ((n0, s0), (n1, s1)) = (w[0], w[1]);
            if !(n1 > n0 && s1 < s0) {
                return Err(Error::Validation(format!(
                    "material `{}`: sn_points must increase in N and decrease in S (entries {i}, {})",
                    self.name,
                    i + 1
                )));
            }
        }
        let last = self.sn_points.last().unwrap().1;
        if last < se {
            return Err(Error::Validation(format!(
                "material `{}`: last sn_point amplitude {last} is below Se = {se}",
                self.name
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: MaterialSpec = from_json_str(text, "<material>")?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn parse_material(path: &Path) -> Result<MaterialSpec> {
    let m: MaterialSpec = read_json(path)?;
    m.validate()
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    Ok(m)
}
