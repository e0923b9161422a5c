//! Domain types and input parsing: shaft assemblies, material data,
//! network cases and data-center sites.

mod case;
mod material;
mod shaft;

use std::path::Path;

use serde::de::DeserializeOwned;

pub use case::{
    parse_case, Branch, Bus, BusKind, DataCenterSite, GenKind, Generator, Load, LoadModel,
    NetworkCase,
};
pub use material::{parse_material, MaterialSpec};
pub use shaft::{
    parse_shaft, section_stiffness, stiffness_to_si, RotorMass, ShaftAssembly, ShaftSection,
    DEFAULT_SHEAR_MODULUS,
};

use crate::{Error, Result};

/// One sinusoidal component of a fluctuating power signal.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FrequencyComponent {
    /// Electrical rad/s.
    pub omega: f64,
    pub amplitude: f64,
    /// Radians.
    #[serde(default)]
    pub phase: f64,
}

impl FrequencyComponent {
    pub fn new(omega: f64, amplitude: f64, phase: f64) -> Self {
        FrequencyComponent {
            omega,
            amplitude,
            phase,
        }
    }

    pub fn from_hz(freq_hz: f64, amplitude: f64, phase: f64) -> Self {
        Self::new(2.0 * std::f64::consts::PI * freq_hz, amplitude, phase)
    }

    pub fn freq_hz(&self) -> f64 {
        self.omega / (2.0 * std::f64::consts::PI)
    }

    /// Checks `0 < omega < sync_speed` and a nonnegative amplitude.
    pub fn validate_subsynchronous(&self, sync_speed: f64) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < sync_speed) {
            return Err(Error::Domain(format!(
                "component frequency {} rad/s is outside (0, {sync_speed})",
                self.omega
            )));
        }
        if !(self.amplitude >= 0.0) {
            return Err(Error::Domain(format!(
                "component amplitude {} is negative",
                self.amplitude
            )));
        }
        Ok(())
    }
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json_str(&text, &path.display().to_string())
}

pub(crate) fn from_json_str<T: DeserializeOwned>(text: &str, file: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::Parse {
            file: file.to_string(),
            field,
            message: e.into_inner().to_string(),
        }
    })
}
