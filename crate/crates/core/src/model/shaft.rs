use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{from_json_str, read_json};
use crate::{Error, Result};

/// Shear modulus of steel, Pa.
pub const DEFAULT_SHEAR_MODULUS: f64 = 83e9;

#[derive(Debug, Clone, PartialEq)]
pub struct RotorMass {
    pub label: String,
    /// Inertia constant H on the machine MVA base, s.
    pub inertia_h: f64,
    /// Self damping, p.u. torque per p.u. speed.
    pub self_damping: f64,
    pub applies_mech_torque: bool,
    pub is_generator: bool,
    /// Fraction of the total mechanical torque developed on this mass.
    pub mech_torque_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShaftSection {
    /// Stiffness, p.u. torque per electrical radian. Resolved at parse time
    /// from the direct value or from the geometry.
    pub stiffness: f64,
    /// Mutual damping, p.u. torque per p.u. speed difference.
    pub mutual_damping: f64,
    pub radius_m: Option<f64>,
    pub length_m: Option<f64>,
    pub shear_modulus_pa: f64,
    /// Stress (material units) produced by one p.u. of transmitted torque.
    /// Overrides the geometry-derived value when present.
    pub stress_per_pu_torque: Option<f64>,
    stiffness_given: bool,
}

impl ShaftSection {
    pub fn with_stiffness(stiffness: f64, mutual_damping: f64) -> Self {
        ShaftSection {
            stiffness,
            mutual_damping,
            radius_m: None,
            length_m: None,
            shear_modulus_pa: DEFAULT_SHEAR_MODULUS,
            stress_per_pu_torque: None,
            stiffness_given: true,
        }
    }
}

/// Ordered chain of `N + 1` rotor masses joined by `N` shaft sections.
#[derive(Debug, Clone, PartialEq)]
pub struct ShaftAssembly {
    pub name: String,
    pub masses: Vec<RotorMass>,
    pub sections: Vec<ShaftSection>,
    pub pole_count: u32,
    pub mva_rating: f64,
    pub sync_freq_hz: f64,
}

/// Base quantities used to per-unitize shaft torques.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueBase {
    pub mva: f64,
    /// Electrical rad/s.
    pub sync_speed: f64,
    pub pole_count: u32,
}

impl TorqueBase {
    /// Mechanical synchronous speed, rad/s.
    pub fn mech_speed(&self) -> f64 {
        self.sync_speed * 2.0 / self.pole_count as f64
    }

    /// Base torque in N·m.
    pub fn torque_nm(&self) -> f64 {
        self.mva * 1e6 / self.mech_speed()
    }
}

/// Torsional stiffness of a solid circular section, `G·J/l` with
/// `J = πR⁴/2`, converted to p.u. torque per electrical radian.
pub fn section_stiffness(
    radius_m: f64,
    length_m: f64,
    shear_modulus_pa: f64,
    base: &TorqueBase,
) -> Result<f64> {
    if !(radius_m > 0.0 && length_m > 0.0 && shear_modulus_pa > 0.0) {
        return Err(Error::Domain(format!(
            "section geometry must be positive (R = {radius_m}, l = {length_m}, G = {shear_modulus_pa})"
        )));
    }
    check_base(base)?;
    let polar_moment = PI * radius_m.powi(4) / 2.0;
    let k_mech = shear_modulus_pa * polar_moment / length_m;
    // θ = (2/p_f)·δ
    let k_elec = k_mech * 2.0 / base.pole_count as f64;
    Ok(k_elec / base.torque_nm())
}

/// Inverse of the per-unitization in [`section_stiffness`]: N·m per
/// mechanical radian.
pub fn stiffness_to_si(stiffness_pu: f64, base: &TorqueBase) -> f64 {
    stiffness_pu * base.torque_nm() * base.pole_count as f64 / 2.0
}

fn check_base(base: &TorqueBase) -> Result<()> {
    if !(base.mva > 0.0 && base.sync_speed > 0.0) || base.pole_count < 2 || base.pole_count % 2 != 0
    {
        return Err(Error::Domain(format!("invalid torque base {base:?}")));
    }
    Ok(())
}

impl ShaftAssembly {
    pub fn n_sections(&self) -> usize {
        self.sections.len()
    }

    pub fn n_masses(&self) -> usize {
        self.masses.len()
    }

    pub fn generator_index(&self) -> usize {
        self.masses
            .iter()
            .position(|m| m.is_generator)
            .expect("validated assembly has a generator mass")
    }

    /// Electrical rad/s.
    pub fn sync_speed(&self) -> f64 {
        2.0 * PI * self.sync_freq_hz
    }

    pub fn torque_base(&self) -> TorqueBase {
        TorqueBase {
            mva: self.mva_rating,
            sync_speed: self.sync_speed(),
            pole_count: self.pole_count,
        }
    }

    /// Stress per p.u. transmitted torque in section `r`.
    ///
    /// An explicit `stress_per_pu_torque` wins. With a radius the torsion
    /// formula `τ = T·R/J` gives MPa. Otherwise stresses stay in p.u. torque.
    pub fn stress_coefficient(&self, r: usize) -> f64 {
        let s = &self.sections[r];
        if let Some(c) = s.stress_per_pu_torque {
            return c;
        }
        match s.radius_m {
            Some(radius) => {
                let polar_moment = PI * radius.powi(4) / 2.0;
                radius * self.torque_base().torque_nm() / polar_moment / 1e6
            }
            None => 1.0,
        }
    }

    /// Per-mass share of the total mechanical torque, summing to one.
    ///
    /// Without explicit shares the torque is split evenly over the masses
    /// flagged `applies_mech_torque`; when no mass is flagged the generator
    /// mass carries it.
    pub fn mech_torque_shares(&self) -> Vec<f64> {
        let n = self.masses.len();
        let explicit = self.masses.iter().any(|m| m.mech_torque_share.is_some());
        let mut shares: Vec<f64> = if explicit {
            self.masses
                .iter()
                .map(|m| m.mech_torque_share.unwrap_or(0.0))
                .collect()
        } else {
            self.masses
                .iter()
                .map(|m| if m.applies_mech_torque { 1.0 } else { 0.0 })
                .collect()
        };
        let total: f64 = shares.iter().sum();
        if total <= 0.0 {
            shares = vec![0.0; n];
            shares[self.generator_index()] = 1.0;
            return shares;
        }
        shares.iter_mut().for_each(|s| *s /= total);
        shares
    }

    pub fn validate(&self) -> Result<()> {
        if self.masses.is_empty() {
            return Err(Error::Validation("shaft has no masses".into()));
        }
        if self.sections.len() + 1 != self.masses.len() {
            return Err(Error::Validation(format!(
                "shaft `{}` has {} masses but {} sections; expected {} sections",
                self.name,
                self.masses.len(),
                self.sections.len(),
                self.masses.len() - 1
            )));
        }
        let gens = self.masses.iter().filter(|m| m.is_generator).count();
        if gens != 1 {
            return Err(Error::Validation(format!(
                "shaft `{}` must have exactly one generator mass, found {gens}",
                self.name
            )));
        }
        if self.pole_count < 2 || self.pole_count % 2 != 0 {
            return Err(Error::Validation(format!(
                "pole_count must be even and >= 2, got {}",
                self.pole_count
            )));
        }
        if !(self.mva_rating > 0.0) {
            return Err(Error::Validation(format!(
                "mva must be positive, got {}",
                self.mva_rating
            )));
        }
        if !(self.sync_freq_hz > 0.0) {
            return Err(Error::Validation(format!(
                "f_sync_hz must be positive, got {}",
                self.sync_freq_hz
            )));
        }
        for m in &self.masses {
            if !(m.inertia_h > 0.0) {
                return Err(Error::Validation(format!(
                    "mass `{}`: inertia H must be positive, got {}",
                    m.label, m.inertia_h
                )));
            }
            if !(m.self_damping >= 0.0) {
                return Err(Error::Validation(format!(
                    "mass `{}`: self damping must be nonnegative",
                    m.label
                )));
            }
            if let Some(share) = m.mech_torque_share {
                if !(share >= 0.0) {
                    return Err(Error::Validation(format!(
                        "mass `{}`: Tm_share must be nonnegative",
                        m.label
                    )));
                }
                if share > 0.0 && !m.applies_mech_torque {
                    return Err(Error::Validation(format!(
                        "mass `{}` has a Tm_share but has_Tm is false",
                        m.label
                    )));
                }
            }
        }
        for (r, s) in self.sections.iter().enumerate() {
            if !(s.stiffness > 0.0) {
                return Err(Error::Validation(format!(
                    "section {r}: stiffness must be positive, got {}",
                    s.stiffness
                )));
            }
            if !(s.mutual_damping >= 0.0) {
                return Err(Error::Validation(format!(
                    "section {r}: mutual damping must be nonnegative"
                )));
            }
            for (name, v) in [("R", s.radius_m), ("l", s.length_m)] {
                if let Some(v) = v {
                    if !(v > 0.0) {
                        return Err(Error::Validation(format!(
                            "section {r}: {name} must be positive, got {v}"
                        )));
                    }
                }
            }
            if !(s.shear_modulus_pa > 0.0) {
                return Err(Error::Validation(format!(
                    "section {r}: G must be positive"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ShaftFile = from_json_str(text, "<shaft>")?;
        file.into_assembly()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ShaftFile::from(self))?)
    }
}

/// Reads and validates a shaft file.
pub fn parse_shaft(path: &Path) -> Result<ShaftAssembly> {
    let file: ShaftFile = read_json(path)?;
    file.into_assembly().map_err(|e| match e {
        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShaftFile {
    #[serde(default)]
    name: String,
    masses: Vec<MassFile>,
    sections: Vec<SectionFile>,
    pole_count: u32,
    mva: f64,
    f_sync_hz: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MassFile {
    label: String,
    #[serde(rename = "H")]
    h: f64,
    #[serde(rename = "D_self", default)]
    d_self: f64,
    #[serde(rename = "has_Tm")]
    has_tm: bool,
    is_gen: bool,
    #[serde(rename = "Tm_share", default, skip_serializing_if = "Option::is_none")]
    tm_share: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SectionFile {
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
    #[serde(rename = "l", default, skip_serializing_if = "Option::is_none")]
    l: Option<f64>,
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    g: Option<f64>,
    #[serde(rename = "D_mutual", default)]
    d_mutual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stress_per_pu_torque: Option<f64>,
}

impl ShaftFile {
    fn into_assembly(self) -> Result<ShaftAssembly> {
        if self.pole_count < 2 || self.pole_count % 2 != 0 {
            return Err(Error::Validation(format!(
                "pole_count must be even and >= 2, got {}",
                self.pole_count
            )));
        }
        let base = TorqueBase {
            mva: self.mva,
            sync_speed: 2.0 * PI * self.f_sync_hz,
            pole_count: self.pole_count,
        };
        let sections = self
            .sections
            .into_iter()
            .enumerate()
            .map(|(r, s)| {
                let shear_modulus_pa = s.g.unwrap_or(DEFAULT_SHEAR_MODULUS);
                let stiffness = match (s.k, s.r, s.l) {
                    (Some(k), _, _) => k,
                    (None, Some(radius), Some(length)) => {
                        section_stiffness(radius, length, shear_modulus_pa, &base)?
                    }
                    _ => {
                        return Err(Error::Validation(format!(
                            "section {r}: give either K or both R and l"
                        )))
                    }
                };
                Ok(ShaftSection {
                    stiffness,
                    mutual_damping: s.d_mutual,
                    radius_m: s.r,
                    length_m: s.l,
                    shear_modulus_pa,
                    stress_per_pu_torque: s.stress_per_pu_torque,
                    stiffness_given: s.k.is_some(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let masses = self
            .masses
            .into_iter()
            .map(|m| RotorMass {
                label: m.label,
                inertia_h: m.h,
                self_damping: m.d_self,
                applies_mech_torque: m.has_tm,
                is_generator: m.is_gen,
                mech_torque_share: m.tm_share,
            })
            .collect();
        let assembly = ShaftAssembly {
            name: self.name,
            masses,
            sections,
            pole_count: self.pole_count,
            mva_rating: self.mva,
            sync_freq_hz: self.f_sync_hz,
        };
        assembly.validate()?;
        Ok(assembly)
    }
}

impl From<&ShaftAssembly> for ShaftFile {
    fn from(a: &ShaftAssembly) -> Self {
        ShaftFile {
            name: a.name.clone(),
            masses: a
                .masses
                .iter()
                .map(|m| MassFile {
                    label: m.label.clone(),
                    h: m.inertia_h,
                    d_self: m.self_damping,
                    has_tm: m.applies_mech_torque,
                    is_gen: m.is_generator,
                    tm_share: m.mech_torque_share,
                })
                .collect(),
            sections: a
                .sections
                .iter()
                .map(|s| SectionFile {
                    // geometry-only sections re-derive the same K on reparse
                    k: s.stiffness_given.then_some(s.stiffness),
                    r: s.radius_m,
                    l: s.length_m,
                    g: (s.shear_modulus_pa != DEFAULT_SHEAR_MODULUS).then_some(s.shear_modulus_pa),
                    d_mutual: s.mutual_damping,
                    stress_per_pu_torque: s.stress_per_pu_torque,
                })
                .collect(),
            pole_count: a.pole_count,
            mva: a.mva_rating,
            f_sync_hz: a.sync_freq_hz,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base() -> TorqueBase {
        TorqueBase {
            mva: 892.4,
            sync_speed: 2.0 * PI * 60.0,
            pole_count: 2,
        }
    }

    #[test]
    fn stiffness_formula_matches_hand_value() {
        // G·π·R⁴/(2l) for R = 0.5 m, l = 1 m, G = 83 GPa.
        let b = base();
        let k = section_stiffness(0.5, 1.0, 83e9, &b).unwrap();
        let si = stiffness_to_si(k, &b);
        let expected = 83e9 * PI * 0.0625 / 2.0;
        assert_relative_eq!(si, expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 8.148e9, max_relative = 1e-3);
    }

    #[test]
    fn stiffness_scales_with_geometry() {
        let b = base();
        let k = section_stiffness(0.3, 2.0, 83e9, &b).unwrap();
        let k_long = section_stiffness(0.3, 4.0, 83e9, &b).unwrap();
        let k_thick = section_stiffness(0.6, 2.0, 83e9, &b).unwrap();
        assert_relative_eq!(k_long, k / 2.0, max_relative = 1e-12);
        assert_relative_eq!(k_thick, 16.0 * k, max_relative = 1e-12);
    }

    #[test]
    fn nonpositive_geometry_is_a_domain_error() {
        let b = base();
        assert!(matches!(
            section_stiffness(0.0, 1.0, 83e9, &b),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            section_stiffness(0.5, -1.0, 83e9, &b),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn four_pole_machine_halves_electrical_stiffness() {
        let two = base();
        let four = TorqueBase {
            pole_count: 4,
            ..two
        };
        // Base torque doubles with half the mechanical speed, and each
        // electrical radian is half a mechanical one.
        let k2 = section_stiffness(0.4, 1.5, 83e9, &two).unwrap();
        let k4 = section_stiffness(0.4, 1.5, 83e9, &four).unwrap();
        assert_relative_eq!(k4, k2 / 4.0, max_relative = 1e-12);
    }

    const TWO_MASS: &str = r#"{
        "name": "two",
        "pole_count": 2, "mva": 100.0, "f_sync_hz": 60.0,
        "masses": [
            {"label": "T", "H": 1.0, "has_Tm": true, "is_gen": false},
            {"label": "G", "H": 1.0, "has_Tm": false, "is_gen": true}
        ],
        "sections": [{"K": 50.0}]
    }"#;

    #[test]
    fn parses_two_mass_file() {
        let s = ShaftAssembly::from_json(TWO_MASS).unwrap();
        assert_eq!(s.n_sections(), 1);
        assert_eq!(s.generator_index(), 1);
        assert_eq!(s.mech_torque_shares(), vec![1.0, 0.0]);
        assert_eq!(s.stress_coefficient(0), 1.0);
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let text = TWO_MASS.replace(r#"[{"K": 50.0}]"#, r#"[{"K": 50.0}, {"K": 3.0}]"#);
        let err = ShaftAssembly::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("sections"), "{err}");
    }

    #[test]
    fn missing_generator_is_rejected() {
        let text = TWO_MASS.replace(r#""is_gen": true"#, r#""is_gen": false"#);
        let err = ShaftAssembly::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("generator"), "{err}");
    }

    #[test]
    fn direct_stiffness_wins_over_geometry() {
        let text = TWO_MASS.replace(
            r#"{"K": 50.0}"#,
            r#"{"K": 50.0, "R": 0.3, "l": 2.0}"#,
        );
        let s = ShaftAssembly::from_json(&text).unwrap();
        assert_eq!(s.sections[0].stiffness, 50.0);
    }

    #[test]
    fn geometry_only_section_resolves_stiffness() {
        let text = TWO_MASS.replace(r#"{"K": 50.0}"#, r#"{"R": 0.3, "l": 2.0}"#);
        let s = ShaftAssembly::from_json(&text).unwrap();
        let k = section_stiffness(0.3, 2.0, DEFAULT_SHEAR_MODULUS, &s.torque_base()).unwrap();
        assert_eq!(s.sections[0].stiffness, k);
        // τ = T·R/J in MPa
        let j = PI * 0.3f64.powi(4) / 2.0;
        assert_relative_eq!(
            s.stress_coefficient(0),
            0.3 * s.torque_base().torque_nm() / j / 1e6,
            max_relative = 1e-12
        );
    }

    #[test]
    fn parse_error_names_the_field() {
        let text = TWO_MASS.replace(r#""H": 1.0, "has_Tm": true"#, r#""H": "x", "has_Tm": true"#);
        match ShaftAssembly::from_json(&text) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "masses[0].H"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
