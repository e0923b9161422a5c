use serde::Serialize;

use super::CycleSet;
use crate::model::MaterialSpec;
use crate::{Error, Result};

/// Equivalent fully reversed amplitude under the Goodman correction.
/// Returns infinity at or beyond the ultimate strength.
pub fn equivalent_amplitude(amplitude: f64, mean: f64, material: &MaterialSpec) -> f64 {
    if mean <= 0.0 {
        return amplitude;
    }
    let f = 1.0 - mean / material.ultimate_strength;
    if f <= 0.0 {
        f64::INFINITY
    } else {
        amplitude / f
    }
}

/// Cycles to failure at a fully reversed amplitude.
///
/// Piecewise linear in log-log between the S-N points. Above the first
/// point and at or above `Sut` the life is one cycle. Between the last point
/// and `Se` the last segment is extended. At or below `Se` the life is
/// infinite.
pub fn cycles_to_failure(amplitude: f64, material: &MaterialSpec) -> f64 {
    let pts = &material.sn_points;
    if amplitude <= material.endurance_limit {
        return f64::INFINITY;
    }
    if amplitude >= material.ultimate_strength || amplitude > pts[0].1 {
        return 1.0;
    }
    let seg = pts
        .windows(2)
        .position(|w| amplitude >= w[1].1)
        .unwrap_or(pts.len() - 2);
    let ((n0, s0), (n1, s1)) = (pts[seg], pts[seg + 1]);
    let slope = (n1.ln() - n0.ln()) / (s1.ln() - s0.ln());
    (n0.ln() + slope * (amplitude.ln() - s0.ln())).exp()
}

/// Palmgren-Miner damage `Σ nᵢ/Nᵢ`.
pub fn miner_damage(cycles: &CycleSet, material: &MaterialSpec) -> Result<f64> {
    if material.sn_points.len() < 2 {
        return Err(Error::Validation(
            "S-N curve needs at least two points".into(),
        ));
    }
    Ok(cycles
        .cycles
        .iter()
        .map(|c| {
            let sa = equivalent_amplitude(c.amplitude(), c.mean, material);
            let n = cycles_to_failure(sa, material);
            if n.is_infinite() {
                0.0
            } else {
                c.count / n
            }
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionDamage {
    pub section: usize,
    pub damage: f64,
    pub failed: bool,
}

impl SectionDamage {
    pub fn new(section: usize, damage: f64) -> Self {
        SectionDamage {
            section,
            damage,
            failed: damage >= 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fatigue::Cycle;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn steel() -> MaterialSpec {
        MaterialSpec {
            name: "steel".into(),
            endurance_limit: 300.0,
            ultimate_strength: 670.0,
            yield_strength: 435.0,
            sn_points: vec![(1e3, 603.0), (1e4, 450.0), (1e6, 320.0)],
        }
    }

    fn full(range: f64, mean: f64) -> Cycle {
        Cycle {
            range,
            mean,
            count: 1.0,
        }
    }

    #[test]
    fn below_endurance_is_harmless() {
        let set = CycleSet {
            cycles: vec![full(400.0, 0.0), full(100.0, -50.0), full(599.0, 0.0)],
        };
        assert_eq!(miner_damage(&set, &steel()).unwrap(), 0.0);
    }

    #[test]
    fn exact_table_lookup() {
        let set = CycleSet {
            cycles: vec![full(900.0, 0.0)],
        };
        assert_relative_eq!(miner_damage(&set, &steel()).unwrap(), 1e-4, max_relative = 1e-12);
    }

    #[test]
    fn geometric_mean_interpolation() {
        let s = (450.0f64 * 320.0).sqrt();
        assert_relative_eq!(cycles_to_failure(s, &steel()), 1e5, max_relative = 1e-12);
    }

    #[test]
    fn extrapolates_last_segment_down_to_endurance() {
        let m = steel();
        let n = cycles_to_failure(310.0, &m);
        assert!(n > 1e6 && n.is_finite());
    }

    #[test]
    fn ultimate_and_above_first_point_fail_in_one_cycle() {
        let m = steel();
        assert_eq!(cycles_to_failure(700.0, &m), 1.0);
        assert_eq!(cycles_to_failure(650.0, &m), 1.0);
        assert_eq!(equivalent_amplitude(10.0, 670.0, &m), f64::INFINITY);
    }

    #[test]
    fn goodman_correction_raises_tensile_amplitude() {
        let m = steel();
        assert_relative_eq!(equivalent_amplitude(100.0, 335.0, &m), 200.0);
        assert_eq!(equivalent_amplitude(100.0, -335.0, &m), 100.0);
    }

    fn arb_cycle() -> impl Strategy<Value = Cycle> {
        (1.0f64..1400.0, -300.0f64..300.0, prop::bool::ANY).prop_map(|(r, m, f)| Cycle {
            range: r,
            mean: m,
            count: if f { 1.0 } else { 0.5 },
        })
    }

    proptest! {
        #[test]
        fn damage_is_additive(
            a in prop::collection::vec(arb_cycle(), 0..20),
            b in prop::collection::vec(arb_cycle(), 0..20),
        ) {
            let m = steel();
            let sa = CycleSet { cycles: a };
            let sb = CycleSet { cycles: b };
            let mut ab = sa.clone();
            ab.extend(&sb);
            let d = miner_damage(&ab, &m).unwrap();
            let parts = miner_damage(&sa, &m).unwrap() + miner_damage(&sb, &m).unwrap();
            prop_assert!((d - parts).abs() <= 1e-12 * d.max(1.0));
        }

        #[test]
        fn damage_is_monotone_in_amplitude(c in arb_cycle(), bump in 0.0f64..200.0) {
            let m = steel();
            let lo = CycleSet { cycles: vec![c] };
            let hi = CycleSet { cycles: vec![Cycle { range: c.range + bump, ..c }] };
            prop_assert!(miner_damage(&hi, &m).unwrap() >= miner_damage(&lo, &m).unwrap());
        }
    }
}
