use crate::model::MaterialSpec;
use crate::{Error, Result};

/// Augmented modified Goodman envelope of allowable alternating stress
/// versus mean stress.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodmanEnvelope {
    pub material: MaterialSpec,
}

impl GoodmanEnvelope {
    pub fn new(material: MaterialSpec) -> Self {
        GoodmanEnvelope { material }
    }

    /// Fatigue line only: `Se·(1 − σm/Sut)` in tension, `Se` in compression.
    pub fn fatigue_boundary(&self, sigma_m: f64) -> f64 {
        let m = &self.material;
        if sigma_m >= 0.0 {
            m.endurance_limit * (1.0 - sigma_m / m.ultimate_strength)
        } else {
            m.endurance_limit
        }
    }

    /// Static yield line `Sy − |σm|`.
    pub fn yield_boundary(&self, sigma_m: f64) -> f64 {
        self.material.yield_strength - sigma_m.abs()
    }

    /// Largest alternating stress at mean `sigma_m` that stays inside both
    /// the fatigue and the yield boundaries.
    pub fn allowable_amplitude(&self, sigma_m: f64) -> Result<f64> {
        let sy = self.material.yield_strength;
        if !(sigma_m.abs() < sy) {
            return Err(Error::YieldExceeded {
                mean: sigma_m,
                yield_strength: sy,
            });
        }
        let a = self
            .fatigue_boundary(sigma_m)
            .min(self.yield_boundary(sigma_m));
        Ok(a.max(0.0))
    }
}

/// Convenience wrapper around [`GoodmanEnvelope::allowable_amplitude`].
pub fn allowable_amplitude(material: &MaterialSpec, sigma_m: f64) -> Result<f64> {
    GoodmanEnvelope::new(material.clone()).allowable_amplitude(sigma_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn steel() -> MaterialSpec {
        MaterialSpec {
            name: "steel".into(),
            endurance_limit: 300.0,
            ultimate_strength: 670.0,
            yield_strength: 435.0,
            sn_points: vec![(1e3, 603.0), (1e6, 300.0)],
        }
    }

    #[test]
    fn zero_mean_gives_endurance_limit() {
        let g = GoodmanEnvelope::new(steel());
        assert_eq!(g.allowable_amplitude(0.0).unwrap(), 300.0);
    }

    #[test]
    fn fatigue_line_reaches_zero_at_ultimate() {
        let g = GoodmanEnvelope::new(steel());
        assert_eq!(g.fatigue_boundary(670.0), 0.0);
    }

    #[test]
    fn midpoint_of_fatigue_line() {
        // yield pushed out of the way so only the fatigue line binds
        let mut m = steel();
        m.yield_strength = 670.0;
        let g = GoodmanEnvelope::new(m);
        assert!((g.allowable_amplitude(335.0).unwrap() - 150.0).abs() < 1e-12);
    }

    #[test]
    fn yield_line_binds_at_high_mean() {
        let g = GoodmanEnvelope::new(steel());
        // fatigue: 300·(1 − 400/670) ≈ 120.9; yield: 35
        assert!((g.allowable_amplitude(400.0).unwrap() - 35.0).abs() < 1e-12);
        assert!((g.allowable_amplitude(-400.0).unwrap() - 35.0).abs() < 1e-12);
        assert_eq!(g.allowable_amplitude(-100.0).unwrap(), 300.0);
    }

    #[test]
    fn mean_beyond_yield_is_an_error() {
        let g = GoodmanEnvelope::new(steel());
        assert!(matches!(
            g.allowable_amplitude(435.0),
            Err(Error::YieldExceeded { .. })
        ));
        assert!(g.allowable_amplitude(-500.0).is_err());
    }

    proptest! {
        #[test]
        fn nonincreasing_in_tension(a in 0.0f64..434.0, b in 0.0f64..434.0) {
            let g = GoodmanEnvelope::new(steel());
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(g.allowable_amplitude(hi).unwrap() <= g.allowable_amplitude(lo).unwrap());
        }

        #[test]
        fn compressive_side_is_flat_then_yield_limited(m in -434.0f64..0.0) {
            let g = GoodmanEnvelope::new(steel());
            let a = g.allowable_amplitude(m).unwrap();
            prop_assert_eq!(a, 300.0f64.min(435.0 + m));
        }
    }
}
