use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Subsynchronous frequency grid: uniform coarse steps plus bisection
/// refinement near each undamped mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    #[serde(default = "default_step")]
    pub step_hz: f64,
    #[serde(default = "default_refine")]
    pub refine_hz: f64,
}

fn default_step() -> f64 {
    0.05
}

fn default_refine() -> f64 {
    0.005
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        FrequencyGrid {
            step_hz: default_step(),
            refine_hz: default_refine(),
        }
    }
}

impl FrequencyGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_hz > 0.0 && self.refine_hz > 0.0 && self.refine_hz <= self.step_hz) {
            return Err(Error::Validation(format!(
                "grid needs 0 < refine_hz <= step_hz, got step {} / refine {}",
                self.step_hz, self.refine_hz
            )));
        }
        Ok(())
    }

    /// Grid points in Hz, strictly inside `(0, f_sync)`, ascending.
    ///
    /// The coarse interval holding each mode is halved toward the mode until
    /// neighbouring points are no more than `refine_hz` apart; the mode
    /// frequency itself is also included.
    pub fn points_hz(&self, f_sync: f64, modes_hz: &[f64]) -> Vec<f64> {
        let n = (f_sync / self.step_hz).ceil() as usize;
        let mut pts: Vec<f64> = (1..n)
            .map(|k| k as f64 * self.step_hz)
            .filter(|&f| f < f_sync)
            .collect();
        for &fm in modes_hz {
            if !(fm > 0.0 && fm < f_sync) {
                continue;
            }
            let k = (fm / self.step_hz).floor();
            let (mut lo, mut hi) = (k * self.step_hz, ((k + 1.0) * self.step_hz).min(f_sync));
            while hi - lo > self.refine_hz {
                let mid = 0.5 * (lo + hi);
                pts.push(mid);
                if fm < mid {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            pts.push(fm);
        }
        pts.retain(|&f| f > 0.0 && f < f_sync);
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        pts
    }

    /// Same grid in electrical rad/s.
    pub fn points_rad(&self, f_sync: f64, modes_rad: &[f64]) -> Vec<f64> {
        let modes_hz: Vec<f64> = modes_rad.iter().map(|w| w / (2.0 * PI)).collect();
        self.points_hz(f_sync, &modes_hz)
            .into_iter()
            .map(|f| 2.0 * PI * f)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_grid_covers_open_interval() {
        let g = FrequencyGrid::default();
        let pts = g.points_hz(60.0, &[]);
        assert_eq!(pts.len(), 1199);
        assert!((pts[0] - 0.05).abs() < 1e-12);
        assert!(*pts.last().unwrap() < 60.0);
    }

    #[test]
    fn refinement_brackets_each_mode() {
        let g = FrequencyGrid::default();
        let mode = 15.712_345;
        let pts = g.points_hz(60.0, &[mode]);
        assert!(pts.contains(&mode));
        let i = pts.iter().position(|&f| f == mode).unwrap();
        assert!(mode - pts[i - 1] <= g.refine_hz + 1e-12);
        assert!(pts[i + 1] - mode <= g.refine_hz + 1e-12);
        assert!(pts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn modes_outside_range_are_ignored() {
        let g = FrequencyGrid::default();
        assert_eq!(g.points_hz(60.0, &[75.0, -1.0]).len(), 1199);
    }
}
