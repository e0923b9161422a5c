use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One counted cycle. `count` is 1.0 for a full cycle and 0.5 for a half.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub range: f64,
    pub mean: f64,
    pub count: f64,
}

impl Cycle {
    pub fn amplitude(&self) -> f64 {
        self.range / 2.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CycleSet {
    pub cycles: Vec<Cycle>,
}

impl CycleSet {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    /// Sum of counts (full cycles count one, halves one half).
    pub fn total_count(&self) -> f64 {
        self.cycles.iter().map(|c| c.count).sum()
    }

    pub fn full_cycles(&self) -> impl Iterator<Item = &Cycle> {
        self.cycles.iter().filter(|c| c.count == 1.0)
    }

    pub fn half_cycles(&self) -> impl Iterator<Item = &Cycle> {
        self.cycles.iter().filter(|c| c.count == 0.5)
    }

    pub fn extend(&mut self, other: &CycleSet) {
        self.cycles.extend_from_slice(&other.cycles);
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Validation(format!("{other:?}")),
        })?;
        w.write_record(["range", "mean", "count"])?;
        for c in &self.cycles {
            w.write_record([
                format!("{:.9e}", c.range),
                format!("{:.9e}", c.mean),
                format!("{}", c.count),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Peaks and valleys of `series`, keeping the first and last points.
/// Plateaus collapse to one point and interior points of monotone runs are
/// dropped.
pub fn reversals(series: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &x in series {
        match out.len() {
            0 => out.push(x),
            1 => {
                if x != out[0] {
                    out.push(x);
                }
            }
            _ => {
                let n = out.len();
                let (a, b) = (out[n - 2], out[n - 1]);
                if x == b {
                    continue;
                }
                if (b - a) * (x - b) > 0.0 {
                    // still moving the same way
                    out[n - 1] = x;
                } else {
                    out.push(x);
                }
            }
        }
    }
    if out.len() == 1 {
        out.clear();
    }
    out
}

/// Rainflow counting per ASTM E1049-85 §5.4.4, with the residue counted as
/// half cycles.
pub fn rainflow(series: &[f64]) -> Result<CycleSet> {
    if series.len() < 2 {
        return Err(Error::Domain(format!(
            "rainflow needs at least two samples, got {}",
            series.len()
        )));
    }
    let mut cycles = Vec::new();
    let mut stack: Vec<f64> = Vec::new();
    for x in reversals(series) {
        stack.push(x);
        while stack.len() >= 3 {
            let n = stack.len();
            let range_x = (stack[n - 1] - stack[n - 2]).abs();
            let range_y = (stack[n - 2] - stack[n - 3]).abs();
            if range_x < range_y {
                break;
            }
            let mean = (stack[n - 2] + stack[n - 3]) / 2.0;
            if n == 3 {
                // Y contains the starting point
                cycles.push(Cycle {
                    range: range_y,
                    mean,
                    count: 0.5,
                });
                stack.remove(0);
            } else {
                cycles.push(Cycle {
                    range: range_y,
                    mean,
                    count: 1.0,
                });
                stack.drain(n - 3..n - 1);
            }
        }
    }
    for w in stack.windows(2) {
        cycles.push(Cycle {
            range: (w[1] - w[0]).abs(),
            mean: (w[0] + w[1]) / 2.0,
            count: 0.5,
        });
    }
    Ok(CycleSet { cycles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    #[test]
    fn standard_example() {
        let c = rainflow(&[-2.0, 1.0, -3.0, 5.0, -1.0, 3.0, -4.0, 4.0, -2.0]).unwrap();
        let full: Vec<f64> = c.full_cycles().map(|c| c.range).collect();
        let half: Vec<f64> = c.half_cycles().map(|c| c.range).collect();
        assert_eq!(full, vec![4.0]);
        assert_eq!(sorted(half), vec![3.0, 4.0, 6.0, 8.0, 8.0, 9.0]);
        let pair = c.full_cycles().next().unwrap();
        assert_eq!(pair.mean, 1.0);
    }

    #[test]
    fn monotone_ramp_is_one_half_cycle() {
        let c = rainflow(&[0.0, 1.0, 2.0, 3.5]).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.cycles[0].count, 0.5);
        assert_eq!(c.cycles[0].range, 3.5);
    }

    #[test]
    fn constant_series_is_empty() {
        assert!(rainflow(&[2.0, 2.0, 2.0]).unwrap().is_empty());
        assert!(rainflow(&[1.0]).is_err());
    }

    #[test]
    fn reversal_reduction() {
        assert_eq!(
            reversals(&[0.0, 1.0, 1.0, 2.0, 1.0, 0.0, 0.0, 3.0]),
            vec![0.0, 2.0, 0.0, 3.0]
        );
    }

    proptest! {
        #[test]
        fn half_count_matches_reversals(series in prop::collection::vec(-100.0f64..100.0, 2..200)) {
            let c = rainflow(&series).unwrap();
            let r = reversals(&series);
            let halves = 2.0 * c.total_count();
            prop_assert_eq!(halves, r.len().saturating_sub(1) as f64);
            prop_assert!(c.cycles.iter().all(|c| c.range > 0.0));
        }
    }
}
