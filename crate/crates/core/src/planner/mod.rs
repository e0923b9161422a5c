//! Site screening, the iterative allocation LP and spectrum compliance.

mod compliance;
mod simplex;

use serde::Serialize;

pub use compliance::{compliance_check, ComplianceReport, WINDOW_S};
pub use simplex::{simplex_solve, LpSolution, LpStatus, TOLERANCE};

use crate::interaction::IFMatrix;
use crate::model::DataCenterSite;
use crate::{Error, Result};

/// What limits a site's bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "generator")]
pub enum Binding {
    Generator(String),
    ComputeCap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteBound {
    pub bus: u32,
    pub p_dc_max: f64,
    pub binding: Binding,
    /// `min_i P_e^max(i)/IF_ij`, infinity when no generator constrains it.
    pub grid_bound: f64,
    pub compute_cap: f64,
}

/// `P_dc^max(j) = min(min_i P_e^max(i)/IF_ij, 0.25·rating_j)` for each site,
/// ranked from largest to smallest (ties by bus id). Zero factors impose no
/// constraint. Sites below `threshold_mw` are dropped.
///
/// `p_e_max[i]` belongs to `weights_generators[i]`; `weights[i][j]` to the
/// `j`-th site of `sites`.
pub fn site_bounds(
    p_e_max: &[f64],
    generators: &[String],
    weights: &[Vec<f64>],
    sites: &[DataCenterSite],
    threshold_mw: Option<f64>,
) -> Result<Vec<SiteBound>> {
    if sites.is_empty() {
        return Err(Error::Validation("no candidate data-center sites".into()));
    }
    if p_e_max.len() != generators.len()
        || weights.len() != generators.len()
        || weights.iter().any(|r| r.len() != sites.len())
    {
        return Err(Error::Domain("inconsistent generator/site dimensions".into()));
    }
    let mut out: Vec<SiteBound> = sites
        .iter()
        .enumerate()
        .map(|(j, site)| {
            let mut grid_bound = f64::INFINITY;
            let mut binder = None;
            for i in 0..generators.len() {
                let w = weights[i][j];
                if w < 0.0 {
                    log::warn!("negative weight {w} for `{}`; using magnitude", generators[i]);
                }
                let w = w.abs();
                if w == 0.0 {
                    continue;
                }
                let b = p_e_max[i] / w;
                if b < grid_bound {
                    grid_bound = b;
                    binder = Some(i);
                }
            }
            if binder.is_none() {
                log::info!("site at bus {} is bounded only by its compute cap", site.bus);
            }
            let cap = site.compute_cap_mw();
            let (p, binding) = match binder {
                Some(i) if grid_bound < cap => (grid_bound, Binding::Generator(generators[i].clone())),
                _ => (cap, Binding::ComputeCap),
            };
            SiteBound {
                bus: site.bus,
                p_dc_max: p.max(0.0),
                binding,
                grid_bound,
                compute_cap: cap,
            }
        })
        .collect();
    out.sort_by(|a, b| b.p_dc_max.total_cmp(&a.p_dc_max).then(a.bus.cmp(&b.bus)));
    if let Some(th) = threshold_mw {
        out.retain(|s| s.p_dc_max >= th);
    }
    Ok(out)
}

/// [`site_bounds`] using the planning weights of an IF matrix. Every site
/// must appear among the matrix's buses.
pub fn site_bounds_from_ifs(
    p_e_max: &[f64],
    ifs: &IFMatrix,
    sites: &[DataCenterSite],
    threshold_mw: Option<f64>,
) -> Result<Vec<SiteBound>> {
    let w = ifs.weights();
    let cols: Vec<usize> = sites
        .iter()
        .map(|s| {
            ifs.site_index(s.bus).ok_or_else(|| {
                Error::Validation(format!("bus {} has no interaction factors", s.bus))
            })
        })
        .collect::<Result<_>>()?;
    let weights: Vec<Vec<f64>> = w
        .iter()
        .map(|row| cols.iter().map(|&c| row[c]).collect())
        .collect();
    site_bounds(p_e_max, &ifs.generators, &weights, sites, threshold_mw)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LPResult {
    /// MW, aligned with the bounds passed in.
    pub allocations: Vec<f64>,
    pub alpha_final: f64,
    pub iterations: usize,
    pub feasible: bool,
    pub non_unique: bool,
    /// `Σ_j IF_ij·P_dc^(j)` per generator, MW.
    pub generator_usage: Vec<f64>,
    /// Generators whose constraint is active at the optimum.
    pub binding_generators: Vec<bool>,
}

impl LPResult {
    pub fn total(&self) -> f64 {
        self.allocations.iter().sum()
    }
}

/// Iterative LP: maximize `Σ_j P_j` subject to `Σ_j w_ij·P_j ≤ P_e^max(i)`
/// and `α·P_dc^max(j) ≤ P_j ≤ P_dc^max(j)`, with `α = 1, 1-β, 1-2β, …`
/// (clamped at 0), stopping at the first feasible `α`.
pub fn optimize_allocations(
    p_e_max: &[f64],
    weights: &[Vec<f64>],
    bounds: &[f64],
    beta: f64,
) -> Result<LPResult> {
    optimize_weighted_allocations(p_e_max, weights, bounds, beta, &vec![1.0; bounds.len()])
}

/// [`optimize_allocations`] maximizing `Σ_j c_j·P_j` instead of the plain
/// total. Every `c_j` must be positive.
pub fn optimize_weighted_allocations(
    p_e_max: &[f64],
    weights: &[Vec<f64>],
    bounds: &[f64],
    beta: f64,
    objective: &[f64],
) -> Result<LPResult> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Validation(format!("beta must be in (0, 1), got {beta}")));
    }
    if weights.len() != p_e_max.len() || weights.iter().any(|r| r.len() != bounds.len()) {
        return Err(Error::Domain("inconsistent LP dimensions".into()));
    }
    if bounds.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
        return Err(Error::Validation("site bounds must be finite and nonnegative".into()));
    }
    if objective.len() != bounds.len() {
        return Err(Error::Domain("objective and bounds differ in length".into()));
    }
    if objective.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(Error::Validation("objective weights must be positive and finite".into()));
    }
    let k = bounds.len();
    let c = objective.to_vec();
    let a: Vec<Vec<f64>> = weights
        .iter()
        .map(|r| r.iter().map(|w| w.abs()).collect())
        .collect();
    let mut q = 1usize;
    loop {
        let alpha = (1.0 - (q - 1) as f64 * beta).max(0.0);
        let lower: Vec<f64> = bounds.iter().map(|b| alpha * b).collect();
        let sol = simplex_solve(&c, &a, p_e_max, &lower, bounds)?;
        if sol.is_optimal() {
            let usage: Vec<f64> = a
                .iter()
                .map(|r| r.iter().zip(&sol.x).map(|(w, p)| w * p).sum())
                .collect();
            let binding = usage
                .iter()
                .zip(p_e_max)
                .map(|(u, p)| (p - u).abs() <= 1e-7 * p.abs().max(1.0))
                .collect();
            return Ok(LPResult {
                allocations: sol.x,
                alpha_final: alpha,
                iterations: q,
                feasible: true,
                non_unique: sol.non_unique,
                generator_usage: usage,
                binding_generators: binding,
            });
        }
        if alpha == 0.0 {
            // only reachable with a negative P_e^max
            return Ok(LPResult {
                allocations: vec![0.0; k],
                alpha_final: 0.0,
                iterations: q,
                feasible: false,
                non_unique: false,
                generator_usage: vec![0.0; p_e_max.len()],
                binding_generators: vec![false; p_e_max.len()],
            });
        }
        q += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site(bus: u32, rating: f64) -> DataCenterSite {
        DataCenterSite {
            bus,
            rating_mw: rating,
            existing: false,
        }
    }

    #[test]
    fn compute_cap_binds_small_site() {
        let b = site_bounds(
            &[10.56, 9.18],
            &["G3".into(), "G4".into()],
            &[vec![0.1441], vec![0.2834]],
            &[site(9, 40.0)],
            None,
        )
        .unwrap();
        assert_eq!(b[0].p_dc_max, 10.0);
        assert_eq!(b[0].binding, Binding::ComputeCap);
    }

    #[test]
    fn ranking_and_threshold() {
        let gens = vec!["G".to_string()];
        let b = site_bounds(
            &[10.0],
            &gens,
            &[vec![1.0, 0.5, 0.5]],
            &[site(3, 1000.0), site(2, 1000.0), site(1, 1000.0)],
            None,
        )
        .unwrap();
        assert_eq!(b.iter().map(|s| s.bus).collect::<Vec<_>>(), vec![1, 2, 3]);
        let b = site_bounds(
            &[10.0],
            &gens,
            &[vec![1.0, 0.5, 0.5]],
            &[site(3, 1000.0), site(2, 1000.0), site(1, 1000.0)],
            Some(15.0),
        )
        .unwrap();
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn zero_factor_leaves_only_the_cap() {
        let b = site_bounds(&[1.0], &["G".into()], &[vec![0.0]], &[site(5, 100.0)], None).unwrap();
        assert_eq!(b[0].p_dc_max, 25.0);
        assert!(b[0].grid_bound.is_infinite());
    }

    #[test]
    fn empty_site_list_is_an_error() {
        assert!(site_bounds(&[1.0], &["G".into()], &[vec![]], &[], None).is_err());
    }

    #[test]
    fn single_site_unconstrained_by_generator() {
        let r = optimize_allocations(&[10.0], &[vec![0.5]], &[8.0], 0.05).unwrap();
        assert_eq!(r.alpha_final, 1.0);
        assert!((r.allocations[0] - 8.0).abs() < 1e-12);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn two_sites_one_generator_steps_down_to_point_six() {
        let r = optimize_allocations(&[10.0], &[vec![1.0, 1.0]], &[8.0, 8.0], 0.1).unwrap();
        assert!((r.alpha_final - 0.6).abs() < 1e-12);
        assert_eq!(r.iterations, 5);
        assert!((r.total() - 10.0).abs() < 1e-9);
        assert!(r.binding_generators[0]);
    }

    #[test]
    fn heavier_site_takes_the_shared_headroom() {
        let r = optimize_weighted_allocations(&[10.0], &[vec![1.0, 1.0]], &[8.0, 8.0], 0.1, &[1.0, 2.0])
            .unwrap();
        assert!((r.alpha_final - 0.6).abs() < 1e-12);
        assert!((r.allocations[0] - 4.8).abs() < 1e-9);
        assert!((r.allocations[1] - 5.2).abs() < 1e-9);
        assert!(!r.non_unique);
    }

    #[test]
    fn objective_weights_must_be_positive() {
        let bad = optimize_weighted_allocations(&[10.0], &[vec![1.0, 1.0]], &[8.0, 8.0], 0.1, &[1.0, 0.0]);
        assert!(bad.is_err());
    }

    #[test]
    fn beta_out_of_range() {
        assert!(optimize_allocations(&[1.0], &[vec![1.0]], &[1.0], 0.0).is_err());
        assert!(optimize_allocations(&[1.0], &[vec![1.0]], &[1.0], 1.0).is_err());
    }
}
