//! Branching-point rule used by production global solvers, and its excess
//! volume over the volume-optimal point.
//!
//! The rule projects `alpha * x_hat + (1 - alpha) * (a + b) / 2` onto the
//! middle of the interval, excluding the bottom and top `beta` fractions.

use std::fmt;

use serde::Serialize;

use crate::bounds::{OmegaBox, Var};
use crate::branching::optimal_point;
use crate::error::{Error, Result};
use crate::volume::{check_point, total_volume, volume_magnitude};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeuristicParams {
    pub alpha: f64,
    pub beta: f64,
    pub name: Option<&'static str>,
}

impl HeuristicParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let ok = (0.0..=1.0).contains(&alpha) && (0.0..=0.5).contains(&beta);
        if !ok {
            return Err(Error::InvalidParams { alpha, beta });
        }
        Ok(HeuristicParams {
            alpha,
            beta,
            name: None,
        })
    }

    /// `true` when `beta <= (1 - alpha) / 2`: the weighting alone already keeps
    /// the point out of the excluded fractions, so clipping never binds.
    pub fn clipping_inactive(&self) -> bool {
        self.beta <= (1.0 - self.alpha) / 2.0
    }
}

impl fmt::Display for HeuristicParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name {
            Some(n) => write!(f, "{n} (alpha={}, beta={})", self.alpha, self.beta),
            None => write!(f, "alpha={}, beta={}", self.alpha, self.beta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Solver {
    Scip,
    Antigone,
    Baron,
    Couenne,
}

impl Solver {
    pub const ALL: [Solver; 4] = [
        Solver::Scip,
        Solver::Antigone,
        Solver::Baron,
        Solver::Couenne,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Scip => "SCIP",
            Solver::Antigone => "ANTIGONE",
            Solver::Baron => "BARON",
            Solver::Couenne => "COUENNE",
        }
    }

    /// Default `(alpha, beta)`.
    pub fn params(self) -> HeuristicParams {
        let (alpha, beta) = match self {
            Solver::Scip => (1.00, 0.20),
            Solver::Antigone => (0.75, 0.10),
            Solver::Baron => (0.70, 0.01),
            Solver::Couenne => (0.25, 0.20),
        };
        HeuristicParams {
            alpha,
            beta,
            name: Some(self.name()),
        }
    }

    /// Case-insensitive lookup.
    pub fn from_name(name: &str) -> Option<Solver> {
        Solver::ALL
            .into_iter()
            .find(|s| s.name().eq_ignore_ascii_case(name))
    }
}

/// The four solver defaults.
pub fn solver_profiles() -> [HeuristicParams; 4] {
    Solver::ALL.map(Solver::params)
}

/// Branching point chosen by the weighted-midpoint rule on `[a, b]`.
pub fn heuristic_point(p: &HeuristicParams, a: f64, b: f64, x_hat: f64) -> Result<f64> {
    let checked = HeuristicParams::new(p.alpha, p.beta)?;
    if a.partial_cmp(&b) != Some(std::cmp::Ordering::Less) || !(a..=b).contains(&x_hat) {
        return Err(Error::BranchPointOutOfRange {
            point: x_hat,
            lower: a,
            upper: b,
        });
    }
    let width = b - a;
    let weighted = checked.alpha * x_hat + (1.0 - checked.alpha) * 0.5 * (a + b);
    let lo = a + checked.beta * width;
    let hi = b - checked.beta * width;
    Ok(weighted.clamp(lo, hi).clamp(a, b))
}

/// Excess total volume of branching `var` (Ω label) at `point` over the
/// optimal point for that variable.
pub fn regret(ob: &OmegaBox, var: Var, point: f64) -> Result<f64> {
    check_point(ob, var, point)?;
    let best = optimal_point(ob, var);
    if point == best.point {
        return Ok(0.0);
    }
    let diff = total_volume(ob, var, point)? - best.child_volumes.total;
    // rounding in a flat neighbourhood of the minimum can go slightly negative
    let noise = 32.0 * f64::EPSILON * volume_magnitude(ob.lower(), ob.upper());
    debug_assert!(diff >= -noise, "negative regret {diff}");
    Ok(if diff < 0.0 && diff >= -noise {
        0.0
    } else {
        diff
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{normalize, RawBox};

    #[test]
    fn scip_clips_to_middle_sixty_percent() {
        let scip = Solver::Scip.params();
        assert!((heuristic_point(&scip, 0.0, 1.0, 0.05).unwrap() - 0.2).abs() < 1e-15);
        assert!((heuristic_point(&scip, 0.0, 1.0, 0.95).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(heuristic_point(&scip, 0.0, 1.0, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn pure_midpoint() {
        let p = HeuristicParams::new(0.0, 0.5).unwrap();
        for x in [0.0, 0.1, 0.9, 1.0] {
            assert_eq!(heuristic_point(&p, 0.0, 1.0, x).unwrap(), 0.5);
        }
    }

    #[test]
    fn baron_is_unclipped() {
        let baron = Solver::Baron.params();
        let got = heuristic_point(&baron, 0.0, 1.0, 0.9).unwrap();
        assert!((got - 0.78).abs() < 1e-15);
    }

    #[test]
    fn table_values() {
        let t = solver_profiles();
        assert_eq!((t[0].alpha, t[0].beta), (1.00, 0.20));
        assert_eq!((t[1].alpha, t[1].beta), (0.75, 0.10));
        assert_eq!((t[2].alpha, t[2].beta), (0.70, 0.01));
        assert_eq!((t[3].alpha, t[3].beta), (0.25, 0.20));
        let inactive: Vec<bool> = t.iter().map(HeuristicParams::clipping_inactive).collect();
        assert_eq!(inactive, vec![false, true, true, true]);
        assert_eq!(Solver::from_name("baron"), Some(Solver::Baron));
        assert_eq!(Solver::from_name("ooOPS"), None);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(HeuristicParams::new(1.1, 0.1).is_err());
        assert!(HeuristicParams::new(0.5, 0.6).is_err());
        assert!(HeuristicParams::new(f64::NAN, 0.1).is_err());
        let bad = HeuristicParams {
            alpha: -0.1,
            beta: 0.0,
            name: None,
        };
        assert!(matches!(
            heuristic_point(&bad, 0.0, 1.0, 0.5),
            Err(Error::InvalidParams { .. })
        ));
    }

    #[test]
    fn regret_examples() {
        let o = normalize(&RawBox::new([0.0; 3], [1.0; 3]).unwrap());
        assert_eq!(regret(&o, Var::X1, 0.5).unwrap(), 0.0);
        let r = regret(&o, Var::X1, 0.3).unwrap();
        let want =
            total_volume(&o, Var::X1, 0.3).unwrap() - total_volume(&o, Var::X1, 0.5).unwrap();
        assert!(r > 0.0);
        assert_eq!(r, want);
        assert!(regret(&o, Var::X1, 1.2).is_err());
    }
}
