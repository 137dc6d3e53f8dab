//! Volume-optimal branching point and branching variable.
//!
//! For x2 and x3 the total child volume is a single convex quadratic with its
//! minimum at the interval midpoint. For x1 it is a continuous, globally convex
//! piecewise quadratic; [`optimal_point_x1`] picks the minimizer from the
//! unconstrained piece minimizers `q1 >= q2 >= q3` and the two breakpoints.

use std::fmt;

use serde::Serialize;

use crate::bounds::{classify_case, le_tol, CaseId, OmegaBox, Var};
use crate::error::{Error, Result};
use crate::pieces::{piece_at, Piece};
use crate::volume::{child_volumes, hull_volume, total_volume, ChildVolumes};

/// Unconstrained minimizers of the x1 pieces: `q1` of V1, `q2` of V2 and V4
/// (the midpoint), `q3` of V3.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QPoints {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

pub fn q_points(ob: &OmegaBox) -> QPoints {
    let [a1, a2, a3] = ob.lower();
    let [b1, b2, b3] = ob.upper();
    let q1_num = 3.0 * a1 * a2 * a3 + a1 * a2 * b3 - a1 * b2 * a3 - 3.0 * a1 * b2 * b3
        + 4.0 * b1 * a2 * a3
        - 4.0 * b1 * b2 * b3;
    let q1_den = 2.0 * (3.0 * a2 * a3 + a2 * b3 - 4.0 * b2 * b3);
    let q3_num = 4.0 * a1 * a2 * a3 - 4.0 * a1 * b2 * b3 + 3.0 * b1 * a2 * a3 + b1 * a2 * b3
        - b1 * b2 * a3
        - 3.0 * b1 * b2 * b3;
    let q3_den = 2.0 * (4.0 * a2 * a3 - b2 * a3 - 3.0 * b2 * b3);
    // Both denominators are < 0 whenever b2 > a2 >= 0 and b3 > a3 >= 0.
    debug_assert!(q1_den < 0.0 && q3_den < 0.0);
    QPoints {
        q1: q1_num / q1_den,
        q2: 0.5 * (a1 + b1),
        q3: q3_num / q3_den,
    }
}

/// Which formula produced a branching point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Candidate {
    Q1,
    Q2Midpoint,
    Q3,
    /// `a1 b2 / a2`
    RatioLeft,
    /// `b1 a2 / b2`
    RatioRight,
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Candidate::Q1 => "Q1",
            Candidate::Q2Midpoint => "Q2_midpoint",
            Candidate::Q3 => "Q3",
            Candidate::RatioLeft => "RatioLeft",
            Candidate::RatioRight => "RatioRight",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchDecision {
    /// Caller's label.
    pub variable: Var,
    /// Ω label.
    pub omega_variable: Var,
    pub point: f64,
    pub candidate: Candidate,
    pub child_volumes: ChildVolumes,
}

fn decision(ob: &OmegaBox, var: Var, point: f64, candidate: Candidate) -> BranchDecision {
    let child_volumes = child_volumes(ob, var, point).expect("candidate lies in the interval");
    BranchDecision {
        variable: ob.original(var),
        omega_variable: var,
        point,
        candidate,
        child_volumes,
    }
}

fn in_closed(x: f64, lo: f64, hi: f64) -> bool {
    le_tol(lo, x) && le_tol(x, hi)
}

/// The point in `[a1, b1]` minimizing the total child volume for x1.
pub fn optimal_point_x1(ob: &OmegaBox) -> BranchDecision {
    let q = q_points(ob);
    let right = ob.right_breakpoint();
    let (point, candidate) = match (classify_case(ob), ob.left_breakpoint()) {
        (CaseId::Case0, _) | (_, None) => (q.q2, Candidate::Q2Midpoint),
        (CaseId::Case1, Some(left)) => {
            if le_tol(left, q.q3) {
                (q.q3, Candidate::Q3)
            } else if in_closed(q.q2, right, left) {
                (q.q2, Candidate::Q2Midpoint)
            } else {
                (left, Candidate::RatioLeft)
            }
        }
        (CaseId::Case2, Some(left)) => {
            if le_tol(right, q.q3) {
                (q.q3, Candidate::Q3)
            } else if in_closed(q.q2, left, right) {
                (q.q2, Candidate::Q2Midpoint)
            } else {
                (right, Candidate::RatioRight)
            }
        }
    };
    let point = point.clamp(ob.a(Var::X1), ob.b(Var::X1));
    decision(ob, Var::X1, point, candidate)
}

/// Midpoint branching for Ω-variables x2 and x3.
pub fn optimal_point_x23(ob: &OmegaBox, var: Var) -> Result<BranchDecision> {
    if var == Var::X1 {
        return Err(Error::BadVariable(var.label()));
    }
    Ok(decision(ob, var, ob.midpoint(var), Candidate::Q2Midpoint))
}

/// Optimal decision for any Ω-variable.
pub fn optimal_point(ob: &OmegaBox, var: Var) -> BranchDecision {
    match var {
        Var::X1 => optimal_point_x1(ob),
        _ => optimal_point_x23(ob, var).expect("x2 or x3"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariableRanking {
    /// Ascending by total child volume. Ties keep Ω order.
    pub entries: Vec<BranchDecision>,
}

impl VariableRanking {
    pub fn best(&self) -> &BranchDecision {
        &self.entries[0]
    }
}

pub fn rank_variables(ob: &OmegaBox) -> VariableRanking {
    let mut entries: Vec<BranchDecision> = Var::ALL.iter().map(|&v| optimal_point(ob, v)).collect();
    entries.sort_by(|x, y| x.child_volumes.total.total_cmp(&y.child_volumes.total));
    debug_assert!({
        let t: Vec<f64> = Var::ALL
            .iter()
            .map(|&v| optimal_point(ob, v).child_volumes.total)
            .collect();
        let slack = 1e-9 * hull_volume(ob);
        t[0] <= t[1] + slack && t[1] <= t[2] + slack
    });
    VariableRanking { entries }
}

/// Fraction of `[a1, b1]` within which the optimal x1 point must fall.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FractionBounds {
    pub lower: f64,
    pub upper: f64,
}

pub fn minimizer_fraction_bounds(ob: &OmegaBox) -> FractionBounds {
    let [a1, a2, _] = ob.lower();
    let [b1, b2, _] = ob.upper();
    let lower = if a2 == 0.0 {
        0.5
    } else {
        let from_left = a1 * (b2 - a2) / (a2 * (b1 - a1));
        let from_right = (b1 * a2 - a1 * b2) / (b1 * b2 - a1 * b2);
        from_left.max(from_right).min(0.5)
    };
    FractionBounds { lower, upper: 0.5 }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub c: f64,
    pub total_volume: f64,
    /// Active x1 piece; `None` for x2 and x3.
    pub piece: Option<Piece>,
}

/// Interior x1 breakpoints, ascending.
pub fn interior_breakpoints(ob: &OmegaBox) -> Vec<f64> {
    let (lo, hi) = (ob.a(Var::X1), ob.b(Var::X1));
    let mut out: Vec<f64> = [ob.left_breakpoint(), Some(ob.right_breakpoint())]
        .into_iter()
        .flatten()
        .filter(|&c| c > lo && c < hi)
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// `n_samples` evenly spaced points over `[a_var, b_var]` (inclusive) with
/// their total volume. For x1, interior breakpoints are added.
pub fn tv_profile(ob: &OmegaBox, var: Var, n_samples: usize) -> Result<Vec<ProfilePoint>> {
    if n_samples < 2 {
        return Err(Error::BadGrid(n_samples));
    }
    let (lo, hi) = (ob.a(var), ob.b(var));
    let mut cs: Vec<f64> = (0..n_samples)
        .map(|i| {
            if i + 1 == n_samples {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n_samples - 1) as f64
            }
        })
        .collect();
    if var == Var::X1 {
        cs.extend(interior_breakpoints(ob));
        cs.sort_by(f64::total_cmp);
        cs.dedup();
    }
    cs.into_iter()
        .map(|c| {
            Ok(ProfilePoint {
                c,
                total_volume: total_volume(ob, var, c)?,
                piece: (var == Var::X1).then(|| piece_at(ob, c)),
            })
        })
        .collect()
}

/// Minimize a convex function on `[lo, hi]` by golden-section search until the
/// bracket is narrower than `tol`. Returns `(argmin, min)`.
///
/// Intended for weighted sums of total-volume curves, which stay convex.
pub fn argmin_convex<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
    let tol = tol.max(f64::EPSILON * lo.abs().max(hi.abs()));
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{normalize, RawBox};

    fn ob(a: [f64; 3], b: [f64; 3]) -> OmegaBox {
        normalize(&RawBox::new(a, b).unwrap())
    }

    #[test]
    fn q_points_of_first_example() {
        let q = q_points(&ob([1.0, 2.0, 12.0], [35.0, 12.0, 35.0]));
        assert_eq!(q.q2, 18.0);
        assert!((q.q3 - 45754.0 / 2616.0).abs() < 1e-12);
        assert!(q.q1 >= q.q2 && q.q2 >= q.q3);
    }

    #[test]
    fn q_points_coincide_on_unit_box() {
        let q = q_points(&ob([0.0; 3], [1.0; 3]));
        assert_eq!((q.q1, q.q2, q.q3), (0.5, 0.5, 0.5));
    }

    #[test]
    fn midpoint_formula() {
        let q = q_points(&ob([1.0, 2.0, 12.0], [34.0, 36.0, 35.0]));
        assert_eq!(q.q2, 17.5);
    }

    #[test]
    fn procedure_examples() {
        let cases: [([f64; 3], [f64; 3], Candidate, f64); 5] = [
            (
                [1.0, 2.0, 12.0],
                [35.0, 12.0, 35.0],
                Candidate::Q3,
                45754.0 / 2616.0,
            ),
            (
                [1.0, 2.0, 12.0],
                [34.0, 36.0, 35.0],
                Candidate::Q2Midpoint,
                17.5,
            ),
            ([1.0, 5.0, 1.0], [8.0, 22.0, 4.0], Candidate::RatioLeft, 4.4),
            (
                [1.0, 1.0, 2.0],
                [13.0, 2.0, 4.0],
                Candidate::RatioRight,
                6.5,
            ),
            ([0.0; 3], [1.0; 3], Candidate::Q2Midpoint, 0.5),
        ];
        for (a, b, cand, point) in cases {
            let d = optimal_point_x1(&ob(a, b));
            assert_eq!(d.candidate, cand, "{a:?} {b:?}");
            assert!((d.point - point).abs() < 1e-9, "{a:?} {b:?}: {}", d.point);
        }
    }

    #[test]
    fn x23_midpoints() {
        let o = ob([1.0, 2.0, 12.0], [35.0, 12.0, 35.0]);
        assert_eq!(optimal_point_x23(&o, Var::X2).unwrap().point, 7.0);
        assert_eq!(optimal_point_x23(&o, Var::X3).unwrap().point, 23.5);
        assert!(matches!(
            optimal_point_x23(&o, Var::X1),
            Err(Error::BadVariable(1))
        ));
        let unit = ob([0.0; 3], [1.0; 3]);
        assert_eq!(optimal_point_x23(&unit, Var::X2).unwrap().point, 0.5);
    }

    #[test]
    fn decision_reports_original_label() {
        let d = optimal_point_x1(&ob([12.0, 2.0, 1.0], [35.0, 12.0, 35.0]));
        assert_eq!(d.variable, Var::X3);
        assert_eq!(d.omega_variable, Var::X1);
    }

    #[test]
    fn ranking_on_unit_box_is_a_tie() {
        let r = rank_variables(&ob([0.0; 3], [1.0; 3]));
        for e in &r.entries {
            assert!((e.child_volumes.total - 3.5 / 24.0).abs() < 1e-15);
        }
        assert_eq!(r.best().variable, Var::X1);
        assert_eq!(r.best().point, 0.5);
    }

    #[test]
    fn ranking_strict_on_first_example() {
        let r = rank_variables(&ob([1.0, 2.0, 12.0], [35.0, 12.0, 35.0]));
        let labels: Vec<Var> = r.entries.iter().map(|e| e.omega_variable).collect();
        assert_eq!(labels, vec![Var::X1, Var::X2, Var::X3]);
        let t: Vec<f64> = r.entries.iter().map(|e| e.child_volumes.total).collect();
        assert!(t[0] < t[1] && t[1] < t[2]);
    }

    #[test]
    fn equal_x2_x3_ratios_tie() {
        // b2 a3 = a2 b3
        let o = ob([1.0, 1.0, 2.0], [13.0, 2.0, 4.0]);
        let t2 = optimal_point(&o, Var::X2).child_volumes.total;
        let t3 = optimal_point(&o, Var::X3).child_volumes.total;
        assert!((t2 - t3).abs() <= 1e-13 * t2);
    }

    #[test]
    fn fraction_bounds() {
        let unit = minimizer_fraction_bounds(&ob([0.0; 3], [1.0; 3]));
        assert_eq!((unit.lower, unit.upper), (0.5, 0.5));
        let fb = minimizer_fraction_bounds(&ob([1.0, 2.0, 12.0], [35.0, 12.0, 35.0]));
        assert!((fb.lower - 10.0 / 68.0).abs() < 1e-15);
    }

    #[test]
    fn fraction_bound_degrades_with_small_a2() {
        for eps in [1e-1, 1e-3, 1e-6] {
            let fb = minimizer_fraction_bounds(&ob([0.0, eps, 0.5], [1.0, 1.0, 1.0]));
            assert!((fb.lower - eps).abs() < 1e-15, "{eps}: {}", fb.lower);
        }
    }

    #[test]
    fn unit_profile() {
        let p = tv_profile(&ob([0.0; 3], [1.0; 3]), Var::X1, 3).unwrap();
        let got: Vec<(f64, f64)> = p.iter().map(|p| (p.c, p.total_volume)).collect();
        let want = [(0.0, 5.0 / 24.0), (0.5, 3.5 / 24.0), (1.0, 5.0 / 24.0)];
        assert_eq!(got.len(), 3);
        for (g, w) in got.iter().zip(want) {
            assert_eq!(g.0, w.0);
            assert!((g.1 - w.1).abs() < 1e-15);
        }
        assert!(tv_profile(&ob([0.0; 3], [1.0; 3]), Var::X1, 1).is_err());
    }

    #[test]
    fn profile_includes_breakpoints() {
        let o = ob([1.0, 2.0, 12.0], [35.0, 12.0, 35.0]);
        let p = tv_profile(&o, Var::X1, 11).unwrap();
        assert_eq!(p.len(), 13);
        assert!(p.iter().any(|p| p.c == 35.0 * 2.0 / 12.0));
        assert!(p.iter().any(|p| p.c == 6.0));
        let whole = hull_volume(&o);
        assert_eq!(p.first().unwrap().total_volume, whole);
        assert_eq!(p.last().unwrap().total_volume, whole);
        let p2 = tv_profile(&o, Var::X2, 11).unwrap();
        assert_eq!(p2.len(), 11);
        assert!(p2.iter().all(|p| p.piece.is_none()));
    }

    #[test]
    fn golden_section_finds_quadratic_minimum() {
        let (x, fx) = argmin_convex(|x| (x - 0.3).powi(2) + 1.0, 0.0, 1.0, 1e-10);
        // comparisons resolve x only to about sqrt(eps)
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-15);
    }

    #[test]
    fn golden_section_on_total_volume_agrees_with_procedure() {
        let o = ob([1.0, 1.0, 2.0], [13.0, 2.0, 4.0]);
        let (x, _) = argmin_convex(|c| total_volume(&o, Var::X1, c).unwrap(), 1.0, 13.0, 1e-9);
        assert!((x - 6.5).abs() < 1e-6);
    }
}
