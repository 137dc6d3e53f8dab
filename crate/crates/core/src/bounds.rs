//! Box domains for `f = x1 x2 x3`, the Ω relabeling and the case split used
//! when branching on the first variable.
//!
//! Every formula in this crate is stated for bounds labeled so that
//! `a1/b1 <= a2/b2 <= a3/b3`. [`normalize`] produces that labeling and keeps
//! the permutation, so results can always be reported in the caller's labels.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for ordering and case comparisons.
pub const REL_TOL: f64 = 1e-12;

/// `x <= y` up to [`REL_TOL`].
pub(crate) fn le_tol(x: f64, y: f64) -> bool {
    x <= y + REL_TOL * x.abs().max(y.abs())
}

/// One of the three variables of the monomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Var {
    X1,
    X2,
    X3,
}

impl Var {
    pub const ALL: [Var; 3] = [Var::X1, Var::X2, Var::X3];

    pub fn index(self) -> usize {
        self as usize
    }

    /// 1-based label.
    pub fn label(self) -> usize {
        self as usize + 1
    }

    pub fn from_index(index: usize) -> Option<Var> {
        Var::ALL.get(index).copied()
    }

    pub fn from_label(label: usize) -> Option<Var> {
        label.checked_sub(1).and_then(Var::from_index)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.label())
    }
}

/// User-supplied bounds `a_i < b_i`, in the caller's labeling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawBox {
    a: [f64; 3],
    b: [f64; 3],
}

impl RawBox {
    pub fn new(a: [f64; 3], b: [f64; 3]) -> Result<Self> {
        for i in 0..3 {
            let ok = a[i].is_finite() && b[i].is_finite() && a[i] >= 0.0 && a[i] < b[i];
            if !ok {
                return Err(Error::InvalidBounds {
                    label: i + 1,
                    lower: a[i],
                    upper: b[i],
                });
            }
        }
        Ok(RawBox { a, b })
    }

    pub fn lower(&self) -> [f64; 3] {
        self.a
    }

    pub fn upper(&self) -> [f64; 3] {
        self.b
    }
}

/// Bounds relabeled to satisfy Ω.
///
/// `perm[k]` is the caller's label of Ω-variable `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OmegaBox {
    a: [f64; 3],
    b: [f64; 3],
    perm: [Var; 3],
}

impl OmegaBox {
    pub fn lower(&self) -> [f64; 3] {
        self.a
    }

    pub fn upper(&self) -> [f64; 3] {
        self.b
    }

    pub fn a(&self, v: Var) -> f64 {
        self.a[v.index()]
    }

    pub fn b(&self, v: Var) -> f64 {
        self.b[v.index()]
    }

    pub fn width(&self, v: Var) -> f64 {
        self.b[v.index()] - self.a[v.index()]
    }

    pub fn midpoint(&self, v: Var) -> f64 {
        0.5 * (self.a[v.index()] + self.b[v.index()])
    }

    pub fn perm(&self) -> [Var; 3] {
        self.perm
    }

    /// Caller's label of Ω-variable `v`.
    pub fn original(&self, v: Var) -> Var {
        self.perm[v.index()]
    }

    /// Ω-label of the caller's variable `orig`.
    pub fn omega_label(&self, orig: Var) -> Var {
        let k = self
            .perm
            .iter()
            .position(|&p| p == orig)
            .expect("perm is a bijection");
        Var::ALL[k]
    }

    /// The box in the caller's labeling.
    pub fn to_raw(&self) -> RawBox {
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        for k in 0..3 {
            let orig = self.perm[k].index();
            a[orig] = self.a[k];
            b[orig] = self.b[k];
        }
        RawBox { a, b }
    }

    /// `a1 b2 / a2`: where the left child's labeling changes when branching on
    /// x1. Undefined when `a2 = 0`.
    pub fn left_breakpoint(&self) -> Option<f64> {
        let [a1, a2, _] = self.a;
        let b2 = self.b[1];
        (a2 > 0.0).then(|| a1 * b2 / a2)
    }

    /// `b1 a2 / b2`: where the right child's labeling changes when branching
    /// on x1.
    pub fn right_breakpoint(&self) -> f64 {
        self.b[0] * self.a[1] / self.b[1]
    }

    /// `a_i b_j b_k + b_i a_j a_k` for each label.
    pub fn product_order_values(&self) -> [f64; 3] {
        product_order_values(&self.a, &self.b)
    }
}

pub(crate) fn product_order_values(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[0] * b[1] * b[2] + b[0] * a[1] * a[2],
        a[1] * b[0] * b[2] + b[1] * a[0] * a[2],
        a[2] * b[0] * b[1] + b[2] * a[0] * a[1],
    ]
}

/// `a_i/b_i < a_j/b_j` beyond tolerance, compared without division.
fn ratio_less(a: &[f64; 3], b: &[f64; 3], i: usize, j: usize) -> bool {
    let lhs = a[i] * b[j];
    let rhs = a[j] * b[i];
    lhs < rhs && !le_tol(rhs, lhs)
}

/// Relabel so that Ω holds. Ties keep the caller's order.
pub fn normalize(raw: &RawBox) -> OmegaBox {
    let mut order = [0usize, 1, 2];
    // insertion sort: stable, and three elements
    for i in 1..3 {
        let mut j = i;
        while j > 0 && ratio_less(&raw.a, &raw.b, order[j], order[j - 1]) {
            order.swap(j, j - 1);
            j -= 1;
        }
    }
    OmegaBox {
        a: order.map(|k| raw.a[k]),
        b: order.map(|k| raw.b[k]),
        perm: order.map(|k| Var::ALL[k]),
    }
}

/// Ω in product form: `O_1 <= O_2 <= O_3`.
pub fn satisfies_omega_products(a: &[f64; 3], b: &[f64; 3]) -> bool {
    let o = product_order_values(a, b);
    le_tol(o[0], o[1]) && le_tol(o[1], o[2])
}

/// Ω in ratio form: `a1/b1 <= a2/b2 <= a3/b3`.
pub fn satisfies_omega_ratios(a: &[f64; 3], b: &[f64; 3]) -> bool {
    let r = [a[0] / b[0], a[1] / b[1], a[2] / b[2]];
    le_tol(r[0], r[1]) && le_tol(r[1], r[2])
}

/// Which relabelings occur as the x1 branching point sweeps `[a1, b1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseId {
    /// `a2 = 0` (hence `a1 = 0`).
    Case0,
    /// `b1 a2 / b2 <= a1 b2 / a2`.
    Case1,
    /// `b1 a2 / b2 > a1 b2 / a2`.
    Case2,
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseId::Case0 => "Case0",
            CaseId::Case1 => "Case1",
            CaseId::Case2 => "Case2",
        };
        f.write_str(s)
    }
}

pub fn classify_case(ob: &OmegaBox) -> CaseId {
    let [a1, a2, _] = ob.a;
    let [b1, b2, _] = ob.b;
    if a2 == 0.0 {
        return CaseId::Case0;
    }
    // b1 a2 / b2 <= a1 b2 / a2  <=>  b1 a2^2 <= a1 b2^2
    if le_tol(b1 * a2 * a2, a1 * b2 * b2) {
        CaseId::Case1
    } else {
        CaseId::Case2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ob(a: [f64; 3], b: [f64; 3]) -> OmegaBox {
        normalize(&RawBox::new(a, b).unwrap())
    }

    #[test]
    fn already_ordered_box_keeps_labels() {
        let o = ob([1.0, 2.0, 12.0], [35.0, 12.0, 35.0]);
        assert_eq!(o.perm(), [Var::X1, Var::X2, Var::X3]);
        assert_eq!(o.lower(), [1.0, 2.0, 12.0]);
    }

    #[test]
    fn reversed_box_swaps_first_and_third() {
        let o = ob([12.0, 2.0, 1.0], [35.0, 12.0, 35.0]);
        assert_eq!(o.perm(), [Var::X3, Var::X2, Var::X1]);
        assert_eq!(o.lower(), [1.0, 2.0, 12.0]);
        assert_eq!(o.upper(), [35.0, 12.0, 35.0]);
        assert_eq!(o.omega_label(Var::X1), Var::X3);
        assert_eq!(
            o.to_raw(),
            RawBox::new([12.0, 2.0, 1.0], [35.0, 12.0, 35.0]).unwrap()
        );
    }

    #[test]
    fn degenerate_and_bad_intervals_rejected() {
        assert!(matches!(
            RawBox::new([0.0, 0.0, 0.0], [1.0, 1.0, 0.0]),
            Err(Error::InvalidBounds { label: 3, .. })
        ));
        assert!(RawBox::new([-1.0, 0.0, 0.0], [1.0, 1.0, 1.0]).is_err());
        assert!(RawBox::new([0.0, 2.0, 0.0], [1.0, 1.0, 1.0]).is_err());
        assert!(RawBox::new([0.0, 0.0, f64::NAN], [1.0, 1.0, 1.0]).is_err());
        assert!(RawBox::new([0.0, 0.0, 0.0], [1.0, f64::INFINITY, 1.0]).is_err());
    }

    #[test]
    fn ties_are_stable() {
        let o = ob([1.0, 1.0, 2.0], [13.0, 2.0, 4.0]);
        assert_eq!(o.perm(), [Var::X1, Var::X2, Var::X3]);
        let o = ob([2.0, 1.0, 1.0], [4.0, 13.0, 2.0]);
        assert_eq!(o.perm(), [Var::X2, Var::X1, Var::X3]);
    }

    #[test]
    fn case_examples() {
        assert_eq!(classify_case(&ob([0.0; 3], [1.0; 3])), CaseId::Case0);
        assert_eq!(
            classify_case(&ob([1.0, 2.0, 12.0], [35.0, 12.0, 35.0])),
            CaseId::Case1
        );
        assert_eq!(
            classify_case(&ob([1.0, 1.0, 2.0], [13.0, 2.0, 4.0])),
            CaseId::Case2
        );
    }

    #[test]
    fn breakpoint_equality_is_case1() {
        // b1 a2^2 = a1 b2^2 with a = (1, 2, 3), b = (4, 4, 4)
        let o = ob([1.0, 2.0, 3.0], [4.0, 4.0, 4.0]);
        assert_eq!(o.left_breakpoint(), Some(2.0));
        assert_eq!(o.right_breakpoint(), 2.0);
        assert_eq!(classify_case(&o), CaseId::Case1);
    }

    #[test]
    fn labels_round_trip() {
        for v in Var::ALL {
            assert_eq!(Var::from_label(v.label()), Some(v));
        }
        assert_eq!(Var::from_label(0), None);
        assert_eq!(Var::from_label(4), None);
    }
}
