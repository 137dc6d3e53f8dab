//! 4-D volume of the convex hull of the graph of `x1 x2 x3` over a box, and
//! the total child volume after splitting one variable's interval.

use serde::Serialize;

use crate::bounds::{normalize, OmegaBox, RawBox, Var};
use crate::error::{Error, Result};

/// Hull volume with lower bounds `l` and upper bounds `u`, valid when the
/// labeling satisfies Ω. Labels 2 and 3 enter symmetrically.
pub fn volume_formula(l: [f64; 3], u: [f64; 3]) -> f64 {
    let [l1, l2, l3] = l;
    let [u1, u2, u3] = u;
    let widths = (u1 - l1) * (u2 - l2) * (u3 - l3);
    let upper_part = u1 * (5.0 * u2 * u3 - l2 * u3 - u2 * l3 - 3.0 * l2 * l3);
    let lower_part = l1 * (5.0 * l2 * l3 - u2 * l3 - l2 * u3 - 3.0 * u2 * u3);
    widths * (upper_part + lower_part) / 24.0
}

pub fn hull_volume(ob: &OmegaBox) -> f64 {
    volume_formula(ob.lower(), ob.upper())
}

/// [`volume_formula`] with every term taken in absolute value. The bracket
/// cancels heavily on thin boxes, so rounding error scales with this rather
/// than with the volume itself.
pub fn volume_magnitude(l: [f64; 3], u: [f64; 3]) -> f64 {
    let [l1, l2, l3] = l;
    let [u1, u2, u3] = u;
    let widths = (u1 - l1) * (u2 - l2) * (u3 - l3);
    let upper_part = u1 * (5.0 * u2 * u3 + l2 * u3 + u2 * l3 + 3.0 * l2 * l3);
    let lower_part = l1 * (5.0 * l2 * l3 + u2 * l3 + l2 * u3 + 3.0 * u2 * u3);
    widths.abs() * (upper_part + lower_part) / 24.0
}

/// Volume of an arbitrary (possibly zero-width) box in any labeling.
fn sub_box_volume(a: [f64; 3], b: [f64; 3]) -> f64 {
    if (0..3).any(|i| b[i] <= a[i]) {
        return 0.0;
    }
    let raw = RawBox::new(a, b).expect("child of a valid box is valid");
    hull_volume(&normalize(&raw))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChildVolumes {
    pub left: f64,
    pub right: f64,
    pub total: f64,
}

pub(crate) fn check_point(ob: &OmegaBox, var: Var, c: f64) -> Result<()> {
    let (lo, hi) = (ob.a(var), ob.b(var));
    if (lo..=hi).contains(&c) {
        Ok(())
    } else {
        Err(Error::BranchPointOutOfRange {
            point: c,
            lower: lo,
            upper: hi,
        })
    }
}

/// Hull volumes of the two children `x_var <= c` and `x_var >= c`, each
/// relabeled to satisfy Ω before evaluation.
pub fn child_volumes(ob: &OmegaBox, var: Var, c: f64) -> Result<ChildVolumes> {
    check_point(ob, var, c)?;
    let k = var.index();
    let mut left_upper = ob.upper();
    left_upper[k] = c;
    let mut right_lower = ob.lower();
    right_lower[k] = c;
    let left = sub_box_volume(ob.lower(), left_upper);
    let right = sub_box_volume(right_lower, ob.upper());
    Ok(ChildVolumes {
        left,
        right,
        total: left + right,
    })
}

pub fn total_volume(ob: &OmegaBox, var: Var, c: f64) -> Result<f64> {
    child_volumes(ob, var, c).map(|cv| cv.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::RawBox;

    fn ob(a: [f64; 3], b: [f64; 3]) -> OmegaBox {
        normalize(&RawBox::new(a, b).unwrap())
    }

    fn close(x: f64, y: f64, rel: f64) -> bool {
        (x - y).abs() <= rel * y.abs().max(1e-300)
    }

    #[test]
    fn closed_form_values() {
        assert!(close(
            hull_volume(&ob([0.0; 3], [1.0; 3])),
            5.0 / 24.0,
            1e-15
        ));
        assert!(close(hull_volume(&ob([1.0; 3], [2.0; 3])), 0.625, 1e-15));
        assert!(close(
            hull_volume(&ob([0.0; 3], [2.0, 1.0, 1.0])),
            5.0 / 6.0,
            1e-15
        ));
    }

    #[test]
    fn endpoints_are_no_branch() {
        let o = ob([1.0, 2.0, 12.0], [35.0, 12.0, 35.0]);
        let whole = hull_volume(&o);
        let at_lower = child_volumes(&o, Var::X1, 1.0).unwrap();
        assert_eq!(at_lower.left, 0.0);
        assert_eq!(at_lower.right, whole);
        let at_upper = child_volumes(&o, Var::X1, 35.0).unwrap();
        assert_eq!(at_upper.right, 0.0);
        assert_eq!(at_upper.left, whole);
    }

    #[test]
    fn unit_box_split_in_half() {
        let o = ob([0.0; 3], [1.0; 3]);
        let cv = child_volumes(&o, Var::X1, 0.5).unwrap();
        assert!(close(cv.left, 1.25 / 24.0, 1e-14));
        // the right child [0.5, 1] x [0, 1]^2 relabels with x2 leading
        assert!(close(cv.right, 2.25 / 24.0, 1e-14));
        assert!(close(cv.total, 3.5 / 24.0, 1e-14));
    }

    #[test]
    fn out_of_range_point_rejected() {
        let o = ob([0.0; 3], [1.0; 3]);
        assert!(matches!(
            total_volume(&o, Var::X2, 1.5),
            Err(Error::BranchPointOutOfRange { .. })
        ));
        assert!(total_volume(&o, Var::X2, f64::NAN).is_err());
    }

    #[test]
    fn labels_two_and_three_are_interchangeable() {
        let v = volume_formula([1.0, 2.0, 12.0], [35.0, 12.0, 35.0]);
        let w = volume_formula([1.0, 12.0, 2.0], [35.0, 35.0, 12.0]);
        assert!(close(v, w, 1e-14));
    }
}
