//! Closed-form quadratic pieces of the total volume when branching on x1.
//!
//! Each piece fixes which variable leads the Ω labeling in each child:
//!
//! | piece | left child `[a1, c]` | right child `[c, b1]` |
//! |-------|----------------------|-----------------------|
//! | V1    | x2 leads             | x1 leads              |
//! | V2    | x2 leads             | x2 leads              |
//! | V3    | x1 leads             | x2 leads              |
//! | V4    | x1 leads             | x1 leads              |
//!
//! These are used to cross-check the relabel-then-evaluate path in
//! [`crate::volume`], never as the primary evaluation.

use std::fmt;

use serde::Serialize;

use crate::bounds::{classify_case, CaseId, OmegaBox};
use crate::volume::volume_formula;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Piece {
    V1,
    V2,
    V3,
    V4,
}

impl Piece {
    pub const ALL: [Piece; 4] = [Piece::V1, Piece::V2, Piece::V3, Piece::V4];
}

impl fmt::Display for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Piece::V1 => "V1",
            Piece::V2 => "V2",
            Piece::V3 => "V3",
            Piece::V4 => "V4",
        };
        f.write_str(s)
    }
}

/// The x1 pieces of one Ω box, evaluated as unconstrained quadratics in `c`.
#[derive(Clone, Copy, Debug)]
pub struct X1Pieces {
    a: [f64; 3],
    b: [f64; 3],
}

impl X1Pieces {
    pub fn new(ob: &OmegaBox) -> Self {
        X1Pieces {
            a: ob.lower(),
            b: ob.upper(),
        }
    }

    /// V with the x1 interval replaced by `[lo, hi]`, x2 placed first.
    fn x2_leads(&self, lo: f64, hi: f64) -> f64 {
        let [_, a2, a3] = self.a;
        let [_, b2, b3] = self.b;
        volume_formula([a2, lo, a3], [b2, hi, b3])
    }

    /// V with the x1 interval replaced by `[lo, hi]`, x1 kept first.
    fn x1_leads(&self, lo: f64, hi: f64) -> f64 {
        let [_, a2, a3] = self.a;
        let [_, b2, b3] = self.b;
        volume_formula([lo, a2, a3], [hi, b2, b3])
    }

    pub fn v1(&self, c: f64) -> f64 {
        self.x2_leads(self.a[0], c) + self.x1_leads(c, self.b[0])
    }

    pub fn v2(&self, c: f64) -> f64 {
        self.x2_leads(self.a[0], c) + self.x2_leads(c, self.b[0])
    }

    pub fn v3(&self, c: f64) -> f64 {
        self.x1_leads(self.a[0], c) + self.x2_leads(c, self.b[0])
    }

    pub fn v4(&self, c: f64) -> f64 {
        self.x1_leads(self.a[0], c) + self.x1_leads(c, self.b[0])
    }

    pub fn eval(&self, piece: Piece, c: f64) -> f64 {
        match piece {
            Piece::V1 => self.v1(c),
            Piece::V2 => self.v2(c),
            Piece::V3 => self.v3(c),
            Piece::V4 => self.v4(c),
        }
    }

    /// Coefficient of `c^2` in each piece.
    pub fn leading_coefficient(&self, piece: Piece) -> f64 {
        let [_, a2, a3] = self.a;
        let [_, b2, b3] = self.b;
        let w = (b3 - a3) * (b2 - a2);
        let s = b2 * b3 - a2 * a3;
        match piece {
            Piece::V1 => w * (6.0 * s + 2.0 * b3 * (b2 - a2)) / 24.0,
            Piece::V2 => w * (4.0 * s + 2.0 * (b3 + a3) * (b2 - a2)) / 24.0,
            Piece::V3 => w * (6.0 * s + 2.0 * a3 * (b2 - a2)) / 24.0,
            Piece::V4 => 8.0 * w * s / 24.0,
        }
    }

    pub fn v1_minus_v2(&self, c: f64) -> f64 {
        let [_, a2, a3] = self.a;
        let [b1, b2, b3] = self.b;
        (b3 - a3).powi(2) * (b1 - c) * (b2 - a2) * (b1 * a2 - c * b2) / 12.0
    }

    pub fn v3_minus_v2(&self, c: f64) -> f64 {
        let [a1, a2, a3] = self.a;
        let [_, b2, b3] = self.b;
        (b3 - a3).powi(2) * (c - a1) * (b2 - a2) * (c * a2 - a1 * b2) / 12.0
    }

    pub fn v1_minus_v4(&self, c: f64) -> f64 {
        let [a1, a2, a3] = self.a;
        let [_, b2, b3] = self.b;
        (b3 - a3).powi(2) * (c - a1) * (b2 - a2) * (a1 * b2 - c * a2) / 12.0
    }

    pub fn v3_minus_v4(&self, c: f64) -> f64 {
        let [_, a2, a3] = self.a;
        let [b1, b2, b3] = self.b;
        (b3 - a3).powi(2) * (b1 - c) * (b2 - a2) * (c * b2 - b1 * a2) / 12.0
    }
}

/// The three pieces whose pointwise maximum is the total volume on `[a1, b1]`.
pub fn active_pieces(case: CaseId) -> [Piece; 3] {
    match case {
        CaseId::Case0 | CaseId::Case1 => [Piece::V1, Piece::V2, Piece::V3],
        CaseId::Case2 => [Piece::V1, Piece::V4, Piece::V3],
    }
}

/// Piece that describes the total volume at `c`.
///
/// Case 0 is `V3` throughout. Case 1 runs `V1 | V2 | V3` split at
/// `b1a2/b2 <= a1b2/a2`; Case 2 runs `V1 | V4 | V3` split at
/// `a1b2/a2 < b1a2/b2`.
pub fn piece_at(ob: &OmegaBox, c: f64) -> Piece {
    let right = ob.right_breakpoint();
    match (classify_case(ob), ob.left_breakpoint()) {
        (CaseId::Case0, _) | (_, None) => Piece::V3,
        (CaseId::Case1, Some(left)) => {
            if c <= right {
                Piece::V1
            } else if c < left {
                Piece::V2
            } else {
                Piece::V3
            }
        }
        (CaseId::Case2, Some(left)) => {
            if c <= left {
                Piece::V1
            } else if c < right {
                Piece::V4
            } else {
                Piece::V3
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{normalize, RawBox};

    fn ob(a: [f64; 3], b: [f64; 3]) -> OmegaBox {
        normalize(&RawBox::new(a, b).unwrap())
    }

    #[test]
    fn case0_uses_v3_everywhere() {
        let o = ob([0.0; 3], [1.0; 3]);
        for c in [0.0, 0.3, 1.0] {
            assert_eq!(piece_at(&o, c), Piece::V3);
        }
    }

    #[test]
    fn case1_regions() {
        let o = ob([1.0, 2.0, 12.0], [35.0, 12.0, 35.0]);
        assert_eq!(piece_at(&o, 1.0), Piece::V1);
        assert_eq!(piece_at(&o, 35.0 / 6.0), Piece::V1);
        assert_eq!(piece_at(&o, 5.9), Piece::V2);
        assert_eq!(piece_at(&o, 6.0), Piece::V3);
        assert_eq!(piece_at(&o, 20.0), Piece::V3);
    }

    #[test]
    fn case2_regions() {
        let o = ob([1.0, 1.0, 2.0], [13.0, 2.0, 4.0]);
        assert_eq!(piece_at(&o, 1.5), Piece::V1);
        assert_eq!(piece_at(&o, 2.0), Piece::V1);
        assert_eq!(piece_at(&o, 4.0), Piece::V4);
        assert_eq!(piece_at(&o, 6.5), Piece::V3);
    }

    #[test]
    fn second_difference_matches_leading_coefficient() {
        let o = ob([1.0, 2.0, 12.0], [35.0, 12.0, 35.0]);
        let p = X1Pieces::new(&o);
        let h = 3.0;
        for piece in Piece::ALL {
            let f = |c| p.eval(piece, c);
            let c = 17.0;
            let sd = (f(c + h) - 2.0 * f(c) + f(c - h)) / (2.0 * h * h);
            let lc = p.leading_coefficient(piece);
            assert!(((sd - lc) / lc).abs() < 1e-9, "{piece}: {sd} vs {lc}");
        }
    }
}
