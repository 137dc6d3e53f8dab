//! Formula-free reference computations.
//!
//! The hull is the convex hull of its eight vertices, so the lower and upper
//! envelopes at a point are the optimal values of a linear program over convex
//! weights on those vertices. The program has four equality rows, hence every
//! basic solution is supported on four affinely independent cube corners.
//! Both the primal (weights) and the dual (supporting affine functions) are
//! solved by enumerating those bases. Nothing here uses the closed-form
//! volume.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{OmegaBox, Var};
use crate::error::{Error, Result};
use crate::volume::total_volume;

/// Corners of the unit cube in the order v1..v8, as `(t1, t2, t3)` with
/// `t_i = 0` at `a_i` and `1` at `b_i`.
const CORNERS: [[u8; 3]; 8] = [
    [1, 0, 0],
    [0, 0, 0],
    [0, 0, 1],
    [0, 1, 0],
    [0, 1, 1],
    [1, 1, 1],
    [1, 1, 0],
    [1, 0, 1],
];

const FEASIBILITY_TOL: f64 = 1e-9;

/// The eight extreme points `(x1 x2 x3, x1, x2, x3)` of the hull.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VertexSet {
    pub points: [[f64; 4]; 8],
}

pub fn vertex_set(ob: &OmegaBox) -> VertexSet {
    let (a, b) = (ob.lower(), ob.upper());
    let points = CORNERS.map(|corner| {
        let x: [f64; 3] = std::array::from_fn(|i| if corner[i] == 1 { b[i] } else { a[i] });
        [x[0] * x[1] * x[2], x[0], x[1], x[2]]
    });
    VertexSet { points }
}

#[derive(Clone, Copy, Debug)]
struct Basis {
    corners: [usize; 4],
    /// Inverse of the matrix whose columns are `(1, t_v)` for the four corners.
    inverse: [[f64; 4]; 4],
}

/// Gauss-Jordan with partial pivoting; `None` when singular.
fn invert4(m: [[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut a = m;
    let mut inv = [[0.0; 4]; 4];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for k in 0..4 {
            a[col][k] /= p;
            inv[col][k] /= p;
        }
        for r in 0..4 {
            if r != col {
                let factor = a[r][col];
                for k in 0..4 {
                    a[r][k] -= factor * a[col][k];
                    inv[r][k] -= factor * inv[col][k];
                }
            }
        }
    }
    Some(inv)
}

/// All nonsingular 4-subsets of cube corners. Box independent.
fn bases() -> &'static [Basis] {
    static BASES: OnceLock<Vec<Basis>> = OnceLock::new();
    BASES.get_or_init(|| {
        let mut out = Vec::new();
        for i in 0..8 {
            for j in i + 1..8 {
                for k in j + 1..8 {
                    for l in k + 1..8 {
                        let corners = [i, j, k, l];
                        let mut m = [[0.0; 4]; 4];
                        for (col, &v) in corners.iter().enumerate() {
                            m[0][col] = 1.0;
                            for d in 0..3 {
                                m[d + 1][col] = f64::from(CORNERS[v][d]);
                            }
                        }
                        if let Some(inverse) = invert4(m) {
                            out.push(Basis { corners, inverse });
                        }
                    }
                }
            }
        }
        out
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

/// LP oracle for one box.
#[derive(Clone, Debug)]
pub struct HullOracle {
    lo: [f64; 3],
    hi: [f64; 3],
    values: [f64; 8],
    /// Affine functions `g0 + g . t` that support the lower envelope.
    lower_planes: Vec<[f64; 4]>,
    /// Affine functions that support the upper envelope.
    upper_planes: Vec<[f64; 4]>,
}

impl HullOracle {
    pub fn new(ob: &OmegaBox) -> Self {
        let vs = vertex_set(ob);
        let values = vs.points.map(|p| p[0]);
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut lower_planes: Vec<[f64; 4]> = Vec::new();
        let mut upper_planes: Vec<[f64; 4]> = Vec::new();
        for basis in bases() {
            // g solves A^T g = f_S, i.e. g = A^{-T} f_S
            let g: [f64; 4] = std::array::from_fn(|r| {
                (0..4)
                    .map(|k| basis.inverse[k][r] * values[basis.corners[k]])
                    .sum()
            });
            let residuals = CORNERS
                .iter()
                .zip(values)
                .map(|(c, f)| eval_plane(&g, &corner_t(c)) - f);
            let (mut below, mut above) = (true, true);
            for r in residuals {
                below &= r <= FEASIBILITY_TOL * scale;
                above &= r >= -FEASIBILITY_TOL * scale;
            }
            if below && !contains_plane(&lower_planes, &g, scale) {
                lower_planes.push(g);
            }
            if above && !contains_plane(&upper_planes, &g, scale) {
                upper_planes.push(g);
            }
        }
        HullOracle {
            lo: ob.lower(),
            hi: ob.upper(),
            values,
            lower_planes,
            upper_planes,
        }
    }

    fn to_unit(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        let inside = (0..3).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i]);
        if !inside {
            return Err(Error::PointOutsideBox(x[0], x[1], x[2]));
        }
        Ok(std::array::from_fn(|i| {
            (x[i] - self.lo[i]) / (self.hi[i] - self.lo[i])
        }))
    }

    /// Envelope value by enumerating primal basic feasible solutions.
    pub fn envelope(&self, x: [f64; 3], side: Side) -> Result<f64> {
        let t = self.to_unit(x)?;
        let rhs = [1.0, t[0], t[1], t[2]];
        let mut best: Option<f64> = None;
        for basis in bases() {
            let weights: [f64; 4] =
                std::array::from_fn(|r| (0..4).map(|k| basis.inverse[r][k] * rhs[k]).sum());
            if weights.iter().any(|&w| w < -FEASIBILITY_TOL) {
                continue;
            }
            let value: f64 = (0..4)
                .map(|k| weights[k] * self.values[basis.corners[k]])
                .sum();
            best = Some(match (best, side) {
                (None, _) => value,
                (Some(b), Side::Lower) => b.min(value),
                (Some(b), Side::Upper) => b.max(value),
            });
        }
        Ok(best.expect("the box is covered by the corner simplices"))
    }

    /// Envelope value from the supporting affine functions (the LP dual).
    pub fn envelope_dual(&self, x: [f64; 3], side: Side) -> Result<f64> {
        let t = self.to_unit(x)?;
        Ok(self.envelope_unit(&t, side))
    }

    fn envelope_unit(&self, t: &[f64; 3], side: Side) -> f64 {
        match side {
            Side::Lower => self
                .lower_planes
                .iter()
                .map(|g| eval_plane(g, t))
                .fold(f64::NEG_INFINITY, f64::max),
            Side::Upper => self
                .upper_planes
                .iter()
                .map(|g| eval_plane(g, t))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Vertical extent of the hull at `x`.
    pub fn gap(&self, x: [f64; 3]) -> Result<f64> {
        let t = self.to_unit(x)?;
        Ok(self.envelope_unit(&t, Side::Upper) - self.envelope_unit(&t, Side::Lower))
    }

    pub fn lower_plane_count(&self) -> usize {
        self.lower_planes.len()
    }

    pub fn upper_plane_count(&self) -> usize {
        self.upper_planes.len()
    }

    fn cell_volume(&self) -> f64 {
        (0..3).map(|i| self.hi[i] - self.lo[i]).product()
    }

    fn value_range(&self) -> (f64, f64) {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

fn corner_t(c: &[u8; 3]) -> [f64; 3] {
    c.map(f64::from)
}

fn eval_plane(g: &[f64; 4], t: &[f64; 3]) -> f64 {
    g[0] + g[1] * t[0] + g[2] * t[1] + g[3] * t[2]
}

fn contains_plane(planes: &[[f64; 4]], g: &[f64; 4], scale: f64) -> bool {
    planes
        .iter()
        .any(|p| (0..4).all(|k| (p[k] - g[k]).abs() <= 1e-12 * scale))
}

/// Lower or upper envelope of `x1 x2 x3` over the box at `x`.
pub fn envelope(ob: &OmegaBox, x: [f64; 3], side: Side) -> Result<f64> {
    HullOracle::new(ob).envelope(x, side)
}

fn simpson_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i == 0 || i + 1 == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            }
        })
        .collect()
}

/// Tensor-product composite Simpson estimate of the hull volume, integrating
/// `upper - lower` on an `n x n x n` grid. `n` must be odd and at least 3.
pub fn numeric_volume(ob: &OmegaBox, n: usize) -> Result<f64> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::BadGrid(n));
    }
    let oracle = HullOracle::new(ob);
    let w = simpson_weights(n);
    let step = 1.0 / (n - 1) as f64;
    let ts: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
    let mut lower_partial = vec![[0.0; 2]; oracle.lower_planes.len()];
    let mut upper_partial = vec![[0.0; 2]; oracle.upper_planes.len()];
    let mut sum = 0.0;
    for (i, &t1) in ts.iter().enumerate() {
        for (j, &t2) in ts.iter().enumerate() {
            // fold the t1, t2 terms so the inner loop is one multiply-add per plane
            for (p, g) in lower_partial.iter_mut().zip(&oracle.lower_planes) {
                *p = [g[0] + g[1] * t1 + g[2] * t2, g[3]];
            }
            for (p, g) in upper_partial.iter_mut().zip(&oracle.upper_planes) {
                *p = [g[0] + g[1] * t1 + g[2] * t2, g[3]];
            }
            let mut line = 0.0;
            for (k, &t3) in ts.iter().enumerate() {
                let lower = lower_partial
                    .iter()
                    .map(|p| p[0] + p[1] * t3)
                    .fold(f64::NEG_INFINITY, f64::max);
                let upper = upper_partial
                    .iter()
                    .map(|p| p[0] + p[1] * t3)
                    .fold(f64::INFINITY, f64::min);
                line += w[k] * (upper - lower);
            }
            sum += w[i] * w[j] * line;
        }
    }
    let h = step / 3.0;
    Ok(sum * h * h * h * oracle.cell_volume())
}

/// Hit-or-miss estimate over the bounding 4-D box `[min f, max f] x box`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub volume: f64,
    /// Plug-in standard error from the observed hit rate.
    pub std_error: f64,
    pub samples: usize,
    pub hits: usize,
    /// Volume of the sampled 4-D box.
    pub bounding_volume: f64,
}

impl MonteCarloEstimate {
    /// Standard error if the true volume were `volume`. Unlike the plug-in
    /// error this stays honest when the hit rate is small.
    pub fn std_error_at(&self, volume: f64) -> f64 {
        let p = (volume / self.bounding_volume).clamp(0.0, 1.0);
        (p * (1.0 - p) / self.samples as f64).sqrt() * self.bounding_volume
    }
}

pub fn monte_carlo_volume(ob: &OmegaBox, samples: usize, seed: u64) -> MonteCarloEstimate {
    let oracle = HullOracle::new(ob);
    let (f_lo, f_hi) = oracle.value_range();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let t: [f64; 3] = std::array::from_fn(|_| rng.gen::<f64>());
        let f = f_lo + (f_hi - f_lo) * rng.gen::<f64>();
        if oracle.envelope_unit(&t, Side::Lower) <= f && f <= oracle.envelope_unit(&t, Side::Upper)
        {
            hits += 1;
        }
    }
    let bounding = (f_hi - f_lo) * oracle.cell_volume();
    let p = hits as f64 / samples as f64;
    MonteCarloEstimate {
        volume: p * bounding,
        std_error: (p * (1.0 - p) / samples as f64).sqrt() * bounding,
        samples,
        hits,
        bounding_volume: bounding,
    }
}

/// Brute-force minimizer of the total child volume over `n` evenly spaced
/// points, plus the interior x1 breakpoints. Returns `(point, total)`.
pub fn grid_argmin(ob: &OmegaBox, var: Var, n: usize) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(Error::BadGrid(n));
    }
    let (lo, hi) = (ob.a(var), ob.b(var));
    let mut points: Vec<f64> = (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    if var == Var::X1 {
        points.extend(
            [ob.left_breakpoint(), Some(ob.right_breakpoint())]
                .into_iter()
                .flatten()
                .filter(|&c| c > lo && c < hi),
        );
    }
    let mut best = (lo, f64::INFINITY);
    for c in points {
        let tv = total_volume(ob, var, c)?;
        if tv < best.1 {
            best = (c, tv);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{normalize, RawBox};

    fn ob(a: [f64; 3], b: [f64; 3]) -> OmegaBox {
        normalize(&RawBox::new(a, b).unwrap())
    }

    #[test]
    fn cube_has_58_simplices() {
        // 70 four-subsets minus 6 faces and 6 diagonal planes
        assert_eq!(bases().len(), 58);
    }

    #[test]
    fn unit_box_vertices() {
        let vs = vertex_set(&ob([0.0; 3], [1.0; 3]));
        let f: Vec<f64> = vs.points.iter().map(|p| p[0]).collect();
        assert_eq!(f, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(vs.points[5], [1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn shifted_box_vertices() {
        let vs = vertex_set(&ob([1.0; 3], [2.0; 3]));
        assert_eq!(vs.points[1], [1.0, 1.0, 1.0, 1.0]);
        assert_eq!(vs.points[5], [8.0, 2.0, 2.0, 2.0]);
        for p in vs.points {
            assert_eq!(p[0], p[1] * p[2] * p[3]);
        }
    }

    #[test]
    fn envelopes_on_unit_box() {
        let o = ob([0.0; 3], [1.0; 3]);
        assert_eq!(envelope(&o, [1.0; 3], Side::Upper).unwrap(), 1.0);
        assert_eq!(envelope(&o, [1.0; 3], Side::Lower).unwrap(), 1.0);
        assert!(envelope(&o, [0.5; 3], Side::Lower).unwrap().abs() < 1e-15);
        assert!(matches!(
            envelope(&o, [1.5, 0.5, 0.5], Side::Lower),
            Err(Error::PointOutsideBox(..))
        ));
    }

    #[test]
    fn envelopes_meet_at_corners() {
        let o = ob([1.0, 2.0, 12.0], [35.0, 12.0, 35.0]);
        let oracle = HullOracle::new(&o);
        for p in vertex_set(&o).points {
            let x = [p[1], p[2], p[3]];
            for side in [Side::Lower, Side::Upper] {
                let got = oracle.envelope(x, side).unwrap();
                assert!((got - p[0]).abs() <= 1e-9 * p[0], "{side:?} {x:?}");
            }
        }
    }

    #[test]
    fn simpson_reproduces_known_volumes() {
        let unit = numeric_volume(&ob([0.0; 3], [1.0; 3]), 101).unwrap();
        assert!((unit - 5.0 / 24.0).abs() / (5.0 / 24.0) < 1e-3, "{unit}");
        let shifted = numeric_volume(&ob([1.0; 3], [2.0; 3]), 101).unwrap();
        assert!((shifted - 0.625).abs() / 0.625 < 1e-3, "{shifted}");
        assert!(numeric_volume(&ob([0.0; 3], [1.0; 3]), 10).is_err());
    }

    #[test]
    fn grid_argmin_finds_breakpoint() {
        let o = ob([1.0, 5.0, 1.0], [8.0, 22.0, 4.0]);
        let (c, _) = grid_argmin(&o, Var::X1, 10001).unwrap();
        assert!((c - 4.4).abs() <= 7.0 / 10000.0);
        let unit = ob([0.0; 3], [1.0; 3]);
        let (c, tv) = grid_argmin(&unit, Var::X2, 1001).unwrap();
        assert!((c - 0.5).abs() <= 1e-3);
        assert!(tv <= total_volume(&unit, Var::X2, 0.0).unwrap());
        assert!(tv <= total_volume(&unit, Var::X2, 1.0).unwrap());
    }
}
