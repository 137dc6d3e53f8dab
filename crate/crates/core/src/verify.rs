//! Randomized invariant suite behind `tribranch verify`.
//!
//! Every check is evaluated on seeded random boxes and compared against either
//! the [`crate::oracle`] computations or an independent closed form. A check
//! passes when its residual stays at or below its tolerance on every box.
//! Boxes are generated per index, so a failing box can be rerun alone with
//! `--only`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{
    classify_case, normalize, satisfies_omega_products, satisfies_omega_ratios, CaseId, OmegaBox,
    RawBox, Var,
};
use crate::branching::{
    argmin_convex, interior_breakpoints, minimizer_fraction_bounds, optimal_point,
    optimal_point_x1, q_points, rank_variables,
};
use crate::heuristics::{heuristic_point, regret, solver_profiles, HeuristicParams, Solver};
use crate::instance::random_box;
use crate::oracle::{grid_argmin, monte_carlo_volume, numeric_volume, HullOracle, Side};
use crate::pieces::{active_pieces, piece_at, Piece, X1Pieces};
use crate::volume::{hull_volume, total_volume};

pub type VolumeFn = fn(&OmegaBox) -> f64;

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub boxes: usize,
    pub seed: u64,
    /// Points in the brute-force branching-point grids.
    pub grid: usize,
    /// Simpson grid for the oracle volume (odd).
    pub volume_grid: usize,
    /// Bounds are drawn from `[0, max_bound]`.
    pub max_bound: f64,
    /// Run a single box index.
    pub only: Option<usize>,
    pub monte_carlo_samples: usize,
    /// Volume function under test; replaced only for mutation runs.
    pub hull: VolumeFn,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            boxes: 1000,
            seed: 42,
            grid: 10001,
            volume_grid: 101,
            max_bound: 10.0,
            only: None,
            monte_carlo_samples: 4000,
            hull: hull_volume,
        }
    }
}

/// Hull volume with the leading `5` perturbed to `5.05`. Negative control.
pub fn perturbed_hull_volume(ob: &OmegaBox) -> f64 {
    let [l1, l2, l3] = ob.lower();
    let [u1, u2, u3] = ob.upper();
    let widths = (u1 - l1) * (u2 - l2) * (u3 - l3);
    let upper_part = u1 * (5.05 * u2 * u3 - l2 * u3 - u2 * l3 - 3.0 * l2 * l3);
    let lower_part = l1 * (5.0 * l2 * l3 - u2 * l3 - l2 * u3 - 3.0 * u2 * u3);
    widths * (upper_part + lower_part) / 24.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckStats {
    pub name: &'static str,
    pub tolerance: f64,
    pub evaluated: usize,
    pub failed: usize,
    pub worst: f64,
    /// Box index and message of the first failure.
    pub first_failure: Option<(usize, String)>,
}

#[derive(Clone, Debug)]
pub struct Summary {
    pub config: VerifyConfig,
    pub box_indices: Vec<usize>,
    pub checks: Vec<CheckStats>,
    /// Smallest `(p - a1) / (b1 - a1)` over the optimal x1 points, with its box.
    pub min_fraction: Option<(f64, usize)>,
    /// Pooled Monte-Carlo z-score over all boxes.
    pub monte_carlo_z: f64,
}

/// Pooled Monte-Carlo deviations must stay within this many standard errors.
pub const MONTE_CARLO_Z: f64 = 3.0;

impl Summary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.failed == 0)
    }

    pub fn failing(&self) -> impl Iterator<Item = &CheckStats> {
        self.checks.iter().filter(|c| c.failed > 0)
    }

    /// Deterministic text report.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let _ = writeln!(
            out,
            "verify: boxes={} seed={} grid={} volume-grid={} max-bound={}",
            self.box_indices.len(),
            c.seed,
            c.grid,
            c.volume_grid,
            c.max_bound
        );
        let _ = writeln!(
            out,
            "{:<44} {:>9} {:>7} {:>12} {:>10}",
            "check", "evaluated", "failed", "worst", "tolerance"
        );
        for s in &self.checks {
            let _ = writeln!(
                out,
                "{:<44} {:>9} {:>7} {:>12.3e} {:>10.1e}",
                s.name, s.evaluated, s.failed, s.worst, s.tolerance
            );
        }
        if let Some((f, i)) = self.min_fraction {
            let _ = writeln!(
                out,
                "empirical minimum x1 optimal fraction: {f:.6} (box {i})"
            );
        }
        let _ = writeln!(out, "pooled monte-carlo z: {:.4}", self.monte_carlo_z);
        for s in self.failing() {
            if let Some((index, msg)) = &s.first_failure {
                let raw = random_box(c.seed, *index, c.max_bound, None);
                let _ = writeln!(out, "FAILED {}: box {index}: {msg}", s.name);
                let _ = writeln!(out, "  box a={:?} b={:?}", raw.lower(), raw.upper());
                let _ = writeln!(
                    out,
                    "  reproduce: tribranch verify --seed {} --boxes {} --grid {} --only {index}",
                    c.seed, c.boxes, c.grid
                );
            }
        }
        let _ = writeln!(
            out,
            "result: {}",
            if self.passed() { "PASS" } else { "FAIL" }
        );
        out
    }
}

struct Recorder {
    checks: Vec<CheckStats>,
    index: usize,
}

impl Recorder {
    /// Record one evaluation. Passes when `residual <= tol`.
    fn record(
        &mut self,
        name: &'static str,
        residual: f64,
        tol: f64,
        detail: impl FnOnce() -> String,
    ) {
        let pos = match self.checks.iter().position(|c| c.name == name) {
            Some(p) => p,
            None => {
                self.checks.push(CheckStats {
                    name,
                    tolerance: tol,
                    evaluated: 0,
                    failed: 0,
                    worst: 0.0,
                    first_failure: None,
                });
                self.checks.len() - 1
            }
        };
        let s = &mut self.checks[pos];
        s.evaluated += 1;
        // NaN must count as a failure
        let ok = residual <= tol;
        if ok {
            s.worst = s.worst.max(residual);
        } else {
            s.failed += 1;
            s.worst = if residual.is_nan() {
                f64::NAN
            } else {
                s.worst.max(residual)
            };
            if s.first_failure.is_none() {
                s.first_failure = Some((self.index, detail()));
            }
        }
    }

    fn flag(&mut self, name: &'static str, ok: bool, detail: impl FnOnce() -> String) {
        self.record(name, if ok { 0.0 } else { 1.0 }, 0.0, detail);
    }

    /// `lhs <= rhs` up to `slack`; residual is the excess.
    fn le(&mut self, name: &'static str, lhs: f64, rhs: f64, slack: f64) {
        self.record(name, (lhs - rhs).max(0.0), slack, || {
            format!("{lhs} > {rhs}")
        });
    }

    fn close(&mut self, name: &'static str, got: f64, want: f64, scale: f64, rel: f64) {
        self.record(name, (got - want).abs() / scale, rel, || {
            format!("got {got}, want {want} (scale {scale})")
        });
    }
}

fn per_box_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_cafe_f00d_d00d);
    rng.set_stream(index as u64);
    rng
}

fn sample_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            if k == n {
                hi
            } else {
                lo + (hi - lo) * k as f64 / n as f64
            }
        })
        .collect()
}

pub fn run(config: &VerifyConfig) -> Summary {
    let box_indices: Vec<usize> = match config.only {
        Some(i) => vec![i],
        None => (0..config.boxes).collect(),
    };
    let mut rec = Recorder {
        checks: Vec::new(),
        index: 0,
    };
    let mut min_fraction: Option<(f64, usize)> = None;
    let (mut mc_dev, mut mc_var) = (0.0, 0.0);

    check_table(&mut rec);
    for &index in &box_indices {
        rec.index = index;
        let raw = random_box(config.seed, index, config.max_bound, None);
        let ob = normalize(&raw);
        let mut rng = per_box_rng(config.seed, index);
        check_bounds(&mut rec, &raw, &ob);
        check_volume(&mut rec, &ob, config);
        let fraction = check_branching(&mut rec, &ob, config, &mut rng);
        if min_fraction.is_none_or(|(f, _)| fraction < f) {
            min_fraction = Some((fraction, index));
        }
        let (dev, var) = check_oracle(&mut rec, &ob, config, &mut rng, index);
        mc_dev += dev;
        mc_var += var;
        check_heuristics(&mut rec, &ob, &mut rng);
    }
    let monte_carlo_z = if mc_var > 0.0 {
        mc_dev / mc_var.sqrt()
    } else {
        0.0
    };
    // pooling is meaningless for a single-box rerun
    if config.only.is_none() {
        rec.index = box_indices.first().copied().unwrap_or(0);
        rec.record(
            "oracle.monte_carlo_pooled",
            monte_carlo_z.abs(),
            MONTE_CARLO_Z,
            || {
                format!(
                    "pooled z = {monte_carlo_z} over {} boxes",
                    box_indices.len()
                )
            },
        );
    }
    Summary {
        config: config.clone(),
        box_indices,
        checks: rec.checks,
        min_fraction,
        monte_carlo_z,
    }
}

fn check_table(rec: &mut Recorder) {
    let expected = [
        (Solver::Scip, 1.00, 0.20, false),
        (Solver::Antigone, 0.75, 0.10, true),
        (Solver::Baron, 0.70, 0.01, true),
        (Solver::Couenne, 0.25, 0.20, true),
    ];
    for (solver, alpha, beta, inactive) in expected {
        let p = solver.params();
        rec.flag(
            "heuristics.solver_table",
            p.alpha == alpha && p.beta == beta && p.clipping_inactive() == inactive,
            || format!("{} row differs", solver.name()),
        );
    }
}

fn check_bounds(rec: &mut Recorder, raw: &RawBox, ob: &OmegaBox) {
    let (a, b) = (ob.lower(), ob.upper());
    rec.flag(
        "bounds.omega_forms",
        satisfies_omega_products(&a, &b) && satisfies_omega_ratios(&a, &b),
        || format!("a={a:?} b={b:?} violates Ω"),
    );
    let again = normalize(&ob.to_raw());
    let relabeled = normalize(&RawBox::new(a, b).expect("valid"));
    rec.flag(
        "bounds.normalize_idempotent",
        ob.to_raw() == *raw && again == *ob && relabeled.lower() == a && relabeled.upper() == b,
        || "relabeling is not stable".to_string(),
    );
    let [a1, a2, a3] = a;
    let [b1, b2, b3] = b;
    for q in [b1 * a2 - a1 * b2, b1 * a3 - a1 * b3, b2 * a3 - a2 * b3] {
        let scale = b1.max(b2).max(b3).powi(2);
        rec.record(
            "bounds.ratio_differences_nonnegative",
            (-q).max(0.0) / scale,
            1e-12,
            || format!("{q} < 0"),
        );
    }
    if a2 == 0.0 {
        rec.flag("bounds.case0_has_a1_zero", a1 == 0.0, || {
            format!("a1 = {a1}")
        });
    }
}

fn check_volume(rec: &mut Recorder, ob: &OmegaBox, config: &VerifyConfig) {
    let whole_under_test = (config.hull)(ob);
    let numeric = numeric_volume(ob, config.volume_grid).expect("odd grid");
    rec.close(
        "volume.oracle_equivalence",
        whole_under_test,
        numeric,
        whole_under_test.abs(),
        1e-3,
    );

    let whole = hull_volume(ob);
    let pieces = X1Pieces::new(ob);
    let (a1, b1) = (ob.a(Var::X1), ob.b(Var::X1));
    let mut cs = sample_points(a1, b1, 16);
    cs.extend(interior_breakpoints(ob));

    for &c in &cs {
        let tv = total_volume(ob, Var::X1, c).expect("in range");
        let piece = piece_at(ob, c);
        rec.close(
            "volume.piece_consistency",
            tv,
            pieces.eval(piece, c),
            whole,
            1e-10,
        );
        rec.close(
            "volume.piece_difference_v1_v2",
            pieces.v1(c) - pieces.v2(c),
            pieces.v1_minus_v2(c),
            whole,
            1e-9,
        );
        rec.close(
            "volume.piece_difference_v3_v2",
            pieces.v3(c) - pieces.v2(c),
            pieces.v3_minus_v2(c),
            whole,
            1e-9,
        );
        rec.close(
            "volume.piece_difference_v1_v4",
            pieces.v1(c) - pieces.v4(c),
            pieces.v1_minus_v4(c),
            whole,
            1e-9,
        );
        rec.close(
            "volume.piece_difference_v3_v4",
            pieces.v3(c) - pieces.v4(c),
            pieces.v3_minus_v4(c),
            whole,
            1e-9,
        );
    }

    if let Some(left) = ob.left_breakpoint() {
        let right = ob.right_breakpoint();
        let pairs = match classify_case(ob) {
            CaseId::Case2 => [(Piece::V1, Piece::V4, left), (Piece::V4, Piece::V3, right)],
            _ => [(Piece::V1, Piece::V2, right), (Piece::V2, Piece::V3, left)],
        };
        for (p, q, c) in pairs {
            rec.close(
                "volume.breakpoint_continuity",
                pieces.eval(p, c),
                pieces.eval(q, c),
                whole,
                1e-10,
            );
        }
    }

    for var in Var::ALL {
        let (lo, hi) = (ob.a(var), ob.b(var));
        for c in sample_points(lo, hi, 20).into_iter().skip(1).take(19) {
            let tv = total_volume(ob, var, c).expect("in range");
            rec.flag("volume.branching_reduces_volume", tv < whole, || {
                format!("{var} at {c}: {tv} >= {whole}")
            });
        }
        let at_lo = total_volume(ob, var, lo).expect("endpoint");
        let at_hi = total_volume(ob, var, hi).expect("endpoint");
        rec.close("volume.endpoints_are_parent", at_lo, whole, whole, 1e-14);
        rec.close("volume.endpoints_are_parent", at_hi, whole, whole, 1e-14);
    }

    let h = 0.25 * (b1 - a1);
    let mid = 0.5 * (a1 + b1);
    for piece in Piece::ALL {
        let lc = pieces.leading_coefficient(piece);
        rec.flag("volume.leading_coefficient_positive", lc > 0.0, || {
            format!("{piece}: {lc}")
        });
        let second = (pieces.eval(piece, mid + h) - 2.0 * pieces.eval(piece, mid)
            + pieces.eval(piece, mid - h))
            / (2.0 * h * h);
        rec.close(
            "volume.leading_coefficient_matches",
            second,
            lc,
            lc.abs(),
            1e-6,
        );
    }
}

/// Returns the optimal x1 fraction for this box.
fn check_branching(
    rec: &mut Recorder,
    ob: &OmegaBox,
    config: &VerifyConfig,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let whole = hull_volume(ob);
    let [a1, a2, a3] = ob.lower();
    let [b1, b2, b3] = ob.upper();
    let w1 = b1 - a1;
    let pieces = X1Pieces::new(ob);
    let case = classify_case(ob);
    let tv1 = |c: f64| total_volume(ob, Var::X1, c).expect("in range");

    // procedure against brute force
    let d = optimal_point_x1(ob);
    rec.flag(
        "branching.decision_interior",
        d.point > a1 && d.point < b1,
        || format!("point {} not inside ({a1}, {b1})", d.point),
    );
    rec.close(
        "branching.decision_total",
        d.child_volumes.total,
        tv1(d.point),
        whole,
        0.0,
    );
    let (c_grid, tv_grid) = grid_argmin(ob, Var::X1, config.grid).expect("grid >= 3");
    let step = w1 / (config.grid - 1) as f64;
    rec.record(
        "branching.grid_location_x1",
        (c_grid - d.point).abs() / step,
        1.0,
        || {
            format!(
                "grid argmin {c_grid}, procedure {} ({})",
                d.point, d.candidate
            )
        },
    );
    rec.le(
        "branching.grid_value_x1",
        d.child_volumes.total / whole,
        tv_grid / whole,
        1e-9,
    );
    let (c_gold, _) = argmin_convex(tv1, a1, b1, 1e-10 * w1);
    rec.le(
        "branching.bisection_value_x1",
        d.child_volumes.total / whole,
        tv1(c_gold) / whole,
        1e-12,
    );

    // global convexity through random chords
    for _ in 0..10 {
        let mut t = [
            rng.gen_range(a1..=b1),
            rng.gen_range(a1..=b1),
            rng.gen_range(a1..=b1),
        ];
        t.sort_by(f64::total_cmp);
        let [ca, cb, cc] = t;
        if cc > ca {
            let chord = tv1(ca) + (cb - ca) / (cc - ca) * (tv1(cc) - tv1(ca));
            rec.le(
                "branching.global_convexity",
                tv1(cb) / whole,
                chord / whole,
                1e-12,
            );
        }
    }

    // total volume is the pointwise max of the active pieces
    let active = active_pieces(case);
    let mut cs = sample_points(a1, b1, 16);
    cs.extend(interior_breakpoints(ob));
    for _ in 0..8 {
        cs.push(rng.gen_range(a1..=b1));
    }
    for &c in &cs {
        let max = active
            .iter()
            .map(|&p| pieces.eval(p, c))
            .fold(f64::NEG_INFINITY, f64::max);
        rec.close("branching.pointwise_max", tv1(c), max, whole, 1e-9);
    }

    // q ordering and the gap formulas
    let q = q_points(ob);
    rec.le("branching.q_ordering", q.q2 / w1, q.q1 / w1, 1e-12);
    rec.le("branching.q_ordering", q.q3 / w1, q.q2 / w1, 1e-12);
    let gap12 = (b3 - a3) * (b1 * a2 - a1 * b2) / (2.0 * (4.0 * b2 * b3 - a2 * b3 - 3.0 * a2 * a3));
    let gap32 = (a3 - b3) * (b1 * a2 - a1 * b2) / (2.0 * (3.0 * b2 * b3 + b2 * a3 - 4.0 * a2 * a3));
    rec.close("branching.q_gap_formulas", q.q1 - q.q2, gap12, w1, 1e-9);
    rec.close("branching.q_gap_formulas", q.q3 - q.q2, gap32, w1, 1e-9);
    let e = 1e-4 * w1;
    for (piece, qv) in [
        (Piece::V1, q.q1),
        (Piece::V2, q.q2),
        (Piece::V4, q.q2),
        (Piece::V3, q.q3),
    ] {
        let slope = (pieces.eval(piece, qv + e) - pieces.eval(piece, qv - e)) / (2.0 * e);
        rec.record(
            "branching.q_are_piece_minimizers",
            (slope * w1 / whole).abs(),
            1e-6,
            || format!("{piece} slope {slope} at {qv}"),
        );
    }

    breakpoint_checks(rec, ob, case, whole);

    // x2 and x3: midpoint optimality
    for var in [Var::X2, Var::X3] {
        let (lo, hi) = (ob.a(var), ob.b(var));
        let w = hi - lo;
        let mid = 0.5 * (lo + hi);
        let (c_grid, _) = grid_argmin(ob, var, config.grid).expect("grid >= 3");
        let step = w / (config.grid - 1) as f64;
        rec.record(
            "branching.midpoint_x23_grid",
            (c_grid - mid).abs() / step,
            1.0,
            || format!("{var}: grid argmin {c_grid}, midpoint {mid}"),
        );
        let tv = |c: f64| total_volume(ob, var, c).expect("in range");
        let h = 1e-3 * w;
        let slope = (tv(mid + h) - tv(mid - h)) / (2.0 * h);
        rec.record(
            "branching.midpoint_x23_derivative",
            (slope * w / tv(mid)).abs(),
            1e-6,
            || format!("{var}: slope {slope}"),
        );
        let hh = 0.25 * w;
        let second = (tv(mid + hh) - 2.0 * tv(mid) + tv(mid - hh)) / (hh * hh);
        let (oa, ob_) = if var == Var::X2 { (a3, b3) } else { (a2, b2) };
        let lc =
            (b1 - a1) * (ob_ - oa) * (3.0 * (b1 * ob_ - a1 * oa) + (b1 * oa - a1 * ob_)) / 12.0;
        rec.close(
            "branching.midpoint_x23_curvature",
            second,
            2.0 * lc,
            lc.abs(),
            1e-6,
        );
    }

    // variable ranking and the closed-form totals
    let totals = Var::ALL.map(|v| optimal_point(ob, v).child_volumes.total);
    rec.le(
        "branching.ranking_order",
        totals[0] / whole,
        totals[1] / whole,
        1e-12,
    );
    rec.le(
        "branching.ranking_order",
        totals[1] / whole,
        totals[2] / whole,
        1e-12,
    );
    let ranking = rank_variables(ob);
    rec.flag(
        "branching.ranking_sorted",
        ranking
            .entries
            .windows(2)
            .all(|w| w[0].child_volumes.total <= w[1].child_volumes.total),
        || "ranking not ascending".to_string(),
    );
    let k = (b3 - a3) * (b2 - a2) * (b1 - a1);
    let t3 = k / 48.0
        * (7.0 * a1 * a2 * a3 + a1 * a2 * b3
            - 3.0 * a1 * a3 * b2
            - 5.0 * a1 * b2 * b3
            - 5.0 * a2 * a3 * b1
            - 3.0 * a2 * b1 * b3
            + a3 * b1 * b2
            + 7.0 * b1 * b2 * b3);
    let t2 = k / 48.0
        * (7.0 * a1 * a2 * a3 - 3.0 * a1 * a2 * b3 + a1 * a3 * b2
            - 5.0 * a1 * b2 * b3
            - 5.0 * a2 * a3 * b1
            + a2 * b1 * b3
            - 3.0 * a3 * b1 * b2
            + 7.0 * b1 * b2 * b3);
    rec.close("branching.ranking_closed_forms", totals[1], t2, whole, 1e-9);
    rec.close("branching.ranking_closed_forms", totals[2], t3, whole, 1e-9);
    let gap = (b3 - a3) * (b2 - a2) * (b1 - a1).powi(2) * (b2 * a3 - a2 * b3) / 12.0;
    rec.close(
        "branching.ranking_x3_x2_gap",
        totals[2] - totals[1],
        gap,
        whole,
        1e-9,
    );

    // midpoint on x1 already beats optimal x2
    let mid1 = 0.5 * (a1 + b1);
    let at_mid = tv1(mid1);
    rec.le(
        "branching.midpoint_x1_dominance",
        at_mid / whole,
        totals[1] / whole,
        1e-12,
    );
    let piece = piece_at(ob, mid1);
    rec.flag(
        "branching.midpoint_x1_not_in_v1",
        piece != Piece::V1,
        || format!("midpoint {mid1} lies on V1"),
    );
    let w = (b3 - a3).powi(2) * (b2 - a2) * (b1 - a1);
    let d12 = b1 * a2 - a1 * b2;
    let expected_gap = match piece {
        Piece::V2 => w * d12 / 8.0,
        Piece::V3 => w * (4.0 * d12 + a2 * (b1 - a1)) / 48.0,
        Piece::V4 => w * (b1 * b2 - a1 * a2 + 3.0 * d12) / 48.0,
        Piece::V1 => f64::NAN,
    };
    if piece != Piece::V1 {
        rec.close(
            "branching.midpoint_x1_gap_formulas",
            totals[1] - at_mid,
            expected_gap,
            whole,
            1e-9,
        );
    }

    // where the x1 minimizer may fall
    let fb = minimizer_fraction_bounds(ob);
    let fraction = (d.point - a1) / w1;
    rec.le("branching.minimizer_lower_bound", fb.lower, fraction, 1e-12);
    rec.le("branching.minimizer_upper_bound", fraction, fb.upper, 1e-12);
    fraction
}

fn breakpoint_checks(rec: &mut Recorder, ob: &OmegaBox, case: CaseId, whole: f64) {
    let [a1, a2, a3] = ob.lower();
    let [b1, b2, b3] = ob.upper();
    let w1 = b1 - a1;
    let pieces = X1Pieces::new(ob);
    let q1 = q_points(ob).q1;

    // cubic weights of the Case 1 bound: b3 Y + a3 Z >= 0 since Y >= 0, Y + Z >= 0
    let y = -a2.powi(3) + 7.0 * a2 * a2 * b2 - 20.0 * a2 * b2 * b2 + 16.0 * b2.powi(3);
    let z = -3.0 * a2.powi(3) + 13.0 * a2 * a2 * b2 - 12.0 * a2 * b2 * b2;
    let scale = b2.powi(3);
    rec.le(
        "branching.cubic_weights_nonnegative",
        -y / scale,
        0.0,
        1e-12,
    );
    rec.close(
        "branching.cubic_weights_nonnegative",
        y + z,
        4.0 * (b2 - a2) * (2.0 * b2 - a2).powi(2),
        scale,
        1e-12,
    );
    let y_alt = (b2 - a2) * (4.0 * b2 * (b2 - a2) + 12.0 * b2 * b2 + a2 * a2) + 2.0 * a2 * a2 * b2;
    rec.close(
        "branching.cubic_weights_nonnegative",
        y,
        y_alt,
        scale,
        1e-12,
    );
    rec.le(
        "branching.cubic_weights_nonnegative",
        -(b3 * y + a3 * z) / (b3 * scale),
        0.0,
        1e-12,
    );

    let Some(left) = ob.left_breakpoint() else {
        return;
    };
    let right = ob.right_breakpoint();
    match case {
        CaseId::Case1 => {
            // V2 is lower at the right breakpoint than at the left
            rec.le(
                "branching.case1_breakpoint_order",
                pieces.v2(left) / whole,
                pieces.v2(right) / whole,
                1e-9,
            );
            let diff = (b3 - a3)
                * (b2 - a2).powi(2)
                * (b1 * a2 - a1 * b2)
                * (a1 * b2 * b2 - a2 * a2 * b1)
                * (3.0 * (b2 * b3 - a2 * a3) + b2 * a3 - a2 * b3)
                / (12.0 * a2 * a2 * b2 * b2);
            rec.close(
                "branching.case1_breakpoint_gap",
                pieces.v2(right) - pieces.v2(left),
                diff,
                whole,
                1e-9,
            );
            rec.le(
                "branching.case1_q1_beyond_breakpoint",
                right / w1,
                q1 / w1,
                1e-12,
            );
            // V1 at its minimizer stays below the V2/V3 join
            rec.le(
                "branching.case1_join_above_v1_min",
                pieces.v1(q1) / whole,
                pieces.v2(left) / whole,
                1e-9,
            );
            let (factor, terms) = case1_join_terms(ob);
            let poly: f64 = terms.iter().sum();
            let mag = factor.abs() * terms.iter().map(|t| t.abs()).sum::<f64>();
            rec.close(
                "branching.case1_join_gap",
                pieces.v2(left) - pieces.v1(q1),
                factor * poly,
                mag.max(whole),
                1e-9,
            );
        }
        CaseId::Case2 => {
            // V4 is lower at the right breakpoint than at the left
            rec.le(
                "branching.case2_breakpoint_order",
                pieces.v4(right) / whole,
                pieces.v4(left) / whole,
                1e-9,
            );
            let diff = (b3 - a3)
                * (b2 - a2).powi(2)
                * (b1 * a2 * a2 - a1 * b2 * b2)
                * (b1 * a2 - a1 * b2)
                * (b2 * b3 - a2 * a3)
                / (3.0 * a2 * a2 * b2 * b2);
            rec.close(
                "branching.case2_breakpoint_gap",
                pieces.v4(left) - pieces.v4(right),
                diff,
                whole,
                1e-9,
            );
            rec.le(
                "branching.case2_q1_beyond_breakpoint",
                left / w1,
                q1 / w1,
                1e-12,
            );
            // V1 at its minimizer stays below the V4/V3 join
            rec.le(
                "branching.case2_join_above_v1_min",
                pieces.v1(q1) / whole,
                pieces.v4(right) / whole,
                1e-9,
            );
            let (factor, terms) = case2_join_terms(ob);
            let poly: f64 = terms.iter().sum();
            let mag = factor.abs() * terms.iter().map(|t| t.abs()).sum::<f64>();
            rec.close(
                "branching.case2_join_gap",
                pieces.v4(right) - pieces.v1(q1),
                factor * poly,
                mag.max(whole),
                1e-9,
            );
        }
        CaseId::Case0 => {}
    }
}

/// `(factor, [p a1^2, q a1, r])` for `V2(a1b2/a2) - V1(q1)`.
fn case1_join_terms(ob: &OmegaBox) -> (f64, [f64; 3]) {
    let [a1, a2, a3] = ob.lower();
    let [b1, b2, b3] = ob.upper();
    let p = (-3.0 * a2 * a3 - a2 * b3 + b2 * a3 + 3.0 * b2 * b3)
        * (-3.0 * a2.powi(3) * a3 - a2.powi(3) * b3
            + 13.0 * a2 * a2 * b2 * a3
            + 7.0 * a2 * a2 * b2 * b3
            - 12.0 * a2 * b2 * b2 * a3
            - 20.0 * a2 * b2 * b2 * b3
            + 16.0 * b2.powi(3) * b3);
    let q = 4.0
        * a2
        * b1
        * (2.0 * a2 * a2 * a3 - 3.0 * a2 * b2 * a3 - 3.0 * a2 * b2 * b3 + 4.0 * b2 * b2 * b3)
        * (3.0 * a2 * a3 + a2 * b3 - b2 * a3 - 3.0 * b2 * b3);
    let r = 4.0 * a2 * a2 * b1 * b1 * (a2 * a3 + a2 * b3 - 2.0 * b2 * b3).powi(2);
    let factor =
        (b3 - a3) * (b2 - a2) / (48.0 * (4.0 * b2 * b3 - a2 * b3 - 3.0 * a2 * a3) * a2 * a2);
    (factor, [p * a1 * a1, q * a1, r])
}

/// `(factor, [p a1^2, q a1, r])` for `V4(b1a2/b2) - V1(q1)`.
fn case2_join_terms(ob: &OmegaBox) -> (f64, [f64; 3]) {
    let [a1, a2, a3] = ob.lower();
    let [b1, b2, b3] = ob.upper();
    let p = b2 * b2 * (5.0 * b2 * b3 - b2 * a3 - a2 * b3 - 3.0 * a2 * a3).powi(2);
    let q = 8.0
        * b1
        * b2
        * (6.0 * a2 * a2 * a3 + 2.0 * a2 * a2 * b3 - 3.0 * a2 * b2 * a3 - 9.0 * a2 * b2 * b3
            + b2 * b2 * a3
            + 3.0 * b2 * b2 * b3)
        * (b2 * b3 - a2 * a3);
    let r = 16.0
        * b1
        * b1
        * (-3.0 * a2.powi(3) * a3 - a2.powi(3) * b3
            + 3.0 * a2 * a2 * b2 * a3
            + 5.0 * a2 * a2 * b2 * b3
            - a2 * b2 * b2 * a3
            - 4.0 * a2 * b2 * b2 * b3
            + b2.powi(3) * b3)
        * (b2 * b3 - a2 * a3);
    let factor =
        (b3 - a3) * (b2 - a2) / (48.0 * (4.0 * b2 * b3 - a2 * b3 - 3.0 * a2 * a3) * b2 * b2);
    (factor, [p * a1 * a1, q * a1, r])
}

/// Returns `(deviation, variance)` of the Monte-Carlo estimate for pooling.
fn check_oracle(
    rec: &mut Recorder,
    ob: &OmegaBox,
    config: &VerifyConfig,
    rng: &mut ChaCha8Rng,
    index: usize,
) -> (f64, f64) {
    let oracle = HullOracle::new(ob);
    let (lo, hi) = (ob.lower(), ob.upper());
    let scale = hi[0] * hi[1] * hi[2];
    let point = |rng: &mut ChaCha8Rng| -> [f64; 3] {
        std::array::from_fn(|i| rng.gen_range(lo[i]..=hi[i]))
    };
    for _ in 0..8 {
        let x = point(rng);
        let f = x[0] * x[1] * x[2];
        let lower = oracle.envelope(x, Side::Lower).expect("inside");
        let upper = oracle.envelope(x, Side::Upper).expect("inside");
        rec.le("oracle.envelope_sandwich", lower / scale, f / scale, 1e-9);
        rec.le("oracle.envelope_sandwich", f / scale, upper / scale, 1e-9);
        let lower_dual = oracle.envelope_dual(x, Side::Lower).expect("inside");
        let upper_dual = oracle.envelope_dual(x, Side::Upper).expect("inside");
        rec.close(
            "oracle.primal_dual_agreement",
            lower,
            lower_dual,
            scale,
            1e-9,
        );
        rec.close(
            "oracle.primal_dual_agreement",
            upper,
            upper_dual,
            scale,
            1e-9,
        );

        let y = point(rng);
        let m: [f64; 3] = std::array::from_fn(|i| 0.5 * (x[i] + y[i]));
        let env = |p: [f64; 3], s: Side| oracle.envelope_dual(p, s).expect("inside");
        rec.le(
            "oracle.envelope_convexity",
            env(m, Side::Lower) / scale,
            0.5 * (env(x, Side::Lower) + env(y, Side::Lower)) / scale,
            1e-9,
        );
        rec.le(
            "oracle.envelope_convexity",
            0.5 * (env(x, Side::Upper) + env(y, Side::Upper)) / scale,
            env(m, Side::Upper) / scale,
            1e-9,
        );
    }

    let n = [9usize, 17, 33].map(|g| numeric_volume(ob, g).expect("odd grid"));
    let coarse = (n[0] - n[1]).abs();
    let fine = (n[1] - n[2]).abs();
    let whole = hull_volume(ob);
    rec.le(
        "oracle.simpson_refinement",
        fine / whole,
        coarse / whole,
        1e-12,
    );

    let mc = monte_carlo_volume(ob, config.monte_carlo_samples, config.seed ^ index as u64);
    let se = mc.std_error_at(whole);
    let z = (mc.volume - whole) / se.max(f64::MIN_POSITIVE);
    // per box at 5 sigma; the 3 sigma test is on the pooled estimate
    rec.record("oracle.monte_carlo_box", z.abs(), 5.0, || {
        format!("z = {z} ({} hits of {})", mc.hits, mc.samples)
    });
    (mc.volume - whole, se * se)
}

fn check_heuristics(rec: &mut Recorder, ob: &OmegaBox, rng: &mut ChaCha8Rng) {
    let mut params: Vec<HeuristicParams> = solver_profiles().to_vec();
    for _ in 0..2 {
        params.push(
            HeuristicParams::new(rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=0.5))
                .expect("in range"),
        );
    }
    for var in Var::ALL {
        let (a, b) = (ob.a(var), ob.b(var));
        let mid = 0.5 * (a + b);
        for p in &params {
            for k in 0..=8 {
                let x_hat = if k == 8 {
                    b
                } else {
                    a + (b - a) * k as f64 / 8.0
                };
                let point = heuristic_point(p, a, b, x_hat).expect("valid");
                rec.flag(
                    "heuristics.point_in_interval",
                    (a..=b).contains(&point),
                    || format!("{p}: {point} outside [{a}, {b}]"),
                );
                if p.clipping_inactive() {
                    let weighted = p.alpha * x_hat + (1.0 - p.alpha) * mid;
                    rec.close(
                        "heuristics.inactive_clipping",
                        point,
                        weighted,
                        b - a,
                        1e-15,
                    );
                }
                let r = regret(ob, var, point).expect("in range");
                rec.flag("heuristics.regret_nonnegative", r >= 0.0, || {
                    format!("{p}: regret {r}")
                });
            }
        }
        if var != Var::X1 {
            let scip = Solver::Scip.params();
            let at_mid = regret(ob, var, heuristic_point(&scip, a, b, mid).expect("valid"))
                .expect("in range");
            rec.flag("heuristics.scip_midpoint_regret", at_mid == 0.0, || {
                format!("regret {at_mid}")
            });
            let off = a + 0.3 * (b - a);
            let r = regret(ob, var, heuristic_point(&scip, a, b, off).expect("valid"))
                .expect("in range");
            rec.flag("heuristics.scip_midpoint_regret", r > 0.0, || {
                format!("regret {r} off midpoint")
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyConfig {
        VerifyConfig {
            boxes: 20,
            grid: 1001,
            volume_grid: 51,
            ..VerifyConfig::default()
        }
    }

    #[test]
    fn small_run_passes() {
        let s = run(&small());
        assert!(s.passed(), "{}", s.render());
        assert!(s.checks.iter().all(|c| c.evaluated > 0));
    }

    #[test]
    fn perturbed_volume_is_caught() {
        let s = run(&VerifyConfig {
            hull: perturbed_hull_volume,
            ..small()
        });
        assert!(!s.passed());
        let failing: Vec<_> = s.failing().map(|c| c.name).collect();
        assert_eq!(failing, vec!["volume.oracle_equivalence"]);
        assert!(s.render().contains("reproduce: tribranch verify --seed 42"));
    }

    #[test]
    fn report_is_deterministic() {
        let c = VerifyConfig {
            boxes: 3,
            ..small()
        };
        assert_eq!(run(&c).render(), run(&c).render());
    }

    #[test]
    fn only_runs_one_box() {
        let s = run(&VerifyConfig {
            only: Some(7),
            ..small()
        });
        assert_eq!(s.box_indices, vec![7]);
        assert!(s.passed(), "{}", s.render());
    }
}
