//! Command-line front end. Variables are always reported in the caller's
//! labeling, with the Ω permutation printed alongside.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tribranch::bounds::{classify_case, CaseId, OmegaBox, Var};
use tribranch::branching::{optimal_point, rank_variables, tv_profile, BranchDecision};
use tribranch::heuristics::{heuristic_point, regret, HeuristicParams, Solver};
use tribranch::instance::{generate, InstanceFile, NamedBox};
use tribranch::verify::{self, perturbed_hull_volume, VerifyConfig};
use tribranch::volume::hull_volume;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "tribranch",
    version,
    about = "Hull volumes and volume-optimal branching for x1*x2*x3"
)]
pub struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Seed for generated boxes and sampling.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hull volume, Ω permutation and case of each box.
    Volume(InputArgs),
    /// Optimal branching point for one variable, or the full variable ranking.
    Branch {
        #[command(flatten)]
        input: InputArgs,
        /// `auto` ranks all three variables; otherwise a label 1, 2 or 3.
        #[arg(long, default_value = "auto")]
        var: VarChoice,
    },
    /// Total child volume as a function of the branching point.
    Curve {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "1")]
        var: VarChoice,
        /// Evenly spaced points, endpoints included.
        #[arg(long, default_value_t = 101)]
        samples: usize,
        /// Which box of the instance file (0-based).
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regret of a solver's branching-point rule against the optimal point.
    Compare {
        #[command(flatten)]
        input: InputArgs,
        /// SCIP, ANTIGONE, BARON or COUENNE.
        #[arg(long, conflicts_with_all = ["alpha", "beta"], required_unless_present_all = ["alpha", "beta"])]
        profile: Option<String>,
        #[arg(long, requires = "beta")]
        alpha: Option<f64>,
        #[arg(long, requires = "alpha")]
        beta: Option<f64>,
        /// Relaxation solutions swept uniformly over each interval.
        #[arg(long, default_value_t = 101)]
        xhat_samples: usize,
    },
    /// Run the randomized invariant suite.
    Verify {
        #[arg(long, default_value_t = 1000)]
        boxes: usize,
        /// Points in the brute-force argmin grids.
        #[arg(long, default_value_t = 10001)]
        grid: usize,
        /// Odd Simpson grid for the oracle volume.
        #[arg(long, default_value_t = 101)]
        volume_grid: usize,
        /// Upper limit for generated bounds.
        #[arg(long, default_value_t = 10.0)]
        max: f64,
        /// Only check this box index.
        #[arg(long)]
        only: Option<usize>,
        /// Test the suite against a corrupted volume formula.
        #[arg(long, hide = true)]
        mutate_volume: bool,
    },
    /// Write a seeded random instance file.
    Gen {
        #[arg(long, default_value_t = 10)]
        boxes: usize,
        /// Bounds are drawn from [0, MAX].
        #[arg(long, default_value_t = 10.0)]
        max: f64,
        /// Keep only boxes of case 1 or 2.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        force_case: Option<u8>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Instance file (JSON); `-` reads stdin.
    #[arg(required_unless_present = "a", conflicts_with = "a")]
    input: Option<PathBuf>,
    /// Lower bounds of a single box, e.g. `--a 0,0,0`.
    #[arg(
        long,
        value_delimiter = ',',
        requires = "b",
        allow_negative_numbers = true
    )]
    a: Option<Vec<f64>>,
    /// Upper bounds of a single box.
    #[arg(
        long,
        value_delimiter = ',',
        requires = "a",
        allow_negative_numbers = true
    )]
    b: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarChoice {
    Auto,
    Label(Var),
}

impl std::str::FromStr for VarChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(VarChoice::Auto);
        }
        let digits = s.trim_start_matches(['x', 'X']);
        digits
            .parse()
            .ok()
            .and_then(Var::from_label)
            .map(VarChoice::Label)
            .ok_or_else(|| format!("expected auto, 1, 2 or 3, got {s:?}"))
    }
}

/// An error that maps to exit code 2.
#[derive(Debug)]
pub struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn input_error(msg: impl Into<String>) -> InputError {
    InputError(msg.into())
}

fn load(input: &InputArgs) -> Result<Vec<NamedBox>, InputError> {
    let file = match (&input.input, &input.a, &input.b) {
        (_, Some(a), Some(b)) => {
            let triple = |v: &[f64], flag: &str| -> Result<[f64; 3], InputError> {
                v.try_into().map_err(|_| {
                    input_error(format!("{flag} needs exactly 3 values, got {}", v.len()))
                })
            };
            InstanceFile {
                boxes: vec![tribranch::instance::BoxSpec {
                    name: None,
                    a: triple(a, "--a")?,
                    b: triple(b, "--b")?,
                }],
            }
        }
        (Some(path), _, _) => {
            let text = if path.as_os_str() == "-" {
                let mut s = String::new();
                io::stdin()
                    .read_to_string(&mut s)
                    .map_err(|e| input_error(format!("cannot read stdin: {e}")))?;
                s
            } else {
                fs::read_to_string(path)
                    .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?
            };
            InstanceFile::from_json(&text).map_err(|e| input_error(e.to_string()))?
        }
        _ => return Err(input_error("no input: pass an instance file or --a/--b")),
    };
    let boxes = file.validate().map_err(|e| input_error(e.to_string()))?;
    if boxes.is_empty() {
        return Err(input_error("instance file has no boxes"));
    }
    Ok(boxes)
}

fn write_output(out: Option<&PathBuf>, text: &str) -> Result<(), InputError> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| input_error(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `(x1,x3,x2)`: the caller's labels in Ω order.
fn perm_text(ob: &OmegaBox) -> String {
    let labels: Vec<String> = ob.perm().iter().map(|v| v.to_string()).collect();
    format!("({})", labels.join(","))
}

fn perm_json(ob: &OmegaBox) -> Value {
    json!(ob.perm().iter().map(|v| v.label()).collect::<Vec<_>>())
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

pub fn run(cli: Cli) -> Result<i32, InputError> {
    match &cli.command {
        Command::Volume(input) => {
            let boxes = load(input)?;
            print!("{}", volume_report(&boxes, cli.format));
            Ok(EXIT_OK)
        }
        Command::Branch { input, var } => {
            let boxes = load(input)?;
            print!("{}", branch_report(&boxes, *var, cli.format));
            Ok(EXIT_OK)
        }
        Command::Curve {
            input,
            var,
            samples,
            index,
            out,
        } => {
            let boxes = load(input)?;
            let nb = boxes.get(*index).ok_or_else(|| {
                input_error(format!(
                    "box index {index} out of range ({} boxes)",
                    boxes.len()
                ))
            })?;
            let VarChoice::Label(v) = var else {
                return Err(input_error("curve needs --var 1, 2 or 3"));
            };
            let text = curve_report(nb, *v, *samples, cli.format)?;
            write_output(out.as_ref(), &text)?;
            Ok(EXIT_OK)
        }
        Command::Compare {
            input,
            profile,
            alpha,
            beta,
            xhat_samples,
        } => {
            let params = match (profile, alpha, beta) {
                (Some(name), _, _) => {
                    Solver::from_name(name).map(Solver::params).ok_or_else(|| {
                        let known: Vec<_> = Solver::ALL.iter().map(|s| s.name()).collect();
                        input_error(format!(
                            "unknown profile {name:?}; known: {}",
                            known.join(", ")
                        ))
                    })?
                }
                (None, Some(a), Some(b)) => {
                    HeuristicParams::new(*a, *b).map_err(|e| input_error(e.to_string()))?
                }
                _ => return Err(input_error("pass --profile or both --alpha and --beta")),
            };
            if *xhat_samples < 1 {
                return Err(input_error("--xhat-samples must be at least 1"));
            }
            let boxes = load(input)?;
            print!(
                "{}",
                compare_report(&boxes, &params, *xhat_samples, cli.format)
            );
            Ok(EXIT_OK)
        }
        Command::Verify {
            boxes,
            grid,
            volume_grid,
            max,
            only,
            mutate_volume,
        } => {
            if *boxes < 1 {
                return Err(input_error("--boxes must be at least 1"));
            }
            if *grid < 3 {
                return Err(input_error("--grid must be at least 3"));
            }
            if *volume_grid < 9 || volume_grid % 2 == 0 {
                return Err(input_error("--volume-grid must be odd and at least 9"));
            }
            if !(*max > 0.0 && max.is_finite()) {
                return Err(input_error("--max must be positive"));
            }
            let config = VerifyConfig {
                boxes: *boxes,
                seed: cli.seed,
                grid: *grid,
                volume_grid: *volume_grid,
                max_bound: *max,
                only: *only,
                hull: if *mutate_volume {
                    perturbed_hull_volume
                } else {
                    hull_volume
                },
                ..VerifyConfig::default()
            };
            let summary = verify::run(&config);
            print!("{}", summary.render());
            Ok(if summary.passed() {
                EXIT_OK
            } else {
                EXIT_FAILED
            })
        }
        Command::Gen {
            boxes,
            max,
            force_case,
            out,
        } => {
            if *boxes < 1 {
                return Err(input_error("--boxes must be at least 1"));
            }
            if !(*max > 0.0 && max.is_finite()) {
                return Err(input_error("--max must be positive"));
            }
            let case = force_case.map(|c| if c == 1 { CaseId::Case1 } else { CaseId::Case2 });
            let file = generate(*boxes, cli.seed, *max, case);
            write_output(out.as_ref(), &file.to_json())?;
            Ok(EXIT_OK)
        }
    }
}

fn volume_report(boxes: &[NamedBox], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Text => {
            for nb in boxes {
                let ob = &nb.omega;
                let _ = writeln!(
                    out,
                    "{}: volume={} case={} omega={}",
                    nb.name,
                    hull_volume(ob),
                    classify_case(ob),
                    perm_text(ob)
                );
            }
        }
        Format::Csv => {
            out.push_str("box,volume,case,omega\n");
            for nb in boxes {
                let ob = &nb.omega;
                let perm: Vec<String> = ob.perm().iter().map(|v| v.label().to_string()).collect();
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    csv_field(&nb.name),
                    num(hull_volume(ob)),
                    classify_case(ob),
                    perm.join(" ")
                );
            }
        }
        Format::Json => {
            let rows: Vec<Value> = boxes
                .iter()
                .map(|nb| {
                    json!({
                        "box": nb.name,
                        "volume": hull_volume(&nb.omega),
                        "case": classify_case(&nb.omega).to_string(),
                        "omega": perm_json(&nb.omega),
                    })
                })
                .collect();
            out = json_text(&Value::Array(rows));
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn decision_json(d: &BranchDecision) -> Value {
    json!({
        "variable": d.variable.label(),
        "omega_variable": d.omega_variable.label(),
        "point": d.point,
        "candidate": d.candidate.to_string(),
        "left_volume": d.child_volumes.left,
        "right_volume": d.child_volumes.right,
        "total_volume": d.child_volumes.total,
    })
}

fn branch_report(boxes: &[NamedBox], var: VarChoice, format: Format) -> String {
    // (box, rank, decision); rank is None for a single requested variable
    let mut rows: Vec<(&NamedBox, Option<usize>, BranchDecision)> = Vec::new();
    for nb in boxes {
        match var {
            VarChoice::Auto => {
                for (k, d) in rank_variables(&nb.omega).entries.into_iter().enumerate() {
                    rows.push((nb, Some(k + 1), d));
                }
            }
            VarChoice::Label(orig) => {
                rows.push((
                    nb,
                    None,
                    optimal_point(&nb.omega, nb.omega.omega_label(orig)),
                ));
            }
        }
    }
    let mut out = String::new();
    match format {
        Format::Text => {
            for nb in boxes {
                let ob = &nb.omega;
                let _ = writeln!(
                    out,
                    "{}: case={} omega={} volume={}",
                    nb.name,
                    classify_case(ob),
                    perm_text(ob),
                    hull_volume(ob)
                );
                for (_, rank, d) in rows.iter().filter(|r| std::ptr::eq(r.0, nb)) {
                    let prefix = rank.map_or(String::new(), |r| format!("rank {r}: "));
                    let _ = writeln!(
                        out,
                        "  {prefix}{} (omega {}) point={} candidate={} total={} left={} right={}",
                        d.variable,
                        d.omega_variable,
                        d.point,
                        d.candidate,
                        d.child_volumes.total,
                        d.child_volumes.left,
                        d.child_volumes.right
                    );
                }
                if var == VarChoice::Auto {
                    let best = rank_variables(ob);
                    let best = best.best();
                    let _ = writeln!(out, "  recommended: {} at {}", best.variable, best.point);
                }
            }
        }
        Format::Csv => {
            out.push_str("box,rank,variable,omega_variable,point,candidate,left_volume,right_volume,total_volume\n");
            for (nb, rank, d) in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    csv_field(&nb.name),
                    rank.map_or(String::new(), |r| r.to_string()),
                    d.variable.label(),
                    d.omega_variable.label(),
                    num(d.point),
                    d.candidate,
                    num(d.child_volumes.left),
                    num(d.child_volumes.right),
                    num(d.child_volumes.total)
                );
            }
        }
        Format::Json => {
            let items: Vec<Value> = boxes
                .iter()
                .map(|nb| {
                    let ob = &nb.omega;
                    let decisions: Vec<Value> = rows
                        .iter()
                        .filter(|r| std::ptr::eq(r.0, nb))
                        .map(|r| decision_json(&r.2))
                        .collect();
                    let mut v = json!({
                        "box": nb.name,
                        "case": classify_case(ob).to_string(),
                        "omega": perm_json(ob),
                        "volume": hull_volume(ob),
                    });
                    if var == VarChoice::Auto {
                        let best = rank_variables(ob);
                        v["ranking"] = Value::Array(decisions);
                        v["recommended"] = decision_json(best.best());
                    } else {
                        v["decision"] = decisions.into_iter().next().expect("one decision");
                    }
                    v
                })
                .collect();
            out = json_text(&Value::Array(items));
        }
    }
    out
}

fn curve_report(
    nb: &NamedBox,
    var: Var,
    samples: usize,
    format: Format,
) -> Result<String, InputError> {
    if samples < 2 {
        return Err(input_error("--samples must be at least 2"));
    }
    let ob = &nb.omega;
    let profile =
        tv_profile(ob, ob.omega_label(var), samples).map_err(|e| input_error(e.to_string()))?;
    let piece = |p: &tribranch::branching::ProfilePoint| {
        p.piece.map_or("NA".to_string(), |x| x.to_string())
    };
    let mut out = String::new();
    match format {
        Format::Json => {
            let rows: Vec<Value> = profile
                .iter()
                .map(|p| json!({"c": p.c, "total_volume": p.total_volume, "piece": piece(p)}))
                .collect();
            out = json_text(&Value::Array(rows));
        }
        // the curve is tabular, so text means CSV
        Format::Text | Format::Csv => {
            out.push_str("c,total_volume,piece\n");
            for p in &profile {
                let _ = writeln!(out, "{},{},{}", num(p.c), num(p.total_volume), piece(p));
            }
        }
    }
    Ok(out)
}

struct CompareRow<'a> {
    nb: &'a NamedBox,
    decision: BranchDecision,
    mean: f64,
    max: f64,
    worst_x_hat: f64,
}

fn compare_report(
    boxes: &[NamedBox],
    params: &HeuristicParams,
    samples: usize,
    format: Format,
) -> String {
    let mut rows = Vec::new();
    for nb in boxes {
        let ob = &nb.omega;
        for orig in Var::ALL {
            let var = ob.omega_label(orig);
            let (a, b) = (ob.a(var), ob.b(var));
            let mut sum = 0.0;
            let mut max = 0.0;
            let mut worst_x_hat = a;
            for k in 0..samples {
                let x_hat = if samples == 1 {
                    0.5 * (a + b)
                } else if k + 1 == samples {
                    b
                } else {
                    a + (b - a) * k as f64 / (samples - 1) as f64
                };
                let point = heuristic_point(params, a, b, x_hat).expect("validated parameters");
                let r = regret(ob, var, point).expect("heuristic point lies in the interval");
                sum += r;
                if r > max {
                    max = r;
                    worst_x_hat = x_hat;
                }
            }
            rows.push(CompareRow {
                nb,
                decision: optimal_point(ob, var),
                mean: sum / samples as f64,
                max,
                worst_x_hat,
            });
        }
    }
    let mut out = String::new();
    match format {
        Format::Text => {
            let _ = writeln!(out, "rule: {params}, {samples} x_hat samples per variable");
            for r in &rows {
                let d = &r.decision;
                if d.variable == Var::X1 {
                    let _ = writeln!(out, "{}: omega={}", r.nb.name, perm_text(&r.nb.omega));
                }
                let _ = writeln!(
                    out,
                    "  {}: optimal={} mean_regret={} max_regret={} (x_hat={}) relative_max={}",
                    d.variable,
                    d.point,
                    r.mean,
                    r.max,
                    r.worst_x_hat,
                    r.max / d.child_volumes.total
                );
            }
        }
        Format::Csv => {
            out.push_str("box,variable,omega_variable,optimal_point,optimal_total,mean_regret,max_regret,worst_x_hat\n");
            for r in &rows {
                let d = &r.decision;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    csv_field(&r.nb.name),
                    d.variable.label(),
                    d.omega_variable.label(),
                    num(d.point),
                    num(d.child_volumes.total),
                    num(r.mean),
                    num(r.max),
                    num(r.worst_x_hat)
                );
            }
        }
        Format::Json => {
            let items: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "box": r.nb.name,
                        "variable": r.decision.variable.label(),
                        "omega_variable": r.decision.omega_variable.label(),
                        "optimal_point": r.decision.point,
                        "optimal_total": r.decision.child_volumes.total,
                        "mean_regret": r.mean,
                        "max_regret": r.max,
                        "worst_x_hat": r.worst_x_hat,
                    })
                })
                .collect();
            out = json_text(&json!({
                "alpha": params.alpha,
                "beta": params.beta,
                "profile": params.name,
                "rows": items,
            }));
        }
    }
    out
}
