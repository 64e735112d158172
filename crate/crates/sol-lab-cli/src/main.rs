//! Command line front end for the sol-lab library.
//!
//! Exit status: 0 for a successful run with a definitive outcome, 1 when a
//! verification fails or a witness run stays inconclusive, 2 for usage,
//! validation, and I/O errors. Identical configurations produce
//! byte-identical reports.

mod args;
mod emit;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sol_lab::connections::{
    blocking_check, eval_curve, log_set, midpoint_set, BlockingReport, ConnectionCurve,
};
use sol_lab::lattice::{
    build_lattice, normalize_lattice, verify_presentation, LatticePresentation,
    PresentationReport,
};
use sol_lab::sol::{sol_exp, sol_log};
use sol_lab::util::ser_f64;
use sol_lab::witness::{certify_nonblockable, density_probe, ProbeBox};
use sol_lab::{CosetPoint, QuadRat, SemidirectLattice, SolPoint, Verdict, WitnessConfig};

use args::{
    default_threads, need, parse_box, parse_f64, parse_matrix, parse_point,
    parse_r_sequence, parse_usize, parse_window, pick, read_cosets, read_points,
    resolve_format, resolve_precision, JsonArgs, OutFormat,
};
use emit::{cell, csv_doc, json_doc, opt_cell, write_out};

const AFTER_HELP: &str = "\
Exit status: 0 success, 1 inconclusive or failed verification, 2 bad usage or I/O.

Examples:
  sol-lab lattice info --matrix 2,1,1,1
  sol-lab witness --matrix 2,1,1,1 --point 0,1,0.3 --imax 12
  sol-lab curves block --matrix 2,1,1,1 --point 0,1,0.3 --window 2,2,5 --midpoint-blockers 3
  sol-lab density --matrix 2,1,1,1 --eps 0.05 --window 13,13,2";

#[derive(Parser)]
#[command(
    name = "sol-lab",
    version,
    about = "Lattice quotients of Sol: eigenbasis data, connection curves, blocking \
             experiments, witness certification, translate density",
    after_help = AFTER_HELP
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build and check lattices from a unimodular integer matrix
    Lattice {
        #[command(subcommand)]
        cmd: LatticeCmd,
    },
    /// Connection curves from the identity coset to a coset point
    Curves {
        #[command(subcommand)]
        cmd: CurvesCmd,
    },
    /// Certify that a point's curve sequence is not blockable at scale
    Witness(WitnessArgs),
    /// Measure how densely lattice translates cover a box
    Density(DensityArgs),
    /// Sample every curve and write t,x,y,z tables for plotting
    ExportPlot(ExportArgs),
}

#[derive(Subcommand)]
enum LatticeCmd {
    /// Eigenvalue, embedding, and generator data of the lattice
    Info(LatticeInfoArgs),
    /// Check the defining relations of a presentation
    Verify(LatticeVerifyArgs),
    /// Shift a presentation so the height generator sits on the z axis
    Normalize(LatticeNormalizeArgs),
}

#[derive(Subcommand)]
enum CurvesCmd {
    /// Enumerate curve directions over the search window
    LogSet(CurveFamilyArgs),
    /// Deduplicated curve midpoints over the search window
    Midpoints(CurveFamilyArgs),
    /// Classify curves as blocked or evading against a blocker set
    Block(BlockArgs),
}

#[derive(clap::Args)]
struct Shared {
    /// JSON file of argument values keyed by flag name; flags win
    #[arg(long, value_name = "FILE")]
    json_args: Option<String>,
    /// Write the report to this path instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct LatticeInfoArgs {
    /// Integer matrix a,b,c,d with determinant 1 and trace over 2
    #[arg(long, value_name = "a,b,c,d", allow_hyphen_values = true)]
    matrix: Option<String>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(clap::Args)]
struct LatticeVerifyArgs {
    /// Integer matrix a,b,c,d with determinant 1 and trace over 2
    #[arg(long, value_name = "a,b,c,d", allow_hyphen_values = true)]
    matrix: Option<String>,
    /// JSON file with generators tau1, tau2, tau3; default is canonical
    #[arg(long, value_name = "FILE")]
    presentation: Option<String>,
    /// Residual tolerance for every relation [default: 1e-9]
    #[arg(long, value_name = "TOL")]
    tol: Option<String>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(clap::Args)]
struct LatticeNormalizeArgs {
    /// JSON file with generators tau1, tau2, tau3
    #[arg(long, value_name = "FILE")]
    presentation: Option<String>,
    /// Verify the normalized presentation against this matrix
    #[arg(long, value_name = "a,b,c,d", allow_hyphen_values = true)]
    matrix: Option<String>,
    /// Residual tolerance for the optional verification [default: 1e-9]
    #[arg(long, value_name = "TOL")]
    tol: Option<String>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(clap::Args)]
struct CurveFamilyArgs {
    /// Integer matrix a,b,c,d with determinant 1 and trace over 2
    #[arg(long, value_name = "a,b,c,d", allow_hyphen_values = true)]
    matrix: Option<String>,
    /// Coset representative x,y,z [default: 0,0,0]
    #[arg(long, value_name = "x,y,z", allow_hyphen_values = true)]
    point: Option<String>,
    /// Translate bounds P,Q,R for (p,q,r) [default: 3,3,1]
    #[arg(long, value_name = "P,Q,R")]
    window: Option<String>,
    /// Output format: json or csv
    #[arg(long, value_name = "FMT")]
    format: Option<String>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(clap::Args)]
struct BlockArgs {
    /// Integer matrix a,b,c,d with determinant 1 and trace over 2
    #[arg(long, value_name = "a,b,c,d", allow_hyphen_values = true)]
    matrix: Option<String>,
    /// Coset representative x,y,z [default: 0,0,0]
    #[arg(long, value_name = "x,y,z", allow_hyphen_values = true)]
    point: Option<String>,
    /// Translate bounds P,Q,R for (p,q,r) [default: 3,3,1]
    #[arg(long, value_name = "P,Q,R")]
    window: Option<String>,
    /// Interior t samples per curve [default: 33]
    #[arg(long, value_name = "N")]
    tgrid: Option<String>,
    /// Blocking radius in the pointwise metric [default: 1e-3]
    #[arg(long, value_name = "EPS")]
    eps: Option<String>,
    /// JSON file with an array of x,y,z blocker points
    #[arg(long, value_name = "FILE")]
    blockers: Option<String>,
    /// Use the midpoints of the first K height translates as blockers
    #[arg(long, value_name = "K")]
    midpoint_blockers: Option<String>,
    /// Worker thread count [default: available parallelism]
    #[arg(long, value_name = "N")]
    threads: Option<String>,
    /// Output format: json, or csv for the per-curve classification
    #[arg(long, value_name = "FMT")]
    format: Option<String>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(clap::Args)]
struct WitnessArgs {
    /// Integer matrix a,b,c,d with determinant 1 and trace over 2
    #[arg(long, value_name = "a,b,c,d", allow_hyphen_values = true)]
    matrix: Option<String>,
    /// Witness point x,y,z with exactly one of x, y zero
    #[arg(long, value_name = "x,y,z", allow_hyphen_values = true)]
    point: Option<String>,
    /// Number of height indices in the sequence [default: 12]
    #[arg(long, value_name = "N")]
    imax: Option<String>,
    /// Seed curve parameter in (0,1) [default: 0.5]
    #[arg(long, value_name = "T")]
    t1: Option<String>,
    /// Arithmetic mode, double or big50; SOL_LAB_PRECISION overrides
    #[arg(long, value_name = "MODE")]
    precision: Option<String>,
    /// Explicit increasing height indices, comma separated
    #[arg(long, value_name = "r1,r2,...", allow_hyphen_values = true)]
    r_sequence: Option<String>,
    /// Integer snap tolerance for residuals [default: by precision]
    #[arg(long, value_name = "TOL")]
    residual_tol: Option<String>,
    /// JSON file with x,y,z coset representatives [default: the point's coset]
    #[arg(long, value_name = "FILE")]
    cosets: Option<String>,
    /// Output format: json, or csv for the index table
    #[arg(long, value_name = "FMT")]
    format: Option<String>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(clap::Args)]
struct DensityArgs {
    /// Integer matrix a,b,c,d with determinant 1 and trace over 2
    #[arg(long, value_name = "a,b,c,d", allow_hyphen_values = true)]
    matrix: Option<String>,
    /// Probe region x0,x1,y0,y1,z0,z1 [default: unit box]
    #[arg(long = "box", value_name = "x0,x1,y0,y1,z0,z1", allow_hyphen_values = true)]
    probe_box: Option<String>,
    /// Coverage radius; the grid step is half of it [default: 0.05]
    #[arg(long, value_name = "EPS")]
    eps: Option<String>,
    /// Translate bounds P,Q,R for (p,q,r) [default: 40,40,4]
    #[arg(long, value_name = "P,Q,R")]
    window: Option<String>,
    /// Worker thread count [default: available parallelism]
    #[arg(long, value_name = "N")]
    threads: Option<String>,
    /// Record the minimal translate found for every grid target
    #[arg(long)]
    record_targets: bool,
    /// Output format: json, or csv for targets (with --record-targets) or misses
    #[arg(long, value_name = "FMT")]
    format: Option<String>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(clap::Args)]
struct ExportArgs {
    /// Integer matrix a,b,c,d with determinant 1 and trace over 2
    #[arg(long, value_name = "a,b,c,d", allow_hyphen_values = true)]
    matrix: Option<String>,
    /// Coset representative x,y,z [default: 0,0,0]
    #[arg(long, value_name = "x,y,z", allow_hyphen_values = true)]
    point: Option<String>,
    /// Translate bounds P,Q,R for (p,q,r) [default: 3,3,1]
    #[arg(long, value_name = "P,Q,R")]
    window: Option<String>,
    /// Interior t samples per curve; endpoints are always included [default: 33]
    #[arg(long, value_name = "N")]
    tgrid: Option<String>,
    /// Directory for one file per curve; omit for a combined table on stdout
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// JSON file of argument values keyed by flag name; flags win
    #[arg(long, value_name = "FILE")]
    json_args: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli.cmd) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Cmd) -> Result<ExitCode, String> {
    match cmd {
        Cmd::Lattice { cmd: LatticeCmd::Info(a) } => lattice_info(a),
        Cmd::Lattice { cmd: LatticeCmd::Verify(a) } => lattice_verify(a),
        Cmd::Lattice { cmd: LatticeCmd::Normalize(a) } => lattice_normalize(a),
        Cmd::Curves { cmd: CurvesCmd::LogSet(a) } => curves_log_set(a),
        Cmd::Curves { cmd: CurvesCmd::Midpoints(a) } => curves_midpoints(a),
        Cmd::Curves { cmd: CurvesCmd::Block(a) } => curves_block(a),
        Cmd::Witness(a) => witness(a),
        Cmd::Density(a) => density(a),
        Cmd::ExportPlot(a) => export_plot(a),
    }
}

fn err_s(e: sol_lab::SolError) -> String {
    e.to_string()
}

fn load_lattice(raw: &str) -> Result<Arc<SemidirectLattice>, String> {
    let m = parse_matrix(raw)?;
    build_lattice(&m).map(Arc::new).map_err(err_s)
}

fn matrix_out(lat: &SemidirectLattice) -> [[i64; 2]; 2] {
    let (a, b, c, d) = lat.matrix().entries();
    [[a, b], [c, d]]
}

fn read_presentation(path: &str) -> Result<LatticePresentation, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))
}

fn pick_threads(flag: &Option<String>, json: &JsonArgs) -> Result<usize, String> {
    let n = match pick(flag, json, "threads") {
        Some(s) => parse_usize("threads", &s)?,
        None => default_threads(),
    };
    if n == 0 {
        return Err("--threads: must be at least 1".into());
    }
    Ok(n)
}

#[derive(Serialize)]
struct WindowOut {
    pmax: i64,
    qmax: i64,
    rmax: i64,
}

impl WindowOut {
    fn of(w: &sol_lab::SearchWindow) -> Self {
        WindowOut { pmax: w.pmax, qmax: w.qmax, rmax: w.rmax }
    }
}

#[derive(Serialize)]
struct MatrixInfo {
    matrix: [[i64; 2]; 2],
    char_poly: String,
    discriminant: u64,
    #[serde(serialize_with = "ser_f64")]
    s: f64,
    lambda: QuadRat,
    lambda_inv: QuadRat,
    p12: QuadRat,
    p21: QuadRat,
    #[serde(serialize_with = "ser_f64")]
    p12_float: f64,
    #[serde(serialize_with = "ser_f64")]
    p21_float: f64,
    tau1: SolPoint,
    tau2: SolPoint,
    tau3: SolPoint,
}

fn lattice_info(a: LatticeInfoArgs) -> Result<ExitCode, String> {
    let j = JsonArgs::load(a.shared.json_args.as_deref(), &["matrix"])?;
    let lat = load_lattice(&need(&a.matrix, &j, "matrix")?)?;
    let pres = lat.canonical_presentation();
    let info = MatrixInfo {
        matrix: matrix_out(&lat),
        char_poly: format!("x^2-{}x+1", lat.matrix().trace()),
        discriminant: lat.discriminant(),
        s: lat.s(),
        lambda: lat.lambda().clone(),
        lambda_inv: lat.lambda_inv().clone(),
        p12: lat.p12().clone(),
        p21: lat.p21().clone(),
        p12_float: lat.p12_f(),
        p21_float: lat.p21_f(),
        tau1: pres.tau1,
        tau2: pres.tau2,
        tau3: pres.tau3,
    };
    write_out(a.shared.out.as_deref(), &json_doc(&info))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct VerifyOut {
    matrix: [[i64; 2]; 2],
    #[serde(serialize_with = "ser_f64")]
    tolerance: f64,
    report: PresentationReport,
}

fn lattice_verify(a: LatticeVerifyArgs) -> Result<ExitCode, String> {
    let j = JsonArgs::load(
        a.shared.json_args.as_deref(),
        &["matrix", "presentation", "tol"],
    )?;
    let lat = load_lattice(&need(&a.matrix, &j, "matrix")?)?;
    let pres = match pick(&a.presentation, &j, "presentation") {
        Some(path) => read_presentation(&path)?,
        None => lat.canonical_presentation(),
    };
    let tol = match pick(&a.tol, &j, "tol") {
        Some(s) => parse_f64("tol", &s)?,
        None => 1e-9,
    };
    let report = verify_presentation(&pres, lat.matrix(), tol).map_err(err_s)?;
    let pass = report.pass;
    let doc = VerifyOut { matrix: matrix_out(&lat), tolerance: tol, report };
    write_out(a.shared.out.as_deref(), &json_doc(&doc))?;
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

#[derive(Serialize)]
struct NormalizeOut {
    shift: SolPoint,
    presentation: LatticePresentation,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<PresentationReport>,
}

fn lattice_normalize(a: LatticeNormalizeArgs) -> Result<ExitCode, String> {
    let j = JsonArgs::load(
        a.shared.json_args.as_deref(),
        &["presentation", "matrix", "tol"],
    )?;
    let pres = read_presentation(&need(&a.presentation, &j, "presentation")?)?;
    let (shift, normalized) = normalize_lattice(&pres).map_err(err_s)?;
    let report = match pick(&a.matrix, &j, "matrix") {
        Some(raw) => {
            let lat = load_lattice(&raw)?;
            let tol = match pick(&a.tol, &j, "tol") {
                Some(s) => parse_f64("tol", &s)?,
                None => 1e-9,
            };
            Some(verify_presentation(&normalized, lat.matrix(), tol).map_err(err_s)?)
        }
        None => None,
    };
    let pass = report.as_ref().map(|r| r.pass).unwrap_or(true);
    let doc = NormalizeOut { shift, presentation: normalized, report };
    write_out(a.shared.out.as_deref(), &json_doc(&doc))?;
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

struct CurveFamily {
    lat: Arc<SemidirectLattice>,
    point: SolPoint,
    window: sol_lab::SearchWindow,
    coset: CosetPoint,
    format: OutFormat,
}

fn curve_family(a: &CurveFamilyArgs, tgrid: usize) -> Result<CurveFamily, String> {
    let j = JsonArgs::load(
        a.shared.json_args.as_deref(),
        &["matrix", "point", "window", "format"],
    )?;
    let lat = load_lattice(&need(&a.matrix, &j, "matrix")?)?;
    let point = match pick(&a.point, &j, "point") {
        Some(s) => parse_point("point", &s)?,
        None => SolPoint::identity(),
    };
    let window = parse_window(
        &pick(&a.window, &j, "window").unwrap_or_else(|| "3,3,1".into()),
        tgrid,
    )?;
    let format = resolve_format(pick(&a.format, &j, "format"))?;
    let coset = CosetPoint::from_float(lat.clone(), point);
    Ok(CurveFamily { lat, point, window, coset, format })
}

#[derive(Serialize)]
struct LogSetOut {
    matrix: [[i64; 2]; 2],
    point: SolPoint,
    window: WindowOut,
    count: usize,
    curves: Vec<ConnectionCurve>,
}

fn curves_log_set(a: CurveFamilyArgs) -> Result<ExitCode, String> {
    let fam = curve_family(&a, 1)?;
    let curves = log_set(&fam.coset, &fam.window).map_err(err_s)?;
    let doc = match fam.format {
        OutFormat::Json => json_doc(&LogSetOut {
            matrix: matrix_out(&fam.lat),
            point: fam.point,
            window: WindowOut::of(&fam.window),
            count: curves.len(),
            curves,
        }),
        OutFormat::Csv => csv_doc(
            "p,q,r,a1,a2,a3",
            &curves
                .iter()
                .map(|c| {
                    format!(
                        "{},{},{},{},{},{}",
                        c.p,
                        c.q,
                        c.r,
                        cell(c.direction.a1),
                        cell(c.direction.a2),
                        cell(c.direction.a3)
                    )
                })
                .collect::<Vec<_>>(),
        ),
    };
    write_out(a.shared.out.as_deref(), &doc)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct MidpointsOut {
    matrix: [[i64; 2]; 2],
    point: SolPoint,
    window: WindowOut,
    count: usize,
    midpoints: Vec<SolPoint>,
}

fn curves_midpoints(a: CurveFamilyArgs) -> Result<ExitCode, String> {
    let fam = curve_family(&a, 1)?;
    let mids = midpoint_set(&fam.coset, &fam.window).map_err(err_s)?;
    let doc = match fam.format {
        OutFormat::Json => json_doc(&MidpointsOut {
            matrix: matrix_out(&fam.lat),
            point: fam.point,
            window: WindowOut::of(&fam.window),
            count: mids.len(),
            midpoints: mids,
        }),
        OutFormat::Csv => csv_doc(
            "x,y,z",
            &mids
                .iter()
                .map(|p| format!("{},{},{}", cell(p.x), cell(p.y), cell(p.z)))
                .collect::<Vec<_>>(),
        ),
    };
    write_out(a.shared.out.as_deref(), &doc)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct BlockOut {
    matrix: [[i64; 2]; 2],
    point: SolPoint,
    window: WindowOut,
    blocker_count: usize,
    blocked: usize,
    evading: usize,
    report: BlockingReport,
}

fn curves_block(a: BlockArgs) -> Result<ExitCode, String> {
    let j = JsonArgs::load(
        a.shared.json_args.as_deref(),
        &[
            "matrix",
            "point",
            "window",
            "tgrid",
            "eps",
            "blockers",
            "midpoint_blockers",
            "threads",
            "format",
        ],
    )?;
    let lat = load_lattice(&need(&a.matrix, &j, "matrix")?)?;
    let point = match pick(&a.point, &j, "point") {
        Some(s) => parse_point("point", &s)?,
        None => SolPoint::identity(),
    };
    let tgrid = match pick(&a.tgrid, &j, "tgrid") {
        Some(s) => parse_usize("tgrid", &s)?,
        None => 33,
    };
    let window = parse_window(
        &pick(&a.window, &j, "window").unwrap_or_else(|| "3,3,1".into()),
        tgrid,
    )?;
    let eps = match pick(&a.eps, &j, "eps") {
        Some(s) => parse_f64("eps", &s)?,
        None => 1e-3,
    };
    let threads = pick_threads(&a.threads, &j)?;
    let format = resolve_format(pick(&a.format, &j, "format"))?;
    let coset = CosetPoint::from_float(lat.clone(), point);

    let blockers_file = pick(&a.blockers, &j, "blockers");
    let midpoint_k = pick(&a.midpoint_blockers, &j, "midpoint_blockers");
    let blockers = match (blockers_file, midpoint_k) {
        (Some(_), Some(_)) => {
            return Err("--blockers and --midpoint-blockers are mutually exclusive".into())
        }
        (Some(path), None) => read_points(&path)?,
        (None, Some(k)) => {
            let k = parse_usize("midpoint-blockers", &k)?;
            if k == 0 {
                return Err("--midpoint-blockers: must be at least 1".into());
            }
            // midpoints of the curves toward the first k height translates
            (1..=k as i64)
                .map(|r| {
                    let target = point.mul(&lat.embed_float(0, 0, r));
                    sol_exp(&sol_log(&target), 0.5)
                })
                .collect()
        }
        (None, None) => {
            return Err("supply --blockers FILE or --midpoint-blockers K".into())
        }
    };

    let report = blocking_check(&coset, &blockers, eps, &window, threads).map_err(err_s)?;
    let doc = match format {
        OutFormat::Json => json_doc(&BlockOut {
            matrix: matrix_out(&lat),
            point,
            window: WindowOut::of(&window),
            blocker_count: blockers.len(),
            blocked: report.blocked_curves.len(),
            evading: report.evading_curves.len(),
            report,
        }),
        OutFormat::Csv => {
            let mut rows = Vec::new();
            for h in &report.blocked_curves {
                rows.push(format!(
                    "blocked,{},{},{},{},{}",
                    h.p,
                    h.q,
                    h.r,
                    cell(h.t),
                    h.blocker
                ));
            }
            for (p, q, r) in &report.evading_curves {
                rows.push(format!("evading,{p},{q},{r},,"));
            }
            csv_doc("status,p,q,r,t,blocker", &rows)
        }
    };
    write_out(a.shared.out.as_deref(), &doc)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct WitnessOut {
    matrix: [[i64; 2]; 2],
    point: SolPoint,
    report: sol_lab::WitnessReport,
}

fn witness(a: WitnessArgs) -> Result<ExitCode, String> {
    let j = JsonArgs::load(
        a.shared.json_args.as_deref(),
        &[
            "matrix",
            "point",
            "imax",
            "t1",
            "precision",
            "r_sequence",
            "residual_tol",
            "cosets",
            "format",
        ],
    )?;
    let lat = load_lattice(&need(&a.matrix, &j, "matrix")?)?;
    let point = parse_point("point", &need(&a.point, &j, "point")?)?;
    let imax = match pick(&a.imax, &j, "imax") {
        Some(s) => parse_usize("imax", &s)?,
        None => 12,
    };
    if imax == 0 {
        return Err("--imax: must be at least 1".into());
    }
    let t1 = match pick(&a.t1, &j, "t1") {
        Some(s) => parse_f64("t1", &s)?,
        None => 0.5,
    };
    let precision = resolve_precision(pick(&a.precision, &j, "precision"))?;
    let format = resolve_format(pick(&a.format, &j, "format"))?;

    let mut cfg =
        WitnessConfig::new(lat.clone(), point, imax, t1, precision).map_err(err_s)?;
    if let Some(raw) = pick(&a.r_sequence, &j, "r_sequence") {
        cfg = cfg.with_r_sequence(parse_r_sequence(&raw)?).map_err(err_s)?;
    }
    if let Some(raw) = pick(&a.residual_tol, &j, "residual_tol") {
        cfg = cfg
            .with_residual_tol(parse_f64("residual-tol", &raw)?)
            .map_err(err_s)?;
    }
    let cosets = match pick(&a.cosets, &j, "cosets") {
        Some(path) => read_cosets(&path, &lat)?,
        None => vec![CosetPoint::from_float(lat.clone(), point)],
    };

    let report = certify_nonblockable(&cfg, &cosets).map_err(err_s)?;
    let verdict = report.verdict;
    let doc = match format {
        OutFormat::Json => {
            json_doc(&WitnessOut { matrix: matrix_out(&lat), point, report })
        }
        OutFormat::Csv => csv_doc(
            "index,r,t,third,rtilde,integer,ratio_error,ratio_bound",
            &report
                .indices
                .iter()
                .enumerate()
                .map(|(i, rec)| {
                    let int = match rec.integer {
                        Some(b) => b.to_string(),
                        None => String::new(),
                    };
                    format!(
                        "{},{},{},{},{},{},{},{}",
                        i + 1,
                        rec.r,
                        opt_cell(rec.t),
                        opt_cell(rec.third),
                        opt_cell(rec.rtilde),
                        int,
                        opt_cell(rec.ratio_error),
                        opt_cell(rec.ratio_bound)
                    )
                })
                .collect::<Vec<_>>(),
        ),
    };
    write_out(a.shared.out.as_deref(), &doc)?;
    Ok(match verdict {
        Verdict::NonBlockedAtScale => ExitCode::SUCCESS,
        Verdict::Inconclusive => ExitCode::FAILURE,
    })
}

#[derive(Serialize)]
struct DensityOut {
    matrix: [[i64; 2]; 2],
    #[serde(rename = "box")]
    probe_box: ProbeBox,
    report: sol_lab::witness::DensityReport,
}

fn density(a: DensityArgs) -> Result<ExitCode, String> {
    let j = JsonArgs::load(
        a.shared.json_args.as_deref(),
        &["matrix", "box", "eps", "window", "threads", "record_targets", "format"],
    )?;
    let lat = load_lattice(&need(&a.matrix, &j, "matrix")?)?;
    let bx = parse_box(
        &pick(&a.probe_box, &j, "box").unwrap_or_else(|| "0,1,0,1,0,1".into()),
    )?;
    let eps = match pick(&a.eps, &j, "eps") {
        Some(s) => parse_f64("eps", &s)?,
        None => 0.05,
    };
    let window = parse_window(
        &pick(&a.window, &j, "window").unwrap_or_else(|| "40,40,4".into()),
        1,
    )?;
    let threads = pick_threads(&a.threads, &j)?;
    let record = a.record_targets || j.flag_true("record_targets");
    let format = resolve_format(pick(&a.format, &j, "format"))?;

    let report = density_probe(&lat, &bx, eps, &window, threads, record).map_err(err_s)?;
    let doc = match format {
        OutFormat::Json => {
            json_doc(&DensityOut { matrix: matrix_out(&lat), probe_box: bx, report })
        }
        OutFormat::Csv => match &report.targets {
            Some(targets) => csv_doc(
                "x,z,p,q,r,err,column_size",
                &targets
                    .iter()
                    .map(|t| {
                        format!(
                            "{},{},{},{},{},{},{}",
                            cell(t.x),
                            cell(t.z),
                            t.p,
                            t.q,
                            t.r,
                            cell(t.err),
                            t.column_size
                        )
                    })
                    .collect::<Vec<_>>(),
            ),
            None => csv_doc(
                "x,z,column_size",
                &report
                    .misses
                    .iter()
                    .map(|m| format!("{},{},{}", cell(m.x), cell(m.z), m.column_size))
                    .collect::<Vec<_>>(),
            ),
        },
    };
    write_out(a.shared.out.as_deref(), &doc)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ExportSummary {
    dir: String,
    curves: usize,
    samples_per_curve: usize,
}

fn export_plot(a: ExportArgs) -> Result<ExitCode, String> {
    let j = JsonArgs::load(
        a.json_args.as_deref(),
        &["matrix", "point", "window", "tgrid"],
    )?;
    let lat = load_lattice(&need(&a.matrix, &j, "matrix")?)?;
    let point = match pick(&a.point, &j, "point") {
        Some(s) => parse_point("point", &s)?,
        None => SolPoint::identity(),
    };
    let tgrid = match pick(&a.tgrid, &j, "tgrid") {
        Some(s) => parse_usize("tgrid", &s)?,
        None => 33,
    };
    let window = parse_window(
        &pick(&a.window, &j, "window").unwrap_or_else(|| "3,3,1".into()),
        tgrid.max(1),
    )?;
    let coset = CosetPoint::from_float(lat, point);
    let curves = log_set(&coset, &window).map_err(err_s)?;

    let steps = tgrid + 1;
    let sample = |c: &ConnectionCurve| -> Result<Vec<(f64, SolPoint)>, String> {
        (0..=steps)
            .map(|k| {
                let t = k as f64 / steps as f64;
                eval_curve(c, t).map(|p| (t, p)).map_err(err_s)
            })
            .collect()
    };

    match a.out {
        Some(dir) => {
            std::fs::create_dir_all(&dir)
                .map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
            for c in &curves {
                let rows = sample(c)?
                    .into_iter()
                    .map(|(t, p)| {
                        format!("{},{},{},{}", cell(t), cell(p.x), cell(p.y), cell(p.z))
                    })
                    .collect::<Vec<_>>();
                let path = dir.join(format!("curve_{}_{}_{}.csv", c.p, c.q, c.r));
                std::fs::write(&path, csv_doc("t,x,y,z", &rows))
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
            let summary = ExportSummary {
                dir: dir.display().to_string(),
                curves: curves.len(),
                samples_per_curve: steps + 1,
            };
            print!("{}", json_doc(&summary));
        }
        None => {
            let mut rows = Vec::new();
            for c in &curves {
                for (t, p) in sample(c)? {
                    rows.push(format!(
                        "{},{},{},{},{},{},{}",
                        c.p,
                        c.q,
                        c.r,
                        cell(t),
                        cell(p.x),
                        cell(p.y),
                        cell(p.z)
                    ));
                }
            }
            print!("{}", csv_doc("p,q,r,t,x,y,z", &rows));
        }
    }
    Ok(ExitCode::SUCCESS)
}
