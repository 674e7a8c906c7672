//! osc: oscillation seminorms, A1 constants, decompositions, and the
//! reproduction tables for the library's closed-form examples.
//!
//! Exit codes: 0 success, 1 numerical failure (diagnostic on stderr),
//! 2 usage error. `reproduce` exits 0 only if every table row passes its
//! tolerance. All floats print with 12 significant digits so identical runs
//! produce identical bytes.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use osc_core::approx::{
    convolution_error, decreasing_rearrangement, k_of_r, mollify, truncation_sweep, KernelShape,
    MollifierSpec,
};
use osc_core::decompose::blo_upper_decomposition;
use osc_core::distance::sigma;
use osc_core::domain::{parse_config, uniform_grid};
use osc_core::oscillation::{blo_seminorm, bmo_seminorm};
use osc_core::parse::parse_func_expr;
use osc_core::report::{fmt_sig12, sweep_to_csv, to_json};
use osc_core::weights::{a1_constant, a1_membership, gr_a1_closed_form};
use osc_core::{
    make_interval, FuncExpr, GridFunction, Interval, JumpSpec, NumericConfig, OscError,
};

#[derive(Parser)]
#[command(
    name = "osc",
    version,
    about = "Oscillation seminorms, A1 weights, and the operators between them"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Estimate an oscillation seminorm of a function
    Report(ReportArgs),
    /// Estimate the Muckenhoupt A1 constant of a weight
    A1(PlainArgs),
    /// Bracket the distance-to-bounded quantity sigma
    Sigma(PlainArgs),
    /// Decompose a function as alpha log(Mg) + bounded
    Decompose(PlainArgs),
    /// Residual seminorms of f minus its truncations at levels k
    TruncationSweep(SweepArgs),
    /// Sample the mollified function on a uniform grid
    Mollify(MollifyArgs),
    /// Sample the decreasing rearrangement on a uniform grid
    Rearrange(PlainArgs),
    /// Regenerate a closed-form example table and check tolerances
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct FnArgs {
    /// Function expression: neglog, logneglog, neglogpow(r), jumpeta,
    /// const:c, trunc(f, k), sum(f, g), scale(f, c), neg(f), expscale(f, mu)
    #[arg(long = "fn", value_name = "EXPR")]
    func: String,
    /// Ambient interval endpoints
    #[arg(
        long,
        num_args = 2,
        value_names = ["LO", "HI"],
        default_values_t = [0.0, 1.0],
        allow_negative_numbers = true
    )]
    interval: Vec<f64>,
}

#[derive(Args)]
struct CfgArgs {
    /// Override the search grid size
    #[arg(long, value_name = "N")]
    grid_size: Option<usize>,
    /// Override the A1 membership cap
    #[arg(long, value_name = "C")]
    cap: Option<f64>,
    /// Config file with key=value lines
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct OutArgs {
    /// Write output here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output encoding
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct PlainArgs {
    #[command(flatten)]
    f: FnArgs,
    #[command(flatten)]
    cfg: CfgArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    f: FnArgs,
    /// Which oscillation seminorm
    #[arg(long, value_enum, default_value_t = Kind::Blo)]
    kind: Kind,
    #[command(flatten)]
    cfg: CfgArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    f: FnArgs,
    /// Increasing truncation levels
    #[arg(
        long = "k",
        num_args = 1..,
        value_name = "K",
        default_values_t = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    )]
    ks: Vec<f64>,
    #[command(flatten)]
    cfg: CfgArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct MollifyArgs {
    #[command(flatten)]
    f: FnArgs,
    /// Mollifier radius
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// Kernel shape
    #[arg(long, value_enum, default_value_t = Kernel::Triangle)]
    kernel: Kernel,
    #[command(flatten)]
    cfg: CfgArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Example table to regenerate
    #[arg(value_enum)]
    id: ExampleId,
    /// Levels k, for the examples parameterized by k
    #[arg(long = "k", num_args = 1.., value_name = "K")]
    ks: Vec<f64>,
    /// Weight powers r, for the examples parameterized by r
    #[arg(long = "r", num_args = 1.., value_name = "R")]
    rs: Vec<u32>,
    #[command(flatten)]
    cfg: CfgArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Bmo,
    Blo,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kernel {
    Triangle,
    CosineBump,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleId {
    GrA1,
    JkConstant,
    TruncLogneglog,
    JumpLowerBound,
    KrSeries,
    MollifyVlo,
    SigmaCatalog,
}

struct Failure {
    code: u8,
    msg: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        msg: msg.into(),
    }
}

impl From<OscError> for Failure {
    fn from(e: OscError) -> Failure {
        Failure {
            code: 1,
            msg: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.verb {
        Verb::Report(a) => run_report(a),
        Verb::A1(a) => run_a1(a),
        Verb::Sigma(a) => run_sigma(a),
        Verb::Decompose(a) => run_decompose(a),
        Verb::TruncationSweep(a) => run_sweep(a),
        Verb::Mollify(a) => run_mollify(a),
        Verb::Rearrange(a) => run_rearrange(a),
        Verb::Reproduce(a) => run_reproduce(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("osc: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn build_cfg(args: &CfgArgs) -> Result<NumericConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text).map_err(|e| usage(e.to_string()))?
        }
        None => NumericConfig::default(),
    };
    if let Some(m) = args.grid_size {
        cfg.grid_size = m;
    }
    if let Some(c) = args.cap {
        cfg.a1_cap = c;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn build_fn(args: &FnArgs) -> Result<(FuncExpr, Interval), Failure> {
    let i0 = make_interval(args.interval[0], args.interval[1]).map_err(|e| usage(e.to_string()))?;
    let f = parse_func_expr(&args.func, i0).map_err(|e| usage(e.to_string()))?;
    Ok((f, i0))
}

fn emit(out: &OutArgs, text: &str) -> Result<(), Failure> {
    match &out.out {
        Some(path) => fs::write(path, text).map_err(|e| Failure {
            code: 1,
            msg: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_report(a: ReportArgs) -> Result<(), Failure> {
    let cfg = build_cfg(&a.cfg)?;
    let (f, i0) = build_fn(&a.f)?;
    let rep = match a.kind {
        Kind::Bmo => bmo_seminorm(&f, i0, &cfg)?,
        Kind::Blo => blo_seminorm(&f, i0, &cfg)?,
    };
    let text = match a.out.format {
        Format::Csv => format!("{}\n", fmt_sig12(rep.value)),
        Format::Json => to_json(&rep)?,
    };
    emit(&a.out, &text)
}

fn run_a1(a: PlainArgs) -> Result<(), Failure> {
    let cfg = build_cfg(&a.cfg)?;
    let (f, i0) = build_fn(&a.f)?;
    let rep = a1_constant(&f, i0, &cfg)?;
    let text = match a.out.format {
        Format::Csv => format!("{}\n", fmt_sig12(rep.constant)),
        Format::Json => to_json(&rep)?,
    };
    emit(&a.out, &text)
}

fn run_sigma(a: PlainArgs) -> Result<(), Failure> {
    let cfg = build_cfg(&a.cfg)?;
    let (f, i0) = build_fn(&a.f)?;
    let bracket = sigma(&f, i0, &cfg)?;
    let text = match a.out.format {
        Format::Csv => format!(
            "lower,upper\n{},{}\n",
            fmt_sig12(bracket.lower),
            fmt_sig12(bracket.upper)
        ),
        Format::Json => to_json(&bracket)?,
    };
    emit(&a.out, &text)
}

fn run_decompose(a: PlainArgs) -> Result<(), Failure> {
    let cfg = build_cfg(&a.cfg)?;
    let (f, i0) = build_fn(&a.f)?;
    let d = blo_upper_decomposition(&f, i0, &cfg)?;
    let text = match a.out.format {
        Format::Csv => format!(
            "alpha,mu,norm_bound\n{},{},{}\n",
            fmt_sig12(d.alpha),
            fmt_sig12(d.mu),
            fmt_sig12(d.norm_bound)
        ),
        Format::Json => to_json(&d)?,
    };
    emit(&a.out, &text)
}

fn check_levels(ks: &[f64]) -> Result<(), Failure> {
    if ks.is_empty() {
        return Err(usage("at least one level k is required"));
    }
    if !(ks[0] > 0.0) || ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(usage("levels must be positive and strictly increasing"));
    }
    Ok(())
}

fn run_sweep(a: SweepArgs) -> Result<(), Failure> {
    check_levels(&a.ks)?;
    let cfg = build_cfg(&a.cfg)?;
    let (f, i0) = build_fn(&a.f)?;
    let sweep = truncation_sweep(&f, i0, &a.ks, &cfg)?;
    let text = match a.out.format {
        Format::Csv => sweep_to_csv(&sweep),
        Format::Json => to_json(&sweep)?,
    };
    emit(&a.out, &text)
}

/// Grid sample rendered as x,value rows; the JSON form carries the two
/// arrays side by side.
#[derive(Serialize)]
struct Sample {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

fn sample_text(g: &GridFunction, format: Format) -> Result<String, Failure> {
    match format {
        Format::Csv => {
            let mut text = String::from("x,value\n");
            for (x, v) in g.grid.nodes.iter().zip(&g.values) {
                text.push_str(&format!("{},{}\n", fmt_sig12(*x), fmt_sig12(*v)));
            }
            Ok(text)
        }
        Format::Json => Ok(to_json(&Sample {
            nodes: g.grid.nodes.clone(),
            values: g.values.clone(),
        })?),
    }
}

fn run_mollify(a: MollifyArgs) -> Result<(), Failure> {
    let cfg = build_cfg(&a.cfg)?;
    let (f, i0) = build_fn(&a.f)?;
    let shape = match a.kernel {
        Kernel::Triangle => KernelShape::Triangle,
        Kernel::CosineBump => KernelShape::CosineBump,
    };
    let spec = MollifierSpec::new(a.eps, shape).map_err(|e| usage(e.to_string()))?;
    // f_eps is defined where the kernel window fits inside the domain
    let inner = make_interval(i0.lo + a.eps, i0.hi - a.eps).map_err(|_| {
        usage(format!(
            "radius {} leaves no interior on an interval of length {}",
            a.eps,
            i0.length()
        ))
    })?;
    let grid = uniform_grid(&inner, cfg.grid_size + 1)?;
    let smoothed = mollify(&f, &spec, &grid)?;
    let text = sample_text(&smoothed, a.out.format)?;
    emit(&a.out, &text)
}

fn run_rearrange(a: PlainArgs) -> Result<(), Failure> {
    let cfg = build_cfg(&a.cfg)?;
    let (f, i0) = build_fn(&a.f)?;
    let grid = uniform_grid(&i0, cfg.grid_size + 1)?;
    let rearranged = decreasing_rearrangement(&f, i0, &grid)?;
    let text = sample_text(&rearranged, a.out.format)?;
    emit(&a.out, &text)
}

#[derive(Clone, Serialize)]
struct ReproRow {
    example: &'static str,
    param: String,
    measured: f64,
    expected: f64,
    pass: bool,
}

fn row(example: &'static str, param: String, measured: f64, expected: f64, pass: bool) -> ReproRow {
    ReproRow {
        example,
        param,
        measured,
        expected,
        pass,
    }
}

fn within_rel(measured: f64, expected: f64, tol: f64) -> bool {
    (measured - expected).abs() <= tol * expected.abs()
}

fn unit_interval() -> Interval {
    make_interval(0.0, 1.0).expect("unit interval is valid")
}

fn catalog_interval() -> Interval {
    make_interval(0.0, (-1.0f64).exp()).expect("(0, 1/e) is valid")
}

fn run_reproduce(a: ReproduceArgs) -> Result<(), Failure> {
    let cfg = build_cfg(&a.cfg)?;
    let takes_k = matches!(
        a.id,
        ExampleId::JkConstant | ExampleId::TruncLogneglog | ExampleId::JumpLowerBound
    );
    let takes_r = matches!(a.id, ExampleId::GrA1 | ExampleId::KrSeries);
    if !a.ks.is_empty() && !takes_k {
        return Err(usage("this example is not parameterized by --k"));
    }
    if !a.rs.is_empty() && !takes_r {
        return Err(usage("this example is not parameterized by --r"));
    }
    if takes_r && a.rs.iter().any(|&r| r == 0) {
        return Err(usage("weight powers must be at least 1"));
    }
    if !a.ks.is_empty() {
        check_levels(&a.ks)?;
    }

    let rows = match a.id {
        ExampleId::GrA1 => repro_gr_a1(or_default_r(&a.rs, &[1, 2, 3, 4, 5]), &cfg)?,
        ExampleId::JkConstant => {
            repro_jk(or_default_k(&a.ks, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), &cfg)?
        }
        ExampleId::TruncLogneglog => {
            repro_trunc(or_default_k(&a.ks, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), &cfg)?
        }
        ExampleId::JumpLowerBound => {
            repro_jump(or_default_k(&a.ks, &[1.0, 2.0, 3.0, 4.0]), &cfg)?
        }
        ExampleId::KrSeries => repro_kr(or_default_r(&a.rs, &[1, 2, 3]), &cfg)?,
        ExampleId::MollifyVlo => repro_mollify(&cfg)?,
        ExampleId::SigmaCatalog => repro_sigma(&cfg)?,
    };

    let text = match a.out.format {
        Format::Csv => {
            let mut t = String::from("example,param,measured,expected,pass\n");
            for r in &rows {
                t.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.example,
                    r.param,
                    fmt_sig12(r.measured),
                    fmt_sig12(r.expected),
                    r.pass
                ));
            }
            t
        }
        Format::Json => to_json(&rows)?,
    };
    emit(&a.out, &text)?;

    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(Failure {
            code: 1,
            msg: format!("{failed} of {} rows missed their tolerance", rows.len()),
        });
    }
    Ok(())
}

fn or_default_r<'a>(rs: &'a [u32], default: &'a [u32]) -> &'a [u32] {
    if rs.is_empty() {
        default
    } else {
        rs
    }
}

fn or_default_k<'a>(ks: &'a [f64], default: &'a [f64]) -> &'a [f64] {
    if ks.is_empty() {
        default
    } else {
        ks
    }
}

/// A1((-log x)^r) on (0, 1/e) against the integer recursion a_r = r a_{r-1} + 1.
fn repro_gr_a1(rs: &[u32], cfg: &NumericConfig) -> Result<Vec<ReproRow>, Failure> {
    let i0 = catalog_interval();
    let mut rows = Vec::new();
    for &r in rs {
        let w = FuncExpr::neg_log_pow(r, i0)?;
        let measured = a1_constant(&w, i0, cfg)?.constant;
        let expected = gr_a1_closed_form(r);
        rows.push(row(
            "gr-a1",
            format!("r={r}"),
            measured,
            expected,
            within_rel(measured, expected, 1e-3),
        ));
    }
    Ok(rows)
}

/// A1(-log x) on (0, e^{-e^k}) against 1 + e^{-k}.
fn repro_jk(ks: &[f64], cfg: &NumericConfig) -> Result<Vec<ReproRow>, Failure> {
    let mut rows = Vec::new();
    for &k in ks {
        let hi = (-k.exp()).exp();
        let i0 = make_interval(0.0, hi)?;
        let w = FuncExpr::neg_log(i0)?;
        let measured = a1_constant(&w, i0, cfg)?.constant;
        let expected = 1.0 + (-k).exp();
        rows.push(row(
            "jk-constant",
            format!("k={k}"),
            measured,
            expected,
            within_rel(measured, expected, 1e-3),
        ));
    }
    Ok(rows)
}

/// Truncation residuals of log(-log x) against the log(1 + e^{-k}) bound.
fn repro_trunc(ks: &[f64], cfg: &NumericConfig) -> Result<Vec<ReproRow>, Failure> {
    let i0 = catalog_interval();
    let f = FuncExpr::log_neg_log(i0)?;
    let sweep = truncation_sweep(&f, i0, ks, cfg)?;
    let mut rows = Vec::new();
    for r in &sweep.rows {
        let expected = (-r.param).exp().ln_1p();
        let pass = r.measured >= -1e-12 && r.measured <= expected + 1e-3;
        rows.push(row(
            "trunc-logneglog",
            format!("k={}", r.param),
            r.measured,
            expected,
            pass,
        ));
    }
    Ok(rows)
}

/// Truncation residuals of the staircase stay at or above 1 at every level.
fn repro_jump(ks: &[f64], cfg: &NumericConfig) -> Result<Vec<ReproRow>, Failure> {
    let i0 = unit_interval();
    let f = FuncExpr::jump_eta(JumpSpec::GeomDouble, i0)?;
    let sweep = truncation_sweep(&f, i0, ks, cfg)?;
    let mut rows = Vec::new();
    for r in &sweep.rows {
        rows.push(row(
            "jump-lower-bound",
            format!("k={}", r.param),
            r.measured,
            1.0,
            r.measured >= 1.0 - 1e-3,
        ));
    }
    Ok(rows)
}

/// e^{r eta} stays an A1 weight with constant at or below the series bound.
fn repro_kr(rs: &[u32], cfg: &NumericConfig) -> Result<Vec<ReproRow>, Failure> {
    let i0 = unit_interval();
    let stair = FuncExpr::jump_eta(JumpSpec::GeomDouble, i0)?;
    let mut rows = Vec::new();
    for &r in rs {
        let w = FuncExpr::exp_scale(stair.clone(), 1.0 / f64::from(r))?;
        let (member, report) = a1_membership(&w, i0, cfg.a1_cap, cfg)?;
        let (expected, _tail) = k_of_r(r, 40)?;
        let pass = member && report.constant <= expected + 1e-3;
        rows.push(row(
            "kr-series",
            format!("r={r}"),
            report.constant,
            expected,
            pass,
        ));
    }
    Ok(rows)
}

/// Mollification error of a clipped logarithm under the modulus bound.
fn repro_mollify(cfg: &NumericConfig) -> Result<Vec<ReproRow>, Failure> {
    let i0 = unit_interval();
    let f = FuncExpr::truncate(FuncExpr::neg_log(i0)?, 2.0)?;
    let ladder = [1e-4, 1e-3, 1e-2, 1e-1];
    let sweep = convolution_error(&f, i0, KernelShape::Triangle, &ladder, cfg)?;
    let mut rows = Vec::new();
    for r in &sweep.rows {
        let expected = r.bound.expect("convolution rows carry the modulus bound");
        rows.push(row(
            "mollify-vlo",
            format!("eps={}", fmt_sig12(r.param)),
            r.measured,
            expected,
            r.measured <= expected + 1e-9,
        ));
    }
    Ok(rows)
}

/// Sigma brackets of the catalog: bounded, closure member, threshold at 1,
/// and degree-one homogeneity.
fn repro_sigma(cfg: &NumericConfig) -> Result<Vec<ReproRow>, Failure> {
    let i0 = unit_interval();
    let ie = catalog_interval();
    let mut rows = Vec::new();

    let bounded = sigma(&FuncExpr::constant(3.0, i0)?, i0, cfg)?;
    rows.push(row(
        "sigma-catalog",
        "const3-upper".into(),
        bounded.upper,
        0.0,
        bounded.upper <= 1e-3,
    ));

    let closure = sigma(&FuncExpr::log_neg_log(ie)?, ie, cfg)?;
    rows.push(row(
        "sigma-catalog",
        "logneglog-upper".into(),
        closure.upper,
        0.0,
        closure.upper <= 1e-2,
    ));

    let nl = sigma(&FuncExpr::neg_log(i0)?, i0, cfg)?;
    let mid = 0.5 * (nl.lower + nl.upper);
    let straddles =
        nl.lower <= 1.0 && 1.0 <= nl.upper && 1.0 - nl.lower <= 0.05 && nl.upper - 1.0 <= 0.05;
    rows.push(row(
        "sigma-catalog",
        "neglog-threshold".into(),
        mid,
        1.0,
        straddles,
    ));

    let doubled = sigma(&FuncExpr::scale(FuncExpr::neg_log(i0)?, 2.0)?, i0, cfg)?;
    let mid2 = 0.5 * (doubled.lower + doubled.upper);
    rows.push(row(
        "sigma-catalog",
        "scale2-homogeneity".into(),
        mid2,
        2.0 * mid,
        (mid2 - 2.0 * mid).abs() <= 0.1,
    ));

    Ok(rows)
}
