//! Command-line front end. Reports are plain data: the JSON output and the
//! human-readable text are both rendered from the same value.
//!
//! Exit codes: 0 success, 1 other failure, 2 unparsable input or flags,
//! 3 the map is not star-linear.

use std::fmt::Write as _;
use std::io::Read as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bilinear::{self, membership_solve, zero_pattern_membership, BilinearError, Branch};
use crate::hill::{self, HillError};
use crate::json::{pairs, JsonError, MapFile, MapForm, MatrixJson, PatternJson};
use crate::linalg::{c, kron_vec, norm2, CVec, Field, C64, DEFAULT_TOL};
use crate::mapmodel::{is_star_linear, MapSpec, StarLinearityReport};
use crate::pattern::{self, check_c1, check_c2, classify_case, CaseClass, Pattern, Remainder, Verdict};
use crate::positivity::{self, CpVerdict, ProbeConfig, ProbeOutcome};
use crate::zoo::{self, ZooError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_NOT_STAR_LINEAR: i32 = 3;

/// Selections tried before settling on an `Unknown` verdict.
pub const MAX_SELECTIONS: usize = 32;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("map is not star-linear")]
    NotStarLinear(Box<Report>),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => EXIT_PARSE,
            CliError::NotStarLinear(_) => EXIT_NOT_STAR_LINEAR,
            CliError::Other(_) => EXIT_FAILURE,
        }
    }
}

impl From<JsonError> for CliError {
    fn from(e: JsonError) -> Self {
        match e {
            JsonError::Parse(_) | JsonError::Shape(_) => CliError::Parse(e.to_string()),
            JsonError::Map(m) => CliError::Parse(m.to_string()),
        }
    }
}

impl From<ZooError> for CliError {
    fn from(e: ZooError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<HillError> for CliError {
    fn from(e: HillError) -> Self {
        CliError::Other(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "cpmap", version, about = "Positivity and complete positivity of star-linear matrix maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonOpts {
    /// Scalar field; overrides the field stored in an input file.
    #[arg(long, value_parser = parse_field)]
    pub field: Option<Field>,
    /// Relative tolerance for equality, rank and eigenvalue tests.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Seed for every randomized step.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Number of positivity probe starts.
    #[arg(long, default_value_t = 64)]
    pub budget: usize,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Zoo parameters, e.g. `a1=1,b3=-2` or `b1=0.5:1` for 0.5+1i.
    #[arg(long)]
    pub set: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full analysis of a map: star-linearity, Hill form, CP, positivity, pattern verdict.
    Analyze {
        /// Map file, `-` for stdin, or `zoo:<name>`.
        input: String,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Census of every 2x2 block pattern.
    Case2x2 {
        #[arg(long)]
        json: bool,
    },
    /// Rewrite a map file in the other representation.
    Convert {
        #[arg(long, value_enum)]
        to: ConvertTarget,
        input: String,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Print the Hill matrix H and the coefficient matrix Â.
    Hill {
        input: String,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Decide whether y = Â (z ⊗ x) is solvable.
    Range {
        /// Map file, `-` for stdin, or `zoo:<name>`.
        input: String,
        /// Comma-separated target, entries `re` or `re:im`.
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        /// Write the witness (z, x) as JSON to this path.
        #[arg(long)]
        emit_witness: Option<PathBuf>,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConvertTarget {
    Choi,
    Matricization,
}

fn parse_field(s: &str) -> Result<Field, String> {
    Field::parse(s).ok_or_else(|| format!("unknown field {s:?}, expected real or complex"))
}

pub fn parse_scalar(s: &str) -> Result<C64, CliError> {
    let bad = || CliError::Parse(format!("cannot parse number {s:?}"));
    let s = s.trim();
    match s.split_once(':') {
        Some((a, b)) => Ok(c(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)),
        None => Ok(c(s.parse().map_err(|_| bad())?, 0.0)),
    }
}

pub fn parse_vector(s: &str) -> Result<Vec<C64>, CliError> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(parse_scalar).collect()
}

pub fn parse_assignments(s: Option<&str>) -> Result<Vec<(String, C64)>, CliError> {
    let Some(s) = s else { return Ok(Vec::new()) };
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| CliError::Parse(format!("expected name=value, got {t:?}")))?;
            Ok((k.trim().to_string(), parse_scalar(v)?))
        })
        .collect()
}

/// Loads `zoo:<name>`, `-` (stdin) or a map file.
pub fn load_map(input: &str, opts: &CommonOpts) -> Result<MapSpec, CliError> {
    let params = parse_assignments(opts.set.as_deref())?;
    if let Some(name) = input.strip_prefix("zoo:") {
        if !zoo::ZOO_NAMES.contains(&name) {
            return Err(CliError::Parse(format!("unknown zoo entry {name:?}; known: {}", zoo::ZOO_NAMES.join(", "))));
        }
        let entry = zoo::zoo_entry(name, &params, opts.field.unwrap_or(Field::Complex), opts.seed)?;
        return Ok(entry.spec);
    }
    if !params.is_empty() {
        return Err(CliError::Parse("--set only applies to zoo inputs".into()));
    }
    let text = if input == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::Other(e.to_string()))?;
        s
    } else {
        std::fs::read_to_string(input).map_err(|e| CliError::Other(format!("{input}: {e}")))?
    };
    let file = MapFile::parse(&text)?;
    Ok(file.to_spec(opts.field.or(file.field).or(Some(Field::Complex)))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEcho {
    pub source: String,
    pub n: usize,
    pub q: usize,
    pub field: Field,
    pub tol: f64,
    pub seed: u64,
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HillSummary {
    /// 1-based block positions of `L_1..L_m`.
    pub selection: Vec<[usize; 2]>,
    pub h: MatrixJson,
    pub ahat: MatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivitySummary {
    pub seed: u64,
    pub starts: usize,
    pub outcome: ProbeOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSummary {
    pub pattern: PatternJson,
    pub c1: bool,
    /// Numbers of the C2 flags that hold.
    pub c2: Vec<usize>,
    pub case: Option<CaseClass>,
    pub verdict: Verdict,
    pub selections_tried: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub input: InputEcho,
    pub star_linear: StarLinearityReport,
    pub m: Option<usize>,
    pub hill: Option<HillSummary>,
    pub cp: Option<CpVerdict>,
    pub positivity: Option<PositivitySummary>,
    pub pattern: Option<PatternSummary>,
    pub open_questions: Vec<String>,
}

pub const OPEN_COMPLEX_M3: &str =
    "complex field, n = q = 2, m = 3 with a nonzero remainder: whether positivity implies complete positivity is open";

fn hill_summary(rep: &hill::HillRep) -> HillSummary {
    let selection = rep.selection.clone().unwrap_or_default().iter().map(|&(i, j)| [i + 1, j + 1]).collect();
    HillSummary { selection, h: MatrixJson::from_mat(&rep.h, rep.field), ahat: MatrixJson::from_mat(&rep.ahat, rep.field) }
}

fn pattern_summary(p: &Pattern, verdict: Verdict, tried: usize) -> PatternSummary {
    PatternSummary {
        pattern: PatternJson::from_pattern(p),
        c1: check_c1(p),
        c2: check_c2(p).holding(),
        case: if check_c1(p) && !check_c2(p).any() { classify_case(p) } else { None },
        verdict,
        selections_tried: tried,
    }
}

pub fn open_questions(p: &Pattern, field: Field) -> Vec<String> {
    let mut out = Vec::new();
    if field == Field::Complex && p.n == 2 && p.q == 2 && p.m() == 3 && !matches!(p.remainder, Remainder::AllZero) {
        out.push(OPEN_COMPLEX_M3.to_string());
    }
    out
}

/// Runs every analysis. A map that is not star-linear yields
/// `CliError::NotStarLinear` carrying the partial report.
pub fn analyze(spec: &MapSpec, source: &str, opts: &CommonOpts) -> Result<Report, CliError> {
    if opts.budget == 0 {
        return Err(CliError::Parse("--budget must be positive".into()));
    }
    let input = InputEcho {
        source: source.to_string(),
        n: spec.n(),
        q: spec.q(),
        field: spec.field(),
        tol: opts.tol,
        seed: opts.seed,
        budget: opts.budget,
    };
    let star = is_star_linear(spec, opts.tol);
    let mut report = Report {
        input,
        star_linear: star.clone(),
        m: None,
        hill: None,
        cp: None,
        positivity: None,
        pattern: None,
        open_questions: Vec::new(),
    };
    if !star.star_linear {
        return Err(CliError::NotStarLinear(Box::new(report)));
    }
    let rep = hill::build_hill(spec, opts.tol)?;
    report.m = Some(rep.m());
    report.hill = Some(hill_summary(&rep));
    report.cp = Some(positivity::is_completely_positive(spec, opts.tol).map_err(|e| CliError::Other(e.to_string()))?);
    let cfg = ProbeConfig { starts: opts.budget, seed: opts.seed, tol: opts.tol, ..ProbeConfig::default() };
    report.positivity =
        Some(PositivitySummary { seed: opts.seed, starts: opts.budget, outcome: positivity::positivity_probe(spec, &cfg) });
    let mv = pattern::verdict_for_map(spec, opts.tol, MAX_SELECTIONS)?;
    report.open_questions = open_questions(&mv.pattern, spec.field());
    report.pattern = Some(pattern_summary(&mv.pattern, mv.verdict, mv.selections_tried));
    Ok(report)
}

/// Ten significant digits, with rounding noise below 1e-12 shown as zero.
fn fmt_f(x: f64) -> String {
    if x.abs() < 1e-12 {
        return "0".into();
    }
    let digits = (9 - x.abs().log10().floor() as i32).clamp(0, 20) as usize;
    let s = format!("{x:.digits$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { &s };
    s.to_string()
}

fn fmt_c(v: C64) -> String {
    let (re, im) = (fmt_f(v.re), fmt_f(v.im));
    match (re.as_str(), im.as_str()) {
        (_, "0") => re,
        ("0", _) => format!("{im}i"),
        _ if im.starts_with('-') => format!("{re}{im}i"),
        _ => format!("{re}+{im}i"),
    }
}

fn fmt_matrix(out: &mut String, m: &MatrixJson) {
    for i in 0..m.rows {
        let row: Vec<String> = (0..m.cols).map(|j| fmt_c(m.data[i * m.cols + j].value())).collect();
        let _ = writeln!(out, "    [{}]", row.join(", "));
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn render_report(r: &Report) -> String {
    let mut s = String::new();
    let i = &r.input;
    let _ = writeln!(s, "input: {} (n = {}, q = {}, field {})", i.source, i.n, i.q, i.field);
    let sl = &r.star_linear;
    let _ = writeln!(
        s,
        "star-linear: {} (Choi Hermitian {}, shuffle identity {}, entrywise {}; deviations {:.2e} {:.2e} {:.2e})",
        yes(sl.star_linear),
        yes(sl.choi_hermitian),
        yes(sl.shuffle_identity),
        yes(sl.entrywise),
        sl.max_deviation[0],
        sl.max_deviation[1],
        sl.max_deviation[2]
    );
    if sl.inconsistent {
        let _ = writeln!(s, "warning: the three star-linearity criteria disagree");
    }
    if let Some(m) = r.m {
        let _ = writeln!(s, "m = {m}");
    }
    if let Some(h) = &r.hill {
        let sel: Vec<String> = h.selection.iter().map(|p| format!("({},{})", p[0], p[1])).collect();
        let _ = writeln!(s, "selected blocks: {}", sel.join(" "));
    }
    if let Some(cp) = &r.cp {
        let _ = writeln!(
            s,
            "completely positive: {} (min Choi eigenvalue {:.6e})",
            yes(cp.completely_positive),
            cp.min_eigenvalue
        );
    }
    if let Some(p) = &r.positivity {
        match &p.outcome {
            ProbeOutcome::CertifiedNotPositive { value, .. } => {
                let _ = writeln!(s, "positive: no, certified violation {value:.6e} (seed {}, {} starts)", p.seed, p.starts);
            }
            ProbeOutcome::NoViolationFound { min_value_seen, .. } => {
                let _ = writeln!(
                    s,
                    "positive: no violation found, min value {min_value_seen:.3e} (seed {}, {} starts)",
                    p.seed, p.starts
                );
            }
        }
    }
    if let Some(p) = &r.pattern {
        let pos: Vec<String> = p.pattern.positions.iter().map(|x| format!("({},{})", x[0], x[1])).collect();
        let _ = writeln!(s, "pattern: {} remainder {}", pos.join(" "), p.pattern.remainder);
        let c2: Vec<String> = p.c2.iter().map(|k| format!("C2.{k}")).collect();
        let _ = writeln!(
            s,
            "C1: {}; C2 flags: {}",
            if p.c1 { "holds" } else { "fails" },
            if c2.is_empty() { "none".to_string() } else { c2.join(" ") }
        );
        if let Some(case) = p.case {
            let _ = writeln!(s, "case: {case:?}");
        }
        let _ = writeln!(s, "verdict: {:?} (selections tried {})", p.verdict, p.selections_tried);
    }
    for q in &r.open_questions {
        let _ = writeln!(s, "OPEN: {q}");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub m: usize,
    /// 1-based positions of `L_1..L_m`.
    pub positions: Vec<[usize; 2]>,
    /// `any`, `zero` or `nonzero`.
    pub remainder: String,
    /// `any`, `real` or `complex`.
    pub field: String,
    pub c1: bool,
    pub c2: Vec<usize>,
    pub conclusion: String,
}

pub const COINCIDE_C2: &str = "coincide (C1 + C2.1/C2.2)";
pub const COINCIDE_ROW_COLUMN: &str = "coincide (independents in one block row or column)";
pub const COINCIDE_DIAGONAL: &str = "coincide (C1 + main theorem; unequal remainders reduce to zero)";
pub const COINCIDE_ZERO: &str = "coincide (zero remainder, Schur complement argument)";
pub const COUNTEREXAMPLE_TOEPLITZ: &str = "counterexample: block Toeplitz map is positive but not CP";
pub const OPEN: &str = "OPEN: not known whether positivity implies CP";
pub const COUNTEREXAMPLE_TRANSPOSE: &str = "counterexample: transpose map";

fn census_row(positions: &[(usize, usize)], remainder: &str, field: &str, conclusion: &str) -> CensusRow {
    let p = Pattern::new(2, 2, positions.to_vec(), Remainder::AllZero);
    CensusRow {
        m: positions.len(),
        positions: positions.iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
        remainder: remainder.to_string(),
        field: field.to_string(),
        c1: check_c1(&p),
        c2: check_c2(&p).holding(),
        conclusion: conclusion.to_string(),
    }
}

/// Every block pattern for `n = q = 2`, with the known conclusion on whether
/// positivity and complete positivity coincide.
pub fn census() -> Vec<CensusRow> {
    let mut rows = vec![census_row(&[(0, 0)], "any", "any", COINCIDE_C2)];
    let pairs2: [[(usize, usize); 2]; 6] = [
        [(0, 0), (0, 1)],
        [(1, 0), (1, 1)],
        [(0, 0), (1, 0)],
        [(0, 1), (1, 1)],
        [(0, 0), (1, 1)],
        [(0, 1), (1, 0)],
    ];
    for p in &pairs2 {
        let conclusion = if pattern::is_single_row_or_column(&Pattern::new(2, 2, p.to_vec(), Remainder::AllZero)) {
            COINCIDE_ROW_COLUMN
        } else {
            COINCIDE_DIAGONAL
        };
        rows.push(census_row(p, "any", "any", conclusion));
    }
    let triples: [[(usize, usize); 3]; 4] = [
        [(0, 0), (0, 1), (1, 0)],
        [(0, 0), (0, 1), (1, 1)],
        [(0, 0), (1, 0), (1, 1)],
        [(0, 1), (1, 0), (1, 1)],
    ];
    for t in &triples {
        rows.push(census_row(t, "zero", "any", COINCIDE_ZERO));
        rows.push(census_row(t, "nonzero", "real", COUNTEREXAMPLE_TOEPLITZ));
        rows.push(census_row(t, "nonzero", "complex", OPEN));
    }
    rows.push(census_row(&[(0, 0), (0, 1), (1, 0), (1, 1)], "any", "any", COUNTEREXAMPLE_TRANSPOSE));
    rows
}

pub fn render_census(rows: &[CensusRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "m  positions                remainder  field    C1   C2        conclusion");
    for r in rows {
        let pos: Vec<String> = r.positions.iter().map(|p| format!("({},{})", p[0], p[1])).collect();
        let c2: Vec<String> = r.c2.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(
            s,
            "{:<2} {:<24} {:<10} {:<8} {:<4} {:<9} {}",
            r.m,
            pos.join(" "),
            r.remainder,
            r.field,
            yes(r.c1),
            if c2.is_empty() { "-".to_string() } else { c2.join(",") },
            r.conclusion
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeStatus {
    Reachable,
    NotReachable,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub z: Vec<[f64; 2]>,
    pub x: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeReport {
    pub source: String,
    pub pattern: PatternJson,
    pub y: Vec<[f64; 2]>,
    pub status: RangeStatus,
    /// How the status was decided.
    pub method: String,
    pub witness: Option<Witness>,
    pub residual: Option<f64>,
}

/// Decides `y ∈ {Â (z ⊗ x)}` for the map's Hill coefficient matrix: by an
/// explicit construction when the pattern allows one, exactly for zero
/// remainders, and otherwise by alternating least squares (which can only
/// confirm membership).
pub fn range_query(spec: &MapSpec, source: &str, y: &[C64], opts: &CommonOpts) -> Result<RangeReport, CliError> {
    let rep = hill::build_hill(spec, opts.tol)?;
    let sel = rep.selection.clone().unwrap_or_default();
    let p = pattern::detect_pattern(spec, &sel, opts.tol)?;
    let m = rep.m();
    if y.len() != m {
        return Err(CliError::Parse(format!("y has {} entries, expected m = {m}", y.len())));
    }
    let field = spec.field();
    if field == Field::Real && y.iter().any(|v| v.im != 0.0) {
        return Err(CliError::Parse("complex y over the real field".into()));
    }
    let yv = CVec::from_column_slice(y);
    let residual = |z: &CVec, x: &CVec| norm2(&(&rep.ahat * kron_vec(z, x) - &yv));
    let mk = |status, method: String, w: Option<(CVec, CVec)>| {
        let res = w.as_ref().map(|(z, x)| residual(z, x));
        RangeReport {
            source: source.to_string(),
            pattern: PatternJson::from_pattern(&p),
            y: pairs(y),
            status,
            method,
            witness: w.map(|(z, x)| Witness { z: pairs(z.as_slice()), x: pairs(x.as_slice()) }),
            residual: res,
        }
    };
    let supported = !matches!(p.remainder, Remainder::Heterogeneous) || pattern::is_single_row_or_column(&p);
    if supported {
        match bilinear::construct_witness(&p, &yv, field) {
            Ok(w) => {
                let method = format!("construction ({})", branch_name(w.branch));
                return Ok(mk(RangeStatus::Reachable, method, Some((w.z, w.x))));
            }
            Err(BilinearError::NotInRange) => {
                return Ok(mk(
                    RangeStatus::NotReachable,
                    "real cross pattern: arm sums vanish while both arms are nonzero".into(),
                    None,
                ));
            }
            Err(_) => {}
        }
    }
    if p.remainder == Remainder::AllZero {
        let found = zero_pattern_membership(&p, &yv, opts.tol).map_err(|e| CliError::Other(e.to_string()))?;
        return Ok(match found {
            Some(w) => mk(RangeStatus::Reachable, "rank-one completion".into(), Some(w)),
            None => mk(RangeStatus::NotReachable, "no rank-one completion".into(), None),
        });
    }
    let found = membership_solve(&rep.ahat, spec.n(), spec.q(), &yv, field, opts.seed, opts.budget)
        .map_err(|e| CliError::Other(e.to_string()))?;
    Ok(match found {
        Some(w) => mk(RangeStatus::Reachable, "alternating least squares".into(), Some(w)),
        None => mk(RangeStatus::Unknown, "alternating least squares found no solution".into(), None),
    })
}

pub fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::RowColumn => "single block row or column",
        Branch::ZeroPattern => "zero remainder",
        Branch::SumNotOne => "remainder sum not one",
        Branch::FreeIndex => "unused row or column",
        Branch::DistinctIndices => "distinct rows or columns",
        Branch::RepeatedPairs => "two repeated rows or columns",
        Branch::IsolatedPosition => "isolated position",
        Branch::CrossInvertible => "cross, remainder sum not one",
        Branch::CrossSingular => "cross, remainder sum one",
    }
}

pub fn render_range(r: &RangeReport) -> String {
    let mut s = String::new();
    let status = match r.status {
        RangeStatus::Reachable => "reachable",
        RangeStatus::NotReachable => "not reachable",
        RangeStatus::Unknown => "unknown",
    };
    let _ = writeln!(s, "{status} ({})", r.method);
    if let Some(w) = &r.witness {
        let f = |v: &[[f64; 2]]| v.iter().map(|p| fmt_c(c(p[0], p[1]))).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "z = [{}]", f(&w.z));
        let _ = writeln!(s, "x = [{}]", f(&w.x));
        if let Some(res) = r.residual {
            let _ = writeln!(s, "residual {res:.3e}");
        }
    }
    s
}

pub fn render_hill(h: &HillSummary) -> String {
    let mut s = String::new();
    let sel: Vec<String> = h.selection.iter().map(|p| format!("({},{})", p[0], p[1])).collect();
    let _ = writeln!(s, "selected blocks: {}", sel.join(" "));
    let _ = writeln!(s, "H =");
    fmt_matrix(&mut s, &h.h);
    let _ = writeln!(s, "Â =");
    fmt_matrix(&mut s, &h.ahat);
    s
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Other(e.to_string()))
}

/// Executes a parsed command and returns what goes to stdout.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Analyze { input, opts } => {
            let spec = load_map(input, opts)?;
            let report = analyze(&spec, input, opts)?;
            if opts.json {
                to_json(&report)
            } else {
                Ok(render_report(&report))
            }
        }
        Command::Case2x2 { json } => {
            let rows = census();
            if *json {
                to_json(&rows)
            } else {
                Ok(render_census(&rows))
            }
        }
        Command::Convert { to, input, opts } => {
            let spec = load_map(input, opts)?;
            let form = match to {
                ConvertTarget::Choi => MapForm::Choi,
                ConvertTarget::Matricization => MapForm::Matricization,
            };
            to_json(&MapFile::from_spec(&spec, form))
        }
        Command::Hill { input, opts } => {
            let spec = load_map(input, opts)?;
            if !is_star_linear(&spec, opts.tol).star_linear {
                let report = analyze(&spec, input, opts).err().unwrap_or(CliError::Other("not star-linear".into()));
                return Err(report);
            }
            let rep = hill::build_hill(&spec, opts.tol)?;
            let h = hill_summary(&rep);
            if opts.json {
                to_json(&h)
            } else {
                Ok(render_hill(&h))
            }
        }
        Command::Range { input, y, emit_witness, opts } => {
            let spec = load_map(input, opts)?;
            let y = parse_vector(y)?;
            let r = range_query(&spec, input, &y, opts)?;
            if let Some(path) = emit_witness {
                let text = to_json(&r.witness)?;
                std::fs::write(path, text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
            }
            if opts.json {
                to_json(&r)
            } else {
                Ok(render_range(&r))
            }
        }
    }
}

/// Parses `args` (including the program name), runs the command, and
/// returns `(exit code, stdout, stderr)`.
pub fn run<I, T>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            return (code, String::new(), e.to_string());
        }
    };
    let json = match &cli.command {
        Command::Analyze { opts, .. } | Command::Hill { opts, .. } => opts.json,
        _ => false,
    };
    match execute(&cli) {
        Ok(out) => (EXIT_OK, out, String::new()),
        Err(CliError::NotStarLinear(report)) => {
            let out = if json { to_json(&*report).unwrap_or_default() } else { render_report(&report) };
            (EXIT_NOT_STAR_LINEAR, out, "error: map is not star-linear\n".into())
        }
        Err(e) => (e.exit_code(), String::new(), format!("error: {e}\n")),
    }
}
