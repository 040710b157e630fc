//! Command-line front end.
//!
//! [`run`] does all the work and returns the exit status together with the
//! text to print, so tests can drive it without spawning a process.

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::batch::{self, map_ordered, FuzzCase, FuzzSummary};
use crate::error::Error;
use crate::identities::{verify, IdentityId, IdentityInstance, Reading, Status, VerificationReport};
use crate::kdf_core::{expand, KdfSpec, SlotBinding};
use crate::mseries::TruncatedSeries;
use crate::numeval::{evaluate, numeric_verify};
use crate::reductions::{check_conclusion, random_conclusion, ConclusionId, ConclusionInstance, ConclusionReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_PARSE: i32 = 2;

/// Cap used by `errata` unless `--cap` is given.
pub const ERRATA_CAP: u32 = 6;
/// Seeds tried per entry by `errata`.
const ERRATA_SEARCH: u64 = 400;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum CommandKind {
    /// Print the truncated expansion of a spec document
    Expand,
    /// Verify one instance document
    Verify,
    /// Verify `count` random instances of every formula
    Fuzz,
    /// Check the four concluding formulas on random instances
    Conclusions,
    /// Evaluate a spec, or compare both sides of an instance, at a point
    Eval,
    /// List the formula catalog
    List,
    /// Show a passing corrected and a failing literal instance per correction
    Errata,
}

impl CommandKind {
    fn needs_input(self) -> bool {
        matches!(self, CommandKind::Expand | CommandKind::Verify | CommandKind::Eval)
    }
}

#[derive(Debug, Parser)]
#[command(name = "kdfsum", version, about = "Exact checks of finite summation formulas for multivariable hypergeometric series")]
struct Cli {
    #[command(subcommand)]
    command: CommandKind,
    /// Input document (JSON)
    #[arg(global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    #[arg(long, global = true)]
    cap: Option<u32>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long, global = true)]
    reading: Option<Reading>,
    /// Restrict to these ids (repeatable)
    #[arg(long = "id", global = true)]
    ids: Vec<IdentityId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub input_path: Option<PathBuf>,
    pub seed: u64,
    pub count: u64,
    pub cap: Option<u32>,
    pub output: Format,
    pub reading: Option<Reading>,
    pub ids: Vec<IdentityId>,
}

impl RunConfig {
    pub fn new(command: CommandKind) -> Self {
        RunConfig {
            command,
            input_path: None,
            seed: 0,
            count: 50,
            cap: None,
            output: Format::Text,
            reading: None,
            ids: Vec::new(),
        }
    }

    pub fn parse_from<I, T>(args: I) -> Result<Self, clap::Error>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let c = Cli::try_parse_from(args)?;
        Ok(RunConfig {
            command: c.command,
            input_path: c.input,
            seed: c.seed,
            count: c.count,
            cap: c.cap,
            output: c.format,
            reading: c.reading,
            ids: c.ids,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(code: i32, stdout: String) -> Self {
        Outcome { code, stdout, stderr: String::new() }
    }

    fn err(code: i32, msg: impl Into<String>) -> Self {
        Outcome { code, stdout: String::new(), stderr: msg.into() }
    }
}

/// Parses arguments and runs. Help and version requests exit 0.
pub fn main_with_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match RunConfig::parse_from(args) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                Outcome::ok(code, text)
            } else {
                Outcome::err(code, text)
            }
        }
    }
}

pub fn run(cfg: &RunConfig) -> Outcome {
    let input = if cfg.command.needs_input() {
        match read_input(cfg) {
            Ok(v) => Some(v),
            Err(msg) => return Outcome::err(EXIT_PARSE, msg),
        }
    } else {
        None
    };
    let result = match cfg.command {
        CommandKind::Expand => cmd_expand(cfg, input.unwrap()),
        CommandKind::Verify => cmd_verify(cfg, input.unwrap()),
        CommandKind::Fuzz => Ok(cmd_fuzz(cfg)),
        CommandKind::Conclusions => Ok(cmd_conclusions(cfg)),
        CommandKind::Eval => cmd_eval(cfg, input.unwrap()),
        CommandKind::List => Ok(cmd_list(cfg)),
        CommandKind::Errata => Ok(cmd_errata(cfg)),
    };
    match result {
        Ok(o) => o,
        Err(Error::Parse(m)) => Outcome::err(EXIT_PARSE, format!("parse error: {m}\n")),
        Err(e) => Outcome::err(EXIT_FAIL, format!("error: {e}\n")),
    }
}

fn read_input(cfg: &RunConfig) -> Result<serde_json::Value, String> {
    let path = cfg.input_path.as_ref().ok_or("missing input path\n")?;
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}\n", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("parse error: {}: {e}\n", path.display()))
}

fn parse_doc<T: for<'de> Deserialize<'de>>(v: serde_json::Value) -> crate::Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Parse(e.to_string()))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn status_code(fail: bool) -> i32 {
    if fail {
        EXIT_FAIL
    } else {
        EXIT_OK
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ExpandDoc {
    spec: KdfSpec,
    #[serde(default)]
    binding: Option<SlotBinding>,
    #[serde(default)]
    var_count: Option<usize>,
    #[serde(default)]
    cap: Option<u32>,
}

#[derive(Serialize)]
struct TermDoc<'a> {
    monomial: &'a crate::mseries::MultiIndex,
    coefficient: &'a crate::Rational,
}

fn series_json(s: &TruncatedSeries) -> serde_json::Value {
    let terms: Vec<TermDoc> = s.iter().map(|(m, c)| TermDoc { monomial: m, coefficient: c }).collect();
    json!({ "varCount": s.var_count(), "cap": s.cap(), "terms": terms })
}

fn cmd_expand(cfg: &RunConfig, v: serde_json::Value) -> crate::Result<Outcome> {
    let doc: ExpandDoc = if v.get("spec").is_some() {
        parse_doc(v)?
    } else {
        ExpandDoc { spec: parse_doc(v)?, binding: None, var_count: None, cap: None }
    };
    let n = doc.spec.n();
    let binding = doc.binding.unwrap_or_else(|| SlotBinding::identity(n));
    let var_count = doc.var_count.unwrap_or_else(|| binding.min_var_count());
    let cap = cfg.cap.or(doc.cap).unwrap_or(crate::identities::DEFAULT_CAP);
    let s = expand(&doc.spec, &binding, var_count, cap)?;
    let out = match cfg.output {
        Format::Text => s.render(),
        Format::Json => to_json(&series_json(&s)),
    };
    Ok(Outcome::ok(EXIT_OK, out))
}

fn report_text(head: &str, rep: &VerificationReport) -> String {
    let mut s = format!(
        "{head}: {} (cap {}, {} coefficients)\n",
        rep.status, rep.cap_checked, rep.coefficients_compared
    );
    if let Some(m) = &rep.first_mismatch {
        s += &format!("  first mismatch at {}: lhs = {}, rhs = {}\n", m.monomial, m.lhs, m.rhs);
    }
    if let Some(d) = &rep.detail {
        s += &format!("  {d}\n");
    }
    s
}

fn cmd_verify(cfg: &RunConfig, v: serde_json::Value) -> crate::Result<Outcome> {
    if v.get("which").is_some() {
        let mut inst: ConclusionInstance = parse_doc(v)?;
        if let Some(r) = cfg.reading {
            inst.reading = r;
        }
        if let Some(c) = cfg.cap {
            inst.cap = c;
        }
        let rep = check_conclusion(&inst);
        let fail = rep.report.status == Status::Fail || (rep.report.status == Status::Pass && !rep.consistent);
        let out = match cfg.output {
            Format::Text => {
                let mut s = report_text(&format!("{} {}", inst.which, inst.reading), &rep.report);
                if rep.report.status == Status::Pass {
                    s += &format!("  consistent with {}: {}\n", inst.which.general(), rep.consistent);
                }
                s
            }
            Format::Json => to_json(&rep),
        };
        return Ok(Outcome::ok(status_code(fail), out));
    }
    let mut inst: IdentityInstance = parse_doc(v)?;
    if let Some(r) = cfg.reading {
        inst.reading = r;
    }
    if let Some(c) = cfg.cap {
        inst.cap = c;
    }
    let rep = verify(&inst);
    let out = match cfg.output {
        Format::Text => report_text(&format!("{} {}", inst.id, inst.reading), &rep),
        Format::Json => to_json(&rep),
    };
    Ok(Outcome::ok(status_code(rep.status == Status::Fail), out))
}

fn fuzz_text(sum: &FuzzSummary) -> String {
    let mut s = format!("seed {} count {} cap {} reading {}\n", sum.seed, sum.count, sum.cap, sum.reading);
    for r in &sum.rows {
        let id = r.id.map(|i| i.to_string()).unwrap_or_default();
        s += &format!(
            "{id:<5} pass {:>4}/{:<4} fail {:>4}  pole {:>4}  n/a {:>4}\n",
            r.pass, r.total, r.fail, r.pole, r.not_applicable
        );
    }
    for f in &sum.failures {
        s += &format!("{} #{}: {}", f.id, f.index, report_text("", &f.report).trim_start_matches(": "));
    }
    s
}

fn selected_ids(cfg: &RunConfig) -> Vec<IdentityId> {
    if cfg.ids.is_empty() {
        IdentityId::ALL.to_vec()
    } else {
        cfg.ids.clone()
    }
}

fn cmd_fuzz(cfg: &RunConfig) -> Outcome {
    let cap = cfg.cap.unwrap_or(crate::identities::DEFAULT_CAP);
    let reading = cfg.reading.unwrap_or_default();
    let sum = batch::fuzz(cfg.seed, cfg.count, cap, reading, &selected_ids(cfg));
    let out = match cfg.output {
        Format::Text => fuzz_text(&sum),
        Format::Json => to_json(&sum),
    };
    Outcome::ok(status_code(sum.any_fail()), out)
}

#[derive(Clone, Debug, Default, Serialize)]
#[serde(rename_all = "camelCase")]
struct ConclusionRow {
    id: String,
    total: u64,
    pass: u64,
    fail: u64,
    pole: u64,
    not_applicable: u64,
    consistent: u64,
}

/// The `index`-th random instance of a concluding formula under `seed`.
pub fn conclusion_case(seed: u64, which: ConclusionId, index: u64, cap: u32) -> crate::Result<ConclusionInstance> {
    let stream = 22 + which as u64;
    random_conclusion(crate::identities::derive_seed(seed, stream, index), which, batch::FUZZ_R_MAX, cap)
}

fn cmd_conclusions(cfg: &RunConfig) -> Outcome {
    let cap = cfg.cap.unwrap_or(crate::identities::DEFAULT_CAP);
    let reading = cfg.reading.unwrap_or_default();
    let cases: Vec<(ConclusionId, u64)> =
        ConclusionId::ALL.iter().flat_map(|&w| (0..cfg.count).map(move |i| (w, i))).collect();
    let reports: Vec<ConclusionReport> = map_ordered(&cases, |&(w, i)| match conclusion_case(cfg.seed, w, i, cap) {
        Ok(mut inst) => {
            inst.reading = reading;
            check_conclusion(&inst)
        }
        Err(e) => ConclusionReport { which: w, report: VerificationReport::from_error(&e, cap), consistent: false },
    });
    let mut rows: Vec<ConclusionRow> =
        ConclusionId::ALL.iter().map(|w| ConclusionRow { id: w.to_string(), ..Default::default() }).collect();
    let mut bad = false;
    for rep in &reports {
        let row = &mut rows[rep.which as usize];
        row.total += 1;
        match rep.report.status {
            Status::Pass => row.pass += 1,
            Status::Fail => row.fail += 1,
            Status::Pole => row.pole += 1,
            Status::NotApplicable => row.not_applicable += 1,
        }
        if rep.consistent {
            row.consistent += 1;
        }
        bad |= rep.report.status == Status::Fail
            || (reading == Reading::Corrected && rep.report.status == Status::Pass && !rep.consistent);
    }
    let out = match cfg.output {
        Format::Text => {
            let mut s = format!("seed {} count {} cap {cap} reading {reading}\n", cfg.seed, cfg.count);
            for r in &rows {
                s += &format!(
                    "{:<5} pass {:>4}/{:<4} fail {:>4}  pole {:>4}  consistent {:>4}\n",
                    r.id, r.pass, r.total, r.fail, r.pole, r.consistent
                );
            }
            s
        }
        Format::Json => to_json(&json!({
            "seed": cfg.seed, "count": cfg.count, "cap": cap, "reading": reading, "rows": rows
        })),
    };
    Outcome::ok(status_code(bad), out)
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct EvalDoc {
    #[serde(default)]
    spec: Option<KdfSpec>,
    #[serde(default)]
    instance: Option<IdentityInstance>,
    point: Vec<f64>,
    #[serde(default)]
    cap: Option<u32>,
    #[serde(default)]
    rel_tol: Option<f64>,
}

fn cmd_eval(cfg: &RunConfig, v: serde_json::Value) -> crate::Result<Outcome> {
    let doc: EvalDoc = parse_doc(v)?;
    match (doc.spec, doc.instance) {
        (Some(spec), None) => {
            let cap = cfg.cap.or(doc.cap).unwrap_or(30);
            let e = evaluate(&spec, &doc.point, cap)?;
            let out = match cfg.output {
                Format::Text => format!(
                    "value {:e}\nterms {}\ntail {:e}\ndomain {}\n",
                    e.value,
                    e.terms_used,
                    e.tail_estimate,
                    if e.domain_ok { "ok" } else { "outside" }
                ),
                Format::Json => to_json(&e),
            };
            Ok(Outcome::ok(EXIT_OK, out))
        }
        (None, Some(inst)) => {
            let rep = numeric_verify(&inst, &doc.point, doc.rel_tol.unwrap_or(1e-8))?;
            let out = match cfg.output {
                Format::Text => format!(
                    "{} {}: {} (lhs {:e}, rhs {:e}, relative difference {:e}, domain {})\n",
                    inst.id,
                    inst.reading,
                    rep.status,
                    rep.lhs,
                    rep.rhs,
                    rep.rel_diff,
                    if rep.domain_ok { "ok" } else { "outside" }
                ),
                Format::Json => to_json(&rep),
            };
            Ok(Outcome::ok(status_code(rep.status == Status::Fail), out))
        }
        _ => Err(Error::Parse("eval input needs exactly one of \"spec\" and \"instance\"".into())),
    }
}

fn cmd_list(cfg: &RunConfig) -> Outcome {
    let entries: Vec<serde_json::Value> = IdentityId::ALL
        .iter()
        .map(|id| {
            json!({
                "id": id,
                "index": format!("{:?}", id.index_domain()),
                "power": id.uses_power(),
                "corrected": id.has_correction(),
                "summary": id.summary(),
            })
        })
        .chain(ConclusionId::ALL.iter().map(|c| {
            json!({
                "id": c,
                "family": c.family(),
                "specializes": c.general(),
                "corrected": true,
            })
        }))
        .collect();
    let out = match cfg.output {
        Format::Json => to_json(&entries),
        Format::Text => {
            let mut s = String::new();
            for id in IdentityId::ALL {
                let mark = if id.has_correction() { "*" } else { " " };
                s += &format!("{id:<5}{mark} {}\n", id.summary());
            }
            for c in ConclusionId::ALL {
                s += &format!("{c:<5}* {:?} case of {}\n", c.family(), c.general());
            }
            s += "(* = implemented reading differs from the printed one; see `errata`)\n";
            s
        }
    };
    Outcome::ok(EXIT_OK, out)
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrataEntry {
    pub id: String,
    pub note: String,
    pub instance: serde_json::Value,
    pub corrected: VerificationReport,
    pub literal: VerificationReport,
}

fn errata_identity(id: IdentityId, seed: u64, cap: u32) -> Option<ErrataEntry> {
    (0..ERRATA_SEARCH).find_map(|index| {
        let inst = batch::generate(FuzzCase { id, index }, seed, cap, Reading::Corrected).ok()?;
        let corrected = verify(&inst);
        let literal = verify(&inst.clone().with_reading(Reading::Literal));
        (corrected.status == Status::Pass && literal.status == Status::Fail).then(|| ErrataEntry {
            id: id.to_string(),
            note: id.correction_note().unwrap_or_default().to_string(),
            instance: serde_json::to_value(&inst).expect("serializable"),
            corrected,
            literal,
        })
    })
}

fn errata_conclusion(which: ConclusionId, seed: u64, cap: u32) -> Option<ErrataEntry> {
    (0..ERRATA_SEARCH).find_map(|index| {
        let inst = conclusion_case(seed, which, index, cap).ok()?;
        let corrected = check_conclusion(&inst);
        let lit = ConclusionInstance { reading: Reading::Literal, ..inst.clone() };
        let literal = check_conclusion(&lit).report;
        (corrected.passed() && literal.status == Status::Fail).then(|| ErrataEntry {
            id: which.to_string(),
            note: which.correction_note().to_string(),
            instance: serde_json::to_value(&inst).expect("serializable"),
            corrected: corrected.report,
            literal,
        })
    })
}

/// One passing corrected and one failing literal instance per corrected
/// formula; `Err(id)` where the search came up empty.
pub fn errata_entries(seed: u64, cap: u32) -> Vec<Result<ErrataEntry, String>> {
    enum Job {
        Id(IdentityId),
        Conclusion(ConclusionId),
    }
    let jobs: Vec<Job> = IdentityId::ALL
        .iter()
        .filter(|id| id.has_correction())
        .map(|&id| Job::Id(id))
        .chain(ConclusionId::ALL.iter().map(|&c| Job::Conclusion(c)))
        .collect();
    map_ordered(&jobs, |job| match *job {
        Job::Id(id) => errata_identity(id, seed, cap).ok_or_else(|| id.to_string()),
        Job::Conclusion(c) => errata_conclusion(c, seed, cap).ok_or_else(|| c.to_string()),
    })
}

fn cmd_errata(cfg: &RunConfig) -> Outcome {
    let cap = cfg.cap.unwrap_or(ERRATA_CAP);
    let entries = errata_entries(cfg.seed, cap);
    let missing: Vec<&String> = entries.iter().filter_map(|e| e.as_ref().err()).collect();
    let found: Vec<&ErrataEntry> = entries.iter().filter_map(|e| e.as_ref().ok()).collect();
    let out = match cfg.output {
        Format::Json => to_json(&json!({ "cap": cap, "entries": found, "missing": missing })),
        Format::Text => {
            let mut s = String::new();
            for e in &found {
                s += &format!("{}: {}\n", e.id, e.note);
                s += &format!("  instance {}\n", serde_json::to_string(&e.instance).expect("serializable"));
                s += &report_text("  corrected", &e.corrected);
                s += &report_text("  literal", &e.literal);
            }
            for m in &missing {
                s += &format!("{m}: no separating instance found\n");
            }
            s
        }
    };
    Outcome::ok(status_code(!missing.is_empty()), out)
}
