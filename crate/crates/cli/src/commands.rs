use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use devscreen_core::casebase::{CaseBase, RetainOutcome};
use devscreen_core::engine::{
    self, evaluate, BoneAgeProvider, BoneAgeTable, EvalQuery, Revision, Screener, ScreeningSession,
};
use devscreen_core::scale::{default_scale, ResponseSheet, ScaleDefinition};
use devscreen_core::similarity::WeightProfile;
use devscreen_core::synth::{self, SynthConfig};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::{Format, ModelArgs};

fn screener(model: &ModelArgs, k: usize) -> CliResult<Screener> {
    let scale = match &model.scale {
        Some(path) => ScaleDefinition::load(path)?,
        None => default_scale(),
    };
    let weights = match &model.weights {
        Some(path) => WeightProfile::load(path)?,
        None => WeightProfile::default(),
    };
    Ok(Screener::new(scale, weights, k))
}

fn load_base(path: &Path) -> CliResult<CaseBase> {
    CaseBase::load(path).map_err(|e| match e {
        devscreen_core::CaseBaseError::Io(io) => CliError::io(path, io),
        other => CliError::invalid(path, other),
    })
}

fn save_base(base: &CaseBase, path: &Path) -> CliResult<()> {
    base.save(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

fn label<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => "?".into(),
    }
}

pub fn init(casebase: &Path, scale: Option<&Path>, force: bool) -> CliResult<()> {
    if casebase.exists() && !force {
        return Err(CliError::Validation(format!(
            "{} already exists; pass --force to replace it",
            casebase.display()
        )));
    }
    if let Some(path) = scale {
        if path.exists() {
            ScaleDefinition::load(path)?;
        } else {
            write_file(path, &default_scale().to_json_pretty())?;
            eprintln!("wrote built-in scale to {}", path.display());
        }
    }
    save_base(&CaseBase::new(), casebase)?;
    eprintln!("initialized empty case base at {}", casebase.display());
    Ok(())
}

pub struct RetainArgs {
    pub solution: Option<String>,
    pub reviser: Option<String>,
    pub created_at: Option<DateTime<Utc>>,
    pub source_tag: String,
}

pub struct ScreenArgs {
    pub sheet: PathBuf,
    pub casebase: PathBuf,
    pub k: usize,
    pub retain: Option<RetainArgs>,
    pub bone_age: Option<(PathBuf, String)>,
}

#[derive(Serialize)]
struct ScreenOutput<'a> {
    #[serde(flatten)]
    session: &'a ScreeningSession,
    diagnostic_assessment_required: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    retained: Option<serde_json::Value>,
}

pub fn screen(args: ScreenArgs, model: &ModelArgs, format: Format) -> CliResult<()> {
    let screener = screener(model, args.k)?;
    let text = fs::read_to_string(&args.sheet).map_err(|e| CliError::io(&args.sheet, e))?;
    let mut sheet: ResponseSheet =
        serde_json::from_str(&text).map_err(|e| CliError::invalid(&args.sheet, e))?;
    if let Some((table, case_ref)) = &args.bone_age {
        if sheet.bone_age_months.is_none() {
            sheet.bone_age_months = BoneAgeTable::load(table)?.lookup(case_ref).months();
        }
    }
    let mut base = load_base(&args.casebase)?;
    let mut session = screener.process_new_case("cli", sheet, &base)?;

    let mut retained = None;
    if let Some(r) = args.retain {
        let reviser = r.reviser.unwrap_or_else(|| "cli".into());
        engine::revise(&mut session, Revision { solution: r.solution, status_override: None }, &reviser)?;
        base.record_hits(&session.match_ids());
        let (outcome, record) = engine::retain_session(
            &mut session,
            &mut base,
            r.created_at.unwrap_or_else(Utc::now),
            &r.source_tag,
        )?;
        save_base(&base, &args.casebase)?;
        let outcome = match outcome {
            RetainOutcome::Added => "added",
            RetainOutcome::Merged(_) => "merged",
        };
        eprintln!("retained as {} ({outcome})", record.id);
        retained = Some(json!({ "case_id": record.id, "outcome": outcome }));
    }

    match format {
        Format::Json => print_json(&ScreenOutput {
            session: &session,
            diagnostic_assessment_required: session.needs_diagnostic_assessment(),
            retained,
        }),
        Format::Table => print!("{}", screen_table(&session)),
    }
    Ok(())
}

fn screen_table(s: &ScreeningSession) -> String {
    let j = &s.judgment;
    let mut out = String::new();
    let mut line = |text: String| {
        out.push_str(&text);
        out.push('\n');
    };
    line(format!("physical age       {:.1} months", s.sheet.physical_age_months));
    line(format!("developmental age  {:.2} months", j.developmental_age_months));
    line(format!("ratio              {:.4}  {}", j.ratio, label(&j.status)));
    line(format!("width              {}  {}", j.width, label(&j.width_status)));
    line(format!(
        "reliability        {}  ({} don't know)",
        label(&j.reliability),
        j.dont_know_count
    ));
    if s.needs_diagnostic_assessment() {
        line("NOTE: diagnostic assessment required".into());
    }
    line(String::new());
    line(format!("{:<20}{:>7}{:>7}", "category", "basal", "peak"));
    for l in &s.levels {
        line(format!("{:<20}{:>7}{:>7}", l.category.as_str(), l.basal, l.peak));
    }
    line(String::new());
    if s.matches.is_empty() {
        line("no matching cases".into());
    } else {
        line(format!("{:<6}{:<24}{:>12}  {:<8}  {}", "rank", "case", "similarity", "status", "solution"));
        for m in &s.matches {
            line(format!(
                "{:<6}{:<24}{:>12.6}  {:<8}  {}",
                m.matched.rank,
                m.matched.case_id,
                m.matched.score.value,
                label(&m.status),
                m.solution
            ));
        }
    }
    line(String::new());
    line(format!("proposed solution: {}", s.proposed_solution));
    out
}

/// `report.json` pairs with `report.csv`; a path without extension gains both.
fn report_paths(out: &Path) -> (PathBuf, PathBuf) {
    let json = if out.extension().is_some() { out.to_path_buf() } else { out.with_extension("json") };
    (json.clone(), json.with_extension("csv"))
}

pub fn eval(
    casebase: &Path,
    queries: &Path,
    k: usize,
    model: &ModelArgs,
    out: Option<&Path>,
    format: Format,
) -> CliResult<()> {
    let screener = screener(model, k)?;
    let base = load_base(casebase)?;
    let file = File::open(queries).map_err(|e| CliError::io(queries, e))?;
    let queries = EvalQuery::read_jsonl(BufReader::new(file))?;
    if k == 0 {
        return Err(CliError::Validation("k must be at least 1".into()));
    }
    let report = evaluate(&base, &queries, &screener, k)?;
    if let Some(out) = out {
        let (json_path, csv_path) = report_paths(out);
        write_file(&json_path, &(report.to_json_pretty() + "\n"))?;
        write_file(&csv_path, &report.to_csv())?;
        eprintln!("wrote {} and {}", json_path.display(), csv_path.display());
    }
    match format {
        Format::Json => println!("{}", report.to_json_pretty()),
        Format::Table => print!("{}", report.to_table()),
    }
    Ok(())
}

pub fn synth(
    seed: u64,
    cases: usize,
    queries: usize,
    model: &ModelArgs,
    out: &Path,
    format: Format,
) -> CliResult<()> {
    let screener = screener(model, engine::DEFAULT_K)?;
    let config = SynthConfig { seed, cases, queries, ..Default::default() };
    let data = synth::generate(&config, &screener)?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let base_path = out.join("casebase.jsonl");
    let query_path = out.join("queries.jsonl");
    save_base(&data.base, &base_path)?;
    let file = File::create(&query_path).map_err(|e| CliError::io(&query_path, e))?;
    let mut sink = BufWriter::new(file);
    EvalQuery::write_jsonl(&data.queries, &mut sink)
        .and_then(|()| sink.flush())
        .map_err(|e| CliError::io(&query_path, e))?;
    match format {
        Format::Json => print_json(&json!({
            "seed": seed,
            "cases": data.base.len(),
            "queries": data.queries.len(),
            "casebase": base_path,
            "queries_file": query_path,
        })),
        Format::Table => {
            println!("cases    {}  {}", data.base.len(), base_path.display());
            println!("queries  {}  {}", data.queries.len(), query_path.display());
        }
    }
    Ok(())
}

fn parse_ids(list: &str) -> CliResult<Vec<String>> {
    let ids: Vec<String> = list.split(',').map(|s| s.trim().to_string()).collect();
    if ids.iter().any(|id| id.is_empty() || id.chars().any(char::is_whitespace)) {
        return Err(CliError::Validation(format!("malformed id list `{list}`")));
    }
    Ok(ids)
}

/// Unknown ids abort the purge so a typo cannot silently pass.
pub fn purge(casebase: &Path, ids: &str, format: Format) -> CliResult<()> {
    let ids = parse_ids(ids)?;
    let mut base = load_base(casebase)?;
    let unknown: Vec<&String> = ids.iter().filter(|id| base.get(id).is_none()).collect();
    if !unknown.is_empty() {
        let names: Vec<&str> = unknown.iter().map(|s| s.as_str()).collect();
        return Err(CliError::Validation(format!("unknown case id(s): {}", names.join(", "))));
    }
    let summary = base.purge(&ids);
    save_base(&base, casebase)?;
    match format {
        Format::Json => print_json(&json!({ "removed": summary.removed, "total": base.len() })),
        Format::Table => {
            for id in &summary.removed {
                println!("removed {id}");
            }
            println!("{} case(s) remain", base.len());
        }
    }
    Ok(())
}

pub fn merge_report(casebase: &Path, format: Format) -> CliResult<()> {
    let base = load_base(casebase)?;
    let groups = base.duplicate_groups();
    match format {
        Format::Json => print_json(&json!({ "groups": groups })),
        Format::Table => {
            if groups.is_empty() {
                println!("no duplicate groups");
            }
            for (i, group) in groups.iter().enumerate() {
                println!("group {}: {}", i + 1, group.join(", "));
            }
        }
    }
    Ok(())
}
