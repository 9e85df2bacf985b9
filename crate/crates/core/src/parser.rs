//! Tolerant, line-oriented parser for plan-of-action text.
//!
//! A plan is a sequence of labelled sections (objective, critical factors,
//! main/auxiliary operations, end states, FAS justification). A section runs
//! until the next recognised heading; an unknown `Label:` line at line start
//! closes the current section and opens an ignored one. Inside operations
//! sections the `Task k:` / `Purpose k:` / `Assets performing task:` labels are
//! found anywhere in a line, so both one-label-per-line output and the
//! run-on tabular form parse the same way.
//!
//! Spans in diagnostics are byte ranges into the text handed to the public
//! entry points.

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::model::{
    DiagnosticCode, EndStates, FasJustification, ParseDiagnostic, PlanOfAction, Provenance, Span,
    TaskAssignment,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no plan blocks found (expected headings such as \"Plan of Action 1\")")]
    UnparseableInput,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanSetParse {
    /// Plans whose blocks parsed without error-severity diagnostics.
    pub plans: Vec<PlanOfAction>,
    /// Number of plan blocks found in the text.
    pub blocks: usize,
    pub diagnostics: Vec<ParseDiagnostic>,
}

impl PlanSetParse {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(ParseDiagnostic::is_error)
    }
}

static PLAN_DELIMITER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^[\s#*>_\-]*(?:plan\s+of\s+action|course\s+of\s+action|coa|option)\s*(?:#|no\.)?\s*(\d+)\s*(?:[:.)(*#\-–—]|$)",
    )
    .unwrap()
});

static LINE_DECORATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:[\s#>*_•+\-]*(?:\d+[.)]\s+)?)[*_]*").unwrap());

static HEADING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(concat!(
        r"(?i)^(?:",
        r"(?P<critical>critical(?:\s+to\s+(?:this|the)\s+objective|\s+factors?|\s+requirements?)?|what\s+is\s+critical)",
        r"|(?P<objective>(?:main\s+|mission\s+|primary\s+)?objective)",
        r"|(?P<main>main\s+operations?|main\s+effort|primary\s+operations?)",
        r"|(?P<aux>auxiliary\s+operations?|supporting\s+operations?|support\s+operations?|secondary\s+operations?)",
        r"|(?P<end>(?:desired\s+)?end[\s\-]+states?)",
        r"|(?P<fas>feasibility,?\s+acceptability,?\s+(?:and\s+)?suitability(?:\s*\(fas\))?|fas(?:\s+justification)?|justification)",
        r"|(?P<feasible>feasib(?:le|ility))",
        r"|(?P<acceptable>acceptab(?:le|ility))",
        r"|(?P<suitable>suitab(?:le|ility))",
        r")\b",
    ))
    .unwrap()
});

static SEPARATOR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[*_]*\s*(?::[*_]*|\s[-–—]\s)\s*").unwrap());

static TRAILER_ONLY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[*_#:\s]*$").unwrap());

static GENERIC_LABEL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([A-Za-z][A-Za-z'/&() ]{0,40}?)[*_]*\s*:").unwrap());

static OPS_LABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:(?P<assets>assets?(?:\s+performing(?:\s+(?:this|the))?\s+tasks?)?)|(?P<kind>task|purpose)(?:\s*(?P<num>\d+))?)[*_]*\s*:[*_]*",
    )
    .unwrap()
});

static OPS_SUBLABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(?:task|purpose|assets?(?:\s+performing(?:\s+(?:this|the))?\s+tasks?)?)$")
        .unwrap()
});

static END_STATE_LABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(assets?|victims?|civilians?|terrain|other)[*_]*\s*:[*_]*").unwrap()
});

static END_STATE_SUBLABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(?:assets?|victims?|civilians?|terrain|other)$").unwrap()
});

static FAS_LABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(feasib\w*|acceptab\w*|suitab\w*)[*_]*\s*:[*_]*").unwrap()
});

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Preamble,
    Unrecognized,
    Objective,
    Critical,
    Main,
    Aux,
    EndStates,
    Fas,
    Feasible,
    Acceptable,
    Suitable,
}

/// A piece of section body text with its absolute byte offset.
#[derive(Debug, Clone)]
struct Piece<'a> {
    text: &'a str,
    offset: usize,
}

#[derive(Debug)]
struct Section<'a> {
    kind: Kind,
    heading: Span,
    body: Vec<Piece<'a>>,
}

/// Lines of `text` with their absolute start offsets, line terminators removed.
fn lines_with_offsets(text: &str, base: usize) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = base;
    text.split_inclusive('\n').map(move |raw| {
        let start = offset;
        offset += raw.len();
        (start, raw.trim_end_matches(['\n', '\r']))
    })
}

fn strip_decoration(line: &str) -> (usize, &str) {
    let cut = LINE_DECORATION.find(line).map_or(0, |m| m.end());
    (cut, &line[cut..])
}

/// Recognise a top-level heading; returns the section kind, the label's
/// length, and the byte offset (within `line`) where the inline value starts.
fn match_heading(line: &str) -> Option<(Kind, usize, usize)> {
    let (lead, body) = strip_decoration(line);
    let caps = HEADING.captures(body)?;
    let label_end = caps.get(0)?.end();
    let kind = [
        ("critical", Kind::Critical),
        ("objective", Kind::Objective),
        ("main", Kind::Main),
        ("aux", Kind::Aux),
        ("end", Kind::EndStates),
        ("fas", Kind::Fas),
        ("feasible", Kind::Feasible),
        ("acceptable", Kind::Acceptable),
        ("suitable", Kind::Suitable),
    ]
    .into_iter()
    .find(|(name, _)| caps.name(name).is_some())?
    .1;
    let remainder = &body[label_end..];
    let value_start = if let Some(sep) = SEPARATOR.find(remainder) {
        label_end + sep.end()
    } else if TRAILER_ONLY.is_match(remainder) {
        body.len()
    } else {
        return None;
    };
    Some((kind, lead + label_end, lead + value_start))
}

fn is_context_sublabel(kind: Kind, label: &str) -> bool {
    let label = label.trim();
    match kind {
        Kind::Main | Kind::Aux => OPS_SUBLABEL.is_match(label),
        Kind::EndStates => END_STATE_SUBLABEL.is_match(label),
        Kind::Fas => FAS_LABEL.is_match(&format!("{label}:")),
        _ => false,
    }
}

/// An unknown `Label:` at line start, which closes the current section.
fn match_unknown_label(line: &str, current: Kind) -> Option<usize> {
    let (lead, body) = strip_decoration(line);
    let caps = GENERIC_LABEL.captures(body)?;
    let label = caps.get(1)?.as_str();
    if !label.starts_with(|c: char| c.is_ascii_uppercase())
        || label.split_whitespace().count() > 4
        || is_context_sublabel(current, label)
    {
        return None;
    }
    Some(lead + caps.get(0)?.end())
}

fn split_sections(text: &str, base: usize) -> (Vec<Section<'_>>, Vec<ParseDiagnostic>) {
    let mut sections = vec![Section {
        kind: Kind::Preamble,
        heading: Span::new(base, base),
        body: Vec::new(),
    }];
    let mut diagnostics = Vec::new();
    for (offset, line) in lines_with_offsets(text, base) {
        let current = sections.last().map_or(Kind::Preamble, |s| s.kind);
        if let Some((kind, label_end, value_start)) = match_heading(line) {
            sections.push(Section {
                kind,
                heading: Span::new(offset, offset + label_end),
                body: vec![Piece {
                    text: &line[value_start..],
                    offset: offset + value_start,
                }],
            });
        } else if current != Kind::Preamble
            && let Some(label_end) = match_unknown_label(line, current)
        {
            let span = Span::new(offset, offset + label_end);
            diagnostics.push(ParseDiagnostic::warning(
                DiagnosticCode::UnrecognizedSection,
                span,
                format!("unrecognized section {:?} ignored", line[..label_end].trim()),
            ));
            sections.push(Section {
                kind: Kind::Unrecognized,
                heading: span,
                body: Vec::new(),
            });
        } else if let Some(section) = sections.last_mut() {
            section.body.push(Piece { text: line, offset });
        }
    }
    (sections, diagnostics)
}

fn clean(text: &str) -> &str {
    text.trim_matches(|c: char| c.is_whitespace() || c == '*' || c == '_')
}

fn strip_bullet(text: &str) -> &str {
    let trimmed = text.trim_start();
    let bullet = trimmed
        .strip_prefix("- ")
        .or_else(|| trimmed.strip_prefix("* "))
        .or_else(|| trimmed.strip_prefix("• "))
        .or_else(|| trimmed.strip_prefix("+ "));
    bullet.unwrap_or(trimmed)
}

fn push_text(buf: &mut String, text: &str) {
    let text = clean(text);
    if text.is_empty() {
        return;
    }
    if !buf.is_empty() {
        buf.push(' ');
    }
    buf.push_str(text);
}

fn joined(body: &[Piece<'_>]) -> String {
    let mut out = String::new();
    for piece in body {
        push_text(&mut out, strip_bullet(piece.text));
    }
    out
}

/// Splits section body text on inline labels found by `label_re`, yielding
/// `(Some(label match), text)` segments in order; text preceding the first
/// label is yielded with `None`.
fn inline_segments<'a>(
    body: &[Piece<'a>],
    label_re: &Regex,
) -> Vec<(Option<(regex::Captures<'a>, Span)>, String)> {
    let mut out: Vec<(Option<(regex::Captures<'a>, Span)>, String)> = vec![(None, String::new())];
    for piece in body {
        let line = piece.text;
        let mut cursor = 0;
        for caps in label_re.captures_iter(line) {
            let m = caps.get(0).expect("group 0");
            if let Some(last) = out.last_mut() {
                push_text(&mut last.1, strip_bullet(&line[cursor..m.start()]));
            }
            let span = Span::new(piece.offset + m.start(), piece.offset + m.end());
            out.push((Some((caps, span)), String::new()));
            cursor = m.end();
        }
        if let Some(last) = out.last_mut() {
            push_text(&mut last.1, strip_bullet(&line[cursor..]));
        }
    }
    out
}

#[derive(Debug)]
struct TaskDraft {
    index: Option<u32>,
    span: Span,
    description: String,
    purpose: Option<String>,
    assets: Option<String>,
}

#[derive(Clone, Copy)]
enum OpsField {
    Description,
    Purpose,
    Assets,
    Orphan,
}

fn parse_ops(body: &[Piece<'_>], diagnostics: &mut Vec<ParseDiagnostic>) -> Vec<TaskDraft> {
    let mut tasks: Vec<TaskDraft> = Vec::new();
    let mut field = OpsField::Orphan;
    for (label, text) in inline_segments(body, &OPS_LABEL) {
        if let Some((caps, span)) = label {
            if caps.name("assets").is_some() {
                field = match tasks.last() {
                    Some(t) if t.assets.is_none() => OpsField::Assets,
                    _ => {
                        diagnostics.push(ParseDiagnostic::warning(
                            DiagnosticCode::UnrecognizedSection,
                            span,
                            "asset list outside of any task ignored",
                        ));
                        OpsField::Orphan
                    }
                };
            } else if caps
                .name("kind")
                .is_some_and(|k| k.as_str().eq_ignore_ascii_case("task"))
            {
                tasks.push(TaskDraft {
                    index: caps.name("num").and_then(|n| n.as_str().parse().ok()),
                    span,
                    description: String::new(),
                    purpose: None,
                    assets: None,
                });
                field = OpsField::Description;
            } else {
                field = match tasks.last() {
                    Some(t) if t.purpose.is_none() => OpsField::Purpose,
                    _ => {
                        diagnostics.push(ParseDiagnostic::warning(
                            DiagnosticCode::PurposeWithoutTask,
                            span,
                            "purpose without a preceding task ignored",
                        ));
                        OpsField::Orphan
                    }
                };
            }
        }
        let Some(task) = tasks.last_mut() else {
            continue;
        };
        let target = match field {
            OpsField::Description => &mut task.description,
            OpsField::Purpose => task.purpose.get_or_insert_with(String::new),
            OpsField::Assets => task.assets.get_or_insert_with(String::new),
            OpsField::Orphan => continue,
        };
        push_text(target, &text);
    }
    for task in &tasks {
        if task.purpose.as_deref().is_none_or(str::is_empty) {
            diagnostics.push(ParseDiagnostic::warning(
                DiagnosticCode::TaskWithoutPurpose,
                task.span,
                format!(
                    "task {} has no purpose",
                    task.index.map_or("?".to_owned(), |i| i.to_string())
                ),
            ));
        }
    }
    tasks
}

fn parse_end_states(body: &[Piece<'_>]) -> EndStates {
    let mut end = EndStates::default();
    for (label, text) in inline_segments(body, &END_STATE_LABEL) {
        let slot = match label {
            None => {
                if text.is_empty() {
                    continue;
                }
                &mut end.other
            }
            Some((caps, _)) => match caps[1].to_ascii_lowercase().trim_end_matches('s') {
                "asset" => &mut end.assets,
                "victim" => &mut end.victims,
                "civilian" => &mut end.civilians,
                "terrain" => &mut end.terrain,
                _ => &mut end.other,
            },
        };
        push_text(slot.get_or_insert_with(String::new), &text);
    }
    end
}

fn fas_slot<'f>(fas: &'f mut FasJustification, label: &str) -> &'f mut String {
    let label = label.to_ascii_lowercase();
    if label.starts_with("feasib") {
        &mut fas.feasible
    } else if label.starts_with("acceptab") {
        &mut fas.acceptable
    } else {
        &mut fas.suitable
    }
}

/// Parse a single plan block. A leading "Plan of Action N" heading sets
/// the ordinal; without one it is 1.
pub fn parse_plan(text: &str) -> (PlanOfAction, Vec<ParseDiagnostic>) {
    let ordinal = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .and_then(|l| PLAN_DELIMITER.captures(l))
        .and_then(|c| c[1].parse::<u8>().ok())
        .unwrap_or(1);
    parse_block(text, 0, ordinal)
}

fn parse_block(text: &str, base: usize, ordinal: u8) -> (PlanOfAction, Vec<ParseDiagnostic>) {
    let whole = Span::new(base, base + text.len());
    let (sections, mut diagnostics) = split_sections(text, base);

    let mut objective: Option<String> = None;
    let mut critical: Option<String> = None;
    let mut main: Option<Vec<TaskDraft>> = None;
    let mut aux: Vec<TaskDraft> = Vec::new();
    let mut end_states: Option<EndStates> = None;
    let mut fas: Option<FasJustification> = None;
    let mut main_heading: Option<Span> = None;
    let mut end_heading: Option<Span> = None;

    for section in &sections {
        match section.kind {
            Kind::Main => {
                main_heading.get_or_insert(section.heading);
            }
            Kind::EndStates => {
                end_heading.get_or_insert(section.heading);
            }
            _ => {}
        }
        match section.kind {
            Kind::Preamble | Kind::Unrecognized => {}
            Kind::Objective => push_text(objective.get_or_insert_with(String::new), &joined(&section.body)),
            Kind::Critical => push_text(critical.get_or_insert_with(String::new), &joined(&section.body)),
            Kind::Main => main
                .get_or_insert_with(Vec::new)
                .extend(parse_ops(&section.body, &mut diagnostics)),
            Kind::Aux => aux.extend(parse_ops(&section.body, &mut diagnostics)),
            Kind::EndStates => {
                let parsed = parse_end_states(&section.body);
                let target = end_states.get_or_insert_with(EndStates::default);
                for (dst, src) in [
                    (&mut target.assets, parsed.assets),
                    (&mut target.victims, parsed.victims),
                    (&mut target.civilians, parsed.civilians),
                    (&mut target.terrain, parsed.terrain),
                    (&mut target.other, parsed.other),
                ] {
                    if let Some(src) = src {
                        push_text(dst.get_or_insert_with(String::new), &src);
                    }
                }
            }
            Kind::Fas => {
                let fas = fas.get_or_insert_with(FasJustification::default);
                for (label, text) in inline_segments(&section.body, &FAS_LABEL) {
                    if let Some((caps, _)) = label {
                        push_text(fas_slot(fas, &caps[1]), &text);
                    }
                }
            }
            Kind::Feasible | Kind::Acceptable | Kind::Suitable => {
                let fas = fas.get_or_insert_with(FasJustification::default);
                let slot = match section.kind {
                    Kind::Feasible => &mut fas.feasible,
                    Kind::Acceptable => &mut fas.acceptable,
                    _ => &mut fas.suitable,
                };
                push_text(slot, &joined(&section.body));
            }
        }
    }

    if objective.as_deref().is_none_or(str::is_empty) {
        diagnostics.push(ParseDiagnostic::error(
            DiagnosticCode::MissingObjective,
            whole,
            "plan has no objective",
        ));
    }
    if critical.as_deref().is_none_or(str::is_empty) {
        diagnostics.push(ParseDiagnostic::warning(
            DiagnosticCode::MissingCritical,
            whole,
            "plan states nothing critical to the objective",
        ));
    }
    let main = main.unwrap_or_default();
    if main.is_empty() {
        diagnostics.push(ParseDiagnostic::error(
            DiagnosticCode::MissingMainOps,
            main_heading.unwrap_or(whole),
            "plan has no main operations",
        ));
    }
    let end_states = end_states.unwrap_or_default();
    if end_states.is_empty() {
        diagnostics.push(ParseDiagnostic::error(
            DiagnosticCode::MissingEndStates,
            end_heading.unwrap_or(whole),
            "plan has no end states",
        ));
    }

    let main_len = main.len();
    let drafts: Vec<TaskDraft> = main.into_iter().chain(aux).collect();
    let in_order = drafts
        .iter()
        .try_fold(0u32, |last, t| match t.index {
            Some(i) if i > last => Some(i),
            _ => None,
        })
        .is_some();
    if !in_order && let Some(first) = drafts.first() {
        diagnostics.push(ParseDiagnostic::warning(
            DiagnosticCode::TaskResequenced,
            first.span,
            "task numbers were missing or out of order; renumbered in document order",
        ));
    }
    let mut tasks: Vec<TaskAssignment> = drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| TaskAssignment {
            index: if in_order { d.index.unwrap_or(0) } else { i as u32 + 1 },
            description: d.description,
            purpose: d.purpose.unwrap_or_default(),
            asset_refs: Vec::new(),
            raw_asset_text: d.assets.unwrap_or_default(),
            location: None,
        })
        .collect();
    let aux_ops = tasks.split_off(main_len);

    let plan = PlanOfAction {
        ordinal,
        objective: objective.unwrap_or_default(),
        critical: critical.unwrap_or_default(),
        main_ops: tasks,
        aux_ops,
        end_states,
        fas,
        provenance: Provenance {
            backend: String::new(),
            round: 0,
            source: text.to_owned(),
        },
    };
    (plan, diagnostics)
}

/// Byte ranges of plan blocks, each starting at a delimiter line.
fn plan_blocks(text: &str) -> Vec<std::ops::Range<usize>> {
    let starts: Vec<usize> = lines_with_offsets(text, 0)
        .filter(|(_, line)| PLAN_DELIMITER.is_match(line))
        .map(|(offset, _)| offset)
        .collect();
    starts
        .iter()
        .enumerate()
        .map(|(i, &start)| start..starts.get(i + 1).copied().unwrap_or(text.len()))
        .collect()
}

/// Split a multi-plan reply on "Plan of Action N" / "COA N" / "Option N"
/// headings and parse each block.
pub fn parse_plan_set(text: &str, expected: usize) -> Result<PlanSetParse, ParseError> {
    let blocks = plan_blocks(text);
    if blocks.is_empty() {
        return Err(ParseError::UnparseableInput);
    }
    let mut plans = Vec::new();
    let mut diagnostics = Vec::new();
    if blocks.len() != expected {
        diagnostics.push(ParseDiagnostic::error(
            DiagnosticCode::PlanCountMismatch,
            Span::new(0, text.len()),
            format!("expected {expected} plans, found {}", blocks.len()),
        ));
    }
    for (i, range) in blocks.iter().enumerate() {
        let ordinal = u8::try_from(i + 1).unwrap_or(u8::MAX);
        let (plan, diags) = parse_block(&text[range.clone()], range.start, ordinal);
        if !diags.iter().any(ParseDiagnostic::is_error) {
            plans.push(plan);
        }
        diagnostics.extend(diags);
    }
    Ok(PlanSetParse {
        blocks: blocks.len(),
        plans,
        diagnostics,
    })
}

/// Parse a reply expected to carry one revised plan. A leading plan heading
/// is optional; more than one heading is a count mismatch.
pub fn parse_revision(text: &str, ordinal: u8) -> (Option<PlanOfAction>, Vec<ParseDiagnostic>) {
    match parse_plan_set(text, 1) {
        Ok(set) => {
            let ok = !set.has_errors();
            let plan = set.plans.into_iter().next().filter(|_| ok).map(|mut p| {
                p.ordinal = ordinal;
                p
            });
            (plan, set.diagnostics)
        }
        Err(ParseError::UnparseableInput) => {
            let (mut plan, diagnostics) = parse_block(text, 0, ordinal);
            plan.ordinal = ordinal;
            let ok = !diagnostics.iter().any(ParseDiagnostic::is_error);
            (ok.then_some(plan), diagnostics)
        }
    }
}

fn push_line(out: &mut String, label: &str, value: &str) {
    out.push_str(label);
    out.push(':');
    if !value.is_empty() {
        out.push(' ');
        out.push_str(value);
    }
    out.push('\n');
}

/// Canonical text of a plan, headed "Plan of Action N". Tasks are renumbered
/// 1..n across main then auxiliary operations; empty auxiliary operations
/// omit their heading.
pub fn serialize_plan(plan: &PlanOfAction) -> String {
    let mut out = format!("Plan of Action {}\n", plan.ordinal);
    push_line(&mut out, "Objective", &plan.objective);
    push_line(&mut out, "Critical to this objective", &plan.critical);
    let mut n = 0u32;
    let mut ops = |out: &mut String, heading: &str, tasks: &[TaskAssignment]| {
        out.push_str(heading);
        out.push_str(":\n");
        for task in tasks {
            n += 1;
            push_line(out, &format!("Task {n}"), &task.description);
            push_line(out, &format!("Purpose {n}"), &task.purpose);
            push_line(out, "Assets performing task", &task.raw_asset_text);
        }
    };
    ops(&mut out, "Main Operations", &plan.main_ops);
    if !plan.aux_ops.is_empty() {
        ops(&mut out, "Auxiliary Operations", &plan.aux_ops);
    }
    out.push_str("End States:\n");
    let end = &plan.end_states;
    for (label, value) in [
        ("Other", &end.other),
        ("Assets", &end.assets),
        ("Victims", &end.victims),
        ("Civilians", &end.civilians),
        ("Terrain", &end.terrain),
    ] {
        if let Some(value) = value {
            push_line(&mut out, label, value);
        }
    }
    if let Some(fas) = &plan.fas {
        push_line(&mut out, "Feasibility", &fas.feasible);
        push_line(&mut out, "Acceptability", &fas.acceptable);
        push_line(&mut out, "Suitability", &fas.suitable);
    }
    out
}

/// Canonical multi-plan text: the plans separated by blank lines.
pub fn serialize_plan_set(plans: &[PlanOfAction]) -> String {
    plans.iter().map(serialize_plan).collect::<Vec<_>>().join("\n")
}
