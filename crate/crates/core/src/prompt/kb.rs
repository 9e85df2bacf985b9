//! Guideline documents and the output-format instruction.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PromptError;

pub const FORMAT_FILE: &str = "format.txt";
pub const MANIFEST_FILE: &str = "manifest.txt";

const BUILTIN_DOCS: &[(&str, &str)] = &[
    ("10-planning-process", include_str!("../../kb/10-planning-process.txt")),
    ("20-incident-priorities", include_str!("../../kb/20-incident-priorities.txt")),
    ("30-plan-of-action", include_str!("../../kb/30-plan-of-action.txt")),
    ("40-asset-assignment", include_str!("../../kb/40-asset-assignment.txt")),
];
const BUILTIN_FORMAT: &str = include_str!("../../kb/format.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GuidelineDoc {
    pub id: String,
    pub title: String,
    pub body: String,
    /// Lower ranks are kept longer and rendered first.
    pub priority: i32,
}

impl GuidelineDoc {
    /// Builds a doc from file text; a leading `# ` line becomes the title.
    pub fn from_text(id: impl Into<String>, text: &str, priority: i32) -> Self {
        let id = id.into();
        let text = text.trim();
        let (title, body) = match text.strip_prefix("# ") {
            Some(rest) => {
                let (title, body) = rest.split_once('\n').unwrap_or((rest, ""));
                (title.trim().to_owned(), body.trim().to_owned())
            }
            None => (id.clone(), text.to_owned()),
        };
        Self {
            id,
            title,
            body,
            priority,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KnowledgeBase {
    pub docs: Vec<GuidelineDoc>,
    pub format_spec: String,
}

impl KnowledgeBase {
    /// The guideline set and format instruction shipped with the crate.
    pub fn builtin() -> Self {
        Self {
            docs: BUILTIN_DOCS
                .iter()
                .enumerate()
                .map(|(i, (id, text))| GuidelineDoc::from_text(*id, text, i as i32))
                .collect(),
            format_spec: BUILTIN_FORMAT.trim().to_owned(),
        }
    }

    /// Loads `*.txt` guideline files plus `format.txt` from `dir`. Priority
    /// follows file-name order unless `manifest.txt` lists the files (one
    /// per line) in the desired order.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let io = |e: std::io::Error| PromptError::KnowledgeBase(format!("{}: {e}", dir.display()));
        let format_spec = fs::read_to_string(dir.join(FORMAT_FILE))
            .map_err(io)?
            .trim()
            .to_owned();
        if format_spec.is_empty() {
            return Err(PromptError::KnowledgeBase(format!(
                "{} is empty",
                dir.join(FORMAT_FILE).display()
            )));
        }
        let manifest = dir.join(MANIFEST_FILE);
        let files: Vec<String> = if manifest.is_file() {
            fs::read_to_string(&manifest)
                .map_err(io)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_owned)
                .collect()
        } else {
            let mut names: Vec<String> = fs::read_dir(dir)
                .map_err(io)?
                .filter_map(Result::ok)
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n.ends_with(".txt") && n != FORMAT_FILE && n != MANIFEST_FILE)
                .collect();
            names.sort();
            names
        };
        let mut docs = Vec::with_capacity(files.len());
        for (rank, name) in files.iter().enumerate() {
            let text = fs::read_to_string(dir.join(name)).map_err(io)?;
            let id = name.strip_suffix(".txt").unwrap_or(name);
            let doc = GuidelineDoc::from_text(id, &text, rank as i32);
            if doc.body.is_empty() {
                return Err(PromptError::KnowledgeBase(format!("{name} has an empty body")));
            }
            if docs.iter().any(|d: &GuidelineDoc| d.id == doc.id) {
                return Err(PromptError::KnowledgeBase(format!("duplicate guideline `{id}`")));
            }
            docs.push(doc);
        }
        Ok(Self { docs, format_spec })
    }
}
