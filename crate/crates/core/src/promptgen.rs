//! Positive/negative prompt bundle for the generation backend.
//!
//! Templates are versioned. A released version is never edited; wording
//! changes go into a new version so stored designs stay reproducible.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::digest::{json_sha256, json_sha256_hex};
use crate::model::{spaced_label, DesignRequest, FurnitureSelection, Warning};

pub const DEFAULT_NEGATIVE_PROMPT: &str = "blurry, distorted geometry, extra walls, watermark, text";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateVersion {
    #[default]
    V1,
}

impl TemplateVersion {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateVersion::V1 => "v1",
        }
    }
}

/// The text pair sent to the backend plus provenance hashes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub positive: String,
    pub negative: String,
    /// `request_hash`, `selection_hash`, `template_version`.
    pub metadata: BTreeMap<String, String>,
}

impl PromptBundle {
    /// SHA-256 of the bundle's JSON encoding.
    pub fn hash(&self) -> [u8; 32] {
        json_sha256(self)
    }

    pub fn template_version(&self) -> Option<&str> {
        self.metadata.get("template_version").map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptBuilder {
    pub version: TemplateVersion,
    pub negative: String,
}

impl Default for PromptBuilder {
    fn default() -> Self {
        Self { version: TemplateVersion::V1, negative: DEFAULT_NEGATIVE_PROMPT.to_string() }
    }
}

fn format_meters(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Whole-word (space/punctuation delimited) occurrences of `phrase` in `text`.
pub fn count_phrase(text: &str, phrase: &str) -> usize {
    if phrase.is_empty() {
        return 0;
    }
    let bytes = text.as_bytes();
    let is_word = |b: u8| b.is_ascii_alphanumeric() || b == b'_';
    text.match_indices(phrase)
        .filter(|(i, m)| {
            let before = *i == 0 || !is_word(bytes[i - 1]);
            let end = i + m.len();
            let after = end == bytes.len() || !is_word(bytes[end]);
            before && after
        })
        .count()
}

impl PromptBuilder {
    pub fn build(&self, request: &DesignRequest, selection: &FurnitureSelection) -> (PromptBundle, Vec<Warning>) {
        let mut warnings = Vec::new();
        if selection.total_picks() == 0 {
            warnings.push(Warning::new(
                "empty_selection",
                "prompt",
                "no catalog furniture was retrieved; categories are listed from the request",
            ));
        }
        let categories: Vec<String> = request.furniture_categories.iter().map(|c| spaced_label(c)).collect();
        let positive = match self.version {
            TemplateVersion::V1 => format!(
                "a photorealistic {style} {room} interior, {w}m by {d}m, containing {cats}, furniture from {store}; \
                 imagine and correct the viewing angles of the furniture; \
                 feel free to add more items to complete the design",
                style = spaced_label(&request.style),
                room = spaced_label(&request.room_type),
                w = format_meters(request.room_width_m),
                d = format_meters(request.room_depth_m),
                cats = categories.join(", "),
                store = request.store.trim(),
            ),
        };

        // The negative prompt must never name anything the user asked for.
        let labels: Vec<String> = [spaced_label(&request.style), spaced_label(&request.room_type)]
            .into_iter()
            .chain(categories.iter().cloned())
            .collect();
        let kept: Vec<&str> = self
            .negative
            .split(',')
            .map(str::trim)
            .filter(|term| !term.is_empty())
            .filter(|term| {
                let clash = labels.iter().find(|l| count_phrase(term, l) > 0);
                if let Some(l) = clash {
                    warnings.push(Warning::new(
                        "negative_term_dropped",
                        *term,
                        format!("negative term {term:?} names requested label {l:?}"),
                    ));
                }
                clash.is_none()
            })
            .collect();

        let metadata = BTreeMap::from([
            ("request_hash".to_string(), json_sha256_hex(request)),
            ("selection_hash".to_string(), json_sha256_hex(selection)),
            ("template_version".to_string(), self.version.as_str().to_string()),
        ]);
        (PromptBundle { positive, negative: kept.join(", "), metadata }, warnings)
    }
}

/// Build the prompt bundle with the current template and default negative prompt.
pub fn build_prompt(request: &DesignRequest, selection: &FurnitureSelection) -> (PromptBundle, Vec<Warning>) {
    PromptBuilder::default().build(request, selection)
}
