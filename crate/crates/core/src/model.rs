//! Shared domain vocabulary: requests, catalog assets, embeddings, selections
//! and evaluation reports.
//!
//! Every type here is plain data. Nothing performs I/O or calls a model, and
//! all values are immutable once built, so they can be shared freely between
//! pipeline stages.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Lower-case a label and fold spaces and hyphens into underscores.
///
/// `"Living Room"`, `"living-room"` and `"living_room"` all normalize to
/// `"living_room"`.
pub fn normalize_label(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut last_sep = true;
    for c in raw.trim().chars() {
        if c == ' ' || c == '-' || c == '_' {
            if !last_sep {
                out.push('_');
            }
            last_sep = true;
        } else {
            out.extend(c.to_lowercase());
            last_sep = false;
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

/// Render a normalized label as spaced lower-case words (`dining_table` -> `dining table`).
pub fn spaced_label(label: &str) -> String {
    normalize_label(label).replace('_', " ")
}

/// The configured room-type and style vocabularies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSets {
    pub room_types: Vec<String>,
    pub styles: Vec<String>,
}

impl Default for LabelSets {
    fn default() -> Self {
        Self {
            room_types: ["bedroom", "living_room", "kitchen", "dining_room"].map(String::from).to_vec(),
            styles: ["modern", "classic", "minimalist"].map(String::from).to_vec(),
        }
    }
}

impl LabelSets {
    pub fn new(room_types: impl IntoIterator<Item = String>, styles: impl IntoIterator<Item = String>) -> Self {
        let mut sets = Self { room_types: Vec::new(), styles: Vec::new() };
        for r in room_types {
            sets.add_room_type(&r);
        }
        for s in styles {
            sets.add_style(&s);
        }
        sets
    }

    pub fn add_room_type(&mut self, label: &str) {
        push_unique(&mut self.room_types, normalize_label(label));
    }

    pub fn add_style(&mut self, label: &str) {
        push_unique(&mut self.styles, normalize_label(label));
    }

    /// Extend the style vocabulary with the sub-folder names of a style
    /// dataset directory (one folder per style).
    pub fn extend_styles_from_dir(&mut self, dir: &std::path::Path) -> std::io::Result<()> {
        let mut names = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                let name = entry.file_name().to_string_lossy().into_owned();
                if !name.starts_with('.') {
                    names.push(name);
                }
            }
        }
        names.sort();
        for n in names {
            self.add_style(&n);
        }
        Ok(())
    }

    pub fn has_room_type(&self, label: &str) -> bool {
        let l = normalize_label(label);
        self.room_types.contains(&l)
    }

    pub fn has_style(&self, label: &str) -> bool {
        let l = normalize_label(label);
        self.styles.contains(&l)
    }
}

fn push_unique(list: &mut Vec<String>, label: String) {
    if !label.is_empty() && !list.contains(&label) {
        list.push(label);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpeningKind {
    Door,
    Window,
}

impl OpeningKind {
    /// Narrowest opening accepted by validation, in meters.
    pub fn min_width_m(self) -> f64 {
        match self {
            OpeningKind::Door => 0.6,
            OpeningKind::Window => 0.3,
        }
    }
}

/// A wall of the rectangular room. The room is viewed from above with north
/// at the top; `x` grows eastward and `y` grows southward from the
/// north-west corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wall {
    North,
    East,
    South,
    West,
}

impl Wall {
    /// Walls in counter-clockwise order (in room coordinates), starting north.
    pub const CCW: [Wall; 4] = [Wall::North, Wall::East, Wall::South, Wall::West];

    pub fn length_m(self, width_m: f64, depth_m: f64) -> f64 {
        match self {
            Wall::North | Wall::South => width_m,
            Wall::East | Wall::West => depth_m,
        }
    }

    /// The corner each wall's offsets are measured from.
    pub fn start_corner(self, width_m: f64, depth_m: f64) -> (f64, f64) {
        match self {
            Wall::North => (0.0, 0.0),
            Wall::East => (width_m, 0.0),
            Wall::South => (width_m, depth_m),
            Wall::West => (0.0, depth_m),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Wall::North => "north",
            Wall::East => "east",
            Wall::South => "south",
            Wall::West => "west",
        }
    }
}

impl fmt::Display for Wall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A door or window segment on one wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Opening {
    pub kind: OpeningKind,
    pub wall: Wall,
    /// Distance from the wall's counter-clockwise start corner.
    pub offset_m: f64,
    pub width_m: f64,
}

fn default_store() -> String {
    "ikea".to_string()
}

fn default_items_per_category() -> u32 {
    1
}

/// Everything the user asked for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRequest {
    pub room_type: String,
    pub style: String,
    pub room_width_m: f64,
    pub room_depth_m: f64,
    #[serde(default)]
    pub openings: Vec<Opening>,
    pub furniture_categories: Vec<String>,
    #[serde(default = "default_store")]
    pub store: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_items_per_category")]
    pub items_per_category: u32,
}

impl DesignRequest {
    /// Minimal request with no openings, the default store and one item per category.
    pub fn new(
        room_type: &str,
        style: &str,
        room_width_m: f64,
        room_depth_m: f64,
        furniture_categories: &[&str],
    ) -> Self {
        Self {
            room_type: room_type.to_string(),
            style: style.to_string(),
            room_width_m,
            room_depth_m,
            openings: Vec::new(),
            furniture_categories: furniture_categories.iter().map(|c| c.to_string()).collect(),
            store: default_store(),
            seed: None,
            items_per_category: 1,
        }
    }

    pub fn with_opening(mut self, kind: OpeningKind, wall: Wall, offset_m: f64, width_m: f64) -> Self {
        self.openings.push(Opening { kind, wall, offset_m, width_m });
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn wall_length_m(&self, wall: Wall) -> f64 {
        wall.length_m(self.room_width_m, self.room_depth_m)
    }
}

/// A non-fatal condition recorded by a stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub code: String,
    pub subject: String,
    pub message: String,
}

impl Warning {
    pub fn new(code: &str, subject: impl Into<String>, message: impl Into<String>) -> Self {
        let w = Self { code: code.to_string(), subject: subject.into(), message: message.into() };
        tracing::warn!(code = %w.code, subject = %w.subject, "{}", w.message);
        w
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

/// Every invariant a candidate request violated, keyed by field path.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { field: field.into(), message: message.into() });
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn names_field(&self, field: &str) -> bool {
        self.violations.iter().any(|v| v.field == field)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| format!("{}: {}", v.field, v.message)).collect();
        write!(f, "invalid request ({})", parts.join("; "))
    }
}

impl std::error::Error for ValidationReport {}

/// Check a candidate request against every request invariant.
///
/// A valid request is handed back unchanged; otherwise the report lists every
/// violation, not just the first.
pub fn validate_request(request: DesignRequest, labels: &LabelSets) -> Result<DesignRequest, ValidationReport> {
    let mut report = ValidationReport::default();
    let dims_ok = request.room_width_m.is_finite()
        && request.room_depth_m.is_finite()
        && request.room_width_m > 0.0
        && request.room_depth_m > 0.0;
    if !(request.room_width_m.is_finite() && request.room_width_m > 0.0) {
        report.push("room_width_m", format!("must be a positive number of meters, got {}", request.room_width_m));
    }
    if !(request.room_depth_m.is_finite() && request.room_depth_m > 0.0) {
        report.push("room_depth_m", format!("must be a positive number of meters, got {}", request.room_depth_m));
    }
    if !labels.has_room_type(&request.room_type) {
        report.push(
            "room_type",
            format!("unknown room type {:?}; expected one of {:?}", request.room_type, labels.room_types),
        );
    }
    if !labels.has_style(&request.style) {
        report.push("style", format!("unknown style {:?}; expected one of {:?}", request.style, labels.styles));
    }
    if request.furniture_categories.is_empty() {
        report.push("furniture_categories", "at least one furniture category is required");
    }
    let mut seen = Vec::new();
    for (i, cat) in request.furniture_categories.iter().enumerate() {
        let norm = normalize_label(cat);
        if norm.is_empty() {
            report.push(format!("furniture_categories[{i}]"), "category label is empty");
        } else if seen.contains(&norm) {
            report.push("furniture_categories", format!("duplicate category {cat:?}"));
        } else {
            seen.push(norm);
        }
    }
    if request.store.trim().is_empty() {
        report.push("store", "store identifier is empty");
    }
    if request.items_per_category == 0 {
        report.push("items_per_category", "must be at least 1");
    }
    for (i, o) in request.openings.iter().enumerate() {
        let field = format!("openings[{i}]");
        if !(o.width_m.is_finite() && o.width_m >= o.kind.min_width_m()) {
            report.push(
                &field,
                format!("{:?} width {} m is below the {} m minimum", o.kind, o.width_m, o.kind.min_width_m()),
            );
        }
        if !(o.offset_m.is_finite() && o.offset_m >= 0.0) {
            report.push(&field, format!("offset {} m must be non-negative", o.offset_m));
        }
        if dims_ok {
            let wall_len = request.wall_length_m(o.wall);
            if o.offset_m + o.width_m > wall_len + 1e-9 {
                report.push(
                    &field,
                    format!(
                        "opening spans {}..{} m but the {} wall is {} m long",
                        o.offset_m,
                        o.offset_m + o.width_m,
                        o.wall,
                        wall_len
                    ),
                );
            }
        }
    }
    if report.is_empty() {
        Ok(request)
    } else {
        Err(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceSplit {
    Train,
    Validation,
    Test,
}

impl SourceSplit {
    /// Recognize a dataset split folder name.
    pub fn from_folder(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "train" | "training" => Some(SourceSplit::Train),
            "validation" | "valid" | "val" => Some(SourceSplit::Validation),
            "test" | "testing" => Some(SourceSplit::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    SceneImage,
    LowQuality,
    None,
}

/// One catalog item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FurnitureAsset {
    pub asset_id: String,
    pub category: String,
    /// Relative to the catalog root.
    pub image_path: String,
    pub has_alpha: bool,
    pub source_split: Option<SourceSplit>,
    pub excluded: bool,
    pub exclusion_reason: ExclusionReason,
}

impl FurnitureAsset {
    /// Exclude the asset. Exclusion is sticky: an already-excluded asset keeps
    /// its original reason.
    pub fn exclude(&mut self, reason: ExclusionReason) {
        if !self.excluded && reason != ExclusionReason::None {
            self.excluded = true;
            self.exclusion_reason = reason;
        }
    }
}

/// Tolerance on the Euclidean norm of an embedding.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// A unit-length vector in a provider's shared text/image space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f32>,
    pub provider_id: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("embedding is empty")]
    Empty,
    #[error("embedding contains a non-finite value")]
    NonFinite,
    #[error("embedding has zero norm")]
    Zero,
    #[error("embedding norm {0} is not 1 within {UNIT_NORM_TOLERANCE}")]
    NotUnit(f64),
}

impl EmbeddingVector {
    /// Wrap values that are already unit-norm.
    pub fn new(values: Vec<f32>, provider_id: impl Into<String>) -> Result<Self, EmbeddingError> {
        check_values(&values)?;
        let n = l2_norm(&values);
        if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(EmbeddingError::NotUnit(n));
        }
        Ok(Self { values, provider_id: provider_id.into() })
    }

    /// Scale raw values to unit length.
    pub fn normalized(raw: &[f64], provider_id: impl Into<String>) -> Result<Self, EmbeddingError> {
        if raw.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(EmbeddingError::Zero);
        }
        let values = raw.iter().map(|v| (v / n) as f32).collect();
        Self::new(values, provider_id)
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    /// Dot product accumulated in `f64`; equals cosine similarity for unit vectors.
    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum()
    }
}

fn check_values(values: &[f32]) -> Result<(), EmbeddingError> {
    if values.is_empty() {
        return Err(EmbeddingError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EmbeddingError::NonFinite);
    }
    Ok(())
}

fn l2_norm(values: &[f32]) -> f64 {
    values.iter().map(|v| f64::from(*v) * f64::from(*v)).sum::<f64>().sqrt()
}

/// A retrieved asset and its similarity to the category query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    pub asset_id: String,
    pub similarity_score: f64,
}

/// Sort picks by similarity descending, ties by ascending asset id.
pub fn sort_picks(picks: &mut [Pick]) {
    picks.sort_by(|a, b| b.similarity_score.total_cmp(&a.similarity_score).then_with(|| a.asset_id.cmp(&b.asset_id)));
}

/// Retrieved assets per requested category.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FurnitureSelection {
    pub picks: BTreeMap<String, Vec<Pick>>,
}

impl FurnitureSelection {
    pub fn total_picks(&self) -> usize {
        self.picks.values().map(Vec::len).sum()
    }

    /// Categories whose pick list is empty.
    pub fn empty_categories(&self) -> Vec<&str> {
        self.picks.iter().filter(|(_, v)| v.is_empty()).map(|(k, _)| k.as_str()).collect()
    }
}

/// A label's probability in a classifier distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelProbability {
    pub label: String,
    pub probability: f64,
}

/// Room-type and style match for one generated design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub predicted_room_type: String,
    pub room_type_confidence: f64,
    pub predicted_style: String,
    pub style_confidence: f64,
    pub room_type_match: bool,
    pub style_match: bool,
    pub final_score: f64,
    #[serde(default)]
    pub room_type_distribution: Vec<LabelProbability>,
    #[serde(default)]
    pub style_distribution: Vec<LabelProbability>,
}

/// Half a point for a room-type match, half for a style match.
pub fn match_score(room_type_match: bool, style_match: bool) -> f64 {
    0.5 * f64::from(u8::from(room_type_match)) + 0.5 * f64::from(u8::from(style_match))
}

/// Label equality after normalization.
pub fn labels_match(a: &str, b: &str) -> bool {
    normalize_label(a) == normalize_label(b)
}

impl EvaluationReport {
    /// Recompute the score from the stored predictions against a request.
    pub fn recompute_score(&self, request: &DesignRequest) -> f64 {
        match_score(
            labels_match(&self.predicted_room_type, &request.room_type),
            labels_match(&self.predicted_style, &request.style),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bedroom() -> DesignRequest {
        DesignRequest::new("bedroom", "modern", 4.0, 3.0, &["bed", "wardrobe"]).with_opening(
            OpeningKind::Door,
            Wall::North,
            0.5,
            0.9,
        )
    }

    #[test]
    fn valid_request_passes_unchanged() {
        let req = bedroom();
        assert_eq!(validate_request(req.clone(), &LabelSets::default()), Ok(req));
    }

    #[test]
    fn zero_width_is_named() {
        let mut req = bedroom();
        req.room_width_m = 0.0;
        let report = validate_request(req, &LabelSets::default()).unwrap_err();
        assert!(report.names_field("room_width_m"));
    }

    #[test]
    fn opening_overflowing_wall_is_named() {
        let req = DesignRequest::new("bedroom", "modern", 4.0, 3.0, &["bed"]).with_opening(
            OpeningKind::Door,
            Wall::North,
            3.5,
            1.0,
        );
        let report = validate_request(req, &LabelSets::default()).unwrap_err();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].field, "openings[0]");
    }

    #[test]
    fn every_violation_is_reported() {
        let mut req = DesignRequest::new("garage", "baroque", -1.0, 3.0, &[]);
        req.openings.push(Opening { kind: OpeningKind::Window, wall: Wall::East, offset_m: 0.0, width_m: 0.1 });
        let report = validate_request(req, &LabelSets::default()).unwrap_err();
        for f in ["room_width_m", "room_type", "style", "furniture_categories", "openings[0]"] {
            assert!(report.names_field(f), "missing {f} in {report}");
        }
    }

    #[test]
    fn duplicate_categories_rejected_after_normalization() {
        let req = DesignRequest::new("kitchen", "classic", 3.0, 3.0, &["Dining Table", "dining_table"]);
        assert!(validate_request(req, &LabelSets::default()).unwrap_err().names_field("furniture_categories"));
    }

    #[test]
    fn door_below_minimum_width() {
        let req = DesignRequest::new("bedroom", "modern", 4.0, 3.0, &["bed"]).with_opening(
            OpeningKind::Door,
            Wall::West,
            0.0,
            0.5,
        );
        assert!(validate_request(req, &LabelSets::default()).is_err());
    }

    #[test]
    fn label_normalization() {
        assert_eq!(normalize_label("Living Room"), "living_room");
        assert_eq!(normalize_label(" dining-table "), "dining_table");
        assert_eq!(spaced_label("dining_table"), "dining table");
        assert!(labels_match("Living Room", "living_room"));
    }

    #[test]
    fn style_folders_extend_labels() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("Scandinavian")).unwrap();
        std::fs::create_dir(dir.path().join("modern")).unwrap();
        let mut labels = LabelSets::default();
        labels.extend_styles_from_dir(dir.path()).unwrap();
        assert!(labels.has_style("scandinavian"));
        assert_eq!(labels.styles.iter().filter(|s| *s == "modern").count(), 1);
    }

    #[test]
    fn request_json_uses_snake_case_fields() {
        let v = serde_json::to_value(bedroom()).unwrap();
        assert_eq!(v["openings"][0]["kind"], "door");
        assert_eq!(v["openings"][0]["wall"], "north");
        assert_eq!(v["room_width_m"], 4.0);
        let defaulted: DesignRequest = serde_json::from_str(
            r#"{"room_type":"bedroom","style":"modern","room_width_m":4,"room_depth_m":3,"furniture_categories":["bed"]}"#,
        )
        .unwrap();
        assert_eq!(defaulted.store, "ikea");
        assert_eq!(defaulted.items_per_category, 1);
    }

    #[test]
    fn exclusion_is_sticky() {
        let mut a = FurnitureAsset {
            asset_id: "a".into(),
            category: "bed".into(),
            image_path: "a.png".into(),
            has_alpha: false,
            source_split: None,
            excluded: false,
            exclusion_reason: ExclusionReason::None,
        };
        a.exclude(ExclusionReason::SceneImage);
        a.exclude(ExclusionReason::LowQuality);
        assert!(a.excluded);
        assert_eq!(a.exclusion_reason, ExclusionReason::SceneImage);
    }

    #[test]
    fn embedding_rejects_non_unit() {
        assert!(matches!(EmbeddingVector::new(vec![1.0, 1.0], "p"), Err(EmbeddingError::NotUnit(_))));
        let v = EmbeddingVector::normalized(&[3.0, 4.0], "p").unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-6);
        assert!((v.dot(&v) - 1.0).abs() < 1e-6);
        let e1 = EmbeddingVector::normalized(&[1.0, 0.0], "p").unwrap();
        let e2 = EmbeddingVector::normalized(&[0.0, 1.0], "p").unwrap();
        assert!(e1.dot(&e2).abs() < 1e-6);
    }

    #[test]
    fn table_one_rows() {
        assert_eq!(match_score(true, false), 0.5);
        assert_eq!(match_score(false, false), 0.0);
        assert_eq!(match_score(true, true), 1.0);
    }

    fn arb_request() -> impl Strategy<Value = DesignRequest> {
        (
            prop_oneof![Just("bedroom"), Just("kitchen"), Just("garage")],
            prop_oneof![Just("modern"), Just("classic"), Just("gothic")],
            -1.0f64..9.0,
            -1.0f64..9.0,
            proptest::collection::vec(prop_oneof![Just("bed"), Just("sofa"), Just("desk"), Just("")], 0..4),
            proptest::collection::vec((0.0f64..6.0, 0.0f64..2.0, 0usize..4, any::<bool>()), 0..3),
        )
            .prop_map(|(rt, st, w, d, cats, ops)| {
                let mut r = DesignRequest::new(rt, st, w, d, &cats);
                for (off, width, wall, door) in ops {
                    let kind = if door { OpeningKind::Door } else { OpeningKind::Window };
                    r = r.with_opening(kind, Wall::CCW[wall], off, width);
                }
                r
            })
    }

    proptest! {
        #[test]
        fn score_is_half_weighted_sum(a in any::<bool>(), b in any::<bool>()) {
            let s = match_score(a, b);
            prop_assert!(s == 0.0 || s == 0.5 || s == 1.0);
            prop_assert_eq!(s, 0.5 * (a as u8 as f64) + 0.5 * (b as u8 as f64));
            prop_assert!(match_score(true, b) >= s && match_score(a, true) >= s);
        }

        #[test]
        fn validation_is_idempotent(req in arb_request()) {
            let labels = LabelSets::default();
            if let Ok(valid) = validate_request(req, &labels) {
                let bytes = serde_json::to_vec(&valid).unwrap();
                let again = validate_request(valid, &labels).unwrap();
                prop_assert_eq!(serde_json::to_vec(&again).unwrap(), bytes);
            }
        }

        #[test]
        fn pick_order_is_total(
            scores in proptest::collection::vec((0u8..20, -4i8..4), 1..20),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let picks: Vec<Pick> = scores
                .iter()
                .enumerate()
                .map(|(i, (id, s))| Pick { asset_id: format!("a{id:02}_{i}"), similarity_score: f64::from(*s) / 4.0 })
                .collect();
            let mut sorted = picks.clone();
            sort_picks(&mut sorted);
            let mut shuffled = picks;
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            sort_picks(&mut shuffled);
            prop_assert_eq!(sorted, shuffled);
        }
    }
}
