//! Room-type and style classification of generated designs, and the
//! half-point-per-match score.

use image::RgbImage;

use crate::generation::{stub_palette_index, tint, GeneratedDesign, STUB_PALETTE};
use crate::layout::colors::BACKGROUND;
use crate::model::{
    labels_match, match_score, normalize_label, DesignRequest, EvaluationReport, LabelProbability, LabelSets,
};

/// Tolerance on a classifier distribution summing to one.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-5;

/// An image classifier over a fixed, ordered label set.
pub trait LabelClassifier: Send + Sync {
    fn classifier_id(&self) -> &str;
    fn label_set(&self) -> &[String];
    /// Probability per label, in `label_set` order.
    fn classify(&self, image: &RgbImage) -> Result<Vec<f64>, String>;
}

#[derive(Debug, thiserror::Error)]
pub enum EvaluationError {
    #[error("classifier {classifier_id}: {message}")]
    Classifier { classifier_id: String, message: String },
    #[error("classifier {classifier_id} does not cover configured labels {missing:?}")]
    Coverage { classifier_id: String, missing: Vec<String> },
}

/// Argmax of one classification, with the full distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: String,
    pub confidence: f64,
    pub distribution: Vec<LabelProbability>,
}

/// Run a classifier and take the argmax; ties go to the earlier label.
pub fn classify(image: &RgbImage, classifier: &dyn LabelClassifier) -> Result<Classification, EvaluationError> {
    let id = classifier.classifier_id().to_string();
    let fail = |message: String| EvaluationError::Classifier { classifier_id: id.clone(), message };
    let labels = classifier.label_set();
    if labels.is_empty() {
        return Err(fail("empty label set".into()));
    }
    let probs = classifier.classify(image).map_err(fail)?;
    if probs.len() != labels.len() {
        return Err(fail(format!("{} probabilities for {} labels", probs.len(), labels.len())));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(fail(format!("probabilities outside [0, 1]: {probs:?}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(fail(format!("probabilities sum to {sum}")));
    }
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    Ok(Classification {
        label: labels[best].clone(),
        confidence: probs[best],
        distribution: labels
            .iter()
            .zip(&probs)
            .map(|(l, p)| LabelProbability { label: l.clone(), probability: *p })
            .collect(),
    })
}

fn check_coverage(classifier: &dyn LabelClassifier, required: &[String]) -> Result<(), EvaluationError> {
    let have: Vec<String> = classifier.label_set().iter().map(|l| normalize_label(l)).collect();
    let missing: Vec<String> = required.iter().filter(|r| !have.contains(&normalize_label(r))).cloned().collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(EvaluationError::Coverage { classifier_id: classifier.classifier_id().to_string(), missing })
    }
}

/// Classify a design's room type and style and score it against the request.
///
/// Coverage of the configured label sets is checked before any classifier
/// runs. Confidences are reported but only the argmax labels are scored.
pub fn score_design(
    request: &DesignRequest,
    design: &GeneratedDesign,
    room_classifier: &dyn LabelClassifier,
    style_classifier: &dyn LabelClassifier,
    labels: &LabelSets,
) -> Result<EvaluationReport, EvaluationError> {
    check_coverage(room_classifier, &labels.room_types)?;
    check_coverage(style_classifier, &labels.styles)?;
    let room = classify(&design.image, room_classifier)?;
    let style = classify(&design.image, style_classifier)?;
    let room_type_match = labels_match(&room.label, &request.room_type);
    let style_match = labels_match(&style.label, &request.style);
    Ok(EvaluationReport {
        predicted_room_type: room.label,
        room_type_confidence: room.confidence,
        predicted_style: style.label,
        style_confidence: style.confidence,
        room_type_match,
        style_match,
        final_score: match_score(room_type_match, style_match),
        room_type_distribution: room.distribution,
        style_distribution: style.distribution,
    })
}

/// Always predicts one label with certainty.
#[derive(Debug, Clone)]
pub struct FixedClassifier {
    id: String,
    labels: Vec<String>,
    index: usize,
}

impl FixedClassifier {
    /// Panics if `label` is not in `labels`.
    pub fn new(id: &str, labels: &[String], label: &str) -> Self {
        let index = labels.iter().position(|l| labels_match(l, label)).expect("label in label set");
        Self { id: id.to_string(), labels: labels.to_vec(), index }
    }
}

impl LabelClassifier for FixedClassifier {
    fn classifier_id(&self) -> &str {
        &self.id
    }
    fn label_set(&self) -> &[String] {
        &self.labels
    }
    fn classify(&self, _image: &RgbImage) -> Result<Vec<f64>, String> {
        Ok((0..self.labels.len()).map(|i| if i == self.index { 1.0 } else { 0.0 }).collect())
    }
}

/// Scale non-negative raw scores into a probability vector.
pub fn normalize_scores(scores: &[f64]) -> Result<Vec<f64>, String> {
    if scores.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(format!("scores must be finite and non-negative: {scores:?}"));
    }
    let sum: f64 = scores.iter().sum();
    if sum <= 0.0 {
        return Err("scores sum to zero".into());
    }
    Ok(scores.iter().map(|s| s / sum).collect())
}

/// Returns fixed raw scores, normalized.
#[derive(Debug, Clone)]
pub struct ScoresClassifier {
    pub id: String,
    pub labels: Vec<String>,
    pub scores: Vec<f64>,
}

impl LabelClassifier for ScoresClassifier {
    fn classifier_id(&self) -> &str {
        &self.id
    }
    fn label_set(&self) -> &[String] {
        &self.labels
    }
    fn classify(&self, _image: &RgbImage) -> Result<Vec<f64>, String> {
        normalize_scores(&self.scores)
    }
}

/// Reads the tint the stub backend applied and maps it to a label.
///
/// Palette entry `i` is keyed to `labels[(i + offset) % labels.len()]`. The
/// distribution is the share of pixels (below the stamp row) whose color is
/// white floor tinted with each palette entry.
#[derive(Debug, Clone)]
pub struct PaletteKeyedClassifier {
    id: String,
    labels: Vec<String>,
    offset: usize,
}

impl PaletteKeyedClassifier {
    pub fn new(id: &str, labels: &[String], offset: usize) -> Self {
        assert!(!labels.is_empty(), "label set must not be empty");
        Self { id: id.to_string(), labels: labels.to_vec(), offset }
    }

    /// Label this classifier assigns to a stub design generated with `seed`.
    pub fn keyed_label(&self, seed: u64) -> &str {
        &self.labels[(stub_palette_index(seed) + self.offset) % self.labels.len()]
    }
}

impl LabelClassifier for PaletteKeyedClassifier {
    fn classifier_id(&self) -> &str {
        &self.id
    }
    fn label_set(&self) -> &[String] {
        &self.labels
    }
    fn classify(&self, image: &RgbImage) -> Result<Vec<f64>, String> {
        let tinted: Vec<image::Rgb<u8>> = STUB_PALETTE.iter().map(|c| tint(BACKGROUND, *c)).collect();
        let mut counts = vec![0f64; self.labels.len()];
        for (_, y, px) in image.enumerate_pixels() {
            if y == 0 {
                continue;
            }
            if let Some(i) = tinted.iter().position(|t| t == px) {
                counts[(i + self.offset) % self.labels.len()] += 1.0;
            }
        }
        if counts.iter().all(|c| *c == 0.0) {
            return Ok(vec![1.0 / self.labels.len() as f64; self.labels.len()]);
        }
        normalize_scores(&counts)
    }
}
