use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{DesignRequest, EvaluationReport};

/// Job lifecycle. Stages advance strictly in declaration order; `Failed` can
/// be entered from any state except `Done`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Retrieving,
    Composing,
    Generating,
    Evaluating,
    Done,
    Failed,
}

impl JobState {
    pub const ALL: [JobState; 7] = [
        JobState::Queued,
        JobState::Retrieving,
        JobState::Composing,
        JobState::Generating,
        JobState::Evaluating,
        JobState::Done,
        JobState::Failed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            JobState::Queued => "queued",
            JobState::Retrieving => "retrieving",
            JobState::Composing => "composing",
            JobState::Generating => "generating",
            JobState::Evaluating => "evaluating",
            JobState::Done => "done",
            JobState::Failed => "failed",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }

    /// The state that follows on success.
    pub fn next(self) -> Option<JobState> {
        match self {
            JobState::Queued => Some(JobState::Retrieving),
            JobState::Retrieving => Some(JobState::Composing),
            JobState::Composing => Some(JobState::Generating),
            JobState::Generating => Some(JobState::Evaluating),
            JobState::Evaluating => Some(JobState::Done),
            JobState::Done | JobState::Failed => None,
        }
    }

    pub fn can_transition_to(self, to: JobState) -> bool {
        (to == JobState::Failed && self != JobState::Done && self != JobState::Failed) || self.next() == Some(to)
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for JobState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        JobState::ALL.into_iter().find(|st| st.as_str() == s).ok_or_else(|| format!("unknown job state {s:?}"))
    }
}

/// Stored per-job artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Selection,
    Layout,
    LayoutMeta,
    Prompt,
    Design,
    DesignRecord,
    Report,
    Warnings,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 8] = [
        ArtifactKind::Selection,
        ArtifactKind::Layout,
        ArtifactKind::LayoutMeta,
        ArtifactKind::Prompt,
        ArtifactKind::Design,
        ArtifactKind::DesignRecord,
        ArtifactKind::Report,
        ArtifactKind::Warnings,
    ];

    /// One artifact per pipeline stage; a done job has all of them.
    pub const REQUIRED: [ArtifactKind; 5] = [
        ArtifactKind::Selection,
        ArtifactKind::Layout,
        ArtifactKind::Prompt,
        ArtifactKind::Design,
        ArtifactKind::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Selection => "selection",
            ArtifactKind::Layout => "layout",
            ArtifactKind::LayoutMeta => "layout_meta",
            ArtifactKind::Prompt => "prompt",
            ArtifactKind::Design => "design",
            ArtifactKind::DesignRecord => "design_record",
            ArtifactKind::Report => "report",
            ArtifactKind::Warnings => "warnings",
        }
    }

    pub fn media_type(self) -> &'static str {
        match self {
            ArtifactKind::Layout | ArtifactKind::Design => "image/png",
            _ => "application/json",
        }
    }

    /// File name used when exporting a job's artifacts to a directory.
    pub fn file_name(self) -> String {
        let ext = if self.media_type() == "image/png" { "png" } else { "json" };
        format!("{}.{ext}", self.as_str())
    }

    /// The state in which this artifact is produced.
    pub fn produced_in(self) -> JobState {
        match self {
            ArtifactKind::Selection => JobState::Retrieving,
            ArtifactKind::Layout | ArtifactKind::LayoutMeta | ArtifactKind::Prompt => JobState::Composing,
            ArtifactKind::Design | ArtifactKind::DesignRecord => JobState::Generating,
            ArtifactKind::Report | ArtifactKind::Warnings => JobState::Evaluating,
        }
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for ArtifactKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArtifactKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown artifact stage {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub digest: String,
    pub media_type: String,
    pub size: u64,
    pub written_at: DateTime<Utc>,
}

/// Why a job failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobError {
    pub stage: JobState,
    pub kind: String,
    pub message: String,
    pub retryable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageWarning {
    pub stage: JobState,
    pub code: String,
    pub subject: String,
    pub message: String,
}

/// Snapshot of one job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignJob {
    pub job_id: String,
    pub request: DesignRequest,
    pub state: JobState,
    pub artifacts: BTreeMap<ArtifactKind, ArtifactRef>,
    pub report: Option<EvaluationReport>,
    pub error: Option<JobError>,
    /// First time each state was entered.
    pub timestamps: BTreeMap<JobState, DateTime<Utc>>,
    pub warnings: Vec<StageWarning>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JobFilter {
    pub state: Option<JobState>,
    pub room_type: Option<String>,
    pub style: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobPage {
    pub jobs: Vec<DesignJob>,
    /// 1-based.
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
}
