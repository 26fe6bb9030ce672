use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use rusqlite::{params, Connection, OptionalExtension, Transaction};

use super::job::{ArtifactKind, ArtifactRef, DesignJob, JobError, JobFilter, JobState, StageWarning};
use crate::model::{normalize_label, DesignRequest, EvaluationReport};

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS jobs (
    seq        INTEGER PRIMARY KEY AUTOINCREMENT,
    job_id     TEXT NOT NULL UNIQUE,
    request    TEXT NOT NULL,
    room_type  TEXT NOT NULL,
    style      TEXT NOT NULL,
    state      TEXT NOT NULL,
    report     TEXT,
    error      TEXT,
    updated_at TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS jobs_state ON jobs(state);
CREATE TABLE IF NOT EXISTS transitions (
    job_id TEXT NOT NULL,
    state  TEXT NOT NULL,
    at     TEXT NOT NULL,
    UNIQUE(job_id, state)
);
CREATE TABLE IF NOT EXISTS artifacts (
    job_id     TEXT NOT NULL,
    kind       TEXT NOT NULL,
    digest     TEXT NOT NULL,
    media_type TEXT NOT NULL,
    size       INTEGER NOT NULL,
    written_at TEXT NOT NULL,
    UNIQUE(job_id, kind)
);
CREATE TABLE IF NOT EXISTS warnings (
    job_id  TEXT NOT NULL,
    stage   TEXT NOT NULL,
    code    TEXT NOT NULL,
    subject TEXT NOT NULL,
    message TEXT NOT NULL
);
";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("job store: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error("job store JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("job {0} not found")]
    UnknownJob(String),
    #[error("job {job_id} is {found}, expected {expected}")]
    Conflict { job_id: String, expected: JobState, found: JobState },
    #[error("illegal transition {from} -> {to}")]
    IllegalTransition { from: JobState, to: JobState },
    #[error("artifact {kind} of job {job_id} already exists with different content")]
    Immutable { job_id: String, kind: ArtifactKind },
    #[error("job {job_id} cannot be done without artifacts {missing:?}")]
    MissingArtifacts { job_id: String, missing: Vec<ArtifactKind> },
    #[error("job store row is corrupt: {0}")]
    Corrupt(String),
}

fn ts(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Micros, true)
}

fn parse_ts(s: &str) -> Result<DateTime<Utc>, StoreError> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| StoreError::Corrupt(format!("timestamp {s:?}: {e}")))
}

fn parse_state(s: &str) -> Result<JobState, StoreError> {
    s.parse().map_err(StoreError::Corrupt)
}

/// What a stage commits in one transaction along with its state change.
#[derive(Debug, Default)]
pub struct StageCommit<'a> {
    pub artifacts: Vec<(ArtifactKind, String, u64)>,
    pub warnings: Vec<StageWarning>,
    pub report: Option<&'a EvaluationReport>,
}

/// Job metadata in one SQLite file.
///
/// State changes are compare-and-set on the current state and each state is
/// entered at most once per job, so a stage's artifacts and its transition
/// become visible together or not at all.
pub struct JobStore {
    conn: Mutex<Connection>,
}

impl JobStore {
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "FULL")?;
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> Result<Self, StoreError> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self, StoreError> {
        conn.execute_batch(SCHEMA)?;
        Ok(Self { conn: Mutex::new(conn) })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn insert_job(&self, job_id: &str, request: &DesignRequest) -> Result<(), StoreError> {
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        let now = ts(Utc::now());
        tx.execute(
            "INSERT INTO jobs (job_id, request, room_type, style, state, updated_at) VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![
                job_id,
                serde_json::to_string(request)?,
                normalize_label(&request.room_type),
                normalize_label(&request.style),
                JobState::Queued.as_str(),
                now
            ],
        )?;
        tx.execute("INSERT INTO transitions (job_id, state, at) VALUES (?1, ?2, ?3)", params![job_id, "queued", now])?;
        tx.commit()?;
        Ok(())
    }

    pub fn state(&self, job_id: &str) -> Result<Option<JobState>, StoreError> {
        let conn = self.lock();
        let s: Option<String> =
            conn.query_row("SELECT state FROM jobs WHERE job_id = ?1", [job_id], |r| r.get(0)).optional()?;
        s.as_deref().map(parse_state).transpose()
    }

    fn cas(tx: &Transaction<'_>, job_id: &str, from: JobState, to: JobState) -> Result<(), StoreError> {
        if !from.can_transition_to(to) {
            return Err(StoreError::IllegalTransition { from, to });
        }
        let now = ts(Utc::now());
        let n = tx.execute(
            "UPDATE jobs SET state = ?1, updated_at = ?2 WHERE job_id = ?3 AND state = ?4",
            params![to.as_str(), now, job_id, from.as_str()],
        )?;
        if n == 0 {
            let found: Option<String> =
                tx.query_row("SELECT state FROM jobs WHERE job_id = ?1", [job_id], |r| r.get(0)).optional()?;
            return Err(match found {
                None => StoreError::UnknownJob(job_id.to_string()),
                Some(f) => StoreError::Conflict { job_id: job_id.to_string(), expected: from, found: parse_state(&f)? },
            });
        }
        tx.execute(
            "INSERT OR IGNORE INTO transitions (job_id, state, at) VALUES (?1, ?2, ?3)",
            params![job_id, to.as_str(), now],
        )?;
        Ok(())
    }

    /// Move `job_id` from `from` to `to`, recording the stage's artifacts,
    /// warnings and report in the same transaction.
    pub fn advance(
        &self,
        job_id: &str,
        from: JobState,
        to: JobState,
        commit: StageCommit<'_>,
    ) -> Result<(), StoreError> {
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        let now = ts(Utc::now());
        for (kind, digest, size) in &commit.artifacts {
            let existing: Option<String> = tx
                .query_row(
                    "SELECT digest FROM artifacts WHERE job_id = ?1 AND kind = ?2",
                    params![job_id, kind.as_str()],
                    |r| r.get(0),
                )
                .optional()?;
            match existing {
                Some(d) if &d == digest => {}
                Some(_) => return Err(StoreError::Immutable { job_id: job_id.to_string(), kind: *kind }),
                None => {
                    tx.execute(
                        "INSERT INTO artifacts (job_id, kind, digest, media_type, size, written_at) VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
                        params![job_id, kind.as_str(), digest, kind.media_type(), *size as i64, now],
                    )?;
                }
            }
        }
        for w in &commit.warnings {
            tx.execute(
                "INSERT INTO warnings (job_id, stage, code, subject, message) VALUES (?1, ?2, ?3, ?4, ?5)",
                params![job_id, w.stage.as_str(), w.code, w.subject, w.message],
            )?;
        }
        if let Some(report) = commit.report {
            tx.execute(
                "UPDATE jobs SET report = ?1 WHERE job_id = ?2",
                params![serde_json::to_string(report)?, job_id],
            )?;
        }
        if to == JobState::Done {
            let mut missing = Vec::new();
            for kind in ArtifactKind::REQUIRED {
                let n: i64 = tx.query_row(
                    "SELECT COUNT(*) FROM artifacts WHERE job_id = ?1 AND kind = ?2",
                    params![job_id, kind.as_str()],
                    |r| r.get(0),
                )?;
                if n == 0 {
                    missing.push(kind);
                }
            }
            if !missing.is_empty() {
                return Err(StoreError::MissingArtifacts { job_id: job_id.to_string(), missing });
            }
        }
        Self::cas(&tx, job_id, from, to)?;
        tx.commit()?;
        Ok(())
    }

    pub fn fail(&self, job_id: &str, from: JobState, error: &JobError) -> Result<(), StoreError> {
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        tx.execute("UPDATE jobs SET error = ?1 WHERE job_id = ?2", params![serde_json::to_string(error)?, job_id])?;
        Self::cas(&tx, job_id, from, JobState::Failed)?;
        tx.commit()?;
        Ok(())
    }

    pub fn artifact(&self, job_id: &str, kind: ArtifactKind) -> Result<Option<ArtifactRef>, StoreError> {
        let conn = self.lock();
        let row: Option<(String, String, i64, String)> = conn
            .query_row(
                "SELECT digest, media_type, size, written_at FROM artifacts WHERE job_id = ?1 AND kind = ?2",
                params![job_id, kind.as_str()],
                |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?)),
            )
            .optional()?;
        row.map(|(digest, media_type, size, at)| {
            Ok(ArtifactRef { digest, media_type, size: size as u64, written_at: parse_ts(&at)? })
        })
        .transpose()
    }

    pub fn get(&self, job_id: &str) -> Result<Option<DesignJob>, StoreError> {
        let conn = self.lock();
        let row: Option<(String, String, Option<String>, Option<String>)> = conn
            .query_row("SELECT request, state, report, error FROM jobs WHERE job_id = ?1", [job_id], |r| {
                Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?))
            })
            .optional()?;
        let Some((request, state, report, error)) = row else {
            return Ok(None);
        };
        let mut job = DesignJob {
            job_id: job_id.to_string(),
            request: serde_json::from_str(&request)?,
            state: parse_state(&state)?,
            artifacts: Default::default(),
            report: report.as_deref().map(serde_json::from_str).transpose()?,
            error: error.as_deref().map(serde_json::from_str).transpose()?,
            timestamps: Default::default(),
            warnings: Vec::new(),
        };

        let mut stmt = conn.prepare("SELECT state, at FROM transitions WHERE job_id = ?1")?;
        let rows = stmt.query_map([job_id], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?)))?;
        for row in rows {
            let (s, at) = row?;
            job.timestamps.insert(parse_state(&s)?, parse_ts(&at)?);
        }

        let mut stmt =
            conn.prepare("SELECT kind, digest, media_type, size, written_at FROM artifacts WHERE job_id = ?1")?;
        let rows = stmt.query_map([job_id], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, String>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, i64>(3)?,
                r.get::<_, String>(4)?,
            ))
        })?;
        for row in rows {
            let (kind, digest, media_type, size, at) = row?;
            let kind: ArtifactKind = kind.parse().map_err(StoreError::Corrupt)?;
            job.artifacts
                .insert(kind, ArtifactRef { digest, media_type, size: size as u64, written_at: parse_ts(&at)? });
        }

        let mut stmt =
            conn.prepare("SELECT stage, code, subject, message FROM warnings WHERE job_id = ?1 ORDER BY rowid")?;
        let rows = stmt.query_map([job_id], |r| {
            Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, String>(2)?, r.get::<_, String>(3)?))
        })?;
        for row in rows {
            let (stage, code, subject, message) = row?;
            job.warnings.push(StageWarning { stage: parse_state(&stage)?, code, subject, message });
        }
        Ok(Some(job))
    }

    /// Newest first. Returns the page and the total matching count.
    pub fn list(&self, filter: &JobFilter, offset: usize, limit: usize) -> Result<(Vec<DesignJob>, usize), StoreError> {
        let state = filter.state.map(|s| s.as_str());
        let room = filter.room_type.as_deref().map(normalize_label);
        let style = filter.style.as_deref().map(normalize_label);
        let (ids, total) = {
            let conn = self.lock();
            const WHERE: &str =
                "(?1 IS NULL OR state = ?1) AND (?2 IS NULL OR room_type = ?2) AND (?3 IS NULL OR style = ?3)";
            let total: i64 = conn.query_row(
                &format!("SELECT COUNT(*) FROM jobs WHERE {WHERE}"),
                params![state, room, style],
                |r| r.get(0),
            )?;
            let mut stmt =
                conn.prepare(&format!("SELECT job_id FROM jobs WHERE {WHERE} ORDER BY seq DESC LIMIT ?4 OFFSET ?5"))?;
            let ids = stmt
                .query_map(params![state, room, style, limit as i64, offset as i64], |r| r.get::<_, String>(0))?
                .collect::<Result<Vec<_>, _>>()?;
            (ids, total as usize)
        };
        let mut jobs = Vec::with_capacity(ids.len());
        for id in ids {
            jobs.extend(self.get(&id)?);
        }
        Ok((jobs, total))
    }

    /// Jobs not yet done or failed, oldest first.
    pub fn unfinished(&self) -> Result<Vec<(String, JobState)>, StoreError> {
        let conn = self.lock();
        let mut stmt =
            conn.prepare("SELECT job_id, state FROM jobs WHERE state NOT IN ('done', 'failed') ORDER BY seq")?;
        let rows = stmt.query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?)))?;
        rows.map(|row| {
            let (id, s) = row?;
            Ok((id, parse_state(&s)?))
        })
        .collect()
    }

    /// How many times `job_id` entered `state` (0 or 1 by construction).
    pub fn transition_count(&self, job_id: &str, state: JobState) -> Result<usize, StoreError> {
        let conn = self.lock();
        let n: i64 = conn.query_row(
            "SELECT COUNT(*) FROM transitions WHERE job_id = ?1 AND state = ?2",
            params![job_id, state.as_str()],
            |r| r.get(0),
        )?;
        Ok(n as usize)
    }
}
