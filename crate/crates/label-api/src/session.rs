//! A labeling session on disk:
//!
//! ```text
//! <dir>/tasks.json        task list, fixed when the session is created
//! <dir>/images/<id>.png   one thumbnail per task
//! <dir>/labels.csv        append-only journal: id,kind,label,timestamp
//! ```
//!
//! The journal is never rewritten. Reads replay it and keep the latest label
//! per task.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use epigraph::denoise::{write_labels_csv, KernelClass, Observation};
use epigraph::segment::{write_labels, SegmentLabel};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, Result};

pub const TASKS_FILE: &str = "tasks.json";
pub const JOURNAL_FILE: &str = "labels.csv";
pub const IMAGES_DIR: &str = "images";
const SESSION_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Kernel,
    Segment,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Kernel => "kernel",
            TaskKind::Segment => "segment",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = ApiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kernel" => Ok(TaskKind::Kernel),
            "segment" => Ok(TaskKind::Segment),
            other => Err(ApiError::BadRequest(format!(
                "unknown task kind {other:?} (expected kernel or segment)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Unlabeled,
    Labeled,
}

/// A task as stored in `tasks.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskMeta {
    pub id: String,
    pub kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcc: Option<f64>,
}

/// A task to be written into a new session together with its thumbnail.
#[derive(Debug, Clone)]
pub struct NewTask {
    pub meta: TaskMeta,
    pub png: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskSummary {
    pub id: String,
    pub kind: TaskKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcc: Option<f64>,
    pub status: TaskStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub image_url: String,
}

/// One journal line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    pub kind: TaskKind,
    pub label: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Progress {
    pub total: usize,
    pub labeled: usize,
    pub by_class: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TaskFile {
    format: u32,
    tasks: Vec<TaskMeta>,
}

/// Parses `label` for a task of `kind` into its canonical spelling.
pub fn canonical_label(kind: TaskKind, label: &str) -> Result<String> {
    let mismatch = || ApiError::LabelMismatch {
        kind,
        label: label.to_string(),
    };
    match kind {
        TaskKind::Kernel => label
            .parse::<KernelClass>()
            .map(|c| c.to_string())
            .map_err(|_| mismatch()),
        TaskKind::Segment => label
            .parse::<SegmentLabel>()
            .map(|l| l.to_string())
            .map_err(|_| mismatch()),
    }
}

pub struct Session {
    dir: PathBuf,
    tasks: Vec<TaskMeta>,
    index: HashMap<String, usize>,
    latest: HashMap<String, String>,
    journal: BufWriter<File>,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("dir", &self.dir)
            .field("tasks", &self.tasks.len())
            .field("labeled", &self.latest.len())
            .finish()
    }
}

impl Session {
    /// Writes a fresh session into `dir`, which must not already hold one.
    pub fn create(dir: &Path, tasks: Vec<NewTask>) -> Result<Self> {
        if dir.join(TASKS_FILE).exists() {
            return Err(ApiError::BadRequest(format!(
                "{} already contains a labeling session",
                dir.display()
            )));
        }
        let mut seen = HashMap::new();
        for (i, t) in tasks.iter().enumerate() {
            validate_id(&t.meta.id)?;
            if seen.insert(t.meta.id.clone(), i).is_some() {
                return Err(ApiError::BadRequest(format!("duplicate task id {}", t.meta.id)));
            }
            if (t.meta.kind == TaskKind::Kernel) != t.meta.mcc.is_some() {
                return Err(ApiError::BadRequest(format!(
                    "task {}: kernel tasks carry an MCC and segment tasks do not",
                    t.meta.id
                )));
            }
        }
        std::fs::create_dir_all(dir.join(IMAGES_DIR))?;
        for t in &tasks {
            std::fs::write(image_path(dir, &t.meta.id), &t.png)?;
        }
        let file = TaskFile {
            format: SESSION_FORMAT,
            tasks: tasks.into_iter().map(|t| t.meta).collect(),
        };
        std::fs::write(dir.join(TASKS_FILE), serde_json::to_vec_pretty(&file)?)?;
        Self::open(dir)
    }

    pub fn open(dir: &Path) -> Result<Self> {
        let text = std::fs::read(dir.join(TASKS_FILE)).map_err(|e| {
            ApiError::Io(std::io::Error::new(
                e.kind(),
                format!("cannot read {}: {e}", dir.join(TASKS_FILE).display()),
            ))
        })?;
        let file: TaskFile = serde_json::from_slice(&text)?;
        if file.format != SESSION_FORMAT {
            return Err(ApiError::BadRequest(format!(
                "session format {} is not supported (expected {SESSION_FORMAT})",
                file.format
            )));
        }
        let index = file
            .tasks
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id.clone(), i))
            .collect();

        let journal_path = dir.join(JOURNAL_FILE);
        let mut latest = HashMap::new();
        if journal_path.exists() {
            let mut reader = csv::Reader::from_path(&journal_path)?;
            for record in reader.deserialize::<LabelRecord>() {
                let record = record?;
                latest.insert(record.id, record.label);
            }
        }
        let fresh = !journal_path.exists();
        let mut journal = BufWriter::new(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(&journal_path)?,
        );
        if fresh {
            journal.write_all(b"id,kind,label,timestamp\n")?;
            journal.flush()?;
            journal.get_ref().sync_data()?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            tasks: file.tasks,
            index,
            latest,
            journal,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn tasks(&self) -> &[TaskMeta] {
        &self.tasks
    }

    pub fn task(&self, id: &str) -> Result<&TaskMeta> {
        self.index
            .get(id)
            .map(|&i| &self.tasks[i])
            .ok_or_else(|| ApiError::UnknownTask(id.to_string()))
    }

    pub fn label_of(&self, id: &str) -> Option<&str> {
        self.latest.get(id).map(String::as_str)
    }

    /// Tasks in session order, filtered, then paged (`page` starts at 1).
    pub fn list(
        &self,
        kind: Option<TaskKind>,
        status: Option<TaskStatus>,
        page: usize,
        per_page: usize,
    ) -> (usize, Vec<TaskSummary>) {
        let matching: Vec<&TaskMeta> = self
            .tasks
            .iter()
            .filter(|t| kind.is_none_or(|k| t.kind == k))
            .filter(|t| status.is_none_or(|s| self.status(&t.id) == s))
            .collect();
        let total = matching.len();
        let page = matching
            .into_iter()
            .skip(page.saturating_sub(1) * per_page)
            .take(per_page)
            .map(|t| TaskSummary {
                id: t.id.clone(),
                kind: t.kind,
                mcc: t.mcc,
                status: self.status(&t.id),
                label: self.latest.get(&t.id).cloned(),
                image_url: format!("/api/tasks/{}/image", t.id),
            })
            .collect();
        (total, page)
    }

    fn status(&self, id: &str) -> TaskStatus {
        if self.latest.contains_key(id) {
            TaskStatus::Labeled
        } else {
            TaskStatus::Unlabeled
        }
    }

    pub fn image(&self, id: &str) -> Result<Vec<u8>> {
        self.task(id)?;
        Ok(std::fs::read(image_path(&self.dir, id))?)
    }

    /// Appends the label to the journal and syncs it to disk before
    /// returning. Nothing changes in memory if the write fails.
    pub fn submit(&mut self, id: &str, label: &str) -> Result<LabelRecord> {
        let kind = self.task(id)?.kind;
        let record = LabelRecord {
            id: id.to_string(),
            kind,
            label: canonical_label(kind, label)?,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
        };
        {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(&mut self.journal);
            w.serialize(&record)?;
            w.flush()?;
        }
        self.journal.flush()?;
        self.journal.get_ref().sync_data()?;
        self.latest.insert(record.id.clone(), record.label.clone());
        Ok(record)
    }

    pub fn progress(&self) -> Progress {
        let mut by_class = BTreeMap::new();
        for label in self.latest.values() {
            *by_class.entry(label.clone()).or_insert(0) += 1;
        }
        Progress {
            total: self.tasks.len(),
            labeled: self.latest.len(),
            by_class,
        }
    }

    /// Latest labels of one kind as the CSV the pipeline consumes:
    /// `kernel_id,mcc,class` or `segment_id,label`.
    pub fn export_csv(&self, kind: TaskKind) -> Result<Vec<u8>> {
        let labeled: Vec<(&TaskMeta, &str)> = self
            .tasks
            .iter()
            .filter(|t| t.kind == kind)
            .filter_map(|t| Some((t, self.latest.get(&t.id)?.as_str())))
            .collect();
        if labeled.is_empty() {
            return Err(ApiError::NothingLabeled(kind));
        }
        let mut out = Vec::new();
        match kind {
            TaskKind::Kernel => {
                let observations = labeled
                    .into_iter()
                    .map(|(t, label)| {
                        Ok(Observation::new(
                            t.id.clone(),
                            t.mcc.unwrap_or_default(),
                            label.parse().map_err(|_| ApiError::LabelMismatch {
                                kind,
                                label: label.to_string(),
                            })?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                write_labels_csv(&observations, &mut out)?;
            }
            TaskKind::Segment => {
                let labels = labeled
                    .into_iter()
                    .map(|(t, label)| {
                        Ok((
                            t.id.clone(),
                            label.parse().map_err(|_| ApiError::LabelMismatch {
                                kind,
                                label: label.to_string(),
                            })?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                write_labels(&labels, &mut out)?;
            }
        }
        Ok(out)
    }
}

fn image_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(IMAGES_DIR).join(format!("{id}.png"))
}

/// Ids become file names and URL segments.
fn validate_id(id: &str) -> Result<()> {
    if !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        && !id.starts_with('.')
    {
        Ok(())
    } else {
        Err(ApiError::BadRequest(format!("invalid task id {id:?}")))
    }
}
