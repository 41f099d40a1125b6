//! Background jobs on a bounded pool of worker threads.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::store::now_ms;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Gridsearch,
    Train,
    Evaluate,
    Explain,
    Views,
    Hypothesis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Error,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Error)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobError {
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub kind: JobKind,
    /// What the job works on, e.g. a pipeline id.
    pub subject: Option<String>,
    pub state: JobState,
    pub progress: f64,
    /// Id of the stored result (pipeline, artifact), when done.
    pub result_ref: Option<String>,
    pub error: Option<JobError>,
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
}

type Task = Box<dyn FnOnce() + Send + 'static>;

#[derive(Default)]
struct Table {
    jobs: Mutex<HashMap<String, Job>>,
    changed: Condvar,
}

impl Table {
    /// Applies `f` unless the job already reached a terminal state.
    fn update(&self, id: &str, f: impl FnOnce(&mut Job)) {
        let mut jobs = self.jobs.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(job) = jobs.get_mut(id) {
            if !job.state.is_terminal() {
                f(job);
                job.updated_at_ms = now_ms();
            }
        }
        self.changed.notify_all();
    }
}

/// Handle given to running work for progress reports.
#[derive(Clone)]
pub struct Progress {
    id: String,
    table: Arc<Table>,
}

impl Progress {
    pub fn set(&self, fraction: f64) {
        let f = fraction.clamp(0.0, 1.0);
        self.table.update(&self.id, |j| j.progress = f);
    }
}

pub struct JobQueue {
    table: Arc<Table>,
    sender: Mutex<Option<Sender<Task>>>,
    workers: Vec<JoinHandle<()>>,
}

impl JobQueue {
    pub fn new(workers: usize) -> Self {
        let workers = workers.max(1);
        let (tx, rx) = channel::<Task>();
        let rx: Arc<Mutex<Receiver<Task>>> = Arc::new(Mutex::new(rx));
        let handles = (0..workers)
            .map(|i| {
                let rx = Arc::clone(&rx);
                std::thread::Builder::new()
                    .name(format!("glassbox-worker-{i}"))
                    .spawn(move || loop {
                        let task = {
                            let guard = rx.lock().unwrap_or_else(|e| e.into_inner());
                            guard.recv()
                        };
                        match task {
                            Ok(task) => task(),
                            Err(_) => break,
                        }
                    })
                    .expect("spawning a worker thread")
            })
            .collect();
        Self {
            table: Arc::new(Table::default()),
            sender: Mutex::new(Some(tx)),
            workers: handles,
        }
    }

    pub fn workers(&self) -> usize {
        self.workers.len()
    }

    /// Queues `work`; its `Ok(Some(id))` becomes the job's result reference.
    pub fn submit<F>(&self, kind: JobKind, subject: Option<String>, work: F) -> Job
    where
        F: FnOnce(&Progress) -> Result<Option<String>> + Send + 'static,
    {
        let now = now_ms();
        let job = Job {
            id: uuid::Uuid::new_v4().to_string(),
            kind,
            subject,
            state: JobState::Queued,
            progress: 0.0,
            result_ref: None,
            error: None,
            created_at_ms: now,
            updated_at_ms: now,
        };
        self.table
            .jobs
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(job.id.clone(), job.clone());
        let progress = Progress {
            id: job.id.clone(),
            table: Arc::clone(&self.table),
        };
        let task: Task = Box::new(move || {
            let table = Arc::clone(&progress.table);
            table.update(&progress.id, |j| j.state = JobState::Running);
            let outcome = catch_unwind(AssertUnwindSafe(|| work(&progress)));
            table.update(&progress.id, |j| match outcome {
                Ok(Ok(result)) => {
                    j.state = JobState::Done;
                    j.progress = 1.0;
                    j.result_ref = result;
                }
                Ok(Err(e)) => {
                    j.state = JobState::Error;
                    j.error = Some(JobError {
                        kind: e.kind().into(),
                        message: e.to_string(),
                    });
                }
                Err(_) => {
                    j.state = JobState::Error;
                    j.error = Some(JobError {
                        kind: "panic".into(),
                        message: "the job panicked".into(),
                    });
                }
            });
        });
        let sent = self
            .sender
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .as_ref()
            .map(|tx| tx.send(task).is_ok())
            .unwrap_or(false);
        if !sent {
            self.table.update(&job.id, |j| {
                j.state = JobState::Error;
                j.error = Some(JobError {
                    kind: "shutdown".into(),
                    message: "the job queue is shut down".into(),
                });
            });
        }
        job
    }

    pub fn get(&self, id: &str) -> Option<Job> {
        self.table
            .jobs
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
    }

    /// Blocks until the job is terminal or `timeout` passes.
    pub fn wait(&self, id: &str, timeout: Duration) -> Option<Job> {
        let deadline = Instant::now() + timeout;
        let mut jobs = self.table.jobs.lock().unwrap_or_else(|e| e.into_inner());
        loop {
            let job = jobs.get(id)?.clone();
            let now = Instant::now();
            if job.state.is_terminal() || now >= deadline {
                return Some(job);
            }
            jobs = self
                .table
                .changed
                .wait_timeout(jobs, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }
}

impl Drop for JobQueue {
    fn drop(&mut self) {
        self.sender.lock().unwrap_or_else(|e| e.into_inner()).take();
        for h in self.workers.drain(..) {
            let _ = h.join();
        }
    }
}
