//! Checkpointed execution of independent work units.
//!
//! Units are identified by string keys and produce a vector of floats.
//! Pending units run concurrently on the current rayon pool in fixed-size
//! chunks; after each chunk the results are appended to a JSON-lines
//! checkpoint. A resumed run loads those values verbatim, so the final
//! artifacts do not depend on where (or whether) a run was interrupted.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Units started between two checkpoint flushes.
const CHUNK: usize = 32;

type Job<'a> = Box<dyn Fn() -> spinflux::Result<Vec<f64>> + Send + Sync + 'a>;

pub struct Unit<'a> {
    pub key: String,
    job: Job<'a>,
}

impl<'a> Unit<'a> {
    pub fn new(key: impl Into<String>, job: impl Fn() -> spinflux::Result<Vec<f64>> + Send + Sync + 'a) -> Self {
        Self {
            key: key.into(),
            job: Box::new(job),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    token: String,
}

#[derive(Serialize, Deserialize)]
struct Line {
    key: String,
    value: Vec<f64>,
}

struct Checkpoint {
    path: PathBuf,
    file: File,
}

pub struct Runner {
    token: String,
    checkpoint: Option<Checkpoint>,
    done: HashMap<String, Vec<f64>>,
    budget: Option<usize>,
    computed: usize,
}

impl Runner {
    /// No persistence; never interrupted.
    pub fn in_memory() -> Self {
        Self {
            token: String::new(),
            checkpoint: None,
            done: HashMap::new(),
            budget: None,
            computed: 0,
        }
    }

    /// Persist progress to `path`. With `resume`, previously completed units
    /// are loaded (the file must exist and carry `token`); otherwise the file
    /// is started afresh. `stop_after` caps the number of units computed in
    /// this invocation.
    pub fn with_checkpoint(path: &Path, token: &str, resume: bool, stop_after: Option<usize>) -> CliResult<Self> {
        let mut done = HashMap::new();
        if resume {
            let f = File::open(path).map_err(|e| CliError::io(path, e))?;
            let mut lines = BufReader::new(f).lines();
            let corrupt = |reason: String| CliError::Corrupt {
                path: path.to_path_buf(),
                reason,
            };
            let head = lines
                .next()
                .ok_or_else(|| corrupt("empty checkpoint".into()))?
                .map_err(|e| CliError::io(path, e))?;
            let head: Header = serde_json::from_str(&head).map_err(|e| corrupt(e.to_string()))?;
            if head.token != token {
                return Err(CliError::Config(format!(
                    "checkpoint belongs to run {}, not {token}",
                    head.token
                )));
            }
            for line in lines {
                let line = line.map_err(|e| CliError::io(path, e))?;
                // a torn final line from a hard kill is simply recomputed
                if let Ok(l) = serde_json::from_str::<Line>(&line) {
                    done.insert(l.key, l.value);
                }
            }
        }
        let file = if resume {
            OpenOptions::new().append(true).open(path)
        } else {
            File::create(path)
        }
        .map_err(|e| CliError::io(path, e))?;
        let mut cp = Checkpoint {
            path: path.to_path_buf(),
            file,
        };
        if resume {
            // close off a torn tail so new lines are not glued onto it
            let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
            if bytes.last().is_some_and(|&b| b != b'\n') {
                writeln!(cp.file).map_err(|e| CliError::io(path, e))?;
            }
        } else {
            let head = serde_json::to_string(&Header { token: token.into() }).expect("header");
            writeln!(cp.file, "{head}").map_err(|e| CliError::io(path, e))?;
        }
        Ok(Self {
            token: token.into(),
            checkpoint: Some(cp),
            done,
            budget: stop_after,
            computed: 0,
        })
    }

    /// Units restored from the checkpoint.
    pub fn restored(&self) -> usize {
        self.done.len() - self.computed
    }

    /// Units computed by this invocation so far.
    pub fn computed(&self) -> usize {
        self.computed
    }

    /// Results of `units`, in their order.
    pub fn run(&mut self, units: Vec<Unit<'_>>) -> CliResult<Vec<Vec<f64>>> {
        let pending: Vec<usize> = (0..units.len()).filter(|&i| !self.done.contains_key(&units[i].key)).collect();
        let mut rest = &pending[..];
        while !rest.is_empty() {
            let room = self.budget.map_or(usize::MAX, |b| b.saturating_sub(self.computed));
            if room == 0 {
                return Err(CliError::Interrupted {
                    completed: self.done.len(),
                    token: self.token.clone(),
                });
            }
            let (chunk, tail) = rest.split_at(rest.len().min(CHUNK).min(room));
            rest = tail;
            let fresh: Vec<Vec<f64>> = chunk
                .par_iter()
                .map(|&i| (units[i].job)())
                .collect::<spinflux::Result<_>>()?;
            for (&i, value) in chunk.iter().zip(fresh) {
                if let Some(cp) = &mut self.checkpoint {
                    let line = serde_json::to_string(&Line {
                        key: units[i].key.clone(),
                        value: value.clone(),
                    })
                    .map_err(|e| CliError::Corrupt {
                        path: cp.path.clone(),
                        reason: e.to_string(),
                    })?;
                    writeln!(cp.file, "{line}").map_err(|e| CliError::io(&cp.path, e))?;
                }
                self.done.insert(units[i].key.clone(), value);
                self.computed += 1;
            }
            if let Some(cp) = &mut self.checkpoint {
                cp.file.flush().map_err(|e| CliError::io(&cp.path, e))?;
            }
        }
        Ok(units.iter().map(|u| self.done[&u.key].clone()).collect())
    }

    /// Remove the checkpoint after a completed run.
    pub fn finish(self) -> CliResult<()> {
        if let Some(cp) = self.checkpoint {
            drop(cp.file);
            std::fs::remove_file(&cp.path).map_err(|e| CliError::io(&cp.path, e))?;
        }
        Ok(())
    }
}
