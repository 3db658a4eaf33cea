//! Column-by-column execution with one checkpoint file per finished column.
//!
//! A column's output rows are written to `col_NNNNN.csv` under the
//! checkpoint directory as soon as the column finishes. On resume, columns
//! with a complete checkpoint for the same config hash are read back
//! instead of recomputed, and the merge is by column index, so the final
//! file does not depend on which columns ran in which process.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::CliError;
use crate::output::write_atomic;

const END_MARKER: &str = "# end\n";

pub struct Checkpoints {
    dir: PathBuf,
    hash: String,
}

impl Checkpoints {
    /// Open the checkpoint directory. Without `resume`, earlier
    /// checkpoints are discarded.
    pub fn open(dir: &Path, hash: &str, resume: bool) -> Result<Self, CliError> {
        if !resume && dir.exists() {
            std::fs::remove_dir_all(dir)?;
        }
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash: hash.to_string(),
        })
    }

    fn path(&self, column: usize) -> PathBuf {
        self.dir.join(format!("col_{column:05}.csv"))
    }

    fn hash_line(&self) -> String {
        format!("# config_sha256: {}\n", self.hash)
    }

    /// Rows of a finished column, if its checkpoint is complete.
    fn load(&self, column: usize) -> Result<Option<String>, CliError> {
        let path = self.path(column);
        let Ok(text) = std::fs::read_to_string(&path) else {
            return Ok(None);
        };
        let Some(body) = text.strip_prefix(&self.hash_line()) else {
            return Err(CliError::Config(format!(
                "{} was written for a different configuration; rerun without --resume",
                path.display()
            )));
        };
        Ok(body.strip_suffix(END_MARKER).map(str::to_string))
    }

    fn store(&self, column: usize, rows: &str) -> Result<(), CliError> {
        write_atomic(
            &self.path(column),
            &format!("{}{rows}{END_MARKER}", self.hash_line()),
        )
    }

    /// Produce the rows of every column, computing only those without a
    /// checkpoint. Errors are reported for the lowest failing column.
    pub fn run<F>(
        &self,
        columns: usize,
        pool: &ThreadPool,
        work: F,
    ) -> Result<Vec<String>, CliError>
    where
        F: Fn(usize) -> Result<String, CliError> + Sync,
    {
        let mut rows: Vec<Option<String>> = (0..columns)
            .map(|i| self.load(i))
            .collect::<Result<_, _>>()?;
        let missing: Vec<usize> = (0..columns).filter(|&i| rows[i].is_none()).collect();
        let computed: Vec<(usize, Result<String, CliError>)> = pool.install(|| {
            missing
                .par_iter()
                .map(|&i| {
                    let r = work(i).and_then(|text| {
                        self.store(i, &text)?;
                        Ok(text)
                    });
                    (i, r)
                })
                .collect()
        });
        for (i, r) in computed {
            rows[i] = Some(r?);
        }
        Ok(rows
            .into_iter()
            .map(|r| r.expect("all columns filled"))
            .collect())
    }

    pub fn finish(self) -> Result<(), CliError> {
        std::fs::remove_dir_all(&self.dir)?;
        // The shared parent goes too once no other map is using it.
        if let Some(parent) = self.dir.parent() {
            let _ = std::fs::remove_dir(parent);
        }
        Ok(())
    }
}
