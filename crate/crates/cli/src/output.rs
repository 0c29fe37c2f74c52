use crate::Failure;
use serde::Serialize;
use std::path::PathBuf;

pub struct Output {
    dir: Option<PathBuf>,
}

fn io(e: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("cannot write output: {e}"))
}

impl Output {
    pub fn new(dir: Option<PathBuf>) -> Result<Self, Failure> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d).map_err(io)?;
        }
        Ok(Output { dir })
    }

    /// Writes `name` into the output directory, or prints it when there is
    /// none.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(value).map_err(io)? + "\n";
        match &self.dir {
            Some(d) => std::fs::write(d.join(name), text).map_err(io),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    /// CSV files are only written into an output directory.
    pub fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<(), Failure> {
        let Some(d) = &self.dir else { return Ok(()) };
        let mut w = csv::Writer::from_path(d.join(name)).map_err(io)?;
        for r in rows {
            w.serialize(r).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn has_dir(&self) -> bool {
        self.dir.is_some()
    }
}
