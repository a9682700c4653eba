//! Models backed by a user executable.
//!
//! Each batch starts one process, writes one line of `m` whitespace-separated
//! decimals per point to its standard input, closes it, and reads one line of
//! `n` decimals per point back from standard output, in order.

use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use spacefill::{Error, Model, Result};

use crate::config::ExternalCommand;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct ExternalModel {
    cfg: ExternalCommand,
}

impl ExternalModel {
    pub fn new(cfg: ExternalCommand) -> CliResult<Self> {
        if cfg.command.is_empty() {
            return Err(CliError::config("model.command must name a program"));
        }
        if cfg.dim_in == 0 || cfg.dim_out < cfg.dim_in {
            return Err(CliError::config(format!(
                "external model needs 0 < dim_in <= dim_out, got {} and {}",
                cfg.dim_in, cfg.dim_out
            )));
        }
        Ok(ExternalModel { cfg })
    }

    fn parse_line(&self, number: usize, line: &str) -> Result<Vec<f64>> {
        let bad = || Error::Model(format!("output line {number} is malformed: {line:?}"));
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if values.len() != self.cfg.dim_out || values.iter().any(|v| !v.is_finite()) {
            return Err(bad());
        }
        Ok(values)
    }
}

impl Model for ExternalModel {
    fn dim_in(&self) -> usize {
        self.cfg.dim_in
    }

    fn dim_out(&self) -> usize {
        self.cfg.dim_out
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.eval_batch(&[x.to_vec()])?;
        Ok(out.remove(0))
    }

    fn is_reentrant(&self) -> bool {
        false
    }

    fn eval_batch(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let program = &self.cfg.command[0];
        let mut child = Command::new(program)
            .args(&self.cfg.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Model(format!("cannot start {program:?}: {e}")))?;

        let mut input = String::with_capacity(points.len() * 24 * self.cfg.dim_in);
        for p in points {
            let line: Vec<String> = p.iter().map(|v| format!("{v:e}")).collect();
            input.push_str(&line.join(" "));
            input.push('\n');
        }
        let mut stdin = child.stdin.take().expect("stdin is piped");
        // Writing on a separate thread keeps a child that streams its output
        // from blocking on a full pipe.
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));

        let stdout = child.stdout.take().expect("stdout is piped");
        let mut results = Vec::with_capacity(points.len());
        let mut parse_error = None;
        for (i, line) in BufReader::new(stdout).lines().enumerate() {
            let line = line.map_err(|e| Error::Model(format!("reading from {program:?}: {e}")))?;
            if results.len() == points.len() {
                parse_error.get_or_insert(Error::Model(format!(
                    "{program:?} printed more than {} lines; extra line {}: {line:?}",
                    points.len(),
                    i + 1
                )));
                continue;
            }
            match self.parse_line(i + 1, &line) {
                Ok(v) if parse_error.is_none() => results.push(v),
                Ok(_) => {}
                Err(e) => {
                    parse_error.get_or_insert(e);
                }
            }
        }
        let status = child
            .wait()
            .map_err(|e| Error::Model(format!("waiting for {program:?}: {e}")))?;
        let write_result = writer.join().expect("writer thread panicked");
        if let Some(e) = parse_error {
            return Err(e);
        }
        if !status.success() {
            return Err(Error::Model(format!("{program:?} exited with {status}")));
        }
        if results.len() != points.len() {
            return Err(Error::Model(format!(
                "{program:?} printed {} lines for {} points",
                results.len(),
                points.len()
            )));
        }
        write_result.map_err(|e| Error::Model(format!("writing to {program:?}: {e}")))?;
        Ok(results)
    }
}
