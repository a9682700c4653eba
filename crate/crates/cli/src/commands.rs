use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use spacefill::models::{ExponentialModel, TorusModel};
use spacefill::oracle::{torus_uniform, AreaFormulaOracle, OracleSample};
use spacefill::transport::EXACT_LIMIT;
use spacefill::{run_with, w1_exact, GroundMetric, ParamBox, Termination};

use crate::config::{BoxConfig, Experiment, Resolved};
use crate::error::{CliError, CliResult};
use crate::io::{
    numbered, sample_columns, write_ensemble_rows, write_record, CsvOut, Table, DIAGNOSTIC_COLUMNS,
};

pub const SAMPLES_FILE: &str = "samples.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to reproduce a run. `experiment` is itself a valid
/// config file, and `run --config manifest.json` accepts the whole manifest.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub seed: u64,
    pub experiment: Experiment,
    pub alpha: f64,
    pub kernel_lipschitz: (f64, f64),
    pub scale: Option<f64>,
    pub termination: Option<Termination>,
    pub f_evals: u64,
    /// Enzyme evaluations that hit the integration horizon without settling.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unconverged: Option<u64>,
}

/// Reads a config file or a manifest written by [`cmd_run`].
pub fn load_experiment(path: &Path) -> CliResult<Experiment> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let body = match value.get("experiment") {
        Some(inner) if value.get("version").is_some() => inner.clone(),
        _ => value,
    };
    serde_json::from_value(body).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("config types serialize")
}

fn provenance(exp: &Experiment) -> Vec<String> {
    vec![
        format!("spacefill {}", env!("CARGO_PKG_VERSION")),
        format!("model: {}", json(&exp.model)),
        format!("target: {}", json(&exp.target)),
        format!("box: {}", json(&exp.param_box)),
        format!("run: {}", json(&exp.run)),
    ]
}

fn box_config(bx: &ParamBox) -> BoxConfig {
    BoxConfig {
        lower: bx.lower().to_vec(),
        upper: bx.upper().to_vec(),
    }
}

/// Runs the sampler and writes `samples.csv`, `diagnostics.csv` and
/// `manifest.json` into `out_dir`.
pub fn cmd_run(config: &Path, out_dir: &Path, seed: Option<u64>) -> CliResult<Manifest> {
    let mut exp = load_experiment(config)?;
    if let Some(seed) = seed {
        exp.run.seed = seed;
    }
    let Resolved {
        model,
        target,
        param_box,
        run,
        enzyme,
    } = exp.resolve()?;
    let resolved = Experiment {
        param_box: Some(box_config(&param_box)),
        run: run.clone(),
        ..exp
    };

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let header = provenance(&resolved);
    let columns = sample_columns(model.dim_in(), model.dim_out());
    let mut samples = CsvOut::create(&out_dir.join(SAMPLES_FILE), &header, &columns)?;
    let mut write_error = None;
    let output = run_with(
        model.as_ref(),
        target.as_ref(),
        &param_box,
        &run,
        None,
        |p| {
            if write_error.is_none() {
                if let Err(e) = write_ensemble_rows(&mut samples, p.record.iteration, p.resampled) {
                    write_error = Some(e);
                }
            }
        },
    )?;
    if let Some(e) = write_error {
        return Err(e);
    }
    samples.finish()?;

    let columns: Vec<String> = DIAGNOSTIC_COLUMNS.iter().map(|c| c.to_string()).collect();
    let mut diag = CsvOut::create(&out_dir.join(DIAGNOSTICS_FILE), &header, &columns)?;
    for r in &output.diagnostics.records {
        write_record(&mut diag, r)?;
    }
    diag.finish()?;

    let d = &output.diagnostics;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        seed: run.seed,
        experiment: resolved,
        alpha: d.alpha,
        kernel_lipschitz: d.kernel_lipschitz,
        scale: d.scale,
        termination: d.termination,
        f_evals: d.f_evals(),
        unconverged: enzyme.map(|e| e.unconverged_count()),
    };
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::runtime(format!("manifest: {e}")))?;
    text.push('\n');
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}

/// Built-in oracle samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    /// Uniform on the default torus.
    TorusUniform,
    /// Density proportional to `1 / |y - (0, 1, 0)|^2` on the default torus.
    TorusInverseSquared,
    /// Uniform on the default exponential manifold.
    Exponential,
}

impl FromStr for OracleKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "torus_uniform" | "torus" => Ok(OracleKind::TorusUniform),
            "torus_inverse_squared" => Ok(OracleKind::TorusInverseSquared),
            "expo" | "exponential" => Ok(OracleKind::Exponential),
            other => Err(CliError::config(format!(
                "unknown oracle `{other}`; expected torus_uniform, torus_inverse_squared or expo"
            ))),
        }
    }
}

impl OracleKind {
    pub fn name(self) -> &'static str {
        match self {
            OracleKind::TorusUniform => "torus_uniform",
            OracleKind::TorusInverseSquared => "torus_inverse_squared",
            OracleKind::Exponential => "expo",
        }
    }

    pub fn sample(self, count: usize, seed: u64) -> CliResult<OracleSample> {
        Ok(match self {
            OracleKind::TorusUniform => torus_uniform(&TorusModel::default(), count, seed),
            OracleKind::TorusInverseSquared => AreaFormulaOracle::torus_inverse_squared(
                TorusModel::default(),
                vec![0.0, 1.0, 0.0],
            )?
            .sample(count, seed)?,
            OracleKind::Exponential => {
                AreaFormulaOracle::exponential(ExponentialModel::default())?.sample(count, seed)?
            }
        })
    }
}

/// Writes `count` oracle draws as `x_1, x_2, y_1, y_2, y_3` rows.
pub fn cmd_oracle(kind: OracleKind, count: usize, seed: u64, out: &Path) -> CliResult<()> {
    let sample = kind.sample(count, seed)?;
    let mut columns: Vec<String> = numbered("x", 2).collect();
    columns.extend(numbered("y", 3));
    let header = vec![
        format!("spacefill {}", env!("CARGO_PKG_VERSION")),
        format!("oracle: {} count={count} seed={seed}", kind.name()),
    ];
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut csv = CsvOut::create(out, &header, &columns)?;
    for (x, y) in sample.params.iter().zip(&sample.images) {
        csv.row(&[], x.iter().chain(y).map(|v| Some(*v)))?;
    }
    csv.finish()
}

/// W1 between the final image ensembles of two CSV files.
pub fn cmd_w1(a: &Path, b: &Path, metric: GroundMetric) -> CliResult<f64> {
    let ya = Table::read(a)?.final_images()?;
    let yb = Table::read(b)?.final_images()?;
    if ya.len() != yb.len() {
        return Err(CliError::config(format!(
            "row counts differ: {} has {}, {} has {}",
            a.display(),
            ya.len(),
            b.display(),
            yb.len()
        )));
    }
    if let (Some(p), Some(q)) = (ya.first(), yb.first()) {
        if p.len() != q.len() {
            return Err(CliError::config(format!(
                "image dimensions differ: {} vs {}",
                p.len(),
                q.len()
            )));
        }
    }
    if ya.len() > EXACT_LIMIT {
        return Err(CliError::config(format!(
            "exact W1 is limited to {EXACT_LIMIT} rows"
        )));
    }
    if ya.is_empty() {
        return Ok(0.0);
    }
    Ok(w1_exact(&ya, &yb, metric)?)
}
