use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{plot, CliError, RunArgs};
use crate::config::{Config, Experiment};
use crate::sim::{metrics, run, Metrics};

/// Band used for the settling time in the metrics file.
pub const SETTLE_BAND: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub experiment: Experiment,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub vor_disabled: bool,
    pub plot: bool,
}

impl RunOptions {
    pub fn new(experiment: Experiment, out: impl Into<PathBuf>) -> Self {
        Self {
            experiment,
            config: None,
            seed: None,
            out: out.into(),
            vor_disabled: false,
            plot: false,
        }
    }
}

impl From<RunArgs> for RunOptions {
    fn from(a: RunArgs) -> Self {
        Self {
            experiment: a.experiment,
            config: a.config,
            seed: a.seed,
            out: a.out,
            vor_disabled: a.vor_disabled,
            plot: a.plot,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace_csv: PathBuf,
    pub metrics_json: PathBuf,
    pub plot_svg: Option<PathBuf>,
    pub metrics: Metrics,
}

impl RunOutput {
    pub fn files(&self) -> Vec<&Path> {
        let mut v = vec![self.trace_csv.as_path(), self.metrics_json.as_path()];
        v.extend(self.plot_svg.as_deref());
        v
    }
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    experiment: &'a str,
    seed: u64,
    vor_enabled: bool,
    settle_band: f64,
    ticks: usize,
    #[serde(flatten)]
    metrics: Metrics,
}

pub fn cmd_run(opts: &RunOptions) -> Result<RunOutput, CliError> {
    let mut cfg = Config::load(opts.config.as_deref())?;
    if let Some(seed) = opts.seed {
        cfg.sim.seed = seed;
    }
    if opts.vor_disabled {
        cfg.supervisor.vor_enabled = false;
    }
    let scenario = cfg
        .scenario(opts.experiment)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let sim_cfg = cfg.sim_config();
    let trace = run(&scenario, &sim_cfg)?;
    let m = metrics(&trace, SETTLE_BAND).map_err(|e| CliError::Usage(e.to_string()))?;

    fs::create_dir_all(&opts.out).map_err(|source| CliError::Output { path: opts.out.clone(), source })?;
    let name = opts.experiment.name();
    let trace_csv = opts.out.join(format!("{name}_trace.csv"));
    write_file(&trace_csv, |w| trace.write_csv(w))?;

    let metrics_json = opts.out.join(format!("{name}_metrics.json"));
    let body = MetricsFile {
        experiment: name,
        seed: cfg.sim.seed,
        vor_enabled: sim_cfg.supervisor.vor_enabled,
        settle_band: SETTLE_BAND,
        ticks: trace.records.len() / 2,
        metrics: m,
    };
    write_file(&metrics_json, |w| {
        serde_json::to_writer_pretty(&mut *w, &body)?;
        writeln!(w)
    })?;

    let plot_svg = if opts.plot {
        let p = opts.out.join(format!("{name}_plot.svg"));
        write_file(&p, |w| w.write_all(plot::trace_svg(&trace).as_bytes()))?;
        Some(p)
    } else {
        None
    };
    Ok(RunOutput { trace_csv, metrics_json, plot_svg, metrics: m })
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let err = |source| CliError::Output { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(fs::File::create(path).map_err(err)?);
    body(&mut w).map_err(err)?;
    w.flush().map_err(err)
}

