//! Run configuration, manifests and output files.
//!
//! Configs are TOML. CSV floats carry 17 significant digits; JSON and TOML
//! floats use the shortest representation that parses back exactly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiments::{
    linspace, ExperimentError, LogisticFit, PhaseDiagram, SweepSpec, TransitionCurve,
};
use crate::geometry::{GeometryError, Window};
use crate::percolation::{Crossing, Realization};
use crate::placement::{DerivedParams, NetworkParams, ParamError};
use crate::propagation::StreetVerdict;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Window(#[from] GeometryError),
    #[error(transparent)]
    Grid(#[from] ExperimentError),
    #[error("{0}")]
    Invalid(String),
}

/// U grid and interference factors for a phase diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSpec {
    pub thetas: Vec<f64>,
    pub u_from: f64,
    pub u_to: f64,
    pub u_steps: usize,
    /// Re-simulate each window at the midpoint of its critical values.
    pub check_midpoint: bool,
}

impl Default for PhaseSpec {
    fn default() -> Self {
        Self {
            thetas: Vec::new(),
            u_from: 0.0,
            u_to: 10.0,
            u_steps: 21,
            check_midpoint: false,
        }
    }
}

impl PhaseSpec {
    pub fn u_grid(&self) -> Result<Vec<f64>, ExperimentError> {
        linspace(self.u_from, self.u_to, self.u_steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub replications: usize,
    /// Side of the inner window in metres.
    pub window_side: f64,
    pub out: PathBuf,
    pub dump_realizations: bool,
    /// Overrides `params.user_intensity` with `U / l1` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub users_per_street: Option<f64>,
    pub params: NetworkParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<PhaseSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            replications: 100,
            window_side: 1500.0,
            out: PathBuf::from("out"),
            dump_realizations: false,
            users_per_street: None,
            params: NetworkParams::default(),
            sweep: None,
            phase: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, IoError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml_string(&self) -> Result<String, IoError> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(|source| IoError::File {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn resolved_params(&self) -> NetworkParams {
        match self.users_per_street {
            Some(u) => self.params.with_users_per_street(u),
            None => self.params,
        }
    }

    pub fn window(&self) -> Result<Window, GeometryError> {
        Window::new(self.window_side)
    }

    /// Checks everything a run needs before any simulation starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(u) = self.users_per_street {
            if !(u >= 0.0 && u.is_finite()) {
                return Err(ConfigError::Invalid(format!(
                    "users_per_street {u} must be >= 0"
                )));
            }
        }
        self.resolved_params().validate()?;
        if !(self.window_side > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "window_side {} must be > 0",
                self.window_side
            )));
        }
        self.window()?;
        if self.replications == 0 {
            return Err(ConfigError::Invalid(
                "replications must be at least 1".into(),
            ));
        }
        if let Some(s) = &self.sweep {
            s.grid()?;
        }
        if let Some(p) = &self.phase {
            p.u_grid()?;
        }
        Ok(())
    }
}

/// Echo of a run, enough to reproduce every file it lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub program: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub derived: DerivedParams,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Result<Self, ParamError> {
        Ok(Self {
            program: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            derived: config.resolved_params().derive()?,
            outputs: Vec::new(),
            notes: Vec::new(),
        })
    }
}

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// `param,value,reps,successes,prob,ci_low,ci_high,status`, one row per
/// grid value. Failed points keep their row with empty numbers.
pub fn write_sweep_csv<W: Write>(out: W, curve: &TransitionCurve) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "param",
        "value",
        "reps",
        "successes",
        "prob",
        "ci_low",
        "ci_high",
        "status",
    ])?;
    for p in &curve.points {
        let mut row = vec![curve.param.name().to_string(), fmt_float(p.value)];
        match &p.estimate {
            Ok(e) => {
                row.extend([
                    e.replications.to_string(),
                    e.successes.to_string(),
                    fmt_float(e.probability),
                    fmt_float(e.ci_low),
                    fmt_float(e.ci_high),
                    "ok".to_string(),
                ]);
            }
            Err(msg) => {
                row.extend(["", "", "", "", ""].map(String::from));
                row.push(format!("error: {msg}"));
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `param_value,replications,successes,probability,ci_low,ci_high,seed`
/// for every simulated grid value.
pub fn write_aggregate_csv<W: Write>(
    out: W,
    curve: &TransitionCurve,
    seed: u64,
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "param_value",
        "replications",
        "successes",
        "probability",
        "ci_low",
        "ci_high",
        "seed",
    ])?;
    for p in &curve.points {
        if let Ok(e) = &p.estimate {
            w.write_record([
                fmt_float(p.value),
                e.replications.to_string(),
                e.successes.to_string(),
                fmt_float(e.probability),
                fmt_float(e.ci_low),
                fmt_float(e.ci_high),
                seed.to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `theta,u1_star,u2_star,status,peak_probability,midpoint_probability`;
/// missing critical values are empty.
pub fn write_phase_csv<W: Write>(out: W, diagram: &PhaseDiagram) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "theta",
        "u1_star",
        "u2_star",
        "status",
        "peak_probability",
        "midpoint_probability",
    ])?;
    for r in &diagram.rows {
        w.write_record([
            fmt_float(r.theta),
            fmt_opt(r.u1_star),
            fmt_opt(r.u2_star),
            r.status.clone(),
            fmt_float(r.peak_probability),
            fmt_opt(r.midpoint_probability),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_fits<W: Write>(out: W, fits: &[LogisticFit]) -> Result<(), IoError> {
    write_json(out, &fits)
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(mut out: W, value: &T) -> Result<(), IoError> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(serde_json::Error::io)?;
    Ok(())
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_file<F>(path: &Path, f: F) -> Result<(), IoError>
where
    F: FnOnce(&mut std::io::BufWriter<fs::File>) -> Result<(), IoError>,
{
    let wrap = |source| IoError::File {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(wrap)?;
    }
    let mut w = std::io::BufWriter::new(fs::File::create(path).map_err(wrap)?);
    f(&mut w)?;
    w.flush().map_err(wrap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreetRecord {
    pub id: usize,
    pub v1: usize,
    pub v2: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub street_id: usize,
    pub offset: f64,
}

/// Plot-ready geometry, deployment and verdicts of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationDump {
    pub replication: u64,
    pub window_side: f64,
    pub params: NetworkParams,
    pub vertices: Vec<VertexRecord>,
    pub streets: Vec<StreetRecord>,
    /// Crossroads hosting a relay.
    pub relays: Vec<usize>,
    pub users: Vec<UserRecord>,
    pub verdicts: Vec<StreetVerdict>,
    /// Component label per street, `null` when closed.
    pub components: Vec<Option<usize>>,
    pub crossing: Crossing,
    pub percolates: bool,
}

impl RealizationDump {
    pub fn new(r: &Realization, params: &NetworkParams, window: &Window) -> Self {
        let vertices = r
            .system
            .vertices()
            .iter()
            .enumerate()
            .map(|(id, p)| VertexRecord { id, x: p.x, y: p.y })
            .collect();
        let streets = r
            .system
            .streets()
            .iter()
            .map(|s| StreetRecord {
                id: s.id,
                v1: s.v1,
                v2: s.v2,
                length: s.length,
            })
            .collect();
        let relays = r
            .deployment
            .relays()
            .iter()
            .enumerate()
            .filter_map(|(v, &present)| present.then_some(v))
            .collect();
        let users = r
            .deployment
            .users()
            .iter()
            .enumerate()
            .flat_map(|(street_id, offsets)| {
                offsets
                    .iter()
                    .map(move |&offset| UserRecord { street_id, offset })
            })
            .collect();
        Self {
            replication: r.outcome.replication,
            window_side: window.inner_side(),
            params: *params,
            vertices,
            streets,
            relays,
            users,
            verdicts: r.outcome.verdicts.clone(),
            components: r.outcome.graph.labels.clone(),
            crossing: r.outcome.crossing,
            percolates: r.outcome.percolates(),
        }
    }
}
