//! Experiment documents. Simulation fields sit at the top level next to the
//! world source, start poses and output settings; JSON and TOML parse to the
//! same structure.

use std::path::{Path, PathBuf};

use pipe_core::gridmap::Cell;
use pipe_core::ingestion::MapClass;
use pipe_core::planners::PlannerKind;
use pipe_core::simulator::SimConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldSource {
    /// 8-bit graymap, 0 occupied and 255 free.
    Graymap {
        path: PathBuf,
        #[serde(default = "default_resolution")]
        resolution: f64,
    },
    /// Line-segment floorplan JSON.
    Floorplan { path: PathBuf },
    /// Procedural floorplan. Without a seed one is derived from the root
    /// seed; `resolution` overrides the default 10 cells per meter.
    Generated {
        class: MapClass,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        resolution: Option<f64>,
    },
}

fn default_resolution() -> f64 {
    pipe_core::gridmap::DEFAULT_RESOLUTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartSpec {
    /// `k` distinct Free cells drawn with the "starts" sub-seed.
    Sample(usize),
    /// Explicit `[x, y]` cells.
    Explicit(Vec<[i32; 2]>),
}

impl Default for StartSpec {
    fn default() -> Self {
        StartSpec::Sample(1)
    }
}

impl StartSpec {
    pub fn count(&self) -> usize {
        match self {
            StartSpec::Sample(k) => *k,
            StartSpec::Explicit(v) => v.len(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.count() == 0 {
            return Err(CliError::Usage("at least one start pose is required".into()));
        }
        Ok(())
    }

    pub fn explicit_cells(&self) -> Option<Vec<Cell>> {
        match self {
            StartSpec::Explicit(v) => Some(v.iter().map(|&[x, y]| Cell::new(x, y)).collect()),
            StartSpec::Sample(_) => None,
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    1
}

/// One world, one planner, one or more start poses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub world: WorldSource,
    #[serde(default)]
    pub starts: StartSpec,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Write observed (and fused predicted) graymaps every k steps.
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    #[serde(flatten)]
    pub sim: SimConfig,
}

impl ExperimentConfig {
    pub fn new(world: WorldSource) -> Self {
        Self {
            world,
            starts: StartSpec::default(),
            output: default_output(),
            workers: default_workers(),
            snapshot_every: None,
            sim: SimConfig::default(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.sim.validate().map_err(CliError::usage)?;
        self.starts.validate()?;
        if self.workers == 0 {
            return Err(CliError::Usage("workers must be at least 1".into()));
        }
        if self.snapshot_every == Some(0) {
            return Err(CliError::Usage("snapshot_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// A generated-world family: `count` maps of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedMaps {
    pub class: MapClass,
    pub count: usize,
    #[serde(default)]
    pub resolution: Option<f64>,
}

/// Cross product of maps, start poses and planners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSpec {
    #[serde(default)]
    pub maps: Vec<WorldSource>,
    #[serde(default)]
    pub generate: Vec<GeneratedMaps>,
    pub planners: Vec<PlannerKind>,
    /// Per map; sampled starts are shared by every planner on that map.
    #[serde(default)]
    pub starts: StartSpec,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(flatten)]
    pub sim: SimConfig,
}

impl BatchSpec {
    /// Explicit maps first, then generated families in order.
    pub fn worlds(&self) -> Vec<WorldSource> {
        let mut out = self.maps.clone();
        for family in &self.generate {
            for _ in 0..family.count {
                out.push(WorldSource::Generated {
                    class: family.class,
                    seed: None,
                    resolution: family.resolution,
                });
            }
        }
        out
    }

    pub fn validate(&self) -> CliResult<()> {
        self.sim.validate().map_err(CliError::usage)?;
        self.starts.validate()?;
        if self.planners.is_empty() {
            return Err(CliError::Usage("a batch needs at least one planner".into()));
        }
        if self.worlds().is_empty() {
            return Err(CliError::Usage("a batch needs at least one map".into()));
        }
        if self.workers == 0 {
            return Err(CliError::Usage("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Reads a JSON or TOML document; `.toml` selects TOML, anything else JSON.
pub fn load_document<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_document(&text, is_toml(path))
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn parse_document<T: DeserializeOwned>(text: &str, toml_syntax: bool) -> Result<T, String> {
    if toml_syntax {
        toml::from_str(text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }
}

fn is_toml(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"))
}
