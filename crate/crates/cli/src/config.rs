use std::fs;
use std::path::Path;

use chronicity::features::AggregationMode;
use chronicity::fusion::PrecedenceOrder;
use chronicity::instances::Connectivity;
use chronicity::raster::tiling::DEFAULT_PATCH_SIZE;
use chronicity::stats::DEFAULT_RESAMPLES;
use chronicity::survival::Ties;
use chronicity::{Error, Result};
use serde::{Deserialize, Serialize};

/// Run configuration. Every report echoes the effective values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in rule name or path to a rule JSON file.
    pub rule: String,
    pub min_area: u64,
    pub connectivity: Connectivity,
    pub precedence: PrecedenceOrder,
    pub aggregation: AggregationMode,
    pub seed: u64,
    pub resamples: usize,
    pub level: f64,
    pub ties: Ties,
    pub patch_size: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rule: chronicity::scoring::CONVENTIONAL.to_string(),
            min_area: 0,
            connectivity: Connectivity::Eight,
            precedence: PrecedenceOrder::default(),
            aggregation: AggregationMode::Pooled,
            seed: 0,
            resamples: DEFAULT_RESAMPLES,
            level: 0.95,
            ties: Ties::Efron,
            patch_size: DEFAULT_PATCH_SIZE,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

pub fn parse_connectivity(s: &str) -> std::result::Result<Connectivity, String> {
    let v: u8 = s.parse().map_err(|_| format!("connectivity must be 4 or 8, got {s:?}"))?;
    Connectivity::try_from(v).map_err(|e| e.to_string())
}
