use std::path::Path;

use serde::{Deserialize, Serialize};

use ruelle::alphabet::{AprioriMeasure, Grid};
use ruelle::potential::{Potential, PotentialSpec};
use ruelle::transfer::SolveConfig;

use crate::Failure;

/// One run: what to integrate against, which potential, how hard to solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub measure: Option<AprioriMeasure>,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub solver: Option<SolveConfig>,
    /// Largest accepted eigen and conformality residual.
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: Params,
}

fn default_residual_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub betas: Vec<f64>,
    pub n_max: usize,
    /// Start words for the ergodicity fit; defaults to constant words.
    pub starts: Option<Vec<Vec<usize>>>,
    pub steps: usize,
    /// Start word for `markov-sim`; a stationary start when absent.
    pub start: Option<Vec<usize>>,
    /// CLT observable; defaults to the first coordinate's scalar label.
    pub xi: Option<PotentialSpec>,
    pub n: usize,
    pub samples: usize,
    pub lag_max: usize,
    pub variance_n: usize,
    pub variance_samples: usize,
    pub rate_ns: Vec<usize>,
    pub histogram_bins: usize,
    pub ts: Vec<f64>,
    /// Other endpoint of the convexity segment; zero when absent.
    pub other: Option<PotentialSpec>,
    pub contraction_pairs: usize,
    pub contraction_m: usize,
    pub contraction_support: usize,
    pub paths: PathParams,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            betas: (0..=10).map(|k| 5.0 * k as f64).collect(),
            n_max: 14,
            starts: None,
            steps: 1000,
            start: None,
            xi: None,
            n: 1000,
            samples: 10_000,
            lag_max: ruelle::markov::DEFAULT_LAG_MAX,
            variance_n: 1000,
            variance_samples: 1000,
            rate_ns: Vec::new(),
            histogram_bins: 40,
            ts: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            other: None,
            contraction_pairs: 20,
            contraction_m: 4,
            contraction_support: 5,
            paths: PathParams::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathParams {
    pub vertices: usize,
    pub dim: usize,
    pub pairs: usize,
    /// Samples per segment of the dense Hausdorff comparison.
    pub dense_resolution: usize,
    pub j0: f64,
    pub r: f64,
    pub alpha: f64,
    pub configurations: usize,
    pub config_len: usize,
    pub mc_samples: Vec<usize>,
}

impl Default for PathParams {
    fn default() -> Self {
        Self {
            vertices: 5,
            dim: 2,
            pairs: 20,
            dense_resolution: 2000,
            j0: 1.0,
            r: 0.5,
            alpha: 1.0,
            configurations: 1000,
            config_len: 6,
            mc_samples: vec![2048, 4096, 8192],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::Validation(format!("config {} does not parse: {e}", path.display())))
    }

    /// Re-check the measure through its validating constructor and fill in
    /// the solver defaults, so the manifest records what actually ran.
    pub fn resolve(mut self, seed: Option<u64>) -> Result<Self, Failure> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if !(self.residual_tol > 0.0) {
            return Err(Failure::Validation(format!(
                "residual_tol must be positive (got {})",
                self.residual_tol
            )));
        }
        if let Some(m) = &self.measure {
            let checked = AprioriMeasure::new(m.alphabet.clone(), m.backend.clone())?;
            if self.solver.is_none() {
                if let Ok(grid) = checked.grid() {
                    self.solver = Some(SolveConfig::for_nodes(grid.len()));
                }
            }
        }
        if let Some(cfg) = &self.solver {
            if !(cfg.tol > 0.0) {
                return Err(Failure::Validation(format!("solver.tol must be positive (got {})", cfg.tol)));
            }
        }
        Ok(self)
    }

    pub fn grid(&self) -> Result<Grid, Failure> {
        let m = self
            .measure
            .as_ref()
            .ok_or_else(|| Failure::Validation("config needs a `measure` section".into()))?;
        let grid = m.grid()?;
        self.solver()?.validate(grid.len())?;
        Ok(grid)
    }

    pub fn solver(&self) -> Result<&SolveConfig, Failure> {
        self.solver
            .as_ref()
            .ok_or_else(|| Failure::Validation("config needs a `solver` section".into()))
    }

    pub fn potential(&self, grid: &Grid) -> Result<Potential, Failure> {
        let spec = self
            .potential
            .as_ref()
            .ok_or_else(|| Failure::Validation("config needs a `potential` section".into()))?;
        Ok(spec.build(grid)?)
    }
}
