//! Versioned run configuration: one TOML file covering the graph source,
//! sampling city, dataset knobs, language bands, metric parameters, score
//! weights, evaluation settings, and the model client. Unknown keys are
//! rejected; omitted keys take the library defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{CitySpec, ComplexityOrientation, GenOptions};
use crate::eval::EvalParams;
use crate::geo::GeoPoint;
use crate::instr::TurnBands;
use crate::metrics::{MetricParams, SimilarityWeights};

/// The config schema version this build reads.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported config version {got}; this build reads version {want}")]
    Version { got: u32, want: u32 },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where the road graph comes from: a synthetic jittered grid, or a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// "grid" builds a synthetic grid from the fields below; any other
    /// value is read as a file path.
    pub source: String,
    /// File format when `source` is a path: "jsonl" or "geojson".
    pub format: String,
    pub rows: usize,
    pub cols: usize,
    pub spacing_m: f64,
    pub jitter_m: f64,
    pub grid_seed: u64,
    /// Northwest anchor of the grid, `[lat, lon]`.
    pub origin: [f64; 2],
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            source: "grid".into(),
            format: "jsonl".into(),
            rows: 40,
            cols: 40,
            spacing_m: 100.0,
            jitter_m: 10.0,
            grid_seed: 7,
            origin: [43.6465, -79.4637],
        }
    }
}

impl GraphConfig {
    pub fn is_grid(&self) -> bool {
        self.source == "grid"
    }

    pub fn origin_point(&self) -> Result<GeoPoint, ConfigError> {
        GeoPoint::new(self.origin[0], self.origin[1])
            .map_err(|e| ConfigError::Invalid(format!("graph.origin: {e}")))
    }
}

/// Sampling region for route endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CityConfig {
    /// Display name used in prompts, "City, Country" form.
    pub name: String,
    pub center: [f64; 2],
    pub sigma_m: f64,
    pub r_min_m: f64,
    pub r_max_m: f64,
}

impl Default for CityConfig {
    fn default() -> Self {
        CityConfig {
            name: "Gridtown, Nowhere".into(),
            center: [43.6465, -79.4637],
            sigma_m: 2_000.0,
            r_min_m: 400.0,
            r_max_m: 2_600.0,
        }
    }
}

impl CityConfig {
    pub fn to_spec(&self) -> Result<CitySpec, ConfigError> {
        let center = GeoPoint::new(self.center[0], self.center[1])
            .map_err(|e| ConfigError::Invalid(format!("city.center: {e}")))?;
        let spec = CitySpec {
            name: self.name.clone(),
            center,
            sigma_m: self.sigma_m,
            r_min_m: self.r_min_m,
            r_max_m: self.r_max_m,
        };
        spec.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(spec)
    }
}

/// Dataset generation and splitting knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_routes: usize,
    pub seed: u64,
    pub min_length_m: f64,
    pub max_length_m: f64,
    pub complexity_orientation: ComplexityOrientation,
    pub split_buffer: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let opts = GenOptions::default();
        DatasetConfig {
            n_routes: 300,
            seed: 7,
            min_length_m: opts.min_length_m,
            max_length_m: opts.max_length_m,
            complexity_orientation: opts.orientation,
            split_buffer: opts.split_buffer,
        }
    }
}

impl DatasetConfig {
    pub fn gen_options(&self) -> GenOptions {
        GenOptions {
            min_length_m: self.min_length_m,
            max_length_m: self.max_length_m,
            orientation: self.complexity_orientation,
            split_buffer: self.split_buffer,
        }
    }
}

/// Evaluation-stage knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub trials: usize,
    pub return_tol_m: f64,
    pub inversion_threshold: f64,
    pub unparseable_threshold: f64,
    pub min_net_displacement_m: f64,
    pub assume_north_when_relative: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        let p = EvalParams::default();
        EvaluationConfig {
            trials: p.trials,
            return_tol_m: p.return_tol_m,
            inversion_threshold: p.inversion_threshold,
            unparseable_threshold: p.unparseable_threshold,
            min_net_displacement_m: p.min_net_displacement_m,
            assume_north_when_relative: p.assume_north_when_relative,
        }
    }
}

/// Model client settings; `endpoint = "replay"` scores recorded responses
/// instead of calling anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientConfig {
    pub endpoint: String,
    /// Environment variable holding the API key for live endpoints.
    pub api_key_env: String,
    pub temperature: f64,
    pub request_logprobs: bool,
    pub max_retries: u32,
    pub timeout_s: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            endpoint: "replay".into(),
            api_key_env: "ROUTEBACK_API_KEY".into(),
            temperature: 0.0,
            request_logprobs: true,
            max_retries: 3,
            timeout_s: 60,
        }
    }
}

/// The whole run configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: Version,
    pub graph: GraphConfig,
    pub city: CityConfig,
    pub dataset: DatasetConfig,
    pub language: TurnBands,
    pub metrics: MetricParams,
    pub weights: SimilarityWeights,
    pub evaluation: EvaluationConfig,
    pub client: ClientConfig,
}

/// Wrapper so an omitted `version` key means "current".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Version(pub u32);

impl Default for Version {
    fn default() -> Self {
        Version(CONFIG_VERSION)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        if cfg.version.0 != CONFIG_VERSION {
            return Err(ConfigError::Version {
                got: cfg.version.0,
                want: CONFIG_VERSION,
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<RunConfig, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.graph.origin_point()?;
        if self.graph.is_grid() {
            if self.graph.rows < 2 || self.graph.cols < 2 {
                return Err(ConfigError::Invalid(
                    "graph grid needs at least 2 rows and 2 cols".into(),
                ));
            }
            if !(self.graph.spacing_m > 0.0) {
                return Err(ConfigError::Invalid("graph.spacing_m must be positive".into()));
            }
            if self.graph.jitter_m < 0.0 || self.graph.jitter_m >= self.graph.spacing_m / 4.0 {
                return Err(ConfigError::Invalid(
                    "graph.jitter_m must be in [0, spacing_m / 4)".into(),
                ));
            }
        } else if !matches!(self.format_name(), "jsonl" | "geojson") {
            return Err(ConfigError::Invalid(format!(
                "graph.format must be \"jsonl\" or \"geojson\", got {:?}",
                self.graph.format
            )));
        }
        self.city.to_spec()?;
        if !(0.0 < self.dataset.min_length_m && self.dataset.min_length_m < self.dataset.max_length_m)
        {
            return Err(ConfigError::Invalid(
                "dataset needs 0 < min_length_m < max_length_m".into(),
            ));
        }
        if self.dataset.split_buffer < 0.0 || self.dataset.split_buffer >= 100.0 / 6.0 {
            return Err(ConfigError::Invalid(
                "dataset.split_buffer must be in [0, 16.66)".into(),
            ));
        }
        let b = &self.language;
        if !(0.0 < b.straight_below
            && b.straight_below < b.slight_below
            && b.slight_below < b.turn_below
            && b.turn_below < b.sharp_upto
            && b.sharp_upto <= 180.0)
        {
            return Err(ConfigError::Invalid(
                "language bands must satisfy 0 < straight < slight < turn < sharp <= 180".into(),
            ));
        }
        for (name, v) in [
            ("densify_step_m", self.metrics.densify_step_m),
            ("edit_match_tol_m", self.metrics.edit_match_tol_m),
            ("jaccard_buffer_m", self.metrics.jaccard_buffer_m),
            ("jaccard_cell_m", self.metrics.jaccard_cell_m),
            ("lambda_hausdorff_m", self.metrics.lambda_hausdorff_m),
            ("lambda_frechet_m", self.metrics.lambda_frechet_m),
            ("lambda_coord_offset_m", self.metrics.lambda_coord_offset_m),
        ] {
            if !(v > 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "metrics.{name} must be positive"
                )));
            }
        }
        self.weights
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.evaluation.trials < 2 {
            return Err(ConfigError::Invalid(
                "evaluation.trials must be at least 2".into(),
            ));
        }
        if !(self.evaluation.return_tol_m > 0.0) {
            return Err(ConfigError::Invalid(
                "evaluation.return_tol_m must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.evaluation.inversion_threshold)
            || !(0.0..=1.0).contains(&self.evaluation.unparseable_threshold)
        {
            return Err(ConfigError::Invalid(
                "evaluation thresholds must be within [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn format_name(&self) -> &str {
        self.graph.format.as_str()
    }

    /// The evaluation parameter bundle this config describes.
    pub fn eval_params(&self) -> EvalParams {
        EvalParams {
            trials: self.evaluation.trials,
            metric: self.metrics.clone(),
            weights: self.weights,
            return_tol_m: self.evaluation.return_tol_m,
            inversion_threshold: self.evaluation.inversion_threshold,
            unparseable_threshold: self.evaluation.unparseable_threshold,
            min_net_displacement_m: self.evaluation.min_net_displacement_m,
            assume_north_when_relative: self.evaluation.assume_north_when_relative,
        }
    }
}
