//! Run configuration: one TOML document holding every hyperparameter of
//! every stage. Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compression::CompressOptions;
use crate::error::{Error, Result};
use crate::metrics::FoldPattern;
use crate::models::{EncoderSpec, Objective, Task, WsiCnnSpec};
use crate::synthdata::WsiGenConfig;
use crate::training::{ImageTrainConfig, MultitaskConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Tasks trained by `train-encoder`: `all` or a comma-separated list.
    pub tasks: String,
    pub paths: PathsConfig,
    pub data: DataConfig,
    pub encoder: EncoderSpec,
    pub multitask: MultitaskConfig,
    pub compression: CompressOptions,
    pub wsi: WsiCnnSpec,
    pub image_training: ImageTrainConfig,
    pub cv: CvConfig,
    pub evaluate: EvaluateConfig,
    pub ablation: AblationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("runs"),
            tasks: "all".into(),
            paths: PathsConfig::default(),
            data: DataConfig::default(),
            encoder: EncoderSpec::default(),
            multitask: MultitaskConfig::default(),
            compression: CompressOptions::default(),
            wsi: WsiCnnSpec::default(),
            image_training: ImageTrainConfig::default(),
            cv: CvConfig::default(),
            evaluate: EvaluateConfig::default(),
            ablation: AblationConfig::default(),
        }
    }
}

/// Inputs of the individual commands. Relative paths are resolved against
/// the working directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// Directory with `<task>.ppm` / `<task>.csv` patch datasets.
    pub patches: Option<PathBuf>,
    /// Encoder checkpoint (NICP).
    pub checkpoint: Option<PathBuf>,
    /// Directory of `.ppm` images to compress.
    pub images: Option<PathBuf>,
    /// Directory of `.nicw` compressed images.
    pub compressed: Option<PathBuf>,
    /// Image labels CSV (`image_id,target,class,latent_risk`).
    pub labels: Option<PathBuf>,
    /// Cohort CSV (`subject_id,follow_up_months,event`), keyed by image id.
    pub cohort: Option<PathBuf>,
    /// Predictions CSV written by `train-wsi`.
    pub predictions: Option<PathBuf>,
    /// Ablation CSV to analyse with `evaluate`.
    pub ablation: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub patches_per_task: usize,
    pub patch_size: usize,
    pub wsi_count: usize,
    pub wsi: WsiGenConfig,
    pub censor_rate: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            patches_per_task: 2000,
            patch_size: 64,
            wsi_count: 200,
            wsi: WsiGenConfig::default(),
            censor_rate: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvConfig {
    pub folds: usize,
    pub pattern: FoldPattern,
    /// Images (the last ones in id order) kept out of the folds and scored
    /// by the ensemble of all fold models.
    pub holdout: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 4,
            pattern: FoldPattern::TrainVal,
            holdout: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSet {
    /// One held-out prediction per image from the fold rotations.
    OutOfFold,
    /// Ensemble predictions on the holdout images.
    Ensemble,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub level: f64,
    /// Percentile-bootstrap resamples for the Spearman interval; 0 skips it.
    pub bootstrap_resamples: usize,
    pub set: PredictionSet,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            level: 0.95,
            bootstrap_resamples: 10_000,
            set: PredictionSet::OutOfFold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    /// Extra four-task encoders trained with fresh seeds.
    pub repeat_full: usize,
    /// Train only the single-task and four-task encoders.
    pub extremes_only: bool,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            repeat_full: 3,
            extremes_only: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn task_list(&self) -> Result<Vec<Task>> {
        Task::parse_list(&self.tasks)
    }

    pub fn validate(&self) -> Result<()> {
        self.task_list()?;
        self.encoder.validate()?;
        self.wsi.validate()?;
        if self.compression.patch_size != self.encoder.patch_size {
            return Err(Error::Config(format!(
                "compression.patch_size {} differs from encoder.patch_size {}",
                self.compression.patch_size, self.encoder.patch_size
            )));
        }
        if self.wsi.code_size != self.encoder.code_size {
            return Err(Error::Config(format!(
                "wsi.code_size {} differs from encoder.code_size {}",
                self.wsi.code_size, self.encoder.code_size
            )));
        }
        if self.wsi.objective == Objective::Ce && self.wsi.classes != 2 {
            return Err(Error::Config("image labels are binary: wsi.classes must be 2".into()));
        }
        if !(0.0..1.0).contains(&self.data.censor_rate) {
            return Err(Error::Config("data.censor_rate must be in [0, 1)".into()));
        }
        if !(self.evaluate.level > 0.0 && self.evaluate.level < 1.0) {
            return Err(Error::Config("evaluate.level must be in (0, 1)".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// `out_dir/<command>-<digest prefix>`, created with the config archived
    /// inside as `config.toml`.
    pub fn prepare_run_dir(&self, command: &str) -> Result<PathBuf> {
        let dir = self.out_dir.join(format!("{command}-{}", &self.digest()[..12]));
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("config.toml"), self.to_toml())?;
        Ok(dir)
    }

    /// The path in `paths.<key>`, which must be set and exist.
    pub fn require_path(&self, key: &str) -> Result<&Path> {
        let p = match key {
            "patches" => &self.paths.patches,
            "checkpoint" => &self.paths.checkpoint,
            "images" => &self.paths.images,
            "compressed" => &self.paths.compressed,
            "labels" => &self.paths.labels,
            "cohort" => &self.paths.cohort,
            "predictions" => &self.paths.predictions,
            "ablation" => &self.paths.ablation,
            _ => return Err(Error::Config(format!("unknown path key {key}"))),
        };
        let p = p
            .as_deref()
            .ok_or_else(|| Error::Config(format!("paths.{key} is required for this command")))?;
        if !p.exists() {
            return Err(Error::Config(format!("paths.{key} = {} does not exist", p.display())));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["bogus = 1", "[encoder]\nfilterz = 3", "[wsi]\nobjective = \"huber\""] {
            assert!(matches!(RunConfig::from_toml(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg = RunConfig::from_toml(
            "seed = 7\ntasks = \"colorectal\"\n[encoder]\ncode_size = 16\n[wsi]\ncode_size = 16\nobjective = \"cox\"",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.task_list().unwrap(), vec![Task::Colorectal]);
        assert_eq!(cfg.encoder.code_size, 16);
        assert_eq!(cfg.encoder.filters, EncoderSpec::default().filters);
        assert_eq!(cfg.wsi.objective, Objective::Cox);
    }

    #[test]
    fn mismatched_sizes_are_config_errors() {
        assert!(matches!(
            RunConfig::from_toml("[encoder]\ncode_size = 16"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::from_toml("[compression]\npatch_size = 32"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn missing_path_is_a_config_error() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.require_path("patches"), Err(Error::Config(_))));
        cfg.paths.patches = Some("/definitely/not/here".into());
        assert!(matches!(cfg.require_path("patches"), Err(Error::Config(_))));
    }
}
