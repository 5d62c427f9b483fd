//! End-to-end experiment runner: load or compute embeddings, score trials,
//! sweep, calibrate per group, and emit a reproducible report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::{
    calibrate_groups, compare_single_vs_adaptive, CalibrationReport, GroupKey,
};
use crate::config::ToolConfig;
use crate::error::{Error, Result};
use crate::model::{embed, init_params, ParameterSet};
use crate::scoring::{self, DcfParams, DetCurve, ScoreSet};
use crate::store::{self, EmbeddingStore};
use crate::trials::{self, SpeakerIdRule, UnknownSpeaker};
use crate::{audio, features};

/// Everything needed to run one experiment reproducibly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub trials: PathBuf,
    /// EMB1 store with precomputed embeddings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    /// Directory of WAV files to featurize and embed instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_dir: Option<PathBuf>,
    /// Key=value config file for the front end and architecture (audio
    /// route only); defaults to the reference configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PathBuf>,
    /// NAC1 parameter container (audio route only); freshly initialized
    /// from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<PathBuf>,
    /// Speaker metadata CSV for grouping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<PathBuf>,
    /// Metadata column used for grouping, e.g. "gender".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_dimension: Option<String>,
    pub far_targets: Vec<f64>,
    #[serde(default = "default_p_targets")]
    pub dcf_p_targets: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Regex override for speaker-id extraction (default: path prefix).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_pattern: Option<String>,
    /// Skip trials whose speaker is missing from the metadata instead of
    /// failing.
    #[serde(default)]
    pub skip_unknown_speakers: bool,
}

fn default_p_targets() -> Vec<f64> {
    vec![0.05, 0.01]
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("experiment spec: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut spec = Self::from_json(&text)?;
        // Relative paths resolve against the spec file's directory.
        if let Some(base) = path.parent() {
            for p in [&mut spec.trials]
                .into_iter()
                .chain(spec.embeddings.as_mut())
                .chain(spec.audio_dir.as_mut())
                .chain(spec.config.as_mut())
                .chain(spec.params.as_mut())
                .chain(spec.metadata.as_mut())
            {
                if p.is_relative() {
                    *p = base.join(&p);
                }
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.far_targets.is_empty() {
            return Err(Error::Config("at least one far_target is required".into()));
        }
        for &t in &self.far_targets {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("far_target {t} outside (0, 1]")));
            }
        }
        if self.embeddings.is_none() && self.audio_dir.is_none() {
            return Err(Error::Config("spec needs either embeddings or audio_dir".into()));
        }
        if self.metadata.is_some() != self.group_dimension.is_some() {
            return Err(Error::Config(
                "metadata and group_dimension must be given together".into(),
            ));
        }
        Ok(())
    }
}

/// EER and minDCF for one score set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBlock {
    pub n_target: usize,
    pub n_nontarget: usize,
    pub eer: f64,
    pub eer_threshold: f64,
    pub min_dcf: Vec<MinDcfEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinDcfEntry {
    pub p_target: f64,
    pub value: f64,
}

/// Per-group slice of the report, with the raw scores embedded so every
/// number is recomputable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupBlock {
    pub tag: String,
    pub metrics: MetricsBlock,
    pub scores: ScoreSet,
    pub det_curve: DetCurve,
}

/// Complete experiment output. Serialization is stable, so identical specs
/// and seeds produce byte-identical JSON.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub seed: u64,
    pub embedding_provenance: Option<String>,
    pub group_dimension: Option<String>,
    pub n_trials: usize,
    pub overall: MetricsBlock,
    pub groups: Vec<GroupBlock>,
    pub calibrations: Vec<CalibrationReport>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("report serialization: {e}")))
    }
}

fn metrics_for(scores: &ScoreSet, p_targets: &[f64]) -> Result<MetricsBlock> {
    let (eer, eer_threshold) = scoring::eer(scores)?;
    let min_dcf = p_targets
        .iter()
        .map(|&p| {
            Ok(MinDcfEntry {
                p_target: p,
                value: scoring::min_dcf(scores, &DcfParams::new(p)?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsBlock {
        n_target: scores.target().len(),
        n_nontarget: scores.nontarget().len(),
        eer,
        eer_threshold,
        min_dcf,
    })
}

fn stage<T>(name: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::Internal(msg) => Error::Internal(format!("stage {name}: {msg}")),
        Error::Io(e) => Error::Data(format!("stage {name}: io error: {e}")),
        Error::Config(msg) => Error::Config(format!("stage {name}: {msg}")),
        Error::Data(msg) => Error::Data(format!("stage {name}: {msg}")),
        Error::Parse(msg) => Error::Parse(format!("stage {name}: {msg}")),
    })
}

fn embed_audio_dir(spec: &ExperimentSpec, dir: &Path) -> Result<EmbeddingStore> {
    let tool = match &spec.config {
        Some(path) => ToolConfig::from_file(path)?,
        None => ToolConfig::default(),
    };
    let params: ParameterSet = match &spec.params {
        Some(path) => {
            let arrays = store::read_named_arrays_file(path)?;
            ParameterSet::from_named_arrays(&tool.model, &arrays)?
        }
        None => init_params(&tool.model, spec.seed)?,
    };

    let mut wavs: Vec<PathBuf> = Vec::new();
    let mut walk = vec![dir.to_path_buf()];
    while let Some(d) = walk.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                walk.push(path);
            } else if path.extension().map_or(false, |e| e == "wav") {
                wavs.push(path);
            }
        }
    }
    wavs.sort();
    if wavs.is_empty() {
        return Err(Error::Data(format!("no .wav files under {}", dir.display())));
    }

    let mut out = EmbeddingStore::new(tool.model.embedding_dim);
    out.provenance = Some(format!("features:{:016x}", tool.features.hash()));
    for path in wavs {
        let id = path
            .strip_prefix(dir)
            .unwrap_or(&path)
            .with_extension("")
            .to_string_lossy()
            .replace(std::path::MAIN_SEPARATOR, "/");
        let signal = audio::read_wav(&path)?;
        let feats = features::featurize(&signal, &tool.features, &id)?;
        out.insert(embed(&feats, &params, &tool.model)?)?;
    }
    Ok(out)
}

/// Runs the full pipeline described by `spec`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report> {
    spec.validate()?;

    let store = stage(
        "embeddings",
        match (&spec.embeddings, &spec.audio_dir) {
            (Some(path), _) => store::read_embeddings_file(path),
            (None, Some(dir)) => embed_audio_dir(spec, dir),
            (None, None) => unreachable!("validated above"),
        },
    )?;

    let trial_text = stage("trials", std::fs::read_to_string(&spec.trials).map_err(Error::Io))?;
    let mut trial_list = stage("trials", trials::parse_trials(&trial_text))?;

    if let (Some(meta_path), Some(dimension)) = (&spec.metadata, &spec.group_dimension) {
        let meta_text = stage("metadata", std::fs::read_to_string(meta_path).map_err(Error::Io))?;
        let metadata = stage("metadata", trials::parse_metadata(&meta_text))?;
        let rule = match &spec.speaker_pattern {
            Some(p) => SpeakerIdRule::from_regex(p)?,
            None => SpeakerIdRule::default(),
        };
        let on_unknown = if spec.skip_unknown_speakers {
            UnknownSpeaker::Skip
        } else {
            UnknownSpeaker::Fail
        };
        trial_list = stage(
            "metadata",
            trials::assign_groups(&trial_list, &metadata, dimension, &rule, on_unknown),
        )?;
    }

    let overall_scores = stage("score", scoring::score_trials(&trial_list, &store))?;
    let overall = stage("metrics", metrics_for(&overall_scores, &spec.dcf_p_targets))?;

    let grouped = stage(
        "score",
        scoring::score_trials_grouped(&trial_list, &store, "all"),
    )?;
    let mut groups = Vec::with_capacity(grouped.len());
    for (tag, scores) in &grouped {
        groups.push(GroupBlock {
            tag: tag.clone(),
            metrics: stage("metrics", metrics_for(scores, &spec.dcf_p_targets))?,
            det_curve: stage("sweep", scoring::det_sweep(scores))?,
            scores: scores.clone(),
        });
    }

    let dimension = spec.group_dimension.clone().unwrap_or_else(|| "all".to_string());
    let keyed: BTreeMap<GroupKey, ScoreSet> = grouped
        .iter()
        .map(|(tag, scores)| Ok((GroupKey::new(dimension.clone(), tag.clone())?, scores.clone())))
        .collect::<Result<_>>()?;
    let mut calibrations = Vec::with_capacity(spec.far_targets.len());
    for &far_target in &spec.far_targets {
        let table = stage("calibrate", calibrate_groups(&keyed, far_target))?;
        calibrations.push(stage("calibrate", compare_single_vs_adaptive(&table))?);
    }

    Ok(Report {
        seed: spec.seed,
        embedding_provenance: store.provenance.clone(),
        group_dimension: spec.group_dimension.clone(),
        n_trials: trial_list.len(),
        overall,
        groups,
        calibrations,
    })
}
