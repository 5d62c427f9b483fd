//! Trial-list and speaker-metadata parsing, and the join that tags trials
//! with calibration groups.

use std::collections::HashMap;

use regex::Regex;

use crate::calibration::GroupKey;
use crate::error::{Error, Result};
use crate::scoring::{TrialLabel, TrialPair};

/// Parses a trial list: one `label enroll_id test_id` per line, label
/// 1=target / 0=nontarget.
pub fn parse_trials(text: &str) -> Result<Vec<TrialPair>> {
    let mut trials = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!(
                "malformed trial at line {line_no}: expected 'label enroll_id test_id', got '{line}'"
            )));
        }
        let label = match fields[0] {
            "1" => TrialLabel::Target,
            "0" => TrialLabel::Nontarget,
            other => {
                return Err(Error::Parse(format!(
                    "invalid label at line {line_no}: '{other}' (expected 0 or 1)"
                )))
            }
        };
        trials.push(TrialPair::new(label, fields[1], fields[2]));
    }
    Ok(trials)
}

/// Speaker metadata: group assignments per dimension, parsed from CSV with
/// a `speaker_id,<dimension>,...` header.
#[derive(Debug, Clone, Default)]
pub struct SpeakerMetadata {
    pub dimensions: Vec<String>,
    groups: HashMap<String, Vec<GroupKey>>,
}

impl SpeakerMetadata {
    pub fn group_of(&self, speaker_id: &str, dimension: &str) -> Option<&GroupKey> {
        self.groups
            .get(speaker_id)?
            .iter()
            .find(|k| k.dimension == dimension)
    }

    pub fn speakers(&self) -> usize {
        self.groups.len()
    }
}

/// Parses the metadata CSV. Every column after `speaker_id` becomes a group
/// dimension.
pub fn parse_metadata(csv: &str) -> Result<SpeakerMetadata> {
    let mut lines = csv.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("metadata csv is empty".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 2 || columns[0] != "speaker_id" {
        return Err(Error::Parse(format!(
            "metadata header must be 'speaker_id,<dimension>,...', got '{header}'"
        )));
    }
    let dimensions: Vec<String> = columns[1..].iter().map(|c| c.to_string()).collect();

    let mut groups = HashMap::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::Parse(format!(
                "metadata line {line_no} has {} fields, header has {}",
                fields.len(),
                columns.len()
            )));
        }
        let speaker = fields[0].to_string();
        if speaker.is_empty() {
            return Err(Error::Parse(format!("empty speaker id at metadata line {line_no}")));
        }
        let keys = dimensions
            .iter()
            .zip(&fields[1..])
            .map(|(dim, value)| {
                GroupKey::new(dim.clone(), value.to_string()).map_err(|_| {
                    Error::Parse(format!("empty {dim} value at metadata line {line_no}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if groups.insert(speaker.clone(), keys).is_some() {
            return Err(Error::Parse(format!(
                "duplicate speaker '{speaker}' at metadata line {line_no}"
            )));
        }
    }
    Ok(SpeakerMetadata { dimensions, groups })
}

/// How utterance ids map to speaker ids.
#[derive(Debug, Clone)]
pub enum SpeakerIdRule {
    /// Substring before the first '/'; ids without '/' are their own
    /// speaker id.
    PathPrefix,
    /// First capture group (or whole match) of a regex.
    Pattern(Regex),
}

impl Default for SpeakerIdRule {
    fn default() -> Self {
        SpeakerIdRule::PathPrefix
    }
}

impl SpeakerIdRule {
    pub fn from_regex(pattern: &str) -> Result<Self> {
        Ok(SpeakerIdRule::Pattern(Regex::new(pattern).map_err(|e| {
            Error::Config(format!("invalid speaker-id regex: {e}"))
        })?))
    }

    pub fn speaker_of<'a>(&self, utterance_id: &'a str) -> Result<&'a str> {
        match self {
            SpeakerIdRule::PathPrefix => {
                Ok(utterance_id.split('/').next().unwrap_or(utterance_id))
            }
            SpeakerIdRule::Pattern(re) => {
                let caps = re.captures(utterance_id).ok_or_else(|| {
                    Error::Data(format!(
                        "speaker-id pattern does not match utterance '{utterance_id}'"
                    ))
                })?;
                Ok(caps
                    .get(1)
                    .or_else(|| caps.get(0))
                    .map(|m| m.as_str())
                    .unwrap_or(utterance_id))
            }
        }
    }
}

/// What to do when a trial's speaker is missing from the metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownSpeaker {
    /// Drop the trial.
    Skip,
    #[default]
    Fail,
}

/// Tags each trial with the enrollment speaker's group along `dimension`.
///
/// Returns the tagged trials (minus skipped ones when `Skip` is selected).
pub fn assign_groups(
    trials: &[TrialPair],
    metadata: &SpeakerMetadata,
    dimension: &str,
    rule: &SpeakerIdRule,
    on_unknown: UnknownSpeaker,
) -> Result<Vec<TrialPair>> {
    if !metadata.dimensions.iter().any(|d| d == dimension) {
        return Err(Error::Data(format!(
            "metadata has no dimension '{dimension}' (available: {})",
            metadata.dimensions.join(", ")
        )));
    }
    let mut out = Vec::with_capacity(trials.len());
    for trial in trials {
        let speaker = rule.speaker_of(&trial.enroll_id)?;
        match metadata.group_of(speaker, dimension) {
            Some(key) => out.push(trial.clone().with_group(key.value.clone())),
            None => match on_unknown {
                UnknownSpeaker::Skip => {}
                UnknownSpeaker::Fail => {
                    return Err(Error::Data(format!(
                        "speaker '{speaker}' (utterance '{}') missing from metadata",
                        trial.enroll_id
                    )))
                }
            },
        }
    }
    Ok(out)
}
