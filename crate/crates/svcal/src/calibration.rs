//! Per-group threshold calibration at a common FAR target, single-vs-adaptive
//! comparison, EET-based grade grouping, and the context-adaptive
//! verification decision.

use std::collections::BTreeMap;

use serde::ser::{SerializeSeq, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scoring::{self, ScoreSet};

/// Identifies one calibration group, e.g. `gender=male` or `age_group=kids_1_5`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GroupKey {
    pub dimension: String,
    pub value: String,
}

impl GroupKey {
    pub fn new(dimension: impl Into<String>, value: impl Into<String>) -> Result<Self> {
        let dimension = dimension.into();
        let value = value.into();
        if dimension.is_empty() || value.is_empty() {
            return Err(Error::Data("group key dimension and value must be nonempty".into()));
        }
        Ok(Self { dimension, value })
    }

    pub fn gender(value: impl Into<String>) -> Self {
        Self::new("gender", value).expect("nonempty gender tag")
    }
}

impl std::fmt::Display for GroupKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}={}", self.dimension, self.value)
    }
}

/// Calibration result for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupEntry {
    pub key: GroupKey,
    /// Smallest observed threshold meeting the FAR target for this group.
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
    /// Rates this group sees when forced onto the shared threshold.
    pub far_at_single: f64,
    pub frr_at_single: f64,
}

/// Per-group operating thresholds at a common FAR target plus the single
/// shared threshold (the max over groups, i.e. the strictest one).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupThresholdTable {
    pub far_target: f64,
    pub groups: Vec<GroupEntry>,
    pub single_threshold: f64,
}

// Wire shape: {far_target, groups: [{dimension, value, threshold, far, frr}],
// single_threshold}. The at-single rates are derivable and stay in memory.
impl Serialize for GroupThresholdTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Groups<'a>(&'a [GroupEntry]);
        impl Serialize for Groups<'_> {
            fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
                let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
                for g in self.0 {
                    #[derive(Serialize)]
                    struct Row<'a> {
                        dimension: &'a str,
                        value: &'a str,
                        threshold: f64,
                        far: f64,
                        frr: f64,
                    }
                    seq.serialize_element(&Row {
                        dimension: &g.key.dimension,
                        value: &g.key.value,
                        threshold: g.threshold,
                        far: g.far,
                        frr: g.frr,
                    })?;
                }
                seq.end()
            }
        }
        let mut s = serializer.serialize_struct("GroupThresholdTable", 3)?;
        s.serialize_field("far_target", &self.far_target)?;
        s.serialize_field("groups", &Groups(&self.groups))?;
        s.serialize_field("single_threshold", &self.single_threshold)?;
        s.end()
    }
}

impl GroupThresholdTable {
    pub fn entry(&self, key: &GroupKey) -> Option<&GroupEntry> {
        self.groups.iter().find(|g| &g.key == key)
    }
}

/// Single-vs-adaptive FRR comparison for one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupComparison {
    pub key: GroupKey,
    pub threshold: f64,
    pub far_adaptive: f64,
    pub frr_adaptive: f64,
    pub frr_single: f64,
    /// Percent FRR increase when the shared threshold replaces the adaptive
    /// one; `None` when the adaptive FRR is zero and the rates differ.
    pub frr_increase_pct: Option<f64>,
    /// Percent FRR reduction gained by switching to the adaptive threshold;
    /// `None` when the shared-threshold FRR is zero and the rates differ.
    pub frr_reduction_pct: Option<f64>,
}

/// Full single-vs-adaptive report for a calibrated table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub table: GroupThresholdTable,
    pub comparisons: Vec<GroupComparison>,
}

/// Smallest candidate threshold whose FAR does not exceed `far_target`.
///
/// Candidates are the distinct nontarget scores plus one supremum value
/// above the largest, so minimality is decidable by exhaustive scan.
pub fn threshold_for_far(scores: &ScoreSet, far_target: f64) -> Result<f64> {
    if !(far_target > 0.0 && far_target <= 1.0) {
        return Err(Error::Config(format!("far_target must be in (0, 1], got {far_target}")));
    }
    if scores.nontarget().is_empty() {
        return Err(Error::Data("threshold_for_far: no nontarget scores".into()));
    }
    for &candidate in scores.nontarget() {
        if scoring::far_at(scores, candidate)? <= far_target {
            return Ok(candidate);
        }
    }
    Ok(scores.nontarget().last().unwrap() + 1.0)
}

/// Calibrates one threshold per group at the shared FAR target and records
/// each group's rates at both its own threshold and the single (max)
/// threshold.
pub fn calibrate_groups(
    grouped: &BTreeMap<GroupKey, ScoreSet>,
    far_target: f64,
) -> Result<GroupThresholdTable> {
    if grouped.is_empty() {
        return Err(Error::Data("calibrate_groups: no groups given".into()));
    }
    for (key, scores) in grouped {
        if scores.target().is_empty() {
            return Err(Error::Data(format!("group '{key}' has no target scores")));
        }
        if scores.nontarget().is_empty() {
            return Err(Error::Data(format!("group '{key}' has no nontarget scores")));
        }
    }

    let mut groups = Vec::with_capacity(grouped.len());
    for (key, scores) in grouped {
        let threshold = threshold_for_far(scores, far_target)?;
        groups.push(GroupEntry {
            key: key.clone(),
            threshold,
            far: scoring::far_at(scores, threshold)?,
            frr: scoring::frr_at(scores, threshold)?,
            far_at_single: f64::NAN,
            frr_at_single: f64::NAN,
        });
    }
    let single_threshold = groups
        .iter()
        .map(|g| g.threshold)
        .fold(f64::NEG_INFINITY, f64::max);
    for entry in &mut groups {
        let scores = &grouped[&entry.key];
        entry.far_at_single = scoring::far_at(scores, single_threshold)?;
        entry.frr_at_single = scoring::frr_at(scores, single_threshold)?;
    }
    Ok(GroupThresholdTable {
        far_target,
        groups,
        single_threshold,
    })
}

fn pct_change(base: f64, other: f64, relative_to: f64) -> Option<f64> {
    if base == other {
        return Some(0.0);
    }
    if relative_to == 0.0 {
        return None;
    }
    Some(100.0 * (other - base) / relative_to)
}

/// Expands a calibrated table into the single-vs-adaptive comparison the
/// threshold analysis reports.
pub fn compare_single_vs_adaptive(table: &GroupThresholdTable) -> Result<CalibrationReport> {
    let mut comparisons = Vec::with_capacity(table.groups.len());
    for g in &table.groups {
        if g.far > table.far_target {
            return Err(Error::Internal(format!(
                "group '{}' misses the FAR target at its own threshold ({} > {})",
                g.key, g.far, table.far_target
            )));
        }
        if g.frr_at_single + 1e-15 < g.frr {
            return Err(Error::Internal(format!(
                "group '{}' FRR decreased at the higher shared threshold",
                g.key
            )));
        }
        comparisons.push(GroupComparison {
            key: g.key.clone(),
            threshold: g.threshold,
            far_adaptive: g.far,
            frr_adaptive: g.frr,
            frr_single: g.frr_at_single,
            frr_increase_pct: pct_change(g.frr, g.frr_at_single, g.frr),
            frr_reduction_pct: pct_change(g.frr_at_single, g.frr, g.frr_at_single)
                .map(|p| -p),
        });
    }
    Ok(CalibrationReport {
        table: table.clone(),
        comparisons,
    })
}

/// Contiguous grade group with its EER-threshold span.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradeGroup {
    pub first_grade: u32,
    pub last_grade: u32,
    pub eet_min: f64,
    pub eet_max: f64,
}

/// Result of EET-based grade grouping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EetGrouping {
    pub tolerance: f64,
    /// EER threshold per grade, ascending by grade.
    pub per_grade_eet: Vec<(u32, f64)>,
    pub groups: Vec<GradeGroup>,
}

/// Groups contiguous grades whose EER thresholds stay within `tolerance`
/// of each other (greedy left-to-right merge).
pub fn group_by_eet(per_grade_scores: &BTreeMap<u32, ScoreSet>, tolerance: f64) -> Result<EetGrouping> {
    if per_grade_scores.is_empty() {
        return Err(Error::Data("group_by_eet: no grades given".into()));
    }
    if tolerance < 0.0 {
        return Err(Error::Config("EET tolerance must be nonnegative".into()));
    }
    let mut per_grade_eet = Vec::with_capacity(per_grade_scores.len());
    for (&grade, scores) in per_grade_scores {
        let (_, eet) = scoring::eer(scores)
            .map_err(|e| Error::Data(format!("grade {grade}: {e}")))?;
        per_grade_eet.push((grade, eet));
    }

    let mut groups: Vec<GradeGroup> = Vec::new();
    for &(grade, eet) in &per_grade_eet {
        match groups.last_mut() {
            Some(g) if g.eet_max.max(eet) - g.eet_min.min(eet) <= tolerance => {
                g.last_grade = grade;
                g.eet_min = g.eet_min.min(eet);
                g.eet_max = g.eet_max.max(eet);
            }
            _ => groups.push(GradeGroup {
                first_grade: grade,
                last_grade: grade,
                eet_min: eet,
                eet_max: eet,
            }),
        }
    }
    Ok(EetGrouping {
        tolerance,
        per_grade_eet,
        groups,
    })
}

/// Where the decision context came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextSource {
    /// Supplied as prior metadata.
    Prior,
    /// Produced by a group detector.
    Inferred,
    /// Context missing or not in the table; the single threshold was used.
    Fallback,
}

/// What to do when the context does not resolve to a table row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FallbackPolicy {
    /// Decide at the single (max) threshold.
    #[default]
    SingleThreshold,
    /// Refuse to decide.
    Error,
}

/// Outcome of one context-adaptive verification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub accept: bool,
    pub score: f64,
    pub threshold: f64,
    pub context: Option<GroupKey>,
    pub source: ContextSource,
}

/// Scores the pair with cosine similarity and decides at the threshold of
/// the resolved context group (ties accept).
pub fn verify(
    test_emb: &[f64],
    enrolled_emb: &[f64],
    context: Option<(GroupKey, ContextSource)>,
    table: &GroupThresholdTable,
    fallback: FallbackPolicy,
) -> Result<Decision> {
    let score = scoring::cosine_similarity(test_emb, enrolled_emb)?;
    let (threshold, context, source) = match context {
        Some((key, source)) => match table.entry(&key) {
            Some(entry) => (entry.threshold, Some(key), source),
            None => match fallback {
                FallbackPolicy::SingleThreshold => {
                    (table.single_threshold, Some(key), ContextSource::Fallback)
                }
                FallbackPolicy::Error => {
                    return Err(Error::Data(format!(
                        "context '{key}' not present in threshold table and no fallback configured"
                    )))
                }
            },
        },
        None => match fallback {
            FallbackPolicy::SingleThreshold => {
                (table.single_threshold, None, ContextSource::Fallback)
            }
            FallbackPolicy::Error => {
                return Err(Error::Data(
                    "no context available and no fallback configured".into(),
                ))
            }
        },
    };
    Ok(Decision {
        accept: score >= threshold,
        score,
        threshold,
        context,
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(target: &[f64], nontarget: &[f64]) -> ScoreSet {
        ScoreSet::new(target.to_vec(), nontarget.to_vec()).unwrap()
    }

    /// Nontarget tail placed so FAR hits exactly `far` at `threshold`:
    /// `n*far` scores at or above the threshold, the rest strictly below.
    fn nontargets_with_far_at(threshold: f64, far: f64, n: usize) -> Vec<f64> {
        let at_or_above = (far * n as f64).round() as usize;
        let mut out = Vec::with_capacity(n);
        for i in 0..n - at_or_above {
            out.push(threshold - 0.2 + 0.1 * i as f64 / n as f64);
        }
        for i in 0..at_or_above {
            out.push(threshold + 0.01 * i as f64);
        }
        out
    }

    #[test]
    fn threshold_for_far_counting_example() {
        let nontarget: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let s = ScoreSet::new(vec![0.9], nontarget).unwrap();
        assert_eq!(threshold_for_far(&s, 0.1).unwrap(), 1.0);
    }

    #[test]
    fn threshold_for_far_target_one_takes_min() {
        let s = set(&[0.9], &[0.3, 0.5, 0.7]);
        assert_eq!(threshold_for_far(&s, 1.0).unwrap(), 0.3);
    }

    #[test]
    fn threshold_for_far_rejects_bad_target() {
        let s = set(&[0.9], &[0.1]);
        assert!(threshold_for_far(&s, 0.0).is_err());
        assert!(threshold_for_far(&s, -0.1).is_err());
        assert!(threshold_for_far(&s, 1.5).is_err());
    }

    #[test]
    fn threshold_for_far_matches_exhaustive_scan() {
        let nontarget: Vec<f64> = (0..2000)
            .map(|i| ((i * 7919) % 1999) as f64 / 1999.0)
            .collect();
        let s = ScoreSet::new(vec![0.5], nontarget.clone()).unwrap();
        for target in [0.01, 0.05, 0.1] {
            let got = threshold_for_far(&s, target).unwrap();
            // Oracle: scan every candidate, keep the smallest admissible.
            let mut candidates: Vec<f64> = nontarget.clone();
            candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
            candidates.dedup();
            candidates.push(candidates.last().unwrap() + 1.0);
            let want = candidates
                .into_iter()
                .find(|&c| {
                    nontarget.iter().filter(|&&v| v >= c).count() as f64 / nontarget.len() as f64
                        <= target
                })
                .unwrap();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn calibrate_reproduces_gender_thresholds() {
        // Male FAR hits 0.01 at 0.30, female at 0.34.
        let mut grouped = BTreeMap::new();
        let mut male_nt: Vec<f64> = (0..99).map(|i| 0.29 * i as f64 / 99.0).collect();
        male_nt.push(0.30);
        let mut female_nt: Vec<f64> = (0..99).map(|i| 0.33 * i as f64 / 99.0).collect();
        female_nt.push(0.34);
        grouped.insert(
            GroupKey::gender("male"),
            // The 0.32 target passes at the male threshold but not the
            // shared (female) one.
            ScoreSet::new(vec![0.5, 0.6, 0.32], male_nt).unwrap(),
        );
        grouped.insert(
            GroupKey::gender("female"),
            ScoreSet::new(vec![0.55, 0.65, 0.31], female_nt).unwrap(),
        );
        let table = calibrate_groups(&grouped, 0.01).unwrap();
        let male = table.entry(&GroupKey::gender("male")).unwrap();
        let female = table.entry(&GroupKey::gender("female")).unwrap();
        assert_eq!(male.threshold, 0.30);
        assert_eq!(female.threshold, 0.34);
        assert_eq!(table.single_threshold, 0.34);
        assert_eq!(male.far, 0.01);
        // Male loses the 0.31 target when forced onto the female threshold.
        assert!(male.frr_at_single > male.frr);
    }

    #[test]
    fn calibrate_single_group_degenerates() {
        let mut grouped = BTreeMap::new();
        grouped.insert(
            GroupKey::gender("all"),
            set(&[0.6, 0.7], &[0.1, 0.2, 0.3]),
        );
        let table = calibrate_groups(&grouped, 0.5).unwrap();
        assert_eq!(table.groups.len(), 1);
        assert_eq!(table.single_threshold, table.groups[0].threshold);
        assert_eq!(table.groups[0].frr, table.groups[0].frr_at_single);
    }

    #[test]
    fn calibrate_identical_groups_identical_thresholds() {
        let scores = set(&[0.5, 0.8], &[0.05, 0.1, 0.2, 0.4]);
        let mut grouped = BTreeMap::new();
        grouped.insert(GroupKey::gender("a"), scores.clone());
        grouped.insert(GroupKey::gender("b"), scores);
        let table = calibrate_groups(&grouped, 0.25).unwrap();
        assert_eq!(table.groups[0].threshold, table.groups[1].threshold);
    }

    #[test]
    fn calibrate_names_empty_group() {
        let mut grouped = BTreeMap::new();
        grouped.insert(GroupKey::gender("ok"), set(&[0.9], &[0.1]));
        grouped.insert(
            GroupKey::gender("broken"),
            ScoreSet::new(vec![0.9], vec![]).unwrap(),
        );
        let err = calibrate_groups(&grouped, 0.1).unwrap_err().to_string();
        assert!(err.contains("gender=broken"), "{err}");
    }

    #[test]
    fn comparison_reproduces_reported_increases() {
        // Table 0.013 -> 0.023 at the shared threshold: +76.9%.
        let table = GroupThresholdTable {
            far_target: 0.01,
            groups: vec![
                GroupEntry {
                    key: GroupKey::gender("male"),
                    threshold: 0.30,
                    far: 0.01,
                    frr: 0.013,
                    far_at_single: 0.004,
                    frr_at_single: 0.023,
                },
                GroupEntry {
                    key: GroupKey::gender("female"),
                    threshold: 0.34,
                    far: 0.01,
                    frr: 0.03,
                    far_at_single: 0.01,
                    frr_at_single: 0.03,
                },
            ],
            single_threshold: 0.34,
        };
        let report = compare_single_vs_adaptive(&table).unwrap();
        let male = &report.comparisons[0];
        assert!((male.frr_increase_pct.unwrap() - 76.9).abs() < 0.1);
        assert_eq!(report.comparisons[1].frr_increase_pct, Some(0.0));
    }

    #[test]
    fn comparison_reproduces_kids_reduction() {
        let table = GroupThresholdTable {
            far_target: 0.1,
            groups: vec![GroupEntry {
                key: GroupKey::new("age_group", "grades_8_10").unwrap(),
                threshold: 0.23,
                far: 0.1,
                frr: 0.08,
                far_at_single: 0.001,
                frr_at_single: 0.83,
            }],
            single_threshold: 0.52,
        };
        let report = compare_single_vs_adaptive(&table).unwrap();
        let kids = &report.comparisons[0];
        assert!((kids.frr_reduction_pct.unwrap() - 90.4).abs() < 0.1);
    }

    #[test]
    fn comparison_identical_groups_report_zero_change() {
        let entry = GroupEntry {
            key: GroupKey::gender("x"),
            threshold: 0.4,
            far: 0.05,
            frr: 0.1,
            far_at_single: 0.05,
            frr_at_single: 0.1,
        };
        let table = GroupThresholdTable {
            far_target: 0.05,
            groups: vec![
                entry.clone(),
                GroupEntry {
                    key: GroupKey::gender("y"),
                    ..entry
                },
            ],
            single_threshold: 0.4,
        };
        let report = compare_single_vs_adaptive(&table).unwrap();
        for c in report.comparisons {
            assert_eq!(c.frr_increase_pct, Some(0.0));
            assert_eq!(c.frr_reduction_pct, Some(0.0));
        }
    }

    /// Separated set whose exact EER crossing sits at `eet`.
    fn set_with_eet(eet: f64) -> ScoreSet {
        set(&[eet, eet + 0.1], &[eet - 0.2, eet - 0.1])
    }

    #[test]
    fn eet_grouping_mirrors_grade_structure() {
        let eets = [0.52, 0.51, 0.53, 0.38, 0.39, 0.23, 0.24];
        let mut per_grade = BTreeMap::new();
        for (i, &eet) in eets.iter().enumerate() {
            per_grade.insert(i as u32 + 1, set_with_eet(eet));
        }
        let grouping = group_by_eet(&per_grade, 0.05).unwrap();
        let spans: Vec<(u32, u32)> = grouping
            .groups
            .iter()
            .map(|g| (g.first_grade, g.last_grade))
            .collect();
        assert_eq!(spans, vec![(1, 3), (4, 5), (6, 7)]);
        for g in &grouping.groups {
            assert!(g.eet_max - g.eet_min <= 0.05);
        }
    }

    #[test]
    fn eet_grouping_tolerance_extremes() {
        let mut per_grade = BTreeMap::new();
        for (i, eet) in [0.1, 0.3, 0.5, 0.7].into_iter().enumerate() {
            per_grade.insert(i as u32 + 1, set_with_eet(eet));
        }
        let one = group_by_eet(&per_grade, f64::INFINITY).unwrap();
        assert_eq!(one.groups.len(), 1);
        assert_eq!((one.groups[0].first_grade, one.groups[0].last_grade), (1, 4));

        let split = group_by_eet(&per_grade, 0.0).unwrap();
        assert_eq!(split.groups.len(), 4);
    }

    fn gender_table() -> GroupThresholdTable {
        GroupThresholdTable {
            far_target: 0.01,
            groups: vec![
                GroupEntry {
                    key: GroupKey::gender("male"),
                    threshold: 0.30,
                    far: 0.01,
                    frr: 0.013,
                    far_at_single: 0.004,
                    frr_at_single: 0.023,
                },
                GroupEntry {
                    key: GroupKey::gender("female"),
                    threshold: 0.34,
                    far: 0.01,
                    frr: 0.03,
                    far_at_single: 0.01,
                    frr_at_single: 0.03,
                },
            ],
            single_threshold: 0.34,
        }
    }

    /// Unit vectors at a chosen cosine.
    fn pair_with_score(score: f64) -> (Vec<f64>, Vec<f64>) {
        let angle = score.acos();
        (vec![1.0, 0.0], vec![angle.cos(), angle.sin()])
    }

    #[test]
    fn verify_decision_depends_on_context() {
        let table = gender_table();
        let (a, b) = pair_with_score(0.32);
        let as_male = verify(
            &a,
            &b,
            Some((GroupKey::gender("male"), ContextSource::Prior)),
            &table,
            FallbackPolicy::default(),
        )
        .unwrap();
        assert!(as_male.accept);
        assert_eq!(as_male.threshold, 0.30);
        assert_eq!(as_male.source, ContextSource::Prior);

        let as_female = verify(
            &a,
            &b,
            Some((GroupKey::gender("female"), ContextSource::Inferred)),
            &table,
            FallbackPolicy::default(),
        )
        .unwrap();
        assert!(!as_female.accept);
        assert_eq!(as_female.threshold, 0.34);
    }

    #[test]
    fn verify_tie_accepts() {
        // (1,0) vs (3,4) scores exactly 3/5; threshold set to the same value.
        let mut table = gender_table();
        table.groups[0].threshold = 0.6;
        let d = verify(
            &[1.0, 0.0],
            &[3.0, 4.0],
            Some((GroupKey::gender("male"), ContextSource::Prior)),
            &table,
            FallbackPolicy::default(),
        )
        .unwrap();
        assert_eq!(d.score, 0.6);
        assert!(d.accept);
    }

    #[test]
    fn verify_unknown_group_falls_back_to_single() {
        let table = gender_table();
        let (a, b) = pair_with_score(0.32);
        let d = verify(
            &a,
            &b,
            Some((GroupKey::gender("nonbinary"), ContextSource::Prior)),
            &table,
            FallbackPolicy::SingleThreshold,
        )
        .unwrap();
        assert_eq!(d.threshold, table.single_threshold);
        assert_eq!(d.source, ContextSource::Fallback);
        assert!(!d.accept);

        let err = verify(
            &a,
            &b,
            Some((GroupKey::gender("nonbinary"), ContextSource::Prior)),
            &table,
            FallbackPolicy::Error,
        );
        assert!(err.is_err());
    }

    #[test]
    fn verify_invariant_to_embedding_scale() {
        let table = gender_table();
        let (a, b) = pair_with_score(0.32);
        let scaled: Vec<f64> = a.iter().map(|x| x * 250.0).collect();
        let ctx = Some((GroupKey::gender("male"), ContextSource::Prior));
        let d1 = verify(&a, &b, ctx.clone(), &table, FallbackPolicy::default()).unwrap();
        let d2 = verify(&scaled, &b, ctx, &table, FallbackPolicy::default()).unwrap();
        assert_eq!(d1.accept, d2.accept);
    }

    proptest! {
        #[test]
        fn adaptive_threshold_minimal_and_dominant(
            t1 in proptest::collection::vec(-0.5..1.0f64, 3..40),
            n1 in proptest::collection::vec(-1.0..0.8f64, 3..40),
            t2 in proptest::collection::vec(-0.5..1.0f64, 3..40),
            n2 in proptest::collection::vec(-1.0..0.8f64, 3..40),
            far_target in 0.05..0.9f64,
        ) {
            let mut grouped = BTreeMap::new();
            grouped.insert(GroupKey::gender("a"), ScoreSet::new(t1, n1).unwrap());
            grouped.insert(GroupKey::gender("b"), ScoreSet::new(t2, n2).unwrap());
            let table = calibrate_groups(&grouped, far_target).unwrap();
            for entry in &table.groups {
                prop_assert!(entry.far <= far_target);
                prop_assert!(entry.frr <= entry.frr_at_single);
                prop_assert!(entry.threshold <= table.single_threshold);
                // Minimality: every smaller candidate violates the target.
                let scores = &grouped[&entry.key];
                for &c in scores.nontarget() {
                    if c < entry.threshold {
                        prop_assert!(scoring::far_at(scores, c).unwrap() > far_target);
                    }
                }
            }
        }

        #[test]
        fn eet_groups_partition_contiguously(
            eets in proptest::collection::vec(0.0..1.0f64, 1..12),
            tolerance in 0.0..0.5f64,
        ) {
            let mut per_grade = BTreeMap::new();
            for (i, &eet) in eets.iter().enumerate() {
                per_grade.insert(i as u32 + 1, set_with_eet(eet));
            }
            let grouping = group_by_eet(&per_grade, tolerance).unwrap();
            let mut expect_next = 1;
            for g in &grouping.groups {
                prop_assert_eq!(g.first_grade, expect_next);
                prop_assert!(g.last_grade >= g.first_grade);
                prop_assert!(g.eet_max - g.eet_min <= tolerance + 1e-12);
                expect_next = g.last_grade + 1;
            }
            prop_assert_eq!(expect_next, eets.len() as u32 + 1);
        }
    }
}
