//! Trial scoring and verification metrics: cosine scores, FAR/FRR sweeps,
//! EER, and minimum detection cost.
//!
//! Convention used throughout: a trial is accepted iff its score is greater
//! than or equal to the threshold (ties accept). FAR is the fraction of
//! nontarget trials at or above the threshold, FRR the fraction of target
//! trials below it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trial label: same speaker (target) or different speakers (nontarget).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialLabel {
    Target,
    Nontarget,
}

/// One enrollment/test utterance pair with an optional group tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialPair {
    pub label: TrialLabel,
    pub enroll_id: String,
    pub test_id: String,
    pub group: Option<String>,
}

impl TrialPair {
    pub fn new(label: TrialLabel, enroll_id: impl Into<String>, test_id: impl Into<String>) -> Self {
        Self {
            label,
            enroll_id: enroll_id.into(),
            test_id: test_id.into(),
            group: None,
        }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }
}

/// Labeled scores for one trial list (or one group of it), kept sorted
/// ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreSet {
    target: Vec<f64>,
    nontarget: Vec<f64>,
    pub group: Option<String>,
}

impl ScoreSet {
    pub fn new(mut target: Vec<f64>, mut nontarget: Vec<f64>) -> Result<Self> {
        if target.is_empty() && nontarget.is_empty() {
            return Err(Error::Data("score set must contain at least one score".into()));
        }
        if target.iter().chain(nontarget.iter()).any(|s| !s.is_finite()) {
            return Err(Error::Data("score set contains non-finite scores".into()));
        }
        target.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nontarget.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self {
            target,
            nontarget,
            group: None,
        })
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }

    /// Target scores, ascending.
    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Nontarget scores, ascending.
    pub fn nontarget(&self) -> &[f64] {
        &self.nontarget
    }

    pub fn len(&self) -> usize {
        self.target.len() + self.nontarget.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn require_nontarget(&self) -> Result<()> {
        if self.nontarget.is_empty() {
            return Err(Error::Data("score set has no nontarget scores".into()));
        }
        Ok(())
    }

    fn require_target(&self) -> Result<()> {
        if self.target.is_empty() {
            return Err(Error::Data("score set has no target scores".into()));
        }
        Ok(())
    }

    fn require_both(&self) -> Result<()> {
        self.require_target()?;
        self.require_nontarget()
    }

    /// Largest observed score plus a unit step; accepts nothing. Used as the
    /// supremum candidate in sweeps and threshold selection.
    pub fn supremum_threshold(&self) -> f64 {
        let max = self
            .target
            .last()
            .into_iter()
            .chain(self.nontarget.last())
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        max + 1.0
    }
}

/// Detection-cost parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcfParams {
    pub p_target: f64,
    pub c_miss: f64,
    pub c_fa: f64,
    /// Divide by the trivial-system cost `min(c_miss*p, c_fa*(1-p))`.
    pub normalize: bool,
}

impl DcfParams {
    pub fn new(p_target: f64) -> Result<Self> {
        Self::with_costs(p_target, 1.0, 1.0)
    }

    pub fn with_costs(p_target: f64, c_miss: f64, c_fa: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p_target) || p_target == 0.0 {
            return Err(Error::Config(format!("p_target must be in (0,1), got {p_target}")));
        }
        if c_miss <= 0.0 || c_fa <= 0.0 {
            return Err(Error::Config("detection costs must be positive".into()));
        }
        Ok(Self {
            p_target,
            c_miss,
            c_fa,
            normalize: true,
        })
    }
}

/// One operating point of a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// FAR/FRR at every distinct observed score plus a supremum point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetCurve {
    pub points: Vec<DetPoint>,
}

impl DetCurve {
    /// Renders the curve as `threshold,far,frr` CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,far,frr\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.threshold, p.far, p.frr));
        }
        out
    }
}

/// Cosine similarity of two vectors, clamped to [-1, 1].
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Data(format!(
            "cosine: dimension mismatch {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Data("degenerate embedding: zero vector in cosine".into()));
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Resolves utterance ids to embeddings during trial scoring.
pub trait EmbeddingLookup {
    fn embedding(&self, utterance_id: &str) -> Option<&[f64]>;
}

impl EmbeddingLookup for std::collections::HashMap<String, Vec<f64>> {
    fn embedding(&self, utterance_id: &str) -> Option<&[f64]> {
        self.get(utterance_id).map(|v| v.as_slice())
    }
}

fn resolve_all<'a>(
    trials: &'a [TrialPair],
    store: &impl EmbeddingLookup,
) -> Result<Vec<(&'a TrialPair, f64)>> {
    let mut unresolved: Vec<&str> = Vec::new();
    for trial in trials {
        for id in [trial.enroll_id.as_str(), trial.test_id.as_str()] {
            if store.embedding(id).is_none() && !unresolved.contains(&id) {
                unresolved.push(id);
            }
        }
    }
    if !unresolved.is_empty() {
        return Err(Error::Data(format!("unresolved ids: [{}]", unresolved.join(", "))));
    }
    trials
        .iter()
        .map(|t| {
            let a = store.embedding(&t.enroll_id).unwrap();
            let b = store.embedding(&t.test_id).unwrap();
            Ok((t, cosine_similarity(a, b)?))
        })
        .collect()
}

/// Scores every trial with cosine similarity and partitions by label.
pub fn score_trials(trials: &[TrialPair], store: &impl EmbeddingLookup) -> Result<ScoreSet> {
    let scored = resolve_all(trials, store)?;
    let mut target = Vec::new();
    let mut nontarget = Vec::new();
    for (trial, score) in scored {
        match trial.label {
            TrialLabel::Target => target.push(score),
            TrialLabel::Nontarget => nontarget.push(score),
        }
    }
    ScoreSet::new(target, nontarget)
}

/// Scores trials and splits them by group tag. Trials without a tag land
/// under the `fallback_group` name.
pub fn score_trials_grouped(
    trials: &[TrialPair],
    store: &impl EmbeddingLookup,
    fallback_group: &str,
) -> Result<BTreeMap<String, ScoreSet>> {
    let scored = resolve_all(trials, store)?;
    let mut buckets: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (trial, score) in scored {
        let tag = trial.group.clone().unwrap_or_else(|| fallback_group.to_string());
        let bucket = buckets.entry(tag).or_default();
        match trial.label {
            TrialLabel::Target => bucket.0.push(score),
            TrialLabel::Nontarget => bucket.1.push(score),
        }
    }
    buckets
        .into_iter()
        .map(|(tag, (t, n))| Ok((tag.clone(), ScoreSet::new(t, n)?.with_group(tag))))
        .collect()
}

/// False acceptance rate at a threshold (accept iff score >= threshold).
pub fn far_at(scores: &ScoreSet, threshold: f64) -> Result<f64> {
    scores.require_nontarget()?;
    let below = scores.nontarget.partition_point(|&s| s < threshold);
    Ok((scores.nontarget.len() - below) as f64 / scores.nontarget.len() as f64)
}

/// False rejection rate at a threshold.
pub fn frr_at(scores: &ScoreSet, threshold: f64) -> Result<f64> {
    scores.require_target()?;
    let below = scores.target.partition_point(|&s| s < threshold);
    Ok(below as f64 / scores.target.len() as f64)
}

/// Distinct observed scores ascending, plus the supremum threshold.
pub fn sweep_thresholds(scores: &ScoreSet) -> Vec<f64> {
    let mut all: Vec<f64> = scores
        .target
        .iter()
        .chain(scores.nontarget.iter())
        .copied()
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup();
    all.push(scores.supremum_threshold());
    all
}

/// FAR/FRR at every distinct observed score plus the supremum point.
pub fn det_sweep(scores: &ScoreSet) -> Result<DetCurve> {
    scores.require_both()?;
    let points = sweep_thresholds(scores)
        .into_iter()
        .map(|threshold| {
            Ok(DetPoint {
                threshold,
                far: far_at(scores, threshold)?,
                frr: frr_at(scores, threshold)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DetCurve { points })
}

/// Equal error rate and its threshold.
///
/// Sweeps the DET polyline; if a sweep point has FAR == FRR exactly it is
/// returned directly, otherwise the crossing is linearly interpolated
/// between the two bracketing points.
pub fn eer(scores: &ScoreSet) -> Result<(f64, f64)> {
    let curve = det_sweep(scores)?;
    let points = &curve.points;
    for (i, p) in points.iter().enumerate() {
        let diff = p.far - p.frr;
        if diff == 0.0 {
            return Ok((p.far, p.threshold));
        }
        if diff < 0.0 {
            // First point past the crossing; i >= 1 because FRR starts at 0.
            let prev = &points[i - 1];
            let d_prev = prev.far - prev.frr;
            let t = d_prev / (d_prev - diff);
            let rate = prev.far + t * (p.far - prev.far);
            let threshold = prev.threshold + t * (p.threshold - prev.threshold);
            return Ok((rate, threshold));
        }
    }
    Err(Error::Internal("eer: FAR-FRR never crossed zero on the sweep".into()))
}

/// Minimum normalized detection cost over all sweep thresholds.
pub fn min_dcf(scores: &ScoreSet, params: &DcfParams) -> Result<f64> {
    scores.require_both()?;
    let norm = if params.normalize {
        (params.c_miss * params.p_target).min(params.c_fa * (1.0 - params.p_target))
    } else {
        1.0
    };
    let mut best = f64::INFINITY;
    for threshold in sweep_thresholds(scores) {
        let cost = params.c_miss * params.p_target * frr_at(scores, threshold)?
            + params.c_fa * (1.0 - params.p_target) * far_at(scores, threshold)?;
        best = best.min(cost);
    }
    Ok(best / norm)
}

/// Percent increase of `frr_other` relative to `frr_base`.
pub fn frr_increase_pct(frr_base: f64, frr_other: f64) -> Result<f64> {
    if frr_base == 0.0 {
        return Err(Error::Data(
            "undefined relative increase: base FRR is zero".into(),
        ));
    }
    Ok(100.0 * (frr_other - frr_base) / frr_base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn set(target: &[f64], nontarget: &[f64]) -> ScoreSet {
        ScoreSet::new(target.to_vec(), nontarget.to_vec()).unwrap()
    }

    // Brute-force O(n) recounts used as the oracle throughout.
    fn far_brute(nontarget: &[f64], theta: f64) -> f64 {
        nontarget.iter().filter(|&&s| s >= theta).count() as f64 / nontarget.len() as f64
    }

    fn frr_brute(target: &[f64], theta: f64) -> f64 {
        target.iter().filter(|&&s| s < theta).count() as f64 / target.len() as f64
    }

    fn pseudo_scores(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        // Small deterministic LCG; plenty for test fixtures.
        let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        (0..n)
            .map(|_| {
                state = state.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
                lo + (hi - lo) * ((state >> 11) as f64 / (1u64 << 53) as f64)
            })
            .collect()
    }

    #[test]
    fn cosine_identical_direction() {
        assert_eq!(cosine_similarity(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 1.0);
    }

    #[test]
    fn cosine_orthogonal() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn cosine_small_vectors() {
        // 32 / sqrt(14 * 77)
        let got = cosine_similarity(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((got - 0.974632).abs() < 1e-6, "{got}");
    }

    #[test]
    fn cosine_zero_vector_errors() {
        let err = cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]).unwrap_err().to_string();
        assert!(err.contains("degenerate"), "{err}");
    }

    #[test]
    fn far_counting() {
        let s = set(&[0.9], &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(far_at(&s, 0.25).unwrap(), 0.5);
    }

    #[test]
    fn boundary_threshold_accepts_everything() {
        let s = set(&[0.5, 0.7], &[0.1, 0.2]);
        assert_eq!(far_at(&s, 0.1).unwrap(), 1.0);
        assert_eq!(frr_at(&s, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn rates_match_brute_force_recount() {
        let target = pseudo_scores(7, 500, -0.2, 1.0);
        let nontarget = pseudo_scores(11, 500, -0.5, 0.7);
        let s = ScoreSet::new(target.clone(), nontarget.clone()).unwrap();
        for theta in pseudo_scores(13, 100, -0.6, 1.1) {
            assert_eq!(far_at(&s, theta).unwrap(), far_brute(&nontarget, theta));
            assert_eq!(frr_at(&s, theta).unwrap(), frr_brute(&target, theta));
        }
    }

    #[test]
    fn sweep_shape_and_boundaries() {
        let s = set(&[0.8], &[0.2]);
        let curve = det_sweep(&s).unwrap();
        assert_eq!(curve.points.len(), 3);
        // Between 0.2 and 0.8 both error rates are zero.
        let mid = &curve.points[1];
        assert_eq!(mid.threshold, 0.8);
        assert_eq!((mid.far, mid.frr), (0.0, 0.0));
    }

    #[test]
    fn sweep_degenerate_identical_scores() {
        let s = set(&[0.5], &[0.5]);
        assert_eq!(det_sweep(&s).unwrap().points.len(), 2);
    }

    #[test]
    fn sweep_matches_pointwise_recomputation() {
        let s = ScoreSet::new(pseudo_scores(3, 200, 0.0, 1.0), pseudo_scores(5, 300, -0.3, 0.8)).unwrap();
        for p in det_sweep(&s).unwrap().points {
            assert_eq!(p.far, far_at(&s, p.threshold).unwrap());
            assert_eq!(p.frr, frr_at(&s, p.threshold).unwrap());
        }
    }

    #[test]
    fn eer_perfect_separation() {
        let (rate, _) = eer(&set(&[0.9, 0.8], &[0.1, 0.2])).unwrap();
        assert_eq!(rate, 0.0);
    }

    #[test]
    fn eer_identical_distributions_near_half() {
        let scores = pseudo_scores(17, 1000, 0.0, 1.0);
        let s = ScoreSet::new(scores.clone(), scores).unwrap();
        let (rate, _) = eer(&s).unwrap();
        assert!((rate - 0.5).abs() < 0.05, "{rate}");
    }

    #[test]
    fn eer_interpolated_crossing() {
        // Shared score 0.5 makes FAR-FRR step over zero: the bracketing
        // points are (0.5, far 0.25, frr 0) and (0.7, far 0, frr 0.25),
        // interpolating to rate 0.125 at threshold 0.6.
        let s = set(&[0.5, 0.7, 0.8, 0.9], &[0.2, 0.3, 0.4, 0.5]);
        let (rate, threshold) = eer(&s).unwrap();
        assert!((rate - 0.125).abs() < 1e-9, "{rate}");
        assert!((threshold - 0.6).abs() < 1e-9, "{threshold}");
    }

    #[test]
    fn min_dcf_perfect_separation_is_zero() {
        let s = set(&[0.9, 0.95], &[0.1, 0.05]);
        let p = DcfParams::new(0.05).unwrap();
        assert_eq!(min_dcf(&s, &p).unwrap(), 0.0);

        let tiny = set(&[1.0], &[0.0]);
        assert_eq!(min_dcf(&tiny, &p).unwrap(), 0.0);
    }

    #[test]
    fn min_dcf_matches_exhaustive_grid() {
        let s = ScoreSet::new(pseudo_scores(23, 250, 0.0, 1.0), pseudo_scores(29, 250, -0.2, 0.9)).unwrap();
        for p_target in [0.05, 0.01] {
            let params = DcfParams::new(p_target).unwrap();
            let got = min_dcf(&s, &params).unwrap();
            let norm = (params.c_miss * p_target).min(params.c_fa * (1.0 - p_target));
            let want = sweep_thresholds(&s)
                .into_iter()
                .map(|th| {
                    (params.c_miss * p_target * frr_brute(s.target(), th)
                        + params.c_fa * (1.0 - p_target) * far_brute(s.nontarget(), th))
                        / norm
                })
                .fold(f64::INFINITY, f64::min);
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn frr_increase_matches_reported_percentages() {
        assert!((frr_increase_pct(0.013, 0.023).unwrap() - 76.9).abs() < 0.1);
        assert!((frr_increase_pct(0.012, 0.019).unwrap() - 58.3).abs() < 0.1);
        assert!((frr_increase_pct(0.021, 0.034).unwrap() - 61.9).abs() < 0.1);
        assert!(frr_increase_pct(0.0, 0.5).is_err());
    }

    #[test]
    fn score_trials_partitions_by_label() {
        let mut store = HashMap::new();
        store.insert("a".to_string(), vec![1.0, 0.0]);
        store.insert("b".to_string(), vec![0.9, 0.1]);
        store.insert("c".to_string(), vec![0.0, 1.0]);
        let trials = vec![
            TrialPair::new(TrialLabel::Target, "a", "b"),
            TrialPair::new(TrialLabel::Target, "b", "a"),
            TrialPair::new(TrialLabel::Nontarget, "a", "c"),
            TrialPair::new(TrialLabel::Nontarget, "b", "c"),
        ];
        let s = score_trials(&trials, &store).unwrap();
        assert_eq!((s.target().len(), s.nontarget().len()), (2, 2));
    }

    #[test]
    fn score_trials_grouped_preserves_counts() {
        let mut store = HashMap::new();
        for id in ["a", "b", "c", "d"] {
            store.insert(id.to_string(), vec![1.0, id.len() as f64]);
        }
        let trials = vec![
            TrialPair::new(TrialLabel::Target, "a", "b").with_group("male"),
            TrialPair::new(TrialLabel::Nontarget, "a", "c").with_group("male"),
            TrialPair::new(TrialLabel::Target, "c", "d").with_group("female"),
            TrialPair::new(TrialLabel::Nontarget, "b", "d").with_group("female"),
        ];
        let grouped = score_trials_grouped(&trials, &store, "all").unwrap();
        assert_eq!(grouped.len(), 2);
        let total: usize = grouped.values().map(|s| s.len()).sum();
        assert_eq!(total, trials.len());
    }

    #[test]
    fn score_trials_reports_unresolved_ids() {
        let mut store = HashMap::new();
        store.insert("a".to_string(), vec![1.0, 0.0]);
        let trials = vec![TrialPair::new(TrialLabel::Target, "a", "x")];
        let err = score_trials(&trials, &store).unwrap_err().to_string();
        assert!(err.contains("unresolved ids: [x]"), "{err}");
    }

    proptest! {
        #[test]
        fn far_nonincreasing_frr_nondecreasing(
            target in proptest::collection::vec(-1.0..1.0f64, 1..80),
            nontarget in proptest::collection::vec(-1.0..1.0f64, 1..80),
        ) {
            let s = ScoreSet::new(target, nontarget).unwrap();
            let curve = det_sweep(&s).unwrap();
            for w in curve.points.windows(2) {
                prop_assert!(w[1].far <= w[0].far);
                prop_assert!(w[1].frr >= w[0].frr);
                prop_assert!((0.0..=1.0).contains(&w[0].far));
                prop_assert!((0.0..=1.0).contains(&w[0].frr));
            }
        }

        #[test]
        fn eer_threshold_brackets_and_mindcf_bound(
            target in proptest::collection::vec(-1.0..1.0f64, 2..60),
            nontarget in proptest::collection::vec(-1.0..1.0f64, 2..60),
        ) {
            let s = ScoreSet::new(target, nontarget).unwrap();
            let (rate, threshold) = eer(&s).unwrap();
            let sweeps = sweep_thresholds(&s);
            prop_assert!(threshold >= sweeps[0] && threshold <= *sweeps.last().unwrap());
            // Normalized cost at the EER point bounds minDCF from above.
            let params = DcfParams::new(0.05).unwrap();
            let norm = (params.p_target).min(1.0 - params.p_target);
            let eer_cost = (params.p_target * rate + (1.0 - params.p_target) * rate) / norm;
            prop_assert!(min_dcf(&s, &params).unwrap() <= eer_cost + 1e-12);
        }

        #[test]
        fn cosine_scale_invariant_and_symmetric(
            a in proptest::collection::vec(-5.0..5.0f64, 4),
            b in proptest::collection::vec(-5.0..5.0f64, 4),
            c in 0.001..1000.0f64,
        ) {
            prop_assume!(a.iter().any(|x| x.abs() > 1e-6));
            prop_assume!(b.iter().any(|x| x.abs() > 1e-6));
            let base = cosine_similarity(&a, &b).unwrap();
            let scaled: Vec<f64> = a.iter().map(|x| x * c).collect();
            prop_assert!((cosine_similarity(&scaled, &b).unwrap() - base).abs() < 1e-9);
            prop_assert!((cosine_similarity(&b, &a).unwrap() - base).abs() < 1e-12);
        }
    }
}
