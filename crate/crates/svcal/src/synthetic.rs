//! Deterministic synthetic embedding cohorts for demos, calibration
//! experiments, and detector training in place of corpus ingestion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detector::LabeledEmbeddingSet;
use crate::error::{Error, Result};
use crate::model::Embedding;
use crate::scoring::{TrialLabel, TrialPair};
use crate::store::EmbeddingStore;

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    for x in &mut v {
        *x /= norm;
    }
    v
}

fn sample_clusters(
    dim: usize,
    n_per_class: usize,
    tags: &[&str],
    separation: f64,
    sigma: f64,
    axis: &[f64],
    rng: &mut ChaCha8Rng,
    split: &str,
) -> Result<LabeledEmbeddingSet> {
    let mut embeddings = Vec::with_capacity(tags.len() * n_per_class);
    let mut labels = Vec::with_capacity(tags.len() * n_per_class);
    for (k, tag) in tags.iter().enumerate() {
        // Alternate along the axis; extra classes move to shifted axes.
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let axis_offset = k / 2;
        for i in 0..n_per_class {
            let mut values: Vec<f64> = (0..dim).map(|_| sigma * gauss(rng)).collect();
            for (d, v) in values.iter_mut().enumerate() {
                let shifted = (d + axis_offset) % dim;
                *v += sign * separation * axis[shifted];
            }
            embeddings.push(Embedding::new(format!("{split}/{tag}/{i}"), values)?);
            labels.push(tag.to_string());
        }
    }
    LabeledEmbeddingSet::new(embeddings, labels, split)
}

/// Labeled Gaussian clusters: class `k` is centered at `+/-separation`
/// along a shared unit direction (alternating sign, shifted axes for more
/// than two classes), with isotropic `sigma` noise.
pub fn gaussian_label_clusters(
    dim: usize,
    n_per_class: usize,
    tags: &[&str],
    separation: f64,
    sigma: f64,
    seed: u64,
    split: &str,
) -> Result<LabeledEmbeddingSet> {
    if dim == 0 || n_per_class == 0 || tags.is_empty() {
        return Err(Error::Config("cluster generator needs dim, counts and tags".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = unit((0..dim).map(|_| gauss(&mut rng)).collect());
    sample_clusters(dim, n_per_class, tags, separation, sigma, &axis, &mut rng, split)
}

/// Train/test cluster pair drawn around the same class centers, so a model
/// fit on the train split is meaningful on the test split.
pub fn gaussian_train_test(
    dim: usize,
    n_train_per_class: usize,
    n_test_per_class: usize,
    tags: &[&str],
    separation: f64,
    sigma: f64,
    seed: u64,
) -> Result<(LabeledEmbeddingSet, LabeledEmbeddingSet)> {
    if dim == 0 || n_train_per_class == 0 || n_test_per_class == 0 || tags.is_empty() {
        return Err(Error::Config("cluster generator needs dim, counts and tags".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = unit((0..dim).map(|_| gauss(&mut rng)).collect());
    let train = sample_clusters(dim, n_train_per_class, tags, separation, sigma, &axis, &mut rng, "train")?;
    let test = sample_clusters(dim, n_test_per_class, tags, separation, sigma, &axis, &mut rng, "test")?;
    Ok((train, test))
}

/// One group of a synthetic verification cohort.
#[derive(Debug, Clone)]
pub struct SyntheticGroupSpec {
    pub tag: String,
    pub speakers: usize,
    pub utterances_per_speaker: usize,
    /// Pulls this group's speaker directions toward a shared axis; higher
    /// values make different-speaker pairs score higher, which pushes the
    /// group's FAR threshold up.
    pub speaker_concentration: f64,
    /// Within-speaker scatter; higher values lower target scores.
    pub within_speaker_noise: f64,
}

/// A generated cohort: embeddings, same-group trials, and the
/// speaker-to-group assignment.
#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub store: EmbeddingStore,
    pub trials: Vec<TrialPair>,
    /// speaker id -> group tag.
    pub speaker_groups: Vec<(String, String)>,
}

/// Generates a multi-group speaker cohort with utterance ids shaped
/// `speaker/utt`, full same-speaker target pairs and same-group
/// different-speaker nontarget pairs.
pub fn speaker_cohort(dim: usize, groups: &[SyntheticGroupSpec], seed: u64) -> Result<SyntheticCohort> {
    if dim == 0 || groups.is_empty() {
        return Err(Error::Config("cohort generator needs a dimension and groups".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = EmbeddingStore::new(dim);
    let mut trials = Vec::new();
    let mut speaker_groups = Vec::new();

    for (gi, group) in groups.iter().enumerate() {
        if group.speakers < 2 || group.utterances_per_speaker < 2 {
            return Err(Error::Config(format!(
                "group '{}' needs >= 2 speakers with >= 2 utterances",
                group.tag
            )));
        }
        let group_axis = unit((0..dim).map(|_| gauss(&mut rng)).collect());
        let mut utt_ids: Vec<Vec<String>> = Vec::with_capacity(group.speakers);
        for s in 0..group.speakers {
            let speaker_id = format!("{}spk{s}", group.tag);
            speaker_groups.push((speaker_id.clone(), group.tag.clone()));
            // Unit random part plus `concentration` times the group axis:
            // different-speaker cosine approaches c^2 / (1 + c^2).
            let mut dir = unit((0..dim).map(|_| gauss(&mut rng)).collect());
            for (d, v) in dir.iter_mut().enumerate() {
                *v += group.speaker_concentration * group_axis[d];
            }
            let dir = unit(dir);
            let mut ids = Vec::with_capacity(group.utterances_per_speaker);
            for u in 0..group.utterances_per_speaker {
                // Perturbation with norm `within_speaker_noise` relative to
                // the unit speaker direction. Values are snapped to the f32
                // grid so EMB1 files reproduce the store exactly.
                let scatter = unit((0..dim).map(|_| gauss(&mut rng)).collect());
                let values: Vec<f64> = dir
                    .iter()
                    .zip(&scatter)
                    .map(|(&m, &n)| (m + group.within_speaker_noise * n) as f32 as f64)
                    .collect();
                let id = format!("{speaker_id}/utt{u}");
                store.insert(Embedding::new(id.clone(), values)?)?;
                ids.push(id);
            }
            utt_ids.push(ids);
        }

        // Same-speaker targets.
        for ids in &utt_ids {
            for i in 0..ids.len() {
                for j in i + 1..ids.len() {
                    trials.push(
                        TrialPair::new(TrialLabel::Target, ids[i].clone(), ids[j].clone())
                            .with_group(group.tag.clone()),
                    );
                }
            }
        }
        // Same-group nontargets: first utterance of each speaker pair.
        for a in 0..utt_ids.len() {
            for b in a + 1..utt_ids.len() {
                trials.push(
                    TrialPair::new(
                        TrialLabel::Nontarget,
                        utt_ids[a][0].clone(),
                        utt_ids[b][(a + gi) % utt_ids[b].len()].clone(),
                    )
                    .with_group(group.tag.clone()),
                );
            }
        }
    }
    Ok(SyntheticCohort {
        store,
        trials,
        speaker_groups,
    })
}

impl SyntheticCohort {
    /// Trial list in the wire format (`label enroll test` per line).
    pub fn trials_text(&self) -> String {
        let mut out = String::new();
        for t in &self.trials {
            let label = match t.label {
                TrialLabel::Target => 1,
                TrialLabel::Nontarget => 0,
            };
            out.push_str(&format!("{label} {} {}\n", t.enroll_id, t.test_id));
        }
        out
    }

    /// Speaker metadata CSV with a header, one `speaker_id,<dimension>` row
    /// per speaker.
    pub fn metadata_csv(&self, dimension: &str) -> String {
        let mut out = format!("speaker_id,{dimension}\n");
        for (speaker, group) in &self.speaker_groups {
            out.push_str(&format!("{speaker},{group}\n"));
        }
        out
    }
}
