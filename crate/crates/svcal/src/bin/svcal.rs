//! Thin command-line front end over the library: one subcommand per
//! pipeline stage.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/configuration error,
//! 3 internal invariant violation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use svcal::calibration::{calibrate_groups, compare_single_vs_adaptive, GroupKey};
use svcal::config::ToolConfig;
use svcal::detector::{detect, detector_forward, train_detector, DetectorConfig, LabeledEmbeddingSet};
use svcal::error::{Error, Result};
use svcal::experiment::{run_experiment, ExperimentSpec};
use svcal::model::{count_macs, count_params, embed, init_params, class_head_params, Embedding, ParameterSet};
use svcal::scoring::{self, DcfParams, ScoreSet};
use svcal::store::{self, EmbeddingStore};
use svcal::trials::{assign_groups, parse_metadata, parse_trials, SpeakerIdRule, UnknownSpeaker};
use svcal::{audio, features, plot, synthetic};

#[derive(Parser)]
#[command(name = "svcal", version, about = "Speaker-verification evaluation and context-adaptive threshold calibration")]
struct Cli {
    /// Seed for any randomized stage (initialization, training, shuffling).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Key=value config file for features and architecture.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for generated files (default: current directory).
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract log-mel features from a WAV file into a NAC1 array file.
    Featurize {
        wav: PathBuf,
        /// Output file name (default: <stem>.features.bin).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Embed WAV files and append them to an EMB1 store.
    Embed {
        /// WAV files; each utterance id is the file stem.
        wavs: Vec<PathBuf>,
        /// NAC1 parameter container (default: seed-initialized weights).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Output store (default: embeddings.bin).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Score a trial list against an embedding store.
    Score(ScoreArgs),
    /// Export the FAR/FRR sweep as CSV (and optionally SVG).
    Sweep {
        #[command(flatten)]
        data: TrialData,
        /// Also write an SVG plot next to the CSV.
        #[arg(long)]
        svg: bool,
    },
    /// Calibrate per-group thresholds at a FAR target.
    Calibrate {
        #[command(flatten)]
        data: TrialData,
        #[arg(long, default_value_t = 0.01)]
        far_target: f64,
    },
    /// Train a group detector on labeled embeddings.
    TrainDetector {
        /// EMB1 store with training embeddings.
        #[arg(long)]
        embeddings: PathBuf,
        /// CSV "utterance_id,label" (with header).
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        learning_rate: f64,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        /// Group dimension the labels describe.
        #[arg(long, default_value = "gender")]
        dimension: String,
        /// Output parameter file (default: detector.bin).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Classify embeddings with a trained detector.
    Detect {
        #[arg(long)]
        embeddings: PathBuf,
        /// Detector parameters from train-detector.
        #[arg(long)]
        params: PathBuf,
    },
    /// Run a full experiment spec and write the report.
    Run {
        /// Experiment spec JSON.
        spec: PathBuf,
    },
    /// Print parameter and MAC counts for the configured architecture.
    ParamCount {
        /// Input length in frames for the MAC count.
        #[arg(long, default_value_t = 198)]
        frames: usize,
    },
    /// Generate a synthetic cohort and check the toolkit end to end.
    Selftest,
}

#[derive(Args)]
struct TrialData {
    /// Trial list: "label enroll_id test_id" per line.
    #[arg(long)]
    trials: PathBuf,
    /// EMB1 embedding store.
    #[arg(long)]
    embeddings: PathBuf,
    /// Speaker metadata CSV for grouping.
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// Metadata column to group by.
    #[arg(long)]
    group_by: Option<String>,
    /// Drop trials whose speaker is missing from the metadata.
    #[arg(long)]
    skip_unknown: bool,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    data: TrialData,
    /// DCF priors to report.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.05, 0.01])]
    p_target: Vec<f64>,
}

fn load_tool_config(cli_config: &Option<PathBuf>) -> Result<ToolConfig> {
    match cli_config {
        Some(path) => ToolConfig::from_file(path),
        None => Ok(ToolConfig::default()),
    }
}

fn load_grouped_scores(data: &TrialData) -> Result<(BTreeMap<String, ScoreSet>, String)> {
    let store = store::read_embeddings_file(&data.embeddings)?;
    let text = std::fs::read_to_string(&data.trials)?;
    let mut list = parse_trials(&text)?;
    let dimension = data.group_by.clone().unwrap_or_else(|| "all".to_string());
    if let Some(meta_path) = &data.metadata {
        let dim = data.group_by.as_deref().ok_or_else(|| {
            Error::Config("--group-by is required when --metadata is given".into())
        })?;
        let metadata = parse_metadata(&std::fs::read_to_string(meta_path)?)?;
        let on_unknown = if data.skip_unknown {
            UnknownSpeaker::Skip
        } else {
            UnknownSpeaker::Fail
        };
        list = assign_groups(&list, &metadata, dim, &SpeakerIdRule::default(), on_unknown)?;
    }
    Ok((scoring::score_trials_grouped(&list, &store, "all")?, dimension))
}

fn utterance_id_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn parse_label_csv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "utterance_id,label" {
                return Err(Error::Parse(format!(
                    "label csv header must be 'utterance_id,label', got '{line}'"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (id, label) = line.split_once(',').ok_or_else(|| {
            Error::Parse(format!("label csv line {} is not 'utterance_id,label'", i + 1))
        })?;
        out.push((id.trim().to_string(), label.trim().to_string()));
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.output_dir)?;
    match cli.command {
        Command::Featurize { wav, output } => {
            let tool = load_tool_config(&cli.config)?;
            let signal = audio::read_wav(&wav)?;
            let id = utterance_id_of(&wav);
            let feats = features::featurize(&signal, &tool.features, &id)?;
            let out = output.unwrap_or_else(|| cli.output_dir.join(format!("{id}.features.bin")));
            store::write_named_arrays_file(
                &out,
                &[(
                    "features".to_string(),
                    vec![feats.n_frames(), feats.n_mels()],
                    feats.data().to_vec(),
                )],
            )?;
            println!(
                "featurized {} -> {} ({} x {} frames, config {:016x})",
                wav.display(),
                out.display(),
                feats.n_frames(),
                feats.n_mels(),
                feats.config_hash()
            );
        }
        Command::Embed { wavs, params, output } => {
            if wavs.is_empty() {
                return Err(Error::Config("embed needs at least one WAV file".into()));
            }
            let tool = load_tool_config(&cli.config)?;
            let model_params = match params {
                Some(path) => {
                    let arrays = store::read_named_arrays_file(&path)?;
                    ParameterSet::from_named_arrays(&tool.model, &arrays)?
                }
                None => init_params(&tool.model, cli.seed)?,
            };
            let mut out_store = EmbeddingStore::new(tool.model.embedding_dim);
            out_store.provenance = Some(format!("seed:{}", cli.seed));
            for wav in &wavs {
                let id = utterance_id_of(wav);
                let signal = audio::read_wav(wav)?;
                let feats = features::featurize(&signal, &tool.features, &id)?;
                out_store.insert(embed(&feats, &model_params, &tool.model)?)?;
                println!("embedded {id}");
            }
            let out = output.unwrap_or_else(|| cli.output_dir.join("embeddings.bin"));
            store::write_embeddings_file(&out, &out_store)?;
            println!("wrote {} embeddings to {}", out_store.len(), out.display());
        }
        Command::Score(args) => {
            let (grouped, _) = load_grouped_scores(&args.data)?;
            for (tag, scores) in &grouped {
                let (eer, threshold) = scoring::eer(scores)?;
                print!(
                    "{tag}: {} target / {} nontarget, EER {:.4} @ {:.4}",
                    scores.target().len(),
                    scores.nontarget().len(),
                    eer,
                    threshold
                );
                for &p in &args.p_target {
                    let dcf = scoring::min_dcf(scores, &DcfParams::new(p)?)?;
                    print!(", minDCF(p={p}) {dcf:.4}");
                }
                println!();
            }
        }
        Command::Sweep { data, svg } => {
            let (grouped, _) = load_grouped_scores(&data)?;
            let mut curves = Vec::new();
            for (tag, scores) in &grouped {
                let curve = scoring::det_sweep(scores)?;
                let path = cli.output_dir.join(format!("det_{tag}.csv"));
                std::fs::write(&path, curve.to_csv())?;
                println!("wrote {}", path.display());
                curves.push((tag.clone(), curve));
            }
            if svg {
                let path = cli.output_dir.join("det.svg");
                std::fs::write(&path, plot::det_plot(&curves)?)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Calibrate { data, far_target } => {
            let (grouped, dimension) = load_grouped_scores(&data)?;
            let keyed: BTreeMap<GroupKey, ScoreSet> = grouped
                .into_iter()
                .map(|(tag, scores)| Ok((GroupKey::new(dimension.clone(), tag)?, scores)))
                .collect::<Result<_>>()?;
            let table = calibrate_groups(&keyed, far_target)?;
            let report = compare_single_vs_adaptive(&table)?;
            let path = cli.output_dir.join("thresholds.json");
            std::fs::write(
                &path,
                serde_json::to_string_pretty(&table)
                    .map_err(|e| Error::Internal(e.to_string()))?,
            )?;
            for c in &report.comparisons {
                println!(
                    "{}: threshold {:.4} (FAR {:.4}, FRR {:.4}); FRR at single {:.4} ({})",
                    c.key,
                    c.threshold,
                    c.far_adaptive,
                    c.frr_adaptive,
                    c.frr_single,
                    c.frr_increase_pct
                        .map_or("n/a".to_string(), |p| format!("+{p:.1}%")),
                );
            }
            println!("single threshold {:.4}; wrote {}", table.single_threshold, path.display());
        }
        Command::TrainDetector {
            embeddings,
            labels,
            epochs,
            learning_rate,
            batch_size,
            dimension,
            output,
        } => {
            let emb_store = store::read_embeddings_file(&embeddings)?;
            let label_rows = parse_label_csv(&std::fs::read_to_string(&labels)?)?;
            let mut embs = Vec::with_capacity(label_rows.len());
            let mut tags = Vec::with_capacity(label_rows.len());
            for (id, label) in &label_rows {
                let values = emb_store
                    .get(id)
                    .ok_or_else(|| Error::Data(format!("labeled utterance '{id}' not in store")))?;
                embs.push(Embedding::new(id.clone(), values.to_vec())?);
                tags.push(label.clone());
            }
            let data = LabeledEmbeddingSet::new(embs, tags, "train")?;
            let config = DetectorConfig {
                input_dim: emb_store.dim(),
                n_classes: data.distinct_labels().len(),
                epochs,
                learning_rate,
                batch_size,
                seed: cli.seed,
                dimension,
                ..DetectorConfig::default()
            };
            let (params, history) = train_detector(&data, &config)?;
            let out = output.unwrap_or_else(|| cli.output_dir.join("detector.bin"));
            let mut arrays: Vec<(String, Vec<usize>, Vec<f64>)> = Vec::new();
            for (i, layer) in params.layers.iter().enumerate() {
                arrays.push((format!("layer{i}.weight"), vec![layer.out_dim, layer.in_dim], layer.weight.clone()));
                arrays.push((format!("layer{i}.bias"), vec![layer.out_dim], layer.bias.clone()));
            }
            store::write_named_arrays_file(&out, &arrays)?;
            let tag_list = params.class_tags.join(",");
            std::fs::write(out.with_extension("labels"), format!("{}\n{tag_list}\n", params.dimension))?;
            println!(
                "trained {} epochs; loss {:.4} -> {:.4}; classes [{tag_list}]; wrote {}",
                history.len(),
                history.first().unwrap_or(&f64::NAN),
                history.last().unwrap_or(&f64::NAN),
                out.display()
            );
        }
        Command::Detect { embeddings, params } => {
            let emb_store = store::read_embeddings_file(&embeddings)?;
            let arrays = store::read_named_arrays_file(&params)?;
            let label_text = std::fs::read_to_string(params.with_extension("labels"))
                .map_err(|_| Error::Data("missing .labels sidecar next to detector params".into()))?;
            let mut lines = label_text.lines();
            let dimension = lines.next().unwrap_or("gender").to_string();
            let class_tags: Vec<String> = lines
                .next()
                .unwrap_or("")
                .split(',')
                .map(|s| s.to_string())
                .collect();
            let mut layers = Vec::new();
            let mut i = 0;
            while let Some((_, shape, weight)) = arrays.iter().find(|(n, _, _)| n == &format!("layer{i}.weight")) {
                let (_, _, bias) = arrays
                    .iter()
                    .find(|(n, _, _)| n == &format!("layer{i}.bias"))
                    .ok_or_else(|| Error::Parse(format!("detector file missing layer{i}.bias")))?;
                layers.push(svcal::model::DenseParams {
                    in_dim: shape[1],
                    out_dim: shape[0],
                    weight: weight.clone(),
                    bias: bias.clone(),
                });
                i += 1;
            }
            if layers.is_empty() {
                return Err(Error::Parse("detector file holds no layers".into()));
            }
            let detector = svcal::detector::DetectorParams {
                layers,
                activation: svcal::detector::Activation::Relu,
                dimension,
                class_tags,
            };
            for (id, values) in emb_store.iter() {
                let emb = Embedding::new(id, values.to_vec())?;
                let key = detect(&emb, &detector)?;
                let probs = detector_forward(&emb, &detector)?;
                let confidence = probs.iter().cloned().fold(f64::MIN, f64::max);
                println!("{id}\t{key}\t{confidence:.4}");
            }
        }
        Command::Run { spec } => {
            let spec = ExperimentSpec::from_file(&spec)?;
            let report = run_experiment(&spec)?;
            let path = cli.output_dir.join("report.json");
            std::fs::write(&path, report.to_json()?)?;
            let mut curves = Vec::new();
            for group in &report.groups {
                let csv_path = cli.output_dir.join(format!("det_{}.csv", group.tag));
                std::fs::write(&csv_path, group.det_curve.to_csv())?;
                curves.push((group.tag.clone(), group.det_curve.clone()));
            }
            std::fs::write(cli.output_dir.join("det.svg"), plot::det_plot(&curves)?)?;
            println!(
                "overall EER {:.4}; {} groups; wrote {}",
                report.overall.eer,
                report.groups.len(),
                path.display()
            );
        }
        Command::ParamCount { frames } => {
            let tool = load_tool_config(&cli.config)?;
            let params = count_params(&tool.model)?;
            let head = class_head_params(&tool.model);
            let macs = count_macs(&tool.model, frames)?;
            println!("embedding network parameters: {params}");
            println!("classification head parameters: {head} (training only)");
            println!("MACs for {frames} input frames: {macs}");
        }
        Command::Selftest => selftest(cli.seed)?,
    }
    Ok(())
}

fn selftest(seed: u64) -> Result<()> {
    use svcal::synthetic::SyntheticGroupSpec;

    print!("emb1 round trip ... ");
    let groups = [
        SyntheticGroupSpec {
            tag: "a".into(),
            speakers: 6,
            utterances_per_speaker: 3,
            speaker_concentration: 0.0,
            within_speaker_noise: 0.3,
        },
        SyntheticGroupSpec {
            tag: "b".into(),
            speakers: 6,
            utterances_per_speaker: 3,
            speaker_concentration: 2.0,
            within_speaker_noise: 0.3,
        },
    ];
    let cohort = synthetic::speaker_cohort(16, &groups, seed)?;
    // The container stores f32, so check identity from the first
    // generation onward: reread and rewrite must be byte-stable.
    let bytes = store::write_embeddings(&cohort.store)?;
    let reread = store::read_embeddings(&bytes)?;
    if store::write_embeddings(&reread)? != bytes || store::read_embeddings(&bytes)? != reread {
        return Err(Error::Internal("EMB1 round trip mismatch".into()));
    }
    println!("ok");

    print!("metric sweep vs recount ... ");
    let scores = scoring::score_trials(&cohort.trials, &cohort.store)?;
    let curve = scoring::det_sweep(&scores)?;
    for p in &curve.points {
        let far = scoring::far_at(&scores, p.threshold)?;
        let frr = scoring::frr_at(&scores, p.threshold)?;
        if far != p.far || frr != p.frr {
            return Err(Error::Internal("sweep/recount mismatch".into()));
        }
    }
    println!("ok ({} points)", curve.points.len());

    print!("calibration dominance ... ");
    let grouped = scoring::score_trials_grouped(&cohort.trials, &cohort.store, "all")?;
    let keyed: BTreeMap<GroupKey, ScoreSet> = grouped
        .into_iter()
        .map(|(tag, s)| Ok((GroupKey::new("group", tag)?, s)))
        .collect::<Result<_>>()?;
    let table = calibrate_groups(&keyed, 0.2)?;
    for g in &table.groups {
        if g.far > 0.2 || g.frr > g.frr_at_single {
            return Err(Error::Internal(format!("calibration invariant broken for {}", g.key)));
        }
    }
    println!("ok (single threshold {:.4})", table.single_threshold);

    print!("parameter count vs allocation ... ");
    let config = svcal::ModelConfig::reduced();
    let params = init_params(&config, seed)?;
    if params.trainable_scalars() != count_params(&config)? {
        return Err(Error::Internal("parameter count mismatch".into()));
    }
    println!("ok ({})", params.trainable_scalars());

    print!("detector training ... ");
    let (train, test) = synthetic::gaussian_train_test(32, 150, 50, &["male", "female"], 2.0, 0.5, seed)?;
    let det_config = DetectorConfig {
        input_dim: 32,
        hidden: vec![16, 16],
        epochs: 8,
        seed,
        ..DetectorConfig::default()
    };
    let (det, history) = train_detector(&train, &det_config)?;
    let mut correct = 0;
    for (emb, label) in test.embeddings().iter().zip(test.labels()) {
        if detect(emb, &det)?.value == *label {
            correct += 1;
        }
    }
    let acc = correct as f64 / test.len() as f64;
    if acc < 0.95 {
        return Err(Error::Internal(format!("detector accuracy {acc} too low")));
    }
    println!("ok (accuracy {acc:.3}, loss {:.4} -> {:.4})", history[0], history[history.len() - 1]);

    println!("selftest passed");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
