use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rqp_core::eval::{
    curve_dump, evaluate, make_labels, run_ablation, train_regressor, AblationConfig, Dataset, ErrorReport,
    NetPredictor, OraclePredictor, RatePredictor, DEFAULT_TEST_FRACTION,
};
use rqp_core::features::{extract, ChannelSet};
use rqp_core::ingest::{load_corpus, load_item, save_frame, synth_corpus, write_corpus, CorpusItem};
use rqp_core::model::{residual_sum_squares, ModelForm, ModelKind};
use rqp_core::nn::TrainConfig;
use rqp_core::{Error, Result};

/// Referenceless R-QP modelling: corpus generation, feature extraction,
/// label fitting, training and evaluation.
#[derive(Parser)]
#[command(name = "rqp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus (PGM frames, sidecars, manifest).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        frames: usize,
        /// Frame side in pixels.
        #[arg(long, default_value_t = 64)]
        size: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build feature planes for one frame; with --out, export them as PGM.
    Extract {
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        sidecar: PathBuf,
        #[arg(long, default_value = "rec,seg,intra")]
        features: ChannelSet,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Least-squares model parameters of every labelled frame.
    FitLabels {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Writes labels.csv here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a regressor on the training split and save a checkpoint.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "rec,seg,intra")]
        features: ChannelSet,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to OUT/model.json.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Predict one frame's rate (bits) at a QP.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        sidecar: PathBuf,
        #[arg(long)]
        qp: f64,
    },
    /// Error-proportion report of a checkpoint on the test split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, default_value = "30,20,10", value_delimiter = ',')]
        thresholds: Vec<f64>,
        /// Score every frame instead of the test split.
        #[arg(long)]
        all: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate a grid of model forms and feature subsets.
    Ablate {
        #[arg(long)]
        corpus: PathBuf,
        /// Model forms to include; repeatable. Defaults to both.
        #[arg(long = "spec")]
        specs: Vec<ModelForm>,
        /// Only fastened models.
        #[arg(long, conflicts_with = "no_fasten")]
        fasten: bool,
        /// Only free models.
        #[arg(long)]
        no_fasten: bool,
        /// Feature subsets; repeatable. Defaults to all seven.
        #[arg(long = "features")]
        features: Vec<ChannelSet>,
        #[arg(long, default_value = "30,20,10", value_delimiter = ',')]
        thresholds: Vec<f64>,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Actual and predicted R-QP curves of one frame as CSV.
    Curves {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        frame_id: String,
        /// Trained configurations; repeatable.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
        /// Add least-squares fits of all four model kinds.
        #[arg(long)]
        oracle: bool,
        /// QP grid; defaults to the labelled QPs.
        #[arg(long, value_delimiter = ',')]
        qps: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value = "quadratic")]
    spec: ModelForm,
    /// Fasten the model on the operational point (default).
    #[arg(long, overrides_with = "no_fasten")]
    fasten: bool,
    #[arg(long)]
    no_fasten: bool,
}

impl ModelArgs {
    fn kind(&self) -> ModelKind {
        ModelKind::new(self.spec, !self.no_fasten || self.fasten)
    }
}

#[derive(Args)]
struct SplitArgs {
    /// Seeds the split, initialization and shuffling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
    test_fraction: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    learning_rate: f64,
    #[arg(long, default_value_t = 10)]
    batch_size: usize,
}

impl TrainArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            ..TrainConfig::default()
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn split(corpus: &Path, args: &SplitArgs) -> Result<Dataset> {
    Dataset::split(load_corpus(corpus)?, args.seed, args.test_fraction)
}

fn write_report(out: &Path, report: &ErrorReport) -> Result<()> {
    create_dir(out)?;
    write(&out.join("report.csv"), &report.to_csv())?;
    write(&out.join("report.txt"), &report.to_table())?;
    print!("{}", report.to_table());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { out, frames, size, seed } => {
            let items: Vec<CorpusItem> = synth_corpus(frames, seed, (size, size))?
                .into_iter()
                .map(CorpusItem::from)
                .collect();
            let manifest = write_corpus(&out, &items)?;
            println!("{}", manifest.display());
        }
        Command::Extract {
            frame,
            sidecar,
            features,
            out,
        } => {
            let item = load_item(&frame, &sidecar)?;
            let m = &item.metadata;
            let stack = extract(&item.frame, &m.cus, &m.pus, features)?;
            if let Some(dir) = &out {
                create_dir(dir)?;
            }
            for (c, plane) in features.channels().into_iter().zip(stack.planes()) {
                println!("{} mean {:.4}", c.name(), plane.mean());
                if let Some(dir) = &out {
                    save_frame(dir.join(format!("{}.{}.pgm", m.frame_id, c.name())), plane)?;
                }
            }
        }
        Command::FitLabels { corpus, model, out } => {
            let kind = model.kind();
            let mut csv = String::from("frame_id,model");
            for j in 0..kind.param_count() {
                csv.push_str(&format!(",c{j}"));
            }
            csv.push_str(",rss\n");
            for item in load_corpus(&corpus)? {
                let m = &item.metadata;
                let params = make_labels(m, kind)?;
                let rss = residual_sum_squares(&params, m.labels.as_ref().expect("labels checked by fit"))?;
                csv.push_str(&format!("{},{kind}", m.frame_id));
                for c in &params.coeffs {
                    csv.push_str(&format!(",{c}"));
                }
                csv.push_str(&format!(",{rss}\n"));
            }
            match out {
                Some(dir) => {
                    create_dir(&dir)?;
                    write(&dir.join("labels.csv"), &csv)?;
                }
                None => print!("{csv}"),
            }
        }
        Command::Train {
            corpus,
            model,
            features,
            split: split_args,
            train,
            out,
            checkpoint,
        } => {
            let data = split(&corpus, &split_args)?;
            let (regressor, history) =
                train_regressor(&data, model.kind(), features, &train.config(split_args.seed))?;
            create_dir(&out)?;
            let path = checkpoint.unwrap_or_else(|| out.join("model.json"));
            NetPredictor {
                regressor,
                channels: features,
            }
            .to_checkpoint()?
            .save(&path)?;
            let mut csv = String::from("epoch,train_loss,validation_loss\n");
            for (i, t) in history.train.iter().enumerate() {
                let v = history.validation.get(i).map(|v| v.to_string()).unwrap_or_default();
                csv.push_str(&format!("{},{t},{v}\n", i + 1));
            }
            write(&out.join("history.csv"), &csv)?;
            println!(
                "trained {} on {} frames: loss {:.6} -> {:.6}, validation {} (mean predictor {})",
                model.kind(),
                data.train.len(),
                history.initial_train,
                history.final_train,
                history.final_validation().map_or("n/a".into(), |v| format!("{v:.6}")),
                history.validation_baseline.map_or("n/a".into(), |v| format!("{v:.6}")),
            );
            println!("{}", path.display());
        }
        Command::Predict {
            checkpoint,
            frame,
            sidecar,
            qp,
        } => {
            let predictor = NetPredictor::load(&checkpoint)?;
            let item = load_item(&frame, &sidecar)?;
            println!("{}", predictor.params(&item)?.predict_rate(qp)?);
        }
        Command::Evaluate {
            checkpoint,
            corpus,
            split: split_args,
            thresholds,
            all,
            out,
        } => {
            let predictor = NetPredictor::load(&checkpoint)?;
            let items = if all {
                load_corpus(&corpus)?
            } else {
                split(&corpus, &split_args)?.test
            };
            let kind = predictor.kind();
            let mut report = ErrorReport::new(thresholds.clone())?;
            report.push(evaluate(
                &items,
                &predictor,
                &thresholds,
                &kind.form.to_string(),
                kind.fastened,
                &predictor.channels.to_string(),
            )?)?;
            write_report(&out, &report)?;
        }
        Command::Ablate {
            corpus,
            specs,
            fasten,
            no_fasten,
            features,
            thresholds,
            split: split_args,
            train,
            out,
        } => {
            let forms = if specs.is_empty() {
                vec![ModelForm::Linear, ModelForm::Quadratic]
            } else {
                specs
            };
            let fastening: Vec<bool> = match (fasten, no_fasten) {
                (true, _) => vec![true],
                (_, true) => vec![false],
                _ => vec![false, true],
            };
            let cfg = AblationConfig {
                kinds: forms
                    .iter()
                    .flat_map(|&f| fastening.iter().map(move |&p| ModelKind::new(f, p)))
                    .collect(),
                features: if features.is_empty() {
                    ChannelSet::all_subsets()
                } else {
                    features
                },
                thresholds,
            };
            let data = split(&corpus, &split_args)?;
            let (report, _) = run_ablation(&data, &cfg, &train.config(split_args.seed))?;
            write_report(&out, &report)?;
        }
        Command::Curves {
            corpus,
            frame_id,
            checkpoints,
            oracle,
            qps,
            out,
        } => {
            let items = load_corpus(&corpus)?;
            let item = items
                .iter()
                .find(|i| i.metadata.frame_id == frame_id)
                .ok_or_else(|| Error::Config(format!("no frame '{frame_id}' in {}", corpus.display())))?;
            let nets = checkpoints
                .iter()
                .map(NetPredictor::load)
                .collect::<Result<Vec<_>>>()?;
            let oracles: Vec<OraclePredictor> = if oracle {
                ModelKind::ALL.iter().map(|&kind| OraclePredictor { kind }).collect()
            } else {
                Vec::new()
            };
            let mut configs: Vec<(String, &dyn RatePredictor)> = Vec::new();
            for n in &nets {
                configs.push((format!("{}[{}]", n.kind(), n.channels.to_string().replace(',', "+")), n));
            }
            for o in &oracles {
                configs.push((format!("{}[fit]", o.kind), o));
            }
            let csv = curve_dump(item, &configs, qps.as_deref())?;
            create_dir(&out)?;
            write(&out.join("curves.csv"), &csv)?;
            print!("{csv}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rqp: error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
