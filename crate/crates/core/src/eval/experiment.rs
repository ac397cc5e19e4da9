use super::report::{validate_thresholds, ErrorReport, DEFAULT_THRESHOLDS};
use super::{evaluate, make_labels, NetPredictor};
use crate::error::{Error, Result};
use crate::features::{extract, ChannelSet, FeatureStack};
use crate::ingest::{split_dataset, CorpusItem};
use crate::model::{ModelKind, ModelParams};
use crate::nn::{LossHistory, Network, NetworkConfig, Regressor, TrainConfig};

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

/// A corpus split into train, validation and test sets.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<CorpusItem>,
    pub validation: Vec<CorpusItem>,
    pub test: Vec<CorpusItem>,
}

impl Dataset {
    pub fn split(items: Vec<CorpusItem>, seed: u64, test_fraction: f64) -> Result<Self> {
        let ids: Vec<String> = items.iter().map(|i| i.metadata.frame_id.clone()).collect();
        let split = split_dataset(&ids, seed, test_fraction)?;
        let take = |wanted: &[String]| -> Vec<CorpusItem> {
            wanted
                .iter()
                .map(|id| items[ids.iter().position(|x| x == id).unwrap()].clone())
                .collect()
        };
        Ok(Self {
            train: take(&split.train),
            validation: take(&split.validation),
            test: take(&split.test),
        })
    }

    /// Side of the square frames every item shares.
    pub fn frame_size(&self) -> Result<usize> {
        let mut all = self.train.iter().chain(&self.validation).chain(&self.test);
        let first = all
            .next()
            .ok_or_else(|| Error::Config("dataset is empty".into()))?;
        let (w, h) = (first.frame.width(), first.frame.height());
        if w != h {
            return Err(Error::Shape(format!("network input must be square, got {w}x{h}")));
        }
        if let Some(other) = all.find(|i| i.frame.width() != w || i.frame.height() != h) {
            return Err(Error::Shape(format!(
                "frame '{}' is {}x{}, expected {w}x{h}",
                other.metadata.frame_id,
                other.frame.width(),
                other.frame.height()
            )));
        }
        Ok(w as usize)
    }
}

/// Feature stacks paired with least-squares labels.
pub fn labelled(items: &[CorpusItem], kind: ModelKind, channels: ChannelSet) -> Result<Vec<(FeatureStack, ModelParams)>> {
    items
        .iter()
        .map(|i| {
            let m = &i.metadata;
            Ok((extract(&i.frame, &m.cus, &m.pus, channels)?, make_labels(m, kind)?))
        })
        .collect()
}

/// Trains a fresh standard network for one (model, features) configuration.
/// Initialization and shuffling both follow `cfg.seed`.
pub fn train_regressor(
    data: &Dataset,
    kind: ModelKind,
    channels: ChannelSet,
    cfg: &TrainConfig,
) -> Result<(Regressor, LossHistory)> {
    let size = data.frame_size()?;
    let net = Network::new(NetworkConfig::standard(channels.len(), size, kind.param_count(), cfg.seed))?;
    let mut reg = Regressor::new(net, kind)?;
    let train = labelled(&data.train, kind, channels)?;
    let validation = labelled(&data.validation, kind, channels)?;
    let history = reg.train(&train, &validation, cfg)?;
    Ok((reg, history))
}

/// Grid of model kinds and feature subsets to train and evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    pub kinds: Vec<ModelKind>,
    pub features: Vec<ChannelSet>,
    pub thresholds: Vec<f64>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            kinds: ModelKind::ALL.to_vec(),
            features: ChannelSet::all_subsets(),
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
        }
    }
}

impl AblationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() || self.features.is_empty() {
            return Err(Error::Config("ablation needs at least one model and one feature set".into()));
        }
        validate_thresholds(&self.thresholds)
    }
}

#[derive(Debug, Clone)]
pub struct AblationRun {
    pub kind: ModelKind,
    pub channels: ChannelSet,
    pub history: LossHistory,
    pub predictor: NetPredictor,
}

/// Trains every configuration on `data.train` and scores it on `data.test`.
/// Rows follow the order of `cfg.kinds`, then `cfg.features`.
pub fn run_ablation(data: &Dataset, cfg: &AblationConfig, train: &TrainConfig) -> Result<(ErrorReport, Vec<AblationRun>)> {
    cfg.validate()?;
    let mut report = ErrorReport::new(cfg.thresholds.clone())?;
    let mut runs = Vec::new();
    for &kind in &cfg.kinds {
        for &channels in &cfg.features {
            let (regressor, history) = train_regressor(data, kind, channels, train)?;
            let predictor = NetPredictor { regressor, channels };
            report.push(evaluate(
                &data.test,
                &predictor,
                &cfg.thresholds,
                &kind.form.to_string(),
                kind.fastened,
                &channels.to_string(),
            )?)?;
            runs.push(AblationRun {
                kind,
                channels,
                history,
                predictor,
            });
        }
    }
    Ok((report, runs))
}
