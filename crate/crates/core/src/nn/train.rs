use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{mse_loss, Network};
use super::scalers::{normalize_stack, Standardizer};
use crate::error::{Error, Result};
use crate::features::FeatureStack;
use crate::model::{ModelKind, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 10,
            epochs: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(format!("invalid training config {self:?}")));
        }
        Ok(())
    }
}

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, cfg: &TrainConfig, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// A normalized input paired with its standardized target.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// Loss curves in standardized parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    /// Training loss before the first update.
    pub initial_train: f64,
    /// Per epoch: mean loss of each training example as seen in its batch,
    /// summed in example order.
    pub train: Vec<f64>,
    /// Per epoch: validation loss after the epoch's updates.
    pub validation: Vec<f64>,
    /// Training loss after the last update.
    pub final_train: f64,
    /// Validation loss of always predicting the training mean.
    pub validation_baseline: Option<f64>,
}

impl LossHistory {
    pub fn final_validation(&self) -> Option<f64> {
        self.validation.last().copied()
    }
}

/// Mean loss of the network over `examples`, accumulated in order.
pub fn evaluate_loss(net: &Network, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for ex in examples {
        let out = net.forward(&ex.input)?;
        total += mse_loss(&out, &ex.target).0;
    }
    Ok(total / examples.len() as f64)
}

/// Mini-batch training on prepared examples. Deterministic for fixed inputs.
pub fn fit_examples(
    net: &mut Network,
    train: &[Example],
    validation: &[Example],
    cfg: &TrainConfig,
) -> Result<LossHistory> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if let Some(bad) = train.iter().chain(validation).find(|e| e.target.len() != net.outputs()) {
        return Err(Error::Shape(format!(
            "target has {} values, network predicts {}",
            bad.target.len(),
            net.outputs()
        )));
    }

    let initial_train = evaluate_loss(net, train)?;
    let mut history = LossHistory {
        initial_train,
        train: Vec::with_capacity(cfg.epochs),
        validation: Vec::with_capacity(cfg.epochs),
        final_train: initial_train,
        validation_baseline: (!validation.is_empty()).then(|| {
            validation.iter().map(|e| mse_loss(&vec![0.0; e.target.len()], &e.target).0).sum::<f64>()
                / validation.len() as f64
        }),
    };

    let mut adam = Adam::new(net.params().len());
    let mut grads = vec![0.0; net.params().len()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut seen_loss = vec![0.0; train.len()];

    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        for batch in order.chunks(cfg.batch_size) {
            grads.fill(0.0);
            for &i in batch {
                let ex = &train[i];
                let trace = net.trace(&ex.input)?;
                let (loss, grad_out) = mse_loss(trace.output(), &ex.target);
                if !loss.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        detail: format!("loss {loss} on training example {i}"),
                    });
                }
                seen_loss[i] = loss;
                net.backward_params(&trace, &grad_out, &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            adam.step(cfg, net.params_mut(), &grads);
        }

        let epoch_loss = seen_loss.iter().sum::<f64>() / train.len() as f64;
        history.train.push(epoch_loss);
        if !validation.is_empty() {
            let v = evaluate_loss(net, validation)?;
            if !v.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("validation loss {v}"),
                });
            }
            history.validation.push(v);
        }
    }
    history.final_train = evaluate_loss(net, train)?;
    Ok(history)
}

/// A trained network with the scalers and model kind it predicts.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub network: Network,
    pub scalers: Option<Standardizer>,
    pub kind: ModelKind,
}

impl Regressor {
    pub fn new(network: Network, kind: ModelKind) -> Result<Self> {
        if network.outputs() != kind.param_count() {
            return Err(Error::Shape(format!(
                "{kind} has {} parameters but the network predicts {}",
                kind.param_count(),
                network.outputs()
            )));
        }
        Ok(Self {
            network,
            scalers: None,
            kind,
        })
    }

    fn examples(&self, data: &[(FeatureStack, ModelParams)], scalers: &Standardizer) -> Result<Vec<Example>> {
        data.iter()
            .map(|(stack, params)| {
                if params.spec.kind() != self.kind {
                    return Err(Error::Config(format!(
                        "label of kind {} in a {} dataset",
                        params.spec.kind(),
                        self.kind
                    )));
                }
                Ok(Example {
                    input: normalize_stack(stack),
                    target: scalers.transform(&params.coeffs),
                })
            })
            .collect()
    }

    /// Fits scalers on `train` labels and trains the network.
    pub fn train(
        &mut self,
        train: &[(FeatureStack, ModelParams)],
        validation: &[(FeatureStack, ModelParams)],
        cfg: &TrainConfig,
    ) -> Result<LossHistory> {
        if train.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        let labels: Vec<Vec<f64>> = train.iter().map(|(_, p)| p.coeffs.clone()).collect();
        let scalers = Standardizer::fit(&labels)?;
        self.train_with_scalers(train, validation, cfg, scalers)
    }

    /// Trains with scalers fitted elsewhere (e.g. on a larger label pool).
    pub fn train_with_scalers(
        &mut self,
        train: &[(FeatureStack, ModelParams)],
        validation: &[(FeatureStack, ModelParams)],
        cfg: &TrainConfig,
        scalers: Standardizer,
    ) -> Result<LossHistory> {
        if scalers.len() != self.kind.param_count() {
            return Err(Error::Shape("scalers do not match the model kind".into()));
        }
        let train_ex = self.examples(train, &scalers)?;
        let val_ex = self.examples(validation, &scalers)?;
        let history = fit_examples(&mut self.network, &train_ex, &val_ex, cfg)?;
        self.scalers = Some(scalers);
        Ok(history)
    }

    /// Network output in standardized space.
    pub fn forward(&self, stack: &FeatureStack) -> Result<Vec<f64>> {
        self.network.forward(&normalize_stack(stack))
    }

    /// Predicted model parameters for a frame, tagged with `spec`.
    pub fn predict_params(&self, stack: &FeatureStack, spec: crate::model::ModelSpec) -> Result<ModelParams> {
        let scalers = self
            .scalers
            .as_ref()
            .ok_or_else(|| Error::Config("regressor has no fitted scalers".into()))?;
        if spec.kind() != self.kind {
            return Err(Error::Config(format!("regressor predicts {} not {}", self.kind, spec.kind())));
        }
        ModelParams::new(spec, scalers.inverse(&self.forward(stack)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::NetworkConfig;

    fn toy_examples(n: usize, net: &Network) -> Vec<Example> {
        let len = net.shapes()[0].len();
        (0..n)
            .map(|i| Example {
                input: (0..len).map(|j| ((i * 31 + j * 17) % 23) as f64 / 23.0).collect(),
                target: (0..net.outputs()).map(|k| (i as f64 - n as f64 / 2.0) * 0.3 + k as f64 * 0.1).collect(),
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_keeps_loss_constant() {
        let mut net = Network::new(NetworkConfig::standard(1, 16, 2, 3)).unwrap();
        let before = net.clone();
        let ex = toy_examples(7, &net);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 4,
            batch_size: 3,
            ..TrainConfig::default()
        };
        let h = fit_examples(&mut net, &ex, &ex[..2], &cfg).unwrap();
        assert!(h.train.iter().all(|&l| l == h.initial_train));
        assert!(h.validation.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(net, before);
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            epochs: 3,
            batch_size: 2,
            seed: 9,
            ..TrainConfig::default()
        };
        let run = || {
            let mut net = Network::new(NetworkConfig::standard(1, 16, 2, 3)).unwrap();
            let ex = toy_examples(5, &net);
            let h = fit_examples(&mut net, &ex, &ex[..1], &cfg).unwrap();
            (h, net)
        };
        let (h1, n1) = run();
        let (h2, n2) = run();
        assert_eq!(h1, h2);
        assert_eq!(n1, n2);
        assert!(h1.final_train < h1.initial_train);
    }

    #[test]
    fn empty_or_mismatched_data_rejected() {
        let mut net = Network::new(NetworkConfig::standard(1, 16, 2, 3)).unwrap();
        let cfg = TrainConfig::default();
        assert!(fit_examples(&mut net, &[], &[], &cfg).is_err());
        let mut ex = toy_examples(2, &net);
        ex[0].target.push(1.0);
        assert!(fit_examples(&mut net, &ex, &[], &cfg).is_err());
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let cfg = TrainConfig::default();
        let mut adam = Adam::new(2);
        let mut p = vec![1.0, -1.0];
        adam.step(&cfg, &mut p, &[0.5, -2.0]);
        // bias-corrected first step is lr * g / (|g| + eps)
        assert!((p[0] - (1.0 - 1e-4 * 0.5 / (0.5 + 1e-8))).abs() < 1e-15);
        assert!((p[1] - (-1.0 + 1e-4 * 2.0 / (2.0 + 1e-8))).abs() < 1e-15);
    }
}
