use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{AvgPool, Conv2d, Dense, Layer, Shape};
use crate::error::{Error, Result};

/// One convolutional stage: conv, rectifier, average pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStage {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pool: usize,
}

pub const CONV_STAGES: usize = 4;
pub const DEFAULT_CHANNELS: [usize; CONV_STAGES] = [8, 16, 32, 32];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_channels: usize,
    pub input_size: usize,
    pub stages: Vec<ConvStage>,
    pub outputs: usize,
    pub seed: u64,
}

impl NetworkConfig {
    /// 8-16-32-32 channels, 3x3 kernels, stride 1. Pooling is 4x4 when the
    /// input is large enough to survive four of them, otherwise 2x2.
    pub fn standard(input_channels: usize, input_size: usize, outputs: usize, seed: u64) -> Self {
        let pool = if input_size % 256 == 0 { 4 } else { 2 };
        Self {
            input_channels,
            input_size,
            stages: DEFAULT_CHANNELS
                .iter()
                .map(|&out_channels| ConvStage {
                    out_channels,
                    kernel: 3,
                    stride: 1,
                    pool,
                })
                .collect(),
            outputs,
            seed,
        }
    }

    pub fn input_shape(&self) -> Shape {
        Shape::new(self.input_channels, self.input_size, self.input_size)
    }

    fn layers(&self) -> Result<(Vec<Layer>, Vec<Shape>)> {
        if !(1..=3).contains(&self.input_channels) {
            return Err(Error::Config(format!("input channels must be 1..=3, got {}", self.input_channels)));
        }
        if self.stages.len() != CONV_STAGES {
            return Err(Error::Config(format!(
                "network needs exactly {CONV_STAGES} conv stages plus one dense layer, got {} stages",
                self.stages.len()
            )));
        }
        if self.outputs == 0 {
            return Err(Error::Config("network needs at least one output".into()));
        }
        let mut layers = Vec::new();
        let mut shapes = vec![self.input_shape()];
        let mut push = |layer: Layer, shapes: &mut Vec<Shape>| -> Result<()> {
            let next = layer.output_shape(*shapes.last().unwrap())?;
            if next.is_empty() {
                return Err(Error::Shape("layer output is empty".into()));
            }
            layers.push(layer);
            shapes.push(next);
            Ok(())
        };
        let mut channels = self.input_channels;
        for st in &self.stages {
            if st.out_channels == 0 || st.kernel == 0 || st.stride == 0 || st.pool == 0 {
                return Err(Error::Config(format!("invalid conv stage {st:?}")));
            }
            push(
                Layer::Conv(Conv2d {
                    in_c: channels,
                    out_c: st.out_channels,
                    kernel: st.kernel,
                    stride: st.stride,
                }),
                &mut shapes,
            )?;
            push(Layer::Relu, &mut shapes)?;
            if st.pool > 1 {
                push(Layer::AvgPool(AvgPool { size: st.pool }), &mut shapes)?;
            }
            channels = st.out_channels;
        }
        let flat = shapes.last().unwrap().len();
        push(
            Layer::Dense(Dense {
                inputs: flat,
                outputs: self.outputs,
            }),
            &mut shapes,
        )?;
        Ok((layers, shapes))
    }
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }

    /// Input of layer `i` (or the network output for `i == layers`).
    pub fn activation(&self, i: usize) -> &[f64] {
        &self.acts[i]
    }
}

/// Four conv stages and a dense head over one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    layers: Vec<Layer>,
    shapes: Vec<Shape>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

impl Network {
    /// Builds the network and initializes weights from `config.seed`.
    pub fn new(config: NetworkConfig) -> Result<Self> {
        let mut net = Self::zeroed(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(net.config.seed);
        for (i, layer) in net.layers.iter().enumerate() {
            let (a, b) = (net.offsets[i], net.offsets[i + 1]);
            layer.init(&mut rng, &mut net.params[a..b]);
        }
        Ok(net)
    }

    pub fn zeroed(config: NetworkConfig) -> Result<Self> {
        let (layers, shapes) = config.layers()?;
        let mut offsets = vec![0];
        for l in &layers {
            offsets.push(offsets.last().unwrap() + l.param_count());
        }
        let params = vec![0.0; *offsets.last().unwrap()];
        Ok(Self {
            config,
            layers,
            shapes,
            offsets,
            params,
        })
    }

    pub fn with_params(config: NetworkConfig, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeroed(config)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "network has {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Input shape of every layer followed by the final output shape.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Parameter slice range of layer `i`.
    pub fn param_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn learnable_layers(&self) -> usize {
        self.layers.iter().filter(|l| l.is_learnable()).count()
    }

    pub fn outputs(&self) -> usize {
        self.config.outputs
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.shapes[0].len() {
            return Err(Error::Shape(format!(
                "network input needs {} values ({:?}), got {}",
                self.shapes[0].len(),
                self.shapes[0],
                input.len()
            )));
        }
        Ok(())
    }

    pub fn trace(&self, input: &[f64]) -> Result<Trace> {
        self.check_input(input)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; self.shapes[i + 1].len()];
            layer.forward(&self.params[self.param_range(i)], self.shapes[i], &acts[i], &mut out);
            acts.push(out);
        }
        Ok(Trace { acts })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(input)?.acts.pop().unwrap())
    }

    /// Backpropagates `grad_output` through a trace, accumulating into `grads`
    /// (same layout as the parameters). Returns the gradient at the input.
    pub fn backward(&self, trace: &Trace, grad_output: &[f64], grads: &mut [f64]) -> Vec<f64> {
        self.backprop(trace, grad_output, grads, true)
    }

    /// Like `backward` but skips the input gradient, which training never needs.
    pub fn backward_params(&self, trace: &Trace, grad_output: &[f64], grads: &mut [f64]) {
        self.backprop(trace, grad_output, grads, false);
    }

    fn backprop(&self, trace: &Trace, grad_output: &[f64], grads: &mut [f64], want_input: bool) -> Vec<f64> {
        let mut grad = grad_output.to_vec();
        for i in (0..self.layers.len()).rev() {
            let mut grad_in = if i > 0 || want_input {
                vec![0.0; self.shapes[i].len()]
            } else {
                Vec::new()
            };
            self.layers[i].backward(
                &self.params[self.param_range(i)],
                self.shapes[i],
                &trace.acts[i],
                &trace.acts[i + 1],
                &grad,
                &mut grads[self.param_range(i)],
                (!grad_in.is_empty()).then_some(&mut grad_in[..]),
            );
            grad = grad_in;
        }
        grad
    }
}

/// `(1/n) sum_j (pred_j - target_j)^2` over the `n` model parameters, and its
/// gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    (loss / n, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_learnable_layers_and_shapes() {
        for (size, pool, flat) in [(64, 2, 32 * 4 * 4), (512, 4, 32 * 2 * 2)] {
            let cfg = NetworkConfig::standard(3, size, 2, 0);
            assert!(cfg.stages.iter().all(|s| s.pool == pool));
            let net = Network::new(cfg).unwrap();
            assert_eq!(net.learnable_layers(), 5);
            match net.layers().last().unwrap() {
                Layer::Dense(d) => assert_eq!(d.inputs, flat),
                other => panic!("last layer {other:?}"),
            }
            assert_eq!(net.shapes().last().unwrap().len(), 2);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = NetworkConfig::standard(2, 64, 3, 0);
        cfg.stages.pop();
        assert!(Network::new(cfg).is_err());
        let mut cfg = NetworkConfig::standard(2, 64, 3, 0);
        cfg.stages[0].pool = 3;
        assert!(Network::new(cfg).is_err());
        assert!(Network::new(NetworkConfig::standard(4, 64, 3, 0)).is_err());
        assert!(Network::new(NetworkConfig::standard(2, 8, 3, 0)).is_err());
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let net = Network::zeroed(NetworkConfig::standard(2, 32, 3, 0)).unwrap();
        let input: Vec<f64> = (0..2 * 32 * 32).map(|i| (i % 7) as f64 / 7.0).collect();
        assert_eq!(net.forward(&input).unwrap(), vec![0.0; 3]);
        assert!(net.forward(&input[1..]).is_err());
    }

    #[test]
    fn forward_is_deterministic() {
        let net = Network::new(NetworkConfig::standard(1, 32, 2, 5)).unwrap();
        let input: Vec<f64> = (0..32 * 32).map(|i| ((i * 37) % 101) as f64 / 101.0).collect();
        let a = net.forward(&input).unwrap();
        assert_eq!(a, net.forward(&input).unwrap());
        assert!(a.iter().all(|v| v.is_finite()));
        assert_eq!(net, Network::new(NetworkConfig::standard(1, 32, 2, 5)).unwrap());
    }
}
