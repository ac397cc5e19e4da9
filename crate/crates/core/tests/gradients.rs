use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rqp_core::nn::gradcheck::{check_layer, check_loss, check_network, DEFAULT_STEP};
use rqp_core::nn::{AvgPool, Conv2d, ConvStage, Dense, Layer, Network, NetworkConfig, Shape};

const TOL: f64 = 1e-4;

pub fn toy_config(seed: u64) -> NetworkConfig {
    let stage = |out_channels, pool| ConvStage {
        out_channels,
        kernel: 3,
        stride: 1,
        pool,
    };
    NetworkConfig {
        input_channels: 2,
        input_size: 8,
        stages: vec![stage(4, 2), stage(6, 2), stage(8, 2), stage(8, 1)],
        outputs: 3,
        seed,
    }
}

fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn toy_network_gradients_match_finite_differences() {
    for seed in 0..5 {
        let net = Network::new(toy_config(seed)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let input: Vec<f64> = (0..net.shapes()[0].len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let target = random(&mut rng, 3);
        let report = check_network(&net, &input, &target, DEFAULT_STEP).unwrap();
        assert_eq!(report.len(), 6);
        for c in &report {
            eprintln!("seed {seed} {} n={} kinks={} norm {:.2e} max {:.2e}", c.name, c.count, c.kinks, c.norm_relative, c.max_relative);
            assert!(c.kinks * 2 < c.count, "seed {seed}: too many kinks in {c:?}");
            assert!(c.worst() < TOL, "seed {seed}: {c:?}");
            assert!(c.max_relative > 0.0 || c.count == 0, "seed {seed}: {} has no gradient signal", c.name);
        }
    }
}

#[test]
fn individual_layers_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cases = [
        (Layer::Conv(Conv2d { in_c: 2, out_c: 3, kernel: 3, stride: 1 }), Shape::new(2, 5, 6)),
        (Layer::Conv(Conv2d { in_c: 1, out_c: 2, kernel: 3, stride: 2 }), Shape::new(1, 7, 7)),
        (Layer::AvgPool(AvgPool { size: 2 }), Shape::new(2, 4, 6)),
        (Layer::Dense(Dense { inputs: 12, outputs: 4 }), Shape::new(3, 2, 2)),
        (Layer::Relu, Shape::new(2, 3, 3)),
    ];
    for (layer, shape) in cases {
        let params = random(&mut rng, layer.param_count());
        // keep rectifier inputs clear of the kink
        let input: Vec<f64> = random(&mut rng, shape.len())
            .into_iter()
            .map(|v| if v.abs() < 0.05 { v + 0.1 } else { v })
            .collect();
        for c in check_layer(&layer, shape, &params, &input, &mut rng, DEFAULT_STEP).unwrap() {
            assert!(c.worst() < TOL, "{c:?}");
        }
    }
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let c = check_loss(&[0.3, -1.2, 2.0], &[0.1, 0.4, -0.5], DEFAULT_STEP);
    assert!(c.worst() < 1e-9, "{c:?}");
}
