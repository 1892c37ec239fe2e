//! The three-layer validation network, its parameters and checkpoints.

mod checkpoint;
mod config;
mod network;
mod params;

pub use checkpoint::Checkpoint;
pub use config::{Activation, ModelConfig};
pub use network::{classify_pool, gcn_layer, gcn_layer_forward, ForwardPass, Network};
pub use params::Params;

use crate::error::Result;
use crate::tensor::Tensor;

/// Logits of one preprocessed sample under `checkpoint`.
pub fn forward(x: &Tensor, checkpoint: &Checkpoint) -> Result<Tensor> {
    checkpoint.network()?.logits(&checkpoint.params, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::permute_joints;
    use crate::graph::{add_wrong_edges, AdjacencyVariant, JointGraphTopology, Normalization};
    use crate::noise::{NoiseKind, NoiseSpec};
    use crate::tape::Tape;
    use crate::train::AdamState;
    use crate::Error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn tiny(variant: AdjacencyVariant) -> ModelConfig {
        ModelConfig {
            gcn_channels: [3, 3, 4],
            temporal_kernel: 3,
            ..ModelConfig::new(4, 4, 2).with_adjacency(variant)
        }
    }

    #[test]
    fn gcn_layer_matches_explicit_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.random_range(1..=5);
            let (t, cin, cout) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..4));
            let a = random(&[n, n], &mut rng);
            let x = random(&[t, n, cin], &mut rng);
            let w = random(&[cin, cout], &mut rng);
            let got = gcn_layer_forward(&x, &a, &w, Activation::Identity).unwrap();
            for f in 0..t {
                for i in 0..n {
                    for o in 0..cout {
                        let mut expect = 0.0;
                        for j in 0..n {
                            let xw: f64 = (0..cin).map(|c| x.at(&[f, j, c]) * w.at(&[c, o])).sum();
                            expect += a.at(&[i, j]) * xw;
                        }
                        assert!((got.at(&[f, i, o]) - expect).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn identity_adjacency_is_a_per_joint_linear_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[2, 3, 2], &mut rng);
        let w = random(&[2, 4], &mut rng);
        let got = gcn_layer_forward(&x, &Tensor::identity(3), &w, Activation::Identity).unwrap();
        let expect = x.clone().reshape(&[6, 2]).unwrap().matmul(&w).unwrap();
        assert_eq!(got.data(), expect.data());
    }

    #[test]
    fn gcn_layer_rejects_channel_mismatch() {
        let x = Tensor::zeros(&[2, 3, 2]);
        let w = Tensor::zeros(&[3, 4]);
        assert!(matches!(
            gcn_layer_forward(&x, &Tensor::identity(3), &w, Activation::Relu),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn classify_pool_examples() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![2, 2, 1], vec![1.0, 3.0, 5.0, 7.0]).unwrap());
        let p = classify_pool(&mut tape, x).unwrap();
        assert_eq!(tape.value(p).data(), &[4.0]);
        let c = tape.constant(Tensor::full(&[3, 4, 2], 2.5));
        let p = classify_pool(&mut tape, c).unwrap();
        assert_eq!(tape.value(p).data(), &[2.5, 2.5]);
        let one = tape.constant(Tensor::new(vec![1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap());
        let p = classify_pool(&mut tape, one).unwrap();
        assert_eq!(tape.value(p).data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn finite_difference_gradients_cover_every_parameter() {
        let mut cfg = tiny(AdjacencyVariant::IdentityPlusResidual);
        cfg.adjacency[1] = AdjacencyVariant::SkeletonPlusResidual;
        cfg.residual_init_scale = 0.3;
        let topo = JointGraphTopology::binary_tree(4).unwrap();
        let net = Network::new(&cfg, &topo).unwrap();
        let mut params = Params::init(&cfg, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for t in params.tensors_mut() {
            let noise = random(t.shape(), &mut rng);
            t.data_mut().iter_mut().zip(noise.data()).for_each(|(v, n)| *v += 0.1 * n);
        }
        let x = random(&[6, 4, 4], &mut rng);
        let target = [0.2, 0.8];

        let loss_of = |p: &Params| -> f64 {
            let mut tape = Tape::new();
            let pass = net.forward(&mut tape, p, &x, false).unwrap();
            let l = tape.softmax_cross_entropy(pass.logits, &target).unwrap();
            tape.value(l).item().unwrap()
        };
        let mut tape = Tape::new();
        let pass = net.forward(&mut tape, &params, &x, true).unwrap();
        let loss = tape.softmax_cross_entropy(pass.logits, &target).unwrap();
        let grads = tape.gradients(loss).unwrap();

        let h = 1e-6;
        let names: Vec<String> = params.names().map(str::to_string).collect();
        for (pi, name) in names.iter().enumerate() {
            let analytic = grads.get(pass.params[pi]).unwrap().clone();
            for k in 0..analytic.numel() {
                let orig = params.get(name).unwrap().data()[k];
                params.get_mut(name).unwrap().data_mut()[k] = orig + h;
                let up = loss_of(&params);
                params.get_mut(name).unwrap().data_mut()[k] = orig - h;
                let down = loss_of(&params);
                params.get_mut(name).unwrap().data_mut()[k] = orig;
                let numeric = (up - down) / (2.0 * h);
                let a = analytic.data()[k];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7);
                assert!(rel < 1e-4, "{}[{}]: analytic {} numeric {}", name, k, a, numeric);
            }
        }
    }

    #[test]
    fn zero_input_gives_bias_logits() {
        let cfg = tiny(AdjacencyVariant::Skeleton);
        let topo = JointGraphTopology::binary_tree(4).unwrap();
        let mut ckpt = Checkpoint::init(&cfg, &topo, 0).unwrap();
        *ckpt.params.get_mut("fc.bias").unwrap() = Tensor::vector(vec![0.25, -1.5]);
        let logits = forward(&Tensor::zeros(&[6, 4, 4]), &ckpt).unwrap();
        assert_eq!(logits.data(), &[0.25, -1.5]);
        assert_eq!(logits, forward(&Tensor::zeros(&[6, 4, 4]), &ckpt).unwrap());
    }

    #[test]
    fn stage_is_named_on_shape_errors() {
        let cfg = tiny(AdjacencyVariant::Identity);
        let ckpt = Checkpoint::init(&cfg, &JointGraphTopology::binary_tree(4).unwrap(), 0).unwrap();
        let err = forward(&Tensor::zeros(&[6, 4, 3]), &ckpt).unwrap_err();
        assert!(err.to_string().contains("input"), "{}", err);
        // Two frames survive GCN1 but not the second stride-2 pool.
        let err = forward(&Tensor::zeros(&[3, 4, 4]), &ckpt).unwrap_err();
        assert!(err.to_string().contains("tcn2"), "{}", err);
    }

    #[test]
    fn identity_model_ignores_joint_order() {
        let cfg = tiny(AdjacencyVariant::Identity);
        let ckpt = Checkpoint::init(&cfg, &JointGraphTopology::binary_tree(4).unwrap(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random(&[6, 4, 4], &mut rng);
        let permuted = permute_joints(&x, &[2, 0, 3, 1]);
        let a = forward(&x, &ckpt).unwrap();
        let b = forward(&permuted, &ckpt).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() <= 1e-6);
    }

    #[test]
    fn identity_model_never_reads_edges() {
        let cfg = ModelConfig {
            tau: 2,
            ..tiny(AdjacencyVariant::IdentityPlusResidual)
        };
        let topo = JointGraphTopology::binary_tree(4).unwrap();
        let ckpt = Checkpoint::init(&cfg, &topo, 3).unwrap();
        let x = random(&[8, 4, 4], &mut ChaCha8Rng::seed_from_u64(4));
        let clean = forward(&x, &ckpt).unwrap();
        for count in 0..=3 {
            let noisy = add_wrong_edges(&topo, &NoiseSpec::new(NoiseKind::WrongEdges, count, 17)).unwrap();
            let other = Checkpoint {
                topology: noisy,
                ..ckpt.clone()
            };
            assert_eq!(forward(&x, &other).unwrap().data(), clean.data());
        }
    }

    #[test]
    fn tau_one_equals_spatial_mode() {
        let topo = JointGraphTopology::binary_tree(4).unwrap();
        let x = random(&[6, 4, 4], &mut ChaCha8Rng::seed_from_u64(6));
        for variant in AdjacencyVariant::LAYER_VARIANTS {
            let spatial = tiny(variant);
            let ckpt = Checkpoint::init(&spatial, &topo, 1).unwrap();
            let st = Checkpoint {
                config: ModelConfig {
                    tau: 1,
                    temporal_adjacency: AdjacencyVariant::Skeleton,
                    ..spatial.clone()
                },
                ..ckpt.clone()
            };
            assert_eq!(forward(&x, &ckpt).unwrap(), forward(&x, &st).unwrap());
        }
    }

    #[test]
    fn block_mode_mixes_across_frames() {
        let topo = JointGraphTopology::binary_tree(4).unwrap();
        let cfg = ModelConfig {
            tau: 3,
            ..tiny(AdjacencyVariant::Identity)
        };
        let adj = crate::graph::normalize_values(
            &crate::graph::tile_blocks(
                Tensor::identity(4).data(),
                Tensor::identity(4).data(),
                4,
                3,
                &cfg.temporal_links.mask(3),
            ),
            12,
            Normalization::Symmetric,
        );
        // Every joint averages itself over the three frames of its window.
        assert!((adj[0] - 1.0 / 3.0).abs() < 1e-15 && (adj[4] - 1.0 / 3.0).abs() < 1e-15);
        let x = random(&[7, 4, 2], &mut ChaCha8Rng::seed_from_u64(0));
        let w = Tensor::identity(2);
        let out = gcn_layer_forward(&x, &Tensor::new(vec![12, 12], adj).unwrap(), &w, Activation::Identity).unwrap();
        assert_eq!(out.shape(), &[6, 4, 2]);
        let mean: f64 = (0..3).map(|f| x.at(&[f, 1, 0])).sum::<f64>() / 3.0;
        assert!((out.at(&[2, 1, 0]) - mean).abs() < 1e-12);
        assert!(Network::new(&cfg, &topo).is_ok());
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut cfg = tiny(AdjacencyVariant::SkeletonPlusResidual);
        cfg.adjacency[2] = AdjacencyVariant::SkNeighbor;
        let topo = JointGraphTopology::binary_tree(4).unwrap();
        let mut ckpt = Checkpoint::init(&cfg, &topo, 12).unwrap();
        ckpt.epoch = 7;
        let text = ckpt.to_text();
        let back = Checkpoint::parse(&text).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.to_text(), text);

        let mut state = AdamState::new(&ckpt.params);
        state.step = 3;
        state.m[0].data_mut()[0] = 0.1 + 0.2;
        state.v[1].data_mut()[0] = 1e-300;
        ckpt.optimizer = Some(state);
        let text = ckpt.to_text();
        let back = Checkpoint::parse(&text).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.to_text(), text);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.skckpt");
        ckpt.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ckpt);
    }

    #[test]
    fn checkpoint_parse_errors() {
        let ckpt = Checkpoint::init(&tiny(AdjacencyVariant::Identity), &JointGraphTopology::binary_tree(4).unwrap(), 0)
            .unwrap();
        let text = ckpt.to_text();
        assert!(Checkpoint::parse(&text.replace("skckpt v1", "skckpt v2")).is_err());
        assert!(Checkpoint::parse(text.trim_end_matches("end\n")).is_err());
        assert!(Checkpoint::parse(&text.replace("config.tau 1", "config.tau x")).is_err());
        // A residual tensor on a variant without one breaks the layout.
        let bad = text.replace("config.adjacency identity", "config.adjacency identity+res");
        assert!(Checkpoint::parse(&bad).is_err());
    }
}
