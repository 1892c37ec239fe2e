use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use skgcn::analysis::{asymmetry, residual_report};
use skgcn::graph::{build_adjacency, normalize, AdjacencyVariant, JointGraphTopology, Normalization};
use skgcn::model::{Checkpoint, ModelConfig};
use skgcn::tape::Tape;
use skgcn::tensor::Tensor;

fn topology() -> impl Strategy<Value = JointGraphTopology> {
    (1usize..=25).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let len = pairs.len();
        proptest::sample::subsequence(pairs, 0..=len)
            .prop_map(move |edges| JointGraphTopology::new("p", n, edges).unwrap())
    })
}

fn values(shape: &'static [usize]) -> impl Strategy<Value = Tensor> {
    let n: usize = shape.iter().product();
    proptest::collection::vec(-2.0f64..2.0, n).prop_map(move |v| Tensor::new(shape.to_vec(), v).unwrap())
}

fn eigenvalues(t: &Tensor) -> Vec<f64> {
    let n = t.shape()[0];
    SymmetricEigen::new(DMatrix::from_row_slice(n, n, t.data())).eigenvalues.iter().copied().collect()
}

proptest! {
    #[test]
    fn symmetric_normalization_spectrum_is_bounded(topo in topology()) {
        for variant in [AdjacencyVariant::Skeleton, AdjacencyVariant::SkNeighbor] {
            let a = normalize(&build_adjacency(&topo, variant, None).unwrap(), Normalization::Symmetric);
            for ev in eigenvalues(a.fixed()) {
                prop_assert!((-1.0 - 1e-8..=1.0 + 1e-8).contains(&ev), "{} {}", variant, ev);
            }
        }
    }

    #[test]
    fn skeleton_top_eigenvalue_is_one(topo in topology()) {
        let a = normalize(&build_adjacency(&topo, AdjacencyVariant::Skeleton, None).unwrap(), Normalization::Symmetric);
        let top = eigenvalues(a.fixed()).into_iter().fold(f64::MIN, f64::max);
        prop_assert!((top - 1.0).abs() < 1e-9);
    }

    #[test]
    fn row_stochastic_rows_sum_to_one(topo in topology()) {
        let a = normalize(&build_adjacency(&topo, AdjacencyVariant::Skeleton, None).unwrap(), Normalization::RowStochastic);
        let n = topo.n_joints();
        for i in 0..n {
            let s: f64 = a.fixed().data()[i * n..(i + 1) * n].iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_is_a_fixed_point(n in 1usize..40) {
        let topo = JointGraphTopology::edgeless(n).unwrap();
        let id = build_adjacency(&topo, AdjacencyVariant::Identity, None).unwrap();
        for mode in [Normalization::Symmetric, Normalization::RowStochastic] {
            let out = normalize(&id, mode);
            prop_assert_eq!(out.fixed(), &Tensor::identity(n));
        }
    }

    #[test]
    fn tape_replays_bit_identically(a in values(&[3, 4]), b in values(&[4, 2]), c in values(&[3, 2])) {
        let run = || {
            let mut tape = Tape::new();
            let (va, vb, vc) = (tape.param(a.clone()), tape.param(b.clone()), tape.param(c.clone()));
            let ab = tape.matmul(va, vb).unwrap();
            let h = tape.add(ab, vc).unwrap();
            let r = tape.relu(h).unwrap();
            let m = tape.mul(r, vc).unwrap();
            let loss = tape.reduce_sum(m, &[0, 1]).unwrap();
            let g = tape.gradients(loss).unwrap();
            (
                tape.value(loss).clone(),
                g.get(va).unwrap().clone(),
                g.get(vb).unwrap().clone(),
                g.get(vc).unwrap().clone(),
            )
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn gradients_are_linear_in_the_loss(a in values(&[2, 3]), b in values(&[2, 3]), k in -3.0f64..3.0) {
        let mut tape = Tape::new();
        let (va, vb) = (tape.param(a.clone()), tape.param(b.clone()));
        let prod = tape.mul(va, vb).unwrap();
        let sum = tape.reduce_sum(prod, &[0, 1]).unwrap();
        let scaled = tape.scale(sum, k).unwrap();
        let g1 = tape.gradients(sum).unwrap();
        let gk = tape.gradients(scaled).unwrap();
        for (x, y) in g1.get(va).unwrap().data().iter().zip(gk.get(va).unwrap().data()) {
            prop_assert!((x * k - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
        prop_assert_eq!(g1.get(va).unwrap(), &b);
    }

    #[test]
    fn residual_report_stays_in_range(vals in proptest::collection::vec(-1.0f64..1.0, 3 * 36), k in 0usize..=36) {
        let cfg = ModelConfig {
            gcn_channels: [2, 2, 2],
            ..ModelConfig::new(6, 2, 2).with_adjacency(AdjacencyVariant::IdentityPlusResidual)
        };
        let mut ckpt = Checkpoint::init(&cfg, &JointGraphTopology::binary_tree(6).unwrap(), 0).unwrap();
        for (l, chunk) in vals.chunks(36).enumerate() {
            *ckpt.params.get_mut(&format!("gcn{}.residual", l + 1)).unwrap() = Tensor::new(vec![6, 6], chunk.to_vec()).unwrap();
        }
        let report = residual_report(&ckpt, Some(k)).unwrap();
        prop_assert_eq!(report.layers.len(), 3);
        for layer in &report.layers {
            prop_assert!((0.0..=2.0).contains(&layer.asymmetry));
            prop_assert!((0.0..=1.0).contains(&layer.negative_fraction));
            prop_assert!(layer.self_loops <= k.min(6));
            prop_assert_eq!(layer.edges.len(), k);
        }
    }

    #[test]
    fn transpose_keeps_asymmetry(vals in proptest::collection::vec(-1.0f64..1.0, 25)) {
        let r = Tensor::new(vec![5, 5], vals).unwrap();
        let a = asymmetry(&r).unwrap();
        let b = asymmetry(&r.transpose().unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }
}
