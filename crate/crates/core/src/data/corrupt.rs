use rand::seq::{index, SliceRandom};

use super::{Dataset, SkeletonSequence, Split};
use crate::error::{Error, Result};
use crate::graph::add_wrong_edges;
use crate::noise::{NoiseKind, NoiseSpec};
use crate::tensor::Tensor;

/// Picks `spec.count` joints and permutes their rows with a derangement,
/// identically in every frame. A derangement of one joint does not exist,
/// so `count == 1` is rejected.
pub fn shuffle_joints(seq: &SkeletonSequence, spec: &NoiseSpec) -> Result<SkeletonSequence> {
    expect_kind(spec, NoiseKind::ShuffleJoints)?;
    let n = seq.n_joints();
    if spec.count > n {
        return Err(Error::contract(format!(
            "cannot shuffle {} of {} joints",
            spec.count, n
        )));
    }
    if spec.count == 1 {
        return Err(Error::contract("shuffling needs 0 or at least 2 joints"));
    }
    if spec.count == 0 {
        return Ok(seq.clone());
    }
    let mut rng = spec.rng();
    let chosen = index::sample(&mut rng, n, spec.count).into_vec();
    let mut perm: Vec<usize> = (0..chosen.len()).collect();
    loop {
        perm.shuffle(&mut rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            break;
        }
    }
    // source[joint] = joint whose data lands on `joint`
    let mut source: Vec<usize> = (0..n).collect();
    for (i, &p) in perm.iter().enumerate() {
        source[chosen[i]] = chosen[p];
    }
    Ok(seq.with_coords(permute_joints(seq.coords(), &source)))
}

/// Zeroes `spec.count` uniformly chosen joints in every frame; at least one
/// joint always survives.
pub fn drop_joints(seq: &SkeletonSequence, spec: &NoiseSpec) -> Result<SkeletonSequence> {
    expect_kind(spec, NoiseKind::DropJoints)?;
    let n = seq.n_joints();
    if spec.count >= n {
        return Err(Error::contract(format!(
            "cannot drop {} of {} joints",
            spec.count, n
        )));
    }
    if spec.count == 0 {
        return Ok(seq.clone());
    }
    let mut rng = spec.rng();
    let dropped = index::sample(&mut rng, n, spec.count);
    let c = seq.channels();
    let mut data = seq.coords().data().to_vec();
    for frame in data.chunks_mut(n * c) {
        for j in dropped.iter() {
            frame[j * c..(j + 1) * c].fill(0.0);
        }
    }
    Ok(seq.with_coords(Tensor::new(seq.coords().shape().to_vec(), data)?))
}

/// Applies a data-level noise spec. Wrong edges act on the topology, not
/// the data, so they leave the sequence unchanged.
pub fn apply_noise(seq: &SkeletonSequence, spec: &NoiseSpec) -> Result<SkeletonSequence> {
    match spec.kind {
        NoiseKind::WrongEdges => Ok(seq.clone()),
        NoiseKind::ShuffleJoints => shuffle_joints(seq, spec),
        NoiseKind::DropJoints => drop_joints(seq, spec),
    }
}

/// Applies `spec` to a whole dataset. Wrong edges perturb the topology;
/// shuffle and drop corrupt every sequence of the affected splits, each
/// with its own seed derived from the split and sample index.
pub fn corrupt_dataset(dataset: &Dataset, spec: &NoiseSpec, test_only: bool) -> Result<Dataset> {
    if spec.kind == NoiseKind::WrongEdges {
        return dataset.with_topology(add_wrong_edges(dataset.topology(), spec)?);
    }
    dataset.map_sequences(|split, idx, seq| {
        if test_only && split == Split::Train {
            return Ok(seq.clone());
        }
        let salt = match split {
            Split::Train => idx as u64,
            Split::Test => (1 << 32) + idx as u64,
        };
        apply_noise(seq, &spec.derive(salt))
    })
}

/// Reorders the joint axis of a `T×N×C` tensor: output joint `j` takes the
/// data of input joint `source[j]`.
pub fn permute_joints(x: &Tensor, source: &[usize]) -> Tensor {
    let shape = x.shape();
    let (n, c) = (shape[1], shape[2]);
    assert_eq!(source.len(), n, "permutation length must equal joint count");
    let mut out = vec![0.0; x.numel()];
    for (frame_in, frame_out) in x.data().chunks(n * c).zip(out.chunks_mut(n * c)) {
        for (j, &src) in source.iter().enumerate() {
            frame_out[j * c..(j + 1) * c].copy_from_slice(&frame_in[src * c..(src + 1) * c]);
        }
    }
    Tensor::new(shape.to_vec(), out).expect("shape preserved")
}

fn expect_kind(spec: &NoiseSpec, kind: NoiseKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::contract(format!("expected a {} spec, got {}", kind, spec.kind)));
    }
    Ok(())
}
