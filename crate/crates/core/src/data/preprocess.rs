use serde::{Deserialize, Serialize};

use super::SkeletonSequence;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// How raw sequences become model input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    pub target_frames: usize,
    pub with_velocity: bool,
    /// Joint subtracted from every joint in each frame; none by default.
    pub center_joint: Option<usize>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            target_frames: 40,
            with_velocity: true,
            center_joint: None,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_frames == 0 {
            return Err(Error::contract("target_frames must be positive"));
        }
        if self.with_velocity && self.target_frames < 2 {
            return Err(Error::contract("velocity features need at least 2 frames"));
        }
        Ok(())
    }

    /// Feature channels produced from `c_in` coordinate channels.
    pub fn feature_channels(&self, c_in: usize) -> usize {
        if self.with_velocity {
            2 * c_in
        } else {
            c_in
        }
    }
}

/// Resamples to exactly `target` frames by linear interpolation at evenly
/// spaced fractional frame positions (first and last frames are kept).
pub fn resample_frames(seq: &SkeletonSequence, target: usize) -> Result<SkeletonSequence> {
    if target == 0 {
        return Err(Error::contract("resample target must be positive"));
    }
    let t = seq.n_frames();
    if target == t {
        return Ok(seq.clone());
    }
    let frame = seq.n_joints() * seq.channels();
    let src = seq.coords().data();
    let mut out = Vec::with_capacity(target * frame);
    for i in 0..target {
        let pos = if target == 1 || t == 1 {
            0.0
        } else {
            (i * (t - 1)) as f64 / (target - 1) as f64
        };
        let lo = (pos.floor() as usize).min(t - 1);
        let hi = (lo + 1).min(t - 1);
        let frac = pos - lo as f64;
        let (a, b) = (&src[lo * frame..(lo + 1) * frame], &src[hi * frame..(hi + 1) * frame]);
        if frac == 0.0 {
            out.extend_from_slice(a);
        } else {
            out.extend(a.iter().zip(b).map(|(x, y)| x + frac * (y - x)));
        }
    }
    let mut shape = seq.coords().shape().to_vec();
    shape[0] = target;
    Ok(seq.with_coords(Tensor::new(shape, out)?))
}

/// Model input features `T×N×C`: (optionally centered) coordinates followed
/// by forward-difference velocities `x_{t+1} − x_t`, zero in the last frame.
pub fn compute_features(seq: &SkeletonSequence, cfg: &PreprocessConfig) -> Result<Tensor> {
    cfg.validate()?;
    let (t, n, c) = (seq.n_frames(), seq.n_joints(), seq.channels());
    if t != cfg.target_frames {
        return Err(Error::contract(format!(
            "sequence `{}` has {} frames, features expect {} (resample first)",
            seq.sample_id(),
            t,
            cfg.target_frames
        )));
    }
    if let Some(center) = cfg.center_joint {
        if center >= n {
            return Err(Error::contract(format!(
                "center joint {} out of range for {} joints",
                center, n
            )));
        }
    }
    let mut pos = seq.coords().data().to_vec();
    if let Some(center) = cfg.center_joint {
        for frame in pos.chunks_mut(n * c) {
            let origin: Vec<f64> = frame[center * c..(center + 1) * c].to_vec();
            for joint in frame.chunks_mut(c) {
                joint.iter_mut().zip(&origin).for_each(|(v, o)| *v -= o);
            }
        }
    }
    let out_c = cfg.feature_channels(c);
    let mut out = vec![0.0; t * n * out_c];
    for ti in 0..t {
        for j in 0..n {
            let src = (ti * n + j) * c;
            let dst = (ti * n + j) * out_c;
            out[dst..dst + c].copy_from_slice(&pos[src..src + c]);
            if cfg.with_velocity && ti + 1 < t {
                let next = ((ti + 1) * n + j) * c;
                for k in 0..c {
                    out[dst + c + k] = pos[next + k] - pos[src + k];
                }
            }
        }
    }
    Tensor::new(vec![t, n, out_c], out)
}

/// Resample to the configured length, then compute features.
pub fn preprocess(seq: &SkeletonSequence, cfg: &PreprocessConfig) -> Result<Tensor> {
    compute_features(&resample_frames(seq, cfg.target_frames)?, cfg)
}
