use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{parse_usize, strip_comment};
use crate::tensor::Tensor;

/// One recorded action: `T` frames of `N` joints with `C_in` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonSequence {
    sample_id: String,
    label: usize,
    coords: Tensor,
}

impl SkeletonSequence {
    /// `coords` must be a finite `T×N×C_in` tensor with `T, N ≥ 1` and
    /// `C_in ∈ {2, 3}`.
    pub fn new(sample_id: impl Into<String>, label: usize, coords: Tensor) -> Result<Self> {
        let sample_id = sample_id.into();
        validate_id(&sample_id)?;
        match coords.shape() {
            &[t, n, c] if t >= 1 && n >= 1 && (c == 2 || c == 3) => {}
            other => {
                return Err(Error::dim(
                    "SkeletonSequence",
                    format!("coordinates must be T×N×{{2,3}} with T, N ≥ 1, got {:?}", other),
                ))
            }
        }
        if !coords.all_finite() {
            return Err(Error::NonFinite(format!("coordinates of `{}`", sample_id)));
        }
        Ok(SkeletonSequence {
            sample_id,
            label,
            coords,
        })
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn n_frames(&self) -> usize {
        self.coords.shape()[0]
    }

    pub fn n_joints(&self) -> usize {
        self.coords.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.coords.shape()[2]
    }

    pub fn coords(&self) -> &Tensor {
        &self.coords
    }

    /// Coordinates of joint `joint` in frame `frame`.
    pub fn point(&self, frame: usize, joint: usize) -> &[f64] {
        let c = self.channels();
        let off = (frame * self.n_joints() + joint) * c;
        &self.coords.data()[off..off + c]
    }

    pub(crate) fn with_coords(&self, coords: Tensor) -> SkeletonSequence {
        debug_assert_eq!(coords.shape()[1..], self.coords.shape()[1..]);
        SkeletonSequence {
            sample_id: self.sample_id.clone(),
            label: self.label,
            coords,
        }
    }

    pub fn to_text(&self) -> String {
        let (t, n, c) = (self.n_frames(), self.n_joints(), self.channels());
        let mut out = String::with_capacity(t * n * c * 12 + 64);
        writeln!(out, "skseq v1").unwrap();
        writeln!(out, "frames {}", t).unwrap();
        writeln!(out, "joints {}", n).unwrap();
        writeln!(out, "channels {}", c).unwrap();
        writeln!(out, "label {}", self.label).unwrap();
        writeln!(out, "id {}", self.sample_id).unwrap();
        for frame in 0..t {
            writeln!(out, "# frame {}", frame).unwrap();
            for joint in 0..n {
                let row: Vec<String> = self.point(frame, joint).iter().map(|v| format!("{:?}", v)).collect();
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, strip_comment(l)))
            .filter(|(_, l)| !l.is_empty());

        let mut header = |key: &str| -> Result<(usize, String)> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("missing `{}` header", key)))?;
            match line.split_once(char::is_whitespace) {
                Some((k, v)) if k == key => Ok((no, v.trim().to_string())),
                _ => Err(Error::parse(no, format!("expected `{} ...`, got `{}`", key, line))),
            }
        };
        let (no, magic) = header("skseq")?;
        if magic != "v1" {
            return Err(Error::parse(no, format!("unsupported sequence version `{}`", magic)));
        }
        let (no, v) = header("frames")?;
        let t = parse_usize(&v, no)?;
        let (no, v) = header("joints")?;
        let n = parse_usize(&v, no)?;
        let (no, v) = header("channels")?;
        let c = parse_usize(&v, no)?;
        if !(c == 2 || c == 3) || t == 0 || n == 0 {
            return Err(Error::parse(no, "frames and joints must be positive and channels 2 or 3"));
        }
        let (no, v) = header("label")?;
        let label = parse_usize(&v, no)?;
        let (no, id) = header("id")?;
        validate_id(&id).map_err(|e| Error::parse(no, e.to_string()))?;

        let mut data = Vec::with_capacity(t * n * c);
        let mut last_line = no;
        for (no, line) in lines {
            last_line = no;
            if data.len() == t * n * c {
                return Err(Error::parse(no, format!("more than {} frames of {} joints", t, n)));
            }
            let before = data.len();
            for field in line.split_whitespace() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::parse(no, format!("invalid number `{}`", field)))?;
                if !v.is_finite() {
                    return Err(Error::parse(no, format!("non-finite value `{}`", field)));
                }
                data.push(v);
            }
            if data.len() - before != c {
                return Err(Error::parse(no, format!("expected {} values per joint", c)));
            }
        }
        if data.len() != t * n * c {
            return Err(Error::parse(
                last_line,
                format!(
                    "declared {} frames but found {} joint rows for {} joints",
                    t,
                    data.len() / c,
                    n
                ),
            ));
        }
        SkeletonSequence::new(id, label, Tensor::new(vec![t, n, c], data)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn validate_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|ch| ch.is_ascii_alphanumeric() || matches!(ch, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::contract(format!(
            "sample id `{}` must be non-empty ASCII letters, digits, '-', '_' or '.'",
            id
        )))
    }
}
