use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::SkeletonSequence;
use crate::error::{Error, Result};
use crate::graph::{parse_usize, strip_comment, JointGraphTopology};

pub const MANIFEST_FILE: &str = "manifest.skm";
pub const TOPOLOGY_FILE: &str = "topology.txt";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{}`", other)),
        }
    }
}

/// Parsed manifest file. Paths are as written (relative to the manifest's
/// directory unless absolute).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub class_names: Vec<String>,
    pub topology_path: PathBuf,
    pub samples: Vec<(Split, PathBuf)>,
}

impl DatasetManifest {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "skmanifest v1").unwrap();
        writeln!(out, "classes {}", self.class_names.len()).unwrap();
        for (k, name) in self.class_names.iter().enumerate() {
            writeln!(out, "class {} {}", k, name).unwrap();
        }
        writeln!(out, "topology {}", self.topology_path.display()).unwrap();
        for (split, path) in &self.samples {
            writeln!(out, "sample {} {}", split, path.display()).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut magic_seen = false;
        let mut n_classes = None;
        let mut names: Vec<Option<String>> = Vec::new();
        let mut topology_path = None;
        let mut samples = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let no = idx + 1;
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !magic_seen {
                if fields != ["skmanifest", "v1"] {
                    return Err(Error::parse(no, "expected `skmanifest v1` header"));
                }
                magic_seen = true;
                continue;
            }
            match fields.as_slice() {
                ["classes", k] if n_classes.is_none() => {
                    let k = parse_usize(k, no)?;
                    n_classes = Some(k);
                    names = vec![None; k];
                }
                ["class", k, name] if n_classes.is_some() => {
                    let k = parse_usize(k, no)?;
                    match names.get_mut(k) {
                        Some(slot @ None) => *slot = Some(name.to_string()),
                        Some(Some(_)) => return Err(Error::parse(no, format!("class {} named twice", k))),
                        None => return Err(Error::parse(no, format!("class index {} out of range", k))),
                    }
                }
                ["topology", path] if topology_path.is_none() => topology_path = Some(PathBuf::from(path)),
                ["sample", split, path] => {
                    let split = split.parse().map_err(|e: String| Error::parse(no, e))?;
                    samples.push((split, PathBuf::from(path)));
                }
                _ => return Err(Error::parse(no, format!("unexpected line `{}`", line))),
            }
        }
        if !magic_seen {
            return Err(Error::parse(0, "empty manifest"));
        }
        let class_names = names
            .into_iter()
            .enumerate()
            .map(|(k, n)| n.ok_or_else(|| Error::parse(0, format!("class {} has no name", k))))
            .collect::<Result<Vec<_>>>()?;
        if class_names.is_empty() {
            return Err(Error::parse(0, "manifest declares no classes"));
        }
        Ok(DatasetManifest {
            class_names,
            topology_path: topology_path.ok_or_else(|| Error::parse(0, "missing `topology` line"))?,
            samples,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Class names, topology, and the loaded train and test sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    class_names: Vec<String>,
    topology: JointGraphTopology,
    train: Vec<SkeletonSequence>,
    test: Vec<SkeletonSequence>,
}

impl Dataset {
    pub fn new(
        class_names: Vec<String>,
        topology: JointGraphTopology,
        train: Vec<SkeletonSequence>,
        test: Vec<SkeletonSequence>,
    ) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::contract("a dataset needs at least one class"));
        }
        if class_names.iter().any(|n| n.is_empty() || n.chars().any(char::is_whitespace)) {
            return Err(Error::contract("class names must be non-empty without whitespace"));
        }
        let mut ids = HashSet::new();
        let mut channels = None;
        for s in train.iter().chain(&test) {
            if s.n_joints() != topology.n_joints() {
                return Err(Error::contract(format!(
                    "sample `{}` has {} joints, topology has {}",
                    s.sample_id(),
                    s.n_joints(),
                    topology.n_joints()
                )));
            }
            if s.label() >= class_names.len() {
                return Err(Error::contract(format!(
                    "sample `{}` has label {} but only {} classes exist",
                    s.sample_id(),
                    s.label(),
                    class_names.len()
                )));
            }
            if *channels.get_or_insert(s.channels()) != s.channels() {
                return Err(Error::contract("samples disagree on coordinate channels"));
            }
            if !ids.insert(s.sample_id().to_string()) {
                return Err(Error::contract(format!("duplicate sample id `{}`", s.sample_id())));
            }
        }
        Ok(Dataset {
            class_names,
            topology,
            train,
            test,
        })
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn topology(&self) -> &JointGraphTopology {
        &self.topology
    }

    pub fn train(&self) -> &[SkeletonSequence] {
        &self.train
    }

    pub fn test(&self) -> &[SkeletonSequence] {
        &self.test
    }

    pub fn split(&self, split: Split) -> &[SkeletonSequence] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    /// Coordinate channels of the samples (3 when the dataset is empty).
    pub fn channels(&self) -> usize {
        self.train.iter().chain(&self.test).next().map_or(3, SkeletonSequence::channels)
    }

    /// Same samples with every sequence passed through `f`.
    pub fn map_sequences(
        &self,
        mut f: impl FnMut(Split, usize, &SkeletonSequence) -> Result<SkeletonSequence>,
    ) -> Result<Dataset> {
        let train = self
            .train
            .iter()
            .enumerate()
            .map(|(i, s)| f(Split::Train, i, s))
            .collect::<Result<_>>()?;
        let test = self
            .test
            .iter()
            .enumerate()
            .map(|(i, s)| f(Split::Test, i, s))
            .collect::<Result<_>>()?;
        Dataset::new(self.class_names.clone(), self.topology.clone(), train, test)
    }

    pub fn with_topology(&self, topology: JointGraphTopology) -> Result<Dataset> {
        Dataset::new(self.class_names.clone(), topology, self.train.clone(), self.test.clone())
    }

    /// Writes `manifest.skm`, `topology.txt` and one file per sample under
    /// `train/` and `test/`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        let mut samples = Vec::new();
        for split in [Split::Train, Split::Test] {
            std::fs::create_dir_all(dir.join(split.as_str()))?;
            for s in self.split(split) {
                let rel = PathBuf::from(split.as_str()).join(format!("{}.skseq", s.sample_id()));
                s.save(dir.join(&rel))?;
                samples.push((split, rel));
            }
        }
        self.topology.save(dir.join(TOPOLOGY_FILE))?;
        let manifest = DatasetManifest {
            class_names: self.class_names.clone(),
            topology_path: PathBuf::from(TOPOLOGY_FILE),
            samples,
        };
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, manifest.to_text())?;
        Ok(path)
    }

    /// Loads from a manifest file, or from a directory containing `manifest.skm`.
    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let manifest_path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        let manifest = DatasetManifest::load(&manifest_path)?;
        let topology = JointGraphTopology::load(base.join(&manifest.topology_path))?;
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (split, rel) in &manifest.samples {
            let seq = SkeletonSequence::load(base.join(rel))?;
            match split {
                Split::Train => train.push(seq),
                Split::Test => test.push(seq),
            }
        }
        Dataset::new(manifest.class_names, topology, train, test)
    }
}
