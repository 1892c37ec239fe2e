use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::train::Prediction;

/// Samples model A gets right and model B gets wrong, by true class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffReport {
    pub class_names: Vec<String>,
    pub per_class: Vec<usize>,
    pub total: usize,
    /// Nonzero `(class, count)` pairs by count descending, then class
    /// ascending; at most `top_m` entries.
    pub top: Vec<(usize, usize)>,
}

impl DiffReport {
    /// CSV text `rank,class,name,count` of the top slice.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,class,name,count\n");
        for (rank, &(class, count)) in self.top.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", rank + 1, class, self.class_names[class], count));
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub fn misclassification_diff(
    preds_a: &[Prediction],
    preds_b: &[Prediction],
    class_names: &[String],
    top_m: usize,
) -> Result<DiffReport> {
    let index_b = index_by_id(preds_b, "b")?;
    let index_a = index_by_id(preds_a, "a")?;
    if index_a.len() != index_b.len() || index_a.keys().any(|id| !index_b.contains_key(id)) {
        return Err(Error::contract("prediction files cover different sample sets"));
    }
    let classes = class_names.len();
    let mut per_class = vec![0; classes];
    for a in preds_a {
        let b = index_b[a.sample_id.as_str()];
        if a.true_label != b.true_label {
            return Err(Error::contract(format!(
                "sample `{}` has true label {} in one file and {} in the other",
                a.sample_id, a.true_label, b.true_label
            )));
        }
        if a.true_label >= classes || a.predicted_label >= classes || b.predicted_label >= classes {
            return Err(Error::contract(format!(
                "sample `{}` refers to a class outside the {} known",
                a.sample_id, classes
            )));
        }
        if a.predicted_label == a.true_label && b.predicted_label != b.true_label {
            per_class[a.true_label] += 1;
        }
    }
    let mut top: Vec<(usize, usize)> = per_class.iter().copied().enumerate().filter(|&(_, c)| c > 0).collect();
    top.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
    top.truncate(top_m);
    Ok(DiffReport {
        class_names: class_names.to_vec(),
        total: per_class.iter().sum(),
        per_class,
        top,
    })
}

fn index_by_id<'a>(preds: &'a [Prediction], which: &str) -> Result<HashMap<&'a str, &'a Prediction>> {
    let mut map = HashMap::with_capacity(preds.len());
    for p in preds {
        if map.insert(p.sample_id.as_str(), p).is_some() {
            return Err(Error::contract(format!(
                "sample `{}` appears twice in predictions {}",
                p.sample_id, which
            )));
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(id: &str, t: usize, pred: usize) -> Prediction {
        Prediction {
            sample_id: id.to_string(),
            true_label: t,
            predicted_label: pred,
        }
    }

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{}", i)).collect()
    }

    #[test]
    fn identical_files_give_zero() {
        let a = vec![p("x", 0, 1), p("y", 1, 1)];
        let r = misclassification_diff(&a, &a, &names(2), 15).unwrap();
        assert_eq!(r.total, 0);
        assert_eq!(r.per_class, vec![0, 0]);
        assert!(r.top.is_empty());
        assert_eq!(r.to_csv(), "rank,class,name,count\n");
    }

    #[test]
    fn all_right_against_all_wrong() {
        let a: Vec<_> = (0..10).map(|i| p(&format!("s{}", i), i % 3, i % 3)).collect();
        let b: Vec<_> = (0..10).map(|i| p(&format!("s{}", i), i % 3, (i + 1) % 3)).collect();
        let r = misclassification_diff(&a, &b, &names(3), 15).unwrap();
        assert_eq!(r.total, 10);
        assert_eq!(r.per_class, vec![4, 3, 3]);
        assert_eq!(r.top, vec![(0, 4), (1, 3), (2, 3)]);
    }

    #[test]
    fn crafted_three_class_case() {
        // class 0: two gained, one lost; class 1: one gained; class 2: none.
        let a = vec![p("a", 0, 0), p("b", 0, 0), p("c", 0, 2), p("d", 1, 1), p("e", 2, 2), p("f", 2, 0)];
        let b = vec![p("b", 0, 1), p("a", 0, 2), p("c", 0, 0), p("d", 1, 0), p("e", 2, 2), p("f", 2, 1)];
        let r = misclassification_diff(&a, &b, &names(3), 2).unwrap();
        assert_eq!(r.per_class, vec![2, 1, 0]);
        assert_eq!(r.total, 3);
        assert_eq!(r.top, vec![(0, 2), (1, 1)]);
        assert_eq!(r.to_csv(), "rank,class,name,count\n1,0,c0,2\n2,1,c1,1\n");
    }

    #[test]
    fn mismatched_sets_are_rejected() {
        let a = vec![p("a", 0, 0), p("b", 1, 1)];
        let b = vec![p("a", 0, 0), p("c", 1, 1)];
        assert!(matches!(misclassification_diff(&a, &b, &names(2), 15), Err(Error::Contract(_))));
        let short = vec![p("a", 0, 0)];
        assert!(misclassification_diff(&a, &short, &names(2), 15).is_err());
        let relabelled = vec![p("a", 1, 0), p("b", 1, 1)];
        assert!(misclassification_diff(&a, &relabelled, &names(2), 15).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(rows in proptest::collection::vec((0usize..4, 0usize..4, 0usize..4), 0..40)) {
            let a: Vec<_> = rows.iter().enumerate().map(|(i, &(t, pa, _))| p(&format!("s{}", i), t, pa)).collect();
            let b: Vec<_> = rows.iter().enumerate().rev().map(|(i, &(t, _, pb))| p(&format!("s{}", i), t, pb)).collect();
            let r = misclassification_diff(&a, &b, &names(4), 15).unwrap();
            for k in 0..4 {
                let brute = rows.iter().filter(|&&(t, pa, pb)| t == k && pa == t && pb != t).count();
                prop_assert_eq!(r.per_class[k], brute);
            }
            prop_assert_eq!(r.total, r.per_class.iter().sum::<usize>());
            prop_assert!(r.top.iter().all(|&(k, c)| c > 0 && r.per_class[k] == c));
            prop_assert!(misclassification_diff(&a, &a, &names(4), 15).unwrap().total == 0);
        }
    }
}
