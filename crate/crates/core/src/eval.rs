//! Word-similarity evaluation with Spearman's rank correlation.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::space::{cosine, VectorSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityRecord {
    pub first: String,
    pub second: String,
    pub gold: f64,
}

/// Human similarity ratings for word pairs. Pairs are unordered and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityDataset {
    name: String,
    records: Vec<SimilarityRecord>,
}

impl SimilarityDataset {
    pub fn new(name: impl Into<String>, records: Vec<SimilarityRecord>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &records {
            if !r.gold.is_finite() {
                return Err(Error::InvalidValue(alloc::format!(
                    "non-finite score for ({}, {})",
                    r.first,
                    r.second
                )));
            }
            let key = if r.first <= r.second {
                (r.first.as_str(), r.second.as_str())
            } else {
                (r.second.as_str(), r.first.as_str())
            };
            if !seen.insert(key) {
                return Err(Error::DuplicatePair(r.first.clone(), r.second.clone()));
            }
        }
        Ok(SimilarityDataset {
            name: name.into(),
            records,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn records(&self) -> &[SimilarityRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Every word that appears in some record.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        self.records
            .iter()
            .flat_map(|r| [r.first.clone(), r.second.clone()])
            .collect()
    }
}

/// Union of the vocabularies of several datasets.
pub fn eval_vocabulary<'a>(datasets: impl IntoIterator<Item = &'a SimilarityDataset>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for ds in datasets {
        out.extend(ds.vocabulary());
    }
    out
}

/// 1-based ranks with ties sharing the mean of the positions they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = alloc::vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        // positions i..j hold equal values; their 1-based ranks are i+1..=j
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("rank correlation of a constant list"));
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Spearman's ρ: the Pearson correlation of average ranks.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(alloc::format!(
            "lists have lengths {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Empty("spearman needs at least two observations"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue("non-finite observation".into()));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityReport {
    pub dataset: String,
    pub rho: f64,
    pub pairs_used: usize,
    pub pairs_total: usize,
    pub coverage: f64,
}

/// Model scores (cosines) for the records whose words are both in `space`,
/// together with the matching gold scores.
pub fn scored_pairs(space: &VectorSpace, ds: &SimilarityDataset) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut model = Vec::new();
    let mut gold = Vec::new();
    for r in ds.records() {
        if let (Some(a), Some(b)) = (space.vector(&r.first), space.vector(&r.second)) {
            model.push(cosine(a, b)?);
            gold.push(r.gold);
        }
    }
    Ok((model, gold))
}

/// Spearman's ρ between cosine similarity and gold ratings. Records with an
/// out-of-vocabulary word are left out and reflected in `coverage`.
pub fn evaluate_similarity(space: &VectorSpace, ds: &SimilarityDataset) -> Result<SimilarityReport> {
    let (model, gold) = scored_pairs(space, ds)?;
    if model.len() < 2 {
        return Err(Error::Empty("fewer than two in-vocabulary pairs"));
    }
    Ok(SimilarityReport {
        dataset: ds.name().into(),
        rho: spearman_rho(&model, &gold)?,
        pairs_used: model.len(),
        pairs_total: ds.len(),
        coverage: model.len() as f64 / ds.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn rec(a: &str, b: &str, g: f64) -> SimilarityRecord {
        SimilarityRecord {
            first: a.into(),
            second: b.into(),
            gold: g,
        }
    }

    #[test]
    fn hand_cases() {
        assert!((spearman_rho(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman_rho(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]).unwrap() + 1.0).abs() < 1e-15);
        let r = spearman_rho(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        // ranks (1, 2.5, 2.5, 4) against (1, 3, 2, 4): ρ = 4.5 / √22.5 = 3/√10
        assert!((r - 3.0 / libm::sqrt(10.0)).abs() < 1e-12, "{r}");
    }

    #[test]
    fn rank_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(spearman_rho(&[1.0], &[1.0]).is_err());
        assert!(spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(spearman_rho(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn duplicate_pair_rejected() {
        let e = SimilarityDataset::new("d", vec![rec("a", "b", 1.0), rec("b", "a", 2.0)]).unwrap_err();
        assert_eq!(e, Error::DuplicatePair("b".into(), "a".into()));
    }

    fn space() -> VectorSpace {
        VectorSpace::from_records(vec![
            ("a".into(), vec![1.0, 0.0]),
            ("b".into(), vec![0.9, 0.1]),
            ("c".into(), vec![0.5, 0.5]),
            ("d".into(), vec![0.0, 1.0]),
        ])
        .unwrap()
        .0
    }

    #[test]
    fn gold_in_cosine_order() {
        let ds = SimilarityDataset::new(
            "t",
            vec![rec("a", "b", 9.0), rec("a", "c", 5.0), rec("a", "d", 0.5)],
        )
        .unwrap();
        let r = evaluate_similarity(&space(), &ds).unwrap();
        assert!((r.rho - 1.0).abs() < 1e-15);
        assert_eq!((r.pairs_used, r.pairs_total), (3, 3));
    }

    #[test]
    fn oov_excluded() {
        let ds = SimilarityDataset::new(
            "t",
            vec![rec("a", "b", 9.0), rec("a", "zzz", 5.0), rec("a", "d", 0.5)],
        )
        .unwrap();
        let r = evaluate_similarity(&space(), &ds).unwrap();
        assert_eq!(r.pairs_used, 2);
        assert!((r.coverage - 2.0 / 3.0).abs() < 1e-15);

        let one = SimilarityDataset::new("t", vec![rec("a", "b", 1.0), rec("x", "y", 2.0)]).unwrap();
        assert!(evaluate_similarity(&space(), &one).is_err());
    }

    proptest! {
        #[test]
        fn monotone_invariance(xs in prop::collection::vec(-3.0f64..3.0, 3..30), seed in any::<u64>()) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * ((seed >> (i % 60)) & 3) as f64 - i as f64).collect();
            if let Ok(r) = spearman_rho(&xs, &ys) {
                let ex: Vec<f64> = xs.iter().map(|v| libm::exp(*v)).collect();
                prop_assert!((spearman_rho(&ex, &ys).unwrap() - r).abs() < 1e-12);
                prop_assert!((spearman_rho(&ys, &xs).unwrap() - r).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }

        #[test]
        fn negation_flips_sign(xs in prop::collection::btree_set(-1000i32..1000, 2..30)) {
            let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * 0.5 + ((i * 7919) % 13) as f64 * 10.0).collect();
            if let Ok(r) = spearman_rho(&xs, &ys) {
                let neg: Vec<f64> = ys.iter().map(|v| -v).collect();
                prop_assert!((spearman_rho(&xs, &neg).unwrap() + r).abs() < 1e-12);
            }
        }
    }
}
