//! Synthetic tasks with known ground truth.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::constraints::{ConstraintSet, SourceTag};
use crate::eval::{SimilarityDataset, SimilarityRecord};
use crate::math::{norm, orthogonal_factor, Matrix};
use crate::space::VectorSpace;
use crate::{Error, Result};

/// Ground-truth affine map `x ↦ Qx + translation` with `Q` orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTruth {
    pub q: Matrix,
    pub translation: Vec<f64>,
}

impl LinearTruth {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.q.matvec(x);
        for (v, t) in y.iter_mut().zip(&self.translation) {
            *v += t;
        }
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTask {
    pub space: VectorSpace,
    pub constraints: ConstraintSet,
    /// target vectors for mapping tasks, row-aligned with `space`
    pub targets: Option<VectorSpace>,
    pub truth: Option<LinearTruth>,
    /// planted synonym clusters, one token list per cluster
    pub clusters: Vec<Vec<String>>,
    pub seed: u64,
}

impl SynthTask {
    /// Every pair of clustered words with gold score 1 inside a cluster and 0
    /// across clusters.
    pub fn planted_benchmark(&self) -> Result<SimilarityDataset> {
        let words: Vec<(usize, &String)> = self
            .clusters
            .iter()
            .enumerate()
            .flat_map(|(k, c)| c.iter().map(move |w| (k, w)))
            .collect();
        let mut records = Vec::new();
        for (i, (ka, a)) in words.iter().enumerate() {
            for (kb, b) in &words[i + 1..] {
                records.push(SimilarityRecord {
                    first: (*a).clone(),
                    second: (*b).clone(),
                    gold: if ka == kb { 1.0 } else { 0.0 },
                });
            }
        }
        SimilarityDataset::new("planted", records)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterParams {
    pub n_clusters: usize,
    pub words_per_cluster: usize,
    pub dim: usize,
    /// standard deviation of the per-coordinate noise added to centroids
    pub noise: f64,
    /// antonym pairs sampled between each pair of clusters
    pub antonyms_per_cluster_pair: usize,
    /// extra words outside every constraint
    pub distractors: usize,
    pub seed: u64,
}

impl ClusterParams {
    pub fn new(n_clusters: usize, words_per_cluster: usize, dim: usize, noise: f64, seed: u64) -> Self {
        ClusterParams {
            n_clusters,
            words_per_cluster,
            dim,
            noise,
            antonyms_per_cluster_pair: 2,
            distractors: 4,
            seed,
        }
    }
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniform draw from the unit sphere.
fn unit_vec<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let mut v = gaussian_vec(rng, dim);
        let n = norm(&v);
        if n > 1e-12 {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
}

/// Synonym clusters around random unit centroids, with within-cluster
/// synonym pairs and sampled cross-cluster antonym pairs.
pub fn make_cluster_task(n_clusters: usize, words_per_cluster: usize, dim: usize, noise: f64, seed: u64) -> Result<SynthTask> {
    make_cluster_task_with(&ClusterParams::new(n_clusters, words_per_cluster, dim, noise, seed))
}

pub fn make_cluster_task_with(p: &ClusterParams) -> Result<SynthTask> {
    if p.dim < 2 {
        return Err(Error::Config("cluster tasks need dim >= 2".into()));
    }
    if p.n_clusters == 0 || p.words_per_cluster < 2 {
        return Err(Error::Config("need at least one cluster of two or more words".into()));
    }
    if !(p.noise >= 0.0) || !p.noise.is_finite() {
        return Err(Error::Config("noise must be finite and non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut records = Vec::new();
    let mut clusters = Vec::with_capacity(p.n_clusters);
    for k in 0..p.n_clusters {
        let centroid = unit_vec(&mut rng, p.dim);
        let mut members = Vec::with_capacity(p.words_per_cluster);
        for i in 0..p.words_per_cluster {
            let token = format!("c{k}w{i}");
            let v: Vec<f64> = centroid
                .iter()
                .map(|c| c + p.noise * rng.sample::<f64, _>(StandardNormal))
                .collect();
            records.push((token.clone(), v));
            members.push(token);
        }
        clusters.push(members);
    }
    for i in 0..p.distractors {
        records.push((format!("x{i}"), unit_vec(&mut rng, p.dim)));
    }

    let mut synonyms = Vec::new();
    for c in &clusters {
        for (i, a) in c.iter().enumerate() {
            for b in &c[i + 1..] {
                synonyms.push((a.clone(), b.clone()));
            }
        }
    }
    let w = p.words_per_cluster;
    let per_pair = p.antonyms_per_cluster_pair.min(w * w);
    let mut antonyms = Vec::new();
    for a in 0..p.n_clusters {
        for b in a + 1..p.n_clusters {
            for cell in index::sample(&mut rng, w * w, per_pair) {
                antonyms.push((clusters[a][cell / w].clone(), clusters[b][cell % w].clone()));
            }
        }
    }

    let (space, _) = VectorSpace::from_records(records)?;
    Ok(SynthTask {
        space,
        constraints: ConstraintSet::from_relations(SourceTag::External, synonyms, antonyms),
        targets: None,
        truth: None,
        clusters,
        seed: p.seed,
    })
}

/// Random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<Matrix> {
    let g = Matrix::from_vec(dim, dim, gaussian_vec(rng, dim * dim))?;
    orthogonal_factor(&g)
}

/// Random unit vectors `x` paired with targets `Qx` for a random orthogonal
/// `Q`. Tokens are zero-padded so lexicographic order matches row order.
pub fn make_linear_task(n_words: usize, dim: usize, seed: u64) -> Result<SynthTask> {
    if dim < 2 {
        return Err(Error::Config("linear tasks need dim >= 2".into()));
    }
    if n_words == 0 {
        return Err(Error::Config("linear tasks need at least one word".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_orthogonal(&mut rng, dim)?;
    let truth = LinearTruth {
        q,
        translation: vec![0.0; dim],
    };
    let width = format!("{}", n_words - 1).len();
    let mut words = Vec::with_capacity(n_words);
    let mut xs = Vec::with_capacity(n_words * dim);
    let mut ys = Vec::with_capacity(n_words * dim);
    for i in 0..n_words {
        words.push(format!("w{i:0width$}"));
        let x = unit_vec(&mut rng, dim);
        ys.extend(truth.apply(&x));
        xs.extend(x);
    }
    let space = VectorSpace::new(words.clone(), Matrix::from_vec(n_words, dim, xs)?)?;
    let targets = VectorSpace::new(words, Matrix::from_vec(n_words, dim, ys)?)?;
    Ok(SynthTask {
        space,
        constraints: ConstraintSet::empty(SourceTag::External),
        targets: Some(targets),
        truth: Some(truth),
        clusters: Vec::new(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::cosine;

    #[test]
    fn zero_noise_clusters_are_exact() {
        let t = make_cluster_task(3, 4, 8, 0.0, 5).unwrap();
        for c in &t.clusters {
            let a = t.space.vector(&c[0]).unwrap();
            for w in &c[1..] {
                assert_eq!(cosine(a, t.space.vector(w).unwrap()).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn cluster_counts_and_determinism() {
        let t = make_cluster_task(4, 5, 16, 0.1, 9).unwrap();
        assert_eq!(t.constraints.synonyms().len(), 40);
        assert_eq!(t.constraints.antonyms().len(), 12);
        assert_eq!(t.space.len(), 24);
        assert_eq!(t, make_cluster_task(4, 5, 16, 0.1, 9).unwrap());
        assert_ne!(t.space, make_cluster_task(4, 5, 16, 0.1, 10).unwrap().space);
        for tok in t.constraints.tokens() {
            assert!(t.space.contains(&tok));
        }
        let bench = t.planted_benchmark().unwrap();
        assert_eq!(bench.len(), 190);
        assert_eq!(bench.records().iter().filter(|r| r.gold == 1.0).count(), 40);
    }

    #[test]
    fn degenerate_sizes_rejected() {
        assert!(make_cluster_task(4, 5, 1, 0.1, 0).is_err());
        assert!(make_cluster_task(0, 5, 4, 0.1, 0).is_err());
        assert!(make_cluster_task(2, 1, 4, 0.1, 0).is_err());
        assert!(make_linear_task(10, 1, 0).is_err());
    }

    #[test]
    fn linear_truth_is_orthogonal() {
        let t = make_linear_task(50, 12, 3).unwrap();
        let q = &t.truth.as_ref().unwrap().q;
        let qtq = q.transpose().matmul(q).unwrap();
        assert!(qtq.max_abs_diff(&Matrix::identity(12)) < 1e-9);
        let targets = t.targets.as_ref().unwrap();
        for i in 0..t.space.len() {
            assert!((norm(targets.row(i)) - norm(t.space.row(i))).abs() < 1e-9);
        }
        assert_eq!(t.space.words()[7], "w07");
    }

    #[test]
    fn random_rotation_decorrelates() {
        let t = make_linear_task(1000, 64, 11).unwrap();
        let targets = t.targets.unwrap();
        let mean: f64 = (0..1000)
            .map(|i| cosine(t.space.row(i), targets.row(i)).unwrap())
            .sum::<f64>()
            / 1000.0;
        assert!(mean.abs() < 0.05, "{mean}");
    }
}
