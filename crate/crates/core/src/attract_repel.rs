//! Initial specialization of the seen-word subspace.
//!
//! Synonym pairs are pulled together and antonym pairs pushed apart relative
//! to in-batch negative examples, subject to an L2 anchor that keeps each
//! vector close to where it started:
//!
//! ```text
//! A(B_A) = Σ τ(δ_att + x_l·t_l − x_l·x_r) + τ(δ_att + x_r·t_r − x_l·x_r)
//! R(B_R) = Σ τ(δ_rep + x_l·x_r − x_l·t_l) + τ(δ_rep + x_l·x_r − x_r·t_r)
//! Reg    = Σ λ_reg ‖x̂ − x‖₂   over distinct words in B_A ∪ B_R
//! C      = A + R + Reg
//! ```
//!
//! with `τ(z) = max(0, z)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constraints::ConstraintSet;
use crate::math::{axpy, dot, norm, Matrix};
use crate::nn::{apply_update, OptimizerKind};
use crate::space::{SeenVocab, VectorSpace};
use crate::{Error, Result};

#[inline]
fn rectifier(z: f64) -> f64 {
    z.max(0.0)
}

/// Which in-batch vector serves as the negative example of a pair member.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeRule {
    /// Highest cosine to the member.
    MostSimilar,
    /// Lowest cosine to the member.
    LeastSimilar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArConfig {
    pub delta_att: f64,
    pub delta_rep: f64,
    pub lambda_reg: f64,
    /// synonym pairs per batch
    pub k1: usize,
    /// antonym pairs per batch
    pub k2: usize,
    pub epochs: usize,
    pub rule: OptimizerKind,
    /// Unit-normalize seen vectors before training and after every update.
    pub normalize_first: bool,
    pub attract_negatives: NegativeRule,
    pub repel_negatives: NegativeRule,
    pub seed: u64,
}

impl Default for ArConfig {
    fn default() -> Self {
        ArConfig {
            delta_att: 0.6,
            delta_rep: 0.0,
            lambda_reg: 1e-9,
            k1: 50,
            k2: 50,
            epochs: 10,
            rule: OptimizerKind::sgd(0.05),
            normalize_first: true,
            attract_negatives: NegativeRule::MostSimilar,
            repel_negatives: NegativeRule::LeastSimilar,
            seed: 0,
        }
    }
}

impl ArConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k1 == 0 || self.k2 == 0 {
            return Err(Error::Config("batch sizes k1 and k2 must be at least 1".into()));
        }
        if !self.delta_att.is_finite() || !self.delta_rep.is_finite() {
            return Err(Error::Config("margins must be finite".into()));
        }
        if !(self.lambda_reg >= 0.0) || !self.lambda_reg.is_finite() {
            return Err(Error::Config("lambda_reg must be finite and non-negative".into()));
        }
        if !(self.rule.learning_rate() > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// A constraint pair together with its negative examples, by value.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPair {
    pub left_token: String,
    pub right_token: String,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub neg_left: Vec<f64>,
    pub neg_right: Vec<f64>,
}

fn attract_terms(l: &[f64], r: &[f64], tl: &[f64], tr: &[f64], delta: f64) -> (f64, f64) {
    let lr = dot(l, r);
    (delta + dot(l, tl) - lr, delta + dot(r, tr) - lr)
}

fn repel_terms(l: &[f64], r: &[f64], tl: &[f64], tr: &[f64], delta: f64) -> (f64, f64) {
    let lr = dot(l, r);
    (delta + lr - dot(l, tl), delta + lr - dot(r, tr))
}

pub fn attract_cost(batch: &[BatchPair], delta_att: f64) -> f64 {
    batch
        .iter()
        .map(|p| {
            let (a, b) = attract_terms(&p.left, &p.right, &p.neg_left, &p.neg_right, delta_att);
            rectifier(a) + rectifier(b)
        })
        .sum()
}

pub fn repel_cost(batch: &[BatchPair], delta_rep: f64) -> f64 {
    batch
        .iter()
        .map(|p| {
            let (a, b) = repel_terms(&p.left, &p.right, &p.neg_left, &p.neg_right, delta_rep);
            rectifier(a) + rectifier(b)
        })
        .sum()
}

/// `Σ λ ‖current − original‖₂` over distinct tokens. A token listed more than
/// once counts once; both sides must name the same tokens.
pub fn regularization_cost(
    current: &[(&str, &[f64])],
    original: &[(&str, &[f64])],
    lambda_reg: f64,
) -> Result<f64> {
    let cur: BTreeMap<&str, &[f64]> = current.iter().rev().copied().collect();
    let orig: BTreeMap<&str, &[f64]> = original.iter().rev().copied().collect();
    if cur.len() != orig.len() || cur.keys().zip(orig.keys()).any(|(a, b)| a != b) {
        let missing = cur
            .keys()
            .find(|k| !orig.contains_key(*k))
            .or_else(|| orig.keys().find(|k| !cur.contains_key(*k)))
            .copied()
            .unwrap_or("");
        return Err(Error::UnknownToken(missing.into()));
    }
    let mut total = 0.0;
    for (tok, c) in &cur {
        let o = orig[tok];
        if c.len() != o.len() {
            return Err(Error::Shape(format!("vectors of `{tok}` differ in length")));
        }
        let diff: Vec<f64> = c.iter().zip(o).map(|(a, b)| a - b).collect();
        total += lambda_reg * norm(&diff);
    }
    Ok(total)
}

/// For every `(left, right)` pair of pool indices, picks the negative of each
/// member from the pool with `rule`, never choosing either member of the pair
/// itself. Ties go to the smaller pool index.
pub fn select_negative_examples(
    pairs: &[(usize, usize)],
    pool: &Matrix,
    rule: NegativeRule,
) -> Result<Vec<(usize, usize)>> {
    if pool.rows() < 3 {
        return Err(Error::Empty("negative selection needs at least 3 pool vectors"));
    }
    let norms: Vec<f64> = pool.iter_rows().map(norm).collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::InvalidValue(format!("pool vector {i} is zero")));
    }
    let pick = |member: usize, exclude: (usize, usize)| -> usize {
        let m = pool.row(member);
        let mut best = usize::MAX;
        let mut best_score = 0.0;
        for j in 0..pool.rows() {
            if j == exclude.0 || j == exclude.1 {
                continue;
            }
            let c = dot(m, pool.row(j)) / (norms[member] * norms[j]);
            let better = match rule {
                NegativeRule::MostSimilar => c > best_score,
                NegativeRule::LeastSimilar => c < best_score,
            };
            if best == usize::MAX || better {
                best = j;
                best_score = c;
            }
        }
        best
    };
    pairs
        .iter()
        .map(|&(l, r)| {
            if l >= pool.rows() || r >= pool.rows() {
                return Err(Error::Shape(format!("pair ({l}, {r}) is outside the pool")));
            }
            Ok((pick(l, (l, r)), pick(r, (l, r))))
        })
        .collect()
}

/// Row indices into a [`Batch`]'s vector table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairIndex {
    pub left: usize,
    pub right: usize,
    pub neg_left: usize,
    pub neg_right: usize,
}

/// One mini-batch: the distinct words of `B_A ∪ B_R`, their current and
/// original vectors, and the pairs with their negatives as row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub tokens: Vec<String>,
    pub vectors: Matrix,
    pub originals: Matrix,
    pub synonyms: Vec<PairIndex>,
    pub antonyms: Vec<PairIndex>,
}

/// Cost components of one batch or one epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CostBreakdown {
    pub attract: f64,
    pub repel: f64,
    pub regularization: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.attract + self.repel + self.regularization
    }

    fn add(&mut self, other: &CostBreakdown) {
        self.attract += other.attract;
        self.repel += other.repel;
        self.regularization += other.regularization;
    }
}

impl Batch {
    /// Gathers a batch from a table of word vectors. `synonyms` and
    /// `antonyms` hold table row ids; negatives are selected within the
    /// batch's distinct words.
    pub fn assemble(
        tokens: &[String],
        table: &Matrix,
        originals: &Matrix,
        synonyms: &[(usize, usize)],
        antonyms: &[(usize, usize)],
        config: &ArConfig,
    ) -> Result<Batch> {
        let mut local: BTreeMap<usize, usize> = BTreeMap::new();
        let mut order = Vec::new();
        for &(l, r) in synonyms.iter().chain(antonyms) {
            for id in [l, r] {
                local.entry(id).or_insert_with(|| {
                    order.push(id);
                    order.len() - 1
                });
            }
        }
        let vectors = table.select_rows(&order);
        let to_local = |ps: &[(usize, usize)]| -> Vec<(usize, usize)> {
            ps.iter().map(|(l, r)| (local[l], local[r])).collect()
        };
        let syn_local = to_local(synonyms);
        let ant_local = to_local(antonyms);
        let syn_neg = select_negative_examples(&syn_local, &vectors, config.attract_negatives)?;
        let ant_neg = select_negative_examples(&ant_local, &vectors, config.repel_negatives)?;
        let zip = |ps: Vec<(usize, usize)>, ns: Vec<(usize, usize)>| -> Vec<PairIndex> {
            ps.into_iter()
                .zip(ns)
                .map(|((left, right), (neg_left, neg_right))| PairIndex {
                    left,
                    right,
                    neg_left,
                    neg_right,
                })
                .collect()
        };
        Ok(Batch {
            tokens: order.iter().map(|&i| tokens[i].clone()).collect(),
            originals: originals.select_rows(&order),
            vectors,
            synonyms: zip(syn_local, syn_neg),
            antonyms: zip(ant_local, ant_neg),
        })
    }

    fn pairs_by_value(&self, pairs: &[PairIndex]) -> Vec<BatchPair> {
        let v = |i: usize| self.vectors.row(i).to_vec();
        pairs
            .iter()
            .map(|p| BatchPair {
                left_token: self.tokens[p.left].clone(),
                right_token: self.tokens[p.right].clone(),
                left: v(p.left),
                right: v(p.right),
                neg_left: v(p.neg_left),
                neg_right: v(p.neg_right),
            })
            .collect()
    }

    pub fn synonym_pairs(&self) -> Vec<BatchPair> {
        self.pairs_by_value(&self.synonyms)
    }

    pub fn antonym_pairs(&self) -> Vec<BatchPair> {
        self.pairs_by_value(&self.antonyms)
    }

    /// Cost of the batch evaluated at `vectors` (same layout as `self.vectors`).
    pub fn cost_at(&self, vectors: &Matrix, config: &ArConfig) -> CostBreakdown {
        self.cost_and_grad_at(vectors, config, false).0
    }

    /// Cost of the batch and its subgradient with respect to every row of
    /// `vectors`, holding the negative assignment fixed.
    pub fn cost_and_grad_at(
        &self,
        vectors: &Matrix,
        config: &ArConfig,
        want_grad: bool,
    ) -> (CostBreakdown, Matrix) {
        let mut grad = if want_grad {
            Matrix::zeros(vectors.rows(), vectors.cols())
        } else {
            Matrix::zeros(0, 0)
        };
        let mut cost = CostBreakdown::default();
        // accumulate `alpha * vectors[src]` into grad[dst]
        let acc = |grad: &mut Matrix, dst: usize, alpha: f64, src: usize| {
            if want_grad {
                axpy(alpha, vectors.row(src), grad.row_mut(dst));
            }
        };
        for p in &self.synonyms {
            let (l, r, tl, tr) = (
                vectors.row(p.left),
                vectors.row(p.right),
                vectors.row(p.neg_left),
                vectors.row(p.neg_right),
            );
            let (a, b) = attract_terms(l, r, tl, tr, config.delta_att);
            cost.attract += rectifier(a) + rectifier(b);
            if a > 0.0 {
                acc(&mut grad, p.left, 1.0, p.neg_left);
                acc(&mut grad, p.left, -1.0, p.right);
                acc(&mut grad, p.neg_left, 1.0, p.left);
                acc(&mut grad, p.right, -1.0, p.left);
            }
            if b > 0.0 {
                acc(&mut grad, p.right, 1.0, p.neg_right);
                acc(&mut grad, p.right, -1.0, p.left);
                acc(&mut grad, p.neg_right, 1.0, p.right);
                acc(&mut grad, p.left, -1.0, p.right);
            }
        }
        for p in &self.antonyms {
            let (l, r, tl, tr) = (
                vectors.row(p.left),
                vectors.row(p.right),
                vectors.row(p.neg_left),
                vectors.row(p.neg_right),
            );
            let (a, b) = repel_terms(l, r, tl, tr, config.delta_rep);
            cost.repel += rectifier(a) + rectifier(b);
            if a > 0.0 {
                acc(&mut grad, p.left, 1.0, p.right);
                acc(&mut grad, p.left, -1.0, p.neg_left);
                acc(&mut grad, p.right, 1.0, p.left);
                acc(&mut grad, p.neg_left, -1.0, p.left);
            }
            if b > 0.0 {
                acc(&mut grad, p.left, 1.0, p.right);
                acc(&mut grad, p.right, 1.0, p.left);
                acc(&mut grad, p.right, -1.0, p.neg_right);
                acc(&mut grad, p.neg_right, -1.0, p.right);
            }
        }
        for i in 0..vectors.rows() {
            let diff: Vec<f64> = vectors
                .row(i)
                .iter()
                .zip(self.originals.row(i))
                .map(|(a, b)| a - b)
                .collect();
            let n = norm(&diff);
            cost.regularization += config.lambda_reg * n;
            if want_grad && n > 0.0 {
                axpy(config.lambda_reg / n, &diff, grad.row_mut(i));
            }
        }
        (cost, grad)
    }
}

/// `A(B_A) + R(B_R) + Reg(B_A, B_R)` at the batch's current vectors.
pub fn total_cost(batch: &Batch, config: &ArConfig) -> f64 {
    batch.cost_at(&batch.vectors, config).total()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub cost: CostBreakdown,
    pub batches: usize,
    /// batches with fewer than three distinct words
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArOutcome {
    /// Specialized vectors of the seen words, in [`SeenVocab`] order.
    pub specialized: VectorSpace,
    pub epochs: Vec<EpochReport>,
}

fn normalize_in_place(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        for x in v {
            *x /= n;
        }
    }
}

fn pair_ids(
    pairs: &alloc::collections::BTreeSet<crate::constraints::WordPair>,
    ids: &BTreeMap<&str, usize>,
) -> Result<Vec<(usize, usize)>> {
    pairs
        .iter()
        .map(|p| {
            let id = |t: &str| ids.get(t).copied().ok_or_else(|| Error::UnknownToken(t.into()));
            Ok((id(p.first())?, id(p.second())?))
        })
        .collect()
}

/// Specializes the vectors of `seen` words with mini-batch subgradient
/// descent on the attract/repel cost.
///
/// Each epoch shuffles both relations with the seeded generator and walks
/// them in step: batch `b` takes synonym pairs `[b·k1, (b+1)·k1)` and antonym
/// pairs `[b·k2, (b+1)·k2)`, so the last batches may be partial or hold only
/// one relation. Batches with fewer than three distinct words have no valid
/// negative and are skipped. The reported epoch cost sums each batch's cost
/// just before its update.
pub fn run_attract_repel(
    space: &VectorSpace,
    cs: &ConstraintSet,
    seen: &SeenVocab,
    config: &ArConfig,
) -> Result<ArOutcome> {
    config.validate()?;
    if cs.synonyms().is_empty() {
        return Err(Error::Empty("attract-repel needs at least one synonym pair"));
    }
    let seen_space = space.restrict(seen.iter())?;
    let tokens: Vec<String> = seen_space.words().to_vec();
    let ids: BTreeMap<&str, usize> = tokens.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut syn = pair_ids(cs.synonyms(), &ids)?;
    let mut ant = pair_ids(cs.antonyms(), &ids)?;

    let mut table = seen_space.matrix().clone();
    if config.normalize_first {
        for (i, token) in tokens.iter().enumerate() {
            if norm(table.row(i)) == 0.0 {
                return Err(Error::ZeroNorm(token.clone()));
            }
            normalize_in_place(table.row_mut(i));
        }
    }
    let originals = table.clone();
    let dim = table.cols();
    let stateful = !matches!(config.rule, OptimizerKind::Sgd { .. });
    let mut first = vec![Vec::new(); table.rows()];
    let mut second = vec![Vec::new(); table.rows()];
    let mut steps = vec![0u64; table.rows()];

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut reports = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        syn.shuffle(&mut rng);
        ant.shuffle(&mut rng);
        let n_batches = syn.len().div_ceil(config.k1).max(ant.len().div_ceil(config.k2));
        let mut report = EpochReport {
            epoch,
            ..EpochReport::default()
        };
        for b in 0..n_batches {
            let chunk = |v: &[(usize, usize)], k: usize| -> Vec<(usize, usize)> {
                v.iter().skip(b * k).take(k).copied().collect()
            };
            let bs = chunk(&syn, config.k1);
            let ba = chunk(&ant, config.k2);
            let batch = match Batch::assemble(&tokens, &table, &originals, &bs, &ba, config) {
                Ok(batch) => batch,
                Err(Error::Empty(_)) => {
                    report.skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let (cost, grad) = batch.cost_and_grad_at(&batch.vectors, config, true);
            report.cost.add(&cost);
            report.batches += 1;
            let ids_in_batch: Vec<usize> = batch.tokens.iter().map(|t| ids[t.as_str()]).collect();
            for (local, &id) in ids_in_batch.iter().enumerate() {
                if stateful && first[id].is_empty() {
                    first[id] = vec![0.0; dim];
                    second[id] = vec![0.0; dim];
                }
                steps[id] += 1;
                apply_update(
                    config.rule,
                    table.row_mut(id),
                    grad.row(local),
                    &mut first[id],
                    &mut second[id],
                    steps[id],
                );
                if config.normalize_first {
                    normalize_in_place(table.row_mut(id));
                }
            }
        }
        reports.push(report);
    }
    Ok(ArOutcome {
        specialized: seen_space.with_matrix(table)?,
        epochs: reports,
    })
}
