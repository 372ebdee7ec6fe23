//! Synonym and antonym constraint sets.
//!
//! Pairs are unordered and stored canonically (lexicographically smaller
//! token first). Merging two sets resolves contradictions in favour of
//! antonymy: a pair listed both ways ends up only among the antonyms.

use alloc::collections::BTreeSet;
use alloc::string::String;

use crate::space::{SeenVocab, VectorSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SourceTag {
    External,
    Babelnet,
    Merged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Synonym,
    Antonym,
}

/// Evaluation protocol for constraints that mention benchmark words.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    /// Drop every pair containing an evaluation word.
    Disjoint,
    /// Keep them.
    Overlap,
}

/// An unordered pair of distinct tokens.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WordPair(String, String);

impl WordPair {
    /// `None` for a self-pair.
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Option<Self> {
        let (a, b) = (a.into(), b.into());
        match a.cmp(&b) {
            core::cmp::Ordering::Less => Some(WordPair(a, b)),
            core::cmp::Ordering::Greater => Some(WordPair(b, a)),
            core::cmp::Ordering::Equal => None,
        }
    }

    pub fn first(&self) -> &str {
        &self.0
    }

    pub fn second(&self) -> &str {
        &self.1
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0 == token || self.1 == token
    }
}

/// Counts gathered while building a set from raw pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairStats {
    pub read: usize,
    pub kept: usize,
    pub self_pairs: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterStats {
    pub synonyms_in: usize,
    pub antonyms_in: usize,
    pub dropped_oov: usize,
    pub dropped_eval: usize,
    pub synonyms_out: usize,
    pub antonyms_out: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSet {
    synonyms: BTreeSet<WordPair>,
    antonyms: BTreeSet<WordPair>,
    source: SourceTag,
}

impl ConstraintSet {
    pub fn empty(source: SourceTag) -> Self {
        ConstraintSet {
            synonyms: BTreeSet::new(),
            antonyms: BTreeSet::new(),
            source,
        }
    }

    /// Builds a single-relation set from raw token pairs.
    pub fn from_pairs<I, S>(relation: Relation, source: SourceTag, pairs: I) -> (Self, PairStats)
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut set = BTreeSet::new();
        let mut stats = PairStats::default();
        for (a, b) in pairs {
            stats.read += 1;
            match WordPair::new(a, b) {
                None => stats.self_pairs += 1,
                Some(p) => {
                    if !set.insert(p) {
                        stats.duplicates += 1;
                    }
                }
            }
        }
        stats.kept = set.len();
        let mut cs = ConstraintSet::empty(source);
        match relation {
            Relation::Synonym => cs.synonyms = set,
            Relation::Antonym => cs.antonyms = set,
        }
        (cs, stats)
    }

    /// Builds a set from explicit synonym and antonym pairs, applying the
    /// antonymy-wins rule. Self-pairs are ignored.
    pub fn from_relations<I, J, S>(source: SourceTag, synonyms: I, antonyms: J) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        J: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let (syn, _) = ConstraintSet::from_pairs(Relation::Synonym, source, synonyms);
        let (ant, _) = ConstraintSet::from_pairs(Relation::Antonym, source, antonyms);
        merge_and_deconflict(&syn, &ant).0
    }

    pub fn synonyms(&self) -> &BTreeSet<WordPair> {
        &self.synonyms
    }

    pub fn antonyms(&self) -> &BTreeSet<WordPair> {
        &self.antonyms
    }

    pub fn source(&self) -> SourceTag {
        self.source
    }

    pub fn is_empty(&self) -> bool {
        self.synonyms.is_empty() && self.antonyms.is_empty()
    }

    /// All tokens mentioned by any pair.
    pub fn tokens(&self) -> BTreeSet<String> {
        self.synonyms
            .iter()
            .chain(&self.antonyms)
            .flat_map(|p| [p.0.clone(), p.1.clone()])
            .collect()
    }
}

/// Strips a two-letter language prefix such as `en_` from a token.
pub fn strip_language_prefix(token: &str) -> &str {
    let b = token.as_bytes();
    if b.len() > 3 && b[0].is_ascii_lowercase() && b[1].is_ascii_lowercase() && b[2] == b'_' {
        &token[3..]
    } else {
        token
    }
}

/// Unions both relations of `a` and `b`, then removes from the synonyms
/// every pair that is also an antonym. Returns the merged set and the
/// number of conflicting pairs removed.
pub fn merge_and_deconflict(a: &ConstraintSet, b: &ConstraintSet) -> (ConstraintSet, usize) {
    let antonyms: BTreeSet<WordPair> = a.antonyms.union(&b.antonyms).cloned().collect();
    let mut conflicts = 0;
    let synonyms = a
        .synonyms
        .union(&b.synonyms)
        .filter(|p| {
            let clash = antonyms.contains(*p);
            conflicts += clash as usize;
            !clash
        })
        .cloned()
        .collect();
    let source = if a.source == b.source {
        a.source
    } else if a.is_empty() {
        b.source
    } else if b.is_empty() {
        a.source
    } else {
        SourceTag::Merged
    };
    (
        ConstraintSet {
            synonyms,
            antonyms,
            source,
        },
        conflicts,
    )
}

/// Restricts `cs` to the vocabulary of `space` and, under
/// [`Setting::Disjoint`], drops every pair mentioning an evaluation word.
///
/// Fails when no synonym pair survives.
pub fn filter_for_setting(
    cs: &ConstraintSet,
    space: &VectorSpace,
    eval_words: &BTreeSet<String>,
    setting: Setting,
) -> Result<(ConstraintSet, SeenVocab, FilterStats)> {
    let mut stats = FilterStats {
        synonyms_in: cs.synonyms.len(),
        antonyms_in: cs.antonyms.len(),
        ..FilterStats::default()
    };
    let mut keep = |p: &&WordPair| {
        if !space.contains(&p.0) || !space.contains(&p.1) {
            stats.dropped_oov += 1;
            return false;
        }
        if setting == Setting::Disjoint && (eval_words.contains(&p.0) || eval_words.contains(&p.1))
        {
            stats.dropped_eval += 1;
            return false;
        }
        true
    };
    let synonyms: BTreeSet<WordPair> = cs.synonyms.iter().filter(&mut keep).cloned().collect();
    let antonyms: BTreeSet<WordPair> = cs.antonyms.iter().filter(&mut keep).cloned().collect();
    stats.synonyms_out = synonyms.len();
    stats.antonyms_out = antonyms.len();
    if synonyms.is_empty() {
        return Err(Error::Empty("no synonym pairs survive filtering"));
    }
    let out = ConstraintSet {
        synonyms,
        antonyms,
        source: cs.source,
    };
    let seen = SeenVocab::new(out.tokens(), space)?;
    Ok((out, seen, stats))
}
