//! Vocabulary-indexed vector spaces.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math::{dot, norm, Matrix};
use crate::{Error, Result};

/// An ordered vocabulary paired with one dense row per token.
///
/// Immutable once built: every transformation returns a new space.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSpace {
    words: Vec<String>,
    index: BTreeMap<String, usize>,
    matrix: Matrix,
}

impl VectorSpace {
    /// Builds a space from unique tokens and their rows.
    pub fn new(words: Vec<String>, matrix: Matrix) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::Empty("vector space has no words"));
        }
        if matrix.cols() == 0 {
            return Err(Error::Empty("vector space has zero dimensions"));
        }
        if words.len() != matrix.rows() {
            return Err(Error::Shape(format!(
                "{} words but {} rows",
                words.len(),
                matrix.rows()
            )));
        }
        let mut index = BTreeMap::new();
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::DuplicateToken(w.clone()));
            }
        }
        for (i, row) in matrix.iter_rows().enumerate() {
            if !row.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidValue(format!(
                    "non-finite entry in vector of `{}`",
                    words[i]
                )));
            }
        }
        Ok(VectorSpace {
            words,
            index,
            matrix,
        })
    }

    /// Builds a space from `(token, vector)` records in order. When a token
    /// repeats, its first record is kept; the number of dropped records is
    /// returned alongside the space.
    pub fn from_records<I>(records: I) -> Result<(Self, usize)>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut seen = BTreeSet::new();
        let mut words = Vec::new();
        let mut data = Vec::new();
        let mut dim = None;
        let mut dropped = 0;
        for (word, vector) in records {
            let d = *dim.get_or_insert(vector.len());
            if vector.len() != d {
                return Err(Error::Shape(format!(
                    "vector of `{word}` has {} entries, expected {d}",
                    vector.len()
                )));
            }
            if !seen.insert(word.clone()) {
                dropped += 1;
                continue;
            }
            words.push(word);
            data.extend(vector);
        }
        let dim = dim.ok_or(Error::Empty("no vectors"))?;
        let matrix = Matrix::from_vec(words.len(), dim, data)?;
        Ok((VectorSpace::new(words, matrix)?, dropped))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.words.len()
    }

    /// Always false for a constructed space; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.index_of(token).map(|i| self.matrix.row(i))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.words
            .iter()
            .zip(self.matrix.iter_rows())
            .map(|(w, r)| (w.as_str(), r))
    }

    /// The sub-space of `tokens`, in the order given.
    pub fn restrict<'a, I>(&self, tokens: I) -> Result<VectorSpace>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut words = Vec::new();
        let mut idx = Vec::new();
        for t in tokens {
            let i = self
                .index_of(t)
                .ok_or_else(|| Error::UnknownToken(t.to_owned()))?;
            words.push(t.to_owned());
            idx.push(i);
        }
        VectorSpace::new(words, self.matrix.select_rows(&idx))
    }

    /// Copy of `self` where every token also present in `overlay` takes the
    /// overlay's vector. Vocabulary and order are those of `self`.
    pub fn overlaid_with(&self, overlay: &VectorSpace) -> Result<VectorSpace> {
        if overlay.dim() != self.dim() {
            return Err(Error::Shape(format!(
                "overlay has dimension {}, space has {}",
                overlay.dim(),
                self.dim()
            )));
        }
        let mut matrix = self.matrix.clone();
        for (w, v) in overlay.iter() {
            let i = self
                .index_of(w)
                .ok_or_else(|| Error::UnknownToken(w.to_owned()))?;
            matrix.row_mut(i).copy_from_slice(v);
        }
        Ok(VectorSpace {
            words: self.words.clone(),
            index: self.index.clone(),
            matrix,
        })
    }

    /// Same vocabulary, new rows.
    pub fn with_matrix(&self, matrix: Matrix) -> Result<VectorSpace> {
        VectorSpace::new(self.words.clone(), matrix)
    }
}

/// Tokens that occur in at least one surviving constraint and in the space.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeenVocab {
    tokens: BTreeSet<String>,
}

impl SeenVocab {
    /// Checks that every token is in `space`.
    pub fn new(tokens: BTreeSet<String>, space: &VectorSpace) -> Result<Self> {
        if let Some(t) = tokens.iter().find(|t| !space.contains(t)) {
            return Err(Error::UnknownToken(t.clone()));
        }
        Ok(SeenVocab { tokens })
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    pub fn as_set(&self) -> &BTreeSet<String> {
        &self.tokens
    }
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!(
            "cosine of vectors with {} and {} entries",
            u.len(),
            v.len()
        )));
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Rescales every row to unit Euclidean length.
pub fn unit_normalize(space: &VectorSpace) -> Result<VectorSpace> {
    let mut matrix = space.matrix.clone();
    for (i, w) in space.words.iter().enumerate() {
        let row = matrix.row_mut(i);
        let n = norm(row);
        if n == 0.0 {
            return Err(Error::ZeroNorm(w.clone()));
        }
        for x in row.iter_mut() {
            *x /= n;
        }
    }
    Ok(VectorSpace {
        words: space.words.clone(),
        index: space.index.clone(),
        matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn space(rows: &[(&str, &[f64])]) -> VectorSpace {
        VectorSpace::from_records(rows.iter().map(|(w, v)| (w.to_string(), v.to_vec())))
            .unwrap()
            .0
    }

    #[test]
    fn first_record_wins() {
        let (s, dropped) = VectorSpace::from_records(vec![
            ("a".to_string(), vec![1.0, 0.0]),
            ("a".to_string(), vec![2.0, 0.0]),
        ])
        .unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(dropped, 1);
        assert_eq!(s.vector("a").unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(
            VectorSpace::from_records(Vec::new()),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            VectorSpace::from_records(vec![
                ("a".to_string(), vec![1.0, 0.0]),
                ("b".to_string(), vec![1.0]),
            ]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            VectorSpace::from_records(vec![("a".to_string(), vec![])]),
            Err(Error::Empty(_))
        ));
        assert!(VectorSpace::from_records(vec![("a".to_string(), vec![f64::NAN])]).is_err());
    }

    #[test]
    fn normalize_three_four_five() {
        let s = unit_normalize(&space(&[("a", &[3.0, 4.0])])).unwrap();
        assert!((s.row(0)[0] - 0.6).abs() < 1e-12);
        assert!((s.row(0)[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn normalize_names_zero_row() {
        let err = unit_normalize(&space(&[("a", &[1.0, 0.0]), ("nil", &[0.0, 0.0])])).unwrap_err();
        assert_eq!(err, Error::ZeroNorm("nil".to_string()));
    }

    #[test]
    fn cosine_cases() {
        assert!((cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector));
    }

    #[test]
    fn overlay_and_restrict() {
        let s = space(&[("a", &[1.0]), ("b", &[2.0]), ("c", &[3.0])]);
        let sub = s.restrict(["c", "a"]).unwrap();
        assert_eq!(sub.words(), &["c".to_string(), "a".to_string()]);
        let over = s.overlaid_with(&space(&[("b", &[9.0])])).unwrap();
        assert_eq!(over.matrix().as_slice(), &[1.0, 9.0, 3.0]);
        assert!(s.restrict(["zz"]).is_err());
    }

    fn nonzero_vec() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, 1..8)
            .prop_filter("nonzero", |v| norm(v) > 1e-3)
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(v in nonzero_vec()) {
            let s = space(&[("w", &v)]);
            let once = unit_normalize(&s).unwrap();
            let twice = unit_normalize(&once).unwrap();
            prop_assert!((norm(once.row(0)) - 1.0).abs() < 1e-9);
            prop_assert!(once.matrix().max_abs_diff(twice.matrix()) < 1e-9);
        }

        #[test]
        fn cosine_symmetric_and_scale_invariant(
            (u, v) in (1usize..8).prop_flat_map(|d| (
                proptest::collection::vec(-10.0f64..10.0, d),
                proptest::collection::vec(-10.0f64..10.0, d),
            )).prop_filter("nonzero", |(u, v)| norm(u) > 1e-3 && norm(v) > 1e-3),
            alpha in 0.01f64..100.0,
        ) {
            let c = cosine(&u, &v).unwrap();
            prop_assert!((c - cosine(&v, &u).unwrap()).abs() < 1e-12);
            let scaled: Vec<f64> = u.iter().map(|x| alpha * x).collect();
            prop_assert!((c - cosine(&scaled, &v).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }
}
