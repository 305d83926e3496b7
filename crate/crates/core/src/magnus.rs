//! The free-group base case, decided in a truncated power-series ring.
//!
//! A free group on `rank` generators embeds into the units of the ring of
//! power series in `rank` non-commuting variables over F_p by sending the
//! `i`-th generator to `1 + X_i` (and its inverse to the geometric series
//! `1 - X_i + X_i² - ...`). A reduced nonempty word therefore has some
//! non-constant monomial with a nonzero coefficient; the smallest such
//! monomial is a *witness* ([`MagnusWitness`]) to the word's
//! nontriviality, and it can be checked independently of the series
//! arithmetic: mapping each generator to the unitriangular matrix that
//! walks the witness monomial's letter positions ([`MonomialRep`]) gives a
//! finite p-group in which the word's image has the witness coefficient in
//! its upper-right corner. That matrix group is the finite p-quotient
//! separating the word.
//!
//! [`separate_free`] searches by iterative deepening on the truncation
//! degree, so easy words (nonzero exponent sums, commutators) stay cheap
//! while p-th powers pay only for the degree they need.

use crate::fp::FpScalar;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// A word in a free group: letters are `±(i+1)` for the `i`-th generator.
pub type FreeWord = Vec<i32>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MagnusError {
    #[error("letter {index} is {letter}, not a nonzero index with magnitude at most {rank}")]
    BadLetter { index: usize, letter: i32, rank: usize },
    #[error("no witness monomial up to degree {max_degree}; raise the degree bound")]
    DegreeCapped { max_degree: usize },
}

/// Cancel adjacent inverse letters until no `g g⁻¹` remains.
pub fn free_reduce(word: &[i32]) -> FreeWord {
    let mut out: Vec<i32> = Vec::with_capacity(word.len());
    for &letter in word {
        if out.last() == Some(&-letter) {
            out.pop();
        } else {
            out.push(letter);
        }
    }
    out
}

fn validate(word: &[i32], rank: usize) -> Result<(), MagnusError> {
    for (index, &letter) in word.iter().enumerate() {
        if letter == 0 || letter.unsigned_abs() as usize > rank {
            return Err(MagnusError::BadLetter { index, letter, rank });
        }
    }
    Ok(())
}

/// A polynomial in non-commuting variables over F_p, truncated beyond
/// `max_degree`. Monomials are variable-index sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncatedPoly {
    prime: u32,
    max_degree: usize,
    terms: BTreeMap<Vec<u32>, FpScalar>,
}

impl TruncatedPoly {
    pub fn one(prime: u32, max_degree: usize) -> TruncatedPoly {
        let mut terms = BTreeMap::new();
        terms.insert(Vec::new(), FpScalar::one(prime));
        TruncatedPoly { prime, max_degree, terms }
    }

    /// The image of a generator or of its inverse: `1 + X_i`, or the
    /// truncated geometric series `1 - X_i + X_i² - ...`.
    pub fn generator(prime: u32, max_degree: usize, i: u32, inverse: bool) -> TruncatedPoly {
        let mut terms = BTreeMap::new();
        if inverse {
            let mut sign = FpScalar::one(prime);
            for k in 0..=max_degree {
                terms.insert(vec![i; k], sign);
                sign = sign.neg();
            }
        } else {
            terms.insert(Vec::new(), FpScalar::one(prime));
            if max_degree >= 1 {
                terms.insert(vec![i], FpScalar::one(prime));
            }
        }
        TruncatedPoly { prime, max_degree, terms }
    }

    pub fn mul(&self, other: &TruncatedPoly) -> TruncatedPoly {
        let mut terms: BTreeMap<Vec<u32>, FpScalar> = BTreeMap::new();
        for (m, &a) in &self.terms {
            for (n, &b) in &other.terms {
                if m.len() + n.len() > self.max_degree {
                    continue;
                }
                let mut key = m.clone();
                key.extend_from_slice(n);
                let c = a.mul(b);
                match terms.entry(key) {
                    std::collections::btree_map::Entry::Vacant(v) => {
                        v.insert(c);
                    }
                    std::collections::btree_map::Entry::Occupied(mut o) => {
                        let s = o.get().add(c);
                        if s.is_zero() {
                            o.remove();
                        } else {
                            *o.get_mut() = s;
                        }
                    }
                }
            }
        }
        TruncatedPoly { prime: self.prime, max_degree: self.max_degree, terms }
    }

    pub fn coeff(&self, monomial: &[u32]) -> FpScalar {
        self.terms.get(monomial).copied().unwrap_or_else(|| FpScalar::zero(self.prime))
    }

    /// The smallest non-constant monomial with a nonzero coefficient,
    /// ordered by degree then lexicographically.
    pub fn least_witness(&self) -> Option<(Vec<u32>, FpScalar)> {
        self.terms
            .iter()
            .filter(|(m, _)| !m.is_empty())
            .min_by(|(m, _), (n, _)| m.len().cmp(&n.len()).then_with(|| m.cmp(n)))
            .map(|(m, &c)| (m.clone(), c))
    }
}

/// Evaluate a free word in the truncated ring.
pub fn eval_free_word(
    prime: u32,
    rank: usize,
    word: &[i32],
    max_degree: usize,
) -> Result<TruncatedPoly, MagnusError> {
    validate(word, rank)?;
    let mut acc = TruncatedPoly::one(prime, max_degree);
    for &letter in word {
        let i = letter.unsigned_abs() - 1;
        acc = acc.mul(&TruncatedPoly::generator(prime, max_degree, i, letter < 0));
    }
    Ok(acc)
}

/// Proof that a free word is nontrivial: a monomial at which its series
/// image has a nonzero coefficient.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MagnusWitness {
    pub monomial: Vec<u32>,
    pub coefficient: FpScalar,
}

impl MagnusWitness {
    pub fn degree(&self) -> usize {
        self.monomial.len()
    }
}

/// Verdict of the free-group decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FreeVerdict {
    /// The word reduces to the empty word.
    Trivial,
    /// The word is nontrivial, with a separating witness.
    Witness(MagnusWitness),
}

/// Decide a free word: trivial, or a witness of lowest degree (searched by
/// iterative deepening up to `degree_cap`).
pub fn separate_free(
    prime: u32,
    rank: usize,
    word: &[i32],
    degree_cap: usize,
) -> Result<FreeVerdict, MagnusError> {
    validate(word, rank)?;
    let reduced = free_reduce(word);
    if reduced.is_empty() {
        return Ok(FreeVerdict::Trivial);
    }
    for max_degree in 1..=degree_cap {
        let poly = eval_free_word(prime, rank, &reduced, max_degree)?;
        if let Some((monomial, coefficient)) = poly.least_witness() {
            return Ok(FreeVerdict::Witness(MagnusWitness { monomial, coefficient }));
        }
    }
    Err(MagnusError::DegreeCapped { max_degree: degree_cap })
}

/// The unitriangular representation attached to one monomial
/// `X_{j_1} ... X_{j_k}`: generator `j` maps to the identity plus the
/// steps `t → t+1` at every position `t` where the monomial reads `j`.
/// The upper-right corner of a word's image equals the word's series
/// coefficient at the monomial, giving an independent check and an
/// explicit finite p-group separating the word.
#[derive(Debug, Clone)]
pub struct MonomialRep {
    prime: u32,
    dim: usize,
    gen_mats: Vec<Vec<FpScalar>>,
    inv_mats: Vec<Vec<FpScalar>>,
}

impl MonomialRep {
    pub fn new(prime: u32, rank: usize, monomial: &[u32]) -> MonomialRep {
        let dim = monomial.len() + 1;
        let mut gen_mats = Vec::with_capacity(rank);
        let mut inv_mats = Vec::with_capacity(rank);
        for j in 0..rank as u32 {
            let mut mat = identity(prime, dim);
            for (t, &m) in monomial.iter().enumerate() {
                if m == j {
                    mat[t * dim + (t + 1)] = FpScalar::one(prime);
                }
            }
            inv_mats.push(unitriangular_inverse(prime, dim, &mat));
            gen_mats.push(mat);
        }
        MonomialRep { prime, dim, gen_mats, inv_mats }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn identity(&self) -> Vec<FpScalar> {
        identity(self.prime, self.dim)
    }

    pub fn generator(&self, j: usize, inverse: bool) -> &[FpScalar] {
        if inverse { &self.inv_mats[j] } else { &self.gen_mats[j] }
    }

    pub fn mat_mul(&self, a: &[FpScalar], b: &[FpScalar]) -> Vec<FpScalar> {
        mat_mul(self.prime, self.dim, a, b)
    }

    /// Image of a whole word.
    pub fn apply(&self, word: &[i32]) -> Result<Vec<FpScalar>, MagnusError> {
        validate(word, self.gen_mats.len())?;
        let mut acc = self.identity();
        for &letter in word {
            let j = (letter.unsigned_abs() - 1) as usize;
            acc = self.mat_mul(&acc, self.generator(j, letter < 0));
        }
        Ok(acc)
    }

    /// The upper-right corner: series coefficient at the monomial.
    pub fn corner(&self, mat: &[FpScalar]) -> FpScalar {
        mat[self.dim - 1]
    }

    pub fn is_identity(&self, mat: &[FpScalar]) -> bool {
        *mat == identity(self.prime, self.dim)
    }
}

fn identity(prime: u32, dim: usize) -> Vec<FpScalar> {
    let mut mat = vec![FpScalar::zero(prime); dim * dim];
    for i in 0..dim {
        mat[i * dim + i] = FpScalar::one(prime);
    }
    mat
}

fn mat_mul(prime: u32, dim: usize, a: &[FpScalar], b: &[FpScalar]) -> Vec<FpScalar> {
    let mut out = vec![FpScalar::zero(prime); dim * dim];
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i * dim + k];
            if aik.is_zero() {
                continue;
            }
            for j in 0..dim {
                out[i * dim + j] = out[i * dim + j].add(aik.mul(b[k * dim + j]));
            }
        }
    }
    out
}

/// Inverse of `I + N` with `N` strictly upper triangular, via the
/// alternating Neumann sum (which terminates: `N` is nilpotent).
fn unitriangular_inverse(prime: u32, dim: usize, mat: &[FpScalar]) -> Vec<FpScalar> {
    let mut n = mat.to_vec();
    for i in 0..dim {
        n[i * dim + i] = n[i * dim + i].sub(FpScalar::one(prime));
    }
    let mut acc = identity(prime, dim);
    let mut power = identity(prime, dim);
    let mut sign = FpScalar::one(prime);
    for _ in 1..dim {
        power = mat_mul(prime, dim, &power, &n);
        sign = sign.neg();
        for (a, p) in acc.iter_mut().zip(&power) {
            *a = a.add(sign.mul(*p));
        }
    }
    acc
}

/// Recheck a witness against a word through the matrix representation —
/// a path independent of the series arithmetic that produced it.
pub fn check_witness(
    prime: u32,
    rank: usize,
    word: &[i32],
    witness: &MagnusWitness,
) -> Result<bool, MagnusError> {
    if witness.monomial.is_empty()
        || witness.coefficient.is_zero()
        || witness.coefficient.prime() != prime
        || witness.monomial.iter().any(|&j| j as usize >= rank)
    {
        return Ok(false);
    }
    let rep = MonomialRep::new(prime, rank, &witness.monomial);
    let mat = rep.apply(word)?;
    Ok(rep.corner(&mat) == witness.coefficient)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reduction_cancels_adjacent_inverses() {
        assert_eq!(free_reduce(&[1, -1]), Vec::<i32>::new());
        assert_eq!(free_reduce(&[1, 2, -2, -1]), Vec::<i32>::new());
        assert_eq!(free_reduce(&[1, 2, -1]), vec![1, 2, -1]);
        assert_eq!(free_reduce(&[1, -2, 2, 1]), vec![1, 1]);
    }

    #[test]
    fn bad_letters_are_rejected() {
        assert!(matches!(
            separate_free(2, 2, &[1, 0], 8),
            Err(MagnusError::BadLetter { index: 1, letter: 0, .. })
        ));
        assert!(matches!(
            separate_free(2, 2, &[3], 8),
            Err(MagnusError::BadLetter { index: 0, letter: 3, .. })
        ));
    }

    #[test]
    fn trivial_words_have_no_witness() {
        assert_eq!(separate_free(2, 2, &[], 8).unwrap(), FreeVerdict::Trivial);
        assert_eq!(separate_free(3, 2, &[1, 2, -2, -1], 8).unwrap(), FreeVerdict::Trivial);
    }

    #[test]
    fn square_needs_degree_two_at_p_two() {
        // (1+X)² = 1 + X² over F_2.
        let v = separate_free(2, 1, &[1, 1], 8).unwrap();
        assert_eq!(
            v,
            FreeVerdict::Witness(MagnusWitness {
                monomial: vec![0, 0],
                coefficient: FpScalar::one(2)
            })
        );
        assert!(matches!(
            separate_free(2, 1, &[1, 1], 1),
            Err(MagnusError::DegreeCapped { max_degree: 1 })
        ));
        // Over F_3 the exponent sum survives at degree 1.
        let v3 = separate_free(3, 1, &[1, 1], 8).unwrap();
        assert_eq!(
            v3,
            FreeVerdict::Witness(MagnusWitness {
                monomial: vec![0],
                coefficient: FpScalar::new(2, 3)
            })
        );
    }

    #[test]
    fn cube_needs_degree_three_at_p_three() {
        // (1+X)³ = 1 + X³ over F_3.
        let v = separate_free(3, 1, &[1, 1, 1], 8).unwrap();
        assert_eq!(
            v,
            FreeVerdict::Witness(MagnusWitness {
                monomial: vec![0, 0, 0],
                coefficient: FpScalar::one(3)
            })
        );
        assert!(matches!(
            separate_free(3, 1, &[1, 1, 1], 2),
            Err(MagnusError::DegreeCapped { max_degree: 2 })
        ));
    }

    #[test]
    fn eighth_power_needs_degree_eight() {
        let v = separate_free(2, 1, &[1; 8], 16).unwrap();
        assert_eq!(
            v,
            FreeVerdict::Witness(MagnusWitness {
                monomial: vec![0; 8],
                coefficient: FpScalar::one(2)
            })
        );
    }

    #[test]
    fn commutator_witness_is_xy() {
        for p in [2u32, 3, 5] {
            let v = separate_free(p, 2, &[1, 2, -1, -2], 8).unwrap();
            assert_eq!(
                v,
                FreeVerdict::Witness(MagnusWitness {
                    monomial: vec![0, 1],
                    coefficient: FpScalar::one(p)
                })
            );
        }
    }

    #[test]
    fn witnesses_survive_the_matrix_check() {
        let words: Vec<Vec<i32>> = vec![
            vec![1, 1],
            vec![1, 2, -1, -2],
            vec![2, 2, 2],
            vec![1, -2, 1, 2, 2],
            vec![1; 8],
        ];
        for p in [2u32, 3] {
            for w in &words {
                if let FreeVerdict::Witness(witness) = separate_free(p, 2, w, 16).unwrap() {
                    assert!(check_witness(p, 2, w, &witness).unwrap(), "p={p} w={w:?}");
                    // A corrupted coefficient must fail.
                    let mut bad = witness.clone();
                    bad.coefficient = bad.coefficient.add(FpScalar::one(p));
                    assert!(!check_witness(p, 2, w, &bad).unwrap_or(true));
                }
            }
        }
    }

    #[test]
    fn matrix_corner_matches_series_coefficient() {
        // Independent paths agree on arbitrary monomials, not only
        // witnesses.
        let word = [1, 2, -1, 2, 1, -2];
        for p in [2u32, 3] {
            let poly = eval_free_word(p, 2, &word, 4).unwrap();
            for monomial in [
                vec![0u32],
                vec![1],
                vec![0, 1],
                vec![1, 0],
                vec![0, 0],
                vec![1, 1, 0],
                vec![0, 1, 0, 1],
            ] {
                let rep = MonomialRep::new(p, 2, &monomial);
                let mat = rep.apply(&word).unwrap();
                assert_eq!(rep.corner(&mat), poly.coeff(&monomial), "p={p} m={monomial:?}");
            }
        }
    }

    #[test]
    fn inverse_matrices_invert() {
        let rep = MonomialRep::new(3, 2, &[0, 1, 0]);
        for j in 0..2 {
            let prod = rep.mat_mul(rep.generator(j, false), rep.generator(j, true));
            assert!(rep.is_identity(&prod));
        }
    }

    proptest! {
        /// The series verdict agrees with free reduction, and every
        /// produced witness passes the independent matrix check.
        #[test]
        fn verdict_matches_free_reduction(
            word in proptest::collection::vec((1i32..=3, proptest::bool::ANY), 0..14),
            p in proptest::sample::select(vec![2u32, 3]),
        ) {
            let word: Vec<i32> = word.into_iter().map(|(g, neg)| if neg { -g } else { g }).collect();
            let verdict = separate_free(p, 3, &word, 32).unwrap();
            let reduced_empty = free_reduce(&word).is_empty();
            match verdict {
                FreeVerdict::Trivial => prop_assert!(reduced_empty),
                FreeVerdict::Witness(w) => {
                    prop_assert!(!reduced_empty);
                    prop_assert!(check_witness(p, 3, &word, &w).unwrap());
                }
            }
        }

        /// Multiplying a word by its inverse lands on the identity in any
        /// monomial representation.
        #[test]
        fn word_times_inverse_is_identity(
            word in proptest::collection::vec((1i32..=2, proptest::bool::ANY), 0..10),
        ) {
            let word: Vec<i32> = word.into_iter().map(|(g, neg)| if neg { -g } else { g }).collect();
            let mut doubled = word.clone();
            doubled.extend(word.iter().rev().map(|l| -l));
            let rep = MonomialRep::new(2, 2, &[0, 1]);
            let mat = rep.apply(&doubled).unwrap();
            prop_assert!(rep.is_identity(&mat));
        }
    }
}
