//! Finite p-groups as explicit multiplication tables, together with the
//! subgroup, homomorphism, quotient, and chief-series machinery the rest of
//! the crate builds on.
//!
//! Conventions, fixed once and used everywhere:
//! - elements of a group of order n are the indices `0..n`, with `0` the
//!   identity;
//! - subgroups are sorted element lists of a shared parent (`Arc`);
//! - a chief series is a descending chain of subgroups normal in the whole
//!   group whose successive factors are trivial or of order p, read with an
//!   implicit trivial tail beyond its last term.

use crate::fp;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Shared handle to an immutable group table.
pub type Grp = Arc<FiniteGroup>;

/// A finite group given by its full multiplication table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteGroup {
    order: usize,
    /// Row-major table: `mul[a * order + b]` is the product `a·b`.
    mul: Vec<usize>,
    /// `inv[a]` is the two-sided inverse of `a`; `usize::MAX` when the table
    /// defines none (such defects are reported by [`FiniteGroup::validate`]).
    inv: Vec<usize>,
    labels: Option<Vec<String>>,
}

impl PartialEq for FiniteGroup {
    /// Structural equality: same order and same table. Labels are display
    /// metadata and do not participate.
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order && self.mul == other.mul
    }
}
impl Eq for FiniteGroup {}

/// A defect found while building or validating a multiplication table.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("multiplication table is not square: row {row} has length {len}, expected {order}")]
    BadShape { row: usize, len: usize, order: usize },
    #[error("table entry out of range: {a}*{b} = {value} but order is {order}")]
    EntryOutOfRange { a: usize, b: usize, value: usize, order: usize },
    #[error("element 0 is not a two-sided identity: witness element {witness}")]
    BrokenIdentity { witness: usize },
    #[error("element {witness} has no two-sided inverse")]
    MissingInverse { witness: usize },
    #[error("associativity fails at triple ({a}, {b}, {c})")]
    NotAssociative { a: usize, b: usize, c: usize },
    #[error("element {witness} is outside the subgroup")]
    NotInSubgroup { witness: usize },
    #[error("subgroup is not normal: conjugate of {h} by {g} escapes")]
    NotNormal { g: usize, h: usize },
    #[error("subgroups have different parent groups")]
    ParentMismatch,
    #[error("order {order} is not a power of the prime {p}")]
    NotAPGroup { order: usize, p: u32 },
    #[error("label list has length {len}, expected {order}")]
    BadLabels { len: usize, order: usize },
    #[error("permutation {name} is not a permutation of 0..{degree}")]
    BadPermutation { name: String, degree: usize },
    #[error("group order budget {budget} exceeded while closing generators")]
    ClosureBudget { budget: usize },
}

/// Validation summary for a table, with the first witness per failing law.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupReport {
    pub identity: Result<(), GroupError>,
    pub inverses: Result<(), GroupError>,
    pub associativity: Result<(), GroupError>,
    /// `Some((p, m))` when the order is a prime power `p^m` (or the trivial
    /// group, reported as `None` order-1 case below).
    pub prime_power: Option<(u32, u32)>,
}

impl GroupReport {
    pub fn is_valid(&self) -> bool {
        self.identity.is_ok() && self.inverses.is_ok() && self.associativity.is_ok()
    }

    /// The first defect, if any.
    pub fn first_error(&self) -> Option<GroupError> {
        [&self.identity, &self.inverses, &self.associativity]
            .into_iter()
            .find_map(|r| r.as_ref().err().cloned())
    }
}

impl FiniteGroup {
    /// Build a group from a square table with rows `table[a][b] = a·b`.
    ///
    /// Shape and range are enforced here; the group laws themselves are
    /// checked by [`FiniteGroup::validate`], so that defective tables can be
    /// constructed and reported on.
    pub fn from_mul_table(
        table: Vec<Vec<usize>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self, GroupError> {
        let order = table.len();
        if order == 0 {
            return Err(GroupError::BadShape { row: 0, len: 0, order: 0 });
        }
        let mut mul = Vec::with_capacity(order * order);
        for (a, row) in table.iter().enumerate() {
            if row.len() != order {
                return Err(GroupError::BadShape { row: a, len: row.len(), order });
            }
            for (b, &v) in row.iter().enumerate() {
                if v >= order {
                    return Err(GroupError::EntryOutOfRange { a, b, value: v, order });
                }
                mul.push(v);
            }
        }
        if let Some(ref l) = labels {
            if l.len() != order {
                return Err(GroupError::BadLabels { len: l.len(), order });
            }
        }
        let mut g = FiniteGroup { order, mul, inv: Vec::new(), labels };
        g.inv = g.derive_inverses();
        Ok(g)
    }

    fn derive_inverses(&self) -> Vec<usize> {
        (0..self.order)
            .map(|a| {
                (0..self.order)
                    .find(|&b| self.mul(a, b) == 0 && self.mul(b, a) == 0)
                    .unwrap_or(usize::MAX)
            })
            .collect()
    }

    /// The trivial group.
    pub fn trivial() -> Self {
        FiniteGroup { order: 1, mul: vec![0], inv: vec![0], labels: Some(vec!["1".into()]) }
    }

    /// Cyclic group of order `n`, generator `1`, labels `1, g, g^2, ...`.
    pub fn cyclic(n: usize) -> Self {
        assert!(n >= 1);
        let mut mul = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                mul.push((a + b) % n);
            }
        }
        let labels = (0..n)
            .map(|i| match i {
                0 => "1".to_string(),
                1 => "g".to_string(),
                _ => format!("g{i}"),
            })
            .collect();
        let inv = (0..n).map(|a| (n - a) % n).collect();
        FiniteGroup { order: n, mul, inv, labels: Some(labels) }
    }

    /// Dihedral group of order `2n` (symmetries of the n-gon, n >= 1).
    /// Element `r^i s^j` is encoded as `i + n*j`; labels follow suit.
    pub fn dihedral(n: usize) -> Self {
        assert!(n >= 1);
        let order = 2 * n;
        let enc = |i: usize, j: usize| i % n + n * (j % 2);
        let mut table = vec![vec![0; order]; order];
        for i1 in 0..n {
            for j1 in 0..2 {
                for i2 in 0..n {
                    for j2 in 0..2 {
                        // (r^i1 s^j1)(r^i2 s^j2): move s^j1 past r^i2.
                        let i = if j1 == 0 { (i1 + i2) % n } else { (i1 + n - i2 % n) % n };
                        table[enc(i1, j1)][enc(i2, j2)] = enc(i, j1 + j2);
                    }
                }
            }
        }
        let mut labels = vec![String::new(); order];
        for i in 0..n {
            for j in 0..2 {
                labels[enc(i, j)] = match (i, j) {
                    (0, 0) => "1".into(),
                    (i, 0) => format!("r{i}"),
                    (0, _) => "s".into(),
                    (i, _) => format!("r{i}s"),
                };
            }
        }
        FiniteGroup::from_mul_table(table, Some(labels)).expect("dihedral table is well formed")
    }

    /// Dicyclic group of order `4m` (`m >= 1`); `m = 2` is the quaternion
    /// group Q8. Elements `a^i b^j` with `a` of order `2m`, `b^2 = a^m`,
    /// `b a b^-1 = a^-1`, encoded as `i + 2m*j`.
    pub fn dicyclic(m: usize) -> Self {
        assert!(m >= 1);
        let n = 2 * m;
        let order = 4 * m;
        let enc = |i: usize, j: usize| i % n + n * (j % 2);
        let mut table = vec![vec![0; order]; order];
        for i1 in 0..n {
            for j1 in 0..2 {
                for i2 in 0..n {
                    for j2 in 0..2 {
                        // b a^i = a^-i b, and b^2 = a^m.
                        let mut i = if j1 == 0 { i1 + i2 } else { i1 + (n - i2 % n) };
                        if j1 == 1 && j2 == 1 {
                            i += m; // b^2 folded into the a-power
                        }
                        table[enc(i1, j1)][enc(i2, j2)] = enc(i, j1 + j2);
                    }
                }
            }
        }
        let mut labels = vec![String::new(); order];
        for i in 0..n {
            for j in 0..2 {
                labels[enc(i, j)] = match (i, j) {
                    (0, 0) => "1".into(),
                    (i, 0) => format!("a{i}"),
                    (0, _) => "b".into(),
                    (i, _) => format!("a{i}b"),
                };
            }
        }
        FiniteGroup::from_mul_table(table, Some(labels)).expect("dicyclic table is well formed")
    }

    /// Klein four-group.
    pub fn klein_four() -> Self {
        Self::direct_product(&Self::cyclic(2), &Self::cyclic(2))
    }

    /// Heisenberg group over Z/p: unitriangular 3x3 matrices, order p^3.
    /// Element ((1,a,c),(0,1,b),(0,0,1)) is encoded as `a + p*b + p*p*c`.
    pub fn heisenberg(p: usize) -> Self {
        assert!(p >= 2);
        let order = p * p * p;
        let enc = |a: usize, b: usize, c: usize| a % p + p * (b % p) + p * p * (c % p);
        let mut table = vec![vec![0; order]; order];
        for a1 in 0..p {
            for b1 in 0..p {
                for c1 in 0..p {
                    for a2 in 0..p {
                        for b2 in 0..p {
                            for c2 in 0..p {
                                let a = a1 + a2;
                                let b = b1 + b2;
                                let c = c1 + c2 + a1 * b2;
                                table[enc(a1, b1, c1)][enc(a2, b2, c2)] = enc(a, b, c);
                            }
                        }
                    }
                }
            }
        }
        FiniteGroup::from_mul_table(table, None).expect("heisenberg table is well formed")
    }

    /// The modular group of order p^3 for odd p: C_{p^2} ⋊ C_p with the
    /// action `b a b^-1 = a^{1+p}`. Element `a^i b^j` encoded as `i + p^2*j`.
    pub fn modular_p3(p: usize) -> Self {
        assert!(p >= 3, "for p = 2 the modular group of order 8 is dihedral(4)");
        let n = p * p;
        let order = n * p;
        let enc = |i: usize, j: usize| i % n + n * (j % p);
        // a^i b^j · a^k b^l = a^{i + k(1+p)^j} b^{j+l}
        let mut table = vec![vec![0; order]; order];
        for i in 0..n {
            for j in 0..p {
                // (1+p)^j mod p^2
                let mut t = 1usize;
                for _ in 0..j {
                    t = t * (1 + p) % n;
                }
                for k in 0..n {
                    for l in 0..p {
                        table[enc(i, j)][enc(k, l)] = enc(i + k * t, j + l);
                    }
                }
            }
        }
        FiniteGroup::from_mul_table(table, None).expect("modular_p3 table is well formed")
    }

    /// Direct product, elements encoded as `a + |A|*b`.
    pub fn direct_product(a: &FiniteGroup, b: &FiniteGroup) -> Self {
        let order = a.order * b.order;
        let enc = |x: usize, y: usize| x + a.order * y;
        let mut mul = Vec::with_capacity(order * order);
        for i in 0..order {
            let (x1, y1) = (i % a.order, i / a.order);
            for j in 0..order {
                let (x2, y2) = (j % a.order, j / a.order);
                mul.push(enc(a.mul(x1, x2), b.mul(y1, y2)));
            }
        }
        let labels = match (&a.labels, &b.labels) {
            (Some(la), Some(lb)) => Some(
                (0..order)
                    .map(|i| format!("({},{})", la[i % a.order], lb[i / a.order]))
                    .collect(),
            ),
            _ => None,
        };
        let mut g = FiniteGroup { order, mul, inv: Vec::new(), labels };
        g.inv = g.derive_inverses();
        g
    }

    /// Close a set of permutations of `0..degree` under composition and
    /// present the result as a group table. Composition is left-to-right:
    /// `(f·g)(x) = g(f(x))`. Element 0 is the identity; the remaining
    /// elements are indexed in breadth-first discovery order over the
    /// generators (taken in the given order), which is deterministic.
    pub fn from_permutations(
        degree: usize,
        gens: &[(String, Vec<usize>)],
        budget: usize,
    ) -> Result<(Self, Vec<usize>), GroupError> {
        for (name, p) in gens {
            let mut seen = vec![false; degree];
            if p.len() != degree {
                return Err(GroupError::BadPermutation { name: name.clone(), degree });
            }
            for &v in p {
                if v >= degree || seen[v] {
                    return Err(GroupError::BadPermutation { name: name.clone(), degree });
                }
                seen[v] = true;
            }
        }
        let id: Vec<usize> = (0..degree).collect();
        let mut elems: Vec<Vec<usize>> = vec![id.clone()];
        let mut index = std::collections::HashMap::new();
        index.insert(id, 0usize);
        let mut frontier = vec![0usize];
        while let Some(i) = frontier.pop() {
            let cur = elems[i].clone();
            for (_, g) in gens {
                let next: Vec<usize> = cur.iter().map(|&x| g[x]).collect();
                if !index.contains_key(&next) {
                    if elems.len() >= budget {
                        return Err(GroupError::ClosureBudget { budget });
                    }
                    index.insert(next.clone(), elems.len());
                    frontier.insert(0, elems.len());
                    elems.push(next);
                }
            }
        }
        let order = elems.len();
        let mut mul = Vec::with_capacity(order * order);
        for a in &elems {
            for b in &elems {
                let prod: Vec<usize> = a.iter().map(|&x| b[x]).collect();
                mul.push(index[&prod]);
            }
        }
        let gen_indices = gens.iter().map(|(_, p)| index[p]).collect();
        let mut g = FiniteGroup { order, mul, inv: Vec::new(), labels: None };
        g.inv = g.derive_inverses();
        Ok((g, gen_indices))
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mul[a * self.order + b]
    }

    #[inline]
    pub fn inv(&self, a: usize) -> usize {
        self.inv[a]
    }

    pub fn identity(&self) -> usize {
        0
    }

    /// `a^k` for any integer `k` (negative powers via the inverse).
    pub fn pow(&self, a: usize, k: i64) -> usize {
        let (base, reps) = if k < 0 { (self.inv(a), -k) } else { (a, k) };
        let mut acc = 0;
        for _ in 0..reps {
            acc = self.mul(acc, base);
        }
        acc
    }

    /// Multiplicative order of an element.
    pub fn element_order(&self, a: usize) -> usize {
        let mut x = a;
        let mut n = 1;
        while x != 0 {
            x = self.mul(x, a);
            n += 1;
        }
        n
    }

    pub fn commutator(&self, a: usize, b: usize) -> usize {
        self.mul(self.mul(a, b), self.mul(self.inv(a), self.inv(b)))
    }

    /// Display label for an element (falls back to `g{i}`).
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => {
                if i == 0 {
                    "1".to_string()
                } else {
                    format!("g{i}")
                }
            }
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Element index for a label, if labels are present and match.
    pub fn element_by_label(&self, s: &str) -> Option<usize> {
        self.labels.as_ref()?.iter().position(|l| l == s)
    }

    /// Check the group laws and report the first witness per failing law,
    /// plus the prime-power factorization of the order.
    pub fn validate(&self) -> GroupReport {
        let identity = (1..self.order)
            .find(|&a| self.mul(0, a) != a || self.mul(a, 0) != a)
            .map_or(Ok(()), |witness| Err(GroupError::BrokenIdentity { witness }));
        let inverses = (0..self.order)
            .find(|&a| self.inv[a] == usize::MAX)
            .map_or(Ok(()), |witness| Err(GroupError::MissingInverse { witness }));
        let mut associativity = Ok(());
        'outer: for a in 0..self.order {
            for b in 0..self.order {
                let ab = self.mul(a, b);
                for c in 0..self.order {
                    if self.mul(ab, c) != self.mul(a, self.mul(b, c)) {
                        associativity = Err(GroupError::NotAssociative { a, b, c });
                        break 'outer;
                    }
                }
            }
        }
        let prime_power = fp::prime_power(self.order);
        GroupReport { identity, inverses, associativity, prime_power }
    }

    /// Is this a p-group for the given prime (trivial group counts)?
    pub fn is_p_group(&self, p: u32) -> bool {
        fp::is_p_power(self.order, p)
    }
}

/// A subgroup: a sorted set of element indices of a shared parent group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Subgroup {
    parent: Grp,
    elements: Vec<usize>,
}

impl PartialEq for Subgroup {
    fn eq(&self, other: &Self) -> bool {
        self.parent == other.parent && self.elements == other.elements
    }
}
impl Eq for Subgroup {}

impl Subgroup {
    /// The subgroup generated by `seed` (breadth-first closure under
    /// products; always contains the identity).
    pub fn closure(parent: &Grp, seed: &[usize]) -> Self {
        let mut member = vec![false; parent.order()];
        member[0] = true;
        let mut elems = vec![0usize];
        let mut frontier = vec![0usize];
        for &s in seed {
            assert!(s < parent.order(), "seed element out of range");
            if !member[s] {
                member[s] = true;
                elems.push(s);
                frontier.push(s);
            }
        }
        // Close under products with the seed (and inverses via finiteness).
        while let Some(x) = frontier.pop() {
            for &s in seed {
                for prod in [parent.mul(x, s), parent.mul(s, x)] {
                    if !member[prod] {
                        member[prod] = true;
                        elems.push(prod);
                        frontier.push(prod);
                    }
                }
            }
        }
        elems.sort_unstable();
        Subgroup { parent: Arc::clone(parent), elements: elems }
    }

    /// Subgroup from an explicit element list; errors if the set is not
    /// closed or misses the identity.
    pub fn from_elements(parent: &Grp, elements: &[usize]) -> Result<Self, GroupError> {
        let set: BTreeSet<usize> = elements.iter().copied().collect();
        for &e in &set {
            if e >= parent.order() {
                return Err(GroupError::NotInSubgroup { witness: e });
            }
        }
        if !set.contains(&0) {
            return Err(GroupError::NotInSubgroup { witness: 0 });
        }
        for &a in &set {
            for &b in &set {
                if !set.contains(&parent.mul(a, b)) {
                    return Err(GroupError::NotInSubgroup { witness: parent.mul(a, b) });
                }
            }
        }
        Ok(Subgroup { parent: Arc::clone(parent), elements: set.into_iter().collect() })
    }

    pub fn trivial(parent: &Grp) -> Self {
        Subgroup { parent: Arc::clone(parent), elements: vec![0] }
    }

    pub fn whole(parent: &Grp) -> Self {
        Subgroup { parent: Arc::clone(parent), elements: (0..parent.order()).collect() }
    }

    pub fn parent(&self) -> &Grp {
        &self.parent
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.elements.len() == 1
    }

    pub fn is_whole(&self) -> bool {
        self.elements.len() == self.parent.order()
    }

    pub fn contains(&self, e: usize) -> bool {
        self.elements.binary_search(&e).is_ok()
    }

    pub fn contains_all(&self, other: &Subgroup) -> bool {
        other.elements.iter().all(|&e| self.contains(e))
    }

    /// Is this subgroup normal in its parent?
    pub fn is_normal(&self) -> Result<(), GroupError> {
        for g in 0..self.parent.order() {
            for &h in &self.elements {
                let conj = self.parent.mul(self.parent.mul(g, h), self.parent.inv(g));
                if !self.contains(conj) {
                    return Err(GroupError::NotNormal { g, h });
                }
            }
        }
        Ok(())
    }

    /// Intersection with another subgroup of the same parent.
    pub fn intersect(&self, other: &Subgroup) -> Result<Subgroup, GroupError> {
        if self.parent != other.parent {
            return Err(GroupError::ParentMismatch);
        }
        let elements = self.elements.iter().copied().filter(|&e| other.contains(e)).collect();
        Ok(Subgroup { parent: Arc::clone(&self.parent), elements })
    }

    /// Present the subgroup as a standalone group. Elements are reindexed in
    /// ascending parent order, so index 0 stays the identity; the returned
    /// vector maps new indices back to parent element indices.
    pub fn as_group(&self) -> (Grp, Vec<usize>) {
        let incl = self.elements.clone();
        let pos = |e: usize| self.elements.binary_search(&e).expect("closed subgroup");
        let n = incl.len();
        let mut mul = Vec::with_capacity(n * n);
        for &a in &incl {
            for &b in &incl {
                mul.push(pos(self.parent.mul(a, b)));
            }
        }
        let labels = Some(incl.iter().map(|&e| self.parent.label(e)).collect());
        let mut g = FiniteGroup { order: n, mul, inv: Vec::new(), labels };
        g.inv = g.derive_inverses();
        (Arc::new(g), incl)
    }
}

impl fmt::Display for Subgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, &e) in self.elements.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

/// Quotient of `parent` by a normal subgroup `n`.
///
/// Cosets are labeled by their minimal element; the identity coset comes
/// first and the rest follow in ascending representative order, so the
/// construction is deterministic. Returns the quotient and the projection.
pub fn quotient_group(parent: &Grp, n: &Subgroup) -> Result<(Grp, GroupHom), GroupError> {
    if **n.parent() != **parent {
        return Err(GroupError::ParentMismatch);
    }
    n.is_normal()?;
    let order = parent.order();
    let mut coset_of = vec![usize::MAX; order];
    let mut reps = Vec::new();
    for e in 0..order {
        if coset_of[e] != usize::MAX {
            continue;
        }
        // e is the minimal element of a fresh coset e·N.
        let idx = reps.len();
        reps.push(e);
        for &h in n.elements() {
            coset_of[parent.mul(e, h)] = idx;
        }
    }
    let q_order = reps.len();
    let mut mul = Vec::with_capacity(q_order * q_order);
    for &a in &reps {
        for &b in &reps {
            mul.push(coset_of[parent.mul(a, b)]);
        }
    }
    let labels = Some(reps.iter().map(|&r| parent.label(r)).collect());
    let mut q = FiniteGroup { order: q_order, mul, inv: Vec::new(), labels };
    q.inv = q.derive_inverses();
    let q = Arc::new(q);
    let proj = GroupHom { source: Arc::clone(parent), target: Arc::clone(&q), map: coset_of };
    Ok((q, proj))
}

/// A total map between groups, recorded element-by-element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupHom {
    source: Grp,
    target: Grp,
    /// `map[a]` is the image of source element `a`.
    map: Vec<usize>,
}

impl GroupHom {
    pub fn new(source: &Grp, target: &Grp, map: Vec<usize>) -> Result<Self, GroupError> {
        if map.len() != source.order() {
            return Err(GroupError::BadShape { row: 0, len: map.len(), order: source.order() });
        }
        if let Some((a, &v)) = map.iter().enumerate().find(|&(_, &v)| v >= target.order()) {
            return Err(GroupError::EntryOutOfRange { a, b: 0, value: v, order: target.order() });
        }
        Ok(GroupHom { source: Arc::clone(source), target: Arc::clone(target), map })
    }

    pub fn identity(g: &Grp) -> Self {
        GroupHom { source: Arc::clone(g), target: Arc::clone(g), map: (0..g.order()).collect() }
    }

    pub fn source(&self) -> &Grp {
        &self.source
    }

    pub fn target(&self) -> &Grp {
        &self.target
    }

    #[inline]
    pub fn apply(&self, a: usize) -> usize {
        self.map[a]
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    /// Check the homomorphism law on all pairs; first failing pair reported.
    pub fn validate(&self) -> Result<(), GroupError> {
        if self.map[0] != 0 {
            return Err(GroupError::BrokenIdentity { witness: self.map[0] });
        }
        for a in 0..self.source.order() {
            for b in 0..self.source.order() {
                if self.map[self.source.mul(a, b)] != self.target.mul(self.map[a], self.map[b]) {
                    return Err(GroupError::NotAssociative { a, b, c: 0 });
                }
            }
        }
        Ok(())
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = vec![false; self.target.order()];
        self.map.iter().all(|&v| !std::mem::replace(&mut seen[v], true))
    }

    /// `other ∘ self` (apply `self` first).
    pub fn then(&self, other: &GroupHom) -> Result<GroupHom, GroupError> {
        if self.target != other.source {
            return Err(GroupError::ParentMismatch);
        }
        Ok(GroupHom {
            source: Arc::clone(&self.source),
            target: Arc::clone(&other.target),
            map: self.map.iter().map(|&v| other.map[v]).collect(),
        })
    }

    /// Image of the whole source as a subgroup of the target.
    pub fn image(&self) -> Subgroup {
        let set: BTreeSet<usize> = self.map.iter().copied().collect();
        Subgroup { parent: Arc::clone(&self.target), elements: set.into_iter().collect() }
    }

    /// Image of a subgroup of the source.
    pub fn image_of(&self, sub: &Subgroup) -> Subgroup {
        let set: BTreeSet<usize> = sub.elements().iter().map(|&e| self.map[e]).collect();
        Subgroup { parent: Arc::clone(&self.target), elements: set.into_iter().collect() }
    }

    /// Preimage of a subgroup of the target.
    pub fn preimage_of(&self, sub: &Subgroup) -> Subgroup {
        let elements =
            (0..self.source.order()).filter(|&e| sub.contains(self.map[e])).collect();
        Subgroup { parent: Arc::clone(&self.source), elements }
    }
}

/// A descending chain of subgroups normal in the whole group, factors
/// trivial or of order p, read with an implicit trivial tail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChiefSeries {
    terms: Vec<Subgroup>,
}

/// One factor `S_k / S_{k+1}` of a chief series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiefFactor {
    Trivial,
    /// Cyclic of order p; `generator` is the minimal element index of
    /// `S_k \ S_{k+1}`, whose coset generates the factor.
    OrderP { generator: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("series is empty")]
    Empty,
    #[error("series terms live in different parent groups")]
    ParentMismatch,
    #[error("series must start at the whole group")]
    NotWhole,
    #[error("series must end at the trivial subgroup")]
    NotTrivial,
    #[error("term {k} does not contain term {}", k + 1)]
    NotDescending { k: usize },
    #[error("term {k} is not normal in the whole group")]
    NotNormal { k: usize },
    #[error("factor at level {k} has order {order}, expected 1 or {p}")]
    BadFactor { k: usize, order: usize, p: u32 },
}

impl ChiefSeries {
    pub fn new(terms: Vec<Subgroup>) -> Self {
        ChiefSeries { terms }
    }

    /// Check the chain laws for the prime `p`. Returns the length: the first
    /// index whose term is trivial (every later term must stay trivial).
    pub fn verify(&self, p: u32) -> Result<usize, SeriesError> {
        if self.terms.is_empty() {
            return Err(SeriesError::Empty);
        }
        let parent = self.terms[0].parent();
        for t in &self.terms {
            if t.parent() != parent {
                return Err(SeriesError::ParentMismatch);
            }
        }
        if !self.terms[0].is_whole() {
            return Err(SeriesError::NotWhole);
        }
        if !self.terms.last().unwrap().is_trivial() {
            return Err(SeriesError::NotTrivial);
        }
        for (k, t) in self.terms.iter().enumerate() {
            t.is_normal().map_err(|_| SeriesError::NotNormal { k })?;
            if k + 1 < self.terms.len() {
                let next = &self.terms[k + 1];
                if !t.contains_all(next) {
                    return Err(SeriesError::NotDescending { k });
                }
                let (a, b) = (t.order(), next.order());
                if a != b && a != b * p as usize {
                    return Err(SeriesError::BadFactor { k, order: a / b, p });
                }
            }
        }
        Ok(self.terms.iter().position(|t| t.is_trivial()).unwrap())
    }

    /// Term at level `k`, reading the implicit trivial tail beyond the end.
    /// Only meaningful on a verified series (whose last term is trivial).
    pub fn term(&self, k: usize) -> &Subgroup {
        self.terms.get(k).unwrap_or_else(|| self.terms.last().expect("nonempty series"))
    }

    pub fn terms(&self) -> &[Subgroup] {
        &self.terms
    }

    pub fn parent(&self) -> &Grp {
        self.terms[0].parent()
    }

    /// Number of stored terms (not the length; see [`ChiefSeries::verify`]).
    pub fn stored_len(&self) -> usize {
        self.terms.len()
    }

    /// The factor `S_k / S_{k+1}`.
    pub fn factor(&self, k: usize) -> ChiefFactor {
        let (s, t) = (self.term(k), self.term(k + 1));
        if s.order() == t.order() {
            ChiefFactor::Trivial
        } else {
            let generator = s
                .elements()
                .iter()
                .copied()
                .find(|&e| !t.contains(e))
                .expect("proper factor has a coset representative");
            ChiefFactor::OrderP { generator }
        }
    }

    /// Discrete log of `g ∈ S_k` against the factor generator: the unique
    /// `j` in `0..p` with `g ≡ generator^j (mod S_{k+1})`. `None` when the
    /// factor is trivial but `g` is not in `S_{k+1}` (a chain defect), or
    /// when `g` lies outside `S_k`.
    pub fn factor_dlog(&self, k: usize, g: usize, p: u32) -> Option<u32> {
        let parent = self.parent();
        if !self.term(k).contains(g) {
            return None;
        }
        let next = self.term(k + 1);
        match self.factor(k) {
            ChiefFactor::Trivial => next.contains(g).then_some(0),
            ChiefFactor::OrderP { generator } => (0..p).find(|&j| {
                next.contains(parent.mul(g, parent.inv(parent.pow(generator, j as i64))))
            }),
        }
    }

    /// Shift the series down one level: the chain `[S_1, S_2, ...]` of the
    /// subgroup `S_1`, reindexed through `S_1.as_group()`. Returns the new
    /// series together with the group and inclusion produced by `as_group`.
    pub fn shifted_into_head(&self) -> (Grp, Vec<usize>, ChiefSeries) {
        let head = self.term(1);
        let (g, incl) = head.as_group();
        let pos = |e: usize| incl.binary_search(&e).expect("series term inside head");
        let mut terms = Vec::new();
        let upper = self.stored_len().max(2);
        for k in 1..upper {
            let elements: Vec<usize> = self.term(k).elements().iter().map(|&e| pos(e)).collect();
            terms.push(Subgroup { parent: Arc::clone(&g), elements });
        }
        if !terms.last().map(|t: &Subgroup| t.is_trivial()).unwrap_or(false) {
            terms.push(Subgroup::trivial(&g));
        }
        (g, incl, ChiefSeries { terms })
    }
}
