//! Shared oracles for the integration suites: independent normal forms for
//! the two worked word problems, a catalogue of the 3-groups of order at
//! most 27, and word-enumeration helpers.

use psep::gog::{GWord, GraphOfGroups, Letter, SpanningData};
use psep::pgroups::FiniteGroup;

/// Path of a bundled problem file.
pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

// ---------------------------------------------------------------------------
// Oracle for the C4 *_C2 C4 word problem.
//
// The amalgamated subgroup ⟨z⟩ = ⟨a²⟩ = ⟨b²⟩ is central on both sides, so
// the classical normal form c·s₁⋯sₙ (c in the amalgamated subgroup, sᵢ
// alternating nontrivial coset representatives) multiplies with carries
// that commute past every syllable. Each side has a single nontrivial
// representative (a respectively b), so an element is exactly a central
// bit and an alternating string.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AmalgamNf {
    /// Power of the central involution z = a² = b².
    pub eps: bool,
    /// Strictly alternating sides: 0 for the a-representative, 1 for b.
    pub syllables: Vec<u8>,
}

impl AmalgamNf {
    pub fn identity() -> AmalgamNf {
        AmalgamNf { eps: false, syllables: Vec::new() }
    }

    fn append_rep(&mut self, side: u8) {
        if self.syllables.last() == Some(&side) {
            // a·a = z and b·b = z: the doubled representative collapses
            // into the central bit.
            self.syllables.pop();
            self.eps = !self.eps;
        } else {
            self.syllables.push(side);
        }
    }

    /// Right-multiply by the k-th power of the side's generator.
    pub fn apply_power(&mut self, side: u8, k: usize) {
        let k = k % 4;
        if k >= 2 {
            self.eps = !self.eps;
        }
        if k % 2 == 1 {
            self.append_rep(side);
        }
    }

    pub fn is_identity(&self) -> bool {
        !self.eps && self.syllables.is_empty()
    }
}

/// Oracle normal form of a word in C4 *_C2 C4. Vertex 0 is the a-side,
/// vertex 1 the b-side; the single edge pair lies in the spanning tree, so
/// its stable letters carry no content.
pub fn amalgam_nf(w: &GWord) -> AmalgamNf {
    let mut nf = AmalgamNf::identity();
    for letter in &w.letters {
        match *letter {
            Letter::Vertex { vertex, element } => nf.apply_power(vertex as u8, element),
            Letter::Stable { .. } => {}
        }
    }
    nf
}

// ---------------------------------------------------------------------------
// Oracle for the word problem of the C3 extension by a squaring letter.
//
// When both associated subgroups are the whole vertex group, the extension
// is the mapping torus C3 ⋊ Z with t acting by a ↦ a². Writing every
// element as aᵏ·tᵐ gives a faithful coordinate pair, with
// aᵏ tᵐ aʲ = a^(k + j·2^m) tᵐ and 2 ≡ −1 (mod 3).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HnnNf {
    pub k: u32,
    pub m: i64,
}

/// Oracle normal form of a word in ⟨a, t | a³, t a t⁻¹ = a²⟩. Directed
/// edge 0 is t, directed edge 1 its inverse.
pub fn hnn_nf(w: &GWord) -> HnnNf {
    let (mut k, mut m) = (0u32, 0i64);
    for letter in &w.letters {
        match *letter {
            Letter::Vertex { element, .. } => {
                let j = element as u32 % 3;
                let twisted = if m.rem_euclid(2) == 0 { j } else { (2 * j) % 3 };
                k = (k + twisted) % 3;
            }
            Letter::Stable { edge } => m += if edge == 0 { 1 } else { -1 },
        }
    }
    HnnNf { k, m }
}

// ---------------------------------------------------------------------------
// The 3-groups of order at most 27.
// ---------------------------------------------------------------------------

pub fn direct_product(a: &FiniteGroup, b: &FiniteGroup) -> FiniteGroup {
    let (na, nb) = (a.order(), b.order());
    let table: Vec<Vec<usize>> = (0..na * nb)
        .map(|x| {
            (0..na * nb)
                .map(|y| a.mul(x / nb, y / nb) * nb + b.mul(x % nb, y % nb))
                .collect()
        })
        .collect();
    FiniteGroup::from_mul_table(table, None).expect("product table is well formed")
}

/// The Heisenberg group mod 3 — order 27, exponent 3. Triples (x, y, z)
/// indexed x·9 + y·3 + z, with (x,y,z)·(x',y',z') = (x+x', y+y', z+z'+x·y').
pub fn heisenberg3() -> FiniteGroup {
    let idx = |x: usize, y: usize, z: usize| x * 9 + y * 3 + z;
    let table: Vec<Vec<usize>> = (0..27)
        .map(|g| {
            let (x, y, z) = (g / 9, (g / 3) % 3, g % 3);
            (0..27)
                .map(|h| {
                    let (x2, y2, z2) = (h / 9, (h / 3) % 3, h % 3);
                    idx((x + x2) % 3, (y + y2) % 3, (z + z2 + x * y2) % 3)
                })
                .collect()
        })
        .collect();
    FiniteGroup::from_mul_table(table, None).expect("Heisenberg table is well formed")
}

/// The modular group of order 27 — exponent 9. Pairs (i, j) in Z9 × Z3
/// indexed i·3 + j, with (i,j)·(i',j') = (i + 4ʲ·i', j+j'); 4 generates
/// the order-3 subgroup of the units mod 9.
pub fn modular27() -> FiniteGroup {
    let pow4 = [1usize, 4, 7];
    let table: Vec<Vec<usize>> = (0..27)
        .map(|g| {
            let (i, j) = (g / 3, g % 3);
            (0..27)
                .map(|h| {
                    let (i2, j2) = (h / 3, h % 3);
                    ((i + pow4[j] * i2) % 9) * 3 + (j + j2) % 3
                })
                .collect()
        })
        .collect();
    FiniteGroup::from_mul_table(table, None).expect("modular table is well formed")
}

/// Every 3-group of order ≤ 27, one per isomorphism class: the trivial
/// group; C3; C9 and C3×C3; and the five groups of order 27 (three abelian,
/// the exponent-3 Heisenberg group, and the exponent-9 modular group).
pub fn three_groups_up_to_27() -> Vec<(&'static str, FiniteGroup)> {
    let c3 = FiniteGroup::cyclic(3);
    let c9 = FiniteGroup::cyclic(9);
    let groups = vec![
        ("1", FiniteGroup::trivial()),
        ("C3", c3.clone()),
        ("C9", c9.clone()),
        ("C3xC3", direct_product(&c3, &c3)),
        ("C27", FiniteGroup::cyclic(27)),
        ("C9xC3", direct_product(&c9, &c3)),
        ("C3xC3xC3", direct_product(&direct_product(&c3, &c3), &c3)),
        ("He3", heisenberg3()),
        ("M27", modular27()),
    ];
    for (name, g) in &groups {
        assert!(g.is_p_group(3), "{name} is not a 3-group");
    }
    groups
}

// ---------------------------------------------------------------------------
// Word enumeration.
// ---------------------------------------------------------------------------

/// Every nonidentity vertex-group element as a letter, plus a stable letter
/// for each direction of each non-tree pair.
pub fn full_alphabet(gog: &GraphOfGroups, sd: &SpanningData) -> Vec<Letter> {
    let graph = gog.graph();
    let mut out = Vec::new();
    for v in 0..graph.vertex_count() {
        for e in 1..gog.vertex_group(v).order() {
            out.push(Letter::Vertex { vertex: v, element: e });
        }
    }
    for q in 0..graph.pair_count() {
        if !sd.is_tree_pair(q) {
            out.push(Letter::Stable { edge: graph.plus_of(q) });
            out.push(Letter::Stable { edge: graph.bar(graph.plus_of(q)) });
        }
    }
    out
}

/// All words over `alphabet` of length 0 through `max_len`, in a fixed
/// order starting with the empty word.
pub fn all_words(basepoint: usize, alphabet: &[Letter], max_len: usize) -> Vec<GWord> {
    let mut out = vec![GWord::empty(basepoint)];
    let mut layer: Vec<Vec<Letter>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * alphabet.len());
        for prefix in &layer {
            for &l in alphabet {
                let mut letters = prefix.clone();
                letters.push(l);
                out.push(GWord { basepoint, letters: letters.clone() });
                next.push(letters);
            }
        }
        layer = next;
    }
    out
}
