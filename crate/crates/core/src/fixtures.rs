//! Small worked examples used by tests, documentation, and the bundled
//! problem files.
//!
//! Each constructor returns a fully validated [`GraphOfGroups`]; chief
//! series and level maps for them are built where needed (or searched for).

use crate::gog::{Graph, GraphOfGroups, PairSpec};
use crate::pgroups::{FiniteGroup, GroupHom, Grp};
use std::sync::Arc;

fn labeled_cyclic(n: usize, sym: &str) -> FiniteGroup {
    let table: Vec<Vec<usize>> = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
    let labels = (0..n)
        .map(|i| match i {
            0 => "1".to_string(),
            1 => sym.to_string(),
            _ => format!("{sym}{i}"),
        })
        .collect();
    FiniteGroup::from_mul_table(table, Some(labels)).expect("cyclic table is well formed")
}

/// Two copies of C4 amalgamated over C2: vertices `u` (group generated by
/// `a`) and `v` (generated by `b`), one edge pair `e`, the edge group C2
/// embedding as `a^2` on one side and `b^2` on the other. The prime is 2.
pub fn amalgam_c4_c2_c4() -> GraphOfGroups {
    let graph = Graph::new(
        vec!["u".into(), "v".into()],
        &[PairSpec { name: "e".into(), bar_name: "e'".into(), from: 0, to: 1 }],
    )
    .unwrap();
    let gu: Grp = Arc::new(labeled_cyclic(4, "a"));
    let gv: Grp = Arc::new(labeled_cyclic(4, "b"));
    let ge: Grp = Arc::new(labeled_cyclic(2, "c"));
    let into_v = GroupHom::new(&ge, &gv, vec![0, 2]).unwrap();
    let into_u = GroupHom::new(&ge, &gu, vec![0, 2]).unwrap();
    GraphOfGroups::new(graph, 2, vec![gu, gv], vec![ge], vec![into_v, into_u]).unwrap()
}

/// One vertex carrying C3 (generated by `a`) and one loop `t`: crossing the
/// loop conjugates `a` to `a^2`, since the forward embedding is the
/// identity and the reverse one is squaring. The prime is 3. No chief
/// series data makes this compatible — the loop multiplies the level of
/// `a` by 2.
pub fn hnn_c3_squaring() -> GraphOfGroups {
    let graph = Graph::new(
        vec!["x".into()],
        &[PairSpec { name: "t".into(), bar_name: "t'".into(), from: 0, to: 0 }],
    )
    .unwrap();
    let gx: Grp = Arc::new(labeled_cyclic(3, "a"));
    let ge: Grp = Arc::new(labeled_cyclic(3, "c"));
    let fwd = GroupHom::new(&ge, &gx, vec![0, 1, 2]).unwrap();
    let rev = GroupHom::new(&ge, &gx, vec![0, 2, 1]).unwrap();
    GraphOfGroups::new(graph, 3, vec![gx], vec![ge], vec![fwd, rev]).unwrap()
}

/// A rose with `rank` loops, trivial groups everywhere: the fundamental
/// group is free of the given rank. The prime is a parameter, since the
/// descent target depends on it.
pub fn rose(rank: usize, prime: u32) -> GraphOfGroups {
    let pairs: Vec<PairSpec> = (0..rank)
        .map(|i| PairSpec {
            name: format!("t{}", i + 1),
            bar_name: format!("t{}'", i + 1),
            from: 0,
            to: 0,
        })
        .collect();
    let graph = Graph::new(vec!["x".into()], &pairs).unwrap();
    let triv: Grp = Arc::new(FiniteGroup::trivial());
    let monos = (0..2 * rank).map(|_| GroupHom::new(&triv, &triv, vec![0]).unwrap()).collect();
    GraphOfGroups::new(graph, prime, vec![triv.clone()], vec![triv; rank], monos).unwrap()
}

/// A single vertex carrying the cyclic group of order `p`, no edges: the
/// fundamental group is C_p itself.
pub fn single_vertex_cp(p: usize) -> GraphOfGroups {
    let graph = Graph::new(vec!["x".into()], &[]).unwrap();
    let gx: Grp = Arc::new(labeled_cyclic(p, "a"));
    let prime = crate::fp::prime_power(p).expect("p must be a prime power").0;
    GraphOfGroups::new(graph, prime, vec![gx], vec![], vec![]).unwrap()
}

/// A segment with C2 at both ends (`a` on the left vertex, `b` on the
/// right) over a trivial edge group: the fundamental group is the infinite
/// dihedral group C2 * C2. The prime is 2.
pub fn segment_c2_c2() -> GraphOfGroups {
    let graph = Graph::new(
        vec!["u".into(), "v".into()],
        &[PairSpec { name: "e".into(), bar_name: "e'".into(), from: 0, to: 1 }],
    )
    .unwrap();
    let gu: Grp = Arc::new(labeled_cyclic(2, "a"));
    let gv: Grp = Arc::new(labeled_cyclic(2, "b"));
    let ge: Grp = Arc::new(FiniteGroup::trivial());
    let into_v = GroupHom::new(&ge, &gv, vec![0]).unwrap();
    let into_u = GroupHom::new(&ge, &gu, vec![0]).unwrap();
    GraphOfGroups::new(graph, 2, vec![gu, gv], vec![ge], vec![into_v, into_u]).unwrap()
}

/// C2 amalgamated into C4 along the squares — one proper edge embedding is
/// surjective onto C2, so the fundamental group is just C4. Useful as the
/// smallest example where an edge group surjects onto a vertex group.
pub fn amalgam_c2_c2_c4() -> GraphOfGroups {
    let graph = Graph::new(
        vec!["u".into(), "v".into()],
        &[PairSpec { name: "e".into(), bar_name: "e'".into(), from: 0, to: 1 }],
    )
    .unwrap();
    let gu: Grp = Arc::new(labeled_cyclic(2, "a"));
    let gv: Grp = Arc::new(labeled_cyclic(4, "b"));
    let ge: Grp = Arc::new(labeled_cyclic(2, "c"));
    let into_v = GroupHom::new(&ge, &gv, vec![0, 2]).unwrap();
    let into_u = GroupHom::new(&ge, &gu, vec![0, 1]).unwrap();
    GraphOfGroups::new(graph, 2, vec![gu, gv], vec![ge], vec![into_v, into_u]).unwrap()
}

/// One vertex carrying C2 and one loop whose embeddings are both the
/// identity on C2: the fundamental group is C2 × Z. The prime is 2.
pub fn hnn_c2_identity() -> GraphOfGroups {
    let graph = Graph::new(
        vec!["x".into()],
        &[PairSpec { name: "t".into(), bar_name: "t'".into(), from: 0, to: 0 }],
    )
    .unwrap();
    let gx: Grp = Arc::new(labeled_cyclic(2, "a"));
    let ge: Grp = Arc::new(labeled_cyclic(2, "c"));
    let fwd = GroupHom::new(&ge, &gx, vec![0, 1]).unwrap();
    let rev = GroupHom::new(&ge, &gx, vec![0, 1]).unwrap();
    GraphOfGroups::new(graph, 2, vec![gx], vec![ge], vec![fwd, rev]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gog::{GWord, Letter, SpanningData};

    #[test]
    fn constructors_validate() {
        amalgam_c4_c2_c4();
        hnn_c3_squaring();
        rose(3, 2);
        single_vertex_cp(8);
        segment_c2_c2();
        amalgam_c2_c2_c4();
        hnn_c2_identity();
    }

    #[test]
    fn surjective_edge_amalgam_collapses_to_c4() {
        // In C2 *_{C2} C4 with the edge group hitting all of C2, the vertex
        // generator a equals b^2, so a·b^2 is trivial and b generates.
        let gog = amalgam_c2_c2_c4();
        let sd = SpanningData::new(gog.graph()).unwrap();
        let w = GWord {
            basepoint: 0,
            letters: vec![
                Letter::Vertex { vertex: 0, element: 1 },
                Letter::Vertex { vertex: 1, element: 2 },
            ],
        };
        assert!(gog.is_trivial_word(&sd, &w));
        let b = GWord { basepoint: 0, letters: vec![Letter::Vertex { vertex: 1, element: 1 }] };
        let mut b4 = b.clone();
        for _ in 0..3 {
            b4 = gog.word_concat(&b4, &b);
        }
        assert!(gog.is_trivial_word(&sd, &b4));
        assert!(!gog.is_trivial_word(&sd, &b));
    }

    #[test]
    fn central_hnn_commutes() {
        let gog = hnn_c2_identity();
        let sd = SpanningData::new(gog.graph()).unwrap();
        let comm = GWord {
            basepoint: 0,
            letters: vec![
                Letter::Stable { edge: 0 },
                Letter::Vertex { vertex: 0, element: 1 },
                Letter::Stable { edge: 1 },
                Letter::Vertex { vertex: 0, element: 1 },
            ],
        };
        assert!(gog.is_trivial_word(&sd, &comm));
    }
}
