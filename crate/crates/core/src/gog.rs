//! Finite graphs of finite p-groups and words in their fundamental groups.
//!
//! A graph is stored with its directed edges interleaved: pair `i` occupies
//! directed indices `2i` (the forward, "plus" direction) and `2i+1` (its
//! reverse), so reversal is `e ^ 1` and the pair index is `e >> 1`.
//!
//! The fundamental group is taken relative to a spanning tree: generators
//! are the vertex-group elements plus one stable letter per edge pair, the
//! stable letters of tree pairs are the identity, and for each directed
//! edge `y` with embedding `f_y` into the group at its terminus the
//! relation `u(y) · f_y(c) · u(y)^{-1} = f_{ȳ}(c)` holds, where `u(y)` is
//! the stable letter of `y`'s pair, inverted when `y` is a reverse edge.
//!
//! Words are letter sequences (vertex-group elements tagged with their
//! vertex, and stable letters tagged with a directed edge). Any sequence
//! denotes a group element: walking the letters from the basepoint inserts
//! tree geodesics — which cost nothing, tree stable letters being trivial —
//! so no composability discipline is imposed on input. Reduction converts a
//! word to a closed edge path and repeatedly pinches subpaths `y · b · ȳ`
//! with `b` in the image of `f_y`; a pinch-free path with at least one edge
//! denotes a nontrivial element, which is what makes the word problem
//! decidable here.

use crate::pgroups::{GroupHom, Grp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const NONE: usize = usize::MAX;

/// Errors from graph construction, graph-of-groups validation, word
/// validation, and enumeration budgets.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GogError {
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("vertex index {vertex} out of range ({count} vertices)")]
    BadVertex { vertex: usize, count: usize },
    #[error("duplicate vertex name {name:?}")]
    DupVertexName { name: String },
    #[error("duplicate edge name {name:?}")]
    DupEdgeName { name: String },
    #[error("graph is not connected: vertex {name:?} is unreachable from the root")]
    Disconnected { name: String },
    #[error("expected {expected} vertex groups, got {got}")]
    VertexGroupCount { expected: usize, got: usize },
    #[error("expected {expected} edge groups, got {got}")]
    EdgeGroupCount { expected: usize, got: usize },
    #[error("expected {expected} edge embeddings, got {got}")]
    MonoCount { expected: usize, got: usize },
    #[error("group at {name:?} fails the group laws: {detail}")]
    BadGroup { name: String, detail: String },
    #[error("group at {name:?} has order {order}, which is not a power of {prime}")]
    NotPPower { name: String, order: usize, prime: u32 },
    #[error("embedding along edge {name:?}: source is not the pair's edge group")]
    MonoSource { name: String },
    #[error("embedding along edge {name:?}: target is not the terminal vertex group")]
    MonoTarget { name: String },
    #[error("embedding along edge {name:?} is not a homomorphism")]
    MonoNotHom { name: String },
    #[error("embedding along edge {name:?} is not injective")]
    MonoNotInjective { name: String },
    #[error("word letter {index}: {reason}")]
    BadLetter { index: usize, reason: String },
    #[error("enumeration budget of {limit} nodes exceeded")]
    Budget { limit: usize },
}

/// A finite graph with paired directed edges.
///
/// Deserialization reruns the constructor, so loaded graphs are validated
/// and have their adjacency cache rebuilt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Graph {
    vertex_names: Vec<String>,
    /// Origin vertex per directed edge; the terminus is the reverse's origin.
    origin: Vec<usize>,
    /// Name per directed edge (both directions of a pair are named).
    edge_names: Vec<String>,
    /// Directed edges leaving each vertex, in ascending edge order.
    #[serde(skip)]
    adjacency: Vec<Vec<usize>>,
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            vertex_names: Vec<String>,
            origin: Vec<usize>,
            edge_names: Vec<String>,
        }
        let raw = Raw::deserialize(deserializer)?;
        if raw.origin.len() % 2 != 0 || raw.origin.len() != raw.edge_names.len() {
            return Err(serde::de::Error::custom("directed edges must come in named pairs"));
        }
        let pairs: Vec<PairSpec> = (0..raw.origin.len() / 2)
            .map(|q| PairSpec {
                name: raw.edge_names[2 * q].clone(),
                bar_name: raw.edge_names[2 * q + 1].clone(),
                from: raw.origin[2 * q],
                to: raw.origin[2 * q + 1],
            })
            .collect();
        Graph::new(raw.vertex_names, &pairs).map_err(serde::de::Error::custom)
    }
}

/// One edge pair for [`Graph::new`]: a forward direction `from → to` named
/// `name`, and its reverse named `bar_name`.
#[derive(Debug, Clone)]
pub struct PairSpec {
    pub name: String,
    pub bar_name: String,
    pub from: usize,
    pub to: usize,
}

impl Graph {
    pub fn new(vertex_names: Vec<String>, pairs: &[PairSpec]) -> Result<Graph, GogError> {
        let n = vertex_names.len();
        if n == 0 {
            return Err(GogError::EmptyGraph);
        }
        {
            let mut seen = std::collections::HashSet::new();
            for name in &vertex_names {
                if !seen.insert(name) {
                    return Err(GogError::DupVertexName { name: name.clone() });
                }
            }
        }
        let mut origin = Vec::with_capacity(2 * pairs.len());
        let mut edge_names = Vec::with_capacity(2 * pairs.len());
        let mut seen = std::collections::HashSet::new();
        for p in pairs {
            for (v, name) in [(p.from, &p.name), (p.to, &p.bar_name)] {
                if v >= n {
                    return Err(GogError::BadVertex { vertex: v, count: n });
                }
                if !seen.insert(name.clone()) {
                    return Err(GogError::DupEdgeName { name: name.clone() });
                }
                origin.push(v);
                edge_names.push(name.clone());
            }
        }
        let mut g = Graph { vertex_names, origin, edge_names, adjacency: Vec::new() };
        g.rebuild_adjacency();
        Ok(g)
    }

    /// Graph with generated names: vertices `v0, v1, ...`, pair `i` named
    /// `e{i}` with reverse `e{i}'`.
    pub fn unnamed(vertices: usize, pairs: &[(usize, usize)]) -> Result<Graph, GogError> {
        let names = (0..vertices).map(|i| format!("v{i}")).collect();
        let specs: Vec<PairSpec> = pairs
            .iter()
            .enumerate()
            .map(|(i, &(from, to))| PairSpec {
                name: format!("e{i}"),
                bar_name: format!("e{i}'"),
                from,
                to,
            })
            .collect();
        Graph::new(names, &specs)
    }

    fn rebuild_adjacency(&mut self) {
        self.adjacency = vec![Vec::new(); self.vertex_names.len()];
        for e in 0..self.origin.len() {
            self.adjacency[self.origin[e]].push(e);
        }
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.vertex_names.len()
    }

    #[inline]
    pub fn pair_count(&self) -> usize {
        self.origin.len() / 2
    }

    #[inline]
    pub fn directed_count(&self) -> usize {
        self.origin.len()
    }

    #[inline]
    pub fn bar(&self, e: usize) -> usize {
        e ^ 1
    }

    #[inline]
    pub fn pair_of(&self, e: usize) -> usize {
        e >> 1
    }

    /// Is this directed edge the forward member of its pair?
    #[inline]
    pub fn is_plus(&self, e: usize) -> bool {
        e & 1 == 0
    }

    #[inline]
    pub fn plus_of(&self, pair: usize) -> usize {
        2 * pair
    }

    #[inline]
    pub fn origin(&self, e: usize) -> usize {
        self.origin[e]
    }

    #[inline]
    pub fn terminus(&self, e: usize) -> usize {
        self.origin[e ^ 1]
    }

    pub fn vertex_name(&self, v: usize) -> &str {
        &self.vertex_names[v]
    }

    pub fn edge_name(&self, e: usize) -> &str {
        &self.edge_names[e]
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<usize> {
        self.vertex_names.iter().position(|n| n == name)
    }

    pub fn edge_by_name(&self, name: &str) -> Option<usize> {
        self.edge_names.iter().position(|n| n == name)
    }

    /// Directed edges with origin `v`, ascending.
    pub fn edges_from(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }
}

/// A breadth-first spanning tree rooted at vertex 0, with tree geodesics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanningData {
    /// Per non-root vertex: the tree edge pointing from its parent to it.
    parent_edge: Vec<usize>,
    depth: Vec<usize>,
    /// Per pair: does it belong to the tree?
    tree_pair: Vec<bool>,
}

impl SpanningData {
    /// Breadth-first search from vertex 0, taking directed edges in
    /// ascending index order, so the tree is deterministic.
    pub fn new(graph: &Graph) -> Result<SpanningData, GogError> {
        let n = graph.vertex_count();
        let mut parent_edge = vec![NONE; n];
        let mut depth = vec![NONE; n];
        let mut tree_pair = vec![false; graph.pair_count()];
        depth[0] = 0;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            for &e in graph.edges_from(v) {
                let w = graph.terminus(e);
                if depth[w] == NONE {
                    depth[w] = depth[v] + 1;
                    parent_edge[w] = e;
                    tree_pair[graph.pair_of(e)] = true;
                    queue.push_back(w);
                }
            }
        }
        if let Some(v) = depth.iter().position(|&d| d == NONE) {
            return Err(GogError::Disconnected { name: graph.vertex_name(v).to_string() });
        }
        Ok(SpanningData { parent_edge, depth, tree_pair })
    }

    #[inline]
    pub fn is_tree_edge(&self, e: usize) -> bool {
        self.tree_pair[e >> 1]
    }

    #[inline]
    pub fn is_tree_pair(&self, pair: usize) -> bool {
        self.tree_pair[pair]
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    /// The unique backtrack-free tree path `u → v`, as directed edges.
    pub fn geodesic(&self, graph: &Graph, u: usize, v: usize) -> Vec<usize> {
        let mut up = Vec::new();
        let mut down = Vec::new();
        let (mut a, mut b) = (u, v);
        while self.depth[a] > self.depth[b] {
            up.push(graph.bar(self.parent_edge[a]));
            a = graph.origin(self.parent_edge[a]);
        }
        while self.depth[b] > self.depth[a] {
            down.push(self.parent_edge[b]);
            b = graph.origin(self.parent_edge[b]);
        }
        while a != b {
            up.push(graph.bar(self.parent_edge[a]));
            a = graph.origin(self.parent_edge[a]);
            down.push(self.parent_edge[b]);
            b = graph.origin(self.parent_edge[b]);
        }
        up.extend(down.into_iter().rev());
        up
    }
}

/// One letter of a word: an element of a vertex group, or the stable letter
/// of a directed edge (the reverse edge's stable letter is the inverse).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Letter {
    Vertex { vertex: usize, element: usize },
    Stable { edge: usize },
}

/// A word in the fundamental group, read left to right from `basepoint`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GWord {
    pub basepoint: usize,
    pub letters: Vec<Letter>,
}

impl GWord {
    pub fn empty(basepoint: usize) -> GWord {
        GWord { basepoint, letters: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

/// A closed edge path at `basepoint` with vertex-group elements between the
/// edges: `elems[0] · edges[0] · elems[1] · ... · edges[k-1] · elems[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathWord {
    pub basepoint: usize,
    pub edges: Vec<usize>,
    /// Always one longer than `edges`; `elems[i]` lives in the group at the
    /// path's `i`-th vertex.
    pub elems: Vec<usize>,
}

impl PathWord {
    /// The vertex the path sits at after `i` edges.
    pub fn vertex_at(&self, graph: &Graph, i: usize) -> usize {
        if i == 0 {
            self.basepoint
        } else {
            graph.terminus(self.edges[i - 1])
        }
    }

    pub fn is_identity(&self) -> bool {
        self.edges.is_empty() && self.elems[0] == 0
    }
}

/// A finite connected graph with a finite p-group on every vertex and edge
/// pair, and an injective homomorphism from each pair's group into the
/// group at each endpoint.
///
/// Deserialization runs the full constructor, so loaded values are as
/// validated (and as precomputed) as built ones.
#[derive(Debug, Clone, Serialize)]
pub struct GraphOfGroups {
    graph: Graph,
    prime: u32,
    vertex_groups: Vec<Grp>,
    /// One group per edge pair.
    edge_groups: Vec<Grp>,
    /// Per directed edge `y`: the embedding of the pair's group into the
    /// group at the terminus of `y`.
    monos: Vec<GroupHom>,
    /// Per directed edge: membership bitmap of the embedding's image inside
    /// the terminal vertex group.
    #[serde(skip)]
    image_member: Vec<Vec<bool>>,
    /// Per directed edge: the image as an ascending element list.
    #[serde(skip)]
    image_elems: Vec<Vec<usize>>,
    /// Per directed edge: partial inverse of the embedding (`NONE` outside
    /// the image).
    #[serde(skip)]
    mono_inverse: Vec<Vec<usize>>,
}

impl PartialEq for GraphOfGroups {
    fn eq(&self, other: &Self) -> bool {
        self.graph == other.graph
            && self.prime == other.prime
            && self.vertex_groups == other.vertex_groups
            && self.edge_groups == other.edge_groups
            && self.monos == other.monos
    }
}
impl Eq for GraphOfGroups {}

impl<'de> Deserialize<'de> for GraphOfGroups {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            graph: Graph,
            prime: u32,
            vertex_groups: Vec<Grp>,
            edge_groups: Vec<Grp>,
            monos: Vec<GroupHom>,
        }
        let raw = Raw::deserialize(deserializer)?;
        GraphOfGroups::new(raw.graph, raw.prime, raw.vertex_groups, raw.edge_groups, raw.monos)
            .map_err(serde::de::Error::custom)
    }
}

impl GraphOfGroups {
    /// Validate all pieces and precompute image tables.
    pub fn new(
        graph: Graph,
        prime: u32,
        vertex_groups: Vec<Grp>,
        edge_groups: Vec<Grp>,
        monos: Vec<GroupHom>,
    ) -> Result<GraphOfGroups, GogError> {
        SpanningData::new(&graph)?;
        if vertex_groups.len() != graph.vertex_count() {
            return Err(GogError::VertexGroupCount {
                expected: graph.vertex_count(),
                got: vertex_groups.len(),
            });
        }
        if edge_groups.len() != graph.pair_count() {
            return Err(GogError::EdgeGroupCount {
                expected: graph.pair_count(),
                got: edge_groups.len(),
            });
        }
        if monos.len() != graph.directed_count() {
            return Err(GogError::MonoCount {
                expected: graph.directed_count(),
                got: monos.len(),
            });
        }
        let named_groups = vertex_groups
            .iter()
            .enumerate()
            .map(|(v, g)| (graph.vertex_name(v).to_string(), g))
            .chain(
                edge_groups
                    .iter()
                    .enumerate()
                    .map(|(p, g)| (graph.edge_name(graph.plus_of(p)).to_string(), g)),
            );
        for (name, g) in named_groups {
            let report = g.validate();
            if let Some(err) = report.first_error() {
                return Err(GogError::BadGroup { name, detail: err.to_string() });
            }
            if !g.is_p_group(prime) {
                return Err(GogError::NotPPower { name, order: g.order(), prime });
            }
        }
        for y in 0..graph.directed_count() {
            let name = graph.edge_name(y).to_string();
            let m = &monos[y];
            if **m.source() != *edge_groups[graph.pair_of(y)] {
                return Err(GogError::MonoSource { name });
            }
            if **m.target() != *vertex_groups[graph.terminus(y)] {
                return Err(GogError::MonoTarget { name });
            }
            if m.validate().is_err() {
                return Err(GogError::MonoNotHom { name });
            }
            if !m.is_injective() {
                return Err(GogError::MonoNotInjective { name });
            }
        }
        let mut gog = GraphOfGroups {
            graph,
            prime,
            vertex_groups,
            edge_groups,
            monos,
            image_member: Vec::new(),
            image_elems: Vec::new(),
            mono_inverse: Vec::new(),
        };
        gog.rebuild_caches();
        Ok(gog)
    }

    fn rebuild_caches(&mut self) {
        let m = self.graph.directed_count();
        self.image_member = Vec::with_capacity(m);
        self.image_elems = Vec::with_capacity(m);
        self.mono_inverse = Vec::with_capacity(m);
        for y in 0..m {
            let target_order = self.vertex_groups[self.graph.terminus(y)].order();
            let mut member = vec![false; target_order];
            let mut inverse = vec![NONE; target_order];
            for c in 0..self.monos[y].source().order() {
                let img = self.monos[y].apply(c);
                member[img] = true;
                inverse[img] = c;
            }
            let elems = (0..target_order).filter(|&g| member[g]).collect();
            self.image_member.push(member);
            self.image_elems.push(elems);
            self.mono_inverse.push(inverse);
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn prime(&self) -> u32 {
        self.prime
    }

    pub fn vertex_group(&self, v: usize) -> &Grp {
        &self.vertex_groups[v]
    }

    pub fn edge_group(&self, pair: usize) -> &Grp {
        &self.edge_groups[pair]
    }

    /// The embedding along directed edge `y`, landing at `y`'s terminus.
    pub fn mono(&self, y: usize) -> &GroupHom {
        &self.monos[y]
    }

    /// Is `g` (in the group at `y`'s terminus) in the image of `f_y`?
    #[inline]
    pub fn in_image(&self, y: usize, g: usize) -> bool {
        self.image_member[y][g]
    }

    /// Elements of the image of `f_y`, ascending.
    pub fn image_elems(&self, y: usize) -> &[usize] {
        &self.image_elems[y]
    }

    /// The unique `c` with `f_y(c) = g`, when `g` is in the image.
    #[inline]
    pub fn mono_inv(&self, y: usize, g: usize) -> Option<usize> {
        match self.mono_inverse[y][g] {
            NONE => None,
            c => Some(c),
        }
    }

    pub fn all_vertex_groups_trivial(&self) -> bool {
        self.vertex_groups.iter().all(|g| g.order() == 1)
    }

    /// Check that a word's letters reference real vertices, elements, and
    /// edges.
    pub fn validate_word(&self, w: &GWord) -> Result<(), GogError> {
        if w.basepoint >= self.graph.vertex_count() {
            return Err(GogError::BadVertex {
                vertex: w.basepoint,
                count: self.graph.vertex_count(),
            });
        }
        for (index, l) in w.letters.iter().enumerate() {
            match *l {
                Letter::Vertex { vertex, element } => {
                    if vertex >= self.graph.vertex_count() {
                        return Err(GogError::BadLetter {
                            index,
                            reason: format!("vertex index {vertex} out of range"),
                        });
                    }
                    if element >= self.vertex_groups[vertex].order() {
                        return Err(GogError::BadLetter {
                            index,
                            reason: format!(
                                "element {element} out of range for the group at {:?}",
                                self.graph.vertex_name(vertex)
                            ),
                        });
                    }
                }
                Letter::Stable { edge } => {
                    if edge >= self.graph.directed_count() {
                        return Err(GogError::BadLetter {
                            index,
                            reason: format!("edge index {edge} out of range"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// The inverse word: letters reversed, vertex elements inverted, stable
    /// letters replaced by their reverses.
    pub fn word_inverse(&self, w: &GWord) -> GWord {
        let letters = w
            .letters
            .iter()
            .rev()
            .map(|l| match *l {
                Letter::Vertex { vertex, element } => Letter::Vertex {
                    vertex,
                    element: self.vertex_groups[vertex].inv(element),
                },
                Letter::Stable { edge } => Letter::Stable { edge: self.graph.bar(edge) },
            })
            .collect();
        GWord { basepoint: w.basepoint, letters }
    }

    /// Concatenation, read at `u`'s basepoint. Basepoints need not agree:
    /// a word denotes the same element from any basepoint, tree stable
    /// letters being trivial.
    pub fn word_concat(&self, u: &GWord, v: &GWord) -> GWord {
        let mut letters = u.letters.clone();
        letters.extend_from_slice(&v.letters);
        GWord { basepoint: u.basepoint, letters }
    }

    /// Spell a word out as a closed edge path at its basepoint, inserting
    /// tree geodesics between letters.
    pub fn word_to_path(&self, sd: &SpanningData, w: &GWord) -> PathWord {
        let mut edges = Vec::new();
        let mut elems = vec![0usize];
        let mut cur = w.basepoint;
        let walk_to = |to: usize, edges: &mut Vec<usize>, elems: &mut Vec<usize>, cur: &mut usize| {
            for e in sd.geodesic(&self.graph, *cur, to) {
                edges.push(e);
                elems.push(0);
            }
            *cur = to;
        };
        for l in &w.letters {
            match *l {
                Letter::Vertex { vertex, element } => {
                    walk_to(vertex, &mut edges, &mut elems, &mut cur);
                    let g = &self.vertex_groups[vertex];
                    let last = elems.last_mut().expect("elems nonempty");
                    *last = g.mul(*last, element);
                }
                Letter::Stable { edge } => {
                    walk_to(self.graph.origin(edge), &mut edges, &mut elems, &mut cur);
                    edges.push(edge);
                    elems.push(0);
                    cur = self.graph.terminus(edge);
                }
            }
        }
        walk_to(w.basepoint, &mut edges, &mut elems, &mut cur);
        PathWord { basepoint: w.basepoint, edges, elems }
    }

    /// Pinch until no subpath `y · b · ȳ` with `b` in the image of `f_y`
    /// remains, always taking the leftmost pinch first. The element denoted
    /// is unchanged; the result is canonical for it.
    pub fn reduce_path(&self, mut path: PathWord) -> PathWord {
        let mut j = 0usize;
        while j + 1 < path.edges.len() {
            let y = path.edges[j];
            if path.edges[j + 1] == self.graph.bar(y) && self.in_image(y, path.elems[j + 1]) {
                let c = self.mono_inverse[y][path.elems[j + 1]];
                let carried = self.monos[self.graph.bar(y)].apply(c);
                let g = &self.vertex_groups[self.graph.origin(y)];
                path.elems[j] = g.mul(g.mul(path.elems[j], carried), path.elems[j + 2]);
                path.edges.drain(j..=j + 1);
                path.elems.drain(j + 1..=j + 2);
                j = j.saturating_sub(1);
            } else {
                j += 1;
            }
        }
        path
    }

    /// Write a reduced path back as a word: identity elements and tree
    /// stable letters are dropped. Feeding the result to
    /// [`GraphOfGroups::word_to_path`] rebuilds the path exactly, because
    /// the dropped tree runs of a pinch-free path are geodesics.
    pub fn path_to_word(&self, sd: &SpanningData, path: &PathWord) -> GWord {
        let mut letters = Vec::new();
        for i in 0..path.elems.len() {
            if path.elems[i] != 0 {
                letters.push(Letter::Vertex {
                    vertex: path.vertex_at(&self.graph, i),
                    element: path.elems[i],
                });
            }
            if i < path.edges.len() && !sd.is_tree_edge(path.edges[i]) {
                letters.push(Letter::Stable { edge: path.edges[i] });
            }
        }
        GWord { basepoint: path.basepoint, letters }
    }

    /// Canonical reduced form of a word.
    pub fn reduce_word(&self, sd: &SpanningData, w: &GWord) -> GWord {
        self.path_to_word(sd, &self.reduce_path(self.word_to_path(sd, w)))
    }

    /// Does the word denote the identity?
    pub fn is_trivial_word(&self, sd: &SpanningData, w: &GWord) -> bool {
        self.reduce_path(self.word_to_path(sd, w)).is_identity()
    }

    /// Do two words denote the same element?
    pub fn words_equal(&self, sd: &SpanningData, u: &GWord, v: &GWord) -> bool {
        let w = self.word_concat(u, &self.word_inverse(v));
        self.is_trivial_word(sd, &w)
    }

    /// Does the word's element lie in the group at vertex `x`? (Exactly
    /// when its reduced path, read at basepoint `x`, crosses no edges.)
    pub fn word_in_vertex_group(&self, sd: &SpanningData, w: &GWord, x: usize) -> bool {
        let rebased = GWord { basepoint: x, letters: w.letters.clone() };
        self.reduce_path(self.word_to_path(sd, &rebased)).edges.is_empty()
    }

    /// Render a word with vertex, element, and edge names.
    pub fn render_word(&self, w: &GWord) -> String {
        if w.letters.is_empty() {
            return "1".to_string();
        }
        let tokens: Vec<String> = w
            .letters
            .iter()
            .map(|l| match *l {
                Letter::Vertex { vertex, element } => format!(
                    "{}:{}",
                    self.graph.vertex_name(vertex),
                    self.vertex_groups[vertex].label(element)
                ),
                Letter::Stable { edge } => self.graph.edge_name(edge).to_string(),
            })
            .collect();
        tokens.join(" ")
    }

    /// One vertex of the tree the group acts on: the coset `w · G_x` read
    /// off a path from the base vertex.
    pub fn tree_ball(
        &self,
        sd: &SpanningData,
        basepoint: usize,
        radius: usize,
        max_nodes: usize,
    ) -> Result<TreeBall, GogError> {
        let mut nodes = vec![BallNode {
            vertex: basepoint,
            depth: 0,
            coset: GWord::empty(basepoint),
            parent: None,
        }];
        let mut i = 0usize;
        while i < nodes.len() {
            if nodes[i].depth == radius {
                break;
            }
            let x = nodes[i].vertex;
            let gx = &self.vertex_groups[x];
            for &y in self.graph.edges_from(x) {
                // Children across y are indexed by cosets of the image of
                // the reverse embedding inside the group at the origin.
                let image = &self.image_member[self.graph.bar(y)];
                let mut covered = vec![false; gx.order()];
                for a in 0..gx.order() {
                    if covered[a] {
                        continue;
                    }
                    for &h in &self.image_elems[self.graph.bar(y)] {
                        covered[gx.mul(a, h)] = true;
                    }
                    debug_assert!(image[0]);
                    let mut coset = nodes[i].coset.clone();
                    if a != 0 {
                        coset.letters.push(Letter::Vertex { vertex: x, element: a });
                    }
                    if !sd.is_tree_edge(y) {
                        coset.letters.push(Letter::Stable { edge: y });
                    }
                    let child_vertex = self.graph.terminus(y);
                    if let Some((pi, _)) = nodes[i].parent {
                        let p = &nodes[pi];
                        if p.vertex == child_vertex
                            && self.same_coset(sd, &coset, &p.coset, child_vertex)
                        {
                            continue;
                        }
                    }
                    if nodes.len() >= max_nodes {
                        return Err(GogError::Budget { limit: max_nodes });
                    }
                    let depth = nodes[i].depth + 1;
                    nodes.push(BallNode {
                        vertex: child_vertex,
                        depth,
                        coset,
                        parent: Some((i, y)),
                    });
                }
            }
            i += 1;
        }
        Ok(TreeBall { radius, nodes })
    }

    /// Do `u · G_x` and `v · G_x` coincide?
    fn same_coset(&self, sd: &SpanningData, u: &GWord, v: &GWord, x: usize) -> bool {
        let w = self.word_concat(&self.word_inverse(u), v);
        self.word_in_vertex_group(sd, &w, x)
    }
}

/// One vertex of a ball in the tree acted on: the coset `coset · G_vertex`,
/// reached from the parent node by crossing `parent.1`.
#[derive(Debug, Clone)]
pub struct BallNode {
    pub vertex: usize,
    pub depth: usize,
    pub coset: GWord,
    pub parent: Option<(usize, usize)>,
}

/// A breadth-first ball in the tree acted on by the fundamental group.
#[derive(Debug, Clone)]
pub struct TreeBall {
    pub radius: usize,
    pub nodes: Vec<BallNode>,
}

impl TreeBall {
    pub fn count_at_depth(&self, d: usize) -> usize {
        self.nodes.iter().filter(|n| n.depth == d).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgroups::FiniteGroup;
    use std::sync::Arc;

    /// Two C4s amalgamated over C2: vertices u, v; one edge pair; the edge
    /// C2 embeds as the squares on both sides.
    fn amalgam() -> (GraphOfGroups, SpanningData) {
        let graph = Graph::unnamed(2, &[(0, 1)]).unwrap();
        let c4u = Arc::new(FiniteGroup::cyclic(4));
        let c4v = Arc::new(FiniteGroup::cyclic(4));
        let c2 = Arc::new(FiniteGroup::cyclic(2));
        let to_v = GroupHom::new(&c2, &c4v, vec![0, 2]).unwrap();
        let to_u = GroupHom::new(&c2, &c4u, vec![0, 2]).unwrap();
        let gog = GraphOfGroups::new(
            graph,
            2,
            vec![c4u, c4v],
            vec![c2],
            vec![to_v, to_u],
        )
        .unwrap();
        let sd = SpanningData::new(gog.graph()).unwrap();
        (gog, sd)
    }

    /// One vertex with C3, one loop; forward embedding is the identity and
    /// the reverse is squaring, so conjugating by the stable letter squares.
    fn hnn_squaring() -> (GraphOfGroups, SpanningData) {
        let graph = Graph::unnamed(1, &[(0, 0)]).unwrap();
        let c3 = Arc::new(FiniteGroup::cyclic(3));
        let fwd = GroupHom::new(&c3, &c3, vec![0, 1, 2]).unwrap();
        let rev = GroupHom::new(&c3, &c3, vec![0, 2, 1]).unwrap();
        let gog =
            GraphOfGroups::new(graph, 3, vec![c3.clone()], vec![c3], vec![fwd, rev]).unwrap();
        let sd = SpanningData::new(gog.graph()).unwrap();
        (gog, sd)
    }

    /// Segment with C2 on both ends and a trivial edge group.
    fn segment() -> (GraphOfGroups, SpanningData) {
        let graph = Graph::unnamed(2, &[(0, 1)]).unwrap();
        let c2a = Arc::new(FiniteGroup::cyclic(2));
        let c2b = Arc::new(FiniteGroup::cyclic(2));
        let triv = Arc::new(FiniteGroup::trivial());
        let to_b = GroupHom::new(&triv, &c2b, vec![0]).unwrap();
        let to_a = GroupHom::new(&triv, &c2a, vec![0]).unwrap();
        let gog =
            GraphOfGroups::new(graph, 2, vec![c2a, c2b], vec![triv], vec![to_b, to_a]).unwrap();
        let sd = SpanningData::new(gog.graph()).unwrap();
        (gog, sd)
    }

    /// Rose with trivial vertex group and `rank` loops.
    fn rose(rank: usize) -> (GraphOfGroups, SpanningData) {
        let graph = Graph::unnamed(1, &vec![(0, 0); rank]).unwrap();
        let triv = Arc::new(FiniteGroup::trivial());
        let monos = (0..2 * rank)
            .map(|_| GroupHom::new(&triv, &triv, vec![0]).unwrap())
            .collect();
        let gog = GraphOfGroups::new(
            graph,
            2,
            vec![triv.clone()],
            vec![triv.clone(); rank],
            monos,
        )
        .unwrap();
        let sd = SpanningData::new(gog.graph()).unwrap();
        (gog, sd)
    }

    fn vw(basepoint: usize, letters: Vec<Letter>) -> GWord {
        GWord { basepoint, letters }
    }

    #[test]
    fn edge_indexing_involution() {
        let g = Graph::unnamed(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert_eq!(g.directed_count(), 8);
        for e in 0..8 {
            assert_ne!(g.bar(e), e);
            assert_eq!(g.bar(g.bar(e)), e);
            assert_eq!(g.origin(g.bar(e)), g.terminus(e));
            assert_eq!(g.pair_of(e), g.pair_of(g.bar(e)));
        }
        assert!(g.is_plus(4) && !g.is_plus(5));
        assert_eq!(g.origin(2), 1);
        assert_eq!(g.terminus(2), 2);
    }

    #[test]
    fn spanning_tree_of_a_square() {
        let g = Graph::unnamed(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let sd = SpanningData::new(&g).unwrap();
        assert!(sd.is_tree_pair(0));
        assert!(sd.is_tree_pair(1));
        assert!(!sd.is_tree_pair(2));
        assert!(sd.is_tree_pair(3));
        assert_eq!(sd.depth(2), 2);
        assert_eq!(sd.depth(3), 1);
        // Vertex 2 to vertex 3 goes up through 1 and 0, then down: the
        // non-tree pair is never used.
        assert_eq!(sd.geodesic(&g, 2, 3), vec![3, 1, 7]);
        assert_eq!(sd.geodesic(&g, 2, 2), Vec::<usize>::new());
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let g = Graph::unnamed(3, &[(0, 1)]).unwrap();
        assert!(matches!(SpanningData::new(&g), Err(GogError::Disconnected { .. })));
    }

    #[test]
    fn amalgamated_squares_cancel() {
        let (gog, sd) = amalgam();
        // a^2 · b^2 is trivial: both are the image of the edge involution.
        let w = vw(0, vec![
            Letter::Vertex { vertex: 0, element: 2 },
            Letter::Vertex { vertex: 1, element: 2 },
        ]);
        assert!(gog.is_trivial_word(&sd, &w));
        // a alone is not.
        let a = vw(0, vec![Letter::Vertex { vertex: 0, element: 1 }]);
        assert!(!gog.is_trivial_word(&sd, &a));
        // a^2 = b^-2 as elements.
        let b2 = vw(0, vec![Letter::Vertex { vertex: 1, element: 2 }]);
        let a2 = vw(0, vec![Letter::Vertex { vertex: 0, element: 2 }]);
        assert!(gog.words_equal(&sd, &a2, &gog.word_inverse(&b2)));
        assert!(gog.words_equal(&sd, &a2, &b2));
    }

    #[test]
    fn hnn_conjugation_squares_the_generator() {
        let (gog, sd) = hnn_squaring();
        // t · a · t^-1 = a^2.
        let lhs = vw(0, vec![
            Letter::Stable { edge: 0 },
            Letter::Vertex { vertex: 0, element: 1 },
            Letter::Stable { edge: 1 },
        ]);
        let rhs = vw(0, vec![Letter::Vertex { vertex: 0, element: 2 }]);
        assert!(gog.words_equal(&sd, &lhs, &rhs));
        assert!(!gog.is_trivial_word(&sd, &lhs));
        // t does not commute with a.
        let comm = vw(0, vec![
            Letter::Stable { edge: 0 },
            Letter::Vertex { vertex: 0, element: 1 },
            Letter::Stable { edge: 1 },
            Letter::Vertex { vertex: 0, element: 2 },
        ]);
        assert!(gog.words_equal(&sd, &comm, &vw(0, vec![Letter::Vertex { vertex: 0, element: 1 }])));
    }

    #[test]
    fn infinite_dihedral_words() {
        let (gog, sd) = segment();
        let a = Letter::Vertex { vertex: 0, element: 1 };
        let b = Letter::Vertex { vertex: 1, element: 1 };
        // abab has no pinch: the edge group is trivial.
        let w = vw(0, vec![a, b, a, b]);
        let path = gog.reduce_path(gog.word_to_path(&sd, &w));
        assert_eq!(path.edges, vec![0, 1, 0, 1]);
        assert_eq!(path.elems, vec![1, 1, 1, 1, 0]);
        assert!(!gog.is_trivial_word(&sd, &w));
        // The identity at the far vertex is trivial.
        let e = vw(0, vec![Letter::Vertex { vertex: 1, element: 0 }]);
        assert!(gog.is_trivial_word(&sd, &e));
        // abba = aa = 1.
        let w2 = vw(0, vec![a, b, b, a]);
        assert!(gog.is_trivial_word(&sd, &w2));
    }

    #[test]
    fn reduction_is_idempotent_on_its_output() {
        let (gog, sd) = segment();
        let a = Letter::Vertex { vertex: 0, element: 1 };
        let b = Letter::Vertex { vertex: 1, element: 1 };
        for letters in [
            vec![a, b, a, b],
            vec![b, a],
            vec![a, a],
            vec![b, b, a, a, b],
            vec![],
        ] {
            let w = vw(0, letters);
            let r = gog.reduce_word(&sd, &w);
            assert!(gog.words_equal(&sd, &w, &r));
            assert_eq!(gog.reduce_word(&sd, &r), r, "reduce must fix its own output");
        }
        let (gog, sd) = amalgam();
        for letters in [
            vec![
                Letter::Vertex { vertex: 0, element: 1 },
                Letter::Vertex { vertex: 1, element: 2 },
                Letter::Vertex { vertex: 0, element: 3 },
            ],
            vec![
                Letter::Vertex { vertex: 1, element: 1 },
                Letter::Vertex { vertex: 0, element: 2 },
                Letter::Vertex { vertex: 1, element: 3 },
            ],
        ] {
            let w = vw(0, letters);
            let r = gog.reduce_word(&sd, &w);
            assert!(gog.words_equal(&sd, &w, &r));
            assert_eq!(gog.reduce_word(&sd, &r), r);
        }
    }

    #[test]
    fn rose_words_reduce_freely() {
        let (gog, sd) = rose(2);
        let t1 = Letter::Stable { edge: 0 };
        let t2 = Letter::Stable { edge: 2 };
        let t2i = Letter::Stable { edge: 3 };
        let t1i = Letter::Stable { edge: 1 };
        assert!(gog.is_trivial_word(&sd, &vw(0, vec![t1, t2, t2i, t1i])));
        assert!(!gog.is_trivial_word(&sd, &vw(0, vec![t1, t2, t1i, t2i])));
        let r = gog.reduce_word(&sd, &vw(0, vec![t1, t1, t1i]));
        assert_eq!(r.letters, vec![t1]);
    }

    #[test]
    fn word_in_vertex_group_detects_membership() {
        let (gog, sd) = amalgam();
        // a^2 lies in both vertex groups (it is the amalgamated involution).
        let a2 = vw(0, vec![Letter::Vertex { vertex: 0, element: 2 }]);
        assert!(gog.word_in_vertex_group(&sd, &a2, 0));
        assert!(gog.word_in_vertex_group(&sd, &a2, 1));
        // a lies in the group at u only.
        let a = vw(0, vec![Letter::Vertex { vertex: 0, element: 1 }]);
        assert!(gog.word_in_vertex_group(&sd, &a, 0));
        assert!(!gog.word_in_vertex_group(&sd, &a, 1));
        let (gog, sd) = segment();
        let ab = vw(0, vec![
            Letter::Vertex { vertex: 0, element: 1 },
            Letter::Vertex { vertex: 1, element: 1 },
        ]);
        assert!(!gog.word_in_vertex_group(&sd, &ab, 0));
        assert!(!gog.word_in_vertex_group(&sd, &ab, 1));
    }

    #[test]
    fn tree_ball_of_the_infinite_dihedral_line() {
        let (gog, sd) = segment();
        let ball = gog.tree_ball(&sd, 0, 3, 100).unwrap();
        assert_eq!(ball.count_at_depth(0), 1);
        assert_eq!(ball.count_at_depth(1), 2);
        assert_eq!(ball.count_at_depth(2), 2);
        assert_eq!(ball.count_at_depth(3), 2);
        assert_eq!(ball.nodes.len(), 7);
    }

    #[test]
    fn tree_ball_of_a_rose_is_a_regular_tree() {
        let (gog, sd) = rose(2);
        let ball = gog.tree_ball(&sd, 0, 2, 100).unwrap();
        assert_eq!(ball.count_at_depth(1), 4);
        assert_eq!(ball.count_at_depth(2), 12);
        assert_eq!(ball.nodes.len(), 17);
    }

    #[test]
    fn tree_ball_of_the_amalgam_is_a_line() {
        let (gog, sd) = amalgam();
        let ball = gog.tree_ball(&sd, 0, 2, 100).unwrap();
        assert_eq!(ball.count_at_depth(1), 2);
        assert_eq!(ball.count_at_depth(2), 2);
    }

    #[test]
    fn tree_ball_budget_is_enforced() {
        let (gog, sd) = rose(3);
        assert!(matches!(
            gog.tree_ball(&sd, 0, 4, 20),
            Err(GogError::Budget { limit: 20 })
        ));
    }

    #[test]
    fn word_validation_catches_bad_letters() {
        let (gog, _) = amalgam();
        let bad_vertex = vw(0, vec![Letter::Vertex { vertex: 5, element: 0 }]);
        assert!(gog.validate_word(&bad_vertex).is_err());
        let bad_elem = vw(0, vec![Letter::Vertex { vertex: 0, element: 9 }]);
        assert!(gog.validate_word(&bad_elem).is_err());
        let bad_edge = vw(0, vec![Letter::Stable { edge: 7 }]);
        assert!(gog.validate_word(&bad_edge).is_err());
        let ok = vw(0, vec![Letter::Stable { edge: 1 }]);
        assert!(gog.validate_word(&ok).is_ok());
    }

    #[test]
    fn mono_cache_round_trip() {
        let (gog, _) = amalgam();
        assert!(gog.in_image(0, 2));
        assert!(!gog.in_image(0, 1));
        assert_eq!(gog.mono_inv(0, 2), Some(1));
        assert_eq!(gog.mono_inv(0, 1), None);
        assert_eq!(gog.image_elems(0), &[0, 2]);
    }

    #[test]
    fn invalid_monos_are_rejected() {
        let graph = Graph::unnamed(2, &[(0, 1)]).unwrap();
        let c4 = Arc::new(FiniteGroup::cyclic(4));
        let c2 = Arc::new(FiniteGroup::cyclic(2));
        // Non-injective edge map.
        let collapse = GroupHom::new(&c2, &c4, vec![0, 0]).unwrap();
        let ok = GroupHom::new(&c2, &c4, vec![0, 2]).unwrap();
        let err = GraphOfGroups::new(
            graph.clone(),
            2,
            vec![c4.clone(), c4.clone()],
            vec![c2.clone()],
            vec![collapse, ok.clone()],
        )
        .unwrap_err();
        assert!(matches!(err, GogError::MonoNotInjective { .. }));
        // Non-p-group vertex group.
        let c6 = Arc::new(FiniteGroup::cyclic(6));
        let to_c6 = GroupHom::new(&c2, &c6, vec![0, 3]).unwrap();
        let err = GraphOfGroups::new(
            graph,
            2,
            vec![c4, c6],
            vec![c2],
            vec![to_c6, ok],
        )
        .unwrap_err();
        assert!(matches!(err, GogError::NotPPower { .. }));
    }

    #[test]
    fn render_uses_names() {
        let (gog, sd) = amalgam();
        let w = vw(0, vec![
            Letter::Vertex { vertex: 0, element: 1 },
            Letter::Vertex { vertex: 1, element: 2 },
        ]);
        assert_eq!(gog.render_word(&w), "v0:g v1:g2");
        assert_eq!(gog.render_word(&GWord::empty(0)), "1");
        let r = gog.reduce_word(&sd, &w);
        assert!(gog.words_equal(&sd, &w, &r));
    }

    #[test]
    fn serde_round_trip_rebuilds_image_tables() {
        let (gog, sd) = amalgam();
        let json = serde_json::to_string(&gog).unwrap();
        let back: GraphOfGroups = serde_json::from_str(&json).unwrap();
        assert_eq!(back, gog);
        // The precomputed tables must come back usable, not empty.
        assert!(back.in_image(0, 2));
        assert_eq!(back.mono_inv(0, 2), Some(1));
        let w = vw(0, vec![
            Letter::Vertex { vertex: 0, element: 2 },
            Letter::Vertex { vertex: 1, element: 2 },
        ]);
        assert!(back.words_equal(&sd, &w, &gog.reduce_word(&sd, &w)));
    }
}
