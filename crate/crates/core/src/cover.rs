//! Index-p kernel covers of a graph of groups.
//!
//! Compatible series data at its top level yields a surjective
//! homomorphism Φ from the fundamental group onto F_p ([`LevelHom`]): each
//! vertex group maps by its top-factor coordinate scaled by the solved
//! level scalar, and stable letters map to 0 — except that when every
//! vertex map is zero, the first non-tree stable letter is sent to 1
//! instead, which keeps Φ surjective whenever the graph has a loop.
//!
//! The kernel of Φ is again the fundamental group of a graph of groups
//! ([`KernelCover`]): vertices and edge pairs acquire fibers indexed by
//! Φ-levels, vertex and edge groups shrink to the kernel's trace on them
//! (which is exactly the next series term), and the remaining series terms
//! shift down by one level, with the compatibility conditions intact. A
//! word in the kernel rewrites to a word over the cover
//! ([`rewrite_into_kernel`]) by lifting its path fiber by fiber, and cover
//! words embed back ([`embed_word`]) via stored connector words, so every
//! rewrite can be checked against the original.

use crate::compat::{
    LevelMaps, SeriesAssignment, check_compatibility, solve_level_maps,
};
use crate::fp::FpScalar;
use crate::gog::{GWord, Graph, GraphOfGroups, Letter, PairSpec, SpanningData};
use crate::pgroups::{ChiefFactor, ChiefSeries, GroupHom, Grp, Subgroup};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Why a cover could not be built, used, or validated.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverError {
    #[error("the word has level {value}, not 0, so it lies outside the kernel")]
    WordNotInKernel { value: FpScalar },
    #[error("no level map exists here: every top-level factor is trivial and the graph has no loops")]
    NoLevelMap,
    #[error("cover data is inconsistent: {0}")]
    BadCover(String),
    #[error("internal invariant broke while working with a cover: {0}")]
    Internal(String),
}

/// A homomorphism from the fundamental group onto F_p, tabulated on every
/// vertex-group element and every stable letter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelHom {
    prime: u32,
    /// Value on each element of each vertex group.
    vertex_values: Vec<Vec<FpScalar>>,
    /// For each vertex whose map is onto: the top factor generator and its
    /// scalar, so elements of prescribed value can be produced.
    gamma: Vec<Option<(usize, FpScalar)>>,
    /// Value on the stable letter of each pair (negated for the reverse
    /// direction).
    stable: Vec<FpScalar>,
    /// Per pair: whether the composite of Φ with the edge embedding is
    /// onto (it is either onto or zero).
    edge_onto: Vec<bool>,
    /// True when every vertex map is zero and a stable letter carries the
    /// surjectivity instead.
    forced: bool,
}

impl LevelHom {
    /// Build the level homomorphism from the top level of compatible data.
    ///
    /// Returns `None` when no surjection exists at this level: every
    /// top-level factor is trivial and the graph is a tree. (Callers then
    /// drop the top level and retry, or conclude the group is trivial.)
    pub fn build(
        gog: &GraphOfGroups,
        sd: &SpanningData,
        sa: &SeriesAssignment,
        lm: &LevelMaps,
    ) -> Option<LevelHom> {
        let graph = gog.graph();
        let p = gog.prime();
        let zero = FpScalar::zero(p);
        let mut vertex_values = Vec::with_capacity(graph.vertex_count());
        let mut gamma = Vec::with_capacity(graph.vertex_count());
        for x in 0..graph.vertex_count() {
            let series = sa.vertex_series(x);
            match series.factor(0) {
                ChiefFactor::Trivial => {
                    vertex_values.push(vec![zero; gog.vertex_group(x).order()]);
                    gamma.push(None);
                }
                ChiefFactor::OrderP { generator } => {
                    let lambda = lm.levels[0].vertex[x]
                        .expect("solved level maps cover every proper factor");
                    let values = (0..gog.vertex_group(x).order())
                        .map(|g| {
                            let dlog = series
                                .factor_dlog(0, g, p)
                                .expect("the top factor coordinate is total");
                            lambda.mul(FpScalar::new(dlog as i64, p))
                        })
                        .collect();
                    vertex_values.push(values);
                    gamma.push(Some((generator, lambda)));
                }
            }
        }
        let mut stable = vec![zero; graph.pair_count()];
        let forced = gamma.iter().all(Option::is_none);
        if forced {
            let q = (0..graph.pair_count()).find(|&q| !sd.is_tree_pair(q))?;
            stable[q] = FpScalar::one(p);
        }
        let edge_onto = (0..graph.pair_count())
            .map(|q| {
                let y = graph.plus_of(q);
                let t = graph.terminus(y);
                (0..gog.edge_group(q).order())
                    .any(|e| !vertex_values[t][gog.mono(y).apply(e)].is_zero())
            })
            .collect();
        Some(LevelHom { prime: p, vertex_values, gamma, stable, edge_onto, forced })
    }

    pub fn prime(&self) -> u32 {
        self.prime
    }

    /// Whether surjectivity is carried by a stable letter.
    pub fn is_forced(&self) -> bool {
        self.forced
    }

    pub fn vertex_value(&self, x: usize, g: usize) -> FpScalar {
        self.vertex_values[x][g]
    }

    /// Whether the map restricted to vertex group `x` is onto.
    pub fn vertex_onto(&self, x: usize) -> bool {
        self.gamma[x].is_some()
    }

    /// Whether the map composed with either embedding of pair `q` is onto.
    pub fn edge_onto(&self, q: usize) -> bool {
        self.edge_onto[q]
    }

    /// Value on the stable letter of pair `q` (forward direction).
    pub fn sigma(&self, q: usize) -> FpScalar {
        self.stable[q]
    }

    /// Value of a whole word: the letter values summed.
    pub fn eval(&self, w: &GWord) -> FpScalar {
        let mut acc = FpScalar::zero(self.prime);
        for letter in &w.letters {
            acc = match *letter {
                Letter::Vertex { vertex, element } => acc.add(self.vertex_values[vertex][element]),
                Letter::Stable { edge } => {
                    let s = self.stable[edge >> 1];
                    if edge & 1 == 0 { acc.add(s) } else { acc.sub(s) }
                }
            };
        }
        acc
    }

    /// An element of vertex group `x` with the given value, when one
    /// exists (value 0 always; other values need the vertex map onto).
    pub fn element_with_value(
        &self,
        gog: &GraphOfGroups,
        x: usize,
        value: FpScalar,
    ) -> Option<usize> {
        if value.is_zero() {
            return Some(0);
        }
        let (generator, lambda) = self.gamma[x]?;
        let exponent = value.mul(lambda.inv()).value() as i64;
        Some(gog.vertex_group(x).pow(generator, exponent))
    }

    /// A word of value 1, whose powers are coset representatives of the
    /// kernel.
    pub fn unit_word(&self, gog: &GraphOfGroups) -> GWord {
        let one = FpScalar::one(self.prime);
        if let Some(x) = (0..self.gamma.len()).find(|&x| self.gamma[x].is_some()) {
            let element = self.element_with_value(gog, x, one).expect("vertex map is onto");
            return GWord { basepoint: 0, letters: vec![Letter::Vertex { vertex: x, element }] };
        }
        let q = (0..self.stable.len())
            .find(|&q| !self.stable[q].is_zero())
            .expect("a surjection uses a vertex map or a stable letter");
        GWord { basepoint: 0, letters: vec![Letter::Stable { edge: 2 * q }] }
    }
}

/// The kernel of a level homomorphism, presented as a graph of groups
/// over fibered vertices and edges, with the data needed to move words
/// between the cover and the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCover {
    pub gog: GraphOfGroups,
    /// The base series shifted down one level, re-expressed in the cover's
    /// element indices.
    pub series: SeriesAssignment,
    pub level_maps: LevelMaps,
    /// Cover vertex → (base vertex, fiber level representative).
    pub vertex_fiber: Vec<(usize, FpScalar)>,
    /// Cover pair → (base pair, fiber level representative at the forward
    /// origin).
    pub pair_fiber: Vec<(usize, FpScalar)>,
    /// Per base vertex: base indices of the kernel subgroup's elements, in
    /// cover index order.
    pub vertex_incl: Vec<Vec<usize>>,
    /// Per base pair: base indices of the kernel edge subgroup's elements.
    pub edge_incl: Vec<Vec<usize>>,
    /// Per cover vertex: a base word of that fiber's level, conjugation by
    /// which embeds the cover vertex group.
    pub vertex_word: Vec<GWord>,
    /// Per cover pair: correction element at the forward origin (a base
    /// element of the origin vertex group).
    pub plus_correction: Vec<usize>,
    /// Per cover pair: correction element at the forward terminus.
    pub minus_correction: Vec<usize>,
    /// Per cover pair: base image of the cover stable letter; empty for
    /// pairs in the cover's spanning tree.
    pub stable_word: Vec<GWord>,
}

impl KernelCover {
    pub fn base_vertex(&self, cover_vertex: usize) -> usize {
        self.vertex_fiber[cover_vertex].0
    }

    /// The cover vertex holding base vertex `x` at the given level.
    pub fn cover_vertex(&self, phi: &LevelHom, x: usize, level: FpScalar) -> Option<usize> {
        let rep = if phi.vertex_onto(x) { FpScalar::zero(phi.prime()) } else { level };
        self.vertex_fiber.iter().position(|&(bx, r)| bx == x && r == rep)
    }

    /// The cover pair holding base pair `q` at the given forward-origin
    /// level.
    pub fn cover_pair(&self, phi: &LevelHom, q: usize, level: FpScalar) -> Option<usize> {
        let rep = if phi.edge_onto(q) { FpScalar::zero(phi.prime()) } else { level };
        self.pair_fiber.iter().position(|&(bq, r)| bq == q && r == rep)
    }

    /// Rank of the cover graph: independent loops left outside a spanning
    /// tree.
    pub fn graph_rank(&self) -> usize {
        self.gog.graph().pair_count() + 1 - self.gog.graph().vertex_count()
    }
}

fn internal<T>(msg: impl Into<String>) -> Result<T, CoverError> {
    Err(CoverError::Internal(msg.into()))
}

/// Position of a base element in a kernel listing.
fn kernel_index(incl: &[usize], g: usize) -> Result<usize, CoverError> {
    match incl.binary_search(&g) {
        Ok(i) => Ok(i),
        Err(_) => internal(format!("element {g} should lie in the kernel listing {incl:?}")),
    }
}

/// Letters crossing one lifted pair in the given direction, in base terms:
/// correction, stable letter, correction.
fn crossing_letters(
    base: &GraphOfGroups,
    plus_edge: usize,
    a: usize,
    b: usize,
    forward: bool,
) -> Vec<Letter> {
    let graph = base.graph();
    let (o, t) = (graph.origin(plus_edge), graph.terminus(plus_edge));
    let mut letters = Vec::new();
    if forward {
        if a != 0 {
            letters.push(Letter::Vertex { vertex: o, element: a });
        }
        letters.push(Letter::Stable { edge: plus_edge });
        if b != 0 {
            letters.push(Letter::Vertex { vertex: t, element: b });
        }
    } else {
        let binv = base.vertex_group(t).inv(b);
        let ainv = base.vertex_group(o).inv(a);
        if binv != 0 {
            letters.push(Letter::Vertex { vertex: t, element: binv });
        }
        letters.push(Letter::Stable { edge: graph.bar(plus_edge) });
        if ainv != 0 {
            letters.push(Letter::Vertex { vertex: o, element: ainv });
        }
    }
    letters
}

/// Build the kernel cover of Φ over compatible data.
pub fn build_kernel_cover(
    base: &GraphOfGroups,
    sa: &SeriesAssignment,
    phi: &LevelHom,
) -> Result<KernelCover, CoverError> {
    let graph = base.graph();
    let p = base.prime();
    let zero = FpScalar::zero(p);
    let sd_base = match SpanningData::new(graph) {
        Ok(sd) => sd,
        Err(e) => return internal(format!("base graph lost its spanning tree: {e}")),
    };

    // Kernel groups: the next series term, materialized once per base
    // vertex and per base pair, together with the series shifted down one
    // level.
    let mut vertex_kernel: Vec<(Grp, Vec<usize>)> = Vec::new();
    let mut vertex_shifted: Vec<ChiefSeries> = Vec::new();
    for x in 0..graph.vertex_count() {
        let (g, incl, shifted) = sa.vertex_series(x).shifted_into_head();
        for h in 0..base.vertex_group(x).order() {
            let in_kernel = phi.vertex_value(x, h).is_zero();
            if in_kernel != incl.binary_search(&h).is_ok() {
                return internal(format!(
                    "vertex {x}: kernel and second series term disagree at element {h}"
                ));
            }
        }
        vertex_kernel.push((g, incl));
        vertex_shifted.push(shifted);
    }
    let mut edge_kernel: Vec<(Grp, Vec<usize>)> = Vec::new();
    let mut edge_shifted: Vec<ChiefSeries> = Vec::new();
    for q in 0..graph.pair_count() {
        let (g, incl, shifted) = sa.edge_series(q).shifted_into_head();
        edge_kernel.push((g, incl));
        edge_shifted.push(shifted);
    }

    // Fibered vertices.
    let level_reps = |onto: bool| -> Vec<FpScalar> {
        if onto { vec![zero] } else { (0..p).map(|c| FpScalar::new(c as i64, p)).collect() }
    };
    let mut vertex_fiber = Vec::new();
    let mut vertex_names = Vec::new();
    for x in 0..graph.vertex_count() {
        for rep in level_reps(phi.vertex_onto(x)) {
            vertex_fiber.push((x, rep));
            vertex_names.push(format!("{}.{}", graph.vertex_name(x), rep));
        }
    }
    let vertex_rep = |x: usize, raw: FpScalar| if phi.vertex_onto(x) { zero } else { raw };
    let cover_vertex_at = |x: usize, raw: FpScalar| -> Result<usize, CoverError> {
        let rep = vertex_rep(x, raw);
        match vertex_fiber.iter().position(|&(bx, r)| bx == x && r == rep) {
            Some(i) => Ok(i),
            None => internal(format!("missing cover vertex over {x} at level {rep}")),
        }
    };

    // Fibered pairs and their corrections.
    let mut pair_fiber = Vec::new();
    let mut pair_specs = Vec::new();
    let mut plus_correction = Vec::new();
    let mut minus_correction = Vec::new();
    for q in 0..graph.pair_count() {
        let y = graph.plus_of(q);
        let (o, t) = (graph.origin(y), graph.terminus(y));
        let sigma = phi.sigma(q);
        for c in level_reps(phi.edge_onto(q)) {
            let from_raw = c;
            let to_raw = c.add(sigma);
            let a = match phi.element_with_value(base, o, c.sub(vertex_rep(o, from_raw))) {
                Some(a) => a,
                None => return internal("origin correction needs an onto vertex map".to_string()),
            };
            let conj_t = match phi.element_with_value(base, t, to_raw.sub(vertex_rep(t, to_raw))) {
                Some(g) => g,
                None => return internal("terminus correction needs an onto vertex map".to_string()),
            };
            let b = base.vertex_group(t).inv(conj_t);
            pair_fiber.push((q, c));
            plus_correction.push(a);
            minus_correction.push(b);
            pair_specs.push(PairSpec {
                name: format!("{}.{}", graph.edge_name(y), c),
                bar_name: format!("{}.{}", graph.edge_name(graph.bar(y)), c),
                from: cover_vertex_at(o, from_raw)?,
                to: cover_vertex_at(t, to_raw)?,
            });
        }
    }

    let cover_graph = match Graph::new(vertex_names, &pair_specs) {
        Ok(g) => g,
        Err(e) => return internal(format!("cover graph rejected: {e}")),
    };

    // Cover groups and embeddings.
    let cover_vertex_groups: Vec<Grp> =
        vertex_fiber.iter().map(|&(x, _)| vertex_kernel[x].0.clone()).collect();
    let mut cover_edge_groups = Vec::new();
    let mut cover_monos = Vec::new();
    for (ci, &(q, _)) in pair_fiber.iter().enumerate() {
        let y = graph.plus_of(q);
        let (o, t) = (graph.origin(y), graph.terminus(y));
        let (e_grp, e_incl) = &edge_kernel[q];
        cover_edge_groups.push(e_grp.clone());
        let a = plus_correction[ci];
        let b = minus_correction[ci];
        let conj_t = base.vertex_group(t).inv(b);
        let conjugated = |vertex: usize, conj: usize, img: usize| {
            let grp = base.vertex_group(vertex);
            grp.mul(grp.mul(conj, img), grp.inv(conj))
        };
        // Forward: into the kernel at the terminus of the forward edge.
        let mut fwd_map = Vec::with_capacity(e_grp.order());
        for ek in 0..e_grp.order() {
            let img = conjugated(t, conj_t, base.mono(y).apply(e_incl[ek]));
            fwd_map.push(kernel_index(&vertex_kernel[t].1, img)?);
        }
        // Reverse: into the kernel at the origin of the forward edge.
        let mut rev_map = Vec::with_capacity(e_grp.order());
        for ek in 0..e_grp.order() {
            let img = conjugated(o, a, base.mono(graph.bar(y)).apply(e_incl[ek]));
            rev_map.push(kernel_index(&vertex_kernel[o].1, img)?);
        }
        let target_fwd = &vertex_kernel[t].0;
        let target_rev = &vertex_kernel[o].0;
        match (
            GroupHom::new(e_grp, target_fwd, fwd_map),
            GroupHom::new(e_grp, target_rev, rev_map),
        ) {
            (Ok(f), Ok(r)) => {
                cover_monos.push(f);
                cover_monos.push(r);
            }
            (Err(e), _) | (_, Err(e)) => {
                return internal(format!("cover embedding rejected: {e}"));
            }
        }
    }

    let cover_gog = match GraphOfGroups::new(
        cover_graph,
        p,
        cover_vertex_groups,
        cover_edge_groups,
        cover_monos,
    ) {
        Ok(g) => g,
        Err(e) => return internal(format!("cover graph of groups rejected: {e}")),
    };

    // Shifted series: one copy per fiber.
    let cover_vertex_series: Vec<ChiefSeries> =
        vertex_fiber.iter().map(|&(x, _)| vertex_shifted[x].clone()).collect();
    let cover_edge_series: Vec<ChiefSeries> =
        pair_fiber.iter().map(|&(q, _)| edge_shifted[q].clone()).collect();
    let series = match SeriesAssignment::new(&cover_gog, cover_vertex_series, cover_edge_series) {
        Ok(sa) => sa,
        Err(e) => return internal(format!("shifted series rejected: {e}")),
    };
    let level_maps = match solve_level_maps(&cover_gog, &series) {
        Ok(lm) => lm,
        Err(e) => return internal(format!("level maps must re-solve on the cover: {e}")),
    };

    // Connector words via the cover's spanning tree, then stable images.
    let sd_cover = match SpanningData::new(cover_gog.graph()) {
        Ok(sd) => sd,
        Err(e) => return internal(format!("cover graph is disconnected: {e}")),
    };
    let mut vertex_word = Vec::with_capacity(vertex_fiber.len());
    for cv in 0..vertex_fiber.len() {
        let mut letters = Vec::new();
        for ce in sd_cover.geodesic(cover_gog.graph(), 0, cv) {
            let cq = ce >> 1;
            let (q, _) = pair_fiber[cq];
            letters.extend(crossing_letters(
                base,
                graph.plus_of(q),
                plus_correction[cq],
                minus_correction[cq],
                ce & 1 == 0,
            ));
        }
        let w = base.reduce_word(&sd_base, &GWord { basepoint: 0, letters });
        let expect = vertex_fiber[cv].1;
        if phi.eval(&w) != expect {
            return internal(format!("connector word of cover vertex {cv} has the wrong level"));
        }
        vertex_word.push(w);
    }
    let mut stable_word = Vec::with_capacity(pair_fiber.len());
    for (cq, &(q, _)) in pair_fiber.iter().enumerate() {
        let ce = 2 * cq;
        let from = cover_gog.graph().origin(ce);
        let to = cover_gog.graph().terminus(ce);
        let mut letters = vertex_word[from].letters.clone();
        letters.extend(crossing_letters(
            base,
            graph.plus_of(q),
            plus_correction[cq],
            minus_correction[cq],
            true,
        ));
        let mut back = GWord { basepoint: 0, letters: vertex_word[to].letters.clone() };
        back = base.word_inverse(&back);
        letters.extend(back.letters);
        let h = base.reduce_word(&sd_base, &GWord { basepoint: 0, letters });
        if sd_cover.is_tree_pair(cq) && !h.is_empty() {
            return internal(format!("tree pair {cq} lifted to a nontrivial stable image"));
        }
        if !phi.eval(&h).is_zero() {
            return internal(format!("stable image of cover pair {cq} left the kernel"));
        }
        stable_word.push(h);
    }

    Ok(KernelCover {
        gog: cover_gog,
        series,
        level_maps,
        vertex_fiber,
        pair_fiber,
        vertex_incl: vertex_kernel.into_iter().map(|(_, incl)| incl).collect(),
        edge_incl: edge_kernel.into_iter().map(|(_, incl)| incl).collect(),
        vertex_word,
        plus_correction,
        minus_correction,
        stable_word,
    })
}

/// Rewrite a kernel word as a word over the cover, by lifting its reduced
/// path fiber by fiber. The result evaluates back to the input under
/// [`embed_word`].
pub fn rewrite_into_kernel(
    base: &GraphOfGroups,
    phi: &LevelHom,
    cover: &KernelCover,
    w: &GWord,
) -> Result<GWord, CoverError> {
    let graph = base.graph();
    let value = phi.eval(w);
    if !value.is_zero() {
        return Err(CoverError::WordNotInKernel { value });
    }
    let sd_base = match SpanningData::new(graph) {
        Ok(sd) => sd,
        Err(e) => return internal(format!("base graph lost its spanning tree: {e}")),
    };
    let sd_cover = match SpanningData::new(cover.gog.graph()) {
        Ok(sd) => sd,
        Err(e) => return internal(format!("cover graph is disconnected: {e}")),
    };
    // The basepoint of a word is immaterial (tree letters are trivial), so
    // anchor the path at vertex 0, over which the cover's vertex 0 sits.
    let mut anchored = w.clone();
    anchored.basepoint = 0;
    let path = base.reduce_path(base.word_to_path(&sd_base, &anchored));

    let mut letters: Vec<Letter> = Vec::new();
    let mut cv = 0usize;
    let mut rho = path.elems[0];
    for (i, &y) in path.edges.iter().enumerate() {
        let x = cover.base_vertex(cv);
        if x != graph.origin(y) {
            return internal("lift left the path's track".to_string());
        }
        let q = graph.pair_of(y);
        let sigma = phi.sigma(q);
        let raw = cover.vertex_fiber[cv].1.add(phi.vertex_value(x, rho));
        let forward = graph.is_plus(y);
        let c_raw = if forward { raw } else { raw.sub(sigma) };
        let cq = match cover.cover_pair(phi, q, c_raw) {
            Some(cq) => cq,
            None => return internal(format!("no cover pair over {q} at level {c_raw}")),
        };
        let c_rep = cover.pair_fiber[cq].1;
        let delta = c_rep.sub(c_raw);
        let plus_edge = graph.plus_of(q);
        let t_plus = graph.terminus(plus_edge);
        let e = match (0..base.edge_group(q).order())
            .find(|&e| phi.vertex_value(t_plus, base.mono(plus_edge).apply(e)) == delta)
        {
            Some(e) => e,
            None => return internal("no edge element reaches the fiber representative".to_string()),
        };
        let a = cover.plus_correction[cq];
        let b = cover.minus_correction[cq];
        let g_next = path.elems[i + 1];
        let (k, next_cv, next_rho) = if forward {
            let go = base.vertex_group(x);
            let k = go.mul(go.mul(rho, base.mono(graph.bar(y)).apply(e)), go.inv(a));
            let gt = base.vertex_group(t_plus);
            let next_rho = gt.mul(gt.mul(gt.inv(b), gt.inv(base.mono(y).apply(e))), g_next);
            (k, cover.gog.graph().terminus(2 * cq), next_rho)
        } else {
            let gt = base.vertex_group(x);
            let k = gt.mul(gt.mul(rho, base.mono(graph.bar(y)).apply(e)), b);
            let o_plus = graph.origin(plus_edge);
            let go = base.vertex_group(o_plus);
            let next_rho = go.mul(go.mul(a, go.inv(base.mono(y).apply(e))), g_next);
            (k, cover.gog.graph().origin(2 * cq), next_rho)
        };
        if k != 0 {
            let element = kernel_index(&cover.vertex_incl[x], k)?;
            letters.push(Letter::Vertex { vertex: cv, element });
        } else if !phi.vertex_value(x, k).is_zero() {
            return internal("emitted element left the kernel".to_string());
        }
        if !sd_cover.is_tree_pair(cq) {
            let ce = if forward { 2 * cq } else { 2 * cq + 1 };
            letters.push(Letter::Stable { edge: ce });
        }
        cv = next_cv;
        rho = next_rho;
    }
    if cv != 0 {
        return internal("lifted path did not close at the cover basepoint".to_string());
    }
    if rho != 0 {
        let element = kernel_index(&cover.vertex_incl[cover.base_vertex(0)], rho)?;
        letters.push(Letter::Vertex { vertex: 0, element });
    }
    Ok(GWord { basepoint: 0, letters })
}

/// Expand a cover word into the base: vertex letters conjugate through
/// their fiber's connector word, stable letters expand to their stored
/// base images.
pub fn embed_word(base: &GraphOfGroups, cover: &KernelCover, w: &GWord) -> GWord {
    let sd_base = SpanningData::new(base.graph()).expect("base graph is connected");
    let mut letters = Vec::new();
    for letter in &w.letters {
        match *letter {
            Letter::Vertex { vertex, element } => {
                let x = cover.base_vertex(vertex);
                let conn = &cover.vertex_word[vertex];
                letters.extend(conn.letters.iter().copied());
                let g = cover.vertex_incl[x][element];
                if g != 0 {
                    letters.push(Letter::Vertex { vertex: x, element: g });
                }
                let back = base.word_inverse(conn);
                letters.extend(back.letters);
            }
            Letter::Stable { edge } => {
                let h = &cover.stable_word[edge >> 1];
                if edge & 1 == 0 {
                    letters.extend(h.letters.iter().copied());
                } else {
                    let back = base.word_inverse(h);
                    letters.extend(back.letters);
                }
            }
        }
    }
    base.reduce_word(&sd_base, &GWord { basepoint: 0, letters })
}

/// Check a stored cover against the base data it claims to cover: fiber
/// layout, kernel listings, shifted series, re-solved conditions,
/// connector levels, and — the load-bearing part — that the embedding into
/// the base respects every cover relation.
pub fn verify_cover(
    base: &GraphOfGroups,
    sa: &SeriesAssignment,
    phi: &LevelHom,
    cover: &KernelCover,
) -> Result<(), CoverError> {
    let graph = base.graph();
    let p = base.prime();
    let zero = FpScalar::zero(p);
    let bad = |msg: String| Err(CoverError::BadCover(msg));
    let sd_base = SpanningData::new(graph).expect("base graph is connected");

    if cover.gog.prime() != p {
        return bad("cover prime differs from the base prime".to_string());
    }

    // Fiber layout.
    let mut expected_fibers = Vec::new();
    for x in 0..graph.vertex_count() {
        if phi.vertex_onto(x) {
            expected_fibers.push((x, zero));
        } else {
            for c in 0..p {
                expected_fibers.push((x, FpScalar::new(c as i64, p)));
            }
        }
    }
    if cover.vertex_fiber != expected_fibers {
        return bad("cover vertex fibers do not match the level map".to_string());
    }
    let mut expected_pairs = Vec::new();
    for q in 0..graph.pair_count() {
        if phi.edge_onto(q) {
            expected_pairs.push((q, zero));
        } else {
            for c in 0..p {
                expected_pairs.push((q, FpScalar::new(c as i64, p)));
            }
        }
    }
    if cover.pair_fiber != expected_pairs {
        return bad("cover pair fibers do not match the level map".to_string());
    }
    if cover.gog.graph().vertex_count() != cover.vertex_fiber.len()
        || cover.gog.graph().pair_count() != cover.pair_fiber.len()
    {
        return bad("cover graph size does not match its fiber tables".to_string());
    }

    // Kernel listings and groups.
    for x in 0..graph.vertex_count() {
        let listed = &cover.vertex_incl[x];
        let expected: Vec<usize> = (0..base.vertex_group(x).order())
            .filter(|&g| phi.vertex_value(x, g).is_zero())
            .collect();
        if *listed != expected {
            return bad(format!("vertex {x}: kernel listing is not the level map's kernel"));
        }
        if *sa.vertex_series(x).term(1).elements() != *expected {
            return bad(format!("vertex {x}: kernel is not the second series term"));
        }
    }
    for q in 0..graph.pair_count() {
        let y = graph.plus_of(q);
        let t = graph.terminus(y);
        let listed = &cover.edge_incl[q];
        let expected: Vec<usize> = (0..base.edge_group(q).order())
            .filter(|&e| phi.vertex_value(t, base.mono(y).apply(e)).is_zero())
            .collect();
        if *listed != expected {
            return bad(format!("pair {q}: edge kernel listing is wrong"));
        }
        if *sa.edge_series(q).term(1).elements() != *expected {
            return bad(format!("pair {q}: edge kernel is not the second series term"));
        }
    }
    for (cv, &(x, _)) in cover.vertex_fiber.iter().enumerate() {
        let grp = cover.gog.vertex_group(cv);
        let incl = &cover.vertex_incl[x];
        if grp.order() != incl.len() {
            return bad(format!("cover vertex {cv}: group order differs from its listing"));
        }
        let parent = base.vertex_group(x);
        for a in 0..grp.order() {
            for b in 0..grp.order() {
                if incl[grp.mul(a, b)] != parent.mul(incl[a], incl[b]) {
                    return bad(format!("cover vertex {cv}: group law differs from the base"));
                }
            }
        }
    }

    // Incidence and corrections.
    for (cq, &(q, c)) in cover.pair_fiber.iter().enumerate() {
        let y = graph.plus_of(q);
        let (o, t) = (graph.origin(y), graph.terminus(y));
        let sigma = phi.sigma(q);
        let ce = 2 * cq;
        let from = cover.gog.graph().origin(ce);
        let to = cover.gog.graph().terminus(ce);
        if cover.cover_vertex(phi, o, c) != Some(from)
            || cover.cover_vertex(phi, t, c.add(sigma)) != Some(to)
        {
            return bad(format!("cover pair {cq}: endpoints sit in the wrong fibers"));
        }
        let a = cover.plus_correction[cq];
        let b = cover.minus_correction[cq];
        let rep_from = cover.vertex_fiber[from].1;
        let rep_to = cover.vertex_fiber[to].1;
        if phi.vertex_value(o, a) != c.sub(rep_from) {
            return bad(format!("cover pair {cq}: origin correction has the wrong level"));
        }
        if phi.vertex_value(t, b) != rep_to.sub(c.add(sigma)) {
            return bad(format!("cover pair {cq}: terminus correction has the wrong level"));
        }
        // Embeddings agree with corrected base embeddings.
        let e_grp = cover.gog.edge_group(cq);
        let incl_e = &cover.edge_incl[q];
        let gt = base.vertex_group(t);
        let go = base.vertex_group(o);
        let conj_t = gt.inv(b);
        for ek in 0..e_grp.order() {
            let fwd = cover.vertex_incl[t][cover.gog.mono(ce).apply(ek)];
            let want_fwd = gt.mul(gt.mul(conj_t, base.mono(y).apply(incl_e[ek])), gt.inv(conj_t));
            if fwd != want_fwd {
                return bad(format!("cover pair {cq}: forward embedding is not the corrected one"));
            }
            let rev = cover.vertex_incl[o][cover.gog.mono(cover.gog.graph().bar(ce)).apply(ek)];
            let want_rev = go.mul(go.mul(a, base.mono(graph.bar(y)).apply(incl_e[ek])), go.inv(a));
            if rev != want_rev {
                return bad(format!("cover pair {cq}: reverse embedding is not the corrected one"));
            }
        }
    }

    // Shifted series.
    for (cv, &(x, _)) in cover.vertex_fiber.iter().enumerate() {
        let terms = sa.vertex_series(x).terms();
        let src: &[Subgroup] = if terms.len() >= 2 { &terms[1..] } else { terms };
        let got = cover.series.vertex_series(cv);
        if got.terms().len() != src.len() {
            return bad(format!("cover vertex {cv}: shifted series has the wrong length"));
        }
        for (k, term) in src.iter().enumerate() {
            let mapped: Vec<usize> =
                got.terms()[k].elements().iter().map(|&i| cover.vertex_incl[x][i]).collect();
            if mapped != *term.elements() {
                return bad(format!("cover vertex {cv}: shifted term {k} is wrong"));
            }
        }
    }
    for (cq, &(q, _)) in cover.pair_fiber.iter().enumerate() {
        let terms = sa.edge_series(q).terms();
        let src: &[Subgroup] = if terms.len() >= 2 { &terms[1..] } else { terms };
        let got = cover.series.edge_series(cq);
        if got.terms().len() != src.len() {
            return bad(format!("cover pair {cq}: shifted series has the wrong length"));
        }
        for (k, term) in src.iter().enumerate() {
            let mapped: Vec<usize> =
                got.terms()[k].elements().iter().map(|&i| cover.edge_incl[q][i]).collect();
            if mapped != *term.elements() {
                return bad(format!("cover pair {cq}: shifted term {k} is wrong"));
            }
        }
    }

    // The shifted data is itself compatible.
    if let Err(e) = check_compatibility(&cover.gog, &cover.series, Some(&cover.level_maps)) {
        return bad(format!("shifted data is not compatible on the cover: {e}"));
    }

    // Connector words and stable images.
    if !cover.vertex_word[0].is_empty() {
        return bad("the basepoint connector word must be empty".to_string());
    }
    for (cv, w) in cover.vertex_word.iter().enumerate() {
        if phi.eval(w) != cover.vertex_fiber[cv].1 {
            return bad(format!("connector word of cover vertex {cv} has the wrong level"));
        }
    }
    let sd_cover = SpanningData::new(cover.gog.graph())
        .map_err(|e| CoverError::BadCover(format!("cover graph is disconnected: {e}")))?;
    for (cq, h) in cover.stable_word.iter().enumerate() {
        if sd_cover.is_tree_pair(cq) {
            if !h.is_empty() {
                return bad(format!("cover tree pair {cq} must have an empty stable image"));
            }
        } else if !phi.eval(h).is_zero() {
            return bad(format!("stable image of cover pair {cq} lies outside the kernel"));
        }
    }

    // Embedding soundness: every cover relation embeds to a base identity.
    for cq in 0..cover.pair_fiber.len() {
        let ce = 2 * cq;
        for ek in 0..cover.gog.edge_group(cq).order() {
            let fwd_k = cover.gog.mono(ce).apply(ek);
            let rev_k = cover.gog.mono(cover.gog.graph().bar(ce)).apply(ek);
            let to = cover.gog.graph().terminus(ce);
            let from = cover.gog.graph().origin(ce);
            let lhs_word = GWord {
                basepoint: 0,
                letters: vec![
                    Letter::Stable { edge: ce },
                    Letter::Vertex { vertex: to, element: fwd_k },
                    Letter::Stable { edge: cover.gog.graph().bar(ce) },
                ],
            };
            let rhs_word =
                GWord { basepoint: 0, letters: vec![Letter::Vertex { vertex: from, element: rev_k }] };
            let lhs = embed_word(base, cover, &lhs_word);
            let rhs = embed_word(base, cover, &rhs_word);
            if !base.words_equal(&sd_base, &lhs, &rhs) {
                return bad(format!("cover pair {cq}: relation {ek} breaks under embedding"));
            }
        }
    }
    Ok(())
}
