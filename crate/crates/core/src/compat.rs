//! Compatibility of chief-series data with a graph of groups.
//!
//! A series assignment gives every vertex group and every edge-pair group a
//! chief filtration of one common length (descending, each term normal in
//! its whole group, factors trivial or of order p). Two conditions make
//! such data usable for separation:
//!
//! 1. **Series alignment**: along every directed edge `y`, the embedding
//!    carries the edge filtration exactly onto the trace of the vertex
//!    filtration on the image — `f_y(E^(k)) = f_y(E) ∩ V^(k)` for all `k`.
//!    Equivalently, the edge filtration is the preimage of the vertex
//!    filtration, from either end.
//! 2. **Level maps**: at each level, each proper factor can be given a
//!    nonzero scalar (a choice of F_p-coordinate) so that each embedding
//!    carries the edge factor's coordinate onto the vertex factor's
//!    coordinate. Alignment makes each embedding act on a proper edge
//!    factor by a nonzero multiplier; the scalars must make every loop of
//!    multipliers cancel. Solvability is decided per level by propagating
//!    over a spanning forest of the supported pairs and checking the
//!    leftover loops.
//!
//! The search enumerates strict chief chains for the vertex groups only:
//! alignment forces each edge chain to be the preimage of its endpoints'
//! chains, and it forces which steps of different groups must share a
//! level, so candidate filtrations (with their stutter placement) can be
//! reconstructed from vertex chain contents alone. Each reconstruction is
//! then checked as above.

use crate::fp::FpScalar;
use crate::gog::GraphOfGroups;
use crate::pgroups::{ChiefFactor, ChiefSeries, Grp, SeriesError, Subgroup, quotient_group};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Why a series assignment (or supplied level-map data) is unusable.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompatError {
    #[error("expected {expected} {kind} series, got {got}")]
    SeriesCount { kind: &'static str, expected: usize, got: usize },
    #[error("series for {name:?} is not a filtration of that group")]
    SeriesParent { name: String },
    #[error("series for {name:?} is not a chief series: {source}")]
    SeriesInvalid { name: String, source: SeriesError },
    #[error(
        "series alignment fails along edge {edge:?} at level {level}: \
         the embedded edge term is {image_of_term:?} but the embedded edge group \
         meets the vertex term in {meet:?}"
    )]
    Misaligned { edge: String, level: usize, image_of_term: Vec<usize>, meet: Vec<usize> },
    #[error(
        "level maps are unsolvable at level {level}: \
         the multiplier holonomy around pair {pair:?} is {value}, not 1"
    )]
    Holonomy { level: usize, pair: String, value: FpScalar },
    #[error("supplied level maps are wrong at level {level}: {reason}")]
    BadLevelMap { level: usize, reason: String },
}

/// A chief filtration of common length for every vertex and edge group.
///
/// Terms are kept exactly as given — where a filtration repeats a term is
/// meaningful — except that shorter series are padded **at the top** with
/// repeats of the whole group, so all stored series end up with the same
/// number of terms and their final (trivial) terms on the same level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesAssignment {
    length: usize,
    vertex_series: Vec<ChiefSeries>,
    edge_series: Vec<ChiefSeries>,
}

impl SeriesAssignment {
    pub fn new(
        gog: &GraphOfGroups,
        vertex_series: Vec<ChiefSeries>,
        edge_series: Vec<ChiefSeries>,
    ) -> Result<SeriesAssignment, CompatError> {
        let graph = gog.graph();
        if vertex_series.len() != graph.vertex_count() {
            return Err(CompatError::SeriesCount {
                kind: "vertex",
                expected: graph.vertex_count(),
                got: vertex_series.len(),
            });
        }
        if edge_series.len() != graph.pair_count() {
            return Err(CompatError::SeriesCount {
                kind: "edge",
                expected: graph.pair_count(),
                got: edge_series.len(),
            });
        }
        let p = gog.prime();
        let mut lengths = Vec::new();
        let named = vertex_series
            .iter()
            .enumerate()
            .map(|(v, s)| (graph.vertex_name(v).to_string(), gog.vertex_group(v), s))
            .chain(edge_series.iter().enumerate().map(|(q, s)| {
                (graph.edge_name(graph.plus_of(q)).to_string(), gog.edge_group(q), s)
            }));
        for (name, group, series) in named {
            series
                .verify(p)
                .map_err(|source| CompatError::SeriesInvalid { name: name.clone(), source })?;
            if **series.parent() != **group {
                return Err(CompatError::SeriesParent { name });
            }
            lengths.push(series.stored_len() - 1);
        }
        let length = lengths.iter().copied().max().unwrap_or(0);
        let normalize = |series: ChiefSeries, len: usize| {
            let whole = series.terms()[0].clone();
            let mut terms = vec![whole; length - len];
            terms.extend(series.terms().iter().cloned());
            ChiefSeries::new(terms)
        };
        let mut it = lengths.into_iter();
        let vertex_series = vertex_series
            .into_iter()
            .map(|s| normalize(s, it.next().expect("one length per series")))
            .collect();
        let edge_series = edge_series
            .into_iter()
            .map(|s| normalize(s, it.next().expect("one length per series")))
            .collect();
        Ok(SeriesAssignment { length, vertex_series, edge_series })
    }

    /// The common filtration length `N`: every stored series has `N + 1`
    /// terms, from the whole group at level 0 to the trivial one at `N`.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn vertex_series(&self, v: usize) -> &ChiefSeries {
        &self.vertex_series[v]
    }

    pub fn edge_series(&self, pair: usize) -> &ChiefSeries {
        &self.edge_series[pair]
    }

    /// Drop the top level, which is possible exactly when every factor
    /// there is trivial (each stored series then starts with a duplicated
    /// whole-group term). `None` when there is no level to drop or some
    /// top factor is proper.
    pub fn drop_top_level(&self) -> Option<SeriesAssignment> {
        if self.length == 0 {
            return None;
        }
        let all_trivial = self
            .vertex_series
            .iter()
            .chain(&self.edge_series)
            .all(|s| matches!(s.factor(0), ChiefFactor::Trivial));
        if !all_trivial {
            return None;
        }
        let drop = |s: &ChiefSeries| ChiefSeries::new(s.terms()[1..].to_vec());
        Some(SeriesAssignment {
            length: self.length - 1,
            vertex_series: self.vertex_series.iter().map(drop).collect(),
            edge_series: self.edge_series.iter().map(drop).collect(),
        })
    }
}

/// Scalars chosen at one level: `Some` exactly on the proper factors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelScalars {
    pub vertex: Vec<Option<FpScalar>>,
    pub pair: Vec<Option<FpScalar>>,
}

/// A solution to the level-map conditions: one set of scalars per level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelMaps {
    pub levels: Vec<LevelScalars>,
}

impl LevelMaps {
    /// The scalars left after dropping the assignment's top level.
    pub fn drop_top_level(&self) -> Option<LevelMaps> {
        if self.levels.is_empty() {
            None
        } else {
            Some(LevelMaps { levels: self.levels[1..].to_vec() })
        }
    }
}

/// Check that every embedding carries its edge filtration exactly onto the
/// trace of the vertex filtration (the first failing edge and level are
/// reported with both element sets).
pub fn check_series_alignment(
    gog: &GraphOfGroups,
    sa: &SeriesAssignment,
) -> Result<(), CompatError> {
    let graph = gog.graph();
    for y in 0..graph.directed_count() {
        let es = sa.edge_series(graph.pair_of(y));
        let vs = sa.vertex_series(graph.terminus(y));
        for level in 0..=sa.length() {
            let image_of_term: Vec<usize> = es
                .term(level)
                .elements()
                .iter()
                .map(|&c| gog.mono(y).apply(c))
                .collect();
            let meet: Vec<usize> = gog
                .image_elems(y)
                .iter()
                .copied()
                .filter(|&g| vs.term(level).contains(g))
                .collect();
            let mut sorted = image_of_term.clone();
            sorted.sort_unstable();
            if sorted != meet {
                return Err(CompatError::Misaligned {
                    edge: graph.edge_name(y).to_string(),
                    level,
                    image_of_term: sorted,
                    meet,
                });
            }
        }
    }
    Ok(())
}

/// The multiplier by which the embedding along `y` carries the edge factor
/// at `level` onto the vertex factor at `y`'s terminus: `None` when the
/// edge factor is trivial there, and a nonzero scalar otherwise.
///
/// Call only after [`check_series_alignment`] has passed — on misaligned
/// data the multiplier need not exist, and this panics.
pub fn induced_scalar(
    gog: &GraphOfGroups,
    sa: &SeriesAssignment,
    y: usize,
    level: usize,
) -> Option<FpScalar> {
    let p = gog.prime();
    let es = sa.edge_series(gog.graph().pair_of(y));
    match es.factor(level) {
        ChiefFactor::Trivial => None,
        ChiefFactor::OrderP { generator } => {
            let img = gog.mono(y).apply(generator);
            let vs = sa.vertex_series(gog.graph().terminus(y));
            let j = vs
                .factor_dlog(level, img, p)
                .expect("aligned data: embedded factor generator stays in the vertex term");
            assert!(j != 0, "aligned data: embedded factor generator cannot drop a level");
            Some(FpScalar::new(j as i64, p))
        }
    }
}

/// Per-level support: proper vertex factors, proper pair factors, and the
/// two multipliers of each supported pair.
struct LevelSupport {
    vertex: Vec<bool>,
    pair: Vec<bool>,
    /// For each supported pair: multipliers along the forward and reverse
    /// directed edges.
    scalars: Vec<Option<(FpScalar, FpScalar)>>,
}

fn level_support(gog: &GraphOfGroups, sa: &SeriesAssignment, level: usize) -> LevelSupport {
    let graph = gog.graph();
    let vertex: Vec<bool> = (0..graph.vertex_count())
        .map(|v| !matches!(sa.vertex_series(v).factor(level), ChiefFactor::Trivial))
        .collect();
    let mut pair = vec![false; graph.pair_count()];
    let mut scalars = vec![None; graph.pair_count()];
    for q in 0..graph.pair_count() {
        let plus = graph.plus_of(q);
        if let (Some(fwd), Some(rev)) = (
            induced_scalar(gog, sa, plus, level),
            induced_scalar(gog, sa, graph.bar(plus), level),
        ) {
            pair[q] = true;
            scalars[q] = Some((fwd, rev));
        }
    }
    LevelSupport { vertex, pair, scalars }
}

/// Solve the level-map conditions: pick scalars level by level, rooting
/// each supported component at 1 and propagating across a breadth-first
/// forest; a leftover pair whose multipliers disagree with the propagated
/// scalars is reported as a holonomy failure.
pub fn solve_level_maps(
    gog: &GraphOfGroups,
    sa: &SeriesAssignment,
) -> Result<LevelMaps, CompatError> {
    let graph = gog.graph();
    let one = FpScalar::one(gog.prime());
    let mut levels = Vec::with_capacity(sa.length());
    for level in 0..sa.length() {
        let support = level_support(gog, sa, level);
        let mut vertex: Vec<Option<FpScalar>> = vec![None; graph.vertex_count()];
        for root in 0..graph.vertex_count() {
            if !support.vertex[root] || vertex[root].is_some() {
                continue;
            }
            vertex[root] = Some(one);
            let mut queue = std::collections::VecDeque::from([root]);
            while let Some(v) = queue.pop_front() {
                let lv = vertex[v].expect("queued vertices have scalars");
                for q in 0..graph.pair_count() {
                    if !support.pair[q] {
                        continue;
                    }
                    let plus = graph.plus_of(q);
                    let (o, t) = (graph.origin(plus), graph.terminus(plus));
                    let (fwd, rev) = support.scalars[q].expect("supported pair has multipliers");
                    if o == v && vertex[t].is_none() {
                        vertex[t] = Some(fwd.inv().mul(rev).mul(lv));
                        queue.push_back(t);
                    } else if t == v && vertex[o].is_none() {
                        vertex[o] = Some(rev.inv().mul(fwd).mul(lv));
                        queue.push_back(o);
                    }
                }
            }
        }
        let mut pair: Vec<Option<FpScalar>> = vec![None; graph.pair_count()];
        for q in 0..graph.pair_count() {
            if !support.pair[q] {
                continue;
            }
            let plus = graph.plus_of(q);
            let (fwd, rev) = support.scalars[q].expect("supported pair has multipliers");
            let from_fwd = fwd.mul(vertex[graph.terminus(plus)].expect("supported endpoints"));
            let from_rev = rev.mul(vertex[graph.origin(plus)].expect("supported endpoints"));
            if from_fwd != from_rev {
                return Err(CompatError::Holonomy {
                    level,
                    pair: graph.edge_name(plus).to_string(),
                    value: from_rev.mul(from_fwd.inv()),
                });
            }
            pair[q] = Some(from_fwd);
        }
        levels.push(LevelScalars { vertex, pair });
    }
    Ok(LevelMaps { levels })
}

/// Check supplied level-map scalars: defined exactly on the support,
/// nonzero, and consistent with every embedding's multiplier at every
/// level.
pub fn check_level_maps(
    gog: &GraphOfGroups,
    sa: &SeriesAssignment,
    lm: &LevelMaps,
) -> Result<(), CompatError> {
    let graph = gog.graph();
    if lm.levels.len() != sa.length() {
        return Err(CompatError::BadLevelMap {
            level: lm.levels.len().min(sa.length()),
            reason: format!(
                "expected scalars for {} levels, got {}",
                sa.length(),
                lm.levels.len()
            ),
        });
    }
    for (level, scalars) in lm.levels.iter().enumerate() {
        if scalars.vertex.len() != graph.vertex_count() || scalars.pair.len() != graph.pair_count()
        {
            return Err(CompatError::BadLevelMap {
                level,
                reason: "scalar table sizes do not match the graph".to_string(),
            });
        }
        let support = level_support(gog, sa, level);
        for v in 0..graph.vertex_count() {
            let name = graph.vertex_name(v);
            match (support.vertex[v], scalars.vertex[v]) {
                (true, None) => {
                    return Err(CompatError::BadLevelMap {
                        level,
                        reason: format!("missing scalar for vertex {name:?}"),
                    });
                }
                (false, Some(_)) => {
                    return Err(CompatError::BadLevelMap {
                        level,
                        reason: format!("scalar given for vertex {name:?}, whose factor is trivial"),
                    });
                }
                (true, Some(s)) => {
                    if s.prime() != gog.prime() || s.is_zero() {
                        return Err(CompatError::BadLevelMap {
                            level,
                            reason: format!("scalar for vertex {name:?} must be a nonzero residue mod {}", gog.prime()),
                        });
                    }
                }
                (false, None) => {}
            }
        }
        for q in 0..graph.pair_count() {
            let name = graph.edge_name(graph.plus_of(q));
            match (support.pair[q], scalars.pair[q]) {
                (true, None) => {
                    return Err(CompatError::BadLevelMap {
                        level,
                        reason: format!("missing scalar for edge pair {name:?}"),
                    });
                }
                (false, Some(_)) => {
                    return Err(CompatError::BadLevelMap {
                        level,
                        reason: format!("scalar given for edge pair {name:?}, whose factor is trivial"),
                    });
                }
                (true, Some(s)) => {
                    if s.prime() != gog.prime() || s.is_zero() {
                        return Err(CompatError::BadLevelMap {
                            level,
                            reason: format!("scalar for edge pair {name:?} must be a nonzero residue mod {}", gog.prime()),
                        });
                    }
                    let plus = graph.plus_of(q);
                    let (fwd, rev) = support.scalars[q].expect("supported pair has multipliers");
                    for (label, y, c) in
                        [("forward", plus, fwd), ("reverse", graph.bar(plus), rev)]
                    {
                        let lt = scalars.vertex[graph.terminus(y)].ok_or_else(|| {
                            CompatError::BadLevelMap {
                                level,
                                reason: format!(
                                    "missing scalar at the {label} endpoint of pair {name:?}"
                                ),
                            }
                        })?;
                        if c.mul(lt) != s {
                            return Err(CompatError::BadLevelMap {
                                level,
                                reason: format!(
                                    "pair {name:?}: {label} multiplier {c} times endpoint scalar {lt} \
                                     is not the pair scalar {s}"
                                ),
                            });
                        }
                    }
                }
                (false, None) => {}
            }
        }
    }
    Ok(())
}

/// Full compatibility check: series alignment, then level maps (solved
/// afresh, or validated when supplied). Returns the level maps in force.
pub fn check_compatibility(
    gog: &GraphOfGroups,
    sa: &SeriesAssignment,
    supplied: Option<&LevelMaps>,
) -> Result<LevelMaps, CompatError> {
    check_series_alignment(gog, sa)?;
    match supplied {
        Some(lm) => {
            check_level_maps(gog, sa, lm)?;
            Ok(lm.clone())
        }
        None => solve_level_maps(gog, sa),
    }
}

/// The Frattini subgroup of a p-group: generated by commutators and p-th
/// powers.
fn frattini(g: &Grp, p: u32) -> Subgroup {
    let mut seeds = Vec::new();
    for a in 0..g.order() {
        seeds.push(g.pow(a, p as i64));
        for b in 0..g.order() {
            seeds.push(g.commutator(a, b));
        }
    }
    Subgroup::closure(g, &seeds)
}

/// Subgroups of index p in an elementary abelian p-group, as sorted element
/// lists: kernels of the nonzero functionals, one per proportionality
/// class.
fn hyperplanes(q: &Grp, p: u32) -> Vec<Vec<usize>> {
    // Build coordinates over a greedy basis.
    let mut span: Vec<(usize, Vec<u32>)> = vec![(0, Vec::new())];
    let mut known = vec![false; q.order()];
    known[0] = true;
    for e in 1..q.order() {
        if known[e] {
            continue;
        }
        let mut next = Vec::with_capacity(span.len() * p as usize);
        for (x, v) in &span {
            let mut padded = v.clone();
            padded.push(0);
            next.push((*x, padded));
            let mut y = *x;
            for j in 1..p {
                y = q.mul(y, e);
                known[y] = true;
                let mut w = v.clone();
                w.push(j);
                next.push((y, w));
            }
        }
        span = next;
    }
    let rank = span.first().map_or(0, |(_, v)| v.len());
    let mut coords = vec![Vec::new(); q.order()];
    for (x, v) in span {
        coords[x] = v;
    }
    // One functional per proportionality class: first nonzero entry is 1.
    let mut result = Vec::new();
    let mut functional = vec![0u32; rank];
    loop {
        // Advance to the next vector in lexicographic order.
        let mut i = rank;
        loop {
            if i == 0 {
                return result;
            }
            i -= 1;
            functional[i] += 1;
            if functional[i] < p {
                break;
            }
            functional[i] = 0;
        }
        if functional.iter().find(|&&c| c != 0) != Some(&1) {
            continue;
        }
        let kernel: Vec<usize> = (0..q.order())
            .filter(|&x| {
                coords[x].iter().zip(&functional).map(|(&a, &b)| a * b).sum::<u32>() % p == 0
            })
            .collect();
        result.push(kernel);
    }
}

/// Index-p subgroups of `s` that are normal in the parent group, ascending
/// by element list. (Any such subgroup contains the Frattini subgroup of
/// `s`, so they are preimages of hyperplanes of the Frattini quotient.)
fn normal_maximal_subgroups(s: &Subgroup, p: u32) -> Vec<Subgroup> {
    let parent = s.parent().clone();
    let (s_grp, incl) = s.as_group();
    let phi = frattini(&s_grp, p);
    let (q, proj) = quotient_group(&s_grp, &phi).expect("frattini subgroup is normal");
    let mut result = Vec::new();
    for hyper in hyperplanes(&q, p) {
        let member: Vec<bool> = {
            let mut m = vec![false; q.order()];
            for &x in &hyper {
                m[x] = true;
            }
            m
        };
        let elements: Vec<usize> = (0..s_grp.order())
            .filter(|&e| member[proj.apply(e)])
            .map(|e| incl[e])
            .collect();
        let sub = Subgroup::from_elements(&parent, &elements)
            .expect("hyperplane preimages are subgroups");
        if sub.is_normal().is_ok() {
            result.push(sub);
        }
    }
    result.sort_by(|a, b| a.elements().cmp(b.elements()));
    result
}

/// All strict chief chains of a p-group: descending, every term normal in
/// the whole group, every step of index p. Depth-first with candidates in
/// ascending element order, so the output is deterministic (and sorted by
/// term lists). Returns `None` when more than `cap` chains exist.
pub fn enumerate_chief_chains(parent: &Grp, p: u32, cap: usize) -> Option<Vec<ChiefSeries>> {
    let mut chains = Vec::new();
    let mut stack = vec![Subgroup::whole(parent)];
    fn dfs(
        stack: &mut Vec<Subgroup>,
        chains: &mut Vec<ChiefSeries>,
        p: u32,
        cap: usize,
    ) -> bool {
        let last = stack.last().expect("stack nonempty");
        if last.is_trivial() {
            if chains.len() >= cap {
                return false;
            }
            chains.push(ChiefSeries::new(stack.clone()));
            return true;
        }
        for cand in normal_maximal_subgroups(last, p) {
            stack.push(cand);
            let ok = dfs(stack, chains, p, cap);
            stack.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    if dfs(&mut stack, &mut chains, p, cap) { Some(chains) } else { None }
}

/// Outcome of the search for compatible series data.
#[derive(Debug, Clone)]
pub enum SearchOutcome {
    /// Compatible data, with the level maps that witness it and the number
    /// of vertex-chain assignments evaluated.
    Found { assignment: SeriesAssignment, level_maps: LevelMaps, tried: u64 },
    /// Every assignment of strict vertex chains fails; alignment being
    /// forced by the vertex chains, no filtration of any length works.
    Exhausted { tried: u64 },
    /// The budget ran out with assignments still untried.
    BudgetExceeded { tried: u64 },
}

/// Identifier of one strict step (`term[step] ⊃ term[step+1]`) of one
/// group's chain during search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct StepId {
    /// 0 for vertex groups, 1 for edge-pair groups.
    kind: u8,
    group: usize,
    step: usize,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind { parent: (0..n).collect() }
    }
    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Search for compatible chief-series data, trying every assignment of
/// strict chief chains to the vertex groups (up to `budget` assignments).
///
/// For each assignment the edge chains are forced — the preimage of the
/// terminal vertex chain along each directed edge, which must agree from
/// the two ends — and so is which strict steps must share a level: each
/// edge-chain step shares its level with the vertex-chain steps its
/// generator maps into. Those sharing classes are ordered like the chains
/// they come from and spread over as many levels as possible (fewer
/// coincidences means fewer loop constraints), which is optimal, so trying
/// one placement per content assignment decides existence.
pub fn search_compatible(gog: &GraphOfGroups, budget: u64) -> SearchOutcome {
    /// Chains listed per vertex group before giving up. `budget` bounds
    /// assignments (products of chains), not single-group listings.
    const CHAIN_CAP: usize = 100_000;
    let graph = gog.graph();
    let p = gog.prime();
    let mut vertex_chains: Vec<Vec<ChiefSeries>> = Vec::new();
    let mut tried = 0u64;
    for v in 0..graph.vertex_count() {
        match enumerate_chief_chains(gog.vertex_group(v), p, CHAIN_CAP) {
            Some(chains) => vertex_chains.push(chains),
            None => return SearchOutcome::BudgetExceeded { tried },
        }
    }
    let mut choice = vec![0usize; graph.vertex_count()];
    loop {
        if tried >= budget {
            return SearchOutcome::BudgetExceeded { tried };
        }
        tried += 1;
        let contents: Vec<&ChiefSeries> =
            choice.iter().zip(&vertex_chains).map(|(&i, c)| &c[i]).collect();
        if let Some((sa, lm)) = try_contents(gog, &contents) {
            return SearchOutcome::Found { assignment: sa, level_maps: lm, tried };
        }
        // Next assignment in mixed-radix order.
        let mut pos = choice.len();
        loop {
            if pos == 0 {
                return SearchOutcome::Exhausted { tried };
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < vertex_chains[pos].len() {
                break;
            }
            choice[pos] = 0;
        }
    }
}

/// Evaluate one assignment of strict vertex chains: force the edge chains,
/// bind the steps that must share levels, spread the sharing classes over
/// levels, and check the result. `None` when this content cannot be made
/// compatible by any placement.
fn try_contents(
    gog: &GraphOfGroups,
    contents: &[&ChiefSeries],
) -> Option<(SeriesAssignment, LevelMaps)> {
    let graph = gog.graph();

    // Forced edge chains, as element lists; must agree from both ends.
    let preimage_chain = |y: usize| -> Vec<Vec<usize>> {
        let vs = contents[graph.terminus(y)];
        let mut chain: Vec<Vec<usize>> = Vec::new();
        for term in vs.terms() {
            let pre: Vec<usize> = (0..gog.edge_group(graph.pair_of(y)).order())
                .filter(|&c| term.contains(gog.mono(y).apply(c)))
                .collect();
            if chain.last() != Some(&pre) {
                chain.push(pre);
            }
        }
        chain
    };
    let mut edge_chains: Vec<Vec<Vec<usize>>> = Vec::with_capacity(graph.pair_count());
    for q in 0..graph.pair_count() {
        let plus = graph.plus_of(q);
        let fwd = preimage_chain(plus);
        let rev = preimage_chain(graph.bar(plus));
        if fwd != rev {
            return None;
        }
        edge_chains.push(fwd);
    }

    // Number the strict steps of every chain.
    let mut step_ids: Vec<StepId> = Vec::new();
    for (v, chain) in contents.iter().enumerate() {
        for step in 0..chain.terms().len() - 1 {
            step_ids.push(StepId { kind: 0, group: v, step });
        }
    }
    for (q, chain) in edge_chains.iter().enumerate() {
        for step in 0..chain.len() - 1 {
            step_ids.push(StepId { kind: 1, group: q, step });
        }
    }
    let index_of = |id: StepId| step_ids.binary_search(&id).expect("known step");

    // Bind each edge step to the vertex step its generator drops at.
    let mut uf = UnionFind::new(step_ids.len());
    for y in 0..graph.directed_count() {
        let q = graph.pair_of(y);
        let chain = &edge_chains[q];
        let vs = contents[graph.terminus(y)];
        for step in 0..chain.len() - 1 {
            let slot: Vec<usize> = chain[step]
                .iter()
                .copied()
                .filter(|c| !chain[step + 1].contains(c))
                .collect();
            let generator = *slot.first().expect("strict step has a generator");
            let img = gog.mono(y).apply(generator);
            let vstep = (0..vs.terms().len() - 1)
                .find(|&j| vs.terms()[j].contains(img) && !vs.terms()[j + 1].contains(img))
                .expect("the image drops at some vertex step");
            uf.union(
                index_of(StepId { kind: 1, group: q, step }),
                index_of(StepId { kind: 0, group: graph.terminus(y), step: vstep }),
            );
        }
    }

    // No two steps of one group may share a level.
    let roots: Vec<usize> = (0..step_ids.len()).map(|i| uf.find(i)).collect();
    for i in 0..step_ids.len() {
        for j in i + 1..step_ids.len() {
            if step_ids[i].kind == step_ids[j].kind
                && step_ids[i].group == step_ids[j].group
                && roots[i] == roots[j]
            {
                return None;
            }
        }
    }

    // Order the classes like the chains they contain (earlier step, earlier
    // level) and place each class on its own level, earliest-id first.
    let class_ids: Vec<usize> = {
        let mut r: Vec<usize> = roots.clone();
        r.sort_unstable();
        r.dedup();
        r
    };
    let class_pos = |root: usize| class_ids.binary_search(&root).expect("known class");
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); class_ids.len()];
    let mut preds: Vec<usize> = vec![0; class_ids.len()];
    for i in 0..step_ids.len() {
        let next = StepId { kind: step_ids[i].kind, group: step_ids[i].group, step: step_ids[i].step + 1 };
        if let Ok(j) = step_ids.binary_search(&next) {
            succs[class_pos(roots[i])].push(class_pos(roots[j]));
        }
    }
    for s in &succs {
        for &t in s {
            preds[t] += 1;
        }
    }
    let mut level_of_class = vec![usize::MAX; class_ids.len()];
    let mut placed = 0usize;
    while placed < class_ids.len() {
        let ready = (0..class_ids.len())
            .find(|&c| level_of_class[c] == usize::MAX && preds[c] == 0)?;
        level_of_class[ready] = placed;
        placed += 1;
        // Mark as consumed so it is never picked again.
        preds[ready] = usize::MAX;
        for &t in &succs[ready] {
            preds[t] -= 1;
        }
    }
    let n_levels = class_ids.len();

    // Materialize the padded filtrations.
    let level_of_step = |id: StepId| level_of_class[class_pos(roots[index_of(id)])];
    let spread_terms = |kind: u8, group: usize, terms: &[Vec<usize>]| -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(n_levels + 1);
        let mut idx = 0usize;
        for level in 0..=n_levels {
            while idx + 1 < terms.len()
                && level_of_step(StepId { kind, group, step: idx }) < level
            {
                idx += 1;
            }
            out.push(terms[idx].clone());
        }
        out
    };
    let vertex_series: Vec<ChiefSeries> = (0..graph.vertex_count())
        .map(|v| {
            let terms: Vec<Vec<usize>> =
                contents[v].terms().iter().map(|t| t.elements().to_vec()).collect();
            let spread = spread_terms(0, v, &terms);
            ChiefSeries::new(
                spread
                    .into_iter()
                    .map(|els| {
                        Subgroup::from_elements(gog.vertex_group(v), &els)
                            .expect("chain terms are subgroups")
                    })
                    .collect(),
            )
        })
        .collect();
    let edge_series: Vec<ChiefSeries> = (0..graph.pair_count())
        .map(|q| {
            let spread = spread_terms(1, q, &edge_chains[q]);
            ChiefSeries::new(
                spread
                    .into_iter()
                    .map(|els| {
                        Subgroup::from_elements(gog.edge_group(q), &els)
                            .expect("preimage terms are subgroups")
                    })
                    .collect(),
            )
        })
        .collect();
    let sa = SeriesAssignment::new(gog, vertex_series, edge_series).ok()?;
    debug_assert!(check_series_alignment(gog, &sa).is_ok());
    let lm = solve_level_maps(gog, &sa).ok()?;
    Some((sa, lm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::gog::{Graph, PairSpec};
    use crate::pgroups::{FiniteGroup, GroupHom};
    use std::sync::Arc;

    /// The standard compatible data for the C4-over-C2 amalgam.
    fn amalgam_data() -> (GraphOfGroups, SeriesAssignment) {
        let gog = fixtures::amalgam_c4_c2_c4();
        let sa = amalgam_series(&gog, true);
        (gog, sa)
    }

    /// Vertex series C4 > <squares> > 1 on both sides; edge series either
    /// the aligned [C2, C2, 1] or the misaligned [C2, 1, 1].
    fn amalgam_series(gog: &GraphOfGroups, aligned: bool) -> SeriesAssignment {
        let mk_vertex = |v: usize| {
            let g = gog.vertex_group(v);
            ChiefSeries::new(vec![
                Subgroup::whole(g),
                Subgroup::closure(g, &[2]),
                Subgroup::trivial(g),
            ])
        };
        let e = gog.edge_group(0);
        let edge = if aligned {
            ChiefSeries::new(vec![Subgroup::whole(e), Subgroup::whole(e), Subgroup::trivial(e)])
        } else {
            ChiefSeries::new(vec![Subgroup::whole(e), Subgroup::trivial(e), Subgroup::trivial(e)])
        };
        SeriesAssignment::new(gog, vec![mk_vertex(0), mk_vertex(1)], vec![edge]).unwrap()
    }

    #[test]
    fn amalgam_aligned_series_pass() {
        let (gog, sa) = amalgam_data();
        assert_eq!(sa.length(), 2);
        check_series_alignment(&gog, &sa).unwrap();
    }

    #[test]
    fn amalgam_misaligned_edge_series_is_pinpointed() {
        let gog = fixtures::amalgam_c4_c2_c4();
        let sa = amalgam_series(&gog, false);
        let err = check_series_alignment(&gog, &sa).unwrap_err();
        match err {
            CompatError::Misaligned { level, image_of_term, meet, .. } => {
                assert_eq!(level, 1);
                assert_eq!(image_of_term, vec![0]);
                assert_eq!(meet, vec![0, 2]);
            }
            other => panic!("expected a misalignment, got {other}"),
        }
    }

    #[test]
    fn amalgam_induced_scalars() {
        let (gog, sa) = amalgam_data();
        // The edge factor is trivial at level 0 and proper at level 1, with
        // multiplier 1 in both directions.
        assert_eq!(induced_scalar(&gog, &sa, 0, 0), None);
        assert_eq!(induced_scalar(&gog, &sa, 0, 1), Some(FpScalar::one(2)));
        assert_eq!(induced_scalar(&gog, &sa, 1, 1), Some(FpScalar::one(2)));
    }

    #[test]
    fn amalgam_level_maps_solve() {
        let (gog, sa) = amalgam_data();
        let lm = solve_level_maps(&gog, &sa).unwrap();
        assert_eq!(lm.levels.len(), 2);
        let one = FpScalar::one(2);
        assert_eq!(lm.levels[0].vertex, vec![Some(one), Some(one)]);
        assert_eq!(lm.levels[0].pair, vec![None]);
        assert_eq!(lm.levels[1].vertex, vec![Some(one), Some(one)]);
        assert_eq!(lm.levels[1].pair, vec![Some(one)]);
        check_level_maps(&gog, &sa, &lm).unwrap();
        check_compatibility(&gog, &sa, Some(&lm)).unwrap();
    }

    #[test]
    fn tampered_level_maps_are_rejected() {
        let (gog, sa) = amalgam_data();
        let mut lm = solve_level_maps(&gog, &sa).unwrap();
        lm.levels[1].pair[0] = Some(FpScalar::zero(2));
        assert!(matches!(
            check_level_maps(&gog, &sa, &lm),
            Err(CompatError::BadLevelMap { level: 1, .. })
        ));
        let mut lm2 = solve_level_maps(&gog, &sa).unwrap();
        lm2.levels[0].vertex[0] = None;
        assert!(check_level_maps(&gog, &sa, &lm2).is_err());
    }

    #[test]
    fn squaring_loop_has_holonomy_two() {
        let gog = fixtures::hnn_c3_squaring();
        let g = gog.vertex_group(0);
        let e = gog.edge_group(0);
        let series = |grp: &Grp| {
            ChiefSeries::new(vec![Subgroup::whole(grp), Subgroup::trivial(grp)])
        };
        let sa = SeriesAssignment::new(&gog, vec![series(g)], vec![series(e)]).unwrap();
        check_series_alignment(&gog, &sa).unwrap();
        assert_eq!(induced_scalar(&gog, &sa, 0, 0), Some(FpScalar::one(3)));
        assert_eq!(induced_scalar(&gog, &sa, 1, 0), Some(FpScalar::new(2, 3)));
        let err = solve_level_maps(&gog, &sa).unwrap_err();
        match err {
            CompatError::Holonomy { level, value, .. } => {
                assert_eq!(level, 0);
                assert_eq!(value, FpScalar::new(2, 3));
            }
            other => panic!("expected holonomy failure, got {other}"),
        }
    }

    #[test]
    fn chain_enumeration_on_small_groups() {
        let c4: Grp = Arc::new(FiniteGroup::cyclic(4));
        let chains = enumerate_chief_chains(&c4, 2, 100).unwrap();
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].terms()[1].elements(), &[0, 2]);

        let klein: Grp = Arc::new(FiniteGroup::klein_four());
        let chains = enumerate_chief_chains(&klein, 2, 100).unwrap();
        assert_eq!(chains.len(), 3);
        assert_eq!(chains[0].terms()[1].elements(), &[0, 1]);
        assert_eq!(chains[1].terms()[1].elements(), &[0, 2]);
        assert_eq!(chains[2].terms()[1].elements(), &[0, 3]);

        let q8: Grp = Arc::new(FiniteGroup::dicyclic(2));
        let chains = enumerate_chief_chains(&q8, 2, 100).unwrap();
        // Q8 has three maximal subgroups, each with the unique C2 below.
        assert_eq!(chains.len(), 3);
        for c in &chains {
            assert_eq!(c.verify(2), Ok(3));
        }

        let c9: Grp = Arc::new(FiniteGroup::cyclic(9));
        assert_eq!(enumerate_chief_chains(&c9, 3, 100).unwrap().len(), 1);
        assert!(enumerate_chief_chains(&klein, 2, 2).is_none());
    }

    #[test]
    fn search_finds_amalgam_data() {
        let gog = fixtures::amalgam_c4_c2_c4();
        match search_compatible(&gog, 1_000_000) {
            SearchOutcome::Found { assignment, level_maps, tried } => {
                assert_eq!(tried, 1);
                check_series_alignment(&gog, &assignment).unwrap();
                check_level_maps(&gog, &assignment, &level_maps).unwrap();
            }
            other => panic!("expected success, got {other:?}"),
        }
    }

    #[test]
    fn search_finds_single_vertex_data() {
        let gog = fixtures::single_vertex_cp(3);
        match search_compatible(&gog, 1_000_000) {
            SearchOutcome::Found { assignment, .. } => {
                assert_eq!(assignment.length(), 1);
            }
            other => panic!("expected success, got {other:?}"),
        }
    }

    #[test]
    fn search_exhausts_the_squaring_loop() {
        let gog = fixtures::hnn_c3_squaring();
        match search_compatible(&gog, 1_000_000) {
            SearchOutcome::Exhausted { tried } => assert_eq!(tried, 1),
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn search_respects_the_budget() {
        // A loop on a Klein four group, conjugating x to y. The chains
        // through <x> and through <y> put the two bound steps at different
        // depths (a level-sharing conflict), so only the third chain,
        // through <xy>, is compatible.
        let graph = Graph::unnamed(1, &[(0, 0)]).unwrap();
        let klein: Grp = Arc::new(FiniteGroup::klein_four());
        let e: Grp = Arc::new(FiniteGroup::cyclic(2));
        let fwd = GroupHom::new(&e, &klein, vec![0, 1]).unwrap();
        let rev = GroupHom::new(&e, &klein, vec![0, 2]).unwrap();
        let gog = GraphOfGroups::new(graph, 2, vec![klein], vec![e], vec![fwd, rev]).unwrap();
        match search_compatible(&gog, 2) {
            SearchOutcome::BudgetExceeded { tried } => assert_eq!(tried, 2),
            other => panic!("expected budget exhaustion, got {other:?}"),
        }
        match search_compatible(&gog, 100) {
            SearchOutcome::Found { assignment, tried, .. } => {
                assert_eq!(tried, 3);
                assert_eq!(assignment.vertex_series(0).term(1).elements(), &[0, 3]);
            }
            other => panic!("expected success, got {other:?}"),
        }
    }

    #[test]
    fn search_places_stutters_where_needed() {
        // A segment u — v — w: u is C2 glued along x in the Klein four
        // group at v; w is C2 glued along y. No tail-anchored placement
        // aligns both edges for any chain at v — the x and y steps sit at
        // different depths — so success requires a middle stutter, which
        // the class-spreading placement finds.
        let graph = Graph::new(
            vec!["u".into(), "v".into(), "w".into()],
            &[
                PairSpec { name: "e1".into(), bar_name: "e1'".into(), from: 0, to: 1 },
                PairSpec { name: "e2".into(), bar_name: "e2'".into(), from: 1, to: 2 },
            ],
        )
        .unwrap();
        let gu: Grp = Arc::new(FiniteGroup::cyclic(2));
        let gv: Grp = Arc::new(FiniteGroup::klein_four());
        let gw: Grp = Arc::new(FiniteGroup::cyclic(2));
        let e1: Grp = Arc::new(FiniteGroup::cyclic(2));
        let e2: Grp = Arc::new(FiniteGroup::cyclic(2));
        // Klein four as C2×C2: 1 = x, 2 = y.
        let e1_into_v = GroupHom::new(&e1, &gv, vec![0, 1]).unwrap();
        let e1_into_u = GroupHom::new(&e1, &gu, vec![0, 1]).unwrap();
        let e2_into_w = GroupHom::new(&e2, &gw, vec![0, 1]).unwrap();
        let e2_into_v = GroupHom::new(&e2, &gv, vec![0, 2]).unwrap();
        let gog = GraphOfGroups::new(
            graph,
            2,
            vec![gu, gv, gw],
            vec![e1, e2],
            vec![e1_into_v, e1_into_u, e2_into_w, e2_into_v],
        )
        .unwrap();
        match search_compatible(&gog, 1_000_000) {
            SearchOutcome::Found { assignment, level_maps, tried } => {
                check_series_alignment(&gog, &assignment).unwrap();
                check_level_maps(&gog, &assignment, &level_maps).unwrap();
                assert_eq!(assignment.length(), 2);
                // One of u, w stutters at the top and the other at the
                // bottom, matching the levels of x and y in v's chain.
                let u_top = assignment.vertex_series(0).term(1).order();
                let w_top = assignment.vertex_series(2).term(1).order();
                assert_ne!(u_top, w_top);
                assert_eq!(tried, 1, "the x-first chain at v already works");
            }
            other => panic!("expected success, got {other:?}"),
        }
    }

    #[test]
    fn segment_with_trivial_edge_searches_clean() {
        let gog = fixtures::segment_c2_c2();
        match search_compatible(&gog, 100) {
            SearchOutcome::Found { assignment, level_maps, .. } => {
                // Independent steps spread over distinct levels.
                assert_eq!(assignment.length(), 2);
                check_compatibility(&gog, &assignment, Some(&level_maps)).unwrap();
            }
            other => panic!("expected success, got {other:?}"),
        }
    }

    #[test]
    fn rose_has_empty_compatible_data() {
        let gog = fixtures::rose(2, 2);
        match search_compatible(&gog, 100) {
            SearchOutcome::Found { assignment, level_maps, .. } => {
                assert_eq!(assignment.length(), 0);
                assert!(level_maps.levels.is_empty());
            }
            other => panic!("expected success, got {other:?}"),
        }
    }
}
