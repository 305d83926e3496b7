//! Constructive separation of fundamental-group elements into finite
//! p-quotients.
//!
//! Given compatible chief series and level scalars for a graph of finite
//! p-groups, [`separate`] drives an inductive descent on a nontrivial word:
//! each round evaluates the word under the level homomorphism into F_p; a
//! nonzero value separates it outright, while a zero value rewrites the word
//! inside the fundamental group of the index-p kernel cover and recurses.
//! Words that survive until every vertex group is trivial are free-group
//! elements and are finished off in the ring of truncated power series.
//!
//! The transcript of the descent is a [`SeparationCertificate`]:
//! [`verify_certificate`] replays it from the original data without trusting
//! the prover, and [`build_explicit_quotient`] turns a verified certificate
//! into an actual finite p-group in which the word's image is not the
//! identity.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compat::{CompatError, LevelMaps, SeriesAssignment, check_compatibility};
use crate::cover::{
    CoverError, KernelCover, LevelHom, build_kernel_cover, embed_word, rewrite_into_kernel,
    verify_cover,
};
use crate::fp::{FpScalar, is_p_power};
use crate::gog::{GWord, GogError, GraphOfGroups, Letter, SpanningData};
use crate::magnus::{
    FreeVerdict, FreeWord, MagnusError, MagnusWitness, MonomialRep, check_witness, separate_free,
};
use crate::pgroups::FiniteGroup;

/// Default truncation-degree cap for the free-group terminal case.
pub const DEFAULT_DEGREE_CAP: usize = 64;

/// Default bound on the number of cosets enumerated for an explicit quotient.
pub const DEFAULT_MAX_COSETS: usize = 4096;

/// Default element budget when closing the quotient's permutation group.
pub const DEFAULT_GROUP_BUDGET: usize = 2048;

#[derive(Debug, Error)]
pub enum SeparateError {
    #[error("the word reduces to the identity, which no quotient separates")]
    TrivialWord,
    #[error("incompatible series data: {0}")]
    Compat(#[from] CompatError),
    #[error("kernel cover failure: {0}")]
    Cover(#[from] CoverError),
    #[error("power-series failure: {0}")]
    Magnus(#[from] MagnusError),
    #[error("bad word or graph data: {0}")]
    Word(#[from] GogError),
    #[error("descent failed to terminate within {bound} rounds")]
    DescentOverrun { bound: usize },
    #[error("invalid certificate: {0}")]
    BadCertificate(String),
    #[error("quotient construction failed: {0}")]
    Quotient(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

fn internal_err(msg: impl Into<String>) -> SeparateError {
    SeparateError::Internal(msg.into())
}

/// One round of descent.
///
/// `skipped_levels` top levels of the incoming series assignment carried only
/// trivial factors over a tree and were dropped before the level homomorphism
/// `phi` could be built; `word` is the reduced word the round examined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentStep {
    pub skipped_levels: usize,
    pub phi: LevelHom,
    pub word: GWord,
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepOutcome {
    /// The level homomorphism already sends the word to a nonzero scalar.
    Separated { value: FpScalar },
    /// The word lies in the kernel; `rewritten` is the same element expressed
    /// in the fundamental group of the kernel cover.
    Descended { cover: KernelCover, rewritten: GWord },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TerminalWitness {
    /// The final step's level homomorphism separated the word.
    Level,
    /// Descent reached a graph whose vertex groups are all trivial: `word` is
    /// the image of the descended word in the free group on the non-tree
    /// pairs, and `witness` a monomial on which its power-series image does
    /// not vanish.
    Free { rank: usize, word: FreeWord, witness: MagnusWitness },
}

/// A machine-checkable transcript of one successful separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationCertificate {
    pub prime: u32,
    /// The word as the caller gave it.
    pub word: GWord,
    pub steps: Vec<DescentStep>,
    pub terminal: TerminalWitness,
}

/// The image of `w` in the free group on the non-tree pairs.
///
/// Faithful exactly when every vertex group is trivial, which is the terminal
/// situation of the descent. Returns the rank and the letter string, where
/// letter `±(i+1)` stands for the i-th non-tree pair in ascending pair order.
pub fn to_free_word(gog: &GraphOfGroups, sd: &SpanningData, w: &GWord) -> (usize, FreeWord) {
    let graph = gog.graph();
    let non_tree: Vec<usize> = (0..graph.pair_count()).filter(|&q| !sd.is_tree_pair(q)).collect();
    let path = gog.reduce_path(gog.word_to_path(sd, w));
    let mut fw = Vec::new();
    for &e in &path.edges {
        if let Ok(idx) = non_tree.binary_search(&graph.pair_of(e)) {
            let letter = (idx + 1) as i32;
            fw.push(if graph.is_plus(e) { letter } else { -letter });
        }
    }
    (non_tree.len(), fw)
}

/// Separate a nontrivial word by inductive descent, producing a certificate.
///
/// `sa` and `lm` must pass [`check_compatibility`] for `gog`; the descent
/// re-derives compatible data for every cover it builds. `degree_cap` bounds
/// the truncation degree tried in the free terminal case.
pub fn separate(
    gog: &GraphOfGroups,
    sa: &SeriesAssignment,
    lm: &LevelMaps,
    word: &GWord,
    degree_cap: usize,
) -> Result<SeparationCertificate, SeparateError> {
    check_compatibility(gog, sa, Some(lm))?;
    gog.validate_word(word)?;
    let mut gog_cur = gog.clone();
    let mut sa_cur = sa.clone();
    let mut lm_cur = lm.clone();
    let mut sd = SpanningData::new(gog_cur.graph())?;
    let mut w = gog_cur.reduce_word(&sd, word);
    if w.letters.is_empty() {
        return Err(SeparateError::TrivialWord);
    }
    let prime = gog.prime();
    // Every round either returns or drops at least one series level, and a
    // graph whose groups are all trivial returns immediately.
    let bound = sa.length() + 1;
    let mut steps = Vec::new();
    for _ in 0..bound {
        if gog_cur.all_vertex_groups_trivial() {
            let (rank, fw) = to_free_word(&gog_cur, &sd, &w);
            let witness = match separate_free(prime, rank, &fw, degree_cap)? {
                FreeVerdict::Witness(witness) => witness,
                FreeVerdict::Trivial => {
                    return Err(internal_err("a reduced nontrivial word has trivial free image"));
                }
            };
            return Ok(SeparationCertificate {
                prime,
                word: word.clone(),
                steps,
                terminal: TerminalWitness::Free { rank, word: fw, witness },
            });
        }
        let mut skipped = 0usize;
        let phi = loop {
            if let Some(phi) = LevelHom::build(&gog_cur, &sd, &sa_cur, &lm_cur) {
                break phi;
            }
            sa_cur = match sa_cur.drop_top_level() {
                Some(next) => next,
                None => {
                    return Err(internal_err(
                        "no level homomorphism and no trivial top level to drop",
                    ));
                }
            };
            lm_cur = match lm_cur.drop_top_level() {
                Some(next) => next,
                None => return Err(internal_err("level scalars exhausted before the series")),
            };
            skipped += 1;
        };
        let value = phi.eval(&w);
        if !value.is_zero() {
            steps.push(DescentStep {
                skipped_levels: skipped,
                phi,
                word: w,
                outcome: StepOutcome::Separated { value },
            });
            return Ok(SeparationCertificate {
                prime,
                word: word.clone(),
                steps,
                terminal: TerminalWitness::Level,
            });
        }
        let cover = build_kernel_cover(&gog_cur, &sa_cur, &phi)?;
        let lifted = rewrite_into_kernel(&gog_cur, &phi, &cover, &w)?;
        let sd_next = SpanningData::new(cover.gog.graph())
            .map_err(|e| internal_err(format!("cover graph lost connectivity: {e}")))?;
        let w_next = cover.gog.reduce_word(&sd_next, &lifted);
        if w_next.letters.is_empty() {
            return Err(internal_err("a nontrivial word descended to the identity"));
        }
        steps.push(DescentStep {
            skipped_levels: skipped,
            phi,
            word: w,
            outcome: StepOutcome::Descended { cover: cover.clone(), rewritten: w_next.clone() },
        });
        gog_cur = cover.gog;
        sa_cur = cover.series;
        lm_cur = cover.level_maps;
        sd = sd_next;
        w = w_next;
    }
    Err(SeparateError::DescentOverrun { bound })
}

/// Per-round context retained while replaying a certificate.
struct StepCtx {
    gog: GraphOfGroups,
    sd: SpanningData,
    phi: LevelHom,
    /// `None` exactly for the final, separating round.
    cover: Option<KernelCover>,
}

enum WalkTerminal {
    Level,
    Free { gog: GraphOfGroups, sd: SpanningData, rank: usize, rep: MonomialRep },
}

struct Walk {
    contexts: Vec<StepCtx>,
    terminal: WalkTerminal,
}

/// Replay a certificate against the original data, checking every claim.
fn walk_certificate(
    gog: &GraphOfGroups,
    sa: &SeriesAssignment,
    lm: &LevelMaps,
    cert: &SeparationCertificate,
) -> Result<Walk, SeparateError> {
    let bad = |msg: String| SeparateError::BadCertificate(msg);
    if cert.prime != gog.prime() {
        return Err(bad(format!(
            "certificate prime {} does not match the input prime {}",
            cert.prime,
            gog.prime()
        )));
    }
    check_compatibility(gog, sa, Some(lm))?;
    gog.validate_word(&cert.word)
        .map_err(|e| bad(format!("the certified word is malformed: {e}")))?;
    let mut gog_cur = gog.clone();
    let mut sa_cur = sa.clone();
    let mut lm_cur = lm.clone();
    let mut sd = SpanningData::new(gog_cur.graph())?;
    let mut w = gog_cur.reduce_word(&sd, &cert.word);
    if w.letters.is_empty() {
        return Err(bad("the certified word reduces to the identity".into()));
    }
    let mut contexts = Vec::new();
    for (i, step) in cert.steps.iter().enumerate() {
        for _ in 0..step.skipped_levels {
            sa_cur = sa_cur
                .drop_top_level()
                .ok_or_else(|| bad(format!("step {i} skips a level that is not trivial")))?;
            lm_cur = lm_cur
                .drop_top_level()
                .ok_or_else(|| bad(format!("step {i} skips more levels than exist")))?;
        }
        let phi = LevelHom::build(&gog_cur, &sd, &sa_cur, &lm_cur)
            .ok_or_else(|| bad(format!("no level homomorphism exists at step {i}")))?;
        if phi != step.phi {
            return Err(bad(format!(
                "step {i} records a level homomorphism that differs from the rebuilt one"
            )));
        }
        if !gog_cur.words_equal(&sd, &step.word, &w) {
            return Err(bad(format!("step {i}'s word is not the descended word")));
        }
        match &step.outcome {
            StepOutcome::Separated { value } => {
                if value.is_zero() || phi.eval(&step.word) != *value {
                    return Err(bad(format!(
                        "step {i} claims level value {value} but the level homomorphism disagrees"
                    )));
                }
                if i + 1 != cert.steps.len()
                    || !matches!(cert.terminal, TerminalWitness::Level)
                {
                    return Err(bad("a separating step must be the final one".into()));
                }
                contexts.push(StepCtx { gog: gog_cur, sd, phi, cover: None });
                return Ok(Walk { contexts, terminal: WalkTerminal::Level });
            }
            StepOutcome::Descended { cover, rewritten } => {
                if !phi.eval(&step.word).is_zero() {
                    return Err(bad(format!(
                        "step {i} descends on a word with nonzero level value"
                    )));
                }
                verify_cover(&gog_cur, &sa_cur, &phi, cover)?;
                let back = embed_word(&gog_cur, cover, rewritten);
                if !gog_cur.words_equal(&sd, &back, &step.word) {
                    return Err(bad(format!(
                        "step {i}'s rewritten word does not embed back to its word"
                    )));
                }
                let sd_next = SpanningData::new(cover.gog.graph())
                    .map_err(|e| internal_err(format!("cover graph lost connectivity: {e}")))?;
                let w_next = cover.gog.reduce_word(&sd_next, rewritten);
                if w_next.letters.is_empty() {
                    return Err(bad(format!("step {i} descends to the identity")));
                }
                contexts.push(StepCtx {
                    gog: gog_cur.clone(),
                    sd,
                    phi,
                    cover: Some(cover.clone()),
                });
                gog_cur = cover.gog.clone();
                sa_cur = cover.series.clone();
                lm_cur = cover.level_maps.clone();
                sd = sd_next;
                w = w_next;
            }
        }
    }
    match &cert.terminal {
        TerminalWitness::Level => {
            Err(bad("the terminal claims a level separation but no step separates".into()))
        }
        TerminalWitness::Free { rank, word, witness } => {
            if !gog_cur.all_vertex_groups_trivial() {
                return Err(bad(
                    "free terminal reached while some vertex group is nontrivial".into(),
                ));
            }
            let (r, fw) = to_free_word(&gog_cur, &sd, &w);
            if r != *rank || fw != *word {
                return Err(bad(
                    "the stored free word is not the image of the descended word".into(),
                ));
            }
            if !check_witness(cert.prime, *rank, word, witness)? {
                return Err(bad("the power-series witness fails its matrix check".into()));
            }
            let rep = MonomialRep::new(cert.prime, *rank, &witness.monomial);
            Ok(Walk {
                contexts,
                terminal: WalkTerminal::Free { gog: gog_cur, sd, rank: *rank, rep },
            })
        }
    }
}

/// Check a certificate against the data it claims to separate over.
///
/// Every step is replayed: the level homomorphisms are rebuilt and compared,
/// covers are re-verified, rewritten words are embedded back and compared,
/// and the terminal witness is re-checked through the matrix representation —
/// nothing is taken on the certificate's word.
pub fn verify_certificate(
    gog: &GraphOfGroups,
    sa: &SeriesAssignment,
    lm: &LevelMaps,
    cert: &SeparationCertificate,
) -> Result<(), SeparateError> {
    walk_certificate(gog, sa, lm, cert).map(|_| ())
}

/// The finite quotient the certificate carves out, realized concretely.
///
/// The group is the image of the fundamental group acting on the right
/// cosets of the subgroup of elements whose replay stays at level value zero
/// all the way down; the certified word always acts nontrivially.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplicitQuotient {
    /// Number of cosets the action permutes.
    pub cosets: usize,
    /// The permutation group the generators close over.
    pub group: FiniteGroup,
    /// Names of the acting generators: `vertex:element` entries followed by
    /// the non-tree edge letters.
    pub generator_names: Vec<String>,
    /// Element index of each named generator inside `group`.
    pub generator_images: Vec<usize>,
    /// Element index of the certified word inside `group`; never the
    /// identity.
    pub word_image: usize,
}

/// The label of `g`'s coset, one descent round per entry.
///
/// Each round contributes the word's level value; before handing the word to
/// the next round it is shifted into the kernel by a power of the round's
/// unit word and rewritten into the cover. A free terminal appends the
/// word's matrix image, entry by entry. Two words get the same label exactly
/// when they lie in the same right coset.
fn coset_id(walk: &Walk, g: &GWord) -> Result<Vec<u32>, SeparateError> {
    let mut w = g.clone();
    let mut id: Vec<u32> = Vec::new();
    for ctx in &walk.contexts {
        let v = ctx.phi.eval(&w);
        id.push(v.value());
        let cover = match &ctx.cover {
            Some(cover) => cover,
            // Final separating round: the level value completes the label.
            None => return Ok(id),
        };
        if !v.is_zero() {
            let t_inv = ctx.gog.word_inverse(&ctx.phi.unit_word(&ctx.gog));
            for _ in 0..v.value() {
                w = ctx.gog.word_concat(&w, &t_inv);
            }
            w = ctx.gog.reduce_word(&ctx.sd, &w);
        }
        w = rewrite_into_kernel(&ctx.gog, &ctx.phi, cover, &w)?;
    }
    match &walk.terminal {
        WalkTerminal::Level => {
            Err(internal_err("descent chain ended without its separating round"))
        }
        WalkTerminal::Free { gog, sd, rank, rep } => {
            let (r, fw) = to_free_word(gog, sd, &w);
            if r != *rank {
                return Err(internal_err("free rank changed during replay"));
            }
            let mat = rep.apply(&fw)?;
            id.extend(mat.iter().map(|s| s.value()));
            Ok(id)
        }
    }
}

/// Turn a certificate into an explicit finite p-quotient.
///
/// The certificate is fully re-verified first. Cosets are enumerated breadth
/// first under right multiplication by the vertex-group elements and the
/// non-tree edge letters; `max_cosets` bounds the enumeration and
/// `group_budget` the closure of the resulting permutation group.
pub fn build_explicit_quotient(
    gog: &GraphOfGroups,
    sa: &SeriesAssignment,
    lm: &LevelMaps,
    cert: &SeparationCertificate,
    max_cosets: usize,
    group_budget: usize,
) -> Result<ExplicitQuotient, SeparateError> {
    let walk = walk_certificate(gog, sa, lm, cert)?;
    let graph = gog.graph();
    let sd = SpanningData::new(graph)?;

    let mut gens: Vec<(String, GWord)> = Vec::new();
    for x in 0..graph.vertex_count() {
        let g = gog.vertex_group(x);
        for e in 1..g.order() {
            gens.push((
                format!("{}:{}", graph.vertex_name(x), g.label(e)),
                GWord { basepoint: 0, letters: vec![Letter::Vertex { vertex: x, element: e }] },
            ));
        }
    }
    for q in 0..graph.pair_count() {
        if !sd.is_tree_pair(q) {
            gens.push((
                graph.edge_name(graph.plus_of(q)).to_string(),
                GWord { basepoint: 0, letters: vec![Letter::Stable { edge: graph.plus_of(q) }] },
            ));
        }
    }

    let mut reps: Vec<GWord> = vec![GWord::empty(0)];
    let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
    index.insert(coset_id(&walk, &reps[0])?, 0);
    let mut table: Vec<Vec<usize>> = Vec::new();
    let mut next = 0usize;
    while next < reps.len() {
        let mut row = Vec::with_capacity(gens.len());
        for (_, h) in &gens {
            let moved = gog.reduce_word(&sd, &gog.word_concat(&reps[next], h));
            let id = coset_id(&walk, &moved)?;
            let j = match index.get(&id) {
                Some(&j) => j,
                None => {
                    let j = reps.len();
                    if j >= max_cosets {
                        return Err(SeparateError::Quotient(format!(
                            "more than {max_cosets} cosets"
                        )));
                    }
                    index.insert(id, j);
                    reps.push(moved);
                    j
                }
            };
            row.push(j);
        }
        table.push(row);
        next += 1;
    }
    let degree = reps.len();

    let perm_of = |w: &GWord| -> Result<Vec<usize>, SeparateError> {
        let mut perm = Vec::with_capacity(degree);
        for rep in &reps {
            let moved = gog.reduce_word(&sd, &gog.word_concat(rep, w));
            match index.get(&coset_id(&walk, &moved)?) {
                Some(&j) => perm.push(j),
                None => return Err(internal_err("the coset action left the enumerated set")),
            }
        }
        Ok(perm)
    };

    // The action satisfies the edge relations by construction; checking them
    // anyway guards the coset labelling against drift.
    for q in 0..graph.pair_count() {
        let y = graph.plus_of(q);
        for e in 0..gog.edge_group(q).order() {
            let lhs = GWord {
                basepoint: 0,
                letters: vec![
                    Letter::Stable { edge: y },
                    Letter::Vertex { vertex: graph.terminus(y), element: gog.mono(y).apply(e) },
                    Letter::Stable { edge: graph.bar(y) },
                ],
            };
            let rhs = GWord {
                basepoint: 0,
                letters: vec![Letter::Vertex {
                    vertex: graph.origin(y),
                    element: gog.mono(graph.bar(y)).apply(e),
                }],
            };
            if perm_of(&lhs)? != perm_of(&rhs)? {
                return Err(internal_err(format!(
                    "edge relation fails in the coset action at pair {q}"
                )));
            }
        }
    }

    let word = gog.reduce_word(&sd, &cert.word);
    let word_perm = perm_of(&word)?;
    let mut named: Vec<(String, Vec<usize>)> = Vec::with_capacity(gens.len() + 1);
    for (i, (name, _)) in gens.iter().enumerate() {
        named.push((name.clone(), table.iter().map(|row| row[i]).collect()));
    }
    named.push(("w".to_string(), word_perm));
    let (group, mut images) = FiniteGroup::from_permutations(degree, &named, group_budget)
        .map_err(|e| {
            SeparateError::Quotient(format!("closing the permutation group failed: {e}"))
        })?;
    let word_image = images.pop().expect("one image per named permutation");
    named.pop();
    if word_image == group.identity() {
        return Err(internal_err("the separated word acts trivially on its cosets"));
    }
    if !is_p_power(group.order(), gog.prime()) {
        return Err(internal_err(format!(
            "the coset action closed to order {}, not a power of {}",
            group.order(),
            gog.prime()
        )));
    }
    Ok(ExplicitQuotient {
        cosets: degree,
        group,
        generator_names: named.into_iter().map(|(name, _)| name).collect(),
        generator_images: images,
        word_image,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compat::solve_level_maps;
    use crate::fixtures;
    use crate::pgroups::{ChiefSeries, Grp, Subgroup};
    use proptest::prelude::*;

    fn amalgam_setup() -> (GraphOfGroups, SeriesAssignment, LevelMaps) {
        let gog = fixtures::amalgam_c4_c2_c4();
        let mk_vertex = |v: usize| {
            let g = gog.vertex_group(v);
            ChiefSeries::new(vec![
                Subgroup::whole(g),
                Subgroup::closure(g, &[2]),
                Subgroup::trivial(g),
            ])
        };
        let e = gog.edge_group(0);
        let edge =
            ChiefSeries::new(vec![Subgroup::whole(e), Subgroup::whole(e), Subgroup::trivial(e)]);
        let sa = SeriesAssignment::new(&gog, vec![mk_vertex(0), mk_vertex(1)], vec![edge]).unwrap();
        let lm = solve_level_maps(&gog, &sa).unwrap();
        (gog, sa, lm)
    }

    /// Both segment vertices at the same level, so the level map is onto each
    /// vertex group and the kernel cover is a circle of trivial groups.
    fn segment_setup() -> (GraphOfGroups, SeriesAssignment, LevelMaps) {
        let gog = fixtures::segment_c2_c2();
        let series = |g: &Grp| ChiefSeries::new(vec![Subgroup::whole(g), Subgroup::trivial(g)]);
        let sa = SeriesAssignment::new(
            &gog,
            vec![series(gog.vertex_group(0)), series(gog.vertex_group(1))],
            vec![ChiefSeries::new(vec![Subgroup::whole(gog.edge_group(0))])],
        )
        .unwrap();
        let lm = solve_level_maps(&gog, &sa).unwrap();
        (gog, sa, lm)
    }

    fn vw(vertex: usize, element: usize) -> Letter {
        Letter::Vertex { vertex, element }
    }

    fn word(letters: Vec<Letter>) -> GWord {
        GWord { basepoint: 0, letters }
    }

    #[test]
    fn amalgam_product_descends_once_then_separates() {
        let (gog, sa, lm) = amalgam_setup();
        let ab = word(vec![vw(0, 1), vw(1, 1)]);
        let cert = separate(&gog, &sa, &lm, &ab, DEFAULT_DEGREE_CAP).unwrap();
        assert_eq!(cert.steps.len(), 2);
        assert!(matches!(cert.steps[0].outcome, StepOutcome::Descended { .. }));
        assert!(matches!(
            cert.steps[1].outcome,
            StepOutcome::Separated { value } if value == FpScalar::one(2)
        ));
        assert_eq!(cert.terminal, TerminalWitness::Level);
        verify_certificate(&gog, &sa, &lm, &cert).unwrap();
    }

    #[test]
    fn amalgam_square_separates_at_the_bottom_level() {
        let (gog, sa, lm) = amalgam_setup();
        let a2 = word(vec![vw(0, 2)]);
        let cert = separate(&gog, &sa, &lm, &a2, DEFAULT_DEGREE_CAP).unwrap();
        assert_eq!(cert.steps.len(), 2);
        assert!(matches!(cert.steps[1].outcome, StepOutcome::Separated { .. }));
        verify_certificate(&gog, &sa, &lm, &cert).unwrap();
    }

    #[test]
    fn amalgam_quotient_is_cyclic_of_order_four() {
        let (gog, sa, lm) = amalgam_setup();
        let ab = word(vec![vw(0, 1), vw(1, 1)]);
        let cert = separate(&gog, &sa, &lm, &ab, DEFAULT_DEGREE_CAP).unwrap();
        let q = build_explicit_quotient(&gog, &sa, &lm, &cert, DEFAULT_MAX_COSETS, DEFAULT_GROUP_BUDGET)
            .unwrap();
        // The kernel of both level values is normal here, so the action is
        // regular: four cosets, and the quotient is cyclic of order four
        // with ab landing on the unique involution.
        assert_eq!(q.cosets, 4);
        assert_eq!(q.group.order(), 4);
        assert!(q.group.is_p_group(2));
        assert_ne!(q.word_image, q.group.identity());
        assert_eq!(q.group.mul(q.word_image, q.word_image), q.group.identity());
    }

    #[test]
    fn segment_word_reaches_the_free_case() {
        let (gog, sa, lm) = segment_setup();
        let abab = word(vec![vw(0, 1), vw(1, 1), vw(0, 1), vw(1, 1)]);
        let cert = separate(&gog, &sa, &lm, &abab, DEFAULT_DEGREE_CAP).unwrap();
        assert_eq!(cert.steps.len(), 1);
        assert!(matches!(cert.steps[0].outcome, StepOutcome::Descended { .. }));
        match &cert.terminal {
            TerminalWitness::Free { rank, word, witness } => {
                assert_eq!(*rank, 1);
                assert_eq!(word, &vec![1, 1]);
                assert_eq!(witness.monomial, vec![0, 0]);
                assert_eq!(witness.coefficient, FpScalar::one(2));
            }
            other => panic!("expected a free terminal, got {other:?}"),
        }
        verify_certificate(&gog, &sa, &lm, &cert).unwrap();
    }

    #[test]
    fn segment_quotient_is_dihedral_of_order_eight() {
        let (gog, sa, lm) = segment_setup();
        let abab = word(vec![vw(0, 1), vw(1, 1), vw(0, 1), vw(1, 1)]);
        let cert = separate(&gog, &sa, &lm, &abab, DEFAULT_DEGREE_CAP).unwrap();
        let q = build_explicit_quotient(&gog, &sa, &lm, &cert, DEFAULT_MAX_COSETS, DEFAULT_GROUP_BUDGET)
            .unwrap();
        assert_eq!(q.cosets, 8);
        assert_eq!(q.group.order(), 8);
        assert!(q.group.is_p_group(2));
        assert_ne!(q.word_image, q.group.identity());
        // abab is the square of the rotation, hence the central involution.
        assert_eq!(q.group.mul(q.word_image, q.word_image), q.group.identity());
    }

    #[test]
    fn rose_stable_letters_are_caught_by_the_power_series() {
        let gog = fixtures::rose(2, 2);
        let sa = SeriesAssignment::new(
            &gog,
            vec![ChiefSeries::new(vec![Subgroup::whole(gog.vertex_group(0))])],
            (0..2)
                .map(|q| ChiefSeries::new(vec![Subgroup::whole(gog.edge_group(q))]))
                .collect(),
        )
        .unwrap();
        let lm = solve_level_maps(&gog, &sa).unwrap();
        let t1 = word(vec![Letter::Stable { edge: 0 }]);
        let cert = separate(&gog, &sa, &lm, &t1, DEFAULT_DEGREE_CAP).unwrap();
        assert!(cert.steps.is_empty());
        match &cert.terminal {
            TerminalWitness::Free { rank, word, witness } => {
                assert_eq!(*rank, 2);
                assert_eq!(word, &vec![1]);
                assert_eq!(witness.monomial, vec![0]);
            }
            other => panic!("expected a free terminal, got {other:?}"),
        }
        verify_certificate(&gog, &sa, &lm, &cert).unwrap();
    }

    #[test]
    fn nine_element_loopless_group_needs_two_rounds() {
        let gog = fixtures::single_vertex_cp(9);
        let g = gog.vertex_group(0);
        let sa = SeriesAssignment::new(
            &gog,
            vec![ChiefSeries::new(vec![
                Subgroup::whole(g),
                Subgroup::closure(g, &[3]),
                Subgroup::trivial(g),
            ])],
            vec![],
        )
        .unwrap();
        let lm = solve_level_maps(&gog, &sa).unwrap();
        let a3 = word(vec![vw(0, 3)]);
        let cert = separate(&gog, &sa, &lm, &a3, DEFAULT_DEGREE_CAP).unwrap();
        assert_eq!(cert.steps.len(), 2);
        assert!(matches!(cert.steps[0].outcome, StepOutcome::Descended { .. }));
        verify_certificate(&gog, &sa, &lm, &cert).unwrap();
        let q = build_explicit_quotient(&gog, &sa, &lm, &cert, DEFAULT_MAX_COSETS, DEFAULT_GROUP_BUDGET)
            .unwrap();
        assert_eq!(q.cosets, 9);
        assert_eq!(q.group.order(), 9);
        assert!(q.group.is_p_group(3));
        assert_ne!(q.word_image, q.group.identity());
    }

    #[test]
    fn trivial_words_are_refused() {
        let (gog, sa, lm) = amalgam_setup();
        assert!(matches!(
            separate(&gog, &sa, &lm, &GWord::empty(0), 8),
            Err(SeparateError::TrivialWord)
        ));
        let ident = word(vec![vw(0, 0)]);
        assert!(matches!(
            separate(&gog, &sa, &lm, &ident, 8),
            Err(SeparateError::TrivialWord)
        ));
        // A tree stable letter reduces away entirely.
        let (gog2, sa2, lm2) = segment_setup();
        let tree = word(vec![Letter::Stable { edge: 0 }]);
        assert!(matches!(
            separate(&gog2, &sa2, &lm2, &tree, 8),
            Err(SeparateError::TrivialWord)
        ));
    }

    #[test]
    fn certificates_round_trip_through_json() {
        let (gog, sa, lm) = amalgam_setup();
        let ab = word(vec![vw(0, 1), vw(1, 1)]);
        let cert = separate(&gog, &sa, &lm, &ab, DEFAULT_DEGREE_CAP).unwrap();
        let text = serde_json::to_string(&cert).unwrap();
        let back: SeparationCertificate = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cert);
        verify_certificate(&gog, &sa, &lm, &back).unwrap();
    }

    #[test]
    fn tampered_certificates_are_rejected() {
        let (gog, sa, lm) = amalgam_setup();
        let ab = word(vec![vw(0, 1), vw(1, 1)]);
        let cert = separate(&gog, &sa, &lm, &ab, DEFAULT_DEGREE_CAP).unwrap();

        let mut wrong_value = cert.clone();
        if let StepOutcome::Separated { value } = &mut wrong_value.steps[1].outcome {
            *value = FpScalar::zero(2);
        }
        assert!(matches!(
            verify_certificate(&gog, &sa, &lm, &wrong_value),
            Err(SeparateError::BadCertificate(_))
        ));

        // The second step's word lives on the kernel cover; swap it for a
        // different kernel element.
        let mut wrong_word = cert.clone();
        wrong_word.steps[1].word = word(vec![vw(0, 1)]);
        assert!(matches!(
            verify_certificate(&gog, &sa, &lm, &wrong_word),
            Err(SeparateError::BadCertificate(_))
        ));

        let mut wrong_skip = cert.clone();
        wrong_skip.steps[0].skipped_levels = 1;
        assert!(matches!(
            verify_certificate(&gog, &sa, &lm, &wrong_skip),
            Err(SeparateError::BadCertificate(_))
        ));

        let mut wrong_terminal = cert.clone();
        wrong_terminal.terminal = TerminalWitness::Free {
            rank: 1,
            word: vec![1],
            witness: MagnusWitness { monomial: vec![0], coefficient: FpScalar::one(2) },
        };
        assert!(matches!(
            verify_certificate(&gog, &sa, &lm, &wrong_terminal),
            Err(SeparateError::BadCertificate(_))
        ));
    }

    #[test]
    fn corrupted_free_witnesses_are_rejected() {
        let (gog, sa, lm) = segment_setup();
        let abab = word(vec![vw(0, 1), vw(1, 1), vw(0, 1), vw(1, 1)]);
        let cert = separate(&gog, &sa, &lm, &abab, DEFAULT_DEGREE_CAP).unwrap();
        let mut bad_witness = cert.clone();
        if let TerminalWitness::Free { witness, .. } = &mut bad_witness.terminal {
            witness.monomial = vec![0];
        }
        assert!(matches!(
            verify_certificate(&gog, &sa, &lm, &bad_witness),
            Err(SeparateError::BadCertificate(_))
        ));
    }

    proptest! {
        #[test]
        fn random_amalgam_words_separate_and_verify(
            letters in prop::collection::vec((0usize..2, 1usize..4), 1..6)
        ) {
            let (gog, sa, lm) = amalgam_setup();
            let sd = SpanningData::new(gog.graph()).unwrap();
            let w = word(letters.into_iter().map(|(v, e)| vw(v, e)).collect());
            match separate(&gog, &sa, &lm, &w, DEFAULT_DEGREE_CAP) {
                Ok(cert) => {
                    prop_assert!(!gog.is_trivial_word(&sd, &w));
                    verify_certificate(&gog, &sa, &lm, &cert).unwrap();
                }
                Err(SeparateError::TrivialWord) => {
                    prop_assert!(gog.is_trivial_word(&sd, &w));
                }
                Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
            }
        }
    }
}
