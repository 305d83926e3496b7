//! Problem files, report plumbing, word grammars, and DOT export.
//!
//! A problem file is a single self-contained JSON document: finite groups
//! given by multiplication tables (or by permutation generators compiled to
//! tables), a named graph, the edge embeddings as element maps, and
//! optionally a series assignment, level scalars, and named words. Loading
//! re-runs every structural validator, so a [`Problem`] in hand is always
//! internally consistent. [`decompile`] turns in-memory data — covers
//! included — back into a file that reloads to the same thing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compat::{CompatError, LevelMaps, LevelScalars, SeriesAssignment};
use crate::fp::FpScalar;
use crate::gog::{GWord, GogError, Graph, GraphOfGroups, Letter, PairSpec, TreeBall};
use crate::magnus::FreeWord;
use crate::pgroups::{ChiefSeries, FiniteGroup, GroupError, Grp, Subgroup};
use std::sync::Arc;

/// The one format this build reads and writes.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o failure: {0}")]
    File(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format_version {got} (this build reads {want})")]
    Version { got: u32, want: u32 },
    #[error("{0}")]
    Format(String),
    #[error("unknown {kind} name {name:?}")]
    UnknownName { kind: &'static str, name: String },
    #[error("group table failure: {0}")]
    Group(#[from] GroupError),
    #[error("graph failure: {0}")]
    Gog(#[from] GogError),
    #[error("series failure: {0}")]
    Compat(#[from] CompatError),
}

fn format_err(msg: impl Into<String>) -> IoError {
    IoError::Format(msg.into())
}

/// A fully validated, loaded problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub gog: GraphOfGroups,
    pub series: Option<SeriesAssignment>,
    pub level_maps: Option<LevelMaps>,
    pub words: BTreeMap<String, GWord>,
}

/// An element named either by index or by its label in the group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElemRef {
    Index(usize),
    Label(String),
}

/// A finite group, either as a full multiplication table or as permutation
/// generators (compiled to a table on load).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupSpec {
    Table {
        table: Vec<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    Permutations {
        degree: usize,
        generators: BTreeMap<String, Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub name: String,
    /// Name of the reverse direction; defaults to the name with `'` appended.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bar: Option<String>,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub vertices: Vec<String>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
}

/// One level of scalars, keyed by vertex name and by pair (forward-edge)
/// name; an entry is `null` exactly where that group's factor at this level
/// is trivial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMapSpec {
    #[serde(default)]
    pub vertex: BTreeMap<String, Option<u32>>,
    #[serde(default)]
    pub pair: BTreeMap<String, Option<u32>>,
}

fn one_i64() -> i64 {
    1
}

fn is_one(n: &i64) -> bool {
    *n == 1
}

/// One letter of a stored word: a vertex-group element or a stable letter,
/// each with an optional integer power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LetterSpec {
    VertexLetter {
        vertex: String,
        element: ElemRef,
        #[serde(default = "one_i64", skip_serializing_if = "is_one")]
        power: i64,
    },
    StableLetter {
        stable: String,
        #[serde(default = "one_i64", skip_serializing_if = "is_one")]
        power: i64,
    },
}

/// The JSON shape of a problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub format_version: u32,
    pub prime: u32,
    pub groups: BTreeMap<String, GroupSpec>,
    pub graph: GraphSpec,
    pub vertex_groups: BTreeMap<String, String>,
    #[serde(default)]
    pub edge_groups: BTreeMap<String, String>,
    #[serde(default)]
    pub monos: BTreeMap<String, Vec<ElemRef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex_series: Option<BTreeMap<String, Vec<Vec<ElemRef>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_series: Option<BTreeMap<String, Vec<Vec<ElemRef>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_maps: Option<Vec<LevelMapSpec>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub words: BTreeMap<String, Vec<LetterSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basepoint: Option<String>,
}

/// Trial-division primality test; the moduli in play are tiny.
pub fn is_prime(n: u32) -> bool {
    n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

fn resolve_elem(group: &FiniteGroup, context: &str, r: &ElemRef) -> Result<usize, IoError> {
    match r {
        ElemRef::Index(i) => {
            if *i < group.order() {
                Ok(*i)
            } else {
                Err(format_err(format!(
                    "{context}: element index {i} out of range (order {})",
                    group.order()
                )))
            }
        }
        ElemRef::Label(l) => (0..group.order())
            .find(|&i| group.label(i) == *l)
            .ok_or_else(|| format_err(format!("{context}: no element labelled {l:?}"))),
    }
}

fn build_group(name: &str, spec: &GroupSpec) -> Result<FiniteGroup, IoError> {
    match spec {
        GroupSpec::Table { table, labels } => {
            FiniteGroup::from_mul_table(table.clone(), labels.clone()).map_err(IoError::from)
        }
        GroupSpec::Permutations { degree, generators } => {
            let gens: Vec<(String, Vec<usize>)> =
                generators.iter().map(|(n, p)| (n.clone(), p.clone())).collect();
            if gens.is_empty() {
                return Err(format_err(format!("group {name:?}: no permutation generators")));
            }
            let (group, _) = FiniteGroup::from_permutations(*degree, &gens, 1 << 16)?;
            Ok(group)
        }
    }
}

/// Compile a parsed file into a validated [`Problem`].
pub fn compile(file: &ProblemFile) -> Result<Problem, IoError> {
    if file.format_version != FORMAT_VERSION {
        return Err(IoError::Version { got: file.format_version, want: FORMAT_VERSION });
    }
    if !is_prime(file.prime) {
        return Err(format_err(format!("prime {} is not a prime number", file.prime)));
    }

    let mut groups: BTreeMap<String, Grp> = BTreeMap::new();
    for (name, spec) in &file.groups {
        groups.insert(name.clone(), Arc::new(build_group(name, spec)?));
    }
    let lookup = |kind: &'static str, name: &str| -> Result<Grp, IoError> {
        groups
            .get(name)
            .cloned()
            .ok_or(IoError::UnknownName { kind, name: name.to_string() })
    };

    let pairs: Vec<PairSpec> = file
        .graph
        .edges
        .iter()
        .map(|e| {
            let vertex = |name: &str| {
                file.graph.vertices.iter().position(|v| v == name).ok_or(IoError::UnknownName {
                    kind: "vertex",
                    name: name.to_string(),
                })
            };
            Ok(PairSpec {
                name: e.name.clone(),
                bar_name: e.bar.clone().unwrap_or_else(|| format!("{}'", e.name)),
                from: vertex(&e.from)?,
                to: vertex(&e.to)?,
            })
        })
        .collect::<Result<_, IoError>>()?;
    let graph = Graph::new(file.graph.vertices.clone(), &pairs)?;

    let vertex_groups: Vec<Grp> = file
        .graph
        .vertices
        .iter()
        .map(|v| {
            let gname = file
                .vertex_groups
                .get(v)
                .ok_or_else(|| format_err(format!("vertex {v:?} has no group assigned")))?;
            lookup("group", gname)
        })
        .collect::<Result<_, IoError>>()?;
    let edge_groups: Vec<Grp> = (0..graph.pair_count())
        .map(|q| {
            let pname = graph.edge_name(graph.plus_of(q));
            let gname = file
                .edge_groups
                .get(pname)
                .ok_or_else(|| format_err(format!("edge pair {pname:?} has no group assigned")))?;
            lookup("group", gname)
        })
        .collect::<Result<_, IoError>>()?;

    let mut monos = Vec::with_capacity(graph.directed_count());
    for y in 0..graph.directed_count() {
        let ename = graph.edge_name(y);
        let entries = file
            .monos
            .get(ename)
            .ok_or_else(|| format_err(format!("directed edge {ename:?} has no embedding")))?;
        let source = &edge_groups[graph.pair_of(y)];
        let target = &vertex_groups[graph.terminus(y)];
        if entries.len() != source.order() {
            return Err(format_err(format!(
                "embedding along {ename:?} lists {} entries for an edge group of order {}",
                entries.len(),
                source.order()
            )));
        }
        let map = entries
            .iter()
            .map(|r| resolve_elem(target, &format!("embedding along {ename:?}"), r))
            .collect::<Result<Vec<_>, IoError>>()?;
        monos.push(crate::pgroups::GroupHom::new(source, target, map)?);
    }

    let gog = GraphOfGroups::new(graph, file.prime, vertex_groups, edge_groups, monos)?;
    let graph = gog.graph();

    let series = match (&file.vertex_series, &file.edge_series) {
        (None, None) => None,
        (Some(vs), es) => {
            let empty = BTreeMap::new();
            let es = es.as_ref().unwrap_or(&empty);
            let build = |name: &str,
                         group: &Grp,
                         terms: &Vec<Vec<ElemRef>>|
             -> Result<ChiefSeries, IoError> {
                let subs = terms
                    .iter()
                    .map(|term| {
                        let elems = term
                            .iter()
                            .map(|r| resolve_elem(group, &format!("series of {name:?}"), r))
                            .collect::<Result<Vec<_>, IoError>>()?;
                        Subgroup::from_elements(group, &elems).map_err(IoError::from)
                    })
                    .collect::<Result<Vec<_>, IoError>>()?;
                Ok(ChiefSeries::new(subs))
            };
            let vseries = (0..graph.vertex_count())
                .map(|v| {
                    let name = graph.vertex_name(v);
                    let terms = vs.get(name).ok_or_else(|| {
                        format_err(format!("vertex {name:?} is missing from vertex_series"))
                    })?;
                    build(name, gog.vertex_group(v), terms)
                })
                .collect::<Result<Vec<_>, IoError>>()?;
            let eseries = (0..graph.pair_count())
                .map(|q| {
                    let name = graph.edge_name(graph.plus_of(q));
                    let terms = es.get(name).ok_or_else(|| {
                        format_err(format!("edge pair {name:?} is missing from edge_series"))
                    })?;
                    build(name, gog.edge_group(q), terms)
                })
                .collect::<Result<Vec<_>, IoError>>()?;
            Some(SeriesAssignment::new(&gog, vseries, eseries)?)
        }
        (None, Some(_)) => {
            return Err(format_err("edge_series given without vertex_series"));
        }
    };

    let level_maps = match &file.level_maps {
        None => None,
        Some(levels) => {
            let p = file.prime;
            let built = levels
                .iter()
                .enumerate()
                .map(|(k, spec)| {
                    let vertex = (0..graph.vertex_count())
                        .map(|v| {
                            let name = graph.vertex_name(v);
                            let raw = spec.vertex.get(name).copied().ok_or_else(|| {
                                format_err(format!("level {k}: vertex {name:?} has no entry"))
                            })?;
                            Ok(raw.map(|s| FpScalar::new(i64::from(s), p)))
                        })
                        .collect::<Result<Vec<_>, IoError>>()?;
                    let pair = (0..graph.pair_count())
                        .map(|q| {
                            let name = graph.edge_name(graph.plus_of(q));
                            let raw = spec.pair.get(name).copied().ok_or_else(|| {
                                format_err(format!("level {k}: edge pair {name:?} has no entry"))
                            })?;
                            Ok(raw.map(|s| FpScalar::new(i64::from(s), p)))
                        })
                        .collect::<Result<Vec<_>, IoError>>()?;
                    Ok(LevelScalars { vertex, pair })
                })
                .collect::<Result<Vec<_>, IoError>>()?;
            Some(LevelMaps { levels: built })
        }
    };

    let basepoint = match &file.basepoint {
        None => 0,
        Some(name) => graph
            .vertex_by_name(name)
            .ok_or(IoError::UnknownName { kind: "vertex", name: name.clone() })?,
    };

    let mut words = BTreeMap::new();
    for (name, letters) in &file.words {
        let mut out = Vec::new();
        for spec in letters {
            match spec {
                LetterSpec::VertexLetter { vertex, element, power } => {
                    let v = graph
                        .vertex_by_name(vertex)
                        .ok_or(IoError::UnknownName { kind: "vertex", name: vertex.clone() })?;
                    let group = gog.vertex_group(v);
                    let e = resolve_elem(group, &format!("word {name:?}"), element)?;
                    out.push(Letter::Vertex { vertex: v, element: group.pow(e, *power) });
                }
                LetterSpec::StableLetter { stable, power } => {
                    let y = graph
                        .edge_by_name(stable)
                        .ok_or(IoError::UnknownName { kind: "edge", name: stable.clone() })?;
                    let dir = if *power < 0 { graph.bar(y) } else { y };
                    for _ in 0..power.unsigned_abs() {
                        out.push(Letter::Stable { edge: dir });
                    }
                }
            }
        }
        let w = GWord { basepoint, letters: out };
        gog.validate_word(&w)?;
        words.insert(name.clone(), w);
    }

    Ok(Problem { gog, series, level_maps, words })
}

/// Parse problem text and compile it.
pub fn parse_problem(text: &str) -> Result<Problem, IoError> {
    let file: ProblemFile = serde_json::from_str(text)?;
    compile(&file)
}

/// Load and compile a problem file from disk.
pub fn load_problem(path: &std::path::Path) -> Result<Problem, IoError> {
    parse_problem(&std::fs::read_to_string(path)?)
}

/// Turn in-memory data back into a problem file that reloads to the same
/// thing. Groups are deduplicated by identity and named after the first
/// place that uses them.
pub fn decompile(
    gog: &GraphOfGroups,
    series: Option<&SeriesAssignment>,
    level_maps: Option<&LevelMaps>,
    words: &BTreeMap<String, GWord>,
) -> ProblemFile {
    let graph = gog.graph();
    let mut groups: BTreeMap<String, GroupSpec> = BTreeMap::new();
    let mut named: Vec<(Grp, String)> = Vec::new();
    let mut name_of = |g: &Grp, proposal: String, groups: &mut BTreeMap<String, GroupSpec>| {
        if let Some((_, name)) = named.iter().find(|(h, _)| Arc::ptr_eq(h, g)) {
            return name.clone();
        }
        let mut name = proposal.clone();
        let mut n = 1;
        while groups.contains_key(&name) {
            n += 1;
            name = format!("{proposal}.{n}");
        }
        let table: Vec<Vec<usize>> =
            (0..g.order()).map(|a| (0..g.order()).map(|b| g.mul(a, b)).collect()).collect();
        let labels = g.labels().map(|l| l.to_vec());
        groups.insert(name.clone(), GroupSpec::Table { table, labels });
        named.push((g.clone(), name.clone()));
        name
    };

    let mut vertex_groups = BTreeMap::new();
    for v in 0..graph.vertex_count() {
        let name = name_of(
            gog.vertex_group(v),
            format!("G.{}", graph.vertex_name(v)),
            &mut groups,
        );
        vertex_groups.insert(graph.vertex_name(v).to_string(), name);
    }
    let mut edge_groups = BTreeMap::new();
    for q in 0..graph.pair_count() {
        let pname = graph.edge_name(graph.plus_of(q)).to_string();
        let name = name_of(gog.edge_group(q), format!("E.{pname}"), &mut groups);
        edge_groups.insert(pname, name);
    }

    let edges = (0..graph.pair_count())
        .map(|q| {
            let y = graph.plus_of(q);
            EdgeSpec {
                name: graph.edge_name(y).to_string(),
                bar: Some(graph.edge_name(graph.bar(y)).to_string()),
                from: graph.vertex_name(graph.origin(y)).to_string(),
                to: graph.vertex_name(graph.terminus(y)).to_string(),
            }
        })
        .collect();

    let mut monos = BTreeMap::new();
    for y in 0..graph.directed_count() {
        let hom = gog.mono(y);
        let entries = (0..gog.edge_group(graph.pair_of(y)).order())
            .map(|e| ElemRef::Index(hom.apply(e)))
            .collect();
        monos.insert(graph.edge_name(y).to_string(), entries);
    }

    let series_terms = |s: &ChiefSeries| -> Vec<Vec<ElemRef>> {
        s.terms()
            .iter()
            .map(|t| t.elements().iter().map(|&e| ElemRef::Index(e)).collect())
            .collect()
    };
    let (vertex_series, edge_series) = match series {
        None => (None, None),
        Some(sa) => {
            let vs = (0..graph.vertex_count())
                .map(|v| (graph.vertex_name(v).to_string(), series_terms(sa.vertex_series(v))))
                .collect();
            let es = (0..graph.pair_count())
                .map(|q| {
                    (
                        graph.edge_name(graph.plus_of(q)).to_string(),
                        series_terms(sa.edge_series(q)),
                    )
                })
                .collect();
            (Some(vs), Some(es))
        }
    };

    let level_maps = level_maps.map(|lm| {
        lm.levels
            .iter()
            .map(|level| LevelMapSpec {
                vertex: (0..graph.vertex_count())
                    .map(|v| {
                        (graph.vertex_name(v).to_string(), level.vertex[v].map(|s| s.value()))
                    })
                    .collect(),
                pair: (0..graph.pair_count())
                    .map(|q| {
                        (
                            graph.edge_name(graph.plus_of(q)).to_string(),
                            level.pair[q].map(|s| s.value()),
                        )
                    })
                    .collect(),
            })
            .collect()
    });

    let basepoint =
        Some(graph.vertex_name(words.values().next().map_or(0, |w| w.basepoint)).to_string());
    let words = words
        .iter()
        .map(|(name, w)| {
            let letters = w
                .letters
                .iter()
                .map(|l| match *l {
                    Letter::Vertex { vertex, element } => LetterSpec::VertexLetter {
                        vertex: graph.vertex_name(vertex).to_string(),
                        element: ElemRef::Index(element),
                        power: 1,
                    },
                    Letter::Stable { edge } => LetterSpec::StableLetter {
                        stable: graph.edge_name(edge).to_string(),
                        power: 1,
                    },
                })
                .collect();
            (name.clone(), letters)
        })
        .collect();

    ProblemFile {
        format_version: FORMAT_VERSION,
        prime: gog.prime(),
        groups,
        graph: GraphSpec { vertices: (0..graph.vertex_count())
            .map(|v| graph.vertex_name(v).to_string())
            .collect(), edges },
        vertex_groups,
        edge_groups,
        monos,
        vertex_series,
        edge_series,
        level_maps,
        words,
        basepoint,
    }
}

/// Pretty-printed JSON for a problem file.
pub fn problem_to_string(file: &ProblemFile) -> String {
    let mut text = serde_json::to_string_pretty(file).expect("problem files always serialize");
    text.push('\n');
    text
}

/// Parse one word in the inline grammar.
///
/// Whitespace-separated tokens: `VERTEX:ELEM` or `VERTEX:ELEM^K` for a
/// vertex-group letter (element by label, or by index if no label matches),
/// and `EDGE` or `EDGE^K` for a stable letter (negative powers cross the
/// reverse direction).
pub fn parse_word(gog: &GraphOfGroups, text: &str) -> Result<GWord, IoError> {
    let graph = gog.graph();
    let mut letters = Vec::new();
    for token in text.split_whitespace() {
        let (head, power) = match token.rsplit_once('^') {
            Some((head, exp)) => {
                let k: i64 = exp
                    .parse()
                    .map_err(|_| format_err(format!("bad exponent in token {token:?}")))?;
                (head, k)
            }
            None => (token, 1),
        };
        if let Some((vname, ename)) = head.split_once(':') {
            let v = graph
                .vertex_by_name(vname)
                .ok_or(IoError::UnknownName { kind: "vertex", name: vname.to_string() })?;
            let group = gog.vertex_group(v);
            let e = (0..group.order())
                .find(|&i| group.label(i) == ename)
                .or_else(|| ename.parse::<usize>().ok().filter(|&i| i < group.order()))
                .ok_or_else(|| {
                    format_err(format!("vertex {vname:?} has no element {ename:?}"))
                })?;
            letters.push(Letter::Vertex { vertex: v, element: group.pow(e, power) });
        } else {
            let y = graph
                .edge_by_name(head)
                .ok_or(IoError::UnknownName { kind: "edge", name: head.to_string() })?;
            let dir = if power < 0 { graph.bar(y) } else { y };
            for _ in 0..power.unsigned_abs() {
                letters.push(Letter::Stable { edge: dir });
            }
        }
    }
    let w = GWord { basepoint: 0, letters };
    gog.validate_word(&w)?;
    Ok(w)
}

/// Parse a free word: tokens `x3`, `x3'`, `x3^-2`, or signed integers.
pub fn parse_free_word(text: &str, rank: usize) -> Result<FreeWord, IoError> {
    let mut out = Vec::new();
    for token in text.split_whitespace() {
        let (head, mut power) = match token.rsplit_once('^') {
            Some((head, exp)) => (
                head,
                exp.parse::<i64>()
                    .map_err(|_| format_err(format!("bad exponent in token {token:?}")))?,
            ),
            None => (token, 1),
        };
        let mut head = head;
        if let Some(stripped) = head.strip_suffix('\'') {
            head = stripped;
            power = -power;
        }
        let letter: i64 = if let Some(rest) = head.strip_prefix('x').or(head.strip_prefix('X')) {
            rest.parse()
                .map_err(|_| format_err(format!("bad generator token {token:?}")))?
        } else {
            head.parse()
                .map_err(|_| format_err(format!("bad generator token {token:?}")))?
        };
        if letter == 0 || letter.unsigned_abs() as usize > rank {
            return Err(format_err(format!(
                "generator {token:?} out of range for rank {rank}"
            )));
        }
        let signed = letter * power.signum();
        for _ in 0..power.unsigned_abs() {
            out.push(signed as i32);
        }
    }
    Ok(out)
}

/// GraphViz rendering of the underlying graph, one line per edge pair.
pub fn graph_dot(gog: &GraphOfGroups) -> String {
    let graph = gog.graph();
    let mut s = String::from("graph {\n  layout=neato;\n");
    for v in 0..graph.vertex_count() {
        s.push_str(&format!(
            "  v{v} [label=\"{} (order {})\"];\n",
            graph.vertex_name(v),
            gog.vertex_group(v).order()
        ));
    }
    for q in 0..graph.pair_count() {
        let y = graph.plus_of(q);
        s.push_str(&format!(
            "  v{} -- v{} [label=\"{} (order {})\"];\n",
            graph.origin(y),
            graph.terminus(y),
            graph.edge_name(y),
            gog.edge_group(q).order()
        ));
    }
    s.push_str("}\n");
    s
}

/// Level maps rendered in the same JSON shape the problem format uses.
pub fn level_maps_value(gog: &GraphOfGroups, lm: &LevelMaps) -> serde_json::Value {
    use serde_json::{Value, json};
    let graph = gog.graph();
    Value::Array(
        lm.levels
            .iter()
            .map(|level| {
                let vertex: serde_json::Map<String, Value> = (0..graph.vertex_count())
                    .map(|v| {
                        (graph.vertex_name(v).to_string(), json!(level.vertex[v].map(|s| s.value())))
                    })
                    .collect();
                let pair: serde_json::Map<String, Value> = (0..graph.pair_count())
                    .map(|q| {
                        (
                            graph.edge_name(graph.plus_of(q)).to_string(),
                            json!(level.pair[q].map(|s| s.value())),
                        )
                    })
                    .collect();
                json!({ "vertex": vertex, "pair": pair })
            })
            .collect(),
    )
}

/// Series terms as element-label lists, keyed by vertex / edge-pair name.
pub fn series_value(gog: &GraphOfGroups, sa: &SeriesAssignment) -> serde_json::Value {
    use serde_json::{Value, json};
    let graph = gog.graph();
    let terms = |series: &ChiefSeries, group: &Grp| -> Value {
        Value::Array(
            series
                .terms()
                .iter()
                .map(|t| {
                    Value::Array(
                        t.elements().iter().map(|&e| Value::String(group.label(e))).collect(),
                    )
                })
                .collect(),
        )
    };
    let vertex: serde_json::Map<String, Value> = (0..graph.vertex_count())
        .map(|v| {
            (graph.vertex_name(v).to_string(), terms(sa.vertex_series(v), gog.vertex_group(v)))
        })
        .collect();
    let edge: serde_json::Map<String, Value> = (0..graph.pair_count())
        .map(|q| {
            (graph.edge_name(graph.plus_of(q)).to_string(), terms(sa.edge_series(q), gog.edge_group(q)))
        })
        .collect();
    json!({ "vertex": vertex, "edge": edge })
}

/// A structured account of a compatibility failure; `None` for errors that
/// mean the input data itself is malformed rather than incompatible.
pub fn incompatibility_value(e: &CompatError) -> Option<serde_json::Value> {
    use serde_json::json;
    match e {
        CompatError::Misaligned { edge, level, image_of_term, meet } => Some(json!({
            "reason": e.to_string(),
            "condition": "alignment",
            "edge": edge,
            "level": level,
            "image_of_term": image_of_term,
            "meet": meet,
        })),
        CompatError::Holonomy { level, pair, value } => Some(json!({
            "reason": e.to_string(),
            "condition": "level-maps",
            "level": level,
            "pair": pair,
            "holonomy": value.value(),
        })),
        CompatError::BadLevelMap { level, reason } => Some(json!({
            "reason": e.to_string(),
            "condition": "level-maps",
            "level": level,
            "supplied_maps": reason,
        })),
        _ => None,
    }
}

/// GraphViz rendering of a ball in the tree the group acts on.
pub fn ball_dot(gog: &GraphOfGroups, ball: &TreeBall) -> String {
    let graph = gog.graph();
    let mut s = String::from("graph {\n");
    for (i, node) in ball.nodes.iter().enumerate() {
        s.push_str(&format!(
            "  n{i} [label=\"{} · {}\"];\n",
            gog.render_word(&node.coset),
            graph.vertex_name(node.vertex)
        ));
    }
    for (i, node) in ball.nodes.iter().enumerate() {
        if let Some((parent, y)) = node.parent {
            s.push_str(&format!(
                "  n{parent} -- n{i} [label=\"{}\"];\n",
                graph.edge_name(y)
            ));
        }
    }
    s.push_str("}\n");
    s
}
