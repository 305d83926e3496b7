//! Command-line front end: problem files in, verdicts and certificates out.
//!
//! Exit codes: 0 when a verdict was reached (including "incompatible" and
//! "exhausted"), 2 for invalid input, 3 for an exceeded budget, 4 for an
//! internal invariant breach.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{Value, json};

use psep::compat::{LevelMaps, SearchOutcome, SeriesAssignment, check_compatibility};
use psep::cover::{KernelCover, LevelHom, build_kernel_cover, verify_cover};
use psep::gog::{GWord, GogError, GraphOfGroups, SpanningData};
use psep::io::{self, IoError, Problem, incompatibility_value, level_maps_value, series_value};
use psep::magnus::{FreeVerdict, MagnusError, check_witness, separate_free};
use psep::separate::{
    DEFAULT_DEGREE_CAP, DEFAULT_GROUP_BUDGET, DEFAULT_MAX_COSETS, SeparateError,
    SeparationCertificate, TerminalWitness, build_explicit_quotient, separate, verify_certificate,
};

const EXIT_INPUT: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "psep",
    version,
    about = "Compatibility conditions and p-quotient separation certificates \
             for fundamental groups of finite graphs of finite p-groups"
)]
struct Cli {
    /// Print the report as a JSON document.
    #[arg(long, global = true, conflicts_with = "text")]
    json: bool,
    /// Print the report as plain text (the default).
    #[arg(long, global = true)]
    text: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a problem file and run every structural validator.
    Validate {
        /// Problem file to load.
        #[arg(long)]
        input: PathBuf,
        /// Write the underlying graph in DOT format to this file.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Check the compatibility conditions on the file's chief-series data.
    Check {
        #[arg(long)]
        input: PathBuf,
    },
    /// Search for compatible chief-series data from scratch.
    Search {
        #[arg(long)]
        input: PathBuf,
        /// Give up after this many vertex-chain assignments.
        #[arg(long, default_value_t = 100_000)]
        search_bound: u64,
        /// Write the problem extended with the found data to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Separate a nontrivial word into a finite p-quotient and emit a
    /// certificate of the descent.
    Separate {
        #[arg(long)]
        input: PathBuf,
        /// A word name from the file, or an inline word such as "u:a e v:b".
        #[arg(long)]
        word: String,
        /// Also build the explicit finite p-quotient the certificate yields.
        #[arg(long)]
        quotient: bool,
        /// Coset budget for the explicit quotient.
        #[arg(long, default_value_t = DEFAULT_MAX_COSETS)]
        max_cosets: usize,
        /// Degree budget for the free-group stage.
        #[arg(long, default_value_t = DEFAULT_DEGREE_CAP)]
        max_degree: usize,
        /// Write the certificate as JSON to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build the index-p kernel cover induced by the top level.
    Cover {
        #[arg(long)]
        input: PathBuf,
        /// Write the cover as a problem file (it reloads and validates).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write the cover's graph in DOT format to this file.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Explore a ball in the tree on which the fundamental group acts.
    Tree {
        #[arg(long)]
        input: PathBuf,
        /// Ball radius in tree edges.
        #[arg(long, default_value_t = 2)]
        radius: usize,
        /// Node budget for the ball.
        #[arg(long, default_value_t = 10_000)]
        max_nodes: usize,
        /// Center the ball on this vertex (defaults to the first one).
        #[arg(long)]
        basepoint: Option<String>,
        /// Write the ball in DOT format to this file.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Decide a free word by truncated power series and report the witness.
    Freesep {
        #[arg(long)]
        prime: u32,
        #[arg(long)]
        rank: usize,
        /// The word, e.g. "x1 x2' x1^-2" (or signed integers "1 -2").
        #[arg(long)]
        word: String,
        /// Largest witness degree to try.
        #[arg(long, default_value_t = DEFAULT_DEGREE_CAP)]
        max_degree: usize,
    },
}

/// A run that did not reach a verdict: the exit code says why.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Failure {
        Failure { code, message: message.into() }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Failure {
        Failure::new(EXIT_INPUT, e.to_string())
    }
}

struct Report {
    command: &'static str,
    verdict: &'static str,
    detail: Value,
}

impl Report {
    fn to_json(&self, elapsed_ms: u128) -> Value {
        json!({
            "format_version": io::FORMAT_VERSION,
            "command": self.command,
            "verdict": self.verdict,
            "detail": self.detail,
            "elapsed_ms": elapsed_ms,
        })
    }

    fn to_text(&self) -> String {
        let mut out = format!("command: {}\nverdict: {}\n", self.command, self.verdict);
        if let Value::Object(map) = &self.detail {
            for (key, value) in map {
                match value {
                    Value::String(s) => out.push_str(&format!("{key}: {s}\n")),
                    other => out.push_str(&format!("{key}: {other}\n")),
                }
            }
        }
        out
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = std::time::Instant::now();
    match run(&cli.command) {
        Ok(report) => {
            if cli.json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report.to_json(started.elapsed().as_millis()))
                        .expect("reports always serialize")
                );
            } else {
                print!("{}", report.to_text());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: &Command) -> Result<Report, Failure> {
    match command {
        Command::Validate { input, dot } => cmd_validate(input, dot.as_deref()),
        Command::Check { input } => cmd_check(input),
        Command::Search { input, search_bound, output } => {
            cmd_search(input, *search_bound, output.as_deref())
        }
        Command::Separate { input, word, quotient, max_cosets, max_degree, output } => {
            cmd_separate(input, word, *quotient, *max_cosets, *max_degree, output.as_deref())
        }
        Command::Cover { input, output, dot } => cmd_cover(input, output.as_deref(), dot.as_deref()),
        Command::Tree { input, radius, max_nodes, basepoint, dot } => {
            cmd_tree(input, *radius, *max_nodes, basepoint.as_deref(), dot.as_deref())
        }
        Command::Freesep { prime, rank, word, max_degree } => {
            cmd_freesep(*prime, *rank, word, *max_degree)
        }
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), Failure> {
    std::fs::write(path, content)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("cannot write {}: {e}", path.display())))
}

fn cmd_validate(input: &Path, dot: Option<&Path>) -> Result<Report, Failure> {
    let problem = io::load_problem(input)?;
    let gog = &problem.gog;
    let graph = gog.graph();
    if let Some(path) = dot {
        write_file(path, &io::graph_dot(gog))?;
    }
    let vertex_orders: Value = (0..graph.vertex_count())
        .map(|v| (graph.vertex_name(v).to_string(), json!(gog.vertex_group(v).order())))
        .collect::<serde_json::Map<_, _>>()
        .into();
    Ok(Report {
        command: "validate",
        verdict: "valid",
        detail: json!({
            "prime": gog.prime(),
            "vertices": graph.vertex_count(),
            "edge_pairs": graph.pair_count(),
            "vertex_group_orders": vertex_orders,
            "series_levels": problem.series.as_ref().map(SeriesAssignment::length),
            "words": problem.words.keys().collect::<Vec<_>>(),
        }),
    })
}

fn require_series(problem: &Problem) -> Result<&SeriesAssignment, Failure> {
    problem.series.as_ref().ok_or_else(|| {
        Failure::new(
            EXIT_INPUT,
            "the file carries no chief-series data; add it or run `search`",
        )
    })
}

fn cmd_check(input: &Path) -> Result<Report, Failure> {
    let problem = io::load_problem(input)?;
    let sa = require_series(&problem)?;
    match check_compatibility(&problem.gog, sa, problem.level_maps.as_ref()) {
        Ok(lm) => Ok(Report {
            command: "check",
            verdict: "compatible",
            detail: json!({
                "levels": sa.length(),
                "maps_supplied": problem.level_maps.is_some(),
                "level_maps": level_maps_value(&problem.gog, &lm),
            }),
        }),
        Err(e) => match incompatibility_value(&e) {
            Some(detail) => {
                Ok(Report { command: "check", verdict: "incompatible", detail })
            }
            None => Err(Failure::new(EXIT_INPUT, e.to_string())),
        },
    }
}

fn cmd_search(input: &Path, bound: u64, output: Option<&Path>) -> Result<Report, Failure> {
    let problem = io::load_problem(input)?;
    match psep::compat::search_compatible(&problem.gog, bound) {
        SearchOutcome::Found { assignment, level_maps, tried } => {
            if let Some(path) = output {
                let file = io::decompile(
                    &problem.gog,
                    Some(&assignment),
                    Some(&level_maps),
                    &problem.words,
                );
                write_file(path, &io::problem_to_string(&file))?;
            }
            Ok(Report {
                command: "search",
                verdict: "found",
                detail: json!({
                    "tried": tried,
                    "levels": assignment.length(),
                    "series": series_value(&problem.gog, &assignment),
                    "level_maps": level_maps_value(&problem.gog, &level_maps),
                }),
            })
        }
        SearchOutcome::Exhausted { tried } => Ok(Report {
            command: "search",
            verdict: "exhausted",
            detail: json!({
                "tried": tried,
                "reason": "no assignment of chief series satisfies both conditions",
            }),
        }),
        SearchOutcome::BudgetExceeded { tried } => Err(Failure::new(
            EXIT_BUDGET,
            format!("search budget exhausted after {tried} assignments; raise --search-bound"),
        )),
    }
}

/// The word named in the file, or an inline word parsed against the graph.
fn resolve_word(problem: &Problem, spec: &str) -> Result<GWord, Failure> {
    if let Some(w) = problem.words.get(spec) {
        return Ok(w.clone());
    }
    io::parse_word(&problem.gog, spec).map_err(|e| {
        Failure::new(
            EXIT_INPUT,
            format!("--word {spec:?} names no word in the file and does not parse inline: {e}"),
        )
    })
}

/// Series plus validated-or-solved level maps, or a compatibility verdict.
fn series_and_maps(
    problem: &Problem,
) -> Result<Result<(&SeriesAssignment, LevelMaps), Value>, Failure> {
    let sa = require_series(problem)?;
    match check_compatibility(&problem.gog, sa, problem.level_maps.as_ref()) {
        Ok(lm) => Ok(Ok((sa, lm))),
        Err(e) => match incompatibility_value(&e) {
            Some(detail) => Ok(Err(detail)),
            None => Err(Failure::new(EXIT_INPUT, e.to_string())),
        },
    }
}

fn separate_failure(e: SeparateError) -> Failure {
    let code = match &e {
        SeparateError::TrivialWord | SeparateError::Word(_) => EXIT_INPUT,
        SeparateError::Magnus(MagnusError::DegreeCapped { .. }) => EXIT_BUDGET,
        SeparateError::Magnus(_) => EXIT_INPUT,
        SeparateError::Quotient(_) => EXIT_BUDGET,
        SeparateError::Compat(_)
        | SeparateError::Cover(_)
        | SeparateError::DescentOverrun { .. }
        | SeparateError::BadCertificate(_)
        | SeparateError::Internal(_) => EXIT_INTERNAL,
    };
    Failure::new(code, e.to_string())
}

fn certificate_depth(cert: &SeparationCertificate) -> usize {
    cert.steps.len() + usize::from(matches!(cert.terminal, TerminalWitness::Free { .. }))
}

fn cmd_separate(
    input: &Path,
    word_spec: &str,
    quotient: bool,
    max_cosets: usize,
    max_degree: usize,
    output: Option<&Path>,
) -> Result<Report, Failure> {
    let problem = io::load_problem(input)?;
    let (sa, lm) = match series_and_maps(&problem)? {
        Ok(pair) => pair,
        Err(detail) => {
            return Ok(Report { command: "separate", verdict: "incompatible", detail });
        }
    };
    let word = resolve_word(&problem, word_spec)?;
    let cert = separate(&problem.gog, sa, &lm, &word, max_degree).map_err(separate_failure)?;
    verify_certificate(&problem.gog, sa, &lm, &cert).map_err(|e| {
        Failure::new(EXIT_INTERNAL, format!("emitted certificate failed re-verification: {e}"))
    })?;
    if let Some(path) = output {
        let text = serde_json::to_string_pretty(&cert)
            .map_err(|e| Failure::new(EXIT_INTERNAL, format!("certificate serialization: {e}")))?;
        write_file(path, &(text + "\n"))?;
    }
    let mut detail = json!({
        "word": problem.gog.render_word(&word),
        "depth": certificate_depth(&cert),
        "descent_steps": cert.steps.len(),
        "terminal": match &cert.terminal {
            TerminalWitness::Level => "level".to_string(),
            TerminalWitness::Free { rank, .. } => format!("free(rank {rank})"),
        },
        "certificate": serde_json::to_value(&cert)
            .map_err(|e| Failure::new(EXIT_INTERNAL, format!("certificate serialization: {e}")))?,
    });
    if quotient {
        let q = build_explicit_quotient(
            &problem.gog,
            sa,
            &lm,
            &cert,
            max_cosets,
            DEFAULT_GROUP_BUDGET,
        )
        .map_err(separate_failure)?;
        let generators: Value = q
            .generator_names
            .iter()
            .zip(&q.generator_images)
            .map(|(name, &image)| json!({ "name": name, "image": q.group.label(image) }))
            .collect();
        detail["quotient"] = json!({
            "cosets": q.cosets,
            "order": q.group.order(),
            "generators": generators,
            "word_image": q.group.label(q.word_image),
        });
    }
    Ok(Report { command: "separate", verdict: "separated", detail })
}

/// Build the level homomorphism the descent would use first, skipping
/// trivial top levels, together with how many levels were skipped.
fn top_level_hom(
    gog: &GraphOfGroups,
    sd: &SpanningData,
    sa: &SeriesAssignment,
    lm: &LevelMaps,
) -> Option<(SeriesAssignment, LevelMaps, LevelHom, usize)> {
    let mut sa = sa.clone();
    let mut lm = lm.clone();
    let mut skipped = 0;
    loop {
        if let Some(phi) = LevelHom::build(gog, sd, &sa, &lm) {
            return Some((sa, lm, phi, skipped));
        }
        sa = sa.drop_top_level()?;
        lm = lm.drop_top_level()?;
        skipped += 1;
    }
}

fn cmd_cover(input: &Path, output: Option<&Path>, dot: Option<&Path>) -> Result<Report, Failure> {
    let problem = io::load_problem(input)?;
    let (sa, lm) = match series_and_maps(&problem)? {
        Ok(pair) => pair,
        Err(detail) => {
            return Ok(Report { command: "cover", verdict: "incompatible", detail });
        }
    };
    let gog = &problem.gog;
    let sd = SpanningData::new(gog.graph())
        .map_err(|e| Failure::new(EXIT_INTERNAL, format!("spanning data vanished: {e}")))?;
    let Some((sa_top, _lm_top, phi, skipped)) = top_level_hom(gog, &sd, sa, &lm) else {
        return Ok(Report {
            command: "cover",
            verdict: "trivial-group",
            detail: json!({
                "reason": "every chief factor is trivial and the graph is a tree, \
                           so the fundamental group is trivial and has no index-p cover",
            }),
        });
    };
    let cover: KernelCover = build_kernel_cover(gog, &sa_top, &phi)
        .map_err(|e| Failure::new(EXIT_INTERNAL, e.to_string()))?;
    verify_cover(gog, &sa_top, &phi, &cover)
        .map_err(|e| Failure::new(EXIT_INTERNAL, format!("cover failed re-verification: {e}")))?;
    if let Some(path) = output {
        let file =
            io::decompile(&cover.gog, Some(&cover.series), Some(&cover.level_maps), &Default::default());
        write_file(path, &io::problem_to_string(&file))?;
    }
    if let Some(path) = dot {
        write_file(path, &io::graph_dot(&cover.gog))?;
    }
    let graph = cover.gog.graph();
    Ok(Report {
        command: "cover",
        verdict: "built",
        detail: json!({
            "skipped_levels": skipped,
            "vertices": graph.vertex_count(),
            "edge_pairs": graph.pair_count(),
            "graph_rank": cover.graph_rank(),
            "series_levels": cover.series.length(),
        }),
    })
}

fn cmd_tree(
    input: &Path,
    radius: usize,
    max_nodes: usize,
    basepoint: Option<&str>,
    dot: Option<&Path>,
) -> Result<Report, Failure> {
    let problem = io::load_problem(input)?;
    let gog = &problem.gog;
    let graph = gog.graph();
    let sd = SpanningData::new(graph)
        .map_err(|e| Failure::new(EXIT_INTERNAL, format!("spanning data vanished: {e}")))?;
    let center = match basepoint {
        None => 0,
        Some(name) => graph.vertex_by_name(name).ok_or_else(|| {
            Failure::new(EXIT_INPUT, format!("no vertex named {name:?}"))
        })?,
    };
    let ball = match gog.tree_ball(&sd, center, radius, max_nodes) {
        Ok(ball) => ball,
        Err(GogError::Budget { limit }) => {
            return Err(Failure::new(
                EXIT_BUDGET,
                format!("tree ball exceeded the {limit}-node budget; raise --max-nodes"),
            ));
        }
        Err(e) => return Err(Failure::new(EXIT_INTERNAL, e.to_string())),
    };
    if let Some(path) = dot {
        write_file(path, &io::ball_dot(gog, &ball))?;
    }
    Ok(Report {
        command: "tree",
        verdict: "built",
        detail: json!({
            "center": graph.vertex_name(center),
            "radius": radius,
            "nodes": ball.nodes.len(),
            "nodes_at_depth": (0..=radius).map(|d| ball.count_at_depth(d)).collect::<Vec<_>>(),
        }),
    })
}

fn cmd_freesep(prime: u32, rank: usize, word: &str, max_degree: usize) -> Result<Report, Failure> {
    if !io::is_prime(prime) {
        return Err(Failure::new(EXIT_INPUT, format!("--prime {prime} is not a prime number")));
    }
    let letters = io::parse_free_word(word, rank)?;
    let verdict = separate_free(prime, rank, &letters, max_degree).map_err(|e| match e {
        MagnusError::DegreeCapped { .. } => Failure::new(EXIT_BUDGET, e.to_string()),
        MagnusError::BadLetter { .. } => Failure::new(EXIT_INPUT, e.to_string()),
    })?;
    match verdict {
        FreeVerdict::Trivial => Ok(Report {
            command: "freesep",
            verdict: "trivial",
            detail: json!({ "reason": "the word freely reduces to the identity" }),
        }),
        FreeVerdict::Witness(witness) => {
            match check_witness(prime, rank, &letters, &witness) {
                Ok(true) => {}
                Ok(false) => {
                    return Err(Failure::new(
                        EXIT_INTERNAL,
                        "witness failed the independent matrix re-check",
                    ));
                }
                Err(e) => return Err(Failure::new(EXIT_INTERNAL, e.to_string())),
            }
            Ok(Report {
                command: "freesep",
                verdict: "separated",
                detail: json!({
                    "degree": witness.degree(),
                    "monomial": witness.monomial.iter().map(|&j| format!("X{}", j + 1)).collect::<Vec<_>>(),
                    "coefficient": witness.coefficient.value(),
                }),
            })
        }
    }
}
