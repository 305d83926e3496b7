//! C ABI over the separability toolkit: opaque handles in, status codes and
//! JSON strings out.
//!
//! Every fallible call returns a status code from the `PSEP_*` family.
//! `PSEP_OK` and `PSEP_NEGATIVE` are the two reachable verdicts — the
//! affirmative and the negative answer to the question the call poses —
//! while negative codes mean the call itself failed and
//! [`psep_last_error`] carries a message for this thread.
//!
//! Strings handed out through `*mut c_char` out-parameters are
//! NUL-terminated UTF-8 allocated here; release them with
//! [`psep_string_free`]. Handles are released with their matching `*_free`.
//! NULL is accepted everywhere and reported rather than dereferenced, and
//! panics are caught at the boundary and surface as [`PSEP_ERR_INTERNAL`],
//! so no call aborts the calling process.

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char};
use std::panic::{AssertUnwindSafe, catch_unwind};

use serde_json::{Value, json};

use psep::compat::{SearchOutcome, SeriesAssignment, check_compatibility, search_compatible};
use psep::cover::{LevelHom, build_kernel_cover, verify_cover};
use psep::gog::SpanningData;
use psep::io::{self, Problem, incompatibility_value, level_maps_value, series_value};
use psep::magnus::{FreeVerdict, MagnusError, check_witness, separate_free};
use psep::separate::{
    DEFAULT_DEGREE_CAP, SeparateError, SeparationCertificate, TerminalWitness, separate,
    verify_certificate,
};

/// The affirmative verdict: compatible, separated, found, built, verified.
pub const PSEP_OK: i32 = 0;
/// The negative verdict: incompatible, exhausted, trivial, or rejected.
pub const PSEP_NEGATIVE: i32 = 1;
/// A required pointer argument was NULL.
pub const PSEP_ERR_NULL_POINTER: i32 = -1;
/// A string argument was not valid UTF-8.
pub const PSEP_ERR_ENCODING: i32 = -2;
/// The input could not be parsed or fails validation.
pub const PSEP_ERR_INPUT: i32 = -3;
/// A search, degree, or coset budget ran out before any verdict was reached.
pub const PSEP_ERR_BUDGET: i32 = -4;
/// An internal invariant failed (including a panic caught at the boundary).
pub const PSEP_ERR_INTERNAL: i32 = -5;

/// A loaded, validated problem. Create with [`psep_problem_parse`]; release
/// with [`psep_problem_free`].
#[repr(C)]
pub struct PsepProblem {
    _private: [u8; 0],
}

/// A separation certificate. Created by [`psep_separate`] or
/// [`psep_certificate_parse`]; release with [`psep_certificate_free`].
#[repr(C)]
pub struct PsepCertificate {
    _private: [u8; 0],
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl std::fmt::Display) {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(text).ok());
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Run a call body with a clean error slot and a panic net.
fn guarded(f: impl FnOnce() -> i32) -> i32 {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_last_error("panic caught at the C boundary");
            PSEP_ERR_INTERNAL
        }
    }
}

/// # Safety
/// `p` must be NULL or point to a NUL-terminated string.
unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, i32> {
    if p.is_null() {
        set_last_error(format!("{what} is NULL"));
        return Err(PSEP_ERR_NULL_POINTER);
    }
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| {
        set_last_error(format!("{what} is not valid UTF-8"));
        PSEP_ERR_ENCODING
    })
}

/// Write an owned string through `out`; a NULL `out` means the caller
/// declined the payload, which is fine.
unsafe fn store_string(out: *mut *mut c_char, text: String) -> Result<(), i32> {
    if out.is_null() {
        return Ok(());
    }
    match CString::new(text) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            Ok(())
        }
        Err(_) => {
            set_last_error("payload contained an interior NUL byte");
            Err(PSEP_ERR_INTERNAL)
        }
    }
}

/// # Safety
/// `p` must be NULL or a live handle from this library.
unsafe fn problem_ref<'a>(p: *const PsepProblem) -> Result<&'a Problem, i32> {
    match unsafe { p.cast::<Problem>().as_ref() } {
        Some(r) => Ok(r),
        None => {
            set_last_error("problem handle is NULL");
            Err(PSEP_ERR_NULL_POINTER)
        }
    }
}

/// # Safety
/// `c` must be NULL or a live handle from this library.
unsafe fn certificate_ref<'a>(c: *const PsepCertificate) -> Result<&'a SeparationCertificate, i32> {
    match unsafe { c.cast::<SeparationCertificate>().as_ref() } {
        Some(r) => Ok(r),
        None => {
            set_last_error("certificate handle is NULL");
            Err(PSEP_ERR_NULL_POINTER)
        }
    }
}

/// Whether the problem's series data passes the compatibility conditions.
enum Readiness<'a> {
    Ready(&'a SeriesAssignment, psep::compat::LevelMaps),
    Incompatible(Value),
}

fn prepared(problem: &Problem) -> Result<Readiness<'_>, i32> {
    let Some(sa) = problem.series.as_ref() else {
        set_last_error("the problem carries no chief-series data; embed it or run a search");
        return Err(PSEP_ERR_INPUT);
    };
    match check_compatibility(&problem.gog, sa, problem.level_maps.as_ref()) {
        Ok(lm) => Ok(Readiness::Ready(sa, lm)),
        Err(e) => match incompatibility_value(&e) {
            Some(detail) => Ok(Readiness::Incompatible(detail)),
            None => {
                set_last_error(e);
                Err(PSEP_ERR_INPUT)
            }
        },
    }
}

fn separate_code(e: &SeparateError) -> i32 {
    match e {
        SeparateError::TrivialWord
        | SeparateError::Word(_)
        | SeparateError::Magnus(MagnusError::BadLetter { .. }) => PSEP_ERR_INPUT,
        SeparateError::Magnus(MagnusError::DegreeCapped { .. }) | SeparateError::Quotient(_) => {
            PSEP_ERR_BUDGET
        }
        _ => PSEP_ERR_INTERNAL,
    }
}

/// ABI revision of this header; bumped on any breaking change.
#[unsafe(no_mangle)]
pub extern "C" fn psep_abi_version() -> u32 {
    1
}

/// The problem-file format version this build reads and writes.
#[unsafe(no_mangle)]
pub extern "C" fn psep_format_version() -> u32 {
    io::FORMAT_VERSION
}

/// The message for the most recent failing call on this thread, or NULL when
/// that call succeeded. The caller owns the string; release it with
/// [`psep_string_free`].
#[unsafe(no_mangle)]
pub extern "C" fn psep_last_error() -> *mut c_char {
    LAST_ERROR
        .with(|slot| slot.borrow().as_ref().map_or(std::ptr::null_mut(), |m| m.clone().into_raw()))
}

/// Release a string allocated by this library. NULL is a no-op.
///
/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_string_free(s: *mut c_char) {
    if s.is_null() {
        return;
    }
    // SAFETY: the caller guarantees `s` came from this library and is unfreed.
    unsafe { drop(CString::from_raw(s)) };
}

/// Parse and fully validate a JSON problem document.
///
/// On `PSEP_OK` a new handle is written through `out`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for one write.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_problem_parse(
    json: *const c_char,
    out: *mut *mut PsepProblem,
) -> i32 {
    guarded(|| {
        let text = match unsafe { read_str(json, "json") } {
            Ok(t) => t,
            Err(code) => return code,
        };
        if out.is_null() {
            set_last_error("out is NULL");
            return PSEP_ERR_NULL_POINTER;
        }
        match io::parse_problem(text) {
            Ok(problem) => {
                unsafe { *out = Box::into_raw(Box::new(problem)).cast() };
                PSEP_OK
            }
            Err(e) => {
                set_last_error(e);
                PSEP_ERR_INPUT
            }
        }
    })
}

/// Release a problem handle. NULL is a no-op.
///
/// # Safety
/// `p` must be NULL or a handle from [`psep_problem_parse`], not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_problem_free(p: *mut PsepProblem) {
    if p.is_null() {
        return;
    }
    // SAFETY: the caller guarantees `p` came from this library and is unfreed.
    unsafe { drop(Box::from_raw(p.cast::<Problem>())) };
}

/// The prime of the loaded problem; 0 when the handle is NULL.
///
/// # Safety
/// `p` must be NULL or a live problem handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_problem_prime(p: *const PsepProblem) -> u32 {
    unsafe { p.cast::<Problem>().as_ref() }.map_or(0, |pr| pr.gog.prime())
}

/// Vertices in the problem's graph; 0 when the handle is NULL.
///
/// # Safety
/// `p` must be NULL or a live problem handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_problem_vertices(p: *const PsepProblem) -> usize {
    unsafe { p.cast::<Problem>().as_ref() }.map_or(0, |pr| pr.gog.graph().vertex_count())
}

/// Edge pairs in the problem's graph; 0 when the handle is NULL.
///
/// # Safety
/// `p` must be NULL or a live problem handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_problem_pairs(p: *const PsepProblem) -> usize {
    unsafe { p.cast::<Problem>().as_ref() }.map_or(0, |pr| pr.gog.graph().pair_count())
}

/// Serialize the problem — series, level maps, and named words included when
/// present — back into a problem-file JSON document.
///
/// # Safety
/// `p` must be a live problem handle; `out` must be valid for one write.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_problem_to_json(
    p: *const PsepProblem,
    out: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        let problem = match unsafe { problem_ref(p) } {
            Ok(r) => r,
            Err(code) => return code,
        };
        if out.is_null() {
            set_last_error("out is NULL");
            return PSEP_ERR_NULL_POINTER;
        }
        let file = io::decompile(
            &problem.gog,
            problem.series.as_ref(),
            problem.level_maps.as_ref(),
            &problem.words,
        );
        match unsafe { store_string(out, io::problem_to_string(&file)) } {
            Ok(()) => PSEP_OK,
            Err(code) => code,
        }
    })
}

/// Decide the chief-series compatibility conditions.
///
/// `PSEP_OK`: they hold; when `out_json` is non-NULL it receives
/// `{"verdict":"compatible","levels":…,"level_maps":…}` with the validated or
/// solved scalars. `PSEP_NEGATIVE`: they fail; the object names the condition,
/// the level, and the offending edge or holonomy value.
///
/// # Safety
/// `p` must be a live problem handle; `out_json` must be NULL or valid for
/// one write.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_check(p: *const PsepProblem, out_json: *mut *mut c_char) -> i32 {
    guarded(|| {
        let problem = match unsafe { problem_ref(p) } {
            Ok(r) => r,
            Err(code) => return code,
        };
        let (verdict, value) = match prepared(problem) {
            Ok(Readiness::Ready(sa, lm)) => (
                PSEP_OK,
                json!({
                    "verdict": "compatible",
                    "levels": sa.length(),
                    "level_maps": level_maps_value(&problem.gog, &lm),
                }),
            ),
            Ok(Readiness::Incompatible(mut detail)) => {
                detail["verdict"] = Value::from("incompatible");
                (PSEP_NEGATIVE, detail)
            }
            Err(code) => return code,
        };
        match unsafe { store_string(out_json, value.to_string()) } {
            Ok(()) => verdict,
            Err(code) => code,
        }
    })
}

/// Search chief-series assignments for one satisfying both conditions.
///
/// `PSEP_OK`: found — `out_json` (when non-NULL) receives
/// `{"verdict":"found","tried":…,"levels":…,"series":…,"level_maps":…,"problem":{…}}`
/// whose `"problem"` member is a complete document, reloadable through
/// [`psep_problem_parse`], with the found data embedded. `PSEP_NEGATIVE`: the
/// finite search space is exhausted and no assignment works.
/// `PSEP_ERR_BUDGET`: `budget` assignments were tried without a verdict.
///
/// # Safety
/// `p` must be a live problem handle; `out_json` must be NULL or valid for
/// one write.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_search(
    p: *const PsepProblem,
    budget: u64,
    out_json: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        let problem = match unsafe { problem_ref(p) } {
            Ok(r) => r,
            Err(code) => return code,
        };
        let (verdict, value) = match search_compatible(&problem.gog, budget) {
            SearchOutcome::Found { assignment, level_maps, tried } => {
                let file = io::decompile(
                    &problem.gog,
                    Some(&assignment),
                    Some(&level_maps),
                    &problem.words,
                );
                let embedded = match serde_json::to_value(&file) {
                    Ok(v) => v,
                    Err(e) => {
                        set_last_error(e);
                        return PSEP_ERR_INTERNAL;
                    }
                };
                (
                    PSEP_OK,
                    json!({
                        "verdict": "found",
                        "tried": tried,
                        "levels": assignment.length(),
                        "series": series_value(&problem.gog, &assignment),
                        "level_maps": level_maps_value(&problem.gog, &level_maps),
                        "problem": embedded,
                    }),
                )
            }
            SearchOutcome::Exhausted { tried } => (
                PSEP_NEGATIVE,
                json!({
                    "verdict": "exhausted",
                    "tried": tried,
                    "reason": "no assignment of chief series satisfies both conditions",
                }),
            ),
            SearchOutcome::BudgetExceeded { tried } => {
                set_last_error(format!(
                    "search budget exhausted after {tried} assignments; raise the budget"
                ));
                return PSEP_ERR_BUDGET;
            }
        };
        match unsafe { store_string(out_json, value.to_string()) } {
            Ok(()) => verdict,
            Err(code) => code,
        }
    })
}

/// Separate a nontrivial word into a finite p-quotient, yielding a
/// certificate of the descent.
///
/// `word` is either the name of a word stored in the problem file or an
/// inline word (whitespace-separated letters: `vertex:element`,
/// `vertex:element^k`, `edge`, `edge^-k`). `max_degree` caps the free-group
/// stage; 0 means the built-in default. The returned certificate has already
/// been re-verified from scratch.
///
/// `PSEP_OK`: separated — `*out` receives the certificate.
/// `PSEP_NEGATIVE`: the compatibility conditions fail, so the descent never
/// starts; nothing is written (run [`psep_check`] for the details).
/// `PSEP_ERR_INPUT` covers unknown or identity words.
///
/// # Safety
/// `p` must be a live problem handle, `word` a NUL-terminated string, and
/// `out` valid for one write.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_separate(
    p: *const PsepProblem,
    word: *const c_char,
    max_degree: usize,
    out: *mut *mut PsepCertificate,
) -> i32 {
    guarded(|| {
        let problem = match unsafe { problem_ref(p) } {
            Ok(r) => r,
            Err(code) => return code,
        };
        let spec = match unsafe { read_str(word, "word") } {
            Ok(t) => t,
            Err(code) => return code,
        };
        if out.is_null() {
            set_last_error("out is NULL");
            return PSEP_ERR_NULL_POINTER;
        }
        let (sa, lm) = match prepared(problem) {
            Ok(Readiness::Ready(sa, lm)) => (sa, lm),
            Ok(Readiness::Incompatible(_)) => return PSEP_NEGATIVE,
            Err(code) => return code,
        };
        let gword = match problem.words.get(spec) {
            Some(w) => w.clone(),
            None => match io::parse_word(&problem.gog, spec) {
                Ok(w) => w,
                Err(e) => {
                    set_last_error(format!(
                        "word {spec:?} names no word in the problem and does not parse inline: {e}"
                    ));
                    return PSEP_ERR_INPUT;
                }
            },
        };
        let cap = if max_degree == 0 { DEFAULT_DEGREE_CAP } else { max_degree };
        let cert = match separate(&problem.gog, sa, &lm, &gword, cap) {
            Ok(c) => c,
            Err(e) => {
                let code = separate_code(&e);
                set_last_error(e);
                return code;
            }
        };
        if let Err(e) = verify_certificate(&problem.gog, sa, &lm, &cert) {
            set_last_error(format!("emitted certificate failed re-verification: {e}"));
            return PSEP_ERR_INTERNAL;
        }
        unsafe { *out = Box::into_raw(Box::new(cert)).cast() };
        PSEP_OK
    })
}

/// Parse a certificate from JSON. Structure only — run [`psep_verify`]
/// against a problem to check the mathematics.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for one write.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_certificate_parse(
    json: *const c_char,
    out: *mut *mut PsepCertificate,
) -> i32 {
    guarded(|| {
        let text = match unsafe { read_str(json, "json") } {
            Ok(t) => t,
            Err(code) => return code,
        };
        if out.is_null() {
            set_last_error("out is NULL");
            return PSEP_ERR_NULL_POINTER;
        }
        match serde_json::from_str::<SeparationCertificate>(text) {
            Ok(cert) => {
                unsafe { *out = Box::into_raw(Box::new(cert)).cast() };
                PSEP_OK
            }
            Err(e) => {
                set_last_error(e);
                PSEP_ERR_INPUT
            }
        }
    })
}

/// Serialize a certificate to JSON.
///
/// # Safety
/// `c` must be a live certificate handle; `out` must be valid for one write.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_certificate_to_json(
    c: *const PsepCertificate,
    out: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        let cert = match unsafe { certificate_ref(c) } {
            Ok(r) => r,
            Err(code) => return code,
        };
        if out.is_null() {
            set_last_error("out is NULL");
            return PSEP_ERR_NULL_POINTER;
        }
        let text = match serde_json::to_string_pretty(cert) {
            Ok(t) => t,
            Err(e) => {
                set_last_error(e);
                return PSEP_ERR_INTERNAL;
            }
        };
        match unsafe { store_string(out, text) } {
            Ok(()) => PSEP_OK,
            Err(code) => code,
        }
    })
}

/// Total descent depth of the certificate (kernel-cover steps, plus one when
/// it bottoms out in a free-group witness); 0 when the handle is NULL.
///
/// # Safety
/// `c` must be NULL or a live certificate handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_certificate_depth(c: *const PsepCertificate) -> usize {
    unsafe { c.cast::<SeparationCertificate>().as_ref() }
        .map_or(0, |cert| cert.steps.len() + usize::from(matches!(cert.terminal, TerminalWitness::Free { .. })))
}

/// The prime the certificate separates at; 0 when the handle is NULL.
///
/// # Safety
/// `c` must be NULL or a live certificate handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_certificate_prime(c: *const PsepCertificate) -> u32 {
    unsafe { c.cast::<SeparationCertificate>().as_ref() }.map_or(0, |cert| cert.prime)
}

/// Release a certificate handle. NULL is a no-op.
///
/// # Safety
/// `c` must be NULL or a handle produced by this library, not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_certificate_free(c: *mut PsepCertificate) {
    if c.is_null() {
        return;
    }
    // SAFETY: the caller guarantees `c` came from this library and is unfreed.
    unsafe { drop(Box::from_raw(c.cast::<SeparationCertificate>())) };
}

/// Re-check every step of a certificate against a problem from scratch.
///
/// `PSEP_OK`: everything reproduces. `PSEP_NEGATIVE`: the certificate is
/// rejected; when `out_reason` is non-NULL it receives the first discrepancy.
/// The problem must itself carry compatible series data (`PSEP_ERR_INPUT`
/// otherwise) — a certificate only means something over a specific problem.
///
/// # Safety
/// `p` and `c` must be live handles; `out_reason` must be NULL or valid for
/// one write.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_verify(
    p: *const PsepProblem,
    c: *const PsepCertificate,
    out_reason: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        let problem = match unsafe { problem_ref(p) } {
            Ok(r) => r,
            Err(code) => return code,
        };
        let cert = match unsafe { certificate_ref(c) } {
            Ok(r) => r,
            Err(code) => return code,
        };
        let (sa, lm) = match prepared(problem) {
            Ok(Readiness::Ready(sa, lm)) => (sa, lm),
            Ok(Readiness::Incompatible(_)) => {
                set_last_error("the problem's series data fails the compatibility conditions");
                return PSEP_ERR_INPUT;
            }
            Err(code) => return code,
        };
        match verify_certificate(&problem.gog, sa, &lm, cert) {
            Ok(()) => PSEP_OK,
            Err(e) => match unsafe { store_string(out_reason, e.to_string()) } {
                Ok(()) => PSEP_NEGATIVE,
                Err(code) => code,
            },
        }
    })
}

/// Build the kernel cover at the highest non-trivial level: the index-p
/// subgroup cut out by the level homomorphism, realized as a graph of groups
/// of its own.
///
/// `PSEP_OK`: built — `out_json` (when non-NULL) receives
/// `{"verdict":"built","graph_rank":…,"problem":{…}}` whose `"problem"`
/// member reloads through [`psep_problem_parse`]. `PSEP_NEGATIVE`: there is
/// nothing to cover — the conditions fail or the fundamental group is
/// trivial; the object's `"verdict"` says which.
///
/// # Safety
/// `p` must be a live problem handle; `out_json` must be NULL or valid for
/// one write.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_cover(p: *const PsepProblem, out_json: *mut *mut c_char) -> i32 {
    guarded(|| {
        let problem = match unsafe { problem_ref(p) } {
            Ok(r) => r,
            Err(code) => return code,
        };
        let (sa, lm) = match prepared(problem) {
            Ok(Readiness::Ready(sa, lm)) => (sa, lm),
            Ok(Readiness::Incompatible(mut detail)) => {
                detail["verdict"] = Value::from("incompatible");
                return match unsafe { store_string(out_json, detail.to_string()) } {
                    Ok(()) => PSEP_NEGATIVE,
                    Err(code) => code,
                };
            }
            Err(code) => return code,
        };
        let gog = &problem.gog;
        let sd = match SpanningData::new(gog.graph()) {
            Ok(sd) => sd,
            Err(e) => {
                set_last_error(e);
                return PSEP_ERR_INTERNAL;
            }
        };
        // Walk down past trivial top levels until a level map exists.
        let mut sa_top = sa.clone();
        let mut lm_top = lm;
        let mut skipped = 0usize;
        let phi = loop {
            if let Some(phi) = LevelHom::build(gog, &sd, &sa_top, &lm_top) {
                break phi;
            }
            match (sa_top.drop_top_level(), lm_top.drop_top_level()) {
                (Some(sa_next), Some(lm_next)) => {
                    sa_top = sa_next;
                    lm_top = lm_next;
                    skipped += 1;
                }
                _ => {
                    let value = json!({
                        "verdict": "trivial-group",
                        "reason": "every chief factor is trivial and the graph is a tree, \
                                   so the fundamental group is trivial and has no index-p cover",
                    });
                    return match unsafe { store_string(out_json, value.to_string()) } {
                        Ok(()) => PSEP_NEGATIVE,
                        Err(code) => code,
                    };
                }
            }
        };
        let cover = match build_kernel_cover(gog, &sa_top, &phi) {
            Ok(c) => c,
            Err(e) => {
                set_last_error(e);
                return PSEP_ERR_INTERNAL;
            }
        };
        if let Err(e) = verify_cover(gog, &sa_top, &phi, &cover) {
            set_last_error(format!("cover failed re-verification: {e}"));
            return PSEP_ERR_INTERNAL;
        }
        let file =
            io::decompile(&cover.gog, Some(&cover.series), Some(&cover.level_maps), &Default::default());
        let embedded = match serde_json::to_value(&file) {
            Ok(v) => v,
            Err(e) => {
                set_last_error(e);
                return PSEP_ERR_INTERNAL;
            }
        };
        let graph = cover.gog.graph();
        let value = json!({
            "verdict": "built",
            "skipped_levels": skipped,
            "vertices": graph.vertex_count(),
            "edge_pairs": graph.pair_count(),
            "graph_rank": cover.graph_rank(),
            "series_levels": cover.series.length(),
            "problem": embedded,
        });
        match unsafe { store_string(out_json, value.to_string()) } {
            Ok(()) => PSEP_OK,
            Err(code) => code,
        }
    })
}

/// Separate a word of the free group of the given rank inside a finite
/// p-group quotient.
///
/// `word` uses the free-word grammar: `x1`, `x2'` (inverse), `x1^-2`, or
/// signed integers. `max_degree` caps the iterative deepening; 0 means the
/// built-in default.
///
/// `PSEP_OK`: `out_json` (when non-NULL) receives
/// `{"verdict":"separated","degree":…,"monomial":[…],"coefficient":…}`; the
/// witness has been re-checked through the independent matrix representation
/// first. `PSEP_NEGATIVE`: the word freely reduces to the identity, so no
/// quotient can separate it. `PSEP_ERR_BUDGET`: `max_degree` was reached
/// without a witness.
///
/// # Safety
/// `word` must be a NUL-terminated string; `out_json` must be NULL or valid
/// for one write.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn psep_freesep(
    prime: u32,
    rank: usize,
    word: *const c_char,
    max_degree: usize,
    out_json: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        let spec = match unsafe { read_str(word, "word") } {
            Ok(t) => t,
            Err(code) => return code,
        };
        if !io::is_prime(prime) {
            set_last_error(format!("{prime} is not a prime number"));
            return PSEP_ERR_INPUT;
        }
        let letters = match io::parse_free_word(spec, rank) {
            Ok(l) => l,
            Err(e) => {
                set_last_error(e);
                return PSEP_ERR_INPUT;
            }
        };
        let cap = if max_degree == 0 { DEFAULT_DEGREE_CAP } else { max_degree };
        let verdict = match separate_free(prime, rank, &letters, cap) {
            Ok(v) => v,
            Err(e @ MagnusError::DegreeCapped { .. }) => {
                set_last_error(e);
                return PSEP_ERR_BUDGET;
            }
            Err(e) => {
                set_last_error(e);
                return PSEP_ERR_INPUT;
            }
        };
        let (code, value) = match verdict {
            FreeVerdict::Trivial => (
                PSEP_NEGATIVE,
                json!({
                    "verdict": "trivial",
                    "reason": "the word freely reduces to the identity",
                }),
            ),
            FreeVerdict::Witness(witness) => {
                match check_witness(prime, rank, &letters, &witness) {
                    Ok(true) => {}
                    Ok(false) => {
                        set_last_error("witness failed the independent matrix re-check");
                        return PSEP_ERR_INTERNAL;
                    }
                    Err(e) => {
                        set_last_error(e);
                        return PSEP_ERR_INTERNAL;
                    }
                }
                (
                    PSEP_OK,
                    json!({
                        "verdict": "separated",
                        "degree": witness.degree(),
                        "monomial": witness
                            .monomial
                            .iter()
                            .map(|&j| format!("X{}", j + 1))
                            .collect::<Vec<_>>(),
                        "coefficient": witness.coefficient.value(),
                    }),
                )
            }
        };
        match unsafe { store_string(out_json, value.to_string()) } {
            Ok(()) => code,
            Err(c) => c,
        }
    })
}
