#ifndef PSEP_H
#define PSEP_H

/* Generated from the psep-capi crate by cbindgen; edit the Rust source instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// The affirmative verdict: compatible, separated, found, built, verified.
#define PSEP_OK 0

// The negative verdict: incompatible, exhausted, trivial, or rejected.
#define PSEP_NEGATIVE 1

// A required pointer argument was NULL.
#define PSEP_ERR_NULL_POINTER -1

// A string argument was not valid UTF-8.
#define PSEP_ERR_ENCODING -2

// The input could not be parsed or fails validation.
#define PSEP_ERR_INPUT -3

// A search, degree, or coset budget ran out before any verdict was reached.
#define PSEP_ERR_BUDGET -4

// An internal invariant failed (including a panic caught at the boundary).
#define PSEP_ERR_INTERNAL -5

// A loaded, validated problem. Create with [`psep_problem_parse`]; release
// with [`psep_problem_free`].
typedef struct {
  uint8_t _private[0];
} PsepProblem;

// A separation certificate. Created by [`psep_separate`] or
// [`psep_certificate_parse`]; release with [`psep_certificate_free`].
typedef struct {
  uint8_t _private[0];
} PsepCertificate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// ABI revision of this header; bumped on any breaking change.
uint32_t psep_abi_version(void);

// The problem-file format version this build reads and writes.
uint32_t psep_format_version(void);

// The message for the most recent failing call on this thread, or NULL when
// that call succeeded. The caller owns the string; release it with
// [`psep_string_free`].
char *psep_last_error(void);

// Release a string allocated by this library. NULL is a no-op.
//
// # Safety
// `s` must be NULL or a string returned by this library, not yet freed.
void psep_string_free(char *s);

// Parse and fully validate a JSON problem document.
//
// On `PSEP_OK` a new handle is written through `out`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid for one write.
int32_t psep_problem_parse(const char *json, PsepProblem **out);

// Release a problem handle. NULL is a no-op.
//
// # Safety
// `p` must be NULL or a handle from [`psep_problem_parse`], not yet freed.
void psep_problem_free(PsepProblem *p);

// The prime of the loaded problem; 0 when the handle is NULL.
//
// # Safety
// `p` must be NULL or a live problem handle.
uint32_t psep_problem_prime(const PsepProblem *p);

// Vertices in the problem's graph; 0 when the handle is NULL.
//
// # Safety
// `p` must be NULL or a live problem handle.
size_t psep_problem_vertices(const PsepProblem *p);

// Edge pairs in the problem's graph; 0 when the handle is NULL.
//
// # Safety
// `p` must be NULL or a live problem handle.
size_t psep_problem_pairs(const PsepProblem *p);

// Serialize the problem — series, level maps, and named words included when
// present — back into a problem-file JSON document.
//
// # Safety
// `p` must be a live problem handle; `out` must be valid for one write.
int32_t psep_problem_to_json(const PsepProblem *p, char **out);

// Decide the chief-series compatibility conditions.
//
// `PSEP_OK`: they hold; when `out_json` is non-NULL it receives
// `{"verdict":"compatible","levels":…,"level_maps":…}` with the validated or
// solved scalars. `PSEP_NEGATIVE`: they fail; the object names the condition,
// the level, and the offending edge or holonomy value.
//
// # Safety
// `p` must be a live problem handle; `out_json` must be NULL or valid for
// one write.
int32_t psep_check(const PsepProblem *p, char **out_json);

// Search chief-series assignments for one satisfying both conditions.
//
// `PSEP_OK`: found — `out_json` (when non-NULL) receives
// `{"verdict":"found","tried":…,"levels":…,"series":…,"level_maps":…,"problem":{…}}`
// whose `"problem"` member is a complete document, reloadable through
// [`psep_problem_parse`], with the found data embedded. `PSEP_NEGATIVE`: the
// finite search space is exhausted and no assignment works.
// `PSEP_ERR_BUDGET`: `budget` assignments were tried without a verdict.
//
// # Safety
// `p` must be a live problem handle; `out_json` must be NULL or valid for
// one write.
int32_t psep_search(const PsepProblem *p, uint64_t budget, char **out_json);

// Separate a nontrivial word into a finite p-quotient, yielding a
// certificate of the descent.
//
// `word` is either the name of a word stored in the problem file or an
// inline word (whitespace-separated letters: `vertex:element`,
// `vertex:element^k`, `edge`, `edge^-k`). `max_degree` caps the free-group
// stage; 0 means the built-in default. The returned certificate has already
// been re-verified from scratch.
//
// `PSEP_OK`: separated — `*out` receives the certificate.
// `PSEP_NEGATIVE`: the compatibility conditions fail, so the descent never
// starts; nothing is written (run [`psep_check`] for the details).
// `PSEP_ERR_INPUT` covers unknown or identity words.
//
// # Safety
// `p` must be a live problem handle, `word` a NUL-terminated string, and
// `out` valid for one write.
int32_t psep_separate(const PsepProblem *p,
                      const char *word,
                      size_t max_degree,
                      PsepCertificate **out);

// Parse a certificate from JSON. Structure only — run [`psep_verify`]
// against a problem to check the mathematics.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid for one write.
int32_t psep_certificate_parse(const char *json, PsepCertificate **out);

// Serialize a certificate to JSON.
//
// # Safety
// `c` must be a live certificate handle; `out` must be valid for one write.
int32_t psep_certificate_to_json(const PsepCertificate *c, char **out);

// Total descent depth of the certificate (kernel-cover steps, plus one when
// it bottoms out in a free-group witness); 0 when the handle is NULL.
//
// # Safety
// `c` must be NULL or a live certificate handle.
size_t psep_certificate_depth(const PsepCertificate *c);

// The prime the certificate separates at; 0 when the handle is NULL.
//
// # Safety
// `c` must be NULL or a live certificate handle.
uint32_t psep_certificate_prime(const PsepCertificate *c);

// Release a certificate handle. NULL is a no-op.
//
// # Safety
// `c` must be NULL or a handle produced by this library, not yet freed.
void psep_certificate_free(PsepCertificate *c);

// Re-check every step of a certificate against a problem from scratch.
//
// `PSEP_OK`: everything reproduces. `PSEP_NEGATIVE`: the certificate is
// rejected; when `out_reason` is non-NULL it receives the first discrepancy.
// The problem must itself carry compatible series data (`PSEP_ERR_INPUT`
// otherwise) — a certificate only means something over a specific problem.
//
// # Safety
// `p` and `c` must be live handles; `out_reason` must be NULL or valid for
// one write.
int32_t psep_verify(const PsepProblem *p, const PsepCertificate *c, char **out_reason);

// Build the kernel cover at the highest non-trivial level: the index-p
// subgroup cut out by the level homomorphism, realized as a graph of groups
// of its own.
//
// `PSEP_OK`: built — `out_json` (when non-NULL) receives
// `{"verdict":"built","graph_rank":…,"problem":{…}}` whose `"problem"`
// member reloads through [`psep_problem_parse`]. `PSEP_NEGATIVE`: there is
// nothing to cover — the conditions fail or the fundamental group is
// trivial; the object's `"verdict"` says which.
//
// # Safety
// `p` must be a live problem handle; `out_json` must be NULL or valid for
// one write.
int32_t psep_cover(const PsepProblem *p, char **out_json);

// Separate a word of the free group of the given rank inside a finite
// p-group quotient.
//
// `word` uses the free-word grammar: `x1`, `x2'` (inverse), `x1^-2`, or
// signed integers. `max_degree` caps the iterative deepening; 0 means the
// built-in default.
//
// `PSEP_OK`: `out_json` (when non-NULL) receives
// `{"verdict":"separated","degree":…,"monomial":[…],"coefficient":…}`; the
// witness has been re-checked through the independent matrix representation
// first. `PSEP_NEGATIVE`: the word freely reduces to the identity, so no
// quotient can separate it. `PSEP_ERR_BUDGET`: `max_degree` was reached
// without a witness.
//
// # Safety
// `word` must be a NUL-terminated string; `out_json` must be NULL or valid
// for one write.
int32_t psep_freesep(uint32_t prime,
                     size_t rank,
                     const char *word,
                     size_t max_degree,
                     char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSEP_H */
