#ifndef IDG_H
#define IDG_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Load flag: rescale rows within 1e-6 of summing to one.
#define IDG_LOAD_RENORMALIZE 1

// Load flag: add no-forgetting arcs before validating.
#define IDG_LOAD_COMPLETE_NO_FORGETTING 2

// Load flag: skip full validation (structural checks still apply).
#define IDG_LOAD_SKIP_VALIDATION 4

// Report format for `idg_solution_report`.
#define IDG_FORMAT_TEXT 0

#define IDG_FORMAT_JSON 1

// Result of every fallible call.
typedef enum IdgStatus {
  IDG_STATUS_OK = 0,
  // A required pointer argument was null.
  IDG_STATUS_NULL_POINTER = 1,
  // A string argument was not UTF-8, or a result contained a NUL byte.
  IDG_STATUS_INVALID_STRING = 2,
  // The document is not well-formed JSON or has the wrong shape.
  IDG_STATUS_PARSE_ERROR = 3,
  // The diagram violates an invariant.
  IDG_STATUS_INVALID_DIAGRAM = 4,
  // A transform or query precondition failed.
  IDG_STATUS_PRECONDITION = 5,
  // A named node does not exist.
  IDG_STATUS_UNKNOWN_NODE = 6,
  // The computation exceeds a size bound.
  IDG_STATUS_TOO_LARGE = 7,
  // An internal invariant failed.
  IDG_STATUS_INTERNAL = 8,
  // A panic was caught at the boundary.
  IDG_STATUS_PANIC = 9,
} IdgStatus;

// Opaque diagram handle.
typedef struct IdgDiagram IdgDiagram;

// Opaque solution handle.
typedef struct IdgSolution IdgSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *idg_version(void);

// Message of the last error on this thread, or null. Valid until the next
// call into the library on the same thread.
const char *idg_last_error(void);

// Machine-readable code of the last error on this thread (for example
// `REVERSAL_WOULD_CYCLE`), or null.
const char *idg_last_error_code(void);

// Release a string returned by this library. Null is ignored.
//
// # Safety
// `s` is null or was returned by this library and not yet freed.
void idg_string_free(char *s);

// Parse an `.idg.json` document of `len` bytes. `flags` is a bitwise OR of
// the `IDG_LOAD_*` constants.
//
// # Safety
// `bytes` points to `len` readable bytes; `out` is writable.
enum IdgStatus idg_diagram_load(const uint8_t *bytes,
                                size_t len,
                                uint32_t flags,
                                struct IdgDiagram **out);

// Serialize to an `.idg.json` document (free with `idg_string_free`).
//
// # Safety
// `d` is a live handle; `out` is writable.
enum IdgStatus idg_diagram_save(const struct IdgDiagram *d, char **out);

// # Safety
// `d` is null or a handle not yet freed.
void idg_diagram_free(struct IdgDiagram *d);

// Number of nodes, or 0 for a null handle.
//
// # Safety
// `d` is null or a live handle.
size_t idg_diagram_node_count(const struct IdgDiagram *d);

// Validate. Writes the number of violations to `count`; if `report` is
// non-null it receives the violations as a JSON array.
//
// # Safety
// `d` is a live handle; `count` is writable; `report` is null or writable.
enum IdgStatus idg_diagram_validate(const struct IdgDiagram *d, size_t *count, char **report);

// Reverse the arc `from -> to` between chance nodes into a new diagram.
//
// # Safety
// `d` is a live handle; `from`/`to` are NUL-terminated; `out` is writable.
enum IdgStatus idg_diagram_reverse_arc(const struct IdgDiagram *d,
                                       const char *from,
                                       const char *to,
                                       struct IdgDiagram **out);

// Let decision `to` observe `from`, into a new diagram.
//
// # Safety
// As for `idg_diagram_reverse_arc`.
enum IdgStatus idg_diagram_add_informational_arc(const struct IdgDiagram *d,
                                                 const char *from,
                                                 const char *to,
                                                 struct IdgDiagram **out);

// Remove `node`: deleted if barren, otherwise absorbed into the value node
// by expectation (chance) or maximization (decision).
//
// # Safety
// `d` is a live handle; `node` is NUL-terminated; `out` is writable.
enum IdgStatus idg_diagram_remove_node(const struct IdgDiagram *d,
                                       const char *node,
                                       struct IdgDiagram **out);

// Apply a transform given as JSON, e.g.
// `{"kind": "reverse_arc", "from": "a", "to": "b"}`.
//
// # Safety
// `d` is a live handle; `json` is NUL-terminated; `out` is writable.
enum IdgStatus idg_diagram_apply_transform(const struct IdgDiagram *d,
                                           const char *json,
                                           struct IdgDiagram **out);

// Value of letting decision `to` observe `from`.
//
// # Safety
// `d` is a live handle; `from`/`to` are NUL-terminated; `out` is writable.
enum IdgStatus idg_value_of_information(const struct IdgDiagram *d,
                                        const char *from,
                                        const char *to,
                                        double *out);

// Solve by reductions.
//
// # Safety
// `d` is a live handle; `out` is writable.
enum IdgStatus idg_solve(const struct IdgDiagram *d, struct IdgSolution **out);

// # Safety
// `s` is null or a handle not yet freed.
void idg_solution_free(struct IdgSolution *s);

// Certain equivalent of the optimal strategy.
//
// # Safety
// `s` is a live handle; `out` is writable.
enum IdgStatus idg_solution_optimal_value(const struct IdgSolution *s, double *out);

// Optimal expected utility.
//
// # Safety
// `s` is a live handle; `out` is writable.
enum IdgStatus idg_solution_expected_utility(const struct IdgSolution *s, double *out);

// Number of decision policies (one per decision).
//
// # Safety
// `s` is null or a live handle.
size_t idg_solution_policy_count(const struct IdgSolution *s);

// Number of reduction steps taken.
//
// # Safety
// `s` is null or a live handle.
size_t idg_solution_step_count(const struct IdgSolution *s);

// Chosen alternative index of policy `policy` for information state
// `state` (mixed-radix index over the policy's domain).
//
// # Safety
// `s` is a live handle; `out` is writable.
enum IdgStatus idg_solution_policy_choice(const struct IdgSolution *s,
                                          size_t policy,
                                          size_t state,
                                          size_t *out);

// Render the solution report. `format` is `IDG_FORMAT_TEXT` or
// `IDG_FORMAT_JSON`; `precision` is the number of significant digits in
// text output (0 selects the default of 6).
//
// # Safety
// `s` is a live handle; `out` is writable.
enum IdgStatus idg_solution_report(const struct IdgSolution *s,
                                   uint32_t format,
                                   uint32_t precision,
                                   char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IDG_H */
