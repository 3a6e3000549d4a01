#ifndef GITCLOCK_H
#define GITCLOCK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define GC_DETECT_OLD 1

#define GC_DETECT_FUTURE (1 << 1)

#define GC_DETECT_OUT_OF_ORDER (1 << 2)

#define GC_DETECT_SIGNATURES (1 << 3)

#define GC_DETECT_VERIFIED (1 << 4)

#define GC_DETECT_ALL 31

typedef enum GcDateField {
  GC_DATE_FIELD_COMMITTER = 0,
  GC_DATE_FIELD_AUTHOR = 1,
} GcDateField;

typedef enum GcStatus {
  GC_STATUS_OK = 0,
  GC_STATUS_NULL_POINTER = 1,
  GC_STATUS_INVALID_UTF8 = 2,
  GC_STATUS_INVALID_ARGUMENT = 3,
  GC_STATUS_PARSE_ERROR = 4,
  GC_STATUS_POLICY_ERROR = 5,
  GC_STATUS_AUDIT_ERROR = 6,
  GC_STATUS_PANIC = 7,
} GcStatus;

typedef enum GcFormat {
  GC_FORMAT_NDJSON = 0,
  GC_FORMAT_GITLOG = 1,
} GcFormat;

typedef enum GcAnomalyKind {
  GC_ANOMALY_KIND_OLD = 0,
  GC_ANOMALY_KIND_FUTURE = 1,
  GC_ANOMALY_KIND_OUT_OF_ORDER_LINEAR = 2,
  GC_ANOMALY_KIND_OUT_OF_ORDER_PARENT = 3,
  GC_ANOMALY_KIND_TOOL_SIGNATURE = 4,
  GC_ANOMALY_KIND_VERIFIED_MISMATCH = 5,
} GcAnomalyKind;

// The result of [`gc_audit_run`].
typedef struct GcAudit GcAudit;

// A parsed commit export.
typedef struct GcDataset GcDataset;

// Detector settings. Dates are epoch seconds.
typedef struct GcAuditConfig {
  // Bitwise OR of `GC_DETECT_*`.
  uint32_t detectors;
  int64_t old_cutoff;
  bool has_snapshot;
  int64_t snapshot;
  bool include_merges;
  enum GcDateField date_field;
} GcAuditConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or NULL. The
// pointer stays valid until the next call into this library.
const char *gc_last_error(void);

// Defaults: every detector except `future`, the 1990-11-19 old cutoff,
// merges excluded, committer dates.
struct GcAuditConfig gc_audit_config_default(void);

// Parses `len` bytes of NDJSON or gitlog export. `repo` names the
// repository for gitlog input and may be NULL. Malformed records are
// skipped and counted.
//
// # Safety
// `data` must point to `len` readable bytes; `repo` must be NULL or a
// NUL-terminated string; `out` must be writable.
enum GcStatus gc_dataset_parse(const uint8_t *data,
                               uintptr_t len,
                               enum GcFormat format,
                               const char *repo,
                               struct GcDataset **out);

// Number of parsed records, or 0 for NULL.
//
// # Safety
// `ds` must be NULL or a live dataset handle.
uintptr_t gc_dataset_len(const struct GcDataset *ds);

// Number of malformed records skipped while parsing.
//
// # Safety
// `ds` must be NULL or a live dataset handle.
uintptr_t gc_dataset_malformed(const struct GcDataset *ds);

// Applies the policies in `policy_toml` (the policy file format) and
// returns a new dataset holding the survivors. `config` supplies the
// date field and merge handling and may be NULL for the defaults.
// `removed` receives the number of commits removed and may be NULL.
//
// # Safety
// `ds` must be a live dataset handle, `policy_toml` a NUL-terminated
// string and `out` writable.
enum GcStatus gc_dataset_filter(const struct GcDataset *ds,
                                const char *policy_toml,
                                const struct GcAuditConfig *config,
                                uintptr_t *removed,
                                struct GcDataset **out);

// # Safety
// `ds` must be NULL or a handle not yet freed.
void gc_dataset_free(struct GcDataset *ds);

// Runs the detectors over `ds`. A NULL `config` means
// [`gc_audit_config_default`].
//
// # Safety
// `ds` must be a live dataset handle, `config` NULL or readable, `out`
// writable.
enum GcStatus gc_audit_run(const struct GcDataset *ds,
                           const struct GcAuditConfig *config,
                           struct GcAudit **out);

// Distinct commits flagged with `kind`.
//
// # Safety
// `audit` must be NULL or a live audit handle.
uintptr_t gc_audit_count(const struct GcAudit *audit, enum GcAnomalyKind k);

// Distinct commits flagged with any kind.
//
// # Safety
// `audit` must be NULL or a live audit handle.
uintptr_t gc_audit_total(const struct GcAudit *audit);

// The full audit report as JSON. Free the result with [`gc_string_free`].
//
// # Safety
// `audit` must be a live audit handle and `out` writable.
enum GcStatus gc_audit_report_json(const struct GcAudit *audit, char **out);

// # Safety
// `audit` must be NULL or a handle not yet freed.
void gc_audit_free(struct GcAudit *audit);

// `YYYY-MM-DD HH:MM:SS UTC` for epoch seconds. Free with [`gc_string_free`].
char *gc_format_utc(int64_t epoch_seconds);

// # Safety
// `s` must be NULL or a string returned by this library and not yet freed.
void gc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GITCLOCK_H */
