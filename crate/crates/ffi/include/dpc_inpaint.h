/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef DPC_INPAINT_H
#define DPC_INPAINT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DpcStatus {
  DPC_STATUS_OK = 0,
  DPC_STATUS_NULL_POINTER = 1,
  DPC_STATUS_INVALID_ARGUMENT = 2,
  DPC_STATUS_IO = 3,
  DPC_STATUS_PARSE = 4,
  DPC_STATUS_SHAPE = 5,
  // A stage of the algorithm could not proceed (no source, singular
  // system, solver failure and the like).
  DPC_STATUS_ALGORITHM = 6,
  DPC_STATUS_BUFFER_TOO_SMALL = 7,
  DPC_STATUS_PANIC = 8,
} DpcStatus;

// A point cloud.
typedef struct DpcCloud DpcCloud;

// Pipeline settings.
typedef struct DpcConfig DpcConfig;

// Removed points and hole seeds per frame.
typedef struct DpcMask DpcMask;

// An ordered list of frames.
typedef struct DpcSequence DpcSequence;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *dpc_last_error(void);

// Library version as a static nul-terminated string.
const char *dpc_version(void);

// Cloud from `n` interleaved x, y, z coordinates.
enum DpcStatus dpc_cloud_new(const double *xyz, size_t n, struct DpcCloud **out);

enum DpcStatus dpc_cloud_load_ply(const char *path, struct DpcCloud **out);

// Writes binary little-endian PLY unless `ascii` is nonzero.
enum DpcStatus dpc_cloud_save_ply(const struct DpcCloud *cloud, const char *path, int32_t ascii);

// Number of points, 0 for a null handle.
size_t dpc_cloud_len(const struct DpcCloud *cloud);

// Copies the coordinates into `xyz`, which must hold `3 * len` doubles.
enum DpcStatus dpc_cloud_points(const struct DpcCloud *cloud, double *xyz, size_t capacity);

void dpc_cloud_free(struct DpcCloud *cloud);

enum DpcStatus dpc_sequence_new(struct DpcSequence **out);

// Appends a copy of `cloud`.
enum DpcStatus dpc_sequence_push(struct DpcSequence *seq, const struct DpcCloud *cloud);

size_t dpc_sequence_len(const struct DpcSequence *seq);

// Copy of frame `f` as a new cloud.
enum DpcStatus dpc_sequence_frame(const struct DpcSequence *seq, size_t f, struct DpcCloud **out);

void dpc_sequence_free(struct DpcSequence *seq);

enum DpcStatus dpc_config_default(struct DpcConfig **out);

// Configuration from a JSON object; missing fields take their defaults.
enum DpcStatus dpc_config_from_json(const char *json, struct DpcConfig **out);

enum DpcStatus dpc_config_set_weights(struct DpcConfig *cfg,
                                      double alpha,
                                      double beta,
                                      double gamma);

// Leaves wall-clock times out of reports when `enabled` is zero.
enum DpcStatus dpc_config_set_timing(struct DpcConfig *cfg, int32_t enabled);

void dpc_config_free(struct DpcConfig *cfg);

enum DpcStatus dpc_mask_load(const char *path, struct DpcMask **out);

enum DpcStatus dpc_mask_save(const struct DpcMask *mask, const char *path);

// Total number of removed points over all frames.
size_t dpc_mask_removed(const struct DpcMask *mask);

void dpc_mask_free(struct DpcMask *mask);

// Removes seeded balls of `radius` around `n_holes` points from every frame.
enum DpcStatus dpc_synthesize_holes(const struct DpcSequence *seq,
                                    size_t n_holes,
                                    double radius,
                                    uint64_t seed,
                                    struct DpcSequence **corrupted,
                                    struct DpcMask **mask);

// Inpaints every frame. `mask` may be null, in which case holes are
// detected from point density. When `report_json` is not null it receives
// the per-cube report, to be released with [`dpc_string_free`].
enum DpcStatus dpc_inpaint_sequence(const struct DpcSequence *seq,
                                    const struct DpcConfig *cfg,
                                    const struct DpcMask *mask,
                                    struct DpcSequence **out,
                                    char **report_json);

void dpc_string_free(char *s);

// Symmetric point-to-plane PSNR of `test` against `reference`, in dB.
enum DpcStatus dpc_gpsnr(const struct DpcCloud *reference,
                         const struct DpcCloud *test,
                         double *out);

// Normalized symmetric mean nearest-neighbour distance.
enum DpcStatus dpc_nshd(const struct DpcCloud *reference, const struct DpcCloud *test, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DPC_INPAINT_H */
