#ifndef HIVAE_H
#define HIVAE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum HivaeStatus {
  HIVAE_STATUS_OK = 0,
  /**
   * A null pointer, bad UTF-8 path, out-of-range index or invalid configuration.
   */
  HIVAE_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Malformed data, mask, types or model file, or a schema mismatch.
   */
  HIVAE_STATUS_DATA_ERROR = 2,
  /**
   * Training produced a non-finite loss.
   */
  HIVAE_STATUS_NUMERICAL_FAILURE = 3,
  HIVAE_STATUS_IO_ERROR = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  HIVAE_STATUS_PANIC = 5,
} HivaeStatus;

/**
 * A table together with its observed-cell mask.
 */
typedef struct HivaeDataset HivaeDataset;

/**
 * A trained model with its inference statistics.
 */
typedef struct HivaeModel HivaeModel;

/**
 * Training settings. Obtain defaults from [`hivae_train_config_default`].
 */
typedef struct HivaeTrainConfig {
  size_t dim_z;
  size_t dim_s;
  size_t dim_y;
  size_t layers;
  size_t hidden;
  size_t epochs;
  size_t batch_size;
  double tau_start;
  double tau_end;
  uint64_t seed;
  bool factorized;
  bool normalization;
} HivaeTrainConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *hivae_last_error_message(void);

/**
 * Defaults: K = 10, L = 10, 5 units per attribute, one layer, 2000 epochs,
 * batches of 1000, τ from 1 to 0.001, normalization on.
 */
struct HivaeTrainConfig hivae_train_config_default(void);

/**
 * Loads a CSV dataset. `mask_path` may be null, in which case empty cells are missing.
 *
 * # Safety
 * Path arguments must be null or nul-terminated strings; `out` must be writable.
 */
enum HivaeStatus hivae_dataset_load(const char *data_path,
                                    const char *types_path,
                                    const char *mask_path,
                                    struct HivaeDataset **out);

/**
 * The built-in seven-column correlated dataset, fully observed.
 *
 * # Safety
 * `out` must be writable.
 */
enum HivaeStatus hivae_dataset_synthetic(size_t rows, uint64_t seed, struct HivaeDataset **out);

/**
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t hivae_dataset_rows(const struct HivaeDataset *dataset);

/**
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t hivae_dataset_cols(const struct HivaeDataset *dataset);

/**
 * Reads one cell. `value` is unspecified when `observed` is false.
 *
 * # Safety
 * `dataset` must be a live handle; `value` and `observed` must be writable.
 */
enum HivaeStatus hivae_dataset_get(const struct HivaeDataset *dataset,
                                   size_t row,
                                   size_t col,
                                   double *value,
                                   bool *observed);

/**
 * Copies `dataset` and hides each observed cell of the copy with probability `fraction`.
 *
 * # Safety
 * `dataset` must be a live handle; `out` must be writable.
 */
enum HivaeStatus hivae_dataset_mcar(const struct HivaeDataset *dataset,
                                    double fraction,
                                    uint64_t seed,
                                    struct HivaeDataset **out);

/**
 * Writes the dataset as CSV with missing cells left empty.
 *
 * # Safety
 * `dataset` must be a live handle; `path` a nul-terminated string.
 */
enum HivaeStatus hivae_dataset_write_csv(const struct HivaeDataset *dataset, const char *path);

/**
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void hivae_dataset_free(struct HivaeDataset *dataset);

/**
 * Trains on the observed cells of `dataset`.
 *
 * # Safety
 * `dataset` and `config` must be valid pointers; `out` must be writable.
 */
enum HivaeStatus hivae_model_train(const struct HivaeDataset *dataset,
                                   const struct HivaeTrainConfig *config,
                                   struct HivaeModel **out);

/**
 * # Safety
 * `model` must be a live handle; `path` a nul-terminated string.
 */
enum HivaeStatus hivae_model_save(const struct HivaeModel *model, const char *path);

/**
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum HivaeStatus hivae_model_load(const char *path, struct HivaeModel **out);

/**
 * Fills every missing cell with the mode of its decoded distribution at the
 * MAP latent. The result is a new, fully observed dataset.
 *
 * # Safety
 * `model` and `dataset` must be live handles; `out` must be writable.
 */
enum HivaeStatus hivae_model_impute_map(const struct HivaeModel *model,
                                        const struct HivaeDataset *dataset,
                                        struct HivaeDataset **out);

/**
 * Fills every missing cell with one posterior-predictive draw.
 *
 * # Safety
 * `model` and `dataset` must be live handles; `out` must be writable.
 */
enum HivaeStatus hivae_model_impute_sample(const struct HivaeModel *model,
                                           const struct HivaeDataset *dataset,
                                           uint64_t seed,
                                           struct HivaeDataset **out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void hivae_model_free(struct HivaeModel *model);

/**
 * AvgErr of `imputed` on the cells observed in `truth` but missing in `masked`.
 *
 * # Safety
 * All handles must be live and share one schema; `avg_err` must be writable.
 */
enum HivaeStatus hivae_evaluate(const struct HivaeDataset *truth,
                                const struct HivaeDataset *masked,
                                const struct HivaeDataset *imputed,
                                double *avg_err);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HIVAE_H */
