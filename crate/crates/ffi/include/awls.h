#ifndef AWLS_H
#define AWLS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum AwlsVariant {
  AWLS_VARIANT_L2 = 0,
  AWLS_VARIANT_L0 = 1,
} AwlsVariant;

typedef enum AwlsInit {
  AWLS_INIT_POWER_ITERATION = 0,
  AWLS_INIT_GAUSSIAN_RANDOM = 1,
} AwlsInit;

typedef enum AwlsStatus {
  AWLS_STATUS_OK = 0,
  AWLS_STATUS_NULL_POINTER = 1,
  AWLS_STATUS_SHAPE = 2,
  AWLS_STATUS_NOT_POSITIVE_DEFINITE = 3,
  AWLS_STATUS_PARAMETER = 4,
  AWLS_STATUS_DOMAIN = 5,
  AWLS_STATUS_NON_FINITE = 6,
  AWLS_STATUS_FORMAT = 7,
  AWLS_STATUS_IO = 8,
  AWLS_STATUS_INVALID_UTF8 = 9,
  AWLS_STATUS_PANIC = 10,
} AwlsStatus;

typedef enum AwlsFormat {
  AWLS_FORMAT_CSV = 0,
  AWLS_FORMAT_MAT1 = 1,
} AwlsFormat;

typedef enum AwlsTermination {
  AWLS_TERMINATION_CONVERGED = 0,
  AWLS_TERMINATION_MAX_ITER = 1,
} AwlsTermination;

/**
 * Which matrix of a result to extract.
 */
typedef enum AwlsComponent {
  /**
   * `U V`
   */
  AWLS_COMPONENT_LOW_RANK = 0,
  AWLS_COMPONENT_SPARSE = 1,
  AWLS_COMPONENT_WEIGHTS = 2,
  AWLS_COMPONENT_U = 3,
  AWLS_COMPONENT_V = 4,
} AwlsComponent;

/**
 * Opaque dense row-major matrix.
 */
typedef struct AwlsMatrix AwlsMatrix;

/**
 * Opaque decomposition result.
 */
typedef struct AwlsResult AwlsResult;

/**
 * Solver parameters. Start from `awls_config_default`.
 */
typedef struct AwlsConfig {
  size_t rank;
  double lambda;
  double prox_t;
  double p;
  enum AwlsVariant variant;
  size_t max_iter;
  double tol;
  uint64_t seed;
  enum AwlsInit init;
} AwlsConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *awls_version(void);

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *awls_last_error(void);

struct AwlsConfig awls_config_default(void);

/**
 * Creates a `rows x cols` matrix from `rows * cols` row-major values, or a
 * zero matrix when `data` is NULL.
 *
 * # Safety
 * `data` must be NULL or point to `rows * cols` readable doubles; `out` must
 * be a valid pointer.
 */
enum AwlsStatus awls_matrix_new(size_t rows,
                                size_t cols,
                                const double *data,
                                struct AwlsMatrix **out);

/**
 * # Safety
 * `m` must be NULL or a handle from this library that has not been freed.
 */
void awls_matrix_free(struct AwlsMatrix *m);

/**
 * Row count, or 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t awls_matrix_rows(const struct AwlsMatrix *m);

/**
 * Column count, or 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t awls_matrix_cols(const struct AwlsMatrix *m);

/**
 * Copies the row-major values into `out`, which must hold exactly `len`
 * doubles with `len == rows * cols`.
 *
 * # Safety
 * `m` must be a live handle and `out` must point to `len` writable doubles.
 */
enum AwlsStatus awls_matrix_copy_data(const struct AwlsMatrix *m, double *out, size_t len);

/**
 * Reads a CSV or MAT1 file (detected from its contents).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AwlsStatus awls_matrix_read(const char *path, struct AwlsMatrix **out);

/**
 * # Safety
 * `m` must be a live handle and `path` a NUL-terminated string.
 */
enum AwlsStatus awls_matrix_write(const struct AwlsMatrix *m,
                                  const char *path,
                                  enum AwlsFormat format);

/**
 * Decomposes `y`. Release the result with `awls_result_free`.
 *
 * # Safety
 * `y` must be a live handle, `config` a valid pointer and `out` a valid
 * pointer.
 */
enum AwlsStatus awls_solve(const struct AwlsMatrix *y,
                           const struct AwlsConfig *config,
                           struct AwlsResult **out);

/**
 * # Safety
 * `r` must be NULL or a live result handle.
 */
void awls_result_free(struct AwlsResult *r);

/**
 * Iterations run, or 0 for NULL.
 *
 * # Safety
 * `r` must be NULL or a live result handle.
 */
size_t awls_result_iterations(const struct AwlsResult *r);

/**
 * # Safety
 * `r` must be a live result handle.
 */
enum AwlsTermination awls_result_termination(const struct AwlsResult *r);

/**
 * Final objective value, or NaN for NULL.
 *
 * # Safety
 * `r` must be NULL or a live result handle.
 */
double awls_result_objective(const struct AwlsResult *r);

/**
 * Copies one component of a result into a new matrix handle.
 *
 * # Safety
 * `r` must be a live result handle and `out` a valid pointer.
 */
enum AwlsStatus awls_result_component(const struct AwlsResult *r,
                                      enum AwlsComponent component,
                                      struct AwlsMatrix **out);

/**
 * Root mean square difference of two equally sized matrices.
 *
 * # Safety
 * `a` and `b` must be live handles and `out` a valid pointer.
 */
enum AwlsStatus awls_rmse(const struct AwlsMatrix *a, const struct AwlsMatrix *b, double *out);

/**
 * Generates `Y = X + S` with rank-`rank` `X` (0 selects `m / 50`) and
 * Bernoulli(`sparsity`) outliers at the given log10 SNR. Any of the out
 * pointers may be NULL to skip that matrix.
 *
 * # Safety
 * Out pointers must be NULL or valid.
 */
enum AwlsStatus awls_synth_generate(size_t m,
                                    size_t n,
                                    size_t rank,
                                    double sparsity,
                                    double snr,
                                    uint64_t seed,
                                    struct AwlsMatrix **out_y,
                                    struct AwlsMatrix **out_x,
                                    struct AwlsMatrix **out_s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AWLS_H */
