#ifndef CLUSTERRETRI_H
#define CLUSTERRETRI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum CrStatus {
  CR_STATUS_OK = 0,
  CR_STATUS_NULL_POINTER = 1,
  CR_STATUS_INVALID_ARGUMENT = 2,
  CR_STATUS_IO = 3,
  CR_STATUS_FORMAT = 4,
  CR_STATUS_SHAPE = 5,
  CR_STATUS_NUMERIC = 6,
  CR_STATUS_PANIC = 7,
} CrStatus;

typedef struct CrBits CrBits;

typedef struct CrCodebook CrCodebook;

typedef struct CrCodes CrCodes;

typedef struct CrItq CrItq;

typedef struct CrMatrix CrMatrix;

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *cr_last_error(void);

// Copies `rows * dims` row-major floats into a new matrix.
//
// # Safety
// `data` must point to `rows * dims` readable floats; `out` must be writable.
enum CrStatus cr_matrix_new(uintptr_t rows,
                            uintptr_t dims,
                            const float *data,
                            struct CrMatrix **out);

// Loads CRFT (or CSV, by `.csv` extension) features.
//
// # Safety
// `file` must be a NUL-terminated string; `out` must be writable.
enum CrStatus cr_matrix_load(const char *file, struct CrMatrix **out);

// # Safety
// `m` must be a live matrix handle and `file` a NUL-terminated string.
enum CrStatus cr_matrix_save(const struct CrMatrix *m, const char *file);

// # Safety
// `m` must be a live matrix handle or null (returns 0).
uintptr_t cr_matrix_rows(const struct CrMatrix *m);

// # Safety
// `m` must be a live matrix handle or null (returns 0).
uintptr_t cr_matrix_dims(const struct CrMatrix *m);

// Copies the row-major values into `out`, which holds `len` floats
// (at least rows * dims).
//
// # Safety
// `m` must be a live matrix handle and `out` writable for `len` floats.
enum CrStatus cr_matrix_copy(const struct CrMatrix *m, float *out, uintptr_t len);

// # Safety
// `m` must be null or a handle not yet freed.
void cr_matrix_free(struct CrMatrix *m);

// Fits `m + extra_subspaces` per-subspace K-Means codebooks with `k`
// centroids each.
//
// # Safety
// `gallery` must be a live matrix handle; `out` must be writable.
enum CrStatus cr_codebook_fit(const struct CrMatrix *gallery,
                              uintptr_t k,
                              uintptr_t m,
                              uintptr_t extra_subspaces,
                              uint64_t seed,
                              struct CrCodebook **out);

// # Safety
// `file` must be a NUL-terminated string; `out` must be writable.
enum CrStatus cr_codebook_load(const char *file, struct CrCodebook **out);

// # Safety
// `cb` must be a live codebook handle and `file` a NUL-terminated string.
enum CrStatus cr_codebook_save(const struct CrCodebook *cb, const char *file);

// # Safety
// `cb` must be a live codebook handle or null (returns 0).
uintptr_t cr_codebook_k(const struct CrCodebook *cb);

// # Safety
// `cb` must be a live codebook handle or null (returns 0).
uintptr_t cr_codebook_subspaces(const struct CrCodebook *cb);

// # Safety
// `cb` must be null or a handle not yet freed.
void cr_codebook_free(struct CrCodebook *cb);

// Nearest-centroid codes of every gallery row.
//
// # Safety
// `cb` and `gallery` must be live handles; `out` must be writable.
enum CrStatus cr_codes_encode(const struct CrCodebook *cb,
                              const struct CrMatrix *gallery,
                              struct CrCodes **out);

// # Safety
// `codes` must be null or a handle not yet freed.
void cr_codes_free(struct CrCodes *codes);

// Reconstructs the gallery through the codebook and blends
// `(1 - lambda) * reconstructed + lambda * original` into a new matrix.
//
// # Safety
// `gallery` and `cb` must be live handles; `out` must be writable.
enum CrStatus cr_fuse(const struct CrMatrix *gallery,
                      const struct CrCodebook *cb,
                      double lambda,
                      struct CrMatrix **out);

// Ranks every gallery row by Euclidean distance to one query (ties by
// index). `order` receives gallery indices and, if non-null, `distances`
// the matching distances; both hold `len` ≥ gallery rows entries.
//
// # Safety
// `query` must hold `dims` floats, `gallery` be a live handle, and the
// output buffers be writable for `len` entries (`distances` may be null).
enum CrStatus cr_rank_exact(const float *query,
                            uintptr_t dims,
                            const struct CrMatrix *gallery,
                            uint32_t *order,
                            double *distances,
                            uintptr_t len);

// Lookup-table ranking of encoded gallery rows; same output contract as
// [`cr_rank_exact`].
//
// # Safety
// As for [`cr_rank_exact`], with `cb` and `codes` live handles.
enum CrStatus cr_rank_adc(const float *query,
                          uintptr_t dims,
                          const struct CrCodebook *cb,
                          const struct CrCodes *codes,
                          uint32_t *order,
                          double *distances,
                          uintptr_t len);

// # Safety
// `x` must be a live matrix handle; `out` must be writable.
enum CrStatus cr_itq_fit(const struct CrMatrix *x,
                         uintptr_t bits,
                         uintptr_t iters,
                         uint64_t seed,
                         struct CrItq **out);

// # Safety
// `file` must be a NUL-terminated string; `out` must be writable.
enum CrStatus cr_itq_load(const char *file, struct CrItq **out);

// # Safety
// `model` must be a live handle and `file` a NUL-terminated string.
enum CrStatus cr_itq_save(const struct CrItq *model, const char *file);

// # Safety
// `model` must be a live handle or null (returns 0).
uintptr_t cr_itq_bits(const struct CrItq *model);

// # Safety
// `model` must be null or a handle not yet freed.
void cr_itq_free(struct CrItq *model);

// Binary codes of every row of `x`.
//
// # Safety
// `model` and `x` must be live handles; `out` must be writable.
enum CrStatus cr_itq_encode(const struct CrItq *model,
                            const struct CrMatrix *x,
                            struct CrBits **out);

// Number of u64 words per code row (bits rounded up to 64).
//
// # Safety
// `codes` must be a live handle or null (returns 0).
uintptr_t cr_bits_words_per_row(const struct CrBits *codes);

// Copies the packed words (LSB-first, row-major) into `out` of `len` words.
//
// # Safety
// `codes` must be a live handle and `out` writable for `len` words.
enum CrStatus cr_bits_copy(const struct CrBits *codes, uint64_t *out, uintptr_t len);

// Ranks `gallery` codes by Hamming distance to row `query_row` of
// `queries`. `distances` (may be null) receives bit counts as doubles.
//
// # Safety
// Handles must be live; output buffers writable for `len` entries.
enum CrStatus cr_rank_hamming(const struct CrBits *queries,
                              uintptr_t query_row,
                              const struct CrBits *gallery,
                              uint32_t *order,
                              double *distances,
                              uintptr_t len);

// # Safety
// `codes` must be null or a handle not yet freed.
void cr_bits_free(struct CrBits *codes);

#endif  /* CLUSTERRETRI_H */
