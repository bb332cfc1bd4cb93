#ifndef SLCODE_H
#define SLCODE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SlStatus {
  SL_OK = 0,
  SL_NULL_POINTER = 1,
  SL_INVALID_ARGUMENT = 2,
  SL_BUFFER_TOO_SMALL = 3,
  SL_IO = 4,
  SL_CORRUPT_KEY = 5,
  SL_FAILED = 6,
  SL_PANIC = 7,
} SlStatus;

/**
 * Encoder/decoder key pair.
 */
typedef struct SlKey SlKey;

/**
 * Projection settings for `sl_decode`; `project = 0` solves the full
 * program and ignores the rest.
 */
typedef struct SlProjection {
  int32_t project;
  double epsilon;
  double alpha;
  double jll_constant;
  uint64_t seed;
} SlProjection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` as a
 * NUL-terminated string, truncating to `len`. Returns the full message
 * length without the terminator.
 *
 * # Safety
 * `buf` must be NULL or point to `len` writable bytes.
 */
size_t sl_last_error(char *buf, size_t len);

/**
 * # Safety
 * `out` must point to writable storage for one handle.
 */
enum SlStatus sl_key_generate_orthogonal(size_t d,
                                         double redundancy,
                                         uint64_t seed,
                                         struct SlKey **out);

/**
 * # Safety
 * `out` must point to writable storage for one handle.
 */
enum SlStatus sl_key_generate_impossible(size_t m,
                                         double delta_prime,
                                         uint64_t seed,
                                         struct SlKey **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum SlStatus sl_key_load(const char *path, struct SlKey **out);

/**
 * # Safety
 * `key` must be a live handle and `path` a NUL-terminated string.
 */
enum SlStatus sl_key_save(const struct SlKey *key, const char *path);

/**
 * Releases a key. NULL is ignored.
 *
 * # Safety
 * `key` must be NULL or a handle not yet freed.
 */
void sl_key_free(struct SlKey *key);

/**
 * Message bits `d`; a message is `d / 8` bytes. Zero for NULL.
 *
 * # Safety
 * `key` must be NULL or a live handle.
 */
size_t sl_key_message_bits(const struct SlKey *key);

/**
 * Codeword length `n`. Zero for NULL.
 *
 * # Safety
 * `key` must be NULL or a live handle.
 */
size_t sl_key_code_length(const struct SlKey *key);

/**
 * Encodes exactly `message_bits / 8` Latin-1 bytes into `n` reals.
 *
 * # Safety
 * `text` must hold `text_len` bytes and `out` `out_len` doubles.
 */
enum SlStatus sl_encode(const struct SlKey *key,
                        const uint8_t *text,
                        size_t text_len,
                        double *out,
                        size_t out_len);

/**
 * Adds `round(delta * len)` gross errors of magnitude at most
 * `gross_magnitude` to `z` in place.
 *
 * # Safety
 * `z` must hold `len` doubles.
 */
enum SlStatus sl_corrupt(double *z,
                         size_t len,
                         double delta,
                         double gross_magnitude,
                         uint64_t seed);

/**
 * Default projection settings, with projection switched off.
 */
struct SlProjection sl_projection_default(void);

/**
 * Decodes `n` received reals into `message_bits / 8` Latin-1 bytes.
 * A non-optimal LP still yields text and returns `SL_FAILED`.
 *
 * # Safety
 * `z_bar` must hold `len` doubles, `out` `out_len` bytes; `projection`
 * may be NULL for the full program.
 */
enum SlStatus sl_decode(const struct SlKey *key,
                        const double *z_bar,
                        size_t len,
                        const struct SlProjection *projection,
                        uint8_t *out,
                        size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLCODE_H */
