#ifndef QWHILE_H
#define QWHILE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QwStatus {
  QW_STATUS_OK = 0,
  QW_STATUS_NULL_POINTER = 1,
  QW_STATUS_INVALID_UTF8 = 2,
  QW_STATUS_PARSE_ERROR = 3,
  QW_STATUS_INVALID_ARGUMENT = 4,
  QW_STATUS_COMPUTE_ERROR = 5,
  QW_STATUS_BUFFER_TOO_SMALL = 6,
  QW_STATUS_PANIC = 7,
} QwStatus;

typedef enum QwMode {
  QW_MODE_PARTIAL = 0,
  QW_MODE_TOTAL = 1,
} QwMode;

// Parsed program together with its semantic model.
typedef struct QwProgram QwProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses a program file. On success `*out_handle` receives a new handle.
//
// # Safety
// `src` must be a NUL-terminated string and `out_handle` a valid pointer.
enum QwStatus qw_program_parse(const char *src, struct QwProgram **out_handle);

// # Safety
// `p` must be null or a handle from [`qw_program_parse`] not yet freed.
void qw_program_free(struct QwProgram *p);

// Dimension of the joint state space.
//
// # Safety
// `p` must be a live handle; `dim` may be null.
enum QwStatus qw_program_dim(const struct QwProgram *p, size_t *dim);

// Decides `{pre} P {post}`. Predicates use the same syntax as annotations.
//
// # Safety
// `p` must be a live handle, `pre` and `post` NUL-terminated; out pointers may be null.
enum QwStatus qw_check_triple(const struct QwProgram *p,
                              const char *pre,
                              const char *post,
                              enum QwMode mode,
                              double tol,
                              bool *holds,
                              double *min_eig);

// Checks the annotations embedded in the program as a proof outline.
//
// # Safety
// `p` must be a live handle; out pointers may be null.
enum QwStatus qw_outline_check(const struct QwProgram *p,
                               enum QwMode mode,
                               double tol,
                               bool *holds,
                               size_t *vc_count,
                               size_t *failed_count);

// Weakest precondition of `post`, written row-major into `re`/`im`, each of length `len`.
// `len` must be at least `dim * dim`.
//
// # Safety
// `re` and `im` must point to `len` writable doubles.
enum QwStatus qw_wp(const struct QwProgram *p,
                    const char *post,
                    enum QwMode mode,
                    double *re,
                    double *im,
                    size_t len);

// Message of the last failed call on this thread, or null. Free with [`qw_string_free`].
char *qw_last_error_message(void);

// # Safety
// `s` must be null or a string returned by this library.
void qw_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QWHILE_H */
