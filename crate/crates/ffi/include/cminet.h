#ifndef CMINET_H
#define CMINET_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CminetStatus {
  CMINET_STATUS_OK = 0,
  CMINET_STATUS_NULL_POINTER = 1,
  CMINET_STATUS_INVALID_ARGUMENT = 2,
  CMINET_STATUS_LOAD = 3,
  CMINET_STATUS_ESTIMATOR = 4,
  CMINET_STATUS_CONSENSUS = 5,
  CMINET_STATUS_EXPORT = 6,
  CMINET_STATUS_CONFIG = 7,
  CMINET_STATUS_IO = 8,
  // A pipeline run finished but some methods failed.
  CMINET_STATUS_PARTIAL = 9,
  CMINET_STATUS_PANIC = 10,
} CminetStatus;

// Vote-count consensus of several networks.
typedef struct CminetConsensus CminetConsensus;

// Undirected network over a taxa roster.
typedef struct CminetNetwork CminetNetwork;

// Samples × taxa count table.
typedef struct CminetTable CminetTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or NULL. The pointer
// stays valid until the next `cminet_` call on the same thread.
const char *cminet_last_error(void);

// Build a table from a row-major `n_samples * n_taxa` buffer. `taxa` may be
// NULL, in which case taxa are named `T1 ...`.
//
// # Safety
// `values` must point to `n_samples * n_taxa` doubles; `taxa`, when not
// NULL, to `n_taxa` NUL-terminated strings.
enum CminetStatus cminet_table_new(const double *values,
                                   size_t n_samples,
                                   size_t n_taxa,
                                   const char *const *taxa,
                                   struct CminetTable **out);

// Read a delimited count table; `taxa_in_rows` nonzero means taxa are rows.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum CminetStatus cminet_table_load(const char *path,
                                    int32_t taxa_in_rows,
                                    struct CminetTable **out);

// # Safety
// `t` must be NULL or a table handle not yet freed.
void cminet_table_free(struct CminetTable *t);

// # Safety
// `t` must be a live table handle or NULL.
size_t cminet_table_n_taxa(const struct CminetTable *t);

// # Safety
// `t` must be a live table handle or NULL.
size_t cminet_table_n_samples(const struct CminetTable *t);

// Run one method (`"pearson"`, `"se_mb"`, ...) with default parameters and
// its default binarization rule. `seed` is treated as a pipeline master seed.
//
// # Safety
// `t` must be a live table handle, `method` a NUL-terminated string and
// `out` a valid pointer.
enum CminetStatus cminet_run_method(const struct CminetTable *t,
                                    const char *method,
                                    uint64_t seed,
                                    struct CminetNetwork **out);

// Seed a method receives in a pipeline run with master seed `master`;
// `master` itself for an unknown method name.
//
// # Safety
// `method` must be NULL or a NUL-terminated string.
uint64_t cminet_method_seed(uint64_t master, const char *method);

// Build a network from a row-major `p * p` 0/1 adjacency buffer.
//
// # Safety
// `adjacency` must hold `p * p` bytes and `taxa` `p` NUL-terminated strings.
enum CminetStatus cminet_network_new(const uint8_t *adjacency,
                                     size_t p,
                                     const char *const *taxa,
                                     const char *name,
                                     struct CminetNetwork **out);

// # Safety
// `n` must be NULL or a network handle not yet freed.
void cminet_network_free(struct CminetNetwork *n);

// # Safety
// `n` must be a live network handle or NULL.
size_t cminet_network_dim(const struct CminetNetwork *n);

// # Safety
// `n` must be a live network handle or NULL.
size_t cminet_network_edge_count(const struct CminetNetwork *n);

// Copy the row-major adjacency into `buf`, which must hold `dim * dim` bytes.
//
// # Safety
// `buf` must be writable for `len` bytes.
enum CminetStatus cminet_network_adjacency(const struct CminetNetwork *n, uint8_t *buf, size_t len);

// # Safety
// `nets` must point to `m` live network handles; `out` must be valid.
enum CminetStatus cminet_consensus_new(const struct CminetNetwork *const *nets,
                                       size_t m,
                                       struct CminetConsensus **out);

// # Safety
// `c` must be NULL or a consensus handle not yet freed.
void cminet_consensus_free(struct CminetConsensus *c);

// Copy the row-major vote counts into `buf` of `dim * dim` entries.
//
// # Safety
// `buf` must be writable for `len` values.
enum CminetStatus cminet_consensus_weights(const struct CminetConsensus *c,
                                           uint32_t *buf,
                                           size_t len);

// Edges supported by more than `t` networks.
//
// # Safety
// `c` must be a live consensus handle and `out` a valid pointer.
enum CminetStatus cminet_consensus_threshold(const struct CminetConsensus *c,
                                             size_t t,
                                             struct CminetNetwork **out);

// Serialize a network as `"graphml"`, `"dot"` or `"edgelist_tsv"`. Free the
// string with [`cminet_string_free`].
//
// # Safety
// `n` must be a live network handle, `format` a C string, `out` valid.
enum CminetStatus cminet_network_export(const struct CminetNetwork *n,
                                        const char *format,
                                        char **out);

// Serialize the consensus, all edges when `t < 0`, else those above `t`.
//
// # Safety
// `c` must be a live consensus handle, `format` a C string, `out` valid.
enum CminetStatus cminet_consensus_export(const struct CminetConsensus *c,
                                          int64_t t,
                                          const char *format,
                                          char **out);

// # Safety
// `s` must be NULL or a string returned by this library and not yet freed.
void cminet_string_free(char *s);

// Run the full pipeline from a TOML config file. Returns `Partial` when some
// methods failed but outputs were written.
//
// # Safety
// `config_path` must be a NUL-terminated string.
enum CminetStatus cminet_pipeline_run(const char *config_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CMINET_H */
