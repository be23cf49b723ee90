#ifndef TTLAB_H
#define TTLAB_H

/* C interface to the turn-taking lab. All functionality is reachable
 * through ttlab_run / ttlab_run_cli, which execute one subcommand exactly
 * as the command-line tool does; the handle-based calls below expose a
 * small read-only surface for embedding and testing.
 *
 * Every function that can fail returns a ttlab_status. On failure a
 * human-readable message is kept in thread-local storage and stays valid
 * until the next ttlab call on the same thread.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ttlab_status {
  TTLAB_OK = 0,
  TTLAB_ERR_INVALID_ARGUMENT = 1,
  TTLAB_ERR_IO = 2,
  TTLAB_ERR_PARSE = 3,
  TTLAB_ERR_STATE = 4,
  TTLAB_ERR_NUMERIC = 5,
  TTLAB_ERR_INTERNAL = 6
} ttlab_status;

/* Library version, e.g. "0.1.0". Static storage, never freed. */
const char* ttlab_version(void);

/* Message of the last failure on this thread, or "" after a success. */
const char* ttlab_last_error(void);

/* Runs one subcommand; argv holds the subcommand name followed by its
 * options, without a program name. Normal output goes to stdout. Nothing
 * is printed on failure; inspect the returned status and
 * ttlab_last_error instead. */
ttlab_status ttlab_run(int argc, const char* const* argv);

/* Full command-line behavior: usage and error messages on stderr with a
 * stable "ttlab error: " prefix. Returns the process exit code, 0 only
 * on success. */
int ttlab_run_cli(int argc, const char* const* argv);

/* A loaded dialog corpus. */
typedef struct ttlab_corpus ttlab_corpus;

/* Opens a dialogs.jsonl file as produced by the ingest and synth
 * commands. On success *out owns the corpus until ttlab_corpus_close. */
ttlab_status ttlab_corpus_open(const char* path, ttlab_corpus** out);
ttlab_status ttlab_corpus_count(const ttlab_corpus* corpus, size_t* out);
/* Identifier of one dialog; the pointer stays valid while the corpus is
 * open. index must be below ttlab_corpus_count. */
ttlab_status ttlab_corpus_dialog_id(const ttlab_corpus* corpus, size_t index,
                                    const char** out);
ttlab_status ttlab_corpus_turn_count(const ttlab_corpus* corpus, size_t index,
                                     size_t* out);
void ttlab_corpus_close(ttlab_corpus* corpus);

/* Reads a checkpoint header without loading weights. kind_buf receives a
 * NUL-terminated family name ("lm" or "lstm"); elem_size receives the
 * stored scalar width in bytes (4 or 8). Either out pointer may be NULL. */
ttlab_status ttlab_checkpoint_info(const char* path, char* kind_buf,
                                   size_t kind_buf_len, int* elem_size);

#ifdef __cplusplus
}
#endif

#endif /* TTLAB_H */
