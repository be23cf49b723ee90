#include "ttlab.h"

#include <cstring>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "runner.hpp"

extern "C" struct ttlab_corpus {
  std::vector<ttlab::Dialog> dialogs;
};

namespace {

thread_local std::string g_last_error;

// Runs f under the status-code contract; every exception class maps onto
// one enumerator and lands in the thread-local message buffer.
template <typename F>
ttlab_status guarded(F&& f) {
  auto fail = [](const std::exception& e, ttlab_status st) {
    g_last_error = e.what();
    return st;
  };
  try {
    f();
    g_last_error.clear();
    return TTLAB_OK;
  } catch (const ttlab::InvalidArgument& e) {
    return fail(e, TTLAB_ERR_INVALID_ARGUMENT);
  } catch (const ttlab::IoError& e) {
    return fail(e, TTLAB_ERR_IO);
  } catch (const ttlab::ParseError& e) {
    return fail(e, TTLAB_ERR_PARSE);
  } catch (const ttlab::StateError& e) {
    return fail(e, TTLAB_ERR_STATE);
  } catch (const ttlab::NumericError& e) {
    return fail(e, TTLAB_ERR_NUMERIC);
  } catch (const std::exception& e) {
    return fail(e, TTLAB_ERR_INTERNAL);
  }
}

ttlab_status need(bool ok, const char* what) {
  if (ok) return TTLAB_OK;
  g_last_error = what;
  return TTLAB_ERR_INVALID_ARGUMENT;
}

std::vector<std::string> to_args(int argc, const char* const* argv) {
  if (argc < 0 || (argc > 0 && !argv))
    throw ttlab::InvalidArgument("null argv");
  std::vector<std::string> args;
  args.reserve(static_cast<std::size_t>(argc));
  for (int i = 0; i < argc; ++i) {
    if (!argv[i]) throw ttlab::InvalidArgument("null argv entry");
    args.emplace_back(argv[i]);
  }
  return args;
}

}  // namespace

extern "C" {

const char* ttlab_version(void) { return ttlab::kVersion; }

const char* ttlab_last_error(void) { return g_last_error.c_str(); }

ttlab_status ttlab_run(int argc, const char* const* argv) {
  return guarded(
      [&] { ttlab::run_command(to_args(argc, argv), std::cout); });
}

int ttlab_run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  try {
    args = to_args(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "ttlab error: " << e.what() << "\n";
    return 1;
  }
  return ttlab::run_cli(args, std::cout, std::cerr);
}

ttlab_status ttlab_corpus_open(const char* path, ttlab_corpus** out) {
  if (ttlab_status st = need(path && out, "null pointer")) return st;
  return guarded([&] {
    auto c = new ttlab_corpus{
        ttlab::ingest(path, ttlab::IngestFormat::turns)};
    *out = c;
  });
}

ttlab_status ttlab_corpus_count(const ttlab_corpus* corpus, size_t* out) {
  if (ttlab_status st = need(corpus && out, "null pointer")) return st;
  *out = corpus->dialogs.size();
  g_last_error.clear();
  return TTLAB_OK;
}

ttlab_status ttlab_corpus_dialog_id(const ttlab_corpus* corpus, size_t index,
                                    const char** out) {
  if (ttlab_status st = need(corpus && out, "null pointer")) return st;
  if (ttlab_status st = need(index < corpus->dialogs.size(),
                             "dialog index out of range"))
    return st;
  *out = corpus->dialogs[index].id.c_str();
  g_last_error.clear();
  return TTLAB_OK;
}

ttlab_status ttlab_corpus_turn_count(const ttlab_corpus* corpus, size_t index,
                                     size_t* out) {
  if (ttlab_status st = need(corpus && out, "null pointer")) return st;
  if (ttlab_status st = need(index < corpus->dialogs.size(),
                             "dialog index out of range"))
    return st;
  *out = corpus->dialogs[index].turns.size();
  g_last_error.clear();
  return TTLAB_OK;
}

void ttlab_corpus_close(ttlab_corpus* corpus) { delete corpus; }

ttlab_status ttlab_checkpoint_info(const char* path, char* kind_buf,
                                   size_t kind_buf_len, int* elem_size) {
  if (ttlab_status st = need(path != nullptr, "null pointer")) return st;
  return guarded([&] {
    ttlab::CheckpointInfo info = ttlab::read_checkpoint_info(path);
    if (kind_buf) {
      if (kind_buf_len < info.kind.size() + 1)
        throw ttlab::InvalidArgument("kind buffer too small");
      std::memcpy(kind_buf, info.kind.c_str(), info.kind.size() + 1);
    }
    if (elem_size) *elem_size = info.elem_size;
  });
}

}  // extern "C"
