// Exercises the shared library through the C header only, the same
// surface the command-line tool uses.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <ttlab.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

fs::path work_root() {
  static fs::path d = [] {
    fs::path p = fs::temp_directory_path() / "ttlab_capi";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

ttlab_status run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  return ttlab_run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Shared tiny corpus + checkpoint, built once through the API itself.
const fs::path& fixture() {
  static fs::path root = [] {
    fs::path r = work_root() / "fx";
    REQUIRE(run({"synth", "--n", "24", "--seed", "11", "--out",
                 (r / "corpus").string()}) == TTLAB_OK);
    REQUIRE(run({"train-lm", "--corpus", (r / "corpus/dialogs.jsonl").string(),
                 "--out", (r / "lm").string(), "--max-steps", "8",
                 "--eval-every", "8", "--n-layers", "1", "--n-heads", "1",
                 "--d-model", "16", "--d-ff", "32", "--ctx-len", "256",
                 "--vocab-size", "72", "--batch-size", "2", "--dropout", "0",
                 "--seed", "2"}) == TTLAB_OK);
    return r;
  }();
  return root;
}

}  // namespace

TEST_CASE("version and clean error state") {
  CHECK(std::string(ttlab_version()) == "0.1.0");
  CHECK(run({"version"}) == TTLAB_OK);
  CHECK(std::string(ttlab_last_error()).empty());
}

TEST_CASE("status codes mirror the failure family") {
  CHECK(run({"nonsense"}) == TTLAB_ERR_INVALID_ARGUMENT);
  CHECK(std::string(ttlab_last_error()).find("unknown command") !=
        std::string::npos);

  CHECK(run({"synth", "--config", (work_root() / "absent.json").string(),
             "--out", (work_root() / "x").string()}) == TTLAB_ERR_IO);
  CHECK(std::string(ttlab_last_error()).find("config") != std::string::npos);

  fs::path empty = work_root() / "empty.csv";
  std::ofstream(empty).close();
  CHECK(run({"plot", "--in", empty.string(), "--out",
             (work_root() / "p").string()}) == TTLAB_ERR_PARSE);

  // Success clears the message.
  CHECK(run({"version"}) == TTLAB_OK);
  CHECK(std::string(ttlab_last_error()).empty());
}

TEST_CASE("run rejects malformed argv") {
  CHECK(ttlab_run(1, nullptr) == TTLAB_ERR_INVALID_ARGUMENT);
  const char* bad[] = {nullptr};
  CHECK(ttlab_run(1, bad) == TTLAB_ERR_INVALID_ARGUMENT);
  CHECK(ttlab_run(0, nullptr) == TTLAB_ERR_INVALID_ARGUMENT);
  CHECK(std::string(ttlab_last_error()).find("no command") !=
        std::string::npos);
}

TEST_CASE("run_cli returns process exit codes") {
  const char* ok[] = {"version"};
  CHECK(ttlab_run_cli(1, ok) == 0);
  const char* bad[] = {"nonsense"};
  CHECK(ttlab_run_cli(1, bad) == 1);
}

TEST_CASE("corpus handles expose dialogs read-only") {
  fs::path corpus = fixture() / "corpus/dialogs.jsonl";
  ttlab_corpus* c = nullptr;
  REQUIRE(ttlab_corpus_open(corpus.string().c_str(), &c) == TTLAB_OK);
  REQUIRE(c != nullptr);

  size_t n = 0;
  CHECK(ttlab_corpus_count(c, &n) == TTLAB_OK);
  CHECK(n == 24);

  const char* id = nullptr;
  CHECK(ttlab_corpus_dialog_id(c, 0, &id) == TTLAB_OK);
  CHECK(std::string(id) == "synth-000000");

  size_t turns = 0;
  CHECK(ttlab_corpus_turn_count(c, 0, &turns) == TTLAB_OK);
  CHECK(turns >= 3);

  CHECK(ttlab_corpus_dialog_id(c, n, &id) == TTLAB_ERR_INVALID_ARGUMENT);
  CHECK(std::string(ttlab_last_error()).find("out of range") !=
        std::string::npos);
  ttlab_corpus_close(c);

  CHECK(ttlab_corpus_open(nullptr, &c) == TTLAB_ERR_INVALID_ARGUMENT);
  CHECK(ttlab_corpus_open((work_root() / "absent.jsonl").string().c_str(),
                          &c) == TTLAB_ERR_IO);
}

TEST_CASE("checkpoint peek reports family and width") {
  fs::path ckpt = fixture() / "lm/model.ckpt";
  char kind[16] = {};
  int elem = 0;
  REQUIRE(ttlab_checkpoint_info(ckpt.string().c_str(), kind, sizeof(kind),
                                &elem) == TTLAB_OK);
  CHECK(std::string(kind) == "lm");
  CHECK(elem == 8);

  CHECK(ttlab_checkpoint_info(ckpt.string().c_str(), kind, 2, nullptr) ==
        TTLAB_ERR_INVALID_ARGUMENT);
  CHECK(ttlab_checkpoint_info(
            (fixture() / "corpus/dialogs.jsonl").string().c_str(), kind,
            sizeof(kind), &elem) == TTLAB_ERR_PARSE);
  CHECK(ttlab_checkpoint_info(nullptr, kind, sizeof(kind), &elem) ==
        TTLAB_ERR_INVALID_ARGUMENT);
}

TEST_CASE("identical runs produce identical artifacts") {
  fs::path a = work_root() / "rep_a", b = work_root() / "rep_b";
  std::vector<std::string> base = {"synth", "--n", "6", "--seed", "42"};
  auto with_out = [&](const fs::path& dir) {
    auto v = base;
    v.push_back("--out");
    v.push_back(dir.string());
    return v;
  };
  REQUIRE(run(with_out(a)) == TTLAB_OK);
  REQUIRE(run(with_out(b)) == TTLAB_OK);
  CHECK(slurp(a / "dialogs.jsonl") == slurp(b / "dialogs.jsonl"));

  // Manifests differ only in the --out value they record.
  std::string ma = slurp(a / "manifest.json"), mb = slurp(b / "manifest.json");
  auto scrub = [](std::string s, const std::string& dir) {
    for (std::size_t at; (at = s.find(dir)) != std::string::npos;)
      s.replace(at, dir.size(), "OUT");
    return s;
  };
  CHECK(scrub(ma, a.string()) == scrub(mb, b.string()));
}

TEST_CASE("full pipeline through the run entry point") {
  fs::path r = fixture();
  fs::path ev = work_root() / "ev";
  REQUIRE(run({"eval", "--model", (r / "lm/model.ckpt").string(), "--vocab",
               (r / "lm/vocab.json").string(), "--corpus",
               (r / "corpus/dialogs.jsonl").string(), "--out",
               ev.string()}) == TTLAB_OK);
  CHECK(fs::exists(ev / "report.csv"));
  CHECK(fs::exists(ev / "series.csv"));
  CHECK(fs::exists(ev / "manifest.json"));
  REQUIRE(run({"plot", "--in", (ev / "series.csv").string(), "--out",
               (work_root() / "fig").string()}) == TTLAB_OK);
  std::string svg = slurp(work_root() / "fig/chart.svg");
  CHECK(svg.find("<svg") == 0);
}
