#include "runner.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "attribution.hpp"
#include "bpe.hpp"
#include "checkpoint.hpp"
#include "corpus.hpp"
#include "csv.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "lstm.hpp"
#include "pos_bigram.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "svg.hpp"
#include "synth.hpp"
#include "train.hpp"
#include "transformer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ttlab {
namespace {

// ------------------------------------------------------------ option plumbing

// Flat --key value options with a JSON config file underneath: flags win
// over config keys, config keys win over built-in defaults. Every key a
// subcommand understands is read through the typed getters; anything left
// unread is a typo and rejected.
class Options {
 public:
  explicit Options(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
      const std::string& a = args[i];
      if (a.rfind("--", 0) != 0)
        throw InvalidArgument("unexpected argument '" + a +
                              "' (options look like --key value)");
      std::string key = a.substr(2), val;
      auto eq = key.find('=');
      if (eq != std::string::npos) {
        val = key.substr(eq + 1);
        key = key.substr(0, eq);
      } else if (i + 1 < args.size() && args[i + 1].rfind("--", 0) != 0) {
        val = args[++i];
      } else {
        val = "true";  // bare switch
      }
      std::replace(key.begin(), key.end(), '-', '_');
      kv_[key] = val;
    }
    auto cfg = kv_.find("config");
    if (cfg != kv_.end()) {
      used_.insert("config");
      std::ifstream f(cfg->second);
      if (!f) throw IoError("cannot read config file " + cfg->second);
      json j;
      try {
        j = json::parse(f);
      } catch (const json::exception& e) {
        throw ParseError(cfg->second + ": " + e.what());
      }
      if (!j.is_object())
        throw ParseError(cfg->second + ": config root must be an object");
      for (auto& [k, v] : j.items()) {
        std::string key = k;
        std::replace(key.begin(), key.end(), '-', '_');
        if (kv_.count(key)) continue;  // explicit flag wins
        kv_[key] = v.is_string() ? v.get<std::string>() : v.dump();
      }
    }
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string require(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end())
      throw InvalidArgument("missing required option --" + dashed(key));
    used_.insert(key);
    return it->second;
  }

  std::string str(const std::string& key, const std::string& def) {
    used_.insert(key);
    auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
  }

  long long int_of(const std::string& key, long long def) {
    return parse_int(key, str(key, std::to_string(def)));
  }

  std::uint64_t u64(const std::string& key, std::uint64_t def) {
    long long v = int_of(key, static_cast<long long>(def));
    if (v < 0)
      throw InvalidArgument("option --" + dashed(key) + " must be >= 0");
    return static_cast<std::uint64_t>(v);
  }

  double num(const std::string& key, double def) {
    std::string s = str(key, fmt_double(def));
    try {
      std::size_t pos = 0;
      double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw InvalidArgument("option --" + dashed(key) +
                            ": not a number: '" + s + "'");
    }
  }

  bool flag(const std::string& key, bool def) {
    std::string s = str(key, def ? "true" : "false");
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw InvalidArgument("option --" + dashed(key) +
                          ": not a boolean: '" + s + "'");
  }

  // Rejects any key no getter ever looked at.
  void done() const {
    for (const auto& [k, v] : kv_)
      if (!used_.count(k))
        throw InvalidArgument("unknown option --" + dashed(k));
  }

  const std::map<std::string, std::string>& snapshot() const { return kv_; }

 private:
  static std::string dashed(std::string k) {
    std::replace(k.begin(), k.end(), '_', '-');
    return k;
  }

  long long parse_int(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      long long v = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw InvalidArgument("option --" + dashed(key) +
                            ": not an integer: '" + s + "'");
    }
  }

  std::map<std::string, std::string> kv_;
  std::set<std::string> used_;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << content;
  if (!f) throw IoError("write failed: " + path.string());
}

fs::path out_dir(Options& o) {
  fs::path dir = o.require("out");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

// One manifest per run, next to the outputs. Contains no clocks or host
// state, so a rerun with the same inputs is byte-identical.
void write_manifest(const fs::path& dir, const std::string& command,
                    const Options& opts,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  json cfg = json::object();
  for (const auto& [k, v] : opts.snapshot()) cfg[k] = v;
  j["config"] = cfg;
  json ins = json::array();
  for (const std::string& p : inputs) {
    std::string bytes = read_file(p);
    ins.push_back({{"path", p},
                   {"fnv1a64", to_hex(fnv1a64(bytes.data(), bytes.size()))}});
  }
  j["inputs"] = ins;
  j["outputs"] = outputs;
  write_file(dir / "manifest.json", j.dump(2) + "\n");
}

// ------------------------------------------------------------ corpus loading

std::vector<Dialog> load_corpus(const std::string& path) {
  return ingest(path, IngestFormat::turns);
}

struct SplitSpec {
  double train, valid, test;
  std::uint64_t seed;
};

SplitSpec split_spec(Options& o) {
  return {o.num("train_ratio", 0.8), o.num("valid_ratio", 0.1),
          o.num("test_ratio", 0.1), o.u64("split_seed", 0)};
}

CorpusSplit make_split(const std::vector<Dialog>& dialogs,
                       const SplitSpec& s) {
  return split_corpus(dialogs, s.train, s.valid, s.test, s.seed);
}

std::vector<Dialog> pick_split(const std::vector<Dialog>& all,
                               const CorpusSplit& split,
                               const std::string& name) {
  if (name == "train") return split.train;
  if (name == "valid") return split.valid;
  if (name == "test") return split.test;
  if (name == "all") return all;
  throw InvalidArgument("unknown split '" + name +
                        "' (train, valid, test, all)");
}

// ------------------------------------------------------------ model loading

bool is_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  char magic[7] = {};
  f.read(magic, 7);
  return f.gcount() == 7 && std::string(magic, 7) == "TTCKPT\n";
}

void check_vocab_hash(const std::string& path, std::uint64_t stored,
                      const Vocab& vocab) {
  if (stored != vocab.fingerprint())
    throw StateError(path +
                     ": checkpoint was trained with a different vocabulary "
                     "(fingerprint " +
                     to_hex(stored) + " vs " + to_hex(vocab.fingerprint()) +
                     ")");
}

// A loaded model of any family, with the uniform predictor view plus the
// concrete transformer kept around for inspection commands.
struct ModelBundle {
  std::string kind;  // lm | lstm | pos
  int elem_size = 8;
  std::unique_ptr<ShiftPredictor> predictor;
  std::shared_ptr<TransformerLM<double>> lm64;
  std::shared_ptr<TransformerLM<float>> lm32;
  std::shared_ptr<LstmClassifier<double>> lstm64;
  std::shared_ptr<LstmClassifier<float>> lstm32;
  std::shared_ptr<PosBigram> pos;
};

ModelBundle load_model(const std::string& path, const Vocab& vocab) {
  ModelBundle b;
  if (!is_checkpoint(path)) {
    b.kind = "pos";
    b.pos = std::make_shared<PosBigram>(PosBigram::load(path));
    b.predictor = std::make_unique<PosPredictor>(*b.pos);
    return b;
  }
  CheckpointInfo info = read_checkpoint_info(path);
  b.kind = info.kind;
  b.elem_size = info.elem_size;
  std::uint64_t hash = 0;
  if (info.kind == "lm") {
    if (info.elem_size == 8) {
      b.lm64 = std::make_shared<TransformerLM<double>>(
          load_lm<double>(path, &hash));
      b.predictor = std::make_unique<LmPredictor<double>>(*b.lm64, vocab);
    } else {
      b.lm32 =
          std::make_shared<TransformerLM<float>>(load_lm<float>(path, &hash));
      b.predictor = std::make_unique<LmPredictor<float>>(*b.lm32, vocab);
    }
  } else if (info.kind == "lstm") {
    if (info.elem_size == 8) {
      b.lstm64 = std::make_shared<LstmClassifier<double>>(
          load_lstm<double>(path, &hash));
      b.predictor = std::make_unique<LstmPredictor<double>>(*b.lstm64);
    } else {
      b.lstm32 = std::make_shared<LstmClassifier<float>>(
          load_lstm<float>(path, &hash));
      b.predictor = std::make_unique<LstmPredictor<float>>(*b.lstm32);
    }
  } else {
    throw StateError(path + ": unsupported checkpoint kind '" + info.kind +
                     "'");
  }
  check_vocab_hash(path, hash, vocab);
  return b;
}

const TransformerLM<double>& require_lm64(const ModelBundle& b,
                                          const std::string& what) {
  if (!b.lm64)
    throw InvalidArgument(what + " needs a 64-bit transformer checkpoint (got " +
                          b.kind + ", " + std::to_string(b.elem_size * 8) +
                          "-bit)");
  return *b.lm64;
}

TrainConfig train_config(Options& o) {
  TrainConfig tc;
  tc.batch_size = static_cast<std::size_t>(o.int_of("batch_size", 8));
  tc.max_steps = static_cast<std::size_t>(o.int_of("max_steps", 500));
  tc.lr = o.num("lr", tc.lr);
  tc.weight_decay = o.num("weight_decay", tc.weight_decay);
  tc.dropout = o.num("dropout", tc.dropout);
  tc.eval_every = static_cast<std::size_t>(o.int_of("eval_every", 50));
  tc.seed = o.u64("seed", 0);
  tc.precision = o.str("precision", "f64");
  tc.clip_norm = o.num("clip_norm", tc.clip_norm);
  tc.speaker_targets = o.flag("speaker_targets", true);
  tc.window_stride = static_cast<std::size_t>(o.int_of("window_stride", 0));
  tc.validate();
  return tc;
}

std::vector<TokenSeq> encode_all(const std::vector<Dialog>& dialogs,
                                 const Vocab& vocab) {
  std::vector<TokenSeq> out;
  out.reserve(dialogs.size());
  for (const Dialog& d : dialogs) out.push_back(encode_dialog(d, vocab));
  return out;
}

// ------------------------------------------------------------- subcommands

void cmd_ingest(Options& o, std::ostream& out) {
  std::string in = o.require("in");
  std::string format = o.str("format", "timed");
  SegmentationConfig cfg;
  cfg.ipu_gap_s = o.num("ipu_gap", cfg.ipu_gap_s);
  cfg.isolation_gap_s = o.num("isolation_gap", cfg.isolation_gap_s);
  fs::path dir = out_dir(o);
  o.done();
  IngestFormat f;
  if (format == "timed")
    f = IngestFormat::timed;
  else if (format == "turns")
    f = IngestFormat::turns;
  else
    throw InvalidArgument("unknown format '" + format + "' (timed, turns)");
  auto dialogs = ingest(in, f, cfg);
  write_dialogs((dir / "dialogs.jsonl").string(), dialogs);
  write_manifest(dir, "ingest", o, {in}, {"dialogs.jsonl"});
  out << "ingested " << dialogs.size() << " dialogs -> "
      << (dir / "dialogs.jsonl").string() << "\n";
}

void cmd_synth(Options& o, std::ostream& out) {
  auto n = static_cast<std::size_t>(o.int_of("n", 100));
  std::uint64_t seed = o.u64("seed", 0);
  std::string grammar_path = o.str("grammar", "");
  fs::path dir = out_dir(o);
  o.done();
  Grammar g = grammar_path.empty() ? Grammar::builtin()
                                   : Grammar::from_json_file(grammar_path);
  auto dialogs = synth_corpus(g, n, seed);
  write_dialogs((dir / "dialogs.jsonl").string(), dialogs);
  std::vector<std::string> inputs;
  if (!grammar_path.empty()) inputs.push_back(grammar_path);
  write_manifest(dir, "synth", o, inputs, {"dialogs.jsonl"});
  out << "generated " << dialogs.size() << " dialogs -> "
      << (dir / "dialogs.jsonl").string() << "\n";
}

void cmd_train_lm(Options& o, std::ostream& out) {
  std::string corpus_path = o.require("corpus");
  SplitSpec ss = split_spec(o);
  TrainConfig tc = train_config(o);
  TransformerConfig mc;
  mc.n_layers = static_cast<int>(o.int_of("n_layers", 2));
  mc.n_heads = static_cast<int>(o.int_of("n_heads", 2));
  mc.d_model = static_cast<int>(o.int_of("d_model", 64));
  mc.d_ff = static_cast<int>(o.int_of("d_ff", 4 * mc.d_model));
  mc.ctx_len = static_cast<int>(o.int_of("ctx_len", 256));
  mc.dropout_p = tc.dropout;
  auto vocab_size = static_cast<std::size_t>(o.int_of("vocab_size", 512));
  fs::path dir = out_dir(o);
  o.done();

  auto dialogs = load_corpus(corpus_path);
  CorpusSplit split = make_split(dialogs, ss);
  Vocab vocab = Vocab::train(split.train, vocab_size);
  mc.vocab_size = static_cast<int>(vocab.size());
  auto train_seqs = encode_all(split.train, vocab);
  auto valid_seqs = encode_all(split.valid, vocab);

  TrainLog log;
  if (tc.precision == "f64") {
    auto m = TransformerLM<double>::init(mc, tc.seed);
    log = train_lm(m, train_seqs, valid_seqs, tc);
    save_lm(m, vocab.fingerprint(), (dir / "model.ckpt").string());
  } else {
    auto m = TransformerLM<float>::init(mc, tc.seed);
    log = train_lm(m, train_seqs, valid_seqs, tc);
    save_lm(m, vocab.fingerprint(), (dir / "model.ckpt").string());
  }
  vocab.save((dir / "vocab.json").string());
  write_train_log_csv((dir / "train_log.csv").string(), log);
  write_manifest(dir, "train-lm", o, {corpus_path},
                 {"model.ckpt", "vocab.json", "train_log.csv"});
  out << "trained lm on " << split.train.size() << " dialogs, best step "
      << log.best_step << ", valid loss " << fmt_double(log.best_valid)
      << "\n";
}

void cmd_train_lstm(Options& o, std::ostream& out) {
  std::string corpus_path = o.require("corpus");
  SplitSpec ss = split_spec(o);
  TrainConfig tc = train_config(o);
  LstmConfig mc;
  mc.d_embed = static_cast<int>(o.int_of("d_embed", 64));
  mc.hidden = static_cast<int>(o.int_of("hidden", 128));
  mc.n_layers = static_cast<int>(o.int_of("n_layers", 2));
  mc.dropout_p = tc.dropout;
  auto vocab_size = static_cast<std::size_t>(o.int_of("vocab_size", 512));
  auto ctx_len = static_cast<std::size_t>(o.int_of("ctx_len", 256));
  fs::path dir = out_dir(o);
  o.done();

  auto dialogs = load_corpus(corpus_path);
  CorpusSplit split = make_split(dialogs, ss);
  Vocab vocab = Vocab::train(split.train, vocab_size);
  mc.vocab_size = static_cast<int>(vocab.size());
  auto train_seqs = encode_all(split.train, vocab);
  auto valid_seqs = encode_all(split.valid, vocab);

  TrainLog log;
  if (tc.precision == "f64") {
    auto m = LstmClassifier<double>::init(mc, tc.seed);
    log = train_lstm(m, train_seqs, valid_seqs, tc, ctx_len);
    save_lstm(m, vocab.fingerprint(), (dir / "model.ckpt").string());
  } else {
    auto m = LstmClassifier<float>::init(mc, tc.seed);
    log = train_lstm(m, train_seqs, valid_seqs, tc, ctx_len);
    save_lstm(m, vocab.fingerprint(), (dir / "model.ckpt").string());
  }
  vocab.save((dir / "vocab.json").string());
  write_train_log_csv((dir / "train_log.csv").string(), log);
  write_manifest(dir, "train-lstm", o, {corpus_path},
                 {"model.ckpt", "vocab.json", "train_log.csv"});
  out << "trained lstm on " << split.train.size() << " dialogs, best step "
      << log.best_step << ", valid loss " << fmt_double(log.best_valid)
      << "\n";
}

void cmd_fit_pos(Options& o, std::ostream& out) {
  std::string corpus_path = o.require("corpus");
  SplitSpec ss = split_spec(o);
  double alpha = o.num("alpha", 1.0);
  fs::path dir = out_dir(o);
  o.done();
  auto dialogs = load_corpus(corpus_path);
  CorpusSplit split = make_split(dialogs, ss);
  PosBigram table = PosBigram::fit(split.train, alpha);
  table.save((dir / "pos.json").string());
  write_manifest(dir, "fit-pos", o, {corpus_path}, {"pos.json"});
  out << "fitted pos bigram over " << table.total_words() << " words ("
      << table.cells().size() << " tag pairs) -> "
      << (dir / "pos.json").string() << "\n";
}

void cmd_eval(Options& o, std::ostream& out) {
  std::string model_path = o.require("model");
  std::string vocab_path = o.require("vocab");
  std::string corpus_path = o.require("corpus");
  SplitSpec ss = split_spec(o);
  std::string split_name = o.str("split", "test");
  std::string tune = o.str("tune_on", "valid");
  fs::path dir = out_dir(o);
  o.done();

  Vocab vocab = Vocab::load(vocab_path);
  ModelBundle model = load_model(model_path, vocab);
  auto dialogs = load_corpus(corpus_path);
  CorpusSplit split = make_split(dialogs, ss);
  auto test = pick_split(dialogs, split, split_name);
  TuneOn mode;
  if (tune == "valid")
    mode = TuneOn::kValid;
  else if (tune == "test")
    mode = TuneOn::kTest;
  else
    throw InvalidArgument("unknown tune-on '" + tune + "' (valid, test)");

  EvalReport rep = evaluate_model(*model.predictor, test, split.valid, vocab,
                                  default_grid(), mode);
  TrpSeries series = collect_series(*model.predictor, test, vocab);
  write_report_csv((dir / "report.csv").string(),
                   {{model.kind, split_name, -1, rep}});
  write_series_csv((dir / "series.csv").string(), series, test, vocab);
  write_manifest(dir, "eval", o, {model_path, vocab_path, corpus_path},
                 {"report.csv", "series.csv"});
  out << model.kind << " bacc " << fmt_double(rep.bacc) << " at threshold "
      << fmt_double(rep.threshold) << " on " << test.size() << " dialogs\n";
}

void cmd_ablate(Options& o, std::ostream& out) {
  std::string model_path = o.require("model");
  std::string vocab_path = o.require("vocab");
  std::string corpus_path = o.require("corpus");
  SplitSpec ss = split_spec(o);
  std::string split_name = o.str("split", "test");
  auto k_max = static_cast<std::size_t>(o.int_of("k_max", 4));
  fs::path dir = out_dir(o);
  o.done();

  Vocab vocab = Vocab::load(vocab_path);
  ModelBundle model = load_model(model_path, vocab);
  auto dialogs = load_corpus(corpus_path);
  CorpusSplit split = make_split(dialogs, ss);
  auto test = pick_split(dialogs, split, split_name);

  std::vector<ReportRow> rows;
  for (std::size_t k = 0; k <= k_max; ++k) {
    EvalReport rep =
        ablate_context(*model.predictor, test, vocab, default_grid(), k);
    rows.push_back({model.kind, split_name, static_cast<int>(k), rep});
    out << "k=" << k << " bacc " << fmt_double(rep.bacc) << "\n";
  }
  write_report_csv((dir / "report.csv").string(), rows);
  write_manifest(dir, "ablate", o, {model_path, vocab_path, corpus_path},
                 {"report.csv"});
}

struct InspectSetup {
  Vocab vocab;
  std::vector<Dialog> dialogs;
  std::vector<IgTarget> targets;
  ModelBundle model;
  std::vector<std::string> input_paths;
};

InspectSetup inspect_setup(Options& o, const std::string& what) {
  std::string model_path = o.require("model");
  std::string vocab_path = o.require("vocab");
  std::string corpus_path = o.require("corpus");
  SplitSpec ss = split_spec(o);
  std::string split_name = o.str("split", "test");
  double trp_min = o.num("trp_min", 0.2);
  auto n_dialogs = static_cast<std::size_t>(o.int_of("n_dialogs", 500));
  auto per_dialog = static_cast<std::size_t>(o.int_of("per_dialog", 2));
  std::uint64_t seed = o.u64("seed", 0);

  InspectSetup s;
  s.vocab = Vocab::load(vocab_path);
  s.model = load_model(model_path, s.vocab);
  const TransformerLM<double>& lm = require_lm64(s.model, what);
  auto dialogs = load_corpus(corpus_path);
  CorpusSplit split = make_split(dialogs, ss);
  s.dialogs = pick_split(dialogs, split, split_name);
  s.targets = select_targets(lm, s.dialogs, s.vocab, trp_min, n_dialogs,
                             per_dialog, seed);
  s.input_paths = {model_path, vocab_path, corpus_path};
  return s;
}

void cmd_inspect_attn(Options& o, std::ostream& out) {
  auto layer = static_cast<int>(o.int_of("layer", -1));
  fs::path dir = out_dir(o);
  InspectSetup s = inspect_setup(o, "inspect-attn");
  o.done();
  auto rows =
      aggregate_attention(*s.model.lm64, s.dialogs, s.vocab, s.targets, layer);
  write_attribution_csv((dir / "attribution.csv").string(), rows);
  write_manifest(dir, "inspect-attn", o, s.input_paths, {"attribution.csv"});
  out << "aggregated attention for " << rows.size() << " targets\n";
}

void cmd_inspect_ig(Options& o, std::ostream& out) {
  IgConfig cfg;
  cfg.steps = static_cast<std::size_t>(o.int_of("steps", 128));
  std::string baseline = o.str("baseline", "unk");
  std::string target = o.str("target", "prob");
  std::string quad = o.str("quadrature", "trapezoid");
  fs::path dir = out_dir(o);
  InspectSetup s = inspect_setup(o, "inspect-ig");
  o.done();
  if (baseline == "unk")
    cfg.baseline = IgBaseline::kUnk;
  else if (baseline == "zero")
    cfg.baseline = IgBaseline::kZero;
  else
    throw InvalidArgument("unknown baseline '" + baseline + "' (unk, zero)");
  if (target == "prob")
    cfg.target = IgTargetKind::kTrpProb;
  else if (target == "logit")
    cfg.target = IgTargetKind::kTrpLogit;
  else
    throw InvalidArgument("unknown target '" + target + "' (prob, logit)");
  if (quad == "trapezoid")
    cfg.quadrature = IgQuadrature::kTrapezoid;
  else if (quad == "left")
    cfg.quadrature = IgQuadrature::kLeft;
  else
    throw InvalidArgument("unknown quadrature '" + quad +
                          "' (trapezoid, left)");
  cfg.validate();

  std::vector<TurnAttribution> rows;
  double worst = 0.0;
  for (const IgTarget& t : s.targets) {
    IgAttribution a = integrated_gradients(
        *s.model.lm64, s.vocab, s.dialogs[t.dialog_index], t.position, cfg);
    rows.push_back(a.turn);
    double delta = std::abs(a.f_input - a.f_baseline);
    if (delta > 0) worst = std::max(worst, a.residual / delta);
  }
  write_attribution_csv((dir / "attribution.csv").string(), rows);
  write_manifest(dir, "inspect-ig", o, s.input_paths, {"attribution.csv"});
  out << "integrated gradients for " << rows.size()
      << " targets, worst completeness residual "
      << fmt_double(worst) << " of |dF|\n";
}

void cmd_project(Options& o, std::ostream& out) {
  std::string model_path = o.require("model");
  std::string vocab_path = o.require("vocab");
  std::string corpus_path = o.require("corpus");
  SplitSpec ss = split_spec(o);
  std::string split_name = o.str("split", "test");
  std::string dialog_id = o.str("dialog", "");
  long long position = o.int_of("position", -1);
  ProjectConfig cfg;
  cfg.nucleus_p = o.num("nucleus_p", cfg.nucleus_p);
  cfg.max_len = static_cast<std::size_t>(o.int_of("max_len", 50));
  cfg.n_samples = static_cast<std::size_t>(o.int_of("n_samples", 1000));
  cfg.seed = o.u64("seed", 0);
  cfg.inclusive = o.flag("inclusive", false);
  bool dump = o.flag("dump_samples", false);
  fs::path dir = out_dir(o);
  o.done();
  cfg.validate();

  Vocab vocab = Vocab::load(vocab_path);
  ModelBundle model = load_model(model_path, vocab);
  auto dialogs = load_corpus(corpus_path);
  CorpusSplit split = make_split(dialogs, ss);
  auto pool = pick_split(dialogs, split, split_name);
  if (pool.empty()) throw InvalidArgument("project: empty split");

  const Dialog* dialog = &pool.front();
  if (!dialog_id.empty()) {
    dialog = nullptr;
    for (const Dialog& d : pool)
      if (d.id == dialog_id) dialog = &d;
    if (!dialog)
      throw InvalidArgument("dialog '" + dialog_id + "' not in split '" +
                            split_name + "'");
  }
  TokenSeq seq = encode_dialog(*dialog, vocab);
  std::size_t cut;
  if (position >= 0) {
    cut = static_cast<std::size_t>(position);
    if (cut >= seq.size())
      throw InvalidArgument("position " + std::to_string(position) +
                            " out of range for dialog " + dialog->id +
                            " (length " + std::to_string(seq.size()) + ")");
  } else {
    // Default: cut the longest turn in half, a genuinely open position.
    std::size_t best_turn = 0, best_len = 0;
    for (std::size_t i = 0; i < dialog->turns.size(); ++i)
      if (dialog->turns[i].words.size() > best_len) {
        best_len = dialog->turns[i].words.size();
        best_turn = i;
      }
    std::size_t lo = 0, hi = 0;
    for (std::size_t t = 0; t < seq.size(); ++t)
      if (seq.turn_index[t] == static_cast<int>(best_turn)) {
        if (hi == 0) lo = t;
        hi = t + 1;
      }
    cut = lo + (hi - lo) / 2;
    while (cut > lo && seq.word_index[cut] < 0) --cut;
  }
  TokenSeq prefix = slice_seq(seq, 0, cut + 1);

  std::vector<std::vector<int>> samples;
  TurnLengthHistogram hist;
  std::string prefix_id = dialog->id + ":" + std::to_string(cut);
  if (model.lm64)
    hist = project_turn_end(*model.lm64, prefix, cfg, prefix_id,
                            dump ? &samples : nullptr);
  else if (model.lm32)
    hist = project_turn_end(*model.lm32, prefix, cfg, prefix_id,
                            dump ? &samples : nullptr);
  else
    throw InvalidArgument("project needs a transformer checkpoint (got " +
                          model.kind + ")");

  write_histogram_csv((dir / "histogram.csv").string(), {hist});
  std::vector<std::string> outputs = {"histogram.csv"};
  if (dump) {
    std::ostringstream txt;
    txt << "prefix " << prefix_id << ": " << decode(prefix.ids, vocab)
        << "\n";
    std::size_t n_show = std::min<std::size_t>(samples.size(), 20);
    for (std::size_t i = 0; i < n_show; ++i)
      txt << "sample " << i << ": " << decode(samples[i], vocab) << "\n";
    write_file(dir / "samples.txt", txt.str());
    outputs.push_back("samples.txt");
  }
  write_manifest(dir, "project", o, {model_path, vocab_path, corpus_path},
                 outputs);
  out << "projected " << cfg.n_samples << " rollouts from " << prefix_id
      << (hist.truncated ? " (prefix truncated)" : "") << ", censored "
      << hist.counts.back() << "\n";
}

// ------------------------------------------------------------------- plot

std::size_t col(const Csv& csv, const std::string& name) {
  for (std::size_t i = 0; i < csv.header.size(); ++i)
    if (csv.header[i] == name) return i;
  throw ParseError("csv is missing column '" + name + "'");
}

double num_field(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(what + ": not a number: '" + s + "'");
  }
}

std::string plot_series(const Csv& csv) {
  std::size_t c_id = col(csv, "dialog_id"), c_tok = col(csv, "token"),
              c_lab = col(csv, "label"), c_prob = col(csv, "prob");
  const std::string& first = csv.rows[0][c_id];
  std::vector<std::string> labels;
  std::vector<double> values;
  std::vector<char> highlight;
  for (const auto& r : csv.rows) {
    if (r[c_id] != first) continue;
    labels.push_back(r[c_tok]);
    values.push_back(num_field(r[c_prob], "prob"));
    highlight.push_back(r[c_lab] == "1");
  }
  return svg_bar_chart("turn-shift probability: " + first, labels, values,
                       highlight, "p(shift)");
}

std::string plot_report(const Csv& csv) {
  std::size_t c_model = col(csv, "model"), c_k = col(csv, "k"),
              c_bacc = col(csv, "bacc");
  std::set<int> ks;
  std::map<std::string, std::map<int, double>> by_model;
  for (const auto& r : csv.rows) {
    int k = static_cast<int>(num_field(r[c_k], "k"));
    if (k < 0) continue;  // whole-dialog rows have no x position
    ks.insert(k);
    by_model[r[c_model]][k] = num_field(r[c_bacc], "bacc");
  }
  if (ks.empty())
    throw InvalidArgument("no ablation rows (k >= 0) to plot");
  std::vector<std::string> x_labels;
  for (int k : ks) x_labels.push_back("k=" + std::to_string(k));
  std::vector<std::pair<std::string, std::vector<double>>> series;
  for (const auto& [name, vals] : by_model) {
    std::vector<double> ys;
    for (int k : ks) {
      auto it = vals.find(k);
      if (it == vals.end())
        throw InvalidArgument("model " + name + " is missing k=" +
                              std::to_string(k));
      ys.push_back(it->second);
    }
    series.push_back({name, ys});
  }
  return svg_line_chart("balanced accuracy by context turns", x_labels,
                        series, "bAcc");
}

std::string plot_attribution(const Csv& csv) {
  std::size_t c_off = col(csv, "turn_offset"), c_val = col(csv, "value"),
              c_kind = col(csv, "kind");
  std::map<std::string, std::map<int, std::vector<double>>> groups;
  for (const auto& r : csv.rows) {
    int off = static_cast<int>(num_field(r[c_off], "turn_offset"));
    groups[r[c_kind]][off].push_back(num_field(r[c_val], "value"));
  }
  std::vector<BoxGroup> boxes;
  for (const auto& [kind, by_off] : groups)
    for (int off = 0; off >= -4; --off) {
      auto it = by_off.find(off);
      if (it == by_off.end()) continue;
      boxes.push_back({"t" + std::to_string(off), kind, it->second});
    }
  return svg_box_chart("attribution by turn offset", boxes, "value");
}

std::string plot_histogram(const Csv& csv) {
  std::size_t c_id = col(csv, "prefix_id"), c_b = col(csv, "bucket"),
              c_n = col(csv, "count");
  const std::string& first = csv.rows[0][c_id];
  std::vector<std::string> labels;
  std::vector<double> values;
  for (const auto& r : csv.rows) {
    if (r[c_id] != first) continue;
    labels.push_back(r[c_b]);
    values.push_back(num_field(r[c_n], "count"));
  }
  if (labels.size() > 1) labels.back() += "+";  // censored bucket
  return svg_bar_chart("projected turn length: " + first, labels, values, {},
                       "rollouts");
}

void cmd_plot(Options& o, std::ostream& out) {
  std::string in = o.require("in");
  fs::path dir = out_dir(o);
  o.done();
  Csv csv = read_csv(in);
  if (csv.rows.empty()) throw InvalidArgument(in + ": no rows");
  std::set<std::string> cols(csv.header.begin(), csv.header.end());
  std::string svg;
  if (cols.count("prob") && cols.count("token"))
    svg = plot_series(csv);
  else if (cols.count("bacc"))
    svg = plot_report(csv);
  else if (cols.count("turn_offset"))
    svg = plot_attribution(csv);
  else if (cols.count("bucket"))
    svg = plot_histogram(csv);
  else
    throw ParseError(in + ": unrecognized csv schema");
  write_file(dir / "chart.svg", svg);
  write_manifest(dir, "plot", o, {in}, {"chart.svg"});
  out << "wrote " << (dir / "chart.svg").string() << "\n";
}

// --------------------------------------------------------------- dispatch

constexpr const char* kUsage =
    "usage: ttlab <command> [--key value ...]\n"
    "\n"
    "commands:\n"
    "  ingest       segment raw transcripts into dialog turns\n"
    "  synth        generate a synthetic dialog corpus\n"
    "  train-lm     train the transformer language model\n"
    "  train-lstm   train the recurrent classifier\n"
    "  fit-pos      fit the part-of-speech bigram table\n"
    "  eval         threshold-swept balanced accuracy report\n"
    "  ablate       balanced accuracy under truncated context\n"
    "  inspect-attn attention mass over recent turns\n"
    "  inspect-ig   integrated-gradients attributions\n"
    "  project      sample turn completions into a length histogram\n"
    "  plot         render a csv artifact as svg\n"
    "\n"
    "Common options: --config file.json (flags override config keys),\n"
    "--out dir (required; receives artifacts and manifest.json),\n"
    "--train-ratio/--valid-ratio/--test-ratio/--split-seed for commands\n"
    "that split a corpus, --threads n (accepted; compute is single-threaded).\n";

}  // namespace

void run_command(const std::vector<std::string>& args, std::ostream& out) {
  if (args.empty())
    throw InvalidArgument(std::string("no command given\n") + kUsage);
  const std::string& cmd = args[0];
  if (cmd == "help" || cmd == "--help" || cmd == "-h") {
    out << kUsage;
    return;
  }
  if (cmd == "version" || cmd == "--version") {
    out << "ttlab " << kVersion << "\n";
    return;
  }
  Options o(std::vector<std::string>(args.begin() + 1, args.end()));
  long long threads = o.int_of("threads", 1);  // accepted for compatibility
  if (threads < 1) throw InvalidArgument("option --threads must be >= 1");
  if (cmd == "ingest")
    cmd_ingest(o, out);
  else if (cmd == "synth")
    cmd_synth(o, out);
  else if (cmd == "train-lm")
    cmd_train_lm(o, out);
  else if (cmd == "train-lstm")
    cmd_train_lstm(o, out);
  else if (cmd == "fit-pos")
    cmd_fit_pos(o, out);
  else if (cmd == "eval")
    cmd_eval(o, out);
  else if (cmd == "ablate")
    cmd_ablate(o, out);
  else if (cmd == "inspect-attn")
    cmd_inspect_attn(o, out);
  else if (cmd == "inspect-ig")
    cmd_inspect_ig(o, out);
  else if (cmd == "project")
    cmd_project(o, out);
  else if (cmd == "plot")
    cmd_plot(o, out);
  else
    throw InvalidArgument("unknown command '" + cmd + "'\n" + kUsage);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  try {
    run_command(args, out);
    return 0;
  } catch (const Error& e) {
    err << "ttlab error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "ttlab error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace ttlab
