#pragma once

// Versioned binary model container. Layout (little-endian, host order):
//
//   "TTCKPT\n"  magic
//   u32         format version (currently 1)
//   u8+bytes    kind string ("lm" or "lstm")
//   u8          element size in bytes (4 or 8)
//   u64         vocabulary fingerprint
//   u32+bytes   model config as JSON
//   u32         parameter count
//   then per parameter, in the model's declared order:
//   u16+bytes   name
//   u8          rank, then u64 dims
//   raw         elements
//
// Round-trips are bit-exact at the stored precision.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adamw.hpp"
#include "error.hpp"
#include "lstm.hpp"
#include "transformer.hpp"

namespace ttlab {

struct CheckpointInfo {
  std::string kind;
  int elem_size = 0;
  std::uint64_t vocab_hash = 0;
  std::string config_json;
};

// Header only; stops before the parameter payload.
CheckpointInfo read_checkpoint_info(const std::string& path);

namespace ckpt_detail {

constexpr char kMagic[] = "TTCKPT\n";
constexpr std::uint32_t kVersion = 1;

void write_bytes(std::ofstream& out, const void* p, std::size_t n,
                 const std::string& path);
void read_bytes(std::ifstream& in, void* p, std::size_t n,
                const std::string& path);
void write_str(std::ofstream& out, const std::string& s, std::size_t max_len,
               const std::string& path);
std::string read_str(std::ifstream& in, std::size_t len_bytes,
                     const std::string& path);
std::ifstream open_payload(const std::string& path, CheckpointInfo* info);

template <typename V>
void write_pod(std::ofstream& out, V v, const std::string& path) {
  write_bytes(out, &v, sizeof v, path);
}

template <typename V>
V read_pod(std::ifstream& in, const std::string& path) {
  V v{};
  read_bytes(in, &v, sizeof v, path);
  return v;
}

}  // namespace ckpt_detail

template <typename T>
void save_checkpoint(const std::string& path, const std::string& kind,
                     const std::string& config_json, std::uint64_t vocab_hash,
                     const std::vector<ParamRef<T>>& params) {
  namespace d = ckpt_detail;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(d::kMagic, 7);
  d::write_pod<std::uint32_t>(out, d::kVersion, path);
  d::write_str(out, kind, 1, path);
  d::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(sizeof(T)), path);
  d::write_pod<std::uint64_t>(out, vocab_hash, path);
  d::write_str(out, config_json, 4, path);
  d::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()),
                              path);
  for (const ParamRef<T>& p : params) {
    d::write_str(out, p.name, 2, path);
    const Tensor<T>& t = p.var->value;
    d::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()), path);
    for (std::size_t i = 0; i < t.rank(); ++i)
      d::write_pod<std::uint64_t>(out, t.dim(i), path);
    d::write_bytes(out, t.data(), t.size() * sizeof(T), path);
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

// Loads the payload into already-allocated parameters; names and shapes
// must match the declared order exactly.
template <typename T>
CheckpointInfo load_checkpoint_into(const std::string& path,
                                    const std::string& expect_kind,
                                    const std::vector<ParamRef<T>>& params) {
  namespace d = ckpt_detail;
  CheckpointInfo info;
  std::ifstream in = d::open_payload(path, &info);
  if (info.kind != expect_kind)
    throw StateError(path + ": checkpoint kind is '" + info.kind +
                     "', expected '" + expect_kind + "'");
  if (info.elem_size != static_cast<int>(sizeof(T)))
    throw StateError(path + ": stored precision is " +
                     std::to_string(info.elem_size * 8) + "-bit");
  auto n = d::read_pod<std::uint32_t>(in, path);
  if (n != params.size())
    throw ParseError(path + ": parameter count mismatch");
  for (const ParamRef<T>& p : params) {
    std::string name = d::read_str(in, 2, path);
    if (name != p.name)
      throw ParseError(path + ": parameter '" + name + "' where '" + p.name +
                       "' expected");
    auto rank = d::read_pod<std::uint8_t>(in, path);
    Tensor<T>& t = p.var->value;
    if (rank != t.rank()) throw ParseError(path + ": rank mismatch at " + name);
    for (std::size_t i = 0; i < t.rank(); ++i)
      if (d::read_pod<std::uint64_t>(in, path) != t.dim(i))
        throw ParseError(path + ": shape mismatch at " + name);
    d::read_bytes(in, t.data(), t.size() * sizeof(T), path);
  }
  return info;
}

inline nlohmann::json to_json(const TransformerConfig& c) {
  return {{"n_layers", c.n_layers},   {"n_heads", c.n_heads},
          {"d_model", c.d_model},     {"d_ff", c.d_ff},
          {"ctx_len", c.ctx_len},     {"vocab_size", c.vocab_size},
          {"dropout_p", c.dropout_p}};
}

inline TransformerConfig transformer_config_from_json(const nlohmann::json& j) {
  TransformerConfig c;
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.ctx_len = j.at("ctx_len").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.dropout_p = j.at("dropout_p").get<double>();
  return c;
}

inline nlohmann::json to_json(const LstmConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"d_embed", c.d_embed},
          {"hidden", c.hidden},
          {"n_layers", c.n_layers},
          {"dropout_p", c.dropout_p}};
}

inline LstmConfig lstm_config_from_json(const nlohmann::json& j) {
  LstmConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.d_embed = j.at("d_embed").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.dropout_p = j.at("dropout_p").get<double>();
  return c;
}

template <typename T>
void save_lm(TransformerLM<T>& m, std::uint64_t vocab_hash,
             const std::string& path) {
  save_checkpoint<T>(path, "lm", to_json(m.cfg).dump(), vocab_hash, m.params());
}

template <typename T>
TransformerLM<T> load_lm(const std::string& path,
                         std::uint64_t* vocab_hash = nullptr) {
  CheckpointInfo info = read_checkpoint_info(path);
  if (info.kind != "lm")
    throw StateError(path + ": checkpoint kind is '" + info.kind +
                     "', expected 'lm'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(info.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad config block: " + e.what());
  }
  TransformerConfig cfg = transformer_config_from_json(j);
  cfg.validate();
  auto m = TransformerLM<T>::init(cfg, 0);
  load_checkpoint_into<T>(path, "lm", m.params());
  if (vocab_hash) *vocab_hash = info.vocab_hash;
  return m;
}

template <typename T>
void save_lstm(LstmClassifier<T>& m, std::uint64_t vocab_hash,
               const std::string& path) {
  save_checkpoint<T>(path, "lstm", to_json(m.cfg).dump(), vocab_hash,
                     m.params());
}

template <typename T>
LstmClassifier<T> load_lstm(const std::string& path,
                            std::uint64_t* vocab_hash = nullptr) {
  CheckpointInfo info = read_checkpoint_info(path);
  if (info.kind != "lstm")
    throw StateError(path + ": checkpoint kind is '" + info.kind +
                     "', expected 'lstm'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(info.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad config block: " + e.what());
  }
  LstmConfig cfg = lstm_config_from_json(j);
  cfg.validate();
  auto m = LstmClassifier<T>::init(cfg, 0);
  load_checkpoint_into<T>(path, "lstm", m.params());
  if (vocab_hash) *vocab_hash = info.vocab_hash;
  return m;
}

}  // namespace ttlab
