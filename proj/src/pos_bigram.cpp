#include "pos_bigram.hpp"

#include <fstream>
#include <json.hpp>

#include "error.hpp"

namespace ttlab {

using nlohmann::json;

PosBigram PosBigram::fit(const std::vector<Dialog>& dialogs, double alpha) {
  if (alpha < 0) throw InvalidArgument("fit_pos_bigram: negative alpha");
  PosBigram table;
  table.alpha_ = alpha;
  for (const Dialog& d : dialogs) {
    for (std::size_t ti = 0; ti < d.turns.size(); ++ti) {
      const Turn& t = d.turns[ti];
      if (!t.has_pos() || t.pos.size() != t.words.size())
        throw InvalidArgument("fit_pos_bigram: dialog " + d.id +
                              " missing pos tags");
      bool final_turn = ti + 1 == d.turns.size();
      for (std::size_t wi = 0; wi < t.words.size(); ++wi) {
        bool final_word = wi + 1 == t.words.size();
        if (final_turn && final_word) continue;  // no observable continuation
        const std::string& prev = wi == 0 ? kBosTag : t.pos[wi - 1];
        Cell& cell = table.cells_[{prev, t.pos[wi]}];
        ++cell.n_total;
        ++table.total_words_;
        if (final_word) {
          ++cell.n_shift;
          ++table.total_shifts_;
        }
      }
    }
  }
  if (table.total_words_ == 0)
    throw InvalidArgument("fit_pos_bigram: no countable words");
  table.prior_ = static_cast<double>(table.total_shifts_) /
                 static_cast<double>(table.total_words_);
  return table;
}

double PosBigram::predict_pair(const std::string& prev_tag,
                               const std::string& cur_tag) const {
  auto it = cells_.find({prev_tag, cur_tag});
  if (it == cells_.end()) return prior_;
  return (static_cast<double>(it->second.n_shift) + alpha_) /
         (static_cast<double>(it->second.n_total) + 2.0 * alpha_);
}

std::vector<double> PosBigram::predict_turn(
    const std::vector<std::string>& tags) const {
  std::vector<double> out;
  out.reserve(tags.size());
  for (std::size_t i = 0; i < tags.size(); ++i)
    out.push_back(predict_pair(i == 0 ? kBosTag : tags[i - 1], tags[i]));
  return out;
}

std::vector<double> PosBigram::predict_dialog(
    const std::vector<std::vector<std::string>>& turn_tags) const {
  std::vector<double> out;
  for (const auto& tags : turn_tags) {
    std::vector<double> p = predict_turn(tags);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<double> PosBigram::predict_sequence(
    const std::vector<std::vector<std::string>>& turn_tags) const {
  std::vector<double> out;
  const std::string* prev = nullptr;
  for (const auto& tags : turn_tags) {
    for (const std::string& tag : tags) {
      out.push_back(predict_pair(prev ? *prev : kBosTag, tag));
      prev = &tag;
    }
  }
  return out;
}

void PosBigram::save(const std::string& path) const {
  json jc = json::array();
  for (const auto& [key, cell] : cells_)
    jc.push_back(json::array({key.first, key.second, cell.n_total,
                              cell.n_shift}));
  json j = {{"version", 1},
            {"alpha", alpha_},
            {"prior", prior_},
            {"total_words", total_words_},
            {"total_shifts", total_shifts_},
            {"cells", std::move(jc)}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

PosBigram PosBigram::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    PosBigram table;
    table.alpha_ = j.at("alpha").get<double>();
    table.prior_ = j.at("prior").get<double>();
    table.total_words_ = j.at("total_words").get<std::int64_t>();
    table.total_shifts_ = j.at("total_shifts").get<std::int64_t>();
    for (const json& c : j.at("cells")) {
      Cell cell{c.at(2).get<std::int64_t>(), c.at(3).get<std::int64_t>()};
      if (cell.n_shift > cell.n_total)
        throw ParseError(path + ": shift count exceeds total");
      table.cells_[{c.at(0).get<std::string>(),
                    c.at(1).get<std::string>()}] = cell;
    }
    return table;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace ttlab
