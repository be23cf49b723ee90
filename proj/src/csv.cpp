#include "csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "error.hpp"

namespace ttlab {

std::string fmt_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc())
    throw NumericError("fmt_double: conversion failed");
  return std::string(buf, p);
}

std::string csv_escape(const std::string& field) {
  bool needs = field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_csv(const std::string& path, const Csv& csv) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) f << ',';
      f << csv_escape(fields[i]);
    }
    f << '\n';
  };
  line(csv.header);
  for (const auto& r : csv.rows) {
    if (r.size() != csv.header.size())
      throw InvalidArgument("csv row width " + std::to_string(r.size()) +
                            " != header width " +
                            std::to_string(csv.header.size()));
    line(r);
  }
  if (!f) throw IoError("write failed: " + path);
}

namespace {

// Splits one logical CSV record; returns false at end of input. Handles
// quoted fields spanning newlines.
bool read_record(std::istream& in, std::vector<std::string>& out) {
  out.clear();
  std::string field;
  bool quoted = false, any = false;
  int c;
  while ((c = in.get()) != EOF) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field += static_cast<char>(c);
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c == '\r') {
      // swallow; \r\n handled by the \n branch
    } else {
      field += static_cast<char>(c);
    }
  }
  if (!any) return false;
  out.push_back(std::move(field));
  return true;
}

}  // namespace

Csv read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  Csv csv;
  if (!read_record(f, csv.header))
    throw ParseError(path + ": empty file");
  std::vector<std::string> rec;
  while (read_record(f, rec)) {
    if (rec.size() == 1 && rec[0].empty()) continue;  // blank line
    if (rec.size() != csv.header.size())
      throw ParseError(path + ": row " + std::to_string(csv.rows.size() + 2) +
                       " has " + std::to_string(rec.size()) + " fields, not " +
                       std::to_string(csv.header.size()));
    csv.rows.push_back(rec);
  }
  return csv;
}

void write_train_log_csv(const std::string& path, const TrainLog& log) {
  Csv csv;
  csv.header = {"step", "train_loss", "valid_loss"};
  for (const TrainRecord& r : log.records)
    csv.rows.push_back({std::to_string(r.step), fmt_double(r.train_loss),
                        std::isnan(r.valid_loss) ? std::string()
                                                 : fmt_double(r.valid_loss)});
  write_csv(path, csv);
}

void write_report_csv(const std::string& path,
                      const std::vector<ReportRow>& rows) {
  Csv csv;
  csv.header = {"model", "split", "k",   "threshold", "bacc", "tpr",
                "tnr",   "tp",    "fp",  "tn",        "fn"};
  for (const ReportRow& r : rows)
    csv.rows.push_back({r.model, r.split, std::to_string(r.k),
                        fmt_double(r.rep.threshold), fmt_double(r.rep.bacc),
                        fmt_double(r.rep.tpr), fmt_double(r.rep.tnr),
                        std::to_string(r.rep.tp), std::to_string(r.rep.fp),
                        std::to_string(r.rep.tn), std::to_string(r.rep.fn)});
  write_csv(path, csv);
}

void write_series_csv(const std::string& path, const TrpSeries& series,
                      const std::vector<Dialog>& dialogs, const Vocab& vocab) {
  std::map<std::string, TokenSeq> seqs;
  for (const Dialog& d : dialogs) seqs.emplace(d.id, encode_dialog(d, vocab));
  Csv csv;
  csv.header = {"dialog_id", "position", "token", "label", "prob"};
  for (std::size_t i = 0; i < series.size(); ++i) {
    auto it = seqs.find(series.dialog_ids[i]);
    if (it == seqs.end())
      throw InvalidArgument("series references unknown dialog " +
                            series.dialog_ids[i]);
    csv.rows.push_back({series.dialog_ids[i],
                        std::to_string(series.positions[i]),
                        vocab.token_of(it->second.ids[series.positions[i]]),
                        series.labels[i] ? "1" : "0",
                        fmt_double(series.probs[i])});
  }
  write_csv(path, csv);
}

void write_attribution_csv(const std::string& path,
                           const std::vector<TurnAttribution>& rows) {
  Csv csv;
  csv.header = {"target_id", "turn_offset", "value", "kind"};
  for (const TurnAttribution& a : rows) {
    std::string id = a.dialog_id + ":" + std::to_string(a.position);
    const char* kind =
        a.kind == AttributionKind::kAttention ? "attention" : "ig";
    for (int off = 0; off < 5; ++off)
      csv.rows.push_back({id, std::to_string(-off),
                          fmt_double(a.values[static_cast<std::size_t>(off)]),
                          kind});
  }
  write_csv(path, csv);
}

void write_histogram_csv(const std::string& path,
                         const std::vector<TurnLengthHistogram>& hists) {
  Csv csv;
  csv.header = {"prefix_id", "bucket", "count"};
  for (const TurnLengthHistogram& h : hists)
    for (std::size_t b = 0; b < h.counts.size(); ++b)
      csv.rows.push_back({h.prefix_id, std::to_string(b),
                          std::to_string(h.counts[b])});
  write_csv(path, csv);
}

}  // namespace ttlab
