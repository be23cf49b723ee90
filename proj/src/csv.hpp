#pragma once

// CSV emission and parsing for run artifacts. All numeric text goes
// through shortest-round-trip formatting so reruns are byte-identical.

#include <string>
#include <vector>

#include "attribution.hpp"
#include "bpe.hpp"
#include "eval.hpp"
#include "sampling.hpp"
#include "train.hpp"

namespace ttlab {

// Shortest decimal string that parses back to exactly v.
std::string fmt_double(double v);

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Quotes fields containing commas, quotes, or newlines (RFC 4180 style).
std::string csv_escape(const std::string& field);
void write_csv(const std::string& path, const Csv& csv);
Csv read_csv(const std::string& path);

// step,train_loss,valid_loss; valid_loss is empty on non-eval steps (nan).
void write_train_log_csv(const std::string& path, const TrainLog& log);

// model,split,k,threshold,bacc,tpr,tnr,tp,fp,tn,fn; k=-1 marks whole-dialog
// evaluation, k>=0 a context-ablation row.
struct ReportRow {
  std::string model, split;
  int k = -1;
  EvalReport rep;
};
void write_report_csv(const std::string& path,
                      const std::vector<ReportRow>& rows);

// dialog_id,position,token,label,prob; one row per scored position.
void write_series_csv(const std::string& path, const TrpSeries& series,
                      const std::vector<Dialog>& dialogs, const Vocab& vocab);

// target_id,turn_offset,value,kind; offsets run 0,-1,...,-4.
void write_attribution_csv(const std::string& path,
                           const std::vector<TurnAttribution>& rows);

// prefix_id,bucket,count; the top bucket holds censored rollouts.
void write_histogram_csv(const std::string& path,
                         const std::vector<TurnLengthHistogram>& hists);

}  // namespace ttlab
