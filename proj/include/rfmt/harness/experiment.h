#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfmt/harness/pipeline.h"
#include "rfmt/metrics/bootstrap.h"

namespace rfmt {

struct SeedResult {
  std::uint64_t seed = 0;
  double bleu = 0.0;
  double ter = 0.0;
  double qmark_rate = 0.0;
  std::optional<double> p_value;
};

struct ResultsRow {
  std::string system;
  double bleu = 0.0;  // medians over seeds
  double ter = 0.0;
  double qmark_rate = 0.0;
  double delta_bleu = 0.0;  // vs baseline
  double delta_ter = 0.0;
  // Paired bootstrap vs the MLE fine-tuned system: share of resamples where
  // MLE-FT BLEU >= this system's (median over seeds).
  std::optional<double> p_value;
  std::vector<SeedResult> per_seed;
};

struct ResultsTable {
  std::vector<ResultsRow> rows;
  double baseline_bleu = 0.0;
  double baseline_ter = 0.0;

  const ResultsRow* find(const std::string& system) const;
  nlohmann::json to_json() const;
  std::string to_text() const;
};

double median(std::vector<double> v);

// Every system of the spec on every seed; scores on the held-out test split.
ResultsTable run_experiment(Pipeline& pipeline);

// "ours" once per (alpha, beta) of the sweep grid.
ResultsTable run_sweep(Pipeline& pipeline);

// Writes <out_dir>/<stem>.json and <stem>.txt atomically.
void write_results(const ResultsTable& table, const std::string& out_dir, const std::string& stem);

}  // namespace rfmt
