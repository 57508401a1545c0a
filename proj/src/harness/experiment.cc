#include "rfmt/harness/experiment.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>

#include "rfmt/util/error.h"
#include "rfmt/util/io.h"

namespace rfmt {
namespace {

std::vector<std::string> test_refs(Pipeline& p) {
  std::vector<std::string> refs;
  for (const CorpusTriple& t : p.data().in_domain.test) refs.push_back(t.tgt);
  return refs;
}

ResultsRow summarize(const std::string& system, std::vector<SeedResult> per_seed) {
  ResultsRow row;
  row.system = system;
  std::vector<double> b, t, q, p;
  for (const SeedResult& s : per_seed) {
    b.push_back(s.bleu);
    t.push_back(s.ter);
    q.push_back(s.qmark_rate);
    if (s.p_value) p.push_back(*s.p_value);
  }
  row.bleu = median(b);
  row.ter = median(t);
  row.qmark_rate = median(q);
  if (!p.empty()) row.p_value = median(p);
  row.per_seed = std::move(per_seed);
  return row;
}

void fill_deltas(ResultsTable& table) {
  for (ResultsRow& r : table.rows) {
    r.delta_bleu = r.bleu - table.baseline_bleu;
    r.delta_ter = r.ter - table.baseline_ter;
  }
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) throw DataError("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const ResultsRow* ResultsTable::find(const std::string& system) const {
  for (const ResultsRow& r : rows) {
    if (r.system == system) return &r;
  }
  return nullptr;
}

nlohmann::json ResultsTable::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const ResultsRow& r : rows) {
    nlohmann::json seeds = nlohmann::json::array();
    for (const SeedResult& s : r.per_seed) {
      seeds.push_back({{"seed", s.seed},
                       {"bleu", s.bleu},
                       {"ter", s.ter},
                       {"qmark_rate", s.qmark_rate},
                       {"p_value", optional_json(s.p_value)}});
    }
    rows_json.push_back({{"system", r.system},
                         {"bleu", r.bleu},
                         {"ter", r.ter},
                         {"qmark_rate", r.qmark_rate},
                         {"delta_bleu", r.delta_bleu},
                         {"delta_ter", r.delta_ter},
                         {"p_value_vs_mle_ft", optional_json(r.p_value)},
                         {"per_seed", seeds}});
  }
  return {{"rows", rows_json}, {"baseline_bleu", baseline_bleu}, {"baseline_ter", baseline_ter},
          {"aggregate", "median over seeds"}, {"ter_scale", "fraction of reference words"}};
}

std::string ResultsTable::to_text() const {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %7s %7s %7s %7s %7s %9s\n", "system", "BLEU", "TER", "?-rate", "dBLEU", "dTER",
                "p(mle_ft)");
  out += buf;
  for (const ResultsRow& r : rows) {
    char p[32];
    if (r.p_value) {
      std::snprintf(p, sizeof p, "%.3f", *r.p_value);
    } else {
      std::snprintf(p, sizeof p, "-");
    }
    std::snprintf(buf, sizeof buf, "%-24s %7.2f %7.2f %7.1f %+7.2f %+7.2f %9s\n", r.system.c_str(), r.bleu,
                  100.0 * r.ter, r.qmark_rate, r.delta_bleu, 100.0 * r.delta_ter, p);
    out += buf;
  }
  return out;
}

ResultsTable run_experiment(Pipeline& pipeline) {
  const ExperimentSpec& spec = pipeline.spec();
  const std::vector<std::string> refs = test_refs(pipeline);
  const bool have_mle = std::find(spec.systems.begin(), spec.systems.end(), "mle_ft") != spec.systems.end();

  std::map<std::string, std::vector<SeedResult>> results;
  std::vector<double> base_bleu, base_ter;
  for (std::uint64_t seed : spec.seeds) {
    const std::vector<std::string> base = pipeline.translate_test("baseline", seed);
    const EvalReport base_rep = evaluate(base, refs);
    base_bleu.push_back(base_rep.bleu);
    base_ter.push_back(base_rep.ter);
    std::vector<std::string> mle;
    if (have_mle) mle = pipeline.translate_test("mle_ft", seed);
    for (const std::string& system : spec.systems) {
      const std::vector<std::string> hyps = system == "baseline" ? base : pipeline.translate_test(system, seed);
      const EvalReport rep = evaluate(hyps, refs);
      SeedResult s{seed, rep.bleu, rep.ter, rep.question_mark_rate, std::nullopt};
      if (have_mle && system != "baseline" && system != "mle_ft" && system != "robust_baseline") {
        s.p_value = paired_bootstrap(hyps, mle, refs, spec.bootstrap_resamples, seed);
      }
      results[system].push_back(s);
    }
  }
  ResultsTable table;
  table.baseline_bleu = median(base_bleu);
  table.baseline_ter = median(base_ter);
  for (const std::string& system : spec.systems) table.rows.push_back(summarize(system, results[system]));
  fill_deltas(table);
  return table;
}

ResultsTable run_sweep(Pipeline& pipeline) {
  const ExperimentSpec& spec = pipeline.spec();
  const std::vector<std::string> refs = test_refs(pipeline);
  ResultsTable table;
  std::vector<double> base_bleu, base_ter;
  for (std::uint64_t seed : spec.seeds) {
    const EvalReport rep = evaluate(pipeline.translate_test("baseline", seed), refs);
    base_bleu.push_back(rep.bleu);
    base_ter.push_back(rep.ter);
  }
  table.baseline_bleu = median(base_bleu);
  table.baseline_ter = median(base_ter);
  for (const auto& [alpha, beta] : spec.sweep) {
    ScoreWeights w = spec.mrt.weights;
    w.alpha = alpha;
    w.beta = beta;
    std::vector<SeedResult> per_seed;
    for (std::uint64_t seed : spec.seeds) {
      const EvalReport rep = evaluate(pipeline.translate_test("ours", seed, &w), refs);
      per_seed.push_back({seed, rep.bleu, rep.ter, rep.question_mark_rate, std::nullopt});
    }
    char name[64];
    std::snprintf(name, sizeof name, "ours(a=%.2f,b=%.2f)", alpha, beta);
    table.rows.push_back(summarize(name, std::move(per_seed)));
  }
  fill_deltas(table);
  return table;
}

void write_results(const ResultsTable& table, const std::string& out_dir, const std::string& stem) {
  std::filesystem::create_directories(out_dir);
  write_file_atomic((std::filesystem::path(out_dir) / (stem + ".json")).string(), table.to_json().dump(2) + "\n");
  write_file_atomic((std::filesystem::path(out_dir) / (stem + ".txt")).string(), table.to_text());
}

}  // namespace rfmt
