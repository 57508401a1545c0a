#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfmt/corpus/task.h"

namespace rfmt {

// One synthetic record. Trainers only ever read noisy_src; tgt is for
// evaluation and data ordering.
//
// edit_log: {"frame": id, "form": "question"|"statement", "slots": [...],
//            "edits": [{"op": "declarative"}, {"op": "drop_qmark"},
//                      {"op": "typo", "index": i, "from": w, "to": w'}]}
// Edits are listed in application order.
struct CorpusTriple {
  std::string clean_src;
  std::string noisy_src;
  std::string tgt;
  nlohmann::json edit_log;

  bool operator==(const CorpusTriple&) const = default;
};

// Deterministic given spec.seed; line i draws from its own RNG stream.
std::vector<CorpusTriple> gen_corpus(const TaskSpec& spec);

// Undoes the recorded edits of one triple; returns the reconstructed clean source.
std::string reverse_edits(const TaskSpec& spec, const CorpusTriple& t);

struct CorpusSplit {
  std::vector<CorpusTriple> train;
  std::vector<CorpusTriple> valid;
  std::vector<CorpusTriple> test;
};

// Shuffled, disjoint and exhaustive. The train part is stably sorted by
// reference length. Ratios must be in [0, 1] and sum to 1.
CorpusSplit split(const std::vector<CorpusTriple>& corpus, const std::array<double, 3>& ratios, std::uint64_t seed);

std::string to_jsonl(const std::vector<CorpusTriple>& corpus);
std::vector<CorpusTriple> from_jsonl(const std::vector<std::string>& lines);
void save_corpus(const std::string& path, const std::vector<CorpusTriple>& corpus);
std::vector<CorpusTriple> load_corpus(const std::string& path);

}  // namespace rfmt
