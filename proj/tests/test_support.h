#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "rfmt/corpus/task.h"
#include "rfmt/harness/pipeline.h"
#include "rfmt/models/layers.h"
#include "rfmt/text/vocab.h"

namespace rfmt::testing {

// Small enough that a forward pass is a few hundred microseconds.
inline TransformerDims tiny_dims() { return TransformerDims{16, 2, 32, 1, 1, 0.0}; }

inline Vocab task_vocab() {
  const TaskSpec s = TaskSpec::default_spec();
  std::vector<std::string> words = s.source_lexicon();
  for (const std::string& w : s.source_lexicon()) words.push_back(s.target_word(w));
  words.push_back(s.particle);
  words.push_back("?");
  std::string line;
  for (const std::string& w : words) line += w + " ";
  return Vocab::build({line}, 1);
}

// A complete experiment that runs in seconds: tiny corpora, tiny models, a
// handful of steps per stage.
inline ExperimentSpec tiny_experiment() {
  ExperimentSpec s = ExperimentSpec::defaults();
  s.pretrain_size = 300;
  s.train_size = 40;
  s.valid_size = 8;
  s.test_size = 20;
  s.vocab_min_count = 1;
  s.dims = tiny_dims();
  s.seeds = {1};
  s.bootstrap_resamples = 100;
  s.sweep = {{0.5, 0.5}, {0.15, 0.85}};
  for (TrainConfig* c : {&s.pretrain, &s.mlm, &s.embedder_train, &s.mle_ft, &s.mrt, &s.mrt_bleu}) {
    c->steps = 6;
    c->checkpoint_every = 3;
    c->max_len = 12;
  }
  s.pretrain.steps = 40;
  s.pretrain.checkpoint_every = 20;
  s.mrt.beam = 2;
  s.mrt_bleu.beam = 2;
  return s;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("rfmt_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::string path() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace rfmt::testing
