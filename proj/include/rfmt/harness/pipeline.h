#pragma once

// Experiment configuration and the content-addressed pipeline stages shared by
// the CLI and the experiment runner.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rfmt/corpus/corpus.h"
#include "rfmt/models/layers.h"
#include "rfmt/models/mlm.h"
#include "rfmt/models/nmt.h"
#include "rfmt/noise/noise.h"
#include "rfmt/text/vocab.h"
#include "rfmt/training/config.h"
#include "rfmt/training/trainer.h"

namespace rfmt {

inline const std::vector<std::string> kAllSystems = {"baseline", "robust_baseline", "mle_ft",
                                                     "mrt_bleu", "ours",            "ours_robust"};

struct ExperimentSpec {
  TaskSpec task;
  // General-domain pre-training pairs: clean, part statements.
  std::size_t pretrain_size = 5000;
  double pretrain_statement_fraction = 0.5;
  // In-domain noisy questions: source-only fine-tuning, validation, test.
  std::size_t train_size = 2000;
  std::size_t valid_size = 100;
  std::size_t test_size = 500;
  std::size_t vocab_min_count = 3;
  TransformerDims dims;

  std::vector<std::string> systems = {"baseline", "mle_ft", "mrt_bleu", "ours"};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  bool append_qmark = false;
  bool gec_pre = false;
  std::string embedder = "oracle";  // "oracle" | "trained"
  std::vector<std::pair<double, double>> sweep = {{0.5, 0.5}, {0.4, 0.6}, {0.3, 0.7},
                                                  {0.2, 0.8}, {0.15, 0.85}, {0.1, 0.9}};
  NoiseConfig robust_noise{0.01, 0.05, 0.05, 0};
  std::size_t bootstrap_resamples = 1000;

  TrainConfig pretrain;
  TrainConfig mlm;
  TrainConfig embedder_train;
  TrainConfig mle_ft;
  TrainConfig mrt;
  TrainConfig mrt_bleu;

  static ExperimentSpec defaults();
  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep the defaults; unknown top-level keys are rejected.
  static ExperimentSpec from_json(const nlohmann::json& j);
  static ExperimentSpec load(const std::string& path);
};

// Source lines from a corpus (.jsonl: noisy_src) or a plain text file.
// Model shape as JSON: d_model, heads, d_ff, encoder_layers, decoder_layers,
// dropout. Missing keys keep the defaults.
nlohmann::json dims_to_json(const TransformerDims& d);
TransformerDims dims_from_json(const nlohmann::json& j);

std::vector<std::string> load_sources(const std::string& path);
std::vector<TokenSeq> tokenize_all(const std::vector<std::string>& lines, const Vocab& vocab);

// Clean copy followed by three copies, each carrying one noise type.
std::vector<SentencePair> robust_pairs(const std::vector<CorpusTriple>& corpus, const Vocab& vocab,
                                       const NoiseConfig& noise, const KeyboardMap& keyboard);
std::vector<SentencePair> clean_pairs(const std::vector<CorpusTriple>& corpus, const Vocab& vocab);
std::vector<SentencePair> text_pairs(const std::vector<std::string>& src, const std::vector<std::string>& tgt,
                                     const Vocab& vocab);

// Test-time source preprocessing (append "?" and/or GEC before decoding).
std::string preprocess_source(const std::string& text, bool append_qmark, const Corrector* gec);

struct TaskData {
  std::vector<CorpusTriple> pretrain;
  CorpusSplit in_domain;
  Vocab vocab;
};

// Runs and caches pipeline stages under `cache_dir`. A stage's key hashes its
// configuration together with the content hashes of its inputs; with `resume`
// a stage whose output directory is already complete is reused.
class Pipeline {
 public:
  Pipeline(ExperimentSpec spec, std::string cache_dir, bool resume, std::function<void(const std::string&)> log);

  const ExperimentSpec& spec() const { return spec_; }
  const TaskData& data();

  std::shared_ptr<const MaskedLm> mlm(std::uint64_t seed);
  std::shared_ptr<const MaskedLm> embedder_mlm(std::uint64_t seed);
  std::shared_ptr<const NmtModel> baseline(std::uint64_t seed, bool robust);
  std::vector<std::string> forward_translations(std::uint64_t seed);
  // `weights` overrides the MRT score weights (the sweep).
  std::shared_ptr<const NmtModel> system(const std::string& name, std::uint64_t seed,
                                         const ScoreWeights* weights = nullptr);
  // Test-set hypotheses of a system.
  std::vector<std::string> translate_test(const std::string& name, std::uint64_t seed,
                                          const ScoreWeights* weights = nullptr);

  std::size_t stages_run() const { return stages_run_; }
  std::size_t stages_reused() const { return stages_reused_; }

 private:
  struct StageOut {
    std::string dir;
    std::string hash;  // content hash of the stage outputs
  };
  // Runs `body(dir)` unless a completed stage with the same key exists.
  StageOut stage(const std::string& name, const nlohmann::json& key,
                 const std::function<void(const std::string& dir)>& body);
  StageOut forward_stage(std::uint64_t seed);
  StageOut mlm_stage(std::uint64_t seed);
  StageOut embedder_stage(std::uint64_t seed);
  StageOut system_stage(const std::string& name, std::uint64_t seed, const ScoreWeights* weights);

  ExperimentSpec spec_;
  std::string cache_dir_;
  bool resume_;
  std::function<void(const std::string&)> log_;
  std::unique_ptr<TaskData> data_;
  StageOut data_stage_;
  std::map<std::string, StageOut> done_;  // stage dir -> output, this run
  std::size_t stages_run_ = 0;
  std::size_t stages_reused_ = 0;
};

}  // namespace rfmt
