#include "rfmt/harness/pipeline.h"

#include <algorithm>
#include <filesystem>
#include <set>

#include "rfmt/models/checkpoint.h"
#include "rfmt/models/embedder.h"
#include "rfmt/noise/gec.h"
#include "rfmt/scoring/scoring.h"
#include "rfmt/util/error.h"
#include "rfmt/util/io.h"
#include "rfmt/util/rng.h"

namespace fs = std::filesystem;

namespace rfmt {

nlohmann::json dims_to_json(const TransformerDims& d) {
  return {{"d_model", d.d_model}, {"heads", d.heads},     {"d_ff", d.d_ff},
          {"encoder_layers", d.encoder_layers}, {"decoder_layers", d.decoder_layers}, {"dropout", d.dropout}};
}

TransformerDims dims_from_json(const nlohmann::json& j) {
  TransformerDims d;
  d.d_model = j.value("d_model", d.d_model);
  d.heads = j.value("heads", d.heads);
  d.d_ff = j.value("d_ff", d.d_ff);
  d.encoder_layers = j.value("encoder_layers", d.encoder_layers);
  d.decoder_layers = j.value("decoder_layers", d.decoder_layers);
  d.dropout = j.value("dropout", d.dropout);
  return d;
}

namespace {

nlohmann::json noise_json(const NoiseConfig& n) {
  return {{"natural_p", n.natural_p}, {"keyboard_p", n.keyboard_p}, {"vowel_p", n.vowel_p}, {"seed", n.seed}};
}

TrainConfig seeded(TrainConfig c, std::uint64_t seed) {
  c.seed = seed;
  return c;
}

std::string path_in(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

// Hash over the sorted (file name, content hash) list of a directory.
std::string hash_outputs(const std::string& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != "stage.json") names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  std::string acc;
  for (const std::string& n : names) acc += n + ":" + content_hash(read_file(path_in(dir, n))) + "\n";
  return content_hash(acc);
}

}  // namespace

ExperimentSpec ExperimentSpec::defaults() {
  ExperimentSpec s;
  s.task = TaskSpec::default_spec();
  s.task.seed = 7;

  s.pretrain.steps = 1500;
  s.pretrain.checkpoint_every = 250;
  s.pretrain.lr = 2e-3;
  s.pretrain.warmup = 100;

  s.mlm = s.pretrain;
  s.mlm.steps = 800;
  s.mlm.checkpoint_every = 800;

  s.embedder_train = s.mlm;

  s.mle_ft.steps = 150;
  s.mle_ft.checkpoint_every = 50;
  s.mle_ft.lr = 2e-4;
  s.mle_ft.warmup = 1;

  s.mrt = s.mle_ft;
  s.mrt.max_source_tokens_per_batch = 60;
  s.mrt.steps = 100;
  s.mrt.checkpoint_every = 25;
  s.mrt_bleu = s.mrt;
  return s;
}

void ExperimentSpec::validate() const {
  task.validate();
  if (systems.empty()) throw DataError("experiment: no systems");
  if (seeds.empty()) throw DataError("experiment: no seeds");
  for (const std::string& s : systems) {
    if (std::find(kAllSystems.begin(), kAllSystems.end(), s) == kAllSystems.end()) {
      throw DataError("experiment: unknown system '" + s + "'");
    }
  }
  if (embedder != "oracle" && embedder != "trained") throw DataError("experiment: embedder must be oracle or trained");
  if (pretrain_size == 0 || train_size == 0 || test_size == 0) throw DataError("experiment: corpus sizes must be positive");
  if (!(pretrain_statement_fraction >= 0.0 && pretrain_statement_fraction <= 1.0)) {
    throw DataError("experiment: pretrain_statement_fraction outside [0, 1]");
  }
  for (const auto& [a, b] : sweep) ScoreWeights{a, b, true}.validate();
  pretrain.validate(false);
  mlm.validate(false);
  embedder_train.validate(false);
  mle_ft.validate(false);
  mrt.validate(true);
  mrt_bleu.validate(true);
}

nlohmann::json ExperimentSpec::to_json() const {
  nlohmann::json sw = nlohmann::json::array();
  for (const auto& [a, b] : sweep) sw.push_back({a, b});
  return {{"task", task.to_json()},
          {"pretrain_size", pretrain_size},
          {"pretrain_statement_fraction", pretrain_statement_fraction},
          {"train_size", train_size},
          {"valid_size", valid_size},
          {"test_size", test_size},
          {"vocab_min_count", vocab_min_count},
          {"model", dims_to_json(dims)},
          {"systems", systems},
          {"seeds", seeds},
          {"append_qmark", append_qmark},
          {"gec_pre", gec_pre},
          {"embedder", embedder},
          {"sweep", sw},
          {"robust_noise", noise_json(robust_noise)},
          {"bootstrap_resamples", bootstrap_resamples},
          {"train",
           {{"pretrain", pretrain.to_json()},
            {"mlm", mlm.to_json()},
            {"embedder", embedder_train.to_json()},
            {"mle_ft", mle_ft.to_json()},
            {"mrt", mrt.to_json()},
            {"mrt_bleu", mrt_bleu.to_json()}}}};
}

ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("experiment spec: expected a JSON object");
  ExperimentSpec s = defaults();
  const nlohmann::json known = s.to_json();
  for (const auto& [key, v] : j.items()) {
    if (!known.contains(key)) throw DataError("experiment spec: unknown key '" + key + "'");
  }
  try {
    if (j.contains("task")) s.task = TaskSpec::from_json(j.at("task"));
    s.pretrain_size = j.value("pretrain_size", s.pretrain_size);
    s.pretrain_statement_fraction = j.value("pretrain_statement_fraction", s.pretrain_statement_fraction);
    s.train_size = j.value("train_size", s.train_size);
    s.valid_size = j.value("valid_size", s.valid_size);
    s.test_size = j.value("test_size", s.test_size);
    s.vocab_min_count = j.value("vocab_min_count", s.vocab_min_count);
    if (j.contains("model")) s.dims = dims_from_json(j.at("model"));
    if (j.contains("systems")) s.systems = j.at("systems").get<std::vector<std::string>>();
    if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    s.append_qmark = j.value("append_qmark", s.append_qmark);
    s.gec_pre = j.value("gec_pre", s.gec_pre);
    s.embedder = j.value("embedder", s.embedder);
    if (j.contains("sweep")) {
      s.sweep.clear();
      for (const auto& p : j.at("sweep")) s.sweep.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    }
    if (j.contains("robust_noise")) {
      const auto& n = j.at("robust_noise");
      s.robust_noise.natural_p = n.value("natural_p", s.robust_noise.natural_p);
      s.robust_noise.keyboard_p = n.value("keyboard_p", s.robust_noise.keyboard_p);
      s.robust_noise.vowel_p = n.value("vowel_p", s.robust_noise.vowel_p);
      s.robust_noise.seed = n.value("seed", s.robust_noise.seed);
    }
    s.bootstrap_resamples = j.value("bootstrap_resamples", s.bootstrap_resamples);
    if (j.contains("train")) {
      const auto& t = j.at("train");
      const std::set<std::string> stages = {"pretrain", "mlm", "embedder", "mle_ft", "mrt", "mrt_bleu"};
      for (const auto& [key, v] : t.items()) {
        if (!stages.count(key)) throw DataError("experiment spec: unknown train stage '" + key + "'");
      }
      // Stage configs overlay the stage defaults key by key.
      auto overlay = [&](const char* key, TrainConfig& c) {
        if (!t.contains(key)) return;
        nlohmann::json merged = c.to_json();
        merged.update(t.at(key));
        c = TrainConfig::from_json(merged);
      };
      overlay("pretrain", s.pretrain);
      overlay("mlm", s.mlm);
      overlay("embedder", s.embedder_train);
      overlay("mle_ft", s.mle_ft);
      overlay("mrt", s.mrt);
      overlay("mrt_bleu", s.mrt_bleu);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("experiment spec: ") + e.what());
  }
  s.validate();
  return s;
}

ExperimentSpec ExperimentSpec::load(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("experiment spec " + path + ": " + e.what());
  }
  return from_json(j);
}

std::vector<std::string> load_sources(const std::string& path) {
  if (path.size() >= 6 && path.compare(path.size() - 6, 6, ".jsonl") == 0) {
    std::vector<std::string> out;
    for (const CorpusTriple& t : load_corpus(path)) out.push_back(t.noisy_src);
    return out;
  }
  return read_lines(path);
}

std::vector<TokenSeq> tokenize_all(const std::vector<std::string>& lines, const Vocab& vocab) {
  std::vector<TokenSeq> out;
  out.reserve(lines.size());
  for (const std::string& l : lines) out.push_back(tokenize(l, vocab));
  return out;
}

std::vector<SentencePair> clean_pairs(const std::vector<CorpusTriple>& corpus, const Vocab& vocab) {
  std::vector<SentencePair> out;
  for (const CorpusTriple& t : corpus) out.push_back({tokenize(t.clean_src, vocab).ids, tokenize(t.tgt, vocab).ids});
  return out;
}

std::vector<SentencePair> robust_pairs(const std::vector<CorpusTriple>& corpus, const Vocab& vocab,
                                       const NoiseConfig& noise, const KeyboardMap& keyboard) {
  std::vector<SentencePair> out = clean_pairs(corpus, vocab);
  const NoiseConfig copies[] = {{noise.natural_p, 0.0, 0.0, derive_seed(noise.seed, 1)},
                                {0.0, noise.keyboard_p, 0.0, derive_seed(noise.seed, 2)},
                                {0.0, 0.0, noise.vowel_p, derive_seed(noise.seed, 3)}};
  for (const NoiseConfig& c : copies) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      NoiseConfig line = c;
      line.seed = derive_seed(c.seed, i);
      out.push_back({tokenize(inject_noise(corpus[i].clean_src, line, keyboard), vocab).ids,
                     tokenize(corpus[i].tgt, vocab).ids});
    }
  }
  return out;
}

std::vector<SentencePair> text_pairs(const std::vector<std::string>& src, const std::vector<std::string>& tgt,
                                     const Vocab& vocab) {
  if (src.size() != tgt.size()) throw DataError("source and target line counts differ");
  std::vector<SentencePair> out;
  for (std::size_t i = 0; i < src.size(); ++i) {
    TokenSeq t = tokenize(tgt[i], vocab);
    if (t.empty()) continue;  // an empty synthetic target teaches nothing
    out.push_back({tokenize(src[i], vocab).ids, std::move(t.ids)});
  }
  return out;
}

std::string preprocess_source(const std::string& text, bool append_qmark, const Corrector* gec) {
  std::string s = text;
  if (gec) s = (*gec)(s);
  if (append_qmark && !ends_with_question_mark(s)) s = canonical(s) + " ?";
  return s;
}

Pipeline::Pipeline(ExperimentSpec spec, std::string cache_dir, bool resume,
                   std::function<void(const std::string&)> log)
    : spec_(std::move(spec)), cache_dir_(std::move(cache_dir)), resume_(resume), log_(std::move(log)) {
  spec_.validate();
  fs::create_directories(cache_dir_);
}

Pipeline::StageOut Pipeline::stage(const std::string& name, const nlohmann::json& key,
                                   const std::function<void(const std::string& dir)>& body) {
  const std::string hash = content_hash(nlohmann::json{{"stage", name}, {"key", key}}.dump());
  const std::string dir = path_in(cache_dir_, name + "-" + hash);
  if (auto it = done_.find(dir); it != done_.end()) return it->second;
  const std::string marker = path_in(dir, "stage.json");
  StageOut out{dir, ""};
  if (resume_ && fs::exists(marker)) {
    out.hash = nlohmann::json::parse(read_file(marker)).at("outputs").get<std::string>();
    ++stages_reused_;
    if (log_) log_("reuse " + name + "-" + hash);
  } else {
    if (log_) log_("run " + name + "-" + hash);
    const std::string partial = dir + ".partial";
    fs::remove_all(partial);
    fs::create_directories(partial);
    body(partial);
    out.hash = hash_outputs(partial);
    write_file_atomic(path_in(partial, "stage.json"),
                      nlohmann::json{{"stage", name}, {"key", key}, {"outputs", out.hash}}.dump(2) + "\n");
    fs::remove_all(dir);
    fs::rename(partial, dir);
    ++stages_run_;
  }
  done_[dir] = out;
  return out;
}

const TaskData& Pipeline::data() {
  if (data_) return *data_;
  const nlohmann::json key = {{"task", spec_.task.to_json()},
                              {"pretrain_size", spec_.pretrain_size},
                              {"pretrain_statement_fraction", spec_.pretrain_statement_fraction},
                              {"train_size", spec_.train_size},
                              {"valid_size", spec_.valid_size},
                              {"test_size", spec_.test_size},
                              {"vocab_min_count", spec_.vocab_min_count}};
  data_stage_ = stage("data", key, [&](const std::string& dir) {
    TaskSpec pre = spec_.task;
    pre.noise = NoiseProfile{};
    pre.statement_fraction = spec_.pretrain_statement_fraction;
    pre.size = spec_.pretrain_size;
    const std::vector<CorpusTriple> pretrain = gen_corpus(pre);

    TaskSpec dom = spec_.task;
    dom.statement_fraction = 0.0;
    dom.size = spec_.train_size + spec_.valid_size + spec_.test_size;
    dom.seed = derive_seed(spec_.task.seed, 1);
    const double n = static_cast<double>(dom.size);
    const CorpusSplit parts =
        split(gen_corpus(dom), {static_cast<double>(spec_.train_size) / n, static_cast<double>(spec_.valid_size) / n,
                                static_cast<double>(spec_.test_size) / n},
              derive_seed(spec_.task.seed, 2));

    std::vector<std::string> text;
    for (const CorpusTriple& t : pretrain) {
      text.push_back(t.clean_src);
      text.push_back(t.tgt);
    }
    for (const CorpusTriple& t : parts.train) text.push_back(t.noisy_src);
    const Vocab vocab = Vocab::build(text, static_cast<int>(spec_.vocab_min_count));

    save_corpus(path_in(dir, "pretrain.jsonl"), pretrain);
    save_corpus(path_in(dir, "train.jsonl"), parts.train);
    save_corpus(path_in(dir, "valid.jsonl"), parts.valid);
    save_corpus(path_in(dir, "test.jsonl"), parts.test);
    vocab.save(path_in(dir, "vocab.txt"));
  });
  auto d = std::make_unique<TaskData>();
  d->pretrain = load_corpus(path_in(data_stage_.dir, "pretrain.jsonl"));
  d->in_domain.train = load_corpus(path_in(data_stage_.dir, "train.jsonl"));
  d->in_domain.valid = load_corpus(path_in(data_stage_.dir, "valid.jsonl"));
  d->in_domain.test = load_corpus(path_in(data_stage_.dir, "test.jsonl"));
  d->vocab = Vocab::load(path_in(data_stage_.dir, "vocab.txt"));
  data_ = std::move(d);
  return *data_;
}

namespace {

TrainIo make_io(const Vocab& vocab, const ValidationSet* valid, const std::function<void(const std::string&)>& log) {
  TrainIo io;
  io.vocab = &vocab;
  io.valid = valid;
  io.log = log;
  return io;
}

void finish_training(const TrainReport& rep, const std::string& dir) {
  write_file_atomic(path_in(dir, "report.json"), rep.to_json().dump(2) + "\n");
  if (rep.status != "ok") throw TrainingError(rep.trainer + " training " + rep.status);
}

ValidationSet validation_set(const std::vector<CorpusTriple>& valid, const Vocab& vocab) {
  ValidationSet v;
  for (const CorpusTriple& t : valid) {
    v.sources.push_back(tokenize(t.noisy_src, vocab));
    v.refs.push_back(t.tgt);
  }
  return v;
}

std::vector<std::string> noisy_sources(const std::vector<CorpusTriple>& c) {
  std::vector<std::string> out;
  for (const CorpusTriple& t : c) out.push_back(t.noisy_src);
  return out;
}

}  // namespace

Pipeline::StageOut Pipeline::mlm_stage(std::uint64_t seed) {
  const TaskData& d = data();
  const nlohmann::json key = {{"data", data_stage_.hash}, {"cfg", seeded(spec_.mlm, seed).to_json()},
                              {"model", dims_to_json(spec_.dims)}, {"seed", seed}};
  return stage("mlm", key, [&](const std::string& dir) {
    MaskedLm m(spec_.dims, d.vocab.size(), derive_seed(seed, 2));
    std::vector<std::vector<TokenId>> sentences;
    for (const CorpusTriple& t : d.pretrain) sentences.push_back(tokenize(t.tgt, d.vocab).ids);
    TrainReport rep = train_mlm(m, sentences, seeded(spec_.mlm, seed), make_io(d.vocab, nullptr, log_));
    finish_training(rep, dir);
    save_model(path_in(dir, "model.ckpt"), m, rep.steps.size());
  });
}

std::shared_ptr<const MaskedLm> Pipeline::mlm(std::uint64_t seed) {
  const StageOut out = mlm_stage(seed);
  auto m = std::make_shared<MaskedLm>(spec_.dims, data().vocab.size(), derive_seed(seed, 2));
  load_model(path_in(out.dir, "model.ckpt"), *m);
  return m;
}

Pipeline::StageOut Pipeline::embedder_stage(std::uint64_t seed) {
  const TaskData& d = data();
  const nlohmann::json key = {{"data", data_stage_.hash}, {"cfg", seeded(spec_.embedder_train, seed).to_json()},
                              {"model", dims_to_json(spec_.dims)}, {"seed", seed}};
  return stage("embedder", key, [&](const std::string& dir) {
    MaskedLm m(spec_.dims, d.vocab.size(), derive_seed(seed, 3));
    std::vector<std::vector<TokenId>> sentences;
    for (const CorpusTriple& t : d.pretrain) {
      sentences.push_back(tokenize(t.clean_src, d.vocab).ids);
      sentences.push_back(tokenize(t.tgt, d.vocab).ids);
    }
    TrainReport rep = train_mlm(m, sentences, seeded(spec_.embedder_train, seed), make_io(d.vocab, nullptr, log_));
    finish_training(rep, dir);
    save_model(path_in(dir, "model.ckpt"), m, rep.steps.size());
  });
}

std::shared_ptr<const MaskedLm> Pipeline::embedder_mlm(std::uint64_t seed) {
  const StageOut out = embedder_stage(seed);
  auto m = std::make_shared<MaskedLm>(spec_.dims, data().vocab.size(), derive_seed(seed, 3));
  load_model(path_in(out.dir, "model.ckpt"), *m);
  return m;
}

Pipeline::StageOut Pipeline::system_stage(const std::string& name, std::uint64_t seed, const ScoreWeights* weights) {
  const TaskData& d = data();
  const ValidationSet valid = validation_set(d.in_domain.valid, d.vocab);
  auto new_model = [&] { return std::make_unique<NmtModel>(spec_.dims, d.vocab.size(), derive_seed(seed, 1)); };

  if (name == "baseline" || name == "robust_baseline") {
    const bool robust = name == "robust_baseline";
    nlohmann::json key = {{"data", data_stage_.hash}, {"cfg", seeded(spec_.pretrain, seed).to_json()},
                          {"model", dims_to_json(spec_.dims)}, {"seed", seed}, {"robust", robust}};
    if (robust) key["noise"] = noise_json(spec_.robust_noise);
    return stage(name, key, [&](const std::string& dir) {
      auto m = new_model();
      const std::vector<SentencePair> pairs =
          robust ? robust_pairs(d.pretrain, d.vocab, spec_.robust_noise, KeyboardMap::qwerty())
                 : clean_pairs(d.pretrain, d.vocab);
      TrainReport rep = train_mle(*m, pairs, seeded(spec_.pretrain, seed), make_io(d.vocab, &valid, log_));
      finish_training(rep, dir);
      save_model(path_in(dir, "model.ckpt"), *m, rep.best_step);
    });
  }

  const bool robust_init = name == "ours_robust";
  const StageOut init = system_stage(robust_init ? "robust_baseline" : "baseline", seed, nullptr);
  auto load_init = [&] {
    auto m = new_model();
    load_model(path_in(init.dir, "model.ckpt"), *m);
    return m;
  };
  const std::vector<std::string> sources = noisy_sources(d.in_domain.train);

  if (name == "mle_ft" || name == "mrt_bleu") {
    const StageOut ft = forward_stage(seed);
    const std::vector<std::string> synthetic = read_lines(path_in(ft.dir, "synthetic.txt"));
    const TrainConfig cfg = seeded(name == "mle_ft" ? spec_.mle_ft : spec_.mrt_bleu, seed);
    const nlohmann::json key = {{"init", init.hash}, {"synthetic", ft.hash}, {"cfg", cfg.to_json()}};
    return stage(name, key, [&](const std::string& dir) {
      auto m = load_init();
      TrainReport rep =
          name == "mle_ft"
              ? train_mle(*m, text_pairs(sources, synthetic, d.vocab), cfg, make_io(d.vocab, &valid, log_))
              : train_mrt_bleu(*m, tokenize_all(sources, d.vocab), synthetic, cfg, make_io(d.vocab, &valid, log_));
      finish_training(rep, dir);
      save_model(path_in(dir, "model.ckpt"), *m, rep.best_step);
    });
  }

  if (name == "ours" || name == "ours_robust") {
    TrainConfig cfg = seeded(spec_.mrt, seed);
    if (weights) {
      cfg.weights.alpha = weights->alpha;
      cfg.weights.beta = weights->beta;
    }
    const StageOut mlm_out = mlm_stage(seed);
    nlohmann::json key = {{"init", init.hash},       {"task", spec_.task.to_json()}, {"data", data_stage_.hash},
                          {"cfg", cfg.to_json()},    {"embedder", spec_.embedder},  {"mlm", mlm_out.hash}};
    std::shared_ptr<const MaskedLm> emb_mlm;
    if (spec_.embedder == "trained") {
      key["embedder_model"] = embedder_stage(seed).hash;
      emb_mlm = embedder_mlm(seed);
    }
    std::shared_ptr<const MaskedLm> scorer_mlm = mlm(seed);
    return stage(name, key, [&](const std::string& dir) {
      auto m = load_init();
      const Embedder emb = emb_mlm ? Embedder::trained(emb_mlm, d.vocab) : Embedder::oracle(spec_.task);
      const RuleGec gec(spec_.task);
      RiskScorer scorer(*scorer_mlm, emb, gec.as_corrector(), d.vocab, cfg.weights);
      TrainReport rep =
          train_mrt_composite(*m, tokenize_all(sources, d.vocab), scorer, cfg, make_io(d.vocab, &valid, log_));
      finish_training(rep, dir);
      save_model(path_in(dir, "model.ckpt"), *m, rep.best_step);
    });
  }
  throw DataError("unknown system '" + name + "'");
}

Pipeline::StageOut Pipeline::forward_stage(std::uint64_t seed) {
  const TaskData& d = data();
  const StageOut init = system_stage("baseline", seed, nullptr);
  return stage("forward", {{"init", init.hash}, {"data", data_stage_.hash}}, [&](const std::string& dir) {
    NmtModel m(spec_.dims, d.vocab.size(), derive_seed(seed, 1));
    load_model(path_in(init.dir, "model.ckpt"), m);
    write_lines_atomic(path_in(dir, "synthetic.txt"),
                       forward_translate(m, d.vocab, tokenize_all(noisy_sources(d.in_domain.train), d.vocab)));
  });
}

std::vector<std::string> Pipeline::forward_translations(std::uint64_t seed) {
  return read_lines(path_in(forward_stage(seed).dir, "synthetic.txt"));
}

std::shared_ptr<const NmtModel> Pipeline::system(const std::string& name, std::uint64_t seed,
                                                 const ScoreWeights* weights) {
  const StageOut out = system_stage(name, seed, weights);
  auto m = std::make_shared<NmtModel>(spec_.dims, data().vocab.size(), derive_seed(seed, 1));
  load_model(path_in(out.dir, "model.ckpt"), *m);
  return m;
}

std::shared_ptr<const NmtModel> Pipeline::baseline(std::uint64_t seed, bool robust) {
  return system(robust ? "robust_baseline" : "baseline", seed);
}

std::vector<std::string> Pipeline::translate_test(const std::string& name, std::uint64_t seed,
                                                  const ScoreWeights* weights) {
  const TaskData& d = data();
  const StageOut sys = system_stage(name, seed, weights);
  const nlohmann::json key = {{"system", sys.hash},
                              {"data", data_stage_.hash},
                              {"append_qmark", spec_.append_qmark},
                              {"gec_pre", spec_.gec_pre}};
  const StageOut out = stage("test", key, [&](const std::string& dir) {
    NmtModel m(spec_.dims, d.vocab.size(), derive_seed(seed, 1));
    load_model(path_in(sys.dir, "model.ckpt"), m);
    const RuleGec gec(spec_.task);
    const Corrector corrector = gec.as_corrector();
    std::vector<TokenSeq> srcs;
    for (const CorpusTriple& t : d.in_domain.test) {
      srcs.push_back(
          tokenize(preprocess_source(t.noisy_src, spec_.append_qmark, spec_.gec_pre ? &corrector : nullptr), d.vocab));
    }
    write_lines_atomic(path_in(dir, "hyps.txt"), forward_translate(m, d.vocab, srcs));
  });
  return read_lines(path_in(out.dir, "hyps.txt"));
}

}  // namespace rfmt
