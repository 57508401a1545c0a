#include "rfmt/training/trainer.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>

#include "rfmt/metrics/bleu.h"
#include "rfmt/models/checkpoint.h"
#include "rfmt/tensor/adam.h"
#include "rfmt/training/batching.h"
#include "rfmt/util/error.h"
#include "rfmt/util/rng.h"

namespace rfmt {
namespace {

using StepFn = std::function<std::optional<double>(std::size_t step, GradientMap& grads)>;

std::vector<Tensor> snapshot(const ParameterStore& store) {
  std::vector<Tensor> out;
  out.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) out.push_back(store.at(i).value);
  return out;
}

void restore(ParameterStore& store, const std::vector<Tensor>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) store.at(i).value = values[i];
}

std::string checkpoint_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

// Shared optimisation loop: Adam with warmup + inverse-sqrt decay, periodic
// checkpoints, best-by-validation selection and divergence handling.
void run_loop(ParameterStore& store, std::uint64_t arch_hash, const TrainConfig& cfg, const TrainIo& io,
              const std::function<double()>& validate, TrainReport& rep, const StepFn& step_fn) {
  const auto start = std::chrono::steady_clock::now();
  rep.seed = cfg.seed;
  rep.config = cfg.to_json();
  Adam adam(store, AdamOptions{cfg.lr, cfg.beta1, cfg.beta2, 1e-9, cfg.clip_norm});
  std::optional<std::vector<Tensor>> best;
  std::optional<std::vector<Tensor>> last_good;

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const double lr = inverse_sqrt_lr(cfg.lr, cfg.warmup, step);
    GradientMap grads;
    std::optional<double> loss;
    StepLog entry{step, 0.0, lr, 0.0};
    bool diverged = false;
    try {
      loss = step_fn(step, grads);
      if (loss && !std::isfinite(*loss)) diverged = true;
      if (loss && !diverged) {
        entry.loss = *loss;
        entry.grad_norm = adam.step(grads, lr);
        diverged = !std::isfinite(entry.grad_norm) || !store.all_finite();
      }
    } catch (const NumericError& e) {
      diverged = true;
      if (io.log) io.log(std::string("numeric error: ") + e.what());
    }
    if (diverged) {
      rep.status = "diverged";
      if (io.log) io.log(rep.trainer + ": diverged at step " + std::to_string(step));
      if (best) {
        restore(store, *best);
      } else if (last_good) {
        restore(store, *last_good);
      }
      break;
    }
    rep.steps.push_back(entry);

    if (step % cfg.checkpoint_every == 0) {
      CheckpointLog ck;
      ck.step = step;
      ck.valid_bleu = validate ? validate() : std::numeric_limits<double>::quiet_NaN();
      if (!io.checkpoint_dir.empty()) {
        char name[64];
        std::snprintf(name, sizeof name, "step_%06zu.ckpt", step);
        ck.path = checkpoint_path(io.checkpoint_dir, name);
        save_checkpoint(ck.path, store, arch_hash, step);
      }
      last_good = snapshot(store);
      if (validate && ck.valid_bleu > rep.best_bleu) {
        rep.best_bleu = ck.valid_bleu;
        rep.best_step = step;
        best = last_good;
        if (!io.checkpoint_dir.empty()) {
          save_checkpoint(checkpoint_path(io.checkpoint_dir, "best.ckpt"), store, arch_hash, step);
        }
      }
      if (io.log) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s step %zu loss %.4f valid_bleu %.2f", rep.trainer.c_str(), step,
                      entry.loss, ck.valid_bleu);
        io.log(buf);
      }
      rep.checkpoints.push_back(std::move(ck));
    }
  }
  if (rep.status == "ok" && best) restore(store, *best);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<std::int64_t> shifted_targets(const std::vector<std::vector<TokenId>>& tgt, std::size_t width) {
  std::vector<std::int64_t> out(tgt.size() * width, -1);
  for (std::size_t r = 0; r < tgt.size(); ++r) {
    for (std::size_t t = 0; t < tgt[r].size(); ++t) out[r * width + t] = tgt[r][t];
    out[r * width + tgt[r].size()] = kEos;
  }
  return out;
}

std::function<double()> make_validator(const NmtModel& model, const TrainIo& io) {
  if (!io.valid || !io.vocab || io.valid->sources.empty()) return {};
  return [&model, &io] { return validation_bleu(model, *io.vocab, *io.valid); };
}

}  // namespace

nlohmann::json TrainReport::to_json() const {
  nlohmann::json j;
  j["trainer"] = trainer;
  j["status"] = status;
  j["seed"] = seed;
  j["config"] = config;
  j["wall_seconds"] = wall_seconds;
  j["best_step"] = best_step;
  j["best_valid_bleu"] = best_bleu < 0.0 ? nlohmann::json() : nlohmann::json(best_bleu);
  j["skipped_sentences"] = skipped_sentences;
  nlohmann::json s = nlohmann::json::array();
  for (const StepLog& e : steps) s.push_back({{"step", e.step}, {"loss", e.loss}, {"lr", e.lr}, {"grad_norm", e.grad_norm}});
  j["steps"] = std::move(s);
  nlohmann::json c = nlohmann::json::array();
  for (const CheckpointLog& e : checkpoints) {
    c.push_back({{"step", e.step},
                 {"valid_bleu", std::isnan(e.valid_bleu) ? nlohmann::json() : nlohmann::json(e.valid_bleu)},
                 {"path", e.path}});
  }
  j["checkpoints"] = std::move(c);
  return j;
}

TrainReport train_mle(NmtModel& model, const std::vector<SentencePair>& data, const TrainConfig& cfg,
                      const TrainIo& io) {
  cfg.validate(false);
  if (data.empty()) throw TrainingError("train_mle: empty parallel corpus");
  std::vector<std::size_t> lengths;
  for (const SentencePair& p : data) lengths.push_back(p.src.size() + 1);
  BatchStream batches(make_batches(lengths, cfg.max_source_tokens_per_batch), cfg.seed);

  TrainReport rep;
  rep.trainer = "mle";
  run_loop(model.params(), model.architecture_hash(), cfg, io, make_validator(model, io), rep,
           [&](std::size_t step, GradientMap& grads) -> std::optional<double> {
             std::vector<std::vector<TokenId>> src;
             std::vector<std::vector<TokenId>> tgt;
             for (std::size_t i : batches.next()) {
               src.push_back(data[i].src);
               tgt.push_back(data[i].tgt);
             }
             Graph g(Mode::kTrain, derive_seed(cfg.seed, step));
             Var logits = model.forward(g, src, tgt);
             Var loss = g.cross_entropy_ls(logits, shifted_targets(tgt, g.value(logits).shape[1]),
                                           cfg.label_smoothing);
             grads = g.backward(loss);
             return g.value(loss).data[0];
           });
  return rep;
}

TrainReport train_mlm(MaskedLm& mlm, const std::vector<std::vector<TokenId>>& sentences, const TrainConfig& cfg,
                      const TrainIo& io) {
  cfg.validate(false);
  std::vector<std::size_t> usable;
  std::vector<std::size_t> lengths;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i].empty()) continue;
    usable.push_back(i);
    lengths.push_back(sentences[i].size() + 2);
  }
  if (usable.empty()) throw TrainingError("train_mlm: no non-empty sentences");
  BatchStream batches(make_batches(lengths, cfg.max_source_tokens_per_batch), cfg.seed);

  TrainReport rep;
  rep.trainer = "mlm";
  run_loop(mlm.params(), mlm.architecture_hash(), cfg, io, {}, rep,
           [&](std::size_t step, GradientMap& grads) -> std::optional<double> {
             const std::vector<std::size_t>& batch = batches.next();
             std::vector<std::vector<TokenId>> rows;
             std::size_t width = 0;
             for (std::size_t b : batch) width = std::max(width, sentences[usable[b]].size() + 2);
             std::vector<std::int64_t> targets(batch.size() * width, -1);
             for (std::size_t r = 0; r < batch.size(); ++r) {
               std::vector<TokenId> row = sentences[usable[batch[r]]];
               const std::size_t n = row.size();
               const std::size_t masks = std::max<std::size_t>(
                   1, static_cast<std::size_t>(std::lround(cfg.mask_fraction * static_cast<double>(n))));
               Rng rng(derive_seed(derive_seed(cfg.seed, step), r));
               std::vector<std::size_t> pos(n);
               for (std::size_t i = 0; i < n; ++i) pos[i] = i;
               for (std::size_t i = 0; i < masks; ++i) {
                 std::swap(pos[i], pos[i + rng.below(n - i)]);
                 targets[r * width + pos[i] + 1] = row[pos[i]];
                 row[pos[i]] = kMask;
               }
               rows.push_back(std::move(row));
             }
             Graph g(Mode::kTrain, derive_seed(cfg.seed ^ 0x6d6c6dULL, step));
             Var loss = g.cross_entropy_ls(mlm.logits(g, rows), targets, 0.0);
             grads = g.backward(loss);
             return g.value(loss).data[0];
           });
  return rep;
}

Var mrt_loss(Graph& g, const NmtModel& model, const std::vector<TokenSeq>& sources,
             const std::vector<std::vector<Candidate>>& candidates, const std::vector<std::vector<double>>& risks,
             const TrainConfig& cfg) {
  if (sources.size() != candidates.size() || sources.size() != risks.size()) {
    throw DataError("mrt_loss: sources, candidates and risks differ in count");
  }
  std::vector<std::vector<TokenId>> src;
  std::vector<std::vector<TokenId>> tgt;
  std::vector<bool> no_eos;
  std::vector<std::size_t> begin;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    if (candidates[s].size() != risks[s].size() || candidates[s].empty()) {
      throw DataError("mrt_loss: candidate/risk count mismatch for sentence " + std::to_string(s));
    }
    begin.push_back(src.size());
    for (const Candidate& c : candidates[s]) {
      src.push_back(sources[s].ids);
      tgt.push_back(c.tokens.ids);
      no_eos.push_back(!c.finished);
    }
  }
  begin.push_back(src.size());
  Var total = g.sum_last(model.sequence_logprobs(g, src, tgt, no_eos));  // [N]

  std::optional<Var> loss;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    std::vector<double> r = risks[s];
    if (cfg.risk_baseline) {
      double mean = 0.0;
      for (double v : r) mean += v;
      mean /= static_cast<double>(r.size());
      for (double& v : r) v -= mean;
    }
    const std::size_t k = r.size();
    Var seg = g.slice(total, 0, begin[s], begin[s + 1]);
    Var weight = cfg.risk_mode == RiskMode::kNormalized ? g.softmax(g.scale(seg, cfg.risk_sharpness), 0) : seg;
    Var term = g.sum(g.mul(weight, g.constant(Tensor(Shape{k}, std::move(r)))));
    loss = loss ? g.add(*loss, term) : term;
  }
  return g.scale(*loss, 1.0 / static_cast<double>(sources.size()));
}

TrainReport train_mrt(NmtModel& model, const std::vector<TokenSeq>& sources, const CandidateRisk& risk,
                      const TrainConfig& cfg, const TrainIo& io, const std::string& name) {
  cfg.validate(true);
  if (!io.vocab) throw DataError("train_mrt: vocabulary required");
  std::vector<std::size_t> lengths;
  for (const TokenSeq& s : sources) lengths.push_back(s.size() + 1);
  if (sources.empty()) throw TrainingError("train_mrt: empty source corpus");
  BatchStream batches(make_batches(lengths, cfg.max_source_tokens_per_batch), cfg.seed);
  BeamOptions beam{cfg.beam, cfg.max_len, false};

  TrainReport rep;
  rep.trainer = name;
  run_loop(model.params(), model.architecture_hash(), cfg, io, make_validator(model, io), rep,
           [&](std::size_t step, GradientMap& grads) -> std::optional<double> {
             std::vector<TokenSeq> srcs;
             std::vector<std::vector<Candidate>> cands;
             std::vector<std::vector<double>> risks;
             for (std::size_t i : batches.next()) {
               std::vector<Candidate> c = beam_search(model, *io.vocab, sources[i], beam);
               try {
                 std::vector<double> r = risk(i, sources[i], c);
                 if (r.size() != c.size()) throw DataError("risk count differs from candidate count");
                 srcs.push_back(sources[i]);
                 cands.push_back(std::move(c));
                 risks.push_back(std::move(r));
               } catch (const DataError&) {
                 ++rep.skipped_sentences;
               }
             }
             if (srcs.empty()) return std::nullopt;
             Graph g(Mode::kTrain, derive_seed(cfg.seed, step));
             Var loss = mrt_loss(g, model, srcs, cands, risks, cfg);
             grads = g.backward(loss);
             return g.value(loss).data[0];
           });
  return rep;
}

TrainReport train_mrt_composite(NmtModel& model, const std::vector<TokenSeq>& sources, RiskScorer& scorer,
                                const TrainConfig& cfg, const TrainIo& io) {
  scorer.set_weights(cfg.weights);
  auto risk = [&](std::size_t, const TokenSeq& src, const std::vector<Candidate>& cands) {
    std::vector<std::string> texts;
    for (const Candidate& c : cands) texts.push_back(c.tokens.text());
    std::vector<double> r;
    for (const RiskScore& s : scorer.score(src.text(), texts)) r.push_back(s.composite);
    return r;
  };
  return train_mrt(model, sources, risk, cfg, io, "mrt_composite");
}

double bleu_risk(const std::string& hyp, const std::string& ref) { return 1.0 - sentence_bleu(hyp, ref) / 100.0; }

TrainReport train_mrt_bleu(NmtModel& model, const std::vector<TokenSeq>& sources,
                           const std::vector<std::string>& synthetic_refs, const TrainConfig& cfg, const TrainIo& io) {
  if (synthetic_refs.size() != sources.size()) throw DataError("train_mrt_bleu: one synthetic reference per source");
  auto risk = [&](std::size_t i, const TokenSeq&, const std::vector<Candidate>& cands) {
    std::vector<double> r;
    for (const Candidate& c : cands) r.push_back(bleu_risk(c.tokens.text(), synthetic_refs[i]));
    return r;
  };
  return train_mrt(model, sources, risk, cfg, io, "mrt_bleu");
}

std::vector<std::string> forward_translate(const NmtModel& model, const Vocab& vocab,
                                           const std::vector<TokenSeq>& sources, std::size_t max_len) {
  std::vector<std::string> out;
  out.reserve(sources.size());
  for (const TokenSeq& s : sources) out.push_back(greedy_decode(model, vocab, s, max_len).tokens.text());
  return out;
}

double validation_bleu(const NmtModel& model, const Vocab& vocab, const ValidationSet& valid) {
  return corpus_bleu(forward_translate(model, vocab, valid.sources), valid.refs);
}

double teacher_forced_accuracy(const NmtModel& model, const std::vector<SentencePair>& data) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const SentencePair& p : data) {
    Graph g(Mode::kEval);
    const Tensor& logits = g.value(model.forward(g, {p.src}, {p.tgt}));
    const std::size_t v = logits.shape[2];
    for (std::size_t t = 0; t <= p.tgt.size(); ++t) {
      const double* row = logits.data.data() + t * v;
      const std::size_t best = static_cast<std::size_t>(std::max_element(row, row + v) - row);
      const TokenId want = t < p.tgt.size() ? p.tgt[t] : kEos;
      correct += best == static_cast<std::size_t>(want);
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace rfmt
