#include "rfmt/harness/commands.h"

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rfmt/corpus/corpus.h"
#include "rfmt/harness/experiment.h"
#include "rfmt/harness/pipeline.h"
#include "rfmt/metrics/bootstrap.h"
#include "rfmt/models/beam.h"
#include "rfmt/models/checkpoint.h"
#include "rfmt/models/embedder.h"
#include "rfmt/noise/gec.h"
#include "rfmt/noise/noise.h"
#include "rfmt/rerank/rerank.h"
#include "rfmt/scoring/scoring.h"
#include "rfmt/training/trainer.h"
#include "rfmt/util/error.h"
#include "rfmt/util/io.h"
#include "rfmt/util/rng.h"

namespace rfmt {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

struct Ctx {
  std::ostream& out;
  std::ostream& err;
  bool json_out = false;
  bool quiet = false;
  std::string arch;  // model shape JSON, or an experiment spec with a "model" key

  TransformerDims dims() const {
    if (arch.empty()) return TransformerDims{};
    const nlohmann::json j = parse_json_file(arch);
    return dims_from_json(j.contains("model") ? j.at("model") : j);
  }

  std::function<void(const std::string&)> logger() {
    if (quiet) return {};
    return [this](const std::string& s) { err << s << "\n"; };
  }
  void emit(const json& j, const std::string& text) {
    if (json_out) {
      out << j.dump(2) << "\n";
    } else {
      out << text;
    }
  }
};

TaskSpec load_task(const std::string& path) {
  if (path.empty()) return TaskSpec::default_spec();
  TaskSpec s = TaskSpec::from_json(parse_json_file(path));
  s.validate();
  return s;
}

TrainConfig load_config(const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::size_t> steps) {
  TrainConfig c;
  if (!path.empty()) c = TrainConfig::from_json(parse_json_file(path));
  if (seed) c.seed = *seed;
  if (steps) c.steps = *steps;
  return c;
}

bool is_jsonl(const std::string& path) { return path.size() >= 6 && path.compare(path.size() - 6, 6, ".jsonl") == 0; }

// Plain text lines, or one field of a corpus file.
std::vector<std::string> text_field(const std::string& path, const std::string& field) {
  if (!is_jsonl(path)) return read_lines(path);
  std::vector<std::string> out;
  for (const CorpusTriple& t : load_corpus(path)) {
    if (field == "tgt") out.push_back(t.tgt);
    else if (field == "clean_src") out.push_back(t.clean_src);
    else out.push_back(t.noisy_src);
  }
  return out;
}

std::unique_ptr<ValidationSet> load_valid(const std::string& path, const Vocab& vocab) {
  if (path.empty()) return nullptr;
  auto v = std::make_unique<ValidationSet>();
  for (const CorpusTriple& t : load_corpus(path)) {
    v->sources.push_back(tokenize(t.noisy_src, vocab));
    v->refs.push_back(t.tgt);
  }
  return v;
}

std::shared_ptr<NmtModel> load_nmt(const std::string& path, const Vocab& vocab, const TransformerDims& dims) {
  auto m = std::make_shared<NmtModel>(dims, vocab.size(), 0);
  load_model(path, *m);
  return m;
}

std::shared_ptr<MaskedLm> load_mlm(const std::string& path, const Vocab& vocab, const TransformerDims& dims) {
  auto m = std::make_shared<MaskedLm>(dims, vocab.size(), 0);
  load_model(path, *m);
  return m;
}

// "oracle" or a trained embedder checkpoint.
Embedder load_embedder(const std::string& which, const TaskSpec& task, const Vocab& vocab,
                       const TransformerDims& dims) {
  if (which.empty() || which == "oracle") return Embedder::oracle(task);
  return Embedder::trained(load_mlm(which, vocab, dims), vocab);
}

void check_parallel(std::size_t a, std::size_t b, const std::string& what) {
  if (a != b) throw DataError(what + ": line counts differ (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
}

void finish(Ctx& ctx, const TrainReport& rep, const std::string& report_path, const std::string& out_path) {
  if (!report_path.empty()) write_file_atomic(report_path, rep.to_json().dump(2) + "\n");
  if (rep.status != "ok") throw TrainingError(rep.trainer + " training " + rep.status);
  json j = {{"trainer", rep.trainer},  {"status", rep.status},       {"steps", rep.steps.size()},
            {"best_step", rep.best_step}, {"output", out_path}, {"skipped_sentences", rep.skipped_sentences}};
  if (rep.best_bleu >= 0.0) j["best_valid_bleu"] = rep.best_bleu;
  j["final_loss"] = rep.steps.empty() ? json() : json(rep.steps.back().loss);
  ctx.emit(j, rep.trainer + ": " + std::to_string(rep.steps.size()) + " steps, wrote " + out_path + "\n");
}

std::string default_cache_dir() {
  const char* env = std::getenv("RFMT_CACHE_DIR");
  return env && *env ? env : ".rfmt-cache";
}

CLI::App* add_sub(CLI::App& app, Ctx& ctx, const std::string& name, const std::string& help) {
  CLI::App* s = app.add_subcommand(name, help);
  s->set_version_flag("--version", kVersion);
  s->add_flag("--json", ctx.json_out, "Machine-readable output on stdout");
  s->add_flag("--quiet", ctx.quiet, "No progress messages on stderr");
  s->add_option("--arch", ctx.arch, "Model shape JSON (or an experiment spec); default d=64, 2 heads, 2+2 layers");
  return s;
}

// Options shared by the training subcommands.
struct TrainOpts {
  std::string vocab, config, out, report, valid, checkpoint_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;

  void add(CLI::App* s, bool with_valid) {
    s->add_option("--vocab", vocab, "Vocabulary file")->required();
    s->add_option("--config", config, "Training config JSON");
    s->add_option("--out", out, "Output checkpoint")->required();
    s->add_option("--report", report, "Training report JSON");
    s->add_option("--seed", seed, "Override the config seed");
    s->add_option("--steps", steps, "Override the config step count");
    if (with_valid) {
      s->add_option("--valid", valid, "Validation corpus (.jsonl) for checkpoint selection")
          ;
      s->add_option("--checkpoint-dir", checkpoint_dir, "Keep periodic checkpoints here");
    }
  }
};

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Ctx ctx{out, err, false, false, {}};
  CLI::App app{"Reference-free MRT for noisy question translation", "rfmt"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::function<void()> action;

  // gen-data
  struct {
    std::string spec, out, out_dir, vocab_out;
    std::optional<std::size_t> size;
    std::optional<std::uint64_t> seed;
    std::optional<double> statement_fraction;
    bool clean = false;
    std::vector<double> ratios;
    int min_count = 1;
  } gd;
  {
    CLI::App* s = add_sub(app, ctx, "gen-data", "Generate a synthetic corpus as JSON lines");
    s->add_option("--spec", gd.spec, "Task spec JSON (default: built-in task)");
    s->add_option("--out", gd.out, "Corpus output (.jsonl)");
    s->add_option("--size", gd.size, "Number of lines");
    s->add_option("--seed", gd.seed, "Generation seed");
    s->add_option("--statement-fraction", gd.statement_fraction, "Fraction of clean statements");
    s->add_flag("--clean", gd.clean, "Disable all noise");
    s->add_option("--split", gd.ratios, "train,valid,test ratios (needs --out-dir)")->delimiter(',')->expected(3);
    s->add_option("--out-dir", gd.out_dir, "Directory for the split files");
    s->add_option("--vocab-out", gd.vocab_out, "Also build a vocabulary from all sides of the corpus");
    s->add_option("--min-count", gd.min_count, "Vocabulary min count")->check(CLI::PositiveNumber);
    s->final_callback([&] {
      action = [&] {
        TaskSpec spec = load_task(gd.spec);
        if (gd.size) spec.size = *gd.size;
        if (gd.seed) spec.seed = *gd.seed;
        if (gd.statement_fraction) spec.statement_fraction = *gd.statement_fraction;
        if (gd.clean) spec.noise = NoiseProfile{};
        spec.validate();
        if (gd.out.empty() && gd.out_dir.empty()) throw UsageError("gen-data: give --out or --split with --out-dir");
        if (gd.ratios.empty() != gd.out_dir.empty()) throw UsageError("gen-data: --split and --out-dir go together");
        const std::vector<CorpusTriple> corpus = gen_corpus(spec);
        if (!gd.out.empty()) save_corpus(gd.out, corpus);
        json j = {{"lines", corpus.size()}, {"seed", spec.seed}};
        if (!gd.ratios.empty()) {
          const CorpusSplit parts = split(corpus, {gd.ratios[0], gd.ratios[1], gd.ratios[2]}, spec.seed);
          fs::create_directories(gd.out_dir);
          save_corpus((fs::path(gd.out_dir) / "train.jsonl").string(), parts.train);
          save_corpus((fs::path(gd.out_dir) / "valid.jsonl").string(), parts.valid);
          save_corpus((fs::path(gd.out_dir) / "test.jsonl").string(), parts.test);
          j["split"] = {parts.train.size(), parts.valid.size(), parts.test.size()};
        }
        if (!gd.vocab_out.empty()) {
          std::vector<std::string> text;
          for (const CorpusTriple& t : corpus) {
            text.push_back(t.clean_src);
            text.push_back(t.noisy_src);
            text.push_back(t.tgt);
          }
          const Vocab v = Vocab::build(text, gd.min_count);
          std::ostringstream ss;
          v.save(ss);
          write_file_atomic(gd.vocab_out, ss.str());
          j["vocab_size"] = v.size();
        }
        ctx.emit(j, "generated " + std::to_string(corpus.size()) + " lines\n");
      };
    });
  }

  // train-mlm / train-embedder
  struct {
    TrainOpts t;
    std::string text;
  } tm, te;
  {
    CLI::App* s = add_sub(app, ctx, "train-mlm", "Train the masked LM used for fluency scoring");
    s->add_option("--text", tm.text, "Target-language text (lines, or the tgt side of a .jsonl)")
        ->required()
        ;
    tm.t.add(s, false);
    CLI::App* e = add_sub(app, ctx, "train-embedder", "Train a masked LM over both languages for embeddings");
    e->add_option("--text", te.text, "Text (lines, or clean_src and tgt of a .jsonl)")->required();
    te.t.add(e, false);
    auto run = [&ctx](auto& o, bool both) {
      const Vocab vocab = Vocab::load(o.t.vocab);
      const TrainConfig cfg = load_config(o.t.config, o.t.seed, o.t.steps);
      std::vector<std::string> lines = text_field(o.text, "tgt");
      if (both && is_jsonl(o.text)) {
        for (std::string& s : text_field(o.text, "clean_src")) lines.push_back(std::move(s));
      }
      std::vector<std::vector<TokenId>> rows;
      for (const std::string& l : lines) {
        TokenSeq s = tokenize(l, vocab);
        if (!s.empty()) rows.push_back(std::move(s.ids));
      }
      if (rows.empty()) throw DataError("no non-empty training sentences in " + o.text);
      MaskedLm mlm(ctx.dims(), vocab.size(), derive_seed(cfg.seed, both ? 3 : 2));
      TrainIo io{&vocab, nullptr, "", ctx.logger()};
      TrainReport rep = train_mlm(mlm, rows, cfg, io);
      if (both) rep.trainer = "embedder";
      if (rep.status == "ok") save_model(o.t.out, mlm, rep.steps.size());
      finish(ctx, rep, o.t.report, o.t.out);
    };
    s->final_callback([&, run] { action = [&, run] { run(tm, false); }; });
    e->final_callback([&, run] { action = [&, run] { run(te, true); }; });
  }

  // pretrain
  struct {
    TrainOpts t;
    std::string data;
    bool robust = false;
    double natural = 0.01, keyboard = 0.05, vowel = 0.05;
  } pt;
  {
    CLI::App* s = add_sub(app, ctx, "pretrain", "MLE training of the translation model on clean pairs");
    s->add_option("--data", pt.data, "Parallel corpus (.jsonl; clean_src and tgt)")->required();
    s->add_flag("--robust", pt.robust, "Add three character-noised copies of every source");
    s->add_option("--natural-p", pt.natural, "Robust noise: random letter substitution rate");
    s->add_option("--keyboard-p", pt.keyboard, "Robust noise: adjacent-key substitution rate");
    s->add_option("--vowel-p", pt.vowel, "Robust noise: vowel drop rate");
    pt.t.add(s, true);
    s->final_callback([&] {
      action = [&] {
        const Vocab vocab = Vocab::load(pt.t.vocab);
        const TrainConfig cfg = load_config(pt.t.config, pt.t.seed, pt.t.steps);
        const std::vector<CorpusTriple> corpus = load_corpus(pt.data);
        const std::vector<SentencePair> pairs =
            pt.robust ? robust_pairs(corpus, vocab, NoiseConfig{pt.natural, pt.keyboard, pt.vowel, cfg.seed},
                                     KeyboardMap::qwerty())
                      : clean_pairs(corpus, vocab);
        const auto valid = load_valid(pt.t.valid, vocab);
        NmtModel model(ctx.dims(), vocab.size(), derive_seed(cfg.seed, 1));
        TrainIo io{&vocab, valid.get(), pt.t.checkpoint_dir, ctx.logger()};
        TrainReport rep = train_mle(model, pairs, cfg, io);
        if (rep.status == "ok") save_model(pt.t.out, model, rep.best_step);
        finish(ctx, rep, pt.t.report, pt.t.out);
      };
    });
  }

  // finetune-mle / finetune-mrt / finetune-mrt-bleu
  struct {
    TrainOpts t;
    std::string init, src, tgt;
  } fm;
  struct {
    TrainOpts t;
    std::string init, src, mlm, embedder = "oracle", task, risk_mode;
    std::optional<double> alpha, beta;
    bool mlm_sum = false, no_gec = false;
  } fr;
  struct {
    TrainOpts t;
    std::string init, src, refs;
  } fb;
  {
    CLI::App* s = add_sub(app, ctx, "finetune-mle", "MLE fine-tuning on synthetic (forward-translated) targets");
    s->add_option("--init", fm.init, "Pretrained checkpoint")->required();
    s->add_option("--src", fm.src, "In-domain sources (lines, or noisy_src of a .jsonl)")->required();
    s->add_option("--tgt", fm.tgt, "Synthetic targets (default: greedy translations by --init)");
    fm.t.add(s, true);
    s->final_callback([&] {
      action = [&] {
        const Vocab vocab = Vocab::load(fm.t.vocab);
        const TrainConfig cfg = load_config(fm.t.config, fm.t.seed, fm.t.steps);
        auto model = load_nmt(fm.init, vocab, ctx.dims());
        const std::vector<std::string> src = text_field(fm.src, "noisy_src");
        const std::vector<std::string> tgt =
            fm.tgt.empty() ? forward_translate(*model, vocab, tokenize_all(src, vocab)) : read_lines(fm.tgt);
        check_parallel(src.size(), tgt.size(), "finetune-mle");
        const auto valid = load_valid(fm.t.valid, vocab);
        TrainIo io{&vocab, valid.get(), fm.t.checkpoint_dir, ctx.logger()};
        TrainReport rep = train_mle(*model, text_pairs(src, tgt, vocab), cfg, io);
        rep.trainer = "mle_ft";
        if (rep.status == "ok") save_model(fm.t.out, *model, rep.best_step);
        finish(ctx, rep, fm.t.report, fm.t.out);
      };
    });

    CLI::App* r = add_sub(app, ctx, "finetune-mrt", "Reference-free MRT with the composite fluency/adequacy risk");
    r->add_option("--init", fr.init, "Starting checkpoint")->required();
    r->add_option("--src", fr.src, "In-domain sources (lines, or noisy_src of a .jsonl)")->required();
    r->add_option("--mlm", fr.mlm, "Masked LM checkpoint")->required();
    r->add_option("--embedder", fr.embedder, "\"oracle\" or an embedder checkpoint");
    r->add_option("--task", fr.task, "Task spec JSON for the oracle embedder and GEC");
    r->add_option("--alpha", fr.alpha, "Fluency weight");
    r->add_option("--beta", fr.beta, "Adequacy weight");
    r->add_flag("--mlm-sum", fr.mlm_sum, "Use the summed MLM log-probability instead of the mean");
    r->add_flag("--no-gec", fr.no_gec, "Compare against the raw source only");
    r->add_option("--risk-mode", fr.risk_mode, "normalized | literal");
    fr.t.add(r, true);
    r->final_callback([&] {
      action = [&] {
        const Vocab vocab = Vocab::load(fr.t.vocab);
        TrainConfig cfg = load_config(fr.t.config, fr.t.seed, fr.t.steps);
        if (fr.alpha) cfg.weights.alpha = *fr.alpha;
        if (fr.beta) cfg.weights.beta = *fr.beta;
        if (fr.mlm_sum) cfg.weights.mlm_normalize = false;
        if (!fr.risk_mode.empty()) cfg.risk_mode = risk_mode_from(fr.risk_mode);
        const TaskSpec task = load_task(fr.task);
        auto model = load_nmt(fr.init, vocab, ctx.dims());
        auto mlm = load_mlm(fr.mlm, vocab, ctx.dims());
        const Embedder emb = load_embedder(fr.embedder, task, vocab, ctx.dims());
        const RuleGec gec(task);
        RiskScorer scorer(*mlm, emb, fr.no_gec ? identity_corrector() : gec.as_corrector(), vocab, cfg.weights);
        const auto valid = load_valid(fr.t.valid, vocab);
        TrainIo io{&vocab, valid.get(), fr.t.checkpoint_dir, ctx.logger()};
        TrainReport rep =
            train_mrt_composite(*model, tokenize_all(text_field(fr.src, "noisy_src"), vocab), scorer, cfg, io);
        if (rep.status == "ok") save_model(fr.t.out, *model, rep.best_step);
        finish(ctx, rep, fr.t.report, fr.t.out);
      };
    });

    CLI::App* b = add_sub(app, ctx, "finetune-mrt-bleu", "MRT with sentence-BLEU risk against synthetic references");
    b->add_option("--init", fb.init, "Starting checkpoint")->required();
    b->add_option("--src", fb.src, "In-domain sources (lines, or noisy_src of a .jsonl)")->required();
    b->add_option("--refs", fb.refs, "Synthetic references (default: greedy translations by --init)")
        ;
    fb.t.add(b, true);
    b->final_callback([&] {
      action = [&] {
        const Vocab vocab = Vocab::load(fb.t.vocab);
        const TrainConfig cfg = load_config(fb.t.config, fb.t.seed, fb.t.steps);
        auto model = load_nmt(fb.init, vocab, ctx.dims());
        const std::vector<TokenSeq> src = tokenize_all(text_field(fb.src, "noisy_src"), vocab);
        const std::vector<std::string> refs =
            fb.refs.empty() ? forward_translate(*model, vocab, src) : read_lines(fb.refs);
        check_parallel(src.size(), refs.size(), "finetune-mrt-bleu");
        const auto valid = load_valid(fb.t.valid, vocab);
        TrainIo io{&vocab, valid.get(), fb.t.checkpoint_dir, ctx.logger()};
        TrainReport rep = train_mrt_bleu(*model, src, refs, cfg, io);
        if (rep.status == "ok") save_model(fb.t.out, *model, rep.best_step);
        finish(ctx, rep, fb.t.report, fb.t.out);
      };
    });
  }

  // translate
  struct {
    std::string model, vocab, input, output, task, dump_beam;
    std::size_t beam = 1, max_len = 0;
    bool append_qmark = false, gec_pre = false;
  } tr;
  {
    CLI::App* s = add_sub(app, ctx, "translate", "Translate sources with beam search");
    s->add_option("--model", tr.model, "Checkpoint")->required();
    s->add_option("--vocab", tr.vocab, "Vocabulary file")->required();
    s->add_option("--input", tr.input, "Sources (lines, or noisy_src of a .jsonl)")->required();
    s->add_option("--output", tr.output, "Hypotheses, one per line (default: stdout)");
    s->add_option("--beam", tr.beam, "Beam size")->check(CLI::PositiveNumber);
    s->add_option("--max-len", tr.max_len, "Maximum output length (0: 2|src|+10)");
    s->add_flag("--append-qmark", tr.append_qmark, "Append \"?\" to sources that lack one");
    s->add_flag("--gec-pre", tr.gec_pre, "Correct sources with the rule-based GEC first");
    s->add_option("--task", tr.task, "Task spec JSON for --gec-pre");
    s->add_option("--dump-beam", tr.dump_beam, "Write every beam candidate as JSON lines");
    s->final_callback([&] {
      action = [&] {
        const Vocab vocab = Vocab::load(tr.vocab);
        auto model = load_nmt(tr.model, vocab, ctx.dims());
        const RuleGec gec(load_task(tr.task));
        const Corrector corr = gec.as_corrector();
        std::vector<std::string> hyps;
        std::vector<std::string> dump;
        for (const std::string& line : text_field(tr.input, "noisy_src")) {
          const TokenSeq src = tokenize(preprocess_source(line, tr.append_qmark, tr.gec_pre ? &corr : nullptr), vocab);
          const std::vector<Candidate> cands = beam_search(*model, vocab, src, BeamOptions{tr.beam, tr.max_len, false});
          hyps.push_back(detokenize(cands.front().tokens));
          if (!tr.dump_beam.empty()) {
            json row = {{"source", src.text()}, {"candidates", json::array()}};
            for (const Candidate& c : cands) {
              row["candidates"].push_back({{"text", detokenize(c.tokens)},
                                           {"logprob", c.total_logprob},
                                           {"token_logprobs", c.token_logprobs},
                                           {"finished", c.finished}});
            }
            dump.push_back(row.dump());
          }
        }
        if (!tr.dump_beam.empty()) write_lines_atomic(tr.dump_beam, dump);
        if (tr.output.empty()) {
          for (const std::string& h : hyps) ctx.out << h << "\n";
        } else {
          write_lines_atomic(tr.output, hyps);
          ctx.emit({{"lines", hyps.size()}, {"output", tr.output}}, "translated " + std::to_string(hyps.size()) + " lines\n");
        }
      };
    });
  }

  // rerank
  struct {
    std::string model, mlm, vocab, input, output, dump;
    std::size_t beam = 5, max_len = 0;
    bool mlm_sum = false;
  } rr;
  {
    CLI::App* s = add_sub(app, ctx, "rerank", "Pick the beam candidate the masked LM scores highest");
    s->add_option("--model", rr.model, "Translation checkpoint")->required();
    s->add_option("--mlm", rr.mlm, "Masked LM checkpoint")->required();
    s->add_option("--vocab", rr.vocab, "Vocabulary file")->required();
    s->add_option("--input", rr.input, "Sources (lines, or noisy_src of a .jsonl)")->required();
    s->add_option("--output", rr.output, "Chosen hypotheses (default: stdout)");
    s->add_option("--beam", rr.beam, "Beam size")->check(CLI::PositiveNumber);
    s->add_option("--max-len", rr.max_len, "Maximum output length (0: 2|src|+10)");
    s->add_flag("--mlm-sum", rr.mlm_sum, "Score with the summed MLM log-probability");
    s->add_option("--dump", rr.dump, "Write candidates, scores and the choice as JSON lines");
    s->final_callback([&] {
      action = [&] {
        const Vocab vocab = Vocab::load(rr.vocab);
        auto model = load_nmt(rr.model, vocab, ctx.dims());
        auto mlm = load_mlm(rr.mlm, vocab, ctx.dims());
        std::vector<std::string> hyps;
        std::vector<std::string> dump;
        for (const std::string& line : text_field(rr.input, "noisy_src")) {
          const RerankChoice c = rerank(*model, *mlm, vocab, tokenize(line, vocab), rr.beam, !rr.mlm_sum, rr.max_len);
          hyps.push_back(detokenize(c.chosen().tokens));
          if (!rr.dump.empty()) {
            json row = {{"source", line}, {"chosen", c.chosen_index}, {"candidates", json::array()}};
            for (std::size_t i = 0; i < c.candidates.size(); ++i) {
              row["candidates"].push_back({{"text", detokenize(c.candidates[i].tokens)},
                                           {"logprob", c.candidates[i].total_logprob},
                                           {"mlm_score", c.scores[i]}});
            }
            dump.push_back(row.dump());
          }
        }
        if (!rr.dump.empty()) write_lines_atomic(rr.dump, dump);
        if (rr.output.empty()) {
          for (const std::string& h : hyps) ctx.out << h << "\n";
        } else {
          write_lines_atomic(rr.output, hyps);
          ctx.emit({{"lines", hyps.size()}, {"output", rr.output}}, "reranked " + std::to_string(hyps.size()) + " lines\n");
        }
      };
    });
  }

  // score
  struct {
    std::string mlm, vocab, src, hyp, output, task, embedder = "oracle";
    std::optional<double> alpha, beta;
    bool mlm_sum = false, no_gec = false;
    std::size_t threads = 1;
  } sc;
  {
    CLI::App* s = add_sub(app, ctx, "score", "Composite reference-free risk of hypotheses given sources");
    s->add_option("--mlm", sc.mlm, "Masked LM checkpoint")->required();
    s->add_option("--vocab", sc.vocab, "Vocabulary file")->required();
    s->add_option("--src", sc.src, "Sources, one per line")->required();
    s->add_option("--hyp", sc.hyp, "Hypotheses, one per line")->required();
    s->add_option("--output", sc.output, "Per-line scores as JSON lines (default: stdout)");
    s->add_option("--task", sc.task, "Task spec JSON for the oracle embedder and GEC");
    s->add_option("--embedder", sc.embedder, "\"oracle\" or an embedder checkpoint");
    s->add_option("--alpha", sc.alpha, "Fluency weight");
    s->add_option("--beta", sc.beta, "Adequacy weight");
    s->add_flag("--mlm-sum", sc.mlm_sum, "Use the summed MLM log-probability");
    s->add_flag("--no-gec", sc.no_gec, "Compare against the raw source only");
    s->add_option("--threads", sc.threads, "Worker threads for adequacy")->check(CLI::PositiveNumber);
    s->final_callback([&] {
      action = [&] {
        const Vocab vocab = Vocab::load(sc.vocab);
        ScoreWeights w;
        if (sc.alpha) w.alpha = *sc.alpha;
        if (sc.beta) w.beta = *sc.beta;
        w.mlm_normalize = !sc.mlm_sum;
        w.validate();
        const TaskSpec task = load_task(sc.task);
        auto mlm = load_mlm(sc.mlm, vocab, ctx.dims());
        const Embedder emb = load_embedder(sc.embedder, task, vocab, ctx.dims());
        const RuleGec gec(task);
        RiskScorer scorer(*mlm, emb, sc.no_gec ? identity_corrector() : gec.as_corrector(), vocab, w);
        const std::vector<std::string> src = read_lines(sc.src);
        const std::vector<std::string> hyp = read_lines(sc.hyp);
        check_parallel(src.size(), hyp.size(), "score");
        std::vector<std::string> rows;
        for (std::size_t i = 0; i < src.size(); ++i) {
          const RiskScore r = scorer.score(src[i], {hyp[i]}, sc.threads).front();
          json j = r.to_json();
          j["line"] = i;
          rows.push_back(j.dump());
        }
        if (sc.output.empty()) {
          for (const std::string& r : rows) ctx.out << r << "\n";
        } else {
          write_lines_atomic(sc.output, rows);
          ctx.emit({{"lines", rows.size()}, {"output", sc.output}}, "scored " + std::to_string(rows.size()) + " lines\n");
        }
      };
    });
  }

  // evaluate
  struct {
    std::string hyp, ref, report;
  } ev;
  {
    CLI::App* s = add_sub(app, ctx, "evaluate", "Corpus BLEU, TER and question-mark rate");
    s->add_option("--hyp", ev.hyp, "Hypotheses, one per line")->required();
    s->add_option("--ref", ev.ref, "References (lines, or tgt of a .jsonl)")->required();
    s->add_option("--report", ev.report, "Also write the JSON report here");
    s->final_callback([&] {
      action = [&] {
        const std::vector<std::string> hyps = read_lines(ev.hyp);
        const std::vector<std::string> refs = text_field(ev.ref, "tgt");
        check_parallel(hyps.size(), refs.size(), "evaluate");
        const EvalReport r = evaluate(hyps, refs);
        if (!ev.report.empty()) write_file_atomic(ev.report, r.to_json().dump(2) + "\n");
        ctx.emit(r.to_json(), r.to_table());
      };
    });
  }

  // significance
  struct {
    std::string a, b, ref;
    std::size_t resamples = 1000;
    std::uint64_t seed = 1;
  } sg;
  {
    CLI::App* s = add_sub(app, ctx, "significance", "Paired bootstrap: fraction of resamples where B >= A in BLEU");
    s->add_option("--hyp-a", sg.a, "Hypotheses of system A")->required();
    s->add_option("--hyp-b", sg.b, "Hypotheses of system B")->required();
    s->add_option("--ref", sg.ref, "References (lines, or tgt of a .jsonl)")->required();
    s->add_option("--resamples", sg.resamples, "Bootstrap resamples (>= 100)");
    s->add_option("--seed", sg.seed, "Resampling seed");
    s->final_callback([&] {
      action = [&] {
        const std::vector<std::string> a = read_lines(sg.a);
        const std::vector<std::string> b = read_lines(sg.b);
        const std::vector<std::string> refs = text_field(sg.ref, "tgt");
        check_parallel(a.size(), refs.size(), "significance");
        check_parallel(b.size(), refs.size(), "significance");
        const double p = paired_bootstrap(a, b, refs, sg.resamples, sg.seed);
        const double bleu_a = evaluate(a, refs).bleu;
        const double bleu_b = evaluate(b, refs).bleu;
        std::ostringstream ss;
        ss << "BLEU A " << bleu_a << "  BLEU B " << bleu_b << "  p(B >= A) " << p << "\n";
        ctx.emit({{"bleu_a", bleu_a}, {"bleu_b", bleu_b}, {"p_value", p}, {"resamples", sg.resamples},
                  {"seed", sg.seed}},
                 ss.str());
      };
    });
  }

  // inject-noise
  struct {
    std::string input, output, keyboard;
    double natural = 0.01, kb = 0.05, vowel = 0.05;
    std::uint64_t seed = 1;
  } in;
  {
    CLI::App* s = add_sub(app, ctx, "inject-noise", "Character-level noise (substitution, keyboard, vowel drop)");
    s->add_option("--input", in.input, "Text, one sentence per line")->required();
    s->add_option("--output", in.output, "Noised text (default: stdout)");
    s->add_option("--natural-p", in.natural, "Random letter substitution rate");
    s->add_option("--keyboard-p", in.kb, "Adjacent-key substitution rate");
    s->add_option("--vowel-p", in.vowel, "Vowel drop rate");
    s->add_option("--keyboard", in.keyboard, "Keyboard adjacency file (default: QWERTY)");
    s->add_option("--seed", in.seed, "Noise seed");
    s->final_callback([&] {
      action = [&] {
        const KeyboardMap kb = in.keyboard.empty() ? KeyboardMap::qwerty() : KeyboardMap::load(in.keyboard);
        const std::vector<std::string> lines = read_lines(in.input);
        std::vector<std::string> noised;
        NoiseStats total;
        for (std::size_t i = 0; i < lines.size(); ++i) {
          NoiseStats st;
          noised.push_back(inject_noise(lines[i], NoiseConfig{in.natural, in.kb, in.vowel, derive_seed(in.seed, i)}, kb, &st));
          total.letters += st.letters;
          total.vowels += st.vowels;
          total.natural += st.natural;
          total.keyboard += st.keyboard;
          total.dropped += st.dropped;
        }
        const json stats = {{"lines", lines.size()},      {"letters", total.letters},
                            {"vowels", total.vowels},     {"natural", total.natural},
                            {"keyboard", total.keyboard}, {"dropped", total.dropped}};
        if (in.output.empty()) {
          for (const std::string& l : noised) ctx.out << l << "\n";
          if (!ctx.quiet) ctx.err << stats.dump() << "\n";
        } else {
          write_lines_atomic(in.output, noised);
          ctx.emit(stats, "noised " + std::to_string(lines.size()) + " lines\n");
        }
      };
    });
  }

  // gec
  struct {
    std::string input, output, task;
  } gc;
  {
    CLI::App* s = add_sub(app, ctx, "gec", "Rule-based source correction (typos, word order, final \"?\")");
    s->add_option("--input", gc.input, "Text, one sentence per line")->required();
    s->add_option("--output", gc.output, "Corrected text (default: stdout)");
    s->add_option("--task", gc.task, "Task spec JSON");
    s->final_callback([&] {
      action = [&] {
        const RuleGec gec(load_task(gc.task));
        std::vector<std::string> fixed;
        std::size_t changed = 0;
        for (const std::string& l : read_lines(gc.input)) {
          fixed.push_back(gec(l));
          if (fixed.back() != l) ++changed;
        }
        if (gc.output.empty()) {
          for (const std::string& l : fixed) ctx.out << l << "\n";
        } else {
          write_lines_atomic(gc.output, fixed);
          ctx.emit({{"lines", fixed.size()}, {"changed", changed}},
                   "corrected " + std::to_string(changed) + " of " + std::to_string(fixed.size()) + " lines\n");
        }
      };
    });
  }

  // experiment / sweep-alpha-beta
  struct ExpOpts {
    std::string spec, cache, out = "results";
    bool resume = false, print_spec = false;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> systems;
  };
  ExpOpts ex, sw;
  {
    auto add_exp = [&ctx](CLI::App* s, ExpOpts& o) {
      s->add_option("--spec", o.spec, "Experiment spec JSON (default: built-in)");
      s->add_option("--cache", o.cache, "Stage cache directory (default: $RFMT_CACHE_DIR or .rfmt-cache)");
      s->add_option("--out", o.out, "Results directory");
      s->add_flag("--resume", o.resume, "Reuse completed stages from the cache");
      s->add_option("--seeds", o.seeds, "Override the seed list")->delimiter(',');
      s->add_flag("--print-spec", o.print_spec, "Print the effective spec and exit");
      (void)ctx;
    };
    auto make_pipeline = [&ctx](ExpOpts& o) {
      ExperimentSpec spec = o.spec.empty() ? ExperimentSpec::defaults() : ExperimentSpec::load(o.spec);
      if (!o.seeds.empty()) spec.seeds = o.seeds;
      if (!o.systems.empty()) spec.systems = o.systems;
      spec.validate();
      return std::make_unique<Pipeline>(spec, o.cache.empty() ? default_cache_dir() : o.cache, o.resume, ctx.logger());
    };
    CLI::App* s = add_sub(app, ctx, "experiment", "Run the full comparison and write the results table");
    add_exp(s, ex);
    s->add_option("--systems", ex.systems, "Override the system list")->delimiter(',');
    s->final_callback([&, make_pipeline] {
      action = [&, make_pipeline] {
        auto p = make_pipeline(ex);
        if (ex.print_spec) {
          ctx.out << p->spec().to_json().dump(2) << "\n";
          return;
        }
        const ResultsTable t = run_experiment(*p);
        write_results(t, ex.out, "results");
        json j = t.to_json();
        j["stages_run"] = p->stages_run();
        j["stages_reused"] = p->stages_reused();
        ctx.emit(j, t.to_text());
      };
    });
    CLI::App* w = add_sub(app, ctx, "sweep-alpha-beta", "Re-train the composite system over (alpha, beta) pairs");
    add_exp(w, sw);
    w->final_callback([&, make_pipeline] {
      action = [&, make_pipeline] {
        auto p = make_pipeline(sw);
        if (sw.print_spec) {
          ctx.out << p->spec().to_json().dump(2) << "\n";
          return;
        }
        const ResultsTable t = run_sweep(*p);
        write_results(t, sw.out, "sweep");
        ctx.emit(t.to_json(), t.to_text());
      };
    });
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    if (action) action();
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TrainingError& e) {
    err << "training error: " << e.what() << "\n";
    return kExitTraining;
  } catch (const NumericError& e) {
    err << "training error: " << e.what() << "\n";
    return kExitTraining;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace rfmt
