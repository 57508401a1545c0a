#include "rfmt/corpus/corpus.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rfmt/text/tokenize.h"
#include "rfmt/util/error.h"
#include "rfmt/util/io.h"
#include "rfmt/util/rng.h"

namespace rfmt {
namespace {

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const std::string& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::size_t slot_count(const std::string& pattern) {
  std::size_t n = 0;
  for (std::size_t p = pattern.find('{'); p != std::string::npos; p = pattern.find('{', p + 1)) ++n;
  return n;
}

bool typo_eligible(const std::string& w) {
  if (w.size() < 4) return false;
  return std::all_of(w.begin(), w.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)); });
}

char random_letter(Rng& rng) { return static_cast<char>('a' + rng.below(26)); }

std::string make_typo(const std::string& w, Rng& rng) {
  for (;;) {
    std::string t = w;
    const std::size_t pos = rng.below(w.size());
    switch (rng.below(4)) {
      case 0: t[pos] = random_letter(rng); break;
      case 1: t.erase(pos, 1); break;
      case 2:
        if (pos + 1 < t.size()) std::swap(t[pos], t[pos + 1]);
        break;
      default: t.insert(t.begin() + static_cast<std::ptrdiff_t>(pos), random_letter(rng)); break;
    }
    if (t != w) return t;
  }
}

CorpusTriple generate_line(const TaskSpec& spec, const std::vector<std::string>& entities, std::uint64_t index) {
  Rng rng(derive_seed(spec.seed, index));
  const bool statement = rng.bernoulli(spec.statement_fraction);
  const std::size_t frame = rng.below(spec.frames.size());
  const Frame& f = spec.frames[frame];
  std::vector<std::string> slots;
  for (std::size_t s = 0, n = slot_count(f.question); s < n; ++s) slots.push_back(entities[rng.below(entities.size())]);

  // Noise decisions are drawn unconditionally so the stream layout does not
  // depend on the sentence form.
  const bool declarative = rng.bernoulli(spec.noise.declarative);
  const bool drop_qmark = rng.bernoulli(spec.noise.drop_qmark);
  const bool typo = rng.bernoulli(spec.noise.typo);

  CorpusTriple t;
  const SentenceForm form = statement ? SentenceForm::kStatement : SentenceForm::kQuestion;
  t.clean_src = render(spec, frame, form, slots);
  t.tgt = gold_translate(spec, t.clean_src);
  t.edit_log = {{"frame", f.id}, {"form", statement ? "statement" : "question"}, {"slots", slots},
                {"edits", nlohmann::json::array()}};
  if (statement) {
    t.noisy_src = t.clean_src;
    return t;
  }

  std::vector<std::string> words = split_words(t.clean_src);
  if (declarative) {
    words = split_words(render(spec, frame, SentenceForm::kStatement, slots));
    words.back() = "?";
    t.edit_log["edits"].push_back({{"op", "declarative"}});
  }
  if (drop_qmark) {
    words.pop_back();
    t.edit_log["edits"].push_back({{"op", "drop_qmark"}});
  }
  if (typo) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (typo_eligible(words[i])) eligible.push_back(i);
    }
    if (!eligible.empty()) {
      const std::size_t idx = eligible[rng.below(eligible.size())];
      const std::string from = words[idx];
      words[idx] = make_typo(from, rng);
      t.edit_log["edits"].push_back({{"op", "typo"}, {"index", idx}, {"from", from}, {"to", words[idx]}});
    }
  }
  t.noisy_src = join(words);
  return t;
}

}  // namespace

std::vector<CorpusTriple> gen_corpus(const TaskSpec& spec) {
  spec.validate();
  const std::vector<std::string> entities = spec.entities();
  std::vector<CorpusTriple> out;
  out.reserve(spec.size);
  for (std::size_t i = 0; i < spec.size; ++i) out.push_back(generate_line(spec, entities, i));
  return out;
}

std::string reverse_edits(const TaskSpec& spec, const CorpusTriple& t) {
  const nlohmann::json& log = t.edit_log;
  std::vector<std::string> words = split_words(t.noisy_src);
  const auto& edits = log.at("edits");
  for (auto it = edits.rbegin(); it != edits.rend(); ++it) {
    const std::string op = it->at("op");
    if (op == "typo") {
      const std::size_t idx = it->at("index");
      if (idx >= words.size() || words[idx] != it->at("to").get<std::string>()) {
        throw DataError("reverse_edits: typo record does not match '" + t.noisy_src + "'");
      }
      words[idx] = it->at("from");
    } else if (op == "drop_qmark") {
      words.push_back("?");
    } else if (op == "declarative") {
      const std::string frame_id = log.at("frame");
      const auto f = std::find_if(spec.frames.begin(), spec.frames.end(),
                                  [&](const Frame& fr) { return fr.id == frame_id; });
      if (f == spec.frames.end()) throw DataError("reverse_edits: unknown frame " + frame_id);
      const auto slots = log.at("slots").get<std::vector<std::string>>();
      std::vector<std::string> stmt = split_words(render(spec, f - spec.frames.begin(), SentenceForm::kStatement, slots));
      stmt.back() = "?";
      if (words != stmt) throw DataError("reverse_edits: declarative record does not match '" + t.noisy_src + "'");
      words = split_words(render(spec, f - spec.frames.begin(), SentenceForm::kQuestion, slots));
    } else {
      throw DataError("reverse_edits: unknown op " + op);
    }
  }
  return join(words);
}

CorpusSplit split(const std::vector<CorpusTriple>& corpus, const std::array<double, 3>& ratios, std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw DataError("split: ratio outside [0, 1]");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DataError("split: ratios must sum to 1");

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  const std::size_t n = corpus.size();
  const auto n_valid = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
  const auto n_test = std::min(n - n_valid, static_cast<std::size_t>(std::llround(ratios[2] * static_cast<double>(n))));
  const std::size_t n_train = n - n_valid - n_test;

  CorpusSplit out;
  for (std::size_t i = 0; i < n; ++i) {
    const CorpusTriple& t = corpus[order[i]];
    if (i < n_train) {
      out.train.push_back(t);
    } else if (i < n_train + n_valid) {
      out.valid.push_back(t);
    } else {
      out.test.push_back(t);
    }
  }
  std::stable_sort(out.train.begin(), out.train.end(), [](const CorpusTriple& a, const CorpusTriple& b) {
    return split_words(a.tgt).size() < split_words(b.tgt).size();
  });
  return out;
}

std::string to_jsonl(const std::vector<CorpusTriple>& corpus) {
  std::string out;
  for (const CorpusTriple& t : corpus) {
    nlohmann::ordered_json j;
    j["clean_src"] = t.clean_src;
    j["noisy_src"] = t.noisy_src;
    j["tgt"] = t.tgt;
    j["edit_log"] = t.edit_log;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<CorpusTriple> from_jsonl(const std::vector<std::string>& lines) {
  std::vector<CorpusTriple> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      const auto j = nlohmann::json::parse(lines[i]);
      out.push_back(CorpusTriple{j.at("clean_src"), j.at("noisy_src"), j.at("tgt"),
                                 j.value("edit_log", nlohmann::json::object())});
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corpus line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

void save_corpus(const std::string& path, const std::vector<CorpusTriple>& corpus) {
  write_file_atomic(path, to_jsonl(corpus));
}

std::vector<CorpusTriple> load_corpus(const std::string& path) { return from_jsonl(read_lines(path)); }

}  // namespace rfmt
