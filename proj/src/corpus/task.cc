#include "rfmt/corpus/task.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "rfmt/text/tokenize.h"
#include "rfmt/util/error.h"

namespace rfmt {
namespace {

std::vector<std::string> split_space(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

bool is_slot(const std::string& piece) { return piece.size() >= 3 && piece.front() == '{' && piece.back() == '}'; }

char rotate_vowel(char c) {
  switch (c) {
    case 'a': return 'e';
    case 'e': return 'i';
    case 'i': return 'o';
    case 'o': return 'u';
    case 'u': return 'a';
    default: return c;
  }
}

bool match_from(const std::vector<std::string>& pieces, std::size_t pi, const std::vector<std::string>& words,
                std::size_t wi, const std::set<std::string>& entities, std::vector<std::string>& fillers) {
  if (pi == pieces.size()) return wi == words.size();
  const std::string& piece = pieces[pi];
  if (!is_slot(piece)) {
    return wi < words.size() && words[wi] == piece && match_from(pieces, pi + 1, words, wi + 1, entities, fillers);
  }
  std::string phrase;
  for (std::size_t len = 1; len <= 2 && wi + len <= words.size(); ++len) {
    phrase = len == 1 ? words[wi] : phrase + " " + words[wi + 1];
    if (!entities.count(phrase)) continue;
    fillers.push_back(phrase);
    if (match_from(pieces, pi + 1, words, wi + len, entities, fillers)) return true;
    fillers.pop_back();
  }
  return false;
}

}  // namespace

TaskSpec TaskSpec::default_spec() {
  TaskSpec s;
  s.frames = {
      {"work_with", "does it work with {X}", "it works with {X}", {1, 4, 3, 2, 0}, {0, 3, 2, 1}},
      {"work_in", "does it work in {X}", "it works in {X}", {1, 4, 3, 2, 0}, {0, 3, 2, 1}},
      {"fit_in", "will it fit in {X}", "it will fit in {X}", {1, 4, 3, 2, 0}, {0, 4, 3, 2, 1}},
      {"compatible", "is it compatible with {X}", "it is compatible with {X}", {1, 4, 3, 2, 0}, {0, 4, 3, 2, 1}},
      {"support", "can it support {X}", "it can support {X}", {1, 3, 2, 0}, {0, 3, 2, 1}},
      {"difference",
       "what is the difference between {X} and {Y}",
       "the difference between {X} and {Y}",
       {5, 6, 7, 4, 2, 3, 0, 1},
       {3, 4, 5, 2, 0, 1}},
      {"difference_two",
       "what is the difference between the two",
       "the difference between the two",
       {5, 6, 4, 2, 3, 0, 1},
       {3, 4, 2, 0, 1}},
  };
  s.brands = {"samsung", "apple", "redmi", "nokia", "oppo", "vivo", "realme", "lenovo", "dell", "sony"};
  s.models = {"a50s", "m31", "note", "pro", "max", "plus", "mini"};
  s.dictionary = {
      {"does", "karta"},     {"it", "yah"},       {"work", "kaam"},   {"works", "kaamta"},
      {"with", "saath"},     {"in", "mein"},      {"will", "gaa"},    {"fit", "baith"},
      {"is", "hai"},         {"compatible", "anukul"}, {"can", "sakta"}, {"support", "samarthan"},
      {"what", "kaun"},      {"the", "vah"},      {"difference", "antar"}, {"between", "beech"},
      {"and", "aur"},        {"two", "dono"},
  };
  s.noise = NoiseProfile{0.5, 0.5, 0.2};
  s.statement_fraction = 0.0;
  s.size = 1000;
  s.seed = 1;
  return s;
}

std::vector<std::string> TaskSpec::entities() const {
  std::vector<std::string> out;
  for (const std::string& b : brands) out.push_back(b);
  for (const std::string& b : brands) {
    for (const std::string& m : models) out.push_back(b + " " + m);
  }
  return out;
}

std::vector<std::string> TaskSpec::source_lexicon() const {
  std::set<std::string> words;
  for (const Frame& f : frames) {
    for (const std::string* pattern : {&f.question, &f.statement}) {
      for (const std::string& w : split_space(*pattern)) {
        if (!is_slot(w)) words.insert(w);
      }
    }
  }
  words.insert(brands.begin(), brands.end());
  words.insert(models.begin(), models.end());
  return {words.begin(), words.end()};
}

std::string TaskSpec::target_word(const std::string& w) const {
  if (const auto it = dictionary.find(w); it != dictionary.end()) return it->second;
  if (std::find(brands.begin(), brands.end(), w) != brands.end() ||
      std::find(models.begin(), models.end(), w) != models.end()) {
    std::string t = w;
    std::transform(t.begin(), t.end(), t.begin(), rotate_vowel);
    return t + "o";
  }
  throw DataError("gold_translate: word '" + w + "' is outside the task lexicon");
}

std::map<std::string, std::string> TaskSpec::lemma_table() const {
  std::map<std::string, std::string> lemma;
  for (const std::string& w : source_lexicon()) {
    lemma[w] = w;
    lemma[target_word(w)] = w;
  }
  lemma["?"] = "?";
  lemma[particle] = "?";
  lemma["."] = ".";
  return lemma;
}

void TaskSpec::validate() const {
  for (double p : {noise.drop_qmark, noise.declarative, noise.typo, statement_fraction}) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("task spec: probability outside [0, 1]");
  }
  if (frames.empty()) throw DataError("task spec: no frames");
  if (brands.empty()) throw DataError("task spec: empty entity lexicon");
  const std::vector<std::string> lex = source_lexicon();
  const std::set<std::string> source(lex.begin(), lex.end());
  std::set<std::string> targets;
  for (const std::string& w : lex) {
    const std::string t = target_word(w);
    if (!targets.insert(t).second) throw DataError("task spec: dictionary not injective at '" + t + "'");
    if (source.count(t)) throw DataError("task spec: target word '" + t + "' is also a source word");
  }
  if (source.count(particle) || targets.count(particle)) throw DataError("task spec: particle collides");
  for (const Frame& f : frames) {
    const std::size_t nq = split_space(f.question).size();
    const std::size_t ns = split_space(f.statement).size();
    auto is_perm = [](std::vector<int> order, std::size_t n) {
      std::sort(order.begin(), order.end());
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (order[i] != static_cast<int>(i)) return false;
      }
      return order.size() == n;
    };
    if (!is_perm(f.question_order, nq) || !is_perm(f.statement_order, ns)) {
      throw DataError("task spec: frame '" + f.id + "' order is not a permutation");
    }
  }
}

nlohmann::json TaskSpec::to_json() const {
  nlohmann::json j;
  j["frames"] = nlohmann::json::array();
  for (const Frame& f : frames) {
    j["frames"].push_back({{"id", f.id},
                           {"question", f.question},
                           {"statement", f.statement},
                           {"question_order", f.question_order},
                           {"statement_order", f.statement_order}});
  }
  j["brands"] = brands;
  j["models"] = models;
  j["dictionary"] = dictionary;
  j["particle"] = particle;
  j["noise"] = {{"drop_qmark", noise.drop_qmark}, {"declarative", noise.declarative}, {"typo", noise.typo}};
  j["statement_fraction"] = statement_fraction;
  j["size"] = size;
  j["seed"] = seed;
  return j;
}

TaskSpec TaskSpec::from_json(const nlohmann::json& j) {
  TaskSpec s = default_spec();
  try {
    if (j.contains("frames")) {
      s.frames.clear();
      for (const auto& f : j.at("frames")) {
        s.frames.push_back(Frame{f.at("id"), f.at("question"), f.at("statement"),
                                 f.at("question_order").get<std::vector<int>>(),
                                 f.at("statement_order").get<std::vector<int>>()});
      }
    }
    if (j.contains("brands")) s.brands = j.at("brands").get<std::vector<std::string>>();
    if (j.contains("models")) s.models = j.at("models").get<std::vector<std::string>>();
    if (j.contains("dictionary")) s.dictionary = j.at("dictionary").get<std::map<std::string, std::string>>();
    if (j.contains("particle")) s.particle = j.at("particle");
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      s.noise.drop_qmark = n.value("drop_qmark", s.noise.drop_qmark);
      s.noise.declarative = n.value("declarative", s.noise.declarative);
      s.noise.typo = n.value("typo", s.noise.typo);
    }
    s.statement_fraction = j.value("statement_fraction", s.statement_fraction);
    s.size = j.value("size", s.size);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("task spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string render(const TaskSpec& spec, std::size_t frame, SentenceForm form,
                   const std::vector<std::string>& fillers) {
  const Frame& f = spec.frames.at(frame);
  const std::string& pattern = form == SentenceForm::kQuestion ? f.question : f.statement;
  std::string out;
  std::size_t slot = 0;
  for (const std::string& piece : split_space(pattern)) {
    if (!out.empty()) out += ' ';
    out += is_slot(piece) ? fillers.at(slot++) : piece;
  }
  out += form == SentenceForm::kQuestion ? " ?" : " .";
  return out;
}

std::optional<std::vector<std::string>> match_form(const TaskSpec& spec, const std::string& pattern,
                                                   const std::vector<std::string>& words) {
  const std::vector<std::string> ents = spec.entities();
  const std::set<std::string> entity_set(ents.begin(), ents.end());
  std::vector<std::string> fillers;
  if (match_from(split_space(pattern), 0, words, 0, entity_set, fillers)) return fillers;
  return std::nullopt;
}

std::optional<ParsedSource> parse_clean(const TaskSpec& spec, const std::string& text) {
  std::vector<std::string> words = split_words(text);
  if (words.size() < 2) return std::nullopt;
  const std::string last = words.back();
  words.pop_back();
  SentenceForm form;
  if (last == "?") {
    form = SentenceForm::kQuestion;
  } else if (last == ".") {
    form = SentenceForm::kStatement;
  } else {
    return std::nullopt;
  }
  for (std::size_t i = 0; i < spec.frames.size(); ++i) {
    const Frame& f = spec.frames[i];
    auto fillers = match_form(spec, form == SentenceForm::kQuestion ? f.question : f.statement, words);
    if (fillers) return ParsedSource{i, form, std::move(*fillers)};
  }
  return std::nullopt;
}

std::string gold_translate(const TaskSpec& spec, const std::string& clean_src) {
  const auto parsed = parse_clean(spec, clean_src);
  if (!parsed) throw DataError("gold_translate: not a clean task sentence: '" + clean_src + "'");
  const Frame& f = spec.frames[parsed->frame];
  const bool question = parsed->form == SentenceForm::kQuestion;
  const std::vector<std::string> pieces = split_space(question ? f.question : f.statement);
  const std::vector<int>& order = question ? f.question_order : f.statement_order;

  // Entity slot k of the pattern maps to fillers[k] by occurrence order.
  std::vector<int> slot_index(pieces.size(), -1);
  int next_slot = 0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (is_slot(pieces[i])) slot_index[i] = next_slot++;
  }
  std::string out;
  auto emit = [&out](const std::string& w) {
    if (!out.empty()) out += ' ';
    out += w;
  };
  for (int idx : order) {
    if (slot_index[idx] >= 0) {
      for (const std::string& w : split_space(parsed->fillers.at(slot_index[idx]))) emit(spec.target_word(w));
    } else {
      emit(spec.target_word(pieces[idx]));
    }
  }
  if (question) {
    emit(spec.particle);
    emit("?");
  } else {
    emit(".");
  }
  return out;
}

}  // namespace rfmt
