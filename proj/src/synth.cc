#include "clinie/synth.h"

#include <algorithm>
#include <cstdio>
#include <random>

#include "clinie/errors.h"

namespace clinie {

namespace {

struct Connective {
  std::string forward;   // source <w> target
  std::string backward;  // target <w> source
};

const std::map<std::string, Connective>& known_connectives() {
  static const std::map<std::string, Connective> table = {
      {"region", {"in", "containing"}},   {"change", {"of", "showing"}},
      {"feature", {"pattern", "having"}}, {"value", {"equals", "measured"}},
      {"compare", {"versus", "compared"}}, {"on", {"on", "dated"}},
      {"start", {"from", "began"}},       {"finish", {"until", "ended"}},
      {"after", {"after", "preceded"}},   {"before", {"before", "followed"}}};
  return table;
}

const std::map<std::string, std::string>& known_cues() {
  static const std::map<std::string, std::string> table = {
      {"negative", "no"}, {"suspicious", "possible"}, {"general", "any"}};
  return table;
}

const std::map<std::string, std::string>& known_suffixes() {
  static const std::map<std::string, std::string> table = {
      {"D", "osis"}, {"A", "ary"},   {"F", "oid"},  {"C", "ening"}, {"T-test", "scan"},
      {"T-key", "idx"}, {"M-key", "dose"}, {"R", "ase"}, {"CC", "ema"}};
  return table;
}

const std::vector<std::string> kFillers = {"also", "then", "noted", "further"};
const std::vector<std::string> kDistractorTails = {"unchanged", "stable"};
const std::string kCrossTail = "seen";
const std::string kStop = ".";

bool numeric_type(const std::string& type) {
  return type == "TIMEX3" || type == "T-val" || type == "M-val";
}

std::string lower_alnum(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c >= 'A' && c <= 'Z') out += static_cast<char>(c - 'A' + 'a');
    else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) out += c;
  }
  return out;
}

class Builder {
 public:
  Builder(const GenConfig& config, const Schema& schema)
      : config_(config), schema_(schema), rng_(config.seed) {
    for (const auto& [_, c] : known_connectives()) {
      reserved_.insert(c.forward);
      reserved_.insert(c.backward);
    }
    for (const auto& [_, w] : known_cues()) reserved_.insert(w);
    for (const auto& w : kFillers) reserved_.insert(w);
    for (const auto& w : kDistractorTails) reserved_.insert(w);
    reserved_.insert(kCrossTail);
    reserved_.insert(kStop);
    for (const auto& r : schema_.relations()) {
      auto it = known_connectives().find(r.code);
      if (it != known_connectives().end()) {
        connectives_[r.code] = it->second;
      } else {
        const std::string base = "rel" + lower_alnum(r.code);
        connectives_[r.code] = {base, base + "by"};
        reserved_.insert(base);
        reserved_.insert(base + "by");
      }
    }
    for (const auto& m : schema_.modalities()) {
      if (m == schema_.default_modality()) continue;
      auto it = known_cues().find(m);
      cues_[m] = it != known_cues().end() ? it->second : "cue" + lower_alnum(m);
      reserved_.insert(cues_[m]);
    }
    for (const auto& t : schema_.entity_types()) build_lexicon(t);
    for (const auto& [code, w] : config_.relation_weights) relation_dist_.push_back(w);
    for (const auto& [code, w] : config_.modality_weights) modality_dist_.push_back(w);
  }

  Generated run() {
    Generated out;
    Ledger& ledger = out.ledger;
    for (const auto& t : schema_.entity_types()) ledger.entity_counts.push_back({t, 0});
    for (const auto& m : schema_.modalities()) ledger.modality_counts.push_back({m, 0});
    for (const auto& r : schema_.relations()) ledger.relation_counts.push_back({r.code, 0});
    std::set<std::string> patients;
    for (int d = 0; d < config_.n_documents; ++d) {
      char id[32], pid[32];
      std::snprintf(id, sizeof id, "doc%04d", d + 1);
      const int p = d < config_.patients ? d : uniform_int(0, config_.patients - 1);
      std::snprintf(pid, sizeof pid, "p%03d", p + 1);
      patients.insert(pid);
      out.corpus.documents.push_back(document(id, pid, ledger));
    }
    ledger.documents = config_.n_documents;
    ledger.patients = static_cast<int>(patients.size());
    return out;
  }

 private:
  struct Mention {
    int local = 0;  // entity index within the document
    std::string type;
    std::string modality;
    std::vector<std::string> words;
  };

  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool chance(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform_int(0, static_cast<int>(v.size()) - 1))];
  }

  int lexicon_size(const std::string& type) const {
    auto it = config_.lexicon_sizes.find(type);
    return it == config_.lexicon_sizes.end() ? config_.lexicon_size : it->second;
  }

  void build_lexicon(const std::string& type) {
    static const char* kCons = "bdfgklmnprstvz";
    static const char* kVow = "aeiou";
    std::vector<std::string>& words = lexicon_[type];
    const int n = lexicon_size(type);
    auto suffix_it = known_suffixes().find(type);
    const std::string suffix =
        suffix_it != known_suffixes().end() ? suffix_it->second : "x" + lower_alnum(type);
    int attempts = 0;
    while (static_cast<int>(words.size()) < n) {
      if (++attempts > 100000) throw ValidationError("cannot build lexicon for " + type);
      std::string w;
      if (type == "TIMEX3") {
        w = std::to_string(uniform_int(1900, 2099));
      } else if (type == "T-val") {
        w = std::to_string(uniform_int(1, 999)) + "u";
      } else if (type == "M-val") {
        w = std::to_string(uniform_int(1, 999)) + "mg";
      } else {
        const int syllables = uniform_int(1, 2);
        for (int s = 0; s < syllables; ++s) {
          w += kCons[uniform_int(0, 13)];
          w += kVow[uniform_int(0, 4)];
        }
        w += suffix;
      }
      if (reserved_.count(w) || used_words_.count(w)) continue;
      used_words_.insert(w);
      words.push_back(w);
    }
  }

  std::string choose_type(const std::set<std::string>& allowed) {
    std::vector<std::string> options;
    for (const auto& t : allowed)
      if (t != "TIMEX3") options.push_back(t);
    if (options.empty()) options.assign(allowed.begin(), allowed.end());
    return pick(options);
  }

  Mention mention(int local, const std::string& type) {
    Mention m;
    m.local = local;
    m.type = type;
    m.modality = schema_.default_modality();
    if (!config_.modality_weights.empty()) {
      std::discrete_distribution<int> dist(modality_dist_.begin(), modality_dist_.end());
      m.modality = config_.modality_weights[dist(rng_)].first;
    }
    const auto& lex = lexicon_.at(type);
    m.words.push_back(pick(lex));
    if (!numeric_type(type) && chance(config_.multiword_fraction)) {
      std::string second = pick(lex);
      while (lex.size() > 1 && second == m.words[0]) second = pick(lex);
      m.words.push_back(second);
    }
    return m;
  }

  // Appends the (cue +) entity words to `line` and records the span.
  void emit(std::vector<std::string>& line, const Mention& m, int line_offset,
            std::vector<std::pair<Mention, TokenSpan>>& placed) {
    auto cue = cues_.find(m.modality);
    if (cue != cues_.end()) line.push_back(cue->second);
    const int start = line_offset + static_cast<int>(line.size());
    for (const auto& w : m.words) line.push_back(w);
    placed.push_back({m, {start, start + static_cast<int>(m.words.size())}});
  }

  Document document(const std::string& id, const std::string& patient, Ledger& ledger) {
    struct Pending {
      int source;
      int target;
      std::string type;
    };
    std::vector<std::vector<std::string>> lines;
    std::vector<std::pair<Mention, TokenSpan>> placed;
    std::vector<Pending> pending;
    int offset = 0;
    int next_local = 0;
    auto finish_line = [&](std::vector<std::string>& line) {
      line.push_back(kStop);
      offset += static_cast<int>(line.size());
      lines.push_back(std::move(line));
    };

    const int relations = uniform_int(config_.min_relations, config_.max_relations);
    const int distractors = uniform_int(0, config_.max_distractors);
    // Clause kinds in shuffled order: 0 relation, 1 distractor.
    std::vector<int> kinds(relations, 0);
    kinds.insert(kinds.end(), distractors, 1);
    for (std::size_t i = kinds.size(); i > 1; --i) std::swap(kinds[i - 1], kinds[uniform_int(0, static_cast<int>(i) - 1)]);

    for (int kind : kinds) {
      std::vector<std::string> line;
      if (chance(0.3)) line.push_back(pick(kFillers));
      if (kind == 1) {
        const Mention m = mention(next_local++, pick(schema_.entity_types()));
        emit(line, m, offset, placed);
        line.push_back(pick(kDistractorTails));
        finish_line(line);
        continue;
      }
      std::discrete_distribution<int> dist(relation_dist_.begin(), relation_dist_.end());
      const std::string& rtype = config_.relation_weights[dist(rng_)].first;
      const auto& rule = schema_.relation(rtype).rule;
      const Mention src = mention(next_local++, choose_type(rule.source_types));
      const Mention tgt = mention(next_local++, choose_type(rule.target_types));
      const Connective& conn = connectives_.at(rtype);
      pending.push_back({src.local, tgt.local, rtype});
      if (chance(config_.cross_sentence_fraction)) {
        emit(line, src, offset, placed);
        line.push_back(kCrossTail);
        finish_line(line);
        std::vector<std::string> next;
        next.push_back(conn.forward);
        emit(next, tgt, offset, placed);
        finish_line(next);
        ++ledger.cross_sentence;
      } else if (chance(config_.reversed_fraction)) {
        emit(line, tgt, offset, placed);
        line.push_back(conn.backward);
        emit(line, src, offset, placed);
        finish_line(line);
      } else {
        emit(line, src, offset, placed);
        line.push_back(conn.forward);
        emit(line, tgt, offset, placed);
        finish_line(line);
      }
    }

    std::string text;
    for (std::size_t l = 0; l < lines.size(); ++l) {
      if (l) text += '\n';
      for (std::size_t w = 0; w < lines[l].size(); ++w) {
        if (w) text += ' ';
        text += lines[l][w];
        ledger.vocabulary.insert(lines[l][w]);
      }
    }
    Document doc = make_document(id, patient, text);
    if (static_cast<int>(doc.tokens.size()) != offset) {
      throw ValidationError("generator token count disagrees with the tokenizer in " + id);
    }
    ledger.tokens += offset;

    // Entity ids follow reading order.
    std::vector<std::size_t> order(placed.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return placed[a].second < placed[b].second;
    });
    std::vector<int> id_of(placed.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const auto& [m, span] = placed[order[rank]];
      id_of[m.local] = static_cast<int>(rank) + 1;
      doc.entities.push_back({static_cast<int>(rank) + 1, m.type, span, m.modality});
      add(ledger.entity_counts, m.type);
      add(ledger.modality_counts, m.modality);
    }
    for (const auto& p : pending) {
      doc.relations.push_back(
          {id_of[p.source], id_of[p.target], p.type, schema_.category_of(p.type)});
      add(ledger.relation_counts, p.type);
    }
    canonicalize(doc, schema_);
    return doc;
  }

  static void add(std::vector<std::pair<std::string, long>>& counts, const std::string& key) {
    for (auto& [k, v] : counts)
      if (k == key) {
        ++v;
        return;
      }
  }

  const GenConfig& config_;
  const Schema& schema_;
  std::mt19937_64 rng_;
  std::set<std::string> reserved_;
  std::set<std::string> used_words_;
  std::map<std::string, std::vector<std::string>> lexicon_;
  std::map<std::string, Connective> connectives_;
  std::map<std::string, std::string> cues_;
  std::vector<double> relation_dist_;
  std::vector<double> modality_dist_;
};

long lookup(const std::vector<std::pair<std::string, long>>& counts, const std::string& key) {
  for (const auto& [k, v] : counts)
    if (k == key) return v;
  return 0;
}

}  // namespace

void GenConfig::validate(const Schema& schema) const {
  std::vector<std::string> problems;
  if (n_documents < 0) problems.push_back("n_documents must be >= 0");
  if (patients < 1) problems.push_back("patients must be >= 1");
  if (lexicon_size < 1 || lexicon_size > 200) problems.push_back("lexicon_size must be in [1, 200]");
  for (const auto& [t, n] : lexicon_sizes) {
    if (!schema.has_entity_type(t)) problems.push_back("unknown entity type " + t);
    if (n < 1 || n > 200) problems.push_back("lexicon size for " + t + " must be in [1, 200]");
  }
  bool positive = false;
  for (const auto& [r, w] : relation_weights) {
    if (!schema.has_relation(r)) problems.push_back("unknown relation type " + r);
    if (!(w >= 0.0)) problems.push_back("negative weight for " + r);
    positive = positive || w > 0.0;
  }
  if (!positive) problems.push_back("relation weights need a positive entry");
  positive = modality_weights.empty();
  for (const auto& [m, w] : modality_weights) {
    if (!schema.has_modality(m)) problems.push_back("unknown modality " + m);
    if (!(w >= 0.0)) problems.push_back("negative weight for " + m);
    positive = positive || w > 0.0;
  }
  if (!positive) problems.push_back("modality weights need a positive entry");
  for (double f : {cross_sentence_fraction, reversed_fraction, multiword_fraction}) {
    if (!(f >= 0.0 && f <= 1.0)) problems.push_back("fractions must be in [0, 1]");
  }
  if (min_relations < 0 || max_relations < min_relations) {
    problems.push_back("need 0 <= min_relations <= max_relations");
  }
  if (max_distractors < 0) problems.push_back("max_distractors must be >= 0");
  if (!problems.empty()) throw ValidationError("invalid generator configuration", problems);
}

long Ledger::entity_count(const std::string& code) const { return lookup(entity_counts, code); }
long Ledger::modality_count(const std::string& code) const { return lookup(modality_counts, code); }
long Ledger::relation_count(const std::string& code) const { return lookup(relation_counts, code); }

long Ledger::relation_total() const {
  long n = 0;
  for (const auto& [_, v] : relation_counts) n += v;
  return n;
}

std::string Ledger::serialize() const {
  std::string out = "section\tkey\tvalue\n";
  out += "corpus\tdocuments\t" + std::to_string(documents) + '\n';
  out += "corpus\tpatients\t" + std::to_string(patients) + '\n';
  out += "corpus\ttokens\t" + std::to_string(tokens) + '\n';
  out += "corpus\tcross_sentence\t" + std::to_string(cross_sentence) + '\n';
  for (const auto& [k, v] : entity_counts) out += "entity\t" + k + '\t' + std::to_string(v) + '\n';
  for (const auto& [k, v] : modality_counts) out += "modality\t" + k + '\t' + std::to_string(v) + '\n';
  for (const auto& [k, v] : relation_counts) out += "relation\t" + k + '\t' + std::to_string(v) + '\n';
  for (const auto& w : vocabulary) out += "vocab\t" + w + "\t1\n";
  return out;
}

Generated generate(const GenConfig& config, const Schema& schema) {
  config.validate(schema);
  return Builder(config, schema).run();
}

}  // namespace clinie
