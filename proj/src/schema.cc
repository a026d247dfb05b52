#include "clinie/schema.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "clinie/errors.h"

namespace clinie {

ParseError::ParseError(const std::string& what, int line, int column)
    : Error(line > 0 ? what + " (line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ")"
                     : what),
      line_(line),
      column_(column) {}

ValidationError::ValidationError(const std::string& what,
                                 std::vector<std::string> details)
    : Error([&] {
        std::string msg = what;
        for (const auto& d : details) msg += "\n  " + d;
        return msg;
      }()),
      details_(std::move(details)) {}

namespace {

constexpr std::string_view kDefaultConfig = R"(# entity types
entity D
entity A
entity F
entity C
entity TIMEX3
entity T-test
entity T-key
entity T-val
entity M-key
entity M-val
entity R
entity CC
# modalities
modality positive default
modality negative
modality suspicious
modality general
# medical relations
relation region medical A,D -> A,D
relation change medical C -> D,A,T-key,M-key
relation feature medical F -> *
relation value medical T-key,M-key -> T-val,M-val
relation compare medical C -> TIMEX3
# temporal relations
relation on temporal * -> TIMEX3
relation start temporal * -> TIMEX3
relation finish temporal * -> TIMEX3
relation after temporal * -> TIMEX3
relation before temporal * -> TIMEX3
)";

constexpr std::string_view kTimex = "TIMEX3";

std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t next = s.find(',', pos);
    if (next == std::string::npos) next = s.size();
    if (next > pos) out.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

std::string join(const std::set<std::string>& items, const char* sep) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += sep;
    out += s;
  }
  return out;
}

template <typename Range>
int find_index(const Range& range, std::string_view code) {
  for (std::size_t i = 0; i < range.size(); ++i) {
    if (range[i] == code) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

std::string_view category_name(RelationCategory category) {
  return category == RelationCategory::kMedical ? "medical" : "temporal";
}

std::string_view category_attribute(RelationCategory category) {
  return category == RelationCategory::kMedical ? "brel" : "trel";
}

const Schema& Schema::default_schema() {
  static const Schema schema = Schema::parse(kDefaultConfig);
  return schema;
}

Schema Schema::parse(std::string_view config) {
  Schema schema;
  bool have_default = false;
  std::vector<std::tuple<std::string, std::string, std::string, std::string, int>>
      pending;  // code, category, sources, targets, line
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < config.size()) {
    std::size_t eol = config.find('\n', pos);
    if (eol == std::string_view::npos) eol = config.size();
    std::string_view line = config.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    auto words = split_words(line);
    if (words.empty()) continue;
    auto fail = [&](const std::string& msg) {
      throw SchemaError("schema line " + std::to_string(line_no) + ": " + msg);
    };
    if (words[0] == "entity") {
      if (words.size() != 2) fail("expected 'entity <code>'");
      schema.entity_types_.push_back(words[1]);
    } else if (words[0] == "modality") {
      if (words.size() < 2 || words.size() > 3) fail("expected 'modality <code> [default]'");
      if (words.size() == 3) {
        if (words[2] != "default") fail("unknown modality flag '" + words[2] + "'");
        if (have_default) fail("more than one default modality");
        have_default = true;
        schema.default_modality_ = schema.modalities_.size();
      }
      schema.modalities_.push_back(words[1]);
    } else if (words[0] == "relation") {
      if (words.size() != 6 || words[4] != "->") {
        fail("expected 'relation <code> <category> <sources> -> <targets>'");
      }
      pending.emplace_back(words[1], words[2], words[3], words[5], line_no);
    } else {
      fail("unknown declaration '" + words[0] + "'");
    }
  }

  auto expand = [&](const std::string& list, int line) {
    std::set<std::string> out;
    if (list == "*") {
      out.insert(schema.entity_types_.begin(), schema.entity_types_.end());
      return out;
    }
    for (auto& code : split_list(list)) {
      if (find_index(schema.entity_types_, code) < 0) {
        throw SchemaError("schema line " + std::to_string(line) +
                          ": unknown entity type '" + code + "'");
      }
      out.insert(code);
    }
    return out;
  };
  for (auto& [code, category, sources, targets, line] : pending) {
    RelationTypeInfo info;
    info.code = code;
    if (category == "medical") {
      info.category = RelationCategory::kMedical;
    } else if (category == "temporal") {
      info.category = RelationCategory::kTemporal;
    } else {
      throw SchemaError("schema line " + std::to_string(line) +
                        ": unknown relation category '" + category + "'");
    }
    info.rule.relation = code;
    info.rule.source_types = expand(sources, line);
    info.rule.target_types = expand(targets, line);
    info.rule.strictness = Strictness::kCanonical;
    schema.relations_.push_back(std::move(info));
  }
  schema.check();
  return schema;
}

Schema Schema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot read schema file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Schema::check() const {
  auto unique = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return std::adjacent_find(v.begin(), v.end()) == v.end();
  };
  if (entity_types_.empty()) throw SchemaError("schema declares no entity types");
  if (modalities_.empty()) throw SchemaError("schema declares no modalities");
  if (!unique(entity_types_)) throw SchemaError("duplicate entity type code");
  if (!unique(modalities_)) throw SchemaError("duplicate modality code");
  std::vector<std::string> rel_codes;
  for (const auto& r : relations_) rel_codes.push_back(r.code);
  if (!unique(rel_codes)) throw SchemaError("duplicate relation code");
  for (const auto& r : relations_) {
    if (r.rule.source_types.empty() || r.rule.target_types.empty()) {
      throw SchemaError("relation '" + r.code + "' has an empty signature");
    }
    if (r.category == RelationCategory::kTemporal &&
        (r.rule.target_types.size() != 1 || *r.rule.target_types.begin() != kTimex)) {
      throw SchemaError("temporal relation '" + r.code + "' must target TIMEX3 only");
    }
  }
}

std::string Schema::to_config() const {
  std::string out;
  for (const auto& e : entity_types_) out += "entity " + e + "\n";
  for (std::size_t i = 0; i < modalities_.size(); ++i) {
    out += "modality " + modalities_[i] + (i == default_modality_ ? " default\n" : "\n");
  }
  std::set<std::string> all(entity_types_.begin(), entity_types_.end());
  auto list = [&](const std::set<std::string>& s) {
    return s == all ? std::string("*") : join(s, ",");
  };
  for (const auto& r : relations_) {
    out += "relation " + r.code + " " + std::string(category_name(r.category)) + " " +
           list(r.rule.source_types) + " -> " + list(r.rule.target_types) + "\n";
  }
  return out;
}

std::uint64_t Schema::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : to_config()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string Schema::fingerprint_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fingerprint()));
  return buf;
}

bool Schema::has_entity_type(std::string_view code) const {
  return find_index(entity_types_, code) >= 0;
}

bool Schema::has_modality(std::string_view code) const {
  return find_index(modalities_, code) >= 0;
}

bool Schema::has_relation(std::string_view code) const {
  return std::any_of(relations_.begin(), relations_.end(),
                     [&](const auto& r) { return r.code == code; });
}

int Schema::entity_index(std::string_view code) const {
  int i = find_index(entity_types_, code);
  if (i < 0) throw SchemaError("unknown entity type '" + std::string(code) + "'");
  return i;
}

int Schema::modality_index(std::string_view code) const {
  int i = find_index(modalities_, code);
  if (i < 0) throw SchemaError("unknown modality '" + std::string(code) + "'");
  return i;
}

int Schema::relation_index(std::string_view code) const {
  for (std::size_t i = 0; i < relations_.size(); ++i) {
    if (relations_[i].code == code) return static_cast<int>(i);
  }
  throw SchemaError("unknown relation type '" + std::string(code) + "'");
}

const RelationTypeInfo& Schema::relation(std::string_view code) const {
  return relations_[relation_index(code)];
}

RelationCategory Schema::category_of(std::string_view relation_code) const {
  return relation(relation_code).category;
}

SignatureRule Schema::canonical_signature(std::string_view relation_code) const {
  return relation(relation_code).rule;
}

ValidationResult Schema::validate_relation(std::string_view relation_code,
                                           std::string_view source_type,
                                           std::string_view target_type,
                                           ValidationMode mode) const {
  const auto& rule = relation(relation_code).rule;
  entity_index(source_type);
  entity_index(target_type);
  bool canonical = rule.source_types.count(std::string(source_type)) &&
                   rule.target_types.count(std::string(target_type));
  if (canonical) return {};
  std::string msg = std::string(relation_code) + "(" + std::string(source_type) + ", " +
                    std::string(target_type) + ") is outside the canonical signature " +
                    std::string(relation_code) + "({" + join(rule.source_types, ",") +
                    "} -> {" + join(rule.target_types, ",") + "})";
  return {mode == ValidationMode::kStrict ? Verdict::kViolation : Verdict::kWarning, msg};
}

std::vector<std::string> Schema::bio_tagset() const {
  return clinie::bio_tagset(std::set<std::string>(entity_types_.begin(), entity_types_.end()));
}

std::vector<std::string> bio_tagset(const std::set<std::string>& entity_types) {
  if (entity_types.empty()) throw SchemaError("BIO tag set needs at least one entity type");
  std::vector<std::string> tags{"O"};
  for (const auto& t : entity_types) {  // std::set iterates in byte order
    tags.push_back("B-" + t);
    tags.push_back("I-" + t);
  }
  return tags;
}

}  // namespace clinie
