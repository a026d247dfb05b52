#include "clinie/document.h"

#include <algorithm>
#include <map>
#include <set>

#include "clinie/errors.h"

namespace clinie {

const Entity* Document::find_entity(int id) const {
  for (const auto& e : entities) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

std::vector<TokenSpan> Document::line_segments() const {
  std::vector<TokenSpan> out;
  for (int i = 0; i < static_cast<int>(tokens.size());) {
    int j = i;
    while (j < static_cast<int>(tokens.size()) && tokens[j].line == tokens[i].line) ++j;
    out.push_back({i, j});
    i = j;
  }
  return out;
}

Document Document::unannotated() const {
  Document d;
  d.doc_id = doc_id;
  d.patient_id = patient_id;
  d.text = text;
  d.tokens = tokens;
  return d;
}

const Document* Corpus::find(const std::string& doc_id) const {
  for (const auto& d : documents) {
    if (d.doc_id == doc_id) return &d;
  }
  return nullptr;
}

void canonicalize(Document& doc, const Schema& schema) {
  std::stable_sort(doc.entities.begin(), doc.entities.end(),
                   [](const Entity& a, const Entity& b) { return a.span < b.span; });
  auto rel_rank = [&](const std::string& code) {
    return schema.has_relation(code) ? schema.relation_index(code) : 1 << 20;
  };
  std::stable_sort(doc.relations.begin(), doc.relations.end(),
                   [&](const Relation& a, const Relation& b) {
                     auto ka = std::make_tuple(a.source_id, rel_rank(a.type), a.type, a.target_id);
                     auto kb = std::make_tuple(b.source_id, rel_rank(b.type), b.type, b.target_id);
                     return ka < kb;
                   });
}

void validate_document(const Document& doc, const Schema& schema, ValidationMode mode,
                       std::vector<std::string>* warnings) {
  std::vector<std::string> problems;
  const int n = static_cast<int>(doc.tokens.size());
  std::map<int, const Entity*> by_id;
  std::vector<const Entity*> ordered;
  for (const auto& e : doc.entities) {
    std::string where = "entity " + std::to_string(e.id);
    if (e.id <= 0) problems.push_back(where + ": id must be positive");
    if (!by_id.emplace(e.id, &e).second) problems.push_back(where + ": duplicate id");
    if (e.span.start < 0 || e.span.start >= e.span.end || e.span.end > n) {
      problems.push_back(where + ": token span out of range");
      continue;
    }
    if (doc.tokens[e.span.start].line != doc.tokens[e.span.end - 1].line) {
      problems.push_back(where + ": span crosses a line break");
    }
    if (!schema.has_entity_type(e.type)) {
      problems.push_back(where + ": unknown entity type '" + e.type + "'");
    }
    if (!schema.has_modality(e.modality)) {
      std::string msg = where + ": unknown modality '" + e.modality + "'";
      if (mode == ValidationMode::kStrict) {
        problems.push_back(msg);
      } else if (warnings) {
        warnings->push_back(msg);
      }
    }
    ordered.push_back(&e);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const Entity* a, const Entity* b) { return a->span < b->span; });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->span.start < ordered[i - 1]->span.end) {
      problems.push_back("entities " + std::to_string(ordered[i - 1]->id) + " and " +
                         std::to_string(ordered[i]->id) + " overlap");
    }
  }
  std::set<std::tuple<int, int, std::string>> seen;
  for (const auto& r : doc.relations) {
    std::string where = r.type + "(" + std::to_string(r.source_id) + " -> " +
                        std::to_string(r.target_id) + ")";
    if (!schema.has_relation(r.type)) {
      problems.push_back(where + ": unknown relation type");
      continue;
    }
    if (schema.category_of(r.type) != r.category) {
      problems.push_back(where + ": relation listed under the wrong category");
    }
    auto src = by_id.find(r.source_id);
    auto tgt = by_id.find(r.target_id);
    if (src == by_id.end() || tgt == by_id.end()) {
      problems.push_back(where + ": dangling entity reference");
      continue;
    }
    if (r.source_id == r.target_id) problems.push_back(where + ": self relation");
    if (!seen.emplace(r.source_id, r.target_id, r.type).second) {
      problems.push_back(where + ": duplicate relation");
    }
    if (!schema.has_entity_type(src->second->type) || !schema.has_entity_type(tgt->second->type)) {
      continue;
    }
    auto verdict = schema.validate_relation(r.type, src->second->type, tgt->second->type, mode);
    if (verdict.verdict == Verdict::kViolation) {
      problems.push_back(where + ": " + verdict.message);
    } else if (verdict.verdict == Verdict::kWarning && warnings) {
      warnings->push_back(where + ": " + verdict.message);
    }
  }
  if (!problems.empty()) {
    throw ValidationError("document '" + doc.doc_id + "' is invalid", std::move(problems));
  }
}

Document make_document(std::string doc_id, std::string patient_id, std::string text,
                       const Tokenizer& tokenizer) {
  Document d;
  d.doc_id = std::move(doc_id);
  d.patient_id = std::move(patient_id);
  d.text = std::move(text);
  d.tokens = tokenizer.tokenize(d.text);
  return d;
}

}  // namespace clinie
