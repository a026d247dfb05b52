// Annotated report data model.

#ifndef CLINIE_DOCUMENT_H_
#define CLINIE_DOCUMENT_H_

#include <string>
#include <vector>

#include "clinie/schema.h"
#include "clinie/text.h"

namespace clinie {

// Half-open token range [start, end).
struct TokenSpan {
  int start = 0;
  int end = 0;

  int size() const { return end - start; }
  bool operator==(const TokenSpan&) const = default;
  auto operator<=>(const TokenSpan&) const = default;
};

struct Entity {
  int id = 0;  // positive, unique within the document
  std::string type;
  TokenSpan span;
  std::string modality;

  bool operator==(const Entity&) const = default;
};

// Directed edge: the source carries the relation attribute and selects the
// target as its head.
struct Relation {
  int source_id = 0;
  int target_id = 0;
  std::string type;
  RelationCategory category = RelationCategory::kMedical;

  bool operator==(const Relation&) const = default;
};

struct Document {
  std::string doc_id;
  std::string patient_id;
  std::string text;
  std::vector<Token> tokens;
  std::vector<Entity> entities;     // ordered by span start
  std::vector<Relation> relations;  // ordered by (source, type, target)

  const Entity* find_entity(int id) const;
  // Token ranges of the non-empty lines, in reading order.
  std::vector<TokenSpan> line_segments() const;
  // Copy with entities and relations removed.
  Document unannotated() const;

  bool operator==(const Document&) const = default;
};

struct Corpus {
  std::vector<Document> documents;

  bool empty() const { return documents.empty(); }
  std::size_t size() const { return documents.size(); }
  const Document* find(const std::string& doc_id) const;

  bool operator==(const Corpus&) const = default;
};

// Puts entities and relations in canonical order (by span start / by
// (source id, schema relation order, target id)).
void canonicalize(Document& doc, const Schema& schema);

// Checks every structural invariant (spans in range and non-overlapping,
// single-line entities, unique positive ids, resolvable non-self relations,
// category/type consistency, known entity types). In strict mode also
// rejects unknown modalities and signature violations. Throws
// ValidationError listing every problem found.
void validate_document(const Document& doc, const Schema& schema, ValidationMode mode,
                       std::vector<std::string>* warnings = nullptr);

// Unannotated document over the given text.
Document make_document(std::string doc_id, std::string patient_id, std::string text,
                       const Tokenizer& tokenizer = default_tokenizer());

}  // namespace clinie

#endif  // CLINIE_DOCUMENT_H_
