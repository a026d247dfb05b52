// Inline XML-style annotated report format.
//
//   <D id="1" mod="suspicious" brel="region:2">nodules</D> in <A id="2">lung</A>
//
// Elements are named by entity code. Attributes, in canonical order:
//   id    positive integer, unique per report
//   mod   modality code, omitted when it equals the schema default
//   brel  medical relations of this (source) entity, "type:targetId;..."
//   trel  temporal relations, same syntax
// Several reports may share a file when each is wrapped in
//   <doc id="..." patient="...">\n ... \n</doc>
// Text characters '<', '>' and '&' are escaped as &lt; &gt; &amp;.

#ifndef CLINIE_ANNOTATION_IO_H_
#define CLINIE_ANNOTATION_IO_H_

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "clinie/document.h"

namespace clinie {

struct ParseOptions {
  ValidationMode mode = ValidationMode::kStrict;
  const Tokenizer* tokenizer = nullptr;  // default tokenizer when null
  std::vector<std::string>* warnings = nullptr;
};

// Parses one report (no <doc> wrapper).
Document parse_report(std::string_view xml, const Schema& schema,
                      const ParseOptions& options = {}, std::string doc_id = "doc",
                      std::string patient_id = "");

// Parses either a sequence of <doc> wrapped reports or a single bare report
// (which then receives `default_doc_id`).
Corpus parse_corpus(std::string_view xml, const Schema& schema,
                    const ParseOptions& options = {},
                    const std::string& default_doc_id = "doc");

std::string serialize_report(const Document& doc, const Schema& schema);
std::string serialize_corpus(const Corpus& corpus, const Schema& schema);

// Plain report text: the document text with all annotation removed.
std::string strip_annotations(const Document& doc);
// Removes markup from annotated text directly, decoding character escapes.
std::string strip_markup(std::string_view xml);

Corpus read_corpus_file(const std::string& path, const Schema& schema,
                        const ParseOptions& options = {});
void write_corpus_file(const std::string& path, const Corpus& corpus, const Schema& schema);

struct CorpusStats {
  int documents = 0;
  int tokens = 0;
  // Keys follow schema order; the category maps are keyed by relation code.
  std::vector<std::pair<std::string, long>> medical_relations;
  std::vector<std::pair<std::string, long>> temporal_relations;
  long medical_total = 0;
  long temporal_total = 0;
  std::vector<std::pair<std::string, long>> entity_types;
  std::vector<std::pair<std::string, long>> modalities;

  long relation_count(const std::string& code) const;
  long entity_count(const std::string& code) const;
  long modality_count(const std::string& code) const;
  bool operator==(const CorpusStats&) const = default;
};

CorpusStats corpus_stats(const Corpus& corpus, const Schema& schema);
std::string format_stats_table(const CorpusStats& stats);
// Tab-separated rows: section, key, count.
std::string format_stats_tsv(const CorpusStats& stats);

}  // namespace clinie

#endif  // CLINIE_ANNOTATION_IO_H_
