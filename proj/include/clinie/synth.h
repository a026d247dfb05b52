// Template generator for annotated pseudo-reports with an exact ledger of
// what it produced.
//
// Each report line is a clause. A relation clause links a source and a
// target entity through a connective word specific to the relation type;
// a modality other than the default is marked by a cue word right before
// the entity. A share of relations is split over two consecutive lines,
// and distractor lines carry a single unrelated entity.

#ifndef CLINIE_SYNTH_H_
#define CLINIE_SYNTH_H_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "clinie/document.h"

namespace clinie {

struct GenConfig {
  int n_documents = 500;
  int patients = 40;
  std::uint64_t seed = 1;
  int lexicon_size = 12;                     // words per entity type
  std::map<std::string, int> lexicon_sizes;  // per-type overrides
  // Relation mixture in schema codes; shaped like the LC column of the
  // corpus statistics by default.
  std::vector<std::pair<std::string, double>> relation_weights = {
      {"region", 6794}, {"feature", 5077}, {"change", 689}, {"compare", 615},
      {"on", 696},      {"value", 2},      {"start", 5},    {"finish", 2},
      {"after", 3},     {"before", 1}};
  std::vector<std::pair<std::string, double>> modality_weights = {
      {"positive", 0.70}, {"negative", 0.15}, {"suspicious", 0.10}, {"general", 0.05}};
  double cross_sentence_fraction = 0.10;
  double reversed_fraction = 0.25;    // target mentioned before source
  double multiword_fraction = 0.20;   // two-word entities where allowed
  int min_relations = 3;              // relation clauses per document
  int max_relations = 8;
  int max_distractors = 2;            // relation-free lines per document

  // Throws ValidationError.
  void validate(const Schema& schema) const;
};

struct Ledger {
  int documents = 0;
  int patients = 0;
  long tokens = 0;
  long cross_sentence = 0;
  std::vector<std::pair<std::string, long>> entity_counts;    // schema order
  std::vector<std::pair<std::string, long>> modality_counts;  // schema order
  std::vector<std::pair<std::string, long>> relation_counts;  // schema order
  std::set<std::string> vocabulary;                           // distinct tokens

  long entity_count(const std::string& code) const;
  long modality_count(const std::string& code) const;
  long relation_count(const std::string& code) const;
  long relation_total() const;

  // Tab-separated rows: section, key, value.
  std::string serialize() const;
  bool operator==(const Ledger&) const = default;
};

struct Generated {
  Corpus corpus;
  Ledger ledger;
};

Generated generate(const GenConfig& config, const Schema& schema = Schema::default_schema());

}  // namespace clinie

#endif  // CLINIE_SYNTH_H_
