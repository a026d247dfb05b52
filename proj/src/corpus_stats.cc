#include <algorithm>
#include <cstdio>

#include "clinie/annotation_io.h"

namespace clinie {

namespace {

long lookup(const std::vector<std::pair<std::string, long>>& table, const std::string& key) {
  for (const auto& [k, v] : table) {
    if (k == key) return v;
  }
  return 0;
}

void bump(std::vector<std::pair<std::string, long>>& table, const std::string& key) {
  for (auto& [k, v] : table) {
    if (k == key) {
      ++v;
      return;
    }
  }
  table.emplace_back(key, 1);
}

}  // namespace

long CorpusStats::relation_count(const std::string& code) const {
  return lookup(medical_relations, code) + lookup(temporal_relations, code);
}

long CorpusStats::entity_count(const std::string& code) const {
  return lookup(entity_types, code);
}

long CorpusStats::modality_count(const std::string& code) const {
  return lookup(modalities, code);
}

CorpusStats corpus_stats(const Corpus& corpus, const Schema& schema) {
  CorpusStats stats;
  for (const auto& r : schema.relations()) {
    (r.category == RelationCategory::kMedical ? stats.medical_relations : stats.temporal_relations)
        .emplace_back(r.code, 0);
  }
  for (const auto& e : schema.entity_types()) stats.entity_types.emplace_back(e, 0);
  for (const auto& m : schema.modalities()) stats.modalities.emplace_back(m, 0);

  for (const auto& doc : corpus.documents) {
    ++stats.documents;
    stats.tokens += static_cast<int>(doc.tokens.size());
    for (const auto& e : doc.entities) {
      bump(stats.entity_types, e.type);
      bump(stats.modalities, e.modality);  // lenient input may carry extra codes
    }
    for (const auto& r : doc.relations) {
      bump(r.category == RelationCategory::kMedical ? stats.medical_relations
                                                    : stats.temporal_relations,
           r.type);
    }
  }
  for (const auto& [k, v] : stats.medical_relations) stats.medical_total += v;
  for (const auto& [k, v] : stats.temporal_relations) stats.temporal_total += v;
  return stats;
}

std::string format_stats_table(const CorpusStats& stats) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "documents %d, tokens %d\n\n", stats.documents, stats.tokens);
  out += line;
  std::snprintf(line, sizeof line, "%-10s %8s   %-10s %8s\n", "Med REL", "#Num", "Temp REL", "#Num");
  out += line;
  std::size_t rows = std::max(stats.medical_relations.size(), stats.temporal_relations.size());
  for (std::size_t i = 0; i < rows; ++i) {
    std::string mk, tk, mv, tv;
    if (i < stats.medical_relations.size()) {
      mk = stats.medical_relations[i].first;
      mv = std::to_string(stats.medical_relations[i].second);
    }
    if (i < stats.temporal_relations.size()) {
      tk = stats.temporal_relations[i].first;
      tv = std::to_string(stats.temporal_relations[i].second);
    }
    std::snprintf(line, sizeof line, "%-10s %8s   %-10s %8s\n", mk.c_str(), mv.c_str(),
                  tk.c_str(), tv.c_str());
    out += line;
  }
  std::snprintf(line, sizeof line, "%-10s %8ld   %-10s %8ld\n\n", "Total", stats.medical_total,
                "Total", stats.temporal_total);
  out += line;
  std::snprintf(line, sizeof line, "%-10s %8s\n", "Entity", "#Num");
  out += line;
  for (const auto& [k, v] : stats.entity_types) {
    std::snprintf(line, sizeof line, "%-10s %8ld\n", k.c_str(), v);
    out += line;
  }
  std::snprintf(line, sizeof line, "\n%-10s %8s\n", "Modality", "#Num");
  out += line;
  for (const auto& [k, v] : stats.modalities) {
    std::snprintf(line, sizeof line, "%-10s %8ld\n", k.c_str(), v);
    out += line;
  }
  return out;
}

std::string format_stats_tsv(const CorpusStats& stats) {
  std::string out = "section\tkey\tcount\n";
  auto row = [&](const char* section, const std::string& key, long v) {
    out += std::string(section) + "\t" + key + "\t" + std::to_string(v) + "\n";
  };
  row("corpus", "documents", stats.documents);
  row("corpus", "tokens", stats.tokens);
  for (const auto& [k, v] : stats.medical_relations) row("medical", k, v);
  row("medical", "total", stats.medical_total);
  for (const auto& [k, v] : stats.temporal_relations) row("temporal", k, v);
  row("temporal", "total", stats.temporal_total);
  for (const auto& [k, v] : stats.entity_types) row("entity", k, v);
  for (const auto& [k, v] : stats.modalities) row("modality", k, v);
  return out;
}

}  // namespace clinie
