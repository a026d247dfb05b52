// Entity, modality and relation inventories together with the argument
// signatures each relation type admits.

#ifndef CLINIE_SCHEMA_H_
#define CLINIE_SCHEMA_H_

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace clinie {

enum class RelationCategory { kMedical, kTemporal };
enum class Strictness { kCanonical, kLenient };
enum class ValidationMode { kStrict, kLenient };

std::string_view category_name(RelationCategory category);
// Attribute name carrying relations of this category ("brel" / "trel").
std::string_view category_attribute(RelationCategory category);

struct SignatureRule {
  std::string relation;
  std::set<std::string> source_types;
  std::set<std::string> target_types;
  Strictness strictness = Strictness::kCanonical;
};

struct RelationTypeInfo {
  std::string code;
  RelationCategory category = RelationCategory::kMedical;
  SignatureRule rule;
};

enum class Verdict { kOk, kWarning, kViolation };

struct ValidationResult {
  Verdict verdict = Verdict::kOk;
  std::string message;

  bool ok() const { return verdict != Verdict::kViolation; }
};

// Immutable after construction.
class Schema {
 public:
  // The built-in inventory: 12 entity types, 4 modalities, 10 relations.
  static const Schema& default_schema();

  // Plain-text configuration, one declaration per line:
  //   entity <code>
  //   modality <code> [default]
  //   relation <code> medical|temporal <src,...|*> -> <tgt,...|*>
  // Blank lines and '#' comments are ignored.
  static Schema parse(std::string_view config);
  static Schema load(const std::string& path);
  std::string to_config() const;

  // FNV-1a over the canonical configuration text.
  std::uint64_t fingerprint() const;
  std::string fingerprint_hex() const;

  const std::vector<std::string>& entity_types() const { return entity_types_; }
  const std::vector<std::string>& modalities() const { return modalities_; }
  const std::vector<RelationTypeInfo>& relations() const { return relations_; }
  const std::string& default_modality() const { return modalities_[default_modality_]; }

  bool has_entity_type(std::string_view code) const;
  bool has_modality(std::string_view code) const;
  bool has_relation(std::string_view code) const;

  // Dense indices. Throw SchemaError for unknown codes.
  int entity_index(std::string_view code) const;
  int modality_index(std::string_view code) const;
  int relation_index(std::string_view code) const;

  const RelationTypeInfo& relation(std::string_view code) const;
  RelationCategory category_of(std::string_view relation_code) const;

  SignatureRule canonical_signature(std::string_view relation_code) const;

  ValidationResult validate_relation(std::string_view relation_code,
                                     std::string_view source_type,
                                     std::string_view target_type,
                                     ValidationMode mode) const;

  // [O, B-t, I-t, ...] with types in byte-wise code order.
  std::vector<std::string> bio_tagset() const;

 private:
  Schema() = default;
  void check() const;

  std::vector<std::string> entity_types_;
  std::vector<std::string> modalities_;
  std::size_t default_modality_ = 0;
  std::vector<RelationTypeInfo> relations_;
};

std::vector<std::string> bio_tagset(const std::set<std::string>& entity_types);

}  // namespace clinie

#endif  // CLINIE_SCHEMA_H_
