#include <doctest.h>

#include "clinie/errors.h"
#include "clinie/schema.h"

using namespace clinie;

TEST_CASE("default schema inventories") {
  const Schema& s = Schema::default_schema();
  CHECK(s.entity_types().size() == 12);
  CHECK(s.modalities().size() == 4);
  CHECK(s.default_modality() == "positive");
  REQUIRE(s.relations().size() == 10);
  const char* order[] = {"region", "change", "feature", "value", "compare",
                         "on", "start", "finish", "after", "before"};
  for (int i = 0; i < 10; ++i) CHECK(s.relations()[i].code == order[i]);
  CHECK(s.category_of("region") == RelationCategory::kMedical);
  CHECK(s.category_of("compare") == RelationCategory::kMedical);
  CHECK(s.category_of("before") == RelationCategory::kTemporal);
  CHECK_THROWS_AS(s.entity_index("X"), SchemaError);
  CHECK_THROWS_AS(s.relation_index("near"), SchemaError);
}

TEST_CASE("BIO tagset layout") {
  const auto tags = Schema::default_schema().bio_tagset();
  REQUIRE(tags.size() == 25);
  CHECK(tags[0] == "O");
  CHECK(tags[1] == "B-A");
  CHECK(tags[2] == "I-A");
  CHECK(tags[3] == "B-C");
  CHECK(tags[5] == "B-CC");
  CHECK(tags[23] == "B-TIMEX3");
  CHECK(tags[24] == "I-TIMEX3");
  for (std::size_t i = 3; i < tags.size(); i += 2) CHECK(tags[i - 2].substr(2) < tags[i].substr(2));
}

TEST_CASE("signature validation") {
  const Schema& s = Schema::default_schema();
  CHECK(s.validate_relation("region", "D", "A", ValidationMode::kStrict).verdict == Verdict::kOk);
  CHECK(s.validate_relation("change", "C", "D", ValidationMode::kStrict).ok());
  CHECK(s.validate_relation("feature", "F", "TIMEX3", ValidationMode::kStrict).ok());
  CHECK(s.validate_relation("on", "D", "TIMEX3", ValidationMode::kStrict).ok());
  const auto bad = s.validate_relation("on", "D", "A", ValidationMode::kStrict);
  CHECK(bad.verdict == Verdict::kViolation);
  CHECK_FALSE(bad.message.empty());
  CHECK(s.validate_relation("on", "D", "A", ValidationMode::kLenient).verdict == Verdict::kWarning);
  CHECK(s.validate_relation("region", "F", "A", ValidationMode::kStrict).verdict == Verdict::kViolation);
  const auto sig = s.canonical_signature("compare");
  CHECK(sig.source_types == std::set<std::string>{"C"});
  CHECK(sig.target_types == std::set<std::string>{"TIMEX3"});
}

TEST_CASE("configuration round trip and fingerprint") {
  const Schema& s = Schema::default_schema();
  const Schema again = Schema::parse(s.to_config());
  CHECK(again.to_config() == s.to_config());
  CHECK(again.fingerprint() == s.fingerprint());
  CHECK(s.fingerprint_hex().size() == 16);

  const Schema small = Schema::parse(
      "entity D\nentity TIMEX3\nmodality positive default\nmodality negative\n"
      "relation on temporal * -> TIMEX3\n");
  CHECK(small.fingerprint() != s.fingerprint());
  CHECK(small.bio_tagset().size() == 5);
}

TEST_CASE("malformed schema configurations") {
  CHECK_THROWS_AS(Schema::parse("entity D\nentity D\nmodality p default\n"), SchemaError);
  CHECK_THROWS_AS(Schema::parse("entity D\nmodality p default\nrelation r medical D -> Q\n"),
                  SchemaError);
  CHECK_THROWS_AS(Schema::parse("entity D\nentity TIMEX3\nmodality p default\n"
                                "relation on temporal * -> D\n"),
                  SchemaError);
  CHECK_THROWS_AS(Schema::parse("bogus line\n"), SchemaError);
}
