#include "clinie/annotation_io.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "clinie/errors.h"

namespace clinie {

namespace {

struct Position {
  int line = 1;
  int column = 1;
};

Position locate(std::string_view input, std::size_t byte) {
  Position p;
  for (std::size_t i = 0; i < byte && i < input.size(); ++i) {
    if (input[i] == '\n') {
      ++p.line;
      p.column = 1;
    } else if ((static_cast<unsigned char>(input[i]) & 0xC0) != 0x80) {
      ++p.column;
    }
  }
  return p;
}

[[noreturn]] void fail(std::string_view input, std::size_t byte, const std::string& msg) {
  Position p = locate(input, byte);
  throw ParseError(msg, p.line, p.column);
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Decodes a character reference at input[pos] == '&'. Unrecognized references
// stay literal.
std::size_t decode_reference(std::string_view input, std::size_t pos, std::string& out) {
  static const std::pair<std::string_view, char> kRefs[] = {
      {"&lt;", '<'}, {"&gt;", '>'}, {"&amp;", '&'}, {"&quot;", '"'}, {"&apos;", '\''}};
  for (auto [ref, ch] : kRefs) {
    if (input.substr(pos, ref.size()) == ref) {
      out += ch;
      return pos + ref.size();
    }
  }
  out += '&';
  return pos + 1;
}

void escape_text(std::string& out, std::string_view text) {
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
}

void escape_attribute(std::string& out, std::string_view text) {
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
}

struct Tag {
  bool closing = false;
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::size_t begin = 0;  // byte offset of '<'
  std::size_t end = 0;    // one past '>'

  const std::string* attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

Tag read_tag(std::string_view input, std::size_t pos) {
  Tag tag;
  tag.begin = pos;
  std::size_t i = pos + 1;
  if (i < input.size() && input[i] == '/') {
    tag.closing = true;
    ++i;
  }
  std::size_t name_start = i;
  while (i < input.size() && !is_space(input[i]) && input[i] != '>' && input[i] != '/' &&
         input[i] != '<') {
    ++i;
  }
  tag.name = std::string(input.substr(name_start, i - name_start));
  if (tag.name.empty()) fail(input, pos, "markup with an empty element name");
  for (;;) {
    while (i < input.size() && is_space(input[i])) ++i;
    if (i >= input.size()) fail(input, pos, "unterminated markup <" + tag.name);
    if (input[i] == '>') break;
    if (input[i] == '/') fail(input, i, "self-closing elements are not supported");
    if (tag.closing) fail(input, i, "attributes on a closing tag </" + tag.name + ">");
    std::size_t key_start = i;
    while (i < input.size() && input[i] != '=' && !is_space(input[i]) && input[i] != '>') ++i;
    std::string key(input.substr(key_start, i - key_start));
    if (key.empty() || i >= input.size() || input[i] != '=') {
      fail(input, key_start, "expected attribute assignment in <" + tag.name + ">");
    }
    ++i;
    if (i >= input.size() || input[i] != '"') {
      fail(input, i, "attribute value must be double-quoted");
    }
    ++i;
    std::string value;
    while (i < input.size() && input[i] != '"') {
      if (input[i] == '<') fail(input, i, "'<' inside attribute value");
      if (input[i] == '&') {
        i = decode_reference(input, i, value);
      } else {
        value += input[i++];
      }
    }
    if (i >= input.size()) fail(input, key_start, "unterminated attribute value");
    ++i;
    for (const auto& [k, v] : tag.attributes) {
      if (k == key) fail(input, key_start, "duplicate attribute '" + key + "'");
    }
    tag.attributes.emplace_back(std::move(key), std::move(value));
  }
  tag.end = i + 1;
  return tag;
}

struct RawEntity {
  Tag open;
  int char_start = 0;
  int char_end = 0;
};

struct RawBody {
  std::string text;
  std::vector<char32_t> chars;
  std::vector<RawEntity> entities;
};

// Scans input[begin, end): text plus flat, non-nested entity elements.
RawBody scan_body(std::string_view input, std::size_t begin, std::size_t end,
                  const Schema& schema) {
  RawBody body;
  std::size_t pos = begin;
  std::optional<RawEntity> open;
  auto append = [&](std::string_view bytes) {
    body.text += bytes;
    for (std::size_t p = 0; p < bytes.size();) body.chars.push_back(decode_utf8(bytes, p));
  };
  while (pos < end) {
    char c = input[pos];
    if (c == '<') {
      Tag tag = read_tag(input, pos);
      if (tag.end > end) fail(input, pos, "markup runs past the end of the report");
      const std::size_t after = tag.end;
      if (tag.closing) {
        if (!open) fail(input, pos, "closing tag </" + tag.name + "> without an open element");
        if (tag.name != open->open.name) {
          fail(input, pos, "closing tag </" + tag.name + "> does not match <" + open->open.name + ">");
        }
        open->char_end = static_cast<int>(body.chars.size());
        body.entities.push_back(std::move(*open));
        open.reset();
      } else {
        if (tag.name == "doc") fail(input, pos, "nested <doc> element");
        if (open) {
          fail(input, pos, "element <" + tag.name + "> nested inside <" + open->open.name + ">");
        }
        if (!schema.has_entity_type(tag.name)) {
          fail(input, pos, "unknown entity type <" + tag.name + ">");
        }
        RawEntity e;
        e.open = std::move(tag);
        e.char_start = static_cast<int>(body.chars.size());
        open = std::move(e);
      }
      pos = after;
    } else if (c == '>') {
      fail(input, pos, "unescaped '>' in text");
    } else if (c == '&') {
      std::string decoded;
      pos = decode_reference(input, pos, decoded);
      append(decoded);
    } else {
      std::size_t next = pos;
      while (next < end && input[next] != '<' && input[next] != '>' && input[next] != '&') ++next;
      append(input.substr(pos, next - pos));
      pos = next;
    }
  }
  if (open) fail(input, open->open.begin, "element <" + open->open.name + "> is never closed");
  return body;
}

bool is_space_char(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == 0x3000;
}

int parse_id(std::string_view input, const Tag& tag, const std::string& value) {
  int id = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), id);
  if (ec != std::errc() || ptr != value.data() + value.size() || id <= 0) {
    fail(input, tag.begin, "entity id must be a positive integer, got '" + value + "'");
  }
  return id;
}

Document build_document(std::string_view input, RawBody body, const Schema& schema,
                        const ParseOptions& options, std::string doc_id,
                        std::string patient_id) {
  const Tokenizer& tokenizer = options.tokenizer ? *options.tokenizer : default_tokenizer();
  Document doc;
  doc.doc_id = std::move(doc_id);
  doc.patient_id = std::move(patient_id);
  doc.text = std::move(body.text);
  doc.tokens = tokenizer.tokenize(doc.text);

  struct PendingRelation {
    Relation relation;
    const Tag* tag;
  };
  std::vector<PendingRelation> pending;
  std::map<int, const Tag*> id_tags;
  for (const auto& raw : body.entities) {
    const Tag& tag = raw.open;
    for (const auto& [key, value] : tag.attributes) {
      if (key != "id" && key != "mod" && key != "brel" && key != "trel") {
        fail(input, tag.begin, "unknown attribute '" + key + "' on <" + tag.name + ">");
      }
    }
    const std::string* id_attr = tag.attribute("id");
    if (!id_attr) fail(input, tag.begin, "<" + tag.name + "> has no id attribute");
    Entity e;
    e.id = parse_id(input, tag, *id_attr);
    e.type = tag.name;
    const std::string* mod = tag.attribute("mod");
    e.modality = mod ? *mod : schema.default_modality();
    if (!id_tags.emplace(e.id, &tag).second) {
      fail(input, tag.begin, "duplicate entity id " + std::to_string(e.id));
    }

    // Trim whitespace, then map the character span onto tokens.
    int s = raw.char_start, t = raw.char_end;
    while (s < t && is_space_char(body.chars[s])) ++s;
    while (t > s && is_space_char(body.chars[t - 1])) --t;
    if (s == t) fail(input, tag.begin, "entity " + std::to_string(e.id) + " covers no text");
    int first = -1, last = -1;
    for (const auto& tok : doc.tokens) {
      if (tok.char_end > s && tok.char_start < t) {
        if (first < 0) first = tok.index;
        last = tok.index;
      }
    }
    if (first < 0) fail(input, tag.begin, "entity " + std::to_string(e.id) + " covers no token");
    if (doc.tokens[first].char_start != s || doc.tokens[last].char_end != t) {
      std::string msg = "entity " + std::to_string(e.id) + " boundary does not align with tokens";
      if (options.mode == ValidationMode::kStrict) fail(input, tag.begin, msg);
      if (options.warnings) options.warnings->push_back(msg + "; snapped to token boundaries");
    }
    if (doc.tokens[first].line != doc.tokens[last].line) {
      fail(input, tag.begin, "entity " + std::to_string(e.id) + " spans a line break");
    }
    e.span = {first, last + 1};
    doc.entities.push_back(std::move(e));

    for (auto category : {RelationCategory::kMedical, RelationCategory::kTemporal}) {
      const std::string* list = tag.attribute(category_attribute(category));
      if (!list) continue;
      std::size_t p = 0;
      while (p <= list->size()) {
        std::size_t q = list->find(';', p);
        if (q == std::string::npos) q = list->size();
        std::string item = list->substr(p, q - p);
        p = q + 1;
        if (item.empty()) continue;
        auto colon = item.find(':');
        if (colon == std::string::npos) {
          fail(input, tag.begin, "relation '" + item + "' is not of the form type:targetId");
        }
        Relation r;
        r.type = item.substr(0, colon);
        r.source_id = doc.entities.back().id;
        r.target_id = parse_id(input, tag, item.substr(colon + 1));
        r.category = category;
        if (!schema.has_relation(r.type)) {
          fail(input, tag.begin, "unknown relation type '" + r.type + "'");
        }
        if (schema.category_of(r.type) != category) {
          fail(input, tag.begin, "relation '" + r.type + "' listed under " +
                                     std::string(category_attribute(category)));
        }
        pending.push_back({std::move(r), &tag});
      }
    }
  }

  std::set<std::tuple<int, int, std::string>> seen;
  for (auto& [r, tag] : pending) {
    if (!id_tags.count(r.target_id)) {
      fail(input, tag->begin, "relation " + r.type + " points at unknown entity " +
                                  std::to_string(r.target_id));
    }
    if (r.target_id == r.source_id) fail(input, tag->begin, "entity relates to itself");
    if (!seen.emplace(r.source_id, r.target_id, r.type).second) {
      fail(input, tag->begin, "duplicate relation " + r.type + ":" + std::to_string(r.target_id));
    }
    doc.relations.push_back(std::move(r));
  }

  canonicalize(doc, schema);
  for (std::size_t i = 1; i < doc.entities.size(); ++i) {
    if (doc.entities[i].span.start < doc.entities[i - 1].span.end) {
      fail(input, id_tags[doc.entities[i].id]->begin,
           "entity " + std::to_string(doc.entities[i].id) + " overlaps entity " +
               std::to_string(doc.entities[i - 1].id));
    }
  }
  validate_document(doc, schema, options.mode, options.warnings);
  return doc;
}

}  // namespace

Document parse_report(std::string_view xml, const Schema& schema, const ParseOptions& options,
                      std::string doc_id, std::string patient_id) {
  RawBody body = scan_body(xml, 0, xml.size(), schema);
  if (patient_id.empty()) patient_id = doc_id;
  return build_document(xml, std::move(body), schema, options, std::move(doc_id),
                        std::move(patient_id));
}

Corpus parse_corpus(std::string_view xml, const Schema& schema, const ParseOptions& options,
                    const std::string& default_doc_id) {
  std::size_t pos = 0;
  while (pos < xml.size() && is_space(xml[pos])) ++pos;
  if (xml.substr(pos, 5) != "<doc ") {
    Corpus corpus;
    corpus.documents.push_back(parse_report(xml, schema, options, default_doc_id));
    return corpus;
  }
  Corpus corpus;
  std::set<std::string> ids;
  while (pos < xml.size()) {
    if (xml.substr(pos, 5) != "<doc ") fail(xml, pos, "expected <doc> element");
    Tag open = read_tag(xml, pos);
    const std::string* id = open.attribute("id");
    if (!id || id->empty()) fail(xml, pos, "<doc> without an id");
    const std::string* patient = open.attribute("patient");
    if (!ids.insert(*id).second) fail(xml, pos, "duplicate document id '" + *id + "'");
    std::size_t close = xml.find("</doc>", open.end);
    if (close == std::string_view::npos) fail(xml, pos, "<doc> is never closed");
    std::size_t body_begin = open.end;
    std::size_t body_end = close;
    if (body_begin < body_end && xml[body_begin] == '\n') ++body_begin;
    if (body_end > body_begin && xml[body_end - 1] == '\n') --body_end;
    RawBody body = scan_body(xml, body_begin, body_end, schema);
    corpus.documents.push_back(build_document(xml, std::move(body), schema, options, *id,
                                              patient && !patient->empty() ? *patient : *id));
    pos = close + 6;
    while (pos < xml.size() && is_space(xml[pos])) ++pos;
  }
  return corpus;
}

std::string serialize_report(const Document& doc, const Schema& schema) {
  validate_document(doc, schema, ValidationMode::kLenient);
  std::vector<const Entity*> entities;
  for (const auto& e : doc.entities) entities.push_back(&e);
  std::sort(entities.begin(), entities.end(),
            [](const Entity* a, const Entity* b) { return a->span < b->span; });

  std::string out;
  std::size_t byte = 0;
  for (const Entity* e : entities) {
    std::size_t open_at = doc.tokens[e->span.start].byte_start;
    std::size_t close_at = doc.tokens[e->span.end - 1].byte_end;
    escape_text(out, std::string_view(doc.text).substr(byte, open_at - byte));
    out += "<" + e->type + " id=\"" + std::to_string(e->id) + "\"";
    if (e->modality != schema.default_modality()) {
      out += " mod=\"";
      escape_attribute(out, e->modality);
      out += "\"";
    }
    for (auto category : {RelationCategory::kMedical, RelationCategory::kTemporal}) {
      std::vector<std::pair<int, int>> keys;  // (schema order, target)
      std::vector<const Relation*> rels;
      for (const auto& r : doc.relations) {
        if (r.source_id == e->id && r.category == category) rels.push_back(&r);
      }
      if (rels.empty()) continue;
      std::sort(rels.begin(), rels.end(), [&](const Relation* a, const Relation* b) {
        return std::make_pair(schema.relation_index(a->type), a->target_id) <
               std::make_pair(schema.relation_index(b->type), b->target_id);
      });
      out += " " + std::string(category_attribute(category)) + "=\"";
      for (std::size_t i = 0; i < rels.size(); ++i) {
        if (i) out += ";";
        out += rels[i]->type + ":" + std::to_string(rels[i]->target_id);
      }
      out += "\"";
    }
    out += ">";
    escape_text(out, std::string_view(doc.text).substr(open_at, close_at - open_at));
    out += "</" + e->type + ">";
    byte = close_at;
  }
  escape_text(out, std::string_view(doc.text).substr(byte));
  return out;
}

std::string serialize_corpus(const Corpus& corpus, const Schema& schema) {
  std::string out;
  for (const auto& doc : corpus.documents) {
    out += "<doc id=\"";
    escape_attribute(out, doc.doc_id);
    out += "\" patient=\"";
    escape_attribute(out, doc.patient_id);
    out += "\">\n";
    out += serialize_report(doc, schema);
    out += "\n</doc>\n";
  }
  return out;
}

std::string strip_annotations(const Document& doc) { return doc.text; }

std::string strip_markup(std::string_view xml) {
  std::string out;
  for (std::size_t pos = 0; pos < xml.size();) {
    if (xml[pos] == '<') {
      std::size_t close = xml.find('>', pos);
      if (close == std::string_view::npos) {
        out += xml.substr(pos);
        break;
      }
      pos = close + 1;
    } else if (xml[pos] == '&') {
      pos = decode_reference(xml, pos, out);
    } else {
      out += xml[pos++];
    }
  }
  return out;
}

Corpus read_corpus_file(const std::string& path, const Schema& schema,
                        const ParseOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string stem = path;
  if (auto slash = stem.find_last_of('/'); slash != std::string::npos) stem = stem.substr(slash + 1);
  if (auto dot = stem.find_last_of('.'); dot != std::string::npos && dot > 0) stem = stem.substr(0, dot);
  try {
    return parse_corpus(ss.str(), schema, options, stem);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_corpus_file(const std::string& path, const Corpus& corpus, const Schema& schema) {
  std::string text = serialize_corpus(corpus, schema);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed for " + path);
}

}  // namespace clinie
