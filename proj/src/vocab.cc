#include <algorithm>
#include <map>
#include <sstream>

#include "clinie/encoder.h"
#include "clinie/errors.h"

namespace clinie {

Vocab::Vocab() {
  add("<pad>");
  add("<unk>");
}

int Vocab::add(std::string_view token) {
  auto [it, inserted] = index_.emplace(std::string(token), size());
  if (inserted) tokens_.emplace_back(token);
  return it->second;
}

int Vocab::index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocab::encode(const Document& doc) const {
  std::vector<int> ids;
  ids.reserve(doc.tokens.size());
  for (const auto& t : doc.tokens) ids.push_back(index(t.text));
  return ids;
}

std::string Vocab::serialize() const {
  std::string out = "min_freq " + std::to_string(min_freq_) + "\n";
  for (int i = 2; i < size(); ++i) out += tokens_[i] + "\n";
  return out;
}

Vocab Vocab::parse(std::string_view text) {
  Vocab v;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("min_freq ", 0) != 0) {
    throw ModelError("vocabulary file lacks a min_freq header");
  }
  v.min_freq_ = std::stoi(line.substr(9));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (v.contains(line)) throw ModelError("duplicate vocabulary entry '" + line + "'");
    v.add(line);
  }
  return v;
}

Vocab build_vocab(const Corpus& corpus, int min_freq) {
  std::map<std::string, int> freq;
  for (const auto& doc : corpus.documents)
    for (const auto& t : doc.tokens) ++freq[t.text];
  Vocab v;
  v.set_min_freq(min_freq);
  for (const auto& [tok, n] : freq) {
    if (n >= min_freq) v.add(tok);
  }
  return v;
}

EncodeInput make_encode_input(const Document& doc, const Vocab& vocab) {
  return {doc.doc_id, vocab.encode(doc)};
}

}  // namespace clinie
