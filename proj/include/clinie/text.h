// UTF-8 helpers and the default tokenizer. All character offsets are counted
// in Unicode scalar values.

#ifndef CLINIE_TEXT_H_
#define CLINIE_TEXT_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace clinie {

struct Token {
  int index = 0;
  int char_start = 0;  // half-open, code points
  int char_end = 0;
  int byte_start = 0;  // half-open, bytes into the UTF-8 text
  int byte_end = 0;
  int line = 0;        // 0-based line of the report
  std::string text;

  bool operator==(const Token&) const = default;
};

// Decodes one scalar value starting at bytes[pos]; advances pos. Invalid
// sequences decode to U+FFFD and consume one byte.
char32_t decode_utf8(std::string_view bytes, std::size_t& pos);
void append_utf8(std::string& out, char32_t cp);
int count_code_points(std::string_view bytes);

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<Token> tokenize(std::string_view text) const = 0;
};

// Runs of ASCII letters/digits form one token; every other non-space
// character (ASCII punctuation, any non-ASCII scalar) is a token of its own,
// which gives per-character segmentation for unsegmented scripts.
class DefaultTokenizer : public Tokenizer {
 public:
  std::vector<Token> tokenize(std::string_view text) const override;
};

const Tokenizer& default_tokenizer();

// Builds tokens from externally supplied code-point offsets (e.g. output of a
// morphological analyzer). Offsets must be strictly increasing,
// non-overlapping and inside the text; throws ParseError otherwise.
std::vector<Token> tokens_from_offsets(std::string_view text,
                                       const std::vector<std::pair<int, int>>& offsets);

// Whole-file I/O; throws Error on failure.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace clinie

#endif  // CLINIE_TEXT_H_
