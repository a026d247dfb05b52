#include "clinie/text.h"

#include <fstream>
#include <sstream>

#include "clinie/errors.h"

namespace clinie {

char32_t decode_utf8(std::string_view bytes, std::size_t& pos) {
  auto b0 = static_cast<unsigned char>(bytes[pos]);
  int len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
  if (len == 0 || pos + len > bytes.size()) {
    ++pos;
    return 0xFFFD;
  }
  char32_t cp = len == 1 ? b0 : b0 & (0xFF >> (len + 1));
  for (int i = 1; i < len; ++i) {
    auto b = static_cast<unsigned char>(bytes[pos + i]);
    if ((b >> 6) != 0x2) {
      ++pos;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  pos += len;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

int count_code_points(std::string_view bytes) {
  int n = 0;
  for (std::size_t pos = 0; pos < bytes.size(); ++n) decode_utf8(bytes, pos);
  return n;
}

namespace {

bool is_space(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v' ||
         c == 0x3000;  // ideographic space
}

bool is_word(char32_t c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

}  // namespace

std::vector<Token> DefaultTokenizer::tokenize(std::string_view text) const {
  std::vector<Token> tokens;
  std::size_t pos = 0;
  int cp_index = 0;
  int line = 0;
  Token* open = nullptr;  // current alphanumeric run
  while (pos < text.size()) {
    std::size_t start = pos;
    char32_t c = decode_utf8(text, pos);
    if (is_word(c) && open != nullptr) {
      open->char_end = cp_index + 1;
      open->byte_end = static_cast<int>(pos);
    } else if (is_space(c)) {
      open = nullptr;
      if (c == '\n') ++line;
    } else {
      Token t;
      t.index = static_cast<int>(tokens.size());
      t.char_start = cp_index;
      t.char_end = cp_index + 1;
      t.byte_start = static_cast<int>(start);
      t.byte_end = static_cast<int>(pos);
      t.line = line;
      tokens.push_back(t);
      open = is_word(c) ? &tokens.back() : nullptr;
    }
    ++cp_index;
  }
  for (auto& t : tokens) t.text = std::string(text.substr(t.byte_start, t.byte_end - t.byte_start));
  return tokens;
}

const Tokenizer& default_tokenizer() {
  static const DefaultTokenizer tokenizer;
  return tokenizer;
}

std::vector<Token> tokens_from_offsets(std::string_view text,
                                       const std::vector<std::pair<int, int>>& offsets) {
  // Code point -> byte offset and line tables.
  std::vector<int> byte_at{0};
  std::vector<int> line_at;
  int line = 0;
  for (std::size_t pos = 0; pos < text.size();) {
    char32_t c = decode_utf8(text, pos);
    line_at.push_back(line);
    if (c == '\n') ++line;
    byte_at.push_back(static_cast<int>(pos));
  }
  const int n_chars = static_cast<int>(line_at.size());
  std::vector<Token> tokens;
  int prev_end = 0;
  for (auto [s, e] : offsets) {
    if (s < prev_end || e <= s || e > n_chars) {
      throw ParseError("invalid token offsets [" + std::to_string(s) + ", " +
                       std::to_string(e) + ")");
    }
    if (line_at[s] != line_at[e - 1]) {
      throw ParseError("token [" + std::to_string(s) + ", " + std::to_string(e) +
                       ") crosses a line break");
    }
    Token t;
    t.index = static_cast<int>(tokens.size());
    t.char_start = s;
    t.char_end = e;
    t.byte_start = byte_at[s];
    t.byte_end = byte_at[e];
    t.line = line_at[s];
    t.text = std::string(text.substr(t.byte_start, t.byte_end - t.byte_start));
    tokens.push_back(std::move(t));
    prev_end = e;
  }
  return tokens;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed for " + path);
}

}  // namespace clinie
