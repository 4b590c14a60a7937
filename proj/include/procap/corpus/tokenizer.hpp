#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace procap::corpus {

// Lowercases, splits every ASCII punctuation character into its own token and
// collapses whitespace. Runs of letters, digits and non-ASCII bytes stay
// together, so "400" and "crème" are single tokens.
inline std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  };
  for (char ch : sentence) {
    const auto uc = static_cast<unsigned char>(ch);
    if (uc >= 0x80 || std::isalnum(uc)) {
      current.push_back(static_cast<char>(std::tolower(uc)));
    } else if (std::isspace(uc) || std::iscntrl(uc)) {
      flush();
    } else {
      flush();
      tokens.emplace_back(1, ch);
    }
  }
  flush();
  return tokens;
}

inline std::string join(const std::vector<std::string>& tokens,
                        std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += sep;
    out += tokens[i];
  }
  return out;
}

// Canonical form of an ingredient name: its tokens joined by single spaces.
inline std::string normalize_ingredient(std::string_view name) {
  return join(tokenize(name));
}

inline bool is_punctuation_token(std::string_view token) {
  return token.size() == 1 &&
         std::ispunct(static_cast<unsigned char>(token.front())) != 0;
}

}  // namespace procap::corpus
