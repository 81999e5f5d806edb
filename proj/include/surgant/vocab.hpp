#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace surgant {

inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kFirstWordId = 4;

// Lowercased words: runs of ASCII letters/digits (and any byte >= 0x80),
// with '.' kept between two digits; every other non-space byte is its own token.
std::vector<std::string> split_words(const std::string& text);
// split_words joined by single spaces.
std::string normalize_text(const std::string& text);

/// Word vocabulary with four reserved ids; words are numbered in
/// lexicographic order after the reserved block.
class Vocab {
 public:
  Vocab();
  static Vocab build(std::span<const std::string> corpus);

  std::size_t size() const { return words_.size(); }
  int id(const std::string& word) const;
  const std::string& word(int id) const;
  bool contains(const std::string& word) const { return ids_.count(word) != 0; }

  std::vector<int> encode(const std::string& text) const;
  // Skips reserved ids and stops at the first EOS.
  std::string decode(std::span<const int> ids) const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> ids_;
};

}  // namespace surgant
