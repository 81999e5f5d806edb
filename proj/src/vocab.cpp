#include "surgant/vocab.hpp"

#include <fstream>
#include <set>

#include "surgant/errors.hpp"

namespace surgant {

namespace {

constexpr const char* kVocabHeader = "#surgant-vocab 1";

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

char lower(unsigned char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c); }

}  // namespace

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_word_byte(c)) {
      current += lower(c);
    } else if (c == '.' && !current.empty() && is_digit(static_cast<unsigned char>(current.back())) &&
               i + 1 < text.size() && is_digit(static_cast<unsigned char>(text[i + 1]))) {
      current += '.';
    } else {
      flush();
      if (!is_space(c)) out.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return out;
}

std::string normalize_text(const std::string& text) {
  std::string out;
  for (const auto& w : split_words(text)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

Vocab::Vocab() : words_{"<pad>", "<bos>", "<eos>", "<unk>"} {
  for (int i = 0; i < kFirstWordId; ++i) ids_[words_[i]] = i;
}

Vocab Vocab::build(std::span<const std::string> corpus) {
  std::set<std::string> words;
  for (const auto& line : corpus)
    for (auto& w : split_words(line)) words.insert(std::move(w));
  Vocab v;
  for (const auto& w : words) {
    if (v.ids_.count(w)) continue;
    v.ids_[w] = static_cast<int>(v.words_.size());
    v.words_.push_back(w);
  }
  return v;
}

int Vocab::id(const std::string& word) const {
  auto it = ids_.find(word);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocab::word(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(words_.size()));
  }
  return words_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) ids.push_back(id(w));
  return ids;
}

std::string Vocab::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kEosId) break;
    if (id < kFirstWordId) continue;
    if (!out.empty()) out += ' ';
    out += word(id);
  }
  return out;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write vocabulary " + path);
  out << kVocabHeader << '\n';
  for (std::size_t i = kFirstWordId; i < words_.size(); ++i) out << words_[i] << '\n';
  if (!out) throw InputError("failed writing vocabulary " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open vocabulary " + path);
  std::string line;
  if (!std::getline(in, line) || line != kVocabHeader) throw FormatError(path + ": missing vocabulary header");
  Vocab v;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (v.ids_.count(line)) throw FormatError(path + ": duplicate token '" + line + "'");
    v.ids_[line] = static_cast<int>(v.words_.size());
    v.words_.push_back(line);
  }
  return v;
}

}  // namespace surgant
