#include "hpt/vocabulary.hpp"

#include <cctype>
#include <fstream>

#include "hpt/error.hpp"

namespace hpt {

Vocabulary::Vocabulary() {
  for (const char* w : {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"}) add(w);
}

Vocabulary Vocabulary::build(std::span<const std::string> texts, std::span<const std::string> extra_words) {
  Vocabulary v;
  for (const auto& t : texts) {
    for (const auto& w : split_words(t)) v.add(w);
  }
  for (const auto& t : extra_words) {
    for (const auto& w : split_words(t)) v.add(w);
  }
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open vocabulary '" + path.string() + "'");
  Vocabulary v;
  v.words_.clear();
  v.ids_.clear();
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (v.ids_.contains(line)) throw Error(ErrorKind::kMalformedRecord, "duplicate vocabulary entry '" + line + "'");
    v.ids_.emplace(line, static_cast<int>(v.words_.size()));
    v.words_.push_back(line);
  }
  if (v.size() < kFirstWord || v.words_[kMask] != "[MASK]") {
    throw Error(ErrorKind::kMalformedRecord, "vocabulary file lacks the reserved tokens");
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write vocabulary '" + path.string() + "'");
  for (const auto& w : words_) out << w << '\n';
}

int Vocabulary::add(std::string_view word) {
  const auto [it, inserted] = ids_.try_emplace(std::string(word), static_cast<int>(words_.size()));
  if (inserted) words_.emplace_back(word);
  return it->second;
}

std::optional<int> Vocabulary::find(std::string_view word) const {
  const auto it = ids_.find(std::string(word));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id(std::string_view word) const { return find(word).value_or(kUnk); }

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || id >= size()) throw Error(ErrorKind::kIdOutOfRange, "token id " + std::to_string(id));
  return words_[static_cast<std::size_t>(id)];
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 128 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(c < 128 ? std::tolower(c) : c));
    }
  }
  flush();
  return out;
}

std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_length) {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) {
    if (ids.size() >= max_length) break;
    ids.push_back(vocab.id(w));
  }
  return ids;
}

}  // namespace hpt
