#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hpt {

/// Dense word-level vocabulary. Ids 0..4 are reserved:
///   0 [PAD]  1 [UNK]  2 [CLS]  3 [SEP]  4 [MASK]
/// The [PRED] slot embedding is initialised from [MASK] and lives outside the
/// vocabulary.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kFirstWord = 5;

  Vocabulary();

  /// Words in first-appearance order over `texts`, then `extra_words`.
  static Vocabulary build(std::span<const std::string> texts, std::span<const std::string> extra_words = {});

  /// Token-per-line file; id = line number.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  int add(std::string_view word);
  std::optional<int> find(std::string_view word) const;
  /// UNK for unseen words.
  int id(std::string_view word) const;
  const std::string& word(int id) const;
  int size() const noexcept { return static_cast<int>(words_.size()); }
  static bool is_reserved(int id) noexcept { return id >= 0 && id < kFirstWord; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
};

/// Lower-cased word split: whitespace separates words and every ASCII
/// punctuation character is a word of its own.
std::vector<std::string> split_words(std::string_view text);

/// Word ids for `text`, truncated to `max_length` tokens. Never throws.
std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab,
                          std::size_t max_length = std::numeric_limits<std::size_t>::max());

}  // namespace hpt
