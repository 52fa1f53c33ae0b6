#pragma once

#include <string>
#include <vector>

#include "trice/common.hpp"

namespace trice {

// Bidirectional token<->id map. Ids 0..4 are pad/bos/eos/unk/mask and ids
// 5..4+K are the per-source language tags <L1>..<LK>; corpus-derived tokens
// follow, ordered by (frequency desc, token asc).
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kMask = 4;

  Vocabulary() = default;
  Vocabulary(int num_sources, std::vector<std::string> corpus_tokens);

  static std::string lang_tag(int k);  // 1-based source index
  int lang_tag_id(int k) const;
  int num_sources() const { return num_sources_; }
  static int reserved_count(int num_sources) { return 5 + num_sources; }

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;
  /// Unknown tokens map to unk.
  int id(const std::string& token) const;
  bool contains(const std::string& token) const;

  std::vector<int> encode(const std::string& line) const;
  std::string decode(const std::vector<int>& ids) const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  int num_sources_ = 0;
  std::vector<std::string> tokens_;
  // id lookup by token; built once, vocabulary is immutable afterwards.
  std::vector<std::pair<std::string, int>> index_;
  void build_index();
};

/// Frequency-ranked vocabulary over whitespace-tokenized files.
Vocabulary build_vocab(const std::vector<std::string>& corpus_files,
                       int num_sources);

std::vector<std::string> split_tokens(const std::string& line);

}  // namespace trice
