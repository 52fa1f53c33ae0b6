#include "trice/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace trice {

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::string Vocabulary::lang_tag(int k) {
  return "<L" + std::to_string(k) + ">";
}

Vocabulary::Vocabulary(int num_sources, std::vector<std::string> corpus_tokens)
    : num_sources_(num_sources) {
  if (num_sources < 1) throw ContractError("vocabulary: num_sources >= 1");
  tokens_ = {"<pad>", "<s>", "</s>", "<unk>", "<mask>"};
  for (int k = 1; k <= num_sources; ++k) tokens_.push_back(lang_tag(k));
  for (auto& t : corpus_tokens) tokens_.push_back(std::move(t));
  build_index();
}

void Vocabulary::build_index() {
  index_.clear();
  index_.reserve(tokens_.size());
  for (int i = 0; i < size(); ++i) index_.emplace_back(tokens_[static_cast<size_t>(i)], i);
  std::sort(index_.begin(), index_.end());
  for (size_t i = 1; i < index_.size(); ++i)
    if (index_[i].first == index_[i - 1].first)
      throw ContractError("vocabulary: duplicate token " + index_[i].first);
}

int Vocabulary::lang_tag_id(int k) const {
  if (k < 1 || k > num_sources_)
    throw IndexError("vocabulary: language tag index out of range");
  return 4 + k;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw IndexError("vocabulary: id out of range");
  return tokens_[static_cast<size_t>(id)];
}

int Vocabulary::id(const std::string& token) const {
  auto it = std::lower_bound(
      index_.begin(), index_.end(), token,
      [](const std::pair<std::string, int>& p, const std::string& t) {
        return p.first < t;
      });
  if (it != index_.end() && it->first == token) return it->second;
  return kUnk;
}

bool Vocabulary::contains(const std::string& token) const {
  return id(token) != kUnk || token == "<unk>";
}

std::vector<int> Vocabulary::encode(const std::string& line) const {
  std::vector<int> out;
  for (const auto& tok : split_tokens(line)) out.push_back(id(tok));
  return out;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write vocabulary file " + path);
  for (const auto& t : tokens_) f << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read vocabulary file " + path);
  std::vector<std::string> toks;
  std::string line;
  while (std::getline(f, line)) toks.push_back(line);
  if (toks.size() < 5) throw IoError("vocabulary file too short: " + path);
  // Count the <Lk> block to recover K.
  int k = 0;
  while (5 + static_cast<size_t>(k) < toks.size() &&
         toks[5 + static_cast<size_t>(k)] == lang_tag(k + 1))
    ++k;
  if (k == 0) throw IoError("vocabulary file lacks language tags: " + path);
  Vocabulary v;
  v.num_sources_ = k;
  v.tokens_ = std::move(toks);
  v.build_index();
  return v;
}

Vocabulary build_vocab(const std::vector<std::string>& corpus_files,
                       int num_sources) {
  std::map<std::string, long> freq;
  bool any = false;
  const int reserved = Vocabulary::reserved_count(num_sources);
  Vocabulary probe(num_sources, {});
  for (const auto& path : corpus_files) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read corpus file " + path);
    std::string line;
    while (std::getline(f, line)) {
      std::string field;
      std::istringstream fields(line);
      while (std::getline(fields, field, '\t')) {
        for (const auto& tok : split_tokens(field)) {
          any = true;
          bool is_reserved = false;
          for (int id = 0; id < reserved; ++id)
            if (probe.token(id) == tok) {
              is_reserved = true;
              break;
            }
          if (!is_reserved) ++freq[tok];
        }
      }
    }
  }
  if (!any) throw ContractError("build_vocab: empty corpus");
  std::vector<std::pair<std::string, long>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  std::vector<std::string> toks;
  toks.reserve(ranked.size());
  for (auto& p : ranked) toks.push_back(std::move(p.first));
  return Vocabulary(num_sources, std::move(toks));
}

}  // namespace trice
