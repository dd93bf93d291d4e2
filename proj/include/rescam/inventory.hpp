#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rescam {

// A phoneme string is stored packed: one byte per symbol id. Words, utterances
// and lexicon keys all share this representation so they hash and compare
// without conversion.
using Phones = std::string;

class SpellingError : public std::invalid_argument {
 public:
  SpellingError(const std::string& text, std::size_t position)
      : std::invalid_argument("cannot spell '" + text + "' at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// Closed phoneme alphabet shared by the simulator, segmenter, language model
// and metrics. Units are romanized phonemes ('N' is the moraic nasal), so
// "seNpuuki" is eight units long.
class PhonemeInventory {
 public:
  PhonemeInventory() : PhonemeInventory(default_symbols()) {}

  explicit PhonemeInventory(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
    if (symbols_.empty()) throw std::invalid_argument("empty phoneme inventory");
    if (symbols_.size() > 255) throw std::invalid_argument("phoneme inventory too large");
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      if (symbols_[i].empty()) throw std::invalid_argument("empty phoneme symbol");
      if (!index_.emplace(symbols_[i], static_cast<std::uint8_t>(i)).second)
        throw std::invalid_argument("duplicate phoneme symbol '" + symbols_[i] + "'");
      max_symbol_len_ = std::max(max_symbol_len_, symbols_[i].size());
    }
  }

  // One symbol per line; blank lines and '#' comments are skipped.
  static PhonemeInventory load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open phoneme inventory " + path);
    std::vector<std::string> symbols;
    std::string line;
    while (std::getline(in, line)) {
      auto end = line.find_last_not_of(" \t\r");
      if (end == std::string::npos) continue;
      line.erase(end + 1);
      auto begin = line.find_first_not_of(" \t");
      line.erase(0, begin);
      if (line.empty() || line[0] == '#') continue;
      symbols.push_back(line);
    }
    return PhonemeInventory(std::move(symbols));
  }

  static std::vector<std::string> default_symbols() {
    return {"a", "i", "u", "e", "o", "N", "k", "g", "s", "z", "t", "d",
            "n", "h", "b", "p", "m", "y", "r", "w", "j", "f", "c"};
  }

  std::size_t size() const noexcept { return symbols_.size(); }
  const std::string& symbol(std::uint8_t id) const { return symbols_.at(id); }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }

  // Greedy longest-match tokenization.
  Phones tokenize(std::string_view text) const {
    Phones out;
    std::size_t pos = 0;
    while (pos < text.size()) {
      bool matched = false;
      for (std::size_t len = std::min(max_symbol_len_, text.size() - pos); len > 0; --len) {
        auto it = index_.find(std::string(text.substr(pos, len)));
        if (it != index_.end()) {
          out.push_back(static_cast<char>(it->second));
          pos += len;
          matched = true;
          break;
        }
      }
      if (!matched) throw SpellingError(std::string(text), pos);
    }
    return out;
  }

  std::string detokenize(const Phones& phones) const {
    std::string out;
    for (char c : phones) out += symbols_.at(static_cast<std::uint8_t>(c));
    return out;
  }

  bool contains(const Phones& phones) const {
    return std::all_of(phones.begin(), phones.end(),
                       [&](char c) { return static_cast<std::uint8_t>(c) < symbols_.size(); });
  }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, std::uint8_t> index_;
  std::size_t max_symbol_len_ = 0;
};

}  // namespace rescam
