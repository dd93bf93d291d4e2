#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rescam/segmenter.hpp"

namespace rescam {

enum class LmKind {
  ClassTrigram,  // location (and object) words share one class each
  WordTrigram,   // every word is its own class
};

// Class 3-gram language model with add-delta smoothing over the class
// alphabet. Unseen words are emitted by a fallback class through the
// segmenter's base measure.
class ClassTrigramLM {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kFallback = 2;
  static constexpr int kLocation = 3;
  static constexpr int kObject = 4;
  static constexpr int kFirstSingleton = 5;

  struct Emission {
    int cls = kFallback;
    double logprob = 0.0;
  };

  ClassTrigramLM() = default;

  // `location_word[n]` / `object_word[n]` give the position of the location
  // (object) word in utterance n, or -1.
  static ClassTrigramLM build(const std::vector<WordSeq>& corpus, const std::vector<int>& location_word,
                              const std::vector<int>* object_word, double delta, LmKind kind, BaseMeasure base) {
    if (!(delta > 0.0)) throw std::invalid_argument("LM smoothing delta must be positive");
    if (location_word.size() != corpus.size()) throw std::invalid_argument("location index count mismatch");
    if (object_word != nullptr && object_word->size() != corpus.size())
      throw std::invalid_argument("object index count mismatch");
    ClassTrigramLM lm;
    lm.delta_ = delta;
    lm.base_ = base;
    lm.kind_ = kind;

    // Votes decide whether a word goes to the shared location/object class.
    std::unordered_map<Phones, std::pair<int, int>> votes;
    std::unordered_map<Phones, int> counts;
    for (std::size_t n = 0; n < corpus.size(); ++n) {
      const auto& u = corpus[n];
      const int z = location_word[n];
      const int zo = object_word != nullptr ? (*object_word)[n] : -1;
      if (z >= static_cast<int>(u.size()) || z < -1) throw std::out_of_range("location word index out of range");
      if (zo >= static_cast<int>(u.size()) || zo < -1) throw std::out_of_range("object word index out of range");
      for (std::size_t i = 0; i < u.size(); ++i) {
        ++counts[u[i]];
        if (static_cast<int>(i) == z) ++votes[u[i]].first;
        if (static_cast<int>(i) == zo) ++votes[u[i]].second;
      }
    }
    std::vector<Phones> vocab;
    for (const auto& [w, c] : counts) vocab.push_back(w);
    std::sort(vocab.begin(), vocab.end());
    int next = kFirstSingleton;
    std::map<int, int> class_total;
    for (const auto& w : vocab) {
      int cls = next;
      if (kind == LmKind::ClassTrigram) {
        auto it = votes.find(w);
        if (it != votes.end() && (it->second.first > 0 || it->second.second > 0))
          cls = it->second.first >= it->second.second ? kLocation : kObject;
      }
      if (cls == next) ++next;
      lm.word_class_[w] = cls;
      class_total[cls] += counts[w];
      lm.max_word_len_ = std::max(lm.max_word_len_, w.size());
    }
    for (const auto& w : vocab) {
      const int cls = lm.word_class_[w];
      lm.emission_[w] = {cls, std::log(static_cast<double>(counts[w]) / class_total[cls])};
      lm.counts_[w] = counts[w];
    }
    lm.alphabet_ = {kEos, kFallback};
    for (const auto& [cls, total] : class_total) lm.alphabet_.push_back(cls);

    for (const auto& u : corpus) {
      int c2 = kBos, c1 = kBos;
      for (const auto& w : u) {
        const int c = lm.word_class_[w];
        lm.add_trigram(c2, c1, c);
        c2 = c1;
        c1 = c;
      }
      lm.add_trigram(c2, c1, kEos);
    }
    return lm;
  }

  double class_logprob(int c2, int c1, int c) const {
    const double A = static_cast<double>(alphabet_.size());
    double num = 0.0, den = 0.0;
    if (auto it = trigrams_.find(key(c2, c1)); it != trigrams_.end()) {
      den = it->second.total;
      if (auto jt = it->second.next.find(c); jt != it->second.next.end()) num = jt->second;
    }
    return std::log((num + delta_) / (den + delta_ * A));
  }

  Emission emission(const Phones& w) const {
    if (auto it = emission_.find(w); it != emission_.end()) return it->second;
    return {kFallback, base_.logprob(w)};
  }

  double score(const WordSeq& words) const {
    double lp = 0.0;
    int c2 = kBos, c1 = kBos;
    for (const auto& w : words) {
      const auto e = emission(w);
      lp += class_logprob(c2, c1, e.cls) + e.logprob;
      c2 = c1;
      c1 = e.cls;
    }
    return lp + class_logprob(c2, c1, kEos);
  }

  // n-best segmentations of `s` into lexicon words plus single-phoneme
  // fallback words, ranked by score(). beam == 0 keeps every DP state.
  std::vector<WordSeq> decode(const Phones& s, std::size_t n_best, std::size_t beam = 0) const;

  const std::vector<int>& alphabet() const noexcept { return alphabet_; }
  double delta() const noexcept { return delta_; }
  LmKind kind() const noexcept { return kind_; }
  const BaseMeasure& base() const noexcept { return base_; }
  std::size_t vocabulary_size() const noexcept { return word_class_.size(); }
  int class_of(const Phones& w) const {
    auto it = word_class_.find(w);
    return it == word_class_.end() ? kFallback : it->second;
  }
  const std::unordered_map<Phones, int>& word_classes() const noexcept { return word_class_; }

  // Contexts observed in training, for normalization checks and export.
  std::vector<std::pair<int, int>> contexts() const {
    std::vector<std::pair<int, int>> out;
    for (const auto& [k, v] : trigrams_) out.emplace_back(static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu));
    std::sort(out.begin(), out.end());
    return out;
  }

  struct Trigram {
    int c2, c1, c;
    double count;
  };
  std::vector<Trigram> trigrams() const {
    std::vector<Trigram> out;
    for (const auto& [k, ctx] : trigrams_)
      for (const auto& [c, n] : ctx.next)
        out.push_back({static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu), c, n});
    std::sort(out.begin(), out.end(), [](const Trigram& a, const Trigram& b) {
      return std::tie(a.c2, a.c1, a.c) < std::tie(b.c2, b.c1, b.c);
    });
    return out;
  }

  // Rebuilds a model from exported parts.
  static ClassTrigramLM from_parts(double delta, LmKind kind, BaseMeasure base,
                                   const std::vector<std::pair<Phones, std::pair<int, double>>>& words,
                                   const std::vector<Trigram>& trigrams) {
    ClassTrigramLM lm;
    lm.delta_ = delta;
    lm.kind_ = kind;
    lm.base_ = base;
    std::map<int, double> class_total;
    for (const auto& [w, cc] : words) {
      lm.word_class_[w] = cc.first;
      class_total[cc.first] += cc.second;
      lm.max_word_len_ = std::max(lm.max_word_len_, w.size());
    }
    for (const auto& [w, cc] : words) {
      lm.emission_[w] = {cc.first, std::log(cc.second / class_total[cc.first])};
      lm.counts_[w] = cc.second;
    }
    lm.alphabet_ = {kEos, kFallback};
    for (const auto& [cls, t] : class_total) lm.alphabet_.push_back(cls);
    for (const auto& t : trigrams) {
      auto& ctx = lm.trigrams_[key(t.c2, t.c1)];
      ctx.next[t.c] += t.count;
      ctx.total += t.count;
    }
    return lm;
  }

  // (word, (class, token count)), sorted by word.
  std::vector<std::pair<Phones, std::pair<int, double>>> word_table() const {
    std::vector<std::pair<Phones, std::pair<int, double>>> out;
    for (const auto& [w, e] : emission_) out.push_back({w, {e.cls, counts_.at(w)}});
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Context {
    std::map<int, double> next;
    double total = 0.0;
  };

  static std::uint64_t key(int c2, int c1) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c2)) << 32) | static_cast<std::uint32_t>(c1);
  }

  void add_trigram(int c2, int c1, int c) {
    auto& ctx = trigrams_[key(c2, c1)];
    ctx.next[c] += 1.0;
    ctx.total += 1.0;
  }

  double delta_ = 0.01;
  LmKind kind_ = LmKind::ClassTrigram;
  BaseMeasure base_;
  std::unordered_map<Phones, int> word_class_;
  std::unordered_map<Phones, Emission> emission_;
  std::unordered_map<Phones, double> counts_;
  std::unordered_map<std::uint64_t, Context> trigrams_;
  std::vector<int> alphabet_{kEos, kFallback};
  std::size_t max_word_len_ = 0;
};

inline std::vector<WordSeq> ClassTrigramLM::decode(const Phones& s, std::size_t n_best, std::size_t beam) const {
  if (n_best == 0) throw std::invalid_argument("n_best must be at least 1");
  if (s.empty()) return {WordSeq{}};
  const std::size_t n = s.size();

  struct Entry {
    double score;
    std::size_t prev_pos;
    std::uint64_t prev_key;
    std::size_t prev_rank;
    std::size_t word_len;
  };
  using StateMap = std::unordered_map<std::uint64_t, std::vector<Entry>>;
  std::vector<StateMap> chart(n + 1);
  chart[0][key(kBos, kBos)].push_back({0.0, 0, 0, 0, 0});

  auto insert = [&](std::vector<Entry>& list, const Entry& e) {
    if (list.size() == n_best && list.back().score >= e.score) return;
    auto it = std::upper_bound(list.begin(), list.end(), e,
                               [](const Entry& a, const Entry& b) { return a.score > b.score; });
    list.insert(it, e);
    if (list.size() > n_best) list.pop_back();
  };

  // Candidate words starting at each position.
  std::vector<std::vector<std::pair<std::size_t, Emission>>> cand(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t len = 1; len <= std::min(max_word_len_, n - i); ++len) {
      if (auto it = emission_.find(s.substr(i, len)); it != emission_.end()) cand[i].push_back({len, it->second});
    }
    const Phones single = s.substr(i, 1);
    if (emission_.find(single) == emission_.end()) cand[i].push_back({1, {kFallback, base_.logprob(single)}});
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto& states = chart[i];
    if (states.empty()) continue;
    if (beam > 0 && states.size() > beam) {
      std::vector<std::pair<double, std::uint64_t>> best;
      for (const auto& [k, list] : states) best.push_back({list.front().score, k});
      std::nth_element(best.begin(), best.begin() + static_cast<std::ptrdiff_t>(beam), best.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      StateMap kept;
      for (std::size_t b = 0; b < beam; ++b) kept.emplace(best[b].second, std::move(states[best[b].second]));
      states = std::move(kept);
    }
    for (const auto& [k, list] : states) {
      const int c2 = static_cast<int>(k >> 32), c1 = static_cast<int>(k & 0xffffffffu);
      for (const auto& [len, em] : cand[i]) {
        const double step = class_logprob(c2, c1, em.cls) + em.logprob;
        auto& target = chart[i + len][key(c1, em.cls)];
        for (std::size_t r = 0; r < list.size(); ++r) insert(target, {list[r].score + step, i, k, r, len});
      }
    }
  }

  struct Final {
    double score;
    std::uint64_t key;
    std::size_t rank;
  };
  std::vector<Final> finals;
  for (const auto& [k, list] : chart[n]) {
    const double eos = class_logprob(static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu), kEos);
    for (std::size_t r = 0; r < list.size(); ++r) finals.push_back({list[r].score + eos, k, r});
  }
  std::sort(finals.begin(), finals.end(), [](const Final& a, const Final& b) {
    return a.score != b.score ? a.score > b.score : std::tie(a.key, a.rank) < std::tie(b.key, b.rank);
  });
  std::vector<WordSeq> out;
  for (std::size_t f = 0; f < std::min(n_best, finals.size()); ++f) {
    WordSeq words;
    std::size_t pos = n;
    std::uint64_t k = finals[f].key;
    std::size_t r = finals[f].rank;
    while (pos > 0) {
      const Entry& e = chart[pos].at(k)[r];
      words.push_back(s.substr(e.prev_pos, e.word_len));
      pos = e.prev_pos;
      k = e.prev_key;
      r = e.prev_rank;
    }
    std::reverse(words.begin(), words.end());
    out.push_back(std::move(words));
  }
  return out;
}

}  // namespace rescam
