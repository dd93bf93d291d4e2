#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "rescam/inventory.hpp"
#include "rescam/kernels.hpp"

namespace rescam {

using WordSeq = std::vector<Phones>;

// Geometric-length, uniform-phoneme spelling model.
struct BaseMeasure {
  std::size_t alphabet = 23;
  double p_cont = 0.6;

  double logprob(const Phones& word) const {
    if (word.empty()) throw std::invalid_argument("base_logprob of an empty word");
    const double n = static_cast<double>(word.size());
    return -n * std::log(static_cast<double>(alphabet)) + (n - 1.0) * std::log(p_cont) + std::log1p(-p_cont);
  }
};

// Pitman-Yor unigram restaurant with explicit seating (table sizes per word).
class PyLexicon {
 public:
  PyLexicon(BaseMeasure base, double discount, double strength)
      : base_(base), discount_(discount), strength_(strength) {
    if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("PY discount must lie in [0, 1)");
    if (!(strength > -discount)) throw std::invalid_argument("PY strength must exceed -discount");
  }

  double logprob(const Phones& w) const {
    const double denom = strength_ + customers_;
    const double new_table = (strength_ + discount_ * tables_) * std::exp(base_.logprob(w));
    double p = new_table;
    if (auto it = words_.find(w); it != words_.end())
      p += it->second.customers - discount_ * static_cast<double>(it->second.tables.size());
    return std::log(p / denom);
  }

  void add(const Phones& w, Rng& rng) {
    auto& e = words_[w];
    const double p_new = (strength_ + discount_ * tables_) * std::exp(base_.logprob(w));
    const double total = p_new + e.customers - discount_ * static_cast<double>(e.tables.size());
    double u = uniform01(rng) * total;
    std::size_t k = 0;
    for (; k < e.tables.size(); ++k) {
      u -= e.tables[k] - discount_;
      if (u <= 0.0) break;
    }
    if (k < e.tables.size()) {
      ++e.tables[k];
    } else {
      e.tables.push_back(1);
      ++tables_;
    }
    ++e.customers;
    ++customers_;
  }

  void remove(const Phones& w, Rng& rng) {
    auto it = words_.find(w);
    if (it == words_.end() || it->second.customers == 0) throw std::logic_error("removing an unseated word");
    auto& e = it->second;
    int u = std::uniform_int_distribution<int>(0, e.customers - 1)(rng);
    std::size_t k = 0;
    for (; k < e.tables.size(); ++k) {
      u -= e.tables[k];
      if (u < 0) break;
    }
    if (--e.tables[k] == 0) {
      e.tables.erase(e.tables.begin() + static_cast<std::ptrdiff_t>(k));
      --tables_;
    }
    --e.customers;
    --customers_;
    if (e.customers == 0) words_.erase(it);
  }

  int customers() const noexcept { return customers_; }
  int tables() const noexcept { return tables_; }
  int count(const Phones& w) const {
    auto it = words_.find(w);
    return it == words_.end() ? 0 : it->second.customers;
  }
  std::size_t types() const noexcept { return words_.size(); }
  const BaseMeasure& base() const noexcept { return base_; }

  template <typename F>
  void for_each_word(F&& f) const {
    for (const auto& [w, e] : words_) f(w, e.customers, static_cast<int>(e.tables.size()));
  }

  // log P(customers, seating) under the PY process.
  double log_joint() const {
    double lp = 0.0;
    int t = 0;
    for (const auto& [w, e] : words_) {
      for (int size : e.tables) {
        if (t > 0) lp += std::log(strength_ + discount_ * t);
        ++t;
        lp += base_.logprob(w);
        for (int j = 1; j < size; ++j) lp += std::log(j - discount_);
      }
    }
    for (int i = 1; i < customers_; ++i) lp -= std::log(strength_ + i);
    return lp;
  }

 private:
  struct Entry {
    int customers = 0;
    std::vector<int> tables;
  };
  BaseMeasure base_;
  double discount_;
  double strength_;
  std::unordered_map<Phones, Entry> words_;
  int customers_ = 0;
  int tables_ = 0;
};

// Forward filtering over segment end positions, backward sampling of one
// segmentation. The restaurant is held fixed for the whole utterance.
// inv_temp < 1 flattens the word probabilities (annealing).
inline WordSeq ffbs_segment(const Phones& s, const PyLexicon& model, std::size_t max_word_len, Rng& rng,
                            double inv_temp = 1.0) {
  if (s.empty()) throw std::invalid_argument("cannot segment an empty string");
  if (max_word_len == 0) throw std::invalid_argument("max_word_len must be positive");
  const std::size_t n = s.size();
  const std::size_t L = max_word_len;
  // seg[i * L + (k - 1)] = log P(word s[i-k, i))
  std::vector<double> seg(n * L + L, kNegInf);
  std::vector<double> alpha(n + 1, kNegInf);
  alpha[0] = 0.0;
  std::vector<double> scratch;
  for (std::size_t i = 1; i <= n; ++i) {
    scratch.clear();
    for (std::size_t k = 1; k <= std::min(L, i); ++k) {
      const double lp = inv_temp * model.logprob(s.substr(i - k, k));
      seg[i * L + (k - 1)] = lp;
      scratch.push_back(alpha[i - k] + lp);
    }
    alpha[i] = log_sum_exp(scratch);
  }
  WordSeq words;
  std::size_t i = n;
  while (i > 0) {
    scratch.clear();
    for (std::size_t k = 1; k <= std::min(L, i); ++k) scratch.push_back(alpha[i - k] + seg[i * L + (k - 1)]);
    const std::size_t k = sample_log_categorical(scratch, rng) + 1;
    words.push_back(s.substr(i - k, k));
    i -= k;
  }
  std::reverse(words.begin(), words.end());
  return words;
}

struct CorpusList {
  std::vector<WordSeq> utterances;
  double score = 0.0;  // log P(words, seating) of the chain state that produced it
};

inline bool concatenates_to(const WordSeq& words, const Phones& s) {
  Phones joined;
  for (const auto& w : words) joined += w;
  return joined == s;
}

struct SegmenterOptions {
  double discount = 0.5;
  double strength = 10.0;
  double p_cont = 0.6;
  std::size_t max_word_len = 14;  // phonemes; admits "kokononamaewa" (13)
  int interval = 2;               // sweeps between emitted lists
  double anneal_from = 5.0;       // initial temperature, lowered linearly to 1 over the burn-in sweeps
  int type_moves = 20;            // merge/split proposals after every sweep

  void validate() const {
    if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("segmenter discount must lie in [0, 1)");
    if (!(strength > -discount)) throw std::invalid_argument("segmenter strength must exceed -discount");
    if (!(p_cont > 0.0 && p_cont < 1.0)) throw std::invalid_argument("p_cont must lie in (0, 1)");
    if (max_word_len == 0) throw std::invalid_argument("max_word_len must be positive");
    if (interval < 1) throw std::invalid_argument("list interval must be positive");
    if (!(anneal_from >= 1.0)) throw std::invalid_argument("anneal_from must be at least 1");
    if (type_moves < 0) throw std::invalid_argument("type_moves must be non-negative");
  }
};

// Blocked Gibbs over utterance segmentations under the PY unigram lexicon.
class Segmenter {
 public:
  Segmenter(std::size_t alphabet, SegmenterOptions opt) : opt_(opt), base_{alphabet, opt.p_cont} { opt_.validate(); }

  PyLexicon make_lexicon() const { return PyLexicon(base_, opt_.discount, opt_.strength); }
  const SegmenterOptions& options() const noexcept { return opt_; }
  const BaseMeasure& base() const noexcept { return base_; }

  // `hypotheses`, when given, holds decoded n-best word sequences per
  // utterance: the first one initializes the chain and all of them are
  // seated as fixed evidence customers that are never removed.
  std::vector<CorpusList> sample_corpus_lists(const std::vector<Phones>& corpus, int n_lists, int sweeps, Rng& rng,
                                              const std::vector<std::vector<WordSeq>>* hypotheses = nullptr) const {
    if (n_lists < 1) throw std::invalid_argument("n_lists must be at least 1");
    if (sweeps < 0) throw std::invalid_argument("sweeps must be non-negative");
    if (hypotheses != nullptr && hypotheses->size() != corpus.size())
      throw std::invalid_argument("hypotheses do not match the corpus");
    std::vector<CorpusList> lists;
    if (sweeps == 0) {
      for (int k = 0; k < n_lists; ++k) {
        PyLexicon lex = make_lexicon();
        std::vector<WordSeq> state = initialize(corpus, lex, rng, hypotheses);
        lists.push_back({state, lex.log_joint()});
      }
      return lists;
    }
    PyLexicon lex = make_lexicon();
    std::vector<WordSeq> state = initialize(corpus, lex, rng, hypotheses);
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    auto sweep = [&](double inv_temp) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t n : order) resample(corpus[n], state[n], lex, rng, inv_temp);
      for (int m = 0; m < opt_.type_moves; ++m) type_move(state, lex, rng, inv_temp);
    };
    for (int s = 0; s < sweeps; ++s) {
      const double T = opt_.anneal_from - (opt_.anneal_from - 1.0) * (s + 1) / sweeps;
      sweep(1.0 / T);
    }
    lists.push_back({state, lex.log_joint()});
    for (int k = 1; k < n_lists; ++k) {
      for (int s = 0; s < opt_.interval; ++s) sweep(1.0);
      lists.push_back({state, lex.log_joint()});
    }
    return lists;
  }

  void resample(const Phones& s, WordSeq& current, PyLexicon& lex, Rng& rng, double inv_temp = 1.0) const {
    for (const auto& w : current) lex.remove(w, rng);
    current = ffbs_segment(s, lex, opt_.max_word_len, rng, inv_temp);
    for (const auto& w : current) lex.add(w, rng);
  }

  // Metropolis-Hastings move on word types. With probability 1/2 it picks a
  // random word boundary (a|b) and merges every adjacent a b pair into ab;
  // otherwise it splits every token of a random multi-unit type at one point.
  // Moves that the opposite move could not undo exactly are refused. The
  // affected tokens are re-seated at random and the proposal is scored on the
  // restaurant joint, so seating is treated approximately. Returns true when
  // the move is accepted.
  bool type_move(std::vector<WordSeq>& state, PyLexicon& lex, Rng& rng, double inv_temp = 1.0) const {
    std::size_t boundaries = 0;
    for (const auto& u : state) boundaries += u.size() > 1 ? u.size() - 1 : 0;
    std::vector<Phones> types;
    lex.for_each_word([&](const Phones& w, int, int) {
      if (w.size() > 1) types.push_back(w);
    });
    std::sort(types.begin(), types.end());

    auto pair_sites = [&](const Phones& a, const Phones& b) {
      std::size_t m = 0;
      for (const auto& u : state)
        for (std::size_t i = 0; i + 1 < u.size(); ++i) m += u[i] == a && u[i + 1] == b;
      return m;
    };

    const bool merge = uniform01(rng) < 0.5;
    Phones a, b, ab;
    double log_q_fwd = std::log(0.5);
    if (merge) {
      if (boundaries == 0) return false;
      std::size_t pick = std::uniform_int_distribution<std::size_t>(0, boundaries - 1)(rng);
      for (const auto& u : state) {
        const std::size_t here = u.size() > 1 ? u.size() - 1 : 0;
        if (pick < here) {
          a = u[pick];
          b = u[pick + 1];
          break;
        }
        pick -= here;
      }
      ab = a + b;
      if (a == b || ab.size() > opt_.max_word_len || lex.count(ab) > 0) return false;
      log_q_fwd += std::log(static_cast<double>(pair_sites(a, b)) / static_cast<double>(boundaries));
    } else {
      if (types.empty()) return false;
      ab = types[std::uniform_int_distribution<std::size_t>(0, types.size() - 1)(rng)];
      const std::size_t k = std::uniform_int_distribution<std::size_t>(1, ab.size() - 1)(rng);
      a = ab.substr(0, k);
      b = ab.substr(k);
      if (a == b || pair_sites(a, b) > 0) return false;
      log_q_fwd += -std::log(static_cast<double>(types.size())) - std::log(static_cast<double>(ab.size() - 1));
    }

    std::vector<WordSeq> proposed = state;
    PyLexicon next = lex;
    std::size_t sites = 0;
    for (auto& u : proposed) {
      WordSeq out;
      for (std::size_t i = 0; i < u.size(); ++i) {
        if (merge && i + 1 < u.size() && u[i] == a && u[i + 1] == b) {
          next.remove(a, rng);
          next.remove(b, rng);
          next.add(ab, rng);
          out.push_back(ab);
          ++sites;
          ++i;
        } else if (!merge && u[i] == ab) {
          next.remove(ab, rng);
          next.add(a, rng);
          next.add(b, rng);
          out.push_back(a);
          out.push_back(b);
          ++sites;
        } else {
          out.push_back(u[i]);
        }
      }
      u = std::move(out);
    }

    // probability of the reverse proposal from the new state
    double log_q_rev = std::log(0.5);
    if (merge) {
      std::size_t multi = 0;
      next.for_each_word([&](const Phones& w, int, int) { multi += w.size() > 1; });
      log_q_rev += -std::log(static_cast<double>(multi)) - std::log(static_cast<double>(ab.size() - 1));
    } else {
      log_q_rev += std::log(static_cast<double>(sites) / static_cast<double>(boundaries + sites));
    }

    const double log_accept = inv_temp * (next.log_joint() - lex.log_joint()) + log_q_rev - log_q_fwd;
    if (log_accept < 0.0 && std::log(uniform01(rng)) >= log_accept) return false;
    state = std::move(proposed);
    lex = std::move(next);
    return true;
  }

 private:
  std::vector<WordSeq> initialize(const std::vector<Phones>& corpus, PyLexicon& lex, Rng& rng,
                                  const std::vector<std::vector<WordSeq>>* hypotheses) const {
    std::vector<WordSeq> state(corpus.size());
    if (hypotheses != nullptr) {
      for (const auto& hyps : *hypotheses)
        for (const auto& h : hyps)
          for (const auto& w : h) lex.add(w, rng);
      for (std::size_t n = 0; n < corpus.size(); ++n) {
        const auto& hyps = (*hypotheses)[n];
        if (!hyps.empty() && concatenates_to(hyps.front(), corpus[n])) {
          state[n] = hyps.front();
          for (const auto& w : state[n]) lex.add(w, rng);
        } else {
          state[n] = ffbs_segment(corpus[n], lex, opt_.max_word_len, rng);
          for (const auto& w : state[n]) lex.add(w, rng);
        }
      }
      return state;
    }
    for (std::size_t n = 0; n < corpus.size(); ++n) {
      state[n] = ffbs_segment(corpus[n], lex, opt_.max_word_len, rng);
      for (const auto& w : state[n]) lex.add(w, rng);
    }
    return state;
  }

  SegmenterOptions opt_;
  BaseMeasure base_;
};

}  // namespace rescam
