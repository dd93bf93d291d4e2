#pragma once

// Brute-force reference computations shared by the unit tests and the
// acceptance binary.

#include <cmath>
#include <map>
#include <vector>

#include "rescam/rescam.hpp"

namespace oracle {

using rescam::Phones;
using rescam::WordSeq;

// Every way to cut `s` into words of at most `max_len` units.
inline std::vector<WordSeq> segmentations(const Phones& s, std::size_t max_len) {
  std::vector<WordSeq> out;
  const std::size_t n = s.size();
  for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
    WordSeq w;
    std::size_t start = 0;
    bool ok = true;
    for (std::size_t i = 1; i <= n; ++i) {
      if (i == n || (mask >> (i - 1)) & 1u) {
        if (i - start > max_len) ok = false;
        w.push_back(s.substr(start, i - start));
        start = i;
      }
    }
    if (ok) out.push_back(std::move(w));
  }
  return out;
}

// Total-variation distance between an empirical histogram and a target.
template <typename Key>
double tv_distance(const std::map<Key, double>& target, const std::map<Key, int>& hits, int draws) {
  double tv = 0.0;
  for (const auto& [k, p] : target) {
    auto it = hits.find(k);
    tv += std::abs(p - (it == hits.end() ? 0.0 : static_cast<double>(it->second) / draws));
  }
  for (const auto& [k, c] : hits)
    if (!target.count(k)) tv += static_cast<double>(c) / draws;
  return 0.5 * tv;
}

// Worst-case TV between FFBS draws and the enumerated segmentation posterior,
// for every test string, under a restaurant that is held fixed.
inline double ffbs_worst_tv(const std::vector<Phones>& strings, const rescam::PyLexicon& lex, std::size_t max_len,
                            int draws, rescam::Rng& rng, double inv_temp = 1.0) {
  double worst = 0.0;
  for (const auto& s : strings) {
    std::map<WordSeq, double> target;
    double z = 0.0;
    for (const auto& seg : segmentations(s, max_len)) {
      double lp = 0.0;
      for (const auto& w : seg) lp += lex.logprob(w);
      target[seg] = std::exp(inv_temp * lp);
      z += target[seg];
    }
    for (auto& [k, p] : target) p /= z;
    std::map<WordSeq, int> hits;
    for (int d = 0; d < draws; ++d) ++hits[rescam::ffbs_segment(s, lex, max_len, rng, inv_temp)];
    worst = std::max(worst, tv_distance(target, hits, draws));
  }
  return worst;
}

// Test strings for the FFBS check: lengths 1..6 over a small alphabet, with
// repeats so that seated words straddle several cut points.
inline std::vector<Phones> ffbs_strings() {
  return {Phones{0},          Phones{0, 1},       Phones{1, 1},          Phones{0, 1, 2},
          Phones{2, 2, 2},    Phones{0, 1, 0, 1}, Phones{3, 0, 1, 2},    Phones{0, 1, 2, 0, 1},
          Phones{4, 4, 0, 1, 4}, Phones{0, 1, 2, 0, 1, 2}, Phones{5, 6, 0, 1, 5, 6}, Phones{1, 2, 3, 4, 5, 6}};
}

// Every string of length 1..max_len over the first `units` symbols.
inline std::vector<Phones> all_strings(std::size_t units, std::size_t max_len) {
  std::vector<Phones> out;
  std::vector<Phones> frontier{Phones{}};
  for (std::size_t L = 1; L <= max_len; ++L) {
    std::vector<Phones> next;
    for (const auto& s : frontier)
      for (std::size_t u = 0; u < units; ++u) next.push_back(s + static_cast<char>(u));
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

// Frozen lexicon with a few seated words, some of them prefixes of others.
inline rescam::PyLexicon ffbs_lexicon(std::size_t alphabet, rescam::Rng& rng) {
  rescam::PyLexicon lex(rescam::BaseMeasure{alphabet, 0.6}, 0.5, 1.0);
  const std::vector<std::pair<Phones, int>> seats{
      {Phones{0, 1}, 5}, {Phones{0, 1, 2}, 3}, {Phones{2}, 2}, {Phones{5, 6}, 4}, {Phones{4}, 1}, {Phones{1, 2, 3}, 2}};
  for (const auto& [w, k] : seats)
    for (int i = 0; i < k; ++i) lex.add(w, rng);
  return lex;
}

// Adjusted Rand index from raw pair counts: both-same a, split-in-gold b,
// split-in-prediction c, both-different d.
inline double ari_pairs(const std::vector<int>& p, const std::vector<int>& g) {
  double a = 0, b = 0, c = 0, d = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      const bool sp = p[i] == p[j], sg = g[i] == g[j];
      if (sp && sg) ++a;
      else if (sp) ++b;
      else if (sg) ++c;
      else ++d;
    }
  const double den = (a + b) * (b + d) + (a + c) * (c + d);
  return den == 0.0 ? 1.0 : 2.0 * (a * d - b * c) / den;
}

}  // namespace oracle
