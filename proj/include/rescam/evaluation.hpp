#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "rescam/concept.hpp"
#include "rescam/inventory.hpp"

namespace rescam {

// Hubert-Arabie adjusted Rand index from the contingency table.
inline double ari(const std::vector<int>& predicted, const std::vector<int>& gold) {
  if (predicted.size() != gold.size()) throw std::invalid_argument("partitions differ in length");
  if (predicted.empty()) throw std::invalid_argument("empty partition");
  auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  std::map<std::pair<int, int>, int> table;
  std::map<int, int> rows, cols;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++table[{predicted[i], gold[i]}];
    ++rows[predicted[i]];
    ++cols[gold[i]];
  }
  double index = 0.0, a = 0.0, b = 0.0;
  for (const auto& [k, v] : table) index += c2(v);
  for (const auto& [k, v] : rows) a += c2(v);
  for (const auto& [k, v] : cols) b += c2(v);
  const double total = c2(static_cast<double>(gold.size()));
  const double expected = total > 0.0 ? a * b / total : 0.0;
  const double max_index = 0.5 * (a + b);
  if (max_index == expected) return 1.0;  // both partitions trivial in the same way
  return (index - expected) / (max_index - expected);
}

inline std::size_t levenshtein(const Phones& a, const Phones& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Phoneme accuracy rate; negative when the estimate is far longer than the reference.
inline double par(const Phones& estimated, const Phones& correct) {
  if (correct.empty()) throw std::invalid_argument("reference word is empty");
  return 1.0 - static_cast<double>(levenshtein(estimated, correct)) / static_cast<double>(correct.size());
}

inline double par(std::string_view estimated, std::string_view correct, const PhonemeInventory& inv) {
  return par(inv.tokenize(estimated), inv.tokenize(correct));
}

// Unnormalized word scores for a relative location.
inline std::vector<double> location_word_scores(const RelativeCoord& rel, const ConceptState& st, double alphaR) {
  if (st.concepts.empty()) throw std::invalid_argument("state has no concepts");
  const std::size_t V = st.concepts.front().log_phi.size();
  double N = 0.0;
  for (const auto& c : st.concepts) N += c.scenes;
  std::vector<double> score(V, 0.0);
  const double dist = distance_logpdf(rel.l, st.dist);
  for (const auto& c : st.concepts) {
    if (c.scenes <= 0) continue;
    const double lw = std::log(c.scenes / (N + alphaR)) + vm_logpdf(rel.theta, c.direction) + dist;
    for (std::size_t w = 0; w < V; ++w) score[w] += std::exp(c.log_phi[w] + lw);
  }
  return score;
}

// Ties resolve to the lowest vocabulary index.
inline int argmax_index(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("empty score vector");
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline int predict_location_word(const RelativeCoord& rel, const ConceptState& st, double alphaR) {
  return argmax_index(location_word_scores(rel, st, alphaR));
}

inline std::vector<double> object_word_scores(const std::vector<double>& recognition, const ConceptState& st) {
  if (!st.with_objects) throw std::invalid_argument("state has no object model");
  const std::size_t K = st.log_vO.size();
  if (recognition.size() != st.log_omega.front().size()) throw std::invalid_argument("recognition vector size");
  const std::size_t V = st.log_phiO.front().size();
  std::vector<double> score(V, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    // Mult(O | omega_k) for a single observation
    double like = 0.0;
    for (std::size_t c = 0; c < recognition.size(); ++c)
      if (recognition[c] > 0.0) like += recognition[c] * std::exp(st.log_omega[k][c]);
    if (like <= 0.0) continue;
    const double wk = std::exp(st.log_vO[k]) * like;
    for (std::size_t w = 0; w < V; ++w) score[w] += std::exp(st.log_phiO[k][w]) * wk;
  }
  return score;
}

inline int predict_object_word(const std::vector<double>& recognition, const ConceptState& st) {
  return argmax_index(object_word_scores(recognition, st));
}

inline double reference_accuracy(const std::vector<int>& predicted, const std::vector<int>& gold) {
  if (predicted.size() != gold.size()) throw std::invalid_argument("reference vectors differ in length");
  if (gold.empty()) return 1.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hit += predicted[i] == gold[i];
  return static_cast<double>(hit) / static_cast<double>(gold.size());
}

}  // namespace rescam
