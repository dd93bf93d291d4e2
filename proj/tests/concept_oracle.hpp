#pragma once

// Frozen two-scene, two-concept model and its exactly enumerated posterior
// over the discrete assignments (concepts, references, word positions and,
// with objects, object-word positions).

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "rescam/rescam.hpp"

namespace oracle {

struct FrozenModel {
  rescam::ConceptData data;
  rescam::Hyperparams h;
  std::vector<rescam::VonMises> directions;
  rescam::DistanceModel dist;
  bool objects = false;
};

// Two scenes, two candidate objects each, two-word utterances drawn from a
// three-word vocabulary; object categories differ between the two objects.
inline FrozenModel frozen_model(bool objects) {
  FrozenModel m;
  m.objects = objects;
  std::vector<std::vector<rescam::RelativeCoord>> rel{{{0.9, 0.3}, {1.6, 2.8}}, {{1.2, 3.4}, {0.7, 5.9}}};
  std::vector<rescam::WordSeq> words{{Phones{0}, Phones{1}}, {Phones{1}, Phones{2}}};
  if (objects)
    m.data = rescam::ConceptData::build(rel, words, {{0, 1}, {1, 0}}, 2);
  else
    m.data = rescam::ConceptData::build(rel, words);
  m.h.e = 5.0;
  m.h.alphaR = 1.5;
  m.h.betaR = 0.5;
  m.h.betaPsi = 0.7;
  m.h.alphaO = 1.0;
  m.h.betaO = 0.4;
  m.directions = {{0.2, 1.5}, {3.3, 0.8}};
  m.dist = {1.0, 2.0};
  return m;
}

// Discrete state key: C1 C2 pi1 pi2 z1 z2 [zO1 zO2].
using Key = std::vector<int>;

inline double dirmult(const std::vector<int>& counts, double beta) {
  double total = 0.0, lp = 0.0;
  for (int c : counts) {
    total += c;
    lp += std::lgamma(c + beta) - std::lgamma(beta);
  }
  const double V = static_cast<double>(counts.size());
  return lp + std::lgamma(V * beta) - std::lgamma(total + V * beta);
}

inline double log_joint(const FrozenModel& m, const Key& k) {
  const auto& d = m.data;
  const std::size_t N = d.scenes(), V = d.V();
  const int S = static_cast<int>(m.directions.size());
  double lp = 0.0;
  // symmetric Dirichlet(alpha/S) prior on concept labels, integrated
  std::vector<int> nc(static_cast<std::size_t>(S), 0);
  for (std::size_t n = 0; n < N; ++n) ++nc[static_cast<std::size_t>(k[n])];
  lp += std::lgamma(m.h.alphaR) - std::lgamma(N + m.h.alphaR);
  for (int c : nc) lp += std::lgamma(c + m.h.alphaR / S) - std::lgamma(m.h.alphaR / S);

  std::vector<std::vector<int>> loc(static_cast<std::size_t>(S), std::vector<int>(V, 0));
  std::vector<int> other(V, 0);
  std::vector<std::vector<int>> obj(2, std::vector<int>(V, 0));
  std::vector<int> cat_count(2, 0);
  for (std::size_t n = 0; n < N; ++n) {
    const int c = k[n], pi = k[N + n], z = k[2 * N + n];
    const int zo = m.objects ? k[3 * N + n] : -1;
    for (std::size_t j = 0; j < d.rel[n].size(); ++j) {
      const auto& r = d.rel[n][j];
      if (static_cast<int>(j) == pi) {
        const double dl = r.l - m.dist.mu;
        lp += 0.5 * std::log(m.dist.lambda / (2 * std::numbers::pi)) - 0.5 * m.dist.lambda * dl * dl;
        const auto& dir = m.directions[static_cast<std::size_t>(c)];
        lp += dir.kappa * std::cos(r.theta - dir.nu) - std::log(2 * std::numbers::pi * std::cyl_bessel_i(0.0, dir.kappa));
      } else {
        lp -= std::log(m.h.e * 2 * std::numbers::pi);
      }
    }
    const int cat = m.objects ? d.categories[n][static_cast<std::size_t>(pi)] : -1;
    if (m.objects) ++cat_count[static_cast<std::size_t>(cat)];
    for (std::size_t i = 0; i < d.words[n].size(); ++i) {
      const auto w = static_cast<std::size_t>(d.words[n][i]);
      if (static_cast<int>(i) == z)
        ++loc[static_cast<std::size_t>(c)][w];
      else if (static_cast<int>(i) == zo)
        ++obj[static_cast<std::size_t>(cat)][w];
      else
        ++other[w];
    }
  }
  for (const auto& c : loc) lp += dirmult(c, m.h.betaR);
  lp += dirmult(other, m.h.betaPsi);
  if (m.objects) {
    lp += dirmult(cat_count, m.h.alphaO);
    for (const auto& o : obj) lp += dirmult(o, m.h.betaO);
  }
  return lp;
}

inline std::map<Key, double> enumerate_posterior(const FrozenModel& m) {
  std::map<Key, double> post;
  double z = 0.0;
  const int L0 = static_cast<int>(m.data.words[0].size()), L1 = static_cast<int>(m.data.words[1].size());
  for (int c1 = 0; c1 < 2; ++c1)
    for (int c2 = 0; c2 < 2; ++c2)
      for (int p1 = 0; p1 < 2; ++p1)
        for (int p2 = 0; p2 < 2; ++p2)
          for (int z1 = 0; z1 < L0; ++z1)
            for (int z2 = 0; z2 < L1; ++z2) {
              std::vector<Key> keys;
              if (!m.objects) {
                keys.push_back({c1, c2, p1, p2, z1, z2});
              } else {
                for (int o1 = 0; o1 < L0; ++o1)
                  for (int o2 = 0; o2 < L1; ++o2)
                    if (o1 != z1 && o2 != z2) keys.push_back({c1, c2, p1, p2, z1, z2, o1, o2});
              }
              for (const auto& k : keys) {
                const double p = std::exp(log_joint(m, k));
                post[k] = p;
                z += p;
              }
            }
  for (auto& [k, p] : post) p /= z;
  return post;
}

// Runs the frozen sampler and returns the TV distance of its discrete-state
// histogram from the enumerated posterior.
inline double frozen_sampler_tv(const FrozenModel& m, bool blocked, int sweeps, std::uint64_t seed) {
  rescam::Rng rng(seed);
  rescam::SamplerOptions opt;
  opt.update_parameters = false;
  opt.allow_new_concepts = false;
  opt.initial_concepts = 2;
  opt.blocked = blocked;
  opt.with_objects = m.objects;
  rescam::ConceptSampler sampler(m.data, m.h, opt, rng);
  sampler.set_assignments({0, 1}, {0, 0}, {0, 0}, m.directions, m.dist);
  std::map<Key, int> hits;
  for (int t = 0; t < sweeps; ++t) {
    sampler.sweep();
    const auto st = sampler.snapshot();
    Key k{st.C[0], st.C[1], st.pi[0], st.pi[1], st.z[0], st.z[1]};
    if (m.objects) k.insert(k.end(), {st.zO[0], st.zO[1]});
    ++hits[k];
  }
  return tv_distance(enumerate_posterior(m), hits, sweeps);
}

}  // namespace oracle
