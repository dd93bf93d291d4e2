#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rescam/geometry.hpp"
#include "rescam/kernels.hpp"
#include "rescam/segmenter.hpp"

namespace rescam {

// Observations for one concept-learning run: relative coordinates of the
// trainer w.r.t. every candidate object, the utterances of one corpus list as
// vocabulary ids, and (object extension) recognized object categories.
struct ConceptData {
  std::vector<std::vector<RelativeCoord>> rel;
  std::vector<std::vector<int>> words;
  std::vector<std::vector<int>> categories;  // empty unless objects are modelled
  std::vector<Phones> vocab;
  std::vector<double> log_unigram;  // add-one smoothed over the list
  int num_categories = 0;

  std::size_t scenes() const noexcept { return rel.size(); }
  std::size_t V() const noexcept { return vocab.size(); }

  static ConceptData build(std::vector<std::vector<RelativeCoord>> rel, const std::vector<WordSeq>& utterances,
                           std::vector<std::vector<int>> categories = {}, int num_categories = 0) {
    if (rel.size() != utterances.size()) throw std::invalid_argument("scene/utterance count mismatch");
    if (!categories.empty() && categories.size() != rel.size())
      throw std::invalid_argument("scene/category count mismatch");
    ConceptData d;
    d.rel = std::move(rel);
    d.categories = std::move(categories);
    d.num_categories = num_categories;
    std::map<Phones, int> counts;
    std::size_t tokens = 0;
    for (const auto& u : utterances) {
      if (u.empty()) throw std::invalid_argument("utterance without words");
      for (const auto& w : u) ++counts[w], ++tokens;
    }
    std::map<Phones, int> id;
    for (const auto& [w, c] : counts) {
      id[w] = static_cast<int>(d.vocab.size());
      d.vocab.push_back(w);
    }
    const double denom = static_cast<double>(tokens + d.vocab.size());
    for (const auto& w : d.vocab) d.log_unigram.push_back(std::log((counts[w] + 1.0) / denom));
    for (const auto& u : utterances) {
      std::vector<int> ids;
      for (const auto& w : u) ids.push_back(id[w]);
      d.words.push_back(std::move(ids));
    }
    for (std::size_t n = 0; n < d.rel.size(); ++n) {
      if (d.rel[n].empty()) throw std::invalid_argument("scene without candidate objects");
      if (!d.categories.empty()) {
        if (d.categories[n].size() != d.rel[n].size()) throw std::invalid_argument("category/object count mismatch");
        for (int c : d.categories[n])
          if (c < 0 || c >= num_categories) throw std::out_of_range("object category out of range");
      }
    }
    return d;
  }

  int word_id(const Phones& w) const {
    auto it = std::lower_bound(vocab.begin(), vocab.end(), w);
    return it != vocab.end() && *it == w ? static_cast<int>(it - vocab.begin()) : -1;
  }
};

struct Concept {
  VonMises direction;
  std::vector<double> log_phi;  // location-word distribution over the vocabulary
  int scenes = 0;
};

// One sampler state with explicit word distributions (posterior means given
// the current assignments).
struct ConceptState {
  std::vector<int> C;   // concept per scene
  std::vector<int> pi;  // reference object per scene
  std::vector<int> z;   // location-word position per scene
  std::vector<Concept> concepts;
  DistanceModel dist;
  std::vector<double> log_psi;
  // object extension
  bool with_objects = false;
  std::vector<int> CO;  // object category per scene
  std::vector<int> zO;  // object-word position per scene, -1 if none
  std::vector<std::vector<double>> log_phiO;
  std::vector<double> log_vO;
  std::vector<std::vector<double>> log_omega;  // [k][observed category]
  double log_posterior = kNegInf;

  int S() const noexcept { return static_cast<int>(concepts.size()); }
  int K() const noexcept { return static_cast<int>(log_vO.size()); }
};

// Reference branch at j == pi, background elsewhere.
inline double location_loglik(const std::vector<RelativeCoord>& rel, int pi, const VonMises& direction,
                              const DistanceModel& dist, double e) {
  if (pi < 0 || pi >= static_cast<int>(rel.size())) throw std::out_of_range("reference index out of range");
  double lp = 0.0;
  for (std::size_t j = 0; j < rel.size(); ++j) {
    if (static_cast<int>(j) == pi)
      lp += distance_logpdf(rel[j].l, dist) + vm_logpdf(rel[j].theta, direction);
    else
      lp += background_logpdf(rel[j], e);
  }
  return lp;
}

inline double location_loglik(const std::vector<RelativeCoord>& rel, int pi, int c, const ConceptState& st,
                              double e) {
  return location_loglik(rel, pi, st.concepts.at(static_cast<std::size_t>(c)).direction, st.dist, e);
}

// Unigram-rescaled word term: sum_i log p(w_i | phi/psi) - log p(w_i). The
// language-model factor is constant in every conditional and omitted.
inline double word_loglik(const std::vector<int>& words, int c, int z, const ConceptState& st,
                          const std::vector<double>& log_unigram, int zO = -1, int co = -1) {
  if (z < 0 || z >= static_cast<int>(words.size())) throw std::out_of_range("location word index out of range");
  double lp = 0.0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const int w = words[i];
    if (w < 0 || w >= static_cast<int>(log_unigram.size()))
      throw std::out_of_range("word missing from the unigram table");
    double lw;
    if (static_cast<int>(i) == z)
      lw = st.concepts.at(static_cast<std::size_t>(c)).log_phi[static_cast<std::size_t>(w)];
    else if (static_cast<int>(i) == zO)
      lw = st.log_phiO.at(static_cast<std::size_t>(co)).at(static_cast<std::size_t>(w));
    else
      lw = st.log_psi[static_cast<std::size_t>(w)];
    lp += lw - log_unigram[static_cast<std::size_t>(w)];
  }
  return lp;
}

struct SamplerOptions {
  int aux = 3;                  // auxiliary prior draws for a new concept
  double kappa_step = 0.1;      // random-walk step on log kappa
  bool update_parameters = true;
  bool allow_new_concepts = true;
  bool with_objects = false;
  int initial_concepts = 0;     // >0: start with this many concepts, scenes assigned uniformly
  bool blocked = true;          // draw (C_n, pi_n) jointly instead of one after the other
};

namespace detail {

inline double dirmult_logprob(const std::vector<int>& counts, int total, double beta) {
  const double V = static_cast<double>(counts.size());
  double lp = std::lgamma(V * beta) - std::lgamma(total + V * beta);
  for (int c : counts)
    if (c > 0) lp += std::lgamma(c + beta) - std::lgamma(beta);
  return lp;
}

inline double lognormal_logpdf(double x, double m, double s) {
  const double d = std::log(x) - m;
  return -std::log(x * s) - 0.5 * std::log(kTwoPi) - 0.5 * d * d / (s * s);
}

inline double gamma_logpdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

}  // namespace detail

// Gibbs/Metropolis-Hastings sampler over concepts, references and word
// positions. Word distributions are integrated out during sweeps and exposed
// through their posterior means in snapshot().
class ConceptSampler {
 public:
  ConceptSampler(const ConceptData& data, const Hyperparams& h, SamplerOptions opt, Rng& rng)
      : data_(data), h_(h), opt_(opt), rng_(rng) {
    h_.validate();
    if (data_.scenes() == 0) throw std::invalid_argument("no scenes to learn from");
    if (opt_.with_objects && (data_.categories.empty() || data_.num_categories < 1))
      throw std::invalid_argument("object extension requires object categories");
    if (opt_.aux < 1) throw std::invalid_argument("aux must be at least 1");
    initialize();
  }

  // Omega is the per-category recognition distribution; one-hot identity by default.
  void set_log_omega(std::vector<std::vector<double>> log_omega) { log_omega_ = std::move(log_omega); }

  // Overwrites the discrete state (used by frozen-model tests and warm starts).
  void set_assignments(std::vector<int> C, std::vector<int> pi, std::vector<int> z,
                       std::vector<VonMises> directions, DistanceModel dist, std::vector<int> zO = {}) {
    const std::size_t N = data_.scenes();
    if (C.size() != N || pi.size() != N || z.size() != N) throw std::invalid_argument("assignment size mismatch");
    if (!zO.empty() && zO.size() != N) throw std::invalid_argument("assignment size mismatch");
    concepts_.assign(directions.size(), {});
    for (std::size_t s = 0; s < directions.size(); ++s) {
      concepts_[s].direction = directions[s];
      concepts_[s].words.assign(data_.V(), 0);
    }
    C_ = std::move(C);
    pi_ = std::move(pi);
    z_ = std::move(z);
    dist_ = dist;
    if (opt_.with_objects) {
      for (std::size_t n = 0; n < N; ++n) {
        CO_[n] = data_.categories[n][static_cast<std::size_t>(pi_[n])];
        const int L = static_cast<int>(data_.words[n].size());
        zO_[n] = !zO.empty() ? zO[n] : L > 1 ? (z_[n] == 0 ? 1 : 0) : -1;
        if (zO_[n] >= L || zO_[n] == z_[n] || (zO_[n] < 0 && L > 1))
          throw std::invalid_argument("object-word position must be a word other than the location word");
      }
    }
    rebuild_counts();
  }

  void sweep() {
    const std::size_t N = data_.scenes();
    if (opt_.blocked) {
      for (std::size_t n = 0; n < N; ++n) sample_concept_reference(n);
    } else {
      for (std::size_t n = 0; n < N; ++n) sample_concept(n);
      for (std::size_t n = 0; n < N; ++n) sample_reference(n);
    }
    for (std::size_t n = 0; n < N; ++n) sample_word_positions(n);
    if (opt_.update_parameters) {
      for (auto& c : concepts_) {
        if (opt_.allow_new_concepts && c.scenes == 0) continue;
        sample_direction(c);
      }
      sample_distance();
    }
    ++sweeps_;
  }

  // Explicit state with posterior-mean word distributions.
  ConceptState snapshot() const {
    ConceptState st;
    st.C = C_;
    st.pi = pi_;
    st.z = z_;
    st.dist = dist_;
    const double V = static_cast<double>(data_.V());
    for (const auto& c : concepts_) {
      Concept out;
      out.direction = c.direction;
      out.scenes = c.scenes;
      out.log_phi.resize(data_.V());
      for (std::size_t w = 0; w < data_.V(); ++w)
        out.log_phi[w] = std::log((c.words[w] + h_.betaR) / (c.scenes + V * h_.betaR));
      st.concepts.push_back(std::move(out));
    }
    st.log_psi.resize(data_.V());
    for (std::size_t w = 0; w < data_.V(); ++w)
      st.log_psi[w] = std::log((psi_[w] + h_.betaPsi) / (psi_total_ + V * h_.betaPsi));
    st.with_objects = opt_.with_objects;
    if (opt_.with_objects) {
      const int K = data_.num_categories;
      st.CO = CO_;
      st.zO = zO_;
      st.log_omega = log_omega_;
      st.log_vO.resize(static_cast<std::size_t>(K));
      st.log_phiO.assign(static_cast<std::size_t>(K), std::vector<double>(data_.V()));
      const double N = static_cast<double>(data_.scenes());
      for (int k = 0; k < K; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        st.log_vO[ku] = std::log((cat_scenes_[ku] + h_.alphaO) / (N + K * h_.alphaO));
        for (std::size_t w = 0; w < data_.V(); ++w)
          st.log_phiO[ku][w] = std::log((obj_words_[ku][w] + h_.betaO) / (obj_total_[ku] + V * h_.betaO));
      }
    }
    st.log_posterior = log_posterior();
    return st;
  }

  // Joint log posterior with word distributions (and the object-category
  // prior) integrated out.
  double log_posterior() const {
    const std::size_t N = data_.scenes();
    double lp = 0.0;
    if (opt_.allow_new_concepts) {
      int S = 0;
      for (const auto& c : concepts_)
        if (c.scenes > 0) ++S, lp += std::lgamma(static_cast<double>(c.scenes));
      lp += S * std::log(h_.alphaR) + std::lgamma(h_.alphaR) - std::lgamma(N + h_.alphaR);
    } else {
      std::vector<int> counts;
      for (const auto& c : concepts_) counts.push_back(c.scenes);
      const double a = h_.alphaR / static_cast<double>(concepts_.size());
      lp += std::lgamma(h_.alphaR) - std::lgamma(N + h_.alphaR);
      for (int c : counts) lp += std::lgamma(c + a) - std::lgamma(a);
    }
    for (std::size_t n = 0; n < N; ++n) {
      lp -= std::log(static_cast<double>(data_.rel[n].size()));
      const double L = static_cast<double>(data_.words[n].size());
      lp -= (opt_.with_objects && L > 1) ? std::log(L * (L - 1.0)) : std::log(L);
      lp += location_loglik(data_.rel[n], pi_[n], concepts_[static_cast<std::size_t>(C_[n])].direction, dist_, h_.e);
      for (int w : data_.words[n]) lp -= data_.log_unigram[static_cast<std::size_t>(w)];
    }
    for (const auto& c : concepts_) {
      if (opt_.allow_new_concepts && c.scenes == 0) continue;
      lp += vm_logpdf(c.direction.nu, {h_.nu0, h_.kappa0});
      lp += detail::lognormal_logpdf(c.direction.kappa, h_.m0, h_.sigma0);
      lp += detail::dirmult_logprob(c.words, c.scenes, h_.betaR);
    }
    lp += normal_logpdf(dist_.mu, h_.mu0, h_.lambda0);
    lp += detail::gamma_logpdf(dist_.lambda, h_.a0, h_.b0);
    lp += detail::dirmult_logprob(psi_, psi_total_, h_.betaPsi);
    if (opt_.with_objects) {
      lp += detail::dirmult_logprob(cat_scenes_, static_cast<int>(N), h_.alphaO);
      for (std::size_t n = 0; n < N; ++n)
        lp += log_omega_[static_cast<std::size_t>(CO_[n])]
                        [static_cast<std::size_t>(data_.categories[n][static_cast<std::size_t>(pi_[n])])];
      for (std::size_t k = 0; k < obj_words_.size(); ++k)
        lp += detail::dirmult_logprob(obj_words_[k], obj_total_[k], h_.betaO);
    }
    return lp;
  }

  double kappa_acceptance() const {
    return kappa_proposals_ == 0 ? 0.0 : static_cast<double>(kappa_accepts_) / kappa_proposals_;
  }
  int sweeps() const noexcept { return sweeps_; }
  int live_concepts() const {
    int S = 0;
    for (const auto& c : concepts_) S += c.scenes > 0;
    return S;
  }

 private:
  struct ConceptSlot {
    VonMises direction;
    std::vector<int> words;  // location-word counts
    int scenes = 0;
    mutable double cached_kappa = -1.0;
    mutable double cached_log_i0 = 0.0;
  };

  static double log_i0_of(const ConceptSlot& c) {
    if (c.cached_kappa != c.direction.kappa) {
      c.cached_kappa = c.direction.kappa;
      c.cached_log_i0 = log_bessel_i0(c.direction.kappa);
    }
    return c.cached_log_i0;
  }

  void initialize() {
    const std::size_t N = data_.scenes();
    C_.assign(N, 0);
    pi_.assign(N, 0);
    z_.assign(N, 0);
    const PriorDraw d = prior_draws(h_, rng_);
    dist_ = d.dist;
    if (opt_.initial_concepts > 0) {
      for (int s = 0; s < opt_.initial_concepts; ++s) new_slot(sample_direction_prior(h_, rng_));
      std::uniform_int_distribution<int> pick(0, opt_.initial_concepts - 1);
      for (auto& c : C_) c = pick(rng_);
    } else {
      std::vector<int> counts;
      for (std::size_t n = 0; n < N; ++n) {
        std::vector<double> logw;
        for (int c : counts) logw.push_back(std::log(static_cast<double>(c)));
        logw.push_back(std::log(h_.alphaR));
        const std::size_t s = sample_log_categorical(logw, rng_);
        if (s == counts.size()) {
          counts.push_back(0);
          new_slot(sample_direction_prior(h_, rng_));
        }
        ++counts[s];
        C_[n] = static_cast<int>(s);
      }
    }
    for (std::size_t n = 0; n < N; ++n) {
      pi_[n] = std::uniform_int_distribution<int>(0, static_cast<int>(data_.rel[n].size()) - 1)(rng_);
      z_[n] = std::uniform_int_distribution<int>(0, static_cast<int>(data_.words[n].size()) - 1)(rng_);
    }
    if (opt_.with_objects) {
      const int K = data_.num_categories;
      if (log_omega_.empty()) {
        log_omega_.assign(static_cast<std::size_t>(K), std::vector<double>(static_cast<std::size_t>(K), kNegInf));
        for (int k = 0; k < K; ++k) log_omega_[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)] = 0.0;
      }
      CO_.assign(N, 0);
      zO_.assign(N, -1);
      for (std::size_t n = 0; n < N; ++n) {
        CO_[n] = data_.categories[n][static_cast<std::size_t>(pi_[n])];
        const int L = static_cast<int>(data_.words[n].size());
        if (L > 1) {
          int k = std::uniform_int_distribution<int>(0, L - 2)(rng_);
          if (k >= z_[n]) ++k;
          zO_[n] = k;
        }
      }
    }
    rebuild_counts();
    if (opt_.update_parameters) {
      for (auto& c : concepts_)
        if (c.scenes > 0) sample_direction(c);
      sample_distance();
    }
  }

  std::size_t new_slot(const VonMises& dir) {
    concepts_.push_back({dir, std::vector<int>(data_.V(), 0), 0});
    return concepts_.size() - 1;
  }

  void rebuild_counts() {
    const std::size_t N = data_.scenes();
    for (auto& c : concepts_) {
      c.scenes = 0;
      std::fill(c.words.begin(), c.words.end(), 0);
    }
    psi_.assign(data_.V(), 0);
    psi_total_ = 0;
    if (opt_.with_objects) {
      const auto K = static_cast<std::size_t>(data_.num_categories);
      cat_scenes_.assign(K, 0);
      obj_words_.assign(K, std::vector<int>(data_.V(), 0));
      obj_total_.assign(K, 0);
    }
    for (std::size_t n = 0; n < N; ++n) {
      auto& c = concepts_.at(static_cast<std::size_t>(C_[n]));
      ++c.scenes;
      add_words(n, +1);
      if (opt_.with_objects) ++cat_scenes_[static_cast<std::size_t>(CO_[n])];
    }
  }

  // Adds (+1) or removes (-1) the word tokens of scene n from the concept,
  // object and background counts.
  void add_words(std::size_t n, int sign) {
    const auto& ws = data_.words[n];
    auto& c = concepts_[static_cast<std::size_t>(C_[n])];
    for (std::size_t i = 0; i < ws.size(); ++i) {
      const auto w = static_cast<std::size_t>(ws[i]);
      if (static_cast<int>(i) == z_[n]) {
        c.words[w] += sign;
      } else if (opt_.with_objects && static_cast<int>(i) == zO_[n]) {
        obj_words_[static_cast<std::size_t>(CO_[n])][w] += sign;
        obj_total_[static_cast<std::size_t>(CO_[n])] += sign;
      } else {
        psi_[w] += sign;
        psi_total_ += sign;
      }
    }
  }

  double loc_word_logprob(const ConceptSlot& c, int w) const {
    return std::log((c.words[static_cast<std::size_t>(w)] + h_.betaR) / (c.scenes + data_.V() * h_.betaR));
  }

  // Concept candidates for scene n once its own location word is removed:
  // live concepts plus auxiliary prior draws (or the fixed set when frozen).
  struct Candidates {
    std::vector<VonMises> dirs;
    std::vector<double> logw;  // prior x location-word term
    std::vector<double> log_i0;
    std::size_t existing = 0;  // first `existing` entries are slots
    bool emptied = false;
  };

  Candidates concept_candidates(std::size_t old, int w) {
    Candidates cand;
    cand.existing = concepts_.size();
    if (!opt_.allow_new_concepts) {
      const double a = h_.alphaR / static_cast<double>(concepts_.size());
      for (const auto& c : concepts_) {
        cand.dirs.push_back(c.direction);
        cand.log_i0.push_back(log_i0_of(c));
        cand.logw.push_back(std::log(c.scenes + a) + loc_word_logprob(c, w));
      }
      return cand;
    }
    cand.emptied = concepts_[old].scenes == 0;
    for (const auto& c : concepts_) {
      cand.dirs.push_back(c.direction);
      cand.log_i0.push_back(c.scenes == 0 ? 0.0 : log_i0_of(c));
      cand.logw.push_back(c.scenes == 0 ? kNegInf
                                        : std::log(static_cast<double>(c.scenes)) + loc_word_logprob(c, w));
    }
    const double new_word = -std::log(static_cast<double>(data_.V()));
    const double log_a = std::log(h_.alphaR / opt_.aux);
    for (int m = 0; m < opt_.aux; ++m) {
      cand.dirs.push_back((m == 0 && cand.emptied) ? concepts_[old].direction : sample_direction_prior(h_, rng_));
      cand.log_i0.push_back(log_bessel_i0(cand.dirs.back().kappa));
      cand.logw.push_back(log_a + new_word);
    }
    return cand;
  }

  void commit_concept(std::size_t n, const Candidates& cand, std::size_t pick, std::size_t old, int w) {
    std::size_t target;
    if (pick < cand.existing) {
      target = pick;
    } else if (cand.emptied) {
      concepts_[old].direction = cand.dirs[pick];
      target = old;
    } else {
      target = new_slot(cand.dirs[pick]);
    }
    assign_concept(n, target, w);
    if (cand.emptied && target != old) erase_slot(old);
  }

  std::size_t detach_concept(std::size_t n, int w) {
    const auto old = static_cast<std::size_t>(C_[n]);
    concepts_[old].words[static_cast<std::size_t>(w)] -= 1;
    concepts_[old].scenes -= 1;
    return old;
  }

  void sample_concept(std::size_t n) {
    const double theta = data_.rel[n][static_cast<std::size_t>(pi_[n])].theta;
    const int w = data_.words[n][static_cast<std::size_t>(z_[n])];
    const auto old = detach_concept(n, w);
    Candidates cand = concept_candidates(old, w);
    std::vector<double> logw(cand.logw);
    for (std::size_t s = 0; s < logw.size(); ++s)
      if (logw[s] != kNegInf) logw[s] += vm_logpdf(theta, cand.dirs[s]);
    commit_concept(n, cand, sample_log_categorical(logw, rng_), old, w);
  }

  void assign_concept(std::size_t n, std::size_t s, int w) {
    C_[n] = static_cast<int>(s);
    concepts_[s].scenes += 1;
    concepts_[s].words[static_cast<std::size_t>(w)] += 1;
  }

  void erase_slot(std::size_t s) {
    concepts_.erase(concepts_.begin() + static_cast<std::ptrdiff_t>(s));
    for (auto& c : C_)
      if (c > static_cast<int>(s)) --c;
  }

  double object_term(std::size_t k, int w_obj) const {
    double lp = std::log(cat_scenes_[k] + h_.alphaO);
    if (w_obj >= 0)
      lp += std::log((obj_words_[k][static_cast<std::size_t>(w_obj)] + h_.betaO) / (obj_total_[k] + data_.V() * h_.betaO));
    return lp;
  }

  // Distance term of the reference branch over the background it replaces.
  // A background term of -inf (object beyond e) forces that object to be the
  // reference.
  std::vector<double> reference_base(std::size_t n) const {
    const auto& rel = data_.rel[n];
    const std::size_t J = rel.size();
    std::vector<double> bg(J), out(J);
    int n_inf = 0, inf_at = -1;
    for (std::size_t j = 0; j < J; ++j) {
      bg[j] = background_logpdf(rel[j], h_.e);
      if (bg[j] == kNegInf) ++n_inf, inf_at = static_cast<int>(j);
    }
    for (std::size_t j = 0; j < J; ++j) {
      const double d = distance_logpdf(rel[j].l, dist_);
      if (n_inf == 0)
        out[j] = d - bg[j];
      else if (n_inf == 1)
        out[j] = static_cast<int>(j) == inf_at ? d : kNegInf;
      else
        out[j] = d;  // no configuration has support; fall back to the reference terms
    }
    return out;
  }

  // Removes scene n from the object-category counts and returns, per
  // candidate object, the category terms marginal over C_O (by_cat keeps the
  // per-category split for the follow-up draw).
  std::vector<double> detach_object(std::size_t n, int& w_obj, std::vector<std::vector<double>>& by_cat) {
    const std::size_t J = data_.rel[n].size();
    std::vector<double> marg(J, 0.0);
    w_obj = -1;
    if (!opt_.with_objects) return marg;
    const auto k0 = static_cast<std::size_t>(CO_[n]);
    --cat_scenes_[k0];
    if (zO_[n] >= 0) {
      w_obj = data_.words[n][static_cast<std::size_t>(zO_[n])];
      --obj_words_[k0][static_cast<std::size_t>(w_obj)];
      --obj_total_[k0];
    }
    const auto K = static_cast<std::size_t>(data_.num_categories);
    std::vector<double> obj(K);
    for (std::size_t k = 0; k < K; ++k) obj[k] = object_term(k, w_obj);
    by_cat.assign(J, std::vector<double>(K));
    for (std::size_t j = 0; j < J; ++j) {
      const auto cat = static_cast<std::size_t>(data_.categories[n][j]);
      for (std::size_t k = 0; k < K; ++k) by_cat[j][k] = obj[k] + log_omega_[k][cat];
      marg[j] = log_sum_exp(by_cat[j]);
    }
    return marg;
  }

  void attach_object(std::size_t n, std::size_t j, int w_obj, const std::vector<std::vector<double>>& by_cat) {
    if (!opt_.with_objects) return;
    const auto k = sample_log_categorical(by_cat[j], rng_);
    CO_[n] = static_cast<int>(k);
    ++cat_scenes_[k];
    if (w_obj >= 0) {
      ++obj_words_[k][static_cast<std::size_t>(w_obj)];
      ++obj_total_[k];
    }
  }

  void sample_reference(std::size_t n) {
    const auto& rel = data_.rel[n];
    const auto& dir = concepts_[static_cast<std::size_t>(C_[n])].direction;
    int w_obj;
    std::vector<std::vector<double>> by_cat;
    std::vector<double> logw = detach_object(n, w_obj, by_cat);
    const auto base = reference_base(n);
    for (std::size_t j = 0; j < rel.size(); ++j) logw[j] += base[j] + vm_logpdf(rel[j].theta, dir);
    const auto j = sample_log_categorical(logw, rng_);
    pi_[n] = static_cast<int>(j);
    attach_object(n, j, w_obj, by_cat);
  }

  // Joint draw of (C_n, pi_n [, C_O]) given everything else.
  void sample_concept_reference(std::size_t n) {
    const auto& rel = data_.rel[n];
    const std::size_t J = rel.size();
    const int w = data_.words[n][static_cast<std::size_t>(z_[n])];
    const auto old = detach_concept(n, w);
    int w_obj;
    std::vector<std::vector<double>> by_cat;
    std::vector<double> per_obj = detach_object(n, w_obj, by_cat);
    const auto base = reference_base(n);
    for (std::size_t j = 0; j < J; ++j) per_obj[j] += base[j];
    Candidates cand = concept_candidates(old, w);
    std::vector<double>& logw = buffer_;
    logw.assign(cand.dirs.size() * J, kNegInf);
    for (std::size_t s = 0; s < cand.dirs.size(); ++s) {
      if (cand.logw[s] == kNegInf) continue;
      const double ks = cand.dirs[s].kappa, nus = cand.dirs[s].nu;
      const double norm = -std::log(kTwoPi) - cand.log_i0[s];
      for (std::size_t j = 0; j < J; ++j)
        if (per_obj[j] != kNegInf) logw[s * J + j] = cand.logw[s] + per_obj[j] + norm + ks * std::cos(rel[j].theta - nus);
    }
    const auto pick = sample_log_categorical(logw, rng_);
    const std::size_t s = pick / J, j = pick % J;
    commit_concept(n, cand, s, old, w);
    pi_[n] = static_cast<int>(j);
    attach_object(n, j, w_obj, by_cat);
  }

  void sample_word_positions(std::size_t n) {
    const auto& ws = data_.words[n];
    const int L = static_cast<int>(ws.size());
    if (L == 1) {
      z_[n] = 0;
      return;
    }
    add_words(n, -1);
    const auto& c = concepts_[static_cast<std::size_t>(C_[n])];
    // multiplicity of each word inside this utterance
    std::vector<int> within(static_cast<std::size_t>(L), 0);
    for (int i = 0; i < L; ++i)
      for (int k = 0; k < L; ++k) within[static_cast<std::size_t>(i)] += ws[static_cast<std::size_t>(i)] == ws[static_cast<std::size_t>(k)];
    auto psi_den = [&](int i, int extra) {
      const auto w = static_cast<std::size_t>(ws[static_cast<std::size_t>(i)]);
      return std::log(psi_[w] + h_.betaPsi + within[static_cast<std::size_t>(i)] - 1 - extra);
    };
    auto loc = [&](int i) {
      return std::log(c.words[static_cast<std::size_t>(ws[static_cast<std::size_t>(i)])] + h_.betaR);
    };
    if (!opt_.with_objects) {
      std::vector<double> logw(static_cast<std::size_t>(L));
      for (int i = 0; i < L; ++i) logw[static_cast<std::size_t>(i)] = loc(i) - psi_den(i, 0);
      z_[n] = static_cast<int>(sample_log_categorical(logw, rng_));
    } else {
      const auto k = static_cast<std::size_t>(CO_[n]);
      std::vector<double> logw;
      std::vector<std::pair<int, int>> pairs;
      for (int i = 0; i < L; ++i) {
        for (int o = 0; o < L; ++o) {
          if (o == i) continue;
          const auto wo = static_cast<std::size_t>(ws[static_cast<std::size_t>(o)]);
          const int same = ws[static_cast<std::size_t>(i)] == ws[static_cast<std::size_t>(o)] ? 1 : 0;
          logw.push_back(loc(i) + std::log(obj_words_[k][wo] + h_.betaO) - psi_den(i, 0) - psi_den(o, same));
          pairs.emplace_back(i, o);
        }
      }
      const auto pick = sample_log_categorical(logw, rng_);
      z_[n] = pairs[pick].first;
      zO_[n] = pairs[pick].second;
    }
    add_words(n, +1);
  }

  void sample_direction(ConceptSlot& c) {
    double sc = 0.0, ss = 0.0;
    std::vector<double> thetas;
    for (std::size_t n = 0; n < data_.scenes(); ++n) {
      if (&concepts_[static_cast<std::size_t>(C_[n])] != &c) continue;
      const double t = data_.rel[n][static_cast<std::size_t>(pi_[n])].theta;
      thetas.push_back(t);
      sc += std::cos(t);
      ss += std::sin(t);
    }
    // nu | kappa: von Mises conjugate update
    const double cx = h_.kappa0 * std::cos(h_.nu0) + c.direction.kappa * sc;
    const double cy = h_.kappa0 * std::sin(h_.nu0) + c.direction.kappa * ss;
    c.direction.nu = vm_sample({std::atan2(cy, cx), std::hypot(cx, cy)}, rng_);
    // kappa: random walk on log kappa against vM likelihood x logN prior
    // vM log-likelihood through its sufficient statistic R cos(nu - mean)
    const double r_dot = sc * std::cos(c.direction.nu) + ss * std::sin(c.direction.nu);
    const double n_obs = static_cast<double>(thetas.size());
    auto target = [&](double log_kappa) {
      const double k = std::exp(log_kappa);
      return normal_logpdf(log_kappa, h_.m0, 1.0 / (h_.sigma0 * h_.sigma0)) + k * r_dot -
             n_obs * (std::log(kTwoPi) + log_bessel_i0(k));
    };
    const double cur = std::log(c.direction.kappa);
    const double prop = cur + std::normal_distribution<double>(0.0, opt_.kappa_step)(rng_);
    ++kappa_proposals_;
    if (std::log(uniform01(rng_)) < target(prop) - target(cur)) {
      c.direction.kappa = std::exp(prop);
      ++kappa_accepts_;
    }
  }

  // mu | lambda and lambda | mu over reference-branch distances.
  void sample_distance() {
    const std::size_t N = data_.scenes();
    double sum = 0.0;
    for (std::size_t n = 0; n < N; ++n) sum += data_.rel[n][static_cast<std::size_t>(pi_[n])].l;
    const double prec = h_.lambda0 + N * dist_.lambda;
    dist_.mu = sample_normal((h_.lambda0 * h_.mu0 + dist_.lambda * sum) / prec, prec, rng_);
    double ss = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const double d = data_.rel[n][static_cast<std::size_t>(pi_[n])].l - dist_.mu;
      ss += d * d;
    }
    dist_.lambda = sample_gamma(h_.a0 + 0.5 * N, h_.b0 + 0.5 * ss, rng_);
  }

  const ConceptData& data_;
  Hyperparams h_;
  SamplerOptions opt_;
  Rng& rng_;

  std::vector<int> C_, pi_, z_, CO_, zO_;
  std::vector<ConceptSlot> concepts_;
  DistanceModel dist_;
  std::vector<int> psi_;
  int psi_total_ = 0;
  std::vector<int> cat_scenes_;
  std::vector<std::vector<int>> obj_words_;
  std::vector<int> obj_total_;
  std::vector<std::vector<double>> log_omega_;
  std::vector<double> buffer_;
  long kappa_proposals_ = 0;
  long kappa_accepts_ = 0;
  int sweeps_ = 0;
};

inline double circular_mean(std::span<const double> angles) {
  double c = 0.0, s = 0.0;
  for (double a : angles) c += std::cos(a), s += std::sin(a);
  return wrap_angle(std::atan2(s, c));
}

// Point estimate from post-burn-in samples: discrete variables from the
// sample with the highest joint log posterior; continuous parameters averaged
// over all samples, matching concepts to the chosen labeling by majority
// overlap of their scenes.
inline ConceptState summarize(const std::vector<ConceptState>& chain) {
  if (chain.empty()) throw std::invalid_argument("cannot summarize an empty chain");
  std::size_t best = 0;
  for (std::size_t t = 1; t < chain.size(); ++t)
    if (chain[t].log_posterior > chain[best].log_posterior) best = t;
  ConceptState out = chain[best];
  const auto S = static_cast<std::size_t>(out.S());
  const std::size_t N = out.C.size();

  std::vector<std::vector<double>> nus(S);
  std::vector<double> kappa(S, 0.0);
  std::vector<std::vector<double>> phi(S);
  std::vector<int> used(S, 0);
  for (std::size_t s = 0; s < S; ++s) phi[s].assign(out.concepts[s].log_phi.size(), 0.0);
  double mu = 0.0, lambda = 0.0;
  std::vector<double> psi(out.log_psi.size(), 0.0);
  for (const auto& st : chain) {
    mu += st.dist.mu;
    lambda += st.dist.lambda;
    for (std::size_t w = 0; w < psi.size(); ++w) psi[w] += std::exp(st.log_psi[w]);
    for (std::size_t s = 0; s < S; ++s) {
      std::map<int, int> overlap;
      for (std::size_t n = 0; n < N; ++n)
        if (out.C[n] == static_cast<int>(s)) ++overlap[st.C[n]];
      int match = -1, most = 0;
      for (const auto& [c, k] : overlap)
        if (k > most) most = k, match = c;
      if (match < 0) continue;
      const auto& c = st.concepts[static_cast<std::size_t>(match)];
      nus[s].push_back(c.direction.nu);
      kappa[s] += c.direction.kappa;
      for (std::size_t w = 0; w < phi[s].size(); ++w) phi[s][w] += std::exp(c.log_phi[w]);
      ++used[s];
    }
  }
  const double T = static_cast<double>(chain.size());
  out.dist = {mu / T, lambda / T};
  for (std::size_t w = 0; w < psi.size(); ++w) out.log_psi[w] = std::log(psi[w] / T);
  for (std::size_t s = 0; s < S; ++s) {
    if (used[s] == 0) continue;
    out.concepts[s].direction = {circular_mean(nus[s]), kappa[s] / used[s]};
    for (std::size_t w = 0; w < phi[s].size(); ++w) out.concepts[s].log_phi[w] = std::log(phi[s][w] / used[s]);
  }
  if (out.with_objects) {
    const auto K = static_cast<std::size_t>(out.K());
    std::vector<double> v(K, 0.0);
    std::vector<std::vector<double>> phiO(K, std::vector<double>(out.log_psi.size(), 0.0));
    for (const auto& st : chain)
      for (std::size_t k = 0; k < K; ++k) {
        v[k] += std::exp(st.log_vO[k]);
        for (std::size_t w = 0; w < phiO[k].size(); ++w) phiO[k][w] += std::exp(st.log_phiO[k][w]);
      }
    for (std::size_t k = 0; k < K; ++k) {
      out.log_vO[k] = std::log(v[k] / T);
      for (std::size_t w = 0; w < phiO[k].size(); ++w) out.log_phiO[k][w] = std::log(phiO[k][w] / T);
    }
  }
  return out;
}

struct MutualInformation {
  double location = 0.0;  // I_R
  double object = 0.0;    // I_O
  double total() const noexcept { return location + object; }
};

namespace detail {

// sum_n sum_s phi_s[w_n] N_s log(phi_s[w_n] / sum_s' phi_s'[w_n] N_s')
inline double per_scene_mi(const std::vector<int>& word_of_scene, const std::vector<int>& label_of_scene,
                           const std::vector<std::vector<double>>& log_phi) {
  const std::size_t S = log_phi.size();
  const std::size_t N = word_of_scene.size();
  if (S <= 1 || N == 0) return 0.0;
  std::vector<double> frac(S, 0.0);
  for (int c : label_of_scene) frac[static_cast<std::size_t>(c)] += 1.0 / static_cast<double>(N);
  double I = 0.0;
  for (int w : word_of_scene) {
    if (w < 0) continue;
    double pw = 0.0;
    for (std::size_t s = 0; s < S; ++s) pw += std::exp(log_phi[s][static_cast<std::size_t>(w)]) * frac[s];
    if (pw <= 0.0) continue;
    for (std::size_t s = 0; s < S; ++s) {
      const double p = std::exp(log_phi[s][static_cast<std::size_t>(w)]);
      if (p > 0.0 && frac[s] > 0.0) I += p * frac[s] * std::log(p / pw);
    }
  }
  return I;
}

}  // namespace detail

inline MutualInformation mutual_information(const ConceptState& st, const ConceptData& data) {
  MutualInformation mi;
  const std::size_t N = st.C.size();
  std::vector<int> loc(N);
  for (std::size_t n = 0; n < N; ++n) loc[n] = data.words[n][static_cast<std::size_t>(st.z[n])];
  std::vector<std::vector<double>> phi;
  for (const auto& c : st.concepts) phi.push_back(c.log_phi);
  mi.location = detail::per_scene_mi(loc, st.C, phi);
  if (st.with_objects) {
    std::vector<int> obj(N, -1);
    for (std::size_t n = 0; n < N; ++n)
      if (st.zO[n] >= 0) obj[n] = data.words[n][static_cast<std::size_t>(st.zO[n])];
    mi.object = detail::per_scene_mi(obj, st.CO, st.log_phiO);
  }
  return mi;
}

struct LearnOptions {
  int burn_in = 50;
  int iterations = 100;  // total sweeps, burn-in included
  SamplerOptions sampler;

  void validate() const {
    if (iterations < 1 || burn_in < 0 || burn_in >= iterations)
      throw std::invalid_argument("need 0 <= burn_in < iterations");
  }
};

struct LearnResult {
  ConceptState state;              // summarized point estimate
  std::vector<double> trace;       // joint log posterior after every sweep
  double kappa_acceptance = 0.0;
};

inline LearnResult learn_concepts(const ConceptData& data, const Hyperparams& h, const LearnOptions& opt, Rng& rng) {
  opt.validate();
  ConceptSampler sampler(data, h, opt.sampler, rng);
  LearnResult res;
  std::vector<ConceptState> chain;
  for (int t = 0; t < opt.iterations; ++t) {
    sampler.sweep();
    if (t >= opt.burn_in) {
      chain.push_back(sampler.snapshot());
      res.trace.push_back(chain.back().log_posterior);
    } else {
      res.trace.push_back(sampler.log_posterior());
    }
  }
  res.state = summarize(chain);
  res.kappa_acceptance = sampler.kappa_acceptance();
  return res;
}

}  // namespace rescam
