#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rescam/class_lm.hpp"
#include "rescam/concept.hpp"
#include "rescam/evaluation.hpp"
#include "rescam/scene.hpp"
#include "rescam/segmenter.hpp"

namespace rescam {

// Two axes: list selection by mutual information, and class vs word trigrams.
// TrueWords bypasses segmentation entirely.
enum class Method { Baseline, MI, CLM, CLM_MI, TrueWords };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Baseline: return "Baseline";
    case Method::MI: return "MI";
    case Method::CLM: return "CLM";
    case Method::CLM_MI: return "CLM+MI";
    case Method::TrueWords: return "TRUEWORDS";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::Baseline, Method::MI, Method::CLM, Method::CLM_MI, Method::TrueWords})
    if (s == method_name(m)) return m;
  if (s == "ReSCAM") return Method::CLM_MI;
  throw std::invalid_argument("unknown method '" + std::string(s) + "'");
}

inline bool uses_mi_selection(Method m) { return m == Method::MI || m == Method::CLM_MI; }
inline LmKind lm_kind(Method m) {
  return (m == Method::CLM || m == Method::CLM_MI) ? LmKind::ClassTrigram : LmKind::WordTrigram;
}

struct RunConfig {
  Method method = Method::CLM_MI;
  bool objects = false;            // object-clue extension of the learner
  SimConfig sim;                   // data generation (J, channel, utterance style)
  int G = 20;                      // outer iterations, final step included
  LearnOptions learn;              // Table-8 schedule: 100 sweeps, 50 burn-in
  int n_lists = 10;                // candidate lists per iteration with MI selection
  int seg_sweeps = 200;            // annealed segmenter sweeps before the first list (no LM yet)
  int seg_sweeps_later = 20;       // sweeps once decoded hypotheses seed the segmenter
  SegmenterOptions segmenter;
  double lm_delta = 0.01;
  std::size_t n_best = 5;          // decoded hypotheses fed back as evidence
  std::size_t beam = 0;            // decoder beam, 0 = exact
  Hyperparams hyper;
  int par_points = 25;             // test locations per concept for PAR

  void validate() const {
    if (G < 1) throw std::invalid_argument("G must be at least 1");
    if (n_lists < 1) throw std::invalid_argument("n_lists must be at least 1");
    if (seg_sweeps < 0 || seg_sweeps_later < 0) throw std::invalid_argument("segmenter sweeps must be non-negative");
    if (n_best < 1) throw std::invalid_argument("n_best must be at least 1");
    if (!(lm_delta > 0.0)) throw std::invalid_argument("lm_delta must be positive");
    if (par_points < 1) throw std::invalid_argument("par_points must be at least 1");
    if (objects && sim.style != UtteranceStyle::WithObject)
      throw std::invalid_argument("the object extension needs utterances with object words");
    if (objects && method == Method::TrueWords && sim.style != UtteranceStyle::WithObject)
      throw std::invalid_argument("invalid method/object combination");
    sim.validate();
    learn.validate();
    segmenter.validate();
    hyper.validate();
  }
};

struct TrialResult {
  std::string method;
  bool objects = false;
  int J = 0;
  std::uint64_t seed = 0;
  double distance_mean = 0.0;
  int iterations = 0;
  double ari = 0.0;
  double par = 0.0;         // location words
  double par_object = 0.0;  // object words, +O only
  double ref_accuracy = 0.0;
  double mi_location = 0.0;
  double mi_object = 0.0;
  int concepts = 0;
  std::vector<std::string> learned_words;   // per true concept, predicted at its mean location
  std::vector<double> concept_angle_error;  // per true concept, |angle| to matched learned nu (radians)
  double wall_ms = 0.0;
  std::string error;  // non-empty when the trial failed
};

// Everything produced by one trial, for persistence.
struct RunArtifacts {
  std::vector<Scene> scenes;
  std::vector<WordSeq> final_words;
  ConceptState state;
  std::optional<ClassTrigramLM> lm;
  std::vector<std::vector<CorpusList>> lists;  // per iteration
  std::vector<int> selected;                   // chosen list per iteration
  ConceptData data;
};

namespace detail {

inline std::vector<std::vector<RelativeCoord>> relative_coords(const std::vector<Scene>& scenes) {
  std::vector<std::vector<RelativeCoord>> rel;
  for (const auto& s : scenes) rel.push_back(s.relative());
  return rel;
}

inline std::vector<std::vector<int>> scene_categories(const std::vector<Scene>& scenes) {
  std::vector<std::vector<int>> cats;
  for (const auto& s : scenes) cats.push_back(s.categories());
  return cats;
}

inline int matched_concept(const ConceptState& st, const std::vector<Scene>& scenes, int true_concept) {
  std::map<int, int> overlap;
  for (std::size_t n = 0; n < scenes.size(); ++n)
    if (scenes[n].true_concept == true_concept) ++overlap[st.C[n]];
  int best = -1, most = 0;
  for (const auto& [c, k] : overlap)
    if (k > most) most = k, best = c;
  return best;
}

}  // namespace detail

inline TrialResult evaluate_trial(const RunConfig& cfg, const std::vector<Scene>& scenes, const ConceptData& data,
                                  const ConceptState& st, const PhonemeInventory& inv, std::uint64_t seed) {
  TrialResult r;
  r.method = method_name(cfg.method);
  r.objects = cfg.objects;
  r.J = cfg.sim.J;
  r.seed = seed;
  r.distance_mean = cfg.sim.distance.mu;
  r.iterations = cfg.learn.iterations;
  std::vector<int> gold_c, gold_pi;
  for (const auto& s : scenes) gold_c.push_back(s.true_concept), gold_pi.push_back(s.true_reference);
  r.ari = ari(st.C, gold_c);
  r.ref_accuracy = reference_accuracy(st.pi, gold_pi);
  const auto mi = mutual_information(st, data);
  r.mi_location = mi.location;
  r.mi_object = mi.object;
  for (const auto& c : st.concepts) r.concepts += c.scenes > 0;

  // PAR on locations drawn from each concept's generating distribution.
  Rng rng(mix_seed(seed, 0x5041525ULL));
  double par_sum = 0.0;
  int par_n = 0;
  for (std::size_t k = 0; k < cfg.sim.concepts.size(); ++k) {
    const auto& spec = cfg.sim.concepts[k];
    const Phones correct = inv.tokenize(spec.word);
    for (int t = 0; t < cfg.par_points; ++t) {
      double l;
      do {
        l = sample_normal(cfg.sim.distance.mu, cfg.sim.distance.lambda, rng);
      } while (l <= 0.0);
      const RelativeCoord rel{l, vm_sample({spec.mean_angle, spec.concentration}, rng)};
      par_sum += par(data.vocab[static_cast<std::size_t>(predict_location_word(rel, st, cfg.hyper.alphaR))], correct);
      ++par_n;
    }
    const RelativeCoord centre{cfg.sim.distance.mu, spec.mean_angle};
    r.learned_words.push_back(
        inv.detokenize(data.vocab[static_cast<std::size_t>(predict_location_word(centre, st, cfg.hyper.alphaR))]));
    const int m = detail::matched_concept(st, scenes, static_cast<int>(k));
    r.concept_angle_error.push_back(
        m < 0 ? std::numbers::pi : std::abs(angle_diff(st.concepts[static_cast<std::size_t>(m)].direction.nu, spec.mean_angle)));
  }
  r.par = par_sum / par_n;

  if (cfg.objects && st.with_objects) {
    const auto K = cfg.sim.categories.size();
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<double> onehot(K, 0.0);
      onehot[k] = 1.0;
      const auto& w = data.vocab[static_cast<std::size_t>(predict_object_word(onehot, st))];
      sum += par(w, inv.tokenize(cfg.sim.categories[k].word));
    }
    r.par_object = sum / static_cast<double>(K);
  }
  return r;
}

// One trial: simulate data, run the iterative segmentation/learning loop, evaluate.
inline TrialResult run_pipeline(const RunConfig& cfg, std::uint64_t seed, const PhonemeInventory& inv,
                                RunArtifacts* artifacts = nullptr) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  Rng data_rng(mix_seed(seed, 0xDA7AULL));
  Rng rng(mix_seed(seed, 0x5A3FULL));
  const std::vector<Scene> scenes = generate_scenes(cfg.sim, inv, data_rng);
  const auto rel = detail::relative_coords(scenes);
  const auto cats = cfg.objects ? detail::scene_categories(scenes) : std::vector<std::vector<int>>{};
  const int K = cfg.objects ? static_cast<int>(cfg.sim.categories.size()) : 0;
  std::vector<Phones> corpus;
  for (const auto& s : scenes) corpus.push_back(s.phonemes);

  LearnOptions learn = cfg.learn;
  learn.sampler.with_objects = cfg.objects;
  auto learn_on = [&](const std::vector<WordSeq>& words) {
    ConceptData d = ConceptData::build(rel, words, cats, K);
    LearnResult lr = learn_concepts(d, cfg.hyper, learn, rng);
    return std::pair{std::move(d), std::move(lr)};
  };

  std::vector<WordSeq> final_words;
  std::optional<ClassTrigramLM> lm;
  std::vector<std::vector<CorpusList>> all_lists;
  std::vector<int> selected;

  if (cfg.method == Method::TrueWords) {
    for (const auto& s : scenes) {
      WordSeq u;
      for (const auto& w : s.utterance.words) u.push_back(inv.tokenize(w));
      final_words.push_back(std::move(u));
    }
  } else {
    const Segmenter seg(inv.size(), cfg.segmenter);
    SegmenterOptions later_opt = cfg.segmenter;
    later_opt.anneal_from = 1.0;
    const Segmenter seg_later(inv.size(), later_opt);
    const int lists_per_iter = uses_mi_selection(cfg.method) ? cfg.n_lists : 1;
    for (int g = 0; g + 1 < cfg.G; ++g) {
      std::vector<std::vector<WordSeq>> hyps;
      if (lm) {
        for (const auto& s : corpus) hyps.push_back(lm->decode(s, cfg.n_best, cfg.beam));
      }
      auto lists = lm ? seg_later.sample_corpus_lists(corpus, lists_per_iter, cfg.seg_sweeps_later, rng, &hyps)
                      : seg.sample_corpus_lists(corpus, lists_per_iter, cfg.seg_sweeps, rng);
      int best = 0;
      double best_mi = kNegInf;
      ConceptState best_state;
      for (std::size_t k = 0; k < lists.size(); ++k) {
        auto [d, lr] = learn_on(lists[k].utterances);
        const double mi = mutual_information(lr.state, d).total();
        if (lists.size() == 1 || mi > best_mi) {
          best_mi = mi;
          best = static_cast<int>(k);
          best_state = std::move(lr.state);
        }
      }
      const auto& chosen = lists[static_cast<std::size_t>(best)].utterances;
      std::vector<int> zO = best_state.zO;
      lm = ClassTrigramLM::build(chosen, best_state.z, cfg.objects ? &zO : nullptr, cfg.lm_delta,
                                 lm_kind(cfg.method), seg.base());
      selected.push_back(best);
      if (artifacts) all_lists.push_back(std::move(lists));
    }
    if (lm) {
      for (const auto& s : corpus) final_words.push_back(lm->decode(s, 1, cfg.beam).front());
    } else {
      final_words = seg.sample_corpus_lists(corpus, 1, cfg.seg_sweeps, rng).front().utterances;
    }
  }

  auto [data, lr] = learn_on(final_words);
  TrialResult res = evaluate_trial(cfg, scenes, data, lr.state, inv, seed);
  res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (artifacts) {
    artifacts->scenes = scenes;
    artifacts->final_words = final_words;
    artifacts->state = lr.state;
    artifacts->lm = lm;
    artifacts->lists = std::move(all_lists);
    artifacts->selected = selected;
    artifacts->data = std::move(data);
  }
  return res;
}

// Runs jobs on `workers` threads; results keep job order.
template <typename Job, typename Result>
std::vector<Result> run_pool(const std::vector<Job>& jobs, unsigned workers,
                             const std::function<Result(const Job&)>& fn) {
  std::vector<Result> out(jobs.size());
  if (workers <= 1 || jobs.size() <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) out[i] = fn(jobs[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < std::min<std::size_t>(workers, jobs.size()); ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) out[i] = fn(jobs[i]);
    });
  for (auto& t : pool) t.join();
  return out;
}

enum class Experiment { I, II, AppendixB };

inline Experiment parse_experiment(std::string_view s) {
  if (s == "I" || s == "1") return Experiment::I;
  if (s == "II" || s == "2") return Experiment::II;
  if (s == "B" || s == "AppendixB" || s == "appendix-b") return Experiment::AppendixB;
  throw std::invalid_argument("unknown experiment '" + std::string(s) + "'");
}

struct ExperimentConfig {
  Experiment experiment = Experiment::I;
  RunConfig base;
  std::vector<std::uint64_t> seeds;
  std::vector<int> J_values{3, 10, 20};
  std::vector<double> distance_means{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<std::pair<int, int>> budgets{{50, 100}, {500, 1000}};  // (burn-in, iterations)
  double appendix_e = 12.0;  // background radius for the distance sweep
  unsigned workers = 1;
};

// Expands the experiment grid into per-trial configurations.
inline std::vector<std::pair<RunConfig, std::uint64_t>> experiment_grid(const ExperimentConfig& ex) {
  std::vector<std::pair<RunConfig, std::uint64_t>> jobs;
  auto push = [&](RunConfig c) {
    c.validate();
    for (auto s : ex.seeds) jobs.emplace_back(c, s);
  };
  switch (ex.experiment) {
    case Experiment::I:
      for (int J : ex.J_values)
        for (Method m : {Method::Baseline, Method::MI, Method::CLM, Method::CLM_MI, Method::TrueWords}) {
          RunConfig c = ex.base;
          c.method = m;
          c.objects = false;
          c.sim.J = J;
          c.sim.style = UtteranceStyle::LocationOnly;
          push(c);
        }
      break;
    case Experiment::II:
      for (int J : ex.J_values)
        for (bool objects : {false, true}) {
          RunConfig c = ex.base;
          c.method = Method::CLM_MI;
          c.objects = objects;
          c.sim.J = J;
          c.sim.style = UtteranceStyle::WithObject;
          push(c);
        }
      break;
    case Experiment::AppendixB:
      for (const auto& [burn, iters] : ex.budgets)
        for (double mu : ex.distance_means) {
          RunConfig c = ex.base;
          c.method = Method::CLM_MI;
          c.objects = false;
          c.sim.style = UtteranceStyle::LocationOnly;
          c.sim.distance.mu = mu;
          c.hyper.e = ex.appendix_e;
          c.learn.burn_in = burn;
          c.learn.iterations = iters;
          push(c);
        }
      break;
  }
  return jobs;
}

// Per-trial failures are recorded in the row and do not stop the run.
inline std::vector<TrialResult> run_experiment(const ExperimentConfig& ex, const PhonemeInventory& inv) {
  using Job = std::pair<RunConfig, std::uint64_t>;
  const auto jobs = experiment_grid(ex);
  std::function<TrialResult(const Job&)> fn = [&](const Job& job) {
    try {
      return run_pipeline(job.first, job.second, inv);
    } catch (const std::exception& e) {
      TrialResult r;
      r.method = method_name(job.first.method);
      r.objects = job.first.objects;
      r.J = job.first.sim.J;
      r.seed = job.second;
      r.distance_mean = job.first.sim.distance.mu;
      r.iterations = job.first.learn.iterations;
      r.error = e.what();
      return r;
    }
  };
  return run_pool<Job, TrialResult>(jobs, ex.workers, fn);
}

}  // namespace rescam
