// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "../concept_oracle.hpp"
#include "../oracles.hpp"
#include "rescam/io.hpp"
#include "rescam/rescam.hpp"

using namespace rescam;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const PhonemeInventory& inv() {
  static const PhonemeInventory i;
  return i;
}

double mean(const std::vector<TrialResult>& rs, double TrialResult::*field) {
  double s = 0.0;
  for (const auto& r : rs) s += r.*field;
  return rs.empty() ? 0.0 : s / static_cast<double>(rs.size());
}

// Trials are cached by (config dump, seed) so criteria can share runs.
std::vector<TrialResult> trials(const RunConfig& cfg, int n, std::uint64_t first_seed = 1) {
  static std::map<std::pair<std::string, std::uint64_t>, TrialResult> cache;
  std::vector<TrialResult> out;
  const std::string key = to_json(cfg).dump();
  for (int i = 0; i < n; ++i) {
    const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(i);
    auto it = cache.find({key, seed});
    if (it == cache.end()) it = cache.emplace(std::pair{key, seed}, run_pipeline(cfg, seed, inv())).first;
    out.push_back(it->second);
  }
  return out;
}

RunConfig method_config(Method m, int J) {
  RunConfig c;
  c.method = m;
  c.sim.J = J;
  return c;
}

RunConfig object_config(bool objects, int J) {
  RunConfig c = method_config(Method::CLM_MI, J);
  c.objects = objects;
  c.sim.style = UtteranceStyle::WithObject;
  return c;
}

Outcome par_table() {
  const std::vector<std::tuple<const char*, const char*, double>> rows{{"seNpuki", "seNpuuki", 0.88},
                                                                       {"sukuri", "sukuriiN", 0.75},
                                                                       {"pasoko", "pasokoN", 0.86},
                                                                       {"terebi", "terebi", 1.00},
                                                                       {"mae", "mae", 1.00},
                                                                       {"hidari", "hidari", 1.00}};
  bool ok = true;
  std::string d;
  for (const auto& [rec, truth, want] : rows) {
    const double got = std::round(par(rec, truth, inv()) * 100.0) / 100.0;
    ok = ok && got == want;
    d += fmt("%s=%.2f ", rec, got);
  }
  return {ok, d};
}

Outcome ffbs_exactness() {
  Rng rng(101);
  const auto lex = oracle::ffbs_lexicon(7, rng);
  auto strings = oracle::ffbs_strings();
  const auto binary = oracle::all_strings(2, 6);
  strings.insert(strings.end(), binary.begin(), binary.end());
  const double tv = oracle::ffbs_worst_tv(strings, lex, 14, 100000, rng);
  return {tv < 0.01, fmt("worst TV %.4f over %zu strings", tv, strings.size())};
}

Outcome sampler_correctness() {
  const double plain = oracle::frozen_sampler_tv(oracle::frozen_model(false), true, 100000, 102);
  const double objects = oracle::frozen_sampler_tv(oracle::frozen_model(true), true, 100000, 103);
  return {plain < 0.02 && objects < 0.02, fmt("TV %.4f, with objects %.4f", plain, objects)};
}

Outcome posterior_recovery() {
  RunConfig c = method_config(Method::TrueWords, 3);
  c.sim.channel = ChannelConfig::noiseless();
  int good = 0;
  for (const auto& r : trials(c, 10)) {
    bool near = r.concept_angle_error.size() == 4;
    for (double e : r.concept_angle_error) near = near && rad2deg(e) <= 15.0;
    good += r.concepts == 4 && near && r.ari >= 0.9;
  }
  return {good >= 8, fmt("%d/10 seeds", good)};
}

Outcome lexical_acquisition() {
  RunConfig c = method_config(Method::CLM_MI, 3);
  c.sim.channel = ChannelConfig::low();
  const std::multiset<std::string> gold{"mae", "ushiro", "migi", "hidari"};
  const auto rs = trials(c, 10);
  int exact = 0;
  for (const auto& r : rs) exact += std::multiset<std::string>(r.learned_words.begin(), r.learned_words.end()) == gold;
  const double p = mean(rs, &TrialResult::par);
  return {exact >= 6 && p >= 0.9, fmt("%d/10 exact word sets, mean PAR %.3f", exact, p)};
}

Outcome method_ordering() {
  const auto base = trials(method_config(Method::Baseline, 3), 20);
  const auto full = trials(method_config(Method::CLM_MI, 3), 20);
  const double ab = mean(base, &TrialResult::ari), af = mean(full, &TrialResult::ari);
  const double pb = mean(base, &TrialResult::par), pf = mean(full, &TrialResult::par);
  return {af >= ab + 0.05 && pf >= pb + 0.05, fmt("ARI %.3f vs %.3f, PAR %.3f vs %.3f (CLM+MI vs Baseline)", af, ab, pf, pb)};
}

Outcome degradation_with_j() {
  const auto small = trials(method_config(Method::CLM_MI, 3), 10);
  const auto large = trials(method_config(Method::CLM_MI, 20), 10);
  const double a3 = mean(small, &TrialResult::ari), a20 = mean(large, &TrialResult::ari);
  const double r3 = mean(small, &TrialResult::ref_accuracy), r20 = mean(large, &TrialResult::ref_accuracy);
  return {a3 > a20 && r3 > r20, fmt("ARI %.3f vs %.3f, ref %.3f vs %.3f (J=3 vs J=20)", a3, a20, r3, r20)};
}

Outcome clue_benefit() {
  const double a = mean(trials(object_config(false, 10), 10), &TrialResult::ari);
  const double ao = mean(trials(object_config(true, 10), 10), &TrialResult::ari);
  const double r = mean(trials(object_config(false, 20), 10), &TrialResult::ref_accuracy);
  const double ro = mean(trials(object_config(true, 20), 10), &TrialResult::ref_accuracy);
  return {ao >= a + 0.1 && ro >= r + 0.2, fmt("J=10 ARI %.3f vs %.3f, J=20 ref %.3f vs %.3f (+O vs plain)", ao, a, ro, r)};
}

Outcome distance_trend() {
  auto cell = [](double mu) {
    RunConfig c = method_config(Method::CLM_MI, 3);
    c.sim.distance.mu = mu;
    c.hyper.e = 12.0;
    return trials(c, 5);
  };
  double near = 0.0, far = 0.0;
  for (double mu : {1.0, 2.0, 3.0, 4.0, 5.0}) near += mean(cell(mu), &TrialResult::ari) / 5.0;
  for (double mu : {8.0, 9.0, 10.0}) far += mean(cell(mu), &TrialResult::ari) / 3.0;
  return {near > far, fmt("ARI %.3f (mean <= 5) vs %.3f (mean >= 8)", near, far)};
}

Outcome property_suites() {
  std::vector<std::string> failed;
  Rng rng(110);

  for (double kappa : {0.5, 14.0, 100.0}) {
    const int n = 20000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(vm_logpdf(2 * std::numbers::pi * i / n, {1.0, kappa}));
    if (std::abs(s * 2 * std::numbers::pi / n - 1.0) > 1e-6) failed.push_back("von Mises");
  }

  for (int i = 0; i < 1000; ++i) {
    const ObjectFrame f{{uniform01(rng) * 10 - 5, uniform01(rng) * 10 - 5}, uniform01(rng) * 7 - 3.5};
    const RelativeCoord r{0.1 + uniform01(rng) * 5, uniform01(rng) * 2 * std::numbers::pi};
    const RelativeCoord back = to_relative(to_world(f, r), f);
    if (std::abs(back.l - r.l) > 1e-9 || std::abs(angle_diff(back.theta, r.theta)) > 1e-9) {
      failed.push_back("geometry");
      break;
    }
  }

  for (int t = 0; t < 200; ++t) {
    CrpState s;
    s.alpha = 0.1 + uniform01(rng) * 5;
    for (int k = 0; k < 1 + t % 6; ++k) s.counts.push_back(static_cast<int>(uniform01(rng) * 20));
    double total = 0.0;
    for (double p : crp_predictive(s)) total += p;
    if (std::abs(total - 1.0) > 1e-12) {
      failed.push_back("CRP");
      break;
    }
  }

  for (int t = 0; t < 300; ++t) {
    const int n = 2 + t % 40;
    std::vector<int> p(static_cast<std::size_t>(n)), g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) p[i] = static_cast<int>(uniform01(rng) * 4), g[i] = static_cast<int>(uniform01(rng) * 3);
    if (std::abs(ari(p, g) - oracle::ari_pairs(p, g)) > 1e-12) {
      failed.push_back("ARI");
      break;
    }
  }

  RunConfig small = method_config(Method::CLM_MI, 3);
  small.G = 2;
  small.n_lists = 2;
  small.seg_sweeps = 20;
  small.seg_sweeps_later = 5;
  small.learn.burn_in = 10;
  small.learn.iterations = 20;
  RunArtifacts art;
  const std::string row = results_row(run_pipeline(small, 7, inv(), &art));
  if (art.lm) {
    auto contexts = art.lm->contexts();
    contexts.emplace_back(ClassTrigramLM::kEos, ClassTrigramLM::kFallback);
    for (const auto& [c2, c1] : contexts) {
      double total = 0.0;
      for (int c : art.lm->alphabet()) total += std::exp(art.lm->class_logprob(c2, c1, c));
      if (std::abs(total - 1.0) > 1e-12) {
        failed.push_back("LM normalization");
        break;
      }
    }
  } else {
    failed.push_back("LM missing");
  }

  bool concat = true;
  for (const auto& lists : art.lists)
    for (const auto& l : lists)
      for (std::size_t n = 0; n < art.scenes.size(); ++n) concat = concat && concatenates_to(l.utterances[n], art.scenes[n].phonemes);
  for (std::size_t n = 0; n < art.scenes.size(); ++n) concat = concat && concatenates_to(art.final_words[n], art.scenes[n].phonemes);
  if (!concat) failed.push_back("concatenation");

  if (results_row(run_pipeline(small, 7, inv())) != row) failed.push_back("rerun");

  std::string d = failed.empty() ? "all properties hold" : "failed:";
  for (const auto& f : failed) d += " " + f;
  return {failed.empty(), d};
}

Outcome budget() {
  const auto r = trials(method_config(Method::CLM_MI, 3), 1).front();
  return {r.error.empty() && r.wall_ms <= 600000.0, fmt("%.1f s", r.wall_ms / 1000.0)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"PAR formula", par_table},
      {"FFBS exactness", ffbs_exactness},
      {"sampler correctness", sampler_correctness},
      {"posterior recovery", posterior_recovery},
      {"lexical acquisition", lexical_acquisition},
      {"method ordering", method_ordering},
      {"degradation with J", degradation_with_j},
      {"clue benefit", clue_benefit},
      {"distance trend", distance_trend},
      {"property suites", property_suites},
      {"trial budget", budget},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("[%s] criterion %zu (%s): %s [%.0f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
