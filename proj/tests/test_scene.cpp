#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "rescam/evaluation.hpp"
#include "rescam/scene.hpp"

using namespace rescam;
using Catch::Matchers::WithinAbs;

namespace {

std::string joined(const GoldUtterance& u) {
  std::string s;
  for (const auto& w : u.words) s += (s.empty() ? "" : " ") + w;
  return s;
}

std::size_t template_of(const char* text) {
  const auto& t = utterance_templates();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (std::string(t[i]) == text) return i;
  throw std::logic_error("unknown template");
}

}  // namespace

TEST_CASE("default corpus has 76 scenes, 19 per concept, every template once", "[scene]") {
  const PhonemeInventory inv;
  SimConfig cfg;
  Rng rng(1);
  const auto scenes = generate_scenes(cfg, inv, rng);
  REQUIRE(scenes.size() == 76);
  std::map<std::pair<int, std::string>, int> seen;
  for (const auto& s : scenes) {
    CHECK(static_cast<int>(s.objects.size()) == cfg.J);
    CHECK(s.true_reference >= 0);
    CHECK(s.true_reference < cfg.J);
    ++seen[{s.true_concept, joined(s.utterance)}];
    CHECK(s.utterance.words[static_cast<std::size_t>(s.utterance.location_word)] ==
          cfg.concepts[static_cast<std::size_t>(s.true_concept)].word);
    CHECK(inv.contains(s.phonemes));
  }
  CHECK(seen.size() == 76);
}

TEST_CASE("single object is always the reference", "[scene]") {
  const PhonemeInventory inv;
  SimConfig cfg;
  cfg.J = 1;
  Rng rng(2);
  for (const auto& s : generate_scenes(cfg, inv, rng)) CHECK(s.true_reference == 0);
}

TEST_CASE("gold geometry follows the concept distributions", "[scene]") {
  const PhonemeInventory inv;
  SimConfig cfg;
  cfg.n_per_concept = 2500;
  cfg.J = 3;
  Rng rng(3);
  const auto scenes = generate_scenes(cfg, inv, rng);
  const int S = static_cast<int>(cfg.concepts.size());
  std::vector<double> c(S), s(S), l(S);
  std::vector<int> n(S);
  for (const auto& sc : scenes) {
    const auto rel = sc.relative()[static_cast<std::size_t>(sc.true_reference)];
    c[sc.true_concept] += std::cos(rel.theta);
    s[sc.true_concept] += std::sin(rel.theta);
    l[sc.true_concept] += rel.l;
    ++n[sc.true_concept];
  }
  for (int k = 0; k < S; ++k) {
    INFO("concept " << cfg.concepts[k].word);
    CHECK(n[k] == 2500);
    CHECK(std::abs(rad2deg(angle_diff(std::atan2(s[k], c[k]), cfg.concepts[k].mean_angle))) < 3.0);
    CHECK_THAT(l[k] / n[k], WithinAbs(1.0, 0.02));
  }
}

TEST_CASE("distractors stay within the configured relative range", "[scene]") {
  const PhonemeInventory inv;
  SimConfig cfg;
  cfg.J = 10;
  Rng rng(8);
  for (const auto& sc : generate_scenes(cfg, inv, rng)) {
    const auto rel = sc.relative();
    for (int j = 0; j < cfg.J; ++j) {
      if (j == sc.true_reference) continue;
      CHECK(rel[j].l >= cfg.distractor_min - 1e-9);
      CHECK(rel[j].l <= cfg.distractor_max + 1e-9);
    }
  }
}

TEST_CASE("utterance rendering", "[scene]") {
  const std::string fan = "seNpuuki";
  CHECK(joined(render_utterance(template_of("konobashowa *** desu"), "migi", nullptr, false)) == "konobashowa migi desu");
  CHECK(joined(render_utterance(template_of("*** niiruyo"), "hidari", &fan, true)) == "seNpuuki yori hidari niiruyo");
  const auto u = render_utterance(template_of("*** dane"), "mae", nullptr, false);
  CHECK(joined(u) == "mae dane");
  CHECK(u.location_word == 0);
  CHECK(u.object_word == -1);
  const auto o = render_utterance(template_of("kokowa *** dane"), "mae", &fan, false);
  CHECK(joined(o) == "kokowa seNpuuki no mae dane");
  CHECK(o.object_word == 1);
  CHECK(o.location_word == 3);
  CHECK_THROWS_AS(render_utterance(19, "mae", nullptr, false), std::out_of_range);
}

TEST_CASE("phoneme channel", "[scene]") {
  const PhonemeInventory inv;
  Rng rng(9);
  const std::vector<Phones> words{inv.tokenize("kokowa"), inv.tokenize("mae"), inv.tokenize("dane")};
  SECTION("noiseless concatenates") {
    CHECK(inv.detokenize(channel(words, ChannelConfig::noiseless(), inv.size(), rng)) == "kokowamaedane");
  }
  SECTION("near-total deletion still yields output") {
    for (int i = 0; i < 100; ++i) CHECK_FALSE(channel(words, {0.0, 0.0, 0.99}, inv.size(), rng).empty());
    CHECK_THROWS_AS(channel(words, {0.0, 0.0, 1.0}, inv.size(), rng), std::invalid_argument);
  }
  SECTION("substitution rate shows up as edit rate") {
    const Phones clean = words[0] + words[1] + words[2];
    double total = 0.0;
    const int runs = 10000;
    for (int i = 0; i < runs; ++i) {
      const Phones out = channel(words, {0.05, 0.0, 0.0}, inv.size(), rng);
      CHECK(inv.contains(out));
      total += static_cast<double>(levenshtein(out, clean)) / static_cast<double>(clean.size());
    }
    CHECK_THAT(total / runs, WithinAbs(0.05, 0.01));
  }
}

TEST_CASE("generation is reproducible and validated", "[scene]") {
  const PhonemeInventory inv;
  SimConfig cfg;
  Rng a(5), b(5);
  const auto x = generate_scenes(cfg, inv, a);
  const auto y = generate_scenes(cfg, inv, b);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x[i].phonemes == y[i].phonemes);
    CHECK(x[i].trainer.x == y[i].trainer.x);
    CHECK(x[i].objects.back().position.y == y[i].objects.back().position.y);
  }
  cfg.J = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("simulation config validation", "[scene]") {
  SimConfig cfg;
  cfg.distance.mu = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SimConfig{};
  cfg.distance.lambda = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SimConfig{};
  cfg.distractor_max = cfg.distractor_min;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SimConfig{};
  cfg.n_per_concept = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
