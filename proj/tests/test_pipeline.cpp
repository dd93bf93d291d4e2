#include <catch_amalgamated.hpp>

#include "rescam/io.hpp"
#include "rescam/pipeline.hpp"

using namespace rescam;

namespace {

const PhonemeInventory& inv() {
  static const PhonemeInventory i;
  return i;
}

RunConfig small_config(Method m) {
  RunConfig c;
  c.method = m;
  c.G = 2;
  c.n_lists = 2;
  c.seg_sweeps = 10;
  c.seg_sweeps_later = 3;
  c.learn.burn_in = 10;
  c.learn.iterations = 20;
  return c;
}

}  // namespace

TEST_CASE("method names", "[pipeline]") {
  for (Method m : {Method::Baseline, Method::MI, Method::CLM, Method::CLM_MI, Method::TrueWords})
    CHECK(parse_method(method_name(m)) == m);
  CHECK(parse_method("ReSCAM") == Method::CLM_MI);
  CHECK_THROWS_AS(parse_method("clm"), std::invalid_argument);
  // the four segmenting methods differ only in list selection and trigram kind
  CHECK(uses_mi_selection(Method::MI));
  CHECK_FALSE(uses_mi_selection(Method::CLM));
  CHECK(lm_kind(Method::MI) == LmKind::WordTrigram);
  CHECK(lm_kind(Method::CLM_MI) == LmKind::ClassTrigram);
}

TEST_CASE("config validation aborts before compute", "[pipeline]") {
  RunConfig c;
  c.G = 0;
  CHECK_THROWS_AS(run_pipeline(c, 1, inv()), std::invalid_argument);
  c = RunConfig{};
  c.objects = true;  // location-only utterances carry no object words
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = RunConfig{};
  c.learn.burn_in = c.learn.iterations;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = RunConfig{};
  c.sim.J = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("config JSON", "[pipeline]") {
  RunConfig c = small_config(Method::CLM);
  c.objects = true;
  c.sim.style = UtteranceStyle::WithObject;
  c.sim.J = 7;
  c.hyper.e = 12.0;
  RunConfig back;
  from_json_into(Json::parse(to_json(c).dump()), back);
  CHECK(to_json(back) == to_json(c));
  CHECK(back.sim.style == UtteranceStyle::WithObject);
  CHECK(config_hash(to_json(back)) == config_hash(to_json(c)));
  CHECK(config_hash(to_json(RunConfig{})) != config_hash(to_json(c)));
  CHECK(hex64(config_hash(to_json(c))).size() == 16);

  RunConfig d;
  from_json_into(Json::parse(R"({"channel": "noiseless", "hyper": {"e": 12}})"), d);
  CHECK(d.sim.channel.p_sub == 0.0);
  CHECK(d.hyper.e == 12.0);
  CHECK_THROWS_AS(from_json_into(Json::parse(R"({"sweeps": 3})"), d), std::invalid_argument);
  CHECK_THROWS_AS(from_json_into(Json::parse(R"({"hyper": {"gamma": 1}})"), d), std::invalid_argument);
  CHECK_THROWS_AS(from_json_into(Json::parse(R"({"channel": "loud"})"), d), std::invalid_argument);
  CHECK_THROWS_AS(from_json_into(Json::parse(R"({"method": "LDA"})"), d), std::invalid_argument);
}

TEST_CASE("a single outer iteration segments once and learns once", "[pipeline]") {
  RunConfig c = small_config(Method::CLM_MI);
  c.G = 1;
  RunArtifacts art;
  const auto r = run_pipeline(c, 3, inv(), &art);
  CHECK(r.error.empty());
  CHECK_FALSE(art.lm.has_value());
  CHECK(art.lists.empty());
  CHECK(art.selected.empty());
  REQUIRE(art.final_words.size() == art.scenes.size());
  for (std::size_t n = 0; n < art.scenes.size(); ++n) CHECK(concatenates_to(art.final_words[n], art.scenes[n].phonemes));
  CHECK(r.ari >= -1.0);
  CHECK(r.ari <= 1.0);
}

TEST_CASE("outer iterations keep one list per step", "[pipeline]") {
  RunConfig c = small_config(Method::CLM_MI);
  c.G = 3;
  RunArtifacts art;
  run_pipeline(c, 4, inv(), &art);
  REQUIRE(art.lists.size() == 2);
  REQUIRE(art.selected.size() == 2);
  for (std::size_t g = 0; g < 2; ++g) {
    CHECK(art.lists[g].size() == 2);
    CHECK(art.selected[g] >= 0);
    CHECK(art.selected[g] < 2);
  }
  CHECK(art.lm.has_value());

  c.method = Method::CLM;
  RunArtifacts single;
  run_pipeline(c, 4, inv(), &single);
  for (const auto& l : single.lists) CHECK(l.size() == 1);
}

TEST_CASE("true words learn from the gold segmentation", "[pipeline]") {
  RunConfig c = small_config(Method::TrueWords);
  c.sim.channel = ChannelConfig::noiseless();
  RunArtifacts art;
  run_pipeline(c, 5, inv(), &art);
  for (std::size_t n = 0; n < art.scenes.size(); ++n) {
    REQUIRE(art.final_words[n].size() == art.scenes[n].utterance.words.size());
    for (std::size_t i = 0; i < art.final_words[n].size(); ++i)
      CHECK(inv().detokenize(art.final_words[n][i]) == art.scenes[n].utterance.words[i]);
  }
}

TEST_CASE("experiment grids", "[pipeline]") {
  ExperimentConfig ex;
  for (std::uint64_t s = 1; s <= 10; ++s) ex.seeds.push_back(s);
  CHECK(experiment_grid(ex).size() == 150);
  ex.experiment = Experiment::II;
  const auto two = experiment_grid(ex);
  CHECK(two.size() == 60);
  for (const auto& [c, s] : two) {
    CHECK(c.method == Method::CLM_MI);
    CHECK(c.sim.style == UtteranceStyle::WithObject);
  }
  ex.experiment = Experiment::AppendixB;
  const auto b = experiment_grid(ex);
  CHECK(b.size() == 200);
  for (const auto& [c, s] : b) CHECK(c.hyper.e == 12.0);
  CHECK(parse_experiment("B") == Experiment::AppendixB);
  CHECK_THROWS_AS(parse_experiment("III"), std::invalid_argument);
}

TEST_CASE("reruns are byte-identical", "[pipeline]") {
  ExperimentConfig ex;
  ex.base = small_config(Method::CLM_MI);
  ex.seeds = {11, 12};
  ex.J_values = {3};
  ex.experiment = Experiment::I;
  auto rows = [&](unsigned workers) {
    ex.workers = workers;
    std::string out;
    for (const auto& r : run_experiment(ex, inv())) out += results_row(r) + "\n";
    return out;
  };
  const std::string a = rows(1);
  CHECK(a == rows(1));
  CHECK(a == rows(3));
  CHECK(std::count(a.begin(), a.end(), '\n') == 10);
}
