#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rescam/geometry.hpp"
#include "rescam/inventory.hpp"
#include "rescam/kernels.hpp"

namespace rescam {

struct ConceptSpec {
  std::string name;  // English label, for reports only
  std::string word;  // romanized location word
  double mean_angle = 0.0;  // radians
  double concentration = 14.0;
};

// Four directional concepts used to generate Experiment I/II data. The angles
// are taken literally (back = 90 deg, right = 180 deg); names are labels only.
inline std::vector<ConceptSpec> default_concepts() {
  return {{"front", "mae", deg2rad(0.0), 14.0},
          {"back", "ushiro", deg2rad(90.0), 14.0},
          {"right", "migi", deg2rad(180.0), 14.0},
          {"left", "hidari", deg2rad(270.0), 14.0}};
}

struct ObjectCategory {
  std::string name;
  std::string word;
};

inline std::vector<ObjectCategory> default_categories() {
  return {{"TV", "terebi"}, {"fan", "seNpuuki"}, {"screen", "sukuriiN"}, {"desk", "tsukue"}, {"PC", "pasokoN"}};
}

// "***" marks where the location phrase goes.
inline const std::array<const char*, 19>& utterance_templates() {
  static const std::array<const char*, 19> t = {
      "*** dane",           "*** dayo",           "*** desu",
      "*** niirune",        "*** niiruyo",        "*** niimasu",
      "*** nikimashita",    "kokowa ***",         "kokononamaewa ***",
      "konobashowa ***",    "kokowa *** dane",    "kokononamaewa *** dane",
      "konobashowa *** dane", "kokowa *** dayo",  "kokononamaewa *** dayo",
      "konobashowa *** dayo", "kokowa *** desu",  "kokononamaewa *** desu",
      "konobashowa *** desu"};
  return t;
}

enum class UtteranceStyle {
  LocationOnly,  // "kokowa mae dane"
  WithObject,    // "kokowa terebi no mae dane"
};

struct GoldUtterance {
  std::vector<std::string> words;
  int location_word = -1;
  int object_word = -1;  // -1 when the utterance names no object
};

inline GoldUtterance render_utterance(std::size_t template_index, const std::string& location_word,
                                      const std::string* object_word, bool use_yori) {
  const auto& templates = utterance_templates();
  if (template_index >= templates.size()) throw std::out_of_range("template index");
  GoldUtterance out;
  std::string tpl = templates[template_index];
  std::size_t pos = 0;
  while (pos <= tpl.size()) {
    auto next = tpl.find(' ', pos);
    if (next == std::string::npos) next = tpl.size();
    std::string tok = tpl.substr(pos, next - pos);
    if (tok == "***") {
      if (object_word != nullptr) {
        out.object_word = static_cast<int>(out.words.size());
        out.words.push_back(*object_word);
        out.words.emplace_back(use_yori ? "yori" : "no");
      }
      out.location_word = static_cast<int>(out.words.size());
      out.words.push_back(location_word);
    } else if (!tok.empty()) {
      out.words.push_back(tok);
    }
    pos = next + 1;
  }
  return out;
}

struct ChannelConfig {
  double p_sub = 0.03;
  double p_ins = 0.01;
  double p_del = 0.01;

  static ChannelConfig noiseless() { return {0.0, 0.0, 0.0}; }
  static ChannelConfig low() { return {0.01, 0.005, 0.005}; }

  void validate() const {
    for (double p : {p_sub, p_ins, p_del})
      if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("channel rates must lie in [0, 1)");
    if (!(p_sub + p_del < 1.0)) throw std::invalid_argument("p_sub + p_del must be below 1");
  }
};

// Stand-in for acoustic model + phoneme recognizer: erases word boundaries and
// applies i.i.d. per-phoneme deletion, substitution and insertion.
inline Phones channel(const std::vector<Phones>& words, const ChannelConfig& cfg, std::size_t alphabet, Rng& rng) {
  cfg.validate();
  Phones clean;
  for (const auto& w : words) clean += w;
  if (clean.empty()) throw std::invalid_argument("channel input is empty");
  std::uniform_int_distribution<int> other(0, static_cast<int>(alphabet) - 2);
  std::uniform_int_distribution<int> any(0, static_cast<int>(alphabet) - 1);
  for (;;) {
    Phones out;
    for (char c : clean) {
      const double u = uniform01(rng);
      if (u < cfg.p_del) {
        // dropped
      } else if (u < cfg.p_del + cfg.p_sub && alphabet > 1) {
        int s = other(rng);
        if (s >= static_cast<std::uint8_t>(c)) ++s;
        out.push_back(static_cast<char>(s));
      } else {
        out.push_back(c);
      }
      if (cfg.p_ins > 0.0 && uniform01(rng) < cfg.p_ins) out.push_back(static_cast<char>(any(rng)));
    }
    if (!out.empty()) return out;
  }
}

struct SceneObject {
  Pose2 position;
  int category = 0;
};

struct Scene {
  int id = 0;
  Pose2 robot;
  std::vector<SceneObject> objects;
  int true_reference = 0;
  int true_concept = 0;
  Pose2 trainer;
  GoldUtterance utterance;
  Phones phonemes;

  // Trainer location relative to every candidate object.
  std::vector<RelativeCoord> relative() const {
    std::vector<RelativeCoord> out;
    out.reserve(objects.size());
    for (const auto& o : objects) out.push_back(to_relative(trainer, ObjectFrame::facing(o.position, robot)));
    return out;
  }

  std::vector<int> categories() const {
    std::vector<int> out;
    for (const auto& o : objects) out.push_back(o.category);
    return out;
  }
};

struct SimConfig {
  std::vector<ConceptSpec> concepts = default_concepts();
  std::vector<ObjectCategory> categories = default_categories();
  int n_per_concept = 19;
  int J = 3;
  DistanceModel distance{1.0, 1.0 / (0.2 * 0.2)};
  UtteranceStyle style = UtteranceStyle::LocationOnly;
  ChannelConfig channel;
  double distractor_min = 0.1;  // non-reference relative distances ~ U[min, max]
  double distractor_max = 5.0;
  double arena = 10.0;  // robot placed uniformly in [-arena, arena]^2

  void validate() const {
    if (J < 1) throw std::invalid_argument("J must be at least 1");
    if (concepts.empty()) throw std::invalid_argument("no concepts to simulate");
    if (n_per_concept < 1) throw std::invalid_argument("n_per_concept must be at least 1");
    if (categories.empty()) throw std::invalid_argument("no object categories");
    if (!(distance.mu > 0.0)) throw std::invalid_argument("distance mean must be positive");
    if (!(distance.lambda > 0.0)) throw std::invalid_argument("distance precision must be positive");
    if (!(distractor_min > 0.0 && distractor_max > distractor_min))
      throw std::invalid_argument("invalid distractor distance range");
    for (const auto& c : concepts)
      if (!(c.concentration > 0.0)) throw std::invalid_argument("concept concentration must be positive");
    channel.validate();
  }
};

namespace detail {

// Places an object so that the trainer's coordinate relative to it is `rel`,
// given fixed trainer and robot positions. Requires |trainer-robot| >= rel.l.
inline Pose2 place_object_for(const RelativeCoord& rel, const Pose2& trainer, const Pose2& robot) {
  const double D = distance(trainer, robot);
  const double s = std::sin(rel.theta), c = std::cos(rel.theta);
  const double disc = D * D - rel.l * rel.l * s * s;
  if (disc < 0.0) throw std::domain_error("relative coordinate not realizable");
  const double r = rel.l * c + std::sqrt(disc);
  // frame coordinates: +y toward the robot
  const double tx = -rel.l * s, ty = rel.l * c;
  const double vfx = 0.0 - tx, vfy = r - ty;
  const double rot = std::atan2(robot.y - trainer.y, robot.x - trainer.x) - std::atan2(vfy, vfx);
  const double cr = std::cos(rot), sr = std::sin(rot);
  return {trainer.x - (cr * tx - sr * ty), trainer.y - (sr * tx + cr * ty)};
}

}  // namespace detail

inline Scene generate_scene(const SimConfig& cfg, int id, int concept_index, std::size_t template_index,
                            const PhonemeInventory& inventory, Rng& rng) {
  const auto& spec = cfg.concepts.at(static_cast<std::size_t>(concept_index));
  Scene sc;
  sc.id = id;
  sc.true_concept = concept_index;
  sc.true_reference = std::uniform_int_distribution<int>(0, cfg.J - 1)(rng);

  std::uniform_real_distribution<double> arena(-cfg.arena, cfg.arena);
  std::uniform_real_distribution<double> robot_dist(2.0, 10.0);
  const double need = cfg.distractor_max + 0.5;
  Pose2 ref_pos;
  for (;;) {
    sc.robot = {arena(rng), arena(rng)};
    const double bearing = uniform01(rng) * kTwoPi;
    const double r = robot_dist(rng);
    ref_pos = {sc.robot.x + r * std::cos(bearing), sc.robot.y + r * std::sin(bearing)};
    double l = 0.0;
    do {
      l = sample_normal(cfg.distance.mu, cfg.distance.lambda, rng);
    } while (l <= 0.01);
    const double theta = vm_sample({spec.mean_angle, spec.concentration}, rng);
    sc.trainer = to_world(ObjectFrame::facing(ref_pos, sc.robot), {l, theta});
    if (cfg.J == 1 || distance(sc.trainer, sc.robot) >= need) break;
  }

  std::uniform_int_distribution<int> category(0, static_cast<int>(cfg.categories.size()) - 1);
  std::uniform_real_distribution<double> dl(cfg.distractor_min, cfg.distractor_max);
  sc.objects.resize(static_cast<std::size_t>(cfg.J));
  for (int j = 0; j < cfg.J; ++j) {
    auto& obj = sc.objects[static_cast<std::size_t>(j)];
    obj.category = category(rng);
    if (j == sc.true_reference) {
      obj.position = ref_pos;
    } else {
      const RelativeCoord rel{dl(rng), uniform01(rng) * kTwoPi};
      obj.position = detail::place_object_for(rel, sc.trainer, sc.robot);
    }
  }

  const std::string* object_word = nullptr;
  if (cfg.style == UtteranceStyle::WithObject)
    object_word = &cfg.categories[static_cast<std::size_t>(sc.objects[static_cast<std::size_t>(sc.true_reference)].category)].word;
  const bool yori = uniform01(rng) < 0.5;
  sc.utterance = render_utterance(template_index, spec.word, object_word, yori);

  std::vector<Phones> words;
  for (const auto& w : sc.utterance.words) words.push_back(inventory.tokenize(w));
  sc.phonemes = channel(words, cfg.channel, inventory.size(), rng);
  return sc;
}

// Concepts are visited round-robin; the k-th scene of each concept uses the
// k-th utterance template (mod 19), so 19 scenes per concept cover every
// template once. Each scene draws from its own derived stream.
inline std::vector<Scene> generate_scenes(const SimConfig& cfg, const PhonemeInventory& inventory, Rng& rng) {
  cfg.validate();
  const int S = static_cast<int>(cfg.concepts.size());
  const int N = S * cfg.n_per_concept;
  const std::uint64_t base = rng();
  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(N));
  const auto n_templates = utterance_templates().size();
  for (int i = 0; i < N; ++i) {
    Rng stream(mix_seed(base, static_cast<std::uint64_t>(i)));
    scenes.push_back(generate_scene(cfg, i, i % S, static_cast<std::size_t>(i / S) % n_templates, inventory, stream));
  }
  return scenes;
}

}  // namespace rescam
