#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rescam/pipeline.hpp"

namespace rescam {

using Json = nlohmann::ordered_json;

// ---- configuration -------------------------------------------------------

inline ChannelConfig channel_preset(std::string_view name) {
  if (name == "noiseless") return ChannelConfig::noiseless();
  if (name == "low") return ChannelConfig::low();
  if (name == "default") return {};
  throw std::invalid_argument("unknown channel preset '" + std::string(name) + "'");
}

namespace detail {

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> keys, const char* where) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* allowed : keys) ok = ok || k == allowed;
    if (!ok) throw std::invalid_argument(std::string("unknown key '") + k + "' in " + where);
  }
}

}  // namespace detail

inline Json to_json(const Hyperparams& h) {
  return {{"mu0", h.mu0},         {"lambda0", h.lambda0}, {"a0", h.a0},         {"b0", h.b0},
          {"nu0", h.nu0},         {"kappa0", h.kappa0},   {"m0", h.m0},         {"sigma0", h.sigma0},
          {"e", h.e},             {"alphaR", h.alphaR},   {"betaR", h.betaR},   {"betaPsi", h.betaPsi},
          {"gammaPi", h.gammaPi}, {"gammaZ", h.gammaZ},   {"alphaO", h.alphaO}, {"betaO", h.betaO}};
}

inline void from_json_into(const Json& j, Hyperparams& h) {
  detail::reject_unknown(j,
                         {"mu0", "lambda0", "a0", "b0", "nu0", "kappa0", "m0", "sigma0", "e", "alphaR", "betaR",
                          "betaPsi", "gammaPi", "gammaZ", "alphaO", "betaO"},
                         "hyper");
  detail::read_opt(j, "mu0", h.mu0);
  detail::read_opt(j, "lambda0", h.lambda0);
  detail::read_opt(j, "a0", h.a0);
  detail::read_opt(j, "b0", h.b0);
  detail::read_opt(j, "nu0", h.nu0);
  detail::read_opt(j, "kappa0", h.kappa0);
  detail::read_opt(j, "m0", h.m0);
  detail::read_opt(j, "sigma0", h.sigma0);
  detail::read_opt(j, "e", h.e);
  detail::read_opt(j, "alphaR", h.alphaR);
  detail::read_opt(j, "betaR", h.betaR);
  detail::read_opt(j, "betaPsi", h.betaPsi);
  detail::read_opt(j, "gammaPi", h.gammaPi);
  detail::read_opt(j, "gammaZ", h.gammaZ);
  detail::read_opt(j, "alphaO", h.alphaO);
  detail::read_opt(j, "betaO", h.betaO);
}

inline Json to_json(const RunConfig& c) {
  return {{"method", method_name(c.method)},
          {"objects", c.objects},
          {"J", c.sim.J},
          {"n_per_concept", c.sim.n_per_concept},
          {"distance_mean", c.sim.distance.mu},
          {"distance_precision", c.sim.distance.lambda},
          {"channel", {{"p_sub", c.sim.channel.p_sub}, {"p_ins", c.sim.channel.p_ins}, {"p_del", c.sim.channel.p_del}}},
          {"G", c.G},
          {"burn_in", c.learn.burn_in},
          {"iterations", c.learn.iterations},
          {"n_lists", c.n_lists},
          {"seg_sweeps", c.seg_sweeps},
          {"seg_sweeps_later", c.seg_sweeps_later},
          {"segmenter",
           {{"discount", c.segmenter.discount},
            {"strength", c.segmenter.strength},
            {"p_cont", c.segmenter.p_cont},
            {"max_word_len", c.segmenter.max_word_len},
            {"interval", c.segmenter.interval},
            {"anneal_from", c.segmenter.anneal_from}}},
          {"lm_delta", c.lm_delta},
          {"n_best", c.n_best},
          {"beam", c.beam},
          {"par_points", c.par_points},
          {"hyper", to_json(c.hyper)}};
}

// Applies the keys present in `j` on top of `c`. The utterance style follows
// the object flag.
inline void from_json_into(const Json& j, RunConfig& c) {
  detail::reject_unknown(j,
                         {"method", "objects", "J", "n_per_concept", "distance_mean", "distance_precision", "channel",
                          "G", "burn_in", "iterations", "n_lists", "seg_sweeps", "seg_sweeps_later", "segmenter", "lm_delta", "n_best",
                          "beam", "par_points", "hyper"},
                         "run config");
  if (auto it = j.find("method"); it != j.end()) c.method = parse_method(it->get<std::string>());
  detail::read_opt(j, "objects", c.objects);
  detail::read_opt(j, "J", c.sim.J);
  detail::read_opt(j, "n_per_concept", c.sim.n_per_concept);
  detail::read_opt(j, "distance_mean", c.sim.distance.mu);
  detail::read_opt(j, "distance_precision", c.sim.distance.lambda);
  if (auto it = j.find("channel"); it != j.end()) {
    if (it->is_string()) {
      c.sim.channel = channel_preset(it->get<std::string>());
    } else {
      detail::reject_unknown(*it, {"p_sub", "p_ins", "p_del"}, "channel");
      detail::read_opt(*it, "p_sub", c.sim.channel.p_sub);
      detail::read_opt(*it, "p_ins", c.sim.channel.p_ins);
      detail::read_opt(*it, "p_del", c.sim.channel.p_del);
    }
  }
  detail::read_opt(j, "G", c.G);
  detail::read_opt(j, "burn_in", c.learn.burn_in);
  detail::read_opt(j, "iterations", c.learn.iterations);
  detail::read_opt(j, "n_lists", c.n_lists);
  detail::read_opt(j, "seg_sweeps", c.seg_sweeps);
  detail::read_opt(j, "seg_sweeps_later", c.seg_sweeps_later);
  if (auto it = j.find("segmenter"); it != j.end()) {
    detail::reject_unknown(*it, {"discount", "strength", "p_cont", "max_word_len", "interval", "anneal_from"},
                           "segmenter");
    detail::read_opt(*it, "discount", c.segmenter.discount);
    detail::read_opt(*it, "strength", c.segmenter.strength);
    detail::read_opt(*it, "p_cont", c.segmenter.p_cont);
    detail::read_opt(*it, "max_word_len", c.segmenter.max_word_len);
    detail::read_opt(*it, "interval", c.segmenter.interval);
    detail::read_opt(*it, "anneal_from", c.segmenter.anneal_from);
  }
  detail::read_opt(j, "lm_delta", c.lm_delta);
  detail::read_opt(j, "n_best", c.n_best);
  detail::read_opt(j, "beam", c.beam);
  detail::read_opt(j, "par_points", c.par_points);
  if (auto it = j.find("hyper"); it != j.end()) from_json_into(*it, c.hyper);
  c.sim.style = c.objects ? UtteranceStyle::WithObject : UtteranceStyle::LocationOnly;
}

inline Json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(p.string() + ": " + e.what());
  }
}

// 64-bit FNV-1a over the canonical config dump.
inline std::uint64_t config_hash(const Json& j) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : j.dump()) h = (h ^ c) * 1099511628211ULL;
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---- results ---------------------------------------------------------------

inline const char* results_header() {
  return "method,objects,J,seed,distance_mean,iterations,ari,par,par_object,ref_accuracy,mi_location,mi_object,"
         "concepts,learned_words,error";
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace detail

// Deterministic row: wall time is kept out so reruns are byte-identical.
inline std::string results_row(const TrialResult& r) {
  std::string words;
  for (std::size_t i = 0; i < r.learned_words.size(); ++i) words += (i ? " " : "") + r.learned_words[i];
  std::ostringstream os;
  os << r.method << ',' << (r.objects ? 1 : 0) << ',' << r.J << ',' << r.seed << ',' << detail::fixed(r.distance_mean)
     << ',' << r.iterations << ',' << detail::fixed(r.ari) << ',' << detail::fixed(r.par) << ','
     << detail::fixed(r.par_object) << ',' << detail::fixed(r.ref_accuracy) << ',' << detail::fixed(r.mi_location)
     << ',' << detail::fixed(r.mi_object) << ',' << r.concepts << ',' << detail::csv_field(words) << ','
     << detail::csv_field(r.error);
  return os.str();
}

inline void write_results_csv(const std::filesystem::path& p, const std::vector<TrialResult>& rows) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << results_header() << '\n';
  for (const auto& r : rows) out << results_row(r) << '\n';
}

inline void write_timings_csv(const std::filesystem::path& p, const std::vector<TrialResult>& rows) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << "method,objects,J,seed,distance_mean,iterations,wall_ms\n";
  for (const auto& r : rows)
    out << r.method << ',' << (r.objects ? 1 : 0) << ',' << r.J << ',' << r.seed << ',' << detail::fixed(r.distance_mean)
        << ',' << r.iterations << ',' << detail::fixed(r.wall_ms) << '\n';
}

// ---- artifacts -------------------------------------------------------------

inline Json to_json(const Scene& s, const PhonemeInventory& inv) {
  Json objs = Json::array();
  for (const auto& o : s.objects) objs.push_back({{"x", o.position.x}, {"y", o.position.y}, {"category", o.category}});
  return {{"id", s.id},
          {"robot", {s.robot.x, s.robot.y}},
          {"trainer", {s.trainer.x, s.trainer.y}},
          {"objects", objs},
          {"true_reference", s.true_reference},
          {"true_concept", s.true_concept},
          {"words", s.utterance.words},
          {"location_word", s.utterance.location_word},
          {"object_word", s.utterance.object_word},
          {"phonemes", inv.detokenize(s.phonemes)}};
}

inline Json words_json(const WordSeq& u, const PhonemeInventory& inv) {
  Json a = Json::array();
  for (const auto& w : u) a.push_back(inv.detokenize(w));
  return a;
}

inline Json to_json(const ConceptState& st, const ConceptData& d, const PhonemeInventory& inv, std::size_t top = 5) {
  auto top_words = [&](const std::vector<double>& logp) {
    std::vector<std::size_t> idx(logp.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return logp[a] > logp[b]; });
    Json a = Json::array();
    for (std::size_t i = 0; i < std::min(top, idx.size()); ++i)
      a.push_back({{"word", inv.detokenize(d.vocab[idx[i]])}, {"p", std::exp(logp[idx[i]])}});
    return a;
  };
  Json concepts = Json::array();
  for (const auto& c : st.concepts)
    concepts.push_back({{"nu_deg", rad2deg(c.direction.nu)},
                        {"kappa", c.direction.kappa},
                        {"scenes", c.scenes},
                        {"top_words", top_words(c.log_phi)}});
  Json j = {{"concepts", concepts},
            {"distance", {{"mu", st.dist.mu}, {"lambda", st.dist.lambda}}},
            {"C", st.C},
            {"pi", st.pi},
            {"z", st.z},
            {"log_posterior", st.log_posterior},
            {"background_top_words", top_words(st.log_psi)}};
  if (st.with_objects) {
    Json cats = Json::array();
    for (std::size_t k = 0; k < st.log_phiO.size(); ++k)
      cats.push_back({{"v", std::exp(st.log_vO[k])}, {"top_words", top_words(st.log_phiO[k])}});
    j["object_categories"] = cats;
    j["CO"] = st.CO;
    j["zO"] = st.zO;
  }
  return j;
}

inline Json to_json(const ClassTrigramLM& lm, const PhonemeInventory& inv) {
  Json words = Json::array();
  for (const auto& [w, cc] : lm.word_table())
    words.push_back({{"word", inv.detokenize(w)}, {"class", cc.first}, {"count", cc.second}});
  Json tri = Json::array();
  for (const auto& t : lm.trigrams()) tri.push_back({t.c2, t.c1, t.c, t.count});
  return {{"kind", lm.kind() == LmKind::ClassTrigram ? "class" : "word"},
          {"delta", lm.delta()},
          {"base", {{"alphabet", lm.base().alphabet}, {"p_cont", lm.base().p_cont}}},
          {"words", words},
          {"trigrams", tri}};
}

inline ClassTrigramLM lm_from_json(const Json& j, const PhonemeInventory& inv) {
  std::vector<std::pair<Phones, std::pair<int, double>>> words;
  for (const auto& w : j.at("words"))
    words.push_back({inv.tokenize(w.at("word").get<std::string>()), {w.at("class").get<int>(), w.at("count").get<double>()}});
  std::vector<ClassTrigramLM::Trigram> tri;
  for (const auto& t : j.at("trigrams"))
    tri.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>(), t.at(3).get<double>()});
  const auto& b = j.at("base");
  return ClassTrigramLM::from_parts(j.at("delta").get<double>(),
                                    j.at("kind").get<std::string>() == "class" ? LmKind::ClassTrigram : LmKind::WordTrigram,
                                    {b.at("alphabet").get<std::size_t>(), b.at("p_cont").get<double>()}, words, tri);
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

// Writes the per-run artifacts: scenes.jsonl, lists.jsonl, state.json, lexicon.json, lm.json.
inline void write_artifacts(const std::filesystem::path& dir, const RunArtifacts& a, const PhonemeInventory& inv) {
  std::filesystem::create_directories(dir);
  std::string scenes;
  for (const auto& s : a.scenes) scenes += to_json(s, inv).dump() + "\n";
  write_text(dir / "scenes.jsonl", scenes);

  std::string lists;
  for (std::size_t g = 0; g < a.lists.size(); ++g)
    for (std::size_t k = 0; k < a.lists[g].size(); ++k) {
      Json utt = Json::array();
      for (const auto& u : a.lists[g][k].utterances) utt.push_back(words_json(u, inv));
      lists += Json{{"iteration", g},
                    {"list", k},
                    {"selected", g < a.selected.size() && a.selected[g] == static_cast<int>(k)},
                    {"score", a.lists[g][k].score},
                    {"utterances", utt}}
                   .dump() +
               "\n";
    }
  Json final_utt = Json::array();
  for (const auto& u : a.final_words) final_utt.push_back(words_json(u, inv));
  lists += Json{{"iteration", "final"}, {"utterances", final_utt}}.dump() + "\n";
  write_text(dir / "lists.jsonl", lists);

  write_text(dir / "state.json", to_json(a.state, a.data, inv).dump(2) + "\n");

  // Lexicon: words of the final list with counts.
  std::map<Phones, int> counts;
  for (const auto& u : a.final_words)
    for (const auto& w : u) ++counts[w];
  Json lex = Json::array();
  for (const auto& [w, c] : counts) lex.push_back({{"word", inv.detokenize(w)}, {"count", c}});
  write_text(dir / "lexicon.json", lex.dump(2) + "\n");
  if (a.lm) write_text(dir / "lm.json", to_json(*a.lm, inv).dump() + "\n");
}

}  // namespace rescam
