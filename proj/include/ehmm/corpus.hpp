#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ehmm/errors.hpp"
#include "ehmm/features.hpp"
#include "ehmm/label.hpp"
#include "ehmm/parallel.hpp"

namespace ehmm {

// Ground-truth channel written by the synthetic generator and read only by
// acceptance checks; training and decoding ignore it.
enum class realization : unsigned char { none, clean, degraded };

struct token {
  label lab;
  int start = 0;  // frame span [start, end)
  int end = 0;
  realization tag = realization::none;
};

struct utterance {
  std::string id;
  std::string features_path;  // as written in the manifest (may be relative)
  std::filesystem::path features_file;  // resolved; empty for in-memory corpora
  std::size_t num_frames = 0;
  std::vector<token> tokens;
};

enum class annotation_mode { plain, contextual };

struct corpus {
  std::vector<utterance> utterances;
  std::set<std::string> inventory;  // base symbols
  annotation_mode mode = annotation_mode::plain;
  context_config context;
  int dim = 0;
};

inline void validate_corpus(const corpus& c) {
  if (c.utterances.empty()) throw data_error("empty corpus");
  for (const auto& utt : c.utterances) {
    if (utt.tokens.empty())
      throw data_error("utterance '" + utt.id + "' has no tokens");
    for (std::size_t i = 0; i < utt.tokens.size(); ++i) {
      const token& tok = utt.tokens[i];
      if (tok.start < 0 || tok.start >= tok.end)
        throw data_error("utterance '" + utt.id + "' token " +
                         std::to_string(i) + " has bad span [" +
                         std::to_string(tok.start) + "," +
                         std::to_string(tok.end) + ")");
      if (i > 0 && tok.start != utt.tokens[i - 1].end)
        throw data_error("utterance '" + utt.id + "' token " +
                         std::to_string(i) + " not contiguous with predecessor");
      if (!c.inventory.count(tok.lab.base))
        throw data_error("utterance '" + utt.id + "' token " +
                         std::to_string(i) + " label base '" + tok.lab.base +
                         "' not in inventory");
      if (c.mode == annotation_mode::plain && tok.lab.context != 0)
        throw data_error("context class on token " + std::to_string(i) +
                         " of '" + utt.id + "' in a plain-mode corpus");
      if (tok.lab.context != 0 && !c.context.is_context_bearing(tok.lab.base))
        throw data_error("context class on non-context-bearing base '" +
                         tok.lab.base + "' in '" + utt.id + "'");
    }
    if (utt.num_frames > 0 &&
        static_cast<std::size_t>(utt.tokens.back().end) > utt.num_frames)
      throw data_error("utterance '" + utt.id + "' tokens end at frame " +
                       std::to_string(utt.tokens.back().end) + " but only " +
                       std::to_string(utt.num_frames) + " frames exist");
  }
}

// --------------------------------------------------------------------------
// Manifest I/O: one JSON record per utterance per line, fields
//   id, features (path relative to the manifest), tokens [{label,start,end,tag?}]
// --------------------------------------------------------------------------

inline corpus load_corpus(const std::filesystem::path& manifest,
                          const context_config& ctx = {}) {
  std::ifstream is(manifest);
  if (!is) throw data_error("cannot open manifest '" + manifest.string() + "'");
  corpus c;
  c.context = ctx;
  const auto base_dir = manifest.parent_path();
  std::string line;
  std::size_t lineno = 0;
  bool any_context = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw data_error("manifest '" + manifest.string() + "' line " +
                       std::to_string(lineno) + ": " + e.what());
    }
    utterance utt;
    try {
      utt.id = rec.at("id").get<std::string>();
      utt.features_path = rec.at("features").get<std::string>();
      for (const auto& jt : rec.at("tokens")) {
        token tok;
        tok.lab = parse_label(jt.at("label").get<std::string>());
        tok.start = jt.at("start").get<int>();
        tok.end = jt.at("end").get<int>();
        if (jt.contains("tag")) {
          const auto tag = jt.at("tag").get<std::string>();
          if (tag == "clean")
            tok.tag = realization::clean;
          else if (tag == "degraded")
            tok.tag = realization::degraded;
          else
            throw data_error("unknown realization tag '" + tag + "'");
        }
        any_context |= tok.lab.context != 0;
        utt.tokens.push_back(tok);
      }
    } catch (const nlohmann::json::exception& e) {
      throw data_error("manifest '" + manifest.string() + "' line " +
                       std::to_string(lineno) + " (utterance '" + utt.id +
                       "'): " + e.what());
    }
    utt.features_file =
        std::filesystem::path(utt.features_path).is_absolute()
            ? std::filesystem::path(utt.features_path)
            : base_dir / utt.features_path;
    const feature_header h = read_feature_header(utt.features_file);
    utt.num_frames = h.frames;
    if (c.dim == 0)
      c.dim = h.dim;
    else if (c.dim != h.dim)
      throw data_error("utterance '" + utt.id + "' has feature dim " +
                       std::to_string(h.dim) + ", corpus uses " +
                       std::to_string(c.dim));
    for (const auto& tok : utt.tokens) c.inventory.insert(tok.lab.base);
    c.utterances.push_back(std::move(utt));
  }
  c.mode = any_context ? annotation_mode::contextual : annotation_mode::plain;
  validate_corpus(c);
  return c;
}

inline void save_corpus(const std::filesystem::path& manifest,
                        const corpus& c) {
  std::ofstream os(manifest);
  if (!os)
    throw data_error("cannot write manifest '" + manifest.string() + "'");
  const auto base_dir = std::filesystem::absolute(manifest).parent_path();
  for (const auto& utt : c.utterances) {
    nlohmann::json toks = nlohmann::json::array();
    for (const auto& tok : utt.tokens) {
      nlohmann::json jt{{"label", tok.lab.str()},
                        {"start", tok.start},
                        {"end", tok.end}};
      if (tok.tag == realization::clean) jt["tag"] = "clean";
      if (tok.tag == realization::degraded) jt["tag"] = "degraded";
      toks.push_back(std::move(jt));
    }
    std::string fpath = utt.features_path;
    if (!utt.features_file.empty()) {
      std::error_code ec;
      const auto rel = std::filesystem::relative(
          std::filesystem::absolute(utt.features_file), base_dir, ec);
      fpath = (ec || rel.empty()) ? utt.features_file.string() : rel.string();
    }
    const nlohmann::json rec{
        {"id", utt.id}, {"features", fpath}, {"tokens", toks}};
    os << rec.dump() << '\n';
  }
  if (!os) throw data_error("short write to '" + manifest.string() + "'");
}

// Loads every referenced feature file, indexed like corpus.utterances.
inline std::vector<feature_sequence> load_all_features(const corpus& c,
                                                       unsigned threads = 1) {
  std::vector<feature_sequence> out(c.utterances.size());
  parallel_for(c.utterances.size(), threads, [&](std::size_t i) {
    out[i] = load_features(c.utterances[i].features_file);
    if (out[i].dim != c.dim)
      throw data_error("feature dim mismatch for utterance '" +
                       c.utterances[i].id + "'");
  });
  return out;
}

// --------------------------------------------------------------------------
// Label algebra over corpora
// --------------------------------------------------------------------------

// Annotates every context-bearing consonant with the class of its following
// vowel; non-vowel or absent successors take the fallback class.
inline corpus contextualize(const corpus& c) {
  if (c.mode != annotation_mode::plain)
    throw data_error("contextualize requires a plain-mode corpus");
  corpus out = c;
  out.mode = annotation_mode::contextual;
  for (auto& utt : out.utterances) {
    for (std::size_t i = 0; i < utt.tokens.size(); ++i) {
      auto& tok = utt.tokens[i];
      if (!c.context.is_context_bearing(tok.lab.base)) continue;
      int cls = c.context.fallback_class;
      if (i + 1 < utt.tokens.size()) {
        const std::string& next = utt.tokens[i + 1].lab.base;
        if (c.context.is_vowel(next)) {
          const auto it = c.context.vowel_class.find(next);
          if (it == c.context.vowel_class.end())
            throw data_error("vowel '" + next + "' missing from context map");
          cls = it->second;
        }
      }
      tok.lab = tok.lab.with_context(cls);
    }
  }
  return out;
}

// Per-token verdicts keyed by (utterance index, token index); entries must
// exist exactly for the unprimed tokens.
struct corpus_verdicts {
  enum : signed char { absent = -1, wrong = 0, correct = 1 };
  std::vector<std::vector<signed char>> v;

  static corpus_verdicts sized_for(const corpus& c) {
    corpus_verdicts out;
    out.v.resize(c.utterances.size());
    for (std::size_t i = 0; i < c.utterances.size(); ++i)
      out.v[i].assign(c.utterances[i].tokens.size(), absent);
    return out;
  }
};

// Marks wrongly-detected tokens primed. Priming is sticky: a primed token is
// never modified, and supplying a verdict for one signals an orchestrator bug.
inline corpus relabel_primed(const corpus& c, const corpus_verdicts& verdicts) {
  if (verdicts.v.size() != c.utterances.size())
    throw data_error("verdict map does not cover the corpus");
  corpus out = c;
  for (std::size_t u = 0; u < out.utterances.size(); ++u) {
    auto& utt = out.utterances[u];
    if (verdicts.v[u].size() != utt.tokens.size())
      throw data_error("verdict map shape mismatch for utterance '" + utt.id +
                       "'");
    for (std::size_t i = 0; i < utt.tokens.size(); ++i) {
      const signed char verdict = verdicts.v[u][i];
      if (utt.tokens[i].lab.primed) {
        if (verdict != corpus_verdicts::absent)
          throw data_error("verdict supplied for primed token " +
                           std::to_string(i) + " of '" + utt.id + "'");
        continue;
      }
      if (verdict == corpus_verdicts::absent)
        throw data_error("missing verdict for unprimed token " +
                         std::to_string(i) + " of '" + utt.id + "'");
      if (verdict == corpus_verdicts::wrong)
        utt.tokens[i].lab = utt.tokens[i].lab.as_primed();
    }
  }
  return out;
}

// Distinct labels on tokens, sorted by canonical string.
inline std::vector<label> label_inventory(const corpus& c) {
  std::set<std::string> seen;
  std::vector<label> out;
  for (const auto& utt : c.utterances)
    for (const auto& tok : utt.tokens)
      if (seen.insert(tok.lab.str()).second) out.push_back(tok.lab);
  if (out.empty()) throw data_error("corpus has no tokens");
  std::sort(out.begin(), out.end(),
            [](const label& a, const label& b) { return a.str() < b.str(); });
  return out;
}

// Number of distinct unprimed labels the annotation scheme can produce:
// |inventory| in plain mode; each context-bearing consonant expands to six
// contextual variants otherwise (36 bases with /p,t,k,f,s,S/ -> 66).
inline std::size_t effective_label_count(const corpus& c) {
  std::size_t bearing = 0;
  for (const auto& b : c.inventory)
    if (c.context.is_context_bearing(b)) ++bearing;
  if (c.mode == annotation_mode::plain) return c.inventory.size();
  return c.inventory.size() - bearing + bearing * kNumContextClasses;
}

}  // namespace ehmm
