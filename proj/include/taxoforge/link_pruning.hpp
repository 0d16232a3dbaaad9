#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "taxoforge/embedding.hpp"
#include "taxoforge/error.hpp"
#include "taxoforge/io.hpp"
#include "taxoforge/random.hpp"
#include "taxoforge/taxonomy.hpp"
#include "taxoforge/text.hpp"

namespace taxoforge {

// --- labeled pairs ----------------------------------------------------------

struct LinkSample {
  std::string child;
  std::string parent;
  int label = 0;  // 1 valid edge, 0 invalid

  bool operator==(const LinkSample&) const = default;
};

struct NegativeShortfall {
  NodeId node;
  std::size_t wanted = 0;
  std::size_t drawn = 0;
};

struct PairSet {
  std::vector<LinkSample> samples;
  std::vector<NegativeShortfall> shortfalls;
};

/// One positive per edge plus, per node, up to `negatives_per_positive`
/// negatives whose parent is a candidate parent (root included) lying neither
/// on the node's root path nor inside its subtree. Samples are emitted in
/// node-id order, positive first.
inline PairSet generate_pairs(const Taxonomy& t, std::size_t negatives_per_positive, std::uint64_t seed) {
  const auto candidates = t.candidate_parents(/*include_root=*/true);
  if (candidates.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "need at least two candidate parents to generate pairs");
  }
  Rng rng(seed);
  PairSet out;
  for (const auto& n : t.nodes()) {
    if (!n.parent) continue;
    out.samples.push_back({n.label, t.label(*n.parent), 1});

    const auto path = t.path_to_root(n.id);
    std::vector<NodeId> eligible;
    for (NodeId c : candidates) {
      if (std::find(path.begin(), path.end(), c) != path.end()) continue;
      if (t.in_subtree(c, n.id)) continue;
      eligible.push_back(c);
    }
    const std::size_t take = std::min(negatives_per_positive, eligible.size());
    // Partial Fisher-Yates: sampling without replacement.
    for (std::size_t k = 0; k < take; ++k) {
      std::size_t pick = k + uniform_index(rng, eligible.size() - k);
      std::swap(eligible[k], eligible[pick]);
      out.samples.push_back({n.label, t.label(eligible[k]), 0});
    }
    if (take < negatives_per_positive) out.shortfalls.push_back({n.id, negatives_per_positive, take});
  }
  return out;
}

inline std::string format_pairs(const std::vector<LinkSample>& samples) {
  std::string out;
  for (const auto& s : samples) out += s.child + "\t" + s.parent + "\t" + std::to_string(s.label) + "\n";
  return out;
}

inline std::vector<LinkSample> parse_pairs(const std::vector<std::string>& lines) {
  std::vector<LinkSample> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split(lines[i], '\t');
    if (f.size() != 3 || (f[2] != "0" && f[2] != "1")) {
      throw Error(ErrorCode::kParse, "pair line " + std::to_string(i + 1) + ": expected child<TAB>parent<TAB>{0|1}");
    }
    LinkSample s{normalize_phrase(f[0]), normalize_phrase(f[1]), f[2] == "1" ? 1 : 0};
    if (s.child.empty() || s.parent.empty() || s.child == s.parent) {
      throw Error(ErrorCode::kParse, "pair line " + std::to_string(i + 1) + ": invalid labels");
    }
    out.push_back(std::move(s));
  }
  return out;
}

// --- features ---------------------------------------------------------------

struct FeatureVector {
  static constexpr std::size_t kSize = 6;

  double cosine_sim = 0;
  double trigram_jaccard = 0;
  double token_overlap = 0;
  double substring_flag = 0;
  double len_diff = 0;
  double parent_depth_norm = 0;

  std::array<double, kSize> as_array() const {
    return {cosine_sim, trigram_jaccard, token_overlap, substring_flag, len_diff, parent_depth_norm};
  }
};

/// Set of code-point trigrams; labels shorter than three code points
/// contribute themselves as a single gram.
inline std::set<std::string> char_trigrams(std::string_view label) {
  auto cps = utf8_code_points(label);
  std::set<std::string> grams;
  if (cps.empty()) return grams;
  if (cps.size() < 3) {
    grams.emplace(label);
    return grams;
  }
  for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
    const char* b = cps[i].data();
    const char* e = cps[i + 2].data() + cps[i + 2].size();
    grams.emplace(b, e);
  }
  return grams;
}

template <typename Set>
double jaccard(const Set& a, const Set& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& x : a) shared += b.count(x);
  return static_cast<double>(shared) / static_cast<double>(a.size() + b.size() - shared);
}

/// Label-only features; cosine_sim and parent_depth_norm are left at 0.
inline FeatureVector lexical_features(std::string_view child, std::string_view parent) {
  FeatureVector f;
  f.trigram_jaccard = jaccard(char_trigrams(child), char_trigrams(parent));
  auto ct = tokenize(child);
  auto pt = tokenize(parent);
  f.token_overlap = jaccard(std::set<std::string>(ct.begin(), ct.end()), std::set<std::string>(pt.begin(), pt.end()));
  f.substring_flag = (child.find(parent) != std::string_view::npos || parent.find(child) != std::string_view::npos) ? 1.0 : 0.0;
  const double lc = static_cast<double>(utf8_code_points(child).size());
  const double lp = static_cast<double>(utf8_code_points(parent).size());
  const double mx = std::max(lc, lp);
  f.len_diff = mx > 0 ? std::abs(lc - lp) / mx : 0.0;
  return f;
}

/// Computes pair features against the live state of a taxonomy, caching
/// phrase vectors by label.
class FeatureContext {
 public:
  FeatureContext(const Taxonomy& taxonomy, const EmbeddingModel* model) : taxonomy_(taxonomy), model_(model) {}

  const Taxonomy& taxonomy() const { return taxonomy_; }

  FeatureVector features(std::string_view child, std::string_view parent) const {
    FeatureVector f = lexical_features(child, parent);
    if (model_) {
      const auto& a = vector_of(child);
      const auto& b = vector_of(parent);
      if (!a.degenerate && !b.degenerate) f.cosine_sim = cosine(a, b);
    }
    const auto max_depth = taxonomy_stats_depth();
    if (auto pid = taxonomy_.find(parent); pid && max_depth > 0) {
      f.parent_depth_norm = std::min(1.0, static_cast<double>(taxonomy_.depth(*pid)) / static_cast<double>(max_depth));
    }
    return f;
  }

 private:
  const PhraseVector& vector_of(std::string_view label) const {
    auto it = cache_.find(std::string(label));
    if (it != cache_.end()) return it->second;
    return cache_.emplace(std::string(label), embed(*model_, label)).first->second;
  }

  std::size_t taxonomy_stats_depth() const {
    if (!depth_revision_ || *depth_revision_ != taxonomy_.revision()) {
      max_depth_ = taxonomy_stats(taxonomy_).max_depth;
      depth_revision_ = taxonomy_.revision();
    }
    return max_depth_;
  }

  const Taxonomy& taxonomy_;
  const EmbeddingModel* model_;
  mutable std::unordered_map<std::string, PhraseVector> cache_;
  mutable std::optional<std::uint64_t> depth_revision_;
  mutable std::size_t max_depth_ = 0;
};

// --- scorers ------------------------------------------------------------------

/// Probability that `parent` is a valid parent of `child`.
class LinkScorer {
 public:
  virtual ~LinkScorer() = default;
  virtual double score(std::string_view child, std::string_view parent, const FeatureVector& features) const = 0;
};

/// Wraps any callable as a scorer; outputs are clamped to [0, 1].
class FunctionScorer : public LinkScorer {
 public:
  using Fn = std::function<double(std::string_view, std::string_view, const FeatureVector&)>;
  explicit FunctionScorer(Fn fn) : fn_(std::move(fn)) {}

  double score(std::string_view child, std::string_view parent, const FeatureVector& f) const override {
    return std::clamp(fn_(child, parent, f), 0.0, 1.0);
  }

 private:
  Fn fn_;
};

using LogisticWeights = std::array<double, FeatureVector::kSize + 1>;  // features then bias

inline double logistic_logit(const LogisticWeights& w, const std::array<double, FeatureVector::kSize>& x) {
  double z = w.back();
  for (std::size_t i = 0; i < x.size(); ++i) z += w[i] * x[i];
  return z;
}

/// Mean log-loss over the set.
inline double logistic_loss(const LogisticWeights& w, const std::vector<std::array<double, FeatureVector::kSize>>& xs,
                            const std::vector<int>& ys) {
  double total = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double z = logistic_logit(w, xs[i]);
    total -= ys[i] == 1 ? log_sigmoid(z) : log_sigmoid(-z);
  }
  return total / static_cast<double>(xs.size());
}

inline LogisticWeights logistic_gradient(const LogisticWeights& w,
                                         const std::vector<std::array<double, FeatureVector::kSize>>& xs,
                                         const std::vector<int>& ys) {
  LogisticWeights g{};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = sigmoid(logistic_logit(w, xs[i])) - ys[i];
    for (std::size_t k = 0; k < FeatureVector::kSize; ++k) g[k] += r * xs[i][k];
    g.back() += r;
  }
  for (auto& v : g) v /= static_cast<double>(xs.size());
  return g;
}

/// Reference link scorer: logistic regression over FeatureVector.
class LogisticLinkScorer : public LinkScorer {
 public:
  LogisticLinkScorer() = default;
  explicit LogisticLinkScorer(LogisticWeights w) : weights_(w) {}

  double score(std::string_view, std::string_view, const FeatureVector& f) const override {
    return sigmoid(logistic_logit(weights_, f.as_array()));
  }

  const LogisticWeights& weights() const { return weights_; }
  /// Training-set loss before training and after each epoch.
  const std::vector<double>& loss_history() const { return loss_history_; }

  std::string serialize() const {
    std::ostringstream out;
    out << "taxoforge-scorer v1\n";
    char buf[40];
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      auto res = std::to_chars(buf, buf + sizeof(buf), weights_[i], std::chars_format::general, 17);
      out << (i ? " " : "") << std::string_view(buf, res.ptr - buf);
    }
    out << "\n";
    return out.str();
  }

  static LogisticLinkScorer deserialize(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string header;
    if (!std::getline(in, header) || header != "taxoforge-scorer v1") {
      throw Error(ErrorCode::kParse, "not a taxoforge-scorer v1 file");
    }
    LogisticWeights w{};
    for (auto& v : w) {
      if (!(in >> v)) throw Error(ErrorCode::kParse, "scorer file truncated");
    }
    return LogisticLinkScorer(w);
  }

  /// Seeded SGD on mean log-loss. An epoch whose pass would raise the
  /// training loss is discarded and retried at half the rate, so the loss
  /// history never increases.
  static LogisticLinkScorer fit(const std::vector<std::array<double, FeatureVector::kSize>>& xs,
                                const std::vector<int>& ys, int epochs, double lr, std::uint64_t seed) {
    if (xs.empty() || xs.size() != ys.size()) throw Error(ErrorCode::kInvalidArgument, "no training samples");
    const bool has_pos = std::find(ys.begin(), ys.end(), 1) != ys.end();
    const bool has_neg = std::find(ys.begin(), ys.end(), 0) != ys.end();
    if (!has_pos || !has_neg) throw Error(ErrorCode::kInvalidArgument, "scorer training needs both classes");
    if (!(lr > 0) || epochs < 0) throw Error(ErrorCode::kInvalidArgument, "bad scorer hyperparameters");

    Rng rng(seed);
    LogisticLinkScorer model;
    double loss = logistic_loss(model.weights_, xs, ys);
    model.loss_history_.push_back(loss);
    std::vector<std::size_t> order(xs.size());
    double rate = lr;
    for (int epoch = 0; epoch < epochs; ++epoch) {
      std::iota(order.begin(), order.end(), 0);
      shuffle(std::span<std::size_t>(order), rng);
      for (int attempt = 0; attempt < 40; ++attempt) {
        LogisticWeights w = model.weights_;
        for (auto i : order) {
          const double r = sigmoid(logistic_logit(w, xs[i])) - ys[i];
          for (std::size_t k = 0; k < FeatureVector::kSize; ++k) w[k] -= rate * r * xs[i][k];
          w.back() -= rate * r;
        }
        const double next = logistic_loss(w, xs, ys);
        if (next <= loss) {
          model.weights_ = w;
          loss = next;
          break;
        }
        rate *= 0.5;
      }
      model.loss_history_.push_back(loss);
    }
    return model;
  }

 private:
  LogisticWeights weights_{};
  std::vector<double> loss_history_;
};

/// Featurizes labeled pairs against `t`/`m` and fits the logistic scorer.
inline LogisticLinkScorer fit_reference_scorer(const std::vector<LinkSample>& samples, const Taxonomy& t,
                                               const EmbeddingModel* m, int epochs, double lr, std::uint64_t seed) {
  FeatureContext ctx(t, m);
  std::vector<std::array<double, FeatureVector::kSize>> xs;
  std::vector<int> ys;
  for (const auto& s : samples) {
    xs.push_back(ctx.features(s.child, s.parent).as_array());
    ys.push_back(s.label);
  }
  return LogisticLinkScorer::fit(xs, ys, epochs, lr, seed);
}

// --- pruning ------------------------------------------------------------------

struct ScoredEdge {
  NodeId child;
  NodeId parent;
  double score = 0;
};

struct Reattachment {
  NodeId child;
  NodeId from;
  NodeId to;
  double score = 0;
  bool low_confidence = false;
};

struct PruneReport {
  double threshold = 0.5;
  std::vector<ScoredEdge> scored;
  std::vector<NodeId> invalid;
  std::vector<Reattachment> moves;
  std::vector<NodeId> unresolvable;

  nlohmann::ordered_json to_json(const Taxonomy& t) const {
    nlohmann::ordered_json j;
    j["threshold"] = threshold;
    j["scored_edges"] = scored.size();
    j["invalid"] = nlohmann::json::array();
    for (auto id : invalid) j["invalid"].push_back(t.label(id));
    j["moves"] = nlohmann::json::array();
    for (const auto& mv : moves) {
      j["moves"].push_back({{"child", t.label(mv.child)},
                            {"from", t.label(mv.from)},
                            {"to", t.label(mv.to)},
                            {"score", mv.score},
                            {"low_confidence", mv.low_confidence}});
    }
    j["unresolvable"] = nlohmann::json::array();
    for (auto id : unresolvable) j["unresolvable"].push_back(t.label(id));
    return j;
  }
};

/// Scores every edge, marks those under `threshold` invalid, then re-hangs
/// each invalid child (ascending id) under its best-scoring candidate parent.
/// Candidates are non-root nodes with children, minus the child's own
/// subtree, evaluated against the taxonomy as it stands at that moment.
inline PruneReport prune_and_reattach(Taxonomy& t, const LinkScorer& scorer, const EmbeddingModel* m,
                                      double threshold = 0.5, bool exempt_top_level = true) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorCode::kInvalidArgument, "threshold must lie in (0, 1)");
  FeatureContext ctx(t, m);
  auto score_pair = [&](NodeId child, NodeId parent) {
    const auto& c = t.label(child);
    const auto& p = t.label(parent);
    return std::clamp(scorer.score(c, p, ctx.features(c, p)), 0.0, 1.0);
  };

  PruneReport report;
  report.threshold = threshold;
  for (const auto& n : t.nodes()) {
    if (!n.parent) continue;
    if (exempt_top_level && *n.parent == kRootId) continue;
    const double s = score_pair(n.id, *n.parent);
    report.scored.push_back({n.id, *n.parent, s});
    if (s < threshold) report.invalid.push_back(n.id);
  }

  for (NodeId k : report.invalid) {
    std::optional<NodeId> best;
    double best_score = -1;
    for (NodeId c : t.candidate_parents(/*include_root=*/false)) {
      if (c == k || t.in_subtree(c, k)) continue;
      const double s = score_pair(k, c);
      if (s > best_score) {
        best = c;
        best_score = s;
      }
    }
    if (!best) {
      report.unresolvable.push_back(k);
      continue;
    }
    NodeId from = *t.parent(k);
    t.move_node(k, *best);
    report.moves.push_back({k, from, *best, best_score, best_score < threshold});
  }
  return report;
}

// --- suggestions ----------------------------------------------------------------

enum class SuggestionStatus { kPending, kApproved, kRejected };
enum class Decision { kApprove, kReject };

inline std::string_view to_string(SuggestionStatus s) {
  switch (s) {
    case SuggestionStatus::kPending: return "pending";
    case SuggestionStatus::kApproved: return "approved";
    case SuggestionStatus::kRejected: return "rejected";
  }
  return "?";
}

inline SuggestionStatus parse_status(std::string_view s) {
  if (s == "pending") return SuggestionStatus::kPending;
  if (s == "approved") return SuggestionStatus::kApproved;
  if (s == "rejected") return SuggestionStatus::kRejected;
  throw Error(ErrorCode::kInvalidArgument, "unknown suggestion status '" + std::string(s) + "'");
}

struct EdgeSuggestion {
  std::uint64_t id = 0;
  std::string child_label;
  NodeId proposed_parent;
  double score = 0;
  SuggestionStatus status = SuggestionStatus::kPending;
  std::string created_at;
  std::string decided_at;
  std::optional<std::string> reviewer_note;
};

struct SuggestionBatch {
  std::vector<EdgeSuggestion> suggestions;
  std::vector<std::pair<std::string, std::string>> skipped;  // phrase, note
};

/// Scores each new phrase against every non-root candidate parent and keeps
/// the top_k (score descending, then id ascending). Ids are assigned
/// consecutively from `first_id`.
inline SuggestionBatch suggest_edges(const Taxonomy& t, const LinkScorer& scorer, const EmbeddingModel* m,
                                     const std::vector<std::string>& phrases, std::size_t top_k,
                                     std::uint64_t first_id = 1, const std::string& created_at = "") {
  FeatureContext ctx(t, m);
  const auto candidates = t.candidate_parents(/*include_root=*/false);
  SuggestionBatch batch;
  std::uint64_t next = first_id;
  std::set<std::string> seen;
  for (const auto& raw : phrases) {
    auto phrase = normalize_phrase(raw);
    if (phrase.empty()) {
      batch.skipped.emplace_back(raw, "empty after normalization");
      continue;
    }
    if (t.find(phrase)) {
      batch.skipped.emplace_back(phrase, "already a node");
      continue;
    }
    if (!seen.insert(phrase).second) {
      batch.skipped.emplace_back(phrase, "duplicate in request");
      continue;
    }
    std::vector<std::pair<double, NodeId>> ranked;
    for (NodeId c : candidates) {
      const auto& p = t.label(c);
      ranked.emplace_back(std::clamp(scorer.score(phrase, p, ctx.features(phrase, p)), 0.0, 1.0), c);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    if (ranked.empty()) {
      batch.skipped.emplace_back(phrase, "no candidate parents");
      continue;
    }
    for (std::size_t i = 0; i < std::min(top_k, ranked.size()); ++i) {
      EdgeSuggestion s;
      s.id = next++;
      s.child_label = phrase;
      s.proposed_parent = ranked[i].second;
      s.score = ranked[i].first;
      s.created_at = created_at;
      batch.suggestions.push_back(std::move(s));
    }
  }
  return batch;
}

/// Applies a reviewer decision. Approving inserts the phrase (or moves the
/// existing node of that label) under the proposed parent.
inline void apply_decision(Taxonomy& t, EdgeSuggestion& s, Decision decision, const std::string& decided_at,
                           std::optional<std::string> note = std::nullopt) {
  if (s.status != SuggestionStatus::kPending) {
    throw Error(ErrorCode::kConflict, "suggestion " + std::to_string(s.id) + " already " + std::string(to_string(s.status)));
  }
  if (decision == Decision::kApprove) {
    if (!t.contains(s.proposed_parent)) {
      throw Error(ErrorCode::kExpired, "suggestion " + std::to_string(s.id) + ": proposed parent no longer exists");
    }
    if (auto existing = t.find(s.child_label)) {
      if (*existing == kRootId || t.in_subtree(s.proposed_parent, *existing)) {
        throw Error(ErrorCode::kExpired, "suggestion " + std::to_string(s.id) + ": proposed parent now lies under the child");
      }
      t.move_node(*existing, s.proposed_parent);
    } else {
      t.add_node(s.child_label, s.proposed_parent, NodeKind::kKeyphrase);
    }
    s.status = SuggestionStatus::kApproved;
  } else {
    s.status = SuggestionStatus::kRejected;
  }
  s.decided_at = decided_at;
  s.reviewer_note = std::move(note);
}

}  // namespace taxoforge
