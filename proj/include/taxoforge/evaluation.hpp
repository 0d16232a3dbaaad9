#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "taxoforge/embedding.hpp"
#include "taxoforge/error.hpp"
#include "taxoforge/io.hpp"
#include "taxoforge/random.hpp"
#include "taxoforge/taxonomy.hpp"
#include "taxoforge/text.hpp"

namespace taxoforge {

/// Directed (child, parent) hypernym pairs from an external ontology.
struct ReferenceOntology {
  std::set<std::pair<std::string, std::string>> edges;

  std::set<std::string> vocabulary() const {
    std::set<std::string> v;
    for (const auto& [c, p] : edges) {
      v.insert(c);
      v.insert(p);
    }
    return v;
  }

  bool contains(const std::string& child, const std::string& parent) const {
    return edges.contains({child, parent});
  }
};

/// "child<TAB>parent" lines; labels are normalized, self-loops dropped.
inline ReferenceOntology parse_reference(const std::vector<std::string>& lines) {
  ReferenceOntology ref;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split(lines[i], '\t');
    if (f.size() != 2) throw Error(ErrorCode::kParse, "reference line " + std::to_string(i + 1) + ": expected child<TAB>parent");
    auto c = normalize_phrase(f[0]);
    auto p = normalize_phrase(f[1]);
    if (c.empty() || p.empty()) throw Error(ErrorCode::kParse, "reference line " + std::to_string(i + 1) + ": empty label");
    if (c != p) ref.edges.emplace(std::move(c), std::move(p));
  }
  return ref;
}

inline ReferenceOntology load_reference(const std::filesystem::path& path) {
  return parse_reference(io::read_lines(path));
}

enum class PrecisionStrategy { kRandom, kEmbeddingSimilarity, kTaxonomy };

inline std::string_view to_string(PrecisionStrategy s) {
  switch (s) {
    case PrecisionStrategy::kRandom: return "random";
    case PrecisionStrategy::kEmbeddingSimilarity: return "embedding_similarity";
    case PrecisionStrategy::kTaxonomy: return "taxonomy";
  }
  return "?";
}

inline PrecisionStrategy parse_strategy(std::string_view s) {
  if (s == "random") return PrecisionStrategy::kRandom;
  if (s == "embedding_similarity" || s == "embedding") return PrecisionStrategy::kEmbeddingSimilarity;
  if (s == "taxonomy") return PrecisionStrategy::kTaxonomy;
  throw Error(ErrorCode::kInvalidArgument, "unknown precision strategy '" + std::string(s) + "'");
}

struct PrecisionReport {
  PrecisionStrategy strategy = PrecisionStrategy::kTaxonomy;
  std::size_t numerator = 0;
  std::size_t denominator = 0;
  double precision = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> proposals;  // (child, proposed parent)
};

/// Precision of proposed parent edges against a reference ontology.
///
/// The evaluated nodes are the non-root taxonomy labels that the reference
/// also knows. The denominator counts reference edges with both endpoints in
/// that set; every child of such an edge gets one proposed parent from the
/// strategy, drawn from the non-root candidate parents other than itself.
inline PrecisionReport reference_precision(const Taxonomy& t, const ReferenceOntology& ref, const EmbeddingModel* m,
                                           PrecisionStrategy strategy, std::uint64_t seed) {
  if (ref.edges.empty()) throw Error(ErrorCode::kInvalidArgument, "reference ontology is empty");
  if (strategy == PrecisionStrategy::kEmbeddingSimilarity && !m) {
    throw Error(ErrorCode::kInvalidArgument, "embedding_similarity needs a trained model");
  }
  const auto vocab = ref.vocabulary();
  auto in_eval_set = [&](const std::string& label) {
    auto id = t.find(label);
    return id && *id != kRootId && vocab.contains(label);
  };

  PrecisionReport report;
  report.strategy = strategy;
  report.seed = seed;
  std::set<NodeId> children;
  for (const auto& [c, p] : ref.edges) {
    if (in_eval_set(c) && in_eval_set(p)) {
      ++report.denominator;
      children.insert(*t.find(c));
    }
  }
  if (report.denominator == 0) {
    throw Error(ErrorCode::kEmptyOverlap, "no reference edge has both endpoints in the taxonomy");
  }

  const auto candidates = t.candidate_parents(/*include_root=*/false);
  std::vector<LabeledVector> index;
  if (strategy == PrecisionStrategy::kEmbeddingSimilarity) {
    for (NodeId c : candidates) index.push_back({t.label(c), embed(*m, t.label(c))});
  }
  Rng rng(seed);

  for (NodeId child : children) {
    const auto& label = t.label(child);
    std::optional<std::string> proposed;
    switch (strategy) {
      case PrecisionStrategy::kTaxonomy: {
        NodeId p = *t.parent(child);
        if (p != kRootId) proposed = t.label(p);
        break;
      }
      case PrecisionStrategy::kRandom: {
        std::vector<NodeId> pool;
        for (NodeId c : candidates) {
          if (c != child) pool.push_back(c);
        }
        if (!pool.empty()) proposed = t.label(pool[uniform_index(rng, pool.size())]);
        break;
      }
      case PrecisionStrategy::kEmbeddingSimilarity: {
        const auto q = embed(*m, label);
        std::vector<LabeledVector> pool;
        for (const auto& e : index) {
          if (e.label != label && !e.vector.degenerate) pool.push_back(e);
        }
        if (!q.degenerate && !pool.empty()) proposed = nearest_neighbor(pool, q).label;
        break;
      }
    }
    if (!proposed) continue;
    if (ref.contains(label, *proposed)) ++report.numerator;
    report.proposals.emplace_back(label, std::move(*proposed));
  }
  report.precision = static_cast<double>(report.numerator) / static_cast<double>(report.denominator);
  return report;
}

// --- subtree similarity -------------------------------------------------------

struct SubtreeScore {
  double score = 0;
  std::size_t size = 0;
};

/// Mean cosine over all unordered pairs of non-degenerate vectors.
inline SubtreeScore mean_pairwise_cosine(const std::vector<PhraseVector>& vectors) {
  std::vector<const PhraseVector*> usable;
  for (const auto& v : vectors) {
    if (!v.degenerate) usable.push_back(&v);
  }
  if (usable.size() < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two embeddable nodes");
  double total = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < usable.size(); ++i) {
    for (std::size_t j = i + 1; j < usable.size(); ++j) {
      total += cosine(*usable[i], *usable[j]);
      ++pairs;
    }
  }
  return {total / static_cast<double>(pairs), usable.size()};
}

/// Connectivity of the subtree rooted at `subtree_root` (inclusive; the
/// global root is never part of it). `size` counts the embeddable nodes.
inline SubtreeScore subtree_similarity(const Taxonomy& t, const EmbeddingModel& m, NodeId subtree_root) {
  std::vector<PhraseVector> vectors;
  for (NodeId id : t.subtree(subtree_root)) {
    if (id != kRootId) vectors.push_back(embed(m, t.label(id)));
  }
  return mean_pairwise_cosine(vectors);
}

/// Same arithmetic over a seeded uniform sample of `size` labels.
inline double random_tree_similarity_baseline(const std::vector<std::string>& labels, const EmbeddingModel& m,
                                              std::size_t size, std::uint64_t seed) {
  if (size < 2 || labels.size() < size) throw Error(ErrorCode::kInvalidArgument, "not enough labels for the baseline sample");
  std::vector<std::size_t> idx(labels.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  std::vector<PhraseVector> vectors;
  for (std::size_t k = 0; k < size; ++k) {
    std::swap(idx[k], idx[k + uniform_index(rng, idx.size() - k)]);
    vectors.push_back(embed(m, labels[idx[k]]));
  }
  return mean_pairwise_cosine(vectors).score;
}

// --- 2-D projection -------------------------------------------------------------

struct PrincipalComponents {
  std::vector<std::vector<double>> directions;  // unit vectors, strongest first
  std::vector<double> variances;                // eigenvalues of the covariance
  bool rank_deficient = false;
};

/// Top-k principal directions of already-centered rows by power iteration
/// with deflation. Directions whose variance is numerically zero are
/// returned as zero vectors and flag rank deficiency.
inline PrincipalComponents top_components(const std::vector<std::vector<double>>& centered, std::size_t k,
                                          std::uint64_t seed, double tol = 1e-9, int max_iter = 1000) {
  if (centered.empty()) throw Error(ErrorCode::kInvalidArgument, "no rows to project");
  const std::size_t d = centered.front().size();
  const double n = static_cast<double>(centered.size());
  std::vector<double> cov(d * d, 0.0);
  for (const auto& row : centered) {
    for (std::size_t i = 0; i < d; ++i) {
      if (row[i] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) cov[i * d + j] += row[i] * row[j];
    }
  }
  double trace = 0;
  for (auto& x : cov) x /= n;
  for (std::size_t i = 0; i < d; ++i) trace += cov[i * d + i];

  Rng rng(seed);
  PrincipalComponents pc;
  std::vector<double> v(d), next(d);
  for (std::size_t c = 0; c < k; ++c) {
    for (auto& x : v) x = uniform_real(rng, -1.0, 1.0);
    auto normalize = [](std::vector<double>& x) {
      double s = 0;
      for (double e : x) s += e * e;
      s = std::sqrt(s);
      if (s > 0)
        for (auto& e : x) e /= s;
      return s;
    };
    normalize(v);
    double lambda = 0;
    for (int it = 0; it < max_iter; ++it) {
      for (std::size_t i = 0; i < d; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < d; ++j) s += cov[i * d + j] * v[j];
        next[i] = s;
      }
      lambda = normalize(next);
      if (lambda == 0) break;
      double diff = 0;
      for (std::size_t i = 0; i < d; ++i) diff = std::max(diff, std::abs(next[i] - v[i]));
      v.swap(next);
      if (diff < tol) break;
    }
    // Rayleigh quotient for the variance along v.
    double rq = 0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) rq += v[i] * cov[i * d + j] * v[j];
    if (lambda == 0 || rq <= 1e-12 * std::max(1.0, trace)) {
      pc.directions.emplace_back(d, 0.0);
      pc.variances.push_back(0.0);
      pc.rank_deficient = true;
      continue;
    }
    // Sign convention: the largest-magnitude coordinate is positive.
    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i) {
      if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    }
    if (v[arg] < 0)
      for (auto& x : v) x = -x;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov[i * d + j] -= rq * v[i] * v[j];
    pc.directions.push_back(v);
    pc.variances.push_back(rq);
  }
  return pc;
}

struct ProjectionRow {
  std::string label;
  std::string group;
  double x = 0;
  double y = 0;
};

struct Projection {
  std::vector<ProjectionRow> rows;  // sorted by label
  std::vector<double> variances;
  bool rank_deficient = false;
};

/// Projects every embeddable non-root node onto the top two principal
/// components of the centered phrase vectors. Each row's group is the node's
/// ancestor at depth `group_depth` (the node itself when shallower).
inline Projection export_projection(const Taxonomy& t, const EmbeddingModel& m, std::size_t group_depth,
                                    std::uint64_t seed = 42) {
  std::vector<NodeId> ids;
  std::vector<std::vector<double>> rows;
  for (const auto& n : t.nodes()) {
    if (n.id == kRootId) continue;
    auto pv = embed(m, n.label);
    if (pv.degenerate) continue;
    ids.push_back(n.id);
    rows.push_back(std::move(pv.values));
  }
  if (rows.size() < 3) throw Error(ErrorCode::kInvalidArgument, "projection needs at least three embeddable nodes");
  const std::size_t d = rows.front().size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i) mean[i] += r[i];
  for (auto& x : mean) x /= static_cast<double>(rows.size());
  for (auto& r : rows)
    for (std::size_t i = 0; i < d; ++i) r[i] -= mean[i];

  const auto pc = top_components(rows, 2, seed);
  Projection out;
  out.variances = pc.variances;
  out.rank_deficient = pc.rank_deficient;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    ProjectionRow row;
    row.label = t.label(ids[k]);
    row.group = t.label(t.ancestor_at_depth(ids[k], group_depth));
    for (std::size_t i = 0; i < d; ++i) {
      row.x += rows[k][i] * pc.directions[0][i];
      row.y += rows[k][i] * pc.directions[1][i];
    }
    out.rows.push_back(std::move(row));
  }
  std::sort(out.rows.begin(), out.rows.end(), [](const auto& a, const auto& b) { return a.label < b.label; });
  return out;
}

inline std::string format_projection(const Projection& p) {
  std::string out;
  char buf[64];
  for (const auto& r : p.rows) {
    std::snprintf(buf, sizeof(buf), "\t%.6f\t%.6f\n", r.x, r.y);
    out += r.label + "\t" + r.group + buf;
  }
  return out;
}

}  // namespace taxoforge
