#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "taxoforge/embedding.hpp"
#include "taxoforge/error.hpp"
#include "taxoforge/io.hpp"
#include "taxoforge/taxonomy.hpp"
#include "taxoforge/text.hpp"

namespace taxoforge {

struct Listing {
  std::string listing_id;
  std::vector<std::string> insights;  // normalized, deduplicated
  std::optional<std::string> region;
};

inline Listing parse_listing(const nlohmann::json& rec) {
  if (!rec.is_object()) throw Error(ErrorCode::kParse, "listing record must be an object");
  for (const auto& [key, _] : rec.items()) {
    if (key != "listing_id" && key != "insights" && key != "region") {
      throw Error(ErrorCode::kParse, "unknown listing field '" + key + "'");
    }
  }
  if (!rec.contains("listing_id") || !rec["listing_id"].is_string() || rec["listing_id"].get<std::string>().empty()) {
    throw Error(ErrorCode::kParse, "listing_id must be a non-empty string");
  }
  if (!rec.contains("insights") || !rec["insights"].is_array()) throw Error(ErrorCode::kParse, "insights must be an array");
  Listing l;
  l.listing_id = rec["listing_id"].get<std::string>();
  std::unordered_set<std::string> seen;
  for (const auto& ins : rec["insights"]) {
    if (!ins.is_string()) throw Error(ErrorCode::kParse, "insights must be strings");
    auto norm = normalize_phrase(ins.get<std::string>());
    if (!norm.empty() && seen.insert(norm).second) l.insights.push_back(std::move(norm));
  }
  if (rec.contains("region")) {
    if (!rec["region"].is_string()) throw Error(ErrorCode::kParse, "region must be a string");
    l.region = rec["region"].get<std::string>();
  }
  return l;
}

/// One JSON record per line; blank lines are ignored.
inline std::vector<Listing> parse_listings(const std::vector<std::string>& lines) {
  std::vector<Listing> store;
  std::unordered_map<std::string, std::size_t> first_line;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t\r\v\f") == std::string::npos) continue;
    const std::string where = "listing line " + std::to_string(i + 1) + ": ";
    Listing l;
    try {
      l = parse_listing(nlohmann::json::parse(lines[i]));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, where + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, where + e.what());
    }
    auto [it, fresh] = first_line.emplace(l.listing_id, i + 1);
    if (!fresh) {
      throw Error(ErrorCode::kDuplicate, where + "duplicate listing_id '" + l.listing_id + "' (first seen on line " +
                                             std::to_string(it->second) + ")");
    }
    store.push_back(std::move(l));
  }
  return store;
}

inline std::vector<Listing> load_listings(const std::filesystem::path& path) {
  return parse_listings(io::read_lines(path));
}

enum class RecommendMethod { kBaseline, kTaxonomy };

inline std::string_view to_string(RecommendMethod m) {
  return m == RecommendMethod::kBaseline ? "baseline" : "taxonomy";
}

inline RecommendMethod parse_method(std::string_view s) {
  if (s == "baseline") return RecommendMethod::kBaseline;
  if (s == "taxonomy") return RecommendMethod::kTaxonomy;
  throw Error(ErrorCode::kInvalidArgument, "unknown method '" + std::string(s) + "'");
}

struct RecommendationResult {
  std::string query;
  RecommendMethod method = RecommendMethod::kBaseline;
  unsigned resolution = 0;  // taxonomy method only
  std::set<std::string> query_categories;
  bool query_unmapped = false;
  std::set<std::string> candidates;
  std::map<std::string, std::vector<std::string>> per_listing_matches;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["query"] = query;
    j["method"] = to_string(method);
    if (method == RecommendMethod::kTaxonomy) {
      j["resolution"] = resolution;
      j["query_categories"] = query_categories;
    }
    j["count"] = candidates.size();
    j["candidates"] = candidates;
    return j;
  }
};

/// Listings with an insight containing the normalized query as a substring.
inline RecommendationResult baseline_candidates(const std::vector<Listing>& store, std::string_view query) {
  RecommendationResult r;
  r.query = normalize_phrase(query);
  r.method = RecommendMethod::kBaseline;
  if (r.query.empty()) throw Error(ErrorCode::kInvalidArgument, "query is empty after normalization");
  for (const auto& l : store) {
    std::vector<std::string> hits;
    for (const auto& ins : l.insights) {
      if (ins.find(r.query) != std::string::npos) hits.push_back(ins);
    }
    if (!hits.empty()) {
      r.candidates.insert(l.listing_id);
      r.per_listing_matches.emplace(l.listing_id, std::move(hits));
    }
  }
  return r;
}

/// Anchors phrases to taxonomy nodes: exact label match first, otherwise the
/// nearest non-root node when its cosine reaches alpha. Anchors are cached;
/// the mapper is safe to share between threads.
class CategoryMapper {
 public:
  CategoryMapper(const Taxonomy& t, const EmbeddingModel* m, double alpha) : taxonomy_(t), model_(m), alpha_(alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
  }

  std::optional<NodeId> anchor(std::string_view raw) const {
    const auto phrase = normalize_phrase(raw);
    if (phrase.empty()) return std::nullopt;
    if (auto id = taxonomy_.find(phrase); id && *id != kRootId) return id;
    if (!model_) return std::nullopt;
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(phrase); it != cache_.end()) return it->second;
    std::optional<NodeId> result;
    const auto q = embed(*model_, phrase);
    if (!q.degenerate) {
      build_index();
      bool any = false;
      for (const auto& e : index_) any = any || !e.vector.degenerate;
      if (any) {
        auto best = nearest_neighbor(index_, q);
        if (best.similarity >= alpha_) result = index_ids_[best.position];
      }
    }
    cache_.emplace(phrase, result);
    return result;
  }

  std::set<std::string> categories(std::string_view phrase, unsigned r) const {
    if (r == 0) throw Error(ErrorCode::kInvalidArgument, "resolution must be >= 1");
    std::set<std::string> out;
    if (auto a = anchor(phrase)) out.insert(taxonomy_.label(taxonomy_.ancestor_at_resolution(*a, r)));
    return out;
  }

 private:
  void build_index() const {
    if (index_built_) return;
    for (const auto& n : taxonomy_.nodes()) {
      if (n.id == kRootId) continue;
      index_.push_back({n.label, embed(*model_, n.label)});
      index_ids_.push_back(n.id);
    }
    index_built_ = true;
  }

  const Taxonomy& taxonomy_;
  const EmbeddingModel* model_;
  double alpha_;
  mutable std::mutex mu_;
  mutable bool index_built_ = false;
  mutable std::vector<LabeledVector> index_;
  mutable std::vector<NodeId> index_ids_;
  mutable std::unordered_map<std::string, std::optional<NodeId>> cache_;
};

inline std::set<std::string> map_to_categories(const Taxonomy& t, const EmbeddingModel* m, std::string_view phrase,
                                               unsigned r, double alpha) {
  return CategoryMapper(t, m, alpha).categories(phrase, r);
}

/// Listings sharing at least one resolution-r category with the query.
inline RecommendationResult taxonomy_candidates(const std::vector<Listing>& store, const CategoryMapper& mapper,
                                                std::string_view query, unsigned r) {
  RecommendationResult res;
  res.query = normalize_phrase(query);
  res.method = RecommendMethod::kTaxonomy;
  res.resolution = r;
  if (res.query.empty()) throw Error(ErrorCode::kInvalidArgument, "query is empty after normalization");
  res.query_categories = mapper.categories(res.query, r);
  if (res.query_categories.empty()) {
    res.query_unmapped = true;
    return res;
  }
  for (const auto& l : store) {
    std::set<std::string> shared;
    for (const auto& ins : l.insights) {
      for (const auto& cat : mapper.categories(ins, r)) {
        if (res.query_categories.contains(cat)) shared.insert(cat);
      }
    }
    if (!shared.empty()) {
      res.candidates.insert(l.listing_id);
      res.per_listing_matches.emplace(l.listing_id, std::vector<std::string>(shared.begin(), shared.end()));
    }
  }
  return res;
}

inline RecommendationResult taxonomy_candidates(const std::vector<Listing>& store, const Taxonomy& t,
                                                const EmbeddingModel* m, std::string_view query, unsigned r,
                                                double alpha) {
  return taxonomy_candidates(store, CategoryMapper(t, m, alpha), query, r);
}

}  // namespace taxoforge
