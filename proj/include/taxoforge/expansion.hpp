#pragma once

#include <filesystem>
#include <limits>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "taxoforge/embedding.hpp"
#include "taxoforge/error.hpp"
#include "taxoforge/io.hpp"
#include "taxoforge/taxonomy.hpp"
#include "taxoforge/text.hpp"

namespace taxoforge {

/// One labeled seed group: a scene-level category and the keywords tagged
/// with it.
struct SeedRecord {
  std::string category;
  std::vector<std::string> keywords;
};

/// Parses "category<TAB>kw1|kw2|..." lines. Labels are normalized and
/// keywords deduplicated within a record; blank lines are skipped.
inline std::vector<SeedRecord> parse_seed_lines(const std::vector<std::string>& lines) {
  std::vector<SeedRecord> records;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t\r\v\f") == std::string::npos) continue;
    auto fields = split(lines[i], '\t');
    if (fields.size() != 2) {
      throw Error(ErrorCode::kParse, "seed line " + std::to_string(i + 1) + ": expected category<TAB>keywords");
    }
    SeedRecord rec;
    rec.category = normalize_phrase(fields[0]);
    if (rec.category.empty()) {
      throw Error(ErrorCode::kParse, "seed line " + std::to_string(i + 1) + ": empty category");
    }
    std::unordered_set<std::string> seen;
    for (const auto& raw : split(fields[1], '|')) {
      auto kw = normalize_phrase(raw);
      if (!kw.empty() && seen.insert(kw).second) rec.keywords.push_back(std::move(kw));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<SeedRecord> load_seed_file(const std::filesystem::path& path) {
  return parse_seed_lines(io::read_lines(path));
}

/// root -> one category per record -> its keywords.
inline Taxonomy bootstrap_seed(const std::vector<SeedRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::kInvalidArgument, "no seed records");
  Taxonomy t;
  for (const auto& rec : records) {
    NodeId cat = t.add_node(rec.category, kRootId, NodeKind::kCategory);
    for (const auto& kw : rec.keywords) t.add_node(kw, cat, NodeKind::kKeyphrase);
  }
  return t;
}

struct AttachedPhrase {
  std::string phrase;
  std::string parent;
  double similarity = 0;
};

struct SkippedPhrase {
  std::string phrase;
  double best_similarity = -std::numeric_limits<double>::infinity();
  std::string best_label;  // empty for degenerate phrases
};

struct AttachmentReport {
  std::vector<AttachedPhrase> attached;
  std::vector<SkippedPhrase> skipped;
  std::vector<std::string> pre_existing;
  double threshold = 0;
};

/// k=1 nearest-neighbor attachment of new phrases under existing nodes.
///
/// The target set is the nodes whose kind is in `target_kinds`, captured
/// before any phrase is attached, so the outcome for a phrase never depends
/// on phrases earlier in the list. A phrase attaches as a keyphrase under its
/// nearest target when the cosine similarity reaches `alpha`.
inline AttachmentReport attach_by_embedding(Taxonomy& t, const EmbeddingModel& m,
                                            const std::vector<std::string>& phrases, double alpha,
                                            const std::set<NodeKind>& target_kinds = {NodeKind::kCategory}) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
  for (auto k : target_kinds) {
    if (k == NodeKind::kRoot) throw Error(ErrorCode::kInvalidArgument, "root is not an attachment target");
  }
  std::vector<LabeledVector> index;
  for (const auto& n : t.nodes()) {
    if (target_kinds.contains(n.kind)) index.push_back({n.label, embed(m, n.label)});
  }

  AttachmentReport report;
  report.threshold = alpha;
  for (const auto& raw : phrases) {
    const auto phrase = normalize_phrase(raw);
    if (!phrase.empty() && t.find(phrase)) {
      report.pre_existing.push_back(phrase);
      continue;
    }
    const auto pv = embed(m, phrase);
    bool any_target = false;
    for (const auto& e : index) any_target = any_target || !e.vector.degenerate;
    if (phrase.empty() || pv.degenerate || !any_target) {
      report.skipped.push_back({phrase.empty() ? raw : phrase, -std::numeric_limits<double>::infinity(), ""});
      continue;
    }
    const auto best = nearest_neighbor(index, pv);
    if (best.similarity >= alpha) {
      t.add_node(phrase, *t.find(best.label), NodeKind::kKeyphrase);
      report.attached.push_back({phrase, best.label, best.similarity});
    } else {
      report.skipped.push_back({phrase, best.similarity, best.label});
    }
  }
  return report;
}

}  // namespace taxoforge
