#pragma once

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"
#include "taxoforge/embedding.hpp"
#include "taxoforge/error.hpp"
#include "taxoforge/io.hpp"
#include "taxoforge/journal.hpp"
#include "taxoforge/link_pruning.hpp"
#include "taxoforge/recommender.hpp"
#include "taxoforge/taxonomy.hpp"

namespace taxoforge {

/// File layout and defaults of one workspace directory. Relative paths are
/// resolved against `dir`; an optional `workspace.json` there overrides the
/// defaults.
struct WorkspaceConfig {
  std::filesystem::path dir = ".";
  std::filesystem::path taxonomy = "taxonomy.json";
  std::filesystem::path model = "model.emb";
  std::filesystem::path listings = "listings.jsonl";
  std::filesystem::path reference = "reference.tsv";
  std::filesystem::path journal = "journal.log";
  std::filesystem::path pairs = "pairs.tsv";
  std::filesystem::path scorer = "scorer.txt";
  double alpha = 0.8;
  double threshold = 0.5;
  int port = 8080;

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : dir / p; }

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorCode::kInvalidArgument, "threshold must lie in (0, 1)");
    if (port < 0 || port > 65535) throw Error(ErrorCode::kInvalidArgument, "port out of range");
  }

  static WorkspaceConfig load(const std::filesystem::path& dir) {
    WorkspaceConfig cfg;
    cfg.dir = dir;
    const auto file = dir / "workspace.json";
    if (std::filesystem::exists(file)) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(io::read_file(file));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kParse, "workspace.json: " + std::string(e.what()));
      }
      if (!j.is_object()) throw Error(ErrorCode::kParse, "workspace.json must hold an object");
      for (const auto& [key, value] : j.items()) {
        if (key == "taxonomy") cfg.taxonomy = value.get<std::string>();
        else if (key == "model") cfg.model = value.get<std::string>();
        else if (key == "listings") cfg.listings = value.get<std::string>();
        else if (key == "reference") cfg.reference = value.get<std::string>();
        else if (key == "journal") cfg.journal = value.get<std::string>();
        else if (key == "pairs") cfg.pairs = value.get<std::string>();
        else if (key == "scorer") cfg.scorer = value.get<std::string>();
        else if (key == "alpha") cfg.alpha = value.get<double>();
        else if (key == "threshold") cfg.threshold = value.get<double>();
        else if (key == "port") cfg.port = value.get<int>();
        else throw Error(ErrorCode::kParse, "workspace.json: unknown field '" + key + "'");
      }
    }
    cfg.validate();
    return cfg;
  }

  /// --workspace, then $TAXOFORGE_WORKSPACE, then the current directory.
  static std::filesystem::path default_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("TAXOFORGE_WORKSPACE"); env && *env) return env;
    return ".";
  }
};

/// Taxonomy file plus journal replay: the live taxonomy and suggestion book.
inline ReplayResult load_workspace_state(const WorkspaceConfig& cfg) {
  const auto tax_path = cfg.resolve(cfg.taxonomy);
  if (!std::filesystem::exists(tax_path)) {
    throw Error(ErrorCode::kNotFound, "no taxonomy at " + tax_path.string() + " (run bootstrap first)");
  }
  auto base = load_taxonomy(tax_path);
  const auto journal_path = cfg.resolve(cfg.journal);
  std::vector<std::string> lines;
  if (std::filesystem::exists(journal_path)) lines = io::read_lines(journal_path);
  return replay_journal(std::move(base), lines);
}

/// Rewrites the taxonomy file and records a checkpoint, so earlier journaled
/// decisions are not applied twice on the next replay.
inline void commit_taxonomy(const WorkspaceConfig& cfg, const Taxonomy& t) {
  save_taxonomy(t, cfg.resolve(cfg.taxonomy));
  const auto journal_path = cfg.resolve(cfg.journal);
  if (std::filesystem::exists(journal_path)) {
    io::append_durable(journal_path, checkpoint_record(t, now_iso8601()).dump());
  }
}

inline void append_journal(const WorkspaceConfig& cfg, const nlohmann::ordered_json& record) {
  io::append_durable(cfg.resolve(cfg.journal), record.dump());
}

inline std::shared_ptr<const EmbeddingModel> load_model_if_present(const WorkspaceConfig& cfg) {
  const auto p = cfg.resolve(cfg.model);
  if (!std::filesystem::exists(p)) return nullptr;
  return std::make_shared<const EmbeddingModel>(load_model(p));
}

inline std::shared_ptr<const LogisticLinkScorer> load_scorer_if_present(const WorkspaceConfig& cfg) {
  const auto p = cfg.resolve(cfg.scorer);
  if (!std::filesystem::exists(p)) return nullptr;
  return std::make_shared<const LogisticLinkScorer>(LogisticLinkScorer::deserialize(io::read_file(p)));
}

inline std::vector<Listing> load_listings_if_present(const WorkspaceConfig& cfg) {
  const auto p = cfg.resolve(cfg.listings);
  if (!std::filesystem::exists(p)) return {};
  return load_listings(p);
}

}  // namespace taxoforge
