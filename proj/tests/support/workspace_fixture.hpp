#pragma once

// Throwaway workspace directories for the service and CLI tests.

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "taxoforge/expansion.hpp"
#include "taxoforge/link_pruning.hpp"
#include "taxoforge/workspace.hpp"

namespace taxoforge::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("taxoforge-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline const std::vector<std::string>& seed_lines() {
  static const std::vector<std::string> lines{
      "sports and recreation\tgym|tennis court|yoga studio|basketball court",
      "kitchen\tgranite countertop|kitchen island|pantry|double oven",
      "outdoor\tswimming pool|patio|deck|fire pit",
  };
  return lines;
}

inline const std::vector<std::string>& listing_lines() {
  static const std::vector<std::string> lines{
      R"({"listing_id":"z1","insights":["gym","pantry"]})",
      R"({"listing_id":"z2","insights":["gym membership"]})",
      R"({"listing_id":"z3","insights":["tennis court","patio"]})",
      R"({"listing_id":"z4","insights":["kitchen island"],"region":"seattle"})",
      R"({"listing_id":"z5","insights":["swimming pool","deck"]})",
      R"({"listing_id":"z6","insights":["home gym","yoga studio"]})",
  };
  return lines;
}

/// Seed taxonomy, listings and a trained scorer; with_scorer=false leaves the
/// scorer out.
inline WorkspaceConfig make_workspace(const std::filesystem::path& dir, bool with_scorer = true) {
  WorkspaceConfig cfg = WorkspaceConfig::load(dir);
  const auto t = bootstrap_seed(parse_seed_lines(seed_lines()));
  commit_taxonomy(cfg, t);
  std::string listings;
  for (const auto& l : listing_lines()) listings += l + "\n";
  write_text(cfg.resolve(cfg.listings), listings);
  std::string seeds;
  for (const auto& l : seed_lines()) seeds += l + "\n";
  write_text(dir / "seed.tsv", seeds);
  if (with_scorer) {
    auto pairs = generate_pairs(t, 2, 42);
    auto scorer = fit_reference_scorer(pairs.samples, t, nullptr, 200, 0.5, 42);
    io::write_atomic(cfg.resolve(cfg.scorer), scorer.serialize());
  }
  return cfg;
}

}  // namespace taxoforge::testing
