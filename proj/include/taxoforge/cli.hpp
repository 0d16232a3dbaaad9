#pragma once

#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "taxoforge/embedding.hpp"
#include "taxoforge/error.hpp"
#include "taxoforge/evaluation.hpp"
#include "taxoforge/expansion.hpp"
#include "taxoforge/io.hpp"
#include "taxoforge/journal.hpp"
#include "taxoforge/link_pruning.hpp"
#include "taxoforge/recommender.hpp"
#include "taxoforge/service.hpp"
#include "taxoforge/taxonomy.hpp"
#include "taxoforge/workspace.hpp"

namespace taxoforge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

inline std::vector<std::string> read_phrase_file(const std::string& path) {
  std::vector<std::string> out;
  for (auto& line : io::read_lines(path)) {
    if (!normalize_phrase(line).empty()) out.push_back(std::move(line));
  }
  return out;
}

inline std::set<NodeKind> parse_targets(const std::string& s) {
  if (s == "category") return {NodeKind::kCategory};
  if (s == "keyphrase") return {NodeKind::kKeyphrase};
  if (s == "both") return {NodeKind::kCategory, NodeKind::kKeyphrase};
  throw Error(ErrorCode::kInvalidArgument, "targets must be category, keyphrase or both");
}

inline std::shared_ptr<const EmbeddingModel> require_model(const WorkspaceConfig& cfg) {
  auto m = load_model_if_present(cfg);
  if (!m) throw Error(ErrorCode::kNotFound, "no embedding model at " + cfg.resolve(cfg.model).string() + " (run train-embeddings)");
  return m;
}

}  // namespace detail

/// Entry point of the `taxoforge` tool. Exit codes: 0 success, 1 usage
/// error, 2 data error.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"taxoforge: build, prune, evaluate and serve a real-estate attribute taxonomy"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string workspace_flag;
  app.add_option("--workspace", workspace_flag, "Workspace directory (default: $TAXOFORGE_WORKSPACE or .)");

  std::uint64_t seed = 42;
  std::optional<double> alpha;
  std::optional<double> threshold;

  auto* bootstrap = app.add_subcommand("bootstrap", "Build the seed taxonomy from a category<TAB>kw|kw seed file");
  std::string seed_file;
  bootstrap->add_option("--input", seed_file, "Seed file")->required();

  auto* train_emb = app.add_subcommand("train-embeddings", "Train subword skip-gram embeddings on a corpus");
  std::string corpus;
  EmbeddingConfig emb_cfg;
  train_emb->add_option("--corpus", corpus, "One description per line")->required();
  train_emb->add_option("--dim", emb_cfg.dim);
  train_emb->add_option("--window", emb_cfg.window);
  train_emb->add_option("--negatives", emb_cfg.negatives);
  train_emb->add_option("--epochs", emb_cfg.epochs);
  train_emb->add_option("--lr", emb_cfg.lr0);
  train_emb->add_option("--min-count", emb_cfg.min_count);
  train_emb->add_option("--minn", emb_cfg.ngram_min);
  train_emb->add_option("--maxn", emb_cfg.ngram_max);
  train_emb->add_option("--buckets", emb_cfg.buckets);
  train_emb->add_option("--subsample", emb_cfg.subsample_t);
  train_emb->add_option("--seed", seed);

  auto* expand = app.add_subcommand("expand", "Attach new phrases under their nearest node");
  std::string phrases_file;
  std::string targets = "category";
  expand->add_option("--phrases", phrases_file, "One phrase per line")->required();
  expand->add_option("--alpha", alpha);
  expand->add_option("--targets", targets, "category, keyphrase or both");

  auto* gen_pairs = app.add_subcommand("gen-pairs", "Write labeled link samples to the pair file");
  std::size_t negatives = 1;
  gen_pairs->add_option("--negatives", negatives, "Negatives per positive");
  gen_pairs->add_option("--seed", seed);

  auto* train_scorer = app.add_subcommand("train-scorer", "Fit the reference link scorer on the pair file");
  int scorer_epochs = 200;
  double scorer_lr = 0.5;
  train_scorer->add_option("--epochs", scorer_epochs);
  train_scorer->add_option("--lr", scorer_lr);
  train_scorer->add_option("--seed", seed);

  auto* prune = app.add_subcommand("prune", "Prune low-scoring edges and reattach their children");
  bool include_top_level = false;
  prune->add_option("--threshold", threshold);
  prune->add_flag("--include-top-level", include_top_level, "Also score edges under the root");

  auto* suggest = app.add_subcommand("suggest", "Queue parent suggestions for new phrases");
  std::size_t top_k = 3;
  suggest->add_option("--phrases", phrases_file)->required();
  suggest->add_option("--top-k", top_k);

  auto* review = app.add_subcommand("review", "List or decide suggestions");
  review->require_subcommand(1);
  auto* review_list = review->add_subcommand("list", "List suggestions");
  std::string status_filter;
  review_list->add_option("--status", status_filter);
  std::uint64_t suggestion_id = 0;
  std::string note;
  auto* review_approve = review->add_subcommand("approve", "Approve a suggestion");
  review_approve->add_option("id", suggestion_id)->required();
  review_approve->add_option("--note", note);
  auto* review_reject = review->add_subcommand("reject", "Reject a suggestion");
  review_reject->add_option("id", suggestion_id)->required();
  review_reject->add_option("--note", note);

  auto* stats = app.add_subcommand("stats", "Print taxonomy statistics");

  auto* eval_precision = app.add_subcommand("eval-precision", "Reference-ontology edge precision");
  std::string strategy = "all";
  eval_precision->add_option("--strategy", strategy, "random, embedding_similarity, taxonomy or all");
  eval_precision->add_option("--seed", seed);

  auto* eval_subtree = app.add_subcommand("eval-subtree", "Mean pairwise similarity of a subtree");
  std::string subtree_label;
  std::size_t baseline_size = 0;
  eval_subtree->add_option("--node", subtree_label)->required();
  eval_subtree->add_option("--baseline-size", baseline_size, "Also report a random baseline of this size");
  eval_subtree->add_option("--seed", seed);

  auto* export_proj = app.add_subcommand("export-projection", "2-D principal-component projection of node vectors");
  std::size_t group_depth = 1;
  std::string out_file;
  export_proj->add_option("--depth", group_depth, "Group nodes by their ancestor at this depth");
  export_proj->add_option("--out", out_file);
  export_proj->add_option("--seed", seed);

  auto* recommend = app.add_subcommand("recommend", "Candidate listings for search keywords");
  std::vector<std::string> queries;
  std::string method = "taxonomy";
  unsigned resolution = 1;
  recommend->add_option("--query", queries)->required();
  recommend->add_option("--method", method)->check(CLI::IsMember({"baseline", "taxonomy"}));
  recommend->add_option("--resolution", resolution)->check(CLI::PositiveNumber);
  recommend->add_option("--alpha", alpha);

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  std::optional<int> port;
  std::string host = "0.0.0.0";
  serve_cmd->add_option("--port", port);
  serve_cmd->add_option("--host", host);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  WorkspaceConfig cfg;
  try {
    cfg = WorkspaceConfig::load(WorkspaceConfig::default_dir(workspace_flag));
    if (alpha) cfg.alpha = *alpha;
    if (threshold) cfg.threshold = *threshold;
    if (port) cfg.port = *port;
    cfg.validate();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kInvalidArgument ? kExitUsage : kExitData;
  }

  try {

    if (bootstrap->parsed()) {
      auto t = bootstrap_seed(load_seed_file(seed_file));
      commit_taxonomy(cfg, t);
      auto s = taxonomy_stats(t);
      out << "bootstrapped " << s.num_nodes << " nodes under " << s.num_parents << " categories\n";
    } else if (train_emb->parsed()) {
      emb_cfg.seed = seed;
      auto m = train(corpus, emb_cfg);
      save_model(m, cfg.resolve(cfg.model));
      out << "trained " << m.vocab_size() << " words, dim " << m.dim() << "\n";
    } else if (expand->parsed()) {
      auto state = load_workspace_state(cfg);
      auto m = detail::require_model(cfg);
      auto report = attach_by_embedding(state.taxonomy, *m, detail::read_phrase_file(phrases_file), cfg.alpha,
                                        detail::parse_targets(targets));
      commit_taxonomy(cfg, state.taxonomy);
      for (const auto& a : report.attached) out << "attached\t" << a.phrase << "\t" << a.parent << "\t" << a.similarity << "\n";
      for (const auto& s : report.skipped) {
        out << "skipped\t" << s.phrase << "\t" << s.best_label << "\t" << s.best_similarity << "\n";
      }
      for (const auto& p : report.pre_existing) out << "existing\t" << p << "\n";
    } else if (gen_pairs->parsed()) {
      auto state = load_workspace_state(cfg);
      auto pairs = generate_pairs(state.taxonomy, negatives, seed);
      io::write_atomic(cfg.resolve(cfg.pairs), format_pairs(pairs.samples));
      out << "wrote " << pairs.samples.size() << " samples";
      if (!pairs.shortfalls.empty()) out << " (" << pairs.shortfalls.size() << " nodes short of negatives)";
      out << "\n";
    } else if (train_scorer->parsed()) {
      auto state = load_workspace_state(cfg);
      auto m = load_model_if_present(cfg);
      auto samples = parse_pairs(io::read_lines(cfg.resolve(cfg.pairs)));
      auto scorer = fit_reference_scorer(samples, state.taxonomy, m.get(), scorer_epochs, scorer_lr, seed);
      io::write_atomic(cfg.resolve(cfg.scorer), scorer.serialize());
      out << "final training loss " << scorer.loss_history().back() << "\n";
    } else if (prune->parsed()) {
      auto state = load_workspace_state(cfg);
      auto m = load_model_if_present(cfg);
      auto scorer = load_scorer_if_present(cfg);
      if (!scorer) throw Error(ErrorCode::kNotFound, "no scorer in the workspace (run train-scorer)");
      auto report = prune_and_reattach(state.taxonomy, *scorer, m.get(), cfg.threshold, !include_top_level);
      commit_taxonomy(cfg, state.taxonomy);
      out << report.to_json(state.taxonomy).dump(2) << "\n";
    } else if (suggest->parsed()) {
      auto state = load_workspace_state(cfg);
      auto m = load_model_if_present(cfg);
      auto scorer = load_scorer_if_present(cfg);
      if (!scorer) throw Error(ErrorCode::kNotFound, "no scorer in the workspace (run train-scorer)");
      auto batch = suggest_edges(state.taxonomy, *scorer, m.get(), detail::read_phrase_file(phrases_file), top_k,
                                 state.book.next_id(), now_iso8601());
      for (const auto& s : batch.suggestions) {
        append_journal(cfg, journal_record("suggested", s, s.created_at));
        out << s.id << "\t" << s.child_label << "\t" << state.taxonomy.label(s.proposed_parent) << "\t" << s.score << "\n";
      }
      for (const auto& [phrase, why] : batch.skipped) out << "skipped\t" << phrase << "\t" << why << "\n";
    } else if (review->parsed()) {
      auto state = load_workspace_state(cfg);
      if (review_list->parsed()) {
        std::optional<SuggestionStatus> filter;
        if (!status_filter.empty()) filter = parse_status(status_filter);
        for (const auto& s : state.book.list(filter)) out << suggestion_json(s, state.taxonomy).dump() << "\n";
      } else {
        const auto decision = review_approve->parsed() ? Decision::kApprove : Decision::kReject;
        EdgeSuggestion s = state.book.at(suggestion_id);
        std::optional<std::string> n;
        if (!note.empty()) n = note;
        apply_decision(state.taxonomy, s, decision, now_iso8601(), n);
        append_journal(cfg, journal_record(decision == Decision::kApprove ? "approved" : "rejected", s, s.decided_at));
        out << suggestion_json(s, state.taxonomy).dump() << "\n";
      }
    } else if (stats->parsed()) {
      auto s = taxonomy_stats(load_workspace_state(cfg).taxonomy);
      out << "# Nodes\t# Edges\t# Parents\t# Leaf Nodes\tMax Depth\n"
          << s.num_nodes << "\t" << s.num_edges << "\t" << s.num_parents << "\t" << s.num_leaves << "\t" << s.max_depth << "\n";
    } else if (eval_precision->parsed()) {
      auto state = load_workspace_state(cfg);
      auto ref = load_reference(cfg.resolve(cfg.reference));
      auto m = load_model_if_present(cfg);
      std::vector<PrecisionStrategy> strategies;
      if (strategy == "all") {
        strategies = {PrecisionStrategy::kRandom, PrecisionStrategy::kEmbeddingSimilarity, PrecisionStrategy::kTaxonomy};
        if (!m) strategies.erase(strategies.begin() + 1);
      } else {
        strategies = {parse_strategy(strategy)};
      }
      out << "strategy\tnumerator\tdenominator\tprecision\n";
      for (auto st : strategies) {
        auto r = reference_precision(state.taxonomy, ref, m.get(), st, seed);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", r.precision);
        out << to_string(st) << "\t" << r.numerator << "\t" << r.denominator << "\t" << buf << "\n";
      }
    } else if (eval_subtree->parsed()) {
      auto state = load_workspace_state(cfg);
      auto m = detail::require_model(cfg);
      auto id = state.taxonomy.find(normalize_phrase(subtree_label));
      if (!id) throw Error(ErrorCode::kNotFound, "no node labeled '" + subtree_label + "'");
      auto score = subtree_similarity(state.taxonomy, *m, *id);
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.3f\t%zu\n", score.score, score.size);
      out << state.taxonomy.label(*id) << "\t" << buf;
      if (baseline_size > 0) {
        std::vector<std::string> labels;
        for (const auto& n : state.taxonomy.nodes()) {
          if (n.id != kRootId) labels.push_back(n.label);
        }
        std::snprintf(buf, sizeof(buf), "%.3f\t%zu\n",
                      random_tree_similarity_baseline(labels, *m, baseline_size, seed), baseline_size);
        out << "random\t" << buf;
      }
    } else if (export_proj->parsed()) {
      auto state = load_workspace_state(cfg);
      auto m = detail::require_model(cfg);
      auto proj = export_projection(state.taxonomy, *m, group_depth, seed);
      auto text = format_projection(proj);
      if (out_file.empty()) out << text;
      else io::write_atomic(out_file, text);
      if (proj.rank_deficient) err << "warning: fewer than two non-zero components; y is zero\n";
    } else if (recommend->parsed()) {
      const auto m = parse_method(method);
      auto store = load_listings(cfg.resolve(cfg.listings));
      if (m == RecommendMethod::kBaseline) {
        for (const auto& q : queries) out << baseline_candidates(store, q).to_json().dump() << "\n";
      } else {
        auto state = load_workspace_state(cfg);
        auto model = load_model_if_present(cfg);
        CategoryMapper mapper(state.taxonomy, model.get(), cfg.alpha);
        for (const auto& q : queries) out << taxonomy_candidates(store, mapper, q, resolution).to_json().dump() << "\n";
      }
    } else if (serve_cmd->parsed()) {
      err << "serving " << cfg.dir.string() << " on " << host << ":" << cfg.port << "\n";
      serve(cfg, host);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace taxoforge
