#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "taxoforge/error.hpp"
#include "taxoforge/journal.hpp"
#include "taxoforge/link_pruning.hpp"
#include "taxoforge/recommender.hpp"
#include "taxoforge/taxonomy.hpp"
#include "taxoforge/workspace.hpp"

namespace taxoforge {

struct Response {
  int status = 200;
  nlohmann::ordered_json body;
};

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict:
    case ErrorCode::kExpired:
    case ErrorCode::kDuplicate:
    case ErrorCode::kCycle: return 409;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kParse:
    case ErrorCode::kDegenerate:
    case ErrorCode::kEmptyOverlap: return 422;
    case ErrorCode::kIo: return 500;
  }
  return 500;
}

inline nlohmann::ordered_json suggestion_json(const EdgeSuggestion& s, const Taxonomy& t) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["child"] = s.child_label;
  j["proposed_parent"] = s.proposed_parent.value;
  j["proposed_parent_label"] = t.contains(s.proposed_parent) ? nlohmann::ordered_json(t.label(s.proposed_parent)) : nullptr;
  j["score"] = s.score;
  j["status"] = to_string(s.status);
  j["created_at"] = s.created_at;
  j["decided_at"] = s.decided_at.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(s.decided_at);
  j["reviewer_note"] = s.reviewer_note ? nlohmann::ordered_json(*s.reviewer_note) : nullptr;
  return j;
}

inline nlohmann::ordered_json stats_json(const TaxonomyStats& s) {
  nlohmann::ordered_json j;
  j["num_nodes"] = s.num_nodes;
  j["num_edges"] = s.num_edges;
  j["num_parents"] = s.num_parents;
  j["num_leaves"] = s.num_leaves;
  j["max_depth"] = s.max_depth;
  return j;
}

/// Workspace state served over HTTP. Reads share a lock; every mutation is
/// validated on a copy, journaled durably, then swapped in under the
/// exclusive lock, so a read that follows an acknowledged write observes it.
class Service {
 public:
  using Clock = std::function<std::string()>;

  explicit Service(WorkspaceConfig cfg, Clock clock = now_iso8601) : cfg_(std::move(cfg)), clock_(std::move(clock)) {
    auto snap = load_snapshot();
    std::unique_lock lock(mu_);
    install(std::move(snap));
  }

  const WorkspaceConfig& config() const { return cfg_; }

  Response stats() const {
    return read([&] { return Response{200, stats_json(taxonomy_stats(state_->taxonomy))}; });
  }

  Response node(std::uint32_t raw_id) const {
    return read([&] {
      const auto& t = state_->taxonomy;
      NodeId id{raw_id};
      if (!t.contains(id)) throw Error(ErrorCode::kNotFound, "unknown node id " + std::to_string(raw_id));
      const auto& n = t.node(id);
      nlohmann::ordered_json j;
      j["id"] = n.id.value;
      j["label"] = n.label;
      j["kind"] = to_string(n.kind);
      j["parent"] = n.parent ? nlohmann::ordered_json(n.parent->value) : nullptr;
      j["path"] = nlohmann::json::array();
      for (NodeId p : t.path_to_root(id)) j["path"].push_back({{"id", p.value}, {"label", t.label(p)}});
      j["children"] = nlohmann::json::array();
      for (NodeId c : t.children(id)) j["children"].push_back({{"id", c.value}, {"label", t.label(c)}});
      return Response{200, j};
    });
  }

  Response recommend(const std::string& query, const std::string& method, unsigned r) const {
    return read([&] {
      const auto m = parse_method(method.empty() ? "taxonomy" : method);
      if (m == RecommendMethod::kBaseline) return Response{200, baseline_candidates(state_->listings, query).to_json()};
      return Response{200, taxonomy_candidates(state_->listings, *state_->mapper, query, r).to_json()};
    });
  }

  Response suggestions(const std::string& status) const {
    return read([&] {
      std::optional<SuggestionStatus> filter;
      if (!status.empty()) filter = parse_status(status);
      nlohmann::ordered_json arr = nlohmann::json::array();
      for (const auto& s : state_->book.list(filter)) arr.push_back(suggestion_json(s, state_->taxonomy));
      return Response{200, arr};
    });
  }

  /// `body` may be empty or {"note": "..."}.
  Response decide(std::uint64_t id, Decision decision, const std::string& body) {
    return write([&] {
      std::optional<std::string> note;
      if (!body.empty()) {
        auto j = parse_body(body);
        for (const auto& [key, _] : j.items()) {
          if (key != "note") throw Error(ErrorCode::kParse, "unknown field '" + key + "'");
        }
        if (j.contains("note")) {
          if (!j["note"].is_string()) throw Error(ErrorCode::kParse, "note must be a string");
          note = j["note"].get<std::string>();
        }
      }
      auto* current = state_->book.find(id);
      if (!current) throw Error(ErrorCode::kNotFound, "unknown suggestion id " + std::to_string(id));
      Taxonomy t = state_->taxonomy;
      EdgeSuggestion s = *current;
      apply_decision(t, s, decision, clock_(), note);
      append_journal(cfg_, journal_record(decision == Decision::kApprove ? "approved" : "rejected", s, s.decided_at));
      *current = s;
      if (decision == Decision::kApprove) replace_taxonomy(std::move(t));
      return Response{200, suggestion_json(s, state_->taxonomy)};
    });
  }

  /// Body: {"phrases": [...], "top_k": n}; returns the new pending suggestions.
  Response batch(const std::string& body) {
    return write([&] {
      auto j = parse_body(body);
      for (const auto& [key, _] : j.items()) {
        if (key != "phrases" && key != "top_k") throw Error(ErrorCode::kParse, "unknown field '" + key + "'");
      }
      if (!j.contains("phrases") || !j["phrases"].is_array()) throw Error(ErrorCode::kParse, "phrases must be an array");
      std::vector<std::string> phrases;
      for (const auto& p : j["phrases"]) {
        if (!p.is_string()) throw Error(ErrorCode::kParse, "phrases must be strings");
        phrases.push_back(p.get<std::string>());
      }
      std::size_t top_k = 1;
      if (j.contains("top_k")) {
        if (!j["top_k"].is_number_unsigned() || j["top_k"].get<std::size_t>() == 0) {
          throw Error(ErrorCode::kParse, "top_k must be a positive integer");
        }
        top_k = j["top_k"].get<std::size_t>();
      }
      if (!state_->scorer) throw Unavailable("no link scorer in the workspace (run train-scorer)");
      auto out = suggest_edges(state_->taxonomy, *state_->scorer, state_->model.get(), phrases, top_k,
                               state_->book.next_id(), clock_());
      nlohmann::ordered_json res;
      res["suggestions"] = nlohmann::json::array();
      for (auto& s : out.suggestions) {
        append_journal(cfg_, journal_record("suggested", s, s.created_at));
        res["suggestions"].push_back(suggestion_json(s, state_->taxonomy));
        state_->book.add(std::move(s));
      }
      res["skipped"] = nlohmann::json::array();
      for (const auto& [phrase, note] : out.skipped) res["skipped"].push_back({{"phrase", phrase}, {"note", note}});
      return Response{200, res};
    });
  }

  /// Reloads the workspace from disk. Requests that arrive meanwhile get 503.
  void reload() {
    reloading_ = true;
    try {
      auto snap = load_snapshot();
      std::unique_lock lock(mu_);
      install(std::move(snap));
    } catch (...) {
      reloading_ = false;
      throw;
    }
    reloading_ = false;
  }

  std::string serialized_taxonomy() const {
    std::shared_lock lock(mu_);
    return serialize(state_->taxonomy);
  }

  /// Registers every endpoint on `server`.
  void mount(httplib::Server& server) {
    auto send = [](httplib::Response& res, const Response& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    server.Get("/stats", [this, send](const httplib::Request&, httplib::Response& res) { send(res, stats()); });
    server.Get(R"(/node/(\d+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, guarded([&] { return node(static_cast<std::uint32_t>(std::stoul(req.matches[1]))); }));
    });
    server.Get("/recommend", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, guarded([&] {
             unsigned r = 1;
             if (req.has_param("r")) r = static_cast<unsigned>(std::stoul(req.get_param_value("r")));
             return recommend(req.get_param_value("q"), req.get_param_value("method"), r);
           }));
    });
    server.Get("/suggestions", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, suggestions(req.get_param_value("status")));
    });
    server.Post(R"(/suggestions/(\d+)/approve)", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, guarded([&] { return decide(std::stoull(req.matches[1]), Decision::kApprove, req.body); }));
    });
    server.Post(R"(/suggestions/(\d+)/reject)", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, guarded([&] { return decide(std::stoull(req.matches[1]), Decision::kReject, req.body); }));
    });
    server.Post("/suggestions/batch", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, batch(req.body));
    });
    server.Post("/reload", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, guarded([&] {
             reload();
             return Response{200, {{"reloaded", true}}};
           }));
    });
  }

 private:
  struct Unavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
  };

  struct Snapshot {
    Taxonomy taxonomy;
    SuggestionBook book;
    std::shared_ptr<const EmbeddingModel> model;
    std::shared_ptr<const LogisticLinkScorer> scorer;
    std::vector<Listing> listings;
    std::unique_ptr<CategoryMapper> mapper;
  };

  std::unique_ptr<Snapshot> load_snapshot() const {
    auto snap = std::make_unique<Snapshot>();
    auto replayed = load_workspace_state(cfg_);
    snap->taxonomy = std::move(replayed.taxonomy);
    snap->book = std::move(replayed.book);
    snap->model = load_model_if_present(cfg_);
    snap->scorer = load_scorer_if_present(cfg_);
    snap->listings = load_listings_if_present(cfg_);
    return snap;
  }

  void install(std::unique_ptr<Snapshot> snap) {
    state_ = std::move(snap);
    state_->mapper = std::make_unique<CategoryMapper>(state_->taxonomy, state_->model.get(), cfg_.alpha);
  }

  void replace_taxonomy(Taxonomy t) {
    state_->taxonomy = std::move(t);
    state_->mapper = std::make_unique<CategoryMapper>(state_->taxonomy, state_->model.get(), cfg_.alpha);
  }

  static nlohmann::json parse_body(const std::string& body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, std::string("malformed body: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::kParse, "body must be a JSON object");
    return j;
  }

  template <typename F>
  Response guarded(F&& f) const {
    try {
      return f();
    } catch (const Error& e) {
      return Response{http_status(e.code()), {{"error", e.what()}}};
    } catch (const Unavailable& e) {
      return Response{503, {{"error", e.what()}}};
    } catch (const std::exception& e) {
      return Response{422, {{"error", e.what()}}};
    }
  }

  template <typename F>
  Response read(F&& f) const {
    if (reloading_) return Response{503, {{"error", "snapshot reload in progress"}}};
    std::shared_lock lock(mu_);
    return guarded(f);
  }

  template <typename F>
  Response write(F&& f) {
    if (reloading_) return Response{503, {{"error", "snapshot reload in progress"}}};
    std::unique_lock lock(mu_);
    return guarded(f);
  }

  WorkspaceConfig cfg_;
  Clock clock_;
  mutable std::shared_mutex mu_;
  std::atomic<bool> reloading_{false};
  std::unique_ptr<Snapshot> state_;
};

/// Blocks serving the workspace on cfg.port until the server is stopped.
inline void serve(const WorkspaceConfig& cfg, const std::string& host = "0.0.0.0") {
  Service service(cfg);
  httplib::Server server;
  service.mount(server);
  if (!server.listen(host, cfg.port)) {
    throw Error(ErrorCode::kIo, "cannot listen on " + host + ":" + std::to_string(cfg.port));
  }
}

}  // namespace taxoforge
