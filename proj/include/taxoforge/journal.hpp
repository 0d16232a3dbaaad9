#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "taxoforge/error.hpp"
#include "taxoforge/io.hpp"
#include "taxoforge/link_pruning.hpp"
#include "taxoforge/taxonomy.hpp"

namespace taxoforge {

inline std::string now_iso8601() {
  auto now = std::chrono::system_clock::now();
  std::time_t secs = std::chrono::system_clock::to_time_t(now);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

/// Hex FNV-1a digest of a taxonomy's canonical serialization.
inline std::string taxonomy_digest(const Taxonomy& t) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(serialize(t))));
  return buf;
}

/// In-memory state of all suggestions, keyed by id.
class SuggestionBook {
 public:
  std::uint64_t next_id() const { return next_id_; }

  void add(EdgeSuggestion s) {
    if (items_.contains(s.id)) throw Error(ErrorCode::kDuplicate, "suggestion id " + std::to_string(s.id) + " reused");
    next_id_ = std::max(next_id_, s.id + 1);
    items_.emplace(s.id, std::move(s));
  }

  const EdgeSuggestion* find(std::uint64_t id) const {
    auto it = items_.find(id);
    return it == items_.end() ? nullptr : &it->second;
  }
  EdgeSuggestion* find(std::uint64_t id) {
    auto it = items_.find(id);
    return it == items_.end() ? nullptr : &it->second;
  }

  EdgeSuggestion& at(std::uint64_t id) {
    if (auto* s = find(id)) return *s;
    throw Error(ErrorCode::kNotFound, "unknown suggestion id " + std::to_string(id));
  }

  std::vector<EdgeSuggestion> list(std::optional<SuggestionStatus> status = std::nullopt) const {
    std::vector<EdgeSuggestion> out;
    for (const auto& [_, s] : items_) {
      if (!status || s.status == *status) out.push_back(s);
    }
    return out;
  }

  std::size_t size() const { return items_.size(); }

 private:
  std::map<std::uint64_t, EdgeSuggestion> items_;
  std::uint64_t next_id_ = 1;
};

// --- journal records --------------------------------------------------------
//
// One JSON object per line. "suggested", "approved" and "rejected" records
// carry the suggestion id, phrase, proposed parent id, score and timestamp.
// A "checkpoint" record marks the point at which the taxonomy file was
// rewritten to include every earlier decision; replay applies only the
// decisions after the last checkpoint to the taxonomy file.

inline nlohmann::ordered_json journal_record(std::string_view event, const EdgeSuggestion& s, const std::string& ts) {
  nlohmann::ordered_json j;
  j["event"] = event;
  j["id"] = s.id;
  j["phrase"] = s.child_label;
  j["parent"] = s.proposed_parent.value;
  j["score"] = s.score;
  j["ts"] = ts;
  if (s.reviewer_note) j["note"] = *s.reviewer_note;
  return j;
}

inline nlohmann::ordered_json checkpoint_record(const Taxonomy& t, const std::string& ts) {
  nlohmann::ordered_json j;
  j["event"] = "checkpoint";
  j["digest"] = taxonomy_digest(t);
  j["ts"] = ts;
  return j;
}

struct ReplayResult {
  Taxonomy taxonomy;
  SuggestionBook book;
};

/// Rebuilds live state from the taxonomy file contents and the journal.
inline ReplayResult replay_journal(Taxonomy base, const std::vector<std::string>& lines) {
  std::vector<nlohmann::json> records;
  std::optional<std::size_t> last_checkpoint;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      records.push_back(nlohmann::json::parse(lines[i]));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, "journal line " + std::to_string(i + 1) + ": " + e.what());
    }
    if (records.back().value("event", "") == "checkpoint") last_checkpoint = records.size() - 1;
  }
  if (last_checkpoint) {
    const auto expected = records[*last_checkpoint].value("digest", "");
    if (expected != taxonomy_digest(base)) {
      throw Error(ErrorCode::kParse, "taxonomy file does not match the journal's last checkpoint");
    }
  }

  ReplayResult out{std::move(base), {}};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto event = r.value("event", "");
    if (event == "checkpoint") continue;
    const auto where = "journal record " + std::to_string(i + 1) + ": ";
    try {
      if (event == "suggested") {
        EdgeSuggestion s;
        s.id = r.at("id").get<std::uint64_t>();
        s.child_label = r.at("phrase").get<std::string>();
        s.proposed_parent = NodeId{r.at("parent").get<std::uint32_t>()};
        s.score = r.at("score").get<double>();
        s.created_at = r.at("ts").get<std::string>();
        out.book.add(std::move(s));
      } else if (event == "approved" || event == "rejected") {
        auto& s = out.book.at(r.at("id").get<std::uint64_t>());
        std::optional<std::string> note;
        if (r.contains("note")) note = r["note"].get<std::string>();
        const auto decision = event == "approved" ? Decision::kApprove : Decision::kReject;
        const auto ts = r.at("ts").get<std::string>();
        if (last_checkpoint && i < *last_checkpoint) {
          // Already folded into the taxonomy file.
          if (s.status != SuggestionStatus::kPending) throw Error(ErrorCode::kConflict, "decided twice");
          s.status = decision == Decision::kApprove ? SuggestionStatus::kApproved : SuggestionStatus::kRejected;
          s.decided_at = ts;
          s.reviewer_note = note;
        } else {
          apply_decision(out.taxonomy, s, decision, ts, note);
        }
      } else {
        throw Error(ErrorCode::kParse, "unknown event '" + event + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, where + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, where + e.what());
    }
  }
  return out;
}

}  // namespace taxoforge
