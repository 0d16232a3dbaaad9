#pragma once

// Synthetic fixtures and brute-force oracles shared by the unit and
// acceptance suites. Nothing here calls the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "taxoforge/embedding.hpp"
#include "taxoforge/random.hpp"
#include "taxoforge/recommender.hpp"
#include "taxoforge/taxonomy.hpp"

namespace taxoforge::testing {

/// Deterministic pronounceable pseudo-words: "w" + syllables, unique per index.
inline std::string make_word(std::size_t index, const std::string& prefix = "") {
  static const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  static const char* kVowels[] = {"a", "e", "i", "o", "u"};
  std::string w = prefix;
  std::size_t x = index;
  do {
    w += kOnsets[x % 14];
    x /= 14;
    w += kVowels[x % 5];
    x /= 5;
  } while (x > 0);
  return w + kOnsets[(index * 7 + 3) % 14];
}

/// Random tree of `n` nodes: node i > 0 hangs under a uniformly chosen
/// earlier node. Labels are "n<i>".
inline Taxonomy random_tree(Rng& rng, std::size_t n) {
  Taxonomy t;
  for (std::size_t i = 1; i < n; ++i) {
    NodeId parent{static_cast<std::uint32_t>(uniform_index(rng, i))};
    t.add_node("n" + std::to_string(i), parent, parent == kRootId ? NodeKind::kCategory : NodeKind::kKeyphrase);
  }
  return t;
}

/// Parent pointers as a plain map, read straight from the node records.
inline std::map<std::uint32_t, std::uint32_t> parent_map(const Taxonomy& t) {
  std::map<std::uint32_t, std::uint32_t> m;
  for (const auto& n : t.nodes()) {
    if (n.parent) m[n.id.value] = n.parent->value;
  }
  return m;
}

/// Descendants of `root` (inclusive) by repeated scans of the parent map.
inline std::set<std::uint32_t> brute_descendants(const std::map<std::uint32_t, std::uint32_t>& parents,
                                                 std::uint32_t root) {
  std::set<std::uint32_t> out{root};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& [c, p] : parents) {
      if (out.contains(p) && !out.contains(c)) {
        out.insert(c);
        grew = true;
      }
    }
  }
  return out;
}

/// Ancestors of `node` (inclusive) by following the parent map.
inline std::vector<std::uint32_t> brute_path(const std::map<std::uint32_t, std::uint32_t>& parents,
                                             std::uint32_t node) {
  std::vector<std::uint32_t> path{node};
  for (auto it = parents.find(node); it != parents.end(); it = parents.find(it->second)) path.push_back(it->second);
  return path;
}

/// Independent tree check: edge count, reachability of root from every node
/// in at most n steps, and children index consistent with parent pointers.
inline bool brute_tree_ok(const Taxonomy& t) {
  const auto parents = parent_map(t);
  if (parents.size() != t.size() - 1) return false;
  for (const auto& n : t.nodes()) {
    std::uint32_t cur = n.id.value;
    std::size_t steps = 0;
    while (cur != 0) {
      auto it = parents.find(cur);
      if (it == parents.end() || ++steps > t.size()) return false;
      cur = it->second;
    }
    for (NodeId c : t.children(n.id)) {
      auto it = parents.find(c.value);
      if (it == parents.end() || it->second != n.id.value) return false;
    }
  }
  return true;
}

// --- corpora ---------------------------------------------------------------------

/// Two disjoint vocabularies; each sentence draws all of its words from one.
struct TwoTopicCorpus {
  std::vector<std::string> lines;
  std::vector<std::string> topic_a;
  std::vector<std::string> topic_b;
};

inline TwoTopicCorpus two_topic_corpus(std::uint64_t seed, std::size_t sentences = 2000, std::size_t vocab = 300,
                                       std::size_t words_per_sentence = 20) {
  TwoTopicCorpus c;
  for (std::size_t i = 0; i < vocab; ++i) {
    c.topic_a.push_back(make_word(i, "a"));
    c.topic_b.push_back(make_word(i, "o"));
  }
  Rng rng(seed);
  for (std::size_t s = 0; s < sentences; ++s) {
    const auto& pool = (s % 2 == 0) ? c.topic_a : c.topic_b;
    std::string line;
    for (std::size_t w = 0; w < words_per_sentence; ++w) {
      if (w) line += ' ';
      line += pool[uniform_index(rng, pool.size())];
    }
    c.lines.push_back(std::move(line));
  }
  return c;
}

// --- gradient oracle -------------------------------------------------------------

/// Random objective term: `n_rows` composing input rows, one context, `n_neg`
/// negatives, entries uniform in [-scale, scale].
inline SgnsTerm<double> random_sgns_term(Rng& rng, std::size_t dim, std::size_t n_rows, std::size_t n_neg,
                                         double scale = 1.0) {
  auto vec = [&] {
    std::vector<double> v(dim);
    for (auto& x : v) x = uniform_real(rng, -scale, scale);
    return v;
  };
  SgnsTerm<double> t;
  for (std::size_t r = 0; r < n_rows; ++r) t.input_rows.push_back(vec());
  t.context = vec();
  for (std::size_t n = 0; n < n_neg; ++n) t.negatives.push_back(vec());
  return t;
}

/// Relative error ||analytic - numeric|| / max(||analytic||, ||numeric||) with
/// central differences of step `h` over every parameter of the term.
inline double gradient_check_error(const SgnsTerm<double>& term, double h = 1e-3) {
  const auto analytic = sgns_gradient(term);
  double diff2 = 0, a2 = 0, n2 = 0;
  auto probe = [&](auto select) {
    auto plus = term;
    auto minus = term;
    select(plus) += h;
    select(minus) -= h;
    return (sgns_loss(plus) - sgns_loss(minus)) / (2 * h);
  };
  auto accumulate = [&](double a, double n) {
    diff2 += (a - n) * (a - n);
    a2 += a * a;
    n2 += n * n;
  };
  const std::size_t dim = term.context.size();
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t r = 0; r < term.input_rows.size(); ++r) {
      accumulate(analytic.input_rows[r][i], probe([&](SgnsTerm<double>& t) -> double& { return t.input_rows[r][i]; }));
    }
    accumulate(analytic.context[i], probe([&](SgnsTerm<double>& t) -> double& { return t.context[i]; }));
    for (std::size_t n = 0; n < term.negatives.size(); ++n) {
      accumulate(analytic.negatives[n][i], probe([&](SgnsTerm<double>& t) -> double& { return t.negatives[n][i]; }));
    }
  }
  const double denom = std::max(std::sqrt(a2), std::sqrt(n2));
  return denom > 0 ? std::sqrt(diff2) / denom : std::sqrt(diff2);
}

// --- topic separation ------------------------------------------------------------

struct TopicSeparation {
  double intra = 0;
  double inter = 0;
};

/// Mean pairwise cosine within each vocabulary and across the two.
inline TopicSeparation topic_separation(const EmbeddingModel& m, const TwoTopicCorpus& c) {
  std::vector<PhraseVector> a, b;
  for (const auto& w : c.topic_a) a.push_back(phrase_vector(m, w));
  for (const auto& w : c.topic_b) b.push_back(phrase_vector(m, w));
  double intra = 0, inter = 0;
  std::size_t n_intra = 0, n_inter = 0;
  for (const auto* pool : {&a, &b}) {
    for (std::size_t i = 0; i < pool->size(); ++i) {
      for (std::size_t j = i + 1; j < pool->size(); ++j) {
        intra += cosine((*pool)[i], (*pool)[j]);
        ++n_intra;
      }
    }
  }
  for (const auto& x : a) {
    for (const auto& y : b) {
      inter += cosine(x, y);
      ++n_inter;
    }
  }
  return {intra / static_cast<double>(n_intra), inter / static_cast<double>(n_inter)};
}

/// Categories with their own vocabularies and candidate phrases. Each topic
/// has the category label, its phrase words, any `extra` words and `filler`
/// pseudo-words; every sentence is drawn from a single topic. One more topic
/// has no category at all. Phrase j of a category has three words, the last
/// (j % 4) of them taken from that unlabeled topic, which spreads
/// phrase-to-category similarities over a range.
struct ExpansionFixture {
  std::vector<std::string> categories;
  std::vector<std::vector<std::string>> phrases;  // per category
  std::vector<std::string> corpus;
};

inline ExpansionFixture expansion_fixture(std::uint64_t seed, std::vector<std::string> categories,
                                          std::vector<std::vector<std::string>> extra = {},
                                          std::size_t phrases_per_category = 20, std::size_t filler = 300,
                                          std::size_t sentences = 3000) {
  ExpansionFixture f;
  f.categories = std::move(categories);
  const std::size_t n_cat = f.categories.size();
  extra.resize(n_cat);
  std::vector<std::vector<std::string>> vocab(n_cat);
  std::vector<std::vector<std::string>> words(n_cat);
  for (std::size_t c = 0; c < n_cat; ++c) {
    const std::string prefix(1, static_cast<char>('b' + c));
    for (std::size_t i = 0; i < 3 * phrases_per_category; ++i) words[c].push_back(make_word(i, "x" + prefix));
    vocab[c] = words[c];
    vocab[c].insert(vocab[c].end(), extra[c].begin(), extra[c].end());
    for (std::size_t i = 0; i < filler; ++i) vocab[c].push_back(make_word(i, prefix));
    vocab[c].push_back(f.categories[c]);
  }
  std::vector<std::string> neutral;
  for (std::size_t i = 0; i < filler; ++i) neutral.push_back(make_word(i, "y"));
  f.phrases.resize(n_cat);
  for (std::size_t c = 0; c < n_cat; ++c) {
    for (std::size_t j = 0; j < phrases_per_category; ++j) {
      std::string phrase;
      for (std::size_t k = 0; k < 3; ++k) {
        const bool borrowed = k + j % 4 >= 3;
        if (k) phrase += ' ';
        phrase += borrowed ? neutral[(3 * (c * phrases_per_category + j) + k) % neutral.size()] : words[c][3 * j + k];
      }
      f.phrases[c].push_back(std::move(phrase));
    }
  }
  Rng rng(seed);
  for (std::size_t s = 0; s < sentences; ++s) {
    const bool unlabeled = s % (n_cat + 1) == n_cat;
    const auto& pool = unlabeled ? neutral : vocab[s % (n_cat + 1)];
    std::string line;
    for (std::size_t w = 0; w < 20; ++w) {
      if (w) line += ' ';
      // The category label recurs so it sits squarely inside its topic.
      line += (w % 5 == 0 && !unlabeled) ? pool.back() : pool[uniform_index(rng, pool.size())];
    }
    f.corpus.push_back(std::move(line));
  }
  return f;
}

/// Small model over the "n<i>" labels of random_tree (i < 60).
inline EmbeddingModel train_label_model() {
  Rng rng(5);
  std::vector<std::string> lines;
  for (int s = 0; s < 400; ++s) {
    std::string line;
    for (int w = 0; w < 8; ++w) line += (w ? " n" : "n") + std::to_string(uniform_index(rng, 60));
    lines.push_back(line);
  }
  EmbeddingConfig cfg;
  cfg.dim = 12;
  cfg.buckets = 2048;
  cfg.min_count = 1;
  cfg.epochs = 2;
  return train_on_lines(lines, cfg);
}

/// Three-level taxonomy whose vocabulary is clustered in the corpus:
/// root -> tops -> subs -> leaves. Every sub-topic and top-level topic also
/// owns `filler` unlabeled words. A sentence is drawn for one sub-topic: mostly
/// its own words, some from sibling sub-topics and the parent topic, plus the
/// sub-topic label. Half the time the label slot names the next sibling sub
/// instead (a confounder), so text similarity alone often prefers the wrong
/// parent.
struct ClusteredFixture {
  Taxonomy truth;
  std::vector<std::string> corpus;
  std::vector<std::string> tops;
  std::vector<std::vector<std::string>> subs;                 // per top
  std::vector<std::vector<std::vector<std::string>>> leaves;  // per top, per sub
};

inline ClusteredFixture clustered_fixture(std::uint64_t seed, std::size_t n_tops = 3, std::size_t n_subs = 3,
                                          std::size_t n_leaves = 6, std::size_t filler = 40,
                                          std::size_t sentences = 4000) {
  ClusteredFixture f;
  std::size_t word = 0;
  std::vector<std::vector<std::string>> top_pool(n_tops);
  std::vector<std::vector<std::vector<std::string>>> sub_pool(n_tops);
  for (std::size_t a = 0; a < n_tops; ++a) {
    f.tops.push_back(make_word(word++, "t"));
    NodeId top = f.truth.add_node(f.tops.back(), kRootId, NodeKind::kCategory);
    top_pool[a].push_back(f.tops.back());
    for (std::size_t i = 0; i < filler; ++i) top_pool[a].push_back(make_word(word++, "f"));
    f.subs.emplace_back();
    f.leaves.emplace_back();
    sub_pool[a].resize(n_subs);
    for (std::size_t b = 0; b < n_subs; ++b) {
      f.subs[a].push_back(make_word(word++, "s"));
      NodeId sub = f.truth.add_node(f.subs[a].back(), top, NodeKind::kKeyphrase);
      f.leaves[a].emplace_back();
      for (std::size_t c = 0; c < n_leaves; ++c) {
        f.leaves[a][b].push_back(make_word(word++, "l"));
        f.truth.add_node(f.leaves[a][b].back(), sub, NodeKind::kKeyphrase);
        sub_pool[a][b].push_back(f.leaves[a][b].back());
      }
      for (std::size_t i = 0; i < filler; ++i) sub_pool[a][b].push_back(make_word(word++, "g"));
    }
  }
  Rng rng(seed);
  auto pick = [&](const std::vector<std::string>& pool) -> const std::string& {
    return pool[uniform_index(rng, pool.size())];
  };
  for (std::size_t s = 0; s < sentences; ++s) {
    const std::size_t a = uniform_index(rng, n_tops);
    const std::size_t b = uniform_index(rng, n_subs);
    std::string line;
    for (std::size_t w = 0; w < 20; ++w) {
      if (w) line += ' ';
      const double u = uniform01(rng);
      if (u < 0.6) {
        line += pick(sub_pool[a][b]);
      } else if (u < 0.75) {
        line += pick(sub_pool[a][uniform_index(rng, n_subs)]);
      } else if (u < 0.9) {
        line += pick(top_pool[a]);
      } else {
        line += uniform01(rng) < 0.5 ? f.subs[a][(b + 1) % n_subs] : f.subs[a][b];
      }
    }
    f.corpus.push_back(std::move(line));
  }
  return f;
}

/// Listing store over a small taxonomy of four-letter pseudo-words, so no
/// label is a substring of another. Leaves have compound siblings
/// ("<leaf> <modifier>") under the same sub-topic; noise insights use words
/// that never contain a label.
struct ListingFixture {
  Taxonomy taxonomy;
  std::vector<Listing> listings;
  std::vector<std::string> corpus;  // one line per listing, for training
  std::vector<std::string> label_queries;
  std::vector<std::string> other_queries;
};

inline ListingFixture listing_fixture(std::uint64_t seed, std::size_t n_listings = 600) {
  ListingFixture f;
  Rng rng(seed);
  std::vector<std::string> mods;
  for (std::size_t i = 0; i < 8; ++i) mods.push_back(make_word(i * 5, "m"));
  std::vector<std::vector<std::string>> home(4);  // insight pool per top-level topic
  std::size_t leaf_word = 0;
  for (std::size_t a = 0; a < 4; ++a) {
    const auto top_label = make_word(a * 11, "t");
    NodeId top = f.taxonomy.add_node(top_label, kRootId, NodeKind::kCategory);
    home[a].push_back(top_label);
    for (std::size_t b = 0; b < 3; ++b) {
      const auto sub_label = make_word(a * 3 + b + 13, "s");
      NodeId sub = f.taxonomy.add_node(sub_label, top, NodeKind::kKeyphrase);
      home[a].push_back(sub_label);
      for (std::size_t c = 0; c < 5; ++c) {
        const auto leaf = make_word(leaf_word++, "l");
        f.taxonomy.add_node(leaf, sub, NodeKind::kKeyphrase);
        home[a].push_back(leaf);
        for (std::size_t k = 0; k < 2; ++k) {
          auto compound = leaf + " " + mods[uniform_index(rng, mods.size())];
          if (f.taxonomy.find(compound)) continue;
          f.taxonomy.add_node(compound, sub, NodeKind::kKeyphrase);
          home[a].push_back(std::move(compound));
        }
      }
    }
  }
  for (std::size_t i = 0; i < n_listings; ++i) {
    const std::size_t a = uniform_index(rng, home.size());
    nlohmann::json rec;
    rec["listing_id"] = "z" + std::to_string(1000 + i);
    rec["insights"] = nlohmann::json::array();
    std::string line;
    const std::size_t n = 2 + uniform_index(rng, 5);
    for (std::size_t k = 0; k < n; ++k) {
      const double u = uniform01(rng);
      std::string ins;
      if (u < 0.7) {
        ins = home[a][uniform_index(rng, home[a].size())];
      } else if (u < 0.85) {
        const auto& other = home[uniform_index(rng, home.size())];
        ins = other[uniform_index(rng, other.size())];
      } else {
        ins = make_word(uniform_index(rng, 60), "w") + " " + make_word(uniform_index(rng, 60), "w");
      }
      line += (k ? " " : "") + ins;
      rec["insights"].push_back(std::move(ins));
    }
    f.listings.push_back(parse_listing(rec));
    f.corpus.push_back(std::move(line));
  }
  // Every top, the first sub of each top, two leaves per top and one compound.
  for (std::size_t a = 0; a < 4; ++a) {
    f.label_queries.push_back(home[a][0]);
    f.label_queries.push_back(home[a][1]);
    f.label_queries.push_back(home[a][2]);
    f.label_queries.push_back(home[a][home[a].size() - 1]);
  }
  f.other_queries = {mods[0], mods[3], make_word(7, "w"), "qxqxqx vyvyvy"};
  return f;
}

}  // namespace taxoforge::testing
