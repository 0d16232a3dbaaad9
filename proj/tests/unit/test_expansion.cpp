#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "taxoforge/expansion.hpp"

using namespace taxoforge;
using namespace taxoforge::testing;

namespace {

struct Trained {
  ExpansionFixture fixture;
  EmbeddingModel model;
};

const Trained& trained() {
  static const Trained t = [] {
    auto f = expansion_fixture(11, {"kitchen", "garage", "garden"}, {{"granite", "countertop"}});
    auto m = train_on_lines(f.corpus, EmbeddingConfig{});
    return Trained{std::move(f), std::move(m)};
  }();
  return t;
}

Taxonomy category_taxonomy(const std::vector<std::string>& cats) {
  Taxonomy t;
  for (const auto& c : cats) t.add_node(c, kRootId, NodeKind::kCategory);
  return t;
}

std::vector<std::string> all_phrases(const ExpansionFixture& f) {
  std::vector<std::string> out;
  for (const auto& ps : f.phrases) out.insert(out.end(), ps.begin(), ps.end());
  return out;
}

}  // namespace

TEST(SeedFile, ParsesAndNormalizes) {
  auto recs = parse_seed_lines({"Kitchen\tGranite Countertops|island|island", "", "  ", "Garage\t2-Car"});
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].category, "kitchen");
  EXPECT_EQ(recs[0].keywords, (std::vector<std::string>{"granite countertops", "island"}));
  EXPECT_EQ(recs[1].keywords, (std::vector<std::string>{"2-car"}));
  EXPECT_THROW(parse_seed_lines({"no tab here"}), Error);
  EXPECT_THROW(parse_seed_lines({"!!!\tx"}), Error);
}

TEST(Bootstrap, OneRecordTwoKeywords) {
  auto t = bootstrap_seed({{"kitchen", {"island", "pantry"}}});
  EXPECT_EQ(taxonomy_stats(t), (TaxonomyStats{4, 3, 1, 2, 2}));
}

TEST(Bootstrap, Errors) {
  EXPECT_THROW(bootstrap_seed({}), Error);
  try {
    bootstrap_seed({{"kitchen", {"kitchen"}}});
    FAIL() << "duplicate accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicate);
  }
  EXPECT_THROW(bootstrap_seed({{"kitchen", {"island"}}, {"garage", {"island"}}}), Error);
}

TEST(Attach, GraniteCountertopGoesUnderKitchen) {
  const auto& [f, m] = trained();
  const auto phrase = phrase_vector(m, "granite countertop");
  const double to_kitchen = cosine(phrase, phrase_vector(m, "kitchen"));
  const double to_garage = cosine(phrase, phrase_vector(m, "garage"));
  ASSERT_GT(to_kitchen, 0.8);
  ASSERT_LT(to_garage, 0.8);
  auto t = category_taxonomy({"kitchen", "garage"});
  auto report = attach_by_embedding(t, m, {"granite countertop"}, 0.8);
  ASSERT_EQ(report.attached.size(), 1u);
  EXPECT_EQ(report.attached[0].parent, "kitchen");
  EXPECT_NEAR(report.attached[0].similarity, to_kitchen, 1e-12);
  EXPECT_EQ(t.parent(*t.find("granite countertop")), t.find("kitchen"));
}

TEST(Attach, PreExistingAndDegenerate) {
  const auto& [f, m] = trained();
  auto t = category_taxonomy(f.categories);
  auto report = attach_by_embedding(t, m, {"Kitchen", "!!!"}, 0.8);
  EXPECT_EQ(report.pre_existing, std::vector<std::string>{"kitchen"});
  ASSERT_EQ(report.skipped.size(), 1u);
  EXPECT_EQ(report.skipped[0].best_similarity, -std::numeric_limits<double>::infinity());
  EXPECT_TRUE(report.attached.empty());
}

TEST(Attach, AlphaZeroAttachesEverything) {
  const auto& [f, m] = trained();
  auto t = category_taxonomy(f.categories);
  auto phrases = all_phrases(f);
  auto report = attach_by_embedding(t, m, phrases, 0.0);
  EXPECT_EQ(report.attached.size(), phrases.size());
  EXPECT_EQ(t.size(), 1 + f.categories.size() + phrases.size());
}

TEST(Attach, ContractAndMonotoneInAlpha) {
  const auto& [f, m] = trained();
  const auto phrases = all_phrases(f);
  std::vector<PhraseVector> cats;
  for (const auto& c : f.categories) cats.push_back(phrase_vector(m, c));
  std::set<std::string> previous;
  bool first = true;
  std::vector<std::size_t> sizes;
  for (double alpha : {0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95}) {
    auto t = category_taxonomy(f.categories);
    const auto before = t.size();
    auto report = attach_by_embedding(t, m, phrases, alpha);
    EXPECT_TRUE(brute_tree_ok(t));
    EXPECT_EQ(t.size(), before + report.attached.size());
    std::set<std::string> now;
    for (const auto& a : report.attached) {
      now.insert(a.phrase);
      const auto pv = phrase_vector(m, a.phrase);
      double to_parent = 0;
      for (std::size_t c = 0; c < cats.size(); ++c) {
        if (f.categories[c] == a.parent) to_parent = cosine(pv, cats[c]);
      }
      EXPECT_GE(to_parent, alpha);
      for (const auto& cv : cats) EXPECT_GE(to_parent, cosine(pv, cv));
    }
    for (const auto& s : report.skipped) EXPECT_LT(s.best_similarity, alpha);
    if (!first) {
      EXPECT_TRUE(std::includes(previous.begin(), previous.end(), now.begin(), now.end())) << alpha;
    }
    sizes.push_back(now.size());
    previous = std::move(now);
    first = false;
  }
  // The fixture spreads similarities, so the sweep really drops phrases.
  EXPECT_GT(sizes.front(), sizes.back());
}

TEST(Attach, RerunIsIdempotent) {
  const auto& [f, m] = trained();
  auto t = category_taxonomy(f.categories);
  auto phrases = all_phrases(f);
  auto first = attach_by_embedding(t, m, phrases, 0.8);
  const auto snapshot = serialize(t);
  auto second = attach_by_embedding(t, m, phrases, 0.8);
  EXPECT_TRUE(second.attached.empty());
  EXPECT_EQ(second.pre_existing.size(), first.attached.size());
  EXPECT_EQ(serialize(t), snapshot);
}

TEST(Attach, RejectsBadArguments) {
  const auto& [f, m] = trained();
  auto t = category_taxonomy(f.categories);
  EXPECT_THROW(attach_by_embedding(t, m, {}, 1.5), Error);
  EXPECT_THROW(attach_by_embedding(t, m, {}, 0.5, {NodeKind::kRoot}), Error);
}
