#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "oracles.hpp"
#include "workspace_fixture.hpp"

using namespace taxoforge;
using namespace taxoforge::testing;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const std::filesystem::path& ws, const std::string& args) {
  const auto out = ws / "stdout.txt";
  const auto err = ws / "stderr.txt";
  const std::string cmd = std::string(TAXOFORGE_CLI_PATH) + " --workspace '" + ws.string() + "' " + args + " >'" +
                          out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = io::read_file(out);
  r.err = io::read_file(err);
  return r;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  TempDir dir("cli");
  EXPECT_EQ(run(dir.path(), "").code, 1);
  EXPECT_EQ(run(dir.path(), "frobnicate").code, 1);
  auto r = run(dir.path(), "stats --bogus");
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(run(dir.path(), "recommend --query gym --method psychic").code, 1);
  EXPECT_EQ(run(dir.path(), "recommend --query gym --resolution 0").code, 1);
  EXPECT_EQ(run(dir.path(), "expand --phrases x --alpha 3").code, 1);
  EXPECT_EQ(run(dir.path(), "--help").code, 0);
}

TEST(Cli, DataErrorsExitTwo) {
  TempDir dir("cli");
  auto r = run(dir.path(), "stats");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bootstrap"), std::string::npos);
  write_text(dir.path() / "bad.tsv", "no tab here\n");
  EXPECT_EQ(run(dir.path(), "bootstrap --input '" + (dir.path() / "bad.tsv").string() + "'").code, 2);
}

TEST(Cli, BootstrapThenStats) {
  TempDir dir("cli");
  std::string seeds;
  for (const auto& l : seed_lines()) seeds += l + "\n";
  write_text(dir.path() / "seed.tsv", seeds);
  ASSERT_EQ(run(dir.path(), "bootstrap --input '" + (dir.path() / "seed.tsv").string() + "'").code, 0);
  auto r = run(dir.path(), "stats");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "# Nodes\t# Edges\t# Parents\t# Leaf Nodes\tMax Depth\n16\t15\t3\t12\t2\n");
}

TEST(Cli, BaselineCountMatchesScan) {
  TempDir dir("cli");
  make_workspace(dir.path());
  const auto store = parse_listings(listing_lines());
  for (const std::string q : {"gym", "court", "deck", "wine cellar"}) {
    auto r = run(dir.path(), "recommend --method baseline --query '" + q + "'");
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["count"].get<std::size_t>(), naive_substring_scan(store, q).size()) << q;
  }
  auto r = run(dir.path(), "recommend --query gym --query patio --resolution 2");
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = lines_of(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(nlohmann::json::parse(rows[1])["query_categories"], nlohmann::json::array({"outdoor"}));
}

TEST(Cli, ReviewFlowAndPipeline) {
  TempDir dir("cli");
  make_workspace(dir.path());
  const auto& ws = dir.path();
  write_text(ws / "phrases.txt", "rooftop deck\nwine cellar\n");
  auto r = run(ws, "suggest --phrases '" + (ws / "phrases.txt").string() + "' --top-k 1");
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(lines_of(r.out).size(), 2u);
  EXPECT_EQ(lines_of(run(ws, "review list --status pending").out).size(), 2u);
  ASSERT_EQ(run(ws, "review approve 1 --note fine").code, 0);
  EXPECT_EQ(run(ws, "review approve 1").code, 2);
  ASSERT_EQ(run(ws, "review reject 2").code, 0);
  EXPECT_EQ(lines_of(run(ws, "stats").out).at(1), "17\t16\t3\t13\t2");

  // Embeddings, expansion, pairs, scorer and pruning through the tool.
  std::string corpus;
  for (int i = 0; i < 200; ++i) {
    corpus += "the gym has a yoga studio and a tennis court near the basketball court\n";
    corpus += "granite countertop on the kitchen island next to the pantry and double oven\n";
    corpus += "swimming pool with a patio a deck and a fire pit outdoor\n";
  }
  write_text(ws / "corpus.txt", corpus);
  r = run(ws, "train-embeddings --corpus '" + (ws / "corpus.txt").string() + "' --dim 16 --epochs 2 --min-count 1");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto model_bytes = io::read_file(ws / "model.emb");
  ASSERT_EQ(run(ws, "train-embeddings --corpus '" + (ws / "corpus.txt").string() + "' --dim 16 --epochs 2 --min-count 1").code, 0);
  EXPECT_EQ(io::read_file(ws / "model.emb"), model_bytes);

  write_text(ws / "new.txt", "kitchen pantry shelf\n");
  r = run(ws, "expand --phrases '" + (ws / "new.txt").string() + "' --alpha 0");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("attached\tkitchen pantry shelf\t", 0), 0u) << r.out;
  ASSERT_EQ(run(ws, "gen-pairs --negatives 2").code, 0);
  ASSERT_EQ(run(ws, "train-scorer").code, 0);
  auto p1 = run(ws, "prune --threshold 0.01");
  ASSERT_EQ(p1.code, 0) << p1.err;
  EXPECT_NO_THROW(nlohmann::json::parse(p1.out));

  write_text(ws / "reference.tsv", "gym\tsports and recreation\npantry\tkitchen\npatio\tkitchen\n");
  r = run(ws, "eval-precision");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines_of(r.out).size(), 4u);
  r = run(ws, "eval-subtree --node kitchen --baseline-size 4");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines_of(r.out).size(), 2u);
  auto e1 = run(ws, "export-projection");
  auto e2 = run(ws, "export-projection");
  ASSERT_EQ(e1.code, 0) << e1.err;
  EXPECT_EQ(e1.out, e2.out);
  EXPECT_EQ(lines_of(e1.out).size(), 17u);  // every node but the root
}
