#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mgmn/dataset.hpp"
#include "mgmn/ged.hpp"
#include "mgmn/log.hpp"

namespace mgmn {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mgmn_dataset_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const char* kTwoGraphs =
    "{\"id\":\"a\",\"nodes\":[[1.0],[2.0]],\"edges\":[[0,1]]}\n"
    "{\"id\":\"b\",\"nodes\":[[3.0]],\"edges\":[]}\n";

TEST(LoadDataset, EmptyPairsFileWarns) {
  const fs::path dir = fresh_dir("empty_pairs");
  write(dir / "graphs.jsonl", kTwoGraphs);
  write(dir / "pairs.jsonl", "");
  std::vector<std::string> warnings;
  const auto old = log::set_sink([&](log::Level l, std::string_view m) {
    if (l == log::Level::warning) warnings.emplace_back(m);
  });
  const Dataset ds = load_dataset(dir);
  log::set_sink(old);
  EXPECT_EQ(ds.graphs.size(), 2u);
  EXPECT_TRUE(ds.pairs.empty());
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(LoadDataset, UnknownIdIsNamed) {
  const fs::path dir = fresh_dir("unknown_id");
  write(dir / "graphs.jsonl", kTwoGraphs);
  write(dir / "pairs.jsonl", "{\"g1\":\"a\",\"g2\":\"b\",\"y\":0.5}\n{\"g1\":\"a\",\"g2\":\"zz9\",\"y\":0.5}\n");
  try {
    load_dataset(dir);
    FAIL() << "expected an error";
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("zz9"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
  }
}

TEST(LoadDataset, SchemaViolationCarriesLineNumber) {
  const fs::path dir = fresh_dir("schema");
  write(dir / "graphs.jsonl", std::string(kTwoGraphs) + "{\"id\":\"c\",\"edges\":[]}\n");
  write(dir / "pairs.jsonl", "");
  try {
    load_dataset(dir);
    FAIL() << "expected an error";
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("graphs.jsonl:3"), std::string::npos) << e.what();
  }
}

TEST(LoadDataset, InconsistentFeatureWidthIsRejected) {
  const fs::path dir = fresh_dir("width");
  write(dir / "graphs.jsonl", std::string(kTwoGraphs) + "{\"id\":\"c\",\"nodes\":[[1.0,2.0]],\"edges\":[]}\n");
  write(dir / "pairs.jsonl", "");
  EXPECT_THROW(load_dataset(dir), DatasetError);
}

TEST(LoadDataset, BadEdgeIsRejected) {
  const fs::path dir = fresh_dir("bad_edge");
  write(dir / "graphs.jsonl", "{\"id\":\"a\",\"nodes\":[[1.0],[2.0],[3.0]],\"edges\":[[0,5]]}\n");
  write(dir / "pairs.jsonl", "");
  EXPECT_THROW(load_dataset(dir), DatasetError);
}

TEST(SaveDataset, RoundTripIsStructurallyIdentical) {
  GedDatasetOptions o;
  o.graphs = 12;
  o.seed = 3;
  const Dataset ds = gen_ged_dataset(o);
  const fs::path dir = fresh_dir("round_trip");
  save_dataset(ds, dir);
  const Dataset back = load_dataset(dir);
  ASSERT_EQ(back.graphs.size(), ds.graphs.size());
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    EXPECT_EQ(back.graphs[i].id, ds.graphs[i].id);
    EXPECT_EQ(back.graphs[i].features, ds.graphs[i].features);
    EXPECT_EQ(back.graphs[i].labels, ds.graphs[i].labels);
    ASSERT_EQ(back.graphs[i].edges.size(), ds.graphs[i].edges.size());
    for (std::size_t e = 0; e < ds.graphs[i].edges.size(); ++e) {
      EXPECT_EQ(back.graphs[i].edges[e].u, ds.graphs[i].edges[e].u);
      EXPECT_EQ(back.graphs[i].edges[e].v, ds.graphs[i].edges[e].v);
    }
  }
  ASSERT_EQ(back.pairs.size(), ds.pairs.size());
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    EXPECT_EQ(back.pairs[i].g1, ds.pairs[i].g1);
    EXPECT_EQ(back.pairs[i].target, ds.pairs[i].target);
  }
  EXPECT_EQ(back.split.train, ds.split.train);
  EXPECT_EQ(back.split.test, ds.split.test);
}

TEST(SaveDataset, GraphKeysFollowStableOrder) {
  const fs::path dir = fresh_dir("key_order");
  CloneDatasetOptions o;
  o.groups = 3;
  o.variants = 1;
  save_dataset(gen_clone_dataset(o), dir);
  std::ifstream is(dir / "graphs.jsonl");
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line.rfind("{\"id\":", 0), 0u);
  EXPECT_LT(line.find("\"group\""), line.find("\"nodes\""));
  EXPECT_LT(line.find("\"nodes\""), line.find("\"edges\""));
}

TEST(GenGed, TargetsAndCounts) {
  GedDatasetOptions o;
  o.graphs = 50;
  o.min_nodes = 6;
  o.max_nodes = 8;
  o.seed = 5;
  const Dataset ds = gen_ged_dataset(o);
  EXPECT_EQ(ds.pairs.size(), 1225u);
  for (const auto& p : ds.pairs) {
    EXPECT_GT(p.target, 0.0);
    EXPECT_LE(p.target, 1.0);
  }
  for (const auto& g : ds.graphs) {
    EXPECT_NO_THROW(check(g));
    EXPECT_GE(g.num_nodes(), 6);
    EXPECT_LE(g.num_nodes(), 8);
  }
  EXPECT_EQ(ds.split.train.size(), 30u);
  EXPECT_EQ(ds.split.val.size(), 10u);
  EXPECT_EQ(ds.split.test.size(), 10u);
  EXPECT_NO_THROW(check_split_disjoint(ds));
}

TEST(GenGed, SelfPairsScoreOne) {
  GedDatasetOptions o;
  o.graphs = 8;
  o.self_pairs = true;
  const Dataset ds = gen_ged_dataset(o);
  int self = 0;
  for (const auto& p : ds.pairs) {
    if (p.g1 == p.g2) {
      EXPECT_EQ(p.target, 1.0);
      ++self;
    }
  }
  EXPECT_EQ(self, 8);
}

TEST(GenGed, TargetsAgreeWithBruteForce) {
  GedDatasetOptions o;
  o.graphs = 10;
  o.min_nodes = 4;
  o.max_nodes = 5;
  o.seed = 9;
  const Dataset ds = gen_ged_dataset(o);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& p = ds.pairs[i * ds.pairs.size() / 20];
    const Graph& a = ds.graph(p.g1);
    const Graph& b = ds.graph(p.g2);
    EXPECT_DOUBLE_EQ(p.target, normalized_similarity(ged_bruteforce(a, b).distance, a.num_nodes(), b.num_nodes()));
  }
}

TEST(GenGed, InfeasibleBudgetIsRefused) {
  GedDatasetOptions o;
  o.max_nodes = 12;
  EXPECT_THROW(gen_ged_dataset(o), DatasetError);
}

TEST(GenGed, SeededRunsAreByteIdentical) {
  GedDatasetOptions o;
  o.graphs = 15;
  o.seed = 7;
  const fs::path a = fresh_dir("det_a");
  const fs::path b = fresh_dir("det_b");
  save_dataset(gen_ged_dataset(o), a);
  save_dataset(gen_ged_dataset(o), b);
  for (const char* f : {"graphs.jsonl", "pairs.jsonl", "split.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(GenClone, ZeroBudgetVariantsAreIsomorphic) {
  CloneDatasetOptions o;
  o.groups = 6;
  o.variants = 3;
  o.budget = 0;
  o.min_nodes = 5;
  o.max_nodes = 9;
  const Dataset ds = gen_clone_dataset(o);
  for (const Graph& g : ds.graphs) {
    const Graph& seed = ds.graph(g.group.value() + "_v0");
    EXPECT_EQ(ged_exact(seed, g).distance, 0.0);
    std::multiset<std::vector<double>> rows_a;
    std::multiset<std::vector<double>> rows_b;
    for (int i = 0; i < g.num_nodes(); ++i) {
      const Eigen::RowVectorXd ra = seed.features.row(i);
      const Eigen::RowVectorXd rb = g.features.row(i);
      rows_a.insert(std::vector<double>(ra.data(), ra.data() + ra.size()));
      rows_b.insert(std::vector<double>(rb.data(), rb.data() + rb.size()));
    }
    EXPECT_EQ(rows_a, rows_b);
  }
}

bool connected(const Graph& g) {
  std::vector<int> seen(static_cast<std::size_t>(g.num_nodes()), 0);
  std::vector<int> stack = {0};
  seen[0] = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (const Edge& e : g.edges) {
      for (auto [a, b] : {std::pair{e.u, e.v}, std::pair{e.v, e.u}}) {
        if (a == u && !seen[static_cast<std::size_t>(b)]) {
          seen[static_cast<std::size_t>(b)] = 1;
          stack.push_back(b);
        }
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
}

TEST(GenClone, VariantsStayConnectedAndValid) {
  CloneDatasetOptions o;
  o.groups = 30;
  o.variants = 4;
  o.budget = 3;
  const Dataset ds = gen_clone_dataset(o);
  EXPECT_EQ(ds.graphs.size(), 150u);
  for (const Graph& g : ds.graphs) {
    EXPECT_TRUE(connected(g)) << g.id;
    EXPECT_NO_THROW(check(g));
    EXPECT_EQ(g.feature_dim(), 6);
  }
}

TEST(GenClone, SplitsByGroupEightyTenTen) {
  CloneDatasetOptions o;
  o.groups = 100;
  o.variants = 4;
  const Dataset ds = gen_clone_dataset(o);
  EXPECT_EQ(ds.split.train.size(), 400u);
  EXPECT_EQ(ds.split.val.size(), 50u);
  EXPECT_EQ(ds.split.test.size(), 50u);
  EXPECT_NO_THROW(check_split_disjoint(ds));
  std::map<std::string, int> part;
  for (const auto& id : ds.split.train) part[id] = 0;
  for (const auto& id : ds.split.val) part[id] = 1;
  for (const auto& id : ds.split.test) part[id] = 2;
  for (const auto& p : ds.pairs) {
    EXPECT_EQ(part.at(p.g1), part.at(p.g2));
    EXPECT_EQ(p.target == 1.0, ds.graph(p.g1).group == ds.graph(p.g2).group);
  }
}

TEST(CheckSplit, GraphInTwoSplitsIsRejected) {
  GedDatasetOptions o;
  o.graphs = 5;
  Dataset ds = gen_ged_dataset(o);
  ds.split.val.push_back(ds.split.train.front());
  EXPECT_THROW(check_split_disjoint(ds), DatasetError);
}

}  // namespace
}  // namespace mgmn
