#include "feattrans/mst.hpp"

#include "oracles.hpp"
#include "scratch_dir.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace feattrans;

namespace {

AffinityMatrix undirected(std::vector<std::string> names, Matrix v) {
  return AffinityMatrix{std::move(names), std::move(v), AffinityKind::UndirectedU};
}

// Symmetric, zero diagonal, weights on a 1/1024 grid so every sum is exact.
Matrix random_symmetric(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> w(0, 1024);
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) m(i, j) = m(j, i) = w(rng) / 1024.0;
  return m;
}

std::vector<std::string> names_of(Eigen::Index n) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back("n" + std::to_string(i));
  return out;
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t k = 0;
  for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++k;
  return k;
}

}  // namespace

TEST_CASE("kruskal examples") {
  SUBCASE("triangle") {
    const auto mst = kruskal(undirected({"A", "B", "C"}, (Matrix(3, 3) << 0, 1, 3, 1, 0, 2, 3, 2, 0).finished()));
    REQUIRE(mst.edges.size() == 2);
    CHECK(mst.edges[0] == MstEdge{"A", "B", 1.0});
    CHECK(mst.edges[1] == MstEdge{"B", "C", 2.0});
    CHECK(mst.total_weight == 3.0);
  }
  SUBCASE("two nodes") {
    const auto mst = kruskal(undirected({"y", "x"}, (Matrix(2, 2) << 0, 0.4, 0.4, 0).finished()));
    REQUIRE(mst.edges.size() == 1);
    CHECK(mst.edges[0] == MstEdge{"x", "y", 0.4});
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(kruskal(undirected({"a"}, Matrix::Zero(1, 1))), Error);
    try {
      kruskal(undirected({"a", "b"}, (Matrix(2, 2) << 0, 1, 2, 0).finished()));
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotUndirected);
    }
    Matrix nan = Matrix::Zero(2, 2);
    nan(0, 1) = nan(1, 0) = std::nan("");
    CHECK_THROWS_AS(kruskal(undirected({"a", "b"}, nan)), Error);
    CHECK_THROWS_AS(kruskal(undirected({"a", "a"}, Matrix::Zero(2, 2))), Error);
  }
}

TEST_CASE("kruskal agrees with exhaustive enumeration") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 20; ++t) {
    const auto w = random_symmetric(6, rng);
    const auto mst = kruskal(undirected(names_of(6), w));
    CHECK(mst.edges.size() == 5);
    CHECK(mst.total_weight == oracle::brute_force_mst_weight(w));
  }
}

TEST_CASE("kruskal does not depend on node order") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 20; ++t) {
    // Coarse weights so ties are common.
    Matrix w = Matrix::Zero(7, 7);
    for (Eigen::Index i = 0; i < 7; ++i)
      for (Eigen::Index j = i + 1; j < 7; ++j) w(i, j) = w(j, i) = double(rng() % 4);
    const auto names = names_of(7);
    std::vector<Eigen::Index> perm(7);
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix pw(7, 7);
    std::vector<std::string> pnames(7);
    for (Eigen::Index i = 0; i < 7; ++i) {
      pnames[std::size_t(i)] = names[std::size_t(perm[std::size_t(i)])];
      for (Eigen::Index j = 0; j < 7; ++j) pw(i, j) = w(perm[std::size_t(i)], perm[std::size_t(j)]);
    }
    const auto a = kruskal(undirected(names, w));
    const auto b = kruskal(undirected(pnames, pw));
    CHECK(a.edges == b.edges);
    CHECK(to_json(a) == to_json(b));
  }
}

TEST_CASE("every tree edge is a lightest edge across the cut it defines") {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 10; ++t) {
    const auto w = random_symmetric(8, rng);
    const auto names = names_of(8);
    const auto mst = kruskal(undirected(names, w));
    auto index = [&](const std::string& s) { return Eigen::Index(std::find(names.begin(), names.end(), s) - names.begin()); };
    for (std::size_t skip = 0; skip < mst.edges.size(); ++skip) {
      // Components of the tree without edge `skip`.
      UnionFind uf(8);
      for (std::size_t e = 0; e < mst.edges.size(); ++e) {
        if (e != skip) uf.unite(std::size_t(index(mst.edges[e].a)), std::size_t(index(mst.edges[e].b)));
      }
      const auto side = uf.find(std::size_t(index(mst.edges[skip].a)));
      for (Eigen::Index i = 0; i < 8; ++i)
        for (Eigen::Index j = 0; j < 8; ++j) {
          if (uf.find(std::size_t(i)) == side && uf.find(std::size_t(j)) != side) CHECK(mst.edges[skip].weight <= w(i, j));
        }
    }
  }
}

TEST_CASE("export") {
  const auto mst = kruskal(undirected({"A", "B", "C"}, (Matrix(3, 3) << 0, 1, 3, 1, 0, 2, 3, 2, 0).finished()));
  SUBCASE("dot") {
    const auto dot = to_dot(mst);
    CHECK(dot.rfind("graph mst {", 0) == 0);
    CHECK(count(dot, " -- ") == 2);
    CHECK(dot.find("\"A\" -- \"B\"") != std::string::npos);
    CHECK(to_dot(mst) == dot);
  }
  SUBCASE("json round trip") {
    CHECK(mst_from_json(to_json(mst)) == mst);
    std::mt19937_64 rng(15);
    const auto big = kruskal(undirected(names_of(9), random_symmetric(9, rng) / 3.0));
    CHECK(mst_from_json(to_json(big)) == big);
    CHECK_THROWS_AS(mst_from_json("{\"nodes\": 3}"), Error);
  }
  SUBCASE("files are byte-identical across runs") {
    const fixture::ScratchDir scratch("mst");
    const auto& dir = scratch.path();
    export_mst(mst, ExportFormat::Dot, dir / "a.dot");
    export_mst(kruskal(undirected({"A", "B", "C"}, (Matrix(3, 3) << 0, 1, 3, 1, 0, 2, 3, 2, 0).finished())),
               ExportFormat::Dot, dir / "b.dot");
    std::ifstream a(dir / "a.dot"), b(dir / "b.dot");
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(!sa.empty());
    CHECK(sa == sb);
  }
}
