#include <doctest.h>

#include <cmath>

#include "error.hpp"
#include "metrics.hpp"
#include "oracles.hpp"

using namespace gad;

TEST_CASE("auroc hand values") {
  const std::vector<double> s{0.9, 0.8, 0.1};
  CHECK(auroc(s, std::vector<int>{1, 0, 0}) == 1.0);
  CHECK(auroc(s, std::vector<int>{0, 0, 1}) == 0.0);
  CHECK(auroc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1, 0}) == 0.5);
  CHECK_THROWS_AS(auroc(s, std::vector<int>{1, 1, 1}), Error);
  CHECK_THROWS_AS(auroc(s, std::vector<int>{1, 0}), Error);
}

TEST_CASE("auprc hand values") {
  CHECK(auprc(std::vector<double>{0.9, 0.8, 0.1}, std::vector<int>{1, 0, 0}) == 1.0);
  // Ranking 0 1 0 1: precision at recall 1/2 is 1/2, at recall 1 is 1/2.
  CHECK(auprc(std::vector<double>{4, 3, 2, 1}, std::vector<int>{0, 1, 0, 1}) == doctest::Approx(0.5));
  // All tied: one group, precision = base rate.
  CHECK(auprc(std::vector<double>{1, 1, 1, 1}, std::vector<int>{1, 0, 0, 0}) == 0.25);
  CHECK_THROWS_AS(auprc(std::vector<double>{1, 2}, std::vector<int>{0, 0}), Error);
}

TEST_CASE("metrics match brute-force oracles") {
  Rng rng(2024);
  int with_ties = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t n = 2 + rng.index(60);
    const bool tied = inst % 3 == 0;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = tied ? static_cast<double>(rng.index(5)) : rng.normal();
      y[i] = rng.bernoulli(0.3) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) ++with_ties;
    CHECK(std::abs(auroc(s, y) - oracle::pairwise_auroc(s, y)) <= 1e-12);
    CHECK(std::abs(auprc(s, y) - oracle::threshold_ap(s, y)) <= 1e-12);
  }
  CHECK(with_ties >= 30);
}

TEST_CASE("descending ranks average ties") {
  const std::vector<double> s{0.2, 0.9, 0.2, 0.5};
  const auto r = descending_ranks(s);
  CHECK(r == std::vector<double>{3.5, 1.0, 3.5, 2.0});
  Rng rng(5);
  std::vector<double> t(40);
  for (double& v : t) v = static_cast<double>(rng.index(6));
  const auto rt = descending_ranks(t);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(rt[i] == oracle::quadratic_rank(t, i));
}

TEST_CASE("hop buckets") {
  CHECK(bucket_for_hop(1) == HopBucket::kOne);
  CHECK(bucket_for_hop(3) == HopBucket::kThree);
  CHECK(bucket_for_hop(4) == HopBucket::kFourPlus);
  CHECK(bucket_for_hop(17) == HopBucket::kFourPlus);
  CHECK(bucket_for_hop(kUnreachable) == HopBucket::kUnreachable);
  CHECK_THROWS_AS(bucket_for_hop(0), Error);
  CHECK(to_string(HopBucket::kFourPlus) == ">=4");
}

TEST_CASE("hop average rank matches a quadratic re-rank") {
  Rng rng(7);
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t t = 5 + rng.index(40);
    std::vector<double> s(t);
    for (double& v : s) v = static_cast<double>(rng.index(8));
    std::vector<RankedAnomaly> anoms;
    for (auto pos : rng.sample_indices(t, 1 + rng.index(t / 2))) {
      const std::uint32_t hops[] = {1, 2, 3, 4, 6, kUnreachable};
      anoms.push_back({pos, hops[rng.index(6)]});
    }
    const auto got = hop_avg_rank(s, anoms);
    std::map<HopBucket, std::pair<double, std::size_t>> want;
    for (const auto& a : anoms) {
      const double norm = 1.0 - (oracle::quadratic_rank(s, a.position) - 1.0) / static_cast<double>(t - 1);
      auto& w = want[bucket_for_hop(a.hop)];
      w.first += norm;
      w.second += 1;
    }
    REQUIRE(got.size() == want.size());
    for (const auto& [b, w] : want) {
      CHECK(got.at(b).count == w.second);
      CHECK(std::abs(got.at(b).mean - w.first / static_cast<double>(w.second)) <= 1e-12);
    }
  }
  const std::vector<double> one{0.3};
  const std::vector<RankedAnomaly> a{{0, 1}};
  CHECK_THROWS_AS(hop_avg_rank(one, a), Error);
}

TEST_CASE("top-scored anomaly has normalized rank 1") {
  const std::vector<double> s{0.9, 0.1, 0.5};
  const std::vector<RankedAnomaly> a{{0, 1}, {1, 5}};
  const auto r = hop_avg_rank(s, a);
  CHECK(r.at(HopBucket::kOne).mean == 1.0);
  CHECK(r.at(HopBucket::kFourPlus).mean == 0.0);
}
