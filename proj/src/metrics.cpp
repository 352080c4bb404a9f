#include "metrics.hpp"

#include <algorithm>
#include <numeric>

#include "error.hpp"
#include "graph.hpp"

namespace gad {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), ErrorCode::kInvalidArgument,
          "scores and labels differ in length");
  for (int l : labels)
    require(l == 0 || l == 1, ErrorCode::kInvalidArgument, "labels must be 0 or 1");
}

std::vector<std::size_t> order_descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

std::vector<double> descending_ranks(std::span<const double> scores) {
  const auto order = order_descending(scores);
  std::vector<double> ranks(scores.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t neg = labels.size() - pos;
  require(pos > 0 && neg > 0, ErrorCode::kInvalidArgument, "AUROC needs both classes");
  // Ascending average ranks are n + 1 - descending ranks.
  const auto desc = descending_ranks(scores);
  const double n1 = static_cast<double>(scores.size()) + 1.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (labels[i] == 1) rank_sum += n1 - desc[i];
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  require(pos > 0, ErrorCode::kInvalidArgument, "AUPRC needs at least one positive");
  const auto order = order_descending(scores);
  double ap = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t group_tp = 0;
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      group_tp += static_cast<std::size_t>(labels[order[j]]);
      ++j;
    }
    tp += group_tp;
    seen += j - i;
    if (group_tp > 0) {
      const double precision = static_cast<double>(tp) / static_cast<double>(seen);
      ap += (static_cast<double>(group_tp) / static_cast<double>(pos)) * precision;
    }
    i = j;
  }
  return ap;
}

HopBucket bucket_for_hop(std::uint32_t hop) {
  require(hop != 0, ErrorCode::kInvalidArgument, "hop 0 is a labeled node, not a test anomaly");
  if (hop == kUnreachable) return HopBucket::kUnreachable;
  if (hop == 1) return HopBucket::kOne;
  if (hop == 2) return HopBucket::kTwo;
  if (hop == 3) return HopBucket::kThree;
  return HopBucket::kFourPlus;
}

std::string_view to_string(HopBucket b) {
  switch (b) {
    case HopBucket::kOne: return "1";
    case HopBucket::kTwo: return "2";
    case HopBucket::kThree: return "3";
    case HopBucket::kFourPlus: return ">=4";
    case HopBucket::kUnreachable: return "unreachable";
  }
  return "?";
}

std::map<HopBucket, HopRank> hop_avg_rank(std::span<const double> test_scores,
                                          std::span<const RankedAnomaly> anomalies) {
  const std::size_t t = test_scores.size();
  require(t >= 2, ErrorCode::kInvalidArgument, "hop ranking needs at least two test nodes");
  const auto ranks = descending_ranks(test_scores);
  std::map<HopBucket, HopRank> out;
  for (const auto& a : anomalies) {
    require(a.position < t, ErrorCode::kOutOfRange, "anomaly position outside the test list");
    const double norm = 1.0 - (ranks[a.position] - 1.0) / static_cast<double>(t - 1);
    HopRank& r = out[bucket_for_hop(a.hop)];
    r.mean += norm;
    ++r.count;
  }
  for (auto& [bucket, r] : out) r.mean /= static_cast<double>(r.count);
  return out;
}

}  // namespace gad
