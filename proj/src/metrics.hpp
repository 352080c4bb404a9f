#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gad {

// Mann-Whitney AUROC with average ranks for ties. Needs both classes.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Average precision; tied scores are consumed as one group. Needs a positive.
double auprc(std::span<const double> scores, std::span<const int> labels);

// Average 1-based ranks under descending score order (ties share the mean rank).
std::vector<double> descending_ranks(std::span<const double> scores);

enum class HopBucket { kOne, kTwo, kThree, kFourPlus, kUnreachable };

HopBucket bucket_for_hop(std::uint32_t hop);
std::string_view to_string(HopBucket b);

struct HopRank {
  double mean = 0.0;
  std::size_t count = 0;
};

// One test anomaly: its position in the scored test list and its hop
// distance to the nearest labeled anomaly.
struct RankedAnomaly {
  std::size_t position;
  std::uint32_t hop;
};

// Normalized rank 1 - (rank - 1) / (T - 1) (1 = most anomalous), averaged per
// hop bucket. Buckets without anomalies are absent.
std::map<HopBucket, HopRank> hop_avg_rank(std::span<const double> test_scores,
                                          std::span<const RankedAnomaly> anomalies);

}  // namespace gad
