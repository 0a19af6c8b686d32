#pragma once

#include <array>
#include <string>
#include <vector>

#include "i2i/tensor.hpp"

namespace i2i {

struct MatchedPair {
    std::int64_t pred_index;  ///< flat voxel offset into the volume
    std::int64_t gt_index;
    double distance;
};

struct MatchResult {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::vector<MatchedPair> pairs;
};

struct PRPoint {
    double threshold = 0.0;
    std::int64_t tp = 0, fp = 0, fn = 0;
    double precision = 1.0, recall = 0.0, f = 0.0;
};

/// Points ordered by descending threshold.
struct PRCurve {
    std::vector<PRPoint> points;
};

struct BenchmarkSummary {
    double ods = 0.0, ois = 0.0, ap = 0.0;
    double ods_threshold = 0.0;
    std::vector<double> per_volume_best_threshold;
    std::int64_t ods_tp = 0, ods_fp = 0, ods_fn = 0;
    double ods_precision = 0.0, ods_recall = 0.0;
};

/// Voxels within `radius` (Euclidean) of any positive; exact distance
/// transform. Rejects an empty ground truth (nothing to evaluate).
Tensor evaluation_mask(const Tensor& vessel_gt, double radius = 20.0);

enum class MatchAlgo {
    kAssignment,  ///< exact: maximum cardinality, then minimum total distance
    kGreedy,      ///< nearest-first heuristic, excluded from oracle guarantees
};

/// One-to-one correspondence between predicted and ground-truth positives
/// with pairwise distance <= max_dist.
MatchResult match_boundaries(const Tensor& pred, const Tensor& gt, double max_dist,
                             MatchAlgo algo = MatchAlgo::kAssignment);

/// 0.01 .. 0.99 step 0.01, descending.
std::vector<double> default_thresholds();

/// Benchmark convention: 0.0075 x volume diagonal.
double default_max_dist(const std::array<std::int64_t, 3>& extents);

/// Sweeps thresholds over prob restricted to mask (gt is masked too); tp per
/// threshold comes from a maximum-cardinality matcher and equals
/// match_boundaries' tp.
PRCurve pr_curve(const Tensor& prob, const Tensor& gt, const Tensor& mask,
                 const std::vector<double>& thresholds, double max_dist,
                 MatchAlgo algo = MatchAlgo::kAssignment);

/// ODS from dataset-aggregated counts, OIS from per-volume best thresholds,
/// AP by trapezoidal integration over recall with interpolated precision.
BenchmarkSummary summarize(const std::vector<PRCurve>& curves);

void write_benchmark_csv(const std::string& path, const std::vector<std::string>& names,
                         const std::vector<PRCurve>& curves, const BenchmarkSummary& summary);

void write_pr_svg(const std::string& path, const std::vector<PRCurve>& curves);

}  // namespace i2i
