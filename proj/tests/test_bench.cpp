#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "i2i/bench.hpp"
#include "i2i/rng.hpp"

#include "oracles.hpp"

using i2i::MatchAlgo;
using i2i::MatchResult;
using i2i::PRCurve;
using i2i::PRPoint;
using i2i::Shape5;
using i2i::Tensor;

namespace {

Tensor sprinkle(i2i::Rng& rng, const Shape5& s, int count) {
    Tensor t = Tensor::full(s, 0.0f);
    auto buf = t.mutable_data();
    for (int i = 0; i < count; ++i)
        buf[static_cast<std::size_t>(rng.uniform_int(t.numel()))] = 1.0f;
    return t;
}

std::vector<std::array<double, 3>> points_of(const Tensor& t) {
    const Shape5 s = t.shape();
    const auto buf = t.data();
    std::vector<std::array<double, 3>> pts;
    for (std::int64_t d = 0; d < s.d; ++d)
        for (std::int64_t h = 0; h < s.h; ++h)
            for (std::int64_t w = 0; w < s.w; ++w)
                if (buf[static_cast<std::size_t>(s.offset(0, 0, d, h, w))] > 0.5f)
                    pts.push_back({static_cast<double>(d), static_cast<double>(h),
                                   static_cast<double>(w)});
    return pts;
}

double total_distance(const MatchResult& m) {
    double t = 0.0;
    for (const auto& p : m.pairs) t += p.distance;
    return t;
}

void check_valid_matching(const MatchResult& m, const Tensor& pred, const Tensor& gt,
                          double max_dist) {
    std::set<std::int64_t> used_pred, used_gt;
    const auto pb = pred.data();
    const auto gb = gt.data();
    for (const auto& pr : m.pairs) {
        CHECK(pr.distance <= max_dist);
        CHECK(pb[static_cast<std::size_t>(pr.pred_index)] > 0.5f);
        CHECK(gb[static_cast<std::size_t>(pr.gt_index)] > 0.5f);
        CHECK(used_pred.insert(pr.pred_index).second);
        CHECK(used_gt.insert(pr.gt_index).second);
    }
    CHECK(static_cast<std::int64_t>(m.pairs.size()) == m.tp);
}

// Same arithmetic the library documents for a PR point; used to hand-build
// curves for the summarize oracle.
PRPoint mk_point(double threshold, std::int64_t tp, std::int64_t fp, std::int64_t fn) {
    PRPoint p;
    p.threshold = threshold;
    p.tp = tp;
    p.fp = fp;
    p.fn = fn;
    p.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
    p.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
    p.f = p.precision + p.recall > 0.0
              ? 2.0 * p.precision * p.recall / (p.precision + p.recall)
              : 0.0;
    return p;
}

}  // namespace

TEST_CASE("evaluation mask at radius zero is the ground truth itself") {
    i2i::Rng rng(i2i::split_seed(61, "bench-mask0"));
    const Tensor gt = oracle::random_binary<float>(Shape5{1, 1, 6, 6, 6}, rng, 0.2);
    const Tensor mask = i2i::evaluation_mask(gt, 0.0);
    const auto gb = gt.data();
    const auto mb = mask.data();
    for (std::size_t i = 0; i < gb.size(); ++i) CHECK((mb[i] > 0.5f) == (gb[i] > 0.5f));
}

TEST_CASE("a lone positive grows a 33-voxel ball at radius two") {
    Tensor gt = Tensor::full(Shape5{1, 1, 7, 7, 7}, 0.0f);
    gt.at_mut(0, 0, 3, 3, 3) = 1.0f;
    const Tensor mask = i2i::evaluation_mask(gt, 2.0);
    std::int64_t count = 0;
    for (float v : mask.data()) count += v > 0.5f;
    CHECK(count == 33);
    CHECK(mask.at(0, 0, 3, 3, 5) > 0.5f);   // squared distance 4, on the boundary
    CHECK(mask.at(0, 0, 3, 4, 5) == 0.0f);  // squared distance 5
}

TEST_CASE("evaluation mask agrees with brute-force distances") {
    i2i::Rng rng(i2i::split_seed(61, "bench-maskbrute"));
    const Shape5 s{1, 1, 5, 6, 7};
    const Tensor gt = oracle::random_binary<float>(s, rng, 0.15);
    std::int64_t pos = 0;
    for (float v : gt.data()) pos += v > 0.5f;
    REQUIRE(pos > 0);

    const double radius = 2.5;
    const Tensor mask = i2i::evaluation_mask(gt, radius);
    const std::vector<float> flat(gt.data().begin(), gt.data().end());
    const std::vector<double> sq = oracle::edt_ref(flat, s.d, s.h, s.w);
    const auto mb = mask.data();
    for (std::size_t i = 0; i < sq.size(); ++i)
        CHECK((mb[i] > 0.5f) == (sq[i] <= radius * radius));
}

TEST_CASE("masks grow monotonically with radius and default to 20") {
    i2i::Rng rng(i2i::split_seed(61, "bench-maskmono"));
    const Tensor gt = oracle::random_binary<float>(Shape5{1, 1, 8, 8, 8}, rng, 0.05);
    Tensor prev = i2i::evaluation_mask(gt, 0.0);
    for (double r : {1.0, 2.0, 3.5}) {
        const Tensor cur = i2i::evaluation_mask(gt, r);
        const auto pb = prev.data();
        const auto cb = cur.data();
        for (std::size_t i = 0; i < pb.size(); ++i)
            if (pb[i] > 0.5f) CHECK(cb[i] > 0.5f);
        prev = cur;
    }
    CHECK(oracle::bit_equal(i2i::evaluation_mask(gt), i2i::evaluation_mask(gt, 20.0)));
}

TEST_CASE("evaluation mask rejects bad inputs") {
    Tensor gt = Tensor::full(Shape5{1, 1, 4, 4, 4}, 0.0f);
    CHECK_THROWS_WITH_AS(i2i::evaluation_mask(gt, 1.0), doctest::Contains("no positive"),
                         std::invalid_argument);
    gt.at_mut(0, 0, 1, 1, 1) = 1.0f;
    CHECK_THROWS_WITH_AS(i2i::evaluation_mask(gt, -1.0), doctest::Contains("non-negative"),
                         std::invalid_argument);
}

TEST_CASE("matching a volume against itself is perfect") {
    i2i::Rng rng(i2i::split_seed(61, "bench-self"));
    const Tensor gt = oracle::random_binary<float>(Shape5{1, 1, 6, 6, 6}, rng, 0.2);
    std::int64_t pos = 0;
    for (float v : gt.data()) pos += v > 0.5f;
    REQUIRE(pos > 0);

    const MatchResult m = i2i::match_boundaries(gt, gt, 3.0);
    CHECK(m.tp == pos);
    CHECK(m.fp == 0);
    CHECK(m.fn == 0);
    CHECK(total_distance(m) == 0.0);
    check_valid_matching(m, gt, gt, 3.0);
}

TEST_CASE("positives farther apart than max_dist never match") {
    Tensor pred = Tensor::full(Shape5{1, 1, 8, 8, 8}, 0.0f);
    Tensor gt = Tensor::full(Shape5{1, 1, 8, 8, 8}, 0.0f);
    pred.at_mut(0, 0, 0, 0, 0) = 1.0f;
    gt.at_mut(0, 0, 5, 5, 5) = 1.0f;
    const MatchResult m = i2i::match_boundaries(pred, gt, 2.0);
    CHECK(m.tp == 0);
    CHECK(m.fp == 1);
    CHECK(m.fn == 1);
    CHECK(m.pairs.empty());
}

TEST_CASE("assignment picks the cheaper partner at equal cardinality") {
    // One gt voxel, two candidates at distances 5 and 1.
    Tensor pred = Tensor::full(Shape5{1, 1, 1, 1, 16}, 0.0f);
    Tensor gt = Tensor::full(Shape5{1, 1, 1, 1, 16}, 0.0f);
    pred.at_mut(0, 0, 0, 0, 1) = 1.0f;
    pred.at_mut(0, 0, 0, 0, 5) = 1.0f;
    gt.at_mut(0, 0, 0, 0, 6) = 1.0f;
    const MatchResult m = i2i::match_boundaries(pred, gt, 5.5);
    CHECK(m.tp == 1);
    CHECK(m.fp == 1);
    CHECK(m.fn == 0);
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0].distance == 1.0);
}

TEST_CASE("assignment reaches full cardinality where greedy stalls") {
    // gt at w = 2 and 5, pred at w = 0 and 3, max_dist 2: the cheapest pair
    // (pred@3, gt@2) blocks pred@0, whose only partner within reach is gt@2.
    Tensor pred = Tensor::full(Shape5{1, 1, 1, 1, 8}, 0.0f);
    Tensor gt = Tensor::full(Shape5{1, 1, 1, 1, 8}, 0.0f);
    pred.at_mut(0, 0, 0, 0, 0) = 1.0f;
    pred.at_mut(0, 0, 0, 0, 3) = 1.0f;
    gt.at_mut(0, 0, 0, 0, 2) = 1.0f;
    gt.at_mut(0, 0, 0, 0, 5) = 1.0f;

    const MatchResult exact = i2i::match_boundaries(pred, gt, 2.0, MatchAlgo::kAssignment);
    CHECK(exact.tp == 2);
    CHECK(exact.fp == 0);
    CHECK(exact.fn == 0);
    CHECK(total_distance(exact) == doctest::Approx(4.0));
    check_valid_matching(exact, pred, gt, 2.0);

    const MatchResult greedy = i2i::match_boundaries(pred, gt, 2.0, MatchAlgo::kGreedy);
    CHECK(greedy.tp == 1);
    CHECK(greedy.fp == 1);
    CHECK(greedy.fn == 1);
    REQUIRE(greedy.pairs.size() == 1);
    CHECK(greedy.pairs[0].distance == 1.0);
    check_valid_matching(greedy, pred, gt, 2.0);
}

TEST_CASE("assignment agrees with the exhaustive oracle on random instances") {
    i2i::Rng rng(i2i::split_seed(61, "bench-oracle"));
    for (int trial = 0; trial < 60; ++trial) {
        const Shape5 s{1, 1, 3 + static_cast<std::int64_t>(rng.uniform_int(4)),
                       3 + static_cast<std::int64_t>(rng.uniform_int(4)),
                       3 + static_cast<std::int64_t>(rng.uniform_int(4))};
        const Tensor pred = sprinkle(rng, s, static_cast<int>(rng.uniform_int(7)));
        const Tensor gt = sprinkle(rng, s, static_cast<int>(rng.uniform_int(7)));
        const double max_dist = rng.uniform(1.0, 4.0);

        const MatchResult m = i2i::match_boundaries(pred, gt, max_dist);
        const oracle::MatchRef ref =
            oracle::exhaustive_match_ref(points_of(pred), points_of(gt), max_dist);
        CAPTURE(trial);
        CHECK(m.tp == ref.tp);
        CHECK(std::abs(total_distance(m) - ref.total_dist) <= 1e-9);
        check_valid_matching(m, pred, gt, max_dist);

        // Greedy is a valid matching but never beats the exact cardinality.
        const MatchResult g = i2i::match_boundaries(pred, gt, max_dist, MatchAlgo::kGreedy);
        CHECK(g.tp <= m.tp);
        check_valid_matching(g, pred, gt, max_dist);
    }
}

TEST_CASE("swapping prediction and ground truth transposes the counts") {
    i2i::Rng rng(i2i::split_seed(61, "bench-swap"));
    for (int trial = 0; trial < 10; ++trial) {
        const Shape5 s{1, 1, 5, 5, 5};
        const Tensor a = sprinkle(rng, s, 5);
        const Tensor b = sprinkle(rng, s, 3);
        const MatchResult ab = i2i::match_boundaries(a, b, 2.0);
        const MatchResult ba = i2i::match_boundaries(b, a, 2.0);
        CHECK(ab.tp == ba.tp);
        CHECK(ab.fp == ba.fn);
        CHECK(ab.fn == ba.fp);
    }
}

TEST_CASE("matched pairs only grow as max_dist loosens") {
    i2i::Rng rng(i2i::split_seed(61, "bench-mono"));
    const Shape5 s{1, 1, 6, 6, 6};
    const Tensor pred = sprinkle(rng, s, 8);
    const Tensor gt = sprinkle(rng, s, 8);
    std::int64_t prev = -1;
    for (double md : {0.5, 1.0, 2.0, 3.0, 5.0, 11.0}) {
        const std::int64_t tp = i2i::match_boundaries(pred, gt, md).tp;
        CHECK(tp >= prev);
        prev = tp;
    }
}

TEST_CASE("a perfect probability map scores 1 at every threshold") {
    i2i::Rng rng(i2i::split_seed(61, "bench-perfect"));
    const Tensor gt = oracle::random_binary<float>(Shape5{1, 1, 6, 6, 6}, rng, 0.2);
    std::int64_t pos = 0;
    for (float v : gt.data()) pos += v > 0.5f;
    REQUIRE(pos > 0);

    const Tensor mask = i2i::evaluation_mask(gt, 2.0);
    const PRCurve curve = i2i::pr_curve(gt, gt, mask, i2i::default_thresholds(), 2.0);
    REQUIRE(curve.points.size() == 99);
    for (const PRPoint& p : curve.points) {
        CHECK(p.tp == pos);
        CHECK(p.fp == 0);
        CHECK(p.fn == 0);
        CHECK(p.precision == 1.0);
        CHECK(p.recall == 1.0);
        CHECK(p.f == 1.0);
    }
}

TEST_CASE("an all-zero probability map has zero recall and free precision") {
    i2i::Rng rng(i2i::split_seed(61, "bench-zero"));
    const Tensor gt = oracle::random_binary<float>(Shape5{1, 1, 6, 6, 6}, rng, 0.2);
    const Tensor prob = Tensor::full(gt.shape(), 0.0f);
    const Tensor mask = i2i::evaluation_mask(gt, 2.0);
    const PRCurve curve = i2i::pr_curve(prob, gt, mask, {0.9, 0.5, 0.1}, 2.0);
    for (const PRPoint& p : curve.points) {
        CHECK(p.tp == 0);
        CHECK(p.fp == 0);
        CHECK(p.fn > 0);
        CHECK(p.precision == 1.0);
        CHECK(p.recall == 0.0);
        CHECK(p.f == 0.0);
    }
}

TEST_CASE("pr_curve counts equal match_boundaries on the thresholded volume") {
    i2i::Rng rng(i2i::split_seed(61, "bench-parity"));
    const Shape5 s{1, 1, 8, 8, 8};
    const Tensor prob = oracle::random_tensor<float>(s, rng, 0.0, 1.0);
    const Tensor gt = oracle::random_binary<float>(s, rng, 0.12);
    const Tensor mask = i2i::evaluation_mask(gt, 2.0);
    const std::vector<double> thresholds{0.8, 0.5, 0.3};
    const double max_dist = 2.0;

    const PRCurve curve = i2i::pr_curve(prob, gt, mask, thresholds, max_dist);
    REQUIRE(curve.points.size() == thresholds.size());

    const auto pb = prob.data();
    const auto gb = gt.data();
    const auto mb = mask.data();
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
        Tensor pred = Tensor::full(s, 0.0f);
        Tensor gtm = Tensor::full(s, 0.0f);
        auto predb = pred.mutable_data();
        auto gtmb = gtm.mutable_data();
        for (std::size_t i = 0; i < pb.size(); ++i) {
            if (mb[i] > 0.5f && static_cast<double>(pb[i]) >= thresholds[k]) predb[i] = 1.0f;
            if (mb[i] > 0.5f && gb[i] > 0.5f) gtmb[i] = 1.0f;
        }
        const MatchResult m = i2i::match_boundaries(pred, gtm, max_dist);
        CAPTURE(thresholds[k]);
        CHECK(curve.points[k].tp == m.tp);
        CHECK(curve.points[k].fp == m.fp);
        CHECK(curve.points[k].fn == m.fn);
        CHECK(curve.points[k].threshold == thresholds[k]);
    }
}

TEST_CASE("recall and matches never drop as the threshold falls") {
    i2i::Rng rng(i2i::split_seed(61, "bench-recallmono"));
    const Shape5 s{1, 1, 6, 6, 6};
    const Tensor gt = oracle::random_binary<float>(s, rng, 0.15);
    Tensor prob = oracle::random_tensor<float>(s, rng, 0.0, 1.0);
    {
        auto buf = prob.mutable_data();
        const auto gb = gt.data();
        for (std::size_t i = 0; i < buf.size(); ++i)
            if (gb[i] > 0.5f) buf[i] = 0.5f + 0.5f * buf[i];
    }
    const Tensor mask = i2i::evaluation_mask(gt, 3.0);
    const PRCurve curve = i2i::pr_curve(prob, gt, mask, i2i::default_thresholds(), 2.0);
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
        CHECK(curve.points[k].tp >= curve.points[k - 1].tp);
        CHECK(curve.points[k].recall >= curve.points[k - 1].recall);
    }
}

TEST_CASE("pr_curve validates thresholds and extents") {
    const Tensor gt = []() {
        Tensor t = Tensor::full(Shape5{1, 1, 4, 4, 4}, 0.0f);
        t.at_mut(0, 0, 2, 2, 2) = 1.0f;
        return t;
    }();
    const Tensor mask = i2i::evaluation_mask(gt, 2.0);
    CHECK_THROWS_WITH_AS(i2i::pr_curve(gt, gt, mask, {0.5, 0.5}, 2.0),
                         doctest::Contains("descending"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(i2i::pr_curve(gt, gt, mask, {0.2, 0.5}, 2.0),
                         doctest::Contains("descending"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(i2i::pr_curve(gt, gt, mask, {}, 2.0), doctest::Contains("empty"),
                         std::invalid_argument);
    const Tensor small = Tensor::full(Shape5{1, 1, 2, 2, 2}, 0.0f);
    CHECK_THROWS_WITH_AS(i2i::pr_curve(small, gt, mask, {0.5}, 2.0),
                         doctest::Contains("extents"), std::invalid_argument);
}

TEST_CASE("default thresholds and distance follow the stated conventions") {
    const std::vector<double> t = i2i::default_thresholds();
    REQUIRE(t.size() == 99);
    CHECK(t.front() == doctest::Approx(0.99));
    CHECK(t.back() == doctest::Approx(0.01));
    for (std::size_t k = 1; k < t.size(); ++k) {
        CHECK(t[k] < t[k - 1]);
        CHECK(t[k - 1] - t[k] == doctest::Approx(0.01));
    }

    const double diag = std::sqrt(32.0 * 32.0 * 3.0);
    CHECK(i2i::default_max_dist({32, 32, 32}) == doctest::Approx(0.0075 * diag));
    const double diag2 = std::sqrt(256.0 * 256.0 + 2.0 * 512.0 * 512.0);
    CHECK(i2i::default_max_dist({256, 512, 512}) == doctest::Approx(0.0075 * diag2));
}

TEST_CASE("summarize on one perfect volume gives ones across the board") {
    i2i::Rng rng(i2i::split_seed(61, "bench-sumperfect"));
    const Tensor gt = oracle::random_binary<float>(Shape5{1, 1, 6, 6, 6}, rng, 0.2);
    const Tensor mask = i2i::evaluation_mask(gt, 2.0);
    const PRCurve curve = i2i::pr_curve(gt, gt, mask, i2i::default_thresholds(), 2.0);
    const i2i::BenchmarkSummary sum = i2i::summarize({curve});
    CHECK(sum.ods == 1.0);
    CHECK(sum.ois == 1.0);
    CHECK(sum.ap == doctest::Approx(1.0));
    CHECK(sum.ods_threshold == doctest::Approx(0.99));  // ties keep the highest threshold
    REQUIRE(sum.per_volume_best_threshold.size() == 1);
    CHECK(sum.per_volume_best_threshold[0] == doctest::Approx(0.99));
    CHECK(sum.ods_fp == 0);
    CHECK(sum.ods_fn == 0);
    CHECK(sum.ods_precision == 1.0);
    CHECK(sum.ods_recall == 1.0);
}

TEST_CASE("summarize matches a hand computation on a perfect plus an inverted volume") {
    const std::vector<double> grid{0.9, 0.5, 0.1};
    PRCurve perfect, inverted;
    for (double t : grid) {
        perfect.points.push_back(mk_point(t, 4, 0, 0));
        inverted.points.push_back(mk_point(t, 0, 4, 4));
    }
    const i2i::BenchmarkSummary sum = i2i::summarize({perfect, inverted});
    // Aggregated counts at every threshold: tp=4, fp=4, fn=4.
    CHECK(sum.ods == doctest::Approx(0.5));
    CHECK(sum.ods_threshold == doctest::Approx(0.9));
    CHECK(sum.ods_tp == 4);
    CHECK(sum.ods_fp == 4);
    CHECK(sum.ods_fn == 4);
    CHECK(sum.ods_precision == doctest::Approx(0.5));
    CHECK(sum.ods_recall == doctest::Approx(0.5));
    CHECK(sum.ois == doctest::Approx(0.5));
    REQUIRE(sum.per_volume_best_threshold.size() == 2);
    CHECK(sum.per_volume_best_threshold[0] == doctest::Approx(0.9));
    CHECK(sum.per_volume_best_threshold[1] == doctest::Approx(0.9));
    // Single aggregate PR point (0.5, 0.5) plus the zero-recall anchor.
    CHECK(sum.ap == doctest::Approx(0.25));
}

TEST_CASE("for a single volume OIS equals ODS") {
    i2i::Rng rng(i2i::split_seed(61, "bench-ois"));
    for (int trial = 0; trial < 10; ++trial) {
        const Shape5 s{1, 1, 5, 5, 5};
        const Tensor gt = sprinkle(rng, s, 6);
        std::int64_t pos = 0;
        for (float v : gt.data()) pos += v > 0.5f;
        if (pos == 0) continue;
        Tensor prob = oracle::random_tensor<float>(s, rng, 0.0, 1.0);
        const Tensor mask = i2i::evaluation_mask(gt, 2.0);
        const PRCurve curve =
            i2i::pr_curve(prob, gt, mask, {0.9, 0.7, 0.5, 0.3, 0.1}, 2.0);
        const i2i::BenchmarkSummary sum = i2i::summarize({curve});
        CHECK(sum.ois == sum.ods);
        CHECK(sum.per_volume_best_threshold[0] == sum.ods_threshold);
        CHECK(sum.ap >= 0.0);
        CHECK(sum.ap <= 1.0);
    }
}

TEST_CASE("summarize rejects mismatched grids") {
    PRCurve a, b_short, b_shifted;
    for (double t : {0.9, 0.5, 0.1}) a.points.push_back(mk_point(t, 1, 0, 0));
    for (double t : {0.9, 0.5}) b_short.points.push_back(mk_point(t, 1, 0, 0));
    for (double t : {0.9, 0.4, 0.1}) b_shifted.points.push_back(mk_point(t, 1, 0, 0));
    CHECK_THROWS_WITH_AS(i2i::summarize({a, b_short}), doctest::Contains("threshold counts"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(i2i::summarize({a, b_shifted}), doctest::Contains("grids"),
                         std::invalid_argument);
}

TEST_CASE("benchmark csv lists every point then a summary row") {
    PRCurve c;
    for (double t : {0.9, 0.5, 0.1}) c.points.push_back(mk_point(t, 3, 1, 2));
    const i2i::BenchmarkSummary sum = i2i::summarize({c});
    i2i::write_benchmark_csv("bench_t.csv", {"vol1"}, {c}, sum);

    std::ifstream in("bench_t.csv");
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "volume,threshold,tp,fp,fn,precision,recall,f");
    for (int k = 1; k <= 3; ++k) CHECK(lines[static_cast<std::size_t>(k)].rfind("vol1,", 0) == 0);
    CHECK(lines[4].rfind("summary,", 0) == 0);
    CHECK(lines[1].find(",3,1,2,") != std::string::npos);
    std::remove("bench_t.csv");

    CHECK_THROWS_WITH_AS(i2i::write_benchmark_csv("bench_t.csv", {"a", "b"}, {c}, sum),
                         doctest::Contains("one name per curve"), std::invalid_argument);
}

TEST_CASE("pr svg is emitted and rejects an empty curve list") {
    PRCurve c;
    for (double t : {0.9, 0.5, 0.1}) c.points.push_back(mk_point(t, 3, 1, 2));
    i2i::write_pr_svg("bench_t.svg", {c});
    std::ifstream in("bench_t.svg");
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str().find("<svg") != std::string::npos);
    std::remove("bench_t.svg");

    CHECK_THROWS_AS(i2i::write_pr_svg("bench_t.svg", {}), std::invalid_argument);
}
