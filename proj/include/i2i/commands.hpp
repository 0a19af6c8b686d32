#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "i2i/phantom.hpp"

namespace i2i {

struct PhaseConfig {
    std::int64_t iterations = 0;
    double base_lr = 1e-7;
    double f2c_multiplier = 1.0;
    double c2f_multiplier = 1.0;
    std::int64_t plateau_window = 0;
    double plateau_tol = 1e-3;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    int threads = 1;

    struct {
        int count = 1;
        PhantomSpec spec;  ///< seed field is overwritten per case
    } phantom;

    struct {
        std::string dataset;
        std::string variant = "i2i3d";
        double width_multiplier = 1.0;
        int supervised_outputs = 4;
        bool hed_supervise_upsampled = false;
        bool balanced = false;
        double momentum = 0.9;
        std::int64_t lr_decimation_interval = 30000;
        std::array<std::int64_t, 3> segment_extents{48, 96, 96};
        std::array<std::int64_t, 3> segment_overlap{8, 12, 12};
        double min_positive_fraction = 0.0025;
        std::string resume;  ///< directory of a previous train run to continue
        PhaseConfig phase_a{50000, 1e-5, 1.0, 1.0, 0, 1e-3};
        PhaseConfig phase_b{30000, 1e-7, 0.01, 1.0, 200, 1e-3};
        PhaseConfig phase_c{30000, 1e-7, 1.0, 1.0, 0, 1e-3};
    } train;

    struct {
        std::string dataset;
        std::string checkpoint;
        std::string network;  ///< empty: network.json next to the checkpoint
        std::array<std::int64_t, 3> segment_extents{48, 96, 96};
        std::array<std::int64_t, 3> segment_overlap{8, 12, 12};
    } predict;

    struct {
        std::string dataset;
        std::string predictions;
        double mask_radius = 20.0;
        double max_dist = 0.0;  ///< 0: 0.0075 x volume diagonal
        bool greedy = false;
    } eval;
};

/// Each command writes its artifacts under cfg.out_dir and returns 0; any
/// failure throws, so the caller maps exceptions to a nonzero exit.
int cmd_phantom(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_predict(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);

}  // namespace i2i
