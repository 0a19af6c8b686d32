#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "i2i/loss.hpp"
#include "i2i/net.hpp"

namespace i2i {

struct TrainingSample {
    Tensor x;         ///< whitened input segment (1,1,D,H,W)
    Tensor y_wall;    ///< binary wall-boundary labels
    Tensor y_vessel;  ///< binary full-vessel labels (pretraining target)
};

enum class LabelKind { kVessel, kWall };

/// Which loss terms are active: side outputs by m index (1-based, m=1
/// coarsest), plus the HED-3D fused output.
struct ActiveSupervision {
    std::vector<int> outputs;
    bool fused = false;
};

/// Per-output losses in double precision; the fused term is recorded with
/// m = 0. total is the exact double sum of the parts.
struct LossReport {
    double total = 0.0;
    std::vector<std::pair<int, double>> per_output;
};

struct MultiScaleLoss {
    Tensor total;  ///< scalar loss tensor (on tape when the outputs are)
    LossReport report;
};

/// Sums output_loss over the active supervision set. Output m pairs with the
/// pyramid level of equal extents (level m unless the outputs were upsampled
/// before supervision); the fused output pairs with the full-resolution
/// level.
MultiScaleLoss multiscale_loss(const MultiScaleOutputs& outputs,
                               const std::vector<Tensor>& pyramid,
                               const ActiveSupervision& active, bool balanced = false);

/// base_lr decimated every `decimation_interval` iterations.
double lr_schedule(std::int64_t iteration, double base_lr, std::int64_t decimation_interval);

struct CurriculumPhase {
    std::string name;
    std::int64_t iterations = 0;  ///< budget; a phase may stop earlier on plateau
    double base_lr = 1e-7;
    double f2c_multiplier = 1.0;  ///< layers named f2c/...
    double c2f_multiplier = 1.0;  ///< layers named c2f/..., side/..., fuse/...
    ActiveSupervision active;
    LabelKind labels = LabelKind::kWall;
    std::int64_t plateau_window = 0;  ///< 0 disables plateau detection
    double plateau_tol = 1e-3;
};

/// Momentum SGD with per-layer-path learning-rate multipliers. A multiplier
/// of exactly 0 freezes the parameter bit-exactly (no velocity update
/// either).
class Sgd {
public:
    explicit Sgd(double momentum = 0.9) : momentum_(momentum) {}

    void step(const std::vector<std::pair<std::string, Tensor*>>& params,
              const std::vector<const std::vector<float>*>& grads, double lr,
              const std::function<double(const std::string&)>& multiplier);

    double momentum() const { return momentum_; }
    std::map<std::string, std::vector<float>>& velocities() { return velocity_; }
    const std::map<std::string, std::vector<float>>& velocities() const { return velocity_; }

private:
    double momentum_;
    std::map<std::string, std::vector<float>> velocity_;
};

/// Multiplier for a parameter name under a phase: f2c/... takes the
/// fine-to-coarse multiplier, everything else (c2f/..., side/..., fuse/...)
/// the coarse-to-fine one.
double path_multiplier(const std::string& name, const CurriculumPhase& phase);

struct LossHistoryRow {
    std::int64_t iteration = 0;
    std::string phase;
    double lr = 0.0;
    double total = 0.0;
    std::vector<double> per_output;  ///< size M; 0 for inactive outputs
};

struct TrainOptions {
    bool balanced = false;
    std::int64_t lr_decimation_interval = 30000;
    std::int64_t start_iteration = 0;
    /// called after each finished phase with the phase and the next iteration
    std::function<void(const CurriculumPhase&, std::int64_t)> on_phase_end;
};

struct CurriculumResult {
    std::vector<LossHistoryRow> history;
    std::int64_t next_iteration = 0;
};

/// Runs the phases in order, mutating the network parameters in place.
/// Iteration i draws sample split_seed(seed, "sample", i) mod dataset size;
/// reruns with identical inputs are bit-identical.
CurriculumResult run_curriculum(Network& net, const std::vector<TrainingSample>& dataset,
                                const std::vector<CurriculumPhase>& phases, std::uint64_t seed,
                                Sgd& sgd, const TrainOptions& opts = {});

void write_loss_history_csv(const std::string& path, const std::vector<LossHistoryRow>& history,
                            int m_count);

}  // namespace i2i
