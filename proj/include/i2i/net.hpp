#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "i2i/layers.hpp"

namespace i2i {

enum class Variant { kHed3d, kI2i3d };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct NetworkSpec {
    Variant variant = Variant::kI2i3d;
    std::vector<std::vector<std::int64_t>> stage_channels = default_stage_channels();
    double width_multiplier = 1.0;
    int supervised_outputs = 4;  ///< M
    /// HED-3D only: supervise the side outputs after upsampling to input
    /// resolution (as the fusion path sees them) instead of at native
    /// stage resolution.
    bool hed_supervise_upsampled = false;

    static std::vector<std::vector<std::int64_t>> default_stage_channels() {
        return {{32, 32}, {128, 128}, {256, 256, 256}, {512, 512, 512}};
    }

    /// Channel count of a stage's convs after width scaling (stage is 1-based).
    std::int64_t channels(int stage, std::size_t conv) const;
    int stage_count() const { return static_cast<int>(stage_channels.size()); }
};

/// Throws with the violated constraint named.
void validate_spec(const NetworkSpec& spec);

std::string spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const std::string& text);

struct NetworkParams {
    std::map<std::string, ConvParams> convs;  ///< trunk, coarse-to-fine, side classifiers
    std::optional<FusionWeights> fusion;      ///< HED-3D only

    /// Flat named view in deterministic (map, then fusion) order. Names are
    /// layer path + "/kernel" | "/bias" (fusion: "fuse/weights", "fuse/bias").
    std::vector<std::pair<std::string, Tensor*>> named_tensors();
    std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
};

/// activations[m-1] is the supervised activation volume for output m, m=1
/// coarsest .. m=M finest; probabilities apply sigma per output. fused holds
/// the HED-3D weighted-aggregation activation (pre-sigma) at input
/// resolution; top is the finest probability map (sigma of the fused
/// activation for HED-3D, probabilities[M-1] for I2I-3D).
struct MultiScaleOutputs {
    std::vector<Tensor> activations;
    std::vector<Tensor> probabilities;
    std::optional<Tensor> fused;
    Tensor top;
};

/// Intermediates exposed for tests and the trainer.
struct ForwardTrace {
    std::vector<Tensor> f2c_features;  ///< per stage, the last conv's output
    std::vector<Tensor> c2f_features;  ///< I2I-3D: index m-1 (m=1 aliases stage M features)
    /// Tape leaf aliases of every parameter, in named_tensors() order;
    /// populated only when forward runs on a tape.
    std::vector<std::pair<std::string, Tensor>> param_leaves;
};

class Network {
public:
    Network(NetworkSpec spec, std::uint64_t init_seed);

    const NetworkSpec& spec() const { return spec_; }
    NetworkParams& params() { return params_; }
    const NetworkParams& params() const { return params_; }

    /// Runs the variant's graph. Input must be single-channel with spatial
    /// extents divisible by 2^(M-1). With a tape, parameters are registered
    /// as leaves (recorded in trace->param_leaves) and the whole pass is
    /// differentiable.
    MultiScaleOutputs forward(const Tensor& x, Tape* tape = nullptr,
                              ForwardTrace* trace = nullptr) const;

private:
    NetworkSpec spec_;
    NetworkParams params_;
};

Network build_hed3d(NetworkSpec spec, std::uint64_t init_seed);
Network build_i2i3d(NetworkSpec spec, std::uint64_t init_seed);
Network build_network(const NetworkSpec& spec, std::uint64_t init_seed);

inline constexpr char kCheckpointMagic[] = "I2I3DCKPT";  // 9 bytes, no terminator on disk
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::array<std::uint8_t, 32> digest{};
    std::vector<std::pair<std::string, Tensor>> entries;
};

/// SHA-256 of the canonical spec serialization; stored in the checkpoint
/// header as a provenance hint. Adoption validates shapes regardless.
std::array<std::uint8_t, 32> spec_digest(const NetworkSpec& spec);

void save_checkpoint(const Network& net, const std::string& path);
void save_checkpoint(const std::vector<std::pair<std::string, const Tensor*>>& entries,
                     const std::array<std::uint8_t, 32>& digest, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Copies checkpoint entries into the network's parameters after validating
/// that the entry set and every shape match the network; the first offending
/// layer is named in the diagnostic.
void adopt_checkpoint(Network& net, const Checkpoint& ck);

}  // namespace i2i
