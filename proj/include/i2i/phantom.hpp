#pragma once

#include <array>
#include <vector>

#include "i2i/rng.hpp"
#include "i2i/tensor.hpp"

namespace i2i {

struct PhantomSpec {
    std::array<std::int64_t, 3> extents{32, 32, 32};  ///< (D,H,W), each divisible by 8
    int vessel_count = 1;
    double r_min = 1.5;
    double r_max = 3.0;
    double bifurcation_prob = 0.0;  ///< per unit centerline length
    double max_bend = 0.1;          ///< radians per unit centerline length
    double contrast = 1.0;
    double noise_sigma = 0.0;
    bool axis_aligned = false;  ///< snap each root tube's direction to a volume axis
    std::uint64_t seed = 0;
};

struct PhantomSample {
    Tensor volume;
    Tensor wall_labels;
    Tensor vessel_labels;
    /// one polyline per branch, points as (z,y,x) voxel coordinates
    std::vector<std::vector<std::array<double, 3>>> centerlines;
};

/// Seeded random-walk centerlines swept with spheres; wall voxels are the
/// vessel voxels with an in-bounds non-vessel 6-neighbor; intensity is the
/// sigma-1 Gaussian-blurred vessel indicator times contrast, plus noise.
PhantomSample generate_phantom(const PhantomSpec& spec);

/// Surface rule on its own: vessel voxels with >= 1 in-bounds non-vessel
/// 6-neighbor.
Tensor wall_from_vessel(const Tensor& vessel);

/// Zero mean, unit standard deviation over the whole volume.
Tensor whiten(const Tensor& volume);

struct Segment {
    std::array<std::int64_t, 3> origin{};  ///< (D,H,W) offset, edge-padded space
    Tensor data;
};

/// Overlapping tiling with stride = extent - overlap per axis; the final
/// segment per axis is shifted to end at the volume boundary. Volumes
/// smaller than a segment are edge-replicated up to segment size (the pad
/// sits at the high end of each axis and is dropped again by stitching).
std::vector<Segment> crop_segments(const Tensor& volume,
                                   const std::array<std::int64_t, 3>& segment_extents = {48, 96,
                                                                                         96},
                                   const std::array<std::int64_t, 3>& overlap = {8, 12, 12});

/// Indices of the label segments whose positive fraction is strictly greater
/// than min_fraction.
std::vector<std::size_t> filter_training_segments(const std::vector<Segment>& label_segments,
                                                  double min_fraction = 0.0025);

/// Per-voxel mean over all covering segments, cut back to volume_extents.
/// A voxel of the target volume covered by no segment is a coverage
/// violation.
Tensor stitch_predictions(const std::vector<Segment>& segments,
                          const std::array<std::int64_t, 3>& volume_extents);

}  // namespace i2i
