#include "i2i/phantom.hpp"

#include <cmath>
#include <deque>

namespace i2i {

namespace {

struct Vec3 {
    double z, y, x;
};

Vec3 operator+(Vec3 a, Vec3 b) { return {a.z + b.z, a.y + b.y, a.x + b.x}; }
Vec3 operator*(double s, Vec3 v) { return {s * v.z, s * v.y, s * v.x}; }
double dot(Vec3 a, Vec3 b) { return a.z * b.z + a.y * b.y + a.x * b.x; }
Vec3 cross(Vec3 a, Vec3 b) {
    return {a.y * b.x - a.x * b.y, a.x * b.z - a.z * b.x, a.z * b.y - a.y * b.z};
}
double norm(Vec3 v) { return std::sqrt(dot(v, v)); }

Vec3 normalized(Vec3 v) {
    const double n = norm(v);
    return {v.z / n, v.y / n, v.x / n};
}

Vec3 random_unit(Rng& rng) {
    while (true) {
        Vec3 v{rng.normal(), rng.normal(), rng.normal()};
        const double n = norm(v);
        if (n > 1e-6) return {v.z / n, v.y / n, v.x / n};
    }
}

Vec3 random_perpendicular(Vec3 dir, Rng& rng) {
    while (true) {
        const Vec3 axis = cross(dir, random_unit(rng));
        const double n = norm(axis);
        if (n > 1e-6) return {axis.z / n, axis.y / n, axis.x / n};
    }
}

// Rodrigues rotation of v around unit axis k.
Vec3 rotate(Vec3 v, Vec3 k, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    const Vec3 kxv = cross(k, v);
    const double kv = dot(k, v);
    return {v.z * c + kxv.z * s + k.z * kv * (1 - c), v.y * c + kxv.y * s + k.y * kv * (1 - c),
            v.x * c + kxv.x * s + k.x * kv * (1 - c)};
}

void validate(const PhantomSpec& spec) {
    std::int64_t min_extent = spec.extents[0];
    for (const std::int64_t e : spec.extents) {
        if (e < 8 || e % 8)
            throw std::invalid_argument(
                detail::msg("phantom: extents must be positive multiples of 8, got ", e));
        min_extent = std::min(min_extent, e);
    }
    if (spec.vessel_count < 0) throw std::invalid_argument("phantom: negative vessel count");
    if (spec.r_min < 1.0)
        throw std::invalid_argument(detail::msg("phantom: r_min must be >= 1, got ", spec.r_min));
    if (spec.r_max < spec.r_min)
        throw std::invalid_argument(detail::msg("phantom: r_max ", spec.r_max, " < r_min ",
                                                spec.r_min));
    if (spec.r_max >= static_cast<double>(min_extent) / 2.0)
        throw std::invalid_argument(detail::msg("phantom: tube cannot fit, r_max ", spec.r_max,
                                                " >= half the smallest extent ",
                                                static_cast<double>(min_extent) / 2.0));
    if (spec.bifurcation_prob < 0.0 || spec.bifurcation_prob > 1.0)
        throw std::invalid_argument("phantom: bifurcation probability outside [0, 1]");
    if (spec.max_bend < 0.0) throw std::invalid_argument("phantom: negative max_bend");
    if (!(spec.contrast > 0.0))
        throw std::invalid_argument(detail::msg("phantom: contrast must be > 0, got ",
                                                spec.contrast));
    if (spec.noise_sigma < 0.0) throw std::invalid_argument("phantom: negative noise sigma");
}

void stamp_sphere(std::vector<std::uint8_t>& mask, const std::array<std::int64_t, 3>& e, Vec3 c,
                  double r) {
    const double r2 = r * r;
    const std::int64_t z0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(c.z - r)));
    const std::int64_t z1 = std::min(e[0] - 1, static_cast<std::int64_t>(std::floor(c.z + r)));
    const std::int64_t y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(c.y - r)));
    const std::int64_t y1 = std::min(e[1] - 1, static_cast<std::int64_t>(std::floor(c.y + r)));
    const std::int64_t x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(c.x - r)));
    const std::int64_t x1 = std::min(e[2] - 1, static_cast<std::int64_t>(std::floor(c.x + r)));
    for (std::int64_t z = z0; z <= z1; ++z) {
        const double dz = static_cast<double>(z) - c.z;
        for (std::int64_t y = y0; y <= y1; ++y) {
            const double dy = static_cast<double>(y) - c.y;
            const double rem = r2 - dz * dz - dy * dy;
            if (rem < 0) continue;
            std::uint8_t* row = mask.data() + (z * e[1] + y) * e[2];
            for (std::int64_t x = x0; x <= x1; ++x) {
                const double dx = static_cast<double>(x) - c.x;
                if (dx * dx <= rem) row[x] = 1;
            }
        }
    }
}

// separable sigma-1 Gaussian, radius 3, replicated edges
void blur_axis(std::vector<float>& v, const std::array<std::int64_t, 3>& e, int axis) {
    static const std::array<double, 7> taps = [] {
        std::array<double, 7> t{};
        double sum = 0.0;
        for (int i = -3; i <= 3; ++i) sum += (t[static_cast<std::size_t>(i + 3)] =
                                                  std::exp(-0.5 * i * i));
        for (auto& w : t) w /= sum;
        return t;
    }();
    const std::int64_t D = e[0], H = e[1], W = e[2];
    std::vector<float> out(v.size());
    auto idx = [&](std::int64_t z, std::int64_t y, std::int64_t x) {
        return (z * H + y) * W + x;
    };
    const std::int64_t len = axis == 0 ? D : axis == 1 ? H : W;
    for (std::int64_t z = 0; z < D; ++z)
        for (std::int64_t y = 0; y < H; ++y)
            for (std::int64_t x = 0; x < W; ++x) {
                double acc = 0.0;
                const std::int64_t base = axis == 0 ? z : axis == 1 ? y : x;
                for (int i = -3; i <= 3; ++i) {
                    const std::int64_t j =
                        std::max<std::int64_t>(0, std::min(len - 1, base + i));
                    const double w = taps[static_cast<std::size_t>(i + 3)];
                    acc += w * (axis == 0   ? v[idx(j, y, x)]
                                : axis == 1 ? v[idx(z, j, x)]
                                            : v[idx(z, y, j)]);
                }
                out[idx(z, y, x)] = static_cast<float>(acc);
            }
    v.swap(out);
}

}  // namespace

PhantomSample generate_phantom(const PhantomSpec& spec) {
    validate(spec);
    const auto& e = spec.extents;
    const std::size_t total = static_cast<std::size_t>(e[0] * e[1] * e[2]);
    std::vector<std::uint8_t> vessel(total, 0);

    Rng walk_rng(split_seed(spec.seed, "walk", 0));
    PhantomSample sample;

    struct Branch {
        Vec3 pos, dir;
        double radius;
        int depth;
    };
    constexpr double kStep = 0.5;
    constexpr int kMaxBranches = 64;
    const std::int64_t max_steps = 8 * std::max({e[0], e[1], e[2]});

    std::deque<Branch> queue;
    for (int i = 0; i < spec.vessel_count; ++i) {
        Vec3 pos;
        double* coords[3] = {&pos.z, &pos.y, &pos.x};
        for (int a = 0; a < 3; ++a) {
            const double hi_margin = std::min(spec.r_max + 1.0,
                                              (static_cast<double>(e[a]) - 1.0) / 2.0);
            *coords[a] = walk_rng.uniform(hi_margin, static_cast<double>(e[a]) - 1.0 - hi_margin);
        }
        Vec3 dir = random_unit(walk_rng);
        if (spec.axis_aligned) {
            const std::size_t axis = static_cast<std::size_t>(walk_rng.uniform_int(3));
            const double sign = walk_rng.uniform() < 0.5 ? -1.0 : 1.0;
            dir = {axis == 0 ? sign : 0.0, axis == 1 ? sign : 0.0, axis == 2 ? sign : 0.0};
        }
        // grow from the seed point toward both ends so the tube crosses the
        // volume instead of stopping at the (random) seed
        const double radius = walk_rng.uniform(spec.r_min, spec.r_max);
        queue.push_back({pos, dir, radius, 0});
        queue.push_back({pos + (-kStep) * dir, -1.0 * dir, radius, 0});
    }

    int branches = 0;
    while (!queue.empty() && branches < kMaxBranches) {
        Branch b = queue.front();
        queue.pop_front();
        ++branches;
        std::vector<std::array<double, 3>> polyline;
        for (std::int64_t step = 0; step < max_steps; ++step) {
            if (b.pos.z < 0 || b.pos.z > static_cast<double>(e[0]) - 1 || b.pos.y < 0 ||
                b.pos.y > static_cast<double>(e[1]) - 1 || b.pos.x < 0 ||
                b.pos.x > static_cast<double>(e[2]) - 1)
                break;
            stamp_sphere(vessel, e, b.pos, b.radius);
            polyline.push_back({b.pos.z, b.pos.y, b.pos.x});

            if (spec.max_bend > 0.0) {
                const double angle = walk_rng.uniform(0.0, spec.max_bend * kStep);
                b.dir = normalized(rotate(b.dir, random_perpendicular(b.dir, walk_rng), angle));
            }
            b.radius = std::min(spec.r_max,
                                std::max(spec.r_min, b.radius + walk_rng.uniform(-0.05, 0.05)));
            if (b.depth < 3 && static_cast<int>(queue.size()) + branches < kMaxBranches &&
                walk_rng.uniform() < spec.bifurcation_prob * kStep) {
                const double angle = walk_rng.uniform(0.4, 0.9);
                const Vec3 child_dir =
                    normalized(rotate(b.dir, random_perpendicular(b.dir, walk_rng), angle));
                queue.push_back({b.pos, child_dir,
                                 std::max(spec.r_min, b.radius * 0.75), b.depth + 1});
            }
            b.pos = b.pos + kStep * b.dir;
        }
        sample.centerlines.push_back(std::move(polyline));
    }

    const Shape5 shape{1, 1, e[0], e[1], e[2]};
    sample.vessel_labels = Tensor(shape);
    {
        auto out = sample.vessel_labels.mutable_data();
        for (std::size_t i = 0; i < total; ++i) out[i] = static_cast<float>(vessel[i]);
    }
    sample.wall_labels = wall_from_vessel(sample.vessel_labels);

    std::vector<float> field(total);
    for (std::size_t i = 0; i < total; ++i) field[i] = static_cast<float>(vessel[i]);
    for (int axis = 0; axis < 3; ++axis) blur_axis(field, e, axis);

    Rng noise_rng(split_seed(spec.seed, "noise", 0));
    sample.volume = Tensor(shape);
    auto vol = sample.volume.mutable_data();
    for (std::size_t i = 0; i < total; ++i) {
        double v = spec.contrast * static_cast<double>(field[i]);
        if (spec.noise_sigma > 0.0) v += noise_rng.normal(0.0, spec.noise_sigma);
        vol[i] = static_cast<float>(v);
    }
    return sample;
}

Tensor wall_from_vessel(const Tensor& vessel) {
    const Shape5 s = vessel.shape();
    Tensor wall(s);
    const auto in = vessel.data();
    auto out = wall.mutable_data();
    const std::int64_t D = s.d, H = s.h, W = s.w;
    auto at = [&](std::int64_t z, std::int64_t y, std::int64_t x) {
        return in[(z * H + y) * W + x] != 0.0f;
    };
    for (std::int64_t z = 0; z < D; ++z)
        for (std::int64_t y = 0; y < H; ++y)
            for (std::int64_t x = 0; x < W; ++x) {
                if (!at(z, y, x)) continue;
                const bool surface = (z > 0 && !at(z - 1, y, x)) || (z + 1 < D && !at(z + 1, y, x)) ||
                                     (y > 0 && !at(z, y - 1, x)) || (y + 1 < H && !at(z, y + 1, x)) ||
                                     (x > 0 && !at(z, y, x - 1)) || (x + 1 < W && !at(z, y, x + 1));
                if (surface) out[(z * H + y) * W + x] = 1.0f;
            }
    return wall;
}

Tensor whiten(const Tensor& volume) {
    const auto in = volume.data();
    const auto n = static_cast<double>(in.size());
    double mean = 0.0;
    for (const float v : in) mean += v;
    mean /= n;
    double var = 0.0;
    for (const float v : in) {
        const double d = static_cast<double>(v) - mean;
        var += d * d;
    }
    var /= n;
    if (var <= 0.0)
        throw std::invalid_argument("whiten: volume is constant (zero variance)");
    const double inv_std = 1.0 / std::sqrt(var);
    Tensor out(volume.shape());
    auto od = out.mutable_data();
    for (std::size_t i = 0; i < in.size(); ++i)
        od[i] = static_cast<float>((static_cast<double>(in[i]) - mean) * inv_std);
    return out;
}

namespace {

std::vector<std::int64_t> axis_origins(std::int64_t padded, std::int64_t seg, std::int64_t ov) {
    const std::int64_t stride = seg - ov;
    std::vector<std::int64_t> origins;
    std::int64_t pos = 0;
    while (true) {
        origins.push_back(pos);
        if (pos + seg >= padded) break;
        pos = std::min(pos + stride, padded - seg);
    }
    return origins;
}

}  // namespace

std::vector<Segment> crop_segments(const Tensor& volume,
                                   const std::array<std::int64_t, 3>& segment_extents,
                                   const std::array<std::int64_t, 3>& overlap) {
    const Shape5 s = volume.shape();
    if (s.n != 1 || s.c != 1)
        throw std::invalid_argument(detail::msg("crop_segments: expected a (1,1,D,H,W) volume, ",
                                                "got ", s.str()));
    const std::array<std::int64_t, 3> vol{s.d, s.h, s.w};
    for (int a = 0; a < 3; ++a) {
        if (segment_extents[a] < 1)
            throw std::invalid_argument("crop_segments: segment extents must be positive");
        if (overlap[a] < 0 || overlap[a] >= segment_extents[a])
            throw std::invalid_argument(detail::msg("crop_segments: overlap ", overlap[a],
                                                    " must be in [0, segment extent ",
                                                    segment_extents[a], ")"));
    }

    std::array<std::vector<std::int64_t>, 3> origins;
    std::array<std::int64_t, 3> padded;
    for (int a = 0; a < 3; ++a) {
        padded[a] = std::max(vol[a], segment_extents[a]);
        origins[a] = axis_origins(padded[a], segment_extents[a], overlap[a]);
    }

    const auto in = volume.data();
    auto clampi = [](std::int64_t v, std::int64_t hi) {
        return std::min(std::max<std::int64_t>(0, v), hi);
    };

    std::vector<Segment> segments;
    segments.reserve(origins[0].size() * origins[1].size() * origins[2].size());
    for (const std::int64_t oz : origins[0])
        for (const std::int64_t oy : origins[1])
            for (const std::int64_t ox : origins[2]) {
                Segment seg;
                seg.origin = {oz, oy, ox};
                seg.data = Tensor(
                    Shape5{1, 1, segment_extents[0], segment_extents[1], segment_extents[2]});
                auto out = seg.data.mutable_data();
                for (std::int64_t z = 0; z < segment_extents[0]; ++z) {
                    const std::int64_t sz = clampi(oz + z, vol[0] - 1);
                    for (std::int64_t y = 0; y < segment_extents[1]; ++y) {
                        const std::int64_t sy = clampi(oy + y, vol[1] - 1);
                        float* dst = out.data() + (z * segment_extents[1] + y) * segment_extents[2];
                        const float* src = in.data() + (sz * vol[1] + sy) * vol[2];
                        for (std::int64_t x = 0; x < segment_extents[2]; ++x)
                            dst[x] = src[clampi(ox + x, vol[2] - 1)];
                    }
                }
                segments.push_back(std::move(seg));
            }
    return segments;
}

std::vector<std::size_t> filter_training_segments(const std::vector<Segment>& label_segments,
                                                  double min_fraction) {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < label_segments.size(); ++i) {
        const auto span = label_segments[i].data.data();
        std::int64_t positives = 0;
        for (const float v : span) positives += (v != 0.0f);
        const double fraction = static_cast<double>(positives) / static_cast<double>(span.size());
        if (fraction > min_fraction) kept.push_back(i);
    }
    return kept;
}

Tensor stitch_predictions(const std::vector<Segment>& segments,
                          const std::array<std::int64_t, 3>& volume_extents) {
    for (const std::int64_t e : volume_extents)
        if (e < 1) throw std::invalid_argument("stitch_predictions: invalid volume extents");
    std::array<std::int64_t, 3> padded = volume_extents;
    for (const Segment& seg : segments) {
        const Shape5 s = seg.data.shape();
        if (s.n != 1 || s.c != 1)
            throw std::invalid_argument(
                detail::msg("stitch_predictions: segment must be (1,1,D,H,W), got ", s.str()));
        const std::array<std::int64_t, 3> ext{s.d, s.h, s.w};
        for (int a = 0; a < 3; ++a) {
            if (seg.origin[a] < 0)
                throw std::invalid_argument("stitch_predictions: negative segment origin");
            padded[a] = std::max(padded[a], seg.origin[a] + ext[a]);
        }
    }

    const std::size_t total = static_cast<std::size_t>(padded[0] * padded[1] * padded[2]);
    std::vector<double> sum(total, 0.0);
    std::vector<std::uint32_t> count(total, 0);
    for (const Segment& seg : segments) {
        const Shape5 s = seg.data.shape();
        const auto span = seg.data.data();
        for (std::int64_t z = 0; z < s.d; ++z)
            for (std::int64_t y = 0; y < s.h; ++y) {
                const float* src = span.data() + (z * s.h + y) * s.w;
                const std::size_t base = static_cast<std::size_t>(
                    ((seg.origin[0] + z) * padded[1] + seg.origin[1] + y) * padded[2] +
                    seg.origin[2]);
                for (std::int64_t x = 0; x < s.w; ++x) {
                    sum[base + static_cast<std::size_t>(x)] += src[x];
                    count[base + static_cast<std::size_t>(x)] += 1;
                }
            }
    }

    Tensor out(Shape5{1, 1, volume_extents[0], volume_extents[1], volume_extents[2]});
    auto od = out.mutable_data();
    for (std::int64_t z = 0; z < volume_extents[0]; ++z)
        for (std::int64_t y = 0; y < volume_extents[1]; ++y)
            for (std::int64_t x = 0; x < volume_extents[2]; ++x) {
                const std::size_t src =
                    static_cast<std::size_t>((z * padded[1] + y) * padded[2] + x);
                if (count[src] == 0)
                    throw std::invalid_argument(detail::msg(
                        "stitch_predictions: voxel (", z, ",", y, ",", x,
                        ") is covered by no segment"));
                od[(z * volume_extents[1] + y) * volume_extents[2] + x] =
                    static_cast<float>(sum[src] / count[src]);
            }
    return out;
}

}  // namespace i2i
