#include "i2i/net.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <openssl/evp.h>

#include "json.hpp"

namespace i2i {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace {

std::int64_t scaled_channels(std::int64_t base, double wm) {
    return std::max<std::int64_t>(1, std::llround(static_cast<double>(base) * wm));
}

std::string stage_conv_path(int stage, std::size_t conv) {
    return detail::msg("f2c/stage", stage, "/conv", conv + 1);
}

}  // namespace

std::string variant_name(Variant v) { return v == Variant::kHed3d ? "hed3d" : "i2i3d"; }

Variant parse_variant(const std::string& name) {
    if (name == "hed3d") return Variant::kHed3d;
    if (name == "i2i3d") return Variant::kI2i3d;
    throw std::invalid_argument("unknown variant \"" + name + "\" (expected hed3d or i2i3d)");
}

std::int64_t NetworkSpec::channels(int stage, std::size_t conv) const {
    return scaled_channels(stage_channels.at(static_cast<std::size_t>(stage - 1)).at(conv),
                           width_multiplier);
}

void validate_spec(const NetworkSpec& spec) {
    if (spec.stage_channels.size() != 4)
        throw std::invalid_argument(detail::msg("network spec: exactly 4 stages required, got ",
                                                spec.stage_channels.size()));
    if (spec.supervised_outputs != spec.stage_count())
        throw std::invalid_argument(detail::msg(
            "network spec: supervised output count must equal the stage count, got ",
            spec.supervised_outputs, " outputs for ", spec.stage_count(), " stages"));
    if (!(spec.width_multiplier > 0.0) || spec.width_multiplier > 1.0)
        throw std::invalid_argument(detail::msg(
            "network spec: width_multiplier must be in (0, 1], got ", spec.width_multiplier));
    for (std::size_t s = 0; s < spec.stage_channels.size(); ++s) {
        if (spec.stage_channels[s].empty())
            throw std::invalid_argument(
                detail::msg("network spec: stage ", s + 1, " has no convolution layers"));
        for (const std::int64_t c : spec.stage_channels[s]) {
            if (c < 1)
                throw std::invalid_argument(detail::msg("network spec: stage ", s + 1,
                                                        " has channel count ", c, " < 1"));
            if (s == 0 && c != 32)
                throw std::invalid_argument(detail::msg(
                    "network spec: first-stage channels are fixed at 32 before width scaling, got ",
                    c));
        }
    }
    if (spec.hed_supervise_upsampled && spec.variant != Variant::kHed3d)
        throw std::invalid_argument(
            "network spec: hed_supervise_upsampled applies only to the hed3d variant");
}

std::string spec_to_json(const NetworkSpec& spec) {
    nlohmann::json j;
    j["variant"] = variant_name(spec.variant);
    j["stage_channels"] = spec.stage_channels;
    j["width_multiplier"] = spec.width_multiplier;
    j["supervised_outputs"] = spec.supervised_outputs;
    j["hed_supervise_upsampled"] = spec.hed_supervise_upsampled;
    return j.dump(2) + "\n";
}

NetworkSpec spec_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    NetworkSpec spec;
    spec.variant = parse_variant(j.at("variant").get<std::string>());
    spec.stage_channels = j.at("stage_channels").get<std::vector<std::vector<std::int64_t>>>();
    spec.width_multiplier = j.at("width_multiplier").get<double>();
    spec.supervised_outputs = j.at("supervised_outputs").get<int>();
    spec.hed_supervise_upsampled = j.value("hed_supervise_upsampled", false);
    validate_spec(spec);
    return spec;
}

std::vector<std::pair<std::string, Tensor*>> NetworkParams::named_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto& [name, p] : convs) {
        out.emplace_back(name + "/kernel", &p.kernel);
        out.emplace_back(name + "/bias", &p.bias);
    }
    if (fusion) {
        out.emplace_back("fuse/weights", &fusion->weights);
        out.emplace_back("fuse/bias", &fusion->bias);
    }
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> NetworkParams::named_tensors() const {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for (const auto& [name, p] : convs) {
        out.emplace_back(name + "/kernel", &p.kernel);
        out.emplace_back(name + "/bias", &p.bias);
    }
    if (fusion) {
        out.emplace_back("fuse/weights", &fusion->weights);
        out.emplace_back("fuse/bias", &fusion->bias);
    }
    return out;
}

Network::Network(NetworkSpec spec, std::uint64_t init_seed) : spec_(std::move(spec)) {
    validate_spec(spec_);
    const int stages = spec_.stage_count();
    const int m_count = spec_.supervised_outputs;

    std::int64_t c_in = 1;
    for (int s = 1; s <= stages; ++s) {
        const std::size_t n_convs = spec_.stage_channels[static_cast<std::size_t>(s - 1)].size();
        for (std::size_t j = 0; j < n_convs; ++j) {
            const std::int64_t c_out = spec_.channels(s, j);
            const std::string path = stage_conv_path(s, j);
            Rng rng(split_seed(init_seed, path.c_str(), 0));
            params_.convs.emplace(path, random_conv_params<float>(c_out, c_in, 3, 3, 3, rng));
            c_in = c_out;
        }
    }

    auto stage_out_channels = [&](int s) {
        return spec_.channels(s, spec_.stage_channels[static_cast<std::size_t>(s - 1)].size() - 1);
    };

    // side classifiers: output m attaches to stage (stages+1-m); zero-initialized
    for (int m = 1; m <= m_count; ++m) {
        const std::int64_t c = stage_out_channels(stages + 1 - m);
        params_.convs.emplace(detail::msg("side/m", m), make_conv_params<float>(1, c, 1, 1, 1));
    }

    if (spec_.variant == Variant::kI2i3d) {
        for (int m = 2; m <= m_count; ++m) {
            const std::int64_t c_fine = stage_out_channels(stages + 1 - m);
            const std::int64_t c_coarse = stage_out_channels(stages + 2 - m);
            params_.convs.emplace(detail::msg("c2f/m", m, "/mix"),
                                  init_passthrough<float>(c_fine, c_coarse));
            params_.convs.emplace(detail::msg("c2f/m", m, "/conv1"),
                                  init_identity_conv<float>(3, c_fine));
            params_.convs.emplace(detail::msg("c2f/m", m, "/conv2"),
                                  init_identity_conv<float>(3, c_fine));
        }
    } else {
        params_.fusion = init_fusion_weights<float>(m_count);
    }
}

MultiScaleOutputs Network::forward(const Tensor& x, Tape* tape, ForwardTrace* trace) const {
    const int stages = spec_.stage_count();
    const int m_count = spec_.supervised_outputs;
    const Shape5 xs = x.shape();
    if (xs.c != 1)
        throw std::invalid_argument(
            detail::msg("forward: input must have a single channel, got ", xs.str()));
    const std::int64_t div = std::int64_t(1) << (stages - 1);
    if (xs.d % div || xs.h % div || xs.w % div)
        throw std::invalid_argument(detail::msg("forward: input spatial extents ", xs.str(),
                                                " must be divisible by ", div));

    ForwardTrace local;
    ForwardTrace& tr = trace ? *trace : local;
    tr.f2c_features.clear();
    tr.c2f_features.clear();
    tr.param_leaves.clear();

    std::map<std::string, ConvParams> lp;
    std::optional<FusionWeights> lf;
    if (tape) {
        for (const auto& [name, p] : params_.convs)
            lp.emplace(name, ConvParams{tape->leaf(p.kernel), tape->leaf(p.bias)});
        if (params_.fusion)
            lf = FusionWeights{tape->leaf(params_.fusion->weights),
                               tape->leaf(params_.fusion->bias)};
        for (const auto& [name, p] : lp) {
            tr.param_leaves.emplace_back(name + "/kernel", p.kernel);
            tr.param_leaves.emplace_back(name + "/bias", p.bias);
        }
        if (lf) {
            tr.param_leaves.emplace_back("fuse/weights", lf->weights);
            tr.param_leaves.emplace_back("fuse/bias", lf->bias);
        }
    } else {
        lp = params_.convs;
        lf = params_.fusion;
    }
    auto P = [&](const std::string& name) -> const ConvParams& { return lp.at(name); };

    Tensor h = x;
    for (int s = 1; s <= stages; ++s) {
        const std::size_t n_convs = spec_.stage_channels[static_cast<std::size_t>(s - 1)].size();
        for (std::size_t j = 0; j < n_convs; ++j) h = relu(conv3d(h, P(stage_conv_path(s, j))));
        tr.f2c_features.push_back(h);
        if (s < stages) h = avg_pool3d(h);
    }

    MultiScaleOutputs out;
    out.activations.resize(static_cast<std::size_t>(m_count));

    if (spec_.variant == Variant::kI2i3d) {
        Tensor g = tr.f2c_features.back();
        tr.c2f_features.push_back(g);
        out.activations[0] = side_output(g, SideOutputParams{P("side/m1")});
        for (int m = 2; m <= m_count; ++m) {
            const Tensor& fine = tr.f2c_features[static_cast<std::size_t>(stages - m)];
            Tensor up = upsample3d(g, UpsampleMode::kTrilinear);
            g = relu(mixing_layer(fine, up, P(detail::msg("c2f/m", m, "/mix"))));
            g = relu(conv3d(g, P(detail::msg("c2f/m", m, "/conv1"))));
            g = relu(conv3d(g, P(detail::msg("c2f/m", m, "/conv2"))));
            tr.c2f_features.push_back(g);
            out.activations[static_cast<std::size_t>(m - 1)] =
                side_output(g, SideOutputParams{P(detail::msg("side/m", m))});
        }
        for (const Tensor& a : out.activations) out.probabilities.push_back(sigmoid(a));
        out.top = out.probabilities.back();
    } else {
        std::vector<Tensor> upsampled(static_cast<std::size_t>(m_count));
        for (int m = 1; m <= m_count; ++m) {
            const Tensor& feats = tr.f2c_features[static_cast<std::size_t>(stages - m)];
            Tensor a = side_output(feats, SideOutputParams{P(detail::msg("side/m", m))});
            Tensor u = a;
            for (int k = 0; k < m_count - m; ++k) u = upsample3d(u, UpsampleMode::kTrilinear);
            upsampled[static_cast<std::size_t>(m - 1)] = u;
            out.activations[static_cast<std::size_t>(m - 1)] =
                spec_.hed_supervise_upsampled ? u : a;
        }
        Tensor fused = fuse_side_outputs(upsampled, *lf);
        out.fused = fused;
        for (const Tensor& a : out.activations) out.probabilities.push_back(sigmoid(a));
        out.top = sigmoid(fused);
    }
    return out;
}

Network build_hed3d(NetworkSpec spec, std::uint64_t init_seed) {
    spec.variant = Variant::kHed3d;
    return Network(std::move(spec), init_seed);
}

Network build_i2i3d(NetworkSpec spec, std::uint64_t init_seed) {
    spec.variant = Variant::kI2i3d;
    return Network(std::move(spec), init_seed);
}

Network build_network(const NetworkSpec& spec, std::uint64_t init_seed) {
    return Network(spec, init_seed);
}

std::array<std::uint8_t, 32> spec_digest(const NetworkSpec& spec) {
    std::string canon = variant_name(spec.variant);
    char buf[64];
    std::snprintf(buf, sizeof buf, "|wm=%.17g|m=%d|hsu=%d|stages=", spec.width_multiplier,
                  spec.supervised_outputs, spec.hed_supervise_upsampled ? 1 : 0);
    canon += buf;
    for (std::size_t s = 0; s < spec.stage_channels.size(); ++s) {
        if (s) canon += ';';
        for (std::size_t j = 0; j < spec.stage_channels[s].size(); ++j) {
            if (j) canon += ',';
            canon += std::to_string(spec.stage_channels[s][j]);
        }
    }
    std::array<std::uint8_t, 32> digest{};
    unsigned int len = 0;
    EVP_Digest(canon.data(), canon.size(), digest.data(), &len, EVP_sha256(), nullptr);
    return digest;
}

namespace {

void put_u16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    std::size_t off = 0;

    void need(std::size_t n, const char* what) const {
        if (off + n > buf.size())
            throw std::runtime_error(detail::msg("checkpoint truncated reading ", what));
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + off);
        off += 2;
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + off);
        off += 4;
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(buf[off++]);
    }
    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string out = buf.substr(off, n);
        off += n;
        return out;
    }
};

}  // namespace

void save_checkpoint(const std::vector<std::pair<std::string, const Tensor*>>& entries,
                     const std::array<std::uint8_t, 32>& digest, const std::string& path) {
    std::string buf;
    buf.append(kCheckpointMagic, 9);
    put_u32(buf, kCheckpointVersion);
    buf.append(reinterpret_cast<const char*>(digest.data()), digest.size());
    put_u32(buf, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, t] : entries) {
        if (name.size() > 0xffff)
            throw std::invalid_argument("checkpoint entry name too long: " + name);
        put_u16(buf, static_cast<std::uint16_t>(name.size()));
        buf += name;
        buf.push_back(5);  // rank
        const Shape5 s = t->shape();
        for (const std::int64_t e : {s.n, s.c, s.d, s.h, s.w})
            put_u32(buf, static_cast<std::uint32_t>(e));
        const auto span = t->data();
        const std::size_t nbytes = span.size() * sizeof(float);
        const std::size_t at = buf.size();
        buf.resize(at + nbytes);
        std::memcpy(buf.data() + at, span.data(), nbytes);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

void save_checkpoint(const Network& net, const std::string& path) {
    save_checkpoint(net.params().named_tensors(), spec_digest(net.spec()), path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Reader r{buf};
    const std::string magic = r.bytes(9, "magic");
    if (magic != std::string(kCheckpointMagic, 9))
        throw std::runtime_error("checkpoint " + path + ": bad magic");
    Checkpoint ck;
    ck.version = r.u32("version");
    if (ck.version != kCheckpointVersion)
        throw std::runtime_error(detail::msg("checkpoint ", path, ": unsupported version ",
                                             ck.version, " (expected ", kCheckpointVersion, ")"));
    const std::string dig = r.bytes(32, "digest");
    std::memcpy(ck.digest.data(), dig.data(), 32);
    const std::uint32_t count = r.u32("entry count");
    ck.entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = r.u16("entry name length");
        const std::string name = r.bytes(name_len, "entry name");
        const std::uint8_t rank = r.u8("entry rank");
        if (rank != 5)
            throw std::runtime_error(detail::msg("checkpoint ", path, ": entry ", name,
                                                 " has unsupported rank ",
                                                 static_cast<int>(rank)));
        std::int64_t dims[5];
        for (auto& d : dims) d = r.u32("entry dims");
        const Shape5 shape{dims[0], dims[1], dims[2], dims[3], dims[4]};
        check_extents(shape);
        const std::size_t nbytes = static_cast<std::size_t>(shape.numel()) * sizeof(float);
        r.need(nbytes, "entry payload");
        std::vector<float> data(static_cast<std::size_t>(shape.numel()));
        std::memcpy(data.data(), buf.data() + r.off, nbytes);
        r.off += nbytes;
        ck.entries.emplace_back(name, Tensor::from_data(shape, std::move(data)));
    }
    if (r.off != buf.size())
        throw std::runtime_error(detail::msg("checkpoint ", path, ": ", buf.size() - r.off,
                                             " trailing bytes"));
    return ck;
}

void adopt_checkpoint(Network& net, const Checkpoint& ck) {
    std::map<std::string, const Tensor*> have;
    for (const auto& [name, t] : ck.entries) {
        if (!have.emplace(name, &t).second)
            throw std::runtime_error("checkpoint has duplicate entry " + name);
    }
    auto expected = net.params().named_tensors();
    for (auto& [name, dst] : expected) {
        const auto it = have.find(name);
        if (it == have.end()) throw std::runtime_error("checkpoint missing entry " + name);
        const Tensor& src = *it->second;
        if (!(src.shape() == dst->shape()))
            throw std::runtime_error(detail::msg("checkpoint shape mismatch at ", name, ": file ",
                                                 src.shape().str(), " vs network ",
                                                 dst->shape().str()));
        have.erase(it);
    }
    if (!have.empty())
        throw std::runtime_error("checkpoint has unexpected entry " + have.begin()->first);
    std::map<std::string, const Tensor*> src_map;
    for (const auto& [name, t] : ck.entries) src_map.emplace(name, &t);
    for (auto& [name, dst] : expected) {
        const auto span = src_map.at(name)->data();
        std::memcpy(dst->mutable_data().data(), span.data(), span.size() * sizeof(float));
    }
}

}  // namespace i2i
