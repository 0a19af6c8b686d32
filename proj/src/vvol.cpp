#include "i2i/vvol.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace i2i {

static_assert(std::endian::native == std::endian::little,
              "vvol serialization assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'V', 'V', 'O', 'L'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& s, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(s, bits);
}

struct Reader {
    const std::string& buf;
    const std::string& path;
    std::size_t off = 0;

    void need(std::size_t n, const char* what) const {
        if (off + n > buf.size())
            throw std::runtime_error(detail::msg("vvol ", path, ": truncated reading ", what));
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + off);
        off += 4;
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    }
    float f32(const char* what) {
        const std::uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(buf[off++]);
    }
};

}  // namespace

void write_vvol(const std::string& path, const Tensor& volume, VvolDtype dtype,
                const std::array<float, 3>& spacing) {
    const Shape5 s = volume.shape();
    if (s.n != 1 || s.c != 1)
        throw std::invalid_argument(
            detail::msg("vvol: expected a (1,1,D,H,W) volume, got ", s.str()));
    std::string buf;
    buf.append(kMagic, 4);
    put_u32(buf, kVersion);
    buf.push_back(static_cast<char>(dtype));
    for (const std::int64_t e : {s.d, s.h, s.w}) put_u32(buf, static_cast<std::uint32_t>(e));
    for (const float v : spacing) put_f32(buf, v);

    const auto span = volume.data();
    if (dtype == VvolDtype::kF32) {
        const std::size_t at = buf.size();
        buf.resize(at + span.size() * sizeof(float));
        std::memcpy(buf.data() + at, span.data(), span.size() * sizeof(float));
    } else {
        for (const float v : span) {
            const long r = std::lround(static_cast<double>(v));
            buf.push_back(static_cast<char>(std::min(255L, std::max(0L, r))));
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open vvol for writing: " + path);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("vvol write failed: " + path);
}

VvolVolume read_vvol(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open vvol: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r{buf, path};
    r.need(4, "magic");
    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw std::runtime_error("vvol " + path + ": bad magic");
    r.off = 4;
    const std::uint32_t version = r.u32("version");
    if (version != kVersion)
        throw std::runtime_error(detail::msg("vvol ", path, ": unsupported version ", version));
    const std::uint8_t dtype_raw = r.u8("dtype");
    if (dtype_raw > 1)
        throw std::runtime_error(detail::msg("vvol ", path, ": unknown dtype ",
                                             static_cast<int>(dtype_raw)));
    std::int64_t e[3];
    for (auto& v : e) v = r.u32("extents");
    VvolVolume out;
    out.dtype = static_cast<VvolDtype>(dtype_raw);
    for (int i = 0; i < 3; ++i) out.spacing[static_cast<std::size_t>(i)] = r.f32("spacing");

    const Shape5 shape{1, 1, e[0], e[1], e[2]};
    check_extents(shape);
    const auto numel = static_cast<std::size_t>(shape.numel());
    std::vector<float> data(numel);
    if (out.dtype == VvolDtype::kF32) {
        r.need(numel * sizeof(float), "payload");
        std::memcpy(data.data(), buf.data() + r.off, numel * sizeof(float));
        r.off += numel * sizeof(float);
    } else {
        r.need(numel, "payload");
        for (std::size_t i = 0; i < numel; ++i)
            data[i] = static_cast<float>(static_cast<unsigned char>(buf[r.off + i]));
        r.off += numel;
    }
    if (r.off != buf.size())
        throw std::runtime_error(detail::msg("vvol ", path, ": ", buf.size() - r.off,
                                             " trailing bytes"));
    out.data = Tensor::from_data(shape, std::move(data));
    return out;
}

}  // namespace i2i
