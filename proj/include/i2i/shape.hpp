#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace i2i {

/// Dense rank-5 extents, (batch, channels, depth, height, width).
/// Element order is fixed: w fastest, then h, d, c, n.
struct Shape5 {
    std::int64_t n = 1;
    std::int64_t c = 1;
    std::int64_t d = 1;
    std::int64_t h = 1;
    std::int64_t w = 1;

    std::int64_t numel() const { return n * c * d * h * w; }

    std::int64_t offset(std::int64_t in, std::int64_t ic, std::int64_t id,
                        std::int64_t ih, std::int64_t iw) const {
        return ((((in * c + ic) * d + id) * h + ih) * w + iw);
    }

    bool operator==(const Shape5&) const = default;

    bool spatial_equals(const Shape5& o) const {
        return d == o.d && h == o.h && w == o.w;
    }

    std::string str() const {
        std::ostringstream os;
        os << n << "x" << c << "x" << d << "x" << h << "x" << w;
        return os.str();
    }
};

inline void check_extents(const Shape5& s) {
    if (s.n < 1 || s.c < 1 || s.d < 1 || s.h < 1 || s.w < 1)
        throw std::invalid_argument("tensor extents must all be >= 1, got " + s.str());
}

namespace detail {

template <class... Args>
std::string msg(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

}  // namespace detail

}  // namespace i2i
