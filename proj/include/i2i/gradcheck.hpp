#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "i2i/tensor.hpp"

namespace i2i {

template <class S>
struct GradCheckReport {
    S max_rel_error = 0;
    std::int64_t worst_param = -1;   ///< index into the flattened parameter list
    std::int64_t worst_element = -1;
    S analytic = 0;
    S numeric = 0;
};

/// Compare reverse-mode gradients against central differences.
///
/// `fn` must build the scalar loss from the given tape and the tape-registered
/// parameter aliases it receives; it is re-invoked on a fresh tape for every
/// probe. Relative error uses max(|analytic|, |numeric|, floor) as the
/// denominator.
template <class S>
GradCheckReport<S> grad_check(
    const std::function<TensorT<S>(TapeT<S>&, std::vector<TensorT<S>>&)>& fn,
    std::vector<TensorT<S>> params, S step, S floor = S(1e-12)) {
    GradCheckReport<S> report;

    std::vector<std::vector<S>> analytic;
    {
        TapeT<S> tape;
        std::vector<TensorT<S>> reg;
        reg.reserve(params.size());
        for (auto& p : params) reg.push_back(tape.leaf(p));
        TensorT<S> loss = fn(tape, reg);
        tape.backward(loss);
        for (const auto& p : reg) analytic.push_back(tape.grad(p));
    }

    auto eval = [&]() -> S {
        TapeT<S> tape;
        std::vector<TensorT<S>> reg;
        reg.reserve(params.size());
        for (auto& p : params) reg.push_back(tape.leaf(p));
        return fn(tape, reg).value();
    };

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto buf = params[pi].mutable_data();
        for (std::size_t ei = 0; ei < buf.size(); ++ei) {
            const S saved = buf[ei];
            buf[ei] = saved + step;
            const S up = eval();
            buf[ei] = saved - step;
            const S down = eval();
            buf[ei] = saved;

            const S numeric = (up - down) / (S(2) * step);
            const S exact = analytic[pi][ei];
            const S denom = std::max({std::abs(exact), std::abs(numeric), floor});
            const S rel = std::abs(exact - numeric) / denom;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = static_cast<std::int64_t>(pi);
                report.worst_element = static_cast<std::int64_t>(ei);
                report.analytic = exact;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace i2i
