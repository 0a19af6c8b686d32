#include "i2i/train.hpp"

#include <cmath>
#include <fstream>

namespace i2i {

namespace {

const Tensor* matching_level(const std::vector<Tensor>& pyramid, int m, const Shape5& want) {
    const auto& preferred = pyramid[static_cast<std::size_t>(m - 1)];
    if (preferred.shape().spatial_equals(want)) return &preferred;
    for (const auto& level : pyramid)
        if (level.shape().spatial_equals(want)) return &level;
    return nullptr;
}

}  // namespace

MultiScaleLoss multiscale_loss(const MultiScaleOutputs& outputs,
                               const std::vector<Tensor>& pyramid,
                               const ActiveSupervision& active, bool balanced) {
    if (active.outputs.empty() && !active.fused)
        throw std::invalid_argument("multiscale_loss: supervision set is empty");
    const int m_count = static_cast<int>(outputs.activations.size());
    if (static_cast<int>(pyramid.size()) != m_count)
        throw std::invalid_argument(detail::msg("multiscale_loss: ", pyramid.size(),
                                                " pyramid levels for ", m_count, " outputs"));

    MultiScaleLoss result;
    bool first = true;
    auto accumulate = [&](const Tensor& act, const Tensor& labels, int tag) {
        Tensor term = output_loss(act, labels, balanced);
        result.report.per_output.emplace_back(tag, output_loss_value(act, labels, balanced));
        result.total = first ? term : add(result.total, term);
        first = false;
    };

    for (const int m : active.outputs) {
        if (m < 1 || m > m_count)
            throw std::invalid_argument(detail::msg("multiscale_loss: supervision references ",
                                                    "output ", m, " but the network has ", m_count));
        const Tensor& act = outputs.activations[static_cast<std::size_t>(m - 1)];
        const Tensor* labels = matching_level(pyramid, m, act.shape());
        if (!labels)
            throw std::invalid_argument(detail::msg(
                "multiscale_loss: output ", m, " resolution ", act.shape().str(),
                " matches no pyramid level"));
        accumulate(act, *labels, m);
    }
    if (active.fused) {
        if (!outputs.fused)
            throw std::invalid_argument(
                "multiscale_loss: supervision references the fused output but the network "
                "produces none");
        const Tensor& act = *outputs.fused;
        const Tensor& labels = pyramid.back();
        if (!labels.shape().spatial_equals(act.shape()))
            throw std::invalid_argument(detail::msg(
                "multiscale_loss: fused output resolution ", act.shape().str(),
                " does not match the full-resolution labels ", labels.shape().str()));
        accumulate(act, labels, 0);
    }
    for (const auto& [tag, value] : result.report.per_output) result.report.total += value;
    return result;
}

double lr_schedule(std::int64_t iteration, double base_lr, std::int64_t decimation_interval) {
    if (iteration < 0) throw std::invalid_argument("lr_schedule: iteration must be >= 0");
    if (decimation_interval < 1)
        throw std::invalid_argument("lr_schedule: decimation interval must be >= 1");
    const auto k = static_cast<double>(iteration / decimation_interval);
    return base_lr * std::pow(0.1, k);
}

void Sgd::step(const std::vector<std::pair<std::string, Tensor*>>& params,
               const std::vector<const std::vector<float>*>& grads, double lr,
               const std::function<double(const std::string&)>& multiplier) {
    if (grads.size() != params.size())
        throw std::invalid_argument(detail::msg("sgd: ", grads.size(), " gradients for ",
                                                params.size(), " parameters"));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& [name, tensor] = params[i];
        const std::vector<float>& g = *grads[i];
        if (static_cast<std::int64_t>(g.size()) != tensor->numel())
            throw std::invalid_argument(detail::msg("sgd: gradient for ", name, " has ", g.size(),
                                                    " elements, parameter has ", tensor->numel()));
        const double mult = multiplier(name);
        if (mult < 0.0)
            throw std::invalid_argument(detail::msg("sgd: negative multiplier for ", name));
        if (mult == 0.0) continue;
        const float rate = static_cast<float>(lr * mult);
        const float mom = static_cast<float>(momentum_);
        auto [it, inserted] = velocity_.try_emplace(name);
        std::vector<float>& v = it->second;
        if (inserted) v.assign(g.size(), 0.0f);
        if (v.size() != g.size())
            throw std::invalid_argument(detail::msg("sgd: velocity for ", name, " has ", v.size(),
                                                    " elements, gradient has ", g.size()));
        auto p = tensor->mutable_data();
        for (std::size_t j = 0; j < g.size(); ++j) {
            v[j] = mom * v[j] - rate * g[j];
            p[j] += v[j];
        }
    }
}

double path_multiplier(const std::string& name, const CurriculumPhase& phase) {
    return name.rfind("f2c/", 0) == 0 ? phase.f2c_multiplier : phase.c2f_multiplier;
}

namespace {

void validate_phase(const CurriculumPhase& phase, const NetworkSpec& spec) {
    if (phase.iterations < 0)
        throw std::invalid_argument("curriculum: phase " + phase.name + " has negative budget");
    if (phase.f2c_multiplier < 0.0 || phase.c2f_multiplier < 0.0)
        throw std::invalid_argument("curriculum: phase " + phase.name +
                                    " has a negative multiplier");
    if (phase.active.outputs.empty() && !phase.active.fused)
        throw std::invalid_argument("curriculum: phase " + phase.name +
                                    " has an empty supervision set");
    for (const int m : phase.active.outputs)
        if (m < 1 || m > spec.supervised_outputs)
            throw std::invalid_argument(detail::msg("curriculum: phase ", phase.name,
                                                    " references output ", m,
                                                    " but the network has ",
                                                    spec.supervised_outputs));
    if (phase.active.fused && spec.variant != Variant::kHed3d)
        throw std::invalid_argument("curriculum: phase " + phase.name +
                                    " references the fused output but the variant has none");
}

}  // namespace

CurriculumResult run_curriculum(Network& net, const std::vector<TrainingSample>& dataset,
                                const std::vector<CurriculumPhase>& phases, std::uint64_t seed,
                                Sgd& sgd, const TrainOptions& opts) {
    if (phases.empty()) throw std::invalid_argument("curriculum: no phases");
    if (dataset.empty()) throw std::invalid_argument("curriculum: dataset is empty");
    for (const auto& phase : phases) validate_phase(phase, net.spec());

    const int m_count = net.spec().supervised_outputs;

    // label pyramids built once per (sample, kind)
    std::vector<std::vector<Tensor>> wall_pyramids(dataset.size());
    std::vector<std::vector<Tensor>> vessel_pyramids(dataset.size());
    auto pyramid_for = [&](std::size_t idx, LabelKind kind) -> const std::vector<Tensor>& {
        auto& cache = kind == LabelKind::kWall ? wall_pyramids[idx] : vessel_pyramids[idx];
        if (cache.empty()) {
            const Tensor& labels =
                kind == LabelKind::kWall ? dataset[idx].y_wall : dataset[idx].y_vessel;
            cache = build_label_pyramid(labels, m_count);
        }
        return cache;
    };

    CurriculumResult result;
    std::int64_t iter = opts.start_iteration;

    for (const auto& phase : phases) {
        std::vector<double> phase_losses;
        phase_losses.reserve(static_cast<std::size_t>(phase.iterations));
        for (std::int64_t k = 0; k < phase.iterations; ++k, ++iter) {
            const std::size_t idx = static_cast<std::size_t>(
                split_seed(seed, "sample", static_cast<std::uint64_t>(iter)) % dataset.size());
            const TrainingSample& sample = dataset[idx];
            const auto& pyramid = pyramid_for(idx, phase.labels);

            Tape tape;
            ForwardTrace trace;
            MultiScaleOutputs outputs = net.forward(sample.x, &tape, &trace);
            MultiScaleLoss loss = multiscale_loss(outputs, pyramid, phase.active, opts.balanced);
            tape.backward(loss.total);

            auto params = net.params().named_tensors();
            if (params.size() != trace.param_leaves.size())
                throw std::logic_error("curriculum: parameter registry out of sync");
            std::vector<const std::vector<float>*> grads;
            grads.reserve(params.size());
            for (std::size_t i = 0; i < params.size(); ++i) {
                if (params[i].first != trace.param_leaves[i].first)
                    throw std::logic_error("curriculum: parameter registry out of sync");
                grads.push_back(&tape.grad(trace.param_leaves[i].second));
            }

            const double lr = lr_schedule(iter, phase.base_lr, opts.lr_decimation_interval);
            sgd.step(params, grads, lr,
                     [&](const std::string& name) { return path_multiplier(name, phase); });

            LossHistoryRow row;
            row.iteration = iter;
            row.phase = phase.name;
            row.lr = lr;
            row.total = loss.report.total;
            row.per_output.assign(static_cast<std::size_t>(m_count), 0.0);
            for (const auto& [tag, value] : loss.report.per_output)
                if (tag >= 1) row.per_output[static_cast<std::size_t>(tag - 1)] = value;
            result.history.push_back(std::move(row));
            phase_losses.push_back(loss.report.total);

            if (phase.plateau_window > 0 &&
                static_cast<std::int64_t>(phase_losses.size()) >= 2 * phase.plateau_window) {
                const auto w = static_cast<std::size_t>(phase.plateau_window);
                const std::size_t n = phase_losses.size();
                double cur = 0.0, prev = 0.0;
                for (std::size_t i = n - w; i < n; ++i) cur += phase_losses[i];
                for (std::size_t i = n - 2 * w; i < n - w; ++i) prev += phase_losses[i];
                cur /= static_cast<double>(w);
                prev /= static_cast<double>(w);
                const double improvement = (prev - cur) / std::max(prev, 1e-300);
                if (improvement < phase.plateau_tol) {
                    ++iter;
                    break;
                }
            }
        }
        if (opts.on_phase_end) opts.on_phase_end(phase, iter);
    }
    result.next_iteration = iter;
    return result;
}

void write_loss_history_csv(const std::string& path, const std::vector<LossHistoryRow>& history,
                            int m_count) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open loss history for writing: " + path);
    f << "iteration,phase,lr,total";
    for (int m = 1; m <= m_count; ++m) f << ",l" << m;
    f << "\n";
    f.setf(std::ios::scientific);
    f.precision(17);
    for (const auto& row : history) {
        f << row.iteration << ',' << row.phase << ',' << row.lr << ',' << row.total;
        for (const double v : row.per_output) f << ',' << v;
        f << "\n";
    }
    if (!f) throw std::runtime_error("loss history write failed: " + path);
}

}  // namespace i2i
