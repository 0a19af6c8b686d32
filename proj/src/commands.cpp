#include "i2i/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "i2i/bench.hpp"
#include "i2i/net.hpp"
#include "i2i/train.hpp"
#include "i2i/vvol.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace i2i {
namespace {

std::string case_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "case_%03d", i);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw std::runtime_error(detail::msg("cannot open ", path.string(), " for writing"));
    f << text;
    if (!f) throw std::runtime_error(detail::msg("write failed for ", path.string()));
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(detail::msg("cannot open ", path.string()));
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::string> read_manifest(const fs::path& dataset_dir) {
    const fs::path p = dataset_dir / "manifest.json";
    if (!fs::exists(p))
        throw std::runtime_error(detail::msg("dataset manifest not found: ", p.string()));
    const json j = json::parse(read_text(p));
    std::vector<std::string> names;
    for (const auto& c : j.at("cases")) names.push_back(c.get<std::string>());
    return names;
}

void write_manifest(const fs::path& dir, const std::vector<std::string>& names) {
    json j;
    j["count"] = names.size();
    j["cases"] = names;
    write_text(dir / "manifest.json", j.dump(2) + "\n");
}

std::int64_t count_positives(const Tensor& t) {
    std::int64_t n = 0;
    for (float v : t.data()) n += v > 0.5f ? 1 : 0;
    return n;
}

NetworkSpec spec_from_train_config(const RunConfig& cfg) {
    NetworkSpec spec;
    spec.variant = parse_variant(cfg.train.variant);
    spec.width_multiplier = cfg.train.width_multiplier;
    spec.supervised_outputs = cfg.train.supervised_outputs;
    spec.hed_supervise_upsampled = cfg.train.hed_supervise_upsampled;
    validate_spec(spec);
    return spec;
}

std::vector<TrainingSample> load_training_segments(const RunConfig& cfg) {
    const fs::path root = cfg.train.dataset;
    const auto names = read_manifest(root);
    if (names.empty()) throw std::runtime_error("training dataset has no cases");
    std::vector<TrainingSample> samples;
    for (const std::string& name : names) {
        const Tensor image = whiten(read_vvol((root / name / "image.vvol").string()).data);
        const Tensor wall = read_vvol((root / name / "wall.vvol").string()).data;
        const Tensor vessel = read_vvol((root / name / "vessel.vvol").string()).data;
        const auto xs = crop_segments(image, cfg.train.segment_extents, cfg.train.segment_overlap);
        const auto ws = crop_segments(wall, cfg.train.segment_extents, cfg.train.segment_overlap);
        const auto vs = crop_segments(vessel, cfg.train.segment_extents, cfg.train.segment_overlap);
        for (std::size_t k : filter_training_segments(ws, cfg.train.min_positive_fraction))
            samples.push_back({xs[k].data, ws[k].data, vs[k].data});
    }
    if (samples.empty())
        throw std::runtime_error("no training segment exceeds the minimum positive fraction");
    return samples;
}

std::vector<CurriculumPhase> build_phases(const RunConfig& cfg, const NetworkSpec& spec) {
    const int m = spec.supervised_outputs;
    ActiveSupervision all;
    for (int k = 1; k <= m; ++k) all.outputs.push_back(k);
    all.fused = spec.variant == Variant::kHed3d;
    ActiveSupervision top;
    if (spec.variant == Variant::kHed3d)
        top.fused = true;
    else
        top.outputs = {m};

    std::vector<CurriculumPhase> phases;
    auto push = [&](const char* name, const PhaseConfig& pc, LabelKind labels,
                    const ActiveSupervision& active) {
        if (pc.iterations <= 0) return;
        CurriculumPhase p;
        p.name = name;
        p.iterations = pc.iterations;
        p.base_lr = pc.base_lr;
        p.f2c_multiplier = pc.f2c_multiplier;
        p.c2f_multiplier = pc.c2f_multiplier;
        p.active = active;
        p.labels = labels;
        p.plateau_window = pc.plateau_window;
        p.plateau_tol = pc.plateau_tol;
        phases.push_back(std::move(p));
    };
    push("A", cfg.train.phase_a, LabelKind::kVessel, all);
    push("B", cfg.train.phase_b, LabelKind::kWall, all);
    push("C", cfg.train.phase_c, LabelKind::kWall, top);
    if (phases.empty()) throw std::runtime_error("all curriculum phases have zero iterations");
    return phases;
}

void save_velocities(const Network& net, const Sgd& sgd, const fs::path& path) {
    std::vector<Tensor> storage;
    std::vector<std::pair<std::string, const Tensor*>> entries;
    const auto params = net.params().named_tensors();
    storage.reserve(params.size());
    for (const auto& [name, tensor] : params) {
        const auto it = sgd.velocities().find(name);
        Tensor v(tensor->shape());
        if (it != sgd.velocities().end()) {
            if (it->second.size() != static_cast<std::size_t>(tensor->shape().numel()))
                throw std::runtime_error(detail::msg("velocity size mismatch for ", name));
            std::copy(it->second.begin(), it->second.end(), v.mutable_data().begin());
        }
        storage.push_back(std::move(v));
    }
    for (std::size_t i = 0; i < params.size(); ++i)
        entries.emplace_back(params[i].first, &storage[i]);
    save_checkpoint(entries, spec_digest(net.spec()), path.string());
}

void load_velocities(const Network& net, Sgd& sgd, const fs::path& path) {
    const Checkpoint ck = load_checkpoint(path.string());
    std::map<std::string, const Tensor*> params;
    for (const auto& [name, tensor] : net.params().named_tensors()) params[name] = tensor;
    for (const auto& [name, tensor] : ck.entries) {
        const auto it = params.find(name);
        if (it == params.end())
            throw std::runtime_error(detail::msg("optimizer state holds unknown tensor ", name));
        if (!(tensor.shape() == it->second->shape()))
            throw std::runtime_error(detail::msg("optimizer state shape mismatch for ", name));
        const auto src = tensor.data();
        sgd.velocities()[name].assign(src.begin(), src.end());
    }
}

Tensor predict_volume(const Network& net, const Tensor& image,
                      const std::array<std::int64_t, 3>& segment_extents,
                      const std::array<std::int64_t, 3>& overlap) {
    const Tensor x = whiten(image);
    std::vector<Segment> preds;
    for (const Segment& seg : crop_segments(x, segment_extents, overlap)) {
        Segment out;
        out.origin = seg.origin;
        out.data = net.forward(seg.data).top;
        preds.push_back(std::move(out));
    }
    const Shape5& s = image.shape();
    return stitch_predictions(preds, {s.d, s.h, s.w});
}

}  // namespace

int cmd_phantom(const RunConfig& cfg) {
    if (cfg.phantom.count < 0) throw std::invalid_argument("phantom count must be non-negative");
    const fs::path out = cfg.out_dir;
    fs::create_directories(out);
    std::vector<std::string> names;
    for (int i = 0; i < cfg.phantom.count; ++i) {
        PhantomSpec spec = cfg.phantom.spec;
        spec.seed = split_seed(cfg.seed, "phantom", i);
        const PhantomSample sample = generate_phantom(spec);
        const std::string name = case_name(i);
        const fs::path dir = out / name;
        fs::create_directories(dir);
        write_vvol((dir / "image.vvol").string(), sample.volume, VvolDtype::kF32);
        write_vvol((dir / "wall.vvol").string(), sample.wall_labels, VvolDtype::kU8);
        write_vvol((dir / "vessel.vvol").string(), sample.vessel_labels, VvolDtype::kU8);
        std::size_t centerline_points = 0;
        for (const auto& line : sample.centerlines) centerline_points += line.size();
        json meta;
        meta["seed"] = spec.seed;
        meta["extents"] = spec.extents;
        meta["vessel_count"] = spec.vessel_count;
        meta["r_min"] = spec.r_min;
        meta["r_max"] = spec.r_max;
        meta["bifurcation_prob"] = spec.bifurcation_prob;
        meta["max_bend"] = spec.max_bend;
        meta["contrast"] = spec.contrast;
        meta["noise_sigma"] = spec.noise_sigma;
        meta["axis_aligned"] = spec.axis_aligned;
        meta["branches"] = sample.centerlines.size();
        meta["centerline_points"] = centerline_points;
        meta["wall_positives"] = count_positives(sample.wall_labels);
        meta["vessel_positives"] = count_positives(sample.vessel_labels);
        write_text(dir / "meta.json", meta.dump(2) + "\n");
        names.push_back(name);
    }
    write_manifest(out, names);
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    const fs::path out = cfg.out_dir;
    fs::create_directories(out);
    const NetworkSpec spec = spec_from_train_config(cfg);
    const auto samples = load_training_segments(cfg);

    Network net = build_network(spec, split_seed(cfg.seed, "init", 0));
    Sgd sgd(cfg.train.momentum);
    TrainOptions opts;
    opts.balanced = cfg.train.balanced;
    opts.lr_decimation_interval = cfg.train.lr_decimation_interval;
    opts.on_phase_end = [&](const CurriculumPhase& phase, std::int64_t) {
        save_checkpoint(net, (out / ("checkpoint_phase_" + phase.name + ".ckpt")).string());
    };

    if (!cfg.train.resume.empty()) {
        const fs::path prev = cfg.train.resume;
        adopt_checkpoint(net, load_checkpoint((prev / "checkpoint.ckpt").string()));
        if (fs::exists(prev / "state.ckpt")) load_velocities(net, sgd, prev / "state.ckpt");
        const fs::path ts = prev / "train_state.json";
        if (fs::exists(ts))
            opts.start_iteration = json::parse(read_text(ts)).at("next_iteration").get<std::int64_t>();
    }

    const auto phases = build_phases(cfg, spec);
    const CurriculumResult result = run_curriculum(net, samples, phases, cfg.seed, sgd, opts);

    write_loss_history_csv((out / "loss.csv").string(), result.history, spec.supervised_outputs);
    save_checkpoint(net, (out / "checkpoint.ckpt").string());
    write_text(out / "network.json", spec_to_json(spec) + "\n");
    save_velocities(net, sgd, out / "state.ckpt");
    json ts;
    ts["next_iteration"] = result.next_iteration;
    write_text(out / "train_state.json", ts.dump(2) + "\n");
    return 0;
}

int cmd_predict(const RunConfig& cfg) {
    if (cfg.predict.checkpoint.empty()) throw std::invalid_argument("predict requires --checkpoint");
    const fs::path ckpt = cfg.predict.checkpoint;
    const fs::path netjson =
        cfg.predict.network.empty() ? ckpt.parent_path() / "network.json" : fs::path(cfg.predict.network);
    const NetworkSpec spec = spec_from_json(read_text(netjson));
    Network net = build_network(spec, 0);
    adopt_checkpoint(net, load_checkpoint(ckpt.string()));

    const fs::path root = cfg.predict.dataset;
    const auto names = read_manifest(root);
    const fs::path out = cfg.out_dir;
    fs::create_directories(out);
    for (const std::string& name : names) {
        const VvolVolume vv = read_vvol((root / name / "image.vvol").string());
        const Tensor prob =
            predict_volume(net, vv.data, cfg.predict.segment_extents, cfg.predict.segment_overlap);
        fs::create_directories(out / name);
        write_vvol((out / name / "prob.vvol").string(), prob, VvolDtype::kF32, vv.spacing);
    }
    write_manifest(out, names);
    return 0;
}

int cmd_eval(const RunConfig& cfg) {
    const fs::path data = cfg.eval.dataset;
    const fs::path preds = cfg.eval.predictions;
    const auto names = read_manifest(data);
    if (names.empty()) throw std::runtime_error("evaluation dataset has no cases");

    std::vector<std::string> missing;
    for (const std::string& name : names)
        if (!fs::exists(preds / name / "prob.vvol"))
            missing.push_back((preds / name / "prob.vvol").string());
    if (!missing.empty()) {
        std::string msg = "missing prediction files:";
        for (const std::string& m : missing) msg += "\n  " + m;
        throw std::runtime_error(msg);
    }

    const auto thresholds = default_thresholds();
    const MatchAlgo algo = cfg.eval.greedy ? MatchAlgo::kGreedy : MatchAlgo::kAssignment;
    std::vector<PRCurve> curves;
    for (const std::string& name : names) {
        const Tensor prob = read_vvol((preds / name / "prob.vvol").string()).data;
        const Tensor wall = read_vvol((data / name / "wall.vvol").string()).data;
        const Tensor vessel = read_vvol((data / name / "vessel.vvol").string()).data;
        const Tensor mask = evaluation_mask(vessel, cfg.eval.mask_radius);
        const Shape5& s = wall.shape();
        const double md = cfg.eval.max_dist > 0.0 ? cfg.eval.max_dist
                                                  : default_max_dist({s.d, s.h, s.w});
        curves.push_back(pr_curve(prob, wall, mask, thresholds, md, algo));
    }
    const BenchmarkSummary summary = summarize(curves);

    const fs::path out = cfg.out_dir;
    fs::create_directories(out);
    write_benchmark_csv((out / "eval.csv").string(), names, curves, summary);
    write_pr_svg((out / "pr_curve.svg").string(), curves);
    json j;
    j["ods"] = summary.ods;
    j["ois"] = summary.ois;
    j["ap"] = summary.ap;
    j["ods_threshold"] = summary.ods_threshold;
    j["cases"] = names;
    j["per_volume_best_threshold"] = summary.per_volume_best_threshold;
    write_text(out / "summary.json", j.dump(2) + "\n");
    return 0;
}

}  // namespace i2i
