#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "i2i/commands.hpp"

namespace {

void bind_extents(CLI::App* cmd, const char* flag, std::array<std::int64_t, 3>& target,
                  const char* help) {
    // A comma-joined default keeps the emitted config re-parseable; the
    // bracketed array CLI11 would capture does not survive a round trip.
    const std::string def = std::to_string(target[0]) + "," + std::to_string(target[1]) + "," +
                            std::to_string(target[2]);
    cmd->add_option(flag, target, help)->delimiter(',')->default_str(def);
}

void append_run_log(const std::filesystem::path& out, const std::string& command, int code) {
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    std::ofstream log(out / "run.log", std::ios::app);
    if (!log) return;
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    log << stamp << " " << command << " exit=" << code << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    i2i::RunConfig cfg;
    CLI::App app{"Volumetric boundary detection: phantoms, HED-3D / I2I-3D training, tiled "
                 "inference, and PR benchmarking"};
    app.set_config("--config", "", "Read options from a key = value config file");
    app.add_option("--seed", cfg.seed, "Master seed; all randomness derives from it")
        ->capture_default_str();
    app.add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
    app.add_option("--threads", cfg.threads, "Thread budget (kernels run serially; recorded)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.require_subcommand(1);

    CLI::App* ph = app.add_subcommand("phantom", "Generate a synthetic vascular dataset");
    ph->add_option("--count", cfg.phantom.count, "Number of cases")->capture_default_str();
    bind_extents(ph, "--extents", cfg.phantom.spec.extents, "Volume extents D,H,W");
    ph->add_option("--vessels", cfg.phantom.spec.vessel_count, "Root tubes per case")
        ->capture_default_str();
    ph->add_option("--r-min", cfg.phantom.spec.r_min, "Minimum tube radius")->capture_default_str();
    ph->add_option("--r-max", cfg.phantom.spec.r_max, "Maximum tube radius")->capture_default_str();
    ph->add_option("--bifurcation-prob", cfg.phantom.spec.bifurcation_prob,
                   "Branching probability per unit length")
        ->capture_default_str();
    ph->add_option("--max-bend", cfg.phantom.spec.max_bend, "Max bend, radians per unit length")
        ->capture_default_str();
    ph->add_option("--contrast", cfg.phantom.spec.contrast, "Vessel intensity")
        ->capture_default_str();
    ph->add_option("--noise-sigma", cfg.phantom.spec.noise_sigma, "Additive Gaussian noise sigma")
        ->capture_default_str();
    ph->add_flag("--axis-aligned", cfg.phantom.spec.axis_aligned,
                 "Snap root tube directions to volume axes");

    CLI::App* tr = app.add_subcommand("train", "Train a network on a phantom dataset");
    tr->add_option("--dataset", cfg.train.dataset, "Dataset directory")->required();
    tr->add_option("--variant", cfg.train.variant, "hed3d or i2i3d")->capture_default_str();
    tr->add_option("--width-multiplier", cfg.train.width_multiplier, "Channel width scale")
        ->capture_default_str();
    tr->add_option("--outputs", cfg.train.supervised_outputs, "Supervised output count M")
        ->capture_default_str();
    tr->add_flag("--hed-supervise-upsampled", cfg.train.hed_supervise_upsampled,
                 "HED-3D: supervise side outputs at input resolution");
    tr->add_flag("--balanced", cfg.train.balanced, "Class-balanced loss weights");
    tr->add_option("--momentum", cfg.train.momentum, "SGD momentum")->capture_default_str();
    tr->add_option("--lr-interval", cfg.train.lr_decimation_interval,
                   "Iterations between tenfold learning-rate drops")
        ->capture_default_str();
    bind_extents(tr, "--segment", cfg.train.segment_extents, "Training segment extents D,H,W");
    bind_extents(tr, "--overlap", cfg.train.segment_overlap, "Segment overlap D,H,W");
    tr->add_option("--min-positive-fraction", cfg.train.min_positive_fraction,
                   "Keep segments whose positive fraction exceeds this")
        ->capture_default_str();
    tr->add_option("--resume", cfg.train.resume, "Previous run directory to continue from");
    tr->add_option("--iters-a", cfg.train.phase_a.iterations, "Phase A iteration budget")
        ->capture_default_str();
    tr->add_option("--iters-b", cfg.train.phase_b.iterations, "Phase B iteration budget")
        ->capture_default_str();
    tr->add_option("--iters-c", cfg.train.phase_c.iterations, "Phase C iteration budget")
        ->capture_default_str();
    tr->add_option("--lr-a", cfg.train.phase_a.base_lr, "Phase A base learning rate")
        ->capture_default_str();
    tr->add_option("--lr-b", cfg.train.phase_b.base_lr, "Phase B base learning rate")
        ->capture_default_str();
    tr->add_option("--lr-c", cfg.train.phase_c.base_lr, "Phase C base learning rate")
        ->capture_default_str();
    tr->add_option("--f2c-mult-a", cfg.train.phase_a.f2c_multiplier,
                   "Phase A fine-to-coarse lr multiplier")
        ->capture_default_str();
    tr->add_option("--f2c-mult-b", cfg.train.phase_b.f2c_multiplier,
                   "Phase B fine-to-coarse lr multiplier")
        ->capture_default_str();
    tr->add_option("--f2c-mult-c", cfg.train.phase_c.f2c_multiplier,
                   "Phase C fine-to-coarse lr multiplier")
        ->capture_default_str();
    tr->add_option("--plateau-window-b", cfg.train.phase_b.plateau_window,
                   "Phase B plateau window (0 disables)")
        ->capture_default_str();
    tr->add_option("--plateau-tol-b", cfg.train.phase_b.plateau_tol,
                   "Phase B plateau relative-improvement tolerance")
        ->capture_default_str();

    CLI::App* pr = app.add_subcommand("predict", "Tiled inference over a dataset");
    pr->add_option("--dataset", cfg.predict.dataset, "Dataset directory")->required();
    pr->add_option("--checkpoint", cfg.predict.checkpoint, "Checkpoint file")->required();
    pr->add_option("--network", cfg.predict.network,
                   "Network spec JSON (default: network.json next to the checkpoint)");
    bind_extents(pr, "--segment", cfg.predict.segment_extents, "Inference segment extents D,H,W");
    bind_extents(pr, "--overlap", cfg.predict.segment_overlap, "Segment overlap D,H,W");

    CLI::App* ev = app.add_subcommand("eval", "Benchmark predictions against ground truth");
    ev->add_option("--dataset", cfg.eval.dataset, "Ground-truth dataset directory")->required();
    ev->add_option("--predictions", cfg.eval.predictions, "Directory of prob.vvol outputs")
        ->required();
    ev->add_option("--mask-radius", cfg.eval.mask_radius,
                   "Evaluation mask radius around vessels, voxels")
        ->capture_default_str();
    ev->add_option("--max-dist", cfg.eval.max_dist,
                   "Matching tolerance, voxels (0: 0.0075 x volume diagonal)")
        ->capture_default_str();
    ev->add_flag("--greedy", cfg.eval.greedy, "Nearest-first matching instead of assignment");

    CLI11_PARSE(app, argc, argv);

    const CLI::App* chosen = app.get_subcommands().front();
    const std::string command = chosen->get_name();
    int code = 1;
    try {
        std::filesystem::create_directories(cfg.out_dir);
        std::ofstream resolved(std::filesystem::path(cfg.out_dir) / "config.ini",
                               std::ios::trunc);
        resolved << app.config_to_str(true, true);
        resolved.close();

        if (command == "phantom")
            code = i2i::cmd_phantom(cfg);
        else if (command == "train")
            code = i2i::cmd_train(cfg);
        else if (command == "predict")
            code = i2i::cmd_predict(cfg);
        else
            code = i2i::cmd_eval(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        code = 1;
    }
    append_run_log(cfg.out_dir, command, code);
    return code;
}
