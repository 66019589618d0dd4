// Command-line front end: simulate -> train -> reconstruct -> evaluate ->
// sweep-beta. Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emrec/emrec.hpp"

namespace {

int g_verbosity = [] {
    const char* env = std::getenv("EMREC_LOG");
    return env ? std::atoi(env) : 0;
}();

void log_info(const std::string& msg) {
    if (g_verbosity > 0) std::cerr << "[emrec] " << msg << '\n';
}

emrec::ExperimentConfig load_config_with_seed(const std::string& path,
                                              const std::optional<std::uint64_t>& seed) {
    emrec::ExperimentConfig cfg = emrec::load_config(path);
    if (seed) {
        // re-derive all per-purpose seeds from the override
        std::ifstream is(path);
        nlohmann::json j;
        is >> j;
        j["seed"] = *seed;
        cfg = emrec::parse_config(j);
    }
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantitative emission-tomography reconstruction toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path, manifest_path, measurement_path, model_path;
    std::string algorithm = "em";
    std::string truth_path, masks_path;
    std::vector<std::string> image_paths;
    std::vector<double> beta_grid;
    std::optional<std::uint64_t> seed;
    std::string scenario = "train";

    auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
        if (needs_config)
            cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
        cmd->add_option("--seed", seed, "override the config's global seed");
        cmd->add_option("--out", out_path, "output directory or file")->required();
    };

    auto* sim = app.add_subcommand("simulate", "generate phantoms and Poisson measurements");
    add_common(sim);

    auto* train = app.add_subcommand("train", "stage-wise denoiser training");
    add_common(train);
    train->add_option("--manifest", manifest_path, "simulation manifest")->required();
    train->add_option("--scenario", scenario, "manifest scenario to train on");

    auto* recon = app.add_subcommand("reconstruct", "run one reconstruction");
    add_common(recon);
    recon->add_option("--measurement", measurement_path, "measurement file")->required();
    recon->add_option("--algorithm", algorithm, "em | bcdnet | tv_pdhg | nlm_admm");
    recon->add_option("--model", model_path, "trained model (required for bcdnet)");
    recon->add_option("--truth", truth_path, "truth image for trace metrics");
    recon->add_option("--masks", masks_path, "region masks for trace metrics");

    auto* eval = app.add_subcommand("evaluate", "compute metrics for reconstructed images");
    eval->add_option("--config", config_path, "unused; accepted for interface uniformity");
    eval->add_option("--seed", seed, "unused; accepted for interface uniformity");
    eval->add_option("--out", out_path, "output CSV")->required();
    eval->add_option("--truth", truth_path, "truth image")->required();
    eval->add_option("--masks", masks_path, "region masks")->required();
    eval->add_option("images", image_paths, "reconstructed images")->required();

    auto* sweep = app.add_subcommand("sweep-beta", "grid sweep of the regularization weight");
    add_common(sweep);
    sweep->add_option("--measurement", measurement_path, "measurement file")->required();
    sweep->add_option("--algorithm", algorithm, "tv_pdhg | nlm_admm | bcdnet (fixed beta)");
    sweep->add_option("--model", model_path, "trained model (bcdnet only)");
    sweep->add_option("--truth", truth_path, "truth image")->required();
    sweep->add_option("--masks", masks_path, "region masks")->required();
    sweep->add_option("--grid", beta_grid, "comma-separated beta values (default: 2^-15 .. 2^15)")
        ->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 2 : 0;
    }

    try {
        if (sim->parsed()) {
            auto cfg = load_config_with_seed(config_path, seed);
            log_info("simulating into " + out_path);
            emrec::cmd_simulate(cfg, out_path);
        } else if (train->parsed()) {
            auto cfg = load_config_with_seed(config_path, seed);
            auto data = emrec::load_training_data(manifest_path, scenario);
            log_info("training " + std::to_string(cfg.denoiser.stages) + " stages");
            const auto loss_csv =
                (std::filesystem::path(out_path).parent_path() / "training_loss.csv").string();
            emrec::CidModel model = emrec::train_model(cfg, data, loss_csv);
            emrec::save_model(model, out_path);
        } else if (recon->parsed()) {
            auto cfg = load_config_with_seed(config_path, seed);
            emrec::Measurement m = emrec::load_measurement(measurement_path);
            emrec::ReconJob job;
            job.algorithm = emrec::parse_algorithm(algorithm);
            if (job.algorithm == emrec::Algorithm::bcdnet) {
                if (model_path.empty())
                    throw emrec::ConfigError("reconstruct: bcdnet requires --model");
                job.model = emrec::load_model(model_path);
            }
            if (!truth_path.empty()) job.truth = emrec::load_image(truth_path);
            if (!masks_path.empty()) job.masks = emrec::load_masks(masks_path);
            std::filesystem::create_directories(out_path);
            auto [img, trace] = emrec::run_reconstruction(cfg, m, job);
            const auto dir = std::filesystem::path(out_path);
            emrec::save_image(img, (dir / ("recon_" + algorithm + ".emr")).string());
            emrec::write_trace_csv(trace, job, (dir / ("trace_" + algorithm + ".csv")).string());
        } else if (eval->parsed()) {
            emrec::Image truth = emrec::load_image(truth_path);
            emrec::LoadedMasks lm = emrec::load_masks(masks_path);
            std::vector<std::pair<std::string, emrec::Image>> images;
            for (const auto& p : image_paths) images.emplace_back(p, emrec::load_image(p));
            emrec::cmd_evaluate(truth, lm, images, out_path);
        } else if (sweep->parsed()) {
            auto cfg = load_config_with_seed(config_path, seed);
            emrec::Measurement m = emrec::load_measurement(measurement_path);
            emrec::Algorithm alg = emrec::parse_algorithm(algorithm);
            std::optional<emrec::CidModel> model;
            if (!model_path.empty()) model = emrec::load_model(model_path);
            emrec::Image truth = emrec::load_image(truth_path);
            emrec::LoadedMasks lm = emrec::load_masks(masks_path);
            if (beta_grid.empty()) beta_grid = emrec::default_beta_grid();
            emrec::cmd_sweep_beta(cfg, m, alg, beta_grid, truth, lm, out_path, model);
        }
    } catch (const emrec::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
