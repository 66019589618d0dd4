#ifndef EMREC_PIPELINE_HPP
#define EMREC_PIPELINE_HPP

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "emrec/config.hpp"
#include "emrec/csv.hpp"
#include "emrec/image_io.hpp"
#include "emrec/metrics.hpp"
#include "emrec/model_io.hpp"
#include "emrec/nlm_admm.hpp"
#include "emrec/recon.hpp"
#include "emrec/tv_pdhg.hpp"

namespace emrec {

namespace fs = std::filesystem;

inline void save_masks(const RegionMasks& masks, double true_ratio, const std::string& path) {
    nlohmann::json j;
    j["true_ratio"] = true_ratio;
    for (const auto& [label, voxels] : masks) j["masks"][label] = voxels;
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << j.dump(1) << '\n';
}

struct LoadedMasks {
    RegionMasks masks;
    double true_ratio = 0.0;
};

inline LoadedMasks load_masks(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad masks file: ") + e.what());
    }
    LoadedMasks out;
    out.true_ratio = j.value("true_ratio", 0.0);
    for (const auto& [label, voxels] : j.at("masks").items())
        out.masks[label] = voxels.get<std::vector<std::size_t>>();
    return out;
}

inline std::uint64_t file_checksum(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    return fnv1a64(bytes.data(), bytes.size());
}

/// Writes truth, masks, and measurement files for every configured scenario
/// plus a manifest listing each artifact with its seed and checksum.
inline void cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    nlohmann::json manifest;
    manifest["seed"] = cfg.seed;
    manifest["geometry"] = {{"n_x", cfg.geometry.n_x},       {"n_y", cfg.geometry.n_y},
                            {"voxel_size", cfg.geometry.voxel_size},
                            {"n_angles", cfg.geometry.n_angles},
                            {"n_bins", cfg.geometry.n_bins},
                            {"bin_width", cfg.geometry.bin_width}};

    for (const auto& [name, scenario] : cfg.scenarios) {
        Phantom phantom = make_phantom(scenario.phantom);
        SimulationResult sim = simulate_measurement(phantom.truth, cfg.geometry, scenario);

        double max_ratio = 1.0;
        for (const auto& r : scenario.phantom.regions)
            if (r.level_ratio > max_ratio) max_ratio = r.level_ratio;

        const std::string truth_file = name + "_truth.emr";
        const std::string masks_file = name + "_masks.json";
        save_image(sim.scaled_truth, (fs::path(out_dir) / truth_file).string());
        save_masks(phantom.masks, max_ratio, (fs::path(out_dir) / masks_file).string());

        nlohmann::json sj;
        sj["seed"] = scenario.seed;
        sj["total_net_trues"] = scenario.total_net_trues;
        sj["random_fraction"] = scenario.random_fraction;
        sj["true_ratio"] = max_ratio;
        sj["truth"] = truth_file;
        sj["masks"] = masks_file;
        for (int m = 0; m < scenario.n_realizations; ++m) {
            const std::string meas_file = name + "_meas_" + std::to_string(m) + ".emr";
            save_measurement(sim.realizations[m], (fs::path(out_dir) / meas_file).string());
            sj["measurements"].push_back(meas_file);
        }
        manifest["scenarios"][name] = std::move(sj);
    }
    // checksums over everything written so far
    for (auto& [name, sj] : manifest["scenarios"].items()) {
        auto add = [&](const std::string& f) {
            manifest["checksums"][f] = file_checksum((fs::path(out_dir) / f).string());
        };
        add(sj["truth"].get<std::string>());
        add(sj["masks"].get<std::string>());
        for (const auto& f : sj["measurements"]) add(f.get<std::string>());
    }
    std::ofstream os(fs::path(out_dir) / "manifest.json", std::ios::trunc);
    if (!os) throw IoError("cannot write manifest in " + out_dir);
    os << manifest.dump(1) << '\n';
}

struct TrainingData {
    Image truth;
    std::vector<Measurement> measurements;
};

inline TrainingData load_training_data(const std::string& manifest_path,
                                       const std::string& scenario) {
    std::ifstream is(manifest_path);
    if (!is) throw IoError("cannot open manifest: " + manifest_path);
    nlohmann::json manifest;
    try {
        is >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad manifest: ") + e.what());
    }
    const fs::path dir = fs::path(manifest_path).parent_path();
    if (!manifest.contains("scenarios") || !manifest["scenarios"].contains(scenario))
        throw IoError("manifest has no scenario '" + scenario + "'");
    const auto& sj = manifest["scenarios"][scenario];
    TrainingData data;
    data.truth = load_image((dir / sj.at("truth").get<std::string>()).string());
    for (const auto& f : sj.at("measurements"))
        data.measurements.push_back(load_measurement((dir / f.get<std::string>()).string()));
    if (data.measurements.empty()) throw IoError("scenario '" + scenario + "' has no measurements");
    return data;
}

/// Stage-wise training: each stage is fit on (current estimate, truth) pairs,
/// then every training sample advances by one outer iteration with the
/// freshly trained stage.
inline CidModel train_model(const ExperimentConfig& cfg, const TrainingData& data,
                            const std::string& loss_csv = "") {
    const Geometry& g = cfg.geometry;
    require_image_conforms(data.truth, g);
    Image sens = sensitivity(g);

    const std::size_t n_samples = data.measurements.size();
    std::vector<Image> estimates;
    for (const auto& m : data.measurements) {
        Image x = uniform_fov_start(g, sens);
        for (int n = 0; n < cfg.bcdnet.n_em_init; ++n) x = em_step(x, m, g, sens);
        estimates.push_back(std::move(x));
    }
    const Image truth_g1 = normalize_g1(data.truth);

    CidModel model;
    model.training_seed = cfg.denoiser.train.seed;
    std::vector<double> beta_prev(n_samples, 0.0);

    for (int stage = 0; stage < cfg.denoiser.stages; ++stage) {
        std::vector<TrainingPair> pairs;
        for (const auto& x : estimates) pairs.push_back({normalize_g1(x), truth_g1});

        CidStageParams init =
            init_stage(pairs.front().input, cfg.denoiser.filters, cfg.denoiser.filter_side,
                       derive_seed(cfg.denoiser.train.seed, "stage-init", stage));
        TrainConfig tc = cfg.denoiser.train;
        tc.seed = derive_seed(cfg.denoiser.train.seed, "stage-train", stage);
        LossCurve curve;
        CidStageParams trained = train_stage(std::move(init), pairs, tc, &curve);
        model.stages.push_back(trained);
        model.training_loss.push_back(std::move(curve));

        // advance every sample by one outer iteration with the new stage
        for (std::size_t l = 0; l < n_samples; ++l) {
            const Measurement& m = data.measurements[l];
            Image u = cid_forward(normalize_g1(estimates[l]), trained);
            for (double& v : u.values) v = std::max(v, 0.0);
            ScaleResult scaled = scale_g2(u, m, g);
            double beta;
            try {
                beta = adaptive_beta(estimates[l], scaled.scaled, m, g, sens, cfg.bcdnet.balance_c);
            } catch (const std::domain_error&) {
                beta = beta_prev[l] > 0.0 ? beta_prev[l] : 1e-12;
            }
            beta_prev[l] = beta;
            for (int inner = 0; inner < cfg.bcdnet.inner_iterations; ++inner)
                estimates[l] = map_em_step(estimates[l], scaled.scaled, beta, m, g, sens);
        }
    }

    if (!loss_csv.empty()) {
        CsvWriter csv(loss_csv);
        csv.row({"stage", "epoch", "loss"});
        for (std::size_t s = 0; s < model.training_loss.size(); ++s)
            for (std::size_t e = 0; e < model.training_loss[s].per_epoch.size(); ++e)
                csv.row({std::to_string(s + 1), std::to_string(e + 1),
                         csv_double(model.training_loss[s].per_epoch[e])});
    }
    return model;
}

struct ReconJob {
    Algorithm algorithm = Algorithm::em;
    std::optional<CidModel> model;
    std::optional<Image> truth;
    std::optional<LoadedMasks> masks;
};

inline std::pair<Image, ReconTrace> run_reconstruction(const ExperimentConfig& cfg,
                                                       const Measurement& m, const ReconJob& job) {
    const Geometry& g = cfg.geometry;
    switch (job.algorithm) {
        case Algorithm::em:
            return em_reconstruct(m, g, cfg.em_iterations);
        case Algorithm::bcdnet: {
            if (!job.model) throw ConfigError("bcdnet requires a model");
            ReconConfig rc = cfg.bcdnet;
            rc.algorithm = Algorithm::bcdnet;
            return bcd_net_reconstruct(m, g, *job.model, rc);
        }
        case Algorithm::tv_pdhg:
            return tv_pdhg_reconstruct(m, g, cfg.tv_pdhg);
        case Algorithm::nlm_admm:
            return nlm_admm_reconstruct(m, g, cfg.nlm_admm);
    }
    throw ConfigError("unknown algorithm");
}

/// Trace CSV: iteration, nll, beta, objective, rmse, cnr (blank when the
/// truth or masks needed for a column are not supplied).
inline void write_trace_csv(const ReconTrace& trace, const ReconJob& job,
                            const std::string& path) {
    CsvWriter csv(path);
    csv.row({"iteration", "nll", "beta", "objective", "rmse", "cnr"});
    for (std::size_t n = 0; n < trace.iterations.size(); ++n) {
        const auto& it = trace.iterations[n];
        std::string rmse_cell, cnr_cell;
        if (job.truth && job.masks) {
            const auto& masks = job.masks->masks;
            if (auto fov = masks.find("fov"); fov != masks.end())
                rmse_cell = csv_double(rmse(it.x, *job.truth, fov->second));
            MetricsReport rep = evaluate_image(it.x, *job.truth, masks, job.masks->true_ratio);
            cnr_cell = csv_optional(rep.cnr);
        }
        csv.row({std::to_string(n), csv_double(it.nll), csv_double(it.beta),
                 csv_double(it.objective), rmse_cell, cnr_cell});
    }
}

/// One metrics row per image; a final aggregate noise row when M >= 2.
inline void cmd_evaluate(const Image& truth, const LoadedMasks& lm,
                         const std::vector<std::pair<std::string, Image>>& images,
                         const std::string& out_csv, bool warn_missing_liver = true) {
    CsvWriter csv(out_csv);
    csv.row({"image", "cr_cold", "cr_hot", "rmse", "cnr", "fov_bias", "noise"});
    for (const auto& [name, img] : images) {
        MetricsReport rep = evaluate_image(img, truth, lm.masks, lm.true_ratio);
        csv.row({name, csv_optional(rep.cr_cold), csv_optional(rep.cr_hot),
                 csv_optional(rep.rmse), csv_optional(rep.cnr), csv_optional(rep.fov_bias), ""});
    }
    if (images.size() >= 2) {
        auto liver = lm.masks.find("background");
        if (liver == lm.masks.end()) {
            if (warn_missing_liver)
                std::cerr << "evaluate: no background/liver mask, noise omitted\n";
        } else {
            std::vector<Image> recons;
            for (const auto& [name, img] : images) recons.push_back(img);
            const double noise = noise_across_realizations(recons, truth, liver->second);
            csv.row({"(all realizations)", "", "", "", "", "", csv_double(noise)});
        }
    }
}

/// Runs the algorithm at each grid beta and reports final RMSE and CNR.
inline void cmd_sweep_beta(const ExperimentConfig& cfg, const Measurement& m, Algorithm alg,
                           const std::vector<double>& grid, const Image& truth,
                           const LoadedMasks& lm, const std::string& out_csv,
                           const std::optional<CidModel>& model = std::nullopt) {
    if (grid.empty()) throw ConfigError("sweep-beta: empty grid");
    if (alg == Algorithm::em) throw ConfigError("sweep-beta: em has no beta");
    if (alg == Algorithm::bcdnet && !model) throw ConfigError("sweep-beta: bcdnet needs a model");

    CsvWriter csv(out_csv);
    csv.row({"beta", "rmse", "cnr"});
    for (double beta : grid) {
        ExperimentConfig run = cfg;
        run.tv_pdhg.tv.beta = beta;
        run.nlm_admm.nlm.beta = beta;
        run.bcdnet.beta_fixed = beta;
        ReconJob job;
        job.algorithm = alg;
        job.model = model;
        auto [img, trace] = run_reconstruction(run, m, job);
        MetricsReport rep = evaluate_image(img, truth, lm.masks, lm.true_ratio);
        csv.row({csv_double(beta), csv_optional(rep.rmse), csv_optional(rep.cnr)});
    }
}

inline std::vector<double> default_beta_grid() {
    std::vector<double> grid;
    for (int e = -15; e <= 15; ++e) grid.push_back(std::ldexp(1.0, e));
    return grid;
}

} // namespace emrec

#endif
