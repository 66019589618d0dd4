#ifndef EMREC_CONFIG_HPP
#define EMREC_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "emrec/denoiser.hpp"
#include "emrec/phantom.hpp"
#include "emrec/recon.hpp"
#include "emrec/simulate.hpp"

namespace emrec {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DenoiserConfig {
    int stages = 30;      // T
    int filters = 78;     // K
    int filter_side = 3;  // square support
    TrainConfig train;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    Geometry geometry;
    std::map<std::string, ScenarioSpec> scenarios; // keyed by name, e.g. train/test
    DenoiserConfig denoiser;
    int em_iterations = 40;
    ReconConfig bcdnet;
    ReconConfig tv_pdhg;
    ReconConfig nlm_admm;
};

namespace detail {

using nlohmann::json;

inline Ellipse parse_ellipse(const json& j) {
    Ellipse e;
    const auto& c = j.at("center");
    const auto& a = j.at("axes");
    e.cx = c.at(0).get<double>();
    e.cy = c.at(1).get<double>();
    e.rx = a.at(0).get<double>();
    e.ry = a.at(1).get<double>();
    return e;
}

inline PhantomSpec parse_phantom(const json& j, const Geometry& g) {
    PhantomSpec p;
    p.geometry = g;
    const auto& bg = j.at("background");
    p.background = parse_ellipse(bg);
    p.background_level = bg.value("level", 1.0);
    if (j.contains("regions")) {
        for (const auto& r : j.at("regions")) {
            PhantomRegion region;
            region.shape = parse_ellipse(r);
            region.level_ratio = r.at("ratio").get<double>();
            region.label = r.at("label").get<std::string>();
            p.regions.push_back(std::move(region));
        }
    }
    return p;
}

inline ScenarioSpec parse_scenario(const json& j, const Geometry& g) {
    ScenarioSpec s;
    s.phantom = parse_phantom(j.at("phantom"), g);
    s.total_net_trues = j.at("total_net_trues").get<double>();
    s.random_fraction = j.at("random_fraction").get<double>();
    s.n_realizations = j.value("realizations", 1);
    return s;
}

inline void parse_recon_common(const json& j, ReconConfig& r) {
    r.outer_iterations = j.value("outer_iterations", r.outer_iterations);
    r.inner_iterations = j.value("inner_iterations", r.inner_iterations);
    r.balance_c = j.value("c", r.balance_c);
    r.n_em_init = j.value("em_init", r.n_em_init);
    if (j.contains("beta_fixed")) r.beta_fixed = j.at("beta_fixed").get<double>();
}

} // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    try {
        ExperimentConfig cfg;
        cfg.seed = j.value("seed", std::uint64_t{0});

        const auto& gj = j.at("geometry");
        cfg.geometry.n_x = gj.at("n_x").get<int>();
        cfg.geometry.n_y = gj.at("n_y").get<int>();
        cfg.geometry.voxel_size = gj.value("voxel_size", 1.0);
        cfg.geometry.n_angles = gj.at("n_angles").get<int>();
        cfg.geometry.n_bins = gj.at("n_bins").get<int>();
        cfg.geometry.bin_width = gj.value("bin_width", 1.0);
        cfg.geometry.validate();

        for (const auto& [name, sj] : j.at("scenarios").items()) {
            ScenarioSpec s = detail::parse_scenario(sj, cfg.geometry);
            s.seed = derive_seed(cfg.seed, "scenario:" + name);
            s.phantom.seed = s.seed;
            cfg.scenarios.emplace(name, std::move(s));
        }

        if (j.contains("denoiser")) {
            const auto& dj = j.at("denoiser");
            cfg.denoiser.stages = dj.value("stages", cfg.denoiser.stages);
            cfg.denoiser.filters = dj.value("filters", cfg.denoiser.filters);
            cfg.denoiser.filter_side = dj.value("filter_size", cfg.denoiser.filter_side);
            if (dj.contains("train")) {
                const auto& tj = dj.at("train");
                cfg.denoiser.train.epochs = tj.value("epochs", cfg.denoiser.train.epochs);
                cfg.denoiser.train.learning_rate =
                    tj.value("learning_rate", cfg.denoiser.train.learning_rate);
                cfg.denoiser.train.lr_decay = tj.value("lr_decay", cfg.denoiser.train.lr_decay);
                cfg.denoiser.train.batch_size = tj.value("batch_size", cfg.denoiser.train.batch_size);
                const std::string loss = tj.value("loss", std::string("l2"));
                if (loss == "l2") cfg.denoiser.train.loss = TrainLoss::l2;
                else if (loss == "l1") cfg.denoiser.train.loss = TrainLoss::l1;
                else throw ConfigError("denoiser.train.loss must be l2 or l1");
            }
        }
        cfg.denoiser.train.seed = derive_seed(cfg.seed, "train");

        cfg.bcdnet.algorithm = Algorithm::bcdnet;
        cfg.tv_pdhg.algorithm = Algorithm::tv_pdhg;
        cfg.nlm_admm.algorithm = Algorithm::nlm_admm;
        if (j.contains("recon")) {
            const auto& rj = j.at("recon");
            if (rj.contains("em")) cfg.em_iterations = rj.at("em").value("iterations", 40);
            if (rj.contains("bcdnet")) detail::parse_recon_common(rj.at("bcdnet"), cfg.bcdnet);
            if (rj.contains("tv_pdhg")) {
                const auto& tj = rj.at("tv_pdhg");
                detail::parse_recon_common(tj, cfg.tv_pdhg);
                cfg.tv_pdhg.tv.beta = tj.value("beta", cfg.tv_pdhg.tv.beta);
                if (tj.contains("sigma")) cfg.tv_pdhg.tv.sigma = tj.at("sigma").get<double>();
                if (tj.contains("tau")) cfg.tv_pdhg.tv.tau = tj.at("tau").get<double>();
            }
            if (rj.contains("nlm_admm")) {
                const auto& nj = rj.at("nlm_admm");
                detail::parse_recon_common(nj, cfg.nlm_admm);
                cfg.nlm_admm.nlm.beta = nj.value("beta", cfg.nlm_admm.nlm.beta);
                cfg.nlm_admm.nlm.sigma_f = nj.value("sigma_f", cfg.nlm_admm.nlm.sigma_f);
                cfg.nlm_admm.nlm.patch_side = nj.value("patch_side", cfg.nlm_admm.nlm.patch_side);
                cfg.nlm_admm.nlm.search_side = nj.value("search_side", cfg.nlm_admm.nlm.search_side);
                cfg.nlm_admm.nlm.v_steps = nj.value("v_steps", cfg.nlm_admm.nlm.v_steps);
                cfg.nlm_admm.nlm.rho0 = nj.value("rho0", cfg.nlm_admm.nlm.rho0);
            }
        }
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return parse_config(j);
}

} // namespace emrec

#endif
