// Command-line front end: model analysis over an N-grid, or the verification suite.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "metastab/metastab.hpp"

namespace {

enum Exit { kOk = 0, kVerifyFailed = 1, kConfigError = 2, kResourceLimit = 3 };

std::vector<int> parse_grid(const std::string& text) {
    std::vector<int> grid;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            grid.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw metastab::Error(metastab::Errc::ConfigInvalid, "bad --n-grid entry '" + item + "'");
        }
    }
    return grid;
}

int exit_code_for(const metastab::Error& e) {
    switch (e.code()) {
        case metastab::Errc::ConfigInvalid:
        case metastab::Errc::ParseError:
        case metastab::Errc::SpecInvalid:
        case metastab::Errc::OverlappingNeighborhoods:
        case metastab::Errc::HVanishesOffZeros:
        case metastab::Errc::PartitionInvalid:
        case metastab::Errc::StateNotFound:
            return kConfigError;
        case metastab::Errc::StateSpaceTooLarge:
            return kResourceLimit;
        default:
            return kVerifyFailed;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-N metastability diagnostics for Markov chains"};
    std::string config_path, model, grid, out;
    int kappa = 0, ell = 0;
    long long replicas = 0, max_states = 0;
    double alpha = 0.0, beta = 0.0, horizon = 0.0;
    std::uint64_t seed = 0;
    bool verify = false;

    app.add_option("--config", config_path, "JSON experiment configuration")->check(CLI::ExistingFile);
    app.add_option("--model", model, "zr or bd")->check(CLI::IsMember({"zr", "bd"}));
    app.add_option("--kappa", kappa, "number of sites (zero-range)");
    app.add_option("--alpha", alpha, "exponent alpha > 1");
    app.add_option("--n-grid", grid, "comma-separated ascending N values");
    auto* beta_opt = app.add_option("--beta", beta, "well radius exponent: ell = ceil(N^beta)");
    auto* ell_opt = app.add_option("--ell", ell, "fixed well radius");
    beta_opt->excludes(ell_opt);
    app.add_option("--horizon", horizon, "simulation horizon on the analysis clock");
    app.add_option("--replicas", replicas, "independent Monte Carlo replicas");
    app.add_option("--seed", seed, "base seed for all randomness");
    app.add_option("--out", out, "output directory");
    app.add_flag("--verify", verify, "run the randomized verification suite");
    app.add_option("--max-states", max_states, "state-space limit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (verify) {
            metastab::VerifyOptions opt;
            if (app.count("--seed")) opt.seed = seed;
            opt.out_dir = out.empty() ? "verify_out" : out;
            const auto report = metastab::verify_suite(opt);
            for (const auto& s : report.suites) {
                std::cout << (s.passed() ? "[PASS] " : "[FAIL] ") << s.name << "  worst=" << s.worst
                          << "  tol=" << s.tolerance << "  checks=" << s.checks;
                if (!s.passed()) std::cout << "  first failure: " << s.first_failure;
                std::cout << '\n';
            }
            if (report.reproducer_path) std::cout << "reproducer written to " << *report.reproducer_path << '\n';
            return report.passed() ? kOk : kVerifyFailed;
        }

        nlohmann::json cfg = nlohmann::json::object();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            try {
                in >> cfg;
            } catch (const nlohmann::json::exception& e) {
                throw metastab::Error(metastab::Errc::ConfigInvalid, std::string("invalid JSON: ") + e.what());
            }
            // chain files are looked up next to the config
            if (cfg.is_object() && cfg.contains("chain_file") && cfg["chain_file"].is_string()) {
                const std::filesystem::path p = cfg["chain_file"].get<std::string>();
                if (p.is_relative()) {
                    cfg["chain_file"] = (std::filesystem::path(config_path).parent_path() / p).string();
                }
            }
        }
        if (app.count("--model")) cfg["model"] = model;
        if (app.count("--kappa")) cfg["kappa"] = kappa;
        if (app.count("--alpha")) cfg["alpha"] = alpha;
        if (app.count("--n-grid")) cfg["n_grid"] = parse_grid(grid);
        if (app.count("--beta")) {
            cfg["beta"] = beta;
            cfg.erase("ell");
        }
        if (app.count("--ell")) {
            cfg["ell"] = ell;
            cfg.erase("beta");
        }
        if (app.count("--horizon")) cfg["horizon"] = horizon;
        if (app.count("--replicas")) cfg["replicas"] = replicas;
        if (app.count("--seed")) cfg["seed"] = seed;
        if (app.count("--out")) cfg["out"] = out;
        if (app.count("--max-states")) cfg["max_states"] = max_states;

        const auto config = metastab::config_from_json(cfg);
        const auto bundle = metastab::run_experiment(config);
        metastab::write_bundle(bundle, config.out);
        std::cout << "wrote " << config.out << "/{report.json, rates.csv, conditions.csv, occupation.csv, provenance.json}\n";
        return kOk;
    } catch (const metastab::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kVerifyFailed;
    }
}
