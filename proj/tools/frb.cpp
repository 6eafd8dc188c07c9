#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "frb/expcli.hpp"

using namespace frb;
using frb::exp::json;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> threads;
};

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, path + ": " + e.what());
    }
}

int run(const std::string& command, const Options& opt) {
    json j = read_json(opt.config);
    const bool replay = command == "replay";
    if (j.is_object() && j.contains("schema") && j.contains("config")) {
        if (!replay) std::cerr << "note: reading the config echo of a manifest\n";
        j = j.at("config");
    } else if (replay) {
        throw Error(ErrorKind::Config, "replay expects a manifest.json written by a previous run");
    }
    if (opt.seed) j["seed"] = *opt.seed;
    if (opt.out) j["output_dir"] = *opt.out;
    if (opt.threads) j["threads"] = *opt.threads;
    const auto cfg = exp::config_from_json(j);
    if (!replay && exp::to_string(cfg.experiment) != command)
        throw Error(ErrorKind::Config, "config is for experiment '" + exp::to_string(cfg.experiment) + "', not '" + command + "'");
    const auto summary = exp::run_experiment(cfg);
    std::cout << summary.dump(2) << "\nmanifest: " << cfg.output_dir << "/manifest.json\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fractional Burgers experiments"};
    app.require_subcommand(1);
    Options opt;
    std::string chosen;
    for (const char* name : {"covariance", "regularity", "simulate", "energy", "convergence", "paracontrolled",
                             "admissible_scan", "replay"}) {
        auto* sub = app.add_subcommand(name, std::string(name) == std::string("replay")
                                                 ? "rerun from a manifest.json"
                                                 : std::string("run the ") + name + " experiment");
        sub->add_option("--config", opt.config, "JSON config (or manifest) file")->required();
        if (std::string(name) != "replay") sub->add_option("--seed", opt.seed, "override the master seed");
        sub->add_option("--out", opt.out, "override output_dir");
        sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
        sub->callback([&chosen, name] { chosen = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_code_for(ErrorKind::Config);
    }
    try {
        return run(chosen, opt);
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
