#include <exception>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "phasefield/errors.hpp"
#include "phasefield/io.hpp"

namespace {

// remaining() tokens come as --key value or --key=value; keys may be dotted
// (init.seed) to reach nested config fields.
std::vector<std::pair<std::string, std::string>> pair_overrides(
    const std::vector<std::string>& extras) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& token = extras[i];
        if (token.rfind("--", 0) != 0 || token.size() <= 2)
            throw phasefield::ConfigError(
                token, "expected an override of the form --key value");
        const std::string body = token.substr(2);
        const auto eq = body.find('=');
        if (eq != std::string::npos) {
            pairs.emplace_back(body.substr(0, eq), body.substr(eq + 1));
        } else {
            if (i + 1 >= extras.size())
                throw phasefield::ConfigError(body, "missing override value");
            pairs.emplace_back(body, extras[++i]);
        }
    }
    return pairs;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Stabilized semi-implicit Fourier-spectral solver for the "
        "Cahn-Hilliard and slope-selection thin-film equations"};
    app.require_subcommand(1);

    std::string config_path;
    CLI::App* run = app.add_subcommand(
        "run", "march one configured run; writes energy.csv, params.json, and "
               "optional snapshots");
    CLI::App* converge = app.add_subcommand(
        "converge", "temporal or spatial self-convergence study; writes "
                    "converge.csv");
    CLI::App* scan = app.add_subcommand(
        "stability-scan",
        "grid of (tau, stabilization) runs checked for energy decay; writes "
        "scan.csv");
    for (CLI::App* sub : {run, converge, scan}) {
        sub->add_option("config", config_path, "JSON config file")->required();
        sub->allow_extras();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    using namespace phasefield;
    try {
        CLI::App* active = app.get_subcommands().front();
        std::string text;
        try {
            text = read_text_file(config_path);
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        }
        for (const auto& [key, value] : pair_overrides(active->remaining()))
            text = apply_override(text, key, value);
        if (active == run) return cmd_run(parse_run_config(text));
        if (active == converge) return cmd_converge(parse_converge_config(text));
        return cmd_stability_scan(parse_scan_config(text));
    } catch (const DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const GridError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
