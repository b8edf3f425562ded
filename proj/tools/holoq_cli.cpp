// holoq command line front end
//
// exit status: 0 success, 1 computation error (or failed verification), 2 config error

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "holoq/cli/experiment.hpp"

namespace {

namespace fs = std::filesystem;
using holoq::cli::json;

constexpr int exit_ok = 0;
constexpr int exit_compute = 1;
constexpr int exit_config = 2;

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw holoq::error("cannot write '" + p.string() + "'");
    out << content;
    if (!out) throw holoq::error("write failed for '" + p.string() + "'");
}

std::vector<std::string> split_formats(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ','))
        if (!part.empty()) out.push_back(part);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"holoq: geometric phases of open quantum systems"};
    app.require_subcommand(1);

    std::string config_file, out_dir, formats;
    std::vector<std::string> overrides;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_file, "JSON experiment config");
        sub->add_option("--set", overrides, "override a config entry, key=value (dotted keys)")->take_all();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--formats", formats, "comma separated subset of csv,json,svg");
    };
    auto* phase = app.add_subcommand("phase", "geometric phase sweep over channels and beta");
    auto* crossover = app.add_subcommand("crossover", "crossover times and max ratio over a T grid");
    auto* verify = app.add_subcommand("verify", "run the invariant checks and report pass/fail as JSON");
    for (auto* sub : {phase, crossover, verify}) add_common(sub);
    overrides.clear();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    holoq::cli::ExperimentConfig cfg;
    try {
        json given = config_file.empty() ? json::object() : holoq::cli::load_config_file(config_file);
        for (const auto& o : overrides) holoq::cli::apply_override(given, o);
        if (!out_dir.empty()) holoq::cli::apply_override(given, "output.dir=" + json(out_dir).dump());
        if (!formats.empty()) holoq::cli::apply_override(given, "output.formats=" + json(split_formats(formats)).dump());
        cfg = holoq::cli::parse_config(given);
        cfg.threads = holoq::cli::threads_from_env();
    } catch (const holoq::config_error& e) {
        std::cerr << "holoq: config error: " << e.what() << "\n";
        return exit_config;
    }

    try {
        const fs::path dir(cfg.output_dir);
        fs::create_directories(dir);

        if (phase->parsed()) {
            const auto rows = holoq::cli::run_phase(cfg);
            if (cfg.wants("csv")) {
                std::ostringstream os;
                holoq::cli::write_phase_csv(os, rows);
                write_file(dir / "phase.csv", os.str());
            }
            if (cfg.wants("json")) write_file(dir / "phase.json", holoq::cli::phase_json(rows).dump(2) + "\n");
            if (cfg.wants("svg")) write_file(dir / "phase.svg", holoq::cli::phase_svg(rows));
            std::cerr << "holoq: " << rows.size() << " phase rows written to " << dir.string() << "\n";
            return exit_ok;
        }
        if (crossover->parsed()) {
            const auto runs = holoq::cli::run_crossover(cfg);
            if (cfg.wants("csv")) {
                std::ostringstream os;
                holoq::cli::write_crossover_csv(os, runs);
                write_file(dir / "crossover.csv", os.str());
            }
            if (cfg.wants("json")) write_file(dir / "crossover.json", holoq::cli::crossover_json(runs).dump(2) + "\n");
            if (cfg.wants("svg")) write_file(dir / "crossover.svg", holoq::cli::crossover_svg(runs));
            std::cerr << "holoq: crossover curves for " << runs.size() << " field values written to " << dir.string()
                      << "\n";
            return exit_ok;
        }
        const auto checks = holoq::cli::run_verify(cfg);
        const json report = holoq::cli::verify_json(checks);
        write_file(dir / "verify.json", report.dump(2) + "\n");
        std::cout << report.dump(2) << "\n";
        return report["passed"].get<bool>() ? exit_ok : exit_compute;
    } catch (const holoq::config_error& e) {
        std::cerr << "holoq: config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "holoq: computation failed: " << e.what() << "\n";
        return exit_compute;
    }
}
