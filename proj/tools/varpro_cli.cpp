#include "varpro/run.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

void append_csv(const std::string& path, const std::vector<std::string>& rows) {
    bool need_header = true;
    {
        std::ifstream probe(path);
        if (probe.good() && probe.peek() != std::ifstream::traits_type::eof()) need_header = false;
    }
    std::ofstream out(path, std::ios::app);
    varpro::require(out.good(), "cannot open output file '" + path + "'");
    if (need_header) out << varpro::csv_header() << "\n";
    for (const auto& row : rows) out << row << "\n";
}

void print_summary(const varpro::SolveReport& rep, bool quiet) {
    if (quiet) return;
    const auto& c = rep.config;
    std::cout << c.problem << " (" << varpro::to_string(c.method) << ", M=" << c.last_hidden()
              << ", Q1=" << c.q1 << ", " << varpro::to_string(c.activation)
              << ", seed=" << c.seed << ")\n"
              << "  max_err=" << rep.errors.max_error << "  rms_err=" << rep.errors.rms_error
              << "  cost=" << rep.cost << "\n"
              << "  gn_iters=" << rep.gn_iterations << "  newton_iters=" << rep.newton_iterations
              << "  subiters=" << rep.subiterations << "  wall=" << rep.wall_seconds << "s\n";
    if (!rep.success) std::cout << "  SOLVE FAILED (non-finite abort)\n";
    if (!rep.newton_converged) std::cout << "  warning: newton iteration did not converge\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variable-projection collocation solver for PDE benchmarks"};
    app.require_subcommand(1);

    std::string config_path, out_path, report_path;
    std::string csv_a, csv_b;
    std::int64_t seed_flag = -1;
    bool quiet = false;

    auto* solve = app.add_subcommand("solve", "run one configuration");
    solve->add_option("config", config_path, "config file")->required();
    solve->add_option("--out", out_path, "append the result row to this CSV");
    solve->add_option("--report", report_path, "write a full-precision JSON report");
    solve->add_option("--seed", seed_flag, "override the config seed");
    solve->add_flag("--quiet", quiet, "suppress the summary");

    auto* sweep = app.add_subcommand("sweep", "run a one-axis sweep");
    sweep->add_option("config", config_path, "config file with a {...} sweep list")->required();
    sweep->add_option("--out", out_path, "write the CSV table here (default: stdout)");
    sweep->add_option("--seed", seed_flag, "override the config seed(s)");
    sweep->add_flag("--quiet", quiet, "suppress per-run summaries");

    auto* compare = app.add_subcommand("compare", "join two result CSVs and compare rms errors");
    compare->add_option("csv_a", csv_a, "first table (numerator)")->required();
    compare->add_option("csv_b", csv_b, "second table (denominator)")->required();
    compare->add_option("--out", out_path, "write the summary here (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        std::optional<std::uint64_t> seed_override;
        if (seed_flag >= 0) seed_override = static_cast<std::uint64_t>(seed_flag);

        if (solve->parsed()) {
            const auto runs = varpro::expand_runs(varpro::parse_config_file(config_path),
                                                  seed_override);
            varpro::require(runs.size() == 1,
                            "config contains sweep lists; use the sweep subcommand");
            const auto rep = varpro::run_single(runs.front());
            print_summary(rep, quiet);
            if (!out_path.empty()) append_csv(out_path, {varpro::csv_row(rep)});
            if (!report_path.empty()) {
                std::ofstream rout(report_path);
                varpro::require(rout.good(), "cannot open report file '" + report_path + "'");
                rout << varpro::report_json(rep) << "\n";
            }
            return rep.success ? 0 : 1;
        }

        if (sweep->parsed()) {
            const auto runs = varpro::expand_runs(varpro::parse_config_file(config_path),
                                                  seed_override);
            std::vector<std::string> rows;
            bool all_ok = true;
            for (const auto& cfg : runs) {
                const auto rep = varpro::run_single(cfg);
                print_summary(rep, quiet);
                rows.push_back(varpro::csv_row(rep));
                all_ok = all_ok && rep.success;
            }
            if (out_path.empty()) {
                std::cout << varpro::csv_header() << "\n";
                for (const auto& r : rows) std::cout << r << "\n";
            } else {
                std::ofstream out(out_path);
                varpro::require(out.good(), "cannot open output file '" + out_path + "'");
                out << varpro::csv_header() << "\n";
                for (const auto& r : rows) out << r << "\n";
            }
            return all_ok ? 0 : 1;
        }

        // compare
        const std::string summary = varpro::compare_tables(varpro::parse_csv_file(csv_a),
                                                           varpro::parse_csv_file(csv_b));
        if (out_path.empty()) {
            std::cout << summary;
        } else {
            std::ofstream out(out_path);
            varpro::require(out.good(), "cannot open output file '" + out_path + "'");
            out << summary;
        }
        return 0;
    } catch (const varpro::contract_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 1;
    }
}
