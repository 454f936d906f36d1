#pragma once

#include "varpro/problems.hpp"
#include "varpro/varpro.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace varpro {

enum class Method { VarPro, Elm };

const char* to_string(Method m);
Method parse_method(const std::string& name);

/// One benchmark run, fully determined by these fields plus the seed.
struct RunConfig {
    std::string problem = "poisson2d";
    Method method = Method::VarPro;
    std::vector<Index> widths = {2, 100, 1};
    Activation activation = Activation::Cos;
    Index q1 = 21;
    Index q2 = 101;
    double rm = 1.0;  // half-width of the uniform init interval for theta0
    std::uint64_t seed = 1;

    double delta = 0.0;
    double p = 0.5;
    int max_subiterations = 0;
    double cost_threshold = 1e-12;

    double ftol = 1e-8, xtol = 1e-8, gtol = 1e-8;
    int max_gn_iterations = 120;

    int newton_max_iterations = 20;
    double newton_tolerance = 1e-8;

    int n_blocks = 1;
    std::optional<double> t_final;  // overrides the catalog's temporal extent

    Index last_hidden() const { return widths[widths.size() - 2]; }
};

struct SolveReport {
    RunConfig config;
    bool success = true;
    bool newton_converged = true;
    double cost = 0.0;  // final (last block) reduced cost
    int gn_iterations = 0;
    int newton_iterations = 0;
    int subiterations = 0;
    ErrorReport errors;
    double wall_seconds = 0.0;
    std::vector<BlockReport> blocks;
};

/// Executes one run. Deterministic given the config (wall time aside).
SolveReport run_single(const RunConfig& config);

/// --- config files -----------------------------------------------------------
/// Flat key-value format, one `key = value` per line, '#' comments.
/// Values: scalars, `[a, b, c]` for the architecture, `{a, b, c}` for sweep
/// lists. At most one non-seed key may carry a sweep list; `seed = {...}`
/// adds independent seeds. `m = ...` overrides the last hidden width.
struct ParsedConfig {
    std::map<std::string, std::vector<std::string>> values;
    std::map<std::string, bool> is_list;
};

ParsedConfig parse_config_text(const std::string& text);
ParsedConfig parse_config_file(const std::string& path);

/// Expands a parsed config into the runs it describes (a single run when no
/// sweep lists are present), in axis-major, seed-minor order.
std::vector<RunConfig> expand_runs(const ParsedConfig& parsed,
                                   std::optional<std::uint64_t> seed_override = {});

/// --- CSV --------------------------------------------------------------------
/// Fixed schema; floating-point fields in scientific notation with six
/// significant digits.
std::string csv_header();
std::string csv_row(const SolveReport& report);

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv_text(const std::string& text);
CsvTable parse_csv_file(const std::string& path);

/// Joins two result tables on (problem, seed, M, Q1, activation, R_m) and
/// summarizes per-row rms ratios (first table / second table), flagging rows
/// where the first table is not strictly better. Throws contract_error naming
/// the first unmatched key.
std::string compare_tables(const CsvTable& a, const CsvTable& b);

/// Full-precision sidecar report (JSON).
std::string report_json(const SolveReport& report);

}  // namespace varpro
