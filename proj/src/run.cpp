#include "varpro/run.hpp"

#include "varpro/newton.hpp"
#include "varpro/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace varpro {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_items(const std::string& s) {
    std::vector<std::string> items;
    std::string current;
    for (char ch : s + ",") {
        if (ch == ',') {
            const std::string item = trim(current);
            if (!item.empty()) items.push_back(item);
            current.clear();
        } else {
            current += ch;
        }
    }
    return items;
}

double to_double(const std::string& key, const std::string& token) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(token, &used);
    } catch (const std::exception&) {
        throw contract_error("config field '" + key + "': cannot parse number '" + token + "'");
    }
    if (used != token.size())
        throw contract_error("config field '" + key + "': cannot parse number '" + token + "'");
    return v;
}

long long to_int(const std::string& key, const std::string& token) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(token, &used);
    } catch (const std::exception&) {
        throw contract_error("config field '" + key + "': cannot parse integer '" + token + "'");
    }
    if (used != token.size())
        throw contract_error("config field '" + key + "': cannot parse integer '" + token + "'");
    return v;
}

std::string fmt_sci(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.5e", v);
    return buf;
}

int max_row_order(const CollocationSet& colloc) {
    int order = 0;
    for (const auto& row : colloc.rows) order = std::max(order, row.coeffs.max_order());
    return order;
}

}  // namespace

const char* to_string(Method m) { return m == Method::VarPro ? "varpro" : "elm"; }

Method parse_method(const std::string& name) {
    if (name == "varpro") return Method::VarPro;
    if (name == "elm") return Method::Elm;
    throw contract_error("unknown method '" + name + "' (expected varpro or elm)");
}

SolveReport run_single(const RunConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();

    BvpSpec problem = catalog_entry(cfg.problem);
    if (cfg.t_final) {
        require(problem.time_dependent(), "config field 't_final': problem is stationary");
        require(*cfg.t_final > problem.box.lo(problem.time_dim),
                "config field 't_final': must exceed the initial time");
        problem.box.intervals[problem.time_dim][1] = *cfg.t_final;
    }
    if (cfg.n_blocks > 1)
        require(problem.time_dependent(), "config field 'n_blocks': problem is stationary");
    require(cfg.q2 >= cfg.q1, "config field 'q2': must be >= q1");
    require(cfg.rm > 0.0, "config field 'rm': must be positive");

    Architecture arch{cfg.widths, cfg.activation};
    arch.validate();
    require(arch.input_dim() == problem.box.dim(),
            "config field 'widths': input width must equal the problem dimension");

    NlsqConfig nlsq;
    nlsq.max_iterations = cfg.method == Method::Elm ? 0 : cfg.max_gn_iterations;
    nlsq.ftol = cfg.ftol;
    nlsq.xtol = cfg.xtol;
    nlsq.gtol = cfg.gtol;

    PerturbConfig perturb;
    perturb.delta = cfg.delta;
    perturb.preference_p = cfg.p;
    perturb.max_subiterations = cfg.method == Method::Elm ? 0 : cfg.max_subiterations;
    perturb.cost_threshold = cfg.cost_threshold;
    perturb.seed = cfg.seed;

    NewtonConfig newton;
    newton.max_iterations = cfg.newton_max_iterations;
    newton.tolerance = cfg.newton_tolerance;

    UniformStream init(cfg.seed, stream_id::theta_init);
    const Index nh = arch.hidden_param_count();

    const BlockSolver solver = [&](const BvpSpec& block, const CollocationSet& colloc,
                                   int) -> BlockOutcome {
        BlockOutcome out;
        const Vector theta0 = init.draw(nh, -cfg.rm, cfg.rm);
        try {
            if (block.nonlinear) {
                const NewtonOutcome res =
                    newton_varpro_solve(block, colloc, arch, newton, perturb, nlsq, theta0);
                out.theta = res.theta;
                out.beta = res.beta;
                out.cost = res.final_cost;
                out.gn_iterations = res.report.gn_iterations;
                out.newton_iterations = res.report.iterations;
                out.subiterations = res.report.subiterations;
                out.newton_converged = res.report.converged;
                const auto states = network_states(arch, res.theta, res.beta, colloc.points,
                                                   block.box, max_row_order(colloc));
                out.final_residual = nonlinear_residual(block, colloc, states);
            } else {
                VarProProblem prob(arch, block.box, colloc.points, colloc.rows);
                const VarProResult vr = varpro_solve(prob, theta0, perturb, nlsq);
                out.theta = vr.theta;
                out.beta = vr.beta;
                out.cost = vr.cost;
                out.gn_iterations = vr.gn_iterations;
                out.subiterations = vr.subiterations_used;
                out.final_residual = prob.residual(vr.theta);
            }
        } catch (const numeric_error&) {
            out.success = false;
        }
        return out;
    };

    SolveReport rep;
    rep.config = cfg;
    const MarchResult march = block_march(problem, arch, cfg.q1, cfg.q2, cfg.n_blocks, solver);
    rep.success = march.completed;
    rep.errors = march.overall;
    rep.blocks = march.blocks;
    for (const auto& b : march.blocks) {
        rep.gn_iterations += b.outcome.gn_iterations;
        rep.newton_iterations += b.outcome.newton_iterations;
        rep.subiterations += b.outcome.subiterations;
        rep.newton_converged = rep.newton_converged && b.outcome.newton_converged;
        rep.cost = b.outcome.cost;
    }

    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

ParsedConfig parse_config_text(const std::string& text) {
    ParsedConfig out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;

        const auto eq = line.find('=');
        require(eq != std::string::npos,
                "config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        require(!key.empty(), "config line " + std::to_string(lineno) + ": empty key");
        require(!out.values.count(key),
                "config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");

        bool is_list = false;
        std::vector<std::string> items;
        if (!value.empty() && (value.front() == '[' || value.front() == '{')) {
            const char close = value.front() == '[' ? ']' : '}';
            require(value.back() == close,
                    "config line " + std::to_string(lineno) + ": unterminated bracket");
            is_list = value.front() == '{';
            items = split_items(value.substr(1, value.size() - 2));
            require(!is_list || !items.empty(),
                    "config field '" + key + "': empty sweep list");
        } else {
            require(!value.empty(), "config line " + std::to_string(lineno) + ": empty value");
            items.push_back(value);
        }
        out.values[key] = items;
        out.is_list[key] = is_list;
    }
    return out;
}

ParsedConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

namespace {

RunConfig build_config(const std::map<std::string, std::string>& kv,
                       const std::map<std::string, std::vector<std::string>>& widths_kv) {
    RunConfig cfg;
    bool widths_set = false;
    for (const auto& [key, tokens] : widths_kv) {
        if (key == "widths") {
            require(tokens.size() >= 3, "config field 'widths': need [input, hidden..., 1]");
            cfg.widths.clear();
            for (const auto& t : tokens) cfg.widths.push_back(to_int(key, t));
            widths_set = true;
        }
    }
    (void)widths_set;

    for (const auto& [key, value] : kv) {
        if (key == "problem") {
            cfg.problem = value;
        } else if (key == "method") {
            cfg.method = parse_method(value);
        } else if (key == "activation") {
            cfg.activation = parse_activation(value);
        } else if (key == "m") {
            const Index m = to_int(key, value);
            require(m >= 1, "config field 'm': must be >= 1");
            cfg.widths[cfg.widths.size() - 2] = m;
        } else if (key == "q1") {
            cfg.q1 = to_int(key, value);
        } else if (key == "q2") {
            cfg.q2 = to_int(key, value);
        } else if (key == "rm") {
            cfg.rm = to_double(key, value);
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(to_int(key, value));
        } else if (key == "delta") {
            cfg.delta = to_double(key, value);
        } else if (key == "p") {
            cfg.p = to_double(key, value);
        } else if (key == "max_subiterations") {
            cfg.max_subiterations = static_cast<int>(to_int(key, value));
        } else if (key == "cost_threshold") {
            cfg.cost_threshold = to_double(key, value);
        } else if (key == "ftol") {
            cfg.ftol = to_double(key, value);
        } else if (key == "xtol") {
            cfg.xtol = to_double(key, value);
        } else if (key == "gtol") {
            cfg.gtol = to_double(key, value);
        } else if (key == "max_gn_iterations") {
            cfg.max_gn_iterations = static_cast<int>(to_int(key, value));
        } else if (key == "newton_max_iterations") {
            cfg.newton_max_iterations = static_cast<int>(to_int(key, value));
        } else if (key == "newton_tolerance") {
            cfg.newton_tolerance = to_double(key, value);
        } else if (key == "n_blocks") {
            cfg.n_blocks = static_cast<int>(to_int(key, value));
        } else if (key == "t_final") {
            cfg.t_final = to_double(key, value);
        } else if (key != "widths") {
            throw contract_error("unknown config key '" + key + "'");
        }
    }
    return cfg;
}

}  // namespace

std::vector<RunConfig> expand_runs(const ParsedConfig& parsed,
                                   std::optional<std::uint64_t> seed_override) {
    std::string axis_key;
    std::vector<std::string> axis_values;
    std::vector<std::string> seeds;

    for (const auto& [key, is_list] : parsed.is_list) {
        if (!is_list) continue;
        if (key == "seed") {
            seeds = parsed.values.at(key);
            continue;
        }
        require(axis_key.empty(), "config has more than one sweep list ('" + axis_key + "' and '" +
                                      key + "'); one non-seed axis per sweep");
        axis_key = key;
        axis_values = parsed.values.at(key);
    }

    // Scalar view of the config; 'widths' keeps its token list.
    std::map<std::string, std::string> scalars;
    std::map<std::string, std::vector<std::string>> lists;
    for (const auto& [key, tokens] : parsed.values) {
        if (key == "widths") {
            lists[key] = tokens;
        } else if (!parsed.is_list.at(key)) {
            require(tokens.size() == 1, "config field '" + key + "': expected a single value");
            scalars[key] = tokens.front();
        }
    }

    if (axis_values.empty()) axis_values.push_back("");  // no axis: one slot
    if (seed_override) {
        seeds = {std::to_string(*seed_override)};
    } else if (seeds.empty()) {
        seeds = {scalars.count("seed") ? scalars.at("seed") : ""};
    }

    std::vector<RunConfig> runs;
    for (const auto& av : axis_values) {
        for (const auto& sv : seeds) {
            auto kv = scalars;
            if (!axis_key.empty()) kv[axis_key] = av;
            if (!sv.empty()) kv["seed"] = sv;
            runs.push_back(build_config(kv, lists));
        }
    }
    return runs;
}

std::string csv_header() {
    return "problem,method,seed,M,Q1,activation,R_m,delta,p,subiters,gn_iters,newton_iters,cost,"
           "max_err,rms_err,wall_s";
}

std::string csv_row(const SolveReport& rep) {
    const RunConfig& c = rep.config;
    std::ostringstream out;
    out << c.problem << ',' << to_string(c.method) << ',' << c.seed << ',' << c.last_hidden() << ','
        << c.q1 << ',' << to_string(c.activation) << ',' << fmt_sci(c.rm) << ','
        << fmt_sci(c.delta) << ',' << fmt_sci(c.p) << ',' << rep.subiterations << ','
        << rep.gn_iterations << ',' << rep.newton_iterations << ',' << fmt_sci(rep.cost) << ','
        << fmt_sci(rep.errors.max_error) << ',' << fmt_sci(rep.errors.rms_error) << ','
        << fmt_sci(rep.wall_seconds);
    return out.str();
}

CsvTable parse_csv_text(const std::string& text) {
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        std::vector<std::string> fields;
        std::string current;
        for (char ch : line + ",") {
            if (ch == ',') {
                fields.push_back(current);
                current.clear();
            } else {
                current += ch;
            }
        }
        if (first) {
            table.columns = fields;
            first = false;
        } else {
            require(fields.size() == table.columns.size(), "csv row has wrong field count");
            table.rows.push_back(fields);
        }
    }
    require(!table.columns.empty(), "csv is empty");
    return table;
}

CsvTable parse_csv_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open csv file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_csv_text(buf.str());
}

std::string compare_tables(const CsvTable& a, const CsvTable& b) {
    const std::vector<std::string> key_cols = {"problem", "seed", "M", "Q1", "activation", "R_m"};
    auto col_index = [](const CsvTable& t, const std::string& name) {
        const auto it = std::find(t.columns.begin(), t.columns.end(), name);
        require(it != t.columns.end(), "csv is missing column '" + name + "'");
        return static_cast<std::size_t>(it - t.columns.begin());
    };

    std::vector<std::size_t> akey, bkey;
    for (const auto& k : key_cols) {
        akey.push_back(col_index(a, k));
        bkey.push_back(col_index(b, k));
    }
    const std::size_t arms = col_index(a, "rms_err");
    const std::size_t brms = col_index(b, "rms_err");

    auto key_of = [](const std::vector<std::string>& row, const std::vector<std::size_t>& idx) {
        std::string key;
        for (std::size_t i : idx) key += row[i] + "|";
        return key;
    };

    std::map<std::string, double> b_rms;
    for (const auto& row : b.rows) b_rms[key_of(row, bkey)] = std::stod(row[brms]);

    std::ostringstream out;
    out << "problem,seed,M,Q1,activation,R_m,rms_a,rms_b,ratio,a_not_better\n";
    int flagged = 0;
    for (const auto& row : a.rows) {
        const std::string key = key_of(row, akey);
        const auto it = b_rms.find(key);
        require(it != b_rms.end(), "no matching row in second table for key " + key);
        const double ra = std::stod(row[arms]);
        const double rb = it->second;
        const bool flag = ra >= rb;
        flagged += flag ? 1 : 0;
        for (std::size_t i : akey) out << row[i] << ',';
        out << fmt_sci(ra) << ',' << fmt_sci(rb) << ',' << fmt_sci(ra / rb) << ','
            << (flag ? "yes" : "no") << "\n";
    }
    out << "# flagged " << flagged << " of " << a.rows.size() << " rows\n";
    return out.str();
}

std::string report_json(const SolveReport& rep) {
    nlohmann::json j;
    const RunConfig& c = rep.config;
    j["config"] = {{"problem", c.problem},
                   {"method", to_string(c.method)},
                   {"widths", c.widths},
                   {"activation", to_string(c.activation)},
                   {"q1", c.q1},
                   {"q2", c.q2},
                   {"rm", c.rm},
                   {"seed", c.seed},
                   {"delta", c.delta},
                   {"p", c.p},
                   {"max_subiterations", c.max_subiterations},
                   {"cost_threshold", c.cost_threshold},
                   {"ftol", c.ftol},
                   {"xtol", c.xtol},
                   {"gtol", c.gtol},
                   {"max_gn_iterations", c.max_gn_iterations},
                   {"newton_max_iterations", c.newton_max_iterations},
                   {"newton_tolerance", c.newton_tolerance},
                   {"n_blocks", c.n_blocks}};
    if (c.t_final) j["config"]["t_final"] = *c.t_final;
    j["success"] = rep.success;
    j["newton_converged"] = rep.newton_converged;
    j["cost"] = rep.cost;
    j["gn_iterations"] = rep.gn_iterations;
    j["newton_iterations"] = rep.newton_iterations;
    j["subiterations"] = rep.subiterations;
    j["max_error"] = rep.errors.max_error;
    j["rms_error"] = rep.errors.rms_error;
    j["wall_seconds"] = rep.wall_seconds;
    j["blocks"] = nlohmann::json::array();
    for (const auto& blk : rep.blocks) {
        nlohmann::json bj;
        bj["t_lo"] = blk.box.intervals.back()[0];
        bj["t_hi"] = blk.box.intervals.back()[1];
        bj["cost"] = blk.outcome.cost;
        bj["gn_iterations"] = blk.outcome.gn_iterations;
        bj["newton_iterations"] = blk.outcome.newton_iterations;
        bj["subiterations"] = blk.outcome.subiterations;
        bj["newton_converged"] = blk.outcome.newton_converged;
        bj["success"] = blk.outcome.success;
        bj["max_error"] = blk.errors.max_error;
        bj["rms_error"] = blk.errors.rms_error;
        j["blocks"].push_back(bj);
    }
    return j.dump(2);
}

}  // namespace varpro
