#include "pertsde/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "pertsde/parallel.hpp"
#include "pertsde/stats.hpp"
#include "pertsde/stepper.hpp"

namespace pertsde::cli {

std::string_view to_string(Command command) noexcept {
    switch (command) {
        case Command::Simulate: return "simulate";
        case Command::Verify: return "verify";
        case Command::Law: return "law";
        case Command::Picard: return "picard";
        case Command::Convergence: return "convergence";
    }
    return "unknown";
}

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "command",  "family",   "alpha",       "beta",           "xi",        "sigma",
        "b",        "max_drift", "h",          "alpha_t",        "t_end",     "n_steps",
        "n_paths",  "seed",     "out_dir",     "format",         "sample_paths_out",
        "study",    "law_kind", "levels",      "qv_threshold",   "picard_tol", "picard_max_iter",
        "double_horizon",
    };
    return keys;
}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_number(std::string_view field, std::string_view text) {
    const std::string s(trim(text));
    if (s.empty()) throw ConfigError(std::string(field), "expected a number, got an empty value");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
        throw ConfigError(std::string(field), "expected a finite number, got '" + s + "'");
    }
    return v;
}

std::uint64_t parse_count(std::string_view field, std::string_view text) {
    const std::string s(trim(text));
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError(std::string(field), "expected a nonnegative integer, got '" + s + "'");
    }
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), nullptr, 10);
    if (errno == ERANGE) throw ConfigError(std::string(field), "integer out of range: '" + s + "'");
    return v;
}

bool parse_bool(std::string_view field, std::string_view text) {
    const auto s = trim(text);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(std::string(field), "expected true or false, got '" + std::string(s) + "'");
}

struct Preset {
    std::string name;
    std::vector<double> args;
};

Preset split_preset(std::string_view field, std::string_view text) {
    const auto s = trim(text);
    Preset preset;
    const auto colon = s.find(':');
    preset.name = std::string(trim(s.substr(0, colon)));
    if (colon == std::string_view::npos) {
        // const1, const0.5 shorthand
        if (preset.name.rfind("const", 0) == 0 && preset.name.size() > 5) {
            preset.args.push_back(parse_number(field, preset.name.substr(5)));
            preset.name = "const";
        }
        return preset;
    }
    std::string_view rest = s.substr(colon + 1);
    while (true) {
        const auto comma = rest.find(',');
        preset.args.push_back(parse_number(field, rest.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
    }
    return preset;
}

void require_args(std::string_view field, const Preset& p, std::size_t lo, std::size_t hi) {
    if (p.args.size() < lo || p.args.size() > hi) {
        std::string want = std::to_string(lo);
        if (hi != lo) want += "-" + std::to_string(hi);
        throw ConfigError(std::string(field), "preset '" + p.name + "' takes " + want + " parameter(s), got " +
                                                  std::to_string(p.args.size()));
    }
}

}  // namespace

KeyValues parse_config_text(std::string_view text) {
    KeyValues values;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no), "expected key=value, got '" + std::string(line) + "'");
        }
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no), "empty key");
        values[std::string(key)] = std::string(trim(line.substr(eq + 1)));
    }
    return values;
}

KeyValues read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot read '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

Coefficient parse_coefficient(std::string_view field, std::string_view text) {
    const Preset p = split_preset(field, text);
    if (p.name == "const") {
        require_args(field, p, 1, 1);
        return presets::constant(p.args[0]);
    }
    if (p.name == "affine") {
        require_args(field, p, 2, 2);
        return presets::affine(p.args[0], p.args[1]);
    }
    if (p.name == "sine") {
        require_args(field, p, 2, 3);
        return presets::bounded_sine(p.args[0], p.args[1], p.args.size() == 3 ? p.args[2] : 1.0);
    }
    if (p.name == "piecewise") {
        require_args(field, p, 2, 3);
        return presets::piecewise(p.args[0], p.args[1], p.args.size() == 3 ? p.args[2] : 0.0);
    }
    throw ConfigError(std::string(field), "unknown preset '" + std::string(trim(text)) +
                                              "' (known: const, affine, sine, piecewise)");
}

MaxDriftCoefficient parse_max_drift(std::string_view field, std::string_view text) {
    const Preset p = split_preset(field, text);
    if (p.name == "zero") {
        require_args(field, p, 0, 0);
        return presets::zero_max_drift();
    }
    if (p.name == "atan") {
        require_args(field, p, 2, 2);
        return presets::atan_max_drift(p.args[0], p.args[1]);
    }
    throw ConfigError(std::string(field), "unknown preset '" + std::string(trim(text)) + "' (known: zero, atan)");
}

MonotoneTransform parse_transform(std::string_view field, std::string_view text) {
    const Preset p = split_preset(field, text);
    if (p.name == "linear" || p.name == "tanh") {
        require_args(field, p, 1, 1);
        return p.name == "linear" ? presets::linear_transform(p.args[0]) : presets::tanh_transform(p.args[0]);
    }
    throw ConfigError(std::string(field), "unknown preset '" + std::string(trim(text)) + "' (known: linear, tanh)");
}

TimeDependentWeight parse_weight(std::string_view field, std::string_view text) {
    const Preset p = split_preset(field, text);
    if (p.name == "ramp") {
        require_args(field, p, 2, 2);
        return presets::linear_weight(p.args[0], p.args[1]);
    }
    throw ConfigError(std::string(field), "unknown preset '" + std::string(trim(text)) + "' (known: ramp)");
}

RunConfig build_config(const KeyValues& values, const std::string& default_out_dir) {
    const auto& keys = known_keys();
    std::map<std::string, double> thresholds;
    for (const auto& [key, value] : values) {
        if (key.rfind("threshold.", 0) == 0 && key.size() > 10) {
            thresholds[key.substr(10)] = parse_number(key, value);
        } else if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ConfigError(key, "unknown configuration key");
        }
    }
    auto get = [&](const std::string& key) -> const std::string* {
        auto it = values.find(key);
        return it == values.end() ? nullptr : &it->second;
    };

    RunConfig config;
    config.thresholds = std::move(thresholds);
    config.output.directory = default_out_dir;

    if (auto v = get("command")) {
        bool found = false;
        for (Command c : {Command::Simulate, Command::Verify, Command::Law, Command::Picard, Command::Convergence}) {
            if (*v == to_string(c)) {
                config.command = c;
                found = true;
            }
        }
        if (!found) {
            throw ConfigError("command", "unknown command '" + *v +
                                             "' (known: simulate, verify, law, picard, convergence)");
        }
    } else {
        throw ConfigError("command", "no command given");
    }

    Family family = Family::MaxPerturbed;
    if (auto v = get("family")) {
        auto f = parse_family(*v);
        if (!f) throw ConfigError("family", "unknown family '" + *v + "' (known: max_perturbed, reflected, max_drift, doubly)");
        family = *f;
    }
    ProblemSpec& spec = config.problem;
    spec.family = family;
    if (family == Family::MaxDrift) {
        for (const char* k : {"alpha", "beta", "sigma", "b", "h", "alpha_t"}) {
            if (get(k)) throw ConfigError(k, "not used by family max_drift");
        }
        if (auto v = get("max_drift")) spec.max_drift = parse_max_drift("max_drift", *v);
    } else {
        if (get("max_drift")) throw ConfigError("max_drift", "only used by family max_drift");
        spec.params.alpha = get("alpha") ? parse_number("alpha", *get("alpha")) : 0.5;
        spec.params.beta = get("beta") ? parse_number("beta", *get("beta")) : 0.0;
        if (auto v = get("sigma")) spec.sigma = parse_coefficient("sigma", *v);
        if (auto v = get("b")) spec.b = parse_coefficient("b", *v);
        if (auto v = get("h")) spec.params.h_transform = parse_transform("h", *v);
        if (auto v = get("alpha_t")) spec.params.alpha_of_t = parse_weight("alpha_t", *v);
    }
    if (auto v = get("xi")) spec.initial = parse_number("xi", *v);

    if (auto v = get("t_end")) config.t_end = parse_number("t_end", *v);
    if (auto v = get("n_steps")) config.n_steps = parse_count("n_steps", *v);
    if (auto v = get("n_paths")) config.n_paths = parse_count("n_paths", *v);
    if (auto v = get("seed")) config.seed = parse_count("seed", *v);
    if (auto v = get("sample_paths_out")) config.output.sample_paths_out = parse_count("sample_paths_out", *v);
    if (auto v = get("out_dir")) config.output.directory = *v;
    if (!(config.t_end > 0.0)) throw ConfigError("t_end", "must be positive");
    if (config.n_steps == 0) throw ConfigError("n_steps", "must be at least 1");
    if (config.n_paths == 0) throw ConfigError("n_paths", "must be at least 1");

    if (auto v = get("format")) {
        config.output.csv = false;
        config.output.json = false;
        std::string_view rest = *v;
        while (true) {
            const auto comma = rest.find(',');
            const auto item = trim(rest.substr(0, comma));
            if (item == "csv") {
                config.output.csv = true;
            } else if (item == "json") {
                config.output.json = true;
            } else {
                throw ConfigError("format", "unknown format '" + std::string(item) + "' (known: csv, json)");
            }
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
    }

    if (auto v = get("study")) {
        if (*v != "uniqueness_gap" && *v != "invariant_sweep") {
            throw ConfigError("study", "unknown study '" + *v + "' (known: uniqueness_gap, invariant_sweep)");
        }
        config.verify_study = *v;
    }
    if (auto v = get("law_kind")) {
        auto k = parse_law_kind(*v);
        if (!k) throw ConfigError("law_kind", "unknown kind '" + *v + "' (known: max_law, girsanov_mean_one, squared_qv)");
        config.law_kind = *k;
    }
    if (auto v = get("levels")) {
        config.levels = parse_count("levels", *v);
        if (config.levels < 3) throw ConfigError("levels", "need at least 3 refinement levels");
    }
    if (auto v = get("qv_threshold")) config.law.qv_residual_threshold = parse_number("qv_threshold", *v);
    if (auto v = get("picard_tol")) config.picard.picard.tol = parse_number("picard_tol", *v);
    if (auto v = get("picard_max_iter")) config.picard.picard.max_iter = parse_count("picard_max_iter", *v);
    if (auto v = get("double_horizon")) config.picard.double_horizon = parse_bool("double_horizon", *v);

    const ValidationResult validation = validate_params(spec, config.t_end);
    if (!validation.schemes_defined()) {
        const Violation& first = *std::find_if(validation.violations.begin(), validation.violations.end(),
                                               [](const Violation& v) { return !v.hypothesis_only; });
        std::string message = first.message;
        for (const Violation& v : validation.violations) {
            if (&v != &first) message += "; " + v.field + ": " + v.message;
        }
        throw ConfigError(first.field, message);
    }
    return config;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string json_string(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out + "\"";
}

std::string json_number(double v) { return std::isfinite(v) ? format_double(v) : "null"; }

StudyReport simulation_report(const RunConfig& config, const TimeGrid& grid) {
    const ProblemSpec& spec = config.problem;
    auto rows = parallel_map<std::vector<double>>(config.n_paths, [&](std::size_t p) {
        const SamplePath w = generate_brownian(grid, config.seed, p);
        const auto sol = simulate(spec, w);
        return std::vector<double>{static_cast<double>(p), sol.x.back(), sol.max.back(), sol.min.back(),
                                   sol.local_time.back(), identity_residual(spec, sol, w)};
    });
    StudyReport report;
    report.kind = StudyKind::Simulation;
    report.parameters = describe(spec);
    report.parameters.emplace_back("t_end", format_double(grid.t_end()));
    report.parameters.emplace_back("n_steps", std::to_string(grid.n_steps()));
    report.master_seed = config.seed;
    report.n_paths = config.n_paths;
    report.per_path.columns = {"path_id", "x_T", "max_T", "min_T", "local_time_T", "identity_residual"};
    std::vector<double> col[4];
    double residual = 0.0;
    for (auto& row : rows) {
        for (int c = 0; c < 4; ++c) col[c].push_back(row[c + 1]);
        residual = std::max(residual, row[5]);
        report.per_path.rows.push_back(std::move(row));
    }
    report.metrics.emplace_back("mean_x_T", stats::mean(col[0]));
    report.metrics.emplace_back("mean_max_T", stats::mean(col[1]));
    report.metrics.emplace_back("mean_min_T", stats::mean(col[2]));
    report.metrics.emplace_back("mean_local_time_T", stats::mean(col[3]));
    report.metrics.emplace_back("max_identity_residual", residual);
    report.thresholds.push_back({"max_identity_residual", Comparison::AtMost, 1e-12});
    report.pass = evaluate_pass(report.metrics, report.thresholds);
    return report;
}

std::string paths_csv(const RunConfig& config, const TimeGrid& grid) {
    std::string out = "path_id,k,t,w,x,max,min,local_time\n";
    const std::size_t n = std::min(config.n_paths, config.output.sample_paths_out);
    for (std::size_t p = 0; p < n; ++p) {
        const SamplePath w = generate_brownian(grid, config.seed, p);
        const auto sol = simulate(config.problem, w);
        for (std::size_t k = 0; k < w.size(); ++k) {
            out += std::to_string(p) + ',' + std::to_string(k) + ',' + format_double(grid.time(k)) + ',' +
                   format_double(w[k]) + ',' + format_double(sol.x[k]) + ',' + format_double(sol.max[k]) + ',' +
                   format_double(sol.min[k]) + ',' + format_double(sol.local_time[k]) + '\n';
        }
    }
    return out;
}

}  // namespace

std::string report_json(const StudyReport& report) {
    std::string out = "{\n";
    out += "  \"study_kind\": " + json_string(to_string(report.kind)) + ",\n";
    out += "  \"parameters\": {";
    for (std::size_t j = 0; j < report.parameters.size(); ++j) {
        out += (j ? ",\n    " : "\n    ") + json_string(report.parameters[j].first) + ": " +
               json_string(report.parameters[j].second);
    }
    out += report.parameters.empty() ? "},\n" : "\n  },\n";
    out += "  \"metrics\": {";
    for (std::size_t j = 0; j < report.metrics.size(); ++j) {
        out += (j ? ",\n    " : "\n    ") + json_string(report.metrics[j].first) + ": " +
               json_number(report.metrics[j].second);
    }
    out += report.metrics.empty() ? "},\n" : "\n  },\n";
    out += "  \"thresholds\": [";
    for (std::size_t j = 0; j < report.thresholds.size(); ++j) {
        const Threshold& t = report.thresholds[j];
        out += (j ? ",\n    " : "\n    ") + std::string("{\"metric\": ") + json_string(t.metric) +
               ", \"comparison\": " + json_string(t.comparison == Comparison::AtMost ? "<=" : ">=") +
               ", \"value\": " + json_number(t.value) + "}";
    }
    out += report.thresholds.empty() ? "],\n" : "\n  ],\n";
    out += std::string("  \"pass\": ") + (report.pass ? "true" : "false") + ",\n";
    out += "  \"seeds\": {\"master_seed\": " + std::to_string(report.master_seed) +
           ", \"n_paths\": " + std::to_string(report.n_paths) + "},\n";
    out += "  \"notes\": [";
    for (std::size_t j = 0; j < report.notes.size(); ++j) {
        out += (j ? ",\n    " : "\n    ") + json_string(report.notes[j]);
    }
    out += report.notes.empty() ? "]\n" : "\n  ]\n";
    return out + "}\n";
}

std::string per_path_csv(const StudyReport& report) {
    std::string out;
    for (std::size_t c = 0; c < report.per_path.columns.size(); ++c) {
        out += (c ? "," : "") + report.per_path.columns[c];
    }
    out += '\n';
    for (const auto& row : report.per_path.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + format_double(row[c]);
        out += '\n';
    }
    return out;
}

RunResult run(const RunConfig& config) {
    const TimeGrid grid(config.t_end, config.n_steps);
    RunResult result;
    switch (config.command) {
        case Command::Simulate: result.report = simulation_report(config, grid); break;
        case Command::Verify:
            result.report = config.verify_study == "invariant_sweep"
                                ? invariant_sweep(config.problem, grid, config.n_paths, config.seed)
                                : uniqueness_gap_study(config.problem, config.n_paths, grid, config.seed);
            break;
        case Command::Law:
            result.report = law_ks_study(config.law_kind, config.problem, grid, config.n_paths, config.seed, config.law);
            break;
        case Command::Picard:
            result.report = picard_rate_study(config.problem, grid, config.n_paths, config.seed, config.picard);
            break;
        case Command::Convergence: {
            std::vector<std::size_t> levels;
            for (std::size_t j = 0; j < config.levels; ++j) levels.push_back(config.n_steps << j);
            result.report = convergence_order_study(config.problem, config.t_end, levels, config.n_paths, config.seed);
            break;
        }
    }
    result.report.parameters.insert(result.report.parameters.begin(),
                                    {"command", std::string(to_string(config.command))});
    if (!config.thresholds.empty()) override_thresholds(result.report, config.thresholds);

    std::filesystem::create_directories(config.output.directory);
    if (config.output.csv) {
        result.files.push_back(config.output.directory / "paths.csv");
        write_file(result.files.back(), paths_csv(config, grid));
        result.files.push_back(config.output.directory / "metrics.csv");
        write_file(result.files.back(), per_path_csv(result.report));
    }
    if (config.output.json) {
        result.files.push_back(config.output.directory / "report.json");
        write_file(result.files.back(), report_json(result.report));
    }
    result.exit_code = result.report.pass ? 0 : 1;
    return result;
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Perturbed SDE simulator and verification studies"};
    app.set_help_flag("--help", "print this help");  // -h would clash with the h preset key
    std::string command;
    std::string config_path;
    std::vector<std::string> threshold_flags;
    std::map<std::string, std::string> flag_values;
    app.add_option("command", command, "simulate | verify | law | picard | convergence");
    app.add_option("--config", config_path, "flat key=value configuration file");
    app.add_option("--threshold", threshold_flags, "override a threshold: metric=value (repeatable)");
    for (const std::string& key : known_keys()) {
        if (key == "command") continue;
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        app.add_option(flag, flag_values[key], "config key " + key);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        KeyValues values;
        if (!config_path.empty()) values = read_config_file(config_path);
        if (!command.empty()) values["command"] = command;
        for (const std::string& key : known_keys()) {
            if (key == "command") continue;
            std::string flag = "--" + key;
            std::replace(flag.begin(), flag.end(), '_', '-');
            if (app.count(flag) > 0) values[key] = flag_values[key];
        }
        for (const std::string& t : threshold_flags) {
            const auto eq = t.find('=');
            if (eq == std::string::npos) throw ConfigError("threshold", "expected metric=value, got '" + t + "'");
            values["threshold." + t.substr(0, eq)] = t.substr(eq + 1);
        }
        const char* env_dir = std::getenv("PERTSDE_OUT_DIR");
        const RunConfig config = build_config(values, env_dir && *env_dir ? env_dir : ".");
        for (const std::string& w : validate_params(config.problem, config.t_end).warnings) {
            err << "warning: " << w << '\n';
        }
        for (const Violation& v : validate_params(config.problem, config.t_end).violations) {
            err << "warning: " << v.field << ": " << v.message << '\n';
        }

        RunResult result;
        try {
            result = run(config);
        } catch (const std::invalid_argument& e) {
            err << "error: " << e.what() << '\n';
            return 2;
        }
        out << to_string(result.report.kind) << ": " << (result.report.pass ? "pass" : "fail") << '\n';
        for (const auto& [name, value] : result.report.metrics) out << "  " << name << " = " << format_double(value) << '\n';
        for (const auto& f : result.files) out << "wrote " << f.string() << '\n';
        return result.exit_code;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace pertsde::cli
