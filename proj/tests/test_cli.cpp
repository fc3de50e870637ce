#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pertsde/cli.hpp"

using namespace pertsde;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "pertsde");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("pertsde_test_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

const std::vector<std::string> kSimulateExample = {"simulate",      "--family",    "max_perturbed", "--alpha",
                                                   "0.5",           "--sigma",     "const1",        "--b",
                                                   "const0",        "--n-steps",   "8",             "--n-paths",
                                                   "1",             "--seed",      "7"};

std::vector<std::string> with_out(std::vector<std::string> args, const fs::path& dir) {
    args.push_back("--out-dir");
    args.push_back(dir.string());
    return args;
}

}  // namespace

TEST(ConfigText, CommentsBlanksAndDuplicates) {
    const auto kv = cli::parse_config_text("# header\n\nalpha = 0.25  # trailing\n beta=0.1\r\nalpha=0.3\n");
    EXPECT_EQ(kv.at("alpha"), "0.3");
    EXPECT_EQ(kv.at("beta"), "0.1");
    EXPECT_EQ(kv.size(), 2u);
}

TEST(ConfigText, MalformedLinesNameTheLine) {
    try {
        cli::parse_config_text("alpha=1\nnonsense\n");
        FAIL();
    } catch (const cli::ConfigError& e) {
        EXPECT_EQ(e.field(), "line 2");
    }
    EXPECT_THROW(cli::parse_config_text("=3"), cli::ConfigError);
    EXPECT_THROW(cli::read_config_file("/nonexistent/pertsde.cfg"), cli::ConfigError);
}

TEST(Presets, CoefficientGrammar) {
    EXPECT_TRUE(cli::parse_coefficient("sigma", "const1").is_constant(1.0));
    EXPECT_TRUE(cli::parse_coefficient("sigma", "const:0.5").is_constant(0.5));
    EXPECT_EQ(cli::parse_coefficient("b", "affine:1,2")(0.0, 3.0), 7.0);
    EXPECT_DOUBLE_EQ(cli::parse_coefficient("sigma", "sine:0.5,0.5")(0.0, 0.0), 0.5);
    EXPECT_EQ(cli::parse_coefficient("sigma", "piecewise:0.5,1.5,1")(0.0, 1.0), 1.5);
    EXPECT_FALSE(cli::parse_coefficient("sigma", "piecewise:0.5,1.5").claims_lipschitz);
    EXPECT_EQ(cli::parse_max_drift("max_drift", "atan:1,0.5").name, presets::atan_max_drift(1.0, 0.5).name);
    EXPECT_NO_THROW(cli::parse_transform("h", "tanh:0.5"));
    EXPECT_NO_THROW(cli::parse_weight("alpha_t", "ramp:0.2,0.3"));
}

TEST(Presets, ErrorsNameTheField) {
    auto field_of = [](auto&& f) {
        try {
            f();
        } catch (const cli::ConfigError& e) {
            return e.field();
        }
        return std::string("no error");
    };
    EXPECT_EQ(field_of([] { cli::parse_coefficient("sigma", "cubic:1"); }), "sigma");
    EXPECT_EQ(field_of([] { cli::parse_coefficient("b", "affine:1"); }), "b");
    EXPECT_EQ(field_of([] { cli::parse_coefficient("b", "const:x"); }), "b");
    EXPECT_EQ(field_of([] { cli::parse_max_drift("max_drift", "zero:1"); }), "max_drift");
    EXPECT_EQ(field_of([] { cli::parse_transform("h", "exp:1"); }), "h");
    EXPECT_EQ(field_of([] { cli::parse_weight("alpha_t", "ramp"); }), "alpha_t");
}

TEST(BuildConfig, FieldsAndDefaults) {
    const auto c = cli::build_config({{"command", "convergence"},
                                      {"family", "doubly"},
                                      {"alpha", "0.25"},
                                      {"beta", "0.25"},
                                      {"xi", "1"},
                                      {"sigma", "sine:0.5,0.5"},
                                      {"n_steps", "64"},
                                      {"levels", "3"},
                                      {"format", "json"},
                                      {"threshold.order", "0.3"}},
                                     "/tmp/default");
    EXPECT_EQ(c.command, cli::Command::Convergence);
    EXPECT_EQ(c.problem.family, Family::DoublyPerturbed);
    EXPECT_EQ(c.problem.params.beta, 0.25);
    EXPECT_EQ(c.problem.initial, 1.0);
    EXPECT_EQ(c.n_steps, 64u);
    EXPECT_EQ(c.levels, 3u);
    EXPECT_FALSE(c.output.csv);
    EXPECT_TRUE(c.output.json);
    EXPECT_EQ(c.output.directory, fs::path("/tmp/default"));
    EXPECT_EQ(c.thresholds.at("order"), 0.3);
    EXPECT_EQ(c.n_paths, 100u);
    EXPECT_EQ(c.output.sample_paths_out, 10u);
}

TEST(BuildConfig, RejectsUnknownAndInadmissible) {
    auto field_of = [](const cli::KeyValues& kv) {
        try {
            cli::build_config(kv);
        } catch (const cli::ConfigError& e) {
            return e.field();
        }
        return std::string("no error");
    };
    EXPECT_EQ(field_of({{"command", "simulate"}, {"colour", "red"}}), "colour");
    EXPECT_EQ(field_of({{"command", "simulate"}, {"family", "quadratic"}}), "family");
    EXPECT_EQ(field_of({{"command", "dance"}}), "command");
    EXPECT_EQ(field_of({}), "command");
    EXPECT_EQ(field_of({{"command", "simulate"}, {"n_paths", "-3"}}), "n_paths");
    EXPECT_EQ(field_of({{"command", "simulate"}, {"format", "xml"}}), "format");
    EXPECT_EQ(field_of({{"command", "simulate"}, {"family", "max_drift"}, {"alpha", "0.5"}}), "alpha");
    EXPECT_NE(field_of({{"command", "verify"}, {"family", "doubly"}, {"alpha", "0.5"}, {"beta", "0.5"}}), "no error");
    EXPECT_EQ(field_of({{"command", "verify"}, {"family", "doubly"}, {"alpha", "0.25"}, {"beta", "0.25"}}), "no error");
}

TEST(Cli, SimulateExampleIsTheClosedForm) {
    const fs::path dir = scratch("simulate");
    const Outcome o = invoke(with_out(kSimulateExample, dir));
    ASSERT_EQ(o.code, 0) << o.err;
    const auto rows = read_csv(dir / "paths.csv");
    ASSERT_EQ(rows.size(), 10u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"path_id", "k", "t", "w", "x", "max", "min", "local_time"}));
    double running = 0.0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const double w = std::stod(rows[r][3]);
        running = std::max(running, w);
        EXPECT_EQ(std::stod(rows[r][4]), w + running) << r;
        EXPECT_EQ(rows[r][7], "0");
        EXPECT_EQ(std::stoul(rows[r][1]), r - 1);
    }
    // The same path from the library.
    const SamplePath w = generate_brownian(TimeGrid(1.0, 8), 7, 0);
    for (std::size_t k = 0; k <= 8; ++k) EXPECT_EQ(std::stod(rows[k + 1][3]), w[k]);
}

TEST(Cli, ReportJsonRoundTripsExactly) {
    const fs::path dir = scratch("json");
    ASSERT_EQ(invoke(with_out({"verify", "--family", "max_perturbed", "--n-steps", "64", "--n-paths", "5"}, dir)).code, 0);
    const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
    EXPECT_EQ(j["study_kind"], "uniqueness_gap");
    EXPECT_EQ(j["parameters"]["command"], "verify");
    EXPECT_EQ(j["pass"], true);
    EXPECT_EQ(j["seeds"]["master_seed"], 1);
    EXPECT_EQ(j["seeds"]["n_paths"], 5);
    const auto c = cli::build_config({{"command", "verify"}, {"n_steps", "64"}, {"n_paths", "5"}});
    const auto report = uniqueness_gap_study(c.problem, 5, TimeGrid(1.0, 64), 1);
    for (const auto& [name, value] : report.metrics) EXPECT_EQ(j["metrics"][name].get<double>(), value) << name;
    EXPECT_TRUE(j["thresholds"].is_array());
    EXPECT_EQ(j["thresholds"][0]["comparison"], "<=");
}

TEST(Cli, SeventeenSignificantDigits) {
    const fs::path dir = scratch("digits");
    ASSERT_EQ(invoke(with_out(kSimulateExample, dir)).code, 0);
    const auto rows = read_csv(dir / "paths.csv");
    EXPECT_EQ(rows[2][2], "0.125");
    EXPECT_EQ(rows[2][3], format_double(generate_brownian(TimeGrid(1.0, 8), 7, 0)[1]));
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
    const fs::path a = scratch("repeat_a");
    const fs::path b = scratch("repeat_b");
    const std::vector<std::string> args = {"law", "--family", "reflected", "--b", "const0.5", "--law-kind",
                                           "girsanov_mean_one", "--n-steps", "64", "--n-paths", "500"};
    ASSERT_EQ(invoke(with_out(args, a)).code, 0);
    ASSERT_EQ(invoke(with_out(args, b)).code, 0);
    for (const char* f : {"paths.csv", "metrics.csv", "report.json"}) {
        EXPECT_FALSE(slurp(a / f).empty());
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
}

TEST(Cli, SamplePathsCap) {
    const fs::path dir = scratch("cap");
    ASSERT_EQ(invoke(with_out({"simulate", "--n-steps", "4", "--n-paths", "25"}, dir)).code, 0);
    EXPECT_EQ(read_csv(dir / "paths.csv").size(), 1u + 10u * 5u);
    EXPECT_EQ(read_csv(dir / "metrics.csv").size(), 1u + 25u);
    const fs::path dir2 = scratch("cap2");
    ASSERT_EQ(invoke(with_out({"simulate", "--n-steps", "4", "--n-paths", "25", "--sample-paths-out", "2"}, dir2)).code, 0);
    EXPECT_EQ(read_csv(dir2 / "paths.csv").size(), 1u + 2u * 5u);
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch("codes");
    const Outcome bad = invoke(with_out({"verify", "--family", "doubly", "--alpha", "0.5", "--beta", "0.5"}, dir));
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.err.find("|alpha*beta|/((1-alpha)(1-beta)) < 1"), std::string::npos) << bad.err;
    EXPECT_FALSE(fs::exists(dir / "report.json"));

    EXPECT_EQ(invoke({"simulate", "--family", "nope"}).code, 2);
    EXPECT_EQ(invoke({"simulate", "--sigma", "cubic:2"}).code, 2);
    EXPECT_EQ(invoke({"simulate", "--no-such-flag", "1"}).code, 2);
    EXPECT_EQ(invoke({"simulate", "--threshold", "nonsense"}).code, 2);
    EXPECT_EQ(invoke(with_out({"simulate", "--n-steps", "4", "--threshold", "no_such_metric=1"}, dir)).code, 2);

    const Outcome fail =
        invoke(with_out({"simulate", "--n-steps", "4", "--threshold", "max_identity_residual=-1"}, dir));
    EXPECT_EQ(fail.code, 1);
    const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
    EXPECT_EQ(j["pass"], false);

    EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
    const fs::path dir = scratch("config");
    fs::create_directories(dir);
    std::ofstream(dir / "run.cfg") << "# example\ncommand = simulate\nn_steps = 4\nn_paths = 3\nseed = 9\n"
                                   << "out_dir = " << (dir / "from_file").string() << "\n";
    ASSERT_EQ(invoke({"--config", (dir / "run.cfg").string(), "--n-paths", "2"}).code, 0);
    EXPECT_EQ(read_csv(dir / "from_file" / "metrics.csv").size(), 1u + 2u);
    const auto j = nlohmann::json::parse(slurp(dir / "from_file" / "report.json"));
    EXPECT_EQ(j["seeds"]["master_seed"], 9);
}

TEST(Cli, EnvironmentSetsDefaultOutputDirectory) {
    const fs::path dir = scratch("env");
    ::setenv("PERTSDE_OUT_DIR", dir.c_str(), 1);
    const Outcome o = invoke({"simulate", "--n-steps", "4", "--n-paths", "1"});
    ::unsetenv("PERTSDE_OUT_DIR");
    ASSERT_EQ(o.code, 0) << o.err;
    EXPECT_TRUE(fs::exists(dir / "report.json"));
    EXPECT_TRUE(fs::exists(dir / "paths.csv"));
}

TEST(Cli, FormatSelectsFiles) {
    const fs::path dir = scratch("format");
    ASSERT_EQ(invoke(with_out({"simulate", "--n-steps", "4", "--format", "json"}, dir)).code, 0);
    EXPECT_TRUE(fs::exists(dir / "report.json"));
    EXPECT_FALSE(fs::exists(dir / "paths.csv"));
}

TEST(Cli, HypothesisOnlyViolationWarns) {
    const fs::path dir = scratch("warn");
    const Outcome o =
        invoke(with_out({"simulate", "--family", "doubly", "--alpha", "-0.5", "--beta", "0.2", "--n-steps", "8"}, dir));
    EXPECT_EQ(o.code, 0);
    EXPECT_NE(o.err.find("warning: alpha = -0.5 outside (0, 1)"), std::string::npos) << o.err;
    const Outcome d =
        invoke(with_out({"simulate", "--family", "max_drift", "--max-drift", "atan:-1,0", "--n-steps", "8"}, dir));
    EXPECT_EQ(d.code, 0);
    EXPECT_NE(d.err.find("not flagged strictly increasing"), std::string::npos) << d.err;
}

TEST(Cli, BinaryExitStatus) {
    const fs::path dir = scratch("binary");
    const std::string ok = std::string(PERTSDE_TOOL) + " simulate --n-steps 4 --out-dir " + dir.string() + " >/dev/null";
    const std::string bad = std::string(PERTSDE_TOOL) + " verify --family doubly --alpha 0.5 --beta 0.5 2>/dev/null";
    EXPECT_EQ(WEXITSTATUS(std::system(ok.c_str())), 0);
    EXPECT_EQ(WEXITSTATUS(std::system(bad.c_str())), 2);
}
