#include "alne/experiment.hpp"

#include "alne/rng.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace alne;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json tiny_config_json(const std::string& out_dir) {
    return json{
        {"data",
         {{"synthetic",
           {{"classes", 3},
            {"points_per_class", 40},
            {"dimension", 8},
            {"cluster_spread", 0.08},
            {"center_spread", 1.0},
            {"seed", 99}}}}},
        {"noise", {{{"kind", "symmetric"}, {"rate", 0.3}}}},
        {"budgets", {{"raw", {24}}}},
        {"strategies", {{{"name", "probcover"}, {"delta", 0.5}}}},
        {"filters", {"ideal"}},
        {"policies", {"filter_then_train"}},
        {"seeds", {7}},
        {"probe", {{"epochs", 60}}},
        {"output_dir", out_dir},
        {"record_timing", false},
    };
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

int run_cli(const std::string& args) {
    const std::string command = std::string(ALNE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    return std::system(command.c_str());
}

}  // namespace

TEST_CASE("config validation names the offending field") {
    json bad = tiny_config_json("out");
    bad.erase("seeds");
    CHECK_THROWS_WITH_AS(parse_experiment_config(bad), doctest::Contains("config.seeds"),
                         std::invalid_argument);

    json bad_budget = tiny_config_json("out");
    bad_budget["budgets"] = {{"spc", {5}}, {"raw", {10}}};
    CHECK_THROWS_WITH_AS(parse_experiment_config(bad_budget), doctest::Contains("config.budgets"),
                         std::invalid_argument);

    json bad_filter = tiny_config_json("out");
    bad_filter["filters"] = {"not_a_filter"};
    CHECK_THROWS_WITH_AS(parse_experiment_config(bad_filter), doctest::Contains("config.filters"),
                         std::invalid_argument);
}

TEST_CASE("config hash ignores formatting but tracks meaning") {
    const json document = tiny_config_json("out");
    const ExperimentConfig a = parse_experiment_config(document);

    // reparse from a differently formatted dump
    const ExperimentConfig b = parse_experiment_config(json::parse(document.dump(4)));
    CHECK(config_hash(a) == config_hash(b));

    json changed = document;
    changed["noise"][0]["rate"] = 0.31;
    CHECK(config_hash(a) != config_hash(parse_experiment_config(changed)));

    json reordered = json::object();
    reordered["seeds"] = document["seeds"];  // insert in a different order
    for (const auto& [key, value] : document.items()) reordered[key] = value;
    CHECK(config_hash(a) == config_hash(parse_experiment_config(reordered)));
}

TEST_CASE("a 1x1x1 grid writes exactly one result row") {
    const std::string out_dir = scratch_dir("alne_grid_one");
    const ExperimentConfig config = parse_experiment_config(tiny_config_json(out_dir));
    const RunRecord record = run_experiment(config);
    CHECK(record.completed);
    CHECK(record.rows == 1);

    const std::string csv = slurp(record.csv_path);
    std::istringstream lines(csv);
    std::string header, row, extra;
    REQUIRE(std::getline(lines, header));
    CHECK(header ==
          "strategy,filter,noise_kind,noise_rate,budget,seed,policy,test_acc,delta_vs_random,"
          "precision,recall,q_hat,n_train_used,wall_ms");
    REQUIRE(std::getline(lines, row));
    CHECK(row.rfind("probcover,ideal,symmetric,0.3,24,7,filter_then_train,", 0) == 0);
    CHECK_FALSE(std::getline(lines, extra));
    CHECK(fs::exists(fs::path(out_dir) / "run_record.json"));
    fs::remove_all(out_dir);
}

TEST_CASE("identical configs produce byte-identical CSVs") {
    const std::string out_a = scratch_dir("alne_det_a");
    const std::string out_b = scratch_dir("alne_det_b");
    json document = tiny_config_json(out_a);
    document["strategies"] = {{{"name", "random"}},
                              {{"name", "npc"},
                               {"delta", 0.5},
                               {"nas", {{"filter", "ideal"}, {"b", 1}}}}};
    document["seeds"] = {1, 2};
    document["workers"] = 2;

    const RunRecord a = run_experiment(parse_experiment_config(document));
    document["output_dir"] = out_b;
    const RunRecord b = run_experiment(parse_experiment_config(document));
    CHECK(slurp(a.csv_path) == slurp(b.csv_path));
    CHECK(a.rows == 4);

    // the paired random delta is zero for the random rows themselves
    std::istringstream lines(slurp(a.csv_path));
    std::string line;
    std::getline(lines, line);  // header
    int random_rows = 0;
    while (std::getline(lines, line)) {
        if (line.rfind("random,", 0) == 0) {
            ++random_rows;
            CHECK(line.find(",0.000000,") != std::string::npos);
        }
    }
    CHECK(random_rows == 2);
    fs::remove_all(out_a);
    fs::remove_all(out_b);
}

TEST_CASE("cli: version and validation exit codes") {
    CHECK(run_cli("version") == 0);
    CHECK(run_cli("") != 0);                       // missing subcommand
    const int bad = run_cli("gen-synth --classes 1 --ppc 5 --dim 2 --out /tmp/alne_cli_bad");
    CHECK(WEXITSTATUS(bad) == 1);                  // validation error
}

TEST_CASE("cli: gen-synth, zero-rate inject-noise, exhaustive select, ideal filter") {
    const std::string dir = scratch_dir("alne_cli_flow");
    const std::string prefix = dir + "/pool";
    REQUIRE(run_cli("gen-synth --classes 3 --ppc 10 --dim 4 --seed 5 --out " + prefix) == 0);

    // rate 0 reproduces the truth file byte for byte
    REQUIRE(run_cli("inject-noise --embeddings " + prefix + ".alne --labels " + prefix +
                    ".labels --kind symmetric --rate 0 --seed 1 --out " + dir + "/noisy.labels") ==
            0);
    CHECK(slurp(prefix + ".labels") == slurp(dir + "/noisy.labels"));

    // budget N is a permutation of all indices
    REQUIRE(run_cli("select --embeddings " + prefix + ".alne --labels " + prefix +
                    ".labels --strategy probcover --delta 0.4 --budget 30 --seed 2 --out " + dir +
                    "/picks.txt") == 0);
    std::vector<int> picks = load_labels(dir + "/picks.txt");
    std::sort(picks.begin(), picks.end());
    REQUIRE(picks.size() == 30);
    for (int i = 0; i < 30; ++i) CHECK(picks[static_cast<size_t>(i)] == i);

    // ideal filter on a known-mask fixture reproduces the mask exactly
    REQUIRE(run_cli("inject-noise --embeddings " + prefix + ".alne --labels " + prefix +
                    ".labels --kind symmetric --rate 0.4 --seed 3 --out " + dir +
                    "/noisy40.labels") == 0);
    {
        std::ofstream indices(dir + "/indices.txt");
        for (int i = 0; i < 30; i += 2) indices << i << '\n';
    }
    REQUIRE(run_cli("filter --embeddings " + prefix + ".alne --labels " + prefix +
                    ".labels --noisy-labels " + dir + "/noisy40.labels --name ideal --indices " +
                    dir + "/indices.txt --out " + dir + "/verdict.txt") == 0);

    const std::vector<int> truth = load_labels(prefix + ".labels");
    const std::vector<int> noisy = load_labels(dir + "/noisy40.labels");
    std::istringstream verdict(slurp(dir + "/verdict.txt"));
    std::string line;
    int checked = 0;
    while (std::getline(verdict, line)) {
        std::istringstream fields(line);
        int index, observed;
        std::string label;
        fields >> index >> observed >> label;
        CHECK(observed == noisy[index]);
        CHECK(label == (noisy[index] != truth[index] ? "noisy" : "clean"));
        ++checked;
    }
    CHECK(checked == 15);
    fs::remove_all(dir);
}
