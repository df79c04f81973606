#include "alne/experiment.hpp"

#include "alne/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace alne {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- filter registry --------------------------------------------------------

const std::vector<std::string>& known_filter_names() {
    static const std::vector<std::string> names{
        "ideal",       "crossvalidation", "lowbudget_aum", "aum_known_rate",
        "knn",         "centroids",       "disagreenet",   "fine",
        "none",
    };
    return names;
}

BoundFilter bind_filter(const std::string& name, const EmbeddingPool& pool,
                        const Annotator& annotator, uint64_t seed, double noise_rate) {
    BoundFilter filter;
    filter.name = name;
    if (name == "ideal") {
        filter.ideal = true;
        filter.run = [&annotator](const std::vector<int>& labeled, const std::vector<int>&,
                                  const std::vector<int>&) {
            return filter_ideal(labeled, annotator);
        };
    } else if (name == "crossvalidation") {
        filter.run = [&pool, seed](const std::vector<int>& labeled,
                                   const std::vector<int>& observed, const std::vector<int>&) {
            CrossValidationConfig config;
            config.seed = seed;
            return filter_crossvalidation(pool, labeled, observed, config);
        };
    } else if (name == "lowbudget_aum") {
        filter.run = [&pool, seed](const std::vector<int>& labeled,
                                   const std::vector<int>& observed,
                                   const std::vector<int>& unlabeled) {
            AumConfig config;
            config.seed = seed;
            return filter_lowbudget_aum(pool, labeled, observed, unlabeled, config);
        };
    } else if (name == "aum_known_rate") {
        filter.run = [&pool, seed, noise_rate](const std::vector<int>& labeled,
                                               const std::vector<int>& observed,
                                               const std::vector<int>& unlabeled) {
            AumConfig config;
            config.seed = seed;
            return filter_aum_known_rate(pool, labeled, observed, unlabeled, noise_rate, config);
        };
    } else if (name == "knn") {
        filter.run = [&pool](const std::vector<int>& labeled, const std::vector<int>& observed,
                             const std::vector<int>&) {
            return filter_knn(pool, labeled, observed, pool.class_count);
        };
    } else if (name == "centroids") {
        filter.run = [&pool, seed](const std::vector<int>& labeled,
                                   const std::vector<int>& observed, const std::vector<int>&) {
            CentroidsConfig config;
            config.seed = seed;
            return filter_centroids_ransac(pool, labeled, observed, pool.class_count, config);
        };
    } else if (name == "disagreenet") {
        filter.run = [&pool, seed](const std::vector<int>& labeled,
                                   const std::vector<int>& observed, const std::vector<int>&) {
            DisagreeNetConfig config;
            config.seed = seed;
            return filter_disagreenet(pool, labeled, observed, pool.class_count, config);
        };
    } else if (name == "fine") {
        filter.run = [&pool](const std::vector<int>& labeled, const std::vector<int>& observed,
                             const std::vector<int>&) {
            return filter_fine(pool, labeled, observed, pool.class_count);
        };
    } else if (name == "none") {
        filter.run = [](const std::vector<int>& labeled, const std::vector<int>&,
                        const std::vector<int>&) {
            return make_verdict(labeled, std::vector<char>(labeled.size(), 0));
        };
    } else {
        throw std::invalid_argument("unknown filter: " + name);
    }
    return filter;
}

// ---- config parsing -----------------------------------------------------------

namespace {

[[noreturn]] void config_error(const std::string& field, const std::string& message) {
    throw std::invalid_argument("config." + field + ": " + message);
}

int require_int(const json& node, const std::string& field) {
    if (!node.contains(field) || !node[field].is_number_integer()) {
        config_error(field, "expected an integer");
    }
    return node[field].get<int>();
}

SyntheticSpec parse_synthetic(const json& node) {
    SyntheticSpec spec;
    spec.class_count = require_int(node, "classes");
    spec.points_per_class = require_int(node, "points_per_class");
    spec.dimension = require_int(node, "dimension");
    spec.cluster_spread = node.value("cluster_spread", 0.1);
    spec.center_spread = node.value("center_spread", 1.0);
    spec.seed = node.value("seed", uint64_t{0});
    if (spec.class_count < 2) config_error("data.synthetic.classes", "need at least 2 classes");
    if (spec.points_per_class < 1 || spec.dimension < 1) {
        config_error("data.synthetic", "counts must be positive");
    }
    if (spec.cluster_spread <= 0 || spec.center_spread <= 0) {
        config_error("data.synthetic", "spreads must be positive");
    }
    return spec;
}

StrategyConfig parse_strategy(const json& node, size_t position) {
    const std::string where = "strategies[" + std::to_string(position) + "]";
    if (!node.is_object() || !node.contains("name")) config_error(where, "expected {name: ...}");
    StrategyConfig strategy;
    strategy.label = node["name"].get<std::string>();

    std::string method;
    if (node.contains("method")) {
        method = node["method"].get<std::string>();
    } else if (strategy.label == "npc" || strategy.label == "weighted_npc") {
        method = "probcover";
    } else {
        method = strategy.label;  // random / probcover / coreset / maxherding
    }
    strategy.params.kind = strategy_kind_from_string(method);
    strategy.params.delta = node.value("delta", 0.5);
    strategy.params.delta_update = node.value("delta_update", true);
    strategy.params.delta_grid_size = node.value("delta_grid", 16);
    strategy.params.sigma = node.value("sigma", 1.0);
    if (strategy.params.delta <= 0) config_error(where + ".delta", "must be positive");
    if (strategy.params.sigma <= 0) config_error(where + ".sigma", "must be positive");

    strategy.nas = node.contains("nas") || strategy.label == "npc" ||
                   strategy.label == "weighted_npc";
    if (strategy.label == "weighted_npc") strategy.nas_config.weighted_mode = true;
    if (node.contains("nas")) {
        const json& nas = node["nas"];
        strategy.nas_filter = nas.value("filter", std::string("lowbudget_aum"));
        strategy.nas_config.inner_batch = nas.value("b", 0);
        strategy.nas_config.weighted_mode =
            nas.value("weighted", strategy.nas_config.weighted_mode);
        strategy.nas_config.warmup_budget = nas.value("warmup", 0);
        if (nas.contains("dropout") && !nas["dropout"].is_null()) {
            strategy.nas_config.use_noise_dropout = nas["dropout"].get<bool>();
        }
    }
    if (strategy.nas) {
        const auto& names = known_filter_names();
        if (std::find(names.begin(), names.end(), strategy.nas_filter) == names.end()) {
            config_error(where + ".nas.filter", "unknown filter " + strategy.nas_filter);
        }
    }
    return strategy;
}

LrSchedule schedule_from_string(const std::string& name) {
    if (name == "cosine") return LrSchedule::Cosine;
    if (name == "constant") return LrSchedule::Constant;
    config_error("probe.schedule", "expected cosine or constant");
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& document) {
    if (!document.is_object()) throw std::invalid_argument("config: expected a JSON object");
    ExperimentConfig config;

    if (!document.contains("data") || !document["data"].is_object()) {
        config_error("data", "required object");
    }
    const json& data = document["data"];
    if (data.contains("synthetic") == data.contains("files")) {
        config_error("data", "exactly one of synthetic/files is required");
    }
    if (data.contains("synthetic")) {
        config.data.synthetic = parse_synthetic(data["synthetic"]);
    } else {
        const json& files = data["files"];
        DataFilesConfig f;
        f.embeddings = files.value("embeddings", "");
        f.labels = files.value("labels", "");
        f.test_embeddings = files.value("test_embeddings", "");
        f.test_labels = files.value("test_labels", "");
        if (f.embeddings.empty() || f.labels.empty() || f.test_embeddings.empty() ||
            f.test_labels.empty()) {
            config_error("data.files",
                         "embeddings, labels, test_embeddings, test_labels are all required");
        }
        config.data.files = f;
    }
    config.data.test_fraction = document.value("test_fraction", 0.2);
    if (config.data.test_fraction <= 0 || config.data.test_fraction > 1) {
        config_error("test_fraction", "must be in (0, 1]");
    }

    if (!document.contains("noise") || !document["noise"].is_array() ||
        document["noise"].empty()) {
        config_error("noise", "required nonempty array");
    }
    for (const json& node : document["noise"]) {
        NoiseConfig noise;
        noise.kind = noise_kind_from_string(node.value("kind", std::string("none")));
        noise.rate = node.value("rate", 0.0);
        noise.transition = node.value("transition", std::string());
        noise.transition_probe_epochs = node.value("transition_probe_epochs", 5);
        if (node.contains("cluster_fraction")) {
            noise.cluster_fraction = node["cluster_fraction"].get<double>();
        }
        if (noise.kind != NoiseKind::None && (noise.rate < 0.0 || noise.rate >= 1.0)) {
            config_error("noise.rate", "must be in [0, 1)");
        }
        if (noise.kind == NoiseKind::Asymmetric && noise.transition.empty()) {
            config_error("noise.transition", "asymmetric noise needs a matrix path or \"auto\"");
        }
        config.noises.push_back(noise);
    }

    if (!document.contains("budgets") || !document["budgets"].is_object()) {
        config_error("budgets", "required object with spc or raw list");
    }
    const json& budgets = document["budgets"];
    if (budgets.contains("spc") == budgets.contains("raw")) {
        config_error("budgets", "exactly one of spc/raw is required");
    }
    const char* budget_key = budgets.contains("spc") ? "spc" : "raw";
    for (const json& value : budgets[budget_key]) {
        if (!value.is_number_integer() || value.get<int>() < 1) {
            config_error(std::string("budgets.") + budget_key, "entries must be positive integers");
        }
        (budgets.contains("spc") ? config.budgets_spc : config.budgets_raw)
            .push_back(value.get<int>());
    }

    if (!document.contains("strategies") || !document["strategies"].is_array() ||
        document["strategies"].empty()) {
        config_error("strategies", "required nonempty array");
    }
    std::set<std::string> labels;
    for (size_t i = 0; i < document["strategies"].size(); ++i) {
        StrategyConfig strategy = parse_strategy(document["strategies"][i], i);
        if (!labels.insert(strategy.label).second) {
            config_error("strategies", "duplicate name " + strategy.label);
        }
        config.strategies.push_back(std::move(strategy));
    }

    for (const json& name : document.value("filters", json::array({"none"}))) {
        const std::string filter = name.get<std::string>();
        const auto& names = known_filter_names();
        if (std::find(names.begin(), names.end(), filter) == names.end()) {
            config_error("filters", "unknown filter " + filter);
        }
        config.filters.push_back(filter);
    }
    if (config.filters.empty()) config_error("filters", "must not be empty");

    for (const json& node : document.value("policies", json::array({"filter_then_train"}))) {
        TrainPolicy policy;
        if (node.is_string()) {
            policy.mode = policy_from_string(node.get<std::string>());
        } else if (node.is_object()) {
            policy.mode = policy_from_string(node.value("mode", std::string()));
            if (node.contains("p")) policy.p = node["p"].get<double>();
        } else {
            config_error("policies", "entries must be strings or {mode, p}");
        }
        if (policy.p && (*policy.p <= 0.0 || *policy.p > 1.0)) {
            config_error("policies.p", "must be in (0, 1]");
        }
        config.policies.push_back(policy);
    }
    if (config.policies.empty()) config_error("policies", "must not be empty");

    if (!document.contains("seeds") || !document["seeds"].is_array() ||
        document["seeds"].empty()) {
        config_error("seeds", "required nonempty array");
    }
    for (const json& seed : document["seeds"]) config.seeds.push_back(seed.get<uint64_t>());

    if (document.contains("probe")) {
        const json& probe = document["probe"];
        config.eval_probe.epochs = probe.value("epochs", config.eval_probe.epochs);
        config.eval_probe.base_lr = probe.value("base_lr", config.eval_probe.base_lr);
        config.eval_probe.momentum = probe.value("momentum", config.eval_probe.momentum);
        config.eval_probe.weight_decay =
            probe.value("weight_decay", config.eval_probe.weight_decay);
        config.eval_probe.batch_size = probe.value("batch_size", config.eval_probe.batch_size);
        if (probe.contains("schedule")) {
            config.eval_probe.schedule = schedule_from_string(probe["schedule"].get<std::string>());
        }
    }

    config.output_dir = document.value("output_dir", std::string("out"));
    config.workers = document.value("workers", 1);
    config.record_timing = document.value("record_timing", true);
    if (config.workers < 1) config_error("workers", "must be at least 1");
    return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    json document;
    try {
        in >> document;
    } catch (const json::parse_error& error) {
        throw std::invalid_argument("config parse error: " + std::string(error.what()));
    }
    return parse_experiment_config(document);
}

json normalized_config(const ExperimentConfig& config) {
    json document;
    if (config.data.synthetic) {
        const SyntheticSpec& s = *config.data.synthetic;
        document["data"]["synthetic"] = {
            {"classes", s.class_count},         {"points_per_class", s.points_per_class},
            {"dimension", s.dimension},         {"cluster_spread", s.cluster_spread},
            {"center_spread", s.center_spread}, {"seed", s.seed}};
    } else {
        const DataFilesConfig& f = *config.data.files;
        document["data"]["files"] = {{"embeddings", f.embeddings},
                                     {"labels", f.labels},
                                     {"test_embeddings", f.test_embeddings},
                                     {"test_labels", f.test_labels}};
    }
    document["test_fraction"] = config.data.test_fraction;
    for (const NoiseConfig& noise : config.noises) {
        json node = {{"kind", to_string(noise.kind)}, {"rate", noise.rate}};
        if (!noise.transition.empty()) {
            node["transition"] = noise.transition;
            node["transition_probe_epochs"] = noise.transition_probe_epochs;
        }
        if (noise.cluster_fraction) node["cluster_fraction"] = *noise.cluster_fraction;
        document["noise"].push_back(node);
    }
    if (!config.budgets_spc.empty()) {
        document["budgets"]["spc"] = config.budgets_spc;
    } else {
        document["budgets"]["raw"] = config.budgets_raw;
    }
    for (const StrategyConfig& strategy : config.strategies) {
        json node = {{"name", strategy.label},
                     {"method", to_string(strategy.params.kind)},
                     {"delta", strategy.params.delta},
                     {"delta_update", strategy.params.delta_update},
                     {"delta_grid", strategy.params.delta_grid_size},
                     {"sigma", strategy.params.sigma}};
        if (strategy.nas) {
            node["nas"] = {{"filter", strategy.nas_filter},
                           {"b", strategy.nas_config.inner_batch},
                           {"weighted", strategy.nas_config.weighted_mode},
                           {"warmup", strategy.nas_config.warmup_budget}};
            if (strategy.nas_config.use_noise_dropout) {
                node["nas"]["dropout"] = *strategy.nas_config.use_noise_dropout;
            }
        }
        document["strategies"].push_back(node);
    }
    document["filters"] = config.filters;
    for (const TrainPolicy& policy : config.policies) {
        json node = {{"mode", to_string(policy.mode)}};
        if (policy.p) node["p"] = *policy.p;
        document["policies"].push_back(node);
    }
    document["seeds"] = config.seeds;
    document["probe"] = {
        {"epochs", config.eval_probe.epochs},
        {"base_lr", config.eval_probe.base_lr},
        {"momentum", config.eval_probe.momentum},
        {"weight_decay", config.eval_probe.weight_decay},
        {"batch_size", config.eval_probe.batch_size},
        {"schedule", config.eval_probe.schedule == LrSchedule::Cosine ? "cosine" : "constant"}};
    document["output_dir"] = config.output_dir;
    return document;
}

std::string config_hash(const ExperimentConfig& config) {
    const std::string canonical = normalized_config(config).dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : canonical) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char buffer[17];
    std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(h));
    return buffer;
}

// ---- grid execution -------------------------------------------------------------

namespace {

struct SelectionCell {
    size_t noise_index;
    size_t budget_index;
    size_t strategy_index;
    uint64_t seed;
    int budget = 0;
};

struct ResultRow {
    std::string strategy;
    std::string filter;
    std::string noise_kind;
    double noise_rate = 0.0;
    int budget = 0;
    uint64_t seed = 0;
    std::string policy;
    double test_acc = 0.0;
    std::optional<double> delta;
    std::optional<FilterMetrics> metrics;
    int n_train_used = 0;
    long long wall_ms = 0;
};

std::string format_double(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.6f", value);
    return buffer;
}

std::string format_rate(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.4g", value);
    return buffer;
}

std::string format_row(const ResultRow& row) {
    std::ostringstream out;
    out << row.strategy << ',' << row.filter << ',' << row.noise_kind << ','
        << format_rate(row.noise_rate) << ',' << row.budget << ',' << row.seed << ','
        << row.policy << ',' << format_double(row.test_acc) << ','
        << (row.delta ? format_double(*row.delta) : "") << ','
        << (row.metrics ? format_double(row.metrics->precision) : "") << ','
        << (row.metrics ? format_double(row.metrics->recall) : "") << ','
        << (row.metrics ? format_double(row.metrics->predicted_ratio) : "") << ','
        << row.n_train_used << ',' << row.wall_ms;
    return out.str();
}

constexpr const char* kCsvHeader =
    "strategy,filter,noise_kind,noise_rate,budget,seed,policy,test_acc,delta_vs_random,"
    "precision,recall,q_hat,n_train_used,wall_ms";

bool row_before(const ResultRow& a, const ResultRow& b) {
    if (a.strategy != b.strategy) return a.strategy < b.strategy;
    if (a.filter != b.filter) return a.filter < b.filter;
    if (a.noise_kind != b.noise_kind) return a.noise_kind < b.noise_kind;
    if (a.noise_rate != b.noise_rate) return a.noise_rate < b.noise_rate;
    if (a.budget != b.budget) return a.budget < b.budget;
    if (a.seed != b.seed) return a.seed < b.seed;
    return a.policy < b.policy;
}

Eigen::MatrixXd load_transition(const std::string& path, int classes) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open transition matrix " + path);
    Eigen::MatrixXd t(classes, classes);
    for (int i = 0; i < classes; ++i) {
        for (int j = 0; j < classes; ++j) {
            if (!(in >> t(i, j))) {
                throw std::runtime_error("transition matrix " + path + " is truncated");
            }
        }
    }
    return t;
}

std::string sanitize(std::string value) {
    for (char& c : value) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    }
    return value;
}

}  // namespace

ExperimentConfig smoke_preset() {
    json document = {
        {"data",
         {{"synthetic",
           {{"classes", 10},
            {"points_per_class", 200},
            {"dimension", 16},
            {"cluster_spread", 0.12},
            {"center_spread", 1.0},
            {"seed", 20260801}}}}},
        {"noise", {{{"kind", "symmetric"}, {"rate", 0.3}}}},
        {"budgets", {{"spc", {5}}}},
        {"strategies",
         {{{"name", "random"}},
          {{"name", "probcover"}, {"delta", 0.55}},
          {{"name", "npc"},
           {"delta", 0.55},
           {"nas", {{"filter", "lowbudget_aum"}}}}}},
        {"filters", {"lowbudget_aum"}},
        {"policies", {"filter_then_train"}},
        {"seeds", {1, 2, 3}},
        {"probe", {{"epochs", 300}}},
        {"output_dir", "out/smoke"},
        {"record_timing", false},
    };
    return parse_experiment_config(document);
}

RunRecord run_experiment(const ExperimentConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();

    // data
    EmbeddingPool pool;
    EmbeddingPool test_pool;
    if (config.data.synthetic) {
        pool = generate_synthetic(*config.data.synthetic);
        test_pool = generate_synthetic(
            synthetic_test_spec(*config.data.synthetic, config.data.test_fraction));
    } else {
        pool = load_embeddings(config.data.files->embeddings, config.data.files->labels);
        test_pool =
            load_embeddings(config.data.files->test_embeddings, config.data.files->test_labels);
    }

    fs::create_directories(config.output_dir);
    fs::create_directories(fs::path(config.output_dir) / "traces");
    const std::string csv_path = (fs::path(config.output_dir) / "results.csv").string();

    // annotators, one per (noise, seed); paired comparisons share realizations
    std::map<std::pair<size_t, uint64_t>, Annotator> annotators;
    for (size_t n = 0; n < config.noises.size(); ++n) {
        const NoiseConfig& noise = config.noises[n];
        for (uint64_t seed : config.seeds) {
            NoiseSpec spec;
            spec.kind = noise.kind;
            spec.rate = noise.rate;
            spec.cluster_fraction = noise.cluster_fraction;
            spec.seed = derive_seed(seed, "noise");
            if (noise.kind == NoiseKind::Asymmetric) {
                if (noise.transition == "auto") {
                    spec.transition = confusion_transition(pool, noise.transition_probe_epochs,
                                                           noise.rate, derive_seed(seed, "transition"))
                                          .transition;
                } else {
                    spec.transition = load_transition(noise.transition, pool.class_count);
                }
            }
            annotators.emplace(std::make_pair(n, seed), build_annotator(pool, spec));
        }
    }

    // selection cells: noise x budget x strategy x seed
    const size_t budget_count =
        config.budgets_spc.empty() ? config.budgets_raw.size() : config.budgets_spc.size();
    std::vector<SelectionCell> cells;
    for (size_t n = 0; n < config.noises.size(); ++n) {
        for (size_t b = 0; b < budget_count; ++b) {
            int budget = 0;
            if (!config.budgets_spc.empty()) {
                budget = budget_for_spc(config.budgets_spc[b], pool.class_count,
                                        config.noises[n].rate);
            } else {
                budget = config.budgets_raw[b];
            }
            if (budget > pool.size()) {
                config_error("budgets", "budget " + std::to_string(budget) + " exceeds pool size " +
                                            std::to_string(pool.size()));
            }
            for (size_t s = 0; s < config.strategies.size(); ++s) {
                for (uint64_t seed : config.seeds) {
                    cells.push_back({n, b, s, seed, budget});
                }
            }
        }
    }

    std::mutex sink_mutex;
    std::vector<ResultRow> rows;
    std::vector<std::string> trace_paths;
    std::ofstream partial(csv_path);
    if (!partial) throw std::runtime_error("cannot open " + csv_path + " for writing");
    partial << kCsvHeader << '\n';
    partial.flush();
    std::exception_ptr failure;

    const auto run_cell = [&](const SelectionCell& cell) {
        const NoiseConfig& noise = config.noises[cell.noise_index];
        const StrategyConfig& strategy = config.strategies[cell.strategy_index];
        const Annotator& annotator = annotators.at({cell.noise_index, cell.seed});

        const auto select_start = std::chrono::steady_clock::now();
        NasRun selection;
        if (strategy.nas) {
            NasConfig nas_config = strategy.nas_config;
            nas_config.seed = derive_seed(cell.seed, "nas");
            const BoundFilter nas_filter =
                bind_filter(strategy.nas_filter, pool, annotator,
                            derive_seed(cell.seed, "nas-filter"), noise.rate);
            selection = run_nas(pool, annotator, init_label_state(pool, cell.budget), nas_config,
                                strategy.params, nas_filter, cell.budget);
        } else {
            selection = run_plain(pool, annotator, init_label_state(pool, cell.budget),
                                  strategy.params, cell.budget, derive_seed(cell.seed, "select"));
        }
        const long long select_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                        std::chrono::steady_clock::now() - select_start)
                                        .count();

        // trace file per selection cell
        json trace_lines = json::array();
        for (const RoundTrace& trace : selection.traces) {
            trace_lines.push_back({{"round", trace.round},
                                   {"q_hat", trace.q_hat},
                                   {"eta", trace.eta},
                                   {"n_clean", trace.n_clean},
                                   {"n_noisy", trace.n_noisy},
                                   {"picks", trace.picks},
                                   {"delta", trace.delta},
                                   {"events", trace.events}});
        }
        std::ostringstream trace_name;
        trace_name << sanitize(strategy.label) << "__" << to_string(noise.kind) << '_'
                   << format_rate(noise.rate) << "__B" << cell.budget << "__seed" << cell.seed
                   << ".jsonl";
        const std::string trace_path =
            (fs::path(config.output_dir) / "traces" / trace_name.str()).string();
        {
            std::ofstream trace_out(trace_path);
            for (const json& line : trace_lines) trace_out << line.dump() << '\n';
        }

        // evaluations: filter x policy
        std::vector<ResultRow> cell_rows;
        for (const std::string& filter_name : config.filters) {
            const BoundFilter train_filter = bind_filter(
                filter_name, pool, annotator, derive_seed(cell.seed, "train-filter"), noise.rate);
            for (const TrainPolicy& policy : config.policies) {
                const auto eval_start = std::chrono::steady_clock::now();
                LinearProbeConfig probe = config.eval_probe;
                probe.seed = derive_seed(cell.seed, "eval-probe");
                const EvalResult eval = evaluate(pool, selection.state, annotator, policy,
                                                 test_pool, probe, &train_filter);
                const long long eval_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                              std::chrono::steady_clock::now() - eval_start)
                                              .count();

                ResultRow row;
                row.strategy = strategy.label;
                row.filter = filter_name;
                row.noise_kind = to_string(noise.kind);
                row.noise_rate = noise.rate;
                row.budget = cell.budget;
                row.seed = cell.seed;
                row.policy = to_string(policy.mode);
                row.test_acc = eval.test_accuracy;
                row.metrics = eval.metrics;
                row.n_train_used = eval.n_train_used;
                row.wall_ms = config.record_timing ? select_ms + eval_ms : 0;
                cell_rows.push_back(std::move(row));
            }
        }

        std::lock_guard<std::mutex> hold(sink_mutex);
        for (ResultRow& row : cell_rows) {
            partial << format_row(row) << '\n';
            rows.push_back(std::move(row));
        }
        partial.flush();
        trace_paths.push_back(trace_path);
    };

    if (config.workers <= 1) {
        for (const SelectionCell& cell : cells) run_cell(cell);
    } else {
        std::vector<std::thread> workers;
        std::mutex queue_mutex;
        size_t next = 0;
        const int worker_count =
            std::min<int>(config.workers, static_cast<int>(cells.size()));
        for (int w = 0; w < worker_count; ++w) {
            workers.emplace_back([&] {
                for (;;) {
                    size_t mine;
                    {
                        std::lock_guard<std::mutex> hold(queue_mutex);
                        if (next >= cells.size() || failure) return;
                        mine = next++;
                    }
                    try {
                        run_cell(cells[mine]);
                    } catch (...) {
                        std::lock_guard<std::mutex> hold(queue_mutex);
                        if (!failure) failure = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (std::thread& worker : workers) worker.join();
        if (failure) std::rethrow_exception(failure);
    }

    // paired deltas against the random baseline, then the deterministic rewrite
    const auto random_strategy =
        std::find_if(config.strategies.begin(), config.strategies.end(), [](const auto& s) {
            return !s.nas && s.params.kind == StrategyKind::Random;
        });
    if (random_strategy != config.strategies.end()) {
        std::map<std::string, double> random_acc;
        const auto key = [](const ResultRow& row) {
            return row.filter + '|' + row.noise_kind + '|' + format_rate(row.noise_rate) + '|' +
                   std::to_string(row.budget) + '|' + std::to_string(row.seed) + '|' + row.policy;
        };
        for (const ResultRow& row : rows) {
            if (row.strategy == random_strategy->label) random_acc[key(row)] = row.test_acc;
        }
        for (ResultRow& row : rows) {
            const auto it = random_acc.find(key(row));
            if (it != random_acc.end()) row.delta = row.test_acc - it->second;
        }
    }
    std::sort(rows.begin(), rows.end(), row_before);

    partial.close();
    {
        std::ofstream out(csv_path);
        out << kCsvHeader << '\n';
        for (const ResultRow& row : rows) out << format_row(row) << '\n';
        if (!out) throw std::runtime_error("short write to " + csv_path);
    }

    RunRecord record;
    record.config_hash = config_hash(config);
    record.tool_version = kToolVersion;
    record.csv_path = csv_path;
    record.trace_paths = trace_paths;
    record.rows = static_cast<int>(rows.size());
    record.completed = true;
    {
        json meta = {{"config_hash", record.config_hash},
                     {"tool_version", record.tool_version},
                     {"csv", record.csv_path},
                     {"rows", record.rows},
                     {"completed", true}};
        std::ofstream out(fs::path(config.output_dir) / "run_record.json");
        out << meta.dump(2) << '\n';
    }

    // summary to stdout: mean accuracy and delta per strategy x budget
    std::map<std::pair<std::string, int>, std::pair<double, int>> acc_sum;
    std::map<std::pair<std::string, int>, std::pair<double, int>> delta_sum;
    for (const ResultRow& row : rows) {
        auto& a = acc_sum[{row.strategy, row.budget}];
        a.first += row.test_acc;
        a.second += 1;
        if (row.delta) {
            auto& d = delta_sum[{row.strategy, row.budget}];
            d.first += *row.delta;
            d.second += 1;
        }
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "config " << record.config_hash << ": " << record.rows << " rows in "
              << format_double(wall) << "s -> " << csv_path << '\n';
    std::cout << "strategy            budget  mean_acc  mean_delta\n";
    for (const auto& [key, value] : acc_sum) {
        const double mean_acc = value.first / value.second;
        std::string delta = "-";
        if (const auto it = delta_sum.find(key); it != delta_sum.end()) {
            delta = format_double(it->second.first / it->second.second);
        }
        std::printf("%-18s %7d  %.6f  %s\n", key.first.c_str(), key.second, mean_acc,
                    delta.c_str());
    }
    return record;
}

}  // namespace alne
