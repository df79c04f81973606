// alne: active-learning experiments on embedding pools with a noisy annotator.

#include "alne/experiment.hpp"
#include "alne/rng.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct PoolArgs {
    std::string embeddings;
    std::string labels;
    std::string noisy_labels;  // optional; defaults to the true labels

    alne::EmbeddingPool load() const {
        return alne::load_embeddings(embeddings, labels);
    }
    alne::Annotator annotator(const alne::EmbeddingPool& pool) const {
        if (noisy_labels.empty()) {
            return alne::annotator_from_labels(pool, pool.true_labels);
        }
        return alne::annotator_from_labels(pool, alne::load_labels(noisy_labels));
    }
};

void add_pool_options(CLI::App* cmd, PoolArgs& args, bool with_noisy) {
    cmd->add_option("--embeddings", args.embeddings, "ALNE embeddings file")->required();
    cmd->add_option("--labels", args.labels, "true labels file")->required();
    if (with_noisy) {
        cmd->add_option("--noisy-labels", args.noisy_labels,
                        "observed labels file (defaults to the true labels)");
    }
}

std::vector<int> read_index_file(const std::string& path) {
    return alne::load_labels(path);  // same one-integer-per-line format
}

int run_gen_synth(const alne::SyntheticSpec& spec, const std::string& out_prefix) {
    const alne::EmbeddingPool pool = alne::generate_synthetic(spec);
    alne::save_embeddings(pool, out_prefix + ".alne", out_prefix + ".labels");
    std::cout << "wrote " << out_prefix << ".alne (" << pool.size() << " x " << pool.dim()
              << ") and " << out_prefix << ".labels\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"active learning with a noisy annotator on embedding pools"};
    app.require_subcommand(1);

    // gen-synth
    auto* gen = app.add_subcommand("gen-synth", "generate a synthetic embedding pool");
    alne::SyntheticSpec spec;
    std::string gen_out = "pool";
    gen->add_option("--classes", spec.class_count, "number of classes")->required();
    gen->add_option("--ppc", spec.points_per_class, "points per class")->required();
    gen->add_option("--dim", spec.dimension, "embedding dimension")->required();
    gen->add_option("--cluster-spread", spec.cluster_spread, "per-class stddev");
    gen->add_option("--center-spread", spec.center_spread, "class center scale");
    gen->add_option("--seed", spec.seed, "generation seed");
    gen->add_option("--out", gen_out, "output prefix (.alne/.labels)");

    // inject-noise
    auto* inject = app.add_subcommand("inject-noise", "write noisy labels for a pool");
    PoolArgs inject_pool;
    add_pool_options(inject, inject_pool, false);
    std::string noise_kind = "symmetric";
    double noise_rate = 0.0;
    std::string transition_path;
    double cluster_fraction = -1.0;
    uint64_t inject_seed = 0;
    std::string inject_out = "noisy.labels";
    int transition_epochs = 5;
    inject->add_option("--kind", noise_kind, "none|symmetric|asymmetric|instance_dependent");
    inject->add_option("--rate", noise_rate, "noise rate in [0,1)");
    inject->add_option("--transition", transition_path,
                       "asymmetric transition matrix file, or 'auto'");
    inject->add_option("--transition-epochs", transition_epochs,
                       "weak-probe epochs for --transition auto");
    inject->add_option("--cluster-fraction", cluster_fraction,
                       "instance-dependent: fraction of anchor regions made noisy");
    inject->add_option("--seed", inject_seed, "noise seed");
    inject->add_option("--out", inject_out, "output labels file");

    // select
    auto* select = app.add_subcommand("select", "run a selection strategy to a budget");
    PoolArgs select_pool;
    add_pool_options(select, select_pool, true);
    std::string strategy_name = "probcover";
    int select_budget = 0;
    int select_spc = 0;
    double select_rate_hint = 0.0;
    double delta = 0.5;
    bool no_delta_update = false;
    double sigma = 1.0;
    bool use_nas = false;
    std::string nas_filter = "lowbudget_aum";
    int nas_b = 0;
    bool nas_weighted = false;
    int nas_warmup = 0;
    std::string dropout_mode = "auto";
    uint64_t select_seed = 0;
    std::string select_out = "picks.txt";
    std::string trace_out;
    select->add_option("--strategy", strategy_name, "random|probcover|coreset|maxherding");
    select->add_option("--budget", select_budget, "annotation budget B");
    select->add_option("--spc", select_spc, "budget as expected clean samples per class");
    select->add_option("--rate-hint", select_rate_hint, "noise rate for --spc expansion");
    select->add_option("--delta", delta, "probcover ball radius");
    select->add_flag("--no-delta-update", no_delta_update, "disable radius re-selection");
    select->add_option("--sigma", sigma, "maxherding kernel lengthscale");
    select->add_flag("--nas", use_nas, "wrap the strategy in the NAS loop");
    select->add_option("--filter", nas_filter, "NAS noise filter");
    select->add_option("--b", nas_b, "NAS inner batch (0: C, or 1 for ideal)");
    select->add_flag("--weighted", nas_weighted, "weighted NPC reweighing");
    select->add_option("--warmup", nas_warmup, "plain-strategy budget before NAS engages");
    select->add_option("--dropout", dropout_mode, "noise dropout: auto|on|off");
    select->add_option("--seed", select_seed, "selection seed");
    select->add_option("--out", select_out, "picked indices file");
    select->add_option("--trace", trace_out, "round trace JSONL file");

    // filter
    auto* filter_cmd = app.add_subcommand("filter", "run a noise filter on a labeled subset");
    PoolArgs filter_pool;
    add_pool_options(filter_cmd, filter_pool, true);
    std::string filter_name = "knn";
    std::string filter_indices;
    double known_rate = 0.0;
    uint64_t filter_seed = 0;
    std::string filter_out = "verdict.txt";
    filter_cmd->add_option("--name", filter_name, "filter name")->required();
    filter_cmd->add_option("--indices", filter_indices, "file with labeled indices, one per line")
        ->required();
    filter_cmd->add_option("--known-rate", known_rate, "noise prior for aum_known_rate");
    filter_cmd->add_option("--seed", filter_seed, "filter seed");
    filter_cmd->add_option("--out", filter_out, "verdict output file");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "train/evaluate a probe for a labeled subset");
    PoolArgs eval_pool;
    add_pool_options(eval_cmd, eval_pool, true);
    std::string eval_indices;
    std::string test_embeddings, test_labels;
    std::string policy_name = "filter_then_train";
    double policy_p = -1.0;
    std::string eval_filter = "none";
    int eval_epochs = 500;
    uint64_t eval_seed = 0;
    std::string eval_out = "eval.csv";
    eval_cmd->add_option("--indices", eval_indices, "labeled indices file")->required();
    eval_cmd->add_option("--test-embeddings", test_embeddings, "held-out ALNE file")->required();
    eval_cmd->add_option("--test-labels", test_labels, "held-out labels file")->required();
    eval_cmd->add_option("--policy", policy_name, "filter_then_train|all_samples|top_p_confident");
    eval_cmd->add_option("--p", policy_p, "fraction for top_p_confident");
    eval_cmd->add_option("--filter", eval_filter, "train-time filter");
    eval_cmd->add_option("--epochs", eval_epochs, "probe epochs");
    eval_cmd->add_option("--seed", eval_seed, "probe/filter seed");
    eval_cmd->add_option("--out", eval_out, "output CSV row file");

    // run-experiment
    auto* run = app.add_subcommand("run-experiment", "execute a full experiment grid");
    std::string config_path;
    std::string preset;
    std::string run_out_override;
    uint64_t run_seed = 0;
    bool have_run_seed = false;
    run->add_option("--config", config_path, "experiment config JSON");
    run->add_option("--preset", preset, "built-in preset: smoke");
    run->add_option("--out", run_out_override, "override the config output_dir");
    run->add_option("--seed", run_seed, "replace the config seed list with one seed")
        ->each([&](const std::string&) { have_run_seed = true; });

    auto* version = app.add_subcommand("version", "print the tool version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& error) {
        const int code = app.exit(error);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*version) {
            std::cout << "alne " << alne::kToolVersion << '\n';
            return 0;
        }

        if (*gen) return run_gen_synth(spec, gen_out);

        if (*inject) {
            const alne::EmbeddingPool pool = inject_pool.load();
            alne::NoiseSpec noise;
            noise.kind = alne::noise_kind_from_string(noise_kind);
            noise.rate = noise_rate;
            noise.seed = inject_seed;
            if (cluster_fraction >= 0.0) noise.cluster_fraction = cluster_fraction;
            if (noise.kind == alne::NoiseKind::Asymmetric) {
                if (transition_path == "auto") {
                    const auto estimate = alne::confusion_transition(
                        pool, transition_epochs, noise_rate, inject_seed);
                    for (const std::string& note : estimate.notes) {
                        std::cerr << "note: " << note << '\n';
                    }
                    noise.transition = estimate.transition;
                } else if (!transition_path.empty()) {
                    std::ifstream in(transition_path);
                    if (!in) throw std::runtime_error("cannot open " + transition_path);
                    Eigen::MatrixXd t(pool.class_count, pool.class_count);
                    for (int i = 0; i < pool.class_count; ++i)
                        for (int j = 0; j < pool.class_count; ++j)
                            if (!(in >> t(i, j)))
                                throw std::runtime_error(transition_path + " is truncated");
                    noise.transition = t;
                } else {
                    throw std::invalid_argument("asymmetric noise needs --transition");
                }
            }
            const alne::Annotator annotator = alne::build_annotator(pool, noise);
            alne::save_labels(annotator.noisy_labels(), inject_out);
            std::cout << "wrote " << inject_out << " (realized noise rate "
                      << annotator.realized_noise_rate() << ")\n";
            return 0;
        }

        if (*select) {
            const alne::EmbeddingPool pool = select_pool.load();
            const alne::Annotator annotator = select_pool.annotator(pool);
            int budget = select_budget;
            if (budget <= 0 && select_spc > 0) {
                budget = alne::budget_for_spc(select_spc, pool.class_count, select_rate_hint);
            }
            if (budget <= 0) throw std::invalid_argument("provide --budget or --spc");

            alne::StrategyParams params;
            params.kind = alne::strategy_kind_from_string(strategy_name);
            params.delta = delta;
            params.delta_update = !no_delta_update;
            params.sigma = sigma;

            alne::NasRun result;
            if (use_nas) {
                alne::NasConfig nas;
                nas.inner_batch = nas_b;
                nas.weighted_mode = nas_weighted;
                nas.warmup_budget = nas_warmup;
                nas.seed = alne::derive_seed(select_seed, "nas");
                if (dropout_mode == "on") nas.use_noise_dropout = true;
                if (dropout_mode == "off") nas.use_noise_dropout = false;
                const alne::BoundFilter bound = alne::bind_filter(
                    nas_filter, pool, annotator, alne::derive_seed(select_seed, "nas-filter"),
                    select_rate_hint);
                result = alne::run_nas(pool, annotator, alne::init_label_state(pool, budget), nas,
                                       params, bound, budget);
            } else {
                result = alne::run_plain(pool, annotator, alne::init_label_state(pool, budget),
                                         params, budget, alne::derive_seed(select_seed, "select"));
            }

            std::ofstream out(select_out);
            if (!out) throw std::runtime_error("cannot open " + select_out);
            for (const auto& [round, index] : result.state.query_log()) out << index << '\n';
            if (!trace_out.empty()) {
                std::ofstream trace(trace_out);
                for (const alne::RoundTrace& t : result.traces) {
                    const json line = {{"round", t.round},     {"q_hat", t.q_hat},
                                       {"eta", t.eta},         {"n_clean", t.n_clean},
                                       {"n_noisy", t.n_noisy}, {"picks", t.picks},
                                       {"delta", t.delta},     {"events", t.events}};
                    trace << line.dump() << '\n';
                }
            }
            std::cout << "picked " << result.state.labeled().size() << " samples -> " << select_out
                      << '\n';
            return 0;
        }

        if (*filter_cmd) {
            const alne::EmbeddingPool pool = filter_pool.load();
            const alne::Annotator annotator = filter_pool.annotator(pool);
            std::vector<int> labeled = read_index_file(filter_indices);
            std::sort(labeled.begin(), labeled.end());
            std::vector<int> observed;
            observed.reserve(labeled.size());
            for (int index : labeled) observed.push_back(annotator.annotate_one(index));
            std::vector<int> unlabeled;
            for (int i = 0; i < pool.size(); ++i) {
                if (!std::binary_search(labeled.begin(), labeled.end(), i)) {
                    unlabeled.push_back(i);
                }
            }
            const alne::BoundFilter bound =
                alne::bind_filter(filter_name, pool, annotator, filter_seed, known_rate);
            const alne::FilterVerdict verdict = bound.run(labeled, observed, unlabeled);
            std::ofstream out(filter_out);
            if (!out) throw std::runtime_error("cannot open " + filter_out);
            for (const std::string& line : alne::format_verdict(verdict, labeled, observed)) {
                out << line << '\n';
            }
            std::cout << "q_hat " << verdict.predicted_noise_ratio << " -> " << filter_out << '\n';
            return 0;
        }

        if (*eval_cmd) {
            const alne::EmbeddingPool pool = eval_pool.load();
            const alne::Annotator annotator = eval_pool.annotator(pool);
            const alne::EmbeddingPool test_pool =
                alne::load_embeddings(test_embeddings, test_labels);
            std::vector<int> labeled = read_index_file(eval_indices);
            std::sort(labeled.begin(), labeled.end());

            alne::LabelState state = alne::init_label_state(pool, static_cast<int>(labeled.size()));
            std::vector<int> labels;
            for (int index : labeled) labels.push_back(annotator.annotate_one(index));
            state.record_round(0, labeled, labels);

            alne::TrainPolicy policy;
            policy.mode = alne::policy_from_string(policy_name);
            if (policy_p > 0.0) policy.p = policy_p;

            alne::LinearProbeConfig probe;
            probe.epochs = eval_epochs;
            probe.seed = alne::derive_seed(eval_seed, "eval-probe");
            const alne::BoundFilter bound = alne::bind_filter(
                eval_filter, pool, annotator, alne::derive_seed(eval_seed, "train-filter"), 0.0);

            const alne::EvalResult result =
                alne::evaluate(pool, state, annotator, policy, test_pool, probe, &bound);
            std::ofstream out(eval_out);
            out << "policy,filter,test_acc,q_hat,precision,recall,n_train_used\n";
            out << policy_name << ',' << eval_filter << ',' << result.test_accuracy << ','
                << (result.metrics ? std::to_string(result.metrics->predicted_ratio) : "") << ','
                << (result.metrics ? std::to_string(result.metrics->precision) : "") << ','
                << (result.metrics ? std::to_string(result.metrics->recall) : "") << ','
                << result.n_train_used << '\n';
            std::cout << "test_acc " << result.test_accuracy << " (n_train " << result.n_train_used
                      << ") -> " << eval_out << '\n';
            return 0;
        }

        if (*run) {
            alne::ExperimentConfig config;
            if (preset == "smoke") {
                config = alne::smoke_preset();
            } else if (!preset.empty()) {
                throw std::invalid_argument("unknown preset: " + preset);
            } else if (!config_path.empty()) {
                config = alne::load_experiment_config(config_path);
            } else {
                throw std::invalid_argument("provide --config or --preset");
            }
            if (!run_out_override.empty()) config.output_dir = run_out_override;
            if (have_run_seed) config.seeds = {run_seed};
            alne::run_experiment(config);
            return 0;
        }
    } catch (const std::invalid_argument& error) {
        std::cerr << "error: " << error.what() << '\n';
        return 1;
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << '\n';
        return 2;
    }
    return 0;
}
