// arprl — adversarially robust and privacy-preserving representation
// learning: data generation, the min-max training loop, evaluation with
// attack/advantage metrics, hyperparameter sweeps and oracle verification.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "arprl/data.hpp"
#include "arprl/eval.hpp"
#include "arprl/rng.hpp"
#include "arprl/run_config.hpp"
#include "arprl/train.hpp"
#include "arprl/verify.hpp"

namespace fs = std::filesystem;
using namespace arprl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int run_guarded(const std::function<void()>& configure, const std::function<void()>& compute) {
    try {
        configure();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        compute();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

std::vector<double> parse_grid(const std::string& csv, const std::string& flag) {
    std::vector<double> out;
    std::string cur;
    for (char ch : csv + ",") {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(parse_double(cur));
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(ch))) {
            cur += ch;
        }
    }
    if (out.empty()) throw std::invalid_argument(flag + ": empty grid");
    return out;
}

Dataset generate_dataset(const RunConfig& cfg, const std::string& out_path) {
    if (cfg.data_kind == "circles") return gen_circles(cfg.data_n, cfg.data_seed);
    if (cfg.data_kind == "tabular") {
        const std::string csv = out_path + ".csv";
        write_synthetic_census_csv(csv, cfg.data_n, cfg.data_seed);
        return load_tabular(csv, synthetic_census_schema("sex"), cfg.data_seed);
    }
    throw std::invalid_argument("unknown data kind '" + cfg.data_kind +
                                "' (expected circles or tabular)");
}

struct SweepRow {
    MetricsReport metrics;
    int seed_index = 0;
};

void write_sweep_csv(std::vector<SweepRow>& rows, const std::string& path) {
    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.metrics.alpha != b.metrics.alpha) return a.metrics.alpha < b.metrics.alpha;
        if (a.metrics.beta != b.metrics.beta) return a.metrics.beta < b.metrics.beta;
        return a.seed_index < b.seed_index;
    });

    // per-(alpha, beta) mean and stddev, repeated on each row of the point
    auto stats = [&rows](std::size_t begin, std::size_t end, auto field) {
        double mean = 0.0;
        for (std::size_t i = begin; i < end; ++i) mean += field(rows[i].metrics);
        mean /= static_cast<double>(end - begin);
        double var = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            const double d = field(rows[i].metrics) - mean;
            var += d * d;
        }
        var /= static_cast<double>(end - begin);
        return std::pair<double, double>(mean, std::sqrt(var));
    };

    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << metrics_csv_header()
       << ",test_acc_mean,test_acc_std,robust_acc_mean,robust_acc_std,infer_acc_mean,"
          "infer_acc_std,gap_mean,gap_std,advantage_mean,advantage_std\n";
    std::size_t begin = 0;
    while (begin < rows.size()) {
        std::size_t end = begin;
        while (end < rows.size() && rows[end].metrics.alpha == rows[begin].metrics.alpha &&
               rows[end].metrics.beta == rows[begin].metrics.beta)
            ++end;
        const auto t = stats(begin, end, [](const MetricsReport& m) { return m.test_acc; });
        const auto r = stats(begin, end, [](const MetricsReport& m) { return m.robust_acc; });
        const auto inf = stats(begin, end, [](const MetricsReport& m) { return m.infer_acc; });
        const auto g = stats(begin, end, [](const MetricsReport& m) { return m.infer_gap; });
        const auto adv = stats(begin, end, [](const MetricsReport& m) { return m.advantage; });
        for (std::size_t i = begin; i < end; ++i) {
            os << metrics_csv_row(rows[i].metrics) << "," << format_double(t.first) << ","
               << format_double(t.second) << "," << format_double(r.first) << ","
               << format_double(r.second) << "," << format_double(inf.first) << ","
               << format_double(inf.second) << "," << format_double(g.first) << ","
               << format_double(g.second) << "," << format_double(adv.first) << ","
               << format_double(adv.second) << "\n";
        }
        begin = end;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarially robust and privacy-preserving representation learning"};
    app.require_subcommand(1);

    // --- gen-data ---
    auto* gen = app.add_subcommand("gen-data", "generate a dataset cache");
    std::string gen_kind = "circles", gen_out;
    std::uint64_t gen_seed = 7;
    int gen_n = 5000;
    gen->add_option("--kind", gen_kind, "circles | tabular")->capture_default_str();
    gen->add_option("--out", gen_out, "output cache path")->required();
    gen->add_option("--seed", gen_seed, "generation seed")->capture_default_str();
    gen->add_option("--n", gen_n, "samples per class (circles) or rows (tabular)")
        ->capture_default_str();

    // --- train ---
    auto* tr = app.add_subcommand("train", "run the min-max training loop");
    std::string tr_config, tr_data, tr_outdir;
    double tr_alpha = -1.0, tr_beta = -1.0, tr_eps = -1.0;
    int tr_epochs = -1;
    std::uint64_t tr_seed = 0;
    tr->add_option("--config", tr_config, "run configuration file");
    tr->add_option("--data", tr_data, "dataset cache path")->required();
    tr->add_option("--out-dir", tr_outdir, "output directory")->required();
    tr->add_option("--alpha", tr_alpha, "privacy weight override");
    tr->add_option("--beta", tr_beta, "robustness weight override");
    tr->add_option("--epsilon", tr_eps, "perturbation budget override");
    tr->add_option("--epochs", tr_epochs, "global epoch override");
    tr->add_option("--seed", tr_seed, "seed override");

    // --- eval ---
    auto* ev = app.add_subcommand("eval", "evaluate a trained checkpoint");
    std::string ev_ckpt, ev_data, ev_report, ev_config;
    double ev_eps = -1.0;
    std::uint64_t ev_seed = 0;
    bool ev_bounds = false, ev_proj = false;
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
    ev->add_option("--data", ev_data, "dataset cache path")->required();
    ev->add_option("--report", ev_report, "metrics report path (.csv)")->required();
    ev->add_option("--config", ev_config, "run configuration file");
    ev->add_option("--attack-eps", ev_eps, "evaluation attack budget");
    ev->add_option("--seed", ev_seed, "probe-training seed")->capture_default_str();
    ev->add_flag("--bounds", ev_bounds, "also compute the theorem bound report");
    ev->add_flag("--projection", ev_proj, "export the 2-component projection");

    // --- sweep ---
    auto* sw = app.add_subcommand("sweep", "train/eval a grid of (alpha, beta) points");
    std::string sw_config, sw_data, sw_out, sw_alphas, sw_betas;
    int sw_seeds = 1, sw_jobs = static_cast<int>(std::thread::hardware_concurrency());
    sw->add_option("--config", sw_config, "run configuration file");
    sw->add_option("--data", sw_data, "dataset cache path")->required();
    sw->add_option("--alphas", sw_alphas, "comma-separated alpha grid")->required();
    sw->add_option("--betas", sw_betas, "comma-separated beta grid (paired, or one value)")
        ->required();
    sw->add_option("--seeds", sw_seeds, "seeds per grid point")->capture_default_str();
    sw->add_option("--out", sw_out, "consolidated csv path")->required();
    sw->add_option("--jobs", sw_jobs, "worker threads")->capture_default_str();

    // --- verify ---
    auto* vf = app.add_subcommand("verify", "run the oracle verification suites");
    std::string vf_suite = "all";
    std::uint64_t vf_seed = 1234;
    int vf_count = 100;
    vf->add_option("--suite", vf_suite, "gradients | mi-oracles | bounds-discrete | all")
        ->capture_default_str();
    vf->add_option("--seed", vf_seed, "suite seed")->capture_default_str();
    vf->add_option("--count", vf_count, "instances per randomized check")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (gen->parsed()) {
        RunConfig cfg;
        return run_guarded(
            [&] {
                cfg.data_kind = gen_kind;
                cfg.data_n = gen_n;
                cfg.data_seed = gen_seed;
                if (cfg.data_kind != "circles" && cfg.data_kind != "tabular")
                    throw std::invalid_argument("--kind must be circles or tabular, got '" +
                                                gen_kind + "'");
                write_resolved_config(cfg, gen_out + ".resolved.ini");
            },
            [&] {
                const Dataset d = generate_dataset(cfg, gen_out);
                save_dataset_cache(d, gen_out);
                std::cout << "wrote " << d.n_rows() << " rows (" << d.n_features()
                          << " features) to " << gen_out << "\n";
            });
    }

    if (tr->parsed()) {
        RunConfig cfg;
        return run_guarded(
            [&] {
                if (!tr_config.empty()) cfg = parse_run_config(tr_config);
                if (tr_alpha >= 0.0) cfg.train.alpha = tr_alpha;
                if (tr_beta >= 0.0) cfg.train.beta = tr_beta;
                if (tr_eps >= 0.0) cfg.train.epsilon = tr_eps;
                if (tr_epochs > 0) cfg.train.global_epochs = tr_epochs;
                if (tr->count("--seed") > 0) cfg.train.seed = tr_seed;
                cfg.train.validate();
                fs::create_directories(tr_outdir);
                write_resolved_config(cfg, tr_outdir + "/resolved-config.ini");
            },
            [&] {
                const Dataset d = load_dataset_cache(tr_data);
                const TrainResult res = train(d, cfg.train, tr_outdir);
                std::cout << "trained " << res.log.size() << " epochs; final objective "
                          << format_double(res.log.back().objective) << "\n"
                          << "checkpoint: " << tr_outdir << "/ckpt-final.txt\n";
            });
    }

    if (ev->parsed()) {
        RunConfig cfg;
        return run_guarded(
            [&] {
                if (!ev_config.empty()) cfg = parse_run_config(ev_config);
                if (ev_eps >= 0.0) cfg.attack.epsilon = ev_eps;
                if (ev_bounds) cfg.eval_bounds = true;
                if (ev_proj) cfg.export_projection = true;
                cfg.attack.validate();
                write_resolved_config(cfg, ev_report + ".resolved.ini");
            },
            [&] {
                const ModelBundle bundle = load_checkpoint(ev_ckpt);
                const Dataset d = load_dataset_cache(ev_data);
                const MetricsReport m = evaluate_metrics(bundle, d, cfg.attack, ev_seed);
                write_metrics_csv({m}, ev_report);
                std::cout << "test_acc=" << format_double(m.test_acc)
                          << " robust_acc=" << format_double(m.robust_acc)
                          << " infer_acc=" << format_double(m.infer_acc)
                          << " gap=" << format_double(m.infer_gap)
                          << " advantage=" << format_double(m.advantage) << "\n";
                if (cfg.eval_bounds) {
                    CriticEstimatorConfig est;
                    est.steps = cfg.estimator_steps;
                    const BoundReport b = check_theorem_bounds(bundle, d, cfg.attack, ev_seed, est);
                    write_bound_report(b, ev_report + ".bounds.csv", ev_report + ".bounds.txt");
                    std::cout << bound_report_text(b);
                }
                if (cfg.export_projection)
                    export_projection(bundle, d, ev_report + ".projection.csv");
            });
    }

    if (sw->parsed()) {
        RunConfig cfg;
        std::vector<double> alphas, betas;
        return run_guarded(
            [&] {
                if (!sw_config.empty()) cfg = parse_run_config(sw_config);
                alphas = parse_grid(sw_alphas, "--alphas");
                betas = parse_grid(sw_betas, "--betas");
                if (betas.size() == 1) betas.assign(alphas.size(), betas[0]);
                if (betas.size() != alphas.size())
                    throw std::invalid_argument("--betas must have one value or match --alphas");
                if (sw_seeds < 1) throw std::invalid_argument("--seeds must be >= 1");
                if (sw_jobs < 1) sw_jobs = 1;
                for (std::size_t i = 0; i < alphas.size(); ++i) {
                    TrainConfig probe = cfg.train;
                    probe.alpha = alphas[i];
                    probe.beta = betas[i];
                    probe.validate();
                }
                write_resolved_config(cfg, sw_out + ".resolved.ini");
            },
            [&] {
                const Dataset d = load_dataset_cache(sw_data);
                struct Task {
                    double alpha, beta;
                    int seed_index;
                };
                std::vector<Task> tasks;
                for (std::size_t i = 0; i < alphas.size(); ++i)
                    for (int s = 0; s < sw_seeds; ++s) tasks.push_back({alphas[i], betas[i], s});

                std::vector<SweepRow> rows(tasks.size());
                std::atomic<std::size_t> next{0};
                auto worker = [&] {
                    for (;;) {
                        const std::size_t k = next.fetch_add(1);
                        if (k >= tasks.size()) return;
                        const Task& task = tasks[k];
                        TrainConfig tc = cfg.train;
                        tc.alpha = task.alpha;
                        tc.beta = task.beta;
                        tc.seed = derive_seed(cfg.train.seed,
                                              {double_bits(task.alpha), double_bits(task.beta),
                                               static_cast<std::uint64_t>(task.seed_index)});
                        const TrainResult res = train(d, tc);
                        AttackConfig atk = cfg.attack;
                        rows[k].metrics = evaluate_metrics(res.bundle, d, atk, tc.seed);
                        rows[k].seed_index = task.seed_index;
                    }
                };
                std::vector<std::thread> pool;
                const int nw = std::min<int>(sw_jobs, static_cast<int>(tasks.size()));
                for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
                for (auto& th : pool) th.join();
                write_sweep_csv(rows, sw_out);
                std::cout << "wrote " << rows.size() << " rows to " << sw_out << "\n";
            });
    }

    if (vf->parsed()) {
        std::vector<std::string> suites;
        return run_guarded(
            [&] {
                if (vf_suite == "all")
                    suites = {"gradients", "mi-oracles", "bounds-discrete"};
                else if (vf_suite == "gradients" || vf_suite == "mi-oracles" ||
                         vf_suite == "bounds-discrete")
                    suites = {vf_suite};
                else
                    throw std::invalid_argument("unknown suite '" + vf_suite + "'");
            },
            [&] {
                bool all_ok = true;
                for (const auto& s : suites) {
                    SuiteResult res;
                    if (s == "gradients")
                        res = run_gradient_suite(vf_seed, std::min(vf_count, 20));
                    else if (s == "mi-oracles")
                        res = run_mi_oracle_suite(vf_seed, vf_count);
                    else
                        res = run_bounds_discrete_suite(vf_seed, vf_count);
                    print_suite(res);
                    all_ok = all_ok && res.all_passed();
                }
                if (!all_ok) throw std::runtime_error("verification failed");
            });
    }

    return kExitOk;
}
