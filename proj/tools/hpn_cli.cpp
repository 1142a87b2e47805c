// Command-line harness: dataset generation, training, evaluation of the
// classical baselines and the neural solver, and SVG tour rendering.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "hpn/checkpoint.hpp"
#include "hpn/config_json.hpp"
#include "hpn/heuristics.hpp"
#include "hpn/model.hpp"
#include "hpn/svg.hpp"
#include "hpn/trainer.hpp"
#include "hpn/tsp.hpp"
#include "hpn/tsplib.hpp"
#include "hpn/ttest.hpp"

namespace {

using hpn::Instance;
using hpn::Tour;

constexpr const char* kResultsCsvHeader = "method,n,instance_id,length,seconds";

struct Dataset {
    std::vector<Instance> instances;
    // set for TSPLIB inputs so lengths can also be reported de-normalized
    bool from_tsplib = false;
    double scale = 1.0;
    std::string label;
};

Dataset load_dataset(const std::string& data_path, const std::string& tsplib_path) {
    if (data_path.empty() == tsplib_path.empty())
        throw std::runtime_error("exactly one of --data and --tsplib is required");
    Dataset ds;
    if (!data_path.empty()) {
        ds.instances = hpn::read_instance_batch(data_path);
        ds.label = data_path;
        if (ds.instances.empty()) throw std::runtime_error("dataset '" + data_path + "' is empty");
    } else {
        const auto raw = hpn::parse_tsplib(tsplib_path);
        const auto norm = hpn::normalize(raw);
        ds.instances = {norm.instance};
        ds.from_tsplib = true;
        ds.scale = norm.scale;
        ds.label = raw.name;
    }
    return ds;
}

std::unique_ptr<hpn::HpnModel> load_model(const std::string& checkpoint_path) {
    const auto ck = hpn::load_checkpoint(checkpoint_path);
    if (ck.config_text.empty())
        throw std::runtime_error("checkpoint '" + checkpoint_path + "' carries no config block");
    hpn::TrainConfig cfg;
    try {
        cfg = hpn::train_config_from_json(nlohmann::json::parse(ck.config_text));
    } catch (const std::exception& e) {
        throw std::runtime_error("checkpoint '" + checkpoint_path +
                                 "': cannot parse config block: " + e.what());
    }
    auto model = std::make_unique<hpn::HpnModel>(cfg.model, 0);
    model->load_state(ck, "model.");
    return model;
}

Tour run_method(const std::string& name, const Instance& inst, std::uint64_t seed,
                hpn::HpnModel* model) {
    if (name == "nearest_neighbor") return hpn::nearest_neighbor(inst, 0);
    if (name == "farthest_insertion") return hpn::farthest_insertion(inst);
    if (name == "two_opt") return hpn::two_opt(inst, hpn::random_tour(inst, seed));
    if (name == "random") return hpn::random_tour(inst, seed);
    if (name == "hpn") {
        if (!model) throw std::runtime_error("method 'hpn' needs --checkpoint");
        auto r = model->rollout({inst}, hpn::DecodeMode::Greedy);
        return Tour{r.tours[0], r.lengths[0]};
    }
    if (name == "hpn_sample") {
        if (!model) throw std::runtime_error("method 'hpn_sample' needs --checkpoint");
        auto r = model->rollout({inst}, hpn::DecodeMode::Sample, seed);
        return Tour{r.tours[0], r.lengths[0]};
    }
    throw std::runtime_error("unknown method '" + name +
                             "' (known: nearest_neighbor, farthest_insertion, two_opt, random, "
                             "hpn, hpn_sample)");
}

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    const int spawn = std::min(workers, count);
    for (int w = 0; w < spawn; ++w)
        pool.emplace_back([&] {
            for (int i; (i = next.fetch_add(1)) < count;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::vector<std::string> split_methods(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    if (out.empty()) throw std::runtime_error("--methods is empty");
    return out;
}

int cmd_generate(int n, int count, std::uint64_t seed, const std::string& out) {
    auto batch = hpn::generate_uniform(n, count, seed);
    hpn::write_instance_batch(out, batch, n);
    std::printf("wrote %d instance(s) of %d cities to %s\n", count, n, out.c_str());
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::string& resume_path) {
    std::ifstream is(config_path);
    if (!is) throw std::runtime_error("cannot open config '" + config_path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const std::exception& e) {
        throw std::runtime_error("config '" + config_path + "': " + e.what());
    }
    const hpn::TrainConfig cfg = hpn::train_config_from_json(j);

    std::filesystem::create_directories(out_dir);
    std::unique_ptr<hpn::Trainer> trainer;
    if (resume_path.empty()) {
        trainer = std::make_unique<hpn::Trainer>(cfg);
    } else {
        trainer = std::make_unique<hpn::Trainer>(cfg, hpn::load_checkpoint(resume_path));
        std::printf("resumed after epoch %d\n", trainer->epochs_done());
    }

    hpn::TrainHooks hooks;
    hooks.metrics_csv = out_dir + "/metrics.csv";
    hooks.checkpoint_dir = out_dir;
    hooks.on_epoch = [](const hpn::EpochMetrics& m) {
        std::printf("epoch %3d  sampled %.4f  greedy %.4f  refreshed %d  lr %.3g\n", m.epoch,
                    m.mean_sampled_len, m.mean_greedy_len, m.baseline_refreshed ? 1 : 0, m.lr);
        std::fflush(stdout);
    };
    trainer->train(hooks);
    save_checkpoint(out_dir + "/final.ckpt", trainer->make_checkpoint());
    std::printf("checkpoint: %s/final.ckpt\nmetrics:    %s\n", out_dir.c_str(),
                hooks.metrics_csv.c_str());
    return 0;
}

int cmd_evaluate(const std::string& data_path, const std::string& tsplib_path,
                 const std::string& methods_csv, bool add_two_opt,
                 const std::string& checkpoint_path, int workers, std::uint64_t seed,
                 const std::string& out_csv) {
    const Dataset ds = load_dataset(data_path, tsplib_path);
    const auto methods = split_methods(methods_csv);
    const int count = static_cast<int>(ds.instances.size());

    std::unique_ptr<hpn::HpnModel> model;
    for (const auto& m : methods)
        if ((m == "hpn" || m == "hpn_sample") && !model) {
            if (checkpoint_path.empty())
                throw std::runtime_error("method '" + m + "' needs --checkpoint");
            model = load_model(checkpoint_path);
        }

    struct Row {
        std::string name;
        std::vector<double> lengths;
        std::vector<double> seconds;
    };
    std::vector<Row> rows;
    for (const auto& m : methods) {
        rows.push_back({m, std::vector<double>(count), std::vector<double>(count)});
        if (add_two_opt)
            rows.push_back({m + "+2opt", std::vector<double>(count), std::vector<double>(count)});
    }

    parallel_for(count, workers, [&](int i) {
        const Instance& inst = ds.instances[i];
        std::size_t r = 0;
        for (const auto& m : methods) {
            const auto t0 = std::chrono::steady_clock::now();
            Tour tour = run_method(m, inst, hpn::rng::mix(seed, i), model.get());
            const auto t1 = std::chrono::steady_clock::now();
            rows[r].lengths[i] = tour.length;
            rows[r].seconds[i] = std::chrono::duration<double>(t1 - t0).count();
            ++r;
            if (add_two_opt) {
                Tour refined = hpn::two_opt(inst, tour);
                const auto t2 = std::chrono::steady_clock::now();
                if (refined.length > tour.length + 1e-12)
                    throw std::runtime_error("two_opt increased a tour length");
                rows[r].lengths[i] = refined.length;
                rows[r].seconds[i] = std::chrono::duration<double>(t2 - t0).count();
                ++r;
            }
        }
    });

    if (!out_csv.empty()) {
        std::ofstream os(out_csv, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open '" + out_csv + "'");
        os << kResultsCsvHeader << "\n";
        char line[160];
        for (const auto& row : rows)
            for (int i = 0; i < count; ++i) {
                std::snprintf(line, sizeof(line), "%s,%d,%d,%.17g,%.6f\n", row.name.c_str(),
                              ds.instances[i].n(), i, row.lengths[i], row.seconds[i]);
                os << line;
            }
    }

    std::printf("dataset: %s  (%d instance(s), n = %d)\n", ds.label.c_str(), count,
                ds.instances[0].n());
    std::printf("%-28s %10s %12s %12s\n", "method", "count", "mean_len", "total_s");
    for (const auto& row : rows) {
        double len = 0.0, sec = 0.0;
        for (int i = 0; i < count; ++i) {
            len += row.lengths[i];
            sec += row.seconds[i];
        }
        std::printf("%-28s %10d %12.4f %12.2f\n", row.name.c_str(), count, len / count, sec);
        if (ds.from_tsplib)
            std::printf("%-28s %10s %12.1f   (de-normalized, scale %.6g)\n", "", "",
                        ds.scale * len / count, ds.scale);
    }

    if (rows.size() > 1 && count >= 2) {
        std::printf("\npaired one-sided t-test p-values (row beats column):\n%-28s", "");
        for (const auto& c : rows) std::printf(" %12.12s", c.name.c_str());
        std::printf("\n");
        for (const auto& r : rows) {
            std::printf("%-28s", r.name.c_str());
            for (const auto& c : rows) {
                if (&r == &c) {
                    std::printf(" %12s", "-");
                    continue;
                }
                std::printf(" %12.4g", hpn::paired_t_test_one_sided(r.lengths, c.lengths));
            }
            std::printf("\n");
        }
    }
    if (!out_csv.empty()) std::printf("\nper-instance results: %s\n", out_csv.c_str());
    return 0;
}

int cmd_render(const std::string& data_path, const std::string& tsplib_path, int index,
               const std::string& method, const std::string& checkpoint_path, std::uint64_t seed,
               const std::string& out_svg) {
    const Dataset ds = load_dataset(data_path, tsplib_path);
    if (index < 0 || index >= static_cast<int>(ds.instances.size()))
        throw std::runtime_error("--index out of range, dataset has " +
                                 std::to_string(ds.instances.size()) + " instance(s)");
    std::unique_ptr<hpn::HpnModel> model;
    if (method == "hpn" || method == "hpn_sample") {
        if (checkpoint_path.empty())
            throw std::runtime_error("method '" + method + "' needs --checkpoint");
        model = load_model(checkpoint_path);
    }
    const Instance& inst = ds.instances[index];
    Tour tour = run_method(method, inst, seed, model.get());
    hpn::render_tour_svg(out_svg, inst, tour.order, method);
    std::printf("rendered %s tour of length %.6f to %s\n", method.c_str(), tour.length,
                out_svg.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TSP toolkit: hybrid pointer network, classical heuristics, TSPLIB harness"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "write a batch of uniform random instances");
    int gen_n = 50, gen_count = 1000;
    std::uint64_t gen_seed = 0;
    std::string gen_out = "instances.txt";
    gen->add_option("--n", gen_n, "cities per instance")->check(CLI::PositiveNumber);
    gen->add_option("--count", gen_count, "number of instances")->check(CLI::NonNegativeNumber);
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output path");

    auto* tr = app.add_subcommand("train", "train the pointer network from a JSON config");
    std::string tr_config, tr_out = "run", tr_resume;
    tr->add_option("--config", tr_config, "JSON training config")->required();
    tr->add_option("--out", tr_out, "output directory");
    tr->add_option("--checkpoint", tr_resume, "resume from this checkpoint");

    auto* ev = app.add_subcommand("evaluate", "run solvers over a dataset and report");
    std::string ev_data, ev_tsplib, ev_methods = "nearest_neighbor", ev_ckpt,
                                    ev_out = "results.csv";
    bool ev_two_opt = false;
    int ev_workers = 1;
    std::uint64_t ev_seed = 0;
    ev->add_option("--data", ev_data, "instance batch file");
    ev->add_option("--tsplib", ev_tsplib, "TSPLIB instance file");
    ev->add_option("--methods", ev_methods, "comma-separated method list");
    ev->add_flag("--two-opt", ev_two_opt, "also refine every method's tour with 2-opt");
    ev->add_option("--checkpoint", ev_ckpt, "model checkpoint for neural methods");
    ev->add_option("--workers", ev_workers, "parallel workers")->check(CLI::PositiveNumber);
    ev->add_option("--seed", ev_seed, "seed for stochastic methods");
    ev->add_option("--out", ev_out, "per-instance CSV path (empty to skip)");

    auto* re = app.add_subcommand("render", "render one tour as SVG");
    std::string re_data, re_tsplib, re_method = "nearest_neighbor", re_ckpt, re_out = "tour.svg";
    int re_index = 0;
    std::uint64_t re_seed = 0;
    re->add_option("--data", re_data, "instance batch file");
    re->add_option("--tsplib", re_tsplib, "TSPLIB instance file");
    re->add_option("--index", re_index, "instance index within the batch");
    re->add_option("--method", re_method, "solver to draw");
    re->add_option("--checkpoint", re_ckpt, "model checkpoint for neural methods");
    re->add_option("--seed", re_seed, "seed for stochastic methods");
    re->add_option("--out", re_out, "output SVG path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) return cmd_generate(gen_n, gen_count, gen_seed, gen_out);
        if (*tr) return cmd_train(tr_config, tr_out, tr_resume);
        if (*ev)
            return cmd_evaluate(ev_data, ev_tsplib, ev_methods, ev_two_opt, ev_ckpt, ev_workers,
                                ev_seed, ev_out);
        if (*re)
            return cmd_render(re_data, re_tsplib, re_index, re_method, re_ckpt, re_seed, re_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
