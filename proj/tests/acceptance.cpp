// Acceptance suite: one checked criterion per line, nonzero exit on any
// failure. Heavier than the unit suites; the training criterion alone runs
// several hundred optimizer steps.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "hpn/config_json.hpp"
#include "hpn/heuristics.hpp"
#include "hpn/model.hpp"
#include "hpn/tensor.hpp"
#include "hpn/trainer.hpp"
#include "hpn/tsp.hpp"
#include "hpn/tsplib.hpp"
#include "hpn/ttest.hpp"

#ifndef HPN_CONFIG_DIR
#define HPN_CONFIG_DIR "configs"
#endif

namespace {

using hpn::HpnModel;
using hpn::Instance;
using hpn::ModelConfig;
using hpn::Tensor;

struct Outcome {
    bool pass;
    std::string detail;
};

ModelConfig small_model(int d, int heads, hpn::Aggregator agg = hpn::Aggregator::Sum) {
    ModelConfig c;
    c.hidden_dim = d;
    c.transformer_layers = 1;
    c.graph_layers = 1;
    c.feedforward_dim = 2 * d;
    c.heads = heads;
    c.aggregator = agg;
    return c;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

// ---------------------------------------------------------------- 1..3

Outcome classical_mean(const char* which, double target, double tol) {
    const int count = 1000;
    auto insts = hpn::generate_uniform(50, count, 20260810);
    double sum = 0.0;
    for (int i = 0; i < count; ++i) {
        if (std::string(which) == "nn")
            sum += hpn::nearest_neighbor(insts[i], 0).length;
        else if (std::string(which) == "fi")
            sum += hpn::farthest_insertion(insts[i]).length;
        else
            sum += hpn::two_opt(insts[i], hpn::random_tour(insts[i], 5000 + i)).length;
    }
    const double mean = sum / count;
    return {std::fabs(mean - target) <= tol,
            fmt("mean %.4f over %d TSP50 instances, target %.2f +/- %.2f", mean, count, target,
                tol)};
}

// ---------------------------------------------------------------- 4

Outcome exact_oracle_equivalence() {
    int checked = 0;
    for (int n = 4; n <= 8; ++n) {
        auto insts = hpn::generate_uniform(n, 20, 8800 + n);
        HpnModel model(small_model(8, 2), 17 + n);
        for (std::size_t k = 0; k < insts.size(); ++k) {
            const Instance& inst = insts[k];
            const double opt = hpn::brute_force_optimal(inst).length;

            const std::vector<hpn::Tour> tours = {
                hpn::nearest_neighbor(inst, 0), hpn::farthest_insertion(inst),
                hpn::two_opt(inst, hpn::random_tour(inst, 31 * n + k)),
                hpn::random_tour(inst, 77 * n + k)};
            for (const auto& t : tours)
                if (opt > t.length + 1e-12)
                    return {false, fmt("optimum %.12f beaten by a heuristic %.12f (n=%d)", opt,
                                       t.length, n)};

            auto greedy = model.rollout({inst}, hpn::DecodeMode::Greedy);
            auto sampled = model.rollout({inst}, hpn::DecodeMode::Sample, 900 + k);
            if (opt > greedy.lengths[0] + 1e-12 || opt > sampled.lengths[0] + 1e-12)
                return {false, fmt("optimum beaten by a rollout tour (n=%d)", n)};

            for (const auto& t : tours) {
                double resum = 0.0;
                for (int i = 0; i < n; ++i)
                    resum += hpn::euclidean(inst.coords[t.order[i]],
                                            inst.coords[t.order[(i + 1) % n]]);
                if (std::fabs(resum - hpn::tour_length(inst, t.order)) > 1e-9)
                    return {false, "tour_length disagrees with the re-summation oracle"};
            }
            ++checked;
        }
    }
    return {true, fmt("%d instances, n in {4..8}: optimum never beaten, lengths re-sum to 1e-9",
                      checked)};
}

// ---------------------------------------------------------------- 5

double fd_rel_error(HpnModel& model, const std::vector<Instance>& batch,
                    const std::vector<std::vector<int>>& tours, const std::vector<double>& adv) {
    hpn::RolloutOptions opt;
    opt.forced = &tours;
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    auto loss_value = [&]() {
        auto r = model.rollout(batch, hpn::DecodeMode::Greedy, 0, opt);
        double acc = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) acc += adv[i] * r.log_probs[i];
        return acc * inv_b;
    };

    Tensor loss;
    {
        hpn::autograd::RecordGuard rec(true);
        auto r = model.rollout(batch, hpn::DecodeMode::Greedy, 0, opt);
        Tensor acc;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            Tensor term = hpn::scale(r.log_prob_nodes[i], adv[i]);
            acc = i == 0 ? term : hpn::add(acc, term);
        }
        loss = hpn::scale(acc, inv_b);
    }
    hpn::backward(loss);

    double worst = 0.0;
    for (auto& [name, p] : model.named_parameters()) {
        std::vector<double> analytic =
            p.has_grad() ? p.grad() : std::vector<double>(p.size(), 0.0);
        double diff = 0.0, ref = 0.0, an = 0.0;
        const double h = 1e-5;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p.data()[i];
            p.data()[i] = saved + h;
            const double up = loss_value();
            p.data()[i] = saved - h;
            const double dn = loss_value();
            p.data()[i] = saved;
            const double fd = (up - dn) / (2.0 * h);
            diff += (analytic[i] - fd) * (analytic[i] - fd);
            ref += fd * fd;
            an += analytic[i] * analytic[i];
        }
        p.clear_grad();
        if (std::sqrt(ref) < 1e-7 && std::sqrt(an) < 1e-7) continue;  // true zero gradient
        worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(ref), 1e-12));
    }
    return worst;
}

Outcome gradient_integrity() {
    double worst = 0.0;
    for (int n : {4, 5}) {
        for (auto agg : {hpn::Aggregator::Sum, hpn::Aggregator::Concat}) {
            HpnModel model(small_model(8, 2, agg), 9000 + n);
            auto batch = hpn::generate_uniform(n, 2, 600 + n);
            auto sampled = model.rollout(batch, hpn::DecodeMode::Sample, 3);
            std::vector<double> adv(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i)
                adv[i] = sampled.lengths[i] - 0.9 * sampled.lengths[i ^ 1];
            worst = std::max(worst, fd_rel_error(model, batch, sampled.tours, adv));
        }
    }
    return {worst < 1e-3,
            fmt("worst parameter-block relative error %.3e (threshold 1e-3)", worst)};
}

// ---------------------------------------------------------------- 6

Outcome training_improvement(double* minutes_out) {
    std::ifstream is(std::string(HPN_CONFIG_DIR) + "/smoke.json");
    if (!is) return {false, "configs/smoke.json not found"};
    hpn::TrainConfig cfg = hpn::train_config_from_json(nlohmann::json::parse(is));
    const int total_steps = cfg.epochs * cfg.steps_per_epoch;
    if (total_steps < 500) return {false, "smoke config runs fewer than 500 steps"};

    const auto t0 = std::chrono::steady_clock::now();
    hpn::Trainer trainer(cfg);

    double untrained = 0.0, random_mean = 0.0, nn_mean = 0.0;
    {
        auto r = trainer.model().rollout(trainer.eval_set(), hpn::DecodeMode::Greedy);
        for (double v : r.lengths) untrained += v;
        untrained /= r.lengths.size();
        for (std::size_t i = 0; i < trainer.eval_set().size(); ++i) {
            random_mean += hpn::random_tour(trainer.eval_set()[i], 4242 + i).length;
            nn_mean += hpn::nearest_neighbor(trainer.eval_set()[i], 0).length;
        }
        random_mean /= trainer.eval_set().size();
        nn_mean /= trainer.eval_set().size();
    }

    auto metrics = trainer.train();
    const double trained = metrics.back().mean_greedy_len;
    const auto t1 = std::chrono::steady_clock::now();
    const double minutes = std::chrono::duration<double>(t1 - t0).count() / 60.0;
    if (minutes_out) *minutes_out = minutes;

    // per-epoch greedy mean should be non-increasing in at least 80% of epochs
    int non_increasing = 0;
    double prev = untrained;
    for (const auto& m : metrics) {
        if (m.mean_greedy_len <= prev + 1e-12) ++non_increasing;
        prev = m.mean_greedy_len;
    }
    const double mono_frac = static_cast<double>(non_increasing) / metrics.size();

    const double reduction = 100.0 * (untrained - trained) / untrained;
    const bool pass = reduction >= 15.0 && trained < random_mean && mono_frac >= 0.8;
    return {pass, fmt("TSP%d, %d steps in %.1f min: greedy %.4f -> %.4f (-%.1f%%, need 15%%), "
                      "random %.4f, nearest_neighbor %.4f (target) %s; greedy non-increasing in "
                      "%d/%zu epochs",
                      cfg.n_cities, total_steps, minutes, untrained, trained, reduction,
                      random_mean, nn_mean, trained <= nn_mean ? "[beaten]" : "[not beaten]",
                      non_increasing, metrics.size())};
}

// ---------------------------------------------------------------- 7

Outcome policy_validity() {
    hpn::rng::Engine eng(271828);
    long long rollouts = 0, steps = 0;
    for (int n = 1; n <= 50; ++n) {
        HpnModel model(small_model(8, 2), eng());
        auto insts = hpn::generate_uniform(n, 200, eng());
        for (int k = 0; k < 200; ++k) {
            hpn::RolloutOptions opt;
            opt.keep_trace = true;
            const auto mode = k % 2 ? hpn::DecodeMode::Sample : hpn::DecodeMode::Greedy;
            auto res = model.rollout({insts[k]}, mode, eng(), opt);
            try {
                hpn::check_permutation(n, res.tours[0], "acceptance");
            } catch (const std::exception& e) {
                return {false, e.what()};
            }
            for (const auto& step : res.traces[0]) {
                double s = 0.0;
                for (int j = 0; j < n; ++j) {
                    if (step.visited[j] && step.probs.data()[j] != 0.0)
                        return {false, fmt("visited city with probability %.3e at n=%d",
                                           step.probs.data()[j], n)};
                    s += step.probs.data()[j];
                }
                if (std::fabs(s - 1.0) > 1e-10)
                    return {false, fmt("step distribution sums to %.15f at n=%d", s, n)};
                ++steps;
            }
            ++rollouts;
        }
    }
    return {true, fmt("%lld rollouts (%lld decode steps), n in {1..50}: permutations valid, "
                      "masked probabilities exactly 0, sums within 1e-10",
                      rollouts, steps)};
}

// ---------------------------------------------------------------- 8

Outcome aggregator_identities() {
    auto insts = hpn::generate_uniform(10, 100, 123321);
    HpnModel sum_m(small_model(16, 2, hpn::Aggregator::Sum), 7);
    HpnModel mean_m(small_model(16, 2, hpn::Aggregator::Mean), 7);
    HpnModel cat_m(small_model(16, 2, hpn::Aggregator::Concat), 7);
    {
        hpn::Checkpoint ck;
        for (auto& e : sum_m.state_entries()) ck.entries.push_back(e);
        cat_m.load_state(ck);
        for (auto& [name, t] : cat_m.named_parameters())
            if (name == "agg.W") t.values() = {1.0, 1.0};
    }

    auto a = sum_m.rollout(insts, hpn::DecodeMode::Greedy);
    auto b = mean_m.rollout(insts, hpn::DecodeMode::Greedy);
    if (a.tours != b.tours) return {false, "sum and mean aggregators picked different tours"};

    // concat fixed to summation weights must match sum step by step
    hpn::RolloutOptions opt;
    opt.keep_trace = true;
    for (int k = 0; k < 10; ++k) {
        auto ra = sum_m.rollout({insts[k]}, hpn::DecodeMode::Greedy, 0, opt);
        auto rc = cat_m.rollout({insts[k]}, hpn::DecodeMode::Greedy, 0, opt);
        if (ra.tours != rc.tours) return {false, "concat(G=1,1) diverged from sum"};
        for (std::size_t s = 0; s < ra.traces[0].size(); ++s)
            for (int j = 0; j < 10; ++j)
                if (std::fabs(ra.traces[0][s].probs.data()[j] -
                              rc.traces[0][s].probs.data()[j]) > 1e-9)
                    return {false, "concat(G=1,1) distribution off by more than 1e-9"};
    }

    // max and mean coincide whenever the two logit vectors are equal
    hpn::rng::Engine eng(55);
    HpnModel max_m(small_model(16, 2, hpn::Aggregator::Max), 7);
    for (int t = 0; t < 50; ++t) {
        Tensor u(1, 12);
        for (int j = 0; j < 12; ++j) u.data()[j] = 20.0 * hpn::rng::unit(eng) - 10.0;
        Tensor pm = hpn::softmax_rows(max_m.aggregate_logits(u, u));
        Tensor pv = hpn::softmax_rows(mean_m.aggregate_logits(u, u));
        for (int j = 0; j < 12; ++j)
            if (std::fabs(pm.data()[j] - pv.data()[j]) > 1e-12)
                return {false, "max and mean disagree on identical logit vectors"};
    }
    return {true, "sum==mean greedy tours on 100 instances; concat(G=1,1)==sum to 1e-9; "
                  "max==mean at equal logits"};
}

// ---------------------------------------------------------------- 9

Outcome algorithm1_mechanics() {
    const double alpha = 0.05;
    std::vector<double> base = {5.0, 6.0, 7.0, 8.0, 9.0};
    if (hpn::paired_t_test_one_sided(base, base) < alpha)
        return {false, "all-zero differences must not refresh the baseline"};
    std::vector<double> better(base);
    for (double& v : better) v -= 0.5;
    if (!(hpn::paired_t_test_one_sided(better, base) < alpha))
        return {false, "constant-negative differences must refresh the baseline"};

    hpn::TrainConfig cfg;
    cfg.epochs = 1;
    cfg.steps_per_epoch = 1;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-3;
    cfg.n_cities = 6;
    cfg.eval_instances = 20;
    cfg.seed = 77;
    cfg.model = small_model(8, 2);
    hpn::Trainer tr(cfg);
    std::vector<std::vector<double>> before;
    for (auto& [name, p] : tr.model().named_parameters()) before.push_back(p.values());
    const double adv = tr.train_step(0, 0, /*candidate_greedy=*/true);
    if (adv != 0.0) return {false, fmt("greedy-vs-greedy advantage %.3e, expected exactly 0", adv)};
    std::size_t i = 0;
    for (auto& [name, p] : tr.model().named_parameters())
        if (p.values() != before[i++])
            return {false, "zero-advantage step changed parameter '" + name + "'"};
    return {true, "gate: p=1 holds, p=0 refreshes; zero-advantage step left parameters "
                  "bit-identical"};
}

// ---------------------------------------------------------------- 10

void write_synthetic_tsplib(const std::string& path, const std::string& name, int dim) {
    std::ofstream os(path);
    os << "NAME: " << name << "\nTYPE: TSP\nDIMENSION: " << dim
       << "\nEDGE_WEIGHT_TYPE: EUC_2D\nNODE_COORD_SECTION\n";
    hpn::rng::Engine eng(dim);
    char line[96];
    for (int i = 1; i <= dim; ++i) {
        std::snprintf(line, sizeof(line), "%d %.4f %.4f\n", i, 4000.0 * hpn::rng::unit(eng),
                      2500.0 * hpn::rng::unit(eng));
        os << line;
    }
    os << "EOF\n";
}

Outcome tsplib_pipeline() {
    write_synthetic_tsplib("acc_rd400.tsp", "rd400", 400);
    write_synthetic_tsplib("acc_eg7146.tsp", "eg7146", 7146);

    auto rd = hpn::parse_tsplib("acc_rd400.tsp");
    auto eg = hpn::parse_tsplib("acc_eg7146.tsp");
    std::remove("acc_rd400.tsp");
    std::remove("acc_eg7146.tsp");
    if (rd.dimension != 400 || static_cast<int>(rd.raw_coords.size()) != 400)
        return {false, "rd400 fixture did not parse to dimension 400"};
    if (eg.dimension != 7146 || static_cast<int>(eg.raw_coords.size()) != 7146)
        return {false, "eg7146 fixture did not parse to dimension 7146"};

    // length round trip at 1e-6 relative on the rd400-scale instance
    auto norm = hpn::normalize(rd);
    Instance raw_inst{rd.raw_coords};
    auto tour = hpn::nearest_neighbor(norm.instance, 0);
    const double denorm = hpn::denormalize_length(norm, tour.length);
    const double direct = hpn::tour_length(raw_inst, tour.order);
    if (std::fabs(denorm - direct) / direct > 1e-6)
        return {false, fmt("denormalized %.9f vs direct %.9f", denorm, direct)};

    // neural greedy + 2-opt composition on a mid-size synthetic instance
    write_synthetic_tsplib("acc_mid50.tsp", "mid50", 50);
    auto mid = hpn::normalize(hpn::parse_tsplib("acc_mid50.tsp"));
    std::remove("acc_mid50.tsp");
    HpnModel model(small_model(16, 2), 99);
    auto r = model.rollout({mid.instance}, hpn::DecodeMode::Greedy);
    auto refined = hpn::two_opt(mid.instance, hpn::Tour{r.tours[0], r.lengths[0]});
    if (refined.length > r.lengths[0] + 1e-12)
        return {false, "2-opt refinement increased the neural tour length"};

    return {true, fmt("rd400 -> 400, eg7146 -> 7146; round trip %.2e relative; neural+2opt "
                      "%.4f -> %.4f",
                      std::fabs(denorm - direct) / direct, r.lengths[0], refined.length)};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const char* name, const Outcome& o) {
        std::printf("[%s] criterion %2d: %s — %s\n", o.pass ? "PASS" : "FAIL", id, name,
                    o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    };

    report(1, "nearest neighbor TSP50 mean", classical_mean("nn", 7.00, 0.10));
    report(2, "farthest insertion TSP50 mean", classical_mean("fi", 6.01, 0.10));
    report(3, "2-opt from random TSP50 mean", classical_mean("2opt", 6.12, 0.20));
    report(4, "exact-oracle equivalence", exact_oracle_equivalence());
    report(5, "gradient integrity", gradient_integrity());
    report(7, "policy validity suite", policy_validity());
    report(8, "aggregator identities", aggregator_identities());
    report(9, "rollout-baseline mechanics", algorithm1_mechanics());
    report(10, "TSPLIB pipeline", tsplib_pipeline());
    // the slow one last so the fast signals arrive first
    report(6, "training improvement", training_improvement(nullptr));

    if (failures == 0)
        std::printf("acceptance: all criteria passed\n");
    else
        std::printf("acceptance: %d criterion/criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
