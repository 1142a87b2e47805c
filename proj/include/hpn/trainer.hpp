#pragma once

// Policy-gradient training with a greedy rollout baseline.
//
// Each step samples tours from the candidate policy, scores the same fresh
// instances with a gradient-free greedy rollout of the frozen baseline
// policy, and ascends the advantage-weighted log-likelihood with Adam. After
// every epoch the baseline is replaced by the candidate iff a one-sided
// paired t-test on a fixed held-out evaluation set is significant.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "hpn/checkpoint.hpp"
#include "hpn/config.hpp"
#include "hpn/config_json.hpp"
#include "hpn/model.hpp"
#include "hpn/optim.hpp"
#include "hpn/tensor.hpp"
#include "hpn/tsp.hpp"
#include "hpn/ttest.hpp"

namespace hpn {

struct EpochMetrics {
    int epoch = 0;  // 1-based
    double mean_sampled_len = 0.0;
    double mean_greedy_len = 0.0;  // greedy candidate on the held-out set
    bool baseline_refreshed = false;
    double lr = 0.0;
};

struct TrainHooks {
    std::string metrics_csv;     // appended per epoch when non-empty
    std::string checkpoint_dir;  // per-epoch checkpoints when non-empty
    std::function<void(const EpochMetrics&)> on_epoch;
};

inline const char* kMetricsCsvHeader = "epoch,mean_sampled_len,mean_greedy_len,baseline_refreshed,lr";

class Trainer {
  public:
    explicit Trainer(const TrainConfig& cfg)
        : cfg_(cfg),
          model_(cfg.model, rng::mix(cfg.seed, kModelStream)),
          baseline_(cfg.model, rng::mix(cfg.seed, kModelStream)),
          lr_(cfg.learning_rate) {
        cfg_.validate();
        baseline_.copy_parameters_from(model_);
        params_ = model_.parameters();
        adam_.resize(params_.size());
        eval_set_ = generate_uniform(cfg_.effective_eval_n(), cfg_.eval_instances,
                                     rng::mix(cfg_.seed, kEvalStream));
    }

    Trainer(const TrainConfig& cfg, const Checkpoint& resume) : Trainer(cfg) {
        const std::string want = train_config_to_json(cfg_).dump();
        if (!resume.config_text.empty() && resume.config_text != want)
            throw std::runtime_error(
                "checkpoint: train config does not match the checkpoint's config");
        model_.load_state(resume, "model.");
        baseline_.load_state(resume, "baseline.");
        auto named = model_.named_parameters();
        for (std::size_t i = 0; i < named.size(); ++i) {
            const CheckpointEntry* m = resume.find("adam.m." + named[i].first);
            const CheckpointEntry* v = resume.find("adam.v." + named[i].first);
            if (!m || !v)
                throw std::runtime_error("checkpoint: missing optimizer state for '" +
                                         named[i].first + "'");
            adam_[i].m = m->values;
            adam_[i].v = v->values;
        }
        const CheckpointEntry* meta = resume.find("trainer.meta");
        if (!meta || meta->values.size() != 3)
            throw std::runtime_error("checkpoint: missing trainer.meta entry");
        epochs_done_ = static_cast<int>(meta->values[0]);
        lr_ = meta->values[1];
        const auto step = static_cast<std::int64_t>(meta->values[2]);
        for (auto& st : adam_) st.step = step;
    }

    const TrainConfig& config() const { return cfg_; }
    HpnModel& model() { return model_; }
    HpnModel& baseline() { return baseline_; }
    double lr() const { return lr_; }
    int epochs_done() const { return epochs_done_; }
    const std::vector<Instance>& eval_set() const { return eval_set_; }

    // One optimization step on a fresh random batch. Returns the mean
    // advantage L(sampled) - L(baseline greedy). candidate_greedy decodes the
    // candidate greedily too, which makes every advantage exactly zero when
    // the two policies coincide.
    double train_step(int epoch, int step, bool candidate_greedy = false) {
        const std::uint64_t tag =
            static_cast<std::uint64_t>(epoch) * 0x100000ull + static_cast<std::uint64_t>(step);
        auto batch = generate_uniform(cfg_.n_cities, cfg_.batch_size,
                                      rng::mix(cfg_.seed, kDataStream + tag));

        // Baseline rollout first, outside any recording scope: it must not
        // contribute graph nodes.
        RolloutResult base = baseline_.rollout(batch, DecodeMode::Greedy);

        RolloutResult sampled;
        Tensor loss;
        double adv_sum = 0.0;
        {
            autograd::RecordGuard rec(true);
            sampled = model_.rollout(batch,
                                     candidate_greedy ? DecodeMode::Greedy : DecodeMode::Sample,
                                     rng::mix(cfg_.seed, kSampleStream + tag));
            Tensor acc;
            for (int i = 0; i < cfg_.batch_size; ++i) {
                const double adv = sampled.lengths[i] - base.lengths[i];
                adv_sum += adv;
                Tensor term = scale(sampled.log_prob_nodes[i], adv);
                acc = i == 0 ? term : add(acc, term);
            }
            loss = scale(acc, 1.0 / cfg_.batch_size);
        }
        backward(loss);
        // parameters outside this step's graph (e.g. the concat weights under
        // another aggregator) have an exactly-zero gradient
        for (auto& p : params_)
            if (!p.has_grad()) p.grad().assign(p.size(), 0.0);
        adam_step(params_, adam_, lr_);

        for (double len : sampled.lengths) epoch_sampled_sum_ += len;
        epoch_sampled_count_ += cfg_.batch_size;
        return adv_sum / cfg_.batch_size;
    }

    // T optimization steps followed by the t-test refresh gate.
    EpochMetrics run_epoch(int epoch_index) {
        epoch_sampled_sum_ = 0.0;
        epoch_sampled_count_ = 0;
        for (int s = 0; s < cfg_.steps_per_epoch; ++s) train_step(epoch_index, s);

        const std::vector<double> cand = model_.rollout(eval_set_, DecodeMode::Greedy).lengths;
        if (baseline_eval_.empty())
            baseline_eval_ = baseline_.rollout(eval_set_, DecodeMode::Greedy).lengths;
        const double p = paired_t_test_one_sided(cand, baseline_eval_);
        const bool refreshed = p < cfg_.alpha;
        if (refreshed) {
            baseline_.copy_parameters_from(model_);
            baseline_eval_ = cand;
        }

        EpochMetrics m;
        m.epoch = epoch_index + 1;
        m.mean_sampled_len =
            epoch_sampled_count_ > 0 ? epoch_sampled_sum_ / epoch_sampled_count_ : 0.0;
        m.mean_greedy_len =
            std::accumulate(cand.begin(), cand.end(), 0.0) / static_cast<double>(cand.size());
        m.baseline_refreshed = refreshed;
        m.lr = lr_;
        lr_ *= cfg_.lr_decay;
        epochs_done_ = epoch_index + 1;
        return m;
    }

    // Runs the remaining epochs (all of them on a fresh trainer). With
    // epochs = 0 the parameters are returned untouched.
    std::vector<EpochMetrics> train(const TrainHooks& hooks = {}) {
        std::vector<EpochMetrics> all;
        for (int e = epochs_done_; e < cfg_.epochs; ++e) {
            EpochMetrics m = run_epoch(e);
            all.push_back(m);
            if (!hooks.metrics_csv.empty()) append_metrics_csv(hooks.metrics_csv, m);
            if (!hooks.checkpoint_dir.empty()) {
                char name[64];
                std::snprintf(name, sizeof(name), "/epoch_%04d.ckpt", m.epoch);
                save_checkpoint(hooks.checkpoint_dir + name, make_checkpoint());
            }
            if (hooks.on_epoch) hooks.on_epoch(m);
        }
        return all;
    }

    // Full training state: both parameter sets, optimizer moments, schedule.
    Checkpoint make_checkpoint() {
        Checkpoint ck;
        ck.config_text = train_config_to_json(cfg_).dump();
        for (auto& e : model_.state_entries("model.")) ck.entries.push_back(std::move(e));
        for (auto& e : baseline_.state_entries("baseline.")) ck.entries.push_back(std::move(e));
        auto named = model_.named_parameters();
        for (std::size_t i = 0; i < named.size(); ++i) {
            if (adam_[i].m.empty()) {
                adam_[i].m.assign(named[i].second.size(), 0.0);
                adam_[i].v.assign(named[i].second.size(), 0.0);
            }
            ck.entries.push_back(entry_from_values("adam.m." + named[i].first, adam_[i].m));
            ck.entries.push_back(entry_from_values("adam.v." + named[i].first, adam_[i].v));
        }
        const double step = adam_.empty() ? 0.0 : static_cast<double>(adam_[0].step);
        ck.entries.push_back(entry_from_values(
            "trainer.meta", {static_cast<double>(epochs_done_), lr_, step}));
        return ck;
    }

    static void append_metrics_csv(const std::string& path, const EpochMetrics& m) {
        const bool fresh = !std::ifstream(path).good();
        std::ofstream os(path, std::ios::app);
        if (!os) throw std::runtime_error("metrics: cannot open '" + path + "'");
        if (fresh) os << kMetricsCsvHeader << "\n";
        char line[160];
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%d,%.17g\n", m.epoch,
                      m.mean_sampled_len, m.mean_greedy_len, m.baseline_refreshed ? 1 : 0, m.lr);
        os << line;
    }

  private:
    static constexpr std::uint64_t kModelStream = 0x101;
    static constexpr std::uint64_t kEvalStream = 0x202;
    static constexpr std::uint64_t kDataStream = 0x40000000ull;
    static constexpr std::uint64_t kSampleStream = 0x80000000ull;

    TrainConfig cfg_;
    HpnModel model_;
    HpnModel baseline_;
    std::vector<Tensor> params_;
    std::vector<AdamState> adam_;
    std::vector<Instance> eval_set_;
    std::vector<double> baseline_eval_;
    double lr_ = 0.0;
    int epochs_done_ = 0;
    double epoch_sampled_sum_ = 0.0;
    long long epoch_sampled_count_ = 0;
};

}  // namespace hpn
