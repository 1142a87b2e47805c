#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "hpn/model.hpp"

namespace hpn {

struct TrainConfig {
    int epochs = 1;
    int steps_per_epoch = 1;
    int batch_size = 64;
    double alpha = 0.05;  // significance for the baseline-refresh t-test
    double learning_rate = 1e-4;
    double lr_decay = 1.0;  // multiplied onto the learning rate after each epoch
    int n_cities = 10;
    int eval_n_cities = 0;      // 0 means same as n_cities
    int eval_instances = 1000;  // held-out set used by the t-test gate
    std::uint64_t seed = 0;
    ModelConfig model;

    int effective_eval_n() const { return eval_n_cities > 0 ? eval_n_cities : n_cities; }

    void validate() const {
        if (epochs < 0) throw std::invalid_argument("epochs: must be >= 0");
        if (steps_per_epoch < 1) throw std::invalid_argument("steps_per_epoch: must be >= 1");
        if (batch_size < 2)
            throw std::invalid_argument(
                "batch_size: must be >= 2; the one-sided paired t-test needs variance "
                "across rollouts");
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("alpha: must lie strictly between 0 and 1");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate: must be positive");
        if (!(lr_decay > 0.0)) throw std::invalid_argument("lr_decay: must be positive");
        if (n_cities < 1) throw std::invalid_argument("n_cities: must be >= 1");
        if (eval_n_cities < 0) throw std::invalid_argument("eval_n_cities: must be >= 0");
        if (eval_instances < 2)
            throw std::invalid_argument("eval_instances: must be >= 2 for the paired t-test");
        model.validate();
    }
};

}  // namespace hpn
