#pragma once

// JSON (de)serialization for model and training configs. Unknown keys are
// rejected so config typos fail loudly.

#include <string>

#include <json.hpp>

#include "hpn/config.hpp"
#include "hpn/model.hpp"

namespace hpn {

namespace detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            if (it.key() == a) ok = true;
        if (!ok) throw std::invalid_argument(where + ": unknown field '" + it.key() + "'");
    }
}

}  // namespace detail

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
    return nlohmann::json{{"hidden_dim", c.hidden_dim},
                          {"transformer_layers", c.transformer_layers},
                          {"graph_layers", c.graph_layers},
                          {"feedforward_dim", c.feedforward_dim},
                          {"heads", c.heads},
                          {"tanh_clip", c.tanh_clip},
                          {"aggregator", to_string(c.aggregator)},
                          {"per_step_context", c.per_step_context}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    detail::check_keys(j,
                       {"hidden_dim", "transformer_layers", "graph_layers", "feedforward_dim",
                        "heads", "tanh_clip", "aggregator", "per_step_context"},
                       "model config");
    ModelConfig c;
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.transformer_layers = j.value("transformer_layers", c.transformer_layers);
    c.graph_layers = j.value("graph_layers", c.graph_layers);
    c.feedforward_dim = j.value("feedforward_dim", c.feedforward_dim);
    c.heads = j.value("heads", c.heads);
    c.tanh_clip = j.value("tanh_clip", c.tanh_clip);
    if (j.contains("aggregator")) c.aggregator = aggregator_from_string(j.at("aggregator"));
    c.per_step_context = j.value("per_step_context", c.per_step_context);
    c.validate();
    return c;
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
    return nlohmann::json{{"epochs", c.epochs},
                          {"steps_per_epoch", c.steps_per_epoch},
                          {"batch_size", c.batch_size},
                          {"alpha", c.alpha},
                          {"learning_rate", c.learning_rate},
                          {"lr_decay", c.lr_decay},
                          {"n_cities", c.n_cities},
                          {"eval_n_cities", c.eval_n_cities},
                          {"eval_instances", c.eval_instances},
                          {"seed", c.seed},
                          {"model", model_config_to_json(c.model)}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    detail::check_keys(j,
                       {"epochs", "steps_per_epoch", "batch_size", "alpha", "learning_rate",
                        "lr_decay", "n_cities", "eval_n_cities", "eval_instances", "seed",
                        "model"},
                       "train config");
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.alpha = j.value("alpha", c.alpha);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.n_cities = j.value("n_cities", c.n_cities);
    c.eval_n_cities = j.value("eval_n_cities", c.eval_n_cities);
    c.eval_instances = j.value("eval_instances", c.eval_instances);
    c.seed = j.value("seed", c.seed);
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    c.validate();
    return c;
}

}  // namespace hpn
