#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wingen/checkpoint.hpp"
#include "wingen/director.hpp"
#include "wingen/dubbing.hpp"
#include "wingen/trainer.hpp"

namespace wingen {

/// Malformed run configuration; `key` is the dotted path of the offending entry.
struct ConfigKeyError : ConfigError {
    std::string key;
    ConfigKeyError(std::string k, const std::string& msg) : ConfigError(msg), key(std::move(k)) {}
};

struct FixtureSetConfig {
    std::size_t count = 16;
    std::size_t frames = 64;
    std::uint64_t seed = 1000;
    std::size_t eval_batch = 16;
};

struct SeedConfig {
    std::uint64_t init = 1;
    std::uint64_t adapter = 2;
    std::uint64_t batches = 7;
};

/// Everything a command needs. Precedence: preset defaults < config file < command-line flags.
struct RunConfig {
    std::string preset = "desk";
    ModelConfig model = ModelConfig::desk();
    CodecConfig codec{};
    GenerationConfig generation{};
    TrainConfig train = TrainConfig::desk();
    WindowPlan window{};
    DubbingConfig dubbing{};
    EndpointConfig director{};
    FixtureSetConfig fixtures{};
    SeedConfig seeds{};
    std::string out = "out";

    static RunConfig from_preset(const std::string& name);
};

nlohmann::json to_json(const RunConfig& rc);

/// Strict parse: every key must exist in the preset's defaults (the preset is taken from
/// the "preset" key, default "desk") and carry a compatible type.
RunConfig parse_run_config(const nlohmann::json& j);

void validate(const RunConfig& rc);

/// FNV-1a over the model and codec sections; stored in checkpoints.
std::uint64_t model_digest(const RunConfig& rc);

std::vector<FixtureRecord> standard_fixtures(const FixtureSetConfig& fc);

struct TrainingOutcome {
    double initial_eval_loss = 0;
    double final_eval_loss = 0;
    std::vector<StepMetrics> steps;
};

/// Trains `params`/`adapter` in place on the standard fixture set. The eval loss is
/// measured on a fixed batch with fixed noise before and after.
TrainingOutcome train_standard(const RunConfig& rc, ModelParams& params, LoraAdapter& adapter,
                               const std::function<void(const StepMetrics&)>& on_step = {});

}  // namespace wingen
