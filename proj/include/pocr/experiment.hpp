#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pocr/metrics.hpp"
#include "pocr/pipeline.hpp"
#include "pocr/policy.hpp"
#include "pocr/sim.hpp"

namespace pocr {

/// Invalid or unknown configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class TrainProfile { sim, real };
std::string to_string(TrainProfile p);
TrainProfile parse_train_profile(const std::string& name);

/// Hyperparameter defaults per profile.
struct ProfileDefaults {
    PolicyConfig policy;
    TrainConfig train;
};
ProfileDefaults profile_defaults(TrainProfile p);

/// Pipeline defaults for the simulated desk scenes.
PipelineConfig default_pipeline_config();

struct RunConfig {
    std::string task = "pick_cup_2d";
    int distractors = 2;
    std::vector<uint64_t> seeds = {0, 1, 2};
    int demos = 100;
    int eval_episodes = 100;
    sim::Overlay overlay = sim::Overlay::none;
    double eps_v = kDefaultVelocityEps;
    TrainProfile profile = TrainProfile::sim;
    PipelineConfig pipeline = default_pipeline_config();
    PolicyConfig policy = profile_defaults(TrainProfile::sim).policy;
    TrainConfig train = profile_defaults(TrainProfile::sim).train;
    std::string output_dir;
    std::string dataset;      // empty: <output_dir>/dataset
    std::string adapter_url;  // set with provider "remote"
};

/// Strict parse: profile defaults first, then every key present; unknown
/// keys and wrong types raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
/// JSON Schema (draft 2020-12) for the config file.
nlohmann::json run_config_schema();

sim::TaskSpec task_spec(const RunConfig& c, sim::Overlay overlay);
sim::TaskSpec task_spec(const RunConfig& c);

struct TrainedPolicy {
    Pipeline pipeline;
    PolicyNet net;
    std::vector<std::pair<int, double>> loss_curve;
};

/// Fit the pipeline on `demos`, encode keyframe pairs, run train_bc with
/// the seed in TrainConfig and network init.
TrainedPolicy train_policy(const RunConfig& c, const std::vector<Demonstration>& demos, uint64_t seed,
                           const DescriptorProvider* provider = nullptr);

/// Evaluation rollouts for seed `seed` under `overlay`.
sim::EvalReport evaluate_trained(const TrainedPolicy& p, const RunConfig& c, sim::Overlay overlay, uint64_t seed);

/// One trained configuration over all seeds, evaluated under each overlay.
struct CellResult {
    std::string label;
    std::vector<uint64_t> seeds;
    std::vector<double> final_loss;
    std::vector<std::string> overlays;
    std::vector<std::vector<double>> success;  // [overlay][seed]
    double seconds = 0.0;

    const std::vector<double>& rates(sim::Overlay o) const;
    SuccessStats stats(sim::Overlay o) const { return success_stats(rates(o)); }
    nlohmann::json to_json() const;
};

/// Demonstrations per seed come from generate_demos(task, c.demos, seed);
/// evaluation uses the same seed so cells are paired.
CellResult run_cell(const RunConfig& c, const std::string& label, const std::vector<sim::Overlay>& overlays);

/// Named sweep cells for the ablation harness: where, screening, demos,
/// baseline (structured vs flat).
struct SweepCell {
    std::string label;
    RunConfig config;
    double x = 0.0;  // numeric axis value for line plots
};
std::vector<SweepCell> sweep_cells(const RunConfig& base, const std::string& axis);
bool sweep_is_numeric(const std::string& axis);

/// Flat-descriptor baseline of a run config: the patch provider over the
/// whole frame as a single slot.
RunConfig flat_baseline(const RunConfig& c);

/// FG-ARI of the screened candidates against GT on every frame, and
/// binding accuracy with each episode's first frame as its reference.
struct DatasetMetrics {
    std::vector<double> ari;  // per frame, episode-major
    double ari_mean = 0.0;
    double ari_min = 0.0;
    BindingReport binding;
    nlohmann::json to_json() const;
};
DatasetMetrics dataset_metrics(const Pipeline& pipeline, const std::vector<Demonstration>& demos);

/// Injected background proposals per frame in the screening ablation.
inline constexpr int kAblationInjectedBackground = 20;

}  // namespace pocr
