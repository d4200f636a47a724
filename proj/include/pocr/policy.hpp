#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pocr/whatwhere.hpp"

namespace pocr {

enum class Activation { relu, leaky_relu };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

inline constexpr double kLeakySlope = 0.01;

struct AttentionConfig {
    int heads = 4;
    int hidden = 256;
    bool operator==(const AttentionConfig&) const = default;
};

/// Input layout: k slots of width dimension + |where|, A action outputs.
struct PolicyLayout {
    int k = kDefaultSlotCount;
    int dimension = 0;
    WhereVariant variant = WhereVariant::bbox;
    int action_dim = 3;

    int slot_width() const { return dimension + where_width(variant); }
    bool operator==(const PolicyLayout&) const = default;
};

struct PolicyConfig {
    std::optional<AttentionConfig> sa;
    std::vector<int> mlp = {256, 256};
    Activation activation = Activation::leaky_relu;
    /// Excludes all-zero slots from attention and from the slot sum.
    bool suppress_empty_slots = false;
    bool operator==(const PolicyConfig&) const = default;
};

/// One training example: per-slot [z, where] rows and the target action.
struct Sample {
    SceneRepresentation scene;
    std::vector<float> action;
};

struct Gradient {
    std::vector<double> values;
};

/// pi(s) = MLP( sum_i SA([z_i, where_i]) ), SA optional, parameters stored
/// as one flat vector.
class PolicyNet {
public:
    struct Block {
        std::string name;
        int rows;
        int cols;
        size_t offset;
    };

    PolicyNet() = default;
    PolicyNet(PolicyLayout layout, PolicyConfig config, uint64_t seed);

    const PolicyLayout& layout() const { return layout_; }
    const PolicyConfig& config() const { return config_; }
    const std::vector<Block>& blocks() const { return blocks_; }
    std::vector<double>& parameters() { return theta_; }
    const std::vector<double>& parameters() const { return theta_; }
    size_t parameter_count() const { return theta_.size(); }

    std::vector<double> forward(const SceneRepresentation& scene) const;
    std::vector<std::vector<double>> forward_batch(std::span<const SceneRepresentation* const> scenes) const;

private:
    friend struct PolicyAccess;
    PolicyLayout layout_;
    PolicyConfig config_;
    std::vector<Block> blocks_;
    std::vector<double> theta_;
};

/// Mean-squared behaviour-cloning loss and its gradient (double precision).
std::pair<double, Gradient> loss_and_grad(const PolicyNet& net, std::span<const Sample> batch);

/// Same computation in single precision; used by the trainer.
std::pair<double, Gradient> loss_and_grad_f32(const PolicyNet& net, std::span<const Sample* const> batch);

double batch_loss(const PolicyNet& net, std::span<const Sample> batch);

struct AdamHyper {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
};

void adam_step(std::vector<double>& theta, std::span<const double> grad, AdamState& state, const AdamHyper& hyper);

enum class AugmentationKind { none, random_crop };

struct TrainConfig {
    AdamHyper adam;
    int batch_size = 128;
    int gradient_steps = 250000;
    uint64_t seed = 0;
    AugmentationKind augmentation = AugmentationKind::none;
    int crop_pad = 4;
    double divergence_limit = 1e6;
};

/// Hands out the training example for index i, optionally re-rendered under
/// a fresh augmentation draw (seeded per call).
using SampleSource = std::function<Sample(size_t index, uint64_t augmentation_seed)>;

struct TrainResult {
    PolicyNet net;
    std::vector<std::pair<int, double>> loss_curve;
};

struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

TrainResult train_bc(PolicyNet net, std::span<const Sample> dataset, const TrainConfig& cfg,
                     const SampleSource& augment = {}, int log_every = 50);

// Checkpoint: "POCRCKPT", u32 header length, JSON header, u32 parameter
// count, little-endian f32 parameters.
void save_checkpoint(const std::string& path, const PolicyNet& net, const nlohmann::json& extra = {});
PolicyNet load_checkpoint(const std::string& path, nlohmann::json* header = nullptr);

nlohmann::json to_json(const PolicyLayout& l);
nlohmann::json to_json(const PolicyConfig& c);
PolicyLayout policy_layout_from_json(const nlohmann::json& j);
PolicyConfig policy_config_from_json(const nlohmann::json& j);

void write_loss_csv(const std::string& path, const std::vector<std::pair<int, double>>& curve);

}  // namespace pocr
