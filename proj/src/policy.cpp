#include "pocr/policy.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "pocr/autodiff.hpp"
#include "pocr/byteio.hpp"

namespace pocr {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "leaky_relu"; }

Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "leaky_relu") return Activation::leaky_relu;
    throw std::invalid_argument("unknown activation: " + name);
}

PolicyNet::PolicyNet(PolicyLayout layout, PolicyConfig config, uint64_t seed)
    : layout_(layout), config_(std::move(config)) {
    if (layout_.k <= 0 || layout_.action_dim <= 0 || layout_.slot_width() <= 0) {
        throw std::invalid_argument("policy layout must have positive k, slot width and action dim");
    }
    const int width = layout_.slot_width();
    std::vector<int> fan_ins;
    auto add = [this, &fan_ins](std::string name, int rows, int cols, int fan_in) {
        blocks_.push_back({std::move(name), rows, cols, theta_.size()});
        theta_.resize(theta_.size() + static_cast<size_t>(rows) * cols);
        fan_ins.push_back(fan_in);
    };
    if (config_.sa) {
        const int h = config_.sa->hidden;
        if (config_.sa->heads <= 0 || h % config_.sa->heads != 0) {
            throw std::invalid_argument("attention hidden width must be divisible by heads");
        }
        add("sa.wq", width, h, width);
        add("sa.bq", 1, h, width);
        add("sa.wk", width, h, width);
        add("sa.bk", 1, h, width);
        add("sa.wv", width, h, width);
        add("sa.bv", 1, h, width);
        add("sa.wo", h, width, h);
        add("sa.bo", 1, width, h);
    }
    int in = width;
    for (size_t i = 0; i < config_.mlp.size(); ++i) {
        add("mlp." + std::to_string(i) + ".w", in, config_.mlp[i], in);
        add("mlp." + std::to_string(i) + ".b", 1, config_.mlp[i], in);
        in = config_.mlp[i];
    }
    add("head.w", in, layout_.action_dim, in);
    add("head.b", 1, layout_.action_dim, in);

    // uniform(-s, s), s = 1/sqrt(fan_in); a bias shares its weight's fan-in.
    std::mt19937_64 rng(seed);
    for (size_t i = 0; i < blocks_.size(); ++i) {
        const auto& b = blocks_[i];
        const double s = 1.0 / std::sqrt(static_cast<double>(fan_ins[i]));
        std::uniform_real_distribution<double> u(-s, s);
        for (int j = 0; j < b.rows * b.cols; ++j) theta_[b.offset + j] = u(rng);
    }
}

struct PolicyAccess {
    template <typename S>
    struct Graph {
        ad::Tape<S> tape;
        ad::NodeId output = -1;
    };

    template <typename S>
    static ad::Matrix<S> stack_inputs(const PolicyNet& net, std::span<const SceneRepresentation* const> scenes) {
        const auto& l = net.layout_;
        const int w = l.slot_width();
        ad::Matrix<S> x(static_cast<long>(scenes.size()) * l.k, w);
        for (size_t b = 0; b < scenes.size(); ++b) {
            const auto& s = *scenes[b];
            if (s.k() != l.k || s.dimension != l.dimension || s.variant != l.variant) {
                throw std::invalid_argument("scene layout (k=" + std::to_string(s.k()) + ", D=" +
                                            std::to_string(s.dimension) + ", where=" + to_string(s.variant) +
                                            ") does not match the policy layout");
            }
            const auto flat = s.flatten();
            for (int i = 0; i < l.k; ++i)
                for (int c = 0; c < w; ++c) x(static_cast<long>(b) * l.k + i, c) = static_cast<S>(flat[static_cast<size_t>(i) * w + c]);
        }
        return x;
    }

    template <typename S>
    static void build(Graph<S>& g, const PolicyNet& net, const std::vector<S>& theta, ad::Matrix<S> x) {
        auto& tape = g.tape;
        const auto& cfg = net.config_;
        size_t bi = 0;
        auto param = [&]() {
            const auto& b = net.blocks_[bi++];
            return tape.parameter(theta.data() + b.offset, b.rows, b.cols, b.offset);
        };
        std::vector<char> live;
        if (cfg.suppress_empty_slots) {
            live.resize(x.rows());
            for (long r = 0; r < x.rows(); ++r) live[r] = x.row(r).cwiseAbs().maxCoeff() > 0 ? 1 : 0;
        }
        ad::NodeId h = tape.constant(std::move(x));
        if (cfg.sa) {
            const auto wq = param(), bq = param(), wk = param(), bk = param();
            const auto wv = param(), bv = param(), wo = param(), bo = param();
            const auto q = tape.add_row(tape.matmul(h, wq), bq);
            const auto k = tape.add_row(tape.matmul(h, wk), bk);
            const auto v = tape.add_row(tape.matmul(h, wv), bv);
            const auto att = tape.attention(q, k, v, net.layout_.k, cfg.sa->heads, live);
            const auto o = tape.add_row(tape.matmul(att, wo), bo);
            h = tape.add(h, o);
        }
        h = tape.group_sum(h, net.layout_.k, live);
        const S slope = cfg.activation == Activation::leaky_relu ? static_cast<S>(kLeakySlope) : S(0);
        for (size_t i = 0; i < cfg.mlp.size(); ++i) {
            const auto w = param(), b = param();
            h = tape.leaky_relu(tape.add_row(tape.matmul(h, w), b), slope);
        }
        const auto w = param(), b = param();
        g.output = tape.add_row(tape.matmul(h, w), b);
    }

    template <typename S>
    static std::vector<S> cast_theta(const PolicyNet& net) {
        return std::vector<S>(net.theta_.begin(), net.theta_.end());
    }

    template <typename S>
    static std::pair<double, Gradient> loss_grad(const PolicyNet& net, std::span<const Sample* const> batch) {
        if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
        std::vector<const SceneRepresentation*> scenes;
        ad::Matrix<S> target(static_cast<long>(batch.size()), net.layout_.action_dim);
        for (size_t b = 0; b < batch.size(); ++b) {
            scenes.push_back(&batch[b]->scene);
            if (static_cast<int>(batch[b]->action.size()) != net.layout_.action_dim) {
                throw std::invalid_argument("loss_and_grad: action dimension mismatch");
            }
            for (int a = 0; a < net.layout_.action_dim; ++a) target(static_cast<long>(b), a) = static_cast<S>(batch[b]->action[a]);
        }
        const auto theta = cast_theta<S>(net);
        Graph<S> g;
        build(g, net, theta, stack_inputs<S>(net, scenes));
        const auto loss = g.tape.mse(g.output, target);
        const double value = static_cast<double>(g.tape.value(loss)(0, 0));
        if (!std::isfinite(value)) throw std::runtime_error("loss_and_grad: non-finite loss");
        std::vector<S> grad(theta.size(), S(0));
        g.tape.backward(loss, grad);
        return {value, Gradient{std::vector<double>(grad.begin(), grad.end())}};
    }
};

std::vector<std::vector<double>> PolicyNet::forward_batch(std::span<const SceneRepresentation* const> scenes) const {
    PolicyAccess::Graph<double> g;
    PolicyAccess::build(g, *this, theta_, PolicyAccess::stack_inputs<double>(*this, scenes));
    const auto& out = g.tape.value(g.output);
    std::vector<std::vector<double>> result(scenes.size());
    for (size_t b = 0; b < scenes.size(); ++b) {
        result[b].resize(layout_.action_dim);
        for (int a = 0; a < layout_.action_dim; ++a) result[b][a] = out(static_cast<long>(b), a);
    }
    return result;
}

std::vector<double> PolicyNet::forward(const SceneRepresentation& scene) const {
    const SceneRepresentation* p = &scene;
    return forward_batch(std::span<const SceneRepresentation* const>(&p, 1)).front();
}

std::pair<double, Gradient> loss_and_grad(const PolicyNet& net, std::span<const Sample> batch) {
    std::vector<const Sample*> ptrs;
    for (const auto& s : batch) ptrs.push_back(&s);
    return PolicyAccess::loss_grad<double>(net, ptrs);
}

std::pair<double, Gradient> loss_and_grad_f32(const PolicyNet& net, std::span<const Sample* const> batch) {
    return PolicyAccess::loss_grad<float>(net, batch);
}

double batch_loss(const PolicyNet& net, std::span<const Sample> batch) {
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
    std::vector<const SceneRepresentation*> scenes;
    for (const auto& s : batch) scenes.push_back(&s.scene);
    const auto out = net.forward_batch(scenes);
    double total = 0.0;
    for (size_t b = 0; b < batch.size(); ++b) {
        double se = 0.0;
        for (size_t a = 0; a < out[b].size(); ++a) se += std::pow(out[b][a] - batch[b].action[a], 2);
        total += se / static_cast<double>(out[b].size());
    }
    return total / static_cast<double>(batch.size());
}

void adam_step(std::vector<double>& theta, std::span<const double> grad, AdamState& state, const AdamHyper& hyper) {
    if (grad.size() != theta.size()) throw std::invalid_argument("adam_step: gradient length mismatch");
    if (state.m.size() != theta.size()) {
        state.m.assign(theta.size(), 0.0);
        state.v.assign(theta.size(), 0.0);
        state.step = 0;
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < theta.size(); ++i) {
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grad[i];
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        theta[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    }
}

TrainResult train_bc(PolicyNet net, std::span<const Sample> dataset, const TrainConfig& cfg, const SampleSource& augment,
                     int log_every) {
    if (dataset.empty()) throw std::invalid_argument("train_bc: empty dataset");
    if (cfg.batch_size < 1) throw std::invalid_argument("train_bc: batch_size must be >= 1");
    if (!(cfg.adam.lr >= 0.0)) throw std::invalid_argument("train_bc: learning rate must be >= 0");
    TrainResult result;
    AdamState state;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<size_t> pick(0, dataset.size() - 1);
    const bool use_aug = cfg.augmentation == AugmentationKind::random_crop && augment;
    std::vector<Sample> augmented;
    std::vector<const Sample*> batch(cfg.batch_size);
    double window = 0.0;
    int window_n = 0;
    for (int step = 0; step < cfg.gradient_steps; ++step) {
        if (use_aug) augmented.clear(), augmented.reserve(cfg.batch_size);
        for (int b = 0; b < cfg.batch_size; ++b) {
            const size_t idx = pick(rng);
            if (use_aug) {
                augmented.push_back(augment(idx, rng()));
                batch[b] = &augmented.back();
            } else {
                batch[b] = &dataset[idx];
            }
        }
        auto [loss, grad] = loss_and_grad_f32(net, batch);
        if (!std::isfinite(loss) || loss > cfg.divergence_limit) {
            throw TrainingDiverged("training diverged at step " + std::to_string(step) + ": loss " + std::to_string(loss) +
                                   " (lr " + std::to_string(cfg.adam.lr) + ")");
        }
        adam_step(net.parameters(), grad.values, state, cfg.adam);
        window += loss;
        ++window_n;
        if (log_every > 0 && ((step + 1) % log_every == 0 || step + 1 == cfg.gradient_steps)) {
            result.loss_curve.emplace_back(step + 1, window / window_n);
            window = 0.0;
            window_n = 0;
        }
    }
    result.net = std::move(net);
    return result;
}

nlohmann::json to_json(const PolicyLayout& l) {
    return {{"k", l.k}, {"dimension", l.dimension}, {"where", to_string(l.variant)}, {"action_dim", l.action_dim}};
}

nlohmann::json to_json(const PolicyConfig& c) {
    nlohmann::json j = {{"mlp", c.mlp}, {"activation", to_string(c.activation)}, {"suppress_empty_slots", c.suppress_empty_slots}};
    j["sa"] = c.sa ? nlohmann::json{{"heads", c.sa->heads}, {"hidden", c.sa->hidden}} : nlohmann::json(nullptr);
    return j;
}

PolicyLayout policy_layout_from_json(const nlohmann::json& j) {
    return {j.at("k").get<int>(), j.at("dimension").get<int>(), parse_where_variant(j.at("where").get<std::string>()),
            j.at("action_dim").get<int>()};
}

PolicyConfig policy_config_from_json(const nlohmann::json& j) {
    PolicyConfig c;
    c.mlp = j.at("mlp").get<std::vector<int>>();
    c.activation = parse_activation(j.at("activation").get<std::string>());
    c.suppress_empty_slots = j.value("suppress_empty_slots", false);
    if (!j.at("sa").is_null()) c.sa = AttentionConfig{j["sa"].at("heads").get<int>(), j["sa"].at("hidden").get<int>()};
    return c;
}

namespace {
constexpr char kCheckpointMagic[8] = {'P', 'O', 'C', 'R', 'C', 'K', 'P', 'T'};
}

void save_checkpoint(const std::string& path, const PolicyNet& net, const nlohmann::json& extra) {
    nlohmann::json header = {{"layout", to_json(net.layout())}, {"config", to_json(net.config())}};
    for (auto it = extra.begin(); extra.is_object() && it != extra.end(); ++it) header[it.key()] = it.value();
    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.write(kCheckpointMagic, 8);
    byteio::put_u32(out, static_cast<uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    byteio::put_u32(out, static_cast<uint32_t>(net.parameter_count()));
    for (double v : net.parameters()) byteio::put_f32(out, static_cast<float>(v));
    if (!out) throw std::runtime_error("write failed: " + path);
}

PolicyNet load_checkpoint(const std::string& path, nlohmann::json* header_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[8];
    if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kCheckpointMagic)) throw std::runtime_error("not a checkpoint: " + path);
    const auto len = byteio::get_u32(in);
    std::string text(len, '\0');
    if (!in.read(text.data(), len)) throw std::runtime_error("truncated checkpoint header");
    const auto header = nlohmann::json::parse(text);
    PolicyNet net(policy_layout_from_json(header.at("layout")), policy_config_from_json(header.at("config")), 0);
    const auto n = byteio::get_u32(in);
    if (n != net.parameter_count()) throw std::runtime_error("checkpoint parameter count does not match its layout");
    for (auto& v : net.parameters()) v = byteio::get_f32(in);
    if (header_out) *header_out = header;
    return net;
}

void write_loss_csv(const std::string& path, const std::vector<std::pair<int, double>>& curve) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "step,loss\n";
    for (const auto& [step, loss] : curve) out << step << ',' << loss << '\n';
}

}  // namespace pocr
