#include "pocr/demos.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pocr/byteio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pocr {

KeyframeSet discover_keyframes(const Demonstration& demo, double eps_v) {
    if (demo.steps.empty()) throw std::invalid_argument("discover_keyframes: empty demonstration");
    KeyframeSet kf;
    for (size_t t = 1; t < demo.steps.size(); ++t) {
        const auto& s = demo.steps[t];
        double vmax = 0.0;
        for (float v : s.velocity) vmax = std::max(vmax, static_cast<double>(std::fabs(v)));
        if (s.gripper != demo.steps[t - 1].gripper || vmax < eps_v) kf.indices.push_back(t);
    }
    const size_t last = demo.steps.size() - 1;
    if (kf.indices.empty() || kf.indices.back() != last) kf.indices.push_back(last);
    return kf;
}

std::vector<KeyframePair> to_keyframe_pairs(const Demonstration& demo, const KeyframeSet& keyframes) {
    if (keyframes.indices.empty()) throw std::invalid_argument("to_keyframe_pairs: no keyframes");
    std::vector<KeyframePair> pairs;
    size_t source = 0;
    for (size_t idx : keyframes.indices) {
        if (idx >= demo.steps.size()) throw std::out_of_range("to_keyframe_pairs: keyframe index out of range");
        const auto& s = demo.steps[idx];
        std::vector<float> target = s.pose;
        target.push_back(gripper_value(s.gripper));
        pairs.push_back({source, std::move(target)});
        source = idx;
    }
    return pairs;
}

CropResult random_crop(const Image& image, const std::vector<BinaryMask>& masks, int pad, uint64_t seed) {
    if (pad < 0 || 2 * pad >= std::min(image.width, image.height)) {
        throw std::invalid_argument("random_crop: pad must be < min(W,H)/2");
    }
    CropResult out;
    if (pad > 0) {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<int> off(-pad, pad);
        out.dx = off(rng);
        out.dy = off(rng);
    }
    out.image = translate(image, out.dx, out.dy);
    for (const auto& m : masks) out.masks.push_back(translate(m, out.dx, out.dy));
    return out;
}

namespace {

std::string episode_name(size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "episode_%04zu", i);
    return buf;
}

std::string frame_name(size_t t, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04zu.%s", t, ext);
    return buf;
}

std::vector<uint8_t> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, std::span<const uint8_t> bytes) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + p.string());
}

std::vector<uint8_t> as_bytes(const std::string& s) { return {s.begin(), s.end()}; }

std::string hex32(uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

// Checksum order: steps.jsonl, then per frame its PNG and RLE file.
uint32_t episode_checksum(const fs::path& dir, size_t n_steps, bool has_masks) {
    uint32_t crc = byteio::crc32_of(read_bytes(dir / "steps.jsonl"));
    for (size_t t = 0; t < n_steps; ++t) {
        crc = byteio::crc32_of(read_bytes(dir / frame_name(t, "png")), crc);
        if (has_masks) crc = byteio::crc32_of(read_bytes(dir / "gt_masks" / frame_name(t, "rle")), crc);
    }
    return crc;
}

}  // namespace

void save_dataset(const std::string& root, const std::vector<Demonstration>& demos, const DatasetInfo& info) {
    fs::create_directories(root);
    json episodes = json::array();
    json checksums = json::object();
    for (size_t e = 0; e < demos.size(); ++e) {
        const auto& d = demos[e];
        if (d.steps.empty()) throw std::invalid_argument("save_dataset: empty demonstration");
        const fs::path dir = fs::path(root) / episode_name(e);
        fs::remove_all(dir);
        fs::create_directories(dir);
        const bool has_masks = !d.steps.front().gt_masks.empty();
        if (has_masks) fs::create_directories(dir / "gt_masks");
        std::string lines;
        for (size_t t = 0; t < d.steps.size(); ++t) {
            const auto& s = d.steps[t];
            json j = {{"action", s.action},
                      {"gripper", s.gripper == GripperState::closed ? "closed" : "open"},
                      {"velocity", s.velocity},
                      {"pose", s.pose}};
            lines += j.dump() + "\n";
            write_bytes(dir / frame_name(t, "png"), encode_png(s.observation));
            if (has_masks) {
                std::string rle;
                for (const auto& m : s.gt_masks) rle += encode_rle(m) + "\n";
                write_bytes(dir / "gt_masks" / frame_name(t, "rle"), as_bytes(rle));
            }
        }
        write_bytes(dir / "steps.jsonl", as_bytes(lines));
        const auto name = episode_name(e);
        checksums[name] = "crc32:" + hex32(episode_checksum(dir, d.steps.size(), has_masks));
        episodes.push_back({{"name", name},
                            {"steps", d.steps.size()},
                            {"task", d.metadata.task},
                            {"seed", d.metadata.seed},
                            {"success", d.metadata.success},
                            {"entities", d.metadata.entities},
                            {"waypoints", d.metadata.waypoints},
                            {"gt_masks", has_masks}});
    }
    const json manifest = {{"format_version", 1},
                           {"task", info.task},
                           {"image_size", {info.width, info.height}},
                           {"action_dim", info.action_dim},
                           {"episode_count", demos.size()},
                           {"episodes", episodes},
                           {"checksums", checksums}};
    std::ofstream out(fs::path(root) / "manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write manifest in " + root);
}

std::vector<Demonstration> load_dataset(const std::string& root, DatasetInfo* info) {
    json manifest;
    try {
        const auto bytes = read_bytes(fs::path(root) / "manifest.json");
        manifest = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed manifest: " + std::string(e.what()));
    }
    std::vector<Demonstration> demos;
    try {
        if (info) {
            info->task = manifest.at("task").get<std::string>();
            info->width = manifest.at("image_size").at(0).get<int>();
            info->height = manifest.at("image_size").at(1).get<int>();
            info->action_dim = manifest.at("action_dim").get<int>();
        }
        for (const auto& ep : manifest.at("episodes")) {
            const auto name = ep.at("name").get<std::string>();
            const fs::path dir = fs::path(root) / name;
            const auto n_steps = ep.at("steps").get<size_t>();
            const bool has_masks = ep.at("gt_masks").get<bool>();
            const auto expected = manifest.at("checksums").at(name).get<std::string>();
            std::string actual;
            try {
                actual = "crc32:" + hex32(episode_checksum(dir, n_steps, has_masks));
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("checksum mismatch in " + name + ": " + e.what());
            }
            if (actual != expected) throw std::runtime_error("checksum mismatch in " + name);

            Demonstration d;
            d.metadata.task = ep.at("task").get<std::string>();
            d.metadata.seed = ep.at("seed").get<uint64_t>();
            d.metadata.success = ep.at("success").get<bool>();
            d.metadata.entities = ep.at("entities").get<std::vector<std::string>>();
            d.metadata.waypoints = ep.at("waypoints").get<std::vector<size_t>>();
            std::istringstream lines(std::string(reinterpret_cast<const char*>(read_bytes(dir / "steps.jsonl").data()),
                                                 read_bytes(dir / "steps.jsonl").size()));
            std::string line;
            size_t t = 0;
            while (std::getline(lines, line)) {
                if (line.empty()) continue;
                const auto j = json::parse(line);
                Step s;
                s.action = j.at("action").get<std::vector<float>>();
                s.gripper = j.at("gripper").get<std::string>() == "closed" ? GripperState::closed : GripperState::open;
                s.velocity = j.at("velocity").get<std::vector<float>>();
                s.pose = j.at("pose").get<std::vector<float>>();
                s.observation = decode_png(read_bytes(dir / frame_name(t, "png")));
                if (has_masks) {
                    const auto rle = read_bytes(dir / "gt_masks" / frame_name(t, "rle"));
                    std::istringstream ml(std::string(rle.begin(), rle.end()));
                    std::string mline;
                    while (std::getline(ml, mline))
                        if (!mline.empty()) s.gt_masks.push_back(decode_rle(mline));
                }
                d.steps.push_back(std::move(s));
                ++t;
            }
            if (d.steps.size() != n_steps) throw std::runtime_error("step count mismatch in " + name);
            demos.push_back(std::move(d));
        }
        if (demos.size() != manifest.at("episode_count").get<size_t>()) {
            throw std::runtime_error("manifest episode count does not match its episode list");
        }
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed dataset: " + std::string(e.what()));
    }
    return demos;
}

}  // namespace pocr
