#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <map>
#include <thread>

#include "pocr/adapter.hpp"
#include "pocr/byteio.hpp"
#include "pocr/experiment.hpp"

using namespace pocr;
using nlohmann::json;

namespace {

constexpr int kSide = 16;

// Debug embedders, written without the library's providers.
std::vector<float> debug_gray(const Image& img) {
    std::vector<float> out(kSide * kSide, 0.0f);
    for (int by = 0; by < kSide; ++by)
        for (int bx = 0; bx < kSide; ++bx) {
            float sum = 0.0f;
            int n = 0;
            for (int y = 0; y < img.height; ++y) {
                if (y * kSide / img.height != by) continue;
                for (int x = 0; x < img.width; ++x) {
                    if (x * kSide / img.width != bx) continue;
                    sum += 0.299f * img.at(x, y, 0) + 0.587f * img.at(x, y, 1) + 0.114f * img.at(x, y, 2);
                    ++n;
                }
            }
            out[by * kSide + bx] = n ? sum / static_cast<float>(n) : 0.0f;
        }
    return out;
}

std::vector<float> debug_identity(const Image& img) {
    std::vector<float> out;
    for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x)
            for (int c = 0; c < 3; ++c) out.push_back(img.at(x * img.width / kSide, y * img.height / kSide, c));
    return out;
}

// One mask per distinct non-background colour.
std::vector<BinaryMask> debug_color_segments(const Image& img, const std::vector<sim::Rgb>& palette) {
    std::vector<BinaryMask> out;
    for (const auto& col : palette) {
        BinaryMask m(img.width, img.height);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                if (img.at(x, y, 0) == col.r / 255.0f && img.at(x, y, 1) == col.g / 255.0f && img.at(x, y, 2) == col.b / 255.0f)
                    m.set(x, y);
        if (!m.empty()) out.push_back(std::move(m));
    }
    return out;
}

struct MockAdapter {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::string version = "1";
    int segment_status = 200;
    bool short_vectors = false;
    std::vector<sim::Rgb> palette;
    std::atomic<int> embed_calls{0};

    MockAdapter() {
        server.Post("/handshake", [this](const httplib::Request& req, httplib::Response& res) {
            const auto body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || body.value("protocol_version", "") != "1") {
                res.status = 409;
                res.set_content(R"({"error": "protocol version mismatch"})", "application/json");
                return;
            }
            res.set_content(json{{"protocol_version", version}, {"segmenter", "debug-color"}, {"embedder", "debug-gray"},
                                 {"dimension", kSide * kSide}, {"match_dimension", 3 * kSide * kSide}}
                                .dump(),
                            "application/json");
        });
        server.Post("/segment", [this](const httplib::Request& req, httplib::Response& res) {
            Image img;
            if (!decode(req, img) || segment_status != 200) {
                res.status = segment_status != 200 ? segment_status : 400;
                return;
            }
            json masks = json::array();
            for (const auto& m : debug_color_segments(img, palette)) masks.push_back(encode_rle(m));
            res.set_content(json{{"masks", masks}}.dump(), "application/json");
        });
        server.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
            Image img;
            if (!decode(req, img)) {
                res.status = 400;
                return;
            }
            ++embed_calls;
            const bool slot = json::parse(req.body).value("role", "slot") == "slot";
            auto v = slot ? debug_gray(img) : debug_identity(img);
            const int dim = static_cast<int>(v.size());
            if (short_vectors) v.pop_back();
            res.set_content(json{{"dimension", dim}, {"vector", byteio::base64_encode(byteio::f32s_to_bytes(v))}}.dump(),
                            "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~MockAdapter() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }

    static bool decode(const httplib::Request& req, Image& img) {
        const auto body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.contains("image") || !body["image"].is_string()) return false;
        try {
            img = decode_png(byteio::base64_decode(body["image"].get<std::string>()));
        } catch (const std::exception&) {
            return false;
        }
        return true;
    }
};

std::vector<sim::Rgb> scene_palette() {
    std::vector<sim::Rgb> p = {sim::target_color(), sim::fixed_distractor_color()};
    p.insert(p.end(), sim::distractor_palette().begin(), sim::distractor_palette().end());
    p.push_back(sim::gripper_color());
    return p;
}

}  // namespace

TEST_CASE("adapter handshake reports the dimensions the client uses") {
    MockAdapter mock;
    AdapterClient client(mock.url(), 5);
    CHECK_THROWS_AS(client.capabilities(), std::logic_error);
    const auto& caps = client.handshake();
    CHECK(caps.dimension == 256);
    CHECK(caps.match_dimension == 3 * 16 * 16);
    CHECK(caps.embedder == "debug-gray");
    RemoteProvider slot(client, EmbedRole::slot), match(client, EmbedRole::match);
    CHECK(slot.dimension() == 256);
    CHECK(match.dimension() == 768);
    CHECK(slot.kind() == ProviderKind::remote);
}

TEST_CASE("adapter version mismatch is a configuration error") {
    MockAdapter mock;
    mock.version = "2";
    AdapterClient client(mock.url(), 5);
    CHECK_THROWS_AS(client.handshake(), AdapterConfigError);
    CHECK_FALSE(client.connected());

    httplib::Client raw(mock.url());
    const auto res = raw.Post("/handshake", R"({"protocol_version": "0"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 409);
}

TEST_CASE("adapter segment: debug colour backend reproduces the oracle masks") {
    MockAdapter mock;
    mock.palette = scene_palette();
    AdapterClient client(mock.url(), 5);
    client.handshake();
    const auto task = sim::make_task("pick_cup_2d");
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const auto obs = sim::render(sim::reset(task, seed), task);
        const auto masks = client.segment(obs.image);
        REQUIRE(masks.size() == obs.gt_masks.size());
        for (const auto& gt : obs.gt_masks) CHECK(std::find(masks.begin(), masks.end(), gt) != masks.end());
    }
    const auto tiny = client.segment(Image(1, 1, 0.3f));
    CHECK(tiny.size() <= 1);

    httplib::Client raw(mock.url());
    const auto res = raw.Post("/segment", R"({"image": "@@not base64@@"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);

    mock.segment_status = 400;
    CHECK_THROWS_AS(client.segment(Image(4, 4)), AdapterError);
}

TEST_CASE("adapter embed: determinism, role lengths, malformed vectors") {
    MockAdapter mock;
    AdapterClient client(mock.url(), 5);
    client.handshake();
    const auto task = sim::make_task("pick_cup_2d");
    const auto img = sim::render(sim::reset(task, 0), task).image;
    CHECK(client.embed(img, EmbedRole::slot) == client.embed(img, EmbedRole::slot));
    CHECK(client.embed(img, EmbedRole::slot).size() == 256);
    CHECK(client.embed(img, EmbedRole::match).size() == 768);
    mock.short_vectors = true;
    CHECK_THROWS_AS(client.embed(img, EmbedRole::slot), AdapterConfigError);
}

TEST_CASE("remote provider with the debug backend equals the patch provider bit for bit") {
    MockAdapter mock;
    AdapterClient client(mock.url(), 5);
    client.handshake();
    RemoteProvider remote(client, EmbedRole::slot);

    RunConfig c;
    c.pipeline.provider = ProviderKind::patch;
    const auto demos = sim::generate_demos(task_spec(c), 3, 2);
    const auto local = Pipeline::fit(c.pipeline, demos);
    const auto via_adapter = Pipeline::fit(c.pipeline, demos, &remote);
    int frames = 0;
    for (const auto& d : demos)
        for (size_t t = 0; t < d.steps.size() && frames < 20; ++t, ++frames) {
            const auto key = frame_key(d.metadata.seed, t);
            const auto a = local.represent(d.steps[t].observation, d.steps[t].gt_masks, key);
            const auto b = via_adapter.represent(d.steps[t].observation, d.steps[t].gt_masks, key);
            CHECK(a.flatten() == b.flatten());
        }
    CHECK(frames == 20);
    CHECK(mock.embed_calls > 0);
}

TEST_CASE("response validators") {
    CHECK_THROWS_AS(parse_handshake(json{{"protocol_version", "1"}}), AdapterConfigError);
    CHECK_THROWS_AS(parse_handshake(json{{"protocol_version", "1"}, {"segmenter", "s"}, {"embedder", "e"}, {"dimension", 0},
                                         {"match_dimension", 3}}),
                    AdapterConfigError);
    CHECK_THROWS_AS(parse_handshake(json{{"protocol_version", "1"}, {"segmenter", "s"}, {"embedder", "e"},
                                         {"dimension", "256"}, {"match_dimension", 3}}),
                    AdapterConfigError);
    CHECK(parse_handshake(json{{"protocol_version", "1"}, {"segmenter", "s"}, {"embedder", "e"}, {"dimension", 8},
                               {"match_dimension", 3}})
              .dimension == 8);

    BinaryMask m(3, 2);
    m.set(1, 1);
    CHECK(parse_segment_response(json{{"masks", {encode_rle(m)}}}, 3, 2).front() == m);
    CHECK_THROWS_AS(parse_segment_response(json{{"masks", {encode_rle(m)}}}, 4, 2), AdapterConfigError);
    CHECK_THROWS_AS(parse_segment_response(json{{"masks", {7}}}, 3, 2), AdapterConfigError);
    CHECK_THROWS_AS(parse_segment_response(json{{"mask", json::array()}}, 3, 2), AdapterConfigError);

    const std::vector<float> v = {1.5f, -2.0f};
    const auto b64 = byteio::base64_encode(byteio::f32s_to_bytes(v));
    CHECK(parse_embed_response(json{{"dimension", 2}, {"vector", b64}}, 2) == v);
    CHECK_THROWS_AS(parse_embed_response(json{{"dimension", 2}, {"vector", b64}}, 3), AdapterConfigError);
    CHECK_THROWS_AS(parse_embed_response(json{{"dimension", 3}, {"vector", b64}}, 3), AdapterConfigError);
    CHECK_THROWS_AS(parse_embed_response(json{{"dimension", 2}, {"vector", "abc"}}, 2), AdapterConfigError);
}

TEST_CASE("an unreachable adapter fails after retries") {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }  // closed again: nothing listens here now
    AdapterClient client("http://127.0.0.1:" + std::to_string(port), 1, 2);
    CHECK_THROWS_WITH_AS(client.handshake(), doctest::Contains("3 attempts"), AdapterError);
}
