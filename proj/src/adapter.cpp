#include "pocr/adapter.hpp"

#include <httplib.h>

#include <algorithm>

#include "pocr/byteio.hpp"

namespace pocr {

using nlohmann::json;

std::string to_string(EmbedRole r) { return r == EmbedRole::slot ? "slot" : "match"; }

namespace {

const json& field(const json& j, const char* name, json::value_t type) {
    if (!j.is_object()) throw AdapterConfigError("adapter response is not an object");
    const auto it = j.find(name);
    if (it == j.end()) throw AdapterConfigError(std::string("adapter response lacks '") + name + "'");
    const bool ok = type == json::value_t::number_integer ? it->is_number_integer() : it->type() == type;
    if (!ok) throw AdapterConfigError(std::string("adapter response field '") + name + "' has the wrong type");
    return *it;
}

}  // namespace

AdapterHandshake parse_handshake(const json& j) {
    AdapterHandshake h;
    h.protocol_version = field(j, "protocol_version", json::value_t::string).get<std::string>();
    h.segmenter = field(j, "segmenter", json::value_t::string).get<std::string>();
    h.embedder = field(j, "embedder", json::value_t::string).get<std::string>();
    h.dimension = field(j, "dimension", json::value_t::number_integer).get<int>();
    h.match_dimension = field(j, "match_dimension", json::value_t::number_integer).get<int>();
    if (h.protocol_version != kAdapterProtocolVersion)
        throw AdapterConfigError("adapter protocol version " + h.protocol_version + " != client " + kAdapterProtocolVersion);
    if (h.dimension <= 0 || h.match_dimension <= 0) throw AdapterConfigError("adapter dimensions must be positive");
    return h;
}

std::vector<BinaryMask> parse_segment_response(const json& j, int width, int height) {
    const auto& masks = field(j, "masks", json::value_t::array);
    std::vector<BinaryMask> out;
    for (const auto& m : masks) {
        if (!m.is_string()) throw AdapterConfigError("segment mask is not an RLE string");
        BinaryMask mask;
        try {
            mask = decode_rle(m.get<std::string>());
        } catch (const std::exception& e) {
            throw AdapterConfigError(std::string("segment mask: ") + e.what());
        }
        if (mask.width != width || mask.height != height) throw AdapterConfigError("segment mask size differs from the image");
        out.push_back(std::move(mask));
    }
    return out;
}

std::vector<float> parse_embed_response(const json& j, int expected_dimension) {
    const int d = field(j, "dimension", json::value_t::number_integer).get<int>();
    const auto& payload = field(j, "vector", json::value_t::string).get_ref<const std::string&>();
    std::vector<float> v;
    try {
        v = byteio::bytes_to_f32s(byteio::base64_decode(payload));
    } catch (const std::exception& e) {
        throw AdapterConfigError(std::string("embed vector: ") + e.what());
    }
    if (static_cast<int>(v.size()) != d) throw AdapterConfigError("embed vector length differs from 'dimension'");
    if (d != expected_dimension) throw AdapterConfigError("embed dimension differs from the handshake");
    return v;
}

struct AdapterClient::Impl {
    httplib::Client http;
    explicit Impl(const std::string& url) : http(url) {}
};

AdapterClient::AdapterClient(std::string url, int timeout_seconds, int retries)
    : impl_(std::make_unique<Impl>(url)), retries_(std::max(0, retries)) {
    if (!impl_->http.is_valid()) throw AdapterConfigError("invalid adapter url: " + url);
    impl_->http.set_connection_timeout(timeout_seconds, 0);
    impl_->http.set_read_timeout(timeout_seconds, 0);
}

AdapterClient::~AdapterClient() = default;

json AdapterClient::post(const std::string& path, const json& body) {
    const std::string text = body.dump();
    auto res = impl_->http.Post(path, text, "application/json");
    int attempts = 1;
    for (; !res && attempts <= retries_; ++attempts) res = impl_->http.Post(path, text, "application/json");
    if (!res) {
        throw AdapterError("adapter " + path + ": " + httplib::to_string(res.error()) + " after " + std::to_string(attempts) +
                           " attempts");
    }
    if (res->status == 409) throw AdapterConfigError("adapter " + path + ": version conflict: " + res->body);
    if (res->status != 200) throw AdapterError("adapter " + path + ": HTTP " + std::to_string(res->status) + " " + res->body);
    try {
        return json::parse(res->body);
    } catch (const json::parse_error&) {
        throw AdapterConfigError("adapter " + path + ": response is not JSON");
    }
}

const AdapterHandshake& AdapterClient::handshake() {
    caps_ = parse_handshake(post("/handshake", {{"protocol_version", kAdapterProtocolVersion}}));
    connected_ = true;
    return caps_;
}

const AdapterHandshake& AdapterClient::capabilities() const {
    if (!connected_) throw std::logic_error("adapter: handshake has not been performed");
    return caps_;
}

std::vector<BinaryMask> AdapterClient::segment(const Image& image) {
    capabilities();
    const auto png = encode_png(image);
    return parse_segment_response(post("/segment", {{"image", byteio::base64_encode(png)}}), image.width, image.height);
}

std::vector<float> AdapterClient::embed(const Image& image, EmbedRole role) {
    const auto& caps = capabilities();
    const auto png = encode_png(image);
    const json reply = post("/embed", {{"image", byteio::base64_encode(png)}, {"role", to_string(role)}});
    return parse_embed_response(reply, role == EmbedRole::slot ? caps.dimension : caps.match_dimension);
}

RemoteProvider::RemoteProvider(AdapterClient& client, EmbedRole role)
    : client_(&client),
      role_(role),
      dimension_(role == EmbedRole::slot ? client.capabilities().dimension : client.capabilities().match_dimension) {}

std::vector<float> RemoteProvider::describe(const Image& image) const { return client_->embed(image, role_); }

}  // namespace pocr
