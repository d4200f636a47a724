#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pocr/descriptors.hpp"
#include "pocr/imaging.hpp"

namespace pocr {

inline constexpr const char* kAdapterProtocolVersion = "1";

/// Version mismatch or malformed capabilities: a configuration problem.
struct AdapterConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Transport failures and non-200 replies.
struct AdapterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AdapterHandshake {
    std::string protocol_version;
    std::string segmenter;
    std::string embedder;
    int dimension = 0;
    int match_dimension = 0;
};

enum class EmbedRole { slot, match };
std::string to_string(EmbedRole r);

/// Response validators; throw AdapterConfigError describing the first
/// violation.
AdapterHandshake parse_handshake(const nlohmann::json& j);
std::vector<BinaryMask> parse_segment_response(const nlohmann::json& j, int width, int height);
std::vector<float> parse_embed_response(const nlohmann::json& j, int expected_dimension);

/// HTTP/JSON client. `url` is "http://host:port". Transport failures are
/// retried `retries` times; HTTP error replies are not.
class AdapterClient {
public:
    explicit AdapterClient(std::string url, int timeout_seconds = 30, int retries = 2);
    ~AdapterClient();
    AdapterClient(const AdapterClient&) = delete;
    AdapterClient& operator=(const AdapterClient&) = delete;

    /// Must succeed before segment/embed.
    const AdapterHandshake& handshake();
    const AdapterHandshake& capabilities() const;
    bool connected() const { return connected_; }

    std::vector<BinaryMask> segment(const Image& image);
    std::vector<float> embed(const Image& image, EmbedRole role);

private:
    nlohmann::json post(const std::string& path, const nlohmann::json& body);

    struct Impl;
    std::unique_ptr<Impl> impl_;
    int retries_;
    AdapterHandshake caps_;
    bool connected_ = false;
};

/// Descriptor provider backed by the adapter's embed endpoint.
class RemoteProvider final : public DescriptorProvider {
public:
    RemoteProvider(AdapterClient& client, EmbedRole role);
    ProviderKind kind() const override { return ProviderKind::remote; }
    int dimension() const override { return dimension_; }
    std::vector<float> describe(const Image& image) const override;

private:
    AdapterClient* client_;
    EmbedRole role_;
    int dimension_;
};

}  // namespace pocr
