#include "monoforge/translate/backend.hpp"

#include <json.hpp>

// httplib pulls in its own socket handling; keep it out of the header.
#include <httplib.h>

namespace monoforge {

using nlohmann::json;

void MtBackendDescriptor::validate() const {
    if (endpoint.empty()) throw Error("mt backend: empty endpoint");
    if (beam < 1) throw Error("mt backend: beam must be >= 1");
    if (batch_size < 1) throw Error("mt backend: batch size must be >= 1");
    if (src.code.empty() || tgt.code.empty()) {
        throw Error("mt backend: source and target languages required");
    }
}

std::vector<std::string> TableBackend::translate_batch(
    const std::vector<std::string>& sentences) {
    std::vector<std::string> out;
    out.reserve(sentences.size());
    for (const std::string& s : sentences) {
        auto it = table_.find(s);
        if (it == table_.end()) {
            throw Error("table backend: no translation for \"" + s + "\"");
        }
        out.push_back(it->second);
    }
    return out;
}

struct HttpBackend::Impl {
    std::string host_and_port;  // scheme://host:port
    std::string path;
};

HttpBackend::HttpBackend(MtBackendDescriptor descriptor)
    : descriptor_(std::move(descriptor)), impl_(std::make_unique<Impl>()) {
    descriptor_.validate();
    const std::string& url = descriptor_.endpoint;
    // Split scheme://host[:port] from the request path.
    const size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error("mt backend: endpoint is not an http(s) URL: " + url);
    }
    const size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        impl_->host_and_port = url;
        impl_->path = "/";
    } else {
        impl_->host_and_port = url.substr(0, path_start);
        impl_->path = url.substr(path_start);
    }
}

HttpBackend::~HttpBackend() = default;

std::vector<std::string> HttpBackend::translate_batch(
    const std::vector<std::string>& sentences) {
    json body;
    body["src"] = descriptor_.src.str();
    body["tgt"] = descriptor_.tgt.str();
    body["beam"] = descriptor_.beam;
    body["sentences"] = sentences;

    httplib::Client client(impl_->host_and_port);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    auto res = client.Post(impl_->path, body.dump(), "application/json");
    if (!res) {
        throw Error("mt backend: no response from " + descriptor_.endpoint);
    }
    if (res->status != 200) {
        throw Error("mt backend: HTTP " + std::to_string(res->status) + " from " +
                    descriptor_.endpoint);
    }
    json reply;
    try {
        reply = json::parse(res->body);
    } catch (const json::exception& e) {
        throw Error(std::string("mt backend: unparsable reply: ") + e.what());
    }
    if (!reply.contains("translations") || !reply["translations"].is_array()) {
        throw Error("mt backend: protocol violation: missing translations array");
    }
    std::vector<std::string> out;
    for (const auto& t : reply["translations"]) {
        if (!t.is_string()) {
            throw Error("mt backend: protocol violation: non-string translation");
        }
        out.push_back(t.get<std::string>());
    }
    if (out.size() != sentences.size()) {
        throw Error("mt backend: protocol violation: sent " +
                    std::to_string(sentences.size()) + " sentences, got " +
                    std::to_string(out.size()) + " translations");
    }
    return out;
}

std::unique_ptr<MtBackend> make_backend(const MtBackendDescriptor& descriptor) {
    descriptor.validate();
    if (descriptor.endpoint == "identity") {
        return std::make_unique<IdentityBackend>();
    }
    if (descriptor.endpoint.rfind("http://", 0) == 0 ||
        descriptor.endpoint.rfind("https://", 0) == 0) {
        return std::make_unique<HttpBackend>(descriptor);
    }
    throw Error("mt backend: unknown endpoint \"" + descriptor.endpoint + "\"");
}

}  // namespace monoforge
