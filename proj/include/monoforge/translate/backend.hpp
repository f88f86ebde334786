#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "monoforge/corpus/document.hpp"

namespace monoforge {

// Where translations come from: a builtin ("identity", "table") or a remote
// HTTP endpoint speaking the batch wire protocol.
struct MtBackendDescriptor {
    std::string endpoint;  // "identity", "table", or an http(s) URL
    std::string model_id;
    LanguageTag src;
    LanguageTag tgt;
    size_t batch_size = 64;
    size_t beam = 5;

    void validate() const;
};

// A sentence-batch translator. Implementations must return exactly one
// translation per input, in input order, or throw.
class MtBackend {
public:
    virtual ~MtBackend() = default;
    virtual std::vector<std::string> translate_batch(
        const std::vector<std::string>& sentences) = 0;
};

// Echoes every sentence back unchanged. Useful for structure-preservation
// tests and dry runs.
class IdentityBackend : public MtBackend {
public:
    std::vector<std::string> translate_batch(
        const std::vector<std::string>& sentences) override {
        return sentences;
    }
};

// Exact-match dictionary lookups; unknown sentences are an error so test
// tables stay honest.
class TableBackend : public MtBackend {
public:
    explicit TableBackend(std::map<std::string, std::string> table)
        : table_(std::move(table)) {}

    std::vector<std::string> translate_batch(
        const std::vector<std::string>& sentences) override;

private:
    std::map<std::string, std::string> table_;
};

// POSTs {"src","tgt","beam","sentences":[...]} to the endpoint and expects
// {"translations":[...]} back in request order. Any non-200 status, network
// failure, or length mismatch throws; retrying is the caller's policy.
class HttpBackend : public MtBackend {
public:
    explicit HttpBackend(MtBackendDescriptor descriptor);
    ~HttpBackend() override;

    std::vector<std::string> translate_batch(
        const std::vector<std::string>& sentences) override;

private:
    struct Impl;
    MtBackendDescriptor descriptor_;
    std::unique_ptr<Impl> impl_;
};

// Instantiates the backend named by the descriptor's endpoint. The "table"
// builtin needs entries supplied by the caller and is only reachable via
// TableBackend directly.
std::unique_ptr<MtBackend> make_backend(const MtBackendDescriptor& descriptor);

}  // namespace monoforge
