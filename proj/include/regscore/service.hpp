#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>

#include <json.hpp>

#include "regscore/bundle.hpp"
#include "regscore/similarity.hpp"

namespace regscore {

/// Everything the model consumed plus the verdict. Field names are the wire
/// contract of the /score endpoint.
struct ScoreResponse {
    std::string normalized_domain;
    std::string verdict;
    double p_suspicious = 0.0;
    double similarity_score = 0.0;
    std::optional<std::string> matched_registrant;
    std::uint32_t length = 0;
    std::uint32_t digit_count = 0;
    std::uint32_t special_char_count = 0;
    std::uint32_t format_version = 0;

    nlohmann::ordered_json to_json() const;
};

/// Raised while no model/index snapshot has been published yet.
class NotReady : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Read-mostly scorer. Requests run against an immutable snapshot (model +
/// registrant index); reload() builds a new one off to the side and swaps it
/// in, so a request sees either the old or the new pair, never a mix.
class ScoringService {
public:
    ScoringService(std::filesystem::path model_path, std::filesystem::path registrants_path, bool strip_tld = false);

    /// Loads the model and rebuilds the index from disk, then publishes.
    /// On failure the previous snapshot stays live and the error propagates.
    void reload();
    /// Publishes an in-memory model and index directly.
    void publish(ModelBundle bundle, RegistrantIndex index);

    bool ready() const;
    std::uint64_t generation() const noexcept { return generation_.load(); }

    /// Throws NotReady, or Error{InvalidDomain}/Error{EmptyDomain} for bad input.
    ScoreResponse score(std::string_view raw_domain) const;

private:
    struct Snapshot {
        ModelBundle bundle;
        RegistrantIndex index;
    };
    std::shared_ptr<const Snapshot> current() const;

    std::filesystem::path model_path_;
    std::filesystem::path registrants_path_;
    bool strip_tld_;
    mutable std::shared_mutex mutex_;
    std::shared_ptr<const Snapshot> snapshot_;
    std::atomic<std::uint64_t> generation_{0};
};

/// Splits "host:port" (port required). Throws Error{InvalidConfig}.
std::pair<std::string, int> parse_listen_address(std::string_view text);

/// HTTP front end: POST /score with {"domain": "..."}.
///   200 ScoreResponse JSON | 400 bad body or domain | 503 not ready.
/// Each request logs one latency line to stderr.
class HttpFrontend {
public:
    explicit HttpFrontend(const ScoringService& service, bool log_requests = true);
    ~HttpFrontend();
    HttpFrontend(const HttpFrontend&) = delete;
    HttpFrontend& operator=(const HttpFrontend&) = delete;

    /// Binds; port 0 picks a free port. Returns the bound port. Throws Error{IoError}.
    int bind(const std::string& host, int port);
    /// Serves until stop(); blocks.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace regscore
