#include "regscore/service.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <mutex>

// httplib's default backlog of 5 drops connections under a burst of clients.
#define CPPHTTPLIB_LISTEN_BACKLOG 1024
#include <httplib.h>

#include "regscore/error.hpp"

namespace regscore {

nlohmann::ordered_json ScoreResponse::to_json() const {
    nlohmann::ordered_json j;
    j["normalized_domain"] = normalized_domain;
    j["verdict"] = verdict;
    j["p_suspicious"] = p_suspicious;
    j["similarity_score"] = similarity_score;
    j["matched_registrant"] = matched_registrant ? nlohmann::ordered_json(*matched_registrant) : nullptr;
    j["length"] = length;
    j["digit_count"] = digit_count;
    j["special_char_count"] = special_char_count;
    j["format_version"] = format_version;
    return j;
}

ScoringService::ScoringService(std::filesystem::path model_path, std::filesystem::path registrants_path,
                               bool strip_tld)
    : model_path_(std::move(model_path)), registrants_path_(std::move(registrants_path)), strip_tld_(strip_tld) {}

void ScoringService::reload() {
    ModelBundle bundle = load_model(model_path_);
    RegistrantIndex index(load_registrant_file(registrants_path_, strip_tld_));
    publish(std::move(bundle), std::move(index));
}

void ScoringService::publish(ModelBundle bundle, RegistrantIndex index) {
    auto next = std::make_shared<const Snapshot>(Snapshot{std::move(bundle), std::move(index)});
    {
        std::unique_lock lock(mutex_);
        snapshot_ = std::move(next);
    }
    generation_.fetch_add(1);
}

std::shared_ptr<const ScoringService::Snapshot> ScoringService::current() const {
    std::shared_lock lock(mutex_);
    return snapshot_;
}

bool ScoringService::ready() const { return current() != nullptr; }

ScoreResponse ScoringService::score(std::string_view raw_domain) const {
    const auto snap = current();
    if (!snap) throw NotReady("model and registrant index are still loading");
    const DomainName domain = normalize_domain(raw_domain, strip_tld_);
    const FusionModel& model = snap->bundle.model;
    const SimilarityResult match = best_match(snap->index, domain, model.similarity);
    const FeatureRow features = extract_features(domain, match.score);
    const Verdict verdict = predict(model, domain, features, model.threshold);

    ScoreResponse r;
    r.normalized_domain = domain.text();
    r.verdict = std::string(verdict_name(verdict.label));
    r.p_suspicious = verdict.p_suspicious;
    r.similarity_score = match.score;
    // A zero score means no shared character; naming a registrant would mislead.
    if (match.matched_registrant && match.total_matched > 0) r.matched_registrant = match.matched_registrant->text();
    r.length = features.length;
    r.digit_count = features.digit_count;
    r.special_char_count = features.special_char_count;
    r.format_version = snap->bundle.format_version;
    return r;
}

std::pair<std::string, int> parse_listen_address(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
        throw Error(ErrorCode::InvalidConfig, "listen address must look like host:port, got '" + std::string(text) + "'");
    }
    int port = -1;
    const std::string_view port_text = text.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc() || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535) {
        throw Error(ErrorCode::InvalidConfig, "bad port in listen address '" + std::string(text) + "'");
    }
    std::string host(text.substr(0, colon));
    if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
    return {host, port};
}

struct HttpFrontend::Impl {
    httplib::Server server;
};

namespace {

void reply_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(nlohmann::ordered_json{{"error", message}}.dump(), "application/json");
}

}  // namespace

HttpFrontend::HttpFrontend(const ScoringService& service, bool log_requests) : impl_(std::make_unique<Impl>()) {
    impl_->server.Post("/score", [&service, log_requests](const httplib::Request& req, httplib::Response& res) {
        const auto start = std::chrono::steady_clock::now();
        std::string domain_for_log = "-";
        try {
            const auto body = nlohmann::json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.is_object() || !body.contains("domain") || !body["domain"].is_string()) {
                reply_error(res, 400, "request body must be a JSON object with a string field 'domain'");
            } else {
                const std::string raw = body["domain"].get<std::string>();
                domain_for_log = raw;
                res.set_content(service.score(raw).to_json().dump(), "application/json");
                res.status = 200;
            }
        } catch (const NotReady& e) {
            reply_error(res, 503, e.what());
        } catch (const Error& e) {
            reply_error(res, 400, e.what());
        }
        if (log_requests) {
            const auto micros =
                std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start);
            const nlohmann::json quoted = domain_for_log;
            std::fprintf(stderr, "score status=%d domain=%s latency_us=%lld\n", res.status, quoted.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace).c_str(),
                         static_cast<long long>(micros.count()));
        }
    });
}

HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::bind(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw Error(ErrorCode::IoError, "cannot listen on " + host + ":" + std::to_string(port));
    return bound;
}

void HttpFrontend::listen() { impl_->server.listen_after_bind(); }

void HttpFrontend::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace regscore
