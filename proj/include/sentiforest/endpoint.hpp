#pragma once

// Chat-completion style HTTP client for build_paired_corpus. Kept out of the
// umbrella header because it pulls in cpp-httplib.

#include <cstdlib>
#include <memory>
#include <regex>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "sentiforest/common.hpp"
#include "sentiforest/corpus.hpp"

namespace sentiforest {

/// Endpoint configuration file. The auth token is read from the environment
/// variable named by `auth_env`, never from the file itself.
struct EndpointConfig {
    std::string url;
    std::string model;
    std::string auth_env;
    std::string response_path = "text";
    std::size_t max_parallel = 1;
    int timeout_seconds = 120;

    static EndpointConfig from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw Error(ErrorKind::Parse, "endpoint config must be a JSON object");
        EndpointConfig cfg;
        try {
            cfg.url = j.at("url").get<std::string>();
            cfg.model = j.at("model").get<std::string>();
            cfg.auth_env = j.value("auth_env", std::string{});
            cfg.response_path = j.value("response_path", cfg.response_path);
            cfg.max_parallel = j.value("max_parallel", std::size_t{1});
            cfg.timeout_seconds = j.value("timeout_seconds", cfg.timeout_seconds);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Parse, std::string("endpoint config: ") + e.what());
        }
        if (j.contains("token") || j.contains("api_key"))
            throw Error(ErrorKind::InvalidArgument, "endpoint config must not carry credentials; use auth_env");
        if (cfg.url.empty() || cfg.model.empty()) throw Error(ErrorKind::InvalidArgument, "endpoint config needs url and model");
        if (cfg.max_parallel == 0) throw Error(ErrorKind::InvalidArgument, "max_parallel must be at least 1");
        return cfg;
    }

    static EndpointConfig load(const std::string& path) {
        try {
            return from_json(nlohmann::json::parse(read_file(path)));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::Parse, "endpoint config '" + path + "': " + e.what());
        }
    }
};

/// Resolves a response path. "/a/0/b" is a JSON pointer; "a.0.b" is the
/// dotted equivalent.
inline const nlohmann::json* find_response_field(const nlohmann::json& doc, const std::string& path) {
    std::string pointer = path;
    if (pointer.empty() || pointer.front() != '/') {
        pointer = "/" + pointer;
        std::replace(pointer.begin(), pointer.end(), '.', '/');
    }
    try {
        const auto ptr = nlohmann::json::json_pointer(pointer);
        if (!doc.contains(ptr)) return nullptr;
        return &doc.at(ptr);
    } catch (const nlohmann::json::exception&) {
        return nullptr;
    }
}

/// POSTs {"model", "prompt"} and extracts the generated text.
class HttpGenerator {
public:
    explicit HttpGenerator(EndpointConfig config) : config_(std::move(config)) {
        static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
        std::smatch m;
        if (!std::regex_match(config_.url, m, url_re)) throw Error(ErrorKind::InvalidArgument, "bad endpoint url '" + config_.url + "'");
        origin_ = m[1].str();
        path_ = m[2].matched ? m[2].str() : "/";
        if (!config_.auth_env.empty()) {
            const char* token = std::getenv(config_.auth_env.c_str());
            if (!token || !*token)
                throw Error(ErrorKind::InvalidArgument, "environment variable " + config_.auth_env + " is not set");
            token_ = token;
        }
    }

    std::string operator()(const std::string& prompt) const {
        httplib::Client client(origin_);
        client.set_connection_timeout(config_.timeout_seconds, 0);
        client.set_read_timeout(config_.timeout_seconds, 0);
        httplib::Headers headers;
        if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
        const nlohmann::json body = {{"model", config_.model}, {"prompt", prompt}};
        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res) throw GenerationError("request failed: " + httplib::to_string(res.error()), true);
        if (res->status >= 500 || res->status == 429)
            throw GenerationError("HTTP " + std::to_string(res->status), true);
        if (res->status != 200) throw GenerationError("HTTP " + std::to_string(res->status), false);
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error&) {
            throw GenerationError("response is not JSON", false);
        }
        const auto* field = find_response_field(doc, config_.response_path);
        if (!field || !field->is_string())
            throw GenerationError("response lacks string field '" + config_.response_path + "'", false);
        return field->get<std::string>();
    }

    const EndpointConfig& config() const { return config_; }

private:
    EndpointConfig config_;
    std::string origin_;
    std::string path_;
    std::string token_;
};

inline PairedCorpus build_paired_corpus(const std::vector<TitleEntry>& titles, const EndpointConfig& endpoint,
                                        const std::map<std::string, std::string>& human_texts,
                                        PairingOptions options = {}) {
    options.max_parallel = endpoint.max_parallel;
    options.llm_source = endpoint.model;
    HttpGenerator generator(endpoint);
    return build_paired_corpus(titles, human_texts, TextGenerator(std::cref(generator)), options);
}

}  // namespace sentiforest
