#pragma once

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "taxograph/verbalizer.hpp"

namespace taxograph {

// Wire protocol: POST {endpoint_path} with JSON
//   {"prompt": str, "max_tokens": int, "temperature": 0}
// Response JSON: {"text": str, "token_logprobs": [float, ...]?}
// Credential read from the environment and sent as a bearer token.
struct HttpClientConfig {
    std::string host = "localhost";
    int port = 8080;
    std::string path = "/generate";
    int max_tokens = 32;
    int timeout_seconds = 30;
    std::string api_key_env = "TAXOGRAPH_API_KEY";
};

class HttpClient : public GenerationClient {
  public:
    explicit HttpClient(HttpClientConfig cfg) : cfg_(std::move(cfg)) {}

    GenerationResponse generate(const PromptBundle& bundle) override {
        httplib::Client cli(cfg_.host, cfg_.port);
        cli.set_connection_timeout(cfg_.timeout_seconds);
        cli.set_read_timeout(cfg_.timeout_seconds);
        httplib::Headers headers;
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);
        nlohmann::json req = {{"prompt", bundle.serialize()}, {"max_tokens", cfg_.max_tokens}, {"temperature", 0}};
        auto res = cli.Post(cfg_.path, headers, req.dump(), "application/json");
        GenerationResponse out;
        if (!res) {
            out.error = "connection failed: " + httplib::to_string(res.error());
            out.transient_failure = true;
            return out;
        }
        if (res->status >= 500) {
            out.error = "server error " + std::to_string(res->status);
            out.transient_failure = true;
            return out;
        }
        if (res->status != 200) {
            out.error = "request rejected with status " + std::to_string(res->status);
            out.transient_failure = false;
            return out;
        }
        try {
            nlohmann::json j = nlohmann::json::parse(res->body);
            out.text = j.at("text").get<std::string>();
            if (j.contains("token_logprobs"))
                out.token_logprobs = j.at("token_logprobs").get<std::vector<double>>();
        } catch (const std::exception& e) {
            out.error = std::string("malformed response: ") + e.what();
            out.transient_failure = false;
        }
        return out;
    }

    std::string name() const override { return "client"; }

  private:
    HttpClientConfig cfg_;
};

}  // namespace taxograph
