#pragma once
// Echo-scoring client for OpenAI-compatible completions endpoints. The prompt
// is context + continuation; the request asks for zero generated tokens with
// the prompt echoed back and per-token log-probabilities attached. Tokens
// whose character offset falls at or past |context| belong to the
// continuation. A token that straddles the boundary is an alignment failure,
// never silently attributed — the leading-space continuation convention makes
// well-behaved tokenizers split exactly there.
//
// Transport errors and non-2xx responses retry up to max_retries, then raise
// BackendUnavailable. Requests are read-only, so retries are safe.

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "qshift/backends.hpp"
#include "qshift/core.hpp"

namespace qshift {

class WireScorer : public Scorer {
public:
    // `desc.target` is the base URL, e.g. "http://localhost:8000/v1"; the
    // request goes to <base>/completions. A bearer token is read from the
    // QSHIFT_API_KEY environment variable when present.
    explicit WireScorer(ScorerDescriptor desc) : desc_(std::move(desc)) {
        split_url(desc_.target, host_, path_prefix_);
        if (const char* tok = std::getenv(token_env_var())) token_ = tok;
    }

    static const char* token_env_var() { return "QSHIFT_API_KEY"; }

    TokenScores score(const std::string& context,
                      const std::string& continuation) const override {
        require_nonempty(continuation);
        const std::string prompt = context + continuation;
        nlohmann::json body = {{"model", desc_.model},
                               {"prompt", prompt},
                               {"max_tokens", 0},
                               {"echo", true},
                               {"logprobs", 1}};
        nlohmann::json resp = post_completions(body.dump());
        return extract_continuation_scores(resp, context.size(), prompt.size());
    }

    ScorerDescriptor descriptor() const override { return desc_; }

private:
    static void split_url(const std::string& url, std::string& host,
                          std::string& prefix) {
        auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos)
            throw Error(Errc::ConfigError, "wire endpoint needs a scheme: " + url);
        auto path_start = url.find('/', scheme_end + 3);
        if (path_start == std::string::npos) {
            host = url;
            prefix.clear();
        } else {
            host = url.substr(0, path_start);
            prefix = url.substr(path_start);
            while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
        }
    }

    nlohmann::json post_completions(const std::string& body) const {
        httplib::Headers headers;
        if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
        std::string last_error;
        for (int attempt = 0; attempt <= desc_.max_retries; ++attempt) {
            if (attempt > 0)
                std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
            // one client per call: httplib clients are not safe to share
            // across concurrent requests
            httplib::Client cli(host_);
            cli.set_connection_timeout(desc_.timeout_ms / 1000,
                                       (desc_.timeout_ms % 1000) * 1000);
            cli.set_read_timeout(desc_.timeout_ms / 1000,
                                 (desc_.timeout_ms % 1000) * 1000);
            auto res = cli.Post(path_prefix_ + "/completions", headers, body,
                                "application/json");
            if (!res) {
                last_error = "transport: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500) {
                last_error = "server status " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw Error(Errc::BackendUnavailable,
                            "completions request rejected with status " +
                                std::to_string(res->status) + ": " +
                                snippet(res->body));
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                throw Error(Errc::BackendUnavailable,
                            std::string("unparseable completions response: ") +
                                e.what());
            }
        }
        throw Error(Errc::BackendUnavailable,
                    "completions request to " + host_ + " failed after " +
                        std::to_string(desc_.max_retries + 1) + " attempts (" +
                        last_error + ")");
    }

    static TokenScores extract_continuation_scores(const nlohmann::json& resp,
                                                   std::size_t context_len,
                                                   std::size_t prompt_len) {
        const nlohmann::json* lp = nullptr;
        if (resp.contains("choices") && resp.at("choices").is_array() &&
            !resp.at("choices").empty())
            lp = &resp.at("choices").at(0);
        if (!lp || !lp->contains("logprobs") || lp->at("logprobs").is_null())
            throw Error(Errc::BackendUnavailable,
                        "completions response carries no logprobs block");
        const nlohmann::json& lpj = lp->at("logprobs");
        if (!lpj.contains("tokens") || !lpj.contains("token_logprobs") ||
            !lpj.contains("text_offset"))
            throw Error(Errc::BackendUnavailable,
                        "logprobs block lacks tokens/token_logprobs/text_offset");
        const auto tokens = lpj.at("tokens").get<std::vector<std::string>>();
        const auto offsets = lpj.at("text_offset").get<std::vector<std::size_t>>();
        const nlohmann::json& logprobs = lpj.at("token_logprobs");
        if (tokens.size() != offsets.size() ||
            tokens.size() != logprobs.size())
            throw Error(Errc::BackendUnavailable,
                        "logprobs arrays disagree in length");

        // Continuation tokens must tile [context_len, prompt_len) exactly:
        // start at the boundary, leave no gaps, carry no null logprobs.
        std::vector<double> out;
        std::size_t expected = context_len;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const std::size_t start = offsets[i];
            const std::size_t end = start + tokens[i].size();
            if (end <= context_len) continue; // pure context token
            if (start < context_len)
                throw Error(Errc::AlignmentError,
                            "token \"" + tokens[i] + "\" spans the context/"
                            "continuation boundary at offset " +
                                std::to_string(context_len));
            if (start != expected)
                throw Error(Errc::AlignmentError,
                            "continuation token starts at offset " +
                                std::to_string(start) + ", expected " +
                                std::to_string(expected));
            if (logprobs.at(i).is_null())
                throw Error(Errc::AlignmentError,
                            "no log-probability for continuation token \"" +
                                tokens[i] + "\"");
            out.push_back(logprobs.at(i).get<double>());
            expected = end;
        }
        if (expected != prompt_len)
            throw Error(Errc::AlignmentError,
                        "continuation tokens cover offsets up to " +
                            std::to_string(expected) + " of " +
                            std::to_string(prompt_len) + " prompt bytes");
        return make_token_scores(std::move(out));
    }

    static std::string snippet(const std::string& s) {
        return s.size() <= 160 ? s : s.substr(0, 157) + "...";
    }

    ScorerDescriptor desc_;
    std::string host_;
    std::string path_prefix_;
    std::string token_;
};

} // namespace qshift
