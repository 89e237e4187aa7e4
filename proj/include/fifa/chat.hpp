#pragma once

#include <cctype>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "fifa/error.hpp"
#include "fifa/rng.hpp"

namespace fifa {

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

inline std::string base64_encode(const std::string& bytes) {
    static const char* tbl =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 2 < bytes.size()) {
        uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                     (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                     static_cast<unsigned char>(bytes[i + 2]);
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out.push_back(tbl[v & 63]);
        i += 3;
    }
    if (i + 1 == bytes.size()) {
        uint32_t v = static_cast<unsigned char>(bytes[i]) << 16;
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == bytes.size()) {
        uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                     (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

// One user turn: prompt text plus zero or more attached PNG images, sent as
// base64 data URLs in a chat-completions content array.
struct ChatRequest {
    std::string prompt;
    std::vector<std::string> png_images;  // raw PNG bytes
};

// Minimal HTTP seam so tests can inject status sequences (429, 500, ...)
// without a network.
struct HttpResponse {
    int status = 0;
    std::string body;
};

class ChatTransport {
  public:
    virtual ~ChatTransport() = default;
    // POST the JSON body to the configured endpoint. Throws Error("Timeout")
    // on connect/read failure.
    virtual HttpResponse post(const std::string& url, const std::string& body,
                              const std::string& api_key) = 0;
};

enum class ChatMode { Live, Mock, Replay };

inline ChatMode chat_mode_from_string(const std::string& s) {
    if (s == "live") return ChatMode::Live;
    if (s == "mock") return ChatMode::Mock;
    if (s == "replay") return ChatMode::Replay;
    throw make_error("BadBackend", "unknown backend '" + s + "'");
}

struct ChatConfig {
    ChatMode mode = ChatMode::Mock;
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4o";
    std::string api_key_env = "FIFA_API_KEY";
    int max_retries = 4;
    int backoff_base_ms = 250;
    std::string cache_dir = "cache";
};

// Deterministic stand-in for the remote model. Recognizes the two annotation
// prompts by their fixed scaffolding and answers in the exact shape the
// parsers expect, so the full pipeline runs offline and reproducibly.
namespace detail {

inline std::string synth_step3_reply(const std::string& prompt) {
    const std::string head = "All the following areas MUST be discussed:\n";
    const std::string tail = "\nPlease analyze each area in one sentence.";
    size_t b = prompt.find(head);
    size_t e = prompt.find(tail, b);
    if (b == std::string::npos || e == std::string::npos)
        throw make_error("MalformedResponse", "mock: concept list not found");
    b += head.size();
    std::istringstream in(prompt.substr(b, e - b));
    static const std::vector<std::string> phrases = {
        "shows an unnaturally smooth texture that breaks from the surrounding skin",
        "exhibits blurring and soft edges inconsistent with the rest of the image",
        "displays lighting and shadow directions that contradict the scene",
        "has a color tone that does not blend with adjacent regions",
        "reveals pixel-level distortion suggesting local resynthesis",
        "appears geometrically warped relative to the expected facial structure",
        "lacks the fine detail and natural grain present elsewhere in the face"};
    std::string reply;
    std::string name;
    while (std::getline(in, name)) {
        if (name.empty()) continue;
        const auto& p = phrases[fnv1a(name) % phrases.size()];
        reply += name + ": The " + name + " " + p + ".\n";
    }
    if (reply.empty())
        throw make_error("MalformedResponse", "mock: empty concept list");
    return reply;
}

inline std::string synth_step4_reply(const std::string& prompt) {
    // The template itself contains a worked example with the same block
    // headers, so parse the last Descriptions/Index Numbers pair.
    const std::string desc_hdr = "Descriptions\n";
    const std::string idx_hdr = "Index Numbers\n";
    size_t d = prompt.rfind(desc_hdr);
    size_t ix = prompt.rfind(idx_hdr);
    if (d == std::string::npos || ix == std::string::npos || ix < d)
        throw make_error("MalformedResponse", "mock: input blocks not found");
    std::istringstream desc_in(prompt.substr(d + desc_hdr.size(), ix - d - desc_hdr.size()));
    std::istringstream idx_in(prompt.substr(ix + idx_hdr.size()));
    std::vector<std::pair<std::string, std::string>> descs;  // name, text
    std::string line;
    while (std::getline(desc_in, line)) {
        size_t sep = line.find(": ");
        if (sep == std::string::npos) continue;
        descs.emplace_back(line.substr(0, sep), line.substr(sep + 2));
    }
    std::map<std::string, int> index_of;
    while (std::getline(idx_in, line)) {
        size_t sep = line.find(": ");
        if (sep == std::string::npos) continue;
        index_of[line.substr(0, sep)] = std::stoi(line.substr(sep + 2));
    }
    if (descs.empty() || index_of.size() != descs.size())
        throw make_error("MalformedResponse", "mock: block mismatch");
    std::string reply;
    for (const auto& [name, text] : descs) {
        auto it = index_of.find(name);
        if (it == index_of.end())
            throw make_error("MalformedResponse", "mock: index missing for " + name);
        std::string clause = text;
        if (!clause.empty() && clause.back() == '.') clause.pop_back();
        if (!clause.empty()) clause[0] = static_cast<char>(std::tolower(clause[0]));
        if (!reply.empty()) reply += " ";
        reply += "The <" + std::to_string(it->second) + "> " + name + " </" +
                 std::to_string(it->second) + "> " + clause + ".";
    }
    return reply;
}

}  // namespace detail

inline std::string mock_chat_reply(const std::string& prompt) {
    if (prompt.find("Index Numbers") != std::string::npos)
        return detail::synth_step4_reply(prompt);
    return detail::synth_step3_reply(prompt);
}

// Chat client with a content-addressed response cache. Every request is keyed
// by sha256 of its full JSON body (prompt + model + images), so identical
// inputs never hit the network twice and `replay` mode can run from cache
// alone.
class ChatClient {
  public:
    explicit ChatClient(ChatConfig cfg, std::shared_ptr<ChatTransport> transport = nullptr)
        : cfg_(std::move(cfg)), transport_(std::move(transport)) {
        sleep_fn_ = [](int ms) {
            std::this_thread::sleep_for(std::chrono::milliseconds(ms));
        };
    }

    void set_sleep_fn(std::function<void(int)> fn) { sleep_fn_ = std::move(fn); }
    int network_calls() const { return network_calls_; }

    std::string request_body(const ChatRequest& req) const {
        nlohmann::json content = nlohmann::json::array();
        content.push_back({{"type", "text"}, {"text", req.prompt}});
        for (const auto& png : req.png_images)
            content.push_back(
                {{"type", "image_url"},
                 {"image_url",
                  {{"url", "data:image/png;base64," + base64_encode(png)}}}});
        nlohmann::json body = {
            {"model", cfg_.model},
            {"messages",
             nlohmann::json::array({{{"role", "user"}, {"content", content}}})}};
        return body.dump();
    }

    std::string cache_key(const ChatRequest& req) const {
        return sha256_hex(request_body(req));
    }

    std::string chat(const ChatRequest& req) {
        const std::string key = cache_key(req);
        const std::filesystem::path path =
            std::filesystem::path(cfg_.cache_dir) / (key + ".json");
        if (auto cached = read_cache(path)) return *cached;

        std::string reply;
        switch (cfg_.mode) {
            case ChatMode::Replay:
                throw make_error("CacheMiss",
                                 "replay mode: no cached response for " + key);
            case ChatMode::Mock:
                reply = mock_chat_reply(req.prompt);
                break;
            case ChatMode::Live:
                reply = live_call(req);
                break;
        }
        write_cache(path, req, reply);
        return reply;
    }

  private:
    std::optional<std::string> read_cache(const std::filesystem::path& path) const {
        std::ifstream in(path, std::ios::binary);
        if (!in) return std::nullopt;
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.contains("response"))
            throw make_error("MalformedResponse",
                             "corrupt cache entry " + path.string());
        return j.at("response").get<std::string>();
    }

    void write_cache(const std::filesystem::path& path, const ChatRequest& req,
                     const std::string& reply) const {
        std::filesystem::create_directories(path.parent_path());
        nlohmann::json j = {{"model", cfg_.model},
                            {"prompt_sha256", sha256_hex(req.prompt)},
                            {"response", reply}};
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << j.dump(2) << "\n";
    }

    std::string live_call(const ChatRequest& req) {
        if (!transport_)
            throw make_error("NoTransport", "live mode requires a transport");
        const char* key = std::getenv(cfg_.api_key_env.c_str());
        if (!key || !*key)
            throw make_error("AuthFailure",
                             cfg_.api_key_env + " is not set");
        const std::string body = request_body(req);
        for (int attempt = 0;; ++attempt) {
            ++network_calls_;
            HttpResponse resp = transport_->post(cfg_.endpoint, body, key);
            if (resp.status == 200) return extract_reply(resp.body);
            if (resp.status == 401 || resp.status == 403)
                throw make_error("AuthFailure",
                                 "server rejected credentials (status " +
                                     std::to_string(resp.status) + ")");
            const bool retryable = resp.status == 429 || resp.status >= 500;
            if (!retryable || attempt >= cfg_.max_retries)
                throw make_error(resp.status == 429 ? "RateLimited" : "HttpError",
                                 "status " + std::to_string(resp.status) +
                                     " after " + std::to_string(attempt + 1) +
                                     " attempts");
            sleep_fn_(cfg_.backoff_base_ms * (1 << attempt));
        }
    }

    static std::string extract_reply(const std::string& body) {
        nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded())
            throw make_error("MalformedResponse", "response is not JSON");
        try {
            return j.at("choices").at(0).at("message").at("content")
                .get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw make_error("MalformedResponse",
                             "missing choices[0].message.content");
        }
    }

    ChatConfig cfg_;
    std::shared_ptr<ChatTransport> transport_;
    std::function<void(int)> sleep_fn_;
    int network_calls_ = 0;
};

}  // namespace fifa
