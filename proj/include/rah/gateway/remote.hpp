#pragma once

#include "rah/gateway/backend.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>

namespace rah {

/// Endpoint settings for an OpenAI-compatible chat completions API.
struct RemoteConfig {
    std::string endpoint; // full URL, e.g. https://api.example.com/v1/chat/completions
    std::string api_key;
    std::string model;

    /// Reads RAH_LLM_ENDPOINT, RAH_LLM_API_KEY and RAH_LLM_MODEL.
    static RemoteConfig from_env();
    void validate() const;
};

/// One plain-text template per agent kind with `{{field}}` placeholders.
class TemplateSet {
public:
    /// Built-in defaults (identical to the files shipped under templates/).
    static TemplateSet defaults();
    /// Loads `<kind>.txt` for every kind; missing files fall back to defaults.
    static TemplateSet load(const std::filesystem::path& dir);

    void set(AgentKind kind, std::string text);
    const std::string& get(AgentKind kind) const;

    /// Substitutes placeholders. Throws ConfigError when the template is
    /// missing, has no placeholders at all, or names a field not supplied.
    std::string render(AgentKind kind, const std::map<std::string, std::string>& fields) const;

private:
    std::map<AgentKind, std::string> templates_;
};

/// Placeholder values for a request, keyed by field name.
std::map<std::string, std::string> template_fields(const AgentRequest& req);

/// Parses the line-oriented `KEY: value` response grammar for the request's
/// kind. Throws MalformedResponse when required keys are missing or invalid.
AgentResult parse_response(const AgentRequest& req, const std::string& text);

/// Renders a structured result in the response grammar.
std::string format_response(const AgentResult& result);

/// HTTP seam. Returns the response body or throws TransportError.
class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual std::string post(const std::string& url, const std::string& body,
                             const std::map<std::string, std::string>& headers) = 0;
};

/// cpp-httplib implementation of ChatTransport.
class HttpTransport final : public ChatTransport {
public:
    explicit HttpTransport(std::chrono::seconds timeout = std::chrono::seconds(60)) : timeout_(timeout) {}
    std::string post(const std::string& url, const std::string& body,
                     const std::map<std::string, std::string>& headers) override;

private:
    std::chrono::seconds timeout_;
};

struct RetryPolicy {
    int max_format_retries = 2;     // extra attempts after a malformed reply
    int max_transport_attempts = 3; // total attempts per call on transport failure
    std::chrono::milliseconds initial_backoff{500};
    std::function<void(std::chrono::milliseconds)> sleep; // defaults to std::this_thread::sleep_for
};

class RemoteBackend final : public Backend {
public:
    RemoteBackend(RemoteConfig config, TemplateSet templates, std::shared_ptr<ChatTransport> transport,
                  RetryPolicy retry = {});

    AgentResponse complete(const AgentRequest& req) override;
    std::string identity() const override;

    /// Chat completion request body for a rendered prompt.
    std::string request_body(const std::string& prompt, const DecodeParams& decode) const;
    /// Extracts choices[0].message.content; throws MalformedResponse.
    static std::string extract_content(const std::string& body);

    static constexpr const char* kFormatReminder =
        "\n\nREMINDER: answer only with the KEY: value lines listed above, one per line, no other text.";

private:
    std::string call(const std::string& prompt, const DecodeParams& decode);

    RemoteConfig config_;
    TemplateSet templates_;
    std::shared_ptr<ChatTransport> transport_;
    RetryPolicy retry_;
};

} // namespace rah
