#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "rah/gateway/remote.hpp"

#include "rah/rng.hpp"
#include "rah/text.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

namespace rah {

RemoteConfig RemoteConfig::from_env() {
    auto get = [](const char* name) {
        const char* v = std::getenv(name);
        return v ? std::string(v) : std::string();
    };
    return RemoteConfig{get("RAH_LLM_ENDPOINT"), get("RAH_LLM_API_KEY"), get("RAH_LLM_MODEL")};
}

void RemoteConfig::validate() const {
    if (endpoint.empty()) throw ConfigError("RAH_LLM_ENDPOINT is not set");
    if (api_key.empty()) throw ConfigError("RAH_LLM_API_KEY is not set");
    if (model.empty()) throw ConfigError("RAH_LLM_MODEL is not set");
    if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0)
        throw ConfigError("endpoint must be an http(s) URL: " + endpoint);
}

// ---------------------------------------------------------------------------
// Templates

namespace {

constexpr const char* kPerceiveTemplate = R"(You are the Perceive agent of a personal recommendation assistant.
Describe the following {{domain}} item in one or two sentences and list its most characteristic attributes as short lowercase tags.

Title: {{title}}
Known description: {{description}}
Known tags: {{tags}}

Answer with exactly these lines:
DESCRIPTION: <one or two sentences>
ATTRIBUTES: <tag>, <tag>, ...
)";

constexpr const char* kLearnTemplate = R"(You are the Learn agent of a personal recommendation assistant. You maintain a library of the user's likes and dislikes.

Item ({{domain}}): {{title}}
Description: {{description}}
Attributes: {{attributes}}
The user's reaction: {{action}} (rating: {{rating}}; comment: {{comment}})

Current personality library:
{{personality}}

Critique of your previous attempt (empty if none):
{{critique}}

First answer two questions: why might some individuals like this item, and why might some individuals dislike it?
Then state what this reaction reveals about this user. Do not repeat traits the critique asked you to remove.

Answer with these lines (LIKE and DISLIKE may repeat or be absent):
WHY_LIKE: <answer>
WHY_DISLIKE: <answer>
LIKE: <short statement> | <tag>, <tag>
DISLIKE: <short statement> | <tag>, <tag>
)";

constexpr const char* kActTemplate = R"(You are the Act agent of a personal recommendation assistant. Predict how the user will react to an item.

Item ({{domain}}): {{title}}
Description: {{description}}
Attributes: {{attributes}}

The user's personality library:
{{personality}}

Think in four steps: hypothesize reasons the user could like or dislike the item, analyze how a person with this personality would perceive it, write a short comment in the user's voice, then predict the reaction.

Answer with exactly these lines:
HYPOTHESIS: <reasons>
PERCEPTION: <analysis>
COMMENT: <the user's comment>
PREDICTION: like | dislike
CONFIDENCE: high | low
)";

constexpr const char* kCriticTemplate = R"(You are the Critic agent of a personal recommendation assistant. The Act agent predicted a reaction using the personality below.

Item: {{title}}
Attributes: {{attributes}}
Personality used:
{{personality}}

Act agent reasoning:
- hypothesis: {{hypothesis}}
- perception: {{perception}}
- simulated comment: {{comment}}
Predicted: {{predicted}}
Actual user reaction: {{actual}}

If the prediction is wrong, explain why and say which traits should be removed or flipped.

Answer with these lines (REASON and SUGGESTION may repeat):
VERDICT: pass | fail
REASON: <reason>
SUGGESTION: <suggestion>
FLAGGED: <tag>, <tag>
)";

constexpr const char* kReflectTemplate = R"(You are the Reflect agent of a personal recommendation assistant. Review the user's personality library together with newly learned traits.
Merge duplicate likes and duplicate dislikes. When a like and a dislike conflict, break them into finer-grained traits; if the conflict remains, drop it and write a question for the user.

Existing library:
{{existing}}

Newly learned:
{{fresh}}

Answer with the full revised library (LIKE, DISLIKE and QUERY may repeat):
LIKE: <short statement> | <tag>, <tag>
DISLIKE: <short statement> | <tag>, <tag>
QUERY: <question for the user>
DUPLICATES_REMOVED: <number>
CONFLICTS_RESOLVED: <number>
)";

const std::regex& placeholder_re() {
    static const std::regex re(R"(\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\})");
    return re;
}

std::string render_personality(const Personality& p) {
    if (p.entries.empty()) return "(empty)";
    std::string out;
    for (const auto& e : p.entries)
        out += "- " + std::string(to_string(e.polarity)) + ": " + e.statement + " [" + join(e.facets, ", ") + "]\n";
    out.pop_back();
    return out;
}

std::string render_traits(const CandidateTraits& c) {
    std::string out;
    for (const auto* list : {&c.new_likes, &c.new_dislikes})
        for (const auto& e : *list)
            out += "- " + std::string(to_string(e.polarity)) + ": " + e.statement + " [" + join(e.facets, ", ") + "]\n";
    if (out.empty()) return "(none)";
    out.pop_back();
    return out;
}

std::string one_line(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        if (c == '\n' || c == '\r') c = ' ';
    return out;
}

} // namespace

TemplateSet TemplateSet::defaults() {
    TemplateSet t;
    t.set(AgentKind::Perceive, kPerceiveTemplate);
    t.set(AgentKind::Learn, kLearnTemplate);
    t.set(AgentKind::Act, kActTemplate);
    t.set(AgentKind::Critic, kCriticTemplate);
    t.set(AgentKind::Reflect, kReflectTemplate);
    return t;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
    auto t = defaults();
    for (auto k : {AgentKind::Perceive, AgentKind::Learn, AgentKind::Act, AgentKind::Critic, AgentKind::Reflect}) {
        const auto path = dir / (std::string(to_string(k)) + ".txt");
        std::ifstream is(path, std::ios::binary);
        if (!is) continue;
        std::ostringstream ss;
        ss << is.rdbuf();
        t.set(k, ss.str());
    }
    return t;
}

void TemplateSet::set(AgentKind kind, std::string text) { templates_[kind] = std::move(text); }

const std::string& TemplateSet::get(AgentKind kind) const {
    const auto it = templates_.find(kind);
    if (it == templates_.end()) throw ConfigError("no template for agent kind '" + std::string(to_string(kind)) + "'");
    return it->second;
}

std::string TemplateSet::render(AgentKind kind, const std::map<std::string, std::string>& fields) const {
    const auto& tpl = get(kind);
    std::string out;
    std::size_t used = 0;
    auto last = tpl.cbegin();
    for (std::sregex_iterator it(tpl.begin(), tpl.end(), placeholder_re()), end; it != end; ++it) {
        const auto& m = *it;
        const auto name = m[1].str();
        const auto f = fields.find(name);
        if (f == fields.end())
            throw ConfigError("template '" + std::string(to_string(kind)) + "' uses unknown placeholder {{" + name + "}}");
        out.append(last, m[0].first);
        out += f->second;
        last = m[0].second;
        ++used;
    }
    if (used == 0) throw ConfigError("template '" + std::string(to_string(kind)) + "' has no placeholders");
    out.append(last, tpl.cend());
    return out;
}

std::map<std::string, std::string> template_fields(const AgentRequest& req) {
    return std::visit(
        [](const auto& in) -> std::map<std::string, std::string> {
            using T = std::decay_t<decltype(in)>;
            if constexpr (std::is_same_v<T, PerceiveInput>) {
                return {{"title", in.item.title},
                        {"domain", in.item.domain.name()},
                        {"description", in.item.description.empty() ? "(none)" : in.item.description},
                        {"tags", in.item.tags.empty() ? "(none)" : join(in.item.tags, ", ")}};
            } else if constexpr (std::is_same_v<T, LearnInput>) {
                std::string critique = "(none)";
                if (in.critique) {
                    critique.clear();
                    for (const auto& r : in.critique->reasons) critique += "- reason: " + r + "\n";
                    for (const auto& s : in.critique->suggestions) critique += "- suggestion: " + s + "\n";
                    if (!in.critique->flagged_facets.empty())
                        critique += "- flagged: " + join(in.critique->flagged_facets, ", ") + "\n";
                }
                return {{"title", in.item.title},
                        {"domain", in.item.domain.name()},
                        {"description", in.item.description},
                        {"attributes", join(in.item.attributes, ", ")},
                        {"action", std::string(to_string(in.interaction.action))},
                        {"rating", in.interaction.rating ? std::to_string(*in.interaction.rating) : "n/a"},
                        {"comment", in.interaction.comment.value_or("n/a")},
                        {"personality", render_personality(in.personality)},
                        {"critique", critique}};
            } else if constexpr (std::is_same_v<T, ActInput>) {
                return {{"title", in.item.title},
                        {"domain", in.item.domain.name()},
                        {"description", in.item.description},
                        {"attributes", join(in.item.attributes, ", ")},
                        {"personality", render_personality(in.personality)}};
            } else if constexpr (std::is_same_v<T, CriticInput>) {
                return {{"title", in.item.title},
                        {"attributes", join(in.item.attributes, ", ")},
                        {"personality", render_personality(in.personality)},
                        {"hypothesis", in.outcome.hypothesized_reasons},
                        {"perception", in.outcome.perception_analysis},
                        {"comment", in.outcome.simulated_comment},
                        {"predicted", std::string(to_string(in.outcome.predicted))},
                        {"actual", std::string(to_string(in.actual))}};
            } else {
                return {{"existing", render_personality(in.existing)}, {"fresh", render_traits(in.fresh)}};
            }
        },
        req.payload);
}

// ---------------------------------------------------------------------------
// Response grammar

namespace {

struct Line {
    std::string key;
    std::string value;
};

std::vector<Line> parse_lines(const std::string& text) {
    static const std::regex key_re(R"(^\s*[-*]?\s*([A-Za-z_]+)\s*:\s*(.*?)\s*$)");
    std::vector<Line> out;
    std::istringstream is(text);
    std::string raw;
    while (std::getline(is, raw)) {
        std::smatch m;
        if (!std::regex_match(raw, m, key_re)) continue;
        std::string key = m[1].str();
        for (auto& c : key) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        out.push_back({std::move(key), m[2].str()});
    }
    return out;
}

const Line* first(const std::vector<Line>& lines, std::string_view key) {
    for (const auto& l : lines)
        if (l.key == key) return &l;
    return nullptr;
}

std::vector<std::string> all(const std::vector<Line>& lines, std::string_view key) {
    std::vector<std::string> out;
    for (const auto& l : lines)
        if (l.key == key && !l.value.empty()) out.push_back(l.value);
    return out;
}

const std::string& required(const std::vector<Line>& lines, std::string_view key) {
    const auto* l = first(lines, key);
    if (!l || l->value.empty()) throw MalformedResponse("response lacks required key " + std::string(key));
    return l->value;
}

FacetSet parse_tags(std::string_view v) {
    FacetSet out;
    for (const auto& t : text::split(v, ',')) {
        auto tok = text::lower(text::trim(t));
        if (!tok.empty()) out.insert(std::move(tok));
    }
    return out;
}

Action parse_action(std::string_view v) {
    const auto s = text::lower(text::trim(v));
    if (s.rfind("dislike", 0) == 0) return Action::Dislike;
    if (s.rfind("like", 0) == 0) return Action::Like;
    throw MalformedResponse("expected like or dislike, got '" + std::string(v) + "'");
}

// "statement | tag, tag". Without a bar the statement doubles as its facet.
std::pair<std::string, FacetSet> parse_trait(std::string_view v) {
    const auto bar = v.find('|');
    std::string statement(text::trim(v.substr(0, bar)));
    FacetSet facets = bar == std::string_view::npos ? FacetSet{} : parse_tags(v.substr(bar + 1));
    if (statement.empty()) throw MalformedResponse("trait line without a statement");
    if (facets.empty()) facets.insert(text::lower(statement));
    return {std::move(statement), std::move(facets)};
}

std::size_t parse_count(const std::vector<Line>& lines, std::string_view key) {
    const auto* l = first(lines, key);
    if (!l) return 0;
    try {
        const auto v = text::parse_int(l->value);
        if (v < 0) throw MalformedResponse("negative count for " + std::string(key));
        return static_cast<std::size_t>(v);
    } catch (const DecodeError&) {
        throw MalformedResponse("non-numeric " + std::string(key));
    }
}

std::string trait_line(const TraitEntry& e) {
    return std::string(e.polarity == Action::Like ? "LIKE: " : "DISLIKE: ") + one_line(e.statement) + " | " + join(e.facets, ", ");
}

} // namespace

std::string format_response(const AgentResult& result) {
    std::ostringstream os;
    std::visit(
        [&](const auto& r) {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, PerceivedItem>) {
                os << "DESCRIPTION: " << one_line(r.description) << "\n";
                os << "ATTRIBUTES: " << join(r.attributes, ", ") << "\n";
            } else if constexpr (std::is_same_v<T, CandidateTraits>) {
                os << "WHY_LIKE: " << one_line(r.why_like) << "\n";
                os << "WHY_DISLIKE: " << one_line(r.why_dislike) << "\n";
                for (const auto& e : r.new_likes) os << trait_line(e) << "\n";
                for (const auto& e : r.new_dislikes) os << trait_line(e) << "\n";
            } else if constexpr (std::is_same_v<T, ActOutcome>) {
                os << "HYPOTHESIS: " << one_line(r.hypothesized_reasons) << "\n";
                os << "PERCEPTION: " << one_line(r.perception_analysis) << "\n";
                os << "COMMENT: " << one_line(r.simulated_comment) << "\n";
                os << "PREDICTION: " << to_string(r.predicted) << "\n";
                os << "CONFIDENCE: " << (r.uncertain ? "low" : "high") << "\n";
            } else if constexpr (std::is_same_v<T, Verdict>) {
                os << "VERDICT: " << (r.pass ? "pass" : "fail") << "\n";
                for (const auto& s : r.reasons) os << "REASON: " << one_line(s) << "\n";
                for (const auto& s : r.suggestions) os << "SUGGESTION: " << one_line(s) << "\n";
                if (!r.flagged_facets.empty()) os << "FLAGGED: " << join(r.flagged_facets, ", ") << "\n";
            } else {
                for (const auto& e : r.merged.entries) os << trait_line(e) << "\n";
                for (const auto& q : r.user_queries) os << "QUERY: " << one_line(q) << "\n";
                os << "DUPLICATES_REMOVED: " << r.duplicates_removed << "\n";
                os << "CONFLICTS_RESOLVED: " << r.conflicts_resolved << "\n";
            }
        },
        result);
    return os.str();
}

AgentResult parse_response(const AgentRequest& req, const std::string& text) {
    const auto lines = parse_lines(text);
    return std::visit(
        [&](const auto& in) -> AgentResult {
            using T = std::decay_t<decltype(in)>;
            if constexpr (std::is_same_v<T, PerceiveInput>) {
                PerceivedItem p{in.item.id, in.item.title, in.item.domain, required(lines, "DESCRIPTION"),
                                parse_tags(required(lines, "ATTRIBUTES"))};
                if (p.attributes.empty()) throw MalformedResponse("ATTRIBUTES is empty");
                return p;
            } else if constexpr (std::is_same_v<T, LearnInput>) {
                CandidateTraits c;
                c.why_like = required(lines, "WHY_LIKE");
                c.why_dislike = required(lines, "WHY_DISLIKE");
                for (const auto& l : lines) {
                    if (l.key != "LIKE" && l.key != "DISLIKE") continue;
                    if (l.value.empty()) continue;
                    auto [statement, facets] = parse_trait(l.value);
                    const Action pol = l.key == "LIKE" ? Action::Like : Action::Dislike;
                    TraitEntry e{pol, std::move(statement), std::move(facets), {in.interaction.id}, 0};
                    (pol == Action::Like ? c.new_likes : c.new_dislikes).push_back(std::move(e));
                }
                return c;
            } else if constexpr (std::is_same_v<T, ActInput>) {
                ActOutcome o;
                o.hypothesized_reasons = required(lines, "HYPOTHESIS");
                o.perception_analysis = required(lines, "PERCEPTION");
                o.simulated_comment = required(lines, "COMMENT");
                o.predicted = parse_action(required(lines, "PREDICTION"));
                if (const auto* c = first(lines, "CONFIDENCE")) o.uncertain = text::lower(c->value) == "low";
                return o;
            } else if constexpr (std::is_same_v<T, CriticInput>) {
                Verdict v;
                const auto verdict = text::lower(required(lines, "VERDICT"));
                if (verdict.rfind("pass", 0) == 0)
                    v.pass = true;
                else if (verdict.rfind("fail", 0) == 0)
                    v.pass = false;
                else
                    throw MalformedResponse("VERDICT must be pass or fail");
                v.reasons = all(lines, "REASON");
                v.suggestions = all(lines, "SUGGESTION");
                if (const auto* f = first(lines, "FLAGGED")) v.flagged_facets = parse_tags(f->value);
                if (!v.pass) v.mismatch = std::make_pair(in.outcome.predicted, in.actual);
                return v;
            } else {
                // Provenance is not part of the grammar; recover it from the inputs.
                std::map<std::pair<Action, std::string>, const TraitEntry*> exact;
                std::map<std::string, std::set<InteractionId>> by_facet;
                std::set<InteractionId> fresh_prov, all_prov;
                auto index = [&](const TraitEntry& e, bool fresh) {
                    exact.emplace(std::make_pair(e.polarity, e.statement), &e);
                    for (const auto& f : e.facets) by_facet[f].insert(e.provenance.begin(), e.provenance.end());
                    (fresh ? fresh_prov : all_prov).insert(e.provenance.begin(), e.provenance.end());
                };
                for (const auto& e : in.existing.entries) index(e, false);
                for (const auto& e : in.fresh.new_likes) index(e, true);
                for (const auto& e : in.fresh.new_dislikes) index(e, true);
                all_prov.insert(fresh_prov.begin(), fresh_prov.end());

                ReflectResult r;
                r.merged.user = in.existing.user;
                r.merged.clock = in.existing.clock;
                // Every distinct fresh trait takes a tick, whether or not it survives the merge.
                std::map<std::pair<Action, std::string>, std::uint64_t> fresh_stamp;
                for (const auto* list : {&in.fresh.new_likes, &in.fresh.new_dislikes})
                    for (const auto& e : *list) {
                        const auto key = std::make_pair(e.polarity, e.statement);
                        const auto old = exact.find(key);
                        if (old != exact.end() && old->second->created_at != 0) continue;
                        if (!fresh_stamp.contains(key)) fresh_stamp.emplace(key, r.merged.stamp());
                    }
                for (const auto& l : lines) {
                    if ((l.key != "LIKE" && l.key != "DISLIKE") || l.value.empty()) continue;
                    auto [statement, facets] = parse_trait(l.value);
                    const Action pol = l.key == "LIKE" ? Action::Like : Action::Dislike;
                    TraitEntry e{pol, statement, facets, {}, 0};
                    if (auto it = exact.find({pol, statement}); it != exact.end()) {
                        e.provenance = it->second->provenance;
                        e.created_at = it->second->created_at;
                        if (auto fs = fresh_stamp.find({pol, statement}); fs != fresh_stamp.end()) e.created_at = fs->second;
                    } else {
                        for (const auto& f : facets)
                            if (auto bf = by_facet.find(f); bf != by_facet.end())
                                e.provenance.insert(bf->second.begin(), bf->second.end());
                        if (e.provenance.empty()) e.provenance = fresh_prov.empty() ? all_prov : fresh_prov;
                    }
                    if (e.provenance.empty()) throw MalformedResponse("reflect produced a trait with no source interaction");
                    if (e.created_at == 0) e.created_at = r.merged.stamp();
                    r.merged.entries.push_back(std::move(e));
                }
                r.user_queries = all(lines, "QUERY");
                r.duplicates_removed = parse_count(lines, "DUPLICATES_REMOVED");
                r.conflicts_resolved = parse_count(lines, "CONFLICTS_RESOLVED");
                return r;
            }
        },
        req.payload);
}

// ---------------------------------------------------------------------------
// Transport

std::string HttpTransport::post(const std::string& url, const std::string& body,
                                const std::map<std::string, std::string>& headers) {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, url_re)) throw ConfigError("malformed endpoint URL: " + url);
    httplib::Client client(m[1].str());
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    const std::string path = m[2].matched ? m[2].str() : "/";
    auto res = client.Post(path, h, body, "application/json");
    if (!res) throw TransportError("request to " + url + " failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
        throw TransportError("endpoint returned HTTP " + std::to_string(res->status));
    if (res->status >= 400)
        throw ConfigError("endpoint rejected the request with HTTP " + std::to_string(res->status) + ": " + res->body);
    return res->body;
}

// ---------------------------------------------------------------------------
// Backend

RemoteBackend::RemoteBackend(RemoteConfig config, TemplateSet templates, std::shared_ptr<ChatTransport> transport,
                             RetryPolicy retry)
    : config_(std::move(config)), templates_(std::move(templates)), transport_(std::move(transport)), retry_(std::move(retry)) {
    config_.validate();
    if (!transport_) transport_ = std::make_shared<HttpTransport>();
    if (!retry_.sleep) retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string RemoteBackend::identity() const {
    std::string tpl;
    for (auto k : {AgentKind::Perceive, AgentKind::Learn, AgentKind::Act, AgentKind::Critic, AgentKind::Reflect})
        tpl += templates_.get(k);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(stable_hash(tpl)));
    return "remote:" + config_.endpoint + "#" + config_.model + "#" + buf;
}

std::string RemoteBackend::request_body(const std::string& prompt, const DecodeParams& decode) const {
    nlohmann::json j{{"model", config_.model},
                     {"messages", nlohmann::json::array({nlohmann::json{{"role", "user"}, {"content", prompt}}})},
                     {"temperature", decode.temperature},
                     {"max_tokens", decode.max_tokens}};
    return j.dump();
}

std::string RemoteBackend::extract_content(const std::string& body) {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) throw MalformedResponse("endpoint returned non-JSON body");
    try {
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw MalformedResponse("endpoint response lacks choices[0].message.content");
    }
}

std::string RemoteBackend::call(const std::string& prompt, const DecodeParams& decode) {
    const auto body = request_body(prompt, decode);
    const std::map<std::string, std::string> headers{{"Authorization", "Bearer " + config_.api_key}};
    auto backoff = retry_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            return extract_content(transport_->post(config_.endpoint, body, headers));
        } catch (const TransportError&) {
            if (attempt >= retry_.max_transport_attempts) throw;
            retry_.sleep(backoff);
            backoff *= 2;
        }
    }
}

AgentResponse RemoteBackend::complete(const AgentRequest& req) {
    const auto prompt = templates_.render(req.kind(), template_fields(req));
    std::string last_error;
    for (int attempt = 0; attempt <= retry_.max_format_retries; ++attempt) {
        const auto text = call(attempt == 0 ? prompt : prompt + kFormatReminder, req.decode);
        try {
            AgentResponse resp;
            resp.result = parse_response(req, text);
            resp.raw_text = text;
            resp.backend = BackendKind::Remote;
            resp.retry_count = attempt;
            return resp;
        } catch (const MalformedResponse& e) {
            last_error = e.what();
        }
    }
    throw MalformedResponse("no valid " + std::string(to_string(req.kind())) + " response after " +
                            std::to_string(retry_.max_format_retries + 1) + " attempts: " + last_error);
}

} // namespace rah
