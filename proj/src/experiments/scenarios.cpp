#include "rah/experiments.hpp"

#include "rah/text.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>

namespace rah {

Scenario parse_scenario(std::istream& is) {
    Scenario s;
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> deferred; // lines that reference items
    auto fail = [&](std::size_t n, const std::string& why) {
        return DecodeError("scenario line " + std::to_string(n) + ": " + why);
    };
    while (std::getline(is, line)) {
        ++lineno;
        const auto trimmed = text::trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        auto f = text::split(trimmed, '\t');
        for (auto& x : f) x = std::string(text::trim(x));
        const auto& kw = f[0];
        try {
            if (kw == "scenario" && f.size() == 2) {
                if (f[1] != "control" && f[1] != "privacy") throw fail(lineno, "scenario must be control or privacy");
                s.kind = f[1];
            } else if (kw == "user" && f.size() == 2) {
                s.user = f[1];
            } else if (kw == "item" && f.size() == 5) {
                auto tags = split_facets(f[3]);
                if (tags.empty()) throw fail(lineno, "item needs at least one tag");
                s.catalog.add(Item{f[1], DomainTag(f[2]), f[4], "", std::move(tags)});
            } else if (kw == "exclude" && f.size() == 2) {
                s.rules.exclude.insert(f[1]);
            } else if (kw == "sensitive" && f.size() == 2) {
                s.rules.sensitive.insert(f[1]);
            } else if ((kw == "history" && f.size() == 3) || ((kw == "candidate" || kw == "trigger") && f.size() == 2)) {
                deferred.emplace_back(lineno, std::move(f));
            } else {
                throw fail(lineno, "unrecognized or malformed '" + kw + "' line");
            }
        } catch (const DecodeError&) {
            throw;
        } catch (const Error& e) {
            throw fail(lineno, e.what());
        }
    }
    if (s.kind.empty()) throw DecodeError("scenario has no 'scenario' line");
    if (s.user.empty()) throw DecodeError("scenario has no 'user' line");
    for (auto& [n, f] : deferred) {
        if (!s.catalog.contains(f.back())) throw fail(n, "unknown item '" + f.back() + "'");
        if (f[0] == "history") {
            Interaction x;
            x.id = s.user + ":" + f[2];
            x.user = s.user;
            x.item = f[2];
            try {
                x.action = action_from_string(f[1]);
            } catch (const Error& e) {
                throw fail(n, e.what());
            }
            x.timestamp = static_cast<std::int64_t>(s.history.size() + 1);
            s.history.push_back(std::move(x));
        } else if (f[0] == "candidate") {
            s.candidates.push_back(f[1]);
        } else {
            s.trigger = f[1];
        }
    }
    if (s.kind == "control" && s.candidates.empty()) throw DecodeError("control scenario lists no candidates");
    if (s.kind == "privacy") {
        if (!s.trigger) throw DecodeError("privacy scenario has no trigger");
        if (std::none_of(s.history.begin(), s.history.end(), [&](const Interaction& x) { return x.item == *s.trigger; }))
            throw DecodeError("privacy trigger must appear in the history");
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read scenario " + path.string());
    return parse_scenario(is);
}

namespace {

// The oracle only needs to know the user exists; their taste is what the
// history says, learned by the assistant.
std::shared_ptr<Backend> scenario_backend(const Scenario& s, const ExperimentConfig& config) {
    auto world = std::make_shared<SyntheticWorld>();
    world->catalog = s.catalog;
    world->users.emplace(s.user, SyntheticUser{});
    return make_backend(config, world);
}

Personality learn_history(const Scenario& s, const ExperimentConfig& config, Backend& backend) {
    auto loop = LoopConfig::variant("L+C+R");
    loop.max_iters = config.loop.max_iters;
    loop.decode = config.loop.decode;
    return learn_set(s.user, s.history, s.catalog, loop, backend);
}

void log_personality(std::ostream& log, const Personality& p) {
    for (const auto& e : p.entries)
        log << "trait\t" << to_string(e.polarity) << "\t" << e.statement << "\t" << join(e.facets) << "\n";
    for (const auto& polarity : {Action::Like, Action::Dislike})
        log << "facets\t" << to_string(polarity) << "\t" << join(facets_of(p, polarity)) << "\n";
}

} // namespace

ControlOutcome run_control_scenario(const Scenario& s, const ExperimentConfig& config, std::ostream& log) {
    if (s.kind != "control") throw ConfigError("not a control scenario");
    auto backend = scenario_backend(s, config);
    ControlOutcome out;
    out.personality = learn_history(s, config, *backend);
    out.candidates = s.candidates;
    std::vector<Item> items;
    for (const auto& id : s.candidates) items.push_back(s.catalog.at(id));
    out.decision = filter_recommendations(s.user, out.personality, s.rules, items, *backend, config.loop.decode);

    log << "scenario\tcontrol\tuser\t" << s.user << "\n";
    log_personality(log, out.personality);
    log << "intent\texclude\t" << join(s.rules.exclude) << "\n";
    for (const auto& [item, f] : out.decision.decisions)
        log << "decision\t" << item << "\t" << s.catalog.at(item).title << "\t" << to_string(f) << "\n";
    for (const auto& x : out.decision.proxy_feedback)
        log << "proxy_feedback\t" << x.id << "\t" << x.item << "\t" << to_string(x.action) << "\n";
    return out;
}

namespace {

// Stand-in recommender for the privacy study: every unseen item sharing a
// facet with something the account Liked.
std::vector<Item> content_candidates(const Catalog& catalog, const std::vector<Interaction>& feedback) {
    std::set<ItemId> seen;
    FacetSet liked;
    for (const auto& x : feedback) {
        seen.insert(x.item);
        if (x.action == Action::Like) {
            const auto& tags = catalog.at(x.item).tags;
            liked.insert(tags.begin(), tags.end());
        }
    }
    std::vector<Item> out;
    for (const auto& item : catalog.items()) {
        if (seen.contains(item.id)) continue;
        if (std::any_of(item.tags.begin(), item.tags.end(), [&](const auto& t) { return liked.contains(t); }))
            out.push_back(item);
    }
    return out;
}

// What the user finally sees: the assistant drops its proxy Dislikes and
// orders the rest by confidence, then item id.
std::vector<ItemId> visible_list(const Scenario& s, const Personality& p, const std::vector<Item>& candidates,
                                 Backend& backend, const DecodeParams& decode) {
    const auto d = filter_recommendations(s.user, p, s.rules, candidates, backend, decode);
    std::vector<std::pair<int, ItemId>> shown;
    for (std::size_t i = 0; i < d.decisions.size(); ++i)
        if (d.decisions[i].second != Forward::ProxyDislike) shown.emplace_back(-d.scores[i], d.decisions[i].first);
    std::sort(shown.begin(), shown.end());
    std::vector<ItemId> out;
    for (auto& [score, id] : shown) out.push_back(std::move(id));
    return out;
}

std::string ids(const std::vector<ItemId>& v) {
    std::string out;
    for (const auto& id : v) out += (out.empty() ? "" : ",") + id;
    return out;
}

} // namespace

PrivacyOutcome run_privacy_scenario(const Scenario& s, const ExperimentConfig& config, std::uint64_t seed, std::ostream& log) {
    if (s.kind != "privacy") throw ConfigError("not a privacy scenario");
    auto backend = scenario_backend(s, config);
    const auto personality = learn_history(s, config, *backend);
    const auto& trigger = *std::find_if(s.history.begin(), s.history.end(),
                                        [&](const Interaction& x) { return x.item == *s.trigger; });

    log << "scenario\tprivacy\tuser\t" << s.user << "\ttrigger\t" << trigger.item << "\n";
    log_personality(log, personality);

    PrivacyOutcome out;
    out.baseline_visible = visible_list(s, personality, content_candidates(s.catalog, s.history), *backend, config.loop.decode);
    log << "visible\tbaseline\t" << ids(out.baseline_visible) << "\n";

    for (auto strategy : {ObfuscationStrategy::Psychologist, ObfuscationStrategy::SharedAccount}) {
        PrivacyOutcome::Run run;
        run.plan = obfuscate(s.user, trigger, strategy, s.catalog, s.history, s.rules, seed, config.obfuscation);
        auto feedback = s.history;
        feedback.insert(feedback.end(), run.plan.extra_feedback.begin(), run.plan.extra_feedback.end());
        const auto raw = content_candidates(s.catalog, feedback);
        run.visible = visible_list(s, personality, run.plan.filter_rules.apply(raw), *backend, config.loop.decode);
        run.sound = run.visible == out.baseline_visible;
        const std::string name(to_string(strategy));
        for (const auto& x : run.plan.extra_feedback)
            log << "plan\t" << name << "\t" << x.id << "\t" << x.item << "\t" << to_string(x.action) << "\t"
                << to_string(x.source) << "\n";
        for (const auto& item : raw)
            if (run.plan.filter_rules.removes(item)) log << "filtered\t" << name << "\t" << item.id << "\n";
        log << "visible\t" << name << "\t" << ids(run.visible) << "\n";
        log << "soundness\t" << name << "\t" << (run.sound ? "ok" : "VIOLATED") << "\n";
        out.runs.push_back(std::move(run));
    }
    return out;
}

void run_control(const ExperimentConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.out);
    const auto path = config.out / "control.log";
    std::ofstream log(path, std::ios::binary | std::ios::trunc);
    if (!log) throw RunError("cannot write " + path.string());
    run_control_scenario(load_scenario(config.control_scenario), config, log);
    run_privacy_scenario(load_scenario(config.privacy_scenario), config, config.seeds.front(), log);
}

} // namespace rah
