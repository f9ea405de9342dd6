#include "agentgeo/querygen.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

#include "agentgeo/chunker.hpp"
#include "agentgeo/error.hpp"
#include "agentgeo/log.hpp"
#include "agentgeo/prompts.hpp"
#include "agentgeo/text.hpp"

namespace agentgeo::querygen {

namespace {

using nlohmann::json;

const std::vector<corpus::QueryIntent>& all_intents() {
    static const std::vector<corpus::QueryIntent> intents = {
        corpus::QueryIntent::Navigational,
        corpus::QueryIntent::Informational,
        corpus::QueryIntent::Commercial,
        corpus::QueryIntent::Transactional,
    };
    return intents;
}

// Generation guidelines per intent, mirroring the classifier definitions so
// the two prompts describe the same four categories.
const char* intent_guideline(corpus::QueryIntent intent) {
    switch (intent) {
    case corpus::QueryIntent::Navigational:
        return "Navigational (GO): The user is looking for a specific website "
               "or page. Queries name a site, brand, page, or destination "
               "(login, official site, contact).";
    case corpus::QueryIntent::Informational:
        return "Informational (KNOW): The user wants to learn something, find "
               "an answer, or solve a problem. Queries ask how/what/why or "
               "request guides, definitions, and explanations.";
    case corpus::QueryIntent::Commercial:
        return "Commercial Investigation (COMPARE): The user is researching "
               "before a decision. Queries ask for reviews, comparisons, "
               "alternatives, and \"best of\" lists.";
    case corpus::QueryIntent::Transactional:
        return "Transactional (DO): The user is ready to act. Queries aim at "
               "buying, subscribing, downloading, registering, or booking.";
    }
    return "";
}

// The JSON key each intent uses in the generation response.
const char* intent_key(corpus::QueryIntent intent) {
    switch (intent) {
    case corpus::QueryIntent::Navigational:
        return "navigational";
    case corpus::QueryIntent::Informational:
        return "informational";
    case corpus::QueryIntent::Commercial:
        return "commercial";
    case corpus::QueryIntent::Transactional:
        return "transactional";
    }
    return "";
}

json parse_json_object(const std::string& raw, const std::string& what) {
    std::optional<std::string> payload = extract_json_object(raw);
    if (!payload) {
        raise(ErrorKind::Format, "no JSON object in the " + what + " response");
    }
    json doc = json::parse(*payload, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        raise(ErrorKind::Format,
              "malformed JSON object in the " + what + " response");
    }
    return doc;
}

// Reads an array of strings, trimming entries and dropping empties with a
// warning; a non-array or non-string entry is a format error.
std::vector<std::string> string_array(const json& value,
                                      const std::string& where) {
    if (!value.is_array()) {
        raise(ErrorKind::Format, where + " is not an array");
    }
    std::vector<std::string> out;
    for (const auto& entry : value) {
        if (!entry.is_string()) {
            raise(ErrorKind::Format, where + " holds a non-string entry");
        }
        std::string text = trim(entry.get<std::string>());
        if (text.empty()) {
            log_warn("dropping empty string in " + where);
            continue;
        }
        out.push_back(std::move(text));
    }
    return out;
}

std::string queries_json(const std::vector<std::string>& queries) {
    json arr = json::array();
    for (const auto& q : queries) {
        arr.push_back(q);
    }
    return arr.dump();
}

std::string complete(llm::Adapter& adapter, const std::string& prompt,
                     const std::string& tag) {
    llm::ChatRequest request;
    request.user = prompt;
    request.tag = tag;
    return adapter.complete(request);
}

std::optional<corpus::QueryIntent> match_intent_label(const std::string& raw) {
    std::string label = to_lower(trim(raw));
    if (label == "navigational") {
        return corpus::QueryIntent::Navigational;
    }
    if (label == "informational") {
        return corpus::QueryIntent::Informational;
    }
    if (label == "commercial investigation" || label == "commercial") {
        return corpus::QueryIntent::Commercial;
    }
    if (label == "transactional") {
        return corpus::QueryIntent::Transactional;
    }
    return std::nullopt;
}

// The value after "<label>:" on a "- <label>: ..." line, brackets stripped.
std::optional<std::string> labeled_line(const std::string& raw,
                                        const std::string& label) {
    for (const auto& line : split_lines(raw)) {
        std::string t = trim(line);
        if (starts_with(t, "- ")) {
            t = trim(t.substr(2));
        }
        std::string lowered = to_lower(t);
        std::string prefix = to_lower(label) + ":";
        if (!starts_with(lowered, prefix)) {
            continue;
        }
        std::string rest = trim(t.substr(prefix.size()));
        if (!rest.empty() && rest.front() == '[') {
            rest = rest.substr(1);
            std::size_t close = rest.rfind(']');
            if (close != std::string::npos) {
                rest = rest.substr(0, close);
            }
        }
        return trim(rest);
    }
    return std::nullopt;
}

std::vector<std::string> split_commas(const std::string& text) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : text) {
        if (c == ',') {
            parts.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    parts.push_back(current);
    return parts;
}

} // namespace

// ===== profile extraction =====

Profile extract_profile(const std::string& title, llm::Adapter& adapter) {
    if (trim(title).empty()) {
        raise(ErrorKind::ProfileFailure,
              "profile extraction requires a non-empty page title");
    }
    std::string prompt =
        prompts::render(prompts::get("querygen_profile"), {{"title", title}});
    std::string raw = complete(adapter, prompt, "querygen:profile");
    json doc = parse_json_object(raw, "profile");

    Profile profile;
    if (doc.contains("keyword_cluster")) {
        const json& cluster = doc.at("keyword_cluster");
        if (!cluster.is_object()) {
            raise(ErrorKind::Format, "keyword_cluster is not an object");
        }
        if (cluster.contains("core")) {
            profile.cluster.core = string_array(cluster.at("core"), "core");
        }
        if (cluster.contains("lsi_synonyms")) {
            profile.cluster.lsi_synonyms =
                string_array(cluster.at("lsi_synonyms"), "lsi_synonyms");
        }
        if (cluster.contains("keyphrases")) {
            profile.cluster.keyphrases =
                string_array(cluster.at("keyphrases"), "keyphrases");
        }
    }
    if (profile.cluster.core.empty()) {
        raise(ErrorKind::ProfileFailure,
              "profile extraction yielded no core keywords for title '" +
                  title + "'");
    }
    if (doc.contains("target_personas")) {
        const json& personas = doc.at("target_personas");
        if (!personas.is_array()) {
            raise(ErrorKind::Format, "target_personas is not an array");
        }
        for (const auto& entry : personas) {
            if (!entry.is_object()) {
                raise(ErrorKind::Format,
                      "target_personas holds a non-object entry");
            }
            Persona persona;
            if (entry.contains("name") && entry.at("name").is_string()) {
                persona.name = trim(entry.at("name").get<std::string>());
            }
            if (entry.contains("description") &&
                entry.at("description").is_string()) {
                persona.description =
                    trim(entry.at("description").get<std::string>());
            }
            if (persona.name.empty()) {
                log_warn("dropping persona with an empty name");
                continue;
            }
            profile.personas.push_back(std::move(persona));
        }
    }
    return profile;
}

// ===== intent classification =====

IntentDecision classify_intents(const std::string& title,
                                const std::string& summary,
                                llm::Adapter& adapter) {
    std::string prompt = prompts::render(
        prompts::get("querygen_intent"),
        {{"title", title}, {"summary", summary}});
    std::string raw = complete(adapter, prompt, "querygen:intent");

    IntentDecision decision;
    std::optional<std::string> intents_line = labeled_line(raw, "Intents");
    if (!intents_line) {
        log_warn("intent classification response has no 'Intents:' line; "
                 "treating the page as satisfying no intent");
        return decision;
    }
    std::set<corpus::QueryIntent> seen;
    for (const auto& part : split_commas(*intents_line)) {
        std::string token = trim(part);
        if (token.empty()) {
            continue;
        }
        std::optional<corpus::QueryIntent> intent = match_intent_label(token);
        if (!intent) {
            log_warn("dropping unknown intent label '" + token + "'");
            continue;
        }
        seen.insert(*intent);
    }
    for (corpus::QueryIntent intent : all_intents()) {
        if (seen.count(intent)) {
            decision.intents.push_back(intent);
        }
    }
    if (std::optional<std::string> reasoning = labeled_line(raw, "Reasoning")) {
        decision.reasoning = *reasoning;
    }
    return decision;
}

// ===== query generation =====

std::map<corpus::QueryIntent, std::vector<std::string>> generate_queries(
    const std::string& keyword, const Persona& persona,
    const std::vector<corpus::QueryIntent>& intents, llm::Adapter& adapter) {
    if (intents.empty()) {
        raise(ErrorKind::Config,
              "query generation needs at least one applicable intent");
    }
    std::set<corpus::QueryIntent> applicable(intents.begin(), intents.end());

    std::string section;
    int ordinal = 0;
    for (corpus::QueryIntent intent : all_intents()) {
        if (!applicable.count(intent)) {
            continue;
        }
        ++ordinal;
        section += std::to_string(ordinal) + ". " +
                   std::string(intent_guideline(intent)) + "\n";
    }
    std::string prompt = prompts::render(
        prompts::get("querygen_generation"),
        {{"keyword", keyword},
         {"persona_name", persona.name},
         {"persona_description", persona.description},
         {"intent_section", trim(section)}});
    std::string raw = complete(adapter, prompt, "querygen:generate");
    json doc = parse_json_object(raw, "query generation");

    std::map<corpus::QueryIntent, std::vector<std::string>> out;
    for (corpus::QueryIntent intent : all_intents()) {
        const char* key = intent_key(intent);
        std::vector<std::string> queries;
        if (doc.contains(key)) {
            queries = string_array(doc.at(key), std::string("'") + key + "'");
        }
        if (!applicable.count(intent)) {
            if (!queries.empty()) {
                log_warn(std::string("dropping ") +
                         std::to_string(queries.size()) +
                         " queries under non-applicable intent '" + key + "'");
            }
            out[intent] = {};
            continue;
        }
        if (queries.size() > 5) {
            log_warn(std::string("truncating intent '") + key + "' from " +
                     std::to_string(queries.size()) + " to 5 queries");
            queries.resize(5);
        } else if (queries.size() < 5) {
            log_warn(std::string("intent '") + key + "' returned " +
                     std::to_string(queries.size()) +
                     " queries where 5 were asked for");
        }
        out[intent] = std::move(queries);
    }
    return out;
}

// ===== deduplication =====

std::vector<std::string> exact_dedup(const std::vector<std::string>& queries) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& query : queries) {
        if (seen.insert(to_lower(query)).second) {
            out.push_back(query);
        }
    }
    return out;
}

std::vector<std::string> deduplicate(const std::vector<std::string>& queries,
                                     llm::Adapter& adapter) {
    std::vector<std::string> pool = exact_dedup(queries);
    if (pool.size() <= 1) {
        return pool;
    }
    std::string prompt = prompts::render(prompts::get("querygen_dedup"),
                                         {{"queries", queries_json(pool)}});
    std::set<std::string> allowed(pool.begin(), pool.end());

    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string raw = complete(adapter, prompt, "querygen:dedup");
        std::optional<std::string> payload = extract_json_array(raw);
        if (!payload) {
            raise(ErrorKind::Format, "no JSON array in the dedup response");
        }
        json doc = json::parse(*payload, nullptr, false);
        if (doc.is_discarded() || !doc.is_array()) {
            raise(ErrorKind::Format, "malformed JSON array in the dedup response");
        }
        std::vector<std::string> selected = string_array(doc, "dedup output");

        std::string invented;
        std::set<std::string> keep;
        for (const auto& query : selected) {
            if (!allowed.count(query)) {
                invented = query;
                break;
            }
            keep.insert(query);
        }
        if (invented.empty()) {
            std::vector<std::string> out;
            for (const auto& query : pool) {
                if (keep.count(query)) {
                    out.push_back(query);
                }
            }
            return out;
        }
        if (attempt == 0) {
            log_warn("dedup response invented query '" + invented +
                     "'; retrying once");
            continue;
        }
        raise(ErrorKind::DedupIntegrity,
              "dedup response invented query '" + invented +
                  "' absent from its input after the retry");
    }
    return pool; // unreachable
}

// ===== domain filtering =====

FilterResult domain_filter(const std::vector<std::string>& queries,
                           const std::string& doc_title,
                           const std::string& doc_summary,
                           llm::Adapter& adapter) {
    FilterResult result;
    if (queries.empty()) {
        return result;
    }
    std::string prompt = prompts::render(prompts::get("querygen_domain_filter"),
                                         {{"doc_title", doc_title},
                                          {"doc_summary", doc_summary},
                                          {"queries", queries_json(queries)}});

    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string raw = complete(adapter, prompt, "querygen:filter");
        std::vector<std::string> relevant;
        std::vector<std::string> filtered;
        bool parsed = false;
        try {
            json doc = parse_json_object(raw, "domain filter");
            relevant = doc.contains("relevant_queries")
                           ? string_array(doc.at("relevant_queries"),
                                          "relevant_queries")
                           : std::vector<std::string>{};
            filtered = doc.contains("filtered_queries")
                           ? string_array(doc.at("filtered_queries"),
                                          "filtered_queries")
                           : std::vector<std::string>{};
            parsed = true;
        } catch (const Error& error) {
            log_warn(std::string("domain filter response unusable (") +
                     error.what() + ")");
        }
        if (parsed) {
            std::vector<std::string> returned = relevant;
            returned.insert(returned.end(), filtered.begin(), filtered.end());
            std::vector<std::string> expected = queries;
            std::sort(returned.begin(), returned.end());
            std::sort(expected.begin(), expected.end());
            if (returned == expected) {
                // Canonicalize to input order, honoring multiset counts.
                std::map<std::string, int> keep;
                for (const auto& query : relevant) {
                    ++keep[query];
                }
                for (const auto& query : queries) {
                    auto it = keep.find(query);
                    if (it != keep.end() && it->second > 0) {
                        --it->second;
                        result.relevant.push_back(query);
                    } else {
                        result.filtered.push_back(query);
                    }
                }
                return result;
            }
            log_warn("domain filter response does not partition its input");
        }
        if (attempt == 0) {
            log_warn("retrying the domain filter once");
        }
    }
    log_warn("domain filter failed twice; keeping all " +
             std::to_string(queries.size()) + " queries");
    result.relevant = queries;
    result.filtered.clear();
    return result;
}

// ===== assembly =====

namespace {

struct Candidate {
    std::string text;
    corpus::QueryIntent intent = corpus::QueryIntent::Informational;
    std::string persona;
};

// Proportional quotas by largest remainder; ties favor declaration order.
// Guarantees quota_i <= n_i and sum(quota) == target when target <= total.
std::vector<int> intent_quotas(const std::vector<int>& counts, int target) {
    const int n = static_cast<int>(counts.size());
    int total = 0;
    for (int c : counts) {
        total += c;
    }
    std::vector<int> quotas(static_cast<std::size_t>(n), 0);
    std::vector<std::pair<long long, int>> remainders; // (remainder, index)
    int assigned = 0;
    for (int i = 0; i < n; ++i) {
        long long scaled = static_cast<long long>(target) * counts[i];
        quotas[static_cast<std::size_t>(i)] = static_cast<int>(scaled / total);
        assigned += quotas[static_cast<std::size_t>(i)];
        remainders.push_back({scaled % total, i});
    }
    std::sort(remainders.begin(), remainders.end(),
              [](const auto& a, const auto& b) {
                  if (a.first != b.first) {
                      return a.first > b.first;
                  }
                  return a.second < b.second;
              });
    for (int extra = target - assigned, i = 0; extra > 0; --extra, ++i) {
        ++quotas[static_cast<std::size_t>(remainders[static_cast<std::size_t>(i)].second)];
    }
    return quotas;
}

template <typename Fn>
auto stage(const std::string& name, const std::string& page_id, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& error) {
        raise(error.kind(), "stage '" + name + "' for page '" + page_id +
                                "': " + error.what());
    }
}

} // namespace

std::vector<corpus::QueryRecord> assemble_query_set(
    const corpus::Webpage& webpage, const QuerygenConfig& config,
    llm::Adapter& adapter) {
    if (config.target < 1) {
        raise(ErrorKind::Config, "query target must be at least 1");
    }

    Profile profile = stage("profile", webpage.id, [&] {
        return extract_profile(webpage.title, adapter);
    });
    std::string summary = chunker::extract_text(webpage.html).substr(0, 1000);
    IntentDecision decision = stage("intent", webpage.id, [&] {
        return classify_intents(webpage.title, summary, adapter);
    });
    if (decision.intents.empty()) {
        log_warn("page '" + webpage.id +
                 "' satisfies no search intent; generating no queries");
        return {};
    }
    if (profile.personas.empty()) {
        log_warn("page '" + webpage.id +
                 "' produced no personas; generating no queries");
        return {};
    }

    std::vector<Candidate> candidates;
    std::set<std::string> seen; // lowercased exact dedup across the pool
    for (const Persona& persona : profile.personas) {
        for (const std::string& keyword : profile.cluster.core) {
            auto generated = stage("generation", webpage.id, [&] {
                return generate_queries(keyword, persona, decision.intents,
                                        adapter);
            });
            for (corpus::QueryIntent intent : all_intents()) {
                for (const auto& text : generated[intent]) {
                    if (!seen.insert(to_lower(text)).second) {
                        continue;
                    }
                    candidates.push_back({text, intent, persona.name});
                }
            }
        }
    }

    std::vector<std::string> texts;
    texts.reserve(candidates.size());
    for (const auto& candidate : candidates) {
        texts.push_back(candidate.text);
    }
    std::vector<std::string> deduped = stage("dedup", webpage.id, [&] {
        return deduplicate(texts, adapter);
    });
    FilterResult filtered = stage("filter", webpage.id, [&] {
        return domain_filter(deduped, webpage.title, summary, adapter);
    });

    std::set<std::string> kept(filtered.relevant.begin(),
                               filtered.relevant.end());
    std::vector<Candidate> pool;
    for (const auto& candidate : candidates) {
        if (kept.count(candidate.text)) {
            pool.push_back(candidate);
        }
    }

    // Stratified sample: intent sets the quota, personas take turns inside
    // each intent, the seed drives the within-persona shuffle.
    std::vector<Candidate> sampled;
    if (static_cast<int>(pool.size()) <= config.target) {
        if (static_cast<int>(pool.size()) < config.target) {
            log_warn("page '" + webpage.id + "' has " +
                     std::to_string(pool.size()) + " queries, fewer than the " +
                     std::to_string(config.target) + " asked for; keeping all");
        }
        sampled = pool;
    } else {
        std::mt19937_64 rng(config.seed ^ fnv1a64(webpage.id));
        std::vector<std::vector<Candidate>> by_intent(all_intents().size());
        for (const auto& candidate : pool) {
            for (std::size_t i = 0; i < all_intents().size(); ++i) {
                if (all_intents()[i] == candidate.intent) {
                    by_intent[i].push_back(candidate);
                }
            }
        }
        std::vector<int> counts;
        counts.reserve(by_intent.size());
        for (const auto& group : by_intent) {
            counts.push_back(static_cast<int>(group.size()));
        }
        std::vector<int> quotas = intent_quotas(counts, config.target);
        for (std::size_t i = 0; i < by_intent.size(); ++i) {
            int quota = quotas[i];
            if (quota == 0) {
                continue;
            }
            // Personas in profile order, each subgroup shuffled, then one
            // query per persona per round until the quota is met.
            std::vector<std::vector<Candidate>> lanes;
            for (const Persona& persona : profile.personas) {
                std::vector<Candidate> lane;
                for (const auto& candidate : by_intent[i]) {
                    if (candidate.persona == persona.name) {
                        lane.push_back(candidate);
                    }
                }
                std::shuffle(lane.begin(), lane.end(), rng);
                if (!lane.empty()) {
                    lanes.push_back(std::move(lane));
                }
            }
            std::vector<std::size_t> cursor(lanes.size(), 0);
            int taken = 0;
            while (taken < quota) {
                bool progress = false;
                for (std::size_t lane = 0;
                     lane < lanes.size() && taken < quota; ++lane) {
                    if (cursor[lane] < lanes[lane].size()) {
                        sampled.push_back(lanes[lane][cursor[lane]++]);
                        ++taken;
                        progress = true;
                    }
                }
                if (!progress) {
                    break;
                }
            }
        }
    }

    std::vector<corpus::QueryRecord> records;
    records.reserve(sampled.size());
    int ordinal = 0;
    for (const auto& candidate : sampled) {
        ++ordinal;
        corpus::QueryRecord record;
        std::string number = std::to_string(ordinal);
        while (number.size() < 3) {
            number.insert(number.begin(), '0');
        }
        record.id = webpage.id + "-q" + number;
        record.page_id = webpage.id;
        record.text = candidate.text;
        record.intent = candidate.intent;
        record.persona = candidate.persona;
        records.push_back(std::move(record));
    }

    corpus::SplitResult split = corpus::split_queries(
        records, config.split_mode, config.seed, config.reserve_personas);
    std::vector<corpus::QueryRecord> out = split.train;
    out.insert(out.end(), split.test.begin(), split.test.end());
    return out;
}

} // namespace agentgeo::querygen
