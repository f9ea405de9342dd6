#include "agentgeo/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "agentgeo/error.hpp"
#include "agentgeo/log.hpp"

using nlohmann::json;

namespace agentgeo::corpus {

const char* to_string(LengthCategory value) {
    switch (value) {
    case LengthCategory::Short: return "short";
    case LengthCategory::Medium: return "medium";
    case LengthCategory::Long: return "long";
    case LengthCategory::VeryLong: return "very_long";
    }
    return "?";
}

const char* to_string(QueryIntent value) {
    switch (value) {
    case QueryIntent::Navigational: return "navigational";
    case QueryIntent::Informational: return "informational";
    case QueryIntent::Commercial: return "commercial";
    case QueryIntent::Transactional: return "transactional";
    }
    return "?";
}

const char* to_string(Split value) {
    return value == Split::Train ? "train" : "test";
}

std::optional<QueryIntent> parse_intent(const std::string& label) {
    if (label == "navigational") return QueryIntent::Navigational;
    if (label == "informational") return QueryIntent::Informational;
    if (label == "commercial") return QueryIntent::Commercial;
    if (label == "transactional") return QueryIntent::Transactional;
    return std::nullopt;
}

std::optional<Split> parse_split(const std::string& label) {
    if (label == "train") return Split::Train;
    if (label == "test") return Split::Test;
    return std::nullopt;
}

LengthCategory length_category(const std::string& raw_html) {
    std::size_t n = raw_html.size();
    if (n < 2000) return LengthCategory::Short;
    if (n < 5000) return LengthCategory::Medium;
    if (n < 10000) return LengthCategory::Long;
    return LengthCategory::VeryLong;
}

const Webpage& Dataset::webpage(const std::string& id) const {
    for (const Webpage& page : webpages)
        if (page.id == id)
            return page;
    raise(ErrorKind::Integrity, "unknown webpage id '" + id + "'");
}

const QueryRecord& Dataset::query(const std::string& id) const {
    for (const QueryRecord& q : queries)
        if (q.id == id)
            return q;
    raise(ErrorKind::Integrity, "unknown query id '" + id + "'");
}

const std::vector<std::string>& Dataset::pool(const std::string& query_id) const {
    auto it = pools.find(query_id);
    if (it == pools.end())
        raise(ErrorKind::Integrity, "no candidate pool for query '" + query_id + "'");
    return it->second;
}

std::vector<const QueryRecord*> Dataset::queries_for(const std::string& page_id) const {
    std::vector<const QueryRecord*> out;
    for (const QueryRecord& q : queries)
        if (q.page_id == page_id)
            out.push_back(&q);
    return out;
}

namespace {

const json& field(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end())
        raise(ErrorKind::Format, where + ": missing field '" + key + "'");
    return *it;
}

std::string string_field(const json& obj, const char* key,
                         const std::string& where) {
    const json& v = field(obj, key, where);
    if (!v.is_string())
        raise(ErrorKind::Format, where + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

} // namespace

Dataset dataset_from_json(const json& doc) {
    if (!doc.is_object())
        raise(ErrorKind::Format, "dataset root must be a JSON object");
    Dataset ds;
    ds.version = string_field(doc, "version", "dataset");

    const json& pages = field(doc, "webpages", "dataset");
    if (!pages.is_array())
        raise(ErrorKind::Format, "dataset: 'webpages' must be an array");
    std::set<std::string> page_ids;
    for (const json& p : pages) {
        Webpage page;
        page.id = string_field(p, "id", "webpage");
        page.url = string_field(p, "url", "webpage '" + page.id + "'");
        page.title = string_field(p, "title", "webpage '" + page.id + "'");
        page.topic = string_field(p, "topic", "webpage '" + page.id + "'");
        page.html = string_field(p, "html", "webpage '" + page.id + "'");
        page.length = length_category(page.html);
        if (!page_ids.insert(page.id).second)
            raise(ErrorKind::Integrity, "duplicate webpage id '" + page.id + "'");
        ds.webpages.push_back(std::move(page));
    }

    const json& queries = field(doc, "queries", "dataset");
    if (!queries.is_array())
        raise(ErrorKind::Format, "dataset: 'queries' must be an array");
    std::set<std::string> query_ids;
    for (const json& q : queries) {
        QueryRecord rec;
        rec.id = string_field(q, "id", "query");
        rec.page_id = string_field(q, "page_id", "query '" + rec.id + "'");
        rec.text = string_field(q, "text", "query '" + rec.id + "'");
        std::string intent = string_field(q, "intent", "query '" + rec.id + "'");
        auto parsed_intent = parse_intent(intent);
        if (!parsed_intent)
            raise(ErrorKind::Format,
                  "query '" + rec.id + "': unknown intent '" + intent + "'");
        rec.intent = *parsed_intent;
        rec.persona = string_field(q, "persona", "query '" + rec.id + "'");
        std::string split = string_field(q, "split", "query '" + rec.id + "'");
        auto parsed_split = parse_split(split);
        if (!parsed_split)
            raise(ErrorKind::Format,
                  "query '" + rec.id + "': unknown split '" + split + "'");
        rec.split = *parsed_split;
        if (!query_ids.insert(rec.id).second)
            raise(ErrorKind::Integrity, "duplicate query id '" + rec.id + "'");
        if (!page_ids.count(rec.page_id))
            raise(ErrorKind::Integrity, "query '" + rec.id +
                                            "' references missing webpage '" +
                                            rec.page_id + "'");
        ds.queries.push_back(std::move(rec));
    }

    const json& pools = field(doc, "pools", "dataset");
    if (!pools.is_object())
        raise(ErrorKind::Format, "dataset: 'pools' must be an object");
    for (auto it = pools.begin(); it != pools.end(); ++it) {
        if (!query_ids.count(it.key()))
            raise(ErrorKind::Integrity,
                  "pool entry references missing query '" + it.key() + "'");
        if (!it.value().is_array())
            raise(ErrorKind::Format,
                  "pool for query '" + it.key() + "' must be an array");
        std::vector<std::string> pool;
        for (const json& pid : it.value()) {
            if (!pid.is_string())
                raise(ErrorKind::Format, "pool for query '" + it.key() +
                                             "' must hold page id strings");
            std::string page_id = pid.get<std::string>();
            if (!page_ids.count(page_id))
                raise(ErrorKind::Integrity, "pool for query '" + it.key() +
                                                "' references missing webpage '" +
                                                page_id + "'");
            pool.push_back(std::move(page_id));
        }
        ds.pools[it.key()] = std::move(pool);
    }
    return ds;
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        raise(ErrorKind::Usage, "cannot open dataset file '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        raise(ErrorKind::Format,
              "dataset '" + path + "' is not valid JSON: " + e.what());
    }
    return dataset_from_json(doc);
}

json dataset_to_json(const Dataset& dataset) {
    json doc;
    doc["version"] = dataset.version;
    doc["webpages"] = json::array();
    for (const Webpage& page : dataset.webpages)
        doc["webpages"].push_back({{"id", page.id},
                                   {"url", page.url},
                                   {"title", page.title},
                                   {"topic", page.topic},
                                   {"html", page.html}});
    doc["queries"] = json::array();
    for (const QueryRecord& q : dataset.queries)
        doc["queries"].push_back({{"id", q.id},
                                  {"page_id", q.page_id},
                                  {"text", q.text},
                                  {"intent", to_string(q.intent)},
                                  {"persona", q.persona},
                                  {"split", to_string(q.split)}});
    doc["pools"] = json::object();
    for (const auto& [qid, pool] : dataset.pools)
        doc["pools"][qid] = pool;
    return doc;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        raise(ErrorKind::Usage, "cannot write dataset file '" + path + "'");
    out << dataset_to_json(dataset).dump(2) << "\n";
}

namespace {

// Largest-remainder allocation: per-group train counts that sum exactly to
// the requested total, deterministic for equal remainders (group order wins).
std::vector<std::size_t> allocate(const std::vector<std::size_t>& sizes,
                                  std::size_t total_train) {
    std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    std::vector<std::size_t> counts(sizes.size(), 0);
    if (n == 0)
        return counts;
    std::vector<double> remainders(sizes.size(), 0.0);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        double exact = static_cast<double>(sizes[i]) *
                       static_cast<double>(total_train) /
                       static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(exact);
        counts[i] = std::min(counts[i], sizes[i]);
        remainders[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    std::vector<std::size_t> order(sizes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return remainders[a] > remainders[b];
    });
    for (std::size_t k = 0; assigned < total_train && k < order.size(); ++k) {
        std::size_t i = order[k];
        if (counts[i] < sizes[i]) {
            ++counts[i];
            ++assigned;
        }
    }
    // When rounding could not reach the target (tiny groups), take whatever
    // capacity remains in group order.
    for (std::size_t i = 0; assigned < total_train && i < sizes.size(); ++i) {
        while (counts[i] < sizes[i] && assigned < total_train) {
            ++counts[i];
            ++assigned;
        }
    }
    return counts;
}

} // namespace

SplitResult split_queries(const std::vector<QueryRecord>& queries,
                          SplitMode mode, std::uint64_t seed,
                          const std::vector<std::string>& reserve_personas) {
    SplitResult result;
    if (queries.empty())
        return result;

    // 20/40 at the canonical 60; a rounded 1:2 ratio otherwise.
    std::size_t n = queries.size();
    std::size_t train_target = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) / 3.0));
    if (train_target == 0)
        train_target = 1;

    if (mode == SplitMode::Standard) {
        // Stratify by intent: every intent contributes proportionally.
        std::vector<QueryIntent> intents = {
            QueryIntent::Navigational, QueryIntent::Informational,
            QueryIntent::Commercial, QueryIntent::Transactional};
        std::vector<std::vector<std::size_t>> groups(intents.size());
        for (std::size_t i = 0; i < queries.size(); ++i) {
            for (std::size_t g = 0; g < intents.size(); ++g)
                if (queries[i].intent == intents[g])
                    groups[g].push_back(i);
        }
        std::vector<std::size_t> sizes;
        for (const auto& g : groups)
            sizes.push_back(g.size());
        std::vector<std::size_t> train_counts = allocate(sizes, train_target);

        std::mt19937_64 rng(seed);
        std::vector<bool> is_train(queries.size(), false);
        for (std::size_t g = 0; g < groups.size(); ++g) {
            std::vector<std::size_t> members = groups[g];
            std::shuffle(members.begin(), members.end(), rng);
            for (std::size_t k = 0; k < train_counts[g] && k < members.size(); ++k)
                is_train[members[k]] = true;
        }
        for (std::size_t i = 0; i < queries.size(); ++i) {
            QueryRecord q = queries[i];
            q.split = is_train[i] ? Split::Train : Split::Test;
            (is_train[i] ? result.train : result.test).push_back(std::move(q));
        }
        return result;
    }

    // Out-of-distribution: whole personas go to train until the quota is
    // met; everything else, and every persona not reserved, goes to test.
    std::map<std::string, std::size_t> persona_counts;
    for (const QueryRecord& q : queries)
        ++persona_counts[q.persona];
    if (persona_counts.size() < 2)
        raise(ErrorKind::Config,
              "out-of-distribution split needs at least two distinct personas");

    std::set<std::string> train_personas;
    if (!reserve_personas.empty()) {
        for (const std::string& p : reserve_personas) {
            if (!persona_counts.count(p))
                raise(ErrorKind::Config,
                      "reserved persona '" + p + "' does not occur in the queries");
            train_personas.insert(p);
        }
        if (train_personas.size() >= persona_counts.size())
            raise(ErrorKind::Config,
                  "reserved personas leave no persona for the test split");
    } else {
        std::size_t taken = 0;
        for (const auto& [persona, count] : persona_counts) {
            if (taken >= train_target)
                break;
            if (train_personas.size() + 1 >= persona_counts.size())
                break; // keep at least one persona for test
            train_personas.insert(persona);
            taken += count;
        }
        if (train_personas.empty())
            train_personas.insert(persona_counts.begin()->first);
    }

    for (const QueryRecord& q : queries) {
        QueryRecord copy = q;
        bool train = train_personas.count(q.persona) > 0;
        copy.split = train ? Split::Train : Split::Test;
        (train ? result.train : result.test).push_back(std::move(copy));
    }
    return result;
}

// ===== run records =====

json run_record_to_json(const RunRecord& record) {
    json doc;
    doc["run_id"] = record.run_id;
    doc["config"] = record.config;
    doc["partial"] = record.partial;
    doc["pages"] = json::array();
    for (const PageRecord& p : record.pages)
        doc["pages"].push_back({{"page_id", p.page_id},
                                {"topic", p.topic},
                                {"length", to_string(p.length)},
                                {"original_hash", p.original_hash},
                                {"optimized_hash", p.optimized_hash}});
    doc["outcomes"] = json::array();
    for (const QueryOutcome& o : record.outcomes)
        doc["outcomes"].push_back({{"query_id", o.query_id},
                                   {"page_id", o.page_id},
                                   {"cited_before", o.cited_before},
                                   {"cited_after", o.cited_after},
                                   {"iterations", o.iterations},
                                   {"failure", o.failure}});
    doc["edits"] = json::array();
    for (const EditLogEntry& e : record.edits)
        doc["edits"].push_back({{"page_id", e.page_id},
                                {"batch", e.batch},
                                {"chunk_index", e.chunk_index},
                                {"tool_id", e.tool_id},
                                {"root_cause", e.root_cause},
                                {"severity", e.severity},
                                {"confidence", e.confidence},
                                {"summary", e.summary}});
    doc["diagnosis_histogram"] = record.diagnosis_histogram;
    doc["metric_summary"] = record.metric_summary;
    return doc;
}

RunRecord run_record_from_json(const json& doc) {
    RunRecord record;
    record.run_id = string_field(doc, "run_id", "run record");
    record.config = field(doc, "config", "run record");
    record.partial = doc.value("partial", false);
    for (const json& p : field(doc, "pages", "run record")) {
        PageRecord page;
        page.page_id = string_field(p, "page_id", "run record page");
        page.topic = p.value("topic", "");
        std::string length = p.value("length", "short");
        if (length == "medium") page.length = LengthCategory::Medium;
        else if (length == "long") page.length = LengthCategory::Long;
        else if (length == "very_long") page.length = LengthCategory::VeryLong;
        else page.length = LengthCategory::Short;
        page.original_hash = p.value("original_hash", "");
        page.optimized_hash = p.value("optimized_hash", "");
        record.pages.push_back(std::move(page));
    }
    for (const json& o : field(doc, "outcomes", "run record")) {
        QueryOutcome outcome;
        outcome.query_id = string_field(o, "query_id", "run record outcome");
        outcome.page_id = o.value("page_id", "");
        outcome.cited_before = o.value("cited_before", false);
        outcome.cited_after = o.value("cited_after", false);
        outcome.iterations = o.value("iterations", 0);
        outcome.failure = o.value("failure", "");
        record.outcomes.push_back(std::move(outcome));
    }
    for (const json& e : field(doc, "edits", "run record")) {
        EditLogEntry entry;
        entry.page_id = e.value("page_id", "");
        entry.batch = e.value("batch", 0);
        entry.chunk_index = e.value("chunk_index", 0);
        entry.tool_id = e.value("tool_id", "");
        entry.root_cause = e.value("root_cause", "");
        entry.severity = e.value("severity", "");
        entry.confidence = e.value("confidence", 0.0);
        entry.summary = e.value("summary", "");
        record.edits.push_back(std::move(entry));
    }
    if (doc.contains("diagnosis_histogram"))
        record.diagnosis_histogram =
            doc["diagnosis_histogram"].get<std::map<std::string, int>>();
    if (doc.contains("metric_summary"))
        record.metric_summary = doc["metric_summary"];
    return record;
}

void save_run_record(const RunRecord& record, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        raise(ErrorKind::Usage, "cannot write run record '" + path + "'");
    out << run_record_to_json(record).dump(2) << "\n";
}

RunRecord load_run_record(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        raise(ErrorKind::Usage, "cannot open run record '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        raise(ErrorKind::Format,
              "run record '" + path + "' is not valid JSON: " + e.what());
    }
    return run_record_from_json(doc);
}

} // namespace agentgeo::corpus
