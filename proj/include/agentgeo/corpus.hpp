#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace agentgeo::corpus {

enum class LengthCategory { Short, Medium, Long, VeryLong };
enum class QueryIntent { Navigational, Informational, Commercial, Transactional };
enum class Split { Train, Test };
enum class SplitMode { Standard, OutOfDistribution };

const char* to_string(LengthCategory value);
const char* to_string(QueryIntent value);
const char* to_string(Split value);
std::optional<QueryIntent> parse_intent(const std::string& label);
std::optional<Split> parse_split(const std::string& label);

// Half-open boundaries on the raw HTML character count:
// [0,2000) Short, [2000,5000) Medium, [5000,10000) Long, [10000,+inf) VeryLong.
LengthCategory length_category(const std::string& raw_html);

struct Webpage {
    std::string id;
    std::string url;
    std::string title;
    std::string topic;
    std::string html;
    LengthCategory length = LengthCategory::Short;
};

struct QueryRecord {
    std::string id;
    std::string page_id; // the webpage this query targets
    std::string text;
    QueryIntent intent = QueryIntent::Informational;
    std::string persona;
    Split split = Split::Train;
};

struct Dataset {
    std::string version;
    std::vector<Webpage> webpages;
    std::vector<QueryRecord> queries;
    std::map<std::string, std::vector<std::string>> pools; // query id -> page ids

    const Webpage& webpage(const std::string& id) const;
    const QueryRecord& query(const std::string& id) const;
    const std::vector<std::string>& pool(const std::string& query_id) const;
    std::vector<const QueryRecord*> queries_for(const std::string& page_id) const;
};

// Raises Format for malformed JSON or a missing/mistyped field, Integrity for
// dangling references; the message names the offending id.
Dataset load_dataset(const std::string& path);
Dataset dataset_from_json(const nlohmann::json& doc);
nlohmann::json dataset_to_json(const Dataset& dataset);
void save_dataset(const Dataset& dataset, const std::string& path);

struct SplitResult {
    std::vector<QueryRecord> train;
    std::vector<QueryRecord> test;
};

// Standard: stratified by intent; 20/40 when 60 queries are available,
// otherwise a rounded 1:2 ratio. OutOfDistribution: whole personas reserved
// for training so train and test persona sets are disjoint; reserve_personas
// pins the train set explicitly, otherwise personas are assigned greedily in
// lexicographic order until the train quota is met. Deterministic given seed.
SplitResult split_queries(const std::vector<QueryRecord>& queries,
                          SplitMode mode, std::uint64_t seed,
                          const std::vector<std::string>& reserve_personas = {});

// One optimization run: configuration snapshot, per-query outcomes before and
// after, the applied edits, and the metric summary. Round-trips via JSON.
struct QueryOutcome {
    std::string query_id;
    std::string page_id;
    bool cited_before = false;
    bool cited_after = false;
    int iterations = 0;
    std::string failure; // non-empty when the repair loop errored out
};

struct EditLogEntry {
    std::string page_id;
    int batch = 0;
    int chunk_index = 0;
    std::string tool_id;
    std::string root_cause;
    std::string severity;
    double confidence = 0.0;
    std::string summary;
};

struct PageRecord {
    std::string page_id;
    std::string topic;
    LengthCategory length = LengthCategory::Short;
    std::string original_hash;
    std::string optimized_hash;
};

struct RunRecord {
    std::string run_id;
    nlohmann::json config;
    std::vector<PageRecord> pages;
    std::vector<QueryOutcome> outcomes;
    std::vector<EditLogEntry> edits;
    std::map<std::string, int> diagnosis_histogram; // root cause -> count
    nlohmann::json metric_summary;
    bool partial = false;
};

nlohmann::json run_record_to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& doc);
void save_run_record(const RunRecord& record, const std::string& path);
RunRecord load_run_record(const std::string& path);

} // namespace agentgeo::corpus
