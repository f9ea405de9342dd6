// agentgeo: simulate citation-producing answer engines over a webpage corpus,
// diagnose citation failures, repair pages with targeted edits, and score the
// results. Every command runs fully offline against a transcript file.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "agentgeo/chunker.hpp"
#include "agentgeo/corpus.hpp"
#include "agentgeo/diagnosis.hpp"
#include "agentgeo/engine.hpp"
#include "agentgeo/error.hpp"
#include "agentgeo/llm.hpp"
#include "agentgeo/log.hpp"
#include "agentgeo/metrics.hpp"
#include "agentgeo/optimizer.hpp"
#include "agentgeo/querygen.hpp"
#include "agentgeo/report.hpp"
#include "agentgeo/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace agentgeo;

namespace {

int default_workers() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

struct Options {
    std::string config_path;
    std::string log_level = "info";
    bool json_output = false;

    std::string dataset;
    std::string out;
    std::string transcript;
    std::string cache_dir;
    std::string endpoint;
    std::string api_key;
    std::string model;

    int batch_size = 5;
    int max_iterations = 5;
    std::string citation_mode = "incontext";
    bool no_memory = false;
    bool memory = true;
    std::string strategy = "diagnosis-aware";
    int k = 5;
    std::uint64_t seed = 0;
    int workers = default_workers();
    int train_size = 0;
    std::string embedder = "mock";

    // build-bench
    std::string html_dir;
    std::string manifest;
    std::string variant = "standard";
    int queries = 60;
    std::vector<std::string> reserve_personas;

    // simulate / diagnose
    std::string query_id;

    // evaluate / report
    std::string run_path;
    std::string pages_dir;
    std::string split = "test";
    std::string label;

    std::string run_id;
};

// ===== config file =====

json load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        raise(ErrorKind::Usage, "cannot open config file '" + path + "'");
    }
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        raise(ErrorKind::Usage,
              "config file '" + path + "' is not a JSON object");
    }
    return doc;
}

template <typename T>
T config_value(const json& cfg, const std::string& key) {
    try {
        return cfg.at(key).get<T>();
    } catch (const json::exception&) {
        raise(ErrorKind::Usage, "config key '" + key + "' has the wrong type");
    }
}

// A config value applies only when the corresponding flag was not given on
// the command line; flags always win. Unknown keys are rejected.
void apply_config(const json& cfg, CLI::App& app, CLI::App* sub, Options& o) {
    auto flag_given = [&](const std::string& name) {
        if (CLI::Option* opt = sub ? sub->get_option_no_throw(name) : nullptr) {
            return opt->count() > 0;
        }
        if (CLI::Option* opt = app.get_option_no_throw(name)) {
            return opt->count() > 0;
        }
        return false;
    };
    for (const auto& [key, value] : cfg.items()) {
        (void)value;
        if (key == "dataset") {
            if (!flag_given("--dataset"))
                o.dataset = config_value<std::string>(cfg, key);
        } else if (key == "out") {
            if (!flag_given("--out"))
                o.out = config_value<std::string>(cfg, key);
        } else if (key == "transcript") {
            if (!flag_given("--transcript"))
                o.transcript = config_value<std::string>(cfg, key);
        } else if (key == "cache_dir") {
            if (!flag_given("--cache-dir"))
                o.cache_dir = config_value<std::string>(cfg, key);
        } else if (key == "log_level") {
            if (!flag_given("--log-level"))
                o.log_level = config_value<std::string>(cfg, key);
        } else if (key == "batch_size") {
            if (!flag_given("--batch-size"))
                o.batch_size = config_value<int>(cfg, key);
        } else if (key == "max_iterations") {
            if (!flag_given("--max-iterations"))
                o.max_iterations = config_value<int>(cfg, key);
        } else if (key == "citation_mode") {
            if (!flag_given("--citation-mode"))
                o.citation_mode = config_value<std::string>(cfg, key);
        } else if (key == "memory") {
            if (!flag_given("--no-memory"))
                o.memory = config_value<bool>(cfg, key);
        } else if (key == "strategy") {
            if (!flag_given("--strategy"))
                o.strategy = config_value<std::string>(cfg, key);
        } else if (key == "k") {
            if (!flag_given("--k"))
                o.k = config_value<int>(cfg, key);
        } else if (key == "seed") {
            if (!flag_given("--seed"))
                o.seed = config_value<std::uint64_t>(cfg, key);
        } else if (key == "workers") {
            if (!flag_given("--workers"))
                o.workers = config_value<int>(cfg, key);
        } else if (key == "train_size") {
            if (!flag_given("--train-size"))
                o.train_size = config_value<int>(cfg, key);
        } else if (key == "embedder") {
            if (!flag_given("--embedder"))
                o.embedder = config_value<std::string>(cfg, key);
        } else if (key == "endpoint") {
            o.endpoint = config_value<std::string>(cfg, key);
        } else if (key == "api_key") {
            o.api_key = config_value<std::string>(cfg, key);
        } else if (key == "model") {
            o.model = config_value<std::string>(cfg, key);
        } else {
            raise(ErrorKind::Usage, "unknown config key '" + key + "'");
        }
    }
}

// ===== shared plumbing =====

LogLevel parse_log_level(const std::string& label) {
    if (label == "debug") return LogLevel::Debug;
    if (label == "info") return LogLevel::Info;
    if (label == "warn") return LogLevel::Warn;
    if (label == "error") return LogLevel::Error;
    raise(ErrorKind::Usage, "unknown log level '" + label +
                                "' (debug, info, warn, error)");
}

std::unique_ptr<llm::Adapter> make_adapter(const Options& o) {
    std::unique_ptr<llm::Adapter> adapter;
    if (!o.transcript.empty()) {
        adapter = std::make_unique<llm::ScriptedAdapter>(
            llm::load_transcript(o.transcript), true);
    } else {
        llm::HttpConfig http = llm::HttpConfig::from_env();
        if (!o.endpoint.empty()) http.endpoint = o.endpoint;
        if (!o.api_key.empty()) http.api_key = o.api_key;
        if (!o.model.empty()) http.model = o.model;
        if (http.endpoint.empty()) {
            raise(ErrorKind::Usage,
                  "no model adapter configured: pass --transcript or set "
                  "AGENTGEO_LLM_ENDPOINT");
        }
        adapter = std::make_unique<llm::HttpAdapter>(http);
    }
    if (!o.cache_dir.empty()) {
        std::shared_ptr<llm::Adapter> inner = std::move(adapter);
        adapter = std::make_unique<llm::CachingAdapter>(inner, o.cache_dir);
    }
    return adapter;
}

engine::CitationMode citation_mode(const Options& o) {
    if (auto mode = engine::parse_citation_mode(o.citation_mode)) {
        return *mode;
    }
    raise(ErrorKind::Usage, "unknown citation mode '" + o.citation_mode +
                                "' (incontext, attrfirst)");
}

optimizer::ConflictStrategy conflict_strategy(const Options& o) {
    if (auto strategy = optimizer::parse_conflict_strategy(o.strategy)) {
        return *strategy;
    }
    raise(ErrorKind::Usage, "unknown conflict strategy '" + o.strategy +
                                "' (diagnosis-aware, voting)");
}

metrics::Embedder make_embedder(const Options& o) {
    if (o.embedder == "mock") {
        return metrics::mock_embedder();
    }
    raise(ErrorKind::Usage, "unknown embedder '" + o.embedder + "' (mock)");
}

std::string read_file(const std::string& path, ErrorKind kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        raise(kind, "cannot read file '" + path + "'");
    }
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        raise(ErrorKind::Usage, "cannot write file '" + path + "'");
    }
    out << bytes;
    if (!out) {
        raise(ErrorKind::Usage, "write to '" + path + "' failed");
    }
}

json sentences_json(const engine::GeneratedAnswer& answer) {
    json sentences = json::array();
    for (const auto& sentence : answer.sentences) {
        json citations = json::array();
        for (int c : sentence.citations) {
            citations.push_back(c);
        }
        sentences.push_back(
            {{"text", sentence.text}, {"citations", citations}});
    }
    return sentences;
}

// ===== build-bench =====

int cmd_build_bench(const Options& o) {
    if (o.variant != "standard" && o.variant != "ood" && o.variant != "html") {
        raise(ErrorKind::Usage, "unknown variant '" + o.variant +
                                    "' (standard, ood, html)");
    }
    json manifest = json::parse(read_file(o.manifest, ErrorKind::Usage),
                                nullptr, false);
    if (manifest.is_discarded() || !manifest.is_array()) {
        raise(ErrorKind::Format,
              "manifest '" + o.manifest + "' must be a JSON list of pages");
    }

    corpus::Dataset dataset;
    dataset.version = o.variant;
    for (const json& entry : manifest) {
        if (!entry.is_object() || !entry.contains("id") ||
            !entry.contains("file") || !entry.contains("title")) {
            raise(ErrorKind::Format,
                  "each manifest entry needs 'id', 'file' and 'title'");
        }
        corpus::Webpage page;
        page.id = entry.at("id").get<std::string>();
        page.title = entry.at("title").get<std::string>();
        page.url = entry.value("url", std::string());
        page.topic = entry.value("topic", std::string());
        std::string path =
            (fs::path(o.html_dir) / entry.at("file").get<std::string>())
                .string();
        page.html = read_file(path, ErrorKind::Integrity);
        page.length = corpus::length_category(page.html);
        for (const auto& existing : dataset.webpages) {
            if (existing.id == page.id) {
                raise(ErrorKind::Integrity,
                      "duplicate page id '" + page.id + "' in the manifest");
            }
        }
        dataset.webpages.push_back(std::move(page));
    }
    if (dataset.webpages.empty()) {
        raise(ErrorKind::Usage, "the manifest lists no pages");
    }

    std::unique_ptr<llm::Adapter> adapter = make_adapter(o);
    querygen::QuerygenConfig qcfg;
    qcfg.target = o.queries;
    qcfg.seed = o.seed;
    qcfg.split_mode = o.variant == "ood"
                          ? corpus::SplitMode::OutOfDistribution
                          : corpus::SplitMode::Standard;
    qcfg.reserve_personas = o.reserve_personas;
    for (const auto& page : dataset.webpages) {
        std::vector<corpus::QueryRecord> records =
            querygen::assemble_query_set(page, qcfg, *adapter);
        dataset.queries.insert(dataset.queries.end(), records.begin(),
                               records.end());
    }

    // Candidate pools: the top five pages by lexical retrieval over the whole
    // corpus, with the target forced in (replacing the tail) so every query
    // can reach its page.
    std::vector<std::string> all_ids;
    for (const auto& page : dataset.webpages) {
        all_ids.push_back(page.id);
    }
    engine::DocumentProvider docs = engine::dataset_provider(dataset);
    for (const auto& query : dataset.queries) {
        std::vector<std::string> ranked =
            engine::retrieve(query.text, all_ids, docs, 5);
        if (std::find(ranked.begin(), ranked.end(), query.page_id) ==
            ranked.end()) {
            ranked.back() = query.page_id;
        }
        dataset.pools[query.id] = std::move(ranked);
    }

    corpus::save_dataset(dataset, o.out);

    int train = 0;
    int test = 0;
    for (const auto& query : dataset.queries) {
        (query.split == corpus::Split::Train ? train : test) += 1;
    }
    if (o.json_output) {
        json out = {{"out", o.out},
                    {"variant", o.variant},
                    {"pages", dataset.webpages.size()},
                    {"queries", dataset.queries.size()},
                    {"train", train},
                    {"test", test}};
        std::printf("%s\n", out.dump(2).c_str());
    } else {
        std::printf("Wrote %s: %zu pages, %zu queries (%d train / %d test), "
                    "variant %s\n",
                    o.out.c_str(), dataset.webpages.size(),
                    dataset.queries.size(), train, test, o.variant.c_str());
    }
    return 0;
}

// ===== optimize =====

int cmd_optimize(const Options& o) {
    corpus::Dataset dataset = corpus::load_dataset(o.dataset);
    std::unique_ptr<llm::Adapter> adapter = make_adapter(o);

    optimizer::OptimizerConfig ocfg;
    ocfg.batch_size = o.batch_size;
    ocfg.max_iterations = o.max_iterations;
    ocfg.citation_mode = citation_mode(o);
    ocfg.memory_enabled = o.memory;
    ocfg.conflict_strategy = conflict_strategy(o);
    ocfg.retrieval_k = o.k;
    ocfg.seed = o.seed;
    ocfg.workers = o.workers;

    // The semantic configuration only: execution details like the worker
    // pool size do not change results and stay out of the record, keeping
    // reruns byte-identical.
    json config = {{"batch_size", o.batch_size},
                   {"max_iterations", o.max_iterations},
                   {"citation_mode", o.citation_mode},
                   {"memory", o.memory},
                   {"conflict_strategy", o.strategy},
                   {"retrieval_k", o.k},
                   {"seed", o.seed},
                   {"train_size", o.train_size},
                   {"dataset_version", dataset.version}};

    corpus::RunRecord record;
    record.run_id =
        o.run_id.empty() ? "run-" + fnv1a64_hex(config.dump()) : o.run_id;
    record.config = config;

    fs::create_directories(fs::path(o.out) / "pages");
    fs::create_directories(fs::path(o.out) / "runs");

    std::string abort_reason;
    ErrorKind abort_kind = ErrorKind::Partial;
    for (const auto& page : dataset.webpages) {
        std::vector<corpus::QueryRecord> train;
        for (const corpus::QueryRecord* query :
             dataset.queries_for(page.id)) {
            if (query->split == corpus::Split::Train) {
                train.push_back(*query);
            }
        }
        if (o.train_size > 0 &&
            static_cast<int>(train.size()) > o.train_size) {
            train.resize(static_cast<std::size_t>(o.train_size));
        }

        optimizer::OptimizeResult result =
            optimizer::optimize(page, train, dataset, ocfg, *adapter);

        record.outcomes.insert(record.outcomes.end(),
                               result.report.outcomes.begin(),
                               result.report.outcomes.end());
        record.edits.insert(record.edits.end(), result.report.edits.begin(),
                            result.report.edits.end());
        for (const auto& [cause, count] : result.report.diagnosis_histogram) {
            record.diagnosis_histogram[cause] += count;
        }
        corpus::PageRecord page_record;
        page_record.page_id = page.id;
        page_record.topic = page.topic;
        page_record.length = page.length;
        page_record.original_hash = fnv1a64_hex(page.html);
        page_record.optimized_hash = fnv1a64_hex(result.optimized.html);
        record.pages.push_back(page_record);

        write_file((fs::path(o.out) / "pages" / (page.id + ".html")).string(),
                   result.optimized.html);

        if (result.report.aborted) {
            record.partial = true;
            abort_reason = result.report.abort_reason;
            abort_kind = result.report.abort_kind;
            break;
        }
    }

    std::string record_path =
        (fs::path(o.out) / "runs" / (record.run_id + ".json")).string();
    corpus::save_run_record(record, record_path);

    if (o.json_output) {
        std::printf("%s\n", corpus::run_record_to_json(record).dump(2).c_str());
    } else {
        std::printf("%s", report::summary(record).c_str());
        std::printf("Run record: %s\n", record_path.c_str());
    }

    if (record.partial) {
        if (!record.outcomes.empty()) {
            raise(ErrorKind::Partial, "run aborted after partial progress: " +
                                          abort_reason);
        }
        raise(abort_kind, "run aborted before any outcome: " + abort_reason);
    }
    return 0;
}

// ===== simulate =====

int cmd_simulate(const Options& o) {
    corpus::Dataset dataset = corpus::load_dataset(o.dataset);
    std::unique_ptr<llm::Adapter> adapter = make_adapter(o);
    const corpus::QueryRecord& query = dataset.query(o.query_id);

    engine::VerifyResult result = engine::verify_citation(
        query, query.page_id, dataset.pool(query.id), citation_mode(o), o.k,
        engine::dataset_provider(dataset), *adapter);
    const engine::CitationOutcome& outcome = result.outcome;

    if (o.json_output) {
        json cited = json::array();
        for (const auto& id : outcome.cited_ids) {
            cited.push_back(id);
        }
        json out = {{"query_id", query.id},
                    {"target_id", query.page_id},
                    {"value", result.value},
                    {"ranked", outcome.ranked_candidates},
                    {"cited", cited},
                    {"answer", outcome.answer.full_text},
                    {"sentences", sentences_json(outcome.answer)},
                    {"warnings", outcome.answer.warnings}};
        std::printf("%s\n", out.dump(2).c_str());
        return 0;
    }
    std::printf("Query: %s\n", query.text.c_str());
    std::string ranked;
    for (const auto& id : outcome.ranked_candidates) {
        ranked += (ranked.empty() ? "" : ", ") + id;
    }
    std::printf("Retrieved: %s\n", ranked.c_str());
    std::printf("V = %d (target %s %s)\n", result.value, query.page_id.c_str(),
                result.value == 1 ? "cited" : "not cited");
    if (!outcome.answer.full_text.empty()) {
        std::printf("Answer:\n%s\n", outcome.answer.full_text.c_str());
        for (const auto& sentence : outcome.answer.sentences) {
            std::string marks;
            for (int c : sentence.citations) {
                marks += (marks.empty() ? "" : ",") + std::to_string(c);
            }
            std::printf("  - %s [%s]\n", sentence.text.c_str(), marks.c_str());
        }
    }
    for (const auto& warning : outcome.answer.warnings) {
        std::printf("warning: %s\n", warning.c_str());
    }
    return 0;
}

// ===== diagnose =====

int cmd_diagnose(const Options& o) {
    corpus::Dataset dataset = corpus::load_dataset(o.dataset);
    std::unique_ptr<llm::Adapter> adapter = make_adapter(o);
    const corpus::QueryRecord& query = dataset.query(o.query_id);

    engine::VerifyResult result = engine::verify_citation(
        query, query.page_id, dataset.pool(query.id), citation_mode(o), o.k,
        engine::dataset_provider(dataset), *adapter);
    if (result.value == 1) {
        if (o.json_output) {
            std::printf("%s\n",
                        json({{"query_id", query.id}, {"cited", true}})
                            .dump(2)
                            .c_str());
        } else {
            std::printf("Target %s is already cited for query '%s'; nothing "
                        "to diagnose.\n",
                        query.page_id.c_str(), query.text.c_str());
        }
        return 0;
    }

    std::string competitor = diagnosis::competitor_or_fallback(result.outcome);
    diagnosis::ContrastPair pair;
    pair.target_id = query.page_id;
    pair.target_html = dataset.webpage(query.page_id).html;
    pair.competitor_id = competitor;
    pair.competitor_html = dataset.webpage(competitor).html;
    diagnosis::Diagnosis diag =
        diagnosis::diagnose(query.text, pair, *adapter);

    if (o.json_output) {
        json out = {
            {"query_id", query.id},
            {"cited", false},
            {"root_cause", diagnosis::to_string(diag.root_cause)},
            {"category",
             diagnosis::to_string(diagnosis::category_of(diag.root_cause))},
            {"severity", diagnosis::to_string(diag.severity)},
            {"confidence", diag.confidence},
            {"competitor", diag.competitor_id},
            {"explanation", diag.explanation}};
        std::printf("%s\n", out.dump(2).c_str());
        return 0;
    }
    std::printf("Root cause: %s (%s)\n",
                diagnosis::to_string(diag.root_cause),
                diagnosis::to_string(diagnosis::category_of(diag.root_cause)));
    std::printf("Severity: %s\n", diagnosis::to_string(diag.severity));
    std::printf("Confidence: %.2f\n", diag.confidence);
    std::printf("Competitor: %s\n", diag.competitor_id.c_str());
    if (!diag.explanation.empty()) {
        std::printf("Explanation: %s\n", diag.explanation.c_str());
    }
    return 0;
}

// ===== evaluate =====

int cmd_evaluate(const Options& o) {
    if (o.run_path.empty() != o.pages_dir.empty()) {
        raise(ErrorKind::Usage,
              "--run and --pages must be given together (or neither, for a "
              "vanilla evaluation)");
    }
    if (o.split != "train" && o.split != "test" && o.split != "all") {
        raise(ErrorKind::Usage,
              "unknown split '" + o.split + "' (train, test, all)");
    }
    corpus::Dataset dataset = corpus::load_dataset(o.dataset);
    std::unique_ptr<llm::Adapter> adapter = make_adapter(o);
    const bool optimized_mode = !o.run_path.empty();

    corpus::RunRecord record;
    std::map<std::string, std::string> optimized_pages;
    if (optimized_mode) {
        record = corpus::load_run_record(o.run_path);
        for (const auto& page : record.pages) {
            std::string path =
                (fs::path(o.pages_dir) / (page.page_id + ".html")).string();
            if (!fs::exists(path)) {
                raise(ErrorKind::Integrity,
                      "optimized page file missing: '" + path + "'");
            }
            optimized_pages[page.page_id] =
                read_file(path, ErrorKind::Integrity);
        }
    }

    engine::DocumentProvider base = engine::dataset_provider(dataset);
    engine::DocumentProvider docs = [&](const std::string& id) {
        auto it = optimized_pages.find(id);
        return it == optimized_pages.end() ? base(id) : it->second;
    };

    std::vector<const corpus::QueryRecord*> sweep;
    for (const auto& query : dataset.queries) {
        if (o.split == "all" || corpus::to_string(query.split) == o.split) {
            sweep.push_back(&query);
        }
    }

    metrics::MetricReport values;
    std::vector<bool> cited;
    double word = 0.0;
    double pos = 0.0;
    double wordpos = 0.0;
    engine::CitationMode mode = citation_mode(o);
    for (const corpus::QueryRecord* query : sweep) {
        engine::VerifyResult result =
            engine::verify_citation(*query, query->page_id,
                                    dataset.pool(query->id), mode, o.k, docs,
                                    *adapter);
        cited.push_back(result.value == 1);
        if (result.value != 1) {
            continue; // uncited answers contribute zero mass
        }
        const auto& ranked = result.outcome.ranked_candidates;
        auto at = std::find(ranked.begin(), ranked.end(), query->page_id);
        int index = static_cast<int>(at - ranked.begin()) + 1;
        try {
            metrics::Contribution c =
                metrics::contribution(result.outcome.answer, index);
            word += c.word;
            pos += c.pos;
            wordpos += c.wordpos;
        } catch (const Error& error) {
            log_warn("contribution for query '" + query->id +
                     "' not computable: " + error.what());
        }
    }
    if (!cited.empty()) {
        values.cr = metrics::citation_rate(cited);
        values.word = word / static_cast<double>(cited.size());
        values.pos = pos / static_cast<double>(cited.size());
        values.wordpos = wordpos / static_cast<double>(cited.size());
    } else {
        log_warn("no queries in split '" + o.split + "'");
    }

    if (optimized_mode) {
        metrics::Embedder embedder = make_embedder(o);
        std::vector<std::string> corpus_texts;
        for (const auto& page : dataset.webpages) {
            corpus_texts.push_back(chunker::extract_text(page.html));
        }
        double tfidf = 0.0;
        double embed = 0.0;
        double jac = 0.0;
        int counted = 0;
        for (const auto& page : record.pages) {
            try {
                metrics::Faithfulness f = metrics::faithfulness(
                    dataset.webpage(page.page_id).html,
                    optimized_pages.at(page.page_id), corpus_texts, embedder);
                tfidf += f.tfidf;
                embed += f.embed;
                jac += f.jaccard;
                ++counted;
            } catch (const Error& error) {
                log_warn("faithfulness for page '" + page.page_id +
                         "' not computable: " + error.what());
            }
        }
        if (counted > 0) {
            values.tfidf = tfidf / counted;
            values.embed = embed / counted;
            values.jaccard = jac / counted;
        }
    }

    std::string label =
        !o.label.empty() ? o.label : (optimized_mode ? "optimized" : "vanilla");
    auto number_or_null = [](const std::optional<double>& v) {
        return v ? json(*v) : json(nullptr);
    };
    json out = {{"label", label},
                {"split", o.split},
                {"queries", sweep.size()},
                {"cr", number_or_null(values.cr)},
                {"word", number_or_null(values.word)},
                {"pos", number_or_null(values.pos)},
                {"wordpos", number_or_null(values.wordpos)},
                {"tfidf", number_or_null(values.tfidf)},
                {"embed", number_or_null(values.embed)},
                {"jaccard", number_or_null(values.jaccard)}};
    if (!o.out.empty()) {
        write_file(o.out, out.dump(2) + "\n");
    }
    if (o.json_output) {
        std::printf("%s\n", out.dump(2).c_str());
    } else {
        std::printf("%s", report::metric_table({{label, values}}).c_str());
    }
    return 0;
}

// ===== report =====

int cmd_report(const Options& o) {
    corpus::RunRecord record = corpus::load_run_record(o.run_path);
    if (o.json_output) {
        std::printf("%s\n", corpus::run_record_to_json(record).dump(2).c_str());
    } else {
        std::printf("%s", report::full_report(record).c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"Citation-driven webpage optimization over a document corpus"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--config", o.config_path,
                   "JSON config file; flags override its values");
    app.add_option("--log-level", o.log_level,
                   "debug, info, warn or error")->capture_default_str();
    app.add_flag("--json", o.json_output, "machine-readable stdout");

    auto add_adapter_options = [&](CLI::App* sub) {
        sub->add_option("--transcript", o.transcript,
                        "scripted adapter transcript (JSON list)");
        sub->add_option("--cache-dir", o.cache_dir,
                        "directory for cached model responses");
    };
    auto add_engine_options = [&](CLI::App* sub) {
        sub->add_option("--citation-mode", o.citation_mode,
                        "incontext or attrfirst")->capture_default_str();
        sub->add_option("--k", o.k, "retrieval depth")->capture_default_str();
    };

    CLI::App* bench = app.add_subcommand(
        "build-bench", "Build a benchmark dataset from HTML files");
    bench->add_option("--html-dir", o.html_dir, "directory of page HTML files")
        ->required();
    bench->add_option("--manifest", o.manifest,
                      "JSON list of {id, file, title, url, topic}")
        ->required();
    bench->add_option("--out", o.out, "dataset file to write")->required();
    bench->add_option("--variant", o.variant, "standard, ood or html")
        ->capture_default_str();
    bench->add_option("--seed", o.seed, "sampling seed")->capture_default_str();
    bench->add_option("--queries", o.queries, "queries per page")
        ->capture_default_str();
    bench
        ->add_option("--reserve-personas", o.reserve_personas,
                     "personas pinned to the train split (ood variant)")
        ->delimiter(',');
    add_adapter_options(bench);

    CLI::App* optimize =
        app.add_subcommand("optimize", "Repair every page against its train "
                                       "queries and write a run record");
    optimize->add_option("--dataset", o.dataset, "dataset file")->required();
    optimize->add_option("--out", o.out, "output directory")->required();
    optimize->add_option("--batch-size", o.batch_size, "queries per batch")
        ->capture_default_str();
    optimize
        ->add_option("--max-iterations", o.max_iterations,
                     "repair iterations per query")
        ->capture_default_str();
    optimize->add_flag("--no-memory", o.no_memory,
                       "disable trajectory-memory constraints");
    optimize
        ->add_option("--strategy", o.strategy, "diagnosis-aware or voting")
        ->capture_default_str();
    optimize->add_option("--seed", o.seed, "run seed")->capture_default_str();
    optimize
        ->add_option("--workers", o.workers,
                     "repair loops run in parallel per batch; 1 = sequential")
        ->capture_default_str();
    optimize
        ->add_option("--train-size", o.train_size,
                     "use only the first N train queries per page (0 = all)")
        ->capture_default_str();
    optimize->add_option("--run-id", o.run_id, "run record id");
    add_engine_options(optimize);
    add_adapter_options(optimize);

    CLI::App* simulate = app.add_subcommand(
        "simulate", "Answer one query and show the citation outcome");
    simulate->add_option("--dataset", o.dataset, "dataset file")->required();
    simulate->add_option("--query", o.query_id, "query id")->required();
    add_engine_options(simulate);
    add_adapter_options(simulate);

    CLI::App* diagnose = app.add_subcommand(
        "diagnose", "Contrast an uncited page against the cited competitor");
    diagnose->add_option("--dataset", o.dataset, "dataset file")->required();
    diagnose->add_option("--query", o.query_id, "query id")->required();
    add_engine_options(diagnose);
    add_adapter_options(diagnose);

    CLI::App* evaluate = app.add_subcommand(
        "evaluate", "Score citation, contribution and faithfulness metrics");
    evaluate->add_option("--dataset", o.dataset, "dataset file")->required();
    evaluate->add_option("--run", o.run_path, "run record to evaluate");
    evaluate->add_option("--pages", o.pages_dir,
                         "directory of optimized page HTML");
    evaluate->add_option("--split", o.split, "train, test or all")
        ->capture_default_str();
    evaluate->add_option("--embedder", o.embedder, "embedder choice")
        ->capture_default_str();
    evaluate->add_option("--label", o.label, "row label for the table");
    evaluate->add_option("--out", o.out, "write the metric JSON here");
    add_engine_options(evaluate);
    add_adapter_options(evaluate);

    CLI::App* report_cmd =
        app.add_subcommand("report", "Render the tables for a finished run");
    report_cmd->add_option("--run", o.run_path, "run record file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        CLI::App* active = nullptr;
        for (CLI::App* sub : {bench, optimize, simulate, diagnose, evaluate,
                              report_cmd}) {
            if (sub->parsed()) {
                active = sub;
            }
        }
        if (!o.config_path.empty()) {
            apply_config(load_config_file(o.config_path), app, active, o);
        }
        set_log_level(parse_log_level(o.log_level));
        if (o.no_memory) {
            o.memory = false;
        }

        if (bench->parsed()) return cmd_build_bench(o);
        if (optimize->parsed()) return cmd_optimize(o);
        if (simulate->parsed()) return cmd_simulate(o);
        if (diagnose->parsed()) return cmd_diagnose(o);
        if (evaluate->parsed()) return cmd_evaluate(o);
        if (report_cmd->parsed()) return cmd_report(o);
        raise(ErrorKind::Usage, "no command given");
    } catch (const Error& error) {
        log_error(error.what());
        return exit_code_for(error.kind());
    } catch (const std::exception& error) {
        log_error(error.what());
        return 2;
    }
}
