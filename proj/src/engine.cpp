#include "agentgeo/engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "agentgeo/chunker.hpp"
#include "agentgeo/error.hpp"
#include "agentgeo/log.hpp"
#include "agentgeo/prompts.hpp"
#include "agentgeo/text.hpp"

namespace agentgeo::engine {

const char* to_string(CitationMode mode) {
    return mode == CitationMode::InContext ? "incontext" : "attrfirst";
}

std::optional<CitationMode> parse_citation_mode(const std::string& label) {
    if (label == "incontext") return CitationMode::InContext;
    if (label == "attrfirst") return CitationMode::AttrFirst;
    return std::nullopt;
}

// ===== document providers =====

DocumentProvider dataset_provider(const corpus::Dataset& dataset) {
    const corpus::Dataset* data = &dataset;
    return [data](const std::string& id) { return data->webpage(id).html; };
}

DocumentProvider overlay_provider(DocumentProvider base, std::string page_id,
                                  std::string html) {
    return [base = std::move(base), page_id = std::move(page_id),
            html = std::move(html)](const std::string& id) {
        return id == page_id ? html : base(id);
    };
}

// ===== retrieval =====

std::vector<double> bm25_scores(const std::string& query_text,
                                const std::vector<std::string>& document_texts) {
    constexpr double k1 = 1.2;
    constexpr double b = 0.75;

    const std::size_t n = document_texts.size();
    std::vector<double> scores(n, 0.0);
    if (n == 0) return scores;

    std::vector<std::map<std::string, int>> term_counts(n);
    std::vector<double> lengths(n, 0.0);
    double total_length = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
        const auto tokens = tokenize(document_texts[d]);
        lengths[d] = static_cast<double>(tokens.size());
        total_length += lengths[d];
        for (const auto& token : tokens) ++term_counts[d][token];
    }
    const double avg_length = total_length / static_cast<double>(n);
    if (avg_length == 0.0) return scores;

    std::vector<std::string> query_terms = tokenize(query_text);
    std::sort(query_terms.begin(), query_terms.end());
    query_terms.erase(std::unique(query_terms.begin(), query_terms.end()),
                      query_terms.end());

    for (const auto& term : query_terms) {
        int df = 0;
        for (std::size_t d = 0; d < n; ++d)
            if (term_counts[d].count(term)) ++df;
        if (df == 0) continue;
        const double idf =
            std::log(1.0 + (static_cast<double>(n) - df + 0.5) / (df + 0.5));
        for (std::size_t d = 0; d < n; ++d) {
            auto it = term_counts[d].find(term);
            if (it == term_counts[d].end()) continue;
            const double f = it->second;
            const double denom =
                f + k1 * (1.0 - b + b * lengths[d] / avg_length);
            scores[d] += idf * f * (k1 + 1.0) / denom;
        }
    }
    return scores;
}

std::vector<std::string> retrieve(const std::string& query_text,
                                  const std::vector<std::string>& pool,
                                  const DocumentProvider& docs, int k) {
    if (pool.empty()) raise(ErrorKind::Retrieval, "empty candidate pool");
    if (k < 1) raise(ErrorKind::Retrieval, "retrieval k must be at least 1");

    std::vector<std::string> texts;
    texts.reserve(pool.size());
    for (const auto& id : pool) texts.push_back(chunker::extract_text(docs(id)));

    const auto scores = bm25_scores(query_text, texts);
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t c) {
                         return scores[a] > scores[c];
                     });

    const std::size_t take =
        std::min<std::size_t>(pool.size(), static_cast<std::size_t>(k));
    std::vector<std::string> ranked;
    ranked.reserve(take);
    for (std::size_t i = 0; i < take; ++i) ranked.push_back(pool[order[i]]);
    return ranked;
}

// ===== citation parsing =====

namespace {

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
}

// Reads "[d(, d)*]" at text[i]; on success fills `group` and moves `i` past
// the closing bracket. Any other bracket content leaves `i` untouched.
bool read_citation_group(const std::string& text, std::size_t& i,
                         std::vector<int>& group) {
    std::size_t j = i + 1;
    std::vector<int> parsed;
    std::string digits;
    while (j < text.size()) {
        const char c = text[j];
        if (c >= '0' && c <= '9') {
            if (digits.size() >= 9) return false;
            digits += c;
            ++j;
            continue;
        }
        if (c == ' ' || c == '\t') {
            if (!digits.empty()) {
                // a space inside a number would split it: require , or ] next
                std::size_t p = j;
                while (p < text.size() && (text[p] == ' ' || text[p] == '\t'))
                    ++p;
                if (p >= text.size() || (text[p] != ',' && text[p] != ']'))
                    return false;
            }
            ++j;
            continue;
        }
        if (c == ',') {
            if (digits.empty()) return false;
            parsed.push_back(std::stoi(digits));
            digits.clear();
            ++j;
            continue;
        }
        if (c == ']') {
            if (digits.empty()) return false; // "[]" or "[1,]"
            parsed.push_back(std::stoi(digits));
            group = std::move(parsed);
            i = j + 1;
            return true;
        }
        return false;
    }
    return false;
}

} // namespace

std::vector<Sentence> parse_citations(const std::string& text) {
    std::vector<Sentence> sentences;
    Sentence current;
    bool boundary = false;

    auto flush = [&]() {
        current.text = trim(current.text);
        if (!current.text.empty() || !current.citations.empty())
            sentences.push_back(current);
        current = {};
    };

    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '[') {
            std::vector<int> group;
            std::size_t j = i;
            if (read_citation_group(text, j, group)) {
                current.citations.insert(group.begin(), group.end());
                i = j;
                continue;
            }
            if (boundary) {
                flush();
                boundary = false;
            }
            current.text += c;
            ++i;
            continue;
        }
        if (boundary) {
            if (is_space(c)) {
                ++i;
                continue;
            }
            if (is_terminal(c)) {
                current.text += c;
                ++i;
                continue;
            }
            flush();
            boundary = false;
            continue; // reprocess c as sentence content
        }
        current.text += c;
        if (is_terminal(c)) {
            const std::size_t next = i + 1;
            if (next >= text.size() || is_space(text[next])) {
                boundary = true;
            } else if (text[next] == '[') {
                std::vector<int> group;
                std::size_t j = next;
                if (read_citation_group(text, j, group)) boundary = true;
            }
        }
        ++i;
    }
    flush();
    return sentences;
}

// ===== in-context generation =====

namespace {

void clamp_citations(GeneratedAnswer& answer) {
    for (auto& sentence : answer.sentences) {
        std::set<int> kept;
        for (int index : sentence.citations) {
            if (index >= 1 && index <= answer.source_count) {
                kept.insert(index);
            } else {
                const std::string warning = "dropped out-of-range citation [" +
                                            std::to_string(index) + "]";
                answer.warnings.push_back(warning);
                log_warn(warning);
            }
        }
        sentence.citations = std::move(kept);
    }
}

std::string flatten(const std::string& text) {
    std::string out;
    bool pending = false;
    for (const char c : text) {
        if (is_space(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending) {
            out += ' ';
            pending = false;
        }
        out += c;
    }
    return out;
}

} // namespace

GeneratedAnswer generate_incontext(const std::string& query_text,
                                   const std::vector<std::string>& source_texts,
                                   llm::Adapter& adapter) {
    if (source_texts.empty())
        raise(ErrorKind::Retrieval, "no sources supplied for generation");

    std::string source;
    for (std::size_t i = 0; i < source_texts.size(); ++i) {
        if (i) source += "\n\n";
        source += "[" + std::to_string(i + 1) + "] " + source_texts[i];
    }

    llm::ChatRequest request;
    request.system = prompts::get("engine_incontext_system");
    request.user = prompts::render(prompts::get("engine_incontext_user"),
                                   {{"query", query_text}, {"source", source}});
    request.tag = "engine:incontext";
    const std::string raw = adapter.complete(request);

    GeneratedAnswer answer;
    answer.full_text = raw;
    answer.sentences = parse_citations(raw);
    answer.mode = CitationMode::InContext;
    answer.source_count = static_cast<int>(source_texts.size());
    if (answer.sentences.empty())
        raise(ErrorKind::GenerationFormat,
              "generation produced no parseable sentences");
    clamp_citations(answer);
    return answer;
}

// ===== attribute-first generation =====

namespace {

struct SelectedChunk {
    int doc = 0;
    int chunk = 0;
};

std::vector<SelectedChunk> parse_selection(
    const std::string& raw, const std::vector<std::vector<std::string>>& docs) {
    std::string inner = trim(raw);
    const auto open = inner.find('[');
    const auto close = inner.rfind(']');
    if (open != std::string::npos && close != std::string::npos && open < close)
        inner = inner.substr(open + 1, close - open - 1);

    std::vector<SelectedChunk> selected;
    std::stringstream stream(inner);
    std::string item;
    while (std::getline(stream, item, ',')) {
        const std::string entry = trim(item);
        if (entry.empty()) continue;
        const auto dash = entry.find('-');
        bool well_formed = dash != std::string::npos && dash > 0 &&
                           dash + 1 < entry.size();
        if (well_formed) {
            for (std::size_t i = 0; i < entry.size(); ++i) {
                if (i == dash) continue;
                if (entry[i] < '0' || entry[i] > '9') well_formed = false;
            }
        }
        if (!well_formed)
            raise(ErrorKind::SelectionFormat,
                  "selection entry '" + entry + "' is not doc_id-chunk_id");
        SelectedChunk chunk;
        chunk.doc = std::stoi(entry.substr(0, dash));
        chunk.chunk = std::stoi(entry.substr(dash + 1));
        if (chunk.doc >= static_cast<int>(docs.size()) ||
            chunk.chunk >= static_cast<int>(docs[chunk.doc].size()))
            raise(ErrorKind::SelectionFormat,
                  "selection index '" + entry +
                      "' outside the document-chunk space");
        const bool duplicate =
            std::any_of(selected.begin(), selected.end(),
                        [&](const SelectedChunk& s) {
                            return s.doc == chunk.doc && s.chunk == chunk.chunk;
                        });
        if (duplicate) {
            log_warn("duplicate selection entry '" + entry + "' ignored");
            continue;
        }
        selected.push_back(chunk);
    }
    if (selected.empty())
        raise(ErrorKind::SelectionFormat, "selection returned no chunks");
    return selected;
}

// Passages with highlight markers. `labels` switches the "[h] " highlight
// ordinal prefix used by the clustering stage.
std::string highlighted_content(
    const std::vector<std::vector<std::string>>& docs,
    const std::vector<SelectedChunk>& highlights,
    const std::vector<std::size_t>& active, bool labels) {
    auto highlight_of = [&](int doc, int chunk) -> int {
        for (const std::size_t h : active) {
            if (highlights[h].doc == doc && highlights[h].chunk == chunk)
                return static_cast<int>(h);
        }
        return -1;
    };

    std::string out;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        if (d) out += "\n\n";
        out += "Passage " + std::to_string(d) + ":";
        for (std::size_t c = 0; c < docs[d].size(); ++c) {
            const int h = highlight_of(static_cast<int>(d),
                                       static_cast<int>(c));
            out += "\n";
            if (h >= 0) {
                out += "{<highlight_start>}";
                if (labels) out += "[" + std::to_string(h) + "] ";
                out += docs[d][c];
                out += "{<highlight_end>}";
            } else {
                out += docs[d][c];
            }
        }
    }
    return out;
}

std::vector<std::vector<std::size_t>> parse_clusters(
    const std::string& raw, std::size_t highlight_count) {
    const auto payload = extract_json_array(raw);
    if (!payload)
        raise(ErrorKind::Format, "clustering response carries no JSON array");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(*payload);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::Format,
              std::string("clustering response is not valid JSON: ") +
                  e.what());
    }
    if (!doc.is_array())
        raise(ErrorKind::Format, "clustering response is not a JSON array");

    std::vector<std::vector<std::size_t>> clusters;
    for (const auto& element : doc) {
        if (!element.is_object() || !element.contains("cluster") ||
            !element["cluster"].is_array())
            raise(ErrorKind::Format,
                  "clustering element lacks a 'cluster' array");
        std::vector<std::size_t> cluster;
        for (const auto& value : element["cluster"]) {
            if (!value.is_number_integer())
                raise(ErrorKind::Format, "cluster index is not an integer");
            const long long index = value.get<long long>();
            if (index < 0 || index >= static_cast<long long>(highlight_count))
                raise(ErrorKind::Format,
                      "cluster references unknown highlight index " +
                          std::to_string(index));
            cluster.push_back(static_cast<std::size_t>(index));
        }
        if (!cluster.empty()) clusters.push_back(std::move(cluster));
    }
    return clusters;
}

} // namespace

GeneratedAnswer generate_attr_first(const std::string& query_text,
                                    const std::vector<std::string>& source_htmls,
                                    llm::Adapter& adapter) {
    if (source_htmls.empty())
        raise(ErrorKind::Retrieval, "no sources supplied for generation");

    std::vector<std::vector<std::string>> docs;
    docs.reserve(source_htmls.size());
    for (const auto& html : source_htmls) {
        const auto map = chunker::partition(html);
        std::vector<std::string> texts;
        texts.reserve(map.chunks.size());
        for (const auto& chunk : map.chunks)
            texts.push_back(flatten(chunker::extract_text(chunk.html)));
        docs.push_back(std::move(texts));
    }

    // Stage 1: chunk selection.
    std::string listing;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        for (std::size_t c = 0; c < docs[d].size(); ++c) {
            if (!listing.empty()) listing += "\n";
            listing += "[" + std::to_string(d) + "-" + std::to_string(c) +
                       "] " + docs[d][c];
        }
    }
    llm::ChatRequest selection_request;
    selection_request.user =
        prompts::render(prompts::get("engine_attr_selection"),
                        {{"query", query_text}, {"chunk_listing", listing}});
    selection_request.tag = "engine:attr_selection";
    const auto highlights =
        parse_selection(adapter.complete(selection_request), docs);

    // Stage 2: highlight clustering (at least two clusters, one retry).
    std::vector<std::size_t> all_highlights(highlights.size());
    std::iota(all_highlights.begin(), all_highlights.end(), 0);
    llm::ChatRequest clustering_request;
    clustering_request.user = prompts::render(
        prompts::get("engine_attr_clustering"),
        {{"query", query_text},
         {"content",
          highlighted_content(docs, highlights, all_highlights, true)}});
    clustering_request.tag = "engine:attr_clustering";

    auto clusters = parse_clusters(adapter.complete(clustering_request),
                                   highlights.size());
    if (clusters.size() < 2) {
        log_warn("clustering returned fewer than two clusters; retrying once");
        clusters = parse_clusters(adapter.complete(clustering_request),
                                  highlights.size());
        if (clusters.size() < 2)
            raise(ErrorKind::Clustering,
                  "fewer than two clusters after the retry");
    }

    // Stage 3: one sentence per cluster, citing the contributing documents.
    GeneratedAnswer answer;
    answer.mode = CitationMode::AttrFirst;
    answer.source_count = static_cast<int>(source_htmls.size());
    std::string prefix;
    for (const auto& cluster : clusters) {
        llm::ChatRequest generation_request;
        generation_request.user = prompts::render(
            prompts::get("engine_attr_generation"),
            {{"query", query_text},
             {"content", highlighted_content(docs, highlights, cluster, false)},
             {"prefix", prefix}});
        generation_request.tag = "engine:attr_generation";
        const std::string sentence_text =
            trim(adapter.complete(generation_request));
        if (sentence_text.empty())
            raise(ErrorKind::GenerationFormat,
                  "generation stage returned an empty sentence");

        Sentence sentence;
        sentence.text = sentence_text;
        for (const std::size_t h : cluster)
            sentence.citations.insert(highlights[h].doc + 1);
        answer.sentences.push_back(std::move(sentence));

        if (!prefix.empty()) prefix += " ";
        prefix += sentence_text;
    }
    answer.full_text = prefix;
    return answer;
}

// ===== the citation indicator =====

VerifyResult verify_citation(const corpus::QueryRecord& query,
                             const std::string& target_id,
                             const std::vector<std::string>& pool,
                             CitationMode mode, int k,
                             const DocumentProvider& docs,
                             llm::Adapter& adapter) {
    if (std::find(pool.begin(), pool.end(), target_id) == pool.end())
        raise(ErrorKind::Config, "target webpage '" + target_id +
                                     "' is not in the pool of query '" +
                                     query.id + "'");

    VerifyResult result;
    result.outcome.query_id = query.id;
    result.outcome.target_id = target_id;
    result.outcome.ranked_candidates = retrieve(query.text, pool, docs, k);
    result.outcome.answer.mode = mode;

    const auto& ranked = result.outcome.ranked_candidates;
    if (std::find(ranked.begin(), ranked.end(), target_id) == ranked.end()) {
        log_info("target '" + target_id + "' missed the top-" +
                 std::to_string(k) + " for query '" + query.id + "'");
        return result; // V = 0 without any generation call
    }

    if (mode == CitationMode::InContext) {
        std::vector<std::string> texts;
        texts.reserve(ranked.size());
        for (const auto& id : ranked)
            texts.push_back(chunker::extract_text(docs(id)));
        result.outcome.answer = generate_incontext(query.text, texts, adapter);
    } else {
        std::vector<std::string> htmls;
        htmls.reserve(ranked.size());
        for (const auto& id : ranked) htmls.push_back(docs(id));
        result.outcome.answer = generate_attr_first(query.text, htmls, adapter);
    }

    for (const auto& sentence : result.outcome.answer.sentences) {
        for (const int index : sentence.citations) {
            if (index >= 1 && index <= static_cast<int>(ranked.size()))
                result.outcome.cited_ids.insert(ranked[index - 1]);
        }
    }
    result.outcome.target_cited =
        result.outcome.cited_ids.count(target_id) > 0;
    result.value = result.outcome.target_cited ? 1 : 0;
    return result;
}

} // namespace agentgeo::engine
