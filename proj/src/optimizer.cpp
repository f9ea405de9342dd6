#include "agentgeo/optimizer.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <utility>

#include "agentgeo/error.hpp"
#include "agentgeo/log.hpp"
#include "agentgeo/policy.hpp"
#include "agentgeo/toolkit.hpp"

namespace agentgeo::optimizer {

namespace {

// ===== error partition =====

// Errors that poison the whole run: transport loss, an exhausted transcript,
// or a violated document/dataset invariant. Everything else is scoped to the
// query that hit it.
bool is_fatal(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Transport:
    case ErrorKind::UnmatchedPrompt:
    case ErrorKind::StaleMap:
    case ErrorKind::Conflict:
    case ErrorKind::Parse:
    case ErrorKind::Integrity:
        return true;
    default:
        return false;
    }
}

std::string describe(const Error& error) {
    return std::string(to_string(error.kind())) + ": " + error.what();
}

// ===== conflict resolution =====

// Severity first, confidence second, earliest query last. Strict: returns
// true only when `a` beats `b`.
bool diagnosis_beats(const EditSuggestion& a, const EditSuggestion& b) {
    if (diagnosis::rank(a.severity) != diagnosis::rank(b.severity)) {
        return diagnosis::rank(a.severity) > diagnosis::rank(b.severity);
    }
    if (a.confidence != b.confidence) {
        return a.confidence > b.confidence;
    }
    return a.query_ordinal < b.query_ordinal;
}

// One winning suggestion per contested chunk. Suggestions are re-sorted by
// query ordinal first so the outcome is independent of arrival order.
std::map<int, EditSuggestion> pick_winners(std::vector<EditSuggestion> suggestions,
                                           ConflictStrategy strategy) {
    std::sort(suggestions.begin(), suggestions.end(),
              [](const EditSuggestion& a, const EditSuggestion& b) {
                  if (a.query_ordinal != b.query_ordinal) {
                      return a.query_ordinal < b.query_ordinal;
                  }
                  return a.query_id < b.query_id;
              });

    std::map<int, std::vector<const EditSuggestion*>> by_chunk;
    for (const auto& suggestion : suggestions) {
        by_chunk[suggestion.target_chunk_index].push_back(&suggestion);
    }

    std::map<int, EditSuggestion> winners;
    for (const auto& [chunk_index, group] : by_chunk) {
        const EditSuggestion* winner = nullptr;
        if (strategy == ConflictStrategy::DiagnosisAware) {
            for (const EditSuggestion* candidate : group) {
                if (winner == nullptr || diagnosis_beats(*candidate, *winner)) {
                    winner = candidate;
                }
            }
        } else {
            // Voting: the fragment proposed by the most queries wins; ties by
            // the strongest severity among its proposers, then the earliest
            // proposing query. The champion entry carries the metadata.
            struct FragmentStat {
                int votes = 0;
                int min_ordinal = 0;
                const EditSuggestion* champion = nullptr;
            };
            std::map<std::string, FragmentStat> fragments;
            for (const EditSuggestion* candidate : group) {
                auto [it, fresh] =
                    fragments.try_emplace(candidate->fragment_html);
                FragmentStat& stat = it->second;
                ++stat.votes;
                if (fresh || candidate->query_ordinal < stat.min_ordinal) {
                    stat.min_ordinal = candidate->query_ordinal;
                }
                if (stat.champion == nullptr ||
                    diagnosis_beats(*candidate, *stat.champion)) {
                    stat.champion = candidate;
                }
            }
            const FragmentStat* best = nullptr;
            for (const auto& [fragment, stat] : fragments) {
                if (best == nullptr || stat.votes > best->votes ||
                    (stat.votes == best->votes &&
                     (diagnosis::rank(stat.champion->severity) >
                          diagnosis::rank(best->champion->severity) ||
                      (diagnosis::rank(stat.champion->severity) ==
                           diagnosis::rank(best->champion->severity) &&
                       stat.min_ordinal < best->min_ordinal)))) {
                    best = &stat;
                }
            }
            winner = best->champion;
        }
        winners.emplace(chunk_index, *winner);
    }
    return winners;
}

std::string join_summaries(const std::vector<std::string>& summary) {
    std::string joined;
    for (const auto& line : summary) {
        if (!joined.empty()) {
            joined += "; ";
        }
        joined += line;
    }
    return joined;
}

} // namespace

// ===== conflict strategy labels =====

const char* to_string(ConflictStrategy strategy) {
    switch (strategy) {
    case ConflictStrategy::DiagnosisAware:
        return "diagnosis-aware";
    case ConflictStrategy::Voting:
        return "voting";
    }
    return "diagnosis-aware";
}

std::optional<ConflictStrategy> parse_conflict_strategy(const std::string& label) {
    if (label == "diagnosis-aware") {
        return ConflictStrategy::DiagnosisAware;
    }
    if (label == "voting") {
        return ConflictStrategy::Voting;
    }
    return std::nullopt;
}

// ===== aggregation =====

std::vector<chunker::ChunkEdit> aggregate(std::vector<EditSuggestion> suggestions,
                                          const chunker::ChunkMap& frozen,
                                          ConflictStrategy strategy) {
    const int chunk_count = static_cast<int>(frozen.chunks.size());
    for (const auto& suggestion : suggestions) {
        if (suggestion.target_chunk_index < 0 ||
            suggestion.target_chunk_index >= chunk_count) {
            raise(ErrorKind::Range,
                  "edit suggestion from query '" + suggestion.query_id +
                      "' targets chunk " +
                      std::to_string(suggestion.target_chunk_index) +
                      " outside the frozen map of " +
                      std::to_string(chunk_count) + " chunks");
        }
    }
    std::map<int, EditSuggestion> winners =
        pick_winners(std::move(suggestions), strategy);
    std::vector<chunker::ChunkEdit> edits;
    edits.reserve(winners.size());
    for (const auto& [chunk_index, winner] : winners) {
        edits.push_back({chunk_index, winner.fragment_html});
    }
    return edits;
}

// ===== the repair loop =====

RepairResult repair_loop(const corpus::QueryRecord& query,
                         const corpus::Webpage& webpage,
                         const chunker::ChunkMap& frozen,
                         const engine::CitationOutcome& initial,
                         const corpus::Dataset& dataset,
                         const OptimizerConfig& config, llm::Adapter& adapter) {
    RepairResult result;
    chunker::SurrogateDoc surrogate(frozen);
    policy::TrajectoryMemory memory;
    std::vector<std::string> summaries;

    const engine::CitationOutcome* latest = &initial;
    engine::CitationOutcome scratch;

    try {
        for (int t = 1; t <= config.max_iterations; ++t) {
            result.iterations = t;

            // Contrast the current surrogate against whoever beat it in the
            // latest verification.
            std::string competitor_id = diagnosis::competitor_or_fallback(*latest);
            diagnosis::ContrastPair pair;
            pair.target_id = webpage.id;
            pair.target_html = surrogate.html();
            pair.competitor_id = competitor_id;
            pair.competitor_html = dataset.webpage(competitor_id).html;

            diagnosis::Diagnosis diag =
                diagnosis::diagnose(query.text, pair, adapter);
            ++result.diagnosis_counts[diagnosis::to_string(diag.root_cause)];

            policy::PolicyDecision decision = policy::select(
                diag, memory, surrogate.render_indexed(), query.text,
                static_cast<int>(surrogate.chunk_count()),
                config.memory_enabled, adapter);
            const int idx = decision.target_chunk_index;

            const toolkit::ToolSpec& spec = toolkit::tool_spec(decision.tool_id);
            toolkit::ToolArgs args;
            args.target_content = surrogate.fragment(idx);
            args.context_before = idx > 0 ? surrogate.fragment(idx - 1) : "";
            args.context_after =
                idx + 1 < static_cast<int>(surrogate.chunk_count())
                    ? surrogate.fragment(idx + 1)
                    : "";
            args.query = query.text;
            args.previous_modifications = toolkit::history_section(summaries);
            args.extras = decision.tool_arguments;
            auto core = args.extras.find("core_idea");
            if (core != args.extras.end() && !core->second.empty()) {
                args.core_idea = core->second;
            } else if (!webpage.title.empty()) {
                args.core_idea = webpage.title;
            } else {
                args.core_idea = query.text;
            }
            for (const auto& required : spec.required_args) {
                std::string& value = args.extras[required];
                if (value.empty()) {
                    value = query.text;
                }
            }

            toolkit::ToolResult tool_result =
                toolkit::invoke(spec, args, adapter);
            std::string fragment =
                spec.prepend_output
                    ? tool_result.content + "\n" + args.target_content
                    : tool_result.content;
            surrogate.replace(idx, std::move(fragment));

            engine::DocumentProvider docs = engine::overlay_provider(
                engine::dataset_provider(dataset), webpage.id, surrogate.html());
            engine::VerifyResult verify = engine::verify_citation(
                query, webpage.id, dataset.pool(query.id), config.citation_mode,
                config.retrieval_k, docs, adapter);

            policy::Outcome outcome = verify.value == 1
                                          ? policy::Outcome::CitationAchieved
                                          : policy::Outcome::StillUncited;
            memory.record(diag.root_cause, decision.tool_id, outcome, t);
            for (const auto& line : tool_result.summary) {
                summaries.push_back(line);
            }

            if (verify.value == 1) {
                EditSuggestion suggestion;
                suggestion.query_id = query.id;
                suggestion.root_cause = diag.root_cause;
                suggestion.severity = diag.severity;
                suggestion.confidence = diag.confidence;
                suggestion.target_chunk_index = idx;
                suggestion.fragment_html = surrogate.fragment(idx);
                suggestion.summary = summaries;
                suggestion.tool_id = decision.tool_id;
                result.suggestion = std::move(suggestion);
                break;
            }
            scratch = std::move(verify.outcome);
            latest = &scratch;
        }
    } catch (const Error& error) {
        if (is_fatal(error.kind())) {
            throw;
        }
        result.failure = describe(error);
        result.suggestion.reset();
        log_warn("repair loop for query '" + query.id +
                 "' stopped: " + result.failure);
    }
    return result;
}

// ===== batch optimization =====

OptimizeResult optimize(const corpus::Webpage& webpage,
                        const std::vector<corpus::QueryRecord>& train_queries,
                        const corpus::Dataset& dataset,
                        const OptimizerConfig& config, llm::Adapter& adapter) {
    if (config.batch_size < 1) {
        raise(ErrorKind::Config, "batch size must be at least 1");
    }
    if (config.max_iterations < 1) {
        raise(ErrorKind::Config, "max iterations must be at least 1");
    }
    if (config.retrieval_k < 1) {
        raise(ErrorKind::Config, "retrieval k must be at least 1");
    }
    if (config.workers < 1) {
        raise(ErrorKind::Config, "worker count must be at least 1");
    }

    OptimizeResult out;
    out.optimized = webpage;

    std::string current_html = chunker::normalize(webpage.html);
    const int total = static_cast<int>(train_queries.size());
    const int batch_count = (total + config.batch_size - 1) / config.batch_size;

    struct Slot {
        corpus::QueryOutcome outcome;
        std::optional<EditSuggestion> suggestion;
        std::map<std::string, int> diagnosis_counts;
        std::exception_ptr fatal;
    };

    for (int b = 0; b < batch_count; ++b) {
        const int begin = b * config.batch_size;
        const int end = std::min(total, begin + config.batch_size);
        const int batch_size = end - begin;

        chunker::ChunkMap frozen = chunker::partition(current_html);

        std::vector<Slot> slots(static_cast<std::size_t>(batch_size));
        auto run_one = [&](int i) {
            const corpus::QueryRecord& query = train_queries[begin + i];
            Slot& slot = slots[static_cast<std::size_t>(i)];
            slot.outcome.query_id = query.id;
            slot.outcome.page_id = webpage.id;
            try {
                engine::DocumentProvider docs = engine::overlay_provider(
                    engine::dataset_provider(dataset), webpage.id, current_html);
                engine::VerifyResult verify = engine::verify_citation(
                    query, webpage.id, dataset.pool(query.id),
                    config.citation_mode, config.retrieval_k, docs, adapter);
                if (verify.value == 1) {
                    slot.outcome.cited_before = true;
                    slot.outcome.cited_after = true;
                    return;
                }
                RepairResult repair =
                    repair_loop(query, webpage, frozen, verify.outcome, dataset,
                                config, adapter);
                slot.outcome.iterations = repair.iterations;
                slot.outcome.failure = repair.failure;
                slot.diagnosis_counts = std::move(repair.diagnosis_counts);
                if (repair.suggestion) {
                    slot.outcome.cited_after = true;
                    slot.suggestion = std::move(repair.suggestion);
                    slot.suggestion->query_ordinal = i;
                }
            } catch (const Error& error) {
                if (is_fatal(error.kind())) {
                    slot.fatal = std::current_exception();
                } else {
                    slot.outcome.failure = describe(error);
                }
            } catch (...) {
                slot.fatal = std::current_exception();
            }
        };

        const int threads = std::min(config.workers, batch_size);
        if (threads <= 1) {
            for (int i = 0; i < batch_size; ++i) {
                run_one(i);
            }
        } else {
            std::vector<std::thread> pool;
            pool.reserve(static_cast<std::size_t>(threads));
            for (int w = 0; w < threads; ++w) {
                pool.emplace_back([&, w] {
                    for (int i = w; i < batch_size; i += threads) {
                        run_one(i);
                    }
                });
            }
            for (auto& worker : pool) {
                worker.join();
            }
        }

        // A fatal error aborts at the batch barrier; the report keeps the
        // outcomes of the queries ahead of it in input order so the partial
        // record is deterministic.
        for (int i = 0; i < batch_size; ++i) {
            if (!slots[static_cast<std::size_t>(i)].fatal) {
                continue;
            }
            for (int j = 0; j < i; ++j) {
                Slot& done = slots[static_cast<std::size_t>(j)];
                out.report.outcomes.push_back(done.outcome);
                for (const auto& [cause, count] : done.diagnosis_counts) {
                    out.report.diagnosis_histogram[cause] += count;
                }
            }
            out.report.aborted = true;
            try {
                std::rethrow_exception(
                    slots[static_cast<std::size_t>(i)].fatal);
            } catch (const Error& error) {
                out.report.abort_kind = error.kind();
                out.report.abort_reason = describe(error);
            } catch (const std::exception& error) {
                out.report.abort_kind = ErrorKind::Partial;
                out.report.abort_reason = error.what();
            }
            log_error("optimization of page '" + webpage.id +
                      "' aborted in batch " + std::to_string(b) + ": " +
                      out.report.abort_reason);
            out.optimized.html = current_html;
            out.optimized.length = corpus::length_category(current_html);
            return out;
        }

        std::vector<EditSuggestion> suggestions;
        for (Slot& slot : slots) {
            out.report.outcomes.push_back(slot.outcome);
            for (const auto& [cause, count] : slot.diagnosis_counts) {
                out.report.diagnosis_histogram[cause] += count;
            }
            if (slot.suggestion) {
                suggestions.push_back(std::move(*slot.suggestion));
            }
        }
        if (suggestions.empty()) {
            continue;
        }

        std::map<int, EditSuggestion> winners =
            pick_winners(std::move(suggestions), config.conflict_strategy);
        std::vector<chunker::ChunkEdit> edits;
        edits.reserve(winners.size());
        for (const auto& [chunk_index, winner] : winners) {
            edits.push_back({chunk_index, winner.fragment_html});
        }
        current_html = chunker::apply_edits(current_html, frozen, edits);
        for (const auto& [chunk_index, winner] : winners) {
            corpus::EditLogEntry entry;
            entry.page_id = webpage.id;
            entry.batch = b;
            entry.chunk_index = chunk_index;
            entry.tool_id = winner.tool_id;
            entry.root_cause = diagnosis::to_string(winner.root_cause);
            entry.severity = diagnosis::to_string(winner.severity);
            entry.confidence = winner.confidence;
            entry.summary = join_summaries(winner.summary);
            out.report.edits.push_back(std::move(entry));
        }
    }

    out.optimized.html = current_html;
    out.optimized.length = corpus::length_category(current_html);
    return out;
}

} // namespace agentgeo::optimizer
