#include "agentgeo/toolkit.hpp"

#include <algorithm>

#include "agentgeo/error.hpp"
#include "agentgeo/log.hpp"
#include "agentgeo/prompts.hpp"
#include "agentgeo/text.hpp"

namespace agentgeo::toolkit {

const char* to_string(ToolCategory category) {
    switch (category) {
    case ToolCategory::InfoAugmentation: return "Information Augmentation";
    case ToolCategory::StructuralEnhancement: return "Structural Enhancement";
    case ToolCategory::ContentPositioning: return "Content Positioning";
    case ToolCategory::PersuasiveRefinement: return "Persuasive Refinement";
    case ToolCategory::Rendering: return "Rendering";
    }
    return "?";
}

// ===== registry =====

const std::vector<ToolSpec>& all_tools() {
    static const std::vector<ToolSpec> registry = {
        {"entity_injection", ToolCategory::InfoAugmentation,
         "tool_entity_injection",
         "Surgically inserts missing facts or entities at the best semantic "
         "spot, wrapping them in <strong> tags.",
         {"missing_entities"}, false},
        {"data_serialization", ToolCategory::InfoAugmentation,
         "tool_data_serialization",
         "Converts narrative descriptions of data into structured HTML "
         "tables with headers, preserving non-tabular commentary.",
         {}, false},
        {"structure_optimization", ToolCategory::StructuralEnhancement,
         "tool_structure_optimization",
         "Adds hierarchical headers, lists and emphasis tags to walls of "
         "text without changing the visible wording.",
         {}, false},
        {"noise_isolation", ToolCategory::StructuralEnhancement,
         "tool_noise_isolation",
         "Wraps boilerplate (navigation, ads, footers) in aside/nav/footer "
         "containers and marks high-value content as article.",
         {}, false},
        {"bluf_optimization", ToolCategory::ContentPositioning,
         "tool_bluf_optimization",
         "Generates a one-to-two sentence Bottom Line Up Front summary box "
         "that is placed in front of the chunk.",
         {"key_takeaway"}, true},
        {"content_relocation", ToolCategory::ContentPositioning,
         "tool_content_relocation",
         "Surfaces hidden or truncated content through a style-matched "
         "summary section at the top of the chunk.",
         {"hidden_summary"}, false},
        {"intent_realignment", ToolCategory::ContentPositioning,
         "tool_intent_realignment",
         "Rewrites the opening so the first sentence answers the user query "
         "directly, moving unrelated details toward the end.",
         {}, false},
        {"persuasive_rewriting", ToolCategory::PersuasiveRefinement,
         "tool_persuasive_rewriting",
         "Applies an evidence-based persuasion strategy (authoritative "
         "tone, social proof, ...) without altering the facts.",
         {}, false},
        {"historical_redteam", ToolCategory::PersuasiveRefinement,
         "tool_historical_redteam",
         "Reframes potentially outdated content as essential historical "
         "context (timeline, comparison, knowledge anchoring).",
         {"outdated_info"}, false},
        {"static_renderer", ToolCategory::Rendering,
         "tool_static_renderer",
         "Simulates server-side rendering: replaces script-dependent markup "
         "with the plain crawlable HTML it would have produced.",
         {}, false},
    };
    return registry;
}

const ToolSpec& tool_spec(const std::string& id) {
    for (const auto& spec : all_tools())
        if (spec.id == id) return spec;
    raise(ErrorKind::Config, "unknown tool id '" + id + "'");
}

bool is_tool_id(const std::string& id) {
    const auto& tools = all_tools();
    return std::any_of(tools.begin(), tools.end(),
                       [&](const ToolSpec& spec) { return spec.id == id; });
}

std::string tool_descriptions() {
    std::string out;
    for (const auto& spec : all_tools()) {
        out += "- " + spec.id + " (" + to_string(spec.category) +
               "): " + spec.description + "\n";
    }
    return out;
}

// ===== strategy vocabularies =====

const std::vector<std::string>& persuasion_strategies() {
    static const std::vector<std::string> strategies = {
        "authoritative_tone", "counter_argument",   "emotional_hook",
        "social_proof",       "scarcity_urgency",   "logical_structure",
    };
    return strategies;
}

const std::vector<std::string>& redteam_variants() {
    static const std::vector<std::string> variants = {
        "timeline_framing",      "implicit_prompt",
        "comparative_analysis",  "completeness_emphasis",
        "knowledge_anchoring",
    };
    return variants;
}

namespace {

// Per-strategy guide injected as {strategy_instruction}; mirrors the
// reference list at the bottom of the persuasive-rewriting template.
std::string strategy_guide(const std::string& strategy) {
    if (strategy == "authoritative_tone")
        return "Use professional terminology and industry-standard "
               "expressions. Cite specific data, research findings, or "
               "expert opinions where available. Adopt an objective, "
               "confident statement style. Replace vague words like "
               "\"maybe\", \"perhaps\" with \"research shows\", \"data "
               "indicates\". Add credibility markers: credentials, "
               "experience, proven track record.";
    if (strategy == "counter_argument")
        return "First acknowledge the validity of opposing viewpoints, "
               "then refute with stronger evidence and reasoning. Use "
               "structures like \"While... however...\" or \"Although... "
               "nevertheless...\". Demonstrate comprehensive thinking and "
               "address potential objections proactively.";
    if (strategy == "emotional_hook")
        return "Open with a story, scenario, or compelling question to "
               "capture attention. Connect to the reader's pain points, "
               "desires, or aspirations. Use second person \"you\" to "
               "increase immersion. Add emotionally resonant words at key "
               "argument points and create vivid, relatable imagery.";
    if (strategy == "social_proof")
        return "Emphasize \"most people\", \"expert consensus\", "
               "\"industry standard\". Reference user reviews, case "
               "studies, success stories. Use numbers for credibility "
               "(e.g., \"90% of users\", \"trusted by 10,000+\"). "
               "Highlight endorsements, awards, and show that others have "
               "made the same choice successfully.";
    if (strategy == "scarcity_urgency")
        return "Emphasize timeliness, scarcity, or uniqueness. Use words "
               "like \"only\", \"first\", \"exclusive\", \"limited\". "
               "Imply the cost of missing out (FOMO). Highlight what makes "
               "this opportunity rare or time-sensitive and create a sense "
               "of immediate value.";
    if (strategy == "logical_structure")
        return "Present clear cause-and-effect relationships. Use numbered "
               "lists and step-by-step reasoning. Provide concrete "
               "evidence for each claim. Build arguments progressively "
               "from premise to conclusion, eliminating logical gaps and "
               "strengthening transitions.";
    raise(ErrorKind::Template, "unknown persuasion strategy '" + strategy + "'");
}

std::string context_section(const std::string& before,
                            const std::string& after) {
    if (before.empty() && after.empty()) return "";
    std::string out;
    out += "=== CONTEXT BEFORE (Reference Only - DO NOT MODIFY) ===\n";
    out += before;
    out += "\n=== CONTEXT AFTER (Reference Only - DO NOT MODIFY) ===\n";
    out += after;
    return out;
}

std::string extra_or(const std::map<std::string, std::string>& extras,
                     const std::string& key, const std::string& fallback) {
    auto it = extras.find(key);
    if (it == extras.end() || it->second.empty()) return fallback;
    return it->second;
}

} // namespace

// ===== history =====

std::string history_section(const std::vector<std::string>& summaries) {
    if (summaries.empty()) return "";
    std::string bullets;
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        if (i) bullets += "\n";
        bullets += "- " + summaries[i];
    }
    return prompts::render(prompts::get("history_section"),
                           {{"previous_modifications", bullets}});
}

// ===== rendering and invocation =====

std::string render_prompt(const ToolSpec& spec, const ToolArgs& args) {
    std::string resource = spec.resource;
    std::map<std::string, std::string> values = args.extras;

    if (spec.id == "historical_redteam") {
        const auto& variants = redteam_variants();
        std::string variant =
            extra_or(args.extras, "strategy", variants.front());
        if (std::find(variants.begin(), variants.end(), variant) ==
            variants.end())
            raise(ErrorKind::Template,
                  "unknown historical_redteam strategy '" + variant + "'");
        resource = spec.resource + "_" + variant;
        values["strategy"] = variant;
    } else if (spec.id == "persuasive_rewriting") {
        const auto& strategies = persuasion_strategies();
        std::string strategy =
            extra_or(args.extras, "strategy", strategies.front());
        values["strategy"] = strategy;
        values["strategy_instruction"] = strategy_guide(strategy);
    }

    // System-populated fields win over whatever the selection output carried.
    values["target_content"] = args.target_content;
    values["core_idea"] = args.core_idea;
    values["query"] = args.query;
    values["context_section"] =
        context_section(args.context_before, args.context_after);
    values["history_section"] = args.previous_modifications;
    values["preservation_rules"] = prompts::get("preservation_rules");
    if (extra_or(args.extras, "user_query", "").empty())
        values["user_query"] = args.query;
    if (extra_or(args.extras, "target_query", "").empty())
        values["target_query"] = args.query;

    return prompts::render(prompts::get(resource), values);
}

ToolResult parse_tool_output(const std::string& raw) {
    ToolResult result;
    const auto lines = split_lines(raw);
    std::size_t marker = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]) == "---MODIFICATION_SUMMARY---") {
            marker = i;
            break;
        }
    }
    if (marker == lines.size()) {
        log_warn("tool output carries no ---MODIFICATION_SUMMARY--- marker; "
                 "treating the whole output as content");
        result.content = trim(raw);
        return result;
    }
    std::string content;
    for (std::size_t i = 0; i < marker; ++i) {
        if (i) content += "\n";
        content += lines[i];
    }
    result.content = trim(content);
    for (std::size_t i = marker + 1; i < lines.size(); ++i) {
        const std::string line = trim(lines[i]);
        if (starts_with(line, "- "))
            result.summary.push_back(trim(line.substr(2)));
    }
    return result;
}

ToolResult invoke(const ToolSpec& spec, const ToolArgs& args,
                  llm::Adapter& adapter) {
    llm::ChatRequest request;
    request.user = render_prompt(spec, args);
    request.tag = "tool:" + spec.id;
    const std::string raw = adapter.complete(request);
    ToolResult result = parse_tool_output(raw);
    if (result.content.empty())
        raise(ErrorKind::ToolOutput,
              "tool '" + spec.id + "' returned empty content");
    return result;
}

} // namespace agentgeo::toolkit
