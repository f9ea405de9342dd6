#pragma once

#include <map>
#include <string>
#include <vector>

#include "agentgeo/llm.hpp"

namespace agentgeo::toolkit {

enum class ToolCategory {
    InfoAugmentation,
    StructuralEnhancement,
    ContentPositioning,
    PersuasiveRefinement,
    Rendering,
};

const char* to_string(ToolCategory category);

// A registered repair tool. `resource` is the prompt template stem;
// historical_redteam swaps in one of five variant stems at render time based
// on the `strategy` argument.
struct ToolSpec {
    std::string id;
    ToolCategory category;
    std::string resource;
    std::string description;                 // one line, fed to the selection prompt
    std::vector<std::string> required_args;  // extras the caller must supply
    bool prepend_output = false;             // result goes in front of the original fragment
};

// Arguments for one invocation. The six common fields are always present,
// possibly empty; `extras` carries tool-specific values (missing_entities,
// key_takeaway, hidden_summary, strategy, outdated_info, user_query, ...).
// Common fields win over same-named extras: the system populates them.
struct ToolArgs {
    std::string target_content;
    std::string context_before;
    std::string context_after;
    std::string core_idea;
    std::string previous_modifications;  // full history section or empty
    std::string query;
    std::map<std::string, std::string> extras;
};

struct ToolResult {
    std::string content;
    std::vector<std::string> summary;
};

// The closed set of ten tools, in registration order.
const std::vector<ToolSpec>& all_tools();
const ToolSpec& tool_spec(const std::string& id);  // Config error when unknown
bool is_tool_id(const std::string& id);

// "- id (Category): description" lines for the selection prompt.
std::string tool_descriptions();

// Strategy vocabularies. persuasive_rewriting defaults to the first
// persuasion strategy, historical_redteam to the first variant.
const std::vector<std::string>& persuasion_strategies();
const std::vector<std::string>& redteam_variants();

// "" for an empty list, otherwise the preservation header plus one "- "
// bullet per summary; the result is what previous_modifications carries.
std::string history_section(const std::vector<std::string>& summaries);

// Fills the tool template. Raises Template naming the first placeholder left
// unresolved after substitution.
std::string render_prompt(const ToolSpec& spec, const ToolArgs& args);

// Splits at the first ---MODIFICATION_SUMMARY--- line; "- " bullets after it
// become summary entries. Without the marker the whole output is content and
// a warning is logged.
ToolResult parse_tool_output(const std::string& raw);

// render -> adapter (tag "tool:<id>") -> parse. Raises ToolOutput when the
// parsed content is empty.
ToolResult invoke(const ToolSpec& spec, const ToolArgs& args,
                  llm::Adapter& adapter);

}  // namespace agentgeo::toolkit
