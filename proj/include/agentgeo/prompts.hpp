#pragma once

#include <map>
#include <string>

namespace agentgeo::prompts {

// Prompt and policy texts shipped under resources/prompts/, embedded at build
// time. Names are the file stems. These strings are contract surfaces for
// scripted transcripts: treat every byte as part of the interface.
const std::map<std::string, std::string>& all();

// Raises Config for an unknown name.
const std::string& get(const std::string& name);

// Single-pass substitution of {identifier} placeholders. Values are inserted
// verbatim and never rescanned, so substituted content containing braces can
// not be mistaken for a placeholder. Brace spans that are not identifiers
// (JSON literals, {<highlight_start>} markers) pass through untouched. An
// identifier placeholder absent from `values` raises Template naming it.
std::string render(const std::string& text,
                   const std::map<std::string, std::string>& values);

} // namespace agentgeo::prompts
