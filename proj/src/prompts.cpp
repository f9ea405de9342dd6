#include "agentgeo/prompts.hpp"

#include "agentgeo/error.hpp"

namespace agentgeo::prompts {

const std::map<std::string, std::string>& all() {
    static const std::map<std::string, std::string> items = {
#include "prompt_data.inc"
    };
    return items;
}

const std::string& get(const std::string& name) {
    const auto& items = all();
    auto it = items.find(name);
    if (it == items.end())
        raise(ErrorKind::Config, "unknown prompt resource '" + name + "'");
    return it->second;
}

namespace {

bool identifier_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool identifier_char(char c) {
    return identifier_start(c) || (c >= '0' && c <= '9');
}

} // namespace

std::string render(const std::string& text,
                   const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '{') {
            out += text[i++];
            continue;
        }
        std::size_t j = i + 1;
        if (j < text.size() && identifier_start(text[j])) {
            std::size_t k = j + 1;
            while (k < text.size() && identifier_char(text[k])) ++k;
            if (k < text.size() && text[k] == '}') {
                const std::string name = text.substr(j, k - j);
                auto it = values.find(name);
                if (it == values.end())
                    raise(ErrorKind::Template,
                          "unresolved placeholder '" + name + "'");
                out += it->second;
                i = k + 1;
                continue;
            }
        }
        out += text[i++];
    }
    return out;
}

} // namespace agentgeo::prompts
