#include "agentgeo/text.hpp"

#include <cctype>

namespace agentgeo {

namespace {

inline bool is_alnum(unsigned char c) {
    return std::isalnum(c) != 0;
}

} // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (is_alnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty())
        tokens.push_back(std::move(current));
    return tokens;
}

std::string to_lower(std::string text) {
    for (char& c : text)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return text;
}

std::string trim(const std::string& text) {
    std::size_t begin = 0;
    std::size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin])))
        ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1])))
        --end;
    return text.substr(begin, end - begin);
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string current;
    for (char c : text) {
        if (c == '\n') {
            if (!current.empty() && current.back() == '\r')
                current.pop_back();
            lines.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty() && current.back() == '\r')
        current.pop_back();
    lines.push_back(std::move(current));
    return lines;
}

bool starts_with(const std::string& text, const std::string& prefix) {
    return text.size() >= prefix.size() &&
           text.compare(0, prefix.size(), prefix) == 0;
}

bool contains(const std::string& text, const std::string& needle) {
    return text.find(needle) != std::string::npos;
}

std::size_t replace_all(std::string& text, const std::string& needle,
                        const std::string& replacement) {
    if (needle.empty())
        return 0;
    std::size_t count = 0;
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), replacement);
        pos += replacement.size();
        ++count;
    }
    return count;
}

namespace {

std::optional<std::string> extract_span(const std::string& raw, char open,
                                        char close) {
    std::string body = raw;
    // Strip a fenced block when one is present; the payload is inside it.
    std::size_t fence = body.find("```");
    if (fence != std::string::npos) {
        std::size_t start = body.find('\n', fence);
        std::size_t closing = std::string::npos;
        if (start != std::string::npos)
            closing = body.find("```", start);
        if (start != std::string::npos && closing != std::string::npos)
            body = body.substr(start + 1, closing - start - 1);
    }
    std::size_t begin = body.find(open);
    std::size_t end = body.rfind(close);
    if (begin == std::string::npos || end == std::string::npos || end < begin)
        return std::nullopt;
    return body.substr(begin, end - begin + 1);
}

} // namespace

std::optional<std::string> extract_json_object(const std::string& raw) {
    return extract_span(raw, '{', '}');
}

std::optional<std::string> extract_json_array(const std::string& raw) {
    return extract_span(raw, '[', ']');
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

std::string fnv1a64_hex(const std::string& bytes) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t hash = fnv1a64(bytes);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[hash & 0xF];
        hash >>= 4;
    }
    return out;
}

} // namespace agentgeo
