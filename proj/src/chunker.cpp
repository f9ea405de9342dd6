#include "agentgeo/chunker.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <memory>
#include <unordered_set>

#include "agentgeo/error.hpp"
#include "agentgeo/text.hpp"

namespace agentgeo::chunker {

namespace {

// ===== element classes =====

const std::unordered_set<std::string>& void_elements() {
    static const std::unordered_set<std::string> s = {
        "area", "base", "br", "col", "embed", "hr", "img", "input",
        "link", "meta", "param", "source", "track", "wbr"};
    return s;
}

const std::unordered_set<std::string>& raw_text_elements() {
    static const std::unordered_set<std::string> s = {"script", "style"};
    return s;
}

// Chunk boundaries that are always taken whole.
const std::unordered_set<std::string>& leaf_blocks() {
    static const std::unordered_set<std::string> s = {
        "p", "h1", "h2", "h3", "h4", "h5", "h6", "ul", "ol", "table",
        "pre", "blockquote", "aside", "header", "footer", "nav"};
    return s;
}

// Containers that act as transparent wrappers when they hold only block
// children; otherwise they chunk whole like a leaf block.
const std::unordered_set<std::string>& wrapper_blocks() {
    static const std::unordered_set<std::string> s = {"div", "section",
                                                      "article"};
    return s;
}

bool is_block_tag(const std::string& tag) {
    return leaf_blocks().count(tag) > 0 || wrapper_blocks().count(tag) > 0;
}

// Start tags that imply </p> for a currently open paragraph.
const std::unordered_set<std::string>& p_closers() {
    static const std::unordered_set<std::string> s = {
        "address", "article", "aside",  "blockquote", "details", "div",
        "dl",      "fieldset", "figcaption", "figure", "footer",  "form",
        "h1",      "h2",       "h3",     "h4",        "h5",      "h6",
        "header",  "hgroup",   "hr",     "main",      "menu",    "nav",
        "ol",      "p",        "pre",    "section",   "table",   "ul"};
    return s;
}

// Boundaries rendered as newlines during text extraction.
const std::unordered_set<std::string>& newline_boundaries() {
    static const std::unordered_set<std::string> s = {
        "p",  "div", "section", "article", "aside", "header", "footer",
        "nav", "h1", "h2",      "h3",      "h4",    "h5",     "h6",
        "ul", "ol",  "table",   "pre",     "blockquote", "li", "tr",
        "dt", "dd",  "caption", "thead",   "tbody", "tfoot",  "br",
        "hr", "form", "main",   "figure",  "figcaption", "dl", "title"};
    return s;
}

// ===== DOM =====

struct Node {
    enum class Type { Document, Element, Text, Raw };

    Type type = Type::Document;
    std::string tag;       // elements only, lowercased
    std::string attr_text; // verbatim bytes between tag name and '>'
    std::string text;      // Text payload / Raw bytes incl. delimiters
    std::vector<std::unique_ptr<Node>> children;
    Node* parent = nullptr;
    int ordinal = 0;       // position among the parent's element children
    int elem_children = 0; // running count used to assign ordinals

    // filled by the serializer / partitioner
    std::size_t begin = 0;
    std::size_t end = 0;
    bool has_block = false;
};

// ===== input validation =====

bool valid_utf8(const std::string& s) {
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        std::size_t extra;
        if (c < 0x80) {
            if (c == 0x00)
                return false; // NUL never appears in sane markup
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            extra = 1;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
        } else if ((c & 0xF8) == 0xF0) {
            extra = 3;
        } else {
            return false;
        }
        if (i + extra >= s.size())
            return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80)
                return false;
        }
        i += extra + 1;
    }
    return true;
}

// ===== parser =====

class Parser {
public:
    explicit Parser(const std::string& src) : src_(src) {}

    std::unique_ptr<Node> run() {
        auto doc = std::make_unique<Node>();
        doc->type = Node::Type::Document;
        stack_.push_back(doc.get());
        while (pos_ < src_.size())
            step();
        return doc;
    }

private:
    const std::string& src_;
    std::size_t pos_ = 0;
    std::vector<Node*> stack_;

    Node* top() { return stack_.back(); }

    void append_text(std::string text) {
        if (text.empty())
            return;
        auto node = std::make_unique<Node>();
        node->type = Node::Type::Text;
        node->text = std::move(text);
        node->parent = top();
        top()->children.push_back(std::move(node));
    }

    void append_raw(std::string bytes) {
        auto node = std::make_unique<Node>();
        node->type = Node::Type::Raw;
        node->text = std::move(bytes);
        node->parent = top();
        top()->children.push_back(std::move(node));
    }

    void step() {
        if (src_[pos_] != '<') {
            std::size_t next = src_.find('<', pos_);
            if (next == std::string::npos)
                next = src_.size();
            append_text(src_.substr(pos_, next - pos_));
            pos_ = next;
            return;
        }
        if (pos_ + 1 >= src_.size()) {
            append_text("<");
            ++pos_;
            return;
        }
        char c = src_[pos_ + 1];
        if (c == '!' || c == '?') {
            parse_bang();
        } else if (c == '/') {
            parse_end_tag();
        } else if (std::isalpha(static_cast<unsigned char>(c))) {
            parse_start_tag();
        } else {
            append_text("<");
            ++pos_;
        }
    }

    void parse_bang() {
        std::size_t end;
        if (src_.compare(pos_, 4, "<!--") == 0) {
            end = src_.find("-->", pos_ + 4);
            end = end == std::string::npos ? src_.size() : end + 3;
        } else {
            end = src_.find('>', pos_);
            end = end == std::string::npos ? src_.size() : end + 1;
        }
        append_raw(src_.substr(pos_, end - pos_));
        pos_ = end;
    }

    void parse_end_tag() {
        std::size_t cursor = pos_ + 2;
        std::string name = read_tag_name(cursor);
        std::size_t gt = src_.find('>', cursor);
        pos_ = gt == std::string::npos ? src_.size() : gt + 1;
        if (name.empty())
            return;
        // Close the matching open element if one exists; stray closers are
        // dropped.
        for (std::size_t i = stack_.size(); i-- > 1;) {
            if (stack_[i]->tag == name) {
                stack_.resize(i);
                return;
            }
        }
    }

    std::string read_tag_name(std::size_t& cursor) {
        std::string name;
        while (cursor < src_.size()) {
            char c = src_[cursor];
            if (std::isspace(static_cast<unsigned char>(c)) || c == '>' ||
                c == '/')
                break;
            name.push_back(
                static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            ++cursor;
        }
        return name;
    }

    void imply_end_tags(const std::string& incoming) {
        for (;;) {
            if (stack_.size() <= 1)
                return;
            const std::string& open = top()->tag;
            bool close = false;
            if (open == "p" && p_closers().count(incoming)) {
                close = true;
            } else if (open == "li" && incoming == "li") {
                close = true;
            } else if ((open == "dt" || open == "dd") &&
                       (incoming == "dt" || incoming == "dd")) {
                close = true;
            } else if ((open == "td" || open == "th") &&
                       (incoming == "td" || incoming == "th" ||
                        incoming == "tr")) {
                close = true;
            } else if (open == "tr" &&
                       (incoming == "tr" || incoming == "thead" ||
                        incoming == "tbody" || incoming == "tfoot")) {
                close = true;
            } else if (open == "option" && incoming == "option") {
                close = true;
            }
            if (!close)
                return;
            stack_.pop_back();
        }
    }

    void parse_start_tag() {
        std::size_t cursor = pos_ + 1;
        std::string name = read_tag_name(cursor);

        // Attribute bytes run to the matching '>' outside quotes.
        std::string attr;
        bool self_closing = false;
        char quote = 0;
        while (cursor < src_.size()) {
            char c = src_[cursor];
            if (quote) {
                if (c == quote)
                    quote = 0;
                attr.push_back(c);
            } else if (c == '"' || c == '\'') {
                quote = c;
                attr.push_back(c);
            } else if (c == '>') {
                break;
            } else {
                attr.push_back(c);
            }
            ++cursor;
        }
        pos_ = cursor < src_.size() ? cursor + 1 : src_.size();
        // A trailing '/' outside quotes marks self-closing syntax; it is not
        // part of the attributes.
        std::string trimmed = attr;
        while (!trimmed.empty() &&
               std::isspace(static_cast<unsigned char>(trimmed.back())))
            trimmed.pop_back();
        if (!trimmed.empty() && trimmed.back() == '/') {
            self_closing = true;
            trimmed.pop_back();
            attr = trimmed;
        }

        imply_end_tags(name);

        auto node = std::make_unique<Node>();
        node->type = Node::Type::Element;
        node->tag = name;
        node->attr_text = attr;
        node->parent = top();
        Node* raw = node.get();
        raw->ordinal = top()->elem_children++;
        top()->children.push_back(std::move(node));

        if (void_elements().count(name) || self_closing)
            return;
        if (raw_text_elements().count(name)) {
            consume_raw_content(raw, name);
            return;
        }
        stack_.push_back(raw);
    }

    void consume_raw_content(Node* element, const std::string& name) {
        std::string closer = "</" + name;
        std::size_t end = std::string::npos;
        for (std::size_t i = pos_; i + closer.size() <= src_.size(); ++i) {
            bool match = true;
            for (std::size_t k = 0; k < closer.size(); ++k) {
                if (std::tolower(static_cast<unsigned char>(src_[i + k])) !=
                    closer[k]) {
                    match = false;
                    break;
                }
            }
            if (match) {
                end = i;
                break;
            }
        }
        std::size_t content_end = end == std::string::npos ? src_.size() : end;
        if (content_end > pos_) {
            auto node = std::make_unique<Node>();
            node->type = Node::Type::Text;
            node->text = src_.substr(pos_, content_end - pos_);
            node->parent = element;
            element->children.push_back(std::move(node));
        }
        if (end == std::string::npos) {
            pos_ = src_.size();
            return;
        }
        std::size_t gt = src_.find('>', end);
        pos_ = gt == std::string::npos ? src_.size() : gt + 1;
    }
};

std::unique_ptr<Node> parse(const std::string& html) {
    if (!valid_utf8(html))
        raise(ErrorKind::Parse,
              "document bytes are not parseable text (NUL or invalid UTF-8)");
    return Parser(html).run();
}

// ===== serialization =====

void serialize_node(Node* node, std::string& out) {
    switch (node->type) {
    case Node::Type::Document:
        for (const auto& child : node->children)
            serialize_node(child.get(), out);
        break;
    case Node::Type::Text:
    case Node::Type::Raw:
        out += node->text;
        break;
    case Node::Type::Element: {
        node->begin = out.size();
        out += '<';
        out += node->tag;
        out += node->attr_text;
        out += '>';
        if (!void_elements().count(node->tag)) {
            for (const auto& child : node->children)
                serialize_node(child.get(), out);
            out += "</";
            out += node->tag;
            out += '>';
        }
        node->end = out.size();
        break;
    }
    }
}

std::string serialize(Node* document) {
    std::string out;
    serialize_node(document, out);
    return out;
}

// ===== text extraction =====

std::string decode_entities(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '&') {
            out.push_back(text[i]);
            ++i;
            continue;
        }
        std::size_t semi = text.find(';', i + 1);
        if (semi == std::string::npos || semi - i > 10) {
            out.push_back('&');
            ++i;
            continue;
        }
        std::string name = text.substr(i + 1, semi - i - 1);
        if (name == "amp") {
            out.push_back('&');
        } else if (name == "lt") {
            out.push_back('<');
        } else if (name == "gt") {
            out.push_back('>');
        } else if (name == "quot") {
            out.push_back('"');
        } else if (name == "apos") {
            out.push_back('\'');
        } else if (name == "nbsp") {
            out.push_back(' ');
        } else if (!name.empty() && name[0] == '#') {
            long code = 0;
            bool ok = false;
            if (name.size() > 2 && (name[1] == 'x' || name[1] == 'X')) {
                code = std::strtol(name.c_str() + 2, nullptr, 16);
                ok = true;
            } else if (name.size() > 1) {
                code = std::strtol(name.c_str() + 1, nullptr, 10);
                ok = true;
            }
            if (!ok || code <= 0 || code > 0x10FFFF) {
                out.append(text, i, semi - i + 1);
            } else if (code == 160) {
                out.push_back(' ');
            } else if (code < 0x80) {
                out.push_back(static_cast<char>(code));
            } else if (code < 0x800) {
                out.push_back(static_cast<char>(0xC0 | (code >> 6)));
                out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
            } else if (code < 0x10000) {
                out.push_back(static_cast<char>(0xE0 | (code >> 12)));
                out.push_back(static_cast<char>(0x80 | ((code >> 6) & 0x3F)));
                out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
            } else {
                out.push_back(static_cast<char>(0xF0 | (code >> 18)));
                out.push_back(static_cast<char>(0x80 | ((code >> 12) & 0x3F)));
                out.push_back(static_cast<char>(0x80 | ((code >> 6) & 0x3F)));
                out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
            }
        } else {
            out.push_back('&');
            ++i;
            continue;
        }
        i = semi + 1;
    }
    return out;
}

class TextBuilder {
public:
    void add_text(const std::string& raw) {
        std::string decoded = decode_entities(raw);
        for (char c : decoded) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                note_separator(1);
            } else {
                flush_separator();
                out_.push_back(c);
            }
        }
    }

    void note_separator(int kind) {
        if (!out_.empty())
            pending_ = std::max(pending_, kind);
    }

    std::string take() { return std::move(out_); }

private:
    void flush_separator() {
        if (pending_ == 1)
            out_.push_back(' ');
        else if (pending_ == 2)
            out_.push_back('\n');
        pending_ = 0;
    }

    std::string out_;
    int pending_ = 0;
};

void extract_walk(const Node* node, TextBuilder& builder) {
    switch (node->type) {
    case Node::Type::Text:
        builder.add_text(node->text);
        break;
    case Node::Type::Raw:
        break;
    case Node::Type::Document:
        for (const auto& child : node->children)
            extract_walk(child.get(), builder);
        break;
    case Node::Type::Element: {
        if (raw_text_elements().count(node->tag))
            return;
        bool newline = newline_boundaries().count(node->tag) > 0;
        bool cell = node->tag == "td" || node->tag == "th";
        if (newline)
            builder.note_separator(2);
        else if (cell)
            builder.note_separator(1);
        for (const auto& child : node->children)
            extract_walk(child.get(), builder);
        if (newline)
            builder.note_separator(2);
        else if (cell)
            builder.note_separator(1);
        break;
    }
    }
}

std::string extract_from_node(const Node* node) {
    TextBuilder builder;
    extract_walk(node, builder);
    return builder.take();
}

// ===== partition helpers =====

bool compute_has_block(Node* node) {
    bool found = false;
    for (auto& child : node->children) {
        bool sub = compute_has_block(child.get());
        if (child->type == Node::Type::Element &&
            is_block_tag(child->tag))
            sub = true;
        found = found || sub;
    }
    node->has_block = found;
    return found;
}

const Node* find_body(const Node* node) {
    if (node->type == Node::Type::Element && node->tag == "body")
        return node;
    for (const auto& child : node->children) {
        if (const Node* hit = find_body(child.get()))
            return hit;
    }
    return nullptr;
}

bool direct_text_blank(const Node* node) {
    for (const auto& child : node->children) {
        if (child->type != Node::Type::Text)
            continue;
        std::string decoded = decode_entities(child->text);
        for (char c : decoded)
            if (!std::isspace(static_cast<unsigned char>(c)))
                return false;
    }
    return true;
}

bool has_block_child(const Node* node) {
    for (const auto& child : node->children)
        if (child->type == Node::Type::Element && is_block_tag(child->tag))
            return true;
    return false;
}

void collect_chunk_roots(const Node* parent, std::vector<const Node*>& out) {
    for (const auto& child : parent->children) {
        if (child->type != Node::Type::Element)
            continue;
        const std::string& tag = child->tag;
        if (leaf_blocks().count(tag)) {
            out.push_back(child.get());
        } else if (wrapper_blocks().count(tag)) {
            if (direct_text_blank(child.get()) && has_block_child(child.get()))
                collect_chunk_roots(child.get(), out);
            else
                out.push_back(child.get());
        } else if (child->has_block) {
            collect_chunk_roots(child.get(), out);
        }
    }
}

std::vector<int> locator_path(const Node* element) {
    std::vector<int> path;
    for (const Node* n = element; n && n->type == Node::Type::Element;
         n = n->parent)
        path.push_back(n->ordinal);
    std::reverse(path.begin(), path.end());
    return path;
}

constexpr std::size_t kMinChunkChars = 200;

} // namespace

std::string normalize(const std::string& html) {
    auto doc = parse(html);
    return serialize(doc.get());
}

std::string extract_text(const std::string& html) {
    auto doc = parse(html);
    return extract_from_node(doc.get());
}

ChunkMap partition(const std::string& html) {
    auto doc = parse(html);
    ChunkMap map;
    map.source = serialize(doc.get()); // records element offsets
    map.source_hash = fnv1a64_hex(map.source);
    compute_has_block(doc.get());

    const Node* scope = find_body(doc.get());
    if (!scope)
        scope = doc.get();

    std::vector<const Node*> roots;
    collect_chunk_roots(scope, roots);
    if (roots.empty())
        return map;

    std::vector<std::size_t> root_len(roots.size());
    for (std::size_t i = 0; i < roots.size(); ++i)
        root_len[i] = extract_from_node(roots[i]).size();

    // Forward merge: an undersized chunk absorbs following sibling chunks
    // until the group reaches the minimum or the parent changes.
    std::size_t i = 0;
    int index = 0;
    while (i < roots.size()) {
        std::size_t first = i;
        std::size_t total = root_len[i];
        while (total < kMinChunkChars && i + 1 < roots.size() &&
               roots[i + 1]->parent == roots[first]->parent) {
            ++i;
            total += root_len[i];
        }
        const Node* first_el = roots[first];
        const Node* last_el = roots[i];

        Chunk chunk;
        chunk.index = index++;
        chunk.locator = locator_path(first_el);
        chunk.span = last_el->ordinal - first_el->ordinal + 1;
        chunk.begin = first_el->begin;
        chunk.end = last_el->end;
        chunk.html = map.source.substr(chunk.begin, chunk.end - chunk.begin);
        chunk.text_len = extract_text(chunk.html).size();
        map.chunks.push_back(std::move(chunk));
        ++i;
    }
    return map;
}

std::string apply_edits(const std::string& html, const ChunkMap& map,
                        const std::vector<ChunkEdit>& edits) {
    std::string normalized = normalize(html);
    if (normalized != map.source)
        raise(ErrorKind::StaleMap,
              "chunk map does not describe this document (source hash " +
                  map.source_hash + ")");

    std::vector<const ChunkEdit*> slot(map.chunks.size(), nullptr);
    for (const ChunkEdit& edit : edits) {
        if (edit.chunk_index < 0 ||
            static_cast<std::size_t>(edit.chunk_index) >= map.chunks.size())
            raise(ErrorKind::Range,
                  "edit targets chunk " + std::to_string(edit.chunk_index) +
                      " but the map has " + std::to_string(map.chunks.size()) +
                      " chunks");
        auto& entry = slot[static_cast<std::size_t>(edit.chunk_index)];
        if (entry)
            raise(ErrorKind::Conflict,
                  "two edits target chunk " + std::to_string(edit.chunk_index));
        entry = &edit;
    }

    std::string out;
    out.reserve(normalized.size());
    std::size_t cursor = 0;
    for (std::size_t c = 0; c < map.chunks.size(); ++c) {
        const Chunk& chunk = map.chunks[c];
        out += normalized.substr(cursor, chunk.begin - cursor);
        if (slot[c])
            out += slot[c]->new_html;
        else
            out += normalized.substr(chunk.begin, chunk.end - chunk.begin);
        cursor = chunk.end;
    }
    out += normalized.substr(cursor);
    return out;
}

std::string render_indexed(const ChunkMap& map) {
    std::string out;
    for (const Chunk& chunk : map.chunks) {
        if (!out.empty())
            out += "\n\n";
        out += "[CHUNK " + std::to_string(chunk.index) + "]\n";
        out += extract_text(chunk.html);
    }
    return out;
}

// ===== SurrogateDoc =====

SurrogateDoc::SurrogateDoc(const ChunkMap& map) {
    std::size_t cursor = 0;
    for (const Chunk& chunk : map.chunks) {
        gaps_.push_back(map.source.substr(cursor, chunk.begin - cursor));
        fragments_.push_back(chunk.html);
        cursor = chunk.end;
    }
    gaps_.push_back(map.source.substr(cursor));
    touched_.assign(fragments_.size(), false);
}

const std::string& SurrogateDoc::fragment(int chunk_index) const {
    if (chunk_index < 0 ||
        static_cast<std::size_t>(chunk_index) >= fragments_.size())
        raise(ErrorKind::Range,
              "chunk " + std::to_string(chunk_index) + " outside frozen space");
    return fragments_[static_cast<std::size_t>(chunk_index)];
}

void SurrogateDoc::replace(int chunk_index, std::string fragment_html) {
    if (chunk_index < 0 ||
        static_cast<std::size_t>(chunk_index) >= fragments_.size())
        raise(ErrorKind::Range,
              "chunk " + std::to_string(chunk_index) + " outside frozen space");
    fragments_[static_cast<std::size_t>(chunk_index)] = std::move(fragment_html);
    touched_[static_cast<std::size_t>(chunk_index)] = true;
}

bool SurrogateDoc::modified(int chunk_index) const {
    if (chunk_index < 0 ||
        static_cast<std::size_t>(chunk_index) >= touched_.size())
        return false;
    return touched_[static_cast<std::size_t>(chunk_index)];
}

std::string SurrogateDoc::html() const {
    if (gaps_.empty())
        return {};
    std::string out;
    for (std::size_t i = 0; i < fragments_.size(); ++i) {
        out += gaps_[i];
        out += fragments_[i];
    }
    out += gaps_.back();
    return out;
}

std::string SurrogateDoc::render_indexed() const {
    std::string out;
    for (std::size_t i = 0; i < fragments_.size(); ++i) {
        if (!out.empty())
            out += "\n\n";
        out += "[CHUNK " + std::to_string(i) + "]\n";
        out += extract_text(fragments_[i]);
    }
    return out;
}

} // namespace agentgeo::chunker
