#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace agentgeo::chunker {

// One addressable slice of a document. A chunk usually wraps a single block
// element; undersized blocks are merged forward with following siblings, in
// which case `span` covers more than one element. `begin`/`end` are byte
// offsets into the normalized serialization the map was computed from.
struct Chunk {
    int index = 0;
    std::vector<int> locator; // child-element ordinals from the document root
    int span = 1;             // sibling elements covered by the fragment
    std::string html;         // normalized fragment bytes
    std::size_t text_len = 0; // visible characters in the fragment
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct ChunkMap {
    std::string source_hash;   // digest of the normalized source bytes
    std::string source;        // normalized source the offsets refer to
    std::vector<Chunk> chunks; // contiguous indices starting at 0
};

struct ChunkEdit {
    int chunk_index = 0;
    std::string new_html;
};

// Parses tolerantly (auto-closing unclosed tags, ignoring stray closers) and
// reserializes. The result is the canonical byte form all chunk offsets and
// identity guarantees are stated against; normalize(normalize(h)) ==
// normalize(h). Raises Parse for byte streams that are not text at all
// (embedded NUL or invalid UTF-8).
std::string normalize(const std::string& html);

// Splits the body into chunks at block-level boundaries: p, div, section,
// article, aside, header, footer, nav, h1-h6, ul, ol, table, pre and
// blockquote. div/section/article wrappers holding only block children are
// descended into. A chunk with fewer than 200 visible characters merges
// forward into its following sibling chunk. No body content yields an empty
// map, not an error.
ChunkMap partition(const std::string& html);

// Splices replacement fragments into the document at the byte ranges the map
// recorded. Bytes outside the edited ranges are preserved exactly. Raises
// StaleMap when the map does not describe `html`, Range for an unknown chunk
// index, Conflict when two edits target the same chunk. An empty edit list
// returns the normalized input.
std::string apply_edits(const std::string& html, const ChunkMap& map,
                        const std::vector<ChunkEdit>& edits);

// Text rendering for prompt embedding: each chunk's visible text preceded by
// a "[CHUNK i]" marker line, blocks separated by blank lines.
std::string render_indexed(const ChunkMap& map);

// Plain-text extraction: script/style content dropped, entities decoded,
// whitespace runs collapsed to single spaces, block boundaries rendered as
// newlines.
std::string extract_text(const std::string& html);

// A working copy of a document addressed in a frozen chunk index space.
// Fragments can be swapped by original index no matter how many rewrites the
// copy has seen; the surrounding markup never moves.
class SurrogateDoc {
public:
    SurrogateDoc() = default;
    SurrogateDoc(const ChunkMap& map);

    std::size_t chunk_count() const { return fragments_.size(); }
    const std::string& fragment(int chunk_index) const;
    void replace(int chunk_index, std::string fragment_html);
    bool modified(int chunk_index) const;

    std::string html() const;           // reassembled document
    std::string render_indexed() const; // [CHUNK i] over current fragments

private:
    std::vector<std::string> gaps_;      // size fragments_ + 1
    std::vector<std::string> fragments_; // frozen index -> current bytes
    std::vector<bool> touched_;
};

} // namespace agentgeo::chunker
