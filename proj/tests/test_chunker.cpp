#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "agentgeo/chunker.hpp"
#include "agentgeo/error.hpp"

#include "support/helpers.hpp"

using namespace agentgeo;
using chunker::ChunkEdit;
using chunker::ChunkMap;

namespace {

// Deterministic well-formed documents covering the supported block kinds,
// wrapper nesting, and the undersized-merge path.
std::string random_document(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> block_count(1, 6);
    std::uniform_int_distribution<int> kind(0, 6);
    std::uniform_int_distribution<int> small_words(1, 8);
    std::uniform_int_distribution<int> big_words(40, 70);

    std::string body;
    const int blocks = block_count(rng);
    for (int b = 0; b < blocks; ++b) {
        switch (kind(rng)) {
        case 0:
            body += "<p>" + testsupport::words(rng, small_words(rng)) + "</p>";
            break;
        case 1:
            body += "<p>" + testsupport::words(rng, big_words(rng)) + "</p>";
            break;
        case 2:
            body += "<h2>" + testsupport::words(rng, small_words(rng)) +
                    "</h2>";
            break;
        case 3:
            body += "<ul><li>" + testsupport::words(rng, big_words(rng)) +
                    "</li><li>" + testsupport::words(rng, small_words(rng)) +
                    "</li></ul>";
            break;
        case 4:
            body += "<pre>" + testsupport::words(rng, big_words(rng)) +
                    "</pre>";
            break;
        case 5:
            body += "<blockquote>" + testsupport::words(rng, big_words(rng)) +
                    "</blockquote>";
            break;
        default:
            body += "<div><p>" + testsupport::words(rng, big_words(rng)) +
                    "</p><p>" + testsupport::words(rng, big_words(rng)) +
                    "</p></div>";
            break;
        }
    }
    return "<html><head><title>t</title></head><body>" + body +
           "</body></html>";
}

std::string splice(const std::string& source, const chunker::Chunk& chunk,
                   const std::string& replacement) {
    return source.substr(0, chunk.begin) + replacement +
           source.substr(chunk.end);
}

} // namespace

TEST_CASE("normalize is idempotent and apply_edits([]) is the identity") {
    std::mt19937_64 rng(20260815);
    for (int doc = 0; doc < 120; ++doc) {
        const std::string html = random_document(rng);
        const std::string once = chunker::normalize(html);
        CHECK(chunker::normalize(once) == once);

        const ChunkMap map = chunker::partition(html);
        CHECK(map.source == once);
        CHECK(chunker::apply_edits(html, map, {}) == once);
        CHECK(chunker::SurrogateDoc(map).html() == once);
    }
}

TEST_CASE("chunk offsets slice the normalized source exactly") {
    std::mt19937_64 rng(77);
    for (int doc = 0; doc < 120; ++doc) {
        const ChunkMap map = chunker::partition(random_document(rng));
        std::size_t previous_end = 0;
        for (std::size_t i = 0; i < map.chunks.size(); ++i) {
            const auto& chunk = map.chunks[i];
            CHECK(chunk.index == static_cast<int>(i));
            CHECK(chunk.begin >= previous_end);
            CHECK(chunk.end > chunk.begin);
            CHECK(map.source.substr(chunk.begin, chunk.end - chunk.begin) ==
                  chunk.html);
            CHECK(chunk.span >= 1);
            previous_end = chunk.end;
        }
    }
}

TEST_CASE("editing one chunk leaves every other chunk byte-identical") {
    std::mt19937_64 rng(4242);
    int fixtures = 0;
    while (fixtures < 110) {
        const std::string html = random_document(rng);
        const ChunkMap map = chunker::partition(html);
        if (map.chunks.empty()) continue;
        ++fixtures;
        for (const auto& chunk : map.chunks) {
            const std::string replacement =
                "<p>replacement " + std::to_string(chunk.index) + "</p>";
            const std::string edited =
                chunker::apply_edits(html, map, {{chunk.index, replacement}});
            CHECK(edited == splice(map.source, chunk, replacement));
            for (const auto& other : map.chunks) {
                if (other.index == chunk.index) continue;
                CHECK(edited.find(other.html) != std::string::npos);
            }
        }
    }
    CHECK(fixtures >= 100);
}

TEST_CASE("multiple edits in one pass land independently and unordered") {
    const std::string html = "<html><body>" + testsupport::big_para("first") +
                             testsupport::big_para("second") +
                             testsupport::big_para("third") +
                             "</body></html>";
    const ChunkMap map = chunker::partition(html);
    REQUIRE(map.chunks.size() == 3);

    const std::vector<ChunkEdit> forward = {{0, "<p>zero</p>"},
                                            {2, "<p>two</p>"}};
    const std::vector<ChunkEdit> backward = {{2, "<p>two</p>"},
                                             {0, "<p>zero</p>"}};
    const std::string a = chunker::apply_edits(html, map, forward);
    const std::string b = chunker::apply_edits(html, map, backward);
    CHECK(a == b);
    CHECK(a.find("<p>zero</p>") != std::string::npos);
    CHECK(a.find("<p>two</p>") != std::string::npos);
    CHECK(a.find(map.chunks[1].html) != std::string::npos);
    CHECK(a.find("first") == std::string::npos);
}

TEST_CASE("undersized blocks merge forward; a small tail stands alone") {
    const std::string big(250, 'x');
    const ChunkMap merged = chunker::partition(
        "<html><body><p>tiny</p><p>" + big + "</p></body></html>");
    REQUIRE(merged.chunks.size() == 1);
    CHECK(merged.chunks[0].span == 2);
    CHECK(merged.chunks[0].text_len >= 250);

    const ChunkMap tail = chunker::partition(
        "<html><body><p>" + big + "</p><p>tiny</p></body></html>");
    REQUIRE(tail.chunks.size() == 2);
    CHECK(tail.chunks[1].html == "<p>tiny</p>");

    const ChunkMap smalls = chunker::partition(
        "<html><body><p>a</p><p>b</p><p>c</p></body></html>");
    REQUIRE(smalls.chunks.size() == 1);
    CHECK(smalls.chunks[0].span == 3);
}

TEST_CASE("block wrappers holding only blocks are descended into") {
    const std::string big(250, 'y');
    const ChunkMap map = chunker::partition("<html><body><div><p>" + big +
                                            "</p><p>" + big +
                                            "</p></div></body></html>");
    CHECK(map.chunks.size() == 2);
}

TEST_CASE("a document without body content partitions to an empty map") {
    CHECK(chunker::partition("<html><body></body></html>").chunks.empty());
    CHECK(chunker::partition("").chunks.empty());
}

TEST_CASE("apply_edits rejects stale maps, bad indices and double edits") {
    const std::string html = "<html><body>" + testsupport::big_para("one") +
                             testsupport::big_para("two") + "</body></html>";
    const ChunkMap map = chunker::partition(html);

    CHECK_THROWS_WITH_AS(
        chunker::apply_edits(html + "<p>drift</p>", map, {}), // stale source
        doctest::Contains("map"), Error);
    try {
        chunker::apply_edits(html + "<p>drift</p>", map, {});
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::StaleMap);
    }

    try {
        chunker::apply_edits(html, map, {{7, "<p>x</p>"}});
        FAIL("expected a range error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Range);
    }
    try {
        chunker::apply_edits(html, map, {{-1, "<p>x</p>"}});
        FAIL("expected a range error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Range);
    }
    try {
        chunker::apply_edits(html, map,
                             {{0, "<p>a</p>"}, {0, "<p>b</p>"}});
        FAIL("expected a conflict error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Conflict);
    }
}

TEST_CASE("byte streams that are not text raise a parse error") {
    try {
        chunker::normalize(std::string("<p>a\x00b</p>", 10));
        FAIL("expected a parse error for an embedded NUL");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
    }
    try {
        chunker::normalize("<p>bad \xFF\xFE utf</p>");
        FAIL("expected a parse error for invalid UTF-8");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
    }
}

TEST_CASE("tolerant parsing closes dangling tags and drops stray closers") {
    const std::string normalized =
        chunker::normalize("<html><body><p>open paragraph</body></html>");
    CHECK(chunker::normalize(normalized) == normalized);
    const std::string stray =
        chunker::normalize("<html><body></i><p>kept</p></body></html>");
    CHECK(stray.find("kept") != std::string::npos);
    CHECK(chunker::partition(stray).chunks.size() == 1);
}

TEST_CASE("extract_text decodes entities, drops scripts, collapses space") {
    const std::string text = chunker::extract_text(
        "<p>a &amp; b</p><script>var x = 1;</script><style>p{}</style>"
        "<p>c \n\t  d</p>");
    CHECK(text == "a & b\nc d");
    CHECK(chunker::extract_text("<p>&lt;tag&gt; &quot;q&quot;</p>") ==
          "<tag> \"q\"");
    CHECK(chunker::extract_text("").empty());
}

TEST_CASE("render_indexed labels every chunk in order") {
    const std::string html = "<html><body>" + testsupport::big_para("lead") +
                             testsupport::big_para("trail") + "</body></html>";
    const ChunkMap map = chunker::partition(html);
    const std::string rendered = chunker::render_indexed(map);
    CHECK(rendered.find("[CHUNK 0]") != std::string::npos);
    CHECK(rendered.find("[CHUNK 1]") != std::string::npos);
    CHECK(rendered.find("lead") != std::string::npos);
    CHECK(rendered.find("trail") != std::string::npos);
    CHECK(rendered.find("[CHUNK 0]") < rendered.find("[CHUNK 1]"));
}

TEST_CASE("surrogate docs swap fragments by frozen index") {
    const std::string html = "<html><body>" + testsupport::big_para("aaa") +
                             testsupport::big_para("bbb") +
                             testsupport::big_para("ccc") + "</body></html>";
    const ChunkMap map = chunker::partition(html);
    REQUIRE(map.chunks.size() == 3);
    chunker::SurrogateDoc surrogate(map);

    CHECK(surrogate.chunk_count() == 3);
    CHECK(surrogate.html() == map.source);
    CHECK_FALSE(surrogate.modified(1));

    surrogate.replace(1, "<p>middle rewrite</p>");
    CHECK(surrogate.modified(1));
    CHECK_FALSE(surrogate.modified(0));
    CHECK(surrogate.fragment(1) == "<p>middle rewrite</p>");
    CHECK(surrogate.fragment(0) == map.chunks[0].html);

    // Replacing again by the same frozen index still works even though the
    // document bytes have drifted from the original map.
    surrogate.replace(1, "<p>second rewrite</p>");
    surrogate.replace(2, "<p>tail rewrite</p>");
    const std::string result = surrogate.html();
    CHECK(result ==
          splice(splice(map.source, map.chunks[2], "<p>tail rewrite</p>"),
                 map.chunks[1], "<p>second rewrite</p>"));
    CHECK(surrogate.render_indexed().find("second rewrite") !=
          std::string::npos);

    try {
        surrogate.fragment(9);
        FAIL("expected a range error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Range);
    }
}
