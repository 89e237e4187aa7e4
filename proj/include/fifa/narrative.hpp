#pragma once

#include <cctype>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "fifa/error.hpp"
#include "fifa/fict.hpp"
#include "fifa/mask.hpp"
#include "fifa/prompts.hpp"

namespace fifa {

// Lowercase, punctuation dropped, whitespace collapsed — so "Left Eyebrow,"
// and "left eyebrow" match the same concept name.
inline std::string normalize_name(const std::string& s) {
    std::string out;
    bool pending_space = false;
    for (char ch : s) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else {
            pending_space = true;
        }
    }
    return out;
}

struct Step3ParseResult {
    std::vector<AtomicExplanation> explanations;  // in expected-concept order
    std::vector<ConceptId> missing;               // expected but not answered
};

// Parse "name: description" lines from a step-3 reply against the list of
// concepts that were asked about. Unanswered concepts are reported, not
// fatal — the caller decides whether to re-prompt or drop the sample.
inline Step3ParseResult parse_step3(const std::string& reply,
                                    const std::vector<ConceptId>& expected,
                                    const ConceptTree& tree) {
    std::map<std::string, ConceptId> by_norm;
    for (const auto& id : expected)
        by_norm[normalize_name(tree.node(id).display_name)] = id;

    std::map<ConceptId, std::string> answers;
    std::istringstream in(reply);
    std::string line;
    size_t parsable = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t sep = line.find(": ");
        if (sep == std::string::npos || sep == 0) continue;
        ++parsable;
        std::string name = line.substr(0, sep);
        // Tolerate list bullets and bracketed area names.
        auto it = by_norm.find(normalize_name(name));
        if (it == by_norm.end()) continue;
        std::string text = line.substr(sep + 2);
        while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front())))
            text.erase(text.begin());
        if (text.empty()) continue;
        answers[it->second] = text;
    }
    if (parsable == 0)
        throw make_error("NoParsableLines", "no 'area: description' lines found");

    Step3ParseResult result;
    for (const auto& id : expected) {
        auto it = answers.find(id);
        if (it == answers.end()) {
            result.missing.push_back(id);
            continue;
        }
        result.explanations.push_back(
            {id, tree.node(id).display_name, it->second});
    }
    return result;
}

// A grounded narrative is plain text interleaved with spans tied to concepts.
struct PlainText {
    std::string text;
};
struct GroundedSpan {
    std::string phrase;
    ConceptId concept_id;
};
using NarrativeSegment = std::variant<PlainText, GroundedSpan>;

struct AgeNarrative {
    std::vector<NarrativeSegment> segments;
    std::vector<ConceptId> grounded_order;  // concepts in span order

    std::string plain_text() const {
        std::string out;
        for (const auto& seg : segments) {
            if (const auto* p = std::get_if<PlainText>(&seg)) out += p->text;
            else out += std::get<GroundedSpan>(seg).phrase;
        }
        return out;
    }
};

// Parse a step-4 summary: "<k> phrase </k>" spans, k indexing into
// `index_to_concept` (the order the explanations were sent in). Markers must
// be balanced and flat; a malformed summary rejects the whole sample.
inline AgeNarrative parse_step4(const std::string& reply,
                                const std::vector<ConceptId>& index_to_concept) {
    AgeNarrative out;
    size_t pos = 0;
    std::string plain;
    auto flush_plain = [&] {
        if (!plain.empty()) {
            out.segments.push_back(PlainText{plain});
            plain.clear();
        }
    };
    while (pos < reply.size()) {
        if (reply[pos] != '<') {
            plain.push_back(reply[pos++]);
            continue;
        }
        size_t close = reply.find('>', pos);
        size_t digits_end = pos + 1;
        while (digits_end < reply.size() &&
               std::isdigit(static_cast<unsigned char>(reply[digits_end])))
            ++digits_end;
        if (close == std::string::npos || digits_end == pos + 1 ||
            digits_end != close) {
            // '<' not starting a numeric marker: literal text.
            plain.push_back(reply[pos++]);
            continue;
        }
        const std::string num = reply.substr(pos + 1, close - pos - 1);
        size_t k = std::stoul(num);
        if (k >= index_to_concept.size())
            throw make_error("UnknownIndex", "marker index " + num +
                                                 " out of range");
        const std::string end_tag = "</" + num + ">";
        size_t end = reply.find(end_tag, close + 1);
        if (end == std::string::npos)
            throw make_error("UnbalancedMarkers", "no closing tag for <" + num + ">");
        std::string phrase = reply.substr(close + 1, end - close - 1);
        if (phrase.find('<') != std::string::npos &&
            phrase.find("</") == std::string::npos) {
            // nested opener inside the span
            size_t nested = phrase.find('<');
            if (nested + 1 < phrase.size() &&
                std::isdigit(static_cast<unsigned char>(phrase[nested + 1])))
                throw make_error("UnbalancedMarkers", "nested marker in span");
        }
        // trim the span to its visible phrase
        size_t b = phrase.find_first_not_of(" \t");
        size_t e = phrase.find_last_not_of(" \t");
        if (b == std::string::npos)
            throw make_error("UnbalancedMarkers", "empty span for <" + num + ">");
        flush_plain();
        out.segments.push_back(
            GroundedSpan{phrase.substr(b, e - b + 1), index_to_concept[k]});
        out.grounded_order.push_back(index_to_concept[k]);
        pos = end + end_tag.size();
    }
    // A stray closing tag left in plain text means the markers were unbalanced.
    flush_plain();
    for (const auto& seg : out.segments)
        if (const auto* p = std::get_if<PlainText>(&seg))
            if (p->text.find("</") != std::string::npos)
                throw make_error("UnbalancedMarkers", "closing tag without opener");
    if (out.grounded_order.empty())
        throw make_error("UnbalancedMarkers", "summary contains no grounded spans");
    return out;
}

struct InterleavedAnswer {
    std::string text;                 // "... <p>phrase</p> [SEG] ..."
    std::vector<RleMask> masks;       // one per [SEG], in text order
    std::vector<ConceptId> concepts;  // parallel to masks
};

// Render the grounding-aware answer format: each grounded span becomes
// "<p>phrase</p> [SEG]" and contributes one run-length mask, so
// count("[SEG]") always equals masks.size().
inline InterleavedAnswer to_interleaved(
    const AgeNarrative& narrative,
    const std::map<ConceptId, BitMask>& concept_masks) {
    InterleavedAnswer out;
    for (const auto& seg : narrative.segments) {
        if (const auto* p = std::get_if<PlainText>(&seg)) {
            out.text += p->text;
            continue;
        }
        const auto& span = std::get<GroundedSpan>(seg);
        auto it = concept_masks.find(span.concept_id);
        if (it == concept_masks.end())
            throw make_error("MissingMask", "no mask for " + span.concept_id);
        out.text += "<p>" + span.phrase + "</p> [SEG]";
        out.masks.push_back(rle_encode(it->second));
        out.concepts.push_back(span.concept_id);
    }
    return out;
}

inline size_t count_occurrences(const std::string& haystack,
                                const std::string& needle) {
    size_t n = 0, pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

}  // namespace fifa
