#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "fifa/chat.hpp"
#include "fifa/fict.hpp"
#include "fifa/narrative.hpp"
#include "fifa/prompts.hpp"
#include "fifa/rng.hpp"

using namespace fifa;

namespace {

ConceptTree tiny_tree() {
    return load_manifest(R"JSON({
      "root": "whole_facial_image",
      "nodes": [
        {"id": "whole_facial_image", "name": "whole facial image", "level": 1,
         "kind": "parent", "children": ["nose", "neck", "left_eyebrow"]},
        {"id": "nose", "name": "nose", "level": 2, "kind": "atomic",
         "geometry_rule": "nose"},
        {"id": "neck", "name": "neck", "level": 2, "kind": "atomic",
         "geometry_rule": "neck"},
        {"id": "left_eyebrow", "name": "left eyebrow", "level": 2,
         "kind": "atomic", "geometry_rule": "left_eyebrow"}
      ]
    })JSON");
}

std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("fifa_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Transport stub that replays a scripted status sequence.
class ScriptedTransport : public ChatTransport {
  public:
    explicit ScriptedTransport(std::vector<HttpResponse> script)
        : script_(std::move(script)) {}
    HttpResponse post(const std::string&, const std::string&,
                      const std::string&) override {
        REQUIRE(calls_ < script_.size());
        return script_[calls_++];
    }
    size_t calls() const { return calls_; }

  private:
    std::vector<HttpResponse> script_;
    size_t calls_ = 0;
};

std::string ok_body(const std::string& content) {
    nlohmann::json j = {
        {"choices",
         nlohmann::json::array(
             {{{"message", {{"role", "assistant"}, {"content", content}}}}})}};
    return j.dump();
}

// The appendix-style worked example the summary parser must accept.
const std::string kExampleSummary =
    "The <0> left side of the chin </0> reveals an unnaturally uniform skin "
    "texture, while the <1> right chin area </1> exhibits disproportionate "
    "shadowing that contradicts expected lighting. The <2> chin's edges </2> "
    "display subtle distortions, indicating possible digital manipulation. "
    "Additionally, the <3> left nasolabial fold </3> appears overly smoothed, "
    "lacking natural depth, whereas the <4> right nasolabial region </4> fails "
    "to show proper shading and depth variation.";

}  // namespace

TEST_CASE("prompt templates are pinned by hash") {
    // Changing a template silently changes the generated data distribution, so
    // any edit must show up here as a deliberate hash update.
    CHECK(sha256_hex(kStep3PromptTemplate) ==
          "4860e1a1c05defb16d7a21bbd4bccde36ad3925c33f508740b6068d0b7316322");
    CHECK(sha256_hex(kStep4PromptTemplate) ==
          "2a5f30aab9c3dc16b4f280cc7a36b9b58ff2347193a6d27611518d0fd2deb996");
}

TEST_CASE("step-3 prompt substitutes only the concept list") {
    std::string p = build_step3_prompt({"nose", "neck"});
    CHECK(p.find("All the following areas MUST be discussed:\nnose\nneck\n"
                 "Please analyze each area in one sentence.") !=
          std::string::npos);
    CHECK(p.find(kStep3Placeholder) == std::string::npos);
    // byte-identical to the template outside the substitution point
    size_t at = kStep3PromptTemplate.find(kStep3Placeholder);
    CHECK(p.substr(0, at) == kStep3PromptTemplate.substr(0, at));
    CHECK(p.substr(at + 9) ==
          kStep3PromptTemplate.substr(at + kStep3Placeholder.size()));
    CHECK_THROWS_AS(build_step3_prompt({}), Error);
}

TEST_CASE("step-4 prompt lays out description and index blocks") {
    std::vector<AtomicExplanation> ex = {
        {"nose", "nose", "The nose looks blurred."},
        {"neck", "neck", "The neck tone is off."}};
    std::string p = build_step4_prompt(ex);
    CHECK(p.find("Input: Descriptions\n"
                 "nose: The nose looks blurred.\n"
                 "neck: The neck tone is off.\n"
                 "Index Numbers\n"
                 "nose: 0\n"
                 "neck: 1\n") != std::string::npos);
    CHECK(p.find(kStep4Placeholder) == std::string::npos);
    // the worked example survives verbatim
    CHECK(p.find("nasolabial fold of left side: 3") != std::string::npos);
    CHECK_THROWS_AS(build_step4_prompt({}), Error);
}

TEST_CASE("step-3 replies parse by normalized concept name") {
    ConceptTree tree = tiny_tree();
    std::vector<ConceptId> expected = {"nose", "neck", "left_eyebrow"};
    std::string reply =
        "Nose: The nose shows heavy blending.\r\n"
        "some preamble without separator\n"
        "LEFT EYEBROW,: The left eyebrow is asymmetric.\n"
        "unknown area: ignored text.\n";
    Step3ParseResult r = parse_step3(reply, expected, tree);
    REQUIRE(r.explanations.size() == 2);
    CHECK(r.explanations[0].concept_slug == "nose");
    CHECK(r.explanations[0].display_name == "nose");
    CHECK(r.explanations[0].text == "The nose shows heavy blending.");
    CHECK(r.explanations[1].concept_slug == "left_eyebrow");
    CHECK(r.missing == std::vector<ConceptId>{"neck"});

    CHECK_THROWS_AS(parse_step3("no separators here at all", expected, tree),
                    Error);
}

TEST_CASE("step-4 worked example parses into five ordered spans") {
    std::vector<ConceptId> order = {"c0", "c1", "c2", "c3", "c4"};
    AgeNarrative n = parse_step4(kExampleSummary, order);
    REQUIRE(n.grounded_order ==
            std::vector<ConceptId>{"c0", "c1", "c2", "c3", "c4"});
    const auto& first = std::get<GroundedSpan>(n.segments[1]);
    CHECK(first.phrase == "left side of the chin");
    CHECK(first.concept_id == "c0");
    CHECK(n.plain_text().find('<') == std::string::npos);
    // plain text reconstruction keeps everything except the markers
    CHECK(n.plain_text().substr(0, 26) == "The left side of the chin ");
}

TEST_CASE("step-4 parser error cases") {
    std::vector<ConceptId> order = {"a", "b"};
    auto expect_code = [&](const std::string& reply, const std::string& code) {
        try {
            parse_step4(reply, order);
            FAIL_CHECK("expected " << code << " for: " << reply);
        } catch (const Error& e) {
            CHECK(e.code() == code);
        }
    };
    expect_code("The <7> nose </7> is odd.", "UnknownIndex");
    expect_code("The <0> nose is odd.", "UnbalancedMarkers");
    expect_code("The <0> </0> is empty.", "UnbalancedMarkers");
    expect_code("Stray closer </0> here with <1> span </1>.", "UnbalancedMarkers");
    expect_code("No spans at all.", "UnbalancedMarkers");
    expect_code("Nested <0> outer <1> inner </0> end.", "UnbalancedMarkers");
    // literal '<' that is not a marker is plain text
    AgeNarrative ok = parse_step4("a < b, and <0> nose </0>.", order);
    CHECK(ok.grounded_order == std::vector<ConceptId>{"a"});
}

TEST_CASE("interleaved answers pair every [SEG] with a mask") {
    std::vector<ConceptId> order = {"nose", "neck"};
    AgeNarrative n =
        parse_step4("The <0> nose </0> is blurred near the <1> neck </1>.", order);
    BitMask nose(4, 4), neck(4, 4);
    nose.set(0, 0);
    neck.set(3, 3);
    InterleavedAnswer a = to_interleaved(n, {{"nose", nose}, {"neck", neck}});
    CHECK(a.text ==
          "The <p>nose</p> [SEG] is blurred near the <p>neck</p> [SEG].");
    REQUIRE(a.masks.size() == 2);
    CHECK(count_occurrences(a.text, "[SEG]") == a.masks.size());
    CHECK(rle_decode(a.masks[0]) == nose);
    CHECK(rle_decode(a.masks[1]) == neck);
    CHECK(a.concepts == order);
    CHECK_THROWS_AS(to_interleaved(n, {{"nose", nose}}), Error);
}

TEST_CASE("marker scanner matches a naive re-parse on fuzzed summaries") {
    std::vector<ConceptId> order = {"a", "b", "c"};
    SplitMix64 rng(606);
    const std::vector<std::string> pieces = {
        "text ", "more words ", "<0> alpha </0>", "<1> beta span </1>",
        "<2> gamma </2>", ", ", ". "};
    for (int it = 0; it < 200; ++it) {
        std::string s;
        int n = 1 + static_cast<int>(rng.below(6));
        bool has_span = false;
        for (int i = 0; i < n; ++i) {
            const std::string& p = pieces[rng.below(pieces.size())];
            has_span = has_span || p.front() == '<';
            s += p;
        }
        if (!has_span) {
            CHECK_THROWS_AS(parse_step4(s, order), Error);
            continue;
        }
        AgeNarrative got = parse_step4(s, order);
        // oracle: counting occurrences of each literal marker pair
        size_t want_spans = count_occurrences(s, "</");
        REQUIRE(got.grounded_order.size() == want_spans);
        // reconstruction drops exactly the marker syntax
        std::string flat = s;
        for (const std::string& tag :
             {std::string("<0> "), std::string(" </0>"), std::string("<1> "),
              std::string(" </1>"), std::string("<2> "), std::string(" </2>")}) {
            size_t pos;
            while ((pos = flat.find(tag)) != std::string::npos)
                flat.erase(pos, tag.size());
        }
        REQUIRE(got.plain_text() == flat);
    }
}

TEST_CASE("mock backend is deterministic and shaped for the parsers") {
    ConceptTree tree = tiny_tree();
    std::vector<ConceptId> expected = {"nose", "neck", "left_eyebrow"};
    std::vector<std::string> names = {"nose", "neck", "left eyebrow"};
    std::string p3 = build_step3_prompt(names);
    std::string r1 = mock_chat_reply(p3);
    CHECK(r1 == mock_chat_reply(p3));
    Step3ParseResult parsed = parse_step3(r1, expected, tree);
    CHECK(parsed.missing.empty());
    REQUIRE(parsed.explanations.size() == 3);

    std::string p4 = build_step4_prompt(parsed.explanations);
    std::string r2 = mock_chat_reply(p4);
    AgeNarrative n = parse_step4(r2, expected);
    CHECK(n.grounded_order == expected);
}

TEST_CASE("chat cache prevents repeat traffic and keys on the full request") {
    auto dir = fresh_dir("chat_cache");
    ChatConfig cfg;
    cfg.cache_dir = (dir / "cache").string();
    ChatClient client(cfg);
    ChatRequest req{build_step3_prompt({"nose"}), {"\x89PNG fake bytes"}};
    std::string a = client.chat(req);
    // cache file exists under the body hash
    auto path = dir / "cache" / (client.cache_key(req) + ".json");
    REQUIRE(std::filesystem::exists(path));
    CHECK(client.chat(req) == a);
    // different attachment, different key
    ChatRequest other = req;
    other.png_images.push_back("more");
    CHECK(client.cache_key(other) != client.cache_key(req));

    // replay: cached request succeeds with zero network calls, anything else
    // is a hard miss
    ChatConfig replay_cfg = cfg;
    replay_cfg.mode = ChatMode::Replay;
    ChatClient replay(replay_cfg);
    CHECK(replay.chat(req) == a);
    CHECK(replay.network_calls() == 0);
    try {
        replay.chat(other);
        FAIL("expected CacheMiss");
    } catch (const Error& e) {
        CHECK(e.code() == "CacheMiss");
    }
}

TEST_CASE("live mode retries rate limits with exponential backoff") {
    auto dir = fresh_dir("chat_retry");
    setenv("FIFA_API_KEY", "test-key", 1);
    ChatConfig cfg;
    cfg.mode = ChatMode::Live;
    cfg.cache_dir = (dir / "cache").string();
    auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{
        {429, "slow down"}, {500, "boom"}, {200, ok_body("final answer")}});
    ChatClient client(cfg, transport);
    std::vector<int> sleeps;
    client.set_sleep_fn([&](int ms) { sleeps.push_back(ms); });
    CHECK(client.chat({"prompt", {}}) == "final answer");
    CHECK(client.network_calls() == 3);
    CHECK(sleeps == std::vector<int>{250, 500});
    // second call hits the cache, not the transport
    CHECK(client.chat({"prompt", {}}) == "final answer");
    CHECK(transport->calls() == 3);
}

TEST_CASE("live mode surfaces auth and protocol failures") {
    auto dir = fresh_dir("chat_auth");
    ChatConfig cfg;
    cfg.mode = ChatMode::Live;
    cfg.cache_dir = (dir / "cache").string();
    cfg.api_key_env = "FIFA_TEST_MISSING_KEY";
    unsetenv("FIFA_TEST_MISSING_KEY");
    ChatClient no_key(cfg, std::make_shared<ScriptedTransport>(
                               std::vector<HttpResponse>{}));
    try {
        no_key.chat({"p", {}});
        FAIL("expected AuthFailure");
    } catch (const Error& e) {
        CHECK(e.code() == "AuthFailure");
    }

    setenv("FIFA_TEST_MISSING_KEY", "k", 1);
    auto check_error = [&](HttpResponse resp, const std::string& code,
                           const std::string& prompt) {
        ChatClient c(cfg, std::make_shared<ScriptedTransport>(
                              std::vector<HttpResponse>{resp}));
        c.set_sleep_fn([](int) {});
        try {
            c.chat({prompt, {}});
            FAIL_CHECK("expected " << code);
        } catch (const Error& e) {
            CHECK(e.code() == code);
        }
    };
    check_error({401, "no"}, "AuthFailure", "p1");
    check_error({200, "not json"}, "MalformedResponse", "p2");
    check_error({200, R"({"choices": []})"}, "MalformedResponse", "p3");
    check_error({418, "teapot"}, "HttpError", "p4");

    // exhausted retries on persistent 429
    ChatConfig limited = cfg;
    limited.max_retries = 2;
    ChatClient c(limited, std::make_shared<ScriptedTransport>(
                              std::vector<HttpResponse>{
                                  {429, ""}, {429, ""}, {429, ""}}));
    c.set_sleep_fn([](int) {});
    try {
        c.chat({"p5", {}});
        FAIL("expected RateLimited");
    } catch (const Error& e) {
        CHECK(e.code() == "RateLimited");
    }
    CHECK(c.network_calls() == 3);
}

TEST_CASE("no transport in live mode is an explicit error") {
    ChatConfig cfg;
    cfg.mode = ChatMode::Live;
    cfg.cache_dir =
        (fresh_dir("chat_no_transport") / "cache").string();
    ChatClient c(cfg);
    try {
        c.chat({"p", {}});
        FAIL("expected NoTransport");
    } catch (const Error& e) {
        CHECK(e.code() == "NoTransport");
    }
}

TEST_CASE("normalize_name collapses case and punctuation") {
    CHECK(normalize_name("Left  Eyebrow,") == "left eyebrow");
    CHECK(normalize_name("[nose]") == "nose");
    CHECK(normalize_name("  ") == "");
}
