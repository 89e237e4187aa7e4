// Acceptance gate: exercises the end-to-end guarantees the library makes, one
// pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fifa/artifact.hpp"
#include "fifa/chat.hpp"
#include "fifa/corpus.hpp"
#include "fifa/fict.hpp"
#include "fifa/geometry.hpp"
#include "fifa/metrics.hpp"
#include "fifa/kernels.hpp"
#include "fifa/narrative.hpp"
#include "fifa/pipeline.hpp"
#include "fifa/prompts.hpp"
#include "fifa/rng.hpp"

using namespace fifa;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool ok,
            const std::string& detail = "") {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << number << ": "
              << name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << "\n";
    if (!ok) ++g_failures;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw make_error("IoError", "cannot read " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("fifa_accept_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

LandmarkSet synthetic_landmarks(uint64_t seed, int w, int h) {
    SplitMix64 rng(seed);
    LandmarkSet lm;
    for (int i = 0; i < 478; ++i)
        lm.points.push_back({rng.unit() * (w - 1), rng.unit() * (h - 1)});
    return lm;
}

ParsingMap synthetic_parsing(uint64_t seed, int w, int h) {
    SplitMix64 rng(seed);
    ParsingMap pm;
    pm.width = w;
    pm.height = h;
    for (int i = 0; i < w * h; ++i)
        pm.labels.push_back(static_cast<int>(rng.below(19)));
    return pm;
}

// --- criterion 1: parent masks are bit-exact unions of atomic descendants ---

void criterion_union() {
    using clock = std::chrono::steady_clock;
    auto start = clock::now();
    ConceptTree tree = load_manifest(
        read_file(std::string(FIFA_ASSET_DIR) + "/fict_manifest.json"));
    GeometryRuleSet rules = load_rules(
        read_file(std::string(FIFA_ASSET_DIR) + "/geometry_rules.json"));
    bool ok = tree.atomic_count == 112 && tree.parent_count == 72;
    int fixtures = 0;
    for (uint64_t seed = 1; seed <= 20 && ok; ++seed) {
        const int w = 24 + static_cast<int>(seed % 5) * 8;
        const int h = 24 + static_cast<int>(seed % 3) * 8;
        LandmarkSet lm = synthetic_landmarks(seed, w, h);
        ParsingMap pm = synthetic_parsing(seed * 31, w, h);
        auto masks = all_region_masks(tree, rules, lm, pm);
        ok = ok && masks.size() == 184;
        ok = ok && masks.at(tree.root).area() == static_cast<long long>(w) * h;
        for (const auto& [id, node] : tree.nodes) {
            if (node.atomic || id == tree.root) continue;
            BitMask expect(w, h);
            for (const auto& leaf : atomic_descendants(tree, id))
                expect = set_op(expect, masks.at(leaf), SetOp::Union);
            if (!(masks.at(id) == expect)) {
                ok = false;
                break;
            }
        }
        ++fixtures;
    }
    double secs = std::chrono::duration<double>(clock::now() - start).count();
    ok = ok && fixtures == 20 && secs < 10.0;
    report(1, "parent masks equal atomic-descendant unions on 20 fixtures", ok,
           std::to_string(fixtures) + " fixtures in " + std::to_string(secs) +
               "s");
}

// --- criterion 2: top-fraction threshold with the keep-ties rule ------------

void criterion_threshold() {
    SplitMix64 rng(2024);
    bool ok = true;
    for (int it = 0; it < 1000 && ok; ++it) {
        int w = 2 + static_cast<int>(rng.below(30));
        int h = 2 + static_cast<int>(rng.below(30));
        GrayImage g(w, h);
        // small value alphabet so threshold ties are common
        for (auto& v : g.data) v = static_cast<double>(rng.below(8));
        BitMask m = threshold_top_fraction(g, 0.05);
        const size_t n = g.data.size();
        const size_t k = static_cast<size_t>(std::ceil(0.05 * double(n)));
        std::vector<double> sorted = g.data;
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        const double threshold = sorted[k - 1];
        ok = ok && m.area() >= static_cast<long long>(k);
        for (size_t i = 0; i < n && ok; ++i)
            ok = (m.at(i) != 0) == (g.data[i] >= threshold);
    }
    report(2, "artifact threshold keeps ceil(5% of pixels) plus ties", ok);
}

// --- criterion 3: concept selection matches a three-predicate oracle --------

void criterion_selection() {
    ConceptTree tree = load_manifest(
        read_file(std::string(FIFA_ASSET_DIR) + "/fict_manifest.json"));
    SelectionParams params;  // rank <= 50, coverage >= 0.10, pixels >= 50
    SplitMix64 rng(999);
    bool ok = true;
    for (int it = 0; it < 500 && ok; ++it) {
        std::vector<ConceptArtifactStats> stats;
        for (const auto& id : tree.order) {
            ConceptArtifactStats s;
            s.concept_id = id;
            s.atomic = tree.node(id).atomic;
            s.region_area = static_cast<long long>(rng.below(3000));
            if (s.region_area > 0) {
                s.artifact_pixels = static_cast<long long>(
                    rng.below(static_cast<uint64_t>(s.region_area) + 1));
                s.coverage_ratio =
                    double(s.artifact_pixels) / double(s.region_area);
            }
            stats.push_back(s);
        }
        for (size_t i = stats.size(); i > 1; --i)
            std::swap(stats[i - 1], stats[rng.below(i)]);
        SelectionResult res = select_artifact_concepts(stats, params, tree);

        std::vector<ConceptArtifactStats> eligible;
        for (const auto& s : stats)
            if (s.region_area > 0) eligible.push_back(s);
        std::sort(eligible.begin(), eligible.end(),
                  [](const auto& a, const auto& b) {
                      if (a.coverage_ratio != b.coverage_ratio)
                          return a.coverage_ratio > b.coverage_ratio;
                      return a.concept_id < b.concept_id;
                  });
        std::set<ConceptId> want_atomic, want_parent;
        for (size_t i = 0; i < eligible.size(); ++i) {
            const auto& s = eligible[i];
            if (int(i) + 1 <= params.max_rank &&
                s.coverage_ratio >= params.min_coverage &&
                s.artifact_pixels >= params.min_pixels)
                (s.atomic ? want_atomic : want_parent).insert(s.concept_id);
        }
        for (const auto& d : params.default_parents) want_parent.insert(d);
        ok = res.atomic == want_atomic && res.parent == want_parent;
    }
    report(3, "concept selection matches the rank/coverage/pixels oracle", ok);
}

// --- criterion 4: box retention matches brute-force encompassment -----------

void criterion_boxes() {
    SplitMix64 rng(4040);
    bool ok = true;
    const int w = 48, h = 48;
    for (int it = 0; it < 200 && ok; ++it) {
        std::map<ConceptId, BitMask> artifacts;
        int nc = 2 + static_cast<int>(rng.below(7));
        for (int c = 0; c < nc; ++c) {
            BitMask m(w, h);
            int npx = static_cast<int>(rng.below(80));
            for (int p = 0; p < npx; ++p)
                m.set(static_cast<int>(rng.below(w)),
                      static_cast<int>(rng.below(h)));
            artifacts["c" + std::to_string(c)] = m;
        }
        auto boxes = generate_candidate_boxes(rng.next(), 20, w, h);
        auto got = retain_boxes(boxes, artifacts, 3, 0.5);
        std::vector<RetainedBox> want;
        for (const Box& b : boxes) {
            std::vector<ConceptId> enc;
            for (const auto& [id, m] : artifacts) {
                long long total = 0, inside = 0;
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        if (m.get(x, y)) {
                            ++total;
                            if (b.contains(x, y)) ++inside;
                        }
                if (total > 0 && double(inside) >= 0.5 * double(total))
                    enc.push_back(id);
            }
            if (enc.size() >= 3) want.push_back({b, enc});
        }
        ok = got.size() == want.size();
        for (size_t i = 0; ok && i < got.size(); ++i)
            ok = got[i].box == want[i].box && got[i].concepts == want[i].concepts;
    }
    report(4, "box retention keeps boxes encompassing >= 3 artifact concepts",
           ok);
}

// --- criterion 5: grounded answer format and the worked summary example -----

void criterion_age_format() {
    const std::string example =
        "The <0> left side of the chin </0> reveals an unnaturally uniform skin "
        "texture, while the <1> right chin area </1> exhibits disproportionate "
        "shadowing that contradicts expected lighting. The <2> chin's edges </2> "
        "display subtle distortions, indicating possible digital manipulation. "
        "Additionally, the <3> left nasolabial fold </3> appears overly "
        "smoothed, lacking natural depth, whereas the <4> right nasolabial "
        "region </4> fails to show proper shading and depth variation.";
    std::vector<ConceptId> order = {"c0", "c1", "c2", "c3", "c4"};
    bool ok = true;
    try {
        AgeNarrative n = parse_step4(example, order);
        ok = n.grounded_order == order;
        std::map<ConceptId, BitMask> masks;
        for (const auto& id : order) {
            BitMask m(8, 8);
            m.set(0, 0);
            masks[id] = m;
        }
        InterleavedAnswer a = to_interleaved(n, masks);
        ok = ok && count_occurrences(a.text, "[SEG]") == a.masks.size();
        ok = ok && a.masks.size() == 5;
        ok = ok && count_occurrences(a.text, "<p>") == 5 &&
             count_occurrences(a.text, "</p>") == 5;
        // every grounded span renders as "<p>phrase</p> [SEG]"
        ok = ok && a.text.find("<p>left side of the chin</p> [SEG]") !=
                       std::string::npos;
    } catch (const Error&) {
        ok = false;
    }
    report(5, "grounded answers pair [SEG] with masks; worked summary parses",
           ok);
}

// --- criterion 6: prompt templates pinned by hash ----------------------------

void criterion_prompt_hashes() {
    bool ok =
        sha256_hex(kStep3PromptTemplate) ==
            "4860e1a1c05defb16d7a21bbd4bccde36ad3925c33f508740b6068d0b7316322" &&
        sha256_hex(kStep4PromptTemplate) ==
            "2a5f30aab9c3dc16b4f280cc7a36b9b58ff2347193a6d27611518d0fd2deb996";
    report(6, "prompt templates match their pinned SHA-256 hashes", ok);
}

// --- criterion 7: evaluation metrics against independent oracles ------------

void criterion_metrics() {
    bool ok = true;
    // classification to 1e-12 against direct counting
    SplitMix64 rng(606);
    for (int it = 0; it < 200 && ok; ++it) {
        std::vector<BinaryOutcome> outs;
        long long tp = 0, tn = 0, fp = 0, fn = 0;
        int n = 4 + static_cast<int>(rng.below(50));
        for (int i = 0; i < n; ++i) {
            BinaryOutcome o{rng.below(2) ? BinaryLabel::Fake : BinaryLabel::Real,
                            rng.below(2) ? BinaryLabel::Fake : BinaryLabel::Real};
            outs.push_back(o);
            bool pf = o.predicted == BinaryLabel::Fake,
                 af = o.actual == BinaryLabel::Fake;
            tp += pf && af;
            fp += pf && !af;
            fn += !pf && af;
            tn += !pf && !af;
        }
        if (tp + fn == 0 || tn + fp == 0) continue;
        ClassificationMetrics m = classification_metrics(outs);
        auto near = [](double a, double b) { return std::abs(a - b) < 1e-12; };
        ok = near(m.accuracy, double(tp + tn) / n) &&
             near(m.apcer, double(fn) / (tp + fn)) &&
             near(m.bpcer, double(fp) / (tn + fp)) &&
             near(m.acer, 0.5 * (m.apcer + m.bpcer)) &&
             near(m.f1, m.precision + m.recall > 0
                            ? 2 * m.precision * m.recall /
                                  (m.precision + m.recall)
                            : 0.0);
    }
    // mIoU against popcounts
    for (int it = 0; it < 50 && ok; ++it) {
        BitMask a(10, 10), b(10, 10);
        for (size_t i = 0; i < a.size(); ++i) {
            a.set_at(i, rng.below(3) == 0);
            b.set_at(i, rng.below(3) == 0);
        }
        long long inter = 0, uni = 0;
        for (size_t i = 0; i < a.size(); ++i) {
            inter += a.at(i) && b.at(i);
            uni += a.at(i) || b.at(i);
        }
        ok = std::abs(iou(a, b) - (uni ? double(inter) / uni : 1.0)) < 1e-12;
    }
    // BLEU-4 / ROUGE-L identities and a hand ROUGE value (beta^2 = 1.44)
    if (ok) {
        std::vector<std::string> s = tokenize("the nose area shows heavy blur");
        NgramMetrics self = ngram_metrics({s, {s}});
        ok = std::abs(self.bleu4 - 1.0) < 1e-12 &&
             std::abs(self.rouge_l - 1.0) < 1e-12;
        TextPair t{{"a", "b", "c", "d"}, {{"a", "c", "d", "e"}}};
        double p = 0.75, r = 0.75;
        double want = (1.0 + 1.44) * p * r / (r + 1.44 * p);
        ok = ok && std::abs(ngram_metrics(t).rouge_l - want) < 1e-9;
    }
    // CIDEr against an independent tf-idf computation to 1e-9
    if (ok) {
        std::vector<std::string> vocab = {"nose", "eye",  "blur", "tone",
                                          "edge", "fake", "skin", "the"};
        std::vector<TextPair> corpus;
        for (int i = 0; i < 5; ++i) {
            TextPair t;
            auto sent = [&] {
                std::vector<std::string> out;
                size_t len = 4 + rng.below(6);
                for (size_t j = 0; j < len; ++j)
                    out.push_back(vocab[rng.below(vocab.size())]);
                return out;
            };
            t.candidate = sent();
            t.references = {sent()};
            corpus.push_back(t);
        }
        corpus[0].references[0] = corpus[0].candidate;
        CiderResult got = cider(corpus);

        auto counts = [](const std::vector<std::string>& toks, int n) {
            std::map<std::string, double> c;
            for (size_t i = 0; i + n <= toks.size(); ++i) {
                std::string key;
                for (int a = 0; a < n; ++a) key += toks[i + a] + "\x1f";
                c[key] += 1.0;
            }
            return c;
        };
        std::map<std::string, double> df;
        for (const auto& t : corpus) {
            std::set<std::string> seen;
            for (const auto& ref : t.references)
                for (int n = 1; n <= 4; ++n)
                    for (const auto& [g, _] : counts(ref, n)) seen.insert(g);
            for (const auto& g : seen) df[g] += 1.0;
        }
        double logN = std::log(5.0);
        auto tfidf = [&](const std::vector<std::string>& toks, int n) {
            std::map<std::string, double> v;
            for (auto& [g, c] : counts(toks, n))
                v[g] = c * (logN - std::log(std::max(1.0, df[g])));
            return v;
        };
        for (size_t i = 0; i < corpus.size() && ok; ++i) {
            const TextPair& t = corpus[i];
            double score = 0.0;
            for (const auto& ref : t.references) {
                double delta = double(t.candidate.size()) - double(ref.size());
                double sim = 0.0;
                for (int n = 1; n <= 4; ++n) {
                    auto cv = tfidf(t.candidate, n), rv = tfidf(ref, n);
                    double nc = 0.0, nr = 0.0;
                    for (auto& [g, v] : cv) nc += v * v;
                    for (auto& [g, v] : rv) nr += v * v;
                    nc = std::sqrt(nc);
                    nr = std::sqrt(nr);
                    if (nc == 0.0 || nr == 0.0) continue;
                    double dot = 0.0;
                    for (auto& [g, v] : cv)
                        if (rv.count(g)) dot += std::min(v, rv.at(g)) * rv.at(g);
                    sim += dot / (nc * nr);
                }
                score += std::exp(-delta * delta / 72.0) * sim / 4.0;
            }
            score *= 10.0 / double(t.references.size());
            ok = std::abs(got.per_sample[i] - score) < 1e-9;
        }
        ok = ok && got.per_sample[0] > 0.0;
    }
    // meteor_lite identity value
    if (ok) {
        std::vector<std::string> s = tokenize("left eye region looks synthetic");
        double want = 1.0 - 0.5 * std::pow(1.0 / 5.0, 3.0);
        ok = std::abs(meteor_lite({s, {s}}) - want) < 1e-12;
    }
    report(7, "metric implementations match independent oracles", ok);
}

// --- criterion 8: model kernels ----------------------------------------------

void criterion_kernels() {
    bool ok = true;
    // roi_align identity sampling to 1e-6
    SplitMix64 rng(808);
    Tensor f = random_tensor({2, 6, 6}, rng);
    Tensor r = roi_align(f, {0, 0, 1, 1}, 6, 6, 1);
    for (size_t i = 0; i < f.numel() && ok; ++i)
        ok = std::abs(r.data[i] - f.data[i]) < 1e-6;
    // zero-weight decoder identity
    if (ok) {
        DecoderParams p;
        DecoderLayerParams l;
        auto z = [](std::vector<size_t> s) { return Tensor(std::move(s)); };
        l.query_self_attn = {z({4, 4}), z({4, 4}), z({4, 4}), z({4, 4})};
        l.query_to_image = l.query_self_attn;
        l.image_to_query = l.query_self_attn;
        l.query_mlp = {z({4, 6}), z({6}), z({6, 4}), z({4})};
        p.layers = {l};
        Tensor img = random_tensor({5, 4}, rng), q = random_tensor({2, 4}, rng);
        DecoderOutput out = two_way_decoder(img, q, p);
        ok = out.image.data == img.data && out.queries.data == q.data;
        // one mask per concept for k in {0, 1, 3, 7}
        Tensor pixel = random_tensor({4, 4, 4}, rng);
        QueryEmbeddingSet embeds{random_tensor({1, 4}, rng),
                                 random_tensor({1, 4}, rng),
                                 random_tensor({1, 4}, rng),
                                 random_tensor({1, 4}, rng),
                                 random_tensor({1, 4}, rng)};
        for (size_t k : {0u, 1u, 3u, 7u}) {
            Tensor concepts = random_tensor({k, 4}, rng);
            PredictedMasks pm =
                predict_masks(pixel, concepts, embeds, img, p, true);
            ok = ok && pm.artifact.size() == k && pm.region.size() == k;
        }
    }
    // loss weighting 0.2 / 1.0 / 0.5 / 2.0
    if (ok) {
        Tensor logits = random_tensor({16}, rng, 2.0);
        BitMask gt(4, 4);
        for (size_t i = 0; i < 16; ++i) gt.set_at(i, rng.below(2));
        double bce = binary_cross_entropy(logits, gt);
        double dice = dice_loss(logits, gt);
        LossTerms t = mask_losses(logits, gt, 0.9, 2.5);
        ok = std::abs(t.total - (0.5 * bce + 2.0 * dice + 0.2 * 0.9 + 1.0 * 2.5)) <
             1e-12;
    }
    ok = ok && kernels_selftest().at("ok").get<bool>();
    report(8, "forward kernels: roi_align, decoder identity, masks, losses", ok);
}

// --- criterion 9: deterministic end-to-end mock pipeline ---------------------

int run_cli(const std::string& args) {
    std::string cmd = std::string(FIFA_CLI_PATH) + " " + args;
    return std::system(cmd.c_str());
}

bool run_pipeline(const fs::path& out, const std::string& config,
                  const std::string& data, int jobs) {
    const std::string common = " --config " + config + " --out " +
                               out.string() + " --data " + data + " --jobs " +
                               std::to_string(jobs);
    for (const std::string& stage :
         {"derive-masks", "extract-artifacts", "select-concepts", "annotate",
          "augment-bage", "assemble"}) {
        std::string cmd = stage + common;
        if (stage == "assemble") cmd += " > /dev/null";
        if (run_cli(cmd) != 0) return false;
    }
    return true;
}

void criterion_pipeline() {
    using clock = std::chrono::steady_clock;
    auto start = clock::now();
    bool ok = true;
    std::string detail;
    try {
        fs::path work = fresh_dir("e2e");
        const std::string fixtures = FIFA_FIXTURE_DIR;
        // dataset: one attribute-manipulation fake plus one real image
        nlohmann::json data = {
            {"images",
             {{{"id", "img001"},
               {"label", "fake"},
               {"forgery_type", "attribute_manipulation"},
               {"real", fixtures + "/real.png"},
               {"fake", fixtures + "/fake.png"},
               {"landmarks", fixtures + "/landmarks.json"},
               {"parsing", fixtures + "/parsing.png"}},
              {{"id", "img002"},
               {"label", "real"},
               {"real", fixtures + "/real.png"}}}}};
        const std::string data_path = (work / "dataset.json").string();
        write_text_file(data_path, data.dump(2));

        auto make_config = [&](const fs::path& out_dir) {
            nlohmann::json cfg = {
                {"manifest", std::string(FIFA_ASSET_DIR) + "/fict_manifest.json"},
                {"rules", std::string(FIFA_ASSET_DIR) + "/geometry_rules.json"},
                {"templates",
                 std::string(FIFA_ASSET_DIR) + "/question_templates.json"},
                // small canvas: loosen coverage thresholds so several atomic
                // concepts select, and grow the boxes so retention succeeds
                {"selection",
                 {{"min_coverage", 0.02}, {"min_pixels", 4}, {"max_rank", 50}}},
                {"boxes",
                 {{"n", 20},
                  {"min_side_frac", 0.55},
                  {"encompass_frac", 0.5},
                  {"min_concepts", 3}}},
                {"backend",
                 {{"mode", "mock"},
                  {"cache_dir", (out_dir / "cache").string()}}},
                {"split", {{"training", 8}, {"dev", 1}, {"test", 1}}},
                {"seed", 11}};
            const std::string path = (out_dir.string() + ".config.json");
            write_text_file(path, cfg.dump(2));
            return path;
        };

        fs::path out_a = work / "run_a", out_b = work / "run_b";
        ok = run_pipeline(out_a, make_config(out_a), data_path, 1) &&
             run_pipeline(out_b, make_config(out_b), data_path, 4);

        if (ok) {
            // corpora are byte-identical regardless of --jobs
            std::vector<fs::path> files_a;
            for (const auto& e : fs::directory_iterator(out_a / "corpus"))
                files_a.push_back(e.path());
            std::sort(files_a.begin(), files_a.end());
            ok = !files_a.empty();
            std::set<std::string> tags;
            for (const auto& fa : files_a) {
                fs::path fb = out_b / "corpus" / fa.filename();
                if (!fs::exists(fb) ||
                    read_file(fa.string()) != read_file(fb.string())) {
                    ok = false;
                    detail = "mismatch at " + fa.filename().string();
                    break;
                }
                std::string stem = fa.stem().string();  // <task>.<split>
                size_t dot = stem.rfind('.');
                if (fa.extension() == ".jsonl" && dot != std::string::npos)
                    tags.insert(stem.substr(0, dot));
            }
            if (ok) {
                for (const auto& [tag, name] : task_tag_names())
                    if (!tags.count(name)) {
                        ok = false;
                        detail = "no samples for task " + name;
                    }
            }
            if (ok) {
                // every emitted sample passes structural validation
                for (const auto& fa : files_a) {
                    if (fa.extension() != ".jsonl") continue;
                    for (const auto& s : load_jsonl_samples(fa.string()))
                        if (!validate_sample(s).ok()) {
                            ok = false;
                            detail = "invalid sample in " +
                                     fa.filename().string();
                        }
                }
            }
        } else {
            detail = "pipeline stage failed";
        }
    } catch (const std::exception& e) {
        ok = false;
        detail = e.what();
    }
    double secs = std::chrono::duration<double>(clock::now() - start).count();
    ok = ok && secs < 60.0;
    if (detail.empty()) detail = std::to_string(secs) + "s";
    report(9, "mock pipeline emits all 11 tasks deterministically across --jobs",
           ok, detail);
}

// --- criterion 10: bookkeeping reproduces the published training total ------

void criterion_stats() {
    bool ok = true;
    std::string detail;
    try {
        fs::path dir = fresh_dir("stats");
        // published per-task counts; detection/classification are combined
        const std::map<std::string, std::map<std::string, long long>> table = {
            {"DET", {{"training", 160000}, {"dev", 2000}, {"test", 2000}}},
            {"I_LOC", {{"training", 10000}, {"dev", 200}, {"test", 200}}},
            {"R_LOC", {{"training", 300791}, {"dev", 5000}, {"test", 5500}}},
            {"B_LOC", {{"training", 182170}, {"dev", 3500}, {"test", 4000}}},
            {"I_TOE", {{"training", 9940}, {"dev", 200}, {"test", 200}}},
            {"R_TOE", {{"training", 300744}, {"dev", 5000}, {"test", 5500}}},
            {"B_TOE", {{"training", 182097}, {"dev", 3500}, {"test", 4000}}},
            {"I_AGE", {{"training", 9796}, {"dev", 200}, {"test", 200}}},
            {"R_AGE", {{"training", 124113}, {"dev", 2000}, {"test", 2200}}},
            {"B_AGE", {{"training", 103561}, {"dev", 1147}, {"test", 1168}}},
        };
        std::vector<std::string> files;
        for (const auto& [task, per_split] : table)
            for (const auto& [split, count] : per_split) {
                const std::string path =
                    (dir / (task + "." + split + ".jsonl")).string();
                std::ofstream out(path, std::ios::binary);
                for (long long i = 0; i < count; ++i)
                    out << R"({"id":")" << task << i << R"("})" << "\n";
                files.push_back(path);
            }
        CorpusStats stats = corpus_stats(files);
        ok = stats.split_total("training") == 1383212;
        std::string rendered = render_stats_table(stats);
        ok = ok && rendered.find("1,383,212") != std::string::npos;
        ok = ok && stats.counts.at("R_LOC").at("training") == 300791;
        detail = "training total " +
                 std::to_string(stats.split_total("training"));
    } catch (const std::exception& e) {
        ok = false;
        detail = e.what();
    }
    report(10, "corpus bookkeeping reproduces the 1,383,212 training total", ok,
           detail);
}

}  // namespace

int main() {
    criterion_union();
    criterion_threshold();
    criterion_selection();
    criterion_boxes();
    criterion_age_format();
    criterion_prompt_hashes();
    criterion_metrics();
    criterion_kernels();
    criterion_pipeline();
    criterion_stats();
    if (g_failures) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all 10 criteria passed\n";
    return 0;
}
