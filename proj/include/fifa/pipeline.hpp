#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fifa/artifact.hpp"
#include "fifa/chat.hpp"
#include "fifa/corpus.hpp"
#include "fifa/error.hpp"
#include "fifa/fict.hpp"
#include "fifa/geometry.hpp"
#include "fifa/kernels.hpp"
#include "fifa/mask.hpp"
#include "fifa/metrics.hpp"
#include "fifa/narrative.hpp"
#include "fifa/png_io.hpp"
#include "fifa/prompts.hpp"
#include "fifa/sample.hpp"

namespace fifa {

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw make_error("IoError", "cannot read " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::filesystem::create_directories(
        std::filesystem::path(path).parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw make_error("IoError", "cannot write " + path);
    out << text;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct BoxParams {
    int n = 20;
    double min_side_frac = 0.10;
    double encompass_frac = 0.5;
    int min_concepts = 3;
};

struct PipelineConfig {
    std::string manifest = "assets/fict_manifest.json";
    std::string rules = "assets/geometry_rules.json";
    std::string templates = "assets/question_templates.json";
    SelectionParams selection;
    BoxParams boxes;
    ChatConfig backend;
    SplitSpec split;
    uint64_t seed = 1;
    int jobs = 1;

    static PipelineConfig from_json(const nlohmann::json& j) {
        PipelineConfig c;
        c.manifest = j.value("manifest", c.manifest);
        c.rules = j.value("rules", c.rules);
        c.templates = j.value("templates", c.templates);
        if (j.contains("selection")) {
            const auto& s = j.at("selection");
            c.selection.max_rank = s.value("max_rank", c.selection.max_rank);
            c.selection.min_coverage =
                s.value("min_coverage", c.selection.min_coverage);
            c.selection.min_pixels = s.value("min_pixels", c.selection.min_pixels);
            c.selection.top_fraction =
                s.value("top_fraction", c.selection.top_fraction);
            std::string pool = s.value("rank_pool", std::string("pooled"));
            if (pool == "pooled")
                c.selection.rank_pool = SelectionParams::RankPool::Pooled;
            else if (pool == "per_kind")
                c.selection.rank_pool = SelectionParams::RankPool::PerKind;
            else
                throw make_error("BadSelectionParams", "rank_pool " + pool);
            if (s.contains("default_parents"))
                c.selection.default_parents =
                    s.at("default_parents").get<std::vector<std::string>>();
        }
        if (j.contains("boxes")) {
            const auto& b = j.at("boxes");
            c.boxes.n = b.value("n", c.boxes.n);
            c.boxes.min_side_frac = b.value("min_side_frac", c.boxes.min_side_frac);
            c.boxes.encompass_frac =
                b.value("encompass_frac", c.boxes.encompass_frac);
            c.boxes.min_concepts = b.value("min_concepts", c.boxes.min_concepts);
        }
        if (j.contains("backend")) {
            const auto& b = j.at("backend");
            c.backend.mode =
                chat_mode_from_string(b.value("mode", std::string("mock")));
            c.backend.endpoint = b.value("endpoint", c.backend.endpoint);
            c.backend.model = b.value("model", c.backend.model);
            c.backend.max_retries = b.value("max_retries", c.backend.max_retries);
            c.backend.backoff_base_ms =
                b.value("backoff_base_ms", c.backend.backoff_base_ms);
            c.backend.cache_dir = b.value("cache_dir", c.backend.cache_dir);
        }
        if (j.contains("split")) {
            const auto& s = j.at("split");
            c.split.training = s.value("training", c.split.training);
            c.split.dev = s.value("dev", c.split.dev);
            c.split.test = s.value("test", c.split.test);
            c.split.salt = s.value("salt", c.split.salt);
        }
        c.seed = j.value("seed", c.seed);
        c.jobs = j.value("jobs", c.jobs);
        return c;
    }

    nlohmann::json to_json() const {
        return {
            {"manifest", manifest},
            {"rules", rules},
            {"templates", templates},
            {"selection",
             {{"max_rank", selection.max_rank},
              {"min_coverage", selection.min_coverage},
              {"min_pixels", selection.min_pixels},
              {"top_fraction", selection.top_fraction},
              {"rank_pool",
               selection.rank_pool == SelectionParams::RankPool::Pooled
                   ? "pooled"
                   : "per_kind"},
              {"default_parents", selection.default_parents}}},
            {"boxes",
             {{"n", boxes.n},
              {"min_side_frac", boxes.min_side_frac},
              {"encompass_frac", boxes.encompass_frac},
              {"min_concepts", boxes.min_concepts}}},
            {"backend",
             {{"mode", backend.mode == ChatMode::Live
                           ? "live"
                           : (backend.mode == ChatMode::Mock ? "mock" : "replay")},
              {"endpoint", backend.endpoint},
              {"model", backend.model},
              {"max_retries", backend.max_retries},
              {"backoff_base_ms", backend.backoff_base_ms},
              {"cache_dir", backend.cache_dir}}},
            {"split",
             {{"training", split.training},
              {"dev", split.dev},
              {"test", split.test},
              {"salt", split.salt}}},
            {"seed", seed},
            {"jobs", jobs},
        };
    }
};

// One source image for the pipeline. Fake entries carry the pristine
// counterpart so the pixel diff can be computed.
struct ImageEntry {
    std::string id;
    std::string label;  // "real" | "fake"
    std::string forgery_type = "real";
    std::string real_path;
    std::string fake_path;  // empty for real images
    std::string landmarks_path;
    std::string parsing_path;

    std::string image_ref() const {
        return label == "fake" ? fake_path : real_path;
    }
};

struct DatasetManifest {
    std::vector<ImageEntry> images;

    static DatasetManifest load(const std::string& path) {
        nlohmann::json j = nlohmann::json::parse(read_text_file(path));
        DatasetManifest m;
        std::set<std::string> seen;
        for (const auto& e : j.at("images")) {
            ImageEntry entry;
            entry.id = e.at("id").get<std::string>();
            entry.label = e.at("label").get<std::string>();
            if (entry.label != "real" && entry.label != "fake")
                throw make_error("ParseError", "label must be real|fake");
            entry.forgery_type = e.value("forgery_type",
                                         entry.label == "real"
                                             ? std::string("real")
                                             : std::string(""));
            entry.real_path = e.value("real", std::string(""));
            entry.fake_path = e.value("fake", std::string(""));
            entry.landmarks_path = e.value("landmarks", std::string(""));
            entry.parsing_path = e.value("parsing", std::string(""));
            if (entry.label == "fake" &&
                (entry.real_path.empty() || entry.fake_path.empty()))
                throw make_error("ParseError",
                                 "fake entry needs real+fake paths: " + entry.id);
            if (!seen.insert(entry.id).second)
                throw make_error("DuplicateId", entry.id);
            m.images.push_back(std::move(entry));
        }
        std::sort(m.images.begin(), m.images.end(),
                  [](const ImageEntry& a, const ImageEntry& b) {
                      return a.id < b.id;
                  });
        return m;
    }
};

namespace detail {

// Index-space parallel map with deterministic per-index outputs; the first
// thrown error wins and is rethrown on the caller thread.
template <typename Fn>
inline void parallel_for(size_t n, int jobs, Fn&& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    for (int t = 0; t < std::min<int>(jobs, static_cast<int>(n)); ++t)
        threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline nlohmann::json box_to_json(const Box& b) {
    return {b.x0, b.y0, b.x1, b.y1};
}

inline Box box_from_json(const nlohmann::json& j) {
    auto v = j.get<std::vector<int>>();
    if (v.size() != 4) throw make_error("ParseError", "box must have 4 ints");
    return Box{v[0], v[1], v[2], v[3]};
}

inline BitMask box_mask(const Box& b, int width, int height) {
    BitMask m(width, height);
    for (int y = std::max(0, b.y0); y < std::min(height, b.y1); ++y)
        for (int x = std::max(0, b.x0); x < std::min(width, b.x1); ++x)
            m.set(x, y);
    return m;
}

}  // namespace detail

// Shared pipeline context: loaded assets plus resolved output directory.
struct Pipeline {
    PipelineConfig cfg;
    std::string out_dir;
    ConceptTree tree;
    GeometryRuleSet rules;
    QuestionBank bank;

    Pipeline(PipelineConfig config, std::string out)
        : cfg(std::move(config)), out_dir(std::move(out)) {
        tree = load_manifest(read_text_file(cfg.manifest));
        rules = load_rules(read_text_file(cfg.rules));
        bank = QuestionBank::from_json(read_text_file(cfg.templates));
        std::filesystem::create_directories(out_dir);
        // Echo the effective configuration for provenance.
        write_text_file(stage_path("config.json"), cfg.to_json().dump(2) + "\n");
    }

    std::string stage_path(const std::string& rel) const {
        return (std::filesystem::path(out_dir) / rel).string();
    }

    // ---- derive-masks -----------------------------------------------------

    void derive_masks(const DatasetManifest& data) const {
        detail::parallel_for(data.images.size(), cfg.jobs, [&](size_t i) {
            const ImageEntry& e = data.images[i];
            if (e.landmarks_path.empty() || e.parsing_path.empty()) return;
            ParsingMap pm = load_parsing(e.parsing_path);
            LandmarkSet lm = load_landmarks(read_text_file(e.landmarks_path));
            auto masks = all_region_masks(tree, rules, lm, pm);
            nlohmann::json out = {{"image", e.id},
                                  {"width", pm.width},
                                  {"height", pm.height}};
            nlohmann::json mj = nlohmann::json::object();
            for (const auto& [id, m] : masks) mj[id] = rle_to_json(rle_encode(m));
            out["masks"] = std::move(mj);
            write_text_file(stage_path("regions/" + e.id + ".json"),
                            out.dump() + "\n");
        });
    }

    // ---- extract-artifacts -------------------------------------------------

    void extract_artifacts(const DatasetManifest& data) const {
        detail::parallel_for(data.images.size(), cfg.jobs, [&](size_t i) {
            const ImageEntry& e = data.images[i];
            if (e.label != "fake") return;
            ImagePair pair{read_png_rgb(e.real_path), read_png_rgb(e.fake_path)};
            GrayImage gray = diff_grayscale(pair);
            BitMask whole = threshold_top_fraction(gray, cfg.selection.top_fraction);
            const size_t k = static_cast<size_t>(std::ceil(
                cfg.selection.top_fraction * static_cast<double>(gray.data.size())));
            nlohmann::json out = {{"image", e.id},
                                  {"width", gray.width},
                                  {"height", gray.height},
                                  {"k", k},
                                  {"area", whole.area()},
                                  {"whole", rle_to_json(rle_encode(whole))}};
            write_text_file(stage_path("artifacts/" + e.id + ".json"),
                            out.dump() + "\n");
        });
    }

    // ---- select-concepts ----------------------------------------------------

    void select_concepts(const DatasetManifest& data) const {
        detail::parallel_for(data.images.size(), cfg.jobs, [&](size_t i) {
            const ImageEntry& e = data.images[i];
            const std::string regions_path = stage_path("regions/" + e.id + ".json");
            const std::string artifact_path =
                stage_path("artifacts/" + e.id + ".json");
            if (!std::filesystem::exists(regions_path) ||
                !std::filesystem::exists(artifact_path))
                return;
            nlohmann::json rj = nlohmann::json::parse(read_text_file(regions_path));
            nlohmann::json aj = nlohmann::json::parse(read_text_file(artifact_path));
            BitMask whole = rle_decode(rle_from_json(aj.at("whole")));
            std::map<ConceptId, BitMask> regions;
            for (const auto& [id, mj] : rj.at("masks").items())
                regions.emplace(id, rle_decode(rle_from_json(mj)));
            auto stats = coverage_stats(regions, whole, tree);
            SelectionResult sel =
                select_artifact_concepts(std::move(stats), cfg.selection, tree);

            nlohmann::json sj = nlohmann::json::array();
            for (const auto& s : sel.stats) {
                nlohmann::json row = {
                    {"concept", s.concept_id},
                    {"kind", s.atomic ? "atomic" : "parent"},
                    {"region_area", s.region_area},
                    {"artifact_pixels", s.artifact_pixels},
                    {"coverage_ratio", s.coverage_ratio},
                    {"selected", s.selected},
                    {"selected_by_default", s.selected_by_default}};
                if (s.rank) row["rank"] = *s.rank;
                sj.push_back(std::move(row));
            }
            nlohmann::json regional = nlohmann::json::object();
            for (const auto& id : sel.atomic)
                regional[id] = rle_to_json(
                    rle_encode(set_op(regions.at(id), whole, SetOp::Intersect)));
            nlohmann::json out = {
                {"image", e.id},
                {"width", whole.width()},
                {"height", whole.height()},
                {"stats", std::move(sj)},
                {"atomic", std::vector<ConceptId>(sel.atomic.begin(), sel.atomic.end())},
                {"parent", std::vector<ConceptId>(sel.parent.begin(), sel.parent.end())},
                {"regional_artifacts", std::move(regional)}};
            write_text_file(stage_path("selection/" + e.id + ".json"),
                            out.dump() + "\n");
        });
    }

    // ---- annotate ------------------------------------------------------------

    void annotate(const DatasetManifest& data) const {
        // The chat cache is shared; one client per worker keeps the transport
        // seam simple while cache files make replays deterministic.
        detail::parallel_for(data.images.size(), cfg.jobs, [&](size_t i) {
            const ImageEntry& e = data.images[i];
            const std::string sel_path = stage_path("selection/" + e.id + ".json");
            if (!std::filesystem::exists(sel_path)) return;
            nlohmann::json sel = nlohmann::json::parse(read_text_file(sel_path));
            auto atomics = sel.at("atomic").get<std::vector<ConceptId>>();
            if (atomics.empty()) return;
            // Deterministic prompt order: manifest traversal order.
            std::vector<ConceptId> ordered;
            for (const auto& id : tree.order)
                if (std::find(atomics.begin(), atomics.end(), id) != atomics.end())
                    ordered.push_back(id);

            ChatConfig backend = cfg.backend;
            ChatClient client(backend);

            std::vector<std::string> names;
            for (const auto& id : ordered) names.push_back(tree.node(id).display_name);
            const std::string step3 = build_step3_prompt(names);

            ChatRequest req3{step3, attach_images(e, sel)};
            Step3ParseResult parsed =
                parse_step3(client.chat(req3), ordered, tree);
            std::vector<ConceptId> dropped;
            if (!parsed.missing.empty()) {
                // One structured re-prompt for just the missing areas.
                std::vector<std::string> missing_names;
                for (const auto& id : parsed.missing)
                    missing_names.push_back(tree.node(id).display_name);
                ChatRequest retry{build_step3_prompt(missing_names),
                                  attach_images(e, sel)};
                Step3ParseResult second =
                    parse_step3(client.chat(retry), parsed.missing, tree);
                for (auto& ex : second.explanations)
                    parsed.explanations.push_back(std::move(ex));
                dropped = second.missing;
            }
            // Restore prompt order after any merge.
            std::vector<AtomicExplanation> explanations;
            for (const auto& id : ordered)
                for (const auto& ex : parsed.explanations)
                    if (ex.concept_slug == id) explanations.push_back(ex);
            if (explanations.empty())
                throw make_error("NoParsableLines",
                                 "no explanations for " + e.id);

            const std::string step4 = build_step4_prompt(explanations);
            const std::string summary = client.chat(ChatRequest{step4, {}});
            std::vector<ConceptId> index_map;
            for (const auto& ex : explanations) index_map.push_back(ex.concept_slug);
            AgeNarrative narrative = parse_step4(summary, index_map);

            nlohmann::json ej = nlohmann::json::array();
            for (const auto& ex : explanations)
                ej.push_back({{"concept", ex.concept_slug},
                              {"name", ex.display_name},
                              {"text", ex.text}});
            nlohmann::json nj = nlohmann::json::array();
            for (const auto& seg : narrative.segments) {
                if (const auto* p = std::get_if<PlainText>(&seg))
                    nj.push_back({{"type", "text"}, {"text", p->text}});
                else {
                    const auto& s = std::get<GroundedSpan>(seg);
                    nj.push_back({{"type", "span"},
                                  {"concept", s.concept_id},
                                  {"phrase", s.phrase}});
                }
            }
            nlohmann::json out = {{"image", e.id},
                                  {"explanations", std::move(ej)},
                                  {"summary", summary},
                                  {"narrative", std::move(nj)},
                                  {"prompt_hashes",
                                   {sha256_hex(step3), sha256_hex(step4)}},
                                  {"dropped_concepts", dropped}};
            write_text_file(stage_path("annotations/" + e.id + ".json"),
                            out.dump() + "\n");
        });
    }

    // ---- augment-bage ---------------------------------------------------------

    void augment_bage(const DatasetManifest& data) const {
        detail::parallel_for(data.images.size(), cfg.jobs, [&](size_t i) {
            const ImageEntry& e = data.images[i];
            const std::string sel_path = stage_path("selection/" + e.id + ".json");
            if (!std::filesystem::exists(sel_path)) return;
            nlohmann::json sel = nlohmann::json::parse(read_text_file(sel_path));
            const int w = sel.at("width").get<int>();
            const int h = sel.at("height").get<int>();
            std::map<ConceptId, BitMask> regional;
            for (const auto& [id, mj] : sel.at("regional_artifacts").items())
                regional.emplace(id, rle_decode(rle_from_json(mj)));
            const uint64_t seed = cfg.seed ^ fnv1a(e.id);
            auto candidates = generate_candidate_boxes(seed, cfg.boxes.n, w, h,
                                                       cfg.boxes.min_side_frac);
            auto retained = retain_boxes(candidates, regional,
                                         cfg.boxes.min_concepts,
                                         cfg.boxes.encompass_frac);
            nlohmann::json cj = nlohmann::json::array();
            for (const auto& b : candidates) cj.push_back(detail::box_to_json(b));
            nlohmann::json rj = nlohmann::json::array();
            for (const auto& rb : retained)
                rj.push_back({{"box", detail::box_to_json(rb.box)},
                              {"concepts", rb.concepts}});
            nlohmann::json out = {{"image", e.id},
                                  {"seed", seed},
                                  {"candidates", std::move(cj)},
                                  {"retained", std::move(rj)}};
            write_text_file(stage_path("boxes/" + e.id + ".json"),
                            out.dump() + "\n");
        });
    }

    // ---- assemble ---------------------------------------------------------------

    AssembleResult assemble(const DatasetManifest& data) const {
        std::vector<std::vector<Sample>> per_image(data.images.size());
        detail::parallel_for(data.images.size(), cfg.jobs, [&](size_t i) {
            per_image[i] = samples_for_image(data.images[i]);
        });
        std::vector<Sample> all;
        for (auto& batch : per_image)
            for (auto& s : batch) all.push_back(std::move(s));
        for (const auto& s : all) {
            ValidationReport r = validate_sample(s);
            if (!r.ok())
                throw make_error("InvalidSample",
                                 s.id + ": " + r.entries.front().code);
        }
        AssembleResult result =
            assemble_corpus(std::move(all), cfg.split, stage_path("corpus"));
        write_text_file(stage_path("corpus/stats.txt"),
                        render_stats_table(result.stats));
        write_text_file(stage_path("corpus/stats.json"),
                        stats_to_json(result.stats).dump(2) + "\n");
        return result;
    }

    // ---- render --------------------------------------------------------------

    void render(const DatasetManifest& data) const {
        detail::parallel_for(data.images.size(), cfg.jobs, [&](size_t i) {
            const ImageEntry& e = data.images[i];
            const std::string artifact_path =
                stage_path("artifacts/" + e.id + ".json");
            if (!std::filesystem::exists(artifact_path)) return;
            nlohmann::json aj = nlohmann::json::parse(read_text_file(artifact_path));
            BitMask whole = rle_decode(rle_from_json(aj.at("whole")));
            RgbImage img = read_png_rgb(e.image_ref());
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x)
                    if (whole.get(x, y)) {
                        // 50% red blend marks the artifact area.
                        uint8_t r = static_cast<uint8_t>(
                            (img.channel(x, y, 0) + 255) / 2);
                        img.set_pixel(x, y, r, img.channel(x, y, 1) / 2,
                                      img.channel(x, y, 2) / 2);
                    }
            std::filesystem::create_directories(stage_path("render"));
            write_png_rgb(stage_path("render/" + e.id + ".png"), img);
        });
    }

  private:
    ParsingMap load_parsing(const std::string& path) const {
        if (path.size() > 4 && path.substr(path.size() - 4) == ".png")
            return read_png_parsing(path);
        return load_parsing_json(read_text_file(path));
    }

    LandmarkSet load_landmarks(const std::string& text) const {
        return ::fifa::load_landmarks(text);
    }

    // PNG attachments for the annotation request: the tampered image plus a
    // white-on-black render of the whole-image artifact mask.
    std::vector<std::string> attach_images(const ImageEntry& e,
                                           const nlohmann::json& sel) const {
        std::vector<std::string> images;
        if (!e.fake_path.empty()) images.push_back(read_text_file(e.fake_path));
        const std::string artifact_path = stage_path("artifacts/" + e.id + ".json");
        if (std::filesystem::exists(artifact_path)) {
            nlohmann::json aj =
                nlohmann::json::parse(read_text_file(artifact_path));
            BitMask whole = rle_decode(rle_from_json(aj.at("whole")));
            const std::string mask_png =
                stage_path("annotations/" + e.id + ".mask.png");
            std::filesystem::create_directories(stage_path("annotations"));
            write_png_mask(mask_png, whole);
            images.push_back(read_text_file(mask_png));
        }
        (void)sel;
        return images;
    }

    std::vector<Sample> samples_for_image(const ImageEntry& e) const {
        std::vector<Sample> out;
        // Detection and type classification exist for every source image.
        int width = 0, height = 0;
        const std::string sel_path = stage_path("selection/" + e.id + ".json");
        const std::string art_path = stage_path("artifacts/" + e.id + ".json");
        if (std::filesystem::exists(art_path)) {
            nlohmann::json aj = nlohmann::json::parse(read_text_file(art_path));
            width = aj.at("width").get<int>();
            height = aj.at("height").get<int>();
        } else if (!e.real_path.empty()) {
            RgbImage img = read_png_rgb(e.real_path);
            width = img.width;
            height = img.height;
        }

        MakeSampleInputs base;
        base.image_ref = e.image_ref();
        base.width = width;
        base.height = height;
        base.seed = cfg.seed;

        {
            MakeSampleInputs in = base;
            in.id = e.id + "-det";
            in.label = e.label;
            out.push_back(make_sample(TaskTag::DET, bank, in));
        }
        if (!e.forgery_type.empty()) {
            MakeSampleInputs in = base;
            in.id = e.id + "-cls";
            in.forgery_type = e.forgery_type;
            out.push_back(make_sample(TaskTag::CLS, bank, in));
        }

        // Explanation-bearing tasks only exist for attribute-manipulation
        // fakes that made it through annotation.
        const std::string ann_path = stage_path("annotations/" + e.id + ".json");
        if (e.label != "fake" || e.forgery_type != "attribute_manipulation" ||
            !std::filesystem::exists(ann_path) ||
            !std::filesystem::exists(sel_path) ||
            !std::filesystem::exists(art_path))
            return out;

        nlohmann::json sel = nlohmann::json::parse(read_text_file(sel_path));
        nlohmann::json ann = nlohmann::json::parse(read_text_file(ann_path));
        nlohmann::json art = nlohmann::json::parse(read_text_file(art_path));
        BitMask whole = rle_decode(rle_from_json(art.at("whole")));

        std::map<ConceptId, BitMask> regional;
        for (const auto& [id, mj] : sel.at("regional_artifacts").items())
            regional.emplace(id, rle_decode(rle_from_json(mj)));

        std::vector<AtomicExplanation> explanations;
        for (const auto& ej : ann.at("explanations"))
            explanations.push_back({ej.at("concept").get<std::string>(),
                                    ej.at("name").get<std::string>(),
                                    ej.at("text").get<std::string>()});
        AgeNarrative narrative;
        for (const auto& nj : ann.at("narrative")) {
            if (nj.at("type") == "text")
                narrative.segments.push_back(
                    PlainText{nj.at("text").get<std::string>()});
            else {
                GroundedSpan span{nj.at("phrase").get<std::string>(),
                                  nj.at("concept").get<std::string>()};
                narrative.grounded_order.push_back(span.concept_id);
                narrative.segments.push_back(std::move(span));
            }
        }
        SampleProvenance prov;
        prov.seed = cfg.seed;
        prov.prompt_hashes =
            ann.at("prompt_hashes").get<std::vector<std::string>>();
        prov.dropped_concepts =
            ann.at("dropped_concepts").get<std::vector<std::string>>();
        base.provenance = prov;

        {  // image-level localization: the whole-image artifact mask
            MakeSampleInputs in = base;
            in.id = e.id + "-iloc";
            in.masks = {rle_encode(whole)};
            out.push_back(make_sample(TaskTag::I_LOC, bank, in));
        }
        {  // image-level text-only explanation: summary stripped of grounding
            MakeSampleInputs in = base;
            in.id = e.id + "-itoe";
            in.answer_text = narrative.plain_text();
            out.push_back(make_sample(TaskTag::I_TOE, bank, in));
        }
        {  // image-level grounded explanation
            MakeSampleInputs in = base;
            in.id = e.id + "-iage";
            in.age = to_interleaved(narrative, regional);
            out.push_back(make_sample(TaskTag::I_AGE, bank, in));
        }
        for (const auto& ex : explanations) {
            auto it = regional.find(ex.concept_slug);
            if (it == regional.end()) continue;
            {
                MakeSampleInputs in = base;
                in.id = e.id + "-rloc-" + ex.concept_slug;
                in.region_name = ex.display_name;
                in.masks = {rle_encode(it->second)};
                out.push_back(make_sample(TaskTag::R_LOC, bank, in));
            }
            {
                MakeSampleInputs in = base;
                in.id = e.id + "-rtoe-" + ex.concept_slug;
                in.region_name = ex.display_name;
                in.answer_text = "The " + ex.display_name + " " + ex.text;
                out.push_back(make_sample(TaskTag::R_TOE, bank, in));
            }
            {
                MakeSampleInputs in = base;
                in.id = e.id + "-rage-" + ex.concept_slug;
                in.region_name = ex.display_name;
                AgeNarrative rn;
                rn.segments.push_back(GroundedSpan{ex.display_name, ex.concept_slug});
                rn.segments.push_back(PlainText{" " + ex.text});
                rn.grounded_order.push_back(ex.concept_slug);
                in.age = to_interleaved(rn, regional);
                out.push_back(make_sample(TaskTag::R_AGE, bank, in));
            }
        }

        const std::string boxes_path = stage_path("boxes/" + e.id + ".json");
        if (std::filesystem::exists(boxes_path)) {
            nlohmann::json bj = nlohmann::json::parse(read_text_file(boxes_path));
            int k = 0;
            for (const auto& rj : bj.at("retained")) {
                Box box = detail::box_from_json(rj.at("box"));
                auto concepts = rj.at("concepts").get<std::vector<ConceptId>>();
                BitMask bm = detail::box_mask(box, width, height);
                const std::string suffix = std::to_string(k++);
                {
                    MakeSampleInputs in = base;
                    in.id = e.id + "-bloc-" + suffix;
                    in.box = box;
                    in.masks = {rle_encode(set_op(whole, bm, SetOp::Intersect))};
                    out.push_back(make_sample(TaskTag::B_LOC, bank, in));
                }
                // Explanations for the concepts the box encompasses.
                std::vector<const AtomicExplanation*> inside;
                for (const auto& ex : explanations)
                    if (std::find(concepts.begin(), concepts.end(),
                                  ex.concept_slug) != concepts.end())
                        inside.push_back(&ex);
                if (inside.empty()) continue;
                {
                    MakeSampleInputs in = base;
                    in.id = e.id + "-btoe-" + suffix;
                    in.box = box;
                    std::string text;
                    for (const auto* ex : inside) {
                        if (!text.empty()) text += " ";
                        text += "The " + ex->display_name + " " + ex->text;
                    }
                    in.answer_text = text;
                    out.push_back(make_sample(TaskTag::B_TOE, bank, in));
                }
                {
                    MakeSampleInputs in = base;
                    in.id = e.id + "-bage-" + suffix;
                    in.box = box;
                    AgeNarrative bn;
                    std::map<ConceptId, BitMask> clipped;
                    for (size_t j = 0; j < inside.size(); ++j) {
                        const auto* ex = inside[j];
                        if (j) bn.segments.push_back(PlainText{" "});
                        bn.segments.push_back(
                            GroundedSpan{ex->display_name, ex->concept_slug});
                        bn.segments.push_back(PlainText{" " + ex->text});
                        bn.grounded_order.push_back(ex->concept_slug);
                        clipped.emplace(
                            ex->concept_slug,
                            set_op(regional.at(ex->concept_slug), bm,
                                   SetOp::Intersect));
                    }
                    in.age = to_interleaved(bn, clipped);
                    out.push_back(make_sample(TaskTag::B_AGE, bank, in));
                }
            }
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Evaluation entry point
// ---------------------------------------------------------------------------

inline std::vector<Sample> load_jsonl_samples(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw make_error("IoError", "cannot read " + path);
    std::vector<Sample> out;
    std::string line;
    long long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw make_error("ParseError",
                             path + ":" + std::to_string(lineno));
        out.push_back(sample_from_json(j));
    }
    return out;
}

namespace detail {

inline std::string strip_grounding(std::string text) {
    for (const std::string& tag : {"<p>", "</p>", "[SEG]"}) {
        size_t pos = 0;
        while ((pos = text.find(tag, pos)) != std::string::npos)
            text.erase(pos, tag.size());
    }
    return text;
}

inline BitMask union_of_masks(const Sample& s) {
    if (s.masks.empty()) return BitMask(std::max(1, s.image_width),
                                        std::max(1, s.image_height));
    BitMask acc = rle_decode(s.masks[0]);
    for (size_t i = 1; i < s.masks.size(); ++i)
        acc = set_op(acc, rle_decode(s.masks[i]), SetOp::Union);
    return acc;
}

}  // namespace detail

struct EvalReport {
    nlohmann::json metrics;
    std::string table;
};

// Score predictions against ground truth for one task; records are joined by
// sample id and every ground-truth id must be predicted.
inline EvalReport evaluate_task(TaskTag task, const std::vector<Sample>& preds,
                                const std::vector<Sample>& gts) {
    std::map<std::string, const Sample*> by_id;
    for (const auto& p : preds) by_id[p.id] = &p;
    std::vector<std::pair<const Sample*, const Sample*>> pairs;  // pred, gt
    for (const auto& g : gts) {
        auto it = by_id.find(g.id);
        if (it == by_id.end())
            throw make_error("MissingPrediction", g.id);
        pairs.emplace_back(it->second, &g);
    }
    if (pairs.empty()) throw make_error("EmptyCorpus", "no ground-truth samples");

    EvalReport report;
    nlohmann::json& m = report.metrics;
    m["task"] = task_tag_to_string(task);
    m["samples"] = pairs.size();
    std::ostringstream table;
    table << "Task " << task_tag_to_string(task) << " (" << pairs.size()
          << " samples)\n";

    auto add_row = [&](const std::string& name, double value) {
        m[name] = value;
        table << "  " << name << ": " << value << "\n";
    };

    if (task == TaskTag::DET) {
        std::vector<BinaryOutcome> outcomes;
        for (const auto& [p, g] : pairs) {
            if (!p->label || !g->label)
                throw make_error("ParseError", "DET sample without label");
            outcomes.push_back(
                {*p->label == "fake" ? BinaryLabel::Fake : BinaryLabel::Real,
                 *g->label == "fake" ? BinaryLabel::Fake : BinaryLabel::Real});
        }
        ClassificationMetrics cm = classification_metrics(outcomes);
        add_row("accuracy", cm.accuracy);
        add_row("precision", cm.precision);
        add_row("recall", cm.recall);
        add_row("f1", cm.f1);
        add_row("apcer", cm.apcer);
        add_row("bpcer", cm.bpcer);
        add_row("acer", cm.acer);
    } else if (task == TaskTag::CLS) {
        long long correct = 0;
        for (const auto& [p, g] : pairs) {
            if (!p->forgery_type || !g->forgery_type)
                throw make_error("ParseError", "CLS sample without forgery_type");
            if (*p->forgery_type == *g->forgery_type) ++correct;
        }
        add_row("accuracy",
                static_cast<double>(correct) / static_cast<double>(pairs.size()));
    } else if (task_has_masks(task)) {
        std::vector<BitMask> pm, gm;
        for (const auto& [p, g] : pairs) {
            pm.push_back(detail::union_of_masks(*p));
            gm.push_back(detail::union_of_masks(*g));
        }
        add_row("miou", miou(pm, gm));
    }

    const bool text_task = task == TaskTag::I_TOE || task == TaskTag::R_TOE ||
                           task == TaskTag::B_TOE || task == TaskTag::I_AGE ||
                           task == TaskTag::R_AGE || task == TaskTag::B_AGE;
    if (text_task) {
        std::vector<TextPair> corpus;
        double bleu = 0.0, rouge = 0.0, meteor = 0.0;
        for (const auto& [p, g] : pairs) {
            TextPair tp;
            tp.candidate = tokenize(detail::strip_grounding(p->answer));
            tp.references = {tokenize(detail::strip_grounding(g->answer))};
            NgramMetrics nm = ngram_metrics(tp);
            bleu += nm.bleu4;
            rouge += nm.rouge_l;
            meteor += meteor_lite(tp);
            corpus.push_back(std::move(tp));
        }
        const double n = static_cast<double>(pairs.size());
        add_row("bleu4", bleu / n);
        add_row("rouge_l", rouge / n);
        add_row("cider", cider(corpus).mean);
        add_row("meteor_lite", meteor / n);
    }
    report.table = table.str();
    return report;
}

// ---------------------------------------------------------------------------
// Kernel self-test (fixed-seed shape/value checks runnable from the CLI)
// ---------------------------------------------------------------------------

inline nlohmann::json kernels_selftest() {
    nlohmann::json checks = nlohmann::json::array();
    bool all_ok = true;
    auto check = [&](const std::string& name, bool ok) {
        checks.push_back({{"name", name}, {"ok", ok}});
        all_ok = all_ok && ok;
    };

    {  // bilinear sampling of a constant map is constant
        Tensor f({2, 5, 5}, 3.5);
        Tensor r = roi_align(f, NormBox{0.1, 0.2, 0.9, 0.8}, 3, 3, 2);
        bool ok = true;
        for (double v : r.data) ok = ok && std::abs(v - 3.5) < 1e-12;
        check("roi_align_constant", ok);
    }
    {  // zero-weight decoder is an exact identity on both streams
        SplitMix64 rng(7);
        Tensor img = random_tensor({4, 6}, rng), q = random_tensor({2, 6}, rng);
        DecoderParams params;
        DecoderLayerParams layer;
        auto zeros = [](std::vector<size_t> s) { return Tensor(std::move(s)); };
        layer.query_self_attn = {zeros({6, 6}), zeros({6, 6}), zeros({6, 6}),
                                 zeros({6, 6})};
        layer.query_to_image = layer.query_self_attn;
        layer.image_to_query = layer.query_self_attn;
        layer.query_mlp = {zeros({6, 8}), zeros({8}), zeros({8, 6}), zeros({6})};
        params.layers = {layer};
        DecoderOutput out = two_way_decoder(img, q, params);
        check("two_way_decoder_identity",
              out.image.data == img.data && out.queries.data == q.data);
    }
    {  // stride arithmetic: 4x4 in, 16x16 out; zero input stays zero
        Tensor x({3, 4, 4});
        DeconvParams d1{Tensor({3, 3, 2, 2}, 0.5), Tensor()};
        DeconvParams d2{Tensor({3, 3, 2, 2}, 0.25), Tensor()};
        Tensor y = pixel_decode(x, d1, d2);
        bool ok = y.shape == std::vector<size_t>{3, 16, 16};
        for (double v : y.data) ok = ok && v == 0.0;
        check("pixel_decode_shape_zero", ok);
    }
    {  // k concepts in, k masks out (+k with the auxiliary region path)
        SplitMix64 rng(11);
        Tensor pixel = random_tensor({4, 3, 3}, rng);
        Tensor concepts = random_tensor({3, 4}, rng);
        QueryEmbeddingSet embeds{random_tensor({1, 4}, rng),
                                 random_tensor({1, 4}, rng),
                                 random_tensor({1, 4}, rng),
                                 random_tensor({1, 4}, rng),
                                 random_tensor({1, 4}, rng)};
        Tensor image_in = random_tensor({5, 4}, rng);
        DecoderParams dec;
        PredictedMasks pm =
            predict_masks(pixel, concepts, embeds, image_in, dec, true);
        check("predict_masks_duplication",
              pm.artifact.size() == 3 && pm.region.size() == 3);
    }
    {  // weighted loss recombination
        Tensor logits({2, 2}, 0.3);
        BitMask gt(2, 2);
        gt.set(0, 0, true);
        LossTerms t = mask_losses(logits, gt, 0.7, 1.3);
        double expect = 0.2 * 0.7 + 1.0 * 1.3 + 0.5 * t.bce + 2.0 * t.dice;
        check("mask_losses_weights", std::abs(t.total - expect) < 1e-12);
    }
    return {{"ok", all_ok}, {"checks", checks}};
}

}  // namespace fifa
