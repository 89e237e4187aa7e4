#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fifa/error.hpp"
#include "fifa/fict.hpp"
#include "fifa/mask.hpp"
#include "fifa/narrative.hpp"
#include "fifa/rng.hpp"

namespace fifa {

// The eleven instruction tasks: detection, forgery-type classification, and
// localization / text-only explanation / grounded explanation at image (I),
// region (R), and box (B) granularity.
enum class TaskTag {
    DET,
    CLS,
    I_LOC,
    R_LOC,
    B_LOC,
    I_TOE,
    R_TOE,
    B_TOE,
    I_AGE,
    R_AGE,
    B_AGE,
};

inline const std::vector<std::pair<TaskTag, std::string>>& task_tag_names() {
    static const std::vector<std::pair<TaskTag, std::string>> names = {
        {TaskTag::DET, "DET"},     {TaskTag::CLS, "CLS"},
        {TaskTag::I_LOC, "I_LOC"}, {TaskTag::R_LOC, "R_LOC"},
        {TaskTag::B_LOC, "B_LOC"}, {TaskTag::I_TOE, "I_TOE"},
        {TaskTag::R_TOE, "R_TOE"}, {TaskTag::B_TOE, "B_TOE"},
        {TaskTag::I_AGE, "I_AGE"}, {TaskTag::R_AGE, "R_AGE"},
        {TaskTag::B_AGE, "B_AGE"},
    };
    return names;
}

inline std::string task_tag_to_string(TaskTag t) {
    for (const auto& [tag, name] : task_tag_names())
        if (tag == t) return name;
    throw make_error("BadTaskTag", "unknown tag");
}

inline TaskTag task_tag_from_string(const std::string& s) {
    for (const auto& [tag, name] : task_tag_names())
        if (name == s) return tag;
    throw make_error("BadTaskTag", "unknown tag '" + s + "'");
}

inline bool task_has_box(TaskTag t) {
    return t == TaskTag::B_LOC || t == TaskTag::B_TOE || t == TaskTag::B_AGE;
}
inline bool task_has_masks(TaskTag t) {
    switch (t) {
        case TaskTag::I_LOC:
        case TaskTag::R_LOC:
        case TaskTag::B_LOC:
        case TaskTag::I_AGE:
        case TaskTag::R_AGE:
        case TaskTag::B_AGE:
            return true;
        default:
            return false;
    }
}
inline bool task_is_region(TaskTag t) {
    return t == TaskTag::R_LOC || t == TaskTag::R_TOE || t == TaskTag::R_AGE;
}

inline const std::vector<std::string>& forgery_type_names() {
    static const std::vector<std::string> names = {
        "identity_swap", "expression_swap", "attribute_manipulation",
        "entire_face_synthesis", "real"};
    return names;
}

struct SampleProvenance {
    uint64_t seed = 0;
    std::vector<std::string> prompt_hashes;
    std::vector<ConceptId> dropped_concepts;
};

struct Sample {
    std::string id;
    TaskTag task = TaskTag::DET;
    std::string image_ref;
    std::string question;
    std::optional<Box> box_prompt;           // B_* only (pixel coords)
    int image_width = 0, image_height = 0;   // for box/mask validation
    std::string answer;
    std::vector<RleMask> masks;              // Loc./AGE only
    std::optional<std::string> label;        // DET: "real"|"fake"
    std::optional<std::string> forgery_type; // CLS
    SampleProvenance provenance;
};

// Versioned bank of question paraphrases per task; {region} and {box} are
// substituted for region-/box-level tasks.
struct QuestionBank {
    int version = 0;
    std::map<std::string, std::vector<std::string>> templates;  // task name -> texts

    static QuestionBank from_json(const std::string& text) {
        nlohmann::json j = nlohmann::json::parse(text);
        QuestionBank bank;
        bank.version = j.at("version").get<int>();
        for (const auto& [task, arr] : j.at("templates").items()) {
            task_tag_from_string(task);  // validate key
            auto qs = arr.get<std::vector<std::string>>();
            if (qs.size() < 5)
                throw make_error("BadTemplateBank",
                                 "task " + task + " needs >= 5 paraphrases");
            bank.templates[task] = std::move(qs);
        }
        for (const auto& [tag, name] : task_tag_names())
            if (!bank.templates.count(name))
                throw make_error("BadTemplateBank", "missing task " + name);
        return bank;
    }
};

inline std::string replace_all_str(std::string s, const std::string& from,
                                   const std::string& to) {
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

// Seeded template choice: stable in (bank version, task, sample id, seed).
inline std::string pick_question(const QuestionBank& bank, TaskTag task,
                                 const std::string& sample_id, uint64_t seed,
                                 const std::string& region_name = "",
                                 const std::optional<Box>& box = std::nullopt) {
    const std::string name = task_tag_to_string(task);
    const auto& qs = bank.templates.at(name);
    uint64_t h = fnv1a(std::to_string(bank.version) + "|" + name + "|" +
                       sample_id + "|" + std::to_string(seed));
    std::string q = qs[h % qs.size()];
    if (task_is_region(task)) {
        if (region_name.empty())
            throw make_error("InconsistentInputs", "region task needs a region name");
        q = replace_all_str(q, "{region}", region_name);
    }
    if (task_has_box(task)) {
        if (!box)
            throw make_error("InconsistentInputs", "box task needs a box");
        q = replace_all_str(q, "{box}", "<bbox>");
    }
    return q;
}

struct MakeSampleInputs {
    std::string id;
    std::string image_ref;
    int width = 0, height = 0;
    uint64_t seed = 0;
    // task-dependent payloads
    std::optional<std::string> label;         // DET
    std::optional<std::string> forgery_type;  // CLS
    std::string region_name;                  // R_*
    std::optional<Box> box;                   // B_*
    std::string answer_text;                  // TOE/DET/CLS final answer body
    std::vector<RleMask> masks;               // Loc.
    std::optional<InterleavedAnswer> age;     // AGE (already interleaved)
    SampleProvenance provenance;
};

inline Sample make_sample(TaskTag task, const QuestionBank& bank,
                          const MakeSampleInputs& in) {
    Sample s;
    s.id = in.id;
    s.task = task;
    s.image_ref = in.image_ref;
    s.image_width = in.width;
    s.image_height = in.height;
    s.provenance = in.provenance;
    s.provenance.seed = in.seed;
    s.question = pick_question(bank, task, in.id, in.seed, in.region_name, in.box);
    if (task_has_box(task)) {
        if (!in.box) throw make_error("InconsistentInputs", "missing box prompt");
        s.box_prompt = in.box;
    } else if (in.box) {
        throw make_error("InconsistentInputs", "box given for non-box task");
    }
    switch (task) {
        case TaskTag::DET:
            if (!in.label || (*in.label != "real" && *in.label != "fake"))
                throw make_error("InconsistentInputs", "DET needs label real|fake");
            s.label = in.label;
            s.answer = in.answer_text.empty()
                           ? (*in.label == "real"
                                  ? "The face in this image is real."
                                  : "The face in this image is fake.")
                           : in.answer_text;
            break;
        case TaskTag::CLS: {
            if (!in.forgery_type)
                throw make_error("InconsistentInputs", "CLS needs forgery_type");
            const auto& types = forgery_type_names();
            if (std::find(types.begin(), types.end(), *in.forgery_type) ==
                types.end())
                throw make_error("InconsistentInputs",
                                 "unknown forgery_type " + *in.forgery_type);
            s.forgery_type = in.forgery_type;
            s.answer = in.answer_text.empty()
                           ? "This image was produced by " +
                                 replace_all_str(*in.forgery_type, "_", " ") + "."
                           : in.answer_text;
            break;
        }
        case TaskTag::I_LOC:
        case TaskTag::R_LOC:
        case TaskTag::B_LOC: {
            if (in.masks.empty())
                throw make_error("InconsistentInputs", "Loc. needs masks");
            s.masks = in.masks;
            std::string body = in.answer_text.empty()
                                   ? "The tampered area is"
                                   : in.answer_text;
            s.answer = body;
            for (size_t i = 0; i < s.masks.size(); ++i) s.answer += " [SEG]";
            break;
        }
        case TaskTag::I_TOE:
        case TaskTag::R_TOE:
        case TaskTag::B_TOE:
            if (in.answer_text.empty())
                throw make_error("InconsistentInputs", "TOE needs answer text");
            if (in.answer_text.find("[SEG]") != std::string::npos)
                throw make_error("InconsistentInputs", "TOE answer must not ground masks");
            s.answer = in.answer_text;
            break;
        case TaskTag::I_AGE:
        case TaskTag::R_AGE:
        case TaskTag::B_AGE:
            if (!in.age || in.age->masks.empty())
                throw make_error("InconsistentInputs", "AGE needs an interleaved answer");
            s.answer = in.age->text;
            s.masks = in.age->masks;
            break;
    }
    return s;
}

// Structural checks shared by assembly and ingest; report-based so a batch
// run can count rejects instead of aborting.
inline ValidationReport validate_sample(const Sample& s) {
    ValidationReport report;
    if (s.id.empty()) report.add("EmptyId", "sample id must be non-empty");
    if (task_has_box(s.task) != s.box_prompt.has_value())
        report.add("BoxPresenceMismatch",
                   "box prompt iff B_* task (" + s.id + ")");
    if (s.box_prompt) {
        const Box& b = *s.box_prompt;
        if (b.x0 < 0 || b.y0 < 0 || b.x1 > s.image_width ||
            b.y1 > s.image_height || b.x0 >= b.x1 || b.y0 >= b.y1)
            report.add("BoxOutOfBounds", "box outside image (" + s.id + ")");
    }
    const size_t segs = count_occurrences(s.answer, "[SEG]");
    if (task_has_masks(s.task)) {
        if (segs != s.masks.size())
            report.add("SegMaskCountMismatch",
                       std::to_string(segs) + " [SEG] vs " +
                           std::to_string(s.masks.size()) + " masks (" + s.id + ")");
        for (const auto& m : s.masks)
            if (m.width != s.image_width || m.height != s.image_height)
                report.add("DimensionMismatch",
                           "mask dims differ from image (" + s.id + ")");
    } else if (!s.masks.empty() || segs != 0) {
        report.add("UnexpectedMasks", "mask payload on non-mask task (" + s.id + ")");
    }
    if (count_occurrences(s.answer, "<p>") != count_occurrences(s.answer, "</p>"))
        report.add("UnbalancedPhraseTags", "unbalanced <p>/</p> (" + s.id + ")");
    if (s.task == TaskTag::DET &&
        (!s.label || (*s.label != "real" && *s.label != "fake")))
        report.add("BadLabel", "DET label must be real|fake (" + s.id + ")");
    if (s.task == TaskTag::CLS) {
        const auto& types = forgery_type_names();
        if (!s.forgery_type ||
            std::find(types.begin(), types.end(), *s.forgery_type) == types.end())
            report.add("BadForgeryType", "CLS forgery_type invalid (" + s.id + ")");
    }
    return report;
}

inline double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

inline nlohmann::json sample_to_json(const Sample& s) {
    nlohmann::json j = {
        {"id", s.id},
        {"task", task_tag_to_string(s.task)},
        {"image", s.image_ref},
        {"width", s.image_width},
        {"height", s.image_height},
        {"question", s.question},
        {"answer", s.answer},
    };
    if (s.box_prompt) {
        const Box& b = *s.box_prompt;
        j["box"] = {b.x0, b.y0, b.x1, b.y1};
        // normalized form is authoritative for resolution independence
        j["box_norm"] = {round3(double(b.x0) / s.image_width),
                         round3(double(b.y0) / s.image_height),
                         round3(double(b.x1) / s.image_width),
                         round3(double(b.y1) / s.image_height)};
    }
    if (!s.masks.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& m : s.masks) arr.push_back(rle_to_json(m));
        j["masks"] = std::move(arr);
    }
    if (s.label) j["label"] = *s.label;
    if (s.forgery_type) j["forgery_type"] = *s.forgery_type;
    j["provenance"] = {{"seed", s.provenance.seed},
                       {"prompt_hashes", s.provenance.prompt_hashes},
                       {"dropped_concepts", s.provenance.dropped_concepts}};
    return j;
}

inline Sample sample_from_json(const nlohmann::json& j) {
    Sample s;
    s.id = j.at("id").get<std::string>();
    s.task = task_tag_from_string(j.at("task").get<std::string>());
    s.image_ref = j.at("image").get<std::string>();
    s.image_width = j.value("width", 0);
    s.image_height = j.value("height", 0);
    s.question = j.at("question").get<std::string>();
    s.answer = j.at("answer").get<std::string>();
    if (j.contains("box")) {
        auto b = j.at("box").get<std::vector<int>>();
        if (b.size() != 4) throw make_error("ParseError", "box must have 4 ints");
        s.box_prompt = Box{b[0], b[1], b[2], b[3]};
    }
    if (j.contains("masks"))
        for (const auto& mj : j.at("masks")) s.masks.push_back(rle_from_json(mj));
    if (j.contains("label")) s.label = j.at("label").get<std::string>();
    if (j.contains("forgery_type"))
        s.forgery_type = j.at("forgery_type").get<std::string>();
    if (j.contains("provenance")) {
        const auto& p = j.at("provenance");
        s.provenance.seed = p.value("seed", 0ULL);
        if (p.contains("prompt_hashes"))
            s.provenance.prompt_hashes =
                p.at("prompt_hashes").get<std::vector<std::string>>();
        if (p.contains("dropped_concepts"))
            s.provenance.dropped_concepts =
                p.at("dropped_concepts").get<std::vector<std::string>>();
    }
    return s;
}

}  // namespace fifa
