#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fifa/error.hpp"
#include "fifa/fict.hpp"
#include "fifa/mask.hpp"

namespace fifa {

// Dense facial landmarks in pixel coordinates.
struct LandmarkSet {
    std::vector<std::pair<double, double>> points;
    int expected_count = 478;

    void validate() const {
        if (static_cast<int>(points.size()) != expected_count)
            throw make_error("LandmarkCountMismatch",
                             std::to_string(points.size()) + " points, expected " +
                                 std::to_string(expected_count));
        for (const auto& [x, y] : points)
            if (!std::isfinite(x) || !std::isfinite(y))
                throw make_error("LandmarkNotFinite", "non-finite coordinate");
    }
};

// Landmarks ingest: {"points": [[x,y],...]}. Coordinates may be normalized to
// [0,1]; pass the canvas size to convert with round-half-up.
inline LandmarkSet load_landmarks(const std::string& json_text,
                                  int expected_count = 478) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    LandmarkSet lm;
    lm.expected_count = expected_count;
    for (const auto& p : j.at("points"))
        lm.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    lm.validate();
    return lm;
}

inline LandmarkSet denormalize_landmarks(const LandmarkSet& lm, int width,
                                         int height) {
    LandmarkSet out = lm;
    for (auto& [x, y] : out.points) {
        x = std::floor(x * width + 0.5);
        y = std::floor(y * height + 0.5);
    }
    return out;
}

// Face-parsing label map, one class index per pixel.
struct ParsingMap {
    int width = 0, height = 0;
    int num_classes = 19;
    std::vector<int> labels;  // row-major

    int label(int x, int y) const {
        return labels[static_cast<size_t>(y) * width + x];
    }
    void validate() const {
        if (labels.size() != static_cast<size_t>(width) * height)
            throw make_error("DimensionMismatch", "label buffer size");
        for (int l : labels)
            if (l < 0 || l >= num_classes)
                throw make_error("BadLabel", "label " + std::to_string(l) +
                                                 " out of range");
    }
};

// JSON grid ingest: {"num_classes": n, "labels": [[row0...],[row1...],...]}.
inline ParsingMap load_parsing_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    ParsingMap pm;
    pm.num_classes = j.value("num_classes", 19);
    const auto& rows = j.at("labels");
    pm.height = static_cast<int>(rows.size());
    for (const auto& row : rows) {
        if (pm.width == 0) pm.width = static_cast<int>(row.size());
        if (static_cast<int>(row.size()) != pm.width)
            throw make_error("DimensionMismatch", "ragged label rows");
        for (const auto& v : row) pm.labels.push_back(v.get<int>());
    }
    pm.validate();
    return pm;
}

// Rule expression over POLY / CLASS / half-plane primitives combined with
// AND / OR / DIFF. Encodes the per-concept region derivation procedure.
struct RuleExpr {
    enum class Op { Poly, Class, LeftHalf, RightHalf, Full, And, Or, Diff };
    Op op = Op::Full;
    std::vector<int> landmarks;            // Poly
    std::set<int> labels;                  // Class
    std::vector<std::shared_ptr<RuleExpr>> args;  // And/Or/Diff
};

struct GeometryRule {
    std::string id;
    RuleExpr expr;
    bool approx = false;  // reconstruction not directly given by the source
};

using GeometryRuleSet = std::map<std::string, GeometryRule>;

namespace detail {

inline RuleExpr parse_rule_expr(const nlohmann::json& j) {
    RuleExpr e;
    std::string op = j.at("op").get<std::string>();
    if (op == "poly") {
        e.op = RuleExpr::Op::Poly;
        e.landmarks = j.at("landmarks").get<std::vector<int>>();
        if (e.landmarks.size() < 3)
            throw make_error("DegeneratePolygon", "poly rule with <3 landmarks");
    } else if (op == "class") {
        e.op = RuleExpr::Op::Class;
        for (int l : j.at("labels").get<std::vector<int>>()) e.labels.insert(l);
    } else if (op == "left_half") {
        e.op = RuleExpr::Op::LeftHalf;
    } else if (op == "right_half") {
        e.op = RuleExpr::Op::RightHalf;
    } else if (op == "full") {
        e.op = RuleExpr::Op::Full;
    } else if (op == "and" || op == "or" || op == "diff") {
        e.op = op == "and" ? RuleExpr::Op::And
                           : (op == "or" ? RuleExpr::Op::Or : RuleExpr::Op::Diff);
        for (const auto& a : j.at("args"))
            e.args.push_back(std::make_shared<RuleExpr>(parse_rule_expr(a)));
        if (e.args.empty())
            throw make_error("InvalidRule", "combinator with no args");
        if (e.op == RuleExpr::Op::Diff && e.args.size() != 2)
            throw make_error("InvalidRule", "diff takes exactly 2 args");
    } else {
        throw make_error("InvalidRule", "unknown op '" + op + "'");
    }
    return e;
}

}  // namespace detail

// Rule file: {"rules": {slug: {"expr": <tree>, "approx": bool}}}.
inline GeometryRuleSet load_rules(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    GeometryRuleSet rules;
    for (const auto& [slug, rj] : j.at("rules").items()) {
        GeometryRule r;
        r.id = slug;
        r.expr = detail::parse_rule_expr(rj.at("expr"));
        r.approx = rj.value("approx", false);
        rules.emplace(slug, std::move(r));
    }
    return rules;
}

inline BitMask eval_expr(const RuleExpr& e, const LandmarkSet& lm,
                         const ParsingMap& pm) {
    const int w = pm.width, h = pm.height;
    switch (e.op) {
        case RuleExpr::Op::Poly: {
            std::vector<std::pair<double, double>> pts;
            for (int idx : e.landmarks) {
                if (idx < 0 || idx >= static_cast<int>(lm.points.size()))
                    throw make_error("BadIndex",
                                     "landmark " + std::to_string(idx));
                pts.push_back(lm.points[idx]);
            }
            return rasterize_polygon(pts, w, h);
        }
        case RuleExpr::Op::Class: {
            for (int l : e.labels)
                if (l < 0 || l >= pm.num_classes)
                    throw make_error("BadLabel", "class " + std::to_string(l));
            BitMask m(w, h);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    if (e.labels.count(pm.label(x, y))) m.set(x, y);
            return m;
        }
        case RuleExpr::Op::LeftHalf: {
            // Image-space left (viewer's left): x < width/2.
            BitMask m(w, h);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w / 2; ++x) m.set(x, y);
            return m;
        }
        case RuleExpr::Op::RightHalf: {
            BitMask m(w, h);
            for (int y = 0; y < h; ++y)
                for (int x = w / 2; x < w; ++x) m.set(x, y);
            return m;
        }
        case RuleExpr::Op::Full:
            return BitMask(w, h, 1);
        case RuleExpr::Op::And:
        case RuleExpr::Op::Or: {
            BitMask acc = eval_expr(*e.args[0], lm, pm);
            for (size_t i = 1; i < e.args.size(); ++i)
                acc = set_op(acc, eval_expr(*e.args[i], lm, pm),
                             e.op == RuleExpr::Op::And ? SetOp::Intersect
                                                       : SetOp::Union);
            return acc;
        }
        case RuleExpr::Op::Diff:
            return set_op(eval_expr(*e.args[0], lm, pm),
                          eval_expr(*e.args[1], lm, pm), SetOp::Difference);
    }
    throw make_error("InvalidRule", "unreachable");
}

inline BitMask eval_rule(const GeometryRule& rule, const LandmarkSet& lm,
                         const ParsingMap& pm) {
    return eval_expr(rule.expr, lm, pm);
}

// Region mask of one concept. Atomic -> geometry rule; parent -> union over
// atomic descendants; root -> full canvas (the whole facial image).
inline BitMask region_mask(const ConceptTree& tree, const ConceptId& id,
                           const GeometryRuleSet& rules, const LandmarkSet& lm,
                           const ParsingMap& pm) {
    if (id == tree.root) return BitMask(pm.width, pm.height, 1);
    const ConceptNode& n = tree.node(id);
    if (n.atomic) {
        auto it = rules.find(*n.geometry_rule);
        if (it == rules.end())
            throw make_error("MissingRule", *n.geometry_rule);
        return eval_rule(it->second, lm, pm);
    }
    BitMask acc(pm.width, pm.height);
    for (const auto& leaf : atomic_descendants(tree, id))
        acc = set_op(acc, region_mask(tree, leaf, rules, lm, pm), SetOp::Union);
    return acc;
}

// One mask per concept, keyed by slug. Parents are folded from memoized
// children so each atomic rule is evaluated once.
inline std::map<ConceptId, BitMask> all_region_masks(const ConceptTree& tree,
                                                     const GeometryRuleSet& rules,
                                                     const LandmarkSet& lm,
                                                     const ParsingMap& pm) {
    std::vector<std::string> missing;
    for (const auto& id : tree.order) {
        const ConceptNode& n = tree.node(id);
        if (n.atomic && !rules.count(*n.geometry_rule))
            missing.push_back(*n.geometry_rule);
    }
    if (!missing.empty()) {
        std::string all;
        for (const auto& m : missing) all += (all.empty() ? "" : ", ") + m;
        throw make_error("MissingRule", all);
    }

    std::map<ConceptId, BitMask> out;
    // Deepest levels first so parents fold over already-computed children.
    std::vector<ConceptId> ids = tree.order;
    std::stable_sort(ids.begin(), ids.end(),
                     [&](const ConceptId& a, const ConceptId& b) {
                         return tree.node(a).level > tree.node(b).level;
                     });
    for (const auto& id : ids) {
        const ConceptNode& n = tree.node(id);
        if (id == tree.root) {
            out.emplace(id, BitMask(pm.width, pm.height, 1));
        } else if (n.atomic) {
            out.emplace(id, eval_rule(rules.at(*n.geometry_rule), lm, pm));
        } else {
            BitMask acc(pm.width, pm.height);
            for (const auto& c : n.children)
                acc = set_op(acc, out.at(c), SetOp::Union);
            out.emplace(id, std::move(acc));
        }
    }
    return out;
}

}  // namespace fifa
