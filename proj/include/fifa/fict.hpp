#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fifa/error.hpp"

namespace fifa {

using ConceptId = std::string;  // lowercase slug, [a-z0-9_]+

struct ConceptNode {
    ConceptId id;
    std::string display_name;
    int level = 0;  // 1..8, root is 1
    bool atomic = false;
    std::vector<ConceptId> children;          // manifest order, empty iff atomic
    std::optional<std::string> geometry_rule; // present iff atomic
};

// Immutable after load; safe to share read-only across pipeline workers.
struct ConceptTree {
    ConceptId root;
    std::vector<ConceptId> order;  // manifest order, drives deterministic walks
    std::map<ConceptId, ConceptNode> nodes;
    int atomic_count = 0;
    int parent_count = 0;

    const ConceptNode& node(const ConceptId& id) const {
        auto it = nodes.find(id);
        if (it == nodes.end())
            throw make_error("UnknownConcept", "no concept '" + id + "'");
        return it->second;
    }
    bool has(const ConceptId& id) const { return nodes.count(id) != 0; }
};

struct ValidationEntry {
    std::string code;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationEntry> entries;

    bool ok() const { return entries.empty(); }
    void add(std::string code, std::string detail) {
        entries.push_back({std::move(code), std::move(detail)});
    }
    bool has(const std::string& code) const {
        for (const auto& e : entries)
            if (e.code == code) return true;
        return false;
    }
};

inline bool valid_slug(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'))
            return false;
    return true;
}

// Lowercase a display name and collapse non-alphanumerics to '_'. Stable join
// key between manifest, geometry rules, and model-output parsing.
inline std::string slug_from_name(const std::string& name) {
    std::string out;
    bool pending = false;
    for (char raw : name) {
        char c = raw;
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            if (pending && !out.empty()) out.push_back('_');
            pending = false;
            out.push_back(c);
        } else {
            pending = true;
        }
    }
    return out;
}

namespace detail {

inline void check_acyclic_and_reachable(const ConceptTree& t) {
    // Iterative DFS from the root; 0 unvisited, 1 on stack, 2 done.
    std::map<ConceptId, int> state;
    std::vector<std::pair<ConceptId, size_t>> stack{{t.root, 0}};
    while (!stack.empty()) {
        auto& [id, next] = stack.back();
        const ConceptNode& n = t.node(id);
        if (next == 0) state[id] = 1;
        if (next < n.children.size()) {
            const ConceptId& c = n.children[next++];
            if (!t.has(c))
                throw make_error("UnknownChild", id + " -> " + c);
            int s = state.count(c) ? state.at(c) : 0;
            if (s == 1) throw make_error("CycleDetected", id + " -> " + c);
            if (s == 0) stack.push_back({c, 0});
        } else {
            state[id] = 2;
            stack.pop_back();
        }
    }
    for (const auto& [id, n] : t.nodes)
        if (!state.count(id))
            throw make_error("UnknownChild", "unreachable node '" + id + "'");
}

}  // namespace detail

// Parse and validate a concept-tree manifest.
// Throws: DuplicateId, CycleDetected, LevelViolation, MissingGeometryRule,
// UnknownChild, InvalidManifest.
inline ConceptTree load_manifest(const std::string& manifest_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(manifest_text);
    } catch (const nlohmann::json::exception& e) {
        throw make_error("InvalidManifest", e.what());
    }
    if (!j.is_object() || !j.contains("root") || !j.contains("nodes"))
        throw make_error("InvalidManifest", "expected {root, nodes}");

    ConceptTree t;
    t.root = j.at("root").get<std::string>();
    for (const auto& nj : j.at("nodes")) {
        ConceptNode n;
        n.id = nj.at("id").get<std::string>();
        n.display_name = nj.at("name").get<std::string>();
        n.level = nj.at("level").get<int>();
        std::string kind = nj.at("kind").get<std::string>();
        if (kind != "atomic" && kind != "parent")
            throw make_error("InvalidManifest", "bad kind '" + kind + "'");
        n.atomic = kind == "atomic";
        if (nj.contains("children"))
            n.children = nj.at("children").get<std::vector<std::string>>();
        if (nj.contains("geometry_rule") && !nj.at("geometry_rule").is_null())
            n.geometry_rule = nj.at("geometry_rule").get<std::string>();

        if (!valid_slug(n.id))
            throw make_error("InvalidManifest", "bad slug '" + n.id + "'");
        if (t.nodes.count(n.id))
            throw make_error("DuplicateId", n.id);
        if (n.level < 1 || n.level > 8)
            throw make_error("LevelViolation", n.id + " has level out of 1..8");
        if (n.atomic != n.children.empty())
            throw make_error("InvalidManifest",
                             n.id + ": atomic iff children empty");
        if (n.atomic && !n.geometry_rule)
            throw make_error("MissingGeometryRule", n.id);
        if (!n.atomic && n.geometry_rule)
            throw make_error("InvalidManifest",
                             n.id + ": parent carries a geometry rule");
        t.order.push_back(n.id);
        t.nodes.emplace(n.id, std::move(n));
    }
    if (!t.has(t.root))
        throw make_error("InvalidManifest", "root '" + t.root + "' not defined");
    if (t.node(t.root).level != 1)
        throw make_error("LevelViolation", "root must have level 1");

    std::set<ConceptId> childed;
    for (const auto& [id, n] : t.nodes) {
        for (const auto& c : n.children) {
            if (c == id) throw make_error("CycleDetected", id + " lists itself");
            if (!t.has(c)) throw make_error("UnknownChild", id + " -> " + c);
            if (t.node(c).level != n.level + 1)
                throw make_error("LevelViolation", id + " -> " + c);
            if (c == t.root)
                throw make_error("CycleDetected", "root listed as a child");
            if (!childed.insert(c).second)
                throw make_error("InvalidManifest", c + " has multiple parents");
        }
    }
    detail::check_acyclic_and_reachable(t);

    for (const auto& id : t.order)
        (t.node(id).atomic ? t.atomic_count : t.parent_count)++;
    return t;
}

inline std::string serialize_manifest(const ConceptTree& t) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& id : t.order) {
        const ConceptNode& n = t.node(id);
        nlohmann::json nj{{"id", n.id},
                          {"name", n.display_name},
                          {"level", n.level},
                          {"kind", n.atomic ? "atomic" : "parent"},
                          {"children", n.children}};
        nj["geometry_rule"] =
            n.geometry_rule ? nlohmann::json(*n.geometry_rule) : nlohmann::json();
        nodes.push_back(std::move(nj));
    }
    return nlohmann::json{{"root", t.root}, {"nodes", nodes}}.dump(1);
}

// Depth-first leaf order under `id`; for an atomic concept returns {id}.
inline std::vector<ConceptId> atomic_descendants(const ConceptTree& t,
                                                 const ConceptId& id) {
    const ConceptNode& n = t.node(id);
    if (n.atomic) return {id};
    std::vector<ConceptId> out;
    for (const auto& c : n.children) {
        auto sub = atomic_descendants(t, c);
        out.insert(out.end(), sub.begin(), sub.end());
    }
    return out;
}

// Report-based validation for hand-built trees; empty report <=> valid.
inline ValidationReport validate_tree(const ConceptTree& t,
                                      std::optional<int> expected_atomic = {},
                                      std::optional<int> expected_parent = {}) {
    ValidationReport r;
    int atoms = 0, parents = 0;
    std::set<ConceptId> seen;
    for (const auto& [id, n] : t.nodes) {
        (n.atomic ? atoms : parents)++;
        if (!valid_slug(id)) r.add("BadSlug", id);
        if (n.level < 1 || n.level > 8) r.add("LevelViolation", id);
        if (n.atomic != n.children.empty()) r.add("KindMismatch", id);
        if (n.atomic && !n.geometry_rule) r.add("MissingGeometryRule", id);
        if (!n.atomic && n.geometry_rule) r.add("UnexpectedGeometryRule", id);
        for (const auto& c : n.children) {
            if (!t.has(c)) {
                r.add("UnknownChild", id + " -> " + c);
            } else if (t.node(c).level != n.level + 1) {
                r.add("LevelViolation", id + " -> " + c);
            }
        }
    }
    if (!t.has(t.root)) {
        r.add("UnknownRoot", t.root);
    } else {
        if (t.node(t.root).display_name != "whole facial image")
            r.add("RootNameMismatch", t.node(t.root).display_name);
        try {
            detail::check_acyclic_and_reachable(t);
        } catch (const Error& e) {
            r.add(e.code(), e.what());
        }
    }
    if (t.atomic_count != atoms || t.parent_count != parents)
        r.add("CountMismatch", "stored counts disagree with node kinds");
    if (expected_atomic && atoms != *expected_atomic)
        r.add("AtomicCountMismatch",
              std::to_string(atoms) + " != " + std::to_string(*expected_atomic));
    if (expected_parent && parents != *expected_parent)
        r.add("ParentCountMismatch",
              std::to_string(parents) + " != " + std::to_string(*expected_parent));
    return r;
}

}  // namespace fifa
