#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fifa/error.hpp"
#include "fifa/fict.hpp"
#include "fifa/image.hpp"
#include "fifa/mask.hpp"
#include "fifa/rng.hpp"

namespace fifa {

struct ImagePair {
    RgbImage real;
    RgbImage fake;

    void validate() const {
        if (real.width != fake.width || real.height != fake.height)
            throw make_error("DimensionMismatch", "real/fake size differs");
        if (real.data.size() != static_cast<size_t>(real.width) * real.height * 3 ||
            fake.data.size() != static_cast<size_t>(fake.width) * fake.height * 3)
            throw make_error("ChannelMismatch", "images must be 3-channel");
    }
};

enum class GrayMode { MeanAbs, Luma };

// Per-pixel |real - fake| collapsed to one channel. MeanAbs is the default:
// mean of |dR|,|dG|,|dB|. Luma weights 0.299/0.587/0.114.
inline GrayImage diff_grayscale(const ImagePair& pair,
                                GrayMode mode = GrayMode::MeanAbs) {
    pair.validate();
    GrayImage g(pair.real.width, pair.real.height);
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            double dr = std::abs(static_cast<int>(pair.real.channel(x, y, 0)) -
                                 pair.fake.channel(x, y, 0));
            double dg = std::abs(static_cast<int>(pair.real.channel(x, y, 1)) -
                                 pair.fake.channel(x, y, 1));
            double db = std::abs(static_cast<int>(pair.real.channel(x, y, 2)) -
                                 pair.fake.channel(x, y, 2));
            g.at(x, y) = mode == GrayMode::MeanAbs
                             ? (dr + dg + db) / 3.0
                             : 0.299 * dr + 0.587 * dg + 0.114 * db;
        }
    return g;
}

// Keep the brightest `fraction` of pixels. k = ceil(fraction*N); threshold is
// the k-th largest value and every pixel tied with it is kept, so the output
// area is >= k and order-independent.
inline BitMask threshold_top_fraction(const GrayImage& gray, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw make_error("BadFraction", "fraction must be in (0,1]");
    const size_t n = gray.data.size();
    const size_t k = static_cast<size_t>(
        std::ceil(fraction * static_cast<double>(n)));
    std::vector<double> values = gray.data;
    std::nth_element(values.begin(), values.begin() + (k - 1), values.end(),
                     std::greater<>());
    const double threshold = values[k - 1];
    BitMask m(gray.width, gray.height);
    for (size_t i = 0; i < n; ++i)
        if (gray.data[i] >= threshold) m.set_at(i, true);
    return m;
}

// Step-2 thresholds: rank cutoff X, minimum coverage Y, minimum pixels Z.
struct SelectionParams {
    int max_rank = 50;            // X
    double min_coverage = 0.10;   // Y
    long long min_pixels = 50;    // Z
    double top_fraction = 0.05;
    enum class RankPool { Pooled, PerKind };
    RankPool rank_pool = RankPool::Pooled;
    std::vector<ConceptId> default_parents = {
        "whole_facial_image", "foreground", "region_around_head",
        "region_around_face"};

    void validate() const {
        if (!(top_fraction > 0.0 && top_fraction <= 1.0) || max_rank < 1 ||
            min_coverage < 0.0 || min_coverage > 1.0 || min_pixels < 0)
            throw make_error("BadSelectionParams", "out-of-range parameter");
    }
};

struct ConceptArtifactStats {
    ConceptId concept_id;
    bool atomic = false;
    long long region_area = 0;
    long long artifact_pixels = 0;
    double coverage_ratio = 0.0;  // 0 when region_area == 0 (ineligible)
    std::optional<int> rank;      // 1-based, eligible concepts only
    bool selected = false;
    bool selected_by_default = false;
};

// Coverage of the whole-image artifact mask within each concept's region.
inline std::vector<ConceptArtifactStats> coverage_stats(
    const std::map<ConceptId, BitMask>& regions, const BitMask& whole_artifact,
    const ConceptTree& tree) {
    std::vector<ConceptArtifactStats> out;
    for (const auto& [id, region] : regions) {
        if (!region.same_size(whole_artifact))
            throw make_error("DimensionMismatch", "region '" + id + "'");
        ConceptArtifactStats s;
        s.concept_id = id;
        s.atomic = tree.node(id).atomic;
        long long inter = 0;
        for (size_t i = 0; i < region.size(); ++i) {
            if (region.at(i)) {
                ++s.region_area;
                if (whole_artifact.at(i)) ++inter;
            }
        }
        s.artifact_pixels = inter;
        s.coverage_ratio =
            s.region_area > 0
                ? static_cast<double>(inter) / static_cast<double>(s.region_area)
                : 0.0;
        out.push_back(std::move(s));
    }
    return out;
}

struct SelectionResult {
    std::set<ConceptId> atomic;
    std::set<ConceptId> parent;
    std::vector<ConceptArtifactStats> stats;  // with ranks and selection flags
};

// Flag artifact-existing concepts: rank <= X (coverage descending, ties broken
// by slug so input order never matters), coverage >= Y, pixels >= Z. The
// configured default parents are always force-added.
inline SelectionResult select_artifact_concepts(
    std::vector<ConceptArtifactStats> stats, const SelectionParams& params,
    const ConceptTree& tree) {
    params.validate();
    for (const auto& p : params.default_parents)
        if (!tree.has(p)) throw make_error("UnknownDefaultParent", p);

    std::sort(stats.begin(), stats.end(),
              [](const ConceptArtifactStats& a, const ConceptArtifactStats& b) {
                  if (a.coverage_ratio != b.coverage_ratio)
                      return a.coverage_ratio > b.coverage_ratio;
                  return a.concept_id < b.concept_id;
              });

    SelectionResult result;
    int pooled_rank = 0, atomic_rank = 0, parent_rank = 0;
    for (auto& s : stats) {
        s.rank.reset();
        s.selected = false;
        s.selected_by_default = false;
        if (s.region_area <= 0) continue;  // ineligible, no rank
        int rank = params.rank_pool == SelectionParams::RankPool::Pooled
                       ? ++pooled_rank
                       : (s.atomic ? ++atomic_rank : ++parent_rank);
        s.rank = rank;
        s.selected = rank <= params.max_rank &&
                     s.coverage_ratio >= params.min_coverage &&
                     s.artifact_pixels >= params.min_pixels;
    }
    for (auto& s : stats) {
        bool is_default =
            !s.atomic && std::find(params.default_parents.begin(),
                                   params.default_parents.end(),
                                   s.concept_id) != params.default_parents.end();
        if (is_default && !s.selected) {
            s.selected = true;
            s.selected_by_default = true;
        }
        if (s.selected) (s.atomic ? result.atomic : result.parent).insert(s.concept_id);
    }
    result.stats = std::move(stats);
    return result;
}

// Step 5(1): n random boxes with both sides >= min_side_frac of the canvas
// dimension, uniform over valid placements. Draw order per box is
// width, height, x0, y0 from one splitmix64 stream.
inline std::vector<Box> generate_candidate_boxes(uint64_t seed, int n, int width,
                                                 int height,
                                                 double min_side_frac = 0.10) {
    if (n < 1) throw make_error("BadBoxCount", "n must be >= 1");
    if (!(min_side_frac > 0.0 && min_side_frac < 1.0))
        throw make_error("BadBoxParams", "min_side_frac must be in (0,1)");
    SplitMix64 rng(seed);
    const int min_w = std::max(1, static_cast<int>(std::ceil(min_side_frac * width)));
    const int min_h = std::max(1, static_cast<int>(std::ceil(min_side_frac * height)));
    std::vector<Box> boxes;
    boxes.reserve(n);
    for (int i = 0; i < n; ++i) {
        int w = static_cast<int>(rng.range(min_w, width));
        int h = static_cast<int>(rng.range(min_h, height));
        int x0 = static_cast<int>(rng.range(0, width - w));
        int y0 = static_cast<int>(rng.range(0, height - h));
        boxes.push_back(Box{x0, y0, x0 + w, y0 + h});
    }
    return boxes;
}

struct RetainedBox {
    Box box;
    std::vector<ConceptId> concepts;  // encompassed artifact-existing atomics
};

// Step 5(2): keep boxes that encompass at least `min_concepts` artifact-existing
// Atomic Concepts. A concept counts as encompassed when at least
// `encompass_frac` of its regional artifact pixels fall inside the box.
inline std::vector<RetainedBox> retain_boxes(
    const std::vector<Box>& boxes,
    const std::map<ConceptId, BitMask>& selected_atomic_artifacts,
    int min_concepts = 3, double encompass_frac = 0.5) {
    if (min_concepts < 1)
        throw make_error("BadBoxParams", "min_concepts must be >= 1");
    if (!(encompass_frac > 0.0 && encompass_frac <= 1.0))
        throw make_error("BadBoxParams", "encompass_frac must be in (0,1]");
    std::vector<RetainedBox> out;
    for (const Box& b : boxes) {
        RetainedBox rb{b, {}};
        for (const auto& [id, artifact] : selected_atomic_artifacts) {
            long long total = artifact.area();
            if (total <= 0) continue;
            long long inside = intersect_area_with_box(artifact, b);
            if (static_cast<double>(inside) >=
                encompass_frac * static_cast<double>(total))
                rb.concepts.push_back(id);
        }
        if (static_cast<int>(rb.concepts.size()) >= min_concepts)
            out.push_back(std::move(rb));
    }
    return out;
}

}  // namespace fifa
