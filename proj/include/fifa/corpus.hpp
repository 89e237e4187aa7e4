#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fifa/error.hpp"
#include "fifa/rng.hpp"
#include "fifa/sample.hpp"

namespace fifa {

inline const std::vector<std::string>& split_names() {
    static const std::vector<std::string> names = {"training", "dev", "test"};
    return names;
}

// Deterministic id->split assignment: fnv1a(id + salt) modulo total weight.
struct SplitSpec {
    int training = 8, dev = 1, test = 1;
    std::string salt;
    std::map<std::string, std::string> explicit_assignments;  // id -> split

    void validate() const {
        if (training < 0 || dev < 0 || test < 0 || training + dev + test <= 0)
            throw make_error("BadSplitSpec", "weights must be non-negative, sum > 0");
        for (const auto& [id, split] : explicit_assignments)
            if (std::find(split_names().begin(), split_names().end(), split) ==
                split_names().end())
                throw make_error("BadSplitSpec", "unknown split '" + split + "'");
    }

    std::string assign(const std::string& id) const {
        auto it = explicit_assignments.find(id);
        if (it != explicit_assignments.end()) return it->second;
        uint64_t bucket = fnv1a(id + "|" + salt) %
                          static_cast<uint64_t>(training + dev + test);
        if (bucket < static_cast<uint64_t>(training)) return "training";
        if (bucket < static_cast<uint64_t>(training + dev)) return "dev";
        return "test";
    }
};

struct CorpusStats {
    // counts[task name][split name]
    std::map<std::string, std::map<std::string, long long>> counts;

    long long split_total(const std::string& split) const {
        long long t = 0;
        for (const auto& [task, per_split] : counts) {
            auto it = per_split.find(split);
            if (it != per_split.end()) t += it->second;
        }
        return t;
    }
    long long total() const {
        long long t = 0;
        for (const auto& s : split_names()) t += split_total(s);
        return t;
    }
    bool operator==(const CorpusStats&) const = default;
};

struct AssembleResult {
    std::vector<std::string> files;  // one per (task, split), sorted
    CorpusStats stats;
};

// Write one JSONL file per (task, split) under out_dir, samples sorted by id
// so input order never changes the bytes on disk.
inline AssembleResult assemble_corpus(std::vector<Sample> samples,
                                      const SplitSpec& spec,
                                      const std::string& out_dir) {
    spec.validate();
    std::sort(samples.begin(), samples.end(),
              [](const Sample& a, const Sample& b) { return a.id < b.id; });
    for (size_t i = 1; i < samples.size(); ++i)
        if (samples[i].id == samples[i - 1].id)
            throw make_error("DuplicateId", samples[i].id);

    std::filesystem::create_directories(out_dir);
    std::map<std::string, std::vector<const Sample*>> buckets;  // file stem -> rows
    AssembleResult result;
    for (const auto& s : samples) {
        const std::string split = spec.assign(s.id);
        const std::string task = task_tag_to_string(s.task);
        buckets[task + "." + split].push_back(&s);
        result.stats.counts[task][split]++;
    }
    for (const auto& [stem, rows] : buckets) {
        const std::string path =
            (std::filesystem::path(out_dir) / (stem + ".jsonl")).string();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw make_error("IoError", "cannot write " + path);
        for (const Sample* s : rows) out << sample_to_json(*s).dump() << "\n";
        result.files.push_back(path);
    }
    return result;
}

// Count samples per (task, split) from JSONL files named <task>.<split>.jsonl.
inline CorpusStats corpus_stats(const std::vector<std::string>& files) {
    CorpusStats stats;
    for (const auto& path : files) {
        const std::string stem = std::filesystem::path(path).stem().string();
        size_t dot = stem.rfind('.');
        if (dot == std::string::npos)
            throw make_error("ParseError", "file name must be <task>.<split>.jsonl: " + path);
        const std::string task = stem.substr(0, dot);
        const std::string split = stem.substr(dot + 1);
        task_tag_from_string(task);
        if (std::find(split_names().begin(), split_names().end(), split) ==
            split_names().end())
            throw make_error("ParseError", "unknown split in file name: " + path);
        std::ifstream in(path, std::ios::binary);
        if (!in) throw make_error("IoError", "cannot read " + path);
        std::string line;
        long long lineno = 0;
        long long n = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object() || !j.contains("id"))
                throw make_error("ParseError", path + ":" + std::to_string(lineno));
            ++n;
        }
        stats.counts[task][split] += n;
    }
    return stats;
}

namespace detail {
inline std::string with_commas(long long v) {
    std::string digits = std::to_string(v);
    std::string out;
    int c = 0;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        if (c && c % 3 == 0) out.push_back(',');
        out.push_back(*it);
        ++c;
    }
    std::reverse(out.begin(), out.end());
    return out;
}
}  // namespace detail

// Aligned text table: rows = tasks (canonical order) + Total,
// columns = Training / Dev. / Test.
inline std::string render_stats_table(const CorpusStats& stats) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Task", "Training", "Dev.", "Test"});
    auto fetch = [&](const std::string& task, const std::string& split) {
        auto it = stats.counts.find(task);
        if (it == stats.counts.end()) return 0LL;
        auto jt = it->second.find(split);
        return jt == it->second.end() ? 0LL : jt->second;
    };
    for (const auto& [tag, name] : task_tag_names())
        rows.push_back({name, detail::with_commas(fetch(name, "training")),
                        detail::with_commas(fetch(name, "dev")),
                        detail::with_commas(fetch(name, "test"))});
    rows.push_back({"Total", detail::with_commas(stats.split_total("training")),
                    detail::with_commas(stats.split_total("dev")),
                    detail::with_commas(stats.split_total("test"))});
    std::vector<size_t> widths(4, 0);
    for (const auto& r : rows)
        for (size_t c = 0; c < 4; ++c) widths[c] = std::max(widths[c], r[c].size());
    std::ostringstream out;
    for (const auto& r : rows) {
        for (size_t c = 0; c < 4; ++c) {
            if (c) out << "  ";
            out << (c == 0 ? std::left : std::right) << std::setw(int(widths[c]))
                << r[c];
        }
        out << "\n";
    }
    return out.str();
}

inline nlohmann::json stats_to_json(const CorpusStats& stats) {
    nlohmann::json tasks = nlohmann::json::object();
    for (const auto& [tag, name] : task_tag_names()) {
        nlohmann::json per = nlohmann::json::object();
        for (const auto& split : split_names()) {
            long long v = 0;
            auto it = stats.counts.find(name);
            if (it != stats.counts.end()) {
                auto jt = it->second.find(split);
                if (jt != it->second.end()) v = jt->second;
            }
            per[split] = v;
        }
        tasks[name] = std::move(per);
    }
    nlohmann::json totals = nlohmann::json::object();
    for (const auto& split : split_names())
        totals[split] = stats.split_total(split);
    totals["all"] = stats.total();
    return {{"tasks", tasks}, {"totals", totals}};
}

}  // namespace fifa
