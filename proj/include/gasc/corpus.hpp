#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace gasc {

struct Document {
    std::string doc_id;
    long long time_value = 0;  // signed; negative = BCE
    std::string genre;
    std::vector<std::string> lemmas;
};

enum class CorpusFormat { Jsonl, Tsv };

struct IngestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// counts per skip reason, printed to stderr after ingestion
struct IngestReport {
    std::size_t parsed = 0;
    std::map<std::string, std::size_t> skipped;

    std::size_t total_skipped() const {
        std::size_t n = 0;
        for (auto& [_, c] : skipped) n += c;
        return n;
    }

    void print(std::ostream& os) const {
        os << "ingested " << parsed << " documents";
        if (!skipped.empty()) {
            os << ", skipped " << total_skipped() << ":";
            for (auto& [reason, c] : skipped) os << " " << reason << "=" << c;
        }
        os << "\n";
    }
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

inline std::optional<Document> parse_jsonl_line(const std::string& line, std::size_t lineno,
                                                IngestReport& report) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
        throw IngestError("malformed JSON at line " + std::to_string(lineno));
    }
    if (!j.contains("doc_id") || !j.contains("lemmas")) {
        throw IngestError("record missing doc_id/lemmas at line " + std::to_string(lineno));
    }
    if (!j.contains("time") || j["time"].is_null()) {
        ++report.skipped["missing_time"];
        return std::nullopt;
    }
    if (!j.contains("genre") || j["genre"].is_null() ||
        (j["genre"].is_string() && j["genre"].get<std::string>().empty())) {
        ++report.skipped["missing_genre"];
        return std::nullopt;
    }
    Document d;
    try {
        d.doc_id = j["doc_id"].get<std::string>();
        d.time_value = j["time"].get<long long>();
        d.genre = j["genre"].get<std::string>();
        d.lemmas = j["lemmas"].get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception&) {
        throw IngestError("malformed record at line " + std::to_string(lineno));
    }
    if (d.lemmas.empty()) {
        ++report.skipped["empty_lemmas"];
        return std::nullopt;
    }
    return d;
}

inline std::optional<Document> parse_tsv_line(const std::string& line, std::size_t lineno,
                                              IngestReport& report) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    if (fields.size() != 4)
        throw IngestError("expected 4 tab-separated fields at line " + std::to_string(lineno));
    Document d;
    d.doc_id = fields[0];
    try {
        std::size_t pos = 0;
        d.time_value = std::stoll(fields[1], &pos);
        if (pos != fields[1].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
        throw IngestError("bad time value at line " + std::to_string(lineno));
    }
    d.genre = fields[2];
    if (d.genre.empty()) {
        ++report.skipped["missing_genre"];
        return std::nullopt;
    }
    d.lemmas = split_ws(fields[3]);
    if (d.lemmas.empty()) {
        ++report.skipped["empty_lemmas"];
        return std::nullopt;
    }
    return d;
}

}  // namespace detail

inline std::vector<Document> ingest(const std::filesystem::path& path, CorpusFormat format,
                                    IngestReport* report_out = nullptr) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path.string());
    IngestReport report;
    std::vector<Document> docs;
    std::unordered_map<std::string, std::size_t> seen_ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto d = (format == CorpusFormat::Jsonl)
                     ? detail::parse_jsonl_line(line, lineno, report)
                     : detail::parse_tsv_line(line, lineno, report);
        if (!d) continue;
        if (seen_ids.count(d->doc_id))
            throw IngestError("duplicate doc_id '" + d->doc_id + "' at line " +
                              std::to_string(lineno));
        seen_ids[d->doc_id] = lineno;
        docs.push_back(std::move(*d));
        ++report.parsed;
    }
    if (lineno == 0) throw IngestError("empty file: " + path.string());
    if (docs.empty()) throw IngestError("no valid documents in " + path.string());
    if (report_out) *report_out = report;
    else report.print(std::cerr);
    return docs;
}

// Half-open bins [e_i, e_{i+1}); the last bin includes its right edge.
struct TimeBinning {
    std::vector<long long> edges;

    int bin_count() const { return static_cast<int>(edges.size()) - 1; }

    // -1 if outside all bins
    int bin_of(long long t) const {
        if (edges.size() < 2) return -1;
        if (t < edges.front() || t > edges.back()) return -1;
        if (t == edges.back()) return bin_count() - 1;
        auto it = std::upper_bound(edges.begin(), edges.end(), t);
        return static_cast<int>(it - edges.begin()) - 1;
    }

    static TimeBinning from_edges(std::vector<long long> e) {
        if (e.size() < 2) throw std::invalid_argument("need at least two bin edges");
        for (std::size_t i = 1; i < e.size(); ++i)
            if (e[i] <= e[i - 1]) throw std::invalid_argument("bin edges must be strictly increasing");
        return TimeBinning{std::move(e)};
    }
};

inline std::vector<int> assign_bins(const std::vector<Document>& docs, const TimeBinning& binning) {
    std::vector<int> bins(docs.size());
    std::vector<std::string> offenders;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        bins[i] = binning.bin_of(docs[i].time_value);
        if (bins[i] < 0) offenders.push_back(docs[i].doc_id);
    }
    if (!offenders.empty()) {
        std::string msg = "documents outside all time bins:";
        for (auto& id : offenders) msg += " " + id;
        throw std::invalid_argument(msg);
    }
    return bins;
}

// genre label <-> index; SCAN mode collapses everything to one index
struct GenreMap {
    std::unordered_map<std::string, int> index;
    std::vector<std::string> label;

    int size() const { return static_cast<int>(label.size()); }

    int of(const std::string& g) const {
        auto it = index.find(g);
        if (it == index.end()) throw std::invalid_argument("unknown genre: " + g);
        return it->second;
    }

    static GenreMap build(const std::vector<Document>& docs, bool collapse = false) {
        GenreMap m;
        if (collapse) {
            m.label = {"all"};
            for (const auto& d : docs) m.index.emplace(d.genre, 0);
            m.index.emplace("all", 0);
            return m;
        }
        std::vector<std::string> labels;
        for (const auto& d : docs) labels.push_back(d.genre);
        std::sort(labels.begin(), labels.end());
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
        m.label = labels;
        for (std::size_t i = 0; i < labels.size(); ++i) m.index[labels[i]] = static_cast<int>(i);
        return m;
    }
};

// snippet with context still as lemma strings, before vocabulary indexing
struct RawSnippet {
    int time_bin = 0;
    int genre = 0;
    std::vector<std::string> context;
    std::string doc_id;
};

struct Snippet {
    std::int64_t snippet_id = 0;
    int time_bin = 0;
    int genre = 0;
    std::vector<int> context;  // vocabulary indices, bag semantics
    std::string doc_id;
};

// One snippet per occurrence of target_lemma: up to W lemmas each side,
// truncated at document boundaries, target occurrences excluded everywhere.
inline std::vector<RawSnippet> extract_snippets(const std::vector<Document>& docs,
                                                const std::vector<int>& bin_assignment,
                                                const GenreMap& genres,
                                                const std::string& target_lemma, int window) {
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    if (target_lemma.empty()) throw std::invalid_argument("target lemma must be non-empty");
    if (bin_assignment.size() != docs.size())
        throw std::invalid_argument("bin assignment size mismatch");
    std::vector<RawSnippet> out;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const auto& lem = docs[d].lemmas;
        const int n = static_cast<int>(lem.size());
        for (int i = 0; i < n; ++i) {
            if (lem[i] != target_lemma) continue;
            RawSnippet s;
            s.time_bin = bin_assignment[d];
            s.genre = genres.of(docs[d].genre);
            s.doc_id = docs[d].doc_id;
            for (int j = std::max(0, i - window); j <= std::min(n - 1, i + window); ++j) {
                if (j == i || lem[j] == target_lemma) continue;
                s.context.push_back(lem[j]);
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

struct Vocabulary {
    std::unordered_map<std::string, int> index;
    std::vector<std::string> lemma;

    int size() const { return static_cast<int>(lemma.size()); }

    std::optional<int> lookup(const std::string& l) const {
        auto it = index.find(l);
        if (it == index.end()) return std::nullopt;
        return it->second;
    }
};

struct IndexedCorpus {
    Vocabulary vocab;
    std::vector<Snippet> snippets;
};

// Vocabulary over context lemmas with frequency >= min_count, stable order
// (by descending count, then lexicographic); OOV context lemmas are dropped.
inline IndexedCorpus build_vocabulary(const std::vector<RawSnippet>& raw, int min_count = 2) {
    if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
    std::map<std::string, std::size_t> counts;
    for (const auto& s : raw)
        for (const auto& w : s.context) ++counts[w];
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [w, c] : counts)
        if (c >= static_cast<std::size_t>(min_count)) kept.emplace_back(w, c);
    if (kept.empty()) throw std::invalid_argument("empty vocabulary after min_count filter");
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    IndexedCorpus out;
    for (auto& [w, _] : kept) {
        out.vocab.index[w] = static_cast<int>(out.vocab.lemma.size());
        out.vocab.lemma.push_back(w);
    }
    std::int64_t id = 0;
    for (const auto& s : raw) {
        Snippet t;
        t.snippet_id = id++;
        t.time_bin = s.time_bin;
        t.genre = s.genre;
        t.doc_id = s.doc_id;
        for (const auto& w : s.context)
            if (auto v = out.vocab.lookup(w)) t.context.push_back(*v);
        out.snippets.push_back(std::move(t));
    }
    return out;
}

}  // namespace gasc
