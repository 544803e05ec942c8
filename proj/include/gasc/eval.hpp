#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gasc/corpus.hpp"

namespace gasc {

struct GoldStandard {
    std::map<std::string, bool> entries;  // lemma -> changed
    std::string language;
    std::string era_pair;
};

// TSV: lemma <TAB> label(0/1)
inline GoldStandard load_gold(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open gold file " + path.string());
    GoldStandard gold;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("gold file: missing tab at line " + std::to_string(lineno));
        const std::string lemma = line.substr(0, tab);
        const std::string label = line.substr(tab + 1);
        if (label != "0" && label != "1")
            throw std::runtime_error("gold file: unknown label '" + label + "' at line " +
                                     std::to_string(lineno));
        if (!gold.entries.emplace(lemma, label == "1").second)
            throw std::runtime_error("gold file: duplicate lemma '" + lemma + "' at line " +
                                     std::to_string(lineno));
    }
    if (gold.entries.empty()) throw std::runtime_error("gold file is empty: " + path.string());
    return gold;
}

struct ConfusionMatrix {
    long long tp = 0, tn = 0, fp = 0, fn = 0;

    long long total() const { return tp + tn + fp + fn; }
};

// positive class = changed; extra predictions ignored with a warning
inline ConfusionMatrix confusion(const std::map<std::string, bool>& predictions,
                                 const GoldStandard& gold) {
    std::vector<std::string> missing;
    ConfusionMatrix m;
    for (const auto& [lemma, label] : gold.entries) {
        auto it = predictions.find(lemma);
        if (it == predictions.end()) {
            missing.push_back(lemma);
            continue;
        }
        if (label && it->second) ++m.tp;
        else if (label && !it->second) ++m.fn;
        else if (!label && it->second) ++m.fp;
        else ++m.tn;
    }
    if (!missing.empty()) {
        std::string msg = "missing predictions for gold lemmas:";
        for (auto& l : missing) msg += " " + l;
        throw std::runtime_error(msg);
    }
    std::size_t extra = 0;
    for (const auto& [lemma, _] : predictions)
        if (!gold.entries.count(lemma)) ++extra;
    if (extra > 0)
        std::cerr << "warning: " << extra << " predictions not in the gold standard (ignored)\n";
    return m;
}

struct PrfScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool degenerate = false;  // some 0/0 case was defined as 0
};

inline PrfScores prf(const ConfusionMatrix& m) {
    PrfScores s;
    if (m.tp + m.fp == 0) {
        s.degenerate = true;
    } else {
        s.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    }
    if (m.tp + m.fn == 0) {
        s.degenerate = true;
    } else {
        s.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    }
    if (s.precision + s.recall > 0.0) {
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    } else {
        s.degenerate = true;
    }
    return s;
}

struct EvalReport {
    ConfusionMatrix matrix;
    PrfScores scores;
    std::map<std::string, std::string> metadata;

    std::string text() const {
        std::ostringstream os;
        os << std::fixed << std::setprecision(3);
        for (const auto& [k, v] : metadata) os << k << ": " << v << "\n";
        os << "TP " << matrix.tp << "  TN " << matrix.tn << "  FP " << matrix.fp << "  FN "
           << matrix.fn << "\n";
        os << "precision " << scores.precision << "\n";
        os << "recall " << scores.recall << "\n";
        os << "F1 " << scores.f1 << "\n";
        if (scores.degenerate) os << "(degenerate 0/0 metric defined as 0)\n";
        return os.str();
    }

    nlohmann::json json() const {
        return nlohmann::json{{"format", "gasc-eval-report"},
                              {"version", 1},
                              {"confusion",
                               {{"tp", matrix.tp}, {"tn", matrix.tn}, {"fp", matrix.fp}, {"fn", matrix.fn}}},
                              {"precision", scores.precision},
                              {"recall", scores.recall},
                              {"f1", scores.f1},
                              {"degenerate", scores.degenerate},
                              {"metadata", metadata}};
    }

    static EvalReport from_json(const nlohmann::json& j) {
        if (j.value("format", "") != "gasc-eval-report" || j.value("version", 0) != 1)
            throw std::runtime_error("not a gasc-eval-report v1 document");
        EvalReport r;
        r.matrix.tp = j["confusion"]["tp"].get<long long>();
        r.matrix.tn = j["confusion"]["tn"].get<long long>();
        r.matrix.fp = j["confusion"]["fp"].get<long long>();
        r.matrix.fn = j["confusion"]["fn"].get<long long>();
        r.scores.precision = j["precision"].get<double>();
        r.scores.recall = j["recall"].get<double>();
        r.scores.f1 = j["f1"].get<double>();
        r.scores.degenerate = j["degenerate"].get<bool>();
        r.metadata = j["metadata"].get<std::map<std::string, std::string>>();
        return r;
    }
};

inline EvalReport report(const ConfusionMatrix& m, const std::map<std::string, std::string>& metadata = {}) {
    EvalReport r;
    r.matrix = m;
    r.scores = prf(m);
    r.metadata = metadata;
    return r;
}

}  // namespace gasc
