#pragma once

#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gasc/gibbs.hpp"

namespace gasc {

enum class ChangeDirection { Rise, Drop };

// How the comparison deviation is formed from the two bins' posterior stds.
enum class StdCombine { MaxStd, Pooled, EitherBin };

struct ChangeRule {
    double n_sigma = 2.0;
    bool endpoints_only = false;  // default: any pair of bins
    StdCombine combine = StdCombine::MaxStd;
};

struct ChangeEvidence {
    int sense = 0;
    int genre = 0;
    int t1 = 0, t2 = 0;
    ChangeDirection direction = ChangeDirection::Rise;
    double magnitude = 0.0;
};

struct ChangeDecision {
    bool changed = false;
    std::optional<ChangeEvidence> evidence;
};

namespace detail {

inline double combine_std(double s1, double s2, StdCombine c) {
    switch (c) {
        case StdCombine::MaxStd: return std::max(s1, s2);
        case StdCombine::Pooled: return std::sqrt(0.5 * (s1 * s1 + s2 * s2));
        case StdCombine::EitherBin: return std::min(s1, s2);
    }
    return std::max(s1, s2);
}

}  // namespace detail

// A sense changed if its posterior mean probability differs across two bins
// by at least n_sigma times the comparison std. For multi-genre trajectories
// any genre suffices. Ties at the threshold count as changed.
inline ChangeDecision detect_change(const PosteriorTrajectory& traj,
                                    const ChangeRule& rule = {}) {
    if (traj.T < 2) throw std::invalid_argument("detect_change: need T >= 2");
    ChangeDecision best;
    for (int g = 0; g < traj.G; ++g) {
        for (int k = 0; k < traj.K; ++k) {
            for (int t1 = 0; t1 < traj.T; ++t1) {
                for (int t2 = t1 + 1; t2 < traj.T; ++t2) {
                    if (rule.endpoints_only && !(t1 == 0 && t2 == traj.T - 1)) continue;
                    const double m1 = traj.mean_at(t1, g, k);
                    const double m2 = traj.mean_at(t2, g, k);
                    const double mag = std::abs(m2 - m1);
                    const double s = detail::combine_std(traj.std_at(t1, g, k),
                                                         traj.std_at(t2, g, k), rule.combine);
                    if (mag < rule.n_sigma * s) continue;
                    if (mag == 0.0) continue;
                    if (!best.changed || mag > best.evidence->magnitude) {
                        best.changed = true;
                        best.evidence = ChangeEvidence{
                            k, g, t1, t2,
                            m2 > m1 ? ChangeDirection::Rise : ChangeDirection::Drop, mag};
                    }
                }
            }
        }
    }
    return best;
}

struct BatchResult {
    std::map<std::string, ChangeDecision> decisions;  // stable lemma order
    std::map<std::string, std::string> errors;
};

inline BatchResult detect_change_batch(const std::map<std::string, PosteriorTrajectory>& trajs,
                                       const ChangeRule& rule = {}) {
    if (trajs.empty()) throw std::invalid_argument("detect_change_batch: empty input");
    BatchResult out;
    for (const auto& [lemma, traj] : trajs) {
        try {
            out.decisions[lemma] = detect_change(traj, rule);
        } catch (const std::exception& e) {
            out.errors[lemma] = e.what();
        }
    }
    return out;
}

inline const char* to_string(ChangeDirection d) {
    return d == ChangeDirection::Rise ? "rise" : "drop";
}

// lemma, changed, sense, genre, t1, t2, direction, magnitude
inline void write_decisions_tsv(const std::map<std::string, ChangeDecision>& decisions,
                                std::ostream& os) {
    os << "lemma\tchanged\tsense\tgenre\tt1\tt2\tdirection\tmagnitude\n";
    os.precision(17);
    for (const auto& [lemma, d] : decisions) {
        os << lemma << "\t" << (d.changed ? 1 : 0);
        if (d.evidence) {
            const auto& e = *d.evidence;
            os << "\t" << e.sense << "\t" << e.genre << "\t" << e.t1 << "\t" << e.t2 << "\t"
               << to_string(e.direction) << "\t" << e.magnitude;
        } else {
            os << "\t-\t-\t-\t-\t-\t-";
        }
        os << "\n";
    }
}

inline std::map<std::string, bool> read_decisions_tsv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("lemma\tchanged", 0) != 0)
        throw std::invalid_argument("decisions TSV: missing header");
    std::map<std::string, bool> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto tab1 = line.find('\t');
        const auto tab2 = line.find('\t', tab1 + 1);
        if (tab1 == std::string::npos)
            throw std::invalid_argument("decisions TSV: malformed row: " + line);
        const std::string lemma = line.substr(0, tab1);
        const std::string flag = line.substr(tab1 + 1, (tab2 == std::string::npos ? line.size() : tab2) - tab1 - 1);
        if (flag != "0" && flag != "1")
            throw std::invalid_argument("decisions TSV: bad changed flag for " + lemma);
        if (!out.emplace(lemma, flag == "1").second)
            throw std::invalid_argument("decisions TSV: duplicate lemma " + lemma);
    }
    if (out.empty()) throw std::invalid_argument("decisions TSV: no rows");
    return out;
}

}  // namespace gasc
