#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <boost/math/distributions/gamma.hpp>

#include "gasc/corpus.hpp"
#include "gasc/random.hpp"

namespace gasc {

struct SgnsConfig {
    int dim = 100;
    int window = 5;
    int negatives = 5;
    int epochs = 5;
    int min_count = 2;
    double alpha = 0.025;  // initial learning rate, linear decay
    std::uint64_t seed = 0;

    void validate() const {
        if (dim < 2 || window < 1 || negatives < 0 || epochs < 0 || min_count < 1 || alpha <= 0)
            throw std::invalid_argument("sgns config: bad hyperparameters");
    }
};

struct EmbeddingSpace {
    Vocabulary vocab;
    std::vector<float> vectors;  // [V x dim], row-major input vectors
    int dim = 0;
    SgnsConfig meta;

    std::span<const float> vec(int index) const {
        return {&vectors[static_cast<std::size_t>(index) * dim], static_cast<std::size_t>(dim)};
    }
    std::optional<std::span<const float>> vec(const std::string& lemma) const {
        auto i = vocab.lookup(lemma);
        if (!i) return std::nullopt;
        return vec(*i);
    }
};

namespace detail {

inline double dot(std::span<const float> u, std::span<const float> v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += static_cast<double>(u[i]) * v[i];
    return s;
}

}  // namespace detail

template <typename Vec>
double cosine_similarity(const Vec& u, const Vec& v) {
    if (u.size() != v.size()) throw std::invalid_argument("cosine: dimension mismatch");
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(u.size()); ++i) {
        uu += static_cast<double>(u[i]) * u[i];
        vv += static_cast<double>(v[i]) * v[i];
        uv += static_cast<double>(u[i]) * v[i];
    }
    if (uu <= 0.0 || vv <= 0.0) throw std::invalid_argument("cosine: zero vector");
    return std::clamp(uv / std::sqrt(uu * vv), -1.0, 1.0);
}

// Rewrite every occurrence of each target in a bin-t document to "lemma#t".
inline std::vector<Document> temporal_reference(const std::vector<Document>& docs,
                                                const std::set<std::string>& targets,
                                                const std::vector<int>& bin_assignment) {
    if (targets.empty()) throw std::invalid_argument("temporal_reference: empty target set");
    if (bin_assignment.size() != docs.size())
        throw std::invalid_argument("temporal_reference: bin assignment size mismatch");
    for (const auto& d : docs)
        for (const auto& l : d.lemmas)
            if (l.find('#') != std::string::npos && targets.count(l.substr(0, l.find('#'))))
                throw std::invalid_argument("temporal_reference: corpus lemma '" + l +
                                            "' collides with the tagging scheme");
    std::vector<Document> out = docs;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::string suffix = "#" + std::to_string(bin_assignment[i]);
        for (auto& l : out[i].lemmas)
            if (targets.count(l)) l += suffix;
    }
    return out;
}

// Plain skip-gram with negative sampling, single worker, deterministic given
// seed. Input vectors returned; output vectors are discarded after training.
inline EmbeddingSpace train_sgns(const std::vector<std::vector<std::string>>& sentences,
                                 const SgnsConfig& cfg) {
    cfg.validate();
    if (sentences.empty()) throw std::invalid_argument("sgns: empty corpus");

    // vocabulary with min_count
    std::map<std::string, long long> counts;
    long long total_tokens = 0;
    for (const auto& s : sentences)
        for (const auto& w : s) {
            ++counts[w];
            ++total_tokens;
        }
    std::vector<std::pair<std::string, long long>> kept;
    for (auto& [w, c] : counts)
        if (c >= cfg.min_count) kept.emplace_back(w, c);
    if (kept.empty()) throw std::invalid_argument("sgns: empty vocabulary after min_count");
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    EmbeddingSpace space;
    space.dim = cfg.dim;
    space.meta = cfg;
    for (auto& [w, _] : kept) {
        space.vocab.index[w] = static_cast<int>(space.vocab.lemma.size());
        space.vocab.lemma.push_back(w);
    }
    const int V = space.vocab.size();

    Rng rng(cfg.seed);
    space.vectors.resize(static_cast<std::size_t>(V) * cfg.dim);
    for (auto& x : space.vectors)
        x = static_cast<float>((rng.uniform() - 0.5) / cfg.dim);
    if (cfg.epochs == 0) return space;

    std::vector<float> out_vec(static_cast<std::size_t>(V) * cfg.dim, 0.0f);

    // unigram^0.75 negative-sampling table
    const std::size_t table_size = std::max<std::size_t>(1u << 20, static_cast<std::size_t>(V) * 8);
    std::vector<int> neg_table(table_size);
    {
        double z = 0.0;
        for (auto& [_, c] : kept) z += std::pow(static_cast<double>(c), 0.75);
        std::size_t pos = 0;
        double cum = 0.0;
        for (int w = 0; w < V; ++w) {
            cum += std::pow(static_cast<double>(kept[w].second), 0.75) / z;
            const std::size_t end = std::min(table_size, static_cast<std::size_t>(cum * table_size));
            for (; pos < end; ++pos) neg_table[pos] = w;
        }
        for (; pos < table_size; ++pos) neg_table[pos] = V - 1;
    }

    // corpus as index sequences (OOV dropped)
    std::vector<std::vector<int>> seqs;
    long long n_train = 0;
    for (const auto& s : sentences) {
        std::vector<int> seq;
        for (const auto& w : s)
            if (auto i = space.vocab.lookup(w)) seq.push_back(*i);
        if (!seq.empty()) {
            n_train += static_cast<long long>(seq.size());
            seqs.push_back(std::move(seq));
        }
    }
    if (seqs.empty()) throw std::invalid_argument("sgns: no in-vocabulary tokens");

    auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    const long long total_steps = n_train * cfg.epochs;
    long long step = 0;
    std::vector<float> grad(cfg.dim);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const auto& seq : seqs) {
            const int n = static_cast<int>(seq.size());
            for (int i = 0; i < n; ++i, ++step) {
                const double lr = std::max(cfg.alpha * (1.0 - static_cast<double>(step) / total_steps),
                                           cfg.alpha * 1e-4);
                const int reduced = 1 + rng.uniform_int(cfg.window);
                const int center = seq[i];
                float* vin = &space.vectors[static_cast<std::size_t>(center) * cfg.dim];
                for (int j = std::max(0, i - reduced); j <= std::min(n - 1, i + reduced); ++j) {
                    if (j == i) continue;
                    const int ctx = seq[j];
                    std::fill(grad.begin(), grad.end(), 0.0f);
                    for (int neg = 0; neg <= cfg.negatives; ++neg) {
                        int tgt;
                        double label;
                        if (neg == 0) {
                            tgt = ctx;
                            label = 1.0;
                        } else {
                            tgt = neg_table[rng.next_u64() % table_size];
                            if (tgt == ctx) continue;
                            label = 0.0;
                        }
                        float* vout = &out_vec[static_cast<std::size_t>(tgt) * cfg.dim];
                        double f = 0.0;
                        for (int d = 0; d < cfg.dim; ++d) f += static_cast<double>(vin[d]) * vout[d];
                        const double g = (label - sigmoid(f)) * lr;
                        for (int d = 0; d < cfg.dim; ++d) {
                            grad[d] += static_cast<float>(g * vout[d]);
                            vout[d] += static_cast<float>(g * vin[d]);
                        }
                    }
                    for (int d = 0; d < cfg.dim; ++d) vin[d] += grad[d];
                }
            }
        }
    }
    for (float x : space.vectors)
        if (!std::isfinite(x)) throw std::runtime_error("sgns: non-finite vector entry");
    return space;
}

struct ProcrustesResult {
    Eigen::MatrixXd rotation;  // dim x dim orthogonal map
    EmbeddingSpace aligned;    // source rotated into the reference frame
    int shared_vocab = 0;
};

// Orthogonal R minimizing ||S R - Ref||_F, via SVD of the cross-covariance.
// Reflections are permitted.
inline Eigen::MatrixXd procrustes_rotation(const Eigen::MatrixXd& S, const Eigen::MatrixXd& Ref) {
    if (S.rows() != Ref.rows() || S.cols() != Ref.cols())
        throw std::invalid_argument("procrustes: matrix shape mismatch");
    const Eigen::MatrixXd M = S.transpose() * Ref;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().transpose();
}

inline ProcrustesResult procrustes_align(const EmbeddingSpace& source,
                                         const EmbeddingSpace& reference) {
    if (source.dim != reference.dim)
        throw std::invalid_argument("procrustes: dimension mismatch");
    std::vector<std::pair<int, int>> shared;  // (source index, reference index)
    for (int i = 0; i < source.vocab.size(); ++i)
        if (auto j = reference.vocab.lookup(source.vocab.lemma[i])) shared.emplace_back(i, *j);
    if (static_cast<int>(shared.size()) < source.dim)
        throw std::invalid_argument("procrustes: shared vocabulary smaller than dimension");

    const int n = static_cast<int>(shared.size());
    const int dim = source.dim;
    Eigen::MatrixXd S(n, dim), R(n, dim);
    for (int r = 0; r < n; ++r)
        for (int d = 0; d < dim; ++d) {
            S(r, d) = source.vectors[static_cast<std::size_t>(shared[r].first) * dim + d];
            R(r, d) = reference.vectors[static_cast<std::size_t>(shared[r].second) * dim + d];
        }
    ProcrustesResult out;
    out.rotation = procrustes_rotation(S, R);
    out.shared_vocab = n;
    out.aligned = source;
    for (int i = 0; i < source.vocab.size(); ++i) {
        Eigen::VectorXd v(dim);
        for (int d = 0; d < dim; ++d)
            v(d) = source.vectors[static_cast<std::size_t>(i) * dim + d];
        const Eigen::VectorXd w = out.rotation.transpose() * v;
        for (int d = 0; d < dim; ++d)
            out.aligned.vectors[static_cast<std::size_t>(i) * dim + d] = static_cast<float>(w(d));
    }
    return out;
}

struct SimilaritySeries {
    std::map<std::string, double> value;  // lemma -> cosine in [-1, 1]
    std::vector<std::string> missing;     // targets absent from a required vocabulary
};

struct GammaFit {
    double shape = 0.0;
    double rate = 0.0;
};

// method of moments: shape = mean^2/var, rate = mean/var
inline GammaFit fit_gamma_moments(const std::vector<double>& values) {
    if (values.size() < 2) throw std::invalid_argument("gamma fit: need >= 2 values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    if (mean <= 0.0) throw std::invalid_argument("gamma fit: non-positive mean");
    if (var < 1e-12) throw std::invalid_argument("gamma fit: degenerate (zero variance)");
    return {mean * mean / var, mean / var};
}

// maximum likelihood via Newton on the shape, available behind a flag
inline GammaFit fit_gamma_mle(const std::vector<double>& values) {
    if (values.size() < 2) throw std::invalid_argument("gamma fit: need >= 2 values");
    double mean = 0.0, mean_log = 0.0;
    for (double v : values) {
        if (v <= 0.0) throw std::invalid_argument("gamma mle: non-positive value");
        mean += v;
        mean_log += std::log(v);
    }
    mean /= static_cast<double>(values.size());
    mean_log /= static_cast<double>(values.size());
    const double s = std::log(mean) - mean_log;
    if (s < 1e-12) throw std::invalid_argument("gamma fit: degenerate (zero variance)");
    double k = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
    for (int it = 0; it < 50; ++it) {
        const double f = std::log(k) - boost::math::digamma(k) - s;
        const double fp = 1.0 / k - boost::math::trigamma(k);
        const double k_next = k - f / fp;
        if (!(k_next > 0)) break;
        if (std::abs(k_next - k) < 1e-12 * k) {
            k = k_next;
            break;
        }
        k = k_next;
    }
    return {k, k / mean};
}

inline double gamma_quantile(const GammaFit& fit, double p) {
    boost::math::gamma_distribution<double> dist(fit.shape, 1.0 / fit.rate);
    return boost::math::quantile(dist, p);
}

struct GammaThresholdOptions {
    double shift = 1.0;      // added before fitting so support is positive
    double quantile = 0.75;
    bool use_mle = false;
};

struct GammaThresholdResult {
    std::map<std::string, bool> changed;
    double threshold = 0.0;  // on the original (unshifted) similarity scale
    GammaFit fit;
    bool degenerate = false;
};

// Fit a Gamma to shifted similarities; similarities below the fitted
// p-quantile are flagged as changed. Zero-variance input degenerates to
// all-unchanged with a warning.
inline GammaThresholdResult gamma_threshold_decisions(const SimilaritySeries& series,
                                                      const GammaThresholdOptions& opt = {}) {
    if (series.value.size() < 3)
        throw std::invalid_argument("gamma threshold: need >= 3 lemmas");
    std::vector<double> shifted;
    for (const auto& [lemma, v] : series.value) {
        const double x = v + opt.shift;
        if (x <= 0.0)
            throw std::invalid_argument("gamma threshold: similarity " + std::to_string(v) +
                                        " for " + lemma + " not positive after shift");
        shifted.push_back(x);
    }
    GammaThresholdResult out;
    try {
        out.fit = opt.use_mle ? fit_gamma_mle(shifted) : fit_gamma_moments(shifted);
    } catch (const std::invalid_argument&) {
        std::cerr << "warning: degenerate gamma fit (near-zero variance); reporting all "
                     "lemmas unchanged\n";
        out.degenerate = true;
        for (const auto& [lemma, _] : series.value) out.changed[lemma] = false;
        return out;
    }
    out.threshold = gamma_quantile(out.fit, opt.quantile) - opt.shift;
    for (const auto& [lemma, v] : series.value) out.changed[lemma] = v < out.threshold;
    return out;
}

enum class BaselineMode { TemporalReferencing, ProcrustesSgns };

struct GenreFilter {
    std::set<std::string> include;  // empty = all
    std::set<std::string> exclude;

    bool keep(const std::string& genre) const {
        if (!include.empty() && !include.count(genre)) return false;
        return !exclude.count(genre);
    }
};

namespace detail {

inline std::vector<std::vector<std::string>> to_sentences(const std::vector<Document>& docs) {
    std::vector<std::vector<std::string>> out;
    out.reserve(docs.size());
    for (const auto& d : docs) out.push_back(d.lemmas);
    return out;
}

}  // namespace detail

// Cosine similarity per target between its bin-t1 and bin-t2 representations.
// TR: one model on the transformed joint corpus. OP: per-bin models, bin-t1
// space aligned onto bin-t2.
inline SimilaritySeries score_targets(BaselineMode mode, const std::vector<Document>& documents,
                                      const std::set<std::string>& targets,
                                      const TimeBinning& binning, const SgnsConfig& cfg,
                                      const GenreFilter& filter = {}, int t1 = 0, int t2 = -1) {
    if (targets.empty()) throw std::invalid_argument("score_targets: empty target set");
    if (t2 < 0) t2 = binning.bin_count() - 1;
    if (t1 == t2 || t1 < 0 || t2 >= binning.bin_count())
        throw std::invalid_argument("score_targets: need two distinct valid bins");

    std::vector<Document> docs;
    for (const auto& d : documents)
        if (filter.keep(d.genre)) docs.push_back(d);
    if (docs.empty()) throw std::invalid_argument("score_targets: genre filter left no documents");
    const std::vector<int> bins = assign_bins(docs, binning);

    SimilaritySeries series;
    if (mode == BaselineMode::TemporalReferencing) {
        const auto transformed = temporal_reference(docs, targets, bins);
        const auto space = train_sgns(detail::to_sentences(transformed), cfg);
        for (const auto& tgt : targets) {
            const auto v1 = space.vec(tgt + "#" + std::to_string(t1));
            const auto v2 = space.vec(tgt + "#" + std::to_string(t2));
            if (!v1 || !v2) {
                series.missing.push_back(tgt);
                continue;
            }
            series.value[tgt] = cosine_similarity(*v1, *v2);
        }
    } else {
        std::vector<Document> docs1, docs2;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            if (bins[i] == t1) docs1.push_back(docs[i]);
            if (bins[i] == t2) docs2.push_back(docs[i]);
        }
        if (docs1.empty() || docs2.empty())
            throw std::invalid_argument("score_targets: a required bin has no documents");
        SgnsConfig cfg2 = cfg;
        cfg2.seed = cfg.seed + 1;  // independent training runs
        const auto space1 = train_sgns(detail::to_sentences(docs1), cfg);
        const auto space2 = train_sgns(detail::to_sentences(docs2), cfg2);
        const auto aligned = procrustes_align(space1, space2);
        for (const auto& tgt : targets) {
            const auto v1 = aligned.aligned.vec(tgt);
            const auto v2 = space2.vec(tgt);
            if (!v1 || !v2) {
                series.missing.push_back(tgt);
                continue;
            }
            series.value[tgt] = cosine_similarity(*v1, *v2);
        }
    }
    return series;
}

inline void write_similarity_tsv(const SimilaritySeries& s, std::ostream& os) {
    os << "lemma\tcosine\n";
    os.precision(17);
    for (const auto& [lemma, v] : s.value) os << lemma << "\t" << v << "\n";
    for (const auto& lemma : s.missing) os << lemma << "\tmissing\n";
}

// --- binary persistence: magic, version, V, dim, lemma table, f32 LE matrix ---

inline void save_embeddings(const EmbeddingSpace& space, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    const char magic[4] = {'G', 'E', 'M', 'B'};
    out.write(magic, 4);
    const std::uint32_t version = 1;
    const std::uint64_t v = static_cast<std::uint64_t>(space.vocab.size());
    const std::uint32_t dim = static_cast<std::uint32_t>(space.dim);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&v), 8);
    out.write(reinterpret_cast<const char*>(&dim), 4);
    for (const auto& lemma : space.vocab.lemma) {
        const std::uint32_t len = static_cast<std::uint32_t>(lemma.size());
        out.write(reinterpret_cast<const char*>(&len), 4);
        out.write(lemma.data(), len);
    }
    out.write(reinterpret_cast<const char*>(space.vectors.data()),
              static_cast<std::streamsize>(space.vectors.size() * sizeof(float)));
}

inline EmbeddingSpace load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "GEMB", 4) != 0)
        throw std::runtime_error("not a GEMB embedding file: " + path.string());
    std::uint32_t version = 0, dim = 0;
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&v), 8);
    in.read(reinterpret_cast<char*>(&dim), 4);
    if (version != 1) throw std::runtime_error("unsupported GEMB version");
    EmbeddingSpace space;
    space.dim = static_cast<int>(dim);
    for (std::uint64_t i = 0; i < v; ++i) {
        std::uint32_t len = 0;
        in.read(reinterpret_cast<char*>(&len), 4);
        std::string lemma(len, '\0');
        in.read(lemma.data(), len);
        space.vocab.index[lemma] = static_cast<int>(i);
        space.vocab.lemma.push_back(std::move(lemma));
    }
    space.vectors.resize(v * dim);
    in.read(reinterpret_cast<char*>(space.vectors.data()),
            static_cast<std::streamsize>(space.vectors.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated GEMB file: " + path.string());
    return space;
}

// word2vec-style text export for interoperability
inline void export_word2vec_text(const EmbeddingSpace& space, std::ostream& os) {
    os << space.vocab.size() << " " << space.dim << "\n";
    for (int i = 0; i < space.vocab.size(); ++i) {
        os << space.vocab.lemma[i];
        for (float x : space.vec(i)) os << " " << x;
        os << "\n";
    }
}

}  // namespace gasc
