#pragma once

#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gasc/corpus.hpp"
#include "gasc/random.hpp"

namespace gasc {

inline constexpr double kProbFloor = 1e-300;

struct ModelConfig {
    int K = 4;   // senses
    int G = 1;   // genres
    int T = 2;   // time bins
    int V = 1;   // vocabulary size
    int W = 5;   // window size
    double a = 1.0;          // Gamma shape for kappa_phi
    double b = 1.0;          // Gamma rate for kappa_phi
    double kappa_psi = 100.0;  // fixed word-distribution precision
    double sigma0 = 10.0;      // sd of the initial-slice prior

    void validate() const {
        if (K < 1 || G < 1 || T < 2 || V < 1 || W < 1)
            throw std::invalid_argument("model config: need K,G,V,W >= 1 and T >= 2");
        if (a <= 0 || b <= 0 || kappa_psi <= 0 || sigma0 <= 0)
            throw std::invalid_argument("model config: a, b, kappa_psi, sigma0 must be positive");
    }
};

// chi: [T x K x V] unnormalized word params, zeta: [T x G x K] unnormalized
// sense params, both row-major
struct ModelState {
    int T = 0, K = 0, V = 0, G = 0;
    std::vector<double> chi;
    std::vector<double> zeta;
    double kappa_phi = 1.0;
    std::vector<int> z;

    static ModelState zeros(const ModelConfig& c) {
        ModelState s;
        s.T = c.T; s.K = c.K; s.V = c.V; s.G = c.G;
        s.chi.assign(static_cast<std::size_t>(c.T) * c.K * c.V, 0.0);
        s.zeta.assign(static_cast<std::size_t>(c.T) * c.G * c.K, 0.0);
        return s;
    }

    double& chi_at(int t, int k, int v) {
        return chi[(static_cast<std::size_t>(t) * K + k) * V + v];
    }
    double chi_at(int t, int k, int v) const {
        return chi[(static_cast<std::size_t>(t) * K + k) * V + v];
    }
    double& zeta_at(int t, int g, int k) {
        return zeta[(static_cast<std::size_t>(t) * G + g) * K + k];
    }
    double zeta_at(int t, int g, int k) const {
        return zeta[(static_cast<std::size_t>(t) * G + g) * K + k];
    }

    void check_dims(const ModelConfig& c) const {
        if (T != c.T || K != c.K || V != c.V || G != c.G ||
            chi.size() != static_cast<std::size_t>(c.T) * c.K * c.V ||
            zeta.size() != static_cast<std::size_t>(c.T) * c.G * c.K)
            throw std::invalid_argument("model state dimensions do not match config");
        if (kappa_phi <= 0) throw std::invalid_argument("kappa_phi must be positive");
    }
};

inline void softmax_slice(std::span<const double> in, std::span<double> out) {
    if (in.size() != out.size() || in.empty())
        throw std::invalid_argument("softmax: size mismatch");
    double m = in[0];
    for (double x : in) m = std::max(m, x);
    double sum = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = std::exp(in[i] - m);
        sum += out[i];
    }
    for (auto& x : out) x /= sum;
}

inline std::vector<double> softmax_slice(std::span<const double> in) {
    std::vector<double> out(in.size());
    softmax_slice(in, out);
    return out;
}

inline double log_normal_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * std::log(2.0 * M_PI * var) - 0.5 * d * d / var;
}

// First-order Gaussian random walk log prior over a [T x slice_len] array:
// slice 0 ~ N(0, sigma0^2) per component, slice t ~ N(slice t-1, 1/precision).
inline double temporal_log_prior(std::span<const double> params, int T, int slice_len,
                                 double precision, double sigma0) {
    if (T < 2 || precision <= 0 || sigma0 <= 0 ||
        params.size() != static_cast<std::size_t>(T) * slice_len)
        throw std::invalid_argument("temporal_log_prior: bad arguments");
    double lp = 0.0;
    for (int j = 0; j < slice_len; ++j) lp += log_normal_pdf(params[j], 0.0, sigma0 * sigma0);
    const double var = 1.0 / precision;
    for (int t = 1; t < T; ++t)
        for (int j = 0; j < slice_len; ++j)
            lp += log_normal_pdf(params[static_cast<std::size_t>(t) * slice_len + j],
                                 params[static_cast<std::size_t>(t - 1) * slice_len + j], var);
    return lp;
}

inline double log_gamma_pdf(double x, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

// log-likelihood of the snippets given state (z fixed in state.z)
inline double snippet_log_likelihood(const ModelState& s, const std::vector<Snippet>& snippets,
                                     const ModelConfig& c) {
    s.check_dims(c);
    if (s.z.size() != snippets.size())
        throw std::invalid_argument("z size does not match snippet count");
    // per-slice softmax tables
    std::vector<double> log_psi(static_cast<std::size_t>(c.T) * c.K * c.V);
    std::vector<double> log_phi(static_cast<std::size_t>(c.T) * c.G * c.K);
    std::vector<double> tmp;
    for (int t = 0; t < c.T; ++t) {
        for (int k = 0; k < c.K; ++k) {
            std::span<const double> in(&s.chi[(static_cast<std::size_t>(t) * c.K + k) * c.V],
                                       static_cast<std::size_t>(c.V));
            tmp = softmax_slice(in);
            for (int v = 0; v < c.V; ++v)
                log_psi[(static_cast<std::size_t>(t) * c.K + k) * c.V + v] =
                    std::log(std::max(tmp[v], kProbFloor));
        }
        for (int g = 0; g < c.G; ++g) {
            std::span<const double> in(&s.zeta[(static_cast<std::size_t>(t) * c.G + g) * c.K],
                                       static_cast<std::size_t>(c.K));
            tmp = softmax_slice(in);
            for (int k = 0; k < c.K; ++k)
                log_phi[(static_cast<std::size_t>(t) * c.G + g) * c.K + k] =
                    std::log(std::max(tmp[k], kProbFloor));
        }
    }
    double ll = 0.0;
    for (std::size_t d = 0; d < snippets.size(); ++d) {
        const auto& sn = snippets[d];
        const int k = s.z[d];
        if (k < 0 || k >= c.K || sn.time_bin < 0 || sn.time_bin >= c.T || sn.genre < 0 ||
            sn.genre >= c.G)
            throw std::invalid_argument("snippet or assignment out of range");
        ll += log_phi[(static_cast<std::size_t>(sn.time_bin) * c.G + sn.genre) * c.K + k];
        for (int w : sn.context) {
            if (w < 0 || w >= c.V) throw std::invalid_argument("context index out of range");
            ll += log_psi[(static_cast<std::size_t>(sn.time_bin) * c.K + k) * c.V + w];
        }
    }
    return ll;
}

// log p(chi) + log p(zeta | kappa_phi) + log p(kappa_phi) + log p(w, z | ...)
inline double log_joint(const ModelState& s, const std::vector<Snippet>& snippets,
                        const ModelConfig& c) {
    s.check_dims(c);
    double lp = 0.0;
    lp += temporal_log_prior(s.chi, c.T, c.K * c.V, c.kappa_psi, c.sigma0);
    lp += temporal_log_prior(s.zeta, c.T, c.G * c.K, s.kappa_phi, c.sigma0);
    lp += log_gamma_pdf(s.kappa_phi, c.a, c.b);
    lp += snippet_log_likelihood(s, snippets, c);
    return lp;
}

// Simulation input: either explicit per-bin probabilities or prior draws.
struct TrajectorySpec {
    std::optional<std::vector<double>> phi;  // [T x G x K] probabilities
    std::optional<std::vector<double>> psi;  // [T x K x V] probabilities
    std::optional<std::vector<double>> genre_probs;  // [G], default uniform
    bool stratify_genres = false;  // exact n snippets per (bin, genre)
    int words_per_snippet = 0;     // default 2W
};

struct SyntheticCorpus {
    std::vector<Snippet> snippets;
    std::vector<int> true_z;
    ModelState true_state;
    std::vector<double> true_phi;  // [T x G x K]
    std::vector<double> true_psi;  // [T x K x V]
};

namespace detail {

inline void check_prob_rows(const std::vector<double>& p, std::size_t rows, std::size_t cols,
                            const char* name) {
    if (p.size() != rows * cols)
        throw std::invalid_argument(std::string(name) + ": dimension mismatch");
    for (std::size_t r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            if (p[r * cols + c] < 0) throw std::invalid_argument(std::string(name) + ": negative");
            sum += p[r * cols + c];
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument(std::string(name) + ": row does not sum to 1");
    }
}

}  // namespace detail

// Draw a synthetic corpus from the generative process. Deterministic given seed.
inline SyntheticCorpus forward_simulate(const ModelConfig& c, const TrajectorySpec& spec,
                                        int n_snippets_per_bin, std::uint64_t seed) {
    c.validate();
    if (n_snippets_per_bin < 0) throw std::invalid_argument("n_snippets_per_bin must be >= 0");
    Rng rng(seed);
    SyntheticCorpus out;
    out.true_state = ModelState::zeros(c);

    const std::size_t phi_len = static_cast<std::size_t>(c.T) * c.G * c.K;
    const std::size_t psi_len = static_cast<std::size_t>(c.T) * c.K * c.V;

    if (spec.phi) {
        detail::check_prob_rows(*spec.phi, static_cast<std::size_t>(c.T) * c.G, c.K, "phi");
        out.true_phi = *spec.phi;
        for (std::size_t i = 0; i < phi_len; ++i)
            out.true_state.zeta[i] = std::log(std::max((*spec.phi)[i], kProbFloor));
        out.true_state.kappa_phi = c.a / c.b;
    } else {
        out.true_state.kappa_phi = rng.gamma(c.a, c.b);
        const double sd = 1.0 / std::sqrt(out.true_state.kappa_phi);
        for (int g = 0; g < c.G; ++g)
            for (int k = 0; k < c.K; ++k) {
                double x = rng.normal(0.0, c.sigma0);
                out.true_state.zeta_at(0, g, k) = x;
                for (int t = 1; t < c.T; ++t) {
                    x = rng.normal(x, sd);
                    out.true_state.zeta_at(t, g, k) = x;
                }
            }
        out.true_phi.resize(phi_len);
        for (int t = 0; t < c.T; ++t)
            for (int g = 0; g < c.G; ++g) {
                std::span<const double> in(&out.true_state.zeta[(static_cast<std::size_t>(t) * c.G + g) * c.K],
                                           static_cast<std::size_t>(c.K));
                std::span<double> o(&out.true_phi[(static_cast<std::size_t>(t) * c.G + g) * c.K],
                                    static_cast<std::size_t>(c.K));
                softmax_slice(in, o);
            }
    }

    if (spec.psi) {
        detail::check_prob_rows(*spec.psi, static_cast<std::size_t>(c.T) * c.K, c.V, "psi");
        out.true_psi = *spec.psi;
        for (std::size_t i = 0; i < psi_len; ++i)
            out.true_state.chi[i] = std::log(std::max((*spec.psi)[i], kProbFloor));
    } else {
        const double sd = 1.0 / std::sqrt(c.kappa_psi);
        for (int k = 0; k < c.K; ++k)
            for (int v = 0; v < c.V; ++v) {
                double x = rng.normal(0.0, c.sigma0);
                out.true_state.chi_at(0, k, v) = x;
                for (int t = 1; t < c.T; ++t) {
                    x = rng.normal(x, sd);
                    out.true_state.chi_at(t, k, v) = x;
                }
            }
        out.true_psi.resize(psi_len);
        for (int t = 0; t < c.T; ++t)
            for (int k = 0; k < c.K; ++k) {
                std::span<const double> in(&out.true_state.chi[(static_cast<std::size_t>(t) * c.K + k) * c.V],
                                           static_cast<std::size_t>(c.V));
                std::span<double> o(&out.true_psi[(static_cast<std::size_t>(t) * c.K + k) * c.V],
                                    static_cast<std::size_t>(c.V));
                softmax_slice(in, o);
            }
    }

    std::vector<double> genre_probs;
    if (spec.genre_probs) {
        if (static_cast<int>(spec.genre_probs->size()) != c.G)
            throw std::invalid_argument("genre_probs: dimension mismatch");
        genre_probs = *spec.genre_probs;
    } else {
        genre_probs.assign(c.G, 1.0 / c.G);
    }

    const int n_words = spec.words_per_snippet > 0 ? spec.words_per_snippet : 2 * c.W;
    std::int64_t id = 0;
    for (int t = 0; t < c.T; ++t) {
        for (int i = 0; i < n_snippets_per_bin; ++i) {
            const int n_genres_here = spec.stratify_genres ? c.G : 1;
            for (int rep = 0; rep < n_genres_here; ++rep) {
                int g = spec.stratify_genres
                            ? rep
                            : rng.categorical(std::span<const double>(genre_probs));
                std::span<const double> phi_tg(&out.true_phi[(static_cast<std::size_t>(t) * c.G + g) * c.K],
                                               static_cast<std::size_t>(c.K));
                const int k = rng.categorical(phi_tg);
                std::span<const double> psi_tk(&out.true_psi[(static_cast<std::size_t>(t) * c.K + k) * c.V],
                                               static_cast<std::size_t>(c.V));
                Snippet s;
                s.snippet_id = id++;
                s.time_bin = t;
                s.genre = g;
                s.doc_id = "sim";
                for (int w = 0; w < n_words; ++w) s.context.push_back(rng.categorical(psi_tk));
                out.snippets.push_back(std::move(s));
                out.true_z.push_back(k);
            }
        }
    }
    out.true_state.z = out.true_z;
    return out;
}

// --- versioned JSON checkpoint ---

inline nlohmann::json state_to_json(const ModelState& s) {
    return nlohmann::json{{"format", "gasc-state"},
                          {"version", 1},
                          {"dims", {{"T", s.T}, {"K", s.K}, {"V", s.V}, {"G", s.G}}},
                          {"chi", s.chi},
                          {"zeta", s.zeta},
                          {"kappa_phi", s.kappa_phi},
                          {"z", s.z}};
}

inline ModelState state_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "gasc-state" || j.value("version", 0) != 1)
        throw std::invalid_argument("not a gasc-state v1 document");
    ModelState s;
    s.T = j["dims"]["T"].get<int>();
    s.K = j["dims"]["K"].get<int>();
    s.V = j["dims"]["V"].get<int>();
    s.G = j["dims"]["G"].get<int>();
    s.chi = j["chi"].get<std::vector<double>>();
    s.zeta = j["zeta"].get<std::vector<double>>();
    s.kappa_phi = j["kappa_phi"].get<double>();
    s.z = j["z"].get<std::vector<int>>();
    if (s.chi.size() != static_cast<std::size_t>(s.T) * s.K * s.V ||
        s.zeta.size() != static_cast<std::size_t>(s.T) * s.G * s.K)
        throw std::invalid_argument("gasc-state: array sizes inconsistent with dims");
    return s;
}

}  // namespace gasc
