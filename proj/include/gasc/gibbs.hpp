#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gasc/model.hpp"
#include "gasc/random.hpp"

namespace gasc {

struct SamplerConfig {
    int n_iterations = 2500;
    int burn_in = 100;
    int thinning = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_iterations < 1 || burn_in < 0 || burn_in >= n_iterations || thinning < 1)
            throw std::invalid_argument("sampler config: need 0 <= burn_in < n_iterations, thinning >= 1");
    }
};

// Named hyperparameter presets. "scan" is genre-unaware (G collapsed to 1).
struct Preset {
    std::string name;
    double a, b, kappa_psi;
    int n_iterations, burn_in;
    bool collapse_genres;
};

inline Preset preset_by_name(const std::string& name) {
    if (name == "latin-default") return {"latin-default", 1.0, 1.0, 100.0, 2500, 100, false};
    if (name == "greek-gasc") return {"greek-gasc", 7.0, 3.0, 10.0, 10000, 100, false};
    if (name == "scan") return {"scan", 1.0, 1.0, 100.0, 2500, 100, true};
    throw std::invalid_argument("unknown preset: " + name);
}

struct SampleStore {
    int T = 0, G = 0, K = 0;
    std::vector<std::vector<double>> phi;  // per retained sample, [T x G x K]
    std::vector<double> kappa_phi;
    std::vector<std::vector<int>> z;  // retained in memory, not serialized
    ModelState final_state;

    int n_samples() const { return static_cast<int>(phi.size()); }
};

struct PosteriorTrajectory {
    int T = 0, G = 0, K = 0;
    std::vector<double> mean;  // [T x G x K]
    std::vector<double> std;   // [T x G x K]
    int n_samples = 0;

    double mean_at(int t, int g, int k) const {
        return mean[(static_cast<std::size_t>(t) * G + g) * K + k];
    }
    double std_at(int t, int g, int k) const {
        return std[(static_cast<std::size_t>(t) * G + g) * K + k];
    }
};

// p(z = k | genre, context, t, phi, psi) from precomputed log tables
inline std::vector<double> sense_conditional(const Snippet& sn, std::span<const double> log_phi,
                                             std::span<const double> log_psi, int T, int G, int K,
                                             int V) {
    std::vector<double> logw(K);
    for (int k = 0; k < K; ++k) {
        double lw = log_phi[(static_cast<std::size_t>(sn.time_bin) * G + sn.genre) * K + k];
        for (int w : sn.context)
            lw += log_psi[(static_cast<std::size_t>(sn.time_bin) * K + k) * V + w];
        logw[k] = lw;
    }
    double m = *std::max_element(logw.begin(), logw.end());
    if (!std::isfinite(m)) throw std::runtime_error("degenerate state: all sense weights underflow");
    double sum = 0.0;
    for (auto& x : logw) {
        x = std::exp(x - m);
        sum += x;
    }
    for (auto& x : logw) x /= sum;
    return logw;
}

// convenience overload computing tables from a state
inline std::vector<double> sense_conditional(const Snippet& sn, const ModelState& s,
                                             const ModelConfig& c) {
    s.check_dims(c);
    std::vector<double> log_phi(static_cast<std::size_t>(c.T) * c.G * c.K);
    std::vector<double> log_psi(static_cast<std::size_t>(c.T) * c.K * c.V);
    for (int t = 0; t < c.T; ++t) {
        for (int g = 0; g < c.G; ++g) {
            auto p = softmax_slice(std::span<const double>(
                &s.zeta[(static_cast<std::size_t>(t) * c.G + g) * c.K], static_cast<std::size_t>(c.K)));
            for (int k = 0; k < c.K; ++k)
                log_phi[(static_cast<std::size_t>(t) * c.G + g) * c.K + k] =
                    std::log(std::max(p[k], kProbFloor));
        }
        for (int k = 0; k < c.K; ++k) {
            auto p = softmax_slice(std::span<const double>(
                &s.chi[(static_cast<std::size_t>(t) * c.K + k) * c.V],
                static_cast<std::size_t>(c.V)));
            for (int v = 0; v < c.V; ++v)
                log_psi[(static_cast<std::size_t>(t) * c.K + k) * c.V + v] =
                    std::log(std::max(p[v], kProbFloor));
        }
    }
    return sense_conditional(sn, log_phi, log_psi, c.T, c.G, c.K, c.V);
}

// Blocked Gibbs sampler. Sweep order: z -> zeta -> chi -> kappa_phi.
// The zeta/chi blocks are Metropolis-within-Gibbs with per-site Gaussian
// proposals; step sizes adapt during burn-in only and are frozen afterwards,
// so retained samples come from a fixed transition kernel.
class GibbsSampler {
public:
    GibbsSampler(std::vector<Snippet> snippets, ModelConfig mc, SamplerConfig sc)
        : snippets_(std::move(snippets)), mc_(mc), sc_(sc), rng_(sc.seed) {
        mc_.validate();
        sc_.validate();
        if (snippets_.empty()) throw std::invalid_argument("gibbs: empty snippet set");
        for (const auto& s : snippets_) {
            if (s.time_bin < 0 || s.time_bin >= mc_.T || s.genre < 0 || s.genre >= mc_.G)
                throw std::invalid_argument("gibbs: snippet bin/genre out of range");
            for (int w : s.context)
                if (w < 0 || w >= mc_.V)
                    throw std::invalid_argument("gibbs: context index out of range");
        }
        init_state();
    }

    const ModelState& state() const { return state_; }
    void set_state(ModelState s) {
        s.check_dims(mc_);
        state_ = std::move(s);
    }

    SampleStore run() {
        SampleStore store;
        store.T = mc_.T;
        store.G = mc_.G;
        store.K = mc_.K;
        for (int it = 0; it < sc_.n_iterations; ++it) {
            sweep(it);
            if (it >= sc_.burn_in && (it - sc_.burn_in) % sc_.thinning == 0) {
                store.phi.push_back(current_phi());
                store.kappa_phi.push_back(state_.kappa_phi);
                store.z.push_back(state_.z);
            }
        }
        store.final_state = state_;
        return store;
    }

    void sweep(int iteration) {
        resample_assignments();
        update_sense_params();
        update_word_params();
        update_precision();
        if (iteration < sc_.burn_in) adapt(iteration);
    }

    void resample_assignments() {
        refresh_tables();
        if (state_.z.size() != snippets_.size()) state_.z.assign(snippets_.size(), 0);
        for (std::size_t d = 0; d < snippets_.size(); ++d) {
            auto probs = sense_conditional(snippets_[d], log_phi_, log_psi_, mc_.T, mc_.G, mc_.K,
                                           mc_.V);
            state_.z[d] = rng_.categorical(probs);
        }
    }

    // MWG over zeta sites given sense counts per (t, g)
    void update_sense_params() {
        recount();
        const double var0 = mc_.sigma0 * mc_.sigma0;
        const double var_rw = 1.0 / state_.kappa_phi;
        for (int t = 0; t < mc_.T; ++t) {
            for (int g = 0; g < mc_.G; ++g) {
                const double n_total = static_cast<double>(n_tg_[static_cast<std::size_t>(t) * mc_.G + g]);
                for (int k = 0; k < mc_.K; ++k) {
                    const double cur = state_.zeta_at(t, g, k);
                    const double prop = cur + step_zeta_ * rng_.normal();
                    double dloglik = 0.0;
                    if (n_total > 0) {
                        const double n_k = static_cast<double>(
                            n_zg_[(static_cast<std::size_t>(t) * mc_.G + g) * mc_.K + k]);
                        dloglik = n_k * (prop - cur) -
                                  n_total * (lse_delta_zeta(t, g, k, prop) );
                    }
                    const double dlp = rw_prior_delta(state_.zeta, mc_.G * mc_.K,
                                                      (static_cast<std::size_t>(g) * mc_.K + k), t,
                                                      cur, prop, var0, var_rw);
                    ++zeta_attempts_;
                    if (std::log(std::max(rng_.uniform(), 1e-300)) < dloglik + dlp) {
                        state_.zeta_at(t, g, k) = prop;
                        ++zeta_accepts_;
                    }
                }
            }
        }
    }

    // MWG over chi sites given word counts per (t, k, v)
    void update_word_params() {
        recount();
        const double var0 = mc_.sigma0 * mc_.sigma0;
        const double var_rw = 1.0 / mc_.kappa_psi;
        for (int t = 0; t < mc_.T; ++t) {
            for (int k = 0; k < mc_.K; ++k) {
                // running logsumexp for the (t, k) slice
                const double* row = &state_.chi[(static_cast<std::size_t>(t) * mc_.K + k) * mc_.V];
                double m = row[0];
                for (int v = 1; v < mc_.V; ++v) m = std::max(m, row[v]);
                double S = 0.0;
                for (int v = 0; v < mc_.V; ++v) S += std::exp(row[v] - m);
                const double n_total =
                    static_cast<double>(n_wtot_[static_cast<std::size_t>(t) * mc_.K + k]);
                for (int v = 0; v < mc_.V; ++v) {
                    const double cur = state_.chi_at(t, k, v);
                    const double prop = cur + step_chi_ * rng_.normal();
                    double m_new = m, S_base = S;
                    if (prop > m_new) {
                        S_base = S * std::exp(m - prop);
                        m_new = prop;
                    }
                    const double S_prop =
                        S_base - std::exp(cur - m_new) + std::exp(prop - m_new);
                    const double S_old = S_base;
                    double dloglik = 0.0;
                    if (n_total > 0) {
                        const double n_v = static_cast<double>(
                            n_wv_[(static_cast<std::size_t>(t) * mc_.K + k) * mc_.V + v]);
                        dloglik = n_v * (prop - cur) - n_total * (std::log(S_prop) - std::log(S_old));
                    }
                    const double dlp = rw_prior_delta(state_.chi, mc_.K * mc_.V,
                                                      (static_cast<std::size_t>(k) * mc_.V + v), t,
                                                      cur, prop, var0, var_rw);
                    ++chi_attempts_;
                    if (std::log(std::max(rng_.uniform(), 1e-300)) < dloglik + dlp) {
                        state_.chi_at(t, k, v) = prop;
                        S = S_prop;
                        m = m_new;
                        ++chi_accepts_;
                    }
                }
            }
        }
    }

    // conjugate Gamma draw for the sense-distribution precision
    void update_precision() {
        const double shape =
            mc_.a + 0.5 * static_cast<double>(mc_.G) * mc_.K * (mc_.T - 1);
        double ssq = 0.0;
        for (int t = 1; t < mc_.T; ++t)
            for (int g = 0; g < mc_.G; ++g)
                for (int k = 0; k < mc_.K; ++k) {
                    const double d = state_.zeta_at(t, g, k) - state_.zeta_at(t - 1, g, k);
                    ssq += d * d;
                }
        const double rate = mc_.b + 0.5 * ssq;
        state_.kappa_phi = rng_.gamma(shape, rate);
    }

    std::vector<double> current_phi() const {
        std::vector<double> phi(static_cast<std::size_t>(mc_.T) * mc_.G * mc_.K);
        for (int t = 0; t < mc_.T; ++t)
            for (int g = 0; g < mc_.G; ++g) {
                std::span<const double> in(
                    &state_.zeta[(static_cast<std::size_t>(t) * mc_.G + g) * mc_.K],
                    static_cast<std::size_t>(mc_.K));
                std::span<double> out(&phi[(static_cast<std::size_t>(t) * mc_.G + g) * mc_.K],
                                      static_cast<std::size_t>(mc_.K));
                softmax_slice(in, out);
            }
        return phi;
    }

    double current_log_joint() const { return log_joint(state_, snippets_, mc_); }

    double chi_step() const { return step_chi_; }
    double zeta_step() const { return step_zeta_; }

private:
    void init_state() {
        // chi/zeta start at zero (uniform softmax); prior draws at large
        // sigma0 start the chain in a near-one-hot state that can trap all
        // snippets in a single sense.
        state_ = ModelState::zeros(mc_);
        state_.kappa_phi = rng_.gamma(mc_.a, mc_.b);
        state_.z.resize(snippets_.size());
        for (auto& zi : state_.z) zi = rng_.uniform_int(mc_.K);
    }

    void refresh_tables() {
        log_phi_.resize(static_cast<std::size_t>(mc_.T) * mc_.G * mc_.K);
        log_psi_.resize(static_cast<std::size_t>(mc_.T) * mc_.K * mc_.V);
        std::vector<double> tmp;
        for (int t = 0; t < mc_.T; ++t) {
            for (int g = 0; g < mc_.G; ++g) {
                tmp = softmax_slice(std::span<const double>(
                    &state_.zeta[(static_cast<std::size_t>(t) * mc_.G + g) * mc_.K],
                    static_cast<std::size_t>(mc_.K)));
                for (int k = 0; k < mc_.K; ++k)
                    log_phi_[(static_cast<std::size_t>(t) * mc_.G + g) * mc_.K + k] =
                        std::log(std::max(tmp[k], kProbFloor));
            }
            for (int k = 0; k < mc_.K; ++k) {
                tmp = softmax_slice(std::span<const double>(
                    &state_.chi[(static_cast<std::size_t>(t) * mc_.K + k) * mc_.V],
                    static_cast<std::size_t>(mc_.V)));
                for (int v = 0; v < mc_.V; ++v)
                    log_psi_[(static_cast<std::size_t>(t) * mc_.K + k) * mc_.V + v] =
                        std::log(std::max(tmp[v], kProbFloor));
            }
        }
    }

    void recount() {
        n_zg_.assign(static_cast<std::size_t>(mc_.T) * mc_.G * mc_.K, 0);
        n_tg_.assign(static_cast<std::size_t>(mc_.T) * mc_.G, 0);
        n_wv_.assign(static_cast<std::size_t>(mc_.T) * mc_.K * mc_.V, 0);
        n_wtot_.assign(static_cast<std::size_t>(mc_.T) * mc_.K, 0);
        for (std::size_t d = 0; d < snippets_.size(); ++d) {
            const auto& s = snippets_[d];
            const int k = state_.z[d];
            ++n_zg_[(static_cast<std::size_t>(s.time_bin) * mc_.G + s.genre) * mc_.K + k];
            ++n_tg_[static_cast<std::size_t>(s.time_bin) * mc_.G + s.genre];
            for (int w : s.context) {
                ++n_wv_[(static_cast<std::size_t>(s.time_bin) * mc_.K + k) * mc_.V + w];
                ++n_wtot_[static_cast<std::size_t>(s.time_bin) * mc_.K + k];
            }
        }
    }

    // log N terms that change when site (t, j) of a random-walk array moves
    double rw_prior_delta(const std::vector<double>& arr, int slice_len, std::size_t j, int t,
                          double cur, double prop, double var0, double var_rw) const {
        auto at = [&](int tt) {
            return arr[static_cast<std::size_t>(tt) * slice_len + j];
        };
        double d = 0.0;
        if (t == 0) {
            d += log_normal_pdf(prop, 0.0, var0) - log_normal_pdf(cur, 0.0, var0);
            if (mc_.T > 1)
                d += log_normal_pdf(at(1), prop, var_rw) - log_normal_pdf(at(1), cur, var_rw);
        } else {
            d += log_normal_pdf(prop, at(t - 1), var_rw) - log_normal_pdf(cur, at(t - 1), var_rw);
            if (t + 1 < mc_.T)
                d += log_normal_pdf(at(t + 1), prop, var_rw) -
                     log_normal_pdf(at(t + 1), cur, var_rw);
        }
        return d;
    }

    // log-sum-exp change for the zeta slice (t, g) when site k moves to prop
    double lse_delta_zeta(int t, int g, int k, double prop) const {
        const double* row = &state_.zeta[(static_cast<std::size_t>(t) * mc_.G + g) * mc_.K];
        double m = prop;
        for (int j = 0; j < mc_.K; ++j) m = std::max(m, row[j]);
        double s_old = 0.0, s_new = 0.0;
        for (int j = 0; j < mc_.K; ++j) {
            const double e = std::exp(row[j] - m);
            s_old += e;
            s_new += (j == k) ? std::exp(prop - m) : e;
        }
        return std::log(s_new) - std::log(s_old);
    }

    void adapt(int iteration) {
        if ((iteration + 1) % 20 != 0) return;
        auto tune = [](double& step, long long& acc, long long& att) {
            if (att == 0) return;
            const double rate = static_cast<double>(acc) / static_cast<double>(att);
            if (rate < 0.25) step *= 0.8;
            else if (rate > 0.45) step *= 1.25;
            step = std::clamp(step, 1e-3, 20.0);
            acc = 0;
            att = 0;
        };
        tune(step_chi_, chi_accepts_, chi_attempts_);
        tune(step_zeta_, zeta_accepts_, zeta_attempts_);
    }

    std::vector<Snippet> snippets_;
    ModelConfig mc_;
    SamplerConfig sc_;
    Rng rng_;
    ModelState state_;
    std::vector<double> log_phi_, log_psi_;
    std::vector<long long> n_zg_, n_tg_, n_wv_, n_wtot_;
    double step_chi_ = 1.0, step_zeta_ = 1.0;
    long long chi_accepts_ = 0, chi_attempts_ = 0;
    long long zeta_accepts_ = 0, zeta_attempts_ = 0;
};

inline PosteriorTrajectory summarize(const SampleStore& store) {
    if (store.n_samples() < 2) throw std::invalid_argument("summarize: need >= 2 retained samples");
    PosteriorTrajectory traj;
    traj.T = store.T;
    traj.G = store.G;
    traj.K = store.K;
    traj.n_samples = store.n_samples();
    const std::size_t len = store.phi.front().size();
    traj.mean.assign(len, 0.0);
    traj.std.assign(len, 0.0);
    for (const auto& s : store.phi)
        for (std::size_t i = 0; i < len; ++i) traj.mean[i] += s[i];
    for (auto& m : traj.mean) m /= traj.n_samples;
    for (const auto& s : store.phi)
        for (std::size_t i = 0; i < len; ++i) {
            const double d = s[i] - traj.mean[i];
            traj.std[i] += d * d;
        }
    for (auto& v : traj.std) v = std::sqrt(v / (traj.n_samples - 1));
    return traj;
}

inline void write_trajectory_csv(const PosteriorTrajectory& traj, std::ostream& os) {
    os << "time_bin,genre,sense,mean,std\n";
    os.precision(17);
    for (int t = 0; t < traj.T; ++t)
        for (int g = 0; g < traj.G; ++g)
            for (int k = 0; k < traj.K; ++k)
                os << t << "," << g << "," << k << "," << traj.mean_at(t, g, k) << ","
                   << traj.std_at(t, g, k) << "\n";
}

inline PosteriorTrajectory read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("time_bin,genre,sense,mean,std", 0) != 0)
        throw std::invalid_argument("trajectory CSV: missing header");
    struct Row {
        int t, g, k;
        double mean, std;
    };
    std::vector<Row> rows;
    int maxT = -1, maxG = -1, maxK = -1;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        Row r;
        char c1, c2, c3, c4;
        std::istringstream iss(line);
        if (!(iss >> r.t >> c1 >> r.g >> c2 >> r.k >> c3 >> r.mean >> c4 >> r.std))
            throw std::invalid_argument("trajectory CSV: malformed row: " + line);
        rows.push_back(r);
        maxT = std::max(maxT, r.t);
        maxG = std::max(maxG, r.g);
        maxK = std::max(maxK, r.k);
    }
    if (rows.empty()) throw std::invalid_argument("trajectory CSV: no data rows");
    PosteriorTrajectory traj;
    traj.T = maxT + 1;
    traj.G = maxG + 1;
    traj.K = maxK + 1;
    traj.n_samples = 0;
    const std::size_t len = static_cast<std::size_t>(traj.T) * traj.G * traj.K;
    if (rows.size() != len) throw std::invalid_argument("trajectory CSV: incomplete grid");
    traj.mean.assign(len, 0.0);
    traj.std.assign(len, 0.0);
    for (const auto& r : rows) {
        const std::size_t i = (static_cast<std::size_t>(r.t) * traj.G + r.g) * traj.K + r.k;
        traj.mean[i] = r.mean;
        traj.std[i] = r.std;
    }
    return traj;
}

inline nlohmann::json samples_to_json(const SampleStore& store) {
    return nlohmann::json{{"format", "gasc-samples"},
                          {"version", 1},
                          {"dims", {{"T", store.T}, {"G", store.G}, {"K", store.K}}},
                          {"phi", store.phi},
                          {"kappa_phi", store.kappa_phi},
                          {"final_state", state_to_json(store.final_state)}};
}

inline SampleStore samples_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "gasc-samples" || j.value("version", 0) != 1)
        throw std::invalid_argument("not a gasc-samples v1 document");
    SampleStore store;
    store.T = j["dims"]["T"].get<int>();
    store.G = j["dims"]["G"].get<int>();
    store.K = j["dims"]["K"].get<int>();
    store.phi = j["phi"].get<std::vector<std::vector<double>>>();
    store.kappa_phi = j["kappa_phi"].get<std::vector<double>>();
    store.final_state = state_from_json(j["final_state"]);
    return store;
}

}  // namespace gasc
