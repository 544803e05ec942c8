#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gasc/gibbs.hpp"
#include "gasc/model.hpp"

using namespace gasc;
using Catch::Approx;

namespace {

Snippet make_snippet(int t, int g, std::vector<int> context) {
    Snippet s;
    s.time_bin = t;
    s.genre = g;
    s.context = std::move(context);
    return s;
}

}  // namespace

TEST_CASE("sense conditional: symmetric state gives uniform") {
    ModelConfig c;
    c.K = 2;
    c.G = 1;
    c.T = 2;
    c.V = 2;
    auto state = ModelState::zeros(c);
    state.kappa_phi = 1.0;
    auto p = sense_conditional(make_snippet(0, 0, {0, 1}), state, c);
    CHECK(p[0] == Approx(0.5).margin(1e-12));
    CHECK(p[1] == Approx(0.5).margin(1e-12));
}

TEST_CASE("sense conditional follows the word likelihood") {
    // phi uniform, psi_0[w]=0.9, psi_1[w]=0.1, context {w}
    ModelConfig c;
    c.K = 2;
    c.G = 1;
    c.T = 2;
    c.V = 2;
    auto state = ModelState::zeros(c);
    state.kappa_phi = 1.0;
    state.chi_at(0, 0, 0) = std::log(9.0);  // psi_0 = (0.9, 0.1)
    state.chi_at(0, 1, 1) = std::log(9.0);  // psi_1 = (0.1, 0.9)
    auto p = sense_conditional(make_snippet(0, 0, {0}), state, c);
    CHECK(p[0] == Approx(0.9).margin(1e-12));
    CHECK(p[1] == Approx(0.1).margin(1e-12));
}

TEST_CASE("sense conditional follows phi when likelihoods cancel") {
    ModelConfig c;
    c.K = 2;
    c.G = 1;
    c.T = 2;
    c.V = 2;
    auto state = ModelState::zeros(c);
    state.kappa_phi = 1.0;
    state.zeta_at(0, 0, 0) = std::log(4.0);  // phi = (0.8, 0.2)
    auto p = sense_conditional(make_snippet(0, 0, {0, 1}), state, c);
    CHECK(p[0] == Approx(0.8).margin(1e-12));
    CHECK(p[1] == Approx(0.2).margin(1e-12));
}

TEST_CASE("precision update: constant zeta gives the conjugate prior-posterior") {
    // a=b=1, G=K=1, T=3, zeta constant -> Gamma(2, 1), mean 2, var 2
    ModelConfig c;
    c.K = 1;
    c.G = 1;
    c.T = 3;
    c.V = 2;
    SamplerConfig sc;
    sc.n_iterations = 2;
    sc.burn_in = 0;
    sc.seed = 123;
    GibbsSampler sampler({make_snippet(0, 0, {0})}, c, sc);
    auto state = ModelState::zeros(c);
    state.z = {0};
    state.kappa_phi = 1.0;
    double sum = 0.0, sumsq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        sampler.set_state(state);
        sampler.update_precision();
        const double k = sampler.state().kappa_phi;
        sum += k;
        sumsq += k * k;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(mean == Approx(2.0).epsilon(0.05));
    CHECK(var == Approx(2.0).epsilon(0.10));
}

TEST_CASE("precision update: larger increments give smaller kappa") {
    ModelConfig c;
    c.K = 1;
    c.G = 1;
    c.T = 3;
    c.V = 2;
    SamplerConfig sc;
    sc.n_iterations = 2;
    sc.burn_in = 0;
    sc.seed = 5;
    GibbsSampler sampler({make_snippet(0, 0, {0})}, c, sc);
    auto smooth = ModelState::zeros(c);
    smooth.z = {0};
    auto rough = smooth;
    rough.zeta_at(1, 0, 0) = 3.0;
    auto mean_kappa = [&](const ModelState& st) {
        double sum = 0.0;
        for (int i = 0; i < 5000; ++i) {
            sampler.set_state(st);
            sampler.update_precision();
            sum += sampler.state().kappa_phi;
        }
        return sum / 5000.0;
    };
    CHECK(mean_kappa(smooth) > mean_kappa(rough));
}

TEST_CASE("word params: repeated word raises its posterior mean above the prior") {
    // 1 sense, V=2, every snippet contains only word 0
    ModelConfig c;
    c.K = 1;
    c.G = 1;
    c.T = 2;
    c.V = 2;
    c.sigma0 = 2.0;
    std::vector<Snippet> snippets;
    for (int i = 0; i < 10; ++i) snippets.push_back(make_snippet(i % 2, 0, {0, 0}));
    SamplerConfig sc;
    sc.n_iterations = 2;
    sc.burn_in = 0;
    sc.seed = 77;
    GibbsSampler sampler(snippets, c, sc);
    auto state = ModelState::zeros(c);
    state.z.assign(snippets.size(), 0);
    sampler.set_state(state);
    double mean_psi0 = 0.0;
    const int sweeps = 1000;
    for (int i = 0; i < sweeps; ++i) {
        sampler.update_word_params();
        const auto& st = sampler.state();
        std::vector<double> row{st.chi_at(0, 0, 0), st.chi_at(0, 0, 1)};
        mean_psi0 += softmax_slice(row)[0];
    }
    mean_psi0 /= sweeps;
    CHECK(mean_psi0 > 0.6);  // prior mean is 0.5 by symmetry
}

TEST_CASE("word params: empty sense follows the temporal prior with path mean 0") {
    ModelConfig c;
    c.K = 1;
    c.G = 1;
    c.T = 2;
    c.V = 2;
    c.sigma0 = 1.0;
    std::vector<Snippet> snippets{make_snippet(0, 0, {})};  // no word evidence
    SamplerConfig sc;
    sc.n_iterations = 2;
    sc.burn_in = 0;
    sc.seed = 31;
    GibbsSampler sampler(snippets, c, sc);
    auto state = ModelState::zeros(c);
    state.z = {0};
    sampler.set_state(state);
    // kappa_psi couples the two slices tightly, so the pair diffuses with an
    // effective step ~1/sqrt(kappa_psi); needs many sweeps for a stable mean
    double mean = 0.0;
    long long n = 0;
    for (int i = 0; i < 60000; ++i) {
        sampler.update_word_params();
        for (double x : sampler.state().chi) {
            mean += x;
            ++n;
        }
    }
    mean /= static_cast<double>(n);
    CHECK(std::abs(mean) < 0.3);
}

TEST_CASE("word params: large kappa_psi pins chi paths near-constant in time") {
    ModelConfig c;
    c.K = 1;
    c.G = 1;
    c.T = 3;
    c.V = 2;
    c.sigma0 = 1.0;
    std::vector<Snippet> snippets{make_snippet(0, 0, {})};
    auto mean_abs_increment = [&](double kappa_psi, std::uint64_t seed) {
        ModelConfig cc = c;
        cc.kappa_psi = kappa_psi;
        SamplerConfig sc;
        sc.n_iterations = 2;
        sc.burn_in = 0;
        sc.seed = seed;
        GibbsSampler sampler(snippets, cc, sc);
        auto state = ModelState::zeros(cc);
        state.z = {0};
        sampler.set_state(state);
        double acc = 0.0;
        long long n = 0;
        for (int i = 0; i < 3000; ++i) {
            sampler.update_word_params();
            const auto& st = sampler.state();
            for (int t = 1; t < cc.T; ++t)
                for (int v = 0; v < cc.V; ++v) {
                    acc += std::abs(st.chi_at(t, 0, v) - st.chi_at(t - 1, 0, v));
                    ++n;
                }
        }
        return acc / static_cast<double>(n);
    };
    const double loose = mean_abs_increment(1.0, 9);
    const double tight = mean_abs_increment(10000.0, 9);
    CHECK(tight < 0.2 * loose);
}

TEST_CASE("sense params: unanimous assignments dominate phi at every bin") {
    ModelConfig c;
    c.K = 2;
    c.G = 1;
    c.T = 3;
    c.V = 2;
    c.sigma0 = 2.0;
    std::vector<Snippet> snippets;
    for (int i = 0; i < 30; ++i) snippets.push_back(make_snippet(i % 3, 0, {0}));
    SamplerConfig sc;
    sc.n_iterations = 2;
    sc.burn_in = 0;
    sc.seed = 4;
    GibbsSampler sampler(snippets, c, sc);
    auto state = ModelState::zeros(c);
    state.z.assign(snippets.size(), 0);
    state.kappa_phi = 1.0;
    sampler.set_state(state);
    std::vector<double> mean_phi0(c.T, 0.0);
    const int sweeps = 2000;
    for (int i = 0; i < sweeps; ++i) {
        sampler.update_sense_params();
        sampler.update_precision();
        const auto phi = sampler.current_phi();
        for (int t = 0; t < c.T; ++t) mean_phi0[t] += phi[static_cast<std::size_t>(t) * c.K];
    }
    for (int t = 0; t < c.T; ++t) CHECK(mean_phi0[t] / sweeps > 0.5);
}

TEST_CASE("sense params: empty genre follows the temporal prior") {
    ModelConfig c;
    c.K = 2;
    c.G = 2;
    c.T = 2;
    c.V = 2;
    c.sigma0 = 1.0;
    std::vector<Snippet> snippets{make_snippet(0, 0, {0})};  // genre 1 empty
    SamplerConfig sc;
    sc.n_iterations = 2;
    sc.burn_in = 0;
    sc.seed = 21;
    GibbsSampler sampler(snippets, c, sc);
    auto state = ModelState::zeros(c);
    state.z = {0};
    state.kappa_phi = 1.0;
    sampler.set_state(state);
    double mean = 0.0;
    long long n = 0;
    for (int i = 0; i < 4000; ++i) {
        sampler.update_sense_params();
        const auto& st = sampler.state();
        for (int t = 0; t < c.T; ++t)
            for (int k = 0; k < c.K; ++k) {
                mean += st.zeta_at(t, 1, k);
                ++n;
            }
    }
    mean /= static_cast<double>(n);
    CHECK(std::abs(mean) < 0.3);
}

TEST_CASE("run_chain is deterministic given the seed") {
    ModelConfig c;
    c.K = 2;
    c.G = 1;
    c.T = 2;
    c.V = 3;
    std::vector<Snippet> snippets{make_snippet(0, 0, {0, 1}), make_snippet(1, 0, {2}),
                                  make_snippet(1, 0, {0})};
    SamplerConfig sc;
    sc.n_iterations = 50;
    sc.burn_in = 10;
    sc.seed = 2024;
    auto run = [&] { return GibbsSampler(snippets, c, sc).run(); };
    auto a = run();
    auto b = run();
    CHECK(a.phi == b.phi);
    CHECK(a.kappa_phi == b.kappa_phi);
    CHECK(a.z == b.z);
}

TEST_CASE("run_chain rejects an empty snippet set") {
    ModelConfig c;
    c.K = 2;
    c.G = 1;
    c.T = 2;
    c.V = 2;
    SamplerConfig sc;
    CHECK_THROWS_AS(GibbsSampler({}, c, sc), std::invalid_argument);
}

TEST_CASE("log joint along the chain stays finite and stabilizes") {
    ModelConfig c;
    c.K = 2;
    c.G = 1;
    c.T = 2;
    c.V = 4;
    c.sigma0 = 2.0;
    std::vector<Snippet> snippets;
    for (int i = 0; i < 20; ++i) snippets.push_back(make_snippet(i % 2, 0, {i % 4, (i + 1) % 4}));
    SamplerConfig sc;
    sc.n_iterations = 400;
    sc.burn_in = 100;
    sc.seed = 12;
    GibbsSampler sampler(snippets, c, sc);
    std::vector<double> lj;
    for (int it = 0; it < sc.n_iterations; ++it) {
        sampler.sweep(it);
        lj.push_back(sampler.current_log_joint());
        REQUIRE(std::isfinite(lj.back()));
    }
    const double mid = std::accumulate(lj.begin() + 100, lj.begin() + 250, 0.0) / 150.0;
    const double late = std::accumulate(lj.begin() + 250, lj.end(), 0.0) / 150.0;
    CHECK(std::abs(late - mid) < 0.25 * std::abs(mid) + 10.0);
}

TEST_CASE("sense-label permutation of the initialization permutes the summaries") {
    // strongly identifiable data so each chain stays in its labeled mode
    ModelConfig c;
    c.K = 2;
    c.G = 1;
    c.T = 2;
    c.V = 2;
    c.sigma0 = 2.0;
    c.kappa_psi = 10.0;
    std::vector<Snippet> snippets;
    for (int t = 0; t < 2; ++t)
        for (int i = 0; i < 40; ++i) {
            snippets.push_back(make_snippet(t, 0, {0, 0, 0}));
            snippets.push_back(make_snippet(t, 0, {1, 1, 1}));
        }
    SamplerConfig sc;
    sc.n_iterations = 800;
    sc.burn_in = 200;
    sc.seed = 3;
    GibbsSampler a(snippets, c, sc);
    GibbsSampler b(snippets, c, sc);
    // permute senses 0<->1 in b's initial state
    auto init = a.state();
    auto permuted = init;
    for (int t = 0; t < c.T; ++t) {
        for (int v = 0; v < c.V; ++v) {
            permuted.chi_at(t, 0, v) = init.chi_at(t, 1, v);
            permuted.chi_at(t, 1, v) = init.chi_at(t, 0, v);
        }
        permuted.zeta_at(t, 0, 0) = init.zeta_at(t, 0, 1);
        permuted.zeta_at(t, 0, 1) = init.zeta_at(t, 0, 0);
    }
    for (auto& z : permuted.z) z = 1 - z;
    b.set_state(permuted);
    auto ta = summarize(a.run());
    auto tb = summarize(b.run());
    for (int t = 0; t < c.T; ++t) {
        CHECK(ta.mean_at(t, 0, 0) == Approx(tb.mean_at(t, 0, 1)).margin(0.06));
        CHECK(ta.mean_at(t, 0, 1) == Approx(tb.mean_at(t, 0, 0)).margin(0.06));
    }
}

TEST_CASE("planted dominant sense is recovered") {
    ModelConfig c;
    c.K = 2;
    c.G = 1;
    c.T = 2;
    c.V = 10;
    c.kappa_psi = 100.0;
    TrajectorySpec spec;
    spec.phi = std::vector<double>{0.85, 0.15, 0.85, 0.15};
    std::vector<double> psi(static_cast<std::size_t>(c.T) * c.K * c.V, 0.0);
    for (int t = 0; t < c.T; ++t)
        for (int v = 0; v < c.V; ++v) {
            psi[(static_cast<std::size_t>(t) * c.K + 0) * c.V + v] = v < 5 ? 0.2 : 0.0;
            psi[(static_cast<std::size_t>(t) * c.K + 1) * c.V + v] = v >= 5 ? 0.2 : 0.0;
        }
    spec.psi = psi;
    spec.words_per_snippet = 6;
    int hits = 0;
    const int n_seeds = 5;
    for (int seed = 0; seed < n_seeds; ++seed) {
        auto sim = forward_simulate(c, spec, 60, 1000 + seed);
        SamplerConfig sc;
        sc.n_iterations = 400;
        sc.burn_in = 100;
        sc.seed = seed;
        auto traj = summarize(GibbsSampler(sim.snippets, c, sc).run());
        // the dominant planted sense should rank first at both bins
        double avg0 = 0.0, avg1 = 0.0;
        for (int t = 0; t < c.T; ++t) {
            avg0 += traj.mean_at(t, 0, 0);
            avg1 += traj.mean_at(t, 0, 1);
        }
        if (std::max(avg0, avg1) / c.T > 0.6) ++hits;
    }
    CHECK(hits >= 4);
}

TEST_CASE("summarize: identical samples give zero std") {
    SampleStore store;
    store.T = 1;
    store.G = 1;
    store.K = 2;
    store.phi = {{0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}};
    auto traj = summarize(store);
    CHECK(traj.mean_at(0, 0, 0) == Approx(0.3));
    CHECK(traj.std_at(0, 0, 0) == 0.0);
}

TEST_CASE("summarize: two-point sample statistics") {
    SampleStore store;
    store.T = 1;
    store.G = 1;
    store.K = 2;
    store.phi = {{0.4, 0.6}, {0.6, 0.4}};
    auto traj = summarize(store);
    CHECK(traj.mean_at(0, 0, 0) == Approx(0.5));
    CHECK(traj.std_at(0, 0, 0) == Approx(std::sqrt(0.02)).margin(1e-12));  // ~0.1414
}

TEST_CASE("summarize means sum to 1 per (t, g)") {
    SampleStore store;
    store.T = 2;
    store.G = 2;
    store.K = 3;
    Rng rng(55);
    for (int s = 0; s < 10; ++s) {
        std::vector<double> phi;
        for (int tg = 0; tg < store.T * store.G; ++tg) {
            std::vector<double> row(store.K);
            for (auto& x : row) x = rng.uniform();
            const double sum = std::accumulate(row.begin(), row.end(), 0.0);
            for (auto& x : row) phi.push_back(x / sum);
        }
        store.phi.push_back(phi);
    }
    auto traj = summarize(store);
    for (int t = 0; t < store.T; ++t)
        for (int g = 0; g < store.G; ++g) {
            double sum = 0.0;
            for (int k = 0; k < store.K; ++k) sum += traj.mean_at(t, g, k);
            CHECK(sum == Approx(1.0).margin(1e-9));
        }
}

TEST_CASE("summarize requires at least two samples") {
    SampleStore store;
    store.T = 1;
    store.G = 1;
    store.K = 1;
    store.phi = {{1.0}};
    CHECK_THROWS_AS(summarize(store), std::invalid_argument);
}

TEST_CASE("trajectory CSV round trip") {
    SampleStore store;
    store.T = 2;
    store.G = 1;
    store.K = 2;
    store.phi = {{0.4, 0.6, 0.1, 0.9}, {0.5, 0.5, 0.2, 0.8}};
    auto traj = summarize(store);
    std::stringstream ss;
    write_trajectory_csv(traj, ss);
    auto restored = read_trajectory_csv(ss);
    CHECK(restored.mean == traj.mean);
    CHECK(restored.std == traj.std);
}

TEST_CASE("sample store JSON round trip") {
    ModelConfig c;
    c.K = 2;
    c.G = 1;
    c.T = 2;
    c.V = 2;
    std::vector<Snippet> snippets{make_snippet(0, 0, {0}), make_snippet(1, 0, {1})};
    SamplerConfig sc;
    sc.n_iterations = 20;
    sc.burn_in = 5;
    sc.seed = 8;
    auto store = GibbsSampler(snippets, c, sc).run();
    auto restored = samples_from_json(samples_to_json(store));
    CHECK(restored.phi == store.phi);
    CHECK(restored.kappa_phi == store.kappa_phi);
    CHECK(restored.final_state.chi == store.final_state.chi);
}

TEST_CASE("presets carry the documented hyperparameters") {
    auto latin = preset_by_name("latin-default");
    CHECK(latin.a == 1.0);
    CHECK(latin.b == 1.0);
    CHECK(latin.kappa_psi == 100.0);
    CHECK(latin.n_iterations == 2500);
    CHECK(latin.burn_in == 100);
    auto greek = preset_by_name("greek-gasc");
    CHECK(greek.a == 7.0);
    CHECK(greek.b == 3.0);
    CHECK(greek.kappa_psi == 10.0);
    CHECK(greek.n_iterations == 10000);
    auto scan = preset_by_name("scan");
    CHECK(scan.collapse_genres);
    CHECK_THROWS_AS(preset_by_name("nope"), std::invalid_argument);
}
