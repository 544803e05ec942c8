// gasc: genre-aware semantic change pipeline
//   train     fit the dynamic Bayesian sense model on a corpus
//   detect    turn posterior trajectories into binary change decisions
//   baseline  embedding baselines (temporal referencing / Procrustes-aligned SGNS)
//   evaluate  score decisions against a gold standard
//   simulate  draw a synthetic corpus from the generative model

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gasc/changepoint.hpp"
#include "gasc/corpus.hpp"
#include "gasc/embeddings.hpp"
#include "gasc/eval.hpp"
#include "gasc/gibbs.hpp"
#include "gasc/manifest.hpp"
#include "gasc/model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitModel = 3;
constexpr int kExitPartial = 4;

gasc::CorpusFormat parse_format(const std::string& s) {
    if (s == "jsonl") return gasc::CorpusFormat::Jsonl;
    if (s == "tsv") return gasc::CorpusFormat::Tsv;
    throw CLI::ValidationError("--format", "expected jsonl or tsv");
}

std::string default_out_dir() {
    if (const char* env = std::getenv("GASC_OUT_DIR")) return env;
    return "";
}

struct CommonArgs {
    std::string corpus_path;
    std::string format = "jsonl";
    std::vector<std::string> targets;
    std::vector<long long> bin_edges;
    std::string out = default_out_dir();
    bool force = false;
    int workers = 1;
    std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_corpus = true) {
    if (needs_corpus) {
        cmd->add_option("--corpus", args.corpus_path, "input corpus file")->required();
        cmd->add_option("--format", args.format, "corpus format: jsonl or tsv")
            ->check(CLI::IsMember({"jsonl", "tsv"}));
        cmd->add_option("--target", args.targets, "target lemma (repeatable)")->required();
        cmd->add_option("--bins", args.bin_edges,
                        "time bin edges, strictly increasing (e.g. --bins -300 0 500)")
            ->required()
            ->expected(-2);
    }
    cmd->add_option("--out", args.out, "output directory")->required(args.out.empty());
    cmd->add_flag("--force", args.force, "overwrite an existing output directory");
    cmd->add_option("--workers", args.workers,
                    "max parallel workers; determinism is only guaranteed with 1");
    cmd->add_option("--seed", args.seed, "random seed");
}

int run_train(const CommonArgs& common, const std::string& preset_name, int K, int min_count,
              int window, int iterations, int burn_in, int thinning, double sigma0) {
    const auto preset = gasc::preset_by_name(preset_name);
    gasc::IngestReport report;
    auto docs = gasc::ingest(common.corpus_path, parse_format(common.format), &report);
    report.print(std::cerr);
    const auto binning = gasc::TimeBinning::from_edges(common.bin_edges);
    const auto bins = gasc::assign_bins(docs, binning);
    const auto genres = gasc::GenreMap::build(docs, preset.collapse_genres);

    gasc::OutputDir outdir(common.out, common.force);
    gasc::RunManifest manifest;
    manifest.command = "train";
    manifest.started_at = gasc::RunManifest::now_iso8601();
    manifest.seed = common.seed;
    manifest.input_digests["corpus"] = gasc::file_digest(common.corpus_path);

    json genre_labels = json::array();
    for (const auto& g : genres.label) genre_labels.push_back(g);

    for (const auto& target : common.targets) {
        const auto raw = gasc::extract_snippets(docs, bins, genres, target, window);
        if (raw.empty()) {
            std::cerr << "error: no snippets for target '" << target << "'\n";
            return kExitInput;
        }
        const auto indexed = gasc::build_vocabulary(raw, min_count);

        gasc::ModelConfig mc;
        mc.K = K;
        mc.G = genres.size();
        mc.T = binning.bin_count();
        mc.V = indexed.vocab.size();
        mc.W = window;
        mc.a = preset.a;
        mc.b = preset.b;
        mc.kappa_psi = preset.kappa_psi;
        mc.sigma0 = sigma0;
        mc.validate();

        gasc::SamplerConfig sc;
        sc.n_iterations = iterations > 0 ? iterations : preset.n_iterations;
        sc.burn_in = burn_in >= 0 ? burn_in : preset.burn_in;
        sc.thinning = thinning;
        sc.seed = common.seed;
        sc.validate();

        gasc::GibbsSampler sampler(indexed.snippets, mc, sc);
        const auto store = sampler.run();
        const auto traj = gasc::summarize(store);

        {
            std::ofstream csv(outdir.staging() / (target + "_trajectory.csv"));
            gasc::write_trajectory_csv(traj, csv);
        }
        {
            std::ofstream ckpt(outdir.staging() / (target + "_checkpoint.json"));
            ckpt << gasc::samples_to_json(store).dump() << "\n";
        }
        manifest.config["targets"].push_back(
            json{{"lemma", target},
                 {"snippets", indexed.snippets.size()},
                 {"model", {{"K", mc.K}, {"G", mc.G}, {"T", mc.T}, {"V", mc.V}, {"W", mc.W},
                            {"a", mc.a}, {"b", mc.b}, {"kappa_psi", mc.kappa_psi},
                            {"sigma0", mc.sigma0}}},
                 {"sampler", {{"n_iterations", sc.n_iterations}, {"burn_in", sc.burn_in},
                              {"thinning", sc.thinning}, {"seed", sc.seed}}}});
    }

    manifest.config["preset"] = preset.name;
    manifest.config["a"] = preset.a;
    manifest.config["b"] = preset.b;
    manifest.config["kappa_psi"] = preset.kappa_psi;
    manifest.config["iterations"] = iterations > 0 ? iterations : preset.n_iterations;
    manifest.config["G"] = genres.size();
    manifest.config["genres"] = genre_labels;
    manifest.config["bins"] = common.bin_edges;
    manifest.config["min_count"] = min_count;
    manifest.config["window"] = window;
    manifest.config["workers"] = common.workers;
    manifest.finished_at = gasc::RunManifest::now_iso8601();
    manifest.write(outdir.staging() / "manifest.json");
    outdir.commit();
    return 0;
}

int run_detect(const std::vector<std::string>& files, const CommonArgs& common, bool endpoints_only,
               const std::string& std_rule, double n_sigma) {
    gasc::ChangeRule rule;
    rule.endpoints_only = endpoints_only;
    rule.n_sigma = n_sigma;
    if (std_rule == "max") rule.combine = gasc::StdCombine::MaxStd;
    else if (std_rule == "pooled") rule.combine = gasc::StdCombine::Pooled;
    else if (std_rule == "either") rule.combine = gasc::StdCombine::EitherBin;
    else throw CLI::ValidationError("--std-rule", "expected max, pooled, or either");

    gasc::OutputDir outdir(common.out, common.force);
    gasc::RunManifest manifest;
    manifest.command = "detect";
    manifest.started_at = gasc::RunManifest::now_iso8601();

    std::map<std::string, gasc::PosteriorTrajectory> trajs;
    std::map<std::string, std::string> errors;
    for (const auto& f : files) {
        std::string lemma = fs::path(f).stem().string();
        const std::string suffix = "_trajectory";
        if (lemma.size() > suffix.size() &&
            lemma.compare(lemma.size() - suffix.size(), suffix.size(), suffix) == 0)
            lemma.resize(lemma.size() - suffix.size());
        try {
            std::ifstream in(f);
            if (!in) throw std::runtime_error("cannot open " + f);
            trajs[lemma] = gasc::read_trajectory_csv(in);
            manifest.input_digests[lemma] = gasc::file_digest(f);
        } catch (const std::exception& e) {
            errors[lemma] = e.what();
        }
    }
    if (trajs.empty()) {
        std::cerr << "error: no valid trajectory files\n";
        return kExitInput;
    }
    auto result = gasc::detect_change_batch(trajs, rule);
    for (const auto& [lemma, msg] : result.errors) errors[lemma] = msg;
    {
        std::ofstream out(outdir.staging() / "decisions.tsv");
        gasc::write_decisions_tsv(result.decisions, out);
    }
    for (const auto& [lemma, msg] : errors)
        std::cerr << "error for " << lemma << ": " << msg << "\n";
    manifest.config = json{{"endpoints_only", endpoints_only},
                           {"std_rule", std_rule},
                           {"n_sigma", n_sigma},
                           {"errors", errors}};
    manifest.finished_at = gasc::RunManifest::now_iso8601();
    manifest.write(outdir.staging() / "manifest.json");
    outdir.commit();
    return errors.empty() ? 0 : kExitPartial;
}

int run_baseline(const CommonArgs& common, const std::string& mode_name,
                 const std::vector<std::string>& include, const std::vector<std::string>& exclude,
                 gasc::SgnsConfig sgns, double quantile, double shift, bool mle, int t1, int t2) {
    const auto mode = mode_name == "tr" ? gasc::BaselineMode::TemporalReferencing
                                        : gasc::BaselineMode::ProcrustesSgns;
    gasc::IngestReport report;
    auto docs = gasc::ingest(common.corpus_path, parse_format(common.format), &report);
    report.print(std::cerr);
    const auto binning = gasc::TimeBinning::from_edges(common.bin_edges);
    if (mode == gasc::BaselineMode::ProcrustesSgns && binning.bin_count() < 2)
        throw std::invalid_argument("procrustes mode needs at least two time bins");

    gasc::GenreFilter filter;
    filter.include.insert(include.begin(), include.end());
    filter.exclude.insert(exclude.begin(), exclude.end());
    std::set<std::string> targets(common.targets.begin(), common.targets.end());
    sgns.seed = common.seed;

    const auto series =
        gasc::score_targets(mode, docs, targets, binning, sgns, filter, t1,
                            t2 >= 0 ? t2 : binning.bin_count() - 1);
    const auto decisions =
        gasc::gamma_threshold_decisions(series, {shift, quantile, mle});

    gasc::OutputDir outdir(common.out, common.force);
    {
        std::ofstream out(outdir.staging() / "similarities.tsv");
        gasc::write_similarity_tsv(series, out);
    }
    {
        std::ofstream out(outdir.staging() / "decisions.tsv");
        std::map<std::string, gasc::ChangeDecision> wrapped;
        for (const auto& [lemma, changed] : decisions.changed) wrapped[lemma].changed = changed;
        gasc::write_decisions_tsv(wrapped, out);
    }
    gasc::RunManifest manifest;
    manifest.command = "baseline";
    manifest.started_at = gasc::RunManifest::now_iso8601();
    manifest.seed = common.seed;
    manifest.input_digests["corpus"] = gasc::file_digest(common.corpus_path);
    manifest.config = json{{"mode", mode_name},
                           {"genre_include", include},
                           {"genre_exclude", exclude},
                           {"bins", common.bin_edges},
                           {"t1", t1},
                           {"t2", t2 >= 0 ? t2 : binning.bin_count() - 1},
                           {"sgns", {{"dim", sgns.dim}, {"window", sgns.window},
                                     {"negatives", sgns.negatives}, {"epochs", sgns.epochs},
                                     {"min_count", sgns.min_count}, {"alpha", sgns.alpha}}},
                           {"gamma", {{"quantile", quantile}, {"shift", shift}, {"mle", mle},
                                      {"threshold", decisions.threshold},
                                      {"degenerate", decisions.degenerate}}},
                           {"missing", series.missing},
                           {"workers", common.workers}};
    manifest.finished_at = gasc::RunManifest::now_iso8601();
    manifest.write(outdir.staging() / "manifest.json");
    outdir.commit();
    return series.missing.empty() ? 0 : kExitPartial;
}

int run_evaluate(const std::string& decisions_path, const std::string& gold_path,
                 const CommonArgs& common) {
    std::ifstream din(decisions_path);
    if (!din) throw std::runtime_error("cannot open " + decisions_path);
    const auto predictions = gasc::read_decisions_tsv(din);
    const auto gold = gasc::load_gold(gold_path);
    const auto matrix = gasc::confusion(predictions, gold);
    const auto rep = gasc::report(matrix, {{"decisions", fs::path(decisions_path).filename().string()},
                                           {"gold", fs::path(gold_path).filename().string()}});
    std::cout << rep.text();

    gasc::OutputDir outdir(common.out, common.force);
    {
        std::ofstream out(outdir.staging() / "report.txt");
        out << rep.text();
    }
    {
        std::ofstream out(outdir.staging() / "report.json");
        out << rep.json().dump(2) << "\n";
    }
    gasc::RunManifest manifest;
    manifest.command = "evaluate";
    manifest.started_at = gasc::RunManifest::now_iso8601();
    manifest.input_digests["decisions"] = gasc::file_digest(decisions_path);
    manifest.input_digests["gold"] = gasc::file_digest(gold_path);
    manifest.finished_at = gasc::RunManifest::now_iso8601();
    manifest.write(outdir.staging() / "manifest.json");
    outdir.commit();
    return 0;
}

int run_simulate(const CommonArgs& common, gasc::ModelConfig mc, int n_per_bin,
                 int words_per_snippet, const std::string& spec_path,
                 const std::string& target_lemma) {
    gasc::TrajectorySpec spec;
    spec.words_per_snippet = words_per_snippet;
    if (!spec_path.empty()) {
        std::ifstream in(spec_path);
        if (!in) throw std::runtime_error("cannot open " + spec_path);
        json j = json::parse(in);
        if (j.contains("phi")) spec.phi = j["phi"].get<std::vector<double>>();
        if (j.contains("psi")) spec.psi = j["psi"].get<std::vector<double>>();
        if (j.contains("genre_probs"))
            spec.genre_probs = j["genre_probs"].get<std::vector<double>>();
        spec.stratify_genres = j.value("stratify_genres", false);
    }
    mc.validate();
    const auto sim = gasc::forward_simulate(mc, spec, n_per_bin, common.seed);

    gasc::OutputDir outdir(common.out, common.force);
    const int width = static_cast<int>(std::to_string(mc.V - 1).size());
    auto word_name = [&](int v) {
        std::string s = std::to_string(v);
        return "w" + std::string(width - static_cast<int>(s.size()), '0') + s;
    };
    {
        // one document per snippet; target placed mid-context so a window of
        // ceil(n/2) re-extracts the same bag
        std::ofstream out(outdir.staging() / "corpus.jsonl");
        for (const auto& s : sim.snippets) {
            json lemmas = json::array();
            const std::size_t half = (s.context.size() + 1) / 2;
            for (std::size_t i = 0; i < half; ++i) lemmas.push_back(word_name(s.context[i]));
            lemmas.push_back(target_lemma);
            for (std::size_t i = half; i < s.context.size(); ++i)
                lemmas.push_back(word_name(s.context[i]));
            out << json{{"doc_id", "sim-" + std::to_string(s.snippet_id)},
                        {"time", s.time_bin},
                        {"genre", "g" + std::to_string(s.genre)},
                        {"lemmas", lemmas}}
                       .dump()
                << "\n";
        }
    }
    {
        std::ofstream out(outdir.staging() / "true_state.json");
        out << gasc::state_to_json(sim.true_state).dump() << "\n";
    }
    {
        std::ofstream out(outdir.staging() / "true_z.tsv");
        out << "snippet_id\tsense\n";
        for (std::size_t i = 0; i < sim.true_z.size(); ++i)
            out << sim.snippets[i].snippet_id << "\t" << sim.true_z[i] << "\n";
    }
    gasc::RunManifest manifest;
    manifest.command = "simulate";
    manifest.started_at = gasc::RunManifest::now_iso8601();
    manifest.seed = common.seed;
    manifest.config = json{{"K", mc.K}, {"G", mc.G}, {"T", mc.T}, {"V", mc.V}, {"W", mc.W},
                           {"a", mc.a}, {"b", mc.b}, {"kappa_psi", mc.kappa_psi},
                           {"sigma0", mc.sigma0}, {"n_per_bin", n_per_bin},
                           {"words_per_snippet", words_per_snippet},
                           {"target_lemma", target_lemma},
                           {"spec", spec_path}};
    manifest.finished_at = gasc::RunManifest::now_iso8601();
    manifest.write(outdir.staging() / "manifest.json");
    outdir.commit();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"genre-aware semantic change toolkit"};
    app.require_subcommand(1);

    // train
    CommonArgs train_args;
    std::string preset = "latin-default";
    int K = 4, min_count = 2, window = 5, iterations = -1, burn_in = -1, thinning = 1;
    double sigma0 = 10.0;
    auto* train = app.add_subcommand("train", "fit the dynamic Bayesian sense model");
    add_common(train, train_args);
    train->add_option("--preset", preset, "hyperparameter preset")
        ->check(CLI::IsMember({"latin-default", "greek-gasc", "scan"}));
    train->add_option("--senses,--K", K, "number of senses");
    train->add_option("--min-count", min_count, "vocabulary frequency cutoff");
    train->add_option("--window", window, "context window size W");
    train->add_option("--iterations", iterations, "override preset iteration count");
    train->add_option("--burn-in", burn_in, "override preset burn-in");
    train->add_option("--thinning", thinning, "keep every n-th post-burn-in sample");
    train->add_option("--sigma0", sigma0, "initial-slice prior standard deviation");

    // detect
    CommonArgs detect_args;
    std::vector<std::string> traj_files;
    bool endpoints_only = false;
    std::string std_rule = "max";
    double n_sigma = 2.0;
    auto* detect = app.add_subcommand("detect", "apply the two-sigma change rule");
    detect->add_option("files", traj_files, "trajectory CSV files")->required();
    add_common(detect, detect_args, false);
    detect->add_flag("--endpoints-only", endpoints_only, "compare first and last bins only");
    detect->add_option("--std-rule", std_rule, "comparison std: max, pooled, or either");
    detect->add_option("--n-sigma", n_sigma, "significance multiplier");

    // baseline
    CommonArgs baseline_args;
    std::string mode = "tr";
    std::vector<std::string> genre_include, genre_exclude;
    gasc::SgnsConfig sgns;
    double quantile = 0.75, shift = 1.0;
    bool mle = false;
    int t1 = 0, t2 = -1;
    auto* baseline = app.add_subcommand("baseline", "embedding-based change detection");
    add_common(baseline, baseline_args);
    baseline->add_option("--mode", mode, "tr (temporal referencing) or op (Procrustes SGNS)")
        ->check(CLI::IsMember({"tr", "op"}));
    baseline->add_option("--genre-include", genre_include, "keep only these genres");
    baseline->add_option("--genre-exclude", genre_exclude, "drop these genres");
    baseline->add_option("--dim", sgns.dim, "embedding dimension");
    baseline->add_option("--window", sgns.window, "context window");
    baseline->add_option("--negatives", sgns.negatives, "negative samples");
    baseline->add_option("--epochs", sgns.epochs, "training epochs");
    baseline->add_option("--min-count", sgns.min_count, "vocabulary frequency cutoff");
    baseline->add_option("--alpha", sgns.alpha, "initial learning rate");
    baseline->add_option("--quantile", quantile, "gamma threshold quantile");
    baseline->add_option("--shift", shift, "similarity shift before the gamma fit");
    baseline->add_flag("--mle", mle, "fit the gamma by maximum likelihood");
    baseline->add_option("--t1", t1, "first bin of the comparison");
    baseline->add_option("--t2", t2, "second bin of the comparison (default: last)");

    // evaluate
    CommonArgs eval_args;
    std::string decisions_path, gold_path;
    auto* evaluate = app.add_subcommand("evaluate", "score decisions against a gold standard");
    evaluate->add_option("--decisions", decisions_path, "decisions TSV")->required();
    evaluate->add_option("--gold", gold_path, "gold standard TSV")->required();
    add_common(evaluate, eval_args, false);

    // simulate
    CommonArgs sim_args;
    gasc::ModelConfig sim_mc;
    int n_per_bin = 100, words_per_snippet = 0;
    std::string spec_path, target_lemma = "target";
    auto* simulate = app.add_subcommand("simulate", "draw a synthetic corpus");
    add_common(simulate, sim_args, false);
    simulate->add_option("--senses,--K", sim_mc.K, "number of senses");
    simulate->add_option("--genres,--G", sim_mc.G, "number of genres");
    simulate->add_option("--time-bins,--T", sim_mc.T, "number of time bins");
    simulate->add_option("--vocab,--V", sim_mc.V, "vocabulary size");
    simulate->add_option("--window,--W", sim_mc.W, "window size");
    simulate->add_option("--a", sim_mc.a, "gamma shape for kappa_phi");
    simulate->add_option("--b", sim_mc.b, "gamma rate for kappa_phi");
    simulate->add_option("--kappa-psi", sim_mc.kappa_psi, "word-distribution precision");
    simulate->add_option("--sigma0", sim_mc.sigma0, "initial-slice prior sd");
    simulate->add_option("--n", n_per_bin, "snippets per time bin");
    simulate->add_option("--words-per-snippet", words_per_snippet, "words per snippet (default 2W)");
    simulate->add_option("--spec", spec_path, "trajectory spec JSON (phi/psi/genre_probs)");
    simulate->add_option("--target-lemma", target_lemma, "surface form of the simulated target");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed())
            return run_train(train_args, preset, K, min_count, window, iterations, burn_in,
                             thinning, sigma0);
        if (detect->parsed())
            return run_detect(traj_files, detect_args, endpoints_only, std_rule, n_sigma);
        if (baseline->parsed())
            return run_baseline(baseline_args, mode, genre_include, genre_exclude, sgns, quantile,
                                shift, mle, t1, t2);
        if (evaluate->parsed()) return run_evaluate(decisions_path, gold_path, eval_args);
        if (simulate->parsed())
            return run_simulate(sim_args, sim_mc, n_per_bin, words_per_snippet, spec_path,
                                target_lemma);
    } catch (const gasc::IngestError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitModel;
    }
    return 0;
}
