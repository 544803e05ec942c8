#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "gasc/eval.hpp"

using namespace gasc;
using Catch::Approx;

namespace {

struct TempFile {
    std::filesystem::path path;
    explicit TempFile(const std::string& contents) {
        path = std::filesystem::temp_directory_path() /
               ("gasc_eval_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) + ".tsv");
        std::ofstream out(path);
        out << contents;
    }
    ~TempFile() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("pooled confusion 26/2/12/0 reproduces the published scores") {
    ConfusionMatrix m{26, 2, 12, 0};
    auto s = prf(m);
    CHECK(s.precision == Approx(0.684).margin(0.001));
    CHECK(s.recall == Approx(1.000).margin(0.001));
    CHECK(s.f1 == Approx(0.813).margin(0.001));
    CHECK_FALSE(s.degenerate);
}

TEST_CASE("pooled confusion 20/8/6/6 gives the symmetric 0.769 triple") {
    ConfusionMatrix m{20, 8, 6, 6};
    auto s = prf(m);
    CHECK(s.precision == Approx(0.769).margin(0.001));
    CHECK(s.recall == Approx(0.769).margin(0.001));
    CHECK(s.f1 == Approx(0.769).margin(0.001));
}

TEST_CASE("all-negative predictions on a positive-free gold are degenerate zeros") {
    ConfusionMatrix m{0, 5, 0, 0};
    auto s = prf(m);
    CHECK(s.precision == 0.0);
    CHECK(s.recall == 0.0);
    CHECK(s.f1 == 0.0);
    CHECK(s.degenerate);
}

TEST_CASE("perfect prediction gives 1/1/1") {
    ConfusionMatrix m{10, 10, 0, 0};
    auto s = prf(m);
    CHECK(s.precision == Approx(1.0));
    CHECK(s.recall == Approx(1.0));
    CHECK(s.f1 == Approx(1.0));
}

TEST_CASE("load_gold parses labels and skips comments") {
    TempFile f("# header comment\nmus\t1\nlitus\t0\n");
    auto g = load_gold(f.path);
    REQUIRE(g.entries.size() == 2);
    CHECK(g.entries.at("mus"));
    CHECK_FALSE(g.entries.at("litus"));
}

TEST_CASE("load_gold rejects bad labels with the line number") {
    TempFile f("mus\t1\nlitus\tmaybe\n");
    CHECK_THROWS_WITH(load_gold(f.path), Catch::Matchers::ContainsSubstring("line 2"));
}

TEST_CASE("load_gold rejects duplicates and empty files") {
    TempFile dup("mus\t1\nmus\t0\n");
    CHECK_THROWS_WITH(load_gold(dup.path), Catch::Matchers::ContainsSubstring("duplicate"));
    TempFile empty("# only a comment\n");
    CHECK_THROWS_AS(load_gold(empty.path), std::runtime_error);
}

TEST_CASE("confusion tallies the four cells") {
    GoldStandard gold;
    gold.entries = {{"a", true}, {"b", true}, {"c", false}, {"d", false}};
    std::map<std::string, bool> pred{{"a", true}, {"b", false}, {"c", true}, {"d", false}};
    auto m = confusion(pred, gold);
    CHECK(m.tp == 1);
    CHECK(m.fn == 1);
    CHECK(m.fp == 1);
    CHECK(m.tn == 1);
}

TEST_CASE("confusion fails when predictions miss a gold lemma") {
    GoldStandard gold;
    gold.entries = {{"a", true}, {"b", false}};
    std::map<std::string, bool> pred{{"a", true}};
    CHECK_THROWS_WITH(confusion(pred, gold), Catch::Matchers::ContainsSubstring("b"));
}

TEST_CASE("confusion ignores extra predictions") {
    GoldStandard gold;
    gold.entries = {{"a", true}};
    std::map<std::string, bool> pred{{"a", true}, {"extra", false}};
    auto m = confusion(pred, gold);
    CHECK(m.total() == 1);
}

TEST_CASE("report text prints three-decimal scores") {
    auto r = report(ConfusionMatrix{26, 2, 12, 0});
    const auto text = r.text();
    CHECK(text.find("F1 0.813") != std::string::npos);
    CHECK(text.find("precision 0.684") != std::string::npos);
    CHECK(text.find("recall 1.000") != std::string::npos);
}

TEST_CASE("report JSON round trip") {
    auto r = report(ConfusionMatrix{20, 8, 6, 6}, {{"system", "demo"}});
    auto restored = EvalReport::from_json(r.json());
    CHECK(restored.matrix.tp == 20);
    CHECK(restored.scores.f1 == Approx(r.scores.f1));
    CHECK(restored.metadata.at("system") == "demo");
    CHECK_THROWS_AS(EvalReport::from_json(nlohmann::json{{"format", "other"}}),
                    std::runtime_error);
}
