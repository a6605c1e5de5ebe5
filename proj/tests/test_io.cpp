#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "mblingam/io.hpp"
#include "test_helpers.hpp"

using namespace mblingam;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mblingam_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST_CASE("dataset CSV round trip") {
    TempDir dir;
    DataMatrix data;
    data.values = test_helpers::random_matrix(3, 10, 77);
    data.variable_names = {"alpha", "beta, with comma", "gamma"};
    io::write_data_csv(data, dir.file("d.csv"));
    const DataMatrix back = io::read_data_csv(dir.file("d.csv"));
    CHECK(back.variable_names == data.variable_names);
    CHECK(back.values == data.values);
}

TEST_CASE("dataset CSV error paths carry line numbers") {
    TempDir dir;

    write_text(dir.file("one_col.csv"), "x\n1\n2\n");
    CHECK_THROWS_WITH(io::read_data_csv(dir.file("one_col.csv")),
                      Catch::Matchers::ContainsSubstring("line 1"));

    write_text(dir.file("bad_value.csv"), "a,b\n1,2\n1,zap\n");
    CHECK_THROWS_WITH(io::read_data_csv(dir.file("bad_value.csv")),
                      Catch::Matchers::ContainsSubstring("line 3"));

    write_text(dir.file("short_row.csv"), "a,b\n1,2\n3\n");
    CHECK_THROWS_WITH(io::read_data_csv(dir.file("short_row.csv")),
                      Catch::Matchers::ContainsSubstring("line 3"));

    write_text(dir.file("too_few.csv"), "a,b\n1,2\n");
    CHECK_THROWS_AS(io::read_data_csv(dir.file("too_few.csv")), io::csv_error);
}

TEST_CASE("count table CSV round trip") {
    TempDir dir;
    BpCountTable table;
    table.m = 2;
    table.variable_names = {"x1", "x2"};
    table.hypotheses = enumerate_hypotheses(2);
    table.plan = build_scale_plan(100, 0.5, 2.0, 3, 50);
    table.q_effective = {50, 49, 50};
    table.counts = {{10, 0, 30, 10}, {12, 1, 26, 10}, {9, 2, 29, 10}};

    io::write_counts_csv(table, dir.file("c.csv"));
    const BpCountTable back = io::read_counts_csv(dir.file("c.csv"));
    CHECK(back.m == 2);
    CHECK(back.variable_names == table.variable_names);
    CHECK(back.counts == table.counts);
    CHECK(back.q_effective == table.q_effective);
    REQUIRE(back.plan.num_scales() == 3);
    for (int d = 0; d < 3; ++d) {
        CHECK(back.plan.entries[d].n_star == table.plan.entries[d].n_star);
        CHECK(back.plan.entries[d].sigma_sq == table.plan.entries[d].sigma_sq);
    }
    CHECK(back.plan.n == 100);
}

TEST_CASE("count table CSV schema violations") {
    TempDir dir;

    write_text(dir.file("bad_header.csv"), "effect,cause,sign\nx2,x1,+\n");
    CHECK_THROWS_AS(io::read_counts_csv(dir.file("bad_header.csv")), io::csv_error);

    write_text(dir.file("bad_sign.csv"),
               "effect,cause,sign,scale_index,sigma_sq,n_star,count,q_effective\n"
               "x2,x1,plus,1,1,100,5,10\n");
    CHECK_THROWS_WITH(io::read_counts_csv(dir.file("bad_sign.csv")),
                      Catch::Matchers::ContainsSubstring("line 2"));

    write_text(dir.file("count_gt_q.csv"),
               "effect,cause,sign,scale_index,sigma_sq,n_star,count,q_effective\n"
               "x2,x1,+,1,1,100,50,10\n");
    CHECK_THROWS_AS(io::read_counts_csv(dir.file("count_gt_q.csv")), io::csv_error);

    // Missing rows: only one hypothesis present.
    write_text(dir.file("missing.csv"),
               "effect,cause,sign,scale_index,sigma_sq,n_star,count,q_effective\n"
               "x2,x1,+,1,0.5,200,5,10\n"
               "x2,x1,+,2,2,50,5,10\n");
    CHECK_THROWS_AS(io::read_counts_csv(dir.file("missing.csv")), io::csv_error);
}

TEST_CASE("count table JSON mirrors the CSV content") {
    BpCountTable table;
    table.m = 2;
    table.variable_names = {"u", "v"};
    table.hypotheses = enumerate_hypotheses(2);
    table.plan = build_scale_plan(100, 0.5, 2.0, 2, 20);
    table.q_effective = {20, 20};
    table.counts = {{5, 0, 10, 5}, {6, 1, 9, 4}};

    const auto j = io::counts_to_json(table);
    CHECK(j["variable_names"].size() == 2);
    CHECK(j["scales"].size() == 2);
    CHECK(j["hypotheses"].size() == 4);
    CHECK(j["hypotheses"][0]["counts"].size() == 2);
}

TEST_CASE("p-value report serialization") {
    TempDir dir;
    PvalueReport report;
    report.variable_names = {"x1", "x2"};
    report.m = 2;
    report.h = 3;
    HypothesisResult r;
    r.id = make_hypothesis(1, 0, Sign::positive);
    r.p_bp = 0.62;
    r.p_mb = 0.55;
    r.best.model = PsiModel{PsiKind::poly, {0.1, 0.05}};
    r.best.nll = 12.5;
    r.best.aic = 29.0;
    r.best.converged = true;
    r.best.z_values = {{1.0, -0.3}, {2.0, -0.2}};
    r.candidates.push_back(r.best);
    report.results.push_back(r);

    io::write_pvalues_csv(report, dir.file("p.csv"));
    std::ifstream in(dir.file("p.csv"));
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "effect,cause,sign,p_bp,p_mb,model_kind,aic");
    CHECK(row == "x2,x1,+,0.62,0.55,poly2,29");

    const auto j = io::pvalues_to_json(report);
    CHECK(j["results"][0]["p_mb"] == 0.55);
    CHECK(j["results"][0]["best"]["kind"] == "poly");
    CHECK(j["results"][0]["normalized_z"].size() == 2);
}

TEST_CASE("simulation config JSON parsing") {
    TempDir dir;
    write_text(dir.file("cfg.json"), R"({
      "b": [[0, 0.1], [0.1, 0]],
      "noise_variance": 2.0,
      "n": 500,
      "datasets": 12,
      "plan": {"sigma_sq_min": 0.25, "sigma_sq_max": 4.0, "num_scales": 7, "replicates": 100},
      "ica": {"restarts": 4, "nonlinearity": "cube"},
      "h": 2,
      "seed": 9
    })");
    const SimConfig cfg = io::read_sim_config(dir.file("cfg.json"));
    CHECK(cfg.model.b(0, 1) == 0.1);
    CHECK(cfg.n == 500);
    CHECK(cfg.datasets == 12);
    CHECK(cfg.plan.num_scales == 7);
    CHECK(cfg.plan.replicates == 100);
    CHECK(cfg.ica.restarts == 4);
    CHECK(cfg.ica.nonlinearity == IcaNonlinearity::cube);
    CHECK(cfg.h == 2);
    CHECK(cfg.master_seed == 9);
    CHECK(cfg.alpha_grid.size() == 99);

    write_text(dir.file("bad.json"), R"({"n": 100})");
    CHECK_THROWS_AS(io::read_sim_config(dir.file("bad.json")), std::invalid_argument);

    write_text(dir.file("garbage.json"), "not json at all");
    CHECK_THROWS_AS(io::read_sim_config(dir.file("garbage.json")), std::invalid_argument);

    write_text(dir.file("diag.json"), R"({"b": [[0.5, 0], [0, 0]]})");
    CHECK_THROWS_AS(io::read_sim_config(dir.file("diag.json")), std::invalid_argument);
}

TEST_CASE("format_double is round-trip stable") {
    for (double v : {0.0, 1.0, -1.5, 0.1, 1e-17, 123456.789, 1.0 / 3.0}) {
        const std::string s = io::format_double(v);
        CHECK(std::stod(s) == v);
    }
}
