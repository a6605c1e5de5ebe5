#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mblingam/io.hpp"
#include "mblingam/simulate.hpp"

using namespace mblingam;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* env = std::getenv("MBLINGAM_CLI");
    REQUIRE(env != nullptr);
    return env;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mblingam_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const TempDir& dir, const std::string& args) {
    const std::string cmd =
        cli_path() + " " + args + " >" + dir.file("stdout.txt") + " 2>" + dir.file("stderr.txt");
    const int status = std::system(cmd.c_str());
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_small_dataset(const std::string& path, double b21, long n, std::uint64_t seed) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 2);
    b(1, 0) = b21;
    const DataMatrix data = generate_dataset(make_connection_matrix(b), n, NoiseSpec{2.0}, seed);
    io::write_data_csv(data, path);
}

const std::string kSmallFlags =
    " --num-scales 3 --scales-min 0.5 --scales-max 2 --replicates 30 --restarts 2";

}  // namespace

TEST_CASE("analyze writes count and p-value files") {
    TempDir dir;
    write_small_dataset(dir.file("data.csv"), 0.6, 150, 11);
    const int rc = run_cli(dir, "analyze " + dir.file("data.csv") + " -o " + dir.file("run") +
                                    kSmallFlags + " --seed 5");
    CHECK(rc == 0);
    CHECK(fs::exists(dir.file("run_counts.csv")));
    CHECK(fs::exists(dir.file("run_counts.json")));
    CHECK(fs::exists(dir.file("run_pvalues.csv")));
    CHECK(fs::exists(dir.file("run_pvalues.json")));

    const std::string pvalues = slurp(dir.file("run_pvalues.csv"));
    CHECK(pvalues.rfind("effect,cause,sign,p_bp,p_mb,model_kind,aic\n", 0) == 0);
    // 2 variables -> 4 signed hypotheses -> header + 4 rows.
    CHECK(std::count(pvalues.begin(), pvalues.end(), '\n') == 5);
}

TEST_CASE("analyze is byte-identical across thread counts") {
    TempDir dir;
    write_small_dataset(dir.file("data.csv"), 0.3, 150, 12);
    REQUIRE(run_cli(dir, "analyze " + dir.file("data.csv") + " -o " + dir.file("t1") +
                             kSmallFlags + " --seed 9 --threads 1") == 0);
    REQUIRE(run_cli(dir, "analyze " + dir.file("data.csv") + " -o " + dir.file("t4") +
                             kSmallFlags + " --seed 9 --threads 4") == 0);
    CHECK(slurp(dir.file("t1_counts.csv")) == slurp(dir.file("t4_counts.csv")));
    CHECK(slurp(dir.file("t1_counts.json")) == slurp(dir.file("t4_counts.json")));
    CHECK(slurp(dir.file("t1_pvalues.csv")) == slurp(dir.file("t4_pvalues.csv")));
    CHECK(slurp(dir.file("t1_pvalues.json")) == slurp(dir.file("t4_pvalues.json")));
}

TEST_CASE("fit on exported counts reproduces the analyze report") {
    TempDir dir;
    write_small_dataset(dir.file("data.csv"), 0.6, 150, 13);
    REQUIRE(run_cli(dir, "analyze " + dir.file("data.csv") + " -o " + dir.file("a") + kSmallFlags +
                             " --seed 2") == 0);
    REQUIRE(run_cli(dir, "fit " + dir.file("a_counts.csv") + " -o " + dir.file("refit")) == 0);
    CHECK(slurp(dir.file("a_pvalues.csv")) == slurp(dir.file("refit_pvalues.csv")));
    CHECK(slurp(dir.file("a_pvalues.json")) == slurp(dir.file("refit_pvalues.json")));
}

TEST_CASE("analyze rejects malformed input with exit 2") {
    TempDir dir;
    {
        std::ofstream out(dir.file("one.csv"));
        out << "x\n1\n2\n3\n";
    }
    CHECK(run_cli(dir, "analyze " + dir.file("one.csv") + " -o " + dir.file("x")) == 2);
    CHECK(slurp(dir.file("stderr.txt")).find("line 1") != std::string::npos);

    CHECK(run_cli(dir, "analyze " + dir.file("does_not_exist.csv") + " -o " + dir.file("x")) == 2);
    CHECK(run_cli(dir, "analyze") == 2);  // missing required argument
}

TEST_CASE("analyze reports a pipeline failure with exit 3") {
    TempDir dir;
    {
        // Second column is an exact multiple of the first: rank-deficient data
        // fails every bootstrap fit.
        std::ofstream out(dir.file("collinear.csv"));
        out << "a,b\n";
        rng::Engine eng(5);
        for (int i = 0; i < 60; ++i) {
            const double v = eng.laplace(1.0);
            out << v << ',' << 2.0 * v << '\n';
        }
    }
    CHECK(run_cli(dir, "analyze " + dir.file("collinear.csv") + " -o " + dir.file("x") +
                           kSmallFlags) == 3);
}

TEST_CASE("simulate lists exactly the documented presets") {
    TempDir dir;
    REQUIRE(run_cli(dir, "simulate --list-presets") == 0);
    const std::string out = slurp(dir.file("stdout.txt"));
    CHECK(std::count(out.begin(), out.end(), '\n') == 10);
    CHECK(out.find("paper-2var-b0\n") != std::string::npos);
    CHECK(out.find("desk-6var-b05\n") != std::string::npos);
}

TEST_CASE("simulate rejects an unknown preset with exit 2") {
    TempDir dir;
    CHECK(run_cli(dir, "simulate --preset not-a-preset -o " + dir.file("x")) == 2);
    CHECK(run_cli(dir, "simulate -o " + dir.file("x")) == 2);  // neither preset nor config
}

TEST_CASE("simulate runs a shrunken preset deterministically across thread counts") {
    TempDir dir;
    const std::string overrides = " --datasets 4 --samples 150 --replicates 20 --num-scales 3 "
                                  "--scales-min 0.5 --scales-max 2 --restarts 2 --seed 31";
    REQUIRE(run_cli(dir, "simulate --preset desk-2var-b0 -o " + dir.file("s1") + overrides +
                             " --threads 1") == 0);
    REQUIRE(run_cli(dir, "simulate --preset desk-2var-b0 -o " + dir.file("s2") + overrides +
                             " --threads 4") == 0);

    CHECK(fs::exists(dir.file("s1_pvalues_raw.csv")));
    CHECK(fs::exists(dir.file("s1_rejection_curves.csv")));
    CHECK(fs::exists(dir.file("s1_report.json")));
    CHECK(slurp(dir.file("s1_pvalues_raw.csv")) == slurp(dir.file("s2_pvalues_raw.csv")));
    CHECK(slurp(dir.file("s1_rejection_curves.csv")) == slurp(dir.file("s2_rejection_curves.csv")));
    CHECK(slurp(dir.file("s1_report.json")) == slurp(dir.file("s2_report.json")));

    // 4 hypotheses x 4 datasets plus the header.
    const std::string raw = slurp(dir.file("s1_pvalues_raw.csv"));
    CHECK(std::count(raw.begin(), raw.end(), '\n') == 17);
}

TEST_CASE("simulate accepts a config file") {
    TempDir dir;
    {
        std::ofstream out(dir.file("cfg.json"));
        out << R"({"b": [[0, 0], [0.5, 0]], "n": 150, "datasets": 3,
                   "plan": {"sigma_sq_min": 0.5, "sigma_sq_max": 2.0,
                            "num_scales": 3, "replicates": 20},
                   "ica": {"restarts": 2}, "seed": 4,
                   "alpha_grid": [0.05, 0.5]})";
    }
    REQUIRE(run_cli(dir, "simulate --config " + dir.file("cfg.json") + " -o " + dir.file("c")) == 0);
    const std::string curves = slurp(dir.file("c_rejection_curves.csv"));
    // 4 hypotheses x 2 alphas + header.
    CHECK(std::count(curves.begin(), curves.end(), '\n') == 9);
}

TEST_CASE("fit handles a flat half table and a saturated table") {
    TempDir dir;
    {
        std::ofstream out(dir.file("flat.csv"));
        out << "effect,cause,sign,scale_index,sigma_sq,n_star,count,q_effective\n";
        const char* hyp[4][3] = {{"x1", "x2", "+"}, {"x1", "x2", "-"},
                                 {"x2", "x1", "+"}, {"x2", "x1", "-"}};
        const double sigma_sq[3] = {0.5, 1.0, 2.0};
        const long n_star[3] = {200, 100, 50};
        for (const auto& h : hyp) {
            for (int d = 0; d < 3; ++d) {
                const long count = std::string(h[0]) == "x2" && std::string(h[2]) == "+" ? 50 : 10;
                out << h[0] << ',' << h[1] << ',' << h[2] << ',' << (d + 1) << ','
                    << sigma_sq[d] << ',' << n_star[d] << ',' << count << ",100\n";
            }
        }
    }
    REQUIRE(run_cli(dir, "fit " + dir.file("flat.csv") + " -o " + dir.file("flat")) == 0);
    const std::string csv = slurp(dir.file("flat_pvalues.csv"));
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);  // header
    bool found = false;
    while (std::getline(lines, line)) {
        if (line.rfind("x2,x1,+,", 0) == 0) {
            found = true;
            // p_bp then p_mb
            CHECK(line.find(",0.5,0.5") != std::string::npos);
        }
    }
    CHECK(found);

    {
        std::ofstream out(dir.file("sat.csv"));
        out << "effect,cause,sign,scale_index,sigma_sq,n_star,count,q_effective\n";
        const char* hyp[4][3] = {{"x1", "x2", "+"}, {"x1", "x2", "-"},
                                 {"x2", "x1", "+"}, {"x2", "x1", "-"}};
        const double sigma_sq[3] = {0.5, 1.0, 2.0};
        const long n_star[3] = {200, 100, 50};
        for (const auto& h : hyp) {
            for (int d = 0; d < 3; ++d) {
                const long count = std::string(h[0]) == "x2" && std::string(h[2]) == "+" ? 100 : 0;
                out << h[0] << ',' << h[1] << ',' << h[2] << ',' << (d + 1) << ','
                    << sigma_sq[d] << ',' << n_star[d] << ',' << count << ",100\n";
            }
        }
    }
    REQUIRE(run_cli(dir, "fit " + dir.file("sat.csv") + " -o " + dir.file("sat")) == 0);
    const std::string sat = slurp(dir.file("sat_pvalues.csv"));
    CHECK(sat.find("x2,x1,+,1,1,saturated") != std::string::npos);

    // Schema violation: count exceeds q_effective.
    {
        std::ofstream out(dir.file("bad.csv"));
        out << "effect,cause,sign,scale_index,sigma_sq,n_star,count,q_effective\n"
               "x2,x1,+,1,1,100,50,10\n";
    }
    CHECK(run_cli(dir, "fit " + dir.file("bad.csv") + " -o " + dir.file("bad")) == 2);
}
