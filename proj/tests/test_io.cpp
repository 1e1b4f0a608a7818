// CSV ingestion and fit-file round-trip tests.

#include <catch2/catch_amalgamated.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>

#include "lpsmc/csv.hpp"
#include "lpsmc/fit_io.hpp"
#include "lpsmc/intervals.hpp"
#include "lpsmc/simulation.hpp"

using namespace lpsmc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("lpsmc_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    f << content;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("well-formed file loads with the mapped design matrices", "[io]") {
    TempDir dir;
    const std::string path = dir.file("small.csv");
    write(path,
          "time,status,trt,sex,age\n"
          "1.5,1,1,0,45\n"
          "2.25,0,0,1,62\n"
          "0.75,1,1,1,51\n");
    ColumnMapping mapping;
    mapping.time_col = "time";
    mapping.status_col = "status";
    mapping.incidence_cols = {"trt", "sex", "age"};
    mapping.latency_cols = {"trt", "sex", "age"};

    LoadReport report;
    const SurvivalDataset data = load_csv(path, mapping, &report);
    REQUIRE(data.n() == 3);
    REQUIRE(data.X.cols() == 4);  // intercept + trt + sex + age
    REQUIRE(data.Z.cols() == 3);
    REQUIRE(data.X(0, 0) == 1.0);
    REQUIRE(data.X(1, 3) == 62.0);
    REQUIRE(data.Z(2, 0) == 1.0);
    REQUIRE(report.rows_dropped_missing == 0);
}

TEST_CASE("validation errors carry row and column coordinates", "[io]") {
    TempDir dir;
    const std::string path = dir.file("bad.csv");
    std::string content = "time,status,x\n";
    for (int i = 1; i <= 6; ++i) content += std::to_string(i) + ",1,0.5\n";
    content += "7.0,2,0.5\n";  // data row 7: invalid status
    write(path, content);
    ColumnMapping mapping;
    mapping.time_col = "time";
    mapping.status_col = "status";
    mapping.incidence_cols = {"x"};
    mapping.latency_cols = {"x"};
    try {
        load_csv(path, mapping);
        FAIL("expected CsvError");
    } catch (const CsvError& e) {
        REQUIRE(e.row == 7);
        REQUIRE(e.column == "status");
    }

    write(path, "time,status,x\n-1.0,1,0.5\n");
    REQUIRE_THROWS_AS(load_csv(path, mapping), CsvError);

    write(path, "time,status,x\n1.0,1,abc\n");
    try {
        load_csv(path, mapping);
        FAIL("expected CsvError");
    } catch (const CsvError& e) {
        REQUIRE(e.row == 1);
        REQUIRE(e.column == "x");
    }

    write(path, "time,status\n1.0,1\n");
    REQUIRE_THROWS_AS(load_csv(path, mapping), CsvError);  // missing column x
}

TEST_CASE("rows with missing values are dropped and counted", "[io]") {
    TempDir dir;
    const std::string path = dir.file("gaps.csv");
    write(path,
          "time,status,x\n"
          "1.0,1,0.5\n"
          "2.0,,0.5\n"
          "3.0,0,\n"
          "4.0,1,1.5\n");
    ColumnMapping mapping;
    mapping.time_col = "time";
    mapping.status_col = "status";
    mapping.incidence_cols = {"x"};
    mapping.latency_cols = {"x"};
    LoadReport report;
    const SurvivalDataset data = load_csv(path, mapping, &report);
    REQUIRE(data.n() == 2);
    REQUIRE(report.rows_dropped_missing == 2);
    REQUIRE(report.rows_total == 4);
}

TEST_CASE("continuous covariates are centered on request, binary ones left alone", "[io]") {
    TempDir dir;
    const std::string path = dir.file("center.csv");
    write(path,
          "time,status,trt,age\n"
          "1.0,1,1,40\n"
          "2.0,0,0,50\n"
          "3.0,1,1,60\n");
    ColumnMapping mapping;
    mapping.time_col = "time";
    mapping.status_col = "status";
    mapping.incidence_cols = {"trt", "age"};
    mapping.latency_cols = {"age"};
    mapping.center_continuous = true;
    LoadReport report;
    const SurvivalDataset data = load_csv(path, mapping, &report);
    REQUIRE(data.X.col(1).cwiseAbs().maxCoeff() == 1.0);             // trt untouched
    REQUIRE(data.X.col(2).mean() == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(data.Z.col(0).mean() == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(report.centers.at("age") == Catch::Approx(50.0));
}

TEST_CASE("fit files survive a byte-exact round trip", "[io]") {
    const GeneratedData generated = generate_dataset(scenario1(), 71ULL);
    Hyperparameters hyper;
    FitOptions options;
    options.t_upper = 11.0;
    options.profile = ProfileRequest{0.0, 13.0, 40};
    const FitResult original = fit(generated.data, hyper, options);

    TempDir dir;
    const std::string path = dir.file("fit.json");
    save_fit(path, original, {"x1", "x2"}, {"z1", "z2"});
    const LoadedFit loaded = load_fit(path);

    REQUIRE(loaded.fit.v_star == original.v_star);
    REQUIRE((loaded.fit.posterior.mean - original.posterior.mean).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((loaded.fit.posterior.covariance - original.posterior.covariance)
                .cwiseAbs()
                .maxCoeff() == 0.0);
    REQUIRE(loaded.incidence_names == std::vector<std::string>{"x1", "x2"});

    // Save -> load -> save reproduces the bytes.
    const std::string again = dir.file("fit2.json");
    save_fit(again, loaded.fit, loaded.incidence_names, loaded.latency_names);
    REQUIRE(slurp(path) == slurp(again));

    // Intervals computed from the loaded fit are bitwise identical.
    Eigen::VectorXd x(3);
    x << 1.0, 0.3, 1.0;
    const CredibleInterval a = ci_incidence(original, x, 0.05, IncidenceTarget::cured);
    const CredibleInterval b = ci_incidence(loaded.fit, x, 0.05, IncidenceTarget::cured);
    REQUIRE(a.lower == b.lower);
    REQUIRE(a.upper == b.upper);
    const CredibleInterval c = ci_baseline_survival(original, 2.5, 0.10);
    const CredibleInterval d = ci_baseline_survival(loaded.fit, 2.5, 0.10);
    REQUIRE(c.lower == d.lower);
    REQUIRE(c.upper == d.upper);
}

TEST_CASE("unknown fit-file versions are rejected", "[io]") {
    REQUIRE_THROWS_AS(fit_from_json("{\"format\":\"other\"}"), Error);
    REQUIRE_THROWS_AS(fit_from_json("{\"format\":\"lpsmc-fit\",\"version\":99}"), Error);
}

TEST_CASE("emitted study CSVs are a serialization fixpoint", "[io]") {
    Hyperparameters hyper;
    StudyOptions options;
    options.with_coverage = true;
    options.quantiles = {0.3, 0.6};
    hyper.K = 10;
    const StudySummary summary = run_study(scenario1(), 120, 3, 13ULL, hyper, options);

    TempDir dir;
    for (const std::string& content :
         {study_summary_csv(summary), coverage_csv(summary), ase_csv(summary)}) {
        const std::string path = dir.file("table.csv");
        write_text_file(path, content);
        const CsvTable table = read_csv(path);

        // Re-serializing every parsed numeric cell reproduces it exactly.
        std::string rebuilt;
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            rebuilt += (c ? "," : "") + table.columns[c];
        }
        rebuilt += '\n';
        for (const auto& row : table.rows) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (c) rebuilt += ',';
                double value;
                const auto res =
                    std::from_chars(row[c].data(), row[c].data() + row[c].size(), value);
                if (res.ec == std::errc{} && res.ptr == row[c].data() + row[c].size()) {
                    char buf[32];
                    const auto out = std::to_chars(buf, buf + sizeof(buf), value);
                    rebuilt += std::string(buf, out.ptr);
                } else {
                    rebuilt += row[c];
                }
            }
            rebuilt += '\n';
        }
        REQUIRE(rebuilt == content);
    }
}
