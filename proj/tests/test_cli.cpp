// End-to-end checks of the operator surface: spawns the real binary.

#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "cider/bns.hpp"
#include "cider/core.hpp"
#include "cider/util.hpp"

using namespace cider;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CliResult cli(const std::string& args) {
    const std::string out_file = (fs::temp_directory_path() / "cider_t_out.txt").string();
    const std::string err_file = (fs::temp_directory_path() / "cider_t_err.txt").string();
    std::string command =
        std::string(CIDER_CLI_PATH) + " " + args + " >" + out_file + " 2>" + err_file;
    int status = std::system(command.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = util::read_file(out_file);
    result.err = util::read_file(err_file);
    std::remove(out_file.c_str());
    std::remove(err_file.c_str());
    return result;
}

std::string asset(const std::string& name) {
    return std::string(CIDER_ASSET_DIR) + "/" + name;
}

std::string data_file(const std::string& name) {
    return std::string(CIDER_DATA_DIR) + "/" + name;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("run writes a parseable record and prints json on demand") {
    TempDir dir("cider_cli_run");
    CliResult result = cli("run --prompt \"a laptop on a desk\" --condition cider-full --json --out " +
                           dir.file("out"));
    REQUIRE(result.exit_code == 0);

    Json j = Json::parse(result.out);
    RunRecord record = run_record_from_json(j);
    CHECK(record.condition == Condition::CiderFull);
    CHECK(record.bias_set.empty());  // default mock stack detects nothing

    bool record_file_found = false;
    for (const auto& entry : fs::directory_iterator(dir.file("out"))) {
        if (entry.path().extension() == ".json") {
            record_file_found = true;
            RunRecord from_file = run_record_from_json(Json::parse(util::read_file(entry.path())));
            CHECK(from_file.prompt.text == "a laptop on a desk");
        }
    }
    CHECK(record_file_found);
}

TEST_CASE("the demo config produces the documented condition ordering") {
    TempDir dir("cider_cli_demo");
    CliResult result = cli("--config " + asset("cider_demo.toml") + " bench --dataset " +
                           data_file("brandbench_sample.jsonl") + " --json --out " + dir.file("out"));
    REQUIRE(result.exit_code == 0);

    Json rows = Json::parse(result.out);
    REQUIRE(rows.size() == 4);
    std::map<std::string, double> means;
    for (const auto& row : rows) means[row.at("method")] = row.at("mean_bns_percent").get<double>();
    CHECK(means.at("cider-full") > means.at("cider-no-scoring"));
    CHECK(means.at("cider-no-scoring") > means.at("negative-prompt"));
    CHECK(means.at("negative-prompt") > means.at("baseline"));
    CHECK(fs::exists(dir.file("out") + "/report.csv"));
    CHECK(fs::exists(dir.file("out") + "/report.md"));
}

TEST_CASE("aesthetics ingest, list, and match round trip through files") {
    TempDir dir("cider_cli_aesthetics");
    const std::string db = dir.file("styles.json");

    // three exemplar "images"
    for (const char* name : {"castle-a.png", "castle-b.png", "swoosh.png"})
        util::write_file(dir.file(name), std::string("pixels of ") + name);

    CliResult ingest1 = cli("aesthetics ingest --db " + db +
                            " --brand disney --style disney-castle --description \"storybook castles\"" +
                            " --images " + dir.file("castle-a.png") + " " + dir.file("castle-b.png"));
    REQUIRE(ingest1.exit_code == 0);
    CliResult ingest2 = cli("aesthetics ingest --db " + db +
                            " --brand nike --style nike-courts --description \"sport courts\"" +
                            " --images " + dir.file("swoosh.png"));
    REQUIRE(ingest2.exit_code == 0);

    CliResult listed = cli("aesthetics list --db " + db + " --json");
    REQUIRE(listed.exit_code == 0);
    Json entries = Json::parse(listed.out);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].at("style_id") == "disney-castle");
    CHECK(entries[1].at("exemplar_count") == 1);

    // threshold -1 returns every style, similarity descending
    CliResult matched =
        cli("aesthetics match --db " + db + " --image " + dir.file("swoosh.png") + " --threshold -1 --json");
    REQUIRE(matched.exit_code == 0);
    Json matches = Json::parse(matched.out);
    REQUIRE(matches.size() == 2);
    CHECK(matches[0].at("similarity").get<double>() >= matches[1].at("similarity").get<double>());
    // the exemplar itself is a perfect match for its own single-image style
    CHECK(matches[0].at("style_id") == "nike-courts");
    CHECK(matches[0].at("similarity").get<double>() == doctest::Approx(1.0).epsilon(1e-9));

    CliResult missing = cli("aesthetics list --db " + dir.file("nope.json"));
    CHECK(missing.exit_code == 1);
}

TEST_CASE("bns command matches the metric oracle") {
    TempDir dir("cider_cli_bns");
    // content carries a trigger phrase from the demo judge script
    util::write_file(dir.file("burger.png"), "A burger meal with fries at a drive-through window");
    CliResult result = cli("--config " + asset("cider_demo.toml") + " bns --image " +
                           dir.file("burger.png") + " --json");
    REQUIRE(result.exit_code == 0);
    Json j = Json::parse(result.out);
    // one mcdonalds finding at 0.9: bns = exp(-0.75 * 0.9)
    CHECK(j.at("bns").get<double>() == doctest::Approx(std::exp(-0.675)).epsilon(1e-9));
    REQUIRE(j.at("findings").size() == 1);
    CHECK(j.at("findings")[0].at("brand") == "mcdonalds");
}

TEST_CASE("cache stats, clear, and export through files") {
    TempDir dir("cider_cli_cache");
    const std::string cache_file = dir.file("cache.json");

    CliResult cleared = cli("cache --cache " + cache_file + " clear");
    REQUIRE(cleared.exit_code == 0);
    CHECK(fs::exists(cache_file));

    CliResult stats = cli("cache --cache " + cache_file + " stats --json");
    REQUIRE(stats.exit_code == 0);
    Json s = Json::parse(stats.out);
    CHECK(s.at("entries") == 0);
    CHECK(s.at("hits") == 0);

    CliResult exported = cli("cache --cache " + cache_file + " export");
    REQUIRE(exported.exit_code == 0);
    CHECK(Json::parse(exported.out).is_array());
}

TEST_CASE("sweep-w and cache-ablation emit their CSV artifacts") {
    TempDir dir("cider_cli_sweep");
    CliResult sweep = cli("--config " + asset("cider_demo.toml") + " sweep-w --dataset " +
                          data_file("brandbench_sample.jsonl") + " --w 0.0,0.4,1.0 --out " +
                          dir.file("out"));
    REQUIRE(sweep.exit_code == 0);
    std::string csv = util::read_file(dir.file("out") + "/sweep_w.csv");
    CHECK(csv.rfind("w,mean_bns_percent", 0) == 0);

    CliResult ablation = cli("--config " + asset("cider_demo.toml") + " cache-ablation --dataset " +
                             data_file("brandbench_sample.jsonl") + " --runs 2 --out " +
                             dir.file("out"));
    REQUIRE(ablation.exit_code == 0);
    std::string curve = util::read_file(dir.file("out") + "/cache_ablation.csv");
    CHECK(curve.rfind("request_index,", 0) == 0);
    // one data row per request
    std::size_t lines = 0;
    for (char c : curve)
        if (c == '\n') ++lines;
    CHECK(lines == 21);  // header + 20 requests
}

TEST_CASE("print-config emits the effective configuration") {
    CliResult result = cli("--config " + asset("cider_demo.toml") + " --print-config");
    REQUIRE(result.exit_code == 0);
    Json j = Json::parse(result.out);
    CHECK(j.at("providers").at("mode") == "mock");
    CHECK(j.at("embedding").at("dim") == 8);
    CHECK(j.at("refiner").at("w").get<double>() == doctest::Approx(0.4));
}

TEST_CASE("bad usage exits 1") {
    CHECK(cli("run").exit_code == 1);                      // missing --prompt
    CHECK(cli("run --prompt x --condition bogus").exit_code == 1);
    CHECK(cli("definitely-not-a-command").exit_code == 1);
    CHECK(cli("bns --image /nonexistent/image.png").exit_code == 1);
}
