// End-to-end checks of the vldg binary: exit codes, file layout, and the
// overwrite guard. Every case spawns the real executable.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "vldg/serialize.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using vldg::Json;

namespace {

struct CliResult {
    int code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args, const std::string& cwd,
                  const std::string& env_prefix = "") {
    const std::string log = cwd + "/.cli_log";
    const std::string cmd = "cd \"" + cwd + "\" && " + env_prefix + "\"" + VLDG_CLI_PATH +
                            "\" " + args + " > \"" + log + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    CliResult r;
    if (WIFEXITED(rc)) r.code = WEXITSTATUS(rc);
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    fs::remove(log);
    return r;
}

Json base_config() {
    return Json{
        {"experiment",
         {{"strategy", "erm"},
          {"b", 4},
          {"lr", 0.002},
          {"steps", 20},
          {"eval_interval", 10},
          {"val_fraction", 0.2},
          {"trial_seeds", {0}},
          {"prompt_family", "custom"},
          {"n_p", 2},
          {"mlp_layers", 2}}},
        {"encoder",
         {{"kind", "toy"},
          {"seed", 7},
          {"dims",
           {{"d_i", 24},
            {"c_f", 12},
            {"d_t", 10},
            {"l_max", 16},
            {"image_side", 16},
            {"patch_grid", 4}}}}},
        {"data",
         {{"synth",
           {{"n_domains", 3},
            {"n_classes", 4},
            {"samples_per_class", 8},
            {"image_side", 16},
            {"pattern_grid", 4},
            {"class_signal_strength", 1.2},
            {"domain_shift_strength", 0.2},
            {"noise_sigma", 0.05},
            {"seed", 3}}},
          {"augment", {{"enabled", false}}}}},
        {"output", {{"dir", "out"}, {"workers", 1}}}};
}

void write_config(const fs::path& path, const Json& j) {
    std::ofstream out(path);
    out << j.dump(1) << "\n";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("usage errors exit 2") {
    testutil::TempDir tmp("vldg-cli-usage");
    const std::string cwd = tmp.str();

    CHECK(run_cli("--help", cwd).code == 0);
    CHECK(run_cli("multi-source --help", cwd).code == 0);
    CHECK(run_cli("", cwd).code == 2);
    CHECK(run_cli("frobnicate", cwd).code == 2);
    CHECK(run_cli("multi-source", cwd).code == 2);  // --config is required

    write_config(tmp.path() / "cfg.json", base_config());
    CHECK(run_cli("multi-source --config cfg.json --steps abc", cwd).code == 2);
    CHECK(run_cli("multi-source --config cfg.json --unknown-flag", cwd).code == 2);
}

TEST_CASE("missing and malformed configs exit 2 and name the file") {
    testutil::TempDir tmp("vldg-cli-cfg");
    const std::string cwd = tmp.str();

    CliResult miss = run_cli("train --config absent.json", cwd);
    CHECK(miss.code == 2);
    CHECK(miss.output.find("absent.json") != std::string::npos);

    std::ofstream(tmp.path() / "broken.json") << "{ this is not json";
    CHECK(run_cli("train --config broken.json", cwd).code == 2);

    Json bad = base_config();
    bad["experiment"]["val_fraction"] = 1.5;
    write_config(tmp.path() / "bad.json", bad);
    CliResult r = run_cli("multi-source --config bad.json", cwd);
    CHECK(r.code == 2);
    CHECK(r.output.find("val_fraction") != std::string::npos);
}

TEST_CASE("synth-data materializes a deterministic on-disk dataset") {
    testutil::TempDir tmp("vldg-cli-synth");
    const std::string cwd = tmp.str();
    write_config(tmp.path() / "cfg.json", base_config());

    CHECK(run_cli("synth-data --config cfg.json --out dsA", cwd).code == 0);
    CHECK(run_cli("synth-data --config cfg.json --out dsB", cwd).code == 0);

    for (int d = 0; d < 3; ++d) {
        const fs::path dom = tmp.path() / "dsA" / ("synth" + std::to_string(d));
        REQUIRE(fs::exists(dom / "labels.csv"));
        size_t pngs = 0;
        for (const auto& e : fs::directory_iterator(dom))
            if (e.path().extension() == ".png") ++pngs;
        CHECK(pngs == 4 * 8);
    }

    // byte-identical across reruns
    for (const auto& e : fs::recursive_directory_iterator(tmp.path() / "dsA")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), tmp.path() / "dsA");
        CHECK(slurp(e.path()) == slurp(tmp.path() / "dsB" / rel));
    }

    CHECK(run_cli("synth-data --config cfg.json --out dsA", cwd).code == 2);
    CHECK(run_cli("synth-data --config cfg.json --out dsA --overwrite", cwd).code == 0);

    Json one_class = base_config();
    one_class["data"]["synth"]["n_classes"] = 1;
    write_config(tmp.path() / "one.json", one_class);
    CliResult r = run_cli("synth-data --config one.json --out dsC", cwd);
    CHECK(r.code == 2);
    CHECK(r.output.find("n_classes") != std::string::npos);
}

TEST_CASE("zero-shot writes one metrics block per prompt family") {
    testutil::TempDir tmp("vldg-cli-zs");
    const std::string cwd = tmp.str();
    write_config(tmp.path() / "cfg.json", base_config());

    CHECK(run_cli("zero-shot --config cfg.json --out zs --families I,II", cwd).code == 0);
    const Json out = vldg::read_json_file((tmp.path() / "zs" / "zero_shot.json").string());
    CHECK(out.at("format") == "vldg-zero-shot-v1");
    REQUIRE(out.at("families") == Json({"I", "II"}));
    for (int d = 0; d < 3; ++d) {
        const Json& dom = out.at("domains").at("synth" + std::to_string(d));
        REQUIRE(dom.contains("I"));
        REQUIRE(dom.contains("II"));
        for (const std::string fam : {"I", "II"}) {
            CHECK(dom.at(fam).contains("accuracy"));
            CHECK(dom.at(fam).contains("macro_f1"));
        }
    }

    CliResult bad = run_cli("zero-shot --config cfg.json --out zs2 --families I,III", cwd);
    CHECK(bad.code == 2);
    CHECK(bad.output.find("III") != std::string::npos);

    // default: the config's own family
    CHECK(run_cli("zero-shot --config cfg.json --out zs3", cwd).code == 0);
    const Json solo = vldg::read_json_file((tmp.path() / "zs3" / "zero_shot.json").string());
    CHECK(solo.at("families") == Json({"custom"}));
}

TEST_CASE("multi-source emits runs plus report files and guards overwrites") {
    testutil::TempDir tmp("vldg-cli-ms");
    const std::string cwd = tmp.str();
    write_config(tmp.path() / "cfg.json", base_config());

    CHECK(run_cli("multi-source --config cfg.json", cwd).code == 0);
    const fs::path out = tmp.path() / "out";
    for (const char* f : {"report.json", "report.csv", "report_meta.json"})
        CHECK(fs::exists(out / f));

    for (int d = 0; d < 3; ++d) {
        const fs::path rf = out / "runs" / ("run-synth" + std::to_string(d) + "-seed0.json");
        REQUIRE(fs::exists(rf));
        const Json run = vldg::read_json_file(rf.string());
        CHECK(run.at("format") == "vldg-run-v1");
        CHECK(run.at("mode") == "multi_source");
        CHECK(run.at("strategy") == "erm");
        CHECK(run.at("k") == 4);
        CHECK(run.at("seed") == 0);
        CHECK(run.at("target") == "synth" + std::to_string(d));
        CHECK(run.at("metrics").contains("macro_f1"));
        CHECK(run.at("val_history").size() == 2);
        const std::uint64_t step = run.at("selected_step").get<std::uint64_t>();
        CHECK((step == 10 || step == 20));
    }

    const std::string csv = slurp(out / "report.csv");
    CHECK(csv.rfind("strategy,synth0,synth1,synth2,Avg", 0) == 0);

    CliResult again = run_cli("multi-source --config cfg.json", cwd);
    CHECK(again.code == 2);
    CHECK(again.output.find("--overwrite") != std::string::npos);
    CHECK(run_cli("multi-source --config cfg.json --overwrite", cwd).code == 0);
}

TEST_CASE("single-source reports sources as rows without self cells") {
    testutil::TempDir tmp("vldg-cli-ss");
    const std::string cwd = tmp.str();
    write_config(tmp.path() / "cfg.json", base_config());

    CHECK(run_cli("single-source --config cfg.json --out ss", cwd).code == 0);
    const std::string csv = slurp(tmp.path() / "ss" / "report.csv");
    CHECK(csv.rfind("source,synth0,synth1,synth2,Avg", 0) == 0);
    CHECK(csv.find("synth0,-,") != std::string::npos);
}

TEST_CASE("train and eval round trip through a checkpoint") {
    testutil::TempDir tmp("vldg-cli-train");
    const std::string cwd = tmp.str();
    write_config(tmp.path() / "cfg.json", base_config());

    CHECK(run_cli("train --config cfg.json --out tr --target synth2", cwd).code == 0);
    const fs::path ckpt = tmp.path() / "tr" / "checkpoints" / "ckpt-synth2-seed0.json";
    REQUIRE(fs::exists(ckpt));
    REQUIRE(fs::exists(tmp.path() / "tr" / "runs" / "run-synth2-seed0.json"));

    CliResult ev = run_cli(
        "eval --config cfg.json --target synth2 --checkpoint tr/checkpoints/ckpt-synth2-seed0.json",
        cwd);
    CHECK(ev.code == 0);
    CHECK(ev.output.find("macro_f1") != std::string::npos);

    CliResult wrong = run_cli(
        "eval --config cfg.json --strategy zero_shot --target synth2 "
        "--checkpoint tr/checkpoints/ckpt-synth2-seed0.json",
        cwd);
    CHECK(wrong.code == 2);

    CliResult gone = run_cli(
        "eval --config cfg.json --target synth2 --checkpoint tr/checkpoints/absent.json", cwd);
    CHECK(gone.code == 1);

    // train without a target is a config error
    CHECK(run_cli("train --config cfg.json --out tr2", cwd).code == 2);
}

TEST_CASE("identical config and seed reproduce run metrics exactly") {
    testutil::TempDir tmp("vldg-cli-repro");
    const std::string cwd = tmp.str();
    Json cfg = base_config();
    cfg["experiment"]["strategy"] = "cooplvt";
    write_config(tmp.path() / "cfg.json", cfg);

    CHECK(run_cli("multi-source --config cfg.json --out r1 --target synth0", cwd).code == 0);
    CHECK(run_cli("multi-source --config cfg.json --out r2 --target synth0", cwd).code == 0);

    for (int d = 0; d < 3; ++d) {
        const std::string rel = "runs/run-synth" + std::to_string(d) + "-seed0.json";
        const Json a = vldg::read_json_file((tmp.path() / "r1" / rel).string());
        const Json b = vldg::read_json_file((tmp.path() / "r2" / rel).string());
        CHECK(a.at("metrics") == b.at("metrics"));
        CHECK(a.at("val_history") == b.at("val_history"));
        CHECK(a.at("selected_step") == b.at("selected_step"));
    }
}

TEST_CASE("report re-renders tables from an existing run directory") {
    testutil::TempDir tmp("vldg-cli-report");
    const std::string cwd = tmp.str();
    write_config(tmp.path() / "cfg.json", base_config());

    CHECK(run_cli("multi-source --config cfg.json", cwd).code == 0);
    const std::string before = slurp(tmp.path() / "out" / "report.csv");
    fs::remove(tmp.path() / "out" / "report.csv");
    fs::remove(tmp.path() / "out" / "report.json");

    CliResult r = run_cli("report --config cfg.json", cwd);
    CHECK(r.code == 0);
    CHECK(slurp(tmp.path() / "out" / "report.csv") == before);

    CliResult alt = run_cli("report --config cfg.json --out rerender --runs out/runs", cwd);
    CHECK(alt.code == 0);
    CHECK(slurp(tmp.path() / "rerender" / "report.csv") == before);

    CHECK(run_cli("report --config cfg.json --out empty --runs nowhere", cwd).code == 1);
}

TEST_CASE("environment variable redirects the dataset root") {
    testutil::TempDir tmp("vldg-cli-env");
    const std::string cwd = tmp.str();
    write_config(tmp.path() / "cfg.json", base_config());
    CHECK(run_cli("synth-data --config cfg.json --out realdata", cwd).code == 0);

    Json disk = base_config();
    disk["data"].erase("synth");
    disk["data"]["root"] = "/nonexistent/path";
    disk["data"]["domains"] = {"synth0", "synth1", "synth2"};
    write_config(tmp.path() / "disk.json", disk);

    CHECK(run_cli("zero-shot --config disk.json --out zs", cwd).code == 1);

    const std::string env = "VLDG_DATA_ROOT=\"" + cwd + "/realdata\" ";
    CliResult ok = run_cli("zero-shot --config disk.json --out zs2", cwd, env);
    CHECK(ok.code == 0);
    const Json out = vldg::read_json_file((tmp.path() / "zs2" / "zero_shot.json").string());
    CHECK(out.at("config").at("data").at("root").get<std::string>() == cwd + "/realdata");
}
