// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "opacity/model_io.hpp"

namespace {

namespace fs = std::filesystem;
using opacity::Json;

struct Outcome {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

fs::path scratch_dir() {
    const auto dir = fs::temp_directory_path() / ("opacity_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

// Runs the installed binary through the shell so exit codes and streams are observed end to end.
Outcome invoke(const std::string& args) {
    const auto err_path = scratch_dir() / "stderr.txt";
    const std::string cmd = std::string("\"") + OPACITY_CLI_PATH + "\" " + args + " 2>\"" + err_path.string() + "\"";
    Outcome o;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) {
        return o;
    }
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) {
        o.out.append(buf, n);
    }
    const int status = ::pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.err = slurp(err_path);
    return o;
}

std::string sample(const std::string& name) { return std::string("\"") + OPACITY_SAMPLES_DIR + "/" + name + "\""; }

std::string write_scratch(const std::string& name, const std::string& text) {
    const auto p = scratch_dir() / name;
    std::ofstream(p, std::ios::binary) << text;
    return "\"" + p.string() + "\"";
}

TEST(Cli, VerifyCurrentStateFailsWithWitness) {
    const auto o = invoke("verify --property current --delta 0.05 " + sample("ex1.json"));
    ASSERT_EQ(o.code, 1) << o.err;
    const auto doc = Json::parse(o.out);
    EXPECT_FALSE(doc["holds"].get<bool>());
    EXPECT_EQ(doc["witness"]["states"], Json::array({"B", "D", "B"}));
}

TEST(Cli, VerifyHoldsExitsZero) {
    EXPECT_EQ(invoke("verify --property current --delta 0.1 " + sample("ex1.json")).code, 0);
    EXPECT_EQ(invoke("verify --property initial --delta 0.15 " + sample("ex1.json")).code, 0);
    EXPECT_EQ(invoke("verify --property initial --delta 0.1 " + sample("ex1.json")).code, 1);
}

TEST(Cli, ThresholdPrintsTwelveSignificantDigits) {
    const auto o = invoke("threshold --property initial " + sample("ex1.json"));
    EXPECT_EQ(o.code, 0);
    EXPECT_EQ(o.out, "0.15\n");
}

TEST(Cli, NegativeDeltaIsAnError) {
    const auto o = invoke("verify --delta -1 --property initial " + sample("ex1.json"));
    EXPECT_EQ(o.code, 2);
    EXPECT_NE(o.err.find("delta must be nonnegative"), std::string::npos) << o.err;
    EXPECT_TRUE(o.out.empty());
}

TEST(Cli, UsageAndInputErrorsExitTwo) {
    EXPECT_EQ(invoke("").code, 2);
    EXPECT_EQ(invoke("frobnicate").code, 2);
    EXPECT_EQ(invoke("verify --property sideways --delta 0.1 " + sample("ex1.json")).code, 2);
    EXPECT_EQ(invoke("verify --property initial --delta 0.1 /nonexistent/model.json").code, 2);
    EXPECT_EQ(invoke("verify --property initial --delta 0.1 --slack -0.5 " + sample("ex1.json")).code, 2);
    const auto bad = write_scratch("bad.json", R"({"states": [], "inputs": []})");
    const auto o = invoke("verify --property initial --delta 0.1 " + bad);
    EXPECT_EQ(o.code, 2);
    EXPECT_TRUE(o.out.empty());
    EXPECT_EQ(invoke("estimator --kind sideways --delta 0.1 " + sample("ex1.json")).code, 2);
}

TEST(Cli, IdenticalInvocationsAreByteIdentical) {
    for (const std::string& args :
         {"verify --property infinite --delta 0.1 " + sample("ex1.json"),
          "estimator --kind cur --delta 0.1 " + sample("ex1.json"),
          "relate --kind InfSOP --epsilon 0.05 " + sample("ex1.json") + " " + sample("ex1.json"),
          "abstract --config " + sample("linear1d.toml")}) {
        const auto a = invoke(args);
        const auto b = invoke(args);
        EXPECT_FALSE(a.out.empty()) << args;
        EXPECT_EQ(a.out, b.out) << args;
        EXPECT_EQ(a.code, b.code) << args;
    }
}

TEST(Cli, OutWritesPayloadAndProvenanceSidecar) {
    const auto path = scratch_dir() / "verdict.json";
    const auto plain = invoke("verify --property current --delta 0.05 " + sample("ex1.json"));
    const auto o = invoke("verify --property current --delta 0.05 --out \"" + path.string() + "\" " + sample("ex1.json"));
    EXPECT_EQ(o.code, 1);
    EXPECT_TRUE(o.out.empty());
    EXPECT_EQ(slurp(path), plain.out);
    const auto prov = Json::parse(slurp(path.string() + ".provenance.json"));
    EXPECT_EQ(prov["subcommand"], "verify");
    EXPECT_EQ(prov["inputs"].size(), 1u);
    EXPECT_TRUE(prov.contains("generated_at"));
    EXPECT_FALSE(Json::parse(plain.out).contains("generated_at"));
}

TEST(Cli, EstimatorJsonAndDot) {
    const auto dot = scratch_dir() / "si.dot";
    const auto o = invoke("estimator --kind init --delta 0.15 --dot \"" + dot.string() + "\" " + sample("ex1.json"));
    ASSERT_EQ(o.code, 0) << o.err;
    const auto doc = Json::parse(o.out);
    EXPECT_EQ(doc["kind"], "initial");
    int with_b = 0;
    for (const auto& n : doc["nodes"]) {
        if (n["reference"] == "B") {
            ++with_b;
            EXPECT_EQ(n["belief"], Json::array({"A", "B", "C"}));
        }
    }
    EXPECT_EQ(with_b, 1);
    EXPECT_NE(slurp(dot).find("(B,{A,B,C})"), std::string::npos);
}

TEST(Cli, RelateComputesAndChecks) {
    const auto ex1 = sample("ex1.json");
    const auto computed = invoke("relate --kind CurSOP --epsilon 0 " + ex1 + " " + ex1);
    ASSERT_EQ(computed.code, 0) << computed.err;
    EXPECT_TRUE(Json::parse(computed.out)["initial_condition_holds"].get<bool>());

    const auto identity = write_scratch(
        "id.json", R"({"kind": "InitSOP", "epsilon": 0, "pairs": [["A","A"],["B","B"],["C","C"],["D","D"]]})");
    const auto ok = invoke("relate --kind InitSOP --epsilon 0 --relation " + identity + " " + ex1 + " " + ex1);
    EXPECT_EQ(ok.code, 0) << ok.err;
    EXPECT_TRUE(Json::parse(ok.out)["validated"].get<bool>());

    const auto partial = write_scratch("partial.json", R"({"kind": "InitSOP", "epsilon": 0, "pairs": [["A","A"]]})");
    const auto bad = invoke("relate --kind InitSOP --epsilon 0 --relation " + partial + " " + ex1 + " " + ex1);
    EXPECT_EQ(bad.code, 1);
    EXPECT_FALSE(Json::parse(bad.out)["violations"].empty());

    EXPECT_EQ(invoke("relate --kind CurSOP --epsilon 0 --relation " + identity + " " + ex1 + " " + ex1).code, 2);
    const auto unknown = write_scratch("unknown.json", R"({"kind": "InitSOP", "epsilon": 0, "pairs": [["A","E"]]})");
    const auto u = invoke("relate --kind InitSOP --epsilon 0 --relation " + unknown + " " + ex1 + " " + ex1);
    EXPECT_EQ(u.code, 2);
    EXPECT_NE(u.err.find("pairs[0][1]"), std::string::npos) << u.err;
}

TEST(Cli, AbstractEmitsLoadableModel) {
    const auto o = invoke("abstract --config " + sample("linear1d.toml"));
    ASSERT_EQ(o.code, 0) << o.err;
    const auto s = opacity::load_system(std::string_view(o.out));
    EXPECT_EQ(s.size(), 11u);
    EXPECT_EQ(s.inputs().size(), 3u);
    EXPECT_NE(o.err.find("1 boundary escapes"), std::string::npos) << o.err;
    // Overrides: eta 0.025 makes the fixture escape without a successor.
    EXPECT_EQ(invoke("abstract --config " + sample("linear1d.toml") + " --eta 0.025 --mu 0.0125").code, 2);
    const auto finer = invoke("abstract --config " + sample("linear1d.toml") + " --eta 0.05");
    ASSERT_EQ(finer.code, 0) << finer.err;
    EXPECT_EQ(opacity::load_system(std::string_view(finer.out)).size(), 21u);
}

TEST(Cli, PipelineExitCodes) {
    const auto cfg = sample("linear1d.toml");
    const auto o = invoke("pipeline --config " + cfg + " --delta 0.9 --property initial");
    EXPECT_TRUE(o.code == 0 || o.code == 1) << o.err;
    const auto doc = Json::parse(o.out);
    EXPECT_EQ(doc["outcome"] == "holds", o.code == 0);
    EXPECT_EQ(doc["model"]["states"], 11);
    const auto refused = invoke("pipeline --config " + cfg + " --delta 0.7 --property initial");
    EXPECT_EQ(refused.code, 2);
    EXPECT_NE(refused.err.find("precondition"), std::string::npos) << refused.err;
}

TEST(Cli, OracleAndCrossCheck) {
    const auto ex1 = sample("ex1.json");
    const auto o = invoke("oracle --property current --delta 0.05 " + ex1);
    EXPECT_EQ(o.code, 1);
    EXPECT_EQ(Json::parse(o.out)["witness"]["states"], Json::array({"B", "D", "B"}));
    EXPECT_EQ(invoke("oracle --property initial --delta 0.15 " + ex1).code, 0);
    for (const char* p : {"initial", "current", "infinite"}) {
        for (const char* d : {"0", "0.05", "0.1", "0.15", "0.25"}) {
            const auto v = invoke(std::string("verify --oracle --property ") + p + " --delta " + d + " " + ex1);
            EXPECT_NE(v.code, 2) << p << " " << d << ": " << v.err;
            EXPECT_TRUE(Json::parse(v.out).contains("oracle"));
        }
    }
}

TEST(Cli, InProcessRunMatchesBinary) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = opacity::cli::run({"threshold", "--property", "current", std::string(OPACITY_SAMPLES_DIR) + "/ex1.json"},
                                       out, err);
    EXPECT_EQ(code, 0);
    EXPECT_EQ(out.str(), invoke("threshold --property current " + sample("ex1.json")).out);
}

} // namespace
