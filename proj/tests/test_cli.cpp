#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " \"" + TDX_CLI_PATH + "\" " + args + " 2>&1";
    FILE* p = ::popen(cmd.c_str(), "r");
    std::string out;
    char buf[4096];
    while (size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    const int st = ::pclose(p);
    return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = fs::temp_directory_path() / ("tdx_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir_);
        ASSERT_EQ(run("synth --seed 42 --toy --out " + p("m.tdxw") + " --frames " + p("frames") + " --count 2").code, 0);
        ASSERT_EQ(run("keygen --model " + p("m.tdxw") + " --out-pk " + p("pk.bin") + " --out-vk " + p("vk.bin")).code, 0);
    }
    static void TearDownTestSuite() { fs::remove_all(dir_); }
    static std::string p(const std::string& name) { return (dir_ / name).string(); }

    static fs::path dir_;
};

fs::path Cli::dir_;

} // namespace

TEST_F(Cli, SynthIsDeterministic) {
    ASSERT_EQ(run("synth --seed 42 --toy --out " + p("again.tdxw")).code, 0);
    EXPECT_EQ(slurp(p("m.tdxw")), slurp(p("again.tdxw")));
    ASSERT_EQ(run("synth --seed 43 --toy --out " + p("other.tdxw")).code, 0);
    EXPECT_NE(slurp(p("m.tdxw")), slurp(p("other.tdxw")));
}

TEST_F(Cli, ProveThenVerifyAccepts) {
    const auto r = run("prove --pk " + p("pk.bin") + " --frame " + p("frames/frame_00000.rgb") + " --out " + p("proof.bin") + " --blind-seed 3");
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("verdict"), std::string::npos);
    const auto v = run("verify --vk " + p("vk.bin") + " --statement " + p("proof.bin.statement") + " --proof " + p("proof.bin"));
    EXPECT_EQ(v.code, 0) << v.out;
    EXPECT_NE(v.out.find("ACCEPT"), std::string::npos);

    // Deterministic blinding reproduces the proof byte for byte.
    ASSERT_EQ(run("prove --pk " + p("pk.bin") + " --frame " + p("frames/frame_00000.rgb") + " --out " + p("proof2.bin") + " --blind-seed 3").code, 0);
    EXPECT_EQ(slurp(p("proof.bin")), slurp(p("proof2.bin")));

    auto bytes = slurp(p("proof.bin"));
    bytes[bytes.size() / 3] ^= 0x04;
    std::ofstream(p("bad.bin"), std::ios::binary) << bytes;
    EXPECT_EQ(run("verify --vk " + p("vk.bin") + " --statement " + p("proof.bin.statement") + " --proof " + p("bad.bin")).code, 1);
}

TEST_F(Cli, ExitCodesFollowTheContract) {
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("prove --pk " + p("pk.bin")).code, 2);
    EXPECT_EQ(run("verify --vk " + p("missing.bin") + " --statement x --proof y").code, 2);
    const auto fmt = run("verify --vk " + p("m.tdxw") + " --statement " + p("m.tdxw") + " --proof " + p("m.tdxw"));
    EXPECT_EQ(fmt.code, 3);
    EXPECT_EQ(fmt.out.rfind("error: FormatError:", 0), 0u) << fmt.out;
    const auto shape = run("prove --pk " + p("pk.bin") + " --frame " + p("m.tdxw") + " --out " + p("x.bin"));
    EXPECT_EQ(shape.code, 3);
    EXPECT_NE(shape.out.find("ShapeError"), std::string::npos);
    EXPECT_EQ(run("prove --pk " + p("pk.bin") + " --frame " + p("frames/frame_00000.rgb") + " --width 32 --out " + p("x.bin")).code, 3);
    EXPECT_EQ(run("stream --pk " + p("pk.bin") + " --frames " + p("frames"), "TDX_CONNECT=127.0.0.1:1").code, 4);
}

TEST_F(Cli, CompilePrintsStatsAndWritesDigest) {
    const auto r = run("compile --model " + p("m.tdxw") + " --format json");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["depth"], 5);
    EXPECT_GT(j["gates"].get<size_t>(), 0u);
    EXPECT_EQ(slurp(p("m.tdxw.digest")), j["circuit_digest"].get<std::string>() + "\n");
}

TEST_F(Cli, BenchEmitsTheFiveMetricColumns) {
    const auto r = run("bench --toy --runs 1");
    ASSERT_EQ(r.code, 0) << r.out;
    for (const char* col : {"Prove Time", "Verify Time", "Proof Size", "PK Size", "VK Size"}) EXPECT_NE(r.out.find(col), std::string::npos) << col;
    EXPECT_NE(r.out.find("toy-16"), std::string::npos);
    EXPECT_NE(r.out.find("toy-32"), std::string::npos);
}
