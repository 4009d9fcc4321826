// One pass/fail line per acceptance criterion. Exit status 0 iff all pass.
// Optional arguments name a subset of suites to run.

#include <cstdio>
#include <iostream>

#include "tdx/acceptance.hpp"

namespace {

std::string run_cli_bench() {
    const std::string cmd = std::string("\"") + TDX_CLI_PATH + "\" bench --toy --format json";
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p) throw std::runtime_error("cannot run " + cmd);
    std::string out;
    char buf[4096];
    while (size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    if (::pclose(p) != 0) throw std::runtime_error("bench exited nonzero");
    return out;
}

} // namespace

int main(int argc, char** argv) {
    tdx::acceptance::Options opt;
    opt.bench_json = run_cli_bench;
    const std::vector<std::string> only(argv + 1, argv + argc);
    const auto results = tdx::acceptance::run_all(opt, [](const auto& r) { std::cout << tdx::acceptance::format_line(r) << std::endl; }, only);
    size_t passed = 0;
    for (const auto& r : results) passed += r.passed;
    std::cout << passed << "/" << results.size() << " criteria passed" << std::endl;
    return passed == results.size() && !results.empty() ? 0 : 1;
}
