// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Drives the cnnlab binary through a shell and checks its output.

#include <doctest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "support.hpp"

using cnnlab::testing::contains;
using cnnlab::testing::data_path;

namespace {

struct RunResult {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / ("cnnlab_cli_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

RunResult run(const std::string& args) {
  const auto dir = scratch_dir();
  const auto err_path = dir / "stderr.txt";
  const std::string cmd = std::string("'") + CNNLAB_CLI + "' " + args + " 2>'" + err_path.string() + "'";
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.err = slurp(err_path);
  return r;
}

std::string model8() { return "--model '" + data_path("models/alexnet8.model") + "'"; }
std::string profile(const char* name) {
  return "--profile '" + data_path(std::string("profiles/") + name + ".profile") + "'";
}
std::string both_profiles() { return profile("k40-cudnn") + " " + profile("de5-fpga"); }

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("flops table") {
  const RunResult r = run("flops " + model8());
  REQUIRE(r.status == 0);
  CHECK(r.err.empty());
  CHECK(contains(r.out, "fc6    fc      75497472  150994944"));
  CHECK(contains(r.out, "fc7    fc      33554432   67108864"));
  CHECK(contains(r.out, "fc8    fc       8192000   16384000"));
  CHECK(contains(r.out, "conv1  conv   210830400          -"));
}

TEST_CASE("validate") {
  const RunResult r = run("validate " + model8());
  CHECK(r.status == 0);
  CHECK(contains(r.out, "ok\n"));
}

TEST_CASE("schedule objectives") {
  SUBCASE("latency puts everything on the GPU") {
    const RunResult r = run("schedule " + model8() + " " + both_profiles() + " --objective latency");
    REQUIRE(r.status == 0);
    CHECK(contains(r.out, "fc8    k40-cudnn"));
    CHECK(contains(r.out, "conv1  k40-cudnn"));
    CHECK_FALSE(contains(r.out, "de5-fpga"));
  }
  SUBCASE("peak power puts everything on the FPGA and writes a schedule file") {
    const auto path = scratch_dir() / "peak.schedule";
    const RunResult r = run("schedule " + model8() + " " + both_profiles() +
                            " --objective peak-power --out '" + path.string() + "'");
    REQUIRE(r.status == 0);
    CHECK_FALSE(contains(r.out, "k40-cudnn"));
    CHECK(contains(r.out, "peak power_w   2.23"));
    const std::string text = slurp(path);
    CHECK(contains(text, "\"de5-fpga\""));
    CHECK_FALSE(contains(text, "k40"));

    const RunResult p = run("profile " + model8() + " " + both_profiles() + " --schedule '" +
                            path.string() + "'");
    REQUIRE(p.status == 0);
    CHECK(contains(p.out, "peak power_w     2.23"));
  }
  SUBCASE("an unreachable power budget fails cleanly") {
    const RunResult r = run("schedule " + model8() + " " + both_profiles() +
                            " --objective latency --power-budget 1");
    CHECK(r.status == 1);
    CHECK(contains(r.err, "cnnlab: error: no feasible schedule"));
    CHECK(count_lines(r.err) == 1);
  }
}

TEST_CASE("profile report") {
  const std::string fpga = "profile " + model8() + " " + profile("de5-fpga");
  const RunResult r = run(fpga);
  REQUIRE(r.status == 0);
  // conv rows draw 2.23 W and deliver 10.58 GFLOPS/W.
  CHECK(contains(r.out, "2.23   0.0199273  23.5934     10.58    10.58"));
  CHECK(contains(r.out, "1.94   0.0920701   1.5908      0.82     0.82"));

  const auto csv = scratch_dir() / "gpu.csv";
  const RunResult g =
      run("profile " + model8() + " " + profile("k40-cudnn") + " --csv '" + csv.string() + "'");
  REQUIRE(g.status == 0);
  const std::string text = slurp(csv);
  CHECK(text.rfind("layer,device,flops,time_s,power_w,energy_j,gflops,gflops_per_w,gflop_per_j\n", 0) == 0);
  CHECK(contains(text, "\nfc7,k40-cudnn,33554432,"));
  CHECK(contains(g.out, "14.2"));
  CHECK(count_lines(text) == 9);

  const RunResult again = run(fpga);
  CHECK(again.out == r.out);
}

TEST_CASE("pareto") {
  const RunResult r = run("pareto " + model8() + " " + both_profiles());
  REQUIRE(r.status == 0);
  CHECK(contains(r.out, "frontier points"));
}

TEST_CASE("weights and inference") {
  const auto path = scratch_dir() / "w.cnnl";
  const std::string model = "--model '" + data_path("models/alexnet8.model") + "'";
  const RunResult w = run("weights " + model + " --seed 3 --out '" + path.string() + "'");
  REQUIRE(w.status == 0);
  CHECK(contains(w.out, "wrote 16 blobs"));
  const RunResult a = run("infer " + model + " --weights '" + path.string() + "' --seed 4");
  REQUIRE(a.status == 0);
  CHECK(contains(a.out, "output 1000x1x1 (1000 values), sum 1"));
  const RunResult b = run("infer " + model + " --weights '" + path.string() + "' --seed 4");
  CHECK(a.out == b.out);
}

TEST_CASE("errors print one line and exit nonzero") {
  const std::string missing = "--model '" + data_path("models/missing.model") + "'";
  for (const std::string& args :
       {std::string("flops ") + missing, std::string(""), std::string("bogus"),
        "schedule " + model8() + " " + profile("de5-fpga") + " --objective speed",
        "schedule " + model8() + " --profile '" + data_path("models/alexnet8.model") + "' --objective energy",
        "infer " + model8() + " --weights /nonexistent/w.cnnl"}) {
    CAPTURE(args);
    const RunResult r = run(args);
    CHECK(r.status != 0);
    CHECK(r.err.rfind("cnnlab: error: ", 0) == 0);
    CHECK(count_lines(r.err) == 1);
  }
  CHECK(run("bogus").status == 2);
  CHECK(run("flops " + missing).status == 1);
}
