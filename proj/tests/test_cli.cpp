// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "lwdock/dataset.hpp"
#include "lwdock/identify.hpp"
#include "lwdock/registry.hpp"
#include "test_support.hpp"

namespace lwdock {
namespace {

using testing::rule_dataset;
using testing::TempDir;

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  TempDir dir;

  std::string path(const std::string& name) const { return (dir / name).string(); }

  RunResult run(const std::string& args) const {
    const std::string err_file = path("stderr.txt");
    const std::string cmd = std::string(LWDOCK_CLI_PATH) + " " + args + " 2>" + err_file;
    RunResult r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) return r;
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err_file);
    return r;
  }

  RunResult ok(const std::string& args) const {
    RunResult r = run(args);
    EXPECT_EQ(r.exit_code, 0) << args << "\n" << r.err;
    return r;
  }

  // Small anchor: d=8, r=2, C=3, max_len=12.
  void init_anchor_file() const {
    const RunResult r = ok("anchor init --seed 1 --lora-seed 101 --dim 8 --rank 2 --classes 3 --max-len 12 --out " +
                           path("anchor.json"));
    AnchorConfig cfg = testing::small_config(1);
    EXPECT_EQ(r.out, anchor_id(cfg) + "\n");
  }
};

TEST_F(CliTest, EndToEndGenerateSubmitIdentify) {
  init_anchor_file();
  for (int i = 0; i < 3; ++i) {
    write_jsonl(path("d" + std::to_string(i) + ".jsonl"), rule_dataset(48, 3, 10 + i, 12));
  }
  write_jsonl(path("user.jsonl"), rule_dataset(32, 3, 10, 12));

  for (int i = 0; i < 3; ++i) {
    const std::string base = "gen-spec --mode developer --anchor " + path("anchor.json") + " --data " +
                             path("d" + std::to_string(i) + ".jsonl") + " --out ";
    ok(base + path("s" + std::to_string(i) + ".lws"));
    ok(base + path("again.lws"));
    EXPECT_EQ(slurp(path("again.lws")), slurp(path("s" + std::to_string(i) + ".lws"))) << "spec " << i;
  }
  ok("gen-spec --mode user --anchor " + path("anchor.json") + " --data " + path("user.jsonl") + " --out " +
     path("user.lws"));
  EXPECT_EQ(read_spec_file(slurp(path("user.lws"))).header.mode, SpecMode::kUser);

  // Empty registry: identify succeeds and says so.
  ok("submit --registry " + path("reg") + " --anchor " + path("anchor.json") + " --spec " + path("s0.lws") +
     " --model-uri uri://0 --meta name=zero");
  ok("remove --registry " + path("reg") + " --id 1");
  EXPECT_EQ(ok("identify --registry " + path("reg") + " --spec " + path("user.lws")).out, "no matches\n");

  for (int i = 0; i < 3; ++i) {
    const RunResult r = ok("submit --registry " + path("reg") + " --spec " + path("s" + std::to_string(i) + ".lws") +
                           " --model-uri uri://" + std::to_string(i));
    EXPECT_EQ(r.out, std::to_string(i + 2) + "\n");  // ids are not reused
  }
  const std::string listing = ok("list --registry " + path("reg")).out;
  EXPECT_EQ(std::count(listing.begin(), listing.end(), '\n'), 3);

  const nlohmann::json got =
      nlohmann::json::parse(ok("identify --registry " + path("reg") + " --spec " + path("user.lws") + " -k 3 --json").out);
  const Registry reg = Registry::open(path("reg"));
  const auto want = identify(reg, read_spec_file(slurp(path("user.lws"))), 3);
  ASSERT_EQ(got["matches"].size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(got["matches"][i]["id"], want[i].learnware_id);
    EXPECT_EQ(got["matches"][i]["similarity"].get<double>(), want[i].similarity);
  }
  // A submitted spec finds itself first.
  const nlohmann::json self =
      nlohmann::json::parse(ok("identify --registry " + path("reg") + " --spec " + path("s1.lws") + " -k 1 --json").out);
  EXPECT_EQ(self["matches"][0]["id"], 3);
  EXPECT_EQ(self["matches"][0]["similarity"], 1.0);

  const RunResult table = ok("identify --registry " + path("reg") + " --spec " + path("user.lws") + " -k 2");
  EXPECT_EQ(table.out.rfind("rank", 0), 0u);
  EXPECT_NE(table.out.find("uri://0"), std::string::npos);
}

TEST_F(CliTest, ErrorsExitNonZeroWithApiCode) {
  init_anchor_file();
  write_jsonl(path("d.jsonl"), rule_dataset(16, 3, 1, 12));
  ok("gen-spec --mode developer --anchor " + path("anchor.json") + " --data " + path("d.jsonl") + " --out " +
     path("s.lws"));

  RunResult r = run("identify --registry " + path("nowhere") + " --spec " + path("s.lws"));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << r.err;

  ok("anchor init --seed 2 --dim 8 --rank 2 --classes 3 --max-len 12 --out " + path("other.json"));
  // The registry is created for another anchor, so the spec is refused.
  r = run("submit --registry " + path("reg") + " --anchor " + path("other.json") + " --spec " + path("s.lws") +
          " --model-uri u");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("anchor-mismatch"), std::string::npos) << r.err;

  { std::ofstream(path("junk.lws")) << "LWSPEC02garbage"; }
  r = run("identify --registry " + path("reg") + " --spec " + path("junk.lws"));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("bad-request"), std::string::npos) << r.err;

  r = run("remove --registry " + path("reg") + " --id 99");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("not-found"), std::string::npos) << r.err;
}

TEST_F(CliTest, ModelLabelsReproducingGroundTruthGiveIdenticalSpec) {
  init_anchor_file();
  write_jsonl(path("d.jsonl"), rule_dataset(40, 3, 5, 12));
  const std::string base = "gen-spec --mode developer --anchor " + path("anchor.json") + " --data " + path("d.jsonl");
  const std::string labeler = std::string("'python3 ") + LWDOCK_FIXTURE_DIR + "/first_byte_labeler.py 3";
  ok(base + " --out " + path("truth.lws"));
  ok(base + " --labels-from-model " + labeler + "' --out " + path("model.lws"));
  EXPECT_EQ(slurp(path("model.lws")), slurp(path("truth.lws")));

  ok(base + " --labels-from-model " + labeler + " 1' --out " + path("shifted.lws"));
  EXPECT_NE(slurp(path("shifted.lws")), slurp(path("truth.lws")));

  RunResult r = run(base + " --labels-from-model 'echo 1' --out " + path("x.lws"));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("bad-request"), std::string::npos) << r.err;
  r = run(base + " --labels-from-model 'exit 3' --out " + path("x.lws"));
  EXPECT_EQ(r.exit_code, 1);
  r = run("gen-spec --mode user --anchor " + path("anchor.json") + " --data " + path("d.jsonl") +
          " --labels-from-model " + labeler + "' --out " + path("x.lws"));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_FALSE(std::filesystem::exists(path("x.lws")));
}

TEST_F(CliTest, HelpAndUsageErrors) {
  EXPECT_NE(ok("--help").out.find("gen-spec"), std::string::npos);
  EXPECT_NE(run("gen-spec --mode sideways").exit_code, 0);
}

}  // namespace
}  // namespace lwdock
