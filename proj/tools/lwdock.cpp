// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

// lwdock: local workflows and the dock service.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lwdock/anchor.hpp"
#include "lwdock/bench.hpp"
#include "lwdock/dataset.hpp"
#include "lwdock/error.hpp"
#include "lwdock/identify.hpp"
#include "lwdock/registry.hpp"
#include "lwdock/service.hpp"
#include "lwdock/spec.hpp"
#include "lwdock/specgen.hpp"

#include "labeler.hpp"

namespace fs = std::filesystem;
using namespace lwdock;

namespace {

AnchorDescriptor load_descriptor(const fs::path& path) {
  const nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kBadRequest, path.string() + " is not valid JSON");
  return anchor_descriptor_from_json(j);
}

Metadata parse_metadata(const std::vector<std::string>& pairs) {
  Metadata out;
  for (const std::string& kv : pairs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::kBadRequest, "metadata must be KEY=VALUE: " + kv);
    out[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return out;
}

Registry open_registry(const fs::path& dir, const std::string& anchor_file) {
  std::optional<AnchorConfig> cfg;
  if (!anchor_file.empty()) cfg = load_descriptor(anchor_file).anchor;
  return Registry::open(dir, cfg);
}

void print_matches(const Registry& reg, const std::vector<RankedMatch>& matches) {
  if (matches.empty()) {
    std::cout << "no matches\n";
    return;
  }
  std::printf("%-6s %-8s %-12s %s\n", "rank", "id", "similarity", "model_uri");
  for (const RankedMatch& m : matches) {
    std::printf("%-6zu %-8llu %-12.8f %s\n", m.rank, static_cast<unsigned long long>(m.learnware_id), m.similarity,
                reg.get(m.learnware_id).model_uri.c_str());
  }
}

DockServer* g_server = nullptr;

extern "C" void handle_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lwdock: learnware dock with parameter-vector specifications"};
  app.require_subcommand(1);

  // anchor init
  auto* anchor_cmd = app.add_subcommand("anchor", "anchor descriptor operations");
  anchor_cmd->require_subcommand(1);
  auto* anchor_init = anchor_cmd->add_subcommand("init", "write a new anchor descriptor");
  AnchorConfig acfg;
  std::string anchor_out;
  anchor_init->add_option("--seed", acfg.base_seed, "base weight seed")->capture_default_str();
  anchor_init->add_option("--lora-seed", acfg.lora_seed, "seed of the frozen A matrices")->capture_default_str();
  anchor_init->add_option("--dim", acfg.embed_dim, "embedding dimension d")->capture_default_str();
  anchor_init->add_option("--rank", acfg.rank, "adapter rank r")->capture_default_str();
  anchor_init->add_option("--alpha", acfg.lora_alpha, "adapter alpha")->capture_default_str();
  anchor_init->add_option("--classes", acfg.num_classes, "number of classes C")->capture_default_str();
  anchor_init->add_option("--max-len", acfg.max_len, "maximum sequence length")->capture_default_str();
  anchor_init->add_option("--out", anchor_out, "descriptor JSON path")->required();

  // gen-spec
  auto* gen = app.add_subcommand("gen-spec", "fit a specification to a local dataset");
  std::string gen_mode = "user";
  std::string gen_anchor;
  std::string gen_data;
  std::string gen_preset = "toy";
  std::string gen_out;
  std::string gen_labeler;
  std::optional<std::uint64_t> gen_shuffle_seed;
  std::optional<std::size_t> gen_steps;
  bool gen_stamp = false;
  gen->add_option("--mode", gen_mode, "developer or user")
      ->check(CLI::IsMember({"developer", "user"}))
      ->capture_default_str();
  gen->add_option("--anchor", gen_anchor, "anchor descriptor JSON")->required();
  gen->add_option("--data", gen_data, "JSONL dataset of {text, label}")->required();
  gen->add_option("--preset", gen_preset, "training preset")->capture_default_str();
  gen->add_option("--out", gen_out, "output LWSPEC01 file")->required();
  gen->add_option("--labels-from-model", gen_labeler,
                  "developer mode: shell command that reads {\"text\"} JSONL on stdin and prints one label per line");
  gen->add_option("--shuffle-seed", gen_shuffle_seed, "override the preset's shuffle seed");
  gen->add_option("--steps", gen_steps, "override the preset's step count");
  gen->add_flag("--stamp-time", gen_stamp, "record the current time in the header (output no longer reproducible)");

  // submit
  auto* submit = app.add_subcommand("submit", "register a learnware");
  std::string reg_dir;
  std::string reg_anchor;
  std::string submit_spec;
  std::string submit_uri;
  std::vector<std::string> submit_meta;
  submit->add_option("--registry", reg_dir, "registry directory")->required();
  submit->add_option("--anchor", reg_anchor, "anchor descriptor, required when the registry is new");
  submit->add_option("--spec", submit_spec, "LWSPEC01 file")->required();
  submit->add_option("--model-uri", submit_uri, "opaque model reference")->required();
  submit->add_option("--meta", submit_meta, "metadata KEY=VALUE (repeatable)");

  // identify
  auto* ident = app.add_subcommand("identify", "rank registered learnwares against a user specification");
  std::string ident_spec;
  std::size_t ident_k = 5;
  bool ident_json = false;
  ident->add_option("--registry", reg_dir, "registry directory")->required();
  ident->add_option("--spec", ident_spec, "LWSPEC01 user specification")->required();
  ident->add_option("-k", ident_k, "number of matches")->capture_default_str();
  ident->add_flag("--json", ident_json, "print JSON instead of a table");

  // list / remove
  auto* list = app.add_subcommand("list", "list registered learnwares");
  list->add_option("--registry", reg_dir, "registry directory")->required();
  auto* remove = app.add_subcommand("remove", "delete a learnware");
  std::uint64_t remove_id = 0;
  remove->add_option("--registry", reg_dir, "registry directory")->required();
  remove->add_option("--id", remove_id, "learnware id")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "run the synthetic hub benchmark");
  BenchConfig bcfg;
  std::string bench_report;
  std::string bench_csv;
  std::string bench_dev_labels = "ground-truth";
  bool bench_quiet = false;
  bench->add_option("--families", bcfg.n_families, "task families K")->capture_default_str();
  bench->add_option("--per-family", bcfg.models_per_family, "learnwares per family M")->capture_default_str();
  bench->add_option("--trials", bcfg.n_trials, "independent trials")->capture_default_str();
  bench->add_option("--seed", bcfg.trial_seed, "trial seed")->capture_default_str();
  bench->add_option("--train-n", bcfg.train_n, "train split size")->capture_default_str();
  bench->add_option("--user-n", bcfg.user_n, "user split size")->capture_default_str();
  bench->add_option("--test-n", bcfg.test_n, "test split size")->capture_default_str();
  bench->add_option("--model-steps", bcfg.model_train_steps, "learnware model training steps")->capture_default_str();
  bench->add_option("--preset", bcfg.spec_preset, "specification preset")->capture_default_str();
  bench->add_option("--developer-labels", bench_dev_labels, "ground-truth or model")
      ->check(CLI::IsMember({"ground-truth", "model"}))
      ->capture_default_str();
  bench->add_option("--jobs", bcfg.jobs, "parallel trials")->capture_default_str();
  bench->add_option("--report", bench_report, "write the JSON report here");
  bench->add_option("--csv", bench_csv, "write the family-match matrix as CSV here");
  bench->add_flag("--quiet", bench_quiet, "no per-trial progress on stderr");

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP dock service");
  std::string serve_addr = "127.0.0.1:8080";
  serve->add_option("--registry", reg_dir, "registry directory")->required();
  serve->add_option("--anchor", reg_anchor, "anchor descriptor, required when the registry is new");
  serve->add_option("--addr", serve_addr, "HOST:PORT")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (anchor_init->parsed()) {
      const AnchorDescriptor desc = AnchorDescriptor::with_default_presets(acfg);
      acfg.validate();
      write_file_atomic(anchor_out, to_json(desc).dump(2) + "\n");
      std::cout << desc.anchor_id() << "\n";
    } else if (gen->parsed()) {
      const AnchorDescriptor desc = load_descriptor(gen_anchor);
      const auto preset = desc.presets.find(gen_preset);
      TrainConfig tcfg = preset != desc.presets.end() ? preset->second : preset_by_name(gen_preset);
      if (gen_shuffle_seed) tcfg.shuffle_seed = *gen_shuffle_seed;
      if (gen_steps) tcfg.steps = *gen_steps;
      const std::vector<LabeledExample> data = read_jsonl(gen_data);
      const SpecMode mode = gen_mode == "developer" ? SpecMode::kDeveloper : SpecMode::kUser;
      LabelSource source = GroundTruth{};
      if (!gen_labeler.empty()) {
        if (mode != SpecMode::kDeveloper) {
          throw Error(ErrorCode::kBadRequest, "--labels-from-model is only meaningful with --mode developer");
        }
        source = external_labeler(gen_labeler, data);
      }
      const AnchorModel anchor = init_anchor(desc.anchor);
      LoraAdapter adapter = init_adapter(desc.anchor);
      fit_adapter(anchor, adapter, data, source, tcfg);
      std::int64_t stamp = 0;
      if (gen_stamp) {
        stamp = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::system_clock::now().time_since_epoch())
                    .count();
      }
      write_file_atomic(gen_out, write_spec_file(make_specification(desc.anchor, adapter, mode, stamp)));
    } else if (submit->parsed()) {
      Registry reg = open_registry(reg_dir, reg_anchor);
      const Specification spec = read_spec_file(read_file(submit_spec));
      std::cout << reg.submit(submit_uri, spec, parse_metadata(submit_meta)) << "\n";
    } else if (ident->parsed()) {
      const Registry reg = Registry::open(reg_dir);
      const std::vector<RankedMatch> matches = identify(reg, read_spec_file(read_file(ident_spec)), ident_k);
      if (ident_json) {
        nlohmann::json out = nlohmann::json::array();
        for (const RankedMatch& m : matches) {
          out.push_back({{"id", m.learnware_id}, {"similarity", m.similarity}, {"rank", m.rank}});
        }
        std::cout << nlohmann::json{{"matches", out}}.dump() << "\n";
      } else {
        print_matches(reg, matches);
      }
    } else if (list->parsed()) {
      const Registry reg = Registry::open(reg_dir);
      for (const Learnware& lw : reg.list()) std::cout << summary_json(lw).dump() << "\n";
    } else if (remove->parsed()) {
      Registry reg = Registry::open(reg_dir);
      reg.remove(remove_id);
    } else if (bench->parsed()) {
      bcfg.developer_labels = bench_dev_labels == "model" ? DeveloperLabels::kModel : DeveloperLabels::kGroundTruth;
      TrialObserver progress;
      if (!bench_quiet) {
        progress = [&](const TrialSummary& s) {
          std::fprintf(stderr, "trial %zu: %zu/%zu family matches\n", s.trial, s.family_matches, bcfg.n_families);
        };
      }
      const BenchReport report = run_bench(bcfg, progress);
      std::cout << render_table(report);
      if (!bench_report.empty()) write_file_atomic(bench_report, to_json(report).dump(2) + "\n");
      if (!bench_csv.empty()) write_file_atomic(bench_csv, family_match_csv(report));
    } else if (serve->parsed()) {
      Registry reg = open_registry(reg_dir, reg_anchor);
      const auto [host, port] = parse_host_port(serve_addr);
      DockServer server(reg);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::fprintf(stderr, "serving registry %s (anchor %s) on %s:%d\n", reg_dir.c_str(), reg.anchor_id().c_str(),
                   host.c_str(), bound);
      server.listen();
      g_server = nullptr;
    }
  } catch (const Error& e) {
    const ApiError api = to_api_error(e.code(), e.message());
    std::cerr << "error: " << api.code << ": " << api.message << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
