// Command-line front end: build wire stacks from a description file, dissect
// raw stack bytes, validate a stack against a path, and run scenarios.
//
// Exit codes: 0 success, 2 bad usage or bad input, 1 internal failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "mna/hex.hpp"
#include "mna/report.hpp"
#include "mna/scenario.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInternal = 1;
constexpr int kBadInput = 2;

int fail_input(const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  return kBadInput;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw mna::ScenarioError("cannot open " + path);
  return in;
}

int cmd_build(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  mna::StackFile sf = mna::parse_stack_file(in);
  mna::LabelStack stack = mna::realize_stack(sf);
  std::cout << mna::to_hex(mna::encode_stack(stack)) << "\n";
  return kOk;
}

int cmd_dissect(const std::string& hex_arg, std::size_t rld) {
  std::string text = hex_arg;
  if (text.empty())
    text.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  auto bytes = mna::from_hex(text);
  if (!bytes) return fail_input("input is not an even-length hex string");
  std::cout << mna::dissect_text(*bytes, rld ? rld : mna::kNoRldLimit);
  return kOk;
}

int cmd_validate(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  mna::StackFile sf = mna::parse_stack_file(in);
  if (!sf.path) return fail_input("validation needs a [path] section");
  mna::LabelStack stack = mna::realize_stack(sf);
  mna::ValidationReport vr = mna::validate_stack(stack, *sf.path, sf.nodes);
  if (!vr.ok()) {
    for (const auto& v : vr.violations) std::cerr << v.node_id << ": " << v.what << "\n";
    return kBadInput;
  }
  std::cout << "ok: " << sf.path->hops.size() << " hops, " << stack.entries.size()
            << " stack entries, " << stack.lse_count() << " words\n";
  return kOk;
}

int cmd_simulate(const std::string& path, const std::optional<std::uint64_t>& seed,
                 const std::string& out_path) {
  std::ifstream in = open_or_throw(path);
  mna::Scenario sc = mna::parse_scenario(in);
  if (seed) sc.options.seed = *seed;
  mna::SimReport report = mna::run_scenario(sc);

  char loss[32];
  std::snprintf(loss, sizeof loss, "%.4f",
                report.sent ? double(report.dropped) / double(report.sent) : 0.0);
  std::cout << "sent " << report.sent << ", delivered " << report.delivered << ", dropped "
            << report.dropped << ", e2e loss " << loss << "\n\n";
  std::cout << mna::summary_table(report);

  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << mna::report_json(report) << "\n";
    if (!out.good()) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return kInternal;
    }
    std::cout << "\nreport written to " << out_path << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MPLS label stacks with in-stack network actions"};
  app.require_subcommand(1);

  std::string build_file;
  CLI::App* build = app.add_subcommand("build", "compose a description file into wire bytes");
  build->add_option("file", build_file, "stack description file")->required();

  std::string dissect_hex;
  std::size_t dissect_rld = 0;
  CLI::App* dissect = app.add_subcommand("dissect", "annotate raw stack bytes");
  dissect->add_option("hex", dissect_hex, "hex bytes (stdin when omitted)");
  dissect->add_option("--rld", dissect_rld, "annotate only this many entries, rest stays opaque");

  std::string validate_file;
  CLI::App* validate =
      app.add_subcommand("validate", "check a stack against per-node readable depths");
  validate->add_option("file", validate_file, "stack description file with a [path]")->required();

  std::string sim_file, sim_out;
  std::optional<std::uint64_t> sim_seed;
  CLI::App* simulate = app.add_subcommand("simulate", "run a scenario file");
  simulate->add_option("file", sim_file, "scenario file")->required();
  simulate->add_option("--seed", sim_seed, "override the scenario seed");
  simulate->add_option("--out", sim_out, "write the full JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (build->parsed()) return cmd_build(build_file);
    if (dissect->parsed()) return cmd_dissect(dissect_hex, dissect_rld);
    if (validate->parsed()) return cmd_validate(validate_file);
    return cmd_simulate(sim_file, sim_seed, sim_out);
  } catch (const mna::ScenarioError& e) {
    return fail_input(e.what());
  } catch (const mna::ComposeError& e) {
    return fail_input(e.what());
  } catch (const mna::CodecError& e) {
    return fail_input(e.what());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}
