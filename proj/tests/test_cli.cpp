// End-to-end checks of the command line tool: exit codes, determinism of
// the CSV output, and file round trips.

#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>
#include <fstream>
#include <sstream>
#include <string>

#include "cpcstar/io.hpp"

#ifndef CPCSTAR_CLI_PATH
#error "CPCSTAR_CLI_PATH must point at the built tool"
#endif

namespace {

using namespace cpcstar;

struct RunResult {
  int exit_code = -1;
  std::string stdout_text;
};

std::string temp_path(const std::string& name) {
  return std::string("cli_scratch_") + name;
}

RunResult run_cli(const std::string& args, const std::string& out_name) {
  const std::string out = temp_path(out_name);
  const std::string cmd = std::string(CPCSTAR_CLI_PATH) + " " + args + " > " +
                          out + " 2> " + out + ".err";
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WEXITSTATUS(status);
  std::ifstream in(out, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  result.stdout_text = os.str();
  return result;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("examples command round trips through files") {
  const auto emitted = run_cli("--command examples --input uhf{2,3}", "uhf");
  REQUIRE(emitted.exit_code == 0);
  write_file(temp_path("uhf.json"), emitted.stdout_text);

  const auto validated =
      run_cli("--command validate --input " + temp_path("uhf.json"), "val");
  CHECK(validated.exit_code == 0);
  CHECK(validated.stdout_text.find("valid") != std::string::npos);

  const ParsedDocument reparsed = parse_system_document(emitted.stdout_text);
  CHECK(structurally_equal(
      std::get<InductiveSystem>(build_builtin("uhf{2,3}")),
      std::get<InductiveSystem>(reparsed)));
}

TEST_CASE("defect sweeps are byte deterministic") {
  const std::string args =
      "--command defects --input uhf{2,4} --k 0 --seed 7 --probes random:4";
  const auto first = run_cli(args, "d1");
  const auto second = run_cli(args, "d2");
  REQUIRE(first.exit_code == 0);
  REQUIRE(second.exit_code == 0);
  CHECK(first.stdout_text == second.stdout_text);
  CHECK(first.stdout_text.find("kind,k,m,n,l,pair,value") != std::string::npos);
}

TEST_CASE("exit codes") {
  // missing input file -> I/O error
  CHECK(run_cli("--command validate --input does_not_exist.json", "io").exit_code == 3);

  // malformed document -> parse error
  write_file(temp_path("broken.json"), "{broken");
  CHECK(run_cli("--command validate --input " + temp_path("broken.json"),
                "parse")
            .exit_code == 3);

  // transpose step -> validation failure
  write_file(temp_path("transpose.json"), R"({
    "kind": "system", "name": "bad",
    "stages": [{"blocks": [2]}, {"blocks": [2]}],
    "steps": [{"form": "matrix", "data": [
      [[1,0],[0,0],[0,0],[0,0]],
      [[0,0],[0,0],[1,0],[0,0]],
      [[0,0],[1,0],[0,0],[0,0]],
      [[0,0],[0,0],[0,0],[1,0]]]}]
  })");
  CHECK(run_cli("--command validate --input " + temp_path("transpose.json"),
                "tr")
            .exit_code == 1);

  // infeasible extraction -> dedicated status
  CpapSystem squeezed = exact_cpap(AlgebraShape({2}), 3);
  for (auto& phi : squeezed.up) {
    std::vector<KrausBlock> kraus = {
        {0, 0, {std::sqrt(0.5) * Matrix::Identity(2, 2)}}};
    phi = CpMap::from_kraus(squeezed.stages[0], squeezed.algebra,
                            std::move(kraus));
  }
  squeezed.record_approx_defects();
  write_file(temp_path("squeezed.json"), emit_system_document(squeezed));
  const auto infeasible =
      run_cli("--command extract --input " + temp_path("squeezed.json") +
                  " --epsilons 0.5,0.25,0.125",
              "inf");
  CHECK(infeasible.exit_code == 2);

  // a feasible extraction reports its schedule
  write_file(temp_path("interval.json"),
             emit_builtin_example("interval_cpap{[3,5,9]}"));
  const auto feasible =
      run_cli("--command extract --input " + temp_path("interval.json") +
                  " --epsilons 0.5,0.25,0.125",
              "feas");
  CHECK(feasible.exit_code == 0);
  CHECK(feasible.stdout_text.find("\"indices\"") != std::string::npos);
}

TEST_CASE("nf-lift command emits the lifted system") {
  const auto lifted =
      run_cli("--command nf-lift --input uhf{2,3}", "lift");
  REQUIRE(lifted.exit_code == 0);
  const ParsedDocument doc = parse_system_document(lifted.stdout_text);
  const auto& sys = std::get<InductiveSystem>(doc);
  CHECK(sys.stage(3) == AlgebraShape({1, 2, 4, 8}));
}
