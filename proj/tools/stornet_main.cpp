#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "stornet/stornet.hpp"

namespace {

stornet::Scenario load_or_die(const std::string& path) { return stornet::load_scenario(path); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stornet: certified online control of storage networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("stornet ") + stornet::tool_version());

  std::string scenario_path;
  std::string out_dir;
  std::string policy_str = "lyapunov";
  bool shared_w = false;
  bool use_markov = false;
  int num_seeds = 1;

  CLI::App* validate = app.add_subcommand("validate", "check a scenario file");
  validate->add_option("scenario", scenario_path, "scenario file")->required();

  CLI::App* plan = app.add_subcommand("plan", "compute certified controller parameters");
  plan->add_option("scenario", scenario_path, "scenario file")->required();
  plan->add_flag("--shared-w", shared_w, "use one weight shared across buses");
  plan->add_option("--out", out_dir, "write the report to this file instead of stdout");

  CLI::App* bound = app.add_subcommand("bound", "report the certified sub-optimality bound");
  bound->add_option("scenario", scenario_path, "scenario file")->required();
  bound->add_flag("--markov", use_markov, "also evaluate the Markov-disturbance bound");

  CLI::App* simulate = app.add_subcommand("simulate", "run one policy over the horizon");
  simulate->add_option("scenario", scenario_path, "scenario file")->required();
  simulate->add_option("--policy", policy_str, "lyapunov | greedy | no-storage")
      ->check(CLI::IsMember({"lyapunov", "greedy", "no-storage"}));
  simulate->add_option("--seeds", num_seeds, "number of independent seeds")->check(CLI::PositiveNumber);
  simulate->add_option("--out", out_dir, "directory for trace CSVs and the run report");

  CLI::App* compare = app.add_subcommand(
      "compare", "run all policies with common random numbers and write the sweep table");
  compare->add_option("scenario", scenario_path, "scenario file")->required();
  compare->add_option("--out", out_dir, "output directory")->required();

  CLI::App* kmatrix = app.add_subcommand("kmatrix", "print the voltage-law matrix and diagnostics");
  kmatrix->add_option("scenario", scenario_path, "scenario file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      const stornet::Scenario s = load_or_die(scenario_path);
      std::cout << "ok: " << s.buses.size() << " bus(es), horizon " << s.horizon << ", policy "
                << stornet::policy_name(s.policy) << ", hash " << s.source_hash << "\n";
      return 0;
    }
    if (plan->parsed()) {
      const stornet::Scenario s = load_or_die(scenario_path);
      const stornet::ControllerParams params = stornet::plan_for_scenario(s, shared_w);
      const std::string text = stornet::plan_report(s, params).dump(2) + "\n";
      if (out_dir.empty()) {
        std::cout << text;
      } else {
        stornet::write_file_atomic(out_dir, text);
      }
      return 0;
    }
    if (bound->parsed()) {
      const stornet::Scenario s = load_or_die(scenario_path);
      std::cout << stornet::bound_report(s, use_markov).dump(2) << "\n";
      return 0;
    }
    if (simulate->parsed()) {
      const stornet::Scenario s = load_or_die(scenario_path);
      const stornet::ordered_json report =
          stornet::run_simulate(s, stornet::policy_from_string(policy_str), num_seeds, out_dir);
      std::cout << report.dump(2) << "\n";
      return 0;
    }
    if (compare->parsed()) {
      const stornet::Scenario s = load_or_die(scenario_path);
      const stornet::CompareResult result = stornet::run_compare(s);
      stornet::write_compare_outputs(result, out_dir);
      std::cout << "wrote " << out_dir << "/sweep.csv and " << out_dir << "/summary.json\n";
      return 0;
    }
    if (kmatrix->parsed()) {
      const stornet::Scenario s = load_or_die(scenario_path);
      std::cout << stornet::kmatrix_report(s).dump(2) << "\n";
      return 0;
    }
  } catch (const stornet::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
