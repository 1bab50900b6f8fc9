// cpm: generate | train | run | validate
//
// Exit codes: 0 success, 1 validation error (bad config, bad input data, or
// an event log that fails validation), 2 runtime error.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cpm/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "scenario JSON file (defaults apply when omitted)");
  cmd->add_option("-o,--out", c.out, "output directory (overrides output_dir)");
  cmd->add_option("-s,--seed", c.seed, "master seed (overrides seed)");
}

cpm::ScenarioConfig load(const Common& c) {
  cpm::ScenarioConfig cfg = c.config.empty() ? cpm::ScenarioConfig{} : cpm::load_scenario(c.config);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Congestion prediction and cell-split control loop on simulated O-RAN traffic"};
  app.require_subcommand(1);

  Common gen_opts, train_opts, run_opts;
  std::string dataset;
  std::string log_path;
  std::optional<int> epochs, max_factor, horizon;

  auto* gen = app.add_subcommand("generate", "write a synthetic (or re-exported) KPI dataset");
  add_common(gen, gen_opts);

  auto* train = app.add_subcommand("train", "train one forecaster per cell and report held-out accuracy");
  add_common(train, train_opts);
  train->add_option("-d,--dataset", dataset, "KPI CSV file")->required();
  train->add_option("--epochs", epochs, "override training.epochs");

  auto* run = app.add_subcommand("run", "execute the control loop and emit logs, histograms and a summary");
  add_common(run, run_opts);
  run->add_option("--epochs", epochs, "override training.epochs");
  run->add_option("--max-factor", max_factor, "override loop.max_split_factor (2, 4 or 8)");
  run->add_option("--horizon", horizon, "override loop.horizon_hours");

  auto* val = app.add_subcommand("validate", "check an event log against the loop choreography");
  val->add_option("log", log_path, "events.jsonl")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      const auto r = cpm::cmd_generate(load(gen_opts));
      std::cout << "wrote " << r.dataset.string() << " (" << r.cells << " cells, " << r.hours << " hours)\n";
    } else if (*train) {
      auto cfg = load(train_opts);
      if (epochs) cfg.training.epochs = *epochs;
      const auto r = cpm::cmd_train(cfg, dataset);
      std::cout << "trained " << r.cells.size() << " cells, mean held-out accuracy " << r.mean_accuracy << "%\n";
      for (const auto& f : r.failures) std::cerr << "skipped " << f << '\n';
    } else if (*run) {
      auto cfg = load(run_opts);
      if (epochs) cfg.training.epochs = *epochs;
      if (max_factor) cfg.loop.max_split_factor = *max_factor;
      if (horizon) cfg.loop.horizon_hours = *horizon;
      const auto r = cpm::cmd_run(cfg);
      const auto& m = r.metrics;
      std::cout << "cycles " << m.cycles << ", splits " << m.splits << ", congested hours " << m.congested_hours_before
                << " -> " << m.congested_hours_after << ", sub-1 Mbps hours " << m.sub1_hours_before << " -> "
                << m.sub1_hours_after << "\n";
    } else if (*val) {
      const auto check = cpm::cmd_validate(log_path);
      if (!check.ok) {
        std::cout << "FAIL " << check.message << '\n';
        return 1;
      }
      std::cout << "PASS\n";
    }
  } catch (const cpm::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const cpm::IngestError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const cpm::ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const cpm::RangeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
