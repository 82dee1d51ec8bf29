#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nash_arena/harness.hpp"

namespace fs = std::filesystem;
using namespace nash_arena;

namespace {

nlohmann::json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in.good())
    throw std::runtime_error("cannot open config: " + path.string());
  nlohmann::json j;
  in >> j;
  return j;
}

int finish_run(const ExperimentSummary& summary) {
  std::cout << "summary: " << summary.summary_path.string() << "\n";
  std::cout << summary.rows.size() << " cell(s) completed, "
            << summary.failures.size() << " failed\n";
  for (const CellFailure& f : summary.failures)
    std::cerr << "failed " << f.game_id << "/" << f.algorithm << ": "
              << f.message << "\n";
  return summary.failures.empty() ? 0 : 1;
}

std::vector<PlotSeries> collect_series(const fs::path& dir,
                                       const std::string& style) {
  std::vector<fs::path> traces;
  for (const auto& game : fs::directory_iterator(dir)) {
    if (!game.is_directory()) continue;
    for (const auto& cell : fs::directory_iterator(game.path())) {
      if (!cell.is_directory()) continue;
      const fs::path t = cell.path() / "trace.jsonl";
      if (fs::exists(t)) traces.push_back(t);
    }
  }
  std::sort(traces.begin(), traces.end());

  std::vector<PlotSeries> series;
  for (const fs::path& t : traces) {
    const Trace trace = read_trace_jsonl(t);
    PlotSeries s;
    s.label = t.parent_path().parent_path().filename().string() + "/" +
              t.parent_path().filename().string();
    for (const TraceRecord& r : trace.records) {
      if (style == "kl") {
        if (r.kl_to_star) s.points.push_back({double(r.step), *r.kl_to_star});
      } else {
        s.points.push_back({double(r.step), r.gap_last});
      }
    }
    if (!s.points.empty()) series.push_back(std::move(s));
  }
  if (series.empty())
    throw std::runtime_error("no usable traces under " + dir.string());
  return series;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nash-arena: preference-game equilibrium solver harness"};
  app.require_subcommand(1);

  int n = 10, m = 1;
  unsigned long long seed = 0;
  std::string out, config, dir, style = "gap";
  long samples = 2000;
  unsigned long long report_seed = 0;

  CLI::App* sample = app.add_subcommand("sample", "sample a game matrix");
  sample->add_option("--n", n, "number of actions")->required();
  sample->add_option("--m", m, "planted equilibrium support size")->required();
  sample->add_option("--seed", seed, "sampler seed")->required();
  sample->add_option("--out", out, "output JSON path")->required();

  CLI::App* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("--config", config, "experiment JSON config")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "run a sweep config");
  sweep->add_option("--config", config, "sweep JSON config")->required();

  CLI::App* report =
      app.add_subcommand("report", "recompute instance constants");
  report->add_option("--dir", dir, "experiment output directory")->required();
  report->add_option("--samples", samples, "Monte-Carlo samples");
  report->add_option("--seed", report_seed, "estimator seed");

  CLI::App* plot = app.add_subcommand("plot", "render traces to SVG");
  plot->add_option("--dir", dir, "experiment output directory")->required();
  plot->add_option("--style", style, "ordinate: gap or kl")
      ->check(CLI::IsMember({"gap", "kl"}));
  plot->add_option("--out", out, "output SVG path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sample->parsed()) {
      const GameInstance gi = sample_preference_matrix(n, m, seed);
      save_game(gi, out);
      std::cout << "wrote " << out << "\n";
      return 0;
    }
    if (run->parsed())
      return finish_run(run_experiment(parse_experiment_config(
          load_json(config))));
    if (sweep->parsed())
      return finish_run(
          run_experiment(parse_sweep_config(load_json(config))));
    if (report->parsed()) {
      std::cout << report_constants(dir, samples, report_seed).dump(2) << "\n";
      return 0;
    }
    if (plot->parsed()) {
      render_plot(collect_series(dir, style), style, out);
      std::cout << "wrote " << out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
