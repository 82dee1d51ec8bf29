#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nash_arena/equilibrium.hpp"
#include "nash_arena/game.hpp"
#include "nash_arena/neural.hpp"
#include "nash_arena/policy.hpp"
#include "nash_arena/potentials.hpp"
#include "nash_arena/solvers.hpp"
#include "nash_arena/trace.hpp"

namespace nash_arena {

// Shortest round-trip decimal representation; keeps outputs byte-stable.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct GameSpec {
  enum class Kind { kBuiltinRps, kSample, kFile };
  Kind kind = Kind::kBuiltinRps;
  int n = 0;
  int m = 0;
  std::uint64_t seed = 0;
  std::string path;
  std::string id;
};

struct AlgorithmCell {
  std::string label;
  SolverConfig cfg;
};

struct ExperimentConfig {
  std::vector<GameSpec> games;
  std::vector<AlgorithmCell> algorithms;
  std::string output_dir = "out";
  bool diagnostics = true;
  bool plots = false;
  std::string plot_style = "gap";
  bool wall_time = true;
  int threads = 0;  // 0: NASH_ARENA_THREADS, else hardware concurrency
  long constants_samples = 2000;
  std::uint64_t constants_seed = 0;
  std::optional<Eigen::VectorXd> init_policy;
  std::string policy_kind = "tabular";  // "tabular" | "neural"
  long checkpoint_period = 0;           // neural weight dumps every N steps
};

namespace detail {

inline std::string sample_game_id(int n, int m, std::uint64_t seed) {
  return "n" + std::to_string(n) + "_m" + std::to_string(m) + "_seed" +
         std::to_string(seed);
}

inline void apply_solver_overrides(SolverConfig& cfg, const nlohmann::json& j) {
  if (j.contains("eta")) cfg.eta = j.at("eta").get<double>();
  if (j.contains("beta")) cfg.beta = j.at("beta").get<double>();
  if (j.contains("inner_lr")) cfg.inner_lr = j.at("inner_lr").get<double>();
  if (j.contains("inner_max_steps"))
    cfg.inner_max_steps = j.at("inner_max_steps").get<int>();
  if (j.contains("inner_tol")) cfg.inner_tol = j.at("inner_tol").get<double>();
  if (j.contains("total_steps"))
    cfg.total_steps = j.at("total_steps").get<long>();
  if (j.contains("ref_refresh_period"))
    cfg.ref_refresh_period = j.at("ref_refresh_period").get<long>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("theory_mode"))
    cfg.theory_mode = j.at("theory_mode").get<bool>();
}

inline GameSpec parse_game_spec(const nlohmann::json& j) {
  GameSpec spec;
  if (j.contains("builtin")) {
    const std::string name = j.at("builtin").get<std::string>();
    if (name != "rps")
      throw std::invalid_argument("unknown builtin game: " + name);
    spec.kind = GameSpec::Kind::kBuiltinRps;
    spec.id = "rps";
  } else if (j.contains("file")) {
    spec.kind = GameSpec::Kind::kFile;
    spec.path = j.at("file").get<std::string>();
    spec.id = std::filesystem::path(spec.path).stem().string();
  } else if (j.contains("n")) {
    spec.kind = GameSpec::Kind::kSample;
    spec.n = j.at("n").get<int>();
    spec.m = j.at("m").get<int>();
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.id = sample_game_id(spec.n, spec.m, spec.seed);
  } else {
    throw std::invalid_argument(
        "game spec needs one of: builtin, file, or n/m/seed");
  }
  if (j.contains("id")) spec.id = j.at("id").get<std::string>();
  if (spec.id.empty() ||
      spec.id.find_first_of("/\\") != std::string::npos)
    throw std::invalid_argument("invalid game id: " + spec.id);
  return spec;
}

inline std::vector<AlgorithmCell> expand_algorithm(const nlohmann::json& j,
                                                   const std::string& policy_kind,
                                                   long default_total_steps,
                                                   std::uint64_t default_seed) {
  const Algorithm alg = parse_algorithm(j.at("algorithm").get<std::string>());
  SolverConfig base = policy_kind == "neural" ? neural_default_config(alg)
                                              : default_config(alg);
  base.total_steps = default_total_steps;
  base.seed = default_seed;
  apply_solver_overrides(base, j);
  const std::string base_label = j.value("label", to_string(alg));

  std::vector<double> etas{base.eta};
  std::vector<double> inner_lrs{base.inner_lr};
  const bool eta_gridded = j.contains("eta_grid");
  const bool lr_gridded = j.contains("inner_lr_grid");
  if (eta_gridded) etas = j.at("eta_grid").get<std::vector<double>>();
  if (lr_gridded) inner_lrs = j.at("inner_lr_grid").get<std::vector<double>>();
  if (etas.empty() || inner_lrs.empty())
    throw std::invalid_argument("empty hyperparameter grid for " + base_label);

  std::vector<AlgorithmCell> cells;
  for (const double eta : etas)
    for (const double lr : inner_lrs) {
      AlgorithmCell cell;
      cell.cfg = base;
      cell.cfg.eta = eta;
      cell.cfg.inner_lr = lr;
      cell.label = base_label;
      if (eta_gridded) cell.label += "_eta" + format_double(eta);
      if (lr_gridded) cell.label += "_ilr" + format_double(lr);
      cells.push_back(std::move(cell));
    }
  return cells;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.output_dir = j.value("output_dir", std::string("out"));
  cfg.diagnostics = j.value("diagnostics", true);
  cfg.plots = j.value("plots", false);
  cfg.plot_style = j.value("plot_style", std::string("gap"));
  cfg.wall_time = j.value("wall_time", true);
  cfg.threads = j.value("threads", 0);
  cfg.constants_samples = j.value("constants_samples", 2000L);
  cfg.constants_seed = j.value("constants_seed", std::uint64_t{0});
  cfg.policy_kind = j.value("policy", std::string("tabular"));
  cfg.checkpoint_period = j.value("checkpoint_period", 0L);
  if (cfg.policy_kind != "tabular" && cfg.policy_kind != "neural")
    throw std::invalid_argument("policy must be tabular or neural");
  if (cfg.plot_style != "gap" && cfg.plot_style != "kl")
    throw std::invalid_argument("plot_style must be gap or kl");

  if (!j.contains("games") || !j.at("games").is_array() ||
      j.at("games").empty())
    throw std::invalid_argument("config needs a non-empty games array");
  for (const auto& g : j.at("games"))
    cfg.games.push_back(detail::parse_game_spec(g));

  const long default_total_steps = j.value("total_steps", 1000L);
  const std::uint64_t default_seed = j.value("seed", std::uint64_t{0});
  if (!j.contains("algorithms") || !j.at("algorithms").is_array() ||
      j.at("algorithms").empty())
    throw std::invalid_argument("config needs a non-empty algorithms array");
  for (const auto& a : j.at("algorithms")) {
    auto cells = detail::expand_algorithm(a, cfg.policy_kind,
                                          default_total_steps, default_seed);
    cfg.algorithms.insert(cfg.algorithms.end(), cells.begin(), cells.end());
  }

  for (const auto& cell : cfg.algorithms)
    if (cell.cfg.total_steps <= 0)
      throw std::invalid_argument("total_steps must be positive");
  for (std::size_t i = 0; i < cfg.algorithms.size(); ++i)
    for (std::size_t k = i + 1; k < cfg.algorithms.size(); ++k)
      if (cfg.algorithms[i].label == cfg.algorithms[k].label)
        throw std::invalid_argument("duplicate algorithm label: " +
                                    cfg.algorithms[i].label);

  if (j.contains("init_policy")) {
    if (cfg.policy_kind != "tabular")
      throw std::invalid_argument("init_policy requires tabular policies");
    const auto probs = j.at("init_policy").get<std::vector<double>>();
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(
        probs.data(), static_cast<long>(probs.size()));
    if (!is_valid_policy(Policy{v}))
      throw std::invalid_argument("init_policy is not a distribution");
    cfg.init_policy = v;
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open config " + path.string());
  nlohmann::json j;
  in >> j;
  return parse_experiment_config(j);
}

// Sweep schema: {"n": 10, "m": [1,2,3,4], "seeds": [0,1,...], ...} expands
// the cartesian product into sampled game specs; all other keys are passed
// through to the experiment schema.
inline ExperimentConfig parse_sweep_config(const nlohmann::json& j) {
  nlohmann::json expanded = j;
  if (!j.contains("games")) {
    if (!j.contains("n") || !j.contains("m") || !j.contains("seeds"))
      throw std::invalid_argument("sweep config needs n, m, and seeds");
    const int n = j.at("n").get<int>();
    std::vector<int> ms;
    if (j.at("m").is_array()) ms = j.at("m").get<std::vector<int>>();
    else ms.push_back(j.at("m").get<int>());
    const auto seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    nlohmann::json games = nlohmann::json::array();
    for (const std::uint64_t seed : seeds)
      for (const int m : ms)
        games.push_back({{"n", n}, {"m", m}, {"seed", seed}});
    expanded["games"] = games;
    expanded.erase("n");
    expanded.erase("m");
    expanded.erase("seeds");
  }
  return parse_experiment_config(expanded);
}

struct SummaryRow {
  std::string game_id;
  std::string algorithm;
  double eta = 0.0;
  double beta = 0.0;
  long steps = 0;
  std::optional<double> gap_last, gap_avg, kl_last;
  std::optional<double> epsilon, L, lambda_min, c_p_estimate;
  std::optional<long> burn_in_step;
  std::optional<double> linear_rate, fit_r2;
  double wall_s = 0.0;
};

inline void write_summary(const std::vector<SummaryRow>& rows,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("write_summary: cannot open " + path.string());
  out << "game_id,algorithm,eta,beta,steps,gap_last,gap_avg,kl_last,epsilon,"
         "L,lambda_min,c_p_estimate,burn_in_step,linear_rate,fit_r2,wall_s\n";
  auto cell = [](const std::optional<double>& v) {
    return v && std::isfinite(*v) ? format_double(*v) : std::string();
  };
  for (const SummaryRow& r : rows) {
    out << r.game_id << ',' << r.algorithm << ',' << format_double(r.eta) << ','
        << format_double(r.beta) << ',' << r.steps << ',' << cell(r.gap_last)
        << ',' << cell(r.gap_avg) << ',' << cell(r.kl_last) << ','
        << cell(r.epsilon) << ',' << cell(r.L) << ',' << cell(r.lambda_min)
        << ',' << cell(r.c_p_estimate) << ','
        << (r.burn_in_step ? std::to_string(*r.burn_in_step) : std::string())
        << ',' << cell(r.linear_rate) << ',' << cell(r.fit_r2) << ','
        << format_double(r.wall_s) << '\n';
  }
}

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (step, value)
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

}  // namespace detail

// Static SVG line chart, log-scale ordinate, values clipped below 1e-6.
inline void render_plot(const std::vector<PlotSeries>& series,
                        const std::string& style,
                        const std::filesystem::path& out_path) {
  if (series.empty())
    throw std::invalid_argument("render_plot: no series to plot");
  if (style != "gap" && style != "kl")
    throw std::invalid_argument("render_plot: style must be gap or kl");
  constexpr double kClip = 1e-6;
  constexpr double kWidth = 860, kHeight = 520;
  constexpr double kLeft = 70, kRight = 660, kTop = 40, kBottom = 470;

  double x_max = 1.0;
  double log_max = -5.0;
  for (const PlotSeries& s : series)
    for (const auto& [x, y] : s.points) {
      x_max = std::max(x_max, x);
      log_max = std::max(log_max, std::log10(std::max(y, kClip)));
    }
  const double log_min = std::log10(kClip);
  log_max = std::ceil(log_max);
  if (log_max <= log_min) log_max = log_min + 1.0;

  auto sx = [&](double x) {
    return kLeft + (kRight - kLeft) * (x / x_max);
  };
  auto sy = [&](double y) {
    const double ly = std::log10(std::max(y, kClip));
    return kBottom - (kBottom - kTop) * (ly - log_min) / (log_max - log_min);
  };

  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n";
  svg << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";
  const std::string y_label =
      style == "gap" ? "duality gap" : "KL to equilibrium";
  svg << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"14\">iteration</text>\n";
  svg << "<text x=\"18\" y=\"" << (kTop + kBottom) / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 "
      << (kTop + kBottom) / 2 << ")\">" << y_label << "</text>\n";

  const int decades = static_cast<int>(log_max - log_min);
  const int decade_step = decades > 8 ? (decades + 7) / 8 : 1;
  for (int d = 0; d <= decades; d += decade_step) {
    const double ly = log_min + d;
    const double y = sy(std::pow(10.0, ly));
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kRight
        << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-size=\"12\">1e" << ly << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double x = x_max * i / 5.0;
    svg << "<line x1=\"" << sx(x) << "\" y1=\"" << kBottom << "\" x2=\""
        << sx(x) << "\" y2=\"" << kBottom + 5 << "\" stroke=\"#333333\"/>\n";
    svg << "<text x=\"" << sx(x) << "\" y=\"" << kBottom + 20
        << "\" text-anchor=\"middle\" font-size=\"12\">"
        << static_cast<long>(std::llround(x)) << "</text>\n";
  }
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
      << "\" y2=\"" << kBottom << "\" stroke=\"#333333\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\""
      << kRight << "\" y2=\"" << kBottom << "\" stroke=\"#333333\"/>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const PlotSeries& s = series[i];
    const char* color = kPalette[i % 8];
    if (!s.points.empty()) {
      const std::size_t stride =
          std::max<std::size_t>(1, s.points.size() / 2000);
      svg << "<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t p = 0; p < s.points.size(); p += stride)
        svg << format_double(sx(s.points[p].first)) << ","
            << format_double(sy(s.points[p].second)) << " ";
      const auto& last = s.points.back();
      svg << format_double(sx(last.first)) << ","
          << format_double(sy(last.second));
      svg << "\"/>\n";
    }
    const double ly = kTop + 18.0 * static_cast<double>(i);
    svg << "<line x1=\"" << kRight + 14 << "\" y1=\"" << ly << "\" x2=\""
        << kRight + 44 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\" class=\"legend\"/>\n";
    svg << "<text x=\"" << kRight + 50 << "\" y=\"" << ly + 4
        << "\" font-size=\"12\">" << detail::xml_escape(s.label)
        << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(out_path);
  if (!out)
    throw std::runtime_error("render_plot: cannot open " + out_path.string());
  out << svg.str();
}

struct CellFailure {
  std::string game_id;
  std::string algorithm;
  std::string message;
};

struct ExperimentSummary {
  std::vector<SummaryRow> rows;
  std::vector<CellFailure> failures;
  std::filesystem::path summary_path;
};

inline int resolve_threads(int configured) {
  if (const char* env = std::getenv("NASH_ARENA_THREADS")) {
    const std::string s(env);
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec == std::errc{} && v > 0) return v;
  }
  if (configured > 0) return configured;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

inline GameInstance realize_game(const GameSpec& spec) {
  switch (spec.kind) {
    case GameSpec::Kind::kBuiltinRps: {
      GameInstance gi;
      gi.matrix = rps_matrix();
      gi.n = 3;
      gi.m = 1;
      gi.seed = 0;
      return gi;
    }
    case GameSpec::Kind::kSample:
      return sample_preference_matrix(spec.n, spec.m, spec.seed);
    case GameSpec::Kind::kFile:
      return load_game(spec.path);
  }
  throw std::logic_error("realize_game: unhandled kind");
}

// Executes every (game, algorithm) cell in a work pool, writing
// <outdir>/<game_id>/<label>/trace.jsonl plus per-game game.json and
// constants.json, a root summary.csv, and optional per-game SVG plots.
// A cell that throws is recorded as a failure; the remaining cells still run.
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path out_root(cfg.output_dir);
  fs::create_directories(out_root);

  struct GamePrep {
    GameSpec spec;
    GameInstance instance;
    std::optional<ConstantsReport> constants;
  };
  std::vector<GamePrep> games;
  for (const GameSpec& spec : cfg.games) {
    GamePrep prep;
    prep.spec = spec;
    prep.instance = realize_game(spec);
    const fs::path game_dir = out_root / spec.id;
    fs::create_directories(game_dir);
    save_game(prep.instance, game_dir / "game.json");
    if (cfg.diagnostics) {
      try {
        const NashSet ns = interior_ne(prep.instance.matrix);
        const Policy start =
            cfg.init_policy ? Policy{*cfg.init_policy}
                            : uniform_policy(prep.instance.matrix.n());
        const Policy pi_star =
            kl_project(prep.instance.matrix, ns, start, 1e-10);
        prep.constants =
            instance_constants(prep.instance.matrix, pi_star,
                               cfg.constants_samples, cfg.constants_seed);
        std::ofstream cj(game_dir / "constants.json");
        cj << constants_to_json(*prep.constants).dump(2) << "\n";
      } catch (const AssumptionViolated&) {
        // No full-support equilibrium: cells still run, diagnostics degrade.
      }
    }
    games.push_back(std::move(prep));
  }

  struct Cell {
    std::size_t game_index;
    std::size_t alg_index;
  };
  std::vector<Cell> cells;
  for (std::size_t g = 0; g < games.size(); ++g)
    for (std::size_t a = 0; a < cfg.algorithms.size(); ++a)
      cells.push_back(Cell{g, a});

  struct CellResult {
    SummaryRow row;
    std::optional<Trace> trace;  // kept only when plotting
    bool failed = false;
    std::string error;
  };
  std::vector<CellResult> results(cells.size());

  auto run_cell = [&](std::size_t index) {
    const Cell& cell = cells[index];
    const GamePrep& game = games[cell.game_index];
    const AlgorithmCell& alg = cfg.algorithms[cell.alg_index];
    CellResult& result = results[index];
    result.row.game_id = game.spec.id;
    result.row.algorithm = alg.label;
    result.row.eta = alg.cfg.eta;
    result.row.beta = alg.cfg.beta;
    result.row.steps = alg.cfg.total_steps;
    try {
      const fs::path cell_dir = out_root / game.spec.id / alg.label;
      fs::create_directories(cell_dir);
      Trace trace;
      if (cfg.policy_kind == "neural") {
        NeuralCheckpointFn checkpoint;
        if (cfg.checkpoint_period > 0)
          checkpoint = [&](long step, const NeuralSolverState& state) {
            std::ofstream out(cell_dir /
                              ("checkpoint_" + std::to_string(step) + ".json"));
            nlohmann::json j = mlp_to_json(state.main);
            j["step"] = step;
            out << j.dump() << "\n";
          };
        trace = run_neural_solver(game.instance, alg.cfg, cfg.diagnostics,
                                  cfg.checkpoint_period, checkpoint);
      } else {
        std::optional<Policy> init;
        if (cfg.init_policy) init = Policy{*cfg.init_policy};
        trace = run_solver(game.instance, alg.cfg, cfg.diagnostics, init);
      }
      write_trace_jsonl(trace, cell_dir / "trace.jsonl", cfg.wall_time);

      if (!trace.records.empty()) {
        const TraceRecord& last = trace.records.back();
        result.row.gap_last = last.gap_last;
        result.row.gap_avg = last.gap_avg;
        if (last.kl_to_star) result.row.kl_last = last.kl_to_star;
        double wall = 0.0;
        if (cfg.wall_time)
          for (const TraceRecord& r : trace.records)
            wall += static_cast<double>(r.wall_ns) * 1e-9;
        result.row.wall_s = wall;
      }
      if (game.constants) {
        result.row.epsilon = game.constants->epsilon;
        result.row.L = game.constants->L;
        result.row.lambda_min = game.constants->lambda_min;
        result.row.c_p_estimate = game.constants->c_p_estimate;
        if (!trace.diagnostics_degraded && !trace.records.empty() &&
            trace.records.front().theta_pot) {
          const PhaseReport phase =
              analyze_trace(trace, game.constants->epsilon);
          result.row.burn_in_step = phase.burn_in_step;
          result.row.linear_rate = phase.linear_rate;
          result.row.fit_r2 = phase.fit_r2;
        }
      }
      if (cfg.plots) result.trace = std::move(trace);
    } catch (const std::exception& e) {
      result.failed = true;
      result.error = e.what();
    }
  };

  const int threads =
      std::min<int>(resolve_threads(cfg.threads),
                    static_cast<int>(std::max<std::size_t>(cells.size(), 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= cells.size()) return;
          run_cell(i);
        }
      });
    for (std::thread& th : pool) th.join();
  }

  ExperimentSummary summary;
  std::vector<std::size_t> order(results.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto key_a = std::tie(results[a].row.game_id, results[a].row.algorithm);
    const auto key_b = std::tie(results[b].row.game_id, results[b].row.algorithm);
    return key_a < key_b;
  });
  for (const std::size_t i : order) {
    if (results[i].failed)
      summary.failures.push_back(CellFailure{results[i].row.game_id,
                                             results[i].row.algorithm,
                                             results[i].error});
    else
      summary.rows.push_back(results[i].row);
  }
  summary.summary_path = out_root / "summary.csv";
  write_summary(summary.rows, summary.summary_path);

  if (cfg.plots) {
    for (std::size_t g = 0; g < games.size(); ++g) {
      std::vector<PlotSeries> series;
      for (const std::size_t i : order) {
        if (cells[i].game_index != g || !results[i].trace) continue;
        PlotSeries s;
        s.label = results[i].row.algorithm;
        for (const TraceRecord& r : results[i].trace->records) {
          double v = cfg.plot_style == "kl" ? r.kl_to_star.value_or(
                                                  std::numeric_limits<double>::quiet_NaN())
                                            : r.gap_last;
          if (!std::isfinite(v)) continue;
          s.points.emplace_back(static_cast<double>(r.step), v);
        }
        if (!s.points.empty()) series.push_back(std::move(s));
      }
      if (!series.empty())
        render_plot(series, cfg.plot_style,
                    out_root / games[g].spec.id /
                        ("plot_" + cfg.plot_style + ".svg"));
    }
  }
  return summary;
}

// Recomputes a ConstantsReport for every <dir>/<game_id>/game.json, writing
// constants.json next to each and returning one JSON object per game.
inline nlohmann::json report_constants(const std::filesystem::path& dir,
                                       long samples, std::uint64_t seed) {
  namespace fs = std::filesystem;
  nlohmann::json out = nlohmann::json::array();
  std::vector<fs::path> game_files;
  if (!fs::is_directory(dir))
    throw std::runtime_error("report_constants: not a directory: " +
                             dir.string());
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    const fs::path gf = entry.path() / "game.json";
    if (fs::exists(gf)) game_files.push_back(gf);
  }
  std::sort(game_files.begin(), game_files.end());
  for (const fs::path& gf : game_files) {
    const GameInstance gi = load_game(gf);
    nlohmann::json entry;
    entry["game_id"] = gf.parent_path().filename().string();
    try {
      const NashSet ns = interior_ne(gi.matrix);
      const Policy pi_star =
          kl_project(gi.matrix, ns, uniform_policy(gi.matrix.n()), 1e-10);
      const ConstantsReport report =
          instance_constants(gi.matrix, pi_star, samples, seed);
      entry["constants"] = constants_to_json(report);
      std::ofstream cj(gf.parent_path() / "constants.json");
      cj << constants_to_json(report).dump(2) << "\n";
    } catch (const AssumptionViolated& e) {
      entry["error"] = e.what();
    }
    out.push_back(entry);
  }
  return out;
}

}  // namespace nash_arena
