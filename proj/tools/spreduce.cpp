// Copyright (c) spreduce contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: load or generate a model, reduce it by greedy
// state elimination and/or Stiefel-manifold H2 optimization, sweep the
// reduced order, and cross-validate H2 errors against time-domain estimates.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <spreduce/spreduce.hpp>

namespace fs = std::filesystem;

namespace {

using spreduce::Index;

/// Input errors (bad flags, malformed or invalid files) exit with 1;
/// mathematically infeasible requests (singular fast block, unstable
/// candidate, unreachable order) exit with 2. Validate deviations exit 3.
constexpr int kExitInput = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitDeviation = 3;

int classify(const spreduce::Error& e) {
  if (dynamic_cast<const spreduce::ParseError*>(&e) ||
      dynamic_cast<const spreduce::DimensionMismatch*>(&e) ||
      dynamic_cast<const spreduce::InvalidArgument*>(&e) ||
      dynamic_cast<const spreduce::IndexOutOfRange*>(&e) ||
      dynamic_cast<const spreduce::DuplicateIndex*>(&e) ||
      dynamic_cast<const spreduce::NotStable*>(&e) ||
      dynamic_cast<const spreduce::ToleranceViolation*>(&e)) {
    return kExitInput;
  }
  return kExitInfeasible;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct CommonFlags {
  std::string model_path;
  std::string model_format = "json";
  std::string preset;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  Index budget = 500;
  int threads = 0;
  bool no_timing = false;
};

void add_input_flags(CLI::App* cmd, CommonFlags* f) {
  auto* model = cmd->add_option("--model", f->model_path,
                                "Model to load (JSON file or Matrix Market directory)");
  auto* gen = cmd->add_option("--generate", f->preset,
                              "Generate a synthetic model instead of loading one")
                  ->check(CLI::IsMember({"small", "paper-like"}));
  model->excludes(gen);
  gen->excludes(model);
  cmd->add_option("--format", f->model_format, "Input model format")
      ->check(CLI::IsMember({"json", "matrix-market"}))
      ->capture_default_str();
  cmd->add_option("--seed", f->seed, "Seed for generation and optimizer cold starts")
      ->capture_default_str();
  cmd->add_option("--out", f->out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--threads", f->threads,
                  "Worker threads (0 = hardware; SPREDUCE_THREADS caps either way)")
      ->capture_default_str();
}

spreduce::ModelFormat parse_format(const std::string& s) {
  return s == "json" ? spreduce::ModelFormat::kJson : spreduce::ModelFormat::kMatrixMarket;
}

spreduce::StateSpaceModel acquire_model(const CommonFlags& f) {
  if (!f.preset.empty()) {
    const spreduce::GeneratorConfig cfg = (f.preset == "small")
                                              ? spreduce::small_config(f.seed)
                                              : spreduce::paper_like_config(f.seed);
    return spreduce::generate(cfg);
  }
  if (f.model_path.empty()) {
    throw spreduce::InvalidArgument("provide exactly one of --model or --generate");
  }
  return spreduce::load_model(f.model_path, parse_format(f.model_format));
}

nlohmann::json model_source_json(const CommonFlags& f, const spreduce::StateSpaceModel& m) {
  nlohmann::json j{{"n", m.n()}, {"m", m.m()}, {"p", m.p()}};
  if (!f.preset.empty()) {
    j["preset"] = f.preset;
    j["seed"] = f.seed;
  } else {
    j["path"] = f.model_path;
  }
  return j;
}

nlohmann::json trace_to_json(const spreduce::GreedyTrace& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.steps) {
    steps.push_back({{"eliminated_index", s.eliminated_index},
                     {"h2_error_after", s.h2_error_after},
                     {"candidates_evaluated", s.candidates_evaluated},
                     {"candidates_unstable", s.candidates_unstable}});
  }
  return nlohmann::json{{"n", t.n},
                        {"termination", spreduce::to_string(t.termination)},
                        {"final_order", t.final_order()},
                        {"eliminated_indices", t.eliminated_indices()},
                        {"steps", std::move(steps)}};
}

nlohmann::json optimizer_to_json(const spreduce::OptimizationReport& r, bool warm) {
  return nlohmann::json{{"initial_objective", r.initial_objective},
                        {"final_objective", r.final_objective},
                        {"iterations", r.iterations},
                        {"converged", r.converged},
                        {"warm_started", warm},
                        {"objective_history", r.objective_history}};
}

std::string optimizer_termination(const spreduce::OptimizationReport& r, Index budget) {
  if (r.converged) return "converged";
  if (r.iterations >= budget) return "budget_exhausted";
  return "stalled";
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  spreduce::detail::write_text_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// reduce
// ---------------------------------------------------------------------------

int run_reduce(const CommonFlags& f, const std::string& method, Index order) {
  const spreduce::StateSpaceModel model = acquire_model(f);
  const bool want_greedy = method == "greedy" || method == "both";
  const bool want_stiefel = method == "stiefel" || method == "both";

  if (order > model.n() || (want_greedy && order >= model.n())) {
    std::cerr << "error: --order " << order << " is out of range for a model of order "
              << model.n() << "\n";
    return kExitInput;
  }

  fs::create_directories(f.out_dir);
  const fs::path out(f.out_dir);
  if (!f.preset.empty()) spreduce::save_model(model, out / "model.json");

  nlohmann::json report;
  report["model"] = model_source_json(f, model);
  report["order"] = order;

  int exit_code = 0;

  // A greedy pass is also attempted for --method stiefel, purely to warm-start;
  // a failure there falls back to a cold start rather than failing the run.
  std::optional<spreduce::GreedyTrace> trace;
  double greedy_seconds = 0.0;
  std::string greedy_failure;
  if (order < model.n()) {
    const Stopwatch sw;
    try {
      trace = spreduce::greedy_reduce(model, order, spreduce::GreedyOptions{f.threads});
    } catch (const spreduce::Error& e) {
      greedy_failure = e.what();
    }
    greedy_seconds = sw.seconds();
  }

  if (want_greedy) {
    if (trace && trace->final_order() == order) {
      const spreduce::ReducedModel red = spreduce::reduce(model, *trace->final_projection);
      spreduce::save_reduced(red, out / "reduced_greedy.json");
      const double h2 = trace->steps.back().h2_error_after;
      nlohmann::json g = trace_to_json(*trace);
      g["h2_error"] = h2;
      if (!f.no_timing) g["wall_time_s"] = greedy_seconds;
      report["greedy"] = std::move(g);
      std::cout << "greedy: reached order " << order << ", h2_error = " << fmt_short(h2)
                << "\n";
    } else if (trace) {
      nlohmann::json g = trace_to_json(*trace);
      if (!f.no_timing) g["wall_time_s"] = greedy_seconds;
      report["greedy"] = std::move(g);
      std::cout << "greedy: stopped at order " << trace->final_order() << " ("
                << spreduce::to_string(trace->termination) << ")\n";
      exit_code = kExitInfeasible;
    } else {
      report["greedy"] = nlohmann::json{{"failed", greedy_failure}};
      std::cout << "greedy: failed (" << greedy_failure << ")\n";
      exit_code = kExitInfeasible;
    }
  }

  if (want_stiefel) {
    if (order < model.p()) {
      report["stiefel"] = nlohmann::json{
          {"failed", "order is below the output count; the fixed block alone needs p rows"}};
      std::cout << "stiefel: infeasible, order " << order << " < p = " << model.p() << "\n";
      exit_code = kExitInfeasible;
    } else {
      const Stopwatch sw;
      const spreduce::TransformedModel tm = spreduce::stabilizing_transform(model);
      spreduce::OptimizeOptions sopts;
      sopts.budget = f.budget;
      const spreduce::StiefelReduction sr = spreduce::stiefel_reduce(
          tm, order, trace ? &*trace : nullptr, f.seed, sopts);
      const double wall = sw.seconds();
      const double h2 = spreduce::h2_error(model, sr.reduced);
      spreduce::save_reduced(sr.reduced, out / "reduced_stiefel.json");
      nlohmann::json s = optimizer_to_json(sr.report, sr.warm_started);
      s["h2_error"] = h2;
      s["termination"] = optimizer_termination(sr.report, f.budget);
      if (!f.no_timing) s["wall_time_s"] = wall;
      report["stiefel"] = std::move(s);
      std::cout << "stiefel: " << optimizer_termination(sr.report, f.budget) << " after "
                << sr.report.iterations << " iterations, h2_error = " << fmt_short(h2)
                << (sr.warm_started ? " (warm start)" : " (cold start)") << "\n";
    }
  }

  write_json_file(out / "report.json", report);
  std::cout << "wrote " << (out / "report.json").string() << "\n";
  return exit_code;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

Index parse_order_token(const std::string& tok) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(tok, &pos);
  } catch (const std::exception&) {
    throw spreduce::InvalidArgument("--orders: cannot parse '" + tok + "'");
  }
  if (pos != tok.size() || v < 1) {
    throw spreduce::InvalidArgument("--orders: cannot parse '" + tok + "'");
  }
  return static_cast<Index>(v);
}

/// Accepts comma-separated entries, each a single order "R", a range "A..B",
/// or a stepped range "A..B:S".
std::vector<Index> parse_orders(const std::string& expr, Index n) {
  std::vector<Index> out;
  std::istringstream in(expr);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    const std::size_t dots = tok.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_order_token(tok));
      continue;
    }
    const std::string from = tok.substr(0, dots);
    std::string rest = tok.substr(dots + 2);
    Index step = 1;
    const std::size_t colon = rest.find(':');
    if (colon != std::string::npos) {
      step = parse_order_token(rest.substr(colon + 1));
      rest = rest.substr(0, colon);
    }
    const Index a = parse_order_token(from);
    const Index b = parse_order_token(rest);
    if (b < a) {
      throw spreduce::InvalidArgument("--orders: descending range '" + tok + "'");
    }
    for (Index r = a; r <= b; r += step) out.push_back(r);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw spreduce::InvalidArgument("--orders: empty list");
  if (out.front() < 1 || out.back() > n) {
    throw spreduce::InvalidArgument("--orders: entries must lie in [1, n]");
  }
  return out;
}

struct SweepRow {
  Index r = 0;
  std::string method;
  std::optional<double> h2;
  std::optional<Index> iterations;
  std::optional<double> wall;
  std::string termination;
};

void write_sweep_csv(const fs::path& path, std::vector<SweepRow> rows, bool no_timing) {
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return a.r != b.r ? a.r < b.r : a.method < b.method;
  });
  std::ostringstream out;
  out << "# spreduce sweep CSV, schema v1\n";
  out << "r,method,h2_error,iterations,wall_time_s,termination\n";
  for (const auto& row : rows) {
    out << row.r << "," << row.method << ",";
    if (row.h2) out << fmt_g17(*row.h2);
    out << ",";
    if (row.iterations) {
      out << *row.iterations;
    } else {
      out << "n/a";
    }
    out << ",";
    if (!no_timing && row.wall) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6f", *row.wall);
      out << buf;
    }
    out << "," << row.termination << "\n";
  }
  spreduce::detail::write_text_file(path, out.str());
}

int run_sweep(const CommonFlags& f, const std::string& method, const std::string& orders_expr) {
  const spreduce::StateSpaceModel model = acquire_model(f);
  const Index n = model.n();
  const std::vector<Index> orders = parse_orders(orders_expr, n);
  const bool want_greedy = method == "greedy" || method == "both";
  const bool want_stiefel = method == "stiefel" || method == "both";

  fs::create_directories(f.out_dir);
  const fs::path out(f.out_dir);
  if (!f.preset.empty()) spreduce::save_model(model, out / "model.json");

  // One deepest greedy pass serves every requested order (the elimination
  // sequence is nested), and doubles as the optimizer's warm-start source.
  std::optional<spreduce::GreedyTrace> trace;
  double greedy_seconds = 0.0;
  const Index deepest = orders.front();
  if (deepest < n) {
    const Stopwatch sw;
    try {
      trace = spreduce::greedy_reduce(model, deepest, spreduce::GreedyOptions{f.threads});
    } catch (const spreduce::Error&) {
      trace.reset();
    }
    greedy_seconds = sw.seconds();
  }

  std::vector<SweepRow> rows;
  if (want_greedy) {
    for (const Index r : orders) {
      SweepRow row{r, "greedy", {}, {}, {}, ""};
      if (r == n) {
        row.termination = "infeasible_order";
      } else if (trace && static_cast<Index>(trace->steps.size()) >= n - r) {
        row.h2 = trace->steps[static_cast<std::size_t>(n - r - 1)].h2_error_after;
        row.wall = greedy_seconds;  // shared single-pass cost
        row.termination = "reached_target_order";
      } else if (trace) {
        row.termination = spreduce::to_string(trace->termination);
      } else {
        row.termination = "failed";
      }
      rows.push_back(std::move(row));
    }
  }

  if (want_stiefel) {
    const spreduce::TransformedModel tm = spreduce::stabilizing_transform(model);
    spreduce::OptimizeOptions sopts;
    sopts.budget = f.budget;
    std::vector<SweepRow> srows(orders.size());
    const int workers = spreduce::detail::resolve_threads(f.threads);
    spreduce::detail::parallel_for(
        static_cast<Index>(orders.size()), workers, [&](Index i) {
          const Index r = orders[static_cast<std::size_t>(i)];
          SweepRow row{r, "stiefel", {}, {}, {}, ""};
          if (r < model.p()) {
            row.termination = "infeasible_order";
          } else {
            const Stopwatch sw;
            try {
              const spreduce::StiefelReduction sr = spreduce::stiefel_reduce(
                  tm, r, trace ? &*trace : nullptr,
                  f.seed + static_cast<std::uint64_t>(r), sopts);
              row.h2 = spreduce::h2_error(model, sr.reduced);
              row.iterations = sr.report.iterations;
              row.termination = optimizer_termination(sr.report, f.budget);
            } catch (const spreduce::Error&) {
              row.termination = "failed";
            }
            row.wall = sw.seconds();
          }
          srows[static_cast<std::size_t>(i)] = std::move(row);
        });
    rows.insert(rows.end(), std::make_move_iterator(srows.begin()),
                std::make_move_iterator(srows.end()));
  }

  write_sweep_csv(out / "sweep.csv", std::move(rows), f.no_timing);
  std::cout << "wrote " << (out / "sweep.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

int run_validate(const std::string& model_path, const std::string& format,
                 const std::string& reduced_path, std::uint64_t seed, double horizon,
                 double dt, double duration) {
  const spreduce::StateSpaceModel model =
      spreduce::load_model(model_path, parse_format(format));
  const spreduce::ReducedModel reduced = spreduce::load_reduced(reduced_path);

  const double lyap = spreduce::h2_error(model, reduced);

  const spreduce::ErrorSystem es = spreduce::build_error_system(model, reduced);
  const spreduce::ComplexVector eigs = spreduce::linalg::eigenvalues(es.Abar);
  const double alpha = spreduce::linalg::spectral_abscissa(eigs);
  const double rho = spreduce::linalg::spectral_radius(eigs);
  if (horizon <= 0.0) horizon = std::log(1e8) / -alpha;
  if (dt <= 0.0) dt = std::min(horizon / 2000.0, 0.05 / std::max(rho, 1e-3));
  if (duration <= 0.0) duration = std::min(400.0 / -alpha, dt * 2e6);

  const double imp = spreduce::impulse_response_error(model, reduced, horizon, dt);
  const double mc = spreduce::white_noise_error(model, reduced, seed, duration, dt);

  const double denom = std::max(lyap, 1e-12);
  const double dev_imp = std::abs(imp - lyap) / denom;
  const double dev_mc = std::abs(mc - lyap) / denom;

  std::cout << "h2_error (lyapunov):    " << fmt_g17(lyap) << "\n";
  std::cout << "h2_error (impulse):     " << fmt_g17(imp) << "  rel_dev "
            << fmt_short(dev_imp) << "\n";
  std::cout << "h2_error (white noise): " << fmt_g17(mc) << "  rel_dev "
            << fmt_short(dev_mc) << "\n";
  if (dev_imp > 0.01) {
    std::cout << "FAIL: lyapunov vs impulse deviation " << fmt_short(dev_imp)
              << " exceeds 1%\n";
    return kExitDeviation;
  }
  std::cout << "PASS: lyapunov vs impulse within 1%\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spreduce: singular-perturbation model reduction for stable LTI systems"};
  app.require_subcommand(1);

  CommonFlags rf;
  std::string r_method = "both";
  Index r_order = 0;
  CLI::App* cmd_reduce = app.add_subcommand("reduce", "Reduce a model to one target order");
  add_input_flags(cmd_reduce, &rf);
  cmd_reduce->add_option("--method", r_method, "greedy, stiefel, or both")
      ->check(CLI::IsMember({"greedy", "stiefel", "both"}))
      ->capture_default_str();
  cmd_reduce->add_option("--order", r_order, "Target reduced order r")
      ->required()
      ->check(CLI::PositiveNumber);
  cmd_reduce->add_option("--budget", rf.budget, "Optimizer iteration budget")
      ->capture_default_str();
  cmd_reduce->add_flag("--no-timing", rf.no_timing, "Omit wall times from reports");

  CommonFlags sf;
  std::string s_method = "both";
  std::string s_orders;
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "Reduce across a range of orders, emit CSV");
  add_input_flags(cmd_sweep, &sf);
  cmd_sweep->add_option("--method", s_method, "greedy, stiefel, or both")
      ->check(CLI::IsMember({"greedy", "stiefel", "both"}))
      ->capture_default_str();
  cmd_sweep->add_option("--orders", s_orders, "Orders: e.g. '3,5,7', '2..9', '5..50:5'")
      ->required();
  cmd_sweep->add_option("--budget", sf.budget, "Optimizer iteration budget")
      ->capture_default_str();
  cmd_sweep->add_flag("--no-timing", sf.no_timing,
                      "Omit wall times (makes the CSV byte-identical across runs)");

  std::string v_model, v_reduced, v_format = "json";
  std::uint64_t v_seed = 0;
  double v_horizon = 0.0, v_dt = 0.0, v_duration = 0.0;
  CLI::App* cmd_validate =
      app.add_subcommand("validate", "Cross-check H2 error against time-domain estimates");
  cmd_validate->add_option("--model", v_model, "Full model path")->required();
  cmd_validate->add_option("--format", v_format, "Full model format")
      ->check(CLI::IsMember({"json", "matrix-market"}))
      ->capture_default_str();
  cmd_validate->add_option("--reduced", v_reduced, "Reduced model JSON path")->required();
  cmd_validate->add_option("--seed", v_seed, "White-noise seed")->capture_default_str();
  cmd_validate->add_option("--horizon", v_horizon, "Impulse horizon (0 = auto)");
  cmd_validate->add_option("--dt", v_dt, "Time step (0 = auto)");
  cmd_validate->add_option("--duration", v_duration, "White-noise duration (0 = auto)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (cmd_reduce->parsed()) return run_reduce(rf, r_method, r_order);
    if (cmd_sweep->parsed()) return run_sweep(sf, s_method, s_orders);
    return run_validate(v_model, v_format, v_reduced, v_seed, v_horizon, v_dt, v_duration);
  } catch (const spreduce::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}
