#pragma once

// Command dispatch for the command-line tool and the artifact writers.
//
// Exit status: 0 pass, 1 a hypothesis or criterion failed, 2 numerical or
// configuration error.

#include <charconv>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "isotori/config.hpp"
#include "isotori/continuation.hpp"
#include "isotori/floquet.hpp"
#include "isotori/hamiltonian.hpp"
#include "isotori/models.hpp"
#include "isotori/reducible.hpp"

namespace isotori {

enum ExitCode : int { exit_pass = 0, exit_failure = 1, exit_error = 2 };

/// Shortest decimal that reads back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw Error(ErrorKind::config, "cannot write " + path.string());
    row_strings(header);
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    row_strings(cells);
  }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline std::vector<std::string> numbered(const std::string& stem, std::size_t count) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= count; ++i) out.push_back(stem + "_" + std::to_string(i));
  return out;
}

// ---- JSON mirrors of the record types ---------------------------------------

namespace json_io {

using json = nlohmann::json;

inline json vec(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json ivec(const IVec& v) { return std::vector<int>(v.data(), v.data() + v.size()); }

inline json mat(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec(m.row(i).transpose()));
  return rows;
}

inline json spectrum(const ComplexSpectrum& s) {
  json out = json::array();
  for (const auto& z : s.values) out.push_back({{"re", z.real()}, {"im", z.imag()}});
  return out;
}

inline json hypotheses(const HypothesisReport& r) {
  return {{"max_bracket", r.max_bracket},
          {"min_singular_value", r.min_singular_value},
          {"sample_count", r.sample_count},
          {"worst_bracket_sample", r.worst_bracket_sample},
          {"worst_independence_sample", r.worst_independence_sample},
          {"tol", r.tol},
          {"involution", r.involution},
          {"independence", r.independence},
          {"pass", r.pass}};
}

inline json period(const PeriodVector& pv) {
  return {{"c", vec(pv.c)}, {"alpha", ivec(pv.alpha)}, {"residual", pv.residual}, {"iterations", pv.iterations}};
}

inline json monodromy(const MonodromyReport& r) {
  return {{"monodromy", mat(r.monodromy)},
          {"multipliers", spectrum(r.multipliers)},
          {"unit_multiplicity", r.unit_multiplicity},
          {"tol_unit", r.tol_unit},
          {"base_point", vec(r.base_point)},
          {"period", vec(r.period)},
          {"reciprocal_defect", r.reciprocal_defect},
          {"det_defect", r.det_defect}};
}

inline json hypothesis_iii(const HypothesisIIIResult& h) {
  json offending = json::array();
  for (const auto& d : h.offending) {
    offending.push_back({{"re", d.value.real()}, {"im", d.value.imag()}, {"distance_to_one", d.distance_to_one}});
  }
  return {{"pass", h.pass},
          {"numerical_warning", h.numerical_warning},
          {"unit_multiplicity", h.unit_multiplicity},
          {"expected", h.expected},
          {"offending", offending}};
}

inline json criterion(const CriterionResult& c) {
  return {{"alpha", ivec(c.alpha)},
          {"Q", vec(c.Q)},
          {"omega_dets", mat(c.omega_dets)},
          {"weighted_sums", vec(c.weighted_sums)},
          {"detA", c.detA},
          {"nondegenerate", c.nondegenerate},
          {"margin", c.margin},
          {"tol_int", c.tol_int},
          {"identity_defect", c.identity_defect}};
}

inline json record(const TorusRecord& r) {
  return {{"beta", vec(r.beta)},
          {"epsilon", r.epsilon},
          {"y_star", vec(r.y_star)},
          {"section_point", vec(r.section_point)},
          {"residual", r.residual},
          {"return_jacobian", mat(r.return_jacobian)},
          {"transverse_multipliers", spectrum(r.transverse_multipliers)},
          {"lift_offset", vec(r.lift_offset)},
          {"theta", vec(r.theta)},
          {"newton_iterations", r.newton_iterations},
          {"alpha_period", period(r.alpha_period)},
          {"periods", mat(r.periods)},
          {"frequency_matrix", mat(r.frequency_matrix)},
          {"frequencies", vec(r.frequencies)},
          {"kappa", r.kappa + 1},
          {"monodromy", monodromy(r.monodromy)}};
}

inline json twist(const TwistReport& t) {
  json entries = json::array();
  for (const auto& e : t.entries) {
    entries.push_back({{"node", e.node},
                       {"beta", vec(e.beta)},
                       {"epsilon", e.epsilon},
                       {"d_freq_d_beta", mat(e.d_freq_d_beta)},
                       {"twist", mat(e.twist)},
                       {"det", e.det},
                       {"det_beta", e.det_beta}});
  }
  json levels = json::array();
  for (const auto& s : t.per_epsilon) {
    levels.push_back({{"epsilon", s.epsilon},
                      {"entries", s.entries},
                      {"min_abs_det", s.min_abs_det},
                      {"max_abs_det", s.max_abs_det},
                      {"mean_det", s.mean_det},
                      {"sign_stable", s.sign_stable},
                      {"degenerate", s.degenerate}});
  }
  return {{"kappa", t.kappa + 1}, {"tol", t.tol}, {"entries", entries}, {"per_epsilon", levels},
          {"nondegenerate", t.nondegenerate}};
}

inline void write(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::config, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace json_io

// ---- execution ---------------------------------------------------------------

struct ExecuteOptions {
  bool verbose = false;
  std::ostream* diagnostics = &std::cerr;
  /// Config document as given; echoed into run.log ahead of the resolved form.
  std::string source_text;
};

namespace detail {

class RunLog {
 public:
  RunLog(const std::filesystem::path& path, const ExecuteOptions& opts) : out_(path), opts_(opts) {
    if (!out_) throw Error(ErrorKind::config, "cannot write " + path.string());
  }

  void header(const RunConfig& cfg) {
    out_ << "# isotori run\n# command: " << to_string(cfg.command) << "\n";
    if (!opts_.source_text.empty()) {
      out_ << "# config as given:\n" << opts_.source_text;
      if (opts_.source_text.back() != '\n') out_ << '\n';
    }
    out_ << "# config resolved:\n" << to_json(cfg).dump(2) << "\n# ----\n";
  }

  void line(const std::string& text) {
    out_ << text << '\n';
    if (opts_.verbose && opts_.diagnostics) *opts_.diagnostics << text << '\n';
  }

 private:
  std::ofstream out_;
  const ExecuteOptions& opts_;
};

inline ContinuationOptions continuation_options(const RunConfig& cfg) {
  ContinuationOptions o;
  o.ode.rel_tol = cfg.tolerances.ode_rel;
  o.ode.abs_tol = cfg.tolerances.ode_abs;
  o.monodromy_ode.rel_tol = cfg.tolerances.monodromy_rel;
  o.monodromy_ode.abs_tol = cfg.tolerances.monodromy_abs;
  o.fixed_point_tol = cfg.tolerances.fixed_point;
  o.tol_unit = cfg.tolerances.tol_unit;
  o.kappa = cfg.kappa - 1;
  return o;
}

inline IVec config_alpha(const RunConfig& cfg, const TorusSeed& seed) {
  if (!cfg.alpha) return seed.alpha;
  IVec a(static_cast<Eigen::Index>(cfg.alpha->size()));
  for (std::size_t i = 0; i < cfg.alpha->size(); ++i) a(static_cast<Eigen::Index>(i)) = (*cfg.alpha)[i];
  return a;
}

inline Vec config_beta(const RunConfig& cfg, const TorusSeed& seed) {
  if (!cfg.beta_center) return seed.beta0;
  return Eigen::Map<const Vec>(cfg.beta_center->data(), static_cast<Eigen::Index>(cfg.beta_center->size()));
}

inline BetaGrid config_grid(const RunConfig& cfg, const TorusSeed& seed) {
  BetaGrid g;
  g.center = config_beta(cfg, seed);
  g.step = Eigen::Map<const Vec>(cfg.beta_step.data(), static_cast<Eigen::Index>(cfg.beta_step.size()));
  g.count = cfg.beta_count;
  return g;
}

inline std::string describe(const Vec& v) {
  std::string out = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v(i));
  return out + ")";
}

inline int run_check(const RunConfig& cfg, const ModelSystem& model, const std::filesystem::path& dir, RunLog& log) {
  std::mt19937_64 rng(cfg.seed);
  const auto samples = ball_samples({model.seed.base}, cfg.hypothesis_samples, cfg.hypothesis_radius, rng);
  nlohmann::json reports = nlohmann::json::array();
  bool pass = true;
  for (double eps : cfg.eps_grid) {
    const HypothesisReport rep = check_hypotheses(model.system, samples, eps, cfg.tolerances.hypothesis);
    auto j = json_io::hypotheses(rep);
    j["epsilon"] = eps;
    reports.push_back(j);
    pass = pass && rep.pass;
    log.line("eps " + format_double(eps) + ": max bracket " + format_double(rep.max_bracket) +
             ", min singular value " + format_double(rep.min_singular_value) + (rep.pass ? " pass" : " FAIL"));
  }
  json_io::write(dir / "hypotheses.json", {{"reports", reports}, {"pass", pass}});
  return pass ? exit_pass : exit_failure;
}

inline int run_floquet(const RunConfig& cfg, const ModelSystem& model, const std::filesystem::path& dir, RunLog& log) {
  const ContinuationOptions opts = continuation_options(cfg);
  TorusSeed seed = model.seed;
  seed.alpha = config_alpha(cfg, seed);
  const auto& sys = model.system;

  nlohmann::json doc;
  MonodromyReport rep;
  if (cfg.epsilon == 0.0 && !cfg.beta_center) {
    const PeriodVector pv =
        find_period_vector(sys, seed.base, seed.alpha, seed.c_guess(seed.alpha), 0.0, opts.monodromy_ode, opts.period);
    rep = monodromy(sys, seed.base, pv, 0.0, opts.tol_unit, opts.monodromy_ode);
    doc["period_vector"] = json_io::period(pv);
  } else {
    // Off the seed torus the orbit must first be located on the persisted torus.
    const TorusRecord rec = solve_seed_torus(sys, seed, config_beta(cfg, seed), cfg.epsilon, opts);
    rep = rec.monodromy;
    doc["period_vector"] = json_io::period(rec.alpha_period);
    doc["record"] = json_io::record(rec);
  }
  const HypothesisIIIResult h3 = check_hypothesis_iii(rep, sys.s());
  doc["epsilon"] = cfg.epsilon;
  doc["report"] = json_io::monodromy(rep);
  doc["hypothesis_iii"] = json_io::hypothesis_iii(h3);
  json_io::write(dir / "monodromy.json", doc);

  CsvWriter csv(dir / "multipliers.csv", {"index", "re", "im", "abs_minus_one"});
  for (std::size_t k = 0; k < rep.multipliers.size(); ++k) {
    const Complex z = rep.multipliers.values[k];
    csv.row({static_cast<double>(k), z.real(), z.imag(), std::abs(z - Complex(1.0, 0.0))});
  }
  log.line("unit multiplicity " + std::to_string(rep.unit_multiplicity) + " (expected " +
           std::to_string(h3.expected) + ")" + (h3.pass ? " pass" : " FAIL"));
  if (h3.numerical_warning) log.line("warning: fewer unit multipliers than 2s; tighten the monodromy tolerances");
  return h3.pass ? exit_pass : exit_failure;
}

inline FrequencyData config_frequencies(const RunConfig& cfg, const ModelSystem& model) {
  if (cfg.system.kind == ModelKind::action_oscillators) {
    const Vec beta = config_beta(cfg, model.seed);
    return detail::action_oscillator_frequencies(cfg.system, model_actions(cfg.system, beta, cfg.epsilon),
                                                 cfg.epsilon);
  }
  return model.frequencies;
}

inline int run_nondeg(const RunConfig& cfg, const ModelSystem& model, const std::filesystem::path& dir, RunLog& log) {
  const FrequencyData fd = config_frequencies(cfg, model);
  const double tol = cfg.tolerances.tol_int;
  nlohmann::json doc{{"A", json_io::mat(fd.A)}, {"B", json_io::mat(fd.B)}};

  std::optional<IVec> alpha;
  if (cfg.alpha) {
    alpha = config_alpha(cfg, model.seed);
  } else {
    alpha = search_alpha(fd, cfg.max_norm, tol);
    doc["searched_max_norm"] = cfg.max_norm;
  }
  bool pass = false;
  if (alpha) {
    const CriterionResult res = determinant_criterion(fd, *alpha, tol);
    doc["criterion"] = json_io::criterion(res);
    doc["q_path_nondegenerate"] = q_nondegenerate(res.Q, tol);
    pass = res.nondegenerate;
    log.line("alpha " + describe(alpha->cast<double>()) + ": Q " + describe(res.Q) + ", margin " +
             format_double(res.margin) + (pass ? " nondegenerate" : " DEGENERATE"));
  } else {
    log.line("no nondegenerate class with |alpha|_inf <= " + std::to_string(cfg.max_norm));
  }
  if (fd.s() == 1) {
    std::vector<double> nus(fd.B.data(), fd.B.data() + fd.B.size());
    doc["lyapunov_specialization"] = lyapunov_specialization(fd.A(0, 0), nus, tol);
  }
  doc["nondegenerate"] = pass;
  json_io::write(dir / "criterion.json", doc);
  return pass ? exit_pass : exit_failure;
}

inline TorusFamily run_family(const RunConfig& cfg, const ModelSystem& model, RunLog& log) {
  const ContinuationOptions opts = continuation_options(cfg);
  TorusSeed seed = model.seed;
  seed.alpha = config_alpha(cfg, seed);
  TorusFamily fam = continue_family(model.system, seed, config_grid(cfg, seed), cfg.eps_grid, opts);
  for (std::size_t i = 0; i < fam.nodes.size(); ++i) {
    const auto& n = fam.nodes[i];
    std::string text = "node " + std::to_string(i) + " beta " + describe(n.beta) + " eps " +
                       format_double(n.epsilon) + ": " + std::string(to_string(n.status));
    if (n.record) text += ", |y*| " + format_double(max_abs(n.record->y_star)) + ", residual " +
                          format_double(n.record->residual);
    if (!n.message.empty()) text += " (" + n.message + ")";
    log.line(text);
  }
  log.line("converged " + std::to_string(fam.converged_count()) + " of " + std::to_string(fam.nodes.size()));
  return fam;
}

inline void write_family_csv(const TorusFamily& fam, std::size_t s, const std::filesystem::path& path) {
  std::vector<std::string> header = numbered("beta", s);
  header.insert(header.end(), {"eps", "y_norm", "residual"});
  const auto freq = numbered("freq", s);
  header.insert(header.end(), freq.begin(), freq.end());
  header.insert(header.end(), {"converged", "unit_multiplicity"});
  CsvWriter csv(path, header);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& n : fam.nodes) {
    std::vector<double> row(n.beta.data(), n.beta.data() + n.beta.size());
    row.push_back(n.epsilon);
    if (n.record) {
      row.push_back(max_abs(n.record->y_star));
      row.push_back(n.record->residual);
      for (Eigen::Index k = 0; k < n.record->frequencies.size(); ++k) row.push_back(n.record->frequencies(k));
      row.push_back(1.0);
      row.push_back(static_cast<double>(n.record->monodromy.unit_multiplicity));
    } else {
      row.insert(row.end(), 2 + s, nan);
      row.push_back(0.0);
      row.push_back(0.0);
    }
    csv.row(row);
  }
}

inline int run_continue(const RunConfig& cfg, const ModelSystem& model, const std::filesystem::path& dir,
                        RunLog& log) {
  const TorusFamily fam = run_family(cfg, model, log);
  const auto& sys = model.system;
  write_family_csv(fam, sys.s(), dir / "family.csv");

  nlohmann::json nodes = nlohmann::json::array();
  std::unique_ptr<CsvWriter> sample_csv;
  if (cfg.samples) {
    std::vector<std::string> header{"record_id"};
    const auto th = numbered("theta", sys.s());
    const auto xs = numbered("x", sys.dim());
    header.insert(header.end(), th.begin(), th.end());
    header.insert(header.end(), xs.begin(), xs.end());
    header.push_back("F_dev_max");
    sample_csv = std::make_unique<CsvWriter>(dir / "torus_samples.csv", header);
  }
  SampleOptions sopts;
  sopts.grid_per_cycle = cfg.grid_per_cycle;
  const ContinuationOptions opts = continuation_options(cfg);

  for (std::size_t i = 0; i < fam.nodes.size(); ++i) {
    const auto& n = fam.nodes[i];
    nlohmann::json j{{"id", i},
                     {"beta_index", n.beta_index},
                     {"eps_index", n.eps_index},
                     {"beta", json_io::vec(n.beta)},
                     {"epsilon", n.epsilon},
                     {"status", std::string(to_string(n.status))},
                     {"message", n.message}};
    if (n.predictor) j["predictor"] = *n.predictor;
    if (n.record) {
      j["record"] = json_io::record(*n.record);
      if (sample_csv) {
        const TorusSamples smp = sample_torus(sys, *n.record, n.epsilon, sopts, opts.ode);
        for (std::size_t k = 0; k < smp.points.size(); ++k) {
          std::vector<double> row{static_cast<double>(i)};
          row.insert(row.end(), smp.thetas[k].data(), smp.thetas[k].data() + smp.thetas[k].size());
          row.insert(row.end(), smp.points[k].data(), smp.points[k].data() + smp.points[k].size());
          row.push_back(smp.f_dev[k]);
          sample_csv->row(row);
        }
        j["samples"] = {{"count", smp.points.size()},
                        {"max_f_dev", smp.max_f_dev},
                        {"invariance_distance", smp.invariance_distance},
                        {"isotropy_defect", smp.isotropy_defect}};
        log.line("node " + std::to_string(i) + " samples: max |F - beta| " + format_double(smp.max_f_dev) +
                 ", invariance " + format_double(smp.invariance_distance) + ", isotropy " +
                 format_double(smp.isotropy_defect));
      }
    }
    nodes.push_back(std::move(j));
  }
  json_io::write(dir / "family.json", {{"start", fam.start},
                                       {"converged", fam.converged_count()},
                                       {"total", fam.nodes.size()},
                                       {"nodes", nodes}});
  return fam.converged_count() == fam.nodes.size() ? exit_pass : exit_failure;
}

inline int run_freq(const RunConfig& cfg, const ModelSystem& model, const std::filesystem::path& dir, RunLog& log) {
  const TorusFamily fam = run_family(cfg, model, log);
  const std::size_t s = model.system.s();
  write_family_csv(fam, s, dir / "family.csv");
  const TwistReport rep = frequency_twist(fam, cfg.kappa - 1, cfg.tolerances.twist);
  json_io::write(dir / "twist.json", json_io::twist(rep));

  std::vector<std::string> header = numbered("beta", s);
  header.insert(header.end(), {"eps", "det"});
  CsvWriter csv(dir / "twist.csv", header);
  for (const auto& e : rep.entries) {
    std::vector<double> row(e.beta.data(), e.beta.data() + e.beta.size());
    row.push_back(e.epsilon);
    row.push_back(e.det);
    csv.row(row);
  }
  for (const auto& lvl : rep.per_epsilon) {
    log.line("eps " + format_double(lvl.epsilon) + ": twist det in [" + format_double(lvl.min_abs_det) + ", " +
             format_double(lvl.max_abs_det) + "] by magnitude, mean " + format_double(lvl.mean_det) +
             (lvl.degenerate ? " DEGENERATE" : (lvl.sign_stable ? " sign-stable" : " SIGN CHANGE")));
  }
  return rep.nondegenerate ? exit_pass : exit_failure;
}

}  // namespace detail

/// Runs the configured command, writing artifacts under cfg.outputs.
/// Library errors are reported on the diagnostics stream and mapped to exit 2,
/// except a failed nondegeneracy hypothesis which is a principled failure (1).
inline int execute(const RunConfig& cfg, const ExecuteOptions& opts = {}) {
  const std::filesystem::path dir(cfg.outputs);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    if (opts.diagnostics) *opts.diagnostics << "config: cannot create output directory " << dir << ": " << ec.message() << '\n';
    return exit_error;
  }
  try {
    detail::RunLog log(dir / "run.log", opts);
    log.header(cfg);
    const ModelSystem model = make_system(cfg.system);
    int status = exit_error;
    try {
      switch (cfg.command) {
        case Command::check: status = detail::run_check(cfg, model, dir, log); break;
        case Command::floquet: status = detail::run_floquet(cfg, model, dir, log); break;
        case Command::nondeg: status = detail::run_nondeg(cfg, model, dir, log); break;
        case Command::continue_family: status = detail::run_continue(cfg, model, dir, log); break;
        case Command::freq: status = detail::run_freq(cfg, model, dir, log); break;
      }
    } catch (const Error& e) {
      log.line(std::string("error: ") + e.what());
      if (opts.diagnostics) *opts.diagnostics << e.what() << '\n';
      status = e.kind() == ErrorKind::nondegeneracy_failure ? exit_failure : exit_error;
    }
    log.line("exit " + std::to_string(status));
    return status;
  } catch (const std::exception& e) {
    if (opts.diagnostics) *opts.diagnostics << e.what() << '\n';
    return exit_error;
  }
}

}  // namespace isotori
