// Command-line front end: simulation sweeps, single-sample estimation, and
// the image mixing/demixing pipeline.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "rica/imagedemix.hpp"
#include "rica/parallel.hpp"
#include "rica/simharness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;   // config/parse/i-o problems
constexpr int kExitNumeric = 3;  // estimation/numeric failures

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw rica::IoError("cannot create output directory '" + out + "'");
}

Eigen::MatrixXd read_data_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw rica::IoError("cannot open data file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw rica::ParseError("data line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw rica::ParseError("data line " + std::to_string(lineno) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw rica::ParseError("data file '" + path + "' is empty");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.front().size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return x;
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw rica::IoError("cannot write '" + path + "'");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) f << (j ? "," : "") << fmt(m(i, j));
    f << "\n";
  }
}

json ci_to_json(const rica::CrossInfoEstimates& ci) {
  json out;
  const int k = ci.dim();
  for (int r = 0; r < k; ++r) {
    for (int s = 0; s < k; ++s) {
      if (r == s) continue;
      const std::string key = std::to_string(r) + "," + std::to_string(s);
      out["gamma_star"][key] = ci.gamma_star(r, s);
      out["rho_star"][key] = ci.rho_star(r, s);
      out["gamma_status"][key] = rica::to_string(ci.gstatus(r, s));
      out["rho_status"][key] = rica::to_string(ci.rstatus(r, s));
    }
  }
  for (const auto& b : ci.brackets) {
    json jb;
    jb["r"] = b.r;
    jb["s"] = b.s;
    jb["kind"] = b.rho ? "rho" : "gamma";
    jb["lambda_lo"] = b.lambda_lo;
    jb["lambda_hi"] = b.lambda_hi;
    jb["h_lo"] = b.h_lo;
    jb["h_hi"] = b.h_hi;
    out["brackets"].push_back(jb);
  }
  return out;
}

json steps_to_json(const std::vector<rica::StepDiagnostics>& steps) {
  json out = json::array();
  for (const auto& st : steps) {
    json js;
    js["step"] = st.step;
    if (st.T.size() != 0) {
      std::vector<std::vector<double>> t;
      for (Eigen::Index i = 0; i < st.T.rows(); ++i) {
        t.emplace_back(st.T.row(i).begin(), st.T.row(i).end());
      }
      js["T"] = t;
    }
    for (std::size_t j = 0; j < st.omega.size(); ++j) {
      json w;
      w["mu"] = st.omega[j].mu;
      w["sigma"] = st.omega[j].sigma;
      w["alpha"] = st.omega[j].alpha;
      w["nu"] = st.omega[j].nu;
      w["gaussian_fallback"] = st.gaussian_fallback[j];
      js["omega"].push_back(w);
    }
    if (st.ci.dim() > 0) js["cross_info"] = ci_to_json(st.ci);
    js["halvings"] = st.halvings;
    js["flags"] = st.flags;
    out.push_back(js);
  }
  return out;
}

int run_simulate(const std::string& config_path, const std::string& out,
                 std::optional<std::uint64_t> seed_override) {
  rica::SimConfig cfg = rica::load_config(config_path);
  if (seed_override) cfg.seed = *seed_override;
  cfg.validate();
  ensure_out_dir(out);
  std::cout << "root seed: " << cfg.seed << "\n";

  const rica::SimResult result = rica::run_experiment(cfg);
  {
    std::ofstream csv(fs::path(out) / "results.csv");
    if (!csv) throw rica::IoError("cannot write results.csv");
    rica::write_csv(result, csv);
  }
  {
    std::ofstream js(fs::path(out) / "summary.json");
    if (!js) throw rica::IoError("cannot write summary.json");
    js << rica::summary_json(result) << "\n";
  }
  int failed = 0;
  for (const auto& c : result.cells) failed += c.ok ? 0 : 1;
  std::cout << "wrote " << result.cells.size() << " cells (" << failed << " failed) to " << out
            << "\n";
  return kExitOk;
}

int run_estimate(const std::string& data_path, const std::string& estimator, int steps_override,
                 const std::string& out, std::uint64_t seed, double c, double lambda_max) {
  Eigen::MatrixXd x = read_data_csv(data_path);
  ensure_out_dir(out);
  std::cout << "root seed: " << seed << "\n";
  if (x.cols() == 1) {
    std::cerr << "warning: k = 1, mixing matrix is trivially the identity\n";
    write_matrix_csv(Eigen::MatrixXd::Identity(1, 1), (fs::path(out) / "estimate.csv").string());
    std::ofstream js(fs::path(out) / "diagnostics.json");
    js << json{{"estimator", "identity"}, {"n", x.rows()}}.dump(2) << "\n";
    return kExitOk;
  }

  rica::EstimatorSpec spec = rica::parse_estimator(estimator);
  if (steps_override >= 0 && spec.kind == rica::EstimatorSpec::Kind::kR) {
    spec.steps = steps_override;
  }
  rica::RunKnobs knobs;
  knobs.c = c;
  knobs.lambda_max = lambda_max;
  knobs.seed = seed;

  json diag;
  Eigen::MatrixXd estimate;
  if (spec.kind == rica::EstimatorSpec::Kind::kR) {
    const rica::EstimatorOutcome pre = rica::run_estimator(*spec.preliminary, x, knobs);
    rica::REstimatorOptions opt;
    opt.steps = spec.steps;
    opt.c = spec.c.value_or(knobs.c);
    opt.lambda_max = spec.lambda_max.value_or(knobs.lambda_max);
    opt.scores = spec.scores;
    const rica::REstimatorResult res = rica::data_driven_r_estimator(
        x, rica::MixingMatrix::from_canonical(pre.estimate), opt);
    estimate = res.estimate.matrix();
    diag["preliminary"] = spec.preliminary->label;
    diag["preliminary_flags"] = pre.flags;
    diag["steps"] = steps_to_json(res.steps);
  } else {
    const rica::EstimatorOutcome oc = rica::run_estimator(spec, x, knobs);
    estimate = oc.estimate;
    diag["flags"] = oc.flags;
  }
  diag["estimator"] = spec.label;
  diag["n"] = x.rows();
  diag["k"] = x.cols();

  write_matrix_csv(estimate, (fs::path(out) / "estimate.csv").string());
  std::ofstream js(fs::path(out) / "diagnostics.json");
  js << diag.dump(2) << "\n";
  std::cout << "wrote estimate.csv and diagnostics.json to " << out << "\n";
  return kExitOk;
}

int run_demix(const std::vector<std::string>& source_paths, const std::string& mixing_spec,
              const std::string& prelim, int steps, const std::string& out, std::uint64_t seed,
              double c, double lambda_max, bool ascii) {
  if (source_paths.size() < 2) throw rica::DimensionMismatch("demix-image: need k >= 2 sources");
  std::vector<rica::GrayImage> sources;
  sources.reserve(source_paths.size());
  for (const auto& p : source_paths) sources.push_back(rica::read_pgm(p));
  const int k = static_cast<int>(sources.size());

  Eigen::MatrixXd l;
  if (mixing_spec == "lstar") {
    l = rica::image_mixing(k);
  } else if (mixing_spec == "identity") {
    l = Eigen::MatrixXd::Identity(k, k);
  } else {
    throw rica::ConfigError("unknown mixing spec '" + mixing_spec + "' (use lstar|identity)");
  }

  ensure_out_dir(out);
  std::cout << "root seed: " << seed << "\n";
  const rica::MixedImages mixed = rica::mix_images(sources, l);
  for (int j = 0; j < k; ++j) {
    rica::write_pgm(mixed.images[static_cast<std::size_t>(j)],
                    (fs::path(out) / ("mixed_ch" + std::to_string(j) + ".pgm")).string(), !ascii);
  }

  rica::RunKnobs knobs;
  knobs.c = c;
  knobs.lambda_max = lambda_max;
  knobs.seed = seed;
  const rica::EstimatorSpec spec = rica::parse_estimator(prelim);
  const rica::DemixResult res = rica::demix_images(
      mixed.sample, sources[0].width, sources[0].height, spec, steps, knobs, &l);

  for (std::size_t t = 0; t < res.demixed.size(); ++t) {
    for (int j = 0; j < k; ++j) {
      const std::string name = "demixed_step" + std::to_string(t) + "_ch" + std::to_string(j) + ".pgm";
      rica::write_pgm(res.demixed[t][static_cast<std::size_t>(j)], (fs::path(out) / name).string(),
                      !ascii);
    }
  }
  {
    std::ofstream trace(fs::path(out) / "ae_trace.csv");
    if (!trace) throw rica::IoError("cannot write ae_trace.csv");
    trace << "step,estimator,amari\n";
    for (std::size_t t = 0; t < res.ae_trace.size(); ++t) {
      trace << t << "," << prelim << "," << fmt(res.ae_trace[t]) << "\n";
    }
  }
  std::cout << "tie fraction in preliminary residual ranks: " << res.tie_fraction << "\n";
  if (!res.flags.empty()) std::cout << "flags: " << res.flags << "\n";
  std::cout << "wrote " << res.demixed.size() * static_cast<std::size_t>(k)
            << " demixed images and ae_trace.csv to " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rank-based ICA mixing-matrix estimation"};
  app.require_subcommand(1);

  std::string out = ".";
  std::uint64_t seed = 20240612;
  bool seed_given = false;
  int jobs = 0;
  app.add_option("--out", out, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "root seed override")
      ->each([&](const std::string&) { seed_given = true; });
  app.add_option("--jobs", jobs, "parallel worker threads (0 = auto)");

  auto* sim = app.add_subcommand("simulate", "run a simulation sweep from a config file");
  std::string config_path;
  sim->add_option("--config", config_path, "key=value config file")->required();

  auto* est = app.add_subcommand("estimate", "estimate a mixing matrix from a CSV sample");
  std::string data_path;
  std::string estimator = "r(prelim=fobi,steps=1,scores=skewt)";
  int steps_override = -1;
  double c = 20.0, lambda_max = 10.0;
  est->add_option("--data", data_path, "n x k CSV of observations")->required();
  est->add_option("--estimator", estimator, "estimator descriptor")->capture_default_str();
  est->add_option("--steps", steps_override, "override the multistep count");
  est->add_option("--c", c, "lambda grid constant")->capture_default_str();
  est->add_option("--lambda-max", lambda_max, "line-search horizon")->capture_default_str();

  auto* demix = app.add_subcommand("demix-image", "mix source PGMs and demix them back");
  std::vector<std::string> source_paths;
  std::string mixing_spec = "lstar";
  std::string prelim = "fobi";
  int steps = 20;
  bool ascii = false;
  demix->add_option("sources", source_paths, "k >= 2 same-size PGM files")->required();
  demix->add_option("--mixing", mixing_spec, "lstar | identity")->capture_default_str();
  demix->add_option("--prelim", prelim, "preliminary estimator descriptor")->capture_default_str();
  demix->add_option("--steps", steps, "multistep count T")->capture_default_str();
  demix->add_option("--c", c, "lambda grid constant")->capture_default_str();
  demix->add_option("--lambda-max", lambda_max, "line-search horizon")->capture_default_str();
  demix->add_flag("--ascii", ascii, "write P2 instead of P5");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitConfig;
  }

  rica::par::set_jobs(jobs);
  try {
    if (sim->parsed()) {
      return run_simulate(config_path, out,
                          seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt);
    }
    if (est->parsed()) {
      return run_estimate(data_path, estimator, steps_override, out, seed, c, lambda_max);
    }
    return run_demix(source_paths, mixing_spec, prelim, steps, out, seed, c, lambda_max, ascii);
  } catch (const rica::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rica::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rica::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rica::Error& e) {
    std::cerr << "estimation error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}
