#include "rica/simharness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "rica/parallel.hpp"
#include "rica/rng.hpp"

namespace rica {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string sanitize_flags(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

double quantile_type7(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const std::size_t i = static_cast<std::size_t>(h);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (h - i) * (v[i + 1] - v[i]);
}

// Component pools are immutable and expensive to build (skew-t tables),
// so they are cached per setup.
const std::vector<ScorePtr>& fixed_triple(const std::string& setup) {
  static std::mutex mu;
  static std::map<std::string, std::vector<ScorePtr>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(setup);
  if (it != cache.end()) return it->second;

  std::vector<ScorePtr> comps;
  auto skewt = [](double alpha, double nu) {
    SkewTParams p;
    p.alpha = alpha;
    p.nu = nu;
    return make_skew_t(p, /*standardize=*/true);
  };
  if (setup == "A") {
    comps = {skewt(-4, 5), skewt(2, 5), make_student_t(5)};
  } else if (setup == "B") {
    comps = {make_skew_laplace(2.0), make_skew_laplace(1.0 / 3.0), make_laplace()};
  } else if (setup == "C") {
    comps = {make_stable(-1, 1.5), make_stable(1, 1.5), make_stable(0, 1.5)};
  } else if (setup == "D") {
    comps = {skewt(-4, 5), make_skew_laplace(2.0), make_stable(-1, 1.5)};
  } else if (setup == "E") {
    comps = {make_stable(-1, 1.5), make_skew_laplace(2.0), make_mix_t3()};
  } else if (setup == "F") {
    comps = {make_student_t(1), make_student_t(2), make_student_t(3)};
  } else if (setup == "G") {
    comps = {make_student_t(3), make_student_t(5), make_gaussian()};
  } else {
    throw ConfigError("no fixed component triple for setup " + setup);
  }
  return cache.emplace(setup, std::move(comps)).first->second;
}

// candidate pool for the contaminated setups
const std::vector<ScorePtr>& contamination_pool() {
  static std::mutex mu;
  static std::vector<ScorePtr> pool;
  std::lock_guard<std::mutex> lock(mu);
  if (pool.empty()) {
    SkewTParams p;
    p.alpha = 4;
    p.nu = 5;
    pool = {make_skew_t(p, true), make_skew_laplace(2.0), make_gaussian(),
            make_stable(1, 1.5), make_mix_t3()};
  }
  return pool;
}

struct SetupInfo {
  bool random_triple = false;
  double contamination = 0.0;
};

SetupInfo setup_info(const std::string& setup) {
  if (setup == "H") return {true, 0.02};
  if (setup == "I") return {true, 0.05};
  if (setup == "H0" || setup == "I0") return {true, 0.0};  // clean analogues
  return {false, 0.0};
}

}  // namespace

bool valid_setup(const std::string& setup) {
  static const std::vector<std::string> known = {"A", "B", "C", "D", "E", "F",
                                                 "G", "H", "I", "H0", "I0"};
  return std::find(known.begin(), known.end(), setup) != known.end();
}

Eigen::MatrixXd default_mixing() {
  Eigen::MatrixXd l(3, 3);
  l << 1.0, 0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 0.5, 1.0;
  return l;
}

void SimConfig::validate() const {
  if (!valid_setup(setup)) throw ConfigError("unknown setup '" + setup + "'");
  if (n < 50) throw ConfigError("n must be >= 50");
  if (reps < 1) throw ConfigError("M must be >= 1");
  if (estimators.empty()) throw ConfigError("no estimators configured");
  for (const auto& e : estimators) {
    try {
      parse_estimator(e);
    } catch (const ParseError& pe) {
      throw ConfigError(std::string("bad estimator descriptor: ") + pe.what());
    }
  }
  if (mixing.size() != 0 && (mixing.rows() != 3 || mixing.cols() != 3)) {
    throw ConfigError("mixing matrix must be 3x3");
  }
  if (!(c > 0.0) || !(lambda_max > 0.0) || steps < 0) {
    throw ConfigError("need c > 0, lambda_max > 0, steps >= 0");
  }
}

Generated generate(const std::string& setup, int n, std::uint64_t seed,
                   const Eigen::MatrixXd* mixing) {
  if (!valid_setup(setup)) throw ConfigError("unknown setup '" + setup + "'");
  constexpr int k = 3;
  Generated out;
  out.truth = mixing != nullptr && mixing->size() != 0 ? *mixing : default_mixing();
  if (out.truth.rows() != k || out.truth.cols() != k) {
    throw ConfigError("generate: mixing matrix must be 3x3");
  }

  const SetupInfo info = setup_info(setup);
  std::vector<ScorePtr> comps;
  if (info.random_triple) {
    // uniform selection without replacement from the candidate pool
    const auto& pool = contamination_pool();
    RngStream pick(substream_seed(seed, 0, "setup"));
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (int j = 0; j < k; ++j) {
      const std::size_t at = static_cast<std::size_t>(pick.below(idx.size()));
      comps.push_back(pool[idx[at]]);
      idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(at));
    }
  } else {
    comps = fixed_triple(setup);
  }
  for (const auto& c : comps) out.components.push_back(c->name());

  Eigen::MatrixXd z(n, k);
  for (int j = 0; j < k; ++j) {
    RngStream col(substream_seed(seed, 100 + static_cast<std::uint64_t>(j), "latent"));
    for (int i = 0; i < n; ++i) z(i, j) = comps[static_cast<std::size_t>(j)]->sample(col);
  }
  out.x = z * out.truth.transpose();

  if (info.contamination > 0.0) {
    RngStream cont(substream_seed(seed, 1, "contamination"));
    for (int i = 0; i < n; ++i) {
      if (cont.uniform() < info.contamination) {
        out.x.row(i) *= cont.uniform(-5.0, 5.0);
        ++out.contaminated;
      }
    }
  }
  return out;
}

SimResult run_experiment(const SimConfig& cfg) {
  cfg.validate();
  const std::size_t n_est = cfg.estimators.size();
  std::vector<EstimatorSpec> specs;
  specs.reserve(n_est);
  for (const auto& e : cfg.estimators) specs.push_back(parse_estimator(e));

  SimResult result;
  result.cfg = cfg;
  result.cells.resize(static_cast<std::size_t>(cfg.reps) * n_est);

  const Eigen::MatrixXd mixing =
      cfg.mixing.size() != 0 ? cfg.mixing : default_mixing();

  par::for_each_index(static_cast<std::size_t>(cfg.reps), [&](std::size_t rep) {
    const std::uint64_t rep_seed = substream_seed(cfg.seed, rep, "rep");
    const Generated gen = generate(cfg.setup, cfg.n, rep_seed, &mixing);
    for (std::size_t e = 0; e < n_est; ++e) {
      SimCell& cell = result.cells[rep * n_est + e];
      cell.rep = static_cast<int>(rep);
      cell.estimator = cfg.estimators[e];
      RunKnobs knobs;
      knobs.c = cfg.c;
      knobs.lambda_max = cfg.lambda_max;
      knobs.seed = substream_seed(cfg.seed, rep, cfg.estimators[e]);
      const auto start = std::chrono::steady_clock::now();
      try {
        const EstimatorOutcome oc = run_estimator(specs[e], gen.x, knobs);
        cell.amari = amari_error(oc.estimate, gen.truth);
        cell.mdi = min_distance_index(oc.estimate, gen.truth);
        cell.flags = sanitize_flags(oc.flags);
        cell.ok = true;
      } catch (const Error& err) {
        cell.ok = false;
        cell.flags = sanitize_flags(std::string("error: ") + err.what());
      }
      cell.runtime_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    }
  });
  return result;
}

void write_csv(const SimResult& result, std::ostream& os, bool include_runtime) {
  os << "setup,n,rep,estimator,amari,mdi,runtime_ms,flags\n";
  for (const auto& c : result.cells) {
    os << result.cfg.setup << ',' << result.cfg.n << ',' << c.rep << ',' << c.estimator << ',';
    if (c.ok) os << format_double(c.amari);
    os << ',';
    if (c.ok) os << format_double(c.mdi);
    os << ',' << (include_runtime ? format_double(c.runtime_ms) : "0") << ',' << c.flags << '\n';
  }
}

std::string summary_json(const SimResult& result) {
  json root;
  root["setup"] = result.cfg.setup;
  root["n"] = result.cfg.n;
  root["reps"] = result.cfg.reps;
  root["seed"] = result.cfg.seed;
  root["c"] = result.cfg.c;
  root["lambda_max"] = result.cfg.lambda_max;

  json ests = json::object();
  for (const auto& label : result.cfg.estimators) {
    std::vector<double> amari, mdi, runtime;
    int failed = 0;
    for (const auto& c : result.cells) {
      if (c.estimator != label) continue;
      if (!c.ok) {
        ++failed;
        continue;
      }
      amari.push_back(c.amari);
      mdi.push_back(c.mdi);
      runtime.push_back(c.runtime_ms);
    }
    json e;
    e["ok"] = static_cast<int>(amari.size());
    e["failed"] = failed;
    // one-sided boxplot statistics
    for (const char* which : {"amari", "mdi"}) {
      const std::vector<double>& v = std::string(which) == "amari" ? amari : mdi;
      json q;
      q["q25"] = quantile_type7(v, 0.25);
      q["median"] = quantile_type7(v, 0.5);
      q["q75"] = quantile_type7(v, 0.75);
      q["q95"] = quantile_type7(v, 0.95);
      e[which] = q;
    }
    e["runtime_ms_median"] = quantile_type7(runtime, 0.5);
    ests[label] = e;
  }
  root["estimators"] = ests;
  return root.dump(2);
}

namespace {

std::string strip_ws(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_top_level_commas(const std::string& s) {
  std::vector<std::string> parts;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      parts.push_back(strip_ws(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!strip_ws(cur).empty()) parts.push_back(strip_ws(cur));
  return parts;
}

Eigen::MatrixXd parse_mixing(const std::string& value) {
  if (value == "default") return default_mixing();
  if (value == "identity") return Eigen::MatrixXd::Identity(3, 3);
  std::vector<std::vector<double>> rows;
  std::stringstream ss(value);
  std::string row;
  while (std::getline(ss, row, ';')) {
    std::vector<double> r;
    std::stringstream rs(row);
    std::string cell;
    while (std::getline(rs, cell, ',')) {
      try {
        r.push_back(std::stod(strip_ws(cell)));
      } catch (const std::exception&) {
        throw ConfigError("mixing: bad number '" + cell + "'");
      }
    }
    rows.push_back(std::move(r));
  }
  const std::size_t k = rows.size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    if (rows[i].size() != k) throw ConfigError("mixing: ragged rows");
    for (std::size_t j = 0; j < k; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

}  // namespace

SimConfig parse_config(std::istream& is) {
  SimConfig cfg;
  cfg.estimators.clear();
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip_ws(line);
    if (line.empty() || line.front() == '[') continue;  // section headers allowed
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = strip_ws(line.substr(0, eq));
    const std::string value = strip_ws(line.substr(eq + 1));
    try {
      if (key == "setup") {
        cfg.setup = value;
      } else if (key == "n") {
        cfg.n = std::stoi(value);
      } else if (key == "M" || key == "reps") {
        cfg.reps = std::stoi(value);
      } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
      } else if (key == "estimators") {
        cfg.estimators = split_top_level_commas(value);
      } else if (key == "c") {
        cfg.c = std::stod(value);
      } else if (key == "lambda_max" || key == "lambda-max") {
        cfg.lambda_max = std::stod(value);
      } else if (key == "steps") {
        cfg.steps = std::stoi(value);
      } else if (key == "mixing") {
        cfg.mixing = parse_mixing(value);
      } else {
        throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("config line " + std::to_string(lineno) + ": bad value for '" + key + "'");
    }
  }
  return cfg;
}

SimConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file '" + path + "'");
  return parse_config(f);
}

}  // namespace rica
