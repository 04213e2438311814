#include "rica/estimators.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace rica {

namespace {

std::string strip(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_top_level(const std::string& s) {
  std::vector<std::string> parts;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

bool valid_scatter(const std::string& s) {
  return s == "cov" || s == "cov4" || s == "tyler" || s == "huber";
}

ScatterMatrix make_scatter(const std::string& name, const Eigen::MatrixXd& x) {
  if (name == "cov") return cov_scatter(x);
  if (name == "cov4") return cov4_scatter(x);
  // robust M-scatters are symmetrized so the independent-components property
  // holds under asymmetric components
  if (name == "tyler") {
    return symmetrize([](const Eigen::MatrixXd& d, const Eigen::VectorXd& c) {
      return tyler_scatter(d, c);
    }, x);
  }
  if (name == "huber") {
    return symmetrize([](const Eigen::MatrixXd& d, const Eigen::VectorXd& c) {
      return huber_m_scatter(d, c);
    }, x);
  }
  throw ConfigError("unknown scatter '" + name + "'");
}

}  // namespace

EstimatorSpec parse_estimator(const std::string& text) {
  const std::string s = strip(text);
  EstimatorSpec spec;
  spec.label = s;

  std::string head = s, body;
  const auto open = s.find('(');
  if (open != std::string::npos) {
    if (s.back() != ')') throw ParseError("estimator '" + s + "': unbalanced parentheses");
    head = strip(s.substr(0, open));
    body = s.substr(open + 1, s.size() - open - 2);
  }

  if (head == "fobi") {
    spec.kind = EstimatorSpec::Kind::kFobi;
    return spec;
  }
  if (head == "fastica") {
    spec.kind = EstimatorSpec::Kind::kFastIca;
    return spec;
  }
  if (head == "twoscatter") {
    spec.kind = EstimatorSpec::Kind::kTwoScatter;
    const auto parts = split_top_level(body);
    if (parts.size() != 2) throw ParseError("twoscatter: expected two scatter names");
    spec.scatter_a = strip(parts[0]);
    spec.scatter_b = strip(parts[1]);
    if (!valid_scatter(spec.scatter_a) || !valid_scatter(spec.scatter_b)) {
      throw ParseError("twoscatter: scatters must be cov|cov4|tyler|huber");
    }
    return spec;
  }
  if (head == "r") {
    spec.kind = EstimatorSpec::Kind::kR;
    std::map<std::string, std::string> args;
    for (const auto& piece : split_top_level(body)) {
      if (strip(piece).empty()) continue;
      const auto eq = piece.find('=');
      if (eq == std::string::npos) throw ParseError("r(...): expected key=value in '" + piece + "'");
      args[strip(piece.substr(0, eq))] = strip(piece.substr(eq + 1));
    }
    const auto prelim_it = args.find("prelim");
    spec.preliminary = std::make_shared<EstimatorSpec>(
        parse_estimator(prelim_it == args.end() ? "fobi" : prelim_it->second));
    if (spec.preliminary->kind == EstimatorSpec::Kind::kR) {
      throw ParseError("r(...): preliminary cannot itself be an r-estimator");
    }
    try {
      if (args.count("steps")) spec.steps = std::stoi(args.at("steps"));
      if (args.count("c")) spec.c = std::stod(args.at("c"));
      if (args.count("lambda_max")) spec.lambda_max = std::stod(args.at("lambda_max"));
    } catch (const std::exception&) {
      throw ParseError("r(...): bad numeric argument");
    }
    if (spec.steps < 0) throw ParseError("r(...): steps must be >= 0");
    if (args.count("scores")) {
      const std::string& sc = args.at("scores");
      if (sc == "skewt") {
        spec.scores = ReferenceScores::kSkewT;
      } else if (sc == "gauss") {
        spec.scores = ReferenceScores::kGaussian;
      } else {
        throw ParseError("r(...): scores must be skewt or gauss");
      }
    }
    return spec;
  }
  throw ParseError("unknown estimator '" + head + "'");
}

EstimatorOutcome run_estimator(const EstimatorSpec& spec, const Eigen::MatrixXd& x,
                               const RunKnobs& knobs) {
  switch (spec.kind) {
    case EstimatorSpec::Kind::kFobi:
      return {fobi(x).matrix(), ""};
    case EstimatorSpec::Kind::kFastIca: {
      FastIcaReport rep;
      const MixingMatrix m = fastica_symmetric(x, 200, 1e-6, knobs.seed, &rep);
      std::string flags;
      if (rep.restarts > 0) flags = "fastica-restarts=" + std::to_string(rep.restarts);
      return {m.matrix(), flags};
    }
    case EstimatorSpec::Kind::kTwoScatter: {
      const ScatterMatrix sa = make_scatter(spec.scatter_a, x);
      const ScatterMatrix sb = make_scatter(spec.scatter_b, x);
      return {two_scatter_estimator(sa, sb).matrix(), ""};
    }
    case EstimatorSpec::Kind::kR: {
      EstimatorOutcome pre = run_estimator(*spec.preliminary, x, knobs);
      REstimatorOptions opt;
      opt.steps = spec.steps;
      opt.c = spec.c.value_or(knobs.c);
      opt.lambda_max = spec.lambda_max.value_or(knobs.lambda_max);
      opt.scores = spec.scores;
      const REstimatorResult res =
          data_driven_r_estimator(x, MixingMatrix::from_canonical(pre.estimate), opt);
      std::string flags = pre.flags;
      const std::string rflags = res.flags();
      if (!rflags.empty()) flags += (flags.empty() ? "" : ";") + rflags;
      return {res.estimate.matrix(), flags};
    }
  }
  throw ConfigError("run_estimator: bad spec");
}

}  // namespace rica
