#include "madspip/suite.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace madspip {

namespace {

Bounds box(int n, double lo, double hi) {
  return Bounds{Eigen::VectorXd::Constant(n, lo), Eigen::VectorXd::Constant(n, hi)};
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::VectorXd polar(double r, double angle) {
  return Eigen::Vector2d(r * std::cos(angle), r * std::sin(angle));
}

BuiltinProblem unit_disk() {
  BuiltinProblem b;
  b.problem.name = "unit-disk";
  b.problem.n = 2;
  b.problem.m = 1;
  b.problem.bounds = box(2, -3, 3);
  b.problem.evaluator = [](const Eigen::VectorXd& x) {
    RawOutputs out;
    out.f = x(0) + x(1);
    out.g = Eigen::VectorXd::Constant(1, x.squaredNorm() - 1.0);
    out.h.resize(0);
    return out;
  };
  b.optimum.f_star = -std::numbers::sqrt2;
  // one ulp inside so that g(x_star) <= 0 in floating point
  b.optimum.x_star =
      Eigen::Vector2d::Constant(std::nextafter(-std::numbers::sqrt2 / 2, 0.0));
  b.optimum.tolerance_note = "linear objective over the disk, optimum on the boundary";
  b.sample_feasible = [](std::mt19937_64& rng) {
    const double r = uniform(rng, 0.2, 0.9);
    return Eigen::VectorXd(polar(r, uniform(rng, 0, 2 * std::numbers::pi)));
  };
  b.make_infeasible = [](const Eigen::VectorXd& x) {
    const double r = x.norm();
    return Eigen::VectorXd(x * ((2.0 - r) / r));
  };
  return b;
}

BuiltinProblem sphere_eq(int n) {
  BuiltinProblem b;
  b.problem.name = "sphere-eq-" + std::to_string(n);
  b.problem.n = n;
  b.problem.p = 1;
  b.problem.bounds = box(n, -3, 3);
  b.problem.evaluator = [](const Eigen::VectorXd& x) {
    RawOutputs out;
    out.f = x.squaredNorm();
    out.g.resize(0);
    out.h = Eigen::VectorXd::Constant(1, x.sum() - 1.0);
    return out;
  };
  b.optimum.f_star = 1.0 / n;
  b.optimum.x_star = Eigen::VectorXd::Constant(n, 1.0 / n);
  b.optimum.tolerance_note = "x_i = 1/n by symmetry";
  b.sample_feasible = [n](std::mt19937_64& rng) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = uniform(rng, -1, 1);
    x.array() += (1.0 - x.sum()) / n;
    return x;
  };
  b.make_infeasible = [n](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = x;
    y.array() += 1.5 / n;  // sum moves from 1 to 2.5
    return y;
  };
  return b;
}

BuiltinProblem mixed_kkt() {
  BuiltinProblem b;
  b.problem.name = "mixed-kkt";
  b.problem.n = 3;
  b.problem.m = 1;
  b.problem.p = 1;
  b.problem.bounds = box(3, -3, 3);
  b.problem.evaluator = [](const Eigen::VectorXd& x) {
    RawOutputs out;
    out.f = x.squaredNorm();
    out.g = Eigen::VectorXd::Constant(1, x(0) - 0.2);
    out.h = Eigen::VectorXd::Constant(1, x.sum() - 1.0);
    return out;
  };
  b.optimum.f_star = 0.36;
  b.optimum.x_star = Eigen::Vector3d(0.2, 0.4, 0.4);
  b.optimum.tolerance_note = "KKT point with x1 = 0.2 active, multipliers (0.4, -0.8)";
  b.sample_feasible = [](std::mt19937_64& rng) {
    Eigen::VectorXd x(3);
    x(0) = uniform(rng, -1, 0.1);
    x(1) = uniform(rng, -1, 1);
    x(2) = 1.0 - x(0) - x(1);
    return x;
  };
  b.make_infeasible = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = x;
    y(0) = 0.4 - x(0);  // mirror image across x1 = 0.2
    return y;
  };
  return b;
}

BuiltinProblem maxabs_lin() {
  BuiltinProblem b;
  b.problem.name = "maxabs-lin";
  b.problem.n = 2;
  b.problem.m = 1;
  b.problem.bounds = box(2, -3, 3);
  b.problem.evaluator = [](const Eigen::VectorXd& x) {
    RawOutputs out;
    out.f = std::max(std::abs(x(0)), std::abs(x(1)));
    out.g = Eigen::VectorXd::Constant(1, 1.0 - x(0) - x(1));
    out.h.resize(0);
    return out;
  };
  b.optimum.f_star = 0.5;
  b.optimum.x_star = Eigen::Vector2d(0.5, 0.5);
  b.optimum.tolerance_note = "max(|x1|,|x2|) >= (x1+x2)/2 >= 1/2";
  b.sample_feasible = [](std::mt19937_64& rng) {
    Eigen::VectorXd x(2);
    do {
      x << uniform(rng, 0, 1.5), uniform(rng, 0, 1.5);
    } while (x.sum() < 1.1);
    return x;
  };
  b.make_infeasible = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd(x.array() - (x.sum() - 1.0));
  };
  return b;
}

BuiltinProblem two_ring() {
  BuiltinProblem b;
  b.problem.name = "two-ring";
  b.problem.n = 2;
  b.problem.m = 2;
  b.problem.bounds = box(2, -3, 3);
  b.problem.evaluator = [](const Eigen::VectorXd& x) {
    RawOutputs out;
    const double r2 = x.squaredNorm();
    out.f = x(1);
    out.g = Eigen::Vector2d(1.0 - r2, r2 - 4.0);
    out.h.resize(0);
    return out;
  };
  b.optimum.f_star = -2.0;
  b.optimum.x_star = Eigen::Vector2d(0.0, -2.0);
  b.optimum.tolerance_note = "lowest point of the outer circle";
  b.sample_feasible = [](std::mt19937_64& rng) {
    const double r = uniform(rng, 1.1, 1.9);
    return Eigen::VectorXd(polar(r, uniform(rng, 0, 2 * std::numbers::pi)));
  };
  b.make_infeasible = [](const Eigen::VectorXd& x) {
    const double r = x.norm();
    return Eigen::VectorXd(x * ((2.0 - r) / r));  // into the hole
  };
  return b;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<BuiltinProblem> builtin_problems() {
  return {unit_disk(), sphere_eq(3), sphere_eq(5), mixed_kkt(), maxabs_lin(), two_ring()};
}

std::optional<BuiltinProblem> find_builtin(const std::string& name) {
  const std::string key = lower(name);
  for (BuiltinProblem& b : builtin_problems()) {
    if (b.problem.name == key) return std::move(b);
  }
  return std::nullopt;
}

std::uint64_t stable_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Eigen::VectorXd builtin_x0(const BuiltinProblem& problem, const std::string& x0_id) {
  bool infeasible = false;
  std::string index;
  if (x0_id.rfind("feas-", 0) == 0) {
    index = x0_id.substr(5);
  } else if (x0_id.rfind("infeas-", 0) == 0) {
    infeasible = true;
    index = x0_id.substr(7);
  } else {
    throw std::invalid_argument("x0 id must be feas-<j> or infeas-<j>: '" + x0_id + "'");
  }
  if (index.empty() || !std::all_of(index.begin(), index.end(),
                                    [](unsigned char c) { return std::isdigit(c); })) {
    throw std::invalid_argument("malformed x0 id '" + x0_id + "'");
  }
  std::mt19937_64 rng(stable_hash(problem.problem.name + "/feas-" + index));
  Eigen::VectorXd x = problem.sample_feasible(rng);
  if (infeasible) x = problem.make_infeasible(x);
  if (problem.problem.bounds) {
    x = x.cwiseMax(problem.problem.bounds->lower).cwiseMin(problem.problem.bounds->upper);
  }
  return x;
}

std::vector<std::string> x0_ids(int count) {
  std::vector<std::string> ids;
  for (int i = 0; i < count; ++i) {
    ids.push_back((i % 2 == 0 ? "feas-" : "infeas-") + std::to_string(i / 2));
  }
  return ids;
}

std::vector<Instance> make_instances(const std::vector<BuiltinProblem>& problems,
                                     int x0_per_problem,
                                     const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (x0_per_problem < 1) throw std::invalid_argument("x0_per_problem must be positive");
  std::vector<Instance> instances;
  for (const BuiltinProblem& b : problems) {
    auto shared = std::make_shared<const Problem>(b.problem);
    for (const std::string& id : x0_ids(x0_per_problem)) {
      const Eigen::VectorXd x0 = builtin_x0(b, id);
      for (std::uint64_t seed : seeds) {
        instances.push_back(Instance{shared, b.optimum, id, x0, seed});
      }
    }
  }
  return instances;
}

Eigen::VectorXd parse_vector(const std::string& text) {
  std::vector<double> values;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) throw std::invalid_argument("empty entry in vector '" + text + "'");
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("not a number: '" + item + "'");
    }
    if (used != item.size()) throw std::invalid_argument("not a number: '" + item + "'");
    values.push_back(v);
  }
  if (values.empty()) throw std::invalid_argument("empty vector");
  return Eigen::Map<Eigen::VectorXd>(values.data(), Eigen::Index(values.size()));
}

ProblemFile load_problem_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open problem file " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) +
                                  ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto required = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::invalid_argument(std::string("problem file lacks '") + key + "'");
    return it->second;
  };

  ProblemFile pf;
  Problem& p = pf.problem;
  p.name = required("name");
  p.n = std::stoi(required("n"));
  p.m = kv.count("m") ? std::stoi(kv["m"]) : 0;
  p.p = kv.count("p") ? std::stoi(kv["p"]) : 0;
  if (kv.count("lower") || kv.count("upper")) {
    p.bounds = Bounds{parse_vector(required("lower")), parse_vector(required("upper"))};
  }
  if (kv.count("x0")) pf.x0 = parse_vector(kv["x0"]);
  std::filesystem::path exe = required("evaluator");
  if (exe.is_relative()) exe = path.parent_path() / exe;
  pf.evaluator_path = exe;
  const double timeout_s = kv.count("timeout") ? std::stod(kv["timeout"]) : 10.0;
  pf.timeout = std::chrono::milliseconds(std::int64_t(timeout_s * 1000));
  p.evaluator = external_evaluator(exe, p.m, p.p, pf.timeout);
  p.validate();
  return pf;
}

}  // namespace madspip
