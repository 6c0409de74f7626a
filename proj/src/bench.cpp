#include "madspip/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace madspip {

std::string InstanceKey::instance() const {
  return problem + "/" + x0_id + "/" + std::to_string(seed);
}

std::string InstanceKey::str() const {
  return problem + "__" + x0_id + "__s" + std::to_string(seed) + "__" + to_string(mode);
}

RunTrace trace_of(const RunRecord& record, const InstanceKey& key,
                  std::optional<double> known_f_star) {
  RunTrace t;
  t.key = key;
  t.n = record.n;
  t.m = record.m;
  t.p = record.p;
  t.outcome = record.outcome;
  t.known_f_star = known_f_star;
  std::set<std::int64_t> seen;
  for (const HistoryRow& row : record.rows) {
    if (!row.eval_index || row.status == RowStatus::cache_hit ||
        row.status == RowStatus::rejected_bounds) {
      continue;
    }
    if (!seen.insert(*row.eval_index).second) continue;
    t.evals.push_back(TraceEval{*row.eval_index, row.f, row.g, row.h, row.failed});
  }
  std::sort(t.evals.begin(), t.evals.end(),
            [](const TraceEval& a, const TraceEval& b) { return a.eval_index < b.eval_index; });
  return t;
}

std::vector<BenchRun> run_matrix(const std::vector<Instance>& instances,
                                 const std::vector<Mode>& modes, std::int64_t budget,
                                 const SolverConfig& base, unsigned workers,
                                 const std::set<std::string>& skip,
                                 const std::function<void(const BenchRun&)>& on_done) {
  if (instances.empty() || modes.empty()) {
    throw std::invalid_argument("run_matrix needs instances and modes");
  }
  if (budget < 1) throw std::invalid_argument("budget must be positive");

  struct Job {
    const Instance* instance;
    InstanceKey key;
  };
  std::vector<Job> jobs;
  for (const Instance& inst : instances) {
    for (Mode mode : modes) {
      InstanceKey key{inst.problem->name, inst.x0_id, inst.seed, mode};
      if (skip.count(key.str())) continue;
      jobs.push_back(Job{&inst, key});
    }
  }

  std::vector<BenchRun> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex done_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      SolverConfig config = base;
      config.seed = job.key.seed;
      config.mode = job.key.mode;
      config.max_evaluations = budget;
      BenchRun run;
      run.key = job.key;
      if (job.instance->optimum) run.known_f_star = job.instance->optimum->f_star;
      run.record = solve(*job.instance->problem, job.instance->x0, config);
      results[i] = std::move(run);
      if (on_done) {
        std::lock_guard lock(done_mutex);
        on_done(results[i]);
      }
    }
  };

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = unsigned(std::min<std::size_t>(workers, std::max<std::size_t>(1, jobs.size())));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  return results;
}

void write_history(const std::filesystem::path& path, const BenchRun& run) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  nlohmann::ordered_json header;
  header["header"] = true;
  header["problem"] = run.key.problem;
  header["x0_id"] = run.key.x0_id;
  header["seed"] = run.key.seed;
  header["mode"] = to_string(run.key.mode);
  header["n"] = run.record.n;
  header["m"] = run.record.m;
  header["p"] = run.record.p;
  header["outcome"] = to_string(run.record.outcome);
  header["evaluations"] = run.record.evaluations;
  header["known_f_star"] =
      run.known_f_star ? nlohmann::ordered_json(*run.known_f_star) : nullptr;
  header["error"] = run.record.error;
  out << header.dump() << '\n' << run.record.history_jsonl();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

RunTrace read_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty history");
  RunTrace t;
  try {
    const nlohmann::json header = nlohmann::json::parse(line);
    if (!header.value("header", false)) throw std::runtime_error("missing header line");
    t.key.problem = header.at("problem").get<std::string>();
    t.key.x0_id = header.at("x0_id").get<std::string>();
    t.key.seed = header.at("seed").get<std::uint64_t>();
    t.key.mode = mode_from_string(header.at("mode").get<std::string>());
    t.n = header.at("n").get<int>();
    t.m = header.at("m").get<int>();
    t.p = header.at("p").get<int>();
    t.outcome = outcome_from_string(header.at("outcome").get<std::string>());
    if (!header.at("known_f_star").is_null()) t.known_f_star = header.at("known_f_star").get<double>();
  } catch (const std::exception& ex) {
    throw std::runtime_error(path.string() + ":1: " + ex.what());
  }
  RunRecord record;
  record.n = t.n;
  record.m = t.m;
  record.p = t.p;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      HistoryRow row = HistoryRow::from_json(nlohmann::json::parse(line));
      if (row.status != RowStatus::rejected_bounds &&
          (row.g.size() != t.m || row.h.size() != t.p || row.x.size() != t.n)) {
        throw std::runtime_error("row dimensions disagree with the header");
      }
      record.rows.push_back(std::move(row));
    } catch (const std::exception& ex) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  RunTrace parsed = trace_of(record, t.key, t.known_f_star);
  parsed.outcome = t.outcome;
  return parsed;
}

namespace {

int group_of(std::int64_t eval_index, int n) {
  return int((eval_index + n) / (n + 1));  // ceil(eval_index / (n + 1))
}

}  // namespace

std::optional<int> convergence_index(const RunTrace& run, double f_star, double f_ref,
                                     double tau, double eq_tol) {
  if (!(tau > 0)) throw std::invalid_argument("tau must be positive");
  if (f_ref < f_star) throw std::invalid_argument("f_ref must not be below f_star");
  const double threshold = f_star + tau * (f_ref - f_star);
  for (const TraceEval& e : run.evals) {
    if (is_feasible(e.g, e.h, e.failed, eq_tol) && e.f <= threshold) {
      return group_of(e.eval_index, run.n);
    }
  }
  return std::nullopt;
}

std::optional<int> feasibility_index(const RunTrace& run, double eq_tol) {
  for (const TraceEval& e : run.evals) {
    if (is_feasible(e.g, e.h, e.failed, eq_tol)) return group_of(e.eval_index, run.n);
  }
  return std::nullopt;
}

std::map<std::string, InstanceReference> reference_values(const std::vector<RunTrace>& runs,
                                                          double eq_tol) {
  struct Acc {
    std::optional<double> best;
    std::optional<double> known;
    std::optional<double> x0_feasible_f;
    std::optional<double> max_first_feasible;
  };
  std::map<std::string, Acc> acc;
  for (const RunTrace& run : runs) {
    Acc& a = acc[run.key.instance()];
    if (run.known_f_star) a.known = a.known ? std::min(*a.known, *run.known_f_star) : *run.known_f_star;
    bool first_feasible_seen = false;
    for (const TraceEval& e : run.evals) {
      if (!is_feasible(e.g, e.h, e.failed, eq_tol)) continue;
      if (e.eval_index == 1) a.x0_feasible_f = e.f;
      if (!first_feasible_seen) {
        first_feasible_seen = true;
        a.max_first_feasible =
            a.max_first_feasible ? std::max(*a.max_first_feasible, e.f) : e.f;
      }
      a.best = a.best ? std::min(*a.best, e.f) : e.f;
    }
  }
  std::map<std::string, InstanceReference> refs;
  for (const auto& [key, a] : acc) {
    if (!a.best) continue;
    InstanceReference r;
    r.f_star = a.known ? std::min(*a.best, *a.known) : *a.best;
    r.f_ref = a.x0_feasible_f ? *a.x0_feasible_f : *a.max_first_feasible;
    refs.emplace(key, r);
  }
  return refs;
}

int max_groups(const std::vector<RunTrace>& runs) {
  int k = 0;
  for (const RunTrace& run : runs) {
    if (!run.evals.empty()) k = std::max(k, group_of(run.evals.back().eval_index, run.n));
  }
  return k;
}

namespace {

std::set<Mode> modes_of(const std::vector<RunTrace>& runs) {
  std::set<Mode> modes;
  for (const RunTrace& r : runs) modes.insert(r.key.mode);
  return modes;
}

ProfileCurve step_curve(const std::vector<std::optional<int>>& indices, std::size_t total,
                        int groups, double tau, std::string label) {
  ProfileCurve c;
  c.tau = tau;
  c.label = std::move(label);
  for (int k = 0; k <= groups; ++k) {
    std::size_t solved = 0;
    for (const auto& idx : indices) {
      if (idx && *idx <= k) ++solved;
    }
    c.groups.push_back(k);
    c.fraction.push_back(total == 0 ? 0.0 : double(solved) / double(total));
  }
  return c;
}

std::vector<ProfileCurve> sorted_by_label(std::vector<ProfileCurve> curves) {
  std::sort(curves.begin(), curves.end(),
            [](const ProfileCurve& a, const ProfileCurve& b) { return a.label < b.label; });
  return curves;
}

}  // namespace

std::vector<ProfileCurve> data_profile(const std::vector<RunTrace>& runs, double tau,
                                       const std::map<std::string, InstanceReference>& refs,
                                       double eq_tol, std::optional<int> groups) {
  if (runs.empty()) throw std::invalid_argument("no runs to profile");
  const int k_max = groups.value_or(max_groups(runs));
  std::vector<ProfileCurve> curves;
  for (Mode mode : modes_of(runs)) {
    std::map<std::string, const RunTrace*> by_instance;
    for (const RunTrace& r : runs) {
      if (r.key.mode == mode) by_instance[r.key.instance()] = &r;
    }
    std::vector<std::optional<int>> indices;
    for (const auto& [key, ref] : refs) {
      auto it = by_instance.find(key);
      indices.push_back(it == by_instance.end()
                            ? std::nullopt
                            : convergence_index(*it->second, ref.f_star, ref.f_ref, tau, eq_tol));
    }
    curves.push_back(step_curve(indices, refs.size(), k_max, tau, to_string(mode)));
  }
  return sorted_by_label(std::move(curves));
}

std::vector<ProfileCurve> data_profile(const std::vector<RunTrace>& runs, double tau,
                                       double eq_tol, std::optional<int> groups) {
  return data_profile(runs, tau, reference_values(runs, eq_tol), eq_tol, groups);
}

std::vector<ProfileCurve> feasibility_profile(const std::vector<RunTrace>& runs,
                                              double eq_tol, std::optional<int> groups) {
  if (runs.empty()) throw std::invalid_argument("no runs to profile");
  const int k_max = groups.value_or(max_groups(runs));
  std::vector<ProfileCurve> curves;
  for (Mode mode : modes_of(runs)) {
    std::vector<std::optional<int>> indices;
    for (const RunTrace& r : runs) {
      if (r.key.mode == mode) indices.push_back(feasibility_index(r, eq_tol));
    }
    curves.push_back(step_curve(indices, indices.size(), k_max, 0.0, to_string(mode)));
  }
  return sorted_by_label(std::move(curves));
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string svg_chart(const std::vector<ProfileCurve>& curves) {
  constexpr double width = 640, height = 420, left = 60, right = 150, top = 30, bottom = 50;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  int k_max = 1;
  for (const auto& c : curves) {
    if (!c.groups.empty()) k_max = std::max(k_max, c.groups.back());
  }
  auto sx = [&](double k) { return left + plot_w * k / k_max; };
  auto sy = [&](double f) { return top + plot_h * (1.0 - f); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
    << "\" fill=\"white\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << sy(0) << "\" x2=\"" << sx(k_max) << "\" y2=\""
    << sy(0) << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << sy(0) << "\" x2=\"" << left << "\" y2=\"" << sy(1)
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double f = i / 4.0;
    s << "<text x=\"" << left - 8 << "\" y=\"" << sy(f) + 4 << "\" text-anchor=\"end\">" << f
      << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double k = k_max * i / 4.0;
    s << "<text x=\"" << sx(k) << "\" y=\"" << sy(0) + 18 << "\" text-anchor=\"middle\">"
      << std::llround(k) << "</text>\n";
  }
  s << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 10
    << "\" text-anchor=\"middle\">groups of n+1 evaluations</text>\n";
  s << "<text x=\"15\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 15 "
    << top + plot_h / 2 << ")\" text-anchor=\"middle\">fraction of instances</text>\n";
  if (!curves.empty() && curves.front().tau > 0) {
    s << "<text x=\"" << left + plot_w / 2 << "\" y=\"18\" text-anchor=\"middle\">tau = "
      << num(curves.front().tau) << "</text>\n";
  }
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const ProfileCurve& curve = curves[c];
    const char* color = colors[c % std::size(colors)];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < curve.groups.size(); ++i) {
      if (i > 0) s << sx(curve.groups[i]) << "," << sy(curve.fraction[i - 1]) << " ";
      s << sx(curve.groups[i]) << "," << sy(curve.fraction[i]) << " ";
    }
    s << "\"/>\n";
    const double ly = top + 20.0 * double(c);
    s << "<line x1=\"" << width - right + 10 << "\" y1=\"" << ly << "\" x2=\""
      << width - right + 30 << "\" y2=\"" << ly << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << width - right + 35 << "\" y=\"" << ly + 4 << "\">" << curve.label
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace

void export_curves(const std::vector<ProfileCurve>& curves, ExportFormat format,
                   const std::filesystem::path& path) {
  if (curves.empty()) throw std::invalid_argument("no curves to export");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (format == ExportFormat::csv) {
    out << "label,tau,k,fraction\n";
    for (const ProfileCurve& c : curves) {
      for (std::size_t i = 0; i < c.groups.size(); ++i) {
        out << c.label << ',' << num(c.tau) << ',' << c.groups[i] << ',' << num(c.fraction[i])
            << '\n';
      }
    }
  } else {
    out << svg_chart(curves);
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<ProfileCurve> import_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "label,tau,k,fraction") {
    throw std::runtime_error(path.string() + ": unexpected CSV header");
  }
  std::vector<ProfileCurve> curves;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string label, tau, k, fraction;
    if (!std::getline(row, label, ',') || !std::getline(row, tau, ',') ||
        !std::getline(row, k, ',') || !std::getline(row, fraction)) {
      throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    }
    const double tau_v = std::stod(tau);
    if (curves.empty() || curves.back().label != label || curves.back().tau != tau_v) {
      curves.push_back(ProfileCurve{{}, {}, tau_v, label});
    }
    curves.back().groups.push_back(std::stoi(k));
    curves.back().fraction.push_back(std::stod(fraction));
  }
  return curves;
}

}  // namespace madspip
