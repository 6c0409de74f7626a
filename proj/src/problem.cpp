#include "madspip/problem.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <mutex>
#include <sstream>

namespace madspip {

bool Bounds::contains(const Eigen::VectorXd& x) const {
  return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

void Problem::validate() const {
  if (n < 1) throw std::invalid_argument("problem needs at least one variable");
  if (m < 0 || p < 0) throw std::invalid_argument("constraint counts must be nonnegative");
  if (!evaluator) throw std::invalid_argument("problem has no evaluator");
  if (bounds) {
    if (bounds->lower.size() != n || bounds->upper.size() != n) {
      throw std::invalid_argument("bounds dimension mismatch");
    }
    if ((bounds->lower.array() > bounds->upper.array()).any()) {
      throw std::invalid_argument("lower bound exceeds upper bound");
    }
  }
}

bool Problem::within_bounds(const Eigen::VectorXd& x) const {
  return !bounds || bounds->contains(x);
}

Evaluation sanitize(const Problem& problem, const Eigen::VectorXd& point,
                    const RawOutputs& raw) {
  Evaluation e;
  e.point = point;
  if (raw.g.size() != problem.m || raw.h.size() != problem.p) {
    e.failed = true;
    e.diagnostic = "evaluator returned the wrong number of outputs";
    e.f = Evaluation::kInfinity;
    e.g = Eigen::VectorXd::Constant(problem.m, Evaluation::kInfinity);
    e.h = Eigen::VectorXd::Constant(problem.p, std::nan(""));
    return e;
  }
  e.f = raw.f;
  e.g = raw.g;
  e.h = raw.h;
  if (!std::isfinite(e.f)) {
    e.f = Evaluation::kInfinity;
    e.failed = true;
  }
  for (Eigen::Index l = 0; l < e.g.size(); ++l) {
    if (!std::isfinite(e.g(l))) {
      e.g(l) = Evaluation::kInfinity;
      e.failed = true;
    }
  }
  if (!e.h.allFinite()) e.failed = true;
  if (e.failed && e.diagnostic.empty()) e.diagnostic = "non-finite blackbox output";
  return e;
}

const Evaluation* Cache::find(const Key& key) const {
  std::shared_lock lock(*mutex_);
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

const Evaluation& Cache::insert(const Key& key, Evaluation evaluation) {
  std::unique_lock lock(*mutex_);
  auto it = index_.find(key);
  if (it != index_.end()) return entries_[it->second];
  evaluation.eval_index = std::int64_t(entries_.size()) + 1;
  entries_.push_back(std::move(evaluation));
  keys_.push_back(key);
  index_.emplace(key, entries_.size() - 1);
  return entries_.back();
}

std::int64_t Cache::eval_count() const {
  std::shared_lock lock(*mutex_);
  return std::int64_t(entries_.size());
}

Cache::Key bitwise_key(const Eigen::VectorXd& point) {
  Cache::Key key(std::size_t(point.size()));
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    key[std::size_t(i)] = Lattice::Coord(std::bit_cast<std::int64_t>(point(i)));
  }
  return key;
}

const Evaluation& evaluate(const Problem& problem, const Eigen::VectorXd& point,
                           const Cache::Key& key, Cache& cache) {
  if (const Evaluation* hit = cache.find(key)) return *hit;
  Evaluation e;
  try {
    e = sanitize(problem, point, problem.evaluator(point));
  } catch (const std::exception& ex) {
    e.point = point;
    e.failed = true;
    e.f = Evaluation::kInfinity;
    e.g = Eigen::VectorXd::Constant(problem.m, Evaluation::kInfinity);
    e.h = Eigen::VectorXd::Constant(problem.p, std::nan(""));
    e.diagnostic = ex.what();
  }
  return cache.insert(key, std::move(e));
}

const Evaluation& evaluate(const Problem& problem, const Eigen::VectorXd& point,
                           Cache& cache) {
  return evaluate(problem, point, bitwise_key(point), cache);
}

bool is_feasible(const Eigen::VectorXd& g, const Eigen::VectorXd& h, bool failed,
                 double eq_tol) {
  if (failed) return false;
  for (Eigen::Index l = 0; l < g.size(); ++l) {
    if (!(g(l) <= 0.0)) return false;
  }
  for (Eigen::Index j = 0; j < h.size(); ++j) {
    if (!(std::abs(h(j)) < eq_tol)) return false;
  }
  return true;
}

bool is_feasible(const Evaluation& eval, double eq_tol) {
  return is_feasible(eval.g, eval.h, eval.failed, eq_tol);
}

std::string format_point_line(const Eigen::VectorXd& point) {
  std::string line;
  char buf[64];
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", point(i));
    if (i > 0) line += ' ';
    line += buf;
  }
  line += '\n';
  return line;
}

namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

struct Fd {
  int fd = -1;
  Fd() = default;
  explicit Fd(int f) : fd(f) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }
  void reset() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

ExternalResult fail(std::string why) {
  ExternalResult r;
  r.failed = true;
  r.diagnostic = std::move(why);
  return r;
}

}  // namespace

ExternalResult run_external(const std::filesystem::path& executable,
                            const Eigen::VectorXd& point, int m, int p,
                            std::chrono::milliseconds timeout) {
  ignore_sigpipe();
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) return fail("pipe failed");
  Fd in_read(in_pipe[0]), in_write(in_pipe[1]);
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) return fail("pipe failed");
  Fd out_read(out_pipe[0]), out_write(out_pipe[1]);

  const std::string exe = executable.string();
  const pid_t pid = ::fork();
  if (pid < 0) return fail("fork failed");
  if (pid == 0) {
    ::dup2(in_read.fd, STDIN_FILENO);
    ::dup2(out_write.fd, STDOUT_FILENO);
    ::execl(exe.c_str(), exe.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  in_read.reset();
  out_write.reset();

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  auto remaining_ms = [&] {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    return std::max<long long>(0, left.count());
  };

  const std::string line = format_point_line(point);
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t w = ::write(in_write.fd, line.data() + written, line.size() - written);
    if (w < 0) {
      if (errno == EINTR) continue;
      break;  // child closed stdin early; its exit status decides
    }
    written += std::size_t(w);
  }
  in_write.reset();

  std::string output;
  bool timed_out = false;
  char buf[4096];
  while (output.find('\n') == std::string::npos) {
    pollfd pfd{out_read.fd, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, int(remaining_ms()));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) {
      timed_out = true;
      break;
    }
    const ssize_t r = ::read(out_read.fd, buf, sizeof buf);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) break;
    output.append(buf, std::size_t(r));
  }
  out_read.reset();

  int status = 0;
  bool exited = false;
  while (!timed_out) {
    const pid_t done = ::waitpid(pid, &status, WNOHANG);
    if (done == pid) {
      exited = true;
      break;
    }
    if (remaining_ms() == 0) {
      timed_out = true;
      break;
    }
    ::usleep(1000);
  }
  if (!exited) {
    ::kill(pid, SIGKILL);
    ::waitpid(pid, &status, 0);
  }
  if (timed_out) return fail("evaluator timed out");
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    return fail("evaluator exited with status " +
                std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
  }

  const std::string first_line = output.substr(0, output.find('\n'));
  std::istringstream in(first_line);
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') {
      return fail("malformed evaluator output: '" + first_line + "'");
    }
    values.push_back(v);
  }
  if (values.size() != std::size_t(1 + m + p)) {
    return fail("expected " + std::to_string(1 + m + p) + " outputs, got '" +
                first_line + "'");
  }
  ExternalResult result;
  result.outputs.f = values[0];
  result.outputs.g = Eigen::Map<const Eigen::VectorXd>(values.data() + 1, m);
  result.outputs.h = Eigen::Map<const Eigen::VectorXd>(values.data() + 1 + m, p);
  return result;
}

Evaluator external_evaluator(std::filesystem::path executable, int m, int p,
                             std::chrono::milliseconds timeout) {
  return [executable = std::move(executable), m, p, timeout](const Eigen::VectorXd& x) {
    ExternalResult r = run_external(executable, x, m, p, timeout);
    if (r.failed) throw EvaluationError(r.diagnostic);
    return r.outputs;
  };
}

const char* to_string(RowStatus status) {
  switch (status) {
    case RowStatus::initial: return "initial";
    case RowStatus::search_success: return "search-success";
    case RowStatus::poll_success: return "poll-success";
    case RowStatus::unsuccessful: return "unsuccessful";
    case RowStatus::cache_hit: return "cache-hit";
    case RowStatus::rejected_bounds: return "rejected-bounds";
    case RowStatus::failed: return "failed";
  }
  return "unknown";
}

RowStatus row_status_from_string(const std::string& text) {
  for (RowStatus s : {RowStatus::initial, RowStatus::search_success, RowStatus::poll_success,
                      RowStatus::unsuccessful, RowStatus::cache_hit,
                      RowStatus::rejected_bounds, RowStatus::failed}) {
    if (text == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown row status '" + text + "'");
}

nlohmann::ordered_json json_real(double value) {
  if (std::isfinite(value)) return value;
  if (std::isnan(value)) return "nan";
  return value > 0 ? "inf" : "-inf";
}

double real_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::nan("");
  }
  throw std::invalid_argument("expected an extended real, got " + j.dump());
}

namespace {

nlohmann::ordered_json json_vector(const Eigen::VectorXd& v) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(json_real(v(i)));
  return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected an array");
  Eigen::VectorXd v(Eigen::Index(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(Eigen::Index(i)) = real_from_json(j[i]);
  return v;
}

}  // namespace

nlohmann::ordered_json HistoryRow::to_json() const {
  nlohmann::ordered_json j;
  j["eval_index"] = eval_index ? nlohmann::ordered_json(*eval_index) : nullptr;
  j["x"] = json_vector(x);
  const bool evaluated = status != RowStatus::rejected_bounds;
  j["f"] = evaluated ? json_real(f) : nullptr;
  j["g"] = evaluated ? json_vector(g) : nullptr;
  j["h"] = evaluated ? json_vector(h) : nullptr;
  j["cint"] = evaluated ? json_real(cint) : nullptr;
  j["cext"] = evaluated ? json_real(cext) : nullptr;
  j["rho"] = rho ? json_real(*rho) : nullptr;
  j["delta_frame"] = json_real(delta_frame);
  j["incumbent"] = incumbent;
  j["iteration"] = iteration;
  j["status"] = to_string(status);
  return j;
}

HistoryRow HistoryRow::from_json(const nlohmann::json& j) {
  HistoryRow row;
  if (!j.at("eval_index").is_null()) row.eval_index = j.at("eval_index").get<std::int64_t>();
  row.x = vector_from_json(j.at("x"));
  row.status = row_status_from_string(j.at("status").get<std::string>());
  if (row.status != RowStatus::rejected_bounds) {
    row.f = real_from_json(j.at("f"));
    row.g = vector_from_json(j.at("g"));
    row.h = vector_from_json(j.at("h"));
    row.cint = real_from_json(j.at("cint"));
    row.cext = real_from_json(j.at("cext"));
    row.failed = row.status == RowStatus::failed || !std::isfinite(row.f) ||
                 !row.g.allFinite() || !row.h.allFinite();
  }
  if (!j.at("rho").is_null()) row.rho = real_from_json(j.at("rho"));
  row.delta_frame = real_from_json(j.at("delta_frame"));
  row.incumbent = j.at("incumbent").get<bool>();
  row.iteration = j.at("iteration").get<std::int64_t>();
  return row;
}

}  // namespace madspip
