#include "madspip/solver.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace madspip {

const char* to_string(Mode mode) {
  return mode == Mode::pip ? "pip" : "extreme-barrier";
}

Mode mode_from_string(const std::string& text) {
  if (text == "pip") return Mode::pip;
  if (text == "extreme-barrier" || text == "eb") return Mode::extreme_barrier;
  throw std::invalid_argument("unknown mode '" + text + "'");
}

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::running: return "running";
    case Outcome::budget_exhausted: return "budget-exhausted";
    case Outcome::delta_converged: return "delta-converged";
    case Outcome::rho_converged: return "rho-converged";
    case Outcome::error: return "error";
  }
  return "unknown";
}

Outcome outcome_from_string(const std::string& text) {
  for (Outcome o : {Outcome::running, Outcome::budget_exhausted, Outcome::delta_converged,
                    Outcome::rho_converged, Outcome::error}) {
    if (text == to_string(o)) return o;
  }
  throw std::invalid_argument("unknown outcome '" + text + "'");
}

void SolverConfig::validate() const {
  if (max_evaluations < 1) throw std::invalid_argument("max_evaluations must be >= 1");
  if (!(delta_stop > 0 && rho0 > 0 && rho_stop > 0 && eps_ext > 0 && eq_tol > 0)) {
    throw std::invalid_argument("tolerances must be positive");
  }
  if (delta0 && !(*delta0 > 0)) throw std::invalid_argument("delta0 must be positive");
  if (!(merit.theta_rho > 0 && merit.theta_rho < 1)) {
    throw std::invalid_argument("theta_rho must lie in (0,1)");
  }
  if (!(merit.beta > 1)) throw std::invalid_argument("beta must exceed 1");
  if (!(merit.b_int > 0 && merit.b_rho > 0 && merit.b_c > 0)) {
    throw std::invalid_argument("scaling constants must be positive");
  }
}

std::string RunRecord::history_jsonl() const {
  std::string out;
  for (const HistoryRow& row : rows) {
    out += row.to_json().dump();
    out += '\n';
  }
  return out;
}

ViolationSummary SolverState::violations_of(const Evaluation& e) const {
  if (config.mode == Mode::extreme_barrier) {
    // Every constraint is treated as interior for reporting.
    ViolationSummary s;
    const std::span<const double> g(e.g.data(), std::size_t(e.g.size()));
    s.phi_prox = phi_prox(g);
    s.c_int = c_int(g);
    s.c_ext = c_ext({}, std::span<const double>(e.h.data(), std::size_t(e.h.size())));
    s.merit = merit_of(e);
    return s;
  }
  return summarize(e.f, e.g, e.h, e.failed, partition, params);
}

double SolverState::merit_of(const Evaluation& e) const {
  if (config.mode == Mode::extreme_barrier) {
    if (e.failed) return kInf;
    for (Eigen::Index l = 0; l < e.g.size(); ++l) {
      if (!(e.g(l) <= 0.0)) return kInf;
    }
    return e.f;
  }
  return summarize(e.f, e.g, e.h, e.failed, partition, params).merit;
}

bool SolverState::should_stop() {
  if (record.outcome != Outcome::running) return true;
  if (cache.eval_count() >= config.max_evaluations) {
    record.outcome = Outcome::budget_exhausted;
  } else if (mesh.delta_frame < config.delta_stop ||
             !Lattice::representable(mesh.mesh_exponent())) {
    record.outcome = Outcome::delta_converged;
  } else if (config.mode == Mode::pip && params.rho < config.rho_stop) {
    record.outcome = Outcome::rho_converged;
  }
  return record.outcome != Outcome::running;
}

namespace {

double initial_delta(const Problem& problem, const SolverConfig& config) {
  if (config.delta0) return *config.delta0;
  if (!problem.bounds) return 1.0;
  double log_sum = 0.0;
  int count = 0;
  for (int i = 0; i < problem.n; ++i) {
    const double width = problem.bounds->upper(i) - problem.bounds->lower(i);
    if (width > 0 && std::isfinite(width)) {
      log_sum += std::log(width / 10.0);
      ++count;
    }
  }
  return count == 0 ? 1.0 : std::exp(log_sum / count);
}

HistoryRow make_row(const SolverState& state, const Evaluation& e, RowStatus status,
                    bool incumbent) {
  HistoryRow row;
  row.eval_index = e.eval_index;
  row.x = e.point;
  row.f = e.f;
  row.g = e.g;
  row.h = e.h;
  row.failed = e.failed;
  const ViolationSummary s = state.violations_of(e);
  row.cint = s.c_int;
  row.cext = s.c_ext;
  if (state.config.mode == Mode::pip) row.rho = state.params.rho;
  row.delta_frame = state.mesh.delta_frame;
  row.incumbent = incumbent;
  row.iteration = state.iteration;
  row.status = status;
  return row;
}

HistoryRow rejected_row(const SolverState& state, const Eigen::VectorXd& x) {
  HistoryRow row;
  row.x = x;
  if (state.config.mode == Mode::pip) row.rho = state.params.rho;
  row.delta_frame = state.mesh.delta_frame;
  row.iteration = state.iteration;
  row.status = RowStatus::rejected_bounds;
  return row;
}

// Evaluates a candidate (or fetches it from the cache) and appends a row.
// Returns nullptr when the budget forbids a new evaluation.
const Evaluation* probe(SolverState& state, const Candidate& c, bool& was_hit,
                        std::size_t& row_index) {
  const Evaluation* hit = state.cache.find(c.offset);
  was_hit = hit != nullptr;
  if (!hit && state.cache.eval_count() >= state.config.max_evaluations) return nullptr;
  const Evaluation& e =
      hit ? *hit : evaluate(*state.problem, c.point, c.offset, state.cache);
  const RowStatus status =
      hit ? RowStatus::cache_hit : (e.failed ? RowStatus::failed : RowStatus::unsuccessful);
  row_index = state.record.rows.size();
  state.record.rows.push_back(make_row(state, e, status, false));
  return &e;
}

std::size_t index_of(const Evaluation& e) {
  return std::size_t(e.eval_index - 1);
}

void switch_partition(SolverState& state, IterationLog& log) {
  const Evaluation& inc = state.incumbent_eval();
  bool changed = false;
  const std::vector<std::size_t> exterior = state.partition.exterior();
  for (std::size_t l : exterior) {
    if (inc.g(Eigen::Index(l)) <= -state.config.eps_ext) {
      state.partition.move_to_interior(l);
      state.record.partition_trace.emplace_back(state.iteration, l);
      changed = true;
    }
  }
  if (changed) {
    ++state.partition_version;
    log.partition_changed = true;
    reselect_incumbent(state);
  }
}

void finalize(SolverState& state) {
  RunRecord& r = state.record;
  r.evaluations = state.cache.eval_count();
  r.final_rho = state.params.rho;
  r.final_delta = state.mesh.delta_frame;
  for (const Evaluation& e : state.cache.entries()) {
    if (is_feasible(e, state.config.eq_tol) &&
        (!r.best_feasible_f || e.f < *r.best_feasible_f)) {
      r.best_feasible_f = e.f;
    }
  }
  if (state.config.invariant_checks) r.invariants = check_invariants(r);
}

}  // namespace

SolverState init_state(const Problem& problem, const Eigen::VectorXd& x0,
                       const SolverConfig& config) {
  config.validate();
  problem.validate();
  if (x0.size() != problem.n) throw InitializationError("x0 has the wrong dimension");
  if (!problem.within_bounds(x0)) throw InitializationError("x0 lies outside the bounds");
  if (config.mode == Mode::extreme_barrier && problem.p > 0) {
    throw InitializationError("extreme barrier requires a problem without equalities");
  }

  SolverState state;
  state.problem = &problem;
  state.config = config;
  const double delta0 = initial_delta(problem, config);
  state.lattice = Lattice(x0, delta0);
  state.mesh = MeshState::initial(delta0, config.theta_delta);
  state.directions = DirectionGenerator(config.seed);
  state.params = config.merit;
  state.params.rho = config.rho0;

  RunRecord& r = state.record;
  r.problem = problem.name;
  r.n = problem.n;
  r.m = problem.m;
  r.p = problem.p;
  r.mode = config.mode;
  r.seed = config.seed;
  r.theta_rho = state.params.theta_rho;

  const Lattice::Offset origin(std::size_t(problem.n), 0);
  const Evaluation& first = evaluate(problem, state.lattice.point(origin), origin, state.cache);
  state.incumbent = 0;
  if (first.failed) {
    throw InitializationError("evaluation of x0 failed: " + first.diagnostic);
  }

  if (config.mode == Mode::pip) {
    std::vector<std::size_t> interior;
    for (int l = 0; l < problem.m; ++l) {
      if (first.g(l) <= -config.eps_ext) interior.push_back(std::size_t(l));
    }
    state.partition = Partition(std::size_t(problem.m), interior);
    try {
      state.params.b_ext = compute_b_ext(first.f);
    } catch (const std::invalid_argument& ex) {
      throw InitializationError(ex.what());
    }
    r.rho_trace.emplace_back(0, state.params.rho);
  } else {
    state.partition = Partition(std::size_t(problem.m));
    if (!is_feasible(first, config.eq_tol)) {
      throw InitializationError("extreme barrier requires a feasible x0");
    }
  }
  r.initial_partition = state.partition;
  r.rows.push_back(make_row(state, first, RowStatus::initial, true));
  return state;
}

std::optional<Candidate> speculative_search(const SolverState& state) {
  if (!state.last_success) return std::nullopt;
  const int exponent = state.mesh.mesh_exponent();
  const StepVector steps =
      state.lattice.snap(Lattice::scale(*state.last_success, 2), exponent);
  if ((steps.array() == 0).all()) return std::nullopt;
  Candidate c;
  c.offset = Lattice::add(state.incumbent_offset(), state.lattice.offset_of(steps, exponent));
  c.point = state.lattice.point(c.offset);
  if (!state.problem->within_bounds(c.point)) return std::nullopt;
  if (state.cache.find(c.offset)) return std::nullopt;
  return c;
}

bool reselect_incumbent(SolverState& state) {
  const auto& entries = state.cache.entries();
  if (entries.empty()) throw std::logic_error("reselect on an empty cache");
  std::size_t best = state.incumbent;
  double best_merit = kInf;
  bool found = false;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double z = state.merit_of(entries[i]);
    if (z < best_merit) {  // strict: earlier eval_index wins ties
      best_merit = z;
      best = i;
      found = true;
    }
  }
  if (!found) {
    state.record.reselect_flagged = true;
    return false;
  }
  const bool changed = best != state.incumbent;
  state.incumbent = best;
  if (changed) state.last_success.reset();
  return changed;
}

IterationResult iterate(SolverState& state) {
  if (state.should_stop()) return IterationResult::stopped;

  const bool pip = state.config.mode == Mode::pip;
  const int exponent = state.mesh.mesh_exponent();
  const Evaluation& inc = state.incumbent_eval();
  const ViolationSummary inc_summary = state.violations_of(inc);

  IterationLog log;
  log.iteration = state.iteration;
  log.params = state.params;
  log.partition_version = state.partition_version;
  log.merit_start = state.merit_of(inc);
  log.incumbent_cint = inc_summary.c_int;
  log.phi_prox = inc_summary.phi_prox;
  log.has_interior = !state.partition.interior().empty();
  log.delta_frame = state.mesh.delta_frame;

  std::optional<Candidate> accepted;
  std::size_t accepted_row = 0;
  bool budget_hit = false;

  auto try_candidate = [&](const Candidate& c, bool from_poll) {
    bool was_hit = false;
    std::size_t row = 0;
    const Evaluation* e = probe(state, c, was_hit, row);
    if (!e) {
      budget_hit = true;
      return false;
    }
    const double z = state.merit_of(*e);
    if (from_poll) log.frame_cint.push_back(state.violations_of(*e).c_int);
    log.best_candidate_merit = std::min(log.best_candidate_merit, z);
    if (z < log.merit_start) {
      accepted = c;
      accepted_row = row;
      return true;
    }
    return false;
  };

  if (state.config.search_enabled) {
    if (std::optional<Candidate> c = speculative_search(state)) {
      if (try_candidate(*c, false)) log.by_search = true;
    }
  }

  if (!accepted && !budget_hit) {
    const auto directions = state.directions.poll_directions(state.problem->n, state.mesh);
    for (const PollDirection& d : directions) {
      Candidate c;
      c.offset = Lattice::add(state.incumbent_offset(), state.lattice.offset_of(d.steps, exponent));
      c.point = state.lattice.point(c.offset);
      if (!state.problem->within_bounds(c.point)) {
        state.record.rows.push_back(rejected_row(state, c.point));
        continue;
      }
      if (try_candidate(c, true) || budget_hit) break;
    }
  }

  if (budget_hit) {
    // The iteration cannot complete; leave the state as it was.
    state.record.outcome = Outcome::budget_exhausted;
    return IterationResult::stopped;
  }

  if (accepted) {
    const Evaluation* e = state.cache.find(accepted->offset);
    HistoryRow& row = state.record.rows[accepted_row];
    row.status = log.by_search ? RowStatus::search_success : RowStatus::poll_success;
    row.incumbent = true;
    state.last_success = Lattice::add(
        accepted->offset, Lattice::scale(state.incumbent_offset(), -1));
    state.incumbent = index_of(*e);
    state.mesh = update_frame(state.mesh, true);
    log.successful = true;
  } else {
    state.mesh = update_frame(state.mesh, false);
    state.last_success.reset();
    if (pip && penalty_update_check(state.mesh.delta_frame, log.phi_prox, state.params,
                                    log.has_interior)) {
      state.params.rho *= state.params.theta_rho;
      state.record.rho_trace.emplace_back(state.iteration, state.params.rho);
      log.rho_reduced = true;
      reselect_incumbent(state);
    }
  }
  log.delta_next = state.mesh.delta_frame;

  // A partition change needs a successful step, so it never shares an
  // iteration with a rho reduction.
  if (pip && !log.rho_reduced) switch_partition(state, log);

  state.record.iterations.push_back(std::move(log));
  ++state.iteration;
  return state.record.iterations.back().successful ? IterationResult::successful
                                                   : IterationResult::unsuccessful;
}

RunRecord solve(const Problem& problem, const Eigen::VectorXd& x0,
                const SolverConfig& config) {
  std::optional<SolverState> state;
  try {
    state.emplace(init_state(problem, x0, config));
  } catch (const std::exception& ex) {
    RunRecord r;
    r.problem = problem.name;
    r.n = problem.n;
    r.m = problem.m;
    r.p = problem.p;
    r.mode = config.mode;
    r.seed = config.seed;
    r.outcome = Outcome::error;
    r.error = ex.what();
    return r;
  }
  while (iterate(*state) != IterationResult::stopped) {
  }
  finalize(*state);
  return std::move(state->record);
}

RunRecord solve_extreme_barrier(const Problem& problem, const Eigen::VectorXd& x0,
                                SolverConfig config) {
  config.mode = Mode::extreme_barrier;
  return solve(problem, x0, config);
}

InvariantReport check_invariants(const RunRecord& record) {
  InvariantReport report;
  auto violation = [&](std::int64_t k, const std::string& what) {
    report.violations.push_back("iteration " + std::to_string(k) + ": " + what);
  };
  const bool pip = record.mode == Mode::pip;

  if (pip) {
    for (std::size_t i = 1; i < record.rho_trace.size(); ++i) {
      const double expected = record.rho_trace[i - 1].second * record.theta_rho;
      if (record.rho_trace[i].second != expected) {
        violation(record.rho_trace[i].first, "rho reduction is not an exact theta_rho step");
      }
    }
  }

  std::vector<bool> moved(std::size_t(record.m), false);
  for (const auto& [k, l] : record.partition_trace) {
    if (l >= std::size_t(record.m) || record.initial_partition.is_interior(l) || moved[l]) {
      violation(k, "partition move of index " + std::to_string(l) + " is not ext->int");
    } else {
      moved[l] = true;
    }
  }
  if (record.partition_trace.size() > std::size_t(record.m)) {
    violation(0, "more partition moves than inequality constraints");
  }

  const std::size_t total = record.iterations.size();
  for (std::size_t i = 0; i < total; ++i) {
    const IterationLog& it = record.iterations[i];
    if (it.successful != (it.best_candidate_merit < it.merit_start)) {
      violation(it.iteration, "success flag disagrees with strict merit decrease");
    }
    if (pip && !(it.incumbent_cint < 0.0)) violation(it.iteration, "incumbent c_int >= 0");
    if (pip && !std::isfinite(it.merit_start)) violation(it.iteration, "incumbent merit is +inf");
    if (it.rho_reduced) {
      if (it.successful) violation(it.iteration, "rho reduced at a successful iteration");
      if (it.partition_changed) violation(it.iteration, "rho and partition changed together");
      if (!penalty_update_check(it.delta_next, it.phi_prox, it.params, it.has_interior)) {
        violation(it.iteration, "rho reduced while the relaxed criterion fails");
      }
      if (!(it.delta_next <= it.params.b_rho * std::pow(it.params.rho, it.params.beta))) {
        violation(it.iteration, "frame size above b_rho * rho^beta at a reduction");
      }
      if (i >= total - total / 4) {
        for (double c : it.frame_cint) {
          if (!(c < 0.0)) {
            report.warnings.push_back("iteration " + std::to_string(it.iteration) +
                                      ": frame point outside the strict interior");
            break;
          }
        }
      }
    }
    if (i + 1 < total) {
      const IterationLog& next = record.iterations[i + 1];
      if (next.params.rho != it.params.rho &&
          !(it.rho_reduced && next.params.rho == it.params.rho * it.params.theta_rho)) {
        violation(next.iteration, "rho changed outside a reduction step");
      }
      if (next.params.rho == it.params.rho && next.partition_version == it.partition_version) {
        if (next.merit_start > it.merit_start) {
          violation(next.iteration, "incumbent merit increased");
        }
        if (it.successful != (next.merit_start < it.merit_start)) {
          violation(next.iteration, "merit decrease does not match the success flag");
        }
      }
    }
  }
  return report;
}

std::string summary_line(const RunRecord& record) {
  char buf[512];
  const std::string best =
      record.best_feasible_f ? [&] {
        char b[64];
        std::snprintf(b, sizeof b, "%.10g", *record.best_feasible_f);
        return std::string(b);
      }()
                             : std::string("none");
  char rho[32] = "-";  // no penalty parameter in the barrier mode
  if (record.mode == Mode::pip) std::snprintf(rho, sizeof rho, "%.3g", record.final_rho);
  std::snprintf(buf, sizeof buf,
                "problem=%s mode=%s seed=%llu evals=%lld best_feasible_f=%s rho=%s "
                "delta=%.3g outcome=%s",
                record.problem.c_str(), to_string(record.mode),
                static_cast<unsigned long long>(record.seed),
                static_cast<long long>(record.evaluations), best.c_str(), rho,
                record.final_delta, to_string(record.outcome));
  return buf;
}

}  // namespace madspip
