#include "ftmpc/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "ftmpc/errors.hpp"
#include "ftmpc/parallel.hpp"
#include "ftmpc/report.hpp"

namespace ftmpc {

namespace fs = std::filesystem;

bool CertificationRun::certified() const {
  return analytic.certified || empirical.certified || (published && published->certified);
}

HorizonCertificate published_certificate(const PublishedConstants& pc, int N, int M,
                                         double V_bar) {
  const ControllabilityCertificate cert =
      ControllabilityCertificate::from_constants(pc.rho, pc.C, pc.eps, N + M);
  HorizonOverrides ov;
  if (pc.gamma_cap) ov.gamma = std::min(*pc.gamma_cap, cert.gamma_table[N + M]);
  ov.c_M = pc.c_M;
  return horizon_certificate(cert, M, N, V_bar, ov);
}

CertificationRun run_certification(const RunConfig& cfg, const Setup& setup, int N, int M) {
  const CertifyConfig& cc = cfg.certify;
  if (cc.plan.eps_grid.empty()) throw ConfigError("[certify] block with eps_grid is required");
  if (N + M > cc.plan.rollout_steps) {
    throw ConfigError("[certify] k_max must be at least N + M");
  }
  CertificationRun run;
  run.estimate = estimate_controllability(setup.sys, setup.cost, setup.kappa, cc.plan);
  const ControllabilityCertificate& c = run.estimate.certificate;
  run.V_bar = cc.v_bar.value_or(cc.v_bar_factor * c.eps);
  run.analytic = horizon_certificate(c, M, N, run.V_bar);

  HorizonOverrides ov;
  ov.gamma = run.estimate.gamma_at(N + M);
  ov.c_M = run.estimate.c_M_at(M);
  if (!ov.c_M) {
    throw CertificationError("no sampled state supports an empirical c_M for M = " +
                             std::to_string(M) + "; raise max_tail_horizon or k_max");
  }
  run.empirical = horizon_certificate(c, M, N, run.V_bar, ov);

  if (cc.published) {
    const PublishedConstants& pc = *cc.published;
    run.published_constants =
        ControllabilityCertificate::from_constants(pc.rho, pc.C, pc.eps, cc.plan.rollout_steps);
    const double V_bar = cc.v_bar.value_or(cc.v_bar_factor * pc.eps);
    run.published = published_certificate(pc, N, M, V_bar);
  }
  return run;
}

GuaranteeBounds simulation_bounds(const RunConfig& cfg, const Setup& setup) {
  const SimulateConfig& s = cfg.simulate;
  GuaranteeBounds b;
  b.label = s.bounds;
  const bool need_constants = !(s.descent_rate && s.gamma_bound);
  if (need_constants) {
    const int N = cfg.mpc.N, M = cfg.mpc.M;
    if (s.bounds == "linearized") {
      const Jacobians lin = setup.sys.jacobians(setup.sys.x_eq(), setup.sys.u_eq());
      const LinearizedAnalysis la =
          linearized_mpc_analysis(lin.A, lin.B, setup.cost, setup.kappa.K(), N, M);
      b.eps = la.eps;
      b.gamma_bound = la.gamma;
    } else if (s.bounds == "published") {
      if (!cfg.certify.published) throw ConfigError("[certify.published] is required");
      const PublishedConstants& pc = *cfg.certify.published;
      const HorizonCertificate h = published_certificate(
          pc, N, M, cfg.certify.v_bar.value_or(cfg.certify.v_bar_factor * pc.eps));
      b.eps = h.eps_NM;
      b.gamma_bound = h.gamma_Vbar;
    } else {
      const CertificationRun run = run_certification(cfg, setup, N, M);
      const HorizonCertificate& h = s.bounds == "analytic" ? run.analytic : run.empirical;
      b.eps = h.eps_NM;
      b.gamma_bound = h.gamma_Vbar;
    }
  }
  if (s.descent_rate) {
    b.eps = *s.descent_rate;
    b.label += "+descent_rate_override";
  }
  if (s.gamma_bound) {
    b.gamma_bound = *s.gamma_bound;
    b.label += "+gamma_bound_override";
  }
  return b;
}

namespace {

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream out(dir / name);
  if (!out) throw ConfigError("cannot write " + (dir / name).string());
  return out;
}

}  // namespace

int cmd_certify(const RunConfig& cfg, std::ostream& log) {
  const Setup setup = build_setup(cfg);
  const CertificationRun run = run_certification(cfg, setup, cfg.mpc.N, cfg.mpc.M);
  {
    auto out = open_output(cfg.output_dir, "certify_report.txt");
    write_certify_report(out, cfg, run);
  }
  {
    auto out = open_output(cfg.output_dir, "gamma.csv");
    write_gamma_csv(out, run);
  }
  {
    auto out = open_output(cfg.output_dir, "c_M.csv");
    write_c_M_csv(out, run);
  }
  const auto& c = run.estimate.certificate;
  fmt::print(log, "estimate[empirical]: eps={} rho={} C={}\n", format_number(c.eps),
             format_number(c.rho), format_number(c.C));
  fmt::print(log, "N={} M={} V_bar={}\n", cfg.mpc.N, cfg.mpc.M, format_number(run.V_bar));
  const auto line = [&log](const char* name, const HorizonCertificate& h) {
    fmt::print(log, "  {:<10} eps_NM={:<22} N_M={:<22} certified={}\n", name,
               format_number(h.eps_NM), format_number(h.N_M), h.certified);
  };
  line("analytic", run.analytic);
  line("empirical", run.empirical);
  if (run.published) line("published", *run.published);
  fmt::print(log, "report written to {}\n", cfg.output_dir.string());
  return run.certified() ? kExitOk : kExitViolated;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  const Setup setup = build_setup(cfg);
  const GuaranteeBounds bounds = simulation_bounds(cfg, setup);
  const Vector x0 = initial_state(cfg, setup);
  const ClosedLoopTrace trace =
      run_closed_loop(setup.problem(cfg.mpc), x0, cfg.simulate.T, bounds.eps);
  const GuaranteeReport report = verify_guarantees(trace, setup.sys.box(), bounds);
  {
    auto out = open_output(cfg.output_dir, "trace.csv");
    write_trace_csv(out, trace);
  }
  {
    auto out = open_output(cfg.output_dir, "plot.csv");
    const double Ts = cfg.plant.model == "four_tank" ? cfg.plant.four_tank.Ts : 1.0;
    write_plot_csv(out, trace, setup.sys.box(), setup.sys.x_eq(), setup.sys.u_eq(), Ts);
  }
  {
    auto out = open_output(cfg.output_dir, "simulate_report.txt");
    write_guarantee_report(out, trace, report);
  }
  for (const CheckResult& c : report.checks) {
    fmt::print(log, "{:<12} {:<4} worst_margin={} at t={}\n", c.name, c.passed ? "pass" : "FAIL",
               format_number(c.worst_margin), c.worst_step);
  }
  if (trace.failure) {
    fmt::print(log, "closed loop stopped at t={}: {}\n", trace.failure->step,
               trace.failure->message);
    return kExitSolverFailure;
  }
  return report.passed() ? kExitOk : kExitViolated;
}

int cmd_compare(const RunConfig& cfg, std::ostream& log) {
  const Setup setup = build_setup(cfg);
  const CertificationRun run = run_certification(cfg, setup, cfg.mpc.N, cfg.mpc.M);
  const CompareTable table = build_compare_table(cfg, run);
  {
    auto out = open_output(cfg.output_dir, "compare.csv");
    write_compare_csv(out, table);
  }
  {
    auto out = open_output(cfg.output_dir, "compare_summary.txt");
    write_compare_summary(out, table);
  }
  write_compare_summary(log, table);
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  const SweepConfig& sw = cfg.sweep;
  if (sw.cells.empty()) {
    fmt::print(log, "sweep: no (N, M) cells configured; add [sweep] cells = [[N, M], ...]\n");
    return kExitUsage;
  }
  const Setup setup = build_setup(cfg);
  std::vector<Vector> starts;
  if (sw.x0_offsets.empty()) {
    starts.push_back(initial_state(cfg, setup));
  } else {
    for (const Vector& off : sw.x0_offsets) {
      if (off.size() != setup.sys.state_dim()) throw ConfigError("[sweep] x0_offsets entry has wrong size");
      starts.push_back(setup.sys.x_eq() + off);
    }
  }

  struct Job {
    int cell, start;
  };
  std::vector<Job> jobs;
  for (int c = 0; c < static_cast<int>(sw.cells.size()); ++c) {
    for (int s = 0; s < static_cast<int>(starts.size()); ++s) jobs.push_back({c, s});
  }
  std::vector<SweepResult> results(jobs.size());
  std::vector<ClosedLoopTrace> traces(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), sw.workers, [&](int j) {
    const auto [N, M] = sw.cells[jobs[j].cell];
    MpcConfig mc = cfg.mpc;
    mc.N = N;
    mc.M = M;
    SweepResult& r = results[j];
    r.N = N;
    r.M = M;
    r.x0_index = jobs[j].start;
    r.x0 = starts[jobs[j].start];
    ClosedLoopTrace tr = run_closed_loop(setup.problem(mc), r.x0, cfg.simulate.T);
    const GuaranteeReport rep =
        verify_guarantees(tr, setup.sys.box(), GuaranteeBounds{0.0, 0.0, "none"});
    r.feasible = tr.complete();
    r.all_optimal = rep.check("solver").passed;
    r.converged = tr.complete() && rep.check("convergence").passed;
    r.monotone = rep.check("monotone").passed;
    r.steps = tr.steps();
    r.V0 = tr.values.empty() ? 0.0 : tr.values.front();
    for (double l : tr.stage_costs) r.closed_loop_cost += l;
    r.final_l_min = tr.state_costs_min.empty() ? 0.0 : tr.state_costs_min.back();
    r.failure_step = tr.failure ? tr.failure->step : -1;
    traces[j] = std::move(tr);
  });

  const fs::path cell_dir = cfg.output_dir / "sweep";
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    auto out = open_output(cell_dir, fmt::format("cell_N{}_M{}_x{}.csv", results[j].N,
                                                 results[j].M, results[j].x0_index));
    write_trace_csv(out, traces[j]);
  }
  {
    auto out = open_output(cfg.output_dir, "sweep.csv");
    write_sweep_csv(out, results);
  }
  for (const SweepResult& r : results) {
    fmt::print(log, "N={:<3} M={:<3} x0#{:<3} feasible={} optimal={} converged={} cost={}\n", r.N,
               r.M, r.x0_index, r.feasible, r.all_optimal, r.converged,
               format_number(r.closed_loop_cost));
  }
  return kExitOk;
}

int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log) {
  try {
    if (name == "certify") return cmd_certify(cfg, log);
    if (name == "simulate") return cmd_simulate(cfg, log);
    if (name == "compare") return cmd_compare(cfg, log);
    if (name == "sweep") return cmd_sweep(cfg, log);
    fmt::print(log, "unknown command '{}'\n", name);
    return kExitUsage;
  } catch (const ConfigError& e) {
    fmt::print(log, "configuration error: {}\n", e.what());
    return kExitUsage;
  } catch (const CertificationError& e) {
    fmt::print(log, "certification failed: {}\n", e.what());
    return kExitSolverFailure;
  } catch (const SynthesisError& e) {
    fmt::print(log, "tail controller synthesis failed: {}\n", e.what());
    return kExitSolverFailure;
  } catch (const RolloutError& e) {
    fmt::print(log, "rollout failed at step {}: {}\n", e.step(), e.what());
    return kExitSolverFailure;
  } catch (const DomainError& e) {
    fmt::print(log, "invalid input: {}\n", e.what());
    return kExitUsage;
  }
}

}  // namespace ftmpc
