#include "ftmpc/report.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace ftmpc {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

void write_vector(std::ostream& os, const char* key, const Vector& v) {
  os << key << " = [";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << format_number(v(i));
  os << "]\n";
}

void write_horizon(std::ostream& os, const std::string& section, const std::string& source,
                   const HorizonCertificate& h) {
  os << "\n[" << section << "]\n";
  os << "source = \"" << source << "\"\n";
  const auto kv = [&os](const char* k, double v) { os << k << " = " << format_number(v) << '\n'; };
  os << "N = " << h.N << "\nM = " << h.M << '\n';
  kv("V_bar", h.V_bar);
  kv("eps", h.eps);
  kv("gamma", h.gamma);
  os << "gamma_source = \"" << (h.gamma_overridden ? "override" : "analytic") << "\"\n";
  kv("gamma_Vbar", h.gamma_Vbar);
  kv("rho_gamma", h.rho_gamma);
  kv("c_M", h.c_M);
  os << "c_M_source = \"" << (h.c_M_overridden ? "override" : "analytic") << "\"\n";
  kv("N0_real", h.N0_real);
  os << "N0 = " << h.N0 << '\n';
  kv("N1_real", h.N1_real);
  os << "N1 = " << h.N1 << '\n';
  kv("N2", h.N2);
  kv("N_M", h.N_M);
  os << "N_min = " << h.N_min << '\n';
  kv("M_lower", h.M_lower);
  kv("alpha_M", h.alpha_M);
  kv("eps_NM", h.eps_NM);
  kv("alpha_NM", h.alpha_NM);
  os << "certified = " << (h.certified ? "true" : "false") << '\n';
}

}  // namespace

void write_certify_report(std::ostream& os, const RunConfig& cfg, const CertificationRun& run) {
  const ControllabilityEstimate& est = run.estimate;
  const SamplingPlan& plan = cfg.certify.plan;
  os << "[run]\n";
  os << "N = " << cfg.mpc.N << "\nM = " << cfg.mpc.M << '\n';
  os << "seed = " << plan.seed << '\n';
  os << "samples_per_level = " << est.sample_count << '\n';
  os << "k_max = " << plan.rollout_steps << '\n';
  os << "require_unsaturated = " << (plan.require_unsaturated ? "true" : "false") << '\n';
  os << "V_bar = " << format_number(run.V_bar) << '\n';
  os << "certified_any_path = " << (run.certified() ? "true" : "false") << '\n';

  os << "\n[estimate]\nsource = \"empirical\"\n";
  os << "eps = " << format_number(est.certificate.eps) << '\n';
  os << "rho = " << format_number(est.certificate.rho) << '\n';
  os << "C = " << format_number(est.certificate.C) << '\n';
  os << "gamma_inf = " << format_number(est.certificate.gamma_inf) << '\n';
  const int kNM = cfg.mpc.N + cfg.mpc.M;
  os << "gamma_N_plus_M = " << format_number(est.gamma_at(kNM)) << '\n';
  os << "gamma_sup = "
     << format_number(*std::max_element(est.empirical_gamma.begin(), est.empirical_gamma.end()))
     << '\n';
  os << "c_M = " << opt(est.c_M_at(cfg.mpc.M)) << '\n';
  for (const LevelDiagnostics& d : est.levels) {
    os << "\n[[estimate.level]]\n";
    os << "eps = " << format_number(d.eps) << '\n';
    os << "accepted = " << (d.accepted ? "true" : "false") << '\n';
    if (!d.accepted) {
      os << "reason = \"" << d.reason << "\"\n";
      os << "violating_samples = " << d.violating_samples << '\n';
      if (d.worst_sample) write_vector(os, "worst_sample", *d.worst_sample);
      os << "worst_step = " << d.worst_step << '\n';
      os << "worst_violation = " << format_number(d.worst_violation) << '\n';
    }
  }

  write_horizon(os, "analytic", "analytic formulas with fitted (rho, C)", run.analytic);
  write_horizon(os, "empirical", "fitted (rho, C) with measured gamma_{N+M} and c_M",
                run.empirical);
  if (run.published) {
    const ControllabilityCertificate& pc = *run.published_constants;
    os << "\n[published_constants]\nsource = \"published\"\n";
    os << "rho = " << format_number(pc.rho) << "\nC = " << format_number(pc.C)
       << "\neps = " << format_number(pc.eps)
       << "\ngamma_inf = " << format_number(pc.gamma_inf) << '\n';
    os << "no_terminal_horizon_bound = " << format_number(no_terminal_horizon_bound(pc.gamma_inf))
       << '\n';
    write_horizon(os, "published", "quoted constants", *run.published);
  }
}

void write_gamma_csv(std::ostream& os, const CertificationRun& run) {
  const auto& est = run.estimate;
  os << "k,gamma_k[analytic],gamma_k[empirical]";
  if (run.published_constants) os << ",gamma_k[published]";
  os << '\n';
  const std::size_t K = est.empirical_gamma.size();
  for (std::size_t k = 0; k < K; ++k) {
    os << k << ',' << format_number(est.certificate.gamma_table[k]) << ','
       << format_number(est.empirical_gamma[k]);
    if (run.published_constants) {
      const auto& pc = *run.published_constants;
      os << ',' << format_number(gamma_k(pc.rho, pc.C, static_cast<int>(k)));
    }
    os << '\n';
  }
}

void write_c_M_csv(std::ostream& os, const CertificationRun& run) {
  const auto& est = run.estimate;
  const auto& c = est.certificate;
  os << "M,c_M[analytic],c_M[lp],c_M[empirical],support[empirical]\n";
  for (std::size_t M = 1; M < est.empirical_c_M.size(); ++M) {
    const int m = static_cast<int>(M);
    os << M << ',' << format_number(c_M_analytic(c.rho, c.C, m)) << ','
       << format_number(c_M_lp(c.rho, c.C, m)) << ',' << opt(est.empirical_c_M[M]) << ','
       << est.c_M_support[M] << '\n';
  }
}

CompareTable build_compare_table(const RunConfig& cfg, const CertificationRun& run) {
  const auto& est = run.estimate;
  const auto& c = est.certificate;
  CompareTable t;
  t.M_lower = m_lower_threshold(c.rho, c.C);
  t.no_terminal_analytic = no_terminal_horizon_bound(c.gamma_inf);
  const double gamma_sup =
      *std::max_element(est.empirical_gamma.begin(), est.empirical_gamma.end());
  if (gamma_sup > 1.0) t.no_terminal_empirical = no_terminal_horizon_bound(gamma_sup);
  if (run.published_constants) {
    const auto& pc = *run.published_constants;
    if (pc.gamma_inf > 1.0) t.no_terminal_published = no_terminal_horizon_bound(pc.gamma_inf);
    t.M_lower_published = m_lower_threshold(pc.rho, pc.C);
  }

  std::vector<int> Ms = cfg.certify.compare_M;
  if (Ms.empty()) {
    for (int M : {1, 2, 4, 8, 12, 16, 20, 25, 30, 40, 50, 60, 80, 100}) {
      if (M <= cfg.certify.plan.max_tail_horizon) Ms.push_back(M);
    }
  }
  const int N = cfg.mpc.N;
  for (int M : Ms) {
    CompareRow row;
    row.M = M;
    const HorizonCertificate a = horizon_certificate(c, M, N, run.V_bar);
    row.c_M_analytic = a.c_M;
    row.N_M_analytic = a.N_M;
    const double rM = std::pow(c.rho, M);
    row.tail_factor = rM / (1.0 - rM);
    if (auto cm = est.c_M_at(M)) {
      const HorizonCertificate e =
          horizon_certificate(c, M, N, run.V_bar, HorizonOverrides{gamma_sup, *cm});
      row.c_M_empirical = *cm;
      row.N_M_empirical = e.N_M;
    }
    if (run.published_constants) {
      // Like the empirical column, gamma is the M-independent constant: the
      // quoted cap applied to gamma_inf.
      const PublishedConstants& pc = *cfg.certify.published;
      const ControllabilityCertificate& pcc = *run.published_constants;
      HorizonOverrides ov;
      if (pc.gamma_cap) ov.gamma = std::min(*pc.gamma_cap, pcc.gamma_inf);
      ov.c_M = pc.c_M;
      const double V_bar = cfg.certify.v_bar.value_or(cfg.certify.v_bar_factor * pc.eps);
      const HorizonCertificate p = horizon_certificate(pcc, M, N, V_bar, ov);
      row.c_M_published = p.c_M;
      row.N_M_published = p.N_M;
    }
    t.rows.push_back(row);
  }
  return t;
}

void write_compare_csv(std::ostream& os, const CompareTable& t) {
  os << "M,c_M[analytic],N_M[analytic],c_M[empirical],N_M[empirical gamma=sup_k],"
        "c_M[published],N_M[published],rho^M/(1-rho^M)[analytic],M_lower[analytic],"
        "no_terminal_N[analytic],no_terminal_N[empirical],no_terminal_N[published]\n";
  for (const CompareRow& r : t.rows) {
    os << r.M << ',' << format_number(r.c_M_analytic) << ',' << format_number(r.N_M_analytic)
       << ',' << opt(r.c_M_empirical) << ',' << opt(r.N_M_empirical) << ','
       << opt(r.c_M_published) << ',' << opt(r.N_M_published) << ','
       << format_number(r.tail_factor) << ',' << format_number(t.M_lower) << ','
       << format_number(t.no_terminal_analytic) << ',' << opt(t.no_terminal_empirical) << ','
       << opt(t.no_terminal_published) << '\n';
  }
}

void write_compare_summary(std::ostream& os, const CompareTable& t) {
  fmt::print(os, "no-terminal-cost horizon bound: analytic {}, empirical {}, published {}\n",
             format_number(t.no_terminal_analytic), opt(t.no_terminal_empirical),
             opt(t.no_terminal_published));
  fmt::print(os, "M_lower: analytic {}, published {}\n", format_number(t.M_lower),
             opt(t.M_lower_published));
  fmt::print(os, "{:>5} {:>14} {:>14} {:>14} {:>14} {:>14} {:>14}\n", "M", "c_M[ana]",
             "N_M[ana]", "c_M[emp]", "N_M[emp]", "c_M[pub]", "N_M[pub]");
  auto cell = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.6g}", *v) : std::string("-");
  };
  for (const CompareRow& r : t.rows) {
    fmt::print(os, "{:>5} {:>14.6g} {:>14.6g} {:>14} {:>14} {:>14} {:>14}\n", r.M,
               r.c_M_analytic, r.N_M_analytic, cell(r.c_M_empirical), cell(r.N_M_empirical),
               cell(r.c_M_published), cell(r.N_M_published));
  }
}

void write_guarantee_report(std::ostream& os, const ClosedLoopTrace& trace,
                            const GuaranteeReport& report) {
  os << "[bounds]\nsource = \"" << report.bounds.label << "\"\n";
  os << "eps_NM = " << format_number(report.bounds.eps) << '\n';
  os << "gamma_bound = " << format_number(report.bounds.gamma_bound) << '\n';
  os << "\n[trace]\n";
  os << "steps = " << trace.steps() << '\n';
  os << "complete = " << (trace.complete() ? "true" : "false") << '\n';
  if (trace.failure) {
    os << "failure_step = " << trace.failure->step << '\n';
    os << "failure_status = \"" << to_string(trace.failure->status) << "\"\n";
    os << "failure_message = \"" << trace.failure->message << "\"\n";
  }
  if (!trace.values.empty()) {
    os << "V0 = " << format_number(trace.values.front()) << '\n';
    double sum = 0.0;
    for (double l : trace.stage_costs) sum += l;
    os << "closed_loop_cost = " << format_number(sum) << '\n';
    os << "final_l_min = " << format_number(trace.state_costs_min.back()) << '\n';
  }
  const int max_it = trace.iterations.empty()
                         ? 0
                         : *std::max_element(trace.iterations.begin(), trace.iterations.end());
  const double max_kkt =
      trace.kkt_residuals.empty()
          ? 0.0
          : *std::max_element(trace.kkt_residuals.begin(), trace.kkt_residuals.end());
  os << "max_solver_iterations = " << max_it << '\n';
  os << "max_kkt_residual = " << format_number(max_kkt) << '\n';
  for (const CheckResult& c : report.checks) {
    os << "\n[check." << c.name << "]\n";
    os << "passed = " << (c.passed ? "true" : "false") << '\n';
    os << "worst_margin = " << format_number(c.worst_margin) << '\n';
    os << "worst_step = " << c.worst_step << '\n';
  }
  os << "\n[summary]\npassed = " << (report.passed() ? "true" : "false") << '\n';
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepResult>& results) {
  const int n = results.empty() ? 0 : static_cast<int>(results.front().x0.size());
  os << "N,M,x0_index";
  for (int i = 1; i <= n; ++i) os << ",x0_" << i;
  os << ",feasible,all_optimal,converged,monotone,steps,V0,closed_loop_cost,final_l_min,"
        "failure_step\n";
  for (const SweepResult& r : results) {
    os << r.N << ',' << r.M << ',' << r.x0_index;
    for (int i = 0; i < n; ++i) os << ',' << format_number(r.x0(i));
    os << ',' << r.feasible << ',' << r.all_optimal << ',' << r.converged << ',' << r.monotone
       << ',' << r.steps << ',' << format_number(r.V0) << ',' << format_number(r.closed_loop_cost)
       << ',' << format_number(r.final_l_min) << ',' << r.failure_step << '\n';
  }
}

}  // namespace ftmpc
