#include "ftmpc/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "ftmpc/errors.hpp"

namespace ftmpc {

namespace {

/// Typed access to one TOML table that remembers which keys were read, so
/// leftovers can be reported as unknown.
class Block {
 public:
  Block(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  bool present() const { return table_ != nullptr; }
  bool has(const std::string& key) const { return table_ && table_->contains(key); }

  std::optional<double> number(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value<double>()) return *v;
    fail(key, "expected a number");
  }

  std::optional<std::int64_t> integer(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (n->is_integer()) return n->as_integer()->get();
    fail(key, "expected an integer");
  }

  std::optional<bool> boolean(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (n->is_boolean()) return n->as_boolean()->get();
    fail(key, "expected true or false");
  }

  std::optional<std::string> string(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (n->is_string()) return n->as_string()->get();
    fail(key, "expected a string");
  }

  std::optional<Vector> vector(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    return to_vector(*n, key);
  }

  std::optional<Matrix> matrix(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    const toml::array* rows = n->as_array();
    if (!rows || rows->empty()) fail(key, "expected a non-empty array of rows");
    std::vector<Vector> parsed;
    for (const toml::node& row : *rows) parsed.push_back(to_vector(row, key));
    Matrix m(parsed.size(), parsed.front().size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
      if (parsed[i].size() != m.cols()) fail(key, "rows have different lengths");
      m.row(i) = parsed[i].transpose();
    }
    return m;
  }

  std::vector<Vector> vector_list(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return {};
    const toml::array* arr = n->as_array();
    if (!arr) fail(key, "expected an array of arrays");
    std::vector<Vector> out;
    for (const toml::node& e : *arr) out.push_back(to_vector(e, key));
    return out;
  }

  Block sub(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return Block(nullptr, name_ + "." + key);
    if (!n->is_table()) fail(key, "expected a table");
    return Block(n->as_table(), name_ + "." + key);
  }

  template <class T>
  T required(std::optional<T> v, const std::string& key) const {
    if (!v) throw ConfigError("[" + name_ + "] missing required key '" + key + "'");
    return *v;
  }

  /// Raises ConfigError for every key that was never read.
  void finish() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      const std::string key(k.str());
      if (!used_.count(key)) throw ConfigError("[" + name_ + "] unknown key '" + key + "'");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError("[" + name_ + "] key '" + key + "': " + what);
  }

 private:
  const toml::node* node(const std::string& key) {
    used_.insert(key);
    if (!table_) return nullptr;
    return table_->get(key);
  }

  Vector to_vector(const toml::node& n, const std::string& key) const {
    const toml::array* arr = n.as_array();
    if (!arr || arr->empty()) fail(key, "expected a non-empty array of numbers");
    Vector v(arr->size());
    for (std::size_t i = 0; i < arr->size(); ++i) {
      auto x = (*arr)[i].value<double>();
      if (!x) fail(key, "array entries must be numbers");
      v(i) = *x;
    }
    return v;
  }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> used_;
};

int to_int(std::int64_t v, const std::string& what) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError(what + " is out of range");
  }
  return static_cast<int>(v);
}

template <std::size_t K>
std::array<double, K> to_array(const Vector& v, const std::string& what) {
  if (v.size() != static_cast<Eigen::Index>(K)) {
    throw ConfigError(what + " must have " + std::to_string(K) + " entries");
  }
  std::array<double, K> out{};
  for (std::size_t i = 0; i < K; ++i) out[i] = v(i);
  return out;
}

void parse_plant(Block b, PlantConfig& p) {
  p.model = b.string("model").value_or("four_tank");
  if (p.model == "four_tank") {
    p.four_tank.A = to_array<4>(b.required(b.vector("A"), "A"), "[plant] A");
    p.four_tank.a = to_array<4>(b.required(b.vector("a"), "a"), "[plant] a");
    p.four_tank.b = to_array<2>(b.required(b.vector("b"), "b"), "[plant] b");
    p.four_tank.g = b.number("g").value_or(981.0);
    p.four_tank.Ts = b.number("Ts").value_or(3.0);
    try {
      p.four_tank.validate();
    } catch (const DomainError& e) {
      throw ConfigError(std::string("[plant] ") + e.what());
    }
    p.u_s = b.required(b.vector("u_s"), "u_s");
    if (auto xs = b.vector("x_s")) p.x_s = *xs;
  } else if (p.model == "linear") {
    p.A = b.required(b.matrix("A"), "A");
    p.B = b.required(b.matrix("B"), "B");
    if (p.A.rows() != p.A.cols() || p.B.rows() != p.A.rows()) {
      throw ConfigError("[plant] A must be square and B must have as many rows as A");
    }
    p.x_s = b.vector("x_s").value_or(Vector::Zero(p.A.rows()));
    p.u_s = b.vector("u_s").value_or(Vector::Zero(p.B.cols()));
  } else {
    throw ConfigError("[plant] model must be \"four_tank\" or \"linear\"");
  }
  p.x_lo = b.required(b.vector("x_lo"), "x_lo");
  p.x_hi = b.required(b.vector("x_hi"), "x_hi");
  p.u_lo = b.required(b.vector("u_lo"), "u_lo");
  p.u_hi = b.required(b.vector("u_hi"), "u_hi");
  b.finish();
}

void parse_solver(Block b, SolverSettings& s) {
  if (auto v = b.integer("max_iterations")) s.max_iterations = to_int(*v, "max_iterations");
  if (auto v = b.number("kkt_tolerance")) s.kkt_tolerance = *v;
  if (auto v = b.number("constraint_tolerance")) s.constraint_tolerance = *v;
  if (auto v = b.number("penalty_init")) s.penalty_init = *v;
  if (auto v = b.number("penalty_growth")) s.penalty_growth = *v;
  if (auto v = b.integer("max_penalty_updates")) {
    s.max_penalty_updates = to_int(*v, "max_penalty_updates");
  }
  if (auto v = b.boolean("warm_start")) s.warm_start = *v;
  b.finish();
}

void parse_certify(Block b, CertifyConfig& c) {
  SamplingPlan& p = c.plan;
  if (auto v = b.vector("eps_grid")) p.eps_grid.assign(v->data(), v->data() + v->size());
  if (auto v = b.integer("boundary_samples")) p.boundary_samples = to_int(*v, "boundary_samples");
  if (auto v = b.integer("interior_samples")) p.interior_samples = to_int(*v, "interior_samples");
  if (auto v = b.integer("k_max")) p.rollout_steps = to_int(*v, "k_max");
  if (auto v = b.integer("max_tail_horizon")) p.max_tail_horizon = to_int(*v, "max_tail_horizon");
  if (auto v = b.number("rho_grid_step")) p.rho_grid_step = *v;
  if (auto v = b.number("rho_grid_max")) p.rho_grid_max = *v;
  if (auto v = b.integer("seed")) {
    if (*v < 0) throw ConfigError("[certify] seed must be non-negative");
    p.seed = static_cast<std::uint64_t>(*v);
  }
  if (auto v = b.integer("workers")) p.workers = to_int(*v, "workers");
  if (auto v = b.boolean("require_unsaturated")) p.require_unsaturated = *v;
  if (auto v = b.number("v_bar_factor")) c.v_bar_factor = *v;
  c.v_bar = b.number("v_bar");
  if (auto v = b.vector("compare_M")) {
    for (Eigen::Index i = 0; i < v->size(); ++i) {
      const double m = (*v)(i);
      if (m != std::floor(m) || m < 1) throw ConfigError("[certify] compare_M entries must be integers >= 1");
      c.compare_M.push_back(static_cast<int>(m));
    }
  }
  Block pub = b.sub("published");
  if (pub.present()) {
    PublishedConstants pc;
    pc.rho = pub.required(pub.number("rho"), "rho");
    pc.C = pub.required(pub.number("C"), "C");
    pc.eps = pub.required(pub.number("eps"), "eps");
    pc.gamma_cap = pub.number("gamma_cap");
    pc.c_M = pub.number("c_M");
    pub.finish();
    c.published = pc;
  }
  b.finish();
  if (p.eps_grid.empty()) throw ConfigError("[certify] eps_grid must not be empty");
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("[certify] ") + e.what());
  }
  if (!(c.v_bar_factor > 0.0)) throw ConfigError("[certify] v_bar_factor must be positive");
  if (c.v_bar && !(*c.v_bar > 0.0)) throw ConfigError("[certify] v_bar must be positive");
}

void parse_simulate(Block b, SimulateConfig& s) {
  s.x0 = b.vector("x0");
  s.x0_offset = b.vector("x0_offset");
  if (s.x0 && s.x0_offset) throw ConfigError("[simulate] give either x0 or x0_offset, not both");
  if (auto v = b.integer("T")) s.T = to_int(*v, "T");
  if (s.T < 1) throw ConfigError("[simulate] T must be at least 1");
  s.bounds = b.string("bounds").value_or("empirical");
  if (s.bounds != "empirical" && s.bounds != "analytic" && s.bounds != "published" &&
      s.bounds != "linearized") {
    throw ConfigError("[simulate] bounds must be empirical, analytic, published or linearized");
  }
  s.descent_rate = b.number("descent_rate");
  s.gamma_bound = b.number("gamma_bound");
  b.finish();
}

void parse_sweep(Block b, SweepConfig& s) {
  for (const Vector& cell : b.vector_list("cells")) {
    if (cell.size() != 2 || cell(0) != std::floor(cell(0)) || cell(1) != std::floor(cell(1))) {
      throw ConfigError("[sweep] cells must be [N, M] integer pairs");
    }
    if (cell(0) < 1 || cell(1) < 1) throw ConfigError("[sweep] cells need N >= 1 and M >= 1");
    s.cells.emplace_back(static_cast<int>(cell(0)), static_cast<int>(cell(1)));
  }
  s.x0_offsets = b.vector_list("x0_offsets");
  if (auto v = b.integer("workers")) s.workers = to_int(*v, "workers");
  if (s.workers < 1) throw ConfigError("[sweep] workers must be at least 1");
  b.finish();
}

}  // namespace

RunConfig parse_config(const std::string& toml_text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(toml_text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ": " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(os.str());
  }
  static const std::set<std::string> known = {"plant",  "cost",     "tail",  "mpc",   "solver",
                                              "certify", "simulate", "sweep", "output"};
  for (const auto& [k, v] : root) {
    if (!known.count(std::string(k.str()))) {
      throw ConfigError("unknown top-level key '" + std::string(k.str()) + "'");
    }
    if (!v.is_table()) throw ConfigError("'" + std::string(k.str()) + "' must be a table");
  }
  auto block = [&](const char* name) { return Block(root[name].as_table(), name); };

  RunConfig cfg;
  Block plant = block("plant");
  if (!plant.present()) throw ConfigError("missing [plant] block");
  parse_plant(plant, cfg.plant);

  Block cost = block("cost");
  cfg.q = cost.required(cost.vector("q"), "q");
  cfg.r = cost.required(cost.vector("r"), "r");
  cost.finish();

  Block tail = block("tail");
  cfg.tail_gain = tail.matrix("K");
  tail.finish();

  Block mpc = block("mpc");
  cfg.mpc.N = to_int(mpc.required(mpc.integer("N"), "N"), "N");
  cfg.mpc.M = to_int(mpc.required(mpc.integer("M"), "M"), "M");
  mpc.finish();
  parse_solver(block("solver"), cfg.mpc.solver);
  try {
    cfg.mpc.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("[mpc] ") + e.what());
  }

  Block certify = block("certify");
  if (certify.present()) parse_certify(certify, cfg.certify);
  parse_simulate(block("simulate"), cfg.simulate);
  parse_sweep(block("sweep"), cfg.sweep);

  Block output = block("output");
  if (auto d = output.string("dir")) cfg.output_dir = *d;
  output.finish();

  // Equilibrium, weight and gain invariants live in the assembled objects.
  build_setup(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

Setup build_setup(const RunConfig& cfg) {
  const PlantConfig& p = cfg.plant;
  try {
    ConstraintBox box(p.x_lo, p.x_hi, p.u_lo, p.u_hi);
    std::optional<DiscreteSystem> sys;
    if (p.model == "four_tank") {
      const Vector x_s = p.x_s.size() ? p.x_s : four_tank_equilibrium_levels(p.four_tank, p.u_s);
      sys.emplace(euler_discretize(p.four_tank, box, x_s, p.u_s));
    } else {
      const Matrix A = p.A, B = p.B;
      const Vector xs = p.x_s, us = p.u_s;
      TransitionMap f = [A, B, xs, us](const Vector& x, const Vector& u) -> Vector {
        return xs + A * (x - xs) + B * (u - us);
      };
      JacobianMap jac = [A, B](const Vector&, const Vector&) { return Jacobians{A, B}; };
      sys.emplace(std::move(f), box, xs, us, std::move(jac));
    }
    QuadraticStageCost cost(sys->x_eq(), sys->u_eq(), cfg.q, cfg.r);
    TailController kappa = cfg.tail_gain ? fixed_gain_tail_controller(*sys, *cfg.tail_gain)
                                         : lqr_tail_controller(*sys, cost);
    return Setup{std::move(*sys), std::move(cost), std::move(kappa)};
  } catch (const DomainError& e) {
    throw ConfigError(std::string("invalid plant/cost/tail configuration: ") + e.what());
  }
}

Vector initial_state(const RunConfig& cfg, const Setup& setup) {
  const SimulateConfig& s = cfg.simulate;
  Vector x0 = setup.sys.x_eq();
  if (s.x0) x0 = *s.x0;
  if (s.x0_offset) {
    if (s.x0_offset->size() != x0.size()) throw ConfigError("[simulate] x0_offset has wrong size");
    x0 += *s.x0_offset;
  }
  if (x0.size() != setup.sys.state_dim()) throw ConfigError("[simulate] x0 has wrong size");
  return x0;
}

}  // namespace ftmpc
