#include "avgctl/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <numbers>
#include <ostream>
#include <set>

namespace avgctl {

ConfigError::ConfigError(const std::string& message, int line)
    : std::runtime_error(line > 0 ? fmt::format("line {}: {}", line, message)
                                  : message),
      line_(line) {}

namespace {

struct Entry {
  std::string value;
  int line = 0;
  bool used = false;
};

struct RawSection {
  int line = 0;
  std::map<std::string, Entry> keys;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = s.find(',', start);
    out.push_back(trim(std::string_view(s).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_real(const std::string& text, const std::string& key, int line) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ConfigError(
        fmt::format("{}: expected a finite real number, got '{}'", key, text),
        line);
  }
  return v;
}

template <class Int>
Int to_integer(const std::string& text, const std::string& key, int line) {
  Int v{};
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last) {
    throw ConfigError(
        fmt::format("{}: expected an integer, got '{}'", key, text), line);
  }
  return v;
}

bool to_bool(const std::string& text, const std::string& key, int line) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError(
      fmt::format("{}: expected true or false, got '{}'", key, text), line);
}

// Pulls typed values out of one raw section and remembers line numbers.
class SectionReader {
 public:
  SectionReader(std::string name, RawSection* raw, ExperimentConfig& cfg)
      : name_(std::move(name)), raw_(raw), cfg_(cfg) {}

  bool has(const std::string& key) const {
    return raw_ && raw_->keys.count(key);
  }

  const Entry* take(const std::string& key) {
    if (!raw_) return nullptr;
    auto it = raw_->keys.find(key);
    if (it == raw_->keys.end()) return nullptr;
    it->second.used = true;
    cfg_.source_lines[name_ + "." + key] = it->second.line;
    return &it->second;
  }

  void real(const std::string& key, double& out) {
    if (const Entry* e = take(key)) out = to_real(e->value, key, e->line);
  }
  void real(const std::string& key, std::optional<double>& out) {
    if (const Entry* e = take(key)) out = to_real(e->value, key, e->line);
  }
  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (const Entry* e = take(key)) out = to_integer<Int>(e->value, key, e->line);
  }
  void boolean(const std::string& key, bool& out) {
    if (const Entry* e = take(key)) out = to_bool(e->value, key, e->line);
  }
  void reals(const std::string& key, std::vector<double>& out) {
    if (const Entry* e = take(key)) {
      out.clear();
      for (const auto& item : split_list(e->value))
        out.push_back(to_real(item, key, e->line));
    }
  }
  void integers(const std::string& key, std::vector<int>& out) {
    if (const Entry* e = take(key)) {
      out.clear();
      for (const auto& item : split_list(e->value))
        out.push_back(to_integer<int>(item, key, e->line));
    }
  }
  void flags(const std::string& key, std::vector<char>& out) {
    if (const Entry* e = take(key)) {
      out.clear();
      for (const auto& item : split_list(e->value))
        out.push_back(to_bool(item, key, e->line) ? 1 : 0);
    }
  }
  void word(const std::string& key, std::string& out,
            const std::vector<std::string>& allowed = {}) {
    const Entry* e = take(key);
    if (!e) return;
    const bool ok =
        !e->value.empty() &&
        std::all_of(e->value.begin(), e->value.end(), [](char ch) {
          return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' ||
                 ch == '-' || ch == '.';
        });
    if (!ok) {
      throw ConfigError(
          fmt::format("{}: expected a plain word, got '{}'", key, e->value),
          e->line);
    }
    if (!allowed.empty() &&
        std::find(allowed.begin(), allowed.end(), e->value) == allowed.end()) {
      throw ConfigError(fmt::format("{}: '{}' is not one of: {}", key, e->value,
                                    fmt::join(allowed, ", ")),
                        e->line);
    }
    out = e->value;
  }

  // Indexed keys like A1, A2, ... for atom parameters.
  void indexed_reals(const std::string& prefix,
                     std::vector<std::vector<double>>& out) {
    if (!raw_) return;
    std::map<int, std::vector<double>> found;
    for (auto& [key, entry] : raw_->keys) {
      if (key.size() <= prefix.size() || key.compare(0, prefix.size(), prefix))
        continue;
      const std::string digits = key.substr(prefix.size());
      if (!std::all_of(digits.begin(), digits.end(),
                       [](char ch) { return ch >= '0' && ch <= '9'; }))
        continue;
      const int index = to_integer<int>(digits, key, entry.line);
      std::vector<double> values;
      reals(key, values);
      found[index] = std::move(values);
    }
    out.clear();
    int expect = 1;
    for (auto& [index, values] : found) {
      if (index != expect) {
        throw ConfigError(fmt::format("[{}] {}{} missing; atoms are numbered "
                                      "from 1 without gaps",
                                      name_, prefix, expect));
      }
      out.push_back(std::move(values));
      ++expect;
    }
  }

  void reject_unused() const {
    if (!raw_) return;
    for (const auto& [key, entry] : raw_->keys) {
      if (!entry.used) {
        throw ConfigError(
            fmt::format("unknown key '{}' in [{}]", key, name_), entry.line);
      }
    }
  }

 private:
  std::string name_;
  RawSection* raw_;
  ExperimentConfig& cfg_;
};

std::map<std::string, RawSection> read_sections(std::istream& in) {
  std::map<std::string, RawSection> sections;
  RawSection* current = nullptr;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find_first_of("#;");
    const std::string text = trim(line.substr(0, hash));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') {
        throw ConfigError("malformed section header '" + text + "'", number);
      }
      const std::string name = trim(text.substr(1, text.size() - 2));
      if (sections.count(name)) {
        throw ConfigError("duplicate section [" + name + "]", number);
      }
      current = &sections[name];
      current->line = number;
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected 'key = value', got '" + text + "'", number);
    }
    if (!current) {
      throw ConfigError("key outside of any [section]", number);
    }
    const std::string key = trim(text.substr(0, eq));
    if (key.empty()) throw ConfigError("empty key", number);
    if (current->keys.count(key)) {
      throw ConfigError("duplicate key '" + key + "'", number);
    }
    current->keys[key] = Entry{trim(text.substr(eq + 1)), number, false};
  }
  return sections;
}

std::string real_text(double v) { return fmt::format("{}", v); }

std::string list_text(const std::vector<double>& v) {
  std::vector<std::string> parts;
  for (double x : v) parts.push_back(real_text(x));
  return fmt::format("{}", fmt::join(parts, ", "));
}

std::string flag_text(const std::vector<char>& v) {
  std::vector<std::string> parts;
  for (char x : v) parts.push_back(x ? "true" : "false");
  return fmt::format("{}", fmt::join(parts, ", "));
}

const char* rule_name(WeightSchedule::Rule r) {
  switch (r) {
    case WeightSchedule::Rule::kHalving:
      return "halving";
    case WeightSchedule::Rule::kDirac:
      return "dirac";
    case WeightSchedule::Rule::kFixed:
      return "fixed";
  }
  return "halving";
}

const std::vector<double> kTest1Lambdas{0.0, 1.0, -1.0, 0.5, -0.5};

std::vector<std::vector<double>> test2_matrices() {
  return {{1.0, 0.0, 0.0, 1.0}, {0.5, 0.0, 0.0, 2.0}, {0.5, -0.5, 0.5, 0.5}};
}

std::size_t atom_count(const ExperimentConfig& c) {
  const auto& d = c.dynamics;
  if (d.kind == "scalar_lambda_sin") return d.lambdas.size();
  if (d.kind == "affine" || d.kind == "affine_polar") return d.matrices.size();
  if (d.kind == "builtin_test1") return kTest1Lambdas.size();
  if (d.kind == "builtin_test2") return 3;
  return 0;
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  auto sections = read_sections(in);
  ExperimentConfig c;
  c.box.state_lo.clear();
  c.box.state_hi.clear();
  static const std::set<std::string> known{
      "experiment", "problem", "dynamics", "schedule", "grid",
      "solver",     "box",     "analysis", "trajectory"};
  for (const auto& [name, raw] : sections) {
    if (!known.count(name)) {
      throw ConfigError("unknown section [" + name + "]", raw.line);
    }
  }
  auto section = [&](const std::string& name) {
    auto it = sections.find(name);
    return SectionReader(name, it == sections.end() ? nullptr : &it->second, c);
  };

  {
    auto s = section("experiment");
    s.word("name", c.name);
    s.reject_unused();
  }
  {
    auto s = section("problem");
    s.integer("state_dim", c.state_dim);
    s.integer("control_dim", c.control_dim);
    s.real("t_start", c.t_start);
    s.real("t_end", c.t_end);
    s.reals("control_lo", c.control_lo);
    s.reals("control_hi", c.control_hi);
    if (s.has("control_periodic")) {
      s.flags("control_periodic", c.control_periodic);
    } else {
      c.control_periodic.assign(c.control_lo.size(), 0);
    }
    s.real("running_state_weight", c.running_state_weight);
    s.real("running_control_weight", c.running_control_weight);
    s.reals("terminal_linear", c.terminal_linear);
    s.real("terminal_quadratic_weight", c.terminal_quadratic_weight);
    s.real("lipschitz_running", c.lipschitz_running);
    s.real("lipschitz_terminal", c.lipschitz_terminal);
    s.integer("intervals", c.intervals);
    s.integer("substeps", c.substeps);
    s.real("blowup_guard", c.blowup_guard);
    s.reject_unused();
  }
  {
    auto s = section("dynamics");
    s.word("kind", c.dynamics.kind,
           {"scalar_lambda_sin", "affine", "affine_polar", "builtin_test1",
            "builtin_test2"});
    s.reals("lambdas", c.dynamics.lambdas);
    s.indexed_reals("A", c.dynamics.matrices);
    s.indexed_reals("B", c.dynamics.inputs);
    s.indexed_reals("c", c.dynamics.offsets);
    s.reject_unused();
  }
  {
    auto s = section("schedule");
    std::string rule = rule_name(c.schedule.rule);
    s.word("rule", rule, {"halving", "dirac", "fixed"});
    c.schedule.rule = rule == "dirac"   ? WeightSchedule::Rule::kDirac
                      : rule == "fixed" ? WeightSchedule::Rule::kFixed
                                        : WeightSchedule::Rule::kHalving;
    s.reals("weights", c.schedule.fixed);
    s.integer("n_min", c.n_min);
    s.integer("n_max", c.n_max);
    s.reject_unused();
  }
  {
    auto s = section("grid");
    s.reals("lo", c.grid.lo);
    s.reals("hi", c.grid.hi);
    s.integers("counts", c.grid.counts);
    s.reject_unused();
  }
  {
    auto s = section("solver");
    auto& o = c.solver;
    s.integer("restarts", o.restarts);
    s.integer("max_iters", o.max_iters);
    s.real("grad_tol", o.grad_tol);
    s.real("initial_step", o.initial_step);
    s.real("shrink", o.shrink);
    s.real("sufficient_decrease", o.sufficient_decrease);
    s.integer("seed", o.seed);
    std::string dir =
        o.direction == DescentDirection::kLbfgs ? "lbfgs" : "gradient";
    s.word("direction", dir, {"lbfgs", "gradient"});
    o.direction =
        dir == "lbfgs" ? DescentDirection::kLbfgs : DescentDirection::kGradient;
    s.integer("lbfgs_memory", o.lbfgs_memory);
    s.real("value_tol", o.value_tol);
    s.integer("value_window", o.value_window);
    s.reject_unused();
  }
  {
    auto s = section("box");
    s.reals("state_lo", c.box.state_lo);
    s.reals("state_hi", c.box.state_hi);
    c.box.control_lo = c.control_lo;
    c.box.control_hi = c.control_hi;
    s.reals("control_lo", c.box.control_lo);
    s.reals("control_hi", c.box.control_hi);
    s.integer("samples_per_dim", c.box.samples_per_dim);
    s.reject_unused();
  }
  {
    auto s = section("analysis");
    s.boolean("check_bound", c.check_bound);
    s.reject_unused();
  }
  {
    auto s = section("trajectory");
    s.boolean("enabled", c.trajectory);
    s.reals("x0", c.trajectory_x0);
    s.reals("weights", c.trajectory_weights);
    s.reject_unused();
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

void write_config(std::ostream& out, const ExperimentConfig& c) {
  out << "[experiment]\n";
  out << "name = " << c.name << "\n\n";

  out << "[problem]\n";
  out << "state_dim = " << c.state_dim << '\n';
  out << "control_dim = " << c.control_dim << '\n';
  out << "t_start = " << real_text(c.t_start) << '\n';
  out << "t_end = " << real_text(c.t_end) << '\n';
  out << "control_lo = " << list_text(c.control_lo) << '\n';
  out << "control_hi = " << list_text(c.control_hi) << '\n';
  out << "control_periodic = " << flag_text(c.control_periodic) << '\n';
  out << "running_state_weight = " << real_text(c.running_state_weight) << '\n';
  out << "running_control_weight = " << real_text(c.running_control_weight)
      << '\n';
  if (!c.terminal_linear.empty()) {
    out << "terminal_linear = " << list_text(c.terminal_linear) << '\n';
  }
  out << "terminal_quadratic_weight = "
      << real_text(c.terminal_quadratic_weight) << '\n';
  if (c.lipschitz_running) {
    out << "lipschitz_running = " << real_text(*c.lipschitz_running) << '\n';
  }
  if (c.lipschitz_terminal) {
    out << "lipschitz_terminal = " << real_text(*c.lipschitz_terminal) << '\n';
  }
  out << "intervals = " << c.intervals << '\n';
  out << "substeps = " << c.substeps << '\n';
  out << "blowup_guard = " << real_text(c.blowup_guard) << "\n\n";

  out << "[dynamics]\n";
  out << "kind = " << c.dynamics.kind << '\n';
  if (!c.dynamics.lambdas.empty()) {
    out << "lambdas = " << list_text(c.dynamics.lambdas) << '\n';
  }
  auto indexed = [&](const char* prefix,
                     const std::vector<std::vector<double>>& rows) {
    for (std::size_t i = 0; i < rows.size(); ++i)
      out << prefix << i + 1 << " = " << list_text(rows[i]) << '\n';
  };
  indexed("A", c.dynamics.matrices);
  indexed("B", c.dynamics.inputs);
  indexed("c", c.dynamics.offsets);
  out << '\n';

  out << "[schedule]\n";
  out << "rule = " << rule_name(c.schedule.rule) << '\n';
  if (!c.schedule.fixed.empty()) {
    out << "weights = " << list_text(c.schedule.fixed) << '\n';
  }
  out << "n_min = " << c.n_min << '\n';
  out << "n_max = " << c.n_max << "\n\n";

  out << "[grid]\n";
  out << "lo = " << list_text(c.grid.lo) << '\n';
  out << "hi = " << list_text(c.grid.hi) << '\n';
  out << "counts = " << fmt::format("{}", fmt::join(c.grid.counts, ", "))
      << "\n\n";

  const auto& o = c.solver;
  out << "[solver]\n";
  out << "restarts = " << o.restarts << '\n';
  out << "max_iters = " << o.max_iters << '\n';
  out << "grad_tol = " << real_text(o.grad_tol) << '\n';
  out << "initial_step = " << real_text(o.initial_step) << '\n';
  out << "shrink = " << real_text(o.shrink) << '\n';
  out << "sufficient_decrease = " << real_text(o.sufficient_decrease) << '\n';
  out << "seed = " << o.seed << '\n';
  out << "direction = "
      << (o.direction == DescentDirection::kLbfgs ? "lbfgs" : "gradient")
      << '\n';
  out << "lbfgs_memory = " << o.lbfgs_memory << '\n';
  out << "value_tol = " << real_text(o.value_tol) << '\n';
  out << "value_window = " << o.value_window << "\n\n";

  out << "[box]\n";
  out << "state_lo = " << list_text(c.box.state_lo) << '\n';
  out << "state_hi = " << list_text(c.box.state_hi) << '\n';
  out << "control_lo = " << list_text(c.box.control_lo) << '\n';
  out << "control_hi = " << list_text(c.box.control_hi) << '\n';
  out << "samples_per_dim = " << c.box.samples_per_dim << "\n\n";

  out << "[analysis]\n";
  out << "check_bound = " << (c.check_bound ? "true" : "false") << "\n\n";

  out << "[trajectory]\n";
  out << "enabled = " << (c.trajectory ? "true" : "false") << '\n';
  out << "x0 = " << list_text(c.trajectory_x0) << '\n';
  if (!c.trajectory_weights.empty()) {
    out << "weights = " << list_text(c.trajectory_weights) << '\n';
  }
}

void validate_config(const ExperimentConfig& c) {
  auto fail = [&](const std::string& key, const std::string& message) {
    auto it = c.source_lines.find(key);
    throw ConfigError(message, it == c.source_lines.end() ? 0 : it->second);
  };
  auto check_weights = [&](const std::string& key,
                           const std::vector<double>& w, std::size_t atoms) {
    if (w.size() != atoms) {
      fail(key, fmt::format("{}: {} weights given for {} atoms", key, w.size(),
                            atoms));
    }
    double sum = 0.0;
    for (double x : w) {
      if (x < 0.0) fail(key, fmt::format("{}: weights must be >= 0", key));
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      fail(key, fmt::format("{}: weights sum to {:.10g}; mixture weights must sum "
                            "to 1 (tolerance 1e-6)",
                            key, sum));
    }
  };

  const auto n = static_cast<std::size_t>(std::max(c.state_dim, 0));
  const auto m = static_cast<std::size_t>(std::max(c.control_dim, 0));
  if (c.state_dim < 1) fail("problem.state_dim", "state_dim must be >= 1");
  if (c.control_dim < 1) fail("problem.control_dim", "control_dim must be >= 1");
  if (!(c.t_start >= 0.0)) fail("problem.t_start", "t_start must be >= 0");
  if (!(c.t_start < c.t_end)) {
    fail("problem.t_end",
         fmt::format("horizon needs t_start < t_end (got t_start = {}, "
                     "t_end = {})",
                     c.t_start, c.t_end));
  }
  if (c.control_lo.size() != m || c.control_hi.size() != m) {
    fail("problem.control_lo", "control_lo/control_hi need control_dim entries");
  }
  if (c.control_periodic.size() != m) {
    fail("problem.control_periodic", "control_periodic needs control_dim entries");
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (!(c.control_lo[j] < c.control_hi[j])) {
      fail("problem.control_hi", "control box needs control_lo < control_hi");
    }
  }
  if (c.running_state_weight < 0.0 || c.running_control_weight < 0.0 ||
      c.terminal_quadratic_weight < 0.0) {
    fail("problem.running_state_weight", "cost weights must be >= 0");
  }
  if (!c.terminal_linear.empty() && c.terminal_linear.size() != n) {
    fail("problem.terminal_linear", "terminal_linear needs state_dim entries");
  }
  if (c.lipschitz_running && *c.lipschitz_running < 0.0) {
    fail("problem.lipschitz_running", "lipschitz_running must be >= 0");
  }
  if (c.lipschitz_terminal && *c.lipschitz_terminal < 0.0) {
    fail("problem.lipschitz_terminal", "lipschitz_terminal must be >= 0");
  }
  if (c.intervals < 1) fail("problem.intervals", "intervals must be >= 1");
  if (c.substeps < 1) fail("problem.substeps", "substeps must be >= 1");
  if (!(c.blowup_guard > 0.0)) {
    fail("problem.blowup_guard", "blowup_guard must be > 0");
  }

  const auto& d = c.dynamics;
  auto need_dims = [&](std::size_t want_n, std::size_t want_m) {
    if (n != want_n || m != want_m) {
      fail("dynamics.kind",
           fmt::format("dynamics kind {} needs state_dim = {} and "
                       "control_dim = {}",
                       d.kind, want_n, want_m));
    }
  };
  if (d.kind == "scalar_lambda_sin" || d.kind == "builtin_test1") {
    need_dims(1, 1);
    if (d.kind == "scalar_lambda_sin" && d.lambdas.empty()) {
      fail("dynamics.lambdas", "scalar_lambda_sin needs a lambdas list");
    }
  } else if (d.kind == "affine_polar" || d.kind == "builtin_test2") {
    need_dims(2, 1);
    if (d.kind == "affine_polar") {
      if (d.matrices.empty()) fail("dynamics.kind", "affine_polar needs A1, ...");
      for (std::size_t i = 0; i < d.matrices.size(); ++i) {
        if (d.matrices[i].size() != 4) {
          fail(fmt::format("dynamics.A{}", i + 1),
               fmt::format("A{} needs 4 entries (2 x 2, row-major)", i + 1));
        }
      }
    }
  } else if (d.kind == "affine") {
    if (d.matrices.empty()) fail("dynamics.kind", "affine needs A1, ...");
    if (d.inputs.size() != d.matrices.size()) {
      fail("dynamics.kind", "affine needs one B matrix per A matrix");
    }
    if (!d.offsets.empty() && d.offsets.size() != d.matrices.size()) {
      fail("dynamics.kind", "affine offsets c must be given for all or no atoms");
    }
    for (std::size_t i = 0; i < d.matrices.size(); ++i) {
      if (d.matrices[i].size() != n * n) {
        fail(fmt::format("dynamics.A{}", i + 1),
             fmt::format("A{} needs state_dim^2 = {} entries", i + 1, n * n));
      }
      if (d.inputs[i].size() != n * m) {
        fail(fmt::format("dynamics.B{}", i + 1),
             fmt::format("B{} needs state_dim*control_dim = {} entries", i + 1,
                         n * m));
      }
      if (!d.offsets.empty() && d.offsets[i].size() != n) {
        fail(fmt::format("dynamics.c{}", i + 1),
             fmt::format("c{} needs state_dim = {} entries", i + 1, n));
      }
    }
  } else {
    fail("dynamics.kind", "unknown dynamics kind '" + d.kind + "'");
  }
  if (d.kind != "scalar_lambda_sin" && !d.lambdas.empty()) {
    fail("dynamics.lambdas", "lambdas only apply to scalar_lambda_sin");
  }
  if (d.kind != "affine" && d.kind != "affine_polar" && !d.matrices.empty()) {
    fail("dynamics.kind", "matrices only apply to affine kinds");
  }
  if (d.kind != "affine" && (!d.inputs.empty() || !d.offsets.empty())) {
    fail("dynamics.kind", "B and c matrices only apply to kind affine");
  }
  const std::size_t atoms = atom_count(c);

  if (c.schedule.rule == WeightSchedule::Rule::kFixed) {
    check_weights("schedule.weights", c.schedule.fixed, atoms);
  } else if (!c.schedule.fixed.empty()) {
    fail("schedule.weights", "weights only apply to rule = fixed");
  }
  if (c.n_min < 0) fail("schedule.n_min", "n_min must be >= 0");
  if (c.n_max < c.n_min) fail("schedule.n_max", "n_max must be >= n_min");
  if (c.n_max > 60) fail("schedule.n_max", "n_max must be <= 60");

  if (c.grid.lo.size() != n || c.grid.hi.size() != n ||
      c.grid.counts.size() != n) {
    fail("grid.lo", "grid lo, hi and counts need state_dim entries");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(c.grid.lo[i] <= c.grid.hi[i])) fail("grid.hi", "grid needs lo <= hi");
    if (c.grid.counts[i] < 2) fail("grid.counts", "grid counts must be >= 2");
  }

  try {
    c.solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[solver] ") + e.what());
  }

  if (c.box.state_lo.size() != n || c.box.state_hi.size() != n) {
    fail("box.state_lo", "box state_lo/state_hi need state_dim entries");
  }
  if (c.box.control_lo.size() != m || c.box.control_hi.size() != m) {
    fail("box.control_lo", "box control_lo/control_hi need control_dim entries");
  }
  if (c.box.samples_per_dim < 0) {
    fail("box.samples_per_dim", "samples_per_dim must be >= 0 (0 = default)");
  }
  try {
    c.box.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[box] ") + e.what());
  }

  if (c.check_bound && (!c.lipschitz_running || !c.lipschitz_terminal)) {
    fail("analysis.check_bound",
         "check_bound needs lipschitz_running and lipschitz_terminal in "
         "[problem]");
  }

  if (c.trajectory) {
    if (c.trajectory_x0.size() != n) {
      fail("trajectory.x0", "trajectory x0 needs state_dim entries");
    }
    if (!c.trajectory_weights.empty()) {
      check_weights("trajectory.weights", c.trajectory_weights, atoms);
    }
  }
}

ExperimentConfig builtin_test1_config() {
  ExperimentConfig c;
  c.name = "test1";
  c.state_dim = 1;
  c.control_dim = 1;
  c.control_lo = {-1.0};
  c.control_hi = {1.0};
  c.control_periodic = {0};
  c.running_state_weight = 0.0;
  c.running_control_weight = 1.0;
  c.terminal_linear = {-1.0};
  c.terminal_quadratic_weight = 0.0;
  c.lipschitz_running = 0.0;
  c.lipschitz_terminal = 1.0;
  c.dynamics.kind = "builtin_test1";
  c.schedule.rule = WeightSchedule::Rule::kHalving;
  c.n_min = 1;
  c.n_max = 8;
  c.grid = StateGrid{{-1.0}, {1.0}, {21}};
  c.solver.restarts = 5;
  c.box = DomainBox{{-6.0}, {6.0}, {-1.0}, {1.0}, 0};
  c.check_bound = true;
  c.trajectory = true;
  c.trajectory_x0 = {1.0};
  return c;
}

ExperimentConfig builtin_test2_config() {
  const double two_pi = 2.0 * std::numbers::pi;
  ExperimentConfig c;
  c.name = "test2";
  c.state_dim = 2;
  c.control_dim = 1;
  c.control_lo = {0.0};
  c.control_hi = {two_pi};
  c.control_periodic = {1};
  c.running_state_weight = 1.0;
  c.running_control_weight = 0.0;
  c.terminal_linear = {};
  c.terminal_quadratic_weight = 1.0;
  c.dynamics.kind = "builtin_test2";
  c.schedule.rule = WeightSchedule::Rule::kHalving;
  c.n_min = 1;
  c.n_max = 6;
  c.grid = StateGrid{{-1.0, -1.0}, {1.0, 1.0}, {11, 11}};
  c.solver.restarts = 9;
  c.box = DomainBox{{-11.0, -11.0}, {11.0, 11.0}, {0.0}, {two_pi}, 0};
  c.check_bound = false;
  c.trajectory = true;
  c.trajectory_x0 = {-0.4, 0.3};
  c.trajectory_weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  return c;
}

std::vector<VectorField> build_atoms(const ExperimentConfig& c) {
  const auto& d = c.dynamics;
  std::vector<VectorField> atoms;
  if (d.kind == "builtin_test1" || d.kind == "scalar_lambda_sin") {
    const auto& lambdas = d.kind == "builtin_test1" ? kTest1Lambdas : d.lambdas;
    for (double l : lambdas) atoms.push_back(scalar_lambda_sin_field(l));
  } else if (d.kind == "builtin_test2" || d.kind == "affine_polar") {
    const auto mats = d.kind == "builtin_test2" ? test2_matrices() : d.matrices;
    for (std::size_t i = 0; i < mats.size(); ++i)
      atoms.push_back(affine_polar_field(fmt::format("A{}", i + 1), mats[i]));
  } else if (d.kind == "affine") {
    for (std::size_t i = 0; i < d.matrices.size(); ++i) {
      atoms.push_back(affine_field(
          fmt::format("A{}", i + 1), d.matrices[i], d.inputs[i],
          d.offsets.empty() ? std::vector<double>(c.state_dim, 0.0)
                            : d.offsets[i]));
    }
  } else {
    throw ConfigError("unknown dynamics kind '" + d.kind + "'");
  }
  return atoms;
}

ControlProblem build_problem(const ExperimentConfig& c) {
  ControlProblem p;
  p.state_dim = c.state_dim;
  p.control_dim = c.control_dim;
  p.t_start = c.t_start;
  p.t_end = c.t_end;
  p.control_lo = c.control_lo;
  p.control_hi = c.control_hi;
  p.control_periodic = c.control_periodic;
  p.running =
      quadratic_running_cost(c.running_state_weight, c.running_control_weight);
  p.terminal = linear_quadratic_terminal_cost(c.terminal_linear,
                                              c.terminal_quadratic_weight);
  p.lipschitz_running = c.lipschitz_running;
  p.lipschitz_terminal = c.lipschitz_terminal;
  p.intervals = c.intervals;
  p.substeps = c.substeps;
  p.blowup_guard = c.blowup_guard;
  return p;
}

ExperimentDescriptor build_descriptor(const ExperimentConfig& c) {
  ExperimentDescriptor d;
  d.name = c.name;
  d.problem = build_problem(c);
  d.atoms = build_atoms(c);
  d.schedule = c.schedule;
  d.n_min = c.n_min;
  d.n_max = c.n_max;
  d.grid = c.grid;
  d.solver = c.solver;
  d.box = c.box;
  d.check_bound = c.check_bound;
  return d;
}

}  // namespace avgctl
