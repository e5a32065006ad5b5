#include "rmil/config.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "rmil/model.hpp"

namespace rmil {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Accepts plain decimals and 2^k exponent notation (e.g. 2^-7).
bool parse_number(const std::string& text, double& out) {
  const std::string s = trim(text);
  if (s.rfind("2^", 0) == 0) {
    try {
      std::size_t pos = 0;
      const double e = std::stod(s.substr(2), &pos);
      if (pos != s.size() - 2) return false;
      out = std::pow(2.0, e);
      return true;
    } catch (...) {
      return false;
    }
  }
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

bool parse_int(const std::string& text, long long& out) {
  double v = 0.0;
  if (!parse_number(text, v)) return false;
  out = static_cast<long long>(std::llround(v));
  return std::abs(v - static_cast<double>(out)) < 1e-9;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> items;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) items.push_back(trim(item));
  return items;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "schema_version", "model", "scheme", "mode", "T", "n", "h_levels", "h_ref", "K", "N",
      "N_levels", "N_ref", "M", "q", "p", "seed", "x0", "x0_std", "out", "workers", "integrand",
      "check.slope_min", "check.slope_max", "check.max_spread"};
  return keys;
}

}  // namespace

ParseResult parse_config(const std::string& text) {
  ParseResult result;
  RunConfig cfg;
  auto fail = [&](const std::string& msg) { result.errors.push_back(msg); };

  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      fail("line " + std::to_string(lineno) + ": empty key or value");
      continue;
    }

    if (key.rfind("model.", 0) == 0) {
      double v = 0.0;
      if (!parse_number(value, v))
        fail(key + ": not a number: '" + value + "'");
      else
        cfg.model_params[key.substr(6)] = v;
      continue;
    }
    if (!known_keys().count(key)) {
      fail("unknown key '" + key + "'");
      continue;
    }

    auto num = [&](double& slot) {
      double v = 0.0;
      if (!parse_number(value, v))
        fail(key + ": not a number: '" + value + "'");
      else
        slot = v;
    };
    auto integer = [&](int& slot) {
      long long v = 0;
      if (!parse_int(value, v))
        fail(key + ": not an integer: '" + value + "'");
      else
        slot = static_cast<int>(v);
    };

    if (key == "schema_version") {
      int v = 1;
      integer(v);
      cfg.schema_version = v;
    } else if (key == "model") {
      cfg.model = value;
    } else if (key == "scheme") {
      if (value == "euler")
        cfg.scheme = SchemeKind::euler;
      else if (value == "milstein")
        cfg.scheme = SchemeKind::milstein;
      else
        fail("scheme: expected euler or milstein, got '" + value + "'");
    } else if (key == "mode") {
      if (value == "auto")
        cfg.mode = MilsteinMode::automatic;
      else if (value == "full")
        cfg.mode = MilsteinMode::full;
      else if (value == "drop_measure_terms")
        cfg.mode = MilsteinMode::drop_measure_terms;
      else if (value == "commutative")
        cfg.mode = MilsteinMode::commutative;
      else
        fail("mode: expected auto|full|drop_measure_terms|commutative, got '" + value + "'");
    } else if (key == "T") {
      num(cfg.T);
    } else if (key == "n") {
      integer(cfg.n);
    } else if (key == "h_levels") {
      cfg.h_levels.clear();
      for (const auto& item : split_list(value)) {
        double v = 0.0;
        if (!parse_number(item, v))
          fail("h_levels: not a number: '" + item + "'");
        else
          cfg.h_levels.push_back(v);
      }
    } else if (key == "h_ref") {
      num(cfg.h_ref);
    } else if (key == "K") {
      integer(cfg.K);
    } else if (key == "N") {
      integer(cfg.N);
    } else if (key == "N_levels") {
      cfg.N_levels.clear();
      for (const auto& item : split_list(value)) {
        long long v = 0;
        if (!parse_int(item, v))
          fail("N_levels: not an integer: '" + item + "'");
        else
          cfg.N_levels.push_back(static_cast<int>(v));
      }
    } else if (key == "N_ref") {
      integer(cfg.N_ref);
    } else if (key == "M") {
      integer(cfg.M);
    } else if (key == "q") {
      num(cfg.q);
    } else if (key == "p") {
      num(cfg.p);
    } else if (key == "seed") {
      long long v = 0;
      if (!parse_int(value, v) || v < 0)
        fail("seed: not a nonnegative integer: '" + value + "'");
      else
        cfg.seed = static_cast<std::uint64_t>(v);
    } else if (key == "x0") {
      num(cfg.x0);
    } else if (key == "x0_std") {
      num(cfg.x0_std);
    } else if (key == "out") {
      cfg.out = value;
    } else if (key == "workers") {
      integer(cfg.workers);
    } else if (key == "integrand") {
      try {
        cfg.integrand = parse_quad_integrand(value);
      } catch (const std::exception& e) {
        fail(e.what());
      }
    } else if (key == "check.slope_min") {
      num(cfg.check_slope_min);
    } else if (key == "check.slope_max") {
      num(cfg.check_slope_max);
    } else if (key == "check.max_spread") {
      num(cfg.check_max_spread);
    }
  }

  // Cross-field validation.
  if (cfg.schema_version != 1)
    fail("schema_version: unsupported version " + std::to_string(cfg.schema_version));
  if (!(cfg.T > 0.0)) fail("T: must be positive");
  if (cfg.n < 1) fail("n: must be >= 1");
  if (cfg.T / cfg.n > std::min(1.0, cfg.T) + 1e-12) fail("n: step T/n exceeds min(1, T)");
  if (cfg.N < 1) fail("N: must be >= 1");
  if (cfg.M < 1) fail("M: must be >= 1");
  if (cfg.K < 0) fail("K: must be >= 0 (0 = default policy)");
  if (cfg.q < 2.0) fail("q: must be >= 2");
  if (cfg.p < 2.0) fail("p: must be >= 2");
  if (cfg.workers < 1) fail("workers: must be >= 1");
  if (cfg.x0_std < 0.0) fail("x0_std: must be >= 0");
  for (double h : cfg.h_levels) {
    if (!(h > 0.0))
      fail("h_levels: entries must be positive");
    else if (h > std::min(1.0, cfg.T) + 1e-12)
      fail("h_levels: entry " + fmt(h) + " exceeds min(1, T)");
  }
  if (cfg.h_ref < 0.0) fail("h_ref: must be >= 0 (0 = unset)");
  if (cfg.h_ref > 0.0) {
    for (double h : cfg.h_levels) {
      const double ratio = h / cfg.h_ref;
      if (std::abs(ratio - std::llround(ratio)) > 1e-9 || ratio < 1.0 - 1e-9)
        fail("h_ref: does not divide h_levels entry " + fmt(h));
    }
  }
  for (int nl : cfg.N_levels)
    if (nl < 1) fail("N_levels: entries must be >= 1");
  if (cfg.N_ref > 0) {
    for (int nl : cfg.N_levels) {
      if (cfg.N_ref <= nl) fail("N_ref: must exceed every N_levels entry");
      else if (cfg.N_ref % nl != 0) fail("N_ref: must be a multiple of every N_levels entry");
    }
  }
  if (!cfg.model.empty()) {
    try {
      const ModelSpec model = builtin_model(cfg.model, cfg.model_params);
      if (cfg.mode == MilsteinMode::commutative && model.m0 > 0)
        fail("mode: commutative requires a model without common noise (m0 = 0)");
    } catch (const std::exception& e) {
      fail(e.what());
    }
  } else if (cfg.mode == MilsteinMode::commutative) {
    fail("mode: commutative requires a model");
  }

  if (result.errors.empty()) result.config = std::move(cfg);
  return result;
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out << "schema_version = " << c.schema_version << "\n";
  if (!c.model.empty()) out << "model = " << c.model << "\n";
  for (const auto& [key, value] : c.model_params) out << "model." << key << " = " << fmt(value) << "\n";
  out << "scheme = " << to_string(c.scheme) << "\n";
  out << "mode = " << to_string(c.mode) << "\n";
  out << "T = " << fmt(c.T) << "\n";
  out << "n = " << c.n << "\n";
  if (!c.h_levels.empty()) {
    out << "h_levels = ";
    for (std::size_t i = 0; i < c.h_levels.size(); ++i)
      out << (i ? "," : "") << fmt(c.h_levels[i]);
    out << "\n";
  }
  if (c.h_ref > 0.0) out << "h_ref = " << fmt(c.h_ref) << "\n";
  if (c.K > 0) out << "K = " << c.K << "\n";
  out << "N = " << c.N << "\n";
  if (!c.N_levels.empty()) {
    out << "N_levels = ";
    for (std::size_t i = 0; i < c.N_levels.size(); ++i) out << (i ? "," : "") << c.N_levels[i];
    out << "\n";
  }
  if (c.N_ref > 0) out << "N_ref = " << c.N_ref << "\n";
  out << "M = " << c.M << "\n";
  out << "q = " << fmt(c.q) << "\n";
  out << "p = " << fmt(c.p) << "\n";
  out << "seed = " << c.seed << "\n";
  out << "x0 = " << fmt(c.x0) << "\n";
  out << "x0_std = " << fmt(c.x0_std) << "\n";
  out << "out = " << c.out << "\n";
  out << "workers = " << c.workers << "\n";
  out << "integrand = " << to_string(c.integrand) << "\n";
  out << "check.slope_min = " << fmt(c.check_slope_min) << "\n";
  out << "check.slope_max = " << fmt(c.check_slope_max) << "\n";
  out << "check.max_spread = " << fmt(c.check_max_spread) << "\n";
  return out.str();
}

std::vector<std::string> validate_for(const RunConfig& c, const std::string& subcommand) {
  std::vector<std::string> errors;
  auto need_model = [&] {
    if (c.model.empty()) errors.push_back(subcommand + ": requires a model");
  };
  if (subcommand == "simulate") {
    need_model();
  } else if (subcommand == "convergence") {
    need_model();
    if (c.h_levels.empty()) errors.push_back("convergence: requires h_levels");
    if (c.M < 2) errors.push_back("convergence: requires M >= 2");
    if (!c.model.empty()) {
      try {
        if (!builtin_model(c.model, c.model_params).closed_form && !(c.h_ref > 0.0))
          errors.push_back("convergence: h_ref required for models without a closed form");
      } catch (...) {
      }
    }
  } else if (subcommand == "quadrature") {
    if (c.h_levels.empty()) errors.push_back("quadrature: requires h_levels");
    if (c.M < 2) errors.push_back("quadrature: requires M >= 2");
  } else if (subcommand == "consistency") {
    need_model();
    if (c.h_levels.empty()) errors.push_back("consistency: requires h_levels");
    if (!(c.h_ref > 0.0)) errors.push_back("consistency: requires h_ref");
  } else if (subcommand == "poc") {
    need_model();
    if (c.N_levels.empty()) errors.push_back("poc: requires N_levels");
    if (c.N_ref < 1) errors.push_back("poc: requires N_ref");
    if (c.h_levels.size() != 1)
      errors.push_back("poc: requires exactly one h level (the step size)");
  } else if (subcommand == "moments") {
    need_model();
    if (c.h_levels.empty()) errors.push_back("moments: requires h_levels");
  } else {
    errors.push_back("unknown subcommand '" + subcommand + "'");
  }
  return errors;
}

}  // namespace rmil
