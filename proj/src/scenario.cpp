#include "rpsim/scenario.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace rpsim {

namespace {

struct KeyValue {
  std::string key;
  std::vector<std::string> tokens;
  int line;
  int col;
};

struct Section {
  std::string name;
  int line;
  std::vector<KeyValue> entries;
};

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<Section> tokenize(const std::string& text) {
  std::vector<Section> sections;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError("unterminated section header", line_no, 1);
      sections.push_back({trim(line.substr(1, line.size() - 2)), line_no, {}});
      continue;
    }
    size_t eq = raw.find('=');
    if (eq == std::string::npos)
      throw ParseError("expected 'key = value'", line_no, 1);
    if (sections.empty())
      throw ParseError("key outside of any section", line_no, 1);
    KeyValue kv;
    kv.key = trim(raw.substr(0, eq));
    kv.line = line_no;
    kv.col = static_cast<int>(eq) + 2;
    if (kv.key.empty()) throw ParseError("empty key", line_no, 1);
    std::istringstream vals(raw.substr(eq + 1));
    std::string tok;
    while (vals >> tok) kv.tokens.push_back(tok);
    sections.back().entries.push_back(std::move(kv));
  }
  return sections;
}

double parse_double(const KeyValue& kv, size_t idx) {
  if (idx >= kv.tokens.size())
    throw ParseError("missing value for '" + kv.key + "'", kv.line, kv.col);
  const std::string& tok = kv.tokens[idx];
  try {
    size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError("invalid number '" + tok + "' for '" + kv.key + "'", kv.line,
                     kv.col);
  }
}

long parse_long(const KeyValue& kv, size_t idx = 0) {
  double v = parse_double(kv, idx);
  long l = static_cast<long>(v);
  if (double(l) != v)
    throw ParseError("expected integer for '" + kv.key + "'", kv.line, kv.col);
  return l;
}

bool parse_bool(const KeyValue& kv) {
  if (kv.tokens.size() == 1) {
    if (kv.tokens[0] == "true") return true;
    if (kv.tokens[0] == "false") return false;
  }
  throw ParseError("expected true/false for '" + kv.key + "'", kv.line, kv.col);
}

Complex parse_complex(const KeyValue& kv) {
  double re = parse_double(kv, 0);
  double im = kv.tokens.size() > 1 ? parse_double(kv, 1) : 0.0;
  if (kv.tokens.size() > 2)
    throw ParseError("too many values for '" + kv.key + "'", kv.line, kv.col);
  return Complex(re, im);
}

void expect_count(const KeyValue& kv, size_t n) {
  if (kv.tokens.size() != n)
    throw ParseError("'" + kv.key + "' expects " + std::to_string(n) + " value(s)",
                     kv.line, kv.col);
}

SymmetryMode parse_symmetry(const KeyValue& kv) {
  expect_count(kv, 1);
  const std::string& v = kv.tokens[0];
  if (v == "general") return SymmetryMode::General;
  if (v == "triplet") return SymmetryMode::TripletSymmetric;
  if (v == "triplet_nodeph") return SymmetryMode::TripletSymmetricNoTDephasing;
  throw ParseError("unknown symmetry '" + v + "'", kv.line, kv.col);
}

RunMode parse_mode(const KeyValue& kv) {
  expect_count(kv, 1);
  const std::string& v = kv.tokens[0];
  if (v == "me") return RunMode::Me;
  if (v == "dark") return RunMode::Dark;
  if (v == "traj") return RunMode::Traj;
  if (v == "ensemble") return RunMode::Ensemble;
  if (v == "yield") return RunMode::Yield;
  if (v == "classify") return RunMode::Classify;
  if (v == "oracle") return RunMode::Oracle;
  throw ParseError("unknown mode '" + v + "'", kv.line, kv.col);
}

int channel_of_suffix(const std::string& suffix) {
  if (suffix == "s") return 0;
  if (suffix == "t0") return 1;
  if (suffix == "tp") return 2;
  if (suffix == "tm") return 3;
  if (suffix == "t") return -2;  // collapsed triplet shortcut
  return -1;
}

}  // namespace

const char* to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Me: return "me";
    case RunMode::Dark: return "dark";
    case RunMode::Traj: return "traj";
    case RunMode::Ensemble: return "ensemble";
    case RunMode::Yield: return "yield";
    case RunMode::Classify: return "classify";
    case RunMode::Oracle: return "oracle";
  }
  return "?";
}

Scenario parse_scenario(const std::string& text) {
  Scenario sc;
  std::set<std::string> seen_sections;
  bool have_rates_keys = false, have_coupling_keys = false;
  std::string model;
  SymmetryMode symmetry = SymmetryMode::General;
  bool symmetry_set = false;

  std::array<double, 4> r_vals{}, d_vals{};
  std::array<bool, 4> r_set{}, d_set{};
  EncounterCoupling coupling;
  bool kappa_set = false;
  std::array<bool, 4> pi_set{}, delta_set{};
  std::vector<std::pair<double, EncounterCoupling>> mix;

  for (const Section& sec : tokenize(text)) {
    if (sec.name == "meta") continue;  // sidecar bookkeeping, not configuration
    if (sec.name != "system" && sec.name != "reaction" && sec.name != "detection" &&
        sec.name != "rate" && sec.name != "run")
      throw ParseError("unknown section [" + sec.name + "]", sec.line, 1);
    if (!seen_sections.insert(sec.name).second)
      throw ParseError("duplicate section [" + sec.name + "]", sec.line, 1);

    std::set<std::string> seen_keys;
    for (const KeyValue& kv : sec.entries) {
      const bool repeatable = kv.key == "nucleus" || kv.key == "mix";
      if (!repeatable && !seen_keys.insert(kv.key).second)
        throw ParseError("duplicate key '" + kv.key + "'", kv.line, kv.col);

      if (sec.name == "system") {
        if (kv.key == "b") {
          expect_count(kv, 3);
          for (int i = 0; i < 3; ++i) sc.system.field_b[i] = parse_double(kv, i);
        } else if (kv.key == "g") {
          expect_count(kv, 2);
          sc.system.g_factors = {parse_double(kv, 0), parse_double(kv, 1)};
        } else if (kv.key == "st0_only") {
          sc.st0_only = parse_bool(kv);
        } else if (kv.key == "init") {
          if (kv.tokens.size() == 1 && kv.tokens[0] == "singlet") {
            sc.init = InitialStateSpec{};
          } else if (kv.tokens.size() == 4 && kv.tokens[0] == "populations") {
            sc.init.use_populations = true;
            sc.init.q_s = parse_double(kv, 1);
            sc.init.q_t = parse_double(kv, 2);
            sc.init.q_p = parse_double(kv, 3);
            if (sc.init.q_s < 0 || sc.init.q_t < 0 || sc.init.q_p < 0 ||
                sc.init.q_s + sc.init.q_t + sc.init.q_p > 1.0 + 1e-12)
              throw ParseError("init populations must be nonnegative, sum <= 1",
                               kv.line, kv.col);
          } else {
            throw ParseError("init = singlet | populations <qs> <qt> <qp>", kv.line,
                             kv.col);
          }
        } else if (kv.key == "nucleus") {
          if (kv.tokens.size() < 4)
            throw ParseError("nucleus = <radical> <spin> iso <a> | tensor <9 values>",
                             kv.line, kv.col);
          long radical = parse_long(kv, 0);
          if (radical != 1 && radical != 2)
            throw ParseError("nucleus radical must be 1 or 2", kv.line, kv.col);
          Nucleus nuc;
          nuc.spin = parse_double(kv, 1);
          const std::string& form = kv.tokens[2];
          if (form == "iso") {
            expect_count(kv, 4);
            nuc.tensor = parse_double(kv, 3) * Eigen::Matrix3d::Identity();
          } else if (form == "tensor") {
            expect_count(kv, 12);
            for (int i = 0; i < 3; ++i)
              for (int j = 0; j < 3; ++j)
                nuc.tensor(i, j) = parse_double(kv, 3 + 3 * i + j);
          } else {
            throw ParseError("nucleus form must be 'iso' or 'tensor'", kv.line, kv.col);
          }
          sc.system.nuclei[radical - 1].push_back(nuc);
        } else {
          throw ParseError("unknown key '" + kv.key + "' in [system]", kv.line, kv.col);
        }
      } else if (sec.name == "reaction") {
        if (kv.key == "model") {
          expect_count(kv, 1);
          model = kv.tokens[0];
          if (model != "rates" && model != "coupling")
            throw ParseError("model must be 'rates' or 'coupling'", kv.line, kv.col);
        } else if (kv.key == "symmetry") {
          symmetry = parse_symmetry(kv);
          symmetry_set = true;
        } else if (kv.key.rfind("r_", 0) == 0 || kv.key.rfind("d_", 0) == 0) {
          int ch = channel_of_suffix(kv.key.substr(2));
          if (ch == -1)
            throw ParseError("unknown key '" + kv.key + "' in [reaction]", kv.line,
                             kv.col);
          have_rates_keys = true;
          expect_count(kv, 1);
          double v = parse_double(kv, 0);
          auto& vals = kv.key[0] == 'r' ? r_vals : d_vals;
          auto& flags = kv.key[0] == 'r' ? r_set : d_set;
          if (ch == -2) {
            for (int j = 1; j < 4; ++j) vals[j] = v, flags[j] = true;
          } else {
            vals[ch] = v;
            flags[ch] = true;
          }
        } else if (kv.key == "kappa") {
          have_coupling_keys = true;
          expect_count(kv, 1);
          coupling.kappa = parse_double(kv, 0);
          kappa_set = true;
        } else if (kv.key.rfind("pi_", 0) == 0 || kv.key.rfind("delta_", 0) == 0) {
          const bool is_pi = kv.key[0] == 'p';
          int ch = channel_of_suffix(kv.key.substr(is_pi ? 3 : 6));
          if (ch == -1)
            throw ParseError("unknown key '" + kv.key + "' in [reaction]", kv.line,
                             kv.col);
          have_coupling_keys = true;
          Complex v = parse_complex(kv);
          auto& vals = is_pi ? coupling.pi : coupling.delta;
          auto& flags = is_pi ? pi_set : delta_set;
          if (ch == -2) {
            for (int j = 1; j < 4; ++j) vals[j] = v, flags[j] = true;
          } else {
            vals[ch] = v;
            flags[ch] = true;
          }
        } else if (kv.key == "mix") {
          have_coupling_keys = true;
          expect_count(kv, 5);
          double w = parse_double(kv, 0);
          EncounterCoupling entry;
          entry.kappa = parse_double(kv, 1);
          entry.pi[0] = parse_double(kv, 2);
          for (int j = 1; j < 4; ++j) entry.pi[j] = parse_double(kv, 3);
          entry.delta[0] = parse_double(kv, 4);
          entry.mode = SymmetryMode::TripletSymmetricNoTDephasing;
          mix.emplace_back(w, entry);
        } else {
          throw ParseError("unknown key '" + kv.key + "' in [reaction]", kv.line,
                           kv.col);
        }
      } else if (sec.name == "detection") {
        if (kv.key.rfind("eta_", 0) == 0) {
          int ch = channel_of_suffix(kv.key.substr(4));
          if (ch == -1)
            throw ParseError("unknown key '" + kv.key + "' in [detection]", kv.line,
                             kv.col);
          expect_count(kv, 1);
          double v = parse_double(kv, 0);
          if (ch == -2) {
            for (int j = 1; j < 4; ++j) sc.detection.eta[j] = v;
          } else {
            sc.detection.eta[ch] = v;
          }
        } else {
          throw ParseError("unknown key '" + kv.key + "' in [detection]", kv.line,
                           kv.col);
        }
      } else if (sec.name == "rate") {
        if (kv.key == "kind") {
          expect_count(kv, 1);
          const std::string& v = kv.tokens[0];
          if (v == "constant") sc.rate_model.kind = RateModel::Kind::Constant;
          else if (v == "exponential") sc.rate_model.kind = RateModel::Kind::Exponential;
          else if (v == "algebraic") sc.rate_model.kind = RateModel::Kind::Algebraic;
          else throw ParseError("unknown rate kind '" + v + "'", kv.line, kv.col);
        } else if (kv.key == "r") {
          sc.rate_model.r = parse_double(kv, 0);
        } else if (kv.key == "a") {
          sc.rate_model.a = parse_double(kv, 0);
        } else if (kv.key == "t_inf") {
          sc.rate_model.t_inf = parse_double(kv, 0);
        } else {
          throw ParseError("unknown key '" + kv.key + "' in [rate]", kv.line, kv.col);
        }
      } else {  // run
        if (kv.key == "mode") sc.run.mode = parse_mode(kv);
        else if (kv.key == "t_max") sc.run.t_max = parse_double(kv, 0);
        else if (kv.key == "n_grid") sc.run.n_grid = static_cast<int>(parse_long(kv));
        else if (kv.key == "n_traj") sc.run.n_traj = parse_long(kv);
        else if (kv.key == "n_cloud") sc.run.n_cloud = parse_long(kv);
        else if (kv.key == "threads") sc.run.threads = static_cast<int>(parse_long(kv));
        else if (kv.key == "sweep_angles")
          sc.run.sweep_angles = static_cast<int>(parse_long(kv));
        else if (kv.key == "delta_b") sc.run.delta_b = parse_double(kv, 0);
        else if (kv.key == "seed") {
          sc.run.seed = static_cast<uint64_t>(parse_long(kv));
          sc.run.seed_set = true;
        } else if (kv.key == "out") {
          expect_count(kv, 1);
          sc.run.out = kv.tokens[0];
        } else {
          throw ParseError("unknown key '" + kv.key + "' in [run]", kv.line, kv.col);
        }
      }
    }
  }

  // Semantic validation.
  if (!seen_sections.count("reaction"))
    throw ValidationError("missing [reaction] section");
  if (have_rates_keys && have_coupling_keys)
    throw ValidationError("exactly one reaction model: found both rate and coupling keys");
  if (model.empty()) model = have_coupling_keys ? "coupling" : "rates";
  if (model == "rates" && have_coupling_keys)
    throw ValidationError("exactly one reaction model: model=rates with coupling keys");
  if (model == "coupling" && have_rates_keys)
    throw ValidationError("exactly one reaction model: model=coupling with rate keys");

  const HilbertLayout layout = sc.layout();
  if (model == "rates") {
    ReactionRates rates;
    rates.mode = symmetry_set ? symmetry : SymmetryMode::General;
    rates.r = r_vals;
    rates.d = d_vals;
    rates.validate(layout);
    sc.rates = rates;
  } else {
    if (!mix.empty()) {
      auto any = [](const std::array<bool, 4>& a) {
        return a[0] || a[1] || a[2] || a[3];
      };
      if (kappa_set || any(pi_set) || any(delta_set))
        throw ValidationError("mix entries replace the single coupling keys");
      if (symmetry_set && symmetry != SymmetryMode::TripletSymmetricNoTDephasing)
        throw ValidationError("mix averaging is defined for triplet_nodeph symmetry");
      double wsum = 0;
      for (auto& [w, entry] : mix) {
        entry.validate(layout);
        wsum += w;
      }
      if (std::abs(wsum - 1.0) > 1e-12)
        throw ValidationError("mix weights must sum to 1");
      sc.mix = std::move(mix);
    } else {
      coupling.mode = symmetry_set ? symmetry : SymmetryMode::General;
      coupling.validate(layout);
      sc.coupling = coupling;
    }
  }
  sc.detection.validate();
  if (sc.rate_model.r <= 0 && (sc.run.mode == RunMode::Traj ||
                               sc.run.mode == RunMode::Ensemble))
    throw ValidationError("rate model: r must be > 0");
  if ((sc.run.mode == RunMode::Traj || sc.run.mode == RunMode::Ensemble) &&
      !sc.run.seed_set)
    throw ValidationError("seed is mandatory for stochastic modes");
  if (sc.run.n_grid < 2) throw ValidationError("n_grid must be >= 2");
  if (sc.run.t_max <= 0) throw ValidationError("t_max must be > 0");
  return sc;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(Complex v) { return fmt(v.real()) + " " + fmt(v.imag()); }

}  // namespace

std::string render_scenario(const Scenario& sc) {
  std::ostringstream out;
  out << "[system]\n";
  out << "b = " << fmt(sc.system.field_b[0]) << " " << fmt(sc.system.field_b[1]) << " "
      << fmt(sc.system.field_b[2]) << "\n";
  out << "g = " << fmt(sc.system.g_factors[0]) << " " << fmt(sc.system.g_factors[1])
      << "\n";
  if (sc.st0_only) out << "st0_only = true\n";
  if (sc.init.use_populations)
    out << "init = populations " << fmt(sc.init.q_s) << " " << fmt(sc.init.q_t) << " "
        << fmt(sc.init.q_p) << "\n";
  for (int m = 0; m < 2; ++m)
    for (const Nucleus& nuc : sc.system.nuclei[m]) {
      out << "nucleus = " << (m + 1) << " " << fmt(nuc.spin);
      if (nuc.isotropic()) {
        out << " iso " << fmt(nuc.tensor(0, 0)) << "\n";
      } else {
        out << " tensor";
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) out << " " << fmt(nuc.tensor(i, j));
        out << "\n";
      }
    }

  out << "\n[reaction]\n";
  if (sc.rates) {
    out << "model = rates\n";
    out << "symmetry = " << to_string(sc.rates->mode) << "\n";
    out << "r_s = " << fmt(sc.rates->r[0]) << "\n";
    out << "d_s = " << fmt(sc.rates->d[0]) << "\n";
    if (sc.rates->mode == SymmetryMode::General) {
      static constexpr const char* suffix[3] = {"t0", "tp", "tm"};
      for (int j = 1; j < 4; ++j) {
        out << "r_" << suffix[j - 1] << " = " << fmt(sc.rates->r[j]) << "\n";
        out << "d_" << suffix[j - 1] << " = " << fmt(sc.rates->d[j]) << "\n";
      }
    } else {
      out << "r_t = " << fmt(sc.rates->r[1]) << "\n";
      out << "d_t = " << fmt(sc.rates->d[1]) << "\n";
    }
  } else if (sc.coupling) {
    out << "model = coupling\n";
    out << "symmetry = " << to_string(sc.coupling->mode) << "\n";
    out << "kappa = " << fmt(sc.coupling->kappa) << "\n";
    out << "pi_s = " << fmt(sc.coupling->pi[0]) << "\n";
    out << "delta_s = " << fmt(sc.coupling->delta[0]) << "\n";
    if (sc.coupling->mode == SymmetryMode::General) {
      static constexpr const char* suffix[3] = {"t0", "tp", "tm"};
      for (int j = 1; j < 4; ++j) {
        out << "pi_" << suffix[j - 1] << " = " << fmt(sc.coupling->pi[j]) << "\n";
        out << "delta_" << suffix[j - 1] << " = " << fmt(sc.coupling->delta[j]) << "\n";
      }
    } else {
      out << "pi_t = " << fmt(sc.coupling->pi[1]) << "\n";
      if (sc.coupling->mode == SymmetryMode::TripletSymmetric)
        out << "delta_t = " << fmt(sc.coupling->delta[1]) << "\n";
    }
  } else {
    out << "model = coupling\n";
    out << "symmetry = triplet_nodeph\n";
    for (const auto& [w, entry] : sc.mix)
      out << "mix = " << fmt(w) << " " << fmt(entry.kappa) << " "
          << fmt(entry.pi[0].real()) << " " << fmt(entry.pi[1].real()) << " "
          << fmt(entry.delta[0].real()) << "\n";
  }

  out << "\n[detection]\n";
  out << "eta_s = " << fmt(sc.detection.eta[0]) << "\n";
  if (sc.detection.eta[1] == sc.detection.eta[2] &&
      sc.detection.eta[1] == sc.detection.eta[3]) {
    out << "eta_t = " << fmt(sc.detection.eta[1]) << "\n";
  } else {
    out << "eta_t0 = " << fmt(sc.detection.eta[1]) << "\n";
    out << "eta_tp = " << fmt(sc.detection.eta[2]) << "\n";
    out << "eta_tm = " << fmt(sc.detection.eta[3]) << "\n";
  }

  out << "\n[rate]\n";
  const char* kind = sc.rate_model.kind == RateModel::Kind::Constant ? "constant"
                     : sc.rate_model.kind == RateModel::Kind::Exponential
                         ? "exponential"
                         : "algebraic";
  out << "kind = " << kind << "\n";
  out << "r = " << fmt(sc.rate_model.r) << "\n";
  out << "a = " << fmt(sc.rate_model.a) << "\n";
  if (sc.rate_model.t_inf >= 0) out << "t_inf = " << fmt(sc.rate_model.t_inf) << "\n";

  out << "\n[run]\n";
  out << "mode = " << to_string(sc.run.mode) << "\n";
  out << "t_max = " << fmt(sc.run.t_max) << "\n";
  out << "n_grid = " << sc.run.n_grid << "\n";
  out << "n_traj = " << sc.run.n_traj << "\n";
  if (sc.run.n_cloud > 0) out << "n_cloud = " << sc.run.n_cloud << "\n";
  if (sc.run.seed_set) out << "seed = " << sc.run.seed << "\n";
  if (sc.run.threads != 1) out << "threads = " << sc.run.threads << "\n";
  if (sc.run.sweep_angles > 0) out << "sweep_angles = " << sc.run.sweep_angles << "\n";
  out << "delta_b = " << fmt(sc.run.delta_b) << "\n";
  if (!sc.run.out.empty()) out << "out = " << sc.run.out << "\n";
  return out.str();
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace rpsim
