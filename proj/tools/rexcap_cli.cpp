// rexcap: bounds, limit quantiles, rank detection and simulation from the
// command line. Exit codes: 0 ok, 1 I/O or internal failure, 2 bad arguments,
// 3 malformed CSV, 4 degenerate data.

#include <CLI11.hpp>
#include <json.hpp>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rexcap/detect.hpp"
#include "rexcap/montecarlo.hpp"
#include "rexcap/packing.hpp"
#include "rexcap/rex.hpp"

namespace {

using nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kIo = 1, kArgs = 2, kFormat = 3, kDegenerate = 4 };

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string cell(const ordered_json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) return fmt_num(v.get<double>());
  return v.dump();
}

// Flat objects only; nested objects are emitted with dotted keys.
void flatten(const ordered_json& obj, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  for (const auto& [key, value] : obj.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      flatten(value, name, out);
    } else {
      out.emplace_back(name, cell(value));
    }
  }
}

void emit(const ordered_json& obj, const std::string& format, std::ostream& os) {
  if (format == "json") {
    os << obj.dump(2) << "\n";
    return;
  }
  std::vector<std::pair<std::string, std::string>> rows;
  flatten(obj, "", rows);
  if (format == "csv") {
    for (std::size_t i = 0; i < rows.size(); ++i) os << (i ? "," : "") << rows[i].first;
    os << "\n";
    for (std::size_t i = 0; i < rows.size(); ++i) os << (i ? "," : "") << rows[i].second;
    os << "\n";
    return;
  }
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.first.size());
  for (const auto& r : rows) os << r.first << std::string(width + 2 - r.first.size(), ' ') << r.second << "\n";
}

ordered_json opt_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json opt_json(const std::optional<std::int64_t>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

struct DimsArgs {
  std::optional<std::int64_t> p;
  std::optional<double> log_p;

  rexcap::ProblemDims resolve(std::int64_t n) const {
    if (p) return rexcap::ProblemDims::from_count(n, *p);
    if (log_p) return rexcap::ProblemDims::from_log_p(n, *log_p);
    throw rexcap::UsageError("one of --p or --log-p is required");
  }
};

void add_dims_options(CLI::App* cmd, DimsArgs& args) {
  auto* p = cmd->add_option("--p", args.p, "number of vectors (integer)");
  auto* lp = cmd->add_option("--log-p", args.log_p, "natural log of the number of vectors");
  p->excludes(lp);
  lp->excludes(p);
}

void add_format_option(CLI::App* cmd, std::string& format) {
  cmd->add_option("--format", format, "output format")->check(CLI::IsMember({"json", "table", "csv"}));
}

// ---- bound

struct BoundArgs {
  std::string kind = "saber";
  std::optional<std::int64_t> n;
  std::optional<std::int64_t> d;
  DimsArgs dims;
  std::optional<double> delta;
  std::string format = "table";
};

int run_bound(const BoundArgs& a) {
  ordered_json out;
  out["kind"] = a.kind;
  if (a.kind == "rex") {
    if (!a.d) throw rexcap::UsageError("--kind rex needs --d");
    if (a.delta) throw rexcap::UsageError("--delta applies to saber and sabre only");
    const auto dm = a.dims.resolve(*a.d);
    out["n"] = nullptr;
    out["d"] = *a.d;
    out["p"] = opt_json(a.dims.p);
    out["log_p"] = dm.log_p();
    out["value"] = rexcap::rex_bound(dm);
    out["delta"] = nullptr;
    out["tail_bound"] = nullptr;
  } else {
    if (!a.n) throw rexcap::UsageError("--kind " + a.kind + " needs --n");
    if (a.d) throw rexcap::UsageError("--d applies to --kind rex only");
    const bool sabre = a.kind == "sabre";
    if (sabre && *a.n < 3) throw rexcap::UsageError("sabre needs --n >= 3");
    const auto dm = a.dims.resolve(sabre ? *a.n - 1 : *a.n);
    out["n"] = *a.n;
    out["d"] = nullptr;
    out["p"] = opt_json(a.dims.p);
    out["log_p"] = dm.log_p();
    out["value"] = rexcap::saber(dm);
    out["delta"] = opt_json(a.delta);
    out["tail_bound"] = a.delta ? ordered_json(rexcap::saber_tail_bound(dm, *a.delta)) : ordered_json(nullptr);
  }
  emit(out, a.format, std::cout);
  return kOk;
}

// ---- quantile

struct QuantileArgs {
  std::int64_t n = 0;
  DimsArgs dims;
  double q = 0.95;
  std::string format = "table";
};

int run_quantile(const QuantileArgs& a) {
  const auto dm = a.dims.resolve(a.n);
  const auto k = rexcap::std_constants(dm);
  ordered_json out;
  out["n"] = a.n;
  out["p"] = opt_json(a.dims.p);
  out["log_p"] = dm.log_p();
  out["q"] = a.q;
  out["a"] = k.a;
  out["b"] = k.b;
  out["c"] = k.c;
  out["msq_quantile"] = rexcap::msq_limit_quantile(a.q, dm);
  out["m_quantile"] = rexcap::m_limit_quantile(a.q, dm);
  emit(out, a.format, std::cout);
  return kOk;
}

// ---- CSV

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) cells.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
  return v;
}

rexcap::DataMatrix read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    std::vector<double> parsed;
    parsed.reserve(cells.size());
    bool numeric = true;
    for (const auto& c : cells) {
      const auto v = parse_number(c);
      if (!v) {
        numeric = false;
        break;
      }
      parsed.push_back(*v);
    }
    if (first) {
      first = false;
      cols = cells.size();
      if (!numeric) continue;  // header row
    }
    if (cells.size() != cols) {
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(cols) + " cells, got " +
                        std::to_string(cells.size()));
    }
    if (!numeric) throw FormatError("line " + std::to_string(line_no) + ": non-numeric cell");
    for (double v : parsed) {
      if (!std::isfinite(v)) throw FormatError("line " + std::to_string(line_no) + ": non-finite value");
    }
    values.insert(values.end(), parsed.begin(), parsed.end());
    ++rows;
  }
  if (in.bad()) throw IoError("read failure on " + path);
  if (rows == 0) throw FormatError("no data rows");
  if (cols < 2) throw FormatError("need at least two columns");
  return {rows, cols, std::move(values)};
}

// ---- detect

struct DetectArgs {
  std::string input;
  bool pre_standardized = false;
  double alpha = 0.05;
  double d_cap = 1e6;
  std::string format = "json";
};

ordered_json detection_json(const rexcap::DetectionResult& r) {
  ordered_json out;
  out["d_hat_real"] = r.d_hat_real;
  out["d_hat"] = r.d_hat;
  out["ci_upper"] = opt_json(r.ci_upper);
  out["ci_upper_real"] = opt_json(r.ci_upper_real);
  out["alpha"] = r.alpha;
  out["estimate_solved"] = r.estimate_solved;
  out["ci_solved"] = r.ci_solved;
  out["scale"] = r.scale;
  return out;
}

int run_detect(const DetectArgs& a) {
  const auto w = read_csv(a.input);
  rexcap::SearchOptions opts;
  opts.d_cap = a.d_cap;
  const auto r = rexcap::detect(w, a.pre_standardized, a.alpha, opts);
  ordered_json out;
  out["n"] = w.rows();
  out["p"] = w.cols();
  out["pre_standardized"] = a.pre_standardized;
  out.update(detection_json(r));
  emit(out, a.format, std::cout);
  return kOk;
}

// ---- simulate / generate

struct ModelArgs {
  std::int64_t n = 20;
  std::int64_t p = 8000;
  std::int64_t d = 11;
  std::uint64_t seed = 0;
  std::string setting = "noiseless";
};

void add_model_options(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--n", m.n, "observations per dataset")->capture_default_str();
  cmd->add_option("--p", m.p, "variables")->capture_default_str();
  cmd->add_option("--d", m.d, "true rank")->capture_default_str();
  cmd->add_option("--seed", m.seed, "master seed")->required();
  cmd->add_option("--setting", m.setting, "data-generating setting")
      ->check(CLI::IsMember({"noiseless", "equal-variance"}))
      ->capture_default_str();
}

rexcap::ExperimentConfig make_config(const ModelArgs& m, std::int64_t replicates, double alpha) {
  if (m.setting == "noiseless") return rexcap::noiseless_config(m.n, m.p, m.d, replicates, m.seed, alpha);
  if (m.p < 2) throw rexcap::UsageError("--p must be >= 2");
  return rexcap::equal_variance_config(m.n, m.p, m.d, replicates, m.seed, alpha);
}

struct SimulateArgs {
  ModelArgs model;
  std::int64_t replicates = 1000;
  double alpha = 0.05;
  unsigned threads = 0;
  std::string out;
  std::string records;
  std::string format = "table";
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << content;
  f.close();
  if (!f) throw IoError("write failure on " + path);
}

int run_simulate(const SimulateArgs& a) {
  const auto cfg = make_config(a.model, a.replicates, a.alpha);
  const auto res = rexcap::run_experiment(cfg, a.threads);
  const auto& r = res.report;

  ordered_json doc;
  auto& c = doc["config"];
  c["setting"] = a.model.setting;
  c["n"] = cfg.params.n;
  c["p"] = cfg.params.p;
  c["d"] = cfg.params.d;
  c["tau"] = cfg.params.tau;
  c["sigma"] = cfg.params.sigma;
  c["replicates"] = cfg.replicates;
  c["alpha"] = cfg.alpha;
  c["seed"] = cfg.params.seed;
  auto& s = doc["report"];
  s["replicates"] = r.replicates;
  s["mse"] = r.mse;
  s["coverage"] = r.coverage;
  s["mean_upper"] = r.mean_upper;
  s["median_upper"] = r.median_upper;
  s["mean_upper_integer"] = r.mean_upper_integer;
  s["median_upper_integer"] = r.median_upper_integer;
  s["unsolved_ci_count"] = r.unsolved_ci_count;
  s["unsolved_est_count"] = r.unsolved_est_count;

  if (!a.out.empty()) write_file(a.out, doc.dump(2) + "\n");
  if (!a.records.empty()) {
    std::ostringstream csv;
    csv << "replicate,d_hat_real,d_hat,ci_upper,est_solved,ci_solved\n";
    for (const auto& rec : res.records) {
      const auto& x = rec.result;
      csv << rec.replicate << "," << fmt_num(x.d_hat_real) << "," << x.d_hat << ","
          << (x.ci_upper ? std::to_string(*x.ci_upper) : "") << "," << (x.estimate_solved ? 1 : 0) << ","
          << (x.ci_solved ? 1 : 0) << "\n";
    }
    write_file(a.records, csv.str());
  }
  emit(a.format == "json" ? doc : doc["report"], a.format, std::cout);
  return kOk;
}

struct GenerateArgs {
  ModelArgs model;
  std::string out;
};

int run_generate(const GenerateArgs& a) {
  const auto cfg = make_config(a.model, 1, 0.05);
  auto rng = rexcap::stream_rng(cfg.params.seed, 0);
  const auto w = rexcap::generate_dataset(cfg.params, rng);
  std::ostringstream csv;
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) csv << (j ? "," : "") << fmt_num(w(i, j));
    csv << "\n";
  }
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    write_file(a.out, csv.str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spherical cap packing bounds and rank-extreme detection"};
  app.require_subcommand(1);

  BoundArgs bound;
  auto* bound_cmd = app.add_subcommand("bound", "SABER / SABRE / ReX bound");
  bound_cmd->add_option("--kind", bound.kind)->check(CLI::IsMember({"saber", "sabre", "rex"}))->capture_default_str();
  bound_cmd->add_option("--n", bound.n, "dimension");
  bound_cmd->add_option("--d", bound.d, "rank (for --kind rex)");
  add_dims_options(bound_cmd, bound.dims);
  bound_cmd->add_option("--delta", bound.delta, "also report the tail probability bound at this delta");
  add_format_option(bound_cmd, bound.format);

  QuantileArgs quant;
  auto* quant_cmd = app.add_subcommand("quantile", "limit-law quantile of the maximal squared inner product");
  quant_cmd->add_option("--n", quant.n, "dimension")->required();
  add_dims_options(quant_cmd, quant.dims);
  quant_cmd->add_option("--q", quant.q, "probability in (0,1)")->capture_default_str();
  add_format_option(quant_cmd, quant.format);

  DetectArgs det;
  auto* det_cmd = app.add_subcommand("detect", "rank estimate and upper confidence bound from a CSV matrix");
  det_cmd->add_option("--input", det.input, "CSV file, rows = observations")->required();
  det_cmd->add_flag("--pre-standardized", det.pre_standardized, "skip centering and scaling");
  det_cmd->add_option("--alpha", det.alpha)->capture_default_str();
  det_cmd->add_option("--d-cap", det.d_cap, "upper end of the rank search")->capture_default_str();
  add_format_option(det_cmd, det.format);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "replicate experiment on simulated factor-model data");
  add_model_options(sim_cmd, sim.model);
  sim_cmd->add_option("--replicates", sim.replicates)->capture_default_str();
  sim_cmd->add_option("--alpha", sim.alpha)->capture_default_str();
  sim_cmd->add_option("--threads", sim.threads, "worker threads (0 = all cores)")->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "write the JSON report here");
  sim_cmd->add_option("--records", sim.records, "write per-replicate CSV here");
  add_format_option(sim_cmd, sim.format);

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "write one simulated dataset as CSV");
  add_model_options(gen_cmd, gen.model);
  gen_cmd->add_option("--out", gen.out, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kArgs;
  }

  try {
    if (*bound_cmd) return run_bound(bound);
    if (*quant_cmd) return run_quantile(quant);
    if (*det_cmd) return run_detect(det);
    if (*sim_cmd) return run_simulate(sim);
    if (*gen_cmd) return run_generate(gen);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFormat;
  } catch (const rexcap::DegenerateInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDegenerate;
  } catch (const rexcap::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kArgs;
  } catch (const rexcap::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kArgs;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kIo;
  }
  return kArgs;
}
