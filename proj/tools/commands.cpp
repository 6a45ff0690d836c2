#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <string_view>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "qqlab/correlations.hpp"
#include "qqlab/density.hpp"
#include "qqlab/error.hpp"
#include "qqlab/io.hpp"
#include "qqlab/measurement.hpp"
#include "qqlab/reconstruction.hpp"
#include "qqlab/state.hpp"

namespace qqlab::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

double parse_double(std::string_view text, std::string_view what) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw Error(ErrorCode::kParse, fmt::format("{}: cannot parse '{}' as a number", what, text));
  }
  return v;
}

// "re,im" or "re".
Amplitude parse_amplitude(std::string_view text, std::string_view what) {
  const auto comma = text.find(',');
  if (comma == std::string_view::npos) return {parse_double(text, what), 0.0};
  return {parse_double(text.substr(0, comma), what),
          parse_double(text.substr(comma + 1), what)};
}

struct SweepRange {
  double from = 0.0;
  double to = 1.0;
  int points = 101;

  double at(int i) const {
    if (points == 1) return from;
    return from + (to - from) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
};

// "from:to:points", both ends included.
SweepRange parse_range(std::string_view text) {
  const auto a = text.find(':');
  const auto b = a == std::string_view::npos ? a : text.find(':', a + 1);
  if (b == std::string_view::npos) {
    throw Error(ErrorCode::kParse, fmt::format("sweep range '{}' is not from:to:points", text));
  }
  SweepRange r;
  r.from = parse_double(text.substr(0, a), "sweep range");
  r.to = parse_double(text.substr(a + 1, b - a - 1), "sweep range");
  const double n = parse_double(text.substr(b + 1), "sweep range");
  if (!(n >= 1.0 && n <= 1e6 && n == std::floor(n))) {
    throw Error(ErrorCode::kOutOfRange, "sweep point count must be an integer in [1, 1e6]");
  }
  r.points = static_cast<int>(n);
  return r;
}

fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

std::string format_amplitude(Amplitude a) {
  return fmt::format("{:+.6f}{:+.6f}i", a.real(), a.imag());
}

void print_state(std::ostream& out, const QuquartParams& q) {
  fmt::print(out, "  C1 = {}  B+ = {}  C4 = {}  B- = {}\n", format_amplitude(q.c1),
             format_amplitude(q.b_plus), format_amplitude(q.c4), format_amplitude(q.b_minus));
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string c1, b_plus, c4, b_minus;
  bool random = false;
  std::uint64_t seed = 0;
  bool renormalize = false;
  std::string out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const bool any_amplitude =
      !a.c1.empty() || !a.b_plus.empty() || !a.c4.empty() || !a.b_minus.empty();
  QuquartParams q;
  if (a.random) {
    if (any_amplitude) {
      throw Error(ErrorCode::kParse, "--random cannot be combined with explicit amplitudes");
    }
    Rng rng = make_rng(a.seed);
    q = random_ququart(rng);
  } else {
    if (!any_amplitude) {
      throw Error(ErrorCode::kParse, "give amplitudes (--c1 ... --b-minus) or --random");
    }
    const auto amp = [](const std::string& s, std::string_view what) {
      return s.empty() ? Amplitude{} : parse_amplitude(s, what);
    };
    q = make_ququart(amp(a.c1, "--c1"), amp(a.b_plus, "--b-plus"), amp(a.c4, "--c4"),
                     amp(a.b_minus, "--b-minus"),
                     a.renormalize ? Renormalize::kYes : Renormalize::kNo);
  }
  q = canonicalize(q);
  const fs::path path = or_default(a.out, output_root() / "state.json");
  io::write_state(path, q);
  fmt::print(out, "wrote {}\n", path.string());
  print_state(out, q);
  fmt::print(out, "norm check: |C1|^2+|B+|^2+|C4|^2+|B-|^2 = {:.17g} (deviation {:.3g})\n",
             q.norm_squared(), std::abs(q.norm_squared() - 1.0));
  return 0;
}

// --- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string state;
  std::string manifest;
  std::string plan = "standard";
  std::uint64_t n_total = 1000000;
  bool exact = false;
  std::uint64_t seed_base = 0;
  double alpha0_deg = 5.0;
  double background = 0.0;
  std::string out;
};

std::vector<MeasurementConfig> named_plan(const std::string& name, double alpha0,
                                          std::uint64_t n_total, std::uint64_t seed_base) {
  if (name == "standard") return standard_plan(alpha0, n_total, seed_base);
  if (name == "hv") return {make_config(0.0, 0.0, n_total, seed_base)};
  if (name == "full") {
    // Every angle pair of the standard plan, frequency-resolved.
    std::vector<MeasurementConfig> plan;
    std::uint64_t seed = seed_base;
    for (const MeasurementConfig& c : standard_plan(alpha0, n_total, seed_base)) {
      if (c.frequency_resolved()) continue;
      plan.push_back(make_config(c.ch1.angle, c.ch2.angle, n_total, seed++,
                                 FrequencyFilter::kHigh, FrequencyFilter::kLow));
    }
    plan.push_back(make_config(0.0, io::to_radians(45.0), n_total, seed,
                               FrequencyFilter::kHigh, FrequencyFilter::kLow));
    return plan;
  }
  throw Error(ErrorCode::kParse, fmt::format("unknown plan '{}' (standard, full, hv)", name));
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  io::CampaignManifest m;
  if (!a.manifest.empty()) {
    m = io::read_manifest(a.manifest);
  } else {
    if (!(a.alpha0_deg > 0.0 && a.alpha0_deg < 45.0)) {
      throw Error(ErrorCode::kOutOfRange, "--alpha0 must lie in (0, 45) deg");
    }
    m.seed_base = a.seed_base;
    m.measurements = named_plan(a.plan, io::to_radians(a.alpha0_deg),
                                a.exact ? 0 : a.n_total, a.seed_base);
  }
  if (a.exact) {
    for (MeasurementConfig& c : m.measurements) c.n_total = 0;
  }
  if (a.background != 0.0) {
    if (!(a.background >= 0.0 && a.background <= 1.0)) {
      throw Error(ErrorCode::kOutOfRange, "--background must lie in [0, 1]");
    }
    for (MeasurementConfig& c : m.measurements) c.background = a.background;
  }

  std::optional<fs::path> state_path;
  if (!a.state.empty()) {
    state_path = a.state;
  } else if (m.state_file) {
    state_path = m.state_file;
  }
  if (!state_path) throw Error(ErrorCode::kParse, "no state: pass --state or set state_file");
  const QuquartParams q = io::read_state(*state_path);

  fs::path dir = output_root() / "records";
  if (!a.out.empty()) {
    dir = a.out;
  } else if (!m.output_dir.empty()) {
    dir = m.output_dir;
  }

  for (std::size_t i = 0; i < m.measurements.size(); ++i) {
    const MeasurementConfig& c = m.measurements[i];
    const CountRecord r = simulate_coincidences(q, c);
    const fs::path path = dir / io::record_file_name(c, i);
    io::write_record(path, r);
    fmt::print(out, "{}  {} coincidences, seed {}\n", path.string(),
               c.exact() ? std::string("exact") : std::to_string(c.n_total), c.seed);
  }
  return 0;
}

// --- reconstruct -----------------------------------------------------------

struct ReconstructArgs {
  std::string dir;
  double alpha0_deg = 5.0;
  std::optional<double> zero_threshold;
  std::string out;
};

void print_estimate(std::ostream& out, const QuquartEstimate& e,
                    const std::vector<std::string>& names) {
  const MPSEstimate& m = e.mps;
  fmt::print(out, "scenario   {}\n", to_string(m.scenario));
  fmt::print(out, "inversion  {}\n", e.inversion);
  fmt::print(out, "|C1| = {:.9f}  |C4| = {:.9f}  B+ = {:.9f}  |B-| = {:.9f}\n", m.abs_c1,
             m.abs_c4, m.b_plus, m.abs_b_minus);
  fmt::print(out, "phi1 = {:.6f} deg  phi4 = {:.6f} deg  phi- = {:.6f} deg ({})\n",
             io::to_degrees(m.phi1), io::to_degrees(m.phi4), io::to_degrees(e.phi_minus),
             to_string(e.phase_minus_path));

  std::vector<std::string> flags;
  if (m.phi1_sign_ambiguous) flags.emplace_back("sign of phi1");
  if (m.phi4_sign_ambiguous) flags.emplace_back("sign of phi4");
  if (e.phi_minus_sign_ambiguous) flags.emplace_back("sign of phi-");
  if (m.b_plus_root_ambiguous) flags.emplace_back("B+ root");
  fmt::print(out, "ambiguous  {}\n", flags.empty() ? "none" : fmt::format("{}", fmt::join(flags, ", ")));

  for (const auto& [name, value] : e.residuals) {
    fmt::print(out, "residual   {:<22} {:.3e}\n", name, value);
  }
  fmt::print(out, "records used ({}):\n", e.consumed.size());
  for (std::size_t i : e.consumed) {
    fmt::print(out, "  {}\n", i < names.size() ? names[i] : std::to_string(i));
  }
  out << "state:\n";
  print_state(out, e.to_params());
}

int cmd_reconstruct(const ReconstructArgs& a, std::ostream& out, std::ostream& err) {
  const fs::path dir = a.dir;
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kIo, fmt::format("'{}' is not a directory", dir.string()));
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw Error(ErrorCode::kEmptyRecord, fmt::format("no .csv count logs in '{}'", dir.string()));
  }

  RecordSet records;
  std::vector<std::string> names;
  for (const fs::path& f : files) {
    records.add(io::read_record(f));
    names.push_back(f.filename().string());
  }

  ReconstructionOptions options;
  options.alpha0 = io::to_radians(a.alpha0_deg);
  options.zero_threshold = a.zero_threshold;

  QuquartEstimate e;
  try {
    e = reconstruct_full(records, options);
  } catch (const MissingRecords& missing) {
    fmt::print(err, "error: {}\n", missing.what());
    fmt::print(err, "needed configurations:\n");
    for (const MeasurementConfig& c : missing.needed()) {
      fmt::print(err, "  ch1 {} deg ({}), ch2 {} deg ({})\n",
                 io::format_degrees(io::to_degrees(c.ch1.angle)), to_string(c.ch1.filter),
                 io::format_degrees(io::to_degrees(c.ch2.angle)), to_string(c.ch2.filter));
    }
    return exit_code(missing.code());
  }

  const fs::path path = or_default(a.out, output_root() / "estimate.json");
  io::write_text(path, io::dump(io::estimate_to_json(e, names)));
  print_estimate(out, e, names);
  fmt::print(out, "wrote {}\n", path.string());
  return 0;
}

// --- analyze / compare / sweep ---------------------------------------------

// States along |B-|^2 = x with the qutrit direction and the B- phase of the
// base state. A base state without a qutrit part sweeps from Psi+.
QuquartParams b_minus_point(const QuquartParams& base, double x) {
  const double qutrit_norm = std::sqrt(qutrit_part(base).norm_squared());
  QutritParams u{0.0, 1.0, 0.0};
  if (qutrit_norm > 1e-12) {
    u = {base.c1 / qutrit_norm, base.b_plus / qutrit_norm, base.c4 / qutrit_norm};
  }
  const Amplitude phase =
      std::abs(base.b_minus) > 1e-12 ? base.b_minus / std::abs(base.b_minus) : Amplitude{1.0};
  const double r = std::sqrt(1.0 - x);
  return make_ququart(r * u.c1, r * u.b_plus, r * u.c4, std::sqrt(x) * phase, Renormalize::kYes);
}

std::string sweep_csv(const QuquartParams& base, const std::string& parameter,
                      const SweepRange& range) {
  if (parameter != "b_minus") {
    throw Error(ErrorCode::kParse,
                fmt::format("unknown sweep parameter '{}' (supported: b_minus)", parameter));
  }
  if (!(range.from >= 0.0 && range.to <= 1.0 && range.from <= 1.0 && range.to >= 0.0)) {
    throw Error(ErrorCode::kOutOfRange, "|B-|^2 sweep must stay inside [0, 1]");
  }
  std::string csv = io::report_csv_header("b_minus_sq") + "\n";
  for (int i = 0; i < range.points; ++i) {
    const double x = range.at(i);
    csv += io::report_csv_row(x, correlation_report(b_minus_point(base, x))) + "\n";
  }
  return csv;
}

struct AnalyzeArgs {
  std::string state;
  bool both_models = false;
  bool matrices = false;
  std::vector<std::string> sweep;
  std::string sweep_out;
  std::string out;
};

void print_report(std::ostream& out, const CorrelationReport& r, bool both_models) {
  out << "mixed polarization state (frequencies traced out)\n";
  fmt::print(out, "  K_bar        {:.12f}\n", r.k_bar);
  fmt::print(out, "  P_bar        {:.12f}\n", r.p_bar);
  fmt::print(out, "  C_bar        {:.12f}\n", r.c_bar);
  fmt::print(out, "  S_rel        {:.12f}  ({})\n", r.s_rel, to_string(r.s_rel_method));
  fmt::print(out, "  I            {:.12f}\n", r.mutual_info);
  fmt::print(out, "  C_cl         {:.12f}\n", r.c_cl);
  fmt::print(out, "  C_cl from K  {:.12f}\n", r.c_cl_from_k);
  out << "two-qubit model (frequencies as labels)\n";
  fmt::print(out, "  K_2qb        {:.12f}\n", r.k_2qb);
  fmt::print(out, "  C_2qb        {:.12f}\n", r.c_2qb);
  if (both_models) {
    const double dk = r.k_bar - r.k_2qb;
    const double dc = r.c_bar - r.c_2qb;
    out << "model comparison\n";
    fmt::print(out, "  K_bar - K_2qb  {:+.12f}\n", dk);
    fmt::print(out, "  C_bar - C_2qb  {:+.12f}\n", dc);
    fmt::print(out, "  models {}\n",
               std::abs(dk) > 1e-9 || std::abs(dc) > 1e-9 ? "differ" : "agree");
  }
}

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  const QuquartParams q = io::read_state(a.state);
  const CorrelationReport r = correlation_report(q);

  Json j = io::report_to_json(r);
  j["state"] = io::state_to_json(q);
  if (a.both_models) {
    j["model_difference"] = {{"k", r.k_bar - r.k_2qb}, {"c", r.c_bar - r.c_2qb}};
  }
  if (a.matrices) {
    const DensityMatrix16 full = full_density(wave_function(q));
    const MPSDensity mps = mps_density(q);
    j["matrices"] = {
        {"full", io::matrix_to_json(full.entries, "pol_freq_product_16")},
        {"mps", io::matrix_to_json(mps.entries, "bell_pol_4")},
        {"one_photon", io::matrix_to_json(reduce_one_photon(mps).entries, "hv_2")},
    };
  }
  const fs::path path = or_default(a.out, output_root() / "report.json");
  io::write_text(path, io::dump(j));

  print_state(out, q);
  print_report(out, r, a.both_models);
  fmt::print(out, "wrote {}\n", path.string());

  if (!a.sweep.empty()) {
    const fs::path csv_path =
        or_default(a.sweep_out, output_root() / fmt::format("sweep_{}.csv", a.sweep[0]));
    io::write_text(csv_path, sweep_csv(q, a.sweep[0], parse_range(a.sweep[1])));
    fmt::print(out, "wrote {}\n", csv_path.string());
  }
  return 0;
}

struct SweepArgs {
  std::string parameter;
  std::string range;
  std::string state;
  std::string out;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  QuquartParams base{0.0, 1.0, 0.0, 0.0};
  if (!a.state.empty()) base = io::read_state(a.state);
  const fs::path path =
      or_default(a.out, output_root() / fmt::format("sweep_{}.csv", a.parameter));
  io::write_text(path, sweep_csv(base, a.parameter, parse_range(a.range)));
  fmt::print(out, "wrote {}\n", path.string());
  return 0;
}

void add_analyze_options(CLI::App* cmd, AnalyzeArgs& a) {
  cmd->add_option("--state", a.state, "State JSON file")->required();
  cmd->add_flag("--matrices", a.matrices, "Include density matrices in the report");
  cmd->add_option("--sweep", a.sweep, "Parameter sweep, e.g. --sweep b_minus 0:1:101")
      ->expected(2);
  cmd->add_option("--sweep-out", a.sweep_out, "Sweep CSV path");
  cmd->add_option("-o,--out", a.out, "Report JSON path");
}

}  // namespace

fs::path output_root() {
  if (const char* env = std::getenv("QQLAB_OUTPUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return "qqlab_out";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Biphoton polarization-frequency ququart toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a state file");
  synth_cmd->add_option("--c1", synth.c1, "C1 as re,im");
  synth_cmd->add_option("--b-plus", synth.b_plus, "B+ as re,im");
  synth_cmd->add_option("--c4", synth.c4, "C4 as re,im");
  synth_cmd->add_option("--b-minus", synth.b_minus, "B- as re,im");
  synth_cmd->add_flag("--random", synth.random, "Haar-random state");
  synth_cmd->add_option("--seed", synth.seed, "Seed for --random");
  synth_cmd->add_flag("--renormalize", synth.renormalize, "Rescale to unit norm");
  synth_cmd->add_option("-o,--out", synth.out, "State JSON path");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate coincidence count logs");
  sim_cmd->add_option("--state", sim.state, "State JSON file");
  sim_cmd->add_option("--manifest", sim.manifest, "Campaign manifest JSON");
  sim_cmd->add_option("--plan", sim.plan, "Built-in plan: standard, full, hv");
  sim_cmd->add_option("-n,--n-total", sim.n_total, "Coincidences per record");
  sim_cmd->add_flag("--exact", sim.exact, "Write exact probabilities (n_total = 0)");
  sim_cmd->add_option("--seed-base", sim.seed_base, "Record i uses seed seed_base + i");
  sim_cmd->add_option("--alpha0", sim.alpha0_deg, "Small rotation angle in degrees");
  sim_cmd->add_option("--background", sim.background, "Accidental fraction in [0, 1]");
  sim_cmd->add_option("-o,--out", sim.out, "Output directory");

  ReconstructArgs rec;
  auto* rec_cmd = app.add_subcommand("reconstruct", "Reconstruct a state from count logs");
  rec_cmd->add_option("dir", rec.dir, "Directory of CSV count logs")->required();
  rec_cmd->add_option("--alpha0", rec.alpha0_deg, "Small rotation angle in degrees");
  rec_cmd->add_option("--zero-threshold", rec.zero_threshold, "Gate for |C1|, |C4| = 0");
  rec_cmd->add_option("-o,--out", rec.out, "Estimate JSON path");

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Correlation report for a state");
  add_analyze_options(analyze_cmd, analyze);
  analyze_cmd->add_flag("--both-models", analyze.both_models, "Compare with the two-qubit model");

  AnalyzeArgs compare;
  compare.both_models = true;
  auto* compare_cmd = app.add_subcommand("compare", "Same as analyze --both-models");
  add_analyze_options(compare_cmd, compare);

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Correlation measures along a parameter");
  sweep_cmd->add_option("parameter", sweep.parameter, "Swept parameter (b_minus)")->required();
  sweep_cmd->add_option("range", sweep.range, "from:to:points")->required();
  sweep_cmd->add_option("--state", sweep.state, "Base state; default Psi+");
  sweep_cmd->add_option("-o,--out", sweep.out, "CSV path");

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("qqlab");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth, out);
    if (*sim_cmd) return cmd_simulate(sim, out);
    if (*rec_cmd) return cmd_reconstruct(rec, out, err);
    if (*analyze_cmd) return cmd_analyze(analyze, out);
    if (*compare_cmd) return cmd_analyze(compare, out);
    if (*sweep_cmd) return cmd_sweep(sweep, out);
  } catch (const OptimizerNotConverged& e) {
    fmt::print(err, "error: {} (best bound {:.9g})\n", e.what(), e.best_bound());
    return exit_code(e.code());
  } catch (const Error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return exit_code(ErrorCode::kIo);
  } catch (const Json::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return exit_code(ErrorCode::kParse);
  }
  return 2;
}

}  // namespace qqlab::cli
