#include "qqlab/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "qqlab/error.hpp"

namespace qqlab::io {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

bool is_container(const Json& j) { return j.is_object() || j.is_array(); }

void emit(const Json& j, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) + 2, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        out += Json(it.key()).dump();
        out += ": ";
        emit(it.value(), indent + 2, out);
      }
      out += '\n';
      out.append(static_cast<std::size_t>(indent), ' ');
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      bool flat = true;
      for (const Json& e : j) flat = flat && !is_container(e);
      if (flat) {
        out += '[';
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i > 0) out += ", ";
          emit(j[i], indent, out);
        }
        out += ']';
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i > 0) out += ",\n";
        out += pad;
        emit(j[i], indent + 2, out);
      }
      out += '\n';
      out.append(static_cast<std::size_t>(indent), ' ');
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      const double d = j.get<double>();
      out += std::isfinite(d) ? fmt::format("{:.17g}", d) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
    s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::kParse, fmt::format("bad {} '{}'", what, s));
  }
  return v;
}

std::uint64_t parse_u64(std::string_view s, std::string_view what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParse, fmt::format("bad {} '{}'", what, s));
  }
  return v;
}

template <typename T>
T get_field(const Json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::kParse, fmt::format("missing field '{}'", key));
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("field '{}': {}", key, e.what()));
  }
}

std::filesystem::path resolve(const std::filesystem::path& p,
                              const std::filesystem::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

std::string dump(const Json& j) {
  std::string out;
  emit(j, 0, out);
  out += '\n';
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write '{}'", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, fmt::format("write failed for '{}'", path.string()));
}

double to_degrees(double radians) noexcept {
  const double d = std::round(radians / kDeg * 1e9) / 1e9;
  return d == 0.0 ? 0.0 : d;
}

double to_radians(double degrees) noexcept { return degrees * kDeg; }

std::string format_degrees(double degrees) {
  std::string s = fmt::format("{:.9f}", degrees);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

Json amplitude_to_json(Amplitude a) { return Json::array({a.real(), a.imag()}); }

Amplitude amplitude_from_json(const Json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return {j[0].get<double>(), j[1].get<double>()};
  }
  throw Error(ErrorCode::kParse, fmt::format("amplitude must be [re, im], got {}", j.dump()));
}

Json state_to_json(const QuquartParams& q) {
  Json j = Json::object();
  j["format"] = "qqlab-state";
  j["version"] = kStateFormatVersion;
  j["c1"] = amplitude_to_json(q.c1);
  j["b_plus"] = amplitude_to_json(q.b_plus);
  j["c4"] = amplitude_to_json(q.c4);
  j["b_minus"] = amplitude_to_json(q.b_minus);
  j["norm_squared"] = q.norm_squared();
  return j;
}

QuquartParams state_from_json(const Json& j, Renormalize renormalize) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "state file must hold a JSON object");
  if (j.contains("version") && j["version"] != kStateFormatVersion) {
    throw Error(ErrorCode::kParse,
                fmt::format("unsupported state version {}", j["version"].dump()));
  }
  auto amp = [&](const char* key) {
    if (!j.contains(key)) throw Error(ErrorCode::kParse, fmt::format("missing '{}'", key));
    return amplitude_from_json(j.at(key));
  };
  return make_ququart(amp("c1"), amp("b_plus"), amp("c4"), amp("b_minus"), renormalize);
}

QuquartParams read_state(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kParse, fmt::format("{}: {}", path.string(), e.what()));
  }
  return state_from_json(j);
}

void write_state(const std::filesystem::path& path, const QuquartParams& q) {
  write_text(path, dump(state_to_json(q)));
}

Json matrix_to_json(const Eigen::MatrixXcd& m, std::string_view basis) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(amplitude_to_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return Json{{"basis", basis}, {"rows", m.rows()}, {"cols", m.cols()}, {"entries", rows}};
}

Json report_to_json(const CorrelationReport& r) {
  Json mps = {
      {"k_bar", r.k_bar},
      {"c_bar", r.c_bar},
      {"s_rel", r.s_rel},
      {"s_rel_method", to_string(r.s_rel_method)},
      {"mutual_info", r.mutual_info},
      {"c_cl", r.c_cl},
      {"c_cl_from_k", r.c_cl_from_k},
      {"p_bar", r.p_bar},
  };
  Json two = {{"k_2qb", r.k_2qb}, {"c_2qb", r.c_2qb}};
  return Json{{"mps", mps}, {"two_qubit_model", two}};
}

std::string report_csv_header(std::string_view parameter) {
  return fmt::format(
      "{},k_bar,c_bar,s_rel,s_rel_method,mutual_info,c_cl,c_cl_from_k,p_bar,k_2qb,c_2qb",
      parameter);
}

std::string report_csv_row(double parameter, const CorrelationReport& r) {
  return fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}",
                     parameter, r.k_bar, r.c_bar, r.s_rel, to_string(r.s_rel_method),
                     r.mutual_info, r.c_cl, r.c_cl_from_k, r.p_bar, r.k_2qb, r.c_2qb);
}

std::string record_to_csv(const CountRecord& r) {
  const MeasurementConfig& c = r.config;
  const std::string prefix =
      fmt::format("{},{},{},{}", format_degrees(to_degrees(c.ch1.angle)), to_string(c.ch1.filter),
                  format_degrees(to_degrees(c.ch2.angle)), to_string(c.ch2.filter));
  std::string out(kCsvHeader);
  out += '\n';
  for (std::size_t i = 0; i < r.outcomes.size(); ++i) {
    const std::string count = r.exact() ? fmt::format("{:.17g}", r.counts[i])
                                        : fmt::format("{:.0f}", r.counts[i]);
    out += fmt::format("{},{},{},{},{}\n", prefix, r.outcomes[i].label(), count, c.n_total,
                       c.seed);
  }
  return out;
}

CountRecord record_from_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::string_view line : split(text, '\n')) {
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty() || lines.front() != kCsvHeader) {
    throw Error(ErrorCode::kParse, "count log must start with the standard header");
  }
  if (lines.size() == 1) throw Error(ErrorCode::kEmptyRecord, "count log has no rows");

  CountRecord r;
  std::vector<std::string_view> head;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (f.size() != 8) {
      throw Error(ErrorCode::kParse, fmt::format("line {}: expected 8 fields", i + 1));
    }
    if (i == 1) {
      head.assign(f.begin(), f.end());
      r.config = make_config(to_radians(parse_double(f[0], "angle")),
                             to_radians(parse_double(f[2], "angle")),
                             parse_u64(f[6], "n_total"), parse_u64(f[7], "seed"),
                             parse_filter(f[1]), parse_filter(f[3]));
    } else if (f[0] != head[0] || f[1] != head[1] || f[2] != head[2] || f[3] != head[3] ||
               f[6] != head[6] || f[7] != head[7]) {
      throw Error(ErrorCode::kParse,
                  fmt::format("line {}: settings differ from the first row", i + 1));
    }
    const Outcome o = Outcome::parse(f[4]);
    if ((o.freq1 >= 0) != r.config.frequency_resolved()) {
      throw Error(ErrorCode::kParse,
                  fmt::format("line {}: outcome '{}' does not match the filters", i + 1, f[4]));
    }
    if (std::find(r.outcomes.begin(), r.outcomes.end(), o) != r.outcomes.end()) {
      throw Error(ErrorCode::kParse, fmt::format("line {}: duplicate outcome", i + 1));
    }
    r.outcomes.push_back(o);
    r.counts.push_back(parse_double(f[5], "count"));
  }
  r.timestamp = r.config.exact() ? "exact" : "synthetic";
  r.validate();
  return r;
}

CountRecord read_record(const std::filesystem::path& path) {
  try {
    return record_from_csv(read_text(path));
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.filename().string(), e.what()));
  }
}

void write_record(const std::filesystem::path& path, const CountRecord& r) {
  write_text(path, record_to_csv(r));
}

std::string record_file_name(const MeasurementConfig& c, std::size_t index) {
  return fmt::format("rec_{:03}_{}_{}_{}_{}.csv", index,
                     format_degrees(to_degrees(c.ch1.angle)), to_string(c.ch1.filter),
                     format_degrees(to_degrees(c.ch2.angle)), to_string(c.ch2.filter));
}

Json config_to_json(const MeasurementConfig& c) {
  return Json{{"ch1_angle_deg", to_degrees(c.ch1.angle)},
              {"ch1_filter", to_string(c.ch1.filter)},
              {"ch2_angle_deg", to_degrees(c.ch2.angle)},
              {"ch2_filter", to_string(c.ch2.filter)},
              {"n_total", c.n_total},
              {"background", c.background}};
}

MeasurementConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "measurement entry must be an object");
  const auto f1 = j.contains("ch1_filter") ? get_field<std::string>(j, "ch1_filter") : "none";
  const auto f2 = j.contains("ch2_filter") ? get_field<std::string>(j, "ch2_filter") : "none";
  MeasurementConfig c = make_config(to_radians(get_field<double>(j, "ch1_angle_deg")),
                                    to_radians(get_field<double>(j, "ch2_angle_deg")),
                                    get_field<std::uint64_t>(j, "n_total"), 0,
                                    parse_filter(f1), parse_filter(f2));
  if (j.contains("background")) {
    c.background = get_field<double>(j, "background");
    if (!(c.background >= 0.0 && c.background <= 1.0)) {
      throw Error(ErrorCode::kOutOfRange, "background must lie in [0, 1]");
    }
  }
  return c;
}

Json manifest_to_json(const CampaignManifest& m) {
  Json list = Json::array();
  for (const MeasurementConfig& c : m.measurements) list.push_back(config_to_json(c));
  Json j = {{"measurements", list},
            {"output_dir", m.output_dir.string()},
            {"seed_base", m.seed_base}};
  if (m.state_file) j["state_file"] = m.state_file->string();
  return j;
}

CampaignManifest manifest_from_json(const Json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "manifest must be a JSON object");
  CampaignManifest m;
  if (j.contains("state_file")) {
    m.state_file = resolve(get_field<std::string>(j, "state_file"), base_dir);
  }
  if (j.contains("output_dir")) {
    m.output_dir = resolve(get_field<std::string>(j, "output_dir"), base_dir);
  }
  if (j.contains("seed_base")) m.seed_base = get_field<std::uint64_t>(j, "seed_base");
  if (j.contains("measurements")) {
    const Json& list = j.at("measurements");
    if (!list.is_array()) throw Error(ErrorCode::kParse, "'measurements' must be an array");
    for (const Json& e : list) m.measurements.push_back(config_from_json(e));
  } else if (j.contains("plan")) {
    const auto plan = get_field<std::string>(j, "plan");
    if (plan != "standard") {
      throw Error(ErrorCode::kParse, fmt::format("unknown plan '{}'", plan));
    }
    const double a0 = j.contains("alpha0_deg") ? get_field<double>(j, "alpha0_deg") : 5.0;
    m.measurements = standard_plan(to_radians(a0), get_field<std::uint64_t>(j, "n_total"));
  }
  if (m.measurements.empty()) {
    throw Error(ErrorCode::kOutOfRange, "manifest lists no measurements");
  }
  for (std::size_t i = 0; i < m.measurements.size(); ++i) {
    m.measurements[i].seed = m.seed_base + i;
  }
  return m;
}

CampaignManifest read_manifest(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kParse, fmt::format("{}: {}", path.string(), e.what()));
  }
  return manifest_from_json(j, path.parent_path());
}

Json estimate_to_json(const QuquartEstimate& e, const std::vector<std::string>& record_names) {
  const MPSEstimate& m = e.mps;
  Json consumed = Json::array();
  for (std::size_t i : e.consumed) {
    if (i < record_names.size()) consumed.push_back(record_names[i]);
    else consumed.push_back(i);
  }
  Json residuals = Json::object();
  for (const auto& [k, v] : e.residuals) residuals[k] = v;
  return Json{
      {"scenario", to_string(m.scenario)},
      {"inversion", e.inversion},
      {"abs_c1", m.abs_c1},
      {"abs_c4", m.abs_c4},
      {"b_plus", m.b_plus},
      {"abs_b_minus", m.abs_b_minus},
      {"phi1_deg", m.phi1 / kDeg},
      {"phi4_deg", m.phi4 / kDeg},
      {"phi_minus_deg", e.phi_minus / kDeg},
      {"cos_phi1", std::cos(m.phi1)},
      {"cos_phi4", std::cos(m.phi4)},
      {"cos_phi_minus", std::cos(e.phi_minus)},
      {"phase_minus_path", to_string(e.phase_minus_path)},
      {"phi_ref_deg", e.phi_ref / kDeg},
      {"cos_phi_minus_rel", e.cos_phi_minus_rel},
      {"ambiguity",
       {{"phi1_sign", m.phi1_sign_ambiguous},
        {"phi4_sign", m.phi4_sign_ambiguous},
        {"phi_minus_sign", e.phi_minus_sign_ambiguous},
        {"b_plus_root", m.b_plus_root_ambiguous}}},
      {"residuals", residuals},
      {"consumed_records", consumed},
      {"state", state_to_json(e.to_params())},
  };
}

}  // namespace qqlab::io
