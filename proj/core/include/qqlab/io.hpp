#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "qqlab/correlations.hpp"
#include "qqlab/measurement.hpp"
#include "qqlab/reconstruction.hpp"
#include "qqlab/state.hpp"

namespace qqlab::io {

using Json = nlohmann::json;

inline constexpr std::string_view kStateFormatVersion = "v1";
inline constexpr std::string_view kCsvHeader =
    "ch1_angle_deg,ch1_filter,ch2_angle_deg,ch2_filter,outcome,count,n_total,seed";

// Serializes with sorted keys, two-space indent and every double printed
// with 17 significant digits, so equal values always give equal bytes.
// Non-finite doubles become null.
std::string dump(const Json& j);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

// Radians to degrees, snapped to 1e-9 deg, and the inverse.
double to_degrees(double radians) noexcept;
double to_radians(double degrees) noexcept;
// Shortest decimal form of a snapped degree value ("45", "2.5").
std::string format_degrees(double degrees);

Json amplitude_to_json(Amplitude a);
// Accepts [re, im] or a bare real number.
Amplitude amplitude_from_json(const Json& j);

Json state_to_json(const QuquartParams& q);
// Validates through make_ququart (throws kNotNormalized, kZeroState) and
// kParse on malformed input.
QuquartParams state_from_json(const Json& j,
                              Renormalize renormalize = Renormalize::kNo);
QuquartParams read_state(const std::filesystem::path& path);
void write_state(const std::filesystem::path& path, const QuquartParams& q);

// Row-major [[ [re, im], ... ], ...] plus the basis label.
Json matrix_to_json(const Eigen::MatrixXcd& m, std::string_view basis);

Json report_to_json(const CorrelationReport& r);
std::string report_csv_header(std::string_view parameter);
std::string report_csv_row(double parameter, const CorrelationReport& r);

std::string record_to_csv(const CountRecord& r);
// Throws kParse on malformed text and kInconsistentTotals via validate().
CountRecord record_from_csv(std::string_view text);
CountRecord read_record(const std::filesystem::path& path);
void write_record(const std::filesystem::path& path, const CountRecord& r);

// "rec_003_45_none_45_none.csv"
std::string record_file_name(const MeasurementConfig& c, std::size_t index);

Json config_to_json(const MeasurementConfig& c);
MeasurementConfig config_from_json(const Json& j);

// A measurement campaign. Record i is simulated with seed seed_base + i.
struct CampaignManifest {
  std::optional<std::filesystem::path> state_file;
  std::vector<MeasurementConfig> measurements;
  std::filesystem::path output_dir;
  std::uint64_t seed_base = 0;
};

Json manifest_to_json(const CampaignManifest& m);
// Relative paths are resolved against base_dir. Besides an explicit
// "measurements" list, {"plan": "standard", "n_total": N, "alpha0_deg": a}
// expands to standard_plan(). Throws kParse, kOutOfRange.
CampaignManifest manifest_from_json(const Json& j,
                                    const std::filesystem::path& base_dir = {});
CampaignManifest read_manifest(const std::filesystem::path& path);

Json estimate_to_json(const QuquartEstimate& e,
                      const std::vector<std::string>& record_names = {});

}  // namespace qqlab::io
