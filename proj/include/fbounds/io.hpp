#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "fbounds/dataset.hpp"
#include "fbounds/estimate.hpp"
#include "fbounds/population.hpp"
#include "fbounds/simulate.hpp"

namespace fbounds {

using Json = nlohmann::ordered_json;

struct CsvOptions {
  /// Accept 0/1 codes for z and d, mapping 0 to -1.
  bool binary_coding = false;
  /// Affine map of y from [min, max] onto [0, 1].
  std::optional<std::pair<double, double>> rescale;
};

/// Header `z1,...,zK,d1,...,dK,y`. Errors carry line and column.
ObservedDataset read_dataset_csv(std::istream& in, const CsvOptions& options = {});
ObservedDataset read_dataset_csv_file(const std::string& path, const CsvOptions& options = {});
void write_dataset_csv(std::ostream& out, const ObservedDataset& data);

/// {"K", "N", "uptake": [unit][arm][factor], "outcome": [unit][arm]}, arms
/// in canonical order.
Json population_to_json(const Population& pop);
Population population_from_json(const Json& j);

/// "-1,1" or "+1,-1" -> levels.
Assignment parse_levels(const std::string& text);
std::string format_levels(const Assignment& z);

ScenarioConfig config_from_json(const Json& j);
Json config_to_json(const ScenarioConfig& config);

Json estimate_to_json(const BoundsEstimate& est, const ConfidenceInterval& ci);
Json coverage_to_json(const CoverageReport& report, const ScenarioConfig& config);

Json read_json_file(const std::string& path);
std::string read_text_file(const std::string& path);
/// 64-bit FNV-1a, as 16 hex digits. Used for provenance in place of timestamps.
std::string content_hash(const std::string& bytes);

}  // namespace fbounds
