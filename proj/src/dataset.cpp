#include "fbounds/dataset.hpp"

#include <string>

#include "fbounds/error.hpp"

namespace fbounds {

std::vector<std::size_t> ObservedDataset::arm_counts() const {
  std::vector<std::size_t> counts(design.arms(), 0);
  for (const Observation& row : rows) ++counts.at(row.arm);
  return counts;
}

void ObservedDataset::validate() const {
  const std::size_t k = static_cast<std::size_t>(design.factors());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Observation& row = rows[r];
    const std::string where = "row " + std::to_string(r + 1);
    if (row.arm >= design.arms()) {
      throw Error(ErrorKind::invalid_input, where + ": assignment outside the design");
    }
    if (row.uptake.size() != k) {
      throw Error(ErrorKind::invalid_input, where + ": uptake has wrong length");
    }
    for (int d : row.uptake) {
      if (d != -1 && d != 1) throw Error(ErrorKind::invalid_input, where + ": uptake not +/-1");
    }
    if (!(row.outcome >= 0.0 && row.outcome <= 1.0)) {
      throw Error(ErrorKind::invalid_input, where + ": outcome outside [0,1]");
    }
  }
}

}  // namespace fbounds
