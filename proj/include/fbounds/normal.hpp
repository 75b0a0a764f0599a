#pragma once

namespace fbounds {

/// Standard normal CDF.
double normal_cdf(double x);
/// Standard normal quantile, 0 < p < 1.
double normal_quantile(double p);

}  // namespace fbounds
