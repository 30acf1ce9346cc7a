#pragma once

// Standard normal distribution helpers.

namespace dirrac {

double normal_pdf(double z);
double normal_cdf(double z);
/// Inverse CDF for p in (0, 1): rational approximation plus one Halley step.
double normal_quantile(double p);

}  // namespace dirrac
