#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "alsn/data.hpp"
#include "alsn/tensor.hpp"

namespace alsn {

struct PrPoint {
  double threshold = 0;
  double precision = 0;
  double recall = 0;
  double f = 0;
};

struct PrReport {
  std::vector<PrPoint> points;  // ascending threshold
  double best_f = 0;
  double best_threshold = 0;
};

// 0.01, 0.02, ..., 0.99.
std::vector<double> default_thresholds();

// F = 2PR / (P + R), 0 when P + R == 0.
double f_measure(double precision, double recall);

// Pixels with score >= threshold are predicted positives. A predicted
// positive is correct if a ground-truth pixel lies within Chebyshev distance
// `match_radius`; a ground-truth pixel is recalled if a predicted positive
// lies within the same distance. Counts are pooled over the whole set before
// P and R are formed; P (R) is 0 when there are no predictions (no truth).
// Score maps are 1 x H x W; targets are nonzero for skeleton pixels.
PrReport pr_curve(const std::vector<Tensor<float>>& scores, const std::vector<GrayImage>& targets,
                  const std::vector<double>& thresholds, int match_radius);

struct BestF {
  double f = 0;
  double threshold = 0;
};

// Maximum F; ties go to the lowest threshold.
BestF best_f(const PrReport& report);

// "threshold,precision,recall,f" with 6 decimals.
std::string pr_csv(const PrReport& report);
void write_pr_csv(const PrReport& report, const std::filesystem::path& path);

}  // namespace alsn
