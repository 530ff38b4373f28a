#include "alsn/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace alsn {

namespace {

// Square (Chebyshev) dilation of a 0/1 map, separable.
std::vector<std::uint8_t> dilate(const std::vector<std::uint8_t>& on, int h, int w, int r) {
  if (r == 0) return on;
  std::vector<std::uint8_t> rows(on.size(), 0), out(on.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!on[static_cast<std::size_t>(y) * w + x]) continue;
      for (int dx = std::max(0, x - r); dx <= std::min(w - 1, x + r); ++dx) rows[static_cast<std::size_t>(y) * w + dx] = 1;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!rows[static_cast<std::size_t>(y) * w + x]) continue;
      for (int dy = std::max(0, y - r); dy <= std::min(h - 1, y + r); ++dy) out[static_cast<std::size_t>(dy) * w + x] = 1;
    }
  }
  return out;
}

}  // namespace

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 1; i <= 99; ++i) t.push_back(i / 100.0);
  return t;
}

double f_measure(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

PrReport pr_curve(const std::vector<Tensor<float>>& scores, const std::vector<GrayImage>& targets,
                  const std::vector<double>& thresholds, int match_radius) {
  if (scores.empty()) throw std::invalid_argument("pr_curve: empty dataset");
  if (scores.size() != targets.size())
    throw std::invalid_argument("pr_curve: " + std::to_string(scores.size()) + " score maps but " +
                                std::to_string(targets.size()) + " targets");
  if (match_radius < 0) throw std::invalid_argument("pr_curve: match radius must be >= 0");
  if (thresholds.empty()) throw std::invalid_argument("pr_curve: no thresholds");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1])) throw std::invalid_argument("pr_curve: thresholds must ascend");

  const std::size_t nt = thresholds.size();
  std::vector<double> pred_count(nt, 0), pred_hit(nt, 0), truth_hit(nt, 0);
  double truth_count = 0;

  for (std::size_t i = 0; i < scores.size(); ++i) {
    const Tensor<float>& s = scores[i];
    const GrayImage& t = targets[i];
    if (s.rank() != 3 || s.dim(0) != 1 || s.dim(1) != t.height || s.dim(2) != t.width)
      throw std::invalid_argument("pr_curve: score map " + std::to_string(i) + " has shape " + shape_string(s.shape) +
                                  ", target is " + std::to_string(t.height) + "x" + std::to_string(t.width));
    const int h = t.height, w = t.width;
    std::vector<std::uint8_t> truth(t.pixels.size());
    for (std::size_t p = 0; p < truth.size(); ++p) truth[p] = t.pixels[p] ? 1 : 0;
    const std::vector<std::uint8_t> truth_near = dilate(truth, h, w, match_radius);
    for (auto v : truth) truth_count += v;

    std::vector<std::uint8_t> pred(truth.size());
    for (std::size_t k = 0; k < nt; ++k) {
      const float th = static_cast<float>(thresholds[k]);
      for (std::size_t p = 0; p < pred.size(); ++p) pred[p] = s.values[p] >= th ? 1 : 0;
      const std::vector<std::uint8_t> pred_near = dilate(pred, h, w, match_radius);
      for (std::size_t p = 0; p < pred.size(); ++p) {
        pred_count[k] += pred[p];
        pred_hit[k] += pred[p] & truth_near[p];
        truth_hit[k] += truth[p] & pred_near[p];
      }
    }
  }

  PrReport r;
  for (std::size_t k = 0; k < nt; ++k) {
    PrPoint pt;
    pt.threshold = thresholds[k];
    pt.precision = pred_count[k] > 0 ? pred_hit[k] / pred_count[k] : 0.0;
    pt.recall = truth_count > 0 ? truth_hit[k] / truth_count : 0.0;
    pt.f = f_measure(pt.precision, pt.recall);
    r.points.push_back(pt);
  }
  const BestF b = best_f(r);
  r.best_f = b.f;
  r.best_threshold = b.threshold;
  return r;
}

BestF best_f(const PrReport& report) {
  if (report.points.empty()) throw std::invalid_argument("best_f: empty report");
  BestF b{report.points.front().f, report.points.front().threshold};
  for (const auto& p : report.points)
    if (p.f > b.f) b = {p.f, p.threshold};
  return b;
}

std::string pr_csv(const PrReport& report) {
  std::string out = "threshold,precision,recall,f\n";
  char line[128];
  for (const auto& p : report.points) {
    std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f,%.6f\n", p.threshold, p.precision, p.recall, p.f);
    out += line;
  }
  return out;
}

void write_pr_csv(const PrReport& report, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << pr_csv(report);
}

}  // namespace alsn
