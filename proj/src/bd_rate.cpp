// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>

#include "reuse_inr/errors.hpp"
#include "reuse_inr/network_config.hpp"
#include "reuse_inr/video.hpp"

namespace reuse_inr {

namespace {

struct Curve {
  Eigen::VectorXd psnr;
  Eigen::VectorXd log_rate;
};

Curve prepare(const std::vector<RDPoint>& points, const char* which) {
  if (points.size() < 2) fail(ErrorKind::Evaluation, std::string(which) + " curve needs at least two points");
  std::vector<RDPoint> sorted = points;
  std::sort(sorted.begin(), sorted.end(), [](const RDPoint& a, const RDPoint& b) { return a.psnr < b.psnr; });
  Curve c{Eigen::VectorXd(static_cast<Index>(sorted.size())), Eigen::VectorXd(static_cast<Index>(sorted.size()))};
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& p = sorted[i];
    if (!(p.bpp > 0.0) || !std::isfinite(p.bpp) || !std::isfinite(p.psnr))
      fail(ErrorKind::Evaluation, std::string(which) + " point '" + p.label + "' needs a positive rate and finite PSNR");
    if (i > 0 && p.psnr == sorted[i - 1].psnr)
      fail(ErrorKind::Evaluation, std::string(which) + " curve repeats PSNR " + std::to_string(p.psnr));
    c.psnr[static_cast<Index>(i)] = p.psnr;
    c.log_rate[static_cast<Index>(i)] = std::log10(p.bpp);
  }
  return c;
}

/// Integral of the least-squares cubic through (psnr, log_rate) over [lo, hi].
double cubic_integral(const Curve& c, double lo, double hi) {
  const Index n = c.psnr.size();
  Eigen::MatrixXd v(n, 4);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < 4; ++k) v(i, k) = std::pow(c.psnr[i], static_cast<double>(k));
  const Eigen::Vector4d p = v.colPivHouseholderQr().solve(c.log_rate);
  auto antiderivative = [&](double x) {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) s += p[k] * std::pow(x, k + 1) / (k + 1);
    return s;
  };
  return antiderivative(hi) - antiderivative(lo);
}

/// Integral of the piecewise-linear interpolant over [lo, hi] (inside the curve's span).
double linear_integral(const Curve& c, double lo, double hi) {
  auto at = [&](double x) {
    Index i = 0;
    while (i + 2 < c.psnr.size() && x > c.psnr[i + 1]) ++i;
    const double t = (x - c.psnr[i]) / (c.psnr[i + 1] - c.psnr[i]);
    return c.log_rate[i] + t * (c.log_rate[i + 1] - c.log_rate[i]);
  };
  std::vector<double> knots{lo};
  for (Index i = 0; i < c.psnr.size(); ++i)
    if (c.psnr[i] > lo && c.psnr[i] < hi) knots.push_back(c.psnr[i]);
  knots.push_back(hi);
  double s = 0.0;
  for (std::size_t i = 1; i < knots.size(); ++i) s += 0.5 * (at(knots[i - 1]) + at(knots[i])) * (knots[i] - knots[i - 1]);
  return s;
}

}  // namespace

BdRateResult bd_rate(const std::vector<RDPoint>& anchor, const std::vector<RDPoint>& test) {
  const Curve a = prepare(anchor, "anchor");
  const Curve t = prepare(test, "test");
  const double lo = std::max(a.psnr.minCoeff(), t.psnr.minCoeff());
  const double hi = std::min(a.psnr.maxCoeff(), t.psnr.maxCoeff());
  if (!(hi > lo)) fail(ErrorKind::Evaluation, "anchor and test curves share no PSNR interval");

  BdRateResult r;
  r.piecewise_linear = a.psnr.size() < 4 || t.psnr.size() < 4;
  const double ia = r.piecewise_linear ? linear_integral(a, lo, hi) : cubic_integral(a, lo, hi);
  const double it = r.piecewise_linear ? linear_integral(t, lo, hi) : cubic_integral(t, lo, hi);
  r.percent = (std::pow(10.0, (it - ia) / (hi - lo)) - 1.0) * 100.0;
  return r;
}

void write_rd_csv(const std::filesystem::path& path, const std::vector<RDPoint>& points) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.precision(17);
  out << "label,bpp,psnr\n";
  for (const auto& p : points) {
    if (p.label.find_first_of(",\n") != std::string::npos)
      fail(ErrorKind::Data, "RD label '" + p.label + "' may not contain commas or newlines");
    out << p.label << ',' << p.bpp << ',' << p.psnr << '\n';
  }
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

std::vector<RDPoint> read_rd_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "label,bpp,psnr")
    fail(ErrorKind::Format, path.string() + ": expected header 'label,bpp,psnr'");
  std::vector<RDPoint> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string label, b, p;
    if (!std::getline(ss, label, ',') || !std::getline(ss, b, ',') || !std::getline(ss, p) ||
        p.find(',') != std::string::npos)
      fail(ErrorKind::Format, path.string() + ":" + std::to_string(row) + ": expected three fields");
    try {
      out.push_back({label, parse_double("bpp", b), parse_double("psnr", p)});
    } catch (const Error& e) {
      fail(ErrorKind::Format, path.string() + ":" + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace reuse_inr
