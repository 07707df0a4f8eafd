#include "insitu/twomic.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace insitu {

std::string_view to_string(EstimateMethod m) {
  switch (m) {
    case EstimateMethod::traditional: return "traditional";
    case EstimateMethod::network: return "network";
    case EstimateMethod::reference: return "reference";
  }
  return "unknown";
}

ComplexSpectrum calibrate(const ComplexSpectrum& h12_raw, const ComplexSpectrum& hc,
                          const FrequencyGrid& grid) {
  if (h12_raw.size() != hc.size() || hc.size() != grid.size()) {
    throw std::invalid_argument("calibration spectrum length mismatch");
  }
  std::ostringstream bad;
  int count = 0;
  for (Index i = 0; i < hc.size(); ++i) {
    if (std::abs(hc[i]) < 1e-12) bad << (count++ ? ", " : "") << grid[i];
  }
  if (count) throw std::domain_error("calibration spectrum vanishes at " + bad.str() + " Hz");
  return h12_raw.cwiseQuotient(hc);
}

ComplexSpectrum regrid(const Eigen::VectorXd& measured_hz, const ComplexSpectrum& measured,
                       const FrequencyGrid& target) {
  const Index m = measured_hz.size();
  if (m != measured.size() || m < 1) throw std::invalid_argument("measured spectrum shape mismatch");
  for (Index i = 1; i < m; ++i) {
    if (!(measured_hz[i] > measured_hz[i - 1])) {
      throw std::invalid_argument("measured frequencies must be strictly increasing");
    }
  }
  if (target[0] < measured_hz[0] || target.max() > measured_hz[m - 1]) {
    throw std::domain_error("target grid lies outside the measured frequency span");
  }
  ComplexSpectrum out(target.size());
  Index j = 0;
  for (Index i = 0; i < target.size(); ++i) {
    const double f = target[i];
    while (j + 1 < m && measured_hz[j + 1] <= f) ++j;
    if (measured_hz[j] == f || j + 1 == m) {
      out[i] = measured[j];
      continue;
    }
    const double t = (f - measured_hz[j]) / (measured_hz[j + 1] - measured_hz[j]);
    const Complex lo = measured[j];
    const Complex hi = measured[j + 1];
    out[i] = {lo.real() + t * (hi.real() - lo.real()), lo.imag() + t * (hi.imag() - lo.imag())};
  }
  return out;
}

RealSpectrum moving_average(const RealSpectrum& x, int window) {
  const Index n = x.size();
  if (window < 1 || window > n) throw std::invalid_argument("moving-average window out of range");
  const Index before = window / 2;
  const Index after = window - 1 - before;
  Eigen::VectorXd prefix(n + 1);
  prefix[0] = 0.0;
  for (Index i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  RealSpectrum y(n);
  for (Index i = 0; i < n; ++i) {
    const Index lo = std::max<Index>(0, i - before);
    const Index hi = std::min<Index>(n - 1, i + after);
    y[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
  }
  return y;
}

ComplexSpectrum smooth(const ComplexSpectrum& h, int window, int passes) {
  if (passes < 0) throw std::invalid_argument("passes must be non-negative");
  RealSpectrum re = h.real();
  RealSpectrum im = h.imag();
  for (int p = 0; p < passes; ++p) {
    re = moving_average(re, window);
    im = moving_average(im, window);
  }
  ComplexSpectrum out(h.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

namespace {

Complex spherical(const Vec3& a, const Vec3& b, double k) {
  const double r = (a - b).norm();
  return std::polar(1.0 / r, -k * r);
}

}  // namespace

ReflectionEstimate reflection_two_mic(const ComplexSpectrum& h12, const ScenarioGeometry& geom,
                                      const FrequencyGrid& grid, const AirProperties& air) {
  if (h12.size() != grid.size()) throw std::invalid_argument("H12/grid length mismatch");
  geom.validate();
  const Vec3 src = geom.source();
  const Vec3 img = geom.image_source();
  const Vec3 r1 = geom.mic1();
  const Vec3 r2 = geom.mic2();
  ReflectionEstimate est{ComplexSpectrum(grid.size()), {}};
  std::vector<bool> bad(static_cast<std::size_t>(grid.size()), false);
  for (Index i = 0; i < grid.size(); ++i) {
    const double k = grid.wavenumber(i, air);
    const Complex g1 = spherical(r1, src, k);
    const Complex g2 = spherical(r2, src, k);
    const Complex g1i = spherical(r1, img, k);
    const Complex g2i = spherical(r2, img, k);
    const Complex den = h12[i] * g2i - g1i;
    const double scale = std::abs(h12[i] * g2i) + std::abs(g1i);
    if (!(std::abs(den) > 1e-12 * scale)) {
      bad[static_cast<std::size_t>(i)] = true;
      est.flagged.push_back(i);
      continue;
    }
    est.r[i] = (g1 - h12[i] * g2) / den;
  }
  if (est.flagged.size() == static_cast<std::size_t>(grid.size())) {
    throw std::domain_error("two-microphone inversion is singular at every frequency");
  }
  for (Index i : est.flagged) {
    Index lo = i - 1;
    while (lo >= 0 && bad[static_cast<std::size_t>(lo)]) --lo;
    Index hi = i + 1;
    while (hi < grid.size() && bad[static_cast<std::size_t>(hi)]) ++hi;
    if (lo < 0) {
      est.r[i] = est.r[hi];
    } else if (hi >= grid.size()) {
      est.r[i] = est.r[lo];
    } else {
      const double t = (grid[i] - grid[lo]) / (grid[hi] - grid[lo]);
      est.r[i] = est.r[lo] + t * (est.r[hi] - est.r[lo]);
    }
    std::cerr << "warning: two-microphone denominator vanishes at " << grid[i]
              << " Hz; value interpolated\n";
  }
  return est;
}

AbsorptionSpectrum absorption_two_mic(const ComplexSpectrum& h12, const ScenarioGeometry& geom,
                                      const FrequencyGrid& grid, const AirProperties& air) {
  auto est = reflection_two_mic(h12, geom, grid, air);
  return {(1.0 - est.r.cwiseAbs2().array()).matrix(), EstimateMethod::traditional,
          std::move(est.flagged)};
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, delimiter)) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

MeasuredTransfer read_measured_csv(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  const auto header = split_line(line, delimiter);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* required : {"frequency_hz", "re_h12", "im_h12"}) {
    if (!col.count(required)) {
      throw std::runtime_error(path.string() + ": missing column " + required);
    }
  }
  const bool has_hc = col.count("re_hc") && col.count("im_hc");
  std::vector<double> f, hr, hi, cr, ci;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_line(line, delimiter);
    const auto value = [&](const char* name) {
      const auto idx = col.at(name);
      if (idx >= cells.size()) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": short row");
      }
      try {
        return std::stod(cells[idx]);
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad number");
      }
    };
    f.push_back(value("frequency_hz"));
    hr.push_back(value("re_h12"));
    hi.push_back(value("im_h12"));
    if (has_hc) {
      cr.push_back(value("re_hc"));
      ci.push_back(value("im_hc"));
    }
  }
  const auto n = static_cast<Index>(f.size());
  MeasuredTransfer m{Eigen::Map<Eigen::VectorXd>(f.data(), n), ComplexSpectrum(n), std::nullopt};
  for (Index i = 0; i < n; ++i) m.h12[i] = {hr[static_cast<std::size_t>(i)], hi[static_cast<std::size_t>(i)]};
  if (has_hc) {
    ComplexSpectrum hc(n);
    for (Index i = 0; i < n; ++i) hc[i] = {cr[static_cast<std::size_t>(i)], ci[static_cast<std::size_t>(i)]};
    m.hc = std::move(hc);
  }
  return m;
}

TransferSpectrum condition_measurement(const MeasuredTransfer& m, const FrequencyGrid& grid,
                                       int window, int passes) {
  ComplexSpectrum h = m.h12;
  if (m.hc) h = calibrate(h, *m.hc, FrequencyGrid(m.hz));
  h = regrid(m.hz, h, grid);
  h = smooth(h, window, passes);
  for (Index i = 0; i < h.size(); ++i) {
    if (!std::isfinite(h[i].real()) || !std::isfinite(h[i].imag())) {
      throw std::domain_error("conditioned transfer function is not finite");
    }
  }
  TransferSpectrum out{h, std::nullopt};
  if (m.hc) out.hc = regrid(m.hz, *m.hc, grid);
  return out;
}

}  // namespace insitu
