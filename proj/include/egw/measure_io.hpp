#ifndef EGW_MEASURE_IO_HPP
#define EGW_MEASURE_IO_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "egw/measure.hpp"
#include "egw/types.hpp"

namespace egw {

// Measure file formats.
//
// JSON: {"dim": d, "points": [[...], ...], "weights": [...], "raw_weights": bool}
// CSV:  header "w,x1,...,xd", one atom per row, weight first.
// Raster grid: whitespace/comma separated nonnegative intensities, one image
// row per line; converted to a measure on integer pixel centers shifted by
// the intensity centroid, zero pixels dropped.

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("cannot parse number '" + s + "' in " + where);
  }
}

// Zero-mass atoms are rejected by strict validation; with drop_zero_mass the
// caller asked for them to be removed first (image-derived measures).
inline DiscreteMeasure finalize_measure(Matrix pts, Vector w, bool renormalize,
                                        bool drop_zero_mass) {
  if (drop_zero_mass) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < w.size(); ++i)
      if (w[i] != 0.0) keep.push_back(i);
    if (keep.empty()) throw ValidationError("all atoms have zero mass");
    if (Eigen::Index(keep.size()) != w.size()) {
      Matrix p2(Eigen::Index(keep.size()), pts.cols());
      Vector w2(Eigen::Index(keep.size()));
      for (Eigen::Index i = 0; i < Eigen::Index(keep.size()); ++i) {
        p2.row(i) = pts.row(keep[static_cast<size_t>(i)]);
        w2[i] = w[keep[static_cast<size_t>(i)]];
      }
      pts = std::move(p2);
      w = std::move(w2);
    }
  }
  return DiscreteMeasure(std::move(pts), std::move(w), renormalize);
}

}  // namespace detail

inline DiscreteMeasure load_measure_json(const std::string& path,
                                          bool drop_zero_mass = false) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("JSON parse failure in '" + path + "': " + e.what());
  }
  if (!j.contains("points") || !j.contains("weights"))
    throw ValidationError("'" + path + "' is missing points/weights");
  const auto& jp = j["points"];
  const auto& jw = j["weights"];
  if (!jp.is_array() || jp.empty() || !jw.is_array())
    throw ValidationError("'" + path + "': points/weights must be non-empty arrays");
  const Eigen::Index n = static_cast<Eigen::Index>(jp.size());
  const Eigen::Index d = j.contains("dim") ? Eigen::Index(j["dim"].get<int>())
                                           : Eigen::Index(jp.front().size());
  Matrix pts(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = jp[static_cast<size_t>(i)];
    if (Eigen::Index(row.size()) != d)
      throw ValidationError("'" + path + "': atom " + std::to_string(i) +
                            " has wrong dimension");
    for (Eigen::Index k = 0; k < d; ++k) pts(i, k) = row[static_cast<size_t>(k)].get<double>();
  }
  if (Eigen::Index(jw.size()) != n)
    throw ValidationError("'" + path + "': weight count mismatch");
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = jw[static_cast<size_t>(i)].get<double>();
  const bool raw = j.value("raw_weights", false);
  return detail::finalize_measure(std::move(pts), std::move(w), raw, drop_zero_mass);
}

inline DiscreteMeasure load_measure_csv(const std::string& path, bool raw_weights = false,
                                        bool drop_zero_mass = false) {
  std::istringstream in(detail::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "' is empty");
  auto header = detail::split(line, ',');
  if (header.empty() || header[0] != "w")
    throw ValidationError("'" + path + "': expected CSV header w,x1,...,xd");
  const Eigen::Index d = static_cast<Eigen::Index>(header.size()) - 1;
  std::vector<double> ws;
  std::vector<double> coords;
  Eigen::Index n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = detail::split(line, ',');
    if (Eigen::Index(fields.size()) != d + 1)
      throw ValidationError("'" + path + "' row " + std::to_string(n + 2) +
                            ": expected " + std::to_string(d + 1) + " fields");
    ws.push_back(detail::parse_double(fields[0], path));
    for (Eigen::Index k = 1; k <= d; ++k)
      coords.push_back(detail::parse_double(fields[static_cast<size_t>(k)], path));
    ++n;
  }
  if (n == 0) throw ValidationError("'" + path + "' has no atoms");
  Matrix pts(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) pts(i, k) = coords[static_cast<size_t>(i * d + k)];
  Vector w = Eigen::Map<Vector>(ws.data(), n);
  return detail::finalize_measure(std::move(pts), std::move(w), raw_weights, drop_zero_mass);
}

/// Dispatch on extension: .json -> JSON, anything else -> CSV.
inline DiscreteMeasure load_measure(const std::string& path, bool drop_zero_mass = false) {
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
    return load_measure_json(path, drop_zero_mass);
  return load_measure_csv(path, false, drop_zero_mass);
}

inline void save_measure_json(const DiscreteMeasure& m, const std::string& path) {
  nlohmann::json j;
  j["dim"] = m.dim();
  j["raw_weights"] = false;
  auto pts = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < m.dim(); ++k) row.push_back(m.points()(i, k));
    pts.push_back(row);
  }
  j["points"] = pts;
  auto w = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.size(); ++i) w.push_back(m.weights()[i]);
  j["weights"] = w;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Raster grids.

struct RasterImage {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Matrix intensity;  // rows x cols, nonnegative
};

inline RasterImage load_raster(const std::string& path) {
  std::istringstream in(detail::read_file(path));
  std::string line;
  std::vector<std::vector<double>> grid;
  while (std::getline(in, line)) {
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!row.empty()) grid.push_back(std::move(row));
  }
  if (grid.empty()) throw ValidationError("raster '" + path + "' is empty");
  RasterImage img;
  img.rows = static_cast<Eigen::Index>(grid.size());
  img.cols = static_cast<Eigen::Index>(grid[0].size());
  img.intensity.resize(img.rows, img.cols);
  for (Eigen::Index r = 0; r < img.rows; ++r) {
    if (Eigen::Index(grid[static_cast<size_t>(r)].size()) != img.cols)
      throw ValidationError("raster '" + path + "' is ragged at row " + std::to_string(r));
    for (Eigen::Index c = 0; c < img.cols; ++c) {
      const double v = grid[static_cast<size_t>(r)][static_cast<size_t>(c)];
      if (!(v >= 0.0) || !std::isfinite(v))
        throw ValidationError("raster '" + path + "' has a negative/NaN intensity");
      img.intensity(r, c) = v;
    }
  }
  return img;
}

/// Rotate a raster about its center by an arbitrary angle, resampling with
/// bilinear interpolation (inverse map). Mass is not exactly conserved; this
/// mirrors the distortion incurred when rotating pixel images off-grid.
inline RasterImage rotate_raster(const RasterImage& img, double degrees) {
  const double th = degrees * M_PI / 180.0;
  const double ct = std::cos(th), st = std::sin(th);
  const double cy = 0.5 * double(img.rows - 1), cx = 0.5 * double(img.cols - 1);
  RasterImage out;
  out.rows = img.rows;
  out.cols = img.cols;
  out.intensity = Matrix::Zero(img.rows, img.cols);
  for (Eigen::Index r = 0; r < img.rows; ++r) {
    for (Eigen::Index c = 0; c < img.cols; ++c) {
      // inverse rotation of the destination pixel into source coordinates
      const double dy = double(r) - cy, dx = double(c) - cx;
      const double sx = ct * dx + st * dy + cx;
      const double sy = -st * dx + ct * dy + cy;
      const double fr = std::floor(sy), fc = std::floor(sx);
      const double ar = sy - fr, ac = sx - fc;
      double acc = 0.0;
      for (int ir = 0; ir <= 1; ++ir) {
        for (int ic = 0; ic <= 1; ++ic) {
          const Eigen::Index rr = Eigen::Index(fr) + ir, cc = Eigen::Index(fc) + ic;
          if (rr < 0 || rr >= img.rows || cc < 0 || cc >= img.cols) continue;
          const double wgt = (ir ? ar : 1.0 - ar) * (ic ? ac : 1.0 - ac);
          acc += wgt * img.intensity(rr, cc);
        }
      }
      out.intensity(r, c) = acc;
    }
  }
  return out;
}

/// Raster -> measure: pixel (r, c) sits at (c, -r) on an integer grid, the
/// intensity centroid is subtracted, intensities become weights (renormalized),
/// zero-mass pixels are dropped.
inline DiscreteMeasure raster_to_measure(const RasterImage& img) {
  double total = 0.0, mx = 0.0, my = 0.0;
  for (Eigen::Index r = 0; r < img.rows; ++r)
    for (Eigen::Index c = 0; c < img.cols; ++c) {
      const double v = img.intensity(r, c);
      total += v;
      mx += v * double(c);
      my += v * double(-r);
    }
  if (!(total > 0.0)) throw ValidationError("raster has zero total intensity");
  mx /= total;
  my /= total;
  std::vector<double> ws, xs, ys;
  for (Eigen::Index r = 0; r < img.rows; ++r)
    for (Eigen::Index c = 0; c < img.cols; ++c) {
      const double v = img.intensity(r, c);
      if (v == 0.0) continue;
      ws.push_back(v);
      xs.push_back(double(c) - mx);
      ys.push_back(double(-r) - my);
    }
  const Eigen::Index n = static_cast<Eigen::Index>(ws.size());
  Matrix pts(n, 2);
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    pts(i, 0) = xs[static_cast<size_t>(i)];
    pts(i, 1) = ys[static_cast<size_t>(i)];
    w[i] = ws[static_cast<size_t>(i)];
  }
  return DiscreteMeasure(std::move(pts), std::move(w), /*renormalize=*/true);
}

/// In-plane rotation matrix by `degrees`. Multiples of 90 use exact entries
/// so grid isometries stay bit-exact.
inline Matrix rotation2d(double degrees) {
  Matrix q(2, 2);
  const long quarter = std::lround(degrees / 90.0);
  if (std::abs(degrees - 90.0 * double(quarter)) < 1e-12) {
    static const double c[4] = {1.0, 0.0, -1.0, 0.0};
    const int k = static_cast<int>(((quarter % 4) + 4) % 4);
    const double ct = c[k], st = c[(k + 3) % 4];  // sin(k*90) = cos((k-1)*90)
    q << ct, -st, st, ct;
    return q;
  }
  const double th = degrees * M_PI / 180.0;
  q << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  return q;
}

}  // namespace egw

#endif  // EGW_MEASURE_IO_HPP
