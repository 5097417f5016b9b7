#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ddlab/numerics.hpp"

namespace ddlab {

// One fill color per sample source, kept identical across every plot.
namespace palette {
inline constexpr const char* truth = "#9e9e9e";
inline constexpr const char* base = "#1f77b4";
inline constexpr const char* distilled = "#d62728";
inline constexpr const char* hybrid = "#2ca02c";
inline constexpr const char* skip_first = "#9467bd";
inline constexpr const char* adapter = "#ff7f0e";
const char* for_arm(const std::string& arm);  // UnsupportedKind on unknown names
}  // namespace palette

// 640x640 viewport mapping the fixed data window [-6, 6]^2, y up. Elements
// are emitted in call order on a white background with light axes.
class SvgCanvas {
 public:
  SvgCanvas();

  void scatter(std::span<const Vec2> pts, const std::string& color,
               double radius = 2.0, double opacity = 0.6);
  void polyline(std::span<const Vec2> pts, const std::string& color,
                double width = 1.5, double opacity = 1.0);
  void marker(Vec2 p, const std::string& color, double radius = 5.0);
  void label(Vec2 p, const std::string& text, const std::string& color = "#333333");
  void title(const std::string& text);

  std::string to_string() const;
  void save(const std::filesystem::path& path) const;

  static constexpr int kSize = 640;
  static constexpr double kDataMin = -6.0, kDataMax = 6.0;

 private:
  double px(double x) const;
  double py(double y) const;
  std::vector<std::string> elems_;
};

// 640x640 line chart with data-driven axes for curves (losses, sweeps,
// commitment traces). Series are drawn in add order.
class SvgChart {
 public:
  SvgChart(std::string x_label, std::string y_label);

  void add_series(const std::string& name, const std::string& color,
                  std::span<const double> xs, std::span<const double> ys);
  std::string to_string() const;
  void save(const std::filesystem::path& path) const;

 private:
  struct Series {
    std::string name, color;
    std::vector<double> xs, ys;
  };
  std::string x_label_, y_label_;
  std::vector<Series> series_;
};

}  // namespace ddlab
