#include "ddlab/svg.hpp"

#include <algorithm>
#include <cmath>

#include "ddlab/checkpoint.hpp"
#include "ddlab/csv.hpp"
#include "ddlab/errors.hpp"

namespace ddlab {

namespace palette {
const char* for_arm(const std::string& arm) {
  if (arm == "truth") return truth;
  if (arm == "base") return base;
  if (arm == "distilled") return distilled;
  if (arm == "hybrid") return hybrid;
  if (arm == "skip_first") return skip_first;
  if (arm == "adapter" || arm == "slider") return adapter;
  throw UnsupportedKind("palette: unknown arm name: " + arm);
}
}  // namespace palette

namespace {

std::string num(double v) {
  // Two decimals are plenty for pixel coordinates.
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape_text(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

SvgCanvas::SvgCanvas() {
  elems_.push_back("<rect width=\"640\" height=\"640\" fill=\"#ffffff\"/>");
  // Axes through the origin of the data window.
  elems_.push_back("<line x1=\"0\" y1=\"" + num(py(0)) + "\" x2=\"640\" y2=\"" +
                   num(py(0)) + "\" stroke=\"#dddddd\" stroke-width=\"1\"/>");
  elems_.push_back("<line x1=\"" + num(px(0)) + "\" y1=\"0\" x2=\"" + num(px(0)) +
                   "\" y2=\"640\" stroke=\"#dddddd\" stroke-width=\"1\"/>");
}

double SvgCanvas::px(double x) const {
  return (x - kDataMin) / (kDataMax - kDataMin) * kSize;
}

double SvgCanvas::py(double y) const {
  return kSize - (y - kDataMin) / (kDataMax - kDataMin) * kSize;
}

void SvgCanvas::scatter(std::span<const Vec2> pts, const std::string& color,
                        double radius, double opacity) {
  std::string e = "<g fill=\"" + color + "\" fill-opacity=\"" + num(opacity) + "\">";
  for (Vec2 p : pts) {
    e += "<circle cx=\"" + num(px(p.x)) + "\" cy=\"" + num(py(p.y)) +
         "\" r=\"" + num(radius) + "\"/>";
  }
  e += "</g>";
  elems_.push_back(std::move(e));
}

void SvgCanvas::polyline(std::span<const Vec2> pts, const std::string& color,
                         double width, double opacity) {
  if (pts.size() < 2) return;
  std::string e = "<polyline fill=\"none\" stroke=\"" + color +
                  "\" stroke-width=\"" + num(width) + "\" stroke-opacity=\"" +
                  num(opacity) + "\" points=\"";
  for (Vec2 p : pts) e += num(px(p.x)) + "," + num(py(p.y)) + " ";
  e += "\"/>";
  elems_.push_back(std::move(e));
}

void SvgCanvas::marker(Vec2 p, const std::string& color, double radius) {
  elems_.push_back("<circle cx=\"" + num(px(p.x)) + "\" cy=\"" + num(py(p.y)) +
                   "\" r=\"" + num(radius) + "\" fill=\"none\" stroke=\"" +
                   color + "\" stroke-width=\"2\"/>");
}

void SvgCanvas::label(Vec2 p, const std::string& text, const std::string& color) {
  elems_.push_back("<text x=\"" + num(px(p.x)) + "\" y=\"" + num(py(p.y)) +
                   "\" font-family=\"sans-serif\" font-size=\"13\" fill=\"" +
                   color + "\">" + escape_text(text) + "</text>");
}

void SvgCanvas::title(const std::string& text) {
  elems_.push_back(
      "<text x=\"12\" y=\"20\" font-family=\"sans-serif\" font-size=\"15\" "
      "fill=\"#333333\">" + escape_text(text) + "</text>");
}

std::string SvgCanvas::to_string() const {
  std::string out =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" "
      "viewBox=\"0 0 640 640\">\n";
  for (const auto& e : elems_) {
    out += e;
    out += '\n';
  }
  out += "</svg>\n";
  return out;
}

void SvgCanvas::save(const std::filesystem::path& path) const {
  write_file_atomic(path, to_string());
}

SvgChart::SvgChart(std::string x_label, std::string y_label)
    : x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void SvgChart::add_series(const std::string& name, const std::string& color,
                          std::span<const double> xs,
                          std::span<const double> ys) {
  if (xs.size() != ys.size()) throw LengthMismatch("chart: xs/ys length differ");
  series_.push_back({name, color,
                     std::vector<double>(xs.begin(), xs.end()),
                     std::vector<double>(ys.begin(), ys.end())});
}

std::string SvgChart::to_string() const {
  const double W = 640, H = 640, L = 70, R = 20, T = 40, B = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series_) {
    for (double v : s.xs) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
    for (double v : s.ys) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (series_.empty() || xmin > xmax) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

  std::string out =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" "
      "viewBox=\"0 0 640 640\">\n";
  out += "<rect width=\"640\" height=\"640\" fill=\"#ffffff\"/>\n";
  out += "<rect x=\"" + num(L) + "\" y=\"" + num(T) + "\" width=\"" +
         num(W - L - R) + "\" height=\"" + num(H - T - B) +
         "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
  // Four ticks per axis.
  for (int i = 0; i <= 4; ++i) {
    double fx = xmin + (xmax - xmin) * i / 4.0;
    double fy = ymin + (ymax - ymin) * i / 4.0;
    out += "<text x=\"" + num(px(fx) - 10) + "\" y=\"" + num(H - B + 18) +
           "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#666666\">" +
           fmt_double(std::round(fx * 1000) / 1000) + "</text>\n";
    out += "<text x=\"6\" y=\"" + num(py(fy) + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#666666\">" +
           fmt_double(std::round(fy * 1000) / 1000) + "</text>\n";
    out += "<line x1=\"" + num(L) + "\" y1=\"" + num(py(fy)) + "\" x2=\"" +
           num(W - R) + "\" y2=\"" + num(py(fy)) +
           "\" stroke=\"#eeeeee\" stroke-width=\"1\"/>\n";
  }
  out += "<text x=\"" + num((L + W - R) / 2 - 30) + "\" y=\"" + num(H - 12) +
         "\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#333333\">" +
         escape_text(x_label_) + "</text>\n";
  out += "<text x=\"12\" y=\"" + num(T - 14) +
         "\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#333333\">" +
         escape_text(y_label_) + "</text>\n";

  double ly = T + 16;
  for (const auto& s : series_) {
    std::string pl = "<polyline fill=\"none\" stroke=\"" + s.color +
                     "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      pl += num(px(s.xs[i])) + "," + num(py(s.ys[i])) + " ";
    }
    pl += "\"/>\n";
    out += pl;
    out += "<rect x=\"" + num(W - R - 150) + "\" y=\"" + num(ly - 9) +
           "\" width=\"10\" height=\"10\" fill=\"" + s.color + "\"/>\n";
    out += "<text x=\"" + num(W - R - 135) + "\" y=\"" + num(ly) +
           "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#333333\">" +
           escape_text(s.name) + "</text>\n";
    ly += 16;
  }
  out += "</svg>\n";
  return out;
}

void SvgChart::save(const std::filesystem::path& path) const {
  write_file_atomic(path, to_string());
}

}  // namespace ddlab
