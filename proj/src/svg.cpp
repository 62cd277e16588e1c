#include "cgc/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "cgc/errors.hpp"

namespace cgc {

namespace {

// One HSL channel -> sRGB byte, h' in turns offset per channel.
double hue_channel(double p, double q, double t) {
  if (t < 0.0) t += 1.0;
  if (t > 1.0) t -= 1.0;
  if (t < 1.0 / 6.0) return p + (q - p) * 6.0 * t;
  if (t < 1.0 / 2.0) return q;
  if (t < 2.0 / 3.0) return p + (q - p) * (2.0 / 3.0 - t) * 6.0;
  return p;
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string cluster_color(int cluster_id) {
  // Golden-angle walk keeps neighboring ids visually distinct.
  const double hue = std::fmod(static_cast<double>(cluster_id) * 137.50776405003785, 360.0);
  const double h = hue / 360.0, s = 0.65, l = 0.5;
  const double q = l < 0.5 ? l * (1.0 + s) : l + s - l * s;
  const double p = 2.0 * l - q;
  const int r = static_cast<int>(std::lround(255.0 * hue_channel(p, q, h + 1.0 / 3.0)));
  const int g = static_cast<int>(std::lround(255.0 * hue_channel(p, q, h)));
  const int b = static_cast<int>(std::lround(255.0 * hue_channel(p, q, h - 1.0 / 3.0)));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string render_cluster_svg(const CellGraph& g, const std::vector<int>& cluster_ids,
                               const std::string& title) {
  if (g.n <= 0) throw Error("render_cluster_svg: empty graph");
  if (static_cast<int>(cluster_ids.size()) != g.n)
    throw DimensionError("render_cluster_svg: one cluster id per node required");

  double rmin = g.coords.col(0).minCoeff(), rmax = g.coords.col(0).maxCoeff();
  double cmin = g.coords.col(1).minCoeff(), cmax = g.coords.col(1).maxCoeff();
  const double margin = 12.0;
  const double legend_w = 110.0;
  const double title_h = title.empty() ? 0.0 : 22.0;
  const double w = (cmax - cmin) + 2.0 * margin + legend_w;
  const double h = std::max((rmax - rmin) + 2.0 * margin + title_h, 40.0);
  auto X = [&](int i) { return g.coords(i, 1) - cmin + margin; };
  auto Y = [&](int i) { return g.coords(i, 0) - rmin + margin + title_h; };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) + "\" height=\"" +
         fmt(h) + "\" viewBox=\"0 0 " + fmt(w) + " " + fmt(h) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  if (!title.empty())
    out += "<text x=\"" + fmt(margin) + "\" y=\"16\" font-family=\"sans-serif\" "
           "font-size=\"13\">" + title + "</text>\n";

  out += "<g stroke=\"#b9b9b9\" stroke-width=\"0.6\">\n";
  for (const auto& [i, j] : g.edges)
    out += "<line x1=\"" + fmt(X(i)) + "\" y1=\"" + fmt(Y(i)) + "\" x2=\"" + fmt(X(j)) +
           "\" y2=\"" + fmt(Y(j)) + "\"/>\n";
  out += "</g>\n";

  for (int i = 0; i < g.n; ++i)
    out += "<circle cx=\"" + fmt(X(i)) + "\" cy=\"" + fmt(Y(i)) +
           "\" r=\"3\" fill=\"" + cluster_color(cluster_ids[i]) + "\"/>\n";

  std::set<int> distinct(cluster_ids.begin(), cluster_ids.end());
  const double lx = w - legend_w + 10.0;
  double ly = title_h + margin;
  out += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int id : distinct) {
    out += "<circle cx=\"" + fmt(lx) + "\" cy=\"" + fmt(ly) + "\" r=\"4\" fill=\"" +
           cluster_color(id) + "\"/>\n";
    out += "<text x=\"" + fmt(lx + 10.0) + "\" y=\"" + fmt(ly + 4.0) + "\">cluster " +
           std::to_string(id) + "</text>\n";
    ly += 16.0;
  }
  out += "</g>\n";
  out += "</svg>\n";
  return out;
}

void write_cluster_svg(const std::string& path, const CellGraph& g,
                       const std::vector<int>& cluster_ids, const std::string& title) {
  std::ofstream outf(path, std::ios::binary);
  if (!outf) throw IoError("cannot write SVG file: " + path);
  const std::string text = render_cluster_svg(g, cluster_ids, title);
  outf.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!outf) throw IoError("failed writing SVG file: " + path);
}

}  // namespace cgc
