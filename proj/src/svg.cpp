#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hnav/bench.hpp"

namespace hnav {

namespace {

constexpr const char* kRobotColor = "#d4a017";
constexpr const char* kCoopColor = "#2ca02c";
constexpr const char* kNonCoopColor = "#d62728";

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// World (x, y) to pixels, y up.
struct Frame {
  double cx, cy, half, size;
  double px(double x) const { return (x - cx + half) / (2 * half) * size; }
  double py(double y) const { return (cy + half - y) / (2 * half) * size; }
  double len(double d) const { return d / (2 * half) * size; }
};

std::string star(double x, double y, double r) {
  std::string pts;
  for (int k = 0; k < 10; ++k) {
    const double a = -M_PI / 2 + k * M_PI / 5;
    const double rr = k % 2 == 0 ? r : 0.45 * r;
    pts += fmt(x + rr * std::cos(a)) + "," + fmt(y + rr * std::sin(a)) + (k < 9 ? " " : "");
  }
  return pts;
}

}  // namespace

std::string render_trajectory(const EpisodeLog& log) {
  if (log.steps.empty()) throw std::invalid_argument("render_trajectory: empty log");
  double extent = std::max(log.start.norm(), log.goal.norm()) + 1.5;
  for (const auto& s : log.steps) extent = std::max(extent, s.robot.head<2>().lpNorm<Eigen::Infinity>() + 1.0);
  const Frame f{0.0, 0.0, extent, 640.0};

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"640\" height=\"680\" viewBox=\"0 0 640 680\">\n"
    << "<title>" << escape(log.stack + " / " + log.scenario + " / seed " + std::to_string(log.seed)) << "</title>\n"
    << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"680\" fill=\"white\"/>\n";

  const StepRecord& last = log.steps.back();
  o << "<circle class=\"sensing\" cx=\"" << fmt(f.px(last.robot.x())) << "\" cy=\"" << fmt(f.py(last.robot.y()))
    << "\" r=\"" << fmt(f.len(log.sensing_range)) << "\" fill=\"none\" stroke=\"#888888\" stroke-dasharray=\"6 4\"/>\n";

  for (const auto& p : last.peds) {
    o << "<circle class=\"ped\" cx=\"" << fmt(f.px(p.position.x())) << "\" cy=\"" << fmt(f.py(p.position.y()))
      << "\" r=\"" << fmt(f.len(0.3)) << "\" fill=\"" << (p.cooperative ? kCoopColor : kNonCoopColor)
      << "\" fill-opacity=\"0.7\"><title>ped " << p.id << "</title></circle>\n";
  }

  double next_label = 0.0;
  for (const auto& s : log.steps) {
    const double x = f.px(s.robot.x()), y = f.py(s.robot.y());
    o << "<circle class=\"robot\" cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"" << fmt(f.len(0.3))
      << "\" fill=\"" << kRobotColor << "\" fill-opacity=\"0.8\" stroke=\"#8a6d0b\"><title>t = " << fmt(s.time)
      << " s</title></circle>\n";
    if (s.time >= next_label - 1e-9) {
      o << "<text x=\"" << fmt(x + 8) << "\" y=\"" << fmt(y - 8) << "\" font-size=\"11\" font-family=\"sans-serif\">"
        << fmt(s.time) << "s</text>\n";
      next_label += 2.0;
    }
  }

  o << "<polygon class=\"goal\" points=\"" << star(f.px(log.goal.x()), f.py(log.goal.y()), 10) << "\" fill=\"#1f3fbf\"/>\n";

  o << "<g font-size=\"12\" font-family=\"sans-serif\">\n"
    << "<circle cx=\"20\" cy=\"660\" r=\"6\" fill=\"" << kRobotColor << "\"/><text x=\"30\" y=\"664\">Robot</text>\n"
    << "<circle cx=\"100\" cy=\"660\" r=\"6\" fill=\"" << kCoopColor << "\"/><text x=\"110\" y=\"664\">Cooperative pedestrian</text>\n"
    << "<circle cx=\"280\" cy=\"660\" r=\"6\" fill=\"" << kNonCoopColor << "\"/><text x=\"290\" y=\"664\">Non-cooperative pedestrian</text>\n"
    << "<text x=\"500\" y=\"664\">" << outcome_name(log.outcome) << ", " << fmt(log.duration) << " s</text>\n"
    << "</g>\n</svg>\n";
  return o.str();
}

std::string render_sweep(const std::vector<SweepRow>& rows) {
  const double W = 640, H = 420, left = 60, right = 150, top = 30, bottom = 50;
  int h_lo = 1, h_hi = 1;
  if (!rows.empty()) {
    h_lo = rows.front().h;
    h_hi = rows.front().h;
    for (const auto& r : rows) h_lo = std::min(h_lo, r.h), h_hi = std::max(h_hi, r.h);
  }
  const double span = std::max(1, h_hi - h_lo);
  auto X = [&](double h) { return left + (h - h_lo) / span * (W - left - right); };
  auto Y = [&](double sr) { return top + (100.0 - sr) / 100.0 * (H - top - bottom); };

  std::vector<std::string> order;
  for (const auto& r : rows)
    if (std::find(order.begin(), order.end(), r.scenario) == order.end()) order.push_back(r.scenario);
  const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n"
    << "<title>Success rate under fixed prediction horizons</title>\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
    << "<g font-size=\"12\" font-family=\"sans-serif\" stroke-width=\"1\">\n";
  o << "<line x1=\"" << left << "\" y1=\"" << fmt(Y(0)) << "\" x2=\"" << fmt(W - right) << "\" y2=\"" << fmt(Y(0))
    << "\" stroke=\"black\"/>\n<line x1=\"" << left << "\" y1=\"" << fmt(Y(0)) << "\" x2=\"" << left << "\" y2=\""
    << fmt(Y(100)) << "\" stroke=\"black\"/>\n";
  for (int sr = 0; sr <= 100; sr += 20)
    o << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(Y(sr) + 4) << "\" text-anchor=\"end\">" << sr << "</text>\n";
  for (int h = h_lo; h <= h_hi; ++h)
    o << "<text x=\"" << fmt(X(h)) << "\" y=\"" << fmt(Y(0) + 18) << "\" text-anchor=\"middle\">" << h << "</text>\n";
  o << "<text x=\"" << fmt((left + W - right) / 2) << "\" y=\"" << fmt(H - 8)
    << "\" text-anchor=\"middle\">prediction horizon h</text>\n"
    << "<text x=\"16\" y=\"" << fmt((top + Y(0)) / 2) << "\" transform=\"rotate(-90 16 " << fmt((top + Y(0)) / 2)
    << ")\" text-anchor=\"middle\">success rate (%)</text>\n";

  for (std::size_t s = 0; s < order.size(); ++s) {
    const char* color = palette[s % 6];
    std::string pts;
    for (const auto& r : rows) {
      if (r.scenario != order[s]) continue;
      if (!pts.empty()) pts += ' ';
      pts += fmt(X(r.h)) + "," + fmt(Y(r.metrics.SR));
    }
    o << "<polyline class=\"series\" points=\"" << pts << "\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n";
    for (const auto& r : rows)
      if (r.scenario == order[s])
        o << "<circle cx=\"" << fmt(X(r.h)) << "\" cy=\"" << fmt(Y(r.metrics.SR)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = top + 20.0 * static_cast<double>(s);
    o << "<line x1=\"" << fmt(W - right + 15) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(W - right + 40)
      << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << fmt(W - right + 46) << "\" y=\"" << fmt(ly + 4) << "\">" << escape(order[s]) << "</text>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

}  // namespace hnav
