#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "shift/harness.hpp"

namespace shift::harness {

namespace {

// ---- CSV reading (tolerant: missing file -> empty table) ----

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

Csv read_csv(const std::string& path) {
  Csv csv;
  std::ifstream in(path);
  if (!in) return csv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (csv.header.empty())
      csv.header = split_csv(line);
    else
      csv.rows.push_back(split_csv(line));
  }
  return csv;
}

double num(const Csv& csv, const std::vector<std::string>& row, const std::string& col) {
  int c = csv.col(col);
  if (c < 0 || c >= static_cast<int>(row.size())) return 0.0;
  return std::strtod(row[c].c_str(), nullptr);
}

std::string str(const Csv& csv, const std::vector<std::string>& row, const std::string& col) {
  int c = csv.col(col);
  return c < 0 || c >= static_cast<int>(row.size()) ? "" : row[c];
}

// ---- tiny grayscale raster for the plot files ----

struct Raster {
  int w, h;
  std::vector<unsigned char> px;
  Raster(int w_, int h_) : w(w_), h(h_), px(static_cast<std::size_t>(w_) * h_, 255) {}

  void set(int x, int y, unsigned char v) {
    if (x >= 0 && x < w && y >= 0 && y < h) px[static_cast<std::size_t>(y) * w + x] = v;
  }

  void line(int x0, int y0, int x1, int y1, unsigned char v) {
    int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1, err = dx + dy;
    while (true) {
      set(x0, y0, v);
      if (x0 == x1 && y0 == y1) break;
      int e2 = 2 * err;
      if (e2 >= dy) err += dy, x0 += sx;
      if (e2 <= dx) err += dx, y0 += sy;
    }
  }
};

void write_pgm(const Raster& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P5\n" << r.w << " " << r.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(r.px.data()), static_cast<std::streamsize>(r.px.size()));
  if (!out) throw IoError("short write: " + path);
}

constexpr int kW = 320, kH = 220, kMargin = 28;

// Polyline chart; each series gets its own gray level. Ranges are padded so
// flat series remain visible.
void plot_series(const std::string& path, const std::vector<double>& xs,
                 const std::vector<std::vector<double>>& series) {
  Raster r(kW, kH);
  r.line(kMargin, kH - kMargin, kW - 8, kH - kMargin, 0);
  r.line(kMargin, kH - kMargin, kMargin, 8, 0);
  if (!xs.empty()) {
    double xlo = *std::min_element(xs.begin(), xs.end());
    double xhi = *std::max_element(xs.begin(), xs.end());
    double ylo = 1e300, yhi = -1e300;
    for (const auto& ys : series)
      for (double y : ys) {
        ylo = std::min(ylo, y);
        yhi = std::max(yhi, y);
      }
    if (ylo > yhi) ylo = 0, yhi = 1;
    double xpad = xhi > xlo ? 0.0 : 0.5, ypad = yhi > ylo ? 0.05 * (yhi - ylo) : 0.5;
    xlo -= xpad, xhi += xpad, ylo -= ypad, yhi += ypad;
    auto px = [&](double x) {
      return kMargin + static_cast<int>((x - xlo) / (xhi - xlo) * (kW - kMargin - 8));
    };
    auto py = [&](double y) {
      return kH - kMargin - static_cast<int>((y - ylo) / (yhi - ylo) * (kH - kMargin - 8));
    };
    for (std::size_t s = 0; s < series.size(); ++s) {
      unsigned char gray = static_cast<unsigned char>(s * 110);
      const auto& ys = series[s];
      for (std::size_t i = 0; i + 1 < ys.size() && i + 1 < xs.size(); ++i)
        r.line(px(xs[i]), py(ys[i]), px(xs[i + 1]), py(ys[i + 1]), gray);
      for (std::size_t i = 0; i < ys.size() && i < xs.size(); ++i) {
        r.set(px(xs[i]), py(ys[i]) - 1, gray);
        r.set(px(xs[i]) + 1, py(ys[i]), gray);
        r.set(px(xs[i]) - 1, py(ys[i]), gray);
        r.set(px(xs[i]), py(ys[i]) + 1, gray);
      }
    }
  }
  write_pgm(r, path);
}

void plot_histogram(const std::string& path, const std::vector<double>& a,
                    const std::vector<double>& b) {
  Raster r(kW, kH);
  r.line(kMargin, kH - kMargin, kW - 8, kH - kMargin, 0);
  r.line(kMargin, kH - kMargin, kMargin, 8, 0);
  std::vector<double> all = a;
  all.insert(all.end(), b.begin(), b.end());
  if (!all.empty()) {
    double lo = *std::min_element(all.begin(), all.end());
    double hi = *std::max_element(all.begin(), all.end());
    if (!(hi > lo)) hi = lo + 1;
    const int bins = 24;
    auto counts = [&](const std::vector<double>& xs) {
      std::vector<int> c(bins, 0);
      for (double x : xs) {
        int b2 = static_cast<int>((x - lo) / (hi - lo) * bins);
        ++c[std::clamp(b2, 0, bins - 1)];
      }
      return c;
    };
    std::vector<int> ca = counts(a), cb = counts(b);
    int peak = 1;
    for (int i = 0; i < bins; ++i) peak = std::max({peak, ca[i], cb[i]});
    int bw = (kW - kMargin - 8) / bins;
    for (int i = 0; i < bins; ++i) {
      int x0 = kMargin + i * bw;
      int ha = ca[i] * (kH - kMargin - 8) / peak;
      int hb = cb[i] * (kH - kMargin - 8) / peak;
      // first sample set: filled half-bar; second: outlined half-bar
      for (int x = x0 + 1; x < x0 + bw / 2; ++x)
        r.line(x, kH - kMargin - 1, x, kH - kMargin - std::max(ha, 1), 60);
      r.line(x0 + bw / 2 + 1, kH - kMargin - 1, x0 + bw / 2 + 1, kH - kMargin - std::max(hb, 1),
             160);
      r.line(x0 + bw - 1, kH - kMargin - 1, x0 + bw - 1, kH - kMargin - std::max(hb, 1), 160);
      r.line(x0 + bw / 2 + 1, kH - kMargin - std::max(hb, 1), x0 + bw - 1,
             kH - kMargin - std::max(hb, 1), 160);
    }
  }
  write_pgm(r, path);
}

std::string pad(const std::string& s, std::size_t w) {
  std::string out = s;
  while (out.size() < w) out += ' ';
  return out;
}

std::string fmtd(double v, int prec = 3) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

}  // namespace

std::string cmd_report(const ExperimentConfig& cfg) {
  validate(cfg);
  std::string dir = artifact_dir(cfg);
  std::string rep = dir + "/report";
  ensure_dir(rep);

  Csv summary = read_csv(dir + "/summary.csv");
  Csv detect = read_csv(dir + "/detect.csv");
  Csv ablation = read_csv(dir + "/ablation.csv");
  Csv l2s = read_csv(dir + "/l2_samples.csv");

  std::ostringstream d;
  d << "shiftlab report\n";
  d << "config " << hash_hex(config_hash(cfg)) << "\n\n";

  if (summary.rows.empty()) {
    d << "no data\n";
  } else {
    d << "attack x defense grid (reward mean +/- std over episodes)\n";
    d << pad("attack", 11) << pad("defense", 10) << pad("reward", 16) << pad("dev%", 8)
      << pad("recons", 9) << pad("w1_adj", 9) << pad("w1_true", 9) << pad("ssim", 8)
      << pad("align", 8) << "faith\n";
    for (const auto& row : summary.rows) {
      d << pad(str(summary, row, "attack"), 11) << pad(str(summary, row, "defense"), 10)
        << pad(fmtd(num(summary, row, "reward_mean"), 2) + " +/- " +
                   fmtd(num(summary, row, "reward_std"), 2),
               16)
        << pad(fmtd(num(summary, row, "dev_pct"), 1), 8)
        << pad(fmtd(num(summary, row, "recon"), 3), 9)
        << pad(fmtd(num(summary, row, "w1_adj"), 4), 9)
        << pad(fmtd(num(summary, row, "w1_prev_true"), 4), 9)
        << pad(fmtd(num(summary, row, "ssim"), 3), 8)
        << pad(fmtd(num(summary, row, "align_rate"), 2), 8)
        << fmtd(num(summary, row, "faith"), 2) << "\n";
    }

    // Table-2-shaped extract
    std::ofstream t2(rep + "/table2.csv");
    t2 << "attack,defense,reward,dev_pct,recons,wass,ssim\n";
    for (const auto& row : summary.rows) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%s,%s,%.6g,%.6g,%.6g,%.6g,%.6g\n",
                    str(summary, row, "attack").c_str(), str(summary, row, "defense").c_str(),
                    num(summary, row, "reward_mean"), num(summary, row, "dev_pct"),
                    num(summary, row, "recon"), num(summary, row, "w1_adj"),
                    num(summary, row, "ssim"));
      t2 << buf;
    }
  }

  if (!detect.rows.empty()) {
    d << "\ndetectors on undefended episodes\n";
    d << pad("attack", 11) << pad("episodes", 10) << pad("mad", 12) << pad("cusum", 12)
      << "verdict\n";
    for (const auto& row : detect.rows) {
      std::string mad = str(detect, row, "mad_flagged") + "/" + str(detect, row, "episodes");
      std::string cus = str(detect, row, "cusum_flagged") + "/" + str(detect, row, "episodes");
      std::string verdict =
          (str(detect, row, "mad_detected") == "true" ? std::string("mad") : std::string("-")) +
          " " +
          (str(detect, row, "cusum_detected") == "true" ? std::string("cusum")
                                                        : std::string("-"));
      d << pad(str(detect, row, "attack"), 11) << pad(str(detect, row, "episodes"), 10)
        << pad(mad, 12) << pad(cus, 12) << verdict << "\n";
    }
  }

  if (!ablation.rows.empty()) {
    d << "\nguidance-strength sweep (history-conditioned attack, no defense)\n";
    d << pad("gamma2", 8) << pad("realism", 9) << pad("reward", 9) << pad("dev%", 8)
      << pad("recons", 9) << "l2\n";
    std::vector<double> g_on, rew_on, dev_on, rec_on, rec_off;
    for (const auto& row : ablation.rows) {
      bool on = str(ablation, row, "use_realism") == "true";
      d << pad(fmtd(num(ablation, row, "gamma2"), 1), 8) << pad(on ? "on" : "off", 9)
        << pad(fmtd(num(ablation, row, "reward_mean"), 2), 9)
        << pad(fmtd(num(ablation, row, "dev_pct"), 1), 8)
        << pad(fmtd(num(ablation, row, "recon"), 3), 9) << fmtd(num(ablation, row, "l2"), 3)
        << "\n";
      if (on) {
        g_on.push_back(num(ablation, row, "gamma2"));
        rew_on.push_back(num(ablation, row, "reward_mean"));
        dev_on.push_back(num(ablation, row, "dev_pct"));
        rec_on.push_back(num(ablation, row, "recon"));
      } else {
        rec_off.push_back(num(ablation, row, "recon"));
      }
    }
    plot_series(rep + "/gamma2_reward.pgm", g_on, {rew_on});
    plot_series(rep + "/gamma2_deviation.pgm", g_on, {dev_on});
    plot_series(rep + "/realism_recon.pgm", g_on, {rec_on, rec_off});
  }

  if (!l2s.rows.empty()) {
    std::vector<double> shift_l2, pgd_l2;
    for (const auto& row : l2s.rows) {
      if (str(l2s, row, "attack") == "pgd")
        pgd_l2.push_back(num(l2s, row, "l2"));
      else
        shift_l2.push_back(num(l2s, row, "l2"));
    }
    plot_histogram(rep + "/l2_hist.pgm", shift_l2, pgd_l2);
    d << "\nperturbation l2 histogram: report/l2_hist.pgm (filled = history-conditioned, "
         "outline = pgd)\n";
  }

  std::ofstream out(rep + "/digest.txt");
  if (!out) throw IoError("cannot write " + rep + "/digest.txt");
  out << d.str();
  return rep;
}

}  // namespace shift::harness
