#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "../common/manifest.hpp"
#include "tsc/error.hpp"
#include "tsc/stats.hpp"

namespace tsc::stats {

namespace {

std::string num(double v) {
  char buf[32];
  return {buf, std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2).ptr};
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

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::uint64_t parse_u64(const std::string& s, std::size_t line) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("bad integer '" + s + "'", line);
  return v;
}

}  // namespace

std::string render_cd_diagram(const ComparisonReport& rep) {
  const std::size_t k = rep.classifiers.size();
  const double left = 40, right = 600, axis_y = 40;
  const double width = left + right;
  auto x_of = [&](double r) { return k < 2 ? (left + right) / 2 : left + (r - 1.0) / double(k - 1) * (right - left); };

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return rep.ranks[i] < rep.ranks[j]; });

  // clique bars packed greedily into rows below the axis
  std::vector<std::vector<std::pair<double, double>>> rows;
  std::vector<std::size_t> bar_row;
  std::vector<std::pair<double, double>> extent;
  for (const auto& c : rep.cliques) {
    double lo = rep.ranks[c.front()], hi = lo;
    for (auto i : c) lo = std::min(lo, rep.ranks[i]), hi = std::max(hi, rep.ranks[i]);
    std::size_t row = 0;
    for (; row < rows.size(); ++row) {
      bool free = true;
      for (auto [a, b] : rows[row]) free = free && (hi < a || lo > b);
      if (free) break;
    }
    if (row == rows.size()) rows.emplace_back();
    rows[row].emplace_back(lo, hi);
    bar_row.push_back(row);
    extent.emplace_back(lo, hi);
  }
  const double bars_bottom = axis_y + 14 + 10.0 * double(rows.size());
  const std::size_t levels = (k + 1) / 2;
  const double above_top = axis_y - 20 - 16.0 * double(levels);
  const double shift = above_top < 10 ? 10 - above_top : 0;
  const double height = bars_bottom + 20 + 16.0 * double(levels) + 10 + shift;

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<g transform=\"translate(0," + num(shift) + ")\">\n";
  s += "<line class=\"axis\" x1=\"" + num(x_of(1)) + "\" y1=\"" + num(axis_y) + "\" x2=\"" +
       num(x_of(double(std::max<std::size_t>(k, 1)))) + "\" y2=\"" + num(axis_y) + "\" stroke=\"black\"/>\n";
  for (std::size_t r = 1; r <= k; ++r) {
    const double x = x_of(double(r));
    s += "<line class=\"tick\" x1=\"" + num(x) + "\" y1=\"" + num(axis_y - 4) + "\" x2=\"" + num(x) + "\" y2=\"" +
         num(axis_y + 4) + "\" stroke=\"black\"/>\n";
    s += "<text class=\"tick-label\" x=\"" + num(x) + "\" y=\"" + num(axis_y - 8) + "\" text-anchor=\"middle\">" +
         std::to_string(r) + "</text>\n";
  }
  for (std::size_t i = 0; i < rep.cliques.size(); ++i) {
    const auto [lo, hi] = extent[i];
    const double y = axis_y + 14 + 10.0 * double(bar_row[i]);
    s += "<line class=\"clique\" x1=\"" + num(x_of(lo) - 3) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x_of(hi) + 3) +
         "\" y2=\"" + num(y) + "\" stroke=\"black\" stroke-width=\"5\" stroke-linecap=\"round\"/>\n";
  }
  for (std::size_t n = 0; n < k; ++n) {
    const std::size_t i = order[n];
    const double x = x_of(rep.ranks[i]);
    const bool above = n % 2 == 0;
    const double level = double(n / 2);
    const double y = above ? axis_y - 24 - 16 * level : bars_bottom + 20 + 16 * level;
    s += "<line class=\"leader\" x1=\"" + num(x) + "\" y1=\"" + num(axis_y) + "\" x2=\"" + num(x) + "\" y2=\"" +
         num(above ? y + 4 : y - 12) + "\" stroke=\"gray\"/>\n";
    s += "<circle class=\"classifier\" cx=\"" + num(x) + "\" cy=\"" + num(axis_y) + "\" r=\"3\"/>\n";
    s += "<text class=\"label\" x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"middle\">" +
         escape(rep.classifiers[i]) + " (" + num(rep.ranks[i]) + ")</text>\n";
  }
  s += "</g>\n</svg>\n";
  return s;
}

std::vector<RunRecord> read_results(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  const bool full = header == std::vector<std::string>{"dataset", "architecture", "seed", "accuracy", "loss",
                                                       "train_seconds"};
  const bool baseline = header == std::vector<std::string>{"dataset", "classifier", "accuracy"};
  if (!full && !baseline) throw ParseError("unrecognised results header '" + line + "'", 1);
  std::vector<RunRecord> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()), n);
    RunRecord r;
    r.dataset = f[0];
    r.architecture = f[1];
    try {
      if (full) {
        r.seed = parse_u64(f[2], n);
        r.accuracy = detail::parse_double(f[3], "accuracy");
        r.loss = detail::parse_double(f[4], "loss");
        r.train_seconds = detail::parse_double(f[5], "train_seconds");
      } else {
        r.accuracy = detail::parse_double(f[2], "accuracy");
      }
    } catch (const ParseError& e) {
      throw ParseError(e.what(), n);
    }
    if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0)) throw ParseError("accuracy outside [0, 1]", n);
    out.push_back(r);
  }
  return out;
}

std::vector<RunRecord> read_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open results file " + path.string());
  return read_results(in);
}

void write_results(const std::vector<RunRecord>& runs, std::ostream& out) {
  out << "dataset,architecture,seed,accuracy,loss,train_seconds\n";
  for (const auto& r : runs) {
    out << r.dataset << ',' << r.architecture << ',' << r.seed << ',' << detail::format_double(r.accuracy) << ','
        << detail::format_double(r.loss) << ',' << detail::format_double(r.train_seconds) << '\n';
  }
}

void append_results(const std::filesystem::path& path, const std::vector<RunRecord>& runs) {
  std::vector<RunRecord> merged;
  if (std::filesystem::exists(path)) merged = read_results(path);
  for (const auto& r : runs) {
    auto it = std::find_if(merged.begin(), merged.end(), [&](const RunRecord& m) {
      return m.dataset == r.dataset && m.architecture == r.architecture && m.seed == r.seed;
    });
    if (it != merged.end()) *it = r;
    else merged.push_back(r);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    write_results(merged, out);
  }
  std::filesystem::rename(tmp, path);
}

std::map<std::string, DatasetInfo> read_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open metadata file " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (split(line) != std::vector<std::string>{"dataset", "theme", "length", "train_size"})
    throw ParseError("metadata header must be dataset,theme,length,train_size", 1);
  std::map<std::string, DatasetInfo> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 4) throw ParseError("expected 4 fields", n);
    out[f[0]] = DatasetInfo{f[1], std::size_t(parse_u64(f[2], n)), std::size_t(parse_u64(f[3], n))};
  }
  return out;
}

}  // namespace tsc::stats
