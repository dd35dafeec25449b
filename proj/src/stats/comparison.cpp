#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "tsc/stats.hpp"

namespace tsc::stats {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  return {buf, std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits).ptr};
}

std::string general(double v) {
  char buf[64];
  return {buf, std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6).ptr};
}

std::string missing_message(const std::vector<std::pair<std::string, std::string>>& missing) {
  std::string s = "results table is missing " + std::to_string(missing.size()) + " cell(s):";
  for (const auto& [d, c] : missing) s += " (" + d + ", " + c + ")";
  return s;
}

// Ranks of |d| with ties averaged, doubled so they stay integral.
std::vector<long> doubled_abs_ranks(std::span<const double> d) {
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return std::abs(d[i]) < std::abs(d[j]); });
  std::vector<long> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    // ranks i+1..j+1, mean doubled = i+j+2
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = long(i + j + 2);
    i = j + 1;
  }
  return r;
}

long doubled_w_min(std::span<const double> d, const std::vector<long>& r) {
  long plus = 0, minus = 0;
  for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? plus : minus) += r[i];
  return std::min(plus, minus);
}

}  // namespace

std::string to_string(Aggregation a) {
  switch (a) {
    case Aggregation::mean: return "mean";
    case Aggregation::median: return "median";
    case Aggregation::min: return "min";
    case Aggregation::max: return "max";
  }
  return "?";
}

Aggregation parse_aggregation(const std::string& s) {
  for (auto a : {Aggregation::mean, Aggregation::median, Aggregation::min, Aggregation::max})
    if (to_string(a) == s) return a;
  throw std::invalid_argument("unknown aggregation '" + s + "' (mean, median, min, max)");
}

MissingCellError::MissingCellError(std::vector<std::pair<std::string, std::string>> missing)
    : std::runtime_error(missing_message(missing)), missing_(std::move(missing)) {}

std::vector<double> ResultsTable::column(std::size_t c) const {
  std::vector<double> out(datasets.size());
  for (std::size_t d = 0; d < datasets.size(); ++d) out[d] = at(d, c);
  return out;
}

double aggregate_values(std::vector<double> values, Aggregation kind) {
  if (values.empty()) throw std::invalid_argument("aggregate of an empty group");
  std::sort(values.begin(), values.end());
  switch (kind) {
    case Aggregation::mean: return std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
    case Aggregation::median: return values[(values.size() - 1) / 2];
    case Aggregation::min: return values.front();
    case Aggregation::max: return values.back();
  }
  return 0.0;
}

ResultsTable aggregate(const std::vector<RunRecord>& runs, Aggregation kind) {
  std::set<std::string> datasets, classifiers;
  std::map<std::pair<std::string, std::string>, std::vector<double>> cells;
  for (const auto& r : runs) {
    if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0))
      throw std::invalid_argument("accuracy outside [0, 1] for " + r.dataset + "/" + r.architecture);
    datasets.insert(r.dataset);
    classifiers.insert(r.architecture);
    cells[{r.dataset, r.architecture}].push_back(r.accuracy);
  }
  ResultsTable t;
  t.kind = kind;
  t.datasets.assign(datasets.begin(), datasets.end());
  t.classifiers.assign(classifiers.begin(), classifiers.end());
  std::vector<std::pair<std::string, std::string>> missing;
  for (const auto& d : t.datasets) {
    for (const auto& c : t.classifiers) {
      auto it = cells.find({d, c});
      if (it == cells.end()) {
        missing.emplace_back(d, c);
        t.accuracy.push_back(0.0);
        t.runs.push_back(0);
      } else {
        t.accuracy.push_back(aggregate_values(it->second, kind));
        t.runs.push_back(it->second.size());
      }
    }
  }
  if (!missing.empty()) throw MissingCellError(std::move(missing));
  return t;
}

std::vector<double> rank_row(std::span<const double> acc) {
  const std::size_t k = acc.size();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return acc[i] > acc[j]; });
  std::vector<double> r(k);
  for (std::size_t i = 0; i < k;) {
    std::size_t j = i;
    while (j + 1 < k && acc[order[j + 1]] == acc[order[i]]) ++j;
    const double mean = 0.5 * double(i + j + 2);
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = mean;
    i = j + 1;
  }
  return r;
}

std::vector<double> average_ranks(const ResultsTable& table) {
  const std::size_t k = table.classifiers.size();
  if (table.datasets.empty() || k == 0) throw std::invalid_argument("average_ranks: empty table");
  std::vector<double> avg(k, 0.0);
  for (std::size_t d = 0; d < table.datasets.size(); ++d) {
    const auto r = rank_row(table.row(d));
    for (std::size_t c = 0; c < k; ++c) avg[c] += r[c];
  }
  for (auto& v : avg) v /= double(table.datasets.size());
  return avg;
}

double regularized_gamma_p(double a, double x) {
  if (a <= 0) throw std::invalid_argument("regularized_gamma_p: a must be positive");
  if (x <= 0) return 0.0;
  // x^a e^-x / Gamma(a+1) * sum_n x^n / ((a+1)...(a+n))
  double term = std::exp(a * std::log(x) - x - std::lgamma(a + 1.0));
  double sum = term;
  for (int n = 1; n < 100000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (term < sum * 1e-17 && a + n > x) break;
  }
  return std::min(1.0, sum);
}

double chi_square_sf(double x, double df) {
  if (df <= 0) throw std::invalid_argument("chi_square_sf: df must be positive");
  if (x <= 0) return 1.0;
  return std::clamp(1.0 - regularized_gamma_p(0.5 * df, 0.5 * x), 0.0, 1.0);
}

FriedmanResult friedman_test(const ResultsTable& table, double alpha) {
  const double k = double(table.classifiers.size()), n = double(table.datasets.size());
  if (table.classifiers.size() < 3)
    throw std::invalid_argument("friedman_test needs at least 3 classifiers; use the Wilcoxon test for two");
  if (table.datasets.size() < 2) throw std::invalid_argument("friedman_test needs at least 2 datasets");
  const auto r = average_ranks(table);
  double sq = 0.0;
  for (double v : r) sq += v * v;
  FriedmanResult f;
  f.statistic = std::max(0.0, 12.0 * n / (k * (k + 1.0)) * (sq - k * (k + 1.0) * (k + 1.0) / 4.0));
  f.p_value = chi_square_sf(f.statistic, k - 1.0);
  f.reject = f.p_value < alpha;
  return f;
}

double wilcoxon_exact(std::span<const double> d) {
  const std::size_t n = d.size();
  if (n == 0) return 1.0;
  const auto r = doubled_abs_ranks(d);
  const long w = doubled_w_min(d, r);
  const long total = std::accumulate(r.begin(), r.end(), 0L);
  // counts[s] = number of sign assignments whose positive doubled-rank sum is s
  std::vector<double> counts(std::size_t(total) + 1, 0.0);
  counts[0] = 1.0;
  long reach = 0;
  for (long ri : r) {
    for (long s = reach; s >= 0; --s) counts[std::size_t(s + ri)] += counts[std::size_t(s)];
    reach += ri;
  }
  const double below = std::accumulate(counts.begin(), counts.begin() + w + 1, 0.0);
  return std::min(1.0, 2.0 * below / std::ldexp(1.0, int(n)));
}

double wilcoxon_normal(std::span<const double> d) {
  const double n = double(d.size());
  if (d.empty()) return 1.0;
  const auto r = doubled_abs_ranks(d);
  const double w = 0.5 * double(doubled_w_min(d, r));
  double ties = 0.0;
  std::map<long, double> groups;
  for (long v : r) groups[v] += 1.0;
  for (const auto& [v, t] : groups) ties += t * t * t - t;
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
  if (var <= 0) return 1.0;
  const double z = std::min(0.0, (w - mean + 0.5) / std::sqrt(var));
  return std::min(1.0, std::erfc(-z / std::sqrt(2.0)));
}

double wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon_signed_rank: samples differ in length");
  if (a.empty()) throw std::invalid_argument("wilcoxon_signed_rank: empty samples");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  return d.size() <= 20 ? wilcoxon_exact(d) : wilcoxon_normal(d);
}

HolmResult holm_correction(std::span<const double> p, double alpha) {
  const std::size_t m = p.size();
  HolmResult h{std::vector<bool>(m, false), std::vector<double>(m, 1.0)};
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return p[i] < p[j]; });
  bool rejecting = true;
  double running = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double factor = double(m - i);
    const double pi = p[order[i]];
    rejecting = rejecting && pi <= alpha / factor;
    h.reject[order[i]] = rejecting;
    running = std::max(running, std::min(1.0, factor * pi));
    h.adjusted[order[i]] = running;
  }
  return h;
}

std::vector<std::vector<std::size_t>> form_cliques(std::span<const double> ranks, const std::vector<bool>& sig) {
  const std::size_t k = ranks.size();
  if (sig.size() != k * k) throw std::invalid_argument("form_cliques: decision matrix must be k x k");
  auto linked = [&](std::size_t i, std::size_t j) { return i != j && !sig[i * k + j]; };

  std::vector<std::vector<std::size_t>> out;
  // Bron-Kerbosch with pivoting
  std::function<void(std::vector<std::size_t>, std::vector<std::size_t>, std::vector<std::size_t>)> expand =
      [&](std::vector<std::size_t> r, std::vector<std::size_t> p, std::vector<std::size_t> x) {
        if (p.empty() && x.empty()) {
          if (r.size() > 1) out.push_back(r);
          return;
        }
        std::size_t pivot = p.empty() ? x.front() : p.front(), best = 0;
        for (auto u : p)
          if (auto c = std::size_t(std::count_if(p.begin(), p.end(), [&](auto v) { return linked(u, v); })); c > best)
            best = c, pivot = u;
        for (auto v : std::vector<std::size_t>(p)) {
          if (linked(pivot, v)) continue;
          std::vector<std::size_t> r2 = r, p2, x2;
          r2.push_back(v);
          for (auto u : p)
            if (linked(v, u)) p2.push_back(u);
          for (auto u : x)
            if (linked(v, u)) x2.push_back(u);
          expand(r2, p2, x2);
          p.erase(std::find(p.begin(), p.end(), v));
          x.push_back(v);
        }
      };
  std::vector<std::size_t> all(k);
  std::iota(all.begin(), all.end(), 0);
  expand({}, all, {});

  auto by_rank = [&](std::size_t i, std::size_t j) { return ranks[i] != ranks[j] ? ranks[i] < ranks[j] : i < j; };
  for (auto& c : out) std::sort(c.begin(), c.end(), by_rank);
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), by_rank);
  });
  return out;
}

ComparisonReport compare(const ResultsTable& table, double alpha) {
  const std::size_t k = table.classifiers.size();
  if (k < 2) throw std::invalid_argument("compare needs at least 2 classifiers");
  ComparisonReport rep;
  rep.classifiers = table.classifiers;
  rep.ranks = average_ranks(table);
  rep.datasets = table.datasets.size();
  rep.alpha = alpha;
  if (k >= 3) rep.friedman = friedman_test(table, alpha);

  std::vector<double> p;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      rep.pairs.push_back({a, b, wilcoxon_signed_rank(table.column(a), table.column(b)), 1.0, false});
      p.push_back(rep.pairs.back().p_value);
    }
  }
  const auto holm = holm_correction(p, alpha);
  const bool omnibus = !rep.friedman || rep.friedman->reject;
  std::vector<bool> sig(k * k, false);
  for (std::size_t i = 0; i < rep.pairs.size(); ++i) {
    auto& pr = rep.pairs[i];
    pr.adjusted = holm.adjusted[i];
    pr.significant = omnibus && holm.reject[i];
    sig[pr.a * k + pr.b] = sig[pr.b * k + pr.a] = pr.significant;
  }
  rep.cliques = form_cliques(rep.ranks, sig);
  return rep;
}

std::string format_report(const ComparisonReport& rep) {
  std::string s;
  s += "datasets " + std::to_string(rep.datasets) + "\n";
  s += "classifiers " + std::to_string(rep.classifiers.size()) + "\n";
  s += "alpha " + general(rep.alpha) + "\n";
  if (rep.friedman) {
    s += "friedman statistic=" + general(rep.friedman->statistic) + " p=" + general(rep.friedman->p_value) +
         " reject=" + (rep.friedman->reject ? "yes" : "no") + "\n";
  } else {
    s += "friedman skipped (two classifiers)\n";
  }
  std::vector<std::size_t> order(rep.classifiers.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return rep.ranks[i] < rep.ranks[j]; });
  for (auto i : order) s += "rank " + rep.classifiers[i] + " " + fixed(rep.ranks[i], 4) + "\n";
  for (const auto& p : rep.pairs) {
    s += "pair " + rep.classifiers[p.a] + " " + rep.classifiers[p.b] + " p=" + general(p.p_value) +
         " adjusted=" + general(p.adjusted) + " significant=" + (p.significant ? "yes" : "no") + "\n";
  }
  for (const auto& c : rep.cliques) {
    s += "clique";
    for (auto i : c) s += " " + rep.classifiers[i];
    s += "\n";
  }
  return s;
}

// ---- grouped ranks ----

GroupKey parse_group_key(const std::string& s) {
  if (s == "theme") return GroupKey::theme;
  if (s == "length") return GroupKey::length;
  if (s == "trainsize" || s == "train_size") return GroupKey::train_size;
  throw std::invalid_argument("unknown group key '" + s + "' (theme, length, trainsize)");
}

namespace {
struct Band {
  std::size_t hi;  // inclusive upper edge
  const char* name;
};
constexpr Band kLengthBands[] = {{80, "<81"},     {250, "81-250"},    {450, "251-450"},
                                 {700, "451-700"}, {1000, "701-1000"}, {SIZE_MAX, ">1000"}};
constexpr Band kTrainBands[] = {{99, "<100"}, {399, "100-399"}, {799, "400-799"}, {SIZE_MAX, ">799"}};

template <std::size_t N>
std::size_t band_index(std::size_t v, const Band (&bands)[N]) {
  std::size_t i = 0;
  while (v > bands[i].hi) ++i;
  return i;
}
}  // namespace

std::string band_of(const DatasetInfo& info, GroupKey key) {
  switch (key) {
    case GroupKey::theme: return info.theme;
    case GroupKey::length: return kLengthBands[band_index(info.length, kLengthBands)].name;
    case GroupKey::train_size: return kTrainBands[band_index(info.train_size, kTrainBands)].name;
  }
  return "";
}

std::vector<GroupRanks> grouped_ranks(const ResultsTable& table, const std::map<std::string, DatasetInfo>& metadata,
                                      GroupKey key) {
  // (sort key, name) -> dataset rows
  std::map<std::pair<std::size_t, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t d = 0; d < table.datasets.size(); ++d) {
    auto it = metadata.find(table.datasets[d]);
    if (it == metadata.end()) throw std::invalid_argument("no metadata for dataset " + table.datasets[d]);
    std::size_t order = 0;
    if (key == GroupKey::length) order = band_index(it->second.length, kLengthBands);
    if (key == GroupKey::train_size) order = band_index(it->second.train_size, kTrainBands);
    groups[{order, band_of(it->second, key)}].push_back(d);
  }
  std::vector<GroupRanks> out;
  for (const auto& [id, rows] : groups) {
    ResultsTable sub;
    sub.classifiers = table.classifiers;
    sub.kind = table.kind;
    for (auto d : rows) {
      sub.datasets.push_back(table.datasets[d]);
      const auto r = table.row(d);
      sub.accuracy.insert(sub.accuracy.end(), r.begin(), r.end());
    }
    out.push_back({id.second, sub.datasets, average_ranks(sub)});
  }
  return out;
}

std::vector<GroupRanks> grouped_ranks(const ResultsTable& table, const std::map<std::string, DatasetInfo>& metadata,
                                      const std::string& key) {
  return grouped_ranks(table, metadata, parse_group_key(key));
}

}  // namespace tsc::stats
