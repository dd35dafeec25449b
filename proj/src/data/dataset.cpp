#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tsc/data.hpp"
#include "tsc/error.hpp"
#include "tsc/rng.hpp"

namespace tsc::data {

namespace {

bool parse_number(std::string_view text, double& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\r')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool numeric_less(const std::string& a, const std::string& b) {
  double x = 0, y = 0;
  parse_number(a, x);
  parse_number(b, y);
  return x < y || (x == y && a < b);
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

}  // namespace

Tensor Dataset::targets() const { return one_hot(labels, classes()); }

Tensor Dataset::series(std::size_t i) const {
  const std::size_t t = length(), m = dims();
  std::vector<double> v(x.data() + i * t * m, x.data() + (i + 1) * t * m);
  return Tensor(Shape{t, m}, std::move(v));
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  if (rows.empty()) throw std::invalid_argument("subset: no rows selected");
  Dataset out;
  out.name = name;
  out.theme = theme;
  out.vocabulary = vocabulary;
  out.min_length = min_length;
  out.max_length = max_length;
  const std::size_t stride = length() * dims();
  std::vector<double> buf;
  buf.reserve(rows.size() * stride);
  for (auto r : rows) {
    if (r >= size()) throw std::out_of_range("subset: row index out of range");
    buf.insert(buf.end(), x.data() + r * stride, x.data() + (r + 1) * stride);
    out.labels.push_back(labels[r]);
  }
  out.x = Tensor(Shape{rows.size(), length(), dims()}, std::move(buf));
  return out;
}

std::vector<std::string> make_vocabulary(std::vector<std::string> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  const bool numeric = std::all_of(labels.begin(), labels.end(), [](const std::string& s) {
    double v;
    return parse_number(s, v);
  });
  if (numeric) std::sort(labels.begin(), labels.end(), numeric_less);
  return labels;
}

std::vector<std::size_t> encode_labels(const std::vector<std::string>& labels,
                                       const std::vector<std::string>& vocabulary) {
  std::map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < vocabulary.size(); ++k) index.emplace(vocabulary[k], k);
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    const auto it = index.find(l);
    if (it == index.end()) throw VocabularyError("label '" + l + "' is not in the label vocabulary");
    out.push_back(it->second);
  }
  return out;
}

Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t classes) {
  if (labels.empty() || classes == 0) throw std::invalid_argument("one_hot: empty labels or vocabulary");
  Tensor y(Shape{labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) throw VocabularyError("class index " + std::to_string(labels[i]) + " out of range");
    y.at(i, labels[i]) = 1.0;
  }
  return y;
}

Tensor one_hot(const std::vector<std::string>& labels, const std::vector<std::string>& vocabulary) {
  return one_hot(encode_labels(labels, vocabulary), vocabulary.size());
}

// ---- univariate ---------------------------------------------------------------

UcrRows parse_ucr(std::istream& in) {
  UcrRows rows;
  std::string line;
  std::size_t line_no = 0;
  char delim = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (!delim) delim = line.find('\t') != std::string::npos ? '\t' : ',';
    const auto fields = split(line, delim);
    if (fields.size() < 2) throw ParseError("expected a label followed by values", line_no);
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw ParseError("ragged row: " + std::to_string(fields.size() - 1) + " values, expected " +
                           std::to_string(width - 1),
                       line_no);
    }
    std::vector<double> values(fields.size() - 1);
    for (std::size_t j = 1; j < fields.size(); ++j) {
      if (!parse_number(fields[j], values[j - 1])) {
        throw ParseError("malformed value '" + std::string(fields[j]) + "'", line_no);
      }
    }
    rows.labels.push_back(trim(std::string(fields[0])));
    rows.values.push_back(std::move(values));
  }
  if (rows.labels.empty()) throw ParseError("no series found");
  return rows;
}

namespace {

Dataset from_rows(const UcrRows& rows, const std::vector<std::string>& vocabulary) {
  Dataset d;
  const std::size_t n = rows.values.size(), t = rows.values.front().size();
  std::vector<double> buf;
  buf.reserve(n * t);
  for (const auto& r : rows.values) buf.insert(buf.end(), r.begin(), r.end());
  d.x = Tensor(Shape{n, t, 1}, std::move(buf));
  d.vocabulary = vocabulary;
  d.labels = encode_labels(rows.labels, vocabulary);
  d.min_length = d.max_length = t;
  return d;
}

}  // namespace

std::pair<Dataset, Dataset> load_ucr(const std::filesystem::path& train, const std::filesystem::path& test) {
  auto in_train = open(train);
  auto in_test = open(test);
  const auto train_rows = parse_ucr(in_train);
  const auto test_rows = parse_ucr(in_test);
  if (train_rows.values.front().size() != test_rows.values.front().size()) {
    throw ParseError("train and test series lengths differ (" + std::to_string(train_rows.values.front().size()) +
                     " vs " + std::to_string(test_rows.values.front().size()) + ")");
  }
  const auto vocabulary = make_vocabulary(train_rows.labels);
  auto a = from_rows(train_rows, vocabulary);
  auto b = from_rows(test_rows, vocabulary);
  std::string name = train.stem().string();
  if (const auto cut = name.rfind("_TRAIN"); cut != std::string::npos) name = name.substr(0, cut);
  a.name = b.name = name;
  return {std::move(a), std::move(b)};
}

// ---- multivariate long format ----------------------------------------------------

RaggedSeries parse_mts_long(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty long-format file");
  ++line_no;
  if (trim(line) != "series_id,dimension,timestamp,value,label") {
    throw ParseError("expected header series_id,dimension,timestamp,value,label", 1);
  }

  struct Raw {
    std::string label;
    std::map<std::string, std::map<std::size_t, double>> dims;
  };
  std::vector<std::string> order;
  std::map<std::string, Raw> raw;
  std::vector<std::string> all_dims;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 5) throw ParseError("expected 5 fields", line_no);
    const std::string id = trim(std::string(f[0])), dim = trim(std::string(f[1])), label = trim(std::string(f[4]));
    double ts = 0, value = 0;
    if (!parse_number(f[2], ts) || ts < 0 || ts != std::floor(ts)) throw ParseError("malformed timestamp", line_no);
    if (!parse_number(f[3], value)) throw ParseError("malformed value", line_no);
    auto [it, fresh] = raw.try_emplace(id);
    if (fresh) {
      order.push_back(id);
      it->second.label = label;
    } else if (it->second.label != label) {
      throw IntegrityError("series '" + id + "' carries labels '" + it->second.label + "' and '" + label + "'");
    }
    if (!it->second.dims[dim].emplace(std::size_t(ts), value).second) {
      throw IntegrityError("duplicate row for series '" + id + "', dimension " + dim + ", timestamp " +
                           std::to_string(std::size_t(ts)));
    }
    all_dims.push_back(dim);
  }
  if (order.empty()) throw ParseError("no series found");
  const auto dims = make_vocabulary(all_dims);

  RaggedSeries out;
  for (const auto& id : order) {
    const Raw& r = raw.at(id);
    std::size_t len = 0;
    for (const auto& d : dims) {
      const auto it = r.dims.find(d);
      if (it == r.dims.end()) throw IntegrityError("series '" + id + "' is missing dimension " + d);
      const auto& steps = it->second;
      if (steps.rbegin()->first + 1 != steps.size()) {
        throw IntegrityError("series '" + id + "', dimension " + d + ": timestamps are not contiguous from 0");
      }
      if (len == 0) len = steps.size();
      if (steps.size() != len) throw IntegrityError("series '" + id + "': dimensions have different lengths");
    }
    Tensor s(Shape{len, dims.size()});
    for (std::size_t m = 0; m < dims.size(); ++m)
      for (const auto& [t, v] : r.dims.at(dims[m])) s.at(t, m) = v;
    out.ids.push_back(id);
    out.labels.push_back(r.label);
    out.series.push_back(std::move(s));
  }
  return out;
}

RaggedSeries load_mts_long(const std::filesystem::path& path) {
  auto in = open(path);
  return parse_mts_long(in);
}

void write_mts_long(const RaggedSeries& data, std::ostream& out) {
  out << "series_id,dimension,timestamp,value,label\n";
  char buf[64];
  for (std::size_t i = 0; i < data.series.size(); ++i) {
    const Tensor& s = data.series[i];
    for (std::size_t m = 0; m < s.dim(1); ++m)
      for (std::size_t t = 0; t < s.dim(0); ++t) {
        const auto res = std::to_chars(buf, buf + sizeof buf, s.at(t, m));
        out << data.ids[i] << ',' << m << ',' << t << ',' << std::string_view(buf, std::size_t(res.ptr - buf)) << ','
            << data.labels[i] << '\n';
      }
  }
}

Dataset to_dataset(const RaggedSeries& data, const std::vector<std::string>& vocabulary,
                   std::size_t target_length) {
  if (data.series.empty()) throw std::invalid_argument("to_dataset: no series");
  std::size_t lo = data.series.front().dim(0), hi = lo;
  const std::size_t m = data.series.front().dim(1);
  for (const auto& s : data.series) {
    if (s.dim(1) != m) throw IntegrityError("series disagree on dimensionality");
    lo = std::min(lo, s.dim(0));
    hi = std::max(hi, s.dim(0));
  }
  const std::size_t t = target_length ? target_length : hi;
  Dataset d;
  std::vector<double> buf;
  buf.reserve(data.series.size() * t * m);
  for (const auto& s : data.series) {
    const Tensor r = s.dim(0) == t ? s : linear_interpolate(s, t);
    buf.insert(buf.end(), r.values().begin(), r.values().end());
  }
  d.x = Tensor(Shape{data.series.size(), t, m}, std::move(buf));
  d.vocabulary = vocabulary;
  d.labels = encode_labels(data.labels, vocabulary);
  d.min_length = lo;
  d.max_length = hi;
  return d;
}

std::pair<Dataset, Dataset> load_mts_pair(const std::filesystem::path& train, const std::filesystem::path& test) {
  const auto a = load_mts_long(train);
  const auto b = load_mts_long(test);
  std::size_t longest = 0;
  for (const auto* set : {&a, &b})
    for (const auto& s : set->series) longest = std::max(longest, s.dim(0));
  const auto vocabulary = make_vocabulary(a.labels);
  auto tr = to_dataset(a, vocabulary, longest);
  auto te = to_dataset(b, vocabulary, longest);
  std::string name = train.stem().string();
  if (const auto cut = name.rfind("_TRAIN"); cut != std::string::npos) name = name.substr(0, cut);
  tr.name = te.name = name;
  return {std::move(tr), std::move(te)};
}

// ---- splits --------------------------------------------------------------------------

Split split_indices(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("split: fraction must lie in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(data.classes());
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);
  Rng rng(seed);
  Split s;
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    auto& rows = by_class[k];
    if (rows.empty()) continue;
    if (rows.size() < 2) {
      std::cerr << "warning: class '" << data.vocabulary[k] << "' has a single member; kept in the train part\n";
      s.train.push_back(rows.front());
      continue;
    }
    for (std::size_t i = rows.size() - 1; i > 0; --i) std::swap(rows[i], rows[rng.below(i + 1)]);
    std::size_t n_val = std::size_t(std::llround(fraction * double(rows.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, rows.size() - 1);
    s.validation.insert(s.validation.end(), rows.begin(), rows.begin() + long(n_val));
    s.train.insert(s.train.end(), rows.begin() + long(n_val), rows.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  if (s.validation.empty()) throw std::invalid_argument("split: validation part is empty");
  return s;
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& data, double fraction, std::uint64_t seed) {
  const auto s = split_indices(data, fraction, seed);
  return {data.subset(s.train), data.subset(s.validation)};
}

}  // namespace tsc::data
