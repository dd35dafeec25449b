#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "../common/manifest.hpp"
#include "tsc/error.hpp"
#include "tsc/reservoir.hpp"
#include "tsc/rng.hpp"

namespace tsc::reservoir {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMat>;
using ConstMap = Eigen::Map<const RowMat>;

ConstMap view(const Tensor& t) { return ConstMap(t.data(), Eigen::Index(t.dim(0)), Eigen::Index(t.size() / t.dim(0))); }
Map view(Tensor& t) { return Map(t.data(), Eigen::Index(t.dim(0)), Eigen::Index(t.size() / t.dim(0))); }

constexpr int kMaxAttempts = 5;

void validate(const ReservoirConfig& c) {
  if (c.size < 2) throw std::invalid_argument("reservoir size must be at least 2");
  if (!(c.sparsity >= 0 && c.sparsity <= 1)) throw std::invalid_argument("sparsity must lie in [0, 1]");
  if (!(c.spectral_radius > 0)) throw std::invalid_argument("spectral radius must be positive");
  if (!(c.input_scale > 0)) throw std::invalid_argument("input scale must be positive");
  if (!(c.ridge > 0)) throw std::invalid_argument("ridge penalty must be positive");
}

Tensor softmax_rows(Tensor s) {
  const std::size_t n = s.dim(0), k = s.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = s.data() + i * k;
    const double m = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += (row[j] = std::exp(row[j] - m));
    for (std::size_t j = 0; j < k; ++j) row[j] /= z;
  }
  return s;
}

// Stacked readout rows [N*T, 1 + M + N_r] for a whole batch.
RowMat design(const Tensor& x, const Tensor& states) {
  const std::size_t n = x.dim(0), T = x.dim(1), M = x.dim(2), R = states.dim(2);
  RowMat a(Eigen::Index(n * T), Eigen::Index(1 + M + R));
  for (std::size_t r = 0; r < n * T; ++r) {
    a(Eigen::Index(r), 0) = 1.0;
    for (std::size_t m = 0; m < M; ++m) a(Eigen::Index(r), Eigen::Index(1 + m)) = x[r * M + m];
    for (std::size_t j = 0; j < R; ++j) a(Eigen::Index(r), Eigen::Index(1 + M + j)) = states[r * R + j];
  }
  return a;
}

Tensor solve_normal(const RowMat& gram, const RowMat& rhs, double lambda) {
  RowMat g = gram;
  g.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success) throw NumericalError("ridge normal equations are not positive definite");
  const Eigen::MatrixXd w = llt.solve(Eigen::MatrixXd(rhs));  // [F, K]
  Tensor out(Shape{std::size_t(w.cols()), std::size_t(w.rows())});
  view(out) = w.transpose();
  return out;
}

// Posterior per series from stacked rows of one batch.
std::vector<Posterior> posteriors(const RowMat& a, const Tensor& w_out, std::size_t n, std::size_t T) {
  const std::size_t K = w_out.dim(0);
  Tensor scores(Shape{n * T, K});
  view(scores) = a * view(w_out).transpose();
  const auto p = softmax_rows(std::move(scores));
  std::vector<Posterior> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor rows(Shape{T, K}, std::vector<double>(p.data() + i * T * K, p.data() + (i + 1) * T * K));
    out.push_back(average_posterior(rows));
  }
  return out;
}

Tensor one_hot_steps(const data::Dataset& d) {
  const std::size_t T = d.length(), K = d.classes();
  Tensor y(Shape{d.size() * T, K});
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t t = 0; t < T; ++t) y.at(i * T + t, d.labels[i]) = 1.0;
  return y;
}

}  // namespace

double spectral_radius(const Tensor& square) {
  if (square.rank() != 2 || square.dim(0) != square.dim(1)) {
    throw ShapeError("spectral_radius needs a square matrix, got " + to_string(square.shape()));
  }
  RowMat b = view(square);
  double norm = b.norm();
  if (norm == 0.0) return 0.0;
  // b = A^k / ||A^k|| and log_rho = log ||A^k|| / k. Squaring gives
  // ||A^2k|| = ||A^k||^2 ||b^2||, so log_rho gains log ||b^2|| / 2k.
  b /= norm;
  double log_rho = std::log(norm), k = 1.0;
  for (int j = 0; j < 64; ++j) {
    RowMat next = b * b;
    k *= 2.0;
    norm = next.norm();
    if (norm == 0.0) return 0.0;  // nilpotent
    b = next / norm;
    const double step = std::log(norm) / k;
    log_rho += step;
    if (j >= 20 && std::abs(step) < 1e-17) break;
  }
  return std::exp(log_rho);
}

Reservoir init_reservoir(const ReservoirConfig& config, std::size_t dims) {
  validate(config);
  if (dims == 0) throw std::invalid_argument("reservoir input needs at least one dimension");
  const std::size_t n = config.size, cells = n * n;
  const auto nonzero = std::size_t(std::llround((1.0 - config.sparsity) * double(cells)));
  const Rng root(config.seed);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng = root.fork(std::uint64_t(attempt) + 1);
    Reservoir r{Tensor(Shape{n, dims}), Tensor(Shape{n, n})};
    std::vector<std::size_t> cell(cells);
    std::iota(cell.begin(), cell.end(), 0);
    for (std::size_t i = 0; i < nonzero; ++i) {
      std::swap(cell[i], cell[i + rng.below(cells - i)]);
      r.w[cell[i]] = rng.uniform(-1.0, 1.0);
    }
    const double rho = spectral_radius(r.w);
    if (!(rho > 0.0)) continue;
    for (auto& v : r.w.values()) v *= config.spectral_radius / rho;
    for (auto& v : r.w_in.values()) v = rng.uniform(-config.input_scale, config.input_scale);
    return r;
  }
  throw NumericalError("reservoir draw has zero spectral radius after " + std::to_string(kMaxAttempts) +
                       " attempts (sparsity " + detail::format_double(config.sparsity) + ")");
}

Tensor reservoir_states(const Reservoir& r, const Tensor& series, const Tensor& initial) {
  if (series.rank() != 2 || series.dim(1) != r.w_in.dim(1)) {
    throw ShapeError("reservoir input " + to_string(series.shape()) + " does not match W_in " +
                     to_string(r.w_in.shape()));
  }
  const std::size_t R = r.w.dim(0);
  if (initial.size() != R) throw ShapeError("initial state must have " + std::to_string(R) + " entries");
  const std::size_t T = series.dim(0);
  Tensor out(Shape{T, R});
  Eigen::VectorXd state = Eigen::Map<const Eigen::VectorXd>(initial.data(), Eigen::Index(R));
  const auto w = view(r.w);
  const auto w_in = view(r.w_in);
  const auto x = view(series);
  for (std::size_t t = 0; t < T; ++t) {
    const Eigen::VectorXd pre = w_in * x.row(Eigen::Index(t)).transpose() + w * state;
    state = pre.array().tanh();
    Eigen::Map<Eigen::VectorXd>(out.data() + t * R, Eigen::Index(R)) = state;
  }
  return out;
}

Tensor reservoir_states(const Reservoir& r, const Tensor& series) {
  return reservoir_states(r, series, Tensor(Shape{r.w.dim(0)}));
}

Tensor reservoir_states_batch(const Reservoir& r, const Tensor& x) {
  if (x.rank() != 3 || x.dim(2) != r.w_in.dim(1)) {
    throw ShapeError("reservoir batch " + to_string(x.shape()) + " does not match W_in " + to_string(r.w_in.shape()));
  }
  const std::size_t n = x.dim(0), T = x.dim(1), M = x.dim(2), R = r.w.dim(0);
  Tensor out(Shape{n, T, R});
  // Input drive for every step at once, then the recurrence across the batch.
  RowMat drive = ConstMap(x.data(), Eigen::Index(n * T), Eigen::Index(M)) * view(r.w_in).transpose();
  RowMat state = RowMat::Zero(Eigen::Index(n), Eigen::Index(R));
  const auto w_t = view(r.w).transpose();
  using Strided = Eigen::Map<RowMat, Eigen::Unaligned, Eigen::OuterStride<>>;
  using ConstStrided = Eigen::Map<const RowMat, Eigen::Unaligned, Eigen::OuterStride<>>;
  for (std::size_t t = 0; t < T; ++t) {
    const ConstStrided d(drive.data() + t * R, Eigen::Index(n), Eigen::Index(R), Eigen::OuterStride<>(Eigen::Index(T * R)));
    RowMat pre = d;
    pre.noalias() += state * w_t;
    state = pre.array().tanh();
    Strided(out.data() + t * R, Eigen::Index(n), Eigen::Index(R), Eigen::OuterStride<>(Eigen::Index(T * R))) = state;
  }
  return out;
}

Tensor readout_features(const Tensor& series, const Tensor& states) {
  if (series.rank() != 2 || states.rank() != 2 || series.dim(0) != states.dim(0)) {
    throw ShapeError("readout features need matching [T, M] and [T, N_r] inputs");
  }
  const auto a = design(series.reshaped({1, series.dim(0), series.dim(1)}),
                        states.reshaped({1, states.dim(0), states.dim(1)}));
  Tensor out(Shape{std::size_t(a.rows()), std::size_t(a.cols())});
  view(out) = a;
  return out;
}

Tensor fit_ridge(const Tensor& features, const Tensor& targets, double lambda) {
  if (features.rank() != 2 || targets.rank() != 2 || features.dim(0) != targets.dim(0)) {
    throw ShapeError("fit_ridge: features " + to_string(features.shape()) + " and targets " +
                     to_string(targets.shape()) + " disagree");
  }
  if (!(lambda > 0)) throw std::invalid_argument("ridge penalty must be positive");
  const auto a = view(features);
  const RowMat gram = a.transpose() * a;
  const RowMat rhs = a.transpose() * view(targets);
  return solve_normal(gram, rhs, lambda);
}

Grid Grid::standard() { return {{32, 64, 128, 256}, {0.5, 0.8, 0.9}, {0.25, 0.5, 0.9, 1.0}, {0.01, 0.1, 1.0}}; }

std::vector<ReservoirConfig> Grid::configs(std::uint64_t seed) const {
  std::vector<ReservoirConfig> out;
  for (auto n : sizes)
    for (auto s : sparsities)
      for (auto rho : radii)
        for (auto l : ridges) out.push_back({n, s, rho, 1.0, l, seed});
  return out;
}

Posterior average_posterior(const Tensor& per_step) {
  if (per_step.rank() != 2 || per_step.dim(0) == 0) throw ShapeError("posterior rows must be a [T, K] matrix");
  const std::size_t T = per_step.dim(0), K = per_step.dim(1);
  Posterior p{0, std::vector<double>(K, 0.0)};
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < K; ++k) p.probabilities[k] += per_step.at(t, k);
  for (auto& v : p.probabilities) v /= double(T);
  p.label = std::size_t(std::max_element(p.probabilities.begin(), p.probabilities.end()) - p.probabilities.begin());
  return p;
}

TwiesnModel twiesn_fit_config(const data::Dataset& train, const ReservoirConfig& config) {
  if (train.size() == 0) throw std::invalid_argument("TWIESN needs at least one training series");
  auto res = init_reservoir(config, train.dims());
  const auto a = design(train.x, reservoir_states_batch(res, train.x));
  const RowMat gram = a.transpose() * a;
  const RowMat rhs = a.transpose() * view(one_hot_steps(train));
  return {config, std::move(res), solve_normal(gram, rhs, config.ridge), train.name, train.vocabulary};
}

TwiesnFit twiesn_fit(const data::Dataset& train, const Grid& grid, std::uint64_t seed, double validation_fraction) {
  if (grid.size() == 0) throw std::invalid_argument("TWIESN grid is empty");
  const auto split = data::split_indices(train, validation_fraction, seed);
  if (split.validation.empty()) throw std::invalid_argument("TWIESN held-out split of " + train.name + " is empty");
  const auto fit_part = train.subset(split.train), held = train.subset(split.validation);
  const auto y = one_hot_steps(fit_part);

  TwiesnFit result{{}, {}, 0};
  double best = -1.0;
  for (auto n : grid.sizes)
    for (auto s : grid.sparsities)
      for (auto rho : grid.radii) {
        // the reservoir and its normal equations do not depend on lambda
        const ReservoirConfig base{n, s, rho, 1.0, grid.ridges.front(), seed};
        const auto res = init_reservoir(base, train.dims());
        const auto a = design(fit_part.x, reservoir_states_batch(res, fit_part.x));
        const RowMat gram = a.transpose() * a;
        const RowMat rhs = a.transpose() * view(y);
        const auto a_held = design(held.x, reservoir_states_batch(res, held.x));
        for (auto lambda : grid.ridges) {
          const auto w_out = solve_normal(gram, rhs, lambda);
          const auto post = posteriors(a_held, w_out, held.size(), held.length());
          std::size_t hit = 0;
          for (std::size_t i = 0; i < held.size(); ++i) hit += post[i].label == held.labels[i];
          auto config = base;
          config.ridge = lambda;
          const double acc = double(hit) / double(held.size());
          if (acc > best) {
            best = acc;
            result.best = result.scores.size();
          }
          result.scores.push_back({config, acc});
        }
      }
  result.model = twiesn_fit_config(train, result.scores[result.best].config);
  return result;
}

Posterior twiesn_posterior(const TwiesnModel& model, const Tensor& series) {
  const auto x = series.reshaped({1, series.dim(0), series.dim(1)});
  const auto a = design(x, reservoir_states_batch(model.reservoir, x));
  return posteriors(a, model.w_out, 1, series.dim(0)).front();
}

std::vector<std::size_t> twiesn_predict(const TwiesnModel& model, const data::Dataset& d) {
  const auto a = design(d.x, reservoir_states_batch(model.reservoir, d.x));
  std::vector<std::size_t> out;
  for (const auto& p : posteriors(a, model.w_out, d.size(), d.length())) out.push_back(p.label);
  return out;
}

namespace {
constexpr const char* kFormat = "tsc-twiesn-1";
}

void save_twiesn(const TwiesnModel& model, const std::filesystem::path& manifest) {
  detail::Manifest m;
  const auto& c = model.config;
  m.add("format", kFormat);
  m.add("architecture", "twiesn");
  m.add("size", std::uint64_t(c.size));
  m.add("sparsity", c.sparsity);
  m.add("spectral_radius", c.spectral_radius);
  m.add("input_scale", c.input_scale);
  m.add("ridge", c.ridge);
  m.add("seed", c.seed);
  m.add("dims", std::uint64_t(model.reservoir.w_in.dim(1)));
  m.add("classes", std::uint64_t(model.w_out.dim(0)));
  m.add("dataset", model.dataset);
  m.add("blob", detail::blob_path(manifest).filename().string());
  for (const auto& label : model.vocabulary) m.add("class", label);
  m.write(manifest);
  std::vector<double> blob;
  for (const Tensor* t : {&model.reservoir.w_in, &model.reservoir.w, &model.w_out})
    blob.insert(blob.end(), t->values().begin(), t->values().end());
  detail::write_blob(detail::blob_path(manifest), blob);
}

TwiesnModel load_twiesn(const std::filesystem::path& manifest) {
  const auto m = detail::Manifest::read(manifest);
  if (m.get("format") != kFormat) throw ParseError("manifest: unsupported format '" + m.get("format") + "'");
  TwiesnModel model;
  model.config = {m.u64("size"), m.f64("sparsity"), m.f64("spectral_radius"), m.f64("input_scale"), m.f64("ridge"),
                  m.u64("seed")};
  validate(model.config);
  const std::size_t R = model.config.size, M = m.u64("dims"), K = m.u64("classes");
  model.dataset = m.has("dataset") ? m.get("dataset") : "";
  model.vocabulary = m.all("class");
  const auto blob = detail::read_blob(manifest.parent_path() / m.get("blob"), R * M + R * R + K * (1 + M + R));
  auto take = [&, offset = std::size_t(0)](Shape shape) mutable {
    const std::size_t n = element_count(shape);
    Tensor t(std::move(shape), std::vector<double>(blob.begin() + long(offset), blob.begin() + long(offset + n)));
    offset += n;
    return t;
  };
  model.reservoir.w_in = take({R, M});
  model.reservoir.w = take({R, R});
  model.w_out = take({K, 1 + M + R});
  return model;
}

}  // namespace tsc::reservoir
