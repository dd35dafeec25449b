#pragma once

// Multi-run aggregation, Friedman / Wilcoxon-Holm comparison, cliques,
// grouped ranks and critical-difference diagrams.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tsc::stats {

struct RunRecord {
  std::string dataset;
  std::string architecture;  // or an external classifier name
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double loss = 0.0;
  double train_seconds = 0.0;
};

enum class Aggregation { mean, median, min, max };
std::string to_string(Aggregation a);
Aggregation parse_aggregation(const std::string& s);

/// Thrown when a (dataset, classifier) cell has no runs.
class MissingCellError : public std::runtime_error {
 public:
  explicit MissingCellError(std::vector<std::pair<std::string, std::string>> missing);
  const std::vector<std::pair<std::string, std::string>>& missing() const noexcept { return missing_; }

 private:
  std::vector<std::pair<std::string, std::string>> missing_;
};

struct ResultsTable {
  std::vector<std::string> datasets;     // rows, sorted
  std::vector<std::string> classifiers;  // columns, sorted
  std::vector<double> accuracy;          // row-major [datasets x classifiers]
  std::vector<std::size_t> runs;         // same layout
  Aggregation kind = Aggregation::mean;

  double at(std::size_t d, std::size_t c) const { return accuracy[d * classifiers.size() + c]; }
  std::span<const double> row(std::size_t d) const {
    return {accuracy.data() + d * classifiers.size(), classifiers.size()};
  }
  std::vector<double> column(std::size_t c) const;
};

/// Median of an even count is the lower-middle value so it names a real run.
double aggregate_values(std::vector<double> values, Aggregation kind);
/// Cross product of every dataset and classifier seen; MissingCellError lists
/// the empty cells.
ResultsTable aggregate(const std::vector<RunRecord>& runs, Aggregation kind);

/// Rank 1 = highest accuracy; ties share the mean of their ranks.
std::vector<double> rank_row(std::span<const double> accuracies);
std::vector<double> average_ranks(const ResultsTable& table);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double df);
/// Regularized lower incomplete gamma P(a, x) by its power series.
double regularized_gamma_p(double a, double x);

struct FriedmanResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool reject = false;
};
/// Needs k >= 3 classifiers and N >= 2 datasets.
FriedmanResult friedman_test(const ResultsTable& table, double alpha);

/// Two-sided signed-rank p-value for paired samples. Zero differences are
/// dropped; exact enumeration for n <= 20, normal approximation beyond.
double wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);
/// Both paths on nonzero differences, exposed for cross-checking.
double wilcoxon_exact(std::span<const double> differences);
double wilcoxon_normal(std::span<const double> differences);

struct HolmResult {
  std::vector<bool> reject;
  std::vector<double> adjusted;
};
HolmResult holm_correction(std::span<const double> p_values, double alpha);

/// Maximal sets of pairwise non-significant classifiers (singletons dropped).
/// `significant` is a symmetric k x k row-major matrix. Members are listed in
/// rank order and cliques by their best member.
std::vector<std::vector<std::size_t>> form_cliques(std::span<const double> ranks,
                                                   const std::vector<bool>& significant);

struct PairTest {
  std::size_t a = 0, b = 0;
  double p_value = 1.0;
  double adjusted = 1.0;
  bool significant = false;
};

struct ComparisonReport {
  std::vector<std::string> classifiers;
  std::vector<double> ranks;
  std::size_t datasets = 0;
  double alpha = 0.05;
  std::optional<FriedmanResult> friedman;  // absent when k = 2
  std::vector<PairTest> pairs;
  std::vector<std::vector<std::size_t>> cliques;
};

/// Friedman first (k >= 3); if it does not reject, every pair counts as
/// non-significant. Pairwise Wilcoxon tests share one Holm family.
ComparisonReport compare(const ResultsTable& table, double alpha);
std::string format_report(const ComparisonReport& report);
std::string render_cd_diagram(const ComparisonReport& report);

// ---- grouped ranks ----

struct DatasetInfo {
  std::string theme;
  std::size_t length = 0;
  std::size_t train_size = 0;
};
enum class GroupKey { theme, length, train_size };
/// "theme", "length", "trainsize"; invalid_argument otherwise.
GroupKey parse_group_key(const std::string& s);
/// Length bands <81, 81-250, 251-450, 451-700, 701-1000, >1000;
/// train-size bands <100, 100-399, 400-799, >799.
std::string band_of(const DatasetInfo& info, GroupKey key);

struct GroupRanks {
  std::string group;
  std::vector<std::string> datasets;
  std::vector<double> ranks;  // per classifier
};
/// Groups in band order (themes alphabetically); bands with no dataset are omitted.
std::vector<GroupRanks> grouped_ranks(const ResultsTable& table, const std::map<std::string, DatasetInfo>& metadata,
                                      GroupKey key);
std::vector<GroupRanks> grouped_ranks(const ResultsTable& table, const std::map<std::string, DatasetInfo>& metadata,
                                      const std::string& key);

// ---- CSV ----

/// Accepts `dataset,architecture,seed,accuracy,loss,train_seconds` and the
/// baseline layout `dataset,classifier,accuracy`.
std::vector<RunRecord> read_results(std::istream& in);
std::vector<RunRecord> read_results(const std::filesystem::path& path);
void write_results(const std::vector<RunRecord>& runs, std::ostream& out);
/// Merge into `path`, replacing rows with the same (dataset, architecture, seed).
void append_results(const std::filesystem::path& path, const std::vector<RunRecord>& runs);
/// `dataset,theme,length,train_size`
std::map<std::string, DatasetInfo> read_metadata(const std::filesystem::path& path);

}  // namespace tsc::stats
