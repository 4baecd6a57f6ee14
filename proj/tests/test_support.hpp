#pragma once

// Shared helpers for the test suites: scratch directories and independent
// reference implementations used as oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testing_support {

namespace fs = std::filesystem;

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "gazelign") {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

/// Relative path -> content for every regular file under root.
inline std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  }
  return out;
}

// -----------------------------------------------------------------------------
// Oracles
// -----------------------------------------------------------------------------

/// ROC-AUC by counting every (positive, negative) pair; ties count 1/2.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& mask) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!mask[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (mask[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / pairs;
}

/// Builds the cumulative evidence curve explicitly and integrates it with the
/// trapezoid rule over x in [0, 1]. Order: descending score, ascending index.
inline double trapezoid_alignment_auc(const std::vector<double>& scores, const std::vector<double>& evidence) {
  const std::size_t n = scores.size();
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < n; ++i) order.emplace_back(-scores[i], i);
  std::sort(order.begin(), order.end());
  double total = 0.0;
  for (double e : evidence) total += e;
  std::vector<double> xs{0.0}, ys{0.0};
  double cum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cum += evidence[order[k].second];
    xs.push_back(static_cast<double>(k + 1) / static_cast<double>(n));
    ys.push_back(cum / total);
  }
  double area = 0.0;
  for (std::size_t k = 1; k < xs.size(); ++k) area += (xs[k] - xs[k - 1]) * (ys[k] + ys[k - 1]) / 2.0;
  return area;
}

using Mat = std::vector<std::vector<double>>;

inline Mat naive_matmul(const Mat& a, const Mat& b) {
  const std::size_t n = a.size();
  Mat c(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

/// Spearman coefficient for tie-free rankings from the sum of squared rank
/// differences.
inline double spearman_no_ties(const std::vector<double>& ra, const std::vector<double>& rb) {
  const double n = static_cast<double>(ra.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

/// Textbook Pearson coefficient (computational formula).
inline double textbook_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

/// Midranks by counting: rank = 1 + #smaller + (#equal - 1) / 2.
inline std::vector<double> counting_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      if (v < x[i]) less += 1;
      if (v == x[i]) equal += 1;
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

}  // namespace testing_support
