#include "forgetbench/regression.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "forgetbench/error.hpp"
#include "forgetbench/param_io.hpp"

namespace forgetbench {

RegressionDesign build_design(const std::vector<RegressionRow>& rows) {
  if (rows.size() < 2) throw FitError("a regression needs at least two rows");
  std::set<std::array<double, FeatureVector::size>> distinct;
  std::set<std::string> datasets;
  std::set<std::string> models;
  for (const auto& r : rows) {
    distinct.insert(r.features.values());
    datasets.insert(r.dataset);
    models.insert(r.model);
  }
  if (distinct.size() < 2) throw FitError("a regression needs at least two distinct feature rows");

  RegressionDesign d;
  d.reference_dataset = *datasets.begin();
  d.reference_model = *models.begin();
  d.columns.push_back("Constant");
  for (auto n : FeatureVector::names()) d.columns.emplace_back(n);
  const std::vector<std::string> dataset_levels(std::next(datasets.begin()), datasets.end());
  const std::vector<std::string> model_levels(std::next(models.begin()), models.end());
  for (const auto& l : dataset_levels) d.columns.push_back("Dataset[" + l + "]");
  for (const auto& l : model_levels) d.columns.push_back("Model[" + l + "]");

  const double n = static_cast<double>(rows.size());
  d.feature_means.assign(FeatureVector::size, 0.0);
  for (const auto& r : rows) {
    const auto v = r.features.values();
    for (std::size_t k = 0; k < v.size(); ++k) d.feature_means[k] += v[k] / n;
  }
  for (std::size_t k = 0; k < FeatureVector::size; ++k) {
    const double first = rows.front().features.values()[k];
    const bool constant =
        std::all_of(rows.begin(), rows.end(), [&](const auto& r) { return r.features.values()[k] == first; });
    if (constant) warn("characteristic " + std::string(FeatureVector::names()[k]) + " is constant; the design is rank deficient");
  }

  d.x.reserve(rows.size() * d.cols());
  for (const auto& r : rows) {
    d.x.push_back(1.0);
    const auto v = r.features.values();
    for (std::size_t k = 0; k < v.size(); ++k) d.x.push_back(v[k] - d.feature_means[k]);
    for (const auto& l : dataset_levels) d.x.push_back(r.dataset == l ? 1.0 : 0.0);
    for (const auto& l : model_levels) d.x.push_back(r.model == l ? 1.0 : 0.0);
    d.y.push_back(r.response);
  }
  return d;
}

std::string significance_stars(double p) {
  if (p <= 0.001) return "***";
  if (p <= 0.01) return "**";
  if (p <= 0.05) return "*";
  return "";
}

namespace {

// Continued fraction for I_x(a, b), modified Lentz's method.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int max_iter = 500;
  constexpr double eps = 1e-16;
  constexpr double tiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  throw EstimationError("incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("incomplete_beta needs a, b > 0");
  if (x < 0.0 || x > 1.0) throw DomainError("incomplete_beta needs x in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges quickly for x below the mean; use symmetry above it.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw DomainError("degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

double students_t_cdf(double t, double df) {
  const double tail = two_sided_p(t, df) / 2.0;
  return t >= 0.0 ? 1.0 - tail : tail;
}

RegressionReport ols_fit(const RegressionDesign& design) {
  const std::size_t n = design.rows();
  const std::size_t p = design.cols();
  if (design.x.size() != n * p) throw ShapeError("design matrix does not match its column list");
  if (n <= p) {
    throw FitError("regression needs more rows than columns (" + std::to_string(n) + " rows, " + std::to_string(p) +
                   " columns)");
  }
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const Mat> x(design.x.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  const Eigen::Map<const Eigen::VectorXd> y(design.y.data(), static_cast<Eigen::Index>(n));

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_check(x);
  rank_check.setThreshold(1e-10);
  if (rank_check.rank() < static_cast<Eigen::Index>(p)) {
    std::string names;
    const auto& perm = rank_check.colsPermutation().indices();
    for (Eigen::Index i = rank_check.rank(); i < static_cast<Eigen::Index>(p); ++i) {
      if (!names.empty()) names += ", ";
      names += design.columns[static_cast<std::size_t>(perm(i))];
    }
    throw FitError("design matrix is rank deficient; collinear columns: " + names);
  }

  const Eigen::MatrixXd xtx = x.transpose() * x;
  const Eigen::VectorXd xty = x.transpose() * y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> normal(xtx);
  const Eigen::VectorXd beta = normal.solve(xty);
  const Eigen::MatrixXd cov_unscaled = normal.inverse();

  const Eigen::VectorXd resid = y - x * beta;
  const double ss_res = resid.squaredNorm();
  const double mean_y = y.mean();
  const double ss_tot = (y.array() - mean_y).square().sum();

  RegressionReport r;
  r.n = n;
  r.df_resid = n - p;
  r.sigma2 = ss_res / static_cast<double>(r.df_resid);
  r.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 0.0;
  r.reference_dataset = design.reference_dataset;
  r.reference_model = design.reference_model;
  for (std::size_t j = 0; j < p; ++j) {
    Coefficient c;
    c.term = design.columns[j];
    c.estimate = beta(static_cast<Eigen::Index>(j));
    c.std_error = std::sqrt(std::max(0.0, r.sigma2 * cov_unscaled(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j))));
    if (c.std_error > 0.0) {
      c.t_value = c.estimate / c.std_error;
      c.p_value = two_sided_p(c.t_value, static_cast<double>(r.df_resid));
    } else if (c.estimate != 0.0) {
      c.t_value = std::copysign(std::numeric_limits<double>::infinity(), c.estimate);
      c.p_value = 0.0;
    }
    c.stars = significance_stars(c.p_value);
    r.coefficients.push_back(c);
  }
  return r;
}

void write_design_csv(std::ostream& out, const RegressionDesign& design) {
  out << "y";
  for (const auto& c : design.columns) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < design.rows(); ++r) {
    out << format_exact(design.y[r]);
    for (std::size_t c = 0; c < design.cols(); ++c) out << ',' << format_exact(design.at(r, c));
    out << '\n';
  }
}

void write_regression_csv(std::ostream& out, const RegressionReport& report) {
  out << "term,estimate,std_error,t_value,p_value,stars\n";
  for (const auto& c : report.coefficients) {
    out << c.term << ',' << format_exact(c.estimate) << ',' << format_exact(c.std_error) << ','
        << format_exact(c.t_value) << ',' << format_exact(c.p_value) << ',' << c.stars << '\n';
  }
  out << "R2," << format_exact(report.r_squared) << ",,,,\n";
  out << "n," << report.n << ",,,,\n";
  out << "df_resid," << report.df_resid << ",,,,\n";
}

void write_regression_table(std::ostream& out, const RegressionReport& report, const std::string& title) {
  std::map<std::string, std::string> describe;
  for (std::size_t k = 0; k < FeatureVector::size; ++k) {
    describe[std::string(FeatureVector::names()[k])] = std::string(FeatureVector::descriptions()[k]);
  }
  std::vector<std::array<std::string, 3>> lines;
  lines.push_back({"Characteristic", "Description", "Coeff"});
  {
    std::ostringstream v;
    v << std::fixed << std::setprecision(3) << report.r_squared;
    lines.push_back({"R2", "", v.str()});
  }
  for (const auto& c : report.coefficients) {
    std::ostringstream v;
    v << std::fixed << std::setprecision(4) << c.estimate << c.stars;
    auto it = describe.find(c.term);
    lines.push_back({c.term, it == describe.end() ? "" : it->second, v.str()});
  }
  std::array<std::size_t, 3> width{};
  for (const auto& l : lines)
    for (std::size_t i = 0; i < 3; ++i) width[i] = std::max(width[i], l[i].size());
  out << title << '\n';
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto& l = lines[li];
    out << std::left << std::setw(static_cast<int>(width[0])) << l[0] << "  " << std::setw(static_cast<int>(width[1]))
        << l[1] << "  " << std::right << std::setw(static_cast<int>(width[2])) << l[2] << '\n';
    if (li == 0) out << std::string(width[0] + width[1] + width[2] + 4, '-') << '\n';
  }
  out << "n = " << report.n << ", residual df = " << report.df_resid << ", reference dataset = "
      << report.reference_dataset << ", reference model = " << report.reference_model << '\n';
  out << "Significance: ***: p<=0.001, **: p<=0.01, *: p<=0.05\n";
}

}  // namespace forgetbench
