#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "forgetbench/features.hpp"

namespace forgetbench {

/// One observation: a (sub-)setting run with one model.
struct RegressionRow {
  std::string setting;
  std::string dataset;  // level of the dataset dummy
  std::string model;    // level of the model dummy
  double response = 0.0;
  FeatureVector features;
};

/// Row-major design matrix with an intercept column first, then the nine
/// centered characteristics, then dataset dummies, then model dummies.
struct RegressionDesign {
  std::vector<std::string> columns;
  std::vector<double> x;  // rows() x columns.size()
  std::vector<double> y;
  std::vector<double> feature_means;
  std::string reference_dataset;
  std::string reference_model;

  std::size_t rows() const noexcept { return y.size(); }
  std::size_t cols() const noexcept { return columns.size(); }
  double at(std::size_t r, std::size_t c) const { return x[r * columns.size() + c]; }
};

/// Reference levels are the lexicographically first dataset and model.
/// Characteristics that are constant across rows trigger a warning (their
/// centered column is all zero and the fit will reject the design).
RegressionDesign build_design(const std::vector<RegressionRow>& rows);

struct Coefficient {
  std::string term;
  double estimate = 0.0;
  double std_error = 0.0;
  double t_value = 0.0;
  double p_value = 1.0;
  std::string stars;
};

struct RegressionReport {
  std::vector<Coefficient> coefficients;
  double r_squared = 0.0;
  std::size_t n = 0;
  std::size_t df_resid = 0;
  double sigma2 = 0.0;
  std::string reference_dataset;
  std::string reference_model;
};

/// Least squares through the normal equations (pivoted QR of X'X), standard
/// errors from sigma^2 (X'X)^-1 and two-sided t-test p-values.
/// Throws FitError when rows <= columns or X is rank deficient.
RegressionReport ols_fit(const RegressionDesign& design);

/// "***" for p <= 0.001, "**" for p <= 0.01, "*" for p <= 0.05.
std::string significance_stars(double p);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
/// CDF of Student's t with `df` degrees of freedom.
double students_t_cdf(double t, double df);
/// P(|T| >= |t|).
double two_sided_p(double t, double df);

void write_design_csv(std::ostream& out, const RegressionDesign& design);
void write_regression_csv(std::ostream& out, const RegressionReport& report);
/// Aligned text table: characteristic, description, coefficient with stars.
void write_regression_table(std::ostream& out, const RegressionReport& report, const std::string& title);

}  // namespace forgetbench
