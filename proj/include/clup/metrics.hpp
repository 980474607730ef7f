#pragma once

#include <span>
#include <vector>

#include "clup/model.hpp"

namespace clup {

struct Iterate;

/// Per-iteration summaries of one trajectory.
struct IterationRecord {
  int k = 0;
  double p_err = 0.0;  // fraction of coordinates with sign(x_s) != +1
  double s_hat = 0.0;  // (x^(k-1))^T x^(k,s); 0 when there is no previous direction
  double d1 = 0.0;     // x_sol^T x^(k,s)
  double d2 = 0.0;     // |x^(k,s)|^2
  double s3 = 0.0;     // 1 - d1
  double c2z = 0.0;    // d2 - 2 d1 + 1 = |z^(k)|^2
  std::vector<double> s2;     // (x^(j,s))^T z^(k), j = 1..k-1
  std::vector<double> q_row;  // Q_{k,j}, j = 1..k-1
};

struct Summary {
  double mean = 0.0;
  double std_error = 0.0;
};

struct IterationSummary {
  int k = 0;
  int count = 0;  // trials that reached this iteration
  Summary p_err;
  Summary s_hat;
  Summary d1;
  Summary d2;
  Summary s3;
  Summary c2z;
};

struct AggregateStats {
  std::vector<IterationSummary> per_iteration;
  Matrix q_matrix;  // K x K, unit diagonal, symmetric
  int trials = 0;
};

/// Fraction of coordinates with x_s[i] <= 0 (x_sol is the all-positive vector).
double bit_error_rate(const Vector& x_s, const Vector& x_sol);

/// Cross-iteration correlation
///   Q = (s3 + sigma^2 - s2) / (sqrt(c2z_k + sigma^2) sqrt(c2z_j + sigma^2))
/// where s3 = 1 - d1 of the later iterate and s2 = (x^(j,s))^T z^(k).
double q_entry(double s3, double s2, double c2z_k, double c2z_j, double sigma);

/// Builds the record for the iterate with index `k`. `iterates` is the
/// trajectory so far in order; it may begin with the k = 0 random-start
/// carrier, which supplies the direction for s_hat but takes no part in s2/Q.
IterationRecord record_iteration(std::span<const Iterate> iterates, int k, double sigma,
                                 const Vector& x_sol);

/// Means and standard errors per iteration index over trials. Trials may have
/// different lengths (early stopping); each index averages the trials that
/// reached it.
AggregateStats aggregate(std::span<const std::vector<IterationRecord>> trials);

}  // namespace clup
