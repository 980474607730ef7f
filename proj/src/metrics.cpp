#include "clup/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "clup/clup_engine.hpp"
#include "clup/error.hpp"

namespace clup {

double bit_error_rate(const Vector& x_s, const Vector& x_sol) {
  if (x_s.size() != x_sol.size()) throw Error("bit_error_rate: length mismatch");
  if (x_s.size() == 0) throw Error("bit_error_rate: empty vector");
  const auto errors = (x_s.array() <= 0.0).count();
  return static_cast<double>(errors) / static_cast<double>(x_s.size());
}

double q_entry(double s3, double s2, double c2z_k, double c2z_j, double sigma) {
  const double s2n = sigma * sigma;
  return (s3 + s2n - s2) / (std::sqrt(c2z_k + s2n) * std::sqrt(c2z_j + s2n));
}

IterationRecord record_iteration(std::span<const Iterate> iterates, int k, double sigma,
                                 const Vector& x_sol) {
  const auto it = std::find_if(iterates.begin(), iterates.end(), [k](const Iterate& i) { return i.k == k; });
  if (it == iterates.end()) throw Error("record_iteration: iterate " + std::to_string(k) + " not present");
  const Iterate& cur = *it;
  if (cur.x_s.size() != x_sol.size()) throw Error("record_iteration: length mismatch");

  IterationRecord rec;
  rec.k = k;
  rec.p_err = bit_error_rate(cur.x_s, x_sol);
  rec.s_hat = it == iterates.begin() ? 0.0 : std::prev(it)->x.dot(cur.x_s);
  rec.d1 = x_sol.dot(cur.x_s);
  rec.d2 = cur.x_s.squaredNorm();
  rec.s3 = 1.0 - rec.d1;
  rec.c2z = rec.d2 - 2.0 * rec.d1 + 1.0;

  for (auto prev = iterates.begin(); prev != it; ++prev) {
    if (prev->k < 1) continue;
    const double s2 = prev->x_s.dot(cur.z);
    const double c2z_j = prev->z.squaredNorm();
    rec.s2.push_back(s2);
    rec.q_row.push_back(q_entry(rec.s3, s2, rec.c2z, c2z_j, sigma));
  }
  return rec;
}

namespace {

struct Accumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  int count = 0;

  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++count;
  }

  Summary summary() const {
    Summary s;
    if (count == 0) return s;
    s.mean = sum / count;
    if (count > 1) {
      const double var = std::max(0.0, (sum_sq - count * s.mean * s.mean) / (count - 1));
      s.std_error = std::sqrt(var / count);
    }
    return s;
  }
};

}  // namespace

AggregateStats aggregate(std::span<const std::vector<IterationRecord>> trials) {
  if (trials.empty()) throw Error("aggregate: no trials");
  std::size_t depth = 0;
  for (const auto& t : trials) depth = std::max(depth, t.size());
  if (depth == 0) throw Error("aggregate: trials carry no records");

  struct Row {
    Accumulator p_err, s_hat, d1, d2, s3, c2z;
  };
  std::vector<Row> rows(depth);
  Matrix q_sum = Matrix::Zero(static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(depth));
  Eigen::MatrixXi q_count = Eigen::MatrixXi::Zero(q_sum.rows(), q_sum.cols());

  for (const auto& trial : trials) {
    for (std::size_t i = 0; i < trial.size(); ++i) {
      const auto& r = trial[i];
      if (r.k != trial.front().k + static_cast<int>(i)) throw Error("aggregate: non-consecutive iteration indices");
      auto& row = rows[i];
      row.p_err.add(r.p_err);
      row.s_hat.add(r.s_hat);
      row.d1.add(r.d1);
      row.d2.add(r.d2);
      row.s3.add(r.s3);
      row.c2z.add(r.c2z);
      // q_row[j] pairs this record with the j-th recorded iterate of the trial.
      for (std::size_t j = 0; j < r.q_row.size() && j < i; ++j) {
        const auto a = static_cast<Eigen::Index>(i);
        const auto b = static_cast<Eigen::Index>(j);
        q_sum(a, b) += r.q_row[j];
        q_count(a, b) += 1;
      }
    }
  }

  AggregateStats out;
  out.trials = static_cast<int>(trials.size());
  const int first_k = trials.front().empty() ? 1 : trials.front().front().k;
  for (std::size_t i = 0; i < depth; ++i) {
    IterationSummary s;
    s.k = first_k + static_cast<int>(i);
    s.count = rows[i].p_err.count;
    s.p_err = rows[i].p_err.summary();
    s.s_hat = rows[i].s_hat.summary();
    s.d1 = rows[i].d1.summary();
    s.d2 = rows[i].d2.summary();
    s.s3 = rows[i].s3.summary();
    s.c2z = rows[i].c2z.summary();
    out.per_iteration.push_back(s);
  }

  out.q_matrix = Matrix::Identity(q_sum.rows(), q_sum.cols());
  for (Eigen::Index a = 0; a < q_sum.rows(); ++a) {
    for (Eigen::Index b = 0; b < a; ++b) {
      const double v = q_count(a, b) > 0 ? q_sum(a, b) / q_count(a, b) : std::nan("");
      out.q_matrix(a, b) = v;
      out.q_matrix(b, a) = v;
    }
  }
  return out;
}

}  // namespace clup
