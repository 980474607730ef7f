#include "clup/model.hpp"

#include <cmath>
#include <string>

#include "clup/error.hpp"
#include "clup/rng.hpp"

namespace clup {

namespace {
constexpr std::uint64_t kMatrixStream = 0x41;  // 'A'
constexpr std::uint64_t kNoiseStream = 0x76;   // 'v'
}  // namespace

double snr_db_to_sigma(double snr_db) {
  if (!std::isfinite(snr_db)) throw Error("snr_db must be finite");
  return std::pow(10.0, -snr_db / 20.0);
}

int rows_for(int n, double alpha) {
  const auto m = static_cast<long>(std::lround(alpha * n));
  return static_cast<int>(std::max(1L, m));
}

ProblemInstance generate_instance(int n, double alpha, double sigma, std::uint64_t seed) {
  if (n < 1) throw Error("n must be positive, got " + std::to_string(n));
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error("alpha must be positive");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error("sigma must be positive");

  ProblemInstance inst;
  inst.n = n;
  inst.alpha = alpha;
  inst.sigma = sigma;
  inst.m = rows_for(n, alpha);

  const rng::CounterStream a_stream(rng::mix(seed, kMatrixStream));
  const rng::CounterStream v_stream(rng::mix(seed, kNoiseStream));

  inst.A.resize(inst.m, n);
  double* a = inst.A.data();
  const auto entries = static_cast<std::uint64_t>(inst.m) * static_cast<std::uint64_t>(n);
  for (std::uint64_t idx = 0; idx < entries; ++idx) a[idx] = a_stream.normal(idx);

  inst.v.resize(inst.m);
  for (int i = 0; i < inst.m; ++i) inst.v[i] = v_stream.normal(static_cast<std::uint64_t>(i));

  inst.x_sol = Vector::Constant(n, inst.box_bound());
  inst.y = inst.A * inst.x_sol + sigma * inst.v;
  return inst;
}

}  // namespace clup
