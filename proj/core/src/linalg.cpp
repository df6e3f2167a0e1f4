#include "qsd/linalg.hpp"

#include <algorithm>
#include <thread>

namespace qsd {

double min_eigenvalue(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitize(a),
                                            Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

namespace {

CMatrix psd_eig_map(const CMatrix& a, double rel_floor, bool invert) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitize(a));
  const RVector& w = es.eigenvalues();
  const double floor = rel_floor * std::max(w.maxCoeff(), 0.0);
  RVector mapped = RVector::Zero(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] > floor && w[i] > 0.0) {
      mapped[i] = invert ? 1.0 / std::sqrt(w[i]) : std::sqrt(w[i]);
    }
  }
  return es.eigenvectors() * mapped.asDiagonal() *
         es.eigenvectors().adjoint();
}

}  // namespace

CMatrix psd_sqrt(const CMatrix& a, double rel_floor) {
  return psd_eig_map(a, rel_floor, false);
}

CMatrix psd_inv_sqrt(const CMatrix& a, double rel_floor) {
  return psd_eig_map(a, rel_floor, true);
}

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(n, 1));
  if (workers <= 1 || n == 0) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace qsd
