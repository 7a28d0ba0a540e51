#include <Eigen/Dense>
#include <complex>
#include <random>
#include <vector>

#include "doctest.h"
#include "fluxmod/simd/kernels.hpp"
#include "fluxmod/transmon.hpp"

using namespace fluxmod;
using namespace fluxmod::simd;
using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;

namespace {

std::vector<cplx> random_stack(int dim, int batch, std::mt19937_64& gen) {
  std::normal_distribution<double> n;
  std::vector<cplx> v(static_cast<std::size_t>(dim) * dim * batch);
  for (auto& x : v) x = {n(gen), n(gen)};
  return v;
}

std::vector<SparseTerm> random_terms(int dim, int count, std::mt19937_64& gen) {
  std::uniform_int_distribution<int> idx(0, dim - 1);
  std::normal_distribution<double> n;
  std::vector<SparseTerm> t;
  for (int i = 0; i < count; ++i) t.push_back({idx(gen), idx(gen), {n(gen), n(gen)}});
  return t;
}

Mat dense(const std::vector<SparseTerm>& terms, int dim) {
  Mat m = Mat::Zero(dim, dim);
  for (const auto& t : terms) m(t.row, t.col) += t.value;
  return m;
}

Mat slice(const std::vector<cplx>& v, int dim, int batch, int b) {
  Mat m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = v[(static_cast<std::size_t>(i) * dim + j) * batch + b];
  return m;
}

double max_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("isa selection") {
  const Isa before = active_isa();
  CHECK(set_active_isa(Isa::scalar) == before);
  CHECK(active_isa() == Isa::scalar);
  set_active_isa(Isa::avx2);
  CHECK(active_isa() == (avx2::compiled() && detected_isa() == Isa::avx2 ? Isa::avx2 : Isa::scalar));
  set_active_isa(before);
  CHECK(std::string(isa_name(Isa::scalar)) == "scalar");
  CHECK(std::string(isa_name(Isa::avx2)) == "avx2");
}

TEST_CASE("commutator and sandwich match dense algebra") {
  std::mt19937_64 gen(1);
  for (int batch : {1, 3, 4, 16, 19}) {
    const int dim = 9;
    const auto h = random_terms(dim, 14, gen);
    const auto l = random_terms(dim, 3, gen);
    const auto in = random_stack(dim, batch, gen);
    std::vector<cplx> comm(in.size()), sand(in.size(), cplx{});
    scalar::commutator_batch(h, dim, batch, in, comm);
    scalar::sandwich_batch(l, 0.7, dim, batch, in, sand);
    const Mat H = dense(h, dim), L = dense(l, dim);
    for (int b = 0; b < batch; ++b) {
      const Mat r = slice(in, dim, batch, b);
      const Mat c = cplx(0, -1) * (H * r - r * H);
      CHECK((slice(comm, dim, batch, b) - c).norm() < 1e-12 * c.norm());
      const Mat s = 0.7 * L * r * L.adjoint();
      CHECK((slice(sand, dim, batch, b) - s).norm() < 1e-12 * (1.0 + s.norm()));
    }
  }
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  if (!avx2::compiled() || detected_isa() != Isa::avx2) {
    MESSAGE("avx2 not available; skipping equivalence");
    return;
  }
  std::mt19937_64 gen(2);
  for (int batch : {1, 2, 5, 8, 16, 33}) {
    const int dim = 9;
    const auto h = random_terms(dim, 20, gen);
    const auto l = random_terms(dim, 4, gen);
    const auto in = random_stack(dim, batch, gen);
    std::vector<cplx> a(in.size()), b(in.size());
    scalar::commutator_batch(h, dim, batch, in, a);
    avx2::commutator_batch(h, dim, batch, in, b);
    CHECK(max_diff(a, b) < 1e-12);

    auto sa = random_stack(dim, batch, gen);
    auto sb = sa;
    scalar::sandwich_batch(l, 1.3, dim, batch, in, sa);
    avx2::sandwich_batch(l, 1.3, dim, batch, in, sb);
    CHECK(max_diff(sa, sb) < 1e-12);

    std::vector<double> w(dim * dim);
    std::normal_distribution<double> n;
    for (auto& x : w) x = n(gen);
    auto ea = random_stack(dim, batch, gen);
    auto eb = ea;
    scalar::elementwise_batch(w, dim, batch, in, ea);
    avx2::elementwise_batch(w, dim, batch, in, eb);
    CHECK(max_diff(ea, eb) < 1e-13);
  }

  const auto p = transmon::calibrate({5.1e9, 4.1e9, 0.2e9});
  const TransduceParams tp{p.e_c, p.e_j1 * p.e_j1 + p.e_j2 * p.e_j2, 2.0 * p.e_j1 * p.e_j2,
                           transmon::kXiLimit};
  for (std::size_t n : {1u, 3u, 4u, 7u, 1000u, 1027u}) {
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    std::vector<double> phi(n), wa(n), wb(n);
    for (auto& x : phi) x = u(gen);
    CHECK(scalar::frequency_batch(tp, phi, wa) == avx2::frequency_batch(tp, phi, wb));
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(wa[i] == doctest::Approx(wb[i]).epsilon(1e-13));
      CHECK(wa[i] == doctest::Approx(transmon::frequency(p, phi[i])).epsilon(1e-13));
    }
  }
}

TEST_CASE("frequency batch flags the first out-of-range flux") {
  const transmon::TransmonParams p{1.0, 50.0, 49.0};
  const TransduceParams tp{p.e_c, p.e_j1 * p.e_j1 + p.e_j2 * p.e_j2, 2.0 * p.e_j1 * p.e_j2,
                           transmon::kXiLimit};
  std::vector<double> phi{0.0, 0.1, 0.5, 0.49, 0.0}, w(5);
  for (Isa isa : {Isa::scalar, Isa::avx2}) {
    const Isa prev = set_active_isa(isa);
    CHECK(frequency_batch(tp, phi, w) == 2);
    set_active_isa(prev);
  }
  std::vector<double> ok{0.0, 0.1}, w2(2);
  CHECK(frequency_batch(tp, ok, w2) == -1);
}
