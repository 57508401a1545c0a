#include <gtest/gtest.h>

#include <cstring>
#include <vector>

#include "rfmt/models/nmt.h"
#include "rfmt/simd/kernels.h"
#include "rfmt/tensor/graph.h"
#include "rfmt/util/rng.h"

namespace rfmt {
namespace {

using simd::Backend;
using simd::KernelTable;

std::vector<const KernelTable*> vector_tables() {
  std::vector<const KernelTable*> out;
  if (const KernelTable* t = simd::avx2_kernels()) out.push_back(t);
  if (const KernelTable* t = simd::neon_kernels()) out.push_back(t);
  return out;
}

std::vector<double> random_values(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal() * 3.0;
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TEST(Simd, ScalarTableIsAlwaysAvailable) {
  EXPECT_EQ(simd::scalar_kernels().backend, Backend::kScalar);
  EXPECT_TRUE(simd::set_backend(Backend::kScalar));
  EXPECT_EQ(simd::kernels().backend, Backend::kScalar);
}

TEST(Simd, VectorKernelsMatchScalarBitForBit) {
  const KernelTable& ref = simd::scalar_kernels();
  const auto tables = vector_tables();
  if (tables.empty()) GTEST_SKIP() << "no vector backend on this machine";
  Rng rng(11);
  for (const KernelTable* t : tables) {
    // Lengths cover empty, sub-lane, exact multiples and ragged tails.
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 129u}) {
      const std::vector<double> x = random_values(rng, n);
      const std::vector<double> y = random_values(rng, n);
      const double a = rng.normal();

      std::vector<double> r1 = y, r2 = y;
      ref.axpy(a, x.data(), r1.data(), n);
      t->axpy(a, x.data(), r2.data(), n);
      EXPECT_TRUE(bit_equal(r1, r2)) << "axpy n=" << n;

      std::vector<double> o1(n), o2(n);
      ref.add(x.data(), y.data(), o1.data(), n);
      t->add(x.data(), y.data(), o2.data(), n);
      EXPECT_TRUE(bit_equal(o1, o2)) << "add n=" << n;

      ref.mul(x.data(), y.data(), o1.data(), n);
      t->mul(x.data(), y.data(), o2.data(), n);
      EXPECT_TRUE(bit_equal(o1, o2)) << "mul n=" << n;

      ref.scale(x.data(), a, o1.data(), n);
      t->scale(x.data(), a, o2.data(), n);
      EXPECT_TRUE(bit_equal(o1, o2)) << "scale n=" << n;

      r1 = y;
      r2 = y;
      ref.accumulate(x.data(), r1.data(), n);
      t->accumulate(x.data(), r2.data(), n);
      EXPECT_TRUE(bit_equal(r1, r2)) << "accumulate n=" << n;

      if (n > 0) {
        const double m1 = ref.max(x.data(), n);
        const double m2 = t->max(x.data(), n);
        EXPECT_EQ(std::memcmp(&m1, &m2, sizeof m1), 0) << "max n=" << n;
      }
    }
  }
}

TEST(Simd, ModelForwardIdenticalAcrossBackends) {
  const auto tables = vector_tables();
  if (tables.empty()) GTEST_SKIP() << "no vector backend on this machine";
  NmtModel model(TransformerDims{16, 2, 32, 1, 1, 0.0}, 20, 5);
  const std::vector<std::vector<TokenId>> src = {{5, 6, 7, 8}, {9, 10}};
  const std::vector<std::vector<TokenId>> tgt = {{11, 12, 13}, {14}};
  auto run = [&] {
    Graph g(Mode::kEval);
    return g.value(model.forward(g, src, tgt)).data;
  };
  ASSERT_TRUE(simd::set_backend(Backend::kScalar));
  const std::vector<double> scalar = run();
  for (const KernelTable* t : tables) {
    ASSERT_TRUE(simd::set_backend(t->backend));
    EXPECT_TRUE(bit_equal(scalar, run())) << simd::backend_name(t->backend);
  }
}

}  // namespace
}  // namespace rfmt
