#include "slim/innersolve.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace slim;

namespace {

struct Stack {
  std::vector<Matrix> blocks;
  BlockStack view() const {
    std::vector<const Matrix*> p;
    for (const auto& b : blocks) p.push_back(&b);
    return BlockStack(p);
  }
};

Stack random_stack(int count, int rows, int cols, std::uint64_t seed) {
  Stack s;
  for (int i = 0; i < count; ++i) s.blocks.push_back(oracle::gaussian(rows, cols, seed + i));
  return s;
}

}  // namespace

TEST(LsqrDamped, ZeroRhsGivesZeroStep) {
  Stack s = random_stack(2, 3, 4, 1);
  auto res = lsqr_damped(s.view(), Vector::Zero(3), 1.0, Regularizer::identity());
  EXPECT_EQ(res.step, Vector::Zero(4));
  EXPECT_EQ(res.iterations, 0u);
  EXPECT_TRUE(res.converged);
}

TEST(LsqrDamped, ScalarCase) {
  Stack s;
  s.blocks.push_back(Matrix::Constant(1, 1, 2.0));
  Vector r = Vector::Constant(1, -4.0);
  auto res = lsqr_damped(s.view(), r, 1.0, Regularizer::identity());
  EXPECT_NEAR(res.step(0), -1.6, 1e-15);
  EXPECT_NEAR(direct_step(s.view(), r, 1.0, Regularizer::identity())(0), -1.6, 1e-15);
}

TEST(LsqrDamped, ThreeBlockStackMatchesDenseOracle) {
  Stack s = random_stack(3, 4, 6, 10);
  Vector r = oracle::gaussian_vector(4, 77);
  auto res = lsqr_damped(s.view(), r, 0.5, Regularizer::identity());
  Vector ref = oracle::damped_step(s.blocks, r, 0.5, Matrix::Identity(6, 6));
  EXPECT_LE(oracle::rel(res.step, ref), 1e-10);
  EXPECT_TRUE(res.converged);
  EXPECT_LE(res.rel_normal_residual, 1e-9);
  EXPECT_LE(oracle::rel(direct_step(s.view(), r, 0.5, Regularizer::identity()), ref), 1e-10);
}

TEST(LsqrDamped, GeneralRegularizerMatchesOracle) {
  Stack s = random_stack(2, 5, 7, 30);
  Vector r = oracle::gaussian_vector(5, 31);
  Matrix l = Matrix::Identity(7, 7) + 0.3 * oracle::gaussian(7, 7, 32);
  Regularizer reg = Regularizer::from_factor(l);
  for (double alpha : {0.1, 1.0, 10.0}) {
    Vector ref = oracle::damped_step(s.blocks, r, alpha, l.transpose() * l);
    EXPECT_LE(oracle::rel(lsqr_damped(s.view(), r, alpha, reg).step, ref), 1e-9) << alpha;
    EXPECT_LE(oracle::rel(direct_step(s.view(), r, alpha, reg), ref), 1e-10) << alpha;
  }
}

TEST(Regularizer, FromGramCachesFactor) {
  Matrix l = Matrix::Identity(4, 4) + 0.2 * oracle::gaussian(4, 4, 3);
  Matrix c = l.transpose() * l;
  Regularizer reg = Regularizer::from_gram(c);
  EXPECT_FALSE(reg.is_identity());
  EXPECT_LE((reg.factor().transpose() * reg.factor() - c).norm(), 1e-12 * c.norm());
  Vector x = oracle::gaussian_vector(4, 4);
  EXPECT_LE(oracle::rel(reg.apply_gram(x), c * x), 1e-12);
  EXPECT_LE((reg.gram(4) - c).norm(), 1e-12 * c.norm());
}

TEST(Regularizer, IdentityAndValidation) {
  Regularizer id = Regularizer::identity();
  EXPECT_TRUE(id.is_identity());
  EXPECT_EQ(id.condition_estimate(), 1.0);
  EXPECT_EQ(id.gram(3), Matrix::Identity(3, 3));
  EXPECT_THROW(Regularizer::from_factor(Matrix::Zero(2, 3)), InvalidArgument);
  Matrix singular = Matrix::Zero(3, 3);
  singular(0, 0) = 1.0;
  EXPECT_THROW(Regularizer::from_factor(singular), InvalidArgument);
}

TEST(DirectStep, IdentityBlockHalvesResidual) {
  Stack s;
  s.blocks.push_back(Matrix::Identity(3, 3));
  Vector e1 = Vector::Unit(3, 0);
  Vector step = direct_step(s.view(), e1, 1.0, Regularizer::identity());
  EXPECT_LE((step - 0.5 * e1).norm(), 1e-15);
}

TEST(DirectStep, LargeAlphaApproachesStackLeastSquares) {
  Stack s = random_stack(2, 5, 4, 50);
  Vector r = oracle::gaussian_vector(5, 51);
  Matrix m = oracle::vstack(s.blocks);
  Vector rhs = Vector::Zero(m.rows());
  rhs.tail(5) = r;
  Vector ref = oracle::svd_pinv(m) * rhs;
  Vector step = direct_step(s.view(), r, 1e12, Regularizer::identity());
  EXPECT_LE(oracle::rel(step, ref), 1e-4);
}

TEST(InnerSolve, OracleEquivalenceOnRandomInstances) {
  for (int t = 0; t < 40; ++t) {
    const int count = 1 + t % 4;
    Stack s = random_stack(count, 2 + t % 5, 3 + t % 9, 1000 + 17 * t);
    Vector r = oracle::gaussian_vector(s.blocks.back().rows(), 5000 + t);
    const double alpha = std::pow(10.0, -2 + t % 5);
    LsqrOptions opts;
    auto res = lsqr_damped(s.view(), r, alpha, Regularizer::identity(), opts);
    Vector d = direct_step(s.view(), r, alpha, Regularizer::identity());
    EXPECT_LE(oracle::rel(res.step, d), 10 * opts.rel_tolerance) << "instance " << t;
  }
}

TEST(LsqrMinNorm, MatchesPseudoinverseOnRankDeficientBlock) {
  // 3 x 5 of rank 2.
  Matrix a = oracle::gaussian(3, 2, 8) * oracle::gaussian(2, 5, 9);
  Vector rhs = oracle::gaussian_vector(3, 10);
  auto res = lsqr_min_norm(a, rhs);
  Vector ref = oracle::svd_pinv(a, 1e-10) * rhs;
  EXPECT_LE(oracle::rel(res.step, ref), 1e-10);
  // No component in the null space of a.
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  Matrix null = svd.matrixV().rightCols(3);
  EXPECT_LE((null.transpose() * res.step).norm(), 1e-10 * res.step.norm());
}

TEST(LsqrMinNorm, UnderdeterminedMinimumNorm) {
  Matrix a = oracle::gaussian(4, 9, 20);
  Vector rhs = oracle::gaussian_vector(4, 21);
  auto res = lsqr_min_norm(a, rhs);
  EXPECT_LE(oracle::rel(res.step, oracle::svd_pinv(a) * rhs), 1e-10);
  EXPECT_LE((a * res.step - rhs).norm(), 1e-10 * rhs.norm());
}

TEST(Lsqr, ResidualHistoryIsMonotone) {
  Stack s = random_stack(3, 8, 20, 70);
  Vector r = oracle::gaussian_vector(8, 71);
  LsqrOptions opts;
  opts.track_history = true;
  auto res = lsqr_damped(s.view(), r, 3.0, Regularizer::identity(), opts);
  ASSERT_GE(res.residual_history.size(), 2u);
  for (std::size_t i = 1; i < res.residual_history.size(); ++i) {
    EXPECT_LE(res.residual_history[i], res.residual_history[i - 1] * (1 + 1e-12));
  }
}

TEST(Lsqr, IterationCapReportsNonConvergence) {
  Stack s = random_stack(2, 10, 30, 90);
  Vector r = oracle::gaussian_vector(10, 91);
  LsqrOptions opts;
  opts.max_iterations = 2;
  auto res = lsqr_damped(s.view(), r, 100.0, Regularizer::identity(), opts);
  EXPECT_FALSE(res.converged);
  EXPECT_EQ(res.iterations, 2u);
  EXPECT_TRUE(res.step.allFinite());
}

TEST(Lsqr, WarmStartReachesSameSolution) {
  Stack s = random_stack(2, 4, 6, 40);
  Vector r = oracle::gaussian_vector(4, 41);
  Vector ref = oracle::damped_step(s.blocks, r, 2.0, Matrix::Identity(6, 6));
  LsqrOptions opts;
  opts.min_norm_mode = false;
  opts.initial_guess = ref + 0.1 * oracle::gaussian_vector(6, 42);
  auto res = lsqr_damped(s.view(), r, 2.0, Regularizer::identity(), opts);
  EXPECT_LE(oracle::rel(res.step, ref), 1e-9);
}

TEST(BlockStack, ProductsMatchDense) {
  Stack s = random_stack(3, 2, 4, 60);
  BlockStack v = s.view();
  Matrix m = oracle::vstack(s.blocks);
  Vector x = oracle::gaussian_vector(4, 61);
  Vector u = oracle::gaussian_vector(6, 62);
  EXPECT_LE(oracle::rel(v.apply(x), m * x), 1e-14);
  EXPECT_LE(oracle::rel(v.apply_adjoint(u), m.transpose() * u), 1e-14);
  EXPECT_LE((v.gram() - oracle::naive_gram(m)).norm(), 1e-13 * m.squaredNorm());
  EXPECT_EQ(v.current_rows(), 2u);
  const Vector tail = u.tail(2);
  EXPECT_LE(oracle::rel(v.current_adjoint(tail), s.blocks.back().transpose() * tail), 1e-14);
}

TEST(BlockStack, SparseBlocksMatchDense) {
  Stack s = random_stack(3, 2, 4, 63);
  std::vector<SampleBlock> blocks(3);
  for (std::size_t i = 0; i < 3; ++i) {
    if (i % 2 == 0) {
      blocks[i].sparse = s.blocks[i].sparseView();
    } else {
      blocks[i].a = s.blocks[i];
    }
  }
  std::vector<const SampleBlock*> ptrs;
  for (const auto& b : blocks) ptrs.push_back(&b);
  BlockStack v(ptrs);
  Matrix m = oracle::vstack(s.blocks);
  Vector x = oracle::gaussian_vector(4, 64);
  Vector u = oracle::gaussian_vector(6, 65);
  EXPECT_EQ(v.rows(), 6u);
  EXPECT_LE(oracle::rel(v.apply(x), m * x), 1e-14);
  EXPECT_LE(oracle::rel(v.apply_adjoint(u), m.transpose() * u), 1e-14);
  EXPECT_LE((v.gram() - oracle::naive_gram(m)).norm(), 1e-13 * m.squaredNorm());
}
