#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

namespace blowup {
namespace {

using namespace blowup::testing;

TEST(Dirichlet, UnitIntervalApproachesPiSquared) {
  auto g = line(257);
  auto op = laplacian(g);
  const EigenPair p = principal_dirichlet(*op, g->all_nodes());
  EXPECT_NEAR(p.sigma, kPi * kPi, 5e-3);
  EXPECT_LE(p.residual, 1e-10);
  EXPECT_DOUBLE_EQ(p.phi.maxCoeff(), 1.0);
  EXPECT_LT((p.phi - sine(*g)).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Dirichlet, UnitSquareApproachesTwoPiSquared) {
  auto g = square(65);
  auto op = laplacian(g);
  const EigenPair p = principal_dirichlet(*op, g->all_nodes());
  EXPECT_NEAR(p.sigma, 2.0 * kPi * kPi, 5e-2);
  for (std::size_t i = 0; i < g->size(); ++i) {
    if (g->is_boundary(i)) {
      EXPECT_EQ(p.phi[static_cast<Index>(i)], 0.0);
    } else {
      EXPECT_GT(p.phi[static_cast<Index>(i)], 0.0);
    }
  }
}

TEST(Dirichlet, HomogeneousInDiffusion) {
  auto g = line(129);
  const double s1 = principal_dirichlet(*laplacian(g), g->all_nodes()).sigma;
  const double s2 = principal_dirichlet(*laplacian(g, 2.0), g->all_nodes()).sigma;
  EXPECT_NEAR(s2, 2.0 * s1, 1e-9 * s1);
}

TEST(Dirichlet, ShrinkingRegionIncreasesEigenvalue) {
  auto g = square(33);
  auto op = laplacian(g);
  double prev = 0.0;
  for (double m : {0.05, 0.15, 0.25}) {
    const WeightField w = sign_pattern(*g, rect(m, 1.0 - m, m, 1.0 - m));
    const double s = principal_dirichlet(*op, w.plus).sigma;
    EXPECT_GT(s, prev);
    prev = s;
  }
}

TEST(Dirichlet, ErrorsOnEmptyRegion) {
  auto g = line(17);
  auto op = laplacian(g);
  EXPECT_THROW(principal_dirichlet(*op, Mask(g->size(), 0)), PreconditionViolation);
  EXPECT_THROW(principal_dirichlet(*op, Mask(3, 1)), InvalidArgument);
}

TEST(Weighted, ConstantWeightScales) {
  auto g = line(129);
  auto op = laplacian(g);
  const WeightField region = sign_pattern(*g, interval(0.3, 0.7));
  const double s = principal_dirichlet(*op, region.plus).sigma;
  for (double c : {1.0, 2.0, 10.0}) {
    const WeightField w = sign_pattern(*g, interval(0.3, 0.7), c, -1.0);
    const EigenPair p = principal_weighted(*op, w, w.plus);
    EXPECT_NEAR(p.sigma, s / c, 1e-8 * s / c) << c;
    EXPECT_TRUE(p.weighted);
  }
}

TEST(Weighted, RayleighBracket) {
  for (int nodes : {65, 129}) {
    auto g = line(nodes);
    auto op = laplacian(g);
    std::vector<double> a(g->size());
    for (std::size_t i = 0; i < g->size(); ++i) {
      const double x = g->coord(i)[0];
      a[i] = x * (1.0 - x);
    }
    const WeightField w = table_weight(*g, a);
    const EigenPair p = principal_weighted(*op, w, w.plus);
    const double s = principal_dirichlet(*op, w.plus).sigma;
    double amax = 0.0, amin = 1.0;
    for (std::size_t i = 1; i + 1 < g->size(); ++i) {
      amax = std::max(amax, a[i]);
      amin = std::min(amin, a[i]);
    }
    EXPECT_GE(p.sigma, s / amax);
    EXPECT_LE(p.sigma, s / amin);
  }
}

TEST(Weighted, VanishingWeightIsIllPosed) {
  auto g = line(33);
  auto op = laplacian(g);
  std::vector<double> a(g->size(), 1.0);
  a[16] = 0.0;
  const WeightField w = table_weight(*g, a);
  EXPECT_THROW(principal_weighted(*op, w, g->all_nodes()), PreconditionViolation);
}

TEST(Operator, MatchesDirichletForDirichletBoundary) {
  auto g = line(65);
  auto op = laplacian(g);
  const EigenPair a = principal_operator(*op);
  const EigenPair b = principal_dirichlet(*op, g->all_nodes());
  EXPECT_NEAR(a.sigma, b.sigma, 1e-9 * b.sigma);
  EXPECT_LT((a.phi - b.phi).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Operator, RobinLowersEigenvalue) {
  DomainSpec s;
  s.extents[0] = {0.0, 1.0};
  s.nodes = 129;
  s.tagging.robin_faces = {Face::left};
  auto g = make_grid(s);
  auto a = make_diffusion(*g, DiffusionPreset::identity);
  const DiscreteOperator op = assemble(g, a, make_boundary(*g, 0.0));
  // Neumann at 0, Dirichlet at 1: (pi/2)^2
  const EigenPair p = principal_operator(op);
  EXPECT_NEAR(p.sigma, kPi * kPi / 4.0, 2e-2);
  EXPECT_DOUBLE_EQ(p.phi[0], 1.0);
}

TEST(Flux, SineIsNegativeAtBothEnds) {
  auto g = line(257);
  auto op = laplacian(g);
  const BoundaryFlux f = boundary_flux(*op, sine(*g), g->all_nodes());
  ASSERT_EQ(f.nodes.size(), 2u);
  for (double v : f.flux) EXPECT_NEAR(v, -kPi, 1e-3);
  EXPECT_TRUE(all_negative(f));
}

TEST(Flux, ZeroIsDegenerate) {
  auto g = line(33);
  auto op = laplacian(g);
  const BoundaryFlux f = boundary_flux(*op, Vector::Zero(33), g->all_nodes());
  for (double v : f.flux) EXPECT_EQ(v, 0.0);
  EXPECT_FALSE(all_negative(f));
}

TEST(Flux, EigenfunctionOnSquareRegionIsHopfNegative) {
  auto g = square(65);
  auto op = laplacian(g);
  const WeightField w = sign_pattern(*g, rect(0.2, 0.8, 0.3, 0.7));
  const EigenPair p = principal_weighted(*op, w, w.plus);
  const BoundaryFlux f = boundary_flux(*op, p.phi, w.plus);
  EXPECT_GT(f.nodes.size(), 40u);
  EXPECT_TRUE(all_negative(f));
  EXPECT_LT(flux_integral(f, Vector::Ones(static_cast<Index>(g->size()))), 0.0);
}

}  // namespace
}  // namespace blowup
