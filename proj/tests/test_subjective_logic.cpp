#include <cmath>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tmnr/subjective_logic.hpp"

using namespace tmnr;
using namespace tmnr::testing;

namespace {

// Reduced Dempster rule written out element by element.
OpinionD combine_oracle(const OpinionD& a, const OpinionD& b) {
  const Index c = a.classes();
  double con = 0;
  for (Index i = 0; i < c; ++i) {
    for (Index j = 0; j < c; ++j) {
      if (i != j) con += a.belief(i) * b.belief(j);
    }
  }
  OpinionD out;
  out.belief.resize(c);
  for (Index i = 0; i < c; ++i) {
    out.belief(i) = (a.belief(i) * b.belief(i) + a.belief(i) * b.uncertainty + b.belief(i) * a.uncertainty) / (1 - con);
  }
  out.uncertainty = a.uncertainty * b.uncertainty / (1 - con);
  return out;
}

double max_diff(const OpinionD& a, const OpinionD& b) {
  return std::max((a.belief - b.belief).cwiseAbs().maxCoeff(), std::abs(a.uncertainty - b.uncertainty));
}

}  // namespace

TEST(EvidenceToOpinion, Basic) {
  const Vector e = (Vector(3) << 2.0, 0.0, 1.0).finished();
  const auto o = evidence_to_opinion(e);
  EXPECT_NEAR(o.uncertainty, 3.0 / 6.0, 1e-15);
  EXPECT_NEAR(o.belief(0), 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(o.belief.sum() + o.uncertainty, 1.0, 1e-15);
}

TEST(EvidenceToOpinion, ZeroEvidenceIsVacuous) {
  const auto o = evidence_to_opinion(Vector::Zero(4));
  EXPECT_DOUBLE_EQ(o.uncertainty, 1.0);
  EXPECT_EQ(o.belief, Vector::Zero(4));
}

TEST(OpinionToDirichlet, RoundTrip) {
  Gen g(5);
  for (int i = 0; i < 100; ++i) {
    const Vector e = uniform_vector(g, 4, 0.0, 20.0);
    const Vector alpha = opinion_to_dirichlet(evidence_to_opinion(e));
    EXPECT_LT((alpha - (e.array() + 1.0).matrix()).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(opinion_to_dirichlet(OpinionD{Vector::Constant(2, 0.5), 0.0}), std::invalid_argument);
}

TEST(ExpectedProbabilities, SumToOne) {
  const Vector alpha = (Vector(3) << 1.0, 2.0, 5.0).finished();
  const Vector p = expected_probabilities(alpha);
  EXPECT_NEAR(p.sum(), 1.0, 1e-15);
  EXPECT_NEAR(p(2), 5.0 / 8.0, 1e-15);
}

TEST(Combine, MatchesElementwiseOracle) {
  Gen g(6);
  for (int i = 0; i < 1000; ++i) {
    const Index c = 2 + i % 5;
    const auto a = random_opinion(g, c);
    const auto b = random_opinion(g, c);
    EXPECT_LT(max_diff(combine(a, b), combine_oracle(a, b)), 1e-13);
  }
}

TEST(Combine, HandExample) {
  // b1 = [0.6, 0.2], u1 = 0.2; b2 = [0.3, 0.3], u2 = 0.4
  // Con = 0.6*0.3 + 0.2*0.3 = 0.24
  const OpinionD a{(Vector(2) << 0.6, 0.2).finished(), 0.2};
  const OpinionD b{(Vector(2) << 0.3, 0.3).finished(), 0.4};
  const auto f = combine(a, b);
  EXPECT_NEAR(f.belief(0), (0.18 + 0.24 + 0.06) / 0.76, 1e-15);
  EXPECT_NEAR(f.belief(1), (0.06 + 0.08 + 0.06) / 0.76, 1e-15);
  EXPECT_NEAR(f.uncertainty, 0.08 / 0.76, 1e-15);
}

TEST(Combine, CommutativeNormalizedVacuousIdentity) {
  Gen g(7);
  for (int i = 0; i < 2000; ++i) {
    const Index c = 2 + i % 4;
    const auto a = random_opinion(g, c);
    const auto b = random_opinion(g, c);
    const auto ab = combine(a, b);
    EXPECT_LT(max_diff(ab, combine(b, a)), 1e-12);
    EXPECT_NEAR(ab.belief.sum() + ab.uncertainty, 1.0, 1e-12);
    EXPECT_GE(ab.belief.minCoeff(), 0.0);
    EXPECT_LT(max_diff(combine(a, OpinionD::vacuous(c)), a), 1e-12);
  }
}

TEST(Combine, UncertaintyNeverIncreasesWithoutConflict) {
  Gen g(8);
  for (int i = 0; i < 500; ++i) {
    const auto a = random_opinion(g, 3);
    const auto b = random_opinion(g, 3);
    if (conflict(a, b) == 0.0) continue;
    const auto f = combine(a, b);
    EXPECT_LE(f.uncertainty, std::max(a.uncertainty, b.uncertainty) + 1e-12);
  }
}

TEST(Combine, TotalConflictThrows) {
  const OpinionD a{(Vector(2) << 1.0, 0.0).finished(), 0.0};
  const OpinionD b{(Vector(2) << 0.0, 1.0).finished(), 0.0};
  EXPECT_THROW(combine(a, b), TotalConflictError);
  EXPECT_THROW(combine(a, OpinionD::vacuous(3)), std::invalid_argument);
}

TEST(Combine, ManyIsLeftFold) {
  Gen g(9);
  std::vector<OpinionD> ops;
  for (int i = 0; i < 4; ++i) ops.push_back(random_opinion(g, 3));
  const auto folded = combine(combine(combine(ops[0], ops[1]), ops[2]), ops[3]);
  EXPECT_LT(max_diff(combine<double>(ops), folded), 1e-15);
  EXPECT_LT(max_diff(combine<double>(std::span<const OpinionD>(ops.data(), 1)), ops[0]), 0.0 + 1e-300);
  EXPECT_THROW(combine<double>(std::span<const OpinionD>{}), std::invalid_argument);
}

// Associativity is not guaranteed by the rule; measure it and keep the
// number visible in the test log.
TEST(Combine, AssociativityDeviationIsMeasured) {
  Gen g(10);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const Index c = 2 + i % 4;
    const auto a = random_opinion(g, c);
    const auto b = random_opinion(g, c);
    const auto d = random_opinion(g, c);
    worst = std::max(worst, max_diff(combine(combine(a, b), d), combine(a, combine(b, d))));
  }
  RecordProperty("max_associativity_deviation", std::to_string(worst));
  std::printf("max |(a+b)+c - a+(b+c)| over 1e4 random triples: %.3e\n", worst);
  EXPECT_TRUE(std::isfinite(worst));
}

namespace {

// Scalar objective used to check the adjoints: w . belief + w_u * u.
struct Linear {
  Vector w;
  double w_u;
  double operator()(const OpinionD& o) const { return w.dot(o.belief) + w_u * o.uncertainty; }
  OpinionGradient<double> grad() const { return {w, w_u}; }
};

}  // namespace

TEST(Adjoints, EvidenceToOpinionMatchesFiniteDifferences) {
  Gen g(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector e = uniform_vector(g, 4, 0.1, 5.0);
    const Linear f{uniform_vector(g, 4, -1, 1), uniform(g, -1, 1)};
    const Vector analytic = evidence_to_opinion_adjoint(evidence_to_opinion(e), f.grad());
    for (Index i = 0; i < 4; ++i) {
      Vector ep = e, em = e;
      ep(i) += 1e-6;
      em(i) -= 1e-6;
      const double fd = (f(evidence_to_opinion(ep)) - f(evidence_to_opinion(em))) / 2e-6;
      EXPECT_NEAR(analytic(i), fd, 1e-8);
    }
  }
}

TEST(Adjoints, CombineMatchesFiniteDifferences) {
  Gen g(12);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_opinion(g, 3, 0.05);
    const auto b = random_opinion(g, 3, 0.05);
    const Linear f{uniform_vector(g, 3, -1, 1), uniform(g, -1, 1)};
    const auto fused = combine(a, b);
    const auto [ga, gb] = combine_adjoint(a, b, fused, f.grad());
    // treat belief entries and u as independent inputs
    for (Index i = 0; i <= 3; ++i) {
      auto bump = [&](OpinionD o, double d) {
        if (i < 3) o.belief(i) += d; else o.uncertainty += d;
        return o;
      };
      const double fd_a = (f(combine(bump(a, h), b)) - f(combine(bump(a, -h), b))) / (2 * h);
      const double fd_b = (f(combine(a, bump(b, h))) - f(combine(a, bump(b, -h)))) / (2 * h);
      EXPECT_NEAR(i < 3 ? ga.belief(i) : ga.uncertainty, fd_a, 1e-7);
      EXPECT_NEAR(i < 3 ? gb.belief(i) : gb.uncertainty, fd_b, 1e-7);
    }
  }
}

TEST(Adjoints, OpinionToDirichletMatchesFiniteDifferences) {
  Gen g(13);
  const double h = 1e-7;
  for (int trial = 0; trial < 20; ++trial) {
    const auto o = random_opinion(g, 3, 0.1);
    const Vector w = uniform_vector(g, 3, -1, 1);
    const auto grad = opinion_to_dirichlet_adjoint(o, w);
    for (Index i = 0; i <= 3; ++i) {
      OpinionD p = o, m = o;
      if (i < 3) {
        p.belief(i) += h;
        m.belief(i) -= h;
      } else {
        p.uncertainty += h;
        m.uncertainty -= h;
      }
      const double fd = (w.dot(opinion_to_dirichlet(p)) - w.dot(opinion_to_dirichlet(m))) / (2 * h);
      EXPECT_NEAR(i < 3 ? grad.belief(i) : grad.uncertainty, fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}
