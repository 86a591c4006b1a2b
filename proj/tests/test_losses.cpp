#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tmnr/losses.hpp"
#include "tmnr/noise_correction.hpp"
#include "tmnr/special_functions.hpp"

using namespace tmnr;
using namespace tmnr::testing;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace

TEST(Annealing, RampAndCap) {
  EXPECT_EQ(annealing_coefficient(0, 10), 0.0);
  EXPECT_EQ(annealing_coefficient(5, 10), 0.5);
  EXPECT_EQ(annealing_coefficient(10, 10), 1.0);
  EXPECT_EQ(annealing_coefficient(50, 10), 1.0);
  EXPECT_EQ(annealing_coefficient(3, 0), 1.0);
  double prev = 0;
  for (int e = 0; e < 40; ++e) {
    const double d = annealing_coefficient(e, 17);
    EXPECT_GE(d, prev);
    EXPECT_LE(d, 1.0);
    prev = d;
  }
}

TEST(HardLabel, LowestIndexOnTies) {
  EXPECT_EQ(hard_label(vec({0.2, 0.4, 0.4})), 1);
  EXPECT_EQ(hard_label(vec({1, 0})), 0);
}

TEST(AceLoss, Examples) {
  EXPECT_NEAR(ace_loss(vec({1, 1}), vec({1, 0})), 1.0, 1e-12);
  EXPECT_NEAR(ace_loss(vec({2, 1}), vec({1, 0})), 0.5, 1e-12);
  EXPECT_NEAR(ace_loss(vec({2, 2}), vec({0.5, 0.5})), 5.0 / 6.0, 1e-12);
}

TEST(KlRegularizer, Examples) {
  EXPECT_NEAR(kl_regularizer(vec({1, 1}), 0), 0.0, 1e-14);
  EXPECT_NEAR(kl_regularizer(vec({1, 1}), 1), 0.0, 1e-14);
  EXPECT_NEAR(kl_regularizer(vec({2, 1}), 1), std::log(2.0) - 0.5, 1e-12);
  EXPECT_NEAR(kl_regularizer(vec({3, 5}), 1), std::log(3.0) - 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(kl_regularizer(vec({7, 9, 1}), 0), kl_regularizer(vec({1, 9, 1}), 0), 1e-15);
  EXPECT_THROW(kl_regularizer(vec({1, 2}), 2), std::out_of_range);
}

TEST(KlRegularizer, MatchesMonteCarlo) {
  std::mt19937_64 g(30);
  for (Index c : {2, 3, 5}) {
    for (int trial = 0; trial < 2; ++trial) {
      Vector alpha_bar = uniform_vector(g, c, 1.0, 6.0);
      alpha_bar(0) = 1.0;
      const auto mc = kl_monte_carlo(alpha_bar, 100000, g);
      Vector alpha = alpha_bar;
      alpha(0) = 40.0;  // masked out by the label
      EXPECT_NEAR(kl_regularizer(alpha, 0), mc.mean, 4 * mc.stderr_) << alpha_bar.transpose();
    }
  }
}

TEST(ViewLoss, Examples) {
  const LossWeights w{0.1, 0.1, 10};
  EXPECT_EQ(view_loss(vec({2, 1}), vec({0, 1}), 0, w), ace_loss(vec({2, 1}), vec({0, 1})));
  EXPECT_NEAR(view_loss(vec({2, 1}), vec({0, 1}), 5, w), 1.5 + 0.5 * (std::log(2.0) - 0.5), 1e-12);
  EXPECT_NEAR(view_loss(vec({2, 1}), vec({0, 1}), 12, w), 1.5 + (std::log(2.0) - 0.5), 1e-12);
}

TEST(LossGradients, MatchFiniteDifferences) {
  Gen g(31);
  const LossWeights w{0.1, 0.1, 10};
  for (int trial = 0; trial < 30; ++trial) {
    const Index c = 2 + trial % 4;
    const Vector alpha = uniform_vector(g, c, 1.05, 8.0);
    const Vector y = random_simplex(g, c);
    const Index label = hard_label(y);
    const Vector ga = ace_loss_gradient(alpha, y);
    const Vector gk = kl_regularizer_gradient(alpha, label);
    const Vector gv = view_loss_gradient(alpha, y, 7, w);
    for (Index i = 0; i < c; ++i) {
      Vector p = alpha, m = alpha;
      p(i) += 1e-6;
      m(i) -= 1e-6;
      EXPECT_NEAR(ga(i), (ace_loss(p, y) - ace_loss(m, y)) / 2e-6, 1e-7);
      EXPECT_NEAR(gk(i), (kl_regularizer(p, label) - kl_regularizer(m, label)) / 2e-6, 1e-7);
      EXPECT_NEAR(gv(i), (view_loss(p, y, 7, w) - view_loss(m, y, 7, w)) / 2e-6, 1e-7);
    }
    EXPECT_EQ(gk(label), 0.0);
  }
}

TEST(DiagConstraint, Examples) {
  EXPECT_NEAR(diag_constraint(Matrix::Identity(3, 3), 0.0, 1, ClassMeans{0.0, 0.0, 0.0}), 0.0, 1e-15);
  const Matrix t = (Matrix(2, 2) << 0.5, 0.5, 0.4, 0.6).finished();
  // y_hard is the second class: (0.7 - 0.6)^2 + (0.6 - 0.5)^2
  EXPECT_NEAR(diag_constraint(t, 0.3, 1, ClassMeans{0.4, 0.9}), 0.02, 1e-15);
  EXPECT_NEAR(diag_constraint(t, 0.3, 1, ClassMeans{std::nullopt, 0.9}), 0.01, 1e-15);
}

TEST(DiagConstraint, GradientMatchesFiniteDifferences) {
  Gen g(32);
  const ClassMeans means{0.3, std::nullopt, 0.6};
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix t = random_row_stochastic(g, 3);
    const double u = uniform(g, 0.05, 0.9);
    const auto grad = diag_constraint_gradient(t, u, 2, means);
    EXPECT_NEAR(grad.uncertainty,
                (diag_constraint(t, u + 1e-6, 2, means) - diag_constraint(t, u - 1e-6, 2, means)) / 2e-6, 1e-8);
    for (Index c = 0; c < 3; ++c) {
      Matrix p = t, m = t;
      p(c, c) += 1e-6;
      m(c, c) -= 1e-6;
      EXPECT_NEAR(grad.diagonal(c), (diag_constraint(p, u, 2, means) - diag_constraint(m, u, 2, means)) / 2e-6, 1e-8);
    }
  }
}

TEST(OffdiagConstraint, Examples) {
  const Matrix t = (Matrix(2, 2) << 0.8, 0.2, 0.3, 0.7).finished();
  std::vector<Matrix> same{t, t};
  const std::vector<double> s{0.5, 0.9};
  EXPECT_EQ(offdiag_constraint(t, same, s), 0.0);

  Matrix other = t;
  other(0, 1) += 0.2;
  other(0, 0) -= 0.7;  // diagonal differences are ignored
  EXPECT_NEAR(offdiag_constraint(t, std::vector<Matrix>{other}, std::vector<double>{0.5}), 0.02, 1e-15);

  Matrix a = t, b = t;
  a(0, 1) += 0.1;
  b(1, 0) -= 0.1;
  EXPECT_NEAR(offdiag_constraint(t, std::vector<Matrix>{a, b}, std::vector<double>{1.0, 1.0}), 0.02, 1e-15);
}

TEST(ConsistencyLoss, Examples) {
  const Matrix t1 = (Matrix(2, 2) << 0.6, 0.4, 0.4, 0.6).finished();
  const Matrix t2 = (Matrix(2, 2) << 0.4, 0.6, 0.6, 0.4).finished();
  EXPECT_NEAR(consistency_loss(std::vector<Matrix>{t1, t2}), 0.4, 1e-15);
  EXPECT_EQ(consistency_loss(std::vector<Matrix>{t1, t1, t1}), 0.0);
  EXPECT_EQ(consistency_loss(std::vector<Matrix>{t2}), 0.0);
  const auto grad = consistency_loss_gradient(std::vector<Matrix>{t1, t1});
  EXPECT_EQ(grad[0], Matrix::Zero(2, 2));  // sign(0) = 0
}

TEST(MseMixedLoss, Examples) {
  EXPECT_NEAR(mse_mixed_loss(std::vector<Vector>{vec({0.5, 0.5})}, vec({1, 0})), 0.5, 1e-15);
  EXPECT_EQ(mse_mixed_loss(std::vector<Vector>{vec({0.3, 0.7}), vec({0.3, 0.7})}, vec({0.3, 0.7})), 0.0);
  // per-view losses 0.5 and 0.1
  const double half = std::sqrt(0.05);
  EXPECT_NEAR(mse_mixed_loss(std::vector<Vector>{vec({0.5, 0.5}), vec({1 - half, half})}, vec({1, 0})), 0.3, 1e-15);
}

TEST(ForwardNoisy, IdentityAndVacuousCases) {
  Gen g(33);
  std::vector<Vector> e{uniform_vector(g, 3, 0, 5), uniform_vector(g, 3, 0, 5)};
  std::vector<Matrix> ident{Matrix::Identity(3, 3), Matrix::Identity(3, 3)};
  const auto fwd = forward_noisy(e, ident);
  EXPECT_LT((fwd.fused_alpha - fuse_clean(e)).cwiseAbs().maxCoeff(), 1e-12);

  const auto single = forward_noisy(std::span<const Vector>(e.data(), 1), std::span<const Matrix>(ident.data(), 1));
  EXPECT_LT((single.fused_alpha - (e[0].array() + 1.0).matrix()).cwiseAbs().maxCoeff(), 1e-12);

  std::vector<Vector> zero{Vector::Zero(3), Vector::Zero(3)};
  EXPECT_LT((forward_noisy(zero, ident).fused_alpha - Vector::Ones(3)).cwiseAbs().maxCoeff(), 1e-15);
}

namespace {

SampleInputs random_inputs(Gen& g, Index c, Index views, bool soft_label) {
  SampleInputs in;
  for (Index v = 0; v < views; ++v) {
    in.clean_evidence.push_back(uniform_vector(g, c, 0.1, 6.0));
    in.transitions.push_back(random_row_stochastic(g, c, 1.0));
    std::vector<Matrix> nbrs;
    std::vector<double> sims;
    for (int k = 0; k < 2; ++k) {
      nbrs.push_back(random_row_stochastic(g, c, 1.0));
      sims.push_back(uniform(g, 0.1, 1.0));
    }
    in.neighbor_transitions.push_back(nbrs);
    in.neighbor_similarity.push_back(sims);
    ClassMeans means;
    for (Index k = 0; k < c; ++k) {
      if (k == 1) means.push_back(std::nullopt);
      else means.push_back(uniform(g, 0.05, 0.8));
    }
    in.batch_mean_u.push_back(means);
  }
  in.label = soft_label ? random_simplex(g, c) : Vector(Vector::Unit(c, std::uniform_int_distribution<Index>(0, c - 1)(g)));
  return in;
}

}  // namespace

TEST(TotalLoss, DegenerateWeightsReduceToViewLosses) {
  const LossWeights w{0.0, 0.0, 10};
  SampleInputs in;
  in.clean_evidence = {vec({2.0, 0.5})};
  in.transitions = {Matrix::Identity(2, 2)};
  in.label = vec({1, 0});
  const auto l = total_loss_clean(in, 3, w);
  const Vector alpha = vec({3.0, 1.5});
  EXPECT_NEAR(l.total, 2 * view_loss(alpha, in.label, 3, w), 1e-12);
}

TEST(TotalLoss, ZeroEvidenceExample) {
  SampleInputs in;
  in.clean_evidence = {Vector::Zero(2), Vector::Zero(2)};
  in.transitions = {Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  in.label = vec({1, 0});
  // fused vacuous: L(1,1) + 2 views * L(1,1), each psi(2) - psi(1) = 1
  EXPECT_NEAR(total_loss_clean(in, 0, LossWeights{0, 0, 10}).total, 3.0, 1e-12);
}

TEST(TotalLoss, EqualsSumOfParts) {
  Gen g(34);
  const LossWeights w{0.3, 0.7, 10};
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = random_inputs(g, 3, 3, true);
    const auto l = total_loss_noisy(in, 4, w);
    const auto fwd = forward_noisy(in.clean_evidence, in.transitions);
    double views = 0, diag = 0, off = 0;
    for (std::size_t v = 0; v < 3; ++v) {
      views += view_loss(fwd.noisy_alpha[v], in.label, 4, w);
      diag += diag_constraint(in.transitions[v], fwd.noisy_opinions[v].uncertainty, hard_label(in.label), in.batch_mean_u[v]);
      off += offdiag_constraint(in.transitions[v], in.neighbor_transitions[v], in.neighbor_similarity[v]);
    }
    const double expected = view_loss(fwd.fused_alpha, in.label, 4, w) + views + w.beta * (diag + off) +
                            w.gamma * consistency_loss(in.transitions) + mse_mixed_loss(fwd.clean_probs, in.label);
    EXPECT_NEAR(l.total, expected, 1e-12);
    EXPECT_NEAR(l.total - l.mse, total_loss_clean(in, 4, w).total, 1e-12);
    EXPECT_GE(l.diagonal, 0.0);
    EXPECT_GE(l.offdiagonal, 0.0);
    EXPECT_GE(l.consistency, 0.0);
    EXPECT_GE(l.mse, 0.0);
  }
}

TEST(TotalLoss, NoisyEqualsCleanWhenProbabilitiesMatchLabel) {
  SampleInputs in;
  in.clean_evidence = {vec({3.0, 1.0}), vec({3.0, 1.0})};
  in.transitions = {Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  in.label = vec({4.0 / 6.0, 2.0 / 6.0});
  EXPECT_NEAR(total_loss_noisy(in, 2, {}).total, total_loss_clean(in, 2, {}).total, 1e-12);
}

TEST(TotalLoss, GradientMatchesFiniteDifferences) {
  Gen g(35);
  const LossWeights w{0.2, 0.3, 10};
  const double h = 1e-6;
  for (int trial = 0; trial < 12; ++trial) {
    const Index c = 2 + trial % 3;
    const Index views = 1 + trial % 3;
    const bool noisy = trial % 2 == 1;
    const auto in = random_inputs(g, c, views, noisy);
    auto eval = [&](const SampleInputs& x) {
      return noisy ? total_loss_noisy(x, 6, w).total : total_loss_clean(x, 6, w).total;
    };
    SampleGradient grad;
    if (noisy) total_loss_noisy(in, 6, w, &grad);
    else total_loss_clean(in, 6, w, &grad);
    for (Index v = 0; v < views; ++v) {
      for (Index i = 0; i < c; ++i) {
        auto p = in, m = in;
        p.clean_evidence[v](i) += h;
        m.clean_evidence[v](i) -= h;
        EXPECT_NEAR(grad.clean_evidence[v](i), (eval(p) - eval(m)) / (2 * h), 1e-6);
        for (Index j = 0; j < c; ++j) {
          auto tp = in, tm = in;
          tp.transitions[v](i, j) += h;
          tm.transitions[v](i, j) -= h;
          EXPECT_NEAR(grad.transitions[v](i, j), (eval(tp) - eval(tm)) / (2 * h), 1e-6);
        }
      }
    }
  }
}

TEST(WarmupLoss, ValueAndGradient) {
  Gen g(36);
  std::vector<Vector> e{uniform_vector(g, 3, 0, 4), uniform_vector(g, 3, 0, 4)};
  const Vector y = vec({0, 0, 1});
  const double expected = ace_loss((e[0].array() + 1).matrix(), y) + ace_loss((e[1].array() + 1).matrix(), y) +
                          ace_loss(fuse_clean(e), y);
  std::vector<Vector> grad;
  EXPECT_NEAR(warmup_loss(e, y, &grad), expected, 1e-12);
  for (std::size_t v = 0; v < 2; ++v) {
    for (Index i = 0; i < 3; ++i) {
      auto p = e, m = e;
      p[v](i) += 1e-6;
      m[v](i) -= 1e-6;
      EXPECT_NEAR(grad[v](i), (warmup_loss(p, y) - warmup_loss(m, y)) / 2e-6, 1e-7);
    }
  }
}
