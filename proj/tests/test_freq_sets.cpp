#include <gtest/gtest.h>

#include <cmath>

#include "momentlab/freq_sets.hpp"
#include "support/oracles.hpp"

using namespace momentlab;

namespace {

CantorMeasure cascade(int d, int levels, std::uint64_t seed) {
  CascadeParams p;
  p.d = d;
  p.m = 4;
  p.alpha = 0.5;
  p.levels = levels;
  p.seed = seed;
  return build_cascade(p);
}

Vector box_sample(KeyedStream& rng, const std::vector<double>& half) {
  Vector xi(static_cast<Eigen::Index>(half.size()));
  for (std::size_t i = 0; i < half.size(); ++i) xi[i] = rng.uniform(-half[i], half[i]);
  return xi;
}

// xi with prescribed derivative values P^(k)(t) = v_k.
Vector from_derivatives(int d, double t, const Vector& v) {
  const MomentCurve c(d);
  Matrix N(d, d);
  for (int k = 1; k <= d; ++k) N.row(k - 1) = derivative(c, t, k).transpose();
  return N.fullPivLu().solve(v);
}

double point_in_level(KeyedStream& rng, const CascadeLevel& l) {
  const std::uint64_t a = l.offsets[rng.below(l.offsets.size())];
  return (static_cast<double>(a) + rng.uniform()) / static_cast<double>(l.M);
}

}  // namespace

TEST(ConstraintIntervalSet, LargeBoundGivesEverything) {
  Vector xi(3);
  xi << 3, -2, 5;
  const IntervalSet s = constraint_interval_set(xi, 1, 1e6);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], (Interval{0.0, 1.0}));
  EXPECT_THROW(constraint_interval_set(xi, 4, 1.0), std::out_of_range);
  EXPECT_THROW(constraint_interval_set(xi, 0, 1.0), std::out_of_range);
}

TEST(MeetsLevel, ClosedIntervals) {
  const CascadeLevel l{1, 4, Rational(2), {0, 2}};
  EXPECT_TRUE(meets_level({{0.25, 0.25}}, l));   // right end of [0, 1/4]
  EXPECT_TRUE(meets_level({{0.75, 0.9}}, l));    // right end of [1/2, 3/4]
  EXPECT_FALSE(meets_level({{0.26, 0.49}}, l));
  EXPECT_FALSE(meets_level({{0.76, 1.0}}, l));
  EXPECT_FALSE(meets_level({}, l));
}

TEST(OmegaS1, TrivialCases) {
  const CantorMeasure mu = cascade(3, 2, 1);
  EXPECT_TRUE(in_omega_s1(mu, 2, 0, Vector::Zero(3)));
  const double B = 16.0;
  Vector xi = Vector::Zero(3);
  xi[2] = B * B * B / 6.0 * 1.01;
  EXPECT_FALSE(in_omega_s1(mu, 2, 0, xi));
  EXPECT_THROW(in_omega_s1(mu, 2, -1, xi), std::invalid_argument);
}

TEST(OmegaS1, MatchesGridOracleD2) {
  const CantorMeasure mu = cascade(2, 2, 3);
  const CascadeLevel& l = mu.level(2);
  KeyedStream rng(1, {});
  int agree_in = 0, agree_out = 0;
  for (int i = 0; i < 300; ++i) {
    const Vector xi = box_sample(rng, {400, 160});
    for (int s1 = 0; s1 <= 1; ++s1) {
      const double B = 16.0 * std::ldexp(1.0, s1);
      const bool got = in_omega_s1(l, s1, PhasePolynomial(xi));
      auto shrunk = [B](int k) { return std::pow(B, k) * (1 - 1e-3); };
      auto grown = [B](int k) { return std::pow(B, k) * (1 + 1e-3); };
      if (oracle::grid_witness(xi, l.offsets, 16.0, 1, shrunk, 1e-6)) {
        EXPECT_TRUE(got) << xi.transpose();
        ++agree_in;
      }
      if (!oracle::grid_witness(xi, l.offsets, 16.0, 1, grown, 1e-6)) {
        EXPECT_FALSE(got) << xi.transpose();
        ++agree_out;
      }
    }
  }
  // both outcomes are exercised
  EXPECT_GT(agree_in, 50);
  EXPECT_GT(agree_out, 50);
}

TEST(OmegaS1S2, MatchesGridOracleD3) {
  const CantorMeasure mu = cascade(3, 2, 4);
  const CascadeLevel& l = mu.level(2);
  KeyedStream rng(2, {});
  int in = 0, out = 0;
  for (int i = 0; i < 150; ++i) {
    const Vector xi = box_sample(rng, {120, 60, 20});
    const int s1 = static_cast<int>(rng.below(2)), s2 = static_cast<int>(rng.below(3));
    const double B = 16.0 * std::ldexp(1.0, s1), step = std::ldexp(1.0, s2);
    for (CellVariant v : {CellVariant::general, CellVariant::d3}) {
      const bool got = in_omega_s1s2(l, s1, s2, PhasePolynomial(xi), v);
      auto witness = [&](double f) {
        auto b1 = [&](int k) { return std::pow(B, k) * f; };
        auto b2 = [&](int k) { return B * std::pow(step, k - 1) * f; };
        const bool first = oracle::grid_witness(xi, l.offsets, 16.0, 1, b1, 2e-6);
        return first && oracle::grid_witness(xi, l.offsets, 16.0, v == CellVariant::d3 ? 1 : 2, b2, 2e-6);
      };
      if (witness(1 - 1e-3)) {
        EXPECT_TRUE(got);
        ++in;
      } else if (!witness(1 + 1e-3)) {
        EXPECT_FALSE(got);
        ++out;
      }
    }
  }
  EXPECT_GT(in, 20);
  EXPECT_GT(out, 20);
}

TEST(OmegaS1S2, TrivialCasesAndErrors) {
  const CantorMeasure mu = cascade(3, 2, 5);
  EXPECT_TRUE(in_omega_s1s2(mu, 2, 0, 0, Vector::Zero(3), CellVariant::general));
  EXPECT_TRUE(in_omega_s1s2(mu, 2, 0, 0, Vector::Zero(3), CellVariant::d3));
  EXPECT_THROW(in_omega_s1s2(mu, 2, 0, 5, Vector::Zero(3), CellVariant::d3), std::invalid_argument);
  const CantorMeasure mu4 = cascade(4, 2, 5);
  EXPECT_THROW(in_omega_s1s2(mu4, 2, 0, 0, Vector::Zero(4), CellVariant::d3), std::invalid_argument);
}

TEST(OmegaS1S2, MaximalS2EqualsOmegaS1) {
  const CantorMeasure mu = cascade(3, 2, 6);
  KeyedStream rng(3, {});
  for (int i = 0; i < 300; ++i) {
    const Vector xi = box_sample(rng, {300, 200, 80});
    for (int s1 = 0; s1 <= 1; ++s1) {
      const int s2max = 4 + s1;  // 2^s2 = 16 * 2^s1
      const bool base = in_omega_s1(mu, 2, s1, xi);
      EXPECT_EQ(in_omega_s1s2(mu, 2, s1, s2max, xi, CellVariant::general), base);
      EXPECT_EQ(in_omega_s1s2(mu, 2, s1, s2max, xi, CellVariant::d3), base);
    }
  }
}

TEST(OmegaCells, MonotoneInIndices) {
  for (int d : {3, 4}) {
    const CantorMeasure mu = cascade(d, 2, 7);
    KeyedStream rng(4, {static_cast<std::uint64_t>(d)});
    std::vector<double> half(d);
    for (int k = 0; k < d; ++k) half[k] = 200.0 / (k + 1);
    for (int i = 0; i < 1000; ++i) {
      const Vector xi = box_sample(rng, half);
      for (int s1 = 0; s1 < 3; ++s1) {
        if (in_omega_s1(mu, 2, s1, xi)) EXPECT_TRUE(in_omega_s1(mu, 2, s1 + 1, xi));
      }
      const auto variant = d == 3 ? CellVariant::d3 : CellVariant::general;
      for (int s2 = 0; s2 < 4; ++s2) {
        if (in_omega_s1s2(mu, 2, 0, s2, xi, variant)) EXPECT_TRUE(in_omega_s1s2(mu, 2, 0, s2 + 1, xi, variant));
      }
    }
  }
}

TEST(OmegaTilde, DisjointAndConsistent) {
  const CantorMeasure mu = cascade(3, 2, 8);
  KeyedStream rng(5, {});
  for (int i = 0; i < 400; ++i) {
    const Vector xi = box_sample(rng, {2000, 1000, 300});
    for (CellVariant v : {CellVariant::general, CellVariant::d3}) {
      int cells = 0;
      for (int s1 = 0; s1 <= 3; ++s1) {
        const bool lower = s1 > 0 && in_omega_s1(mu, 2, s1 - 1, xi);
        for (int s2 = 0; s2 <= 4; ++s2) {
          const bool t = in_omega_tilde(mu, 2, s1, s2, xi, v);
          cells += t ? 1 : 0;
          if (lower) EXPECT_FALSE(t);
        }
      }
      EXPECT_LE(cells, 1);
      EXPECT_EQ(in_omega_tilde(mu, 2, 0, 0, xi, v), in_omega_s1s2(mu, 2, 0, 0, xi, v));
    }
  }
}

TEST(S3Diagnostic, Arithmetic) {
  Vector xi(3);
  xi << 0, 0, 64;
  EXPECT_DOUBLE_EQ(s3_diagnostic(16, 1, 1, xi), 0.0);
  xi[2] = 0;
  EXPECT_EQ(s3_diagnostic(16, 0, 0, xi), -INFINITY);
  EXPECT_THROW(s3_diagnostic(16, 0, 0, Vector::Zero(2)), std::invalid_argument);
}

TEST(VolumeBound, D3Example) {
  EXPECT_DOUBLE_EQ(omega_volume_bound(16, 0, 0, 0.5, 3, 0.0, CellVariant::d3), 4096.0);
  EXPECT_THROW(omega_volume_bound(16, 0, 0, 0.5, 4, 0.0, CellVariant::d3), std::invalid_argument);
  EXPECT_THROW(omega_volume_bound(16, 0, 0, 0.5, 3, 0.0, CellVariant::general), std::invalid_argument);
  EXPECT_THROW(omega_volume_bound(16, 0, 5, 0.5, 3, 0.0, CellVariant::d3), std::invalid_argument);
}

TEST(VolumeBound, RegimeSeamAndMonotonicity) {
  // d = 4, M_j = 8, s1 = 0, s2 = 1 sits on 2^(s2(d-1)) = 2^s1 M_j
  const double Mj = 8, alpha = 0.5;
  const int d = 4, s1 = 0, s2 = 1;
  const double r1 = omega_volume_bound(Mj, s1, s2, alpha, d, 0.0, CellVariant::general);
  const double B = Mj;
  const double r2 = std::pow(B, d) * std::exp2(s2 * d * (d - 1) / 2.0) * std::pow(Mj, alpha) * std::exp2(s1) *
                    std::pow(Mj * std::exp2(s1 - s2), alpha / (d - 2.0)) * std::exp2(s1 * (1 - alpha) / (d - 1.0));
  EXPECT_TRUE(std::isfinite(r2 / r1));
  EXPECT_LE(r2 / r1, std::exp2(d));
  EXPECT_GE(r2 / r1, std::exp2(-d));

  // regime 1 with M_j = 4096: 2^(3 s2) <= 4096 for s2 <= 4
  double prev = 0.0;
  for (int s = 0; s <= 4; ++s) {
    const double v = omega_volume_bound(4096, 0, s, alpha, 4, 0.1, CellVariant::general);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(CBound, Examples) {
  EXPECT_DOUBLE_EQ(c_bound(64, 0, 0, 0.5, 0.0), 0.125);
  EXPECT_NEAR(c_bound(256, 1, 2, 0.5, 0.0), std::exp2(-6.5), 1e-17);
  for (int s = 0; s < 5; ++s) {
    EXPECT_LT(c_bound(256, s + 1, 2, 0.3, 0.1), c_bound(256, s, 2, 0.3, 0.1));
    EXPECT_LT(c_bound(256, 1, s + 1, 0.3, 0.1), c_bound(256, 1, s, 0.3, 0.1));
  }
}

TEST(Parallelotope, VolumeContainmentAndMap) {
  Matrix n(2, 2);
  n << 1, 1, 0, 2;
  const Parallelotope p(n, Vector::Ones(2), (Vector(2) << 0.5, 1.0).finished());
  EXPECT_DOUBLE_EQ(p.volume(), 1.0 * 2.0 / 2.0);
  KeyedStream rng(6, {});
  for (int i = 0; i < 100; ++i) {
    Vector u(2);
    u << rng.uniform(-1, 1), rng.uniform(-1, 1);
    EXPECT_TRUE(p.contains(p.from_cube(u * (1 - 1e-12))));
    u[i % 2] = (i % 4 < 2 ? 1.01 : -1.01);
    EXPECT_FALSE(p.contains(p.from_cube(u)));
  }
  Matrix singular(2, 2);
  singular << 1, 2, 2, 4;
  EXPECT_THROW(Parallelotope(singular, Vector::Zero(2), Vector::Ones(2)), std::invalid_argument);
}

TEST(UnionEstimator, IdenticalAnchorsGiveSingleVolume) {
  const Parallelotope box(Matrix::Identity(2, 2), (Vector(2) << 1, 0.5).finished(), (Vector(2) << 1, 0.5).finished());
  const UnionEstimate e = estimate_union_volume({box, box}, [](const Vector&) { return true; }, 1000, 1);
  EXPECT_DOUBLE_EQ(e.union_volume, 2.0);
  EXPECT_DOUBLE_EQ(e.estimate, 2.0);
  EXPECT_EQ(e.union_std_error, 0.0);
  EXPECT_DOUBLE_EQ(e.pass_fraction, 1.0);
}

TEST(UnionEstimator, OverlappingBoxes) {
  // [0,2]x[0,1] and [1,3]x[0,1]: union area 3, area left of x = 1.5 is 1.5
  const Parallelotope a(Matrix::Identity(2, 2), (Vector(2) << 1, 0.5).finished(), (Vector(2) << 1, 0.5).finished());
  const Parallelotope b(Matrix::Identity(2, 2), (Vector(2) << 2, 0.5).finished(), (Vector(2) << 1, 0.5).finished());
  const UnionEstimate e = estimate_union_volume({a, b}, [](const Vector& x) { return x[0] < 1.5; }, 100000, 9);
  EXPECT_NEAR(e.union_volume, 3.0, 3 * e.union_std_error);
  EXPECT_NEAR(e.estimate, 1.5, 3 * e.std_error);
  EXPECT_GT(e.union_std_error, 0.0);
  EXPECT_EQ(e.samples, 100000u);
  EXPECT_THROW(estimate_union_volume({}, [](const Vector&) { return true; }, 10, 1), std::invalid_argument);
}

TEST(OmegaAnchors, CoverEveryMember) {
  // members built with a witness anywhere in E_j must fall inside some anchor
  for (int d : {3, 4}) {
    const CantorMeasure mu = cascade(d, 2, 10);
    const CascadeLevel& l = mu.level(2);
    KeyedStream rng(7, {static_cast<std::uint64_t>(d)});
    for (int s1 = 0; s1 <= 2; ++s1) {
      for (int s2 = 0; s2 <= 3; ++s2) {
        for (CellVariant v : {CellVariant::general, CellVariant::d3}) {
          if (v == CellVariant::d3 && d != 3) continue;
          const auto anchors = omega_anchors(l, d, s1, s2, v);
          const double B = 16.0 * std::ldexp(1.0, s1), step = std::ldexp(1.0, s2);
          int tested = 0;
          for (int i = 0; i < 300; ++i) {
            const double t = point_in_level(rng, l);
            Vector val(d);
            for (int k = 1; k <= d; ++k) val[k - 1] = rng.uniform(-1, 1) * B * std::pow(step, k - 1);
            // general cells allow the k = 1 witness elsewhere: widen it
            if (v == CellVariant::general && rng.uniform() < 0.5) val[0] *= rng.uniform(1, 20);
            const Vector xi = from_derivatives(d, t, val);
            if (!in_omega_s1s2(l, s1, s2, PhasePolynomial(xi), v)) continue;
            ++tested;
            bool covered = false;
            for (const auto& p : anchors) covered = covered || p.contains(xi);
            EXPECT_TRUE(covered) << "d=" << d << " s1=" << s1 << " s2=" << s2 << " " << xi.transpose();
          }
          EXPECT_GT(tested, 30);
        }
      }
    }
  }
}

TEST(OmegaAnchors, AnchorsAtLevelIntervals) {
  const CantorMeasure mu = cascade(3, 2, 11);
  const auto anchors = omega_anchors(mu.level(2), 3, 0, 0, CellVariant::d3);
  EXPECT_EQ(anchors.size(), mu.level(2).offsets.size());
  // finer s2 splits each interval
  EXPECT_EQ(omega_anchors(mu.level(2), 3, 1, 5, CellVariant::d3).size(), 2 * mu.level(2).offsets.size());
  const CascadeLevel empty{2, 16, Rational(4), {}};
  EXPECT_THROW(omega_anchors(empty, 3, 0, 0, CellVariant::d3), std::invalid_argument);
}

TEST(EstimateOmegaVolume, DeterministicAndBounded) {
  const CantorMeasure mu = cascade(3, 2, 12);
  const UnionEstimate a = estimate_omega_volume(mu, 2, 1, 1, CellVariant::d3, 4000, 5);
  const UnionEstimate b = estimate_omega_volume(mu, 2, 1, 1, CellVariant::d3, 4000, 5);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_GT(a.estimate, 0.0);
  EXPECT_LE(a.estimate, a.union_volume * (1 + 1e-12));
  EXPECT_GE(a.pass_fraction, 0.0);
  EXPECT_LE(a.pass_fraction, 1.0);
}

TEST(TildeMembers, AreMembersAndConfinedToBall) {
  const CantorMeasure mu = cascade(3, 3, 13);
  for (int s1 = 0; s1 <= 2; ++s1) {
    for (int s2 = 0; s2 <= 3; ++s2) {
      const auto members = sample_tilde_members(mu.level(3), 3, s1, s2, CellVariant::d3, 10, 5000, 3);
      const double B = 64.0 * std::ldexp(1.0, s1);
      for (const auto& xi : members) {
        EXPECT_TRUE(in_omega_tilde(mu, 3, s1, s2, xi, CellVariant::d3));
        EXPECT_LE(xi.norm(), 10.0 * std::pow(B, 3));
      }
    }
  }
}
