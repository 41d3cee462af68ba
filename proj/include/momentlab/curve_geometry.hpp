#pragma once

// Geometry of the moment curve gamma(t) = (t, t^2, ..., t^d): derivatives,
// Frenet frames, Frenet-aligned anisotropic boxes and their duals.

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace momentlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr int kMinCurveDim = 2;
inline constexpr int kMaxCurveDim = 6;

class MomentCurve {
 public:
  explicit MomentCurve(int d) : d_(d) {
    if (d < kMinCurveDim || d > kMaxCurveDim) {
      throw std::invalid_argument("moment curve dimension must be in [2, 6], got " + std::to_string(d));
    }
  }

  int dimension() const { return d_; }

 private:
  int d_;
};

/// gamma(t) = (t, t^2, ..., t^d).
inline Vector evaluate(const MomentCurve& curve, double t) {
  Vector x(curve.dimension());
  double p = 1.0;
  for (int i = 0; i < curve.dimension(); ++i) {
    p *= t;
    x[i] = p;
  }
  return x;
}

/// k-th derivative; component i (1-based) is i!/(i-k)! t^(i-k) for i >= k.
inline Vector derivative(const MomentCurve& curve, double t, int k) {
  const int d = curve.dimension();
  if (k < 1 || k > d) {
    throw std::out_of_range("derivative order must be in [1, " + std::to_string(d) + "], got " + std::to_string(k));
  }
  Vector v = Vector::Zero(d);
  for (int i = k; i <= d; ++i) {
    double falling = 1.0;
    for (int r = i - k + 1; r <= i; ++r) falling *= r;
    v[i - 1] = falling * std::pow(t, i - k);
  }
  return v;
}

/// Orthonormal frame e_1(t), ..., e_d(t) stored as the columns of `basis`.
struct CurveFrame {
  double t = 0.0;
  Matrix basis;

  Vector axis(int k) const { return basis.col(k); }
};

// Modified Gram-Schmidt with one re-orthogonalization pass over the
// derivative vectors, in order. Each e_k satisfies <e_k, gamma^(k)(t)> > 0.
inline CurveFrame frenet_frame(const MomentCurve& curve, double t) {
  const int d = curve.dimension();
  CurveFrame frame{t, Matrix::Zero(d, d)};
  for (int k = 0; k < d; ++k) {
    Vector w = derivative(curve, t, k + 1);
    for (int pass = 0; pass < 2; ++pass) {
      for (int i = 0; i < k; ++i) w -= frame.basis.col(i).dot(w) * frame.basis.col(i);
    }
    frame.basis.col(k) = w / w.norm();
  }
  return frame;
}

/// Box {center + sum_i s_i axes_i : |s_i| <= half_lengths_i}.
struct AnisotropicBox {
  Vector center;
  Matrix axes;
  Vector half_lengths;

  int dimension() const { return static_cast<int>(center.size()); }

  double volume() const {
    double v = 1.0;
    for (int i = 0; i < half_lengths.size(); ++i) v *= 2.0 * half_lengths[i];
    return v;
  }

  void validate() const {
    const auto d = center.size();
    if (axes.rows() != d || axes.cols() != d || half_lengths.size() != d) {
      throw std::invalid_argument("box components have inconsistent dimensions");
    }
    if ((axes.transpose() * axes - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-10) {
      throw std::invalid_argument("box axes are not orthonormal");
    }
    if ((half_lengths.array() <= 0.0).any()) throw std::invalid_argument("box half-lengths must be positive");
  }
};

/// Frenet-aligned box around gamma(t) with half-lengths eps, eps^2, ..., eps^d.
inline AnisotropicBox isotropic_box(const MomentCurve& curve, double t, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("isotropic box scale must lie in (0, 1)");
  const int d = curve.dimension();
  AnisotropicBox box{evaluate(curve, t), frenet_frame(curve, t).basis, Vector(d)};
  double p = 1.0;
  for (int k = 0; k < d; ++k) {
    p *= eps;
    box.half_lengths[k] = p;
  }
  return box;
}

/// Origin-centred box with the same axes and reciprocal half-lengths.
inline AnisotropicBox dual_box(const AnisotropicBox& box) {
  return {Vector::Zero(box.dimension()), box.axes, box.half_lengths.cwiseInverse()};
}

/// Closed containment in the box scaled by `scale` about its centre.
inline bool box_contains(const AnisotropicBox& box, const Vector& x, double scale = 1.0) {
  const Vector local = box.axes.transpose() * (x - box.center);
  for (int i = 0; i < local.size(); ++i) {
    if (std::abs(local[i]) > scale * box.half_lengths[i]) return false;
  }
  return true;
}

}  // namespace momentlab
