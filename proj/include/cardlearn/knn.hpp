#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "cardlearn/error.hpp"

namespace cardlearn {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Column-per-object storage.
template <typename Scalar>
using PointMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kSimilarityOffset = 0.1;

/// sim(a, b) = 1 / (0.1 + ||a - b||_2). Symmetric, at most 10.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar similarity(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) throw ContractViolation("similarity: dimension mismatch");
  return Scalar(1) / (Scalar(kSimilarityOffset) + (a - b).norm());
}

/// Gradient of sim(stored, query) with respect to `stored`. Zero when the two
/// coincide, where the norm has no derivative.
template <typename DerivedA, typename DerivedB>
Vector<typename DerivedA::Scalar> similarity_gradient(const Eigen::MatrixBase<DerivedA>& stored,
                                                      const Eigen::MatrixBase<DerivedB>& query) {
  using Scalar = typename DerivedA::Scalar;
  if (stored.size() != query.size()) throw ContractViolation("similarity_gradient: dimension mismatch");
  const Vector<Scalar> diff = stored - query;
  const Scalar d = diff.norm();
  if (d == Scalar(0)) return Vector<Scalar>::Zero(diff.size());
  const Scalar denom = Scalar(kSimilarityOffset) + d;
  return -diff / (d * denom * denom);
}

/// Indices of the min(k, n) stored objects most similar to `x`, most similar
/// first; equal distances keep the lower index first.
template <typename Scalar, typename Derived>
std::vector<Eigen::Index> nearest_neighbours(const PointMatrix<Scalar>& points, const Eigen::MatrixBase<Derived>& x,
                                             std::size_t k) {
  const Eigen::Index n = points.cols();
  if (n > 0 && points.rows() != x.size()) throw ContractViolation("nearest_neighbours: dimension mismatch");
  const Vector<Scalar> dist = (points.colwise() - x).colwise().norm().transpose();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto m = std::min<std::size_t>(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                    [&](Eigen::Index a, Eigen::Index b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
  order.resize(m);
  return order;
}

/// Similarity-weighted mean of the targets of the k nearest objects; nullopt
/// when nothing is stored.
template <typename Scalar, typename Derived>
std::optional<Scalar> knn_predict(const PointMatrix<Scalar>& points, const Vector<Scalar>& targets,
                                  const Eigen::MatrixBase<Derived>& x, std::size_t k) {
  if (points.cols() == 0) return std::nullopt;
  Scalar weighted = 0, total = 0;
  for (auto i : nearest_neighbours<Scalar>(points, x, k)) {
    const Scalar s = similarity(points.col(i), x);
    weighted += targets[i] * s;
    total += s;
  }
  return weighted / total;
}

struct KnnParams {
  std::size_t k = 3;
  std::size_t capacity = 500;
  double delta = 0.05;
  double eta = 0.1;
};

/// Fixed-memory nearest-neighbour regression.
///
/// Below capacity a new object either nudges the nearest stored object within
/// radius delta towards itself (x_i += eta (x - x_i), y_i += eta (y - y_i)) or
/// is appended. Once `capacity` objects are stored, every observation instead
/// takes one gradient step on l = (y_hat - y)^2 / 2 with respect to the
/// positions and targets of the k neighbours that produced y_hat. Stored
/// objects then no longer correspond to any single observation.
template <typename Scalar>
class FixedMemoryKnn {
 public:
  using VectorType = Vector<Scalar>;
  using MatrixType = PointMatrix<Scalar>;

  /// Loss gradient with respect to the neighbours used for one prediction.
  struct Gradient {
    Scalar prediction = 0;
    std::vector<Eigen::Index> neighbours;
    VectorType d_target;   // one entry per neighbour
    MatrixType d_point;    // one column per neighbour
  };

  explicit FixedMemoryKnn(KnnParams params = {}) : params_(params) {
    if (params_.k == 0 || params_.capacity == 0) throw ContractViolation("knn: k and capacity must be positive");
  }

  FixedMemoryKnn(KnnParams params, MatrixType points, VectorType targets) : FixedMemoryKnn(params) {
    if (points.cols() != targets.size() || static_cast<std::size_t>(points.cols()) > params_.capacity)
      throw ContractViolation("knn: inconsistent restored state");
    points_ = std::move(points);
    targets_ = std::move(targets);
    dimension_ = points_.cols() > 0 ? std::optional<Eigen::Index>(points_.rows()) : std::nullopt;
  }

  const KnnParams& params() const { return params_; }
  std::size_t size() const { return static_cast<std::size_t>(points_.cols()); }
  bool at_capacity() const { return size() >= params_.capacity; }
  const MatrixType& points() const { return points_; }
  const VectorType& targets() const { return targets_; }

  template <typename Derived>
  std::optional<Scalar> predict(const Eigen::MatrixBase<Derived>& x) const {
    check_dimension(x.size());
    return knn_predict<Scalar>(points_, targets_, x, params_.k);
  }

  template <typename Derived>
  Scalar loss(const Eigen::MatrixBase<Derived>& x, Scalar y) const {
    const auto y_hat = predict(x);
    if (!y_hat) throw ContractViolation("knn: loss of an empty store");
    return Scalar(0.5) * (*y_hat - y) * (*y_hat - y);
  }

  template <typename Derived>
  Gradient loss_gradient(const Eigen::MatrixBase<Derived>& x, Scalar y) const {
    check_dimension(x.size());
    Gradient g;
    g.neighbours = nearest_neighbours<Scalar>(points_, x, params_.k);
    if (g.neighbours.empty()) throw ContractViolation("knn: gradient of an empty store");
    const auto m = static_cast<Eigen::Index>(g.neighbours.size());
    VectorType sims(m);
    for (Eigen::Index j = 0; j < m; ++j) sims[j] = similarity(points_.col(g.neighbours[j]), x);
    const Scalar total = sims.sum();
    Scalar weighted = 0;
    for (Eigen::Index j = 0; j < m; ++j) weighted += targets_[g.neighbours[j]] * sims[j];
    g.prediction = weighted / total;
    const Scalar dl_dyhat = g.prediction - y;
    g.d_target = dl_dyhat * sims / total;
    g.d_point.resize(points_.rows(), m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto i = g.neighbours[j];
      g.d_point.col(j) =
          dl_dyhat * similarity_gradient(points_.col(i), x) * (targets_[i] - g.prediction) / total;
    }
    return g;
  }

  template <typename Derived>
  void observe(const Eigen::MatrixBase<Derived>& x, Scalar y) {
    check_dimension(x.size());
    if (!dimension_) dimension_ = x.size();
    const Scalar eta = static_cast<Scalar>(params_.eta);
    if (!at_capacity()) {
      if (points_.cols() > 0) {
        const auto nearest = nearest_neighbours<Scalar>(points_, x, 1).front();
        if ((points_.col(nearest) - x).norm() <= static_cast<Scalar>(params_.delta)) {
          points_.col(nearest) += eta * (x - points_.col(nearest));
          targets_[nearest] += eta * (y - targets_[nearest]);
          return;
        }
      }
      append(x, y);
      return;
    }
    const Gradient g = loss_gradient(x, y);
    for (std::size_t j = 0; j < g.neighbours.size(); ++j) {
      const auto i = g.neighbours[j];
      const auto jj = static_cast<Eigen::Index>(j);
      targets_[i] -= eta * g.d_target[jj];
      points_.col(i) -= eta * g.d_point.col(jj);
    }
  }

 private:
  void check_dimension(Eigen::Index d) const {
    if (dimension_ && *dimension_ != d) throw ContractViolation("knn: dimension mismatch");
  }

  template <typename Derived>
  void append(const Eigen::MatrixBase<Derived>& x, Scalar y) {
    const Eigen::Index n = points_.cols();
    points_.conservativeResize(x.size(), n + 1);
    points_.col(n) = x;
    targets_.conservativeResize(n + 1);
    targets_[n] = y;
  }

  KnnParams params_;
  MatrixType points_;
  VectorType targets_;
  std::optional<Eigen::Index> dimension_;
};

/// Classic kNN regression that keeps every observation.
template <typename Scalar>
class PlainKnn {
 public:
  using VectorType = Vector<Scalar>;
  using MatrixType = PointMatrix<Scalar>;

  explicit PlainKnn(std::size_t k = 3) : k_(k) {
    if (k_ == 0) throw ContractViolation("knn: k must be positive");
  }
  PlainKnn(std::size_t k, MatrixType points, VectorType targets) : PlainKnn(k) {
    if (points.cols() != targets.size()) throw ContractViolation("knn: inconsistent restored state");
    points_ = std::move(points);
    targets_ = std::move(targets);
  }

  std::size_t k() const { return k_; }
  std::size_t size() const { return static_cast<std::size_t>(points_.cols()); }
  const MatrixType& points() const { return points_; }
  const VectorType& targets() const { return targets_; }

  template <typename Derived>
  std::optional<Scalar> predict(const Eigen::MatrixBase<Derived>& x) const {
    check_dimension(x.size());
    return knn_predict<Scalar>(points_, targets_, x, k_);
  }

  template <typename Derived>
  void observe(const Eigen::MatrixBase<Derived>& x, Scalar y) {
    check_dimension(x.size());
    const Eigen::Index n = points_.cols();
    points_.conservativeResize(x.size(), n + 1);
    points_.col(n) = x;
    targets_.conservativeResize(n + 1);
    targets_[n] = y;
  }

 protected:
  void check_dimension(Eigen::Index d) const {
    if (points_.cols() > 0 && points_.rows() != d) throw ContractViolation("knn: dimension mismatch");
  }

  std::size_t k_;
  MatrixType points_;
  VectorType targets_;
};

/// kNN regression over the most recent `capacity` observations (FIFO).
template <typename Scalar>
class LastKKnn : public PlainKnn<Scalar> {
  using Base = PlainKnn<Scalar>;

 public:
  using typename Base::MatrixType;
  using typename Base::VectorType;

  LastKKnn(std::size_t k = 3, std::size_t capacity = 500) : Base(k), capacity_(capacity) {
    if (capacity_ == 0) throw ContractViolation("knn: capacity must be positive");
  }
  LastKKnn(std::size_t k, std::size_t capacity, MatrixType points, VectorType targets)
      : Base(k, std::move(points), std::move(targets)), capacity_(capacity) {
    if (this->size() > capacity_) throw ContractViolation("knn: inconsistent restored state");
  }

  std::size_t capacity() const { return capacity_; }

  template <typename Derived>
  void observe(const Eigen::MatrixBase<Derived>& x, Scalar y) {
    Base::observe(x, y);
    const Eigen::Index n = this->points_.cols();
    if (static_cast<std::size_t>(n) > capacity_) {
      // Oldest object sits in column 0.
      this->points_ = this->points_.rightCols(n - 1).eval();
      this->targets_ = this->targets_.tail(n - 1).eval();
    }
  }

 private:
  std::size_t capacity_;
};

/// Linear regression y = w.x + b fitted online: every observation runs
/// `iterations` gradient steps of l = (y_hat - y)^2 / 2 on that object alone.
template <typename Scalar>
class LinearSgd {
 public:
  using VectorType = Vector<Scalar>;

  LinearSgd(double eta = 0.05, std::size_t iterations = 10) : eta_(static_cast<Scalar>(eta)), iterations_(iterations) {}
  LinearSgd(double eta, std::size_t iterations, VectorType weights, Scalar bias, std::size_t observed)
      : eta_(static_cast<Scalar>(eta)), iterations_(iterations), weights_(std::move(weights)), bias_(bias),
        observed_(observed) {}

  const VectorType& weights() const { return weights_; }
  Scalar bias() const { return bias_; }
  std::size_t observed() const { return observed_; }
  double eta() const { return static_cast<double>(eta_); }
  std::size_t iterations() const { return iterations_; }

  /// Denied until the first observation.
  template <typename Derived>
  std::optional<Scalar> predict(const Eigen::MatrixBase<Derived>& x) const {
    if (observed_ == 0) return std::nullopt;
    if (x.size() != weights_.size()) throw ContractViolation("linear: dimension mismatch");
    return weights_.dot(x) + bias_;
  }

  template <typename Derived>
  void observe(const Eigen::MatrixBase<Derived>& x, Scalar y) {
    if (observed_ == 0 && weights_.size() == 0) weights_ = VectorType::Zero(x.size());
    if (x.size() != weights_.size()) throw ContractViolation("linear: dimension mismatch");
    for (std::size_t it = 0; it < iterations_; ++it) {
      const Scalar residual = weights_.dot(x) + bias_ - y;
      weights_ -= eta_ * residual * x;
      bias_ -= eta_ * residual;
    }
    ++observed_;
  }

 private:
  Scalar eta_;
  std::size_t iterations_;
  VectorType weights_;
  Scalar bias_ = 0;
  std::size_t observed_ = 0;
};

}  // namespace cardlearn
