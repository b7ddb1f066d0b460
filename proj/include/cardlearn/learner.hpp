#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>

#include "cardlearn/knn.hpp"
#include "cardlearn/plan.hpp"

namespace cardlearn {

enum class LearnerKind { FixedKnn, PlainKnn, LastKKnn, LinearSgd };

/// CLI spelling: fixed | plain | lastk | linear.
std::string_view to_string(LearnerKind kind);
LearnerKind parse_learner_kind(std::string_view text);

struct LearnerConfig {
  LearnerKind kind = LearnerKind::FixedKnn;
  std::size_t k = 3;
  std::size_t capacity = 500;
  double delta = 0.05;
  double eta = 0.1;
  // Linear regression runs its own step size; log-selectivity coordinates
  // reach -20 and a kNN-sized step diverges there.
  double sgd_eta = 0.05;
  std::size_t sgd_iterations = 10;

  KnnParams knn_params() const { return {k, capacity, delta, eta}; }
  friend bool operator==(const LearnerConfig&, const LearnerConfig&) = default;
};

/// Online regressor for one feature space: predicts ln(cardinality) from the
/// log-selectivity feature vector.
class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual LearnerKind kind() const = 0;
  virtual std::optional<double> predict(const FeatureVector& x) const = 0;
  virtual void observe(const FeatureVector& x, double y) = 0;
  /// Stored objects (kNN kinds) or observations seen (linear).
  virtual std::size_t size() const = 0;
  virtual void save(std::ostream& out) const = 0;
};

std::unique_ptr<Regressor> make_regressor(const LearnerConfig& config);

/// One regressor per feature space, created lazily on first observation.
/// Spaces that were never observed deny prediction.
class LearnerRegistry {
 public:
  explicit LearnerRegistry(LearnerConfig config = {});
  LearnerRegistry(LearnerRegistry&&) noexcept;
  LearnerRegistry& operator=(LearnerRegistry&&) noexcept;
  ~LearnerRegistry();

  const LearnerConfig& config() const { return config_; }

  std::optional<double> predict(const FeatureSpaceKey& key, const FeatureVector& x) const;
  void observe(const FeatureSpaceKey& key, const FeatureVector& x, double y);
  bool has_data(const FeatureSpaceKey& key) const;
  const Regressor* find(const FeatureSpaceKey& key) const;
  std::size_t space_count() const { return spaces_.size(); }

  /// Free-form counter persisted with snapshots (the bench stores the number
  /// of completed iterations here).
  std::size_t iteration = 0;

  /// Versioned text snapshot; doubles are written in shortest round-trip form
  /// so save/load is exact.
  void save(std::ostream& out) const;
  static LearnerRegistry load(std::istream& in);

 private:
  LearnerConfig config_;
  std::map<FeatureSpaceKey, std::unique_ptr<Regressor>> spaces_;
  std::unique_ptr<std::shared_mutex> mutex_;
};

/// Training target for an observed cardinality: ln(max(card, 1)).
double log_target(double true_cardinality);

}  // namespace cardlearn
