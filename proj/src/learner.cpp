#include "cardlearn/learner.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>

#include "cardlearn/error.hpp"
#include "cardlearn/format.hpp"

namespace cardlearn {

std::string_view to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::FixedKnn: return "fixed";
    case LearnerKind::PlainKnn: return "plain";
    case LearnerKind::LastKKnn: return "lastk";
    case LearnerKind::LinearSgd: return "linear";
  }
  return "?";
}

LearnerKind parse_learner_kind(std::string_view text) {
  text = trim(text);
  if (text == "fixed") return LearnerKind::FixedKnn;
  if (text == "plain") return LearnerKind::PlainKnn;
  if (text == "lastk") return LearnerKind::LastKKnn;
  if (text == "linear") return LearnerKind::LinearSgd;
  throw ConfigError("unknown learner kind '" + std::string(text) + "' (expected fixed|plain|lastk|linear)");
}

double log_target(double true_cardinality) { return std::log(std::max(true_cardinality, 1.0)); }

namespace {

void write_points(std::ostream& out, const PointMatrix<double>& points, const Vector<double>& targets) {
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    out << format_double(targets[i]);
    for (Eigen::Index r = 0; r < points.rows(); ++r) out << ' ' << format_double(points(r, i));
    out << '\n';
  }
}

std::string next_line(std::istream& in, std::string_view what) {
  std::string line;
  if (!std::getline(in, line)) throw Error("learner snapshot truncated while reading " + std::string(what));
  return line;
}

std::vector<double> parse_numbers(const std::string& line) {
  std::vector<double> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(parse_double(tok));
  return out;
}

void read_points(std::istream& in, std::size_t n, Eigen::Index dim, PointMatrix<double>& points,
                 Vector<double>& targets) {
  points.resize(dim, static_cast<Eigen::Index>(n));
  targets.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto nums = parse_numbers(next_line(in, "points"));
    if (nums.size() != static_cast<std::size_t>(dim) + 1) throw Error("learner snapshot: bad point row");
    const auto col = static_cast<Eigen::Index>(i);
    targets[col] = nums[0];
    for (Eigen::Index r = 0; r < dim; ++r) points(r, col) = nums[static_cast<std::size_t>(r) + 1];
  }
}

class FixedKnnRegressor final : public Regressor {
 public:
  explicit FixedKnnRegressor(FixedMemoryKnn<double> model) : model_(std::move(model)) {}
  LearnerKind kind() const override { return LearnerKind::FixedKnn; }
  std::optional<double> predict(const FeatureVector& x) const override { return model_.predict(x); }
  void observe(const FeatureVector& x, double y) override { model_.observe(x, y); }
  std::size_t size() const override { return model_.size(); }
  void save(std::ostream& out) const override {
    out << "model fixed " << model_.size() << ' ' << model_.points().rows() << '\n';
    write_points(out, model_.points(), model_.targets());
  }

 private:
  FixedMemoryKnn<double> model_;
};

class PlainKnnRegressor final : public Regressor {
 public:
  explicit PlainKnnRegressor(PlainKnn<double> model) : model_(std::move(model)) {}
  LearnerKind kind() const override { return LearnerKind::PlainKnn; }
  std::optional<double> predict(const FeatureVector& x) const override { return model_.predict(x); }
  void observe(const FeatureVector& x, double y) override { model_.observe(x, y); }
  std::size_t size() const override { return model_.size(); }
  void save(std::ostream& out) const override {
    out << "model plain " << model_.size() << ' ' << model_.points().rows() << '\n';
    write_points(out, model_.points(), model_.targets());
  }

 private:
  PlainKnn<double> model_;
};

class LastKKnnRegressor final : public Regressor {
 public:
  explicit LastKKnnRegressor(LastKKnn<double> model) : model_(std::move(model)) {}
  LearnerKind kind() const override { return LearnerKind::LastKKnn; }
  std::optional<double> predict(const FeatureVector& x) const override { return model_.predict(x); }
  void observe(const FeatureVector& x, double y) override { model_.observe(x, y); }
  std::size_t size() const override { return model_.size(); }
  void save(std::ostream& out) const override {
    out << "model lastk " << model_.size() << ' ' << model_.points().rows() << '\n';
    write_points(out, model_.points(), model_.targets());
  }

 private:
  LastKKnn<double> model_;
};

class LinearRegressor final : public Regressor {
 public:
  explicit LinearRegressor(LinearSgd<double> model) : model_(std::move(model)) {}
  LearnerKind kind() const override { return LearnerKind::LinearSgd; }
  std::optional<double> predict(const FeatureVector& x) const override { return model_.predict(x); }
  void observe(const FeatureVector& x, double y) override { model_.observe(x, y); }
  std::size_t size() const override { return model_.observed(); }
  void save(std::ostream& out) const override {
    out << "model linear " << model_.observed() << ' ' << model_.weights().size() << '\n';
    out << format_double(model_.bias());
    for (Eigen::Index i = 0; i < model_.weights().size(); ++i) out << ' ' << format_double(model_.weights()[i]);
    out << '\n';
  }

 private:
  LinearSgd<double> model_;
};

std::unique_ptr<Regressor> load_regressor(const LearnerConfig& config, std::istream& in) {
  std::istringstream header(next_line(in, "model header"));
  std::string word, kind_text;
  std::size_t n = 0;
  Eigen::Index dim = 0;
  if (!(header >> word >> kind_text >> n >> dim) || word != "model") throw Error("learner snapshot: bad model header");
  const auto kind = parse_learner_kind(kind_text);
  if (kind != config.kind) throw Error("learner snapshot: model kind differs from snapshot config");
  if (kind == LearnerKind::LinearSgd) {
    const auto nums = parse_numbers(next_line(in, "linear weights"));
    if (nums.size() != static_cast<std::size_t>(dim) + 1) throw Error("learner snapshot: bad linear weights");
    Vector<double> w(dim);
    for (Eigen::Index i = 0; i < dim; ++i) w[i] = nums[static_cast<std::size_t>(i) + 1];
    return std::make_unique<LinearRegressor>(
        LinearSgd<double>(config.sgd_eta, config.sgd_iterations, std::move(w), nums[0], n));
  }
  PointMatrix<double> points;
  Vector<double> targets;
  read_points(in, n, dim, points, targets);
  switch (kind) {
    case LearnerKind::FixedKnn:
      return std::make_unique<FixedKnnRegressor>(
          FixedMemoryKnn<double>(config.knn_params(), std::move(points), std::move(targets)));
    case LearnerKind::PlainKnn:
      return std::make_unique<PlainKnnRegressor>(PlainKnn<double>(config.k, std::move(points), std::move(targets)));
    default:
      return std::make_unique<LastKKnnRegressor>(
          LastKKnn<double>(config.k, config.capacity, std::move(points), std::move(targets)));
  }
}

}  // namespace

std::unique_ptr<Regressor> make_regressor(const LearnerConfig& config) {
  switch (config.kind) {
    case LearnerKind::FixedKnn: return std::make_unique<FixedKnnRegressor>(FixedMemoryKnn<double>(config.knn_params()));
    case LearnerKind::PlainKnn: return std::make_unique<PlainKnnRegressor>(PlainKnn<double>(config.k));
    case LearnerKind::LastKKnn:
      return std::make_unique<LastKKnnRegressor>(LastKKnn<double>(config.k, config.capacity));
    case LearnerKind::LinearSgd:
      return std::make_unique<LinearRegressor>(LinearSgd<double>(config.sgd_eta, config.sgd_iterations));
  }
  throw ContractViolation("unknown learner kind");
}

LearnerRegistry::LearnerRegistry(LearnerConfig config)
    : config_(config), mutex_(std::make_unique<std::shared_mutex>()) {}
LearnerRegistry::LearnerRegistry(LearnerRegistry&&) noexcept = default;
LearnerRegistry& LearnerRegistry::operator=(LearnerRegistry&&) noexcept = default;
LearnerRegistry::~LearnerRegistry() = default;

std::optional<double> LearnerRegistry::predict(const FeatureSpaceKey& key, const FeatureVector& x) const {
  std::shared_lock lock(*mutex_);
  auto it = spaces_.find(key);
  if (it == spaces_.end()) return std::nullopt;
  return it->second->predict(x);
}

void LearnerRegistry::observe(const FeatureSpaceKey& key, const FeatureVector& x, double y) {
  std::unique_lock lock(*mutex_);
  auto& slot = spaces_[key];
  if (!slot) slot = make_regressor(config_);
  slot->observe(x, y);
}

bool LearnerRegistry::has_data(const FeatureSpaceKey& key) const {
  std::shared_lock lock(*mutex_);
  auto it = spaces_.find(key);
  return it != spaces_.end() && it->second->size() > 0;
}

const Regressor* LearnerRegistry::find(const FeatureSpaceKey& key) const {
  std::shared_lock lock(*mutex_);
  auto it = spaces_.find(key);
  return it == spaces_.end() ? nullptr : it->second.get();
}

namespace {
constexpr std::string_view kSnapshotMagic = "cardlearn-learner-snapshot";
constexpr int kSnapshotVersion = 1;
}  // namespace

void LearnerRegistry::save(std::ostream& out) const {
  std::shared_lock lock(*mutex_);
  out << kSnapshotMagic << ' ' << kSnapshotVersion << '\n';
  out << "config " << to_string(config_.kind) << ' ' << config_.k << ' ' << config_.capacity << ' '
      << format_double(config_.delta) << ' ' << format_double(config_.eta) << ' ' << format_double(config_.sgd_eta)
      << ' ' << config_.sgd_iterations << '\n';
  out << "iteration " << iteration << '\n';
  out << "spaces " << spaces_.size() << '\n';
  for (const auto& [key, model] : spaces_) {
    out << "space " << key.digest << '\n';
    model->save(out);
  }
  out << "end\n";
}

LearnerRegistry LearnerRegistry::load(std::istream& in) {
  {
    std::istringstream magic(next_line(in, "header"));
    std::string word;
    int version = 0;
    if (!(magic >> word >> version) || word != kSnapshotMagic) throw Error("not a learner snapshot");
    if (version != kSnapshotVersion) throw Error("unsupported learner snapshot version " + std::to_string(version));
  }
  LearnerConfig config;
  {
    std::istringstream line(next_line(in, "config"));
    std::string word, kind, delta, eta, sgd_eta;
    if (!(line >> word >> kind >> config.k >> config.capacity >> delta >> eta >> sgd_eta >> config.sgd_iterations) ||
        word != "config")
      throw Error("learner snapshot: bad config line");
    config.kind = parse_learner_kind(kind);
    config.delta = parse_double(delta);
    config.eta = parse_double(eta);
    config.sgd_eta = parse_double(sgd_eta);
  }
  LearnerRegistry registry(config);
  std::size_t count = 0;
  {
    std::istringstream line(next_line(in, "iteration"));
    std::string word;
    if (!(line >> word >> registry.iteration) || word != "iteration") throw Error("learner snapshot: bad iteration");
  }
  {
    std::istringstream line(next_line(in, "spaces"));
    std::string word;
    if (!(line >> word >> count) || word != "spaces") throw Error("learner snapshot: bad space count");
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::string line = next_line(in, "space");
    if (line.rfind("space ", 0) != 0) throw Error("learner snapshot: expected space line");
    FeatureSpaceKey key{line.substr(6)};
    registry.spaces_[key] = load_regressor(config, in);
  }
  if (next_line(in, "end") != "end") throw Error("learner snapshot: missing end marker");
  return registry;
}

}  // namespace cardlearn
