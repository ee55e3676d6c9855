#include "trussgrasp/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "trussgrasp/error.hpp"
#include "trussgrasp/io.hpp"
#include "trussgrasp/rng.hpp"

namespace trussgrasp {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kModelSchemaVersion = 1;

Eigen::VectorXd flip_grid(const Eigen::VectorXd& g, bool ud, bool lr) {
  constexpr int n = Autoencoder::kGrid;
  Eigen::VectorXd out(g.size());
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      out[(ud ? n - 1 - r : r) * n + (lr ? n - 1 - c : c)] = g[r * n + c];
  return out;
}

Eigen::MatrixXd stack(const std::vector<PooledPatch>& batch, std::span<const std::size_t> idx) {
  Eigen::MatrixXd x(Autoencoder::kInput, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = batch[idx[i]].grid;
  return x;
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

void check_resolution(int resolution) {
  if (resolution < Autoencoder::kGrid || resolution % Autoencoder::kGrid != 0)
    fail(ErrorKind::Config, "patch resolution must be a positive multiple of 16");
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !(weight_decay >= 0.0) || !(epsilon > 0.0))
    fail(ErrorKind::Config, "optimizer rates must be positive");
  if (!(beta > 0.0 && beta < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
    fail(ErrorKind::Config, "moment decays must lie in (0, 1)");
  if (epochs < 1) fail(ErrorKind::Config, "training needs at least one epoch");
  if (batch_size < 1) fail(ErrorKind::Config, "batch size must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    fail(ErrorKind::Config, "validation fraction must lie in [0, 1)");
}

PooledPatch pool_patch(const GraspPatch& patch) {
  check_resolution(patch.resolution);
  const int block = patch.resolution / Autoencoder::kGrid;
  PooledPatch out;
  out.resolution = patch.resolution;
  out.grid = Eigen::VectorXd::Zero(Autoencoder::kInput);
  const double area = static_cast<double>(block * block);
  for (int br = 0; br < Autoencoder::kGrid; ++br) {
    for (int bc = 0; bc < Autoencoder::kGrid; ++bc) {
      double sum = 0.0;
      double sum2 = 0.0;
      for (int r = br * block; r < (br + 1) * block; ++r) {
        for (int c = bc * block; c < (bc + 1) * block; ++c) {
          const double x = patch.at(r, c);
          sum += x;
          sum2 += x * x;
        }
      }
      const double mean = sum / area;
      out.grid[br * Autoencoder::kGrid + bc] = mean;
      out.within_sse += std::max(0.0, sum2 - area * mean * mean);
    }
  }
  return out;
}

Autoencoder::Autoencoder(int resolution, std::uint64_t seed) : resolution_(resolution) {
  check_resolution(resolution);
  Rng rng(derive_seed(seed, 0xae));
  const double limit = std::sqrt(6.0 / (kInput + kLatent));
  w1_.resize(kLatent, kInput);
  w2_.resize(kInput, kLatent);
  for (Eigen::Index i = 0; i < w1_.size(); ++i) w1_.data()[i] = rng.uniform(-limit, limit);
  for (Eigen::Index i = 0; i < w2_.size(); ++i) w2_.data()[i] = rng.uniform(-limit, limit);
  b1_ = Eigen::VectorXd::Zero(kLatent);
  b2_ = Eigen::VectorXd::Zero(kInput);
}

Autoencoder::Forward Autoencoder::forward(const Eigen::MatrixXd& inputs) const {
  Forward f;
  f.hidden = ((w1_ * inputs).colwise() + b1_).array().tanh().matrix();
  f.output = (w2_ * f.hidden).colwise() + b2_;
  return f;
}

void Autoencoder::require_trained() const {
  if (!trained_) fail(ErrorKind::Untrained, "autoencoder has not been trained");
}

Latent Autoencoder::encode(const GraspPatch& patch) const {
  require_trained();
  if (patch.resolution != resolution_) fail(ErrorKind::InvalidInput, "patch resolution mismatch");
  const PooledPatch p = pool_patch(patch);
  return ((w1_ * p.grid + b1_).array().tanh()).matrix();
}

GraspPatch Autoencoder::decode(const Latent& latent) const {
  require_trained();
  if (latent.size() != kLatent) fail(ErrorKind::InvalidInput, "latent has the wrong size");
  const Eigen::VectorXd grid = w2_ * latent + b2_;
  const int block = resolution_ / kGrid;
  GraspPatch out = GraspPatch::background(resolution_);
  out.empty = false;
  for (int r = 0; r < resolution_; ++r)
    for (int c = 0; c < resolution_; ++c)
      out.values[static_cast<std::size_t>(r * resolution_ + c)] =
          static_cast<float>(std::clamp(grid[(r / block) * kGrid + c / block], 0.0, 1.0));
  return out;
}

double Autoencoder::mse(const GraspPatch& patch) const {
  if (patch.resolution != resolution_) fail(ErrorKind::InvalidInput, "patch resolution mismatch");
  const PooledPatch p = pool_patch(patch);
  const Eigen::VectorXd y = w2_ * ((w1_ * p.grid + b1_).array().tanh()).matrix() + b2_;
  const int block = resolution_ / kGrid;
  double sse = 0.0;
  for (int r = 0; r < resolution_; ++r) {
    for (int c = 0; c < resolution_; ++c) {
      const double d = patch.at(r, c) - y[(r / block) * kGrid + c / block];
      sse += d * d;
    }
  }
  return sse / (static_cast<double>(resolution_) * resolution_);
}

double Autoencoder::loss(const std::vector<PooledPatch>& batch) const {
  if (batch.empty()) fail(ErrorKind::InvalidInput, "loss of an empty batch");
  const auto idx = iota(batch.size());
  const Eigen::MatrixXd x = stack(batch, idx);
  const Forward f = forward(x);
  const double pixels = static_cast<double>(resolution_) * resolution_;
  const double area = pixels / kInput;
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    total += (batch[i].within_sse +
              area * (x.col(static_cast<Eigen::Index>(i)) - f.output.col(static_cast<Eigen::Index>(i)))
                         .squaredNorm()) /
             pixels;
  return total / static_cast<double>(batch.size());
}

std::vector<double> Autoencoder::gradient(const std::vector<PooledPatch>& batch) const {
  if (batch.empty()) fail(ErrorKind::InvalidInput, "gradient of an empty batch");
  const auto idx = iota(batch.size());
  const Eigen::MatrixXd x = stack(batch, idx);
  const Forward f = forward(x);
  const double pixels = static_cast<double>(resolution_) * resolution_;
  const double scale = -2.0 * (pixels / kInput) / pixels / static_cast<double>(batch.size());
  const Eigen::MatrixXd dy = scale * (x - f.output);
  const Eigen::MatrixXd da =
      ((w2_.transpose() * dy).array() * (1.0 - f.hidden.array().square())).matrix();
  const Eigen::MatrixXd gw1 = da * x.transpose();
  const Eigen::VectorXd gb1 = da.rowwise().sum();
  const Eigen::MatrixXd gw2 = dy * f.hidden.transpose();
  const Eigen::VectorXd gb2 = dy.rowwise().sum();
  std::vector<double> g;
  g.reserve(parameter_count());
  g.insert(g.end(), gw1.data(), gw1.data() + gw1.size());
  g.insert(g.end(), gb1.data(), gb1.data() + gb1.size());
  g.insert(g.end(), gw2.data(), gw2.data() + gw2.size());
  g.insert(g.end(), gb2.data(), gb2.data() + gb2.size());
  return g;
}

std::size_t Autoencoder::parameter_count() const {
  return static_cast<std::size_t>(w1_.size() + b1_.size() + w2_.size() + b2_.size());
}

double* Autoencoder::param_ptr(std::size_t i) {
  std::size_t n = static_cast<std::size_t>(w1_.size());
  if (i < n) return w1_.data() + i;
  i -= n;
  n = static_cast<std::size_t>(b1_.size());
  if (i < n) return b1_.data() + i;
  i -= n;
  n = static_cast<std::size_t>(w2_.size());
  if (i < n) return w2_.data() + i;
  i -= n;
  n = static_cast<std::size_t>(b2_.size());
  if (i < n) return b2_.data() + i;
  fail(ErrorKind::InvalidInput, "parameter index out of range");
}

double Autoencoder::parameter(std::size_t i) const {
  return *const_cast<Autoencoder*>(this)->param_ptr(i);
}

void Autoencoder::set_parameter(std::size_t i, double value) { *param_ptr(i) = value; }

Autoencoder train_autoencoder(const std::vector<GraspPatch>& patches, const TrainConfig& cfg) {
  cfg.validate();
  if (patches.empty()) fail(ErrorKind::InvalidInput, "cannot train on an empty dataset");
  const int res = patches.front().resolution;
  for (const auto& p : patches)
    if (p.resolution != res) fail(ErrorKind::InvalidInput, "patches differ in resolution");

  Rng rng(derive_seed(cfg.seed, 0x7a1));
  auto order = iota(patches.size());
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_val = static_cast<std::size_t>(
      std::lround(cfg.validation_fraction * static_cast<double>(patches.size())));
  if (n_val >= patches.size()) fail(ErrorKind::InvalidInput, "no patches left for training");

  std::vector<PooledPatch> train, val;
  for (std::size_t i = 0; i < order.size(); ++i) {
    PooledPatch p = pool_patch(patches[order[i]]);
    if (i < n_val) {
      val.push_back(std::move(p));
      continue;
    }
    if (cfg.augment) {
      for (auto [ud, lr] : {std::pair{true, false}, std::pair{false, true}, std::pair{true, true}}) {
        PooledPatch f = p;
        f.grid = flip_grid(p.grid, ud, lr);
        train.push_back(std::move(f));
      }
    }
    train.push_back(std::move(p));
  }
  if (train.size() < static_cast<std::size_t>(cfg.batch_size))
    fail(ErrorKind::InvalidInput, "fewer training samples than one batch");

  Autoencoder model(res, cfg.seed);
  model.config_ = cfg;
  auto& hist = model.history_;
  hist.train_samples = train.size();
  hist.validation_samples = val.size();
  hist.initial_train_mse = model.loss(train);
  hist.initial_validation_mse = val.empty() ? 0.0 : model.loss(val);

  const std::size_t n_params = model.parameter_count();
  std::vector<double*> params(n_params);
  for (std::size_t k = 0; k < n_params; ++k) params[k] = model.param_ptr(k);
  std::vector<double> m(n_params, 0.0), v(n_params, 0.0);
  double b1t = 1.0, b2t = 1.0;
  auto batch_order = iota(train.size());
  std::vector<PooledPatch> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = batch_order.size(); i > 1; --i)
      std::swap(batch_order[i - 1], batch_order[rng.below(i)]);
    for (std::size_t start = 0; start < batch_order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(batch_order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train[batch_order[i]]);
      const auto g = model.gradient(batch);
      b1t *= cfg.beta;
      b2t *= cfg.beta2;
      for (std::size_t k = 0; k < n_params; ++k) {
        double* theta = params[k];
        const double gk = g[k] + cfg.weight_decay * *theta;
        m[k] = cfg.beta * m[k] + (1.0 - cfg.beta) * gk;
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
        const double mhat = m[k] / (1.0 - b1t);
        const double vhat = v[k] / (1.0 - b2t);
        *theta -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
      }
    }
    hist.train_mse.push_back(model.loss(train));
    hist.validation_mse.push_back(val.empty() ? 0.0 : model.loss(val));
  }
  model.trained_ = true;
  return model;
}

nlohmann::json Autoencoder::to_json() const {
  auto enc = [](const auto& mat) {
    const RowMajor rm = mat;
    return io::encode_f64_array(std::span<const double>(rm.data(), static_cast<std::size_t>(rm.size())));
  };
  nlohmann::json j;
  j["schema_version"] = kModelSchemaVersion;
  j["resolution"] = resolution_;
  j["latent_dim"] = kLatent;
  j["trained"] = trained_;
  j["encoder"] = {{"weight", enc(w1_)}, {"bias", enc(b1_)}, {"rows", kLatent}, {"cols", kInput}};
  j["decoder"] = {{"weight", enc(w2_)}, {"bias", enc(b2_)}, {"rows", kInput}, {"cols", kLatent}};
  j["train_config"] = {{"learning_rate", config_.learning_rate},
                       {"weight_decay", config_.weight_decay},
                       {"beta", config_.beta},
                       {"beta2", config_.beta2},
                       {"epsilon", config_.epsilon},
                       {"epochs", config_.epochs},
                       {"batch_size", config_.batch_size},
                       {"validation_fraction", config_.validation_fraction},
                       {"augment", config_.augment},
                       {"seed", config_.seed}};
  j["history"] = {{"initial_train_mse", history_.initial_train_mse},
                  {"initial_validation_mse", history_.initial_validation_mse},
                  {"train_mse", history_.train_mse},
                  {"validation_mse", history_.validation_mse},
                  {"train_samples", history_.train_samples},
                  {"validation_samples", history_.validation_samples}};
  return j;
}

Autoencoder Autoencoder::from_json(const nlohmann::json& j) {
  Autoencoder a;
  try {
    if (j.at("schema_version").get<int>() != kModelSchemaVersion)
      fail(ErrorKind::Config, "unsupported model schema_version");
    if (j.at("latent_dim").get<int>() != kLatent) fail(ErrorKind::Config, "latent size mismatch");
    a.resolution_ = j.at("resolution").get<int>();
    check_resolution(a.resolution_);
    a.trained_ = j.at("trained").get<bool>();
    auto dec = [](const nlohmann::json& jj, int rows, int cols) {
      const auto v = io::decode_f64_array(jj.get<std::string>());
      if (v.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
        fail(ErrorKind::Config, "weight array has the wrong size");
      return Eigen::MatrixXd(Eigen::Map<const RowMajor>(v.data(), rows, cols));
    };
    a.w1_ = dec(j.at("encoder").at("weight"), kLatent, kInput);
    a.b1_ = dec(j.at("encoder").at("bias"), kLatent, 1);
    a.w2_ = dec(j.at("decoder").at("weight"), kInput, kLatent);
    a.b2_ = dec(j.at("decoder").at("bias"), kInput, 1);
    const auto& c = j.at("train_config");
    a.config_.learning_rate = c.at("learning_rate").get<double>();
    a.config_.weight_decay = c.at("weight_decay").get<double>();
    a.config_.beta = c.at("beta").get<double>();
    a.config_.beta2 = c.at("beta2").get<double>();
    a.config_.epsilon = c.at("epsilon").get<double>();
    a.config_.epochs = c.at("epochs").get<int>();
    a.config_.batch_size = c.at("batch_size").get<int>();
    a.config_.validation_fraction = c.at("validation_fraction").get<double>();
    a.config_.augment = c.at("augment").get<bool>();
    a.config_.seed = c.at("seed").get<std::uint64_t>();
    const auto& h = j.at("history");
    a.history_.initial_train_mse = h.at("initial_train_mse").get<double>();
    a.history_.initial_validation_mse = h.at("initial_validation_mse").get<double>();
    a.history_.train_mse = h.at("train_mse").get<std::vector<double>>();
    a.history_.validation_mse = h.at("validation_mse").get<std::vector<double>>();
    a.history_.train_samples = h.at("train_samples").get<std::size_t>();
    a.history_.validation_samples = h.at("validation_samples").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed model document: ") + e.what());
  }
  return a;
}

}  // namespace trussgrasp
