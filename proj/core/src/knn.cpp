#include "trussgrasp/knn.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

#include "trussgrasp/error.hpp"
#include "trussgrasp/io.hpp"

namespace trussgrasp {

void KnnStore::validate() const {
  if (k < 1) fail(ErrorKind::Config, "k must be at least 1");
  for (const auto& e : entries) {
    if (e.label != 0 && e.label != 1) fail(ErrorKind::InvalidInput, "KNN labels must be 0 or 1");
    if (!e.latent.allFinite()) fail(ErrorKind::InvalidInput, "KNN latent is not finite");
    if (e.latent.size() != entries.front().latent.size())
      fail(ErrorKind::InvalidInput, "KNN latents differ in size");
  }
}

double knn_score(const KnnStore& store, const Latent& latent) {
  if (store.k < 1) fail(ErrorKind::Config, "k must be at least 1");
  if (store.empty()) fail(ErrorKind::Untrained, "KNN store is empty");
  struct Hit {
    double dist;
    std::size_t index;
  };
  std::vector<Hit> hits;
  hits.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& e = store.entries[i].latent;
    if (e.size() != latent.size()) fail(ErrorKind::InvalidInput, "latent size mismatch");
    hits.push_back({std::max((e - latent).norm(), kKnnDistanceFloor), i});
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    return a.dist < b.dist || (a.dist == b.dist && a.index < b.index);
  });
  // Everything tied with the k-th nearest votes too.
  std::size_t m = std::min(static_cast<std::size_t>(store.k), hits.size());
  while (m < hits.size() && hits[m].dist == hits[m - 1].dist) ++m;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double w = 1.0 / hits[i].dist;
    num += w * store.entries[hits[i].index].label;
    den += w;
  }
  return std::clamp(num / den, 0.0, 1.0);
}

KnnStore refit(const KnnStore& store, const Latent& latent, int label) {
  if (label != 0 && label != 1) fail(ErrorKind::InvalidInput, "KNN labels must be 0 or 1");
  if (!latent.allFinite()) fail(ErrorKind::InvalidInput, "KNN latent is not finite");
  KnnStore out = store;
  out.entries.push_back({latent, label});
  return out;
}

KnnStore refit(const KnnStore& store, const Autoencoder& model, const GraspPatch& patch,
               int label) {
  if (label != 0 && label != 1) fail(ErrorKind::InvalidInput, "KNN labels must be 0 or 1");
  KnnStore out = store;
  for (const auto& p : augment(patch)) out.entries.push_back({model.encode(p), label});
  return out;
}

nlohmann::json knn_to_json(const KnnStore& store) {
  nlohmann::json j;
  j["k"] = store.k;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : store.entries)
    j["entries"].push_back(
        {{"latent", io::encode_f64_array(std::span<const double>(
                        e.latent.data(), static_cast<std::size_t>(e.latent.size())))},
         {"label", e.label}});
  return j;
}

KnnStore knn_from_json(const nlohmann::json& j) {
  KnnStore s;
  try {
    s.k = j.at("k").get<int>();
    for (const auto& e : j.at("entries")) {
      const auto v = io::decode_f64_array(e.at("latent").get<std::string>());
      s.entries.push_back(
          {Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())),
           e.at("label").get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed KNN document: ") + e.what());
  }
  s.validate();
  return s;
}

OnlineClassifier::OnlineClassifier(KnnStore initial)
    : store_(std::make_shared<const KnnStore>(std::move(initial))) {}

std::shared_ptr<const KnnStore> OnlineClassifier::snapshot() const {
  std::lock_guard lock(mutex_);
  return store_;
}

double OnlineClassifier::score(const Latent& latent) const { return knn_score(*snapshot(), latent); }

void OnlineClassifier::add(const Autoencoder& model, const GraspPatch& patch, int label) {
  auto next = std::make_shared<const KnnStore>(refit(*snapshot(), model, patch, label));
  std::lock_guard lock(mutex_);
  store_ = std::move(next);
}

void OnlineClassifier::reset(KnnStore store) {
  auto next = std::make_shared<const KnnStore>(std::move(store));
  std::lock_guard lock(mutex_);
  store_ = std::move(next);
}

}  // namespace trussgrasp
