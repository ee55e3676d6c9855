#pragma once

#include <memory>
#include <mutex>
#include <nlohmann/json_fwd.hpp>
#include <vector>

#include "trussgrasp/autoencoder.hpp"

namespace trussgrasp {

struct KnnEntry {
  Latent latent;
  int label = 0;  // 1 success, 0 failure
};

struct KnnStore {
  std::vector<KnnEntry> entries;
  int k = 10;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
  void validate() const;
};

inline constexpr double kKnnDistanceFloor = 1e-9;

/// Inverse-distance weighted vote of the min(k, n) nearest entries
/// (Euclidean, floored at kKnnDistanceFloor). Entries tied with the k-th
/// nearest distance vote as well, so the score ignores insertion order.
double knn_score(const KnnStore& store, const Latent& latent);

/// Copy of `store` with one more entry.
KnnStore refit(const KnnStore& store, const Latent& latent, int label);

/// Copy of `store` with the latents of all four flips of `patch`.
KnnStore refit(const KnnStore& store, const Autoencoder& model, const GraspPatch& patch,
               int label);

nlohmann::json knn_to_json(const KnnStore& store);
KnnStore knn_from_json(const nlohmann::json& doc);

/// Shared scoring state with a single writer. Readers take a snapshot and
/// always see a complete store, either before or after a refit.
class OnlineClassifier {
 public:
  explicit OnlineClassifier(KnnStore initial = {});

  std::shared_ptr<const KnnStore> snapshot() const;
  double score(const Latent& latent) const;
  void add(const Autoencoder& model, const GraspPatch& patch, int label);
  void reset(KnnStore store);

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const KnnStore> store_;
};

}  // namespace trussgrasp
