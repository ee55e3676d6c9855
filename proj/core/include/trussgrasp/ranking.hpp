#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trussgrasp/autoencoder.hpp"
#include "trussgrasp/knn.hpp"
#include "trussgrasp/patch.hpp"

namespace trussgrasp {

/// Scores every candidate and returns them sorted by descending score
/// (stable, so equal scores keep their input order).
std::vector<GraspPose> rank_candidates(const Autoencoder& model, const KnnStore& store,
                                       const PointCloud& cloud,
                                       const std::vector<GraspPose>& candidates,
                                       const PatchParams& params = {});

enum class Strategy { Random, Center, Ranking };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

struct RankingContext {
  const Autoencoder* model = nullptr;
  const KnnStore* store = nullptr;
  const PointCloud* cloud = nullptr;
  PatchParams params;
};

struct Selection {
  GraspPose pose;
  std::size_t index = 0;  // position in the input candidate list
};

/// random: uniform per seed; center: nearest to the box center in the image;
/// ranking: highest knn score, exact ties broken uniformly per seed.
Selection strategy_select(const std::vector<GraspPose>& candidates, const OrientedBBox2D& obb,
                          Strategy strategy, const CameraIntrinsics& intr, std::uint64_t seed,
                          const RankingContext& ranking = {});

struct DatasetRecord {
  GraspPatch patch;
  std::optional<int> label;
  std::string provenance;
  bool train = true;
};

class GraspDataset {
 public:
  void add(GraspPatch patch, std::optional<int> label, std::string provenance);
  /// Seeded shuffle; the first round(train_fraction * n) records train.
  void split(std::uint64_t seed, double train_fraction = 0.7);

  const std::vector<DatasetRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t labeled_count() const;
  std::size_t train_count() const;

  std::vector<GraspPatch> patches(bool train_only = false) const;

  void save_jsonl(const std::filesystem::path& path) const;
  static GraspDataset load_jsonl(const std::filesystem::path& path);

 private:
  std::vector<DatasetRecord> records_;
};

/// KNN store seeded with the latents (and flips) of every labeled training record.
KnnStore seed_store(const Autoencoder& model, const GraspDataset& dataset, int k = 10);

}  // namespace trussgrasp
