#include "trussgrasp/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>

#include "trussgrasp/error.hpp"
#include "trussgrasp/io.hpp"
#include "trussgrasp/rng.hpp"

namespace trussgrasp {

std::vector<GraspPose> rank_candidates(const Autoencoder& model, const KnnStore& store,
                                       const PointCloud& cloud,
                                       const std::vector<GraspPose>& candidates,
                                       const PatchParams& params) {
  if (candidates.empty()) fail(ErrorKind::InvalidInput, "nothing to rank");
  std::vector<GraspPose> scored = candidates;
  for (auto& c : scored) c.score = knn_score(store, model.encode(extract_patch(cloud, c, params)));
  std::stable_sort(scored.begin(), scored.end(),
                   [](const GraspPose& a, const GraspPose& b) { return *a.score > *b.score; });
  return scored;
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Random: return "random";
    case Strategy::Center: return "center";
    case Strategy::Ranking: return "ranking";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "random") return Strategy::Random;
  if (name == "center") return Strategy::Center;
  if (name == "ranking") return Strategy::Ranking;
  fail(ErrorKind::Config, "unknown strategy '" + name + "'");
}

Selection strategy_select(const std::vector<GraspPose>& candidates, const OrientedBBox2D& obb,
                          Strategy strategy, const CameraIntrinsics& intr, std::uint64_t seed,
                          const RankingContext& ranking) {
  if (candidates.empty()) fail(ErrorKind::InvalidInput, "no grasp candidates");
  switch (strategy) {
    case Strategy::Random: {
      Rng rng(derive_seed(seed, 0x5e1));
      const auto i = static_cast<std::size_t>(rng.below(candidates.size()));
      return {candidates[i], i};
    }
    case Strategy::Center: {
      const Vec2 c = obb.center();
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double d = (project(candidates[i].position, intr).pixel - c).norm();
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      return {candidates[best], best};
    }
    case Strategy::Ranking: {
      if (!ranking.model || !ranking.store || !ranking.cloud)
        fail(ErrorKind::Untrained, "ranking needs a model, a KNN store and a cloud");
      double best_s = -1.0;
      std::vector<std::size_t> tied;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double s = knn_score(
            *ranking.store,
            ranking.model->encode(extract_patch(*ranking.cloud, candidates[i], ranking.params)));
        if (s > best_s) {
          best_s = s;
          tied.clear();
        }
        if (s == best_s) tied.push_back(i);
      }
      // Exact ties (e.g. identical empty patches) are broken uniformly.
      std::size_t best = tied.front();
      if (tied.size() > 1) {
        Rng rng(derive_seed(seed, 0x71e));
        best = tied[static_cast<std::size_t>(rng.below(tied.size()))];
      }
      GraspPose pose = candidates[best];
      pose.score = best_s;
      return {pose, best};
    }
  }
  fail(ErrorKind::InvalidInput, "unknown strategy");
}

// ---------------------------------------------------------------------------

void GraspDataset::add(GraspPatch patch, std::optional<int> label, std::string provenance) {
  patch.validate();
  if (label && *label != 0 && *label != 1) fail(ErrorKind::InvalidInput, "labels must be 0 or 1");
  records_.push_back({std::move(patch), label, std::move(provenance), true});
}

void GraspDataset::split(std::uint64_t seed, double train_fraction) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
    fail(ErrorKind::Config, "train fraction must lie in [0, 1]");
  std::vector<std::size_t> order(records_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5b117));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_train = static_cast<std::size_t>(
      std::lround(train_fraction * static_cast<double>(records_.size())));
  for (std::size_t i = 0; i < order.size(); ++i) records_[order[i]].train = i < n_train;
}

std::size_t GraspDataset::labeled_count() const {
  return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(),
                                                [](const auto& r) { return r.label.has_value(); }));
}

std::size_t GraspDataset::train_count() const {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [](const auto& r) { return r.train; }));
}

std::vector<GraspPatch> GraspDataset::patches(bool train_only) const {
  std::vector<GraspPatch> out;
  for (const auto& r : records_)
    if (!train_only || r.train) out.push_back(r.patch);
  return out;
}

void GraspDataset::save_jsonl(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  for (const auto& r : records_) {
    io::FloatImage img{r.patch.resolution, r.patch.resolution, r.patch.values};
    nlohmann::json j;
    j["patch"] = io::base64_encode(io::encode_pfm(img));
    j["empty"] = r.patch.empty;
    j["label"] = r.label ? nlohmann::json(*r.label) : nlohmann::json(nullptr);
    j["provenance"] = r.provenance;
    j["split"] = r.train ? "train" : "validation";
    out << j.dump() << '\n';
  }
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

GraspDataset GraspDataset::load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  GraspDataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto img = io::decode_pfm(io::base64_decode(j.at("patch").get<std::string>()));
      if (img.width != img.height) fail(ErrorKind::Config, "dataset patch is not square");
      DatasetRecord r;
      r.patch.resolution = img.width;
      r.patch.values = img.values;
      r.patch.empty = j.at("empty").get<bool>();
      r.patch.validate();
      if (!j.at("label").is_null()) r.label = j.at("label").get<int>();
      r.provenance = j.at("provenance").get<std::string>();
      r.train = j.at("split").get<std::string>() == "train";
      ds.records_.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Config,
           path.string() + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    }
  }
  return ds;
}

KnnStore seed_store(const Autoencoder& model, const GraspDataset& dataset, int k) {
  KnnStore store;
  store.k = k;
  for (const auto& r : dataset.records())
    if (r.label && r.train)
      for (const auto& p : augment(r.patch)) store.entries.push_back({model.encode(p), *r.label});
  return store;
}

}  // namespace trussgrasp
