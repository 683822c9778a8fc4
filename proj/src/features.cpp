#include "namegate/features.hpp"

#include <algorithm>

namespace namegate {

FeatureStore::FeatureStore(const Dataset& dataset, bool keep_frames) : dataset_(&dataset) {
  const std::size_t n = dataset.entries.size();
  if (n == 0) throw EmptyInputError("feature store: dataset has no entries");
  for (std::size_t i = 0; i < n; ++i) {
    Matrix frames = dataset.load_frames(i);
    if (i == 0) pooled_ = Matrix(n, frames.cols());
    if (frames.cols() != pooled_.cols()) {
      throw ConsistencyError("recording " + dataset.entries[i].recording_id + " has dim " +
                             std::to_string(frames.cols()) + ", expected " +
                             std::to_string(pooled_.cols()));
    }
    const auto mean = pool_mean(frames);
    std::copy(mean.data().begin(), mean.data().end(), pooled_.row(i).begin());
    if (keep_frames) frames_.push_back(std::move(frames));
  }
}

Matrix FeatureStore::pooled_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), pooled_.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = pooled_.row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

const Matrix& FeatureStore::frames(std::size_t index) const {
  if (frames_.empty()) throw StateError("feature store was built without frames");
  return frames_.at(index);
}

RecordingFeatures FeatureStore::features(std::size_t index) const {
  RecordingFeatures f;
  f.pooled = pooled_rows(std::span<const std::size_t>(&index, 1));
  f.frames = frames_.empty() ? nullptr : &frames_.at(index);
  return f;
}

}  // namespace namegate
