#pragma once

#include <vector>

#include "namegate/dataio.hpp"
#include "namegate/models.hpp"

namespace namegate {

// All recordings of a Dataset loaded once: mean-pooled rows always, frame
// matrices when asked for (the CTC path needs them).
class FeatureStore {
 public:
  FeatureStore(const Dataset& dataset, bool keep_frames);

  const Dataset& dataset() const noexcept { return *dataset_; }
  std::size_t size() const noexcept { return pooled_.rows(); }
  std::size_t dim() const noexcept { return pooled_.cols(); }
  bool has_frames() const noexcept { return !frames_.empty(); }

  const Matrix& pooled() const noexcept { return pooled_; }
  Matrix pooled_rows(std::span<const std::size_t> indices) const;
  const Matrix& frames(std::size_t index) const;
  RecordingFeatures features(std::size_t index) const;

 private:
  const Dataset* dataset_;
  Matrix pooled_;
  std::vector<Matrix> frames_;
};

}  // namespace namegate
