#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "osda/matrix.hpp"

namespace osda {

/// Target-domain feature vectors, one row per sample.
struct EmbeddingSet {
  Matrix data;
  std::vector<std::uint64_t> ids;

  EmbeddingSet() = default;
  /// ids default to the row index.
  explicit EmbeddingSet(Matrix m);

  Eigen::Index n() const noexcept { return data.rows(); }
  Eigen::Index d() const noexcept { return data.cols(); }
};

/// Unnormalized source-model outputs, row-aligned with an EmbeddingSet.
struct SourceLogits {
  Matrix data;

  Eigen::Index n() const noexcept { return data.rows(); }
  Eigen::Index c() const noexcept { return data.cols(); }
};

/// Ground truth. Labels >= num_closed denote open-set classes.
struct LabelSet {
  std::vector<std::uint32_t> labels;
  std::uint32_t num_closed = 0;

  Eigen::Index n() const noexcept { return static_cast<Eigen::Index>(labels.size()); }
  bool is_open(std::size_t i) const { return labels[i] >= num_closed; }
};

struct AlignedDataset {
  EmbeddingSet embeddings;
  SourceLogits logits;
  std::optional<LabelSet> labels;

  Eigen::Index n() const noexcept { return embeddings.n(); }
};

EmbeddingSet load_embeddings(const std::filesystem::path& path);
SourceLogits load_logits(const std::filesystem::path& path);
/// `num_closed` is not stored in the file; callers pass the closed-set class count.
LabelSet load_labels(const std::filesystem::path& path, std::uint32_t num_closed);

void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& e);
void write_logits(const std::filesystem::path& path, const SourceLogits& l);
void write_labels(const std::filesystem::path& path, const LabelSet& y);

/// Bundles the three artifacts once their sample counts agree. Logits need at
/// least two classes and the labels' closed-set count must equal the logits'.
AlignedDataset validate_alignment(EmbeddingSet e, SourceLogits l, std::optional<LabelSet> y = std::nullopt);

}  // namespace osda
