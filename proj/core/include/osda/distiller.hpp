#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "osda/embstore.hpp"
#include "osda/matrix.hpp"
#include "osda/protolab.hpp"

namespace osda {

enum class HeadKind : std::uint32_t { Linear = 0, Mlp1 = 1 };

/// Classifier head over frozen embeddings.
///
/// Parameters are stored flat. Linear: W (c x d, row-major) then b (c).
/// Mlp1: W1 (h x d), b1 (h), W2 (c x h), b2 (c), with a ReLU between layers.
struct StudentHead {
  HeadKind kind = HeadKind::Linear;
  int d = 0;
  int c = 0;
  int h = 0;
  Vector params;

  static std::size_t param_count(HeadKind kind, int d, int c, int h);
};

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
StudentHead init_head(HeadKind kind, int d, int c, int h, std::uint64_t seed);

enum class DistillLoss { L2, L1, Ce };

std::string_view to_string(DistillLoss loss) noexcept;
std::optional<DistillLoss> parse_distill_loss(std::string_view name) noexcept;
std::optional<HeadKind> parse_head_kind(std::string_view name) noexcept;

struct TrainConfig {
  DistillLoss loss = DistillLoss::L2;
  int epochs = 200;
  /// 0 trains on the full batch every step.
  int batch_size = 0;
  double learning_rate = 1e-3;
  /// Heavy-ball momentum; 0 gives plain gradient descent.
  double momentum = 0.0;
  std::uint64_t seed = 0;
};

struct TrainResult {
  StudentHead head;
  /// Mean batch loss per epoch, measured before each update.
  std::vector<double> history;
};

/// Per-sample mean of the chosen loss between outputs and targets:
///   l2: ||o - t||^2,  l1: ||o - t||_1,  ce: H(softmax(t), softmax(o)).
double distill_loss(DistillLoss loss, const Matrix& outputs, const Matrix& targets);

/// Loss of the head on (x, targets); writes the parameter gradient when asked.
double head_loss(const StudentHead& head, const Matrix& x, const Matrix& targets, DistillLoss loss,
                 Vector* grad = nullptr);

TrainResult train_distill(StudentHead head, const EmbeddingSet& e, const PseudoLabelSet& targets,
                          const TrainConfig& cfg);

Matrix predict(const StudentHead& head, const Matrix& x);
Matrix predict(const StudentHead& head, const EmbeddingSet& e);

/// "HED1": magic, kind, d, c, h, parameter count, float32 parameters.
void write_head(const std::filesystem::path& path, const StudentHead& head);
StudentHead read_head(const std::filesystem::path& path);

}  // namespace osda
