#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "osda/color_ops.hpp"
#include "osda/image.hpp"
#include "osda/matrix.hpp"
#include "osda/rng.hpp"

// Desk-scale teacher/student self-distillation with an adversarial style
// augmenter. The encoder is a toy stand-in: frozen random projection of a
// pooled image grid followed by a trainable projection head.
namespace osda {

struct CropRect {
  int y = 0;
  int x = 0;
  int h = 0;
  int w = 0;

  bool operator==(const CropRect&) const = default;
};

struct CropConfig {
  int global_size = 24;
  int local_size = 12;
  int n_global = 2;
  int n_local = 8;
};

struct CropSet {
  std::vector<CropRect> global;
  std::vector<CropRect> local;
};

/// Square crops at seeded positions. ImageTooSmall when the image cannot hold
/// a global crop.
CropSet make_crops(const ImageTensor& x, std::uint64_t seed, const CropConfig& cfg = {});
ImageTensor crop(const ImageTensor& x, const CropRect& r);

/// Random color jitter for the non-adversarial views: with probability 0.5
/// the chain is applied with every magnitude uniform in [0.35, 0.65].
ImageTensor default_jitter(const ImageTensor& x, Rng& rng);

/// H(p, q) = -sum p log q.
double cross_entropy(const Vector& p, const Vector& q);

/// Sum over teacher global views i of H(t_i, s_j) for every student global
/// view j != i plus H(t_i, s_l) for every local view l. Every row must be a
/// probability vector (non-negative, sums to 1 within 1e-9).
double dino_loss(std::span<const Vector> teacher_global, std::span<const Vector> student_global,
                 std::span<const Vector> student_local);

/// teacher <- nu * teacher + (1 - nu) * student, evaluated with compensated
/// arithmetic so the result is the correctly rounded convex combination in
/// all but pathological cases.
Vector ema_update(const Vector& teacher, const Vector& student, double nu);

struct EncoderConfig {
  int grid = 4;
  int embed_dim = 32;
  int out_dim = 16;
  double teacher_temp = 0.04;
  double student_temp = 0.1;
  std::uint64_t seed = 0;
};

struct ToyEncoder {
  int grid = 4;
  /// embed_dim x (grid * grid * 3), frozen.
  Matrix backbone;
  /// out_dim x embed_dim projection heads.
  Matrix teacher_head;
  Matrix student_head;
  double teacher_temp = 0.04;
  double student_temp = 0.1;

  int embed_dim() const { return static_cast<int>(backbone.rows()); }
  int out_dim() const { return static_cast<int>(teacher_head.rows()); }
};

ToyEncoder make_toy_encoder(const EncoderConfig& cfg);

/// Adaptive average pooling of the image onto a grid x grid x 3 vector.
Vector pool_grid(const ImageTensor& x, int grid);
/// tanh(backbone * pool_grid(x)).
Vector encode(const ToyEncoder& enc, const ImageTensor& x);
Vector teacher_probs(const ToyEncoder& enc, const ImageTensor& x);
Vector student_probs(const ToyEncoder& enc, const ImageTensor& x);

/// Two-layer perceptron mapping a teacher embedding to six magnitudes in
/// (0, 1) through a sigmoid. Params: W1 (hidden x in), b1, W2 (6 x hidden), b2.
struct StyleNet {
  int in_dim = 0;
  int hidden = 64;
  Vector params;
};

StyleNet init_style_net(int in_dim, int hidden, std::uint64_t seed);
StyleMagnitudes style_magnitudes(const StyleNet& net, const Vector& embedding);

/// Fixed per-image randomness for one loss evaluation: the jittered global
/// and local views, the un-augmented second global crop and the teacher
/// embedding the style net reads.
struct Episode {
  ImageTensor global1;
  ImageTensor global2_base;
  std::vector<ImageTensor> locals;
  Vector teacher_embedding;
};

Episode make_episode(const ImageTensor& x, const ToyEncoder& enc, std::uint64_t seed, const CropConfig& crops = {});

/// Mean self-distillation loss over the episodes with the second global view
/// styled by `net`. Writes dL/d(style params) when `grad` is given.
double style_objective(const StyleNet& net, const ToyEncoder& enc, std::span<const Episode> batch,
                       Vector* grad = nullptr);

/// One gradient-ascent step of the style net on the batch loss, encoder
/// frozen. Throws NonFiniteGradient on divergence.
StyleNet adversarial_step(const StyleNet& net, const ToyEncoder& enc, std::span<const Episode> batch, double lr_adv);

/// One gradient-descent step of the student head with the teacher held
/// fixed and the style net's current magnitudes. Returns the batch loss
/// before the step.
double student_step(ToyEncoder& enc, const StyleNet& net, std::span<const Episode> batch, double lr);

/// Moves the teacher head toward the student head.
void ema_teacher(ToyEncoder& enc, double nu);

struct AdvStyleConfig {
  EncoderConfig encoder;
  CropConfig crops;
  int hidden = 64;
  int steps = 20;
  double lr_adv = 0.05;
  double lr_student = 0.05;
  double momentum = 0.996;
  std::uint64_t seed = 0;
};

struct AdvStyleResult {
  StyleNet net;
  ToyEncoder encoder;
  std::vector<StyleMagnitudes> magnitudes;
  std::vector<ImageTensor> augmented;
  /// Batch loss seen by the student at every step.
  std::vector<double> history;
};

/// Alternates adversarial style steps, student steps and EMA teacher updates
/// over the images, then styles every image with the learned magnitudes.
AdvStyleResult train_advstyle(std::span<const ImageTensor> images, const AdvStyleConfig& cfg);

}  // namespace osda
