#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "osda/metrics.hpp"

namespace osda::cli {

namespace fs = std::filesystem;

/// Seed for a stage: an explicit override wins, then the stage key from the
/// config (when one was set), then derive_seed(cfg.seed, stage).
std::uint64_t stage_seed(const PipelineConfig& cfg, std::string_view stage, std::optional<std::uint64_t> flag);

/// source.emb, source.lbl, target.emb, target.lgt and target.lbl in `dir`.
void write_synth(const SynthConfig& synth, const fs::path& dir);

struct PseudolabelStats {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t defined = 0;
};

PseudolabelStats write_pseudolabels(const PipelineConfig& cfg, const fs::path& emb, const fs::path& logits,
                                    const fs::path& out, std::uint64_t seed,
                                    const std::optional<fs::path>& partitions_dir = std::nullopt);

/// Trains a student on the pseudo-labels and writes the head. With `pred_out`
/// the student's logits on the same embeddings are written as LGT1 too.
/// Returns the loss history.
std::vector<double> write_student(const PipelineConfig& cfg, const fs::path& emb, const fs::path& psl,
                                  const fs::path& out, std::uint64_t seed,
                                  const std::optional<fs::path>& pred_out = std::nullopt);

void write_predictions(const fs::path& emb, const fs::path& head, const fs::path& out);

/// Accepts LGT1 logits or PSL1 pseudo-labels; the class count comes from the
/// matrix width.
EvalReport evaluate_file(const fs::path& scores, const fs::path& labels);

/// 32x32 smooth colour fields for the demo when no images are given.
std::vector<ImageTensor> synthetic_images(int count, std::uint64_t seed);

/// PPM or IMG1 by magic.
ImageTensor load_any_image(const fs::path& path);

/// Trains the style net on the images and writes NNN_before.ppm,
/// NNN_after.ppm, magnitudes.txt and history.txt into `dir`.
void write_advstyle_demo(const AdvStyleConfig& cfg, const std::vector<ImageTensor>& images,
                         const std::vector<std::string>& names, const fs::path& dir);

/// Every stage through files in `dir`, then report.txt. Progress and the
/// final metrics go to `out`.
void run_pipeline(const PipelineConfig& cfg, const fs::path& dir, std::ostream& out, bool with_advstyle = true);

}  // namespace osda::cli
