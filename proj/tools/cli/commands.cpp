#include "cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "osda/cluster.hpp"
#include "osda/color_ops.hpp"
#include "osda/distiller.hpp"
#include "osda/embstore.hpp"
#include "osda/errors.hpp"
#include "osda/image.hpp"
#include "osda/protolab.hpp"
#include "osda/rng.hpp"
#include "osda/selfdistill.hpp"
#include "osda/synthbench.hpp"

namespace osda::cli {

namespace {

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string magic_of(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  char m[4] = {};
  in.read(m, 4);
  if (in.gcount() != 4) throw Error(Errc::TruncatedFile, path.string() + ": shorter than a magic tag");
  return std::string(m, 4);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

std::string prefixed(std::string_view prefix, const EvalReport& r) {
  std::string out;
  out += std::string(prefix) + ".acc=" + num(r.acc) + "\n";
  out += std::string(prefix) + ".auc=" + num(r.auc) + "\n";
  return out;
}

}  // namespace

std::uint64_t stage_seed(const PipelineConfig& cfg, std::string_view stage, std::optional<std::uint64_t> flag) {
  if (flag) return *flag;
  if (stage == "synth" && cfg.is_set("synth.seed")) return cfg.synth.seed;
  if (stage == "distill" && cfg.is_set("distill.seed")) return cfg.distill.seed;
  return derive_seed(cfg.seed, stage);
}

void write_synth(const SynthConfig& synth, const fs::path& dir) {
  ensure_dir(dir);
  const Benchmark b = make_benchmark(synth);
  write_embeddings(dir / "source.emb", b.data.source);
  write_labels(dir / "source.lbl", b.data.source_labels);
  write_embeddings(dir / "target.emb", b.data.target);
  write_logits(dir / "target.lgt", b.target_logits);
  write_labels(dir / "target.lbl", b.data.target_labels);
}

PseudolabelStats write_pseudolabels(const PipelineConfig& cfg, const fs::path& emb, const fs::path& logits,
                                    const fs::path& out, std::uint64_t seed,
                                    const std::optional<fs::path>& partitions_dir) {
  const auto data = validate_alignment(load_embeddings(emb), load_logits(logits));
  const auto run = run_pseudolabel(data.embeddings, data.logits, cfg.proto, cfg.kmeans, seed);
  write_pseudo_labels(out, run.labels);

  if (partitions_dir) {
    ensure_dir(*partitions_dir);
    const auto mc = mc_partitions(data.embeddings, cfg.proto.k, cfg.proto.n_mc, seed, cfg.kmeans);
    for (std::size_t r = 0; r < mc.runs.size(); ++r) {
      char name[32];
      std::snprintf(name, sizeof name, "run_%03zu.prt", r);
      write_partition(*partitions_dir / name, mc.runs[r]);
    }
  }

  PseudolabelStats s;
  s.n = static_cast<std::size_t>(run.labels.logits.rows());
  s.c = static_cast<std::size_t>(run.labels.logits.cols());
  s.defined = static_cast<std::size_t>(std::count(run.prototypes.defined.begin(), run.prototypes.defined.end(), true));
  return s;
}

std::vector<double> write_student(const PipelineConfig& cfg, const fs::path& emb, const fs::path& psl,
                                  const fs::path& out, std::uint64_t seed, const std::optional<fs::path>& pred_out) {
  const EmbeddingSet e = load_embeddings(emb);
  const PseudoLabelSet targets = read_pseudo_labels(psl);
  if (targets.logits.rows() != e.n()) {
    throw Error(Errc::CountMismatch, "embeddings have " + std::to_string(e.n()) + " rows, pseudo-labels " +
                                         std::to_string(targets.logits.rows()));
  }
  TrainConfig train = cfg.distill;
  train.seed = seed;
  StudentHead head = init_head(cfg.head, static_cast<int>(e.d()), static_cast<int>(targets.logits.cols()), cfg.hidden,
                               derive_seed(seed, "head"));
  auto result = train_distill(std::move(head), e, targets, train);
  write_head(out, result.head);
  if (pred_out) write_logits(*pred_out, SourceLogits{predict(result.head, e)});
  return result.history;
}

void write_predictions(const fs::path& emb, const fs::path& head, const fs::path& out) {
  const EmbeddingSet e = load_embeddings(emb);
  const StudentHead h = read_head(head);
  if (h.d != e.d()) {
    throw Error(Errc::DimMismatch,
                "head expects d=" + std::to_string(h.d) + ", embeddings have d=" + std::to_string(e.d()));
  }
  write_logits(out, SourceLogits{predict(h, e)});
}

EvalReport evaluate_file(const fs::path& scores, const fs::path& labels) {
  Matrix m;
  const std::string magic = magic_of(scores);
  if (magic == "PSL1") {
    m = read_pseudo_labels(scores).logits;
  } else {
    m = load_logits(scores).data;
  }
  const LabelSet truth = load_labels(labels, static_cast<std::uint32_t>(m.cols()));
  return evaluate(m, truth);
}

std::vector<ImageTensor> synthetic_images(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ImageTensor> out;
  constexpr int size = 32;
  for (int n = 0; n < count; ++n) {
    double c0[3], c1[3];
    for (int ch = 0; ch < 3; ++ch) {
      c0[ch] = rng.uniform(0.15, 0.85);
      c1[ch] = rng.uniform(0.15, 0.85);
    }
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double freq = rng.uniform(0.5, 2.5);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    ImageTensor img(size, size);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double t = (x * std::cos(angle) + y * std::sin(angle)) / size;
        const double mix = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * freq * t + phase);
        for (int ch = 0; ch < 3; ++ch) {
          const double v = c0[ch] + mix * (c1[ch] - c0[ch]) + 0.03 * rng.normal();
          img.at(y, x, ch) = std::clamp(v, 0.0, 1.0);
        }
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

ImageTensor load_any_image(const fs::path& path) {
  const std::string magic = magic_of(path);
  if (magic == "IMG1") return read_image(path);
  return read_ppm(path);
}

void write_advstyle_demo(const AdvStyleConfig& cfg, const std::vector<ImageTensor>& images,
                         const std::vector<std::string>& names, const fs::path& dir) {
  ensure_dir(dir);
  const AdvStyleResult result = train_advstyle(images, cfg);

  std::string mags = "image";
  for (ColorOp op : kChainOrder) mags += " " + std::string(to_string(op));
  mags += "\n";
  for (std::size_t i = 0; i < images.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "%03zu", i);
    write_ppm(dir / (std::string(stem) + "_before.ppm"), images[i]);
    write_ppm(dir / (std::string(stem) + "_after.ppm"), result.augmented[i]);
    mags += names[i];
    for (double m : result.magnitudes[i]) mags += " " + num(m);
    mags += "\n";
  }
  write_text(dir / "magnitudes.txt", mags);

  std::string hist;
  for (std::size_t s = 0; s < result.history.size(); ++s) hist += std::to_string(s) + " " + num(result.history[s]) + "\n";
  write_text(dir / "history.txt", hist);
}

void run_pipeline(const PipelineConfig& cfg, const fs::path& dir, std::ostream& out, bool with_advstyle) {
  ensure_dir(dir);
  const std::uint64_t s_synth = stage_seed(cfg, "synth", std::nullopt);
  const std::uint64_t s_pseudo = stage_seed(cfg, "pseudolabel", std::nullopt);
  const std::uint64_t s_distill = stage_seed(cfg, "distill", std::nullopt);
  const std::uint64_t s_style = stage_seed(cfg, "advstyle", std::nullopt);

  std::string report;
  report += "seed=" + std::to_string(cfg.seed) + "\n";
  report += "seed.synth=" + std::to_string(s_synth) + "\n";
  report += "seed.pseudolabel=" + std::to_string(s_pseudo) + "\n";
  report += "seed.distill=" + std::to_string(s_distill) + "\n";
  if (with_advstyle) report += "seed.advstyle=" + std::to_string(s_style) + "\n";

  SynthConfig synth = cfg.synth;
  synth.seed = s_synth;
  write_synth(synth, dir);

  const auto stats = write_pseudolabels(cfg, dir / "target.emb", dir / "target.lgt", dir / "pseudo.psl", s_pseudo);
  report += "prototypes.defined=" + std::to_string(stats.defined) + "/" + std::to_string(stats.c) + "\n";

  const auto history =
      write_student(cfg, dir / "target.emb", dir / "pseudo.psl", dir / "student.hed", s_distill, dir / "student.lgt");
  if (!history.empty()) report += "distill.final_loss=" + num(history.back()) + "\n";

  report += prefixed("source", evaluate_file(dir / "target.lgt", dir / "target.lbl"));
  report += prefixed("pseudo", evaluate_file(dir / "pseudo.psl", dir / "target.lbl"));
  report += prefixed("student", evaluate_file(dir / "student.lgt", dir / "target.lbl"));

  if (with_advstyle) {
    AdvStyleConfig style = cfg.advstyle;
    style.seed = s_style;
    const auto images = synthetic_images(cfg.advstyle_images, derive_seed(s_style, "images"));
    std::vector<std::string> names;
    for (std::size_t i = 0; i < images.size(); ++i) names.push_back("synthetic_" + std::to_string(i));
    write_advstyle_demo(style, images, names, dir / "advstyle");
  }

  write_text(dir / "report.txt", report);
  out << report;
}

}  // namespace osda::cli
