#include "cli/app.hpp"

#include <CLI11.hpp>

#include <deque>
#include <optional>

#include "cli/commands.hpp"
#include "osda/errors.hpp"

namespace osda::cli {

namespace {

// A flag whose text is handed to set_key after the config file is applied,
// so flags override the file and share its validation.
struct KeyFlag {
  std::string key;
  std::string value;
  CLI::Option* opt = nullptr;
};

class Flags {
 public:
  void add(CLI::App* cmd, const std::string& name, const std::string& key, const std::string& help) {
    auto& f = flags_.emplace_back();
    f.key = key;
    f.opt = cmd->add_option(name, f.value, help + " [" + key + "]");
  }

  void apply(PipelineConfig& cfg) const {
    for (const auto& f : flags_)
      if (f.opt->count() > 0) set_key(cfg, f.key, f.value);
  }

 private:
  std::deque<KeyFlag> flags_;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, const std::string& seed_help) {
  cmd->add_option("--config", c.config, "key=value config file; flags override it")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, seed_help);
}

PipelineConfig load(const Common& c, const Flags& flags) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : parse_config(c.config);
  flags.apply(cfg);
  return cfg;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Open-set pseudo-labelling toolkit"};
  app.name("osda");
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic source/target benchmark");
  Common synth_common;
  Flags synth_flags;
  std::string synth_dir;
  synth->add_option("--out-dir", synth_dir, "Output directory")->required();
  add_common(synth, synth_common, "Generator seed");
  synth_flags.add(synth, "--d", "synth.d", "Embedding dimension");
  synth_flags.add(synth, "--c", "synth.c", "Closed-set classes");
  synth_flags.add(synth, "--c-open", "synth.c_open", "Open-set classes");
  synth_flags.add(synth, "--n-per-class", "synth.n_per_class", "Samples per class");
  synth_flags.add(synth, "--radius", "synth.radius", "Distance of class means from the origin");
  synth_flags.add(synth, "--spread", "synth.spread", "Class standard deviation");
  synth_flags.add(synth, "--open-offset", "synth.open_offset", "Offset of open-set means");
  synth_flags.add(synth, "--rotation", "synth.rotation", "Target rotation in radians");
  synth_flags.add(synth, "--translation", "synth.translation", "Target translation length");
  synth_flags.add(synth, "--scale", "synth.scale", "Target scale");

  // pseudolabel
  auto* pseudo = app.add_subcommand("pseudolabel", "Weighted-prototype pseudo-labels for target embeddings");
  Common pseudo_common;
  Flags pseudo_flags;
  std::string pseudo_emb, pseudo_lgt, pseudo_out, pseudo_parts;
  pseudo->add_option("--emb", pseudo_emb, "Target embeddings (EMB1)")->required()->check(CLI::ExistingFile);
  pseudo->add_option("--logits", pseudo_lgt, "Source-model logits (LGT1)")->required()->check(CLI::ExistingFile);
  pseudo->add_option("--out", pseudo_out, "Pseudo-labels (PSL1)")->required();
  pseudo->add_option("--partitions-dir", pseudo_parts, "Also write every clustering run as PRT1");
  add_common(pseudo, pseudo_common, "Base K-means seed");
  pseudo_flags.add(pseudo, "--scheme", "proto.scheme", "uniform, msp, mls or csas");
  pseudo_flags.add(pseudo, "--tau", "proto.tau", "Prototype temperature");
  pseudo_flags.add(pseudo, "--k", "proto.k", "Clusters per run");
  pseudo_flags.add(pseudo, "--n-mc", "proto.n_mc", "Clustering runs");
  pseudo_flags.add(pseudo, "--kmeans-max-iters", "kmeans.max_iters", "Lloyd iteration cap");
  pseudo_flags.add(pseudo, "--kmeans-tol", "kmeans.tol", "Relative objective tolerance");
  pseudo_flags.add(pseudo, "--normalize", "kmeans.normalize", "Cluster L2-normalised rows (true/false)");

  // distill
  auto* distill = app.add_subcommand("distill", "Train a student head on pseudo-labels");
  Common distill_common;
  Flags distill_flags;
  std::string distill_emb, distill_psl, distill_out, distill_pred;
  distill->add_option("--emb", distill_emb, "Embeddings (EMB1)")->required()->check(CLI::ExistingFile);
  distill->add_option("--psl", distill_psl, "Pseudo-labels (PSL1)")->required()->check(CLI::ExistingFile);
  distill->add_option("--out", distill_out, "Student head (HED1)")->required();
  distill->add_option("--pred-out", distill_pred, "Also write the student's logits (LGT1)");
  add_common(distill, distill_common, "Initialisation and shuffling seed");
  distill_flags.add(distill, "--loss", "distill.loss", "l2, l1 or ce");
  distill_flags.add(distill, "--epochs", "distill.epochs", "Training epochs");
  distill_flags.add(distill, "--lr", "distill.lr", "Learning rate");
  distill_flags.add(distill, "--batch-size", "distill.batch_size", "Minibatch size, 0 for full batch");
  distill_flags.add(distill, "--momentum", "distill.momentum", "Heavy-ball momentum");
  distill_flags.add(distill, "--head", "distill.head", "linear or mlp1");
  distill_flags.add(distill, "--hidden", "distill.hidden", "Hidden width for mlp1");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Apply a trained student head");
  std::string pred_emb, pred_head, pred_out;
  predict_cmd->add_option("--emb", pred_emb, "Embeddings (EMB1)")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--head", pred_head, "Student head (HED1)")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--out", pred_out, "Logits (LGT1)")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Closed-set accuracy and open-set AUC against labels");
  std::string eval_lgt, eval_psl, eval_lbl, eval_format = "lines";
  auto* eval_lgt_opt = eval->add_option("--logits", eval_lgt, "Logits (LGT1)")->check(CLI::ExistingFile);
  auto* eval_psl_opt = eval->add_option("--psl", eval_psl, "Pseudo-labels (PSL1)")->check(CLI::ExistingFile);
  eval_lgt_opt->excludes(eval_psl_opt);
  eval->add_option("--labels", eval_lbl, "Ground-truth labels (LBL1)")->required()->check(CLI::ExistingFile);
  eval->add_option("--format", eval_format, "lines or text")->check(CLI::IsMember({"lines", "text"}));

  // advstyle-demo
  auto* style = app.add_subcommand("advstyle-demo", "Learn adversarial colour styles on a few images");
  Common style_common;
  Flags style_flags;
  std::vector<std::string> style_images;
  int style_synthetic = 0;
  std::string style_dir;
  auto* images_opt = style->add_option("--images", style_images, "PPM or IMG1 images")->check(CLI::ExistingFile);
  auto* synthetic_opt =
      style->add_option("--synthetic-images", style_synthetic, "Generate this many 32x32 images instead")
          ->check(CLI::PositiveNumber);
  images_opt->excludes(synthetic_opt);
  style->add_option("--out-dir", style_dir, "Output directory")->required();
  add_common(style, style_common, "Training seed");
  style_flags.add(style, "--steps", "advstyle.steps", "Training steps");
  style_flags.add(style, "--lr-adv", "advstyle.lr_adv", "Style-net learning rate");
  style_flags.add(style, "--lr-student", "advstyle.lr_student", "Student learning rate");
  style_flags.add(style, "--momentum", "advstyle.momentum", "Teacher EMA momentum");
  style_flags.add(style, "--hidden", "advstyle.hidden", "Style-net hidden width");

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "synth, pseudolabel, distill, eval and advstyle-demo in one run");
  std::string pipe_dir, pipe_config;
  std::optional<std::uint64_t> pipe_seed;
  bool pipe_no_style = false;
  pipeline->add_option("--out-dir", pipe_dir, "Output directory")->required();
  pipeline->add_option("--config", pipe_config, "key=value config file; flags override it")
      ->check(CLI::ExistingFile);
  pipeline->add_option("--seed", pipe_seed, "Global seed; stage seeds are derived from it");
  pipeline->add_flag("--no-advstyle", pipe_no_style, "Skip the style stage");

  std::vector<const char*> argv;
  argv.push_back("osda");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*synth) {
      auto cfg = load(synth_common, synth_flags);
      SynthConfig sc = cfg.synth;
      sc.seed = stage_seed(cfg, "synth", synth_common.seed);
      write_synth(sc, synth_dir);
      out << "wrote " << synth_dir << " (seed " << sc.seed << ")\n";
    } else if (*pseudo) {
      auto cfg = load(pseudo_common, pseudo_flags);
      const auto seed = stage_seed(cfg, "pseudolabel", pseudo_common.seed);
      std::optional<fs::path> parts;
      if (!pseudo_parts.empty()) parts = pseudo_parts;
      const auto s = write_pseudolabels(cfg, pseudo_emb, pseudo_lgt, pseudo_out, seed, parts);
      out << "wrote " << pseudo_out << " (n=" << s.n << ", c=" << s.c << ", prototypes defined " << s.defined << "/"
          << s.c << ", seed " << seed << ")\n";
    } else if (*distill) {
      auto cfg = load(distill_common, distill_flags);
      const auto seed = stage_seed(cfg, "distill", distill_common.seed);
      std::optional<fs::path> pred;
      if (!distill_pred.empty()) pred = distill_pred;
      const auto history = write_student(cfg, distill_emb, distill_psl, distill_out, seed, pred);
      out << "wrote " << distill_out << " (epochs " << history.size();
      if (!history.empty()) out << ", final loss " << history.back();
      out << ", seed " << seed << ")\n";
    } else if (*predict_cmd) {
      write_predictions(pred_emb, pred_head, pred_out);
      out << "wrote " << pred_out << "\n";
    } else if (*eval) {
      if (eval_lgt.empty() && eval_psl.empty()) {
        err << "eval: one of --logits or --psl is required\n";
        return kExitUsage;
      }
      const auto report = evaluate_file(eval_lgt.empty() ? eval_psl : eval_lgt, eval_lbl);
      out << (eval_format == "text" ? format_report(report) : format_metric_lines(report));
    } else if (*style) {
      auto cfg = load(style_common, style_flags);
      AdvStyleConfig sc = cfg.advstyle;
      sc.seed = stage_seed(cfg, "advstyle", style_common.seed);
      std::vector<ImageTensor> images;
      std::vector<std::string> names;
      if (!style_images.empty()) {
        for (const auto& p : style_images) {
          images.push_back(load_any_image(p));
          names.push_back(fs::path(p).stem().string());
        }
      } else {
        const int count = style_synthetic > 0 ? style_synthetic : cfg.advstyle_images;
        images = synthetic_images(count, derive_seed(sc.seed, "images"));
        for (int i = 0; i < count; ++i) names.push_back("synthetic_" + std::to_string(i));
      }
      write_advstyle_demo(sc, images, names, style_dir);
      out << "wrote " << images.size() << " styled images to " << style_dir << " (seed " << sc.seed << ")\n";
    } else if (*pipeline) {
      PipelineConfig cfg = pipe_config.empty() ? PipelineConfig{} : parse_config(pipe_config);
      if (pipe_seed) set_key(cfg, "seed", std::to_string(*pipe_seed));
      run_pipeline(cfg, pipe_dir, out, !pipe_no_style);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == Errc::UnknownKey || e.code() == Errc::BadValue ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace osda::cli
