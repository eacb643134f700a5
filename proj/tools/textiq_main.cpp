// textiq: scene-text-aware image compression toolkit.
//
// Subcommands cover the whole workflow: synthetic corpus generation, label
// generation, assessor training/evaluation, single-shot compression, the
// iterative per-region pipeline, and the experiment harness.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

#include "textiq/codec.hpp"
#include "textiq/config.hpp"
#include "textiq/controller.hpp"
#include "textiq/experiments.hpp"
#include "textiq/image.hpp"
#include "textiq/labels.hpp"
#include "textiq/metrics.hpp"
#include "textiq/neural_codec.hpp"
#include "textiq/stiqa.hpp"
#include "textiq/synthetic.hpp"

#include <nlohmann/json.hpp>

namespace {

using namespace textiq;

struct GlobalOptions {
  std::uint64_t seed = 1;
  std::string config_path;
  std::string backend = "deterministic";
  std::string codec_model_path;

  KeyValueConfig file_config() const {
    return config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(config_path);
  }

  std::unique_ptr<Codec> make_codec() const {
    if (backend == "deterministic") {
      DctCodecParams params;
      apply_config(file_config(), params);
      return std::make_unique<DeterministicCodec>(params);
    }
    if (backend == "neural") {
      if (!codec_model_path.empty()) {
        return std::make_unique<NeuralCodec>(NeuralCodec::load(codec_model_path));
      }
      NeuralCodecConfig config;
      apply_config(file_config(), config);
      config.seed = seed;
      return std::make_unique<NeuralCodec>(config);
    }
    throw InvalidArgument("unknown backend: " + backend);
  }
};

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw InvalidArgument("empty grid: " + csv);
  return out;
}

std::vector<int> parse_int_grid(const std::string& csv) {
  std::vector<int> out;
  for (double v : parse_grid(csv)) out.push_back(static_cast<int>(v));
  return out;
}

// Labeled 32x128 crops from a manifest, with per-region deterministic resize.
std::vector<LabeledRegion> labeled_regions_from_manifest(const DatasetManifest& manifest,
                                                         std::uint64_t seed) {
  std::vector<LabeledRegion> out;
  for (size_t e = 0; e < manifest.entries.size(); ++e) {
    const auto& entry = manifest.entries[e];
    const RasterImage image = load_image(manifest.resolve(entry));
    for (size_t r = 0; r < entry.regions.size(); ++r) {
      const auto& region = entry.regions[r];
      if (!region.label) {
        throw InvalidArgument("entry " + std::to_string(e) + " region " + std::to_string(r) +
                              " has no label; run labelgen first");
      }
      const RasterImage crop = crop_region(image, region);
      const std::uint64_t s =
          fnv1a(std::to_string(e) + ":" + std::to_string(r), seed ^ 0x51ed270b1059ull);
      out.push_back(LabeledRegion{resize_for_assessment(crop, s), *region.label});
    }
  }
  return out;
}

std::vector<SyntheticScene> scenes_from_manifest(const DatasetManifest& manifest) {
  std::vector<SyntheticScene> scenes;
  for (const auto& entry : manifest.entries) {
    SyntheticScene scene;
    scene.image = load_image(manifest.resolve(entry));
    scene.regions = entry.regions;
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

Assessor assessor_from(const std::shared_ptr<StiqaModel>& model) {
  return [model](const RasterImage& crop) { return model->assess(crop).value; };
}

void write_trace(const PipelineOutput& out, const std::filesystem::path& path) {
  std::ofstream file(path);
  if (!file) throw IoError("cannot write trace: " + path.string());
  for (size_t i = 0; i < out.trace.size(); ++i) {
    const auto& round = out.trace[i];
    nlohmann::json rec;
    rec["round"] = i + 1;
    rec["selected"] = i == out.best_round;
    rec["weights"] = round.weights;
    rec["scores"] = round.scores;
    rec["mean_score"] = round.mean_score;
    rec["bpp"] = round.bpp;
    nlohmann::json psnrs = nlohmann::json::array();
    for (double v : round.result.per_region_psnr) {
      psnrs.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf"));
    }
    rec["region_psnr"] = psnrs;
    file << rec.dump() << "\n";
  }
}

int run(int argc, char** argv) {
  CLI::App app{"scene-text-aware image compression toolkit"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--seed", global.seed, "master random seed");
  app.add_option("--config", global.config_path, "key = value config file");
  app.add_option("--backend", global.backend, "codec backend: deterministic | neural")
      ->check(CLI::IsMember({"deterministic", "neural"}));
  app.add_option("--codec-model", global.codec_model_path,
                 "trained neural codec model file");

  // ---- gencorpus ----
  auto* gen = app.add_subcommand("gencorpus", "render a labeled synthetic scene corpus");
  std::string gen_out;
  int gen_scenes = 40;
  std::string gen_severities;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--scenes", gen_scenes, "number of scenes");
  gen->add_option("--severities", gen_severities, "comma-separated severity grid");

  // ---- labelgen ----
  auto* lab = app.add_subcommand("labelgen", "fill manifest labels from a recognizer");
  std::string lab_manifest, lab_out, lab_recognizer = "synthetic", lab_command;
  double lab_degradation = 0.0;
  lab->add_option("--manifest", lab_manifest, "input manifest")->required();
  lab->add_option("--out", lab_out, "output manifest")->required();
  lab->add_option("--recognizer", lab_recognizer, "synthetic | external-command")
      ->check(CLI::IsMember({"synthetic", "external-command"}));
  lab->add_option("--command", lab_command, "recognizer command (reads PGM on stdin)");
  lab->add_option("--degradation", lab_degradation, "synthetic recognizer knob in [0,1]");

  // ---- train ----
  auto* train = app.add_subcommand("train", "train the quality assessor");
  std::string train_manifest, train_out, train_variant = "full";
  StiqaConfig train_config;
  train->add_option("--manifest", train_manifest, "labeled manifest")->required();
  train->add_option("--out", train_out, "output model file")->required();
  train->add_option("--embed-dim", train_config.embed_dim);
  train->add_option("--num-heads", train_config.num_heads);
  train->add_option("--encoder-layers", train_config.encoder_layers);
  train->add_option("--decoder-layers", train_config.decoder_layers);
  train->add_option("--epsilon", train_config.epsilon);
  train->add_option("--learning-rate", train_config.learning_rate);
  train->add_option("--batch-size", train_config.batch_size);
  train->add_option("--epochs", train_config.epochs);
  train->add_option("--variant", train_variant, "full | prob_transformer | prob_only");
  train->add_option("--val-split-seed", train_config.val_split_seed);
  train->add_option("--target-val-spearman", train_config.target_val_spearman);
  train->add_option("--target-val-mae", train_config.target_val_mae);
  bool train_freeze = false;
  train->add_flag("--freeze-prob-branch", train_freeze);
  bool train_quiet = false;
  train->add_flag("--quiet", train_quiet);

  // ---- assess ----
  auto* assess_cmd = app.add_subcommand("assess", "score one text region");
  std::string assess_model, assess_image;
  std::vector<int> assess_box;
  assess_cmd->add_option("--model", assess_model)->required();
  assess_cmd->add_option("--image", assess_image)->required();
  assess_cmd->add_option("--box", assess_box, "x y w h")->expected(4)->required();

  // ---- compress / decompress ----
  auto* comp = app.add_subcommand("compress", "compress with a quality map");
  std::string comp_image, comp_qmap, comp_out;
  comp->add_option("--image", comp_image)->required();
  comp->add_option("--qmap", comp_qmap, "PGM/PNG or .qmap sidecar")->required();
  comp->add_option("--out", comp_out, "output blob")->required();

  auto* decomp = app.add_subcommand("decompress", "reconstruct from a blob");
  std::string decomp_blob, decomp_out;
  decomp->add_option("--blob", decomp_blob)->required();
  decomp->add_option("--out", decomp_out, "output image (png/pgm)")->required();

  // ---- pipeline ----
  auto* pipe = app.add_subcommand("pipeline", "iterative per-region compression");
  std::string pipe_manifest, pipe_model;
  int pipe_entry = 0;
  std::string pipe_blob_out, pipe_recon_out, pipe_trace_out;
  ControllerConfig pipe_config;
  pipe->add_option("--manifest", pipe_manifest, "manifest with regions")->required();
  pipe->add_option("--entry", pipe_entry, "manifest entry index");
  pipe->add_option("--model", pipe_model, "trained assessor model")->required();
  pipe->add_option("--out-blob", pipe_blob_out);
  pipe->add_option("--out-recon", pipe_recon_out);
  pipe->add_option("--out-trace", pipe_trace_out);
  pipe->add_option("--lambda", pipe_config.lambda);
  pipe->add_option("--score-target", pipe_config.score_target);
  pipe->add_option("--iterations", pipe_config.iterations);
  pipe->add_option("--edge-weight", pipe_config.edge_weight);
  pipe->add_option("--interior-weight", pipe_config.interior_weight);
  pipe->add_option("--background-weight", pipe_config.background_weight);
  pipe->add_option("--canny-low", pipe_config.canny_low);
  pipe->add_option("--canny-high", pipe_config.canny_high);
  pipe->add_option("--resize-seed", pipe_config.resize_seed);

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on a labeled manifest");
  std::string eval_model, eval_manifest;
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--manifest", eval_manifest)->required();

  // ---- sweep ----
  auto* sweep_cmd = app.add_subcommand("sweep", "rate/score grid over lambda and iterations");
  std::string sweep_manifest, sweep_model, sweep_out, sweep_plot;
  std::string sweep_lambdas = "0.1,1,5,10,100";
  std::string sweep_iterations = "3,10";
  sweep_cmd->add_option("--manifest", sweep_manifest, "scene manifest")->required();
  sweep_cmd->add_option("--model", sweep_model)->required();
  sweep_cmd->add_option("--lambdas", sweep_lambdas);
  sweep_cmd->add_option("--iterations", sweep_iterations);
  sweep_cmd->add_option("--out", sweep_out, "report jsonl");
  sweep_cmd->add_option("--plot", sweep_plot, "svg plot path");

  // ---- ablate ----
  auto* abl = app.add_subcommand("ablate", "variant ablation or loss-combination sweep");
  std::string abl_manifest, abl_out, abl_mode = "variants";
  int abl_epochs = 12;
  std::string abl_epsilons = "0.10,0.15,0.20";
  abl->add_option("--manifest", abl_manifest, "labeled manifest")->required();
  abl->add_option("--mode", abl_mode, "variants | losses")
      ->check(CLI::IsMember({"variants", "losses"}));
  abl->add_option("--epochs", abl_epochs);
  abl->add_option("--epsilons", abl_epsilons);
  abl->add_option("--out", abl_out, "report jsonl");

  // ---- report ----
  auto* rep = app.add_subcommand("report", "render a stored report");
  std::string rep_in, rep_svg, rep_spec;
  rep->add_option("--in", rep_in, "report jsonl")->required();
  rep->add_option("--plot", rep_spec, "x_key:y_key:series_tag");
  rep->add_option("--svg", rep_svg, "svg output path");

  // ---- codec-train ----
  auto* ctrain = app.add_subcommand("codec-train", "train the neural codec backend");
  std::string ctrain_manifest, ctrain_out;
  NeuralCodecConfig ctrain_config;
  ctrain->add_option("--manifest", ctrain_manifest, "image corpus manifest")->required();
  ctrain->add_option("--out", ctrain_out, "output model")->required();
  ctrain->add_option("--epochs", ctrain_config.epochs);
  ctrain->add_option("--batch-size", ctrain_config.batch_size);
  ctrain->add_option("--crop", ctrain_config.crop);
  ctrain->add_option("--learning-rate", ctrain_config.learning_rate);

  CLI11_PARSE(app, argc, argv);

  const KeyValueConfig file_config = global.file_config();

  if (*gen) {
    std::filesystem::create_directories(gen_out);
    const std::vector<double> severities =
        gen_severities.empty() ? default_severity_grid() : parse_grid(gen_severities);
    const SyntheticCorpus corpus = generate_synthetic_corpus(global.seed, gen_scenes, severities);
    DatasetManifest manifest;
    manifest.base_dir = gen_out;
    for (size_t i = 0; i < corpus.scenes.size(); ++i) {
      const std::string name = "scene_" + std::to_string(i) + ".png";
      save_image(corpus.scenes[i].image, manifest.base_dir / name);
      ManifestEntry entry;
      entry.image_path = name;
      entry.regions = corpus.scenes[i].regions;
      manifest.entries.push_back(std::move(entry));
    }
    save_manifest(manifest, manifest.base_dir / "manifest.jsonl");
    std::cout << "wrote " << corpus.scenes.size() << " scenes, " << corpus.labeled.size()
              << " labeled regions to " << gen_out << "\n";
    return 0;
  }

  if (*lab) {
    DatasetManifest manifest = load_manifest(lab_manifest);
    std::unique_ptr<Recognizer> recognizer;
    if (lab_recognizer == "synthetic") {
      recognizer = std::make_unique<SyntheticRecognizer>(lab_degradation);
    } else {
      if (lab_command.empty()) {
        throw InvalidArgument("--command is required with --recognizer external-command");
      }
      recognizer = std::make_unique<ExternalRecognizer>(lab_command);
    }
    generate_labels(manifest, *recognizer, global.seed);
    save_manifest(manifest, lab_out);
    std::cout << "labeled " << manifest.entries.size() << " entries\n";
    return 0;
  }

  if (*train) {
    apply_config(file_config, train_config);
    train_config.seed = global.seed;
    train_config.variant = stiqa_variant_from_string(train_variant);
    train_config.freeze_prob_branch = train_freeze;
    const auto data = labeled_regions_from_manifest(load_manifest(train_manifest), global.seed);
    const TrainCallback callback = train_quiet ? TrainCallback{} : [](const EpochStats& s) {
      std::cout << "epoch " << s.epoch << "  loss " << s.train_loss << "  val_mae " << s.val_mae
                << "  val_spearman " << s.val_spearman << "\n";
    };
    const StiqaModel model = train_stiqa(train_config, data, callback);
    save_stiqa_model(model, train_out);
    std::cout << "saved " << train_out << "\n";
    return 0;
  }

  if (*assess_cmd) {
    const StiqaModel model = load_stiqa_model(assess_model);
    const RasterImage image = load_image(assess_image);
    const TextRegion region{Box{assess_box[0], assess_box[1], assess_box[2], assess_box[3]}, "",
                            std::nullopt};
    const RasterImage canvas =
        resize_for_assessment(crop_region(image, region), global.seed);
    std::cout << model.assess(canvas).value << "\n";
    return 0;
  }

  if (*comp) {
    const auto codec = global.make_codec();
    const RasterImage image = load_image(comp_image);
    const QualityMap qmap = load_quality_map(comp_qmap);
    const CompressedBlob blob = codec->compress(image, qmap);
    save_blob(blob, comp_out);
    std::cout << "bpp " << blob.bpp() << "\n";
    return 0;
  }

  if (*decomp) {
    const CompressedBlob blob = load_blob(decomp_blob);
    const auto codec = global.make_codec();
    if (codec->backend() != blob.backend) {
      throw InvalidArgument("blob backend does not match --backend");
    }
    save_image(codec->decompress(blob), decomp_out);
    return 0;
  }

  if (*pipe) {
    apply_config(file_config, pipe_config);
    const DatasetManifest manifest = load_manifest(pipe_manifest);
    require(pipe_entry >= 0 && static_cast<size_t>(pipe_entry) < manifest.entries.size(),
            "manifest entry index out of range");
    const auto& entry = manifest.entries[static_cast<size_t>(pipe_entry)];
    const RasterImage image = load_image(manifest.resolve(entry));
    const auto model = std::make_shared<StiqaModel>(load_stiqa_model(pipe_model));
    const auto codec = global.make_codec();

    const PipelineOutput out =
        run_pipeline(image, entry.regions, assessor_from(model), *codec, pipe_config);
    const auto& best = out.best();
    std::cout << "best round " << out.best_round + 1 << " of " << out.trace.size() << "  bpp "
              << best.bpp << "  mean score " << best.mean_score << "\n";
    if (!pipe_blob_out.empty()) save_blob(out.best_blob, pipe_blob_out);
    if (!pipe_recon_out.empty()) save_image(best.result.reconstruction, pipe_recon_out);
    if (!pipe_trace_out.empty()) write_trace(out, pipe_trace_out);
    return 0;
  }

  if (*eval_cmd) {
    const StiqaModel model = load_stiqa_model(eval_model);
    const auto data = labeled_regions_from_manifest(load_manifest(eval_manifest), global.seed);
    const EvalMetrics m = evaluate_stiqa(model, data);
    std::cout << "mae " << m.mae << "\nspearman " << m.spearman << "\npearson " << m.pearson
              << "\n";
    return 0;
  }

  if (*sweep_cmd) {
    const auto scenes = scenes_from_manifest(load_manifest(sweep_manifest));
    const auto model = std::make_shared<StiqaModel>(load_stiqa_model(sweep_model));
    const auto codec = global.make_codec();
    ControllerConfig base;
    apply_config(file_config, base);
    const ExperimentReport report =
        run_hyperparameter_sweep(scenes, assessor_from(model), *codec, base,
                                 parse_grid(sweep_lambdas), parse_int_grid(sweep_iterations));
    std::cout << report.render_table();
    if (!sweep_out.empty()) report.save_jsonl(sweep_out);
    if (!sweep_plot.empty()) {
      report.save_svg_plot(sweep_plot, "bpp", "stiqa", "iterations", "rate vs assessed quality");
    }
    return 0;
  }

  if (*abl) {
    StiqaConfig base;
    apply_config(file_config, base);
    base.seed = global.seed;
    base.epochs = abl_epochs;
    const auto corpus = labeled_regions_from_manifest(load_manifest(abl_manifest), global.seed);
    const ExperimentReport report =
        abl_mode == "variants" ? run_ablation(corpus, base)
                               : run_loss_combination_sweep(corpus, base, parse_grid(abl_epsilons));
    std::cout << report.render_table();
    if (!abl_out.empty()) report.save_jsonl(abl_out);
    return 0;
  }

  if (*rep) {
    const ExperimentReport report = ExperimentReport::load_jsonl(rep_in);
    std::cout << report.render_table();
    if (!rep_spec.empty()) {
      if (rep_svg.empty()) throw InvalidArgument("--plot needs --svg <path>");
      std::stringstream ss(rep_spec);
      std::string x, y, s;
      std::getline(ss, x, ':');
      std::getline(ss, y, ':');
      std::getline(ss, s, ':');
      report.save_svg_plot(rep_svg, x, y, s, rep_in);
    }
    return 0;
  }

  if (*ctrain) {
    apply_config(file_config, ctrain_config);
    ctrain_config.seed = global.seed;
    const DatasetManifest manifest = load_manifest(ctrain_manifest);
    std::vector<RasterImage> corpus;
    for (const auto& entry : manifest.entries) {
      corpus.push_back(load_image(manifest.resolve(entry)));
    }
    NeuralCodec codec(ctrain_config);
    codec.train(corpus, [](const NeuralCodec::TrainStats& s) {
      std::cout << "epoch " << s.epoch << "  loss " << s.loss << "  distortion " << s.distortion
                << "  rate " << s.rate_bits_per_pixel << "\n";
    });
    codec.save(ctrain_out);
    std::cout << "saved " << ctrain_out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const textiq::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
