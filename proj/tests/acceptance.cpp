// Acceptance suite: one checkable criterion per function, one PASS/FAIL line
// per criterion on stdout. Run with no arguments for the full suite or with
// criterion numbers to run a subset (ctest registers one process per
// criterion so time budgets apply individually).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <vector>

#include "test_oracles.hpp"
#include "textiq/codec.hpp"
#include "textiq/controller.hpp"
#include "textiq/experiments.hpp"
#include "textiq/labels.hpp"
#include "textiq/metrics.hpp"
#include "textiq/stiqa.hpp"
#include "textiq/synthetic.hpp"

using namespace textiq;

namespace {

struct Checker {
  int failures = 0;
  std::ostringstream log;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      ++failures;
      log << "    FAILED: " << what << "\n";
    }
  }

  void check_close(double got, double want, double tol, const std::string& what) {
    std::ostringstream msg;
    msg << what << " (got " << got << ", want " << want << " +/- " << tol << ")";
    check(std::abs(got - want) <= tol, msg.str());
  }
};

std::string random_alphabet_string(Rng& rng, size_t max_len) {
  std::string s;
  const size_t len = rng.uniform_index(max_len + 1);
  for (size_t i = 0; i < len; ++i) {
    s.push_back(char_class_symbol(static_cast<int>(rng.uniform_index(kNumCharClasses))));
  }
  return s;
}

// ---- criterion 1: equation fidelity ---------------------------------------

bool criterion_equations(Checker& c) {
  const ControllerConfig ctl;  // lambda 5, target 0.90
  c.check_close(update_weight(0.5, 0.90, ctl), 0.5, 1e-12, "update_weight fixed point");
  c.check_close(update_weight(0.5, 0.70, ctl), 1.0, 1e-12, "update_weight clamp at 1");
  c.check_close(update_weight(0.5, 0.94, ctl), 0.3, 1e-12, "update_weight arithmetic");

  c.check_close(epsilon_loss(0.5, 0.55, 0.1), 0.0, 1e-12, "epsilon_loss inside tube");
  c.check_close(epsilon_loss(0.2, 0.6, 0.1), 0.3, 1e-12, "epsilon_loss outside tube");
  c.check_close(epsilon_loss(0.5, 0.6, 0.1), 0.0, 1e-12, "epsilon_loss boundary");
  c.check_close(total_loss(0.5, 0.55, 0.1), 0.05, 1e-12, "total_loss inside tube");
  c.check_close(total_loss(0.2, 0.6, 0.1), 0.7, 1e-12, "total_loss outside tube");
  c.check_close(total_loss(0.42, 0.42, 0.1), 0.0, 1e-12, "total_loss zero error");

  {
    CharProbSequence two;
    std::array<double, kNumCharClasses> r1{};
    r1[3] = 0.8;
    r1[4] = 0.2;
    std::array<double, kNumCharClasses> r2{};
    r2[0] = 1.0;
    two.rows = {r1, r2};
    c.check_close(confidence(two), 0.9, 1e-12, "confidence mean of maxima");

    CharProbSequence uniform;
    std::array<double, kNumCharClasses> u{};
    u.fill(1.0 / kNumCharClasses);
    uniform.rows = {u};
    c.check_close(confidence(uniform), 1.0 / 37.0, 1e-12, "confidence uniform row");
  }

  c.check_close(accuracy("hello", "hallo", 5), 0.8, 1e-12, "accuracy one substitution");
  c.check_close(accuracy("stop", "stop", 4), 1.0, 1e-12, "accuracy exact match");
  c.check_close(accuracy("a", "zzzzz", 5), 0.0, 1e-12, "accuracy clamped at zero");

  {
    RecognizerOutput rec;
    for (char ch : std::string("stop")) {
      std::array<double, kNumCharClasses> row{};
      row[static_cast<size_t>(char_class_index(ch))] = 1.0;
      rec.probs.rows.push_back(row);
      rec.decoded_text.push_back(ch);
    }
    c.check_close(make_label("stop", rec).q, 1.0, 1e-12, "make_label perfect recognition");

    RecognizerOutput uni;
    std::array<double, kNumCharClasses> u{};
    u.fill(1.0 / kNumCharClasses);
    for (int i = 0; i < 4; ++i) uni.probs.rows.push_back(u);
    uni.decoded_text = argmax_decode(uni.probs);
    const QualityLabel label = make_label("zzzz", uni);
    c.check_close(label.q, 1.0 / 74.0, 1e-12, "make_label uniform rows, zero accuracy");
  }

  Rng rng(123);
  for (int i = 0; i < 1000; ++i) {
    const std::string a = random_alphabet_string(rng, 14);
    const std::string b = random_alphabet_string(rng, 14);
    if (levenshtein(a, b) != oracle::levenshtein_full_matrix(a, b)) {
      c.check(false, "levenshtein disagrees with DP oracle on '" + a + "' vs '" + b + "'");
      break;
    }
  }
  return c.failures == 0;
}

// ---- criterion 2: gradient check -------------------------------------------

bool criterion_gradients(Checker& c) {
  StiqaConfig config;  // full-size default model
  config.seed = 5;
  StiqaNet<double> net(config);
  auto& params = net.params();

  Rng rng(99);
  std::vector<RasterImage> inputs;
  for (int i = 0; i < 5; ++i) {
    RasterImage img(kAssessWidth, kAssessHeight);
    for (float& v : img.pixels) v = static_cast<float>(rng.uniform());
    inputs.push_back(std::move(img));
  }

  // Index parameter coordinates globally.
  std::vector<std::pair<size_t, Eigen::Index>> coords;
  for (size_t p = 0; p < params.all().size(); ++p) {
    for (Eigen::Index i = 0; i < params.all()[p]->value.size(); ++i) coords.emplace_back(p, i);
  }

  const double epsilon = config.epsilon;
  int checked = 0;
  int attempts = 0;
  double max_rel = 0.0;
  while (checked < 50 && attempts < 400) {
    ++attempts;
    const auto [pi, ci] = coords[rng.uniform_index(coords.size())];
    const RasterImage& input = inputs[checked % inputs.size()];

    // Ground truth placed far from both the L1 kink and the epsilon tube edge.
    nn::Tape<double> probe;
    const double pred = net.forward(probe, input, false).score->value(0, 0);
    double gt = pred + 0.25;
    if (gt > 1.0) gt = pred - 0.25;

    auto loss_at = [&](bool with_grad) {
      nn::Tape<double> tape;
      auto fwd = net.forward(tape, input, with_grad);
      auto loss = tape.quality_loss(fwd.score, gt, epsilon);
      if (with_grad) tape.backward(loss);
      return loss->value(0, 0);
    };

    params.zero_grads();
    loss_at(true);
    const double analytic = params.all()[pi]->grad.data()[ci];

    double& theta = params.all()[pi]->value.data()[ci];
    const double save = theta;
    const double h = 1e-6 * std::max(1.0, std::abs(save));
    theta = save + h;
    const double up = loss_at(false);
    theta = save - h;
    const double down = loss_at(false);
    theta = save;

    const double fd = (up - down) / (2.0 * h);
    if (std::max(std::abs(fd), std::abs(analytic)) < 1e-9) continue;  // dead coordinate
    const double rel =
        std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-9});
    max_rel = std::max(max_rel, rel);
    if (rel >= 1e-3) {
      std::ostringstream msg;
      msg << "gradient mismatch at param " << params.all()[pi]->name << "[" << ci
          << "]: analytic " << analytic << " vs fd " << fd << " (rel " << rel << ")";
      c.check(false, msg.str());
      return false;
    }
    ++checked;
  }
  c.check(checked == 50, "collected 50 usable gradient points");
  c.log << "    max relative error over 50 points: " << max_rel << "\n";
  return c.failures == 0;
}

// ---- criterion 3: codec properties ------------------------------------------

bool criterion_codec(Checker& c) {
  const DeterministicCodec codec;
  Rng rng(2025);

  for (int i = 0; i < 50 && c.failures == 0; ++i) {
    RasterImage img;
    if (i % 3 == 0) {
      Rng scene_rng = rng.fork(static_cast<std::uint64_t>(i));
      SceneOptions options;
      options.width = 96;
      options.height = 64;
      img = generate_scene(scene_rng, options).image;
    } else {
      img = RasterImage(64 + static_cast<int>(rng.uniform_index(48)),
                        48 + static_cast<int>(rng.uniform_index(32)));
      for (float& v : img.pixels) v = static_cast<float>(rng.uniform());
      if (i % 3 == 2) img = gaussian_blur(img, 1.2);
    }

    QualityMap lo(img.width, img.height);
    for (float& w : lo.weights) w = static_cast<float>(rng.uniform(0.0, 0.7));
    QualityMap hi = lo;
    for (float& w : hi.weights) {
      w = static_cast<float>(clamp01(w + rng.uniform(0.05, 0.3)));
    }

    const CompressedBlob blob_lo = codec.compress(img, lo);
    const CompressedBlob blob_hi = codec.compress(img, hi);
    c.check(blob_hi.bit_count() >= blob_lo.bit_count(),
            "rate monotonicity on image " + std::to_string(i));
    const double mse_lo = mean_squared_error(img, codec.decompress(blob_lo));
    const double mse_hi = mean_squared_error(img, codec.decompress(blob_hi));
    c.check(mse_hi <= mse_lo, "distortion monotonicity on image " + std::to_string(i));

    const RasterImage recon = codec.decompress(blob_lo);
    c.check(recon.width == img.width && recon.height == img.height,
            "round-trip shape exactness on image " + std::to_string(i));
  }

  // Golden regression, frozen as files under tests/data.
  {
    Rng grng(424242);
    SceneOptions options;
    SyntheticScene scene = generate_scene(grng, options);
    QualityMap qmap(scene.image.width, scene.image.height);
    for (int y = 0; y < qmap.height; ++y) {
      for (int x = 0; x < qmap.width; ++x) {
        qmap.at(x, y) = static_cast<float>(x) / (qmap.width - 1);
      }
    }
    for (int y = 40; y < 80; ++y) {
      for (int x = 30; x < 100; ++x) qmap.at(x, y) = 0.85f;
    }
    const auto bytes = serialize_blob(codec.compress(scene.image, qmap));
    const std::filesystem::path golden =
        std::filesystem::path(TEXTIQ_TEST_DATA_DIR) / "golden.blob";
    std::ifstream in(golden, std::ios::binary);
    c.check(in.good(), "golden blob file present");
    if (in.good()) {
      std::vector<std::uint8_t> want((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
      c.check(bytes == want, "golden blob is bit-exact");
      const CompressedBlob frozen = parse_blob(want.data(), want.size());
      const RasterImage recon = codec.decompress(frozen);
      const RasterImage live = codec.decompress(parse_blob(bytes.data(), bytes.size()));
      c.check(recon.pixels == live.pixels, "golden reconstruction is bit-exact");
    }
  }
  return c.failures == 0;
}

// ---- criterion 4: controller fixed points -----------------------------------

bool criterion_controller(Checker& c) {
  ControllerConfig config;
  config.iterations = 10;
  Rng rng(31);
  SceneOptions options;
  SyntheticScene scene = generate_scene(rng, options);
  if (scene.regions.empty()) {
    c.check(false, "scene generation produced no regions");
    return false;
  }
  const DeterministicCodec codec;

  {
    const Assessor stub = [&](const RasterImage&) { return config.score_target; };
    const PipelineOutput out = run_pipeline(scene.image, scene.regions, stub, codec, config);
    c.check(out.trace.size() == 10, "ten rounds executed");
    for (size_t r = 0; r < out.trace.size(); ++r) {
      c.check(out.trace[r].weights == out.trace[0].weights,
              "weights unchanged in round " + std::to_string(r + 1));
      c.check(out.trace[r].bpp == out.trace[0].bpp,
              "identical bpp in round " + std::to_string(r + 1));
    }
    c.check(out.best_round == 0, "tie-break selects the earliest round");
  }

  {
    config.iterations = 3;
    const Assessor stub = [](const RasterImage&) { return 0.2; };
    const PipelineOutput out = run_pipeline(scene.image, scene.regions, stub, codec, config);
    for (double k : out.trace[0].weights) c.check(k == 0.5, "round 1 at init weight");
    for (size_t r = 1; r < out.trace.size(); ++r) {
      for (double k : out.trace[r].weights) {
        c.check(k == 1.0, "saturated weight in round " + std::to_string(r + 1));
      }
    }
  }

  {
    // Varying assessor: verify the selection rule against brute force.
    config.iterations = 5;
    const Assessor proxy = [](const RasterImage& crop) {
      double acc = 0.0;
      for (size_t i = 1; i < crop.pixels.size(); ++i) {
        acc += std::abs(crop.pixels[i] - crop.pixels[i - 1]);
      }
      return clamp01(acc / static_cast<double>(crop.pixels.size()) * 5.0);
    };
    const PipelineOutput out = run_pipeline(scene.image, scene.regions, proxy, codec, config);
    size_t best = 0;
    for (size_t i = 1; i < out.trace.size(); ++i) {
      if (out.trace[i].mean_score > out.trace[best].mean_score ||
          (out.trace[i].mean_score == out.trace[best].mean_score &&
           out.trace[i].bpp < out.trace[best].bpp)) {
        best = i;
      }
    }
    c.check(out.best_round == best, "selection matches brute force");
  }
  return c.failures == 0;
}

// ---- criteria 5-8 share corpus/config helpers --------------------------------

SyntheticCorpus training_corpus(size_t target_regions) {
  SyntheticCorpus corpus =
      generate_synthetic_corpus(2718, static_cast<int>(target_regions * 0.55),
                                default_severity_grid());
  if (corpus.labeled.size() > target_regions) corpus.labeled.resize(target_regions);
  return corpus;
}

StiqaConfig acceptance_config(std::uint64_t seed) {
  StiqaConfig config;
  config.epochs = 50;
  config.seed = seed;
  config.target_val_spearman = 0.70;
  config.target_val_mae = 0.12;
  return config;
}

bool criterion_training(Checker& c) {
  const SyntheticCorpus corpus = training_corpus(1000);
  c.check(corpus.labeled.size() == 1000, "corpus holds exactly 1000 regions");

  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const StiqaConfig config = acceptance_config(seed);
    int epochs_used = 0;
    const StiqaModel model =
        train_stiqa(config, corpus.labeled, [&](const EpochStats& s) { epochs_used = s.epoch; });

    const DatasetSplit split = stiqa_split(corpus.labeled.size(), config.val_split_seed);
    std::vector<double> labels, preds;
    for (size_t i : split.val) {
      labels.push_back(corpus.labeled[i].label);
      preds.push_back(model.assess(corpus.labeled[i].image).value);
    }
    const double mae = mean_absolute_error(labels, preds);
    const double rho = spearman(labels, preds);
    c.log << "    seed " << seed << ": epochs " << epochs_used << ", val MAE " << mae
          << ", val Spearman " << rho << "\n";
    c.check(epochs_used <= 50, "seed " + std::to_string(seed) + " within 50 epochs");
    c.check(rho >= 0.6, "seed " + std::to_string(seed) + " Spearman >= 0.6");
    c.check(mae <= 0.15, "seed " + std::to_string(seed) + " MAE <= 0.15");
  }
  return c.failures == 0;
}

bool criterion_ablation(Checker& c) {
  const SyntheticCorpus corpus = training_corpus(1000);
  StiqaConfig base;
  base.seed = 1;
  base.epochs = 12;
  const ExperimentReport report = run_ablation(corpus.labeled, base);
  c.check(report.rows.size() == 3, "three variants reported");

  double s_prob = 0.0, s_pt = 0.0, s_full = 0.0;
  for (const auto& row : report.rows) {
    const double rho = row.values.at("spearman");
    c.log << "    " << row.tags.at("variant") << ": spearman " << rho << ", mae "
          << row.values.at("mae") << "\n";
    if (row.tags.at("variant") == "prob_only") s_prob = rho;
    if (row.tags.at("variant") == "prob_transformer") s_pt = rho;
    if (row.tags.at("variant") == "full") s_full = rho;
  }
  c.check(s_full >= s_pt, "full >= prob+transformer on held-out Spearman");
  c.check(s_pt >= s_prob, "prob+transformer >= prob-only on held-out Spearman");
  c.check(s_full > s_prob, "full > prob-only strictly");
  return c.failures == 0;
}

bool criterion_pipeline(Checker& c) {
  const SyntheticCorpus corpus = training_corpus(1000);
  const StiqaModel model = train_stiqa(acceptance_config(1), corpus.labeled);
  const Assessor assess = [&](const RasterImage& crop) { return model.assess(crop).value; };

  const DeterministicCodec codec;
  ControllerConfig config;  // lambda 5, target 0.90, 3 iterations

  Rng rng(5150);
  int improved = 0;
  int scenes_run = 0;
  for (int i = 0; scenes_run < 20; ++i) {
    Rng scene_rng = rng.fork(static_cast<std::uint64_t>(i));
    SceneOptions options;
    SyntheticScene scene = generate_scene(scene_rng, options);
    if (scene.regions.empty()) continue;
    ++scenes_run;

    const PipelineOutput out = run_pipeline(scene.image, scene.regions, assess, codec, config);
    c.check(out.best().mean_score >= out.trace.front().mean_score - 1e-12,
            "selection guarantee on scene " + std::to_string(scenes_run));

    auto mean_finite = [](const std::vector<double>& values) {
      double acc = 0.0;
      size_t n = 0;
      for (double v : values) {
        if (std::isfinite(v)) {
          acc += v;
          ++n;
        }
      }
      return n ? acc / static_cast<double>(n) : 0.0;
    };
    const double init_psnr = mean_finite(out.trace.front().result.per_region_psnr);
    const double final_psnr = mean_finite(out.trace.back().result.per_region_psnr);
    if (final_psnr >= init_psnr + 1.0) ++improved;
    c.log << "    scene " << scenes_run << ": init " << init_psnr << " dB -> final "
          << final_psnr << " dB, best round " << out.best_round + 1 << "\n";
  }
  c.check(improved >= 16, "final map beats init by >= 1 dB on >= 80% of scenes (got " +
                              std::to_string(improved) + "/20)");
  return c.failures == 0;
}

bool criterion_loss_grid(Checker& c) {
  SyntheticCorpus corpus = training_corpus(300);
  StiqaConfig base;
  base.seed = 1;
  base.epochs = 4;
  const ExperimentReport report =
      run_loss_combination_sweep(corpus.labeled, base, {0.10, 0.15, 0.20});
  c.check(report.rows.size() == 7, "full grid: 1 L1 row + 3 eps rows + 3 combined rows");

  std::set<std::string> combos;
  for (const auto& row : report.rows) {
    combos.insert(row.tags.at("l1") + "/" + row.tags.at("eps") + "/" + row.tags.at("epsilon"));
    c.check(std::isfinite(row.values.at("mae")), "finite MAE");
    c.check(std::isfinite(row.values.at("spearman")), "finite Spearman");
    c.check(std::isfinite(row.values.at("pearson")), "finite Pearson");
  }
  c.check(combos.size() == 7, "rows are distinct combinations");

  const std::filesystem::path out =
      std::filesystem::temp_directory_path() / "textiq_loss_grid.jsonl";
  report.save_jsonl(out);
  const ExperimentReport back = ExperimentReport::load_jsonl(out);
  c.check(back.rows.size() == 7, "report emitted and reloadable");
  return c.failures == 0;
}

bool criterion_metrics(Checker& c) {
  const RasterImage zeros(24, 24, 0.0f);
  const RasterImage ones(24, 24, 1.0f);
  const RasterImage half(24, 24, 0.5f);
  c.check(std::isinf(psnr(zeros, zeros)), "identical images hit the +inf sentinel");
  c.check_close(psnr(zeros, ones), 0.0, 1e-12, "psnr of maximal error");
  c.check_close(psnr(zeros, half), 10.0 * std::log10(4.0), 1e-9, "psnr closed form");

  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    RasterImage a(40, 32);
    if (i % 2 == 0) {
      for (float& v : a.pixels) v = static_cast<float>(rng.uniform());
    } else {
      for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 40; ++x) {
          a.at(x, y) = static_cast<float>(0.5 + 0.4 * std::sin(0.2 * x) * std::cos(0.13 * y));
        }
      }
    }
    RasterImage b = a;
    for (float& v : b.pixels) {
      v = static_cast<float>(clamp01(v + rng.normal(0.0, 0.02 + 0.004 * i)));
    }
    const double mine = ssim(a, b);
    const double ref = oracle::ssim_direct(a, b);
    if (std::abs(mine - ref) > 1e-4) {
      std::ostringstream msg;
      msg << "ssim pair " << i << ": " << mine << " vs reference " << ref;
      c.check(false, msg.str());
    }
  }
  return c.failures == 0;
}

struct Criterion {
  int id;
  const char* name;
  bool (*run)(Checker&);
};

const Criterion kCriteria[] = {
    {1, "equation fidelity (update rule, losses, label terms, edit distance)",
     criterion_equations},
    {2, "analytic gradients match central finite differences", criterion_gradients},
    {3, "codec rate/distortion monotonicity, shape exactness, golden blob", criterion_codec},
    {4, "controller fixed points and selection rule", criterion_controller},
    {5, "desk-scale training reaches Spearman >= 0.6 and MAE <= 0.15, 3/3 seeds",
     criterion_training},
    {6, "ablation ordering: full >= prob+transformer >= prob-only", criterion_ablation},
    {7, "pipeline improves text-region quality over the initial map", criterion_pipeline},
    {8, "loss-combination grid completes and emits a full report", criterion_loss_grid},
    {9, "metric correctness: PSNR closed forms, SSIM vs reference", criterion_metrics},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  bool all_pass = true;
  for (const auto& criterion : kCriteria) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), criterion.id) == selected.end()) {
      continue;
    }
    Checker checker;
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    try {
      ok = criterion.run(checker);
    } catch (const std::exception& e) {
      checker.check(false, std::string("exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << criterion.id << ": "
              << criterion.name << " (" << seconds << " s)\n"
              << checker.log.str();
    std::cout.flush();
    all_pass = all_pass && ok;
  }
  return all_pass ? 0 : 1;
}
