#include "textiq/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "textiq/config.hpp"
#include "textiq/metrics.hpp"

namespace textiq {

void ExperimentReport::save_jsonl(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report: " + path.string());
  nlohmann::json header;
  header["provenance"] = provenance;
  out << header.dump() << "\n";
  for (const auto& row : rows) {
    nlohmann::json rec;
    rec["experiment"] = row.experiment;
    rec["tags"] = row.tags;
    rec["values"] = row.values;
    out << rec.dump() << "\n";
  }
}

ExperimentReport ExperimentReport::load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report: " + path.string());
  ExperimentReport report;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("bad report line: " + std::string(e.what()));
    }
    if (first && rec.contains("provenance")) {
      report.provenance = rec["provenance"].get<std::map<std::string, std::string>>();
      first = false;
      continue;
    }
    first = false;
    ReportRow row;
    row.experiment = rec.value("experiment", "");
    if (rec.contains("tags")) row.tags = rec["tags"].get<std::map<std::string, std::string>>();
    if (rec.contains("values")) {
      row.values = rec["values"].get<std::map<std::string, double>>();
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string ExperimentReport::render_table() const {
  // Collect the union of columns in first-seen order.
  std::vector<std::string> tag_cols;
  std::vector<std::string> value_cols;
  for (const auto& row : rows) {
    for (const auto& [k, v] : row.tags) {
      if (std::find(tag_cols.begin(), tag_cols.end(), k) == tag_cols.end()) {
        tag_cols.push_back(k);
      }
    }
    for (const auto& [k, v] : row.values) {
      if (std::find(value_cols.begin(), value_cols.end(), k) == value_cols.end()) {
        value_cols.push_back(k);
      }
    }
  }

  std::ostringstream out;
  for (const auto& [k, v] : provenance) {
    out << "# " << k << " = " << v << "\n";
  }
  auto pad = [](const std::string& s, size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
  };
  constexpr size_t kWidth = 16;
  out << pad("experiment", kWidth);
  for (const auto& c : tag_cols) out << pad(c, kWidth);
  for (const auto& c : value_cols) out << pad(c, kWidth);
  out << "\n";
  for (const auto& row : rows) {
    out << pad(row.experiment, kWidth);
    for (const auto& c : tag_cols) {
      const auto it = row.tags.find(c);
      out << pad(it == row.tags.end() ? "-" : it->second, kWidth);
    }
    for (const auto& c : value_cols) {
      const auto it = row.values.find(c);
      if (it == row.values.end()) {
        out << pad("-", kWidth);
      } else {
        std::ostringstream cell;
        cell << std::setprecision(5) << it->second;
        out << pad(cell.str(), kWidth);
      }
    }
    out << "\n";
  }
  return out.str();
}

void ExperimentReport::save_svg_plot(const std::filesystem::path& path, const std::string& x_key,
                                     const std::string& y_key, const std::string& series_tag,
                                     const std::string& title) const {
  struct Point {
    double x, y;
  };
  std::map<std::string, std::vector<Point>> series;
  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  for (const auto& row : rows) {
    const auto xi = row.values.find(x_key);
    const auto yi = row.values.find(y_key);
    if (xi == row.values.end() || yi == row.values.end()) continue;
    const auto tag = row.tags.find(series_tag);
    const std::string name = tag == row.tags.end() ? "all" : tag->second;
    series[name].push_back({xi->second, yi->second});
    min_x = std::min(min_x, xi->second);
    max_x = std::max(max_x, xi->second);
    min_y = std::min(min_y, yi->second);
    max_y = std::max(max_y, yi->second);
  }
  if (series.empty()) throw InvalidArgument("no rows carry both plot keys");
  if (max_x == min_x) max_x = min_x + 1.0;
  if (max_y == min_y) max_y = min_y + 1.0;

  constexpr int kW = 640, kH = 420, kMargin = 60;
  auto sx = [&](double x) {
    return kMargin + (x - min_x) / (max_x - min_x) * (kW - 2 * kMargin);
  };
  auto sy = [&](double y) {
    return kH - kMargin - (y - min_y) / (max_y - min_y) * (kH - 2 * kMargin);
  };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b"};

  std::ofstream out(path);
  if (!out) throw IoError("cannot write plot: " + path.string());
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH
      << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << kW / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
      << "</text>\n";
  out << "<line x1='" << kMargin << "' y1='" << kH - kMargin << "' x2='" << kW - kMargin
      << "' y2='" << kH - kMargin << "' stroke='black'/>\n";
  out << "<line x1='" << kMargin << "' y1='" << kMargin << "' x2='" << kMargin << "' y2='"
      << kH - kMargin << "' stroke='black'/>\n";
  out << "<text x='" << kW / 2 << "' y='" << kH - 16 << "' text-anchor='middle' font-size='12'>"
      << x_key << "</text>\n";
  out << "<text x='18' y='" << kH / 2 << "' font-size='12' transform='rotate(-90 18 "
      << kH / 2 << ")' text-anchor='middle'>" << y_key << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = min_x + (max_x - min_x) * i / 4.0;
    const double yv = min_y + (max_y - min_y) * i / 4.0;
    out << "<text x='" << sx(xv) << "' y='" << kH - kMargin + 16
        << "' text-anchor='middle' font-size='10'>" << std::setprecision(3) << xv
        << "</text>\n";
    out << "<text x='" << kMargin - 8 << "' y='" << sy(yv) + 4
        << "' text-anchor='end' font-size='10'>" << std::setprecision(3) << yv << "</text>\n";
  }
  int color = 0;
  int legend_y = kMargin;
  for (auto& [name, points] : series) {
    auto sorted = points;
    std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) { return a.x < b.x; });
    out << "<polyline fill='none' stroke='" << kColors[color % 6] << "' stroke-width='2' points='";
    for (const auto& p : sorted) out << sx(p.x) << "," << sy(p.y) << " ";
    out << "'/>\n";
    for (const auto& p : sorted) {
      out << "<circle cx='" << sx(p.x) << "' cy='" << sy(p.y) << "' r='3' fill='"
          << kColors[color % 6] << "'/>\n";
    }
    out << "<text x='" << kW - kMargin + 4 << "' y='" << legend_y << "' font-size='11' fill='"
        << kColors[color % 6] << "'>" << name << "</text>\n";
    legend_y += 16;
    ++color;
  }
  out << "</svg>\n";
}

// ---- experiment runners -----------------------------------------------------

ExperimentReport run_hyperparameter_sweep(const std::vector<SyntheticScene>& scenes,
                                          const Assessor& assess, const Codec& codec,
                                          const ControllerConfig& base,
                                          const std::vector<double>& lambda_grid,
                                          const std::vector<int>& iteration_grid) {
  require(!scenes.empty(), "sweep needs at least one scene");
  ExperimentReport report;
  report.provenance["config_hash"] = std::to_string(describe(base).hash());
  report.provenance["scene_count"] = std::to_string(scenes.size());

  for (const int iterations : iteration_grid) {
    for (const double lambda : lambda_grid) {
      ControllerConfig config = base;
      config.lambda = lambda;
      config.iterations = iterations;

      double sum_bpp = 0.0;
      double sum_score = 0.0;
      size_t scored = 0;
      for (const auto& scene : scenes) {
        const PipelineOutput out =
            run_pipeline(scene.image, scene.regions, assess, codec, config);
        sum_bpp += out.best().bpp;
        if (!scene.regions.empty()) {
          sum_score += out.best().mean_score;
          ++scored;
        }
      }
      ReportRow row;
      row.experiment = "sweep";
      row.tags["iterations"] = std::to_string(iterations);
      row.values["lambda"] = lambda;
      row.values["iterations"] = iterations;
      row.values["bpp"] = sum_bpp / static_cast<double>(scenes.size());
      row.values["stiqa"] = scored ? sum_score / static_cast<double>(scored) : 0.0;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

namespace {

EvalMetrics held_out_metrics(const StiqaModel& model, const std::vector<LabeledRegion>& corpus,
                             const std::vector<size_t>& val_indices) {
  std::vector<double> labels;
  std::vector<double> preds;
  labels.reserve(val_indices.size());
  preds.reserve(val_indices.size());
  for (size_t i : val_indices) {
    labels.push_back(corpus[i].label);
    preds.push_back(model.assess(corpus[i].image).value);
  }
  EvalMetrics m;
  m.mae = mean_absolute_error(labels, preds);
  m.spearman = spearman(labels, preds);
  m.pearson = pearson(labels, preds);
  return m;
}

}  // namespace

ExperimentReport run_ablation(const std::vector<LabeledRegion>& corpus,
                              const StiqaConfig& base) {
  ExperimentReport report;
  report.provenance["seed"] = std::to_string(base.seed);
  report.provenance["config_hash"] = std::to_string(describe(base).hash());
  report.provenance["corpus_size"] = std::to_string(corpus.size());

  const DatasetSplit split = stiqa_split(corpus.size(), base.val_split_seed);
  for (const StiqaVariant variant :
       {StiqaVariant::kProbOnly, StiqaVariant::kProbTransformer, StiqaVariant::kFull}) {
    StiqaConfig config = base;
    config.variant = variant;
    // The stopping rule must not depend on the variant, so the trend
    // comparison stays honest.
    config.target_val_spearman = 0.0;
    config.target_val_mae = 0.0;
    const StiqaModel model = train_stiqa(config, corpus);
    const EvalMetrics metrics = held_out_metrics(model, corpus, split.val);

    ReportRow row;
    row.experiment = "ablation";
    row.tags["variant"] = to_string(variant);
    row.values["mae"] = metrics.mae;
    row.values["spearman"] = metrics.spearman;
    row.values["pearson"] = metrics.pearson;
    report.rows.push_back(std::move(row));
  }
  return report;
}

ExperimentReport run_loss_combination_sweep(const std::vector<LabeledRegion>& corpus,
                                            const StiqaConfig& base,
                                            const std::vector<double>& epsilon_grid) {
  require(!epsilon_grid.empty(), "epsilon grid must be non-empty");
  ExperimentReport report;
  report.provenance["seed"] = std::to_string(base.seed);
  report.provenance["corpus_size"] = std::to_string(corpus.size());

  const DatasetSplit split = stiqa_split(corpus.size(), base.val_split_seed);

  struct Combo {
    bool l1;
    bool eps;
  };
  for (const Combo combo : {Combo{true, false}, Combo{false, true}, Combo{true, true}}) {
    for (const double epsilon : epsilon_grid) {
      if (!combo.eps && epsilon != epsilon_grid.front()) {
        continue;  // epsilon is moot for the pure-L1 row
      }
      StiqaConfig config = base;
      config.use_l1 = combo.l1;
      config.use_epsilon = combo.eps;
      config.epsilon = epsilon;
      config.target_val_spearman = 0.0;
      config.target_val_mae = 0.0;
      const StiqaModel model = train_stiqa(config, corpus);
      const EvalMetrics metrics = held_out_metrics(model, corpus, split.val);

      ReportRow row;
      row.experiment = "loss_combo";
      row.tags["l1"] = combo.l1 ? "yes" : "no";
      row.tags["eps"] = combo.eps ? "yes" : "no";
      row.tags["epsilon"] = combo.eps ? std::to_string(epsilon) : "na";
      row.values["mae"] = metrics.mae;
      row.values["spearman"] = metrics.spearman;
      row.values["pearson"] = metrics.pearson;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

ExperimentReport run_pipeline_report(const std::vector<SyntheticScene>& scenes,
                                     const Assessor& assess, const Codec& codec,
                                     const ControllerConfig& config) {
  ExperimentReport report;
  report.provenance["config_hash"] = std::to_string(describe(config).hash());

  for (size_t i = 0; i < scenes.size(); ++i) {
    const auto& scene = scenes[i];
    const PipelineOutput out = run_pipeline(scene.image, scene.regions, assess, codec, config);
    const auto& first = out.trace.front();
    const auto& best = out.best();

    auto mean_psnr = [](const std::vector<double>& values) {
      if (values.empty()) return 0.0;
      double acc = 0.0;
      size_t finite = 0;
      for (double v : values) {
        if (std::isfinite(v)) {
          acc += v;
          ++finite;
        }
      }
      return finite ? acc / static_cast<double>(finite) : 0.0;
    };

    ReportRow row;
    row.experiment = "pipeline";
    row.tags["scene"] = std::to_string(i);
    row.values["rounds"] = static_cast<double>(out.trace.size());
    row.values["best_round"] = static_cast<double>(out.best_round + 1);
    row.values["init_bpp"] = first.bpp;
    row.values["best_bpp"] = best.bpp;
    row.values["init_score"] = first.mean_score;
    row.values["best_score"] = best.mean_score;
    row.values["init_region_psnr"] = mean_psnr(first.result.per_region_psnr);
    row.values["best_region_psnr"] = mean_psnr(best.result.per_region_psnr);
    row.values["entire_psnr"] = psnr(scene.image, best.result.reconstruction);
    row.values["entire_ssim"] = ssim(scene.image, best.result.reconstruction);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace textiq
