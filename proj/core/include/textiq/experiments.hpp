#pragma once

#include <map>
#include <string>
#include <vector>

#include "textiq/codec.hpp"
#include "textiq/controller.hpp"
#include "textiq/stiqa.hpp"
#include "textiq/synthetic.hpp"

namespace textiq {

struct ReportRow {
  std::string experiment;
  std::map<std::string, std::string> tags;    // categorical cells
  std::map<std::string, double> values;       // numeric cells
};

struct ExperimentReport {
  std::map<std::string, std::string> provenance;  // seeds, config hashes
  std::vector<ReportRow> rows;

  void save_jsonl(const std::filesystem::path& path) const;
  static ExperimentReport load_jsonl(const std::filesystem::path& path);

  std::string render_table() const;

  // Line plot of value `y_key` against `x_key`, one polyline per distinct
  // `series_tag` value. Rows missing either key are skipped.
  void save_svg_plot(const std::filesystem::path& path, const std::string& x_key,
                     const std::string& y_key, const std::string& series_tag,
                     const std::string& title) const;
};

// Rate/score grid over the update-strength and iteration-count hyperparameters:
// each cell runs the full pipeline on every scene and averages the selected
// round's bpp and mean assessed score.
ExperimentReport run_hyperparameter_sweep(const std::vector<SyntheticScene>& scenes,
                                          const Assessor& assess, const Codec& codec,
                                          const ControllerConfig& base,
                                          const std::vector<double>& lambda_grid,
                                          const std::vector<int>& iteration_grid);

// Trains the three model variants on the same corpus, seed and split; reports
// held-out MAE / Spearman / Pearson per variant.
ExperimentReport run_ablation(const std::vector<LabeledRegion>& corpus,
                              const StiqaConfig& base);

// {L1, eps-insensitive, both} x epsilon grid, shared corpus and seed.
ExperimentReport run_loss_combination_sweep(const std::vector<LabeledRegion>& corpus,
                                            const StiqaConfig& base,
                                            const std::vector<double>& epsilon_grid);

// Per-scene pipeline summary against the fixed initialization map: entire-image
// and text-region quality before/after weight adaptation.
ExperimentReport run_pipeline_report(const std::vector<SyntheticScene>& scenes,
                                     const Assessor& assess, const Codec& codec,
                                     const ControllerConfig& config);

}  // namespace textiq
