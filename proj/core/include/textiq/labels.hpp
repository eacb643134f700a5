#pragma once

#include <array>
#include <string>
#include <vector>

#include "textiq/common.hpp"
#include "textiq/image.hpp"

namespace textiq {

// Per-position probability distributions over the 37 character classes.
struct CharProbSequence {
  std::vector<std::array<double, kNumCharClasses>> rows;

  size_t length() const { return rows.size(); }

  // Each row must sum to 1 within 1e-6 with no negative entries.
  void validate() const;
};

struct RecognizerOutput {
  CharProbSequence probs;
  std::string decoded_text;  // argmax decoding of probs, same length

  void validate() const;
};

// q = (c + a) / 2 with both terms in [0,1].
struct QualityLabel {
  double q = 0.0;
  double c = 0.0;
  double a = 0.0;
};

// Unit-cost edit distance (insert / delete / substitute).
size_t levenshtein(const std::string& s1, const std::string& s2);

// Mean over rows of the row maximum. Rejects empty sequences.
double confidence(const CharProbSequence& probs);

// max(0, 1 - d_lev(ground_truth, prediction) / n) with n = |prediction|.
double accuracy(const std::string& ground_truth, const std::string& prediction, size_t n);

// Combines confidence and accuracy. An empty prediction maps to q = c = a = 0
// so batch label generation treats fully failed recognition as worst quality.
QualityLabel make_label(const std::string& ground_truth, const RecognizerOutput& rec);

std::string argmax_decode(const CharProbSequence& probs);

// ---- recognizers ---------------------------------------------------------

class Recognizer {
 public:
  virtual ~Recognizer() = default;
  // `region_image` is the 32x128 assessment crop; `ground_truth` is the
  // normalized transcription the region is supposed to contain.
  virtual RecognizerOutput recognize(const RasterImage& region_image,
                                     const std::string& ground_truth) = 0;
};

// Deterministic stand-in for a trained recognition model. Probability rows
// sharpen toward the ground-truth one-hot as the region's measured sharpness
// and contrast rise and as the degradation knob falls; character mistakes
// appear at a rate that grows with degradation.
class SyntheticRecognizer : public Recognizer {
 public:
  explicit SyntheticRecognizer(double degradation_knob = 0.0);
  RecognizerOutput recognize(const RasterImage& region_image,
                             const std::string& ground_truth) override;

  void set_degradation(double knob) { degradation_ = knob; }

 private:
  double degradation_;
};

RecognizerOutput synthetic_recognizer(const RasterImage& region_image,
                                      const std::string& ground_truth, double degradation_knob);

// Shells out per region: writes a 32x128 binary PGM to the command's stdin and
// expects n lines of 37 whitespace-separated probabilities on stdout.
class ExternalRecognizer : public Recognizer {
 public:
  explicit ExternalRecognizer(std::string command);
  RecognizerOutput recognize(const RasterImage& region_image,
                             const std::string& ground_truth) override;

 private:
  std::string command_;
};

// Fills the `label` field of every region in the manifest: crop, resize to the
// assessment canvas, recognize, score. `resize_seed` keeps the run reproducible.
void generate_labels(DatasetManifest& manifest, Recognizer& recognizer,
                     std::uint64_t resize_seed = 0);

}  // namespace textiq
