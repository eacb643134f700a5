#include "textiq/labels.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace textiq {

void CharProbSequence::validate() const {
  for (size_t i = 0; i < rows.size(); ++i) {
    double sum = 0.0;
    for (double p : rows[i]) {
      if (p < 0.0) {
        throw InvalidArgument("probability row " + std::to_string(i) + " has negative entry");
      }
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-6) {
      throw InvalidArgument("probability row " + std::to_string(i) + " sums to " +
                            std::to_string(sum));
    }
  }
}

void RecognizerOutput::validate() const {
  probs.validate();
  if (decoded_text.size() != probs.length()) {
    throw InvalidArgument("decoded text length does not match probability rows");
  }
  for (size_t i = 0; i < probs.rows.size(); ++i) {
    const auto& row = probs.rows[i];
    const int argmax =
        static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (char_class_index(decoded_text[i]) != argmax) {
      throw InvalidArgument("decoded text disagrees with argmax at position " + std::to_string(i));
    }
  }
}

std::string argmax_decode(const CharProbSequence& probs) {
  std::string out;
  out.reserve(probs.rows.size());
  for (const auto& row : probs.rows) {
    const int argmax =
        static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    out.push_back(char_class_symbol(argmax));
  }
  return out;
}

size_t levenshtein(const std::string& s1, const std::string& s2) {
  const size_t m = s1.size();
  const size_t n = s2.size();
  if (m == 0) return n;
  if (n == 0) return m;

  // Two-row DP.
  std::vector<size_t> costs(n + 1);
  std::iota(costs.begin(), costs.end(), size_t{0});
  for (size_t i = 0; i < m; ++i) {
    size_t corner = costs[0];
    costs[0] = i + 1;
    for (size_t j = 0; j < n; ++j) {
      const size_t upper = costs[j + 1];
      if (s1[i] == s2[j]) {
        costs[j + 1] = corner;
      } else {
        costs[j + 1] = 1 + std::min({upper, corner, costs[j]});
      }
      corner = upper;
    }
  }
  return costs[n];
}

double confidence(const CharProbSequence& probs) {
  require(probs.length() >= 1, "confidence: empty probability sequence");
  double sum = 0.0;
  for (const auto& row : probs.rows) {
    sum += *std::max_element(row.begin(), row.end());
  }
  return sum / static_cast<double>(probs.length());
}

double accuracy(const std::string& ground_truth, const std::string& prediction, size_t n) {
  require(n >= 1, "accuracy: prediction length must be positive");
  require(n == prediction.size(), "accuracy: n must equal the prediction length");
  const double d = static_cast<double>(levenshtein(ground_truth, prediction));
  return std::max(0.0, 1.0 - d / static_cast<double>(n));
}

QualityLabel make_label(const std::string& ground_truth, const RecognizerOutput& rec) {
  QualityLabel label;
  if (rec.probs.length() == 0) {
    // Fully failed recognition counts as worst quality.
    return label;
  }
  label.c = confidence(rec.probs);
  label.a = accuracy(ground_truth, rec.decoded_text, rec.decoded_text.size());
  label.q = 0.5 * (label.c + label.a);
  return label;
}

// ---- synthetic recognizer -------------------------------------------------

namespace {

// Rough signal statistic in [0,1]: contrast (intensity spread) times edge
// strength (mean absolute first difference). Calibrated so clean rendered
// text sits near 1 and blurred low-contrast regions near 0.
double measure_region_signal(const RasterImage& img) {
  const size_t n = img.size();
  if (n == 0) return 0.0;
  double mean = 0.0;
  for (float v : img.pixels) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (float v : img.pixels) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double contrast = std::sqrt(var);

  double grad = 0.0;
  size_t count = 0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x + 1 < img.width; ++x) {
      grad += std::fabs(img.at(x + 1, y) - img.at(x, y));
      ++count;
    }
  }
  for (int y = 0; y + 1 < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      grad += std::fabs(img.at(x, y + 1) - img.at(x, y));
      ++count;
    }
  }
  const double sharpness = count ? grad / static_cast<double>(count) : 0.0;

  return clamp01(contrast / 0.2) * clamp01(sharpness / 0.03);
}

std::uint64_t hash_inputs(const RasterImage& img, const std::string& gt, double knob) {
  std::uint64_t h = fnv1a(gt);
  h = fnv1a(std::to_string(knob), h);
  for (float v : img.pixels) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    h ^= bits;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

SyntheticRecognizer::SyntheticRecognizer(double degradation_knob)
    : degradation_(degradation_knob) {
  require(degradation_knob >= 0.0 && degradation_knob <= 1.0,
          "degradation knob must be in [0,1]");
}

RecognizerOutput SyntheticRecognizer::recognize(const RasterImage& region_image,
                                                const std::string& ground_truth) {
  return synthetic_recognizer(region_image, ground_truth, degradation_);
}

RecognizerOutput synthetic_recognizer(const RasterImage& region_image,
                                      const std::string& ground_truth,
                                      double degradation_knob) {
  require(degradation_knob >= 0.0 && degradation_knob <= 1.0,
          "degradation knob must be in [0,1]");
  const std::string gt = normalize_transcription(ground_truth);

  RecognizerOutput out;
  if (gt.empty()) return out;  // n = 0: worst-quality policy applies downstream

  const double signal = measure_region_signal(region_image);
  // Clean knob keeps the clean limit exact; low signal amplifies mid-range knobs.
  const double k = degradation_knob;
  const double d_eff = clamp01(k + (1.0 - signal) * k * (1.0 - k));

  // Uniform-mixture mass and substitution rate both grow with degradation.
  const double mix = clamp01(0.995 * std::pow(d_eff, 0.8));
  const double p_err = clamp01(1.15 * d_eff * d_eff);

  Rng rng(hash_inputs(region_image, gt, degradation_knob));

  out.probs.rows.reserve(gt.size());
  out.decoded_text.reserve(gt.size());
  for (char gc : gt) {
    int hot = char_class_index(gc);
    if (rng.uniform() < p_err) {
      // Substitute a wrong character class.
      int wrong = static_cast<int>(rng.uniform_index(kNumCharClasses - 1));
      if (wrong >= hot) ++wrong;
      hot = wrong;
    }

    std::array<double, kNumCharClasses> row{};
    // Jittered uniform floor keeps degraded rows near-uniform but not flat.
    double floor_sum = 0.0;
    for (int c = 0; c < kNumCharClasses; ++c) {
      row[c] = 1.0 + 0.2 * rng.uniform();
      floor_sum += row[c];
    }
    // Cap below 1 so the hot class always carries the argmax.
    const double row_mix = std::min(0.985, mix * (1.0 + 0.1 * (rng.uniform() - 0.5)));
    for (int c = 0; c < kNumCharClasses; ++c) {
      row[c] = row_mix * (row[c] / floor_sum);
    }
    row[hot] += 1.0 - row_mix;

    out.probs.rows.push_back(row);
    out.decoded_text.push_back(char_class_symbol(hot));
  }
  return out;
}

// ---- external recognizer ---------------------------------------------------

namespace {

std::string pgm_bytes(const RasterImage& img) {
  std::ostringstream out;
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float v = std::clamp(img.at(x, y), 0.0f, 1.0f);
      out.put(static_cast<char>(std::lround(v * 255.0f)));
    }
  }
  return out.str();
}

// Runs `command` through /bin/sh, feeding `input` on stdin, returning stdout.
std::string run_subprocess(const std::string& command, const std::string& input) {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
    throw IoError("recognizer subprocess: pipe() failed");
  }
  const pid_t pid = fork();
  if (pid < 0) throw IoError("recognizer subprocess: fork() failed");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);

  size_t written = 0;
  while (written < input.size()) {
    const ssize_t n = write(in_pipe[1], input.data() + written, input.size() - written);
    if (n <= 0) break;
    written += static_cast<size_t>(n);
  }
  close(in_pipe[1]);

  std::string output;
  char buf[4096];
  ssize_t n;
  while ((n = read(out_pipe[0], buf, sizeof(buf))) > 0) {
    output.append(buf, static_cast<size_t>(n));
  }
  close(out_pipe[0]);

  int status = 0;
  waitpid(pid, &status, 0);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw IoError("recognizer command failed (status " + std::to_string(status) + "): " + command);
  }
  return output;
}

}  // namespace

ExternalRecognizer::ExternalRecognizer(std::string command) : command_(std::move(command)) {
  require(!command_.empty(), "recognizer command must be non-empty");
}

RecognizerOutput ExternalRecognizer::recognize(const RasterImage& region_image,
                                               const std::string& /*ground_truth*/) {
  const std::string reply = run_subprocess(command_, pgm_bytes(region_image));

  RecognizerOutput out;
  std::istringstream lines(reply);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::array<double, kNumCharClasses> row{};
    double sum = 0.0;
    for (int c = 0; c < kNumCharClasses; ++c) {
      if (!(fields >> row[c])) {
        throw FormatError("recognizer output row " + std::to_string(out.probs.rows.size()) +
                          " has fewer than 37 probabilities");
      }
      if (row[c] < 0.0) {
        throw FormatError("recognizer output row " + std::to_string(out.probs.rows.size()) +
                          " has a negative probability");
      }
      sum += row[c];
    }
    double extra;
    if (fields >> extra) {
      throw FormatError("recognizer output row " + std::to_string(out.probs.rows.size()) +
                        " has more than 37 probabilities");
    }
    if (sum < 0.99 || sum > 1.01) {
      throw FormatError("recognizer output row " + std::to_string(out.probs.rows.size()) +
                        " sums to " + std::to_string(sum));
    }
    for (double& p : row) p /= sum;
    out.probs.rows.push_back(row);
  }
  out.decoded_text = argmax_decode(out.probs);
  out.validate();
  return out;
}

// ---- batch label generation -------------------------------------------------

void generate_labels(DatasetManifest& manifest, Recognizer& recognizer,
                     std::uint64_t resize_seed) {
  for (size_t e = 0; e < manifest.entries.size(); ++e) {
    auto& entry = manifest.entries[e];
    const RasterImage image = load_image(manifest.resolve(entry));
    for (size_t r = 0; r < entry.regions.size(); ++r) {
      auto& region = entry.regions[r];
      const RasterImage crop = crop_region(image, region);
      const std::uint64_t seed = fnv1a(std::to_string(e) + ":" + std::to_string(r),
                                       resize_seed ^ 0x9e3779b97f4a7c15ull);
      const RasterImage canvas = resize_for_assessment(crop, seed);
      const RecognizerOutput rec = recognizer.recognize(canvas, region.transcription);
      region.label = make_label(region.transcription, rec).q;
    }
  }
}

}  // namespace textiq
