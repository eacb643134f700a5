#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_oracles.hpp"
#include "textiq/labels.hpp"

using namespace textiq;

namespace {

CharProbSequence uniform_rows(size_t n) {
  CharProbSequence seq;
  for (size_t i = 0; i < n; ++i) {
    std::array<double, kNumCharClasses> row;
    row.fill(1.0 / kNumCharClasses);
    seq.rows.push_back(row);
  }
  return seq;
}

CharProbSequence one_hot(const std::string& text) {
  CharProbSequence seq;
  for (char c : text) {
    std::array<double, kNumCharClasses> row{};
    row[static_cast<size_t>(char_class_index(c))] = 1.0;
    seq.rows.push_back(row);
  }
  return seq;
}

std::string random_alphabet_string(Rng& rng, size_t max_len) {
  std::string s;
  const size_t len = rng.uniform_index(max_len + 1);
  for (size_t i = 0; i < len; ++i) {
    s.push_back(char_class_symbol(static_cast<int>(rng.uniform_index(kNumCharClasses))));
  }
  return s;
}

RasterImage noisy_text_image(std::uint64_t seed) {
  Rng rng(seed);
  RasterImage img(kAssessWidth, kAssessHeight, 0.85f);
  for (int y = 8; y < 24; ++y) {
    for (int x = 10; x < 110; x += 7) {
      for (int dx = 0; dx < 4; ++dx) img.at(x + dx, y) = 0.1f;
    }
  }
  for (float& v : img.pixels) {
    v = static_cast<float>(clamp01(v + rng.normal(0.0, 0.02)));
  }
  return img;
}

}  // namespace

TEST_SUITE("labels") {
  TEST_CASE("levenshtein spec cases") {
    CHECK(levenshtein("abc", "abc") == 0);
    CHECK(levenshtein("kitten", "sitting") == 3);
    CHECK(oracle::levenshtein_full_matrix("kitten", "sitting") == 3);
    CHECK(levenshtein("", "abcd") == 4);
    CHECK(levenshtein("abcd", "") == 4);
  }

  TEST_CASE("levenshtein agrees with the full-matrix oracle") {
    Rng rng(2024);
    for (int i = 0; i < 300; ++i) {
      const std::string a = random_alphabet_string(rng, 12);
      const std::string b = random_alphabet_string(rng, 12);
      CHECK(levenshtein(a, b) == oracle::levenshtein_full_matrix(a, b));
    }
  }

  TEST_CASE("levenshtein is a metric") {
    Rng rng(777);
    for (int i = 0; i < 200; ++i) {
      const std::string a = random_alphabet_string(rng, 10);
      const std::string b = random_alphabet_string(rng, 10);
      const std::string c = random_alphabet_string(rng, 10);
      const size_t ab = levenshtein(a, b);
      CHECK(ab == levenshtein(b, a));
      CHECK((ab == 0) == (a == b));
      CHECK(ab <= levenshtein(a, c) + levenshtein(c, b));
    }
  }

  TEST_CASE("confidence spec cases") {
    CharProbSequence two;
    std::array<double, kNumCharClasses> r1{};
    r1[0] = 0.8;
    r1[1] = 0.2;
    std::array<double, kNumCharClasses> r2{};
    r2[5] = 1.0;
    two.rows = {r1, r2};
    CHECK(confidence(two) == doctest::Approx(0.9).epsilon(1e-12));

    CHECK(confidence(one_hot("abc")) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(confidence(uniform_rows(1)) == doctest::Approx(1.0 / 37.0).epsilon(1e-12));
    CHECK_THROWS_AS(confidence(CharProbSequence{}), InvalidArgument);
  }

  TEST_CASE("accuracy spec cases") {
    CHECK(accuracy("hello", "hallo", 5) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(accuracy("stop", "stop", 4) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(accuracy("a", "zzzzz", 5) == doctest::Approx(0.0).epsilon(1e-12));
    // Clamp: distance can exceed the prediction length.
    CHECK(accuracy("abcdefgh", "z", 1) == 0.0);
    CHECK_THROWS_AS(accuracy("abc", "", 0), InvalidArgument);
  }

  TEST_CASE("make_label spec cases") {
    RecognizerOutput rec;
    rec.probs = one_hot("stop");
    rec.decoded_text = "stop";
    const QualityLabel perfect = make_label("stop", rec);
    CHECK(perfect.q == doctest::Approx(1.0).epsilon(1e-12));

    RecognizerOutput uniform;
    uniform.probs = uniform_rows(4);
    uniform.decoded_text = argmax_decode(uniform.probs);
    const QualityLabel low = make_label("zzzz", uniform);
    CHECK(low.c == doctest::Approx(1.0 / 37.0).epsilon(1e-12));
    CHECK(low.a == 0.0);
    CHECK(low.q == doctest::Approx(1.0 / 74.0).epsilon(1e-12));

    RecognizerOutput empty;
    const QualityLabel worst = make_label("anything", empty);
    CHECK(worst.q == 0.0);
    CHECK(worst.c == 0.0);
    CHECK(worst.a == 0.0);
  }

  TEST_CASE("make_label is monotone in c and a") {
    // Higher confidence with the same decoded text never lowers q; a better
    // transcription match with the same confidence never lowers q either.
    RecognizerOutput sharp;
    sharp.probs = one_hot("abc");
    sharp.decoded_text = "abc";
    RecognizerOutput blunt = sharp;
    for (auto& row : blunt.probs.rows) {
      for (double& p : row) p = 0.6 * p + 0.4 / kNumCharClasses;
    }
    CHECK(make_label("abc", sharp).q >= make_label("abc", blunt).q);
    CHECK(make_label("abc", blunt).q >= make_label("xyz", blunt).q);
  }

  TEST_CASE("synthetic recognizer: clean limit") {
    const RasterImage img = noisy_text_image(1);
    const RecognizerOutput out = synthetic_recognizer(img, "stop", 0.0);
    out.validate();
    CHECK(out.decoded_text == "stop");
    CHECK(confidence(out.probs) >= 0.99);
  }

  TEST_CASE("synthetic recognizer: fully degraded limit") {
    const RasterImage img = noisy_text_image(2);
    const RecognizerOutput out = synthetic_recognizer(img, "stop", 1.0);
    out.validate();
    CHECK(std::abs(confidence(out.probs) - 1.0 / 37.0) < 0.05);
    // Every character substituted: accuracy collapses to zero.
    CHECK(make_label("stop", out).a == 0.0);
  }

  TEST_CASE("synthetic recognizer: deterministic and knob-monotone confidence") {
    const RasterImage img = noisy_text_image(3);
    const RecognizerOutput a = synthetic_recognizer(img, "north", 0.5);
    const RecognizerOutput b = synthetic_recognizer(img, "north", 0.5);
    REQUIRE(a.probs.length() == b.probs.length());
    for (size_t i = 0; i < a.probs.rows.size(); ++i) {
      CHECK(a.probs.rows[i] == b.probs.rows[i]);
    }
    double prev = 2.0;
    for (double knob : {0.0, 0.3, 0.6, 0.9}) {
      const double c = confidence(synthetic_recognizer(img, "north", knob).probs);
      CHECK(c < prev + 1e-9);
      prev = c;
    }
  }

  TEST_CASE("synthetic recognizer: golden regression") {
    const RasterImage img = noisy_text_image(4);
    const RecognizerOutput out = synthetic_recognizer(img, "exit", 0.5);
    std::ostringstream dump;
    dump.precision(17);
    dump << out.decoded_text << "\n";
    for (const auto& row : out.probs.rows) {
      for (double p : row) dump << p << " ";
      dump << "\n";
    }

    const std::filesystem::path golden =
        std::filesystem::path(TEXTIQ_TEST_DATA_DIR) / "synthetic_recognizer_golden.txt";
    if (std::getenv("TEXTIQ_REGEN_GOLDEN")) {
      std::ofstream(golden) << dump.str();
      return;
    }
    std::ifstream in(golden);
    REQUIRE_MESSAGE(in.good(), "golden file missing; regenerate with TEXTIQ_REGEN_GOLDEN=1");
    std::stringstream want;
    want << in.rdbuf();
    CHECK(dump.str() == want.str());
  }

  TEST_CASE("external recognizer protocol") {
    // Fake recognizer: checks the PGM header arrives, emits two fixed rows.
    const std::filesystem::path script =
        std::filesystem::temp_directory_path() / "textiq_fake_rec.sh";
    {
      std::ofstream out(script);
      out << "#!/bin/sh\n"
          << "head -c 15 > /dev/null\n"  // consume the header; payload may be dropped
          << "cat > /dev/null\n"
          << "awk 'BEGIN { for (r = 0; r < 2; r++) { for (i = 0; i < 37; i++) "
          << "printf \"%s\", (i == r ? \"0.64 \" : \"0.01 \"); print \"\" } }'\n";
    }
    std::filesystem::permissions(script, std::filesystem::perms::owner_all);

    ExternalRecognizer rec("sh " + script.string());
    const RasterImage img(kAssessWidth, kAssessHeight, 0.5f);
    const RecognizerOutput out = rec.recognize(img, "ab");
    REQUIRE(out.probs.length() == 2);
    CHECK(out.decoded_text == "ab");
    CHECK(out.probs.rows[0][0] == doctest::Approx(0.64).epsilon(1e-6));

    ExternalRecognizer bad("false");
    CHECK_THROWS_AS(bad.recognize(img, "x"), IoError);

    ExternalRecognizer garbage("echo 0.5 0.5");
    CHECK_THROWS_AS(garbage.recognize(img, "x"), FormatError);
  }
}
