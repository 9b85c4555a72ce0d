#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <map>
#include <set>

#include "stresskit/corpus.hpp"
#include "stresskit/errors.hpp"
#include "stresskit/rng.hpp"
#include "test_helpers.hpp"

using namespace stresskit;

namespace {

Manifest labeled_manifest(const std::map<StressLabel, long>& counts) {
  Manifest m;
  m.sample_rate_hz = 8000;
  long index = 0;
  for (const auto& [label, count] : counts) {
    for (long i = 0; i < count; ++i, ++index) {
      Utterance u;
      u.id = "u" + std::to_string(index);
      u.stress = label;
      m.utterances.push_back(u);
    }
  }
  return m;
}

std::map<Split, long> split_histogram(const Manifest& m, StressLabel label) {
  std::map<Split, long> h;
  for (const auto& u : m.utterances)
    if (u.effective_stress() == label) ++h[*u.split];
  return h;
}

}  // namespace

TEST_CASE("group_style: exact four-four grouping, question excluded") {
  CHECK(group_style(SpeakingStyle::Anger) == StyleGroup::Stress);
  CHECK(group_style(SpeakingStyle::Fast) == StyleGroup::Stress);
  CHECK(group_style(SpeakingStyle::Lombard) == StyleGroup::Stress);
  CHECK(group_style(SpeakingStyle::Loud) == StyleGroup::Stress);
  CHECK(group_style(SpeakingStyle::Clear) == StyleGroup::NoStress);
  CHECK(group_style(SpeakingStyle::Neutral) == StyleGroup::NoStress);
  CHECK(group_style(SpeakingStyle::Slow) == StyleGroup::NoStress);
  CHECK(group_style(SpeakingStyle::Soft) == StyleGroup::NoStress);
  CHECK(group_style(SpeakingStyle::Question) == StyleGroup::Excluded);

  int stress = 0, calm = 0, excluded = 0;
  for (int i = 0; i < kNumSpeakingStyles; ++i) {
    switch (group_style(static_cast<SpeakingStyle>(i))) {
      case StyleGroup::Stress: ++stress; break;
      case StyleGroup::NoStress: ++calm; break;
      case StyleGroup::Excluded: ++excluded; break;
    }
  }
  CHECK(stress == 4);
  CHECK(calm == 4);
  CHECK(excluded == 1);
}

TEST_CASE("group_isa: workload grouping") {
  CHECK(group_isa(IsaLevel::High) == StressLabel::Stress);
  CHECK(group_isa(IsaLevel::Excessive) == StressLabel::Stress);
  CHECK(group_isa(IsaLevel::Boring) == StressLabel::NoStress);
  CHECK(group_isa(IsaLevel::Relaxed) == StressLabel::NoStress);
  CHECK(group_isa(IsaLevel::Comfortable) == StressLabel::NoStress);
}

TEST_CASE("split_sizes: hold-out-first floor rule on reference class sizes") {
  const SplitCounts c60 = split_sizes(60);
  CHECK(c60.train == 39);
  CHECK(c60.val == 9);
  CHECK(c60.test == 12);

  const SplitCounts c678 = split_sizes(678);
  CHECK(c678.train == 435);
  CHECK(c678.val == 108);
  CHECK(c678.test == 135);

  const SplitCounts c5041 = split_sizes(5041);
  CHECK(c5041.train == 3227);
  CHECK(c5041.val == 806);
  CHECK(c5041.test == 1008);

  for (long n = 3; n < 300; ++n) {
    const SplitCounts c = split_sizes(n);
    CHECK(c.train + c.val + c.test == n);
  }
}

TEST_CASE("split_manifest: stratified, deterministic, disjoint") {
  const Manifest m = labeled_manifest({{StressLabel::Stress, 60}, {StressLabel::NoStress, 678}});
  const Manifest s1 = split_manifest(m, 42, ClassAxis::Stress);
  const Manifest s2 = split_manifest(m, 42, ClassAxis::Stress);
  REQUIRE(s1.size() == m.size());

  const auto hs = split_histogram(s1, StressLabel::Stress);
  CHECK(hs.at(Split::Train) == 39);
  CHECK(hs.at(Split::Val) == 9);
  CHECK(hs.at(Split::Test) == 12);
  const auto hn = split_histogram(s1, StressLabel::NoStress);
  CHECK(hn.at(Split::Train) == 435);
  CHECK(hn.at(Split::Val) == 108);
  CHECK(hn.at(Split::Test) == 135);

  for (std::size_t i = 0; i < s1.size(); ++i) CHECK(*s1.utterances[i].split == *s2.utterances[i].split);

  const Manifest s3 = split_manifest(m, 43, ClassAxis::Stress);
  bool any_differs = false;
  for (std::size_t i = 0; i < s1.size(); ++i)
    if (*s1.utterances[i].split != *s3.utterances[i].split) any_differs = true;
  CHECK(any_differs);
}

TEST_CASE("split_manifest: binary totals for the 5041-sample style corpus") {
  Manifest m;
  m.sample_rate_hz = 8000;
  long index = 0;
  for (int s = 0; s < kNumSpeakingStyles; ++s) {
    const auto style = static_cast<SpeakingStyle>(s);
    const long count = style == SpeakingStyle::Neutral ? 631 : 630;
    for (long i = 0; i < count; ++i) {
      Utterance u;
      u.id = "u" + std::to_string(index++);
      u.style = style;
      m.utterances.push_back(u);
    }
  }
  const Manifest split = split_manifest(m, 7, ClassAxis::Stress);
  CHECK(split.size() == 5041);  // question rows dropped

  std::map<Split, long> totals;
  for (const auto& u : split.utterances) ++totals[*u.split];
  CHECK(totals[Split::Train] == 3227);
  CHECK(totals[Split::Val] == 806);
  CHECK(totals[Split::Test] == 1008);
}

TEST_CASE("split_manifest: tiny class and unlabeled rows raise") {
  Manifest tiny = labeled_manifest({{StressLabel::Stress, 2}, {StressLabel::NoStress, 10}});
  CHECK_THROWS_AS(split_manifest(tiny, 1, ClassAxis::Stress), DataError);

  Manifest unlabeled;
  Utterance u;
  u.id = "x";
  unlabeled.utterances.push_back(u);
  CHECK_THROWS_AS(split_manifest(unlabeled, 1, ClassAxis::Stress), DataError);
}

TEST_CASE("validate_susas_shape: conforming manifest and deviations") {
  Manifest m;
  m.sample_rate_hz = 8000;
  long index = 0;
  for (int s = 0; s < kNumSpeakingStyles; ++s) {
    const auto style = static_cast<SpeakingStyle>(s);
    const long count = style == SpeakingStyle::Neutral ? 631 : 630;
    for (long i = 0; i < count; ++i) {
      Utterance u;
      u.id = "u" + std::to_string(index++);
      u.style = style;
      m.utterances.push_back(u);
    }
  }
  const SusasShapeReport ok = validate_susas_shape(m);
  CHECK(ok.ok);
  CHECK(ok.total == 5671);
  CHECK(ok.binary_total == 5041);

  // drop one neutral sample: 630 neutral must be flagged
  Manifest off = m;
  for (auto it = off.utterances.begin(); it != off.utterances.end(); ++it) {
    if (*it->style == SpeakingStyle::Neutral) {
      off.utterances.erase(it);
      break;
    }
  }
  const SusasShapeReport bad = validate_susas_shape(off);
  CHECK_FALSE(bad.ok);
  bool names_neutral = false;
  for (const auto& v : bad.violations)
    if (v.find("neutral") != std::string::npos) names_neutral = true;
  CHECK(names_neutral);

  const SusasShapeReport empty = validate_susas_shape(Manifest{});
  CHECK_FALSE(empty.ok);
  CHECK(empty.total == 0);
  CHECK(empty.binary_total == 0);
  CHECK(empty.violations.size() >= 10);  // every style plus both totals
}

TEST_CASE("synth_corpus: counts, determinism, clip invariants") {
  const auto dir = testutil::fresh_dir("synth");
  SynthSpec spec;
  spec.class_counts = {{"stress", 10}, {"nostress", 10}};
  spec.seed = 7;
  spec.sample_rate_hz = 8000;
  const Manifest m1 = synth_corpus(spec, dir / "a");
  const Manifest m2 = synth_corpus(spec, dir / "b");
  REQUIRE(m1.size() == 20);

  long stress = 0;
  for (const auto& u : m1.utterances) {
    REQUIRE(u.effective_stress().has_value());
    if (*u.effective_stress() == StressLabel::Stress) ++stress;
    const AudioClip clip = read_wav(u.audio_path);
    CHECK(clip.sample_rate_hz == 8000);
    CHECK(!clip.samples.empty());
    for (const double v : clip.samples) {
      CHECK(std::isfinite(v));
      CHECK(std::abs(v) <= 1.0);
    }
  }
  CHECK(stress == 10);

  // same seed, fresh tree: identical audio
  for (std::size_t i = 0; i < m1.size(); ++i) {
    const AudioClip a = read_wav(m1.utterances[i].audio_path);
    const AudioClip b = read_wav(m2.utterances[i].audio_path);
    CHECK(testutil::hash_doubles(a.samples) == testutil::hash_doubles(b.samples));
  }
}

TEST_CASE("synth_corpus: energy+rate threshold rule separates the classes") {
  const auto dir = testutil::fresh_dir("synthsep");
  SynthSpec spec;
  spec.class_counts = {{"stress", 200}, {"nostress", 200}};
  spec.seed = 11;
  const Manifest m = synth_corpus(spec, dir);

  long correct = 0;
  for (const auto& u : m.utterances) {
    const AudioClip clip = read_wav(u.audio_path);
    const double level = testutil::rms(clip.samples);
    const double rate = testutil::syllable_rate_hz(clip.samples, clip.sample_rate_hz);
    const bool predicted_stress = level > 0.045 || rate > 5.5;
    const bool is_stress = *u.effective_stress() == StressLabel::Stress;
    if (predicted_stress == is_stress) ++correct;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(m.size()) >= 0.80);
}

TEST_CASE("synth_corpus: style-keyed and ISA-keyed corpora") {
  const auto dir = testutil::fresh_dir("synthstyle");
  SynthSpec spec;
  spec.class_counts = {{"anger", 3}, {"neutral", 3}, {"question", 3}};
  spec.materialize_audio = false;
  const Manifest m = synth_corpus(spec, dir);
  CHECK(m.size() == 9);
  for (const auto& u : m.utterances) CHECK(u.style.has_value());

  SynthSpec atc;
  atc.class_counts = {{"stress", 4}, {"no_stress", 4}};
  atc.domain = Domain::AtcLike;
  atc.materialize_audio = false;
  const Manifest ma = synth_corpus(atc, dir / "atc");
  for (const auto& u : ma.utterances) {
    CHECK(u.isa.has_value());
    CHECK_FALSE(u.style.has_value());
    CHECK(u.effective_stress().has_value());
  }
}

TEST_CASE("manifest: round trip preserves everything including unknown fields") {
  const auto dir = testutil::fresh_dir("manifest");
  Manifest m;
  m.corpus_name = "t";
  m.sample_rate_hz = 8000;
  m.creation_seed = 99;
  Utterance a;
  a.id = "a1";
  a.audio_path = "/tmp/a1.wav";
  a.speaker_id = "spk3";
  a.gender = Gender::Female;
  a.domain = Domain::AtcLike;
  a.isa = IsaLevel::High;
  a.split = Split::Val;
  a.anonymized = true;
  a.extra_json = R"({"custom_field":42,"note":"keep me"})";
  m.utterances.push_back(a);
  Utterance b;
  b.id = "b2";
  b.style = SpeakingStyle::Loud;
  b.augment_method = "vtlp";
  b.source_id = "a1";
  b.copy_index = 3;
  m.utterances.push_back(b);

  const auto p = dir / "m.jsonl";
  write_manifest(m, p);
  const Manifest back = read_manifest(p);
  CHECK(back.corpus_name == "t");
  CHECK(back.sample_rate_hz == 8000);
  CHECK(back.creation_seed == 99);
  REQUIRE(back.size() == 2);
  CHECK(back.utterances[0].id == "a1");
  CHECK(back.utterances[0].gender == Gender::Female);
  CHECK(*back.utterances[0].isa == IsaLevel::High);
  CHECK(*back.utterances[0].split == Split::Val);
  CHECK(back.utterances[0].anonymized);
  CHECK(back.utterances[0].extra_json.find("keep me") != std::string::npos);
  CHECK(*back.utterances[1].copy_index == 3);

  // byte-identical rewrite
  const auto p2 = dir / "m2.jsonl";
  write_manifest(back, p2);
  std::ifstream f1(p), f2(p2);
  const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
}

TEST_CASE("manifest: schema violations name the line") {
  const auto dir = testutil::fresh_dir("manifestbad");
  {
    std::ofstream f(dir / "noid.jsonl");
    f << R"({"manifest_meta":{"corpus_name":"x","sample_rate_hz":8000,"creation_seed":0}})" << "\n";
    f << R"({"id":"ok"})" << "\n";
    f << R"({"audio_path":"nope.wav"})" << "\n";
  }
  try {
    read_manifest(dir / "noid.jsonl");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  {
    std::ofstream f(dir / "dup.jsonl");
    f << R"({"id":"same"})" << "\n" << R"({"id":"same"})" << "\n";
  }
  CHECK_THROWS_AS(read_manifest(dir / "dup.jsonl"), ParseError);
}
