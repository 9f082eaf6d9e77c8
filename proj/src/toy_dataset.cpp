#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "mga/audio.hpp"
#include "mga/training.hpp"

namespace mga {

std::vector<std::string> ToySpec::class_names() {
  return {"tone_low", "tone_high", "noise_band"};
}

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct PlacedEvent {
  double onset, offset;
  int class_idx;
};

// cosine attack/decay over 10 ms so clips have no click transients
double envelope(double t_in_event, double duration) {
  const double ramp = 0.010;
  if (t_in_event < ramp) return 0.5 - 0.5 * std::cos(kTwoPi / 2.0 * t_in_event / ramp);
  if (t_in_event > duration - ramp) {
    const double tail = (duration - t_in_event) / ramp;
    return 0.5 - 0.5 * std::cos(kTwoPi / 2.0 * tail);
  }
  return 1.0;
}

void add_event(std::vector<double>& samples, const PlacedEvent& ev,
               double amplitude, int sample_rate, Rng& rng) {
  const int start = static_cast<int>(std::lround(ev.onset * sample_rate));
  const int end = static_cast<int>(std::lround(ev.offset * sample_rate));
  const double duration = ev.offset - ev.onset;

  if (ev.class_idx == 2) {
    // band-limited noise: a bundle of random-phase sinusoids in 3-6 kHz
    const int n_partials = 48;
    std::vector<double> freqs(n_partials), phases(n_partials);
    for (int i = 0; i < n_partials; ++i) {
      freqs[i] = rng.uniform(3000.0, 6000.0);
      phases[i] = rng.uniform(0.0, kTwoPi);
    }
    const double partial_amp = amplitude / std::sqrt(static_cast<double>(n_partials));
    for (int s = start; s < end && s < static_cast<int>(samples.size()); ++s) {
      const double t = static_cast<double>(s) / sample_rate;
      double acc = 0.0;
      for (int i = 0; i < n_partials; ++i)
        acc += std::sin(kTwoPi * freqs[i] * t + phases[i]);
      samples[s] += partial_amp * acc *
                    envelope(t - ev.onset, duration);
    }
    return;
  }

  // tone_low is a pure 440 Hz sine; tone_high is a harmonic pair
  // (1200 + 2400 Hz), so the two tone classes differ in spectral shape,
  // not merely in position along the frequency axis, and the harmonic
  // stays clear of the 3-6 kHz noise band
  const double freq = ev.class_idx == 0 ? 440.0 : 1200.0;
  const double phase = rng.uniform(0.0, kTwoPi);
  const double phase2 = rng.uniform(0.0, kTwoPi);
  for (int s = start; s < end && s < static_cast<int>(samples.size()); ++s) {
    const double t = static_cast<double>(s) / sample_rate;
    double v = std::sin(kTwoPi * freq * t + phase);
    if (ev.class_idx == 1) v = 0.75 * v + 0.6 * std::sin(kTwoPi * 2.0 * freq * t + phase2);
    samples[s] += amplitude * v * envelope(t - ev.onset, duration);
  }
}

std::vector<PlacedEvent> place_events(const ToySpec& spec, Rng& rng) {
  const int target = spec.min_events +
                     rng.uniform_int(spec.max_events - spec.min_events + 1);
  std::vector<PlacedEvent> placed;
  const double margin = 0.3;
  for (int e = 0; e < target; ++e) {
    const double duration = rng.uniform(spec.min_duration, spec.max_duration);
    bool ok = false;
    for (int attempt = 0; attempt < 40 && !ok; ++attempt) {
      const double onset = rng.uniform(0.1, spec.clip_seconds - duration - 0.1);
      ok = true;
      for (const PlacedEvent& other : placed)
        if (onset < other.offset + margin && other.onset < onset + duration + margin) {
          ok = false;
          break;
        }
      if (ok)
        placed.push_back(PlacedEvent{onset, onset + duration,
                                     rng.uniform_int(3)});
    }
  }
  std::sort(placed.begin(), placed.end(),
            [](const PlacedEvent& a, const PlacedEvent& b) {
              return a.onset < b.onset;
            });
  return placed;
}

std::vector<double> synthesize_clip(const ToySpec& spec,
                                    const std::vector<PlacedEvent>& events,
                                    Rng& rng) {
  const int n = static_cast<int>(spec.clip_seconds * spec.sample_rate);
  std::vector<double> samples(n);
  for (double& s : samples) s = rng.normal(0.0, spec.background_sigma);
  for (const PlacedEvent& ev : events)
    add_event(samples, ev, rng.uniform(0.25, 0.4), spec.sample_rate, rng);
  return samples;
}

}  // namespace

ToyCorpus generate_toy_dataset(const ToySpec& spec, const std::string& out_dir,
                               uint64_t seed) {
  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  const fs::path audio = root / "audio";
  fs::create_directories(audio);

  const auto classes = ToySpec::class_names();
  ToyCorpus corpus;
  uint64_t clip_counter = 0;

  auto make_clip = [&](const std::string& id, std::vector<Event>* events_out,
                       std::vector<std::string>* weak_out) {
    Rng rng(seed, 0x70c00000ULL + clip_counter++);
    auto placed = place_events(spec, rng);
    auto samples = synthesize_clip(spec, placed, rng);
    save_wav((audio / (id + ".wav")).string(), samples, spec.sample_rate);
    for (const PlacedEvent& ev : placed) {
      if (events_out)
        events_out->push_back(Event{id, ev.onset, ev.offset, classes[ev.class_idx]});
      if (weak_out &&
          std::find(weak_out->begin(), weak_out->end(), classes[ev.class_idx]) ==
              weak_out->end())
        weak_out->push_back(classes[ev.class_idx]);
    }
  };

  char name[64];
  for (int i = 0; i < spec.n_strong; ++i) {
    std::snprintf(name, sizeof(name), "strong_%03d", i);
    corpus.strong_ids.push_back(name);
    make_clip(name, &corpus.strong_events, nullptr);
  }
  for (int i = 0; i < spec.n_weak; ++i) {
    std::snprintf(name, sizeof(name), "weak_%03d", i);
    corpus.weak_ids.push_back(name);
    WeakLabels row;
    row.clip_id = name;
    make_clip(name, nullptr, &row.labels);
    corpus.weak_labels.push_back(row);
  }
  for (int i = 0; i < spec.n_unlabeled; ++i) {
    std::snprintf(name, sizeof(name), "unlabeled_%03d", i);
    corpus.unlabeled_ids.push_back(name);
    make_clip(name, nullptr, nullptr);
  }
  for (int i = 0; i < spec.n_holdout; ++i) {
    std::snprintf(name, sizeof(name), "holdout_%03d", i);
    corpus.holdout_ids.push_back(name);
    make_clip(name, &corpus.holdout_events, nullptr);
  }

  // round-trip the annotations through the TSV formats on disk
  write_event_tsv((root / "strong.tsv").string(), corpus.strong_events);
  write_event_tsv((root / "holdout.tsv").string(), corpus.holdout_events);
  write_weak_tsv((root / "weak.tsv").string(), corpus.weak_labels);
  {
    std::ofstream out((root / "unlabeled.tsv").string());
    out << "filename\n";
    for (const std::string& id : corpus.unlabeled_ids) out << id << '\n';
  }
  {
    std::ofstream out((root / "classes.txt").string());
    for (const std::string& c : classes) out << c << '\n';
  }
  // reload strong events so in-memory truth matches the 3-decimal TSV
  corpus.strong_events = read_event_tsv((root / "strong.tsv").string());
  corpus.holdout_events = read_event_tsv((root / "holdout.tsv").string());
  return corpus;
}

}  // namespace mga
