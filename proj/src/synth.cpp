#include "actrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

namespace actrec {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Waveforms are evaluated in cycle units (phase / 2pi). With dyadic f/fs the
// cycle count stays exact, so discontinuity samples land deterministically and
// a half-cycle offset negates the square wave sample for sample.
double wave_value(Waveform kind, double amplitude, double cycles) {
  const double u = cycles - std::floor(cycles);  // in [0, 1)
  switch (kind) {
    case Waveform::sine:
      return amplitude * std::sin(kTwoPi * u);
    case Waveform::square:
      return u < 0.5 ? amplitude : -amplitude;
    case Waveform::triangle:
      if (u < 0.25) return amplitude * 4.0 * u;
      if (u < 0.75) return amplitude * (2.0 - 4.0 * u);
      return amplitude * (4.0 * u - 4.0);
  }
  throw std::logic_error("render_waveform: unknown waveform kind");
}

long to_sample(double seconds, double fs) { return std::lround(seconds * fs); }

}  // namespace

Waveform waveform_from_string(const std::string& s) {
  if (s == "sine") return Waveform::sine;
  if (s == "square") return Waveform::square;
  if (s == "triangle") return Waveform::triangle;
  throw std::invalid_argument("scenario: unknown waveform '" + s + "'");
}

std::string to_string(Waveform w) {
  switch (w) {
    case Waveform::sine: return "sine";
    case Waveform::square: return "square";
    case Waveform::triangle: return "triangle";
  }
  return "?";
}

double GaussianSampler::uniform() {
  // 53-bit mantissa draw in (0, 1].
  return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
}

double GaussianSampler::next() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(kTwoPi * u2);
  have_spare_ = true;
  return r * std::cos(kTwoPi * u2);
}

VecD render_waveform(const SourceModel& src, double duration, double fs,
                     double onset_phase) {
  if (fs <= 0.0) throw std::invalid_argument("render_waveform: fs must be positive");
  if (duration < 0.0) throw std::invalid_argument("render_waveform: negative duration");
  if (src.frequency <= 0.0)
    throw std::invalid_argument("render_waveform: frequency must be positive");
  if (src.frequency >= fs / 2.0)
    throw std::invalid_argument("render_waveform: frequency at or above Nyquist");
  if (src.amplitude < 0.0)
    throw std::invalid_argument("render_waveform: negative amplitude");

  const long n = to_sample(duration, fs);
  VecD out(n);
  const double step = src.frequency / fs;                        // cycles per sample
  const double u0 = (src.reference_phase + onset_phase) / kTwoPi;
  for (long i = 0; i < n; ++i) {
    out[i] = wave_value(src.kind, src.amplitude, u0 + step * static_cast<double>(i));
  }
  return out;
}

void Scenario::validate() const {
  if (fs <= 0.0) throw std::invalid_argument("scenario: fs must be positive");
  if (sources.empty()) throw std::invalid_argument("scenario: no sources");
  for (const auto& s : sources) {
    if (s.frequency <= 0.0 || s.frequency >= fs / 2.0)
      throw std::invalid_argument("scenario: source '" + s.name +
                                  "' frequency outside (0, fs/2)");
    if (s.amplitude < 0.0)
      throw std::invalid_argument("scenario: source '" + s.name + "' negative amplitude");
  }
  if (schedule.duration <= 0.0)
    throw std::invalid_argument("scenario: duration must be positive");
  if (schedule.noise_sigma < 0.0)
    throw std::invalid_argument("scenario: negative noise sigma");

  std::vector<Interval> sorted = schedule.intervals;
  std::sort(sorted.begin(), sorted.end(),
            [](const Interval& a, const Interval& b) { return a.start < b.start; });
  double prev_stop = 0.0;
  for (const auto& iv : sorted) {
    if (iv.stop <= iv.start)
      throw std::invalid_argument("scenario: interval with stop <= start");
    if (iv.start < prev_stop - 1e-12)
      throw std::invalid_argument("scenario: overlapping intervals");
    if (iv.stop > schedule.duration + 1e-12)
      throw std::invalid_argument("scenario: interval past record end");
    if (iv.active.empty())
      throw std::invalid_argument("scenario: interval with empty active set");
    for (int idx : iv.active) {
      if (idx < 0 || idx >= static_cast<int>(sources.size()))
        throw std::invalid_argument("scenario: source index out of range");
    }
    prev_stop = iv.stop;
  }
}

Composition compose_sequence(const Scenario& scenario) {
  scenario.validate();
  const double fs = scenario.fs;
  const long n = to_sample(scenario.schedule.duration, fs);
  const int s = static_cast<int>(scenario.sources.size());

  std::vector<Interval> sorted = scenario.schedule.intervals;
  std::sort(sorted.begin(), sorted.end(),
            [](const Interval& a, const Interval& b) { return a.start < b.start; });

  Composition out;
  out.signal = VecD::Zero(n);
  out.truth = MatI::Zero(s, n);

  // Per-source activation runs in samples; sample-contiguous runs keep phase.
  for (int src = 0; src < s; ++src) {
    const SourceModel& model = scenario.sources[src];
    long run_start = -1;
    long run_stop = -1;
    auto flush = [&]() {
      if (run_start < 0) return;
      const long lo = std::max<long>(run_start, 0);
      const long hi = std::min<long>(run_stop, n);
      const double step = model.frequency / fs;  // cycles per sample
      const double u0 = model.reference_phase / kTwoPi;
      for (long i = lo; i < hi; ++i) {
        const double u = u0 + step * static_cast<double>(i - run_start);
        out.signal[i] += wave_value(model.kind, model.amplitude, u);
        out.truth(src, i) = 1;
      }
      run_start = run_stop = -1;
    };
    for (const auto& iv : sorted) {
      if (std::find(iv.active.begin(), iv.active.end(), src) == iv.active.end()) continue;
      const long a = to_sample(iv.start, fs);
      const long b = to_sample(iv.stop, fs);
      if (run_stop == a) {
        run_stop = b;  // seamless continuation, phase carries over
      } else {
        flush();
        run_start = a;
        run_stop = b;
      }
    }
    flush();
  }

  if (scenario.schedule.noise_sigma > 0.0) {
    GaussianSampler gauss(scenario.schedule.seed);
    for (long i = 0; i < n; ++i) {
      out.signal[i] += scenario.schedule.noise_sigma * gauss.next();
    }
  }
  return out;
}

Scenario Scenario::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("scenario: bad JSON: ") + e.what());
  }
  Scenario sc;
  try {
    sc.fs = j.at("fs").get<double>();
    for (const auto& js : j.at("sources")) {
      SourceModel m;
      m.name = js.at("name").get<std::string>();
      m.kind = waveform_from_string(js.at("kind").get<std::string>());
      m.frequency = js.at("frequency").get<double>();
      m.amplitude = js.at("amplitude").get<double>();
      m.reference_phase = js.value("reference_phase", 0.0);
      sc.sources.push_back(std::move(m));
    }
    const auto& js = j.at("schedule");
    sc.schedule.duration = js.at("duration").get<double>();
    sc.schedule.noise_sigma = js.value("noise_sigma", 0.0);
    sc.schedule.seed = js.value("seed", std::uint64_t{0});
    for (const auto& ji : js.at("intervals")) {
      Interval iv;
      iv.start = ji.at("start").get<double>();
      iv.stop = ji.at("stop").get<double>();
      for (const auto& ja : ji.at("active")) {
        if (ja.is_string()) {
          const std::string name = ja.get<std::string>();
          int idx = -1;
          for (int k = 0; k < static_cast<int>(sc.sources.size()); ++k) {
            if (sc.sources[k].name == name) idx = k;
          }
          if (idx < 0)
            throw std::invalid_argument("scenario: unknown source name '" + name + "'");
          iv.active.push_back(idx);
        } else {
          iv.active.push_back(ja.get<int>());
        }
      }
      sc.schedule.intervals.push_back(std::move(iv));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("scenario: missing or bad field: ") + e.what());
  }
  sc.validate();
  return sc;
}

std::string Scenario::to_json_text() const {
  nlohmann::json j;
  j["fs"] = fs;
  j["sources"] = nlohmann::json::array();
  for (const auto& s : sources) {
    j["sources"].push_back({{"name", s.name},
                            {"kind", to_string(s.kind)},
                            {"frequency", s.frequency},
                            {"amplitude", s.amplitude},
                            {"reference_phase", s.reference_phase}});
  }
  nlohmann::json jiv = nlohmann::json::array();
  for (const auto& iv : schedule.intervals) {
    jiv.push_back({{"start", iv.start}, {"stop", iv.stop}, {"active", iv.active}});
  }
  j["schedule"] = {{"duration", schedule.duration},
                   {"noise_sigma", schedule.noise_sigma},
                   {"seed", schedule.seed},
                   {"intervals", jiv}};
  return j.dump(2);
}

}  // namespace actrec
