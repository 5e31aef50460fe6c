// src/bandwidth.cpp
#include "diarkit/bandwidth.hpp"

#include <algorithm>
#include <string>

#include "diarkit/error.hpp"

namespace diarkit {

std::string_view to_string(Bandwidth b) { return b == Bandwidth::kCts ? "CTS" : "NCTS"; }

BandwidthClass classify_bandwidth(const AudioBuffer& audio, double threshold, double horizon_s) {
  if (audio.sample_rate != 16000)
    throw PreconditionError("bandwidth classification expects 16 kHz audio, got " +
                            std::to_string(audio.sample_rate));
  const AudioBuffer head = audio.duration() > horizon_s ? audio.slice(0.0, horizon_s) : audio;
  const Spectrogram spec = stft_magnitude(head);

  BandwidthClass out;
  for (std::size_t t = 0; t < spec.frames; ++t)
    for (std::size_t k = 0; k < spec.bins; ++k)
      if (static_cast<double>(k) * spec.bin_hz > 4000.0)
        out.peak_above_4k = std::max(out.peak_above_4k, spec.at(t, k));
  out.value = out.peak_above_4k > threshold ? Bandwidth::kNcts : Bandwidth::kCts;
  return out;
}

}  // namespace diarkit
