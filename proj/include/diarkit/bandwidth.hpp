// include/diarkit/bandwidth.hpp
#pragma once

#include <string_view>

#include "diarkit/dsp.hpp"

namespace diarkit {

enum class Bandwidth { kCts, kNcts };

std::string_view to_string(Bandwidth b);

struct BandwidthClass {
  Bandwidth value = Bandwidth::kCts;
  double peak_above_4k = 0.0;
};

inline constexpr double kBandwidthThreshold = 0.07;
inline constexpr double kBandwidthHorizonSeconds = 100.0;

// Telephone-band detection for 16 kHz recordings: the recording is NCTS when
// the largest STFT magnitude in any bin centred strictly above 4 kHz, over the
// first `horizon_s` seconds, exceeds `threshold`.
BandwidthClass classify_bandwidth(const AudioBuffer& audio,
                                  double threshold = kBandwidthThreshold,
                                  double horizon_s = kBandwidthHorizonSeconds);

}  // namespace diarkit
