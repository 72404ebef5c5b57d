// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>

#include "attnbf/stft.h"

namespace attnbf {

enum class WavEncoding { kPcm16, kFloat32 };

struct Wav {
  int sample_rate = 16000;
  MultiSignal channels;
};

// Reads PCM16 or IEEE float32 RIFF/WAVE files (WAVE_FORMAT_EXTENSIBLE
// included). PCM16 is scaled by 1/32768 into [-1, 1). Throws IoError.
Wav read_wav(const std::string& path);

// Channel order is preserved. PCM16 output clips to [-1, 1).
void write_wav(const std::string& path, const Wav& wav, WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace attnbf
