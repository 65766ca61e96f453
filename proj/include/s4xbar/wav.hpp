#pragma once

#include <string>
#include <vector>

namespace s4xbar {

// Decodes a 16-bit PCM mono WAV file to samples in [-1, 1). Throws DataError
// naming the file for unreadable, non-PCM, non-16-bit or stereo input.
std::vector<double> read_wav16_mono(const std::string& path);

// Writes samples (clipped to [-1, 1]) as 16-bit PCM mono. Test and tooling
// helper.
void write_wav16_mono(const std::string& path, const std::vector<double>& samples,
                      int sample_rate = 16000);

}  // namespace s4xbar
