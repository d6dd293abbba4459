#pragma once

#include <string>
#include <vector>

#include "actrec/types.hpp"

namespace actrec {

struct TimeSeries {
  VecD samples;
  double fs = 0.0;
};

/// Two-column time,value CSV. An optional header line is skipped. The sample
/// rate comes from the timestamps; any step deviating from the mean by more
/// than 0.01% rejects the file with the measured jitter in the message.
TimeSeries read_timeseries_csv(const std::string& path);

/// 16-bit PCM WAV. Multi-channel files need an explicit channel index;
/// channel -1 accepts mono only. Samples are scaled by 1/32768.
TimeSeries read_wav(const std::string& path, int channel = -1);

/// Dispatch on format "csv", "wav", or "auto" (extension decides).
TimeSeries ingest(const std::string& path, const std::string& format,
                  int channel = -1);

void write_timeseries_csv(const std::string& path, const TimeSeries& ts);

/// Shortest decimal form that parses back to exactly the same value.
std::string format_double(double v);

/// Rows are emitted verbatim, comma-joined with a trailing newline each.
void write_csv(const std::string& path,
               const std::vector<std::vector<std::string>>& rows);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace actrec
