#include "actrec/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace actrec {

namespace {

std::string trimmed(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& s, double* out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto res = std::from_chars(begin, end, *out);
  return res.ec == std::errc() && res.ptr == end;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  size_t pos = 0;
  while (true) {
    size_t comma = line.find(',', pos);
    if (comma == std::string::npos) {
      fields.push_back(trimmed(line.substr(pos)));
      break;
    }
    fields.push_back(trimmed(line.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return fields;
}

// Little-endian readers for the WAV chunk walk.
std::uint32_t u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

TimeSeries read_timeseries_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::vector<double> times, values;
  std::string line;
  long row = 0;
  bool header_allowed = true;
  while (std::getline(in, line)) {
    ++row;
    std::string t = trimmed(line);
    if (t.empty()) continue;
    std::vector<std::string> fields = split_fields(t);
    if (fields.size() != 2)
      throw std::runtime_error(path + ": row " + std::to_string(row) +
                               " has " + std::to_string(fields.size()) +
                               " columns, expected time,value");
    double tv = 0.0, xv = 0.0;
    if (!parse_double(fields[0], &tv) || !parse_double(fields[1], &xv)) {
      if (header_allowed) {
        header_allowed = false;
        continue;
      }
      throw std::runtime_error(path + ": row " + std::to_string(row) +
                               " is not numeric");
    }
    header_allowed = false;
    times.push_back(tv);
    values.push_back(xv);
  }
  if (times.size() < 2)
    throw std::runtime_error(path + ": need at least two samples");

  const size_t n = times.size();
  const double dt = (times.back() - times.front()) / static_cast<double>(n - 1);
  if (!(dt > 0.0)) throw std::runtime_error(path + ": timestamps do not advance");
  double worst = 0.0;
  size_t worst_at = 0;
  for (size_t i = 0; i + 1 < n; ++i) {
    const double dev = std::abs((times[i + 1] - times[i]) - dt) / dt;
    if (dev > worst) {
      worst = dev;
      worst_at = i + 1;
    }
  }
  if (worst > 1e-4) {
    std::ostringstream msg;
    msg << path << ": non-uniform sampling, max step deviation "
        << worst * 100.0 << "% at sample " << worst_at << " (mean step "
        << dt << " s)";
    throw std::runtime_error(msg.str());
  }

  TimeSeries ts;
  ts.fs = 1.0 / dt;
  const double snapped = std::round(ts.fs);
  if (snapped > 0.0 && std::abs(ts.fs - snapped) <= 1e-9 * ts.fs) ts.fs = snapped;
  ts.samples = Eigen::Map<const VecD>(values.data(), static_cast<long>(n));
  return ts;
}

TimeSeries read_wav(const std::string& path, int channel) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (raw.size() < 12 || std::memcmp(raw.data(), "RIFF", 4) != 0 ||
      std::memcmp(raw.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error(path + ": not a RIFF/WAVE file");

  int channels = 0, bits = 0, format = 0;
  double fs = 0.0;
  const unsigned char* data = nullptr;
  size_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= raw.size()) {
    const char* id = reinterpret_cast<const char*>(raw.data() + pos);
    const size_t len = u32(raw.data() + pos + 4);
    if (pos + 8 + len > raw.size())
      throw std::runtime_error(path + ": truncated chunk");
    const unsigned char* body = raw.data() + pos + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw std::runtime_error(path + ": short fmt chunk");
      format = u16(body);
      channels = u16(body + 2);
      fs = u32(body + 4);
      bits = u16(body + 14);
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = body;
      data_len = len;
    }
    pos += 8 + len + (len & 1);
  }
  if (format != 1 || bits != 16)
    throw std::runtime_error(path + ": only 16-bit PCM is supported");
  if (channels < 1 || data == nullptr)
    throw std::runtime_error(path + ": missing fmt or data chunk");
  if (channel < 0 && channels != 1)
    throw std::runtime_error(path + ": " + std::to_string(channels) +
                             " channels, pick one with a channel index");
  const int ch = channel < 0 ? 0 : channel;
  if (ch >= channels)
    throw std::runtime_error(path + ": channel " + std::to_string(ch) +
                             " out of range, file has " +
                             std::to_string(channels));

  const size_t stride = static_cast<size_t>(channels) * 2;
  const size_t frames = data_len / stride;
  TimeSeries ts;
  ts.fs = fs;
  ts.samples.resize(static_cast<long>(frames));
  for (size_t i = 0; i < frames; ++i) {
    const unsigned char* p = data + i * stride + static_cast<size_t>(ch) * 2;
    const std::int16_t v = static_cast<std::int16_t>(u16(p));
    ts.samples[static_cast<long>(i)] = static_cast<double>(v) / 32768.0;
  }
  return ts;
}

TimeSeries ingest(const std::string& path, const std::string& format, int channel) {
  std::string fmt = format;
  std::transform(fmt.begin(), fmt.end(), fmt.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (fmt == "auto" || fmt.empty()) {
    size_t dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) {
      return static_cast<char>(std::tolower(c));
    });
    if (ext == "csv") fmt = "csv";
    else if (ext == "wav") fmt = "wav";
    else
      throw std::runtime_error(path + ": cannot infer format from extension");
  }
  if (fmt == "csv") return read_timeseries_csv(path);
  if (fmt == "wav") return read_wav(path, channel);
  throw std::runtime_error("unknown input format: " + format);
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_csv(const std::string& path,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_timeseries_csv(const std::string& path, const TimeSeries& ts) {
  if (!(ts.fs > 0.0)) throw std::invalid_argument("write_timeseries_csv: fs <= 0");
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<size_t>(ts.samples.size()) + 1);
  rows.push_back({"time", "value"});
  for (long i = 0; i < ts.samples.size(); ++i) {
    rows.push_back({format_double(static_cast<double>(i) / ts.fs),
                    format_double(ts.samples[i])});
  }
  write_csv(path, rows);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace actrec
