#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "ehmm/errors.hpp"

namespace ehmm {

// Fixed-rate frame matrix, T x dim, row-major. Values are stored as float32
// so that the on-disk payload round-trips exactly.
struct feature_sequence {
  int dim = 0;
  double frame_period = 0.010;
  std::vector<float> data;

  std::size_t frames() const {
    return dim == 0 ? 0 : data.size() / static_cast<std::size_t>(dim);
  }
  const float* row(std::size_t t) const {
    return data.data() + t * static_cast<std::size_t>(dim);
  }
  float* row(std::size_t t) {
    return data.data() + t * static_cast<std::size_t>(dim);
  }
};

struct feature_config {
  double window_sec = 0.025;
  double shift_sec = 0.010;
  double preemphasis = 0.97;  // in [0,1)
  int mel_filters = 26;
  int cepstra = 12;
  bool energy = true;
  int delta_orders = 2;  // 0, 1 or 2

  int output_dim() const {
    return (cepstra + (energy ? 1 : 0)) * (1 + delta_orders);
  }
};

// ---------------------------------------------------------------------------
// Feature file format: "EHMMFEAT", u32 version, u32 dim, u64 frames,
// f64 frame_period, then frames*dim little-endian float32.
// ---------------------------------------------------------------------------

namespace detail {
constexpr char kFeatureMagic[8] = {'E', 'H', 'M', 'M', 'F', 'E', 'A', 'T'};
constexpr std::uint32_t kFeatureVersion = 1;

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::istream& is, T& v, const std::string& path,
              const char* what) {
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw data_error("truncated feature file '" + path + "' while reading " +
                     what + " at byte offset " +
                     std::to_string(static_cast<long long>(is.tellg())));
}
}  // namespace detail

struct feature_header {
  int dim = 0;
  std::uint64_t frames = 0;
  double frame_period = 0.0;
};

inline feature_header read_feature_header(std::istream& is,
                                          const std::string& path) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, detail::kFeatureMagic, 8) != 0)
    throw data_error("'" + path + "' is not a feature file (bad magic)");
  std::uint32_t version = 0, dim = 0;
  std::uint64_t frames = 0;
  double period = 0.0;
  detail::read_raw(is, version, path, "version");
  if (version != detail::kFeatureVersion)
    throw data_error("unsupported feature file version " +
                     std::to_string(version) + " in '" + path + "'");
  detail::read_raw(is, dim, path, "dim");
  detail::read_raw(is, frames, path, "frame count");
  detail::read_raw(is, period, path, "frame period");
  if (dim == 0 || frames == 0)
    throw data_error("degenerate dimensions in feature file '" + path + "'");
  return {static_cast<int>(dim), frames, period};
}

inline feature_header read_feature_header(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open feature file '" + path.string() + "'");
  return read_feature_header(is, path.string());
}

inline void save_features(const std::filesystem::path& path,
                          const feature_sequence& fs) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw data_error("cannot write feature file '" + path.string() + "'");
  os.write(detail::kFeatureMagic, 8);
  detail::write_raw(os, detail::kFeatureVersion);
  detail::write_raw(os, static_cast<std::uint32_t>(fs.dim));
  detail::write_raw(os, static_cast<std::uint64_t>(fs.frames()));
  detail::write_raw(os, fs.frame_period);
  os.write(reinterpret_cast<const char*>(fs.data.data()),
           static_cast<std::streamsize>(fs.data.size() * sizeof(float)));
  if (!os) throw data_error("short write to '" + path.string() + "'");
}

inline feature_sequence load_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open feature file '" + path.string() + "'");
  const feature_header h = read_feature_header(is, path.string());
  feature_sequence fs;
  fs.dim = h.dim;
  fs.frame_period = h.frame_period;
  fs.data.resize(static_cast<std::size_t>(h.frames) * h.dim);
  if (!is.read(reinterpret_cast<char*>(fs.data.data()),
               static_cast<std::streamsize>(fs.data.size() * sizeof(float))))
    throw data_error("truncated feature file '" + path.string() +
                     "': payload ends at byte offset " +
                     std::to_string(static_cast<long long>(is.gcount()) + 32));
  for (float v : fs.data)
    if (!std::isfinite(v))
      throw data_error("non-finite value in feature file '" + path.string() +
                       "'");
  return fs;
}

// ---------------------------------------------------------------------------
// MFCC front end
// ---------------------------------------------------------------------------

namespace detail {

// In-place iterative radix-2 FFT on interleaved re/im pairs, n a power of 2.
inline void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = re.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t k = 0; k < len / 2; ++k) {
        const double ur = re[i + k], ui = im[i + k];
        const double vr = re[i + k + len / 2] * cr - im[i + k + len / 2] * ci;
        const double vi = re[i + k + len / 2] * ci + im[i + k + len / 2] * cr;
        re[i + k] = ur + vr;
        im[i + k] = ui + vi;
        re[i + k + len / 2] = ur - vr;
        im[i + k + len / 2] = ui - vi;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

inline double hz_to_mel(double hz) {
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}
inline double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Triangular mel filterbank over the power-spectrum bins [0, nfft/2].
// Returns filters x (nfft/2+1) weights.
inline std::vector<std::vector<double>> mel_filterbank(int nfilt, int nfft,
                                                       int rate) {
  const int nbins = nfft / 2 + 1;
  const double lo = hz_to_mel(0.0), hi = hz_to_mel(rate / 2.0);
  std::vector<double> centers(nfilt + 2);
  for (int i = 0; i < nfilt + 2; ++i) {
    const double mel = lo + (hi - lo) * i / (nfilt + 1);
    centers[i] = mel_to_hz(mel) * nfft / rate;  // fractional bin
  }
  std::vector<std::vector<double>> bank(nfilt, std::vector<double>(nbins, 0.0));
  for (int f = 0; f < nfilt; ++f) {
    const double left = centers[f], mid = centers[f + 1],
                 right = centers[f + 2];
    for (int b = 0; b < nbins; ++b) {
      if (b > left && b < mid)
        bank[f][b] = (b - left) / (mid - left);
      else if (b >= mid && b < right)
        bank[f][b] = (right - b) / (right - mid);
    }
  }
  return bank;
}

}  // namespace detail

constexpr double kLogFloor = 1e-10;

// Windowed MFCC extraction: pre-emphasis, Hamming window, power spectrum,
// mel filterbank, DCT-II cepstra (c1..cN), log energy, delta regression.
// T = floor((len - window) / shift) + 1. Pure function of its inputs.
inline feature_sequence extract_features(std::span<const float> samples,
                                         int sample_rate,
                                         const feature_config& cfg) {
  if (sample_rate < 8000)
    throw data_error("sample rate " + std::to_string(sample_rate) +
                     " below 8 kHz minimum");
  const int win = static_cast<int>(std::lround(cfg.window_sec * sample_rate));
  const int shift = static_cast<int>(std::lround(cfg.shift_sec * sample_rate));
  if (shift <= 0 || win < shift)
    throw usage_error("feature window must be >= shift > 0");
  if (static_cast<int>(samples.size()) < win)
    throw data_error("signal of " + std::to_string(samples.size()) +
                     " samples is shorter than one window (" +
                     std::to_string(win) + ")");
  for (float v : samples)
    if (!std::isfinite(v)) throw data_error("non-finite sample in waveform");

  const std::size_t T = (samples.size() - win) / shift + 1;
  int nfft = 1;
  while (nfft < win) nfft <<= 1;
  const auto bank = detail::mel_filterbank(cfg.mel_filters, nfft, sample_rate);
  const int nbins = nfft / 2 + 1;

  std::vector<double> hamming(win);
  for (int i = 0; i < win; ++i)
    hamming[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (win - 1));

  const int nstatic = cfg.cepstra + (cfg.energy ? 1 : 0);
  std::vector<double> statics(T * nstatic);
  std::vector<double> re(nfft), im(nfft), logmel(cfg.mel_filters);

  for (std::size_t t = 0; t < T; ++t) {
    const float* frame = samples.data() + t * shift;
    double energy = 0.0;
    for (int i = 0; i < win; ++i) energy += double(frame[i]) * frame[i];

    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    re[0] = frame[0] * (1.0 - cfg.preemphasis) * hamming[0];
    for (int i = 1; i < win; ++i)
      re[i] = (frame[i] - cfg.preemphasis * frame[i - 1]) * hamming[i];
    detail::fft_radix2(re, im);

    for (int f = 0; f < cfg.mel_filters; ++f) {
      double acc = 0.0;
      const auto& w = bank[f];
      for (int b = 0; b < nbins; ++b) {
        if (w[b] == 0.0) continue;
        acc += w[b] * (re[b] * re[b] + im[b] * im[b]);
      }
      logmel[f] = std::log(std::max(acc, kLogFloor));
    }
    double* out = statics.data() + t * nstatic;
    for (int c = 1; c <= cfg.cepstra; ++c) {
      double acc = 0.0;
      for (int f = 0; f < cfg.mel_filters; ++f)
        acc += logmel[f] * std::cos(M_PI * c * (f + 0.5) / cfg.mel_filters);
      out[c - 1] = acc * std::sqrt(2.0 / cfg.mel_filters);
    }
    if (cfg.energy) out[cfg.cepstra] = std::log(std::max(energy, kLogFloor));
  }

  // Delta regression over +-2 frames, boundary frames replicated.
  const auto src_at = [&](const std::vector<double>& src, long t,
                          int c) -> double {
    const long tt = std::clamp<long>(t, 0, static_cast<long>(T) - 1);
    return src[static_cast<std::size_t>(tt) * nstatic + c];
  };
  const auto regress = [&](const std::vector<double>& src,
                           std::vector<double>& dst) {
    dst.resize(src.size());
    for (std::size_t t = 0; t < T; ++t)
      for (int c = 0; c < nstatic; ++c) {
        double num = 0.0;
        for (int k = 1; k <= 2; ++k)
          num += k * (src_at(src, long(t) + k, c) - src_at(src, long(t) - k, c));
        dst[t * nstatic + c] = num / 10.0;
      }
  };

  feature_sequence fs;
  fs.dim = cfg.output_dim();
  fs.frame_period = cfg.shift_sec;
  fs.data.resize(T * fs.dim);
  std::vector<double> delta1, delta2;
  if (cfg.delta_orders >= 1) regress(statics, delta1);
  if (cfg.delta_orders >= 2) regress(delta1, delta2);
  for (std::size_t t = 0; t < T; ++t) {
    float* out = fs.row(t);
    for (int c = 0; c < nstatic; ++c)
      out[c] = static_cast<float>(statics[t * nstatic + c]);
    if (cfg.delta_orders >= 1)
      for (int c = 0; c < nstatic; ++c)
        out[nstatic + c] = static_cast<float>(delta1[t * nstatic + c]);
    if (cfg.delta_orders >= 2)
      for (int c = 0; c < nstatic; ++c)
        out[2 * nstatic + c] = static_cast<float>(delta2[t * nstatic + c]);
  }
  return fs;
}

// Minimal RIFF/WAVE reader: PCM16 or float32, channels averaged to mono.
inline std::vector<float> read_wav_mono(const std::filesystem::path& path,
                                        int& sample_rate) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open wav file '" + path.string() + "'");
  char tag[4];
  std::uint32_t riff_size = 0;
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "RIFF", 4) != 0)
    throw data_error("'" + path.string() + "' is not a RIFF file");
  detail::read_raw(is, riff_size, path.string(), "riff size");
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "WAVE", 4) != 0)
    throw data_error("'" + path.string() + "' is not a WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<char> payload;
  bool have_fmt = false, have_data = false;
  while (is.read(tag, 4)) {
    std::uint32_t chunk = 0;
    detail::read_raw(is, chunk, path.string(), "chunk size");
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      std::uint32_t byte_rate = 0;
      std::uint16_t block_align = 0;
      detail::read_raw(is, format, path.string(), "format");
      detail::read_raw(is, channels, path.string(), "channels");
      detail::read_raw(is, rate, path.string(), "rate");
      detail::read_raw(is, byte_rate, path.string(), "byte rate");
      detail::read_raw(is, block_align, path.string(), "block align");
      detail::read_raw(is, bits, path.string(), "bits");
      is.seekg(chunk > 16 ? chunk - 16 : 0, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      payload.resize(chunk);
      if (!is.read(payload.data(), chunk))
        throw data_error("truncated wav data chunk in '" + path.string() + "'");
      have_data = true;
    } else {
      is.seekg(chunk + (chunk & 1), std::ios::cur);
    }
  }
  if (!have_fmt || !have_data || channels == 0)
    throw data_error("missing fmt/data chunk in '" + path.string() + "'");

  std::vector<float> mono;
  const std::size_t bytes_per = bits / 8;
  const std::size_t frames = payload.size() / (bytes_per * channels);
  mono.reserve(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int ch = 0; ch < channels; ++ch) {
      const char* p = payload.data() + (i * channels + ch) * bytes_per;
      if (format == 1 && bits == 16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        acc += v / 32768.0;
      } else if (format == 3 && bits == 32) {
        float v;
        std::memcpy(&v, p, 4);
        acc += v;
      } else {
        throw data_error("unsupported wav encoding (format " +
                         std::to_string(format) + ", " + std::to_string(bits) +
                         " bits) in '" + path.string() + "'");
      }
    }
    mono.push_back(static_cast<float>(acc / channels));
  }
  sample_rate = static_cast<int>(rate);
  return mono;
}

}  // namespace ehmm
