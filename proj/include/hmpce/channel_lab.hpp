#pragma once

// Synthetic clustered-sparse angle-frequency channels, partial-DFT
// random-permutation pilots, AWGN measurements and the channel file format.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hmpce/dist_kernel.hpp"
#include "hmpce/fft.hpp"
#include "hmpce/rng.hpp"

namespace hmpce {

using CVector = Eigen::VectorXcd;
/// N x P matrix; column p holds subcarrier p (subcarrier-major storage).
using CMatrix = Eigen::MatrixXcd;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ChannelRealization {
  CMatrix H_a;                       ///< angle-frequency gains, N x P
  std::vector<std::uint8_t> support; ///< s_n, length N; empty when unknown
  Eigen::MatrixXd precisions_L;      ///< per-element non-zero precision, N x P (may be empty)
  Eigen::VectorXd precision_S;       ///< near-zero precision per subcarrier (may be empty)

  int antennas() const { return static_cast<int>(H_a.rows()); }
  int subcarriers() const { return static_cast<int>(H_a.cols()); }
};

/// Stationary activation probability of the two-state chain.
inline double stationary_activation(double p10, double p01) { return 1.0 / (1.0 + p01 / p10); }

/// Markov-chain support: s_1 ~ Bernoulli(p10), then Pr(s_n=1 | s_{n-1}=0) = p10
/// and Pr(s_n=0 | s_{n-1}=1) = p01.
inline std::vector<std::uint8_t> sample_support(int n, double p10, double p01, std::uint64_t seed) {
  if (!(p10 > 0.0 && p10 < 1.0) || !(p01 > 0.0 && p01 < 1.0)) {
    throw ConfigError("sample_support: transition probabilities must lie in (0,1)");
  }
  if (n < 0) throw ConfigError("sample_support: negative length");
  Rng rng(seed);
  std::vector<std::uint8_t> s(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    if (i == 0) {
      s[0] = u < p10 ? 1 : 0;
    } else if (s[i - 1] == 0) {
      s[i] = u < p10 ? 1 : 0;
    } else {
      s[i] = u < p01 ? 0 : 1;
    }
  }
  return s;
}

struct PrecisionSpread {
  double min{0.1};
  double max{10.0};
};

/// Draws a TSGM-LVD channel on the given support: active elements are
/// CN(0, 1/v_L) with v_L log-uniform on `spread`, the rest CN(0, 1/v_S).
inline ChannelRealization sample_channel(const std::vector<std::uint8_t>& support, int subcarriers,
                                         PrecisionSpread spread, double precision_small,
                                         std::uint64_t seed) {
  if (subcarriers <= 0) throw ConfigError("sample_channel: need at least one subcarrier");
  if (!(spread.min > 0.0) || !(spread.max >= spread.min)) {
    throw ConfigError("sample_channel: invalid precision spread");
  }
  if (!(precision_small > spread.max)) {
    throw ConfigError("sample_channel: near-zero precision must exceed every non-zero precision");
  }
  const int n = static_cast<int>(support.size());
  ChannelRealization ch;
  ch.H_a.resize(n, subcarriers);
  ch.precisions_L.resize(n, subcarriers);
  ch.precision_S = Eigen::VectorXd::Constant(subcarriers, precision_small);
  ch.support = support;
  Rng rng(seed);
  const double log_lo = std::log(spread.min);
  const double log_span = std::log(spread.max) - log_lo;
  for (int p = 0; p < subcarriers; ++p) {
    for (int i = 0; i < n; ++i) {
      const double prec_l = std::exp(log_lo + log_span * uniform01(rng));
      ch.precisions_L(i, p) = prec_l;
      const double var = support[i] ? 1.0 / prec_l : 1.0 / precision_small;
      ch.H_a(i, p) = complex_normal(rng, var);
    }
  }
  return ch;
}

/// Mean of 1/v when v is log-uniform on `spread` (average non-zero power).
inline double mean_large_variance(PrecisionSpread spread) {
  if (spread.max == spread.min) return 1.0 / spread.min;
  return (1.0 / spread.min - 1.0 / spread.max) / std::log(spread.max / spread.min);
}

/// A = S F Theta: Theta multiplies by unit-modulus phases and permutes, F is
/// the unitary N-point DFT and S keeps `rows` of the result. Applied
/// matrix-free in O(N log N).
class PilotMatrix {
 public:
  PilotMatrix(int n, std::vector<int> rows, std::vector<int> permutation, std::vector<cplx> phases)
      : n_(n), rows_(std::move(rows)), perm_(std::move(permutation)), phases_(std::move(phases)) {
    if (n_ <= 0) throw ConfigError("PilotMatrix: N must be positive");
    if (static_cast<int>(perm_.size()) != n_ || static_cast<int>(phases_.size()) != n_) {
      throw ConfigError("PilotMatrix: permutation/phase length must equal N");
    }
    if (rows_.empty() || static_cast<int>(rows_.size()) > n_) {
      throw ConfigError("PilotMatrix: need 1 <= M <= N selected rows");
    }
    std::vector<int> check = perm_;
    std::sort(check.begin(), check.end());
    for (int i = 0; i < n_; ++i) {
      if (check[i] != i) throw ConfigError("PilotMatrix: not a permutation");
    }
    for (int r : rows_) {
      if (r < 0 || r >= n_) throw ConfigError("PilotMatrix: row index out of range");
    }
  }

  /// M = N, identity permutation, unit phases: the unitary DFT itself.
  static PilotMatrix full_dft(int n) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    return PilotMatrix(n, idx, idx, std::vector<cplx>(static_cast<std::size_t>(n), cplx{1.0, 0.0}));
  }

  int rows() const { return static_cast<int>(rows_.size()); }
  int cols() const { return n_; }
  const std::vector<int>& selected_rows() const { return rows_; }
  const std::vector<int>& permutation() const { return perm_; }
  const std::vector<cplx>& phases() const { return phases_; }

  CVector apply(const CVector& h) const {
    std::vector<cplx> work(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) work[i] = phases_[i] * h[perm_[i]];
    fft::unitary_dft_inplace(work, false);
    CVector y(rows());
    for (int m = 0; m < rows(); ++m) y[m] = work[rows_[m]];
    return y;
  }

  CVector adjoint(const CVector& y) const {
    std::vector<cplx> work(static_cast<std::size_t>(n_), cplx{0.0, 0.0});
    for (int m = 0; m < rows(); ++m) work[rows_[m]] = y[m];
    fft::unitary_dft_inplace(work, true);
    CVector h(n_);
    for (int i = 0; i < n_; ++i) h[perm_[i]] = std::conj(phases_[i]) * work[i];
    return h;
  }

  Eigen::MatrixXcd dense() const {
    Eigen::MatrixXcd a(rows(), n_);
    for (int j = 0; j < n_; ++j) {
      CVector e = CVector::Zero(n_);
      e[j] = 1.0;
      a.col(j) = apply(e);
    }
    return a;
  }

 private:
  int n_;
  std::vector<int> rows_;
  std::vector<int> perm_;
  std::vector<cplx> phases_;
};

inline PilotMatrix make_pdft_rp(int n, int m, std::uint64_t seed) {
  if (m >= n) throw ConfigError("make_pdft_rp: M must be smaller than N");
  if (m <= 0) throw ConfigError("make_pdft_rp: M must be positive");
  Rng rng(seed);
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<cplx> phases(static_cast<std::size_t>(n));
  for (auto& ph : phases) ph = std::polar(1.0, 2.0 * std::numbers::pi * uniform01(rng));
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(static_cast<std::size_t>(m));
  std::sort(rows.begin(), rows.end());
  return PilotMatrix(n, std::move(rows), std::move(perm), std::move(phases));
}

/// One pilot matrix per subcarrier, seeded independently.
inline std::vector<PilotMatrix> make_pilot_set(int n, int m, int subcarriers, std::uint64_t seed) {
  std::vector<PilotMatrix> out;
  out.reserve(static_cast<std::size_t>(subcarriers));
  for (int p = 0; p < subcarriers; ++p) {
    out.push_back(make_pdft_rp(n, m, derive_seed(seed, {static_cast<std::uint64_t>(p)})));
  }
  return out;
}

struct MeasurementSet {
  CMatrix Y;  ///< M x P
  double noise_variance{0.0};
};

/// Y = A H + W with W ~ CN(0, noise_variance I).
inline MeasurementSet synthesize_measurements_with_noise(const ChannelRealization& channel,
                                                         const std::vector<PilotMatrix>& pilots,
                                                         double noise_variance, std::uint64_t seed) {
  const int p_count = channel.subcarriers();
  if (static_cast<int>(pilots.size()) != p_count) {
    throw ConfigError("synthesize_measurements: one pilot matrix per subcarrier required");
  }
  if (noise_variance < 0.0) throw ConfigError("synthesize_measurements: negative noise variance");
  const int m = pilots.front().rows();
  MeasurementSet out;
  out.Y.resize(m, p_count);
  out.noise_variance = noise_variance;
  Rng rng(seed);
  for (int p = 0; p < p_count; ++p) {
    if (pilots[p].rows() != m || pilots[p].cols() != channel.antennas()) {
      throw ConfigError("synthesize_measurements: pilot dimensions disagree with the channel");
    }
    CVector y = pilots[p].apply(channel.H_a.col(p));
    if (noise_variance > 0.0) {
      for (int i = 0; i < m; ++i) y[i] += complex_normal(rng, noise_variance);
    }
    out.Y.col(p) = y;
  }
  return out;
}

/// Noise variance chosen so that (sum_p ||A_p h_p||^2) / (P M sigma^2) equals the
/// requested SNR.
inline double noise_variance_for_snr(const ChannelRealization& channel, const std::vector<PilotMatrix>& pilots,
                                     double snr_db) {
  double energy = 0.0;
  int m = 0;
  for (int p = 0; p < channel.subcarriers(); ++p) {
    energy += pilots[p].apply(channel.H_a.col(p)).squaredNorm();
    m = pilots[p].rows();
  }
  const double per_sample = energy / (static_cast<double>(channel.subcarriers()) * m);
  return per_sample / std::pow(10.0, snr_db / 10.0);
}

inline MeasurementSet synthesize_measurements(const ChannelRealization& channel,
                                              const std::vector<PilotMatrix>& pilots, double snr_db,
                                              std::uint64_t seed) {
  if (static_cast<int>(pilots.size()) != channel.subcarriers()) {
    throw ConfigError("synthesize_measurements: one pilot matrix per subcarrier required");
  }
  return synthesize_measurements_with_noise(channel, pilots, noise_variance_for_snr(channel, pilots, snr_db),
                                            seed);
}

enum class TransformDirection { kToAngle, kToFrequency };

/// h_a = B^H h_f with B the unitary DFT matrix, and its inverse.
inline CVector angle_transform(const CVector& h, TransformDirection direction) {
  std::vector<cplx> work(h.data(), h.data() + h.size());
  fft::unitary_dft_inplace(work, direction == TransformDirection::kToAngle);
  return Eigen::Map<CVector>(work.data(), static_cast<Eigen::Index>(work.size()));
}

// Channel file: "HAF1", u32 N, u32 P, u8 has_support, N*P complex values as
// interleaved little-endian f64 (re, im) with p outer and n inner, then N
// support bytes when has_support is set.

class ChannelFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFFu));
}

inline void put_f64(std::vector<unsigned char>& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xFFu));
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ChannelFileError("unexpected end of file");
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_{0};
};

}  // namespace detail

inline constexpr std::array<char, 4> kChannelMagic{'H', 'A', 'F', '1'};

inline void save_channel_file(const ChannelRealization& channel, const std::filesystem::path& path) {
  std::vector<unsigned char> out(kChannelMagic.begin(), kChannelMagic.end());
  const int n = channel.antennas();
  const int p_count = channel.subcarriers();
  detail::put_u32(out, static_cast<std::uint32_t>(n));
  detail::put_u32(out, static_cast<std::uint32_t>(p_count));
  const bool has_support = !channel.support.empty();
  if (has_support && static_cast<int>(channel.support.size()) != n) {
    throw ChannelFileError("dimension mismatch: support length differs from N");
  }
  out.push_back(has_support ? 1 : 0);
  for (int p = 0; p < p_count; ++p) {
    for (int i = 0; i < n; ++i) {
      detail::put_f64(out, channel.H_a(i, p).real());
      detail::put_f64(out, channel.H_a(i, p).imag());
    }
  }
  if (has_support) {
    for (auto s : channel.support) out.push_back(s ? 1 : 0);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ChannelFileError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw ChannelFileError("write failed: " + path.string());
}

inline ChannelRealization load_channel_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ChannelFileError("no such file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < kChannelMagic.size()) {
    if (bytes.empty() || std::memcmp(bytes.data(), kChannelMagic.data(), bytes.size()) != 0) {
      throw ChannelFileError("not a channel file: " + path.string());
    }
    throw ChannelFileError("unexpected end of file");
  }
  if (std::memcmp(bytes.data(), kChannelMagic.data(), kChannelMagic.size()) != 0) {
    throw ChannelFileError("not a channel file: " + path.string());
  }
  std::vector<unsigned char> body(bytes.begin() + 4, bytes.end());
  detail::ByteReader r(body);
  const std::uint32_t n = r.u32();
  const std::uint32_t p_count = r.u32();
  const std::uint8_t has_support = r.u8();
  if (n == 0 || p_count == 0) throw ChannelFileError("dimension mismatch: zero-sized channel");
  if (has_support > 1) throw ChannelFileError("dimension mismatch: bad support flag");
  const std::size_t payload = static_cast<std::size_t>(n) * p_count * 16 + (has_support ? n : 0);
  r.need(payload);
  if (r.remaining() != payload) throw ChannelFileError("dimension mismatch: trailing bytes after payload");
  ChannelRealization ch;
  ch.H_a.resize(n, p_count);
  for (std::uint32_t p = 0; p < p_count; ++p) {
    for (std::uint32_t i = 0; i < n; ++i) {
      const double re = r.f64();
      const double im = r.f64();
      if (!std::isfinite(re) || !std::isfinite(im)) {
        throw ChannelFileError("non-finite value at n=" + std::to_string(i) + ", p=" + std::to_string(p));
      }
      ch.H_a(i, p) = cplx{re, im};
    }
  }
  if (has_support) {
    ch.support.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto s = r.u8();
      if (s > 1) throw ChannelFileError("dimension mismatch: support byte not in {0,1}");
      ch.support[i] = s;
    }
  }
  return ch;
}

}  // namespace hmpce
