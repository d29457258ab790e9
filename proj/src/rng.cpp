#include "mlmc/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace mlmc {

// ---------------------------------------------------------------------------
// Normal CDF. Hart 1968 rational approximation in the form given by West,
// "Better approximations to cumulative normal functions" (Wilmott, 2005).
// Double precision over the full range; underflows to 0 beyond |x| = 37.
// ---------------------------------------------------------------------------
double normal_cdf(double x) {
  double xabs = std::fabs(x);
  double cum;
  if (xabs > 37.0) {
    cum = 0.0;
  } else {
    double e = std::exp(-xabs * xabs / 2.0);
    if (xabs < 7.07106781186547) {
      double num = 3.52624965998911e-02 * xabs + 0.700383064443688;
      num = num * xabs + 6.37396220353165;
      num = num * xabs + 33.912866078383;
      num = num * xabs + 112.079291497871;
      num = num * xabs + 221.213596169931;
      num = num * xabs + 220.206867912376;
      double den = 8.83883476483184e-02 * xabs + 1.75566716318264;
      den = den * xabs + 16.064177579207;
      den = den * xabs + 86.7807322029461;
      den = den * xabs + 296.564248779674;
      den = den * xabs + 637.333633378831;
      den = den * xabs + 793.826512519948;
      den = den * xabs + 440.413735824752;
      cum = e * num / den;
    } else {
      double b = xabs + 0.65;
      b = xabs + 4.0 / b;
      b = xabs + 3.0 / b;
      b = xabs + 2.0 / b;
      b = xabs + 1.0 / b;
      cum = e / b / 2.506628274631;
    }
  }
  return x > 0.0 ? 1.0 - cum : cum;
}

// ---------------------------------------------------------------------------
// Inverse normal CDF. Wichura, Algorithm AS 241 (PPND16), Applied Statistics
// 37(3), 1988. Three rational approximations: central region |p-1/2| <= .425
// and two tail regions in sqrt(-log p).
// ---------------------------------------------------------------------------
double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("inverse_normal_cdf: p must be in (0,1)");

  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    double num = 2.5090809287301226727e+3;
    num = num * r + 3.3430575583588128105e+4;
    num = num * r + 6.7265770927008700853e+4;
    num = num * r + 4.5921953931549871457e+4;
    num = num * r + 1.3731693765509461125e+4;
    num = num * r + 1.9715909503065514427e+3;
    num = num * r + 1.3314166789178437745e+2;
    num = num * r + 3.3871328727963666080e+0;
    double den = 5.2264952788528545610e+3;
    den = den * r + 2.8729085735721942674e+4;
    den = den * r + 3.9307895800092710610e+4;
    den = den * r + 2.1213794301586595867e+4;
    den = den * r + 5.3941960214247511077e+3;
    den = den * r + 6.8718700749205790830e+2;
    den = den * r + 4.2313330701600911252e+1;
    den = den * r + 1.0;
    return q * num / den;
  }

  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    double num = 7.74545014278341407640e-4;
    num = num * r + 2.27238449892691845833e-2;
    num = num * r + 2.41780725177450611770e-1;
    num = num * r + 1.27045825245236838258e+0;
    num = num * r + 3.64784832476320460504e+0;
    num = num * r + 5.76949722146069140550e+0;
    num = num * r + 4.63033784615654529590e+0;
    num = num * r + 1.42343711074968357734e+0;
    double den = 1.05075007164441684324e-9;
    den = den * r + 5.47593808499534494600e-4;
    den = den * r + 1.51986665636164571966e-2;
    den = den * r + 1.48103976427480074590e-1;
    den = den * r + 6.89767334985100004550e-1;
    den = den * r + 1.67638483018380384940e+0;
    den = den * r + 2.05319162663775882187e+0;
    den = den * r + 1.0;
    val = num / den;
  } else {
    r -= 5.0;
    double num = 2.01033439929228813265e-7;
    num = num * r + 2.71155556874348757815e-5;
    num = num * r + 1.24266094738807843860e-3;
    num = num * r + 2.65321895265761230930e-2;
    num = num * r + 2.96560571828504891230e-1;
    num = num * r + 1.78482653991729133580e+0;
    num = num * r + 5.46378491116411436990e+0;
    num = num * r + 6.65790464350110377720e+0;
    double den = 2.04426310338993978564e-15;
    den = den * r + 1.42151175831644588870e-7;
    den = den * r + 1.84631831751005468180e-6;
    den = den * r + 7.86869131145613259100e-4;
    den = den * r + 1.48753612908506148525e-2;
    den = den * r + 1.36929880922735805310e-1;
    den = den * r + 5.99832206555887937690e-1;
    den = den * r + 1.0;
    val = num / den;
  }
  return q < 0.0 ? -val : val;
}

// ---------------------------------------------------------------------------
// Philox-4x32-10 (Salmon et al., "Parallel random numbers: as easy as
// 1, 2, 3", SC 2011). Key = seed halves; counter block = (draw block index,
// stream id). One evaluation yields 128 bits = two 64-bit outputs.
// ---------------------------------------------------------------------------
namespace {

constexpr std::uint32_t kPhiloxW32A = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW32B = 0xBB67AE85u;
constexpr std::uint32_t kPhiloxM4x32A = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM4x32B = 0xCD9E8D57u;

inline void philox_round(std::uint32_t c[4], const std::uint32_t key[2]) {
  std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM4x32A) * c[0];
  std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM4x32B) * c[2];
  std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  std::uint32_t r0 = hi1 ^ c[1] ^ key[0];
  std::uint32_t r1 = lo1;
  std::uint32_t r2 = hi0 ^ c[3] ^ key[1];
  std::uint32_t r3 = lo0;
  c[0] = r0;
  c[1] = r1;
  c[2] = r2;
  c[3] = r3;
}

// 10-round Philox block: block index in words 0..1, stream id in words 2..3.
inline void philox_block(std::uint64_t seed, std::uint64_t stream_id,
                         std::uint64_t block, std::uint64_t out[2]) {
  std::uint32_t c[4] = {
      static_cast<std::uint32_t>(block),
      static_cast<std::uint32_t>(block >> 32),
      static_cast<std::uint32_t>(stream_id),
      static_cast<std::uint32_t>(stream_id >> 32),
  };
  std::uint32_t key[2] = {
      static_cast<std::uint32_t>(seed),
      static_cast<std::uint32_t>(seed >> 32),
  };
  for (int round = 0; round < 10; ++round) {
    philox_round(c, key);
    key[0] += kPhiloxW32A;
    key[1] += kPhiloxW32B;
  }
  out[0] = static_cast<std::uint64_t>(c[0]) | (static_cast<std::uint64_t>(c[1]) << 32);
  out[1] = static_cast<std::uint64_t>(c[2]) | (static_cast<std::uint64_t>(c[3]) << 32);
}

}  // namespace

std::uint64_t RngStream::next_u64() {
  const std::uint64_t block = counter >> 1;
  if (block != cached_block_) {
    philox_block(seed, stream_id, block, cached_out_);
    cached_block_ = block;
  }
  const std::uint64_t out = cached_out_[counter & 1];
  ++counter;
  return out;
}

double RngStream::next_uniform() {
  // 53 mantissa bits, offset by half a grid cell: values lie in
  // [2^-54, 1 - 2^-54], never exactly 0 or 1.
  const std::uint64_t bits = next_u64() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double RngStream::next_normal() { return inverse_normal_cdf(next_uniform()); }

RngStream seed_stream(std::uint64_t seed, std::uint64_t stream_id) {
  RngStream s;
  s.seed = seed;
  s.stream_id = stream_id;
  s.counter = 0;
  return s;
}

std::uint64_t substream_id(StreamPhase phase, unsigned level, std::uint64_t index) {
  if (index >= (std::uint64_t{1} << 48))
    throw std::invalid_argument("substream_id: index exceeds 2^48");
  if (level >= 256) throw std::invalid_argument("substream_id: level exceeds 255");
  return (static_cast<std::uint64_t>(phase) << 56) |
         (static_cast<std::uint64_t>(level) << 48) | index;
}

ParamVector sample_uniform_box(RngStream& stream, const TrainingBox& box) {
  auto ivs = box.as_array();
  std::array<double, kParamDim> out{};
  for (int i = 0; i < kParamDim; ++i) {
    if (!(ivs[i].lo <= ivs[i].hi))
      throw std::invalid_argument("sample_uniform_box: lower > upper");
    double u = stream.next_uniform();
    out[i] = ivs[i].lo + ivs[i].width() * u;
  }
  return ParamVector::from_array(out);
}

}  // namespace mlmc
