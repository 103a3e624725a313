#pragma once

// Lane-batched evaluation of the Heisenberg-Langevin drift and the stochastic
// Heun step. W trajectories are stored structure-of-arrays ([mode][lane]) so
// the innermost loops run across lanes and vectorize.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <experimental/simd>
#include <span>
#include <vector>

#include <boost/align/aligned_allocator.hpp>

#include "mmtwa/model.hpp"
#include "mmtwa/random.hpp"

namespace mmtwa {

/// Sparse list of index pairs contributing to each output mode (CSR layout).
struct PairTable {
  std::vector<int> row_start;
  std::vector<int> first;
  std::vector<int> second;
  /// For self-products: pairs [row_start[r], doubled_end[r]) stand for both
  /// orderings and count twice. Empty for general tables.
  std::vector<int> doubled_end;

  int rows() const { return static_cast<int>(row_start.size()) - 1; }
  std::size_t pairs() const { return first.size(); }
};

/// Cache-line aligned storage so lane vectors never straddle two lines.
using AlignedDoubles = std::vector<double, boost::alignment::aligned_allocator<double, 64>>;

/// Complex mode amplitudes for W lanes, index [pos * W + lane].
template <int W>
struct LaneFields {
  AlignedDoubles ar, ai, br, bi;

  LaneFields() = default;
  explicit LaneFields(int modes)
      : ar(static_cast<std::size_t>(modes) * W), ai(ar.size()), br(ar.size()), bi(ar.size()) {}

  void fill(double v) {
    for (auto* vec : {&ar, &ai, &br, &bi}) std::fill(vec->begin(), vec->end(), v);
  }
};

template <int W>
struct DriftScratch {
  AlignedDoubles Ar, Ai, Br, Bi, Sr, Si, Rr, Ri, Cr, Ci, Qr, Qi;

  explicit DriftScratch(int modes) {
    const auto n = static_cast<std::size_t>(modes) * W;
    for (auto* v : {&Ar, &Ai, &Br, &Bi, &Sr, &Si, &Rr, &Ri, &Cr, &Ci, &Qr, &Qi}) v->assign(n, 0.0);
  }
};

/// Deterministic part of the equations of motion for one SystemSpec.
///
/// With A_k = a_k + conj(a_{-k}) and B_q = b_q + conj(b_{-q}):
///   i da_k/dt = w_k a_k + (2g/sqrt N) sum_q B_{k-q} A_q
///             + (g4/N) sum_q A_{k+q} C_q - i kappa a_k,
///       C_q   = sum_k' A_k' A_{-k'-q}
///   i db_q/dt = v_q b_q + (g/sqrt N) sum_k A_k A_{q-k} - (i gamma/2)(b_q - conj b_q)
class DriftKernel {
 public:
  explicit DriftKernel(const SystemSpec& spec);

  const SystemSpec& spec() const { return spec_; }
  int modes() const { return modes_; }
  const std::vector<double>& cavity_frequencies() const { return omega_c_; }
  const std::vector<double>& raman_frequencies() const { return omega_r_; }
  /// Position of -k for the mode at position p.
  int mirror(int pos) const { return modes_ - 1 - pos; }

  const PairTable& cavity_cubic() const { return cavity_cubic_; }
  const PairTable& raman_cubic() const { return raman_cubic_; }
  const PairTable& quartic_inner() const { return quartic_inner_; }
  const PairTable& quartic_outer() const { return quartic_outer_; }

  template <int W>
  void eval(const LaneFields<W>& in, double ramp, LaneFields<W>& out, DriftScratch<W>& s) const;

 private:
  SystemSpec spec_;
  int modes_;
  std::vector<double> omega_c_, omega_r_;
  PairTable cavity_cubic_;   // (B index, A index)
  PairTable raman_cubic_;    // (A index, A index)
  PairTable quartic_inner_;  // (A index, A index)
  PairTable quartic_outer_;  // (A index, C index)
  double cavity_coef_, raman_coef_, quartic_coef_;
};

namespace detail {

template <int W>
inline void hermitian(int modes, const double* re, const double* im, double* out_re, double* out_im) {
  for (int p = 0; p < modes; ++p) {
    const int m = modes - 1 - p;
    for (int l = 0; l < W; ++l) {
      out_re[p * W + l] = re[p * W + l] + re[m * W + l];
      out_im[p * W + l] = im[p * W + l] - im[m * W + l];
    }
  }
}

template <int W>
using lane_vec = std::experimental::fixed_size_simd<double, W>;

template <int W>
inline lane_vec<W> load(const double* p) {
  return lane_vec<W>(p, std::experimental::element_aligned);
}

template <int W>
inline void convolve(const PairTable& t, const double* xr, const double* xi, const double* yr,
                     const double* yi, double* out_r, double* out_i) {
  using V = lane_vec<W>;
  const int rows = t.rows();
  const int* first = t.first.data();
  const int* second = t.second.data();
  auto term = [&](int p, V& rr, V& ii, V& ri, V& ir) {
    const V x_r = load<W>(xr + first[p] * W);
    const V x_i = load<W>(xi + first[p] * W);
    const V y_r = load<W>(yr + second[p] * W);
    const V y_i = load<W>(yi + second[p] * W);
    rr += x_r * y_r;
    ii += x_i * y_i;
    ri += x_r * y_i;
    ir += x_i * y_r;
  };
  auto row_sum = [&](int p, int end, V& acc_r, V& acc_i) {
    // independent accumulator chains so consecutive pairs do not wait on
    // each other's FMA latency
    V rr0 = 0.0, ii0 = 0.0, ri0 = 0.0, ir0 = 0.0;
    V rr1 = 0.0, ii1 = 0.0, ri1 = 0.0, ir1 = 0.0;
    for (; p + 1 < end; p += 2) {
      term(p, rr0, ii0, ri0, ir0);
      term(p + 1, rr1, ii1, ri1, ir1);
    }
    if (p < end) term(p, rr0, ii0, ri0, ir0);
    acc_r = (rr0 + rr1) - (ii0 + ii1);
    acc_i = (ri0 + ri1) + (ir0 + ir1);
  };
  const bool doubled = !t.doubled_end.empty();
  for (int r = 0; r < rows; ++r) {
    V acc_r, acc_i;
    if (doubled) {
      V twice_r, twice_i;
      row_sum(t.row_start[r], t.doubled_end[r], twice_r, twice_i);
      row_sum(t.doubled_end[r], t.row_start[r + 1], acc_r, acc_i);
      acc_r += 2.0 * twice_r;
      acc_i += 2.0 * twice_i;
    } else {
      row_sum(t.row_start[r], t.row_start[r + 1], acc_r, acc_i);
    }
    acc_r.copy_to(out_r + r * W, std::experimental::element_aligned);
    acc_i.copy_to(out_i + r * W, std::experimental::element_aligned);
  }
}

}  // namespace detail

template <int W>
void DriftKernel::eval(const LaneFields<W>& in, double ramp, LaneFields<W>& out, DriftScratch<W>& s) const {
  const int n = modes_;
  const double kappa = spec_.kappa;
  const double gamma = spec_.gamma;
  const double cg = cavity_coef_ * ramp;
  const double rg = raman_coef_ * ramp;
  const double qg = quartic_coef_ * ramp;
  const bool cubic = cg != 0.0;
  const bool quartic = qg != 0.0;

  if (cubic || quartic) {
    detail::hermitian<W>(n, in.ar.data(), in.ai.data(), s.Ar.data(), s.Ai.data());
  }
  if (cubic) {
    detail::hermitian<W>(n, in.br.data(), in.bi.data(), s.Br.data(), s.Bi.data());
    detail::convolve<W>(cavity_cubic_, s.Br.data(), s.Bi.data(), s.Ar.data(), s.Ai.data(), s.Sr.data(),
                        s.Si.data());
    detail::convolve<W>(raman_cubic_, s.Ar.data(), s.Ai.data(), s.Ar.data(), s.Ai.data(), s.Rr.data(),
                        s.Ri.data());
  }
  if (quartic) {
    detail::convolve<W>(quartic_inner_, s.Ar.data(), s.Ai.data(), s.Ar.data(), s.Ai.data(), s.Cr.data(),
                        s.Ci.data());
    detail::convolve<W>(quartic_outer_, s.Ar.data(), s.Ai.data(), s.Cr.data(), s.Ci.data(), s.Qr.data(),
                        s.Qi.data());
  }

  for (int p = 0; p < n; ++p) {
    const double wc = omega_c_[p];
    const double wr = omega_r_[p];
    const std::size_t o = static_cast<std::size_t>(p) * W;
    // X = i da/dt without damping; da/dt = -i X - kappa a
    double xr[W], xi[W], yr[W], yi[W];
    for (int l = 0; l < W; ++l) {
      xr[l] = wc * in.ar[o + l];
      xi[l] = wc * in.ai[o + l];
      yr[l] = wr * in.br[o + l];
      yi[l] = wr * in.bi[o + l];
    }
    if (cubic) {
      for (int l = 0; l < W; ++l) {
        xr[l] += cg * s.Sr[o + l];
        xi[l] += cg * s.Si[o + l];
        yr[l] += rg * s.Rr[o + l];
        yi[l] += rg * s.Ri[o + l];
      }
    }
    if (quartic) {
      for (int l = 0; l < W; ++l) {
        xr[l] += qg * s.Qr[o + l];
        xi[l] += qg * s.Qi[o + l];
      }
    }
    for (int l = 0; l < W; ++l) {
      out.ar[o + l] = xi[l] - kappa * in.ar[o + l];
      out.ai[o + l] = -xr[l] - kappa * in.ai[o + l];
      // -(i gamma / 2)(b - conj b) = gamma Im b, friction on the momentum quadrature only
      out.br[o + l] = yi[l];
      out.bi[o + l] = -yr[l] - gamma * in.bi[o + l];
    }
  }
}

/// Per-mode noise amplitudes for one time step: standard deviation of each
/// real noise component.
struct NoiseScales {
  std::vector<double> cavity;  ///< per real/imag component of da_k
  std::vector<double> raman;   ///< real increment db_q

  NoiseScales(const SystemSpec& spec, double dt);
};

/// Philox blocks consumed per time step (three real normals per mode).
inline int noise_blocks_per_step(int modes) { return (3 * modes + 3) / 4; }
/// Philox blocks consumed by the initial Wigner sample (four per mode).
inline int initial_blocks(int modes) { return modes; }

/// Unscaled standard normals for one step of W lanes.
/// Layout: [normal index][lane], normal index = 4 * block + component.
template <int W>
void lane_normals(Philox4x32Key key, std::span<const std::uint64_t, W> streams, StreamPurpose purpose,
                  std::uint64_t first_block, int blocks, double* out) {
  constexpr int kMaxChunk = std::max(W, 128 / W * W);
  // Process (block, lane) pairs in chunks; each stage is a flat loop the
  // compiler vectorizes.
  const int total = blocks * W;
  for (int start = 0; start < total; start += kMaxChunk) {
    const int n = std::min(kMaxChunk, total - start);
    alignas(64) std::uint32_t c0[kMaxChunk], c1[kMaxChunk], c2[kMaxChunk], c3[kMaxChunk];
    for (int i = 0; i < n; i += W) {
      const std::uint64_t block = first_block + static_cast<std::uint64_t>((start + i) / W);
      for (int l = 0; l < W; ++l) {
        const auto ctr = philox_counter(block, streams[l], purpose);
        c0[i + l] = ctr[0];
        c1[i + l] = ctr[1];
        c2[i + l] = ctr[2];
        c3[i + l] = ctr[3];
      }
    }
    std::uint32_t k0 = key[0], k1 = key[1];
    for (int round = 0; round < 10; ++round) {
      for (int i = 0; i < n; ++i) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(detail::kPhiloxM0) * c0[i];
        const std::uint64_t p1 = static_cast<std::uint64_t>(detail::kPhiloxM1) * c2[i];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const std::uint32_t n0 = hi1 ^ c1[i] ^ k0;
        const std::uint32_t n2 = hi0 ^ c3[i] ^ k1;
        c1[i] = static_cast<std::uint32_t>(p1);
        c3[i] = static_cast<std::uint32_t>(p0);
        c0[i] = n0;
        c2[i] = n2;
      }
      k0 += detail::kPhiloxW0;
      k1 += detail::kPhiloxW1;
    }
    alignas(64) double z0[kMaxChunk], z1[kMaxChunk], z2[kMaxChunk], z3[kMaxChunk];
    for (int i = 0; i < n; ++i) {
      const double r0 = std::sqrt(-2.0 * detail::fast_log(detail::to_open_unit(c0[i])));
      const double r1 = std::sqrt(-2.0 * detail::fast_log(detail::to_open_unit(c2[i])));
      double cs0, sn0, cs1, sn1;
      detail::sincos_turns(detail::to_open_unit(c1[i]), cs0, sn0);
      detail::sincos_turns(detail::to_open_unit(c3[i]), cs1, sn1);
      z0[i] = r0 * cs0;
      z1[i] = r0 * sn0;
      z2[i] = r1 * cs1;
      z3[i] = r1 * sn1;
    }
    for (int i = 0; i < n; i += W) {
      double* o = out + static_cast<std::size_t>(4 * ((start + i) / W)) * W;
      std::copy_n(z0 + i, W, o);
      std::copy_n(z1 + i, W, o + W);
      std::copy_n(z2 + i, W, o + 2 * W);
      std::copy_n(z3 + i, W, o + 3 * W);
    }
  }
}

/// W trajectories advanced in lockstep by the stochastic Heun scheme.
template <int W>
class LaneIntegrator {
 public:
  LaneIntegrator(const SystemSpec& spec, double dt)
      : kernel_(spec),
        scales_(spec, dt),
        dt_(dt),
        state_(kernel_.modes()),
        f0_(kernel_.modes()),
        f1_(kernel_.modes()),
        pred_(kernel_.modes()),
        noise_(kernel_.modes()),
        scratch_(kernel_.modes()),
        normals_(static_cast<std::size_t>(4 * noise_blocks_per_step(kernel_.modes())) * W) {}

  const DriftKernel& kernel() const { return kernel_; }
  int modes() const { return kernel_.modes(); }
  double dt() const { return dt_; }
  LaneFields<W>& state() { return state_; }
  const LaneFields<W>& state() const { return state_; }

  /// Draws Wigner initial conditions: zero-mean complex Gaussians with
  /// <|alpha|^2> = coth(w / 2T) / 2 for every mode.
  void sample_initial(Philox4x32Key key, std::span<const std::uint64_t, W> streams) {
    const int n = modes();
    std::vector<double> z(static_cast<std::size_t>(4 * n) * W);
    lane_normals<W>(key, streams, StreamPurpose::Initial, 0, initial_blocks(n), z.data());
    const auto& spec = kernel_.spec();
    for (int p = 0; p < n; ++p) {
      const double sc = std::sqrt(0.25 * thermal_factor(kernel_.cavity_frequencies()[p], spec.temperature));
      const double sr = std::sqrt(0.25 * thermal_factor(kernel_.raman_frequencies()[p], spec.temperature));
      for (int l = 0; l < W; ++l) {
        const std::size_t o = static_cast<std::size_t>(p) * W + l;
        state_.ar[o] = sc * z[static_cast<std::size_t>(p) * W + l];
        state_.ai[o] = sc * z[static_cast<std::size_t>(n + p) * W + l];
        state_.br[o] = sr * z[static_cast<std::size_t>(2 * n + p) * W + l];
        state_.bi[o] = sr * z[static_cast<std::size_t>(3 * n + p) * W + l];
      }
    }
  }

  /// Fills the additive increment of step `step_index` from the noise streams.
  void draw_noise(Philox4x32Key key, std::span<const std::uint64_t, W> streams, std::uint64_t step_index) {
    const int n = modes();
    const int bps = noise_blocks_per_step(n);
    lane_normals<W>(key, streams, StreamPurpose::Noise, step_index * static_cast<std::uint64_t>(bps), bps,
                    normals_.data());
    set_noise_from_normals(normals_.data());
  }

  /// Scales unit normals ([a_re | a_im | b] x lanes) into the step increment.
  void set_noise_from_normals(const double* z) {
    const int n = modes();
    for (int p = 0; p < n; ++p) {
      const double sc = scales_.cavity[p];
      const double sr = scales_.raman[p];
      for (int l = 0; l < W; ++l) {
        const std::size_t o = static_cast<std::size_t>(p) * W + l;
        noise_.ar[o] = sc * z[static_cast<std::size_t>(p) * W + l];
        noise_.ai[o] = sc * z[static_cast<std::size_t>(n + p) * W + l];
        noise_.br[o] = 0.0;
        noise_.bi[o] = sr * z[static_cast<std::size_t>(2 * n + p) * W + l];
      }
    }
  }

  const std::vector<double>& last_normals() const { return normals_; }
  const LaneFields<W>& noise() const { return noise_; }

  /// One Heun predictor-corrector step with the current noise increment;
  /// both drift evaluations use the same ramp factor.
  void advance(double ramp) {
    kernel_.eval<W>(state_, ramp, f0_, scratch_);
    const double dt = dt_;
    auto predict = [dt](const AlignedDoubles& y, const AlignedDoubles& f, const AlignedDoubles& dw,
                        AlignedDoubles& out) {
      const std::size_t n = y.size();
      for (std::size_t i = 0; i < n; ++i) out[i] = y[i] + dt * f[i] + dw[i];
    };
    predict(state_.ar, f0_.ar, noise_.ar, pred_.ar);
    predict(state_.ai, f0_.ai, noise_.ai, pred_.ai);
    predict(state_.br, f0_.br, noise_.br, pred_.br);
    predict(state_.bi, f0_.bi, noise_.bi, pred_.bi);
    kernel_.eval<W>(pred_, ramp, f1_, scratch_);
    const double half = 0.5 * dt;
    auto correct = [half](AlignedDoubles& y, const AlignedDoubles& fa, const AlignedDoubles& fb,
                          const AlignedDoubles& dw) {
      const std::size_t n = y.size();
      for (std::size_t i = 0; i < n; ++i) y[i] += half * (fa[i] + fb[i]) + dw[i];
    };
    correct(state_.ar, f0_.ar, f1_.ar, noise_.ar);
    correct(state_.ai, f0_.ai, f1_.ai, noise_.ai);
    correct(state_.br, f0_.br, f1_.br, noise_.br);
    correct(state_.bi, f0_.bi, f1_.bi, noise_.bi);
  }

  /// Per-lane finiteness of the whole state.
  void finite_lanes(bool* ok) const {
    double sum[W] = {};
    const std::size_t n = static_cast<std::size_t>(modes());
    for (std::size_t p = 0; p < n; ++p) {
      for (int l = 0; l < W; ++l) {
        const std::size_t o = p * W + l;
        sum[l] += (state_.ar[o] + state_.ai[o]) + (state_.br[o] + state_.bi[o]);
      }
    }
    for (int l = 0; l < W; ++l) ok[l] = std::isfinite(sum[l]);
  }

  /// Zeroes a lane (used after an abort so NaNs do not slow the batch down).
  void clear_lane(int lane) {
    const std::size_t n = static_cast<std::size_t>(modes());
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t o = p * W + lane;
      state_.ar[o] = state_.ai[o] = state_.br[o] = state_.bi[o] = 0.0;
    }
  }

 private:
  DriftKernel kernel_;
  NoiseScales scales_;
  double dt_;
  LaneFields<W> state_, f0_, f1_, pred_, noise_;
  DriftScratch<W> scratch_;
  std::vector<double> normals_;
};

}  // namespace mmtwa
