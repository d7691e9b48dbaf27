#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "pixbrush/image.hpp"
#include "pixbrush/uv_inversion.hpp"
#include "pixbrush/vec.hpp"

namespace pixbrush {

enum class EncodingMode { AxisAligned, GaussianRandom };

// Fourier-feature positional encoding. Axis-aligned mode uses octave
// frequencies scale*2^k per coordinate axis; gaussian mode samples an
// F x 3 frequency matrix from the seed. Sampling procedure (contractual,
// reproducible): entries are drawn row-major (frequency outer, axis inner)
// from mt19937_64(seed), each entry = frequency_scale * n where
// n = sqrt(-2 ln u1) * cos(2 pi u2), u1 and u2 successive uniforms formed
// as (engine() >> 11) * 2^-53, u2 drawn immediately after u1, then u1
// redrawn while u1 == 0.
struct EncodingSpec {
  int num_frequencies = 6;
  double frequency_scale = 1.0;
  uint64_t seed = 0;
  EncodingMode mode = EncodingMode::AxisAligned;

  int output_dim() const {
    return mode == EncodingMode::AxisAligned ? 2 * num_frequencies * 3
                                             : 2 * num_frequencies;
  }
};

enum class HeadKind { Probability, Rgb };

// Batch: normalization uses statistics of the current batch (optimization
// passes). Running: uses the stored running statistics (extraction and
// rendering passes, and the public eval_* entry points).
enum class NormMode { Batch, Running };

// MLP field over 3D points: encoding, then kNumBlocks of
// linear + batch norm + ReLU, then a logistic-squashed head.
// Trainable parameters live in one flat vector with a fixed layout:
// per block [W (width x in, row-major), b, gamma, beta], then
// [head W (out x width, row-major), head b]. Running statistics are
// held separately (not trainable).
struct FieldParams {
  static constexpr int kNumBlocks = 6;
  static constexpr double kBnEps = 1e-5;

  EncodingSpec encoding;
  HeadKind head_kind = HeadKind::Probability;
  int width = 256;
  std::vector<double> params;
  std::vector<double> running_mean;  // kNumBlocks * width
  std::vector<double> running_var;   // kNumBlocks * width

  int out_dim() const { return head_kind == HeadKind::Probability ? 1 : 3; }
  int in_dim(int block) const { return block == 0 ? encoding.output_dim() : width; }

  size_t block_w_offset(int block) const;
  size_t block_b_offset(int block) const { return block_w_offset(block) + static_cast<size_t>(width) * in_dim(block); }
  size_t block_gamma_offset(int block) const { return block_b_offset(block) + width; }
  size_t block_beta_offset(int block) const { return block_gamma_offset(block) + width; }
  size_t head_w_offset() const { return block_w_offset(kNumBlocks); }
  size_t head_b_offset() const { return head_w_offset() + static_cast<size_t>(out_dim()) * width; }
  size_t param_count() const { return head_b_offset() + out_dim(); }
};

// Everything the backward pass needs from a forward evaluation.
struct FieldForward {
  NormMode mode = NormMode::Running;
  Eigen::MatrixXd encoded;                 // N x D
  std::vector<Eigen::MatrixXd> pre_norm;   // per block, N x width
  std::vector<Eigen::MatrixXd> normalized; // per block, N x width
  std::vector<Eigen::MatrixXd> activation; // per block, N x width (post ReLU)
  std::vector<Eigen::VectorXd> batch_mean; // stats actually used
  std::vector<Eigen::VectorXd> batch_var;
  Eigen::MatrixXd pre_head;                // N x out
  Eigen::MatrixXd output;                  // N x out, in (0,1)
};

Eigen::MatrixXd fourier_encode(const std::vector<Vec3>& points, const EncodingSpec& spec);

// Deterministic given seed. Hidden weights use scaled-normal init; head
// weights are small (sigma 0.01) with zero bias so a fresh probability
// head outputs near 0.5 and a fresh rgb head near mid gray.
FieldParams init_field_params(const EncodingSpec& spec, HeadKind head_kind, uint64_t seed,
                              int width = 256);

FieldForward field_forward(const FieldParams& params, const std::vector<Vec3>& points,
                           NormMode mode);

// Adjoint of field_forward: d_output is N x out_dim. Returns the gradient
// w.r.t. the flat parameter vector. In Batch mode the normalization
// statistics' dependence on the inputs is part of the chain rule.
std::vector<double> field_backward(const FieldParams& params, const FieldForward& fwd,
                                   const Eigen::MatrixXd& d_output);

// EMA update of running statistics from a Batch-mode forward.
void update_running_stats(FieldParams& params, const FieldForward& fwd, double momentum = 0.1);

// Running-statistics conveniences. eval_localization requires a
// probability head, eval_texture an rgb head.
std::vector<double> eval_localization(const FieldParams& params, const std::vector<Vec3>& points);
std::vector<std::array<double, 3>> eval_texture(const FieldParams& params,
                                                const std::vector<Vec3>& points);

// Evaluates both fields at every covered texel. Uncovered texels hold
// probability 0 and black. Returns {probability R x R x 1, rgb R x R x 3}.
struct TextureMaps {
  Image probability;
  Image rgb;
};
TextureMaps extract_maps(const FieldParams& loc_params, const FieldParams& tex_params,
                         const SurfaceSampleSet& samples);

}  // namespace pixbrush
